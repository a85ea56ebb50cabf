//! Compares backpropagated gradients to central finite differences on a
//! small network, in both precisions.
//!
//! cargo run --example gradient_check

use harlstm::lstm::{grad_check, init_params, Dims, ModelParams};
use ndarray::{Array2, Array3};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (b, t, h) = (2, 5, 3);
    let params = init_params::<f64>(9, Dims::new(3, h, 2))?;
    let x = Array3::from_shape_fn((b, t, 3), |(i, j, k)| ((i * 31 + j * 7 + k) as f64 * 0.77).sin() * 2.0);
    let y = Array2::from_shape_fn((b, 2), |(i, c)| f64::from(u8::from(i % 2 == c)));

    for lambda in [0.0, 0.01] {
        let r = grad_check(&params, x.view(), y.view(), lambda, 1e-5)?;
        println!(
            "64-bit lambda {lambda}: {} parameters, max relative error {:.2e} at {}[{}]",
            r.checked, r.max_relative_error, r.worst_tensor, r.worst_index
        );
        let p32: ModelParams<f32> = params.cast();
        let r = grad_check(&p32, x.mapv(|v| v as f32).view(), y.mapv(|v| v as f32).view(), lambda, 1e-5)?;
        println!(
            "32-bit lambda {lambda}: max relative error {:.2e} at {}[{}] (analytic {:.3e}, numeric {:.3e})",
            r.max_relative_error, r.worst_tensor, r.worst_index, r.analytic, r.numeric
        );
    }
    Ok(())
}
