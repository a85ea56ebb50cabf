//! One forward pass through a freshly initialised network: class
//! probabilities, the loss and the range of every gate.
//!
//! cargo run --example lstm_forward

use harlstm::lstm::{forward, init_params, loss, Dims};
use ndarray::{Array2, Array3};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = init_params::<f64>(42, Dims::standard())?;
    println!("{} parameters", params.num_params());

    let (b, t) = (4, 150);
    let batch = Array3::from_shape_fn((b, t, 3), |(i, j, k)| {
        let phase = (j as f64 / 25.0) * (1.0 + i as f64);
        [phase.sin(), phase.cos(), 9.81][k]
    });
    let targets = Array2::from_shape_fn((b, 2), |(i, c)| f64::from(u8::from(i % 2 == c)));

    let (probs, cache) = forward(&params, batch.view())?;
    for (i, row) in probs.rows().into_iter().enumerate() {
        println!("window {i}: p(eating) {:.4}  p(other) {:.4}", row[0], row[1]);
    }
    println!("loss with lambda 0.0015: {:.6}", loss(probs.view(), targets.view(), &params, 0.0015)?);

    let h = params.dims().hidden;
    for layer in 0..2 {
        let gates = cache.gate_activations(layer);
        for (g, name) in ["input", "forget", "candidate", "output"].iter().enumerate() {
            let block = gates.slice(ndarray::s![.., .., g * h..(g + 1) * h]);
            let lo = block.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = block.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            println!("layer {} {name:<9} gate in [{lo:+.3}, {hi:+.3}]", layer + 1);
        }
    }
    Ok(())
}
