//! Batched forward pass, loss, and backpropagation through time.
//!
//! Per-step activations are stored time-major (`[T, B, K]`) so that each
//! timestep is one contiguous `[B, K]` block.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Array3, ArrayView2, ArrayView3, ArrayViewMut2, Axis};
use rayon::prelude::*;

use super::params::{Dims, Gradients, LstmLayerParams, ModelParams, TensorKind};
use super::LstmError;
use crate::scalar::Scalar;

/// Log arguments are clamped here so a saturated softmax cannot produce an
/// infinite loss.
pub const LOG_CLAMP: f64 = 1e-12;

/// Examples per work unit for batched passes. Fixed so gradient sums are
/// reduced in the same order regardless of thread count.
pub const CHUNK: usize = 128;

#[derive(Debug, Clone)]
struct LayerTrace<F> {
    /// activated gates, `[T, B, 4H]` in i, f, g, o blocks
    gates: Array3<F>,
    c: Array3<F>,
    /// tanh(c)
    tc: Array3<F>,
    h: Array3<F>,
}

impl<F: Scalar> LayerTrace<F> {
    fn zeros(t: usize, b: usize, h: usize) -> Self {
        Self {
            gates: Array3::zeros((t, b, 4 * h)),
            c: Array3::zeros((t, b, h)),
            tc: Array3::zeros((t, b, h)),
            h: Array3::zeros((t, b, h)),
        }
    }
}

/// Everything backward needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    dims: Dims,
    fingerprint: u64,
    /// time-major copy of the batch, `[T, B, D]`
    input: Array3<F>,
    /// post-ReLU input projection, `[T, B, H]`
    fc: Array3<F>,
    layers: [LayerTrace<F>; 2],
    pub logits: Array2<F>,
    pub probs: Array2<F>,
}

impl<F: Scalar> ForwardCache<F> {
    pub fn batch_size(&self) -> usize {
        self.probs.nrows()
    }

    pub fn steps(&self) -> usize {
        self.fc.len_of(Axis(0))
    }

    /// Hidden states of layer `layer` (0 or 1), `[T, B, H]`.
    pub fn hidden_states(&self, layer: usize) -> ArrayView3<'_, F> {
        self.layers[layer].h.view()
    }

    pub fn cell_states(&self, layer: usize) -> ArrayView3<'_, F> {
        self.layers[layer].c.view()
    }

    /// Activated gates of layer `layer`, `[T, B, 4H]`.
    pub fn gate_activations(&self, layer: usize) -> ArrayView3<'_, F> {
        self.layers[layer].gates.view()
    }
}

fn relu<F: Scalar>(v: F) -> F {
    if v > F::zero() {
        v
    } else {
        F::zero()
    }
}

/// Views a standard-layout `[T, B, K]` array as `[T·B, K]`.
fn flat<F>(a: &Array3<F>) -> ArrayView2<'_, F> {
    let (t, b, k) = a.dim();
    a.view().into_shape_with_order((t * b, k)).expect("standard layout")
}

fn flat_mut<F>(a: &mut Array3<F>) -> ArrayViewMut2<'_, F> {
    let (t, b, k) = a.dim();
    a.view_mut().into_shape_with_order((t * b, k)).expect("standard layout")
}

fn run_layer<F: Scalar>(p: &LstmLayerParams<F>, xs: &Array3<F>) -> LayerTrace<F> {
    let (steps, b, _) = xs.dim();
    let h = p.hidden();
    let bh = b * h;
    let mut tr = LayerTrace::zeros(steps, b, h);
    // input contributions for every step in one product
    {
        let mut z = flat_mut(&mut tr.gates);
        general_mat_mul(F::one(), &flat(xs), &p.w.t(), F::zero(), &mut z);
        z += &p.b;
    }
    let zeros = vec![F::zero(); bh];
    for t in 0..steps {
        let mut z = tr.gates.index_axis_mut(Axis(0), t);
        if t > 0 {
            general_mat_mul(F::one(), &tr.h.index_axis(Axis(0), t - 1), &p.u.t(), F::one(), &mut z);
        }

        let gates = z.into_slice().expect("contiguous step");
        let (c_done, c_rest) = tr.c.as_slice_mut().unwrap().split_at_mut(t * bh);
        let c_prev: &[F] = if t > 0 { &c_done[(t - 1) * bh..] } else { &zeros };
        let c_cur = &mut c_rest[..bh];
        let tc_cur = &mut tr.tc.as_slice_mut().unwrap()[t * bh..(t + 1) * bh];
        let h_cur = &mut tr.h.as_slice_mut().unwrap()[t * bh..(t + 1) * bh];

        for g in gates.chunks_exact_mut(4 * h) {
            F::sigmoid_slice(&mut g[..2 * h]);
            F::tanh_slice(&mut g[2 * h..3 * h]);
            F::sigmoid_slice(&mut g[3 * h..]);
        }
        for r in 0..b {
            let g = &gates[r * 4 * h..(r + 1) * 4 * h];
            let rows = r * h..(r + 1) * h;
            let (ig, rest) = g.split_at(h);
            let (fg, rest) = rest.split_at(h);
            let (cg, og) = rest.split_at(h);
            for ((((c, cp), i), f), cand) in c_cur[rows.clone()].iter_mut().zip(&c_prev[rows.clone()]).zip(ig).zip(fg).zip(cg) {
                *c = *f * *cp + *i * *cand;
            }
            tc_cur[rows.clone()].copy_from_slice(&c_cur[rows.clone()]);
            F::tanh_slice(&mut tc_cur[rows.clone()]);
            for ((hv, tc), o) in h_cur[rows.clone()].iter_mut().zip(&tc_cur[rows]).zip(og) {
                *hv = *o * *tc;
            }
        }
    }
    tr
}

fn softmax_rows<F: Scalar>(logits: &Array2<F>) -> Array2<F> {
    let mut probs = logits.clone();
    for mut row in probs.rows_mut() {
        let max = row.iter().fold(F::neg_infinity(), |a, &v| a.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    probs
}

/// Runs the network on `batch` (`[B, T, D]`) from zero initial states and
/// returns class probabilities `[B, C]` with the cache for [`backward`].
pub fn forward<F: Scalar>(
    params: &ModelParams<F>,
    batch: ArrayView3<'_, F>,
) -> Result<(Array2<F>, ForwardCache<F>), LstmError> {
    let dims = params.dims();
    let (b, steps, d) = batch.dim();
    if d != dims.input || b == 0 || steps == 0 {
        return Err(LstmError::ShapeMismatch(format!(
            "batch [{b} x {steps} x {d}] for a network with {} input channels",
            dims.input
        )));
    }
    if batch.iter().any(|v| !v.is_finite()) {
        return Err(LstmError::NonFiniteInput);
    }
    let h = dims.hidden;
    let input = batch.permuted_axes([1, 0, 2]).as_standard_layout().into_owned();
    let mut fc = Array3::<F>::zeros((steps, b, h));
    {
        let mut a = flat_mut(&mut fc);
        general_mat_mul(F::one(), &flat(&input), &params.fc_in.weight.t(), F::zero(), &mut a);
        a += &params.fc_in.bias;
        a.mapv_inplace(relu);
    }
    let l1 = run_layer(&params.lstm1, &fc);
    let l2 = run_layer(&params.lstm2, &l1.h);
    let last = l2.h.index_axis(Axis(0), steps - 1);
    let logits = last.dot(&params.fc_out.weight.t()) + &params.fc_out.bias;
    let probs = softmax_rows(&logits);
    let cache = ForwardCache {
        dims,
        fingerprint: params.fingerprint(),
        input,
        fc,
        layers: [l1, l2],
        logits,
        probs: probs.clone(),
    };
    Ok((probs, cache))
}

/// Σ over rows of `-Σ_c target_c ln(max(prob_c, 1e-12))`.
pub fn cross_entropy_sum<F: Scalar>(probs: ArrayView2<'_, F>, targets: ArrayView2<'_, F>) -> F {
    let floor = F::of(LOG_CLAMP);
    let mut total = F::zero();
    for (p, t) in probs.iter().zip(targets.iter()) {
        if *t != F::zero() {
            total = total - *t * p.max(floor).ln();
        }
    }
    total
}

/// Mean cross-entropy plus `lambda · Σ w²` over weight matrices.
pub fn loss<F: Scalar>(
    probs: ArrayView2<'_, F>,
    targets: ArrayView2<'_, F>,
    params: &ModelParams<F>,
    lambda: F,
) -> Result<F, LstmError> {
    if probs.dim() != targets.dim() || probs.nrows() == 0 {
        return Err(LstmError::ShapeMismatch(format!(
            "probs {:?} vs targets {:?}",
            probs.dim(),
            targets.dim()
        )));
    }
    let n = F::of(probs.nrows() as f64);
    Ok(cross_entropy_sum(probs, targets) / n + lambda * params.weight_sq_sum())
}

/// Backward through one LSTM step. `dh` is the total gradient reaching
/// `h_t`; `dc` carries the cell gradient from `t+1` in and to `t-1` out.
fn step_back<F: Scalar>(tr: &LayerTrace<F>, t: usize, dh: &[F], dc: &mut [F], dz: &mut [F]) {
    let b = tr.c.len_of(Axis(1));
    let h = tr.c.len_of(Axis(2));
    let bh = b * h;
    let gates = &tr.gates.as_slice().unwrap()[t * 4 * bh..(t + 1) * 4 * bh];
    let tc = &tr.tc.as_slice().unwrap()[t * bh..(t + 1) * bh];
    let c_all = tr.c.as_slice().unwrap();
    let one = F::one();
    for r in 0..b {
        let g = &gates[r * 4 * h..(r + 1) * 4 * h];
        let z = &mut dz[r * 4 * h..(r + 1) * 4 * h];
        for j in 0..h {
            let idx = r * h + j;
            let (i, f, cand, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let c_prev = if t > 0 { c_all[(t - 1) * bh + idx] } else { F::zero() };
            let tcv = tc[idx];
            let dht = dh[idx];
            let dct = dc[idx] + dht * o * (one - tcv * tcv);
            z[j] = dct * cand * i * (one - i);
            z[h + j] = dct * c_prev * f * (one - f);
            z[2 * h + j] = dct * i * (one - cand * cand);
            z[3 * h + j] = dht * tcv * o * (one - o);
            dc[idx] = dct * f;
        }
    }
}

fn add_col_sums<F: Scalar>(dst: &mut Array1<F>, m: ArrayView2<'_, F>) {
    for row in m.rows() {
        for (d, v) in dst.iter_mut().zip(row) {
            *d = *d + *v;
        }
    }
}

/// Weight and bias gradients of one layer from the pre-activation gradients
/// of every step: `dW += Σ_t dz_tᵀ x_t`, `dU += Σ_{t>0} dz_tᵀ h_{t-1}`.
fn layer_param_grads<F: Scalar>(g: &mut LstmLayerParams<F>, dz: &Array3<F>, xs: &Array3<F>, hs: &Array3<F>) {
    let (steps, b, _) = dz.dim();
    let dz_all = flat(dz);
    general_mat_mul(F::one(), &dz_all.t(), &flat(xs), F::one(), &mut g.w);
    if steps > 1 {
        let later = dz_all.slice(s![b.., ..]);
        let earlier = flat(hs).slice_move(s![..(steps - 1) * b, ..]);
        general_mat_mul(F::one(), &later.t(), &earlier, F::one(), &mut g.u);
    }
    add_col_sums(&mut g.b, dz_all);
}

/// Reverse pass through one layer given the gradient reaching each `h_t`
/// from above (`[T, B, H]`); returns `dz` for every step.
fn layer_back<F: Scalar>(tr: &LayerTrace<F>, p: &LstmLayerParams<F>, from_above: &Array3<F>) -> Array3<F> {
    let (steps, b, h) = tr.h.dim();
    let mut dz = Array3::<F>::zeros((steps, b, 4 * h));
    let mut dh = Array2::<F>::zeros((b, h));
    let mut dc = vec![F::zero(); b * h];
    for t in (0..steps).rev() {
        dh += &from_above.index_axis(Axis(0), t);
        let mut dz_t = dz.index_axis_mut(Axis(0), t);
        step_back(tr, t, dh.as_slice().unwrap(), &mut dc, dz_t.as_slice_mut().unwrap());
        general_mat_mul(F::one(), &dz_t, &p.u, F::zero(), &mut dh);
    }
    dz
}

/// Adds `scale · ∂(Σ cross-entropy)/∂θ` for the cached batch into `grads`.
/// No regularization term.
pub fn accumulate_data_gradients<F: Scalar>(
    cache: &ForwardCache<F>,
    targets: ArrayView2<'_, F>,
    params: &ModelParams<F>,
    scale: F,
    grads: &mut Gradients<F>,
) -> Result<(), LstmError> {
    if cache.dims != params.dims() || cache.fingerprint != params.fingerprint() {
        return Err(LstmError::CacheMismatch);
    }
    if targets.dim() != cache.probs.dim() {
        return Err(LstmError::ShapeMismatch(format!(
            "targets {:?} vs probs {:?}",
            targets.dim(),
            cache.probs.dim()
        )));
    }
    if !grads.same_shape(params) {
        return Err(LstmError::ShapeMismatch("gradient buffer layout".into()));
    }
    let steps = cache.steps();
    let b = cache.batch_size();
    let h = cache.dims.hidden;
    let [l1, l2] = &cache.layers;

    let dlogits = (&cache.probs - &targets).mapv(|v| v * scale);
    let h2_last = l2.h.index_axis(Axis(0), steps - 1);
    general_mat_mul(F::one(), &dlogits.t(), &h2_last, F::one(), &mut grads.fc_out.weight);
    add_col_sums(&mut grads.fc_out.bias, dlogits.view());

    let mut top = Array3::<F>::zeros((steps, b, h));
    top.index_axis_mut(Axis(0), steps - 1)
        .assign(&dlogits.dot(&params.fc_out.weight));

    // upper layer, whose inputs are h1
    let dz2 = layer_back(l2, &params.lstm2, &top);
    layer_param_grads(&mut grads.lstm2, &dz2, &l1.h, &l2.h);
    general_mat_mul(F::one(), &flat(&dz2), &params.lstm2.w, F::zero(), &mut flat_mut(&mut top));

    // lower layer, whose inputs are the projected a
    let dz1 = layer_back(l1, &params.lstm1, &top);
    layer_param_grads(&mut grads.lstm1, &dz1, &cache.fc, &l1.h);
    let mut da = Array2::<F>::zeros((steps * b, h));
    general_mat_mul(F::one(), &flat(&dz1), &params.lstm1.w, F::zero(), &mut da);
    zip_relu_mask(&mut da.view_mut(), flat(&cache.fc));
    general_mat_mul(F::one(), &da.t(), &flat(&cache.input), F::one(), &mut grads.fc_in.weight);
    add_col_sums(&mut grads.fc_in.bias, da.view());
    Ok(())
}

fn zip_relu_mask<F: Scalar>(da: &mut ArrayViewMut2<'_, F>, a: ArrayView2<'_, F>) {
    da.zip_mut_with(&a, |d, &act| {
        if act <= F::zero() {
            *d = F::zero();
        }
    });
}

/// `grads += 2 λ w` on weight matrices.
pub fn add_penalty_gradient<F: Scalar>(params: &ModelParams<F>, lambda: F, grads: &mut Gradients<F>) {
    if lambda == F::zero() {
        return;
    }
    let two_lambda = lambda + lambda;
    for (g, p) in grads.tensors_mut().into_iter().zip(params.tensors()) {
        if g.kind != TensorKind::Weight {
            continue;
        }
        for (gv, pv) in g.data.iter_mut().zip(p.data) {
            *gv = *gv + two_lambda * *pv;
        }
    }
}

/// Exact gradient of [`loss`] at the cached forward pass.
pub fn backward<F: Scalar>(
    cache: &ForwardCache<F>,
    targets: ArrayView2<'_, F>,
    params: &ModelParams<F>,
    lambda: F,
) -> Result<Gradients<F>, LstmError> {
    let mut grads = params.zeros_like();
    let scale = F::one() / F::of(cache.batch_size() as f64);
    accumulate_data_gradients(cache, targets, params, scale, &mut grads)?;
    add_penalty_gradient(params, lambda, &mut grads);
    Ok(grads)
}

/// Loss and gradients over a batch of any size, processed in fixed-size
/// chunks in parallel and summed in chunk order.
pub fn batch_loss_and_gradients<F: Scalar>(
    params: &ModelParams<F>,
    batch: ArrayView3<'_, F>,
    targets: ArrayView2<'_, F>,
    lambda: F,
) -> Result<(F, Gradients<F>), LstmError> {
    let b = batch.len_of(Axis(0));
    if targets.nrows() != b || b == 0 {
        return Err(LstmError::ShapeMismatch(format!(
            "{} target rows for {b} examples",
            targets.nrows()
        )));
    }
    let scale = F::one() / F::of(b as f64);
    let starts: Vec<usize> = (0..b).step_by(CHUNK).collect();
    let parts: Vec<Result<(F, Gradients<F>), LstmError>> = starts
        .par_iter()
        .map(|&lo| {
            let hi = (lo + CHUNK).min(b);
            let xb = batch.slice(s![lo..hi, .., ..]);
            let tb = targets.slice(s![lo..hi, ..]);
            let (probs, cache) = forward(params, xb)?;
            let ce = cross_entropy_sum(probs.view(), tb);
            let mut g = params.zeros_like();
            accumulate_data_gradients(&cache, tb, params, scale, &mut g)?;
            Ok((ce, g))
        })
        .collect();

    let mut ce_total = F::zero();
    let mut grads = params.zeros_like();
    for part in parts {
        let (ce, g) = part?;
        ce_total = ce_total + ce;
        grads.add_assign(&g);
    }
    add_penalty_gradient(params, lambda, &mut grads);
    Ok((ce_total * scale + lambda * params.weight_sq_sum(), grads))
}

/// Probabilities for a batch of any size, chunked like
/// [`batch_loss_and_gradients`].
pub fn predict_proba<F: Scalar>(params: &ModelParams<F>, batch: ArrayView3<'_, F>) -> Result<Array2<F>, LstmError> {
    let b = batch.len_of(Axis(0));
    let starts: Vec<usize> = (0..b).step_by(CHUNK).collect();
    let parts: Vec<Result<Array2<F>, LstmError>> = starts
        .par_iter()
        .map(|&lo| {
            let hi = (lo + CHUNK).min(b);
            forward(params, batch.slice(s![lo..hi, .., ..])).map(|(p, _)| p)
        })
        .collect();
    let mut out = Array2::zeros((b, params.dims().classes));
    for (lo, part) in starts.into_iter().zip(parts) {
        let p = part?;
        out.slice_mut(s![lo..lo + p.nrows(), ..]).assign(&p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::cell::{lstm_cell_forward, LstmState};
    use crate::lstm::params::{init_params, ParamTree};
    use ndarray::{array, Array1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_batch(seed: u64, b: usize, t: usize) -> Array3<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array3::from_shape_fn((b, t, 3), |_| rng.gen_range(-3.0..3.0))
    }

    /// Single-example forward built from the per-step cell, independent of
    /// the batched kernels.
    fn reference_probs(p: &ModelParams<f64>, window: ArrayView2<'_, f64>) -> Array1<f64> {
        let h = p.dims().hidden;
        let mut s1 = LstmState::zeros(h);
        let mut s2 = LstmState::zeros(h);
        for x in window.rows() {
            let a = (p.fc_in.weight.dot(&x) + &p.fc_in.bias).mapv(|v| v.max(0.0));
            s1 = lstm_cell_forward(a.view(), &s1, &p.lstm1).unwrap();
            s2 = lstm_cell_forward(s1.h.view(), &s2, &p.lstm2).unwrap();
        }
        let logits = p.fc_out.weight.dot(&s2.h) + &p.fc_out.bias;
        let m = logits.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let e = logits.mapv(|v| (v - m).exp());
        &e / e.sum()
    }

    #[test]
    fn rows_are_distributions() {
        let p = init_params::<f64>(3, Dims::new(3, 8, 3)).unwrap();
        let (probs, _) = forward(&p, random_batch(1, 5, 7).view()).unwrap();
        for row in probs.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn zero_model_is_uniform() {
        let p = ParamTree::<f32>::zeros(Dims::standard());
        let batch = random_batch(2, 4, 10).mapv(|v| v as f32);
        let (probs, _) = forward(&p, batch.view()).unwrap();
        assert!(probs.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn batched_forward_matches_reference_cell() {
        let p = init_params::<f64>(11, Dims::new(3, 5, 2)).unwrap();
        let batch = random_batch(4, 6, 9);
        let (probs, _) = forward(&p, batch.view()).unwrap();
        for (k, row) in probs.rows().into_iter().enumerate() {
            let want = reference_probs(&p, batch.index_axis(Axis(0), k));
            for (a, b) in row.iter().zip(want.iter()) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn batch_position_does_not_matter() {
        let p = init_params::<f32>(8, Dims::standard()).unwrap();
        let batch = random_batch(5, 32, 20).mapv(|v| v as f32);
        let (all, _) = forward(&p, batch.view()).unwrap();
        for k in [0, 13, 31] {
            let one = batch.slice(s![k..k + 1, .., ..]);
            let (single, _) = forward(&p, one).unwrap();
            for c in 0..2 {
                assert!((single[[0, c]] - all[[k, c]]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn gate_ranges() {
        let mut p = init_params::<f64>(21, Dims::new(3, 6, 2)).unwrap();
        p.scale(4.0);
        let (_, cache) = forward(&p, random_batch(9, 3, 12).mapv(|v| v * 5.0).view()).unwrap();
        for layer in 0..2 {
            let g = cache.gate_activations(layer);
            let h = 6;
            for (k, v) in g.iter().enumerate() {
                let block = (k % (4 * h)) / h;
                if block == 2 {
                    assert!((-1.0..=1.0).contains(v));
                } else {
                    assert!((0.0..=1.0).contains(v));
                }
            }
            assert!(cache.hidden_states(layer).iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn rejects_bad_input() {
        let p = init_params::<f64>(1, Dims::new(3, 4, 2)).unwrap();
        let bad = Array3::<f64>::zeros((2, 5, 4));
        assert!(matches!(forward(&p, bad.view()), Err(LstmError::ShapeMismatch(_))));
        let mut nan = Array3::<f64>::zeros((2, 5, 3));
        nan[[1, 2, 0]] = f64::NAN;
        assert!(matches!(forward(&p, nan.view()), Err(LstmError::NonFiniteInput)));
    }

    #[test]
    fn loss_examples() {
        let p = ParamTree::<f64>::zeros(Dims::new(3, 2, 2));
        let half = array![[0.5, 0.5]];
        let target = array![[1.0, 0.0]];
        let l = loss(half.view(), target.view(), &p, 0.0).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);

        let perfect = array![[1.0, 0.0]];
        assert_eq!(loss(perfect.view(), target.view(), &p, 0.0).unwrap(), 0.0);

        let mut p2 = p.clone();
        p2.fc_out.weight.fill(2.0);
        let penalty = loss(perfect.view(), target.view(), &p2, 0.01).unwrap();
        assert!((penalty - 0.16).abs() < 1e-12);

        let clamped = array![[0.0, 1.0]];
        let l = loss(clamped.view(), target.view(), &p, 0.0).unwrap();
        assert!((l + LOG_CLAMP.ln()).abs() < 1e-9);
    }

    #[test]
    fn penalty_strictly_increases_loss() {
        let p = init_params::<f64>(4, Dims::new(3, 3, 2)).unwrap();
        let batch = random_batch(3, 2, 4);
        let (probs, _) = forward(&p, batch.view()).unwrap();
        let t = array![[1.0, 0.0], [0.0, 1.0]];
        let base = loss(probs.view(), t.view(), &p, 0.0).unwrap();
        let reg = loss(probs.view(), t.view(), &p, 0.01).unwrap();
        assert!(reg > base);
    }

    #[test]
    fn output_bias_gradient_vanishes_at_targets() {
        // all-zero params give probs [0.5, 0.5]; use soft targets equal to them
        let p = ParamTree::<f64>::zeros(Dims::new(3, 3, 2));
        let (probs, cache) = forward(&p, random_batch(6, 3, 4).view()).unwrap();
        let g = backward(&cache, probs.view(), &p, 0.0).unwrap();
        assert!(g.fc_out.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn only_penalty_survives_on_zero_inputs() {
        let mut p = init_params::<f64>(7, Dims::new(3, 4, 2)).unwrap();
        // zero hidden path: with zero input and zero recurrent/bias terms
        // the last hidden state is exactly zero
        p.fc_in.bias.fill(0.0);
        p.lstm1.b.fill(0.0);
        p.lstm2.b.fill(0.0);
        let batch = Array3::<f64>::zeros((3, 5, 3));
        let (probs, cache) = forward(&p, batch.view()).unwrap();
        let g = backward(&cache, probs.view(), &p, 0.1).unwrap();
        for (gv, wv) in g.fc_out.weight.iter().zip(p.fc_out.weight.iter()) {
            assert!((gv - 2.0 * 0.1 * wv).abs() < 1e-15);
        }
    }

    #[test]
    fn cache_from_other_params_is_rejected() {
        let p = init_params::<f64>(1, Dims::new(3, 3, 2)).unwrap();
        let q = init_params::<f64>(2, Dims::new(3, 3, 2)).unwrap();
        let (_, cache) = forward(&p, random_batch(1, 2, 3).view()).unwrap();
        let t = array![[1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(backward(&cache, t.view(), &q, 0.0), Err(LstmError::CacheMismatch)));
    }

    #[test]
    fn chunked_pass_matches_single_pass() {
        let p = init_params::<f64>(12, Dims::new(3, 4, 2)).unwrap();
        let b = CHUNK + 37;
        let batch = random_batch(8, b, 6);
        let targets = Array2::from_shape_fn((b, 2), |(r, c)| if (r % 3 == 0) == (c == 0) { 1.0 } else { 0.0 });
        let (probs, cache) = forward(&p, batch.view()).unwrap();
        let single_loss = loss(probs.view(), targets.view(), &p, 0.01).unwrap();
        let single = backward(&cache, targets.view(), &p, 0.01).unwrap();
        let (chunked_loss, chunked) = batch_loss_and_gradients(&p, batch.view(), targets.view(), 0.01).unwrap();
        assert!((single_loss - chunked_loss).abs() < 1e-12);
        for (a, b) in single.tensors().iter().zip(chunked.tensors().iter()) {
            for (x, y) in a.data.iter().zip(b.data) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        let pp = predict_proba(&p, batch.view()).unwrap();
        assert!((&pp - &probs).iter().all(|v| v.abs() < 1e-15));
    }
}
