//! Seeded mini-batch training, per-epoch history and prediction.

use std::ops::ControlFlow;
use std::time::Instant;

use ndarray::{Array2, Array3, ArrayView3, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lstm::network::{batch_loss_and_gradients, loss, predict_proba};
use crate::lstm::optim::{optimizer_step, OptimizerKind, OptimizerState};
use crate::lstm::params::{init_params, Dims, ModelParams};
use crate::lstm::LstmError;
use crate::scalar::{Precision, Scalar};
use crate::window::{SplitPair, WindowedDataset, CHANNELS, DEFAULT_STEP, DEFAULT_WINDOW};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub window_size: usize,
    pub step: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda: f64,
    pub seed: u64,
    pub precision: Precision,
    pub hidden: usize,
    pub optimizer: OptimizerKind,
    /// Rescale the gradient when its global L2 norm exceeds this.
    pub clip_norm: Option<f64>,
    /// When false the `seconds` column is written as 0 so that repeated
    /// runs produce byte-identical history files.
    pub record_wall_clock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            window_size: DEFAULT_WINDOW,
            step: DEFAULT_STEP,
            learning_rate: 0.0025,
            epochs: 50,
            batch_size: 1024,
            lambda: 0.0015,
            seed: 0,
            precision: Precision::F32,
            hidden: 64,
            optimizer: OptimizerKind::Adam,
            clip_norm: None,
            record_wall_clock: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.window_size == 0 || self.step == 0 || self.batch_size == 0 || self.hidden == 0 {
            return Err("window_size, step, batch_size and hidden must be positive".into());
        }
        if self.step > self.window_size {
            return Err(format!("step {} exceeds window size {}", self.step, self.window_size));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(format!("learning rate {} must be finite and non-negative", self.learning_rate));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(format!("lambda {} must be finite and non-negative", self.lambda));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(format!("clip norm {c} must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

pub const HISTORY_HEADER: &str = "epoch,train_loss,train_acc,test_loss,test_acc,seconds";

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(HISTORY_HEADER);
        out.push('\n');
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{},{:.3}\n",
                r.epoch, r.train_loss, r.train_acc, r.test_loss, r.test_acc, r.seconds
            ));
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum TrainError<F: Scalar> {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("loss became non-finite at epoch {epoch}, step {step}")]
    DivergedLoss {
        epoch: usize,
        step: usize,
        /// Parameters before the step that produced the non-finite loss.
        last_good: Box<ModelParams<F>>,
        history: TrainHistory,
    },
    #[error(transparent)]
    Model(#[from] LstmError),
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<F> {
    pub params: ModelParams<F>,
    pub history: TrainHistory,
    pub optimizer: OptimizerState<F>,
}

/// Dense `[N, W, 3]` inputs and one-hot `[N, C]` targets.
pub fn dataset_tensors<F: Scalar>(ds: &WindowedDataset) -> (Array3<F>, Array2<F>) {
    let (n, w, c) = (ds.len(), ds.window_size, ds.class_map.len());
    let mut x = Array3::<F>::zeros((n, w, CHANNELS));
    let mut y = Array2::<F>::zeros((n, c));
    for (i, win) in ds.windows.iter().enumerate() {
        for (t, row) in win.values.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                x[[i, t, k]] = F::of(*v as f64);
            }
        }
        y[[i, win.label_index]] = F::one();
    }
    (x, y)
}

/// Row-wise argmax; ties go to the lower index.
pub fn argmax_rows<F: Scalar>(probs: &Array2<F>) -> Vec<usize> {
    probs
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn check_dataset<F: Scalar>(params: &ModelParams<F>, ds: &WindowedDataset) -> Result<(), LstmError> {
    let dims = params.dims();
    if ds.class_map.len() != dims.classes {
        return Err(LstmError::ShapeMismatch(format!(
            "dataset has {} classes, model has {}",
            ds.class_map.len(),
            dims.classes
        )));
    }
    if let Some(w) = ds.windows.iter().find(|w| w.values.len() != ds.window_size) {
        return Err(LstmError::ShapeMismatch(format!(
            "window at offset {} has {} samples, dataset declares {}",
            w.source.offset,
            w.values.len(),
            ds.window_size
        )));
    }
    Ok(())
}

/// Predicted class index per window.
pub fn predict<F: Scalar>(params: &ModelParams<F>, ds: &WindowedDataset) -> Result<Vec<usize>, LstmError> {
    check_dataset(params, ds)?;
    if ds.is_empty() {
        return Ok(Vec::new());
    }
    let (x, _) = dataset_tensors::<F>(ds);
    Ok(argmax_rows(&predict_proba(params, x.view())?))
}

/// Loss (with penalty) and accuracy of `params` on prepared tensors.
pub fn evaluate_split<F: Scalar>(
    params: &ModelParams<F>,
    x: ArrayView3<'_, F>,
    y: &Array2<F>,
    lambda: F,
) -> Result<(f64, f64), LstmError> {
    let probs = predict_proba(params, x)?;
    let l = loss(probs.view(), y.view(), params, lambda)?;
    let pred = argmax_rows(&probs);
    let truth = argmax_rows(y);
    let hits = pred.iter().zip(&truth).filter(|(a, b)| a == b).count();
    Ok((l.as_f64(), hits as f64 / truth.len() as f64))
}

/// Per-epoch visiting order: a function of `(seed, epoch)` only.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

fn gather<F: Scalar>(x: &Array3<F>, y: &Array2<F>, idx: &[usize]) -> (Array3<F>, Array2<F>) {
    (x.select(Axis(0), idx), y.select(Axis(0), idx))
}

/// Trains a freshly initialised network (seeded by `cfg.seed`).
pub fn train<F: Scalar>(split: &SplitPair, cfg: &TrainConfig) -> Result<TrainOutcome<F>, TrainError<F>> {
    let dims = Dims::new(CHANNELS, cfg.hidden, split.train.class_map.len());
    let params = init_params::<F>(cfg.seed, dims)?;
    train_from(params, split, cfg, |_| {})
}

/// Trains `params` in place of a fresh initialisation, calling `on_epoch`
/// after each epoch's history row is computed.
pub fn train_from<F: Scalar>(
    params: ModelParams<F>,
    split: &SplitPair,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<F>, TrainError<F>> {
    train_until(params, split, cfg, |r| {
        on_epoch(r);
        ControlFlow::Continue(())
    })
}

/// Like [`train_from`], but stops after any epoch for which `on_epoch`
/// returns `Break`.
pub fn train_until<F: Scalar>(
    mut params: ModelParams<F>,
    split: &SplitPair,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord) -> ControlFlow<()>,
) -> Result<TrainOutcome<F>, TrainError<F>> {
    cfg.validate().map_err(TrainError::InvalidConfig)?;
    if split.train.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if split.test.is_empty() {
        return Err(TrainError::EmptySplit("test"));
    }
    for ds in [&split.train, &split.test] {
        if ds.window_size != cfg.window_size {
            return Err(LstmError::ShapeMismatch(format!(
                "dataset windows have {} samples, configuration says {}",
                ds.window_size, cfg.window_size
            ))
            .into());
        }
        check_dataset(&params, ds)?;
    }

    let (xtr, ytr) = dataset_tensors::<F>(&split.train);
    let (xte, yte) = dataset_tensors::<F>(&split.test);
    let lambda = F::of(cfg.lambda);
    let lr = F::of(cfg.learning_rate);
    let mut state = OptimizerState::new(cfg.optimizer, &params);
    let mut history = TrainHistory::default();
    let n = split.train.len();

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let order = epoch_order(n, cfg.seed, epoch);
        for (step, idx) in order.chunks(cfg.batch_size).enumerate() {
            let (xb, yb) = gather(&xtr, &ytr, idx);
            let (l, mut g) = batch_loss_and_gradients(&params, xb.view(), yb.view(), lambda)?;
            if !l.is_finite() || !g.is_finite() {
                return Err(TrainError::DivergedLoss {
                    epoch: epoch + 1,
                    step,
                    last_good: Box::new(params),
                    history,
                });
            }
            if let Some(max) = cfg.clip_norm {
                let norm = g.global_norm().as_f64();
                if norm > max {
                    g.scale(F::of(max / norm));
                }
            }
            let before = params.clone();
            optimizer_step(&mut params, &g, &mut state, lr)?;
            if !params.is_finite() {
                return Err(TrainError::DivergedLoss {
                    epoch: epoch + 1,
                    step,
                    last_good: Box::new(before),
                    history,
                });
            }
        }
        let (train_loss, train_acc) = evaluate_split(&params, xtr.view(), &ytr, lambda)?;
        let (test_loss, test_acc) = evaluate_split(&params, xte.view(), &yte, lambda)?;
        if !train_loss.is_finite() || !test_loss.is_finite() {
            return Err(TrainError::DivergedLoss {
                epoch: epoch + 1,
                step: n.div_ceil(cfg.batch_size),
                last_good: Box::new(params),
                history,
            });
        }
        let record = EpochRecord {
            epoch: epoch + 1,
            train_loss,
            train_acc,
            test_loss,
            test_acc,
            seconds: if cfg.record_wall_clock {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        };
        history.epochs.push(record);
        if on_epoch(&record).is_break() {
            break;
        }
    }
    Ok(TrainOutcome {
        params,
        history,
        optimizer: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::params::ParamTree;
    use crate::window::{ClassMap, Window, WindowSource};

    /// Two linearly separable classes: a constant positive or negative
    /// offset on every channel, with a little per-window variation.
    fn separable(n: usize, w: usize) -> WindowedDataset {
        let windows = (0..n)
            .map(|i| {
                let label = i % 2;
                let sign = if label == 0 { 1.0 } else { -1.0 };
                let wobble = (i as f32 * 0.37).sin() * 0.2;
                Window {
                    values: (0..w)
                        .map(|t| {
                            let v = sign * (1.0 + wobble) + 0.1 * (t as f32 * 0.5).cos();
                            [v, 0.5 * v, -v]
                        })
                        .collect(),
                    label_index: label,
                    source: WindowSource { segment: i, offset: 0 },
                }
            })
            .collect();
        WindowedDataset {
            windows,
            class_map: ClassMap::binary("eating"),
            window_size: w,
            step: 1,
        }
    }

    fn pair(n: usize, w: usize) -> SplitPair {
        let ds = separable(n, w);
        SplitPair {
            train: ds.clone(),
            test: ds,
            train_indices: (0..n).collect(),
            test_indices: (0..n).collect(),
            seed: 0,
        }
    }

    fn small_cfg(w: usize) -> TrainConfig {
        TrainConfig {
            window_size: w,
            step: 1,
            hidden: 8,
            batch_size: 8,
            epochs: 3,
            seed: 11,
            record_wall_clock: false,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let split = pair(8, 6);
        let cfg = TrainConfig { epochs: 0, ..small_cfg(6) };
        let out = train::<f64>(&split, &cfg).unwrap();
        let init = init_params::<f64>(cfg.seed, Dims::new(3, 8, 2)).unwrap();
        assert_eq!(out.params, init);
        assert!(out.history.is_empty());
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let split = pair(8, 6);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            lambda: 0.0,
            ..small_cfg(6)
        };
        let out = train::<f64>(&split, &cfg).unwrap();
        assert_eq!(out.params, init_params::<f64>(cfg.seed, Dims::new(3, 8, 2)).unwrap());
        assert_eq!(out.history.len(), 3);
    }

    #[test]
    fn step_count_includes_partial_batch() {
        let split = pair(20, 4);
        let cfg = TrainConfig { epochs: 2, ..small_cfg(4) };
        let out = train::<f64>(&split, &cfg).unwrap();
        // ceil(20 / 8) = 3 steps per epoch
        assert_eq!(out.optimizer.step, 6);
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let split = pair(12, 5);
        let cfg = small_cfg(5);
        let a = train::<f64>(&split, &cfg).unwrap();
        let b = train::<f64>(&split, &cfg).unwrap();
        assert_eq!(a.history.to_csv(), b.history.to_csv());
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn epoch_order_depends_on_seed_and_epoch_only() {
        assert_eq!(epoch_order(50, 3, 7), epoch_order(50, 3, 7));
        assert_ne!(epoch_order(50, 3, 7), epoch_order(50, 3, 8));
        assert_ne!(epoch_order(50, 3, 7), epoch_order(50, 4, 7));
        let mut o = epoch_order(50, 3, 7);
        o.sort_unstable();
        assert_eq!(o, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn overfits_tiny_set() {
        let split = pair(32, 10);
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 32,
            hidden: 16,
            ..small_cfg(10)
        };
        let mut reached = None;
        let out = train_from(
            init_params::<f64>(cfg.seed, Dims::new(3, 16, 2)).unwrap(),
            &split,
            &cfg,
            |r| {
                if reached.is_none() && r.train_acc == 1.0 {
                    reached = Some(r.epoch);
                }
            },
        )
        .unwrap();
        assert!(reached.is_some(), "{:?}", out.history.last());
        assert_eq!(predict(&out.params, &split.train).unwrap(), split.train.labels());
    }

    #[test]
    fn early_stop_keeps_completed_epochs() {
        let split = pair(8, 6);
        let cfg = small_cfg(6);
        let init = init_params::<f64>(cfg.seed, Dims::new(3, 8, 2)).unwrap();
        let out = train_until(init, &split, &cfg, |r| {
            if r.epoch == 2 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .unwrap();
        assert_eq!(out.history.len(), 2);
        let full = train::<f64>(&split, &TrainConfig { epochs: 2, ..cfg }).unwrap();
        assert_eq!(out.params, full.params);
    }

    #[test]
    fn uniform_model_predicts_index_zero() {
        let ds = separable(6, 4);
        let p = ParamTree::<f32>::zeros(Dims::new(3, 4, 2));
        assert_eq!(predict(&p, &ds).unwrap(), vec![0; 6]);
    }

    #[test]
    fn permutation_commutes_with_predict() {
        let ds = separable(10, 5);
        let p = init_params::<f64>(5, Dims::new(3, 4, 2)).unwrap();
        let base = predict(&p, &ds).unwrap();
        let perm = [3, 1, 4, 0, 9, 2, 6, 5, 8, 7];
        let shuffled = predict(&p, &ds.select(&perm)).unwrap();
        assert_eq!(shuffled, perm.iter().map(|&i| base[i]).collect::<Vec<_>>());
    }

    #[test]
    fn diverging_run_aborts() {
        let split = pair(8, 4);
        let cfg = TrainConfig {
            learning_rate: 1e30,
            optimizer: OptimizerKind::Sgd,
            epochs: 5,
            ..small_cfg(4)
        };
        match train::<f32>(&split, &cfg) {
            Err(TrainError::DivergedLoss { last_good, .. }) => assert!(last_good.is_finite()),
            other => panic!("expected divergence, got {:?}", other.map(|o| o.history)),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut split = pair(8, 4);
        assert!(matches!(
            train::<f64>(&split, &small_cfg(5)),
            Err(TrainError::Model(LstmError::ShapeMismatch(_)))
        ));
        split.test.windows.clear();
        assert!(matches!(train::<f64>(&split, &small_cfg(4)), Err(TrainError::EmptySplit("test"))));
        let cfg = TrainConfig { step: 9, ..small_cfg(4) };
        assert!(matches!(train::<f64>(&pair(8, 4), &cfg), Err(TrainError::InvalidConfig(_))));
    }

    #[test]
    fn history_csv_layout() {
        let h = TrainHistory {
            epochs: vec![EpochRecord {
                epoch: 1,
                train_loss: 0.5,
                train_acc: 0.75,
                test_loss: 0.625,
                test_acc: 1.0,
                seconds: 0.0,
            }],
        };
        assert_eq!(h.to_csv(), format!("{HISTORY_HEADER}\n1,0.5,0.75,0.625,1,0.000\n"));
    }
}
