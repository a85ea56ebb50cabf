//! Sliding-window segmentation, class mapping, balancing and train/test splits.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{LabeledSegment, Sample};

pub const DEFAULT_WINDOW: usize = 150;
pub const DEFAULT_STEP: usize = 10;
pub const DEFAULT_TRAIN_RATIO: f64 = 0.8;
pub const CHANNELS: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum WindowError {
    #[error("bad window geometry: window {window}, step {step} (need 0 < step <= window)")]
    BadGeometry { window: usize, step: usize },
    #[error("label index {index} out of range for {classes} classes")]
    IndexOutOfRange { index: usize, classes: usize },
    #[error("class {0:?} has no segment long enough to produce a window")]
    EmptyClass(String),
    #[error("label {0:?} is not in the class map")]
    UnknownLabel(String),
    #[error("invalid class map: {0}")]
    InvalidClassMap(String),
    #[error("split of {n} windows at ratio {ratio} leaves one side empty")]
    DegenerateSplit { n: usize, ratio: f64 },
    #[error("labels and samples differ in length ({samples} vs {labels})")]
    LengthMismatch { samples: usize, labels: usize },
}

/// Number of windows of length `window` at stride `step` that fit in `len`
/// samples: `max(0, floor((len - window) / step) + 1)`.
pub fn window_count(len: usize, window: usize, step: usize) -> usize {
    if window == 0 || step == 0 || len < window {
        0
    } else {
        (len - window) / step + 1
    }
}

fn check_geometry(window: usize, step: usize) -> Result<(), WindowError> {
    if window == 0 || step == 0 || step > window {
        Err(WindowError::BadGeometry { window, step })
    } else {
        Ok(())
    }
}

/// Start offsets of every window in a sequence of length `len`.
pub fn window_offsets(len: usize, window: usize, step: usize) -> impl Iterator<Item = usize> {
    (0..window_count(len, window, step)).map(move |k| k * step)
}

/// Ordered activity names plus the designated positive class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassMap {
    names: Vec<String>,
    positive: usize,
}

impl ClassMap {
    pub fn new<S: AsRef<str>>(names: &[S], positive: &str) -> Result<Self, WindowError> {
        let names: Vec<String> = names.iter().map(|n| n.as_ref().trim().to_lowercase()).collect();
        if names.len() < 2 {
            return Err(WindowError::InvalidClassMap(format!(
                "need at least two classes, got {}",
                names.len()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(WindowError::InvalidClassMap(format!("duplicate class {n:?}")));
            }
        }
        let positive_name = positive.trim().to_lowercase();
        let positive = names
            .iter()
            .position(|n| *n == positive_name)
            .ok_or_else(|| WindowError::InvalidClassMap(format!("positive class {positive:?} missing")))?;
        Ok(Self { names, positive })
    }

    pub fn from_parts(names: Vec<String>, positive: usize) -> Result<Self, WindowError> {
        let pos = names
            .get(positive)
            .cloned()
            .ok_or_else(|| WindowError::InvalidClassMap(format!("positive index {positive} out of range")))?;
        Self::new(&names, &pos)
    }

    /// The two-neuron layout: `[positive, "other"]`.
    pub fn binary(positive: &str) -> Self {
        Self::new(&[positive, "other"], positive).expect("binary class map is valid")
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn positive(&self) -> usize {
        self.positive
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        let name = name.trim().to_lowercase();
        self.names.iter().position(|n| *n == name)
    }

    /// Maps an activity label to its class. Labels without their own class
    /// fall into `other` when the map has one.
    pub fn resolve(&self, label: &str) -> Result<usize, WindowError> {
        self.index_of(label)
            .or_else(|| self.index_of("other"))
            .ok_or_else(|| WindowError::UnknownLabel(label.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowSource {
    pub segment: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// Row-major `[W][x, y, z]` in m/s².
    pub values: Vec<[f32; CHANNELS]>,
    pub label_index: usize,
    pub source: WindowSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub windows: Vec<Window>,
    pub class_map: ClassMap,
    pub window_size: usize,
    pub step: usize,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.windows.iter().map(|w| w.label_index).collect()
    }

    /// One-hot target rows, one per window.
    pub fn targets(&self) -> Vec<Vec<f32>> {
        let c = self.class_map.len();
        self.windows
            .iter()
            .map(|w| one_hot(w.label_index, c).expect("window labels are in range"))
            .collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_map.len()];
        for w in &self.windows {
            counts[w.label_index] += 1;
        }
        counts
    }

    /// Subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            windows: indices.iter().map(|&i| self.windows[i].clone()).collect(),
            class_map: self.class_map.clone(),
            window_size: self.window_size,
            step: self.step,
        }
    }
}

fn to_row(s: &Sample) -> [f32; CHANNELS] {
    [s.x as f32, s.y as f32, s.z as f32]
}

/// Cuts every segment into windows. Windows never straddle two segments;
/// output order is segment order, then offset order.
pub fn slide(
    segments: &[LabeledSegment],
    class_map: &ClassMap,
    window: usize,
    step: usize,
) -> Result<WindowedDataset, WindowError> {
    check_geometry(window, step)?;
    let mut windows = Vec::new();
    for (seg_idx, seg) in segments.iter().enumerate() {
        let label_index = class_map.resolve(&seg.label)?;
        for offset in window_offsets(seg.len(), window, step) {
            windows.push(Window {
                values: seg.samples[offset..offset + window].iter().map(to_row).collect(),
                label_index,
                source: WindowSource {
                    segment: seg_idx,
                    offset,
                },
            });
        }
    }
    Ok(WindowedDataset {
        windows,
        class_map: class_map.clone(),
        window_size: window,
        step,
    })
}

/// Windows a continuous stream that carries a label per sample, labeling
/// each window with [`mode_label`] of the labels it covers.
pub fn slide_stream<S: AsRef<str>>(
    samples: &[Sample],
    labels: &[S],
    class_map: &ClassMap,
    window: usize,
    step: usize,
) -> Result<WindowedDataset, WindowError> {
    check_geometry(window, step)?;
    if samples.len() != labels.len() {
        return Err(WindowError::LengthMismatch {
            samples: samples.len(),
            labels: labels.len(),
        });
    }
    let mut windows = Vec::new();
    for offset in window_offsets(samples.len(), window, step) {
        let label = mode_label(&labels[offset..offset + window]);
        windows.push(Window {
            values: samples[offset..offset + window].iter().map(to_row).collect(),
            label_index: class_map.resolve(label)?,
            source: WindowSource { segment: 0, offset },
        });
    }
    Ok(WindowedDataset {
        windows,
        class_map: class_map.clone(),
        window_size: window,
        step,
    })
}

/// Most frequent label. Ties go to the tied label whose last occurrence is
/// latest. Panics on an empty slice.
pub fn mode_label<S: AsRef<str>>(labels: &[S]) -> &str {
    assert!(!labels.is_empty(), "mode of an empty label list");
    let mut stats: HashMap<&str, (usize, usize)> = HashMap::new();
    for (pos, l) in labels.iter().enumerate() {
        let e = stats.entry(l.as_ref()).or_insert((0, pos));
        e.0 += 1;
        e.1 = pos;
    }
    stats
        .into_iter()
        .max_by_key(|&(_, (count, last))| (count, last))
        .map(|(label, _)| label)
        .expect("non-empty")
}

pub fn one_hot(label_index: usize, classes: usize) -> Result<Vec<f32>, WindowError> {
    if label_index >= classes {
        return Err(WindowError::IndexOutOfRange {
            index: label_index,
            classes,
        });
    }
    let mut v = vec![0.0; classes];
    v[label_index] = 1.0;
    Ok(v)
}

/// Projected window count per label, in first-appearance order.
pub fn projected_counts(segments: &[LabeledSegment], window: usize, step: usize) -> Vec<(String, usize)> {
    let mut out: Vec<(String, usize)> = Vec::new();
    for seg in segments {
        let n = window_count(seg.len(), window, step);
        match out.iter_mut().find(|(l, _)| *l == seg.label) {
            Some(entry) => entry.1 += n,
            None => out.push((seg.label.clone(), n)),
        }
    }
    out
}

/// Duplicates randomly chosen whole segments of each minority class until
/// its projected window count reaches the majority count. Originals keep
/// their order; duplicates are appended class by class.
pub fn balance(
    segments: &[LabeledSegment],
    seed: u64,
    window: usize,
    step: usize,
) -> Result<Vec<LabeledSegment>, WindowError> {
    check_geometry(window, step)?;
    let counts = projected_counts(segments, window, step);
    if let Some((label, _)) = counts.iter().find(|(_, n)| *n == 0) {
        return Err(WindowError::EmptyClass(label.clone()));
    }
    let Some(majority) = counts.iter().map(|(_, n)| *n).max() else {
        return Err(WindowError::EmptyClass(String::new()));
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = segments.to_vec();
    for (label, mut count) in counts {
        if count >= majority {
            continue;
        }
        let pool: Vec<&LabeledSegment> = segments
            .iter()
            .filter(|s| s.label == label && window_count(s.len(), window, step) > 0)
            .collect();
        while count < majority {
            let pick = pool[rng.gen_range(0..pool.len())];
            count += window_count(pick.len(), window, step);
            out.push(pick.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub train: WindowedDataset,
    pub test: WindowedDataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

/// Seeded shuffle of window indices; the first `round(ratio * N)` go to train.
pub fn split(ds: &WindowedDataset, ratio: f64, seed: u64) -> Result<SplitPair, WindowError> {
    let n = ds.len();
    let n_train = if ratio > 0.0 && ratio < 1.0 {
        (ratio * n as f64).round() as usize
    } else {
        0
    };
    if n_train == 0 || n_train >= n {
        return Err(WindowError::DegenerateSplit { n, ratio });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test_indices = order.split_off(n_train);
    let train_indices = order;
    Ok(SplitPair {
        train: ds.select(&train_indices),
        test: ds.select(&test_indices),
        train_indices,
        test_indices,
        seed,
    })
}
