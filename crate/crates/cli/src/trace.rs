//! Peak-preserving downsampling for plotting.

use harlstm::ingest::Sample;
use serde::{Deserialize, Serialize};

pub const MAX_POINTS: usize = 5000;

/// Three series on one shared time axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub t_ms: Vec<i64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// Samples in the requested range before downsampling.
    pub source_samples: usize,
    pub downsampled: bool,
}

/// Returns at most `max_points` points per axis (clamped to
/// 2..=[`MAX_POINTS`]). When the input is longer, it is cut into equal-count
/// bins and each bin contributes two points, stamped with the bin's first
/// and last timestamps; on every axis those two points carry the bin's
/// minimum and maximum in the order they occurred, so no peak is lost.
pub fn downsample(samples: &[Sample], max_points: usize) -> Trace {
    let max_points = max_points.clamp(2, MAX_POINTS);
    let n = samples.len();
    if n <= max_points {
        return Trace {
            t_ms: samples.iter().map(|s| s.t_ms).collect(),
            x: samples.iter().map(|s| s.x).collect(),
            y: samples.iter().map(|s| s.y).collect(),
            z: samples.iter().map(|s| s.z).collect(),
            source_samples: n,
            downsampled: false,
        };
    }
    let bins = max_points / 2;
    let mut out = Trace {
        t_ms: Vec::with_capacity(2 * bins),
        x: Vec::with_capacity(2 * bins),
        y: Vec::with_capacity(2 * bins),
        z: Vec::with_capacity(2 * bins),
        source_samples: n,
        downsampled: true,
    };
    for b in 0..bins {
        let lo = b * n / bins;
        let hi = (b + 1) * n / bins;
        let chunk = &samples[lo..hi];
        out.t_ms.push(chunk[0].t_ms);
        out.t_ms.push(chunk[chunk.len() - 1].t_ms);
        for (axis, series) in [&mut out.x, &mut out.y, &mut out.z].into_iter().enumerate() {
            let value = |s: &Sample| s.xyz()[axis];
            let (mut imin, mut imax) = (0, 0);
            for (i, s) in chunk.iter().enumerate() {
                if value(s) < value(&chunk[imin]) {
                    imin = i;
                }
                if value(s) > value(&chunk[imax]) {
                    imax = i;
                }
            }
            let (first, second) = if imin <= imax { (imin, imax) } else { (imax, imin) };
            series.push(value(&chunk[first]));
            series.push(value(&chunk[second]));
        }
    }
    out
}
