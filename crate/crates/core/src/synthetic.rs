//! Labelled accelerometer traces built from jittered activity motifs.
//!
//! Four wrist activities at 25 Hz, each a distinct repetitive pattern on top
//! of a randomly tilted gravity vector and sensor noise:
//!
//! - `eating`: short hand-to-mouth bumps every 2.4–4 s, mostly on y.
//! - `smoking`: long puffs held ~2.5 s every 7–11 s, mostly on x.
//! - `jogging`: 2.3–3 Hz strides with a harmonic on every axis.
//! - `medication`: a 4 Hz twist burst followed by one slow lift, every 5–7 s.
//!
//! Every instance draws its own period, amplitude, tilt and phase, and every
//! repetition its own timing jitter, so no two segments are alike.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ingest::{AnnotationDocument, AnnotationSpan, LabeledSegment, RawRecording, Sample, SegmentSource};

pub const RATE_HZ: f64 = 25.0;
pub const SAMPLE_MS: i64 = 40;
const G: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motif {
    Bite,
    Puff,
    Stride,
    Pill,
    /// Resting wrist: gravity plus noise and slow drift.
    Rest,
}

impl Motif {
    pub const ACTIVITIES: [Motif; 4] = [Motif::Bite, Motif::Puff, Motif::Stride, Motif::Pill];

    pub fn label(self) -> &'static str {
        match self {
            Motif::Bite => "eating",
            Motif::Puff => "smoking",
            Motif::Stride => "jogging",
            Motif::Pill => "medication",
            Motif::Rest => "other",
        }
    }
}

/// Six fractional digits, like the recording format.
fn micro(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

fn bump(t: f64, centre: f64, width: f64) -> f64 {
    let z = (t - centre) / width;
    (-0.5 * z * z).exp()
}

/// Smooth plateau from `start` lasting `hold` seconds.
fn plateau(t: f64, start: f64, hold: f64) -> f64 {
    let rise = 1.0 / (1.0 + (-(t - start) * 6.0).exp());
    let fall = 1.0 / (1.0 + ((t - start - hold) * 6.0).exp());
    rise * fall
}

/// Event times from 0 to `duration`, with period `period` and ±`jitter`
/// fractional timing noise per event.
fn event_times(rng: &mut ChaCha8Rng, duration: f64, period: f64, jitter: f64) -> Vec<f64> {
    let mut t = rng.gen_range(-period..0.0);
    let mut out = Vec::new();
    while t < duration + period {
        out.push(t);
        t += period * (1.0 + rng.gen_range(-jitter..jitter));
    }
    out
}

/// `n` samples of one motif, starting at `t0_ms`.
pub fn motif_samples(rng: &mut ChaCha8Rng, motif: Motif, n: usize, t0_ms: i64) -> Vec<Sample> {
    let duration = n as f64 / RATE_HZ;
    let tilt = rng.gen_range(0.2..0.7f64);
    let azimuth = rng.gen_range(0.0..std::f64::consts::TAU);
    let gravity = [
        G * tilt.sin() * azimuth.cos(),
        G * tilt.sin() * azimuth.sin(),
        G * tilt.cos(),
    ];
    let noise = Normal::new(0.0, rng.gen_range(0.2..0.4)).expect("valid sigma");
    let amp = rng.gen_range(0.8..1.25);

    let (period, events): (f64, Vec<f64>) = match motif {
        Motif::Bite => {
            let p = rng.gen_range(2.4..4.0);
            (p, event_times(rng, duration, p, 0.15))
        }
        Motif::Puff => {
            let p = rng.gen_range(7.0..11.0);
            (p, event_times(rng, duration, p, 0.1))
        }
        Motif::Pill => {
            let p = rng.gen_range(5.0..7.0);
            (p, event_times(rng, duration, p, 0.1))
        }
        Motif::Stride => (1.0 / rng.gen_range(2.3..3.0), Vec::new()),
        Motif::Rest => (rng.gen_range(8.0..15.0), Vec::new()),
    };
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);

    (0..n)
        .map(|i| {
            let t = i as f64 / RATE_HZ;
            let mut a = gravity;
            match motif {
                Motif::Bite => {
                    let lift: f64 = events.iter().map(|&e| bump(t, e + 0.5, 0.35)).sum();
                    a[1] += 4.0 * amp * lift;
                    a[2] -= 2.5 * amp * lift;
                    a[0] += 0.4 * (2.0 * std::f64::consts::PI * 1.5 * t + phase).sin() * lift;
                }
                Motif::Puff => {
                    let lift: f64 = events.iter().map(|&e| plateau(t, e, 2.5)).sum();
                    a[0] += 4.5 * amp * lift;
                    a[2] -= 2.0 * amp * lift;
                    a[1] += 0.3 * (2.0 * std::f64::consts::PI * t / period + phase).sin();
                }
                Motif::Stride => {
                    let w = 2.0 * std::f64::consts::PI * t / period + phase;
                    a[0] += 3.5 * amp * w.sin();
                    a[1] += 7.0 * amp * (w + 0.8).sin() + 2.0 * (2.0 * w).sin();
                    a[2] += 4.0 * amp * (w + 1.7).sin();
                }
                Motif::Pill => {
                    for &e in &events {
                        let burst = plateau(t, e, 1.0);
                        let w = 2.0 * std::f64::consts::PI * 4.0 * (t - e);
                        a[0] += 3.0 * amp * burst * w.sin();
                        a[2] += 2.5 * amp * burst * w.cos();
                        a[1] += 3.0 * amp * bump(t, e + 2.2, 0.6);
                    }
                }
                Motif::Rest => {
                    a[0] += 0.5 * (2.0 * std::f64::consts::PI * t / period + phase).sin();
                }
            }
            Sample {
                t_ms: t0_ms + i as i64 * SAMPLE_MS,
                x: micro(a[0] + noise.sample(rng)),
                y: micro(a[1] + noise.sample(rng)),
                z: micro(a[2] + noise.sample(rng)),
            }
        })
        .collect()
}

/// How many segments of each activity to draw and how long they run.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub segments: Vec<(Motif, usize)>,
    pub min_seconds: f64,
    pub max_seconds: f64,
}

impl Default for CorpusSpec {
    /// Deliberately skewed, as collected data tends to be.
    fn default() -> Self {
        Self {
            segments: vec![(Motif::Bite, 8), (Motif::Puff, 4), (Motif::Stride, 3), (Motif::Pill, 3)],
            min_seconds: 25.0,
            max_seconds: 40.0,
        }
    }
}

/// Independent labelled segments, each from its own instance.
pub fn generate_segments(spec: &CorpusSpec, seed: u64) -> Vec<LabeledSegment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &(motif, count) in &spec.segments {
        for _ in 0..count {
            let secs = rng.gen_range(spec.min_seconds..=spec.max_seconds);
            let n = (secs * RATE_HZ).round() as usize;
            let samples = motif_samples(&mut rng, motif, n, 0);
            out.push(LabeledSegment::new(
                motif.label(),
                samples,
                SegmentSource {
                    recording: format!("synthetic-{seed}"),
                    span: out.len(),
                },
            ));
        }
    }
    out
}

/// One continuous recording of rest and activity bouts with its annotation
/// document. Reported span bounds are loose by up to two seconds on each
/// side and the trims that recover the true bounds are filled in, as a
/// supervisor would.
pub fn generate_session(activities: &[(Motif, f64)], seed: u64) -> (RawRecording, AnnotationDocument) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    let mut spans = Vec::new();
    let mut t_ms = 0i64;
    let rest = |rng: &mut ChaCha8Rng, samples: &mut Vec<Sample>, t_ms: &mut i64| {
        let n = (rng.gen_range(4.0..8.0) * RATE_HZ) as usize;
        samples.extend(motif_samples(rng, Motif::Rest, n, *t_ms));
        *t_ms += n as i64 * SAMPLE_MS;
    };
    rest(&mut rng, &mut samples, &mut t_ms);
    for &(motif, seconds) in activities {
        let n = (seconds * RATE_HZ).round() as usize;
        let start = t_ms;
        samples.extend(motif_samples(&mut rng, motif, n, t_ms));
        t_ms += n as i64 * SAMPLE_MS;
        let stop = t_ms - SAMPLE_MS;
        let head = rng.gen_range(0..=50) * SAMPLE_MS;
        let tail = rng.gen_range(0..=50) * SAMPLE_MS;
        spans.push(
            AnnotationSpan::new(motif.label(), start - head, stop + tail).with_trims(head, tail),
        );
        rest(&mut rng, &mut samples, &mut t_ms);
    }
    let id = format!("session-{seed}");
    let doc = AnnotationDocument {
        recording: Some(id.clone()),
        spans,
    };
    (RawRecording::new(samples).with_device_id(id), doc)
}
