//! Slides fixed-length windows over labelled segments and shows where each
//! window came from.
//!
//! cargo run --example sliding_windows -- [window] [step]

use harlstm::synthetic::{generate_segments, CorpusSpec, Motif};
use harlstm::window::{slide, window_count, ClassMap, DEFAULT_STEP, DEFAULT_WINDOW};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let w = args.first().copied().unwrap_or(DEFAULT_WINDOW);
    let s = args.get(1).copied().unwrap_or(DEFAULT_STEP);

    let spec = CorpusSpec {
        segments: vec![(Motif::Bite, 2), (Motif::Stride, 1)],
        ..CorpusSpec::default()
    };
    let segments = generate_segments(&spec, 3);
    for (i, seg) in segments.iter().enumerate() {
        println!("segment {i}: {:<8} {:>5} samples -> {} windows", seg.label, seg.len(), window_count(seg.len(), w, s));
    }

    let ds = slide(&segments, &ClassMap::binary("eating"), w, s)?;
    println!("\n{} windows of {w} samples, step {s}", ds.len());
    for win in ds.windows.iter().step_by((ds.len() / 5).max(1)) {
        let [x, y, z] = win.values[0];
        println!(
            "  segment {} offset {:>4}  class {}  first sample ({x:.3}, {y:.3}, {z:.3})",
            win.source.segment,
            win.source.offset,
            ds.class_map.names()[win.label_index]
        );
    }
    Ok(())
}
