//! Oversamples minority activities to the majority window count, collapses
//! to eating-vs-other and splits into train and test.
//!
//! cargo run --example balance_and_split -- [seed]

use harlstm::synthetic::{generate_segments, CorpusSpec};
use harlstm::window::{balance, projected_counts, slide, split, ClassMap, DEFAULT_STEP, DEFAULT_TRAIN_RATIO, DEFAULT_WINDOW};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(1u64);
    let (w, s) = (DEFAULT_WINDOW, DEFAULT_STEP);
    let segments = generate_segments(&CorpusSpec::default(), seed);

    println!("projected windows before balancing:");
    for (label, n) in projected_counts(&segments, w, s) {
        println!("  {label:<10} {n:>5}");
    }
    let balanced = balance(&segments, seed, w, s)?;
    println!("after balancing ({} -> {} segments):", segments.len(), balanced.len());
    for (label, n) in projected_counts(&balanced, w, s) {
        println!("  {label:<10} {n:>5}");
    }

    let classes = ClassMap::binary("eating");
    let ds = slide(&balanced, &classes, w, s)?;
    let pair = split(&ds, DEFAULT_TRAIN_RATIO, seed)?;
    for (name, part) in [("train", &pair.train), ("test", &pair.test)] {
        let counts: Vec<String> = classes
            .names()
            .iter()
            .zip(part.class_counts())
            .map(|(n, c)| format!("{n} {c}"))
            .collect();
        println!("{name:<5} {:>5} windows [{}]", part.len(), counts.join(", "));
    }
    Ok(())
}
