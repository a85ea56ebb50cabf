//! Saves a trained model with its optimizer state, reloads it, and shows
//! that predictions and a resumed step are unchanged. Also loads the 64-bit
//! file as 32-bit.
//!
//! cargo run --example checkpoint_roundtrip

use harlstm::lstm::{checkpoint_precision, Checkpoint, OptimizerKind};
use harlstm::synthetic::{generate_segments, CorpusSpec, Motif};
use harlstm::train::{predict, train, TrainConfig};
use harlstm::window::{slide, split, ClassMap};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = CorpusSpec {
        segments: vec![(Motif::Bite, 2), (Motif::Stride, 2)],
        min_seconds: 8.0,
        max_seconds: 10.0,
    };
    let classes = ClassMap::binary("eating");
    let ds = slide(&generate_segments(&spec, 2), &classes, 50, 25)?;
    let pair = split(&ds, 0.8, 2)?;
    let cfg = TrainConfig {
        window_size: 50,
        step: 25,
        epochs: 5,
        batch_size: 8,
        hidden: 8,
        record_wall_clock: false,
        ..TrainConfig::default()
    };
    let out = train::<f64>(&pair, &cfg)?;

    let ck = Checkpoint {
        params: out.params,
        class_map: Some(classes),
        window_size: Some(cfg.window_size),
        optimizer: Some(out.optimizer),
    };
    let dir = std::env::temp_dir().join(format!("harlstm-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("model.ckpt");
    std::fs::write(&path, ck.encode())?;
    let bytes = std::fs::read(&path)?;
    println!("{} ({} bytes, {:?})", path.display(), bytes.len(), checkpoint_precision(&bytes)?);

    let back = Checkpoint::<f64>::decode(&bytes)?;
    println!("identical after reload: {}", back == ck);
    let opt = back.optimizer.as_ref().ok_or("missing optimizer state")?;
    println!("optimizer {:?} at step {}", opt.kind, opt.step);
    assert_eq!(opt.kind, OptimizerKind::Adam);
    println!(
        "same predictions: {}",
        predict(&back.params, &pair.test)? == predict(&ck.params, &pair.test)?
    );

    let narrow = Checkpoint::<f32>::decode(&bytes)?;
    println!(
        "loaded as 32-bit, predictions agree: {}",
        predict(&narrow.params, &pair.test)? == predict(&ck.params, &pair.test)?
    );

    let mut tampered = bytes.clone();
    let at = tampered.len() / 2;
    tampered[at] ^= 0x01;
    println!("flipped one byte: {}", Checkpoint::<f64>::decode(&tampered).unwrap_err());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
