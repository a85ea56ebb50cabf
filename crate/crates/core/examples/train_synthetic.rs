//! Trains the eating-vs-other classifier on the synthetic four-activity
//! corpus and prints per-epoch history and the test report.
//!
//! cargo run --release --example train_synthetic -- [seed] [epochs] [batch]

use harlstm::eval::{confusion, evaluate, render_report};
use harlstm::synthetic::{generate_segments, CorpusSpec};
use harlstm::train::{predict, train_from, TrainConfig};
use harlstm::lstm::{init_params, Dims};
use harlstm::window::{balance, slide, split, ClassMap, DEFAULT_TRAIN_RATIO};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let seed = args.first().copied().unwrap_or(1);
    let cfg = TrainConfig {
        seed,
        epochs: args.get(1).map_or(50, |&e| e as usize),
        batch_size: args.get(2).map_or(64, |&b| b as usize),
        ..TrainConfig::default()
    };

    let segments = generate_segments(&CorpusSpec::default(), seed);
    let balanced = balance(&segments, seed, cfg.window_size, cfg.step)?;
    let classes = ClassMap::binary("eating");
    let windows = slide(&balanced, &classes, cfg.window_size, cfg.step)?;
    let pair = split(&windows, DEFAULT_TRAIN_RATIO, seed)?;
    println!(
        "{} segments -> {} after balancing -> {} windows ({} train / {} test)",
        segments.len(),
        balanced.len(),
        windows.len(),
        pair.train.len(),
        pair.test.len()
    );

    let init = init_params::<f32>(seed, Dims::new(3, cfg.hidden, classes.len()))?;
    let out = train_from(init, &pair, &cfg, |r| {
        println!(
            "epoch {:>3}  train loss {:.4} acc {:.4}  test loss {:.4} acc {:.4}  {:.1}s",
            r.epoch, r.train_loss, r.train_acc, r.test_loss, r.test_acc, r.seconds
        )
    })?;

    let pred = predict(&out.params, &pair.test)?;
    let m = confusion(&pair.test.labels(), &pred, classes.len())?;
    print!("\n{}", render_report(&evaluate(&m, classes.names(), 1.0)?));
    Ok(())
}
