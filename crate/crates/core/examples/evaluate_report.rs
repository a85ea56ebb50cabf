//! Per-class metrics and the confusion grid from a fixed set of counts, and
//! the same report for a handful of predictions.
//!
//! cargo run --example evaluate_report

use harlstm::eval::{confusion, confusion_csv, evaluate, render_report, report_json, ConfusionMatrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = ConfusionMatrix::from_rows(vec![vec![5286, 288], vec![792, 13587]]).ok_or("ragged matrix")?;
    print!("{}", render_report(&evaluate(&m, &["eating", "other"], 1.0)?));

    let names = ["eating", "smoking", "medication"];
    let truth = [0, 0, 1, 1, 1, 2, 2, 0, 1, 2];
    let pred = [0, 1, 1, 1, 0, 2, 2, 0, 1, 1];
    let m = confusion(&truth, &pred, names.len())?;
    let report = evaluate(&m, &names, 0.5)?;
    print!("\n{}", render_report(&report));
    print!("\n{}", confusion_csv(&m, &names));
    println!("\n{}", report_json(&report));
    Ok(())
}
