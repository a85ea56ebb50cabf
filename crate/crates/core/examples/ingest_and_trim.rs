//! Generates a session recording with loose annotation spans, then cuts each
//! span at its trimmed bounds.
//!
//! cargo run --example ingest_and_trim

use harlstm::ingest::{apply_trim_indexed, parse_annotation_document, parse_recording, validate_rate, ClassSet};
use harlstm::synthetic::{generate_session, Motif};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (rec, doc) = generate_session(&[(Motif::Bite, 20.0), (Motif::Puff, 15.0), (Motif::Stride, 10.0)], 7);

    // go through the text formats, as files on disk would
    let rec = parse_recording(&rec.to_csv())?.with_device_id("session-7");
    let doc = parse_annotation_document(&doc.to_json(), &ClassSet::default())?;

    let rate = validate_rate(&rec.samples, 80)?;
    println!("{} samples at {:.2} Hz, longest gap {} ms", rec.len(), rate.mean_rate_hz, rate.max_gap_ms);

    for (i, span) in doc.spans.iter().enumerate() {
        let seg = apply_trim_indexed(&rec, span, i)?;
        let (lo, hi) = span.trimmed_bounds();
        println!(
            "span {i}: {:<8} reported {}..{} ms, trimmed {lo}..{hi} ms -> {} samples",
            seg.label,
            span.reported_start_ms,
            span.reported_stop_ms,
            seg.len()
        );
    }
    Ok(())
}
