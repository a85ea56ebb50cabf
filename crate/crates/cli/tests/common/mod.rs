#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Output;

use harlstm::synthetic::{generate_session, Motif};

pub fn bin() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_harlstm"))
}

pub fn run_bin(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Two sessions written as `sess_a.csv` / `sess_a.json` and `sess_b.*`,
/// seven spans in total.
pub fn write_sessions(dir: &Path) -> Vec<(PathBuf, PathBuf)> {
    let plans: [(&str, Vec<(Motif, f64)>, u64); 2] = [
        ("sess_a", vec![(Motif::Bite, 14.0), (Motif::Puff, 12.0), (Motif::Bite, 12.0), (Motif::Pill, 10.0)], 11),
        ("sess_b", vec![(Motif::Stride, 10.0), (Motif::Bite, 16.0), (Motif::Puff, 11.0)], 12),
    ];
    plans
        .iter()
        .map(|(name, plan, seed)| {
            let (rec, doc) = generate_session(plan, *seed);
            let rp = dir.join(format!("{name}.csv"));
            let ap = dir.join(format!("{name}.json"));
            fs::write(&rp, rec.to_csv()).unwrap();
            fs::write(&ap, doc.to_json()).unwrap();
            (rp, ap)
        })
        .collect()
}

pub fn ingest_args(pairs: &[(PathBuf, PathBuf)], out: &Path) -> Vec<String> {
    let mut v = vec!["ingest".to_string()];
    for (r, a) in pairs {
        v.extend(["--recording".into(), r.display().to_string()]);
        v.extend(["--annotations".into(), a.display().to_string()]);
    }
    v.extend(["--out".into(), out.display().to_string()]);
    v
}

pub fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    if let Ok(entries) = fs::read_dir(dir) {
        for e in entries.flatten() {
            let path = e.path();
            if path.is_dir() {
                out.extend(files_under(&path));
            } else {
                out.push(path);
            }
        }
    }
    out.sort();
    out
}

/// Ingest then window with small windows so training stays quick.
pub fn prepare_windows(root: &Path) -> PathBuf {
    let pairs = write_sessions(root);
    let segs = root.join("segments");
    let out = run_bin(&ingest_args(&pairs, &segs).iter().map(String::as_str).collect::<Vec<_>>());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let win = root.join("windows");
    let out = run_bin(&[
        "window", "--segments", p(&segs), "--out", p(&win), "--window-size", "25", "--step", "25",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    win
}

pub fn quick_train(win: &Path, out: &Path, extra: &[&str]) -> Output {
    let train = win.join("train.bwds");
    let test = win.join("test.bwds");
    let mut args = vec!["train", "--train", p(&train), "--test", p(&test), "--out", p(out)];
    for (flag, value) in [("--hidden", "6"), ("--epochs", "3"), ("--batch-size", "16")] {
        if !extra.contains(&flag) {
            args.extend([flag, value]);
        }
    }
    args.extend_from_slice(extra);
    run_bin(&args)
}
