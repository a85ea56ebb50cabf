//! The pipeline commands. Each reads its inputs fully, computes, then
//! publishes every output file at once together with a run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use harlstm::dataset_file;
use harlstm::eval::{confusion, confusion_csv, evaluate, render_report, report_json};
use harlstm::fsutil::StagedWrites;
use harlstm::ingest::{
    apply_trim_indexed, parse_annotation_document, parse_recording, samples_to_csv, validate_rate, ClassSet,
    LabeledSegment, SegmentSource,
};
use harlstm::lstm::checkpoint::checkpoint_precision;
use harlstm::lstm::{init_params, predict_proba, Checkpoint, Dims, OptimizerKind};
use harlstm::train::{argmax_rows, dataset_tensors, predict, train_from, TrainConfig, TrainError};
use harlstm::window::{
    balance, slide, split, window_offsets, ClassMap, SplitPair, WindowedDataset, CHANNELS, DEFAULT_STEP,
    DEFAULT_TRAIN_RATIO, DEFAULT_WINDOW,
};
use harlstm::{Precision, Scalar};
use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::manifest::{read_input, read_text_input, RunManifest};

/// What a command produced, for the caller to report.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub warnings: Vec<String>,
    pub written: Vec<PathBuf>,
}

fn publish(mut staged: StagedWrites, manifest: RunManifest, manifest_path: PathBuf) -> Result<Vec<PathBuf>, CliError> {
    staged.add(manifest_path.clone(), manifest.to_json());
    staged.commit().map_err(CliError::io(&manifest_path))
}

fn stage(staged: &mut StagedWrites, manifest: &mut RunManifest, path: PathBuf, bytes: Vec<u8>) {
    manifest.output(&path, &bytes);
    staged.add(path, bytes);
}

// ---------------------------------------------------------------- ingest

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct IngestArgs {
    /// Recording CSV (`t_ms,x,y,z`); repeat, paired in order with --annotations
    #[arg(long = "recording", required = true)]
    pub recordings: Vec<PathBuf>,
    /// Annotation JSON for the recording at the same position
    #[arg(long = "annotations", required = true)]
    pub annotations: Vec<PathBuf>,
    /// Output directory; segments go to `<out>/<label>/<recording>_<span>.csv`
    #[arg(long)]
    pub out: PathBuf,
    /// Activity classes accepted in annotations
    #[arg(long, value_delimiter = ',', default_value = "eating,smoking,medication,jogging,other")]
    pub classes: Vec<String>,
    /// Warn about inter-sample gaps longer than this
    #[arg(long, default_value_t = 80)]
    pub gap_tol_ms: i64,
}

pub const INGEST_MANIFEST: &str = "ingest-manifest.json";

pub fn ingest(args: &IngestArgs) -> Result<Outcome, CliError> {
    if args.recordings.len() != args.annotations.len() {
        return Err(CliError::Usage(format!(
            "{} recordings but {} annotation files",
            args.recordings.len(),
            args.annotations.len()
        )));
    }
    let classes = ClassSet::new(&args.classes);
    let mut manifest = RunManifest::new("ingest", args);
    let mut staged = StagedWrites::new();
    let mut warnings = Vec::new();
    let mut seen = BTreeMap::new();
    let mut kept = 0;

    for (rp, ap) in args.recordings.iter().zip(&args.annotations) {
        let rec = parse_recording(&read_text_input(&mut manifest, rp)?)
            .map_err(|e| CliError::in_file(rp)(e.into()))?;
        let doc = parse_annotation_document(&read_text_input(&mut manifest, ap)?, &classes)
            .map_err(|e| CliError::in_file(ap)(e.into()))?;
        match validate_rate(&rec.samples, args.gap_tol_ms) {
            Ok(r) if r.gap_count_over_tol > 0 => warnings.push(format!(
                "{}: {} gaps over {} ms (longest {} ms), mean rate {:.2} Hz",
                rp.display(),
                r.gap_count_over_tol,
                args.gap_tol_ms,
                r.max_gap_ms,
                r.mean_rate_hz
            )),
            Ok(_) => {}
            Err(e) => warnings.push(format!("{}: {e}", rp.display())),
        }
        let stem = rp
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "recording".into());
        if let Some(other) = seen.insert(stem.clone(), rp.clone()) {
            return Err(CliError::Usage(format!(
                "{} and {} share the name {stem:?}; segment files would collide",
                other.display(),
                rp.display()
            )));
        }
        for (i, span) in doc.spans.iter().enumerate() {
            if !span.confirmed {
                warnings.push(format!(
                    "{}: skipping unconfirmed span {i} ({} {}..{} ms)",
                    ap.display(),
                    span.label,
                    span.reported_start_ms,
                    span.reported_stop_ms
                ));
                continue;
            }
            let seg = apply_trim_indexed(&rec, span, i).map_err(|e| CliError::in_file(ap)(e.into()))?;
            let path = args.out.join(&seg.label).join(format!("{stem}_{i:03}.csv"));
            stage(&mut staged, &mut manifest, path, samples_to_csv(&seg.samples).into_bytes());
            kept += 1;
        }
    }
    let written = publish(staged, manifest, args.out.join(INGEST_MANIFEST))?;
    Ok(Outcome {
        stdout: format!("wrote {kept} segment files to {}\n", args.out.display()),
        warnings,
        written,
    })
}

// ---------------------------------------------------------------- window

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct WindowArgs {
    /// Directory of `<label>/<name>.csv` segment files
    #[arg(long)]
    pub segments: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window_size: usize,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: usize,
    #[arg(long, default_value_t = 0)]
    pub balance_seed: u64,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Fraction of windows assigned to the training split
    #[arg(long, default_value_t = DEFAULT_TRAIN_RATIO)]
    pub ratio: f64,
    /// Class treated as positive; every other label becomes `other`
    #[arg(long, default_value = "eating")]
    pub positive: String,
    /// Keep every label as its own class instead of positive-vs-other
    #[arg(long)]
    pub multiclass: bool,
}

pub const TRAIN_FILE: &str = "train.bwds";
pub const TEST_FILE: &str = "test.bwds";
pub const WINDOW_MANIFEST: &str = "window-manifest.json";

impl WindowArgs {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.window_size == 0 || self.step == 0 {
            return Err(CliError::Usage("window size and step must be positive".into()));
        }
        if self.step > self.window_size {
            return Err(CliError::Usage(format!(
                "step {} exceeds window size {}",
                self.step, self.window_size
            )));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(CliError::Usage(format!("ratio {} must lie strictly between 0 and 1", self.ratio)));
        }
        Ok(())
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(CliError::io(dir))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(CliError::io(dir))?;
    out.sort();
    Ok(out)
}

/// Reads `<dir>/<label>/*.csv` in sorted order.
pub fn read_segments(dir: &Path, manifest: &mut RunManifest) -> Result<Vec<LabeledSegment>, CliError> {
    let mut segments = Vec::new();
    for label_dir in sorted_entries(dir)?.into_iter().filter(|p| p.is_dir()) {
        let label = label_dir.file_name().unwrap().to_string_lossy().to_lowercase();
        for file in sorted_entries(&label_dir)? {
            if file.extension().and_then(|e| e.to_str()) != Some("csv") {
                continue;
            }
            let rec = parse_recording(&read_text_input(manifest, &file)?)
                .map_err(|e| CliError::in_file(&file)(e.into()))?;
            let name = file.file_stem().unwrap().to_string_lossy().into_owned();
            segments.push(LabeledSegment::new(
                label.clone(),
                rec.samples,
                SegmentSource {
                    recording: name,
                    span: segments.len(),
                },
            ));
        }
    }
    if segments.is_empty() {
        return Err(CliError::Data(format!("no segment files under {}", dir.display())));
    }
    Ok(segments)
}

pub fn window(args: &WindowArgs) -> Result<Outcome, CliError> {
    args.validate()?;
    let mut manifest = RunManifest::new("window", args);
    let segments = read_segments(&args.segments, &mut manifest)?;
    let positive = args.positive.to_lowercase();
    let labels: Vec<String> = {
        let mut l: Vec<String> = segments.iter().map(|s| s.label.clone()).collect();
        l.sort();
        l.dedup();
        l
    };
    if !labels.contains(&positive) {
        return Err(CliError::Data(format!("no segments labelled {positive:?} (found {labels:?})")));
    }
    let class_map = if args.multiclass {
        ClassMap::new(&labels, &positive)?
    } else {
        ClassMap::binary(&positive)
    };

    let balanced = balance(&segments, args.balance_seed, args.window_size, args.step)?;
    let ds = slide(&balanced, &class_map, args.window_size, args.step)?;
    let pair = split(&ds, args.ratio, args.split_seed)?;

    let mut staged = StagedWrites::new();
    stage(&mut staged, &mut manifest, args.out.join(TRAIN_FILE), dataset_file::encode(&pair.train));
    stage(&mut staged, &mut manifest, args.out.join(TEST_FILE), dataset_file::encode(&pair.test));
    let counts: Vec<String> = class_map
        .names()
        .iter()
        .zip(ds.class_counts())
        .map(|(n, c)| format!("{n} {c}"))
        .collect();
    let written = publish(staged, manifest, args.out.join(WINDOW_MANIFEST))?;
    Ok(Outcome {
        stdout: format!(
            "{} segments ({} after balancing) -> {} windows [{}]; {} train, {} test\n",
            segments.len(),
            balanced.len(),
            ds.len(),
            counts.join(", "),
            pair.train.len(),
            pair.test.len()
        ),
        warnings: Vec::new(),
        written,
    })
}

// ---------------------------------------------------------------- train

fn parse_precision(s: &str) -> Result<Precision, String> {
    match s {
        "32" | "f32" => Ok(Precision::F32),
        "64" | "f64" => Ok(Precision::F64),
        _ => Err(format!("precision must be 32 or 64, got {s:?}")),
    }
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    match s {
        "adam" => Ok(OptimizerKind::Adam),
        "sgd" => Ok(OptimizerKind::Sgd),
        _ => Err(format!("optimizer must be adam or sgd, got {s:?}")),
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Expected window length; taken from the datasets when omitted
    #[arg(long)]
    pub window_size: Option<usize>,
    #[arg(long, default_value_t = 0.0025)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1024)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.0015)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// 32 or 64
    #[arg(long, default_value = "32", value_parser = parse_precision)]
    pub precision: Precision,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    /// adam or sgd
    #[arg(long, default_value = "adam", value_parser = parse_optimizer)]
    pub optimizer: OptimizerKind,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    /// Fill the `seconds` history column (otherwise written as 0)
    #[arg(long)]
    pub record_wall_clock: bool,
    /// F-measure weight for the test report
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Print one line per epoch to stderr
    #[arg(long)]
    pub verbose: bool,
}

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const LAST_GOOD_FILE: &str = "model.last-good.ckpt";
pub const HISTORY_FILE: &str = "history.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const TRAIN_MANIFEST: &str = "train-manifest.json";

fn read_dataset(manifest: &mut RunManifest, path: &Path) -> Result<WindowedDataset, CliError> {
    let bytes = read_input(manifest, path)?;
    dataset_file::decode(&bytes).map_err(|e| CliError::in_file(path)(e.into()))
}

fn stage_report(
    staged: &mut StagedWrites,
    manifest: &mut RunManifest,
    out: &Path,
    truth: &[usize],
    pred: &[usize],
    class_map: &ClassMap,
    beta: f64,
) -> Result<String, CliError> {
    let m = confusion(truth, pred, class_map.len())?;
    let report = evaluate(&m, class_map.names(), beta)?;
    let text = render_report(&report);
    stage(staged, manifest, out.join(REPORT_FILE), text.clone().into_bytes());
    stage(staged, manifest, out.join(REPORT_JSON_FILE), report_json(&report).into_bytes());
    stage(staged, manifest, out.join(CONFUSION_FILE), confusion_csv(&m, class_map.names()).into_bytes());
    Ok(text)
}

fn train_typed<F: Scalar>(
    args: &TrainArgs,
    cfg: &TrainConfig,
    pair: &SplitPair,
    mut manifest: RunManifest,
) -> Result<Outcome, CliError> {
    let class_map = pair.train.class_map.clone();
    let dims = Dims::new(CHANNELS, cfg.hidden, class_map.len());
    let init = init_params::<F>(cfg.seed, dims)?;
    let verbose = args.verbose;
    let total = cfg.epochs;
    let result = train_from(init, pair, cfg, |r| {
        if verbose {
            eprintln!(
                "epoch {}/{total}: train loss {:.5} acc {:.4}, test loss {:.5} acc {:.4}",
                r.epoch, r.train_loss, r.train_acc, r.test_loss, r.test_acc
            );
        }
    });
    let mut staged = StagedWrites::new();
    let out = match result {
        Ok(out) => out,
        Err(TrainError::DivergedLoss {
            epoch,
            step,
            last_good,
            history,
        }) => {
            let ck = Checkpoint::new(*last_good)
                .with_class_map(class_map)
                .with_window_size(cfg.window_size);
            stage(&mut staged, &mut manifest, args.out.join(LAST_GOOD_FILE), ck.encode());
            stage(&mut staged, &mut manifest, args.out.join(HISTORY_FILE), history.to_csv().into_bytes());
            publish(staged, manifest, args.out.join(TRAIN_MANIFEST))?;
            return Err(CliError::Numeric(format!(
                "loss became non-finite at epoch {epoch}, step {step}; last good parameters saved to {}",
                args.out.join(LAST_GOOD_FILE).display()
            )));
        }
        Err(e) => return Err(e.into()),
    };

    let mut ck = Checkpoint::new(out.params.clone())
        .with_class_map(class_map.clone())
        .with_window_size(cfg.window_size);
    ck.optimizer = Some(out.optimizer);
    stage(&mut staged, &mut manifest, args.out.join(CHECKPOINT_FILE), ck.encode());
    stage(&mut staged, &mut manifest, args.out.join(HISTORY_FILE), out.history.to_csv().into_bytes());
    let pred = predict(&out.params, &pair.test)?;
    let report = stage_report(
        &mut staged,
        &mut manifest,
        &args.out,
        &pair.test.labels(),
        &pred,
        &class_map,
        args.beta,
    )?;
    let written = publish(staged, manifest, args.out.join(TRAIN_MANIFEST))?;
    let summary = match out.history.last() {
        Some(r) => format!(
            "{} epochs: train acc {:.4}, test acc {:.4}\n",
            r.epoch, r.train_acc, r.test_acc
        ),
        None => "0 epochs: checkpoint holds the initial parameters\n".to_string(),
    };
    Ok(Outcome {
        stdout: format!("{summary}\n{report}"),
        warnings: Vec::new(),
        written,
    })
}

pub fn train(args: &TrainArgs) -> Result<Outcome, CliError> {
    if !(args.beta > 0.0) {
        return Err(CliError::Usage(format!("beta must be positive, got {}", args.beta)));
    }
    let mut manifest = RunManifest::new("train", args);
    let train = read_dataset(&mut manifest, &args.train)?;
    let test = read_dataset(&mut manifest, &args.test)?;
    if train.class_map != test.class_map {
        return Err(CliError::Data("train and test files use different class maps".into()));
    }
    if train.window_size != test.window_size {
        return Err(CliError::Data(format!(
            "train windows have {} samples, test windows {}",
            train.window_size, test.window_size
        )));
    }
    if let Some(w) = args.window_size {
        if w != train.window_size {
            return Err(CliError::Data(format!(
                "--window-size {w} but the datasets hold windows of {} samples",
                train.window_size
            )));
        }
    }
    let cfg = TrainConfig {
        window_size: train.window_size,
        step: train.step.min(train.window_size),
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        batch_size: args.batch_size,
        lambda: args.lambda,
        seed: args.seed,
        precision: args.precision,
        hidden: args.hidden,
        optimizer: args.optimizer,
        clip_norm: args.clip_norm,
        record_wall_clock: args.record_wall_clock,
    };
    cfg.validate().map_err(CliError::Usage)?;
    let pair = SplitPair {
        train,
        test,
        train_indices: Vec::new(),
        test_indices: Vec::new(),
        seed: 0,
    };
    match cfg.precision {
        Precision::F32 => train_typed::<f32>(args, &cfg, &pair, manifest),
        Precision::F64 => train_typed::<f64>(args, &cfg, &pair, manifest),
    }
}

// ---------------------------------------------------------------- eval / predict

/// A checkpoint together with the metadata needed to check inputs.
struct Loaded<F> {
    ck: Checkpoint<F>,
}

impl<F: Scalar> Loaded<F> {
    fn read(bytes: &[u8]) -> Result<Self, CliError> {
        Ok(Self {
            ck: Checkpoint::decode(bytes)?,
        })
    }

    fn check_dataset(&self, ds: &WindowedDataset) -> Result<(), CliError> {
        if let Some(w) = self.ck.window_size {
            if w != ds.window_size {
                return Err(CliError::Data(format!(
                    "shape mismatch: checkpoint expects windows of {w} samples, dataset has {}",
                    ds.window_size
                )));
            }
        }
        if let Some(cm) = &self.ck.class_map {
            if cm != &ds.class_map {
                return Err(CliError::Data(format!(
                    "shape mismatch: checkpoint classes {:?}, dataset classes {:?}",
                    cm.names(),
                    ds.class_map.names()
                )));
            }
        }
        Ok(())
    }

    fn class_map(&self) -> ClassMap {
        self.ck.class_map.clone().unwrap_or_else(|| {
            let names: Vec<String> = (0..self.ck.params.dims().classes).map(|i| format!("class{i}")).collect();
            ClassMap::from_parts(names, 0).expect("generated names are distinct")
        })
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Also write report.txt, report.json and confusion.csv here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const EVAL_MANIFEST: &str = "eval-manifest.json";

fn eval_typed<F: Scalar>(
    args: &EvalArgs,
    bytes: &[u8],
    ds: &WindowedDataset,
    mut manifest: RunManifest,
) -> Result<Outcome, CliError> {
    let model = Loaded::<F>::read(bytes)?;
    model.check_dataset(ds)?;
    let pred = predict(&model.ck.params, ds)?;
    let truth = ds.labels();
    let class_map = model.class_map();
    let mut staged = StagedWrites::new();
    let out_dir = args.out.clone().unwrap_or_default();
    let text = stage_report(&mut staged, &mut manifest, &out_dir, &truth, &pred, &class_map, args.beta)?;
    let written = match &args.out {
        Some(dir) => publish(staged, manifest, dir.join(EVAL_MANIFEST))?,
        None => Vec::new(),
    };
    Ok(Outcome {
        stdout: text,
        warnings: Vec::new(),
        written,
    })
}

pub fn eval(args: &EvalArgs) -> Result<Outcome, CliError> {
    if !(args.beta > 0.0) {
        return Err(CliError::Usage(format!("beta must be positive, got {}", args.beta)));
    }
    let mut manifest = RunManifest::new("eval", args);
    let bytes = read_input(&mut manifest, &args.checkpoint)?;
    let ds = read_dataset(&mut manifest, &args.dataset)?;
    match checkpoint_precision(&bytes)? {
        Precision::F32 => eval_typed::<f32>(args, &bytes, &ds, manifest),
        Precision::F64 => eval_typed::<f64>(args, &bytes, &ds, manifest),
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Windowed dataset file to classify
    #[arg(long, conflicts_with = "recording", required_unless_present = "recording")]
    pub dataset: Option<PathBuf>,
    /// Raw recording CSV to classify window by window
    #[arg(long)]
    pub recording: Option<PathBuf>,
    /// Window step when classifying a raw recording
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: usize,
    /// Write the predictions CSV here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn prob_header(class_map: &ClassMap) -> String {
    class_map.names().iter().map(|n| format!(",p_{n}")).collect()
}

fn predict_typed<F: Scalar>(args: &PredictArgs, bytes: &[u8], manifest: &mut RunManifest) -> Result<String, CliError> {
    let model = Loaded::<F>::read(bytes)?;
    let class_map = model.class_map();
    let mut csv = String::new();
    if let Some(path) = &args.dataset {
        let ds = read_dataset(manifest, path)?;
        model.check_dataset(&ds)?;
        csv.push_str(&format!("window,label,predicted{}\n", prob_header(&class_map)));
        if ds.is_empty() {
            return Ok(csv);
        }
        let (x, _) = dataset_tensors::<F>(&ds);
        let probs = predict_proba(&model.ck.params, x.view())?;
        for (i, (p, row)) in argmax_rows(&probs).into_iter().zip(probs.rows()).enumerate() {
            let label = &class_map.names()[ds.windows[i].label_index];
            csv.push_str(&format!("{i},{label},{}", class_map.names()[p]));
            for v in row {
                csv.push_str(&format!(",{:.6}", v.as_f64()));
            }
            csv.push('\n');
        }
    } else if let Some(path) = &args.recording {
        let rec = parse_recording(&read_text_input(manifest, path)?).map_err(|e| CliError::in_file(path)(e.into()))?;
        let w = model.ck.window_size.unwrap_or(DEFAULT_WINDOW);
        if args.step == 0 {
            return Err(CliError::Usage("step must be positive".into()));
        }
        let offsets: Vec<usize> = window_offsets(rec.samples.len(), w, args.step).collect();
        csv.push_str(&format!("start_ms,stop_ms,predicted{}\n", prob_header(&class_map)));
        if offsets.is_empty() {
            return Ok(csv);
        }
        let x = Array3::from_shape_fn((offsets.len(), w, CHANNELS), |(i, t, k)| {
            F::of(rec.samples[offsets[i] + t].xyz()[k] as f32 as f64)
        });
        let probs = predict_proba(&model.ck.params, x.view())?;
        for ((off, p), row) in offsets.iter().zip(argmax_rows(&probs)).zip(probs.rows()) {
            csv.push_str(&format!(
                "{},{},{}",
                rec.samples[*off].t_ms,
                rec.samples[off + w - 1].t_ms,
                class_map.names()[p]
            ));
            for v in row {
                csv.push_str(&format!(",{:.6}", v.as_f64()));
            }
            csv.push('\n');
        }
    }
    Ok(csv)
}

pub fn predict_cmd(args: &PredictArgs) -> Result<Outcome, CliError> {
    let mut manifest = RunManifest::new("predict", args);
    let bytes = read_input(&mut manifest, &args.checkpoint)?;
    let csv = match checkpoint_precision(&bytes)? {
        Precision::F32 => predict_typed::<f32>(args, &bytes, &mut manifest)?,
        Precision::F64 => predict_typed::<f64>(args, &bytes, &mut manifest)?,
    };
    match &args.out {
        Some(path) => {
            let mut staged = StagedWrites::new();
            stage(&mut staged, &mut manifest, path.clone(), csv.into_bytes());
            let mpath = path.with_extension("manifest.json");
            let written = publish(staged, manifest, mpath)?;
            Ok(Outcome {
                stdout: String::new(),
                warnings: Vec::new(),
                written,
            })
        }
        None => Ok(Outcome {
            stdout: csv,
            ..Outcome::default()
        }),
    }
}
