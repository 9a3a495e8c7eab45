//! Command-line front end: `synth`, `train`, `predict`, `evaluate`,
//! `gradcheck`.
//!
//! Every setting can also come from a `key=value` file passed with
//! `--config`; flags win over the file, the file wins over defaults.
//! Keys are the long flag names with `-` or `_`.
//!
//! Exit codes: 0 success, 2 bad input or configuration, 3 numeric failure,
//! 4 gradient-check failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::corpus::{load_dialogue_files, read_links_file, synth_generate, write_links_file, write_utterances_file, SynthConfig};
use crate::error::Error;
use crate::gradcheck::FdOptions;
use crate::layercheck::check_layers;
use crate::metrics::evaluate_all;
use crate::model::{Model, ModelConfig};
use crate::pipeline::{links_of, predict, train_with_progress, TrainConfig};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_GRADIENT: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_numeric() { EXIT_NUMERIC } else { EXIT_INPUT },
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "disentangle", version, about = "Reply-to link prediction and thread disentanglement")]
pub struct Cli {
    /// Settings file of key=value lines; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)] // parsed once per process
pub enum Command {
    /// Generate a synthetic tangled dialogue with gold links.
    Synth(SynthArgs),
    /// Train a model on an annotated dialogue.
    Train(TrainArgs),
    /// Predict a parent for every utterance.
    Predict(PredictArgs),
    /// Compare predicted links with gold links.
    Evaluate(EvaluateArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of utterances.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub mention_prob: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; receives utterances.jsonl and links.tsv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Utterances file (JSON lines).
    #[arg(long)]
    pub utterances: Option<PathBuf>,
    /// Gold links file (TSV).
    #[arg(long)]
    pub links: Option<PathBuf>,
    /// Where to write the trained checkpoint.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Loss trace CSV; defaults to the checkpoint path with `.trace.csv`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Continue from an existing checkpoint; its model settings are kept.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Candidate window width C.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub recurrent: Option<usize>,
    #[arg(long)]
    pub hash_buckets: Option<usize>,
    #[arg(long)]
    pub max_tokens: Option<usize>,
    #[arg(long)]
    pub speaker_mask: Option<bool>,
    #[arg(long)]
    pub reference_graph: Option<bool>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub holdout: Option<f64>,
    #[arg(long)]
    pub report_every: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub utterances: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Predicted links (TSV).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Confidence sidecar; defaults to the output path with `.confidence.jsonl`.
    #[arg(long)]
    pub confidence: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Also write the JSON report here.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of consecutive seeds to check.
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, hide = true)]
    pub inject_sign_error: bool,
}

/// Parsed settings file.
#[derive(Debug, Default)]
struct Settings {
    values: BTreeMap<String, String>,
    origin: String,
}

impl Settings {
    fn load(path: Option<&Path>, allowed: &[&str]) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let origin = path.display().to_string();
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::input(format!("{origin} line {}: expected key=value", i + 1)));
            };
            let key = k.trim().replace('-', "_");
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::input(format!("{origin} line {}: unknown key `{}`", i + 1, k.trim())));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values, origin })
    }

    fn get<T: FromStr>(&self, key: &str, flag: Option<T>) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::input(format!("{}: bad value `{v}` for {key}", self.origin))),
        }
    }

    fn or<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> CliResult<T> {
        Ok(self.get(key, flag)?.unwrap_or(default))
    }

    fn required<T: FromStr>(&self, key: &str, flag: Option<T>) -> CliResult<T> {
        self.get(key, flag)?
            .ok_or_else(|| CliError::input(format!("missing --{}", key.replace('_', "-"))))
    }
}

fn must_exist(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::input(format!("{}: no such file", path.display())))
    }
}

fn must_be_writable(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(CliError::input(format!("{}: directory does not exist", dir.display())))
        }
        _ => Ok(()),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(OsString::new, |s| s.to_os_string());
    let mut name = stem;
    name.push(suffix);
    path.with_file_name(name)
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::input(format!("{}: {e}", path.display()))
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Synth(a) => synth(a, config),
        Command::Train(a) => train(a, config),
        Command::Predict(a) => predict_cmd(a, config),
        Command::Evaluate(a) => evaluate(a, config),
        Command::Gradcheck(a) => gradcheck(a, config),
    }
}

fn synth(a: SynthArgs, config: Option<&Path>) -> CliResult<()> {
    let s = Settings::load(config, &["n", "users", "threads", "mention_prob", "seed", "out"])?;
    let d = SynthConfig::default();
    let cfg = SynthConfig {
        n_utterances: s.or("n", a.n, d.n_utterances)?,
        n_users: s.or("users", a.users, d.n_users)?,
        n_threads: s.or("threads", a.threads, d.n_threads)?,
        mention_prob: s.or("mention_prob", a.mention_prob, d.mention_prob)?,
        seed: s.or("seed", a.seed, d.seed)?,
        ..d
    };
    let out: PathBuf = s.required("out", a.out)?;
    cfg.validate().map_err(Error::from)?;
    fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;

    let synth = synth_generate(&cfg).map_err(Error::from)?;
    let utts = out.join("utterances.jsonl");
    let links = out.join("links.tsv");
    write_utterances_file(&utts, synth.dialogue.utterances()).map_err(Error::from)?;
    write_links_file(&links, synth.dialogue.gold_links().expect("generated dialogues are annotated"))
        .map_err(Error::from)?;
    println!("wrote {} and {}", utts.display(), links.display());
    Ok(())
}

const TRAIN_KEYS: &[&str] = &[
    "utterances",
    "links",
    "checkpoint",
    "trace",
    "resume",
    "window",
    "hidden",
    "heads",
    "recurrent",
    "hash_buckets",
    "max_tokens",
    "speaker_mask",
    "reference_graph",
    "epochs",
    "batch_size",
    "lr",
    "weight_decay",
    "holdout",
    "report_every",
    "seed",
];

fn train(a: TrainArgs, config: Option<&Path>) -> CliResult<()> {
    let s = Settings::load(config, TRAIN_KEYS)?;
    let utts: PathBuf = s.required("utterances", a.utterances)?;
    let links: PathBuf = s.required("links", a.links)?;
    let checkpoint: PathBuf = s.required("checkpoint", a.checkpoint)?;
    let trace = s.get("trace", a.trace)?.unwrap_or_else(|| with_suffix(&checkpoint, ".trace.csv"));
    let resume: Option<PathBuf> = s.get("resume", a.resume)?;
    must_exist(&utts)?;
    must_exist(&links)?;
    if let Some(r) = &resume {
        must_exist(r)?;
    }
    must_be_writable(&checkpoint)?;
    must_be_writable(&trace)?;

    let seed = s.or("seed", a.seed, 0)?;
    let md = ModelConfig::default();
    let window = s.or("window", a.window, md.window)?;
    let model_cfg = ModelConfig {
        window,
        hidden: s.or("hidden", a.hidden, md.hidden)?,
        heads: s.or("heads", a.heads, md.heads)?,
        recurrent: s.or("recurrent", a.recurrent, md.recurrent)?,
        hash_buckets: s.or("hash_buckets", a.hash_buckets, md.hash_buckets)?,
        max_tokens: s.or("max_tokens", a.max_tokens, md.max_tokens)?,
        seed,
        speaker_mask: s.or("speaker_mask", a.speaker_mask, md.speaker_mask)?,
        reference_graph: s.or("reference_graph", a.reference_graph, md.reference_graph)?,
    };
    let td = TrainConfig::default();
    let train_cfg = TrainConfig {
        epochs: s.or("epochs", a.epochs, td.epochs)?,
        batch_size: s.or("batch_size", a.batch_size, td.batch_size)?,
        lr: s.or("lr", a.lr, td.lr)?,
        weight_decay: s.or("weight_decay", a.weight_decay, td.weight_decay)?,
        seed,
        window,
        report_every: s.or("report_every", a.report_every, td.report_every)?,
        holdout_fraction: s.or("holdout", a.holdout, td.holdout_fraction)?,
        max_steps: None,
    };
    train_cfg.validate()?;
    model_cfg.validate()?;

    let dialogue = load_dialogue_files(&utts, Some(&links)).map_err(Error::from)?;
    let mut model = match &resume {
        Some(r) => Model::load(r)?,
        None => Model::new(model_cfg)?,
    };
    let report = train_with_progress(std::slice::from_ref(&dialogue), &mut model, &train_cfg, |e| {
        eprintln!("epoch {:>3}  loss {:.5}  held-out accuracy {:.4}", e.epoch, e.loss, e.accuracy);
    })?;

    let mut w = BufWriter::new(File::create(&trace).map_err(|e| io_error(&trace, e))?);
    let mut lines = vec!["epoch,loss,accuracy".to_string()];
    lines.extend(report.trace.iter().map(|e| format!("{},{},{}", e.epoch, e.loss, e.accuracy)));
    for l in lines {
        writeln!(w, "{l}").map_err(|e| io_error(&trace, e))?;
    }
    w.flush().map_err(|e| io_error(&trace, e))?;
    model.save(&checkpoint)?;
    println!("wrote {} and {}", checkpoint.display(), trace.display());
    Ok(())
}

fn predict_cmd(a: PredictArgs, config: Option<&Path>) -> CliResult<()> {
    let s = Settings::load(config, &["utterances", "checkpoint", "out", "confidence"])?;
    let utts: PathBuf = s.required("utterances", a.utterances)?;
    let checkpoint: PathBuf = s.required("checkpoint", a.checkpoint)?;
    let out: PathBuf = s.required("out", a.out)?;
    let conf = s.get("confidence", a.confidence)?.unwrap_or_else(|| with_suffix(&out, ".confidence.jsonl"));
    must_exist(&utts)?;
    must_exist(&checkpoint)?;
    must_be_writable(&out)?;
    must_be_writable(&conf)?;

    let model = Model::load(&checkpoint)?;
    let dialogue = load_dialogue_files(&utts, None).map_err(Error::from)?;
    let preds = predict(&dialogue, &model)?;
    write_links_file(&out, &links_of(&preds)?).map_err(Error::from)?;
    let mut w = BufWriter::new(File::create(&conf).map_err(|e| io_error(&conf, e))?);
    for p in &preds {
        let line = serde_json::to_string(p).expect("plain record");
        writeln!(w, "{line}").map_err(|e| io_error(&conf, e))?;
    }
    w.flush().map_err(|e| io_error(&conf, e))?;
    println!("wrote {} and {}", out.display(), conf.display());
    Ok(())
}

fn evaluate(a: EvaluateArgs, config: Option<&Path>) -> CliResult<()> {
    let s = Settings::load(config, &["pred", "gold", "json"])?;
    let pred_path: PathBuf = s.required("pred", a.pred)?;
    let gold_path: PathBuf = s.required("gold", a.gold)?;
    let json_path: Option<PathBuf> = s.get("json", a.json)?;
    must_exist(&pred_path)?;
    must_exist(&gold_path)?;
    if let Some(j) = &json_path {
        must_be_writable(j)?;
    }

    let pred = read_links_file(&pred_path).map_err(Error::from)?;
    let gold = read_links_file(&gold_path).map_err(Error::from)?;
    let report = evaluate_all(&pred, &gold).map_err(Error::from)?;
    let agree = pred.iter().filter(|(c, p)| gold.get(c) == Some(p)).count();
    print!("{report}");
    println!("{:<10} {:>9.4}", "link_acc", agree as f64 / gold.len().max(1) as f64);
    let json = report.to_json();
    println!("{json}");
    if let Some(j) = &json_path {
        fs::write(j, format!("{json}\n")).map_err(|e| io_error(j, e))?;
    }
    Ok(())
}

fn gradcheck(a: GradcheckArgs, config: Option<&Path>) -> CliResult<()> {
    let s = Settings::load(config, &["seed", "seeds", "tolerance", "step"])?;
    let seed: u64 = s.or("seed", a.seed, 0)?;
    let seeds: u64 = s.or("seeds", a.seeds, 1)?;
    let tolerance: f64 = s.or("tolerance", a.tolerance, 1e-3)?;
    let step: f64 = s.or("step", a.step, 1e-4)?;
    let opts = FdOptions {
        step,
        flip_analytic_sign: a.inject_sign_error,
        ..Default::default()
    };

    let mut failed = false;
    for sd in seed..seed + seeds.max(1) {
        for check in check_layers(sd, opts)? {
            let ok = check.report.passes(tolerance);
            failed |= !ok;
            println!(
                "seed {sd:<3} {:<10} max rel err {:.3e}  {}",
                check.layer,
                check.report.max_rel_error(),
                if ok { "pass" } else { "FAIL" }
            );
            if let (false, Some(w)) = (ok, check.report.worst()) {
                println!(
                    "    worst: {}[{}] analytic {:.6e} numeric {:.6e}",
                    w.param, w.index, w.analytic, w.numeric
                );
            }
        }
    }
    if failed {
        return Err(CliError {
            code: EXIT_GRADIENT,
            message: "gradient check failed".into(),
        });
    }
    Ok(())
}
