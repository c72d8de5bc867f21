//! The `gfr` command line: JSON job configs in, artifacts out.
//!
//! Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 numeric
//! failure. Progress and the final error (if any) are JSON lines on stderr.

use crate::degrade::DegradationParams;
use crate::error::{Error, Result};
use crate::gradsuite::gradient_suite;
use crate::image::Image;
use crate::nn::checkpoint::Checkpoint;
use crate::nn::NetConfig;
use crate::ppm::{read_ppm_file, write_ppm_file};
use crate::train::run::mean_landmark_loss;
use crate::train::{
    build_dataset, evaluate, make_pair_with, pretrain_warpnet, train_full, Ablation, MetricTable, ModelConfig,
    Restorer, Split, TrainConfig, TrainEvent,
};
use crate::warp::{warp_bilinear, FlowField};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;
use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub const THREADS_ENV: &str = "GFR_THREADS";

#[derive(Debug, Parser)]
#[command(name = "gfr", version, about = "Guided face restoration toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render toy faces and write clean/degraded PPM pairs plus a manifest.
    Synth(JobArgs),
    /// Pretrain and train a model, writing checkpoints, a loss log and triptychs.
    Train(JobArgs),
    /// Evaluate checkpoints on a held-out split.
    Eval(JobArgs),
    /// Warp a guide image with a stored flow field.
    Warp(JobArgs),
    /// Restore a degraded image with a guide.
    Restore(JobArgs),
    /// Run the finite-difference gradient suite.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct JobArgs {
    /// JSON job configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Override the root seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthJob {
    #[serde(default)]
    pub seed: u64,
    pub count: usize,
    #[serde(default = "default_size")]
    pub size: usize,
    #[serde(default = "default_split")]
    pub split: String,
    /// Fixed degradation for every item; sampled per item when absent.
    #[serde(default)]
    pub degradation: Option<DegradationParams>,
    pub out_dir: PathBuf,
}

/// Every [`TrainConfig`] field plus the output location.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainJob {
    pub train: TrainConfig,
    pub out_dir: PathBuf,
    /// Write a triptych every this many epochs (0 disables them).
    pub triptych_every: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedCheckpoint {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalJob {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_test_pairs")]
    pub test_pairs: usize,
    pub checkpoints: Vec<NamedCheckpoint>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarpJob {
    #[serde(default)]
    pub seed: u64,
    pub guide: PathBuf,
    pub flow: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RestoreJob {
    #[serde(default)]
    pub seed: u64,
    /// Trained model; freshly initialized networks from `seed` when absent.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub net: NetConfig,
    #[serde(default = "default_ablation")]
    pub ablation: Ablation,
    pub degraded: PathBuf,
    pub guide: PathBuf,
    pub output: PathBuf,
    #[serde(default)]
    pub warped_output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckJob {
    #[serde(default)]
    pub seed: u64,
}

fn default_size() -> usize {
    32
}

fn default_split() -> String {
    "train".into()
}

fn default_test_pairs() -> usize {
    100
}

fn default_ablation() -> Ablation {
    Ablation::Full
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Param(_) | Error::Shape(_) => EXIT_CONFIG,
        Error::Io(_) | Error::Parse { .. } | Error::Decode { .. } => EXIT_IO,
        Error::Numeric(_) => EXIT_NUMERIC,
    }
}

fn kind(e: &Error) -> &'static str {
    match exit_code(e) {
        EXIT_CONFIG => "config",
        EXIT_IO => "io",
        _ => "numeric",
    }
}

fn progress(v: serde_json::Value) {
    eprintln!("{v}");
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn missing(path: &Path, what: &str) -> Error {
    Error::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("{what} {} does not exist", path.display()),
    ))
}

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(missing(path, what))
    }
}

/// An output file may be created: its directory exists and it is not itself a directory.
fn require_writable_file(path: &Path) -> Result<()> {
    if path.is_dir() {
        return Err(Error::Config(format!("output {} is a directory", path.display())));
    }
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => Err(missing(p, "output directory")),
        _ => Ok(()),
    }
}

/// An output directory may be created: it is a directory already, or its parent is.
fn require_out_dir(path: &Path) -> Result<()> {
    if path.exists() {
        if path.is_dir() {
            return Ok(());
        }
        return Err(Error::Config(format!("out_dir {} is not a directory", path.display())));
    }
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => Err(missing(p, "parent of out_dir")),
        _ => Ok(()),
    }
}

fn make_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn write_ppm(path: &Path, img: &Image) -> Result<()> {
    write_ppm_file(path, img).map_err(|e| match e {
        Error::Io(io) => io_err(path, io),
        other => other,
    })
}

/// Worker cap from the environment. The optimization loop is single-threaded,
/// so the cap only has to be well formed.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::Config(format!("{THREADS_ENV}: {e}"))),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

/// Parse `argv` (including the program name), run the job and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let reason = e.to_string();
            let first = reason.lines().next().unwrap_or("invalid arguments");
            progress(json!({"event": "error", "code": EXIT_CONFIG, "kind": "usage", "reason": first}));
            return EXIT_CONFIG;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            let reason = e.to_string().replace('\n', " ");
            progress(json!({"event": "error", "code": code, "kind": kind(&e), "reason": reason}));
            code
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    let threads = thread_cap()?;
    progress(json!({"event": "start", "threads": threads}));
    match cmd {
        Command::Synth(a) => {
            let mut job: SynthJob = read_config(&a.config)?;
            job.seed = a.seed.unwrap_or(job.seed);
            run_synth(&job)
        }
        Command::Train(a) => {
            let mut job = parse_train_job(&a.config)?;
            job.train.seed = a.seed.unwrap_or(job.train.seed);
            run_train(&job)
        }
        Command::Eval(a) => {
            let mut job: EvalJob = read_config(&a.config)?;
            job.seed = a.seed.unwrap_or(job.seed);
            run_eval(&job)
        }
        Command::Warp(a) => {
            let job: WarpJob = read_config(&a.config)?;
            run_warp(&job)
        }
        Command::Restore(a) => {
            let mut job: RestoreJob = read_config(&a.config)?;
            job.seed = a.seed.unwrap_or(job.seed);
            run_restore(&job)
        }
        Command::Gradcheck(a) => {
            let mut job = match &a.config {
                Some(p) => read_config(p)?,
                None => GradcheckJob { seed: 0 },
            };
            job.seed = a.seed.unwrap_or(job.seed);
            run_gradcheck(&job)
        }
    }
}

fn parse_split(s: &str) -> Result<Split> {
    match s {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        other => Err(Error::Config(format!("split must be \"train\" or \"test\", got {other:?}"))),
    }
}

pub fn run_synth(job: &SynthJob) -> Result<()> {
    if job.count == 0 {
        return Err(Error::Config("count must be positive".into()));
    }
    if job.size < crate::toyface::MIN_SIZE {
        return Err(Error::Config(format!("size must be at least {}", crate::toyface::MIN_SIZE)));
    }
    let split = parse_split(&job.split)?;
    if let Some(p) = &job.degradation {
        p.validate()?;
        let (h, w) = crate::degrade::intermediate_size(job.size, job.size, p.scale);
        if h < crate::degrade::MIN_INTERMEDIATE || w < crate::degrade::MIN_INTERMEDIATE {
            return Err(Error::Config(format!("scale {} is too large for size {}", p.scale, job.size)));
        }
    }
    require_out_dir(&job.out_dir)?;
    make_dir(&job.out_dir)?;
    let mut manifest = String::new();
    for i in 0..job.count {
        let s = make_pair_with(job.seed, split, i as u64, job.size, job.degradation)?;
        let name = |kind: &str| format!("{i:04}_{kind}.ppm");
        let (clean, degraded, guide) = (name("clean"), name("degraded"), name("guide"));
        write_ppm(&job.out_dir.join(&clean), &s.target)?;
        write_ppm(&job.out_dir.join(&degraded), &s.degraded)?;
        write_ppm(&job.out_dir.join(&guide), &s.guide)?;
        let line = json!({
            "index": i,
            "identity": s.identity,
            "clean": clean,
            "degraded": degraded,
            "guide": guide,
            "params": s.params,
            "landmarks_target": s.lm_target.points(),
            "landmarks_guide": s.lm_guide.points(),
        });
        manifest.push_str(&line.to_string());
        manifest.push('\n');
        progress(json!({"event": "synth", "index": i, "count": job.count}));
    }
    write_file(&job.out_dir.join("manifest.jsonl"), manifest.as_bytes())
}

/// Split a flat train document into the output keys and the training config.
pub fn parse_train_job(path: &Path) -> Result<TrainJob> {
    let mut doc: serde_json::Value = read_config(path)?;
    let map = doc
        .as_object_mut()
        .ok_or_else(|| Error::Config(format!("{}: expected a JSON object", path.display())))?;
    let out_dir = match map.remove("out_dir") {
        Some(serde_json::Value::String(s)) => PathBuf::from(s),
        Some(_) => return Err(Error::Config("out_dir must be a string".into())),
        None => return Err(Error::Config("missing field `out_dir`".into())),
    };
    let triptych_every = match map.remove("triptych_every") {
        Some(v) => v
            .as_u64()
            .ok_or_else(|| Error::Config("triptych_every must be a nonnegative integer".into()))?
            as usize,
        None => 1,
    };
    let train: TrainConfig =
        serde_json::from_value(doc).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(TrainJob { train, out_dir, triptych_every })
}

fn triptych(model: &mut Restorer, s: &crate::train::SamplePair) -> Result<Image> {
    let (restored, warped) = model.restore(&s.degraded, &s.guide)?;
    Image::hconcat(&[&s.degraded, &warped, &restored, &s.target])
}

pub fn run_train(job: &TrainJob) -> Result<()> {
    let cfg = &job.train;
    cfg.validate()?;
    require_out_dir(&job.out_dir)?;
    let size = cfg.net.input_size;
    let train = build_dataset(cfg.seed, Split::Train, cfg.train_pairs, size)?;
    let test = build_dataset(cfg.seed, Split::Test, cfg.test_pairs, size)?;
    progress(json!({"event": "dataset", "train": train.len(), "test": test.len()}));
    make_dir(&job.out_dir)?;
    let ck_path = job.out_dir.join("checkpoint.gfr");
    let mut model = Restorer::new(cfg.model_config(), cfg.seed)?;

    if cfg.ablation.uses_flow_loss() && cfg.pretrain_epochs > 0 {
        let mut lines = String::new();
        let initial = mean_landmark_loss(&mut model, &train)?;
        lines.push_str(&json!({"epoch": "initial", "mean_landmark": initial}).to_string());
        lines.push('\n');
        let means = pretrain_warpnet(&mut model, &train, cfg, &mut |ev| {
            if let TrainEvent::PretrainEpoch { epoch, mean_landmark } = ev {
                progress(json!({"event": "pretrain_epoch", "epoch": epoch, "mean_landmark": mean_landmark}));
            }
        })?;
        for (epoch, m) in means.iter().enumerate() {
            lines.push_str(&json!({"epoch": epoch, "mean_landmark": m}).to_string());
            lines.push('\n');
        }
        let fin = mean_landmark_loss(&mut model, &train)?;
        lines.push_str(&json!({"epoch": "final", "mean_landmark": fin}).to_string());
        lines.push('\n');
        write_file(&job.out_dir.join("pretrain.jsonl"), lines.as_bytes())?;
    }

    let log_path = job.out_dir.join("loss_log.jsonl");
    let mut log = BufWriter::new(fs::File::create(&log_path).map_err(|e| io_err(&log_path, e))?);
    let mut failure: Option<Error> = None;
    let result = train_full(&mut model, &train, cfg, &mut |ev| {
        if failure.is_some() {
            return;
        }
        let r = match ev {
            TrainEvent::Step(rec) => writeln!(log, "{}", rec.to_json_line()).map_err(|e| io_err(&log_path, e)),
            TrainEvent::Epoch { epoch, mean_reconstruction, lr, model } => {
                progress(json!({"event": "epoch", "epoch": epoch, "mean_reconstruction": mean_reconstruction, "lr": lr}));
                let mut snapshot = model.clone();
                snapshot.finalize();
                let saved = snapshot.to_checkpoint(epoch as u64 + 1).and_then(|ck| ck.save(&ck_path));
                saved.and_then(|()| {
                    if job.triptych_every > 0 && (epoch + 1) % job.triptych_every == 0 {
                        let t = triptych(&mut snapshot, &test[0])?;
                        write_ppm(&job.out_dir.join(format!("triptych_{:03}.ppm", epoch + 1)), &t)
                    } else {
                        Ok(())
                    }
                })
            }
            TrainEvent::PretrainEpoch { .. } => Ok(()),
        };
        if let Err(e) = r {
            failure = Some(e);
        }
    });
    log.flush().map_err(|e| io_err(&log_path, e))?;
    if let Some(e) = failure {
        return Err(e);
    }
    // On a numeric failure the checkpoint of the last finished epoch stays on disk.
    let summary = result?;
    model.finalize();
    model.to_checkpoint(summary.steps)?.save(&ck_path)?;

    let m = evaluate(&mut model, &test)?;
    let mut table = MetricTable::default();
    table.push(cfg.ablation.name(), m.psnr, m.ssim);
    table.push("degraded", m.baseline_psnr, m.baseline_ssim);
    write_file(&job.out_dir.join("metrics.json"), table.to_json().as_bytes())?;
    write_file(&job.out_dir.join("metrics.txt"), table.to_text().as_bytes())?;
    progress(json!({"event": "done", "steps": summary.steps, "psnr": m.psnr, "ssim": m.ssim}));
    Ok(())
}

pub fn run_eval(job: &EvalJob) -> Result<()> {
    if job.checkpoints.is_empty() {
        return Err(Error::Config("checkpoints must not be empty".into()));
    }
    if job.test_pairs == 0 {
        return Err(Error::Config("test_pairs must be positive".into()));
    }
    for c in &job.checkpoints {
        require_file(&c.path, "checkpoint")?;
    }
    require_out_dir(&job.out_dir)?;
    let mut models = Vec::new();
    for c in &job.checkpoints {
        models.push((c.name.clone(), Restorer::from_checkpoint(&Checkpoint::load(&c.path)?)?));
    }
    let size = models[0].1.size();
    if models.iter().any(|(_, m)| m.size() != size) {
        return Err(Error::Config("all checkpoints must share one input size".into()));
    }
    let test = build_dataset(job.seed, Split::Test, job.test_pairs, size)?;
    let mut table = MetricTable::default();
    let mut baseline = None;
    for (name, model) in &mut models {
        let m = evaluate(model, &test)?;
        progress(json!({"event": "evaluated", "name": name, "psnr": m.psnr, "ssim": m.ssim}));
        table.push(name.clone(), m.psnr, m.ssim);
        baseline = Some((m.baseline_psnr, m.baseline_ssim));
    }
    if let Some((p, s)) = baseline {
        table.push("degraded", p, s);
    }
    make_dir(&job.out_dir)?;
    write_file(&job.out_dir.join("metrics.json"), table.to_json().as_bytes())?;
    write_file(&job.out_dir.join("metrics.txt"), table.to_text().as_bytes())
}

pub fn run_warp(job: &WarpJob) -> Result<()> {
    require_file(&job.guide, "guide")?;
    require_file(&job.flow, "flow")?;
    require_writable_file(&job.output)?;
    let guide = read_ppm_file(&job.guide)?;
    let bytes = fs::read(&job.flow).map_err(|e| io_err(&job.flow, e))?;
    // Non-finite values surface as numeric errors from the decoder.
    let flow = FlowField::from_bytes(&bytes)?;
    write_ppm(&job.output, &warp_bilinear(&guide, &flow))
}

pub fn run_restore(job: &RestoreJob) -> Result<()> {
    if let Some(c) = &job.checkpoint {
        require_file(c, "checkpoint")?;
    } else {
        job.net.validate()?;
    }
    require_file(&job.degraded, "degraded image")?;
    require_file(&job.guide, "guide")?;
    require_writable_file(&job.output)?;
    if let Some(w) = &job.warped_output {
        require_writable_file(w)?;
    }
    let mut model = match &job.checkpoint {
        Some(c) => Restorer::from_checkpoint(&Checkpoint::load(c)?)?,
        None => {
            let cfg = ModelConfig { net: job.net, disc_base_channels: 16, ablation: job.ablation };
            Restorer::new(cfg, job.seed)?
        }
    };
    let degraded = read_ppm_file(&job.degraded)?;
    let guide = read_ppm_file(&job.guide)?;
    let (restored, warped) = model.restore(&degraded, &guide)?;
    if !restored.data().iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("restoration produced non-finite values".into()));
    }
    write_ppm(&job.output, &restored)?;
    if let Some(w) = &job.warped_output {
        write_ppm(w, &warped)?;
    }
    Ok(())
}

pub fn run_gradcheck(job: &GradcheckJob) -> Result<()> {
    let entries = gradient_suite(job.seed)?;
    let mut failed = Vec::new();
    let mut out = String::new();
    for e in &entries {
        let verdict = if e.passed() { "pass" } else { "fail" };
        out.push_str(&format!(
            "{:<32} {:>10.3e} {:>8.0e} {}\n",
            e.component, e.report.max_rel_error, e.tolerance, verdict
        ));
        if !e.passed() {
            failed.push(e.component);
        }
    }
    print!("{out}");
    progress(json!({"event": "gradcheck", "components": entries.len(), "failed": failed}));
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("gradient check failed for {}", failed.join(", "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 1);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 2);
        assert_eq!(exit_code(&Error::Numeric("x".into())), 3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let r: std::result::Result<WarpJob, _> =
            serde_json::from_str(r#"{"guide": "a", "flow": "b", "output": "c", "extra": 1}"#);
        assert!(r.is_err());
    }

    #[test]
    fn usage_errors_exit_with_config_code() {
        assert_eq!(run(["gfr", "frobnicate"]), EXIT_CONFIG);
        assert_eq!(run(["gfr", "synth"]), EXIT_CONFIG);
    }
}
