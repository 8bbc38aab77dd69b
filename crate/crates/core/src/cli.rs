//! The `senn` command line: generate, train, evaluate, synthesize, verify.
//!
//! Commands write their report to a caller-supplied stdout/stderr pair so the
//! binary stays a thin wrapper and the output is testable.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::baselines::fit_linear;
use crate::checkpoint::{Checkpoint, ModelKind, SavedModel};
use crate::circuit::{performance_from_geometry, EnvConfig, Geometry, Performance};
use crate::dataset::{self, Dataset, SamplingRanges};
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::matrix::Matrix;
use crate::nn::SennConfig;
use crate::optim::{evaluate_test, train_with_log, Metrics, TrainConfig};

/// Normalised inputs farther than this many standard deviations from the
/// training mean trigger an out-of-distribution warning.
pub const OOD_THRESHOLD: f64 = 4.0;

/// Environment variable selecting deterministic mode (default on). Set to `0`
/// to let dataset generation use every core; results are identical either way.
pub const DETERMINISTIC_ENV: &str = "SENN_DETERMINISTIC";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Desk,
    Full,
}

impl Preset {
    pub fn model(self) -> SennConfig {
        match self {
            Preset::Desk => SennConfig::desk(),
            Preset::Full => SennConfig::full(),
        }
    }

    pub fn train(self) -> TrainConfig {
        match self {
            Preset::Desk => TrainConfig::desk(),
            Preset::Full => TrainConfig::full(),
        }
    }
}

/// Everything a run can be configured with, loadable from one JSON file.
/// Missing keys take their defaults; command-line flags override the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub ranges: SamplingRanges,
    pub env: EnvConfig,
    pub n: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub preset: Preset,
    pub model: Option<SennConfig>,
    pub train: Option<TrainConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            ranges: SamplingRanges::default(),
            env: EnvConfig::default(),
            n: 100_000,
            seed: 0,
            train_fraction: 0.8,
            split_seed: 0,
            preset: Preset::Desk,
            model: None,
            train: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.ranges.validate()?;
        self.env.validate()?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!("train_fraction {} not in (0, 1)", self.train_fraction)));
        }
        Ok(())
    }

    pub fn model_config(&self, preset: Option<Preset>) -> SennConfig {
        match (preset, &self.model) {
            (Some(p), _) => p.model(),
            (None, Some(m)) => m.clone(),
            (None, None) => self.preset.model(),
        }
    }

    pub fn train_config(&self, preset: Option<Preset>) -> TrainConfig {
        match (preset, &self.train) {
            (Some(p), _) => p.train(),
            (None, Some(t)) => t.clone(),
            (None, None) => self.preset.train(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "senn", version, about = "Direct synthesis of transformer matching networks")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset CSV and its JSON sidecar.
    Generate(GenerateArgs),
    /// Train a model and write a checkpoint plus an epoch log.
    Train(TrainArgs),
    /// Report test-split metrics for one or more checkpoints.
    Evaluate(EvaluateArgs),
    /// Predict a geometry for a target impedance and verify it.
    Synthesize(SynthesizeArgs),
    /// Evaluate the input impedance of a geometry.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of rows.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Worker threads (defaults to 1 in deterministic mode).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelChoice {
    Senn,
    Naive,
    Linear,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "senn")]
    pub model: ModelChoice,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub loss: Option<LossKind>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr0: Option<f64>,
    /// Weight-initialisation seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub shuffle_seed: Option<u64>,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Epoch log CSV path.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint(s) to evaluate, one table row each.
    #[arg(long = "checkpoint", required = true, num_args = 1..)]
    pub checkpoints: Vec<PathBuf>,
    /// Write the report as JSON here as well.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    /// Target Re(Z_opt), Ω.
    #[arg(long, allow_hyphen_values = true)]
    pub re: f64,
    /// Target Im(Z_opt), Ω.
    #[arg(long, allow_hyphen_values = true)]
    pub im: f64,
    /// Input loading capacitor, fF.
    #[arg(long)]
    pub c1: f64,
    /// Output loading capacitor, fF.
    #[arg(long)]
    pub c2: f64,
    /// Trained network checkpoint.
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub w_oa: f64,
    #[arg(long)]
    pub w_ob: f64,
    #[arg(long)]
    pub r0: f64,
    #[arg(long)]
    pub r1: f64,
    #[arg(long)]
    pub x_gnd: f64,
    #[arg(long)]
    pub l_f: f64,
    #[arg(long)]
    pub c1: f64,
    #[arg(long)]
    pub c2: f64,
}

impl VerifyArgs {
    pub fn geometry(&self) -> Geometry {
        Geometry {
            w_oa: self.w_oa,
            w_ob: self.w_ob,
            r0: self.r0,
            r1: self.r1,
            x_gnd: self.x_gnd,
            l_f: self.l_f,
        }
    }
}

/// Process exit code for an error: 2 for usage problems, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) | Error::Config(_) => 2,
        _ => 1,
    }
}

fn deterministic() -> bool {
    std::env::var(DETERMINISTIC_ENV).map_or(true, |v| v != "0")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn stdout_err(source: std::io::Error) -> Error {
    Error::Io {
        path: "<stdout>".into(),
        source,
    }
}

/// Runs a parsed command line.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Generate(a) => cmd_generate(&cfg, a, out),
        Command::Train(a) => cmd_train(&cfg, a, out, err),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Synthesize(a) => cmd_synthesize(&cfg, a, out, err).map(|_| ()),
        Command::Verify(a) => cmd_verify(&cfg, a, out).map(|_| ()),
    }
}

pub fn cmd_generate(cfg: &RunConfig, a: &GenerateArgs, out: &mut dyn Write) -> Result<()> {
    let n = a.n.unwrap_or(cfg.n);
    if n == 0 {
        return Err(Error::Usage("--n must be at least 1".into()));
    }
    let fraction = a.train_fraction.unwrap_or(cfg.train_fraction);
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Usage(format!("--train-fraction {fraction} must lie in (0, 1)")));
    }
    let seed = a.seed.unwrap_or(cfg.seed);
    let threads = match a.threads {
        Some(0) => return Err(Error::Usage("--threads must be at least 1".into())),
        Some(t) => t,
        None if deterministic() => 1,
        None => std::thread::available_parallelism().map_or(1, |p| p.get()),
    };
    let data = dataset::generate_with_threads(n, seed, &cfg.ranges, &cfg.env, threads)?;
    let data = dataset::split(data, fraction, a.split_seed.unwrap_or(cfg.split_seed))?;
    let sum = data.save(&a.out)?;
    writeln!(out, "rows {n}").map_err(stdout_err)?;
    writeln!(out, "sha256 {sum}").map_err(stdout_err)?;
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig, a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let data = Dataset::load(&a.data)?;
    data.split_info()?;
    if a.model == ModelChoice::Linear {
        if a.epochs.is_some() {
            writeln!(err, "warning: --epochs is ignored for the linear model").map_err(stdout_err)?;
        }
        let model = fit_linear(&data)?;
        let ckpt = Checkpoint::linear(model);
        ckpt.save(&a.out)?;
        let m = evaluate_checkpoint(&ckpt, &data)?;
        writeln!(out, "linear fit: test smse {} sdmse {} r2 {}", m.smse, m.sdmse, m.r2).map_err(stdout_err)?;
        return Ok(());
    }

    let model_cfg = cfg.model_config(a.preset);
    let mut tc = cfg.train_config(a.preset);
    if let Some(v) = a.epochs {
        tc.epochs = v;
    }
    if let Some(v) = a.batch_size {
        tc.batch_size = v;
    }
    if let Some(v) = a.lr0 {
        tc.schedule.lr0 = v;
    }
    if let Some(v) = a.loss {
        tc.risk.loss_kind = v;
    }
    if let Some(v) = a.seed {
        tc.init_seed = v;
    }
    if let Some(v) = a.shuffle_seed {
        tc.shuffle_seed = v;
    }
    if let Some(v) = a.lambda {
        tc.risk.lambda = v;
    }
    let kind = match a.model {
        ModelChoice::Naive => {
            if a.lambda.is_some_and(|l| l != 0.0) {
                writeln!(err, "warning: --lambda is forced to 0 for the naive model").map_err(stdout_err)?;
            }
            tc.risk.lambda = 0.0;
            ModelKind::Naive
        }
        _ => ModelKind::Senn,
    };
    tc.validate()?;

    let mut log_file = match &a.log {
        Some(p) => Some(BufWriter::new(File::create(p).map_err(io_err(p))?)),
        None => None,
    };
    let sink = log_file.as_mut().map(|w| w as &mut dyn Write);
    let outcome = train_with_log(&data, &model_cfg, &tc, sink)?;
    for e in &outcome.log {
        writeln!(
            out,
            "epoch {:>4}  eta {:.3e}  train {:.6e}  test smse {:.6e}  sdmse {:.6e}  r2 {:.6}",
            e.epoch, e.eta, e.train_loss, e.test_smse, e.test_sdmse, e.test_r2
        )
        .map_err(stdout_err)?;
    }
    Checkpoint::network(kind, outcome.model, Some(tc)).save(&a.out)?;
    writeln!(out, "wrote {}", a.out.display()).map_err(stdout_err)?;
    Ok(())
}

/// Test-split metrics of any checkpoint; networks go through the same path
/// as the trainer's per-epoch log.
pub fn evaluate_checkpoint(ckpt: &Checkpoint, data: &Dataset) -> Result<Metrics> {
    match &ckpt.model {
        SavedModel::Network(m) => {
            let mut m = m.clone();
            if m.input_stats().is_none() {
                m.set_input_stats(Some(*data.norm_stats()?));
            }
            Ok(evaluate_test(&m, data)?)
        }
        SavedModel::Linear(l) => {
            let rows = data.test_indices()?;
            let x = l.input_stats.normalize_batch(rows.iter().map(|&i| &data.triples[i].performance));
            let pred = l.predict(&x)?;
            Ok(Metrics::of(&pred, &data.geometry_targets(&rows))?)
        }
    }
}

/// One row of the evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub kind: ModelKind,
    pub checkpoint: String,
    pub training_loss: Option<LossKind>,
    pub smse: f64,
    pub sdmse: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub split: String,
    pub rows: usize,
    pub models: Vec<ReportRow>,
}

impl Report {
    /// Human-readable table; numbers use the same shortest round-trip form
    /// as the JSON.
    pub fn table(&self) -> String {
        let mut s = format!(
            "Performance on the {} split ({} rows)\n{:<20} {:<8} {:<24} {:<24} {:<24}\n",
            self.split, self.rows, "model", "loss", "SMSE", "SDMSE", "R2"
        );
        for r in &self.models {
            let loss = r.training_loss.map_or("-".to_string(), |l| l.to_string().to_uppercase());
            s.push_str(&format!(
                "{:<20} {:<8} {:<24} {:<24} {:<24}\n",
                r.model, loss, r.smse, r.sdmse, r.r2
            ));
        }
        s
    }
}

pub fn evaluate_report(data: &Dataset, checkpoints: &[PathBuf]) -> Result<Report> {
    let rows = data.test_indices()?.len();
    let mut models = Vec::with_capacity(checkpoints.len());
    for path in checkpoints {
        let ckpt = Checkpoint::load(path)?;
        let m = evaluate_checkpoint(&ckpt, data)?;
        models.push(ReportRow {
            model: ckpt.kind.to_string(),
            kind: ckpt.kind,
            checkpoint: path.display().to_string(),
            training_loss: ckpt.training.as_ref().map(|t| t.risk.loss_kind),
            smse: m.smse,
            sdmse: m.sdmse,
            r2: m.r2,
        });
    }
    Ok(Report {
        split: "test".into(),
        rows,
        models,
    })
}

pub fn cmd_evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let data = Dataset::load(&a.data)?;
    let report = evaluate_report(&data, &a.checkpoints)?;
    write!(out, "{}", report.table()).map_err(stdout_err)?;
    if let Some(path) = &a.json {
        let json = serde_json::to_string_pretty(&report).expect("report is serialisable");
        std::fs::write(path, json + "\n").map_err(io_err(path))?;
    }
    Ok(())
}

/// Result of a synthesis: the geometry as reported (0.01 µm grid) and the
/// impedance that geometry achieves under the surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Synthesis {
    pub target: Performance,
    pub geometry: Geometry,
    pub achieved: Performance,
    pub out_of_distribution: bool,
}

fn round_to_grid(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Predicts a geometry with the physical head, snaps it to the 0.01 µm
/// reporting grid, and verifies the snapped geometry.
pub fn synthesize(
    model: &crate::nn::SennModel,
    target: &Performance,
    env: &EnvConfig,
    err: &mut dyn Write,
) -> Result<Synthesis> {
    let stats = model.input_stats().ok_or(crate::nn::NnError::MissingInputStats)?;
    let z = stats.normalize(target);
    let mut ood = false;
    for (name, v) in Performance::FIELD_NAMES.iter().zip(z) {
        if v.abs() > OOD_THRESHOLD {
            ood = true;
            writeln!(
                err,
                "warning: {name} lies {v:.2} standard deviations from the training mean; \
                 the prediction is outside the training distribution"
            )
            .map_err(stdout_err)?;
        }
    }
    let raw = model.predict_geometry(target)?;
    let geometry = Geometry::from_array(raw.to_array().map(round_to_grid));
    if let Err(e) = geometry.validate() {
        return Err(Error::Usage(format!("synthesized geometry is not physical ({e}); target is too far outside the training data")));
    }
    let achieved = performance_from_geometry(&geometry, target.c1, target.c2, env)?;
    Ok(Synthesis {
        target: *target,
        geometry,
        achieved,
        out_of_distribution: ood,
    })
}

pub fn format_geometry(g: &Geometry) -> String {
    format!(
        "Synthesized geometry\n  W_OA  = {:6.2} um    r0  = {:6.2} um\n  W_OB  = {:6.2} um    r1  = {:6.2} um\n  x_gnd = {:6.2} um    l_f = {:6.2} um\n",
        g.w_oa, g.r0, g.w_ob, g.r1, g.x_gnd, g.l_f
    )
}

pub fn cmd_synthesize(
    cfg: &RunConfig,
    a: &SynthesizeArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<Synthesis> {
    if !(a.re > 0.0 && a.c1 > 0.0 && a.c2 > 0.0) || !a.im.is_finite() {
        return Err(Error::Usage("--re, --c1 and --c2 must be positive, --im finite".into()));
    }
    let ckpt = Checkpoint::load(&a.model)?;
    let model = ckpt
        .as_network()
        .ok_or_else(|| Error::Usage("synthesis needs a network checkpoint, not a linear model".into()))?;
    let target = Performance {
        re_z: a.re,
        im_z: a.im,
        c1: a.c1,
        c2: a.c2,
    };
    let s = synthesize(model, &target, &cfg.env, err)?;
    let mut text = format_geometry(&s.geometry);
    text.push_str(&format!(
        "\n{:<14} {:>16} {:>16}\n{:<14} {:>16.3} {:>16.3}\n{:<14} {:>16.3} {:>16.3}\n",
        "",
        "Re(Z_opt) (Ohm)",
        "Im(Z_opt) (Ohm)",
        "Targeted",
        s.target.re_z,
        s.target.im_z,
        "Synthesized",
        s.achieved.re_z,
        s.achieved.im_z
    ));
    write!(out, "{text}").map_err(stdout_err)?;
    Ok(s)
}

pub fn cmd_verify(cfg: &RunConfig, a: &VerifyArgs, out: &mut dyn Write) -> Result<Performance> {
    if !(a.c1 > 0.0 && a.c2 > 0.0) {
        return Err(Error::Usage("--c1 and --c2 must be positive".into()));
    }
    let g = a.geometry();
    g.validate().map_err(|e| Error::Usage(e.to_string()))?;
    let p = performance_from_geometry(&g, a.c1, a.c2, &cfg.env)?;
    writeln!(out, "Re(Z_in) = {:.3} Ohm\nIm(Z_in) = {:.3} Ohm", p.re_z, p.im_z).map_err(stdout_err)?;
    Ok(p)
}

/// Physical predictions of a checkpoint for raw performances.
pub fn predict_geometries(ckpt: &Checkpoint, xs: &[Performance]) -> Result<Matrix> {
    let stats = ckpt.input_stats().ok_or(crate::nn::NnError::MissingInputStats)?;
    Ok(ckpt.predict_physical(&stats.normalize_batch(xs))?)
}
