//! Batch front end behind the `wdro` binary.
//!
//! Flags and an optional JSON config file are merged into a [`RunConfig`]
//! (flags win), [`run`] dispatches to one module and returns a [`Report`].
//! Exit codes: 0 success, 1 computational failure, 2 usage error.

use crate::calibrate::{self, CoverageConfig, MomentTailModel, TailModel};
use crate::convex::{NormSpec, SetSpec};
use crate::learn::{self, Dataset, TrainOptions, UnivariateLoss};
use crate::mmse::{self, JointMoments};
use crate::numerics::{sym_eig, Tolerance};
use crate::shrinkage;
use crate::transport::{self, kr_verify};
use crate::wc_empirical::{self, AffinePiece, BallSpec, ExtremalReport, PiecewiseAffineLoss, QuadraticLoss};
use crate::wc_moments::{self, GelbrichBall};
use crate::{DiscreteDistribution, Mat, MomentPair, Vector};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Clap(#[from] clap::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Transport,
    WcRisk,
    Gelbrich,
    Shrink,
    Mmse,
    Train,
    Calibrate,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Transport => "transport",
            Self::WcRisk => "wc-risk",
            Self::Gelbrich => "gelbrich",
            Self::Shrink => "shrink",
            Self::Mmse => "mmse",
            Self::Train => "train",
            Self::Calibrate => "calibrate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    /// one sample per row
    Samples,
    /// the covariance matrix itself, one row per line
    Covariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationMethod {
    Empirical,
    Moments,
    Coverage,
}

#[derive(Debug, Parser)]
#[command(name = "wdro", version, about = "Wasserstein distributionally robust optimization toolkit")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct GlobalArgs {
    /// Solver tolerance
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    /// Seed for every random draw
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<PathBuf>,
    /// JSON file with default values for any flag
    #[arg(long, global = true)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Wasserstein distance between two discrete distributions
    Transport(TransportArgs),
    /// Worst-case risk over a Wasserstein ball around samples
    WcRisk(WcRiskArgs),
    /// Worst-case quadratic risk over a Gelbrich moment ball
    Gelbrich(GelbrichArgs),
    /// Robust inverse covariance estimate
    Shrink(ShrinkArgs),
    /// Minimax affine estimator by Frank-Wolfe
    Mmse(MmseArgs),
    /// Robust linear classifier or regressor
    Train(TrainArgs),
    /// Ball radius from concentration bounds, or a coverage experiment
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct TransportArgs {
    /// Source distribution (.json atoms/weights or .csv samples)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<PathBuf>,
    /// Transport order p >= 1
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    order: Option<f64>,
    /// l1, l2, linf or p=<value>
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    norm: Option<String>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct WcRiskArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<PathBuf>,
    /// Loss descriptor (.json)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    loss: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    /// 1, 2 or inf
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    order: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    norm: Option<String>,
    /// Support set descriptor (.json); the whole space by default
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    support: Option<PathBuf>,
    /// Also report a (possibly asymptotic) worst-case distribution
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    extremal: bool,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct GelbrichArgs {
    /// Moment pair (.json mean/cov)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    moments: Option<PathBuf>,
    /// Quadratic loss descriptor (.json)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    loss: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct ShrinkArgs {
    /// CSV with a header row
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    input_kind: Option<InputKind>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct MmseArgs {
    /// Joint moments of (x, y), x first (.json mean/cov)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    moments: Option<PathBuf>,
    /// Dimension of x
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    signal_dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    iters: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct TrainArgs {
    /// CSV with a header row; the label is the last column
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
    /// hinge, smooth_hinge, logloss, squared, huber:<d>, eps_insensitive:<d>, pinball:<tau>
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    loss: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    /// Norm on the features
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    norm: Option<String>,
    /// Transport order: 1 for Lipschitz losses, 2 for squared
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    order: Option<f64>,
    /// Name of the label column
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    /// Center and scale every feature first
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    standardize: bool,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct CalibrateArgs {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<CalibrationMethod>,
    /// Number of samples
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    order: Option<f64>,
    /// Dimension of the data
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tail_alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    c1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    c2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    /// Resampled datasets for the coverage experiment
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<usize>,
}

/// Fully merged configuration of one run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<CommandKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moments: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_kind: Option<InputKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<PathBuf>,
    /// a file path for `wc-risk` and `gelbrich`, a descriptor for `train`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extremal: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signal_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standardize: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<CalibrationMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
}

impl RunConfig {
    pub fn command(&self) -> CommandKind {
        self.command.expect("validated config has a command")
    }
}

fn to_map<T: Serialize>(v: &T) -> Map<String, Value> {
    match serde_json::to_value(v) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    }
}

/// Parses `argv` (program name first) and merges it over the config file.
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let mut merged = match &cli.global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("--config {}: {e}", path.display())))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(CliError::usage(format!("--config {}: expected a JSON object", path.display()))),
                Err(e) => return Err(CliError::usage(format!("--config {}: {e}", path.display()))),
            }
        }
        None => Map::new(),
    };
    let mut flags = to_map(&cli.global);
    let (kind, sub) = match &cli.command {
        Some(Command::Transport(a)) => (Some(CommandKind::Transport), to_map(a)),
        Some(Command::WcRisk(a)) => (Some(CommandKind::WcRisk), to_map(a)),
        Some(Command::Gelbrich(a)) => (Some(CommandKind::Gelbrich), to_map(a)),
        Some(Command::Shrink(a)) => (Some(CommandKind::Shrink), to_map(a)),
        Some(Command::Mmse(a)) => (Some(CommandKind::Mmse), to_map(a)),
        Some(Command::Train(a)) => (Some(CommandKind::Train), to_map(a)),
        Some(Command::Calibrate(a)) => (Some(CommandKind::Calibrate), to_map(a)),
        None => (None, Map::new()),
    };
    flags.extend(sub);
    if let Some(k) = kind {
        flags.insert("command".into(), serde_json::to_value(k).expect("enum serializes"));
    }
    merged.extend(flags);
    let config: RunConfig =
        serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::usage(format!("configuration: {e}")))?;
    validate(&config)?;
    Ok(config)
}

fn require<'a, T>(value: &'a Option<T>, flag: &str, cmd: CommandKind) -> Result<&'a T, CliError> {
    value.as_ref().ok_or_else(|| CliError::usage(format!("--{flag} is required for `{}`", cmd.name())))
}

fn require_file(path: &Option<PathBuf>, flag: &str, cmd: CommandKind) -> Result<(), CliError> {
    let p = require(path, flag, cmd)?;
    if !p.is_file() {
        return Err(CliError::usage(format!("--{flag} {}: no such file", p.display())));
    }
    Ok(())
}

fn check_radius(eps: f64, flag: &str) -> Result<(), CliError> {
    if eps >= 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(CliError::usage(format!("--{flag} must be finite and nonnegative, got {eps}")))
    }
}

/// Checks that everything the chosen command needs is present and well formed.
pub fn validate(c: &RunConfig) -> Result<(), CliError> {
    let cmd = c.command.ok_or_else(|| CliError::usage("no command given (as a subcommand or `command` in --config)"))?;
    if let Some(t) = c.tol {
        if !(t > 0.0) || !t.is_finite() {
            return Err(CliError::usage(format!("--tol must be positive, got {t}")));
        }
    }
    if let Some(n) = &c.norm {
        parse_norm(n)?;
    }
    match cmd {
        CommandKind::Transport => {
            require_file(&c.source, "source", cmd)?;
            require_file(&c.target, "target", cmd)?;
        }
        CommandKind::WcRisk => {
            require_file(&c.samples, "samples", cmd)?;
            require_file(&c.loss.as_ref().map(PathBuf::from), "loss", cmd)?;
            check_radius(*require(&c.eps, "eps", cmd)?, "eps")?;
            if let Some(s) = &c.support {
                if !s.is_file() {
                    return Err(CliError::usage(format!("--support {}: no such file", s.display())));
                }
            }
        }
        CommandKind::Gelbrich => {
            require_file(&c.moments, "moments", cmd)?;
            require_file(&c.loss.as_ref().map(PathBuf::from), "loss", cmd)?;
            check_radius(*require(&c.eps, "eps", cmd)?, "eps")?;
        }
        CommandKind::Shrink => {
            require_file(&c.input, "input", cmd)?;
            let eps = *require(&c.eps, "eps", cmd)?;
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(CliError::usage(format!("--eps must be positive for `shrink`, got {eps}")));
            }
        }
        CommandKind::Mmse => {
            require_file(&c.moments, "moments", cmd)?;
            require(&c.signal_dim, "signal-dim", cmd)?;
            check_radius(*require(&c.eps, "eps", cmd)?, "eps")?;
        }
        CommandKind::Train => {
            require_file(&c.input, "input", cmd)?;
            parse_loss(require(&c.loss, "loss", cmd)?)?;
            check_radius(*require(&c.eps, "eps", cmd)?, "eps")?;
        }
        CommandKind::Calibrate => {
            let method = *require(&c.method, "method", cmd)?;
            require(&c.eta, "eta", cmd)?;
            if method != CalibrationMethod::Coverage {
                require(&c.n, "n", cmd)?;
            }
            if method == CalibrationMethod::Empirical {
                require(&c.order, "order", cmd)?;
                require(&c.dim, "dim", cmd)?;
            }
        }
    }
    Ok(())
}

/// `l1`, `l2`, `linf` or `p=<value>`.
pub fn parse_norm(s: &str) -> Result<NormSpec, CliError> {
    let norm = match s {
        "l1" => NormSpec::l1(),
        "l2" => NormSpec::l2(),
        "linf" => NormSpec::linf(),
        _ => {
            let p = s
                .strip_prefix("p=")
                .and_then(|v| if v == "inf" { Some(f64::INFINITY) } else { v.parse::<f64>().ok() })
                .ok_or_else(|| CliError::usage(format!("--norm {s}: expected l1, l2, linf or p=<value>")))?;
            NormSpec::P { p }
        }
    };
    norm.validate(None).map_err(|e| CliError::usage(format!("--norm {s}: {e}")))?;
    Ok(norm)
}

/// `hinge`, `smooth_hinge`, `logloss`, `squared`, `huber:<d>`,
/// `eps_insensitive:<d>` or `pinball:<tau>`.
pub fn parse_loss(s: &str) -> Result<UnivariateLoss, CliError> {
    let (name, arg) = match s.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (s, None),
    };
    let param = || -> Result<f64, CliError> {
        arg.and_then(|a| a.parse().ok())
            .ok_or_else(|| CliError::usage(format!("--loss {s}: `{name}` needs a numeric parameter, e.g. {name}:0.5")))
    };
    let loss = match name {
        "hinge" => UnivariateLoss::Hinge,
        "smooth_hinge" => UnivariateLoss::SmoothHinge,
        "logloss" => UnivariateLoss::LogLoss,
        "squared" => UnivariateLoss::Squared,
        "huber" => UnivariateLoss::Huber { delta: param()? },
        "eps_insensitive" => UnivariateLoss::EpsInsensitive { delta: param()? },
        "pinball" => UnivariateLoss::Pinball { tau: param()? },
        _ => return Err(CliError::usage(format!("--loss {s}: unknown loss"))),
    };
    loss.validate().map_err(|e| CliError::usage(format!("--loss {s}: {e}")))?;
    Ok(loss)
}

/// On-disk discrete distribution; weights default to uniform.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionFile {
    pub atoms: Vec<Vec<f64>>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsFile {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceFile {
    pub a: Vec<f64>,
    pub b: f64,
}

/// `piecewise_affine`: `max_k a_k^T x + b_k`; `quadratic`: `x^T Q x + 2 q^T x`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossFile {
    PiecewiseAffine { pieces: Vec<PieceFile> },
    Quadratic { matrix: Vec<Vec<f64>>, q: Vec<f64> },
}

/// `{c x <= d}` or a box.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SupportFile {
    Whole,
    Polyhedron { c: Vec<Vec<f64>>, d: Vec<f64> },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, flag: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("--{flag} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("--{flag} {}: {e}", path.display())))
}

/// Header names and numeric rows of a CSV file.
pub fn read_csv(path: &Path, flag: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let ctx = |e: &dyn std::fmt::Display| CliError::usage(format!("--{flag} {}: {e}", path.display()));
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path).map_err(|e| ctx(&e))?;
    let headers: Vec<String> = rdr.headers().map_err(|e| ctx(&e))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ctx(&e))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, f)| f.parse::<f64>().map_err(|_| ctx(&format!("line {}, column {}: `{f}` is not a number", i + 2, j + 1))))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(ctx(&"no data rows"));
    }
    Ok((headers, rows))
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Mat, CliError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(CliError::usage(format!("{what}: rows must be nonempty and of equal length")));
    }
    Ok(Mat::from_fn(n, m, |i, j| rows[i][j]))
}

fn load_distribution(path: &Path, flag: &str) -> Result<DiscreteDistribution, CliError> {
    let (atoms, weights) = if path.extension().is_some_and(|e| e == "csv") {
        (read_csv(path, flag)?.1, None)
    } else {
        let f: DistributionFile = read_json(path, flag)?;
        (f.atoms, f.weights)
    };
    let atoms: Vec<Vector> = atoms.into_iter().map(Vector::from_vec).collect();
    let d = match weights {
        Some(w) => DiscreteDistribution::new(atoms, w),
        None => DiscreteDistribution::empirical(atoms),
    };
    d.map_err(|e| CliError::usage(format!("--{flag} {}: {e}", path.display())))
}

fn load_moments(path: &Path) -> Result<MomentPair, CliError> {
    let f: MomentsFile = read_json(path, "moments")?;
    let cov = matrix(&f.cov, "--moments cov")?;
    MomentPair::new(Vector::from_vec(f.mean), cov).map_err(|e| CliError::usage(format!("--moments {}: {e}", path.display())))
}

fn load_support(path: &Path, dim: usize) -> Result<SetSpec, CliError> {
    let bad = |m: &str| CliError::usage(format!("--support {}: {m}", path.display()));
    Ok(match read_json::<SupportFile>(path, "support")? {
        SupportFile::Whole => SetSpec::Whole,
        SupportFile::Polyhedron { c, d } => {
            let c = matrix(&c, "--support c")?;
            if c.nrows() != d.len() || c.ncols() != dim {
                return Err(bad("c must be (len d) x (sample dimension)"));
            }
            SetSpec::Polyhedron { c, d: Vector::from_vec(d) }
        }
        SupportFile::Box { lower, upper } => {
            if lower.len() != dim || upper.len() != dim {
                return Err(bad("bounds must match the sample dimension"));
            }
            let eye = Mat::identity(dim, dim);
            let mut c = Mat::zeros(2 * dim, dim);
            c.view_mut((0, 0), (dim, dim)).copy_from(&eye);
            c.view_mut((dim, 0), (dim, dim)).copy_from(&(-eye));
            let d = Vector::from_iterator(2 * dim, upper.iter().copied().chain(lower.iter().map(|v| -v)));
            SetSpec::Polyhedron { c, d }
        }
    })
}

/// Error entry of a failed run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timings {
    pub elapsed_ms: f64,
}

/// Everything one run produced. Serialized as a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: CommandKind,
    pub config: RunConfig,
    pub status: String,
    pub results: Value,
    pub certificates: Value,
    pub error: Option<ErrorReport>,
    pub timings: Timings,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.error.is_none() {
            EXIT_OK
        } else {
            EXIT_FAILURE
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Failure during a run: bad input content (exit 2) or a computation (exit 1).
#[derive(Debug)]
pub enum RunError {
    Usage(CliError),
    Compute(ErrorReport),
}

impl From<CliError> for RunError {
    fn from(e: CliError) -> Self {
        Self::Usage(e)
    }
}

/// Error name for reports: the innermost variant name of the error's debug form,
/// with unsupported inputs reported uniformly.
fn error_kind(debug: &str) -> String {
    if debug.contains("Unsupported") {
        return "UnsupportedCombination".into();
    }
    let mut kind = "ComputationError";
    let mut rest = debug;
    while let Some(end) = rest.find(|c: char| !(c.is_alphanumeric() || c == '_')) {
        let ident = &rest[..end];
        if ident.is_empty() {
            break;
        }
        kind = ident;
        if rest[end..].starts_with('(') {
            rest = &rest[end + 1..];
        } else {
            break;
        }
    }
    if rest.chars().all(|c| c.is_alphanumeric() || c == '_') && !rest.is_empty() {
        kind = rest;
    }
    kind.to_string()
}

fn compute<E: std::fmt::Debug + std::fmt::Display>(e: E) -> RunError {
    RunError::Compute(ErrorReport { kind: error_kind(&format!("{e:?}")), message: e.to_string() })
}

fn mat_json(m: &Mat) -> Value {
    Value::Array(m.row_iter().map(|r| json!(r.iter().copied().collect::<Vec<f64>>())).collect())
}

fn vec_json(v: &Vector) -> Value {
    json!(v.as_slice())
}

fn dist_json(d: &DiscreteDistribution) -> Value {
    json!({
        "atoms": d.atoms().iter().map(vec_json).collect::<Vec<_>>(),
        "weights": d.weights(),
    })
}

fn extremal_json(r: &ExtremalReport) -> Value {
    match r {
        ExtremalReport::Attained { distribution } => json!({ "kind": "attained", "distribution": dist_json(distribution) }),
        ExtremalReport::Asymptotic { family } => json!({
            "kind": "asymptotic",
            "base": family.base.iter().map(|a| json!({
                "location": vec_json(&a.location), "weight": a.weight, "shrink": a.shrink,
            })).collect::<Vec<_>>(),
            "escaping": family.escaping.iter().map(|a| json!({
                "origin": vec_json(&a.origin), "direction": vec_json(&a.direction), "rate": a.rate, "mass": a.mass,
            })).collect::<Vec<_>>(),
        }),
    }
}

type Outcome = Result<(Value, Value), RunError>;

fn run_transport(c: &RunConfig) -> Outcome {
    let source = load_distribution(c.source.as_ref().unwrap(), "source")?;
    let target = load_distribution(c.target.as_ref().unwrap(), "target")?;
    let p = c.order.unwrap_or(1.0);
    let norm = parse_norm(c.norm.as_deref().unwrap_or("l2"))?;
    let r = transport::wasserstein_p(&source, &target, p, &norm).map_err(compute)?;
    let mut cert = json!({
        "duality_gap": r.duality_gap,
        "marginal_error": r.plan.marginal_error(&source, &target),
        "dual_feasibility_violation": r.duals.max_violation(&transport::cost_matrix(&source, &target, p, &norm)).max(0.0),
    });
    if p == 1.0 {
        let kr = kr_verify(&source, &target, &norm, &r.duals, 1e-9);
        cert["kr_feasible"] = json!(kr.feasible);
        cert["kr_dual_value"] = json!(kr.dual_value);
    }
    let res = json!({
        "distance": r.distance,
        "cost": r.plan.cost,
        "plan": mat_json(&r.plan.coupling),
        "phi": r.duals.phi,
        "psi": r.duals.psi,
    });
    Ok((res, cert))
}

fn run_wc_risk(c: &RunConfig) -> Outcome {
    let samples = load_distribution(c.samples.as_ref().unwrap(), "samples")?;
    let loss_path = PathBuf::from(c.loss.as_ref().unwrap());
    let loss: LossFile = read_json(&loss_path, "loss")?;
    let norm = parse_norm(c.norm.as_deref().unwrap_or("l2"))?;
    let support = match &c.support {
        Some(p) => load_support(p, samples.dim())?,
        None => SetSpec::Whole,
    };
    let p = c.order.unwrap_or(1.0);
    let ball = BallSpec::new(c.eps.unwrap(), p, norm, support);
    match loss {
        LossFile::PiecewiseAffine { pieces } => {
            let pieces = pieces.into_iter().map(|p| AffinePiece::new(p.a, p.b)).collect();
            let loss = PiecewiseAffineLoss::new(pieces).map_err(compute)?;
            let r = wc_empirical::wc_risk_pwa(&loss, &samples, &ball).map_err(compute)?;
            let mut res = json!({ "value": r.value, "method": r.method, "gamma": r.gamma, "nominal": loss.expected(&samples) });
            let mut cert = json!({ "lp_gap": r.lp_gap });
            if p == 1.0 {
                cert["lipschitz_upper_bound"] =
                    json!(wc_empirical::lipschitz_upper_bound(&loss, &samples, &ball).map_err(compute)?);
            }
            if c.extremal == Some(true) {
                let (v, rep) = wc_empirical::extremal_pwa(&loss, &samples, &ball).map_err(compute)?;
                res["extremal"] = extremal_json(&rep);
                cert["extremal_value"] = json!(v);
            }
            Ok((res, cert))
        }
        LossFile::Quadratic { matrix: q_mat, q } => {
            let loss = QuadraticLoss::new(matrix(&q_mat, "--loss matrix")?, Vector::from_vec(q)).map_err(compute)?;
            let r = wc_empirical::wc_risk_quadratic(&loss, &samples, &ball).map_err(compute)?;
            let mut res = json!({
                "value": r.value, "gamma": r.gamma, "alpha": r.alpha, "boundary": r.boundary,
                "nominal": loss.expected(&samples),
            });
            let mut cert = json!({});
            if c.extremal == Some(true) {
                let (v, rep) = wc_empirical::extremal_quadratic(&loss, &samples, &ball).map_err(compute)?;
                res["extremal"] = extremal_json(&rep);
                cert["extremal_value"] = json!(v);
            }
            Ok((res, cert))
        }
    }
}

fn run_gelbrich(c: &RunConfig) -> Outcome {
    let center = load_moments(c.moments.as_ref().unwrap())?;
    let loss_path = PathBuf::from(c.loss.as_ref().unwrap());
    let LossFile::Quadratic { matrix: q_mat, q } = read_json(&loss_path, "loss")? else {
        return Err(CliError::usage(format!("--loss {}: `gelbrich` needs a quadratic loss", loss_path.display())).into());
    };
    let loss = QuadraticLoss::new(matrix(&q_mat, "--loss matrix")?, Vector::from_vec(q)).map_err(compute)?;
    let ball = GelbrichBall::new(center, c.eps.unwrap()).map_err(compute)?;
    let r = wc_moments::gelbrich_risk_quadratic(&loss, &ball).map_err(compute)?;
    let res = json!({
        "value": r.value,
        "gamma": r.gamma,
        "extremal_mean": vec_json(&r.extremal.mean),
        "extremal_cov": mat_json(&r.extremal.cov),
    });
    let cert = json!({
        "dual_value": r.dual_value,
        "primal_value": r.primal_value,
        "primal_dual_gap": (r.dual_value - r.primal_value).abs(),
        "regularization": r.regularization,
    });
    Ok((res, cert))
}

fn run_shrink(c: &RunConfig) -> Outcome {
    let path = c.input.as_ref().unwrap();
    let rows = read_csv(path, "input")?.1;
    let moments = match c.input_kind.unwrap_or(InputKind::Samples) {
        InputKind::Samples => {
            let samples: Vec<Vector> = rows.into_iter().map(Vector::from_vec).collect();
            let dim = samples[0].len();
            if samples.iter().any(|s| s.len() != dim) {
                return Err(CliError::usage(format!("--input {}: ragged rows", path.display())).into());
            }
            shrinkage::sample_moments(&samples).map_err(compute)?
        }
        InputKind::Covariance => {
            let cov = matrix(&rows, "--input")?;
            MomentPair::new(Vector::zeros(cov.nrows()), cov)
                .map_err(|e| CliError::usage(format!("--input {}: {e}", path.display())))?
        }
    };
    let eps = c.eps.unwrap();
    let r = shrinkage::wasserstein_shrinkage(&moments, eps).map_err(compute)?;
    let lambdas: Vec<f64> = r.eigen_map.iter().map(|e| e.0).collect();
    let min_eig = sym_eig(&r.precision).map_err(compute)?.min_value();
    let res = json!({
        "gamma": r.gamma,
        "mean": vec_json(&r.mean),
        "precision": mat_json(&r.precision),
        "eigen_map": r.eigen_map.iter().map(|&(l, x)| json!({ "sample": l, "shrunk": x })).collect::<Vec<_>>(),
        "condition_number": r.condition_number(),
    });
    let cert = json!({
        "gamma_residual": shrinkage::gamma_residual(&lambdas, eps, r.gamma),
        "min_precision_eigenvalue": min_eig,
    });
    Ok((res, cert))
}

fn run_mmse(c: &RunConfig) -> Outcome {
    let moments = load_moments(c.moments.as_ref().unwrap())?;
    let mx = c.signal_dim.unwrap();
    let dim = moments.dim();
    if mx == 0 || mx >= dim {
        return Err(CliError::usage(format!("--signal-dim must lie in 1..{dim}, got {mx}")).into());
    }
    let joint = JointMoments::new(mx, dim - mx, moments).map_err(compute)?;
    let r = mmse::fw_solve(&joint, c.eps.unwrap(), c.iters.unwrap_or(200), c.tol.unwrap_or(1e-9)).map_err(compute)?;
    let res = json!({
        "objective": r.best.objective,
        "gain": mat_json(&r.estimator.gain),
        "offset": vec_json(&r.estimator.offset),
        "covariance": mat_json(&r.best.covariance),
        "best_iteration": r.best.iteration,
    });
    let cert = json!({
        "converged": r.converged,
        "gap_history": r.gaps,
        "objective_history": r.objectives,
        "max_infeasibility": r.max_infeasibility,
        "repairs": r.repairs,
        "regularization": r.regularization,
    });
    Ok((res, cert))
}

fn run_train(c: &RunConfig) -> Outcome {
    let path = c.input.as_ref().unwrap();
    let (headers, rows) = read_csv(path, "input")?;
    let label = match &c.label {
        Some(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::usage(format!("--label {name}: no such column in {}", path.display())))?,
        None => headers.len().saturating_sub(1),
    };
    if headers.len() < 2 {
        return Err(CliError::usage(format!("--input {}: need at least one feature and a label", path.display())).into());
    }
    let features: Vec<Vector> = rows
        .iter()
        .map(|r| Vector::from_iterator(r.len() - 1, r.iter().enumerate().filter(|(j, _)| *j != label).map(|(_, v)| *v)))
        .collect();
    let labels: Vec<f64> = rows.iter().map(|r| r[label]).collect();
    let mut data = Dataset::new(features, labels).map_err(|e| CliError::usage(format!("--input {}: {e}", path.display())))?;
    if c.standardize == Some(true) {
        data = data.standardized();
    }
    let loss = parse_loss(c.loss.as_ref().unwrap())?;
    let norm = parse_norm(c.norm.as_deref().unwrap_or("l2"))?;
    let eps = c.eps.unwrap();
    let mut opts = TrainOptions::new(eps, norm.clone());
    if let Some(t) = c.tol {
        opts.tol = Tolerance::new(t, t, opts.tol.max_iter);
    }
    let model = if loss.is_classification() {
        learn::dro_train_classifier(&data, loss, &opts)
    } else {
        let default = if loss == UnivariateLoss::Squared { 2.0 } else { 1.0 };
        let order = c.order.unwrap_or(default);
        if order != 1.0 && order != 2.0 {
            return Err(CliError::usage(format!("--order must be 1 or 2 for `train`, got {order}")).into());
        }
        learn::dro_train_regressor(&data, loss, order as u8, &opts)
    }
    .map_err(compute)?;
    let res = json!({
        "weights": vec_json(&model.weights),
        "objective": model.objective,
        "features": headers.iter().enumerate().filter(|(j, _)| *j != label).map(|(_, h)| h.clone()).collect::<Vec<_>>(),
    });
    let mut cert = json!({
        "gap": model.diagnostics.gap,
        "iterations": model.diagnostics.iterations,
        "flags": model.diagnostics.flags,
    });
    if loss.pieces().is_some() {
        let x = learn::dro_objective_crosscheck(&model, &data, loss, eps, &norm).map_err(compute)?;
        cert["worst_case_value"] = json!(x.worst_case);
        cert["crosscheck_diff"] = json!(x.diff);
    }
    Ok((res, cert))
}

fn run_calibrate(c: &RunConfig) -> Outcome {
    let eta = c.eta.unwrap();
    match c.method.unwrap() {
        CalibrationMethod::Empirical => {
            let order = c.order.unwrap();
            let mut model = TailModel::heuristic(c.dim.unwrap(), c.tail_alpha.unwrap_or(order + 0.5));
            if let Some(v) = c.c1 {
                model.c1 = v;
            }
            if let Some(v) = c.c2 {
                model.c2 = v;
            }
            let r = calibrate::radius_empirical(&model, c.n.unwrap(), eta, order).map_err(compute)?;
            Ok((json!({ "radius": r, "model": model }), json!({})))
        }
        CalibrationMethod::Moments => {
            let model = MomentTailModel { c: c.c.unwrap_or(MomentTailModel::default().c) };
            let r = calibrate::radius_moments(&model, c.n.unwrap(), eta).map_err(compute)?;
            Ok((json!({ "radius": r, "model": model }), json!({})))
        }
        CalibrationMethod::Coverage => {
            let d = CoverageConfig::default();
            let cfg = CoverageConfig {
                samples: c.n.unwrap_or(d.samples),
                trials: c.trials.unwrap_or(d.trials),
                eta,
                order: c.order.unwrap_or(d.order),
                tail_alpha: c.tail_alpha.unwrap_or(d.tail_alpha),
                seed: c.seed.unwrap_or(d.seed),
                ..d
            };
            let r = calibrate::hinge_coverage(&cfg).map_err(compute)?;
            let res = json!({ "radius": r.radius, "fraction": r.fraction, "covered": r.covered, "trials": r.trials });
            let cert = json!({ "true_risk": r.true_risk, "target": r.target, "meets_target": r.fraction >= r.target });
            Ok((res, cert))
        }
    }
}

/// Runs one validated configuration. Input files that cannot be read or
/// parsed are usage errors; anything failing afterwards ends up in the report.
pub fn run(config: &RunConfig) -> Result<Report, CliError> {
    let start = Instant::now();
    let outcome = match config.command() {
        CommandKind::Transport => run_transport(config),
        CommandKind::WcRisk => run_wc_risk(config),
        CommandKind::Gelbrich => run_gelbrich(config),
        CommandKind::Shrink => run_shrink(config),
        CommandKind::Mmse => run_mmse(config),
        CommandKind::Train => run_train(config),
        CommandKind::Calibrate => run_calibrate(config),
    };
    let (status, results, certificates, error) = match outcome {
        Ok((r, c)) => ("ok", r, c, None),
        Err(RunError::Usage(e)) => return Err(e),
        Err(RunError::Compute(e)) => ("error", Value::Null, Value::Null, Some(e)),
    };
    Ok(Report {
        tool: "wdro".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: config.command(),
        config: config.clone(),
        status: status.into(),
        results,
        certificates,
        error,
        timings: Timings { elapsed_ms: start.elapsed().as_secs_f64() * 1e3 },
    })
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match parse_config(argv) {
        Ok(c) => c,
        Err(CliError::Clap(e)) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
        Err(e) => {
            eprintln!("wdro: {e}");
            return EXIT_USAGE;
        }
    };
    let report = match run(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("wdro: {e}");
            return EXIT_USAGE;
        }
    };
    let text = report.to_json();
    match &config.output {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text + "\n") {
                eprintln!("wdro: --output {}: {e}", path.display());
                return EXIT_FAILURE;
            }
        }
        None => {
            use std::io::Write;
            // a closed pipe downstream is not our failure
            let _ = writeln!(std::io::stdout().lock(), "{text}");
        }
    }
    if let Some(e) = &report.error {
        eprintln!("wdro: {}: {}", e.kind, e.message);
    }
    report.exit_code()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_from_debug() {
        assert_eq!(error_kind("Numerics(NoBracket { lo: 0.0, hi: 1.0 })"), "NoBracket");
        assert_eq!(error_kind("Wc(Unsupported(\"x\"))"), "UnsupportedCombination");
        assert_eq!(error_kind("SingularBlock"), "SingularBlock");
        assert_eq!(error_kind("InvalidRadius(-1.0)"), "InvalidRadius");
    }

    #[test]
    fn norms_and_losses() {
        assert_eq!(parse_norm("p=3").unwrap(), NormSpec::P { p: 3.0 });
        assert!(parse_norm("p=0.5").is_err());
        assert_eq!(parse_loss("pinball:0.25").unwrap(), UnivariateLoss::Pinball { tau: 0.25 });
        assert!(parse_loss("huber").is_err());
    }

    #[test]
    fn missing_eps_is_usage_error() {
        let dir = std::env::temp_dir().join("wdro-cli-unit");
        std::fs::create_dir_all(&dir).unwrap();
        let f = dir.join("cov.csv");
        std::fs::write(&f, "a\n1\n").unwrap();
        let err = parse_config(["wdro", "shrink", "--input", f.to_str().unwrap()]).unwrap_err();
        assert!(err.to_string().contains("--eps is required"), "{err}");
        let ok = parse_config(["wdro", "shrink", "--input", f.to_str().unwrap(), "--eps", "0.5"]).unwrap();
        assert_eq!(ok.command, Some(CommandKind::Shrink));
        assert_eq!(ok.eps, Some(0.5));
    }
}
