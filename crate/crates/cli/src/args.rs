//! Flag definitions. Every field is optional so that unset flags can be
//! filled from a config file first and from the built-in defaults last; the
//! serde names double as config-file keys.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "heston-degen", version, about = "Degenerate Heston PDE toolkit: boundary classification, non-uniqueness witnesses and solvers")]
pub struct Cli {
    /// JSON file with the same keys as the subcommand's flags; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// No progress text on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Feller-type inequality for the chosen operator form.
    Feller(FellerArgs),
    /// Fichera classification of the truncated domain's faces.
    Fichera(FicheraArgs),
    /// Evaluate or verify the closed-form zero-data solutions.
    #[command(subcommand)]
    Witness(WitnessCmd),
    /// Map points or a sampled witness between coordinate frames.
    Transform(TransformArgs),
    /// One-dimensional degenerate solver and refinement studies.
    Solve1d(Solve1dArgs),
    /// ADI solver for the two-factor pricing equation.
    Solve2d(Solve2dArgs),
    /// Semi-analytic call and put prices.
    Price(PriceArgs),
    /// Growth-class heuristics on sampled functions.
    Growth(GrowthArgs),
    /// Scripted end-to-end runs.
    #[command(subcommand)]
    Demo(DemoCmd),
}

#[derive(Subcommand, Debug)]
pub enum WitnessCmd {
    Eval(WitnessEvalArgs),
    Verify(WitnessVerifyArgs),
}

#[derive(Subcommand, Debug)]
pub enum DemoCmd {
    /// Standard price V1, the alternative V2 = V1 + λΠ, residuals and verdicts.
    Nonuniqueness(DemoArgs),
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ModelArgs {
    /// full_heston, special_model or log_spot.
    #[arg(long)]
    pub form: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub q: Option<f64>,
    /// Market price of volatility risk.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub v0: Option<f64>,
    /// Maturity.
    #[arg(long = "T", allow_negative_numbers = true)]
    #[serde(rename = "T")]
    pub maturity: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FellerArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FicheraArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Lower end of the spot (or log-spot) range.
    #[arg(long, allow_negative_numbers = true)]
    pub lo: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub hi: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub v_max: Option<f64>,
    /// Sample points per face.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub tol_deg: Option<f64>,
    #[arg(long)]
    pub tol_h: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct WitnessEvalArgs {
    /// pi_heston, pi_cev2 or pi_cev32.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<f64>,
    #[arg(long = "T", allow_negative_numbers = true)]
    #[serde(rename = "T")]
    pub maturity: Option<f64>,
    /// v for pi_heston, y otherwise.
    #[arg(long, allow_negative_numbers = true)]
    pub space: Option<f64>,
    /// t for pi_heston and pi_cev2, τ for pi_cev32.
    #[arg(long, allow_negative_numbers = true)]
    pub time: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct WitnessVerifyArgs {
    /// A witness name or `all`.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<f64>,
    #[arg(long = "T", allow_negative_numbers = true)]
    #[serde(rename = "T")]
    pub maturity: Option<f64>,
    /// Random interior points per witness.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TransformArgs {
    /// spot_var, log_spot_var, var_time, feller_x, inv_y or cev:<alpha>:<a>.
    #[arg(long)]
    pub from: Option<String>,
    #[arg(long)]
    pub to: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<f64>,
    #[arg(long = "T", allow_negative_numbers = true)]
    #[serde(rename = "T")]
    pub maturity: Option<f64>,
    /// Point (space…, time) to map, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub point: Option<Vec<f64>>,
    /// Witness to sample in its own frame (which must be `--from`) and push forward.
    #[arg(long)]
    pub witness: Option<String>,
    /// Source grid `min:max:n[:stretch]`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub times: Option<Vec<f64>>,
    /// CSV path for the pushed-forward samples.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Solve1dArgs {
    /// pi_add, feller or cev.
    #[arg(long)]
    pub equation: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<f64>,
    #[arg(long = "T", allow_negative_numbers = true)]
    #[serde(rename = "T")]
    pub maturity: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    /// generator or divergence.
    #[arg(long)]
    pub feller_form: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub horizon: Option<f64>,
    /// `min:max:n[:stretch]`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub rannacher: Option<usize>,
    /// zero, constant:<c> or exp:<k> (e^{−kz}).
    #[arg(long)]
    pub terminal: Option<String>,
    /// zero_second, neumann or zero.
    #[arg(long)]
    pub farfield: Option<String>,
    /// Refinement study against constant:<c> or witness:<kind> instead of a single solve.
    #[arg(long)]
    pub study: Option<String>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Solve2dArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// call or put.
    #[arg(long)]
    pub payoff: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub strike: Option<f64>,
    /// `nx,nv,nt`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub v_stretch: Option<f64>,
    /// douglas or hundsdorfer_verwer.
    #[arg(long)]
    pub scheme: Option<String>,
    /// first_order or second_order.
    #[arg(long)]
    pub trace: Option<String>,
    #[arg(long)]
    pub theta_scheme: Option<f64>,
    #[arg(long)]
    pub rannacher: Option<usize>,
    /// Spot at which the value is reported.
    #[arg(long, allow_negative_numbers = true)]
    pub spot: Option<f64>,
    /// Variance at which the value is reported (defaults to v0).
    #[arg(long, allow_negative_numbers = true)]
    pub var: Option<f64>,
    /// ends or all.
    #[arg(long)]
    pub slices: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub sequential: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PriceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub spot: Option<f64>,
    /// One or more strikes, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub strike: Option<Vec<f64>>,
    /// Cutoff doublings of the Fourier integral (panel 16).
    #[arg(long)]
    pub max_doublings: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub sequential: Option<bool>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GrowthArgs {
    /// sublinear, singularity, tacklind or uniqueness.
    #[arg(long)]
    pub check: Option<String>,
    /// CSV of `coord,value` rows.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Witness sampled along `--range` at `--time` instead of a file; for
    /// `uniqueness`, the candidate (`zero` or `pi_heston`).
    #[arg(long)]
    pub witness: Option<String>,
    /// Log-spaced `lo:hi:n`.
    #[arg(long)]
    pub range: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub time: Option<f64>,
    /// Täcklind function: default, one, linear, square or slog.
    #[arg(long)]
    pub h: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct DemoArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub v0: Option<f64>,
    #[arg(long = "T", allow_negative_numbers = true)]
    #[serde(rename = "T")]
    pub maturity: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub strike: Option<f64>,
    /// `nx,nv,nt`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub v_stretch: Option<f64>,
    /// douglas or hundsdorfer_verwer.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Multiplier λ of the witness.
    #[arg(long, allow_negative_numbers = true)]
    pub scale: Option<f64>,
    /// Residual window `x_lo,x_hi,v_lo,v_hi,t_lo,t_hi`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub window: Option<Vec<f64>>,
    /// Directory for v1.csv and v2.csv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Write every time level instead of t = 0 only.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub all_slices: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub sequential: Option<bool>,
}
