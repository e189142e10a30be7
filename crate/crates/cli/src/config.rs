//! Command-line arguments. The same structures deserialize from a JSON
//! configuration file whose keys mirror the long flag names, with a
//! `"command"` key selecting the subcommand.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "superres", version, args_conflicts_with_subcommands = true, about = "Precision limits for resolving two incoherent point sources")]
pub struct Cli {
    /// Run the command described by a JSON configuration file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Separation precision of one scene under one model (JSON).
    Precision(PrecisionArgs),
    /// Parameter scans behind the precision figures (CSV).
    Scan(ScanArgs),
    /// Limiting ratio of a small-separation regime cell (JSON).
    Regime(RegimeArgs),
    /// Grid-oracle comparison with the moment-based Fisher matrices (JSON).
    OracleCheck(OracleArgs),
    /// Monte-Carlo maximum-likelihood trials under direct imaging (CSV).
    Simulate(SimulateArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PsfKindArg {
    #[default]
    Gaussian,
    Grid,
    Perturbed,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Units {
    /// Separations are lengths in the PSF's units.
    Length,
    /// Separations are multiples of the mean width σ̄.
    #[default]
    SigmaBar,
}

/// PSF selection shared by the scene-based commands.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct PsfArgs {
    /// Kind of the first PSF.
    #[arg(long, value_enum, default_value_t = PsfKindArg::Gaussian)]
    pub psf: PsfKindArg,
    /// Width of a Gaussian first PSF.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Sampled amplitude file for a grid first PSF.
    #[arg(long, value_name = "FILE")]
    pub psf_file: Option<PathBuf>,
    /// Kind of the second PSF; identical to the first when omitted.
    #[arg(long, value_enum)]
    pub psf2: Option<PsfKindArg>,
    /// Width of a Gaussian second PSF.
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Sampled amplitude file for a grid second PSF.
    #[arg(long, value_name = "FILE")]
    pub psf2_file: Option<PathBuf>,
    /// Rotation angle of a perturbed second PSF away from the first.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Hermite–Gauss mode of the perturbation (2 or 4).
    #[arg(long)]
    pub mode: Option<u32>,
}

/// Scene parameters.
#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SceneArgs {
    /// Separation of the two sources.
    #[arg(long)]
    pub d: f64,
    /// Imbalance (N2−N1)/(N1+N2).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    #[serde(default)]
    pub eps: f64,
    /// Centroid of the two sources.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    #[serde(default)]
    pub xbar: f64,
    /// Total photon number.
    #[arg(long, default_value_t = 1.0)]
    #[serde(default = "one")]
    pub ntot: f64,
    /// Unit of --d.
    #[arg(long, value_enum, default_value_t = Units::SigmaBar)]
    #[serde(default)]
    pub units: Units,
}

fn one() -> f64 {
    1.0
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelArg {
    #[value(name = "direct")]
    #[serde(rename = "direct")]
    Direct,
    #[value(name = "known-N")]
    #[serde(rename = "known-N")]
    KnownN,
    #[value(name = "unknown-identical")]
    #[serde(rename = "unknown-identical")]
    UnknownIdentical,
    #[value(name = "unknown-general")]
    #[serde(rename = "unknown-general")]
    UnknownGeneral,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PrecisionArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub psf: PsfArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub scene: SceneArgs,
    /// Estimation model.
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// Write the JSON here instead of standard output.
    #[arg(long, value_name = "FILE")]
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Figure {
    /// Ratio against ε for equal Gaussian widths, one curve per d/σ.
    Fig2,
    /// Zero-separation ratio against ε, one curve per η.
    Fig3a,
    /// Ratio against d̃ at fixed η, one curve per ε.
    Fig3b,
    /// Ratio over the (η, d̃) plane, one surface per ε.
    Fig4,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ScanArgs {
    /// Which scan to run.
    #[arg(long, value_enum)]
    pub figure: Figure,
    /// Start of the swept axis.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default)]
    pub min: Option<f64>,
    /// End of the swept axis (inclusive).
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default)]
    pub max: Option<f64>,
    /// Step of the swept axis.
    #[arg(long)]
    #[serde(default)]
    pub step: Option<f64>,
    /// Start of the second axis (fig4: d̃).
    #[arg(long)]
    #[serde(default)]
    pub min2: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub max2: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub step2: Option<f64>,
    /// Comma-separated values of the curve parameter.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    /// Width asymmetry for fig3b.
    #[arg(long)]
    #[serde(default)]
    pub eta: Option<f64>,
    #[arg(long, value_name = "FILE")]
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableArg {
    General,
    Gaussian,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    /// Gaussians of widths σ̄(1∓η).
    GaussianWidths,
    /// A Gaussian and its Hermite–Gauss perturbation.
    Perturbed,
    /// Two identical Gaussians.
    Identical,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RegimeArgs {
    #[arg(long, value_enum)]
    pub table: TableArg,
    #[arg(long)]
    #[serde(default)]
    pub h: Option<u32>,
    #[arg(long)]
    #[serde(default)]
    pub f: Option<u32>,
    #[arg(long)]
    #[serde(default)]
    pub e: Option<u32>,
    #[arg(long)]
    #[serde(default)]
    pub s: Option<u32>,
    #[arg(long)]
    #[serde(default)]
    pub t: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default)]
    pub a: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub b: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default)]
    pub c: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default)]
    pub y: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default)]
    pub z: Option<f64>,
    /// Confirm the limit numerically along a separation schedule.
    #[arg(long)]
    #[serde(default)]
    pub verify: bool,
    /// PSF family used for the verification.
    #[arg(long, value_enum)]
    #[serde(default)]
    pub family: Option<FamilyArg>,
    #[arg(long, value_name = "FILE")]
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct OracleArgs {
    /// Width of the first Gaussian of a single custom scene.
    #[arg(long)]
    pub sigma1: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub eps: Option<f64>,
    /// Grid spacing; defaults to a tenth of the narrower width.
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitArg {
    /// Only d is estimated.
    D,
    /// X̄ and d are estimated, ε is known.
    XbarD,
    /// X̄, d and ε are estimated.
    XbarDEps,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub psf: PsfArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub scene: SceneArgs,
    /// Which parameters the fit estimates.
    #[arg(long, value_enum, default_value_t = FitArg::XbarD)]
    #[serde(default = "default_fit")]
    pub fit: FitArg,
    /// Photons per trial.
    #[arg(long)]
    pub photons: usize,
    /// Number of trials.
    #[arg(long)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
    /// Start separation of the fits; the true value when omitted.
    #[arg(long)]
    #[serde(default)]
    pub start_d: Option<f64>,
    /// Allow runs with more than 1e9 photons in total.
    #[arg(long)]
    #[serde(default)]
    pub force: bool,
    /// Per-trial CSV destination; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Also write the JSON summary here.
    #[arg(long, value_name = "FILE")]
    #[serde(default)]
    pub summary: Option<PathBuf>,
}

fn default_fit() -> FitArg {
    FitArg::XbarD
}
