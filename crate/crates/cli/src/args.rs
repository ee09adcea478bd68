use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use elliptic_rmt::ensemble::{DiagFamily, PairFamily};

#[derive(Parser, Debug)]
#[command(
    name = "elliptic-rmt",
    version,
    about = "Experiments on random matrices with correlated entry pairs",
    long_about = "Experiments on random matrices with correlated entry pairs.\n\n\
        Every run is seeded: --seed, then the config file, then ELLIPTIC_RMT_SEED, then the built-in default. \
        Each subcommand prints a one-line JSON summary on stdout.\n\n\
        Exit status: 0 on success, 1 on usage or configuration errors, 2 on numerical failure."
)]
pub struct Cli {
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Root seed, decimal or 0x-prefixed hexadecimal.
    #[arg(long, global = true, value_parser = parse_seed)]
    pub seed: Option<u64>,

    /// Worker thread cap. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw one matrix X with i.i.d. correlated pairs (X_jk, X_kj).
    ///
    /// Anchor: the correlated-pair model and its moment conditions.
    Sample(SampleArgs),
    /// Eigenvalues of X/sqrt(n), or singular values of X/sqrt(n) - zI.
    ///
    /// Anchor: empirical spectral measures behind the elliptic law.
    Spectrum(SpectrumArgs),
    /// Compare a spectrum with the elliptic law: fractions inside the ellipse and marginal KS distances.
    ///
    /// Anchor: elliptic law theorem (uniform law on the ellipse with semi-axes 1+rho, 1-rho).
    EllipticCheck(EllipticArgs),
    /// Monte Carlo tail of the least singular value s_n(X + M_n) at threshold n^-B.
    ///
    /// Anchor: least singular value tail bound for shifted matrices.
    SnTail(SnTailArgs),
    /// Logarithmic potential at z through eigenvalues and through singular values.
    ///
    /// Anchor: log-determinant identity for the logarithmic potential.
    Logpot(LogpotArgs),
    /// Empirical Levy concentration function of a weighted sum, with the Petrov-type bound.
    ///
    /// Anchor: concentration function of sums of independent variables.
    Concentration(ConcentrationArgs),
    /// Sparse / compressible / incompressible classification and spread set of a unit vector.
    ///
    /// Anchor: compressible and incompressible vectors; spread set lemma.
    Geometry(GeometryArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Rademacher,
    DiscreteCustom,
}

impl From<FamilyArg> for PairFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gaussian => PairFamily::Gaussian,
            FamilyArg::Rademacher => PairFamily::Rademacher,
            FamilyArg::DiscreteCustom => PairFamily::DiscreteCustom,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DiagArg {
    Gaussian,
    Rademacher,
}

impl From<DiagArg> for DiagFamily {
    fn from(f: DiagArg) -> Self {
        match f {
            DiagArg::Gaussian => DiagFamily::Gaussian,
            DiagArg::Rademacher => DiagFamily::Rademacher,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    Eigen,
    Singular,
}

#[derive(Args, Debug, Clone, Default)]
pub struct EnsembleArgs {
    /// Matrix dimension.
    #[arg(long)]
    pub n: Option<usize>,
    /// Law of the off-diagonal pairs.
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Correlation E[X_jk X_kj].
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Law of the diagonal entries.
    #[arg(long, value_enum)]
    pub diag_family: Option<DiagArg>,
    /// Deterministic shift M_n = scale*sqrt(n)*I.
    #[arg(long, allow_hyphen_values = true)]
    pub shift_scale: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct OutputArgs {
    /// Output file.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Output file format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    /// Eigenvalues or shifted singular values.
    #[arg(long, value_enum)]
    pub kind: Option<SpectrumKind>,
    /// Real part of z for singular values.
    #[arg(long, allow_hyphen_values = true)]
    pub z_re: Option<f64>,
    /// Imaginary part of z for singular values.
    #[arg(long, allow_hyphen_values = true)]
    pub z_im: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct EllipticArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    /// Read eigenvalues from a `re,im` CSV instead of sampling.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Ellipse dilation for `fraction_inside`.
    #[arg(long)]
    pub dilation: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SnTailArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    /// Number of independent matrices.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Threshold exponent: count s_n <= n^-B.
    #[arg(long = "B", value_name = "B")]
    pub b: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct LogpotArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub z_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub z_im: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct ConcentrationArgs {
    /// Law of the summands X_i (only the first coordinate of each pair is used).
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Number of summands; weights are 1/sqrt(terms).
    #[arg(long)]
    pub terms: Option<usize>,
    /// Number of draws of the sum.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Window half-width.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct GeometryArgs {
    /// Vector file, one coordinate per line; normalized before use.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Dimension of a random vector when no input is given.
    #[arg(long)]
    pub n: Option<usize>,
    /// Support size of the random vector (default: full).
    #[arg(long)]
    pub support: Option<usize>,
    /// Sparsity level delta.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Compressibility radius r.
    #[arg(long)]
    pub r: Option<f64>,
    /// Spread-set parameter tau (defaults to r).
    #[arg(long)]
    pub tau: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn parse_seed(text: &str) -> Result<u64, String> {
    let t = text.trim().replace('_', "");
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse(),
    };
    parsed.map_err(|_| format!("`{text}` is not a 64-bit unsigned seed"))
}
