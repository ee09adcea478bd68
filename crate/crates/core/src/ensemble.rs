//! Samplers for matrices with correlated entry pairs.
//!
//! Off-diagonal pairs `(X_jk, X_kj)`, `j < k`, are independent draws from a
//! [`CorrelatedPairDistribution`]; the diagonal is drawn independently from a
//! unit-variance [`DiagFamily`]. Each unordered pair (and each diagonal slot)
//! reads from its own ChaCha stream keyed by the sample seed, so a matrix is
//! a pure function of `(spec, seed)` however the work is scheduled.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use crate::seeding::StreamFactory;
use crate::spectra;

/// Tolerance for probabilities of a custom law summing to one.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-12;
/// Tolerance for the moment conditions of a custom law.
pub const MOMENT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairFamily {
    Gaussian,
    Rademacher,
    DiscreteCustom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagFamily {
    Gaussian,
    Rademacher,
}

/// One atom `(x, y)` with probability `p` of a discrete pair law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairAtom {
    pub x: f64,
    pub y: f64,
    pub p: f64,
}

/// Law of an off-diagonal pair: both marginals mean 0, variance 1, and `E[XY] = rho`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelatedPairDistribution {
    family: PairFamily,
    rho: f64,
    atoms: Vec<PairAtom>,
    cumulative: Vec<f64>,
}

impl CorrelatedPairDistribution {
    pub fn gaussian(rho: f64) -> Result<Self> {
        Self::builtin(PairFamily::Gaussian, rho)
    }

    pub fn rademacher(rho: f64) -> Result<Self> {
        Self::builtin(PairFamily::Rademacher, rho)
    }

    fn builtin(family: PairFamily, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Ok(Self {
            family,
            rho,
            atoms: Vec::new(),
            cumulative: Vec::new(),
        })
    }

    /// Builds a finite law and checks its moments. `rho` must match the cross moment of the atoms.
    pub fn discrete_custom(atoms: Vec<PairAtom>, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        if atoms.is_empty() {
            return Err(Error::InvalidSpec("discrete-custom law has no atoms".into()));
        }
        if let Some(a) = atoms.iter().find(|a| !(a.p >= 0.0) || !a.x.is_finite() || !a.y.is_finite()) {
            return Err(Error::InvalidSpec(format!("invalid atom {a:?}")));
        }
        let total: f64 = atoms.iter().map(|a| a.p).sum();
        if (total - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(Error::InvalidSpec(format!("atom probabilities sum to {total}, not 1")));
        }
        let moment = |f: &dyn Fn(&PairAtom) -> f64| atoms.iter().map(|a| a.p * f(a)).sum::<f64>();
        let checks = [
            ("E[X]", moment(&|a| a.x), 0.0),
            ("E[Y]", moment(&|a| a.y), 0.0),
            ("E[X^2]", moment(&|a| a.x * a.x), 1.0),
            ("E[Y^2]", moment(&|a| a.y * a.y), 1.0),
            ("E[XY]", moment(&|a| a.x * a.y), rho),
        ];
        for (name, got, want) in checks {
            if (got - want).abs() > MOMENT_TOLERANCE {
                return Err(Error::InvalidSpec(format!("{name} = {got}, expected {want}")));
            }
        }
        let cumulative = atoms
            .iter()
            .scan(0.0, |acc, a| {
                *acc += a.p;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            family: PairFamily::DiscreteCustom,
            rho,
            atoms,
            cumulative,
        })
    }

    pub fn family(&self) -> PairFamily {
        self.family
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn atoms(&self) -> &[PairAtom] {
        &self.atoms
    }

    /// One draw `(x, y)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        match self.family {
            PairFamily::Gaussian => {
                let x: f64 = StandardNormal.sample(rng);
                let z: f64 = StandardNormal.sample(rng);
                (x, self.rho * x + (1.0 - self.rho * self.rho).sqrt() * z)
            }
            PairFamily::Rademacher => {
                let x = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let same = rng.random_bool((1.0 + self.rho) / 2.0);
                (x, if same { x } else { -x })
            }
            PairFamily::DiscreteCustom => {
                let u: f64 = rng.random();
                let idx = self
                    .cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(self.atoms.len() - 1);
                (self.atoms[idx].x, self.atoms[idx].y)
            }
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidSpec(format!("rho = {rho} outside [-1, 1]")));
    }
    Ok(())
}

impl DiagFamily {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            DiagFamily::Gaussian => StandardNormal.sample(rng),
            DiagFamily::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// Default diagonal law for a given off-diagonal family.
    pub fn matching(family: PairFamily) -> Self {
        match family {
            PairFamily::Rademacher => DiagFamily::Rademacher,
            _ => DiagFamily::Gaussian,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ShiftKind {
    Zero,
    /// `scale·√n·I`.
    ScaledIdentity { scale: f64 },
    DenseCustom(DMatrix<f64>),
}

/// Deterministic shift `M_n` together with the constants of `‖M_n‖ ≤ K·n^Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftSpec {
    pub kind: ShiftKind,
    pub k: f64,
    pub q: f64,
}

impl Default for ShiftSpec {
    fn default() -> Self {
        Self {
            kind: ShiftKind::Zero,
            k: 1.0,
            q: 1.0,
        }
    }
}

impl ShiftSpec {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn scaled_identity(scale: f64) -> Self {
        Self {
            kind: ShiftKind::ScaledIdentity { scale },
            ..Self::default()
        }
    }

    pub fn with_bound(mut self, k: f64, q: f64) -> Self {
        self.k = k;
        self.q = q;
        self
    }

    /// `K·n^Q`.
    pub fn norm_bound(&self, n: usize) -> f64 {
        self.k * (n as f64).powf(self.q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) || !(self.q >= 0.0) || !self.k.is_finite() || !self.q.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "shift constants need K > 0 and Q >= 0, got K = {}, Q = {}",
                self.k, self.q
            )));
        }
        match &self.kind {
            ShiftKind::ScaledIdentity { scale } if !scale.is_finite() => {
                Err(Error::InvalidSpec("shift scale must be finite".into()))
            }
            ShiftKind::DenseCustom(m) if m.nrows() != m.ncols() || m.iter().any(|x| !x.is_finite()) => {
                Err(Error::InvalidSpec("custom shift must be square and finite".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            ShiftKind::Zero => "zero".into(),
            ShiftKind::ScaledIdentity { scale } => format!("{scale}*sqrt(n)*I"),
            ShiftKind::DenseCustom(m) => format!("dense-custom {}x{}", m.nrows(), m.ncols()),
        }
    }
}

/// Realizes `M_n` and checks `‖M_n‖ ≤ K·n^Q`.
pub fn build_shift<T: Real>(shift: &ShiftSpec, n: usize) -> Result<DMatrix<T>> {
    shift.validate()?;
    let bound = shift.norm_bound(n);
    let (m, norm) = match &shift.kind {
        ShiftKind::Zero => (DMatrix::zeros(n, n), 0.0),
        ShiftKind::ScaledIdentity { scale } => {
            let d = scale * (n as f64).sqrt();
            (DMatrix::identity(n, n) * lit::<T>(d), d.abs())
        }
        ShiftKind::DenseCustom(m) => {
            if m.nrows() != n {
                return Err(Error::InvalidSpec(format!(
                    "custom shift is {}x{}, ensemble dimension is {n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let norm = spectra::operator_norm(m)?;
            (m.map(lit::<T>), norm)
        }
    };
    if norm > bound {
        return Err(Error::ShiftNormViolation { norm, bound });
    }
    Ok(m)
}

/// Complete description of a random matrix law.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub n: usize,
    pub pair: CorrelatedPairDistribution,
    pub diag: DiagFamily,
    pub shift: ShiftSpec,
}

impl EnsembleSpec {
    /// Unshifted ensemble whose diagonal follows the off-diagonal family.
    pub fn new(n: usize, pair: CorrelatedPairDistribution) -> Self {
        let diag = DiagFamily::matching(pair.family());
        Self {
            n,
            pair,
            diag,
            shift: ShiftSpec::zero(),
        }
    }

    pub fn with_shift(mut self, shift: ShiftSpec) -> Self {
        self.shift = shift;
        self
    }

    pub fn with_diag(mut self, diag: DiagFamily) -> Self {
        self.diag = diag;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSpec("dimension n must be at least 1".into()));
        }
        check_rho(self.pair.rho)?;
        self.shift.validate()
    }

    pub fn describe(&self) -> String {
        let family = match self.pair.family() {
            PairFamily::Gaussian => "gaussian",
            PairFamily::Rademacher => "rademacher",
            PairFamily::DiscreteCustom => "discrete-custom",
        };
        format!("n={} family={} rho={} diag={:?}", self.n, family, self.pair.rho, self.diag)
    }
}

/// A realization `X` (shift not applied).
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSample<T: Real> {
    pub entries: DMatrix<T>,
    pub seed: u64,
    pub spec: EnsembleSpec,
}

impl<T: Real> MatrixSample<T> {
    /// `X + M_n`.
    pub fn shifted(&self) -> Result<DMatrix<T>> {
        Ok(&self.entries + build_shift::<T>(&self.spec.shift, self.spec.n)?)
    }
}

fn slot_stream(n: usize, j: usize, k: usize) -> u64 {
    (j as u64) * (n as u64) + k as u64
}

/// Draws `X` for `(spec, seed)`. Pair `{j, k}` uses stream `j·n + k` (`j ≤ k`).
pub fn sample_matrix<T: Real>(spec: &EnsembleSpec, seed: u64) -> Result<MatrixSample<T>> {
    spec.validate()?;
    let n = spec.n;
    let streams = StreamFactory::new(seed);
    let rows: Vec<(f64, Vec<(f64, f64)>)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let diag = spec.diag.sample(&mut streams.stream(slot_stream(n, j, j)));
            let pairs = (j + 1..n)
                .map(|k| spec.pair.sample(&mut streams.stream(slot_stream(n, j, k))))
                .collect();
            (diag, pairs)
        })
        .collect();
    let mut entries = DMatrix::<T>::zeros(n, n);
    for (j, (diag, pairs)) in rows.into_iter().enumerate() {
        entries[(j, j)] = lit(diag);
        for (offset, (x, y)) in pairs.into_iter().enumerate() {
            let k = j + 1 + offset;
            entries[(j, k)] = lit(x);
            entries[(k, j)] = lit(y);
        }
    }
    Ok(MatrixSample {
        entries,
        seed,
        spec: spec.clone(),
    })
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncatedMoment {
    pub cutoff: f64,
    /// Largest of `E[X²·1{|X| > cutoff}]` over the pair coordinates and the diagonal law.
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentReport {
    pub n_samples: usize,
    pub mean_x: Estimate,
    pub mean_y: Estimate,
    pub var_x: Estimate,
    pub var_y: Estimate,
    pub cross: Estimate,
    pub diag_mean: Estimate,
    pub diag_var: Estimate,
    pub truncated_second_moments: Vec<TruncatedMoment>,
}

pub const TRUNCATION_CUTOFFS: [f64; 3] = [2.0, 4.0, 8.0];

fn mean_estimate(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Estimate {
        value: mean,
        std_err: (var / n).sqrt(),
    }
}

fn truncated(values: &[f64], cutoff: f64) -> f64 {
    values
        .iter()
        .filter(|v| v.abs() > cutoff)
        .map(|v| v * v)
        .sum::<f64>()
        / values.len() as f64
}

/// Empirical check of the moment and uniform-integrability conditions on the samplers.
pub fn empirical_moment_check(spec: &EnsembleSpec, seed: u64, n_samples: usize) -> Result<MomentReport> {
    spec.validate()?;
    if n_samples < 100 {
        return Err(Error::InsufficientData {
            got: n_samples,
            need: 100,
        });
    }
    let streams = StreamFactory::new(seed);
    let mut pair_rng = streams.stream(0);
    let mut diag_rng = streams.stream(1);
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..n_samples).map(|_| spec.pair.sample(&mut pair_rng)).unzip();
    let ds: Vec<f64> = (0..n_samples).map(|_| spec.diag.sample(&mut diag_rng)).collect();
    let sq = |v: &[f64]| v.iter().map(|x| x * x).collect::<Vec<_>>();
    let prod: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| x * y).collect();

    Ok(MomentReport {
        n_samples,
        mean_x: mean_estimate(&xs),
        mean_y: mean_estimate(&ys),
        var_x: mean_estimate(&sq(&xs)),
        var_y: mean_estimate(&sq(&ys)),
        cross: mean_estimate(&prod),
        diag_mean: mean_estimate(&ds),
        diag_var: mean_estimate(&sq(&ds)),
        truncated_second_moments: TRUNCATION_CUTOFFS
            .iter()
            .map(|&cutoff| TruncatedMoment {
                cutoff,
                value: truncated(&xs, cutoff)
                    .max(truncated(&ys, cutoff))
                    .max(truncated(&ds, cutoff)),
            })
            .collect(),
    })
}

/// Serializable `[ensemble]` section of a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n: usize,
    pub family: PairFamily,
    #[serde(default)]
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diag_family: Option<DiagFamily>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<PairAtom>,
    #[serde(default)]
    pub shift: ShiftConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftKindTag {
    Zero,
    ScaledIdentity,
    DenseCustom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftConfig {
    pub kind: ShiftKindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(rename = "K", default = "default_k")]
    pub k: f64,
    #[serde(rename = "Q", default = "default_q")]
    pub q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

fn default_k() -> f64 {
    1.0
}

fn default_q() -> f64 {
    1.0
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self {
            kind: ShiftKindTag::Zero,
            scale: None,
            k: default_k(),
            q: default_q(),
            matrix: None,
        }
    }
}

impl TryFrom<&EnsembleConfig> for EnsembleSpec {
    type Error = Error;

    fn try_from(cfg: &EnsembleConfig) -> Result<Self> {
        let pair = match cfg.family {
            PairFamily::Gaussian => CorrelatedPairDistribution::gaussian(cfg.rho)?,
            PairFamily::Rademacher => CorrelatedPairDistribution::rademacher(cfg.rho)?,
            PairFamily::DiscreteCustom => CorrelatedPairDistribution::discrete_custom(cfg.atoms.clone(), cfg.rho)?,
        };
        let kind = match cfg.shift.kind {
            ShiftKindTag::Zero => ShiftKind::Zero,
            ShiftKindTag::ScaledIdentity => ShiftKind::ScaledIdentity {
                scale: cfg
                    .shift
                    .scale
                    .ok_or_else(|| Error::InvalidSpec("scaled-identity shift needs shift.scale".into()))?,
            },
            ShiftKindTag::DenseCustom => {
                let rows = cfg
                    .shift
                    .matrix
                    .as_ref()
                    .ok_or_else(|| Error::InvalidSpec("dense-custom shift needs shift.matrix".into()))?;
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidSpec("shift.matrix must be square".into()));
                }
                ShiftKind::DenseCustom(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
        };
        let spec = EnsembleSpec {
            n: cfg.n,
            diag: cfg.diag_family.unwrap_or(DiagFamily::matching(cfg.family)),
            pair,
            shift: ShiftSpec {
                kind,
                k: cfg.shift.k,
                q: cfg.shift.q,
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<&EnsembleSpec> for EnsembleConfig {
    fn from(spec: &EnsembleSpec) -> Self {
        let (kind, scale, matrix) = match &spec.shift.kind {
            ShiftKind::Zero => (ShiftKindTag::Zero, None, None),
            ShiftKind::ScaledIdentity { scale } => (ShiftKindTag::ScaledIdentity, Some(*scale), None),
            ShiftKind::DenseCustom(m) => (
                ShiftKindTag::DenseCustom,
                None,
                Some(m.row_iter().map(|r| r.iter().copied().collect()).collect()),
            ),
        };
        EnsembleConfig {
            n: spec.n,
            family: spec.pair.family(),
            rho: spec.pair.rho(),
            diag_family: Some(spec.diag),
            atoms: spec.pair.atoms().to_vec(),
            shift: ShiftConfig {
                kind,
                scale,
                k: spec.shift.k,
                q: spec.shift.q,
                matrix,
            },
        }
    }
}
