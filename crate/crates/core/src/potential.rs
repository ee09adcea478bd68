//! Logarithmic potentials of the eigenvalue ESD, their singular-value form
//! `U(z) = −(1/n) ln|det(X/√n − z)| = −∫ ln x ν_n(dx)`, moment diagnostics,
//! and the Monte Carlo tail experiments for `s_n` and the operator norm.

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::{build_shift, sample_matrix, EnsembleSpec};
use crate::error::{Error, Result};
use crate::scalar::{lit, modulus, to_f64, Real};
use crate::seeding::derive_seed;
use crate::spectra::{eigenvalues, least_singular_value, operator_norm, shifted_singular_esd, EigenSpectrum, SingularSpectrum};

/// Distance below which `z` counts as sitting on an eigenvalue.
pub const POLE_DISTANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogPotentialResult<T: Real> {
    pub z_re: T,
    pub z_im: T,
    pub u_eigs: T,
    pub u_svals: T,
    pub n: usize,
}

impl<T: Real> LogPotentialResult<T> {
    pub fn z(&self) -> Complex<T> {
        Complex::new(self.z_re, self.z_im)
    }

    pub fn discrepancy(&self) -> T {
        (self.u_eigs - self.u_svals).abs()
    }
}

/// `−(1/n) Σ ln|λ_i − z|`.
pub fn log_potential_eigs<T: Real>(spectrum: &EigenSpectrum<T>, z: Complex<T>) -> Result<T> {
    let mut total = T::zero();
    for l in &spectrum.values {
        let d = modulus(*l - z);
        if d <= lit(POLE_DISTANCE) {
            return Err(Error::Pole(format!("z = {z} lies on the eigenvalue {l}")));
        }
        total += d.ln();
    }
    Ok(-total / lit::<T>(spectrum.values.len() as f64))
}

/// `−(1/n) Σ ln s_i` at the spectrum's stored shift.
pub fn log_potential_svals<T: Real>(esd: &SingularSpectrum<T>) -> Result<T> {
    let mut total = T::zero();
    for s in &esd.values {
        if *s <= T::zero() {
            return Err(Error::Pole(format!("zero singular value at z = {}", esd.shift_z)));
        }
        total += s.ln();
    }
    Ok(-total / lit::<T>(esd.values.len() as f64))
}

/// Both routes to `U(z)` for the ESD of `matrix/√n`.
pub fn log_potential<T: Real>(matrix: &DMatrix<T>, z: Complex<T>) -> Result<LogPotentialResult<T>> {
    let spectrum = eigenvalues(matrix)?;
    let esd = shifted_singular_esd(matrix, z)?;
    Ok(LogPotentialResult {
        z_re: z.re,
        z_im: z.im,
        u_eigs: log_potential_eigs(&spectrum, z)?,
        u_svals: log_potential_svals(&esd)?,
        n: spectrum.n,
    })
}

/// `(∫ x^p ν_n(dx), ∫ x^{−q} ν_n(dx))`.
pub fn moment_diagnostics<T: Real>(esd: &SingularSpectrum<T>, p: T, q: T) -> Result<(T, T)> {
    if !(p > T::zero()) || !(q > T::zero()) {
        return Err(Error::InvalidSpec(format!("moment orders must be positive, got p = {p}, q = {q}")));
    }
    if esd.values.iter().any(|s| *s <= T::zero()) {
        return Err(Error::Pole("negative moment of a spectrum containing zero".into()));
    }
    let n = lit::<T>(esd.values.len() as f64);
    let positive = esd.values.iter().fold(T::zero(), |a, s| a + s.powf(p)) / n;
    let negative = esd.values.iter().fold(T::zero(), |a, s| a + s.powf(-q)) / n;
    Ok((positive, negative))
}

/// Indices `i ∈ [⌈n^{1−γ}⌉, n−1]` with `s_{n−i} < c·i/n`.
pub fn large_sv_profile_check<T: Real>(s: &SingularSpectrum<T>, c: T, gamma: T) -> Vec<usize> {
    let n = s.values.len();
    let nf = lit::<T>(n as f64);
    let start = to_f64(nf.powf(T::one() - gamma).ceil()) as usize;
    (start..n)
        .filter(|&i| s.values[n - 1 - i] < c * lit::<T>(i as f64) / nf)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub q01: f64,
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
    pub max: f64,
}

impl Quantiles {
    /// Nearest-rank quantiles. `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |p: f64| {
            let rank = (p * v.len() as f64).ceil() as usize;
            v[rank.clamp(1, v.len()) - 1]
        };
        Some(Self {
            min: v[0],
            q01: at(0.01),
            q10: at(0.10),
            median: at(0.5),
            q90: at(0.9),
            max: v[v.len() - 1],
        })
    }
}

/// Outcome of [`min_sv_tail_experiment`].
///
/// `empirical_prob` is `hits / completed`; failed trials are listed and
/// excluded from both counts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailExperimentReport {
    pub schema_version: u32,
    pub n: usize,
    pub trials: usize,
    pub threshold_exponent: f64,
    pub threshold: f64,
    pub completed: usize,
    pub hits: usize,
    pub empirical_prob: f64,
    pub ensemble: String,
    pub shift: String,
    pub root_seed: u64,
    pub quantiles: Option<Quantiles>,
    pub failures: Vec<TrialFailure>,
}

/// Runs `trial` for every index in parallel and collects results in index order.
fn run_trials<F>(trials: usize, root_seed: u64, trial: F) -> (Vec<f64>, Vec<TrialFailure>)
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    let outcomes: Vec<(usize, u64, Result<f64>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(root_seed, t as u64);
            (t, seed, trial(seed))
        })
        .collect();
    let mut values = Vec::with_capacity(trials);
    let mut failures = Vec::new();
    for (t, seed, outcome) in outcomes {
        match outcome {
            Ok(v) => values.push(v),
            Err(e) => failures.push(TrialFailure {
                trial: t,
                seed,
                message: e.with_seed(seed).to_string(),
            }),
        }
    }
    (values, failures)
}

/// Frequency of `{s_n(X + M_n) ≤ n^{−B}}` over independent draws.
pub fn min_sv_tail_experiment(spec: &EnsembleSpec, trials: usize, b: f64, root_seed: u64) -> Result<TailExperimentReport> {
    spec.validate()?;
    if trials == 0 {
        return Err(Error::InvalidSpec("at least one trial required".into()));
    }
    if !(b >= 0.0) || !b.is_finite() {
        return Err(Error::InvalidSpec(format!("threshold exponent must be non-negative, got {b}")));
    }
    let shift = build_shift::<f64>(&spec.shift, spec.n)?;
    let threshold = (spec.n as f64).powf(-b);
    let (values, failures) = run_trials(trials, root_seed, |seed| {
        let x = sample_matrix::<f64>(spec, seed)?;
        least_singular_value(&x.entries, &shift)
    });
    let hits = values.iter().filter(|&&s| s <= threshold).count();
    let completed = values.len();
    Ok(TailExperimentReport {
        schema_version: 1,
        n: spec.n,
        trials,
        threshold_exponent: b,
        threshold,
        completed,
        hits,
        empirical_prob: if completed == 0 { 0.0 } else { hits as f64 / completed as f64 },
        ensemble: spec.describe(),
        shift: spec.shift.describe(),
        root_seed,
        quantiles: Quantiles::of(&values),
        failures,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormTailReport {
    pub schema_version: u32,
    pub n: usize,
    pub trials: usize,
    pub gamma: f64,
    pub threshold: f64,
    pub completed: usize,
    pub hits: usize,
    pub empirical_prob: f64,
    pub ensemble: String,
    pub shift: String,
    pub root_seed: u64,
    pub quantiles: Option<Quantiles>,
    pub failures: Vec<TrialFailure>,
}

/// Frequency of `{‖X + M_n‖ > n^γ}`; requires `γ ≥ max(Q, 1) + 1/2`.
pub fn norm_tail_experiment(spec: &EnsembleSpec, trials: usize, gamma: f64, root_seed: u64) -> Result<NormTailReport> {
    spec.validate()?;
    if trials == 0 {
        return Err(Error::InvalidSpec("at least one trial required".into()));
    }
    let floor = spec.shift.q.max(1.0) + 0.5;
    if !(gamma >= floor) {
        return Err(Error::InvalidSpec(format!("gamma = {gamma} below max(Q, 1) + 1/2 = {floor}")));
    }
    let shift = build_shift::<f64>(&spec.shift, spec.n)?;
    let threshold = (spec.n as f64).powf(gamma);
    let (values, failures) = run_trials(trials, root_seed, |seed| {
        let x = sample_matrix::<f64>(spec, seed)?;
        operator_norm(&(&x.entries + &shift))
    });
    let hits = values.iter().filter(|&&v| v > threshold).count();
    let completed = values.len();
    Ok(NormTailReport {
        schema_version: 1,
        n: spec.n,
        trials,
        gamma,
        threshold,
        completed,
        hits,
        empirical_prob: if completed == 0 { 0.0 } else { hits as f64 / completed as f64 },
        ensemble: spec.describe(),
        shift: spec.shift.describe(),
        root_seed,
        quantiles: Quantiles::of(&values),
        failures,
    })
}
