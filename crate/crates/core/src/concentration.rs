//! Lévy concentration function `Q(S, λ) = sup_a P(|S − a| ≤ λ)` and the
//! small-ball machinery built on it: a Petrov-type bound, the small-ball
//! bound for incompressible weights, tensorization, and the decoupling
//! inequality `P(E)² ≤ P(E(X,Y) ∩ E(X',Y))`.

use num_traits::{FromPrimitive, Num, Signed};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::CorrelatedPairDistribution;
use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};
use crate::seeding::{derive_seed, stream_rng, StreamFactory};

/// Fewest samples accepted by [`estimate_concentration`].
pub const MIN_SAMPLES: usize = 1000;

/// Largest product space enumerated by [`decoupling_check`].
pub const ENUMERATION_LIMIT: u128 = 1 << 16;

/// Number of standard errors used for every statistical allowance.
pub const SIGMA_BAND: f64 = 3.0;

/// `(√2 − 1)/2`.
pub fn alpha0<T: Real>() -> T {
    (lit::<T>(2.0).sqrt() - T::one()) / lit(2.0)
}

/// Binomial standard error `√(p(1−p)/n)`.
pub fn binomial_std_err(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConcentrationEstimate<T: Real> {
    pub lambda: T,
    pub q_hat: T,
    pub n_samples: usize,
}

impl<T: Real> ConcentrationEstimate<T> {
    pub fn std_err(&self) -> f64 {
        binomial_std_err(to_f64(self.q_hat), self.n_samples)
    }
}

/// Empirical concentration function on samples that are already sorted.
fn sorted_window_max<T: Real>(sorted: &[T], lambda: T) -> usize {
    let width = lambda + lambda;
    let mut best = 0;
    let mut hi = 0;
    for lo in 0..sorted.len() {
        if hi < lo {
            hi = lo;
        }
        let right = sorted[lo] + width;
        while hi < sorted.len() && sorted[hi] <= right {
            hi += 1;
        }
        best = best.max(hi - lo);
    }
    best
}

fn sorted_copy<T: Real>(samples: &[T]) -> Result<Vec<T>> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            got: samples.len(),
            need: MIN_SAMPLES,
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidSpec("non-finite sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(sorted)
}

fn check_lambda<T: Real>(lambda: T) -> Result<()> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidSpec(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

/// `max_a #{i : |s_i − a| ≤ λ} / N`, computed exactly: the optimal window
/// `[a − λ, a + λ]` can always be slid right until its left end hits a sample.
pub fn estimate_concentration<T: Real>(samples: &[T], lambda: T) -> Result<ConcentrationEstimate<T>> {
    check_lambda(lambda)?;
    let sorted = sorted_copy(samples)?;
    let count = sorted_window_max(&sorted, lambda);
    Ok(ConcentrationEstimate {
        lambda,
        q_hat: lit::<T>(count as f64) / lit::<T>(sorted.len() as f64),
        n_samples: sorted.len(),
    })
}

/// [`estimate_concentration`] over a grid of window half-widths, sorting once.
pub fn concentration_profile<T: Real>(samples: &[T], lambdas: &[T]) -> Result<Vec<ConcentrationEstimate<T>>> {
    let sorted = sorted_copy(samples)?;
    let n = lit::<T>(sorted.len() as f64);
    lambdas
        .iter()
        .map(|&lambda| {
            check_lambda(lambda)?;
            Ok(ConcentrationEstimate {
                lambda,
                q_hat: lit::<T>(sorted_window_max(&sorted, lambda) as f64) / n,
                n_samples: sorted.len(),
            })
        })
        .collect()
}

/// `√λ / (2σ² − 8 Σ E[X_j² 1{|X_j| ≥ λ/2}])^{1/2}` with `σ² = Σ Var X_j`.
///
/// `Ok(None)` when the bracket is not positive, where the bound says nothing.
pub fn petrov_bound<T: Real>(variances: &[T], truncated_moments: &[T], lambda: T) -> Result<Option<T>> {
    check_lambda(lambda)?;
    if variances.len() != truncated_moments.len() {
        return Err(Error::InvalidSpec(format!(
            "{} variances but {} truncated moments",
            variances.len(),
            truncated_moments.len()
        )));
    }
    if let Some(v) = variances.iter().chain(truncated_moments).find(|v| !(**v >= T::zero())) {
        return Err(Error::InvalidSpec(format!("negative variance or moment {v}")));
    }
    let sigma2 = variances.iter().fold(T::zero(), |a, b| a + *b);
    let tail = truncated_moments.iter().fold(T::zero(), |a, b| a + *b);
    let bracket = lit::<T>(2.0) * sigma2 - lit::<T>(8.0) * tail;
    if bracket <= T::zero() {
        return Ok(None);
    }
    Ok(Some(lambda.sqrt() / bracket.sqrt()))
}

/// `E[(aZ)² 1{|aZ| ≥ t}]` for a standard normal `Z`.
pub fn gaussian_truncated_second_moment(a: f64, t: f64) -> f64 {
    let a = a.abs();
    if a == 0.0 {
        return 0.0;
    }
    let c = t / a;
    // E[Z² 1{|Z| ≥ c}] = 2(cφ(c) + 1 − Φ(c)).
    let phi = (-0.5 * c * c).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let upper_tail = 0.5 * statrs::function::erf::erfc(c / std::f64::consts::SQRT_2);
    a * a * 2.0 * (c * phi + upper_tail)
}

/// `E[(aε)² 1{|aε| ≥ t}]` for a Rademacher sign `ε`.
pub fn rademacher_truncated_second_moment(a: f64, t: f64) -> f64 {
    if a.abs() >= t {
        a * a
    } else {
        0.0
    }
}

/// Constants the small-ball bound leaves unspecified; supplied by the caller.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmallBallConstants {
    pub c: f64,
    pub c_prime: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmallBallBound<T: Real> {
    /// Window half-widths below `c'·(δ_n/n)^{1/4}·r_n` are covered.
    pub eps_max: T,
    /// `c·n^{-1/4}·δ_n^{-3/8}`.
    pub bound: T,
}

/// Small-ball bound for `Σ a_k X_k` with `(δ_n, r_n)`-incompressible weights.
pub fn small_ball_bound<T: Real>(delta_n: T, r_n: T, n: usize, constants: SmallBallConstants) -> Result<SmallBallBound<T>> {
    let open_unit = |x: T| x > T::zero() && x <= T::one();
    if !open_unit(delta_n) || !open_unit(r_n) || n == 0 {
        return Err(Error::InvalidSpec(format!(
            "small-ball bound needs delta_n, r_n in (0, 1] and n >= 1, got {delta_n}, {r_n}, {n}"
        )));
    }
    let nf = lit::<T>(n as f64);
    let quarter = lit::<T>(0.25);
    Ok(SmallBallBound {
        eps_max: lit::<T>(constants.c_prime) * (delta_n / nf).powf(quarter) * r_n,
        bound: lit::<T>(constants.c) * nf.powf(-quarter) * delta_n.powf(lit(-0.375)),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TensorizationBound<T: Real> {
    /// `α₀·n·λ²`.
    pub threshold: T,
    /// `exp(−n·ln(1/(2b_n))/2)`.
    pub bound: T,
}

/// Tail bound for `P(Σ ζ_j² ≤ α₀nλ²)` given `P(ζ_j ≤ λ) ≤ b_n < 1/4`.
pub fn tensorization_bound<T: Real>(b_n: T, lambda: T, n: usize) -> Result<TensorizationBound<T>> {
    if !(b_n > T::zero() && b_n < lit(0.25)) {
        return Err(Error::InvalidSpec(format!("b_n = {b_n} outside (0, 1/4)")));
    }
    check_lambda(lambda)?;
    let nf = lit::<T>(n as f64);
    let rate = (T::one() / (lit::<T>(2.0) * b_n)).ln();
    Ok(TensorizationBound {
        threshold: alpha0::<T>() * nf * lambda * lambda,
        bound: (-(nf * rate) / lit(2.0)).exp(),
    })
}

/// Law of the non-negative variables `ζ_j` in a tensorization experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum ZetaLaw {
    /// `|Z|` with `Z` standard normal.
    AbsGaussian,
    /// `|Z|·scale`.
    ScaledAbsGaussian(f64),
    /// Uniform on `[0, width]`.
    Uniform(f64),
    /// Point mass.
    Constant(f64),
}

impl ZetaLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ZetaLaw::AbsGaussian => f64::abs(StandardNormal.sample(rng)),
            ZetaLaw::ScaledAbsGaussian(s) => s * f64::abs(StandardNormal.sample(rng)),
            ZetaLaw::Uniform(w) => w * rng.random::<f64>(),
            ZetaLaw::Constant(c) => c,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TensorizationReport {
    pub n: usize,
    pub trials: usize,
    pub lambda: f64,
    pub b_n: f64,
    /// Empirical `P(ζ ≤ λ)` from the hypothesis check.
    pub small_ball_rate: f64,
    pub hypothesis_samples: usize,
    pub threshold: f64,
    pub bound: f64,
    pub hits: usize,
    pub frequency: f64,
    pub std_err: f64,
    /// `SIGMA_BAND` binomial standard errors.
    pub band: f64,
    pub violation: bool,
}

/// Monte Carlo check of [`tensorization_bound`].
///
/// The hypothesis `P(ζ ≤ λ) ≤ b_n` is first checked on its own stream; a
/// clear violation is an error. Trial `t` then draws `n` values from stream
/// `t + 1`, so the report does not depend on scheduling.
pub fn tensorization_experiment(
    zeta: ZetaLaw,
    b_n: f64,
    lambda: f64,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<TensorizationReport> {
    let bound = tensorization_bound(b_n, lambda, n)?;
    if trials == 0 {
        return Err(Error::InvalidSpec("at least one trial required".into()));
    }
    let streams = StreamFactory::new(seed);

    let hypothesis_samples = (10 * trials).max(10_000);
    let mut rng = streams.stream(0);
    let below = (0..hypothesis_samples).filter(|_| zeta.sample(&mut rng) <= lambda).count();
    let rate = below as f64 / hypothesis_samples as f64;
    let rate_band = SIGMA_BAND * binomial_std_err(b_n, hypothesis_samples);
    if rate > b_n + rate_band {
        return Err(Error::HypothesisViolated {
            empirical: rate,
            b_n,
            band: rate_band,
        });
    }

    let hits = (0..trials)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = streams.stream(t as u64 + 1);
            let sum: f64 = (0..n).map(|_| zeta.sample(&mut rng).powi(2)).sum();
            sum <= bound.threshold
        })
        .count();
    let frequency = hits as f64 / trials as f64;
    let std_err = binomial_std_err(frequency, trials);
    let band = SIGMA_BAND * binomial_std_err(frequency.max(bound.bound).min(1.0), trials);
    Ok(TensorizationReport {
        n,
        trials,
        lambda,
        b_n,
        small_ball_rate: rate,
        hypothesis_samples,
        threshold: bound.threshold,
        bound: bound.bound,
        hits,
        frequency,
        std_err,
        band,
        violation: frequency > bound.bound + band,
    })
}

/// `S = Σ a_i X_i + Σ b_i Y_i` with `(X_i, Y_i)` independent pairs from `pair`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSumSpec {
    pub a: Vec<f64>,
    pub b: Option<Vec<f64>>,
    pub pair: CorrelatedPairDistribution,
}

impl WeightedSumSpec {
    pub fn new(a: Vec<f64>, b: Option<Vec<f64>>, pair: CorrelatedPairDistribution) -> Result<Self> {
        if let Some(b) = &b {
            if b.len() != a.len() {
                return Err(Error::InvalidSpec("coefficient vectors differ in length".into()));
            }
            let total: f64 = a.iter().chain(b).map(|x| x * x).sum();
            if (total - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidSpec(format!("‖a‖² + ‖b‖² = {total}, expected 1")));
            }
        }
        Ok(Self { a, b, pair })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.b {
            None => self.a.iter().map(|a| a * self.pair.sample(rng).0).sum(),
            Some(b) => self
                .a
                .iter()
                .zip(b)
                .map(|(a, b)| {
                    let (x, y) = self.pair.sample(rng);
                    a * x + b * y
                })
                .sum(),
        }
    }
}

/// `count` independent draws of the weighted sum. Chunks of draws use derived seeds.
pub fn sample_weighted_sum<T: Real>(spec: &WeightedSumSpec, count: usize, seed: u64) -> Vec<T> {
    const CHUNK: usize = 4096;
    let chunks = count.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = stream_rng(derive_seed(seed, c as u64), 0);
            let len = CHUNK.min(count - c * CHUNK);
            (0..len).map(move |_| lit::<T>(spec.sample(&mut rng))).collect::<Vec<_>>()
        })
        .collect()
}

/// A law on finitely many atoms with probabilities in `P` (float or exact rational).
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteLaw<V, P> {
    pub atoms: Vec<(V, P)>,
}

impl<P: Num + Clone> FiniteLaw<Vec<i64>, P> {
    /// Uniform law on `{−1, 1}^dim`.
    pub fn rademacher_vector(dim: usize) -> Self {
        let count = 1usize << dim;
        let mut weight = P::one();
        for _ in 0..dim {
            weight = weight / (P::one() + P::one());
        }
        let atoms = (0..count)
            .map(|mask| {
                let v = (0..dim).map(|i| if mask >> i & 1 == 1 { 1 } else { -1 }).collect();
                (v, weight.clone())
            })
            .collect();
        Self { atoms }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecouplingReport<P> {
    /// `P(E(X, Y))`.
    pub p_event: P,
    /// `P(E(X, Y) ∩ E(X', Y))`.
    pub p_joint: P,
    /// `p_event² ≤ p_joint + slack`.
    pub holds: bool,
    pub atoms_enumerated: u128,
}

/// Exact enumeration over the product space of `(X, Y, X')` with `X'` an
/// independent copy of `X`.
pub fn decoupling_check<VX, VY, P, E>(
    x_law: &FiniteLaw<VX, P>,
    y_law: &FiniteLaw<VY, P>,
    event: E,
    slack: P,
) -> Result<DecouplingReport<P>>
where
    P: Num + Clone + PartialOrd,
    E: Fn(&VX, &VY) -> bool,
{
    let nx = x_law.atoms.len() as u128;
    let ny = y_law.atoms.len() as u128;
    let atoms = nx * nx * ny;
    if atoms > ENUMERATION_LIMIT {
        return Err(Error::EnumerationLimit {
            atoms,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut p_event = P::zero();
    let mut p_joint = P::zero();
    for (y, py) in &y_law.atoms {
        let flags: Vec<bool> = x_law.atoms.iter().map(|(x, _)| event(x, y)).collect();
        for (i, (_, px)) in x_law.atoms.iter().enumerate() {
            if !flags[i] {
                continue;
            }
            p_event = p_event + px.clone() * py.clone();
            for (j, (_, px2)) in x_law.atoms.iter().enumerate() {
                if flags[j] {
                    p_joint = p_joint + px.clone() * py.clone() * px2.clone();
                }
            }
        }
    }
    let holds = p_event.clone() * p_event.clone() <= p_joint.clone() + slack;
    Ok(DecouplingReport {
        p_event,
        p_joint,
        holds,
        atoms_enumerated: atoms,
    })
}

/// Event `|wᵀ Q w − center| ≤ half_width` for `w = (x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticFormEvent<P> {
    /// Row-major square matrix of size `dim(x) + dim(y)`.
    pub matrix: Vec<Vec<P>>,
    pub center: P,
    pub half_width: P,
}

impl<P: Num + Clone + PartialOrd + Signed> QuadraticFormEvent<P> {
    pub fn value(&self, x: &[i64], y: &[i64]) -> P
    where
        P: FromPrimitive,
    {
        let w: Vec<P> = x
            .iter()
            .chain(y)
            .map(|&s| P::from_i64(s).expect("integer coordinate representable"))
            .collect();
        let mut total = P::zero();
        for (i, row) in self.matrix.iter().enumerate() {
            for (j, q) in row.iter().enumerate() {
                total = total + q.clone() * w[i].clone() * w[j].clone();
            }
        }
        total
    }

    pub fn occurs(&self, x: &[i64], y: &[i64]) -> bool
    where
        P: FromPrimitive,
    {
        (self.value(x, y) - self.center.clone()).abs() <= self.half_width
    }
}

/// [`decoupling_check`] for a quadratic-form event on Rademacher vectors.
pub fn quadratic_form_decoupling<P>(
    x_dim: usize,
    y_dim: usize,
    event: &QuadraticFormEvent<P>,
    slack: P,
) -> Result<DecouplingReport<P>>
where
    P: Num + Clone + PartialOrd + Signed + FromPrimitive,
{
    let size = x_dim + y_dim;
    if event.matrix.len() != size || event.matrix.iter().any(|r| r.len() != size) {
        return Err(Error::InvalidSpec(format!("quadratic form must be {size}x{size}")));
    }
    let atoms = 1u128 << (2 * x_dim + y_dim).min(127);
    if atoms > ENUMERATION_LIMIT {
        return Err(Error::EnumerationLimit {
            atoms,
            limit: ENUMERATION_LIMIT,
        });
    }
    let x_law = FiniteLaw::<Vec<i64>, P>::rademacher_vector(x_dim);
    let y_law = FiniteLaw::<Vec<i64>, P>::rademacher_vector(y_dim);
    decoupling_check(&x_law, &y_law, |x, y| event.occurs(x, y), slack)
}
