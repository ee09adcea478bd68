//! The elliptic law: uniform measure on the ellipse with semi-axes `1+ρ`
//! (real direction) and `1−ρ` (imaginary direction), and goodness-of-fit
//! statistics for an empirical eigenvalue spectrum against it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};
use crate::spectra::EigenSpectrum;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipticLaw<T: Real> {
    rho: T,
    a: T,
    b: T,
}

impl<T: Real> EllipticLaw<T> {
    /// Requires `|rho| < 1`; the ellipse degenerates at the endpoints.
    pub fn new(rho: T) -> Result<Self> {
        if !(rho.abs() < T::one()) {
            return Err(Error::UnsupportedLaw { rho: to_f64(rho) });
        }
        Ok(Self {
            rho,
            a: T::one() + rho,
            b: T::one() - rho,
        })
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    /// Real semi-axis `1 + ρ`.
    pub fn a(&self) -> T {
        self.a
    }

    /// Imaginary semi-axis `1 − ρ`.
    pub fn b(&self) -> T {
        self.b
    }

    pub fn density(&self, u: T, v: T) -> T {
        if self.contains(u, v, T::one()) {
            T::one() / (T::pi() * (T::one() - self.rho * self.rho))
        } else {
            T::zero()
        }
    }

    /// Closed membership in the ellipse dilated by `dilation ≥ 1`.
    pub fn contains(&self, u: T, v: T, dilation: T) -> bool {
        assert!(dilation >= T::one(), "dilation must be at least 1");
        let ru = u / (dilation * self.a);
        let rv = v / (dilation * self.b);
        ru * ru + rv * rv <= T::one()
    }

    /// CDF of the real part: a semicircle law of radius `1 + ρ`.
    pub fn real_marginal_cdf(&self, u: T) -> T {
        semicircle_cdf(u, self.a)
    }

    /// CDF of the imaginary part: a semicircle law of radius `1 − ρ`.
    pub fn imag_marginal_cdf(&self, v: T) -> T {
        semicircle_cdf(v, self.b)
    }
}

/// CDF of the density `2√(R² − x²)/(πR²)` on `[−R, R]`.
fn semicircle_cdf<T: Real>(x: T, radius: T) -> T {
    if x <= -radius {
        return T::zero();
    }
    if x >= radius {
        return T::one();
    }
    let r2 = radius * radius;
    let value = lit::<T>(0.5) + (x * (r2 - x * x).sqrt() + r2 * (x / radius).asin()) / (T::pi() * r2);
    value.max(T::zero()).min(T::one())
}

/// Fraction of eigenvalues inside the dilated ellipse.
pub fn fraction_inside<T: Real>(spectrum: &EigenSpectrum<T>, law: &EllipticLaw<T>, dilation: T) -> T {
    let inside = spectrum
        .values
        .iter()
        .filter(|l| law.contains(l.re, l.im, dilation))
        .count();
    lit::<T>(inside as f64) / lit::<T>(spectrum.values.len() as f64)
}

/// One-sample Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic<T: Real>(samples: &[T], cdf: impl Fn(T) -> T) -> T {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = lit::<T>(sorted.len() as f64);
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = lit::<T>((i + 1) as f64) / n - f;
            let below = f - lit::<T>(i as f64) / n;
            above.max(below)
        })
        .fold(T::zero(), |acc, d| acc.max(d))
}

/// KS distance between the real parts of the spectrum and the real marginal.
pub fn marginal_ks_distance<T: Real>(spectrum: &EigenSpectrum<T>, law: &EllipticLaw<T>) -> T {
    let re: Vec<T> = spectrum.values.iter().map(|l| l.re).collect();
    ks_statistic(&re, |u| law.real_marginal_cdf(u))
}

/// KS distance between the imaginary parts and the imaginary marginal.
pub fn imag_marginal_ks_distance<T: Real>(spectrum: &EigenSpectrum<T>, law: &EllipticLaw<T>) -> T {
    let im: Vec<T> = spectrum.values.iter().map(|l| l.im).collect();
    ks_statistic(&im, |v| law.imag_marginal_cdf(v))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub cells: usize,
    pub degrees_of_freedom: usize,
}

/// Cell-count chi-square against the uniform law on the ellipse.
///
/// Eigenvalues are mapped to the unit disk by `(u/a, v/b)` and binned into
/// `rings × sectors` equal-area cells; points outside the disk count
/// towards the outermost ring.
pub fn cell_chi_square<T: Real>(
    spectrum: &EigenSpectrum<T>,
    law: &EllipticLaw<T>,
    rings: usize,
    sectors: usize,
) -> ChiSquareReport {
    assert!(rings > 0 && sectors > 0);
    let cells = rings * sectors;
    let mut counts = vec![0usize; cells];
    for l in &spectrum.values {
        let x = to_f64(l.re / law.a());
        let y = to_f64(l.im / law.b());
        let r2 = (x * x + y * y).min(1.0);
        // Equal-area rings: ring k covers r² ∈ [k/R, (k+1)/R).
        let ring = ((r2 * rings as f64) as usize).min(rings - 1);
        let theta = y.atan2(x) + std::f64::consts::PI;
        let sector = ((theta / std::f64::consts::TAU * sectors as f64) as usize).min(sectors - 1);
        counts[ring * sectors + sector] += 1;
    }
    let expected = spectrum.values.len() as f64 / cells as f64;
    let statistic = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    ChiSquareReport {
        statistic,
        cells,
        degrees_of_freedom: cells - 1,
    }
}

/// Summary of an eigenvalue spectrum against the elliptic law.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EllipticReport {
    pub schema_version: u32,
    pub rho: f64,
    pub n: usize,
    #[serde(rename = "fraction_inside_1.00")]
    pub fraction_inside_1_00: f64,
    #[serde(rename = "fraction_inside_1.05")]
    pub fraction_inside_1_05: f64,
    /// Fraction inside the ellipse dilated by [`Self::dilation`].
    pub fraction_inside: f64,
    pub dilation: f64,
    pub ks_real: f64,
    pub ks_imag: f64,
}

impl EllipticReport {
    pub fn new<T: Real>(spectrum: &EigenSpectrum<T>, law: &EllipticLaw<T>, dilation: T) -> Self {
        Self {
            schema_version: 1,
            rho: to_f64(law.rho()),
            n: spectrum.values.len(),
            fraction_inside_1_00: to_f64(fraction_inside(spectrum, law, T::one())),
            fraction_inside_1_05: to_f64(fraction_inside(spectrum, law, lit(1.05))),
            fraction_inside: to_f64(fraction_inside(spectrum, law, dilation)),
            dilation: to_f64(dilation),
            ks_real: to_f64(marginal_ks_distance(spectrum, law)),
            ks_imag: to_f64(imag_marginal_ks_distance(spectrum, law)),
        }
    }
}
