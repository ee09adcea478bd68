//! Unit-sphere geometry: sparse / compressible / incompressible vectors,
//! spread sets, and distances from a column to the span of the others.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{eps, lit, to_f64, unit_tolerance, Real};
use crate::spectra;

/// Smallest singular value below which a set of columns is treated as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassParams<T: Real> {
    delta: T,
    r: T,
}

impl<T: Real> ClassParams<T> {
    pub fn new(delta: T, r: T) -> Result<Self> {
        let open_unit = |x: T| x > T::zero() && x < T::one();
        if !open_unit(delta) || !open_unit(r) {
            return Err(Error::InvalidSpec(format!(
                "delta and r must lie in (0, 1), got delta = {delta}, r = {r}"
            )));
        }
        Ok(Self { delta, r })
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn r(&self) -> T {
        self.r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sparsity {
    Sparse,
    Compressible,
    Incompressible,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VectorClass<T: Real> {
    pub tag: Sparsity,
    pub distance_to_sparse: T,
}

fn check_unit<T: Real>(x: &[T]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::InvalidVector("empty vector".into()));
    }
    let norm_sq = x.iter().fold(T::zero(), |acc, v| acc + *v * *v);
    if (norm_sq.sqrt() - T::one()).abs() > unit_tolerance::<T>() {
        return Err(Error::InvalidVector(format!(
            "expected a unit vector, norm is {}",
            norm_sq.sqrt()
        )));
    }
    Ok(())
}

/// Number of coordinates a `delta`-sparse vector may carry: `⌊δn⌋`.
///
/// The product is nudged up by a few ulps so that e.g. `0.29 * 100` counts as 29.
pub fn sparse_budget<T: Real>(delta: T, n: usize) -> usize {
    let product = delta * lit::<T>(n as f64);
    to_f64((product * (T::one() + lit::<T>(8.0) * eps::<T>())).floor()) as usize
}

/// Indices ordered by decreasing magnitude; equal magnitudes keep the lower index first.
fn by_magnitude<T: Real>(x: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| {
        x[j].abs()
            .partial_cmp(&x[i].abs())
            .unwrap_or(Ordering::Equal)
            .then(i.cmp(&j))
    });
    order
}

/// Euclidean distance from a unit vector to the set of `delta`-sparse vectors.
pub fn distance_to_sparse<T: Real>(x: &[T], delta: T) -> Result<T> {
    check_unit(x)?;
    let keep = sparse_budget(delta, x.len());
    let order = by_magnitude(x);
    // Sum smallest first.
    let rest = order[keep.min(x.len())..]
        .iter()
        .rev()
        .fold(T::zero(), |acc, &i| acc + x[i] * x[i]);
    Ok(rest.sqrt())
}

pub fn classify<T: Real>(x: &[T], params: &ClassParams<T>) -> Result<VectorClass<T>> {
    let d = distance_to_sparse(x, params.delta)?;
    let tag = if d == T::zero() {
        Sparsity::Sparse
    } else if d <= params.r {
        Sparsity::Compressible
    } else {
        Sparsity::Incompressible
    };
    Ok(VectorClass {
        tag,
        distance_to_sparse: d,
    })
}

/// Coordinates of an incompressible vector whose magnitudes are of order `1/√n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpreadSet<T: Real> {
    pub indices: Vec<usize>,
    /// `τ/√(2n)`.
    pub lower: T,
    /// `√2/√(δn)`.
    pub upper: T,
    /// `Σ_{k∈σ} x_k²`.
    pub mass: T,
}

/// Extracts the spread set by band filtering and verifies its guarantees:
/// at least `nδ/2` indices, mass at least `τ²/2`, every coordinate in the band.
pub fn spread_set<T: Real>(x: &[T], delta: T, tau: T) -> Result<SpreadSet<T>> {
    let params = ClassParams::new(delta, tau)?;
    let class = classify(x, &params)?;
    if class.tag != Sparsity::Incompressible {
        return Err(Error::InvalidVector(format!(
            "vector is {:?} (distance to sparse {}), spread set needs an incompressible vector",
            class.tag, class.distance_to_sparse
        )));
    }
    let n = lit::<T>(x.len() as f64);
    let two = lit::<T>(2.0);
    let lower = tau / (two * n).sqrt();
    let upper = two.sqrt() / (delta * n).sqrt();
    let indices: Vec<usize> = (0..x.len())
        .filter(|&k| {
            let m = x[k].abs();
            m >= lower && m <= upper
        })
        .collect();
    let mass = indices.iter().fold(T::zero(), |acc, &k| acc + x[k] * x[k]);

    let min_size = delta * n / two;
    if lit::<T>(indices.len() as f64) < min_size {
        return Err(Error::InternalInvariant(format!(
            "spread set has {} indices, fewer than n*delta/2 = {min_size}",
            indices.len()
        )));
    }
    let min_mass = tau * tau / two;
    if mass < min_mass * (T::one() - lit::<T>(64.0) * eps::<T>()) {
        return Err(Error::InternalInvariant(format!(
            "spread set mass {mass} below tau^2/2 = {min_mass}"
        )));
    }
    if let Some(&k) = indices.iter().find(|&&k| x[k].abs() < lower || x[k].abs() > upper) {
        return Err(Error::InternalInvariant(format!("coordinate {k} outside the band")));
    }
    Ok(SpreadSet {
        indices,
        lower,
        upper,
        mass,
    })
}

/// `‖v − P_H v‖₂` where `H` is the span of `columns` (`n × m`, `m < n`).
pub fn distance_to_span<T: Real>(v: &DVector<T>, columns: &DMatrix<T>) -> Result<T> {
    let (n, m) = columns.shape();
    if v.len() != n {
        return Err(Error::InvalidSpec(format!(
            "vector has length {}, columns have {n} rows",
            v.len()
        )));
    }
    if m == 0 {
        return Ok(v.norm());
    }
    if m >= n {
        return Err(Error::DegenerateSubspace { index: None });
    }
    let smallest = *spectra_values(columns)?.last().expect("non-empty");
    if !(smallest > lit::<T>(RANK_TOLERANCE)) {
        return Err(Error::DegenerateSubspace { index: None });
    }
    let q = columns.clone().qr().q();
    let projected = &q * (q.transpose() * v);
    Ok((v - projected).norm())
}

fn spectra_values<T: Real>(m: &DMatrix<T>) -> Result<Vec<T>> {
    let svd = nalgebra::SVD::try_new(m.clone(), false, false, eps::<T>(), 200 * m.nrows().max(10))
        .ok_or(Error::NumericalFailure {
            routine: "bidiagonal SVD",
            seed: None,
        })?;
    Ok(svd.singular_values.iter().copied().collect())
}

/// `|(B^{-T}v, u) − a₁₁| / √(1 + ‖B^{-T}v‖²)`, the distance from the first
/// column of `a` to the span of the remaining ones, expressed through the
/// minor `B` left after deleting the first row and column.
pub fn distance_formula<T: Real>(a: &DMatrix<T>) -> Result<T> {
    let n = a.nrows();
    if n != a.ncols() || n < 2 {
        return Err(Error::InvalidSpec(format!(
            "distance formula needs a square matrix of size >= 2, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let minor = a.view((1, 1), (n - 1, n - 1)).into_owned();
    let u = a.view((1, 0), (n - 1, 1)).column(0).into_owned();
    let v = a.view((0, 1), (1, n - 1)).transpose().column(0).into_owned();
    let w = minor
        .transpose()
        .lu()
        .solve(&v)
        .filter(|w| w.iter().all(|x| x.is_finite()))
        .ok_or(Error::SingularMinor)?;
    Ok((w.dot(&u) - a[(0, 0)]).abs() / (T::one() + w.norm_squared()).sqrt())
}

/// `dist(W_k, H_k)` for every column `k`, where `H_k` spans the other columns.
pub fn column_distance_profile<T: Real>(w: &DMatrix<T>) -> Vec<Result<T>> {
    let n = w.ncols();
    (0..n)
        .map(|k| {
            let others = w.clone().remove_column(k);
            distance_to_span(&w.column(k).into_owned(), &others)
                .map_err(|e| match e {
                    Error::DegenerateSubspace { .. } => Error::DegenerateSubspace { index: Some(k) },
                    other => other,
                })
        })
        .collect()
}

/// Whether `s_n(w)` is small enough to force some column close to the span of the others:
/// returns `min_k dist(W_k, H_k)` alongside `s_n(w)`.
pub fn min_column_distance<T: Real>(w: &DMatrix<T>) -> Result<(T, T)> {
    let sn = spectra::least_singular_value(w, &DMatrix::zeros(w.nrows(), w.ncols()))?;
    let mut best = T::max_value().expect("bounded scalar");
    for d in column_distance_profile(w) {
        best = best.min(d?);
    }
    Ok((best, sn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn basis(n: usize, k: usize) -> Vec<f64> {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        e
    }

    fn gaussian(n: usize, m: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn distance_to_sparse_examples() {
        assert_eq!(distance_to_sparse(&basis(10, 3), 0.1).unwrap(), 0.0);

        let n = 10;
        let flat = vec![1.0 / (n as f64).sqrt(); n];
        let d = distance_to_sparse(&flat, 0.3).unwrap();
        assert_abs_diff_eq!(d, (7.0f64 / 10.0).sqrt(), epsilon = 1e-15);

        let x = [0.8, 0.6, 0.0, 0.0];
        assert_abs_diff_eq!(distance_to_sparse(&x, 0.25).unwrap(), 0.6, epsilon = 1e-15);

        assert!(matches!(distance_to_sparse(&[1.0, 1.0], 0.5), Err(Error::InvalidVector(_))));
    }

    #[test]
    fn ties_break_towards_lower_index() {
        let h = 0.5f64.sqrt();
        let x = [h, -h];
        assert_eq!(by_magnitude(&x), vec![0, 1]);
        assert_abs_diff_eq!(distance_to_sparse(&x, 0.5).unwrap(), h, epsilon = 1e-15);
    }

    #[test]
    fn classification_examples() {
        let p = ClassParams::new(0.1, 0.2).unwrap();
        assert_eq!(classify(&basis(100, 0), &p).unwrap().tag, Sparsity::Sparse);

        let flat = vec![0.1; 100];
        let c = classify(&flat, &p).unwrap();
        assert_eq!(c.tag, Sparsity::Incompressible);
        assert_abs_diff_eq!(c.distance_to_sparse, 0.9f64.sqrt(), epsilon = 1e-12);

        let eps_mix: f64 = 0.1;
        let mut x = vec![eps_mix / 99f64.sqrt(); 100];
        x[0] = (1.0 - eps_mix * eps_mix).sqrt();
        let c = classify(&x, &p).unwrap();
        // Oracle: keep the 10 largest coordinates, the remaining 90 carry 90/99 of eps².
        let want = (eps_mix * eps_mix * 90.0 / 99.0).sqrt();
        assert_abs_diff_eq!(c.distance_to_sparse, want, epsilon = 1e-12);
        assert_eq!(c.tag, Sparsity::Compressible);

        assert!(ClassParams::new(0.0, 0.5).is_err());
        assert!(ClassParams::new(0.5, 1.0).is_err());
    }

    #[test]
    fn spread_set_examples() {
        let flat = vec![0.1; 100];
        let s = spread_set(&flat, 0.5, 0.5).unwrap();
        assert_eq!(s.indices.len(), 100);
        assert_abs_diff_eq!(s.mass, 1.0, epsilon = 1e-12);

        assert!(matches!(spread_set(&basis(100, 0), 0.1, 0.2), Err(Error::InvalidVector(_))));
    }

    #[test]
    fn spread_set_on_random_sphere_vectors() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let n = 200;
        let (delta, tau) = (0.1, 0.2);
        for _ in 0..200 {
            let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let x: Vec<f64> = g.iter().map(|v| v / norm).collect();
            let s = spread_set(&x, delta, tau).unwrap();
            // Independent re-check of the three guarantees.
            assert!(s.indices.len() as f64 >= n as f64 * delta / 2.0);
            let mass: f64 = s.indices.iter().map(|&k| x[k] * x[k]).sum();
            assert!(mass >= tau * tau / 2.0);
            for &k in &s.indices {
                assert!(x[k].abs() >= tau / (2.0 * n as f64).sqrt());
                assert!(x[k].abs() <= (2.0 / (delta * n as f64)).sqrt());
            }
        }
    }

    #[test]
    fn distance_to_span_examples() {
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let h = DMatrix::from_columns(&[DVector::from_vec(vec![0.0, 1.0, 0.0]), DVector::from_vec(vec![0.0, 0.0, 1.0])]);
        assert_abs_diff_eq!(distance_to_span(&e1, &h).unwrap(), 1.0, epsilon = 1e-15);

        let inside = DVector::from_vec(vec![0.0, 2.0, -3.0]);
        assert_abs_diff_eq!(distance_to_span(&inside, &h).unwrap(), 0.0, epsilon = 1e-14);

        let v = DVector::from_vec(vec![1.0, 1.0]) / 2f64.sqrt();
        let h = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        assert_abs_diff_eq!(distance_to_span(&v, &h).unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);

        let dup = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        assert!(matches!(distance_to_span(&e1, &dup), Err(Error::DegenerateSubspace { .. })));
    }

    #[test]
    fn distance_formula_examples() {
        assert_abs_diff_eq!(distance_formula(&DMatrix::<f64>::identity(2, 2)).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(distance_formula(&nalgebra::dmatrix![1.0, 0.0; 0.0, 2.0]).unwrap(), 1.0, epsilon = 1e-15);
        let singular = nalgebra::dmatrix![1.0, 2.0, 3.0; 4.0, 1.0, 1.0; 5.0, 2.0, 2.0];
        assert_eq!(distance_formula(&singular), Err(Error::SingularMinor));
    }

    #[test]
    fn distance_formula_matches_projection() {
        for (n, seed) in [(5, 1), (20, 2), (50, 3)] {
            let a = gaussian(n, n, seed);
            let formula = distance_formula(&a).unwrap();
            let direct = distance_to_span(&a.column(0).into_owned(), &a.clone().remove_column(0)).unwrap();
            assert!((formula - direct).abs() <= 1e-8 * direct.max(1e-300), "{formula} vs {direct}");
        }
    }

    #[test]
    fn column_profile_examples() {
        let d: Vec<f64> = column_distance_profile(&DMatrix::<f64>::identity(3, 3))
            .into_iter()
            .map(|r| r.unwrap())
            .collect();
        for v in d {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);
        }

        let mut dup = gaussian(4, 4, 8);
        let c = dup.column(1).into_owned();
        dup.set_column(2, &c);
        let profile = column_distance_profile(&dup);
        // With columns 1 and 2 equal, every other column's complement is rank deficient
        // except for columns 1 and 2 themselves, whose distance is zero.
        assert!(matches!(profile[0], Err(Error::DegenerateSubspace { index: Some(0) })));
        assert_abs_diff_eq!(*profile[1].as_ref().unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(*profile[2].as_ref().unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn column_distances_dominate_least_singular_value() {
        let w = gaussian(30, 30, 21);
        let sn = spectra::least_singular_value(&w, &DMatrix::zeros(30, 30)).unwrap();
        let inv = w.clone().try_inverse().unwrap();
        for (k, d) in column_distance_profile(&w).into_iter().enumerate() {
            let d = d.unwrap();
            assert!(d >= sn - 1e-10);
            // Independent route: dist(W_k, H_k) = 1 / ‖row k of W⁻¹‖.
            let via_inverse = 1.0 / inv.row(k).norm();
            assert!((d - via_inverse).abs() < 1e-9 * via_inverse);
        }
        let (min_d, sn2) = min_column_distance(&w).unwrap();
        assert_eq!(sn, sn2);
        assert!(min_d >= sn);
    }
}
