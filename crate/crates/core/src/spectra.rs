//! Dense spectral computations on square real matrices.
//!
//! Eigenvalues and singular values are reported for the rescaled operand
//! `A/√n` (optionally shifted by `z·I`), which is the normalisation under
//! which the elliptic law is stated. [`least_singular_value`] and
//! [`operator_norm`] work on the raw matrix.

use std::io::{self, BufRead, Write};

use nalgebra::{Complex, DMatrix, SVD};

use crate::error::{Error, Result};
use crate::scalar::{eps, lit, modulus, Real};

/// Francis sweeps allowed per deflated eigenvalue before giving up.
const MAX_SWEEPS_PER_EIGENVALUE: usize = 100;

/// Eigenvalues of `A/√n`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenSpectrum<T: Real> {
    /// Complex conjugate pairs are stored next to each other.
    pub values: Vec<Complex<T>>,
    pub n: usize,
}

/// Singular values of `A/√n − z·I`, sorted descending.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularSpectrum<T: Real> {
    pub values: Vec<T>,
    pub n: usize,
    pub shift_z: Complex<T>,
}

impl<T: Real> EigenSpectrum<T> {
    pub fn max_modulus(&self) -> T {
        self.values
            .iter()
            .map(|l| modulus(*l))
            .fold(T::zero(), |a, b| a.max(b))
    }

    pub fn min_modulus(&self) -> T {
        self.values
            .iter()
            .map(|l| modulus(*l))
            .fold(T::max_value().unwrap(), |a, b| a.min(b))
    }

    pub fn sum(&self) -> Complex<T> {
        self.values
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, v| acc + *v)
    }
}

impl<T: Real> SingularSpectrum<T> {
    /// Largest singular value `s_1`.
    pub fn largest(&self) -> T {
        self.values[0]
    }

    /// Smallest singular value `s_n`.
    pub fn smallest(&self) -> T {
        self.values[self.n - 1]
    }

    /// `s_{n-i}` in 1-based notation, i.e. the `(i+1)`-th smallest value.
    pub fn from_bottom(&self, i: usize) -> T {
        self.values[self.n - 1 - i]
    }
}

fn check_square<T: Real>(m: &DMatrix<T>) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::InvalidSpec(format!(
            "expected a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidSpec("matrix has non-finite entries".into()));
    }
    Ok(m.nrows())
}

fn scale_factor<T: Real>(n: usize) -> T {
    T::one() / lit::<T>(n as f64).sqrt()
}

/// Eigenvalues of `matrix/√n` via Hessenberg reduction followed by
/// Francis double-shift QR on the Hessenberg form.
pub fn eigenvalues<T: Real>(matrix: &DMatrix<T>) -> Result<EigenSpectrum<T>> {
    let n = check_square(matrix)?;
    let scale = scale_factor::<T>(n);
    let raw = raw_eigenvalues(matrix)?;
    let values = raw.into_iter().map(|l| l * scale).collect();
    Ok(EigenSpectrum { values, n })
}

/// Eigenvalues of the un-rescaled matrix.
pub fn raw_eigenvalues<T: Real>(matrix: &DMatrix<T>) -> Result<Vec<Complex<T>>> {
    let n = check_square(matrix)?;
    if n == 1 {
        return Ok(vec![Complex::new(matrix[(0, 0)], T::zero())]);
    }
    let h = nalgebra::linalg::Hessenberg::new(matrix.clone()).unpack_h();
    let mut rows = vec![T::zero(); n * n];
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            rows[i * n + j] = h[(i, j)];
        }
    }
    let (wr, wi) = hessenberg_qr(&mut rows, n)?;
    Ok(wr.into_iter().zip(wi).map(|(re, im)| Complex::new(re, im)).collect())
}

/// Eigenvalues of an upper Hessenberg matrix stored row-major in `a`
/// (destroyed). Returns real and imaginary parts; conjugate pairs are
/// adjacent with the negative imaginary part first.
fn hessenberg_qr<T: Real>(a: &mut [T], n: usize) -> Result<(Vec<T>, Vec<T>)> {
    let at = |i: usize, j: usize| i * n + j;
    let zero = T::zero();
    let e = eps::<T>();
    let mut wr = vec![zero; n];
    let mut wi = vec![zero; n];

    let mut anorm = zero;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[at(i, j)].abs();
        }
    }

    // Accumulated exceptional shift.
    let mut t = zero;
    let mut nn = n as isize - 1;
    while nn >= 0 {
        let top = nn as usize;
        let mut its = 0usize;
        loop {
            // Look for a negligible subdiagonal element.
            let mut l = top;
            while l >= 1 {
                let mut s = a[at(l - 1, l - 1)].abs() + a[at(l, l)].abs();
                if s == zero {
                    s = anorm;
                }
                if a[at(l, l - 1)].abs() <= e * s {
                    a[at(l, l - 1)] = zero;
                    break;
                }
                l -= 1;
            }

            let mut x = a[at(top, top)];
            if l == top {
                wr[top] = x + t;
                wi[top] = zero;
                nn -= 1;
                break;
            }
            let mut y = a[at(top - 1, top - 1)];
            let mut w = a[at(top, top - 1)] * a[at(top - 1, top)];
            if l + 1 == top {
                // 2x2 block.
                let p = lit::<T>(0.5) * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                x += t;
                if q >= zero {
                    let z = p + z.copysign(p);
                    wr[top - 1] = x + z;
                    wr[top] = if z != zero { x - w / z } else { x + z };
                    wi[top - 1] = zero;
                    wi[top] = zero;
                } else {
                    wr[top - 1] = x + p;
                    wr[top] = x + p;
                    wi[top - 1] = -z;
                    wi[top] = z;
                }
                nn -= 2;
                break;
            }

            if its == MAX_SWEEPS_PER_EIGENVALUE {
                return Err(Error::NumericalFailure {
                    routine: "Francis QR eigenvalue iteration",
                    seed: None,
                });
            }
            if its > 0 && its.is_multiple_of(10) {
                t += x;
                for i in 0..=top {
                    a[at(i, i)] -= x;
                }
                let s = a[at(top, top - 1)].abs() + a[at(top - 1, top - 2)].abs();
                x = lit::<T>(0.75) * s;
                y = x;
                w = lit::<T>(-0.4375) * s * s;
            }
            its += 1;

            // Find two consecutive small subdiagonal elements.
            let mut m = top - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[at(m, m)];
                let rr = x - z;
                let s = y - z;
                p = (rr * s - w) / a[at(m + 1, m)] + a[at(m, m + 1)];
                q = a[at(m + 1, m + 1)] - z - rr - s;
                r = a[at(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[at(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[at(m - 1, m - 1)].abs() + z.abs() + a[at(m + 1, m + 1)].abs());
                if u <= e * v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=top {
                a[at(i, i - 2)] = zero;
                if i != m + 2 {
                    a[at(i, i - 3)] = zero;
                }
            }

            // Double-shift QR sweep on rows/columns l..=top.
            let mut k = m;
            while k < top {
                if k != m {
                    p = a[at(k, k - 1)];
                    q = a[at(k + 1, k - 1)];
                    r = if k + 1 != top { a[at(k + 2, k - 1)] } else { zero };
                    x = p.abs() + q.abs() + r.abs();
                    if x != zero {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != zero {
                    if k == m {
                        if l != m {
                            a[at(k, k - 1)] = -a[at(k, k - 1)];
                        }
                    } else {
                        a[at(k, k - 1)] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=top {
                        let mut pp = a[at(k, j)] + q * a[at(k + 1, j)];
                        if k + 1 != top {
                            pp += r * a[at(k + 2, j)];
                            a[at(k + 2, j)] -= pp * z;
                        }
                        a[at(k + 1, j)] -= pp * y;
                        a[at(k, j)] -= pp * x;
                    }
                    let last = top.min(k + 3);
                    for i in l..=last {
                        let mut pp = x * a[at(i, k)] + y * a[at(i, k + 1)];
                        if k + 1 != top {
                            pp += z * a[at(i, k + 2)];
                            a[at(i, k + 2)] -= pp * r;
                        }
                        a[at(i, k + 1)] -= pp * q;
                        a[at(i, k)] -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok((wr, wi))
}

fn svd_values_real<T: Real>(m: DMatrix<T>) -> Result<Vec<T>> {
    let cap = 200 * m.nrows().max(m.ncols()).max(10);
    let svd = SVD::try_new(m, false, false, eps::<T>(), cap).ok_or(Error::NumericalFailure {
        routine: "bidiagonal SVD",
        seed: None,
    })?;
    Ok(svd.singular_values.iter().copied().collect())
}

fn svd_values_complex<T: Real>(m: DMatrix<Complex<T>>) -> Result<Vec<T>> {
    let cap = 200 * m.nrows().max(m.ncols()).max(10);
    let svd = SVD::try_new(m, false, false, eps::<T>(), cap).ok_or(Error::NumericalFailure {
        routine: "complex bidiagonal SVD",
        seed: None,
    })?;
    Ok(svd.singular_values.iter().copied().collect())
}

/// Singular values of `matrix/√n`, descending.
pub fn singular_values<T: Real>(matrix: &DMatrix<T>) -> Result<SingularSpectrum<T>> {
    shifted_singular_esd(matrix, Complex::new(T::zero(), T::zero()))
}

/// Singular values of `matrix/√n − z·I`. A non-real `z` is handled on an
/// explicit complex copy of the matrix.
pub fn shifted_singular_esd<T: Real>(matrix: &DMatrix<T>, z: Complex<T>) -> Result<SingularSpectrum<T>> {
    let n = check_square(matrix)?;
    let scale = scale_factor::<T>(n);
    let values = if z.im == T::zero() {
        let mut op = matrix * scale;
        for i in 0..n {
            op[(i, i)] -= z.re;
        }
        svd_values_real(op)?
    } else {
        let mut op = matrix.map(|x| Complex::new(x * scale, T::zero()));
        for i in 0..n {
            op[(i, i)] -= z;
        }
        svd_values_complex(op)?
    };
    Ok(SingularSpectrum { values, n, shift_z: z })
}

/// `s_n(matrix + shift)` without any rescaling.
pub fn least_singular_value<T: Real>(matrix: &DMatrix<T>, shift: &DMatrix<T>) -> Result<T> {
    let n = check_square(matrix)?;
    if shift.shape() != matrix.shape() {
        return Err(Error::InvalidSpec(format!(
            "shift shape {:?} does not match matrix shape {:?}",
            shift.shape(),
            matrix.shape()
        )));
    }
    let values = svd_values_real(matrix + shift)?;
    Ok(values[n - 1])
}

/// Largest singular value of the un-rescaled matrix.
pub fn operator_norm<T: Real>(matrix: &DMatrix<T>) -> Result<T> {
    if matrix.is_empty() {
        return Ok(T::zero());
    }
    if matrix.iter().all(|x| *x == T::zero()) {
        return Ok(T::zero());
    }
    Ok(svd_values_real(matrix.clone())?[0])
}

/// `eigenvalues.csv`: header `re,im`, one row per eigenvalue of `A/√n`.
pub fn write_eigenvalues_csv<T: Real, W: Write>(out: &mut W, spectrum: &EigenSpectrum<T>) -> io::Result<()> {
    writeln!(out, "re,im")?;
    for l in &spectrum.values {
        writeln!(out, "{},{}", l.re, l.im)?;
    }
    Ok(())
}

/// `singular_values.csv`: header `index,s`, index 1 is the largest value.
pub fn write_singular_values_csv<T: Real, W: Write>(out: &mut W, spectrum: &SingularSpectrum<T>) -> io::Result<()> {
    writeln!(out, "index,s")?;
    for (i, s) in spectrum.values.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, s)?;
    }
    Ok(())
}

/// Reads an `eigenvalues.csv` file back. Errors carry the 1-based line number.
pub fn read_eigenvalues_csv<R: BufRead>(input: R) -> Result<EigenSpectrum<f64>> {
    let mut lines = input.lines().enumerate();
    let parse_err = |line: usize, msg: &str| Error::InvalidSpec(format!("eigenvalue CSV line {line}: {msg}"));
    match lines.next() {
        Some((_, Ok(h))) if h.trim_end() == "re,im" => {}
        Some((_, Ok(h))) => return Err(parse_err(1, &format!("expected header `re,im`, found `{h}`"))),
        Some((_, Err(e))) => return Err(parse_err(1, &e.to_string())),
        None => return Err(parse_err(1, "missing header")),
    }
    let mut values = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| parse_err(idx + 1, &e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.trim_end().split(',');
        let (Some(re), Some(im), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(idx + 1, "expected two fields"));
        };
        let re: f64 = re.parse().map_err(|_| parse_err(idx + 1, "bad real part"))?;
        let im: f64 = im.parse().map_err(|_| parse_err(idx + 1, "bad imaginary part"))?;
        values.push(Complex::new(re, im));
    }
    let n = values.len();
    Ok(EigenSpectrum { values, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng))
    }

    fn sorted(mut v: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    #[test]
    fn identity_eigenvalues_are_scaled() {
        let s = eigenvalues(&DMatrix::<f64>::identity(4, 4)).unwrap();
        for l in s.values {
            assert_abs_diff_eq!(l.re, 0.5, epsilon = 1e-14);
            assert_abs_diff_eq!(l.im, 0.0);
        }
    }

    #[test]
    fn diagonal_eigenvalues() {
        let m = DMatrix::from_diagonal(&nalgebra::dvector![1.0, 2.0, 3.0]);
        let s = sorted(eigenvalues(&m).unwrap().values);
        let r3 = 3f64.sqrt();
        for (l, want) in s.iter().zip([1.0 / r3, 2.0 / r3, 3.0 / r3]) {
            assert_abs_diff_eq!(l.re, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn rotation_has_imaginary_pair() {
        let m: DMatrix<f64> = nalgebra::dmatrix![0.0, 1.0; -1.0, 0.0];
        let s = eigenvalues(&m).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(s.values[0].re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.values[0].im.abs(), h, epsilon = 1e-15);
        assert_abs_diff_eq!(s.values[0].im, -s.values[1].im, epsilon = 1e-15);
    }

    #[test]
    fn single_entry() {
        let s = eigenvalues(&nalgebra::dmatrix![-3.0f64]).unwrap();
        assert_eq!(s.values, vec![Complex::new(-3.0, 0.0)]);
    }

    #[test]
    fn matches_nalgebra_schur_on_random_input() {
        for (n, seed) in [(3, 1), (17, 2), (60, 3), (150, 4)] {
            let m = gaussian(n, seed);
            let ours = sorted(raw_eigenvalues(&m).unwrap());
            let theirs = sorted(m.clone().complex_eigenvalues().iter().copied().collect());
            for (a, b) in ours.iter().zip(&theirs) {
                assert!((a - b).norm() < 1e-8 * (1.0 + b.norm()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn conjugate_pairs_are_adjacent_and_trace_matches() {
        let n = 80;
        let m = gaussian(n, 9);
        let s = eigenvalues(&m).unwrap();
        let mut i = 0;
        while i < n {
            if s.values[i].im != 0.0 {
                assert_eq!(s.values[i].re, s.values[i + 1].re);
                assert_eq!(s.values[i].im, -s.values[i + 1].im);
                i += 2;
            } else {
                i += 1;
            }
        }
        let trace = m.trace() / (n as f64).sqrt();
        assert!((s.sum().re - trace).abs() < 1e-8 * n as f64);
        assert!(s.sum().im.abs() < 1e-8 * n as f64);
    }

    #[test]
    fn works_in_single_precision() {
        let m = gaussian(30, 5).map(|x| x as f32);
        let s = eigenvalues(&m).unwrap();
        let trace = m.trace() / 30f32.sqrt();
        assert!((s.sum().re - trace).abs() < 1e-3);
    }

    #[test]
    fn singular_value_examples() {
        let s = singular_values(&DMatrix::<f64>::identity(4, 4)).unwrap();
        assert!(s.values.iter().all(|v| (v - 0.5).abs() < 1e-14));

        let u = nalgebra::dvector![1.0, 2.0, 2.0] / 3.0;
        let v = nalgebra::dvector![0.0, 0.6, 0.8];
        let s = singular_values(&(&u * v.transpose())).unwrap();
        assert_abs_diff_eq!(s.values[0], 1.0 / 3f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(s.values[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.values[2], 0.0, epsilon = 1e-14);

        let s = singular_values(&nalgebra::dmatrix![3.0, 0.0; 0.0, -4.0]).unwrap();
        assert_abs_diff_eq!(s.values[0], 4.0 / 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(s.values[1], 3.0 / 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn shifted_examples() {
        let s = shifted_singular_esd(&DMatrix::<f64>::zeros(5, 5), Complex::new(2.0, 0.0)).unwrap();
        assert!(s.values.iter().all(|v| (v - 2.0).abs() < 1e-14));

        let n = 6;
        let id = DMatrix::<f64>::identity(n, n) * (n as f64).sqrt();
        let s = shifted_singular_esd(&id, Complex::new(1.0, 0.0)).unwrap();
        assert!(s.values.iter().all(|v| v.abs() < 1e-12));
        let s = shifted_singular_esd(&id, Complex::new(0.0, 1.0)).unwrap();
        assert!(s.values.iter().all(|v| (v - 2f64.sqrt()).abs() < 1e-12));
        assert_eq!(s.shift_z, Complex::new(0.0, 1.0));
    }

    #[test]
    fn least_singular_value_examples() {
        let z2 = DMatrix::<f64>::zeros(2, 2);
        assert_abs_diff_eq!(least_singular_value(&DMatrix::identity(2, 2), &z2).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            least_singular_value(&nalgebra::dmatrix![5.0, 0.0; 0.0, 3.0], &z2).unwrap(),
            3.0,
            epsilon = 1e-14
        );
        let dup = nalgebra::dmatrix![1.0, 1.0, 2.0; 3.0, 3.0, 1.0; 0.5, 0.5, 4.0];
        assert!(least_singular_value(&dup, &DMatrix::zeros(3, 3)).unwrap() < 1e-14);
        assert!(least_singular_value(&dup, &DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn operator_norm_examples() {
        assert_abs_diff_eq!(operator_norm(&DMatrix::<f64>::identity(7, 7)).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(operator_norm(&nalgebra::dmatrix![2.0, 0.0; 0.0, -9.0]).unwrap(), 9.0, epsilon = 1e-14);
        let u = nalgebra::dvector![2.0, 0.0, 0.0, 0.0];
        let v = nalgebra::dvector![0.0, 3.0, 0.0, 0.0];
        assert_abs_diff_eq!(operator_norm(&(&u * v.transpose())).unwrap(), 6.0, epsilon = 1e-13);
    }

    #[test]
    fn frobenius_identity_holds() {
        let m = gaussian(40, 11);
        let s = shifted_singular_esd(&m, Complex::new(0.3, -0.7)).unwrap();
        let mut op = m.map(|x| Complex::new(x / 40f64.sqrt(), 0.0));
        for i in 0..40 {
            op[(i, i)] -= Complex::new(0.3, -0.7);
        }
        let fro: f64 = op.iter().map(|c| c.norm_sqr()).sum();
        let ss: f64 = s.values.iter().map(|v| v * v).sum();
        assert!((fro - ss).abs() < 1e-8 * fro);
        assert!(s.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(eigenvalues(&DMatrix::<f64>::zeros(2, 3)).is_err());
        assert!(eigenvalues(&nalgebra::dmatrix![f64::NAN]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = eigenvalues(&gaussian(12, 3)).unwrap();
        let mut buf = Vec::new();
        write_eigenvalues_csv(&mut buf, &s).unwrap();
        assert!(buf.starts_with(b"re,im\n"));
        let back = read_eigenvalues_csv(&buf[..]).unwrap();
        assert_eq!(back.values, s.values);

        let err = read_eigenvalues_csv(&b"re,im\n1,2\nx,3\n"[..]).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(read_eigenvalues_csv(&b"a,b\n"[..]).is_err());

        let sv = singular_values(&DMatrix::<f64>::identity(2, 2)).unwrap();
        let mut buf = Vec::new();
        write_singular_values_csv(&mut buf, &sv).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("index,s\n1,"));
    }
}
