//! Small dense linear algebra for covariance square roots. Matrices are
//! row-major `d x d` slices.

use crate::error::{Error, Result};
use crate::Scalar;

/// Eigenvalues below `-PSD_TOL` are reported as a non-PSD covariance.
pub const PSD_TOL: f64 = 1e-12;

/// Smallest eigenvalue of a symmetric 2x2 matrix.
pub fn min_eigen_2x2<S: Scalar>(m: &[S]) -> S {
    let half = S::lit(0.5);
    let mean = half * (m[0] + m[3]);
    let diff = half * (m[0] - m[3]);
    let off = half * (m[1] + m[2]);
    mean - (diff * diff + off * off).sqrt()
}

/// Symmetric square root of a symmetric PSD 2x2 matrix,
/// `(M + sqrt(det M) I) / sqrt(tr M + 2 sqrt(det M))`.
pub fn psd_sqrt_2x2<S: Scalar>(m: &[S], out: &mut [S]) -> Result<()> {
    let lmin = min_eigen_2x2(m);
    if lmin < -S::lit(PSD_TOL) {
        return Err(Error::NonPsdCovariance { eigenvalue: lmin.as_f64() });
    }
    let off = S::lit(0.5) * (m[1] + m[2]);
    let det = (m[0] * m[3] - off * off).max(S::zero());
    let s = det.sqrt();
    let t2 = m[0] + m[3] + s + s;
    if t2 <= S::zero() {
        out[..4].iter_mut().for_each(|v| *v = S::zero());
        return Ok(());
    }
    let t = t2.sqrt();
    out[0] = (m[0] + s) / t;
    out[1] = off / t;
    out[2] = off / t;
    out[3] = (m[3] + s) / t;
    Ok(())
}

/// Lower Cholesky factor `L` with `L L^T = M + jitter I`. A negative pivot
/// below `-PSD_TOL` is reported as an eigenvalue estimate.
pub fn cholesky<S: Scalar>(m: &[S], d: usize, out: &mut [S]) -> Result<()> {
    let jitter = S::lit(PSD_TOL);
    out[..d * d].iter_mut().for_each(|v| *v = S::zero());
    for j in 0..d {
        let mut diag = m[j * d + j] + jitter;
        for k in 0..j {
            diag = diag - out[j * d + k] * out[j * d + k];
        }
        if diag < -jitter {
            return Err(Error::NonPsdCovariance { eigenvalue: diag.as_f64() });
        }
        let ljj = diag.max(S::zero()).sqrt();
        out[j * d + j] = ljj;
        for i in j + 1..d {
            let mut s = S::lit(0.5) * (m[i * d + j] + m[j * d + i]);
            for k in 0..j {
                s = s - out[i * d + k] * out[j * d + k];
            }
            out[i * d + j] = if ljj > S::zero() { s / ljj } else { S::zero() };
        }
    }
    Ok(())
}

/// A square root `R` with `R R^T = M`: closed form for `d <= 2`, Cholesky otherwise.
pub fn covariance_root<S: Scalar>(m: &[S], d: usize, out: &mut [S]) -> Result<()> {
    match d {
        1 => {
            if m[0] < -S::lit(PSD_TOL) {
                return Err(Error::NonPsdCovariance { eigenvalue: m[0].as_f64() });
            }
            out[0] = m[0].max(S::zero()).sqrt();
            Ok(())
        }
        2 => psd_sqrt_2x2(m, out),
        _ => cholesky(m, d, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square(r: &[f64]) -> [f64; 4] {
        [
            r[0] * r[0] + r[1] * r[2],
            r[0] * r[1] + r[1] * r[3],
            r[2] * r[0] + r[3] * r[2],
            r[2] * r[1] + r[3] * r[3],
        ]
    }

    #[test]
    fn sqrt_2x2_squares_back() {
        let m = [2.0, 0.7, 0.7, 1.0];
        let mut r = [0.0; 4];
        psd_sqrt_2x2(&m, &mut r).unwrap();
        let back = square(&r);
        for (a, b) in back.iter().zip(&m) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
        let singular = [1.0, 1.0, 1.0, 1.0];
        psd_sqrt_2x2(&singular, &mut r).unwrap();
        let back = square(&r);
        for (a, b) in back.iter().zip(&singular) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn negative_eigenvalue_rejected() {
        let mut r = [0.0; 4];
        let e = psd_sqrt_2x2(&[1.0, 2.0, 2.0, 1.0], &mut r).unwrap_err();
        assert!(matches!(e, Error::NonPsdCovariance { eigenvalue } if (eigenvalue + 1.0).abs() < 1e-12));
        assert!(psd_sqrt_2x2(&[-1e-13, 0.0, 0.0, 1.0], &mut r).is_ok());
    }

    #[test]
    fn cholesky_reconstructs() {
        let m = [4.0, 2.0, 0.4, 2.0, 3.0, 0.5, 0.4, 0.5, 1.0];
        let mut l = [0.0; 9];
        cholesky(&m, 3, &mut l).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert_relative_eq!(s, m[i * 3 + j], epsilon = 1e-11);
            }
        }
        assert!(cholesky(&[1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0], 3, &mut l).is_err());
    }
}
