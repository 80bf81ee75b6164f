use super::{NumericsError, Result};
use crate::{Mat, Vector};

/// Eigendecomposition `A = V diag(values) V^T` of a symmetric matrix.
///
/// Eigenvalues are sorted in descending order and each eigenvector is
/// signed so that its largest-magnitude entry (first one on ties) is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub values: Vector,
    pub vectors: Mat,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `V diag(f(values)) V^T`
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Mat {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let s = f(self.values[k]);
            scaled.column_mut(k).scale_mut(s);
        }
        scaled * self.vectors.transpose()
    }

    pub fn reconstruct(&self) -> Mat {
        self.map(|x| x)
    }
}

fn asymmetry(a: &Mat) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig(a: &Mat) -> Result<SpectralDecomposition> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(NumericsError::DimensionMismatch(format!("{}x{} is not square", n, a.ncols())));
    }
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let asym = asymmetry(a);
    if asym > 1e-9 * (1.0 + scale) {
        return Err(NumericsError::NotSymmetric { asymmetry: asym });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(NumericsError::NonFinite { x: f64::NAN });
    }
    let mut m = (a + a.transpose()) * 0.5;
    let mut v = Mat::identity(n, n);

    let frob = m.norm();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() <= 1e-15 * frob || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].partial_cmp(&m[(i, i)]).unwrap().then(i.cmp(&j)));
    let values = Vector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let mut vectors = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src).clone_owned();
        let mut pivot = 0;
        for k in 0..n {
            if col[k].abs() > col[pivot].abs() {
                pivot = k;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok(SpectralDecomposition { values, vectors })
}

/// Principal square root of a positive semidefinite matrix.
///
/// Eigenvalues in `[-tol * max(1, |A|), 0)` are clipped to zero; anything
/// more negative is rejected.
pub fn psd_sqrt(a: &Mat, tol: f64) -> Result<Mat> {
    let eig = sym_eig(a)?;
    check_psd(&eig, tol)?;
    Ok(eig.map(|x| x.max(0.0).sqrt()))
}

pub(crate) fn check_psd(eig: &SpectralDecomposition, tol: f64) -> Result<()> {
    let scale = eig.values.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let min = eig.min_value();
    if min < -tol * scale {
        return Err(NumericsError::NotPsd { min_eigenvalue: min });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let a = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = sym_eig(&a).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let h = 1.0 / 2f64.sqrt();
        assert!((e.vectors[(0, 0)] - h).abs() < 1e-14 && (e.vectors[(1, 0)] - h).abs() < 1e-14);
        assert!((e.reconstruct() - a).norm() < 1e-13);
    }

    #[test]
    fn diagonal_is_untouched() {
        let a = Mat::from_diagonal(&Vector::from_vec(vec![1.0, 5.0, 3.0]));
        let e = sym_eig(&a).unwrap();
        assert_eq!(e.values.as_slice(), &[5.0, 3.0, 1.0]);
        assert_eq!(e.vectors[(1, 0)], 1.0);
    }

    #[test]
    fn matches_nalgebra() {
        let a = Mat::from_row_slice(4, 4, &[4.0, 1.0, -2.0, 0.5, 1.0, 3.0, 0.0, 1.5, -2.0, 0.0, 5.0, -1.0, 0.5, 1.5, -1.0, 2.0]);
        let e = sym_eig(&a).unwrap();
        let mut other: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        other.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for (x, y) in e.values.iter().zip(&other) {
            assert!((x - y).abs() < 1e-12);
        }
        let vtv = e.vectors.transpose() * &e.vectors;
        assert!((vtv - Mat::identity(4, 4)).norm() < 1e-13);
    }

    #[test]
    fn rejects_asymmetric() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(sym_eig(&a), Err(NumericsError::NotSymmetric { .. })));
    }

    #[test]
    fn sqrt_of_psd() {
        let a = Mat::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]);
        let r = psd_sqrt(&a, 1e-10).unwrap();
        assert!((r - Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0])).norm() < 1e-14);
        let b = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(psd_sqrt(&b, 1e-10), Err(NumericsError::NotPsd { .. })));
    }
}
