//! Dense matrix helpers shared across the crate.
//!
//! Everything here is desk scale (dim <= ~32 for uncertainty work, a few
//! thousand entries for solver tableaus), so all storage is dense row-major.
//! The symmetric eigensolver is a cyclic Jacobi sweep, which is deterministic
//! and accurate enough to back matrix square roots and PD checks.

use serde::{Deserialize, Serialize};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat { rows: r, cols: c, data: rows.iter().flatten().copied().collect() }
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Mat::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// A^T x without forming the transpose.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len());
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            for j in 0..self.cols {
                out[j] += self[(i, j)] * xi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self[(i, j)] - self[(j, i)]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

// JSON form is a row-nested array, which keeps the set/posterior files readable.
impl Serialize for Mat {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<&[f64]> = (0..self.rows).map(|i| self.row(i)).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        if rows.iter().any(|row| row.len() != c) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(Mat { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns (eigenvalues, eigenvectors) with `a = V diag(w) V^T`; eigenvalues
/// ascending, eigenvector k in column k of `V`. Convergence: off-diagonal
/// Frobenius norm below 1e-12 relative to the matrix norm.
pub fn jacobi_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut m = a.clone();
    let mut v = Mat::identity(n);
    let scale = a.frobenius_norm().max(1e-300);
    let tol = 1e-12 * scale;

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if (2.0 * off).sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
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
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap());
    let w: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vs = Mat::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vs[(k, new)] = v[(k, old)];
        }
    }
    (w, vs)
}

/// Symmetric PSD square root via eigendecomposition.
///
/// Negative eigenvalues below -1e-10 relative magnitude are rejected; small
/// negative round-off is clamped to zero.
pub fn sym_sqrt(a: &Mat) -> Result<Mat, String> {
    let (w, v) = jacobi_eigen(a);
    let wmax = w.iter().cloned().fold(0.0f64, f64::max);
    let mut sqrt_w = Vec::with_capacity(w.len());
    for &wi in &w {
        if wi < -1e-10 * wmax.max(1.0) {
            return Err(format!("matrix not PSD: eigenvalue {wi}"));
        }
        sqrt_w.push(wi.max(0.0).sqrt());
    }
    // V diag(sqrt w) V^T
    let mut out = Mat::zeros(a.rows, a.cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let mut s = 0.0;
            for k in 0..a.rows {
                s += v[(i, k)] * sqrt_w[k] * v[(j, k)];
            }
            out[(i, j)] = s;
        }
    }
    // symmetrize round-off
    for i in 0..a.rows {
        for j in (i + 1)..a.cols {
            let m = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = m;
            out[(j, i)] = m;
        }
    }
    Ok(out)
}

/// Inverse of a symmetric positive definite matrix via eigendecomposition.
pub fn spd_inverse(a: &Mat) -> Result<Mat, String> {
    let (w, v) = jacobi_eigen(a);
    let wmax = w.iter().cloned().fold(0.0f64, f64::max);
    if w.iter().any(|&wi| wi <= 1e-14 * wmax.max(1.0)) {
        return Err("matrix not positive definite".to_string());
    }
    let mut out = Mat::zeros(a.rows, a.cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let mut s = 0.0;
            for k in 0..a.rows {
                s += v[(i, k)] * v[(j, k)] / w[k];
            }
            out[(i, j)] = s;
        }
    }
    Ok(out)
}

/// log-determinant of a symmetric positive definite matrix.
pub fn spd_log_det(a: &Mat) -> Result<f64, String> {
    let (w, _) = jacobi_eigen(a);
    let wmax = w.iter().cloned().fold(0.0f64, f64::max);
    if w.iter().any(|&wi| wi <= 1e-14 * wmax.max(1.0)) {
        return Err("matrix not positive definite".to_string());
    }
    Ok(w.iter().map(|wi| wi.ln()).sum())
}

/// Smallest eigenvalue of a symmetric matrix, for PD checks.
pub fn min_eigenvalue(a: &Mat) -> f64 {
    let (w, _) = jacobi_eigen(a);
    w.first().copied().unwrap_or(0.0)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // eigenvalues 1 and 3 for [[2,1],[1,2]]
        let a = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let (w, v) = jacobi_eigen(&a);
        assert!((w[0] - 1.0).abs() < 1e-10);
        assert!((w[1] - 3.0).abs() < 1e-10);
        // reconstruct
        let d = Mat::diag(&w);
        let rec = v.matmul(&d).matmul(&v.transpose());
        for (x, y) in rec.data.iter().zip(&a.data) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let a = Mat::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, 0.2],
            vec![0.5, 0.2, 2.0],
        ]);
        let s = sym_sqrt(&a).unwrap();
        assert!(s.is_symmetric(1e-12));
        let sq = s.matmul(&s);
        let diff: f64 = sq.data.iter().zip(&a.data).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(diff / a.frobenius_norm() < 1e-10);
    }

    #[test]
    fn spd_inverse_roundtrip() {
        let a = Mat::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.5]]);
        let inv = spd_inverse(&a).unwrap();
        let id = a.matmul(&inv);
        assert!((id[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((id[(0, 1)]).abs() < 1e-12);
    }

    #[test]
    fn non_pd_rejected() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]); // eigenvalues -1, 3
        assert!(sym_sqrt(&a).is_err());
        assert!(spd_inverse(&a).is_err());
    }
}
