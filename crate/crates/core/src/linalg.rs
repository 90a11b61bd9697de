//! Small dense matrices, singular values and the size functional
//! `ell(M) = max(log+ |M|, log+ |M^-1|)`.
//!
//! Everything here is sized for d in the low single digits. Norms are
//! spectral (largest singular value) unless stated otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative invertibility tolerance: `|det M| > DET_TOL * |M|_F^d`.
pub const DET_TOL: f64 = 1e-12;

const JACOBI_TOL: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 60;

/// A dense square matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from a row-major slice of length `dim * dim`.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(Matrix { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "matrix is not square: {dim} rows but a row of length {}",
                bad.len()
            )));
        }
        Self::from_row_major(dim, rows.concat())
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m.data[i * entries.len() + i] = e;
        }
        m
    }

    /// Planar rotation by `phi` radians.
    pub fn rotation(phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Matrix {
            dim: 2,
            data: vec![c, -s, s, c],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.dim + col] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.data[j * d + i] = self.data[i * d + j];
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn scale_in_place(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn mul(&self, rhs: &Matrix) -> Matrix {
        let mut out = Self::zeros(self.dim);
        self.mul_into(rhs, &mut out);
        out
    }

    /// `out = self * rhs`. `out` must not alias either operand.
    pub fn mul_into(&self, rhs: &Matrix, out: &mut Matrix) {
        let d = self.dim;
        debug_assert_eq!(d, rhs.dim);
        out.dim = d;
        out.data.resize(d * d, 0.0);
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for l in 0..d {
                    acc += self.data[i * d + l] * rhs.data[l * d + j];
                }
                out.data[i * d + j] = acc;
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut out);
        out
    }

    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (i, o) in out.iter_mut().enumerate().take(d) {
            *o = self.data[i * d..(i + 1) * d]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Determinant by LU with partial pivoting.
    pub fn determinant(&self) -> f64 {
        let d = self.dim;
        if d == 2 {
            return self.data[0] * self.data[3] - self.data[1] * self.data[2];
        }
        let mut a = self.data.clone();
        let mut det = 1.0;
        for col in 0..d {
            let pivot = (col..d)
                .max_by(|&p, &q| a[p * d + col].abs().total_cmp(&a[q * d + col].abs()))
                .unwrap_or(col);
            if a[pivot * d + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for j in 0..d {
                    a.swap(pivot * d + j, col * d + j);
                }
                det = -det;
            }
            let p = a[col * d + col];
            det *= p;
            for row in col + 1..d {
                let f = a[row * d + col] / p;
                for j in col..d {
                    a[row * d + j] -= f * a[col * d + j];
                }
            }
        }
        det
    }

    /// Gauss-Jordan inverse with partial pivoting; `None` if a zero pivot
    /// is met.
    pub fn try_inverse(&self) -> Option<Matrix> {
        let d = self.dim;
        let mut a = self.data.clone();
        let mut inv = Matrix::identity(d).data;
        for col in 0..d {
            let pivot = (col..d)
                .max_by(|&p, &q| a[p * d + col].abs().total_cmp(&a[q * d + col].abs()))?;
            if a[pivot * d + col] == 0.0 {
                return None;
            }
            for j in 0..d {
                a.swap(pivot * d + j, col * d + j);
                inv.swap(pivot * d + j, col * d + j);
            }
            let p = a[col * d + col];
            for j in 0..d {
                a[col * d + j] /= p;
                inv[col * d + j] /= p;
            }
            for row in 0..d {
                if row == col {
                    continue;
                }
                let f = a[row * d + col];
                if f == 0.0 {
                    continue;
                }
                for j in 0..d {
                    a[row * d + j] -= f * a[col * d + j];
                    inv[row * d + j] -= f * inv[col * d + j];
                }
            }
        }
        Some(Matrix { dim: d, data: inv })
    }

    /// Singular values in non-increasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        if self.dim == 2 {
            let (s1, s2) = singular_values_2x2(&self.data);
            return vec![s1, s2];
        }
        jacobi_singular_values(self)
    }

    /// Spectral norm (largest singular value).
    pub fn operator_norm(&self) -> f64 {
        if self.dim == 2 {
            return singular_values_2x2(&self.data).0;
        }
        jacobi_singular_values(self)[0]
    }

    /// Thin QR by modified Gram-Schmidt. Returns `(Q, diag(R))`, with the
    /// diagonal of `R` non-negative.
    pub fn qr_diag(&self) -> (Matrix, Vec<f64>) {
        let d = self.dim;
        let mut q = self.clone();
        let mut r = vec![0.0; d];
        for j in 0..d {
            for p in 0..j {
                let dot: f64 = (0..d).map(|i| q.get(i, p) * q.get(i, j)).sum();
                for i in 0..d {
                    let v = q.get(i, j) - dot * q.get(i, p);
                    q.set(i, j, v);
                }
            }
            // Second pass keeps Q orthogonal when columns are nearly
            // dependent.
            for p in 0..j {
                let dot: f64 = (0..d).map(|i| q.get(i, p) * q.get(i, j)).sum();
                for i in 0..d {
                    let v = q.get(i, j) - dot * q.get(i, p);
                    q.set(i, j, v);
                }
            }
            let norm = (0..d).map(|i| q.get(i, j).powi(2)).sum::<f64>().sqrt();
            r[j] = norm;
            if norm > 0.0 {
                for i in 0..d {
                    let v = q.get(i, j) / norm;
                    q.set(i, j, v);
                }
            }
        }
        (q, r)
    }
}

/// Stable closed form for the singular values of a 2x2 matrix given
/// row-major as `[a, b, c, d]`.
pub fn singular_values_2x2(m: &[f64]) -> (f64, f64) {
    let (a, b, c, d) = (m[0], m[1], m[2], m[3]);
    let p = (a + d).hypot(c - b);
    let q = (a - d).hypot(b + c);
    let s1 = 0.5 * (p + q);
    if s1 == 0.0 {
        return (0.0, 0.0);
    }
    let det = (a * d - b * c).abs();
    (s1, det / s1)
}

fn jacobi_singular_values(m: &Matrix) -> Vec<f64> {
    // One-sided Jacobi on the columns of a working copy.
    let d = m.dim;
    let mut a = m.clone();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..d {
            for q in p + 1..d {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..d {
                    let x = a.get(i, p);
                    let y = a.get(i, q);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..d {
                    let x = a.get(i, p);
                    let y = a.get(i, q);
                    a.set(i, p, c * x - s * y);
                    a.set(i, q, s * x + c * y);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..d)
        .map(|j| (0..d).map(|i| a.get(i, j).powi(2)).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// An invertible matrix, validated at construction with the
/// scale-invariant test `|det M| > 1e-12 |M|_F^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertibleMatrix {
    m: Matrix,
    singular: Vec<f64>,
}

impl InvertibleMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.dim() < 2 {
            return Err(Error::DimensionMismatch(format!(
                "matrices must be at least 2x2, got {0}x{0}",
                m.dim()
            )));
        }
        if m.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
        }
        let det = m.determinant();
        let tolerance = DET_TOL * m.frobenius_norm().powi(m.dim() as i32);
        if !(det.abs() > tolerance) {
            return Err(Error::MatrixNotInvertible { det, tolerance });
        }
        let singular = m.singular_values();
        Ok(InvertibleMatrix { m, singular })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn transpose(&self) -> InvertibleMatrix {
        InvertibleMatrix {
            m: self.m.transpose(),
            singular: self.singular.clone(),
        }
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular
    }

    pub fn inverse(&self) -> Matrix {
        // Construction guarantees a non-zero determinant.
        self.m.try_inverse().expect("validated matrix is invertible")
    }

    pub fn determinant(&self) -> f64 {
        self.m.determinant()
    }
}

/// Largest singular value of `m`.
pub fn operator_norm(m: &InvertibleMatrix) -> f64 {
    m.singular[0]
}

/// `ell(M) = max(log+ sigma_1(M), log+ (1 / sigma_d(M)))`.
pub fn ell(m: &InvertibleMatrix) -> f64 {
    let top = m.singular[0];
    let bottom = *m.singular.last().expect("non-empty spectrum");
    top.ln().max(0.0).max((-bottom.ln()).max(0.0))
}

/// `ell` for an arbitrary (assumed invertible) square matrix.
pub fn ell_of(m: &Matrix) -> f64 {
    let sv = m.singular_values();
    let top = sv[0];
    let bottom = sv[sv.len() - 1];
    top.ln().max(0.0).max((-bottom.ln()).max(0.0))
}

/// `log |det M|`, which is `log |wedge^2 M|` when d = 2.
pub fn wedge2_log_det(m: &InvertibleMatrix) -> Result<f64> {
    if m.dim() != 2 {
        return Err(Error::UnsupportedDimension {
            dim: m.dim(),
            what: "second exterior power as a determinant",
        });
    }
    Ok(m.determinant().abs().ln())
}

/// The k matrices driving the cocycle, with cached `ell` values.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFamily {
    matrices: Vec<InvertibleMatrix>,
    ells: Vec<f64>,
    max_ell: f64,
}

impl MatrixFamily {
    pub fn new(matrices: Vec<InvertibleMatrix>) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return Err(Error::InvalidArgument("matrix family is empty".into()));
        };
        let dim = first.dim();
        if let Some(bad) = matrices.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "family mixes dimensions {dim} and {}",
                bad.dim()
            )));
        }
        let ells: Vec<f64> = matrices.iter().map(ell).collect();
        let max_ell = ells.iter().copied().fold(0.0, f64::max);
        Ok(MatrixFamily {
            matrices,
            ells,
            max_ell,
        })
    }

    pub fn from_matrices(ms: Vec<Matrix>) -> Result<Self> {
        Self::new(
            ms.into_iter()
                .map(InvertibleMatrix::new)
                .collect::<Result<_>>()?,
        )
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].dim()
    }

    pub fn get(&self, i: usize) -> &InvertibleMatrix {
        &self.matrices[i]
    }

    pub fn matrices(&self) -> &[InvertibleMatrix] {
        &self.matrices
    }

    pub fn ells(&self) -> &[f64] {
        &self.ells
    }

    /// `K = max_i ell(M_i)`.
    pub fn max_ell(&self) -> f64 {
        self.max_ell
    }

    pub fn transposed(&self) -> MatrixFamily {
        MatrixFamily {
            matrices: self.matrices.iter().map(InvertibleMatrix::transpose).collect(),
            ells: self.ells.clone(),
            max_ell: self.max_ell,
        }
    }
}
