use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Dense complex matrix, column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = CMatrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m.data[j * rows + i] = f(i, j);
            }
        }
        m
    }

    pub fn from_real(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        CMatrix::from_fn(rows, cols, |i, j| C64::new(f(i, j), 0.0))
    }

    /// Build from a list of columns of equal length.
    pub fn from_columns(rows: usize, columns: &[Vec<C64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            if c.len() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    found: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Ok(CMatrix {
            rows,
            cols: columns.len(),
            data,
        })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = CMatrix::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn col(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [C64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[C64]> {
        self.data.chunks(self.rows.max(1)).take(self.cols)
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let oc = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for k in 0..self.cols {
                let b = other[(k, j)];
                if b == ZERO {
                    continue;
                }
                let ac = &self.data[k * self.rows..(k + 1) * self.rows];
                for (o, a) in oc.iter_mut().zip(ac) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self^H * other`, the Gram-type product used by compressions.
    pub fn adjoint_mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.rows, other.rows, "adjoint_mul shape mismatch");
        CMatrix::from_fn(self.cols, other.cols, |i, j| dot(self.col(i), other.col(j)))
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, x.len());
        let mut y = vec![ZERO; self.rows];
        for (k, &xk) in x.iter().enumerate() {
            if xk == ZERO {
                continue;
            }
            for (yi, a) in y.iter_mut().zip(self.col(k)) {
                *yi += a * xk;
            }
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest deviation from Hermitian symmetry.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut d: f64 = 0.0;
        for j in 0..self.cols {
            for i in 0..=j.min(self.rows.saturating_sub(1)) {
                d = d.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        d
    }

    /// Spectral norm, via the eigenvalues of `A^H A`.
    pub fn spectral_norm(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        let g = if self.cols <= self.rows {
            self.adjoint_mul(self)
        } else {
            self.matmul(&self.adjoint())
        };
        let g = HermitianMatrix::symmetrized(g);
        let top = super::hermitian::hermitian_eigenvalues(&g)
            .map(|v| v.last().copied().unwrap_or(0.0))
            .unwrap_or_else(|_| g.as_matrix().frobenius());
        top.max(0.0).sqrt()
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

/// Square complex matrix with validated Hermitian symmetry.
#[derive(Clone, Debug)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Validates `A = A^H` to `1e-12 (1 + max|A|)`.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.rows(),
                found: m.cols(),
            });
        }
        let dev = m.hermitian_deviation();
        if dev > 1e-12 * (1.0 + m.max_abs()) {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(HermitianMatrix::symmetrized(m))
    }

    /// Replaces `A` by `(A + A^H)/2` without checking.
    pub fn symmetrized(m: CMatrix) -> Self {
        let n = m.rows();
        let mut s = m;
        for j in 0..n {
            for i in 0..j {
                let a = 0.5 * (s[(i, j)] + s[(j, i)].conj());
                s[(i, j)] = a;
                s[(j, i)] = a.conj();
            }
            let d = s[(j, j)].re;
            s[(j, j)] = C64::new(d, 0.0);
        }
        HermitianMatrix(s)
    }

    pub fn from_real_symmetric(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        HermitianMatrix::new(CMatrix::from_real(n, n, f))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// `Q^H A Q` for a matrix `Q` with `dim` rows.
    pub fn compress(&self, q: &CMatrix) -> HermitianMatrix {
        HermitianMatrix::symmetrized(q.adjoint_mul(&self.0.matmul(q)))
    }

    pub fn spectral_norm(&self) -> f64 {
        super::hermitian::hermitian_eigenvalues(self)
            .map(|v| {
                v.first()
                    .map(|a| a.abs())
                    .unwrap_or(0.0)
                    .max(v.last().map(|a| a.abs()).unwrap_or(0.0))
            })
            .unwrap_or_else(|_| self.0.frobenius())
    }
}

/// Square complex matrix with no symmetry assumed.
#[derive(Clone, Debug)]
pub struct ComplexMatrix(CMatrix);

impl ComplexMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.rows(),
                found: m.cols(),
            });
        }
        Ok(ComplexMatrix(m))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

/// Conjugate-linear inner product `<a, b> = sum conj(a_i) b_i`.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Bilinear product `sum a_i b_i`, no conjugation.
pub fn dot_bilinear(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn normalize(a: &mut [C64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        let inv = 1.0 / n;
        for z in a.iter_mut() {
            *z *= inv;
        }
    }
    n
}

pub fn to_complex(x: &[f64]) -> Vec<C64> {
    x.iter().map(|&v| C64::new(v, 0.0)).collect()
}

/// Modified Gram-Schmidt with reorthogonalization; columns whose residual
/// drops below `drop_tol` relative to their input norm are discarded.
pub fn orthonormalize(columns: Vec<Vec<C64>>, drop_tol: f64) -> Vec<Vec<C64>> {
    let mut out: Vec<Vec<C64>> = Vec::with_capacity(columns.len());
    for mut v in columns {
        let n0 = norm(&v);
        if n0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in &out {
                let c = dot(q, &v);
                axpy(-c, q, &mut v);
            }
        }
        if norm(&v) > drop_tol * n0 {
            normalize(&mut v);
            out.push(v);
        }
    }
    out
}
