//! Bordered tridiagonal operators
//!
//! ```text
//!     [ T   B ]      T : n x n tridiagonal
//!     [ C   D ]      B : n x m, C : m x n, D : m x m dense
//! ```
//!
//! The real symmetric case (`C = B^T`) carries a Sturm count and a window
//! eigensolver; the complex case carries shifted solves only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::dense::{axpy, dot, norm, normalize, CMatrix, ComplexMatrix, HermitianMatrix, C64, ZERO};
use super::hermitian::{hermitian_eigenvalues, EigenDecomposition};
use super::operator::LinearOperator;
use super::solve::{DenseLu, ShiftedSolve, TridiagonalLu};
use crate::error::{Error, Result};

/// Real symmetric bordered tridiagonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct BorderedTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    /// `m` border columns, each of length `n`.
    pub border: Vec<Vec<f64>>,
    /// `m x m` symmetric corner, row-major.
    pub corner: Vec<f64>,
}

impl BorderedTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>, border: Vec<Vec<f64>>, corner: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        let m = border.len();
        if off.len() + 1 != n.max(1) {
            return Err(Error::DimensionMismatch {
                expected: n.saturating_sub(1),
                found: off.len(),
            });
        }
        if let Some(b) = border.iter().find(|b| b.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        if corner.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                found: corner.len(),
            });
        }
        for i in 0..m {
            for j in 0..i {
                let (a, b) = (corner[i * m + j], corner[j * m + i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::NotHermitian {
                        deviation: (a - b).abs(),
                    });
                }
            }
        }
        Ok(BorderedTridiagonal {
            diag,
            off,
            border,
            corner,
        })
    }

    /// Size of the tridiagonal block.
    pub fn n_tri(&self) -> usize {
        self.diag.len()
    }

    /// Size of the border.
    pub fn n_border(&self) -> usize {
        self.border.len()
    }

    pub fn dim(&self) -> usize {
        self.n_tri() + self.n_border()
    }

    pub fn corner_at(&self, i: usize, j: usize) -> f64 {
        self.corner[i * self.n_border() + j]
    }

    /// `self + t * other`; both must share the block layout.
    pub fn add_scaled(&self, other: &BorderedTridiagonal, t: f64) -> Result<BorderedTridiagonal> {
        if self.n_tri() != other.n_tri() || self.n_border() != other.n_border() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let zip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + t * y).collect::<Vec<_>>();
        Ok(BorderedTridiagonal {
            diag: zip(&self.diag, &other.diag),
            off: zip(&self.off, &other.off),
            border: self
                .border
                .iter()
                .zip(&other.border)
                .map(|(a, b)| zip(a, b))
                .collect(),
            corner: zip(&self.corner, &other.corner),
        })
    }

    /// Upper bound on the spectral radius (row-sum).
    pub fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.n_tri();
        let m = self.n_border();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            for b in &self.border {
                r += b[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        for a in 0..m {
            let mut r: f64 = self.border[a].iter().map(|x| x.abs()).sum();
            for b in 0..m {
                if b != a {
                    r += self.corner_at(a, b).abs();
                }
            }
            lo = lo.min(self.corner_at(a, a) - r);
            hi = hi.max(self.corner_at(a, a) + r);
        }
        if lo > hi {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }

    pub fn to_dense(&self) -> HermitianMatrix {
        let n = self.n_tri();
        let m = self.n_border();
        let mut a = CMatrix::zeros(n + m, n + m);
        for i in 0..n {
            a[(i, i)] = C64::new(self.diag[i], 0.0);
            if i + 1 < n {
                a[(i, i + 1)] = C64::new(self.off[i], 0.0);
                a[(i + 1, i)] = C64::new(self.off[i], 0.0);
            }
        }
        for (b, col) in self.border.iter().enumerate() {
            for i in 0..n {
                a[(i, n + b)] = C64::new(col[i], 0.0);
                a[(n + b, i)] = C64::new(col[i], 0.0);
            }
        }
        for i in 0..m {
            for j in 0..m {
                a[(n + i, n + j)] = C64::new(self.corner_at(i, j), 0.0);
            }
        }
        HermitianMatrix::symmetrized(a)
    }

    pub fn to_complex(&self) -> BorderedMatrix {
        let c = |v: &[f64]| v.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>();
        let border: Vec<Vec<C64>> = self.border.iter().map(|b| c(b)).collect();
        BorderedMatrix {
            sub: c(&self.off),
            diag: c(&self.diag),
            sup: c(&self.off),
            cols: border.clone(),
            rows: border,
            corner: c(&self.corner),
        }
    }

    /// Number of eigenvalues strictly below `sigma`.
    ///
    /// Inertia of `T - sigma` from its `LDL^T` pivots plus the inertia of the
    /// Schur complement `D - sigma - B^T (T - sigma)^{-1} B`.
    pub fn sturm_count(&self, sigma: f64) -> usize {
        let n = self.n_tri();
        let m = self.n_border();
        let pivmin = f64::EPSILON * self.norm_bound().max(1.0);
        let mut d = vec![0.0; n];
        let mut count = 0;
        for i in 0..n {
            let mut p = self.diag[i] - sigma;
            if i > 0 {
                p -= self.off[i - 1] * self.off[i - 1] / d[i - 1];
            }
            if p.abs() < pivmin {
                p = -pivmin;
            }
            if p < 0.0 {
                count += 1;
            }
            d[i] = p;
        }
        if m == 0 {
            return count;
        }
        let solves: Vec<Vec<f64>> = self.border.iter().map(|b| ldl_solve(&d, &self.off, b)).collect();
        let mut s = CMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                let mut v = self.corner_at(a, b) - if a == b { sigma } else { 0.0 };
                v -= self.border[a].iter().zip(&solves[b]).map(|(x, y)| x * y).sum::<f64>();
                s[(a, b)] = C64::new(v, 0.0);
            }
        }
        let vals = if m == 1 {
            vec![s[(0, 0)].re]
        } else {
            hermitian_eigenvalues(&HermitianMatrix::symmetrized(s)).unwrap_or_default()
        };
        count + vals.iter().filter(|&&v| v < 0.0).count()
    }

    /// All eigenvalues in `[lo, hi)`, ascending, by bisection on the Sturm count.
    pub fn eigenvalues_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        if hi <= lo {
            return vec![];
        }
        let scale = self.norm_bound().max(1.0);
        let tol = 4.0 * f64::EPSILON * scale;
        let mut out = Vec::new();
        let (clo, chi) = (self.sturm_count(lo), self.sturm_count(hi));
        let mut stack = vec![(lo, hi, clo, chi)];
        // depth-first, left branch first, keeps output sorted
        while let Some((a, b, ca, cb)) = stack.pop() {
            if cb <= ca {
                continue;
            }
            if b - a <= tol.max(2.0 * f64::EPSILON * a.abs().max(b.abs())) {
                let mid = 0.5 * (a + b);
                out.extend(std::iter::repeat(mid).take(cb - ca));
                continue;
            }
            let mid = 0.5 * (a + b);
            let cm = self.sturm_count(mid);
            stack.push((mid, b, cm, cb));
            stack.push((a, mid, ca, cm));
        }
        out
    }

    /// The `index`-th smallest eigenvalue (zero-based).
    pub fn eigenvalue_by_index(&self, index: usize) -> Result<f64> {
        if index >= self.dim() {
            return Err(Error::param("index", format!("{index} >= dim {}", self.dim())));
        }
        let (glo, ghi) = self.gershgorin();
        let pad = 1e-8 * (glo.abs() + ghi.abs() + 1.0);
        let (mut a, mut b) = (glo - pad, ghi + pad);
        let tol = 4.0 * f64::EPSILON * self.norm_bound().max(1.0);
        while b - a > tol.max(2.0 * f64::EPSILON * a.abs().max(b.abs())) {
            let mid = 0.5 * (a + b);
            if self.sturm_count(mid) > index {
                b = mid;
            } else {
                a = mid;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// Eigenpairs with eigenvalues in `[lo, hi)`: bisection for the values,
    /// inverse iteration for the vectors (orthogonalized within clusters).
    pub fn window_eig(&self, lo: f64, hi: f64, seed: u64) -> Result<EigenDecomposition> {
        let values = self.eigenvalues_in(lo, hi);
        let dim = self.dim();
        if values.is_empty() {
            return Ok(EigenDecomposition {
                values,
                vectors: CMatrix::zeros(dim, 0),
            });
        }
        let scale = self.norm_bound().max(1.0);
        let cluster_tol = 1e-9 * scale;
        let mut clusters: Vec<Vec<usize>> = vec![vec![0]];
        for i in 1..values.len() {
            if values[i] - values[i - 1] <= cluster_tol {
                clusters.last_mut().unwrap().push(i);
            } else {
                clusters.push(vec![i]);
            }
        }
        let complex = self.to_complex();
        let results: Vec<Result<Vec<(usize, Vec<C64>)>>> = clusters
            .par_iter()
            .map(|members| {
                let mut done: Vec<(usize, Vec<C64>)> = Vec::with_capacity(members.len());
                for &i in members {
                    let lu = complex.factor(C64::new(values[i], 0.0));
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                    let mut x: Vec<C64> = (0..dim).map(|_| C64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
                    normalize(&mut x);
                    let mut resid = f64::INFINITY;
                    for _ in 0..6 {
                        x = lu.solve(&x);
                        for (_, q) in &done {
                            let c = dot(q, &x);
                            axpy(-c, q, &mut x);
                        }
                        normalize(&mut x);
                        let hx = self.apply(&x);
                        resid = hx
                            .iter()
                            .zip(&x)
                            .map(|(a, b)| (a - b * values[i]).norm_sqr())
                            .sum::<f64>()
                            .sqrt();
                        if resid <= 1e-13 * scale {
                            break;
                        }
                    }
                    if resid > 1e-9 * scale {
                        return Err(Error::NoConvergence { max_residual: resid });
                    }
                    for v in x.iter_mut() {
                        *v = C64::new(v.re, 0.0);
                    }
                    normalize(&mut x);
                    done.push((i, x));
                }
                Ok(done)
            })
            .collect();
        let mut cols: Vec<Vec<C64>> = vec![vec![]; values.len()];
        for r in results {
            for (i, v) in r? {
                cols[i] = v;
            }
        }
        Ok(EigenDecomposition {
            values,
            vectors: CMatrix::from_columns(dim, &cols)?,
        })
    }
}

fn ldl_solve(d: &[f64], off: &[f64], b: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut y = b.to_vec();
    for i in 1..n {
        y[i] -= off[i - 1] / d[i - 1] * y[i - 1];
    }
    for i in 0..n {
        y[i] /= d[i];
    }
    for i in (0..n.saturating_sub(1)).rev() {
        let yi1 = y[i + 1];
        y[i] -= off[i] / d[i] * yi1;
    }
    y
}

impl LinearOperator for BorderedTridiagonal {
    fn dim(&self) -> usize {
        BorderedTridiagonal::dim(self)
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let n = self.n_tri();
        let m = self.n_border();
        assert_eq!(x.len(), n + m);
        let mut y = vec![ZERO; n + m];
        for i in 0..n {
            let mut s = x[i] * self.diag[i];
            if i > 0 {
                s += x[i - 1] * self.off[i - 1];
            }
            if i + 1 < n {
                s += x[i + 1] * self.off[i];
            }
            y[i] = s;
        }
        for (a, b) in self.border.iter().enumerate() {
            let xa = x[n + a];
            let mut s = ZERO;
            for i in 0..n {
                y[i] += xa * b[i];
                s += x[i] * b[i];
            }
            for c in 0..m {
                s += x[n + c] * self.corner_at(a, c);
            }
            y[n + a] = s;
        }
        y
    }
}

impl ShiftedSolve for BorderedTridiagonal {
    fn shifted_solve(&self, z: C64, b: &[C64]) -> Result<Vec<C64>> {
        self.to_complex().shifted_solve(z, b)
    }
}

/// Complex bordered tridiagonal matrix with no symmetry assumed.
#[derive(Clone, Debug)]
pub struct BorderedMatrix {
    pub sub: Vec<C64>,
    pub diag: Vec<C64>,
    pub sup: Vec<C64>,
    /// Columns of `B`, each of length `n`.
    pub cols: Vec<Vec<C64>>,
    /// Rows of `C`, each of length `n`.
    pub rows: Vec<Vec<C64>>,
    /// `D`, row-major.
    pub corner: Vec<C64>,
}

impl BorderedMatrix {
    pub fn n_tri(&self) -> usize {
        self.diag.len()
    }

    pub fn n_border(&self) -> usize {
        self.cols.len()
    }

    pub fn dim(&self) -> usize {
        self.n_tri() + self.n_border()
    }

    pub fn max_abs(&self) -> f64 {
        self.sub
            .iter()
            .chain(&self.diag)
            .chain(&self.sup)
            .chain(self.cols.iter().flatten())
            .chain(self.rows.iter().flatten())
            .chain(&self.corner)
            .fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let n = self.n_tri();
        let m = self.n_border();
        let mut a = CMatrix::zeros(n + m, n + m);
        for i in 0..n {
            a[(i, i)] = self.diag[i];
            if i + 1 < n {
                a[(i + 1, i)] = self.sub[i];
                a[(i, i + 1)] = self.sup[i];
            }
        }
        for b in 0..m {
            for i in 0..n {
                a[(i, n + b)] = self.cols[b][i];
                a[(n + b, i)] = self.rows[b][i];
            }
            for c in 0..m {
                a[(n + b, n + c)] = self.corner[b * m + c];
            }
        }
        ComplexMatrix::new(a).expect("square by construction")
    }

    /// Factor `self - z`. Zero pivots are floored so this always succeeds;
    /// `BorderedLu::min_pivot` exposes near-singularity.
    pub fn factor(&self, z: C64) -> BorderedLu {
        let n = self.n_tri();
        let m = self.n_border();
        let diag: Vec<C64> = self.diag.iter().map(|d| d - z).collect();
        let tri = TridiagonalLu::factor(&self.sub, &diag, &self.sup);
        let y: Vec<Vec<C64>> = self
            .cols
            .iter()
            .map(|b| {
                let mut v = b.clone();
                tri.solve_in_place(&mut v);
                v
            })
            .collect();
        let mut s = CMatrix::zeros(m, m);
        for a in 0..m {
            for c in 0..m {
                let mut v = self.corner[a * m + c] - if a == c { z } else { ZERO };
                v -= self.rows[a].iter().zip(&y[c]).map(|(p, q)| p * q).sum::<C64>();
                s[(a, c)] = v;
            }
        }
        let schur = DenseLu::factor(s);
        let min_pivot = tri.min_pivot().min(schur.min_pivot());
        BorderedLu {
            tri,
            y,
            rows: self.rows.clone(),
            schur,
            n,
            min_pivot,
        }
    }
}

impl LinearOperator for BorderedMatrix {
    fn dim(&self) -> usize {
        BorderedMatrix::dim(self)
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let n = self.n_tri();
        let m = self.n_border();
        assert_eq!(x.len(), n + m);
        let mut y = vec![ZERO; n + m];
        for i in 0..n {
            let mut s = x[i] * self.diag[i];
            if i > 0 {
                s += x[i - 1] * self.sub[i - 1];
            }
            if i + 1 < n {
                s += x[i + 1] * self.sup[i];
            }
            y[i] = s;
        }
        for a in 0..m {
            let xa = x[n + a];
            for i in 0..n {
                y[i] += xa * self.cols[a][i];
            }
            let mut s: C64 = self.rows[a].iter().zip(x).map(|(r, v)| r * v).sum();
            for c in 0..m {
                s += x[n + c] * self.corner[a * m + c];
            }
            y[n + a] = s;
        }
        y
    }
}

impl ShiftedSolve for BorderedMatrix {
    fn shifted_solve(&self, z: C64, b: &[C64]) -> Result<Vec<C64>> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: b.len(),
            });
        }
        let lu = self.factor(z);
        let tol = 1e-14 * self.max_abs().max(1.0);
        if lu.min_pivot() <= tol {
            return Err(Error::SingularShift {
                shift: z,
                pivot: lu.min_pivot(),
            });
        }
        Ok(lu.solve(b))
    }
}

/// Factorization of a shifted bordered matrix via the Schur complement of
/// its tridiagonal block.
#[derive(Clone, Debug)]
pub struct BorderedLu {
    tri: TridiagonalLu,
    y: Vec<Vec<C64>>,
    rows: Vec<Vec<C64>>,
    schur: DenseLu,
    n: usize,
    min_pivot: f64,
}

impl BorderedLu {
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let m = self.y.len();
        let mut x = b[..n].to_vec();
        self.tri.solve_in_place(&mut x);
        if m == 0 {
            return x;
        }
        let rhs: Vec<C64> = (0..m)
            .map(|a| b[n + a] - self.rows[a].iter().zip(&x).map(|(p, q)| p * q).sum::<C64>())
            .collect();
        let g = self.schur.solve(&rhs);
        for (a, ga) in g.iter().enumerate() {
            axpy(-ga, &self.y[a], &mut x);
        }
        x.extend_from_slice(&g);
        x
    }
}

/// Relative residual `|A x - z x| / |x|` for a bordered operator.
pub fn eigen_residual<A: LinearOperator + ?Sized>(a: &A, z: C64, x: &[C64]) -> f64 {
    let ax = a.apply(x);
    let r: f64 = ax.iter().zip(x).map(|(p, q)| (p - q * z).norm_sqr()).sum::<f64>().sqrt();
    r / norm(x).max(f64::MIN_POSITIVE)
}
