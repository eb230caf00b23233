//! Shifted linear solves: dense LU with partial pivoting and a pivoted
//! tridiagonal LU.

use super::dense::{CMatrix, HermitianMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Operators that can solve `(A - z) x = b`.
pub trait ShiftedSolve {
    fn shifted_solve(&self, z: C64, b: &[C64]) -> Result<Vec<C64>>;
}

/// Dense LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct DenseLu {
    lu: CMatrix,
    perm: Vec<usize>,
    min_pivot: f64,
}

impl DenseLu {
    /// Zero pivots are replaced by `eps * max|A|` so the factorization always
    /// exists; `min_pivot` keeps the original smallest magnitude.
    pub fn factor(a: CMatrix) -> DenseLu {
        assert!(a.is_square());
        let n = a.rows();
        let mut lu = a;
        let floor = f64::EPSILON * lu.max_abs().max(f64::MIN_POSITIVE);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].norm();
            for i in k + 1..n {
                let v = lu[(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            min_pivot = min_pivot.min(best);
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
            }
            if best == 0.0 {
                lu[(k, k)] = C64::new(floor, 0.0);
            }
            let piv = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / piv;
                lu[(i, k)] = f;
                if f == ZERO {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        if n == 0 {
            min_pivot = f64::INFINITY;
        }
        DenseLu { lu, perm, min_pivot }
    }

    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.perm.len();
        assert_eq!(b.len(), n);
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }
}

/// Solve `(A - z) x = b` for a dense Hermitian `A`.
pub fn shifted_solve(a: &HermitianMatrix, z: C64, b: &[C64]) -> Result<Vec<C64>> {
    a.shifted_solve(z, b)
}

impl ShiftedSolve for HermitianMatrix {
    fn shifted_solve(&self, z: C64, b: &[C64]) -> Result<Vec<C64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let mut m = self.as_matrix().clone();
        for i in 0..n {
            m[(i, i)] -= z;
        }
        let lu = DenseLu::factor(m);
        let tol = 1e-14 * self.as_matrix().max_abs().max(1.0);
        if lu.min_pivot() <= tol {
            return Err(Error::SingularShift {
                shift: z,
                pivot: lu.min_pivot(),
            });
        }
        Ok(lu.solve(b))
    }
}

/// LU of a general tridiagonal matrix with row interchanges.
#[derive(Clone, Debug)]
pub struct TridiagonalLu {
    dl: Vec<C64>,
    d: Vec<C64>,
    du: Vec<C64>,
    du2: Vec<C64>,
    swapped: Vec<bool>,
    min_pivot: f64,
}

impl TridiagonalLu {
    /// `sub` and `sup` have length `n - 1`. Exactly zero pivots are replaced
    /// by `eps * scale`; `min_pivot` reports the unmodified minimum.
    pub fn factor(sub: &[C64], diag: &[C64], sup: &[C64]) -> TridiagonalLu {
        let n = diag.len();
        assert!(sub.len() + 1 == n.max(1) && sup.len() + 1 == n.max(1));
        let mut dl = sub.to_vec();
        let mut d = diag.to_vec();
        let mut du = sup.to_vec();
        let mut du2 = vec![ZERO; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        let scale = d
            .iter()
            .chain(dl.iter())
            .chain(du.iter())
            .fold(0.0f64, |m, z| m.max(z.norm()))
            .max(f64::MIN_POSITIVE);
        for i in 0..n.saturating_sub(1) {
            if d[i].norm() >= dl[i].norm() {
                if d[i] != ZERO {
                    let f = dl[i] / d[i];
                    dl[i] = f;
                    d[i + 1] -= f * du[i];
                }
            } else {
                let f = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = f;
                let t = du[i];
                du[i] = d[i + 1];
                d[i + 1] = t - f * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -f * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        let mut min_pivot = f64::INFINITY;
        for p in d.iter_mut() {
            min_pivot = min_pivot.min(p.norm());
            if *p == ZERO {
                *p = C64::new(f64::EPSILON * scale, 0.0);
            }
        }
        TridiagonalLu {
            dl,
            d,
            du,
            du2,
            swapped,
            min_pivot,
        }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.d.len();
        assert_eq!(b.len(), n);
        if n == 0 {
            return;
        }
        for i in 0..n - 1 {
            if self.swapped[i] {
                let t = b[i];
                b[i] = b[i + 1];
                b[i + 1] = t - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn scalar_resolvent() {
        let a = HermitianMatrix::new(CMatrix::diagonal(&[0.0])).unwrap();
        let x = shifted_solve(&a, c(1.0, 1.0), &[c(1.0, 0.0)]).unwrap();
        // (0 - (1 + i))^{-1} = -(1 - i)/2
        assert!((x[0] - c(-0.5, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn singular_real_shift_is_rejected() {
        let a = HermitianMatrix::new(CMatrix::diagonal(&[0.0, 2.0])).unwrap();
        let r = shifted_solve(&a, c(2.0, 0.0), &[c(1.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(r, Err(Error::SingularShift { .. })));
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let n = 9;
        let sub: Vec<C64> = (0..n - 1).map(|i| c(1.0 + i as f64, 0.5)).collect();
        let sup: Vec<C64> = (0..n - 1).map(|i| c(-0.3, i as f64 * 0.1)).collect();
        // small diagonal forces row interchanges
        let diag: Vec<C64> = (0..n).map(|i| c(0.01 * i as f64, -0.2)).collect();
        let dense = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if i == j + 1 {
                sub[j]
            } else if j == i + 1 {
                sup[i]
            } else {
                ZERO
            }
        });
        let b: Vec<C64> = (0..n).map(|i| c(i as f64, 1.0)).collect();
        let lu = TridiagonalLu::factor(&sub, &diag, &sup);
        let mut x = b.clone();
        lu.solve_in_place(&mut x);
        let r = dense.mul_vec(&x);
        for (p, q) in r.iter().zip(&b) {
            assert!((p - q).norm() < 1e-12);
        }
        let x2 = DenseLu::factor(dense).solve(&b);
        for (p, q) in x.iter().zip(&x2) {
            assert!((p - q).norm() < 1e-10);
        }
    }
}
