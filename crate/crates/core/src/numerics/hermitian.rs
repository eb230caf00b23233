//! Dense Hermitian eigensolver: Householder reduction to a real symmetric
//! tridiagonal followed by implicit QL with Wilkinson-type shifts.

use super::dense::{CMatrix, HermitianMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// Eigenpairs of a Hermitian matrix, values ascending, vectors as columns.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl EigenDecomposition {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[C64] {
        self.vectors.col(i)
    }

    /// Keep only the pairs whose eigenvalue satisfies `keep`.
    pub fn filter(&self, keep: impl Fn(f64) -> bool) -> EigenDecomposition {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.values[i])).collect();
        let cols: Vec<Vec<C64>> = idx.iter().map(|&i| self.vector(i).to_vec()).collect();
        EigenDecomposition {
            values: idx.iter().map(|&i| self.values[i]).collect(),
            vectors: CMatrix::from_columns(self.vectors.rows(), &cols)
                .expect("columns share the row count"),
        }
    }
}

struct Reduction {
    diag: Vec<f64>,
    sub: Vec<C64>,
    reflectors: Vec<(usize, Vec<C64>, f64)>,
}

fn tridiagonalize(a: &HermitianMatrix, keep_reflectors: bool) -> Reduction {
    let n = a.dim();
    let mut m = a.as_matrix().clone();
    let mut sub = vec![ZERO; n.saturating_sub(1)];
    let mut reflectors = Vec::new();
    for k in 0..n.saturating_sub(1) {
        let len = n - k - 1;
        let x: Vec<C64> = (k + 1..n).map(|i| m[(i, k)]).collect();
        let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let tail = x[1..].iter().map(|z| z.norm_sqr()).sum::<f64>();
        if len == 1 || tail == 0.0 || xnorm == 0.0 {
            sub[k] = x[0];
            continue;
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { ONE };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vn2 = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let tau = 2.0 / vn2;
        sub[k] = alpha;

        // p = tau * B v over the trailing block
        let mut p = vec![ZERO; len];
        for (jj, vj) in v.iter().enumerate() {
            if *vj == ZERO {
                continue;
            }
            let col = m.col(k + 1 + jj);
            for (ii, pi) in p.iter_mut().enumerate() {
                *pi += col[k + 1 + ii] * vj;
            }
        }
        for pi in p.iter_mut() {
            *pi *= tau;
        }
        let vp: C64 = v.iter().zip(&p).map(|(a, b)| a.conj() * b).sum();
        let kk = 0.5 * tau * vp.re;
        let w: Vec<C64> = p.iter().zip(&v).map(|(pi, vi)| pi - vi * kk).collect();
        for jj in 0..len {
            let (vj, wj) = (v[jj].conj(), w[jj].conj());
            let col = m.col_mut(k + 1 + jj);
            for ii in 0..len {
                col[k + 1 + ii] -= v[ii] * wj + w[ii] * vj;
            }
        }
        if keep_reflectors {
            reflectors.push((k + 1, v, tau));
        }
    }
    let diag = (0..n).map(|i| m[(i, i)].re).collect();
    Reduction {
        diag,
        sub,
        reflectors,
    }
}

/// Implicit QL on a real symmetric tridiagonal (`d` diagonal, `e` sub-diagonal).
/// When `z` is given (column-major n x n) it is updated with the rotations.
pub fn tridiagonal_ql(d: &mut [f64], e: &[f64], mut z: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    let mut e: Vec<f64> = e.iter().copied().chain(std::iter::once(0.0)).collect();
    e.truncate(n);
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    let max_iter = 30 * n.max(10);
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > max_iter {
                    return Err(Error::NoConvergence {
                        max_residual: e[l].abs(),
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = z.as_deref_mut() {
                        let (lo, hi) = z.split_at_mut((i + 1) * n);
                        let zi = &mut lo[i * n..];
                        let zi1 = &mut hi[..n];
                        for k in 0..n {
                            let h = zi1[k];
                            zi1[k] = s * zi[k] + c * h;
                            zi[k] = c * zi[k] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Eigenpairs of a real symmetric tridiagonal, ascending.
pub fn tridiagonal_eig(diag: &[f64], sub: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tridiagonal_ql(&mut d, sub, Some(&mut z))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut zs = vec![0.0; n * n];
    for (new, &old) in order.iter().enumerate() {
        zs[new * n..(new + 1) * n].copy_from_slice(&z[old * n..(old + 1) * n]);
    }
    Ok((values, zs))
}

/// Eigenvalues of a real symmetric tridiagonal, ascending.
pub fn tridiagonal_eigenvalues(diag: &[f64], sub: &[f64]) -> Result<Vec<f64>> {
    let mut d = diag.to_vec();
    tridiagonal_ql(&mut d, sub, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

fn real_tridiagonal(red: &Reduction) -> (Vec<f64>, Vec<C64>) {
    // unitary diagonal D with D^H T D real, off-diagonals |e_k|
    let n = red.diag.len();
    let mut phases = vec![ONE; n];
    let mut abs_sub = vec![0.0; n.saturating_sub(1)];
    for k in 0..n.saturating_sub(1) {
        let e = red.sub[k];
        let a = e.norm();
        abs_sub[k] = a;
        phases[k + 1] = if a > 0.0 { phases[k] * (e / a) } else { phases[k] };
    }
    (abs_sub, phases)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &HermitianMatrix) -> Result<Vec<f64>> {
    let red = tridiagonalize(a, false);
    let (abs_sub, _) = real_tridiagonal(&red);
    tridiagonal_eigenvalues(&red.diag, &abs_sub)
}

/// Full eigendecomposition of a Hermitian matrix, eigenvalues ascending and
/// orthonormal eigenvectors as columns.
pub fn hermitian_eig(a: &HermitianMatrix) -> Result<EigenDecomposition> {
    let n = a.dim();
    if n == 0 {
        return Ok(EigenDecomposition {
            values: vec![],
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let red = tridiagonalize(a, true);
    let (abs_sub, phases) = real_tridiagonal(&red);
    let (values, z) = tridiagonal_eig(&red.diag, &abs_sub)?;

    // Q = H_0 H_1 ... accumulated backwards, then scaled by D.
    let mut q = CMatrix::identity(n);
    for (start, v, tau) in red.reflectors.iter().rev() {
        for j in *start..n {
            let col = q.col_mut(j);
            let s: C64 = v
                .iter()
                .zip(&col[*start..])
                .map(|(vi, ci)| vi.conj() * ci)
                .sum::<C64>()
                * *tau;
            if s == ZERO {
                continue;
            }
            for (ci, vi) in col[*start..].iter_mut().zip(v) {
                *ci -= vi * s;
            }
        }
    }
    for (j, ph) in phases.iter().enumerate() {
        for x in q.col_mut(j) {
            *x *= ph;
        }
    }
    let mut vectors = CMatrix::zeros(n, n);
    for j in 0..n {
        let zc = &z[j * n..(j + 1) * n];
        let out = vectors.col_mut(j);
        for (k, &zk) in zc.iter().enumerate() {
            if zk == 0.0 {
                continue;
            }
            for (o, qv) in out.iter_mut().zip(q.col(k)) {
                *o += qv * zk;
            }
        }
    }
    Ok(EigenDecomposition { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> HermitianMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = CMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        HermitianMatrix::symmetrized(m.add(&m.adjoint()))
    }

    fn check(a: &HermitianMatrix, tol: f64) {
        let e = hermitian_eig(a).unwrap();
        let n = a.dim();
        let scale = a.as_matrix().max_abs().max(1.0);
        for w in e.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
        let av = a.as_matrix().matmul(&e.vectors);
        for j in 0..n {
            for i in 0..n {
                let r = av[(i, j)] - e.vectors[(i, j)] * e.values[j];
                assert!(r.norm() < tol * scale * n as f64, "residual {}", r.norm());
            }
        }
        let g = e.vectors.adjoint_mul(&e.vectors);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).norm() < tol * n as f64);
            }
        }
    }

    #[test]
    fn diagonal_input() {
        let a = HermitianMatrix::new(CMatrix::diagonal(&[3.0, -1.0, 2.0])).unwrap();
        let e = hermitian_eig(&a).unwrap();
        assert_eq!(e.values, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn pauli_like() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = ONE;
        m[(0, 1)] = C64::new(0.0, 1.0);
        m[(1, 0)] = C64::new(0.0, -1.0);
        m[(1, 1)] = ONE;
        let e = hermitian_eig(&HermitianMatrix::new(m).unwrap()).unwrap();
        assert!(e.values[0].abs() < 1e-14);
        assert!((e.values[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn random_matrices_decompose() {
        for (n, seed) in [(1, 1), (2, 2), (5, 3), (40, 4), (120, 5)] {
            check(&random_hermitian(n, seed), 1e-12);
        }
    }

    #[test]
    fn dirichlet_second_difference() {
        let n = 100;
        let h = 1.0 / (n as f64 + 1.0);
        let d = vec![2.0 / (h * h); n];
        let e = vec![-1.0 / (h * h); n - 1];
        let vals = tridiagonal_eigenvalues(&d, &e).unwrap();
        for (l, v) in vals.iter().enumerate() {
            let th = (l as f64 + 1.0) * std::f64::consts::PI / (n as f64 + 1.0);
            let exact = (2.0 - 2.0 * th.cos()) / (h * h);
            assert!((v - exact).abs() <= 1e-10 * exact);
        }
    }

    #[test]
    fn complex_tridiagonal_phases() {
        let n = 6;
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(i as f64, 0.0);
            if i + 1 < n {
                let z = C64::from_polar(1.0, 0.3 * i as f64 + 0.1);
                m[(i + 1, i)] = z;
                m[(i, i + 1)] = z.conj();
            }
        }
        check(&HermitianMatrix::new(m).unwrap(), 1e-13);
    }
}
