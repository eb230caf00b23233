//! Dense non-Hermitian eigensolver: Householder Hessenberg reduction,
//! single-shift complex QR to Schur form, triangular back-substitution for
//! eigenvectors.

use super::dense::{dot, norm, CMatrix, ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Eigenpairs of a general square matrix.
#[derive(Clone, Debug)]
pub struct GeneralEigenDecomposition {
    /// Sorted by real part, then imaginary part.
    pub values: Vec<C64>,
    /// Unit-norm right eigenvectors as columns.
    pub vectors: CMatrix,
    /// Set when coincident eigenvalues share a numerically parallel eigenvector.
    pub defective: bool,
    /// `max_i |A v_i - z_i v_i|`.
    pub max_residual: f64,
}

fn hessenberg(a: &mut CMatrix, z: &mut CMatrix) {
    let n = a.rows();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|i| a[(i, k)]).collect();
        let xnorm = norm(&x);
        if norm(&x[1..]) == 0.0 || xnorm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { C64::new(1.0, 0.0) };
        let mut v = x;
        v[0] += phase * xnorm;
        let tau = 2.0 / v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        // A <- P A
        for j in 0..n {
            let s: C64 = (0..v.len()).map(|i| v[i].conj() * a[(k + 1 + i, j)]).sum::<C64>() * tau;
            for i in 0..v.len() {
                a[(k + 1 + i, j)] -= v[i] * s;
            }
        }
        // A <- A P and Z <- Z P
        for m in [&mut *a, &mut *z] {
            for i in 0..n {
                let s: C64 = (0..v.len()).map(|j| m[(i, k + 1 + j)] * v[j]).sum::<C64>() * tau;
                for j in 0..v.len() {
                    m[(i, k + 1 + j)] -= s * v[j].conj();
                }
            }
        }
        for i in k + 2..n {
            a[(i, k)] = ZERO;
        }
    }
}

fn givens(x: C64, y: C64) -> (f64, C64) {
    if y == ZERO {
        return (1.0, ZERO);
    }
    let ax = x.norm();
    let r = ax.hypot(y.norm());
    if ax == 0.0 {
        return (0.0, y.conj() / y.norm());
    }
    (ax / r, (x / ax) * y.conj() / r)
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let tr = 0.5 * (a + d);
    let det = a * d - b * c;
    let disc = (tr * tr - det).sqrt();
    let (l1, l2) = (tr + disc, tr - disc);
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn schur(h: &mut CMatrix, z: &mut CMatrix) -> Result<()> {
    let n = h.rows();
    if n == 0 {
        return Ok(());
    }
    let eps = f64::EPSILON;
    let scale = h.max_abs().max(f64::MIN_POSITIVE);
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    let budget = 60 * n.max(4);
    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let s = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            let s = if s == 0.0 { scale } else { s };
            if h[(lo, lo - 1)].norm() <= eps * s {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > budget {
            return Err(Error::NoConvergence {
                max_residual: h[(hi, hi - 1)].norm(),
            });
        }
        let mu = if iter % 11 == 10 {
            h[(hi, hi)] + C64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        let mut x = h[(lo, lo)] - mu;
        let mut y = h[(lo + 1, lo)];
        for k in lo..hi {
            let (c, s) = givens(x, y);
            let j0 = if k > lo { k - 1 } else { lo };
            for j in j0..n {
                let (a, b) = (h[(k, j)], h[(k + 1, j)]);
                h[(k, j)] = a * c + s * b;
                h[(k + 1, j)] = -s.conj() * a + b * c;
            }
            let imax = (k + 2).min(hi);
            for i in 0..=imax {
                let (a, b) = (h[(i, k)], h[(i, k + 1)]);
                h[(i, k)] = a * c + b * s.conj();
                h[(i, k + 1)] = -a * s + b * c;
            }
            for i in 0..n {
                let (a, b) = (z[(i, k)], z[(i, k + 1)]);
                z[(i, k)] = a * c + b * s.conj();
                z[(i, k + 1)] = -a * s + b * c;
            }
            if k + 1 < hi {
                x = h[(k + 1, k)];
                y = h[(k + 2, k)];
            }
        }
    }
    Ok(())
}

/// Eigenvalues and right eigenvectors of a general complex matrix.
pub fn general_eig(a: &ComplexMatrix) -> Result<GeneralEigenDecomposition> {
    let n = a.dim();
    let am = a.as_matrix();
    let mut h = am.clone();
    let mut z = CMatrix::identity(n);
    hessenberg(&mut h, &mut z);
    schur(&mut h, &mut z)?;

    let tnorm = h.max_abs().max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * tnorm;
    let mut pairs: Vec<(C64, Vec<C64>)> = Vec::with_capacity(n);
    for i in 0..n {
        let li = h[(i, i)];
        let mut x = vec![ZERO; n];
        x[i] = C64::new(1.0, 0.0);
        for j in (0..i).rev() {
            let s: C64 = (j + 1..=i).map(|l| h[(j, l)] * x[l]).sum();
            let mut d = h[(j, j)] - li;
            if d.norm() < small {
                d = C64::new(small, 0.0);
            }
            x[j] = -s / d;
            // rescale to avoid overflow on near-defective input
            let m = x.iter().fold(0.0f64, |m, v| m.max(v.norm()));
            if m > 1e100 {
                for v in x.iter_mut() {
                    *v /= m;
                }
            }
        }
        let mut v = z.mul_vec(&x);
        let nv = norm(&v);
        for e in v.iter_mut() {
            *e /= nv;
        }
        pairs.push((li, v));
    }
    pairs.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));

    let anorm = am.spectral_norm();
    let mut max_residual: f64 = 0.0;
    for (l, v) in &pairs {
        let av = am.mul_vec(v);
        let r = av.iter().zip(v).map(|(p, q)| (p - q * l).norm_sqr()).sum::<f64>().sqrt();
        max_residual = max_residual.max(r);
    }
    if max_residual > 1e-8 * anorm.max(f64::MIN_POSITIVE) {
        return Err(Error::NoConvergence { max_residual });
    }

    let cluster = 1e-6 * anorm.max(1.0);
    let mut defective = false;
    for i in 0..n {
        for j in i + 1..n {
            if (pairs[i].0 - pairs[j].0).norm() <= cluster
                && dot(&pairs[i].1, &pairs[j].1).norm() >= 1.0 - 1e-6
            {
                defective = true;
            }
        }
    }
    let cols: Vec<Vec<C64>> = pairs.iter().map(|p| p.1.clone()).collect();
    Ok(GeneralEigenDecomposition {
        values: pairs.iter().map(|p| p.0).collect(),
        vectors: CMatrix::from_columns(n, &cols)?,
        defective,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn diagonal_imaginary_pair() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(0.0, 1.0);
        m[(1, 1)] = c(0.0, -1.0);
        let e = general_eig(&ComplexMatrix::new(m).unwrap()).unwrap();
        assert_eq!(e.values, vec![c(0.0, -1.0), c(0.0, 1.0)]);
        assert!(!e.defective);
    }

    #[test]
    fn jordan_block_is_flagged() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = c(1.0, 0.0);
        let e = general_eig(&ComplexMatrix::new(m).unwrap()).unwrap();
        assert!(e.values.iter().all(|v| v.norm() < 1e-12));
        assert!(e.defective);
    }

    #[test]
    fn rotation_has_unit_circle_eigenvalues() {
        let t: f64 = 0.7;
        let m = CMatrix::from_real(2, 2, |i, j| match (i, j) {
            (0, 0) | (1, 1) => t.cos(),
            (0, 1) => -t.sin(),
            _ => t.sin(),
        });
        let e = general_eig(&ComplexMatrix::new(m).unwrap()).unwrap();
        assert!((e.values[0] - C64::from_polar(1.0, -t)).norm() < 1e-14);
        assert!((e.values[1] - C64::from_polar(1.0, t)).norm() < 1e-14);
    }

    #[test]
    fn upper_triangular_keeps_diagonal() {
        let m = CMatrix::from_fn(4, 4, |i, j| if i <= j { c((i + 2 * j) as f64, (j as f64) - 1.0) } else { ZERO });
        let e = general_eig(&ComplexMatrix::new(m.clone()).unwrap()).unwrap();
        for i in 0..4 {
            assert!(e.values.iter().any(|v| (v - m[(i, i)]).norm() < 1e-12));
        }
    }
}
