use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::dense::{norm, normalize, CMatrix, HermitianMatrix, C64};

/// Matrix-free linear operator on `C^dim`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[C64]) -> Vec<C64>;

    fn apply_columns(&self, q: &CMatrix) -> CMatrix {
        let cols: Vec<Vec<C64>> = (0..q.cols())
            .into_par_iter()
            .map(|j| self.apply(q.col(j)))
            .collect();
        CMatrix::from_columns(self.dim(), &cols).expect("operator output has dim rows")
    }

    /// Dense representation, column by column.
    fn to_matrix(&self) -> CMatrix {
        self.apply_columns(&CMatrix::identity(self.dim()))
    }
}

impl LinearOperator for HermitianMatrix {
    fn dim(&self) -> usize {
        HermitianMatrix::dim(self)
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.as_matrix().mul_vec(x)
    }
}

impl LinearOperator for CMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.mul_vec(x)
    }
}

/// Sum of two operators, `a + t * b`.
pub struct SumOperator<'a, A: ?Sized, B: ?Sized> {
    pub a: &'a A,
    pub b: &'a B,
    pub t: f64,
}

impl<A: LinearOperator + ?Sized, B: LinearOperator + ?Sized> LinearOperator for SumOperator<'_, A, B> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = self.a.apply(x);
        if self.t != 0.0 {
            for (yi, bi) in y.iter_mut().zip(self.b.apply(x)) {
                *yi += bi * self.t;
            }
        }
        y
    }
}

/// `Q^H i[A, S] Q` for Hermitian `A`, `S` given the images `AQ` and `SQ`.
pub fn commutator_from_images(aq: &CMatrix, sq: &CMatrix) -> HermitianMatrix {
    let x = aq.adjoint_mul(sq);
    let i = C64::new(0.0, 1.0);
    HermitianMatrix::symmetrized(x.sub(&x.adjoint()).scale(i))
}

/// `Q^H i[A, S] Q` for Hermitian operators `A`, `S`.
pub fn compressed_commutator<A, S>(a: &A, s: &S, q: &CMatrix) -> HermitianMatrix
where
    A: LinearOperator + ?Sized,
    S: LinearOperator + ?Sized,
{
    commutator_from_images(&a.apply_columns(q), &s.apply_columns(q))
}

/// Largest singular value of `K`, by power iteration on `K^H K`.
///
/// `apply` and `apply_adjoint` act on vectors of length `dim`. Stops when the
/// estimate changes by less than `rtol` relative, or after `max_iter` steps.
pub fn norm_estimate(
    dim: usize,
    apply: impl Fn(&[C64]) -> Vec<C64>,
    apply_adjoint: impl Fn(&[C64]) -> Vec<C64>,
    max_iter: usize,
    rtol: f64,
    seed: u64,
) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    normalize(&mut x);
    let mut est = 0.0;
    for _ in 0..max_iter {
        let kx = apply(&x);
        let new = norm(&kx);
        if new == 0.0 {
            return 0.0;
        }
        let mut y = apply_adjoint(&kx);
        normalize(&mut y);
        x = y;
        if (new - est).abs() <= rtol * new {
            est = new;
            break;
        }
        est = new;
    }
    est
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commutator_of_diagonal_with_itself_vanishes() {
        let a = HermitianMatrix::new(CMatrix::diagonal(&[1.0, 2.0, 3.0])).unwrap();
        let c = compressed_commutator(&a, &a, &CMatrix::identity(3));
        assert!(c.as_matrix().max_abs() < 1e-15);
    }

    #[test]
    fn commutator_matches_dense_formula() {
        let a = HermitianMatrix::from_real_symmetric(3, |i, j| (i + j) as f64).unwrap();
        let mut s = CMatrix::zeros(3, 3);
        s[(0, 1)] = C64::new(0.0, 1.0);
        s[(1, 0)] = C64::new(0.0, -1.0);
        s[(2, 2)] = C64::new(2.0, 0.0);
        let s = HermitianMatrix::new(s).unwrap();
        let c = compressed_commutator(&a, &s, &CMatrix::identity(3));
        let am = a.as_matrix();
        let sm = s.as_matrix();
        let want = am.matmul(sm).sub(&sm.matmul(am)).scale(C64::new(0.0, 1.0));
        assert!(c.as_matrix().sub(&want).max_abs() < 1e-14);
    }

    #[test]
    fn power_iteration_finds_top_singular_value() {
        let m = CMatrix::from_real(3, 3, |i, j| if i == j { [1.0, 4.0, 2.0][i] } else { 0.0 });
        let adj = m.adjoint();
        let est = norm_estimate(3, |x| m.mul_vec(x), |x| adj.mul_vec(x), 200, 1e-14, 7);
        assert!((est - 4.0).abs() < 1e-8);
    }
}
