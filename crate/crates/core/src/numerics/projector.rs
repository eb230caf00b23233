use super::dense::{axpy, dot, CMatrix, HermitianMatrix, C64};

/// Orthogonal projector `Q Q^H` stored through an orthonormal basis `Q`.
#[derive(Clone, Debug)]
pub struct Projector {
    basis: CMatrix,
    /// Interval the projector was built for, if spectral.
    pub interval: Option<(f64, f64)>,
    /// Eigenvalues attached to the basis columns, if spectral.
    pub values: Vec<f64>,
}

impl Projector {
    /// `basis` must have orthonormal columns.
    pub fn from_basis(basis: CMatrix) -> Self {
        Projector {
            basis,
            interval: None,
            values: vec![],
        }
    }

    pub fn spectral(basis: CMatrix, values: Vec<f64>, interval: (f64, f64)) -> Self {
        Projector {
            basis,
            interval: Some(interval),
            values,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Projector::from_basis(CMatrix::zeros(dim, 0))
    }

    /// Projector onto coordinate vectors.
    pub fn coordinate(dim: usize, indices: &[usize]) -> Self {
        let mut q = CMatrix::zeros(dim, indices.len());
        for (j, &i) in indices.iter().enumerate() {
            q[(i, j)] = C64::new(1.0, 0.0);
        }
        Projector::from_basis(q)
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        for q in self.basis.columns() {
            let c = dot(q, x);
            axpy(c, q, &mut y);
        }
        y
    }

    /// `(I - P) x`.
    pub fn apply_complement(&self, x: &[C64]) -> Vec<C64> {
        let mut y = x.to_vec();
        for q in self.basis.columns() {
            let c = dot(q, x);
            axpy(-c, q, &mut y);
        }
        y
    }

    pub fn to_dense(&self) -> HermitianMatrix {
        HermitianMatrix::symmetrized(self.basis.matmul(&self.basis.adjoint()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idempotent_and_complementary() {
        let p = Projector::coordinate(4, &[1, 3]);
        let x: Vec<C64> = (0..4).map(|i| C64::new(i as f64 + 1.0, 0.5)).collect();
        let px = p.apply(&x);
        let ppx = p.apply(&px);
        let qx = p.apply_complement(&x);
        for i in 0..4 {
            assert_eq!(px[i], ppx[i]);
            assert_eq!(px[i] + qx[i], x[i]);
        }
        assert_eq!(p.rank(), 2);
    }
}
