//! Linear-algebra kernels shared by the model, the conjugate operator and the
//! experiments.

pub mod bordered;
pub mod dense;
pub mod general;
pub mod hermitian;
pub mod operator;
pub mod projector;
pub mod sine;
pub mod solve;

pub use bordered::{eigen_residual, BorderedLu, BorderedMatrix, BorderedTridiagonal};
pub use dense::{axpy, dot, dot_bilinear, norm, normalize, orthonormalize, to_complex, CMatrix, ComplexMatrix, HermitianMatrix, C64, ONE, ZERO};
pub use general::{general_eig, GeneralEigenDecomposition};
pub use hermitian::{hermitian_eig, hermitian_eigenvalues, tridiagonal_eig, tridiagonal_eigenvalues, EigenDecomposition};
pub use operator::{commutator_from_images, compressed_commutator, norm_estimate, LinearOperator, SumOperator};
pub use projector::Projector;
pub use sine::{sine_transform, SineTransform};
pub use solve::{shifted_solve, DenseLu, ShiftedSolve, TridiagonalLu};
