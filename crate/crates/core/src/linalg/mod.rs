//! Dense complex linear algebra for small operators: matrices and vectors,
//! Hermitian eigendecomposition, unitary matrix exponentials, and
//! tolerance-based structural checks.
//!
//! Everything here is immutable after construction and safe to share across
//! threads.

mod eigen;
mod matrix;
mod vector;

pub use eigen::{
    eig_hermitian, hermitian_fn, hermiticity_residual, unitary_exp, HermitianEigenSystem,
};
pub use matrix::ComplexMatrix;
pub use vector::ComplexVector;

/// Tolerance for structure detection (Hermitian / anti-Hermitian / unitary /
/// zero flags and Hermiticity preconditions).
pub const STRUCTURE_TOL: f64 = 1e-10;

/// Tolerance for unitarity of constructed exponentials and assembled blocks.
pub const UNITARY_TOL: f64 = 1e-12;

/// Split an operator into its Hermitian and anti-Hermitian parts:
/// `S = (M + M†)/2`, `A = (M - M†)/2`, with `S + A = M` exactly.
pub fn hermitian_split(m: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let half = num_complex::Complex64::new(0.5, 0.0);
    let adj = m.adjoint();
    let s = (m + &adj).scale(half);
    let a = (m - &adj).scale(half);
    (s, a)
}

/// Structural flags of a square matrix, each true iff the corresponding
/// residual max-abs is at most [`STRUCTURE_TOL`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructureFlags {
    pub is_hermitian: bool,
    pub is_anti_hermitian: bool,
    pub is_unitary: bool,
    pub is_zero: bool,
}

/// Max-abs of `X†X - I`.
pub fn unitarity_residual(x: &ComplexMatrix) -> f64 {
    x.adjoint()
        .matmul(x)
        .max_abs_diff(&ComplexMatrix::identity(x.dim()))
}

/// Detect Hermitian / anti-Hermitian / unitary / zero structure.
pub fn structure_checks(x: &ComplexMatrix) -> StructureFlags {
    let adj = x.adjoint();
    StructureFlags {
        is_hermitian: x.max_abs_diff(&adj) <= STRUCTURE_TOL,
        is_anti_hermitian: (x + &adj).max_abs() <= STRUCTURE_TOL,
        is_unitary: unitarity_residual(x) <= STRUCTURE_TOL,
        is_zero: x.max_abs() <= STRUCTURE_TOL,
    }
}

/// Block-diagonal matrix from the given square blocks, in order.
pub fn block_diag(blocks: &[&ComplexMatrix]) -> ComplexMatrix {
    let total: usize = blocks.iter().map(|b| b.dim()).sum();
    let mut out = ComplexMatrix::zeros(total);
    let mut offset = 0;
    for b in blocks {
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                out.set(offset + i, offset + j, b.get(i, j));
            }
        }
        offset += b.dim();
    }
    out
}
