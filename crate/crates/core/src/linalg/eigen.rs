//! Hermitian eigendecomposition via cyclic complex Jacobi rotations.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::matrix::ComplexMatrix;
use crate::linalg::STRUCTURE_TOL;

const MAX_SWEEPS: usize = 64;

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are real and sorted ascending; eigenvectors are the columns of
/// a unitary matrix, each phased so that its largest-magnitude component
/// (first such component on ties) is real and positive. The decomposition is
/// deterministic for a given input.
#[derive(Debug, Clone)]
pub struct HermitianEigenSystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEigenSystem {
    /// Rebuild `V · diag(f(λ)) · V†` for a scalar function `f` of the
    /// eigenvalues.
    pub fn apply_fn(&self, mut f: impl FnMut(f64) -> Complex64) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let fvals: Vec<Complex64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        ComplexMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| v.get(i, k) * fvals[k] * v.get(j, k).conj())
                .sum()
        })
    }

    /// Reconstruct the original matrix.
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply_fn(|l| Complex64::new(l, 0.0))
    }
}

/// Max-abs of `H - H†`.
pub fn hermiticity_residual(h: &ComplexMatrix) -> f64 {
    h.max_abs_diff(&h.adjoint())
}

/// Eigendecomposition of a Hermitian matrix.
///
/// The input must be Hermitian within [`STRUCTURE_TOL`] (max-abs of `H - H†`);
/// it is symmetrized exactly before iterating so the decomposition only sees
/// the Hermitian part.
pub fn eig_hermitian(h: &ComplexMatrix) -> Result<HermitianEigenSystem> {
    let residual = hermiticity_residual(h);
    if residual > STRUCTURE_TOL {
        return Err(Error::NotHermitian {
            residual,
            tol: STRUCTURE_TOL,
        });
    }
    let n = h.dim();
    let mut a = (h + &h.adjoint()).scale(Complex64::new(0.5, 0.0));
    let mut v = ComplexMatrix::identity(n);

    let scale = a.max_abs().max(1.0);
    let threshold = scale * f64::EPSILON;

    let mut converged = false;
    let mut last_off = 0.0;
    for _ in 0..MAX_SWEEPS {
        let off = max_off_diagonal(&a);
        last_off = off;
        if off <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.norm() <= threshold * 1e-2 {
                    continue;
                }
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged && max_off_diagonal(&a) > threshold * 1e3 {
        return Err(Error::NoConvergence {
            sweeps: MAX_SWEEPS,
            off_diag: last_off,
        });
    }

    // Sort ascending by eigenvalue, stable in the Jacobi output order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).re.partial_cmp(&a.get(j, j).re).unwrap());

    let eigenvalues: Vec<f64> = order.iter().map(|&k| a.get(k, k).re).collect();
    let mut vecs = ComplexMatrix::zeros(n);
    for (col, &k) in order.iter().enumerate() {
        // Phase convention: first largest-magnitude component real-positive.
        let mut best = 0;
        let mut best_mag = 0.0;
        for i in 0..n {
            let mag = v.get(i, k).norm();
            if mag > best_mag + 1e-14 {
                best_mag = mag;
                best = i;
            }
        }
        let pivot = v.get(best, k);
        let phase = if pivot.norm() > 0.0 {
            pivot.conj() / pivot.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            vecs.set(i, col, v.get(i, k) * phase);
        }
    }

    Ok(HermitianEigenSystem {
        eigenvalues,
        eigenvectors: vecs,
    })
}

fn max_off_diagonal(a: &ComplexMatrix) -> f64 {
    let n = a.dim();
    let mut m = 0.0f64;
    for p in 0..n {
        for q in (p + 1)..n {
            m = m.max(a.get(p, q).norm());
        }
    }
    m
}

/// One Jacobi rotation zeroing the (p, q) entry of the Hermitian matrix `a`,
/// with the same right-rotation accumulated into `v`.
fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let n = a.dim();
    let apq = a.get(p, q);
    let mag = apq.norm();
    let phase = apq / mag; // e^{i arg(a_pq)}
    let app = a.get(p, p).re;
    let aqq = a.get(q, q).re;

    let tau = (app - aqq) / (2.0 * mag);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // G = I except g_pp = c, g_pq = -s·e^{iφ}, g_qp = s·e^{-iφ}, g_qq = c;
    // a ← G† a G, v ← v G.
    let se_pos = s * phase; // s·e^{iφ}
    let se_neg = s * phase.conj(); // s·e^{-iφ}

    // Right multiplication: columns p and q of a and v.
    for i in 0..n {
        let aip = a.get(i, p);
        let aiq = a.get(i, q);
        a.set(i, p, aip * c + aiq * se_neg);
        a.set(i, q, aiq * c - aip * se_pos);

        let vip = v.get(i, p);
        let viq = v.get(i, q);
        v.set(i, p, vip * c + viq * se_neg);
        v.set(i, q, viq * c - vip * se_pos);
    }
    // Left multiplication by G†: rows p and q of a.
    for j in 0..n {
        let apj = a.get(p, j);
        let aqj = a.get(q, j);
        a.set(p, j, apj * c + aqj * se_pos);
        a.set(q, j, aqj * c - apj * se_neg);
    }

    // Kill round-off on the zeroed pair and keep the diagonal real.
    a.set(p, q, Complex64::new(0.0, 0.0));
    a.set(q, p, Complex64::new(0.0, 0.0));
    let dp = a.get(p, p);
    let dq = a.get(q, q);
    a.set(p, p, Complex64::new(dp.re, 0.0));
    a.set(q, q, Complex64::new(dq.re, 0.0));
}

/// Unitary exponential `e^{-iθH}` of a Hermitian matrix.
pub fn unitary_exp(h: &ComplexMatrix, theta: f64) -> Result<ComplexMatrix> {
    hermitian_fn(h, |l| Complex64::from_polar(1.0, -theta * l))
}

/// Apply a scalar function to a Hermitian matrix through its
/// eigendecomposition: `f(H) = V · diag(f(λ)) · V†`.
pub fn hermitian_fn(
    h: &ComplexMatrix,
    f: impl FnMut(f64) -> Complex64,
) -> Result<ComplexMatrix> {
    Ok(eig_hermitian(h)?.apply_fn(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{unitarity_residual, UNITARY_TOL};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(n: usize, rng: &mut StdRng) -> ComplexMatrix {
        let raw = ComplexMatrix::from_fn(n, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        (&raw + &raw.adjoint()).scale(c(0.5, 0.0))
    }

    #[test]
    fn diagonal_matrix_sorted_ascending() {
        let h = ComplexMatrix::from_diagonal(&[c(2.0, 0.0), c(1.0, 0.0)]);
        let sys = eig_hermitian(&h).unwrap();
        assert!((sys.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((sys.eigenvalues[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn pauli_x_eigensystem() {
        let x = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let sys = eig_hermitian(&x).unwrap();
        assert!((sys.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((sys.eigenvalues[1] - 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // Phase convention makes the first column (|0⟩ - |1⟩)/√2 and the
        // second (|0⟩ + |1⟩)/√2.
        assert!((sys.eigenvectors.get(0, 0) - c(s, 0.0)).norm() < 1e-12);
        assert!((sys.eigenvectors.get(1, 0) - c(-s, 0.0)).norm() < 1e-12);
        assert!((sys.eigenvectors.get(0, 1) - c(s, 0.0)).norm() < 1e-12);
        assert!((sys.eigenvectors.get(1, 1) - c(s, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn split_example_eigenvalues() {
        let s = ComplexMatrix::from_real_rows(&[vec![0.0, 0.3], vec![0.3, 0.0]]).unwrap();
        let sys = eig_hermitian(&s).unwrap();
        assert!((sys.eigenvalues[0] + 0.3).abs() < 1e-14);
        assert!((sys.eigenvalues[1] - 0.3).abs() < 1e-14);
    }

    #[test]
    fn reconstruction_and_orthonormality_random() {
        let mut rng = StdRng::seed_from_u64(7);
        for n in [2usize, 3, 4, 8] {
            let h = random_hermitian(n, &mut rng);
            let sys = eig_hermitian(&h).unwrap();
            assert!(sys.reconstruct().max_abs_diff(&h) <= 1e-12, "n = {n}");
            assert!(
                unitarity_residual(&sys.eigenvectors) <= 1e-12,
                "eigenvectors not unitary for n = {n}"
            );
            for w in sys.eigenvalues.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            eig_hermitian(&m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn unitary_exp_of_zero_is_identity() {
        let z = ComplexMatrix::zeros(3);
        let u = unitary_exp(&z, 0.73).unwrap();
        assert!(u.max_abs_diff(&ComplexMatrix::identity(3)) < 1e-14);
    }

    #[test]
    fn unitary_exp_of_pauli_z_quarter_turn() {
        let z = ComplexMatrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let u = unitary_exp(&z, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((u.get(0, 0) - c(0.0, -1.0)).norm() < 1e-14);
        assert!((u.get(1, 1) - c(0.0, 1.0)).norm() < 1e-14);
    }

    /// Term-truncated Taylor series of e^{X}, used as an independent oracle.
    fn taylor_exp(x: &ComplexMatrix, terms: usize) -> ComplexMatrix {
        let mut sum = ComplexMatrix::identity(x.dim());
        let mut power = ComplexMatrix::identity(x.dim());
        let mut factorial = 1.0;
        for k in 1..=terms {
            power = power.matmul(x);
            factorial *= k as f64;
            sum = &sum + &power.scale(c(1.0 / factorial, 0.0));
        }
        sum
    }

    #[test]
    fn exp_of_antihermitian_matches_taylor_oracle_and_rotation() {
        // A = [[0, 0.3], [-0.3, 0]];  e^{εA} computed as e^{-iε(iA)}.
        let a = ComplexMatrix::from_real_rows(&[vec![0.0, 0.3], vec![-0.3, 0.0]]).unwrap();
        let eps = 0.47;
        let ia = a.scale(c(0.0, 1.0));
        let got = unitary_exp(&ia, eps).unwrap();

        let oracle = taylor_exp(&a.scale(c(eps, 0.0)), 30);
        assert!(got.max_abs_diff(&oracle) <= 1e-12);

        let (cth, sth) = ((0.3 * eps).cos(), (0.3 * eps).sin());
        let rot =
            ComplexMatrix::from_real_rows(&[vec![cth, sth], vec![-sth, cth]]).unwrap();
        assert!(got.max_abs_diff(&rot) <= 1e-12);
    }

    #[test]
    fn unitary_exp_inverse_property() {
        let mut rng = StdRng::seed_from_u64(99);
        for _ in 0..20 {
            let h = random_hermitian(4, &mut rng);
            let theta: f64 = rng.gen_range(-2.0..2.0);
            let u = unitary_exp(&h, theta).unwrap();
            let uinv = unitary_exp(&h, -theta).unwrap();
            let prod = u.matmul(&uinv);
            assert!(prod.max_abs_diff(&ComplexMatrix::identity(4)) <= 1e-12);
            assert!(unitarity_residual(&u) <= UNITARY_TOL);
        }
    }
}
