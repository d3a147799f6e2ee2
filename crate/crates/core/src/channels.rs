//! Kraus channels for generalized amplitude damping, the exact classical
//! operator-sum oracle, and initial-state ensemble decomposition.
//!
//! A channel maps `ρ → Σ_i M_i ρ M_i†` with the completeness condition
//! `Σ_i M_i† M_i = I`. The damping family is parameterized by a decay rate γ,
//! a time t and an equilibrium parameter λ ∈ [0, 1]; λ = 1 is the
//! zero-temperature limit and λ = 1/2 the infinite-temperature one. The
//! temperature knob is the dimensionless β with λ = 1/(1 + e^{-β}); no
//! physical-unit temperature input exists.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, ComplexMatrix, ComplexVector};

/// Name of the zero-temperature damping preset.
pub const PRESET_ZERO_T: &str = "amp-damp-zero-T";
/// Name of the infinite-temperature damping preset.
pub const PRESET_INFINITE_T: &str = "amp-damp-infinite-T";

/// A list of Kraus operators.
#[derive(Debug, Clone, Serialize)]
pub struct KrausChannel {
    label: String,
    operators: Vec<ComplexMatrix>,
}

impl KrausChannel {
    /// Build a channel from operators of equal dimension. Completeness is not
    /// enforced here; use [`KrausChannel::cptp_check`] to measure it.
    pub fn new(label: impl Into<String>, operators: Vec<ComplexMatrix>) -> Result<Self> {
        if operators.is_empty() {
            return Err(Error::invalid("operators", "need at least one operator"));
        }
        let dim = operators[0].dim();
        for op in &operators {
            if op.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: op.dim(),
                });
            }
            if !op.is_finite() {
                return Err(Error::NonFinite("Kraus operator entries"));
            }
        }
        Ok(Self {
            label: label.into(),
            operators,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.operators[0].dim()
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    /// Completeness residual: max-abs of `Σ M_i† M_i - I`.
    pub fn cptp_check(&self) -> f64 {
        let mut sum = ComplexMatrix::zeros(self.dim());
        for op in &self.operators {
            sum = &sum + &op.adjoint().matmul(op);
        }
        sum.max_abs_diff(&ComplexMatrix::identity(self.dim()))
    }
}

/// Parameters of the generalized amplitude damping channel.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GadParams {
    gamma: f64,
    lambda: f64,
    t: f64,
}

impl GadParams {
    /// `gamma` is the decay rate in s⁻¹, `lambda ∈ [0, 1]` the equilibrium
    /// parameter, `t` the time in seconds.
    pub fn new(gamma: f64, lambda: f64, t: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::invalid("gamma", format!("must be >= 0, got {gamma}")));
        }
        if !(0.0..=1.0).contains(&lambda) || lambda.is_nan() {
            return Err(Error::invalid(
                "lambda",
                format!("must be in [0, 1], got {lambda}"),
            ));
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::invalid("t", format!("must be >= 0, got {t}")));
        }
        Ok(Self { gamma, lambda, t })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn t(&self) -> f64 {
        self.t
    }
}

/// The four Kraus operators of the generalized amplitude damping channel
/// with survival amplitude `η = e^{-γt}`:
///
/// ```text
/// M0 = √λ     [[1, 0     ], [0,      √η]]
/// M1 = √λ     [[0, √(1-η)], [0,      0 ]]
/// M2 = √(1-λ) [[√η, 0    ], [0,      1 ]]
/// M3 = √(1-λ) [[0,  0    ], [√(1-η), 0 ]]
/// ```
///
/// At λ = 1 only M0 and M1 are nonzero; the operators always satisfy
/// completeness exactly (up to rounding).
pub fn gad_kraus(params: &GadParams) -> KrausChannel {
    let eta = (-params.gamma * params.t).exp();
    let sqrt_eta = eta.sqrt();
    let sqrt_1m_eta = (1.0 - eta).max(0.0).sqrt();
    let sl = params.lambda.sqrt();
    let sm = (1.0 - params.lambda).max(0.0).sqrt();

    let m0 = ComplexMatrix::from_real_rows(&[vec![sl, 0.0], vec![0.0, sl * sqrt_eta]]);
    let m1 = ComplexMatrix::from_real_rows(&[vec![0.0, sl * sqrt_1m_eta], vec![0.0, 0.0]]);
    let m2 = ComplexMatrix::from_real_rows(&[vec![sm * sqrt_eta, 0.0], vec![0.0, sm]]);
    let m3 = ComplexMatrix::from_real_rows(&[vec![0.0, 0.0], vec![sm * sqrt_1m_eta, 0.0]]);

    KrausChannel::new(
        format!("amp-damp(lambda={}, gamma={}, t={})", params.lambda, params.gamma, params.t),
        vec![m0.unwrap(), m1.unwrap(), m2.unwrap(), m3.unwrap()],
    )
    .expect("static 2x2 operators")
}

/// Equilibrium parameter from the dimensionless inverse temperature:
/// `λ = 1/(1 + e^{-β})`. `β = 0` gives 1/2 (infinite temperature) and
/// `β = +∞` is accepted as the zero-temperature sentinel giving 1.
pub fn lambda_from_beta(beta: f64) -> Result<f64> {
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::invalid("beta", format!("must be >= 0, got {beta}")));
    }
    if beta.is_infinite() {
        return Ok(1.0);
    }
    Ok(1.0 / (1.0 + (-beta).exp()))
}

/// A density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, Serialize)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let herm = matrix.max_abs_diff(&matrix.adjoint());
        if herm > 1e-12 {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian: residual {herm:.3e}"
            )));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > 1e-12 || trace.im.abs() > 1e-12 {
            return Err(Error::InvalidDensityMatrix(format!(
                "trace must be 1, got {trace}"
            )));
        }
        let eig = eig_hermitian(&matrix)?;
        if let Some(&min) = eig
            .eigenvalues
            .first()
            .filter(|&&l| l < -1e-10)
        {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Real diagonal (the basis populations).
    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }
}

/// The mixed state shipped as the benchmark initial condition,
/// `(1/4)[[1, 1], [1, 3]]`.
pub fn benchmark_initial_state() -> DensityMatrix {
    DensityMatrix::new(
        ComplexMatrix::from_real_rows(&[vec![0.25, 0.25], vec![0.25, 0.75]]).unwrap(),
    )
    .expect("static density matrix")
}

/// Evolve a density matrix through the operator sum: `ρ(t) = Σ M_i ρ M_i†`.
pub fn kraus_evolve_oracle(rho0: &DensityMatrix, channel: &KrausChannel) -> Result<DensityMatrix> {
    if channel.dim() != rho0.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho0.dim(),
            actual: channel.dim(),
        });
    }
    let mut out = ComplexMatrix::zeros(rho0.dim());
    for op in channel.operators() {
        out = &out + &op.matmul(rho0.matrix()).matmul(&op.adjoint());
    }
    DensityMatrix::new(out)
}

/// A convex mixture of pure states.
#[derive(Debug, Clone, Serialize)]
pub struct Ensemble {
    pub members: Vec<(f64, ComplexVector)>,
}

impl Ensemble {
    pub fn new(members: Vec<(f64, ComplexVector)>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("members", "need at least one member"));
        }
        let total: f64 = members.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "members",
                format!("weights must sum to 1, got {total}"),
            ));
        }
        for (w, state) in &members {
            if *w <= 0.0 {
                return Err(Error::invalid("members", format!("weight {w} not in (0, 1]")));
            }
            if (state.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidState("member state not normalized".into()));
            }
        }
        Ok(Self { members })
    }

    /// `Σ w |ψ⟩⟨ψ|`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let dim = self.members[0].1.dim();
        let mut out = ComplexMatrix::zeros(dim);
        for (w, state) in &self.members {
            out = &out + &state.outer(state).scale(Complex64::new(*w, 0.0));
        }
        out
    }
}

/// Eigendecomposition ensemble of a density matrix: weights are the
/// eigenvalues above 1e-12, largest first, and states the eigenvectors.
pub fn ensemble_decompose(rho: &DensityMatrix) -> Ensemble {
    let eig = eig_hermitian(rho.matrix()).expect("density matrices are Hermitian");
    let n = eig.eigenvalues.len();
    let mut members = Vec::new();
    for k in (0..n).rev() {
        let w = eig.eigenvalues[k];
        if w > 1e-12 {
            let state = ComplexVector::new(
                (0..n).map(|i| eig.eigenvectors.get(i, k)).collect(),
            );
            members.push((w, state));
        }
    }
    Ensemble::new(members).expect("eigenvalues of a density matrix sum to 1")
}

/// The non-orthogonal preset mixture `{(1/2, |+⟩), (1/2, |1⟩)}`, which
/// reconstructs the benchmark initial state exactly.
pub fn plus_excited_ensemble() -> Ensemble {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ensemble::new(vec![
        (0.5, ComplexVector::from_real(&[s, s])),
        (0.5, ComplexVector::from_real(&[0.0, 1.0])),
    ])
    .expect("static ensemble")
}

/// A named damping family: fixes λ, leaves (γ, t) free.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelFamily {
    label: String,
    lambda: f64,
}

impl ChannelFamily {
    /// λ = 1.
    pub fn zero_temperature() -> Self {
        Self {
            label: PRESET_ZERO_T.into(),
            lambda: 1.0,
        }
    }

    /// λ = 1/2.
    pub fn infinite_temperature() -> Self {
        Self {
            label: PRESET_INFINITE_T.into(),
            lambda: 0.5,
        }
    }

    pub fn from_beta(beta: f64) -> Result<Self> {
        Ok(Self {
            label: format!("amp-damp(beta={beta})"),
            lambda: lambda_from_beta(beta)?,
        })
    }

    /// Resolve a preset name: `amp-damp-zero-T`, `amp-damp-infinite-T`, or
    /// `amp-damp(beta=…)`.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            PRESET_ZERO_T => Ok(Self::zero_temperature()),
            PRESET_INFINITE_T => Ok(Self::infinite_temperature()),
            _ => {
                if let Some(rest) = name
                    .strip_prefix("amp-damp(beta=")
                    .and_then(|r| r.strip_suffix(')'))
                {
                    let beta: f64 = rest
                        .parse()
                        .map_err(|_| Error::UnknownPreset(name.to_string()))?;
                    Self::from_beta(beta)
                } else {
                    Err(Error::UnknownPreset(name.to_string()))
                }
            }
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kraus_at(&self, gamma: f64, t: f64) -> Result<KrausChannel> {
        Ok(gad_kraus(&GadParams::new(gamma, self.lambda, t)?))
    }
}
