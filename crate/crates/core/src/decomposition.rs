//! Four-unitary representation of an arbitrary operator.
//!
//! Any square operator splits as `M = S + A` with `S` Hermitian and `A`
//! anti-Hermitian. Each part is realized as the average of two unitaries: the
//! block set holds `i·e^{-iεS}`, `-i·e^{+iεS}`, `-e^{-εA}` and `e^{+εA}` (the
//! signs folded in), so that `(1/2ε)·Σ blocks = sin(εS)/ε + sinh(εA)/ε`,
//! which converges to `M` at rate O(ε²). This module also builds the
//! block-diagonal multiplexed operator, the ancilla rotation that adds the
//! prepared branches, and Richardson extrapolation of the ε → 0 limit.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    block_diag, hermitian_fn, hermitian_split, structure_checks, unitary_exp, ComplexMatrix,
};

/// The four unitary blocks, in the order they appear on the diagonal of the
/// multiplexed operator.
///
/// `Minus`/`Plus` refers to the sign of ε in the exponent; the closed forms
/// (with overall signs folded in) are:
/// `HermMinus = i·e^{-iεS}`, `HermPlus = -i·e^{+iεS}`,
/// `AntiMinus = -e^{-εA}`, `AntiPlus = e^{+εA}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BlockLabel {
    HermMinus,
    HermPlus,
    AntiMinus,
    AntiPlus,
}

pub const BLOCK_ORDER: [BlockLabel; 4] = [
    BlockLabel::HermMinus,
    BlockLabel::HermPlus,
    BlockLabel::AntiMinus,
    BlockLabel::AntiPlus,
];

impl BlockLabel {
    fn index(self) -> usize {
        BLOCK_ORDER.iter().position(|&l| l == self).unwrap()
    }
}

/// Whether the source operator was purely Hermitian, purely anti-Hermitian,
/// or general. A pure operator needs only one pair of blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Purity {
    General,
    HermitianOnly,
    AntiHermitianOnly,
}

/// The four unitaries realizing an operator at a given expansion parameter ε.
#[derive(Debug, Clone)]
pub struct UnitaryBlockSet {
    epsilon: f64,
    purity: Purity,
    blocks: Vec<(BlockLabel, ComplexMatrix)>,
}

impl UnitaryBlockSet {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn purity(&self) -> Purity {
        self.purity
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].1.dim()
    }

    pub fn blocks(&self) -> &[(BlockLabel, ComplexMatrix)] {
        &self.blocks
    }

    pub fn block(&self, label: BlockLabel) -> &ComplexMatrix {
        &self.blocks[label.index()].1
    }

    /// `(1/2ε)·Σ blocks`, the operator the circuits realize.
    pub fn block_average(&self) -> ComplexMatrix {
        let mut sum = ComplexMatrix::zeros(self.dim());
        for (_, b) in &self.blocks {
            sum = &sum + b;
        }
        sum.scale(Complex64::new(1.0 / (2.0 * self.epsilon), 0.0))
    }

    /// Test-fixture hook: replace one block. The result may violate the
    /// construction invariants on purpose (mutation tests).
    pub fn with_replaced_block(&self, label: BlockLabel, matrix: ComplexMatrix) -> Self {
        let mut out = self.clone();
        out.blocks[label.index()].1 = matrix;
        out
    }
}

/// The exact operator realized at finite ε: `sin(εS)/ε + sinh(εA)/ε`.
#[derive(Debug, Clone)]
pub struct EffectiveOperator {
    pub matrix: ComplexMatrix,
    pub epsilon: f64,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid(
            "epsilon",
            format!("expansion parameter must be positive, got {epsilon}"),
        ));
    }
    Ok(())
}

/// Build the four unitary blocks for `M` at expansion parameter ε.
pub fn build_block_set(m: &ComplexMatrix, epsilon: f64) -> Result<UnitaryBlockSet> {
    check_epsilon(epsilon)?;
    let (s, a) = hermitian_split(m);
    let purity = if structure_checks(&a).is_zero {
        Purity::HermitianOnly
    } else if structure_checks(&s).is_zero {
        Purity::AntiHermitianOnly
    } else {
        Purity::General
    };

    let i = Complex64::new(0.0, 1.0);
    let ia = a.scale(i); // Hermitian, so e^{±εA} = e^{∓iε(iA)}
    let herm_minus = unitary_exp(&s, epsilon)?.scale(i);
    let herm_plus = unitary_exp(&s, -epsilon)?.scale(-i);
    let anti_minus = unitary_exp(&ia, -epsilon)?.scale(Complex64::new(-1.0, 0.0));
    let anti_plus = unitary_exp(&ia, epsilon)?;

    Ok(UnitaryBlockSet {
        epsilon,
        purity,
        blocks: vec![
            (BlockLabel::HermMinus, herm_minus),
            (BlockLabel::HermPlus, herm_plus),
            (BlockLabel::AntiMinus, anti_minus),
            (BlockLabel::AntiPlus, anti_plus),
        ],
    })
}

/// Exact finite-ε resummation `sin(εS)/ε + sinh(εA)/ε`, computed through the
/// eigendecompositions of `S` and `iA`.
pub fn effective_operator(m: &ComplexMatrix, epsilon: f64) -> Result<EffectiveOperator> {
    check_epsilon(epsilon)?;
    let (s, a) = hermitian_split(m);
    let sin_part = hermitian_fn(&s, |l| Complex64::new((epsilon * l).sin() / epsilon, 0.0))?;
    let ia = a.scale(Complex64::new(0.0, 1.0));
    // sinh(εA) = -i·sin(εH) for H = iA
    let sinh_part = hermitian_fn(&ia, |l| {
        Complex64::new(0.0, -(epsilon * l).sin() / epsilon)
    })?;
    Ok(EffectiveOperator {
        matrix: &sin_part + &sinh_part,
        epsilon,
    })
}

/// Assemble the block-diagonal multiplexed operator of dimension `4·2^n`,
/// with the four blocks on the diagonal in [`BLOCK_ORDER`].
pub fn assemble_full_u(blocks: &UnitaryBlockSet, n_system_qubits: usize) -> Result<ComplexMatrix> {
    let expected = 1usize << n_system_qubits;
    if blocks.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: blocks.dim(),
        });
    }
    let mats: Vec<&ComplexMatrix> = BLOCK_ORDER.iter().map(|&l| blocks.block(l)).collect();
    Ok(block_diag(&mats))
}

/// The 4×4 ancilla-space rotation that adds the four prepared branches.
/// Entries are ±1/2; exactly one row is uniformly +1/2 (the sum branch).
pub fn ancilla_rotation() -> ComplexMatrix {
    let h = 0.5;
    ComplexMatrix::from_real_rows(&[
        vec![h, -h, -h, h],
        vec![h, h, -h, -h],
        vec![h, -h, h, -h],
        vec![h, h, h, h],
    ])
    .expect("static 4x4")
}

/// The full rotation `R ⊗ I_{2^n}` acting on ancilla ⊗ system.
pub fn rotation_r(n_system_qubits: usize) -> ComplexMatrix {
    ancilla_rotation().kron(&ComplexMatrix::identity(1 << n_system_qubits))
}

/// Locate the sum branch: the ancilla row whose entries are all real and
/// positive. Found programmatically rather than hard-coded.
pub fn sum_branch_row(r: &ComplexMatrix) -> Option<usize> {
    (0..r.dim()).find(|&row| {
        (0..r.dim()).all(|col| {
            let z = r.get(row, col);
            z.re > 0.0 && z.im.abs() <= 1e-14
        })
    })
}

/// One Richardson step: combine value vectors measured at `eps1 > eps2 > 0`
/// to eliminate the O(ε^order) error term,
/// `(v(ε₁) - v(ε₂)·rⁿ) / (1 - rⁿ)` with `r = ε₁/ε₂`.
pub fn richardson_step(
    v_eps1: &[f64],
    v_eps2: &[f64],
    eps1: f64,
    eps2: f64,
    order: u32,
) -> Result<Vec<f64>> {
    if !(eps2 > 0.0 && eps1 > eps2) {
        return Err(Error::invalid(
            "eps1/eps2",
            format!("need eps1 > eps2 > 0, got ({eps1}, {eps2})"),
        ));
    }
    if order == 0 || !order.is_multiple_of(2) {
        return Err(Error::invalid(
            "order",
            format!("order must be a positive even integer, got {order}"),
        ));
    }
    if v_eps1.len() != v_eps2.len() {
        return Err(Error::DimensionMismatch {
            expected: v_eps1.len(),
            actual: v_eps2.len(),
        });
    }
    let rn = (eps1 / eps2).powi(order as i32);
    if (rn - 1.0).abs() < 1e-14 {
        return Err(Error::SingularRatio);
    }
    Ok(v_eps1
        .iter()
        .zip(v_eps2)
        .map(|(&v1, &v2)| (v1 - v2 * rn) / (1.0 - rn))
        .collect())
}

/// Iterated Richardson extrapolation over a strictly decreasing ε list.
///
/// Stage `k` combines adjacent value vectors at order `orders[k]`, labelling
/// each combination with the leading ε of its pair; `orders` must have
/// exactly `epsilons.len() - 1` entries (the usual schedule is 2, 4, ...).
pub fn richardson_extrapolate(
    values: &[Vec<f64>],
    epsilons: &[f64],
    orders: &[u32],
) -> Result<Vec<f64>> {
    if values.len() != epsilons.len() || values.len() < 2 {
        return Err(Error::invalid(
            "values",
            "need one value vector per ε and at least two ε",
        ));
    }
    if orders.len() != epsilons.len() - 1 {
        return Err(Error::invalid(
            "orders",
            format!(
                "schedule must have {} entries for {} ε values, got {}",
                epsilons.len() - 1,
                epsilons.len(),
                orders.len()
            ),
        ));
    }
    let mut stage: Vec<Vec<f64>> = values.to_vec();
    let mut eps: Vec<f64> = epsilons.to_vec();
    for &order in orders {
        let mut next = Vec::with_capacity(stage.len() - 1);
        for i in 0..stage.len() - 1 {
            next.push(richardson_step(
                &stage[i],
                &stage[i + 1],
                eps[i],
                eps[i + 1],
                order,
            )?);
        }
        stage = next;
        eps.pop();
    }
    Ok(stage.remove(0))
}

/// Circuit specification for the reduced-complexity scheme: either a pair of
/// blocks multiplexed as `diag(U_a, U_b)` (one ancilla) or a single block
/// applied directly (no ancilla).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockCircuit {
    Pair(BlockLabel, BlockLabel),
    Single(BlockLabel),
}

impl BlockCircuit {
    /// Dense matrix of this circuit's propagator.
    pub fn matrix(&self, blocks: &UnitaryBlockSet) -> ComplexMatrix {
        match *self {
            BlockCircuit::Pair(a, b) => block_diag(&[blocks.block(a), blocks.block(b)]),
            BlockCircuit::Single(a) => blocks.block(a).clone(),
        }
    }
}

/// Enumerate the reduced-complexity circuits for a block set: all six
/// unordered pairs plus the four singles for a general operator; exactly one
/// pair (and no singles) when the operator is purely (anti-)Hermitian, since
/// the remaining contributions cancel in the recombination identity.
pub fn pair_enumeration(blocks: &UnitaryBlockSet) -> Vec<BlockCircuit> {
    use BlockLabel::*;
    match blocks.purity() {
        Purity::HermitianOnly => vec![BlockCircuit::Pair(HermMinus, HermPlus)],
        Purity::AntiHermitianOnly => vec![BlockCircuit::Pair(AntiMinus, AntiPlus)],
        Purity::General => {
            let mut out = Vec::with_capacity(10);
            for (i, &a) in BLOCK_ORDER.iter().enumerate() {
                for &b in &BLOCK_ORDER[i + 1..] {
                    out.push(BlockCircuit::Pair(a, b));
                }
            }
            for &l in &BLOCK_ORDER {
                out.push(BlockCircuit::Single(l));
            }
            out
        }
    }
}
