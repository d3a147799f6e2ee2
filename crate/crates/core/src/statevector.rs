//! Exact statevector simulation with multiplexed (uniformly controlled)
//! unitaries, plus seeded multinomial shot sampling.
//!
//! Qubit ordering convention: qubit 0 is the least-significant bit of the
//! outcome index. A gate's `qubits` list maps listed order to the bits of its
//! own index space, so `qubits[0]` is the least-significant gate bit; select
//! qubits of a multiplexed gate are normally the high-order ancillas.
//! Multiplexed unitaries are applied directly on the statevector (block-wise
//! transform), not synthesized into elementary gates.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{unitarity_residual, ComplexMatrix, ComplexVector, UNITARY_TOL};

/// Norm drift allowed after a gate application.
const NORM_TOL: f64 = 1e-12;
/// Slack allowed on user-supplied amplitude/probability normalization before
/// it is treated as an error rather than float drift.
const INPUT_NORM_TOL: f64 = 1e-9;

/// Normalized amplitude vector over `2^n` basis states.
#[derive(Debug, Clone)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// The all-zeros state `|0…0⟩`.
    pub fn zero_state(n_qubits: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Self { n_qubits, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn as_vector(&self) -> ComplexVector {
        ComplexVector::new(self.amps.clone())
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Outcome probabilities `|amplitude|²`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }

    fn check_norm(&self) -> Result<()> {
        let drift = (self.norm() - 1.0).abs();
        if drift > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "statevector norm drifted by {drift:.3e}"
            )));
        }
        Ok(())
    }

    /// Apply a `2^k`-dimensional unitary to the listed qubits.
    pub fn apply_unitary(&mut self, qubits: &[usize], u: &ComplexMatrix) -> Result<()> {
        check_qubits(qubits, self.n_qubits)?;
        let d = 1usize << qubits.len();
        if u.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: u.dim(),
            });
        }
        check_unitary(u)?;

        let gate_mask: usize = qubits.iter().map(|&q| 1usize << q).sum();
        let mut scratch = vec![Complex64::new(0.0, 0.0); d];
        for base in 0..self.amps.len() {
            if base & gate_mask != 0 {
                continue;
            }
            for (x, slot) in scratch.iter_mut().enumerate() {
                *slot = self.amps[base | spread(x, qubits)];
            }
            for (row, _) in scratch.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (col, &amp) in scratch.iter().enumerate() {
                    acc += u.get(row, col) * amp;
                }
                self.amps[base | spread(row, qubits)] = acc;
            }
        }
        self.check_norm()
    }

    /// Apply `unitaries[k]` to the target qubits for each basis value `k` of
    /// the select qubits (uniformly controlled gate).
    pub fn apply_multiplexed(
        &mut self,
        select: &[usize],
        target: &[usize],
        unitaries: &[ComplexMatrix],
    ) -> Result<()> {
        check_qubits(select, self.n_qubits)?;
        check_qubits(target, self.n_qubits)?;
        if select.iter().any(|q| target.contains(q)) {
            return Err(Error::invalid(
                "select/target",
                "select and target qubits must be disjoint",
            ));
        }
        let n_branches = 1usize << select.len();
        if unitaries.len() != n_branches {
            return Err(Error::DimensionMismatch {
                expected: n_branches,
                actual: unitaries.len(),
            });
        }
        let d = 1usize << target.len();
        for u in unitaries {
            if u.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: u.dim(),
                });
            }
            check_unitary(u)?;
        }

        let target_mask: usize = target.iter().map(|&q| 1usize << q).sum();
        let mut scratch = vec![Complex64::new(0.0, 0.0); d];
        for base in 0..self.amps.len() {
            if base & target_mask != 0 {
                continue;
            }
            let k = extract(base, select);
            let u = &unitaries[k];
            for (x, slot) in scratch.iter_mut().enumerate() {
                *slot = self.amps[base | spread(x, target)];
            }
            for (row, _) in scratch.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (col, &amp) in scratch.iter().enumerate() {
                    acc += u.get(row, col) * amp;
                }
                self.amps[base | spread(row, target)] = acc;
            }
        }
        self.check_norm()
    }
}

/// Place bit `j` of `x` at position `qubits[j]`.
#[inline]
fn spread(x: usize, qubits: &[usize]) -> usize {
    qubits
        .iter()
        .enumerate()
        .fold(0, |acc, (j, &q)| acc | (((x >> j) & 1) << q))
}

/// Read the bits of `index` at the listed positions, `qubits[0]` least
/// significant.
#[inline]
fn extract(index: usize, qubits: &[usize]) -> usize {
    qubits
        .iter()
        .enumerate()
        .fold(0, |acc, (j, &q)| acc | (((index >> q) & 1) << j))
}

fn check_qubits(qubits: &[usize], n_qubits: usize) -> Result<()> {
    for (i, &q) in qubits.iter().enumerate() {
        if q >= n_qubits {
            return Err(Error::QubitOutOfRange {
                index: q,
                n_qubits,
            });
        }
        if qubits[..i].contains(&q) {
            return Err(Error::invalid("qubits", format!("duplicate qubit {q}")));
        }
    }
    Ok(())
}

fn check_unitary(u: &ComplexMatrix) -> Result<()> {
    let residual = unitarity_residual(u);
    if residual > UNITARY_TOL {
        return Err(Error::NotUnitary {
            residual,
            tol: UNITARY_TOL,
        });
    }
    Ok(())
}

/// Build a statevector from raw amplitudes. The norm must be within 1e-9 of
/// one (renormalized internally); the length must be a power of two.
pub fn prepare_state(amplitudes: &[Complex64]) -> Result<Statevector> {
    let dim = amplitudes.len();
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::invalid(
            "amplitudes",
            format!("length must be a nonzero power of two, got {dim}"),
        ));
    }
    if !amplitudes
        .iter()
        .all(|z| z.re.is_finite() && z.im.is_finite())
    {
        return Err(Error::NonFinite("state amplitudes"));
    }
    let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm <= 1e-15 {
        return Err(Error::InvalidState("cannot prepare the zero vector".into()));
    }
    if (norm - 1.0).abs() > INPUT_NORM_TOL {
        return Err(Error::InvalidState(format!(
            "amplitudes are not normalized: norm = {norm}"
        )));
    }
    let inv = Complex64::new(1.0 / norm, 0.0);
    Ok(Statevector {
        n_qubits: dim.trailing_zeros() as usize,
        amps: amplitudes.iter().map(|z| z * inv).collect(),
    })
}

/// One gate of a circuit.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gate {
    /// Reset the whole register to the given amplitudes.
    Prepare { amplitudes: ComplexVector },
    /// Uniformly controlled gate: apply `unitaries[k]` to the target qubits
    /// for select-register basis value `k`.
    Multiplexed {
        select_qubits: Vec<usize>,
        target_qubits: Vec<usize>,
        unitaries: Vec<ComplexMatrix>,
    },
    /// Apply a unitary to the listed qubits.
    Unitary {
        qubits: Vec<usize>,
        matrix: ComplexMatrix,
    },
}

/// An ordered gate list over a fixed register.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            ops: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[Gate] {
        &self.ops
    }

    pub fn prepare(&mut self, amplitudes: ComplexVector) -> Result<&mut Self> {
        if amplitudes.dim() != 1 << self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: 1 << self.n_qubits,
                actual: amplitudes.dim(),
            });
        }
        self.ops.push(Gate::Prepare { amplitudes });
        Ok(self)
    }

    pub fn multiplexed(
        &mut self,
        select_qubits: Vec<usize>,
        target_qubits: Vec<usize>,
        unitaries: Vec<ComplexMatrix>,
    ) -> Result<&mut Self> {
        check_qubits(&select_qubits, self.n_qubits)?;
        check_qubits(&target_qubits, self.n_qubits)?;
        if unitaries.len() != 1 << select_qubits.len() {
            return Err(Error::DimensionMismatch {
                expected: 1 << select_qubits.len(),
                actual: unitaries.len(),
            });
        }
        for u in &unitaries {
            check_unitary(u)?;
        }
        self.ops.push(Gate::Multiplexed {
            select_qubits,
            target_qubits,
            unitaries,
        });
        Ok(self)
    }

    pub fn unitary(&mut self, qubits: Vec<usize>, matrix: ComplexMatrix) -> Result<&mut Self> {
        check_qubits(&qubits, self.n_qubits)?;
        check_unitary(&matrix)?;
        self.ops.push(Gate::Unitary { qubits, matrix });
        Ok(self)
    }

    /// Run on `|0…0⟩` and return the final statevector.
    pub fn run(&self) -> Result<Statevector> {
        let mut state = Statevector::zero_state(self.n_qubits);
        for op in &self.ops {
            match op {
                Gate::Prepare { amplitudes } => {
                    let prepared = prepare_state(amplitudes.entries())?;
                    if prepared.n_qubits() != self.n_qubits {
                        return Err(Error::DimensionMismatch {
                            expected: 1 << self.n_qubits,
                            actual: prepared.dim(),
                        });
                    }
                    state = prepared;
                }
                Gate::Multiplexed {
                    select_qubits,
                    target_qubits,
                    unitaries,
                } => state.apply_multiplexed(select_qubits, target_qubits, unitaries)?,
                Gate::Unitary { qubits, matrix } => state.apply_unitary(qubits, matrix)?,
            }
        }
        Ok(state)
    }

    /// Serialize to the structured text format (one object per gate, complex
    /// entries as `[re, im]` pairs, matrices row-major).
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Exact outcome probabilities of a circuit run on `|0…0⟩`.
pub fn run_exact(circuit: &Circuit) -> Result<Vec<f64>> {
    Ok(circuit.run()?.probabilities())
}

/// Counts from a seeded multinomial draw.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotResult {
    pub shots: u64,
    pub seed: u64,
    /// Outcome index → count; zero-count outcomes are omitted.
    pub counts: BTreeMap<usize, u64>,
}

impl ShotResult {
    /// Empirical frequencies over `n_outcomes` indices.
    pub fn frequencies(&self, n_outcomes: usize) -> Vec<f64> {
        let mut freq = vec![0.0; n_outcomes];
        for (&outcome, &count) in &self.counts {
            freq[outcome] = count as f64 / self.shots as f64;
        }
        freq
    }
}

/// Draw multinomial counts for the given outcome probabilities.
///
/// Deterministic for fixed `(probabilities, shots, seed)`: one ChaCha8 stream
/// is seeded per call and consumed by a chain of conditional binomials in
/// outcome order, which realizes the exact multinomial law.
pub fn sample_counts(probabilities: &[f64], shots: u64, seed: u64) -> Result<ShotResult> {
    if shots == 0 {
        return Err(Error::invalid("shots", "must be at least 1"));
    }
    if probabilities.is_empty() {
        return Err(Error::invalid("probabilities", "must not be empty"));
    }
    let mut probs = Vec::with_capacity(probabilities.len());
    for &p in probabilities {
        if !p.is_finite() || p < -INPUT_NORM_TOL {
            return Err(Error::invalid(
                "probabilities",
                format!("entries must be non-negative, got {p}"),
            ));
        }
        probs.push(p.max(0.0));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > INPUT_NORM_TOL {
        return Err(Error::invalid(
            "probabilities",
            format!("must sum to 1 within 1e-9, got {total}"),
        ));
    }
    for p in &mut probs {
        *p /= total;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    let mut remaining_shots = shots;
    let mut remaining_prob = 1.0f64;
    for (outcome, &p) in probs.iter().enumerate() {
        if remaining_shots == 0 {
            break;
        }
        let drawn = if outcome + 1 == probs.len() || remaining_prob <= p {
            remaining_shots
        } else {
            let cond = (p / remaining_prob).clamp(0.0, 1.0);
            Binomial::new(remaining_shots, cond)
                .expect("conditional probability in [0, 1]")
                .sample(&mut rng)
        };
        if drawn > 0 {
            counts.insert(outcome, drawn);
        }
        remaining_shots -= drawn;
        remaining_prob -= p;
    }
    Ok(ShotResult {
        shots,
        seed,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn hadamard() -> ComplexMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::from_real_rows(&[vec![s, s], vec![s, -s]]).unwrap()
    }

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    fn random_state(n: usize, rng: &mut StdRng) -> ComplexVector {
        let v = ComplexVector::new(
            (0..1 << n)
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        );
        v.normalized().unwrap()
    }

    #[test]
    fn empty_circuit_probabilities() {
        let circuit = Circuit::new(2);
        let probs = run_exact(&circuit).unwrap();
        assert_eq!(probs[0], 1.0);
        assert_eq!(probs[1..], [0.0, 0.0, 0.0]);
    }

    #[test]
    fn single_hadamard_splits_evenly() {
        let mut circuit = Circuit::new(1);
        circuit.unitary(vec![0], hadamard()).unwrap();
        let probs = run_exact(&circuit).unwrap();
        assert!((probs[0] - 0.5).abs() < 1e-15);
        assert!((probs[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn prepare_state_round_trip() {
        let mut rng = StdRng::seed_from_u64(2);
        let psi = random_state(2, &mut rng);
        let state = prepare_state(psi.entries()).unwrap();
        for i in 0..4 {
            assert!((state.amplitudes()[i] - psi.get(i)).norm() <= 1e-12);
        }
        assert!((state.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn prepare_plus_state() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let state = prepare_state(&[c(s, 0.0), c(s, 0.0)]).unwrap();
        let probs = state.probabilities();
        assert!((probs[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn prepare_rejects_zero_and_unnormalized() {
        assert!(prepare_state(&[c(0.0, 0.0), c(0.0, 0.0)]).is_err());
        assert!(prepare_state(&[c(0.5, 0.0), c(0.5, 0.0)]).is_err());
        assert!(prepare_state(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn multiplexed_identity_branches_do_nothing() {
        let mut rng = StdRng::seed_from_u64(3);
        let psi = random_state(2, &mut rng);
        let mut state = prepare_state(psi.entries()).unwrap();
        state
            .apply_multiplexed(
                &[1],
                &[0],
                &[ComplexMatrix::identity(2), ComplexMatrix::identity(2)],
            )
            .unwrap();
        for i in 0..4 {
            assert!((state.amplitudes()[i] - psi.get(i)).norm() <= 1e-14);
        }
    }

    #[test]
    fn multiplexed_i_x_is_cnot() {
        // Select = qubit 1, target = qubit 0, branches (I, X): CNOT control 1.
        for (input, expected) in [(0usize, 0usize), (1, 1), (2, 3), (3, 2)] {
            let mut amps = vec![c(0.0, 0.0); 4];
            amps[input] = c(1.0, 0.0);
            let mut state = prepare_state(&amps).unwrap();
            state
                .apply_multiplexed(&[1], &[0], &[ComplexMatrix::identity(2), pauli_x()])
                .unwrap();
            let probs = state.probabilities();
            assert!((probs[expected] - 1.0).abs() < 1e-14, "input {input}");
        }
    }

    #[test]
    fn multiplexed_equals_block_diagonal_matrix() {
        let mut rng = StdRng::seed_from_u64(4);
        // Four random 2x2 unitaries via exponentials of random Hermitians.
        let blocks: Vec<ComplexMatrix> = (0..4)
            .map(|_| {
                let raw = ComplexMatrix::from_fn(2, |_, _| {
                    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                let h = (&raw + &raw.adjoint()).scale(c(0.5, 0.0));
                crate::linalg::unitary_exp(&h, 0.9).unwrap()
            })
            .collect();
        let psi = random_state(3, &mut rng);

        let mut state = prepare_state(psi.entries()).unwrap();
        state
            .apply_multiplexed(&[1, 2], &[0], &blocks)
            .unwrap();

        let full = crate::linalg::block_diag(&blocks.iter().collect::<Vec<_>>());
        let want = full.matvec(&psi);
        for i in 0..8 {
            assert!((state.amplitudes()[i] - want.get(i)).norm() <= 1e-13);
        }
    }

    #[test]
    fn multiplexed_is_linear() {
        let mut rng = StdRng::seed_from_u64(6);
        let u0 = crate::linalg::unitary_exp(
            &ComplexMatrix::from_real_rows(&[vec![0.2, 0.4], vec![0.4, -0.1]]).unwrap(),
            1.0,
        )
        .unwrap();
        let apply = |v: &ComplexVector| {
            let mut s = Statevector {
                n_qubits: 2,
                amps: v.entries().to_vec(),
            };
            s.apply_multiplexed(&[1], &[0], &[u0.clone(), pauli_x()])
                .unwrap();
            s.as_vector()
        };
        for _ in 0..5 {
            let a = random_state(2, &mut rng);
            let b = random_state(2, &mut rng);
            let (alpha, beta) = (c(0.6, -0.2), c(0.3, 0.5));
            let combo = a.scale(alpha).add(&b.scale(beta));
            // Gates demand unit norm, so test linearity on the normalized
            // combination against the equally rescaled superposition.
            let inv = c(1.0 / combo.norm(), 0.0);
            let lhs = apply(&combo.scale(inv));
            let rhs = apply(&a)
                .scale(alpha)
                .add(&apply(&b).scale(beta))
                .scale(inv);
            for i in 0..4 {
                assert!((lhs.get(i) - rhs.get(i)).norm() <= 1e-13);
            }
        }
    }

    #[test]
    fn gate_validation_errors() {
        let mut state = Statevector::zero_state(1);
        let not_unitary =
            ComplexMatrix::from_real_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            state.apply_unitary(&[0], &not_unitary),
            Err(Error::NotUnitary { .. })
        ));
        assert!(matches!(
            state.apply_unitary(&[1], &pauli_x()),
            Err(Error::QubitOutOfRange { .. })
        ));
        let mut circuit = Circuit::new(1);
        assert!(circuit.multiplexed(vec![0], vec![0], vec![]).is_err());
    }

    #[test]
    fn norm_preserved_through_pipeline() {
        let mut rng = StdRng::seed_from_u64(8);
        let psi = random_state(3, &mut rng);
        let mut state = prepare_state(psi.entries()).unwrap();
        assert!((state.norm() - 1.0).abs() <= 1e-12);
        state.apply_unitary(&[2], &hadamard()).unwrap();
        assert!((state.norm() - 1.0).abs() <= 1e-12);
        state
            .apply_multiplexed(&[1, 2], &[0], &vec![pauli_x(); 4])
            .unwrap();
        assert!((state.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sampling_certain_outcome() {
        let result = sample_counts(&[1.0, 0.0], 100, 7).unwrap();
        assert_eq!(result.counts.get(&0), Some(&100));
        assert_eq!(result.counts.get(&1), None);
        assert_eq!(result.counts.values().sum::<u64>(), 100);
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = [0.25, 0.5, 0.125, 0.125];
        let a = sample_counts(&p, 4096, 0xDEADBEEF).unwrap();
        let b = sample_counts(&p, 4096, 0xDEADBEEF).unwrap();
        assert_eq!(a, b);
        let c = sample_counts(&p, 4096, 0xDEADBEF0).unwrap();
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn sampling_within_binomial_bound() {
        let shots = 1u64 << 19;
        let result = sample_counts(&[0.5, 0.5], shots, 11).unwrap();
        let sigma = (shots as f64 * 0.25).sqrt();
        for i in 0..2 {
            let n = *result.counts.get(&i).unwrap() as f64;
            assert!(
                (n - (shots / 2) as f64).abs() <= 5.0 * sigma,
                "count {n} outside 5 sigma"
            );
        }
        assert_eq!(result.counts.values().sum::<u64>(), shots);
    }

    #[test]
    fn sampling_rejects_bad_input() {
        assert!(sample_counts(&[0.5, 0.5], 0, 1).is_err());
        assert!(sample_counts(&[0.7, 0.7], 10, 1).is_err());
        assert!(sample_counts(&[-0.2, 1.2], 10, 1).is_err());
    }

    #[test]
    fn circuit_serialization_round_trip() {
        let mut circuit = Circuit::new(2);
        circuit
            .prepare(ComplexVector::from_real(&[0.5, 0.5, 0.5, 0.5]))
            .unwrap();
        circuit
            .multiplexed(vec![1], vec![0], vec![ComplexMatrix::identity(2), pauli_x()])
            .unwrap();
        circuit.unitary(vec![1], hadamard()).unwrap();

        let text = circuit.to_json().unwrap();
        assert!(text.contains("\"kind\""));
        assert!(text.contains("multiplexed"));
        let back = Circuit::from_json(&text).unwrap();
        assert_eq!(back.n_qubits(), 2);
        assert_eq!(run_exact(&back).unwrap(), run_exact(&circuit).unwrap());
    }
}
