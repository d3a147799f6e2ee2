//! Full population-dynamics pipeline: per time point and per Kraus operator,
//! build circuits (4-block form or the reduced pair/single form), obtain
//! probabilities exactly or from seeded shot sampling, classically recombine
//! and ε-rescale the density-matrix diagonals, sum over Kraus operators and
//! ensemble members, and optionally Richardson-extrapolate over ε.
//!
//! Each time point is evaluated from ρ(0) through the closed-form Kraus maps
//! at t; there is no time stepping. The map over (time, Kraus, member,
//! circuit, repetition) tasks is embarrassingly parallel: every task derives
//! its own RNG seed from the index tuple, so serial and parallel execution
//! produce bit-identical traces.

use rayon::prelude::*;
use serde::Serialize;

use crate::channels::{ensemble_decompose, ChannelFamily, DensityMatrix, Ensemble, KrausChannel};
use crate::decomposition::{
    ancilla_rotation, build_block_set, pair_enumeration, richardson_extrapolate, sum_branch_row,
    BlockCircuit, BlockLabel, UnitaryBlockSet, BLOCK_ORDER,
};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector};
use crate::statevector::{run_exact, sample_counts, Circuit};
use crate::trace::{PopulationTrace, Repetition, TraceRow};

/// Probability source: exact amplitudes or seeded multinomial sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    Exact,
    Sampled,
}

/// Circuit layout: one 4-block circuit with two ancillas, or the
/// reduced-complexity set of pair and single circuits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CircuitForm {
    Full4,
    Reduced2,
}

/// How repetitions combine with Richardson extrapolation. Extrapolation is
/// linear, so the two differ only in floating-point association.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Averaging {
    ExtrapolateThenAverage,
    AverageThenExtrapolate,
}

/// Richardson order schedule; one entry per extrapolation stage (2, 4, ...).
#[derive(Debug, Clone, Serialize)]
pub struct RichardsonSpec {
    pub orders: Vec<u32>,
}

impl RichardsonSpec {
    /// The standard schedule 2, 4, … for `stages` extrapolation stages.
    pub fn standard(stages: usize) -> Self {
        Self {
            orders: (1..=stages as u32).map(|k| 2 * k).collect(),
        }
    }
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub channel: ChannelFamily,
    /// Decay rate, s⁻¹.
    pub gamma: f64,
    pub rho0: DensityMatrix,
    /// Pure-state mixture to simulate; eigendecomposition of `rho0` if absent.
    pub ensemble: Option<Ensemble>,
    /// Times, seconds.
    pub time_grid: Vec<f64>,
    /// Expansion parameters; strictly decreasing when `richardson` is set,
    /// exactly one entry otherwise.
    pub epsilons: Vec<f64>,
    pub mode: Mode,
    pub shots: u64,
    pub repetitions: u32,
    pub master_seed: u64,
    pub circuit_form: CircuitForm,
    pub richardson: Option<RichardsonSpec>,
    /// Rescale each estimated population vector to unit sum.
    pub renormalize: bool,
    pub averaging: Averaging,
    pub parallel: bool,
}

/// Default decay rate of the shipped benchmarks, s⁻¹.
pub const DEFAULT_GAMMA: f64 = 1.52e9;
/// Default shot count of the shipped benchmarks.
pub const DEFAULT_SHOTS: u64 = 1 << 19;
/// Default master seed.
pub const DEFAULT_SEED: u64 = 42;

/// Uniform grid of `points` values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, points: usize) -> Result<Vec<f64>> {
    if points == 0 {
        return Err(Error::invalid("points", "need at least one grid point"));
    }
    if points == 1 {
        return Ok(vec![start]);
    }
    let step = (stop - start) / (points - 1) as f64;
    Ok((0..points).map(|k| start + step * k as f64).collect())
}

/// The default 13-point grid over 0–3 ns, sized to span about 4.5 lifetimes
/// of the default decay rate.
pub fn default_time_grid() -> Vec<f64> {
    linspace(0.0, 3.0e-9, 13).expect("static grid")
}

impl ExperimentConfig {
    /// Benchmark defaults: γ = 1.52×10⁹ s⁻¹, the shipped ρ(0), 13 points over
    /// 0–3 ns, ε = 0.2, exact mode, reduced circuit form, raw populations.
    pub fn benchmark(channel: ChannelFamily) -> Self {
        Self {
            channel,
            gamma: DEFAULT_GAMMA,
            rho0: crate::channels::benchmark_initial_state(),
            ensemble: None,
            time_grid: default_time_grid(),
            epsilons: vec![0.2],
            mode: Mode::Exact,
            shots: DEFAULT_SHOTS,
            repetitions: 1,
            master_seed: DEFAULT_SEED,
            circuit_form: CircuitForm::Reduced2,
            richardson: None,
            renormalize: false,
            averaging: Averaging::ExtrapolateThenAverage,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.rho0.dim();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::invalid(
                "rho0",
                format!("dimension must be a power of two >= 2, got {dim}"),
            ));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::invalid("gamma", "must be finite and >= 0"));
        }
        if self.time_grid.is_empty() {
            return Err(Error::invalid("time_grid", "must not be empty"));
        }
        if self.time_grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::invalid("time_grid", "times must be finite and >= 0"));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !e.is_finite() || *e <= 0.0) {
            return Err(Error::invalid("epsilons", "need positive expansion parameters"));
        }
        match &self.richardson {
            Some(spec) => {
                if self.epsilons.len() < 2 {
                    return Err(Error::invalid(
                        "epsilons",
                        "Richardson extrapolation needs at least two ε values",
                    ));
                }
                if self.epsilons.windows(2).any(|w| w[0] <= w[1]) {
                    return Err(Error::invalid(
                        "epsilons",
                        "must be strictly decreasing for Richardson extrapolation",
                    ));
                }
                if spec.orders.len() != self.epsilons.len() - 1 {
                    return Err(Error::invalid(
                        "richardson",
                        format!(
                            "order schedule needs {} entries, got {}",
                            self.epsilons.len() - 1,
                            spec.orders.len()
                        ),
                    ));
                }
            }
            None => {
                if self.epsilons.len() != 1 {
                    return Err(Error::invalid(
                        "epsilons",
                        "multiple ε values require Richardson extrapolation; sweep them in separate runs otherwise",
                    ));
                }
            }
        }
        if self.mode == Mode::Sampled && self.shots == 0 {
            return Err(Error::invalid("shots", "sampled mode needs shots >= 1"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions", "must be >= 1"));
        }
        if let Some(ens) = &self.ensemble {
            if ens.reconstruct().max_abs_diff(self.rho0.matrix()) > 1e-10 {
                return Err(Error::invalid(
                    "ensemble",
                    "does not reconstruct rho0 within 1e-10",
                ));
            }
        }
        Ok(())
    }

    /// Label recorded in the trace's ε column.
    pub fn epsilon_label(&self) -> String {
        self.epsilons
            .iter()
            .map(|e| format!("{e}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent 64-bit stream seed for one circuit execution.
///
/// Rule: a SplitMix64 finalizer chain absorbing, in order, the master seed
/// and the five indices, each offset by a position-dependent multiple of the
/// golden-ratio constant. The output depends only on the tuple, never on
/// evaluation order or parallel schedule; collision-freedom over the
/// benchmark index space is enforced by test.
pub fn seed_derivation(
    master_seed: u64,
    t_index: usize,
    kraus_index: usize,
    member_index: usize,
    circuit_index: usize,
    repetition: usize,
) -> u64 {
    let mut h = splitmix(master_seed ^ GOLDEN);
    for (pos, v) in [t_index, kraus_index, member_index, circuit_index, repetition]
        .into_iter()
        .enumerate()
    {
        h = splitmix(h ^ (v as u64).wrapping_add(GOLDEN.wrapping_mul(pos as u64 + 1)));
    }
    h
}

/// Index tuple identifying one (time, Kraus, member, repetition) estimate;
/// per-circuit seeds are derived from it.
#[derive(Debug, Clone, Copy)]
pub struct SeedContext {
    pub master_seed: u64,
    pub t_index: usize,
    pub kraus_index: usize,
    pub member_index: usize,
    pub repetition: usize,
}

impl SeedContext {
    pub fn circuit_seed(&self, circuit_index: usize) -> u64 {
        seed_derivation(
            self.master_seed,
            self.t_index,
            self.kraus_index,
            self.member_index,
            circuit_index,
            self.repetition,
        )
    }
}

fn system_qubits(dim: usize) -> Result<usize> {
    if !dim.is_power_of_two() || dim < 1 {
        return Err(Error::invalid(
            "dim",
            format!("state dimension must be a power of two, got {dim}"),
        ));
    }
    Ok(dim.trailing_zeros() as usize)
}

fn hadamard() -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_real_rows(&[vec![s, s], vec![s, -s]]).expect("static 2x2")
}

/// The 3-register circuit: uniform two-ancilla preparation ⊗ ψ, the
/// multiplexed 4-block propagator, and the ancilla rotation R.
pub fn full4_circuit(blocks: &UnitaryBlockSet, psi: &ComplexVector) -> Result<Circuit> {
    if psi.dim() != blocks.dim() {
        return Err(Error::DimensionMismatch {
            expected: blocks.dim(),
            actual: psi.dim(),
        });
    }
    let n_sys = system_qubits(psi.dim())?;
    let ancillas = ComplexVector::from_real(&[0.5, 0.5, 0.5, 0.5]);
    let mut circuit = Circuit::new(n_sys + 2);
    circuit.prepare(ancillas.kron(psi))?;
    circuit.multiplexed(
        vec![n_sys, n_sys + 1],
        (0..n_sys).collect(),
        BLOCK_ORDER.iter().map(|&l| blocks.block(l).clone()).collect(),
    )?;
    circuit.unitary(vec![n_sys, n_sys + 1], ancilla_rotation())?;
    Ok(circuit)
}

/// One-ancilla pair circuit: uniform ancilla ⊗ ψ, multiplexed
/// `diag(U_a, U_b)`, and a Hadamard that maps the branch sum to ancilla
/// outcome 0.
pub fn pair_circuit(
    blocks: &UnitaryBlockSet,
    first: BlockLabel,
    second: BlockLabel,
    psi: &ComplexVector,
) -> Result<Circuit> {
    if psi.dim() != blocks.dim() {
        return Err(Error::DimensionMismatch {
            expected: blocks.dim(),
            actual: psi.dim(),
        });
    }
    let n_sys = system_qubits(psi.dim())?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let ancilla = ComplexVector::from_real(&[s, s]);
    let mut circuit = Circuit::new(n_sys + 1);
    circuit.prepare(ancilla.kron(psi))?;
    circuit.multiplexed(
        vec![n_sys],
        (0..n_sys).collect(),
        vec![blocks.block(first).clone(), blocks.block(second).clone()],
    )?;
    circuit.unitary(vec![n_sys], hadamard())?;
    Ok(circuit)
}

/// Ancilla-free circuit applying one block to ψ.
pub fn single_circuit(
    blocks: &UnitaryBlockSet,
    label: BlockLabel,
    psi: &ComplexVector,
) -> Result<Circuit> {
    if psi.dim() != blocks.dim() {
        return Err(Error::DimensionMismatch {
            expected: blocks.dim(),
            actual: psi.dim(),
        });
    }
    let n_sys = system_qubits(psi.dim())?;
    let mut circuit = Circuit::new(n_sys);
    circuit.prepare(psi.clone())?;
    circuit.unitary((0..n_sys).collect(), blocks.block(label).clone())?;
    Ok(circuit)
}

fn probabilities_for(circuit: &Circuit, mode: Mode, shots: u64, seed: u64) -> Result<Vec<f64>> {
    let exact = run_exact(circuit)?;
    match mode {
        Mode::Exact => Ok(exact),
        Mode::Sampled => {
            let n = exact.len();
            Ok(sample_counts(&exact, shots, seed)?.frequencies(n))
        }
    }
}

/// Classical recombination of the reduced-circuit probabilities into the
/// ε-rescaled diagonal. Uses the identity
/// `|Σ_k a_k|² = Σ_{i<k} |a_i + a_k|² - 2·Σ_k |a_k|²` (for four terms)
/// applied per basis index:
/// `diag_j = (4·Σ_pairs P_pair(0,j) - 2·Σ_singles P_single(j)) / (4ε²)`.
/// The purely (anti-)Hermitian reduction has one pair circuit and
/// `diag_j = P_pair(0,j) / ε²`.
pub fn reconstruct_diagonal(
    pair_probs: &[Vec<f64>],
    single_probs: &[Vec<f64>],
    epsilon: f64,
) -> Result<Vec<f64>> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid("epsilon", "must be positive"));
    }
    let dim = pair_probs
        .first()
        .map(|p| p.len())
        .ok_or_else(|| Error::invalid("pair_probs", "need at least one pair circuit"))?;
    for p in pair_probs.iter().chain(single_probs) {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.len(),
            });
        }
    }
    match (pair_probs.len(), single_probs.len()) {
        (6, 4) => Ok((0..dim)
            .map(|j| {
                let pairs: f64 = pair_probs.iter().map(|p| p[j]).sum();
                let singles: f64 = single_probs.iter().map(|p| p[j]).sum();
                (4.0 * pairs - 2.0 * singles) / (4.0 * epsilon * epsilon)
            })
            .collect()),
        (1, 0) => Ok(pair_probs[0]
            .iter()
            .map(|&p| p / (epsilon * epsilon))
            .collect()),
        (pairs, singles) => Err(Error::invalid(
            "circuit probabilities",
            format!(
                "count mismatch with declared purity: got {pairs} pairs and {singles} singles"
            ),
        )),
    }
}

/// Diagonal of `M_eff |ψ⟩⟨ψ| M_eff†` estimated from the circuits of an
/// already-built block set. Exposed separately so broken block sets can be
/// fed through the same path in tests.
pub fn estimate_from_blocks(
    blocks: &UnitaryBlockSet,
    psi: &ComplexVector,
    mode: Mode,
    shots: u64,
    seeds: &SeedContext,
    form: CircuitForm,
) -> Result<Vec<f64>> {
    let dim = psi.dim();
    let eps = blocks.epsilon();
    match form {
        CircuitForm::Full4 => {
            let circuit = full4_circuit(blocks, psi)?;
            let probs = probabilities_for(&circuit, mode, shots, seeds.circuit_seed(0))?;
            let branch =
                sum_branch_row(&ancilla_rotation()).expect("ancilla rotation has a sum branch");
            let scale = 4.0 / (eps * eps);
            Ok((0..dim).map(|j| scale * probs[branch * dim + j]).collect())
        }
        CircuitForm::Reduced2 => {
            let mut pair_probs = Vec::new();
            let mut single_probs = Vec::new();
            for (index, spec) in pair_enumeration(blocks).iter().enumerate() {
                let seed = seeds.circuit_seed(index);
                match *spec {
                    BlockCircuit::Pair(a, b) => {
                        let circuit = pair_circuit(blocks, a, b, psi)?;
                        let probs = probabilities_for(&circuit, mode, shots, seed)?;
                        pair_probs.push(probs[..dim].to_vec());
                    }
                    BlockCircuit::Single(label) => {
                        let circuit = single_circuit(blocks, label, psi)?;
                        let probs = probabilities_for(&circuit, mode, shots, seed)?;
                        single_probs.push(probs);
                    }
                }
            }
            reconstruct_diagonal(&pair_probs, &single_probs, eps)
        }
    }
}

/// Estimate the diagonal of `M|ψ⟩⟨ψ|M†`, ε-rescaled from circuit
/// probabilities. In exact mode this equals
/// `diag(M_eff |ψ⟩⟨ψ| M_eff†)` for the finite-ε effective operator.
pub fn estimate_kraus_diag(
    m: &ComplexMatrix,
    psi: &ComplexVector,
    epsilon: f64,
    mode: Mode,
    shots: u64,
    seeds: &SeedContext,
    form: CircuitForm,
) -> Result<Vec<f64>> {
    let blocks = build_block_set(m, epsilon)?;
    estimate_from_blocks(&blocks, psi, mode, shots, seeds, form)
}

/// Estimated populations for one (repetition, time) task, one vector per ε.
fn populations_per_epsilon(
    config: &ExperimentConfig,
    ensemble: &Ensemble,
    channel: &KrausChannel,
    t_index: usize,
    repetition: u32,
) -> Result<Vec<Vec<f64>>> {
    let dim = config.rho0.dim();
    config
        .epsilons
        .iter()
        .map(|&eps| {
            let mut est = vec![0.0; dim];
            for (kraus_index, m) in channel.operators().iter().enumerate() {
                if m.max_abs() == 0.0 {
                    // Exactly-zero operator: contributes nothing, runs nothing.
                    continue;
                }
                for (member_index, (weight, psi)) in ensemble.members.iter().enumerate() {
                    let seeds = SeedContext {
                        master_seed: config.master_seed,
                        t_index,
                        kraus_index,
                        member_index,
                        repetition: repetition as usize,
                    };
                    let diag = estimate_kraus_diag(
                        m,
                        psi,
                        eps,
                        config.mode,
                        config.shots,
                        &seeds,
                        config.circuit_form,
                    )?;
                    for (slot, d) in est.iter_mut().zip(&diag) {
                        *slot += weight * d;
                    }
                }
            }
            if config.renormalize {
                let total: f64 = est.iter().sum();
                if total > 1e-12 {
                    for v in &mut est {
                        *v /= total;
                    }
                }
            }
            Ok(est)
        })
        .collect()
}

fn extrapolate(config: &ExperimentConfig, per_eps: &[Vec<f64>]) -> Result<Vec<f64>> {
    match &config.richardson {
        Some(spec) => richardson_extrapolate(per_eps, &config.epsilons, &spec.orders),
        None => Ok(per_eps[0].clone()),
    }
}

/// Run the configured experiment and return the population trace.
pub fn run_trace(config: &ExperimentConfig) -> Result<PopulationTrace> {
    config.validate()?;
    let ensemble = config
        .ensemble
        .clone()
        .unwrap_or_else(|| ensemble_decompose(&config.rho0));
    let repetitions = match config.mode {
        Mode::Exact => 1, // no noise: repetitions would be identical
        Mode::Sampled => config.repetitions,
    };

    let channels: Vec<KrausChannel> = config
        .time_grid
        .iter()
        .map(|&t| config.channel.kraus_at(config.gamma, t))
        .collect::<Result<_>>()?;
    let oracle_pops: Vec<Vec<f64>> = channels
        .iter()
        .map(|ch| {
            crate::channels::kraus_evolve_oracle(&config.rho0, ch).map(|rho| rho.populations())
        })
        .collect::<Result<_>>()?;

    let tasks: Vec<(u32, usize)> = (0..repetitions)
        .flat_map(|rep| (0..config.time_grid.len()).map(move |t| (rep, t)))
        .collect();
    let work = |&(rep, t_index): &(u32, usize)| {
        populations_per_epsilon(config, &ensemble, &channels[t_index], t_index, rep)
    };
    let per_task: Vec<Vec<Vec<f64>>> = if config.parallel {
        tasks.par_iter().map(work).collect::<Result<_>>()?
    } else {
        tasks.iter().map(work).collect::<Result<_>>()?
    };

    let n_times = config.time_grid.len();
    let label = config.epsilon_label();
    let dim = config.rho0.dim();
    let mut rows = Vec::new();
    for (t_index, &t) in config.time_grid.iter().enumerate() {
        let mut rep_finals: Vec<Vec<f64>> = Vec::with_capacity(repetitions as usize);
        for rep in 0..repetitions {
            let per_eps = &per_task[rep as usize * n_times + t_index];
            rep_finals.push(extrapolate(config, per_eps)?);
        }
        for (rep, est) in rep_finals.iter().enumerate() {
            rows.push(TraceRow {
                t,
                epsilon_label: label.clone(),
                repetition: Repetition::Index(rep as u32),
                estimated: est.clone(),
                oracle: oracle_pops[t_index].clone(),
                shots: match config.mode {
                    Mode::Exact => 0,
                    Mode::Sampled => config.shots,
                },
            });
        }
        let mean = match config.averaging {
            Averaging::ExtrapolateThenAverage => mean_vectors(&rep_finals),
            Averaging::AverageThenExtrapolate => {
                let per_eps_mean: Vec<Vec<f64>> = (0..config.epsilons.len())
                    .map(|e| {
                        let stacked: Vec<Vec<f64>> = (0..repetitions)
                            .map(|rep| per_task[rep as usize * n_times + t_index][e].clone())
                            .collect();
                        mean_vectors(&stacked)
                    })
                    .collect();
                extrapolate(config, &per_eps_mean)?
            }
        };
        rows.push(TraceRow {
            t,
            epsilon_label: label.clone(),
            repetition: Repetition::Mean,
            estimated: mean,
            oracle: oracle_pops[t_index].clone(),
            shots: match config.mode {
                Mode::Exact => 0,
                Mode::Sampled => config.shots,
            },
        });
    }

    Ok(PopulationTrace {
        config: config.clone(),
        dim,
        rows,
    })
}

fn mean_vectors(vectors: &[Vec<f64>]) -> Vec<f64> {
    let n = vectors.len() as f64;
    let dim = vectors[0].len();
    let mut out = vec![0.0; dim];
    for v in vectors {
        for (slot, x) in out.iter_mut().zip(v) {
            *slot += x;
        }
    }
    for slot in &mut out {
        *slot /= n;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{plus_excited_ensemble, GadParams};
    use crate::decomposition::effective_operator;
    use num_complex::Complex64;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::collections::HashSet;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn seed_ctx() -> SeedContext {
        SeedContext {
            master_seed: 7,
            t_index: 0,
            kraus_index: 0,
            member_index: 0,
            repetition: 0,
        }
    }

    fn dense_diag_oracle(m: &ComplexMatrix, psi: &ComplexVector, eps: f64) -> Vec<f64> {
        let eff = effective_operator(m, eps).unwrap().matrix;
        let v = eff.matvec(psi);
        (0..psi.dim()).map(|j| v.get(j).norm_sqr()).collect()
    }

    fn benchmark_operators() -> Vec<ComplexMatrix> {
        let t = std::f64::consts::LN_2 / DEFAULT_GAMMA;
        let mut ops = Vec::new();
        for lambda in [1.0, 0.5] {
            for m in crate::channels::gad_kraus(&GadParams::new(DEFAULT_GAMMA, lambda, t).unwrap())
                .operators()
            {
                if m.max_abs() > 0.0 {
                    ops.push(m.clone());
                }
            }
        }
        ops
    }

    #[test]
    fn seed_derivation_is_deterministic_and_sensitive() {
        let a = seed_derivation(1, 2, 3, 4, 5, 6);
        assert_eq!(a, seed_derivation(1, 2, 3, 4, 5, 6));
        assert_ne!(a, seed_derivation(2, 2, 3, 4, 5, 6));
        assert_ne!(a, seed_derivation(1, 3, 3, 4, 5, 6));
        assert_ne!(a, seed_derivation(1, 2, 3, 4, 6, 5));
    }

    #[test]
    fn seed_derivation_collision_free_over_benchmark_space() {
        let mut seen = HashSet::new();
        for master in [0u64, DEFAULT_SEED] {
            for t in 0..13 {
                for kraus in 0..4 {
                    for member in 0..2 {
                        for circuit in 0..10 {
                            for rep in 0..10 {
                                assert!(
                                    seen.insert(seed_derivation(
                                        master, t, kraus, member, circuit, rep
                                    )),
                                    "collision at ({master},{t},{kraus},{member},{circuit},{rep})"
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn identity_operator_estimate_matches_scalar() {
        // M = I, ψ = |0⟩: diag = (sin ε/ε)²·(1, 0).
        let eps = 0.2;
        let diag = estimate_kraus_diag(
            &ComplexMatrix::identity(2),
            &ComplexVector::basis(2, 0),
            eps,
            Mode::Exact,
            0,
            &seed_ctx(),
            CircuitForm::Reduced2,
        )
        .unwrap();
        let want = (eps.sin() / eps).powi(2);
        assert!((diag[0] - want).abs() <= 1e-12);
        assert!(diag[1].abs() <= 1e-12);
    }

    #[test]
    fn hermitian_operator_uses_one_pair_circuit() {
        // Zero-T M0 is Hermitian: diag_j = |⟨j| sin(εS)/ε |ψ⟩|².
        let t = std::f64::consts::LN_2 / DEFAULT_GAMMA;
        let ch = crate::channels::gad_kraus(&GadParams::new(DEFAULT_GAMMA, 1.0, t).unwrap());
        let m0 = &ch.operators()[0];
        let psi = ComplexVector::from_real(&[0.6, 0.8]);
        let eps = 0.2;
        let diag = estimate_kraus_diag(
            m0,
            &psi,
            eps,
            Mode::Exact,
            0,
            &seed_ctx(),
            CircuitForm::Reduced2,
        )
        .unwrap();
        let want = dense_diag_oracle(m0, &psi, eps);
        for j in 0..2 {
            assert!((diag[j] - want[j]).abs() <= 1e-12);
        }
    }

    #[test]
    fn exact_mode_matches_dense_oracle_for_benchmark_operators() {
        let mut rng = StdRng::seed_from_u64(17);
        for m in benchmark_operators() {
            for eps in [0.2, 1.0] {
                let psi = ComplexVector::new(vec![
                    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                ])
                .normalized()
                .unwrap();
                let want = dense_diag_oracle(&m, &psi, eps);
                for form in [CircuitForm::Full4, CircuitForm::Reduced2] {
                    let diag =
                        estimate_kraus_diag(&m, &psi, eps, Mode::Exact, 0, &seed_ctx(), form)
                            .unwrap();
                    for j in 0..2 {
                        assert!(
                            (diag[j] - want[j]).abs() <= 1e-10,
                            "form {form:?} eps {eps} j {j}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn full4_and_reduced2_agree_in_exact_mode() {
        let t = std::f64::consts::LN_2 / DEFAULT_GAMMA;
        let ch = crate::channels::gad_kraus(&GadParams::new(DEFAULT_GAMMA, 1.0, t).unwrap());
        let m1 = &ch.operators()[1]; // general operator
        let psi = ComplexVector::from_real(&[0.6, 0.8]);
        for eps in [0.2, 1.15] {
            let a = estimate_kraus_diag(
                m1,
                &psi,
                eps,
                Mode::Exact,
                0,
                &seed_ctx(),
                CircuitForm::Full4,
            )
            .unwrap();
            let b = estimate_kraus_diag(
                m1,
                &psi,
                eps,
                Mode::Exact,
                0,
                &seed_ctx(),
                CircuitForm::Reduced2,
            )
            .unwrap();
            for j in 0..2 {
                assert!((a[j] - b[j]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn reconstruction_identity_on_identical_vectors() {
        // All four branch outputs equal u: |4u|² = 16|u|², while each pair
        // circuit measures |(u+u)/2|² = |u|² and each single |u|².
        let u = [0.3, 0.7];
        let eps = 0.5;
        let pair_probs: Vec<Vec<f64>> = (0..6)
            .map(|_| u.iter().map(|&x| x * x).collect())
            .collect();
        let single_probs: Vec<Vec<f64>> = (0..4)
            .map(|_| u.iter().map(|&x| x * x).collect())
            .collect();
        let diag = reconstruct_diagonal(&pair_probs, &single_probs, eps).unwrap();
        for (j, &x) in u.iter().enumerate() {
            let want = 16.0 * x * x / (4.0 * eps * eps);
            assert!((diag[j] - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn reconstruction_identity_matches_brute_force() {
        let mut rng = StdRng::seed_from_u64(23);
        let eps = 0.7;
        for _ in 0..1000 {
            let a: Vec<Complex64> = (0..4)
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            // One-dimensional "index": pair circuits measure |(a_i+a_k)/2|²,
            // singles measure |a_k|².
            let mut pair_probs = Vec::new();
            for i in 0..4 {
                for k in (i + 1)..4 {
                    pair_probs.push(vec![((a[i] + a[k]) / 2.0).norm_sqr()]);
                }
            }
            let single_probs: Vec<Vec<f64>> = a.iter().map(|z| vec![z.norm_sqr()]).collect();
            let diag = reconstruct_diagonal(&pair_probs, &single_probs, eps).unwrap();
            let brute = (a[0] + a[1] + a[2] + a[3]).norm_sqr() / (4.0 * eps * eps);
            assert!((diag[0] - brute).abs() <= 1e-12);
        }
    }

    #[test]
    fn hermitian_only_path_equals_full_formula() {
        // For a Hermitian operator the anti-Hermitian blocks are ∓I; running
        // all ten circuits anyway and applying the general recombination must
        // reproduce the single-pair reduction (their contributions cancel).
        let m = ComplexMatrix::from_real_rows(&[vec![0.7, 0.2], vec![0.2, -0.4]]).unwrap();
        let eps = 0.3;
        let psi = ComplexVector::from_real(&[0.6, 0.8]);
        let blocks = build_block_set(&m, eps).unwrap();
        assert_eq!(blocks.purity(), crate::decomposition::Purity::HermitianOnly);

        let reduced = estimate_from_blocks(
            &blocks,
            &psi,
            Mode::Exact,
            0,
            &seed_ctx(),
            CircuitForm::Reduced2,
        )
        .unwrap();

        // Build all six pairs and four singles by hand from the same blocks.
        let mut pair_probs = Vec::new();
        let mut single_probs = Vec::new();
        for (i, &a) in BLOCK_ORDER.iter().enumerate() {
            for &b in &BLOCK_ORDER[i + 1..] {
                let probs = run_exact(&pair_circuit(&blocks, a, b, &psi).unwrap()).unwrap();
                pair_probs.push(probs[..2].to_vec());
            }
        }
        for &l in &BLOCK_ORDER {
            single_probs.push(run_exact(&single_circuit(&blocks, l, &psi).unwrap()).unwrap());
        }
        let full = reconstruct_diagonal(&pair_probs, &single_probs, eps).unwrap();
        for j in 0..2 {
            assert!((full[j] - reduced[j]).abs() <= 1e-12, "j = {j}");
        }
    }

    #[test]
    fn reconstruction_count_mismatch_rejected() {
        let p = vec![vec![0.5, 0.5]];
        assert!(reconstruct_diagonal(&p, &[p[0].clone()], 0.2).is_err());
        let pairs: Vec<Vec<f64>> = (0..6).map(|_| vec![0.1, 0.2]).collect();
        assert!(reconstruct_diagonal(&pairs, &[], 0.2).is_err());
    }

    #[test]
    fn kraus_sum_converges_to_one() {
        // Σ_j Σ_i diag estimates = Σ_i ‖M_eff,i ψ‖², within O(ε²) of 1.
        let t = 0.5e-9;
        for lambda in [1.0, 0.5] {
            let ch =
                crate::channels::gad_kraus(&GadParams::new(DEFAULT_GAMMA, lambda, t).unwrap());
            for (_, psi) in &plus_excited_ensemble().members {
                let mut total = 0.0;
                for m in ch.operators() {
                    if m.max_abs() == 0.0 {
                        continue;
                    }
                    let diag = estimate_kraus_diag(
                        m,
                        psi,
                        0.2,
                        Mode::Exact,
                        0,
                        &seed_ctx(),
                        CircuitForm::Reduced2,
                    )
                    .unwrap();
                    total += diag.iter().sum::<f64>();
                }
                assert!((total - 1.0).abs() <= 0.02, "total = {total}");
            }
        }
    }

    #[test]
    fn run_trace_identity_channel_limit() {
        // t = 0 only: estimates equal diag(ρ₀) up to O(ε²) in exact mode.
        let mut config = ExperimentConfig::benchmark(ChannelFamily::zero_temperature());
        config.time_grid = vec![0.0];
        let trace = run_trace(&config).unwrap();
        let row = trace.rows.last().unwrap();
        assert!((row.estimated[0] - 0.25).abs() <= 0.04);
        assert!((row.estimated[1] - 0.75).abs() <= 0.04);
        assert!((row.oracle[0] - 0.25).abs() <= 1e-12);
        assert!((row.oracle[1] - 0.75).abs() <= 1e-12);
    }

    #[test]
    fn run_trace_infinite_t_long_time_limit() {
        let mut config = ExperimentConfig::benchmark(ChannelFamily::infinite_temperature());
        config.time_grid = vec![10.0 / DEFAULT_GAMMA];
        let trace = run_trace(&config).unwrap();
        let row = trace.rows.last().unwrap();
        assert!((row.estimated[0] - 0.5).abs() <= 0.02);
        assert!((row.estimated[1] - 0.5).abs() <= 0.02);
    }

    #[test]
    fn run_trace_is_ensemble_invariant_in_exact_mode() {
        let mut config = ExperimentConfig::benchmark(ChannelFamily::infinite_temperature());
        config.time_grid = vec![0.0, 0.5e-9, 2.0e-9];
        let eig = run_trace(&config).unwrap();
        config.ensemble = Some(plus_excited_ensemble());
        let alt = run_trace(&config).unwrap();
        for (a, b) in eig.rows.iter().zip(&alt.rows) {
            for j in 0..2 {
                assert!((a.estimated[j] - b.estimated[j]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn run_trace_serial_and_parallel_bit_identical() {
        let mut config = ExperimentConfig::benchmark(ChannelFamily::infinite_temperature());
        config.mode = Mode::Sampled;
        config.shots = 512;
        config.repetitions = 3;
        config.time_grid = vec![0.0, 1.0e-9, 2.5e-9];
        config.epsilons = vec![1.15, 1.0];
        config.richardson = Some(RichardsonSpec::standard(1));
        let parallel = run_trace(&config).unwrap();
        config.parallel = false;
        let serial = run_trace(&config).unwrap();
        assert_eq!(parallel.to_tsv(), serial.to_tsv());
        // And bit-identical repeated runs.
        let again = run_trace(&config).unwrap();
        assert_eq!(serial.to_tsv(), again.to_tsv());
    }

    #[test]
    fn renormalize_makes_populations_sum_to_one() {
        let mut config = ExperimentConfig::benchmark(ChannelFamily::zero_temperature());
        config.renormalize = true;
        config.time_grid = vec![0.0, 1.0e-9];
        let trace = run_trace(&config).unwrap();
        for row in &trace.rows {
            let sum: f64 = row.estimated.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn averaging_modes_agree_up_to_rounding() {
        let mut config = ExperimentConfig::benchmark(ChannelFamily::zero_temperature());
        config.mode = Mode::Sampled;
        config.shots = 2048;
        config.repetitions = 4;
        config.time_grid = vec![0.5e-9];
        config.epsilons = vec![1.15, 1.0];
        config.richardson = Some(RichardsonSpec::standard(1));
        let a = run_trace(&config).unwrap();
        config.averaging = Averaging::AverageThenExtrapolate;
        let b = run_trace(&config).unwrap();
        let mean_a = a.rows.iter().find(|r| r.repetition == Repetition::Mean).unwrap();
        let mean_b = b.rows.iter().find(|r| r.repetition == Repetition::Mean).unwrap();
        for j in 0..2 {
            assert!((mean_a.estimated[j] - mean_b.estimated[j]).abs() <= 1e-12);
        }
    }

    #[test]
    fn config_validation_rejects_bad_shapes() {
        let mut config = ExperimentConfig::benchmark(ChannelFamily::zero_temperature());
        config.epsilons = vec![0.2, 0.1];
        assert!(run_trace(&config).is_err()); // multiple ε without Richardson

        let mut config = ExperimentConfig::benchmark(ChannelFamily::zero_temperature());
        config.epsilons = vec![1.0, 1.15];
        config.richardson = Some(RichardsonSpec::standard(1));
        assert!(run_trace(&config).is_err()); // not decreasing

        let mut config = ExperimentConfig::benchmark(ChannelFamily::zero_temperature());
        config.mode = Mode::Sampled;
        config.shots = 0;
        assert!(run_trace(&config).is_err());

        let mut config = ExperimentConfig::benchmark(ChannelFamily::zero_temperature());
        config.time_grid = vec![];
        assert!(run_trace(&config).is_err());
    }
}
