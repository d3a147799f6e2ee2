//! Backend-independent property suite: unitarity, channel completeness,
//! convergence ratios, circuit-vs-dense-oracle equivalence, circuit-form
//! equivalence, the recombination identity, and execution determinism. Used
//! by the command-line `validate` subcommand and the acceptance tests, with
//! checkers granular enough to feed broken fixtures through.

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::channels::{gad_kraus, ChannelFamily, GadParams};
use crate::decomposition::{
    assemble_full_u, build_block_set, effective_operator, richardson_step, rotation_r,
    UnitaryBlockSet,
};
use crate::error::Result;
use crate::experiment::{
    estimate_from_blocks, run_trace, CircuitForm, ExperimentConfig, Mode, RichardsonSpec,
    SeedContext, DEFAULT_GAMMA,
};
use crate::linalg::{unitarity_residual, ComplexMatrix, ComplexVector, UNITARY_TOL};

/// Outcome of one property check.
#[derive(Debug, Clone)]
pub struct PropertyReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl PropertyReport {
    fn from_bound(name: &'static str, value: f64, bound: f64) -> Self {
        Self {
            name,
            passed: value <= bound,
            detail: format!("{value:.3e} (bound {bound:.1e})"),
        }
    }
}

/// The benchmark operators: every nonzero Kraus operator of both damping
/// families at a mid-grid time.
fn benchmark_operators() -> Vec<ComplexMatrix> {
    let t = std::f64::consts::LN_2 / DEFAULT_GAMMA;
    let mut ops = Vec::new();
    for lambda in [1.0, 0.5] {
        let ch = gad_kraus(&GadParams::new(DEFAULT_GAMMA, lambda, t).unwrap());
        for m in ch.operators() {
            if m.max_abs() > 0.0 && !ops.contains(m) {
                ops.push(m.clone());
            }
        }
    }
    ops
}

fn benchmark_states(rng: &mut StdRng, count: usize) -> Vec<ComplexVector> {
    let mut states = vec![
        ComplexVector::basis(2, 0),
        ComplexVector::from_real(&[std::f64::consts::FRAC_1_SQRT_2; 2]),
    ];
    for _ in 0..count {
        let v = ComplexVector::new(
            (0..2)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        );
        states.push(v.normalized().unwrap());
    }
    states
}

fn seed_ctx() -> SeedContext {
    SeedContext {
        master_seed: 0,
        t_index: 0,
        kraus_index: 0,
        member_index: 0,
        repetition: 0,
    }
}

/// Largest unitarity residual over all blocks, the assembled multiplexed
/// operator, and the rotation, for every benchmark operator and ε.
pub fn max_unitarity_residual(epsilons: &[f64]) -> Result<f64> {
    let mut worst = unitarity_residual(&rotation_r(1));
    for m in benchmark_operators() {
        for &eps in epsilons {
            let blocks = build_block_set(&m, eps)?;
            for (_, b) in blocks.blocks() {
                worst = worst.max(unitarity_residual(b));
            }
            worst = worst.max(unitarity_residual(&assemble_full_u(&blocks, 1)?));
        }
    }
    Ok(worst)
}

/// Largest completeness residual over a (γ, λ, t) sweep.
pub fn max_cptp_residual() -> f64 {
    let mut worst = 0.0f64;
    for gamma in [0.0, DEFAULT_GAMMA, 7.7e9] {
        for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
            for t in [0.0, 1e-10, 0.5e-9, 1.7e-9, 3e-9, 1e-8] {
                let ch = gad_kraus(&GadParams::new(gamma, lambda, t).unwrap());
                worst = worst.max(ch.cptp_check());
            }
        }
    }
    worst
}

/// Quadratic-convergence ratios e(0.2)/e(0.1) for every benchmark operator.
pub fn convergence_ratios() -> Result<Vec<f64>> {
    benchmark_operators()
        .iter()
        .map(|m| {
            let e = |eps: f64| -> Result<f64> {
                Ok(effective_operator(m, eps)?.matrix.max_abs_diff(m))
            };
            Ok(e(0.2)? / e(0.1)?)
        })
        .collect()
}

/// Largest deviation of the exact-mode circuit estimate (given form) from the
/// dense diag(M_eff |ψ⟩⟨ψ| M_eff†) oracle, over a block set built from `m`.
pub fn circuit_oracle_residual(
    blocks: &UnitaryBlockSet,
    m: &ComplexMatrix,
    psi: &ComplexVector,
    form: CircuitForm,
) -> Result<f64> {
    let eff = effective_operator(m, blocks.epsilon())?.matrix;
    let v = eff.matvec(psi);
    let estimate = estimate_from_blocks(blocks, psi, Mode::Exact, 0, &seed_ctx(), form)?;
    Ok(estimate
        .iter()
        .enumerate()
        .map(|(j, &d)| (d - v.get(j).norm_sqr()).abs())
        .fold(0.0, f64::max))
}

/// Largest disagreement between the full 4-block circuit and the reduced
/// pair/single set, exact mode.
pub fn form_equivalence_residual(blocks: &UnitaryBlockSet, psi: &ComplexVector) -> Result<f64> {
    let a = estimate_from_blocks(blocks, psi, Mode::Exact, 0, &seed_ctx(), CircuitForm::Full4)?;
    let b = estimate_from_blocks(blocks, psi, Mode::Exact, 0, &seed_ctx(), CircuitForm::Reduced2)?;
    Ok(a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Largest deviation of the pair/single recombination identity from the
/// brute-force |Σ a_k|² over random complex 4-tuples.
pub fn reconstruction_identity_residual(samples: usize, seed: u64) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    let eps = 0.9;
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let a: Vec<Complex64> = (0..4)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut pairs = Vec::new();
        for i in 0..4 {
            for k in (i + 1)..4 {
                pairs.push(vec![((a[i] + a[k]) / 2.0).norm_sqr()]);
            }
        }
        let singles: Vec<Vec<f64>> = a.iter().map(|z| vec![z.norm_sqr()]).collect();
        let diag = crate::experiment::reconstruct_diagonal(&pairs, &singles, eps)
            .expect("well-formed counts");
        let brute = a.iter().sum::<Complex64>().norm_sqr() / (4.0 * eps * eps);
        worst = worst.max((diag[0] - brute).abs());
    }
    worst
}

/// Run every property and report pass/fail per property.
pub fn run_all(seed: u64) -> Vec<PropertyReport> {
    let mut reports = Vec::new();
    let mut rng = StdRng::seed_from_u64(seed);

    match max_unitarity_residual(&[0.2, 1.0, 1.15]) {
        Ok(worst) => reports.push(PropertyReport::from_bound(
            "block-unitarity",
            worst,
            UNITARY_TOL,
        )),
        Err(e) => reports.push(PropertyReport {
            name: "block-unitarity",
            passed: false,
            detail: e.to_string(),
        }),
    }

    reports.push(PropertyReport::from_bound(
        "cptp-completeness",
        max_cptp_residual(),
        1e-12,
    ));

    match convergence_ratios() {
        Ok(ratios) => {
            let ok = ratios.iter().all(|r| (3.5..=4.5).contains(r));
            reports.push(PropertyReport {
                name: "quadratic-convergence",
                passed: ok,
                detail: format!(
                    "ratios {:?} (want within [3.5, 4.5])",
                    ratios.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>()
                ),
            });
        }
        Err(e) => reports.push(PropertyReport {
            name: "quadratic-convergence",
            passed: false,
            detail: e.to_string(),
        }),
    }

    let mut oracle_worst = 0.0f64;
    let mut form_worst = 0.0f64;
    let mut failure: Option<String> = None;
    let states = benchmark_states(&mut rng, 3);
    'outer: for m in benchmark_operators() {
        for &eps in &[0.2, 1.0] {
            let blocks = match build_block_set(&m, eps) {
                Ok(b) => b,
                Err(e) => {
                    failure = Some(e.to_string());
                    break 'outer;
                }
            };
            for psi in &states {
                for form in [CircuitForm::Full4, CircuitForm::Reduced2] {
                    match circuit_oracle_residual(&blocks, &m, psi, form) {
                        Ok(r) => oracle_worst = oracle_worst.max(r),
                        Err(e) => {
                            failure = Some(e.to_string());
                            break 'outer;
                        }
                    }
                }
                match form_equivalence_residual(&blocks, psi) {
                    Ok(r) => form_worst = form_worst.max(r),
                    Err(e) => {
                        failure = Some(e.to_string());
                        break 'outer;
                    }
                }
            }
        }
    }
    match failure {
        Some(msg) => {
            reports.push(PropertyReport {
                name: "circuit-oracle-equivalence",
                passed: false,
                detail: msg.clone(),
            });
            reports.push(PropertyReport {
                name: "form-equivalence",
                passed: false,
                detail: msg,
            });
        }
        None => {
            reports.push(PropertyReport::from_bound(
                "circuit-oracle-equivalence",
                oracle_worst,
                1e-10,
            ));
            reports.push(PropertyReport::from_bound(
                "form-equivalence",
                form_worst,
                1e-10,
            ));
        }
    }

    reports.push(PropertyReport::from_bound(
        "reconstruction-identity",
        reconstruction_identity_residual(1000, seed ^ 0xA5A5),
        1e-12,
    ));

    reports.push(determinism_report(seed));
    reports.push(parameter_rejection_report());
    reports
}

fn determinism_report(seed: u64) -> PropertyReport {
    let mut config = ExperimentConfig::benchmark(ChannelFamily::infinite_temperature());
    config.mode = Mode::Sampled;
    config.shots = 256;
    config.repetitions = 2;
    config.master_seed = seed;
    config.time_grid = vec![0.0, 1.5e-9];
    config.epsilons = vec![1.15, 1.0];
    config.richardson = Some(RichardsonSpec::standard(1));
    let run = |parallel: bool| {
        let mut c = config.clone();
        c.parallel = parallel;
        run_trace(&c).map(|t| t.to_tsv())
    };
    match (run(true), run(false)) {
        (Ok(a), Ok(b)) => PropertyReport {
            name: "execution-determinism",
            passed: a == b,
            detail: if a == b {
                "parallel and serial traces byte-identical".into()
            } else {
                "parallel and serial traces differ".into()
            },
        },
        (Err(e), _) | (_, Err(e)) => PropertyReport {
            name: "execution-determinism",
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn parameter_rejection_report() -> PropertyReport {
    let m = ComplexMatrix::identity(2);
    let eps_zero = build_block_set(&m, 0.0).is_err();
    let eps_neg = effective_operator(&m, -0.5).is_err();
    let rich_bad = richardson_step(&[1.0], &[1.0], 0.2, 0.4, 2).is_err();
    let shots_zero = crate::statevector::sample_counts(&[1.0], 0, 1).is_err();
    let passed = eps_zero && eps_neg && rich_bad && shots_zero;
    PropertyReport {
        name: "parameter-rejection",
        passed,
        detail: format!(
            "eps=0 rejected: {eps_zero}, eps<0 rejected: {eps_neg}, bad ratio rejected: {rich_bad}, shots=0 rejected: {shots_zero}"
        ),
    }
}
