//! Oracle suite behind `qosgame validate`: Monte Carlo checks of the
//! retransmission and queueing closed forms, and best-response dynamics
//! checked against the direct power solve.

use std::fmt::Write as _;
use std::str::FromStr;

use qosgame::dynamics::{run_best_response, BestResponseConfig, Start};
use qosgame::pcg::{finite_k_mf_powers, mf_load};
use qosgame::sim::{simulate_mg1, simulate_retransmissions, Estimate};
use qosgame::{mg1_mean_wait, EfficiencyModel, RadioEnv};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::Result;

pub const DEFAULT_SEED: u64 = 2024;

/// Monte Carlo agreement bound in standard errors.
pub const SIGMAS: f64 = 3.0;

/// Fraction of a Monte Carlo grid that must fall within [`SIGMAS`].
pub const MIN_HIT_FRACTION: f64 = 0.95;

pub const POWER_TOL: f64 = 1e-8;
pub const SIR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    /// Reduced sample counts for quick runs.
    Small,
    #[default]
    Full,
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "small" => Ok(Scale::Small),
            "full" => Ok(Scale::Full),
            _ => Err(format!("unknown scale `{s}` (expected small or full)")),
        }
    }
}

impl Scale {
    pub fn samples(self) -> u64 {
        match self {
            Scale::Small => 100_000,
            Scale::Full => 1_000_000,
        }
    }

    pub fn instances(self) -> usize {
        match self {
            Scale::Small => 20,
            Scale::Full => 100,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scale::Small => "small",
            Scale::Full => "full",
        }
    }
}

/// One Monte Carlo case: estimate against its closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McCase {
    pub label: (f64, f64),
    pub estimate: Estimate,
    pub target: f64,
}

impl McCase {
    pub fn hit(&self) -> bool {
        self.estimate.within(self.target, SIGMAS)
    }
}

/// Per-case seeds derived from the run seed.
fn case_seed(seed: u64, group: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(group << 32)
        .wrapping_add(index as u64)
}

/// `Pr{X ≤ L}` over 5 success probabilities × 4 retransmission limits.
pub fn retransmission_grid(seed: u64, samples: u64, pool: &ThreadPool) -> Result<Vec<McCase>> {
    let grid: Vec<(f64, u32)> = [0.1, 0.3, 0.5, 0.7, 0.9]
        .iter()
        .flat_map(|&f| [1u32, 2, 3, 5].map(|l| (f, l)))
        .collect();
    pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(i, &(f, l))| {
                let estimate = simulate_retransmissions(f, l, samples, case_seed(seed, 1, i))?;
                Ok(McCase {
                    label: (f, l as f64),
                    estimate,
                    target: 1.0 - (1.0 - f).powi(l as i32),
                })
            })
            .collect()
    })
}

/// Mean sojourn time over 4 arrival rates × 5 success probabilities with a
/// 1 ms transmission slot.
pub fn mg1_grid(seed: u64, packets: u64, pool: &ThreadPool) -> Result<Vec<McCase>> {
    const SLOT: f64 = 0.001;
    let grid: Vec<(f64, f64)> = [10.0, 50.0, 100.0, 200.0]
        .iter()
        .flat_map(|&l| [0.3, 0.5, 0.7, 0.9, 1.0].map(|f| (l, f)))
        .collect();
    pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(i, &(lambda, f))| {
                let estimate = simulate_mg1(lambda, SLOT, f, packets, case_seed(seed, 2, i))?;
                Ok(McCase {
                    label: (lambda, f),
                    estimate,
                    target: mg1_mean_wait(lambda, SLOT, f)?,
                })
            })
            .collect()
    })
}

/// Worst-case agreement of best response with the direct solve on one
/// random feasible instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrCase {
    pub users: usize,
    pub converged: bool,
    pub power_error: f64,
    pub sir_error: f64,
    /// Relative gap between the limits reached from zero and from `P_max`.
    pub start_gap: f64,
}

impl BrCase {
    pub fn pass(&self) -> bool {
        self.converged
            && self.power_error <= POWER_TOL
            && self.sir_error <= SIR_TOL
            && self.start_gap <= POWER_TOL
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Random matched-filter instances with up to 50 users, kept well inside the
/// feasible region.
pub fn best_response_grid(seed: u64, instances: usize, pool: &ThreadPool) -> Result<Vec<BrCase>> {
    let model = EfficiencyModel::exponential(100)?;
    let mut rng = ChaCha8Rng::seed_from_u64(case_seed(seed, 3, 0));
    let mut envs = Vec::with_capacity(instances);
    while envs.len() < instances {
        let k = rng.random_range(1..=50);
        let n: f64 = rng.random_range(64.0..1024.0);
        let targets: Vec<f64> = (0..k).map(|_| rng.random_range(1.0..12.0)).collect();
        let gains: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..2.0)).collect();
        let noise = rng.random_range(1e-3..1.0);
        if mf_load(&targets, n) >= 0.9 {
            continue;
        }
        envs.push((RadioEnv::new(noise, gains, n, 1e12)?, targets));
    }
    let config = BestResponseConfig {
        tol: 1e-13,
        ..Default::default()
    };
    pool.install(|| {
        envs.par_iter()
            .map(|(env, targets)| {
                let rates = vec![1.0; targets.len()];
                let direct = finite_k_mf_powers(env, targets)?;
                let zero = run_best_response(env, targets, &rates, &model, &config, Start::Zero)?;
                let high =
                    run_best_response(env, targets, &rates, &model, &config, Start::MaxPower)?;
                let p0 = zero.outcome.powers();
                let p1 = high.outcome.powers();
                let fold = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
                Ok(BrCase {
                    users: targets.len(),
                    converged: zero.converged() && high.converged(),
                    power_error: fold(&mut p0.iter().zip(&direct).map(|(a, b)| rel(*a, *b))),
                    sir_error: fold(
                        &mut zero
                            .outcome
                            .users
                            .iter()
                            .map(|u| rel(u.achieved_sir, u.sir_target)),
                    ),
                    start_gap: fold(&mut p0.iter().zip(&p1).map(|(a, b)| rel(*a, *b))),
                })
            })
            .collect()
    })
}

/// Two-class population whose matched-filter load exceeds one must end
/// pinned at the power cap.
fn infeasible_case() -> Result<(bool, f64)> {
    let model = EfficiencyModel::exponential(100)?;
    let targets: Vec<f64> = (0..20)
        .map(|k| {
            if k < 10 {
                9.205_369_664_023_067
            } else {
                model.gamma_star()
            }
        })
        .collect();
    let env = RadioEnv::new(1.0, vec![1.0; 20], 100.0, 10.0)?;
    let run = run_best_response(
        &env,
        &targets,
        &[1.0; 20],
        &model,
        &BestResponseConfig::default(),
        Start::Zero,
    )?;
    let flagged =
        !run.converged() && !run.outcome.feasible && !run.outcome.clipped_users().is_empty();
    Ok((flagged, mf_load(&targets, 100.0)))
}

/// Text report and the number of failed checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub text: String,
    pub failures: usize,
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn mc_section(out: &mut String, name: &str, labels: (&str, &str), cases: &[McCase]) -> bool {
    let _ = writeln!(out, "[{name}]");
    for c in cases {
        let _ = writeln!(
            out,
            "  {}={} {}={} n={} mean={:.9e} se={:.3e} target={:.9e} z={:.3} {}",
            labels.0,
            c.label.0,
            labels.1,
            c.label.1,
            c.estimate.samples,
            c.estimate.mean,
            c.estimate.std_error,
            c.target,
            c.estimate.z_score(c.target),
            if c.hit() { "ok" } else { "miss" },
        );
    }
    let hits = cases.iter().filter(|c| c.hit()).count();
    let need = (MIN_HIT_FRACTION * cases.len() as f64).ceil() as usize;
    let ok = hits >= need;
    let _ = writeln!(
        out,
        "{name}: {hits}/{} within {SIGMAS} SE (need {need}) {}",
        cases.len(),
        verdict(ok)
    );
    ok
}

/// Runs the whole suite. The report depends only on `seed` and `scale`.
pub fn run(seed: u64, scale: Scale, pool: &ThreadPool) -> Result<ValidationReport> {
    let mut text = String::new();
    let mut failures = 0;
    let _ = writeln!(text, "qosgame validate seed={seed} scale={}", scale.name());

    let retx = retransmission_grid(seed, scale.samples(), pool)?;
    failures += !mc_section(&mut text, "retransmissions", ("f", "L"), &retx) as usize;

    let mg1 = mg1_grid(seed, scale.samples(), pool)?;
    failures += !mc_section(&mut text, "mg1_wait", ("lambda", "f"), &mg1) as usize;

    let br = best_response_grid(seed, scale.instances(), pool)?;
    let _ = writeln!(text, "[best_response]");
    for (i, c) in br.iter().enumerate() {
        let _ = writeln!(
            text,
            "  instance={i} K={} converged={} power_err={:.3e} sir_err={:.3e} start_gap={:.3e} {}",
            c.users,
            c.converged,
            c.power_error,
            c.sir_error,
            c.start_gap,
            if c.pass() { "ok" } else { "miss" },
        );
    }
    let passed = br.iter().filter(|c| c.pass()).count();
    let ok = passed == br.len();
    failures += !ok as usize;
    let _ = writeln!(
        text,
        "best_response: {passed}/{} within power {POWER_TOL:e} and SIR {SIR_TOL:e} {}",
        br.len(),
        verdict(ok)
    );

    let (flagged, load) = infeasible_case()?;
    failures += !flagged as usize;
    let _ = writeln!(
        text,
        "infeasible_flagged: load={load:.6} flagged={flagged} {}",
        verdict(flagged)
    );

    let _ = writeln!(
        text,
        "result: {} ({failures} failed)",
        verdict(failures == 0)
    );
    Ok(ValidationReport { text, failures })
}
