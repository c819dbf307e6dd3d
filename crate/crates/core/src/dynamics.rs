//! Best-response power dynamics for the finite-`K` matched filter.
//!
//! At the game's equilibrium each user transmits exactly the power that meets
//! its SIR target against the others' interference, capped at `P_max`. Iterating
//! that map from any starting point converges to the unique fixed point when
//! the targets are feasible, which gives an independent check of
//! [`finite_k_mf_powers`](crate::pcg::finite_k_mf_powers).
//!
//! Updates are synchronous (Jacobi style), so a trajectory does not depend on
//! user ordering.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::pcg::{EquilibriumOutcome, RadioEnv, UserOutcome};
use crate::psr::EfficiencyModel;

/// Default relative tolerance on the largest per-user power change.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Consecutive iterations with a pinned, under-target user after which the
/// run is declared infeasible.
pub const CLIP_PATIENCE: usize = 50;

/// One synchronous best-response sweep:
/// `p_k ← min(P_max, γ_k (σ² + (1/N) Σ_{j≠k} p_j h_j²)/h_k²)`.
pub fn best_response_step(env: &RadioEnv, targets: &[f64], powers: &[f64]) -> Vec<f64> {
    let total: f64 = powers.iter().zip(env.gains()).map(|(p, h)| p * h * h).sum();
    (0..powers.len())
        .map(|k| {
            env.required_power(k, targets[k], powers, total)
                .min(env.max_power())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponseConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub record_trajectory: bool,
}

impl Default for BestResponseConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: 100_000,
            record_trajectory: false,
        }
    }
}

/// Where a best-response run starts.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    Zero,
    MaxPower,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub powers: Vec<f64>,
    pub sirs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Relative power change fell below the tolerance.
    Converged,
    /// Some user sat at `P_max` below its target for [`CLIP_PATIENCE`]
    /// consecutive sweeps.
    PowerLimited,
    /// Iteration budget exhausted.
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponseRun {
    pub outcome: EquilibriumOutcome,
    pub termination: Termination,
    pub iterations: usize,
    /// Populated when [`BestResponseConfig::record_trajectory`] is set. Entry 0
    /// is the starting point.
    pub trajectory: Vec<TrajectoryPoint>,
}

impl BestResponseRun {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    /// Writes the trajectory as CSV with columns
    /// `iteration,user,power_w,sir_ratio`.
    pub fn write_trajectory_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "iteration,user,power_w,sir_ratio")?;
        for point in &self.trajectory {
            for (k, (p, s)) in point.powers.iter().zip(&point.sirs).enumerate() {
                writeln!(out, "{},{},{},{}", point.iteration, k, p, s)?;
            }
        }
        Ok(())
    }
}

/// Iterates [`best_response_step`] until the powers settle, the run stalls at
/// the power cap, or `max_iter` sweeps pass. Non-convergence is reported in
/// the result, not as an error.
pub fn run_best_response(
    env: &RadioEnv,
    targets: &[f64],
    rates: &[f64],
    model: &EfficiencyModel,
    config: &BestResponseConfig,
    start: Start,
) -> Result<BestResponseRun> {
    let k = env.users();
    for (what, len) in [("SIR targets", targets.len()), ("rates", rates.len())] {
        if len != k {
            return Err(Error::Dimension {
                what,
                expected: k,
                got: len,
            });
        }
    }
    let mut powers = match start {
        Start::Zero => vec![0.0; k],
        Start::MaxPower => vec![env.max_power(); k],
        Start::Given(p) => {
            if p.len() != k {
                return Err(Error::Dimension {
                    what: "initial powers",
                    expected: k,
                    got: p.len(),
                });
            }
            p.into_iter()
                .map(|x| x.clamp(0.0, env.max_power()))
                .collect()
        }
    };

    let mut trajectory = Vec::new();
    if config.record_trajectory {
        trajectory.push(TrajectoryPoint {
            iteration: 0,
            sirs: env.sirs(&powers),
            powers: powers.clone(),
        });
    }

    let mut pinned_for = 0;
    let mut termination = Termination::IterationLimit;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let next = best_response_step(env, targets, &powers);
        let change = next
            .iter()
            .zip(&powers)
            .map(|(a, b)| {
                let d = (a - b).abs();
                if d == 0.0 {
                    0.0
                } else {
                    d / a.abs().max(b.abs())
                }
            })
            .fold(0.0, f64::max);
        powers = next;
        let sirs = env.sirs(&powers);
        if config.record_trajectory {
            trajectory.push(TrajectoryPoint {
                iteration: iterations,
                powers: powers.clone(),
                sirs: sirs.clone(),
            });
        }

        let stalled = powers
            .iter()
            .zip(&sirs)
            .zip(targets)
            .any(|((&p, s), t)| p >= env.max_power() && s < t);
        pinned_for = if stalled { pinned_for + 1 } else { 0 };

        if change < config.tol {
            // A fixed point with a user stuck below target is the clipped
            // equilibrium of an infeasible system, not convergence.
            termination = if stalled {
                Termination::PowerLimited
            } else {
                Termination::Converged
            };
            break;
        }
        if pinned_for >= CLIP_PATIENCE {
            termination = Termination::PowerLimited;
            break;
        }
    }

    let sirs = env.sirs(&powers);
    // A user is flagged when it is pinned at the cap and misses its target.
    let users: Vec<UserOutcome> = (0..k)
        .map(|i| UserOutcome {
            class: None,
            sir_target: targets[i],
            achieved_sir: sirs[i],
            power: powers[i],
            rate: rates[i],
            utility: if powers[i] > 0.0 {
                rates[i] * model.value(sirs[i]) / powers[i]
            } else {
                0.0
            },
            clipped: powers[i] >= env.max_power() && sirs[i] < targets[i] * (1.0 - 1e-9),
        })
        .collect();
    let clipped = users.iter().filter(|u| u.clipped).count();
    let (feasible, reason) = match (termination, clipped) {
        (Termination::Converged, 0) => (true, None),
        (Termination::IterationLimit, _) => (
            false,
            Some(format!("no convergence within {iterations} iterations")),
        ),
        (_, n) => (
            false,
            Some(format!(
                "{n} user(s) held at the maximum power below target"
            )),
        ),
    };
    Ok(BestResponseRun {
        outcome: EquilibriumOutcome {
            users,
            feasible,
            reason,
        },
        termination,
        iterations,
        trajectory,
    })
}
