//! Nash equilibrium of the delay-constrained power control game.
//!
//! Each user maximizes its bits-per-Joule utility `u = R f(γ)/p` subject to a
//! delay-induced SIR floor `γ̃`. At equilibrium every user operates at
//! `max(γ̃, γ*)` (independent of the linear receiver), with power clipped at
//! `P_max`. This module provides:
//!
//! * the per-class SIR targets,
//! * the large-system utilities and powers for the matched filter,
//!   decorrelator and MMSE receivers, where the load of class `c` is
//!   `α_c = K_c/N`,
//! * the exact finite-`K` matched-filter powers.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::delay::{sir_target_infinite, OutageDelaySpec};
use crate::error::{domain, Error, Result};
use crate::psr::EfficiencyModel;

/// Linear multiuser receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Receiver {
    MatchedFilter,
    Decorrelator,
    Mmse,
}

impl Receiver {
    pub const ALL: [Receiver; 3] = [
        Receiver::MatchedFilter,
        Receiver::Decorrelator,
        Receiver::Mmse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Receiver::MatchedFilter => "mf",
            Receiver::Decorrelator => "de",
            Receiver::Mmse => "mmse",
        }
    }

    /// Resource consumed per unit load by a user with SIR `sir`: `γ` for the
    /// matched filter, `1` for the decorrelator, `γ/(1+γ)` for MMSE.
    pub fn interference_weight(self, sir: f64) -> f64 {
        match self {
            Receiver::MatchedFilter => sir,
            Receiver::Decorrelator => 1.0,
            Receiver::Mmse => sir / (1.0 + sir),
        }
    }

    fn condition(self) -> &'static str {
        match self {
            Receiver::MatchedFilter => "sum alpha_c * gamma_c",
            Receiver::Decorrelator => "sum alpha_c",
            Receiver::Mmse => "sum alpha_c * gamma_c / (1 + gamma_c)",
        }
    }
}

impl fmt::Display for Receiver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Receiver {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mf" | "matched_filter" | "matched-filter" => Ok(Receiver::MatchedFilter),
            "de" | "decorrelator" => Ok(Receiver::Decorrelator),
            "mmse" => Ok(Receiver::Mmse),
            other => Err(format!(
                "unknown receiver `{other}` (expected mf, de or mmse)"
            )),
        }
    }
}

/// A class of users sharing one delay requirement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassSpec {
    load: f64,
    requirement: Option<OutageDelaySpec>,
    rate: f64,
}

impl ClassSpec {
    /// `load` is `α_c = K_c/N`; `requirement = None` means delay tolerant.
    pub fn new(load: f64, requirement: Option<OutageDelaySpec>, rate: f64) -> Result<Self> {
        if !(load > 0.0 && load.is_finite()) {
            return Err(domain("alpha", load, "class load must be positive"));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(domain("R", rate, "transmission rate must be positive"));
        }
        Ok(Self {
            load,
            requirement,
            rate,
        })
    }

    pub fn load(&self) -> f64 {
        self.load
    }

    pub fn requirement(&self) -> Option<&OutageDelaySpec> {
        self.requirement.as_ref()
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

/// Equilibrium SIR `max(γ̃_c, γ*)` of every class.
pub fn pcg_sir_targets(classes: &[ClassSpec], model: &EfficiencyModel) -> Vec<f64> {
    classes
        .iter()
        .map(|c| sir_target_infinite(c.requirement(), model))
        .collect()
}

/// Large-system feasibility verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub receiver: Receiver,
    pub feasible: bool,
    /// `Σ α_c w(γ_c)` with the receiver's weight `w`.
    pub load_measure: f64,
    /// `1 − load_measure`; the interference margin that scales utilities.
    pub slack: f64,
}

pub fn feasibility(
    receiver: Receiver,
    classes: &[ClassSpec],
    model: &EfficiencyModel,
) -> Feasibility {
    let loads: Vec<f64> = classes.iter().map(ClassSpec::load).collect();
    feasibility_for(receiver, &loads, &pcg_sir_targets(classes, model))
}

/// Feasibility from raw per-class loads (zero allowed) and SIR targets.
pub fn feasibility_for(receiver: Receiver, loads: &[f64], targets: &[f64]) -> Feasibility {
    let load_measure: f64 = loads
        .iter()
        .zip(targets)
        .map(|(a, &g)| a * receiver.interference_weight(g))
        .sum();
    Feasibility {
        receiver,
        feasible: load_measure < 1.0,
        load_measure,
        slack: 1.0 - load_measure,
    }
}

fn require_feasible(f: Feasibility) -> Result<Feasibility> {
    if f.feasible {
        Ok(f)
    } else {
        Err(Error::Infeasible {
            condition: f.receiver.condition(),
            measure: f.load_measure,
        })
    }
}

/// Per-class equilibrium utility in bits/Joule for a user with amplitude gain
/// `gain` and noise power `noise`:
/// `u_c = (R_c h²/σ²)(1 − Σ α_j w(γ_j)) f(γ_c)/γ_c`.
pub fn multiclass_utilities(
    receiver: Receiver,
    classes: &[ClassSpec],
    gain: f64,
    noise: f64,
    model: &EfficiencyModel,
) -> Result<Vec<f64>> {
    check_link(gain, noise)?;
    let targets = pcg_sir_targets(classes, model);
    let f = require_feasible(feasibility(receiver, classes, model))?;
    Ok(classes
        .iter()
        .zip(&targets)
        .map(|(c, &g)| c.rate * gain * gain / noise * f.slack * model.efficiency_ratio(g))
        .collect())
}

/// Per-class equilibrium power in Watts: `p_c = σ² γ_c / (h² (1 − Σ α_j w(γ_j)))`.
/// Not clipped at `P_max`; see [`large_system_outcome`].
pub fn equilibrium_powers_large_system(
    receiver: Receiver,
    classes: &[ClassSpec],
    gain: f64,
    noise: f64,
    model: &EfficiencyModel,
) -> Result<Vec<f64>> {
    check_link(gain, noise)?;
    let targets = pcg_sir_targets(classes, model);
    let f = require_feasible(feasibility(receiver, classes, model))?;
    Ok(targets
        .iter()
        .map(|&g| noise * g / (gain * gain * f.slack))
        .collect())
}

fn check_link(gain: f64, noise: f64) -> Result<()> {
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(domain("h", gain, "channel gain must be positive"));
    }
    if !(noise > 0.0 && noise.is_finite()) {
        return Err(domain("sigma2", noise, "noise power must be positive"));
    }
    Ok(())
}

/// Equilibrium of one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserOutcome {
    pub class: Option<usize>,
    pub sir_target: f64,
    pub achieved_sir: f64,
    /// Transmit power in Watts, after clipping at `P_max`.
    pub power: f64,
    pub rate: f64,
    /// Bits per Joule at the achieved SIR.
    pub utility: f64,
    pub clipped: bool,
}

impl UserOutcome {
    pub fn meets_target(&self) -> bool {
        !self.clipped
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumOutcome {
    pub users: Vec<UserOutcome>,
    pub feasible: bool,
    pub reason: Option<String>,
}

impl EquilibriumOutcome {
    pub fn powers(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.power).collect()
    }

    pub fn clipped_users(&self) -> Vec<usize> {
        self.users
            .iter()
            .enumerate()
            .filter(|(_, u)| u.clipped)
            .map(|(i, _)| i)
            .collect()
    }

    fn from_users(users: Vec<UserOutcome>) -> Self {
        let clipped = users.iter().filter(|u| u.clipped).count();
        let (feasible, reason) = if clipped == 0 {
            (true, None)
        } else {
            (
                false,
                Some(format!("{clipped} user(s) limited by the maximum power")),
            )
        };
        Self {
            users,
            feasible,
            reason,
        }
    }
}

/// A user in the large-system model: which class it belongs to and its own
/// amplitude gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMember {
    pub class: usize,
    pub gain: f64,
}

/// Per-user equilibrium in the large-system limit.
///
/// Powers scale as `1/h_k²` and utilities as `h_k²` relative to the unit-gain
/// class solution. A user whose power would exceed `max_power` transmits at
/// `max_power`; since a single user does not change the asymptotic
/// interference, its achieved SIR is scaled down proportionally.
pub fn large_system_outcome(
    receiver: Receiver,
    classes: &[ClassSpec],
    members: &[ClassMember],
    noise: f64,
    max_power: f64,
    model: &EfficiencyModel,
) -> Result<EquilibriumOutcome> {
    if !(max_power > 0.0) {
        return Err(domain("P_max", max_power, "maximum power must be positive"));
    }
    let unit_powers = equilibrium_powers_large_system(receiver, classes, 1.0, noise, model)?;
    let targets = pcg_sir_targets(classes, model);
    let mut users = Vec::with_capacity(members.len());
    for m in members {
        let c = *classes.get(m.class).ok_or(Error::Dimension {
            what: "class index",
            expected: classes.len(),
            got: m.class,
        })?;
        check_link(m.gain, noise)?;
        let wanted = unit_powers[m.class] / (m.gain * m.gain);
        let power = wanted.min(max_power);
        let achieved = targets[m.class] * power / wanted;
        users.push(UserOutcome {
            class: Some(m.class),
            sir_target: targets[m.class],
            achieved_sir: achieved,
            power,
            rate: c.rate,
            utility: c.rate * model.value(achieved) / power,
            clipped: wanted > max_power,
        });
    }
    Ok(EquilibriumOutcome::from_users(users))
}

/// Finite-`K` radio environment for the matched filter with processing gain
/// `N`. Gains are amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioEnv {
    noise: f64,
    gains: Vec<f64>,
    processing_gain: f64,
    max_power: f64,
}

impl RadioEnv {
    pub fn new(noise: f64, gains: Vec<f64>, processing_gain: f64, max_power: f64) -> Result<Self> {
        if !(noise > 0.0 && noise.is_finite()) {
            return Err(domain("sigma2", noise, "noise power must be positive"));
        }
        if let Some(&h) = gains.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(domain("h", h, "channel gain must be positive"));
        }
        if !(processing_gain >= 1.0 && processing_gain.is_finite()) {
            return Err(domain("N", processing_gain, "processing gain must be >= 1"));
        }
        if !(max_power > 0.0) || max_power.is_nan() {
            return Err(domain("P_max", max_power, "maximum power must be positive"));
        }
        Ok(Self {
            noise,
            gains,
            processing_gain,
            max_power,
        })
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn processing_gain(&self) -> f64 {
        self.processing_gain
    }

    pub fn max_power(&self) -> f64 {
        self.max_power
    }

    pub fn users(&self) -> usize {
        self.gains.len()
    }

    /// Matched-filter output SIRs
    /// `γ_k = p_k h_k² / (σ² + (1/N) Σ_{j≠k} p_j h_j²)`.
    pub fn sirs(&self, powers: &[f64]) -> Vec<f64> {
        let received: Vec<f64> = powers
            .iter()
            .zip(&self.gains)
            .map(|(p, h)| p * h * h)
            .collect();
        let total: f64 = received.iter().sum();
        received
            .iter()
            .map(|&q| q / (self.noise + (total - q) / self.processing_gain))
            .collect()
    }

    /// Power user `k` needs to hit `target` against the interference created by
    /// `powers` (its own entry is ignored).
    pub(crate) fn required_power(&self, k: usize, target: f64, powers: &[f64], total: f64) -> f64 {
        let h2 = self.gains[k] * self.gains[k];
        let others = total - powers[k] * h2;
        target * (self.noise + others / self.processing_gain) / h2
    }

    fn check_targets(&self, targets: &[f64]) -> Result<()> {
        if targets.len() != self.users() {
            return Err(Error::Dimension {
                what: "SIR targets",
                expected: self.users(),
                got: targets.len(),
            });
        }
        if let Some(&g) = targets.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(domain("gamma", g, "SIR target must be positive"));
        }
        Ok(())
    }
}

/// `Σ_k 1/(1 + N/γ_k)`; the targets are reachable iff this is below one.
pub fn mf_load(targets: &[f64], processing_gain: f64) -> f64 {
    targets
        .iter()
        .map(|g| 1.0 / (1.0 + processing_gain / g))
        .sum()
}

/// Unique positive powers at which every matched-filter SIR equals its
/// target, ignoring `P_max`.
///
/// Solved as the `K × K` linear system in received powers `q_k = p_k h_k²`:
/// `q_k − (γ_k/N) Σ_{j≠k} q_j = γ_k σ²`. If the factorization fails or the
/// solution is not accurate, falls back to fixed-point iteration.
pub fn finite_k_mf_powers(env: &RadioEnv, targets: &[f64]) -> Result<Vec<f64>> {
    env.check_targets(targets)?;
    let load = mf_load(targets, env.processing_gain);
    if !(load < 1.0) {
        return Err(Error::Infeasible {
            condition: "sum 1/(1 + N/gamma_k)",
            measure: load,
        });
    }
    match solve_direct(env, targets) {
        Some(p) => Ok(p),
        None => finite_k_mf_powers_iterative(env, targets, 1e-14, 1_000_000),
    }
}

fn solve_direct(env: &RadioEnv, targets: &[f64]) -> Option<Vec<f64>> {
    let k = targets.len();
    if k == 0 {
        return Some(Vec::new());
    }
    let n = env.processing_gain;
    let a = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { -targets[i] / n });
    let b = DVector::from_iterator(k, targets.iter().map(|g| g * env.noise));
    let q = a.lu().solve(&b)?;
    if q.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return None;
    }
    let powers: Vec<f64> = q.iter().zip(&env.gains).map(|(q, h)| q / (h * h)).collect();
    let ok = env
        .sirs(&powers)
        .iter()
        .zip(targets)
        .all(|(s, t)| ((s - t) / t).abs() < 1e-10);
    ok.then_some(powers)
}

/// Fixed-point iteration `q ← γ (σ² + (Q − q)/N)` from zero, stopped when
/// the largest relative change drops below `tol`.
pub fn finite_k_mf_powers_iterative(
    env: &RadioEnv,
    targets: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    env.check_targets(targets)?;
    let load = mf_load(targets, env.processing_gain);
    if !(load < 1.0) {
        return Err(Error::Infeasible {
            condition: "sum 1/(1 + N/gamma_k)",
            measure: load,
        });
    }
    let mut p = vec![0.0; targets.len()];
    for _ in 0..max_iter {
        let total: f64 = p.iter().zip(&env.gains).map(|(p, h)| p * h * h).sum();
        let next: Vec<f64> = (0..p.len())
            .map(|k| env.required_power(k, targets[k], &p, total))
            .collect();
        let change = next
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b).abs() / a)
            .fold(0.0, f64::max);
        p = next;
        if change < tol {
            return Ok(p);
        }
    }
    Err(Error::NoConvergence("matched-filter power iteration"))
}

/// Finite-`K` matched-filter equilibrium with clipping at `P_max`. Achieved
/// SIRs are recomputed under the clipped powers.
pub fn finite_k_mf_equilibrium(
    env: &RadioEnv,
    targets: &[f64],
    rates: &[f64],
    model: &EfficiencyModel,
) -> Result<EquilibriumOutcome> {
    if rates.len() != env.users() {
        return Err(Error::Dimension {
            what: "rates",
            expected: env.users(),
            got: rates.len(),
        });
    }
    let wanted = finite_k_mf_powers(env, targets)?;
    let powers: Vec<f64> = wanted.iter().map(|p| p.min(env.max_power)).collect();
    let sirs = env.sirs(&powers);
    let users = (0..env.users())
        .map(|k| UserOutcome {
            class: None,
            sir_target: targets[k],
            achieved_sir: sirs[k],
            power: powers[k],
            rate: rates[k],
            utility: rates[k] * model.value(sirs[k]) / powers[k],
            clipped: wanted[k] > env.max_power,
        })
        .collect();
    Ok(EquilibriumOutcome::from_users(users))
}

/// One point of a utility-loss sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRow {
    pub receiver: Receiver,
    /// `α_A/α`.
    pub split: f64,
    pub feasible: bool,
    /// `u_A/u`, `None` when infeasible.
    pub ratio_a: Option<f64>,
    /// `u_B/u`, `None` when infeasible.
    pub ratio_b: Option<f64>,
}

/// Utility of class A and class B users relative to the utility `u` all users
/// would get at the same total load with no delay requirements.
///
/// At `split = 0` (or `1`) the absent class's ratio is that of a single
/// entering user, i.e. the limit as its load goes to zero.
pub fn utility_loss_sweep(
    receiver: Receiver,
    total_load: f64,
    splits: &[f64],
    class_a: Option<&OutageDelaySpec>,
    class_b: Option<&OutageDelaySpec>,
    model: &EfficiencyModel,
) -> Result<Vec<LossRow>> {
    if !(total_load > 0.0 && total_load.is_finite()) {
        return Err(domain("alpha", total_load, "total load must be positive"));
    }
    if let Some(&s) = splits.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(domain("split", s, "load fraction must lie in [0, 1]"));
    }
    Ok(splits
        .iter()
        .map(|&s| utility_loss_point(receiver, total_load, s, class_a, class_b, model))
        .collect())
}

/// Single point of [`utility_loss_sweep`].
pub fn utility_loss_point(
    receiver: Receiver,
    total_load: f64,
    split: f64,
    class_a: Option<&OutageDelaySpec>,
    class_b: Option<&OutageDelaySpec>,
    model: &EfficiencyModel,
) -> LossRow {
    let gs = model.gamma_star();
    let ga = sir_target_infinite(class_a, model);
    let gb = sir_target_infinite(class_b, model);
    let load_a = split * total_load;
    let loads = [load_a, total_load - load_a];

    // Baseline uses the same decomposition of the load with every target at
    // γ*, so the two margins are computed by identical expressions.
    let mixed = feasibility_for(receiver, &loads, &[ga, gb]);
    let base = feasibility_for(receiver, &loads, &[gs, gs]);
    if !(mixed.feasible && base.feasible) {
        return LossRow {
            receiver,
            split,
            feasible: false,
            ratio_a: None,
            ratio_b: None,
        };
    }
    let margin = mixed.slack / base.slack;
    let eff = |g: f64| model.efficiency_ratio(g) / model.efficiency_ratio(gs);
    LossRow {
        receiver,
        split,
        feasible: true,
        ratio_a: Some(margin * eff(ga)),
        ratio_b: Some(margin * eff(gb)),
    }
}
