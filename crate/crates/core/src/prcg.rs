//! Joint power and rate control with average-delay requirements.
//!
//! A user with Poisson arrivals `λ` and mean-delay bound `D` picks its rate
//! `R` and power `p` to maximize `R f(γ)/p`. At the efficient equilibrium every
//! user runs at `γ*` with rate `Ω*`, the rate at which the delay bound is
//! exactly tight at `γ*`:
//!
//! ```text
//! Ω* = (M/D) (1 + Dλ + √(1 + D²λ² + 2(1 − f*)Dλ)) / (2 f*),   f* = f(γ*)
//! ```
//!
//! The user's share of the system is its size `Φ* = 1/(1 + B/(Ω* γ*))`; a set
//! of users is admissible iff `Σ Φ* < 1`.

use crate::delay::AverageDelaySpec;
use crate::error::{domain, Error, Result};
use crate::pcg::{EquilibriumOutcome, UserOutcome};
use crate::psr::EfficiencyModel;

/// A user of the power-and-rate game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrcgUser {
    pub qos: AverageDelaySpec,
    /// Amplitude gain `h` (`h²` is the power gain).
    pub gain: f64,
    /// Watts.
    pub max_power: f64,
}

impl PrcgUser {
    pub fn new(qos: AverageDelaySpec, gain: f64, max_power: f64) -> Result<Self> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(domain("h", gain, "channel gain must be positive"));
        }
        if !(max_power > 0.0) || max_power.is_nan() {
            return Err(domain("P_max", max_power, "maximum power must be positive"));
        }
        Ok(Self {
            qos,
            gain,
            max_power,
        })
    }
}

/// System-wide parameters.
#[derive(Debug, Clone)]
pub struct SystemParams {
    bandwidth: f64,
    noise: f64,
    model: EfficiencyModel,
    gamma_star: f64,
    psr_star: f64,
}

impl SystemParams {
    pub fn new(bandwidth: f64, noise: f64, model: EfficiencyModel) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(domain("B", bandwidth, "bandwidth must be positive"));
        }
        if !(noise > 0.0 && noise.is_finite()) {
            return Err(domain("sigma2", noise, "noise power must be positive"));
        }
        let gamma_star = model.gamma_star();
        let psr_star = model.value(gamma_star);
        Ok(Self {
            bandwidth,
            noise,
            model,
            gamma_star,
            psr_star,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn model(&self) -> &EfficiencyModel {
        &self.model
    }

    pub fn gamma_star(&self) -> f64 {
        self.gamma_star
    }

    pub fn psr_star(&self) -> f64 {
        self.psr_star
    }

    pub fn packet_bits(&self) -> u32 {
        self.model.packet_bits()
    }

    /// `Ω*` for a user with requirement `qos`.
    pub fn omega_star(&self, qos: &AverageDelaySpec) -> f64 {
        omega_with(qos, self.packet_bits(), self.psr_star)
    }

    /// `Φ*` for a user with requirement `qos`.
    pub fn user_size(&self, qos: &AverageDelaySpec) -> f64 {
        phi_star(self.omega_star(qos), self.bandwidth, self.gamma_star)
    }
}

fn omega_with(qos: &AverageDelaySpec, packet_bits: u32, psr_star: f64) -> f64 {
    let d = qos.delay_bound();
    let dl = d * qos.arrival_rate();
    let root = (1.0 + dl * dl + 2.0 * (1.0 - psr_star) * dl).sqrt();
    packet_bits as f64 / d * (1.0 + dl + root) / (2.0 * psr_star)
}

/// Equilibrium transmission rate `Ω*` in bits/s.
pub fn omega_star(qos: &AverageDelaySpec, model: &EfficiencyModel) -> f64 {
    omega_with(qos, model.packet_bits(), model.psr_at_gamma_star())
}

/// User size `Φ* = 1/(1 + B/(Ω* γ*))`.
pub fn phi_star(omega: f64, bandwidth: f64, gamma_star: f64) -> f64 {
    let x = omega * gamma_star;
    x / (x + bandwidth)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Admission {
    pub admissible: bool,
    pub sizes: Vec<f64>,
    pub total_size: f64,
}

/// Admission test `Σ_k Φ*_k < 1`.
pub fn admissible(users: &[PrcgUser], params: &SystemParams) -> Admission {
    let sizes: Vec<f64> = users.iter().map(|u| params.user_size(&u.qos)).collect();
    let total_size = sizes.iter().sum::<f64>();
    Admission {
        admissible: total_size < 1.0,
        sizes,
        total_size,
    }
}

/// Largest number of identical users with requirement `qos` whose total size
/// stays strictly below one. Always at least one.
pub fn network_capacity(qos: &AverageDelaySpec, params: &SystemParams) -> usize {
    capacity_for_size(params.user_size(qos))
}

/// Largest `K` with `K Φ < 1`.
pub fn capacity_for_size(size: f64) -> usize {
    debug_assert!(size > 0.0 && size < 1.0);
    let mut k = ((1.0 / size).ceil() - 1.0).max(0.0) as usize;
    while ((k + 1) as f64) * size < 1.0 {
        k += 1;
    }
    while k > 0 && (k as f64) * size >= 1.0 {
        k -= 1;
    }
    k
}

/// Total goodput `K Ω* f*` in bits/s.
pub fn total_goodput(users: usize, omega: f64, psr_star: f64) -> f64 {
    users as f64 * omega * psr_star
}

/// Free function form of [`AverageDelaySpec::rate_constraint_ok`].
pub fn rate_constraint_ok(qos: &AverageDelaySpec, rate: f64, packet_bits: u32) -> Result<bool> {
    qos.rate_constraint_ok(rate, packet_bits)
}

/// The efficient equilibrium of the power-and-rate game.
#[derive(Debug, Clone, PartialEq)]
pub struct PrcgEquilibrium {
    pub outcome: EquilibriumOutcome,
    pub admission: Admission,
    /// Total received power `Σ p_k h_k²` before clipping.
    pub total_received: f64,
}

/// Variable-spreading matched-filter SIRs:
/// `γ_k = p_k h_k² / (σ² + (R_k/B) Σ_{j≠k} p_j h_j²)`, i.e. processing gain
/// `N_k = B/R_k`.
pub fn prcg_sirs(
    powers: &[f64],
    gains: &[f64],
    rates: &[f64],
    bandwidth: f64,
    noise: f64,
) -> Vec<f64> {
    let q: Vec<f64> = powers.iter().zip(gains).map(|(p, h)| p * h * h).collect();
    let total: f64 = q.iter().sum();
    q.iter()
        .zip(rates)
        .map(|(&qk, r)| qk / (noise + r / bandwidth * (total - qk)))
        .collect()
}

/// Powers and rates at the efficient equilibrium: `R_k = Ω*_k` and every SIR
/// equal to `γ*`.
///
/// With `q_k = p_k h_k²` and `Q = Σ q_k`, the SIR equations give
/// `Q = γ*σ² Σ(1 − Φ_k)/(1 − ΣΦ_k)` and
/// `q_k = (γ*σ² + (γ*/N_k) Q)/(1 + γ*/N_k)`.
/// Users whose power would exceed their `max_power` are clipped and flagged;
/// achieved SIRs are recomputed under the clipped powers.
pub fn prcg_equilibrium(users: &[PrcgUser], params: &SystemParams) -> Result<PrcgEquilibrium> {
    let admission = admissible(users, params);
    if !admission.admissible {
        return Err(Error::NotAdmissible {
            total_size: admission.total_size,
        });
    }
    let gs = params.gamma_star;
    let noise = params.noise;
    let rates: Vec<f64> = users.iter().map(|u| params.omega_star(&u.qos)).collect();

    let slack: f64 = 1.0 - admission.total_size;
    let spare: f64 = admission.sizes.iter().map(|s| 1.0 - s).sum();
    let total_received = gs * noise * spare / slack;

    let wanted: Vec<f64> = users
        .iter()
        .zip(&rates)
        .map(|(u, r)| {
            let g_over_n = gs * r / params.bandwidth;
            let q = (gs * noise + g_over_n * total_received) / (1.0 + g_over_n);
            q / (u.gain * u.gain)
        })
        .collect();
    let powers: Vec<f64> = wanted
        .iter()
        .zip(users)
        .map(|(p, u)| p.min(u.max_power))
        .collect();
    let gains: Vec<f64> = users.iter().map(|u| u.gain).collect();
    let sirs = prcg_sirs(&powers, &gains, &rates, params.bandwidth, noise);

    let outcome = EquilibriumOutcome {
        users: (0..users.len())
            .map(|k| {
                let clipped = wanted[k] > users[k].max_power;
                // Unclipped users sit at γ* by construction.
                let achieved = if clipped { sirs[k] } else { gs };
                UserOutcome {
                    class: None,
                    sir_target: gs,
                    achieved_sir: achieved,
                    power: powers[k],
                    rate: rates[k],
                    utility: rates[k] * params.model.value(achieved) / powers[k],
                    clipped,
                }
            })
            .collect(),
        feasible: true,
        reason: None,
    };
    let clipped = outcome.users.iter().filter(|u| u.clipped).count();
    let outcome = if clipped > 0 {
        EquilibriumOutcome {
            feasible: false,
            reason: Some(format!("{clipped} user(s) limited by the maximum power")),
            ..outcome
        }
    } else {
        outcome
    };
    Ok(PrcgEquilibrium {
        outcome,
        admission,
        total_received,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::mg1_mean_wait;

    fn params() -> SystemParams {
        SystemParams::new(5e6, 1e-3, EfficiencyModel::exponential(100).unwrap()).unwrap()
    }

    fn qos(lambda: f64, d: f64) -> AverageDelaySpec {
        AverageDelaySpec::new(lambda, d).unwrap()
    }

    #[test]
    fn omega_reference() {
        let p = params();
        let w = p.omega_star(&qos(50.0, 0.01));
        assert!((w - 15_637.656_400_913_668).abs() < 1e-6, "{w}");
        let w0 = p.omega_star(&qos(0.0, 0.01));
        assert!((w0 - 100.0 / (0.01 * p.psr_star())).abs() < 1e-9);
        assert_eq!(omega_star(&qos(50.0, 0.01), p.model()), w);
    }

    #[test]
    fn omega_makes_delay_tight_at_gamma_star() {
        let p = params();
        for lambda in [0.0, 1.0, 20.0, 50.0, 300.0] {
            for d in [0.002, 0.01, 0.1, 1.0] {
                let q = qos(lambda, d);
                let w = p.omega_star(&q);
                let eta = q.eta_hat(w, 100).unwrap();
                assert!((eta - p.psr_star()).abs() < 1e-9 * p.psr_star());
                let g = q.gamma_hat(w, p.model()).unwrap();
                assert!((g - p.gamma_star()).abs() < 1e-8 * p.gamma_star());
                let wait = mg1_mean_wait(lambda, 100.0 / w, p.psr_star()).unwrap();
                assert!((wait - d).abs() < 1e-8 * d);
            }
        }
    }

    #[test]
    fn size_reference_and_limits() {
        let gs = 6.474_600_379_589_358;
        let s = phi_star(15_637.656_400_913_668, 5e6, gs);
        assert!((s - 0.019_847_610_718_643).abs() < 1e-12, "{s}");
        assert_eq!(phi_star(5e6 / gs, 5e6, gs), 0.5);
        assert!(phi_star(1e4, 1e300, gs) < 1e-290);
    }

    #[test]
    fn admission_counts() {
        let p = params();
        let u = PrcgUser::new(qos(50.0, 0.01), 1.0, 1.0).unwrap();
        assert!(admissible(&[u], &p).admissible);
        let fifty = vec![u; 50];
        let a = admissible(&fifty, &p);
        assert!(a.admissible);
        assert!((a.total_size - 0.992_380_535_932_150_5).abs() < 1e-10);
        assert!(!admissible(&vec![u; 51], &p).admissible);
        assert_eq!(network_capacity(&u.qos, &p), 50);
    }

    #[test]
    fn capacity_strict_inequality() {
        assert_eq!(capacity_for_size(0.25), 3);
        assert_eq!(capacity_for_size(0.5), 1);
        assert_eq!(capacity_for_size(0.3), 3);
        assert_eq!(capacity_for_size(0.999_999), 1);
        assert_eq!(capacity_for_size(0.019_847_61), 50);
    }

    #[test]
    fn goodput() {
        let g = total_goodput(50, 15_637.656_400_913_668, 0.856_988_708_725_891_2);
        assert!((g - 670_064.748_325_908_6).abs() < 1e-6);
        assert_eq!(total_goodput(0, 1e4, 0.8), 0.0);
    }

    #[test]
    fn per_user_goodput_exceeds_source_rate() {
        let p = params();
        for lambda in [1.0, 50.0, 500.0, 5000.0] {
            let q = qos(lambda, 0.05);
            assert!(p.omega_star(&q) * p.psr_star() > q.source_rate(100));
        }
    }

    #[test]
    fn single_user_equilibrium() {
        let p = params();
        let u = PrcgUser::new(qos(50.0, 0.01), 0.5, 10.0).unwrap();
        let eq = prcg_equilibrium(&[u], &p).unwrap();
        let out = eq.outcome.users[0];
        // One user alone: no interference.
        let expect = p.gamma_star() * p.noise() / 0.25;
        assert!((out.power - expect).abs() < 1e-12 * expect);
        let w = p.omega_star(&u.qos);
        assert!(
            (out.utility - w * p.psr_star() * 0.25 / (p.gamma_star() * p.noise())).abs() < 1e-6
        );
        assert!(eq.outcome.feasible);
    }

    #[test]
    fn symmetric_equilibrium_hits_gamma_star() {
        let p = params();
        let u = PrcgUser::new(qos(50.0, 0.01), 1.0, 1e3).unwrap();
        let users = vec![u; 40];
        let eq = prcg_equilibrium(&users, &p).unwrap();
        let powers = eq.outcome.powers();
        assert!(powers.windows(2).all(|w| w[0] == w[1]));
        let rates: Vec<f64> = eq.outcome.users.iter().map(|u| u.rate).collect();
        let sirs = prcg_sirs(&powers, &vec![1.0; 40], &rates, 5e6, p.noise());
        for s in sirs {
            assert!((s - p.gamma_star()).abs() < 1e-10 * p.gamma_star());
        }
    }

    #[test]
    fn heterogeneous_equilibrium_hits_gamma_star() {
        let p = params();
        let users: Vec<PrcgUser> = (0..25)
            .map(|i| {
                PrcgUser::new(
                    qos(10.0 + 7.0 * i as f64, 0.005 + 0.002 * i as f64),
                    0.2 + 0.1 * i as f64,
                    1e6,
                )
                .unwrap()
            })
            .collect();
        let eq = prcg_equilibrium(&users, &p).unwrap();
        let powers = eq.outcome.powers();
        let gains: Vec<f64> = users.iter().map(|u| u.gain).collect();
        let rates: Vec<f64> = eq.outcome.users.iter().map(|u| u.rate).collect();
        for s in prcg_sirs(&powers, &gains, &rates, 5e6, p.noise()) {
            assert!((s - p.gamma_star()).abs() < 1e-10 * p.gamma_star());
        }
        let q: f64 = powers.iter().zip(&gains).map(|(p, h)| p * h * h).sum();
        assert!((q - eq.total_received).abs() < 1e-10 * q);
    }

    #[test]
    fn not_admissible_is_an_error() {
        let p = params();
        let u = PrcgUser::new(qos(50.0, 0.01), 1.0, 1.0).unwrap();
        match prcg_equilibrium(&vec![u; 51], &p) {
            Err(Error::NotAdmissible { total_size }) => assert!(total_size >= 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn power_cap_is_flagged_not_fatal() {
        let p = params();
        let strong = PrcgUser::new(qos(50.0, 0.01), 1.0, 1e3).unwrap();
        let weak = PrcgUser::new(qos(50.0, 0.01), 1e-3, 1e-2).unwrap();
        let eq = prcg_equilibrium(&[strong, weak, strong], &p).unwrap();
        assert!(!eq.outcome.feasible);
        assert_eq!(eq.outcome.clipped_users(), vec![1]);
        assert_eq!(eq.outcome.users[1].power, 1e-2);
        assert!(eq.outcome.users[1].achieved_sir < p.gamma_star());
    }

    #[test]
    fn total_received_diverges_as_size_approaches_one() {
        // Single user: Φ = x/(x + B) with x = Ω*γ*. Choosing B = x·s/(1 − s)
        // gives 1 − Φ = s, so Q = γ*σ²(1 − Φ)/(1 − Φ) stays at γ*σ². With two
        // users the slack is 1 − 2Φ and Q must double when it halves, up to the
        // change in Σ(1 − Φ).
        let model = EfficiencyModel::exponential(100).unwrap();
        let q = qos(50.0, 0.01);
        let u = PrcgUser::new(q, 1.0, 1e300).unwrap();
        let x = omega_star(&q, &model) * model.gamma_star();
        let mut prev: Option<(f64, f64, f64)> = None;
        for slack in [0.4, 0.2, 0.1, 0.05, 0.025, 0.0125] {
            // 1 − 2Φ = slack  ⇒  Φ = (1 − slack)/2  ⇒  B = x(1 − Φ)/Φ.
            let size = (1.0 - slack) / 2.0;
            let p = SystemParams::new(x * (1.0 - size) / size, 1e-3, model.clone()).unwrap();
            let eq = prcg_equilibrium(&[u, u], &p).unwrap();
            let spare = 2.0 - eq.admission.total_size;
            let slack_now = 1.0 - eq.admission.total_size;
            if let Some((q0, spare0, slack0)) = prev {
                let expect = q0 * (spare / spare0) * (slack0 / slack_now);
                assert!((eq.total_received - expect).abs() < 1e-9 * expect);
                assert!((slack0 / slack_now - 2.0).abs() < 1e-9);
                assert!(eq.total_received > q0);
            }
            prev = Some((eq.total_received, spare, slack_now));
        }
    }
}
