//! Delay requirements and the SIR floors they induce.
//!
//! Two styles of requirement are supported:
//!
//! * [`OutageDelaySpec`] `(L, β)`: with infinite backlog, a packet must get
//!   through in at most `L` transmissions with probability at least `β`.
//!   Transmission counts are geometric with success probability `f(γ)`, so the
//!   requirement is `1 − (1 − f(γ))^L ≥ β`, i.e. `f(γ) ≥ η̃ = 1 − (1 − β)^{1/L}`.
//! * [`AverageDelaySpec`] `(λ, D)`: Poisson packet arrivals at rate `λ` and a
//!   bound `D` on the mean sojourn time (queueing plus retransmissions) in the
//!   discrete-service M/G/1 queue, whose mean sojourn is
//!   `τ(1 − λτ/2)/(f − λτ)` with `τ = M/R`.

use crate::error::{domain, Error, Result};
use crate::psr::EfficiencyModel;

/// At most `L` transmissions with probability at least `β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageDelaySpec {
    max_transmissions: u32,
    confidence: f64,
}

impl OutageDelaySpec {
    pub fn new(max_transmissions: u32, confidence: f64) -> Result<Self> {
        if max_transmissions == 0 {
            return Err(domain("L", 0.0, "at least one transmission is needed"));
        }
        if !(confidence > 0.0 && confidence < 1.0) {
            return Err(domain("beta", confidence, "confidence must lie in (0, 1)"));
        }
        Ok(Self {
            max_transmissions,
            confidence,
        })
    }

    pub fn max_transmissions(&self) -> u32 {
        self.max_transmissions
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    /// `η̃ = 1 − (1 − β)^{1/L}`, the minimum per-transmission success
    /// probability.
    pub fn eta_tilde(&self) -> f64 {
        let l = self.max_transmissions as f64;
        // 1 − exp(ln(1−β)/L)
        -((-self.confidence).ln_1p() / l).exp_m1()
    }

    /// `γ̃ = f⁻¹(η̃)`.
    pub fn gamma_tilde(&self, model: &EfficiencyModel) -> f64 {
        model
            .psr_inverse(self.eta_tilde())
            .expect("η̃ lies in (0, 1) for valid (L, β)")
    }

    /// Equilibrium SIR with infinite backlog: `max(γ̃, γ*)`.
    pub fn sir_target(&self, model: &EfficiencyModel) -> f64 {
        self.gamma_tilde(model).max(model.gamma_star())
    }

    /// Whether the delay floor is above `γ*` (and therefore binding).
    pub fn is_binding(&self, model: &EfficiencyModel) -> bool {
        self.gamma_tilde(model) > model.gamma_star()
    }

    /// The bound expressed in seconds for a given transmission time `τ`:
    /// `L·τ`.
    pub fn time_bound(&self, slot: f64) -> f64 {
        self.max_transmissions as f64 * slot
    }

    /// Probability that a packet needs at most `L` transmissions when each
    /// succeeds independently with probability `psr`.
    pub fn success_within_bound(&self, psr: f64) -> f64 {
        1.0 - (1.0 - psr).powi(self.max_transmissions as i32)
    }
}

/// Free function form of [`OutageDelaySpec::eta_tilde`].
pub fn eta_tilde(spec: &OutageDelaySpec) -> f64 {
    spec.eta_tilde()
}

/// Free function form of [`OutageDelaySpec::gamma_tilde`].
pub fn gamma_tilde(spec: &OutageDelaySpec, model: &EfficiencyModel) -> f64 {
    spec.gamma_tilde(model)
}

/// SIR target of a user in the power control game with infinite backlog.
/// `None` means the user has no delay requirement and targets `γ*`.
pub fn sir_target_infinite(spec: Option<&OutageDelaySpec>, model: &EfficiencyModel) -> f64 {
    match spec {
        Some(s) => s.sir_target(model),
        None => model.gamma_star(),
    }
}

/// Poisson source with arrival rate `λ` (packets/s) and mean-delay bound `D`
/// (seconds).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageDelaySpec {
    arrival_rate: f64,
    delay_bound: f64,
}

impl AverageDelaySpec {
    pub fn new(arrival_rate: f64, delay_bound: f64) -> Result<Self> {
        if !(arrival_rate.is_finite() && arrival_rate >= 0.0) {
            return Err(domain("lambda", arrival_rate, "arrival rate must be >= 0"));
        }
        if !(delay_bound > 0.0) || delay_bound.is_nan() {
            return Err(domain("D", delay_bound, "delay bound must be > 0"));
        }
        Ok(Self {
            arrival_rate,
            delay_bound,
        })
    }

    /// Builds the spec from a source rate in bits/s.
    pub fn from_source_rate(source_rate: f64, delay_bound: f64, packet_bits: u32) -> Result<Self> {
        Self::new(source_rate / packet_bits as f64, delay_bound)
    }

    pub fn arrival_rate(&self) -> f64 {
        self.arrival_rate
    }

    pub fn delay_bound(&self) -> f64 {
        self.delay_bound
    }

    /// `r = Mλ` in bits/s.
    pub fn source_rate(&self, packet_bits: u32) -> f64 {
        packet_bits as f64 * self.arrival_rate
    }

    /// `η̂`, the success probability at which the mean sojourn time equals `D`
    /// when transmitting `packet_bits`-bit packets at `rate` bits/s.
    pub fn eta_hat(&self, rate: f64, packet_bits: u32) -> Result<f64> {
        let slot = transmission_time(rate, packet_bits)?;
        if self.delay_bound < slot {
            return Err(domain(
                "D",
                self.delay_bound,
                "delay bound cannot be smaller than the transmission time M/R",
            ));
        }
        let lt = self.arrival_rate * slot;
        let eta = lt + slot / self.delay_bound - lt * slot / (2.0 * self.delay_bound);
        if eta >= 1.0 {
            return Err(Error::RateInfeasible { eta_hat: eta });
        }
        Ok(eta)
    }

    /// `γ̂ = f⁻¹(η̂)`.
    pub fn gamma_hat(&self, rate: f64, model: &EfficiencyModel) -> Result<f64> {
        let eta = self.eta_hat(rate, model.packet_bits())?;
        model.psr_inverse(eta)
    }

    /// Whether transmitting at `rate` leaves room to meet the delay bound at
    /// some finite SIR: `r/R < (DR/M − 1)/(DR/M − 1/2)`.
    ///
    /// Errors when `DR/M < 1`, i.e. when `D` is shorter than one transmission
    /// time.
    pub fn rate_constraint_ok(&self, rate: f64, packet_bits: u32) -> Result<bool> {
        let slot = transmission_time(rate, packet_bits)?;
        let x = self.delay_bound / slot;
        if x < 1.0 {
            return Err(domain(
                "D",
                self.delay_bound,
                "delay bound cannot be smaller than the transmission time M/R",
            ));
        }
        let offered = self.source_rate(packet_bits) / rate;
        Ok(offered < (x - 1.0) / (x - 0.5))
    }
}

/// Free function form of [`AverageDelaySpec::eta_hat`].
pub fn eta_hat(spec: &AverageDelaySpec, rate: f64, packet_bits: u32) -> Result<f64> {
    spec.eta_hat(rate, packet_bits)
}

/// Free function form of [`AverageDelaySpec::gamma_hat`].
pub fn gamma_hat(spec: &AverageDelaySpec, rate: f64, model: &EfficiencyModel) -> Result<f64> {
    spec.gamma_hat(rate, model)
}

/// Free function form of [`AverageDelaySpec::rate_constraint_ok`].
pub fn rate_constraint_ok(spec: &AverageDelaySpec, rate: f64, packet_bits: u32) -> Result<bool> {
    spec.rate_constraint_ok(rate, packet_bits)
}

/// `τ = M/R`.
pub fn transmission_time(rate: f64, packet_bits: u32) -> Result<f64> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(domain("R", rate, "transmission rate must be positive"));
    }
    Ok(packet_bits as f64 / rate)
}

/// Mean sojourn time (queueing plus service) of the M/G/1 queue with
/// Poisson arrivals at rate `arrival_rate` and service lasting `m·slot` with
/// probability `psr (1 − psr)^{m−1}`.
pub fn mg1_mean_wait(arrival_rate: f64, slot: f64, psr: f64) -> Result<f64> {
    if !(arrival_rate.is_finite() && arrival_rate >= 0.0) {
        return Err(domain("lambda", arrival_rate, "arrival rate must be >= 0"));
    }
    if !(slot > 0.0 && slot.is_finite()) {
        return Err(domain("tau", slot, "transmission time must be positive"));
    }
    if !(psr > 0.0 && psr <= 1.0) {
        return Err(domain("f", psr, "success probability must lie in (0, 1]"));
    }
    let load = arrival_rate * slot;
    if psr <= load {
        return Err(Error::Unstable { psr, load });
    }
    Ok(slot * (1.0 - load / 2.0) / (psr - load))
}

/// Load factor `ρ = λτ/f`.
pub fn load_factor(arrival_rate: f64, slot: f64, psr: f64) -> f64 {
    arrival_rate * slot / psr
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m100() -> EfficiencyModel {
        EfficiencyModel::exponential(100).unwrap()
    }

    #[test]
    fn eta_tilde_values() {
        let s = OutageDelaySpec::new(1, 0.99).unwrap();
        assert!((s.eta_tilde() - 0.99).abs() < 1e-15);
        let s = OutageDelaySpec::new(2, 0.99).unwrap();
        assert!((s.eta_tilde() - 0.9).abs() < 1e-15);
        let s = OutageDelaySpec::new(3, 0.90).unwrap();
        assert!((s.eta_tilde() - 0.535_841_116_638_722_1).abs() < 1e-15);
    }

    #[test]
    fn invalid_outage_specs() {
        assert!(OutageDelaySpec::new(0, 0.5).is_err());
        assert!(OutageDelaySpec::new(1, 0.0).is_err());
        assert!(OutageDelaySpec::new(1, 1.0).is_err());
        assert!(OutageDelaySpec::new(1, f64::NAN).is_err());
    }

    #[test]
    fn gamma_tilde_values() {
        let m = m100();
        let a = OutageDelaySpec::new(1, 0.99).unwrap();
        assert!((a.gamma_tilde(&m) - 9.205_369_664_023_067).abs() < 1e-10);
        let b = OutageDelaySpec::new(3, 0.90).unwrap();
        assert!((b.gamma_tilde(&m) - 5.080_025_144_944_131).abs() < 1e-9);
        let loose = OutageDelaySpec::new(10, 0.5).unwrap();
        assert!(loose.gamma_tilde(&m) < m.gamma_star());
        assert!(!loose.is_binding(&m));
        assert!(a.is_binding(&m));
    }

    #[test]
    fn sir_targets_infinite_backlog() {
        let m = m100();
        let a = OutageDelaySpec::new(1, 0.99).unwrap();
        let b = OutageDelaySpec::new(3, 0.90).unwrap();
        assert!((sir_target_infinite(Some(&a), &m) - 9.205_369_664_023_067).abs() < 1e-10);
        assert_eq!(sir_target_infinite(Some(&b), &m), m.gamma_star());
        assert_eq!(sir_target_infinite(None, &m), m.gamma_star());
        let tiny = OutageDelaySpec::new(1, 1e-9).unwrap();
        assert_eq!(sir_target_infinite(Some(&tiny), &m), m.gamma_star());
    }

    #[test]
    fn gamma_tilde_monotone_in_l_and_beta() {
        let m = m100();
        let mut prev = 0.0;
        for beta in [0.1, 0.5, 0.9, 0.99, 0.999] {
            let g = OutageDelaySpec::new(2, beta).unwrap().gamma_tilde(&m);
            assert!(g > prev);
            prev = g;
        }
        let mut prev = f64::INFINITY;
        for l in 1..8 {
            let g = OutageDelaySpec::new(l, 0.95).unwrap().gamma_tilde(&m);
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn outage_equivalence_chain() {
        // [1 − (1 − f)^L ≥ β] ⇔ [f ≥ η̃] ⇔ [γ ≥ γ̃]. Points within a few ulps of
        // the boundary are skipped since the three forms round differently.
        let m = m100();
        for l in 1..=6 {
            for beta in [0.05, 0.3, 0.5, 0.75, 0.9, 0.99, 0.999] {
                let s = OutageDelaySpec::new(l, beta).unwrap();
                let gt = s.gamma_tilde(&m);
                for i in 1..=400 {
                    let g = i as f64 * 0.05;
                    if (g - gt).abs() < 1e-9 {
                        continue;
                    }
                    let f = m.psr(g).unwrap();
                    let a = s.success_within_bound(f) >= beta;
                    let b = f >= s.eta_tilde();
                    let c = g >= gt;
                    assert_eq!(a, b, "L={l} β={beta} γ={g}");
                    assert_eq!(b, c, "L={l} β={beta} γ={g}");
                }
            }
        }
    }

    #[test]
    fn mg1_wait_values() {
        let w = mg1_mean_wait(50.0, 0.001, 0.245).unwrap();
        assert!((w - 0.005).abs() < 1e-15);
        assert_eq!(mg1_mean_wait(0.0, 0.002, 1.0).unwrap(), 0.002);
        assert!(matches!(
            mg1_mean_wait(50.0, 0.001, 0.05),
            Err(Error::Unstable { .. })
        ));
        assert!(mg1_mean_wait(1.0, 0.0, 0.5).is_err());
        assert!(mg1_mean_wait(1.0, 0.1, 0.0).is_err());
        assert!(mg1_mean_wait(1.0, 0.1, 1.2).is_err());
    }

    #[test]
    fn eta_hat_values() {
        let s = AverageDelaySpec::new(50.0, 0.005).unwrap();
        let e = s.eta_hat(100_000.0, 100).unwrap();
        assert!((e - 0.245).abs() < 1e-15);
        // Loose bound: η̂ approaches the stability boundary λτ.
        let loose = AverageDelaySpec::new(50.0, 1e9).unwrap();
        assert!((loose.eta_hat(100_000.0, 100).unwrap() - 0.05).abs() < 1e-9);
    }

    #[test]
    fn eta_hat_zero_slack_is_rate_infeasible() {
        let s = AverageDelaySpec::new(0.0, 0.001).unwrap();
        assert!(matches!(
            s.eta_hat(100_000.0, 100),
            Err(Error::RateInfeasible { .. })
        ));
        assert!(s.gamma_hat(100_000.0, &m100()).is_err());
        let short = AverageDelaySpec::new(0.0, 0.0005).unwrap();
        assert!(matches!(
            short.eta_hat(100_000.0, 100),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn gamma_hat_meets_the_bound() {
        let m = m100();
        let s = AverageDelaySpec::new(50.0, 0.005).unwrap();
        let g = s.gamma_hat(100_000.0, &m).unwrap();
        assert!((g - 4.271_092_164_052_772).abs() < 1e-9, "{g}");
        let w = mg1_mean_wait(50.0, 0.001, m.psr(g).unwrap()).unwrap();
        assert!((w - 0.005).abs() < 1e-9 * 0.005);
        assert!(load_factor(50.0, 0.001, m.psr(g).unwrap()) < 1.0);
    }

    #[test]
    fn gamma_hat_monotone() {
        let m = m100();
        let rate = 50_000.0;
        let mut prev = f64::INFINITY;
        for d in [0.004, 0.006, 0.01, 0.05, 0.2] {
            let g = AverageDelaySpec::new(40.0, d)
                .unwrap()
                .gamma_hat(rate, &m)
                .unwrap();
            assert!(g < prev);
            prev = g;
        }
        let mut prev = 0.0;
        for lambda in [0.0, 10.0, 50.0, 100.0, 200.0] {
            let g = AverageDelaySpec::new(lambda, 0.01)
                .unwrap()
                .gamma_hat(rate, &m)
                .unwrap();
            assert!(g > prev);
            prev = g;
        }
    }

    #[test]
    fn rate_constraint_values() {
        let s = AverageDelaySpec::new(50.0, 0.01).unwrap();
        assert!(s.rate_constraint_ok(15_637.0, 100).unwrap());
        // R = M/D: right-hand side is zero.
        assert!(!s.rate_constraint_ok(10_000.0, 100).unwrap());
        assert!(s.rate_constraint_ok(5_000.0, 100).is_err());
    }

    #[test]
    fn outage_time_bound() {
        let s = OutageDelaySpec::new(3, 0.9).unwrap();
        assert!((s.time_bound(0.001) - 0.003).abs() < 1e-18);
    }
}
