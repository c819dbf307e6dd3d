//! The efficiency function `f(γ)`: packet success rate as a function of the
//! output SIR, together with its derivative, inverse and the efficiency-optimal
//! SIR `γ*` that maximizes `f(γ)/γ`.
//!
//! The built-in family is the exponential approximation
//! `f(γ) = (1 − e^{−γ})^M` for an `M`-bit packet. Other sigmoidal curves can be
//! plugged in through [`SigmoidCurve`].
//!
//! All SIR values in this module are linear ratios.

use std::fmt;
use std::sync::Arc;

use crate::error::{domain, Error, Result};
use crate::root::{bisect, newton_bisect, ROOT_TOL};

/// A user-supplied S-shaped efficiency curve.
///
/// Implementations must satisfy `value(0) = 0`, be strictly increasing with
/// limit 1, and be convex below [`inflection`](SigmoidCurve::inflection) and
/// concave above it. None of this is checked symbolically; `inflection` is
/// taken as the certificate and used to bracket `γ*`.
pub trait SigmoidCurve: Send + Sync {
    fn value(&self, gamma: f64) -> f64;
    fn derivative(&self, gamma: f64) -> f64;
    fn inflection(&self) -> f64;
}

#[derive(Clone)]
enum Family {
    Exponential,
    Custom(Arc<dyn SigmoidCurve>),
}

/// Packet success rate model for `M`-bit packets.
#[derive(Clone)]
pub struct EfficiencyModel {
    packet_bits: u32,
    family: Family,
}

impl fmt::Debug for EfficiencyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let family = match self.family {
            Family::Exponential => "exponential",
            Family::Custom(_) => "custom",
        };
        f.debug_struct("EfficiencyModel")
            .field("packet_bits", &self.packet_bits)
            .field("family", &family)
            .finish()
    }
}

impl EfficiencyModel {
    /// The exponential family `(1 − e^{−γ})^M`. Requires `M ≥ 2`: for `M = 1`
    /// the curve is concave everywhere and `f(γ)/γ` has no interior maximum.
    pub fn exponential(packet_bits: u32) -> Result<Self> {
        if packet_bits < 2 {
            return Err(domain(
                "packet_bits",
                packet_bits as f64,
                "the exponential efficiency function needs M >= 2",
            ));
        }
        Ok(Self {
            packet_bits,
            family: Family::Exponential,
        })
    }

    /// Wraps a custom curve. `packet_bits` is still needed by the queueing
    /// formulas (transmission time `M/R`).
    pub fn custom(packet_bits: u32, curve: Arc<dyn SigmoidCurve>) -> Result<Self> {
        if packet_bits == 0 {
            return Err(domain("packet_bits", 0.0, "packets must carry bits"));
        }
        let x = curve.inflection();
        if !(x.is_finite() && x > 0.0) {
            return Err(domain("inflection", x, "must be positive and finite"));
        }
        Ok(Self {
            packet_bits,
            family: Family::Custom(curve),
        })
    }

    pub fn packet_bits(&self) -> u32 {
        self.packet_bits
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self.family, Family::Exponential)
    }

    /// `f(γ)`, the packet success rate.
    pub fn psr(&self, gamma: f64) -> Result<f64> {
        check_sir(gamma)?;
        Ok(self.value(gamma))
    }

    /// `f'(γ)`.
    pub fn psr_derivative(&self, gamma: f64) -> Result<f64> {
        check_sir(gamma)?;
        Ok(self.derivative(gamma))
    }

    /// The SIR at which the success rate equals `eta`, for `0 < eta < 1`.
    pub fn psr_inverse(&self, eta: f64) -> Result<f64> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(domain(
                "eta",
                eta,
                "success probability must lie strictly between 0 and 1",
            ));
        }
        match &self.family {
            Family::Exponential => {
                // γ = −ln(1 − η^{1/M}), written to keep precision near η → 1.
                let m = self.packet_bits as f64;
                Ok(-(-(eta.ln() / m).exp_m1()).ln())
            }
            Family::Custom(_) => self.invert_numerically(eta),
        }
    }

    /// The unique positive root of `f(γ) = γ f'(γ)`.
    ///
    /// For the exponential family this reduces to `e^γ = 1 + Mγ`, solved on the
    /// bracket `[ln M, ln M + M]`.
    pub fn gamma_star(&self) -> f64 {
        match &self.family {
            Family::Exponential => {
                let m = self.packet_bits as f64;
                let lo = m.ln();
                // Scaled by e^{−γ} to avoid overflow: 1 − (1 + Mγ) e^{−γ}.
                newton_bisect(
                    |g| {
                        let e = (-g).exp();
                        (1.0 - (1.0 + m * g) * e, e * (1.0 + m * g - m))
                    },
                    lo,
                    lo + m,
                    ROOT_TOL,
                )
                .expect("e^γ − 1 − Mγ changes sign on [ln M, ln M + M] for M ≥ 2")
            }
            Family::Custom(_) => self
                .gamma_star_direct()
                .expect("custom curve violates its sigmoid certificate"),
        }
    }

    /// Solves `f(γ) − γ f'(γ) = 0` without family-specific simplification,
    /// bracketing from the inflection point upward.
    pub fn gamma_star_direct(&self) -> Result<f64> {
        let g = |x: f64| self.value(x) - x * self.derivative(x);
        let lo = self.inflection();
        if g(lo) >= 0.0 {
            return Err(Error::NoConvergence(
                "f − γf' is not negative at the inflection point",
            ));
        }
        let mut hi = 2.0 * lo.max(1.0);
        let mut expansions = 0;
        while g(hi) <= 0.0 {
            hi *= 2.0;
            expansions += 1;
            if expansions > 60 {
                return Err(Error::NoConvergence("no upper bracket for γ*"));
            }
        }
        bisect(g, lo, hi, ROOT_TOL)
    }

    /// `f(γ*)`, the success rate at the efficiency-optimal SIR.
    pub fn psr_at_gamma_star(&self) -> f64 {
        self.value(self.gamma_star())
    }

    /// Spectral efficiency term `f(γ)/γ`; maximal at `γ*`.
    pub fn efficiency_ratio(&self, gamma: f64) -> f64 {
        self.value(gamma) / gamma
    }

    /// Location of the unique inflection point (`ln M` for the exponential
    /// family).
    pub fn inflection(&self) -> f64 {
        match &self.family {
            Family::Exponential => (self.packet_bits as f64).ln(),
            Family::Custom(c) => c.inflection(),
        }
    }

    pub(crate) fn value(&self, gamma: f64) -> f64 {
        match &self.family {
            Family::Exponential => {
                if gamma == f64::INFINITY {
                    return 1.0;
                }
                let m = self.packet_bits as f64;
                (m * (-(-gamma).exp()).ln_1p()).exp()
            }
            Family::Custom(c) => c.value(gamma),
        }
    }

    pub(crate) fn derivative(&self, gamma: f64) -> f64 {
        match &self.family {
            Family::Exponential => {
                if gamma == f64::INFINITY {
                    return 0.0;
                }
                let m = self.packet_bits as f64;
                let e = (-gamma).exp();
                m * e * ((m - 1.0) * (-e).ln_1p()).exp()
            }
            Family::Custom(c) => c.derivative(gamma),
        }
    }

    fn invert_numerically(&self, eta: f64) -> Result<f64> {
        let mut hi = self.inflection().max(1.0);
        let mut expansions = 0;
        while self.value(hi) < eta {
            hi *= 2.0;
            expansions += 1;
            if expansions > 60 {
                return Err(Error::NoConvergence("no upper bracket for f⁻¹"));
            }
        }
        newton_bisect(
            |g| (self.value(g) - eta, self.derivative(g)),
            0.0,
            hi,
            ROOT_TOL,
        )
    }
}

fn check_sir(gamma: f64) -> Result<()> {
    if gamma.is_nan() || gamma < 0.0 || gamma == f64::NEG_INFINITY {
        return Err(domain("gamma", gamma, "SIR must be nonnegative"));
    }
    Ok(())
}
