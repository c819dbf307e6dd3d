//! Energy-efficient power and rate control games with delay requirements for
//! CDMA uplinks.
//!
//! Users choose transmit powers (and optionally rates) to maximize the number
//! of reliably delivered bits per Joule, `u = R f(γ)/p`, subject to a delay
//! requirement. The crate computes the resulting Nash equilibria in closed
//! form and ships independent numerical oracles to check them.
//!
//! | module | contents |
//! |---|---|
//! | [`psr`] | efficiency function `f(γ)`, its inverse, optimal SIR `γ*` |
//! | [`delay`] | outage and average-delay requirements, M/G/1 mean wait |
//! | [`sim`] | Monte Carlo retransmission and queue simulators |
//! | [`pcg`] | power control game: SIR targets, multiclass utilities, powers |
//! | [`prcg`] | power and rate control game: `Ω*`, user size, capacity |
//! | [`dynamics`] | best-response iteration used as a fixed-point oracle |
//!
//! ```
//! use qosgame::{EfficiencyModel, OutageDelaySpec, units::to_db};
//!
//! let model = EfficiencyModel::exponential(100)?;
//! let gamma_star = model.gamma_star();
//! assert!((gamma_star - 6.48).abs() < 0.01);
//!
//! // A delay-sensitive user needs its first transmission to succeed 99% of
//! // the time, which pushes its SIR target above γ*.
//! let strict = OutageDelaySpec::new(1, 0.99)?;
//! assert!((to_db(strict.sir_target(&model)) - 9.64).abs() < 0.01);
//! # Ok::<(), qosgame::Error>(())
//! ```
//!
//! The `book/` directory at the repository root has a chapter per module.

pub mod delay;
pub mod dynamics;
pub mod error;
pub mod pcg;
pub mod prcg;
pub mod psr;
pub mod sim;
pub mod units;

mod root;

pub use delay::{mg1_mean_wait, AverageDelaySpec, OutageDelaySpec};
pub use error::{Error, Result};
pub use pcg::{ClassSpec, EquilibriumOutcome, Feasibility, RadioEnv, Receiver, UserOutcome};
pub use prcg::{PrcgUser, SystemParams};
pub use psr::{EfficiencyModel, SigmoidCurve};

// Book chapters are compiled as doc-tests so their snippets stay in sync with
// the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/efficiency.md")]
    mod efficiency {}
    #[doc = include_str!("../../../book/src/delay.md")]
    mod delay {}
    #[doc = include_str!("../../../book/src/power_control.md")]
    mod power_control {}
    #[doc = include_str!("../../../book/src/rate_control.md")]
    mod rate_control {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
