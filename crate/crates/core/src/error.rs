use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument fell outside the set on which the operation is defined.
    #[error("{name} = {value} is out of domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// The queue would not be stable: the per-slot success probability does
    /// not exceed the offered load `λτ`.
    #[error("unstable queue: success probability {psr} must exceed offered load {load}")]
    Unstable { psr: f64, load: f64 },

    /// The average-delay bound cannot be met at any SIR for this rate
    /// (`η̂ ≥ 1`).
    #[error("rate infeasible: required success probability {eta_hat} is not below 1")]
    RateInfeasible { eta_hat: f64 },

    /// A load condition of the form `measure < 1` was violated.
    #[error("infeasible: {condition} = {measure} (must be < 1)")]
    Infeasible {
        condition: &'static str,
        measure: f64,
    },

    /// The total user size of a power-and-rate game is not below one.
    #[error("not admissible: total size {total_size} (must be < 1)")]
    NotAdmissible { total_size: f64 },

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("root finder failed to converge: {0}")]
    NoConvergence(&'static str),
}

pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        reason,
    }
}
