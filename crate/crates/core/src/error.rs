use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("arrival probability {0} is outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("channel gain {0} must be positive")]
    GainNotPositive(f64),
    #[error("battery capacity {0} must be positive")]
    CapacityNotPositive(f64),
    #[error("look-ahead window must be at least 1 slot, got {0}")]
    WindowTooSmall(u64),

    #[error("action {0} is negative")]
    NegativeAction(f64),
    #[error("action {action} exceeds the battery level {level}")]
    CausalityViolation { action: f64, level: f64 },
    #[error("arrival energy {arrival} must be 0 or the capacity {capacity}")]
    InvalidArrival { arrival: f64, capacity: f64 },

    #[error("allocation entry {index} is {value}; entries must be finite and non-negative")]
    InvalidEntry { index: usize, value: f64 },
    #[error("allocation spends {total}, more than the capacity {capacity}")]
    Inadmissible { total: f64, capacity: f64 },
    #[error("allocation was built for capacity {got}, model capacity is {expected}")]
    CapacityMismatch { expected: f64, got: f64 },
    #[error("allocation entry {index} is zero; KKT residuals need an interior point")]
    NotInterior { index: usize },
    #[error("expected an allocation of length {expected}, got {got}")]
    WrongLength { expected: usize, got: usize },

    #[error("tolerance {0} must be positive and finite")]
    InvalidTolerance(f64),
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("horizon {0} is too long for the solver")]
    HorizonTooLong(usize),
    #[error("solver did not converge after {iterations} iterations: {reason}")]
    NonConvergence {
        iterations: usize,
        reason: &'static str,
    },
    #[error("brute-force oracle supports at most {max} coordinates, got {n}")]
    OracleTooLarge { n: usize, max: usize },

    #[error("window view has {got} slots, expected {expected}")]
    WrongViewLength { expected: usize, got: usize },
    #[error("allocation prefix is empty; the drought action is undefined")]
    XiExhausted,
}
