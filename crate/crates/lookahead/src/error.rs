use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] lookahead_core::Error),
    #[error("slot count must be at least 1")]
    NoSlots,
    #[error("initial battery {level} is outside [0, {capacity}]")]
    InitialBattery { level: f64, capacity: f64 },
    #[error("need at least {min} seeds, got {got}")]
    TooFewSeeds { min: usize, got: usize },
    #[error("battery left [0, B] at slot {slot}: {level}")]
    BatteryOutOfRange { slot: usize, level: f64 },
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
