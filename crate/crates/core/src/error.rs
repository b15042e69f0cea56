use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported modulation order {0} (expected 4, 16, 64 or 256)")]
    UnsupportedModulation(usize),

    #[error("{what}: expected length {expected}, got {got}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("equivalent-channel noise variance {value} at instant {index} is below the floor")]
    DegenerateNoise { index: usize, value: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parity-check file: {0}")]
    CodeFormat(String),

    #[error("aggregate WDM bandwidth {bandwidth_hz:.3e} Hz exceeds sample rate {sample_rate:.3e} Hz")]
    Aliasing { bandwidth_hz: f64, sample_rate: f64 },

    #[error("adaptive equalizer diverged at symbol {0}")]
    Diverged(usize),

    #[error("config: {0}")]
    Config(String),

    #[error("trial (power {power_dbm} dBm, {n_spans} spans, seed {seed}): {source}")]
    Trial {
        power_dbm: f64,
        n_spans: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
