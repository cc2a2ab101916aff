use thiserror::Error;

/// Errors raised while building models or evaluating laws.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("generation {generation}: parameter `{param}` = {value} is outside its admissible range ({expected})")]
    Inadmissible {
        generation: u64,
        param: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("{role} stage {stage}: {reason}")]
    Stage {
        role: &'static str,
        stage: usize,
        reason: String,
    },

    #[error("invalid law: {0}")]
    Law(String),

    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("index error: {0}")]
    Index(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("model config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
