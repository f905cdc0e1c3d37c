use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// `step` was called on an observation that is already terminal.
    #[error("cannot step a terminal state (step_index {step_index})")]
    TerminalStep { step_index: u32 },

    /// A distance query named something that is not in the scene.
    #[error("unknown object '{0}' (expected \"gripper\" or a scene object id)")]
    UnknownObject(String),

    /// A configuration value failed validation. `key` names the offending entry.
    #[error("invalid config: {key}: {reason}")]
    InvalidConfig { key: String, reason: String },

    /// A serialized artifact (qtable, manifest, metrics) is malformed.
    #[error("bad artifact {path}: {reason}")]
    BadArtifact { path: String, reason: String },

    /// Two runs cannot be compared.
    #[error("comparison refused: {0}")]
    CompareMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    TomlParse(#[from] toml::de::Error),

    #[error("toml: {0}")]
    TomlSerialize(#[from] toml::ser::Error),
}

impl Error {
    pub fn invalid_config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn bad_artifact(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::BadArtifact {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
