use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] rosegan::Error),
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    kind: &'a str,
    message: String,
}

impl CliError {
    pub fn kind(&self) -> &str {
        match self {
            CliError::ConfigInvalid(_) => "ConfigInvalid",
            CliError::Io(_) => "Io",
            CliError::Core(e) => e.kind(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ErrorJson { kind: self.kind(), message: self.to_string() })
            .expect("strings serialize")
    }
}
