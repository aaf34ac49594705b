use serde::Serialize;
use std::path::PathBuf;
use thiserror::Error;

/// Errors surfaced by the command-line pipeline.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),

    #[error("input: {0}")]
    Input(String),

    #[error("{} of {} rows rejected (limit {:.0}%); first: {}", .rejected, .total, .limit * 100.0, .first)]
    TooManyRejects { rejected: usize, total: usize, limit: f64, first: String },

    #[error("model: {0}")]
    Model(#[from] atrp_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("bundle: {0}")]
    Bundle(String),

    #[error("scenario {coordinates}: {source}")]
    Scenario { coordinates: String, source: Box<CliError> },
}

/// Error category, stable across releases, with its process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Config,
    Input,
    Model,
    Io,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Model => 1,
            Category::Config => 3,
            Category::Input => 4,
            Category::Io => 5,
        }
    }
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn category(&self) -> Category {
        match self {
            Self::Config(_) => Category::Config,
            Self::Input(_) | Self::TooManyRejects { .. } | Self::Bundle(_) => Category::Input,
            Self::Model(_) => Category::Model,
            Self::Io { .. } => Category::Io,
            Self::Scenario { source, .. } => source.category(),
        }
    }

    pub fn in_scenario(self, coordinates: String) -> Self {
        Self::Scenario { coordinates, source: Box::new(self) }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            category: Category,
            exit_code: i32,
            message: &'a str,
        }
        let message = self.to_string();
        let cat = self.category();
        serde_json::json!({ "error": Body { category: cat, exit_code: cat.exit_code(), message: &message } }).to_string()
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
