use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgoError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("duplicate vertex id {id} (line {line})")]
    DuplicateVertex { id: i64, line: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is not connected ({components} components)")]
    Disconnected { components: usize },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numerical failure at vertex {vertex}: {msg}")]
    Numerical { vertex: usize, msg: String },

    #[error("sphere subproblem found no real eigenvalue; spectrum: {spectrum:?}")]
    NoRealEigenvalue { spectrum: Vec<(f64, f64)> },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PgoError>;
