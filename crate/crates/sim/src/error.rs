use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("{remaining} four-cycles left after {swaps} swaps; try n >= {suggest_n}")]
    Cycles {
        remaining: usize,
        swaps: usize,
        suggest_n: usize,
    },
    #[error("cannot realise degree profile at n={n}: {msg}")]
    Realise { n: usize, msg: String },
    #[error("info length {got} differs from code dimension {want}")]
    InfoLength { got: usize, want: usize },
    #[error("{0}")]
    Shape(String),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Core(#[from] idma_core::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
