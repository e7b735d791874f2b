use std::io;

/// Errors raised by the mesh, geometry, assembly and analysis layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    /// The discrete level set has no sign change on any cell.
    #[error("surface misses mesh: no cell is cut by the zero level set")]
    SurfaceMissesMesh,

    #[error("degenerate cut in cell {cell}: {reason}")]
    DegenerateCut { cell: usize, reason: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
