use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("region point ({x}, {y}) is not strictly inside the domain")]
    RegionOutsideDomain { x: f64, y: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("mesh generation failed: {0}")]
    MeshFailure(String),

    #[error("a region of dimension {dim} has zero p-capacity for p = {p}; p must exceed {bound}")]
    CapacityViolation { p: f64, bound: f64, dim: usize },

    #[error(
        "nonlinear solver did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("linearized system is singular")]
    SingularLinearization,

    #[error("no mesh triangle on the {side} side of region edge {edge}")]
    MissingSide { edge: usize, side: &'static str },

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error("probe radius {radius} exceeds the admissible bound {bound}")]
    ProbeTooLarge { radius: f64, bound: f64 },

    #[error("geometry update failed: {0}")]
    GeometryBreakdown(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
