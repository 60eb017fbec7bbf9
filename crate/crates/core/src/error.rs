use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("level set undefined at ({x}, {y}, {z})")]
    Domain { x: f64, y: f64, z: f64 },
    #[error("level-set gradient vanishes at ({x}, {y}, {z})")]
    SingularGradient { x: f64, y: f64, z: f64 },
    #[error("degenerate tetrahedron {tet} (|det J| = {det:e})")]
    DegenerateTet { tet: usize, det: f64 },
    #[error("no background tetrahedron is cut by the surface")]
    EmptyActiveSet,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("linear solver failed: {reason} (relative residual {residual:e})")]
    Solver { reason: String, residual: f64 },
    #[error("mass drift {drift:e} exceeds tolerance")]
    MassDrift { drift: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
