use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("zero vector passed where a direction is required")]
    ZeroVector,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("rotation too fast at t = {t}: step {dt:e} still turns {increment} turns")]
    RotationTooFast { t: f64, dt: f64, increment: f64 },

    #[error("orbits collide at t = {t} (separation {separation:e})")]
    OrbitCollision { t: f64, separation: f64 },

    #[error("degenerate tangent at s = {s} (norm {norm:e})")]
    DegenerateTangent { s: f64, norm: f64 },

    #[error("integrator step underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("tilt normalisation failed: {0}")]
    Normalisation(String),

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("no bracket found: {0}")]
    NoBracket(String),

    #[error("map is not certified negative-torsion: Torsion_1 reaches {} at {:?}", .0.max, .0.worst_point)]
    NotNegativeTorsion(Box<crate::harness::TorsionCertificate>),
}

pub type Result<T> = std::result::Result<T, Error>;
