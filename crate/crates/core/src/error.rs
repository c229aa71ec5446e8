use crate::geometry::Point3;
use crate::modes::ModeFamily;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid waveguide geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid wavenumber {0}: must be finite and positive")]
    InvalidWavenumber(f64),

    #[error("cutoff resonance: k = {k} coincides with the cutoff {cutoff} of {family:?} mode ({p1},{p2})")]
    CutoffResonance {
        family: ModeFamily,
        p1: u32,
        p2: u32,
        cutoff: f64,
        k: f64,
    },

    #[error("field {which} is not defined for the {family:?} family")]
    FamilyMismatch { family: ModeFamily, which: &'static str },

    #[error("axial separation {separation} is below the evaluator's minimum gap {min_gap}")]
    CoincidentAxialPlanes { separation: f64, min_gap: f64 },

    #[error("point {0} lies outside the closed half-waveguide")]
    PointOutsideHalfGuide(Point3),

    #[error("separation violated: {0}")]
    SeparationViolated(String),

    #[error("Lippmann-Schwinger iteration did not converge: residual {residual:e} after {iterations} iterations")]
    LsDiverged { iterations: usize, residual: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("invalid measurement grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("imaging lattice is empty")]
    EmptyLattice,

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGeometry(_) => "InvalidGeometry",
            Error::InvalidWavenumber(_) => "InvalidWavenumber",
            Error::CutoffResonance { .. } => "CutoffResonance",
            Error::FamilyMismatch { .. } => "FamilyMismatch",
            Error::CoincidentAxialPlanes { .. } => "CoincidentAxialPlanes",
            Error::PointOutsideHalfGuide(_) => "PointOutsideHalfGuide",
            Error::SeparationViolated(_) => "SeparationViolated",
            Error::LsDiverged { .. } => "LSDiverged",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidScene(_) => "InvalidScene",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::EmptyLattice => "EmptyLattice",
            Error::Format(_) => "Format",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}
