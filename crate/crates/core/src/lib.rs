//! Sampling-type imaging of scatterers inside a terminating rectangular
//! electromagnetic waveguide.
//!
//! The crate is organized bottom-up:
//!
//! * [`modes`]: cross-section geometry, TE/TM mode enumeration and mode fields.
//! * [`green`]: modal dyadic Green functions of the full and terminating guide.
//! * [`operators`]: scene model, the Herglotz-type operator and its adjoint, the
//!   contrast operator, forward synthesis of point-source data and the
//!   factorization check of the data operator.
//! * [`imaging`]: the test function, the modal data matrix, the imaging
//!   function and its point-spread function.
//! * [`shapes`]: primitive solids and their voxelization into scenes.
//! * [`format`]: binary and volume file formats.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod format;
pub mod geometry;
pub mod green;
pub mod imaging;
pub mod modes;
pub mod operators;
pub mod shapes;

pub use error::{Error, Result};
pub use geometry::{ComplexVec3, DyadicField, Point3, RealVec3};
pub use green::{AxialVariable, GreenEvaluator};
pub use imaging::{add_noise, DataMatrixU, GVectorMode, ImageVolume, Imager, Lattice, LatticeAxis};
pub use modes::{
    axial_wavenumber, enumerate_modes, mirror_point, transverse_normalizer, EvanescentPolicy, FieldKind, ModeBasis,
    ModeFamily, ModeIndex, WaveguideSpec, Wavenumber,
};
pub use operators::{ForwardModel, MeasurementGrid, OperatorSet, PointSourceData, Scene, TotalField, Voxel};
pub use shapes::{voxelize, Inclusion, Shape};
