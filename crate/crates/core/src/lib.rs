//! Densities of freely selfdecomposable distributions computed from their
//! Levy density, with numerical checks of the structural properties
//! (boundary homeomorphism, unimodality, Cauchy-transform identity).

pub mod cumulants;
pub mod density;
pub mod error;
pub mod levy;
pub mod mollify;
pub mod quad;
pub mod report;
pub mod transforms;
pub mod vcurve;

pub use error::{Error, Result};
pub use levy::{FamilySpec, FreeTriplet, GeneratingPair, LevyDensity, SampleGrid};
pub use quad::QuadSpec;
pub use report::{CheckEntry, ValidationReport};
pub use transforms::TransformContext;
