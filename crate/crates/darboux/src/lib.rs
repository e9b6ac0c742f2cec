//! Conformal differential geometry of hypersurfaces in the Darboux
//! light-cone model.
//!
//! The crate computes the conformal quadratic element I = h^2 / g of a
//! hypersurface in a conformal or pseudoconformal space, builds the
//! associated second-order moving frames, verifies the frame and structure
//! relations numerically, and decides conformal equivalence of two
//! hypersurfaces by factorizing their fundamental forms, reconstructing the
//! Moebius transformation that realizes the equivalence.
//!
//! Modules:
//!
//! - [`bilinear`]: signed symmetric bilinear forms (inversion, contraction,
//!   signature classification, real decomposability).
//! - [`expr`]: the immersion expression language and exact second-order
//!   jets.
//! - [`mobius`]: the light-cone model, hyperspheres, and the conformal
//!   group.
//! - [`hypersurface`]: fundamental forms, umbilicity, the invariant I.
//! - [`frames`]: conformal moving frames and connection/structure checks.
//! - [`equivalence`]: the rigidity decision and Moebius reconstruction.
//! - [`catalog`]: built-in example surfaces with documented closed forms.

pub mod bilinear;
pub mod catalog;
pub mod equivalence;
pub mod error;
pub mod expr;
pub mod frames;
pub mod grid;
pub mod hypersurface;
pub mod mobius;

pub use bilinear::{FormClass, Signature, SymForm};
pub use error::GeometryError;
pub use expr::{eval_jet2, parse, ExprAst, Jet2, ParseError};
pub use grid::Grid;
pub use hypersurface::{
    canonical_element, fundamental_forms, invariant_i, is_umbilical, FundamentalData, Immersion,
    InvariantElement, SurfaceJet,
};
pub use mobius::{
    incidence, quadric_residual, AmbientSpace, Generator, LightConeVector, MobiusMap,
};
