//! Heralded tailoring of single-photon spatial coherence and transverse
//! Anderson localization in disordered waveguide arrays.
//!
//! A Gaussian biphoton is split into Schmidt modes; detecting photon B
//! through a multimode slab waveguide leaves photon A in a partially
//! coherent state whose spreading is then followed through an ordered or
//! disordered layered array.

// `!(x > 0.0)` is used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod biphoton;
pub mod error;
pub mod grid;
pub mod harness;
pub mod herald;
pub mod modesolver;
pub mod transport;

pub use biphoton::{
    CoherenceSummary, CorrelationKernel, GaussianBiphotonSpec, SchmidtDecomposition,
};
pub use error::{Error, Result};
pub use grid::{SampledModes, SpatialGrid};
pub use harness::{ExperimentConfig, Preset, ResultSet};
pub use herald::{CouplingMatrix, HeraldedState, MagnificationScan, ZPolicy};
pub use modesolver::{GuidedModeSet, IndexProfile, SlabSpec, WgaGeometry};
pub use transport::{EnsembleResult, EnsembleSpec, IntensityProfile};
