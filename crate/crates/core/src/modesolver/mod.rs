//! Layered refractive-index structures and their guided TE modes.
//!
//! The waveguide array is solved on a grid with a finite-difference
//! discretization of `u'' + (n^2 k0^2 - kappa^2) u = 0`; the symmetric
//! three-slab waveguide is solved from its dispersion relation.

mod fd;
mod profile;
mod slab;
pub mod tridiag;

pub use fd::{solve_modes_fd, solve_modes_fd_unrefined};
pub use profile::{
    build_wga, wga_stack, DisorderSpec, IndexProfile, Layer, LayerStack, WgaGeometry,
    INDEX_AL030_1550, INDEX_AL080_1550,
};
pub use slab::{
    select_tsw_family, slab_mode_count, slab_mode_shapes, solve_slab_modes, Parity, SlabModeShape,
    SlabSpec,
};

use serde::{Deserialize, Serialize};

use crate::grid::SampledModes;

/// Guided modes ordered fundamental first (descending propagation constant).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GuidedModeSet {
    /// Propagation constants in 1/um.
    pub propagation_constants: Vec<f64>,
    pub effective_indices: Vec<f64>,
    /// Orthonormal real profiles.
    pub modes: SampledModes,
    pub k0: f64,
}

impl GuidedModeSet {
    pub fn len(&self) -> usize {
        self.propagation_constants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.propagation_constants.is_empty()
    }
}
