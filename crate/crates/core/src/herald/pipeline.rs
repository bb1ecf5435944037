use serde::{Deserialize, Serialize};

use super::scan::{log_spaced, DEFAULT_Z_MAX, DEFAULT_Z_MIN, DEFAULT_Z_SAMPLES};
use super::{couple, herald_filter, magnify, optimize_magnification};
use super::{CouplingMatrix, HeraldedState, MagnificationScan};
use crate::biphoton::{
    coherence_summary, schmidt_decompose, CoherenceSummary, CorrelationKernel,
    GaussianBiphotonSpec, SchmidtDecomposition, DEFAULT_EPSILON_TRUNC,
};
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::modesolver::{slab_mode_shapes, solve_slab_modes, GuidedModeSet, SlabSpec};

/// Sampling step of the three-slab waveguide window, um.
pub const TSW_GRID_STEP: f64 = 0.02;
/// Guided-mode tails are kept down to `exp(-18.5)` ~ 1e-8 of the interface amplitude.
const TAIL_DECAY_LENGTHS: f64 = 18.5;
const MAX_TSW_HALF_WIDTH: f64 = 2000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZPolicy {
    /// Maximize the overlap factor over `samples` log-spaced values.
    Optimize { z_min: f64, z_max: f64, samples: usize },
    Fixed(f64),
}

impl Default for ZPolicy {
    fn default() -> Self {
        ZPolicy::Optimize {
            z_min: DEFAULT_Z_MIN,
            z_max: DEFAULT_Z_MAX,
            samples: DEFAULT_Z_SAMPLES,
        }
    }
}

impl ZPolicy {
    fn largest(&self) -> f64 {
        match *self {
            ZPolicy::Optimize { z_max, .. } => z_max,
            ZPolicy::Fixed(z) => z,
        }
    }
}

/// Window holding both the slab's guided modes and the Schmidt modes of
/// `schmidt_grid` magnified by up to `z_max`.
pub fn tsw_grid(schmidt_grid: &SpatialGrid, slab: &SlabSpec, z_max: f64) -> Result<SpatialGrid> {
    if !(z_max > 0.0) {
        return Err(Error::domain(format!("magnification must be positive, got {z_max}")));
    }
    let shapes = slab_mode_shapes(slab)?;
    let slowest = shapes.iter().map(|s| s.decay).fold(f64::INFINITY, f64::min);
    let tail = TAIL_DECAY_LENGTHS / slowest;
    let source_half = schmidt_grid.x_min.abs().max(schmidt_grid.x_max().abs());
    let half = (z_max * source_half + 1.0).max(0.5 * slab.core_width + tail.max(2.0));
    if half > MAX_TSW_HALF_WIDTH {
        return Err(Error::domain(format!(
            "slab of width {} um needs a {half:.0} um window; a mode sits too close to cutoff",
            slab.core_width
        )));
    }
    SpatialGrid::centered_with_step(half, TSW_GRID_STEP)
}

/// Photon A heralded by detecting photon B in every guided mode of a slab.
#[derive(Debug, Clone)]
pub struct HeraldedPhoton {
    pub slab: SlabSpec,
    pub tsw_modes: GuidedModeSet,
    pub magnification: f64,
    pub scan: Option<MagnificationScan>,
    /// Couplings of the magnified Schmidt modes of photon B into the slab.
    pub coupling: CouplingMatrix,
    pub state: HeraldedState,
}

impl HeraldedPhoton {
    pub fn correlation(&self, schmidt: &SchmidtDecomposition) -> Result<CorrelationKernel> {
        self.state.correlation(&schmidt.modes_a)
    }

    pub fn coherence(&self, schmidt: &SchmidtDecomposition) -> Result<CoherenceSummary> {
        coherence_summary(&self.correlation(schmidt)?)
    }
}

pub fn herald_photon(
    schmidt: &SchmidtDecomposition,
    slab: &SlabSpec,
    policy: &ZPolicy,
) -> Result<HeraldedPhoton> {
    let grid = tsw_grid(&schmidt.modes_b.grid, slab, policy.largest())?;
    let tsw_modes = solve_slab_modes(slab, &grid)?;
    let (magnification, scan) = match *policy {
        ZPolicy::Fixed(z) => (z, None),
        ZPolicy::Optimize {
            z_min,
            z_max,
            samples,
        } => {
            if !(z_min > 0.0 && z_max > z_min) || samples < 2 {
                return Err(Error::domain(format!(
                    "invalid magnification scan [{z_min}, {z_max}] with {samples} samples"
                )));
            }
            let scan = optimize_magnification(
                &schmidt.modes_b,
                &tsw_modes.modes,
                &log_spaced(z_min, z_max, samples),
            )?;
            (scan.z_optimum, Some(scan))
        }
    };
    let magnified = magnify(&schmidt.modes_b, magnification, &grid)?;
    let coupling = couple(&magnified, &tsw_modes.modes)?;
    let state = herald_filter(schmidt, &coupling, tsw_modes.len())?;
    Ok(HeraldedPhoton {
        slab: *slab,
        tsw_modes,
        magnification,
        scan,
        coupling,
        state,
    })
}

/// Coherence of photon A heralded through `slab`, from the default Schmidt
/// decomposition of `spec`.
pub fn heralded_coherence(
    spec: &GaussianBiphotonSpec,
    slab: &SlabSpec,
    policy: &ZPolicy,
) -> Result<CoherenceSummary> {
    let schmidt = schmidt_decompose(spec, &spec.default_grid(), DEFAULT_EPSILON_TRUNC)?;
    herald_photon(&schmidt, slab, policy)?.coherence(&schmidt)
}
