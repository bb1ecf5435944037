use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

/// Refractive index of Al0.3Ga0.7As at 1550 nm.
///
/// Approximate value of the Gehrsitz et al. AlGaAs model
/// (J. Appl. Phys. 87, 7825 (2000)) evaluated at room temperature; the
/// simulator never evaluates the dispersion model itself. Override in the
/// configuration when precise material data is available.
pub const INDEX_AL030_1550: f64 = 3.229;
/// Refractive index of Al0.8Ga0.2As at 1550 nm; same provenance as [`INDEX_AL030_1550`].
pub const INDEX_AL080_1550: f64 = 3.008;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// Thickness in um.
    pub thickness: f64,
    pub index: f64,
}

/// Layers stacked along x, centred on x = 0 and embedded in `background_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub layers: Vec<Layer>,
    /// Vacuum wavelength in um.
    pub wavelength: f64,
    pub background_index: f64,
}

impl LayerStack {
    pub fn new(layers: Vec<Layer>, wavelength: f64, background_index: f64) -> Result<Self> {
        if let Some((i, l)) = layers
            .iter()
            .enumerate()
            .find(|(_, l)| !(l.thickness > 0.0) || !(l.index > 1.0))
        {
            return Err(Error::domain(format!(
                "layer {i} needs positive thickness and index > 1, got {} um / {}",
                l.thickness, l.index
            )));
        }
        if !(wavelength > 0.0) {
            return Err(Error::domain(format!("wavelength must be positive, got {wavelength}")));
        }
        if !(background_index > 1.0) {
            return Err(Error::domain(format!(
                "background index must exceed 1, got {background_index}"
            )));
        }
        Ok(Self {
            layers,
            wavelength,
            background_index,
        })
    }

    pub fn total_thickness(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness).sum()
    }

    /// Interface positions, `layers.len() + 1` of them.
    fn interfaces(&self) -> Vec<f64> {
        let mut x = -0.5 * self.total_thickness();
        let mut out = Vec::with_capacity(self.layers.len() + 1);
        out.push(x);
        for l in &self.layers {
            x += l.thickness;
            out.push(x);
        }
        out
    }

    /// Mean of `n^2` over `[a, b]`.
    fn mean_n2(&self, interfaces: &[f64], a: f64, b: f64) -> f64 {
        let bg2 = self.background_index * self.background_index;
        let first = interfaces[0];
        let last = *interfaces.last().expect("non-empty interfaces");
        let mut acc = 0.0;
        acc += bg2 * (b.min(first) - a).max(0.0);
        acc += bg2 * (b - a.max(last)).max(0.0);
        // First layer whose right interface lies beyond `a`.
        let start = interfaces.partition_point(|&x| x <= a).saturating_sub(1);
        for (j, layer) in self.layers.iter().enumerate().skip(start) {
            let lo = interfaces[j].max(a);
            let hi = interfaces[j + 1].min(b);
            if interfaces[j] >= b {
                break;
            }
            if hi > lo {
                acc += layer.index * layer.index * (hi - lo);
            }
        }
        acc / (b - a)
    }
}

/// Gaussian index disorder, independent per layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    /// Standard deviation of the per-layer index perturbation.
    pub delta: f64,
    pub seed: u64,
}

impl DisorderSpec {
    pub fn ordered() -> Self {
        Self { delta: 0.0, seed: 0 }
    }
}

/// Refractive index sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexProfile {
    pub grid: SpatialGrid,
    pub n_values: Vec<f64>,
    pub wavelength: f64,
    pub k0: f64,
    /// Outermost cladding index; guided modes have effective index above it.
    pub cladding_index: f64,
    /// Stack the profile was sampled from, if any; enables grid refinement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stack: Option<LayerStack>,
}

impl IndexProfile {
    /// Samples a stack on a uniform grid with `padding` of background on both sides.
    ///
    /// Each node carries the cell average of `n^2` over `[x - h/2, x + h/2]`,
    /// which keeps the discretization second order across interfaces.
    pub fn from_stack(stack: &LayerStack, grid_step: f64, padding: f64) -> Result<Self> {
        if !(grid_step > 0.0) {
            return Err(Error::domain(format!("grid step must be positive, got {grid_step}")));
        }
        if !(padding >= 0.0) {
            return Err(Error::domain(format!("padding must be nonnegative, got {padding}")));
        }
        let half = 0.5 * stack.total_thickness() + padding;
        let grid = SpatialGrid::centered_with_step(half, grid_step)?;
        let interfaces = stack.interfaces();
        let n_values = (0..grid.n_points)
            .map(|k| {
                let x = grid.x(k);
                stack
                    .mean_n2(&interfaces, x - 0.5 * grid_step, x + 0.5 * grid_step)
                    .sqrt()
            })
            .collect();
        Ok(Self {
            grid,
            n_values,
            wavelength: stack.wavelength,
            k0: 2.0 * PI / stack.wavelength,
            cladding_index: stack.background_index,
            stack: Some(stack.clone()),
        })
    }

    /// The same structure resampled with half the grid step and the same padding.
    pub fn refined(&self) -> Option<Result<Self>> {
        let stack = self.stack.as_ref()?;
        let padding = self.grid.x_max() - 0.5 * stack.total_thickness();
        Some(Self::from_stack(stack, 0.5 * self.grid.dx, padding.max(0.0)))
    }

    pub fn max_index(&self) -> f64 {
        self.n_values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }
}

/// Geometry of the alternating waveguide array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WgaGeometry {
    pub n_layers: usize,
    /// Thickness of every layer in um.
    pub layer_thickness: f64,
    pub n_high: f64,
    pub n_low: f64,
    pub background_index: f64,
    pub wavelength: f64,
    pub grid_step: f64,
    /// Background material added on each side, um.
    pub padding: f64,
}

impl Default for WgaGeometry {
    fn default() -> Self {
        Self {
            n_layers: 101,
            layer_thickness: 0.6,
            n_high: INDEX_AL030_1550,
            n_low: INDEX_AL080_1550,
            background_index: INDEX_AL080_1550,
            wavelength: 1.55,
            grid_step: 0.05,
            padding: 20.0,
        }
    }
}

/// The alternating stack, outer layers high-index, with per-layer disorder.
pub fn wga_stack(geometry: &WgaGeometry, disorder: &DisorderSpec) -> Result<LayerStack> {
    if geometry.n_layers.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "layer count must be odd, got {}",
            geometry.n_layers
        )));
    }
    if !(disorder.delta >= 0.0) || !disorder.delta.is_finite() {
        return Err(Error::domain(format!(
            "disorder delta must be nonnegative, got {}",
            disorder.delta
        )));
    }
    let nominal = |j: usize| if j.is_multiple_of(2) { geometry.n_high } else { geometry.n_low };
    let layers: Vec<Layer> = if disorder.delta == 0.0 {
        (0..geometry.n_layers)
            .map(|j| Layer {
                thickness: geometry.layer_thickness,
                index: nominal(j),
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(disorder.seed);
        let noise = Normal::new(0.0, disorder.delta)
            .map_err(|e| Error::domain(format!("disorder distribution: {e}")))?;
        (0..geometry.n_layers)
            .map(|j| Layer {
                thickness: geometry.layer_thickness,
                index: nominal(j) + noise.sample(&mut rng),
            })
            .collect()
    };
    LayerStack::new(layers, geometry.wavelength, geometry.background_index)
}

/// Samples the (possibly disordered) waveguide array on its grid.
pub fn build_wga(geometry: &WgaGeometry, disorder: &DisorderSpec) -> Result<IndexProfile> {
    let limit = geometry.layer_thickness / 8.0;
    if geometry.grid_step > limit * (1.0 + 1e-12) {
        return Err(Error::Resolution {
            step: geometry.grid_step,
            limit,
        });
    }
    let stack = wga_stack(geometry, disorder)?;
    IndexProfile::from_stack(&stack, geometry.grid_step, geometry.padding)
}
