//! Propagation of the heralded photon through a waveguide array and the
//! disorder-ensemble statistics of its effective width.

mod ensemble;

pub use ensemble::{
    ensemble_run, ensemble_run_many, realization_seed, Averaging, EnsembleResult, EnsembleSpec,
    PhotonInput,
};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::herald::{CouplingMatrix, HeraldedState};
use crate::modesolver::GuidedModeSet;

/// Photon-number density of photon A at distance `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityProfile {
    pub grid: SpatialGrid,
    pub values: Vec<f64>,
    /// Propagation distance, um.
    pub z: f64,
    /// Fraction of the heralded photon carried by guided modes.
    pub captured_fraction: f64,
}

/// Guided-mode expansion of a heralded state, evaluated at any `z`.
///
/// The unit-trace density `rho = sum_k w_k |phi_k><phi_k|` is split into pure
/// components; each evolves as `sum_i a_ik exp(i kappa_i z) u_i(x)`.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: SpatialGrid,
    /// `u_i(x)` as columns.
    modes: DMatrix<f64>,
    kappa: Vec<f64>,
    /// `a_ik`, guided modes by pure components.
    amplitudes: DMatrix<Complex64>,
    captured_fraction: f64,
}

impl Propagator {
    /// `c` couples the Schmidt modes of photon A (rows) into `wga` (columns).
    pub fn new(heralded: &HeraldedState, c: &CouplingMatrix, wga: &GuidedModeSet) -> Result<Self> {
        let n = heralded.schmidt_weights.len();
        if c.sources() != n || c.guided() != wga.len() {
            return Err(Error::domain(format!(
                "coupling matrix is {}x{}, expected {n}x{}",
                c.sources(),
                c.guided(),
                wga.len()
            )));
        }
        let grid = wga.modes.grid;
        let components = heralded.pure_components();
        let amplitudes = DMatrix::from_fn(wga.len(), components.len(), |i, k| {
            let (w, e) = &components[k];
            let s: Complex64 = (0..n).map(|m| e[m] * c.entries[(m, i)]).sum();
            s * w.sqrt()
        });
        let captured_fraction = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        let modes = DMatrix::from_fn(grid.n_points, wga.len(), |x, i| wga.modes.profiles[i][x]);
        Ok(Self {
            grid,
            modes,
            kappa: wga.propagation_constants.clone(),
            amplitudes,
            captured_fraction,
        })
    }

    pub fn captured_fraction(&self) -> f64 {
        self.captured_fraction
    }

    pub fn intensity(&self, z: f64) -> Result<IntensityProfile> {
        if !(z >= 0.0) || !z.is_finite() {
            return Err(Error::domain(format!("propagation distance must be >= 0, got {z}")));
        }
        let (g, k) = self.amplitudes.shape();
        // Real and imaginary parts of a_ik exp(i kappa_i z), side by side.
        let mut phased = DMatrix::<f64>::zeros(g, 2 * k);
        for i in 0..g {
            let phase = Complex64::from_polar(1.0, self.kappa[i] * z);
            for c in 0..k {
                let v = self.amplitudes[(i, c)] * phase;
                phased[(i, c)] = v.re;
                phased[(i, k + c)] = v.im;
            }
        }
        let fields = &self.modes * phased;
        let values = fields
            .row_iter()
            .map(|r| r.iter().map(|v| v * v).sum())
            .collect();
        Ok(IntensityProfile {
            grid: self.grid,
            values,
            z,
            captured_fraction: self.captured_fraction,
        })
    }
}

/// `p_A(x, z)` of the heralded state after distance `z` in the array.
pub fn propagate_intensity(
    heralded: &HeraldedState,
    c: &CouplingMatrix,
    wga: &GuidedModeSet,
    z: f64,
) -> Result<IntensityProfile> {
    Propagator::new(heralded, c, wga)?.intensity(z)
}

/// `(integral p)^2 / integral p^2`.
pub fn effective_width(p: &IntensityProfile) -> Result<f64> {
    width_of(&p.grid, &p.values)
}

pub(crate) fn width_of(grid: &SpatialGrid, values: &[f64]) -> Result<f64> {
    let total = grid.integrate(values);
    let square: f64 = grid.dx * values.iter().map(|v| v * v).sum::<f64>();
    if !(total > 0.0 && square > 0.0) {
        return Err(Error::domain("effective width of a zero intensity profile"));
    }
    Ok(total * total / square)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::herald::{couple, herald_filter, magnify};
    use crate::biphoton::{schmidt_decompose, GaussianBiphotonSpec};
    use crate::modesolver::{build_wga, solve_modes_fd, DisorderSpec, WgaGeometry};
    use std::f64::consts::PI;

    fn profile(grid: SpatialGrid, values: Vec<f64>) -> IntensityProfile {
        IntensityProfile {
            grid,
            values,
            z: 0.0,
            captured_fraction: 1.0,
        }
    }

    #[test]
    fn gaussian_and_box_widths() {
        let g = SpatialGrid::centered_with_step(30.0, 0.01).unwrap();
        for s in [0.5, 1.0, 3.0] {
            let v = g.points().iter().map(|x| (-x * x / (2.0 * s * s)).exp()).collect();
            let w = effective_width(&profile(g, v)).unwrap();
            assert!((w / (2.0 * s * PI.sqrt()) - 1.0).abs() < 1e-3);
        }
        let boxed: Vec<f64> = (0..g.n_points).map(|k| if (1000..2500).contains(&k) { 2.5 } else { 0.0 }).collect();
        let w = effective_width(&profile(g, boxed.clone())).unwrap();
        assert!((w - 1500.0 * g.dx).abs() < 1e-9);
        let scaled = boxed.iter().map(|v| 7.0 * v).collect();
        assert!((effective_width(&profile(g, scaled)).unwrap() - w).abs() < 1e-9);
        assert!(effective_width(&profile(g, vec![0.0; g.n_points])).is_err());
    }

    #[test]
    fn power_is_conserved_and_nonnegative() {
        let spec = GaussianBiphotonSpec::new(1.0, 1.5).unwrap();
        let s = schmidt_decompose(&spec, &spec.default_grid(), 1e-6).unwrap();
        let wga_profile = build_wga(&WgaGeometry::default(), &DisorderSpec { delta: 0.02, seed: 3 }).unwrap();
        let wga = solve_modes_fd(&wga_profile).unwrap();
        let f = magnify(&s.modes_a, 1.0, &wga.modes.grid).unwrap();
        let c = couple(&f, &wga.modes).unwrap();
        let d = couple(&s.modes_b, &s.modes_b).unwrap();
        let h = herald_filter(&s, &d, 5).unwrap();
        let prop = Propagator::new(&h, &c, &wga).unwrap();
        let p0 = prop.intensity(0.0).unwrap();
        let p1 = prop.intensity(500.0).unwrap();
        let (a, b) = (wga_profile.grid.integrate(&p0.values), wga_profile.grid.integrate(&p1.values));
        assert!((a - b).abs() < 1e-8);
        assert!((a - prop.captured_fraction()).abs() < 1e-8);
        assert!(prop.captured_fraction() <= 1.0 + 1e-8 && prop.captured_fraction() > 0.5);
        assert!(p1.values.iter().all(|v| *v >= -1e-12));
        assert!(prop.intensity(-1.0).is_err());
    }
}
