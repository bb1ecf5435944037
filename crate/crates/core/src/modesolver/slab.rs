use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{GuidedModeSet, Layer, LayerStack};
use crate::error::{Error, Result};
use crate::grid::{fix_sign, orthonormalize, SampledModes, SpatialGrid};

/// Symmetric three-layer slab: a core of `core_width` between two
/// semi-infinite claddings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlabSpec {
    pub core_width: f64,
    pub n_core: f64,
    pub n_clad: f64,
    pub wavelength: f64,
}

impl SlabSpec {
    pub fn new(core_width: f64, n_core: f64, n_clad: f64, wavelength: f64) -> Result<Self> {
        let s = Self {
            core_width,
            n_core,
            n_clad,
            wavelength,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.core_width > 0.0) {
            return Err(Error::domain(format!(
                "core width must be positive, got {}",
                self.core_width
            )));
        }
        if !(self.n_clad > 1.0 && self.n_core > self.n_clad) {
            return Err(Error::domain(format!(
                "slab needs n_core > n_clad > 1, got {} / {}",
                self.n_core, self.n_clad
            )));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::domain(format!(
                "wavelength must be positive, got {}",
                self.wavelength
            )));
        }
        Ok(())
    }

    pub fn numerical_aperture(&self) -> f64 {
        (self.n_core * self.n_core - self.n_clad * self.n_clad).sqrt()
    }

    pub fn k0(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Normalized frequency `V = k0 (d / 2) NA`.
    pub fn v_number(&self) -> f64 {
        self.k0() * 0.5 * self.core_width * self.numerical_aperture()
    }

    /// The same structure as a layer stack, for grid-based solvers.
    pub fn to_stack(&self) -> Result<LayerStack> {
        LayerStack::new(
            vec![Layer {
                thickness: self.core_width,
                index: self.n_core,
            }],
            self.wavelength,
            self.n_clad,
        )
    }

    /// Width of the core with the same indices.
    pub fn with_width(&self, core_width: f64) -> Result<Self> {
        Self::new(core_width, self.n_core, self.n_clad, self.wavelength)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Closed-form field of one guided slab mode (unnormalized, unit core amplitude).
#[derive(Debug, Clone, Copy)]
pub struct SlabModeShape {
    pub parity: Parity,
    /// Transverse wavenumber in the core, 1/um.
    pub kx: f64,
    /// Decay constant in the cladding, 1/um.
    pub decay: f64,
    pub half_width: f64,
    pub effective_index: f64,
}

impl SlabModeShape {
    pub fn value(&self, x: f64) -> f64 {
        let a = self.half_width;
        match self.parity {
            Parity::Even if x.abs() <= a => (self.kx * x).cos(),
            Parity::Even => (self.kx * a).cos() * (-self.decay * (x.abs() - a)).exp(),
            Parity::Odd if x.abs() <= a => (self.kx * x).sin(),
            Parity::Odd => {
                x.signum() * (self.kx * a).sin() * (-self.decay * (x.abs() - a)).exp()
            }
        }
    }

    /// One-sided derivative; `inside` selects the core side of an interface.
    pub fn derivative(&self, x: f64, inside: bool) -> f64 {
        let a = self.half_width;
        let in_core = if x.abs() == a { inside } else { x.abs() < a };
        match (self.parity, in_core) {
            (Parity::Even, true) => -self.kx * (self.kx * x).sin(),
            (Parity::Odd, true) => self.kx * (self.kx * x).cos(),
            (Parity::Even, false) => {
                -x.signum() * self.decay * (self.kx * a).cos() * (-self.decay * (x.abs() - a)).exp()
            }
            (Parity::Odd, false) => {
                -self.decay * (self.kx * a).sin() * (-self.decay * (x.abs() - a)).exp()
            }
        }
    }
}

fn even_relation(u: f64, v: f64) -> f64 {
    let w = (v * v - u * u).max(0.0).sqrt();
    u * u.sin() - w * u.cos()
}

fn odd_relation(u: f64, v: f64) -> f64 {
    let w = (v * v - u * u).max(0.0).sqrt();
    u * u.cos() + w * u.sin()
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-14 * hi.abs() {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All guided modes from the even and odd dispersion relations, fundamental first.
///
/// With `u = kx d / 2` and `w = sqrt(V^2 - u^2)`, even modes satisfy
/// `u sin u = w cos u` and odd modes `u cos u = -w sin u`. Roots are bracketed
/// by scanning `u` in steps of `pi / 128` and refined by bisection.
pub fn slab_mode_shapes(slab: &SlabSpec) -> Result<Vec<SlabModeShape>> {
    slab.validate()?;
    let v = slab.v_number();
    let a = 0.5 * slab.core_width;
    let k0 = slab.k0();
    let step = PI / 128.0;
    let mut nodes: Vec<f64> = (0..)
        .map(|k| k as f64 * step)
        .take_while(|u| *u < v)
        .collect();
    nodes.push(v);

    let mut roots: Vec<(f64, Parity)> = Vec::new();
    for (parity, relation) in [
        (Parity::Even, even_relation as fn(f64, f64) -> f64),
        (Parity::Odd, odd_relation),
    ] {
        for pair in nodes.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let (f_lo, f_hi) = (relation(lo, v), relation(hi, v));
            if f_lo == 0.0 {
                continue;
            }
            if f_hi == 0.0 {
                // A root exactly at u = V is a mode at cutoff, not guided.
                if hi < v {
                    roots.push((hi, parity));
                }
                continue;
            }
            if (f_lo < 0.0) != (f_hi < 0.0) {
                let u = bisect(|u| relation(u, v), lo, hi);
                if u < v {
                    roots.push((u, parity));
                }
            }
        }
    }
    roots.sort_by(|x, y| x.0.total_cmp(&y.0));

    Ok(roots
        .into_iter()
        .map(|(u, parity)| {
            let w = (v * v - u * u).max(0.0).sqrt();
            let kx = u / a;
            SlabModeShape {
                parity,
                kx,
                decay: w / a,
                half_width: a,
                effective_index: (slab.n_core * slab.n_core - (kx / k0).powi(2)).sqrt(),
            }
        })
        .collect())
}

/// Guided TE modes of the symmetric slab sampled on `grid` and orthonormalized
/// under grid quadrature (fundamental first).
pub fn solve_slab_modes(slab: &SlabSpec, grid: &SpatialGrid) -> Result<GuidedModeSet> {
    let shapes = slab_mode_shapes(slab)?;
    let points = grid.points();
    let mut profiles: Vec<Vec<f64>> = shapes
        .iter()
        .map(|s| points.iter().map(|&x| s.value(x)).collect())
        .collect();
    orthonormalize(grid, &mut profiles)?;
    profiles.iter_mut().for_each(|p| {
        fix_sign(p);
    });
    let k0 = slab.k0();
    let effective_indices: Vec<f64> = shapes.iter().map(|s| s.effective_index).collect();
    Ok(GuidedModeSet {
        propagation_constants: effective_indices.iter().map(|n| n * k0).collect(),
        effective_indices,
        modes: SampledModes::new(*grid, profiles)?,
        k0,
    })
}

/// `floor(2 d NA / wavelength) + 1`.
pub fn slab_mode_count(slab: &SlabSpec) -> usize {
    (2.0 * slab.core_width * slab.numerical_aperture() / slab.wavelength).floor() as usize + 1
}

/// Core widths supporting exactly each target mode count.
///
/// Each width is the midpoint of the interval of widths with that count.
pub fn select_tsw_family(targets: &[usize], template: &SlabSpec) -> Result<Vec<SlabSpec>> {
    template.validate()?;
    let cutoff_step = template.wavelength / (2.0 * template.numerical_aperture());
    targets
        .iter()
        .map(|&m| {
            if m == 0 {
                return Err(Error::domain(
                    "a symmetric slab always guides at least one mode",
                ));
            }
            template.with_width((m as f64 - 0.5) * cutoff_step)
        })
        .collect()
}
