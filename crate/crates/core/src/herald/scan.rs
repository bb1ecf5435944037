use serde::{Deserialize, Serialize};

use super::magnify;
use crate::error::{Error, Result};
use crate::grid::SampledModes;

/// Default scan: 64 log-spaced magnifications over [0.25, 4].
pub const DEFAULT_Z_MIN: f64 = 0.25;
pub const DEFAULT_Z_MAX: f64 = 4.0;
pub const DEFAULT_Z_SAMPLES: usize = 64;
const MIN_Z_SAMPLES: usize = 32;
const REFINE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnificationScan {
    pub z_values: Vec<f64>,
    pub f_values: Vec<f64>,
    /// Best magnification after local refinement around the best sample.
    pub z_optimum: f64,
    pub f_optimum: f64,
}

pub fn default_z_grid() -> Vec<f64> {
    log_spaced(DEFAULT_Z_MIN, DEFAULT_Z_MAX, DEFAULT_Z_SAMPLES)
}

pub(crate) fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| {
            if k + 1 == n {
                hi
            } else {
                (a + (b - a) * k as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// `F(z) = prod_j |d_jj|` over the first `min(N, n_max)` mode pairs, with the
/// Schmidt modes magnified by `z` onto the guided modes' grid.
pub fn overlap_factor(schmidt_b: &SampledModes, guided: &SampledModes, z: f64) -> Result<f64> {
    let pairs = schmidt_b.len().min(guided.len());
    if pairs == 0 {
        return Err(Error::domain("overlap factor needs non-empty mode sets"));
    }
    let magnified = magnify(&schmidt_b.truncated(pairs), z, &guided.grid)?;
    let grid = guided.grid;
    Ok(magnified
        .profiles
        .iter()
        .zip(&guided.profiles)
        .map(|(g, v)| grid.inner(g, v).abs())
        .product())
}

/// Scans `F` over `z_grid`, then refines the best sample by golden-section
/// search within its neighbouring samples. Ties go to the smallest `z`.
pub fn optimize_magnification(
    schmidt_b: &SampledModes,
    guided: &SampledModes,
    z_grid: &[f64],
) -> Result<MagnificationScan> {
    if schmidt_b.is_empty() || guided.is_empty() {
        return Err(Error::domain("magnification scan needs non-empty mode sets"));
    }
    if z_grid.len() < MIN_Z_SAMPLES {
        return Err(Error::domain(format!(
            "magnification grid needs at least {MIN_Z_SAMPLES} samples, got {}",
            z_grid.len()
        )));
    }
    if !z_grid.windows(2).all(|w| w[0] < w[1]) || !(z_grid[0] > 0.0) {
        return Err(Error::domain(
            "magnification grid must be positive and strictly increasing",
        ));
    }
    if z_grid[0] > DEFAULT_Z_MIN || z_grid[z_grid.len() - 1] < DEFAULT_Z_MAX {
        return Err(Error::domain(format!(
            "magnification grid must span at least [{DEFAULT_Z_MIN}, {DEFAULT_Z_MAX}]"
        )));
    }

    let f = |z: f64| overlap_factor(schmidt_b, guided, z);
    let f_values = z_grid.iter().map(|&z| f(z)).collect::<Result<Vec<f64>>>()?;
    let best = f_values
        .iter()
        .enumerate()
        .fold(0, |b, (k, v)| if *v > f_values[b] { k } else { b });

    let mut lo = z_grid[best.saturating_sub(1)];
    let mut hi = z_grid[(best + 1).min(z_grid.len() - 1)];
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while hi - lo > REFINE_TOLERANCE {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = f(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = f(d)?;
        }
    }
    let (z_refined, f_refined) = if fc >= fd { (c, fc) } else { (d, fd) };
    let (z_optimum, f_optimum) = if f_refined > f_values[best] {
        (z_refined, f_refined)
    } else {
        (z_grid[best], f_values[best])
    };
    Ok(MagnificationScan {
        z_values: z_grid.to_vec(),
        f_values,
        z_optimum,
        f_optimum,
    })
}
