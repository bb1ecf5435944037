use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use super::{biphoton_kernel, GaussianBiphotonSpec};
use crate::error::{Error, Result};
use crate::grid::{fix_sign, SampledModes, SpatialGrid};

/// Truncated Schmidt decomposition `Psi(x, y) = sum_j sqrt(lambda_j) f_j(x) g_j(y)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchmidtDecomposition {
    /// Schmidt weights, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Photon A modes `f_j`.
    pub modes_a: SampledModes,
    /// Photon B modes `g_j`, paired with `modes_a` by index.
    pub modes_b: SampledModes,
    /// Weight discarded by truncation, `1 - sum(eigenvalues)`.
    pub truncation_residual: f64,
}

impl SchmidtDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Retained weights rescaled to sum to one.
    pub fn normalized_eigenvalues(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        self.eigenvalues.iter().map(|l| l / total).collect()
    }

    /// `sum_j sqrt(lambda_j) f_j(x_i) g_j(y_k)` on the decomposition grids.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let ga = &self.modes_a.grid;
        let gb = &self.modes_b.grid;
        let mut out = DMatrix::zeros(ga.n_points, gb.n_points);
        for ((lambda, f), g) in self
            .eigenvalues
            .iter()
            .zip(&self.modes_a.profiles)
            .zip(&self.modes_b.profiles)
        {
            let s = lambda.sqrt();
            for (k, gk) in g.iter().enumerate() {
                let w = s * gk;
                for (i, fi) in f.iter().enumerate() {
                    out[(i, k)] += w * fi;
                }
            }
        }
        out
    }
}

/// Schmidt decomposition on a common grid for both photons.
pub fn schmidt_decompose(
    spec: &GaussianBiphotonSpec,
    grid: &SpatialGrid,
    epsilon_trunc: f64,
) -> Result<SchmidtDecomposition> {
    schmidt_decompose_on(spec, grid, grid, epsilon_trunc)
}

/// Schmidt decomposition from the SVD of the quadrature-weighted sampled kernel
/// `sqrt(dx dy) Psi(x_i, y_k)`.
///
/// Keeps the smallest number of modes whose weights reach `1 - epsilon_trunc`.
/// Each photon-A mode is signed so that its first extremum from the left is
/// positive; the paired photon-B mode follows so the product is unchanged.
pub fn schmidt_decompose_on(
    spec: &GaussianBiphotonSpec,
    grid_x: &SpatialGrid,
    grid_y: &SpatialGrid,
    epsilon_trunc: f64,
) -> Result<SchmidtDecomposition> {
    if !(epsilon_trunc > 0.0 && epsilon_trunc <= 0.01) {
        return Err(Error::domain(format!(
            "epsilon_trunc must lie in (0, 0.01], got {epsilon_trunc}"
        )));
    }
    let psi = biphoton_kernel(spec, grid_x, grid_y)?;
    let weighted = psi * (grid_x.dx * grid_y.dx).sqrt();
    let svd = SVD::try_new(weighted, true, true, f64::EPSILON, 10_000).ok_or_else(|| {
        Error::Numeric(format!(
            "SVD did not converge on {}x{} kernel (dx = {}, dy = {})",
            grid_x.n_points, grid_y.n_points, grid_x.dx, grid_y.dx
        ))
    })?;
    let u = svd.u.as_ref().expect("left vectors requested");
    let v_t = svd.v_t.as_ref().expect("right vectors requested");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut eigenvalues = Vec::new();
    let mut modes_a = Vec::new();
    let mut modes_b = Vec::new();
    let mut kept = 0.0;
    let norm_a = grid_x.dx.sqrt();
    let norm_b = grid_y.dx.sqrt();
    for &idx in &order {
        if kept >= 1.0 - epsilon_trunc {
            break;
        }
        let s = svd.singular_values[idx];
        let lambda = s * s;
        let mut f: Vec<f64> = u.column(idx).iter().map(|v| v / norm_a).collect();
        let mut g: Vec<f64> = v_t.row(idx).iter().map(|v| v / norm_b).collect();
        if fix_sign(&mut f) {
            g.iter_mut().for_each(|v| *v = -*v);
        }
        kept += lambda;
        eigenvalues.push(lambda);
        modes_a.push(f);
        modes_b.push(g);
    }

    Ok(SchmidtDecomposition {
        truncation_residual: (1.0 - kept).max(0.0),
        eigenvalues,
        modes_a: SampledModes::new(*grid_x, modes_a)?,
        modes_b: SampledModes::new(*grid_y, modes_b)?,
    })
}

/// Effective number of modes `(sum lambda)^2 / sum lambda^2`.
pub fn schmidt_number(eigenvalues: &[f64]) -> Result<f64> {
    if eigenvalues.iter().any(|l| *l < 0.0 || !l.is_finite()) {
        return Err(Error::domain("Schmidt weights must be finite and nonnegative"));
    }
    let sum: f64 = eigenvalues.iter().sum();
    let sum_sq: f64 = eigenvalues.iter().map(|l| l * l).sum();
    if !(sum_sq > 0.0) {
        return Err(Error::domain("Schmidt weights are empty or all zero"));
    }
    Ok(sum * sum / sum_sq)
}

/// Entropy of entanglement `-sum lambda log2 lambda` in bits.
pub fn entanglement_entropy(eigenvalues: &[f64]) -> Result<f64> {
    if eigenvalues.iter().any(|l| *l < 0.0 || !l.is_finite()) {
        return Err(Error::domain("Schmidt weights must be finite and nonnegative"));
    }
    let sum: f64 = eigenvalues.iter().sum();
    if (sum - 1.0).abs() > 1e-8 {
        return Err(Error::domain(format!(
            "Schmidt weights must sum to 1 within 1e-8, got {sum}"
        )));
    }
    Ok(eigenvalues
        .iter()
        .filter(|l| **l > 0.0)
        .map(|l| -l * l.log2())
        .sum::<f64>()
        .abs())
}
