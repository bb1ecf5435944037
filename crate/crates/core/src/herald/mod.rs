//! Coupling of Schmidt modes into waveguides, the imaging magnification of
//! photon B, and the state of photon A conditioned on detecting photon B.

mod pipeline;
mod scan;

pub use pipeline::{
    herald_photon, heralded_coherence, tsw_grid, HeraldedPhoton, ZPolicy, TSW_GRID_STEP,
};
pub use scan::{default_z_grid, optimize_magnification, overlap_factor, MagnificationScan};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::biphoton::{assemble_g1, CorrelationKernel, SchmidtDecomposition};
use crate::error::{Error, Result};
use crate::grid::{SampledModes, SpatialGrid};

/// Largest fraction of a mode's mass allowed to fall outside a target window.
pub const MAX_MAGNIFIED_LOSS: f64 = 1e-6;

/// Overlaps between source modes (rows) and guided modes (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    pub entries: DMatrix<Complex64>,
    /// `sum_i |entries[n][i]|^2` per row.
    pub row_capture: Vec<f64>,
}

impl CouplingMatrix {
    pub fn sources(&self) -> usize {
        self.entries.nrows()
    }

    pub fn guided(&self) -> usize {
        self.entries.ncols()
    }
}

/// `entries[n][i] = integral source_n(x) conj(guided_i(x)) dx` by grid quadrature.
pub fn couple(source: &SampledModes, guided: &SampledModes) -> Result<CouplingMatrix> {
    source.grid.ensure_same(&guided.grid, "coupling")?;
    let grid = source.grid;
    let entries = DMatrix::from_fn(source.len(), guided.len(), |n, i| {
        Complex64::new(grid.inner(&source.profiles[n], &guided.profiles[i]), 0.0)
    });
    let row_capture = entries
        .row_iter()
        .map(|r| r.iter().map(|c| c.norm_sqr()).sum())
        .collect();
    Ok(CouplingMatrix {
        entries,
        row_capture,
    })
}

/// Maps every mode `g(y)` to `g(y / z) / sqrt(z)` sampled on `target`.
pub fn magnify(modes: &SampledModes, z: f64, target: &SpatialGrid) -> Result<SampledModes> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::domain(format!(
            "magnification must be positive, got {z}"
        )));
    }
    let source = modes.grid;
    let xs: Vec<f64> = target.points().iter().map(|x| x / z).collect();
    let scale = 1.0 / z.sqrt();
    let mut profiles = source.interpolate_many(&modes.profiles, &xs);
    for (j, p) in profiles.iter_mut().enumerate() {
        p.iter_mut().for_each(|v| *v *= scale);
        let before = source.norm_sq(&modes.profiles[j]);
        if before > 0.0 {
            let lost = (before - target.norm_sq(p)) / before;
            if lost > MAX_MAGNIFIED_LOSS {
                return Err(Error::Truncation {
                    what: format!("mode {j} magnified by {z}"),
                    lost,
                    limit: MAX_MAGNIFIED_LOSS,
                });
            }
        }
    }
    SampledModes::new(*target, profiles)
}

/// Photon A after photon B is detected in the first `mode_count_kept` guided modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeraldedState {
    pub schmidt_weights: Vec<f64>,
    /// `I(m, n) = sum_{j < M} d_mj conj(d_nj)`, stored as (re, im) pairs row-major.
    #[serde(with = "complex_matrix")]
    pub filter_matrix: DMatrix<Complex64>,
    /// Trace `sum_n lambda_n I(n, n)` of the unnormalized conditional state.
    pub normalization: f64,
    pub mode_count_kept: usize,
}

/// Projects photon B onto the first `m` guided modes of `d`.
pub fn herald_filter(
    schmidt: &SchmidtDecomposition,
    d: &CouplingMatrix,
    m: usize,
) -> Result<HeraldedState> {
    let n = schmidt.len();
    if d.sources() != n {
        return Err(Error::domain(format!(
            "coupling matrix has {} rows, decomposition has {n} modes",
            d.sources()
        )));
    }
    if m == 0 || m > d.guided() {
        return Err(Error::domain(format!(
            "kept mode count {m} must lie in 1..={}",
            d.guided()
        )));
    }
    let mut filter = DMatrix::<Complex64>::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v: Complex64 = (0..m)
                .map(|j| d.entries[(a, j)] * d.entries[(b, j)].conj())
                .sum();
            filter[(a, b)] = v;
            filter[(b, a)] = v.conj();
        }
        filter[(a, a)].im = 0.0;
    }
    let normalization: f64 = (0..n)
        .map(|k| schmidt.eigenvalues[k] * filter[(k, k)].re)
        .sum();
    if !(normalization >= 1e-12) {
        return Err(Error::DegenerateHerald(normalization));
    }
    Ok(HeraldedState {
        schmidt_weights: schmidt.eigenvalues.clone(),
        filter_matrix: filter,
        normalization,
        mode_count_kept: m,
    })
}

impl HeraldedState {
    /// Unit-trace density matrix in the Schmidt basis of photon A:
    /// `sqrt(lambda_m lambda_n) I(m, n) / normalization`.
    pub fn density_matrix(&self) -> DMatrix<Complex64> {
        let roots: Vec<f64> = self.schmidt_weights.iter().map(|l| l.max(0.0).sqrt()).collect();
        let n = roots.len();
        DMatrix::from_fn(n, n, |a, b| {
            self.filter_matrix[(a, b)] * (roots[a] * roots[b] / self.normalization)
        })
    }

    /// Density eigenvalues, descending.
    pub fn density_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.density_matrix())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        self.density_matrix().iter().map(|c| c.norm_sqr()).sum()
    }

    /// Eigen-decomposition `rho = sum_k w_k e_k e_k^dagger`, dropping
    /// components below `1e-14` of the largest weight.
    pub fn pure_components(&self) -> Vec<(f64, DVector<Complex64>)> {
        let eig = SymmetricEigen::new(self.density_matrix());
        let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
        let mut out: Vec<(f64, DVector<Complex64>)> = eig
            .eigenvalues
            .iter()
            .zip(eig.eigenvectors.column_iter())
            .filter(|(w, _)| **w > 1e-14 * top)
            .map(|(w, v)| (*w, v.into_owned()))
            .collect();
        out.sort_by(|a, b| b.0.total_cmp(&a.0));
        out
    }

    /// First-order correlation of photon A over its Schmidt modes.
    pub fn correlation(&self, modes_a: &SampledModes) -> Result<CorrelationKernel> {
        assemble_g1(&self.schmidt_weights, modes_a, Some(&self.filter_matrix))
    }
}

mod complex_matrix {
    use nalgebra::DMatrix;
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Dense {
        rows: usize,
        cols: usize,
        data: Vec<(f64, f64)>,
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<Complex64>, s: S) -> Result<S::Ok, S::Error> {
        Dense {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().iter().map(|c| (c.re, c.im)).collect(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<Complex64>, D::Error> {
        let dense = Dense::deserialize(d)?;
        if dense.data.len() != dense.rows * dense.cols {
            return Err(serde::de::Error::custom("matrix data length mismatch"));
        }
        Ok(DMatrix::from_row_iterator(
            dense.rows,
            dense.cols,
            dense.data.into_iter().map(|(re, im)| Complex64::new(re, im)),
        ))
    }
}
