use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{SampledModes, SpatialGrid};

/// Zero-padding factor for the wave-number transform.
const FFT_PADDING: usize = 4;

/// First-order correlation `G(x, x') = sum_{m,n} A_mn phi_m(x) conj(phi_n(x'))`
/// kept in a mode expansion over an orthonormal basis `phi`.
#[derive(Debug, Clone)]
pub struct CorrelationKernel {
    pub grid: SpatialGrid,
    pub basis: Vec<Vec<Complex64>>,
    /// Hermitian coefficient matrix `A`.
    pub coefficients: DMatrix<Complex64>,
}

/// rms width `sigma`, rms wave-number width `w` and incoherence `gamma = sigma w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceSummary {
    pub sigma: f64,
    pub w: f64,
    pub gamma: f64,
}

impl CorrelationKernel {
    /// Kernel over real, orthonormal `modes` with the given coefficient matrix.
    pub fn from_modes(modes: &SampledModes, coefficients: DMatrix<Complex64>) -> Result<Self> {
        if coefficients.nrows() != modes.len() || coefficients.ncols() != modes.len() {
            return Err(Error::domain(format!(
                "coefficient matrix is {}x{}, mode set has {} modes",
                coefficients.nrows(),
                coefficients.ncols(),
                modes.len()
            )));
        }
        let basis = modes
            .profiles
            .iter()
            .map(|p| p.iter().map(|&v| Complex64::new(v, 0.0)).collect())
            .collect();
        Ok(Self {
            grid: modes.grid,
            basis,
            coefficients,
        })
    }

    /// Rank-one kernel `f(x) conj(f(x'))`.
    pub fn pure(grid: SpatialGrid, profile: &[f64]) -> Result<Self> {
        let modes = SampledModes::new(grid, vec![profile.to_vec()])?;
        Self::from_modes(&modes, DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)))
    }

    /// Kernel from its sampled values `G(x_i, x_j)`; diagonalized into modes.
    pub fn from_matrix(grid: SpatialGrid, values: DMatrix<Complex64>) -> Result<Self> {
        let n = grid.n_points;
        if values.nrows() != n || values.ncols() != n {
            return Err(Error::domain(format!(
                "kernel matrix is {}x{}, grid has {n} points",
                values.nrows(),
                values.ncols()
            )));
        }
        let herm_err = (&values - values.adjoint()).camax();
        if herm_err > 1e-10 * values.camax().max(1e-300) {
            return Err(Error::domain(format!(
                "kernel is not Hermitian (deviation {herm_err:e})"
            )));
        }
        let eig = SymmetricEigen::new(values);
        let scale = grid.dx.sqrt();
        let basis = eig
            .eigenvectors
            .column_iter()
            .map(|c| c.iter().map(|v| v / scale).collect())
            .collect();
        let coefficients = DMatrix::from_diagonal(
            &eig.eigenvalues.map(|e| Complex64::new(e * grid.dx, 0.0)),
        );
        Ok(Self {
            grid,
            basis,
            coefficients,
        })
    }

    pub fn mode_count(&self) -> usize {
        self.basis.len()
    }

    /// `G(x, x)` on the grid.
    pub fn diagonal(&self) -> Vec<f64> {
        quadratic_diagonal(&self.coefficients, &self.basis, self.grid.n_points)
    }

    /// Quadrature trace of the kernel.
    pub fn trace(&self) -> f64 {
        self.grid.integrate(&self.diagonal())
    }

    /// Dense samples `G(x_i, x_j)`.
    pub fn values(&self) -> DMatrix<Complex64> {
        let n = self.grid.n_points;
        let m = self.basis.len();
        let phi = DMatrix::from_fn(n, m, |i, k| self.basis[k][i]);
        &phi * &self.coefficients * phi.adjoint()
    }

    /// Spectrum of the operator, valid for an orthonormal basis.
    pub fn operator_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.coefficients.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// Scales the kernel to unit quadrature trace.
    pub fn normalized(mut self) -> Result<Self> {
        let trace = self.trace();
        if !(trace > 0.0) {
            return Err(Error::domain(format!("kernel trace must be positive, got {trace}")));
        }
        self.coefficients /= Complex64::new(trace, 0.0);
        Ok(self)
    }
}

fn quadratic_diagonal(a: &DMatrix<Complex64>, basis: &[Vec<Complex64>], len: usize) -> Vec<f64> {
    let m = basis.len();
    let mut out = vec![0.0; len];
    let mut v = vec![Complex64::default(); m];
    for (i, slot) in out.iter_mut().enumerate() {
        for (k, b) in basis.iter().enumerate() {
            v[k] = b[i];
        }
        let mut acc = Complex64::default();
        for r in 0..m {
            if v[r] == Complex64::default() {
                continue;
            }
            let mut row = Complex64::default();
            for c in 0..m {
                row += a[(r, c)] * v[c].conj();
            }
            acc += v[r] * row;
        }
        *slot = acc.re;
    }
    out
}

/// First-order correlation of photon A after heralding:
/// `A_mn = sqrt(lambda_m lambda_n) I(m, n)` over the Schmidt modes `f`,
/// renormalized to unit trace. `None` means no filter (identity).
pub fn assemble_g1(
    eigenvalues: &[f64],
    modes_a: &SampledModes,
    filter: Option<&DMatrix<Complex64>>,
) -> Result<CorrelationKernel> {
    let n = eigenvalues.len();
    if modes_a.len() != n {
        return Err(Error::domain(format!(
            "{n} Schmidt weights but {} modes",
            modes_a.len()
        )));
    }
    if let Some(f) = filter {
        if f.nrows() != n || f.ncols() != n {
            return Err(Error::domain(format!(
                "filter matrix is {}x{}, expected {n}x{n}",
                f.nrows(),
                f.ncols()
            )));
        }
        let herm_err = (f - f.adjoint()).camax();
        if herm_err > 1e-10 * f.camax().max(1.0) {
            return Err(Error::domain(format!(
                "filter matrix is not Hermitian (deviation {herm_err:e})"
            )));
        }
    }
    let roots: Vec<f64> = eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    let coefficients = DMatrix::from_fn(n, n, |m, k| {
        let i = match filter {
            Some(f) => f[(m, k)],
            None if m == k => Complex64::new(1.0, 0.0),
            None => Complex64::default(),
        };
        i * (roots[m] * roots[k])
    });
    CorrelationKernel::from_modes(modes_a, coefficients)?.normalized()
}

/// rms width from the diagonal, rms wave-number width from the zero-padded
/// discrete Fourier transform of the mode expansion, and their product.
pub fn coherence_summary(kernel: &CorrelationKernel) -> Result<CoherenceSummary> {
    let grid = &kernel.grid;
    let diag = kernel.diagonal();
    let sigma = central_rms(&grid.points(), &diag)
        .ok_or_else(|| Error::domain("correlation kernel has zero trace"))?;

    let n_pad = (FFT_PADDING * grid.n_points).next_power_of_two();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_pad);
    let spectra: Vec<Vec<Complex64>> = kernel
        .basis
        .iter()
        .map(|mode| {
            let mut buf = vec![Complex64::default(); n_pad];
            buf[..mode.len()].copy_from_slice(mode);
            fft.process(&mut buf);
            buf
        })
        .collect();
    let spectral_diag = quadratic_diagonal(&kernel.coefficients, &spectra, n_pad);
    let dq = 2.0 * PI / (n_pad as f64 * grid.dx);
    let q: Vec<f64> = (0..n_pad)
        .map(|k| {
            let signed = if k < n_pad / 2 { k as f64 } else { k as f64 - n_pad as f64 };
            signed * dq
        })
        .collect();
    let w = central_rms(&q, &spectral_diag)
        .ok_or_else(|| Error::domain("correlation kernel has zero spectral weight"))?;
    Ok(CoherenceSummary {
        sigma,
        w,
        gamma: sigma * w,
    })
}

fn central_rms(coord: &[f64], weight: &[f64]) -> Option<f64> {
    let total: f64 = weight.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mean = coord.iter().zip(weight).map(|(x, p)| x * p).sum::<f64>() / total;
    let var = coord
        .iter()
        .zip(weight)
        .map(|(x, p)| (x - mean).powi(2) * p)
        .sum::<f64>()
        / total;
    Some(var.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hermite_gauss0(grid: &SpatialGrid, s: f64) -> Vec<f64> {
        let norm = (PI.sqrt() * s).sqrt();
        grid.points()
            .iter()
            .map(|x| (-x * x / (2.0 * s * s)).exp() / norm)
            .collect()
    }

    #[test]
    fn pure_gaussian_is_minimum_uncertainty() {
        for s in [0.3, 1.0, 2.5] {
            let g = SpatialGrid::centered(12.0 * s, 600).unwrap();
            let k = CorrelationKernel::pure(g, &hermite_gauss0(&g, s)).unwrap();
            let c = coherence_summary(&k).unwrap();
            assert!((c.gamma - 0.5).abs() < 0.01, "gamma {}", c.gamma);
            assert!((c.sigma - s / 2f64.sqrt()).abs() < 1e-6 * s.max(1.0));
            assert_eq!(c.gamma, c.sigma * c.w);
        }
    }

    #[test]
    fn matrix_and_mode_routes_agree() {
        let g = SpatialGrid::centered(6.0, 121).unwrap();
        let f = hermite_gauss0(&g, 0.8);
        let k = CorrelationKernel::pure(g, &f).unwrap();
        let from_matrix = CorrelationKernel::from_matrix(g, k.values()).unwrap();
        let a = coherence_summary(&k).unwrap();
        let b = coherence_summary(&from_matrix).unwrap();
        assert!((a.sigma - b.sigma).abs() < 1e-10);
        assert!((a.w - b.w).abs() < 1e-8);
    }

    #[test]
    fn scale_invariance() {
        let g = SpatialGrid::centered(6.0, 121).unwrap();
        let k = CorrelationKernel::pure(g, &hermite_gauss0(&g, 0.8)).unwrap();
        let mut scaled = k.clone();
        scaled.coefficients *= Complex64::new(17.5, 0.0);
        let a = coherence_summary(&k).unwrap();
        let b = coherence_summary(&scaled).unwrap();
        assert!((a.gamma - b.gamma).abs() < 1e-12);
    }

    #[test]
    fn zero_kernel_is_rejected() {
        let g = SpatialGrid::centered(6.0, 64).unwrap();
        let k = CorrelationKernel::pure(g, &vec![0.0; 64]).unwrap();
        assert!(coherence_summary(&k).is_err());
        assert!(k.normalized().is_err());
    }

    #[test]
    fn filter_dimension_mismatch() {
        let g = SpatialGrid::centered(6.0, 64).unwrap();
        let modes = SampledModes::new(g, vec![hermite_gauss0(&g, 1.0)]).unwrap();
        let bad = DMatrix::identity(2, 2);
        assert!(assemble_g1(&[1.0], &modes, Some(&bad)).is_err());
        assert!(assemble_g1(&[1.0, 0.0], &modes, None).is_err());
    }
}
