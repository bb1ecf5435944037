//! The Gaussian two-photon amplitude, its Schmidt decomposition, and
//! first-order coherence measures of the single-photon reduced state.

mod coherence;
mod schmidt;

pub use coherence::{assemble_g1, coherence_summary, CoherenceSummary, CorrelationKernel};
pub use schmidt::{
    entanglement_entropy, schmidt_decompose, schmidt_decompose_on, schmidt_number,
    SchmidtDecomposition,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

/// Default number of samples per axis for Schmidt decompositions.
pub const DEFAULT_SCHMIDT_POINTS: usize = 512;
/// Default half window in units of `sigma0 * max(1, sqrt(gamma0))`.
pub const DEFAULT_WINDOW_SIGMAS: f64 = 8.0;
pub const DEFAULT_EPSILON_TRUNC: f64 = 1e-6;

/// Largest fraction of `|Psi|^2` allowed to fall outside the sampling window.
const MAX_WINDOW_LOSS: f64 = 1e-6;

/// Parameters of `Psi(x, y) ~ exp[-alpha (x + y)^2 - beta (x - y)^2]`.
///
/// `sigma0` is the rms width of photon A before heralding (um) and `gamma0`
/// its width-bandwidth product. `alpha >= beta` always.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBiphotonSpec {
    pub sigma0: f64,
    pub gamma0: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl GaussianBiphotonSpec {
    pub fn new(sigma0: f64, gamma0: f64) -> Result<Self> {
        let (alpha, beta) = derive_alpha_beta(sigma0, gamma0)?;
        Ok(Self {
            sigma0,
            gamma0,
            alpha,
            beta,
        })
    }

    /// Unnormalized two-photon amplitude.
    #[inline]
    pub fn amplitude(&self, x: f64, y: f64) -> f64 {
        let s = x + y;
        let d = x - y;
        (-self.alpha * s * s - self.beta * d * d).exp()
    }

    /// rms width of either photon's marginal, `sqrt((alpha + beta) / (16 alpha beta))`.
    pub fn marginal_sigma(&self) -> f64 {
        ((self.alpha + self.beta) / (16.0 * self.alpha * self.beta)).sqrt()
    }

    /// Schmidt number `(alpha + beta) / (2 sqrt(alpha beta))`, equal to `2 gamma0`.
    pub fn schmidt_number(&self) -> f64 {
        (self.alpha + self.beta) / (2.0 * (self.alpha * self.beta).sqrt())
    }

    /// `±window_sigmas * sigma0 * max(1, sqrt(gamma0))` sampled with `n_points`.
    pub fn grid(&self, window_sigmas: f64, n_points: usize) -> Result<SpatialGrid> {
        SpatialGrid::centered(
            window_sigmas * self.sigma0 * self.gamma0.sqrt().max(1.0),
            n_points,
        )
    }

    pub fn default_grid(&self) -> SpatialGrid {
        self.grid(DEFAULT_WINDOW_SIGMAS, DEFAULT_SCHMIDT_POINTS)
            .expect("validated spec yields a valid grid")
    }

    /// Probability mass of `|Psi|^2` outside `grid_x x grid_y`, from the
    /// Gaussian marginals (an upper bound for the joint loss).
    pub fn mass_outside(&self, grid_x: &SpatialGrid, grid_y: &SpatialGrid) -> f64 {
        let scale = self.marginal_sigma() * std::f64::consts::SQRT_2;
        let tails = |g: &SpatialGrid| {
            0.5 * erfc(-g.x_min / scale) + 0.5 * erfc(g.x_max() / scale)
        };
        tails(grid_x) + tails(grid_y)
    }
}

/// Correlation parameters `(alpha, beta)` from the beam width `sigma0` and
/// incoherence `gamma0`, taking the branch with `alpha >= beta`.
///
/// `alpha + beta = gamma0^2 / sigma0^2` and `alpha beta = gamma0^2 / (16 sigma0^4)`.
pub fn derive_alpha_beta(sigma0: f64, gamma0: f64) -> Result<(f64, f64)> {
    if !(sigma0 > 0.0) || !sigma0.is_finite() {
        return Err(Error::domain(format!("sigma0 must be positive, got {sigma0}")));
    }
    if !(gamma0 >= 0.5) || !gamma0.is_finite() {
        return Err(Error::domain(format!(
            "gamma0 must be at least 0.5, got {gamma0}"
        )));
    }
    let s2 = sigma0 * sigma0;
    let radical = gamma0 * (4.0 * gamma0 * gamma0 - 1.0).sqrt();
    let alpha = (2.0 * gamma0 * gamma0 + radical) / (4.0 * s2);
    // beta from the product identity avoids cancellation at large gamma0.
    let beta = gamma0 * gamma0 / (16.0 * s2 * s2 * alpha);
    Ok((alpha, beta))
}

/// Samples `Psi(x_i, y_j)` normalized to unit double quadrature of `|Psi|^2`.
pub fn biphoton_kernel(
    spec: &GaussianBiphotonSpec,
    grid_x: &SpatialGrid,
    grid_y: &SpatialGrid,
) -> Result<DMatrix<f64>> {
    let lost = spec.mass_outside(grid_x, grid_y);
    if lost > MAX_WINDOW_LOSS {
        return Err(Error::Truncation {
            what: "two-photon amplitude".into(),
            lost,
            limit: MAX_WINDOW_LOSS,
        });
    }
    let mut psi = DMatrix::from_fn(grid_x.n_points, grid_y.n_points, |i, j| {
        spec.amplitude(grid_x.x(i), grid_y.x(j))
    });
    let norm_sq = psi.norm_squared() * grid_x.dx * grid_y.dx;
    if !(norm_sq > 0.0) {
        return Err(Error::Numeric(
            "two-photon amplitude vanishes on the grid".into(),
        ));
    }
    psi /= norm_sq.sqrt();
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coherent_case_is_separable() {
        let (a, b) = derive_alpha_beta(1.0, 0.5).unwrap();
        assert!((a - 0.125).abs() < 1e-15);
        assert!((b - 0.125).abs() < 1e-15);
    }

    #[test]
    fn gamma_one_and_a_half() {
        let (a, b) = derive_alpha_beta(1.0, 1.5).unwrap();
        assert!((a - 2.18566).abs() < 1e-5, "{a}");
        assert!((b - 0.06434).abs() < 1e-5, "{b}");
        let spec = GaussianBiphotonSpec::new(1.0, 1.5).unwrap();
        assert!((spec.marginal_sigma() - 1.0).abs() < 1e-12);
        let gamma = (a + b) / (4.0 * (a * b).sqrt());
        assert!((gamma - 1.5).abs() < 1e-12);
    }

    #[test]
    fn sum_and_product_identities() {
        let (a, b) = derive_alpha_beta(1.0, 3.0).unwrap();
        assert!((a + b - 9.0).abs() < 1e-12);
        assert!((a * b - 0.5625).abs() < 1e-12);
        let (a, b) = derive_alpha_beta(2.5, 7.0).unwrap();
        assert!((a + b - 49.0 / 6.25).abs() < 1e-12);
        assert!((a * b - 49.0 / (16.0 * 2.5f64.powi(4))).abs() < 1e-14);
        assert!(a >= b);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(derive_alpha_beta(1.0, 0.49), Err(Error::Domain(_))));
        assert!(matches!(derive_alpha_beta(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(derive_alpha_beta(-1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn kernel_is_symmetric_and_normalized() {
        let spec = GaussianBiphotonSpec::new(1.0, 1.5).unwrap();
        let g = SpatialGrid::centered(8.0, 161).unwrap();
        let psi = biphoton_kernel(&spec, &g, &g).unwrap();
        assert!((psi.norm_squared() * g.dx * g.dx - 1.0).abs() < 1e-12);
        assert!((&psi - psi.transpose()).amax() < 1e-15);
    }

    #[test]
    fn separable_kernel_has_rank_one() {
        let spec = GaussianBiphotonSpec::new(1.0, 0.5).unwrap();
        let g = SpatialGrid::centered(8.0, 121).unwrap();
        let psi = biphoton_kernel(&spec, &g, &g).unwrap();
        let sv = psi.singular_values();
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        assert!(s[1] / s[0] < 1e-10, "second singular value {}", s[1] / s[0]);
    }

    #[test]
    fn narrow_window_is_reported() {
        let spec = GaussianBiphotonSpec::new(1.0, 1.0).unwrap();
        let g = SpatialGrid::centered(3.0, 64).unwrap();
        assert!(matches!(
            biphoton_kernel(&spec, &g, &g),
            Err(Error::Truncation { .. })
        ));
    }
}
