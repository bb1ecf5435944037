use super::tridiag::SymTridiagonal;
use super::{GuidedModeSet, IndexProfile};
use crate::error::{Error, Result};
use crate::grid::{fix_sign, SampledModes};

/// Largest edge amplitude (relative to the peak) tolerated for a retained mode.
const MAX_EDGE_RATIO: f64 = 1e-6;

fn fd_matrix(profile: &IndexProfile) -> Result<SymTridiagonal> {
    let h = profile.grid.dx;
    let k0 = profile.k0;
    let inv_h2 = 1.0 / (h * h);
    let diag: Vec<f64> = profile
        .n_values
        .iter()
        .map(|n| -2.0 * inv_h2 + n * n * k0 * k0)
        .collect();
    SymTridiagonal::new(diag, vec![inv_h2; profile.grid.n_points - 1])
}

/// Guided TE modes of a sampled index profile.
///
/// Central differences with zero field just outside the window turn the
/// Helmholtz equation into a symmetric tridiagonal eigenproblem for
/// `kappa^2`; only eigenvalues with `kappa / k0` above the cladding index are
/// computed. An empty result is valid when nothing is guided.
///
/// When the profile remembers its layer stack, the eigenvalues are also
/// computed with half the grid step and Richardson-extrapolated,
/// `(4 kappa^2(h/2) - kappa^2(h)) / 3`, which removes the leading `h^2`
/// error. Profiles stay on the original grid.
pub fn solve_modes_fd(profile: &IndexProfile) -> Result<GuidedModeSet> {
    let matrix = fd_matrix(profile)?;
    let threshold = (profile.cladding_index * profile.k0).powi(2);
    let coarse = matrix.eigenvalues_above(threshold);
    let reported = match profile.refined() {
        Some(fine) => {
            let fine_eigenvalues = fd_matrix(&fine?)?.eigenvalues_above(threshold);
            coarse
                .iter()
                .zip(&fine_eigenvalues)
                .map(|(c, f)| (4.0 * f - c) / 3.0)
                .take_while(|l| *l > threshold)
                .collect()
        }
        None => coarse.clone(),
    };
    modes_from_eigenvalues(profile, &matrix, &coarse, reported)
}

/// Plain second-order solve with no grid refinement.
pub fn solve_modes_fd_unrefined(profile: &IndexProfile) -> Result<GuidedModeSet> {
    let matrix = fd_matrix(profile)?;
    let threshold = (profile.cladding_index * profile.k0).powi(2);
    let eigenvalues = matrix.eigenvalues_above(threshold);
    modes_from_eigenvalues(profile, &matrix, &eigenvalues, eigenvalues.clone())
}

fn modes_from_eigenvalues(
    profile: &IndexProfile,
    matrix: &SymTridiagonal,
    own: &[f64],
    eigenvalues: Vec<f64>,
) -> Result<GuidedModeSet> {
    let grid = profile.grid;
    let k0 = profile.k0;
    // Eigenvectors use the grid's own eigenvalues `own`, not extrapolated ones.
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(eigenvalues.len());
    for &lambda in &own[..eigenvalues.len()] {
        let v = matrix.eigenvector(lambda, &vectors)?;
        vectors.push(v);
    }

    let scale = grid.dx.sqrt();
    let mut profiles = Vec::with_capacity(vectors.len());
    let mut first_bad: Option<(usize, f64)> = None;
    for (mode, mut v) in vectors.into_iter().enumerate() {
        v.iter_mut().for_each(|x| *x /= scale);
        fix_sign(&mut v);
        let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let edge = v[0].abs().max(v[v.len() - 1].abs());
        let ratio = edge / peak;
        match first_bad {
            None if ratio > MAX_EDGE_RATIO => first_bad = Some((mode, ratio)),
            // A resolved mode after an unresolved one: the window is too small.
            Some((bad, bad_ratio)) if ratio <= MAX_EDGE_RATIO => {
                return Err(Error::Window {
                    mode: bad,
                    ratio: bad_ratio,
                })
            }
            _ => {}
        }
        profiles.push(v);
    }
    let mut eigenvalues = eigenvalues;
    if let Some((bad, ratio)) = first_bad {
        if bad == 0 {
            return Err(Error::Window { mode: 0, ratio });
        }
        // Trailing modes this close to cutoff reach the window edge; the
        // zero-field boundary no longer represents them.
        log::debug!(
            "dropping {} near-cutoff mode(s) from {}; mode {bad} edge ratio {ratio:.2e}",
            profiles.len() - bad,
            profiles.len()
        );
        profiles.truncate(bad);
        eigenvalues.truncate(bad);
    }

    let propagation_constants: Vec<f64> = eigenvalues.iter().map(|l| l.sqrt()).collect();
    Ok(GuidedModeSet {
        effective_indices: propagation_constants.iter().map(|b| b / k0).collect(),
        propagation_constants,
        modes: SampledModes::new(grid, profiles)?,
        k0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sign_changes;
    use crate::modesolver::{build_wga, DisorderSpec, Layer, LayerStack, WgaGeometry};

    #[test]
    fn ordered_array_modes_are_orthonormal_and_ordered() {
        let profile = build_wga(&WgaGeometry::default(), &DisorderSpec::ordered()).unwrap();
        let modes = solve_modes_fd(&profile).unwrap();
        assert!(!modes.is_empty());
        assert!(modes.modes.orthonormality_error() < 1e-8);
        let nmax = profile.max_index();
        for (j, n) in modes.effective_indices.iter().enumerate() {
            assert!(*n > profile.cladding_index && *n < nmax);
            assert_eq!(sign_changes(&modes.modes.profiles[j]), j);
        }
        assert!(modes.propagation_constants.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn unguided_profile_yields_empty_set() {
        let stack = LayerStack::new(
            vec![Layer {
                thickness: 1.0,
                index: 1.4,
            }],
            1.55,
            1.5,
        )
        .unwrap();
        let p = crate::modesolver::IndexProfile::from_stack(&stack, 0.05, 10.0).unwrap();
        assert!(solve_modes_fd(&p).unwrap().is_empty());
    }

    #[test]
    fn near_cutoff_modes_reaching_the_edge_are_dropped() {
        // Weak contrast: the highest mode barely decays inside the padding.
        let stack = LayerStack::new(
            vec![Layer {
                thickness: 6.0,
                index: 3.02,
            }],
            1.55,
            3.0,
        )
        .unwrap();
        let narrow = crate::modesolver::IndexProfile::from_stack(&stack, 0.02, 14.0).unwrap();
        let wide = crate::modesolver::IndexProfile::from_stack(&stack, 0.02, 40.0).unwrap();
        let a = solve_modes_fd(&narrow).unwrap();
        let b = solve_modes_fd(&wide).unwrap();
        assert!(a.len() < b.len(), "{} vs {}", a.len(), b.len());
        for (x, y) in a.propagation_constants.iter().zip(&b.propagation_constants) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn tight_window_is_reported() {
        let stack = LayerStack::new(
            vec![Layer {
                thickness: 1.0,
                index: 3.2,
            }],
            1.55,
            3.0,
        )
        .unwrap();
        let p = crate::modesolver::IndexProfile::from_stack(&stack, 0.02, 0.3).unwrap();
        assert!(matches!(solve_modes_fd(&p), Err(Error::Window { .. })));
    }
}
