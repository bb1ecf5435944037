use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use photloc_core::biphoton::{
    assemble_g1, biphoton_kernel, coherence_summary, derive_alpha_beta, schmidt_decompose,
    GaussianBiphotonSpec, SchmidtDecomposition,
};
use photloc_core::grid::{SampledModes, SpatialGrid};
use photloc_core::harness::ExperimentConfig;
use photloc_core::herald::{
    couple, herald_filter, herald_photon, magnify, overlap_factor, CouplingMatrix, ZPolicy,
};
use photloc_core::modesolver::{
    build_wga, select_tsw_family, solve_modes_fd, solve_slab_modes, DisorderSpec, GuidedModeSet,
    WgaGeometry,
};
use photloc_core::transport::{ensemble_run, Averaging, EnsembleSpec, PhotonInput, Propagator};
use proptest::prelude::*;
use std::sync::OnceLock;

fn decompose(gamma0: f64, epsilon: f64) -> SchmidtDecomposition {
    let spec = GaussianBiphotonSpec::new(1.0, gamma0).unwrap();
    schmidt_decompose(&spec, &spec.default_grid(), epsilon).unwrap()
}

fn ordered_wga() -> &'static GuidedModeSet {
    static WGA: OnceLock<GuidedModeSet> = OnceLock::new();
    WGA.get_or_init(|| {
        solve_modes_fd(&build_wga(&WgaGeometry::default(), &DisorderSpec::ordered()).unwrap()).unwrap()
    })
}

#[test]
fn alpha_beta_match_hand_derivation() {
    let (a, b) = derive_alpha_beta(1.0, 1.5).unwrap();
    assert!((a - 2.18566).abs() < 1e-5 && (b - 0.06434).abs() < 1e-5, "{a} {b}");
    let (a, b) = derive_alpha_beta(1.0, 3.0).unwrap();
    assert!((a + b - 9.0).abs() < 1e-12);
    assert!((a * b - 0.5625).abs() < 1e-12);

    // Moments of the sampled kernel: <x^2> = (alpha + beta) / (8 alpha beta) for
    // exp(-alpha (x+y)^2 - beta (x-y)^2) after squaring.
    let spec = GaussianBiphotonSpec::new(1.0, 3.0).unwrap();
    let grid = spec.default_grid();
    let psi = biphoton_kernel(&spec, &grid, &grid).unwrap();
    let xs = grid.points();
    let mut m2 = 0.0;
    let mut mixed = 0.0;
    for i in 0..xs.len() {
        for j in 0..xs.len() {
            let p = psi[(i, j)].powi(2) * grid.dx * grid.dx;
            m2 += xs[i] * xs[i] * p;
            mixed += xs[i] * xs[j] * p;
        }
    }
    // Sum: <(x+y)^2> = 1/(4 alpha), difference: <(x-y)^2> = 1/(4 beta).
    let plus = 2.0 * m2 + 2.0 * mixed;
    let minus = 2.0 * m2 - 2.0 * mixed;
    let (alpha, beta) = (1.0 / (4.0 * plus), 1.0 / (4.0 * minus));
    assert!((alpha + beta - 9.0).abs() < 1e-6, "{}", alpha + beta);
    assert!((alpha * beta - 0.5625).abs() < 1e-6, "{}", alpha * beta);
}

#[test]
fn coherence_round_trip_recovers_sigma_and_gamma() {
    for g in [0.5, 1.0, 1.5, 3.0] {
        let s = decompose(g, 1e-6);
        let c = coherence_summary(&assemble_g1(&s.normalized_eigenvalues(), &s.modes_a, None).unwrap()).unwrap();
        assert!((c.sigma - 1.0).abs() <= 0.01, "gamma0 {g}: sigma {}", c.sigma);
        assert!((c.gamma - g).abs() <= 0.01 * g, "gamma0 {g}: gamma {}", c.gamma);
    }
}

#[test]
fn identity_filter_diagonal_matches_closed_form_marginal() {
    for g in [1.0, 3.0] {
        let s = decompose(g, 1e-12);
        let kernel = assemble_g1(&s.normalized_eigenvalues(), &s.modes_a, None).unwrap();
        let diag = kernel.diagonal();
        // Marginal of photon A is a Gaussian with rms width sigma0 = 1.
        for (x, p) in s.modes_a.grid.points().iter().zip(&diag) {
            let exact = (-x * x / 2.0).exp() / (2.0 * PI).sqrt();
            assert!((p - exact).abs() < 1e-6, "gamma0 {g}, x {x}: {p} vs {exact}");
        }
    }
}

fn reconstruction_error(s: &SchmidtDecomposition) -> f64 {
    let spec = GaussianBiphotonSpec::new(1.0, 3.0).unwrap();
    let grid = s.modes_a.grid;
    let psi = biphoton_kernel(&spec, &grid, &grid).unwrap();
    (s.reconstruct() - &psi).norm() / psi.norm()
}

#[test]
fn kernel_reconstruction() {
    // The relative Frobenius error is the square root of the discarded weight,
    // so epsilon bounds its square.
    let loose = decompose(3.0, 1e-8);
    let e = reconstruction_error(&loose);
    assert!(e * e <= 1e-8 * 1.0001, "squared error {}", e * e);
    assert!((e * e - loose.truncation_residual).abs() < 1e-10);
    let tight = decompose(3.0, 1e-12);
    assert!(reconstruction_error(&tight) <= 1e-6);
}

#[test]
fn unfiltered_gamma_three_moments() {
    let s = decompose(3.0, 1e-6);
    let c = coherence_summary(&assemble_g1(&s.normalized_eigenvalues(), &s.modes_a, None).unwrap()).unwrap();
    assert!((c.sigma - 1.0).abs() <= 0.01);
    assert!((c.gamma - 3.0).abs() <= 0.03);
}

#[test]
fn fd_convergence_and_padding_independence() {
    let base = WgaGeometry::default();
    let coarse = ordered_wga();
    let fine = solve_modes_fd(
        &build_wga(
            &WgaGeometry {
                grid_step: base.grid_step / 2.0,
                ..base
            },
            &DisorderSpec::ordered(),
        )
        .unwrap(),
    )
    .unwrap();
    assert_eq!(coarse.len(), fine.len());
    for (a, b) in coarse.effective_indices.iter().zip(&fine.effective_indices) {
        assert!((a - b).abs() < 1e-5, "{a} vs {b}");
    }

    let wide = solve_modes_fd(
        &build_wga(
            &WgaGeometry {
                padding: 2.0 * base.padding,
                ..base
            },
            &DisorderSpec::ordered(),
        )
        .unwrap(),
    )
    .unwrap();
    assert_eq!(coarse.len(), wide.len());
    for (a, b) in coarse.propagation_constants.iter().zip(&wide.propagation_constants) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn disorder_keeps_mode_count_within_ten_percent() {
    let ordered = ordered_wga().len() as f64;
    for seed in [1, 2, 3] {
        let n = solve_modes_fd(
            &build_wga(&WgaGeometry::default(), &DisorderSpec { delta: 0.02, seed }).unwrap(),
        )
        .unwrap()
        .len() as f64;
        assert!((n - ordered).abs() <= 0.1 * ordered, "seed {seed}: {n} vs {ordered}");
    }
}

#[test]
fn separable_row_capture_golden_value() {
    let s = decompose(0.5, 1e-6);
    let wga = ordered_wga();
    let c = couple(&magnify(&s.modes_a, 1.0, &wga.modes.grid).unwrap(), &wga.modes).unwrap();
    assert_eq!(c.row_capture.len(), 1);
    assert!((c.row_capture[0] - 0.891614157).abs() < 1e-6, "{}", c.row_capture[0]);
}

#[test]
fn heralded_gamma_is_bounded_and_grows_with_kept_modes() {
    let config = ExperimentConfig::default();
    let family = select_tsw_family(&[1, 3, 5, 10, 15], &config.slab_template().unwrap()).unwrap();
    for g in [1.5, 3.0] {
        let s = decompose(g, 1e-6);
        let mut last = 0.0;
        for slab in &family {
            let p = herald_photon(&s, slab, &ZPolicy::default()).unwrap();
            let c = p.coherence(&s).unwrap();
            assert!(c.gamma >= 0.49 && c.gamma <= g + 0.01, "gamma0 {g}: {}", c.gamma);
            assert!(c.gamma >= last - 1e-9);
            last = c.gamma;
            let rho = p.state.density_matrix();
            let trace: f64 = (0..rho.nrows()).map(|i| rho[(i, i)].re).sum();
            assert!((trace - 1.0).abs() < 1e-10);
            assert!(p.state.density_eigenvalues().iter().all(|e| *e >= -1e-10));
        }
        if g == 3.0 {
            let c = herald_photon(&s, &family[4], &ZPolicy::default()).unwrap().coherence(&s).unwrap();
            assert!((c.gamma - 3.0).abs() <= 0.15 * 3.0 && (c.sigma - 1.0).abs() <= 0.15);
        }
    }
}

#[test]
fn ensemble_invariants() {
    let s = decompose(1.5, 1e-6);
    let slab = select_tsw_family(&[5], &ExperimentConfig::default().slab_template().unwrap()).unwrap()[0];
    let p = herald_photon(&s, &slab, &ZPolicy::default()).unwrap();
    let input = PhotonInput {
        state: p.state,
        modes_a: s.modes_a.clone(),
    };
    let mut spec = EnsembleSpec {
        geometry: WgaGeometry::default(),
        delta: 0.0,
        z_samples: vec![0.0, 100.0, 400.0],
        realizations: 3,
        master_seed: 5,
        averaging: Averaging::MeanOfRatios,
        workers: 1,
    };
    let ordered = ensemble_run(&input, &spec).unwrap();
    assert!((ordered.mean_ratio[0] - 1.0).abs() < 1e-10);
    assert!(ordered.stderr.iter().all(|e| *e == 0.0));
    assert_eq!(ordered.realization_count, 3);

    spec.delta = 0.02;
    let disordered = ensemble_run(&input, &spec).unwrap();
    assert!((disordered.mean_ratio[0] - 1.0).abs() < 1e-10);
    assert!(disordered.stderr[2] > 0.0);
    spec.averaging = Averaging::RatioOfMeans;
    let other = ensemble_run(&input, &spec).unwrap();
    assert!((other.mean_ratio[2] - disordered.mean_ratio[2]).abs() < 0.5 * disordered.mean_ratio[2]);
}

fn gaussian_mix(grid: &SpatialGrid, params: &[(f64, f64, f64)]) -> Vec<f64> {
    let mut f: Vec<f64> = grid
        .points()
        .iter()
        .map(|x| {
            params
                .iter()
                .map(|(a, c, w)| a * (-(x - c).powi(2) / (2.0 * w * w)).exp())
                .sum()
        })
        .collect();
    let norm = grid.norm_sq(&f).sqrt();
    f.iter_mut().for_each(|v| *v /= norm);
    f
}

fn random_sign_flips(modes: &SampledModes, flips: &[bool]) -> SampledModes {
    let profiles = modes
        .profiles
        .iter()
        .zip(flips.iter().cycle())
        .map(|(p, &flip)| if flip { p.iter().map(|v| -v).collect() } else { p.clone() })
        .collect();
    SampledModes::new(modes.grid, profiles).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bessel_bound_for_any_normalized_input(
        params in prop::collection::vec((-1.0f64..1.0, -40.0f64..40.0, 0.3f64..8.0), 1..4)
    ) {
        let wga = ordered_wga();
        let f = gaussian_mix(&wga.modes.grid, &params);
        prop_assume!(f.iter().all(|v| v.is_finite()));
        let source = SampledModes::new(wga.modes.grid, vec![f]).unwrap();
        let c = couple(&source, &wga.modes).unwrap();
        prop_assert!(c.row_capture[0] <= 1.0 + 1e-8);
    }

    #[test]
    fn overlap_factor_ignores_sign_flips(
        flips_a in prop::collection::vec(any::<bool>(), 6),
        flips_b in prop::collection::vec(any::<bool>(), 6),
        z in 0.3f64..3.0,
    ) {
        let s = decompose(1.5, 1e-6);
        let slab = select_tsw_family(&[5], &ExperimentConfig::default().slab_template().unwrap()).unwrap()[0];
        let grid = SpatialGrid::centered_with_step(30.0, 0.02).unwrap();
        let guided = solve_slab_modes(&slab, &grid).unwrap().modes;
        let f = overlap_factor(&s.modes_b, &guided, z).unwrap();
        let flipped = overlap_factor(
            &random_sign_flips(&s.modes_b, &flips_a),
            &random_sign_flips(&guided, &flips_b),
            z,
        )
        .unwrap();
        prop_assert!((f - flipped).abs() <= 1e-12 * f.max(1e-300));
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
    }

    #[test]
    fn propagated_intensity_is_nonnegative_with_constant_power(
        z in 0.0f64..2000.0,
        kept in 1usize..6,
        phase in 0.0f64..6.3,
    ) {
        let s = decompose(1.5, 1e-6);
        let wga = ordered_wga();
        let injected = magnify(&s.modes_a, 1.0, &wga.modes.grid).unwrap();
        let c = couple(&injected, &wga.modes).unwrap();
        // An arbitrary unitary-like coupling on the herald side: a phased identity.
        let n = s.len();
        let d = CouplingMatrix {
            entries: DMatrix::from_fn(n, n, |i, j| {
                if i == j { Complex64::from_polar(1.0, phase * i as f64) } else { Complex64::default() }
            }),
            row_capture: vec![1.0; n],
        };
        let state = herald_filter(&s, &d, kept.min(n)).unwrap();
        let prop = Propagator::new(&state, &c, wga).unwrap();
        let p0 = prop.intensity(0.0).unwrap();
        let pz = prop.intensity(z).unwrap();
        prop_assert!(pz.values.iter().all(|v| *v >= -1e-12));
        let total = |v: &[f64]| wga.modes.grid.integrate(v);
        prop_assert!((total(&pz.values) - total(&p0.values)).abs() < 1e-8);
    }
}
