use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{width_of, Propagator};
use crate::error::{Error, Result};
use crate::grid::SampledModes;
use crate::herald::{couple, magnify, HeraldedState};
use crate::modesolver::{build_wga, solve_modes_fd, DisorderSpec, WgaGeometry};

/// Captured fractions below this are reported with a warning.
const CAPTURE_WARNING: f64 = 0.9;

/// How realizations are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Mean over realizations of `w(z) / w(0)`.
    #[default]
    MeanOfRatios,
    /// `<w(z)> / <w(0)>`.
    RatioOfMeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub geometry: WgaGeometry,
    pub delta: f64,
    /// Propagation distances, um.
    pub z_samples: Vec<f64>,
    pub realizations: usize,
    pub master_seed: u64,
    pub averaging: Averaging,
    /// Worker threads; 0 uses the ambient pool.
    pub workers: usize,
}

/// A heralded photon A ready for injection: its state and Schmidt modes.
#[derive(Debug, Clone)]
pub struct PhotonInput {
    pub state: HeraldedState,
    pub modes_a: SampledModes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub z_samples: Vec<f64>,
    pub mean_ratio: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Mean absolute effective width at each distance, um.
    pub mean_width: Vec<f64>,
    pub realization_count: usize,
    pub master_seed: u64,
    /// Mean over realizations of the guided fraction of the injected photon.
    pub captured_fraction: f64,
}

/// Seed of realization `index`: a SplitMix64 finalizer over both inputs.
pub fn realization_seed(master_seed: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(master_seed.wrapping_add(0x9e37_79b9_7f4a_7c15)) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

pub fn ensemble_run(input: &PhotonInput, spec: &EnsembleSpec) -> Result<EnsembleResult> {
    Ok(ensemble_run_many(std::slice::from_ref(input), spec)?.remove(0))
}

/// Runs every input through the same disorder realizations.
///
/// Each realization solves the array once and propagates all inputs. Results
/// are gathered by realization index before reduction, so they do not depend
/// on the number of workers.
pub fn ensemble_run_many(inputs: &[PhotonInput], spec: &EnsembleSpec) -> Result<Vec<EnsembleResult>> {
    if spec.realizations == 0 {
        return Err(Error::domain("ensemble needs at least one realization"));
    }
    if inputs.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(z) = spec.z_samples.iter().find(|z| !(**z >= 0.0) || !z.is_finite()) {
        return Err(Error::domain(format!("propagation distance must be >= 0, got {z}")));
    }
    // The window depends only on the geometry, so inputs are resampled once.
    let window = build_wga(&spec.geometry, &DisorderSpec::ordered())?.grid;
    let injected = inputs
        .iter()
        .map(|p| magnify(&p.modes_a, 1.0, &window))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.context("injecting photon A into the array window"))?;

    let distinct = if spec.delta == 0.0 { 1 } else { spec.realizations };
    let solve = |r: usize| -> Result<Vec<Sample>> {
        let disorder = DisorderSpec {
            delta: spec.delta,
            seed: realization_seed(spec.master_seed, r as u64),
        };
        let run = || -> Result<Vec<Sample>> {
            let wga = solve_modes_fd(&build_wga(&spec.geometry, &disorder)?)?;
            inputs
                .iter()
                .zip(&injected)
                .map(|(input, modes)| {
                    let c = couple(modes, &wga.modes)?;
                    let prop = Propagator::new(&input.state, &c, &wga)?;
                    let reference = width_of(&prop.grid, &prop.intensity(0.0)?.values)?;
                    let widths = spec
                        .z_samples
                        .iter()
                        .map(|&z| width_of(&prop.grid, &prop.intensity(z)?.values))
                        .collect::<Result<Vec<f64>>>()?;
                    Ok(Sample {
                        reference,
                        widths,
                        captured: prop.captured_fraction(),
                    })
                })
                .collect()
        };
        run().map_err(|e| Error::Realization {
            index: r,
            source: Box::new(e),
        })
    };

    let gather = || -> Vec<Result<Vec<Sample>>> { (0..distinct).into_par_iter().map(solve).collect() };
    let outcomes = if spec.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .map_err(|e| Error::Numeric(format!("worker pool: {e}")))?
            .install(gather)
    } else {
        gather()
    };
    let per_realization = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let results: Vec<EnsembleResult> = (0..inputs.len())
        .map(|k| {
            let samples: Vec<&Sample> = per_realization.iter().map(|s| &s[k]).collect();
            reduce(&samples, spec)
        })
        .collect();
    for (k, r) in results.iter().enumerate() {
        if r.captured_fraction < CAPTURE_WARNING {
            log::warn!(
                "input {k}: only {:.3} of the heralded photon couples into guided modes",
                r.captured_fraction
            );
        }
    }
    Ok(results)
}

struct Sample {
    reference: f64,
    widths: Vec<f64>,
    captured: f64,
}

fn reduce(samples: &[&Sample], spec: &EnsembleSpec) -> EnsembleResult {
    let nz = spec.z_samples.len();
    let (mean_ratio, stderr) = if samples.len() == 1 {
        let s = samples[0];
        (s.widths.iter().map(|w| w / s.reference).collect(), vec![0.0; nz])
    } else {
        let r = samples.len() as f64;
        match spec.averaging {
            Averaging::MeanOfRatios => (0..nz)
                .map(|j| {
                    let ratios: Vec<f64> = samples.iter().map(|s| s.widths[j] / s.reference).collect();
                    mean_and_stderr(&ratios)
                })
                .unzip(),
            Averaging::RatioOfMeans => {
                let reference = samples.iter().map(|s| s.reference).sum::<f64>() / r;
                (0..nz)
                    .map(|j| {
                        let scaled: Vec<f64> = samples.iter().map(|s| s.widths[j] / reference).collect();
                        mean_and_stderr(&scaled)
                    })
                    .unzip()
            }
        }
    };
    EnsembleResult {
        z_samples: spec.z_samples.clone(),
        mean_ratio,
        stderr,
        mean_width: (0..nz)
            .map(|j| samples.iter().map(|s| s.widths[j]).sum::<f64>() / samples.len() as f64)
            .collect(),
        realization_count: spec.realizations,
        master_seed: spec.master_seed,
        captured_fraction: samples.iter().map(|s| s.captured).sum::<f64>() / samples.len() as f64,
    }
}

/// Sample mean and standard error (`sd / sqrt(n)`, unbiased variance).
fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
