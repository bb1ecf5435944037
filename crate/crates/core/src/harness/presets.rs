use log::info;

use super::config::ExperimentConfig;
use super::output::{unix_now, Cell, Manifest, ResultSet, Table};
use super::Preset;
use crate::biphoton::{entanglement_entropy, schmidt_number, SchmidtDecomposition};
use crate::error::{Error, Result};
use crate::herald::{herald_photon, HeraldedPhoton, ZPolicy};
use crate::modesolver::{select_tsw_family, slab_mode_shapes, SlabSpec};
use crate::transport::{ensemble_run_many, EnsembleSpec, PhotonInput};

/// Columns of every localization table.
pub const LOCALIZATION_COLUMNS: [&str; 8] = [
    "preset",
    "gamma0",
    "tsw_modes",
    "delta",
    "z_um",
    "mean_ratio",
    "stderr",
    "realizations",
];

const FIG1_GAMMAS: [f64; 3] = [0.5, 1.5, 3.0];
const FIG1_PROFILE_MODES: usize = 15;
const FIG3_GAMMAS: [f64; 3] = [0.5, 1.5, 3.0];
const FIG3_MAX_WIDTH_UM: f64 = 12.0;
/// Core widths are sampled every 1/20 um.
const FIG3_WIDTHS_PER_UM: f64 = 20.0;
const FIG4_GAMMAS: [f64; 3] = [0.5, 1.0, 3.0];
const FIG5_GAMMAS: [f64; 3] = [0.5, 1.5, 3.0];

/// Runs one figure preset (or the configured custom experiment).
pub fn run_preset(preset: Preset, config: &ExperimentConfig) -> Result<ResultSet> {
    config.validate()?;
    let mut manifest = Manifest::new(preset, config);
    let tag = preset.to_string();
    let tables = match preset {
        Preset::Fig1 => fig1(config, &tag),
        Preset::Fig3 => fig3(config, &tag),
        Preset::Fig4 => fig4(config, &tag),
        Preset::Fig5 => fig5(config, &tag),
        Preset::Custom => custom(config, &tag),
    }
    .map_err(|e| e.context(format!("preset {tag}")))?;
    manifest.finished_unix = unix_now();
    Ok(ResultSet { manifest, tables })
}

fn schmidt_for(config: &ExperimentConfig, gamma0: f64) -> Result<SchmidtDecomposition> {
    config
        .schmidt(gamma0)
        .map_err(|e| e.context(format!("Schmidt decomposition for gamma0 = {gamma0}")))
}

fn family(config: &ExperimentConfig) -> Result<Vec<SlabSpec>> {
    select_tsw_family(&config.tsw.mode_counts, &config.slab_template()?)
}

fn herald(
    schmidt: &SchmidtDecomposition,
    slab: &SlabSpec,
    policy: &ZPolicy,
    gamma0: f64,
) -> Result<HeraldedPhoton> {
    herald_photon(schmidt, slab, policy).map_err(|e| {
        e.context(format!(
            "heralding gamma0 = {gamma0} through a {:.4} um slab",
            slab.core_width
        ))
    })
}

fn spectrum_tables(
    config: &ExperimentConfig,
    tag: &str,
    gammas: &[f64],
    prefix: &str,
) -> Result<Vec<Table>> {
    let mut spectrum = Table::new(&format!("{prefix}_spectrum"), &["preset", "gamma0", "mode", "lambda"]);
    let mut summary = Table::new(
        &format!("{prefix}_summary"),
        &["preset", "gamma0", "modes", "truncation_residual", "schmidt_number", "entropy_bits"],
    );
    let mut profiles = Table::new(
        &format!("{prefix}_modes"),
        &["preset", "gamma0", "mode", "x_um", "f", "g"],
    );
    for &g in gammas {
        let s = schmidt_for(config, g)?;
        let lambda = s.normalized_eigenvalues();
        for (j, l) in lambda.iter().enumerate() {
            spectrum.push(vec![tag.into(), g.into(), (j + 1).into(), (*l).into()]);
        }
        summary.push(vec![
            tag.into(),
            g.into(),
            s.len().into(),
            s.truncation_residual.into(),
            schmidt_number(&lambda)?.into(),
            entanglement_entropy(&lambda)?.into(),
        ]);
        let xs = s.modes_a.grid.points();
        for j in 0..s.len().min(FIG1_PROFILE_MODES) {
            for (k, x) in xs.iter().enumerate() {
                profiles.push(vec![
                    tag.into(),
                    g.into(),
                    (j + 1).into(),
                    (*x).into(),
                    s.modes_a.profiles[j][k].into(),
                    s.modes_b.profiles[j][k].into(),
                ]);
            }
        }
    }
    Ok(vec![spectrum, summary, profiles])
}

fn fig1(config: &ExperimentConfig, tag: &str) -> Result<Vec<Table>> {
    spectrum_tables(config, tag, &FIG1_GAMMAS, "fig1")
}

fn fig3(config: &ExperimentConfig, tag: &str) -> Result<Vec<Table>> {
    let template = config.slab_template()?;
    let mut counts = Table::new("fig3_mode_count", &["preset", "core_width_um", "guided_modes"]);
    let steps = (FIG3_MAX_WIDTH_UM * FIG3_WIDTHS_PER_UM).round() as usize;
    for k in 1..=steps {
        let width = k as f64 / FIG3_WIDTHS_PER_UM;
        let modes = slab_mode_shapes(&template.with_width(width)?)?.len();
        counts.push(vec![tag.into(), width.into(), modes.into()]);
    }

    // Always scan here, even when the configuration fixes Z.
    let policy = ZPolicy::Optimize {
        z_min: config.imaging.z_min,
        z_max: config.imaging.z_max,
        samples: config.imaging.z_samples,
    };
    let mut overlap = Table::new(
        "fig3_overlap",
        &["preset", "gamma0", "tsw_modes", "core_width_um", "z", "f"],
    );
    let mut optimum = Table::new(
        "fig3_optimum",
        &["preset", "gamma0", "tsw_modes", "core_width_um", "z_optimum", "f_optimum"],
    );
    let slabs = family(config)?;
    for &g in &FIG3_GAMMAS {
        let s = schmidt_for(config, g)?;
        for slab in &slabs {
            let photon = herald(&s, slab, &policy, g)?;
            let scan = photon.scan.as_ref().expect("optimizing policy records its scan");
            let m = photon.tsw_modes.len();
            for (z, f) in scan.z_values.iter().zip(&scan.f_values) {
                overlap.push(vec![tag.into(), g.into(), m.into(), slab.core_width.into(), (*z).into(), (*f).into()]);
            }
            optimum.push(vec![
                tag.into(),
                g.into(),
                m.into(),
                slab.core_width.into(),
                scan.z_optimum.into(),
                scan.f_optimum.into(),
            ]);
            info!("fig3: gamma0 = {g}, {m} modes, Z* = {:.4}", scan.z_optimum);
        }
    }
    Ok(vec![counts, overlap, optimum])
}

const COHERENCE_COLUMNS: [&str; 9] = [
    "preset",
    "gamma0",
    "tsw_modes",
    "core_width_um",
    "magnification",
    "herald_probability",
    "sigma_um",
    "w_per_um",
    "gamma",
];

fn coherence_rows(
    config: &ExperimentConfig,
    tag: &str,
    gammas: &[f64],
    table: &mut Table,
) -> Result<()> {
    let slabs = family(config)?;
    let policy = config.z_policy();
    for &g in gammas {
        let s = schmidt_for(config, g)?;
        for slab in &slabs {
            let photon = herald(&s, slab, &policy, g)?;
            let c = photon.coherence(&s)?;
            table.push(vec![
                tag.into(),
                g.into(),
                photon.tsw_modes.len().into(),
                slab.core_width.into(),
                photon.magnification.into(),
                photon.state.normalization.into(),
                c.sigma.into(),
                c.w.into(),
                c.gamma.into(),
            ]);
            info!("{tag}: gamma0 = {g}, {} modes, gamma = {:.4}", photon.tsw_modes.len(), c.gamma);
        }
    }
    Ok(())
}

fn fig4(config: &ExperimentConfig, tag: &str) -> Result<Vec<Table>> {
    let mut table = Table::new("fig4_coherence", &COHERENCE_COLUMNS);
    coherence_rows(config, tag, &FIG4_GAMMAS, &mut table)?;
    Ok(vec![table])
}

struct Labelled {
    gamma0: f64,
    tsw_modes: usize,
    input: PhotonInput,
}

fn heralded_inputs(config: &ExperimentConfig, gammas: &[f64]) -> Result<Vec<Labelled>> {
    let slabs = family(config)?;
    let policy = config.z_policy();
    let mut out = Vec::new();
    for &g in gammas {
        let s = schmidt_for(config, g)?;
        for slab in &slabs {
            let photon = herald(&s, slab, &policy, g)?;
            out.push(Labelled {
                gamma0: g,
                tsw_modes: photon.tsw_modes.len(),
                input: PhotonInput {
                    state: photon.state,
                    modes_a: s.modes_a.clone(),
                },
            });
        }
    }
    Ok(out)
}

fn localization_tables(
    config: &ExperimentConfig,
    tag: &str,
    gammas: &[f64],
    deltas: &[f64],
    prefix: &str,
) -> Result<Vec<Table>> {
    let inputs = heralded_inputs(config, gammas)?;
    let photons: Vec<PhotonInput> = inputs.iter().map(|l| l.input.clone()).collect();
    let mut curves = Table::new(&format!("{prefix}_localization"), &LOCALIZATION_COLUMNS);
    let mut capture = Table::new(
        &format!("{prefix}_capture"),
        &["preset", "gamma0", "tsw_modes", "delta", "captured_fraction"],
    );
    for &delta in deltas {
        let spec = EnsembleSpec {
            geometry: config.geometry(),
            delta,
            z_samples: config.z_samples(),
            realizations: config.run.realizations,
            master_seed: config.disorder.master_seed,
            averaging: config.run.averaging,
            workers: config.run.workers,
        };
        info!(
            "{tag}: delta = {delta}, {} realizations, {} inputs",
            spec.realizations,
            photons.len()
        );
        let results = ensemble_run_many(&photons, &spec)
            .map_err(|e| e.context(format!("ensemble at delta = {delta}")))?;
        for (label, r) in inputs.iter().zip(&results) {
            for (j, z) in r.z_samples.iter().enumerate() {
                curves.push(vec![
                    tag.into(),
                    label.gamma0.into(),
                    label.tsw_modes.into(),
                    delta.into(),
                    (*z).into(),
                    r.mean_ratio[j].into(),
                    r.stderr[j].into(),
                    r.realization_count.into(),
                ]);
            }
            capture.push(vec![
                tag.into(),
                label.gamma0.into(),
                label.tsw_modes.into(),
                delta.into(),
                r.captured_fraction.into(),
            ]);
        }
    }
    Ok(vec![curves, capture])
}

fn fig5(config: &ExperimentConfig, tag: &str) -> Result<Vec<Table>> {
    let delta = config.disorder.delta;
    let deltas: Vec<f64> = if delta == 0.0 { vec![0.0] } else { vec![0.0, delta] };
    localization_tables(config, tag, &FIG5_GAMMAS, &deltas, "fig5")
}

fn custom(config: &ExperimentConfig, tag: &str) -> Result<Vec<Table>> {
    let g = config.biphoton.gamma0;
    let mut tables = spectrum_tables(config, tag, &[g], "custom")?;
    let mut coherence = Table::new("custom_coherence", &COHERENCE_COLUMNS);
    coherence_rows(config, tag, &[g], &mut coherence)?;
    tables.push(coherence);
    tables.extend(localization_tables(config, tag, &[g], &[config.disorder.delta], "custom")?);
    Ok(tables)
}

/// Value of `column` in `row` as a float, for callers inspecting results.
pub fn cell_f64(table: &Table, row: usize, column: &str) -> Result<f64> {
    let idx = table
        .column(column)
        .ok_or_else(|| Error::domain(format!("table {} has no column {column}", table.name)))?;
    match &table.rows[row][idx] {
        Cell::Float(v) => Ok(*v),
        Cell::Int(v) => Ok(*v as f64),
        Cell::Text(t) => Err(Error::domain(format!("{column} holds text {t:?}"))),
    }
}
