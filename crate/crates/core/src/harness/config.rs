use std::fmt;
use std::path::Path;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::biphoton::{GaussianBiphotonSpec, SchmidtDecomposition};
use crate::error::{Error, Result};
use crate::herald::ZPolicy;
use crate::modesolver::{SlabSpec, WgaGeometry, INDEX_AL030_1550, INDEX_AL080_1550};
use crate::transport::Averaging;

/// Complete description of an experiment; every section but `biphoton` has defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub biphoton: BiphotonConfig,
    #[serde(default)]
    pub schmidt: SchmidtConfig,
    #[serde(default)]
    pub wga: WgaConfig,
    #[serde(default)]
    pub disorder: DisorderConfig,
    #[serde(default)]
    pub tsw: TswConfig,
    #[serde(default)]
    pub imaging: ImagingConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiphotonConfig {
    /// Beam width of photon A before heralding, um.
    pub sigma0: f64,
    pub gamma0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchmidtConfig {
    pub epsilon_trunc: f64,
    pub points: usize,
    /// Half-width of the sampling window in units of `sigma0 * max(1, sqrt(gamma0))`.
    pub window_sigmas: f64,
}

impl Default for SchmidtConfig {
    fn default() -> Self {
        Self {
            epsilon_trunc: crate::biphoton::DEFAULT_EPSILON_TRUNC,
            points: crate::biphoton::DEFAULT_SCHMIDT_POINTS,
            window_sigmas: crate::biphoton::DEFAULT_WINDOW_SIGMAS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WgaConfig {
    pub layers: usize,
    pub thickness_um: f64,
    /// Al0.3Ga0.7As at the working wavelength.
    pub n_high: f64,
    /// Al0.8Ga0.2As at the working wavelength.
    pub n_low: f64,
    pub background_index: f64,
    pub wavelength_um: f64,
    pub grid_step_um: f64,
    pub padding_um: f64,
}

impl Default for WgaConfig {
    fn default() -> Self {
        let g = WgaGeometry::default();
        Self {
            layers: g.n_layers,
            thickness_um: g.layer_thickness,
            n_high: g.n_high,
            n_low: g.n_low,
            background_index: g.background_index,
            wavelength_um: g.wavelength,
            grid_step_um: g.grid_step,
            padding_um: g.padding,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisorderConfig {
    pub delta: f64,
    pub master_seed: u64,
}

impl Default for DisorderConfig {
    fn default() -> Self {
        Self {
            delta: 0.02,
            master_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TswConfig {
    pub n_core: f64,
    pub n_clad: f64,
    pub mode_counts: Vec<usize>,
}

impl Default for TswConfig {
    fn default() -> Self {
        Self {
            n_core: INDEX_AL030_1550,
            n_clad: INDEX_AL080_1550,
            mode_counts: vec![1, 3, 5, 10, 15],
        }
    }
}

/// `"optimize"` or a fixed magnification.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ZSetting {
    #[default]
    Optimize,
    Fixed(f64),
}

impl Serialize for ZSetting {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ZSetting::Optimize => s.serialize_str("optimize"),
            ZSetting::Fixed(z) => s.serialize_f64(*z),
        }
    }
}

impl<'de> Deserialize<'de> for ZSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct ZVisitor;
        impl Visitor<'_> for ZVisitor {
            type Value = ZSetting;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("\"optimize\" or a positive number")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<ZSetting, E> {
                if v == "optimize" {
                    Ok(ZSetting::Optimize)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<ZSetting, E> {
                Ok(ZSetting::Fixed(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<ZSetting, E> {
                Ok(ZSetting::Fixed(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<ZSetting, E> {
                Ok(ZSetting::Fixed(v as f64))
            }
        }
        d.deserialize_any(ZVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImagingConfig {
    pub z: ZSetting,
    pub z_min: f64,
    pub z_max: f64,
    pub z_samples: usize,
}

impl Default for ImagingConfig {
    fn default() -> Self {
        match ZPolicy::default() {
            ZPolicy::Optimize {
                z_min,
                z_max,
                samples,
            } => Self {
                z: ZSetting::Optimize,
                z_min,
                z_max,
                z_samples: samples,
            },
            ZPolicy::Fixed(_) => unreachable!("default policy optimizes"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub z_max_um: f64,
    pub z_samples: usize,
    pub realizations: usize,
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    pub averaging: Averaging,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            z_max_um: 500.0,
            z_samples: 101,
            realizations: 100,
            workers: 0,
            averaging: Averaging::MeanOfRatios,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    pub formats: Vec<TableFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "results".into(),
            formats: vec![TableFormat::Csv],
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            biphoton: BiphotonConfig {
                sigma0: 1.0,
                gamma0: 1.5,
            },
            schmidt: SchmidtConfig::default(),
            wga: WgaConfig::default(),
            disorder: DisorderConfig::default(),
            tsw: TswConfig::default(),
            imaging: ImagingConfig::default(),
            run: RunConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Command-line overrides; `None` keeps the configured value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub realizations: Option<usize>,
    pub workers: Option<usize>,
    pub out: Option<String>,
}

fn check(ok: bool, key: &str, message: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(key, message()))
    }
}

fn positive(value: f64, key: &str) -> Result<()> {
    check(value > 0.0 && value.is_finite(), key, || {
        format!("must be a positive number, got {value}")
    })
}

impl ExperimentConfig {
    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.disorder.master_seed = seed;
        }
        if let Some(r) = overrides.realizations {
            self.run.realizations = r;
        }
        if let Some(w) = overrides.workers {
            self.run.workers = w;
        }
        if let Some(out) = &overrides.out {
            self.output.directory = out.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive(self.biphoton.sigma0, "biphoton.sigma0")?;
        check(self.biphoton.gamma0 >= 0.5 && self.biphoton.gamma0.is_finite(), "biphoton.gamma0", || {
            format!("must be at least 0.5, got {}", self.biphoton.gamma0)
        })?;

        let s = &self.schmidt;
        check(s.epsilon_trunc > 0.0 && s.epsilon_trunc <= 0.01, "schmidt.epsilon_trunc", || {
            format!("must lie in (0, 0.01], got {}", s.epsilon_trunc)
        })?;
        check(s.points >= 16, "schmidt.points", || format!("needs at least 16 points, got {}", s.points))?;
        positive(s.window_sigmas, "schmidt.window_sigmas")?;

        let w = &self.wga;
        check(w.layers % 2 == 1, "wga.layers", || format!("must be odd, got {}", w.layers))?;
        positive(w.thickness_um, "wga.thickness_um")?;
        positive(w.wavelength_um, "wga.wavelength_um")?;
        positive(w.grid_step_um, "wga.grid_step_um")?;
        check(w.grid_step_um <= w.thickness_um / 8.0, "wga.grid_step_um", || {
            format!("must resolve each layer with 8 steps (<= {} um)", w.thickness_um / 8.0)
        })?;
        check(w.padding_um >= 0.0, "wga.padding_um", || format!("must be >= 0, got {}", w.padding_um))?;
        for (key, n) in [
            ("wga.n_high", w.n_high),
            ("wga.n_low", w.n_low),
            ("wga.background_index", w.background_index),
        ] {
            check(n > 1.0 && n.is_finite(), key, || format!("must exceed 1, got {n}"))?;
        }
        check(w.n_high > w.background_index, "wga.n_high", || {
            "must exceed wga.background_index so the array guides light".into()
        })?;

        let d = &self.disorder;
        check(d.delta >= 0.0 && d.delta.is_finite(), "disorder.delta", || {
            format!("must be >= 0, got {}", d.delta)
        })?;

        let t = &self.tsw;
        check(t.n_clad > 1.0, "tsw.n_clad", || format!("must exceed 1, got {}", t.n_clad))?;
        check(t.n_core > t.n_clad, "tsw.n_core", || {
            format!("must exceed tsw.n_clad ({}), got {}", t.n_clad, t.n_core)
        })?;
        check(!t.mode_counts.is_empty(), "tsw.mode_counts", || "must not be empty".into())?;
        check(t.mode_counts.iter().all(|m| *m >= 1), "tsw.mode_counts", || {
            "every count must be at least 1".into()
        })?;
        check(t.mode_counts.windows(2).all(|p| p[0] < p[1]), "tsw.mode_counts", || {
            "counts must be strictly increasing".into()
        })?;

        let i = &self.imaging;
        if let ZSetting::Fixed(z) = i.z {
            positive(z, "imaging.z")?;
        }
        positive(i.z_min, "imaging.z_min")?;
        check(i.z_min <= 0.25, "imaging.z_min", || format!("scan must start at or below 0.25, got {}", i.z_min))?;
        check(i.z_max >= 4.0 && i.z_max.is_finite(), "imaging.z_max", || {
            format!("scan must reach at least 4, got {}", i.z_max)
        })?;
        check(i.z_samples >= 32, "imaging.z_samples", || format!("needs at least 32 samples, got {}", i.z_samples))?;

        let r = &self.run;
        check(r.z_max_um >= 0.0 && r.z_max_um.is_finite(), "run.z_max_um", || {
            format!("must be >= 0, got {}", r.z_max_um)
        })?;
        check(r.z_samples >= 2, "run.z_samples", || format!("needs at least 2 samples, got {}", r.z_samples))?;
        check(r.realizations >= 1, "run.realizations", || "must be at least 1".into())?;

        let o = &self.output;
        check(!o.directory.is_empty(), "output.directory", || "must not be empty".into())?;
        check(!o.formats.is_empty(), "output.formats", || "must list at least one format".into())?;
        Ok(())
    }

    pub fn biphoton_spec(&self, gamma0: f64) -> Result<GaussianBiphotonSpec> {
        GaussianBiphotonSpec::new(self.biphoton.sigma0, gamma0)
    }

    pub fn schmidt(&self, gamma0: f64) -> Result<SchmidtDecomposition> {
        let spec = self.biphoton_spec(gamma0)?;
        let grid = spec.grid(self.schmidt.window_sigmas, self.schmidt.points)?;
        crate::biphoton::schmidt_decompose(&spec, &grid, self.schmidt.epsilon_trunc)
    }

    pub fn geometry(&self) -> WgaGeometry {
        WgaGeometry {
            n_layers: self.wga.layers,
            layer_thickness: self.wga.thickness_um,
            n_high: self.wga.n_high,
            n_low: self.wga.n_low,
            background_index: self.wga.background_index,
            wavelength: self.wga.wavelength_um,
            grid_step: self.wga.grid_step_um,
            padding: self.wga.padding_um,
        }
    }

    /// Slab with the configured indices; its width is set per family member.
    pub fn slab_template(&self) -> Result<SlabSpec> {
        SlabSpec::new(1.0, self.tsw.n_core, self.tsw.n_clad, self.wga.wavelength_um)
    }

    pub fn z_policy(&self) -> ZPolicy {
        match self.imaging.z {
            ZSetting::Fixed(z) => ZPolicy::Fixed(z),
            ZSetting::Optimize => ZPolicy::Optimize {
                z_min: self.imaging.z_min,
                z_max: self.imaging.z_max,
                samples: self.imaging.z_samples,
            },
        }
    }

    /// Uniform propagation distances from 0 to `run.z_max_um`.
    pub fn z_samples(&self) -> Vec<f64> {
        let n = self.run.z_samples;
        (0..n)
            .map(|k| self.run.z_max_um * k as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Parses and validates a TOML configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| parse_error(text, &e))?;
    let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.message().to_string();
        let key = match field_name(&message, "missing field") {
            Some(field) if path == "." => field,
            Some(field) => format!("{path}.{field}"),
            None => path,
        };
        Error::config(key, message)
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text).map_err(|e| e.context(format!("loading {}", path.display())))
}

/// Backquoted name after `prefix` in a serde message, e.g. ``missing field `x` ``.
fn field_name(message: &str, prefix: &str) -> Option<String> {
    let rest = message.strip_prefix(prefix)?;
    let start = rest.find('`')? + 1;
    let len = rest[start..].find('`')?;
    Some(rest[start..start + len].to_string())
}

/// Names the offending key of a syntax-level error (such as a duplicate key)
/// from the error span and the enclosing table header.
fn parse_error(text: &str, e: &toml::de::Error) -> Error {
    let message = e.message().trim().to_string();
    let key = e
        .span()
        .map(|span| {
            let token = text[span.clone()].trim().trim_matches('"');
            let line_start = text[..span.start].rfind('\n').map_or(0, |i| i + 1);
            let line_key = text[line_start..]
                .split(['=', '\n'])
                .next()
                .unwrap_or("")
                .trim();
            let key = if token.is_empty() || token.contains('\n') { line_key } else { token };
            let table = text[..span.start]
                .lines()
                .rev()
                .find_map(|l| {
                    let l = l.trim();
                    (l.starts_with('[') && l.ends_with(']'))
                        .then(|| l.trim_matches(['[', ']']).trim().to_string())
                });
            match table {
                Some(t) if !key.starts_with('[') => format!("{t}.{key}"),
                _ => key.trim_matches(['[', ']']).to_string(),
            }
        })
        .unwrap_or_else(|| "<document>".into());
    Error::config(key, message)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(text: &str) -> String {
        match parse_config(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_config("[biphoton]\nsigma0 = 1.0\ngamma0 = 3.0\n").unwrap();
        assert_eq!(c.biphoton.gamma0, 3.0);
        assert_eq!(c.wga, WgaConfig::default());
        assert_eq!(c.run.realizations, 100);
        assert_eq!(c.imaging.z, ZSetting::Optimize);
    }

    #[test]
    fn out_of_range_names_key() {
        assert_eq!(key_of("[biphoton]\nsigma0 = 1.0\ngamma0 = 0.3\n"), "biphoton.gamma0");
        assert_eq!(
            key_of("[biphoton]\nsigma0 = 1.0\ngamma0 = 1\n[wga]\nlayers = 100\n"),
            "wga.layers"
        );
    }

    #[test]
    fn unknown_and_missing_keys_are_named() {
        assert_eq!(key_of("[biphoton]\nsigma0 = 1.0\ngamma0 = 1\ncolour = 2\n"), "biphoton.colour");
        assert_eq!(key_of("[biphoton]\nsigma0 = 1.0\n"), "biphoton.gamma0");
        assert_eq!(key_of("[biphoton]\nsigma0 = 1.0\ngamma0 = 1\n[extra]\n"), "extra");
        assert_eq!(key_of("[wga]\nlayers = 101\n"), "biphoton");
        assert_eq!(
            key_of("[biphoton]\nsigma0 = 1.0\ngamma0 = \"x\"\n"),
            "biphoton.gamma0"
        );
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let key = key_of("[biphoton]\nsigma0 = 1.0\ngamma0 = 1.5\ngamma0 = 2.0\n");
        assert_eq!(key, "biphoton.gamma0");
    }

    #[test]
    fn magnification_setting() {
        let c = parse_config("[biphoton]\nsigma0 = 1\ngamma0 = 1\n[imaging]\nz = 1.25\n").unwrap();
        assert_eq!(c.z_policy(), ZPolicy::Fixed(1.25));
        assert_eq!(key_of("[biphoton]\nsigma0 = 1\ngamma0 = 1\n[imaging]\nz = \"best\"\n"), "imaging.z");
        assert_eq!(key_of("[biphoton]\nsigma0 = 1\ngamma0 = 1\n[imaging]\nz = -2\n"), "imaging.z");
    }

    #[test]
    fn round_trips_through_json_and_toml() {
        let mut c = ExperimentConfig::default();
        c.imaging.z = ZSetting::Fixed(0.7);
        c.run.averaging = Averaging::RatioOfMeans;
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), c);
        let text = toml::to_string(&c).unwrap();
        assert_eq!(parse_config(&text).unwrap(), c);
    }

    #[test]
    fn overrides_apply() {
        let mut c = ExperimentConfig::default();
        c.apply(&Overrides {
            seed: Some(9),
            realizations: Some(3),
            workers: Some(2),
            out: Some("x".into()),
        });
        assert_eq!((c.disorder.master_seed, c.run.realizations, c.run.workers), (9, 3, 2));
        assert_eq!(c.output.directory, "x");
    }
}
