//! Run manifests: which case, which models, what disturbance, where to write.

use super::{bundled_case, CaseError};
use crate::analysis::{SweepParameter, SweepSpec};
use crate::sim::{Integrator, ModelVariant, RotorConfig, SimConfig};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub enum CaseSource {
    Path(PathBuf),
    /// One of the cases shipped with the crate, written `bundled:<name>`.
    Bundled(String),
}

impl CaseSource {
    pub fn parse(s: &str, base_dir: &Path) -> CaseSource {
        match s.strip_prefix("bundled:") {
            Some(name) => CaseSource::Bundled(name.to_string()),
            None => CaseSource::Path(base_dir.join(s)),
        }
    }

    pub fn text(&self) -> Result<String, CaseError> {
        match self {
            CaseSource::Path(p) => {
                std::fs::read_to_string(p).map_err(|e| CaseError::Io { path: p.display().to_string(), message: e.to_string() })
            }
            CaseSource::Bundled(name) => bundled_case(name)
                .map(str::to_string)
                .ok_or_else(|| CaseError::Invalid { field: "case".into(), line: 0, message: format!("no bundled case {name:?}") }),
        }
    }
}

/// Load step given by bus id.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceEntry {
    pub bus: u32,
    pub conductance_pu: f64,
    #[serde(default)]
    pub susceptance_pu: f64,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareEntry {
    /// Signals of every other variant are compared against this one. Without
    /// it every pair is compared, the later variant acting as reference.
    pub reference: Option<ModelVariant>,
    pub signed: bool,
    pub align_start: bool,
    pub window_s: Option<(f64, f64)>,
}

impl Default for CompareEntry {
    fn default() -> Self {
        CompareEntry { reference: None, signed: false, align_start: true, window_s: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Converter alone at a fixed terminal voltage.
    #[default]
    Equivalent,
    /// Whole case re-solved and simulated with the COI model per grid value.
    System,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub spec: SweepSpec,
    pub mode: SweepMode,
    /// Name of the swept converter; the first one when absent.
    pub gfl: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub case: CaseSource,
    pub variants: Vec<ModelVariant>,
    pub disturbance: DisturbanceEntry,
    pub sim: SimConfig,
    pub rotor: RotorConfig,
    pub compare: Option<CompareEntry>,
    pub output_dir: PathBuf,
    pub sweeps: Vec<SweepEntry>,
    /// Reserved: every model is deterministic, the seed is only recorded.
    pub seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    case: String,
    #[serde(default)]
    variants: Vec<String>,
    disturbance: DisturbanceEntry,
    #[serde(default)]
    sim: RawSim,
    #[serde(default)]
    rotor: RawRotor,
    compare: Option<RawCompare>,
    output_dir: Option<String>,
    #[serde(default)]
    sweep: Vec<RawSweep>,
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSim {
    dt_s: Option<f64>,
    duration_s: Option<f64>,
    integrator: Option<Integrator>,
    abs_tol: Option<f64>,
    rel_tol: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawRotor {
    filter_reactance_pu: Option<f64>,
    filter_error_pct: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawCompare {
    reference: Option<String>,
    signed: Option<bool>,
    align_start: Option<bool>,
    window_s: Option<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    parameter: String,
    values: Vec<f64>,
    #[serde(default)]
    mode: SweepMode,
    gfl: Option<String>,
}

pub fn parse_variant(s: &str) -> Result<ModelVariant, CaseError> {
    ModelVariant::parse(s).ok_or_else(|| CaseError::Invalid {
        field: "variants".into(),
        line: 0,
        message: format!(
            "unknown model variant {s:?} (expected one of {})",
            ModelVariant::ALL.map(ModelVariant::name).join(", ")
        ),
    })
}

/// Comma separated list of variants.
pub fn parse_variant_list(s: &str) -> Result<Vec<ModelVariant>, CaseError> {
    s.split(',').filter(|v| !v.trim().is_empty()).map(parse_variant).collect()
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<RunManifest, CaseError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CaseError::Io { path: path.display().to_string(), message: e.to_string() })?;
        let dir = path.parent().unwrap_or(Path::new("."));
        RunManifest::parse_str(&text, dir)
    }

    /// Relative paths resolve against `base_dir`.
    pub fn parse_str(text: &str, base_dir: &Path) -> Result<RunManifest, CaseError> {
        let raw: RawManifest = toml::from_str(text).map_err(|e| CaseError::Syntax(e.to_string()))?;
        let d = SimConfig::default();
        let sim = SimConfig {
            dt_s: raw.sim.dt_s.unwrap_or(d.dt_s),
            duration_s: raw.sim.duration_s.unwrap_or(d.duration_s),
            integrator: raw.sim.integrator.unwrap_or(d.integrator),
            abs_tol: raw.sim.abs_tol.unwrap_or(d.abs_tol),
            rel_tol: raw.sim.rel_tol.unwrap_or(d.rel_tol),
        };
        let r = RotorConfig::default();
        let rotor = RotorConfig {
            filter_reactance: raw.rotor.filter_reactance_pu.unwrap_or(r.filter_reactance),
            filter_error_pct: raw.rotor.filter_error_pct.unwrap_or(r.filter_error_pct),
        };
        let compare = raw
            .compare
            .map(|c| {
                let d = CompareEntry::default();
                Ok::<_, CaseError>(CompareEntry {
                    reference: c.reference.as_deref().map(parse_variant).transpose()?,
                    signed: c.signed.unwrap_or(d.signed),
                    align_start: c.align_start.unwrap_or(d.align_start),
                    window_s: c.window_s.map(|[a, b]| (a, b)),
                })
            })
            .transpose()?;
        let sweeps = raw
            .sweep
            .into_iter()
            .enumerate()
            .map(|(k, s)| {
                let parameter = SweepParameter::parse(&s.parameter)
                    .map_err(|e| CaseError::Invalid { field: format!("sweep[{k}].parameter"), line: 0, message: e.to_string() })?;
                let spec = SweepSpec { parameter, values: s.values };
                spec.validate()
                    .map_err(|e| CaseError::Invalid { field: format!("sweep[{k}].values"), line: 0, message: e.to_string() })?;
                Ok(SweepEntry { spec, mode: s.mode, gfl: s.gfl })
            })
            .collect::<Result<Vec<_>, CaseError>>()?;
        let variants = raw.variants.iter().map(|v| parse_variant(v)).collect::<Result<Vec<_>, _>>()?;
        let m = RunManifest {
            case: CaseSource::parse(&raw.case, base_dir),
            variants,
            disturbance: raw.disturbance,
            sim,
            rotor,
            compare,
            output_dir: base_dir.join(raw.output_dir.as_deref().unwrap_or("out")),
            sweeps,
            seed: raw.seed,
        };
        Ok(m)
    }

    /// Checks that need no case data. `run` needs at least one variant,
    /// `sweep` at least one sweep.
    pub fn validate(&self) -> Result<(), CaseError> {
        self.sim
            .validate()
            .map_err(|e| CaseError::Invalid { field: "sim".into(), line: 0, message: e.to_string() })?;
        let mut seen = Vec::new();
        for v in &self.variants {
            if seen.contains(v) {
                return Err(CaseError::Invalid { field: "variants".into(), line: 0, message: format!("{v} listed twice") });
            }
            seen.push(*v);
        }
        let d = &self.disturbance;
        if !(d.time_s >= 0.0 && d.time_s.is_finite()) {
            return Err(CaseError::Invalid {
                field: "disturbance.time_s".into(),
                line: 0,
                message: format!("must be finite and >= 0, got {}", d.time_s),
            });
        }
        if !d.conductance_pu.is_finite() || !d.susceptance_pu.is_finite() {
            return Err(CaseError::Invalid { field: "disturbance".into(), line: 0, message: "admittance must be finite".into() });
        }
        if !(self.rotor.filter_reactance >= 0.0) {
            return Err(CaseError::Invalid {
                field: "rotor.filter_reactance_pu".into(),
                line: 0,
                message: "must be non-negative".into(),
            });
        }
        if let Some(CompareEntry { window_s: Some((a, b)), .. }) = self.compare {
            if !(b > a) {
                return Err(CaseError::Invalid { field: "compare.window_s".into(), line: 0, message: "end must exceed start".into() });
            }
        }
        Ok(())
    }
}
