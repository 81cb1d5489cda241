//! Scenario orchestration and result files.
//!
//! Layout of an output directory:
//! - `<variant>.csv`: one row per sample, `time [s]` then one column per
//!   signal, units in brackets.
//! - `sweep_<parameter>[_system].csv`: one row per grid value.
//! - `metrics.txt`: sorted `key = value` lines.
//! - `FAILED`: present only when something aborted; one line per failure.

use super::manifest::{CompareEntry, RunManifest, SweepEntry, SweepMode};
use super::report::model_summary;
use super::{parse_case_str, CaseError, CaseFile};
use crate::analysis::{
    error_index, frequency_metrics, run_sweep, EquivalentBase, ErrorOptions, Series, SweepBase, SweepTable, SystemBase,
};
use crate::exec;
use crate::linalg::ComplexValue;
use crate::sim::{simulate_variants, Disturbance, ModelVariant, PowerSystem, ScenarioResult, SimError};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const FAILURE_MARKER: &str = "FAILED";
pub const METRICS_FILE: &str = "metrics.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
    pub failures: Vec<String>,
    pub metrics: BTreeMap<String, String>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            1
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CaseError {
    CaseError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Everything a run needs once the case is loaded.
struct Prepared {
    case: CaseFile,
    sys: PowerSystem,
    disturbance: Disturbance,
}

fn prepare(m: &RunManifest) -> Result<Prepared, CaseError> {
    m.validate()?;
    let parsed = parse_case_str(&m.case.text()?)?;
    let case = parsed.case;
    let bus = *case.bus_index().get(&m.disturbance.bus).ok_or(CaseError::UnknownBus {
        field: "disturbance.bus".into(),
        bus: m.disturbance.bus,
    })?;
    let disturbance = Disturbance {
        bus,
        delta_admittance: ComplexValue::new(m.disturbance.conductance_pu, m.disturbance.susceptance_pu),
        time_s: m.disturbance.time_s,
    };
    let sys = case.initialize()?;
    Ok(Prepared { case, sys, disturbance })
}

fn prepare_dir(dir: &Path) -> Result<(), CaseError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let marker = dir.join(FAILURE_MARKER);
    if marker.exists() {
        std::fs::remove_file(&marker).map_err(|e| io_err(&marker, e))?;
    }
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// CSV header: `time [s]` then `name [unit]` per signal.
pub fn csv_header(r: &ScenarioResult) -> Vec<String> {
    std::iter::once("time [s]".to_string()).chain(r.signals.iter().map(|s| format!("{} [{}]", s.name, s.unit))).collect()
}

pub fn write_scenario_csv(path: &Path, r: &ScenarioResult) -> Result<(), CaseError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(csv_header(r)).map_err(|e| io_err(path, e))?;
    let mut row = Vec::with_capacity(r.signals.len() + 1);
    for (k, t) in r.time.iter().enumerate() {
        row.clear();
        row.push(num(*t));
        row.extend(r.values.iter().map(|col| num(col[k])));
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_sweep_csv(path: &Path, table: &SweepTable) -> Result<(), CaseError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let mut header = vec![table.parameter.path().to_string()];
    header.extend(table.quantities.iter().map(|q| q.name().to_string()));
    header.push("error".into());
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for r in &table.rows {
        let mut row = vec![num(r.value)];
        row.extend(r.values.iter().map(|v| v.map_or(String::new(), num)));
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_metrics(path: &Path, metrics: &BTreeMap<String, String>) -> Result<(), CaseError> {
    let mut s = String::new();
    for (k, v) in metrics {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(v);
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| io_err(path, e))
}

fn write_failures(dir: &Path, failures: &[String]) -> Result<PathBuf, CaseError> {
    let path = dir.join(FAILURE_MARKER);
    let mut s = failures.join("\n");
    s.push('\n');
    std::fs::write(&path, s).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn common_metrics(m: &RunManifest, p: &Prepared, metrics: &mut BTreeMap<String, String>) -> Result<(), CaseError> {
    metrics.insert("case.name".into(), p.case.system.name.clone());
    if let Some(seed) = m.seed {
        metrics.insert("seed".into(), seed.to_string());
    }
    let names: Vec<String> = p.case.gfls.iter().map(|g| g.name.clone()).collect();
    for (k, v) in model_summary(&p.sys, &names)?.key_values() {
        metrics.insert(k, num(v));
    }
    Ok(())
}

/// Signals compared between two runs: COI frequency and converter powers.
fn compared_signals(a: &ScenarioResult, b: &ScenarioResult) -> Vec<String> {
    std::iter::once("omega_coi".to_string())
        .chain(a.signals.iter().map(|s| s.name.clone()).filter(|n| n.starts_with("p_f") && n.ends_with("_ele")))
        .filter(|n| a.index_of(n).is_some() && b.index_of(n).is_some())
        .collect()
}

fn comparison_pairs(variants: &[ModelVariant], reference: Option<ModelVariant>) -> Vec<(ModelVariant, ModelVariant)> {
    match reference {
        Some(r) => variants.iter().copied().filter(|&v| v != r).map(|v| (v, r)).collect(),
        None => {
            let mut out = Vec::new();
            for (i, &a) in variants.iter().enumerate() {
                for &b in &variants[i + 1..] {
                    out.push((a, b));
                }
            }
            out
        }
    }
}

fn compare_metrics(
    results: &[(ModelVariant, Result<ScenarioResult, SimError>)],
    c: &CompareEntry,
    metrics: &mut BTreeMap<String, String>,
) {
    let ok: Vec<(ModelVariant, &ScenarioResult)> =
        results.iter().filter_map(|(v, r)| r.as_ref().ok().map(|r| (*v, r))).collect();
    let variants: Vec<ModelVariant> = ok.iter().map(|(v, _)| *v).collect();
    let get = |v: ModelVariant| ok.iter().find(|(w, _)| *w == v).map(|(_, r)| *r);
    let opts = ErrorOptions { signed: c.signed, align_start: c.align_start };
    for (test, reference) in comparison_pairs(&variants, c.reference) {
        let (Some(a), Some(b)) = (get(test), get(reference)) else { continue };
        for name in compared_signals(a, b) {
            let key = format!("error_index.{test}_vs_{reference}.{name}_pct");
            let sa = Series::new(&name, &a.time, a.signal(&name).expect("listed"));
            let sb = Series::new(&name, &b.time, b.signal(&name).expect("listed"));
            let value = match error_index(sa, sb, c.window_s, opts) {
                Ok(e) => num(e.value_pct),
                Err(e) => format!("n/a ({e})"),
            };
            metrics.insert(key, value);
        }
    }
}

fn sweep_file_name(s: &SweepEntry) -> String {
    let base = s.spec.parameter.path().replace('.', "_");
    match s.mode {
        SweepMode::Equivalent => format!("sweep_{base}.csv"),
        SweepMode::System => format!("sweep_{base}_system.csv"),
    }
}

fn sweep_base(m: &RunManifest, p: &Prepared, s: &SweepEntry) -> Result<SweepBase, CaseError> {
    let gfl = match &s.gfl {
        Some(name) => p.case.gfl_index(name).ok_or_else(|| CaseError::Invalid {
            field: "sweep.gfl".into(),
            line: 0,
            message: format!("case has no converter named {name:?}"),
        })?,
        None if p.case.gfls.is_empty() => {
            return Err(CaseError::Invalid { field: "sweep".into(), line: 0, message: "case has no converter to sweep".into() })
        }
        None => 0,
    };
    Ok(match s.mode {
        SweepMode::Equivalent => {
            let u = &p.sys.gfls[gfl];
            let rated = u.params.rated_power;
            let spec = &p.case.gfls[gfl];
            SweepBase::Equivalent(EquivalentBase {
                params: u.params,
                p: spec.p_setpoint_pu / rated,
                q: spec.q_setpoint_pu / rated,
                u: p.sys.bus_voltages[u.bus].norm(),
                omega0: p.sys.omega0(),
            })
        }
        SweepMode::System => SweepBase::System(Box::new(SystemBase {
            spec: p.case.to_system_spec()?,
            gfl,
            disturbance: p.disturbance,
            config: m.sim,
        })),
    })
}

fn run_sweeps_into(
    m: &RunManifest,
    p: &Prepared,
    report: &mut RunReport,
) -> Result<(), CaseError> {
    let mut names = Vec::new();
    for s in &m.sweeps {
        let file = sweep_file_name(s);
        if names.contains(&file) {
            return Err(CaseError::Invalid {
                field: "sweep".into(),
                line: 0,
                message: format!("two sweeps write {file}"),
            });
        }
        names.push(file);
    }
    for (s, file) in m.sweeps.iter().zip(names) {
        let base = sweep_base(m, p, s)?;
        let table = run_sweep(&s.spec, &base)?;
        let path = m.output_dir.join(&file);
        write_sweep_csv(&path, &table)?;
        report.artifacts.push(path);
        let prefix = format!("sweep.{}{}", s.spec.parameter.path(), if s.mode == SweepMode::System { ".system" } else { "" });
        for (q, t) in table.quantities.iter().zip(&table.trends) {
            report.metrics.insert(format!("{prefix}.{}.trend", q.name()), format!("{t:?}").to_lowercase());
        }
        for r in table.rows.iter().filter(|r| !r.is_valid()) {
            report.failures.push(format!("{prefix} at {}: {}", r.value, r.error.as_deref().unwrap_or("")));
        }
    }
    Ok(())
}

fn finish(mut report: RunReport) -> Result<RunReport, CaseError> {
    let path = report.output_dir.join(METRICS_FILE);
    write_metrics(&path, &report.metrics)?;
    report.artifacts.push(path);
    if !report.failures.is_empty() {
        let marker = write_failures(&report.output_dir, &report.failures)?;
        report.artifacts.push(marker);
    }
    Ok(report)
}

/// Simulates every requested variant, writes one CSV each, the metrics file
/// and any sweeps. Aborted simulations are reported in `failures` and in
/// the marker file; the other artifacts are still written.
pub fn run(m: &RunManifest) -> Result<RunReport, CaseError> {
    if m.variants.is_empty() {
        return Err(CaseError::Invalid { field: "variants".into(), line: 0, message: "at least one model variant is needed".into() });
    }
    let p = prepare(m)?;
    prepare_dir(&m.output_dir)?;
    let mut report =
        RunReport { output_dir: m.output_dir.clone(), artifacts: vec![], failures: vec![], metrics: BTreeMap::new() };
    common_metrics(m, &p, &mut report.metrics)?;

    let results = simulate_variants(&p.sys, &m.variants, Some(&p.disturbance), &m.sim, m.rotor);
    // one file per scenario, written independently
    let written = exec::map(&results, |(v, r)| match r {
        Ok(r) => {
            let path = m.output_dir.join(format!("{v}.csv"));
            write_scenario_csv(&path, r).map(|_| Some(path))
        }
        Err(_) => Ok(None),
    });
    for w in written {
        if let Some(path) = w? {
            report.artifacts.push(path);
        }
    }

    for (v, r) in &results {
        match r {
            Ok(r) => {
                report.metrics.insert(format!("{v}.status"), "ok".into());
                let w = r.signal("omega_coi").expect("every variant reports omega_coi");
                match frequency_metrics(&r.time, w, r.disturbance_index) {
                    Ok(fm) => {
                        report.metrics.insert(format!("{v}.omega_coi.max_rocof_pu_per_s"), num(fm.max_rocof));
                        report.metrics.insert(format!("{v}.omega_coi.nadir_pu"), num(fm.nadir));
                        report.metrics.insert(format!("{v}.omega_coi.nadir_time_s"), num(fm.nadir_time_s));
                        report.metrics.insert(format!("{v}.omega_coi.steady_state_pu"), num(fm.steady_state));
                    }
                    Err(e) => report.failures.push(format!("{v}: metrics: {e}")),
                }
            }
            Err(e) => {
                report.metrics.insert(format!("{v}.status"), "failed".into());
                report.failures.push(format!("{v}: {e}"));
            }
        }
    }
    if let Some(c) = &m.compare {
        compare_metrics(&results, c, &mut report.metrics);
    }
    if let Err(e) = run_sweeps_into(m, &p, &mut report) {
        report.failures.push(format!("sweep: {e}"));
    }
    finish(report)
}

/// Runs only the sweeps of a manifest.
pub fn run_sweeps(m: &RunManifest) -> Result<RunReport, CaseError> {
    if m.sweeps.is_empty() {
        return Err(CaseError::Invalid { field: "sweep".into(), line: 0, message: "manifest has no sweeps".into() });
    }
    let p = prepare(m)?;
    prepare_dir(&m.output_dir)?;
    let mut report =
        RunReport { output_dir: m.output_dir.clone(), artifacts: vec![], failures: vec![], metrics: BTreeMap::new() };
    common_metrics(m, &p, &mut report.metrics)?;
    if let Err(e) = run_sweeps_into(m, &p, &mut report) {
        report.failures.push(format!("sweep: {e}"));
    }
    finish(report)
}
