use super::*;
use crate::sim::{system_fixtures::wecc9, ModelVariant};
use std::path::Path;

fn wecc_text() -> &'static str {
    bundled_case("wecc9_gfl").unwrap()
}

#[test]
fn bundled_wecc_round_trips() {
    let a = parse_case_str(wecc_text()).unwrap();
    assert!(a.defaulted.is_empty(), "{:?}", a.defaulted);
    let text = a.case.to_toml();
    let b = parse_case_str(&text).unwrap();
    assert_eq!(a.case, b.case);
    assert!(b.defaulted.is_empty());
    // serializing again gives the same text
    assert_eq!(text, b.case.to_toml());
}

#[test]
fn bundled_wecc_matches_in_code_fixture() {
    let c = parse_case_str(wecc_text()).unwrap().case;
    assert_eq!(c.to_system_spec().unwrap(), wecc9(true));
    assert_eq!(c.system.provisional.len(), 10);
}

#[test]
fn two_bus_matches_closed_form() {
    let parsed = parse_case_str(bundled_case("two_bus").unwrap()).unwrap();
    let sys = parsed.case.initialize().unwrap();
    // lossless line, V1 = 1: V sin(th) = X P2, V^2 - V cos(th) = X Q2
    let (x, p2, q2): (f64, f64, f64) = (0.2, 0.3 - 1.0, 0.1 - 0.3);
    let (a, b) = (x * p2, x * q2);
    let y = ((2.0 * b + 1.0) + ((2.0 * b + 1.0).powi(2) - 4.0 * (a * a + b * b)).sqrt()) / 2.0;
    let v = y.sqrt();
    let th = (a / v).asin();
    let u = sys.bus_voltages[1];
    assert!((u.norm() - v).abs() < 1e-10, "{} vs {v}", u.norm());
    assert!((u.arg() - th).abs() < 1e-10);
    let s = sys.sg_generation[0];
    assert!((s.re - 0.7).abs() < 1e-10);
    assert!((s.im - (1.0 - v * th.cos()) / x).abs() < 1e-10);
    // documented in the case file
    assert!((v - 0.946757).abs() < 1e-6);
    assert!((th + 0.148418).abs() < 1e-6);

    let fields: Vec<&str> = parsed.defaulted.iter().map(|d| d.field.as_str()).collect();
    for f in [
        "branch[0].r_pu",
        "branch[0].b_pu",
        "sg.M1.governor_droop_pu",
        "sg.M1.governor_time_constant_s",
        "sg.M1.governor_enabled",
        "gfl.C1.dc_voltage_setpoint_pu",
        "gfl.C1.current_limit_pu",
    ] {
        assert!(fields.contains(&f), "{f} not reported in {fields:?}");
    }
    assert_eq!(fields.len(), 7);
}

#[test]
fn missing_inertia_names_the_field() {
    let text = wecc_text().replacen("inertia_h_s = 1.52\n", "", 1);
    match parse_case_str(&text) {
        Err(CaseError::Missing { field, line }) => {
            assert_eq!(field, "sg.G2.inertia_h_s");
            assert!(line > 100, "line {line}");
            let err = CaseError::Missing { field, line }.to_string();
            assert!(err.contains("sg.G2.inertia_h_s") && err.contains("line"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn dangling_bus_rejected() {
    let text = wecc_text().replacen("bus = 8\np_pu", "bus = 12\np_pu", 1);
    assert_eq!(
        parse_case_str(&text).unwrap_err(),
        CaseError::UnknownBus { field: "load[2].bus".into(), bus: 12 }
    );
}

#[test]
fn misspelled_field_is_a_syntax_error_with_position() {
    let text = wecc_text().replacen("inertia_h_s = 2.0", "inertia_s = 2.0", 1);
    let e = parse_case_str(&text).unwrap_err().to_string();
    assert!(e.contains("inertia_s"), "{e}");
    assert!(e.contains("line"), "{e}");
}

#[test]
fn slack_schedule_checked_against_power_flow() {
    let text = wecc_text().replacen("p_setpoint_pu = 0.7175", "p_setpoint_pu = 0.8", 1);
    assert!(matches!(parse_case_str(&text), Err(CaseError::Dispatch { .. })));
}

#[test]
fn non_positive_values_rejected() {
    let text = wecc_text().replacen("rated_power_pu = 1.95", "rated_power_pu = -1.95", 1);
    match parse_case_str(&text) {
        Err(CaseError::Invalid { field, .. }) => assert_eq!(field, "gfl.G3.rated_power_pu"),
        other => panic!("{other:?}"),
    }
}

fn two_bus_manifest(dir: &Path, extra: &str) -> RunManifest {
    let text = format!(
        r#"
case = "bundled:two_bus"
variants = ["proposed", "sfr", "rotor"]
output_dir = "out"

[disturbance]
bus = 2
conductance_pu = 0.05
time_s = 0.5

[sim]
dt_s = 0.002
duration_s = 4.0

[rotor]
filter_reactance_pu = 0.1
filter_error_pct = 20.0
{extra}
"#
    );
    RunManifest::parse_str(&text, dir).unwrap()
}

#[test]
fn manifest_defaults_and_paths() {
    let dir = Path::new("/tmp/cases");
    let m = two_bus_manifest(dir, "");
    assert_eq!(m.case, CaseSource::Bundled("two_bus".into()));
    assert_eq!(m.output_dir, dir.join("out"));
    assert_eq!(m.variants, vec![ModelVariant::Proposed, ModelVariant::Sfr, ModelVariant::Rotor]);
    assert!(m.compare.is_none());
    assert_eq!(m.seed, None);
    let bad = "case = \"x.toml\"\nvariants = [\"fast\"]\n[disturbance]\nbus = 1\nconductance_pu = 0.1\ntime_s = 1.0\n";
    assert!(RunManifest::parse_str(bad, dir).is_err());
}

#[test]
fn runs_are_byte_identical_and_compare_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let m = two_bus_manifest(tmp.path(), "[compare]\n");
    let r1 = run(&m).unwrap();
    assert_eq!(r1.exit_code(), 0, "{:?}", r1.failures);
    let read = |p: &str| std::fs::read(tmp.path().join("out").join(p)).unwrap();
    let first: Vec<Vec<u8>> = ["proposed.csv", "sfr.csv", "rotor.csv", "metrics.txt"].iter().map(|p| read(p)).collect();
    let r2 = run(&m).unwrap();
    assert_eq!(r2.exit_code(), 0);
    let second: Vec<Vec<u8>> = ["proposed.csv", "sfr.csv", "rotor.csv", "metrics.txt"].iter().map(|p| read(p)).collect();
    assert_eq!(first, second);
    assert!(!tmp.path().join("out").join(FAILURE_MARKER).exists());

    // every pair, later variant as reference, both compared signals
    for pair in ["proposed_vs_sfr", "proposed_vs_rotor", "sfr_vs_rotor"] {
        let key = format!("error_index.{pair}.omega_coi_pct");
        let v: f64 = r1.metrics[&key].parse().unwrap();
        assert!(v.is_finite() && v >= 0.0);
        assert!(r1.metrics.contains_key(&format!("error_index.{pair}.p_f0_ele_pct")));
    }
    let metrics = String::from_utf8(first[3].clone()).unwrap();
    assert!(metrics.contains("gfl.C1.h_f_s = "));
    assert!(metrics.contains("proposed.omega_coi.nadir_pu = "));
    let keys: Vec<&str> = metrics.lines().map(|l| l.split(" = ").next().unwrap()).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn csv_columns_depend_on_variant_only() {
    let tmp = tempfile::tempdir().unwrap();
    let header = |extra: &str, step: f64| {
        let mut m = two_bus_manifest(tmp.path(), extra);
        m.disturbance.conductance_pu = step;
        m.output_dir = tmp.path().join(format!("o{step}"));
        run(&m).unwrap();
        ["proposed", "sfr", "rotor"]
            .map(|v| std::fs::read_to_string(m.output_dir.join(format!("{v}.csv"))).unwrap().lines().next().unwrap().to_string())
    };
    let a = header("", 0.05);
    let b = header("", -0.03);
    assert_eq!(a, b);
    assert_ne!(a[0], a[1]);
    assert!(a[0].starts_with("time [s],"));
    assert!(a[0].contains("omega_coi [pu]"));
}

#[test]
fn sweep_writes_a_table() {
    let tmp = tempfile::tempdir().unwrap();
    let m = two_bus_manifest(tmp.path(), "[[sweep]]\nparameter = \"pll.ki\"\nvalues = [14.0, 70.0, 140.0]\n");
    let r = run_sweeps(&m).unwrap();
    assert_eq!(r.exit_code(), 0, "{:?}", r.failures);
    let text = std::fs::read_to_string(tmp.path().join("out/sweep_pll_ki.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("pll.ki,"));
    assert!(lines[1].starts_with("14,"));
    assert_eq!(r.metrics["sweep.pll.ki.h_f_s.trend"], "decreasing");
}

#[test]
fn aborted_simulation_leaves_marker() {
    let tmp = tempfile::tempdir().unwrap();
    let mut m = two_bus_manifest(tmp.path(), "");
    m.variants = vec![ModelVariant::Proposed, ModelVariant::Reference];
    m.disturbance.conductance_pu = 40.0;
    let r = run(&m).unwrap();
    assert_eq!(r.exit_code(), 1);
    let marker = std::fs::read_to_string(tmp.path().join("out").join(FAILURE_MARKER)).unwrap();
    assert!(!marker.trim().is_empty());
    assert!(tmp.path().join("out").join(METRICS_FILE).exists());
    // a later clean run removes the marker
    m.disturbance.conductance_pu = 0.05;
    assert_eq!(run(&m).unwrap().exit_code(), 0);
    assert!(!tmp.path().join("out").join(FAILURE_MARKER).exists());
}

#[test]
fn unknown_disturbance_bus_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut m = two_bus_manifest(tmp.path(), "");
    m.disturbance.bus = 3;
    assert!(matches!(run(&m), Err(CaseError::UnknownBus { .. })));
}
