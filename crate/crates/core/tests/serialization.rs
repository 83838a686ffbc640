use parabolic_orbits::continuation::{run_sweep, SweepConfig};
use parabolic_orbits::diagnostics::ContinuationReport;
use parabolic_orbits::{bound_constants, minimize, Initializer, MinimizeOptions, MinimizeReport, OddTrajectory, ProblemSpec, SCHEMA};

#[test]
fn sweep_report_json_round_trips_with_documented_names() {
    let spec = ProblemSpec::symmetric(1.0).unwrap();
    let cfg = SweepConfig {
        horizons: vec![6.0, 12.0],
        nodes_per_unit: 8,
        beta_init: 2.0 / 3.0,
        certificate: bound_constants(1.0, 0.6).unwrap(),
        options: MinimizeOptions::default(),
        window: (-3.0, 3.0),
    };
    let report = run_sweep(&spec, &cfg).unwrap().report;
    let value = serde_json::to_value(&report).unwrap();
    assert_eq!(value["schema"], SCHEMA);
    for key in ["alpha", "beta", "theta", "c", "rows", "fitted_theta", "window_deltas"] {
        assert!(value.get(key).is_some(), "{key}");
    }
    let row = &value["rows"][0];
    for key in [
        "n",
        "M",
        "a_n",
        "h_n",
        "energy_spread",
        "sup_norm",
        "min_speed",
        "el_residual",
        "terminal_speed",
        "bound_margins",
        "converged",
    ] {
        assert!(row.get(key).is_some(), "{key}");
    }
    let back: ContinuationReport = serde_json::from_value(value).unwrap();
    assert_eq!(back, report);
}

#[test]
fn minimize_report_round_trips() {
    let spec = ProblemSpec::symmetric(1.5).unwrap();
    let start = OddTrajectory::make_uniform(&spec, 4.0, 32, Initializer::YPower { beta: 0.6 }).unwrap();
    let report = minimize(&spec, &start, &MinimizeOptions::default()).unwrap();
    let text = serde_json::to_string(&report).unwrap();
    let back: MinimizeReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
}
