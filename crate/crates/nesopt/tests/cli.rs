//! End-to-end checks of the command-line front end: exit codes, file
//! outputs, config overrides, and reproducibility.

use std::path::Path;

use nesopt::cli;

fn reference_config() -> serde_json::Value {
    serde_json::json!({
        "system": {
            "physical": {
                "m1": 2200.0, "m2": 1400.0, "m3": 70.0,
                "kappa1": 5.2e5, "kappa12": 1.3e6, "kappa3": 2.6e5,
                "b1": 500.0, "b12": 1000.0, "b3": 50.0
            }
        },
        "simulation": {"v0": 0.115, "tspan": [0.0, 50.0]},
        "analysis": {"window": [0.0, 50.0]}
    })
}

fn write_config(dir: &Path, value: &serde_json::Value) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn run(args: &[&str]) -> i32 {
    cli::run(std::iter::once("nesopt").chain(args.iter().cloned()))
}

#[test]
fn critical_report_contains_the_expected_velocity() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &reference_config());
    let out = dir.path().join("out");
    let code = run(&[
        "critical",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("critical.json")).unwrap()).unwrap();
    let v_cr = report["v_cr"].as_f64().unwrap();
    assert!((0.07..=0.11).contains(&v_cr), "v_cr {v_cr}");
    assert!(report["roots"].as_array().unwrap().len() >= 3);
    assert_eq!(report["window"][1].as_f64().unwrap(), 50.0);
    assert!(report["config"].is_object());
    assert!(report["homoclinic"]["forward_capture"].as_bool().unwrap());
}

#[test]
fn tmd_opt_single_mass_reports_the_reference_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let mut value = reference_config();
    value["analysis"]["tmd"] = serde_json::json!({"dof": 1, "eps": 0.05, "zeta1": 0.02});
    let config = write_config(dir.path(), &value);
    let out = dir.path().join("out");
    let code = run(&[
        "tmd-opt",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("tmd_opt.json")).unwrap()).unwrap();
    let zeta2 = report["zeta2_opt"].as_f64().unwrap();
    let kappa = report["kappa_opt"].as_f64().unwrap();
    let j_ref = report["j_at_reference_impulse"].as_f64().unwrap();
    assert!((zeta2 - 0.0055).abs() < 0.0002, "zeta2 {zeta2}");
    assert!((kappa - 0.048).abs() < 0.001, "kappa {kappa}");
    assert!((j_ref - 0.00726).abs() < 0.0002, "j {j_ref}");
}

#[test]
fn empty_config_names_the_missing_block() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    std::fs::write(&path, "").unwrap();
    let code = run(&["simulate", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    let err = nesopt::cli::load_config(&path, &[]).unwrap_err();
    assert!(err.to_string().contains("system"), "{err}");
}

#[test]
fn conflicting_parameter_blocks_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut value = reference_config();
    value["system"]["nondimensional"] = serde_json::json!({
        "mu": 0.6364, "eps": 0.0318, "zeta1": 0.0074,
        "zeta12": 0.0148, "zeta3": 0.00074, "k12": 2.5
    });
    let config = write_config(dir.path(), &value);
    let code = run(&["simulate", config.to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn unknown_subcommand_exits_with_usage_error() {
    assert_eq!(run(&["frobnicate", "x.json"]), 1);
    assert_eq!(run(&["simulate"]), 1);
}

#[test]
fn overrides_reach_the_resolved_system() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &reference_config());
    let loaded =
        nesopt::cli::load_config(&config, &["system.physical.m3=140.0".to_string()]).unwrap();
    let params = loaded.resolve_system().unwrap();
    assert!((params.eps - 140.0 / 2200.0).abs() < 1e-12);
}

#[test]
fn simulate_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut value = reference_config();
    value["simulation"]["tspan"] = serde_json::json!([0.0, 5.0]);
    let config = write_config(dir.path(), &value);
    let out = dir.path().join("out");
    let names = ["trajectory.csv", "energy.csv", "simulate.json"];
    let mut first = Vec::new();
    for pass in 0..2 {
        let code = run(&[
            "simulate",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let snapshot: Vec<Vec<u8>> = names
            .iter()
            .map(|name| std::fs::read(out.join(name)).unwrap())
            .collect();
        if pass == 0 {
            first = snapshot;
        } else {
            for (name, (a, b)) in names.iter().zip(first.iter().zip(&snapshot)) {
                assert_eq!(a, b, "{name} differs between runs");
            }
        }
    }
}

#[test]
fn design_round_trip_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let mut value = reference_config();
    value["analysis"]["design"] = serde_json::json!({"v_design": 0.1, "derate": 0.9});
    let config = write_config(dir.path(), &value);
    let out = dir.path().join("out");
    let code = run(&[
        "design-nes",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("design_nes.json")).unwrap())
            .unwrap();
    let v_back = report["v_critical_roundtrip"].as_f64().unwrap();
    assert!((v_back - 0.09).abs() < 1e-6, "roundtrip {v_back}");
}

#[test]
fn stiffness_sweep_through_the_cli_produces_all_formats() {
    let dir = tempfile::tempdir().unwrap();
    let mut value = reference_config();
    value["system"]["attachment"] = serde_json::json!({"kind": "linear-tmd", "stiffness": 0.02});
    value["simulation"]["v0"] = serde_json::json!(0.1);
    value["analysis"]["sweep"] = serde_json::json!({
        "kind": "stiffness",
        "stiffness_grid": {"start": 0.012, "stop": 0.024, "count": 7}
    });
    let config = write_config(dir.path(), &value);
    let out = dir.path().join("out");
    let code = run(&[
        "sweep",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    for name in ["sweep.csv", "sweep.json", "sweep.svg"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let svg = std::fs::read_to_string(out.join("sweep.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("# config:"));
}

#[test]
fn numerical_failures_exit_with_code_two() {
    // equal primary masses with a vanishing coupler make the reduced
    // model's analytic elimination singular on the window
    let dir = tempfile::tempdir().unwrap();
    let value = serde_json::json!({
        "system": {
            "nondimensional": {
                "mu": 1.0, "eps": 0.01, "zeta1": 0.0,
                "zeta12": 0.0, "zeta3": 0.0, "k12": 1e-9
            },
            "attachment": {"kind": "cubic-nes", "stiffness": 0.5}
        },
        "simulation": {"v0": 0.1, "tspan": [0.0, 50.0]},
        "output": {"formats": ["json"]}
    });
    let config = write_config(dir.path(), &value);
    let out = dir.path().join("out");
    let code = run(&[
        "reduce",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}
