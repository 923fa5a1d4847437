use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lhsm_qed::{HarnessError, Overrides, ScenarioConfig};

const DECAY: &str = r#"{
    "scenario": "decay_sweep",
    "atoms": { "omega_q": { "resonant": { "k_r": 1.5707963267948966, "band": "upper" } }, "g": 1e-3 },
    "grid_n": 200,
    "evolve": { "dt": 0.5, "t_max": 150.0 },
    "sweep_axis": { "parameter": "d_s", "values": [0, 1, 2, 3] }
}"#;

fn lhsm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lhsm-qed"))
        .current_dir(dir)
        .env_remove("LHSM_QED_OUT")
        .args(args)
        .output()
        .unwrap()
}

fn invalid(json: &str) -> HarnessError {
    ScenarioConfig::from_json(json).unwrap_err()
}

fn field(e: &HarnessError) -> &str {
    match e {
        HarnessError::Config { field, .. } => field,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn empty_sweep_is_rejected() {
    let e = invalid(&DECAY.replace("[0, 1, 2, 3]", "[]"));
    assert_eq!(field(&e), "sweep_axis.values");
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn unknown_sweep_parameter_is_rejected() {
    let e = invalid(&DECAY.replace(r#""parameter": "d_s""#, r#""parameter": "d_q""#));
    assert!(field(&e).starts_with("sweep_axis"), "{e}");
}

#[test]
fn negative_step_is_rejected() {
    let e = invalid(&DECAY.replace(r#""dt": 0.5"#, r#""dt": -0.5"#));
    assert_eq!(field(&e), "evolve.dt");
}

#[test]
fn unknown_fields_fail_to_parse() {
    let e = ScenarioConfig::from_json(&DECAY.replace("grid_n", "grid_size")).unwrap_err();
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn hash_ignores_output_dir_and_follows_overrides() {
    let base = ScenarioConfig::from_json(DECAY).unwrap();
    let mut moved = base.clone();
    moved.output_dir = Some("elsewhere".into());
    assert_eq!(base.hash(), moved.hash());

    let mut changed = base.clone();
    changed
        .apply(&Overrides {
            g: Some(2e-3),
            ..Default::default()
        })
        .unwrap();
    assert_ne!(base.hash(), changed.hash());
}

#[test]
fn cli_writes_outputs_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("decay.json"), DECAY).unwrap();
    for out in ["a", "b"] {
        let o = lhsm(
            dir.path(),
            &[
                "decay_sweep",
                "--config",
                "decay.json",
                "--out",
                out,
                "--seedless",
                "--workers",
                "2",
            ],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["config.json", "decay.csv", "decay_rates.svg", "manifest.json"]);
    for name in &names {
        assert_eq!(
            fs::read(dir.path().join("a").join(name)).unwrap(),
            fs::read(dir.path().join("b").join(name)).unwrap(),
            "{name}"
        );
    }
    let csv = fs::read_to_string(dir.path().join("a/decay.csv")).unwrap();
    let manifest = fs::read_to_string(dir.path().join("a/manifest.json")).unwrap();
    let hash = csv.lines().next().unwrap().strip_prefix("# config-hash: ").unwrap();
    assert!(manifest.contains(hash));
    assert!(!manifest.contains("timestamp"));
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("decay.json"), DECAY).unwrap();
    fs::write(dir.path().join("bad.json"), DECAY.replace("[0, 1, 2, 3]", "[]")).unwrap();

    let mismatch = lhsm(dir.path(), &["dispersion", "--config", "decay.json"]);
    assert_eq!(mismatch.status.code(), Some(2));

    let bad = lhsm(dir.path(), &["decay_sweep", "--config", "bad.json"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("sweep_axis"));

    let missing = lhsm(dir.path(), &["decay_sweep", "--config", "absent.json"]);
    assert_eq!(missing.status.code(), Some(1));

    let unstable = lhsm(
        dir.path(),
        &["decay_sweep", "--config", "decay.json", "--dt", "500", "--out", "o"],
    );
    // failed sweep points are recorded in the table, not fatal
    assert!(unstable.status.success());
    assert!(String::from_utf8_lossy(&unstable.stderr).contains("warning"));
    let csv = fs::read_to_string(dir.path().join("o/decay.csv")).unwrap();
    assert!(csv.lines().skip(2).all(|l| !l.ends_with(',')), "{csv}");
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        if let Err(e) = ScenarioConfig::from_json(&text) {
            panic!("{}: {e}", path.display());
        }
        n += 1;
    }
    assert!(n >= 9);
}
