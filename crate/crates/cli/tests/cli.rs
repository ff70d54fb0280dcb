use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use capnorm::grid::{make_grid, sample, GridFunction, Sampler};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_capnorm"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn schema(name: &str) -> Value {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas");
    let load = |n: &str| -> Value {
        serde_json::from_str(&std::fs::read_to_string(dir.join(n)).unwrap()).unwrap()
    };
    let mut s = load(name);
    // inline the shared grid schema in place of its relative reference
    let grid = load("grid.schema.json");
    if let Some(props) = s.get_mut("properties").and_then(Value::as_object_mut) {
        if props.get("grid").map(|g| g["$ref"] == "grid.schema.json") == Some(true) {
            props.insert("grid".into(), grid);
        }
    }
    s
}

fn assert_valid(schema_name: &str, doc: &Value) {
    let validator = jsonschema::validator_for(&schema(schema_name)).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema_name}: {errors:?}");
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// TOML has no null; absent keys take the same defaults.
fn strip_nulls(v: &mut Value) {
    if let Value::Object(map) = v {
        map.retain(|_, x| !x.is_null());
        map.values_mut().for_each(strip_nulls);
    }
}

fn bump_file(dir: &Path) -> PathBuf {
    let g = make_grid(2, 4, 2.0, &[-1.0, -1.0]).unwrap();
    let f = sample(&Sampler::bump(vec![0.0, 0.0], 0.6), &g).unwrap();
    let path = dir.join("bump.json");
    std::fs::write(&path, f.to_json().unwrap()).unwrap();
    path
}

#[test]
fn content_of_two_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cover = dir.path().join("cover.json");
    let set = data("two_cells.json");
    let out = run(&[
        "content",
        "--set",
        set.to_str().unwrap(),
        "--delta",
        "0.7",
        "--cover-out",
        cover.to_str().unwrap(),
    ]);
    let doc = stdout_json(&out);
    assert_valid("content_result.schema.json", &doc);
    let v = doc["value"].as_f64().unwrap();
    assert!((v - 2.0 * 0.25f64.powf(0.7)).abs() < 1e-12);
    assert!(v.to_string().starts_with("0.757858"));
    let cover: Value = serde_json::from_str(&std::fs::read_to_string(&cover).unwrap()).unwrap();
    assert_valid("cover.schema.json", &cover);
    assert_eq!(cover["cover"].as_array().unwrap().len(), 2);
    let set_doc: Value = serde_json::from_str(&std::fs::read_to_string(&set).unwrap()).unwrap();
    assert_valid("cell_set.schema.json", &set_doc);
}

#[test]
fn norm_maximal_riesz_interp() {
    let dir = tempfile::tempdir().unwrap();
    let f = bump_file(dir.path());
    let fs = f.to_str().unwrap();

    let norm = stdout_json(&run(&["norm", "--fn", fs, "--delta", "1.5", "--p", "2", "--q", "inf"]));
    assert_valid("norm_result.schema.json", &norm);
    assert!(norm["norm"].as_f64().unwrap() > 0.0);
    let strong = stdout_json(&run(&["norm", "--fn", fs, "--delta", "1.5", "--p", "2"]));
    let weak = norm["norm"].as_f64().unwrap();
    assert!(weak <= strong["norm"].as_f64().unwrap() * (1.0 + 1e-12));

    for (cmd, flag, value) in [("maximal", "--mu", "0.5"), ("riesz", "--alpha", "1")] {
        let out_path = dir.path().join(format!("{cmd}.json"));
        let out = run(&[cmd, "--fn", fs, flag, value, "--out", out_path.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let text = std::fs::read_to_string(&out_path).unwrap();
        assert_valid("grid_function.schema.json", &serde_json::from_str(&text).unwrap());
        let g = GridFunction::from_json(&text).unwrap();
        assert_eq!(g.grid().num_cells(), 256);
        assert_eq!(g.to_json().unwrap(), text.trim_end());
    }

    let interp = stdout_json(&run(&[
        "interp", "--fn", fs, "--p0", "1", "--p1", "3", "--eta", "0.4", "--q", "2", "--delta", "1.5",
    ]));
    assert_valid("interp_result.schema.json", &interp);
    assert_eq!(interp["report"]["k_values"].as_array().unwrap().len(), 64);
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(run(&["verify", "poincare", "--config", "missing.toml"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "no_such_experiment"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "poincare", "--set", "bogus=1"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "poincare", "--set", "p=0.5"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["norm", "--fn", "missing.json", "--delta", "1", "--p", "1"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "p = 1.5\nunknown_key = 3\n").unwrap();
    assert_eq!(
        run(&["verify", "poincare", "--config", cfg.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn config_precedence_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("weak.toml");
    std::fs::write(
        &cfg,
        r#"
delta = 1.0
p = 0.7
depths = [3, 4, 5]

[u.profile]
kind = "radial_power"
center = [0.0, 0.0]
exponent = 0.6
"#,
    )
    .unwrap();
    let args = [
        "verify",
        "poincare_weak",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "p=0.5",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout, "identical configs give identical bytes");
    let report = stdout_json(&a);
    assert_valid("experiment_report.schema.json", &report);
    let config = &report["params"]["config"];
    assert_eq!(config["p"], 0.5, "command line beats file");
    assert_eq!(config["delta"], 1.0, "file beats defaults");
    assert_eq!(config["c_ball"], 0.25, "defaults fill the rest");
    assert_eq!(config["u"]["profile"]["kind"], "radial_power");
    assert_eq!(report["verdict"]["pass"], true);

    // replaying the embedded config reproduces the report
    let replay = dir.path().join("replay.toml");
    let mut config = config.clone();
    strip_nulls(&mut config);
    let table: toml::Table = serde_json::from_value(config).unwrap();
    std::fs::write(&replay, toml::to_string(&table).unwrap()).unwrap();
    let c = run(&["verify", "poincare_weak", "--config", replay.to_str().unwrap()]);
    assert_eq!(c.stdout, a.stdout);
}

#[test]
fn csv_and_out_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let csv = dir.path().join("series.csv");
    let status = run(&[
        "verify",
        "maximal",
        "--out",
        out.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    assert!(status.stdout.is_empty());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_valid("experiment_report.schema.json", &report);
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().next(), Some("label,value"));
    assert_eq!(rows.lines().count(), report["series"].as_array().unwrap().len() + 1);
}

#[test]
fn failed_verdict_exits_1() {
    // a small gradient second index lets the gradient norm drift with eps
    let out = run(&["verify", "sharpness_poincare", "--set", "q_grad=1.9"]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["verdict"]["pass"], false);
}

#[test]
fn selftest_passes() {
    let out = run(&["selftest", "--samples", "20"]);
    let report = stdout_json(&out);
    assert_valid("experiment_report.schema.json", &report);
    assert_eq!(report["verdict"]["pass"], true);
    let list = run(&["verify", "--list"]);
    assert!(String::from_utf8(list.stdout).unwrap().contains("sharpness_riesz"));
}
