use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn qdesc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdesc")).args(args).current_dir(root()).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn validate(path: &Path) -> Value {
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(root().join("schemas/report.schema.json")).unwrap()).unwrap();
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{}: {errors:?}", path.display());
    doc
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn simulate_empty_circuit_points_up() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "empty.qnet", "wires 3\n");
    let out = dir.path().join("sim.json");
    let o = qdesc(&["simulate", file.to_str().unwrap(), "--json", out.to_str().unwrap()]);
    assert!(o.status.success());
    for w in 1..=3 {
        assert!(stdout(&o).contains(&format!("bloch q{w} = (0.000000, 0.000000, 1.000000)")));
    }
    let doc = validate(&out);
    assert_eq!(doc["descriptors"][0]["bloch"], serde_json::json!([0.0, 0.0, 1.0]));
}

#[test]
fn simulate_trace_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.json");
    let o = qdesc(&["simulate", "circuits/eta.qnet", "--trace", "--json", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("t=9"));
    let doc = validate(&out);
    assert_eq!(doc["trace"].as_array().unwrap().len(), 10 * 5);
}

#[test]
fn demo_teleport_passes_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let o = qdesc(&["demo", "teleport", "--phi", "0.3,0.7,1.1", "--json", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    qdesc(&["demo", "teleport", "--phi", "0.3,0.7,1.1", "--json", b.to_str().unwrap()]);
    let mut da = validate(&a);
    let mut db = validate(&b);
    assert_eq!(da["passed"], true);
    da["timestamp"] = Value::Null;
    db["timestamp"] = Value::Null;
    assert_eq!(da, db);
}

#[test]
fn demo_seeded_runs_match() {
    let run = |seed: &str| {
        let o = qdesc(&["demo", "eta", "--seed", seed]);
        assert!(o.status.success(), "{}", stdout(&o));
        stdout(&o)
    };
    assert_eq!(run("5"), run("5"));
    assert_ne!(run("5"), run("6"));
}

#[test]
fn demo_telephone_and_eta() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("phone.json");
    let o = qdesc(&["demo", "telephone", "--chain", "3", "--decohere", "--json", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    validate(&out);
    let o = qdesc(&["demo", "eta", "--prerotate", "x:1.0471975511965976", "--eta", "1,0"]);
    assert!(o.status.success(), "{}", stdout(&o));
}

#[test]
fn demo_failing_claim_exits_one() {
    // equal etas: the descriptor-difference claim must fail
    let o = qdesc(&["demo", "eta", "--eta", "1,0", "--eta2", "1,0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL eta.descriptor"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(qdesc(&["demo", "superdense"]).status.code(), Some(2));
    assert_eq!(qdesc(&["demo", "teleport", "--phi", "1,2"]).status.code(), Some(2));
    assert_eq!(qdesc(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "bad.qnet", "wires 2\nt=1 h 2\nt=2 cnot 2 3\n");
    let o = qdesc(&["simulate", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("3:12: semantic error"), "{err}");
}

#[test]
fn compare_oracle_on_shipped_circuits() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["teleport", "telephone", "eta"] {
        let out = dir.path().join(format!("{name}.json"));
        let o = qdesc(&["compare-oracle", &format!("circuits/{name}.qnet"), "--json", out.to_str().unwrap()]);
        assert!(o.status.success(), "{name}: {}", stdout(&o));
        assert_eq!(validate(&out)["passed"], true);
    }
}

#[test]
fn audit_teleport_dot_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("flow.dot");
    let json = dir.path().join("audit.json");
    let o = qdesc(&["audit", "circuits/teleport.qnet", "--dot", dot.to_str().unwrap(), "--json", json.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = std::fs::read_to_string(&dot).unwrap();
    // phi leaves wire 1 through the records and reaches wire 3 only at the corrections
    for edge in ["w1t6 -> w4t7 [color=green", "w5t7 -> w3t8 [color=green", "w4t8 -> w3t9 [color=green"] {
        assert!(text.contains(edge), "missing {edge}");
    }
    assert!(!text.lines().any(|l| l.contains("-> w3t") && l.contains("green") && !l.contains("w3t8") && !l.contains("w3t9")));
    let doc = validate(&json);
    let q3_t7 = doc["entries"].as_array().unwrap().iter().find(|e| e["wire"] == 3 && e["time"] == 7).unwrap();
    assert_eq!(q3_t7["numerical"]["phi"], false);
    assert_eq!(q3_t7["tags"]["x"], serde_json::json!([]));
}

#[test]
fn fuzz_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fuzz.json");
    let o = qdesc(&["fuzz", "--n", "4", "--depth", "12", "--seeds", "20", "--json", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    let doc = validate(&out);
    assert_eq!(doc["failures"], 0);
    assert_eq!(doc["cases"].as_array().unwrap().len(), 20);
}
