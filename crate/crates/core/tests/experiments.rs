use qdesc_core::engine::run_with_trace;
use qdesc_core::experiments::{
    build_teleportation, run_experiment, run_experiment_with, Axis, ExperimentParams, Fault,
};
use qdesc_core::provenance::{carrying_edges, flow_dot};

fn show_failures(r: &qdesc_core::experiments::ExperimentReport) -> String {
    r.failures().map(|c| format!("{}: {} (expected {})", c.id, c.observed, c.expected)).collect::<Vec<_>>().join("\n")
}

#[test]
fn teleport_fixed_phi_passes() {
    let p = ExperimentParams { phi: Some([0.3, 0.7, 1.1]), ..Default::default() };
    let r = run_experiment("teleport", &p).unwrap();
    assert!(r.passed, "{}", show_failures(&r));
    assert!(r.claims.len() > 20);
}

#[test]
fn teleport_random_phi_passes() {
    for seed in 0..5 {
        let r = run_experiment("teleport", &ExperimentParams { seed, ..Default::default() }).unwrap();
        assert!(r.passed, "seed {seed}: {}", show_failures(&r));
    }
}

#[test]
fn telephone_variants_pass() {
    for (chain, decohere) in [(0, false), (1, false), (2, true), (3, true)] {
        let p = ExperimentParams { chain, decohere, seed: 7, ..Default::default() };
        let r = run_experiment("telephone", &p).unwrap();
        assert!(r.passed, "chain {chain} decohere {decohere}: {}", show_failures(&r));
    }
}

#[test]
fn scrambled_environment_still_teleports() {
    let p = ExperimentParams { chain: 1, decohere: true, scramble: true, seed: 3, ..Default::default() };
    let r = run_experiment("telephone", &p).unwrap();
    assert!(r.passed, "{}", show_failures(&r));
}

#[test]
fn eta_variants() {
    for prerotation in [None, Some((Axis::Z, 0.8)), Some((Axis::X, std::f64::consts::FRAC_PI_3))] {
        let p = ExperimentParams { prerotation, seed: 11, ..Default::default() };
        let r = run_experiment("eta", &p).unwrap();
        assert!(r.passed, "{prerotation:?}: {}", show_failures(&r));
    }
}

#[test]
fn skipped_step_fails_and_names_it() {
    let p = ExperimentParams { phi: Some([0.3, 0.7, 1.1]), ..Default::default() };
    let r = run_experiment_with("teleport", &p, &Fault::SkipStep(6)).unwrap();
    assert!(!r.passed);
    assert!(r.failures().any(|c| c.step == Some(6)));
}

#[test]
fn leak_fails_locality() {
    let p = ExperimentParams { phi: Some([0.3, 0.7, 1.1]), ..Default::default() };
    let r = run_experiment_with("teleport", &p, &Fault::Leak { step: 4, wire: 5 }).unwrap();
    let loc = r.claims.iter().find(|c| c.id == "locality").unwrap();
    assert!(!loc.pass);
    assert_eq!(loc.step, Some(4));
}

#[test]
fn phi_flows_through_the_records() {
    let trace = run_with_trace(&build_teleportation([0.3, 0.7, 1.1]).unwrap()).unwrap();
    let edges = carrying_edges(&trace, "phi");
    for e in [(1, 2, 4), (2, 5, 6), (1, 4, 7), (5, 3, 8), (4, 3, 9)] {
        assert!(edges.contains(&e), "missing {e:?} in {edges:?}");
    }
    // nothing reaches wire 3 before the corrections
    assert!(edges.iter().all(|&(_, to, t)| to != 3 || t >= 8));
    let dot = flow_dot(&trace);
    assert!(dot.starts_with("digraph"));
    assert!(dot.contains("w5t7 -> w3t8 [color=green"));
}

#[test]
fn report_serializes() {
    let r = run_experiment("teleport", &ExperimentParams::default()).unwrap();
    let v = serde_json::to_value(&r).unwrap();
    assert_eq!(v["schema"], "qdesc-report/1");
    assert!(v["claims"].as_array().unwrap().iter().all(|c| c["pass"].is_boolean()));
}

#[test]
fn shipped_circuit_files_match_builders() {
    use qdesc_core::circuit_file::parse_circuit;
    use qdesc_core::experiments::build_telephone;
    let read = |name: &str| {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../circuits/").to_string() + name;
        parse_circuit(&std::fs::read_to_string(path).unwrap()).unwrap()
    };
    let phi = [0.3, 0.7, 1.1];
    assert_eq!(read("teleport.qnet"), build_teleportation(phi).unwrap());
    assert_eq!(read("telephone.qnet"), build_telephone(phi, 2, true).unwrap());
}
