//! Acceptance suite: one pass/fail line per criterion. Expected values are rebuilt here
//! from first principles rather than taken from the library.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_3};
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use qdesc_core::engine::{evolve, evolve_global, run_with_trace, run_with_trace_using, DescriptorSet, FlowTrace};
use qdesc_core::experiments::{
    build_eta_experiment, build_telephone, build_teleportation, random_amplitudes, random_circuit, random_eta_pair,
    random_phi, Axis, Fault,
};
use qdesc_core::oracle::{eta_fidelity, partial_trace, simulate, simulate_until, StateVector};
use qdesc_core::pauli::{Pauli, PauliSum};
use qdesc_core::provenance::{locality_audit, numerical_dependence_check};
use qdesc_core::tomography::{reduced_density, DensityMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `e^{i p3 Z} e^{i p2 X} e^{i p1 Z} |0>` applied factor by factor.
fn psi_of(phi: [f64; 3]) -> [Complex64; 2] {
    let [p1, p2, p3] = phi;
    let g = Complex64::from_polar(1.0, p1);
    [g * p2.cos() * Complex64::from_polar(1.0, p3), g * c(0.0, p2.sin()) * Complex64::from_polar(1.0, -p3)]
}

fn projector(psi: [Complex64; 2]) -> [[Complex64; 2]; 2] {
    [[psi[0] * psi[0].conj(), psi[0] * psi[1].conj()], [psi[1] * psi[0].conj(), psi[1] * psi[1].conj()]]
}

fn diff_2x2(rho: &DensityMatrix, target: [[Complex64; 2]; 2]) -> f64 {
    let m = rho.matrix();
    let mut worst = 0.0f64;
    for r in 0..2 {
        for col in 0..2 {
            worst = worst.max((m[(r, col)] - target[r][col]).norm());
        }
    }
    worst
}

/// Parses `Dx q2z q3x` into a product, `Dx`/`Dz` being wire 1's components at t=3.
fn product(text: &str, n: usize, d: &DescriptorSet) -> PauliSum {
    let mut acc = PauliSum::identity(n).unwrap();
    for f in text.split_whitespace() {
        let term = match f {
            "Dx" => d.descriptor(1).x().clone(),
            "Dz" => d.descriptor(1).z().clone(),
            _ => {
                let body = f.strip_prefix('q').unwrap();
                let (wire, axis) = body.split_at(body.len() - 1);
                let p = if axis == "x" { Pauli::X } else { Pauli::Z };
                PauliSum::single(n, wire.parse().unwrap(), p).unwrap()
            }
        };
        acc = acc.mul(&term).unwrap();
    }
    acc
}

/// Coefficient difference when the term structure matches exactly, else `None`.
fn match_label(trace: &FlowTrace, wire: usize, time: usize, x: &str, z: &str) -> Option<f64> {
    let n = trace.circuit.n();
    let t3 = trace.at(3).unwrap();
    let got = trace.at(time)?.descriptor(wire);
    let (ex, ez) = (product(x, n, t3), product(z, n, t3));
    let keys = |s: &PauliSum| s.terms().keys().copied().collect::<Vec<_>>();
    if keys(got.x()) != keys(&ex) || keys(got.z()) != keys(&ez) {
        return None;
    }
    Some(got.x().max_abs_diff(&ex).unwrap().max(got.z().max_abs_diff(&ez).unwrap()))
}

fn teleportation_fidelity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let phi = random_phi(&mut rng);
        let set = evolve(&build_teleportation(phi).unwrap()).unwrap();
        worst = worst.max(diff_2x2(&reduced_density(&set, &[3]).unwrap(), projector(psi_of(phi))));
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("100 phi, max |rho3(9) - |psi><psi|| = {worst:.2e}, {secs:.2}s");
    if worst <= 1e-9 && secs < 5.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const ANNOTATED_LABELS: [(usize, usize, &str, &str); 18] = [
    (1, 0, "q1x", "q1z"),
    (2, 0, "q2x", "q2z"),
    (3, 0, "q3x", "q3z"),
    (4, 0, "q4x", "q4z"),
    (5, 0, "q5x", "q5z"),
    (2, 1, "q2z", "q2x"),
    (2, 2, "q2z q3x", "q2x"),
    (3, 2, "q3x", "q2x q3z"),
    (1, 3, "Dx", "Dz"),
    (1, 4, "Dx q2z q3x", "Dz"),
    (2, 4, "q2z q3x", "Dz q2x"),
    (1, 5, "Dz", "Dx q2z q3x"),
    (2, 6, "q2z q3x q5x", "Dz q2x"),
    (5, 6, "q5x", "Dz q2x q5z"),
    (1, 7, "Dz q4x", "Dx q2z q3x"),
    (4, 7, "q4x", "Dx q2z q3x q4z"),
    (3, 8, "q3x", "Dz q3z q5z"),
    (3, 9, "Dx q2z q4z", "Dz q3z q5z"),
];

fn annotated_labels() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut misses = Vec::new();
    let mut worst = 0.0f64;
    let runs = 10;
    for _ in 0..runs {
        let trace = run_with_trace(&build_teleportation(random_phi(&mut rng)).unwrap()).unwrap();
        for &(w, t, x, z) in &ANNOTATED_LABELS {
            // a label holds from its own step until the wire's next gate
            let until = trace
                .circuit
                .gates()
                .iter()
                .filter(|g| g.touches(w) && g.time > t)
                .map(|g| g.time)
                .min()
                .unwrap_or(trace.circuit.depth() + 1);
            for step in t..until {
                match match_label(&trace, w, step, x, z) {
                    Some(d) if d <= 1e-12 => worst = worst.max(d),
                    _ => misses.push(format!("q{w}({step})")),
                }
            }
        }
    }
    let ok = ANNOTATED_LABELS.len() - ANNOTATED_LABELS.iter().filter(|l| misses.iter().any(|m| m.starts_with(&format!("q{}({})", l.0, l.1)))).count();
    let detail = format!(
        "{ok}/{} labels (5 inputs + 13 gate outputs), {runs} phi, held until the next gate, max coeff diff {worst:.1e}",
        ANNOTATED_LABELS.len()
    );
    if misses.is_empty() {
        Ok(detail)
    } else {
        misses.dedup();
        Err(format!("{detail}; mismatches: {}", misses.join(", ")))
    }
}

fn suite() -> Vec<qdesc_core::engine::Circuit> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    (0..200)
        .map(|_| {
            let n = rng.gen_range(1..=6);
            let depth = rng.gen_range(0..=20);
            random_circuit(n, depth, &mut rng).unwrap()
        })
        .collect()
}

fn step_vs_global(circuits: &[qdesc_core::engine::Circuit]) -> Outcome {
    let mut worst = 0.0f64;
    let mut non_clifford = 0;
    for circ in circuits {
        non_clifford += circ.gates().iter().filter(|g| !g.kind.is_clifford()).count();
        worst = worst.max(evolve_global(circ).unwrap().max_abs_diff(&evolve(circ).unwrap()).unwrap());
    }
    let detail = format!("{} circuits ({non_clifford} non-Clifford gates), max coeff diff {worst:.2e}", circuits.len());
    if worst <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_equivalence(circuits: &[qdesc_core::engine::Circuit]) -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for circ in circuits {
        let set = evolve(circ).unwrap();
        let psi = simulate(circ).unwrap();
        let n = circ.n();
        for a in 1..=n {
            for b in a..=n {
                let wires: Vec<usize> = if a == b { vec![a] } else { vec![a, b] };
                let d = reduced_density(&set, &wires).unwrap().max_abs_diff(&partial_trace(&psi, &wires).unwrap());
                worst = worst.max(d);
                count += 1;
            }
        }
    }
    let detail = format!("{count} reduced density matrices, max entry diff {worst:.2e}");
    if worst <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn locality(circuits: &[qdesc_core::engine::Circuit]) -> Outcome {
    let violations: usize = circuits.iter().map(|c| locality_audit(&run_with_trace(c).unwrap()).len()).sum();
    let circ = build_teleportation([0.3, 0.7, 1.1]).unwrap();
    let broken = run_with_trace_using(&circ, &Fault::Leak { step: 6, wire: 3 }).unwrap();
    let found = locality_audit(&broken);
    let located = found.len() == 1 && found[0].wire == 3 && found[0].time == 6;
    let detail = format!("{violations} violations over the suite; injected leak reported as {found:?}");
    if violations == 0 && located {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn inaccessible_information() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let quarter = DensityMatrix::new(
        vec![4, 5],
        qdesc_core::pauli::Matrix::identity(4, 4) * Complex64::new(0.25, 0.0),
    );
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for k in 0..50 {
        let circ = build_teleportation(random_phi(&mut rng)).unwrap();
        let trace = run_with_trace(&circ).unwrap();
        worst = worst.max(reduced_density(trace.at(7).unwrap(), &[4, 5]).unwrap().max_abs_diff(&quarter));
        if numerical_dependence_check(&circ, 3, 7, "phi", 8, k).unwrap() {
            failures.push(format!("q3(7) depends on phi (draw {k})"));
        }
        if !numerical_dependence_check(&circ, 3, 9, "phi", 8, k).unwrap() {
            failures.push(format!("q3(9) independent of phi (draw {k})"));
        }
    }
    let detail = format!("50 phi, max |rho45(7) - 1/4| = {worst:.2e}, q3(7) independent, q3(9) dependent");
    if worst <= 1e-9 && failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", failures.join(", ")))
    }
}

fn telephone() -> Outcome {
    let phi = [0.9, 1.2, 2.5];
    let circ = build_telephone(phi, 3, true).unwrap();
    // wires: 1-5, E=6, E'=7, then (4',5')=(8,9), (4'',5'')=(10,11), (4''',5''')=(12,13)
    assert_eq!(circ.n(), 13);
    let trace = run_with_trace(&circ).unwrap();
    let last = trace.last();
    let d = diff_2x2(&reduced_density(last, &[3]).unwrap(), projector(psi_of(phi)));
    let od = diff_2x2(&partial_trace(&simulate(&circ).unwrap(), &[3]).unwrap(), projector(psi_of(phi)));
    let label = match_label(&trace, 3, trace.circuit.depth(), "Dx q2z q4z q8z q10z q12z", "Dz q3z q5z q9z q11z q13z");
    let records = match_label(&trace, 4, 8, "q4x q6x", "Dx q2z q3x q4z").is_some()
        && match_label(&trace, 5, 8, "q5x q7x", "Dz q2x q5z").is_some();
    let relays = match_label(&trace, 10, 10, "q10x", "Dx q2z q3x q4z q8z q10z").is_some();
    let detail = format!(
        "chain 3 + environment (13 wires): rho3 diff {d:.2e} (oracle {od:.2e}), final q3 label {}, record/relay labels {}",
        if label.is_some_and(|x| x <= 1e-12) { "matches" } else { "differs" },
        if records && relays { "match" } else { "differ" },
    );
    if d <= 1e-9 && od <= 1e-9 && label.is_some_and(|x| x <= 1e-12) && records && relays {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn eta_counterfactual() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut min_plain, mut max_rotated, mut min_desc) = (f64::INFINITY, 0.0f64, f64::INFINITY);
    for _ in 0..20 {
        let (alpha, beta) = random_amplitudes(&mut rng);
        let (eta1, eta2) = random_eta_pair(&mut rng);
        let plain = build_eta_experiment(alpha, beta, eta1, None).unwrap();
        min_plain = min_plain.min(eta_fidelity(alpha, beta, eta1, eta2, &plain).unwrap());
        let other = build_eta_experiment(alpha, beta, eta2, None).unwrap();
        let d = evolve(&plain).unwrap().descriptor(3).max_abs_diff(evolve(&other).unwrap().descriptor(3)).unwrap();
        min_desc = min_desc.min(d);
        let rotated = build_eta_experiment(alpha, beta, eta1, Some((Axis::X, FRAC_PI_3))).unwrap();
        max_rotated = max_rotated.max(eta_fidelity(alpha, beta, eta1, eta2, &rotated).unwrap());
    }
    let detail = format!(
        "20 draws: min fidelity without prerotation {min_plain:.12}, min q3(9) diff {min_desc:.2e}, max fidelity with X(pi/3) {max_rotated:.6}"
    );
    if min_plain >= 1.0 - 1e-9 && min_desc > 1e-9 && max_rotated < 1.0 - 1e-3 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Wire 1 most significant.
fn index(bits: [usize; 5]) -> usize {
    bits.iter().fold(0, |acc, b| (acc << 1) | b)
}

fn expected_milestone(t: usize, psi: [Complex64; 2]) -> StateVector {
    let mut amps = vec![c(0.0, 0.0); 32];
    let z = [psi[0], -psi[1]];
    let x = [psi[1], psi[0]];
    let xz = [-psi[1], psi[0]];
    let corrections = [(0, 0, psi), (1, 0, z), (0, 1, x), (1, 1, xz)];
    match t {
        3 => {
            // psi (x) Phi+ (x) |00>
            let r = FRAC_1_SQRT_2;
            for (a, amp) in psi.iter().enumerate() {
                amps[index([a, 0, 0, 0, 0])] += amp * r;
                amps[index([a, 1, 1, 0, 0])] += amp * r;
            }
        }
        _ => {
            for (a, b, bob) in corrections {
                let bob = if t == 9 { psi } else { bob };
                let rec = if t == 5 { (0, 0) } else { (a, b) };
                for (k, amp) in bob.iter().enumerate() {
                    amps[index([a, b, k, rec.0, rec.1])] += amp * 0.5;
                }
            }
        }
    }
    StateVector::from_amplitudes(5, amps).unwrap()
}

fn milestones() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 1.0f64;
    for _ in 0..20 {
        let phi = random_phi(&mut rng);
        let circ = build_teleportation(phi).unwrap();
        for t in [3, 5, 7, 9] {
            worst = worst.min(simulate_until(&circ, t).unwrap().fidelity(&expected_milestone(t, psi_of(phi))));
        }
    }
    let detail = format!("t = 3, 5, 7, 9 over 20 phi, min fidelity {worst:.15}");
    if worst >= 1.0 - 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn bell_witness() -> Outcome {
    let set = run_with_trace(&build_teleportation([0.4, 1.0, 2.0]).unwrap()).unwrap().at(3).unwrap().clone();
    let mut local = 0.0f64;
    for w in [2, 3] {
        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            local = local.max(set.descriptor(w).component(p).unwrap().expectation_zero().norm());
        }
    }
    let mut corr = Vec::new();
    for (p, sign) in [(Pauli::X, 1.0), (Pauli::Y, -1.0), (Pauli::Z, 1.0)] {
        let a = set.descriptor(2).component(p).unwrap();
        let b = set.descriptor(3).component(p).unwrap();
        corr.push(a.mul(&b).unwrap().expectation_zero() * sign);
    }
    let worst = corr.iter().map(|v| (v - c(1.0, 0.0)).norm()).fold(0.0, f64::max);
    let detail = format!("max |<local>| = {local:.1e}; q2x q3x, -q2y q3y, q2z q3z deviate from +1 by at most {worst:.1e}");
    if local <= 1e-12 && worst <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    let circuits = suite();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("teleportation fidelity", Box::new(teleportation_fidelity)),
        ("flow diagram labels", Box::new(annotated_labels)),
        ("step-wise vs global evolution", Box::new(|| step_vs_global(&circuits))),
        ("oracle equivalence", Box::new(|| oracle_equivalence(&circuits))),
        ("locality", Box::new(|| locality(&circuits))),
        ("locally inaccessible information", Box::new(inaccessible_information)),
        ("telephone robustness", Box::new(telephone)),
        ("eta counterfactual", Box::new(eta_counterfactual)),
        ("Schroedinger milestones", Box::new(milestones)),
        ("Bell-pair witness", Box::new(bell_witness)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
