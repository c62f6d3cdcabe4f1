//! Canned circuits (teleportation, telephone, eta counterfactual), random circuits for
//! differential testing, and claim-by-claim experiment reports.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    evolve, evolve_global, evolve_with, run_with_trace_using, ActionRules, Circuit, Descriptor, DescriptorSet,
    EngineError, FlowTrace, StandardRules,
};
use crate::gates::{euler_matrix, EtaPrep, GateError, GateInstance, GateKind};
use crate::oracle::{eta_fidelity, partial_trace, simulate, simulate_until, OracleError, StateVector};
use crate::pauli::{Pauli, PauliError, PauliSum};
use crate::provenance::{locality_audit, numerical_dependence_check, ComponentTags, LocalityViolation, DEFAULT_PROBES};
use crate::tomography::{component_product, reduced_density, DensityMatrix, TomographyError};

pub const REPORT_SCHEMA: &str = "qdesc-report/1";

/// Default tolerance for claims comparing numbers.
pub const CLAIM_TOLERANCE: f64 = 1e-9;

/// Fidelity below which two states count as distinguishable.
pub const DISTINGUISHABLE: f64 = 1.0 - 1e-3;

/// Widest circuit for which the differential check also runs the global picture
/// (one dense `2^n x 2^n` conjugation per descriptor component).
pub const GLOBAL_LIMIT: usize = 8;

/// Smallest phase separation between the two sampled etas.
pub const ETA_SEPARATION: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Tomography(#[from] TomographyError),
    #[error("unknown experiment '{0}' (expected teleport, telephone or eta)")]
    UnknownExperiment(String),
    #[error("invalid parameters: {0}")]
    Params(String),
}

impl From<GateError> for ExperimentError {
    fn from(e: GateError) -> Self {
        ExperimentError::Engine(e.into())
    }
}

impl From<PauliError> for ExperimentError {
    fn from(e: PauliError) -> Self {
        ExperimentError::Engine(e.into())
    }
}

/// Uniform over the Euler fundamental domain.
pub fn random_phi<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    [rng.gen_range(0.0..PI), rng.gen_range(0.0..=FRAC_PI_2), rng.gen_range(0.0..PI)]
}

/// Haar-random qubit state with `alpha >= 0`.
pub fn random_amplitudes<R: Rng + ?Sized>(rng: &mut R) -> (f64, Complex64) {
    let cos_theta: f64 = rng.gen_range(-1.0..=1.0);
    let half = cos_theta.acos() / 2.0;
    (half.cos(), Complex64::from_polar(half.sin(), rng.gen_range(0.0..2.0 * PI)))
}

/// Two unit-modulus etas whose phases differ by at least [`ETA_SEPARATION`] (mod 2 pi).
pub fn random_eta_pair<R: Rng + ?Sized>(rng: &mut R) -> (Complex64, Complex64) {
    let a = rng.gen_range(0.0..2.0 * PI);
    let d = rng.gen_range(ETA_SEPARATION..=2.0 * PI - ETA_SEPARATION);
    (Complex64::from_polar(1.0, a), Complex64::from_polar(1.0, a + d))
}

/// Teleportation steps 1..=7 around the given preparation on wire 1 at t=3.
fn teleport_head(prep: GateInstance) -> Result<Vec<GateInstance>, GateError> {
    Ok(vec![
        GateInstance::h(1, 2)?,
        GateInstance::cnot(2, 2, 3)?,
        prep,
        GateInstance::cnot(4, 1, 2)?,
        GateInstance::h(5, 1)?,
        GateInstance::cnot(6, 2, 5)?,
        GateInstance::cnot(7, 1, 4)?,
    ])
}

/// Five wires: 1 holds the prepared state, 2-3 the Bell pair, 4-5 the records.
pub fn build_teleportation(phi: [f64; 3]) -> Result<Circuit, ExperimentError> {
    let mut gates = teleport_head(GateInstance::prep(3, 1, phi)?)?;
    gates.push(GateInstance::cnot(8, 5, 3)?);
    gates.push(GateInstance::cz(9, 4, 3)?);
    Ok(Circuit::new(5, gates)?)
}

/// Wire assignment of a telephone circuit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TelephoneLayout {
    pub n: usize,
    /// `(E, E')`, coupled to records 4 and 5.
    pub environment: Option<(usize, usize)>,
    /// `(4^(j), 5^(j))` for `j = 1..=chain`.
    pub relays: Vec<(usize, usize)>,
    /// Times of the final controlled-X and controlled-Z on wire 3.
    pub correction_times: (usize, usize),
}

impl TelephoneLayout {
    pub fn new(chain: usize, decohere: bool) -> Self {
        let environment = decohere.then_some((6, 7));
        let base = if decohere { 8 } else { 6 };
        let relays: Vec<_> = (0..chain).map(|j| (base + 2 * j, base + 2 * j + 1)).collect();
        let first = 8 + usize::from(decohere) + chain;
        Self { n: base + 2 * chain - 1, environment, relays, correction_times: (first, first + 1) }
    }

    /// Final record pair feeding Bob's corrections.
    pub fn last_records(&self) -> (usize, usize) {
        self.relays.last().copied().unwrap_or((4, 5))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TelephoneOptions {
    pub chain: usize,
    pub decohere: bool,
    /// Random Clifford gates on the environment during steps 1..=7, seeded.
    pub scramble: Option<u64>,
}

pub fn build_telephone(phi: [f64; 3], chain: usize, decohere: bool) -> Result<Circuit, ExperimentError> {
    build_telephone_with(phi, &TelephoneOptions { chain, decohere, scramble: None })
}

pub fn build_telephone_with(phi: [f64; 3], opts: &TelephoneOptions) -> Result<Circuit, ExperimentError> {
    let layout = TelephoneLayout::new(opts.chain, opts.decohere);
    let mut gates = teleport_head(GateInstance::prep(3, 1, phi)?)?;
    let mut t = 8;
    if let Some((e1, e2)) = layout.environment {
        if let Some(seed) = opts.scramble {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for step in 1..=7 {
                gates.push(random_clifford(step, e1, e2, &mut rng)?);
            }
        }
        gates.push(GateInstance::cnot(t, 4, e1)?);
        gates.push(GateInstance::cnot(t, 5, e2)?);
        t += 1;
    } else if opts.scramble.is_some() {
        return Err(ExperimentError::Params("scramble needs decohere".into()));
    }
    let mut prev = (4, 5);
    for &(r4, r5) in &layout.relays {
        gates.push(GateInstance::cnot(t, prev.0, r4)?);
        gates.push(GateInstance::cnot(t, prev.1, r5)?);
        prev = (r4, r5);
        t += 1;
    }
    gates.push(GateInstance::cnot(t, prev.1, 3)?);
    gates.push(GateInstance::cz(t + 1, prev.0, 3)?);
    Ok(Circuit::new(layout.n, gates)?)
}

fn random_clifford<R: Rng + ?Sized>(t: usize, a: usize, b: usize, rng: &mut R) -> Result<GateInstance, GateError> {
    let (p, q) = if rng.gen() { (a, b) } else { (b, a) };
    match rng.gen_range(0..5) {
        0 => GateInstance::h(t, p),
        1 => GateInstance::x(t, p),
        2 => GateInstance::z(t, p),
        3 => GateInstance::cnot(t, p, q),
        _ => GateInstance::cz(t, p, q),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn pauli(self) -> Pauli {
        match self {
            Axis::X => Pauli::X,
            Axis::Y => Pauli::Y,
            Axis::Z => Pauli::Z,
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            _ => Err(format!("unknown axis '{s}'")),
        }
    }
}

/// `exp(-i angle/2 sigma)` on one wire.
pub fn rotation(axis: Axis, angle: f64) -> PauliSum {
    let id = PauliSum::identity(1).expect("width 1");
    let s = PauliSum::single(1, 1, axis.pauli()).expect("width 1");
    id.scale((angle / 2.0).cos().into())
        .add(&s.scale(Complex64::new(0.0, -(angle / 2.0).sin())))
        .expect("same width")
}

/// Teleportation with the eta-form preparation, optionally preceded (t=2) by a rotation of wire 1.
pub fn build_eta_experiment(
    alpha: f64,
    beta: Complex64,
    eta: Complex64,
    prerotation: Option<(Axis, f64)>,
) -> Result<Circuit, ExperimentError> {
    let prep = GateInstance::prep_eta(3, 1, EtaPrep::new(alpha, beta, eta)?)?;
    let mut gates = teleport_head(prep)?;
    if let Some((axis, angle)) = prerotation {
        gates.push(GateInstance::raw(2, vec![1], rotation(axis, angle))?);
    }
    gates.push(GateInstance::cnot(8, 5, 3)?);
    gates.push(GateInstance::cz(9, 4, 3)?);
    Ok(Circuit::new(5, gates)?)
}

/// Random circuit over all gate kinds. Each step holds one gate, sometimes two on
/// disjoint wires. Non-Clifford gates are kept to roughly a quarter of all gates.
pub fn random_circuit<R: Rng + ?Sized>(n: usize, depth: usize, rng: &mut R) -> Result<Circuit, ExperimentError> {
    let mut gates = Vec::new();
    let mut wires: Vec<usize> = (1..=n).collect();
    for t in 1..=depth {
        wires.shuffle(rng);
        let mut free = &wires[..];
        let count = if n >= 3 && rng.gen_bool(0.3) { 2 } else { 1 };
        for _ in 0..count {
            let (g, used) = random_gate(t, free, rng)?;
            gates.push(g);
            free = &free[used..];
            if free.is_empty() {
                break;
            }
        }
    }
    Ok(Circuit::new(n, gates)?)
}

fn random_gate<R: Rng + ?Sized>(t: usize, free: &[usize], rng: &mut R) -> Result<(GateInstance, usize), ExperimentError> {
    let two = free.len() >= 2;
    let pick = loop {
        let k = rng.gen_range(0..12);
        if two || !matches!(k, 3 | 4 | 5 | 11) {
            break k;
        }
    };
    let (a, b) = (free[0], free.get(1).copied().unwrap_or(0));
    let paulis = [Pauli::X, Pauli::Y, Pauli::Z];
    let g = match pick {
        0 | 6 => (GateInstance::h(t, a)?, 1),
        1 => (GateInstance::x(t, a)?, 1),
        2 => (GateInstance::z(t, a)?, 1),
        3 | 4 => (GateInstance::cnot(t, a, b)?, 2),
        5 => (GateInstance::cz(t, a, b)?, 2),
        7 => {
            let phi = random_phi(rng);
            let mut g = GateInstance::prep(t, a, phi)?;
            if let GateKind::Prep(p) = &mut g.kind {
                p.id = format!("p{t}");
            }
            (g, 1)
        }
        8 => {
            let (alpha, beta) = random_amplitudes(rng);
            let eta = Complex64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI));
            let p = EtaPrep::new(alpha, beta, eta)?.with_ids(format!("s{t}"), format!("e{t}"));
            (GateInstance::prep_eta(t, a, p)?, 1)
        }
        9 | 10 => {
            let p = *paulis.choose(rng).expect("non-empty");
            (GateInstance::raw(t, vec![a], exp_pauli(&[p], rng.gen_range(0.0..PI)))?, 1)
        }
        _ => {
            let p = *paulis.choose(rng).expect("non-empty");
            let q = *paulis.choose(rng).expect("non-empty");
            (GateInstance::raw(t, vec![a, b], exp_pauli(&[p, q], rng.gen_range(0.0..PI)))?, 2)
        }
    };
    Ok(g)
}

/// `exp(-i theta P)` for the tensor product `P` of `factors` on local wires `1..`.
pub fn exp_pauli(factors: &[Pauli], theta: f64) -> PauliSum {
    let k = factors.len();
    let local: Vec<_> = factors.iter().enumerate().map(|(i, &p)| (i + 1, p)).collect();
    let p = crate::pauli::PauliString::from_factors(k, &local).expect("valid factors").to_sum();
    PauliSum::identity(k)
        .expect("valid width")
        .scale(theta.cos().into())
        .add(&p.scale(Complex64::new(0.0, -theta.sin())))
        .expect("same width")
}

/// Outcome of comparing the step-wise engine against the global picture and the dense oracle.
#[derive(Debug, Clone, Serialize)]
pub struct DifferentialReport {
    pub wires: usize,
    pub gates: usize,
    /// Largest coefficient difference between step-wise and global evolution, if the
    /// circuit is narrow enough for the dense unitary.
    pub step_vs_global: Option<f64>,
    /// Largest entry difference over all 1- and 2-wire reduced density matrices.
    pub density_vs_oracle: f64,
    pub worst_subset: Vec<usize>,
    pub locality_violations: Vec<LocalityViolation>,
    pub passed: bool,
}

pub fn differential_check(circuit: &Circuit) -> Result<DifferentialReport, ExperimentError> {
    differential_check_with(circuit, &StandardRules)
}

pub fn differential_check_with(circuit: &Circuit, rules: &dyn ActionRules) -> Result<DifferentialReport, ExperimentError> {
    let trace = run_with_trace_using(circuit, rules)?;
    let last = trace.last();
    let step_vs_global = if circuit.n() <= GLOBAL_LIMIT {
        Some(evolve_global(circuit)?.max_abs_diff(last)?)
    } else {
        None
    };
    let psi = simulate(circuit)?;
    let mut worst = (0.0, Vec::new());
    let n = circuit.n();
    let subsets = (1..=n).map(|a| vec![a]).chain((1..=n).flat_map(|a| (a + 1..=n).map(move |b| vec![a, b])));
    for s in subsets {
        let d = reduced_density(last, &s)?.max_abs_diff(&partial_trace(&psi, &s)?);
        if d > worst.0 || worst.1.is_empty() {
            worst = (d, s);
        }
    }
    let locality_violations = locality_audit(&trace);
    let passed = step_vs_global.is_none_or(|d| d <= CLAIM_TOLERANCE)
        && worst.0 <= CLAIM_TOLERANCE
        && locality_violations.is_empty();
    Ok(DifferentialReport {
        wires: n,
        gates: circuit.gates().len(),
        step_vs_global,
        density_vs_oracle: worst.0,
        worst_subset: worst.1,
        locality_violations,
        passed,
    })
}

/// Factor of a descriptor label: a time-3 wire-1 component, or a time-0 operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Dx,
    Dz,
    Q(usize, Pauli),
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::Dx => write!(f, "Dx"),
            Factor::Dz => write!(f, "Dz"),
            Factor::Q(w, p) => write!(f, "q{w}{}", format!("{p:?}").to_lowercase()),
        }
    }
}

/// Annotated descriptor value `q_wire(time) = (x-product, z-product)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Label {
    pub wire: usize,
    pub time: usize,
    pub x: Vec<Factor>,
    pub z: Vec<Factor>,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |fs: &[Factor]| fs.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
        write!(f, "q{}({}) = ({}, {})", self.wire, self.time, join(&self.x), join(&self.z))
    }
}

impl Label {
    /// Expected components, with `Dx`, `Dz` taken from `d` (wire 1 right after preparation).
    pub fn expected(&self, n: usize, d: &Descriptor) -> Result<(PauliSum, PauliSum), PauliError> {
        let build = |fs: &[Factor]| -> Result<PauliSum, PauliError> {
            let mut acc = PauliSum::identity(n)?;
            for f in fs {
                let term = match f {
                    Factor::Dx => d.x().clone(),
                    Factor::Dz => d.z().clone(),
                    Factor::Q(w, p) => PauliSum::single(n, *w, *p)?,
                };
                acc = acc.mul(&term)?;
            }
            Ok(acc)
        };
        Ok((build(&self.x)?, build(&self.z)?))
    }
}

fn label(wire: usize, time: usize, x: &[Factor], z: &[Factor]) -> Label {
    Label { wire, time, x: x.to_vec(), z: z.to_vec() }
}

/// Every annotated descriptor of the teleportation flow diagram: the five initial
/// descriptors and the value each gate leaves on the wires it touches.
pub fn teleport_labels() -> Vec<Label> {
    use Factor::{Dx, Dz, Q};
    use Pauli::{X, Z};
    let mut out: Vec<Label> = (1..=5).map(|w| label(w, 0, &[Q(w, X)], &[Q(w, Z)])).collect();
    out.extend([
        label(2, 1, &[Q(2, Z)], &[Q(2, X)]),
        label(2, 2, &[Q(2, Z), Q(3, X)], &[Q(2, X)]),
        label(3, 2, &[Q(3, X)], &[Q(2, X), Q(3, Z)]),
        label(1, 3, &[Dx], &[Dz]),
        label(1, 4, &[Dx, Q(2, Z), Q(3, X)], &[Dz]),
        label(2, 4, &[Q(2, Z), Q(3, X)], &[Dz, Q(2, X)]),
        label(1, 5, &[Dz], &[Dx, Q(2, Z), Q(3, X)]),
        label(2, 6, &[Q(2, Z), Q(3, X), Q(5, X)], &[Dz, Q(2, X)]),
        label(5, 6, &[Q(5, X)], &[Dz, Q(2, X), Q(5, Z)]),
        label(1, 7, &[Dz, Q(4, X)], &[Dx, Q(2, Z), Q(3, X)]),
        label(4, 7, &[Q(4, X)], &[Dx, Q(2, Z), Q(3, X), Q(4, Z)]),
        label(3, 8, &[Q(3, X)], &[Dz, Q(3, Z), Q(5, Z)]),
        label(3, 9, &[Dx, Q(2, Z), Q(4, Z)], &[Dz, Q(3, Z), Q(5, Z)]),
    ]);
    out
}

/// Final wire-3 label of a telephone: the record Z-factors of every relay.
pub fn telephone_final_label(layout: &TelephoneLayout) -> Label {
    use Factor::{Dx, Dz, Q};
    use Pauli::Z;
    let mut x = vec![Dx, Q(2, Z), Q(4, Z)];
    let mut z = vec![Dz, Q(3, Z), Q(5, Z)];
    for &(r4, r5) in &layout.relays {
        x.push(Q(r4, Z));
        z.push(Q(r5, Z));
    }
    Label { wire: 3, time: layout.correction_times.1, x, z }
}

/// Max coefficient difference between a label and the trace, or `None` if the Pauli
/// term structure differs.
pub fn check_label(trace: &FlowTrace, l: &Label) -> Result<Option<f64>, ExperimentError> {
    let set = trace
        .at(l.time)
        .ok_or_else(|| ExperimentError::Params(format!("trace has no step {}", l.time)))?;
    let d = trace.at(3).unwrap_or(set).descriptor(1);
    let (x, z) = l.expected(set.n(), d)?;
    let got = set.descriptor(l.wire);
    if !got.x().same_structure(&x, 0.0) || !got.z().same_structure(&z, 0.0) {
        return Ok(None);
    }
    Ok(Some(got.x().max_abs_diff(&x)?.max(got.z().max_abs_diff(&z)?)))
}

/// `U|0>` for the Euler preparation.
pub fn prepared_state(phi: [f64; 3]) -> [Complex64; 2] {
    let u = euler_matrix(phi);
    [u[(0, 0)], u[(1, 0)]]
}

fn branch(op: (bool, bool), psi: [Complex64; 2]) -> [Complex64; 2] {
    // (a, b) -> Z^a applied first, then X^b: I, Z, X, XZ
    let [a0, a1] = psi;
    let after_z = if op.0 { [a0, -a1] } else { [a0, a1] };
    if op.1 {
        [after_z[1], after_z[0]]
    } else {
        after_z
    }
}

fn idx5(bits: [usize; 5]) -> usize {
    bits.iter().fold(0, |acc, b| (acc << 1) | b)
}

/// Expected teleportation state at t = 3, 5, 7, 9 on wires 1..5 (wire 1 most significant).
pub fn milestone_state(time: usize, psi: [Complex64; 2]) -> Result<StateVector, ExperimentError> {
    let mut amps = vec![Complex64::new(0.0, 0.0); 32];
    let half = Complex64::new(0.5, 0.0);
    match time {
        3 => {
            // Bell basis on (1, 2): Phi+, Phi-, Psi+, Psi- carry I, Z, X, XZ on wire 3
            let r = FRAC_1_SQRT_2;
            let bells: [([(usize, usize, f64); 2], (bool, bool)); 4] = [
                ([(0, 0, r), (1, 1, r)], (false, false)),
                ([(0, 0, r), (1, 1, -r)], (true, false)),
                ([(0, 1, r), (1, 0, r)], (false, true)),
                ([(0, 1, r), (1, 0, -r)], (true, true)),
            ];
            for (pairs, op) in bells {
                let bob = branch(op, psi);
                for (a, b, c) in pairs {
                    for (k, amp) in bob.iter().enumerate() {
                        amps[idx5([a, b, k, 0, 0])] += half * c * amp;
                    }
                }
            }
        }
        5 | 7 | 9 => {
            for a in 0..2 {
                for b in 0..2 {
                    let bob = if time == 9 { psi } else { branch((a == 1, b == 1), psi) };
                    let (ra, rb) = if time == 5 { (0, 0) } else { (a, b) };
                    for (k, amp) in bob.iter().enumerate() {
                        amps[idx5([a, b, k, ra, rb])] += half * amp;
                    }
                }
            }
        }
        _ => return Err(ExperimentError::Params(format!("no milestone state at t={time}"))),
    }
    Ok(StateVector::from_amplitudes(5, amps)?)
}

/// One checked claim of an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct Claim {
    pub id: String,
    pub description: String,
    pub expected: String,
    pub observed: String,
    pub tolerance: f64,
    pub pass: bool,
    /// Time step the claim concerns, if any.
    pub step: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub time: usize,
    pub wire: usize,
    pub x: String,
    pub z: String,
    pub tags: ComponentTags,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub schema: &'static str,
    pub experiment: String,
    pub timestamp: u64,
    pub parameters: serde_json::Value,
    pub claims: Vec<Claim>,
    pub passed: bool,
    pub trace: Vec<TraceRow>,
}

impl ExperimentReport {
    pub fn failures(&self) -> impl Iterator<Item = &Claim> {
        self.claims.iter().filter(|c| !c.pass)
    }
}

/// Inputs for [`run_experiment`]. Anything left unset is drawn from `seed`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentParams {
    pub phi: Option<[f64; 3]>,
    pub alpha: Option<f64>,
    pub beta: Option<[f64; 2]>,
    pub eta: Option<[f64; 2]>,
    pub eta2: Option<[f64; 2]>,
    pub chain: usize,
    pub decohere: bool,
    pub scramble: bool,
    pub prerotation: Option<(Axis, f64)>,
    /// Perturbation probes for numerical dependence checks; 0 means the default.
    pub probes: usize,
    pub seed: u64,
}

impl ExperimentParams {
    fn probes(&self) -> usize {
        if self.probes == 0 {
            DEFAULT_PROBES
        } else {
            self.probes
        }
    }
}

struct Claims {
    list: Vec<Claim>,
}

impl Claims {
    fn check(
        &mut self,
        id: impl Into<String>,
        description: &str,
        expected: impl Into<String>,
        tolerance: f64,
        step: Option<usize>,
        eval: impl FnOnce() -> Result<(String, bool), ExperimentError>,
    ) {
        let (observed, pass) = eval().unwrap_or_else(|e| (format!("error: {e}"), false));
        self.list.push(Claim {
            id: id.into(),
            description: description.to_string(),
            expected: expected.into(),
            observed,
            tolerance,
            pass,
            step,
        });
    }
}

pub fn run_experiment(name: &str, params: &ExperimentParams) -> Result<ExperimentReport, ExperimentError> {
    run_experiment_with(name, params, &StandardRules)
}

/// Like [`run_experiment`] but evolving descriptors with custom gate rules (fault injection).
pub fn run_experiment_with(
    name: &str,
    params: &ExperimentParams,
    rules: &dyn ActionRules,
) -> Result<ExperimentReport, ExperimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut claims = Claims { list: Vec::new() };
    let (bindings, trace) = match name {
        "teleport" => {
            let phi = params.phi.unwrap_or_else(|| random_phi(&mut rng));
            let circuit = build_teleportation(phi)?;
            let trace = run_with_trace_using(&circuit, rules)?;
            teleport_claims(&mut claims, &circuit, &trace, phi, params, rules);
            (serde_json::json!({ "phi": phi, "seed": params.seed }), trace)
        }
        "telephone" => {
            let phi = params.phi.unwrap_or_else(|| random_phi(&mut rng));
            let opts = TelephoneOptions {
                chain: params.chain,
                decohere: params.decohere,
                scramble: params.scramble.then_some(params.seed),
            };
            let circuit = build_telephone_with(phi, &opts)?;
            let trace = run_with_trace_using(&circuit, rules)?;
            telephone_claims(&mut claims, &trace, phi, &opts, rules);
            (
                serde_json::json!({
                    "phi": phi, "chain": opts.chain, "decohere": opts.decohere,
                    "scramble": params.scramble, "seed": params.seed,
                }),
                trace,
            )
        }
        "eta" => {
            let (alpha, beta) = match (params.alpha, params.beta, params.phi) {
                (Some(a), Some(b), _) => (a, Complex64::new(b[0], b[1])),
                (None, None, Some(phi)) => {
                    let p = EtaPrep::from_euler(phi);
                    (p.alpha, p.beta)
                }
                (None, None, None) => random_amplitudes(&mut rng),
                _ => return Err(ExperimentError::Params("alpha and beta must be given together".into())),
            };
            let (e1, e2) = random_eta_pair(&mut rng);
            let eta1 = params.eta.map_or(e1, |e| Complex64::new(e[0], e[1]));
            let eta2 = params.eta2.map_or(eta1 * (e2 / e1), |e| Complex64::new(e[0], e[1]));
            let circuit = build_eta_experiment(alpha, beta, eta1, params.prerotation)?;
            let trace = run_with_trace_using(&circuit, rules)?;
            eta_claims(&mut claims, &circuit, &trace, alpha, beta, eta1, eta2, params, rules);
            (
                serde_json::json!({
                    "alpha": alpha, "beta": [beta.re, beta.im],
                    "eta": [eta1.re, eta1.im], "eta2": [eta2.re, eta2.im],
                    "prerotation": params.prerotation, "seed": params.seed,
                }),
                trace,
            )
        }
        other => return Err(ExperimentError::UnknownExperiment(other.to_string())),
    };
    let passed = claims.list.iter().all(|c| c.pass);
    Ok(ExperimentReport {
        schema: REPORT_SCHEMA,
        experiment: name.to_string(),
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        parameters: bindings,
        claims: claims.list,
        passed,
        trace: trace_rows(&trace),
    })
}

pub fn trace_rows(trace: &FlowTrace) -> Vec<TraceRow> {
    let mut rows = Vec::new();
    for (t, snap) in trace.snapshots.iter().enumerate() {
        for d in snap.descriptors() {
            rows.push(TraceRow {
                time: t,
                wire: d.wire(),
                x: d.x().to_string(),
                z: d.z().to_string(),
                tags: trace.tags[t][d.wire() - 1].clone(),
            });
        }
    }
    rows
}

fn fmt_diff(d: f64) -> String {
    format!("max |diff| = {d:.3e}")
}

fn label_claims(claims: &mut Claims, trace: &FlowTrace, labels: &[Label]) {
    for l in labels {
        claims.check(
            format!("label.q{}({})", l.wire, l.time),
            "descriptor matches the annotated Pauli-term structure",
            l.to_string(),
            1e-12,
            Some(l.time),
            || {
                Ok(match check_label(trace, l)? {
                    None => {
                        let got = trace.at(l.time).map(|s| s.descriptor(l.wire).clone());
                        let shown = got.map_or("missing".into(), |d| format!("({}, {})", d.x(), d.z()));
                        (format!("structure differs at step {}: {shown}", l.time), false)
                    }
                    Some(d) => (fmt_diff(d), d <= 1e-12),
                })
            },
        );
    }
}

fn rho_claim(claims: &mut Claims, id: &str, description: &str, rho: Result<DensityMatrix, ExperimentError>, target: &DensityMatrix, step: usize) {
    claims.check(id, description, "|psi><psi|", CLAIM_TOLERANCE, Some(step), || {
        let d = rho?.max_abs_diff(target);
        Ok((fmt_diff(d), d <= CLAIM_TOLERANCE))
    });
}

fn locality_claim(claims: &mut Claims, trace: &FlowTrace) {
    let v = locality_audit(trace);
    let step = v.first().map(|x| x.time);
    claims.check("locality", "untouched wires keep identical descriptors", "no violations", 0.0, step, || {
        let shown: Vec<_> = v.iter().map(|x| format!("wire {} at step {}", x.wire, x.time)).collect();
        Ok((if shown.is_empty() { "none".into() } else { shown.join(", ") }, v.is_empty()))
    });
}

fn teleport_claims(
    claims: &mut Claims,
    circuit: &Circuit,
    trace: &FlowTrace,
    phi: [f64; 3],
    params: &ExperimentParams,
    rules: &dyn ActionRules,
) {
    let psi = prepared_state(phi);
    let target = DensityMatrix::pure(vec![3], &psi);
    let last = trace.last();
    label_claims(claims, trace, &teleport_labels());
    rho_claim(claims, "rho3.final", "Bob's reduced state equals the prepared state", reduced_density(last, &[3]).map_err(Into::into), &target, 9);
    rho_claim(
        claims,
        "rho3.final.oracle",
        "dense oracle agrees on Bob's reduced state",
        simulate(circuit).map_err(Into::into).and_then(|s| Ok(partial_trace(&s, &[3])?)),
        &target,
        9,
    );
    for (name, p) in [("x", Pauli::X), ("y", Pauli::Y), ("z", Pauli::Z)] {
        claims.check(format!("expectation.{name}"), "<q3(9)> equals <q1(3)>", "equal", CLAIM_TOLERANCE, Some(9), || {
            let t3 = trace.at(3).ok_or_else(|| ExperimentError::Params("short trace".into()))?;
            let a = last.descriptor(3).component(p)?.expectation_zero();
            let b = t3.descriptor(1).component(p)?.expectation_zero();
            let d = (a - b).norm();
            Ok((format!("{a:.12} vs {b:.12}"), d <= CLAIM_TOLERANCE))
        });
    }
    claims.check("bell.witness", "Bell pair at t=3: local components average 0, correlators are +1", "0 and +1", 1e-12, Some(3), || {
        let t3 = trace.at(3).ok_or_else(|| ExperimentError::Params("short trace".into()))?;
        let (obs, pass) = bell_witness(t3)?;
        Ok((obs, pass))
    });
    locality_claim(claims, trace);
    claims.check("step_vs_global", "step-wise and global evolution agree", "equal", CLAIM_TOLERANCE, Some(9), || {
        let d = evolve_global(circuit)?.max_abs_diff(&evolve_with(circuit, rules)?)?;
        Ok((fmt_diff(d), d <= CLAIM_TOLERANCE))
    });
    claims.check("inaccessible.rho45", "records are maximally mixed at t=7", "1/4", CLAIM_TOLERANCE, Some(7), || {
        let t7 = trace.at(7).ok_or_else(|| ExperimentError::Params("short trace".into()))?;
        let d = reduced_density(t7, &[4, 5])?.max_abs_diff(&DensityMatrix::maximally_mixed(vec![4, 5]));
        Ok((fmt_diff(d), d <= CLAIM_TOLERANCE))
    });
    claims.check("inaccessible.tags", "at t=7 records carry phi and q3 carries nothing", "q3 {} / q4, q5 {phi}", 0.0, Some(7), || {
        let tags = trace.tags.get(7).ok_or_else(|| ExperimentError::Params("short trace".into()))?;
        let ok = tags[2].union().is_empty() && tags[3].contains("phi") && tags[4].contains("phi");
        Ok((format!("q3 {:?}, q4 {:?}, q5 {:?}", tags[2].union(), tags[3].union(), tags[4].union()), ok))
    });
    let probes = params.probes();
    claims.check("inaccessible.q3_t7", "q3(7) is numerically independent of phi", "independent", CLAIM_TOLERANCE, Some(7), || {
        let dep = numerical_dependence_check(circuit, 3, 7, "phi", probes, params.seed)?;
        Ok((if dep { "dependent" } else { "independent" }.into(), !dep))
    });
    claims.check("inaccessible.q3_t9", "q3(9) depends on phi", "dependent", CLAIM_TOLERANCE, Some(9), || {
        let dep = numerical_dependence_check(circuit, 3, 9, "phi", probes, params.seed)?;
        Ok((if dep { "dependent" } else { "independent" }.into(), dep))
    });
    for t in [3, 5, 7, 9] {
        claims.check(format!("milestone.t{t}"), "oracle state matches the branch expansion", ">= 1 - 1e-9 fidelity", CLAIM_TOLERANCE, Some(t), || {
            let f = simulate_until(circuit, t)?.fidelity(&milestone_state(t, psi)?);
            Ok((format!("fidelity {f:.12}"), f >= 1.0 - CLAIM_TOLERANCE))
        });
    }
}

/// Expectations of the six local components and the three Bell correlators on wires 2, 3.
pub fn bell_witness(set: &DescriptorSet) -> Result<(String, bool), ExperimentError> {
    let mut worst = 0.0f64;
    for w in [2, 3] {
        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            worst = worst.max(set.descriptor(w).component(p)?.expectation_zero().norm());
        }
    }
    let mut corr = Vec::new();
    for (p, sign) in [(Pauli::X, 1.0), (Pauli::Y, -1.0), (Pauli::Z, 1.0)] {
        let e = component_product(set, &[(2, p), (3, p)])?.expectation_zero() * sign;
        corr.push(e);
    }
    let pass = worst <= 1e-12 && corr.iter().all(|c| (c - Complex64::new(1.0, 0.0)).norm() <= 1e-12);
    let shown: Vec<_> = corr.iter().map(|c| format!("{:.12}", c.re)).collect();
    Ok((format!("max |<local>| = {worst:.1e}; correlators {}", shown.join(", ")), pass))
}

fn telephone_claims(
    claims: &mut Claims,
    trace: &FlowTrace,
    phi: [f64; 3],
    opts: &TelephoneOptions,
    rules: &dyn ActionRules,
) {
    let layout = TelephoneLayout::new(opts.chain, opts.decohere);
    let circuit = &trace.circuit;
    let target = DensityMatrix::pure(vec![3], &prepared_state(phi));
    let last = trace.last();
    let end = layout.correction_times.1;
    rho_claim(claims, "rho3.final", "Bob's reduced state equals the prepared state", reduced_density(last, &[3]).map_err(Into::into), &target, end);
    rho_claim(
        claims,
        "rho3.final.oracle",
        "dense oracle agrees on Bob's reduced state",
        simulate(circuit).map_err(Into::into).and_then(|s| Ok(partial_trace(&s, &[3])?)),
        &target,
        end,
    );
    if opts.scramble.is_none() {
        label_claims(claims, trace, &[telephone_final_label(&layout)]);
    }
    locality_claim(claims, trace);
    if let Some((e1, e2)) = layout.environment {
        let env_mask = (1u64 << (e1 - 1)) | (1u64 << (e2 - 1));
        let coupled = 8;
        claims.check("environment.records", "records' x-components pick up the environment's x-components", "q4x, q5x supported on E, E'", 0.0, Some(coupled), || {
            let set = trace.at(coupled).ok_or_else(|| ExperimentError::Params("short trace".into()))?;
            let s4 = set.descriptor(4).x().support();
            let s5 = set.descriptor(5).x().support();
            let ok = s4 & (1 << (e1 - 1)) != 0 && s5 & (1 << (e2 - 1)) != 0;
            Ok((format!("q4x support {s4:#b}, q5x support {s5:#b}"), ok))
        });
        claims.check("environment.bob", "no environment operator reaches wire 3", "no support on E, E'", 0.0, Some(end), || {
            let bad = trace
                .snapshots
                .iter()
                .position(|s| (s.descriptor(3).x().support() | s.descriptor(3).z().support()) & env_mask != 0);
            Ok((bad.map_or("none".into(), |t| format!("support on E/E' at step {t}")), bad.is_none()))
        });
        claims.check("environment.robust", "decoherence changes neither Bob's tags nor Bob's state", "identical to the undisturbed telephone", CLAIM_TOLERANCE, Some(end), || {
            let clean = build_telephone(phi, opts.chain, false)?;
            let clean_trace = run_with_trace_using(&clean, rules)?;
            let tags_same = clean_trace.tags.last().map(|t| t[2].clone()) == trace.tags.last().map(|t| t[2].clone());
            let d = reduced_density(clean_trace.last(), &[3])?.max_abs_diff(&reduced_density(last, &[3])?);
            Ok((format!("tags equal: {tags_same}; {}", fmt_diff(d)), tags_same && d <= CLAIM_TOLERANCE))
        });
    }
}

#[allow(clippy::too_many_arguments)]
fn eta_claims(
    claims: &mut Claims,
    circuit: &Circuit,
    trace: &FlowTrace,
    alpha: f64,
    beta: Complex64,
    eta1: Complex64,
    eta2: Complex64,
    params: &ExperimentParams,
    rules: &dyn ActionRules,
) {
    let hidden = params.prerotation.is_none_or(|(axis, _)| axis == Axis::Z);
    let (expected, desc) = if hidden {
        (">= 1 - 1e-9", "global states for the two etas agree up to phase")
    } else {
        ("< 1 - 1e-3", "prerotated wire makes eta visible in the global state")
    };
    claims.check("eta.global", desc, expected, CLAIM_TOLERANCE, Some(9), || {
        let f = eta_fidelity(alpha, beta, eta1, eta2, circuit)?;
        let pass = if hidden { f >= 1.0 - CLAIM_TOLERANCE } else { f < DISTINGUISHABLE };
        Ok((format!("fidelity {f:.12}"), pass))
    });
    claims.check("eta.descriptor", "q3(9) differs between the two etas", "> 1e-9", CLAIM_TOLERANCE, Some(9), || {
        let other = with_eta(circuit, eta2)?;
        let d = evolve_with(&other, rules)?.descriptor(3).max_abs_diff(trace.last().descriptor(3))?;
        Ok((fmt_diff(d), d > CLAIM_TOLERANCE))
    });
    claims.check("eta.dependence", "q3(9) numerically depends on eta", "dependent", CLAIM_TOLERANCE, Some(9), || {
        let dep = numerical_dependence_check(circuit, 3, 9, "eta", params.probes(), params.seed)?;
        Ok((if dep { "dependent" } else { "independent" }.into(), dep))
    });
    if params.prerotation.is_none() {
        let target = DensityMatrix::pure(vec![3], &[Complex64::new(alpha, 0.0), beta]);
        rho_claim(claims, "rho3.final", "Bob's reduced state equals the prepared state", reduced_density(trace.last(), &[3]).map_err(Into::into), &target, 9);
    }
    locality_claim(claims, trace);
}

/// Copy of `circuit` with every eta-form preparation using `eta`.
pub fn with_eta(circuit: &Circuit, eta: Complex64) -> Result<Circuit, ExperimentError> {
    Ok(circuit.map_gates(|g| {
        let mut g = g.clone();
        if let GateKind::PrepEta(p) = &mut g.kind {
            p.eta = eta;
        }
        g
    })?)
}

/// Deliberately broken gate rules for fault-injection tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Gates at this step leave descriptors unchanged.
    SkipStep(usize),
    /// Gates at this step also swap the components of an untouched wire.
    Leak { step: usize, wire: usize },
}

impl ActionRules for Fault {
    fn apply(&self, gate: &GateInstance, set: &DescriptorSet) -> Result<Vec<Descriptor>, GateError> {
        match *self {
            Fault::SkipStep(t) if gate.time == t => {
                Ok(gate.wires.iter().map(|&w| set.descriptor(w).clone()).collect())
            }
            Fault::Leak { step, wire } if gate.time == step && !gate.touches(wire) => {
                let mut out = StandardRules.apply(gate, set)?;
                let d = set.descriptor(wire);
                out.push(d.with_components(d.z_arc(), d.x_arc()));
                Ok(out)
            }
            _ => StandardRules.apply(gate, set),
        }
    }
}

/// Evolves `circuit` and returns the final descriptors; shorthand used by bindings.
pub fn final_descriptors(circuit: &Circuit) -> Result<DescriptorSet, ExperimentError> {
    Ok(evolve(circuit)?)
}
