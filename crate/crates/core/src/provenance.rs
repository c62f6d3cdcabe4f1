//! Parameter provenance and locality audits over flow traces.
//!
//! Structural tags follow the component flow of each gate: a component's tag is the
//! union of the tags of the input components it is built from, plus the gate's own
//! parameters. Tags over-approximate true dependence; the numerical check perturbs
//! parameters and re-runs the evolution to ground-truth them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{evolve, run_with_trace, Circuit, EngineError, FlowTrace};
use crate::gates::{GateInstance, GateKind};
use crate::tomography::bloch_components;

/// Change in any coefficient above this counts as numerical dependence.
pub const DEPENDENCE_TOLERANCE: f64 = 1e-9;

pub const DEFAULT_PROBES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    X,
    Z,
}

pub type Tags = BTreeSet<String>;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ComponentTags {
    pub x: Tags,
    pub z: Tags,
}

impl ComponentTags {
    pub fn get(&self, c: Component) -> &Tags {
        match c {
            Component::X => &self.x,
            Component::Z => &self.z,
        }
    }

    fn get_mut(&mut self, c: Component) -> &mut Tags {
        match c {
            Component::X => &mut self.x,
            Component::Z => &mut self.z,
        }
    }

    pub fn union(&self) -> Tags {
        self.x.union(&self.z).cloned().collect()
    }

    pub fn contains(&self, param: &str) -> bool {
        self.x.contains(param) || self.z.contains(param)
    }
}

/// `tags[time][wire - 1]`.
pub type TagTable = Vec<Vec<ComponentTags>>;

/// A data flow `(from_wire, from_component) -> (to_wire, to_component)` across one gate.
pub type Flow = ((usize, Component), (usize, Component));

/// Which input components each output component of `gate` is built from.
pub fn component_flows(gate: &GateInstance) -> Vec<Flow> {
    use Component::{X, Z};
    let w = &gate.wires;
    match &gate.kind {
        GateKind::H => vec![((w[0], Z), (w[0], X)), ((w[0], X), (w[0], Z))],
        GateKind::X | GateKind::Z => vec![((w[0], X), (w[0], X)), ((w[0], Z), (w[0], Z))],
        GateKind::Cnot => {
            let (c, t) = (w[0], w[1]);
            vec![
                ((c, X), (c, X)),
                ((t, X), (c, X)),
                ((c, Z), (c, Z)),
                ((t, X), (t, X)),
                ((c, Z), (t, Z)),
                ((t, Z), (t, Z)),
            ]
        }
        GateKind::Cz => {
            let (a, b) = (w[0], w[1]);
            vec![
                ((a, X), (a, X)),
                ((b, Z), (a, X)),
                ((a, Z), (a, Z)),
                ((b, X), (b, X)),
                ((a, Z), (b, X)),
                ((b, Z), (b, Z)),
            ]
        }
        GateKind::Prep(_) | GateKind::PrepEta(_) | GateKind::Raw(_) => {
            let mut flows = Vec::new();
            for &from in w {
                for &to in w {
                    for fc in [X, Z] {
                        for tc in [X, Z] {
                            flows.push(((from, fc), (to, tc)));
                        }
                    }
                }
            }
            flows
        }
    }
}

/// Structural tags for every wire and time step of `circuit`.
pub fn structural_tags(circuit: &Circuit) -> TagTable {
    let mut table = vec![vec![ComponentTags::default(); circuit.n()]];
    for t in 1..=circuit.depth() {
        let prev = table.last().expect("non-empty");
        let mut next = prev.clone();
        for g in circuit.gates_at(t) {
            for &w in &g.wires {
                next[w - 1] = ComponentTags::default();
            }
            for ((fw, fc), (tw, tc)) in component_flows(g) {
                let src = prev[fw - 1].get(fc).clone();
                next[tw - 1].get_mut(tc).extend(src);
            }
            for p in g.parameters() {
                for &w in &g.wires {
                    next[w - 1].x.insert(p.to_string());
                    next[w - 1].z.insert(p.to_string());
                }
            }
        }
        table.push(next);
    }
    table
}

/// Recomputes the trace's structural tags.
pub fn tag_descriptors(trace: &FlowTrace) -> FlowTrace {
    FlowTrace { tags: structural_tags(&trace.circuit), ..trace.clone() }
}

/// Re-runs the evolution with `probes` random perturbations of `parameter` and reports
/// whether the descriptor of `wire` at `time` changed by more than 1e-9 in any coefficient.
pub fn numerical_dependence_check(
    circuit: &Circuit,
    wire: usize,
    time: usize,
    parameter: &str,
    probes: usize,
    seed: u64,
) -> Result<bool, EngineError> {
    if wire == 0 || wire > circuit.n() {
        return Err(EngineError::WireOutOfRange { wire, n: circuit.n() });
    }
    if !circuit.parameter_table().contains_key(parameter) {
        return Err(EngineError::UnknownParameter(parameter.to_string()));
    }
    let prefix = circuit.prefix(time);
    if !prefix.parameter_table().contains_key(parameter) {
        return Ok(false);
    }
    let baseline = evolve(&prefix)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let variants = (0..probes)
        .map(|_| prefix.perturbed(parameter, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let diffs = variants
        .par_iter()
        .map(|c| {
            let set = evolve(c)?;
            Ok(set.descriptor(wire).max_abs_diff(baseline.descriptor(wire))?)
        })
        .collect::<Result<Vec<f64>, EngineError>>()?;
    Ok(diffs.into_iter().any(|d| d > DEPENDENCE_TOLERANCE))
}

/// Untouched wire whose descriptor changed across a step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocalityViolation {
    pub wire: usize,
    pub time: usize,
}

/// Every step, every wire no gate touches must carry bitwise-identical components.
pub fn locality_audit(trace: &FlowTrace) -> Vec<LocalityViolation> {
    let mut violations = Vec::new();
    for t in 1..trace.snapshots.len() {
        let before = &trace.snapshots[t - 1];
        let after = &trace.snapshots[t];
        for w in 1..=trace.circuit.n() {
            if trace.circuit.gates_at(t).any(|g| g.touches(w)) {
                continue;
            }
            if !after.descriptor(w).bitwise_eq(before.descriptor(w)) {
                violations.push(LocalityViolation { wire: w, time: t });
            }
        }
    }
    violations
}

#[derive(Debug, Clone, Serialize)]
pub struct WireTimeEntry {
    pub wire: usize,
    pub time: usize,
    pub tags: ComponentTags,
    /// parameter -> numerically dependent?
    pub numerical: BTreeMap<String, bool>,
    pub bloch: [f64; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub schema: &'static str,
    pub wires: usize,
    pub depth: usize,
    pub parameters: Vec<String>,
    pub probes: usize,
    pub seed: u64,
    pub locality_violations: Vec<LocalityViolation>,
    /// Numerically dependent entries missing a structural tag; must be empty.
    pub soundness_failures: Vec<(usize, usize, String)>,
    pub entries: Vec<WireTimeEntry>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.locality_violations.is_empty() && self.soundness_failures.is_empty()
    }
}

/// Structural and numerical verdicts side by side for every (wire, time), plus locality.
pub fn audit(circuit: &Circuit, probes: usize, seed: u64) -> Result<AuditReport, EngineError> {
    let trace = run_with_trace(circuit)?;
    let parameters: Vec<String> = circuit.parameter_table().into_keys().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // one full perturbed trace per (parameter, probe)
    let mut jobs = Vec::new();
    for p in &parameters {
        for _ in 0..probes {
            jobs.push((p.clone(), circuit.perturbed(p, &mut rng)?));
        }
    }
    let perturbed = jobs
        .par_iter()
        .map(|(p, c)| Ok((p.clone(), run_with_trace(c)?)))
        .collect::<Result<Vec<_>, EngineError>>()?;

    let mut entries = Vec::new();
    let mut soundness_failures = Vec::new();
    for (t, snap) in trace.snapshots.iter().enumerate() {
        for w in 1..=circuit.n() {
            let mut numerical = BTreeMap::new();
            for p in &parameters {
                let mut dependent = false;
                for (_, other) in perturbed.iter().filter(|(q, _)| q == p) {
                    let d = other.snapshots[t].descriptor(w).max_abs_diff(snap.descriptor(w))?;
                    dependent |= d > DEPENDENCE_TOLERANCE;
                }
                numerical.insert(p.clone(), dependent);
            }
            let tags = trace.tags[t][w - 1].clone();
            for (p, &dep) in &numerical {
                if dep && !tags.contains(p) {
                    soundness_failures.push((w, t, p.clone()));
                }
            }
            let bloch = bloch_components(snap, w).unwrap_or([f64::NAN; 3]);
            entries.push(WireTimeEntry { wire: w, time: t, tags, numerical, bloch });
        }
    }
    Ok(AuditReport {
        schema: "qdesc-audit/1",
        wires: circuit.n(),
        depth: circuit.depth(),
        parameters,
        probes,
        seed,
        locality_violations: locality_audit(&trace),
        soundness_failures,
        entries,
    })
}

/// Graphviz digraph: one node per (wire, time), component-flow edges across gates,
/// and edges whose source component carries a parameter drawn thick green.
pub fn flow_dot(trace: &FlowTrace) -> String {
    let c = &trace.circuit;
    let mut out = String::new();
    let _ = writeln!(out, "digraph flow {{");
    let _ = writeln!(out, "  rankdir=LR;");
    let _ = writeln!(out, "  node [shape=point];");
    for t in 0..=c.depth() {
        let _ = write!(out, "  {{ rank=same;");
        for w in 1..=c.n() {
            let _ = write!(out, " w{w}t{t};");
        }
        let _ = writeln!(out, " }}");
    }
    for w in 1..=c.n() {
        let _ = writeln!(out, "  w{w}t0 [shape=plaintext, label=\"q{w}\"];");
    }
    let carried = |tags: &Tags| !tags.is_empty();
    for t in 1..=c.depth() {
        let prev = &trace.tags[t - 1];
        let mut edges: BTreeMap<(usize, usize), Tags> = BTreeMap::new();
        let mut touched = BTreeSet::new();
        for g in c.gates_at(t) {
            touched.extend(g.wires.iter().copied());
            for ((fw, fc), (tw, _)) in component_flows(g) {
                edges.entry((fw, tw)).or_default().extend(prev[fw - 1].get(fc).iter().cloned());
            }
            for p in g.parameters() {
                let _ = writeln!(out, "  p_{p}_t{t} [shape=box, label=\"{p}\", color=green];");
                for &w in &g.wires {
                    edges.entry((usize::MAX, w)).or_default();
                    let _ = writeln!(
                        out,
                        "  p_{p}_t{t} -> w{w}t{t} [color=green, penwidth=3, label=\"{}\"];",
                        g.kind.name()
                    );
                }
            }
        }
        for w in 1..=c.n() {
            if !touched.contains(&w) {
                edges.insert((w, w), prev[w - 1].union());
            }
        }
        for ((from, to), tags) in edges {
            if from == usize::MAX {
                continue;
            }
            let style = if carried(&tags) {
                let label: Vec<_> = tags.into_iter().collect();
                format!(" [color=green, penwidth=3, label=\"{}\"]", label.join(","))
            } else {
                String::new()
            };
            let _ = writeln!(out, "  w{from}t{} -> w{to}t{t}{style};", t - 1);
        }
    }
    let _ = writeln!(out, "}}");
    out
}

/// `(from_wire, to_wire, time)` for every parameter-carrying cross-wire edge in the DOT graph.
pub fn carrying_edges(trace: &FlowTrace, param: &str) -> Vec<(usize, usize, usize)> {
    let mut out = BTreeSet::new();
    for t in 1..=trace.circuit.depth() {
        for g in trace.circuit.gates_at(t) {
            for ((fw, fc), (tw, _)) in component_flows(g) {
                if fw != tw && trace.tags[t - 1][fw - 1].get(fc).contains(param) {
                    out.insert((fw, tw, t));
                }
            }
        }
    }
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{init_descriptors, Descriptor};
    use crate::pauli::{Pauli, PauliSum};

    #[test]
    fn clifford_circuit_has_no_tags() {
        let c = Circuit::new(
            3,
            vec![
                GateInstance::h(1, 1).unwrap(),
                GateInstance::cnot(2, 1, 2).unwrap(),
                GateInstance::cz(3, 2, 3).unwrap(),
            ],
        )
        .unwrap();
        let tags = structural_tags(&c);
        assert!(tags.iter().flatten().all(|t| t.x.is_empty() && t.z.is_empty()));
    }

    #[test]
    fn injected_mutation_is_located() {
        let c = Circuit::new(3, vec![GateInstance::h(1, 1).unwrap(), GateInstance::h(2, 2).unwrap()]).unwrap();
        let mut trace = run_with_trace(&c).unwrap();
        assert!(locality_audit(&trace).is_empty());
        let n = 3;
        let bad = Descriptor::new(
            3,
            2,
            PauliSum::single(n, 3, Pauli::Z).unwrap(),
            PauliSum::single(n, 3, Pauli::X).unwrap(),
        );
        trace.snapshots[2] = trace.snapshots[2].with_replaced(vec![bad]).unwrap();
        assert_eq!(locality_audit(&trace), vec![LocalityViolation { wire: 3, time: 2 }]);
        let _ = init_descriptors(1);
    }

    #[test]
    fn unknown_parameter_errors() {
        let c = Circuit::new(1, vec![GateInstance::prep(1, 1, [0.2, 0.3, 0.4]).unwrap()]).unwrap();
        assert!(matches!(
            numerical_dependence_check(&c, 1, 1, "nope", 4, 0),
            Err(EngineError::UnknownParameter(_))
        ));
        assert!(numerical_dependence_check(&c, 1, 1, "phi", 4, 0).unwrap());
        assert!(!numerical_dependence_check(&c, 1, 0, "phi", 4, 0).is_ok_and(|b| b));
    }
}
