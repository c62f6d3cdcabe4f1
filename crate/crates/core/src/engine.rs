//! Network state and time evolution of descriptors.
//!
//! The Heisenberg state is fixed to `|0...0>`; preparations are gates. A
//! [`DescriptorSet`] is an immutable snapshot, and stepping returns a new one in
//! which untouched wires share their component storage with the previous set.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::gates::{self, GateError, GateInstance, GateKind};
use crate::oracle;
use crate::pauli::{Pauli, PauliError, PauliSum, DENSE_LIMIT};
use crate::provenance::{self, TagTable};

/// Evolution aborts when any component grows past this many terms.
pub const MAX_TERMS: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error("a network needs at least one wire")]
    EmptyNetwork,
    #[error("gate at t={got} cannot follow a set at t={current}")]
    TimeMismatch { current: usize, got: usize },
    #[error("wire {wire} out of range for a {n}-wire network")]
    WireOutOfRange { wire: usize, n: usize },
    #[error("wire {wire} is used by more than one gate at t={time}")]
    WireConflict { wire: usize, time: usize },
    #[error("component of wire {wire} reached {terms} terms at t={time} (limit {MAX_TERMS})")]
    TermLimit { wire: usize, time: usize, terms: usize },
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("{n} wires exceeds the dense limit of {DENSE_LIMIT}")]
    DenseLimit { n: usize },
}

/// The pair `(q_x, q_z)` attached to one wire at one time.
#[derive(Debug, Clone)]
pub struct Descriptor {
    wire: usize,
    time: usize,
    x: Arc<PauliSum>,
    z: Arc<PauliSum>,
}

impl Descriptor {
    pub fn new(wire: usize, time: usize, x: PauliSum, z: PauliSum) -> Self {
        Self { wire, time, x: Arc::new(x), z: Arc::new(z) }
    }

    pub fn wire(&self) -> usize {
        self.wire
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn x(&self) -> &PauliSum {
        &self.x
    }

    pub fn z(&self) -> &PauliSum {
        &self.z
    }

    pub(crate) fn x_arc(&self) -> Arc<PauliSum> {
        Arc::clone(&self.x)
    }

    pub(crate) fn z_arc(&self) -> Arc<PauliSum> {
        Arc::clone(&self.z)
    }

    /// `q_y = i q_x q_z`.
    pub fn y(&self) -> Result<PauliSum, PauliError> {
        Ok(self.x.mul(&self.z)?.scale(Complex64::i()))
    }

    pub fn component(&self, p: Pauli) -> Result<PauliSum, PauliError> {
        match p {
            Pauli::I => PauliSum::identity(self.x.n()),
            Pauli::X => Ok((*self.x).clone()),
            Pauli::Y => self.y(),
            Pauli::Z => Ok((*self.z).clone()),
        }
    }

    /// Same wire and time with new components.
    pub fn with_components(&self, x: Arc<PauliSum>, z: Arc<PauliSum>) -> Self {
        Self { wire: self.wire, time: self.time, x, z }
    }

    fn at_time(&self, time: usize) -> Self {
        Self { time, ..self.clone() }
    }

    /// Identical term maps, bit for bit.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.x, &other.x) || self.x.bitwise_eq(&other.x))
            && (Arc::ptr_eq(&self.z, &other.z) || self.z.bitwise_eq(&other.z))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, PauliError> {
        Ok(self.x.max_abs_diff(&other.x)?.max(self.z.max_abs_diff(&other.z)?))
    }

    /// On-wire Pauli relations: squares are identity, `q_x q_z` anticommute, `q_x q_y = i q_z`,
    /// and both components are Hermitian.
    pub fn check_algebra(&self, tol: f64) -> Result<(), String> {
        let n = self.x.n();
        let id = PauliSum::identity(n).map_err(|e| e.to_string())?;
        let err = |e: PauliError| e.to_string();
        let y = self.y().map_err(err)?;
        for (name, c) in [("x", &*self.x), ("y", &y), ("z", &*self.z)] {
            let d = c.mul(c).map_err(err)?.max_abs_diff(&id).map_err(err)?;
            if d > tol {
                return Err(format!("wire {}: q_{name}^2 deviates from identity by {d:e}", self.wire));
            }
            if !c.is_hermitian(tol) {
                return Err(format!("wire {}: q_{name} is not Hermitian", self.wire));
            }
        }
        let anti = self.x.anticommutator(&self.z).map_err(err)?;
        if anti.iter().any(|(_, c)| c.norm() > tol) {
            return Err(format!("wire {}: q_x and q_z do not anticommute", self.wire));
        }
        let xy = self.x.mul(&y).map_err(err)?;
        let iz = self.z.scale(Complex64::i());
        let d = xy.max_abs_diff(&iz).map_err(err)?;
        if d > tol {
            return Err(format!("wire {}: q_x q_y differs from i q_z by {d:e}", self.wire));
        }
        Ok(())
    }
}

/// Descriptors of every wire at one common time.
#[derive(Debug, Clone)]
pub struct DescriptorSet {
    n: usize,
    time: usize,
    descriptors: Vec<Descriptor>,
}

impl DescriptorSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn time(&self) -> usize {
        self.time
    }

    /// Descriptor of a 1-indexed wire. Panics if out of range.
    pub fn descriptor(&self, wire: usize) -> &Descriptor {
        &self.descriptors[wire - 1]
    }

    pub fn get(&self, wire: usize) -> Option<&Descriptor> {
        wire.checked_sub(1).and_then(|k| self.descriptors.get(k))
    }

    pub fn descriptors(&self) -> &[Descriptor] {
        &self.descriptors
    }

    /// Replaces descriptors by wire; used by the engine and by fault-injection tests.
    pub fn with_replaced(&self, updates: Vec<Descriptor>) -> Result<Self, EngineError> {
        let mut next = self.clone();
        for d in updates {
            let wire = d.wire;
            if wire == 0 || wire > self.n {
                return Err(EngineError::WireOutOfRange { wire, n: self.n });
            }
            next.descriptors[wire - 1] = d;
        }
        Ok(next)
    }

    /// On-wire relations for every wire plus pairwise cross-wire commutation.
    pub fn check_algebra(&self, tol: f64) -> Result<(), String> {
        let err = |e: PauliError| e.to_string();
        let mut comps = Vec::with_capacity(3 * self.n);
        for d in &self.descriptors {
            d.check_algebra(tol)?;
            comps.push((d.wire, d.x().clone()));
            comps.push((d.wire, d.y().map_err(err)?));
            comps.push((d.wire, d.z().clone()));
        }
        for (a, (wa, ca)) in comps.iter().enumerate() {
            for (wb, cb) in &comps[a + 1..] {
                if wa == wb {
                    continue;
                }
                let c = ca.commutator(cb).map_err(err)?;
                if c.iter().any(|(_, v)| v.norm() > tol) {
                    return Err(format!("components of wires {wa} and {wb} do not commute"));
                }
            }
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, PauliError> {
        let mut worst: f64 = 0.0;
        for (a, b) in self.descriptors.iter().zip(&other.descriptors) {
            worst = worst.max(a.max_abs_diff(b)?);
        }
        Ok(worst)
    }
}

/// `q_i(0) = (X_i, Z_i)` for every wire.
pub fn init_descriptors(n: usize) -> Result<DescriptorSet, EngineError> {
    if n < 1 {
        return Err(EngineError::EmptyNetwork);
    }
    let descriptors = (1..=n)
        .map(|w| {
            Ok(Descriptor::new(
                w,
                0,
                PauliSum::single(n, w, Pauli::X)?,
                PauliSum::single(n, w, Pauli::Z)?,
            ))
        })
        .collect::<Result<Vec<_>, PauliError>>()?;
    Ok(DescriptorSet { n, time: 0, descriptors })
}

/// Real parameter values bound to an identifier.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamValue {
    Euler { phi: [f64; 3] },
    Amplitudes { alpha: f64, beta: [f64; 2] },
    Phase { eta: [f64; 2] },
}

/// Timed gate list over `n` wires.
///
/// Gates are kept sorted by time step, and by lowest wire within a step.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n: usize,
    gates: Vec<GateInstance>,
}

impl Circuit {
    pub fn new(n: usize, mut gates: Vec<GateInstance>) -> Result<Self, EngineError> {
        if n < 1 {
            return Err(EngineError::EmptyNetwork);
        }
        gates.sort_by_key(|g| (g.time, g.wires.iter().copied().min().unwrap_or(0)));
        let mut busy: BTreeMap<(usize, usize), ()> = BTreeMap::new();
        for g in &gates {
            for &w in &g.wires {
                if w == 0 || w > n {
                    return Err(EngineError::WireOutOfRange { wire: w, n });
                }
                if busy.insert((g.time, w), ()).is_some() {
                    return Err(EngineError::WireConflict { wire: w, time: g.time });
                }
            }
            if let GateKind::Raw(s) = &g.kind {
                if s.n() != g.wires.len() {
                    return Err(PauliError::WidthMismatch(s.n(), g.wires.len()).into());
                }
            }
        }
        Ok(Self { n, gates })
    }

    pub fn empty(n: usize) -> Result<Self, EngineError> {
        Self::new(n, Vec::new())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[GateInstance] {
        &self.gates
    }

    /// Last time step carrying a gate (0 for an empty circuit).
    pub fn depth(&self) -> usize {
        self.gates.last().map_or(0, |g| g.time)
    }

    pub fn gates_at(&self, time: usize) -> impl Iterator<Item = &GateInstance> {
        self.gates.iter().filter(move |g| g.time == time)
    }

    /// Gates up to and including `time`.
    pub fn prefix(&self, time: usize) -> Self {
        Self { n: self.n, gates: self.gates.iter().filter(|g| g.time <= time).cloned().collect() }
    }

    pub fn map_gates(&self, f: impl FnMut(&GateInstance) -> GateInstance) -> Result<Self, EngineError> {
        Self::new(self.n, self.gates.iter().map(f).collect())
    }

    /// Identifier -> values for every parameter bound by a gate. First binding wins when
    /// an identifier is reused.
    pub fn parameter_table(&self) -> BTreeMap<String, ParamValue> {
        let mut table = BTreeMap::new();
        for g in &self.gates {
            match &g.kind {
                GateKind::Prep(p) => {
                    table.entry(p.id.clone()).or_insert(ParamValue::Euler { phi: p.phi });
                }
                GateKind::PrepEta(p) => {
                    table
                        .entry(p.state_id.clone())
                        .or_insert(ParamValue::Amplitudes { alpha: p.alpha, beta: [p.beta.re, p.beta.im] });
                    table.entry(p.eta_id.clone()).or_insert(ParamValue::Phase { eta: [p.eta.re, p.eta.im] });
                }
                _ => {}
            }
        }
        table
    }

    /// Copy with parameter `name` shifted by `offsets` (radians). Euler angles take three
    /// offsets; amplitudes take two (mixing angle, phase of beta); eta takes one.
    /// Domain checks are skipped so that any shift stays representable.
    pub fn with_shifted_parameter(&self, name: &str, offsets: &[f64; 3]) -> Result<Self, EngineError> {
        let mut found = false;
        let gates = self
            .gates
            .iter()
            .map(|g| {
                let mut g = g.clone();
                match &mut g.kind {
                    GateKind::Prep(p) if p.id == name => {
                        for (v, d) in p.phi.iter_mut().zip(offsets) {
                            *v += d;
                        }
                        found = true;
                    }
                    GateKind::PrepEta(p) => {
                        if p.state_id == name {
                            let theta = p.beta.norm().atan2(p.alpha) + offsets[0];
                            let arg = p.beta.arg() + offsets[1];
                            p.alpha = theta.cos();
                            p.beta = Complex64::from_polar(theta.sin(), arg);
                            found = true;
                        }
                        if p.eta_id == name {
                            p.eta *= Complex64::from_polar(1.0, offsets[0]);
                            found = true;
                        }
                    }
                    _ => {}
                }
                g
            })
            .collect();
        if !found {
            return Err(EngineError::UnknownParameter(name.to_string()));
        }
        Ok(Self { n: self.n, gates })
    }

    /// Random-sign offsets uniform in `[0.1, 0.5]` radians.
    pub fn perturbed<R: Rng + ?Sized>(&self, name: &str, rng: &mut R) -> Result<Self, EngineError> {
        let mut off = [0.0; 3];
        for v in &mut off {
            let mag = rng.gen_range(0.1..=0.5);
            *v = if rng.gen::<bool>() { mag } else { -mag };
        }
        self.with_shifted_parameter(name, &off)
    }
}

/// Strategy used to update descriptors for one gate. The returned descriptors replace
/// the set's entries by wire.
pub trait ActionRules: Sync {
    fn apply(&self, gate: &GateInstance, set: &DescriptorSet) -> Result<Vec<Descriptor>, GateError>;
}

/// Closed-form rules from the gate library.
#[derive(Debug, Clone, Copy, Default)]
pub struct StandardRules;

impl ActionRules for StandardRules {
    fn apply(&self, gate: &GateInstance, set: &DescriptorSet) -> Result<Vec<Descriptor>, GateError> {
        gates::apply_closed_form(gate, set)
    }
}

/// General conjugation through substituted functional representations, for every gate kind.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConjugationRules;

impl ActionRules for ConjugationRules {
    fn apply(&self, gate: &GateInstance, set: &DescriptorSet) -> Result<Vec<Descriptor>, GateError> {
        gates::apply_by_conjugation(gate, set)
    }
}

/// Applies all `gates` of time step `time` (disjoint wires, applied in order).
pub fn advance(
    set: &DescriptorSet,
    time: usize,
    gates: &[&GateInstance],
    rules: &dyn ActionRules,
) -> Result<DescriptorSet, EngineError> {
    if time != set.time + 1 {
        return Err(EngineError::TimeMismatch { current: set.time, got: time });
    }
    let mut working = set.clone();
    for gate in gates {
        if gate.time != time {
            return Err(EngineError::TimeMismatch { current: set.time, got: gate.time });
        }
        for &w in &gate.wires {
            if w == 0 || w > set.n {
                return Err(EngineError::WireOutOfRange { wire: w, n: set.n });
            }
        }
        let updates = rules.apply(gate, &working)?;
        for d in &updates {
            let terms = d.x().len().max(d.z().len());
            if terms > MAX_TERMS {
                return Err(EngineError::TermLimit { wire: d.wire, time, terms });
            }
        }
        working = working.with_replaced(updates)?;
    }
    working.time = time;
    for d in &mut working.descriptors {
        *d = d.at_time(time);
    }
    Ok(working)
}

/// One step: `gate.time` must be `set.time() + 1`. Only the gate's wires change.
pub fn step(set: &DescriptorSet, gate: &GateInstance) -> Result<DescriptorSet, EngineError> {
    advance(set, gate.time, &[gate], &StandardRules)
}

pub fn evolve(circuit: &Circuit) -> Result<DescriptorSet, EngineError> {
    evolve_with(circuit, &StandardRules)
}

/// Step-by-step evolution through every time step up to the circuit depth.
pub fn evolve_with(circuit: &Circuit, rules: &dyn ActionRules) -> Result<DescriptorSet, EngineError> {
    let mut set = init_descriptors(circuit.n())?;
    for t in 1..=circuit.depth() {
        let gates: Vec<_> = circuit.gates_at(t).collect();
        set = advance(&set, t, &gates, rules)?;
    }
    Ok(set)
}

/// One-shot `q_i(t) = U^† q_i(0) U` with `U` the dense network unitary.
pub fn evolve_global(circuit: &Circuit) -> Result<DescriptorSet, EngineError> {
    let n = circuit.n();
    if n > DENSE_LIMIT {
        return Err(EngineError::DenseLimit { n });
    }
    let u = oracle::network_unitary(circuit)?;
    let ud = u.adjoint();
    let time = circuit.depth();
    let descriptors = (1..=n)
        .map(|w| {
            let conj = |p| -> Result<PauliSum, EngineError> {
                let op = PauliSum::single(n, w, p)?.to_dense()?;
                Ok(PauliSum::from_dense(&(&ud * op * &u))?)
            };
            Ok(Descriptor::new(w, time, conj(Pauli::X)?, conj(Pauli::Z)?))
        })
        .collect::<Result<Vec<_>, EngineError>>()?;
    Ok(DescriptorSet { n, time, descriptors })
}

/// Snapshot after every time step (index = time) plus structural provenance tags.
#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub circuit: Circuit,
    pub snapshots: Vec<DescriptorSet>,
    pub tags: TagTable,
}

impl FlowTrace {
    pub fn at(&self, time: usize) -> Option<&DescriptorSet> {
        self.snapshots.get(time)
    }

    pub fn last(&self) -> &DescriptorSet {
        self.snapshots.last().expect("trace always holds the t=0 snapshot")
    }
}

pub fn run_with_trace(circuit: &Circuit) -> Result<FlowTrace, EngineError> {
    run_with_trace_using(circuit, &StandardRules)
}

pub fn run_with_trace_using(circuit: &Circuit, rules: &dyn ActionRules) -> Result<FlowTrace, EngineError> {
    let mut snapshots = vec![init_descriptors(circuit.n())?];
    for t in 1..=circuit.depth() {
        let gates: Vec<_> = circuit.gates_at(t).collect();
        let next = advance(snapshots.last().expect("non-empty"), t, &gates, rules)?;
        snapshots.push(next);
    }
    Ok(FlowTrace { circuit: circuit.clone(), snapshots, tags: provenance::structural_tags(circuit) })
}
