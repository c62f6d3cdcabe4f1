//! Gate kinds, their functional representations at time 0, and their action on descriptors.
//!
//! Every gate `G` is conjugating: a descriptor component `q` becomes `G(q)^† q G(q)`,
//! where `G(q)` is the gate's functional representation with the current
//! descriptor components substituted for the time-0 Pauli operators.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;

use nalgebra::Matrix2;
use num_complex::Complex64;
use thiserror::Error;

use crate::engine::{Descriptor, DescriptorSet};
use crate::pauli::{Pauli, PauliError, PauliString, PauliSum};

/// Tolerance for unitarity and normalization checks.
pub const UNITARITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GateError {
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error("gate `{gate}` expects {expected} wire(s), got {got}")]
    Arity { gate: &'static str, expected: usize, got: usize },
    #[error("wire {0} appears twice in one gate")]
    DuplicateWire(usize),
    #[error("wire indices are 1-based; got 0")]
    ZeroWire,
    #[error("time steps start at 1; got 0")]
    ZeroTime,
    #[error("Euler angle phi{index} = {value} outside its domain {domain}")]
    AngleDomain { index: usize, value: f64, domain: &'static str },
    #[error("preparation amplitudes not normalized: alpha^2 + |beta|^2 = {0}")]
    NotNormalized(f64),
    #[error("alpha must be a non-negative real, got {0}")]
    NegativeAlpha(f64),
    #[error("eta must have unit modulus, got |eta| = {0}")]
    EtaModulus(f64),
    #[error("operator is not unitary (deviation {0:e})")]
    NotUnitary(f64),
    #[error("descriptors for the two wires of `{0}` must differ")]
    SameWire(&'static str),
}

/// Alice's preparation `U = e^{i phi3 Z} e^{i phi2 X} e^{i phi1 Z}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerPrep {
    pub phi: [f64; 3],
    /// Parameter identifier used for provenance.
    pub id: String,
}

impl EulerPrep {
    /// Validates the fundamental domain `phi1, phi3 in [0, pi)`, `phi2 in [0, pi/2]`.
    pub fn new(phi: [f64; 3], id: impl Into<String>) -> Result<Self, GateError> {
        check_euler_domain(phi)?;
        Ok(Self { phi, id: id.into() })
    }

    pub fn matrix(&self) -> Matrix2<Complex64> {
        euler_matrix(self.phi)
    }

    /// First column of `U`, i.e. `U|0>`.
    pub fn prepared_state(&self) -> [Complex64; 2] {
        let m = self.matrix();
        [m[(0, 0)], m[(1, 0)]]
    }
}

pub fn check_euler_domain(phi: [f64; 3]) -> Result<(), GateError> {
    let ok = |v: f64, hi: f64, closed: bool| v >= 0.0 && if closed { v <= hi } else { v < hi };
    if !ok(phi[0], PI, false) {
        return Err(GateError::AngleDomain { index: 1, value: phi[0], domain: "[0, pi)" });
    }
    if !ok(phi[1], FRAC_PI_2, true) {
        return Err(GateError::AngleDomain { index: 2, value: phi[1], domain: "[0, pi/2]" });
    }
    if !ok(phi[2], PI, false) {
        return Err(GateError::AngleDomain { index: 3, value: phi[2], domain: "[0, pi)" });
    }
    Ok(())
}

pub fn euler_matrix(phi: [f64; 3]) -> Matrix2<Complex64> {
    let [p1, p2, p3] = phi;
    let e = |t: f64| Complex64::from_polar(1.0, t);
    let i = Complex64::i();
    Matrix2::new(
        e(p1 + p3) * p2.cos(),
        i * e(-(p1 - p3)) * p2.sin(),
        i * e(p1 - p3) * p2.sin(),
        e(-(p1 + p3)) * p2.cos(),
    )
}

/// Preparation written as `(eta*)^{1/2} [[alpha, -eta beta*], [beta, eta alpha]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaPrep {
    pub alpha: f64,
    pub beta: Complex64,
    pub eta: Complex64,
    pub state_id: String,
    pub eta_id: String,
}

impl EtaPrep {
    pub fn new(alpha: f64, beta: Complex64, eta: Complex64) -> Result<Self, GateError> {
        let p = Self { alpha, beta, eta, state_id: "psi".into(), eta_id: "eta".into() };
        p.validate()?;
        Ok(p)
    }

    pub fn with_ids(mut self, state_id: impl Into<String>, eta_id: impl Into<String>) -> Self {
        self.state_id = state_id.into();
        self.eta_id = eta_id.into();
        self
    }

    pub fn validate(&self) -> Result<(), GateError> {
        if self.alpha < 0.0 {
            return Err(GateError::NegativeAlpha(self.alpha));
        }
        let norm = self.alpha * self.alpha + self.beta.norm_sqr();
        if (norm - 1.0).abs() > UNITARITY_TOLERANCE {
            return Err(GateError::NotNormalized(norm));
        }
        if (self.eta.norm() - 1.0).abs() > UNITARITY_TOLERANCE {
            return Err(GateError::EtaModulus(self.eta.norm()));
        }
        Ok(())
    }

    /// Uses the principal branch of `(eta*)^{1/2}`.
    pub fn matrix(&self) -> Matrix2<Complex64> {
        eta_matrix(self.alpha, self.beta, self.eta)
    }

    /// The amplitudes an Euler preparation would produce with the global phase stripped.
    pub fn from_euler(phi: [f64; 3]) -> Self {
        let [p1, p2, p3] = phi;
        Self {
            alpha: p2.cos(),
            beta: Complex64::i() * Complex64::from_polar(1.0, -2.0 * p3) * p2.sin(),
            eta: Complex64::from_polar(1.0, -2.0 * (p1 + p3)),
            state_id: "psi".into(),
            eta_id: "eta".into(),
        }
    }
}

pub fn eta_matrix(alpha: f64, beta: Complex64, eta: Complex64) -> Matrix2<Complex64> {
    let a = Complex64::new(alpha, 0.0);
    let pre = eta.conj().sqrt();
    Matrix2::new(a, -eta * beta.conj(), beta, eta * a) * pre
}

#[derive(Debug, Clone, PartialEq)]
pub enum GateKind {
    H,
    Cnot,
    Cz,
    X,
    Z,
    Prep(EulerPrep),
    PrepEta(EtaPrep),
    /// Unitary given as a Pauli sum on the gate's own wires (local wire `k` = `wires[k-1]`).
    Raw(PauliSum),
}

impl GateKind {
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::Cnot => "cnot",
            GateKind::Cz => "cz",
            GateKind::X => "x",
            GateKind::Z => "z",
            GateKind::Prep(_) => "prep",
            GateKind::PrepEta(_) => "prep_eta",
            GateKind::Raw(_) => "raw",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            GateKind::Cnot | GateKind::Cz => Some(2),
            GateKind::Raw(s) => Some(s.n()),
            _ => Some(1),
        }
    }

    pub fn is_clifford(&self) -> bool {
        matches!(self, GateKind::H | GateKind::Cnot | GateKind::Cz | GateKind::X | GateKind::Z)
    }
}

/// One gate placed at a time step on specific wires (control first where applicable).
#[derive(Debug, Clone, PartialEq)]
pub struct GateInstance {
    pub kind: GateKind,
    pub wires: Vec<usize>,
    pub time: usize,
}

impl GateInstance {
    pub fn new(kind: GateKind, wires: Vec<usize>, time: usize) -> Result<Self, GateError> {
        if time == 0 {
            return Err(GateError::ZeroTime);
        }
        if let Some(expected) = kind.arity() {
            if wires.len() != expected {
                return Err(GateError::Arity { gate: kind.name(), expected, got: wires.len() });
            }
        }
        for (k, &w) in wires.iter().enumerate() {
            if w == 0 {
                return Err(GateError::ZeroWire);
            }
            if wires[..k].contains(&w) {
                return Err(GateError::DuplicateWire(w));
            }
        }
        match &kind {
            GateKind::PrepEta(p) => p.validate()?,
            GateKind::Raw(s) => check_unitary(s)?,
            _ => {}
        }
        Ok(Self { kind, wires, time })
    }

    pub fn h(time: usize, wire: usize) -> Result<Self, GateError> {
        Self::new(GateKind::H, vec![wire], time)
    }

    pub fn cnot(time: usize, control: usize, target: usize) -> Result<Self, GateError> {
        Self::new(GateKind::Cnot, vec![control, target], time)
    }

    pub fn cz(time: usize, a: usize, b: usize) -> Result<Self, GateError> {
        Self::new(GateKind::Cz, vec![a, b], time)
    }

    pub fn x(time: usize, wire: usize) -> Result<Self, GateError> {
        Self::new(GateKind::X, vec![wire], time)
    }

    pub fn z(time: usize, wire: usize) -> Result<Self, GateError> {
        Self::new(GateKind::Z, vec![wire], time)
    }

    pub fn prep(time: usize, wire: usize, phi: [f64; 3]) -> Result<Self, GateError> {
        Self::new(GateKind::Prep(EulerPrep::new(phi, "phi")?), vec![wire], time)
    }

    pub fn prep_eta(time: usize, wire: usize, prep: EtaPrep) -> Result<Self, GateError> {
        Self::new(GateKind::PrepEta(prep), vec![wire], time)
    }

    pub fn raw(time: usize, wires: Vec<usize>, local: PauliSum) -> Result<Self, GateError> {
        Self::new(GateKind::Raw(local), wires, time)
    }

    /// Parameter identifiers bound by this gate.
    pub fn parameters(&self) -> Vec<&str> {
        match &self.kind {
            GateKind::Prep(p) => vec![p.id.as_str()],
            GateKind::PrepEta(p) => vec![p.state_id.as_str(), p.eta_id.as_str()],
            _ => Vec::new(),
        }
    }

    pub fn touches(&self, wire: usize) -> bool {
        self.wires.contains(&wire)
    }

    pub fn max_wire(&self) -> usize {
        self.wires.iter().copied().max().unwrap_or(0)
    }
}

impl fmt::Display for GateInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.name())?;
        for w in &self.wires {
            write!(f, " {w}")?;
        }
        write!(f, " @t={}", self.time)
    }
}

fn pauli_coefficients(m: &Matrix2<Complex64>) -> [Complex64; 4] {
    // c_P = tr(P M) / 2 for P in I, X, Y, Z
    let i = Complex64::i();
    [
        (m[(0, 0)] + m[(1, 1)]) * 0.5,
        (m[(1, 0)] + m[(0, 1)]) * 0.5,
        (m[(0, 1)] - m[(1, 0)]) * i * 0.5,
        (m[(0, 0)] - m[(1, 1)]) * 0.5,
    ]
}

/// Expands a 2x2 matrix in `{I, X, Y, Z}` on a single local wire.
pub fn single_wire_sum(m: &Matrix2<Complex64>) -> PauliSum {
    let c = pauli_coefficients(m);
    PauliSum::from_terms(
        1,
        Pauli::ALL
            .iter()
            .zip(c)
            .map(|(&p, coeff)| (coeff, PauliString::single(1, 1, p).expect("width 1"))),
    )
    .expect("width 1")
}

fn sigma(p: Pauli) -> Matrix2<Complex64> {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    let i = Complex64::i();
    match p {
        Pauli::I => Matrix2::new(l, o, o, l),
        Pauli::X => Matrix2::new(o, l, l, o),
        Pauli::Y => Matrix2::new(o, -i, i, o),
        Pauli::Z => Matrix2::new(l, o, o, -l),
    }
}

/// Functional representation on the gate's own `k` wires (local wire `j` is `gate.wires[j-1]`).
pub fn local_functional_rep(gate: &GateInstance) -> PauliSum {
    let r = FRAC_1_SQRT_2;
    let half = Complex64::new(0.5, 0.0);
    let s1 = |p| PauliString::single(1, 1, p).expect("width 1");
    let s2 = |f: &[(usize, Pauli)]| PauliString::from_factors(2, f).expect("width 2");
    let id2 = PauliString::identity(2).expect("width 2");
    let sum = |n, terms: Vec<(Complex64, PauliString)>| PauliSum::from_terms(n, terms).expect("valid");
    match &gate.kind {
        GateKind::H => sum(1, vec![(r.into(), s1(Pauli::X)), (r.into(), s1(Pauli::Z))]),
        GateKind::X => sum(1, vec![(1.0.into(), s1(Pauli::X))]),
        GateKind::Z => sum(1, vec![(1.0.into(), s1(Pauli::Z))]),
        // (I + Z_c + X_t - Z_c X_t) / 2
        GateKind::Cnot => sum(
            2,
            vec![
                (half, id2),
                (half, s2(&[(1, Pauli::Z)])),
                (half, s2(&[(2, Pauli::X)])),
                (-half, s2(&[(1, Pauli::Z), (2, Pauli::X)])),
            ],
        ),
        // (I + Z_a + Z_b - Z_a Z_b) / 2
        GateKind::Cz => sum(
            2,
            vec![
                (half, id2),
                (half, s2(&[(1, Pauli::Z)])),
                (half, s2(&[(2, Pauli::Z)])),
                (-half, s2(&[(1, Pauli::Z), (2, Pauli::Z)])),
            ],
        ),
        GateKind::Prep(p) => single_wire_sum(&p.matrix()),
        GateKind::PrepEta(p) => single_wire_sum(&p.matrix()),
        GateKind::Raw(s) => s.clone(),
    }
}

/// The gate's matrix representation on the whole `n`-wire network, as a time-0 Pauli sum.
pub fn functional_rep(gate: &GateInstance, n: usize) -> Result<PauliSum, GateError> {
    Ok(local_functional_rep(gate).embed(n, &gate.wires)?)
}

/// Euler preparation on `wire`, with `base`'s descriptor components substituted for
/// the time-0 operators. At the time-0 set this equals `U` on `wire`, identity elsewhere.
pub fn functional_rep_prep(phi: [f64; 3], wire: usize, base: &DescriptorSet) -> Result<PauliSum, GateError> {
    let local = single_wire_sum(&euler_matrix(phi));
    substitute(&local.embed(base.n(), &[wire])?, base)
}

/// Replaces every time-0 factor `X_k`, `Y_k`, `Z_k` by `q_kx`, `q_ky = i q_kx q_kz`, `q_kz` of `set`.
pub fn substitute(sum: &PauliSum, set: &DescriptorSet) -> Result<PauliSum, GateError> {
    let n = set.n();
    if sum.n() != n {
        return Err(PauliError::WidthMismatch(sum.n(), n).into());
    }
    let support = sum.support();
    let mut y_cache: Vec<Option<PauliSum>> = vec![None; n];
    let mut total = PauliSum::zero(n)?;
    for (&(x, z), &c) in sum.iter() {
        let mut term = PauliSum::identity(n)?.scale(c);
        for k in 0..n {
            let bit = 1u64 << k;
            if support & bit == 0 {
                continue;
            }
            let d = set.descriptor(k + 1);
            let factor = match (x & bit != 0, z & bit != 0) {
                (false, false) => continue,
                (true, false) => d.x().clone(),
                (false, true) => d.z().clone(),
                (true, true) => {
                    if y_cache[k].is_none() {
                        y_cache[k] = Some(d.y()?);
                    }
                    y_cache[k].clone().expect("filled above")
                }
            };
            term = term.mul(&factor)?;
        }
        total = total.add(&term)?;
    }
    Ok(total)
}

/// `sum_mul(adjoint(u), u) ≈ identity` within [`UNITARITY_TOLERANCE`].
pub fn check_unitary(u: &PauliSum) -> Result<(), GateError> {
    let dev = u.adjoint().mul(u)?.max_abs_diff(&PauliSum::identity(u.n())?)?;
    if dev > UNITARITY_TOLERANCE {
        Err(GateError::NotUnitary(dev))
    } else {
        Ok(())
    }
}

/// `(q_x, q_z) -> (q_z, q_x)`.
pub fn action_hadamard(q: &Descriptor) -> Descriptor {
    q.with_components(q.z_arc(), q.x_arc())
}

/// `X: (q_x, q_z) -> (q_x, -q_z)`.
pub fn action_x(q: &Descriptor) -> Descriptor {
    q.with_components(q.x_arc(), q.z().scale(Complex64::new(-1.0, 0.0)).into())
}

/// `Z: (q_x, q_z) -> (-q_x, q_z)`.
pub fn action_z(q: &Descriptor) -> Descriptor {
    q.with_components(q.x().scale(Complex64::new(-1.0, 0.0)).into(), q.z_arc())
}

/// Control gains the target's x-component; target gains the control's z-component.
pub fn action_cnot(control: &Descriptor, target: &Descriptor) -> Result<(Descriptor, Descriptor), GateError> {
    if control.wire() == target.wire() {
        return Err(GateError::SameWire("cnot"));
    }
    let cx = control.x().mul(target.x())?;
    let tz = control.z().mul(target.z())?;
    Ok((
        control.with_components(cx.into(), control.z_arc()),
        target.with_components(target.x_arc(), tz.into()),
    ))
}

/// Each x-component picks up the other wire's z-component.
pub fn action_cz(a: &Descriptor, b: &Descriptor) -> Result<(Descriptor, Descriptor), GateError> {
    if a.wire() == b.wire() {
        return Err(GateError::SameWire("cz"));
    }
    let ax = a.x().mul(b.z())?;
    let bx = b.x().mul(a.z())?;
    Ok((a.with_components(ax.into(), a.z_arc()), b.with_components(bx.into(), b.z_arc())))
}

/// Real 3x3 matrix `R` with `U^† σ_w U = Σ_v R[w][v] σ_v`, rows/columns ordered x, y, z.
pub fn adjoint_action(u: &Matrix2<Complex64>) -> [[f64; 3]; 3] {
    let mut r = [[0.0; 3]; 3];
    let ud = u.adjoint();
    for (wi, &w) in Pauli::XYZ.iter().enumerate() {
        let conj = ud * sigma(w) * u;
        for (vi, &v) in Pauli::XYZ.iter().enumerate() {
            r[wi][vi] = ((sigma(v) * conj).trace() * 0.5).re;
        }
    }
    r
}

/// Conjugation by a single-wire unitary given as a 1-wire time-0 Pauli sum.
///
/// Because `σ -> q` is an algebra homomorphism, `U(q)^† q_w U(q)` is the same real linear
/// combination of `q_x, q_y, q_z` that `U^† σ_w U` is of `σ_x, σ_y, σ_z`.
pub fn action_generic_1q(q: &Descriptor, uf: &PauliSum) -> Result<Descriptor, GateError> {
    if uf.n() != 1 {
        return Err(PauliError::WidthMismatch(uf.n(), 1).into());
    }
    check_unitary(uf)?;
    let dense = uf.to_dense()?;
    let u = Matrix2::new(dense[(0, 0)], dense[(0, 1)], dense[(1, 0)], dense[(1, 1)]);
    let r = adjoint_action(&u);
    let needs_y = r[0][1].abs() > 0.0 || r[2][1].abs() > 0.0;
    let qy = if needs_y { Some(q.y()?) } else { None };
    let combine = |row: [f64; 3]| -> Result<PauliSum, GateError> {
        let mut acc = q.x().scale(row[0].into());
        if let Some(y) = &qy {
            acc = acc.add(&y.scale(row[1].into()))?;
        }
        Ok(acc.add(&q.z().scale(row[2].into()))?)
    };
    Ok(q.with_components(combine(r[0])?.into(), combine(r[2])?.into()))
}

/// Applies the closed-form rule for `gate`, returning new descriptors for `gate.wires` in order.
pub fn apply_closed_form(gate: &GateInstance, set: &DescriptorSet) -> Result<Vec<Descriptor>, GateError> {
    let d = |k: usize| set.descriptor(gate.wires[k]);
    Ok(match &gate.kind {
        GateKind::H => vec![action_hadamard(d(0))],
        GateKind::X => vec![action_x(d(0))],
        GateKind::Z => vec![action_z(d(0))],
        GateKind::Cnot => {
            let (c, t) = action_cnot(d(0), d(1))?;
            vec![c, t]
        }
        GateKind::Cz => {
            let (a, b) = action_cz(d(0), d(1))?;
            vec![a, b]
        }
        GateKind::Prep(_) | GateKind::PrepEta(_) => {
            vec![action_generic_1q(d(0), &local_functional_rep(gate))?]
        }
        GateKind::Raw(s) if s.n() == 1 => vec![action_generic_1q(d(0), s)?],
        GateKind::Raw(_) => apply_by_conjugation(gate, set)?,
    })
}

/// General step rule: substitute the current components into the functional representation
/// and conjugate each touched component.
pub fn apply_by_conjugation(gate: &GateInstance, set: &DescriptorSet) -> Result<Vec<Descriptor>, GateError> {
    let uf = substitute(&functional_rep(gate, set.n())?, set)?;
    let uf_dag = uf.adjoint();
    gate.wires
        .iter()
        .map(|&w| {
            let d = set.descriptor(w);
            let x = uf_dag.mul(d.x())?.mul(&uf)?;
            let z = uf_dag.mul(d.z())?.mul(&uf)?;
            Ok(d.with_components(x.into(), z.into()))
        })
        .collect()
}
