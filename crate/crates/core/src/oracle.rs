//! Dense Schrödinger-picture state-vector simulator.
//!
//! Gate matrices come from [`crate::gates::local_functional_rep`] through
//! `to_dense`, so gate semantics have a single source. Wire 1 is the most
//! significant bit of a basis index.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::engine::{Circuit, EngineError};
use crate::gates::{local_functional_rep, EtaPrep, GateInstance, GateKind};
use crate::pauli::{Matrix, DENSE_LIMIT};
use crate::tomography::DensityMatrix;

/// Widest network the state-vector path accepts (`2^20` amplitudes).
pub const STATE_LIMIT: usize = 20;

pub const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{n} wires exceeds the state-vector limit of {STATE_LIMIT}")]
    StateLimit { n: usize },
    #[error("wire {wire} out of range for a {n}-wire state")]
    WireOutOfRange { wire: usize, n: usize },
}

impl From<crate::pauli::PauliError> for OracleError {
    fn from(e: crate::pauli::PauliError) -> Self {
        OracleError::Engine(e.into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>` on `n` wires.
    pub fn zero(n: usize) -> Result<Self, OracleError> {
        if n > STATE_LIMIT {
            return Err(OracleError::StateLimit { n });
        }
        let mut amplitudes = vec![Complex64::default(); 1 << n];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n, amplitudes })
    }

    /// Normalizes the given amplitudes; length must be `2^n`.
    pub fn from_amplitudes(n: usize, amplitudes: Vec<Complex64>) -> Result<Self, OracleError> {
        if n > STATE_LIMIT {
            return Err(OracleError::StateLimit { n });
        }
        assert_eq!(amplitudes.len(), 1 << n, "amplitude count must be 2^n");
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        Ok(Self { n, amplitudes: amplitudes.into_iter().map(|a| a / norm).collect() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    /// `|<self|other>|`; equals 1 iff the states agree up to global phase.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner(other).norm()
    }

    /// Applies a `2^k x 2^k` matrix to the listed wires (local wire 1 = `wires[0]` = MSB).
    pub fn apply_local(&mut self, wires: &[usize], m: &Matrix) -> Result<(), OracleError> {
        let k = wires.len();
        for &w in wires {
            if w == 0 || w > self.n {
                return Err(OracleError::WireOutOfRange { wire: w, n: self.n });
            }
        }
        let bit = |w: usize| 1usize << (self.n - w);
        let mask: usize = wires.iter().map(|&w| bit(w)).sum();
        let offsets: Vec<usize> = (0..1usize << k)
            .map(|j| {
                wires
                    .iter()
                    .enumerate()
                    .filter(|(m, _)| (j >> (k - 1 - m)) & 1 == 1)
                    .map(|(_, &w)| bit(w))
                    .sum()
            })
            .collect();
        let mut local = vec![Complex64::default(); 1 << k];
        for base in 0..self.amplitudes.len() {
            if base & mask != 0 {
                continue;
            }
            for (j, off) in offsets.iter().enumerate() {
                local[j] = self.amplitudes[base | off];
            }
            for (r, off) in offsets.iter().enumerate() {
                let mut acc = Complex64::default();
                for (c, v) in local.iter().enumerate() {
                    acc += m[(r, c)] * v;
                }
                self.amplitudes[base | off] = acc;
            }
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, gate: &GateInstance) -> Result<(), OracleError> {
        let m = local_functional_rep(gate).to_dense()?;
        self.apply_local(&gate.wires, &m)
    }

    /// Amplitude of the basis state whose wire bits are `bits[0]` (wire 1), `bits[1]`, ...
    pub fn amplitude_of(&self, bits: &[u8]) -> Complex64 {
        let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        self.amplitudes[idx]
    }
}

/// Applies every gate of `circuit` in time order to `|0...0>`.
pub fn simulate(circuit: &Circuit) -> Result<StateVector, OracleError> {
    let mut psi = StateVector::zero(circuit.n())?;
    for g in circuit.gates() {
        psi.apply_gate(g)?;
    }
    Ok(psi)
}

/// State after all gates with time step `<= time`.
pub fn simulate_until(circuit: &Circuit, time: usize) -> Result<StateVector, OracleError> {
    simulate(&circuit.prefix(time))
}

/// Dense network unitary, built column by column.
pub fn network_unitary(circuit: &Circuit) -> Result<Matrix, EngineError> {
    let n = circuit.n();
    if n > DENSE_LIMIT {
        return Err(EngineError::DenseLimit { n });
    }
    let dim = 1usize << n;
    let mut u = DMatrix::zeros(dim, dim);
    let local: Vec<_> = circuit
        .gates()
        .iter()
        .map(|g| local_functional_rep(g).to_dense())
        .collect::<Result<_, _>>()?;
    for col in 0..dim {
        let mut amps = vec![Complex64::default(); dim];
        amps[col] = Complex64::new(1.0, 0.0);
        let mut psi = StateVector { n, amplitudes: amps };
        for (g, m) in circuit.gates().iter().zip(&local) {
            psi.apply_local(&g.wires, m).map_err(|e| match e {
                OracleError::Engine(e) => e,
                other => panic!("validated circuit produced {other}"),
            })?;
        }
        u.set_column(col, &DVector::from_vec(psi.amplitudes));
    }
    Ok(u)
}

/// Partial trace onto `wires` (sorted ascending; the first listed wire is the leftmost factor).
pub fn partial_trace(state: &StateVector, wires: &[usize]) -> Result<DensityMatrix, OracleError> {
    let n = state.n;
    let mut keep: Vec<usize> = wires.to_vec();
    keep.sort_unstable();
    keep.dedup();
    for &w in &keep {
        if w == 0 || w > n {
            return Err(OracleError::WireOutOfRange { wire: w, n });
        }
    }
    let k = keep.len();
    let bit = |w: usize| 1usize << (n - w);
    let keep_mask: usize = keep.iter().map(|&w| bit(w)).sum();
    let local_index = |idx: usize| {
        keep.iter().fold(0usize, |acc, &w| (acc << 1) | usize::from(idx & bit(w) != 0))
    };
    let dim = 1usize << k;
    let mut rho = Matrix::zeros(dim, dim);
    // group amplitudes by the traced-out bits
    let mut groups: std::collections::HashMap<usize, Vec<(usize, Complex64)>> = Default::default();
    for (idx, &a) in state.amplitudes.iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        groups.entry(idx & !keep_mask).or_default().push((local_index(idx), a));
    }
    for members in groups.values() {
        for &(r, ar) in members {
            for &(c, ac) in members {
                rho[(r, c)] += ar * ac.conj();
            }
        }
    }
    Ok(DensityMatrix::new(keep, rho))
}

/// Replaces the amplitudes and eta of every `prep_eta` gate; if none exists, a
/// `prep_eta` on wire 1 is applied before the circuit.
fn state_for_eta(alpha: f64, beta: Complex64, eta: Complex64, template: &Circuit) -> Result<StateVector, OracleError> {
    let mut found = false;
    let circuit = template.map_gates(|g| {
        let mut g = g.clone();
        if let GateKind::PrepEta(p) = &mut g.kind {
            p.alpha = alpha;
            p.beta = beta;
            p.eta = eta;
            found = true;
        }
        g
    })?;
    if found {
        return simulate(&circuit);
    }
    let mut psi = StateVector::zero(circuit.n())?;
    let prep = GateInstance::prep_eta(1, 1, EtaPrep::new(alpha, beta, eta).map_err(EngineError::from)?)
        .map_err(EngineError::from)?;
    psi.apply_gate(&prep)?;
    for g in circuit.gates() {
        psi.apply_gate(g)?;
    }
    Ok(psi)
}

/// True iff the final states for `eta1` and `eta2` agree up to global phase within 1e-9.
pub fn eta_invariance_check(
    alpha: f64,
    beta: Complex64,
    eta1: Complex64,
    eta2: Complex64,
    suffix: &Circuit,
) -> Result<bool, OracleError> {
    Ok(eta_fidelity(alpha, beta, eta1, eta2, suffix)? >= 1.0 - NORM_TOLERANCE)
}

/// `|<psi(eta1)|psi(eta2)>|` for the construction of [`eta_invariance_check`].
pub fn eta_fidelity(
    alpha: f64,
    beta: Complex64,
    eta1: Complex64,
    eta2: Complex64,
    suffix: &Circuit,
) -> Result<f64, OracleError> {
    let a = state_for_eta(alpha, beta, eta1, suffix)?;
    let b = state_for_eta(alpha, beta, eta2, suffix)?;
    Ok(a.fidelity(&b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn empty_circuit_stays_at_zero() {
        let psi = simulate(&Circuit::empty(3).unwrap()).unwrap();
        assert_eq!(psi.amplitudes()[0], Complex64::new(1.0, 0.0));
        assert!(psi.amplitudes()[1..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn bell_preparation() {
        let c = Circuit::new(2, vec![GateInstance::h(1, 1).unwrap(), GateInstance::cnot(2, 1, 2).unwrap()])
            .unwrap();
        let psi = simulate(&c).unwrap();
        let r = FRAC_1_SQRT_2;
        assert!((psi.amplitude_of(&[0, 0]) - Complex64::new(r, 0.0)).norm() < 1e-12);
        assert!((psi.amplitude_of(&[1, 1]) - Complex64::new(r, 0.0)).norm() < 1e-12);
        assert!(psi.amplitude_of(&[0, 1]).norm() < 1e-12);
        let rho = partial_trace(&psi, &[1]).unwrap();
        assert!((rho.matrix()[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!(rho.matrix()[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn x_on_wire_one_sets_the_high_bit() {
        let c = Circuit::new(3, vec![GateInstance::x(1, 1).unwrap()]).unwrap();
        let psi = simulate(&c).unwrap();
        assert_eq!(psi.amplitude_of(&[1, 0, 0]), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn product_state_traces_to_factor() {
        let c = Circuit::new(2, vec![GateInstance::h(1, 2).unwrap()]).unwrap();
        let rho = partial_trace(&simulate(&c).unwrap(), &[2]).unwrap();
        for (r, col) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert!((rho.matrix()[(r, col)].re - 0.5).abs() < 1e-12);
        }
        let rho1 = partial_trace(&simulate(&c).unwrap(), &[1]).unwrap();
        assert!((rho1.matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn state_limit_is_enforced() {
        assert_eq!(StateVector::zero(STATE_LIMIT + 1).unwrap_err(), OracleError::StateLimit { n: 21 });
    }

    #[test]
    fn equal_etas_are_invariant() {
        let c = Circuit::empty(2).unwrap();
        let eta = Complex64::from_polar(1.0, 0.7);
        assert!(eta_invariance_check(0.6, Complex64::new(0.0, 0.8), eta, eta, &c).unwrap());
    }
}
