//! Reduced density matrices and observable expectations from descriptors.
//!
//! Every expectation is `<0...0| O(t) |0...0>`, where `O(t)` is obtained by
//! substituting time-t descriptor components into the time-0 polynomial for `O`.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::engine::DescriptorSet;
use crate::pauli::{Matrix, Pauli, PauliError, PauliSum};

/// Largest subset `reduced_density` will enumerate (`4^8` Pauli strings).
pub const MAX_SUBSET: usize = 8;

pub const DENSITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TomographyError {
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error("subset of {0} wires exceeds the limit of {MAX_SUBSET}")]
    SubsetTooLarge(usize),
    #[error("wire {wire} out of range for a {n}-wire network")]
    WireOutOfRange { wire: usize, n: usize },
    #[error("expectation of q_{component} on wire {wire} has imaginary part {imag:e}")]
    NotReal { wire: usize, component: char, imag: f64 },
}

/// Density matrix on a set of wires; `wires[0]` is the leftmost tensor factor.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    wires: Vec<usize>,
    matrix: Matrix,
}

impl DensityMatrix {
    pub fn new(wires: Vec<usize>, matrix: Matrix) -> Self {
        Self { wires, matrix }
    }

    pub fn wires(&self) -> &[usize] {
        &self.wires
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// `|psi><psi|` for the given amplitudes (normalized here).
    pub fn pure(wires: Vec<usize>, amplitudes: &[Complex64]) -> Self {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let d = amplitudes.len();
        let m = Matrix::from_fn(d, d, |r, c| amplitudes[r] * amplitudes[c].conj() / (norm * norm));
        Self { wires, matrix: m }
    }

    /// Identity divided by its dimension.
    pub fn maximally_mixed(wires: Vec<usize>) -> Self {
        let d = 1usize << wires.len();
        Self { wires, matrix: Matrix::identity(d, d) / Complex64::new(d as f64, 0.0) }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.matrix.shape() != other.matrix.shape() {
            return f64::INFINITY;
        }
        self.matrix.iter().zip(other.matrix.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect()
    }

    /// Hermitian, unit trace, and positive semidefinite, each within `tol`.
    pub fn check(&self, tol: f64) -> Result<(), String> {
        let herm = (&self.matrix - self.matrix.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        if herm > tol {
            return Err(format!("not Hermitian (deviation {herm:e})"));
        }
        let tr = self.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > tol {
            return Err(format!("trace {tr} differs from 1"));
        }
        if let Some(min) = self.eigenvalues().into_iter().reduce(f64::min) {
            if min < -tol {
                return Err(format!("negative eigenvalue {min:e}"));
            }
        }
        Ok(())
    }

    /// Row-major `[re, im]` pairs.
    pub fn to_pairs(&self) -> Vec<Vec<[f64; 2]>> {
        (0..self.dim())
            .map(|r| (0..self.dim()).map(|c| [self.matrix[(r, c)].re, self.matrix[(r, c)].im]).collect())
            .collect()
    }
}

/// Bloch vector `(p_x, p_y, p_z)` of wire `k`.
pub fn bloch_components(set: &DescriptorSet, k: usize) -> Result<[f64; 3], TomographyError> {
    let d = set.get(k).ok_or(TomographyError::WireOutOfRange { wire: k, n: set.n() })?;
    let mut out = [0.0; 3];
    for (slot, (p, name)) in out.iter_mut().zip([(Pauli::X, 'x'), (Pauli::Y, 'y'), (Pauli::Z, 'z')]) {
        let e = d.component(p)?.expectation_zero();
        if e.im.abs() > DENSITY_TOLERANCE {
            return Err(TomographyError::NotReal { wire: k, component: name, imag: e.im });
        }
        *slot = e.re;
    }
    Ok(out)
}

/// Reduced density matrix on `wires` (sorted, deduplicated) by enumerating all `4^|I|`
/// Pauli strings on the subset.
pub fn reduced_density(set: &DescriptorSet, wires: &[usize]) -> Result<DensityMatrix, TomographyError> {
    let mut keep = wires.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.len() > MAX_SUBSET {
        return Err(TomographyError::SubsetTooLarge(keep.len()));
    }
    for &w in &keep {
        if w == 0 || w > set.n() {
            return Err(TomographyError::WireOutOfRange { wire: w, n: set.n() });
        }
    }
    let k = keep.len();
    // components[j] = [x, y, z] of keep[j]
    let components = keep
        .iter()
        .map(|&w| {
            let d = set.descriptor(w);
            Ok([d.x().clone(), d.y()?, d.z().clone()])
        })
        .collect::<Result<Vec<_>, PauliError>>()?;

    let mut coeffs = std::collections::BTreeMap::new();
    let scale = 1.0 / (1u64 << k) as f64;
    let mut visit = |key: (u64, u64), value: Complex64| {
        if value.norm() >= crate::pauli::PRUNE_TOLERANCE {
            coeffs.insert(key, value * scale);
        }
    };
    enumerate(&components, 0, None, (0, 0), &mut visit)?;
    let local = PauliSum::from_key_map(k, coeffs)?;
    Ok(DensityMatrix::new(keep, local.to_dense()?))
}

fn enumerate(
    components: &[[PauliSum; 3]],
    depth: usize,
    partial: Option<&PauliSum>,
    key: (u64, u64),
    visit: &mut dyn FnMut((u64, u64), Complex64),
) -> Result<(), PauliError> {
    if depth == components.len() {
        visit(key, partial.map_or(Complex64::new(1.0, 0.0), PauliSum::expectation_zero));
        return Ok(());
    }
    let last = depth + 1 == components.len();
    let bit = 1u64 << depth;
    // identity factor
    enumerate(components, depth + 1, partial, key, visit)?;
    for (j, (bx, bz)) in [(true, false), (true, true), (false, true)].into_iter().enumerate() {
        let next_key = (key.0 | if bx { bit } else { 0 }, key.1 | if bz { bit } else { 0 });
        let factor = &components[depth][j];
        if last {
            let e = match partial {
                None => factor.expectation_zero(),
                Some(p) => p.expectation_zero_of_product(factor)?,
            };
            visit(next_key, e);
        } else {
            let product = match partial {
                None => factor.clone(),
                Some(p) => p.mul(factor)?,
            };
            enumerate(components, depth + 1, Some(&product), next_key, visit)?;
        }
    }
    Ok(())
}

/// Expectation of an observable and whether its outcome is definite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Outcome {
    pub expectation: [f64; 2],
    pub involutory: bool,
    pub is_definite: bool,
}

/// For each observable (already built from current-time components): `<0|O|0>`, and
/// `is_definite` iff `O^2 = 1` and `|<O>| = 1` within 1e-9. Non-involutory observables
/// are flagged, never definite.
pub fn definite_outcomes(set: &DescriptorSet, observables: &[PauliSum]) -> Result<Vec<Outcome>, TomographyError> {
    let id = PauliSum::identity(set.n())?;
    observables
        .iter()
        .map(|o| {
            let e = o.expectation_zero();
            let involutory = o.mul(o)?.max_abs_diff(&id)? <= DENSITY_TOLERANCE;
            let is_definite = involutory && (e.norm() - 1.0).abs() <= DENSITY_TOLERANCE;
            Ok(Outcome { expectation: [e.re, e.im], involutory, is_definite })
        })
        .collect()
}

/// Product of descriptor components of `set`, e.g. `[(2, X), (3, X)]` for `q_2x q_3x`.
pub fn component_product(set: &DescriptorSet, factors: &[(usize, Pauli)]) -> Result<PauliSum, TomographyError> {
    let mut acc = PauliSum::identity(set.n())?;
    for &(w, p) in factors {
        let d = set.get(w).ok_or(TomographyError::WireOutOfRange { wire: w, n: set.n() })?;
        acc = acc.mul(&d.component(p)?)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::init_descriptors;

    #[test]
    fn fresh_wire_points_up() {
        let set = init_descriptors(3).unwrap();
        assert_eq!(bloch_components(&set, 2).unwrap(), [0.0, 0.0, 1.0]);
        assert!(bloch_components(&set, 4).is_err());
    }

    #[test]
    fn fresh_pair_is_projector_on_zero() {
        let set = init_descriptors(3).unwrap();
        let rho = reduced_density(&set, &[3, 1]).unwrap();
        assert_eq!(rho.wires(), &[1, 3]);
        assert!((rho.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!((rho.purity() - 1.0).abs() < 1e-12);
        rho.check(1e-9).unwrap();
    }

    #[test]
    fn subset_cap() {
        let set = init_descriptors(9).unwrap();
        let all: Vec<_> = (1..=9).collect();
        assert_eq!(reduced_density(&set, &all).unwrap_err(), TomographyError::SubsetTooLarge(9));
    }

    #[test]
    fn non_involutory_observable_is_flagged() {
        let set = init_descriptors(1).unwrap();
        let o = set.descriptor(1).z().scale(2.0.into());
        let out = definite_outcomes(&set, &[o]).unwrap();
        assert!(!out[0].involutory);
        assert!(!out[0].is_definite);
        let out = definite_outcomes(&set, &[set.descriptor(1).z().clone()]).unwrap();
        assert!(out[0].is_definite);
    }
}
