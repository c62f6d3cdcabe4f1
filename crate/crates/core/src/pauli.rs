//! Exact arithmetic over n-qubit Pauli strings and complex-weighted sums of them.
//!
//! A string is stored as a pair of bit masks `(x, z)` plus a quarter phase. Bit `k`
//! of a mask refers to wire `k + 1`; wires are 1-indexed in every public API.
//! The key `(x, z)` always denotes the *Hermitian* tensor product of
//! `{I, X, Y, Z}` factors (a wire with both bits set is `Y`, not `XZ`), so the
//! adjoint of a [`PauliSum`] is plain coefficient conjugation.
//!
//! Dense conversions place wire 1 on the leftmost tensor factor, i.e. the most
//! significant bit of a basis index.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Coefficients with magnitude below this are dropped after every binary operation.
pub const PRUNE_TOLERANCE: f64 = 1e-12;

/// Widest network that may be expanded into a dense `2^n x 2^n` matrix.
pub const DENSE_LIMIT: usize = 12;

/// Masks are single machine words.
pub const MAX_WIRES: usize = 64;

pub type Matrix = DMatrix<Complex64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PauliError {
    #[error("wire-count mismatch: {0} vs {1}")]
    WidthMismatch(usize, usize),
    #[error("wire {wire} out of range for a {n}-wire network")]
    WireOutOfRange { wire: usize, n: usize },
    #[error("{n} wires exceeds the dense limit of {DENSE_LIMIT}")]
    DenseLimit { n: usize },
    #[error("{n} wires exceeds the mask width of {MAX_WIRES}")]
    TooWide { n: usize },
    #[error("matrix of dimension {rows}x{cols} is not 2^n square")]
    BadDimension { rows: usize, cols: usize },
    #[error("cannot parse Pauli sum at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// Single-wire Pauli factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const XYZ: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// `i^k` for `k` taken mod 4.
pub fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Phase exponent `k` such that `P(a) P(b) = i^k P(a ^ b)` for Hermitian strings.
#[inline]
fn product_phase(ax: u64, az: u64, bx: u64, bz: u64) -> u32 {
    let cx = ax ^ bx;
    let cz = az ^ bz;
    let k = (ax & az).count_ones() + (bx & bz).count_ones() + 2 * (az & bx).count_ones();
    // subtracting |cx & cz| mod 4 == adding 3 * |cx & cz|
    (k + 3 * (cx & cz).count_ones()) % 4
}

#[inline]
fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Maps a wire mask (bit k = wire k+1) to a dense basis-index mask (wire 1 = MSB).
#[inline]
pub(crate) fn mask_to_index(mask: u64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    (mask.reverse_bits() >> (64 - n)) as usize
}

#[inline]
pub(crate) fn index_to_mask(index: usize, n: usize) -> u64 {
    mask_to_index(index as u64, n) as u64
}

fn check_width(n: usize) -> Result<(), PauliError> {
    if n > MAX_WIRES {
        Err(PauliError::TooWide { n })
    } else {
        Ok(())
    }
}

fn check_wire(wire: usize, n: usize) -> Result<(), PauliError> {
    if wire == 0 || wire > n {
        Err(PauliError::WireOutOfRange { wire, n })
    } else {
        Ok(())
    }
}

/// One phased tensor product of Pauli factors, `i^phase * P(x, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
    phase: u8,
}

impl PauliString {
    pub fn identity(n: usize) -> Result<Self, PauliError> {
        check_width(n)?;
        Ok(Self { n, x: 0, z: 0, phase: 0 })
    }

    pub fn from_masks(n: usize, x: u64, z: u64, phase_power: u32) -> Result<Self, PauliError> {
        check_width(n)?;
        let m = full_mask(n);
        if x & !m != 0 || z & !m != 0 {
            let wire = 64 - ((x | z) & !m).leading_zeros() as usize;
            return Err(PauliError::WireOutOfRange { wire, n });
        }
        Ok(Self { n, x, z, phase: (phase_power % 4) as u8 })
    }

    /// `pauli` on `wire` (1-indexed), identity elsewhere.
    pub fn single(n: usize, wire: usize, pauli: Pauli) -> Result<Self, PauliError> {
        check_width(n)?;
        check_wire(wire, n)?;
        let (bx, bz) = pauli.bits();
        let bit = 1u64 << (wire - 1);
        Ok(Self {
            n,
            x: if bx { bit } else { 0 },
            z: if bz { bit } else { 0 },
            phase: 0,
        })
    }

    /// Builds a string from `(wire, factor)` pairs; repeated wires are multiplied in order.
    pub fn from_factors(n: usize, factors: &[(usize, Pauli)]) -> Result<Self, PauliError> {
        let mut acc = Self::identity(n)?;
        for &(wire, p) in factors {
            acc = acc.mul(&Self::single(n, wire, p)?)?;
        }
        Ok(acc)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn phase_power(&self) -> u32 {
        self.phase as u32
    }

    pub fn phase(&self) -> Complex64 {
        i_pow(self.phase as u32)
    }

    pub fn factor(&self, wire: usize) -> Pauli {
        let bit = 1u64 << (wire - 1);
        Pauli::from_bits(self.x & bit != 0, self.z & bit != 0)
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0 && self.phase == 0
    }

    pub fn commutes_with(&self, other: &Self) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Exact operator product `self * other`.
    pub fn mul(&self, other: &Self) -> Result<Self, PauliError> {
        if self.n != other.n {
            return Err(PauliError::WidthMismatch(self.n, other.n));
        }
        let k = product_phase(self.x, self.z, other.x, other.z);
        Ok(Self {
            n: self.n,
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            phase: ((self.phase as u32 + other.phase as u32 + k) % 4) as u8,
        })
    }

    pub fn adjoint(&self) -> Self {
        Self { phase: ((4 - self.phase as u32) % 4) as u8, ..*self }
    }

    pub fn to_sum(&self) -> PauliSum {
        let mut s = PauliSum::zero(self.n).expect("width checked at construction");
        s.terms.insert((self.x, self.z), self.phase());
        s
    }

    pub fn to_dense(&self) -> Result<Matrix, PauliError> {
        self.to_sum().to_dense()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = ["+", "+i", "-", "-i"][self.phase as usize];
        write!(f, "{prefix}{}", format_key(self.x, self.z, self.n))
    }
}

fn format_key(x: u64, z: u64, n: usize) -> String {
    if x == 0 && z == 0 {
        return "I".to_string();
    }
    let mut out = String::new();
    for k in 0..n {
        let bit = 1u64 << k;
        let p = Pauli::from_bits(x & bit != 0, z & bit != 0);
        if p != Pauli::I {
            out.push(p.letter());
            out.push_str(&(k + 1).to_string());
        }
    }
    out
}

fn format_complex(c: Complex64) -> String {
    let sign = if c.im.is_sign_negative() { '-' } else { '+' };
    format!("({}{}{}i)", c.re, sign, c.im.abs())
}

/// Complex-weighted sum of Hermitian Pauli strings over `n` wires.
///
/// Terms are kept in canonical `(x_mask, z_mask)` lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n: usize,
    terms: BTreeMap<(u64, u64), Complex64>,
}

impl PauliSum {
    pub fn zero(n: usize) -> Result<Self, PauliError> {
        check_width(n)?;
        Ok(Self { n, terms: BTreeMap::new() })
    }

    pub fn identity(n: usize) -> Result<Self, PauliError> {
        Ok(PauliString::identity(n)?.to_sum())
    }

    pub fn single(n: usize, wire: usize, pauli: Pauli) -> Result<Self, PauliError> {
        Ok(PauliString::single(n, wire, pauli)?.to_sum())
    }

    /// Sum from `(coefficient, string)` pairs; duplicate keys merge, then pruned.
    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self, PauliError>
    where
        I: IntoIterator<Item = (Complex64, PauliString)>,
    {
        let mut s = Self::zero(n)?;
        for (c, p) in terms {
            if p.n != n {
                return Err(PauliError::WidthMismatch(n, p.n));
            }
            *s.terms.entry((p.x, p.z)).or_default() += c * p.phase();
        }
        s.prune(PRUNE_TOLERANCE);
        Ok(s)
    }

    /// Raw constructor from Hermitian-key coefficients; no pruning applied.
    pub fn from_key_map(n: usize, terms: BTreeMap<(u64, u64), Complex64>) -> Result<Self, PauliError> {
        check_width(n)?;
        let m = full_mask(n);
        for &(x, z) in terms.keys() {
            if (x | z) & !m != 0 {
                let wire = 64 - ((x | z) & !m).leading_zeros() as usize;
                return Err(PauliError::WireOutOfRange { wire, n });
            }
        }
        Ok(Self { n, terms })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in canonical order as `((x_mask, z_mask), coefficient)`.
    pub fn iter(&self) -> impl Iterator<Item = (&(u64, u64), &Complex64)> {
        self.terms.iter()
    }

    pub fn terms(&self) -> &BTreeMap<(u64, u64), Complex64> {
        &self.terms
    }

    pub fn coefficient(&self, x: u64, z: u64) -> Complex64 {
        self.terms.get(&(x, z)).copied().unwrap_or_default()
    }

    /// Union of wires any term acts on, as a mask.
    pub fn support(&self) -> u64 {
        self.terms.keys().fold(0, |acc, &(x, z)| acc | x | z)
    }

    /// Drops coefficients with `|c| < tol`; `tol = 0` removes exact zeros only.
    pub fn prune(&mut self, tol: f64) {
        self.terms.retain(|_, c| {
            let m = c.norm();
            if tol == 0.0 {
                m != 0.0
            } else {
                m >= tol
            }
        });
    }

    fn check_same(&self, other: &Self) -> Result<(), PauliError> {
        if self.n != other.n {
            Err(PauliError::WidthMismatch(self.n, other.n))
        } else {
            Ok(())
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, PauliError> {
        self.add_with_tolerance(other, PRUNE_TOLERANCE)
    }

    pub fn add_with_tolerance(&self, other: &Self, tol: f64) -> Result<Self, PauliError> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (k, c) in &other.terms {
            *out.terms.entry(*k).or_default() += *c;
        }
        out.prune(tol);
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, PauliError> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let mut out = Self {
            n: self.n,
            terms: self.terms.iter().map(|(k, c)| (*k, *c * factor)).collect(),
        };
        out.prune(PRUNE_TOLERANCE);
        out
    }

    pub fn adjoint(&self) -> Self {
        Self {
            n: self.n,
            terms: self.terms.iter().map(|(k, c)| (*k, c.conj())).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self, PauliError> {
        self.mul_with_tolerance(other, PRUNE_TOLERANCE)
    }

    /// Bilinear product, merging duplicate keys, then pruning at `tol`.
    pub fn mul_with_tolerance(&self, other: &Self, tol: f64) -> Result<Self, PauliError> {
        self.check_same(other)?;
        let pairs = self.terms.len().saturating_mul(other.terms.len());
        let mut out = Self::zero(self.n)?;
        if pairs == 0 {
            return Ok(out);
        }
        let dense_slots = if 2 * self.n <= 20 { 1usize << (2 * self.n) } else { usize::MAX };
        if dense_slots != usize::MAX && pairs >= dense_slots / 4 {
            // Flat accumulator indexed by (x << n) | z.
            let mut acc = vec![Complex64::default(); dense_slots];
            let mut touched = vec![false; dense_slots];
            for (&(ax, az), &ca) in &self.terms {
                for (&(bx, bz), &cb) in &other.terms {
                    let slot = (((ax ^ bx) << self.n) | (az ^ bz)) as usize;
                    acc[slot] += ca * cb * i_pow(product_phase(ax, az, bx, bz));
                    touched[slot] = true;
                }
            }
            let zmask = full_mask(self.n);
            for (slot, c) in acc.into_iter().enumerate() {
                if touched[slot] {
                    out.terms.insert(((slot as u64) >> self.n, slot as u64 & zmask), c);
                }
            }
        } else {
            let mut acc: HashMap<(u64, u64), Complex64> = HashMap::with_capacity(pairs.min(1 << 16));
            for (&(ax, az), &ca) in &self.terms {
                for (&(bx, bz), &cb) in &other.terms {
                    *acc.entry((ax ^ bx, az ^ bz)).or_default() +=
                        ca * cb * i_pow(product_phase(ax, az, bx, bz));
                }
            }
            out.terms.extend(acc);
        }
        out.prune(tol);
        Ok(out)
    }

    /// `self * other - other * self`.
    pub fn commutator(&self, other: &Self) -> Result<Self, PauliError> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// `self * other + other * self`.
    pub fn anticommutator(&self, other: &Self) -> Result<Self, PauliError> {
        self.mul(other)?.add(&other.mul(self)?)
    }

    /// `<0...0| S |0...0>`: every all-{I,Z} string has eigenvalue +1 on the zero state.
    pub fn expectation_zero(&self) -> Complex64 {
        // x == 0 keys sort first
        self.terms
            .range((0, 0)..=(0, u64::MAX))
            .map(|(_, c)| *c)
            .sum()
    }

    /// `<0| self * other |0>` without forming the full product.
    pub fn expectation_zero_of_product(&self, other: &Self) -> Result<Complex64, PauliError> {
        self.check_same(other)?;
        let mut by_x: HashMap<u64, Vec<(u64, Complex64)>> = HashMap::new();
        for (&(x, z), &c) in &other.terms {
            by_x.entry(x).or_default().push((z, c));
        }
        let mut total = Complex64::default();
        for (&(ax, az), &ca) in &self.terms {
            if let Some(bs) = by_x.get(&ax) {
                for &(bz, cb) in bs {
                    // P(a)P(b) with equal x masks has x = 0, so only the phase matters.
                    total += ca * cb * i_pow(product_phase(ax, az, ax, bz));
                }
            }
        }
        Ok(total)
    }

    /// Largest coefficient difference over the union of keys.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, PauliError> {
        self.check_same(other)?;
        let mut worst: f64 = 0.0;
        for (k, c) in &self.terms {
            worst = worst.max((*c - other.coefficient(k.0, k.1)).norm());
        }
        for (k, c) in &other.terms {
            if !self.terms.contains_key(k) {
                worst = worst.max(c.norm());
            }
        }
        Ok(worst)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        matches!(self.max_abs_diff(other), Ok(d) if d <= tol)
    }

    /// Same key set, coefficients within `tol`.
    pub fn same_structure(&self, other: &Self, tol: f64) -> bool {
        self.n == other.n
            && self.terms.len() == other.terms.len()
            && self
                .terms
                .iter()
                .zip(other.terms.iter())
                .all(|((ka, ca), (kb, cb))| ka == kb && (*ca - *cb).norm() <= tol)
    }

    /// Bitwise equality of keys and coefficients.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.terms.len() == other.terms.len()
            && self.terms.iter().zip(other.terms.iter()).all(|((ka, ca), (kb, cb))| {
                ka == kb
                    && ca.re.to_bits() == cb.re.to_bits()
                    && ca.im.to_bits() == cb.im.to_bits()
            })
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }

    /// Re-expresses the sum on `wires.len()` local wires; `wires[k]` becomes local wire `k+1`.
    /// Fails if any term acts outside `wires`.
    pub fn restrict(&self, wires: &[usize]) -> Result<Self, PauliError> {
        for &w in wires {
            check_wire(w, self.n)?;
        }
        let mut allowed = 0u64;
        for &w in wires {
            allowed |= 1 << (w - 1);
        }
        let stray = self.support() & !allowed;
        if stray != 0 {
            return Err(PauliError::WireOutOfRange {
                wire: stray.trailing_zeros() as usize + 1,
                n: wires.len(),
            });
        }
        let remap = |m: u64| {
            wires
                .iter()
                .enumerate()
                .fold(0u64, |acc, (k, &w)| acc | (((m >> (w - 1)) & 1) << k))
        };
        let terms = self.terms.iter().map(|(&(x, z), &c)| ((remap(x), remap(z)), c)).collect();
        Self::from_key_map(wires.len(), terms)
    }

    /// Inverse of [`PauliSum::restrict`]: local wire `k+1` is placed on `wires[k]` of an `n`-wire network.
    pub fn embed(&self, n: usize, wires: &[usize]) -> Result<Self, PauliError> {
        if wires.len() != self.n {
            return Err(PauliError::WidthMismatch(self.n, wires.len()));
        }
        for &w in wires {
            check_wire(w, n)?;
        }
        let remap = |m: u64| {
            wires
                .iter()
                .enumerate()
                .fold(0u64, |acc, (k, &w)| acc | (((m >> k) & 1) << (w - 1)))
        };
        let terms = self.terms.iter().map(|(&(x, z), &c)| ((remap(x), remap(z)), c)).collect();
        Self::from_key_map(n, terms)
    }

    /// Exact Kronecker expansion (wire 1 = leftmost factor).
    pub fn to_dense(&self) -> Result<Matrix, PauliError> {
        if self.n > DENSE_LIMIT {
            return Err(PauliError::DenseLimit { n: self.n });
        }
        let dim = 1usize << self.n;
        let mut m = Matrix::zeros(dim, dim);
        for (&(x, z), &c) in &self.terms {
            let xi = mask_to_index(x, self.n);
            let zi = mask_to_index(z, self.n);
            let base = c * i_pow((x & z).count_ones());
            for col in 0..dim {
                let sign = if (zi & col).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                m[(col ^ xi, col)] += base * sign;
            }
        }
        Ok(m)
    }

    /// Pauli decomposition of a `2^n x 2^n` matrix via a Walsh-Hadamard transform per x mask.
    pub fn from_dense(m: &Matrix) -> Result<Self, PauliError> {
        let dim = m.nrows();
        if dim != m.ncols() || dim == 0 || !dim.is_power_of_two() {
            return Err(PauliError::BadDimension { rows: m.nrows(), cols: m.ncols() });
        }
        let n = dim.trailing_zeros() as usize;
        if n > DENSE_LIMIT {
            return Err(PauliError::DenseLimit { n });
        }
        let mut out = Self::zero(n)?;
        let norm = 1.0 / dim as f64;
        let mut buf = vec![Complex64::default(); dim];
        for xi in 0..dim {
            // tr(P M) = i^{|x&z|} sum_c (-1)^{z.c} M[c][c ^ x]
            for (c, slot) in buf.iter_mut().enumerate() {
                *slot = m[(c, c ^ xi)];
            }
            walsh_hadamard(&mut buf);
            let x = index_to_mask(xi, n);
            for (zi, v) in buf.iter().enumerate() {
                let z = index_to_mask(zi, n);
                let c = *v * i_pow((x & z).count_ones()) * norm;
                if c.norm() >= PRUNE_TOLERANCE {
                    out.terms.insert((x, z), c);
                }
            }
        }
        Ok(out)
    }
}

fn walsh_hadamard(buf: &mut [Complex64]) {
    let mut h = 1;
    while h < buf.len() {
        for i in (0..buf.len()).step_by(2 * h) {
            for j in i..i + h {
                let a = buf[j];
                let b = buf[j + h];
                buf[j] = a + b;
                buf[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

impl fmt::Display for PauliSum {
    /// `(0.5+0i)·X1Z3 + (0-0.5i)·Y2`; the zero sum prints as `0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&(x, z), &c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}·{}", format_complex(c), format_key(x, z, self.n))?;
        }
        Ok(())
    }
}

/// Parses the textual form produced by `Display`. Width must be supplied since it
/// cannot be inferred from the terms.
pub fn parse_sum(text: &str, n: usize) -> Result<PauliSum, PauliError> {
    let mut p = SumParser { s: text.as_bytes(), pos: 0 };
    let mut sum = PauliSum::zero(n)?;
    p.skip_ws();
    if p.peek() == Some(b'0') && p.s[p.pos..].iter().all(|b| b.is_ascii_whitespace() || *b == b'0') {
        return Ok(sum);
    }
    loop {
        p.skip_ws();
        let c = p.coefficient()?;
        p.skip_ws();
        if !(p.eat_str("·") || p.eat(b'*')) {
            return Err(p.err("expected '·' or '*' after coefficient"));
        }
        p.skip_ws();
        let (x, z) = p.string(n)?;
        *sum.terms.entry((x, z)).or_default() += c;
        p.skip_ws();
        if p.pos == p.s.len() {
            break;
        }
        if !p.eat(b'+') {
            return Err(p.err("expected '+' between terms"));
        }
    }
    sum.prune(PRUNE_TOLERANCE);
    Ok(sum)
}

impl FromStr for PauliSum {
    type Err = PauliError;

    /// Width is inferred from the highest wire mentioned.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wide = parse_sum(s, MAX_WIRES)?;
        let n = 64 - wide.support().leading_zeros() as usize;
        wide.restrict(&(1..=n.max(1)).collect::<Vec<_>>())
    }
}

struct SumParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl SumParser<'_> {
    fn err(&self, msg: &str) -> PauliError {
        PauliError::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_str(&mut self, t: &str) -> bool {
        if self.s[self.pos..].starts_with(t.as_bytes()) {
            self.pos += t.len();
            true
        } else {
            false
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b) if b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn number(&mut self) -> Result<f64, PauliError> {
        let start = self.pos;
        while let Some(b) = self.peek() {
            let sign_ok = self.pos == start || matches!(self.s[self.pos - 1], b'e' | b'E');
            if b.is_ascii_digit() || matches!(b, b'.' | b'e' | b'E') || (matches!(b, b'+' | b'-') && sign_ok) {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
        text.parse::<f64>().map_err(|_| PauliError::Parse {
            pos: start,
            msg: format!("bad number '{text}'"),
        })
    }

    /// `(re±imi)`, or a bare real number.
    fn coefficient(&mut self) -> Result<Complex64, PauliError> {
        if !self.eat(b'(') {
            return Ok(Complex64::new(self.number()?, 0.0));
        }
        self.skip_ws();
        let re = self.number()?;
        self.skip_ws();
        let sign = match self.peek() {
            Some(b'+') => 1.0,
            Some(b'-') => -1.0,
            _ => return Err(self.err("expected '+' or '-' before imaginary part")),
        };
        self.pos += 1;
        self.skip_ws();
        let im = self.number()?;
        if !self.eat(b'i') {
            return Err(self.err("expected 'i' after imaginary part"));
        }
        self.skip_ws();
        if !self.eat(b')') {
            return Err(self.err("expected ')'"));
        }
        Ok(Complex64::new(re, sign * im))
    }

    fn string(&mut self, n: usize) -> Result<(u64, u64), PauliError> {
        if self.eat(b'I') && !matches!(self.peek(), Some(b) if b.is_ascii_digit()) {
            return Ok((0, 0));
        }
        let (mut x, mut z) = (0u64, 0u64);
        let mut any = false;
        while let Some(letter) = self.peek() {
            let p = match letter {
                b'X' => Pauli::X,
                b'Y' => Pauli::Y,
                b'Z' => Pauli::Z,
                _ => break,
            };
            self.pos += 1;
            let start = self.pos;
            while matches!(self.peek(), Some(b) if b.is_ascii_digit()) {
                self.pos += 1;
            }
            let wire: usize = std::str::from_utf8(&self.s[start..self.pos])
                .ok()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| self.err("expected wire number after Pauli letter"))?;
            if wire == 0 || wire > n {
                return Err(PauliError::Parse {
                    pos: start,
                    msg: format!("wire {wire} out of range 1..={n}"),
                });
            }
            let bit = 1u64 << (wire - 1);
            if (x | z) & bit != 0 {
                return Err(PauliError::Parse {
                    pos: start,
                    msg: format!("wire {wire} repeated in one string"),
                });
            }
            let (bx, bz) = p.bits();
            if bx {
                x |= bit;
            }
            if bz {
                z |= bit;
            }
            any = true;
        }
        if !any {
            return Err(self.err("expected a Pauli string"));
        }
        Ok((x, z))
    }
}
