//! Pauli strings in symplectic (bit-mask) form and real-weighted sums of them.
//!
//! A [`PauliString`] on `n` qubits stores an X mask, a Z mask and a phase
//! `i^k`. Bit `q` set in both masks means the letter on qubit `q` is `Y`
//! (the Hermitian letter, not `XZ`), so the phase of a Hermitian string is
//! always `+1` or `-1`.
//!
//! Masks are `u128`, which caps the register at [`MAX_QUBITS`].

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Largest register a [`PauliString`] can address.
pub const MAX_QUBITS: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Letter {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    fn symbol(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }
}

/// A unit phase `i^k`, `k` in `0..4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_power(k: u32) -> Phase {
        Phase((k & 3) as u8)
    }

    pub fn power(self) -> u32 {
        self.0 as u32
    }

    pub fn is_real(self) -> bool {
        self.0 & 1 == 0
    }

    /// `+1.0` / `-1.0` for real phases, `None` for `±i`.
    pub fn sign(self) -> Option<f64> {
        match self.0 {
            0 => Some(1.0),
            2 => Some(-1.0),
            _ => None,
        }
    }

    pub fn to_complex(self) -> num_complex::Complex64 {
        use num_complex::Complex64;
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) & 3)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            0 => "+1",
            1 => "+i",
            2 => "-1",
            _ => "-i",
        })
    }
}

/// Raw product of two strings given as `(x, z, phase power)` triples.
///
/// Returns the product in the same letter-phase convention.
#[inline]
pub(crate) fn mul_raw(a: (u128, u128, u32), b: (u128, u128, u32)) -> (u128, u128, u32) {
    let (xa, za, qa) = a;
    let (xb, zb, qb) = b;
    // Rewrite each factor as i^q' X^x Z^z, multiply, rewrite back.
    let qa_xz = qa + (xa & za).count_ones();
    let qb_xz = qb + (xb & zb).count_ones();
    let q_xz = qa_xz + qb_xz + 2 * (za & xb).count_ones();
    let x = xa ^ xb;
    let z = za ^ zb;
    let q = (q_xz + 4 * 128 - (x & z).count_ones()) & 3;
    (x, z, q)
}

/// Symplectic inner product parity: `true` iff the strings anticommute.
#[inline]
pub(crate) fn anticommute_raw(xa: u128, za: u128, xb: u128, zb: u128) -> bool {
    ((xa & zb).count_ones() + (za & xb).count_ones()) & 1 == 1
}

fn full_mask(n: usize) -> u128 {
    if n >= 128 {
        u128::MAX
    } else {
        (1u128 << n) - 1
    }
}

/// An `n`-qubit Pauli operator `i^k · P_0 ⊗ … ⊗ P_{n-1}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: u128,
    z: u128,
    phase: Phase,
}

impl PauliString {
    pub fn new(n_qubits: usize, x_mask: u128, z_mask: u128, phase: Phase) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Dimension(format!(
                "n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        let mask = full_mask(n_qubits);
        if x_mask & !mask != 0 || z_mask & !mask != 0 {
            return Err(Error::Dimension(format!(
                "mask has bits beyond {n_qubits} qubits"
            )));
        }
        Ok(PauliString {
            n: n_qubits,
            x: x_mask,
            z: z_mask,
            phase,
        })
    }

    pub fn identity(n_qubits: usize) -> Result<Self> {
        Self::new(n_qubits, 0, 0, Phase::ONE)
    }

    pub fn single(n_qubits: usize, qubit: usize, letter: Letter) -> Result<Self> {
        Self::from_letters(n_qubits, [(qubit, letter)])
    }

    /// Builds a string from `(qubit, letter)` pairs. Repeated qubits multiply.
    pub fn from_letters<I>(n_qubits: usize, letters: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, Letter)>,
    {
        let mut acc = Self::identity(n_qubits)?;
        for (q, letter) in letters {
            if q >= n_qubits {
                return Err(Error::Dimension(format!(
                    "qubit {q} out of range for {n_qubits} qubits"
                )));
            }
            let (bx, bz) = letter.bits();
            let factor = PauliString {
                n: n_qubits,
                x: (bx as u128) << q,
                z: (bz as u128) << q,
                phase: Phase::ONE,
            };
            acc = acc.product(&factor);
        }
        Ok(acc)
    }

    pub(crate) fn from_raw(n: usize, x: u128, z: u128, q: u32) -> Self {
        PauliString {
            n,
            x,
            z,
            phase: Phase::from_power(q),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn x_mask(&self) -> u128 {
        self.x
    }

    pub fn z_mask(&self) -> u128 {
        self.z
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    pub fn letter(&self, qubit: usize) -> Letter {
        if qubit >= self.n {
            return Letter::I;
        }
        Letter::from_bits((self.x >> qubit) & 1 == 1, (self.z >> qubit) & 1 == 1)
    }

    pub fn support_mask(&self) -> u128 {
        self.x | self.z
    }

    /// Qubits acted on non-trivially, ascending.
    pub fn support(&self) -> Vec<usize> {
        mask_to_indices(self.support_mask())
    }

    pub fn weight(&self) -> usize {
        self.support_mask().count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase.is_real()
    }

    fn check_same_size(&self, other: &PauliString) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Dimension(format!(
                "Pauli strings on {} and {} qubits",
                self.n, other.n
            )));
        }
        Ok(())
    }

    /// `self · other` with the accumulated phase.
    pub fn mul(&self, other: &PauliString) -> Result<PauliString> {
        self.check_same_size(other)?;
        Ok(self.product(other))
    }

    pub(crate) fn product(&self, other: &PauliString) -> PauliString {
        let (x, z, q) = mul_raw(
            (self.x, self.z, self.phase.power()),
            (other.x, other.z, other.phase.power()),
        );
        PauliString::from_raw(self.n, x, z, q)
    }

    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        self.check_same_size(other)?;
        Ok(!self.anticommutes_with(other))
    }

    pub(crate) fn anticommutes_with(&self, other: &PauliString) -> bool {
        anticommute_raw(self.x, self.z, other.x, other.z)
    }

    /// Letters only, e.g. `Z3 X4 Z5`; `I` for the identity.
    pub fn letters_string(&self) -> String {
        if self.is_identity() {
            return "I".to_string();
        }
        self.support()
            .into_iter()
            .map(|q| format!("{}{}", self.letter(q).symbol(), q))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Parses `"Z3 X4 Z5"`, optionally prefixed by a phase: `"-1 * Z3 X4"`,
    /// `"+i * Y0"`, `"-Z0"`.
    pub fn parse(n_qubits: usize, text: &str) -> Result<PauliString> {
        let text = text.trim();
        let (phase, body) = match text.split_once('*') {
            Some((head, body)) => (parse_phase(head.trim())?, body),
            None => {
                if let Some(rest) = text.strip_prefix('-') {
                    (Phase::MINUS_ONE, rest)
                } else if let Some(rest) = text.strip_prefix('+') {
                    (Phase::ONE, rest)
                } else {
                    (Phase::ONE, text)
                }
            }
        };
        let letters = parse_letters(n_qubits, body)?;
        Ok(PauliString::from_letters(n_qubits, letters)?.scale_phase(phase))
    }

    pub(crate) fn scale_phase(mut self, phase: Phase) -> Self {
        self.phase = self.phase * phase;
        self
    }
}

fn parse_phase(text: &str) -> Result<Phase> {
    match text.replace(' ', "").as_str() {
        "1" | "+1" | "1.0" | "+1.0" | "+" | "" => Ok(Phase::ONE),
        "-1" | "-1.0" | "-" => Ok(Phase::MINUS_ONE),
        "i" | "+i" | "1i" | "+1i" => Ok(Phase::I),
        "-i" | "-1i" => Ok(Phase::MINUS_I),
        other => Err(Error::Parse(format!("unrecognised phase `{other}`"))),
    }
}

fn parse_letters(n_qubits: usize, body: &str) -> Result<Vec<(usize, Letter)>> {
    let mut out = Vec::new();
    for token in body.split_whitespace() {
        let mut chars = token.chars();
        let letter = match chars.next() {
            Some('I') | Some('i') => {
                if chars.as_str().is_empty() {
                    continue;
                }
                Letter::I
            }
            Some('X') | Some('x') => Letter::X,
            Some('Y') | Some('y') => Letter::Y,
            Some('Z') | Some('z') => Letter::Z,
            _ => return Err(Error::Parse(format!("bad Pauli token `{token}`"))),
        };
        let q: usize = chars
            .as_str()
            .parse()
            .map_err(|_| Error::Parse(format!("bad qubit index in `{token}`")))?;
        if q >= n_qubits {
            return Err(Error::Dimension(format!(
                "qubit {q} out of range for {n_qubits} qubits"
            )));
        }
        out.push((q, letter));
    }
    Ok(out)
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} * {}", self.phase, self.letters_string())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString[{}]({})", self.n, self)
    }
}

pub(crate) fn mask_to_indices(mut mask: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    while mask != 0 {
        let q = mask.trailing_zeros() as usize;
        out.push(q);
        mask &= mask - 1;
    }
    out
}

pub(crate) fn indices_to_mask(indices: &[usize]) -> u128 {
    indices.iter().fold(0u128, |m, &q| m | (1u128 << q))
}

/// A real linear combination of Hermitian Pauli strings, kept canonical:
/// every string has phase `+1`, no duplicates, no zero coefficients, terms
/// ordered by `(z_mask, x_mask)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Result<Self> {
        PauliString::identity(n_qubits)?;
        Ok(PauliSum {
            n: n_qubits,
            terms: Vec::new(),
        })
    }

    /// Canonicalizes an arbitrary term list. Strings with phase `-1` have the
    /// sign folded into the coefficient; strings with phase `±i` are rejected.
    pub fn from_terms<I>(n_qubits: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, PauliString)>,
    {
        PauliString::identity(n_qubits)?;
        let mut acc: BTreeMap<(u128, u128), f64> = BTreeMap::new();
        for (coeff, p) in terms {
            if p.n_qubits() != n_qubits {
                return Err(Error::Dimension(format!(
                    "term on {} qubits in a {}-qubit sum",
                    p.n_qubits(),
                    n_qubits
                )));
            }
            if !coeff.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite coefficient {coeff}"
                )));
            }
            let sign = p.phase().sign().ok_or_else(|| {
                Error::InvalidArgument(format!("non-Hermitian term {p} in a real Pauli sum"))
            })?;
            *acc.entry((p.z_mask(), p.x_mask())).or_insert(0.0) += sign * coeff;
        }
        let terms = acc
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|((z, x), c)| (c, PauliString::from_raw(n_qubits, x, z, 0)))
            .collect();
        Ok(PauliSum {
            n: n_qubits,
            terms,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Support of each term, in term order. The identity term has empty support.
    pub fn supports(&self) -> Vec<Vec<usize>> {
        self.terms.iter().map(|(_, p)| p.support()).collect()
    }

    pub fn union_support(&self) -> Vec<usize> {
        mask_to_indices(self.terms.iter().fold(0, |m, (_, p)| m | p.support_mask()))
    }

    pub fn max_weight(&self) -> usize {
        self.terms.iter().map(|(_, p)| p.weight()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &PauliSum) -> Result<PauliSum> {
        PauliSum::from_terms(
            self.n,
            self.terms.iter().chain(other.terms.iter()).copied(),
        )
    }

    pub fn scaled(&self, factor: f64) -> Result<PauliSum> {
        PauliSum::from_terms(self.n, self.terms.iter().map(|&(c, p)| (c * factor, p)))
    }

    /// Reads the newline-separated form produced by `Display`.
    pub fn parse(n_qubits: usize, text: &str) -> Result<PauliSum> {
        let mut terms = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (coeff, body) = match line.split_once('*') {
                Some((c, body)) => (
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad coefficient in `{line}`")))?,
                    body,
                ),
                None => (1.0, line),
            };
            let letters = parse_letters(n_qubits, body)?;
            terms.push((coeff, PauliString::from_letters(n_qubits, letters)?));
        }
        PauliSum::from_terms(n_qubits, terms)
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (c, p)) in self.terms.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{:?} * {}", c, p.letters_string())?;
        }
        Ok(())
    }
}
