//! Pure stabilizer states held as a generator list plus its reduced
//! row-echelon form, which answers Pauli expectation queries by elimination.

use std::fmt;

use num_complex::Complex64;

use crate::circuit::Clifford;
use crate::error::{Error, Result};
use crate::pauli::{mul_raw, PauliString};
use crate::state::StateVector;

/// Default cap on the register size for dense materialization.
pub const DEFAULT_STATEVECTOR_CAP: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Row {
    x: u128,
    z: u128,
    q: u32,
    /// Column of the leading bit; `< n` is an X column, otherwise `n + qubit`.
    pivot: usize,
}

fn has_col(x: u128, z: u128, col: usize, n: usize) -> bool {
    if col < n {
        (x >> col) & 1 == 1
    } else {
        (z >> (col - n)) & 1 == 1
    }
}

/// A pure `n`-qubit stabilizer state.
#[derive(Clone, PartialEq)]
pub struct StabilizerTableau {
    n: usize,
    generators: Vec<PauliString>,
    reduced: Vec<Row>,
}

impl StabilizerTableau {
    /// Validates and reduces a generator list.
    ///
    /// The list must hold exactly `n` pairwise-commuting, independent,
    /// Hermitian strings; `-I` and contradictory pairs are rejected.
    pub fn from_generators(n_qubits: usize, generators: Vec<PauliString>) -> Result<Self> {
        PauliString::identity(n_qubits)?;
        for g in &generators {
            if g.n_qubits() != n_qubits {
                return Err(Error::Dimension(format!(
                    "generator {g} has {} qubits, expected {n_qubits}",
                    g.n_qubits()
                )));
            }
            if !g.is_hermitian() {
                return Err(Error::InvalidGenerators(format!("{g} is not Hermitian")));
            }
            if g.is_identity() {
                return Err(Error::InvalidGenerators(format!(
                    "{g} is a multiple of the identity"
                )));
            }
        }
        for (i, a) in generators.iter().enumerate() {
            for b in &generators[i + 1..] {
                if a.anticommutes_with(b) {
                    return Err(Error::InvalidGenerators(format!("{a} and {b} anticommute")));
                }
            }
        }
        if generators.len() > n_qubits {
            return Err(Error::InvalidGenerators(format!(
                "{} generators for {n_qubits} qubits",
                generators.len()
            )));
        }

        let mut rows: Vec<(u128, u128, u32)> = generators
            .iter()
            .map(|g| (g.x_mask(), g.z_mask(), g.phase().power()))
            .collect();
        let mut reduced = Vec::with_capacity(n_qubits);
        let mut rank = 0;
        for col in 0..2 * n_qubits {
            let Some(found) = (rank..rows.len()).find(|&r| has_col(rows[r].0, rows[r].1, col, n_qubits))
            else {
                continue;
            };
            rows.swap(rank, found);
            let pivot = rows[rank];
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && has_col(row.0, row.1, col, n_qubits) {
                    *row = mul_raw(pivot, *row);
                }
            }
            reduced.push(Row {
                x: pivot.0,
                z: pivot.1,
                q: pivot.2,
                pivot: col,
            });
            rank += 1;
        }
        // Rows reduced to the identity reveal either redundancy or a contradiction.
        for row in &rows[rank..] {
            if row.2 != 0 {
                return Err(Error::UnderdeterminedState(
                    "generators are contradictory (product equals -I)".into(),
                ));
            }
        }
        if rank < n_qubits {
            return Err(Error::UnderdeterminedState(format!(
                "generator rank {rank} < {n_qubits}"
            )));
        }
        Ok(StabilizerTableau {
            n: n_qubits,
            generators,
            reduced,
        })
    }

    /// `|0…0⟩`, stabilized by `+Z_i`.
    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        let gens = (0..n_qubits)
            .map(|q| PauliString::single(n_qubits, q, crate::pauli::Letter::Z))
            .collect::<Result<Vec<_>>>()?;
        Self::from_generators(n_qubits, gens)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }

    /// `⟨ψ|p|ψ⟩`: `±p.phase` when `±p` is in the stabilizer group, else `0`.
    pub fn expectation(&self, p: &PauliString) -> Result<Complex64> {
        if p.n_qubits() != self.n {
            return Err(Error::Dimension(format!(
                "{}-qubit observable on a {}-qubit tableau",
                p.n_qubits(),
                self.n
            )));
        }
        Ok(match self.reduce(p.x_mask(), p.z_mask(), p.phase().power()) {
            Some(q) => crate::pauli::Phase::from_power(q).to_complex(),
            None => Complex64::new(0.0, 0.0),
        })
    }

    /// Expectation of the phase-`+1` string with the given masks.
    #[inline]
    pub(crate) fn sign_of(&self, x: u128, z: u128) -> f64 {
        match self.reduce(x, z, 0) {
            Some(0) => 1.0,
            Some(2) => -1.0,
            Some(_) => unreachable!("Hermitian string reduced to ±i"),
            None => 0.0,
        }
    }

    /// Left-multiplies by reduced rows until every pivot bit is clear.
    /// Returns the remaining phase power if the string reduced to identity.
    #[inline]
    fn reduce(&self, x: u128, z: u128, q: u32) -> Option<u32> {
        let mut acc = (x, z, q);
        for row in &self.reduced {
            if has_col(acc.0, acc.1, row.pivot, self.n) {
                acc = mul_raw((row.x, row.z, row.q), acc);
            }
        }
        (acc.0 == 0 && acc.1 == 0).then_some(acc.2)
    }

    /// Conjugates every generator by `gate`, i.e. returns the tableau of `C|ψ⟩`.
    pub fn apply_clifford(&self, gate: &Clifford) -> Result<Self> {
        gate.check_range(self.n)?;
        let gens = self
            .generators
            .iter()
            .map(|g| gate.conjugate(g, false))
            .collect();
        Self::from_generators(self.n, gens)
    }

    /// Dense amplitudes of the state, little-endian, with the first nonzero
    /// amplitude real and positive.
    pub fn to_statevector(&self, cap: usize) -> Result<StateVector> {
        if self.n > cap {
            return Err(Error::Resource(format!(
                "{} qubits exceeds the state-vector cap of {cap}",
                self.n
            )));
        }
        let n = self.n;
        let (x_rows, z_rows): (Vec<&Row>, Vec<&Row>) =
            self.reduced.iter().partition(|r| r.pivot < n);

        // A computational basis state in the support: satisfy every Z-only row.
        let mut base: u128 = 0;
        for row in &z_rows {
            debug_assert_eq!(row.x, 0);
            if row.q == 2 {
                base |= 1u128 << (row.pivot - n);
            }
        }

        let dim = 1usize << n;
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        let norm = (x_rows.len() as f64 * -0.5).exp2();
        let mut g: (u128, u128, u32) = (0, 0, 0);
        let total: u64 = 1u64 << x_rows.len();
        for step in 0..total {
            if step > 0 {
                let flip = step.trailing_zeros() as usize;
                let r = x_rows[flip];
                g = mul_raw((r.x, r.z, r.q), g);
            }
            let (gx, gz, gq) = g;
            let power = gq + (gx & gz).count_ones() + 2 * (gz & base).count_ones();
            let idx = (base ^ gx) as usize;
            amps[idx] = crate::pauli::Phase::from_power(power).to_complex() * norm;
        }
        let lead = amps
            .iter()
            .find(|a| a.norm() > 0.0)
            .copied()
            .expect("stabilizer state has nonzero support");
        let fix = lead.conj() / lead.norm();
        for a in amps.iter_mut() {
            *a *= fix;
        }
        StateVector::from_amplitudes(amps)
    }

    /// One signed Pauli per line, e.g. `+X0 Z1`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for g in &self.generators {
            let sign = if g.phase().power() == 0 { '+' } else { '-' };
            out.push(sign);
            out.push_str(&g.letters_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(n_qubits: usize, text: &str) -> Result<Self> {
        let gens = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| PauliString::parse(n_qubits, l))
            .collect::<Result<Vec<_>>>()?;
        Self::from_generators(n_qubits, gens)
    }
}

impl fmt::Debug for StabilizerTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StabilizerTableau[{}] {{ {} }}", self.n, self.to_text().trim().replace('\n', ", "))
    }
}
