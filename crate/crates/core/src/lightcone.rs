//! Backward causal cones and the co-VQE eligibility check.
//!
//! Gates are first grouped into *moments*: maximal runs of consecutive,
//! mutually commuting gates. Inside a moment the order is irrelevant, so a
//! gate is kept iff it touches the active set as it stood when the sweep
//! entered the moment. For a moment `A·B` where no gate of `B` touches the
//! active set `S`, `B† A† O A B = A† (B† O B) A = A† O A`, which is what makes
//! the grouping exact. Without it, chains of commuting overlapping gates
//! (a CZ ladder, a layer of star rotations) would drag the cone across the
//! whole register.

use std::fmt;
use std::ops::Range;

use crate::circuit::{Circuit, GateOp, Prep};
use crate::error::{Error, Result};
use crate::pauli::{indices_to_mask, mask_to_indices, PauliSum};

/// Default cap on a cone before it is declared classically intractable.
pub const DEFAULT_CONE_CAP: usize = 26;

/// Reduced qubit set and retained gates for one observable term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConeSlice {
    /// Ascending global qubit indices; position in this list is the local index.
    pub cone_qubits: Vec<usize>,
    /// Retained gate indices in circuit order.
    pub retained_gates: Vec<usize>,
}

impl ConeSlice {
    pub fn size(&self) -> usize {
        self.cone_qubits.len()
    }

    pub fn local_index(&self, global: usize) -> Option<usize> {
        self.cone_qubits.binary_search(&global).ok()
    }

    /// `global → local` table indexed by global qubit.
    pub fn local_index_map(&self, n_qubits: usize) -> Vec<Option<usize>> {
        let mut map = vec![None; n_qubits];
        for (local, &g) in self.cone_qubits.iter().enumerate() {
            map[g] = Some(local);
        }
        map
    }
}

/// Moment decomposition of a gate list.
#[derive(Clone, Debug)]
pub struct Moments {
    ranges: Vec<Range<usize>>,
    masks: Vec<u128>,
}

impl Moments {
    pub fn new<G: GateOp>(gates: &[G]) -> Self {
        let mut ranges: Vec<Range<usize>> = Vec::new();
        let mut start = 0;
        for k in 0..gates.len() {
            let joins = k > start && gates[start..k].iter().all(|g| g.commutes_with(&gates[k]));
            if k > start && !joins {
                ranges.push(start..k);
                start = k;
            }
        }
        if start < gates.len() {
            ranges.push(start..gates.len());
        }
        let masks = gates.iter().map(GateOp::support_mask).collect();
        Moments { ranges, masks }
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Backward sweep from an initial support mask.
    pub fn cone(&self, support: u128) -> (u128, Vec<usize>) {
        let mut active = support;
        let mut retained = Vec::new();
        for range in self.ranges.iter().rev() {
            let entering = active;
            for k in range.clone().rev() {
                if self.masks[k] & entering != 0 {
                    retained.push(k);
                    active |= self.masks[k];
                }
            }
        }
        retained.reverse();
        (active, retained)
    }
}

/// Causal cone of `term_support` through every gate of `c`, including an
/// in-circuit preparation prefix.
pub fn causal_cone(c: &Circuit, term_support: &[usize]) -> Result<ConeSlice> {
    let moments = Moments::new(c.gates());
    cone_with(&moments, c.n_qubits(), term_support)
}

pub(crate) fn cone_with(moments: &Moments, n_qubits: usize, term_support: &[usize]) -> Result<ConeSlice> {
    if term_support.is_empty() {
        return Err(Error::InvalidArgument("empty term support".into()));
    }
    if let Some(q) = term_support.iter().find(|&&q| q >= n_qubits) {
        return Err(Error::Dimension(format!("qubit {q} out of range for {n_qubits} qubits")));
    }
    let (mask, retained) = moments.cone(indices_to_mask(term_support));
    Ok(ConeSlice {
        cone_qubits: mask_to_indices(mask),
        retained_gates: retained,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TermCone {
    pub term: String,
    pub support: Vec<usize>,
    pub m_term: usize,
}

/// Cone sizes for every term of an observable.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeProfile {
    pub terms: Vec<TermCone>,
    pub m_max: usize,
    pub cap: usize,
    pub classically_tractable: bool,
}

pub fn cone_profile(c: &Circuit, h: &PauliSum, cap: usize) -> Result<ConeProfile> {
    if h.n_qubits() != c.n_qubits() {
        return Err(Error::Dimension(format!(
            "{}-qubit observable for a {}-qubit circuit",
            h.n_qubits(),
            c.n_qubits()
        )));
    }
    let moments = Moments::new(c.gates());
    let mut terms = Vec::with_capacity(h.len());
    for (coeff, p) in h.terms() {
        let support = p.support();
        let m_term = if support.is_empty() {
            0
        } else {
            moments.cone(p.support_mask()).0.count_ones() as usize
        };
        terms.push(TermCone {
            term: format!("{:?} * {}", coeff, p.letters_string()),
            support,
            m_term,
        });
    }
    let m_max = terms.iter().map(|t| t.m_term).max().unwrap_or(0);
    Ok(ConeProfile {
        terms,
        m_max,
        cap,
        classically_tractable: m_max <= cap,
    })
}

impl fmt::Display for ConeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.terms.iter().map(|t| t.term.len()).max().unwrap_or(4).max(4);
        writeln!(f, "{:<width$}  {:<20}  M_term", "term", "support")?;
        for t in &self.terms {
            let support = t
                .support
                .iter()
                .map(|q| q.to_string())
                .collect::<Vec<_>>()
                .join(",");
            writeln!(f, "{:<width$}  {:<20}  {}", t.term, format!("{{{support}}}"), t.m_term)?;
        }
        write!(
            f,
            "M_max = {} (cap {}): {}",
            self.m_max,
            self.cap,
            if self.classically_tractable { "tractable" } else { "intractable" }
        )
    }
}

/// Thresholds for the four co-VQE prerequisites.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Limits {
    /// (i) maximum weight of a measured term.
    pub max_term_weight: usize,
    /// (iii) maximum number of qubits a single gate may touch.
    pub max_gate_weight: usize,
    /// (iv) maximum number of ansatz layers.
    pub max_depth: usize,
    /// Largest cone simulated classically.
    pub cone_cap: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_term_weight: 4,
            max_gate_weight: 4,
            max_depth: 8,
            cone_cap: DEFAULT_CONE_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// 1-based index into the prerequisite list (local terms, stabilizer
    /// initial state, local gates, shallow depth).
    pub constraint: u8,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Eligibility {
    pub violations: Vec<Violation>,
    pub profile: ConeProfile,
}

impl Eligibility {
    pub fn eligible(&self) -> bool {
        self.violations.is_empty() && self.profile.classically_tractable
    }
}

impl fmt::Display for Eligibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.profile)?;
        for v in &self.violations {
            writeln!(f, "constraint ({}) violated: {}", v.constraint, v.message)?;
        }
        if self.eligible() {
            write!(f, "verdict: classically tractable; optimize with cone/Heisenberg evaluation")
        } else if !self.profile.classically_tractable {
            write!(
                f,
                "verdict: intractable; largest cone has {} qubits > cap {}. Reduce the depth, \
                 or optimize the shallower circuit classically and use it to seed a device run",
                self.profile.m_max, self.profile.cap
            )
        } else {
            write!(f, "verdict: not eligible for classical optimization")
        }
    }
}

pub fn check_eligibility(c: &Circuit, h: &PauliSum, limits: &Limits) -> Result<Eligibility> {
    let profile = cone_profile(c, h, limits.cone_cap)?;
    let mut violations = Vec::new();
    let heavy_term = h.terms().iter().map(|(_, p)| p.weight()).max().unwrap_or(0);
    if heavy_term > limits.max_term_weight {
        violations.push(Violation {
            constraint: 1,
            message: format!("observable term of weight {heavy_term} > {}", limits.max_term_weight),
        });
    }
    if let Prep::InCircuit { prefix } = c.prep() {
        // The constructor already guarantees a Clifford prefix; this only
        // reports circuits whose prep is not a stabilizer state.
        if c.gates()[..*prefix].iter().any(|g| matches!(g, crate::circuit::Gate::Rotation(_))) {
            violations.push(Violation {
                constraint: 2,
                message: "initial state is not a stabilizer state".into(),
            });
        }
    }
    let heavy_gate = c.gates().iter().map(|g| g.support_mask().count_ones() as usize).max().unwrap_or(0);
    if heavy_gate > limits.max_gate_weight {
        violations.push(Violation {
            constraint: 3,
            message: format!("gate acting on {heavy_gate} qubits > {}", limits.max_gate_weight),
        });
    }
    if c.depth() > limits.max_depth {
        violations.push(Violation {
            constraint: 4,
            message: format!("depth {} > {}", c.depth(), limits.max_depth),
        });
    }
    Ok(Eligibility { violations, profile })
}
