//! Parameterized circuits: a handful of Clifford gates plus rotations
//! `exp(-i θ_eff/2 · P)` about arbitrary Pauli axes, where
//! `θ_eff = scale · θ[param]`. Several rotations may share one parameter.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::pauli::{mul_raw, PauliString, Phase};
use crate::tableau::StabilizerTableau;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Clifford {
    H(usize),
    S(usize),
    Sdg(usize),
    Cz(usize, usize),
    /// `(control, target)`
    Cnot(usize, usize),
}

impl Clifford {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Clifford::H(q) | Clifford::S(q) | Clifford::Sdg(q) => vec![q],
            Clifford::Cz(a, b) | Clifford::Cnot(a, b) => vec![a, b],
        }
    }

    pub fn support_mask(&self) -> u128 {
        self.qubits().iter().fold(0, |m, &q| m | (1u128 << q))
    }

    pub fn inverse(&self) -> Clifford {
        match *self {
            Clifford::S(q) => Clifford::Sdg(q),
            Clifford::Sdg(q) => Clifford::S(q),
            other => other,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, Clifford::S(_) | Clifford::Sdg(_) | Clifford::Cz(..))
    }

    pub(crate) fn check_range(&self, n: usize) -> Result<()> {
        let qs = self.qubits();
        if qs.iter().any(|&q| q >= n) {
            return Err(Error::Dimension(format!("{self:?} does not fit {n} qubits")));
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(Error::InvalidArgument(format!("{self:?} repeats a qubit")));
        }
        Ok(())
    }

    /// Images of `X_q` and `Z_q` under `G ↦ C G C†` as raw `(x, z, phase)`.
    fn generator_images(&self, q: usize) -> ((u128, u128, u32), (u128, u128, u32)) {
        let b = |k: usize| 1u128 << k;
        let id_x = (b(q), 0, 0);
        let id_z = (0, b(q), 0);
        match *self {
            Clifford::H(t) if t == q => ((0, b(q), 0), (b(q), 0, 0)),
            Clifford::S(t) if t == q => ((b(q), b(q), 0), id_z),
            Clifford::Sdg(t) if t == q => ((b(q), b(q), 2), id_z),
            Clifford::Cz(a, c) if a == q => ((b(q), b(c), 0), id_z),
            Clifford::Cz(a, c) if c == q => ((b(q), b(a), 0), id_z),
            Clifford::Cnot(c, t) if c == q => ((b(c) | b(t), 0, 0), id_z),
            Clifford::Cnot(c, t) if t == q => (id_x, (0, b(c) | b(t), 0)),
            _ => (id_x, id_z),
        }
    }

    /// `C P C†`, or `C† P C` when `dagger` is set.
    pub fn conjugate(&self, p: &PauliString, dagger: bool) -> PauliString {
        let (x, z, q) = self.conjugate_raw(p.x_mask(), p.z_mask(), p.phase().power(), dagger);
        PauliString::from_raw(p.n_qubits(), x, z, q)
    }

    pub(crate) fn conjugate_raw(&self, x: u128, z: u128, q: u32, dagger: bool) -> (u128, u128, u32) {
        let gate = if dagger { self.inverse() } else { *self };
        let support = gate.support_mask();
        if (x | z) & support == 0 {
            return (x, z, q);
        }
        // Write P = i^k (X^x_out X^x_in)(Z^z_out Z^z_in) and map the in-support factors.
        let q_xz = q + (x & z).count_ones();
        let mut acc: (u128, u128, u32) = (x & !support, 0, 0);
        for qubit in gate.qubits() {
            if (x >> qubit) & 1 == 1 {
                acc = mul_raw(acc, gate.generator_images(qubit).0);
            }
        }
        acc = mul_raw(acc, (0, z & !support, 0));
        for qubit in gate.qubits() {
            if (z >> qubit) & 1 == 1 {
                acc = mul_raw(acc, gate.generator_images(qubit).1);
            }
        }
        // acc is the letter-form image of X^x Z^z; restore the overall phase.
        let (ax, az, aq) = acc;
        (ax, az, (aq + q_xz) & 3)
    }
}

/// A Pauli-axis rotation referencing a shared parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation {
    pub axis: PauliString,
    pub param: usize,
    pub scale: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    Clifford(Clifford),
    Rotation(Rotation),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundGate {
    Clifford(Clifford),
    /// `exp(-i angle/2 · axis)`
    Rotation { axis: PauliString, angle: f64 },
}

/// Shared structural queries used by the light-cone analysis.
pub trait GateOp {
    fn support_mask(&self) -> u128;
    /// Conservative: `true` only when the two gates provably commute.
    fn commutes_with(&self, other: &Self) -> bool;
}

fn clifford_rotation_commute(c: &Clifford, axis: &PauliString) -> bool {
    c.conjugate(axis, false) == *axis
}

fn axis_commutes(a: &PauliString, b: &PauliString) -> bool {
    !a.anticommutes_with(b)
}

impl GateOp for Gate {
    fn support_mask(&self) -> u128 {
        match self {
            Gate::Clifford(c) => c.support_mask(),
            Gate::Rotation(r) => r.axis.support_mask(),
        }
    }

    fn commutes_with(&self, other: &Self) -> bool {
        if self.support_mask() & other.support_mask() == 0 {
            return true;
        }
        match (self, other) {
            (Gate::Rotation(a), Gate::Rotation(b)) => axis_commutes(&a.axis, &b.axis),
            (Gate::Clifford(c), Gate::Rotation(r)) | (Gate::Rotation(r), Gate::Clifford(c)) => {
                clifford_rotation_commute(c, &r.axis)
            }
            (Gate::Clifford(a), Gate::Clifford(b)) => a == b || (a.is_diagonal() && b.is_diagonal()),
        }
    }
}

impl GateOp for BoundGate {
    fn support_mask(&self) -> u128 {
        match self {
            BoundGate::Clifford(c) => c.support_mask(),
            BoundGate::Rotation { axis, .. } => axis.support_mask(),
        }
    }

    fn commutes_with(&self, other: &Self) -> bool {
        if self.support_mask() & other.support_mask() == 0 {
            return true;
        }
        match (self, other) {
            (BoundGate::Rotation { axis: a, .. }, BoundGate::Rotation { axis: b, .. }) => axis_commutes(a, b),
            (BoundGate::Clifford(c), BoundGate::Rotation { axis, .. })
            | (BoundGate::Rotation { axis, .. }, BoundGate::Clifford(c)) => clifford_rotation_commute(c, axis),
            (BoundGate::Clifford(a), BoundGate::Clifford(b)) => a == b || (a.is_diagonal() && b.is_diagonal()),
        }
    }
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::Clifford(c) => c.qubits(),
            Gate::Rotation(r) => r.axis.support(),
        }
    }
}

impl BoundGate {
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            BoundGate::Clifford(c) => c.qubits(),
            BoundGate::Rotation { axis, .. } => axis.support(),
        }
    }

    pub fn inverse(&self) -> BoundGate {
        match *self {
            BoundGate::Clifford(c) => BoundGate::Clifford(c.inverse()),
            BoundGate::Rotation { axis, angle } => BoundGate::Rotation { axis, angle: -angle },
        }
    }

    pub(crate) fn check_range(&self, n: usize) -> Result<()> {
        match self {
            BoundGate::Clifford(c) => c.check_range(n),
            BoundGate::Rotation { axis, .. } => {
                if axis.n_qubits() != n {
                    return Err(Error::Dimension(format!(
                        "rotation axis on {} qubits in a {n}-qubit register",
                        axis.n_qubits()
                    )));
                }
                Ok(())
            }
        }
    }
}

/// How the register is initialized before the gate list runs.
#[derive(Clone, Debug, PartialEq)]
pub enum Prep {
    /// Start from `|0…0⟩`; the first `prefix` gates are the Clifford
    /// preparation and the rest is the ansatz.
    InCircuit { prefix: usize },
    /// Start from a stabilizer state given directly as a tableau.
    Tableau(Arc<StabilizerTableau>),
}

/// Initial state of a bound circuit.
#[derive(Clone, Debug, PartialEq)]
pub enum Initial {
    Zero,
    Tableau(Arc<StabilizerTableau>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    n_params: usize,
    param_names: Vec<String>,
    prep: Prep,
    depth: usize,
}

impl Circuit {
    pub fn new(
        n_qubits: usize,
        prep: Prep,
        gates: Vec<Gate>,
        param_names: Vec<String>,
        depth: usize,
    ) -> Result<Self> {
        PauliString::identity(n_qubits)?;
        let n_params = param_names.len();
        match &prep {
            Prep::InCircuit { prefix } => {
                if *prefix > gates.len() {
                    return Err(Error::InvalidArgument(format!(
                        "prep prefix {prefix} longer than the gate list"
                    )));
                }
                if let Some(g) = gates[..*prefix].iter().find(|g| !matches!(g, Gate::Clifford(_))) {
                    return Err(Error::InvalidArgument(format!(
                        "prep prefix must be Clifford, found {g:?}"
                    )));
                }
            }
            Prep::Tableau(t) => {
                if t.n_qubits() != n_qubits {
                    return Err(Error::Dimension(format!(
                        "{}-qubit tableau for a {n_qubits}-qubit circuit",
                        t.n_qubits()
                    )));
                }
            }
        }
        for g in &gates {
            match g {
                Gate::Clifford(c) => c.check_range(n_qubits)?,
                Gate::Rotation(r) => {
                    if r.axis.n_qubits() != n_qubits {
                        return Err(Error::Dimension(format!(
                            "rotation axis on {} qubits in a {n_qubits}-qubit circuit",
                            r.axis.n_qubits()
                        )));
                    }
                    if r.axis.phase() != Phase::ONE || r.axis.is_identity() {
                        return Err(Error::InvalidArgument(format!(
                            "rotation axis {} must be a non-identity string with phase +1",
                            r.axis
                        )));
                    }
                    if r.param >= n_params {
                        return Err(Error::InvalidArgument(format!(
                            "parameter reference {} ≥ n_params {n_params}",
                            r.param
                        )));
                    }
                    if !r.scale.is_finite() {
                        return Err(Error::InvalidArgument("non-finite rotation scale".into()));
                    }
                }
            }
        }
        Ok(Circuit {
            n_qubits,
            gates,
            n_params,
            param_names,
            prep,
            depth,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    pub fn prep(&self) -> &Prep {
        &self.prep
    }

    /// Number of ansatz layers declared by the builder.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn initial(&self) -> Initial {
        match &self.prep {
            Prep::InCircuit { .. } => Initial::Zero,
            Prep::Tableau(t) => Initial::Tableau(Arc::clone(t)),
        }
    }

    /// The Clifford gates of an in-circuit preparation (empty for tableau prep).
    pub fn prep_gates(&self) -> &[Gate] {
        match self.prep {
            Prep::InCircuit { prefix } => &self.gates[..prefix],
            Prep::Tableau(_) => &[],
        }
    }

    pub fn gate_supports(&self) -> Vec<Vec<usize>> {
        self.gates.iter().map(Gate::qubits).collect()
    }

    pub fn bind(&self, theta: &[f64]) -> Result<BoundCircuit> {
        if theta.len() != self.n_params {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.n_params,
                theta.len()
            )));
        }
        let gates = self
            .gates
            .iter()
            .map(|g| match *g {
                Gate::Clifford(c) => BoundGate::Clifford(c),
                Gate::Rotation(r) => BoundGate::Rotation {
                    axis: r.axis,
                    angle: r.scale * theta[r.param],
                },
            })
            .collect();
        Ok(BoundCircuit {
            n_qubits: self.n_qubits,
            initial: self.initial(),
            gates,
        })
    }

    /// Line-oriented text form; see [`Circuit::from_text`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "qubits {}", self.n_qubits);
        let _ = writeln!(out, "depth {}", self.depth);
        match &self.prep {
            Prep::InCircuit { prefix } => {
                let _ = writeln!(out, "prep in_circuit {prefix}");
            }
            Prep::Tableau(t) => {
                let _ = writeln!(out, "prep tableau");
                for line in t.to_text().lines() {
                    let _ = writeln!(out, "stab {line}");
                }
            }
        }
        for (k, name) in self.param_names.iter().enumerate() {
            let _ = writeln!(out, "param {k} {name}");
        }
        for g in &self.gates {
            let _ = match g {
                Gate::Clifford(Clifford::H(q)) => writeln!(out, "h {q}"),
                Gate::Clifford(Clifford::S(q)) => writeln!(out, "s {q}"),
                Gate::Clifford(Clifford::Sdg(q)) => writeln!(out, "sdg {q}"),
                Gate::Clifford(Clifford::Cz(a, b)) => writeln!(out, "cz {a} {b}"),
                Gate::Clifford(Clifford::Cnot(a, b)) => writeln!(out, "cnot {a} {b}"),
                Gate::Rotation(r) => writeln!(out, "rot {} {:?} {}", r.param, r.scale, r.axis.letters_string()),
            };
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Circuit> {
        let mut n_qubits = None;
        let mut depth = 0;
        let mut prep_mode: Option<Option<usize>> = None;
        let mut stabs: Vec<String> = Vec::new();
        let mut names: Vec<String> = Vec::new();
        let mut raw_gates: Vec<Vec<String>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Parse(format!("line {}: `{line}`", lineno + 1));
            let mut parts = line.splitn(2, ' ');
            let key = parts.next().unwrap_or_default();
            let rest = parts.next().unwrap_or("").trim();
            match key {
                "qubits" => n_qubits = Some(rest.parse::<usize>().map_err(|_| bad())?),
                "depth" => depth = rest.parse::<usize>().map_err(|_| bad())?,
                "prep" => {
                    let mut it = rest.split_whitespace();
                    prep_mode = match (it.next(), it.next()) {
                        (Some("in_circuit"), Some(k)) => Some(Some(k.parse().map_err(|_| bad())?)),
                        (Some("tableau"), None) => Some(None),
                        _ => return Err(bad()),
                    };
                }
                "stab" => stabs.push(rest.to_string()),
                "param" => {
                    let (idx, name) = rest.split_once(' ').ok_or_else(bad)?;
                    let idx: usize = idx.parse().map_err(|_| bad())?;
                    if idx != names.len() {
                        return Err(bad());
                    }
                    names.push(name.trim().to_string());
                }
                "h" | "s" | "sdg" | "cz" | "cnot" | "rot" => {
                    let mut v = vec![key.to_string()];
                    v.extend(rest.split_whitespace().map(str::to_string));
                    raw_gates.push(v);
                }
                _ => return Err(bad()),
            }
        }
        let n = n_qubits.ok_or_else(|| Error::Parse("missing `qubits` line".into()))?;
        let prep = match prep_mode.ok_or_else(|| Error::Parse("missing `prep` line".into()))? {
            Some(prefix) => Prep::InCircuit { prefix },
            None => Prep::Tableau(Arc::new(StabilizerTableau::from_text(n, &stabs.join("\n"))?)),
        };
        let idx = |s: &String| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad qubit index `{s}`")))
        };
        let mut gates = Vec::with_capacity(raw_gates.len());
        for g in raw_gates {
            let gate = match (g[0].as_str(), g.len()) {
                ("h", 2) => Gate::Clifford(Clifford::H(idx(&g[1])?)),
                ("s", 2) => Gate::Clifford(Clifford::S(idx(&g[1])?)),
                ("sdg", 2) => Gate::Clifford(Clifford::Sdg(idx(&g[1])?)),
                ("cz", 3) => Gate::Clifford(Clifford::Cz(idx(&g[1])?, idx(&g[2])?)),
                ("cnot", 3) => Gate::Clifford(Clifford::Cnot(idx(&g[1])?, idx(&g[2])?)),
                ("rot", len) if len >= 4 => {
                    let param = idx(&g[1])?;
                    let scale: f64 = g[2]
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad scale `{}`", g[2])))?;
                    let axis = PauliString::parse(n, &g[3..].join(" "))?;
                    Gate::Rotation(Rotation { axis, param, scale })
                }
                _ => return Err(Error::Parse(format!("malformed gate `{}`", g.join(" ")))),
            };
            gates.push(gate);
        }
        Circuit::new(n, prep, gates, names, depth)
    }
}

/// Incremental construction helper for model builders and tests.
#[derive(Debug)]
pub struct CircuitBuilder {
    n_qubits: usize,
    gates: Vec<Gate>,
    names: Vec<String>,
}

impl CircuitBuilder {
    pub fn new(n_qubits: usize) -> Self {
        CircuitBuilder {
            n_qubits,
            gates: Vec::new(),
            names: Vec::new(),
        }
    }

    /// Registers a new parameter and returns its index.
    pub fn param(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.names.len() - 1
    }

    pub fn clifford(&mut self, c: Clifford) -> &mut Self {
        self.gates.push(Gate::Clifford(c));
        self
    }

    pub fn rotation(&mut self, axis: PauliString, param: usize, scale: f64) -> &mut Self {
        self.gates.push(Gate::Rotation(Rotation { axis, param, scale }));
        self
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn build(self, prep: Prep, depth: usize) -> Result<Circuit> {
        Circuit::new(self.n_qubits, prep, self.gates, self.names, depth)
    }
}

/// A circuit with every rotation angle resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCircuit {
    pub n_qubits: usize,
    pub initial: Initial,
    pub gates: Vec<BoundGate>,
}

impl BoundCircuit {
    /// Reversed gate list with each gate inverted; the initial state is kept.
    pub fn inverse(&self) -> BoundCircuit {
        BoundCircuit {
            n_qubits: self.n_qubits,
            initial: self.initial.clone(),
            gates: self.gates.iter().rev().map(BoundGate::inverse).collect(),
        }
    }

    pub fn gate_supports(&self) -> Vec<Vec<usize>> {
        self.gates.iter().map(BoundGate::qubits).collect()
    }
}
