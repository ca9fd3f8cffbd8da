//! The two benchmark systems: the 1D cluster model with its brickwall
//! ansatz, and the planar toric code in a field with its Hamiltonian
//! variational ansatz.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CircuitBuilder, Clifford, Prep};
use crate::error::{Error, Result};
use crate::evaluator::Backend;
use crate::pauli::{Letter, PauliString, PauliSum};
use crate::tableau::StabilizerTableau;

fn k_term(n: usize, i: usize) -> PauliString {
    PauliString::from_letters(n, [(i - 1, Letter::Z), (i, Letter::X), (i + 1, Letter::Z)]).expect("interior site")
}

fn check_chain(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("cluster chain needs N ≥ 3, got {n}")));
    }
    PauliString::identity(n).map(|_| ())
}

/// `−Σ K_i − J Σ X_i` with `K_i = Z_{i−1} X_i Z_{i+1}` on interior sites.
pub fn cluster_hamiltonian(n: usize, j: f64) -> Result<PauliSum> {
    check_chain(n)?;
    let ks = (1..n - 1).map(|i| (-1.0, k_term(n, i)));
    let xs = (0..n).map(|i| (-j, PauliString::single(n, i, Letter::X).expect("in range")));
    PauliSum::from_terms(n, ks.chain(xs))
}

/// Stabilizers of the open-chain cluster state, including the two boundary
/// generators `X_0 Z_1` and `Z_{N−2} X_{N−1}`.
pub fn cluster_tableau(n: usize) -> Result<StabilizerTableau> {
    check_chain(n)?;
    let mut gens = vec![PauliString::from_letters(n, [(0, Letter::X), (1, Letter::Z)])?];
    gens.extend((1..n - 1).map(|i| k_term(n, i)));
    gens.push(PauliString::from_letters(n, [(n - 2, Letter::Z), (n - 1, Letter::X)])?);
    StabilizerTableau::from_generators(n, gens)
}

/// Brick pairs of layer `layer` (1-based): odd layers start at qubit 0,
/// even layers at qubit 1.
pub fn brick_pairs(n: usize, layer: usize) -> Vec<(usize, usize)> {
    let start = if layer % 2 == 1 { 0 } else { 1 };
    (start..n.saturating_sub(1)).step_by(2).map(|i| (i, i + 1)).collect()
}

/// Cluster-state preparation followed by `depth` brickwall layers. Each
/// brick has five independent angles: RX then RZ on each qubit, then ZZ.
pub fn cluster_ansatz(n: usize, depth: usize) -> Result<Circuit> {
    check_chain(n)?;
    let mut b = CircuitBuilder::new(n);
    for q in 0..n {
        b.clifford(Clifford::H(q));
    }
    for i in (0..n - 1).step_by(2).chain((1..n - 1).step_by(2)) {
        b.clifford(Clifford::Cz(i, i + 1));
    }
    let prefix = b.len();
    let single = |q: usize, l: Letter| PauliString::single(n, q, l).expect("in range");
    for layer in 1..=depth {
        for (i, j) in brick_pairs(n, layer) {
            let tag = format!("l{layer}_{i}_{j}");
            let [a, bx, c, e, g] = ["rx_i", "rz_i", "rx_j", "rz_j", "zz"].map(|s| b.param(format!("{tag}_{s}")));
            b.rotation(single(i, Letter::X), a, 1.0);
            b.rotation(single(i, Letter::Z), bx, 1.0);
            b.rotation(single(j, Letter::X), c, 1.0);
            b.rotation(single(j, Letter::Z), e, 1.0);
            b.rotation(PauliString::from_letters(n, [(i, Letter::Z), (j, Letter::Z)])?, g, 1.0);
        }
    }
    b.build(Prep::InCircuit { prefix }, depth)
}

/// Angles for which the first two brick layers multiply to `∏ CZ`, undoing
/// the preparation so the ansatz outputs `|+…+⟩`, the `J → ∞` ground state.
/// Needs `depth ≥ 2`; other angles are zero.
pub fn cluster_disentangler(n: usize, depth: usize) -> Result<Option<Vec<f64>>> {
    let c = cluster_ansatz(n, depth)?;
    if depth < 2 {
        return Ok(None);
    }
    let half = std::f64::consts::FRAC_PI_2;
    let theta = c
        .param_names()
        .iter()
        .map(|name| {
            let early = name.starts_with("l1_") || name.starts_with("l2_");
            match name.rsplit('_').next() {
                // CZ = RZ(π/2) ⊗ RZ(π/2) · exp(iπ/4 ZZ) up to a global phase.
                Some("i" | "j") if early && name.contains("_rz_") => half,
                Some("zz") if early => -half,
                _ => 0.0,
            }
        })
        .collect();
    Ok(Some(theta))
}

/// `∏_k K_{2k}` (one-based sites) reduced to a single string; the interior
/// `Z`s cancel and leave `Z_0 X_1 X_3 … Z`.
pub fn cluster_order_parameter(n: usize) -> Result<PauliString> {
    check_chain(n)?;
    let mut acc = PauliString::identity(n)?;
    for k in 1..=(n - 1) / 2 {
        acc = acc.mul(&k_term(n, 2 * k - 1))?;
    }
    Ok(acc.with_phase(crate::pauli::Phase::ONE))
}

/// Planar surface code on a `(2L−1) × (2L−1)` grid. Data qubits sit on
/// sites with even `r + c`; stars (X checks) on even rows and odd columns,
/// plaquettes (Z checks) on odd rows and even columns.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToricLattice {
    pub l: usize,
    pub n_qubits: usize,
    /// `(row, col)` of each qubit, in qubit-index order.
    pub coords: Vec<(usize, usize)>,
    pub stars: Vec<Vec<usize>>,
    pub plaquettes: Vec<Vec<usize>>,
    /// Logical `Z` path along the top row.
    pub logical_z: Vec<usize>,
    /// Support of `∏ A_s`: the left and right boundary columns.
    pub wilson_loop: Vec<usize>,
}

impl ToricLattice {
    pub fn new(l: usize) -> Result<Self> {
        if l < 2 {
            return Err(Error::InvalidArgument(format!("toric lattice needs L ≥ 2, got {l}")));
        }
        let side = 2 * l - 1;
        let mut index = vec![vec![None; side]; side];
        let mut coords = Vec::new();
        for r in 0..side {
            for c in 0..side {
                if (r + c) % 2 == 0 {
                    index[r][c] = Some(coords.len());
                    coords.push((r, c));
                }
            }
        }
        let n_qubits = coords.len();
        PauliString::identity(n_qubits)?;
        let neighbours = |r: usize, c: usize| -> Vec<usize> {
            let mut out = Vec::with_capacity(4);
            let (r, c) = (r as isize, c as isize);
            for (dr, dc) in [(-1, 0), (0, -1), (0, 1), (1, 0)] {
                let (rr, cc) = (r + dr, c + dc);
                if rr >= 0 && cc >= 0 && (rr as usize) < side && (cc as usize) < side {
                    out.extend(index[rr as usize][cc as usize]);
                }
            }
            out.sort_unstable();
            out
        };
        let mut stars = Vec::new();
        let mut plaquettes = Vec::new();
        for r in 0..side {
            for c in 0..side {
                match (r % 2, c % 2) {
                    (0, 1) => stars.push(neighbours(r, c)),
                    (1, 0) => plaquettes.push(neighbours(r, c)),
                    _ => {}
                }
            }
        }
        let logical_z = (0..side).step_by(2).map(|c| index[0][c].expect("qubit site")).collect();
        let mut wilson_loop: Vec<usize> = (0..side)
            .step_by(2)
            .flat_map(|r| [index[r][0], index[r][side - 1]])
            .flatten()
            .collect();
        wilson_loop.sort_unstable();
        Ok(ToricLattice {
            l,
            n_qubits,
            coords,
            stars,
            plaquettes,
            logical_z,
            wilson_loop,
        })
    }

    fn string(&self, support: &[usize], letter: Letter) -> PauliString {
        PauliString::from_letters(self.n_qubits, support.iter().map(|&q| (q, letter))).expect("lattice support")
    }

    pub fn star(&self, s: usize) -> PauliString {
        self.string(&self.stars[s], Letter::X)
    }

    pub fn plaquette(&self, p: usize) -> PauliString {
        self.string(&self.plaquettes[p], Letter::Z)
    }

    pub fn logical_z_string(&self) -> PauliString {
        self.string(&self.logical_z, Letter::Z)
    }

    /// `∏_s A_s` multiplied out.
    pub fn wilson_loop_string(&self) -> PauliString {
        let mut acc = PauliString::identity(self.n_qubits).expect("valid size");
        for s in 0..self.stars.len() {
            acc = acc.product(&self.star(s));
        }
        acc
    }

    /// Toric-code ground state with `L_Z = +1`.
    pub fn tableau(&self) -> Result<StabilizerTableau> {
        let mut gens: Vec<PauliString> = (0..self.stars.len()).map(|s| self.star(s)).collect();
        gens.extend((0..self.plaquettes.len()).map(|p| self.plaquette(p)));
        gens.push(self.logical_z_string());
        StabilizerTableau::from_generators(self.n_qubits, gens)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `(H0, H1)` with `H0 = −Σ A_s − Σ B_p` and `H1 = −h_z Σ Z_i`.
pub fn toric_split(lat: &ToricLattice, h_z: f64) -> Result<(PauliSum, PauliSum)> {
    let n = lat.n_qubits;
    let h0 = PauliSum::from_terms(
        n,
        (0..lat.stars.len())
            .map(|s| (-1.0, lat.star(s)))
            .chain((0..lat.plaquettes.len()).map(|p| (-1.0, lat.plaquette(p)))),
    )?;
    let h1 = PauliSum::from_terms(n, (0..n).map(|q| (-h_z, lat.string(&[q], Letter::Z))))?;
    Ok((h0, h1))
}

pub fn toric_hamiltonian(lat: &ToricLattice, h_z: f64) -> Result<PauliSum> {
    let (h0, h1) = toric_split(lat, h_z)?;
    h0.add(&h1)
}

/// Hamiltonian variational ansatz on the toric-code state. Each layer `l`
/// applies `exp(−iγ_l H1)` and then `exp(−iβ_l H0)`; every exponential is
/// exact because the terms of each part commute.
pub fn toric_hva(lat: &ToricLattice, depth: usize, h_z: f64) -> Result<Circuit> {
    if depth == 0 {
        return Err(Error::InvalidArgument("toric ansatz needs D ≥ 1".into()));
    }
    let n = lat.n_qubits;
    let mut b = CircuitBuilder::new(n);
    for l in 1..=depth {
        let beta = b.param(format!("beta_{l}"));
        let gamma = b.param(format!("gamma_{l}"));
        // exp(−iγ·(−h_z Z)) = exp(−i(−2h_zγ)/2 · Z)
        for q in 0..n {
            b.rotation(lat.string(&[q], Letter::Z), gamma, -2.0 * h_z);
        }
        for s in 0..lat.stars.len() {
            b.rotation(lat.star(s), beta, -2.0);
        }
        for p in 0..lat.plaquettes.len() {
            b.rotation(lat.plaquette(p), beta, -2.0);
        }
    }
    b.build(Prep::Tableau(Arc::new(lat.tableau()?)), depth)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cluster,
    Toric,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Cluster => "cluster",
            ModelKind::Toric => "toric",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cluster" => Ok(ModelKind::Cluster),
            "toric" => Ok(ModelKind::Toric),
            other => Err(Error::Parse(format!("unknown model `{other}`"))),
        }
    }
}

/// A model family at fixed size and ansatz depth; the coupling (`J` or
/// `h_z`) is supplied per grid point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// `N` for the chain, `L` for the lattice.
    pub size: usize,
    pub depth: usize,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, size: usize, depth: usize) -> Result<Self> {
        let spec = ModelSpec { kind, size, depth };
        spec.n_qubits()?;
        if kind == ModelKind::Toric && depth == 0 {
            return Err(Error::InvalidArgument("toric ansatz needs D ≥ 1".into()));
        }
        Ok(spec)
    }

    pub fn n_qubits(&self) -> Result<usize> {
        match self.kind {
            ModelKind::Cluster => check_chain(self.size).map(|_| self.size),
            ModelKind::Toric => {
                if self.size < 2 {
                    return Err(Error::InvalidArgument(format!("toric lattice needs L ≥ 2, got {}", self.size)));
                }
                Ok(self.size * self.size + (self.size - 1) * (self.size - 1))
            }
        }
    }

    pub fn hamiltonian(&self, coupling: f64) -> Result<PauliSum> {
        match self.kind {
            ModelKind::Cluster => cluster_hamiltonian(self.size, coupling),
            ModelKind::Toric => toric_hamiltonian(&ToricLattice::new(self.size)?, coupling),
        }
    }

    pub fn ansatz(&self, coupling: f64) -> Result<Circuit> {
        match self.kind {
            ModelKind::Cluster => cluster_ansatz(self.size, self.depth),
            ModelKind::Toric => toric_hva(&ToricLattice::new(self.size)?, self.depth, coupling),
        }
    }

    /// `Ω` for the chain, `W` for the lattice.
    pub fn order_parameter(&self) -> Result<PauliString> {
        match self.kind {
            ModelKind::Cluster => cluster_order_parameter(self.size),
            ModelKind::Toric => Ok(ToricLattice::new(self.size)?.wilson_loop_string()),
        }
    }

    pub fn default_backend(&self) -> Backend {
        match self.kind {
            ModelKind::Cluster => Backend::Cone,
            ModelKind::Toric => Backend::Heisenberg,
        }
    }

    /// Start point exact at the far end of the coupling axis, when the
    /// ansatz has one.
    pub fn far_end_start(&self) -> Result<Option<Vec<f64>>> {
        match self.kind {
            ModelKind::Cluster => cluster_disentangler(self.size, self.depth),
            ModelKind::Toric => Ok(None),
        }
    }

    pub fn with_depth(&self, depth: usize) -> Self {
        ModelSpec { depth, ..*self }
    }
}
