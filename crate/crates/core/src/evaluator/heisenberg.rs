use std::sync::Arc;

use rustc_hash::FxHashMap;

use crate::circuit::{BoundCircuit, BoundGate, Circuit, Gate, Initial, Prep};
use crate::error::{Error, Result};
use crate::pauli::{anticommute_raw, mul_raw, PauliSum};
use crate::tableau::StabilizerTableau;

/// Default ceiling on the number of distinct propagated strings.
pub const DEFAULT_TERM_CAP: usize = 1 << 22;

/// Weighted Hermitian Pauli list. Each string carries a coefficient chunk of
/// width `w`: the value and, for gradient runs, its derivative with respect
/// to every parameter.
struct Terms {
    w: usize,
    keys: Vec<(u128, u128)>,
    coef: Vec<f64>,
    index: FxHashMap<(u128, u128), usize>,
}

impl Terms {
    fn new(h: &PauliSum, w: usize) -> Self {
        let mut t = Terms {
            w,
            keys: Vec::with_capacity(h.len()),
            coef: Vec::with_capacity(h.len() * w),
            index: FxHashMap::default(),
        };
        for (c, p) in h.terms() {
            // Canonical sums hold Hermitian letter-form strings with phase +1.
            let i = t.slot(p.x_mask(), p.z_mask());
            t.coef[i * w] += c;
        }
        t
    }

    fn len(&self) -> usize {
        self.keys.len()
    }

    fn slot(&mut self, x: u128, z: u128) -> usize {
        if let Some(&i) = self.index.get(&(x, z)) {
            return i;
        }
        let i = self.keys.len();
        self.keys.push((x, z));
        self.coef.resize(self.coef.len() + self.w, 0.0);
        self.index.insert((x, z), i);
        i
    }

    fn conjugate(&mut self, c: &crate::circuit::Clifford) {
        let support = c.support_mask();
        let mut moved = false;
        for i in 0..self.keys.len() {
            let (x, z) = self.keys[i];
            if (x | z) & support == 0 {
                continue;
            }
            let (nx, nz, q) = c.conjugate_raw(x, z, 0, true);
            debug_assert!(q == 0 || q == 2, "Clifford image of a Hermitian string is Hermitian");
            if q == 2 {
                for v in &mut self.coef[i * self.w..(i + 1) * self.w] {
                    *v = -*v;
                }
            }
            if (nx, nz) != (x, z) {
                self.keys[i] = (nx, nz);
                moved = true;
            }
        }
        if moved {
            self.index.clear();
            for (i, &k) in self.keys.iter().enumerate() {
                self.index.insert(k, i);
            }
        }
    }

    /// `P ↦ cos φ P + sin φ (iGP)` for every `P` anticommuting with `G`.
    /// `dphi` is `(param, dφ/dθ)` when derivatives are tracked.
    fn rotate(&mut self, gx: u128, gz: u128, phi: f64, dphi: Option<(usize, f64)>) {
        let w = self.w;
        let anti: Vec<usize> = (0..self.keys.len())
            .filter(|&i| {
                let (x, z) = self.keys[i];
                anticommute_raw(gx, gz, x, z)
            })
            .collect();
        if anti.is_empty() {
            return;
        }
        let mut orig = Vec::with_capacity(anti.len() * w);
        for &i in &anti {
            orig.extend_from_slice(&self.coef[i * w..(i + 1) * w]);
        }
        let mut targets = Vec::with_capacity(anti.len());
        for &i in &anti {
            let (x, z) = self.keys[i];
            let (qx, qz, q) = mul_raw((gx, gz, 0), (x, z, 0));
            let sign = match (q + 1) & 3 {
                0 => 1.0,
                2 => -1.0,
                _ => unreachable!("i·G·P is Hermitian when G and P anticommute"),
            };
            targets.push((self.slot(qx, qz), sign));
        }
        let (s, c) = phi.sin_cos();
        for (a, &i) in anti.iter().enumerate() {
            let o = &orig[a * w..(a + 1) * w];
            let chunk = &mut self.coef[i * w..(i + 1) * w];
            for (v, ov) in chunk.iter_mut().zip(o) {
                *v = ov * c;
            }
            if let Some((p, scale)) = dphi {
                chunk[1 + p] -= o[0] * s * scale;
            }
        }
        for (a, &(j, sign)) in targets.iter().enumerate() {
            let o = &orig[a * w..(a + 1) * w];
            let chunk = &mut self.coef[j * w..(j + 1) * w];
            for (v, ov) in chunk.iter_mut().zip(o) {
                *v += sign * s * ov;
            }
            if let Some((p, scale)) = dphi {
                chunk[1 + p] += sign * c * scale * o[0];
            }
        }
    }

    fn check_cap(&self, cap: usize) -> Result<()> {
        if self.len() > cap {
            return Err(Error::Resource(format!(
                "Heisenberg propagation produced more than {cap} Pauli strings; reduce the depth"
            )));
        }
        Ok(())
    }

    fn read_off(&self, t: &StabilizerTableau) -> Vec<f64> {
        let mut acc = vec![0.0; self.w];
        for (i, &(x, z)) in self.keys.iter().enumerate() {
            let s = t.sign_of(x, z);
            if s != 0.0 {
                for (a, v) in acc.iter_mut().zip(&self.coef[i * self.w..(i + 1) * self.w]) {
                    *a += s * v;
                }
            }
        }
        acc
    }
}

/// Backward propagation of a whole observable through one circuit
/// structure. In-circuit preparations propagate through their Clifford
/// prefix down to `|0…0⟩`.
pub struct HeisenbergPlan {
    gates: Vec<Gate>,
    tableau: Arc<StabilizerTableau>,
    h: PauliSum,
    n_params: usize,
    term_cap: usize,
}

impl HeisenbergPlan {
    pub fn new(c: &Circuit, h: &PauliSum, term_cap: usize) -> Self {
        let tableau = match c.prep() {
            Prep::Tableau(t) => Arc::clone(t),
            Prep::InCircuit { .. } => {
                Arc::new(StabilizerTableau::zero_state(c.n_qubits()).expect("valid register size"))
            }
        };
        HeisenbergPlan {
            gates: c.gates().to_vec(),
            tableau,
            h: h.clone(),
            n_params: c.n_params(),
            term_cap,
        }
    }

    /// Energy and, when `with_grad`, its exact gradient.
    pub(crate) fn run(&self, theta: &[f64], with_grad: bool) -> Result<(f64, Vec<f64>)> {
        let w = if with_grad { 1 + self.n_params } else { 1 };
        let mut terms = Terms::new(&self.h, w);
        for g in self.gates.iter().rev() {
            match g {
                Gate::Clifford(c) => terms.conjugate(c),
                Gate::Rotation(r) => {
                    let phi = r.scale * theta[r.param];
                    if phi == 0.0 && !with_grad {
                        continue;
                    }
                    let dphi = with_grad.then_some((r.param, r.scale));
                    terms.rotate(r.axis.x_mask(), r.axis.z_mask(), phi, dphi);
                    terms.check_cap(self.term_cap)?;
                }
            }
        }
        let acc = terms.read_off(&self.tableau);
        Ok((acc[0], acc[1..].to_vec()))
    }

    /// Number of strings after propagation at `theta`; diagnostic only.
    pub fn propagated_terms(&self, theta: &[f64]) -> Result<usize> {
        let mut terms = Terms::new(&self.h, 1);
        for g in self.gates.iter().rev() {
            match g {
                Gate::Clifford(c) => terms.conjugate(c),
                Gate::Rotation(r) => {
                    let phi = r.scale * theta[r.param];
                    if phi != 0.0 {
                        terms.rotate(r.axis.x_mask(), r.axis.z_mask(), phi, None);
                        terms.check_cap(self.term_cap)?;
                    }
                }
            }
        }
        Ok(terms.len())
    }
}

pub(super) fn expval_bound(c: &BoundCircuit, h: &PauliSum, cap: usize) -> Result<f64> {
    let tableau = match &c.initial {
        Initial::Tableau(t) => Arc::clone(t),
        Initial::Zero => Arc::new(StabilizerTableau::zero_state(c.n_qubits)?),
    };
    let mut terms = Terms::new(h, 1);
    for g in c.gates.iter().rev() {
        match g {
            BoundGate::Clifford(cl) => terms.conjugate(cl),
            BoundGate::Rotation { axis, angle } => {
                if *angle != 0.0 {
                    terms.rotate(axis.x_mask(), axis.z_mask(), *angle, None);
                    terms.check_cap(cap)?;
                }
            }
        }
    }
    Ok(terms.read_off(&tableau)[0])
}
