use num_complex::Complex64;
use rayon::prelude::*;

use crate::circuit::{BoundCircuit, BoundGate, Circuit, Clifford, Gate, GateOp, Initial, Prep, Rotation};
use crate::error::{Error, Result};
use crate::lightcone::Moments;
use crate::pauli::{PauliString, PauliSum};
use crate::state::{apply_bound_gate, expectation_pauli};

use super::adjoint;

/// Terms whose cones are simulated together. The cone of a union of
/// supports is the union of the individual cones, so a group is exact for
/// every member term.
struct Group {
    mask: u128,
    terms: Vec<usize>,
    gates: Vec<usize>,
}

fn plan_groups(moments: &Moments, supports: &[u128], cap: usize) -> Result<Vec<Group>> {
    let cones: Vec<u128> = supports.iter().map(|&s| moments.cone(s).0).collect();
    let budget = cones.iter().map(|m| m.count_ones()).max().unwrap_or(0);
    if budget as usize > cap {
        return Err(Error::Resource(format!(
            "largest causal cone has {budget} qubits, above the cap of {cap}; reduce the depth"
        )));
    }
    let mut order: Vec<usize> = (0..supports.len()).collect();
    order.sort_by_key(|&t| (cones[t].trailing_zeros(), t));
    let mut groups: Vec<(u128, u128, Vec<usize>)> = Vec::new();
    for t in order {
        let best = groups
            .iter()
            .enumerate()
            .map(|(g, (mask, _, _))| (g, (mask | cones[t]).count_ones()))
            .filter(|&(_, size)| size <= budget)
            .min_by_key(|&(g, size)| (size, g));
        match best {
            Some((g, _)) => {
                groups[g].0 |= cones[t];
                groups[g].1 |= supports[t];
                groups[g].2.push(t);
            }
            None => groups.push((cones[t], supports[t], vec![t])),
        }
    }
    Ok(groups
        .into_iter()
        .map(|(mask, support, mut terms)| {
            terms.sort_unstable();
            let (cone, gates) = moments.cone(support);
            debug_assert_eq!(cone, mask);
            Group { mask, terms, gates }
        })
        .collect())
}

fn local_map(mask: u128) -> Vec<Option<usize>> {
    let mut map = vec![None; 128];
    let mut local = 0;
    for (q, slot) in map.iter_mut().enumerate() {
        if (mask >> q) & 1 == 1 {
            *slot = Some(local);
            local += 1;
        }
    }
    map
}

fn remap_mask(mask: u128, map: &[Option<usize>]) -> u128 {
    let mut out = 0u128;
    let mut m = mask;
    while m != 0 {
        let q = m.trailing_zeros() as usize;
        out |= 1u128 << map[q].expect("qubit inside the cone");
        m &= m - 1;
    }
    out
}

fn remap_pauli(p: &PauliString, n_local: usize, map: &[Option<usize>]) -> PauliString {
    PauliString::from_raw(
        n_local,
        remap_mask(p.x_mask(), map),
        remap_mask(p.z_mask(), map),
        p.phase().power(),
    )
}

fn remap_clifford(c: &Clifford, map: &[Option<usize>]) -> Clifford {
    let m = |q: usize| map[q].expect("qubit inside the cone");
    match *c {
        Clifford::H(q) => Clifford::H(m(q)),
        Clifford::S(q) => Clifford::S(m(q)),
        Clifford::Sdg(q) => Clifford::Sdg(m(q)),
        Clifford::Cz(a, b) => Clifford::Cz(m(a), m(b)),
        Clifford::Cnot(a, b) => Clifford::Cnot(m(a), m(b)),
    }
}

fn zero_state(n: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); 1 << n];
    v[0] = Complex64::new(1.0, 0.0);
    v
}

fn split_identity(h: &PauliSum) -> (f64, Vec<usize>) {
    let mut offset = 0.0;
    let mut rest = Vec::new();
    for (k, (c, p)) in h.terms().iter().enumerate() {
        if p.is_identity() {
            offset += c;
        } else {
            rest.push(k);
        }
    }
    (offset, rest)
}

struct LocalGroup {
    n: usize,
    gates: Vec<Gate>,
    h: PauliSum,
}

/// Precomputed cone decomposition of one circuit structure against one
/// observable.
pub struct ConePlan {
    offset: f64,
    groups: Vec<LocalGroup>,
    max_cone: usize,
}

impl ConePlan {
    pub fn new(c: &Circuit, h: &PauliSum, cap: usize) -> Result<Self> {
        if let Prep::Tableau(_) = c.prep() {
            return Err(Error::WrongBackend(
                "cone evaluation needs a product initial state; use the heisenberg backend for tableau preparations"
                    .into(),
            ));
        }
        let moments = Moments::new(c.gates());
        let (offset, rest) = split_identity(h);
        let supports: Vec<u128> = rest.iter().map(|&k| h.terms()[k].1.support_mask()).collect();
        let groups = plan_groups(&moments, &supports, cap)?;
        let mut local = Vec::with_capacity(groups.len());
        for g in &groups {
            let n = g.mask.count_ones() as usize;
            let map = local_map(g.mask);
            let gates = g
                .gates
                .iter()
                .map(|&k| match &c.gates()[k] {
                    Gate::Clifford(cl) => Gate::Clifford(remap_clifford(cl, &map)),
                    Gate::Rotation(r) => Gate::Rotation(Rotation {
                        axis: remap_pauli(&r.axis, n, &map),
                        param: r.param,
                        scale: r.scale,
                    }),
                })
                .collect();
            let terms = g.terms.iter().map(|&t| {
                let (coeff, p) = &h.terms()[rest[t]];
                (*coeff, remap_pauli(p, n, &map))
            });
            local.push(LocalGroup {
                n,
                gates,
                h: PauliSum::from_terms(n, terms)?,
            });
        }
        let max_cone = local.iter().map(|g| g.n).max().unwrap_or(0);
        Ok(ConePlan {
            offset,
            groups: local,
            max_cone,
        })
    }

    /// Largest simulated register.
    pub fn max_cone(&self) -> usize {
        self.max_cone
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub(crate) fn run(&self, theta: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let want_grad = grad.is_some();
        let parts: Vec<(f64, Vec<f64>)> = self
            .groups
            .par_iter()
            .map(|g| {
                let mut local = vec![0.0; if want_grad { theta.len() } else { 0 }];
                let e = adjoint::run(
                    &zero_state(g.n),
                    &g.gates,
                    theta,
                    &g.h,
                    want_grad.then_some(local.as_mut_slice()),
                );
                (e, local)
            })
            .collect();
        let mut energy = self.offset;
        for (e, _) in &parts {
            energy += e;
        }
        if let Some(grad) = grad {
            for (_, local) in &parts {
                for (a, b) in grad.iter_mut().zip(local) {
                    *a += b;
                }
            }
        }
        energy
    }
}

pub(super) fn expval_bound(c: &BoundCircuit, h: &PauliSum, cap: usize) -> Result<f64> {
    if let Initial::Tableau(_) = c.initial {
        return Err(Error::WrongBackend(
            "cone evaluation needs a product initial state; use the heisenberg backend for tableau preparations".into(),
        ));
    }
    let moments = Moments::new(&c.gates);
    let (offset, rest) = split_identity(h);
    let supports: Vec<u128> = rest.iter().map(|&k| h.terms()[k].1.support_mask()).collect();
    let groups = plan_groups(&moments, &supports, cap)?;
    let parts: Vec<f64> = groups
        .par_iter()
        .map(|g| {
            let n = g.mask.count_ones() as usize;
            let map = local_map(g.mask);
            let mut psi = zero_state(n);
            for &k in &g.gates {
                let local = match &c.gates[k] {
                    BoundGate::Clifford(cl) => BoundGate::Clifford(remap_clifford(cl, &map)),
                    BoundGate::Rotation { axis, angle } => BoundGate::Rotation {
                        axis: remap_pauli(axis, n, &map),
                        angle: *angle,
                    },
                };
                debug_assert!(local.support_mask() >> n == 0);
                apply_bound_gate(&mut psi, &local);
            }
            g.terms
                .iter()
                .map(|&t| {
                    let (coeff, p) = &h.terms()[rest[t]];
                    coeff * expectation_pauli(&psi, &remap_pauli(p, n, &map)).re
                })
                .sum::<f64>()
        })
        .collect();
    Ok(offset + parts.iter().sum::<f64>())
}
