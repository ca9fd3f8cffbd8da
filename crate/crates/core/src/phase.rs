//! Device-side analysis of optimized states: order-parameter curves,
//! fidelity matrices and spectral clustering into phases.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{BoundCircuit, Initial};
use crate::error::{Error, Result};
use crate::evaluator::{measure_pauli_sampled, prepare_state, ShotEstimate};
use crate::models::ModelSpec;
use crate::optimizer::SweepRecord;
use crate::pauli::PauliString;
use crate::state::StateVector;
use crate::tableau::DEFAULT_STATEVECTOR_CAP;

const KMEANS_RESTARTS: usize = 20;

/// `|⟨a|b⟩|`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm())
}

/// Model spec shared by a list of sweep records.
pub fn records_spec(records: &[SweepRecord]) -> Result<ModelSpec> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidArgument("no sweep records".into()))?;
    if records
        .iter()
        .any(|r| r.model != first.model || r.size != first.size || r.depth != first.depth)
    {
        return Err(Error::InvalidArgument("records mix models, sizes or depths".into()));
    }
    ModelSpec::new(first.model, first.size, first.depth)
}

/// The optimized circuit of one record.
pub fn bound_circuit(spec: &ModelSpec, record: &SweepRecord) -> Result<BoundCircuit> {
    spec.ansatz(record.coupling)?.bind(&record.result.theta)
}

pub fn optimized_states(records: &[SweepRecord]) -> Result<Vec<StateVector>> {
    let spec = records_spec(records)?;
    records
        .par_iter()
        .map(|r| prepare_state(&bound_circuit(&spec, r)?, DEFAULT_STATEVECTOR_CAP))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityMatrix {
    pub grid: Vec<f64>,
    /// Row-major, symmetric.
    pub values: Vec<Vec<f64>>,
}

impl FidelityMatrix {
    pub fn from_states(grid: Vec<f64>, states: &[StateVector]) -> Result<Self> {
        if grid.len() != states.len() {
            return Err(Error::InvalidArgument("grid and state counts differ".into()));
        }
        let n = states.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
        let upper: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| if i == j { Ok(1.0) } else { fidelity(&states[i], &states[j]) })
            .collect::<Result<_>>()?;
        let mut values = vec![vec![0.0; n]; n];
        for (&(i, j), v) in pairs.iter().zip(upper) {
            values[i][j] = v;
            values[j][i] = v;
        }
        Ok(FidelityMatrix { grid, values })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Heat-map data: a header row of couplings, then one row per coupling.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("coupling");
        for g in &self.grid {
            let _ = write!(out, ",{g}");
        }
        out.push('\n');
        for (g, row) in self.grid.iter().zip(&self.values) {
            let _ = write!(out, "{g}");
            for v in row {
                let _ = write!(out, ",{v:.12}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn fidelity_matrix(records: &[SweepRecord]) -> Result<FidelityMatrix> {
    let states = optimized_states(records)?;
    FidelityMatrix::from_states(records.iter().map(|r| r.coupling).collect(), &states)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapEstimate {
    /// Sampled all-zeros probability, an estimate of `F²`.
    pub squared: ShotEstimate,
    /// `sqrt(max(mean, 0))`.
    pub fidelity: f64,
}

/// Compute-uncompute overlap: run `U_A`, then `U_B†`, and count how often
/// the register returns to the shared preparation.
pub fn overlap_sampled(a: &BoundCircuit, b: &BoundCircuit, shots: u64, seed: u64) -> Result<OverlapEstimate> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be positive".into()));
    }
    if a.n_qubits != b.n_qubits {
        return Err(Error::Dimension(format!("{} vs {} qubits", a.n_qubits, b.n_qubits)));
    }
    let compatible = match (&a.initial, &b.initial) {
        (Initial::Zero, Initial::Zero) => true,
        (Initial::Tableau(x), Initial::Tableau(y)) => x.generators() == y.generators(),
        _ => false,
    };
    if !compatible {
        return Err(Error::InvalidArgument("circuits start from different preparations".into()));
    }
    let mut psi = prepare_state(a, DEFAULT_STATEVECTOR_CAP)?;
    psi.apply_all(&b.inverse().gates)?;
    let prep = prepare_state(
        &BoundCircuit {
            n_qubits: a.n_qubits,
            initial: a.initial.clone(),
            gates: Vec::new(),
        },
        DEFAULT_STATEVECTOR_CAP,
    )?;
    let p = prep.inner(&psi)?.norm_sqr().clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..shots).filter(|_| rng.random::<f64>() < p).count() as f64;
    let squared = ShotEstimate::from_outcomes(hits, hits, shots, seed);
    Ok(OverlapEstimate {
        fidelity: squared.mean.max(0.0).sqrt(),
        squared,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseLabels {
    pub grid: Vec<f64>,
    pub labels: Vec<u8>,
}

impl PhaseLabels {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("coupling,label\n");
        for (g, l) in self.grid.iter().zip(&self.labels) {
            let _ = writeln!(out, "{g},{l}");
        }
        out
    }
}

fn affinity(f: &FidelityMatrix) -> Result<DMatrix<f64>> {
    let n = f.len();
    if n == 0 || f.values.len() != n || f.values.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("affinity matrix must be square and non-empty".into()));
    }
    let m = DMatrix::from_fn(n, n, |i, j| f.values[i][j]);
    for i in 0..n {
        for j in 0..n {
            if !(m[(i, j)] >= 0.0) || (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                return Err(Error::InvalidArgument("affinity must be symmetric and nonnegative".into()));
            }
        }
    }
    Ok(m)
}

/// `I − D^{-1/2} F D^{-1/2}`.
pub fn normalized_laplacian(f: &FidelityMatrix) -> Result<DMatrix<f64>> {
    let a = affinity(f)?;
    let n = a.nrows();
    let deg: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    if deg.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Numerical("affinity has a zero row sum".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let v = -a[(i, j)] / (deg[i] * deg[j]).sqrt();
        if i == j {
            1.0 + v
        } else {
            v
        }
    }))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Lloyd's algorithm from a k-means++ seeding. Returns labels and inertia.
fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    while centers.len() < k {
        let d: Vec<f64> = points
            .iter()
            .map(|p| centers.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, di) in d.iter().enumerate() {
                if u < *di {
                    pick = i;
                    break;
                }
                u -= di;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[next].clone());
    }
    let mut labels = vec![usize::MAX; n];
    for _ in 0..300 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| sq_dist(p, &centers[a]).total_cmp(&sq_dist(p, &centers[b])))
                .expect("k ≥ 1");
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let dim = points[0].len();
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            *center = (0..dim)
                .map(|d| members.iter().map(|m| m[d]).sum::<f64>() / members.len() as f64)
                .collect();
        }
    }
    let inertia = points.iter().zip(&labels).map(|(p, &l)| sq_dist(p, &centers[l])).sum();
    (labels, inertia)
}

/// Normalized spectral clustering with the fidelity as affinity. Labels are
/// renumbered so the first grid point carries label 1.
pub fn spectral_cluster(f: &FidelityMatrix, k: usize, seed: u64) -> Result<PhaseLabels> {
    let n = f.len();
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!("need 2 ≤ k ≤ {n}, got {k}")));
    }
    let lap = normalized_laplacian(f)?;
    let eig = SymmetricEigen::new(lap);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row: Vec<f64> = order[..k].iter().map(|&c| eig.eigenvectors[(i, c)]).collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter().map(|v| v / norm).collect()
            } else {
                row
            }
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let (labels, inertia) = kmeans(&points, k, &mut rng);
        // Strict comparison keeps the earliest restart on ties.
        if best.as_ref().is_none_or(|(_, b)| inertia < *b - 1e-12) {
            best = Some((labels, inertia));
        }
    }
    let (raw, _) = best.expect("at least one restart");
    // Renumber by first appearance, then swap so point 0 is labelled 1.
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &l in &raw {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
    }
    let labels = raw
        .iter()
        .map(|&l| match map[l] {
            0 => 1,
            1 => 0,
            other => other as u8,
        })
        .collect();
    Ok(PhaseLabels {
        grid: f.grid.clone(),
        labels,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub coupling: f64,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampled: Option<ShotEstimate>,
}

/// Exact expectation of `op` on every optimized state, plus an emulated
/// device estimate when `shots` is given.
pub fn order_parameter_curve(
    records: &[SweepRecord],
    op: &PauliString,
    shots: Option<u64>,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    let spec = records_spec(records)?;
    if op.n_qubits() != spec.n_qubits()? {
        return Err(Error::Dimension(format!(
            "{}-qubit observable for a {}-qubit model",
            op.n_qubits(),
            spec.n_qubits()?
        )));
    }
    records
        .par_iter()
        .enumerate()
        .map(|(k, r)| {
            let bound = bound_circuit(&spec, r)?;
            let value = prepare_state(&bound, DEFAULT_STATEVECTOR_CAP)?.expectation_pauli(op)?.re;
            let sampled = match shots {
                Some(s) => Some(measure_pauli_sampled(&bound, op, s, seed.wrapping_add(k as u64))?),
                None => None,
            };
            Ok(CurvePoint {
                coupling: r.coupling,
                value,
                sampled,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn matrix(grid: Vec<f64>, values: Vec<Vec<f64>>) -> FidelityMatrix {
        FidelityMatrix { grid, values }
    }

    #[test]
    fn fidelity_basics() {
        let a = StateVector::basis(2, 1).unwrap();
        let b = StateVector::basis(2, 2).unwrap();
        assert_eq!(fidelity(&a, &a).unwrap(), 1.0);
        assert_eq!(fidelity(&a, &b).unwrap(), 0.0);
        let phased = StateVector::from_amplitudes(
            a.amplitudes().iter().map(|x| x * Complex64::new(0.0, 1.0)).collect(),
        )
        .unwrap();
        assert!((fidelity(&a, &phased).unwrap() - 1.0).abs() < 1e-15);
        assert!(fidelity(&a, &StateVector::zero(3).unwrap()).is_err());
    }

    #[test]
    fn block_affinity_splits_components() {
        let f = matrix(vec![0.0, 1.0, 2.0], vec![vec![1.0, 1.0, 0.0], vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        assert_eq!(spectral_cluster(&f, 2, 1).unwrap().labels, vec![1, 1, 0]);
        let swapped = matrix(vec![0.0, 1.0, 2.0], vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0], vec![0.0, 1.0, 1.0]]);
        assert_eq!(spectral_cluster(&swapped, 2, 1).unwrap().labels, vec![1, 0, 0]);
    }

    #[test]
    fn degenerate_affinity_rejected() {
        let f = matrix(vec![0.0, 1.0], vec![vec![0.0, 0.0], vec![0.0, 1.0]]);
        assert!(spectral_cluster(&f, 2, 1).is_err());
        let asym = matrix(vec![0.0, 1.0], vec![vec![1.0, 0.5], vec![0.2, 1.0]]);
        assert!(spectral_cluster(&asym, 2, 1).is_err());
    }

    #[test]
    fn csv_layout() {
        let f = matrix(vec![0.0, 0.5], vec![vec![1.0, 0.25], vec![0.25, 1.0]]);
        assert_eq!(f.to_csv(), "coupling,0,0.5\n0,1.000000000000,0.250000000000\n0.5,0.250000000000,1.000000000000\n");
        let l = PhaseLabels { grid: vec![0.0, 0.5], labels: vec![1, 0] };
        assert_eq!(l.to_csv(), "coupling,label\n0,1\n0.5,0\n");
    }

    fn random_affinity(n: usize, seed: u64) -> FidelityMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![vec![1.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let v = rng.random::<f64>();
                values[i][j] = v;
                values[j][i] = v;
            }
        }
        matrix((0..n).map(|i| i as f64).collect(), values)
    }

    fn same_partition(a: &[u8], b: &[u8]) -> bool {
        a.iter().zip(b).all(|(x, y)| x == y) || a.iter().zip(b).all(|(x, y)| x != y)
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn laplacian_spectrum_in_range(n in 2usize..9, seed in 0u64..1000) {
            let lap = normalized_laplacian(&random_affinity(n, seed)).unwrap();
            for ev in SymmetricEigen::new(lap).eigenvalues.iter() {
                proptest::prop_assert!(*ev > -1e-10 && *ev < 2.0 + 1e-10);
            }
        }

        #[test]
        fn clustering_scale_invariant(n in 3usize..9, seed in 0u64..1000, c in 0.01f64..100.0) {
            let f = random_affinity(n, seed);
            let scaled = matrix(f.grid.clone(), f.values.iter().map(|r| r.iter().map(|v| v * c).collect()).collect());
            let a = spectral_cluster(&f, 2, 3).unwrap();
            let b = spectral_cluster(&scaled, 2, 3).unwrap();
            proptest::prop_assert_eq!(a.labels, b.labels);
        }

        #[test]
        fn clustering_permutation_equivariant(n in 3usize..9, seed in 0u64..1000) {
            // Use a clearly separated affinity so the partition is unique.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let side: Vec<bool> = (0..n).map(|i| i == 0 || (i != 1 && rng.random::<bool>())).collect();
            let values: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else if side[i] == side[j] { 0.9 } else { 0.05 }).collect())
                .collect();
            let f = matrix((0..n).map(|i| i as f64).collect(), values);
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let permuted = matrix(
                perm.iter().map(|&i| f.grid[i]).collect(),
                perm.iter().map(|&i| perm.iter().map(|&j| f.values[i][j]).collect()).collect(),
            );
            let a = spectral_cluster(&f, 2, 5).unwrap().labels;
            let b = spectral_cluster(&permuted, 2, 5).unwrap().labels;
            let back: Vec<u8> = (0..n).map(|i| b[perm.iter().position(|&p| p == i).unwrap()]).collect();
            proptest::prop_assert!(same_partition(&a, &back));
            proptest::prop_assert!(same_partition(&a, &side.iter().map(|&s| s as u8).collect::<Vec<_>>()));
        }
    }

    #[test]
    fn overlap_of_identical_circuits_is_one() {
        let spec = ModelSpec::new(crate::models::ModelKind::Cluster, 6, 1).unwrap();
        let c = spec.ansatz(1.0).unwrap();
        let theta: Vec<f64> = (0..c.n_params()).map(|i| 0.1 * i as f64).collect();
        let bound = c.bind(&theta).unwrap();
        let est = overlap_sampled(&bound, &bound, 1000, 7).unwrap();
        assert_eq!(est.fidelity, 1.0);
        assert_eq!(est.squared.std_error, 0.0);
    }

    #[test]
    fn overlap_matches_exact_fidelity() {
        let spec = ModelSpec::new(crate::models::ModelKind::Cluster, 6, 1).unwrap();
        let c = spec.ansatz(1.0).unwrap();
        let ta: Vec<f64> = (0..c.n_params()).map(|i| 0.3 * (i as f64).sin()).collect();
        let tb: Vec<f64> = (0..c.n_params()).map(|i| 0.3 * (i as f64).cos()).collect();
        let (a, b) = (c.bind(&ta).unwrap(), c.bind(&tb).unwrap());
        let exact = fidelity(
            &prepare_state(&a, DEFAULT_STATEVECTOR_CAP).unwrap(),
            &prepare_state(&b, DEFAULT_STATEVECTOR_CAP).unwrap(),
        )
        .unwrap();
        let est = overlap_sampled(&a, &b, 100_000, 11).unwrap();
        assert!((est.squared.mean - exact * exact).abs() < 5.0 * est.squared.std_error + 1e-12);
        let toric = ModelSpec::new(crate::models::ModelKind::Toric, 2, 1).unwrap();
        let t = toric.ansatz(0.1).unwrap().bind(&[0.0, 0.0]).unwrap();
        assert!(overlap_sampled(&a, &t, 10, 1).is_err());
    }
}
