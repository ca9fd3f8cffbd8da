//! Exact ground states for reference energies.
//!
//! Small registers are diagonalized densely. Larger ones use Lanczos with
//! full reorthogonalization on a matrix-free Pauli operator, restarted from
//! the current Ritz vector. Ground-space degeneracy is counted by repeated
//! deflated runs, which a single Krylov sequence cannot see.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::PauliSum;
use crate::state::{inner, l2, StateVector};

/// Largest register diagonalized densely.
pub const DENSE_MAX_QUBITS: usize = 10;
/// Largest register accepted by the Lanczos path.
pub const LANCZOS_MAX_QUBITS: usize = 25;

const RESIDUAL_TOL: f64 = 1e-9;
const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dense,
    Lanczos,
}

#[derive(Clone, Debug)]
pub struct EdResult {
    pub e0: f64,
    pub ground_vector: Option<StateVector>,
    /// `‖H v − e0 v‖` of the returned vector.
    pub residual: f64,
    pub method: Method,
    /// Number of eigenvalues within `1e-8` of `e0`; `None` unless requested.
    pub degeneracy: Option<usize>,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdOptions {
    pub want_vector: bool,
    /// Count the ground-space dimension (costs one deflated run per state).
    pub degeneracy: bool,
    /// `None` picks dense for small registers and Lanczos otherwise.
    pub method: Option<Method>,
    pub seed: u64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
}

impl Default for EdOptions {
    fn default() -> Self {
        EdOptions {
            want_vector: false,
            degeneracy: false,
            method: None,
            seed: 0x5eed,
            krylov_dim: 200,
            max_restarts: 50,
        }
    }
}

#[inline]
fn i_power(k: u32) -> Complex64 {
    match k & 3 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// `(x, z, i^{k} · coeff)` in `X^x Z^z` form for each term.
fn xz_terms(h: &PauliSum) -> Vec<(usize, usize, Complex64)> {
    h.terms()
        .iter()
        .map(|(c, p)| {
            let k = p.phase().power() + (p.x_mask() & p.z_mask()).count_ones();
            (p.x_mask() as usize, p.z_mask() as usize, i_power(k) * *c)
        })
        .collect()
}

fn apply_terms(terms: &[(usize, usize, Complex64)], v: &[Complex64], out: &mut [Complex64]) {
    // out[i] = Σ c (−1)^{z·(i⊕x)} v[i⊕x]
    out.par_chunks_mut(4096).enumerate().for_each(|(chunk, slice)| {
        let base = chunk * 4096;
        for (off, o) in slice.iter_mut().enumerate() {
            let i = base + off;
            let mut acc = Complex64::new(0.0, 0.0);
            for &(x, z, c) in terms {
                let j = i ^ x;
                let term = c * v[j];
                if (z & j).count_ones() & 1 == 1 {
                    acc -= term;
                } else {
                    acc += term;
                }
            }
            *o = acc;
        }
    });
}

/// `H v` without materializing `H`.
pub fn apply_hamiltonian(h: &PauliSum, v: &[Complex64]) -> Result<Vec<Complex64>> {
    if v.len() != 1usize << h.n_qubits() {
        return Err(Error::Dimension(format!(
            "vector of length {} for a {}-qubit operator",
            v.len(),
            h.n_qubits()
        )));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    apply_terms(&xz_terms(h), v, &mut out);
    Ok(out)
}

/// Dense matrix of `H` in the computational basis.
pub fn dense_matrix(h: &PauliSum) -> Result<DMatrix<Complex64>> {
    let n = h.n_qubits();
    if n > DENSE_MAX_QUBITS + 2 {
        return Err(Error::Resource(format!("{n} qubits is too large for a dense matrix")));
    }
    let dim = 1usize << n;
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for (x, z, c) in xz_terms(h) {
        for j in 0..dim {
            let v = if (z & j).count_ones() & 1 == 1 { -c } else { c };
            m[(j ^ x, j)] += v;
        }
    }
    Ok(m)
}

pub fn ground_state(h: &PauliSum, want_vector: bool) -> Result<EdResult> {
    ground_state_with(
        h,
        &EdOptions {
            want_vector,
            ..EdOptions::default()
        },
    )
}

pub fn ground_state_with(h: &PauliSum, opts: &EdOptions) -> Result<EdResult> {
    let n = h.n_qubits();
    let method = opts.method.unwrap_or(if n <= DENSE_MAX_QUBITS {
        Method::Dense
    } else {
        Method::Lanczos
    });
    match method {
        Method::Dense => dense(h, opts),
        Method::Lanczos => {
            if n > LANCZOS_MAX_QUBITS {
                return Err(Error::Resource(format!(
                    "{n} qubits exceeds the exact-diagonalization cap of {LANCZOS_MAX_QUBITS}"
                )));
            }
            lanczos_ground(h, opts)
        }
    }
}

fn residual_of(terms: &[(usize, usize, Complex64)], v: &[Complex64], e: f64) -> f64 {
    let mut hv = vec![Complex64::new(0.0, 0.0); v.len()];
    apply_terms(terms, v, &mut hv);
    hv.iter().zip(v).map(|(a, b)| (a - b * e).norm_sqr()).sum::<f64>().sqrt()
}

fn dense(h: &PauliSum, opts: &EdOptions) -> Result<EdResult> {
    let m = dense_matrix(h)?;
    let eig = SymmetricEigen::new(m);
    let (k0, &e0) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Numerical("empty spectrum".into()))?;
    let v: Vec<Complex64> = eig.eigenvectors.column(k0).iter().copied().collect();
    let residual = residual_of(&xz_terms(h), &v, e0);
    let degeneracy = opts
        .degeneracy
        .then(|| eig.eigenvalues.iter().filter(|&&e| e - e0 < DEGENERACY_TOL).count());
    Ok(EdResult {
        e0,
        ground_vector: if opts.want_vector {
            Some(StateVector::normalized(v)?)
        } else {
            None
        },
        residual,
        method: Method::Dense,
        degeneracy,
        converged: residual <= 1e-8,
    })
}

fn orthogonalize(w: &mut [Complex64], against: &[Vec<Complex64>]) {
    // Two passes of classical Gram-Schmidt.
    for _ in 0..2 {
        for v in against {
            let c = inner(v, w);
            for (a, b) in w.iter_mut().zip(v) {
                *a -= b * c;
            }
        }
    }
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng, deflate: &[Vec<Complex64>]) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    orthogonalize(&mut v, deflate);
    let norm = l2(&v);
    v.iter_mut().for_each(|a| *a /= norm);
    v
}

fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let k = alpha.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    SymmetricEigen::new(t)
}

fn lowest(eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> (usize, f64) {
    let (i, &e) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty tridiagonal");
    (i, e)
}

/// Residual estimate `β_k |s_k|` of the lowest Ritz pair.
fn ritz_converged(alpha: &[f64], beta: &[f64], next_beta: f64) -> bool {
    let eig = tridiagonal_eigen(alpha, beta);
    let (i, _) = lowest(&eig);
    let last = eig.eigenvectors[(alpha.len() - 1, i)];
    next_beta * last.abs() < 0.1 * RESIDUAL_TOL
}

/// Lowest Ritz pair of `H` restricted to the complement of `deflate`.
fn lanczos(
    terms: &[(usize, usize, Complex64)],
    dim: usize,
    deflate: &[Vec<Complex64>],
    opts: &EdOptions,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Vec<Complex64>, f64, bool)> {
    let m = opts.krylov_dim.clamp(2, dim.saturating_sub(deflate.len()).max(1));
    let mut start = random_unit(dim, rng, deflate);
    let mut best = (f64::INFINITY, start.clone(), f64::INFINITY);
    for _ in 0..=opts.max_restarts {
        let mut basis: Vec<Vec<Complex64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![Complex64::new(0.0, 0.0); dim];
        loop {
            let j = basis.len() - 1;
            apply_terms(terms, &basis[j], &mut w);
            alpha.push(inner(&basis[j], &w).re);
            orthogonalize(&mut w, deflate);
            orthogonalize(&mut w, &basis);
            let b = l2(&w);
            if basis.len() >= m || b < 1e-12 || (alpha.len() % 10 == 0 && ritz_converged(&alpha, &beta, b)) {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|a| a / b).collect());
        }
        let eig = tridiagonal_eigen(&alpha, &beta);
        let (i0, theta) = lowest(&eig);
        let s = eig.eigenvectors.column(i0);
        let mut y = vec![Complex64::new(0.0, 0.0); dim];
        for (c, v) in s.iter().zip(&basis) {
            for (a, b) in y.iter_mut().zip(v) {
                *a += b * *c;
            }
        }
        orthogonalize(&mut y, deflate);
        let norm = l2(&y);
        y.iter_mut().for_each(|a| *a /= norm);
        let res = residual_of(terms, &y, theta);
        if res < best.2 {
            best = (theta, y.clone(), res);
        }
        if res <= RESIDUAL_TOL {
            return Ok((theta, y, res, true));
        }
        start = y;
    }
    Ok((best.0, best.1, best.2, false))
}

fn lanczos_ground(h: &PauliSum, opts: &EdOptions) -> Result<EdResult> {
    let dim = 1usize << h.n_qubits();
    let terms = xz_terms(h);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (e0, v, residual, converged) = lanczos(&terms, dim, &[], opts, &mut rng)?;
    let degeneracy = if opts.degeneracy {
        let mut found = vec![v.clone()];
        while found.len() < 8 && found.len() < dim {
            let (e, u, _, _) = lanczos(&terms, dim, &found, opts, &mut rng)?;
            if e - e0 >= DEGENERACY_TOL {
                break;
            }
            found.push(u);
        }
        Some(found.len())
    } else {
        None
    };
    Ok(EdResult {
        e0,
        ground_vector: if opts.want_vector {
            Some(StateVector::normalized(v)?)
        } else {
            None
        },
        residual,
        method: Method::Lanczos,
        degeneracy,
        converged,
    })
}
