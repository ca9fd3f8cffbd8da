//! BFGS with a strong-Wolfe line search, and warm-started parameter sweeps.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{Backend, Evaluator};
use crate::models::{ModelKind, ModelSpec};

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub theta: Vec<f64>,
    pub energy: f64,
    /// Infinity norm of the gradient at `theta`.
    pub grad_norm: f64,
    pub iterations: usize,
    pub n_evals: usize,
    pub converged: bool,
    /// Seconds; excluded from serialized records so they stay reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BfgsOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            tol: 1e-6,
            max_iter: 500,
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn step(x: &[f64], p: &[f64], a: f64) -> Vec<f64> {
    x.iter().zip(p).map(|(xi, pi)| xi + a * pi).collect()
}

struct Point {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    d: f64,
}

/// Minimizer of the cubic through two points with slopes, if it lies
/// inside the safeguarded bracket; otherwise the bisection point.
fn interpolate(lo: &Point, hi: &Point) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let d1 = lo.d + hi.d - 3.0 * (lo.f - hi.f) / (a - b);
    let disc = d1 * d1 - lo.d * hi.d;
    let mid = 0.5 * (a + b);
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (hi.d + d2 - d1) / (hi.d - lo.d + 2.0 * d2);
    let (left, right) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (right - left);
    if t.is_finite() && t > left + margin && t < right - margin {
        t
    } else {
        mid
    }
}

/// Nocedal-Wright strong-Wolfe search along `p`. Returns `None` when no
/// acceptable step is found.
fn line_search<F>(eval: &mut F, x: &[f64], f0: f64, d0: f64, p: &[f64], alpha0: f64) -> Result<Option<Point>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut probe = |a: f64| -> Result<Point> {
        let (f, g) = eval(&step(x, p, a))?;
        let d = dot(&g, p);
        Ok(Point { alpha: a, f, g, d })
    };
    let origin = Point {
        alpha: 0.0,
        f: f0,
        g: Vec::new(),
        d: d0,
    };
    let mut prev = origin;
    let mut a = alpha0;
    for i in 0..25 {
        let cur = probe(a)?;
        if !cur.f.is_finite() {
            a *= 0.5;
            continue;
        }
        if cur.f > f0 + C1 * a * d0 || (i > 0 && cur.f >= prev.f) {
            return zoom(&mut probe, f0, d0, prev, cur);
        }
        if cur.d.abs() <= -C2 * d0 {
            return Ok(Some(cur));
        }
        if cur.d >= 0.0 {
            return zoom(&mut probe, f0, d0, cur, prev);
        }
        a *= 2.0;
        prev = cur;
    }
    Ok(None)
}

fn zoom<P>(probe: &mut P, f0: f64, d0: f64, mut lo: Point, mut hi: Point) -> Result<Option<Point>>
where
    P: FnMut(f64) -> Result<Point>,
{
    for _ in 0..40 {
        if (hi.alpha - lo.alpha).abs() < 1e-14 * lo.alpha.abs().max(1.0) {
            break;
        }
        let a = interpolate(&lo, &hi);
        let cur = probe(a)?;
        if cur.f > f0 + C1 * a * d0 || cur.f >= lo.f {
            hi = cur;
        } else {
            if cur.d.abs() <= -C2 * d0 {
                return Ok(Some(cur));
            }
            if cur.d * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    // A bracket end with sufficient decrease is still progress.
    if lo.alpha > 0.0 && lo.f < f0 {
        return Ok(Some(lo));
    }
    Ok(None)
}

/// Quasi-Newton minimization. `eval` returns the objective and its
/// gradient. Accepted energies never increase; on line-search failure the
/// best point so far is returned with `converged = false`.
pub fn bfgs_minimize<F>(mut eval: F, theta0: &[f64], opts: &BfgsOptions) -> Result<OptResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let start = Instant::now();
    let n = theta0.len();
    let mut evals = 0usize;
    let mut counted = |x: &[f64]| {
        evals += 1;
        eval(x)
    };
    let mut x = theta0.to_vec();
    let (mut f, mut g) = counted(&x)?;
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut first = true;
    let mut iterations = 0;
    let mut converged = inf_norm(&g) <= opts.tol;
    while !converged && iterations < opts.max_iter {
        let gv = DVector::from_column_slice(&g);
        let mut p: Vec<f64> = (-(&h * &gv)).iter().copied().collect();
        let mut d0 = dot(&g, &p);
        if d0 >= 0.0 {
            h.fill_with_identity();
            p = g.iter().map(|v| -v).collect();
            d0 = dot(&g, &p);
        }
        let alpha0 = if first { (1.0 / inf_norm(&g)).min(1.0) } else { 1.0 };
        let Some(next) = line_search(&mut counted, &x, f, d0, &p, alpha0)? else {
            break;
        };
        iterations += 1;
        let s: Vec<f64> = p.iter().map(|v| v * next.alpha).collect();
        let y: Vec<f64> = next.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if first {
                h *= sy / dot(&y, &y);
            }
            let rho = 1.0 / sy;
            let sv = DVector::from_vec(s.clone());
            let yv = DVector::from_vec(y);
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ, expanded.
            h += (&sv * sv.transpose()) * (rho * rho * yhy + rho);
            h -= (&hy * sv.transpose() + &sv * hy.transpose()) * rho;
        }
        first = false;
        x = step(&x, &p, next.alpha);
        f = next.f;
        g = next.g;
        converged = inf_norm(&g) <= opts.tol;
    }
    Ok(OptResult {
        grad_norm: inf_norm(&g),
        theta: x,
        energy: f,
        iterations,
        n_evals: evals,
        converged,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Analytic gradient of an ansatz at `theta` via the evaluator's backend.
pub fn gradient(ev: &Evaluator, theta: &[f64]) -> Result<Vec<f64>> {
    ev.energy_and_gradient(theta).map(|(_, g)| g)
}

/// Inclusive arithmetic grid; values are rounded to 1e-9 so that decimal
/// steps produce clean couplings.
pub fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::validation("grid.step", "must be a positive number"));
    }
    if !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(Error::validation("grid.stop", "must be a finite value not below grid.start"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 100_000 {
        return Err(Error::validation("grid.step", "grid has too many points"));
    }
    Ok((0..count)
        .map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub model: ModelKind,
    pub size: usize,
    pub depth: usize,
    pub coupling: f64,
    pub backend: Backend,
    pub result: OptResult,
    /// Set when the point failed outright; `result` then holds the start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub backend: Backend,
    pub warm_start: bool,
    pub seed: u64,
    pub bfgs: BfgsOptions,
    /// Amplitude of the seeded perturbation tried when a start point is
    /// stationary.
    pub jitter: f64,
    /// Also sweep backwards from the model's far-end start point and keep
    /// the lower energy per coupling.
    pub bidirectional: bool,
}

impl SweepOptions {
    pub fn new(backend: Backend) -> Self {
        SweepOptions {
            backend,
            warm_start: true,
            seed: 0,
            bfgs: BfgsOptions::default(),
            jitter: 0.05,
            bidirectional: true,
        }
    }
}

/// Parameters of a shallower optimum placed into a deeper circuit by name;
/// parameters of the extra layers start at zero, which makes them identity.
pub fn embed_parameters(from_names: &[String], from: &[f64], to_names: &[String]) -> Vec<f64> {
    to_names
        .iter()
        .map(|name| from_names.iter().position(|n| n == name).map_or(0.0, |k| from[k]))
        .collect()
}

fn optimize_point(
    spec: &ModelSpec,
    coupling: f64,
    starts: &[Vec<f64>],
    opts: &SweepOptions,
    point_seed: u64,
) -> Result<OptResult> {
    let circuit = spec.ansatz(coupling)?;
    let h = spec.hamiltonian(coupling)?;
    let ev = Evaluator::new(opts.backend, &circuit, &h)?;
    let objective = |x: &[f64]| ev.energy_and_gradient(x);
    let mut best_start = starts[0].clone();
    let mut best_e = f64::INFINITY;
    let mut start_grad = f64::INFINITY;
    for s in starts {
        let (e, g) = ev.energy_and_gradient(s)?;
        if e < best_e {
            best_e = e;
            best_start = s.clone();
            start_grad = inf_norm(&g);
        }
    }
    let mut best = bfgs_minimize(objective, &best_start, &opts.bfgs)?;
    if start_grad <= opts.bfgs.tol && opts.jitter > 0.0 {
        // A stationary start may be a saddle; try a perturbed copy.
        let mut rng = ChaCha8Rng::seed_from_u64(point_seed);
        let kicked: Vec<f64> = best_start
            .iter()
            .map(|t| t + opts.jitter * rng.random_range(-1.0..1.0))
            .collect();
        let alt = bfgs_minimize(objective, &kicked, &opts.bfgs)?;
        if alt.energy < best.energy {
            let wall = best.wall_time + alt.wall_time;
            best = OptResult { wall_time: wall, ..alt };
        }
    }
    Ok(best)
}

fn point_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64 + 1)
}

/// Optimizes every grid point. With `warm_start` the points run in order
/// and each starts from its predecessor's optimum; otherwise they run in
/// parallel from zeros. A warm sweep may also run backwards from the
/// model's far-end start and keep the better branch, which matters when the
/// forward continuation stays trapped in the phase it started in. `seed_from` supplies optima of a shallower circuit
/// at the same couplings, embedded as an extra candidate start; the lower
/// energy candidate is used, so energies cannot increase with depth.
pub fn sweep(
    spec: &ModelSpec,
    couplings: &[f64],
    opts: &SweepOptions,
    seed_from: Option<&[SweepRecord]>,
) -> Result<Vec<SweepRecord>> {
    if couplings.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    if couplings.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("grid must be strictly increasing".into()));
    }
    if let Some(prev) = seed_from {
        if prev.len() != couplings.len() || prev.iter().zip(couplings).any(|(r, c)| r.coupling != *c) {
            return Err(Error::InvalidArgument("seed records do not match the grid".into()));
        }
    }
    let names = spec.ansatz(couplings[0])?.param_names().to_vec();
    let lower_names = match seed_from {
        Some(prev) => Some(spec.with_depth(prev[0].depth).ansatz(couplings[0])?.param_names().to_vec()),
        None => None,
    };
    let embedded = |k: usize| -> Option<Vec<f64>> {
        let prev = seed_from?;
        Some(embed_parameters(lower_names.as_ref()?, &prev[k].result.theta, &names))
    };
    let record = |k: usize, res: Result<OptResult>, fallback: &[f64]| SweepRecord {
        model: spec.kind,
        size: spec.size,
        depth: spec.depth,
        coupling: couplings[k],
        backend: opts.backend,
        error: res.as_ref().err().map(|e| e.to_string()),
        result: res.unwrap_or_else(|_| OptResult {
            theta: fallback.to_vec(),
            energy: f64::NAN,
            grad_norm: f64::NAN,
            iterations: 0,
            n_evals: 0,
            converged: false,
            wall_time: 0.0,
        }),
    };
    let zeros = vec![0.0; names.len()];
    if !opts.warm_start {
        return Ok(couplings
            .par_iter()
            .enumerate()
            .map(|(k, &c)| {
                let mut starts = vec![zeros.clone()];
                starts.extend(embedded(k));
                let res = optimize_point(spec, c, &starts, opts, point_seed(opts.seed, k));
                record(k, res, &zeros)
            })
            .collect());
    }
    let chain = |order: Vec<usize>, first: Vec<f64>, salt: u64| -> Vec<Result<OptResult>> {
        let mut out: Vec<Option<Result<OptResult>>> = (0..couplings.len()).map(|_| None).collect();
        let mut warm = first;
        for k in order {
            let mut starts = vec![warm.clone()];
            starts.extend(embedded(k));
            let res = optimize_point(spec, couplings[k], &starts, opts, point_seed(opts.seed ^ salt, k));
            if let Ok(r) = &res {
                warm = r.theta.clone();
            }
            out[k] = Some(res);
        }
        out.into_iter().map(|r| r.expect("every point visited")).collect()
    };
    let mut results = chain((0..couplings.len()).collect(), zeros.clone(), 0);
    if opts.bidirectional {
        if let Some(far) = spec.far_end_start()? {
            let back = chain((0..couplings.len()).rev().collect(), far, 0xBAC4);
            for (fwd, bwd) in results.iter_mut().zip(back) {
                let better = match (&*fwd, &bwd) {
                    (Ok(f), Ok(b)) => b.energy < f.energy,
                    (Err(_), Ok(_)) => true,
                    _ => false,
                };
                if better {
                    *fwd = bwd;
                }
            }
        }
    }
    Ok(results
        .into_iter()
        .enumerate()
        .map(|(k, res)| record(k, res, &zeros))
        .collect())
}
