//! End-to-end acceptance checks. Run with `cargo test --test acceptance`;
//! prints one PASS/FAIL line per criterion. Set `ACCEPTANCE_STRICT=1` to
//! exit non-zero when any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use covqe::circuit::{Circuit, CircuitBuilder, Clifford, Prep};
use covqe::cli::{cluster_csvs, energy_csv, measure_csv, run_optimize, sweep_jsonl, Observable, RunConfig, RunManifest};
use covqe::ed::ground_state;
use covqe::evaluator::{
    expval_cone, expval_full, expval_heisenberg, measure_pauli_sampled, parameter_shift_gradient, Backend, ConePlan,
    Evaluator, DEFAULT_CONE_CAP,
};
use covqe::lightcone::cone_profile;
use covqe::models::{toric_hamiltonian, toric_hva, ModelKind, ModelSpec, ToricLattice};
use covqe::optimizer::{bfgs_minimize, grid, sweep, BfgsOptions, SweepOptions, SweepRecord};
use covqe::pauli::{Letter, PauliString, PauliSum};
use covqe::phase::{fidelity_matrix, order_parameter_curve, spectral_cluster};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Tolerances and budgets, all fixed here.
const BACKEND_TOL: f64 = 1e-10;
const FD_STEP: f64 = 1e-5;
const GRADIENT_TOL: f64 = 1e-6;
const VARIATIONAL_SLACK: f64 = 1e-9;
const ENERGY_REL_TOL: f64 = 0.02;
const OMEGA_AT_ZERO_MIN: f64 = 0.999;
const OMEGA_AT_TWO_MAX: f64 = 0.1;
const CROSSING_WINDOW: (f64, f64) = (0.8, 1.2);
const DEPTH_MONOTONE_SLACK: f64 = 1e-9;
const WILSON_AT_ZERO_TOL: f64 = 1e-9;
const WILSON_STEP_TOL: f64 = 1e-3;
const ENDPOINT_TOL: f64 = 1e-12;
const STOP_GRADIENT: f64 = 1e-6;
const CONE_LIMIT: usize = 26;
const SHOT_SEEDS: u64 = 50;
const SHOTS: u64 = 10_000;
const SPREAD_REL_TOL: f64 = 0.2;
const MEAN_SIGMAS: f64 = 5.0;

const BUDGET_BACKENDS: Duration = Duration::from_secs(120);
const BUDGET_GRADIENTS: Duration = Duration::from_secs(120);
const BUDGET_CLUSTER: Duration = Duration::from_secs(20 * 60);
const BUDGET_CLASSIFY: Duration = Duration::from_secs(60);
const BUDGET_TORIC: Duration = Duration::from_secs(15 * 60);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Check = Result<Outcome, String>;

fn report(id: &str, title: &str, results: &mut Vec<bool>, run: impl FnOnce() -> Check) {
    let start = Instant::now();
    let res = run();
    let secs = start.elapsed().as_secs_f64();
    let (pass, detail) = match res {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!("criterion {id} {}: {title} [{secs:.1} s] {detail}", if pass { "PASS" } else { "FAIL" });
    results.push(pass);
}

fn within_budget(start: Instant, budget: Duration) -> (bool, String) {
    let t = start.elapsed();
    (t <= budget, format!("runtime {:.1} s of {} s", t.as_secs_f64(), budget.as_secs()))
}

fn e<T: std::fmt::Display>(x: T) -> String {
    x.to_string()
}

fn random_local(rng: &mut ChaCha8Rng, n: usize, max_weight: usize) -> PauliString {
    let weight = rng.random_range(1..=max_weight.min(n));
    let span = (weight + 1).min(n);
    let origin = rng.random_range(0..=n - span);
    let mut sites: Vec<usize> = (origin..origin + span).collect();
    while sites.len() > weight {
        sites.remove(rng.random_range(0..sites.len()));
    }
    let letters = [Letter::X, Letter::Y, Letter::Z];
    PauliString::from_letters(n, sites.into_iter().map(|q| (q, letters[rng.random_range(0..3)]))).unwrap()
}

/// Brickwork circuit: a random Clifford preparation, then `depth` layers of
/// two-site rotations about random axes mixed with random Cliffords.
fn random_brickwork(rng: &mut ChaCha8Rng, n: usize, depth: usize, n_params: usize) -> Circuit {
    let mut b = CircuitBuilder::new(n);
    let params: Vec<usize> = (0..n_params).map(|k| b.param(format!("p{k}"))).collect();
    let mut prefix = 0;
    for q in 0..n {
        if rng.random_bool(0.7) {
            b.clifford(Clifford::H(q));
            prefix += 1;
        }
    }
    for q in 0..n.saturating_sub(1) {
        if rng.random_bool(0.5) {
            b.clifford(Clifford::Cz(q, q + 1));
            prefix += 1;
        }
    }
    let letters = [Letter::X, Letter::Y, Letter::Z];
    for layer in 0..depth {
        let mut i = layer % 2;
        while i + 1 < n {
            if rng.random_bool(0.3) {
                let c = match rng.random_range(0..4) {
                    0 => Clifford::H(i),
                    1 => Clifford::S(i + 1),
                    2 => Clifford::Cnot(i, i + 1),
                    _ => Clifford::Cz(i, i + 1),
                };
                b.clifford(c);
            }
            let axis = PauliString::from_letters(
                n,
                [(i, letters[rng.random_range(0..3)]), (i + 1, letters[rng.random_range(0..3)])],
            )
            .unwrap();
            b.rotation(axis, params[rng.random_range(0..n_params)], rng.random_range(-2.0..2.0));
            if rng.random_bool(0.5) {
                let single = PauliString::from_letters(n, [(i, letters[rng.random_range(0..3)])]).unwrap();
                b.rotation(single, params[rng.random_range(0..n_params)], 1.0);
            }
            i += 2;
        }
    }
    b.build(Prep::InCircuit { prefix }, depth).unwrap()
}

fn random_theta(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(-PI..PI)).collect()
}

fn criterion_backends() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(2..=12);
        let depth = rng.random_range(1..=6);
        let c = random_brickwork(&mut rng, n, depth, 4);
        let terms: Vec<(f64, PauliString)> =
            (0..4).map(|_| (rng.random_range(-1.0..1.0), random_local(&mut rng, n, 3))).collect();
        let h = PauliSum::from_terms(n, terms).map_err(e)?;
        let bound = c.bind(&random_theta(&mut rng, 4)).map_err(e)?;
        let full = expval_full(&bound, &h).map_err(e)?;
        worst = worst
            .max((expval_cone(&bound, &h).map_err(e)? - full).abs())
            .max((expval_heisenberg(&bound, &h).map_err(e)? - full).abs());
    }
    let (fast, time) = within_budget(start, BUDGET_BACKENDS);
    Ok(outcome(
        worst <= BACKEND_TOL && fast,
        format!("200 instances, max |cone or heisenberg - full| = {worst:.2e} (tol {BACKEND_TOL:.0e}); {time}"),
    ))
}

fn criterion_gradients() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let spec = if case % 2 == 0 {
            ModelSpec::new(ModelKind::Cluster, rng.random_range(4..=8), rng.random_range(1..=3))
        } else {
            ModelSpec::new(ModelKind::Toric, 2, rng.random_range(1..=3))
        }
        .map_err(e)?;
        let coupling = rng.random_range(0.0..2.0);
        let c = spec.ansatz(coupling).map_err(e)?;
        let h = spec.hamiltonian(coupling).map_err(e)?;
        let theta = random_theta(&mut rng, c.n_params());
        let shift = parameter_shift_gradient(Backend::Full, &c, &h, &theta).map_err(e)?;
        let ev = Evaluator::new(Backend::Full, &c, &h).map_err(e)?;
        for (k, g) in shift.iter().enumerate() {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[k] += FD_STEP;
            minus[k] -= FD_STEP;
            let fd = (ev.energy(&plus).map_err(e)? - ev.energy(&minus).map_err(e)?) / (2.0 * FD_STEP);
            worst = worst.max((fd - g).abs());
        }
    }
    let (fast, time) = within_budget(start, BUDGET_GRADIENTS);
    Ok(outcome(
        worst <= GRADIENT_TOL && fast,
        format!("50 instances, max |shift - central difference| = {worst:.2e} (tol {GRADIENT_TOL:.0e}); {time}"),
    ))
}

struct ClusterRun {
    records: Vec<SweepRecord>,
    spec: ModelSpec,
}

/// First downward crossing of 0.5, linearly interpolated.
fn half_crossing(curve: &[(f64, f64)]) -> Option<f64> {
    curve.windows(2).find(|w| w[0].1 >= 0.5 && w[1].1 < 0.5).map(|w| {
        let t = (w[0].1 - 0.5) / (w[0].1 - w[1].1);
        w[0].0 + t * (w[1].0 - w[0].0)
    })
}

fn cluster_reproduction(run: &mut Option<ClusterRun>) -> Check {
    let start = Instant::now();
    let spec = ModelSpec::new(ModelKind::Cluster, 16, 4).map_err(e)?;
    let couplings = grid(0.0, 2.0, 0.1).map_err(e)?;
    let records = sweep(&spec, &couplings, &SweepOptions::new(Backend::Cone), None).map_err(e)?;
    if let Some(bad) = records.iter().find_map(|r| r.error.clone()) {
        return Err(bad);
    }
    let mut below = Vec::new();
    let mut worst = (0.0, 0.0);
    let mut outside = Vec::new();
    let op = spec.order_parameter().map_err(e)?;
    let mut ed_omega = Vec::new();
    for r in &records {
        let exact = ground_state(&spec.hamiltonian(r.coupling).map_err(e)?, true).map_err(e)?;
        let ed = exact.e0;
        let vector = exact.ground_vector.ok_or("no ground vector")?;
        ed_omega.push((r.coupling, vector.expectation_pauli(&op).map_err(e)?.re));
        let rel = (r.result.energy - ed) / ed.abs();
        if r.result.energy < ed - VARIATIONAL_SLACK {
            below.push(r.coupling);
        }
        if rel > ENERGY_REL_TOL {
            outside.push(format!("J={} {:.2}%", r.coupling, 100.0 * rel));
        }
        if rel > worst.1 {
            worst = (r.coupling, rel);
        }
    }
    let omega = order_parameter_curve(&records, &op, None, 0).map_err(e)?;
    let first = omega[0].value;
    let last = omega[omega.len() - 1].value;
    let curve: Vec<(f64, f64)> = omega.iter().map(|p| (p.coupling, p.value)).collect();
    let crossing = half_crossing(&curve);
    let ed_crossing = half_crossing(&ed_omega);
    let crosses = crossing.is_some_and(|j| j > CROSSING_WINDOW.0 && j < CROSSING_WINDOW.1);
    let part_a = below.is_empty() && outside.is_empty();
    let part_b = first >= OMEGA_AT_ZERO_MIN && last <= OMEGA_AT_TWO_MAX && crosses;
    let (fast, time) = within_budget(start, BUDGET_CLUSTER);
    let detail = format!(
        "(a) {}: below ED at {:?}, worst relative error {:.2}% at J={}, above {}%: [{}]; \
         (b) {}: Omega(0)={first:.6}, Omega(2)={last:.4}, crossing at J={} (exact ground state: {}); {time}",
        if part_a { "ok" } else { "violated" },
        below,
        100.0 * worst.1,
        worst.0,
        100.0 * ENERGY_REL_TOL,
        outside.join(", "),
        if part_b { "ok" } else { "violated" },
        crossing.map_or("none".into(), |j| format!("{j:.3}")),
        ed_crossing.map_or("none".into(), |j| format!("{j:.3}")),
    );
    *run = Some(ClusterRun { records, spec });
    Ok(outcome(part_a && part_b && fast, detail))
}

fn criterion_classification(run: &Option<ClusterRun>) -> Check {
    let run = run.as_ref().ok_or("no cluster sweep available")?;
    let start = Instant::now();
    let f = fidelity_matrix(&run.records).map_err(e)?;
    let labels = spectral_cluster(&f, 2, 0).map_err(e)?;
    let expected: Vec<u8> = run.records.iter().map(|r| u8::from(r.coupling <= 0.9 + 1e-9)).collect();
    let (fast, time) = within_budget(start, BUDGET_CLASSIFY);
    let boundary = labels.labels.windows(2).position(|w| w[0] != w[1]).map(|k| run.records[k].coupling);
    Ok(outcome(
        labels.labels == expected && fast,
        format!(
            "labels {:?}, last point of first phase {:?} (expected 0.9); {time}",
            labels.labels, boundary
        ),
    ))
}

fn criterion_toric() -> Check {
    let start = Instant::now();
    let couplings = grid(0.0, 0.5, 0.05).map_err(e)?;
    let base = ModelSpec::new(ModelKind::Toric, 3, 1).map_err(e)?;
    let opts = SweepOptions::new(Backend::Full);
    let mut by_depth: Vec<Vec<SweepRecord>> = Vec::new();
    for d in [1, 3, 5] {
        let recs = sweep(&base.with_depth(d), &couplings, &opts, by_depth.last().map(Vec::as_slice)).map_err(e)?;
        if let Some(bad) = recs.iter().find_map(|r| r.error.clone()) {
            return Err(bad);
        }
        by_depth.push(recs);
    }
    let mut monotone = true;
    for pair in by_depth.windows(2) {
        for (lo, hi) in pair[0].iter().zip(&pair[1]) {
            monotone &= hi.result.energy <= lo.result.energy + DEPTH_MONOTONE_SLACK;
        }
    }
    let deepest = &by_depth[2];
    let mut worst: f64 = 0.0;
    let mut variational = true;
    for r in deepest {
        let ed = ground_state(&base.hamiltonian(r.coupling).map_err(e)?, false).map_err(e)?.e0;
        worst = worst.max((r.result.energy - ed) / ed.abs());
        variational &= r.result.energy >= ed - VARIATIONAL_SLACK;
    }
    let w = order_parameter_curve(deepest, &base.order_parameter().map_err(e)?, None, 0).map_err(e)?;
    let w0_ok = (w[0].value - 1.0).abs() <= WILSON_AT_ZERO_TOL;
    let w_monotone = w.windows(2).all(|p| p[1].value <= p[0].value + WILSON_STEP_TOL);
    let (fast, time) = within_budget(start, BUDGET_TORIC);
    let values: Vec<String> = w.iter().map(|p| format!("{:.3}", p.value)).collect();
    Ok(outcome(
        monotone && worst <= ENERGY_REL_TOL && variational && w0_ok && w_monotone && fast,
        format!(
            "E non-increasing in D: {monotone}; D=5 worst relative error {:.3}% (variational: {variational}); \
             W(0)-1 = {:.1e}; W = [{}] non-increasing: {w_monotone}; {time}",
            100.0 * worst,
            w[0].value - 1.0,
            values.join(" ")
        ),
    ))
}

fn criterion_endpoints() -> Check {
    let mut notes = Vec::new();
    let mut pass = true;
    let cases = [
        (ModelSpec::new(ModelKind::Cluster, 16, 4).map_err(e)?, Backend::Cone, -14.0),
        (ModelSpec::new(ModelKind::Toric, 2, 2).map_err(e)?, Backend::Heisenberg, -4.0),
        (ModelSpec::new(ModelKind::Toric, 3, 2).map_err(e)?, Backend::Heisenberg, -12.0),
    ];
    for (spec, backend, exact) in cases {
        let c = spec.ansatz(0.0).map_err(e)?;
        let ev = Evaluator::new(backend, &c, &spec.hamiltonian(0.0).map_err(e)?).map_err(e)?;
        let zeros = vec![0.0; c.n_params()];
        let energy = ev.energy(&zeros).map_err(e)?;
        let full = expval_full(&c.bind(&zeros).map_err(e)?, &spec.hamiltonian(0.0).map_err(e)?).map_err(e)?;
        let res = bfgs_minimize(|x| ev.energy_and_gradient(x), &zeros, &BfgsOptions::default()).map_err(e)?;
        let ok = (energy - exact).abs() <= ENDPOINT_TOL
            && (full - exact).abs() <= ENDPOINT_TOL
            && res.converged
            && res.grad_norm <= STOP_GRADIENT
            && (res.energy - exact).abs() <= ENDPOINT_TOL;
        pass &= ok;
        notes.push(format!(
            "{} size {}: E(0) = {energy} (exact {exact}), stop |g| = {:.1e} after {} iterations",
            spec.kind, spec.size, res.grad_norm, res.iterations
        ));
    }
    Ok(outcome(pass, notes.join("; ")))
}

fn criterion_cones() -> Check {
    let lat = ToricLattice::new(8).map_err(e)?;
    let h = toric_hamiltonian(&lat, 0.2).map_err(e)?;
    let mut pass = true;
    let mut notes = Vec::new();
    for d in 1..=3usize {
        let profile = cone_profile(&toric_hva(&lat, d, 0.2).map_err(e)?, &h, DEFAULT_CONE_CAP).map_err(e)?;
        let bound = 4 * (d + 1) * (d + 1);
        pass &= profile.m_max <= bound;
        notes.push(format!("toric L=8 D={d}: M_max {} <= {bound}", profile.m_max));
    }
    let chain = ModelSpec::new(ModelKind::Cluster, 100, 2).map_err(e)?;
    let c = chain.ansatz(1.0).map_err(e)?;
    let h = chain.hamiltonian(1.0).map_err(e)?;
    let plan = ConePlan::new(&c, &h, DEFAULT_CONE_CAP).map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let theta = random_theta(&mut rng, c.n_params());
    let (energy, grad) = Evaluator::new(Backend::Cone, &c, &h)
        .map_err(e)?
        .energy_and_gradient(&theta)
        .map_err(e)?;
    let finite = energy.is_finite() && grad.iter().all(|g| g.is_finite());
    pass &= plan.max_cone() < CONE_LIMIT && finite;
    notes.push(format!(
        "cluster N=100 d=2: peak subsystem {} qubits (< {CONE_LIMIT}), energy {energy:.6} and {} gradient entries evaluated",
        plan.max_cone(),
        grad.len()
    ));
    Ok(outcome(pass, notes.join("; ")))
}

fn criterion_shots(run: &Option<ClusterRun>) -> Check {
    let run = run.as_ref().ok_or("no cluster sweep available")?;
    let record = run
        .records
        .iter()
        .find(|r| (r.coupling - 0.5).abs() < 1e-9)
        .ok_or("no J = 0.5 record")?;
    let bound = run.spec.ansatz(record.coupling).map_err(e)?.bind(&record.result.theta).map_err(e)?;
    let omega = run.spec.order_parameter().map_err(e)?;
    let exact = covqe::evaluator::prepare_state(&bound, 26)
        .map_err(e)?
        .expectation_pauli(&omega)
        .map_err(e)?
        .re;
    let ests: Vec<_> = (0..SHOT_SEEDS)
        .map(|s| measure_pauli_sampled(&bound, &omega, SHOTS, s))
        .collect::<Result<_, _>>()
        .map_err(e)?;
    let k = ests.len() as f64;
    let mean = ests.iter().map(|x| x.mean).sum::<f64>() / k;
    let spread = (ests.iter().map(|x| (x.mean - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
    let reported = ests.iter().map(|x| x.std_error).sum::<f64>() / k;
    let ratio = spread / reported;
    let worst_sigma = ests
        .iter()
        .map(|x| (x.mean - exact).abs() / x.std_error)
        .fold(0.0, f64::max);
    Ok(outcome(
        (ratio - 1.0).abs() <= SPREAD_REL_TOL && worst_sigma <= MEAN_SIGMAS,
        format!(
            "Omega at J=0.5: exact {exact:.5}; empirical spread {spread:.5} vs reported {reported:.5} \
             (ratio {ratio:.3}); worst deviation {worst_sigma:.2} standard errors"
        ),
    ))
}

fn artifacts(m: &RunManifest) -> Result<Vec<(String, String)>, String> {
    let final_records = m.final_records();
    let mut out = vec![
        ("energy.csv".to_string(), energy_csv(&m.records)),
        ("sweep.jsonl".to_string(), sweep_jsonl(&m.records).map_err(e)?),
    ];
    let observable = match m.config.model {
        ModelKind::Cluster => Observable::Omega,
        ModelKind::Toric => Observable::Wilson,
    };
    out.push(("measure.csv".into(), measure_csv(m, &observable, m.config.shots, m.config.seed).map_err(e)?));
    if final_records.len() >= 2 {
        let (fid, labels) = cluster_csvs(m, m.config.shots, m.config.seed).map_err(e)?;
        out.push(("fidelity.csv".into(), fid));
        out.push(("labels.csv".into(), labels));
    }
    Ok(out)
}

fn criterion_determinism() -> Check {
    let configs = [
        "model = \"cluster\"\nsize = 8\ndepth = 2\nseed = 11\nshots = 2000\n[grid]\nstart = 0.0\nstop = 2.0\nstep = 0.5\n",
        "model = \"toric\"\nsize = 2\ndepth = 2\nseed = 5\nshots = 2000\n[grid]\nstart = 0.0\nstop = 0.5\nstep = 0.25\n\
         [optimizer]\nseed_depths = [1]\n",
    ];
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for text in configs {
        let cfg = RunConfig::from_toml(text).map_err(e)?;
        let first = run_optimize(&cfg).map_err(e)?;
        let first_files = artifacts(&first)?;
        // Round-trip through the manifest file format, then rerun from it.
        let reloaded: RunManifest =
            serde_json::from_str(&serde_json::to_string_pretty(&first).map_err(e)?).map_err(e)?;
        let remeasured = artifacts(&reloaded)?;
        let rerun = artifacts(&run_optimize(&reloaded.config).map_err(e)?)?;
        for (a, (b, c)) in first_files.iter().zip(remeasured.iter().zip(&rerun)) {
            compared += 1;
            if a.1 != b.1 || a.1 != c.1 {
                mismatches.push(format!("{} {}", cfg.model, a.0));
            }
        }
    }
    Ok(outcome(
        mismatches.is_empty(),
        format!("{compared} CSV/JSONL artifacts compared across reruns, mismatches: {mismatches:?}"),
    ))
}

fn main() -> ExitCode {
    let mut results = Vec::new();
    let mut cluster = None;
    report("1", "backend equivalence", &mut results, criterion_backends);
    report("2", "gradient correctness", &mut results, criterion_gradients);
    report("3", "cluster chain energies and order parameter", &mut results, || {
        cluster_reproduction(&mut cluster)
    });
    report("4", "spectral phase classification", &mut results, || criterion_classification(&cluster));
    report("5", "toric code at L=3", &mut results, criterion_toric);
    report("6", "exact end points", &mut results, criterion_endpoints);
    report("7", "cone bounds", &mut results, criterion_cones);
    report("8", "shot emulator statistics", &mut results, || criterion_shots(&cluster));
    report("9", "determinism", &mut results, criterion_determinism);
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed} of {} criteria passed", results.len());
    // Report mode by default so the remaining workspace tests still run;
    // ACCEPTANCE_STRICT=1 turns any FAIL into a failing exit status.
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if passed < results.len() && strict {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
