//! Hamiltonian flow by the implicit midpoint rule and an empirical probe of
//! stability relative to `K`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symmetry::Subalgebra;
use crate::system::HamiltonianSystem;

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-12;
const ORBIT_STARTS: usize = 32;

/// `X_h = (Omega^T)^{-1} dh`, so that `w(X_h, v) = dh . v`.
pub fn hamiltonian_vector_field(sys: &HamiltonianSystem, x: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(sys.space().poisson() * sys.hamiltonian().gradient(x)?)
}

/// One implicit midpoint step `y = x + dt X_h((x + y) / 2)`, solved by Newton
/// iteration with the exact Hessian.
pub fn midpoint_step(sys: &HamiltonianSystem, x: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
    let n = x.len();
    let poisson = sys.space().poisson();
    let h = sys.hamiltonian();
    let mut y = x + hamiltonian_vector_field(sys, x)? * dt;
    let tol = NEWTON_TOL * (1.0 + x.amax());
    let mut residual = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let mid = (x + &y) * 0.5;
        let f = &y - x - poisson * h.gradient(&mid)? * dt;
        residual = f.amax();
        if !residual.is_finite() {
            break;
        }
        if residual <= tol {
            return Ok(y);
        }
        let jac = DMatrix::identity(n, n) - poisson * h.hessian(&mid)? * (0.5 * dt);
        match jac.lu().solve(&f) {
            Some(delta) => y -= delta,
            None => break,
        }
    }
    Err(Error::SolverDiverged { residual })
}

/// False for NaN as well as for nonpositive values.
fn positive(x: f64) -> bool {
    x > 0.0
}

/// Trajectory `x0, x1, ..., x_steps`.
pub fn integrate(
    sys: &HamiltonianSystem,
    x0: &DVector<f64>,
    dt: f64,
    steps: usize,
) -> Result<Vec<DVector<f64>>> {
    if !positive(dt) || steps == 0 {
        return Err(Error::PreconditionViolated(
            "integrate needs dt > 0 and steps >= 1".into(),
        ));
    }
    let mut traj = Vec::with_capacity(steps + 1);
    traj.push(x0.clone());
    for _ in 0..steps {
        let next = midpoint_step(sys, traj.last().expect("nonempty"), dt)?;
        traj.push(next);
    }
    Ok(traj)
}

/// Nelder-Mead minimization; returns the best point and value.
fn nelder_mead<F: Fn(&DVector<f64>) -> f64>(
    f: F,
    start: &DVector<f64>,
    step: f64,
    max_evals: usize,
) -> (DVector<f64>, f64) {
    let m = start.len();
    let mut simplex: Vec<(DVector<f64>, f64)> = Vec::with_capacity(m + 1);
    simplex.push((start.clone(), f(start)));
    for i in 0..m {
        let mut p = start.clone();
        p[i] += step;
        let v = f(&p);
        simplex.push((p, v));
    }
    let mut evals = m + 1;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[m].1;
        let diameter = simplex
            .iter()
            .skip(1)
            .map(|(p, _)| (p - &simplex[0].0).amax())
            .fold(0.0_f64, f64::max);
        if (worst - best).abs() <= 1e-15 * (1.0 + best.abs()) && diameter <= 1e-11 {
            break;
        }
        let centroid = simplex[..m]
            .iter()
            .fold(DVector::zeros(m), |acc, (p, _)| acc + p)
            / m as f64;
        let reflect = &centroid + (&centroid - &simplex[m].0);
        let fr = f(&reflect);
        evals += 1;
        if fr < simplex[0].1 {
            let expand = &centroid + (&reflect - &centroid) * 2.0;
            let fe = f(&expand);
            evals += 1;
            simplex[m] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[m - 1].1 {
            simplex[m] = (reflect, fr);
        } else {
            let (towards, ft) = if fr < simplex[m].1 {
                (reflect.clone(), fr)
            } else {
                (simplex[m].0.clone(), simplex[m].1)
            };
            let contract = &centroid + (&towards - &centroid) * 0.5;
            let fc = f(&contract);
            evals += 1;
            if fc < ft {
                simplex[m] = (contract, fc);
            } else {
                let best_p = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let p = &best_p + (&entry.0 - &best_p) * 0.5;
                    let v = f(&p);
                    *entry = (p, v);
                }
                evals += m;
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Distance from points to the orbit `exp(k) . p`, minimized over
/// exponential coordinates.
pub struct OrbitDistance<'a> {
    sys: &'a HamiltonianSystem,
    p: DVector<f64>,
    generators: Vec<DMatrix<f64>>,
    fixed: bool,
    bound: f64,
}

impl<'a> OrbitDistance<'a> {
    pub fn new(sys: &'a HamiltonianSystem, p: &DVector<f64>, k: &Subalgebra) -> Result<Self> {
        let generators = k
            .vectors()
            .iter()
            .map(|kappa| sys.algebra().matrix(kappa))
            .collect::<Result<Vec<_>>>()?;
        let fixed = generators
            .iter()
            .all(|a| (a * p).amax() <= 1e-14 * (1.0 + p.amax()));
        // Half the longest period among the basis one-parameter subgroups.
        let mut slowest = f64::INFINITY;
        for a in &generators {
            for ev in a.complex_eigenvalues().iter() {
                let w = ev.im.abs();
                if w > 1e-9 {
                    slowest = slowest.min(w);
                }
            }
        }
        let bound = if slowest.is_finite() {
            (std::f64::consts::PI / slowest).clamp(std::f64::consts::PI, 1e3)
        } else {
            std::f64::consts::PI
        };
        Ok(Self {
            sys,
            p: p.clone(),
            generators,
            fixed,
            bound,
        })
    }

    fn dist_at(&self, x: &DVector<f64>, t: &DVector<f64>) -> f64 {
        let n = self.p.len();
        let mut a = DMatrix::zeros(n, n);
        for (g, &c) in self.generators.iter().zip(t.iter()) {
            a += g * c;
        }
        self.sys.space().norm(&(x - a.exp() * &self.p))
    }

    /// Local refinement from `start`; returns `(distance, coordinates)`.
    pub fn local(&self, x: &DVector<f64>, start: &DVector<f64>) -> (f64, DVector<f64>) {
        let m = self.generators.len();
        if self.fixed || m == 0 {
            return (self.sys.space().norm(&(x - &self.p)), DVector::zeros(m));
        }
        let (t, v) = nelder_mead(|t| self.dist_at(x, t), start, 0.25, 300 * (m + 1));
        (v, t)
    }

    /// Multi-start minimization: the identity, `extra`, and 32 random starts.
    pub fn global<R: Rng>(
        &self,
        x: &DVector<f64>,
        extra: Option<&DVector<f64>>,
        rng: &mut R,
    ) -> (f64, DVector<f64>) {
        let m = self.generators.len();
        let identity = self.local(x, &DVector::zeros(m));
        if self.fixed || m == 0 {
            return identity;
        }
        let mut best = identity;
        let mut starts: Vec<DVector<f64>> = extra.into_iter().cloned().collect();
        for _ in 0..ORBIT_STARTS {
            starts.push(DVector::from_fn(m, |_, _| rng.random_range(-self.bound..=self.bound)));
        }
        for s in starts {
            let cand = self.local(x, &s);
            if cand.0 < best.0 {
                best = cand;
            }
        }
        best
    }

    pub fn is_trivial(&self) -> bool {
        self.fixed || self.generators.is_empty()
    }
}

/// `min_g |x - g p|` over `g` in the group generated by `k`.
pub fn orbit_distance(
    sys: &HamiltonianSystem,
    x: &DVector<f64>,
    p: &DVector<f64>,
    k: &Subalgebra,
    seed: u64,
) -> Result<f64> {
    let od = OrbitDistance::new(sys, p, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(od.global(x, None, &mut rng).0)
}

#[derive(Debug, Clone)]
pub struct ProbeOptions {
    pub epsilon: f64,
    pub horizon: f64,
    pub samples: usize,
    pub dt: f64,
    pub escape_factor: f64,
    pub seed: u64,
    /// Keep a trace of the first sample for CSV export.
    pub record_trace: bool,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            horizon: 100.0,
            samples: 16,
            dt: 1e-2,
            escape_factor: 100.0,
            seed: 42,
            record_trace: false,
        }
    }
}

/// One row of the optional trajectory dump.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub t: f64,
    pub x: DVector<f64>,
    pub energy: f64,
    pub momentum: DVector<f64>,
    pub orbit_distance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProbeReport {
    pub epsilon: f64,
    pub horizon: f64,
    pub samples: usize,
    pub max_orbit_distance: f64,
    pub energy_drift: f64,
    pub momentum_drift: f64,
    pub escaped: bool,
    /// Samples whose implicit solve failed; these count as escapes.
    pub diverged_samples: usize,
    #[serde(skip)]
    pub trace: Option<Vec<TraceRow>>,
}

struct SampleResult {
    max_dist: f64,
    energy_drift: f64,
    momentum_drift: f64,
    diverged: bool,
    trace: Option<Vec<TraceRow>>,
}

fn run_sample(
    sys: &HamiltonianSystem,
    od: &OrbitDistance<'_>,
    x0: DVector<f64>,
    opts: &ProbeOptions,
    seed: u64,
    record: bool,
) -> Result<SampleResult> {
    let steps = (opts.horizon / opts.dt).ceil().max(1.0) as usize;
    let stride = if od.is_trivial() { 1 } else { (steps / 256).max(1) };
    let escape_at = opts.escape_factor * opts.epsilon;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = sys.hamiltonian();
    let momentum = sys.momentum();
    let e0 = h.eval(&x0)?;
    let j0 = momentum.value(&x0)?.0;

    let mut x = x0;
    let mut energy_drift = 0.0_f64;
    let mut momentum_drift = 0.0_f64;
    let mut diverged = false;
    let mut trace = record.then(Vec::new);
    // (warm distance, state, refined?)
    let mut checks: Vec<(f64, DVector<f64>)> = Vec::new();
    let (d0, mut warm) = od.global(&x, None, &mut rng);
    checks.push((d0, x.clone()));
    if let Some(tr) = trace.as_mut() {
        tr.push(TraceRow { t: 0.0, x: x.clone(), energy: e0, momentum: j0.clone(), orbit_distance: d0 });
    }

    for step in 1..=steps {
        x = match midpoint_step(sys, &x, opts.dt) {
            Ok(y) => y,
            Err(Error::SolverDiverged { .. }) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let e = h.eval(&x)?;
        let j = momentum.value(&x)?.0;
        energy_drift = energy_drift.max((e - e0).abs());
        momentum_drift = momentum_drift.max((&j - &j0).norm());
        if step % stride == 0 || step == steps {
            let (dw, tw) = {
                let a = od.local(&x, &warm);
                let b = od.local(&x, &DVector::zeros(warm.len()));
                if a.0 <= b.0 { a } else { b }
            };
            warm = tw;
            let mut dist = dw;
            if dist > escape_at {
                let (full, tf) = od.global(&x, Some(&warm), &mut rng);
                dist = dist.min(full);
                warm = tf;
            }
            checks.push((dist, x.clone()));
            if let Some(tr) = trace.as_mut() {
                tr.push(TraceRow {
                    t: step as f64 * opts.dt,
                    x: x.clone(),
                    energy: e,
                    momentum: j.clone(),
                    orbit_distance: dist,
                });
            }
            if dist > escape_at {
                break;
            }
        }
    }

    // Warm-started distances only overestimate; refine the largest until the
    // refined maximum dominates every unrefined value.
    checks.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut refined_max = 0.0_f64;
    for (warm_d, state) in &checks {
        if *warm_d <= refined_max {
            break;
        }
        let (full, _) = od.global(state, None, &mut rng);
        refined_max = refined_max.max(full.min(*warm_d));
    }

    Ok(SampleResult {
        max_dist: refined_max,
        energy_drift,
        momentum_drift,
        diverged,
        trace,
    })
}

/// Integrates `samples` trajectories from uniform random points of the metric
/// `epsilon`-ball around `p` and records the largest distance to `K . p`.
pub fn stability_probe(
    sys: &HamiltonianSystem,
    p: &DVector<f64>,
    k: &Subalgebra,
    opts: &ProbeOptions,
) -> Result<ProbeReport> {
    if !positive(opts.epsilon) || !positive(opts.dt) || !positive(opts.horizon) {
        return Err(Error::PreconditionViolated(
            "probe needs epsilon, dt and horizon > 0".into(),
        ));
    }
    let od = OrbitDistance::new(sys, p, k)?;
    let n = p.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts: Vec<(DVector<f64>, u64)> = (0..opts.samples)
        .map(|_| {
            let dir = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let radius = opts.epsilon * rng.random::<f64>().powf(1.0 / n as f64);
            let w = dir.normalize() * radius;
            let offset = sys.space().unwhiten(&DMatrix::from_column_slice(n, 1, w.as_slice()));
            (p + offset.column(0), rng.random::<u64>())
        })
        .collect();
    let results = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, (x0, seed))| run_sample(sys, &od, x0, opts, seed, opts.record_trace && i == 0))
        .collect::<Result<Vec<_>>>()?;

    let mut report = ProbeReport {
        epsilon: opts.epsilon,
        horizon: opts.horizon,
        samples: opts.samples,
        max_orbit_distance: 0.0,
        energy_drift: 0.0,
        momentum_drift: 0.0,
        escaped: false,
        diverged_samples: 0,
        trace: None,
    };
    for r in results {
        report.max_orbit_distance = report.max_orbit_distance.max(r.max_dist);
        report.energy_drift = report.energy_drift.max(r.energy_drift);
        report.momentum_drift = report.momentum_drift.max(r.momentum_drift);
        report.diverged_samples += usize::from(r.diverged);
        if r.trace.is_some() {
            report.trace = r.trace;
        }
    }
    report.escaped = report.diverged_samples > 0
        || report.max_orbit_distance > opts.escape_factor * opts.epsilon;
    Ok(report)
}
