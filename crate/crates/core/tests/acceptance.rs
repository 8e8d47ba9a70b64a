//! Acceptance suite. Runs as a plain program (no libtest harness) so every
//! criterion prints exactly one PASS/FAIL line; exits nonzero if any fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use slicecert::certify::{self, Inertia, Verdict};
use slicecert::cli;
use slicecert::dynamics::{self, ProbeOptions};
use slicecert::gallery::{self, RandomSystem};
use slicecert::momentum::momentum_isotropy_algebra;
use slicecert::slice::{self, WittArtinFrame};
use slicecert::{AlgebraVector, HamiltonianSystem, Subalgebra};

const SYSTEMS: usize = 10;

type Outcome = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn gaussian_vec<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

/// Smallest eigenvalue, computed directly with nalgebra.
fn lambda_min(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

fn random_systems() -> Vec<RandomSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..SYSTEMS).map(|i| gallery::random_system(&mut rng, i)).collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let loaded = cli::load_system(&fixture("example1.json")).map_err(|e| e.to_string())?;
    let cert = cli::cmd_certify(&loaded, None, 42).map_err(|e| e.to_string())?;
    ensure(cert.verdict == Verdict::StableNegDef, || format!("verdict {:?}", cert.verdict))?;
    ensure((cert.xi_star[0] - 3.0).abs() <= 1e-4, || format!("xiStar {:?}", cert.xi_star))?;
    ensure((cert.margin - 1.0).abs() <= 1e-4, || format!("margin {}", cert.margin))?;

    // Oracle: on the slice R^4 the augmented Hessian is
    // diag(2 - xi, 2 - xi, xi - 4, xi - 4), negative definite iff 2 < xi < 4.
    let sys = &loaded.system;
    let p = &loaded.point;
    let frame = slice::witt_artin(sys, p).map_err(|e| e.to_string())?;
    let mut neg = Vec::new();
    for i in 0..=400 {
        let xi = 6.0 * i as f64 / 400.0;
        let h = certify::restricted_hessian(sys, p, &AlgebraVector::from_slice(&[xi]), &frame)
            .map_err(|e| e.to_string())?;
        let verdict = certify::definiteness(&h);
        let oracle = xi > 2.0 && xi < 4.0;
        let is_neg = verdict == Verdict::StableNegDef;
        if is_neg != oracle && (xi - 2.0).abs() > 0.015 && (xi - 4.0).abs() > 0.015 {
            return Err(format!("grid point xi = {xi}: verdict {verdict:?}"));
        }
        if is_neg {
            neg.push(xi);
        }
    }
    let lo = neg.first().copied().ok_or("no negative definite grid point")?;
    let hi = neg.last().copied().unwrap_or(lo);
    ensure((lo - 2.0).abs() <= 0.015 && (hi - 4.0).abs() <= 0.015, || {
        format!("negative definite over [{lo}, {hi}]")
    })?;
    within_time(start, Duration::from_secs(1))?;
    Ok(format!(
        "STABLE_NEG_DEF, grid interval [{lo:.3}, {hi:.3}], xiStar {:.6}, margin {:.6}",
        cert.xi_star[0], cert.margin
    ))
}

fn criterion_2() -> Outcome {
    let loaded = cli::load_system(&fixture("example1.json")).map_err(|e| e.to_string())?;
    let sys = &loaded.system;
    let p = &loaded.point;
    let family = certify::solve_velocities(sys, p).map_err(|e| e.to_string())?;
    let frame = slice::witt_artin(sys, p).map_err(|e| e.to_string())?;
    let xi_perp = certify::orthogonal_velocity(&family, &loaded.algebra_metric);
    ensure(xi_perp.0.amax() <= 1e-12, || format!("orthogonal velocity {:?}", xi_perp.to_vec()))?;
    let h = certify::restricted_hessian(sys, p, &xi_perp, &frame).map_err(|e| e.to_string())?;
    let inertia = certify::inertia(&h);
    ensure(inertia == Inertia(2, 2, 0), || format!("inertia {inertia:?}"))?;
    let verdict = certify::definiteness(&h);
    ensure(verdict == Verdict::Inconclusive, || format!("baseline verdict {verdict:?}"))?;
    Ok("xi_perp = 0, inertia (2, 2, 0), baseline not definite".into())
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let loaded = cli::load_system(&fixture("example1_offset.json")).map_err(|e| e.to_string())?;
    let sys = &loaded.system;
    let p = &loaded.point;
    // Hand computation at p = (1, 0, 0, 0), with J = (x1^2 + y1^2 - x2^2 - y2^2) / 2:
    //   dh(p) = (2, 0, 0, 0) and dJ(p) = (1, 0, 0, 0), so xi = 2;
    //   A p = (0, -1, 0, 0) is not zero, so h = 0 and the family is {2};
    //   ker dJ(p) = {v1 = 0}, T0 = span(e2), slice N = span(e3, e4);
    //   d2h = diag(2, 2, -4, -4), d2J = diag(1, 1, -1, -1),
    //   d2h - 2 d2J = diag(0, 0, -2, -2), which is diag(-2, -2) on N.
    let family = certify::solve_velocities(sys, p).map_err(|e| e.to_string())?;
    ensure(family.dim() == 0, || format!("family dimension {}", family.dim()))?;
    ensure((family.xi1.0[0] - 2.0).abs() <= 1e-9, || format!("xi1 {:?}", family.xi1.to_vec()))?;
    let frame = slice::witt_artin(sys, p).map_err(|e| e.to_string())?;
    ensure(frame.slice_dim() == 2, || format!("slice dimension {}", frame.slice_dim()))?;
    let h = certify::restricted_hessian(sys, p, &family.xi1, &frame).map_err(|e| e.to_string())?;
    let oracle = DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, -2.0]));
    let err = (&h - &oracle).amax();
    ensure(err <= 1e-9, || format!("restricted Hessian {h}"))?;
    within_time(start, Duration::from_secs(1))?;
    Ok(format!("xi = {:.12}, slice dim 2, |H - diag(-2,-2)| = {err:.1e}", family.xi1.0[0]))
}

struct Prepared {
    rs: RandomSystem,
    frame: WittArtinFrame,
    family: certify::VelocityFamily,
}

fn prepare(systems: &[RandomSystem]) -> Result<Vec<Prepared>, String> {
    systems
        .iter()
        .map(|rs| {
            let frame = slice::witt_artin(&rs.system, &rs.point).map_err(|e| format!("{}: {e}", rs.kind))?;
            let family = certify::solve_velocities(&rs.system, &rs.point).map_err(|e| format!("{}: {e}", rs.kind))?;
            Ok(Prepared { rs: rs.clone(), frame, family })
        })
        .collect()
}

fn random_in(sub: &Subalgebra, rng: &mut ChaCha8Rng) -> AlgebraVector {
    AlgebraVector(sub.matrix() * gaussian_vec(rng, sub.dim()))
}

fn criterion_4(prepared: &[Prepared]) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0_f64;
    let mut count = 0;
    for pr in prepared {
        let sys = &pr.rs.system;
        let p = &pr.rs.point;
        for _ in 0..100 {
            let xi = pr.family.member(&gaussian_vec(&mut rng, pr.family.dim()));
            let v = &pr.frame.kernel * gaussian_vec(&mut rng, pr.frame.kernel.ncols());
            let eta = random_in(&pr.frame.k, &mut rng);
            let r = slice::descent_residual(sys, p, &xi, &v, &eta).map_err(|e| format!("{}: {e}", pr.rs.kind))?;
            let q = sys.augmented_hessian(p, &xi).map_err(|e| e.to_string())?;
            let qvv = v.dot(&(&q * &v));
            let rel = r / (1.0 + qvv.abs());
            worst = worst.max(rel);
            count += 1;
            ensure(rel <= 1e-9, || format!("{}: residual {r:.3e} with Q(v,v) = {qvv:.3e}", pr.rs.kind))?;
        }
    }
    within_time(start, Duration::from_secs(30))?;
    Ok(format!("{count} samples, worst relative residual {worst:.2e}"))
}

fn criterion_5(prepared: &[Prepared]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checks = 0;
    for pr in prepared {
        let sys = &pr.rs.system;
        let p = &pr.rs.point;
        let xi = &pr.family.xi1;
        let reference = certify::inertia(
            &certify::restricted_hessian(sys, p, xi, &pr.frame).map_err(|e| e.to_string())?,
        );
        let (n, m) = (pr.frame.n.ncols(), pr.frame.t0.ncols());
        for _ in 0..5 {
            // Another complement of T0 in ker dJ(p): shear by T0 and mix columns.
            let shear = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let mix = DMatrix::from_fn(n, n, |i, j| {
                rng.sample::<f64, _>(StandardNormal) * 0.3 + if i == j { 1.0 } else { 0.0 }
            });
            let basis = (&pr.frame.n + &pr.frame.t0 * shear) * mix;
            let other = pr.frame.with_slice_basis(sys, basis).map_err(|e| format!("{}: {e}", pr.rs.kind))?;
            let h = certify::restricted_hessian(sys, p, xi, &other).map_err(|e| e.to_string())?;
            let inertia = certify::inertia(&h);
            ensure(inertia == reference, || {
                format!("{}: inertia {inertia:?} vs {reference:?}", pr.rs.kind)
            })?;
            checks += 1;
        }
    }
    Ok(format!("{checks} alternative complements, 0 mismatches"))
}

fn criterion_6(prepared: &[Prepared]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0_f64;
    for pr in prepared {
        let sys = &pr.rs.system;
        let d = sys.algebra().dim();
        for _ in 0..100 {
            let x = gaussian_vec(&mut rng, sys.dim());
            let v = gaussian_vec(&mut rng, sys.dim());
            let i = rng.random_range(0..d);
            let lhs = sys.momentum().components()[i].gradient(&x).map_err(|e| e.to_string())?.dot(&v);
            let rhs = sys.space().symplectic_form(&(&sys.algebra().generators()[i] * &x), &v);
            worst = worst.max((lhs - rhs).abs());
        }
    }
    ensure(worst <= 1e-10, || format!("worst residual {worst:.3e}"))?;
    Ok(format!("{} samples, worst residual {worst:.2e}", prepared.len() * 100))
}

fn witt_artin_identities(sys: &HamiltonianSystem, frame: &WittArtinFrame) -> Result<(), String> {
    let (t0, t, n, n0) = frame.dims();
    let (dh, dk, dg) = (frame.h.dim(), frame.k.dim(), sys.algebra().dim());
    ensure(t0 == dk - dh, || format!("dim T0 = {t0}, dim k - dim h = {}", dk - dh))?;
    ensure(t == dg - dk, || format!("dim T = {t}, dim g - dim k = {}", dg - dk))?;
    ensure(n0 == t0, || format!("dim N0 = {n0}, dim T0 = {t0}"))?;
    ensure(t0 + t + n + n0 == sys.dim(), || format!("total {} != {}", t0 + t + n + n0, sys.dim()))
}

fn criterion_7(prepared: &[Prepared]) -> Outcome {
    let mut analyzed = 0;
    for pr in prepared {
        witt_artin_identities(&pr.rs.system, &pr.frame).map_err(|e| format!("{}: {e}", pr.rs.kind))?;
        analyzed += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut extra: Vec<(HamiltonianSystem, DVector<f64>)> = Vec::new();
    for name in ["example1.json", "example1_offset.json", "saddle.json", "zero_h.json", "trivial_group.json"] {
        let loaded = cli::load_system(&fixture(name)).map_err(|e| e.to_string())?;
        extra.push((loaded.system, loaded.point));
    }
    let so3 = gallery::so3_system();
    for _ in 0..5 {
        extra.push((so3.clone(), gaussian_vec(&mut rng, 6)));
    }
    // Points with nontrivial isotropy.
    extra.push((so3.clone(), DVector::from_vec(vec![1.0, 0.5, 0.0, 0.0, 0.0, 0.0])));
    extra.push((so3.clone(), DVector::zeros(6)));
    for pr in prepared {
        extra.push((pr.rs.system.clone(), gaussian_vec(&mut rng, pr.rs.system.dim())));
    }
    for (sys, p) in &extra {
        let frame = slice::witt_artin(sys, p).map_err(|e| e.to_string())?;
        witt_artin_identities(sys, &frame)?;
        analyzed += 1;
    }
    Ok(format!("{analyzed} points analyzed"))
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let sys = gallery::example1();
    let x0 = DVector::from_vec(vec![0.3, -0.5, 0.7, 0.2]);
    let traj = dynamics::integrate(&sys, &x0, 1e-2, 10_000).map_err(|e| e.to_string())?;
    let j0 = sys.momentum().value(&x0).map_err(|e| e.to_string())?.0;
    let e0 = sys.hamiltonian().eval(&x0).map_err(|e| e.to_string())?;
    let mut jdrift = 0.0_f64;
    let mut edrift = 0.0_f64;
    for x in &traj {
        jdrift = jdrift.max((sys.momentum().value(x).map_err(|e| e.to_string())?.0 - &j0).amax());
        edrift = edrift.max((sys.hamiltonian().eval(x).map_err(|e| e.to_string())? - e0).abs());
    }
    ensure(jdrift <= 1e-9, || format!("momentum drift {jdrift:.3e}"))?;
    ensure(edrift <= 1e-6, || format!("energy drift {edrift:.3e}"))?;

    let p = DVector::zeros(4);
    let k = momentum_isotropy_algebra(sys.algebra(), &sys.momentum().value(&p).map_err(|e| e.to_string())?);
    let opts = ProbeOptions { epsilon: 1e-3, horizon: 100.0, samples: 16, ..Default::default() };
    let rep = dynamics::stability_probe(&sys, &p, &k, &opts).map_err(|e| e.to_string())?;
    ensure(!rep.escaped && rep.max_orbit_distance <= 10.0 * opts.epsilon, || {
        format!("probe escaped = {}, max distance {:.3e}", rep.escaped, rep.max_orbit_distance)
    })?;

    let saddle = gallery::saddle();
    let sopts = ProbeOptions { epsilon: 1e-3, horizon: 20.0, ..Default::default() };
    let srep = dynamics::stability_probe(&saddle, &DVector::zeros(2), &Subalgebra::zero(0), &sopts)
        .map_err(|e| e.to_string())?;
    ensure(srep.escaped, || format!("saddle max distance {:.3e}", srep.max_orbit_distance))?;
    within_time(start, Duration::from_secs(30))?;
    Ok(format!(
        "momentum drift {jdrift:.1e}, energy drift {edrift:.1e}, probe max distance {:.2e}, saddle escaped",
        rep.max_orbit_distance
    ))
}

fn criterion_9(prepared: &[Prepared]) -> Outcome {
    // Affine slices H(xi) = B^T (d2h - d2J_xi) B through the full algebra of
    // each test system, plus the velocity families through the library path.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..100 {
        let pr = &prepared[trial % prepared.len()];
        let sys = &pr.rs.system;
        let p = &pr.rs.point;
        let d = sys.algebra().dim();
        let b = &pr.frame.n;
        if b.ncols() == 0 {
            continue;
        }
        let at = |xi: &DVector<f64>| -> Result<DMatrix<f64>, String> {
            let q = sys.augmented_hessian(p, &AlgebraVector(xi.clone())).map_err(|e| e.to_string())?;
            let m = b.transpose() * q * b;
            Ok((&m + m.transpose()) * 0.5)
        };
        let a = gaussian_vec(&mut rng, d) * 3.0;
        let c = gaussian_vec(&mut rng, d) * 3.0;
        let (ha, hc, hm) = (at(&a)?, at(&c)?, at(&((&a + &c) * 0.5))?);
        let violation = 0.5 * (lambda_min(&ha) + lambda_min(&hc)) - lambda_min(&hm);
        worst = worst.max(violation);
        ensure(violation <= 1e-10, || format!("{}: violation {violation:.3e}", pr.rs.kind))?;

        let fam = certify::restricted_family(sys, p, &pr.family, &pr.frame).map_err(|e| e.to_string())?;
        let m = fam.dirs.len();
        let s1 = gaussian_vec(&mut rng, m) * 5.0;
        let s2 = gaussian_vec(&mut rng, m) * 5.0;
        let mid = (&s1 + &s2) * 0.5;
        let violation = 0.5 * (fam.lambda_min(&s1, 0.0).0 + fam.lambda_min(&s2, 0.0).0) - fam.lambda_min(&mid, 0.0).0;
        worst = worst.max(violation);
        ensure(violation <= 1e-10, || format!("{}: family violation {violation:.3e}", pr.rs.kind))?;
    }
    Ok(format!("100 slices, worst midpoint violation {worst:.2e}"))
}

fn timed(n: usize, f: impl FnOnce() -> Outcome) -> (usize, Outcome, Duration) {
    let start = Instant::now();
    let outcome = f();
    (n, outcome, start.elapsed())
}

fn main() -> ExitCode {
    let mut results = vec![timed(1, criterion_1), timed(2, criterion_2), timed(3, criterion_3)];
    match prepare(&random_systems()) {
        Ok(prepared) => {
            results.push(timed(4, || criterion_4(&prepared)));
            results.push(timed(5, || criterion_5(&prepared)));
            results.push(timed(6, || criterion_6(&prepared)));
            results.push(timed(7, || criterion_7(&prepared)));
            results.push(timed(8, criterion_8));
            results.push(timed(9, || criterion_9(&prepared)));
        }
        Err(e) => {
            for n in [4, 5, 6, 7, 9] {
                results.push((n, Err(format!("random system setup failed: {e}")), Duration::ZERO));
            }
            results.push(timed(8, criterion_8));
            results.sort_by_key(|r| r.0);
        }
    }
    let mut failed = 0;
    for (n, outcome, took) in &results {
        match outcome {
            Ok(detail) => println!("criterion {n}: PASS [{took:.2?}] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL [{took:.2?}] {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
