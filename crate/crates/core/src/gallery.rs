//! Reference systems: a circle action on R^4 with the origin fixed,
//! comparators, and a generator of random valid systems.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::invariants::{invariant_basis, monomials, reynolds_project};
use crate::linalg;
use crate::phase_space::{Poly, SymplecticSpace};
use crate::symmetry::{AlgebraVector, LieAlgebraBasis};
use crate::system::HamiltonianSystem;

type C64 = Complex<f64>;

/// Circle generator on `R^4`, oriented so that
/// `J = 1/2 (x1^2 + y1^2) - 1/2 (x2^2 + y2^2)`.
pub fn example1_generator() -> DMatrix<f64> {
    let mut a = DMatrix::zeros(4, 4);
    a[(0, 1)] = 1.0;
    a[(1, 0)] = -1.0;
    a[(2, 3)] = -1.0;
    a[(3, 2)] = 1.0;
    a
}

/// `h = (x1^2 + y1^2) - 2 (x2^2 + y2^2)`.
pub fn example1_hamiltonian() -> Poly {
    Poly::quadratic_form(&DMatrix::from_diagonal(&DVector::from_vec(vec![
        1.0, 1.0, -2.0, -2.0,
    ])))
}

/// The circle action on `R^4` with the origin as a fixed point.
pub fn example1() -> HamiltonianSystem {
    let space = SymplecticSpace::canonical(2);
    let algebra = LieAlgebraBasis::new(vec![example1_generator()], &space).expect("valid generator");
    HamiltonianSystem::new(space, algebra, example1_hamiltonian()).expect("invariant Hamiltonian")
}

/// Same action with invariant quartic terms added to `h`.
pub fn example1_with_quartic() -> HamiltonianSystem {
    let base = example1();
    let r1 = Poly::quadratic_form(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0])));
    let r2 = Poly::quadratic_form(&DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0])));
    let h = example1_hamiltonian()
        .add(&r1.mul(&r1).scale(0.3))
        .add(&r1.mul(&r2).scale(-0.2))
        .add(&r2.mul(&r2).scale(0.1));
    HamiltonianSystem::new(base.space().clone(), base.algebra().clone(), h).expect("invariant")
}

/// `h = x1 y1` on `R^2` with no symmetry.
pub fn saddle() -> HamiltonianSystem {
    let space = SymplecticSpace::canonical(1);
    let h = Poly::var(2, 0).mul(&Poly::var(2, 1));
    HamiltonianSystem::new(space, LieAlgebraBasis::trivial(2), h).expect("valid")
}

/// The circle action of [`example1`] with `h = 0`.
pub fn zero_hamiltonian() -> HamiltonianSystem {
    let base = example1();
    HamiltonianSystem::new(base.space().clone(), base.algebra().clone(), Poly::zero(4)).expect("valid")
}

/// `so(3)` acting on `T*R^3` by cotangent lift, coordinates
/// `(q1, p1, q2, p2, q3, p3)`. Structure constants are `eps_ijk`.
pub fn so3_on_r6() -> LieAlgebraBasis {
    let space = SymplecticSpace::canonical(3);
    LieAlgebraBasis::new(so3_generators_lifted(), &space).expect("so(3) generators")
}

fn so3_generators_lifted() -> Vec<DMatrix<f64>> {
    let l = [
        [[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]],
        [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
    ];
    l.iter()
        .map(|x| {
            let mut m = DMatrix::zeros(6, 6);
            for r in 0..3 {
                for c in 0..3 {
                    m[(2 * r, 2 * c)] = x[r][c];
                    m[(2 * r + 1, 2 * c + 1)] = x[r][c];
                }
            }
            m
        })
        .collect()
}

/// Spherical pendulum-like system on `T*R^3`:
/// `h = 1/2 |p|^2 + 1/2 |q|^2 + 0.1 |q|^4`.
pub fn so3_system() -> HamiltonianSystem {
    let space = SymplecticSpace::canonical(3);
    let q2 = Poly::quadratic_form(&DMatrix::from_diagonal(&DVector::from_vec(vec![
        1.0, 0.0, 1.0, 0.0, 1.0, 0.0,
    ])));
    let p2 = Poly::quadratic_form(&DMatrix::from_diagonal(&DVector::from_vec(vec![
        0.0, 1.0, 0.0, 1.0, 0.0, 1.0,
    ])));
    let h = p2.scale(0.5).add(&q2.scale(0.5)).add(&q2.mul(&q2).scale(0.1));
    HamiltonianSystem::new(space, so3_on_r6(), h).expect("invariant")
}

/// A randomly generated system together with a relative equilibrium on it.
#[derive(Debug, Clone)]
pub struct RandomSystem {
    pub kind: &'static str,
    pub system: HamiltonianSystem,
    pub point: DVector<f64>,
    /// The velocity used when the Hamiltonian was solved for.
    pub velocity: AlgebraVector,
}

/// Realification of a complex matrix in `(x1, y1, x2, y2, ...)` order.
fn realify(m: &DMatrix<C64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = m[(i, j)];
            out[(2 * i, 2 * j)] = z.re;
            out[(2 * i, 2 * j + 1)] = -z.im;
            out[(2 * i + 1, 2 * j)] = z.im;
            out[(2 * i + 1, 2 * j + 1)] = z.re;
        }
    }
    out
}

fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> DMatrix<C64> {
    let z = DMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = z.qr();
    let q = qr.q();
    let r = qr.r();
    // Fix the phases so the distribution is Haar.
    let mut d = DMatrix::identity(n, n);
    for i in 0..n {
        let rii = r[(i, i)];
        let norm = rii.norm();
        d[(i, i)] = if norm > 0.0 { rii / C64::new(norm, 0.0) } else { C64::new(1.0, 0.0) };
    }
    q * d
}

fn diag_weights(weights: &[f64]) -> DMatrix<C64> {
    DMatrix::from_fn(weights.len(), weights.len(), |i, j| {
        if i == j {
            C64::new(0.0, weights[i])
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

fn su2_on_c3() -> Vec<DMatrix<C64>> {
    let i = C64::new(0.0, 1.0);
    let o = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let half = C64::new(0.5, 0.0);
    // i sigma_k / 2 on the first two coordinates.
    let s1 = DMatrix::from_row_slice(3, 3, &[o, i * half, o, i * half, o, o, o, o, o]);
    let s2 = DMatrix::from_row_slice(3, 3, &[o, one * half, o, -one * half, o, o, o, o, o]);
    let s3 = DMatrix::from_row_slice(3, 3, &[i * half, o, o, o, -i * half, o, o, o, o]);
    vec![s1, s2, s3]
}

fn random_weight<R: Rng>(rng: &mut R) -> f64 {
    let w = rng.random_range(1..=3) as f64;
    if rng.random_bool(0.5) {
        w
    } else {
        -w
    }
}

fn random_poly<R: Rng>(rng: &mut R, nvars: usize, degree: u32, scale: f64) -> Poly {
    let mut p = Poly::zero(nvars);
    for e in monomials(nvars, degree) {
        let c: f64 = rng.sample(StandardNormal);
        p.add_term(e, c * scale);
    }
    p
}

/// Draws a random compact linear symmetry (torus, `su(2)`, `u(2)` or `so(3)`
/// acting unitarily on `C^n`, conjugated by a random unitary), an invariant
/// quadratic-plus-quartic Hamiltonian obtained by group averaging, and a point
/// `p` made into a relative equilibrium by solving for an invariant
/// correction of `h`.
pub fn random_system<R: Rng>(rng: &mut R, kind: usize) -> RandomSystem {
    loop {
        if let Some(sys) = try_random_system(rng, kind) {
            return sys;
        }
    }
}

fn try_random_system<R: Rng>(rng: &mut R, kind: usize) -> Option<RandomSystem> {
    let (name, n, complex_gens): (&'static str, usize, Vec<DMatrix<C64>>) = match kind % 5 {
        0 => {
            let w = [random_weight(rng), random_weight(rng)];
            ("circle", 2, vec![diag_weights(&w)])
        }
        1 => {
            let w1 = [random_weight(rng), random_weight(rng), 0.0];
            let w2 = [0.0, random_weight(rng), random_weight(rng)];
            ("torus2", 3, vec![diag_weights(&w1), diag_weights(&w2)])
        }
        2 => ("su2", 3, su2_on_c3()),
        3 => {
            let mut g = su2_on_c3();
            g.push(diag_weights(&[1.0, 1.0, random_weight(rng)]));
            ("u2", 3, g)
        }
        _ => {
            let gens = so3_generators_lifted()
                .into_iter()
                .map(|m| {
                    // Recover the 3x3 real rotation generator acting on C^3.
                    DMatrix::from_fn(3, 3, |r, c| C64::new(m[(2 * r, 2 * c)], 0.0))
                })
                .collect();
            ("so3", 3, gens)
        }
    };
    let u = random_unitary(rng, n);
    let ur = realify(&u);
    let space = SymplecticSpace::canonical(n);
    let generators: Vec<DMatrix<f64>> = complex_gens
        .iter()
        .map(|g| &ur * realify(g) * ur.transpose())
        .collect();
    let algebra = LieAlgebraBasis::new(generators, &space).ok()?;

    // Point: random, with a random subset of complex coordinates switched off
    // (before rotation) so that isotropy is sometimes nontrivial.
    let mut z = DVector::from_fn(n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    for k in 0..n {
        if rng.random_bool(0.3) {
            z[k] = C64::new(0.0, 0.0);
        }
    }
    let zr = DVector::from_fn(2 * n, |i, _| if i % 2 == 0 { z[i / 2].re } else { z[i / 2].im });
    let point = &ur * zr;

    let dim = 2 * n;
    let raw = random_poly(rng, dim, 2, 1.0).add(&random_poly(rng, dim, 4, 0.2));
    let h_rand = reynolds_project(&raw, &algebra);

    // Solve sum_j c_j grad f_j(p) - sum_i xi_i grad J_i(p) = -grad h_rand(p).
    let mut invariants = invariant_basis(&algebra, 2);
    invariants.extend(invariant_basis(&algebra, 4));
    let probe = HamiltonianSystem::new(space.clone(), algebra.clone(), h_rand.clone()).ok()?;
    let jgrad = probe.momentum().differential(&point).ok()?;
    let d = algebra.dim();
    let m = invariants.len();
    let mut a = DMatrix::zeros(dim, m + d);
    for (j, f) in invariants.iter().enumerate() {
        a.set_column(j, &f.gradient(&point).ok()?);
    }
    for i in 0..d {
        a.set_column(m + i, &(-jgrad.row(i).transpose()));
    }
    let rhs = -h_rand.gradient(&point).ok()?;
    let sol = linalg::lstsq(&a, &rhs);
    let mut h = h_rand;
    for (j, f) in invariants.iter().enumerate() {
        h = h.add(&f.scale(sol[j]));
    }
    let velocity = AlgebraVector(sol.rows(m, d).into_owned());
    let system = HamiltonianSystem::new(space, algebra, h).ok()?;
    let (res, tol) = system.velocity_residual(&point, &velocity).ok()?;
    if res > tol {
        return None;
    }
    Some(RandomSystem {
        kind: name,
        system,
        point,
        velocity,
    })
}
