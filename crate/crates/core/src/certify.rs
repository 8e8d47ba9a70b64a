//! Velocities of relative equilibria and the slice-Hessian definiteness search.
//!
//! The velocities of a relative equilibrium `p` form the affine family
//! `xi_1 + h`. Along it the restricted Hessian `H(s)` of `h - J_xi` on the slice
//! is affine in the family coordinates `s`, so `lambda_min(H(s))` is concave.
//! The search maximizes `lambda_min(H)` and `lambda_min(-H)` by projected
//! supergradient ascent; a strictly positive optimum certifies stability
//! relative to `K`. A failed search proves nothing.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::momentum::momentum_isotropy_algebra;
use crate::slice::WittArtinFrame;
use crate::symmetry::{AlgebraVector, Subalgebra};
use crate::system::HamiltonianSystem;

/// Spectrum threshold after scaling by `1 / max(1, |H|_max)`.
pub const DEFINITENESS_THRESHOLD: f64 = 1e-7;

const CONTAINMENT_TOL: f64 = 1e-9;

pub const INCONCLUSIVE_NOTE: &str =
    "INCONCLUSIVE does not imply instability: slice definiteness is only a sufficient condition";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    StablePosDef,
    StableNegDef,
    Inconclusive,
}

impl Verdict {
    pub fn is_stable(self) -> bool {
        !matches!(self, Verdict::Inconclusive)
    }
}

/// `(n_plus, n_minus, n_zero)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inertia(pub usize, pub usize, pub usize);

/// The affine set of velocities `xi_1 + span(h)`.
#[derive(Debug, Clone)]
pub struct VelocityFamily {
    pub xi1: AlgebraVector,
    pub h: Subalgebra,
}

impl VelocityFamily {
    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// `xi_1 + sum_i s_i h_i`.
    pub fn member(&self, s: &DVector<f64>) -> AlgebraVector {
        AlgebraVector(&self.xi1.0 + self.h.matrix() * s)
    }

    /// Residuals of `xi_1` outside `k` and of `[xi_1, h]` outside `h`.
    pub fn containment_residuals(&self, sys: &HamiltonianSystem, p: &DVector<f64>) -> Result<(f64, f64)> {
        let algebra = sys.algebra();
        let mu = sys.momentum().value(p)?;
        let k = momentum_isotropy_algebra(algebra, &mu);
        let in_k = k.residual(&self.xi1, algebra);
        let in_n = self
            .h
            .vectors()
            .iter()
            .map(|eta| self.h.residual(&algebra.bracket(&self.xi1, eta), algebra))
            .fold(0.0_f64, f64::max);
        Ok((in_k, in_n))
    }
}

/// Solves `dJ_xi(p) = dh(p)` for the velocity family of `p`.
pub fn solve_velocities(sys: &HamiltonianSystem, p: &DVector<f64>) -> Result<VelocityFamily> {
    let algebra = sys.algebra();
    let d = algebra.dim();
    let grad_h = sys.hamiltonian().gradient(p)?;
    let dj = sys.momentum().differential(p)?;
    // Minimum Frobenius-norm solution: solve in ortho coordinates.
    let a = dj.transpose() * algebra.from_ortho(&DMatrix::identity(d, d));
    let y = linalg::lstsq(&a, &grad_h);
    let xi1 = AlgebraVector(algebra.from_ortho(&DMatrix::from_column_slice(d, 1, y.as_slice())).column(0).into_owned());
    let residual = (dj.transpose() * &xi1.0 - &grad_h).norm();
    if residual > 1e-9 * (1.0 + grad_h.norm()) {
        return Err(Error::NotRelativeEquilibrium { residual });
    }
    let h = algebra.isotropy_algebra(p, sys.space())?;
    let family = VelocityFamily { xi1, h };
    let (rk, rn) = family.containment_residuals(sys, p)?;
    debug_assert!(
        rk <= CONTAINMENT_TOL * (1.0 + family.xi1.0.norm()) && rn <= CONTAINMENT_TOL * (1.0 + family.xi1.0.norm()),
        "velocity outside the normalizer algebra: {rk:.3e}, {rn:.3e}"
    );
    Ok(family)
}

/// `B^T (d^2 h(p) - d^2 J_xi(p)) B` on the slice basis `B`.
pub fn restricted_hessian(
    sys: &HamiltonianSystem,
    p: &DVector<f64>,
    xi: &AlgebraVector,
    frame: &WittArtinFrame,
) -> Result<DMatrix<f64>> {
    let (res, tol) = sys.velocity_residual(p, xi)?;
    if res > tol {
        return Err(Error::PreconditionViolated(format!(
            "xi is not a velocity at p (residual {res:.3e})"
        )));
    }
    let q = sys.augmented_hessian(p, xi)?;
    let h = frame.n.transpose() * q * &frame.n;
    Ok((&h + h.transpose()) * 0.5)
}

/// `xi_perp`: the member of the family orthogonal to `h` under `metric`.
pub fn orthogonal_velocity(family: &VelocityFamily, metric: &DMatrix<f64>) -> AlgebraVector {
    if family.dim() == 0 {
        return family.xi1.clone();
    }
    let hb = family.h.matrix();
    let gram = hb.transpose() * metric * hb;
    let rhs = hb.transpose() * metric * &family.xi1.0;
    let c = gram
        .lu()
        .solve(&rhs)
        .expect("metric restricted to h is positive definite");
    AlgebraVector(&family.xi1.0 - hb * c)
}

fn scale_of(h: &DMatrix<f64>) -> f64 {
    linalg::max_abs(h).max(1.0)
}

pub fn inertia(h: &DMatrix<f64>) -> Inertia {
    let scale = scale_of(h);
    let (vals, _) = linalg::sym_eigen(h);
    let mut out = Inertia(0, 0, 0);
    for v in vals {
        let s = v / scale;
        if s > DEFINITENESS_THRESHOLD {
            out.0 += 1;
        } else if s < -DEFINITENESS_THRESHOLD {
            out.1 += 1;
        } else {
            out.2 += 1;
        }
    }
    out
}

/// Verdict of a single symmetric matrix.
pub fn definiteness(h: &DMatrix<f64>) -> Verdict {
    if h.nrows() == 0 {
        return Verdict::Inconclusive;
    }
    let scale = scale_of(h);
    let (vals, _) = linalg::sym_eigen(h);
    if vals[0] / scale > DEFINITENESS_THRESHOLD {
        Verdict::StablePosDef
    } else if vals[vals.len() - 1] / scale < -DEFINITENESS_THRESHOLD {
        Verdict::StableNegDef
    } else {
        Verdict::Inconclusive
    }
}

/// `H(s) = base + sum_i s_i dirs[i]`.
#[derive(Debug, Clone)]
pub struct AffineFamily {
    pub base: DMatrix<f64>,
    pub dirs: Vec<DMatrix<f64>>,
}

impl AffineFamily {
    pub fn eval(&self, s: &DVector<f64>) -> DMatrix<f64> {
        let mut m = self.base.clone();
        for (d, &c) in self.dirs.iter().zip(s.iter()) {
            m += d * c;
        }
        m
    }

    pub fn negated(&self) -> Self {
        Self {
            base: -&self.base,
            dirs: self.dirs.iter().map(|d| -d).collect(),
        }
    }

    /// `lambda_min(H(s))` and a supergradient: the average of
    /// `u^T dirs_i u` over an orthonormal basis of the lowest eigenspace
    /// (eigenvalues within `cluster` of the minimum).
    pub fn lambda_min(&self, s: &DVector<f64>, cluster: f64) -> (f64, DVector<f64>) {
        let h = self.eval(s);
        let (vals, vecs) = linalg::sym_eigen(&h);
        let lmin = vals[0];
        let members: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] <= lmin + cluster).collect();
        let mut g = DVector::zeros(self.dirs.len());
        for &i in &members {
            let u = vecs.column(i);
            for (k, d) in self.dirs.iter().enumerate() {
                g[k] += u.dot(&(d * u));
            }
        }
        g /= members.len() as f64;
        (lmin, g)
    }
}

/// Builds `H(s)` for the family on the frame's slice.
pub fn restricted_family(
    sys: &HamiltonianSystem,
    p: &DVector<f64>,
    family: &VelocityFamily,
    frame: &WittArtinFrame,
) -> Result<AffineFamily> {
    let base = restricted_hessian(sys, p, &family.xi1, frame)?;
    let b = &frame.n;
    let dirs = family
        .h
        .vectors()
        .iter()
        .map(|eta| {
            let jh = sys.momentum().along(eta, sys.dim())?.hessian(p)?;
            let m = -(b.transpose() * jh * b);
            Ok((&m + m.transpose()) * 0.5)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AffineFamily { base, dirs })
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub restarts: usize,
    pub bound: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Additional starting points in family coordinates.
    pub extra_starts: Vec<DVector<f64>>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            bound: 1e3,
            max_iter: 500,
            seed: 42,
            extra_starts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub s: DVector<f64>,
    pub value: f64,
    pub on_boundary: bool,
}

fn clamp(s: &DVector<f64>, bound: f64) -> DVector<f64> {
    s.map(|x| x.clamp(-bound, bound))
}

/// Projected supergradient ascent of `lambda_min(H(s))` from one start, with
/// step halving on failure to improve.
fn ascend(fam: &AffineFamily, start: &DVector<f64>, opts: &SearchOptions) -> SearchOutcome {
    let mut s = clamp(start, opts.bound);
    let scale = fam
        .dirs
        .iter()
        .map(linalg::max_abs)
        .fold(linalg::max_abs(&fam.base), f64::max)
        .max(1.0);
    let mut step = opts.bound * 0.1;
    let min_step = 1e-14 * opts.bound.max(1.0);
    let (mut f, mut g) = fam.lambda_min(&s, 1e-10 * scale);
    for _ in 0..opts.max_iter {
        let gn = g.norm();
        if gn <= 1e-14 || step < min_step {
            break;
        }
        let trial = clamp(&(&s + &g * (step / gn)), opts.bound);
        if (&trial - &s).norm() == 0.0 {
            // Pinned to the box along the supergradient.
            break;
        }
        let cluster = (step * 1e-3).max(1e-10 * scale);
        let (ft, gt) = fam.lambda_min(&trial, cluster);
        if ft > f {
            s = trial;
            f = ft;
            g = gt;
            step *= 1.5;
        } else {
            step *= 0.5;
            // Refresh the supergradient with a tighter cluster.
            g = fam.lambda_min(&s, (step * 1e-3).max(1e-10 * scale)).1;
        }
    }
    let on_boundary = s.iter().any(|x| (x.abs() - opts.bound).abs() <= 1e-9 * opts.bound);
    SearchOutcome { s, value: f, on_boundary }
}

/// Maximizes `lambda_min` over the box from `s = 0`, the extra starts and
/// `restarts` random points.
pub fn maximize_lambda_min(fam: &AffineFamily, opts: &SearchOptions, seed: u64) -> SearchOutcome {
    let dim = fam.dirs.len();
    let mut starts = vec![DVector::zeros(dim)];
    starts.extend(opts.extra_starts.iter().cloned());
    if dim > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..opts.restarts {
            starts.push(DVector::from_fn(dim, |_, _| rng.random_range(-opts.bound..=opts.bound)));
        }
    }
    starts
        .par_iter()
        .map(|s0| {
            if dim == 0 {
                SearchOutcome {
                    s: s0.clone(),
                    value: fam.lambda_min(s0, 0.0).0,
                    on_boundary: false,
                }
            } else {
                ascend(fam, s0, opts)
            }
        })
        .reduce_with(|a, b| if b.value > a.value { b } else { a })
        .expect("at least one start")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StabilityCertificate {
    pub verdict: Verdict,
    pub xi_star: Vec<f64>,
    pub spectrum: Vec<f64>,
    pub margin: f64,
    pub compactness_verified: bool,
    pub inertia_at_xi1: Inertia,
    pub inertia_at_orthogonal: Option<Inertia>,
    pub orthogonal_velocity: Option<Vec<f64>>,
    /// Best scaled `lambda_min(H)` found.
    pub best_positive: f64,
    /// Best scaled `lambda_min(-H)` found.
    pub best_negative: f64,
    pub boundary_warning: bool,
    pub note: String,
}

/// Searches the velocity family for a definite restricted Hessian.
pub fn definiteness_search(
    sys: &HamiltonianSystem,
    p: &DVector<f64>,
    family: &VelocityFamily,
    frame: &WittArtinFrame,
    opts: &SearchOptions,
) -> Result<StabilityCertificate> {
    let fam = restricted_family(sys, p, family, frame)?;
    let compact = sys.algebra().compactness_certificate(sys.space().metric());
    let inertia_at_xi1 = inertia(&fam.base);
    let s_dim = frame.slice_dim();

    if s_dim == 0 {
        return Ok(StabilityCertificate {
            verdict: Verdict::Inconclusive,
            xi_star: family.xi1.to_vec(),
            spectrum: Vec::new(),
            margin: 0.0,
            compactness_verified: compact,
            inertia_at_xi1,
            inertia_at_orthogonal: None,
            orthogonal_velocity: None,
            best_positive: 0.0,
            best_negative: 0.0,
            boundary_warning: false,
            note: "empty slice: nothing to certify".into(),
        });
    }

    let pos = maximize_lambda_min(&fam, opts, opts.seed);
    let neg = maximize_lambda_min(&fam.negated(), opts, opts.seed.wrapping_add(1));
    let scaled = |o: &SearchOutcome| o.value / scale_of(&fam.eval(&o.s));
    let (sp, sn) = (scaled(&pos), scaled(&neg));

    let (verdict, best) = if sp > DEFINITENESS_THRESHOLD && sp >= sn {
        (Verdict::StablePosDef, &pos)
    } else if sn > DEFINITENESS_THRESHOLD {
        (Verdict::StableNegDef, &neg)
    } else if sp > DEFINITENESS_THRESHOLD {
        (Verdict::StablePosDef, &pos)
    } else if sp >= sn {
        (Verdict::Inconclusive, &pos)
    } else {
        (Verdict::Inconclusive, &neg)
    };
    let h_star = fam.eval(&best.s);
    let (spectrum, _) = linalg::sym_eigen(&h_star);
    let margin = spectrum.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let note = match verdict {
        Verdict::Inconclusive => INCONCLUSIVE_NOTE.to_string(),
        _ if !compact => "definite slice Hessian found; compactness unverified, so the stability hypothesis is not established".to_string(),
        _ => "definite slice Hessian: Lyapunov stable relative to K".to_string(),
    };
    Ok(StabilityCertificate {
        verdict,
        xi_star: family.member(&best.s).to_vec(),
        spectrum,
        margin,
        compactness_verified: compact,
        inertia_at_xi1,
        inertia_at_orthogonal: None,
        orthogonal_velocity: None,
        best_positive: sp,
        best_negative: sn,
        boundary_warning: verdict.is_stable() && best.on_boundary,
        note,
    })
}

/// Certificate for one fixed velocity, with no search.
pub fn certificate_at(
    sys: &HamiltonianSystem,
    p: &DVector<f64>,
    xi: &AlgebraVector,
    family: &VelocityFamily,
    frame: &WittArtinFrame,
) -> Result<StabilityCertificate> {
    let h = restricted_hessian(sys, p, xi, frame)?;
    let h1 = restricted_hessian(sys, p, &family.xi1, frame)?;
    let compact = sys.algebra().compactness_certificate(sys.space().metric());
    let (spectrum, _) = linalg::sym_eigen(&h);
    let scale = scale_of(&h);
    let verdict = definiteness(&h);
    let margin = spectrum.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let margin = if margin.is_finite() { margin } else { 0.0 };
    let best_positive = spectrum.first().map(|v| v / scale).unwrap_or(0.0);
    let best_negative = spectrum.last().map(|v| -v / scale).unwrap_or(0.0);
    Ok(StabilityCertificate {
        verdict,
        xi_star: xi.to_vec(),
        spectrum,
        margin,
        compactness_verified: compact,
        inertia_at_xi1: inertia(&h1),
        inertia_at_orthogonal: None,
        orthogonal_velocity: None,
        best_positive,
        best_negative,
        boundary_warning: false,
        note: if verdict.is_stable() {
            "definite slice Hessian at the given velocity".into()
        } else {
            INCONCLUSIVE_NOTE.into()
        },
    })
}
