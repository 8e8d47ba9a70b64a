//! Witt-Artin decomposition of the tangent space at a point and the
//! symplectic slice `N = ker dJ(p) / k.p`.
//!
//! All four pieces are realized as subspaces of `R^{2n}` with bases that are
//! orthonormal for the reference metric:
//!
//! * `T0` spans `k.p`,
//! * `T`  is the complement of `T0` inside `g.p`,
//! * `N`  is the complement of `T0` inside `ker dJ(p)`,
//! * `N0` is the complement of `g.p + ker dJ(p)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::momentum::{momentum_isotropy_algebra, MomentumValue};
use crate::symmetry::{AlgebraVector, Subalgebra};
use crate::system::HamiltonianSystem;

const SLICE_DET_TOL: f64 = 1e-9;
const KERNEL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct WittArtinFrame {
    pub point: DVector<f64>,
    pub mu: MomentumValue,
    /// Isotropy algebra of `p`.
    pub h: Subalgebra,
    /// Coadjoint isotropy algebra of `mu`.
    pub k: Subalgebra,
    pub t0: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub n: DMatrix<f64>,
    pub n0: DMatrix<f64>,
    /// Metric-orthonormal basis of `ker dJ(p)`.
    pub kernel: DMatrix<f64>,
}

impl WittArtinFrame {
    /// `(dim T0, dim T, dim N, dim N0)`.
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.t0.ncols(), self.t.ncols(), self.n.ncols(), self.n0.ncols())
    }

    pub fn slice_dim(&self) -> usize {
        self.n.ncols()
    }

    /// Replaces the slice realization by another complement of `T0` inside
    /// `ker dJ(p)`. Columns of `basis` need not be orthonormal.
    pub fn with_slice_basis(&self, sys: &HamiltonianSystem, basis: DMatrix<f64>) -> Result<Self> {
        check_len(self.n.nrows(), basis.nrows())?;
        check_len(self.n.ncols(), basis.ncols())?;
        for col in basis.column_iter() {
            let v = col.into_owned();
            let r = kernel_residual(sys, &self.kernel, &v);
            if r > KERNEL_TOL * sys.space().norm(&v).max(1.0) {
                return Err(Error::PreconditionViolated(format!(
                    "slice basis vector leaves ker dJ(p) (residual {r:.3e})"
                )));
            }
        }
        let mut joint = DMatrix::zeros(basis.nrows(), basis.ncols() + self.t0.ncols());
        joint.view_mut((0, 0), basis.shape()).copy_from(&basis);
        joint
            .view_mut((0, basis.ncols()), self.t0.shape())
            .copy_from(&self.t0);
        if linalg::rank(&sys.space().whiten(&joint)) != joint.ncols() {
            return Err(Error::PreconditionViolated(
                "slice basis is not a complement of k.p".into(),
            ));
        }
        let frame = Self {
            n: basis,
            ..self.clone()
        };
        check_slice_form(sys, &frame)?;
        Ok(frame)
    }
}

/// Metric norm of the component of `v` outside the span of the
/// orthonormal `kernel` basis.
fn kernel_residual(sys: &HamiltonianSystem, kernel: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let g = sys.space().metric();
    let coeffs = kernel.transpose() * (g * v);
    sys.space().norm(&(v - kernel * coeffs))
}

pub fn witt_artin(sys: &HamiltonianSystem, p: &DVector<f64>) -> Result<WittArtinFrame> {
    let space = sys.space();
    let algebra = sys.algebra();
    check_len(space.dim(), p.len())?;
    let dim = space.dim();

    let h = algebra.isotropy_algebra(p, space)?;
    let mu = sys.momentum().value(p)?;
    let k = momentum_isotropy_algebra(algebra, &mu);

    // Whitened images of the action.
    let gp_cols = space.whiten(&algebra.action_columns(p));
    let kp_cols = &gp_cols * k.matrix();
    let t0_w = linalg::range(&kp_cols);
    let gp_w = linalg::range(&gp_cols);

    let kernel = sys.momentum().kernel_basis(p, space)?;
    let kernel_w = space.whiten(&kernel);

    // N: vectors in ker dJ(p) orthogonal to T0.
    let d_rows = space.whiten_rows(&sys.momentum().differential(p)?);
    let n_w = linalg::nullspace(&vstack(&d_rows, &t0_w.transpose()));

    // T: component of g.p orthogonal to T0.
    let proj = DMatrix::identity(dim, dim) - &t0_w * t0_w.transpose();
    let t_w = linalg::range(&(proj * &gp_w));

    // N0: orthogonal complement of g.p + ker dJ(p).
    let n0_w = linalg::nullspace(&vstack(&gp_w.transpose(), &kernel_w.transpose()));

    let frame = WittArtinFrame {
        point: p.clone(),
        mu,
        t0: space.unwhiten(&t0_w),
        t: space.unwhiten(&t_w),
        n: space.unwhiten(&n_w),
        n0: space.unwhiten(&n0_w),
        kernel,
        h,
        k,
    };
    check_dimensions(&frame, algebra.dim(), dim)?;
    check_slice_form(sys, &frame)?;
    Ok(frame)
}

fn vstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let cols = a.ncols().max(b.ncols());
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), cols);
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    m
}

fn check_dimensions(frame: &WittArtinFrame, dim_g: usize, dim_p: usize) -> Result<()> {
    let (t0, t, n, n0) = frame.dims();
    let (dh, dk) = (frame.h.dim(), frame.k.dim());
    let mut bad = Vec::new();
    if t0 + dh != dk {
        bad.push(format!("dim T0 = {t0} but dim k - dim h = {dk} - {dh}"));
    }
    if t + dk != dim_g {
        bad.push(format!("dim T = {t} but dim g - dim k = {dim_g} - {dk}"));
    }
    if n0 != t0 {
        bad.push(format!("dim N0 = {n0} but dim T0 = {t0}"));
    }
    if t0 + t + n + n0 != dim_p {
        bad.push(format!("dimensions sum to {} not {dim_p}", t0 + t + n + n0));
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::WittArtinDimensions(bad.join("; ")))
    }
}

fn check_slice_form(sys: &HamiltonianSystem, frame: &WittArtinFrame) -> Result<()> {
    // Determinant in a metric-orthonormal basis of the slice.
    let ortho = linalg::gram_schmidt(
        &frame.n.column_iter().map(|c| c.into_owned()).collect::<Vec<_>>(),
        sys.space().metric(),
    );
    let b = linalg::columns(&ortho, frame.n.nrows());
    let form = b.transpose() * sys.space().omega() * &b;
    let det = if form.nrows() == 0 { 1.0 } else { form.determinant() };
    if ortho.len() != frame.n.ncols() || det.abs() <= SLICE_DET_TOL {
        return Err(Error::DegenerateSliceForm { det });
    }
    Ok(())
}

/// `w(n_i, n_j)` on the slice basis.
pub fn slice_symplectic_form(sys: &HamiltonianSystem, frame: &WittArtinFrame) -> Result<DMatrix<f64>> {
    check_slice_form(sys, frame)?;
    Ok(frame.n.transpose() * sys.space().omega() * &frame.n)
}

/// `J_N(v)`: for each basis element `eta` of `h`, `-1/2 w^T Omega A(eta) w`
/// with `w` the ambient vector of the slice coordinates `v`.
pub fn slice_momentum_map(
    sys: &HamiltonianSystem,
    frame: &WittArtinFrame,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len(frame.slice_dim(), v.len())?;
    let w = &frame.n * v;
    let omega = sys.space().omega();
    let vals = frame
        .h
        .vectors()
        .iter()
        .map(|eta| Ok(-0.5 * w.dot(&(omega * sys.algebra().matrix(eta)? * &w))))
        .collect::<Result<Vec<f64>>>()?;
    Ok(DVector::from_vec(vals))
}

/// `|Q(v + A(eta) p, v + A(eta) p) - Q(v, v)|` with `Q` the Hessian of
/// `h - J_xi` at `p`.
pub fn descent_residual(
    sys: &HamiltonianSystem,
    p: &DVector<f64>,
    xi: &AlgebraVector,
    v: &DVector<f64>,
    eta: &AlgebraVector,
) -> Result<f64> {
    check_len(sys.dim(), p.len())?;
    check_len(sys.dim(), v.len())?;
    let (res, tol) = sys.velocity_residual(p, xi)?;
    if res > tol {
        return Err(Error::PreconditionViolated(format!(
            "xi is not a velocity at p (residual {res:.3e})"
        )));
    }
    let kernel = sys.momentum().kernel_basis(p, sys.space())?;
    let r = kernel_residual(sys, &kernel, v);
    if r > KERNEL_TOL * sys.space().norm(v).max(1.0) {
        return Err(Error::PreconditionViolated(format!(
            "v is not in ker dJ(p) (residual {r:.3e})"
        )));
    }
    let mu = sys.momentum().value(p)?;
    let k = momentum_isotropy_algebra(sys.algebra(), &mu);
    let kr = k.residual(eta, sys.algebra());
    if kr > 1e-9 * sys.algebra().inner(eta, eta).sqrt().max(1.0) {
        return Err(Error::PreconditionViolated(format!(
            "eta is not in the momentum isotropy algebra (residual {kr:.3e})"
        )));
    }
    if eta.0.iter().all(|&c| c == 0.0) {
        return Ok(0.0);
    }
    let q = sys.augmented_hessian(p, xi)?;
    let shifted = v + sys.algebra().infinitesimal_action(eta, p)?;
    Ok((shifted.dot(&(&q * &shifted)) - v.dot(&(&q * v))).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::phase_space::canonical_omega;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    /// Column span of `a` equals column span of `b`.
    fn same_span(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
        let joint = DMatrix::from_fn(a.nrows(), a.ncols() + b.ncols(), |r, c| {
            if c < a.ncols() {
                a[(r, c)]
            } else {
                b[(r, c - a.ncols())]
            }
        });
        linalg::rank(a) == linalg::rank(b) && linalg::rank(&joint) == linalg::rank(a)
    }

    #[test]
    fn circle_system_origin() {
        let sys = gallery::example1();
        let frame = witt_artin(&sys, &DVector::zeros(4)).unwrap();
        assert_eq!(frame.dims(), (0, 0, 4, 0));
        assert!(same_span(&frame.n, &DMatrix::identity(4, 4)));
    }

    #[test]
    fn circle_system_off_origin() {
        let sys = gallery::example1();
        let frame = witt_artin(&sys, &v(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(frame.dims(), (1, 0, 2, 1));
        let e34 = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        assert!(same_span(&frame.n, &e34));
        let form = slice_symplectic_form(&sys, &frame).unwrap();
        // Orientation of the orthonormal basis is arbitrary; the form is
        // +-[[0,1],[-1,0]].
        assert!((form[(0, 1)].abs() - 1.0).abs() < 1e-12);
        assert!((form[(0, 1)] + form[(1, 0)]).abs() < 1e-12);
        assert!(form[(0, 0)].abs() < 1e-12 && form[(1, 1)].abs() < 1e-12);
    }

    #[test]
    fn trivial_group_frame() {
        let sys = gallery::saddle();
        let frame = witt_artin(&sys, &v(&[0.3, 0.1])).unwrap();
        assert_eq!(frame.dims(), (0, 0, 2, 0));
        assert_eq!(slice_momentum_map(&sys, &frame, &v(&[1.0, 2.0])).unwrap().len(), 0);
    }

    #[test]
    fn slice_form_at_origin_is_canonical() {
        let sys = gallery::example1();
        let frame = witt_artin(&sys, &DVector::zeros(4)).unwrap();
        let frame = frame
            .with_slice_basis(&sys, DMatrix::identity(4, 4))
            .unwrap();
        assert_eq!(slice_symplectic_form(&sys, &frame).unwrap(), canonical_omega(2));
    }

    #[test]
    fn empty_slice_form() {
        // so(3) acting on T*R^3 at a point with q, p independent: the slice
        // is 6 - dim T0 - dim T - dim N0.
        let sys = gallery::so3_system();
        let p = v(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let frame = witt_artin(&sys, &p).unwrap();
        let (t0, t, n, n0) = frame.dims();
        assert_eq!(t0 + t + n + n0, 6);
        let form = slice_symplectic_form(&sys, &frame).unwrap();
        assert_eq!(form.nrows(), n);
    }

    #[test]
    fn slice_momentum_examples() {
        let sys = gallery::example1();
        let frame = witt_artin(&sys, &DVector::zeros(4)).unwrap();
        assert_eq!(frame.h.dim(), 1);
        assert_eq!(slice_momentum_map(&sys, &frame, &DVector::zeros(4)).unwrap(), v(&[0.0]));
        let frame = frame.with_slice_basis(&sys, DMatrix::identity(4, 4)).unwrap();
        let w = v(&[0.3, -1.2, 0.5, 2.0]);
        let jn = slice_momentum_map(&sys, &frame, &w).unwrap();
        // The h basis vector has Frobenius norm one: eta = 1/2 generator.
        let eta = frame.h.vectors()[0].0[0];
        let expected = eta * (0.5 * (0.09 + 1.44) - 0.5 * (0.25 + 4.0));
        assert!((jn[0] - expected).abs() < 1e-12);
        // Homogeneous of degree two.
        let jn2 = slice_momentum_map(&sys, &frame, &(&w * 3.0)).unwrap();
        assert!((jn2[0] - 9.0 * jn[0]).abs() < 1e-12);
    }

    #[test]
    fn witt_artin_invariants_on_so3() {
        let sys = gallery::so3_system();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let p = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
            let frame = witt_artin(&sys, &p).unwrap();
            let omega = sys.space().omega();
            let iso = frame.t0.transpose() * omega * &frame.t0;
            assert!(linalg::max_abs(&iso) <= 1e-10);
            let pairing = frame.t0.transpose() * omega * &frame.n0;
            if pairing.nrows() > 0 {
                let smin = pairing.singular_values().min();
                assert!(smin > 1e-9);
            }
        }
    }

    #[test]
    fn descent_examples() {
        let sys = gallery::example1();
        let origin = DVector::zeros(4);
        let three = AlgebraVector::from_slice(&[3.0]);
        let w = v(&[0.4, -0.1, 0.9, 0.2]);
        assert_eq!(
            descent_residual(&sys, &origin, &three, &w, &AlgebraVector::zeros(1)).unwrap(),
            0.0
        );
        assert!(descent_residual(&sys, &origin, &three, &w, &AlgebraVector::from_slice(&[0.7])).unwrap() <= 1e-10);

        let p = v(&[1.0, 0.0, 0.0, 0.0]);
        let two = AlgebraVector::from_slice(&[2.0]);
        let r = descent_residual(&sys, &p, &two, &DVector::zeros(4), &AlgebraVector::from_slice(&[1.3])).unwrap();
        assert!(r <= 1e-10);
        let in_kernel = v(&[0.0, 0.5, -1.0, 2.0]);
        let r = descent_residual(&sys, &p, &two, &in_kernel, &AlgebraVector::from_slice(&[-0.4])).unwrap();
        assert!(r <= 1e-10);
    }

    #[test]
    fn descent_preconditions() {
        let sys = gallery::example1();
        let p = v(&[1.0, 0.0, 0.0, 0.0]);
        let eta = AlgebraVector::from_slice(&[1.0]);
        let not_velocity = AlgebraVector::from_slice(&[1.0]);
        assert!(matches!(
            descent_residual(&sys, &p, &not_velocity, &DVector::zeros(4), &eta),
            Err(Error::PreconditionViolated(_))
        ));
        let two = AlgebraVector::from_slice(&[2.0]);
        assert!(matches!(
            descent_residual(&sys, &p, &two, &v(&[1.0, 0.0, 0.0, 0.0]), &eta),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn bad_slice_basis_rejected() {
        let sys = gallery::example1();
        let p = v(&[1.0, 0.0, 0.0, 0.0]);
        let frame = witt_artin(&sys, &p).unwrap();
        // Contains T0 direction e2 only: not a complement.
        let bad = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(frame.with_slice_basis(&sys, bad).is_err());
        // Leaves the kernel.
        let bad = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(frame.with_slice_basis(&sys, bad).is_err());
        // A sheared complement is fine.
        let ok = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 2.0, -1.0, 1.0, 0.0, 0.0, 1.0]);
        assert!(frame.with_slice_basis(&sys, ok).is_ok());
    }
}
