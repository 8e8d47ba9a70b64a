//! Quadratic momentum maps of linear Hamiltonian actions and the coadjoint
//! action on the dual algebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Result};
use crate::linalg;
use crate::phase_space::{Poly, SymplecticSpace};
use crate::symmetry::{AlgebraVector, LieAlgebraBasis, Subalgebra};

/// A point of the dual algebra, in the basis dual to the generators.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumValue(pub DVector<f64>);

impl MomentumValue {
    pub fn zeros(d: usize) -> Self {
        Self(DVector::zeros(d))
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }

    /// Pairing `<mu, xi>`.
    pub fn pair(&self, xi: &AlgebraVector) -> f64 {
        self.0.dot(&xi.0)
    }
}

/// `J_i(x) = -1/2 x^T Omega A_i x`, the zero-constant solution of
/// `dJ_i(x) v = w(A_i x, v)`.
pub fn momentum_component(generator: &DMatrix<f64>, space: &SymplecticSpace) -> Poly {
    let s = space.omega() * generator;
    let sym = (&s + s.transpose()) * -0.25;
    Poly::quadratic_form(&sym)
}

/// The full momentum map `J : P -> g*`, one quadratic polynomial per generator.
#[derive(Debug, Clone)]
pub struct MomentumMap {
    components: Vec<Poly>,
}

impl MomentumMap {
    pub fn new(algebra: &LieAlgebraBasis, space: &SymplecticSpace) -> Self {
        let components = algebra
            .generators()
            .iter()
            .map(|a| momentum_component(a, space))
            .collect();
        Self { components }
    }

    pub fn components(&self) -> &[Poly] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<MomentumValue> {
        let vals = self
            .components
            .iter()
            .map(|j| j.eval(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(MomentumValue(DVector::from_vec(vals)))
    }

    /// `J_xi = <J, xi>` as a polynomial.
    pub fn along(&self, xi: &AlgebraVector, nvars: usize) -> Result<Poly> {
        check_len(self.dim(), xi.len())?;
        let mut p = Poly::zero(nvars);
        for (j, &c) in self.components.iter().zip(xi.0.iter()) {
            if c != 0.0 {
                p = p.add(&j.scale(c));
            }
        }
        Ok(p)
    }

    /// `dJ(x)` as a `d x 2n` matrix of gradient rows.
    pub fn differential(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.dim(), x.len());
        for (i, j) in self.components.iter().enumerate() {
            m.set_row(i, &j.gradient(x)?.transpose());
        }
        Ok(m)
    }

    /// Metric-orthonormal basis (columns) of `ker dJ(p)`.
    pub fn kernel_basis(&self, p: &DVector<f64>, space: &SymplecticSpace) -> Result<DMatrix<f64>> {
        check_len(space.dim(), p.len())?;
        let rows = space.whiten_rows(&self.differential(p)?);
        Ok(space.unwhiten(&linalg::nullspace(&rows)))
    }
}

/// Matrix of `mu -> ad*_eta mu` with `<ad*_eta mu, xi> = -<mu, [eta, xi]>`.
pub fn ad_star_matrix(algebra: &LieAlgebraBasis, eta: &AlgebraVector) -> DMatrix<f64> {
    let d = algebra.dim();
    let c = algebra.structure();
    DMatrix::from_fn(d, d, |j, k| {
        -(0..d).map(|i| eta.0[i] * c.get(i, j, k)).sum::<f64>()
    })
}

pub fn ad_star(algebra: &LieAlgebraBasis, eta: &AlgebraVector, mu: &MomentumValue) -> MomentumValue {
    MomentumValue(ad_star_matrix(algebra, eta) * &mu.0)
}

/// Coadjoint isotropy algebra: the nullspace of `eta -> ad*_eta mu`.
pub fn momentum_isotropy_algebra(algebra: &LieAlgebraBasis, mu: &MomentumValue) -> Subalgebra {
    let d = algebra.dim();
    let c = algebra.structure();
    // Column i is ad*_{e_i} mu.
    let m = DMatrix::from_fn(d, d, |j, i| {
        -(0..d).map(|k| mu.0[k] * c.get(i, j, k)).sum::<f64>()
    });
    let y = linalg::nullspace(&(m * algebra.from_ortho(&DMatrix::identity(d, d))));
    Subalgebra::from_matrix(algebra.from_ortho(&y))
}

/// `Coad_{exp(t eta)} mu`, the time-`t` solution of `mu' = ad*_eta mu`.
pub fn coadjoint_transport(
    algebra: &LieAlgebraBasis,
    eta: &AlgebraVector,
    t: f64,
    mu: &MomentumValue,
) -> MomentumValue {
    if t == 0.0 || mu.0.is_empty() {
        return mu.clone();
    }
    MomentumValue((ad_star_matrix(algebra, eta) * t).exp() * &mu.0)
}

/// `|J(exp(t A(eta)) x) - Coad_{exp(t eta)} J(x)|`.
pub fn equivariance_residual(
    algebra: &LieAlgebraBasis,
    momentum: &MomentumMap,
    x: &DVector<f64>,
    eta: &AlgebraVector,
    t: f64,
) -> Result<f64> {
    if t == 0.0 || eta.0.iter().all(|&v| v == 0.0) {
        check_len(algebra.dim(), eta.len())?;
        return Ok(0.0);
    }
    let gx = algebra.group_exp(eta, t)? * x;
    let lhs = momentum.value(&gx)?;
    let rhs = coadjoint_transport(algebra, eta, t, &momentum.value(x)?);
    Ok((lhs.0 - rhs.0).norm())
}
