//! Symplectic vector spaces and exact polynomial observables.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg;

/// Coefficients with magnitude at or below this are treated as exact zeros.
pub const COEFF_DEDUP: f64 = 1e-300;

/// The phase space R^{2n} with symplectic form `w(u, v) = u^T Omega v` and a
/// reference inner product `<u, v> = u^T G v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticSpace {
    omega: DMatrix<f64>,
    metric: DMatrix<f64>,
    metric_chol: DMatrix<f64>,
    poisson: DMatrix<f64>,
}

impl SymplecticSpace {
    /// Canonical space with `Omega` built from `dx_1^dy_1 + ... + dx_n^dy_n`
    /// in the coordinate order `(x_1, y_1, x_2, y_2, ...)` and identity metric.
    pub fn canonical(dof: usize) -> Self {
        Self::new(canonical_omega(dof), DMatrix::identity(2 * dof, 2 * dof))
            .expect("canonical data is valid")
    }

    pub fn new(omega: DMatrix<f64>, metric: DMatrix<f64>) -> Result<Self> {
        let dim = omega.nrows();
        if dim == 0 || !dim.is_multiple_of(2) || omega.ncols() != dim {
            return Err(Error::Validation {
                check: "omega-shape",
                detail: format!("Omega must be square of even positive size, got {:?}", omega.shape()),
            });
        }
        check_len(dim, metric.nrows())?;
        check_len(dim, metric.ncols())?;
        let scale = linalg::max_abs(&omega).max(1.0);
        if linalg::max_abs(&(&omega + omega.transpose())) > 1e-12 * scale {
            return Err(Error::Validation {
                check: "omega-antisymmetric",
                detail: "Omega + Omega^T is not zero".into(),
            });
        }
        let det = omega.determinant();
        if det.abs() <= 1e-12 * scale.powi(dim as i32) {
            return Err(Error::Validation {
                check: "omega-invertible",
                detail: format!("det(Omega) = {det:.3e}"),
            });
        }
        let mscale = linalg::max_abs(&metric).max(1.0);
        if linalg::max_abs(&(&metric - metric.transpose())) > 1e-12 * mscale {
            return Err(Error::Validation {
                check: "metric-symmetric",
                detail: "metric is not symmetric".into(),
            });
        }
        let (eigs, _) = linalg::sym_eigen(&metric);
        if eigs[0] <= 0.0 {
            return Err(Error::Validation {
                check: "metric-positive-definite",
                detail: format!("smallest metric eigenvalue {:.3e}", eigs[0]),
            });
        }
        let metric_chol = linalg::cholesky_lower(&metric).ok_or(Error::Validation {
            check: "metric-positive-definite",
            detail: "Cholesky factorization failed".into(),
        })?;
        let poisson = omega
            .transpose()
            .try_inverse()
            .ok_or(Error::Validation {
                check: "omega-invertible",
                detail: "Omega^T could not be inverted".into(),
            })?;
        Ok(Self {
            omega,
            metric,
            metric_chol,
            poisson,
        })
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    /// Lower Cholesky factor `L` with `G = L L^T`.
    pub fn metric_chol(&self) -> &DMatrix<f64> {
        &self.metric_chol
    }

    /// `(Omega^T)^{-1}`, mapping `dh` to the Hamiltonian vector field.
    pub fn poisson(&self) -> &DMatrix<f64> {
        &self.poisson
    }

    pub fn symplectic_form(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(&(&self.omega * v))
    }

    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(&(&self.metric * v))
    }

    pub fn norm(&self, u: &DVector<f64>) -> f64 {
        self.inner(u, u).max(0.0).sqrt()
    }

    /// Whitened coordinates `w = L^T v`, in which the metric is Euclidean.
    pub fn whiten(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        self.metric_chol.transpose() * v
    }

    /// Inverse of [`Self::whiten`].
    pub fn unwhiten(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        linalg::solve_lower_transpose(&self.metric_chol, w)
    }

    /// Re-expresses covector rows (acting on ambient vectors) as rows acting on
    /// whitened coordinates.
    pub fn whiten_rows(&self, rows: &DMatrix<f64>) -> DMatrix<f64> {
        linalg::solve_lower(&self.metric_chol, &rows.transpose()).transpose()
    }
}

/// Block-diagonal matrix of `dx_i ^ dy_i` in `(x_1, y_1, ...)` order.
pub fn canonical_omega(dof: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * dof, 2 * dof);
    for i in 0..dof {
        m[(2 * i, 2 * i + 1)] = 1.0;
        m[(2 * i + 1, 2 * i)] = -1.0;
    }
    m
}

/// One `{exponents, coeff}` record of the serialized polynomial format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

/// Sparse multivariate polynomial over a fixed number of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    /// The coordinate function `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, 1.0);
        p
    }

    pub fn from_monomials(nvars: usize, monomials: &[Monomial]) -> Result<Self> {
        let mut p = Self::zero(nvars);
        for m in monomials {
            check_len(nvars, m.exponents.len())?;
            p.add_term(m.exponents.clone(), m.coeff);
        }
        Ok(p)
    }

    /// Quadratic form `x^T S x` for a square matrix `S`.
    pub fn quadratic_form(s: &DMatrix<f64>) -> Self {
        let n = s.nrows();
        let mut p = Self::zero(n);
        for i in 0..n {
            for j in i..n {
                let c = if i == j { s[(i, i)] } else { s[(i, j)] + s[(j, i)] };
                let mut e = vec![0; n];
                e[i] += 1;
                e[j] += 1;
                p.add_term(e, c);
            }
        }
        p
    }

    /// Adds `coeff * x^exponents`, collecting like terms.
    pub fn add_term(&mut self, exponents: Vec<u32>, coeff: f64) {
        debug_assert_eq!(exponents.len(), self.nvars);
        let entry = self.terms.entry(exponents.clone()).or_insert(0.0);
        *entry += coeff;
        if entry.abs() <= COEFF_DEDUP {
            self.terms.remove(&exponents);
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, f64)> {
        self.terms.iter().map(|(e, c)| (e, *c))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn to_monomials(&self) -> Vec<Monomial> {
        self.terms
            .iter()
            .map(|(e, c)| Monomial {
                exponents: e.clone(),
                coeff: *c,
            })
            .collect()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            p.add_term(e.clone(), c * s);
        }
        p
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.nvars, other.nvars, "polynomial variable counts differ");
        let mut p = self.clone();
        for (e, c) in &other.terms {
            p.add_term(e.clone(), *c);
        }
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.nvars, other.nvars, "polynomial variable counts differ");
        let mut p = Self::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                p.add_term(e, ca * cb);
            }
        }
        p
    }

    /// Exact partial derivative with respect to variable `i`.
    pub fn partial(&self, i: usize) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut d = e.clone();
                d[i] -= 1;
                p.add_term(d, c * e[i] as f64);
            }
        }
        p
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<f64> {
        check_len(self.nvars, x.len())?;
        Ok(self.terms.iter().map(|(e, c)| c * monomial_value(e, x)).sum())
    }

    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.nvars, x.len())?;
        let mut g = DVector::zeros(self.nvars);
        for (e, c) in &self.terms {
            for i in 0..self.nvars {
                if e[i] == 0 {
                    continue;
                }
                let mut v = c * e[i] as f64;
                for (j, &ej) in e.iter().enumerate() {
                    let pow = if j == i { ej - 1 } else { ej };
                    v *= x[j].powi(pow as i32);
                }
                g[i] += v;
            }
        }
        Ok(g)
    }

    /// Exact Hessian; the upper triangle is computed and mirrored, so the
    /// result is symmetric bit for bit.
    pub fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_len(self.nvars, x.len())?;
        let n = self.nvars;
        let mut h = DMatrix::zeros(n, n);
        let mut d = vec![0u32; n];
        for (e, c) in &self.terms {
            for i in 0..n {
                for j in i..n {
                    let factor = if i == j {
                        if e[i] < 2 {
                            continue;
                        }
                        (e[i] * (e[i] - 1)) as f64
                    } else {
                        if e[i] == 0 || e[j] == 0 {
                            continue;
                        }
                        (e[i] * e[j]) as f64
                    };
                    d.copy_from_slice(e);
                    d[i] -= 1;
                    d[j] -= 1;
                    h[(i, j)] += c * factor * monomial_value(&d, x);
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                h[(i, j)] = h[(j, i)];
            }
        }
        Ok(h)
    }
}

fn monomial_value(e: &[u32], x: &DVector<f64>) -> f64 {
    e.iter()
        .zip(x.iter())
        .filter(|(&k, _)| k > 0)
        .map(|(&k, &xi)| xi.powi(k as i32))
        .product()
}
