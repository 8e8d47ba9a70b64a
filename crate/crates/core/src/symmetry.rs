//! Matrix Lie algebras acting linearly and symplectically on phase space.
//!
//! A [`LieAlgebraBasis`] holds generator matrices `A_1..A_d` together with
//! structure constants `[A_i, A_j] = sum_k c[i][j][k] A_k`. Algebra elements
//! are coordinate vectors in that basis; subalgebras are stored with bases
//! orthonormal for the Frobenius inner product `<A(x), A(y)> = tr(A(x)^T A(y))`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::phase_space::SymplecticSpace;

const HAMILTONIAN_TOL: f64 = 1e-12;
const CLOSURE_TOL: f64 = 1e-10;
const COMPACT_TOL: f64 = 1e-10;
const SUBALGEBRA_TOL: f64 = 1e-9;

/// Coordinates of a Lie algebra element in the generator basis.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraVector(pub DVector<f64>);

impl AlgebraVector {
    pub fn zeros(d: usize) -> Self {
        Self(DVector::zeros(d))
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        Self(DVector::from_row_slice(xs))
    }

    pub fn basis(d: usize, i: usize) -> Self {
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }
}

/// Structure tensor `c[i][j][k]`, flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    d: usize,
    data: Vec<f64>,
}

impl StructureConstants {
    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            data: vec![0.0; d * d * d],
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.d + j) * self.d + k]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let d = self.d;
        self.data[(i * d + j) * d + k] = v;
    }

    /// Nested `c[i][j][k]` form used by the file format.
    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.d)
            .map(|i| {
                (0..self.d)
                    .map(|j| (0..self.d).map(|k| self.get(i, j, k)).collect())
                    .collect()
            })
            .collect()
    }

    pub fn from_nested(nested: &[Vec<Vec<f64>>]) -> Result<Self> {
        let d = nested.len();
        let mut c = Self::zeros(d);
        for (i, plane) in nested.iter().enumerate() {
            check_len(d, plane.len())?;
            for (j, row) in plane.iter().enumerate() {
                check_len(d, row.len())?;
                for (k, &v) in row.iter().enumerate() {
                    c.set(i, j, k, v);
                }
            }
        }
        Ok(c)
    }
}

/// Generators of a linear Hamiltonian action with their structure constants.
#[derive(Debug, Clone)]
pub struct LieAlgebraBasis {
    phase_dim: usize,
    generators: Vec<DMatrix<f64>>,
    structure: StructureConstants,
    gram: DMatrix<f64>,
    gram_chol: DMatrix<f64>,
    gram_chol_inv_t: DMatrix<f64>,
}

impl LieAlgebraBasis {
    /// Validates the generators and derives the structure constants.
    pub fn new(generators: Vec<DMatrix<f64>>, space: &SymplecticSpace) -> Result<Self> {
        validate_generators(&generators, space)?;
        let structure = derive_structure_constants(&generators)?;
        Self::assemble(space.dim(), generators, structure)
    }

    /// Validates generators and user-supplied structure constants.
    pub fn with_structure(
        generators: Vec<DMatrix<f64>>,
        structure: StructureConstants,
        space: &SymplecticSpace,
    ) -> Result<Self> {
        validate_generators(&generators, space)?;
        check_len(generators.len(), structure.dim())?;
        let residual = closure_residual(&generators, &structure);
        if residual > CLOSURE_TOL {
            return Err(Error::NotClosedUnderBracket { residual });
        }
        let jacobi = jacobi_residual(&structure);
        if jacobi > CLOSURE_TOL {
            return Err(Error::Validation {
                check: "jacobi-identity",
                detail: format!("Jacobi residual {jacobi:.3e}"),
            });
        }
        Self::assemble(space.dim(), generators, structure)
    }

    /// The trivial algebra acting on a phase space of dimension `phase_dim`.
    pub fn trivial(phase_dim: usize) -> Self {
        Self::assemble(phase_dim, Vec::new(), StructureConstants::zeros(0))
            .expect("empty algebra is valid")
    }

    fn assemble(
        phase_dim: usize,
        generators: Vec<DMatrix<f64>>,
        structure: StructureConstants,
    ) -> Result<Self> {
        let d = generators.len();
        let gram = DMatrix::from_fn(d, d, |i, j| generators[i].dot(&generators[j]));
        let gram_chol = linalg::cholesky_lower(&gram).ok_or(Error::Validation {
            check: "generators-independent",
            detail: "Frobenius Gram matrix is singular".into(),
        })?;
        let gram_chol_inv_t = linalg::solve_lower_transpose(&gram_chol, &DMatrix::identity(d, d));
        Ok(Self {
            phase_dim,
            generators,
            structure,
            gram,
            gram_chol,
            gram_chol_inv_t,
        })
    }

    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    pub fn phase_dim(&self) -> usize {
        self.phase_dim
    }

    pub fn generators(&self) -> &[DMatrix<f64>] {
        &self.generators
    }

    pub fn structure(&self) -> &StructureConstants {
        &self.structure
    }

    /// Frobenius Gram matrix of the generators.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Coordinates in which the Frobenius inner product is Euclidean.
    pub fn to_ortho(&self, xi: &DMatrix<f64>) -> DMatrix<f64> {
        self.gram_chol.transpose() * xi
    }

    pub fn from_ortho(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        &self.gram_chol_inv_t * y
    }

    pub fn inner(&self, a: &AlgebraVector, b: &AlgebraVector) -> f64 {
        a.0.dot(&(&self.gram * &b.0))
    }

    /// `A(xi) = sum_i xi_i A_i`.
    pub fn matrix(&self, xi: &AlgebraVector) -> Result<DMatrix<f64>> {
        check_len(self.dim(), xi.len())?;
        let mut m = DMatrix::zeros(self.phase_dim, self.phase_dim);
        for (a, &c) in self.generators.iter().zip(xi.0.iter()) {
            m += a * c;
        }
        Ok(m)
    }

    /// The infinitesimal generator `xi_P(x) = A(xi) x`.
    pub fn infinitesimal_action(&self, xi: &AlgebraVector, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.phase_dim, x.len())?;
        Ok(self.matrix(xi)? * x)
    }

    /// Columns `A_i x`, one per generator.
    pub fn action_columns(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.phase_dim, self.dim());
        for (i, a) in self.generators.iter().enumerate() {
            m.set_column(i, &(a * x));
        }
        m
    }

    pub fn bracket(&self, xi: &AlgebraVector, eta: &AlgebraVector) -> AlgebraVector {
        let d = self.dim();
        let mut out = DVector::zeros(d);
        for i in 0..d {
            if xi.0[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                let w = xi.0[i] * eta.0[j];
                if w == 0.0 {
                    continue;
                }
                for k in 0..d {
                    out[k] += w * self.structure.get(i, j, k);
                }
            }
        }
        AlgebraVector(out)
    }

    /// `exp(t A(xi))`.
    pub fn group_exp(&self, xi: &AlgebraVector, t: f64) -> Result<DMatrix<f64>> {
        Ok((self.matrix(xi)? * t).exp())
    }

    /// Lie algebra of the isotropy group of `p`: the nullspace of
    /// `xi -> A(xi) p`.
    pub fn isotropy_algebra(&self, p: &DVector<f64>, space: &SymplecticSpace) -> Result<Subalgebra> {
        check_len(self.phase_dim, p.len())?;
        let m = space.whiten(&self.action_columns(p)) * &self.gram_chol_inv_t;
        let y = linalg::nullspace(&m);
        Ok(Subalgebra::from_matrix(self.from_ortho(&y)))
    }

    /// `{xi in k : [xi, h] in h}`.
    pub fn normalizer_algebra(&self, h: &Subalgebra, k: &Subalgebra) -> Result<Subalgebra> {
        for eta in h.vectors() {
            let residual = k.residual(&eta, self);
            if residual > SUBALGEBRA_TOL * self.inner(&eta, &eta).sqrt().max(1.0) {
                return Err(Error::SubalgebraNotContained { residual });
            }
        }
        let d = self.dim();
        let hk = h.dim();
        let kk = k.dim();
        if hk == 0 || kk == 0 {
            return Ok(k.clone());
        }
        // Orthogonal projector onto the complement of h, in ortho coordinates.
        let h_ortho = self.to_ortho(h.matrix());
        let proj = DMatrix::identity(d, d) - &h_ortho * h_ortho.transpose();
        let mut m = DMatrix::zeros(d * hk, kk);
        for (j, kappa) in k.vectors().iter().enumerate() {
            for (i, eta) in h.vectors().iter().enumerate() {
                let br = self.bracket(kappa, eta);
                let col = &proj * self.to_ortho(&DMatrix::from_column_slice(d, 1, br.0.as_slice()));
                m.view_mut((i * d, j), (d, 1)).copy_from(&col);
            }
        }
        let c = linalg::nullspace(&m);
        Ok(Subalgebra::from_matrix(k.matrix() * c))
    }

    /// True iff every generator is skew for `metric`: `A^T G + G A = 0`.
    pub fn compactness_certificate(&self, metric: &DMatrix<f64>) -> bool {
        self.generators.iter().all(|a| {
            let skew = a.transpose() * metric + metric * a;
            linalg::max_abs(&skew) <= COMPACT_TOL
        })
    }

    pub fn full_subalgebra(&self) -> Subalgebra {
        let d = self.dim();
        Subalgebra::from_matrix(self.from_ortho(&DMatrix::identity(d, d)))
    }
}

fn validate_generators(generators: &[DMatrix<f64>], space: &SymplecticSpace) -> Result<()> {
    let n = space.dim();
    let omega = space.omega();
    for (i, a) in generators.iter().enumerate() {
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::Validation {
                check: "generator-shape",
                detail: format!("generator {i} has shape {:?}, expected {n}x{n}", a.shape()),
            });
        }
        let defect = a.transpose() * omega + omega * a;
        let scale = linalg::max_abs(a).max(1.0) * linalg::max_abs(omega).max(1.0);
        if linalg::max_abs(&defect) > HAMILTONIAN_TOL * scale {
            return Err(Error::Validation {
                check: "generator-hamiltonian",
                detail: format!(
                    "generator {i} violates A^T Omega + Omega A = 0 (max entry {:.3e})",
                    linalg::max_abs(&defect)
                ),
            });
        }
    }
    let flat = flatten(generators, n);
    if linalg::rank(&flat) != generators.len() {
        return Err(Error::Validation {
            check: "generators-independent",
            detail: "generators are linearly dependent".into(),
        });
    }
    Ok(())
}

fn flatten(generators: &[DMatrix<f64>], n: usize) -> DMatrix<f64> {
    let mut flat = DMatrix::zeros(n * n, generators.len());
    for (i, a) in generators.iter().enumerate() {
        flat.set_column(i, &DVector::from_column_slice(a.as_slice()));
    }
    flat
}

/// Expands every commutator `[A_i, A_j]` in the generator basis by least
/// squares.
pub fn derive_structure_constants(generators: &[DMatrix<f64>]) -> Result<StructureConstants> {
    let d = generators.len();
    let mut c = StructureConstants::zeros(d);
    if d == 0 {
        return Ok(c);
    }
    let n = generators[0].nrows();
    let flat = flatten(generators, n);
    for i in 0..d {
        for j in (i + 1)..d {
            let comm = &generators[i] * &generators[j] - &generators[j] * &generators[i];
            let target = DVector::from_column_slice(comm.as_slice());
            let coeffs = linalg::lstsq(&flat, &target);
            let residual = (&flat * &coeffs - &target).norm();
            if residual > CLOSURE_TOL * target.norm().max(1.0) {
                return Err(Error::NotClosedUnderBracket { residual });
            }
            for k in 0..d {
                c.set(i, j, k, coeffs[k]);
                c.set(j, i, k, -coeffs[k]);
            }
        }
    }
    Ok(c)
}

/// Largest Frobenius residual of `[A_i, A_j] - sum_k c_ijk A_k`.
pub fn closure_residual(generators: &[DMatrix<f64>], c: &StructureConstants) -> f64 {
    let d = generators.len();
    let mut worst = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            let mut r = &generators[i] * &generators[j] - &generators[j] * &generators[i];
            for (k, ak) in generators.iter().enumerate() {
                r -= ak * c.get(i, j, k);
            }
            worst = worst.max(r.norm());
        }
    }
    worst
}

/// Largest residual of the Jacobi identity on basis triples.
pub fn jacobi_residual(c: &StructureConstants) -> f64 {
    let d = c.dim();
    let mut worst = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for out in 0..d {
                    // [[e_i,e_j],e_k] + [[e_j,e_k],e_i] + [[e_k,e_i],e_j]
                    let mut s = 0.0;
                    for m in 0..d {
                        s += c.get(i, j, m) * c.get(m, k, out)
                            + c.get(j, k, m) * c.get(m, i, out)
                            + c.get(k, i, m) * c.get(m, j, out);
                    }
                    worst = worst.max(s.abs());
                }
            }
        }
    }
    worst
}

/// A subalgebra, stored as a `d x m` matrix whose columns are orthonormal
/// for the Frobenius inner product of the parent algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct Subalgebra {
    basis: DMatrix<f64>,
}

impl Subalgebra {
    pub fn from_matrix(basis: DMatrix<f64>) -> Self {
        Self { basis }
    }

    pub fn zero(d: usize) -> Self {
        Self {
            basis: DMatrix::zeros(d, 0),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn vectors(&self) -> Vec<AlgebraVector> {
        self.basis
            .column_iter()
            .map(|c| AlgebraVector(c.into_owned()))
            .collect()
    }

    /// Orthogonal projection of `xi` onto the subalgebra.
    pub fn project(&self, xi: &AlgebraVector, algebra: &LieAlgebraBasis) -> AlgebraVector {
        let coeffs = self.basis.transpose() * (algebra.gram() * &xi.0);
        AlgebraVector(&self.basis * coeffs)
    }

    /// Frobenius norm of the component of `xi` orthogonal to the subalgebra.
    pub fn residual(&self, xi: &AlgebraVector, algebra: &LieAlgebraBasis) -> f64 {
        let r = AlgebraVector(&xi.0 - self.project(xi, algebra).0);
        algebra.inner(&r, &r).max(0.0).sqrt()
    }

    /// Largest residual of `[b_i, b_j]` outside the subalgebra.
    pub fn closure_residual(&self, algebra: &LieAlgebraBasis) -> f64 {
        let vs = self.vectors();
        let mut worst = 0.0_f64;
        for a in &vs {
            for b in &vs {
                worst = worst.max(self.residual(&algebra.bracket(a, b), algebra));
            }
        }
        worst
    }
}
