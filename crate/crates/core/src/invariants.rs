//! Invariant polynomials of a linear action.
//!
//! For a connected group acting orthogonally, averaging a polynomial over the
//! group equals the orthogonal projection onto the common kernel of the Lie
//! derivatives `f -> df(x) . A_i x`, taken in the Fischer inner product
//! `<x^a, x^b> = a! delta_ab` (which every orthogonal map preserves). The
//! projection is computed degree by degree.

use nalgebra::{DMatrix, DVector};

use crate::linalg;
use crate::phase_space::Poly;
use crate::symmetry::LieAlgebraBasis;

/// All exponent vectors of total degree `degree` in `nvars` variables.
pub fn monomials(nvars: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(prefix: &mut Vec<u32>, left: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
        if left == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=remaining).rev() {
            prefix.push(k);
            rec(prefix, left - 1, remaining - k, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if nvars == 0 {
        if degree == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(&mut Vec::with_capacity(nvars), nvars, degree, &mut out);
    out
}

/// `x -> df(x) . (A x)`.
pub fn lie_derivative(f: &Poly, a: &DMatrix<f64>) -> Poly {
    let n = f.nvars();
    let mut out = Poly::zero(n);
    for i in 0..n {
        let di = f.partial(i);
        if di.is_zero() {
            continue;
        }
        let mut row = Poly::zero(n);
        for j in 0..n {
            if a[(i, j)] != 0.0 {
                row = row.add(&Poly::var(n, j).scale(a[(i, j)]));
            }
        }
        out = out.add(&di.mul(&row));
    }
    out
}

fn fischer_weight(e: &[u32]) -> f64 {
    e.iter()
        .map(|&k| (1..=k).map(f64::from).product::<f64>())
        .product::<f64>()
        .sqrt()
}

/// Fischer-orthonormal basis of the invariant homogeneous polynomials of the
/// given degree, as a matrix over `monomials(nvars, degree)` in weighted
/// coordinates `b_a = coeff_a * sqrt(a!)`.
fn invariant_coordinates(algebra: &LieAlgebraBasis, degree: u32) -> (Vec<Vec<u32>>, DMatrix<f64>) {
    let n = algebra.phase_dim();
    let basis = monomials(n, degree);
    let index: std::collections::HashMap<&Vec<u32>, usize> =
        basis.iter().enumerate().map(|(i, e)| (e, i)).collect();
    let m = basis.len();
    let weights: Vec<f64> = basis.iter().map(|e| fischer_weight(e)).collect();
    let d = algebra.dim();
    let mut stacked = DMatrix::zeros(d * m, m);
    for (g, a) in algebra.generators().iter().enumerate() {
        for (col, e) in basis.iter().enumerate() {
            let mut mono = Poly::zero(n);
            mono.add_term(e.clone(), 1.0);
            for (img, c) in lie_derivative(&mono, a).terms() {
                let row = index[img];
                stacked[(g * m + row, col)] = c * weights[row] / weights[col];
            }
        }
    }
    (basis, linalg::nullspace(&stacked))
}

/// Basis of invariant homogeneous polynomials of the given degree.
pub fn invariant_basis(algebra: &LieAlgebraBasis, degree: u32) -> Vec<Poly> {
    let n = algebra.phase_dim();
    let (basis, q) = invariant_coordinates(algebra, degree);
    q.column_iter()
        .map(|col| {
            let mut p = Poly::zero(n);
            for (e, &b) in basis.iter().zip(col.iter()) {
                if b.abs() > 1e-14 {
                    p.add_term(e.clone(), b / fischer_weight(e));
                }
            }
            p
        })
        .collect()
}

/// Projection of `f` onto the invariant polynomials (the group average for
/// orthogonal actions).
pub fn reynolds_project(f: &Poly, algebra: &LieAlgebraBasis) -> Poly {
    let n = f.nvars();
    let mut out = Poly::zero(n);
    for degree in 0..=f.degree() {
        let (basis, q) = invariant_coordinates(algebra, degree);
        let b = DVector::from_iterator(
            basis.len(),
            basis.iter().map(|e| {
                f.terms()
                    .find(|(k, _)| *k == e)
                    .map(|(_, c)| c * fischer_weight(e))
                    .unwrap_or(0.0)
            }),
        );
        let proj = &q * (q.transpose() * b);
        for (e, &v) in basis.iter().zip(proj.iter()) {
            if v != 0.0 {
                out.add_term(e.clone(), v / fischer_weight(e));
            }
        }
    }
    out
}
