//! A symmetric Hamiltonian system: phase space, symmetry algebra, invariant
//! Hamiltonian and the induced momentum map.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::momentum::MomentumMap;
use crate::phase_space::{Poly, SymplecticSpace};
use crate::symmetry::{AlgebraVector, LieAlgebraBasis};

const INVARIANCE_SAMPLES: usize = 100;
const INVARIANCE_TOL: f64 = 1e-9;
const INVARIANCE_SEED: u64 = 0x5eed;

#[derive(Debug, Clone)]
pub struct HamiltonianSystem {
    space: SymplecticSpace,
    algebra: LieAlgebraBasis,
    hamiltonian: Poly,
    momentum: MomentumMap,
}

impl HamiltonianSystem {
    /// Builds the system and rejects Hamiltonians that are not invariant
    /// under the generators.
    pub fn new(space: SymplecticSpace, algebra: LieAlgebraBasis, hamiltonian: Poly) -> Result<Self> {
        check_len(space.dim(), hamiltonian.nvars())?;
        check_len(space.dim(), algebra.phase_dim())?;
        let worst = invariance_defect(&hamiltonian, &algebra, INVARIANCE_SAMPLES)?;
        if worst > INVARIANCE_TOL {
            return Err(Error::Validation {
                check: "hamiltonian-invariant",
                detail: format!("dh(x) . A_i x reaches {worst:.3e} (relative)"),
            });
        }
        let momentum = MomentumMap::new(&algebra, &space);
        Ok(Self {
            space,
            algebra,
            hamiltonian,
            momentum,
        })
    }

    pub fn space(&self) -> &SymplecticSpace {
        &self.space
    }

    pub fn algebra(&self) -> &LieAlgebraBasis {
        &self.algebra
    }

    pub fn hamiltonian(&self) -> &Poly {
        &self.hamiltonian
    }

    pub fn momentum(&self) -> &MomentumMap {
        &self.momentum
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Gradient of the augmented Hamiltonian `h - J_xi` at `p`.
    pub fn augmented_gradient(&self, p: &DVector<f64>, xi: &AlgebraVector) -> Result<DVector<f64>> {
        let jxi = self.momentum.along(xi, self.dim())?;
        Ok(self.hamiltonian.gradient(p)? - jxi.gradient(p)?)
    }

    /// Hessian of the augmented Hamiltonian `h - J_xi` at `p`.
    pub fn augmented_hessian(&self, p: &DVector<f64>, xi: &AlgebraVector) -> Result<DMatrix<f64>> {
        let jxi = self.momentum.along(xi, self.dim())?;
        Ok(self.hamiltonian.hessian(p)? - jxi.hessian(p)?)
    }

    /// Critical-point residual of `h - J_xi` at `p`, and its tolerance.
    pub fn velocity_residual(&self, p: &DVector<f64>, xi: &AlgebraVector) -> Result<(f64, f64)> {
        let r = self.augmented_gradient(p, xi)?.norm();
        let tol = 1e-9 * (1.0 + self.hamiltonian.gradient(p)?.norm());
        Ok((r, tol))
    }
}

/// Largest relative value of `dh(x) . A_i x` over random sample points.
pub fn invariance_defect(h: &Poly, algebra: &LieAlgebraBasis, samples: usize) -> Result<f64> {
    let n = h.nvars();
    let mut rng = ChaCha8Rng::seed_from_u64(INVARIANCE_SEED);
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let g = h.gradient(&x)?;
        for a in algebra.generators() {
            let ax = a * &x;
            let defect = g.dot(&ax).abs() / (1.0 + g.norm() * ax.norm());
            worst = worst.max(defect);
        }
    }
    Ok(worst)
}
