//! System definition files and the command implementations behind the
//! `slicecert` binary.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::certify::{self, Inertia, SearchOptions, StabilityCertificate};
use crate::dynamics::{self, ProbeOptions, ProbeReport};
use crate::error::{Error, Result};
use crate::linalg;
use crate::momentum::momentum_isotropy_algebra;
use crate::phase_space::{Monomial, Poly, SymplecticSpace};
use crate::slice;
use crate::symmetry::{AlgebraVector, LieAlgebraBasis, StructureConstants};
use crate::system::HamiltonianSystem;

pub const EXIT_STABLE: u8 = 0;
pub const EXIT_OTHER: u8 = 1;
pub const EXIT_INCONCLUSIVE: u8 = 2;
pub const EXIT_NOT_RELATIVE_EQUILIBRIUM: u8 = 3;
pub const EXIT_INVALID: u8 = 4;

/// On-disk system description. Matrices are row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SystemDefinition {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub generators: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure_constants: Option<Vec<Vec<Vec<f64>>>>,
    pub hamiltonian: Vec<Monomial>,
    pub point: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algebra_metric: Option<Vec<Vec<f64>>>,
}

/// A validated system with its base point and algebra metric.
#[derive(Debug, Clone)]
pub struct LoadedSystem {
    pub system: HamiltonianSystem,
    pub point: DVector<f64>,
    pub algebra_metric: DMatrix<f64>,
}

fn to_matrix(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse(format!("{what} must be a {n}x{n} array of arrays")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl SystemDefinition {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("definition serializes")
    }

    /// Validates every component and builds the system.
    pub fn build(&self) -> Result<LoadedSystem> {
        let n = self.dim;
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::Validation {
                check: "dim-even",
                detail: format!("phase-space dimension must be positive and even, got {n}"),
            });
        }
        let omega = match &self.omega {
            Some(rows) => to_matrix(rows, n, "omega")?,
            None => crate::phase_space::canonical_omega(n / 2),
        };
        let metric = match &self.metric {
            Some(rows) => to_matrix(rows, n, "metric")?,
            None => DMatrix::identity(n, n),
        };
        let space = SymplecticSpace::new(omega, metric)?;
        let generators = self
            .generators
            .iter()
            .enumerate()
            .map(|(i, g)| to_matrix(g, n, &format!("generators[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let d = generators.len();
        let algebra = match &self.structure_constants {
            Some(c) => LieAlgebraBasis::with_structure(generators, StructureConstants::from_nested(c)?, &space)?,
            None => LieAlgebraBasis::new(generators, &space)?,
        };
        let hamiltonian = Poly::from_monomials(n, &self.hamiltonian)?;
        let system = HamiltonianSystem::new(space, algebra, hamiltonian)?;
        if self.point.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.point.len() });
        }
        let point = DVector::from_column_slice(&self.point);
        let algebra_metric = match &self.algebra_metric {
            Some(rows) => {
                let g = to_matrix(rows, d, "algebraMetric")?;
                if linalg::max_abs(&(&g - g.transpose())) > 1e-12 * linalg::max_abs(&g).max(1.0)
                    || linalg::cholesky_lower(&g).is_none()
                {
                    return Err(Error::Validation {
                        check: "algebra-metric-positive-definite",
                        detail: "algebraMetric must be symmetric positive definite".into(),
                    });
                }
                g
            }
            None => system.algebra().gram().clone(),
        };
        Ok(LoadedSystem { system, point, algebra_metric })
    }
}

impl LoadedSystem {
    /// Definition with every optional field made explicit.
    pub fn to_definition(&self) -> SystemDefinition {
        let sys = &self.system;
        SystemDefinition {
            dim: sys.dim(),
            omega: Some(from_matrix(sys.space().omega())),
            metric: Some(from_matrix(sys.space().metric())),
            generators: sys.algebra().generators().iter().map(from_matrix).collect(),
            structure_constants: Some(sys.algebra().structure().to_nested()),
            hamiltonian: sys.hamiltonian().to_monomials(),
            point: self.point.iter().copied().collect(),
            algebra_metric: Some(from_matrix(&self.algebra_metric)),
        }
    }

    pub fn with_point(mut self, point: Option<Vec<f64>>) -> Result<Self> {
        if let Some(p) = point {
            if p.len() != self.system.dim() {
                return Err(Error::DimensionMismatch { expected: self.system.dim(), found: p.len() });
            }
            self.point = DVector::from_vec(p);
        }
        Ok(self)
    }
}

pub fn load_system_str(text: &str) -> Result<LoadedSystem> {
    SystemDefinition::from_json(text)?.build()
}

pub fn load_system(path: &Path) -> Result<LoadedSystem> {
    let text = fs::read_to_string(path)?;
    load_system_str(&text)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationReport {
    pub valid: bool,
    pub dim: usize,
    pub algebra_dim: usize,
    pub structure_constants: Vec<Vec<Vec<f64>>>,
    pub compactness_verified: bool,
}

pub fn cmd_validate(loaded: &LoadedSystem) -> ValidationReport {
    let sys = &loaded.system;
    ValidationReport {
        valid: true,
        dim: sys.dim(),
        algebra_dim: sys.algebra().dim(),
        structure_constants: sys.algebra().structure().to_nested(),
        compactness_verified: sys.algebra().compactness_certificate(sys.space().metric()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisReport {
    pub point: Vec<f64>,
    pub mu: Vec<f64>,
    pub dim_h: usize,
    pub dim_k: usize,
    pub dim_n: usize,
    /// `(dim T0, dim T, dim N, dim N0)`.
    pub witt_artin_dims: [usize; 4],
    pub compactness_verified: bool,
    /// Subalgebra bases, one algebra vector per entry.
    pub h_basis: Vec<Vec<f64>>,
    pub k_basis: Vec<Vec<f64>>,
    pub n_basis: Vec<Vec<f64>>,
    pub slice_basis: Vec<Vec<f64>>,
}

fn columns_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

pub fn cmd_analyze(loaded: &LoadedSystem) -> Result<AnalysisReport> {
    let sys = &loaded.system;
    let p = &loaded.point;
    let frame = slice::witt_artin(sys, p)?;
    let normalizer = sys.algebra().normalizer_algebra(&frame.h, &frame.k)?;
    let (t0, t, n, n0) = frame.dims();
    Ok(AnalysisReport {
        point: p.iter().copied().collect(),
        mu: frame.mu.to_vec(),
        dim_h: frame.h.dim(),
        dim_k: frame.k.dim(),
        dim_n: normalizer.dim(),
        witt_artin_dims: [t0, t, n, n0],
        compactness_verified: sys.algebra().compactness_certificate(sys.space().metric()),
        h_basis: columns_of(frame.h.matrix()),
        k_basis: columns_of(frame.k.matrix()),
        n_basis: columns_of(normalizer.matrix()),
        slice_basis: columns_of(&frame.n),
    })
}

/// Runs the certificate pipeline. With `velocity` given the Hessian is
/// evaluated at that velocity only; otherwise the family is searched.
pub fn cmd_certify(loaded: &LoadedSystem, velocity: Option<&[f64]>, seed: u64) -> Result<StabilityCertificate> {
    let sys = &loaded.system;
    let p = &loaded.point;
    let family = certify::solve_velocities(sys, p)?;
    let frame = slice::witt_artin(sys, p)?;
    let xi_perp = certify::orthogonal_velocity(&family, &loaded.algebra_metric);
    let inertia_perp: Inertia = certify::inertia(&certify::restricted_hessian(sys, p, &xi_perp, &frame)?);

    let mut cert = match velocity {
        Some(v) => {
            if v.len() != sys.algebra().dim() {
                return Err(Error::DimensionMismatch { expected: sys.algebra().dim(), found: v.len() });
            }
            let xi = AlgebraVector::from_slice(v);
            let (residual, tol) = sys.velocity_residual(p, &xi)?;
            if residual > tol {
                return Err(Error::NotRelativeEquilibrium { residual });
            }
            certify::certificate_at(sys, p, &xi, &family, &frame)?
        }
        None => {
            let mut opts = SearchOptions { seed, ..Default::default() };
            if family.dim() > 0 {
                opts.extra_starts.push(linalg::lstsq(family.h.matrix(), &(&xi_perp.0 - &family.xi1.0)));
            }
            certify::definiteness_search(sys, p, &family, &frame, &opts)?
        }
    };
    cert.inertia_at_orthogonal = Some(inertia_perp);
    cert.orthogonal_velocity = Some(xi_perp.to_vec());
    Ok(cert)
}

/// Probes stability relative to the coadjoint isotropy group of `J(p)`.
pub fn cmd_probe(loaded: &LoadedSystem, opts: &ProbeOptions) -> Result<ProbeReport> {
    let sys = &loaded.system;
    let mu = sys.momentum().value(&loaded.point)?;
    let k = momentum_isotropy_algebra(sys.algebra(), &mu);
    dynamics::stability_probe(sys, &loaded.point, &k, opts)
}

/// Writes the recorded trajectory as CSV: `t, x1..x2n, h, J1..Jd, orbitDistance`.
pub fn write_trace_csv<W: std::io::Write>(report: &ProbeReport, out: W) -> Result<()> {
    let rows = report.trace.as_deref().unwrap_or(&[]);
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    if let Some(first) = rows.first() {
        let mut header = vec!["t".to_string()];
        header.extend((1..=first.x.len()).map(|i| format!("x{i}")));
        header.push("h".into());
        header.extend((1..=first.momentum.len()).map(|i| format!("J{i}")));
        header.push("orbitDistance".into());
        w.write_record(&header).map_err(csv_err)?;
    }
    for row in rows {
        let mut rec = vec![row.t];
        rec.extend(row.x.iter());
        rec.push(row.energy);
        rec.extend(row.momentum.iter());
        rec.push(row.orbit_distance);
        w.write_record(rec.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Process exit code for a failed command.
pub fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::NotRelativeEquilibrium { .. } => EXIT_NOT_RELATIVE_EQUILIBRIUM,
        Error::Parse(_)
        | Error::Validation { .. }
        | Error::NotClosedUnderBracket { .. }
        | Error::DimensionMismatch { .. }
        | Error::Io(_) => EXIT_INVALID,
        _ => EXIT_OTHER,
    }
}

/// Process exit code for a certificate.
pub fn exit_code_for_certificate(cert: &StabilityCertificate) -> u8 {
    if cert.verdict.is_stable() {
        EXIT_STABLE
    } else {
        EXIT_INCONCLUSIVE
    }
}
