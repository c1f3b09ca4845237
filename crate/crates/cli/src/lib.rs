//! Configuration parsing, pipeline orchestration and report emission.

pub mod config;
pub mod report;

use std::collections::BTreeMap;

use holotrace::apriori::{self, AprioriError};
use holotrace::certify::{self, CertifyError};
use holotrace::determinant::{self, DeterminantError};
use holotrace::geometry::{self, GeometryError};
use holotrace::oracle::{self, OracleError};
use holotrace::systems::SystemError;
use num_complex::Complex64;
use thiserror::Error;

pub use config::{Overrides, Params, RunConfig, SystemConfig};
pub use report::*;

/// Values of `t` tabulated by [`cmd_bound`].
pub const TILDE_SWEEP: [f64; 8] = [0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];
/// Rows of the per-`n` bound table.
pub const BOUND_TABLE_ROWS: usize = 20;
/// Highest trace power reported by the oracle.
pub const ORACLE_TRACES: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{module}: {message}")]
    Containment { module: &'static str, message: String },
    #[error("{module}: {message}")]
    Budget { module: &'static str, message: String },
    #[error("{module}: {message}")]
    Module { module: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Containment,
    Budget,
    Other,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Containment { .. } => 2,
            CliError::Budget { .. } => 4,
            CliError::Module { .. } => 1,
        }
    }

    pub fn from_module<E: Classify>(module: &'static str, e: E) -> Self {
        let message = e.to_string();
        match e.kind() {
            ErrorKind::Config => CliError::Config(format!("{module}: {message}")),
            ErrorKind::Containment => CliError::Containment { module, message },
            ErrorKind::Budget => CliError::Budget { module, message },
            ErrorKind::Other => CliError::Module { module, message },
        }
    }
}

/// Maps library errors onto exit-status classes.
pub trait Classify: std::fmt::Display {
    fn kind(&self) -> ErrorKind;
}

impl Classify for GeometryError {
    fn kind(&self) -> ErrorKind {
        match self {
            GeometryError::NotCompactlyContained(_) => ErrorKind::Containment,
            GeometryError::SearchFailure { .. } => ErrorKind::Other,
            _ => ErrorKind::Config,
        }
    }
}

impl Classify for SystemError {
    fn kind(&self) -> ErrorKind {
        match self {
            SystemError::NotCompactlyContained { .. } => ErrorKind::Containment,
            SystemError::InvalidSystem(_) | SystemError::InvalidWord(_) => ErrorKind::Config,
            SystemError::Geometry(g) => g.kind(),
            _ => ErrorKind::Other,
        }
    }
}

impl Classify for AprioriError {
    fn kind(&self) -> ErrorKind {
        match self {
            AprioriError::NotCompactlyContained { .. } | AprioriError::Configuration(_) => ErrorKind::Containment,
            AprioriError::Domain(_) | AprioriError::DimensionMismatch(..) | AprioriError::DegenerateScaling { .. } => {
                ErrorKind::Config
            }
            AprioriError::System(e) => e.kind(),
            AprioriError::Geometry(e) => e.kind(),
        }
    }
}

impl Classify for DeterminantError {
    fn kind(&self) -> ErrorKind {
        match self {
            DeterminantError::Budget { .. } => ErrorKind::Budget,
            DeterminantError::System(e) => e.kind(),
            DeterminantError::Word { source, .. } => source.kind(),
            _ => ErrorKind::Other,
        }
    }
}

impl Classify for CertifyError {
    fn kind(&self) -> ErrorKind {
        match self {
            CertifyError::Determinant(e) => e.kind(),
            CertifyError::Precondition(_) => ErrorKind::Config,
            _ => ErrorKind::Other,
        }
    }
}

impl Classify for OracleError {
    fn kind(&self) -> ErrorKind {
        match self {
            OracleError::UnsupportedDomain | OracleError::EmptyBasis => ErrorKind::Config,
            _ => ErrorKind::Other,
        }
    }
}

fn class_of(cfg: &RunConfig, s: &holotrace::systems::MapWeightSystem) -> Result<apriori::TransferClass, CliError> {
    let p = &cfg.params;
    apriori::system_class(s, p.tilde, p.granularity, p.quadrature)
        .map(|(tc, _)| tc)
        .map_err(|e| CliError::from_module("apriori", e))
}

pub fn cmd_bound(cfg: &RunConfig) -> Result<BoundReport, CliError> {
    let s = cfg.system()?;
    let p = &cfg.params;
    let (tc, cover) = apriori::system_class(&s, p.tilde, p.granularity, p.quadrature)
        .map_err(|e| CliError::from_module("apriori", e))?;
    let efficiency = geometry::cover_efficiency(&cover).map_err(|e| CliError::from_module("geometry", e))?;
    let eigenvalue_bound = apriori::eigenvalue_bound(&tc.class);
    let table = (1..=BOUND_TABLE_ROWS)
        .map(|n| BoundRow {
            n,
            singular_value: tc.class.singular_value_bound(n),
            eigenvalue: eigenvalue_bound.at(n),
            taylor_coefficient: apriori::taylor_coeff_bound(&tc.class, n),
        })
        .collect();
    let sweep = TILDE_SWEEP
        .iter()
        .map(|&t| match apriori::system_class(&s, t, p.granularity, p.quadrature) {
            Ok((c, _)) => SweepRow { t, c: Some(c.class.c), gauge: Some(c.class.gauge), note: None },
            Err(e) => SweepRow { t, c: None, gauge: None, note: Some(e.to_string()) },
        })
        .collect();
    Ok(BoundReport {
        tilde: p.tilde,
        efficiency,
        class: tc.class,
        identification: tc.identification,
        norm: tc.norm,
        eigenvalue_bound,
        table,
        sweep,
    })
}

fn check_budget(cfg: &RunConfig, s: &holotrace::systems::MapWeightSystem) -> Result<(), CliError> {
    let p = &cfg.params;
    let max_feasible = determinant::max_feasible_order(s.len(), p.budget);
    if p.order > max_feasible {
        return Err(CliError::from_module(
            "determinant",
            DeterminantError::Budget { branches: s.len(), n: p.order, budget: p.budget, max_feasible },
        ));
    }
    Ok(())
}

pub fn cmd_det(cfg: &RunConfig) -> Result<DetReport, CliError> {
    let s = cfg.system()?;
    check_budget(cfg, &s)?;
    let tc = class_of(cfg, &s)?;
    let (traces, exp) = expansion(cfg, &s, tc.class)?;
    Ok(DetReport::new(&traces, &exp))
}

fn expansion(
    cfg: &RunConfig,
    s: &holotrace::systems::MapWeightSystem,
    class: apriori::ExpClassBound,
) -> Result<(Vec<determinant::TraceValue>, determinant::DeterminantExpansion), CliError> {
    let traces = determinant::ruelle_traces(s, cfg.params.order, cfg.params.budget)
        .map_err(|e| CliError::from_module("determinant", e))?;
    let exp = determinant::det_coefficients(&traces, class).map_err(|e| CliError::from_module("determinant", e))?;
    Ok((traces, exp))
}

fn certify_expansion(exp: &determinant::DeterminantExpansion, eigs: usize) -> Result<CertifyReport, CliError> {
    let degree = certify::significant_degree(exp);
    let note = (degree < exp.order).then(|| {
        format!("coefficients above degree {degree} are numerically negligible; comparison polynomial degree reduced")
    });
    match certify::certify_leading(exp, eigs) {
        Ok(list) => Ok(CertifyReport {
            order: exp.order,
            significant_degree: Some(degree),
            eigenvalues: list.iter().map(CertEntry::from).collect(),
            note,
        }),
        Err(CertifyError::NoRoots) => Ok(CertifyReport {
            order: exp.order,
            significant_degree: Some(degree),
            eigenvalues: Vec::new(),
            note: Some("truncated determinant has no roots".into()),
        }),
        Err(e) => Err(CliError::from_module("certify", e)),
    }
}

pub fn cmd_certify(cfg: &RunConfig) -> Result<CertifyReport, CliError> {
    cfg.system()?;
    if cfg.params.eigs == 0 {
        return Ok(CertifyReport { order: cfg.params.order, significant_degree: None, eigenvalues: Vec::new(), note: None });
    }
    cmd_det_certify(cfg).map(|(_, c)| c)
}

/// Determinant and certification reports from a single expansion.
pub fn cmd_det_certify(cfg: &RunConfig) -> Result<(DetReport, CertifyReport), CliError> {
    let s = cfg.system()?;
    check_budget(cfg, &s)?;
    let tc = class_of(cfg, &s)?;
    let (traces, exp) = expansion(cfg, &s, tc.class)?;
    Ok((DetReport::new(&traces, &exp), certify_expansion(&exp, cfg.params.eigs)?))
}

fn spectrum_report(mx: &oracle::GalerkinMatrix) -> Result<SpectrumReport, CliError> {
    let eigenvalues = oracle::oracle_eigenvalues(mx).map_err(|e| CliError::from_module("oracle", e))?;
    let traces: BTreeMap<String, Complex64> =
        (1..=ORACLE_TRACES).map(|n| (n.to_string(), oracle::oracle_traces(mx, n))).collect();
    Ok(SpectrumReport { eigenvalues, traces })
}

pub fn cmd_oracle(cfg: &RunConfig) -> Result<OracleReport, CliError> {
    let s = cfg.system()?;
    let m = cfg.params.basis;
    let mx = oracle::galerkin_matrix(&s, m).map_err(|e| CliError::from_module("oracle", e))?;
    let main = spectrum_report(&mx)?;
    let completed = match oracle::galerkin_matrix_completed(&s, m) {
        Ok(full) => Some(spectrum_report(&full)?),
        Err(OracleError::NoTailFamily) => None,
        Err(e) => return Err(CliError::from_module("oracle", e)),
    };
    Ok(OracleReport { basis: m, size: mx.size(), eigenvalues: main.eigenvalues, traces: main.traces, completed })
}

pub fn cmd_cover(cfg: &RunConfig) -> Result<CoverReport, CliError> {
    let s = cfg.system()?;
    let p = &cfg.params;
    let tilde = apriori::intermediate_domain(s.domain(), p.tilde).map_err(|e| CliError::from_module("apriori", e))?;
    let cover = geometry::auto_cover(s.domain(), &tilde, p.granularity)
        .map_err(|e| CliError::from_module("geometry", e))?;
    let efficiency = geometry::cover_efficiency(&cover).map_err(|e| CliError::from_module("geometry", e))?;
    Ok(CoverReport { tilde: p.tilde, inner: tilde, pieces: cover.pieces, efficiency })
}
