use std::collections::BTreeMap;
use std::fmt::Write;

use holotrace::apriori::{EigenvalueTailBound, ExpClassBound, NormBound};
use holotrace::certify::{CertifiedEigenvalue, FailedInequality};
use holotrace::determinant::{DeterminantExpansion, TraceValue};
use holotrace::geometry::{CoverPiece, Domain, EfficiencySummary};
use num_complex::Complex64;
use serde::Serialize;

/// Rows of `tail_bounds` in the determinant report.
pub const TAIL_ROWS: usize = 5;

pub trait Report: Serialize {
    fn to_text(&self) -> String;

    fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }
}

fn cx(z: Complex64) -> String {
    format!("{:+.15e} {:+.15e}i", z.re, z.im)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub n: usize,
    pub singular_value: f64,
    pub eigenvalue: f64,
    pub taylor_coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gauge: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub tilde: f64,
    pub efficiency: EfficiencySummary,
    pub class: ExpClassBound,
    pub identification: ExpClassBound,
    pub norm: NormBound,
    pub eigenvalue_bound: EigenvalueTailBound,
    pub table: Vec<BoundRow>,
    pub sweep: Vec<SweepRow>,
}

impl Report for BoundReport {
    fn to_text(&self) -> String {
        let mut o = String::new();
        let e = &self.efficiency;
        writeln!(o, "intermediate domain t = {}", self.tilde).unwrap();
        writeln!(o, "cover: {} pieces, d = {}, c = {:.12}, min log gamma = {:.12}", e.size, e.dim, e.c, e.min_gamma_log).unwrap();
        writeln!(o, "transfer norm bound: {:.12e} (coarse {:.12e})", self.norm.value, self.norm.coarse).unwrap();
        writeln!(o, "class: s_n <= {:.12e} exp(-{:.12} n^(1/{}))", self.class.gauge, self.class.c, self.class.d).unwrap();
        let b = &self.eigenvalue_bound;
        writeln!(o, "eigenvalues: |lambda_n| <= {:.12e} exp(-{:.12} n^(1/{}))", b.big_b, b.b, b.d).unwrap();
        writeln!(o).unwrap();
        writeln!(o, "{:>4}  {:>22}  {:>22}  {:>22}", "n", "s_n bound", "|lambda_n| bound", "|alpha_n| bound").unwrap();
        for r in &self.table {
            writeln!(o, "{:>4}  {:>22.12e}  {:>22.12e}  {:>22.12e}", r.n, r.singular_value, r.eigenvalue, r.taylor_coefficient).unwrap();
        }
        writeln!(o).unwrap();
        writeln!(o, "{:>6}  {:>18}  {:>22}", "t", "c", "gauge").unwrap();
        for r in &self.sweep {
            match (r.c, r.gauge) {
                (Some(c), Some(g)) => writeln!(o, "{:>6.2}  {:>18.12}  {:>22.12e}", r.t, c, g).unwrap(),
                _ => writeln!(o, "{:>6.2}  {}", r.t, r.note.as_deref().unwrap_or("infeasible")).unwrap(),
            }
        }
        o
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub n: usize,
    /// `a_n = tr(Lⁿ)/n`.
    pub value: Complex64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub n: usize,
    pub value: Complex64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRow {
    pub n: usize,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetReport {
    pub order: usize,
    pub class: ExpClassBound,
    pub traces: Vec<TraceRow>,
    pub coefficients: Vec<CoefficientRow>,
    pub tail_bounds: Vec<TailRow>,
    pub cross_check: f64,
}

impl DetReport {
    pub fn new(traces: &[TraceValue], exp: &DeterminantExpansion) -> Self {
        DetReport {
            order: exp.order,
            class: exp.class,
            traces: traces.iter().map(|t| TraceRow { n: t.n, value: t.value, radius: t.error_radius }).collect(),
            coefficients: exp
                .alpha
                .iter()
                .enumerate()
                .map(|(i, a)| CoefficientRow { n: i + 1, value: a.mid, radius: a.rad })
                .collect(),
            tail_bounds: (exp.order + 1..=exp.order + TAIL_ROWS).map(|n| TailRow { n, bound: exp.tail_bound(n) }).collect(),
            cross_check: exp.cross_check,
        }
    }
}

impl Report for DetReport {
    fn to_text(&self) -> String {
        let mut o = String::new();
        writeln!(o, "order N = {}, class c = {:.12}, gauge = {:.12e}", self.order, self.class.c, self.class.gauge).unwrap();
        writeln!(o, "recursion vs composition-sum check: {:.3e}", self.cross_check).unwrap();
        writeln!(o).unwrap();
        writeln!(o, "{:>4}  {:>47}  {:>10}  {:>47}  {:>10}", "n", "a_n", "radius", "alpha_n", "radius").unwrap();
        for (t, c) in self.traces.iter().zip(&self.coefficients) {
            writeln!(o, "{:>4}  {:>47}  {:>10.3e}  {:>47}  {:>10.3e}", t.n, cx(t.value), t.radius, cx(c.value), c.radius).unwrap();
        }
        writeln!(o).unwrap();
        writeln!(o, "{:>4}  {:>22}", "n", "|alpha_n| bound").unwrap();
        for r in &self.tail_bounds {
            writeln!(o, "{:>4}  {:>22.12e}", r.n, r.bound).unwrap();
        }
        o
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertEntry {
    /// Centre of the eigenvalue disk.
    pub center: Complex64,
    pub radius: f64,
    pub multiplicity: usize,
    pub certified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_inequality: Option<FailedInequality>,
    pub zero_center: Complex64,
    pub zero_radius: f64,
}

impl From<&CertifiedEigenvalue> for CertEntry {
    fn from(c: &CertifiedEigenvalue) -> Self {
        CertEntry {
            center: c.eigenvalue_disk.mid,
            radius: c.eigenvalue_disk.rad,
            multiplicity: c.multiplicity,
            certified: c.certified,
            failed_inequality: c.failed_inequality,
            zero_center: c.zero_center,
            zero_radius: c.zero_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyReport {
    pub order: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub significant_degree: Option<usize>,
    pub eigenvalues: Vec<CertEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CertifyReport {
    /// Every requested cluster was found and certified.
    pub fn complete(&self, requested: usize) -> bool {
        self.eigenvalues.len() == requested && self.eigenvalues.iter().all(|e| e.certified)
    }
}

impl Report for CertifyReport {
    fn to_text(&self) -> String {
        let mut o = String::new();
        writeln!(o, "order N = {}", self.order).unwrap();
        if let Some(n) = &self.note {
            writeln!(o, "warning: {n}").unwrap();
        }
        writeln!(o, "{:>3}  {:>47}  {:>10}  {:>4}  {:>9}", "#", "eigenvalue disk centre", "radius", "mult", "certified").unwrap();
        for (i, e) in self.eigenvalues.iter().enumerate() {
            writeln!(o, "{:>3}  {:>47}  {:>10.3e}  {:>4}  {:>9}", i + 1, cx(e.center), e.radius, e.multiplicity, e.certified).unwrap();
            if let Some(f) = &e.failed_inequality {
                writeln!(o, "     failed: lhs {:.6e} >= rhs {:.6e}", f.lhs, f.rhs).unwrap();
            }
        }
        o
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    pub traces: BTreeMap<String, Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub basis: usize,
    pub size: usize,
    pub eigenvalues: Vec<Complex64>,
    pub traces: BTreeMap<String, Complex64>,
    /// Spectrum with the countable tail family summed in, when known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completed: Option<SpectrumReport>,
}

fn spectrum_text(o: &mut String, eigenvalues: &[Complex64], traces: &BTreeMap<String, Complex64>) {
    writeln!(o, "{:>3}  {:>47}  {:>22}", "#", "eigenvalue", "modulus").unwrap();
    for (i, z) in eigenvalues.iter().enumerate().take(20) {
        writeln!(o, "{:>3}  {:>47}  {:>22.15e}", i + 1, cx(*z), z.norm()).unwrap();
    }
    let mut keys: Vec<&String> = traces.keys().collect();
    keys.sort_by_key(|k| k.parse::<usize>().unwrap_or(usize::MAX));
    for k in keys {
        writeln!(o, "tr(M^{k}) = {}", cx(traces[k])).unwrap();
    }
}

impl Report for OracleReport {
    fn to_text(&self) -> String {
        let mut o = String::new();
        writeln!(o, "oracle (non-rigorous), basis M = {}, matrix size {}", self.basis, self.size).unwrap();
        spectrum_text(&mut o, &self.eigenvalues, &self.traces);
        if let Some(c) = &self.completed {
            writeln!(o).unwrap();
            writeln!(o, "with tail family completed:").unwrap();
            spectrum_text(&mut o, &c.eigenvalues, &c.traces);
        }
        o
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverReport {
    pub tilde: f64,
    pub inner: Domain,
    pub pieces: Vec<CoverPiece>,
    pub efficiency: EfficiencySummary,
}

impl Report for CoverReport {
    fn to_text(&self) -> String {
        let mut o = String::new();
        let e = &self.efficiency;
        writeln!(o, "cover of t = {} domain: {} pieces, c = {:.12}", self.tilde, e.size, e.c).unwrap();
        writeln!(o, "{:>3}  {:>18}  piece", "#", "gamma").unwrap();
        for (i, p) in self.pieces.iter().enumerate() {
            writeln!(o, "{:>3}  {:>18.12}  {}", i + 1, p.gamma, serde_json::to_string(&p.domain).unwrap()).unwrap();
        }
        o
    }
}
