use std::path::Path;

use holotrace::determinant::DEFAULT_WORD_BUDGET;
use holotrace::geometry::Domain;
use holotrace::systems::{Branch, MapWeightSystem, TailDescriptor};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub domain: Domain,
    pub branches: Vec<Branch>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Truncation order `N` of the determinant expansion.
    pub order: usize,
    /// Number of leading eigenvalue clusters to certify.
    pub eigs: usize,
    /// Oracle basis size per coordinate.
    pub basis: usize,
    /// Intermediate domain parameter `t ∈ (0, 1)`.
    pub tilde: f64,
    /// Largest grid size tried by the cover search.
    pub granularity: usize,
    pub quadrature: bool,
    /// Maximum number of words enumerated per trace.
    pub budget: u64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            order: 12,
            eigs: 3,
            basis: 20,
            tilde: 0.85,
            granularity: 4,
            quadrature: false,
            budget: DEFAULT_WORD_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub params: Params,
}

/// Command-line overrides of [`Params`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub order: Option<usize>,
    pub eigs: Option<usize>,
    pub basis: Option<usize>,
    pub tilde: Option<f64>,
    pub granularity: Option<usize>,
    pub quadrature: bool,
    pub budget: Option<u64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serialises")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        let p = &mut self.params;
        if let Some(v) = o.order {
            p.order = v;
        }
        if let Some(v) = o.eigs {
            p.eigs = v;
        }
        if let Some(v) = o.basis {
            p.basis = v;
        }
        if let Some(v) = o.tilde {
            p.tilde = v;
        }
        if let Some(v) = o.granularity {
            p.granularity = v;
        }
        if let Some(v) = o.budget {
            p.budget = v;
        }
        p.quadrature |= o.quadrature;
        self.validate()
    }

    /// The eigenvalue count may be zero; every other parameter must be positive.
    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.params;
        let bad = |name: &str| Err(CliError::Config(format!("parameter {name} must be positive")));
        if p.order == 0 {
            return bad("order");
        }
        if p.basis == 0 {
            return bad("basis");
        }
        if p.granularity == 0 {
            return bad("granularity");
        }
        if p.budget == 0 {
            return bad("budget");
        }
        if !(p.tilde > 0.0 && p.tilde < 1.0) {
            return Err(CliError::Config(format!("parameter tilde = {} must lie in (0, 1)", p.tilde)));
        }
        Ok(())
    }

    pub fn system(&self) -> Result<MapWeightSystem, CliError> {
        let s = &self.system;
        MapWeightSystem::new(s.domain.clone(), s.branches.clone(), s.tail.clone())
            .map_err(|e| CliError::from_module("systems", e))
    }
}
