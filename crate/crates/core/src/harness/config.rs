//! Sweep configuration, read from TOML.
//!
//! ```toml
//! [problem]
//! case = "peak"            # or "patch-<m>": random polynomial of degree m
//!
//! [domain]
//! center = [0.0, 0.0]
//! radius = 1.5
//!
//! [discretization]
//! n_ladder = [1000, 3000, 10000, 30000]   # or h_ladder = [...]
//! seed = 1
//!
//! [refinement]
//! presets = ["uniform-2", "c2"]
//! # explicit zones are appended as an extra spec:
//! # zones = [[0.2, 6], [0.4, 4]]
//! # default_order = 2
//! # source = [0.5, 0.5]
//!
//! [basis]
//! k = 3
//!
//! [solver]
//! tol = 1e-10
//! threads = 1
//!
//! [sweep]
//! repeats = 5
//! ```

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{MonomialBasis, PhsBasis};
use crate::error::HarnessError;
use crate::geometry::{Domain, FillOptions};
use crate::pde::{peak, peak_laplacian, polynomial_case, Polynomial, PoissonProblem, SolverMethod, SolverOptions, Spacing};
use crate::refinement::{preset, RadialZoneSpec, PEAK_CENTER};

pub const DEFAULT_PRESETS: [&str; 6] = ["uniform-2", "uniform-4", "uniform-6", "c1", "c2", "c3"];
pub const DEFAULT_LADDER: [usize; 4] = [1_000, 3_000, 10_000, 30_000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemSection,
    pub domain: DomainSection,
    pub discretization: DiscretizationSection,
    pub refinement: RefinementSection,
    pub basis: BasisSection,
    pub solver: SolverSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub case: String,
    /// Seed of the random polynomial for `patch-<m>` cases.
    pub seed: u64,
}

impl Default for ProblemSection {
    fn default() -> Self {
        ProblemSection {
            case: "peak".into(),
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Default for DomainSection {
    fn default() -> Self {
        DomainSection {
            center: vec![0.0, 0.0],
            radius: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationSection {
    pub n_ladder: Option<Vec<usize>>,
    pub h_ladder: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub candidates: usize,
}

impl Default for DiscretizationSection {
    fn default() -> Self {
        DiscretizationSection {
            n_ladder: None,
            h_ladder: None,
            seed: None,
            seeds: None,
            candidates: FillOptions::default().candidates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RefinementSection {
    pub presets: Option<Vec<String>>,
    pub name: Option<String>,
    pub zones: Option<Vec<(f64, u32)>>,
    pub default_order: Option<u32>,
    pub source: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisSection {
    pub k: u32,
}

impl Default for BasisSection {
    fn default() -> Self {
        BasisSection { k: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol: f64,
    pub threads: usize,
    pub method: SolverMethod,
    pub direct_limit: usize,
    pub max_iterations: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverSection {
            tol: d.tol,
            threads: d.threads,
            method: d.method,
            direct_limit: d.direct_limit,
            max_iterations: d.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub repeats: usize,
    /// Smallest N entering the rate fits.
    pub fit_min_n: usize,
    /// Run cells concurrently; timings are then not comparable.
    pub parallel_cells: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            repeats: 5,
            fit_min_n: 4_000,
            parallel_cells: false,
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: Config = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.domain()?;
        self.problem()?;
        self.order_specs()?;
        self.phs()?;
        if self.sweep.repeats == 0 {
            return Err(HarnessError::Config("sweep.repeats must be at least 1".into()));
        }
        if !(self.solver.tol > 0.0) {
            return Err(HarnessError::Config("solver.tol must be positive".into()));
        }
        if self.discretization.n_ladder.is_some() && self.discretization.h_ladder.is_some() {
            return Err(HarnessError::Config("give either n_ladder or h_ladder, not both".into()));
        }
        if self.ladder().is_empty() {
            return Err(HarnessError::Config("empty ladder".into()));
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain, HarnessError> {
        Domain::ball(self.domain.center.clone(), self.domain.radius).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn phs(&self) -> Result<PhsBasis, HarnessError> {
        PhsBasis::new(self.basis.k).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn problem(&self) -> Result<PoissonProblem, HarnessError> {
        let domain = self.domain()?;
        let case = self.problem.case.as_str();
        if case == "peak" {
            let exact: crate::pde::ScalarField = Arc::new(peak);
            return Ok(PoissonProblem {
                name: "peak".into(),
                domain,
                rhs: Arc::new(peak_laplacian),
                dirichlet: exact.clone(),
                exact: Some(exact),
            });
        }
        let degree = case
            .strip_prefix("patch-")
            .and_then(|m| m.parse::<u32>().ok())
            .ok_or_else(|| HarnessError::Config(format!("unknown problem case '{case}'")))?;
        let mut problem = polynomial_case(domain.clone(), random_polynomial(degree, domain.dim(), self.problem.seed));
        problem.name = case.to_string();
        Ok(problem)
    }

    pub fn ladder(&self) -> Vec<Spacing> {
        match (&self.discretization.n_ladder, &self.discretization.h_ladder) {
            (_, Some(hs)) => hs.iter().map(|&h| Spacing::H(h)).collect(),
            (Some(ns), None) => ns.iter().map(|&n| Spacing::Count(n)).collect(),
            (None, None) => DEFAULT_LADDER.iter().map(|&n| Spacing::Count(n)).collect(),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        match (&self.discretization.seeds, self.discretization.seed) {
            (Some(s), _) => s.clone(),
            (None, Some(s)) => vec![s],
            (None, None) => vec![1],
        }
    }

    pub fn order_specs(&self) -> Result<Vec<RadialZoneSpec>, HarnessError> {
        let r = &self.refinement;
        let mut specs = Vec::new();
        let names: Vec<String> = match (&r.presets, &r.zones) {
            (Some(p), _) => p.clone(),
            (None, Some(_)) => Vec::new(),
            (None, None) => DEFAULT_PRESETS.iter().map(|s| s.to_string()).collect(),
        };
        for name in names {
            specs.push(preset(&name).map_err(|e| HarnessError::Config(e.to_string()))?);
        }
        if let Some(zones) = &r.zones {
            let spec = RadialZoneSpec::new(
                r.name.clone().unwrap_or_else(|| "custom".into()),
                r.source.clone().unwrap_or_else(|| PEAK_CENTER.to_vec()),
                zones.clone(),
                r.default_order.unwrap_or(2),
            )
            .map_err(|e| HarnessError::Config(e.to_string()))?;
            specs.push(spec);
        }
        if specs.is_empty() {
            return Err(HarnessError::Config("no order specs".into()));
        }
        Ok(specs)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            method: self.solver.method,
            direct_limit: self.solver.direct_limit,
            max_iterations: self.solver.max_iterations,
            threads: self.solver.threads.max(1),
        }
    }

    pub fn fill_options(&self) -> FillOptions {
        FillOptions {
            candidates: self.discretization.candidates,
            ..FillOptions::default()
        }
    }
}

/// Polynomial with all monomials of degree <= `degree` and coefficients
/// uniform in [-1, 1].
pub fn random_polynomial(degree: u32, d: usize, seed: u64) -> Polynomial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Polynomial {
        terms: MonomialBasis::new(degree, d)
            .indices()
            .iter()
            .map(|a| (a.clone(), rng.random_range(-1.0..1.0)))
            .collect(),
    }
}
