use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wnk::donsker::Innovation;
use wnk::BasisConfig;

use crate::Command;

/// Raised before any computation starts; maps to exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSpec {
    pub id: String,
    /// Leading Hermite coefficients; padded with zeros up to `K`.
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    WhiteNoise,
    DriftingDirac,
    Product,
}

impl Family {
    pub fn id(&self) -> &'static str {
        match self {
            Family::WhiteNoise => "white-noise",
            Family::DriftingDirac => "drifting-dirac",
            Family::Product => "product",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    Equicontinuous,
    Violation,
}

/// One JSON file configures every subcommand; fields a command does not use
/// are ignored by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "K")]
    pub dim: usize,
    #[serde(rename = "Q")]
    pub quad_order: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,

    // donsker
    pub innovation: String,
    pub n_schedule: Vec<u32>,
    pub n_mc: usize,
    pub tail_tol: f64,
    pub phis: Vec<PhiSpec>,
    pub max_final_error: Option<f64>,

    // tightness
    pub family: Family,
    pub dirac_indices: Vec<usize>,
    pub m_values: Vec<u32>,
    pub deltas: Vec<f64>,
    pub epsilon: f64,
    pub probes: usize,
    pub expect: Option<Expectation>,

    // minlos
    pub directions: Vec<Vec<f64>>,
    pub n_mu: usize,
    pub n_m: usize,
    pub psd_probes: usize,
    pub psd_tol: f64,
    pub m_tol: f64,

    // hemicompact
    pub samples: usize,

    // tables
    pub hermite_max_k: usize,
    pub hermite_points: Vec<f64>,
    pub gh_orders: Vec<usize>,
    pub embedding_max_level: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dim: 16,
            quad_order: None,
            seed: 20_240_917,
            out: PathBuf::from("wnk-out"),
            innovation: "rademacher".into(),
            n_schedule: vec![16, 64, 256, 1024],
            n_mc: 10_000,
            tail_tol: 1e-12,
            phis: vec![PhiSpec {
                id: "e0".into(),
                coeffs: vec![1.0],
            }],
            max_final_error: None,
            family: Family::WhiteNoise,
            dirac_indices: (0..=12).collect(),
            m_values: vec![0],
            deltas: vec![0.1],
            epsilon: 0.01,
            probes: 64,
            expect: None,
            directions: vec![vec![1.0]],
            n_mu: 20_000,
            n_m: 500,
            psd_probes: 8,
            psd_tol: 1e-10,
            m_tol: 1e-10,
            samples: 1000,
            hermite_max_k: 8,
            hermite_points: vec![0.0, 0.5, 1.0, 2.0, 5.0, 10.0],
            gh_orders: vec![1, 2, 3, 4, 5],
            embedding_max_level: 6,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n_schedule: Option<Vec<u32>>,
    pub n_mc: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(mut self, o: &Overrides) -> Self {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(n) = &o.n_schedule {
            self.n_schedule = n.clone();
        }
        if let Some(mc) = o.n_mc {
            self.n_mc = mc;
        }
        self
    }

    pub fn basis(&self) -> Result<BasisConfig, ConfigError> {
        let basis = match self.quad_order {
            Some(q) => BasisConfig::with_quadrature(self.dim, q),
            None => BasisConfig::new(self.dim),
        };
        basis.map_err(|e| ConfigError(e.to_string()))
    }

    pub fn innovation(&self) -> Result<Innovation, ConfigError> {
        self.innovation
            .parse()
            .map_err(|e: wnk::Error| ConfigError(e.to_string()))
    }

    fn check_schedule(&self) -> Result<(), ConfigError> {
        if self.n_schedule.is_empty() {
            return bad("n_schedule is empty");
        }
        if self.n_schedule.contains(&0) {
            return bad("n_schedule entries must be positive");
        }
        if self.n_schedule.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_schedule must be strictly increasing");
        }
        if !(self.tail_tol > 0.0) {
            return bad("tail_tol must be positive");
        }
        Ok(())
    }

    fn check_coefficients(&self, list: &[f64], what: &str) -> Result<(), ConfigError> {
        if list.len() > self.dim {
            return bad(format!(
                "{what}: {} coefficients exceed K = {}",
                list.len(),
                self.dim
            ));
        }
        if list.iter().any(|c| !c.is_finite()) {
            return bad(format!("{what}: non-finite coefficient"));
        }
        Ok(())
    }

    /// Rejects anything that would fail later, before work starts.
    pub fn validate(&self, command: Command) -> Result<(), ConfigError> {
        self.basis()?;
        match command {
            Command::Donsker => {
                self.innovation()?;
                self.check_schedule()?;
                if self.n_mc == 0 {
                    return bad("N_mc must be positive");
                }
                if self.phis.is_empty() {
                    return bad("no test functions (phis) given");
                }
                for p in &self.phis {
                    self.check_coefficients(&p.coeffs, &p.id)?;
                }
                if let Some(e) = self.max_final_error {
                    if !(e > 0.0) {
                        return bad("max_final_error must be positive");
                    }
                }
            }
            Command::Tightness => {
                match self.family {
                    Family::Product => {
                        self.innovation()?;
                        self.check_schedule()?;
                    }
                    Family::DriftingDirac => {
                        if self.dirac_indices.is_empty() {
                            return bad("family is empty (dirac_indices)");
                        }
                        if let Some(&n) = self.dirac_indices.iter().find(|&&n| n >= self.dim) {
                            return bad(format!("dirac index {n} needs K > {n}"));
                        }
                    }
                    Family::WhiteNoise => {}
                }
                if self.m_values.is_empty() || self.deltas.is_empty() {
                    return bad("empty (m, delta) grid");
                }
                if self.deltas.iter().any(|d| !(*d > 0.0)) {
                    return bad("delta values must be positive");
                }
                if self.probes == 0 {
                    return bad("probes must be positive");
                }
                if !(self.epsilon > 0.0) {
                    return bad("epsilon must be positive");
                }
            }
            Command::Minlos => {
                if self.directions.is_empty() {
                    return bad("directions is empty");
                }
                for (i, d) in self.directions.iter().enumerate() {
                    self.check_coefficients(d, &format!("direction {i}"))?;
                }
                if self.n_mu == 0 || self.n_m == 0 {
                    return bad("n_mu and n_m must be positive");
                }
                if self.psd_probes == 0 {
                    return bad("psd_probes must be positive");
                }
                if !(self.m_tol > 0.0) {
                    return bad("m_tol must be positive");
                }
            }
            Command::Hemicompact => {
                if self.samples == 0 {
                    return bad("samples must be positive");
                }
            }
            Command::Tables => {
                if self.gh_orders.contains(&0) {
                    return bad("Gauss-Hermite orders must be positive");
                }
                if self.hermite_points.iter().any(|t| !t.is_finite()) {
                    return bad("hermite_points must be finite");
                }
            }
        }
        Ok(())
    }
}
