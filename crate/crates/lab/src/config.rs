//! Experiment configuration: a TOML file whose keys mirror
//! [`ExperimentConfig`], with command-line overrides applied on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use threefield_core::spectrum::{Route, DEFAULT_FILTER_RATIO};
use threefield_core::{BoundaryConfig, Domain, ElasticParams, MeanConstraint, MeshFamily};

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; when present it must match the family's domain.
    #[serde(default)]
    pub domain: Option<Domain>,
    pub mesh_family: MeshFamily,
    pub n_list: Vec<usize>,
    #[serde(default = "default_lambdas")]
    pub lambda_list: Vec<f64>,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default)]
    pub bc: BoundaryConfig,
    #[serde(default)]
    pub constraint: MeanConstraint,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_filter_ratio")]
    pub filter_ratio: f64,
    #[serde(default = "default_n_eigs_report")]
    pub n_eigs_report: usize,
    #[serde(default)]
    pub route: Route,
    /// Output directory, relative to the config file.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Reference eigenvalue file for convergence studies, relative to the
    /// config file.
    #[serde(default)]
    pub reference: Option<PathBuf>,
}

fn default_lambdas() -> Vec<f64> {
    vec![1.0]
}

fn default_mu() -> f64 {
    1.0
}

fn default_filter_ratio() -> f64 {
    DEFAULT_FILTER_RATIO
}

fn default_n_eigs_report() -> usize {
    10
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            domain: None,
            mesh_family: MeshFamily::SquareRight,
            n_list: vec![4],
            lambda_list: default_lambdas(),
            mu: default_mu(),
            bc: BoundaryConfig::default(),
            constraint: MeanConstraint::default(),
            seed: 0,
            filter_ratio: default_filter_ratio(),
            n_eigs_report: default_n_eigs_report(),
            route: Route::default(),
            output: None,
            reference: None,
        }
    }
}

/// Values given on the command line; `None` leaves the config untouched.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mesh_family: Option<MeshFamily>,
    pub n_list: Option<Vec<usize>>,
    pub lambda_list: Option<Vec<f64>>,
    pub mu: Option<f64>,
    pub seed: Option<u64>,
    pub constrained: bool,
    pub route: Option<Route>,
    pub output: Option<PathBuf>,
    pub reference: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, path: &Path) -> LabResult<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text)
            .map_err(|e| LabError::Config { path: path.to_owned(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.output = cfg.output.map(|p| base.join(p));
        cfg.reference = cfg.reference.map(|p| base.join(p));
        Ok(cfg)
    }

    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config { path: path.to_owned(), message: e.to_string() })?;
        Self::from_toml(&text, path)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(f) = o.mesh_family {
            self.mesh_family = f;
            if self.domain.is_some() {
                self.domain = Some(f.domain());
            }
        }
        if let Some(n) = &o.n_list {
            self.n_list = n.clone();
        }
        if let Some(l) = &o.lambda_list {
            self.lambda_list = l.clone();
        }
        if let Some(mu) = o.mu {
            self.mu = mu;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if o.constrained {
            self.constraint = MeanConstraint::Constrained;
        }
        if let Some(r) = o.route {
            self.route = r;
        }
        if o.output.is_some() {
            self.output = o.output.clone();
        }
        if o.reference.is_some() {
            self.reference = o.reference.clone();
        }
    }

    pub fn domain(&self) -> Domain {
        self.mesh_family.domain()
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn params(&self, lambda: f64) -> LabResult<ElasticParams> {
        Ok(ElasticParams::new(self.mu, lambda)?)
    }

    pub fn validate(&self) -> LabResult<()> {
        let bad = |m: String| Err(LabError::Usage(m));
        if let Some(d) = self.domain {
            if d != self.mesh_family.domain() {
                return bad(format!("domain {d:?} does not match mesh family {}", self.mesh_family));
            }
        }
        if self.n_list.is_empty() {
            return bad("n_list is empty".into());
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("n_list {:?} must be strictly increasing", self.n_list));
        }
        if self.n_list[0] == 0 {
            return bad("N must be positive".into());
        }
        if self.domain() == Domain::Lshape && self.n_list.iter().any(|n| n % 2 == 1) {
            return bad(format!("L-shape meshes need even N, got {:?}", self.n_list));
        }
        if self.lambda_list.is_empty() {
            return bad("lambda_list is empty".into());
        }
        for &l in &self.lambda_list {
            if !(l.is_finite() && l > 0.0) {
                return bad(format!("lambda {l} must be positive and finite"));
            }
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return bad(format!("mu {} must be positive and finite", self.mu));
        }
        if !(self.filter_ratio > 0.0) {
            return bad(format!("filter_ratio {} must be positive", self.filter_ratio));
        }
        Ok(())
    }
}

/// Compact tag for file names: `1e0`, `1e2`, `2.5e3`.
pub fn lambda_tag(lambda: f64) -> String {
    format!("{lambda:e}")
}
