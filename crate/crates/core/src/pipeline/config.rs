use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeConfig, LocalPopulation};
use crate::error::{Error, Result};
use crate::gateway::{BackendConfig, BackendKind, BACKEND_URL_ENV};
use crate::manifold::ProjectorSpec;
use crate::partition::{DbscanLabeler, KMeansConfig};

/// Every tunable of a pipeline run, as flat `key = value` pairs.
///
/// Unknown keys are rejected so typos surface instead of silently falling
/// back to defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,

    pub backend: BackendKind,
    pub base_url: Option<String>,
    pub model_name: String,
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub timeout_ms: u64,
    pub retry_max: u32,
    pub retry_backoff_ms: u64,
    pub mock_dim: usize,

    /// JSON dictionary file; the built-in news dictionary when absent.
    pub dictionary: Option<PathBuf>,

    pub projector: ProjectorChoice,
    pub projection_5d: Option<PathBuf>,
    pub projection_2d: Option<PathBuf>,
    /// RMS radius of the reference reducer's output, in map units.
    pub target_spread_5d: f64,
    pub target_spread_2d: f64,

    pub k: usize,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    pub density_eps: f64,
    pub density_min_pts: usize,

    pub sigma_global: f64,
    pub sigma_local: f64,
    pub eps_structural: f64,
    pub eps_density: f64,
    pub local_population: LocalPopulation,
    pub min_region_survival: f64,

    pub histogram_bin_width: f64,
    pub z_cut: f64,
    pub mention_terms: Vec<String>,

    pub color_by: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectorChoice {
    Reference,
    External,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let backend = BackendConfig::default();
        let cascade = CascadeConfig::default();
        let kmeans = KMeansConfig::default();
        let density = DbscanLabeler::default();
        Self {
            seed: 42,
            backend: backend.kind,
            base_url: None,
            model_name: backend.model_name,
            batch_size: backend.batch_size,
            max_in_flight: backend.max_in_flight,
            timeout_ms: backend.timeout_ms,
            retry_max: backend.retry_max,
            retry_backoff_ms: backend.retry_backoff_ms,
            mock_dim: 256,
            dictionary: None,
            projector: ProjectorChoice::Reference,
            projection_5d: None,
            projection_2d: None,
            target_spread_5d: 2.0,
            target_spread_2d: 2.0,
            k: kmeans.k,
            kmeans_restarts: 1,
            kmeans_max_iter: kmeans.max_iter,
            kmeans_tol: kmeans.tol,
            density_eps: density.eps,
            density_min_pts: density.min_pts,
            sigma_global: cascade.global_sigma,
            sigma_local: cascade.local_sigma,
            eps_structural: cascade.eps_kmeans_graph,
            eps_density: cascade.eps_density_graph,
            local_population: cascade.local_stats_population,
            min_region_survival: cascade.min_region_survival,
            histogram_bin_width: 0.05,
            z_cut: crate::semantics::DEFAULT_Z_CUT,
            mention_terms: vec!["artificial intelligence".into()],
            color_by: "region".into(),
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    // Bare words such as `remote` are taken as strings.
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}

impl PipelineConfig {
    /// Reads an optional config file, then applies `key=value` overrides.
    /// `base_url` falls back to the backend URL environment variable.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match file {
            Some(path) => {
                let text = crate::io::read_to_string(path)?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| Error::Configuration(format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Configuration(format!("override {item:?} is not key=value")))?;
            table.insert(key.trim().to_owned(), parse_value(raw.trim()));
        }
        let mut cfg: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e| Error::Configuration(e.to_string()))?;
        if cfg.base_url.is_none() {
            cfg.base_url = std::env::var(BACKEND_URL_ENV).ok().filter(|s| !s.is_empty());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.backend_config().validate()?;
        self.cascade_config().validate()?;
        if self.k == 0 || self.kmeans_restarts == 0 || self.kmeans_max_iter == 0 {
            return Err(Error::Parameter("k, kmeans_restarts and kmeans_max_iter must be positive".into()));
        }
        if !(self.density_eps > 0.0) || self.density_min_pts == 0 {
            return Err(Error::Parameter("density_eps and density_min_pts must be positive".into()));
        }
        if !(self.histogram_bin_width > 0.0 && self.histogram_bin_width <= 1.0) {
            return Err(Error::Parameter("histogram_bin_width must lie in (0, 1]".into()));
        }
        if self.projector == ProjectorChoice::External
            && (self.projection_5d.is_none() || self.projection_2d.is_none())
        {
            return Err(Error::Configuration(
                "external projector needs projection_5d and projection_2d".into(),
            ));
        }
        Ok(())
    }

    pub fn backend_config(&self) -> BackendConfig {
        BackendConfig {
            kind: self.backend,
            base_url: self.base_url.clone(),
            model_name: self.model_name.clone(),
            batch_size: self.batch_size,
            timeout_ms: self.timeout_ms,
            retry_max: self.retry_max,
            retry_backoff_ms: self.retry_backoff_ms,
            max_in_flight: self.max_in_flight,
            seed: self.seed,
            mock_dim: self.mock_dim,
        }
    }

    pub fn cascade_config(&self) -> CascadeConfig {
        CascadeConfig {
            global_sigma: self.sigma_global,
            local_sigma: self.sigma_local,
            eps_kmeans_graph: self.eps_structural,
            eps_density_graph: self.eps_density,
            local_stats_population: self.local_population,
            min_region_survival: self.min_region_survival,
        }
    }

    pub fn kmeans_config(&self) -> KMeansConfig {
        KMeansConfig {
            k: self.k,
            seed: self.seed,
            max_iter: self.kmeans_max_iter,
            tol: self.kmeans_tol,
        }
    }

    pub fn density_labeler(&self) -> DbscanLabeler {
        DbscanLabeler {
            eps: self.density_eps,
            min_pts: self.density_min_pts,
        }
    }

    /// Projector for `dims` output dimensions (5 or 2).
    pub fn projector_spec(&self, dims: usize) -> ProjectorSpec {
        match self.projector {
            ProjectorChoice::External => {
                let path = if dims == 5 { &self.projection_5d } else { &self.projection_2d };
                ProjectorSpec::external(path.clone().unwrap_or_default(), dims)
            }
            ProjectorChoice::Reference => {
                let spread = if dims == 5 { self.target_spread_5d } else { self.target_spread_2d };
                ProjectorSpec::reference(dims, self.seed).with_param("target_spread", spread)
            }
        }
    }
}
