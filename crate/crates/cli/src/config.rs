//! JSON run configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use topt_core::transport::TransportMethod;
use topt_core::{BoundarySpec, FlowParams, KappaParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Heat,
    Elastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

/// A scalar load for heat, a 2-vector for elasticity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Load {
    Scalar(f64),
    Vector([f64; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sources {
    /// Volume source (heat) or body force (elasticity).
    pub f: Load,
    /// Flux or traction on Gamma1.
    pub g: Load,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lame {
    pub lambda1: f64,
    pub lambda2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Initial {
    Constant(f64),
    /// Density file (CSV or VTK) on the configured mesh. Relative paths are
    /// taken from the config file's directory.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauOverride {
    pub delta: f64,
    pub eta: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub deltas: Vec<f64>,
    pub etas: Vec<f64>,
    #[serde(default)]
    pub tau: Vec<TauOverride>,
}

impl SweepSpec {
    /// The time step for one `(delta, eta)` pair, falling back to `default`.
    pub fn tau_for(&self, delta: f64, eta: f64, default: f64) -> f64 {
        self.tau
            .iter()
            .find(|o| o.delta == delta && o.eta == eta)
            .map_or(default, |o| o.tau)
    }
}

fn default_eta_ref() -> f64 {
    1e-6
}

fn default_max_cells() -> usize {
    24
}

fn default_method() -> TransportMethod {
    TransportMethod::Exact
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderSpec {
    /// Strictly decreasing filter strengths.
    pub etas: Vec<f64>,
    #[serde(default = "default_eta_ref")]
    pub eta_ref: f64,
    #[serde(default = "default_max_cells")]
    pub max_cells: usize,
    #[serde(default = "default_method")]
    pub method: TransportMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub domain: Domain,
    pub boundary: BoundarySpec,
    pub material: KappaParams,
    pub sources: Sources,
    /// Required for elasticity, ignored for heat.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lame: Option<Lame>,
    pub flow: FlowParams,
    pub initial: Initial,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<OrderSpec>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        // serde_json errors carry the line and column of the offending field.
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads and validates a config; a relative initial-density path is
    /// resolved against the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let mut config =
            Self::from_json(&text).with_context(|| format!("invalid config {}", path.display()))?;
        if let Initial::File(file) = &config.initial {
            if file.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                config.initial = Initial::File(base.join(file));
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        if !(d.lx > 0.0 && d.ly > 0.0) || d.nx == 0 || d.ny == 0 {
            bail!("domain: lx, ly must be positive and nx, ny at least 1");
        }
        self.material.validate().context("material")?;
        self.flow.validate().context("flow")?;
        if self.flow.checkpoint_every == 0 {
            bail!("flow.checkpoint_every must be at least 1");
        }
        match (self.problem, self.sources.f, self.sources.g) {
            (ProblemKind::Heat, Load::Scalar(_), Load::Scalar(_)) => {}
            (ProblemKind::Elastic, Load::Vector(_), Load::Vector(_)) => {
                if self.lame.is_none() {
                    bail!("elastic problems need a `lame` section");
                }
            }
            (ProblemKind::Heat, ..) => bail!("sources: heat loads f and g must be numbers"),
            (ProblemKind::Elastic, ..) => {
                bail!("sources: elastic loads f and g must be [x, y] pairs")
            }
        }
        if let Initial::Constant(c) = self.initial {
            if !(c > 0.0 && c.is_finite()) {
                bail!("initial.constant must be positive");
            }
        }
        if let Some(s) = &self.sweep {
            if s.deltas.is_empty() || s.etas.is_empty() {
                bail!("sweep: deltas and etas must be non-empty");
            }
            for v in s.deltas.iter().chain(&s.etas) {
                if !(*v >= 0.0 && v.is_finite()) {
                    bail!("sweep: parameters must be non-negative, got {v}");
                }
            }
            for o in &s.tau {
                if !(o.tau > 0.0 && o.tau.is_finite()) {
                    bail!("sweep.tau: time steps must be positive, got {}", o.tau);
                }
            }
        }
        if let Some(o) = &self.order {
            if o.max_cells == 0 {
                bail!("order.max_cells must be at least 1");
            }
        }
        Ok(())
    }

    /// Flow parameters for one sweep entry.
    pub fn with_pair(&self, delta: f64, eta: f64, tau: f64) -> Self {
        let mut c = self.clone();
        c.flow = FlowParams {
            delta,
            eta,
            tau,
            ..self.flow
        };
        c.sweep = None;
        c
    }

    pub fn pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// The config as actually run: serde has already filled every default, so
/// only the output directory needs pinning.
pub fn resolved(config: &RunConfig, output: &Path) -> RunConfig {
    let mut c = config.clone();
    c.output = Some(output.to_path_buf());
    c
}
