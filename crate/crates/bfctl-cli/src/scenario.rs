//! Lane-layout scenarios: a shared right-turn lane against splits of the
//! same traffic over two lanes, analysed as separate single-lane queues
//! whose mean queue lengths add.

use crate::engines::CliError;
use bfctl::model::ModelConfig;
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    /// One shared lane, turning fraction 0.3.
    Case1,
    /// Dedicated pair: all turners on lane 1 (30% of traffic), through
    /// traffic on lane 2.
    Case2,
    /// Shared pair, even rate split: lane 1 shared with p = 0.6.
    Case2a,
    /// Shared pair, 2:3 rate split: lane 1 shared with p = 0.75.
    Case2b,
}

impl std::str::FromStr for Layout {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "case1" => Ok(Layout::Case1),
            "case2" => Ok(Layout::Case2),
            "case2a" => Ok(Layout::Case2a),
            "case2b" => Ok(Layout::Case2b),
            _ => Err(format!(
                "UnknownScenario: '{s}' (case1|case2|case2a|case2b)"
            )),
        }
    }
}

impl Layout {
    /// Green split defaults: the single-lane-versus-pair comparison uses
    /// g2 = r = 20, the two-lane shared comparisons g2 = r = 16.
    pub fn default_geometry(&self) -> (usize, usize, usize) {
        match self {
            Layout::Case1 | Layout::Case2 => (8, 20, 20),
            Layout::Case2a | Layout::Case2b => (8, 16, 16),
        }
    }

    /// Per-lane `(p, rate share)`.
    pub fn lanes(&self) -> Vec<(f64, f64)> {
        match self {
            Layout::Case1 => vec![(0.3, 1.0)],
            Layout::Case2 => vec![(1.0, 0.3), (0.0, 0.7)],
            Layout::Case2a => vec![(0.6, 0.5), (0.0, 0.5)],
            Layout::Case2b => vec![(0.75, 0.4), (0.0, 0.6)],
        }
    }
}

/// Expand a layout at total rate `mu` into per-lane configurations.
pub fn expand(layout: Layout, mu: f64, g1: usize, g2: usize, r: usize) -> Vec<ModelConfig> {
    layout
        .lanes()
        .into_iter()
        .map(|(p, share)| ModelConfig::uniform_poisson(g1, g2, r, 1, mu * share, p, 1.0))
        .collect()
}

pub struct ScenarioPoint {
    pub mu: f64,
    pub lane_mean_queue: Vec<f64>,
    pub total_mean_queue: f64,
    pub mean_delay: f64,
    pub skipped: Option<String>,
}

/// Solve all lanes of a layout at one total rate.
pub fn evaluate(
    layout: Layout,
    mu: f64,
    g1: usize,
    g2: usize,
    r: usize,
) -> Result<ScenarioPoint, CliError> {
    let configs = expand(layout, mu, g1, g2, r);
    let mut lane_mean_queue = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let model = cfg.validate()?;
        match bfctl::pgf::solve(&model) {
            Ok(s) => lane_mean_queue.push(s.metrics().mean_queue),
            Err(e @ bfctl::SolveError::Unstable { .. })
            | Err(e @ bfctl::SolveError::NearCritical { .. }) => {
                return Ok(ScenarioPoint {
                    mu,
                    lane_mean_queue: vec![],
                    total_mean_queue: f64::NAN,
                    mean_delay: f64::NAN,
                    skipped: Some(e.to_string()),
                });
            }
            Err(e) => return Err(e.into()),
        }
    }
    let total: f64 = lane_mean_queue.iter().sum();
    // Little's law over the combined streams: total rate per slot is mu.
    let mean_delay = if mu > 0.0 { total / mu } else { 0.0 };
    Ok(ScenarioPoint {
        mu,
        lane_mean_queue,
        total_mean_queue: total,
        mean_delay,
        skipped: None,
    })
}

pub fn point_json(layout: Layout, point: &ScenarioPoint) -> Value {
    json!({
        "schema_version": crate::engines::SCHEMA_VERSION,
        "layout": format!("{layout:?}").to_lowercase(),
        "mu": point.mu,
        "lane_mean_queue": point.lane_mean_queue,
        "total_mean_queue": point.total_mean_queue,
        "mean_delay": point.mean_delay,
        "skipped": point.skipped,
    })
}
