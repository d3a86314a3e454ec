//! Lane-group model configuration and validation.
//!
//! A configuration describes one lane group: the green split `g1`/`g2`,
//! red time `r`, lane count `m`, per-slot turning probabilities `p`,
//! per-slot pedestrian probabilities `q`, and one arrival law per slot.
//! Validation materialises per-slot pmfs and transforms so every solver
//! works from the same numeric carriers.

use crate::error::{ModelError, Violation};
use crate::transform::{
    arrival_pmf, blocked_arrival_pmf, blocked_arrival_transform, ArrivalSpec, Pmf, Transform,
};
use serde::{Deserialize, Serialize};

/// Default truncation mass for materialised pmfs.
pub const DEFAULT_PMF_EPS: f64 = 1e-12;

/// Raw model configuration, as built in code or parsed from JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelConfig {
    pub g1: usize,
    pub g2: usize,
    pub r: usize,
    pub m: usize,
    /// Probability that a batch newly reaching the head of the queue in
    /// slot `i` (1-based, `i <= g1`) is a turning batch.
    pub p: Vec<f64>,
    /// Probability that pedestrians cross in slot `i`.
    pub q: Vec<f64>,
    /// One arrival law per slot, length `g1 + g2 + r`.
    pub arrivals: Vec<ArrivalSpec>,
    /// Explicit blocked-arrival laws, required when `m > 1` with some
    /// `p[i]` strictly inside (0, 1).
    pub blocked_arrivals_override: Option<Vec<Pmf>>,
}

impl ModelConfig {
    /// Homogeneous-Poisson convenience constructor with scalar `p`, `q`
    /// broadcast across the first green part.
    pub fn uniform_poisson(
        g1: usize,
        g2: usize,
        r: usize,
        m: usize,
        rate: f64,
        p: f64,
        q: f64,
    ) -> Self {
        let c = g1 + g2 + r;
        ModelConfig {
            g1,
            g2,
            r,
            m,
            p: vec![p; g1],
            q: vec![q; g1],
            arrivals: vec![ArrivalSpec::Poisson { mean: rate }; c],
            blocked_arrivals_override: None,
        }
    }

    pub fn cycle_len(&self) -> usize {
        self.g1 + self.g2 + self.r
    }

    /// Validate every invariant; returns the solver-ready model or a
    /// rejection listing all violations.
    pub fn validate(&self) -> Result<ValidatedModel, ModelError> {
        validate_config(self)
    }
}

/// A validated model with materialised per-slot pmfs and transforms.
///
/// Immutable after construction; safe to share across threads.
#[derive(Clone, Debug)]
pub struct ValidatedModel {
    pub g1: usize,
    pub g2: usize,
    pub r: usize,
    /// Total cycle length in slots.
    pub c: usize,
    pub m: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub arrivals: Vec<ArrivalSpec>,
    /// Arrival transform per slot (index 0 = slot 1).
    pub y: Vec<Transform>,
    /// Truncated arrival pmf per slot.
    pub y_pmf: Vec<Pmf>,
    /// Blocked-arrival transform per first-green slot.
    pub yb: Vec<Transform>,
    /// Blocked-arrival pmf per first-green slot.
    pub yb_pmf: Vec<Pmf>,
}

impl ValidatedModel {
    /// Mean arrivals per cycle.
    pub fn arrival_load(&self) -> f64 {
        self.y.iter().map(|t| t.mean()).sum()
    }

    /// `Y_{i,b}(0)`: probability that no arriving vehicle would be blocked
    /// in first-green slot `i` (1-based).
    pub fn yb_at0(&self, slot: usize) -> f64 {
        self.yb[slot - 1].eval(num_complex::Complex64::ZERO).re
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            g1: self.g1,
            g2: self.g2,
            r: self.r,
            m: self.m,
            p: self.p.clone(),
            q: self.q.clone(),
            arrivals: self.arrivals.clone(),
            blocked_arrivals_override: None,
        }
    }
}

/// Validate a raw configuration, collecting every violated invariant.
pub fn validate_config(raw: &ModelConfig) -> Result<ValidatedModel, ModelError> {
    let mut violations = Vec::new();
    let c = raw.cycle_len();

    if raw.g2 == 0 {
        violations.push(Violation::G2Zero);
    }
    if raw.m == 0 {
        violations.push(Violation::ZeroLanes);
    }
    if raw.p.len() != raw.g1 {
        violations.push(Violation::LengthMismatch {
            name: "p".into(),
            expected: raw.g1,
            got: raw.p.len(),
        });
    }
    if raw.q.len() != raw.g1 {
        violations.push(Violation::LengthMismatch {
            name: "q".into(),
            expected: raw.g1,
            got: raw.q.len(),
        });
    }
    if raw.arrivals.len() != c {
        violations.push(Violation::LengthMismatch {
            name: "arrivals".into(),
            expected: c,
            got: raw.arrivals.len(),
        });
    }
    for (i, &v) in raw.p.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) || !v.is_finite() {
            violations.push(Violation::BadProbability {
                name: "p".into(),
                slot: i + 1,
                value: v,
            });
        }
    }
    for (i, &v) in raw.q.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) || !v.is_finite() {
            violations.push(Violation::BadProbability {
                name: "q".into(),
                slot: i + 1,
                value: v,
            });
        }
    }
    for (i, spec) in raw.arrivals.iter().enumerate() {
        let mean = spec.mean();
        if !mean.is_finite() || mean < 0.0 {
            violations.push(Violation::BadArrivalMean {
                slot: i + 1,
                value: mean,
            });
        }
        if let ArrivalSpec::Explicit { weights } = spec {
            let pmf = Pmf {
                weights: weights.clone(),
                tail_eps: 0.0,
            };
            if let Err(v) = pmf.check(&format!("arrivals[{}]", i + 1)) {
                violations.push(v);
            }
        }
    }
    if let Some(ov) = &raw.blocked_arrivals_override {
        if ov.len() != raw.g1 {
            violations.push(Violation::LengthMismatch {
                name: "blocked_arrivals".into(),
                expected: raw.g1,
                got: ov.len(),
            });
        }
        for (i, pmf) in ov.iter().enumerate() {
            if let Err(v) = pmf.check(&format!("blocked_arrivals[{}]", i + 1)) {
                violations.push(v);
            }
        }
    }
    if raw.m > 1 && raw.blocked_arrivals_override.is_none() {
        for (i, &pi) in raw.p.iter().enumerate() {
            if pi > 0.0 && pi < 1.0 {
                violations.push(Violation::MixedBatchUnsupported { slot: i + 1, p: pi });
            }
        }
    }

    if !violations.is_empty() {
        return Err(ModelError::Invalid(violations));
    }

    let y: Vec<Transform> = raw.arrivals.iter().map(Transform::from_spec).collect();
    let y_pmf: Vec<Pmf> = raw
        .arrivals
        .iter()
        .map(|s| arrival_pmf(s, DEFAULT_PMF_EPS))
        .collect();
    let (yb, yb_pmf): (Vec<Transform>, Vec<Pmf>) = match &raw.blocked_arrivals_override {
        Some(ov) => (ov.iter().map(Transform::from_pmf).collect(), ov.clone()),
        None => (
            (0..raw.g1)
                .map(|i| blocked_arrival_transform(&raw.arrivals[i], raw.p[i]))
                .collect(),
            (0..raw.g1)
                .map(|i| blocked_arrival_pmf(&y_pmf[i], raw.p[i]))
                .collect(),
        ),
    };

    Ok(ValidatedModel {
        g1: raw.g1,
        g2: raw.g2,
        r: raw.r,
        c,
        m: raw.m,
        p: raw.p.clone(),
        q: raw.q.clone(),
        arrivals: raw.arrivals.clone(),
        y,
        y_pmf,
        yb,
        yb_pmf,
    })
}

// ---------------------------------------------------------------------------
// JSON configuration file schema
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(untagged)]
enum ScalarOrVec {
    Scalar(f64),
    Vec(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ArrivalsField {
    /// Scalar mean: Poisson broadcast across all slots.
    Rate(f64),
    /// One `{kind, ...}` object per slot.
    PerSlot(Vec<ArrivalSpec>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfigFile {
    g1: usize,
    g2: usize,
    r: usize,
    #[serde(default = "one")]
    m: usize,
    #[serde(default)]
    p: Option<ScalarOrVec>,
    #[serde(default)]
    q: Option<ScalarOrVec>,
    arrivals: ArrivalsField,
    #[serde(default)]
    blocked_arrivals: Option<Vec<BlockedPmfFile>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockedPmfFile {
    weights: Vec<f64>,
}

fn one() -> usize {
    1
}

fn broadcast(field: Option<ScalarOrVec>, len: usize) -> Vec<f64> {
    match field {
        None => vec![0.0; len],
        Some(ScalarOrVec::Scalar(v)) => vec![v; len],
        Some(ScalarOrVec::Vec(v)) => v,
    }
}

/// Parse the JSON model-configuration document.
///
/// Keys: `g1`, `g2`, `r`, `m` (default 1), `p`/`q` (scalar broadcast or
/// per-slot array, default 0), `arrivals` (scalar Poisson mean broadcast or
/// per-slot array of `{kind, ...}` objects) and optional `blocked_arrivals`
/// (array of `{weights}` objects, one per first-green slot). Unknown keys
/// are rejected.
pub fn parse_config(text: &str) -> Result<ModelConfig, ModelError> {
    let raw: RawConfigFile =
        serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    let c = raw.g1 + raw.g2 + raw.r;
    let arrivals = match raw.arrivals {
        ArrivalsField::Rate(mean) => vec![ArrivalSpec::Poisson { mean }; c],
        ArrivalsField::PerSlot(v) => v,
    };
    Ok(ModelConfig {
        g1: raw.g1,
        g2: raw.g2,
        r: raw.r,
        m: raw.m,
        p: broadcast(raw.p, raw.g1),
        q: broadcast(raw.q, raw.g1),
        arrivals,
        blocked_arrivals_override: raw.blocked_arrivals.map(|v| {
            v.into_iter()
                .map(|b| Pmf {
                    weights: b.weights,
                    tail_eps: 0.0,
                })
                .collect()
        }),
    })
}

/// Serialise a configuration in the documented config-file schema, so the
/// output of `parse_config` and `config_to_json` round-trips.
pub fn config_to_json(cfg: &ModelConfig) -> serde_json::Value {
    let mut obj = serde_json::json!({
        "g1": cfg.g1,
        "g2": cfg.g2,
        "r": cfg.r,
        "m": cfg.m,
        "p": cfg.p,
        "q": cfg.q,
        "arrivals": cfg.arrivals,
    });
    if let Some(ov) = &cfg.blocked_arrivals_override {
        obj["blocked_arrivals"] = serde_json::Value::Array(
            ov.iter()
                .map(|p| serde_json::json!({ "weights": p.weights }))
                .collect(),
        );
    }
    obj
}
