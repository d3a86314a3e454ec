//! Shared engine execution and normalised outputs for compare/sweep.

use bfctl::error::{ModelError, OracleError, SolveError};
use bfctl::model::ValidatedModel;
use serde_json::{json, Value};

pub const SCHEMA_VERSION: u32 = 1;

/// Exit-code taxonomy: 2 config/usage, 3 unstable, 4 numerical failure.
pub struct CliError {
    pub kind: String,
    pub message: String,
    pub exit: i32,
    pub extra: Value,
}

impl CliError {
    pub fn emit(&self) -> i32 {
        let payload = json!({
            "error": {
                "kind": self.kind,
                "message": self.message,
                "details": self.extra,
            }
        });
        eprintln!("{payload}");
        self.exit
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError {
            kind: "InvalidConfig".into(),
            message: e.to_string(),
            exit: 2,
            extra: Value::Null,
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        let (kind, exit, extra) = match &e {
            SolveError::Unstable { r0, load } => {
                ("Unstable", 3, json!({ "r0": r0, "arrival_load": load }))
            }
            SolveError::NearCritical { rho } => ("NearCritical", 3, json!({ "rho": rho })),
            SolveError::RootCountMismatch { expected, winding } => (
                "RootCountMismatch",
                4,
                json!({ "expected": expected, "winding": winding }),
            ),
            SolveError::SingularSystem { cond } => ("SingularSystem", 4, json!({ "cond": cond })),
            SolveError::UnknownOutOfRange { label, value } => (
                "UnknownOutOfRange",
                4,
                json!({ "label": label, "value": value }),
            ),
            SolveError::InversionUnstable { bound } => {
                ("InversionUnstable", 4, json!({ "bound": bound }))
            }
            SolveError::EvalDomain => ("EvalDomain", 4, Value::Null),
            SolveError::RootRefinement => ("RootRefinement", 4, Value::Null),
            SolveError::Model(_) => ("InvalidConfig", 2, Value::Null),
        };
        CliError {
            kind: kind.into(),
            message: e.to_string(),
            exit,
            extra,
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        let (kind, exit) = match &e {
            OracleError::Unstable { .. } => ("Unstable", 3),
            OracleError::NoConvergence { .. } => ("NoConvergence", 4),
            OracleError::TruncationTooSmall { .. } => ("InvalidConfig", 2),
        };
        CliError {
            kind: kind.into(),
            message: e.to_string(),
            exit,
            extra: Value::Null,
        }
    }
}

/// Normalised engine output for diffs.
pub struct EngineOutput {
    pub per_slot_mean: Vec<f64>,
    pub pmfs: Option<Vec<Vec<f64>>>,
    pub ci: Option<Vec<(f64, f64)>>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Engine {
    Solve,
    Oracle,
    Simulate,
}

impl std::str::FromStr for Engine {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "solve" => Ok(Engine::Solve),
            "oracle" => Ok(Engine::Oracle),
            "simulate" => Ok(Engine::Simulate),
            _ => Err(format!("unknown engine '{s}' (solve|oracle|simulate)")),
        }
    }
}

#[derive(Clone, Copy)]
pub struct EngineOpts {
    pub nmax: usize,
    pub truncation: usize,
    pub tol: f64,
    pub cycles: usize,
    pub runs: usize,
    pub seed: u64,
}

pub fn run_engine(
    engine: Engine,
    model: &ValidatedModel,
    opts: &EngineOpts,
) -> Result<EngineOutput, CliError> {
    match engine {
        Engine::Solve => {
            let s = bfctl::pgf::solve(model)?;
            let metrics = s.metrics();
            let pmfs = s
                .queue_pmfs(opts.nmax)?
                .into_iter()
                .map(|p| p.weights)
                .collect();
            Ok(EngineOutput {
                per_slot_mean: metrics.per_slot_mean,
                pmfs: Some(pmfs),
                ci: None,
            })
        }
        Engine::Oracle => {
            let o = bfctl::oracle::stationary(model, opts.truncation, opts.tol)?;
            Ok(EngineOutput {
                per_slot_mean: o.per_slot_mean.clone(),
                pmfs: Some(o.slots.iter().map(|s| s.total.clone()).collect()),
                ci: None,
            })
        }
        Engine::Simulate => {
            let rep = bfctl::sim::simulate(model, opts.cycles, opts.runs, opts.seed);
            Ok(EngineOutput {
                per_slot_mean: rep.per_slot_mean,
                pmfs: None,
                ci: Some(rep.per_slot_ci),
            })
        }
    }
}

/// Full JSON report of the `solve` engine.
pub fn solve_json(model: &ValidatedModel, nmax: usize) -> Result<Value, CliError> {
    let s = bfctl::pgf::solve(model)?;
    let metrics = s.metrics();
    let plan = s.inversion_plan(nmax);
    let overflow = s.overflow_pmf(nmax)?;
    let cdf: Vec<f64> = overflow
        .weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "engine": "solve",
        "unknowns": s.labels.iter().zip(&s.unknowns)
            .map(|(l, v)| json!({ "label": l, "value": v })).collect::<Vec<_>>(),
        "roots": s.roots.iter()
            .map(|g| json!({ "re": g.z.re, "im": g.z.im, "multiplicity": g.multiplicity }))
            .collect::<Vec<_>>(),
        "winding": s.winding,
        "residual": s.residual,
        "condition": s.condition,
        "metrics": metrics,
        "overflow_pmf": overflow.weights,
        "overflow_cdf": cdf,
        "nmax": nmax,
        "inversion": {
            "rho": plan.rho,
            "n_points": plan.n_points,
            "alias_bound": plan.alias_bound,
        },
    }))
}

/// Full JSON report of the `oracle` engine, mirroring `solve`'s schema
/// with the added truncation diagnostics.
pub fn oracle_json(
    model: &ValidatedModel,
    l: usize,
    tol: f64,
    nmax: usize,
) -> Result<Value, CliError> {
    let o = bfctl::oracle::stationary(model, l, tol)?;
    let overflow = &o.slots[model.g1 + model.g2 - 1].total;
    let upto = nmax.min(overflow.len() - 1);
    let pmf = &overflow[..=upto];
    let cdf: Vec<f64> = pmf
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let c = model.c as f64;
    let mean_queue = o.per_slot_mean.iter().sum::<f64>() / c;
    let load = model.arrival_load();
    let overflow_mean: f64 = overflow.iter().enumerate().map(|(k, w)| k as f64 * w).sum();
    let ex2: f64 = overflow
        .iter()
        .enumerate()
        .map(|(k, w)| (k * k) as f64 * w)
        .sum();
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "engine": "oracle",
        "metrics": {
            "per_slot_mean": o.per_slot_mean,
            "mean_queue": mean_queue,
            "mean_delay": if load > 0.0 { mean_queue / (load / c) } else { 0.0 },
            "delay_defined": load > 0.0,
            "overflow_mean": overflow_mean,
            "overflow_variance": ex2 - overflow_mean * overflow_mean,
            "throughput_per_cycle": o.throughput,
            "arrival_load": load,
        },
        "overflow_pmf": pmf,
        "overflow_cdf": cdf,
        "truncation_mass": o.truncation_mass,
        "truncation_level": o.l,
        "iterations": o.iterations,
        "nmax": upto,
    }))
}

/// Parse `a:b:n` (n evenly spaced points, endpoints included) or an
/// explicit comma list.
pub fn parse_range(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = |m: String| CliError {
        kind: "InvalidRange".into(),
        message: m,
        exit: 2,
        extra: Value::Null,
    };
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(format!("range '{spec}' must be start:stop:steps")));
        }
        let a: f64 = parts[0]
            .parse()
            .map_err(|_| bad(format!("bad start in '{spec}'")))?;
        let b: f64 = parts[1]
            .parse()
            .map_err(|_| bad(format!("bad stop in '{spec}'")))?;
        let n: usize = parts[2]
            .parse()
            .map_err(|_| bad(format!("bad steps in '{spec}'")))?;
        if n == 0 {
            return Err(bad("steps must be positive".into()));
        }
        if n == 1 {
            return Ok(vec![a]);
        }
        Ok((0..n)
            .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
            .collect())
    } else {
        spec.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("bad value '{s}' in list")))
            })
            .collect()
    }
}
