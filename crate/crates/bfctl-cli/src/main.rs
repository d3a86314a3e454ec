//! `bfctl`: exact analysis, simulation and cross-validation of the
//! blocked fixed-cycle traffic-light queue.

mod engines;
mod scenario;

use clap::{Args, Parser, Subcommand};
use engines::{
    oracle_json, parse_range, run_engine, solve_json, CliError, Engine, EngineOpts, SCHEMA_VERSION,
};
use serde_json::{json, Value};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "bfctl",
    version,
    about = "blocked fixed-cycle traffic-light queue toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArg {
    /// Path to the JSON model configuration.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args, Clone)]
struct EngineFlags {
    /// Largest queue length reported in distributions.
    #[arg(long, default_value_t = 100)]
    nmax: usize,
    /// Truncation level of the chain oracle.
    #[arg(long, default_value_t = 200)]
    truncation: usize,
    /// Total-variation convergence threshold of the chain oracle.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Cycles per simulation run.
    #[arg(long, default_value_t = 10_000)]
    cycles: usize,
    /// Independent simulation runs.
    #[arg(long, default_value_t = 100)]
    runs: usize,
    /// Master seed for the simulator.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl EngineFlags {
    fn opts(&self) -> EngineOpts {
        EngineOpts {
            nmax: self.nmax,
            truncation: self.truncation,
            tol: self.tol,
            cycles: self.cycles,
            runs: self.runs,
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Capacity and stability from the Markov-reward recursion.
    Capacity {
        #[command(flatten)]
        config: ConfigArg,
        /// HCM comparison inputs `s_th,P_r,E_R,f_Rpb`.
        #[arg(long, value_name = "STH,PR,ER,FRPB")]
        hcm: Option<String>,
        /// Sweep the pedestrian adjustment: `f_Rpb=a:b:n` (CSV output).
        #[arg(long, value_name = "f_Rpb=a:b:n")]
        sweep: Option<String>,
        /// Service-rate correction `m_turn,m_through,p_share`.
        #[arg(long, value_name = "MT,MTH,PSHARE")]
        service_correction: Option<String>,
    },
    /// Steady-state distributions from the PGF recursion.
    Solve {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        flags: EngineFlags,
        /// Emit CSV instead of JSON: `means` or `overflow`.
        #[arg(long, value_name = "means|overflow")]
        csv: Option<String>,
    },
    /// Stationary distributions from the truncated-chain oracle.
    Oracle {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        flags: EngineFlags,
        #[arg(long, value_name = "means|overflow")]
        csv: Option<String>,
    },
    /// Monte Carlo simulation with confidence intervals.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        flags: EngineFlags,
        /// Emit per-slot CSV instead of JSON.
        #[arg(long)]
        csv: bool,
    },
    /// Run two engines on one configuration and report their differences.
    Compare {
        engine_a: Engine,
        engine_b: Engine,
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        flags: EngineFlags,
    },
    /// Run an engine across a parameter range, one CSV row per point.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        engine: Engine,
        /// Parameter path: `p`, `q`, `m`, or `arrivals.mean`.
        #[arg(long)]
        param: String,
        /// `start:stop:steps` or a comma list.
        #[arg(long)]
        range: String,
        #[command(flatten)]
        flags: EngineFlags,
        /// Write each sweep point's config JSON into this directory.
        #[arg(long)]
        dump_configs: Option<PathBuf>,
    },
    /// Expand a lane-layout scenario into per-lane queues and totals.
    Scenario {
        /// `case1`, `case2`, `case2a` or `case2b`.
        #[arg(long)]
        layout: scenario::Layout,
        /// Total arrival rate per slot (single evaluation, JSON output).
        #[arg(long)]
        mu: Option<f64>,
        /// Rate range `a:b:n` (CSV output, one row per rate).
        #[arg(long)]
        mu_range: Option<String>,
        #[arg(long)]
        g1: Option<usize>,
        #[arg(long)]
        g2: Option<usize>,
        #[arg(long)]
        r: Option<usize>,
        /// Emit the per-lane configs instead of solving them.
        #[arg(long)]
        expand_only: bool,
    },
}

fn main() {
    // Die quietly when a downstream pipe closes (bfctl ... | head).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    // Worker-pool size override for sweeps and simulation runs.
    if let Ok(n) = std::env::var("BFCTL_WORKERS") {
        if let Ok(n) = n.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => std::process::exit(e.emit()),
    }
}

fn load_model(path: &PathBuf) -> Result<(bfctl::ModelConfig, bfctl::ValidatedModel), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError {
        kind: "Io".into(),
        message: format!("{}: {e}", path.display()),
        exit: 2,
        extra: Value::Null,
    })?;
    let cfg = bfctl::parse_config(&text)?;
    let model = cfg.validate()?;
    Ok((cfg, model))
}

fn parse_tuple<const N: usize>(spec: &str, what: &str) -> Result<[f64; N], CliError> {
    let parts: Vec<f64> = spec
        .split(',')
        .filter_map(|s| s.trim().parse().ok())
        .collect();
    if parts.len() != N {
        return Err(CliError {
            kind: "InvalidArgument".into(),
            message: format!("{what} expects {N} comma-separated numbers, got '{spec}'"),
            exit: 2,
            extra: Value::Null,
        });
    }
    Ok(std::array::from_fn(|i| parts[i]))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Capacity {
            config,
            hcm,
            sweep,
            service_correction,
        } => cmd_capacity(config, hcm, sweep, service_correction),
        Command::Solve { config, flags, csv } => {
            let (_, model) = load_model(&config.config)?;
            let report = solve_json(&model, flags.nmax)?;
            emit_engine_report(report, csv)
        }
        Command::Oracle { config, flags, csv } => {
            let (_, model) = load_model(&config.config)?;
            let report = oracle_json(&model, flags.truncation, flags.tol, flags.nmax)?;
            emit_engine_report(report, csv)
        }
        Command::Simulate { config, flags, csv } => {
            let (_, model) = load_model(&config.config)?;
            let rep = bfctl::sim::simulate(&model, flags.cycles, flags.runs, flags.seed);
            if csv {
                println!("schema_version,slot,mean,ci_lo,ci_hi");
                for (j, (m, (lo, hi))) in rep.per_slot_mean.iter().zip(&rep.per_slot_ci).enumerate()
                {
                    println!("{SCHEMA_VERSION},{},{m},{lo},{hi}", j + 1);
                }
            } else {
                let mut v = serde_json::to_value(&rep).unwrap();
                v["schema_version"] = json!(SCHEMA_VERSION);
                v["engine"] = json!("simulate");
                println!("{v}");
            }
            Ok(())
        }
        Command::Compare {
            engine_a,
            engine_b,
            config,
            flags,
        } => cmd_compare(engine_a, engine_b, config, flags),
        Command::Sweep {
            config,
            engine,
            param,
            range,
            flags,
            dump_configs,
        } => cmd_sweep(config, engine, param, range, flags, dump_configs),
        Command::Scenario {
            layout,
            mu,
            mu_range,
            g1,
            g2,
            r,
            expand_only,
        } => cmd_scenario(layout, mu, mu_range, g1, g2, r, expand_only),
    }
}

fn emit_engine_report(report: Value, csv: Option<String>) -> Result<(), CliError> {
    match csv.as_deref() {
        None => println!("{report}"),
        Some("means") => {
            println!("schema_version,slot,mean");
            for (j, m) in report["metrics"]["per_slot_mean"]
                .as_array()
                .unwrap()
                .iter()
                .enumerate()
            {
                println!("{SCHEMA_VERSION},{},{}", j + 1, m);
            }
        }
        Some("overflow") => {
            println!("schema_version,n,pmf,cdf");
            let pmf = report["overflow_pmf"].as_array().unwrap();
            let cdf = report["overflow_cdf"].as_array().unwrap();
            for (n, (p, c)) in pmf.iter().zip(cdf).enumerate() {
                println!("{SCHEMA_VERSION},{n},{p},{c}");
            }
        }
        Some(other) => {
            return Err(CliError {
                kind: "InvalidArgument".into(),
                message: format!("--csv expects 'means' or 'overflow', got '{other}'"),
                exit: 2,
                extra: Value::Null,
            })
        }
    }
    Ok(())
}

fn cmd_capacity(
    config: ConfigArg,
    hcm: Option<String>,
    sweep: Option<String>,
    service_correction: Option<String>,
) -> Result<(), CliError> {
    let (_, model) = load_model(&config.config)?;
    let service = match &service_correction {
        Some(spec) => {
            let [mt, mth, pshare] = parse_tuple::<3>(spec, "--service-correction")?;
            bfctl::ServiceCounts::corrected(&model, mt, mth, pshare)
        }
        None => bfctl::ServiceCounts::uniform(&model),
    };

    if let Some(sweep_spec) = sweep {
        return capacity_sweep(&model, &sweep_spec, &service, hcm.as_deref());
    }

    let report = bfctl::reward_recursion(&model, &service);
    if report.near_critical_warning && report.stable {
        eprintln!(
            "warning: rho = {:.6} > 0.999; the PGF solver will refuse this model",
            report.rho
        );
    }
    let mut out = serde_json::to_value(&report).unwrap();
    out["schema_version"] = json!(SCHEMA_VERSION);
    if let Ok(cf) = bfctl::capacity::capacity_closed_form_q1(&model) {
        out["closed_form"] = json!(cf);
    }
    if let Some(spec) = hcm {
        let [sth, pr, er, frpb] = parse_tuple::<4>(&spec, "--hcm")?;
        let s_sr =
            bfctl::capacity::hcm_shared_lane_capacity(sth, pr, er, frpb).map_err(|e| CliError {
                kind: "DivisionDomain".into(),
                message: e.to_string(),
                exit: 2,
                extra: Value::Null,
            })?;
        out["hcm"] = json!({ "s_th": sth, "p_r": pr, "e_r": er, "f_rpb": frpb, "s_sr": s_sr });
    }
    println!("{out}");
    Ok(())
}

/// `--sweep f_Rpb=a:b:n`: for each pedestrian adjustment factor emit the
/// HCM capacity next to the recursion capacity under two q-profiles that
/// realise the same factor: a constant one and a step function.
fn capacity_sweep(
    model: &bfctl::ValidatedModel,
    spec: &str,
    service: &bfctl::ServiceCounts,
    hcm: Option<&str>,
) -> Result<(), CliError> {
    let range = spec.strip_prefix("f_Rpb=").ok_or_else(|| CliError {
        kind: "InvalidArgument".into(),
        message: format!("--sweep expects f_Rpb=a:b:n, got '{spec}'"),
        exit: 2,
        extra: Value::Null,
    })?;
    let points = parse_range(range)?;
    let hcm_params = match hcm {
        Some(spec) => Some(parse_tuple::<3>(
            &spec.split(',').take(3).collect::<Vec<_>>().join(","),
            "--hcm (s_th,P_r,E_R)",
        )?),
        None => None,
    };
    let g1 = model.g1 as f64;
    let g2 = model.g2 as f64;
    println!("schema_version,f_rpb,r0_const_q,r0_step_q,hcm_s_sr");
    for f in points {
        // f_Rpb = (g1 (1-q) + g2) / (g1+g2) for a constant q.
        let q = if g1 > 0.0 {
            (1.0 - (f * (g1 + g2) - g2) / g1).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let mut cfg = model.config();
        cfg.q = vec![q; model.g1];
        let const_rep = bfctl::reward_recursion(&cfg.validate()?, service);
        // Step profile with the same total: leading slots fully blocked.
        let qsum = q * g1;
        let mut step_q = vec![0.0; model.g1];
        let mut rem = qsum;
        for qv in step_q.iter_mut() {
            let take = rem.min(1.0);
            *qv = take;
            rem -= take;
        }
        cfg.q = step_q;
        let step_rep = bfctl::reward_recursion(&cfg.validate()?, service);
        let hcm_val = match hcm_params {
            Some([sth, pr, er]) => bfctl::capacity::hcm_shared_lane_capacity(sth, pr, er, f)
                .map(|v| v.to_string())
                .unwrap_or_default(),
            None => String::new(),
        };
        println!(
            "{SCHEMA_VERSION},{f},{},{},{hcm_val}",
            const_rep.r0, step_rep.r0
        );
    }
    Ok(())
}

fn cmd_compare(
    engine_a: Engine,
    engine_b: Engine,
    config: ConfigArg,
    flags: EngineFlags,
) -> Result<(), CliError> {
    let (_, model) = load_model(&config.config)?;
    let opts = flags.opts();
    let a = run_engine(engine_a, &model, &opts)?;
    let b = run_engine(engine_b, &model, &opts)?;
    let max_abs_mean_diff = a
        .per_slot_mean
        .iter()
        .zip(&b.per_slot_mean)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    let sup_pmf_dist = match (&a.pmfs, &b.pmfs) {
        (Some(pa), Some(pb)) => {
            let mut sup = 0.0f64;
            for (da, db) in pa.iter().zip(pb) {
                let n = da.len().max(db.len());
                for k in 0..n {
                    let x = da.get(k).copied().unwrap_or(0.0);
                    let y = db.get(k).copied().unwrap_or(0.0);
                    sup = sup.max((x - y).abs());
                }
            }
            Some(sup)
        }
        _ => None,
    };
    // When exactly one engine reports confidence intervals, count how many
    // of the other engine's means they cover.
    let coverage = match (&a.ci, &b.ci) {
        (Some(ci), None) => Some(count_covered(ci, &b.per_slot_mean)),
        (None, Some(ci)) => Some(count_covered(ci, &a.per_slot_mean)),
        _ => None,
    };
    let out = json!({
        "schema_version": SCHEMA_VERSION,
        "engines": [format!("{engine_a:?}").to_lowercase(), format!("{engine_b:?}").to_lowercase()],
        "max_abs_mean_diff": max_abs_mean_diff,
        "sup_pmf_dist": sup_pmf_dist,
        "ci_covered": coverage,
        "slots": a.per_slot_mean.len(),
    });
    println!("{out}");
    Ok(())
}

fn count_covered(ci: &[(f64, f64)], means: &[f64]) -> usize {
    ci.iter()
        .zip(means)
        .filter(|((lo, hi), m)| lo <= m && *m <= hi)
        .count()
}

fn cmd_sweep(
    config: ConfigArg,
    engine: Engine,
    param: String,
    range: String,
    flags: EngineFlags,
    dump_configs: Option<PathBuf>,
) -> Result<(), CliError> {
    let (base_cfg, _) = load_model(&config.config)?;
    let points = parse_range(&range)?;
    if let Some(dir) = &dump_configs {
        std::fs::create_dir_all(dir).map_err(|e| CliError {
            kind: "Io".into(),
            message: e.to_string(),
            exit: 2,
            extra: Value::Null,
        })?;
    }

    let opts = flags.opts();
    println!(
        "schema_version,index,param,value,status,r0,arrival_load,rho,mean_queue,mean_delay,overflow_mean,{}",
        (0..=10).map(|j| format!("cdf{j}")).collect::<Vec<_>>().join(",")
    );
    use rayon::prelude::*;
    let rows: Vec<String> = points
        .par_iter()
        .enumerate()
        .map(|(idx, &value)| sweep_row(&base_cfg, engine, &param, idx, value, &opts, &dump_configs))
        .collect();
    for row in rows {
        println!("{row}");
    }
    Ok(())
}

fn apply_param(
    cfg: &bfctl::ModelConfig,
    param: &str,
    value: f64,
) -> Result<bfctl::ModelConfig, String> {
    let mut cfg = cfg.clone();
    match param {
        "p" => cfg.p = vec![value; cfg.g1],
        "q" => cfg.q = vec![value; cfg.g1],
        "m" => {
            if value.fract() != 0.0 || value < 1.0 {
                return Err(format!("m must be a positive integer, got {value}"));
            }
            cfg.m = value as usize;
        }
        "arrivals.mean" => {
            for spec in cfg.arrivals.iter_mut() {
                match spec {
                    bfctl::ArrivalSpec::Poisson { mean }
                    | bfctl::ArrivalSpec::Geometric { mean } => *mean = value,
                    other => {
                        return Err(format!(
                            "arrivals.mean sweep needs poisson/geometric slots, found {other:?}"
                        ))
                    }
                }
            }
        }
        other => return Err(format!("unknown sweep parameter '{other}'")),
    }
    Ok(cfg)
}

/// Total columns of the sweep CSV: 11 named fields plus cdf0..cdf10.
const SWEEP_COLUMNS: usize = 22;

fn sweep_row(
    base: &bfctl::ModelConfig,
    engine: Engine,
    param: &str,
    idx: usize,
    value: f64,
    opts: &EngineOpts,
    dump: &Option<PathBuf>,
) -> String {
    let pad = |mut cells: Vec<String>| -> String {
        cells.resize(SWEEP_COLUMNS, String::new());
        cells.join(",")
    };
    let head = |status: String| {
        vec![
            SCHEMA_VERSION.to_string(),
            idx.to_string(),
            param.to_string(),
            value.to_string(),
            status,
        ]
    };
    let skip = |reason: &str| pad(head(format!("skipped: {}", reason.replace(',', ";"))));
    let cfg = match apply_param(base, param, value) {
        Ok(c) => c,
        Err(e) => return skip(&e),
    };
    if let Some(dir) = dump {
        let path = dir.join(format!("sweep_{idx:04}.json"));
        let _ = std::fs::write(&path, bfctl::model::config_to_json(&cfg).to_string());
    }
    let model = match cfg.validate() {
        Ok(m) => m,
        Err(e) => return skip(&e.to_string()),
    };
    let cap = bfctl::check_stability(&model);
    let stats = match engine {
        Engine::Solve => match bfctl::pgf::solve(&model) {
            Ok(s) => {
                let m = s.metrics();
                let cdf = s
                    .overflow_pmf(opts.nmax.max(10))
                    .map(|p| cdf10(&p.weights))
                    .unwrap_or_default();
                (m.mean_queue, m.mean_delay, m.overflow_mean, cdf)
            }
            Err(e) => return skip(&e.to_string()),
        },
        Engine::Oracle => match bfctl::oracle::stationary(&model, opts.truncation, opts.tol) {
            Ok(o) => {
                let mean_queue = o.per_slot_mean.iter().sum::<f64>() / model.c as f64;
                let load = model.arrival_load();
                let delay = if load > 0.0 {
                    mean_queue / (load / model.c as f64)
                } else {
                    0.0
                };
                let overflow = &o.slots[model.g1 + model.g2 - 1].total;
                let mean: f64 = overflow.iter().enumerate().map(|(k, w)| k as f64 * w).sum();
                (mean_queue, delay, mean, cdf10(overflow))
            }
            Err(e) => return skip(&e.to_string()),
        },
        Engine::Simulate => {
            let rep = bfctl::sim::simulate(&model, opts.cycles, opts.runs, opts.seed);
            let mean_queue = rep.per_slot_mean.iter().sum::<f64>() / model.c as f64;
            let load = model.arrival_load();
            let delay = if load > 0.0 {
                mean_queue / (load / model.c as f64)
            } else {
                0.0
            };
            (mean_queue, delay, rep.overflow_mean, Vec::new())
        }
    };
    let (mean_queue, delay, overflow_mean, cdf) = stats;
    let mut cells = head("ok".to_string());
    cells.extend([
        cap.r0.to_string(),
        cap.arrival_load.to_string(),
        cap.rho.to_string(),
        mean_queue.to_string(),
        delay.to_string(),
        overflow_mean.to_string(),
    ]);
    cells.extend(cdf);
    pad(cells)
}

fn cdf10(pmf: &[f64]) -> Vec<String> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(11);
    for j in 0..=10 {
        acc += pmf.get(j).copied().unwrap_or(0.0);
        out.push(acc.to_string());
    }
    out
}

fn cmd_scenario(
    layout: scenario::Layout,
    mu: Option<f64>,
    mu_range: Option<String>,
    g1: Option<usize>,
    g2: Option<usize>,
    r: Option<usize>,
    expand_only: bool,
) -> Result<(), CliError> {
    let (dg1, dg2, dr) = layout.default_geometry();
    let (g1, g2, r) = (g1.unwrap_or(dg1), g2.unwrap_or(dg2), r.unwrap_or(dr));
    match (mu, mu_range) {
        (Some(mu), None) => {
            if expand_only {
                let configs = scenario::expand(layout, mu, g1, g2, r);
                let out: Vec<Value> = configs.iter().map(bfctl::model::config_to_json).collect();
                println!("{}", Value::Array(out));
                return Ok(());
            }
            let point = scenario::evaluate(layout, mu, g1, g2, r)?;
            println!("{}", scenario::point_json(layout, &point));
            Ok(())
        }
        (None, Some(range)) => {
            let points = parse_range(&range)?;
            println!("schema_version,layout,mu,status,lane1_mean,lane2_mean,total_mean,mean_delay");
            for mu in points {
                let pt = scenario::evaluate(layout, mu, g1, g2, r)?;
                let name = format!("{layout:?}").to_lowercase();
                match &pt.skipped {
                    Some(reason) => println!(
                        "{SCHEMA_VERSION},{name},{mu},skipped: {},,,,",
                        reason.replace(',', ";")
                    ),
                    None => {
                        let l1 = pt.lane_mean_queue.first().copied().unwrap_or(f64::NAN);
                        let l2 = pt.lane_mean_queue.get(1).copied();
                        println!(
                            "{SCHEMA_VERSION},{name},{mu},ok,{l1},{},{},{}",
                            l2.map(|v| v.to_string()).unwrap_or_default(),
                            pt.total_mean_queue,
                            pt.mean_delay
                        );
                    }
                }
            }
            Ok(())
        }
        _ => Err(CliError {
            kind: "InvalidArgument".into(),
            message: "scenario needs exactly one of --mu or --mu-range".into(),
            exit: 2,
            extra: Value::Null,
        }),
    }
}
