//! Monte Carlo validation of the bFCTL queue.
//!
//! Mirrors the reference discrete-event semantics exactly: during the
//! first green part an existing blockage is resolved (or persists,
//! accumulating the slot's arrivals) before any service; a new blockage
//! requires both the turning draw and the pedestrian draw and also
//! accumulates the slot's arrivals; unblocked green slots serve
//! `min(m, queue)` with short queues clearing entirely; red slots only
//! accumulate. This includes the reference treatment of blockages started
//! at an empty queue, where the whole slot's arrivals are held.

use crate::model::ValidatedModel;
use crate::transform::ArrivalSpec;
use rand::distributions::Distribution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct SimReport {
    /// Mean queue length at the end of each slot.
    pub per_slot_mean: Vec<f64>,
    /// 95% confidence bounds per slot, from per-run means and the
    /// t-distribution with `runs - 1` degrees of freedom.
    pub per_slot_ci: Vec<(f64, f64)>,
    pub overflow_mean: f64,
    pub overflow_ci: (f64, f64),
    pub runs: usize,
    pub cycles_per_run: usize,
    pub seed: u64,
}

/// SplitMix64 step; documented run-stream derivation:
/// `run_seed(seed, i) = splitmix64(seed + (i+1) * 0x9E3779B97F4A7C15)`.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

pub fn run_stream_seed(seed: u64, run: usize) -> u64 {
    splitmix64(seed.wrapping_add((run as u64).wrapping_mul(0x9E3779B97F4A7C15)))
}

enum Sampler {
    Poisson(rand_distr::Poisson<f64>),
    Zero,
    Deterministic(u64),
    Geometric(rand_distr::Geometric),
    /// Inverse-CDF table for explicit pmfs.
    Table(Vec<f64>),
}

impl Sampler {
    fn new(spec: &ArrivalSpec) -> Self {
        match spec {
            ArrivalSpec::Poisson { mean } => {
                if *mean == 0.0 {
                    Sampler::Zero
                } else {
                    Sampler::Poisson(rand_distr::Poisson::new(*mean).unwrap())
                }
            }
            ArrivalSpec::Geometric { mean } => {
                if *mean == 0.0 {
                    Sampler::Zero
                } else {
                    Sampler::Geometric(rand_distr::Geometric::new(1.0 / (1.0 + mean)).unwrap())
                }
            }
            ArrivalSpec::Deterministic { k } => Sampler::Deterministic(*k as u64),
            ArrivalSpec::Explicit { weights } => {
                let mut cdf = Vec::with_capacity(weights.len());
                let mut acc = 0.0;
                for &w in weights {
                    acc += w;
                    cdf.push(acc);
                }
                Sampler::Table(cdf)
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha12Rng) -> u64 {
        match self {
            Sampler::Poisson(d) => d.sample(rng) as u64,
            Sampler::Zero => 0,
            Sampler::Deterministic(k) => *k,
            Sampler::Geometric(d) => d.sample(rng),
            Sampler::Table(cdf) => {
                let u: f64 = rng.gen();
                cdf.iter().position(|&c| u <= c).unwrap_or(cdf.len() - 1) as u64
            }
        }
    }
}

struct RunResult {
    slot_sums: Vec<f64>,
    overflow_sum: f64,
}

fn run_once(model: &ValidatedModel, ncycles: usize, rng_seed: u64) -> RunResult {
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    let samplers: Vec<Sampler> = model.arrivals.iter().map(Sampler::new).collect();
    let c = model.c;
    let g1 = model.g1;
    let g = model.g1 + model.g2;
    let m = model.m as u64;
    let mut slot_sums = vec![0.0; c];
    let mut overflow_sum = 0.0;
    let mut x: u64 = 0;
    let mut blocked = false;
    for _ in 0..ncycles {
        for j in 0..c {
            let arr = samplers[j].sample(&mut rng);
            // Fixed draw order per slot keeps runs bit-reproducible.
            let (ped, turning) = if j < g1 {
                let ped = rng.gen::<f64>() < model.q[j];
                let turning = rng.gen::<f64>() < model.p[j];
                (ped, turning)
            } else {
                (false, false)
            };
            if j < g1 {
                if blocked {
                    if !ped {
                        blocked = false;
                    } else {
                        x += arr;
                    }
                } else if turning && ped {
                    blocked = true;
                    x += arr;
                }
            } else if j < g {
                blocked = false;
            } else {
                x += arr;
            }
            if j < g && !blocked {
                if x < m {
                    x = 0;
                } else {
                    x = x + arr - m;
                }
            }
            slot_sums[j] += x as f64;
            if j == g - 1 {
                overflow_sum += x as f64;
            }
        }
    }
    RunResult {
        slot_sums,
        overflow_sum,
    }
}

fn t_quantile_975(dof: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    StudentsT::new(0.0, 1.0, dof)
        .map(|d| d.inverse_cdf(0.975))
        .unwrap_or(1.96)
}

/// Simulate `nruns` independent replications of `ncycles` cycles each.
///
/// Identical `(model, ncycles, nruns, seed)` inputs reproduce the report
/// bit for bit; each run draws from its own stream derived by
/// [`run_stream_seed`].
pub fn simulate(model: &ValidatedModel, ncycles: usize, nruns: usize, seed: u64) -> SimReport {
    assert!(ncycles >= 100, "ncycles must be at least 100");
    assert!(nruns >= 2, "nruns must be at least 2");
    let results: Vec<RunResult> = {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..nruns)
                .into_par_iter()
                .map(|r| run_once(model, ncycles, run_stream_seed(seed, r)))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..nruns)
                .map(|r| run_once(model, ncycles, run_stream_seed(seed, r)))
                .collect()
        }
    };

    let c = model.c;
    let nc = ncycles as f64;
    let tq = t_quantile_975(nruns as f64 - 1.0);
    let mut per_slot_mean = Vec::with_capacity(c);
    let mut per_slot_ci = Vec::with_capacity(c);
    for j in 0..c {
        let per_run: Vec<f64> = results.iter().map(|r| r.slot_sums[j] / nc).collect();
        let (mean, half) = mean_and_halfwidth(&per_run, tq);
        per_slot_mean.push(mean);
        per_slot_ci.push((mean - half, mean + half));
    }
    let per_run_overflow: Vec<f64> = results.iter().map(|r| r.overflow_sum / nc).collect();
    let (overflow_mean, half) = mean_and_halfwidth(&per_run_overflow, tq);
    SimReport {
        per_slot_mean,
        per_slot_ci,
        overflow_mean,
        overflow_ci: (overflow_mean - half, overflow_mean + half),
        runs: nruns,
        cycles_per_run: ncycles,
        seed,
    }
}

fn mean_and_halfwidth(xs: &[f64], tq: f64) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, tq * (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    #[test]
    fn zero_arrivals_zero_queues() {
        let model = ModelConfig::uniform_poisson(2, 4, 4, 1, 0.0, 0.6, 1.0)
            .validate()
            .unwrap();
        let rep = simulate(&model, 200, 3, 7);
        assert!(rep.per_slot_mean.iter().all(|&v| v == 0.0));
        assert_eq!(rep.overflow_ci, (0.0, 0.0));
    }

    #[test]
    fn bit_reproducible() {
        let model = ModelConfig::uniform_poisson(2, 4, 4, 1, 0.39, 0.6, 1.0)
            .validate()
            .unwrap();
        let a = simulate(&model, 300, 4, 42);
        let b = simulate(&model, 300, 4, 42);
        assert_eq!(a.per_slot_mean, b.per_slot_mean);
        assert_eq!(a.per_slot_ci, b.per_slot_ci);
        let c = simulate(&model, 300, 4, 43);
        assert_ne!(a.per_slot_mean, c.per_slot_mean);
    }

    #[test]
    fn ci_brackets_mean_and_shrinks() {
        let model = ModelConfig::uniform_poisson(2, 4, 4, 1, 0.3, 0.0, 0.0)
            .validate()
            .unwrap();
        let small = simulate(&model, 400, 5, 1);
        let large = simulate(&model, 400, 50, 1);
        for j in 0..model.c {
            let (lo, hi) = small.per_slot_ci[j];
            assert!(lo <= small.per_slot_mean[j] && small.per_slot_mean[j] <= hi);
        }
        let w_small: f64 = small
            .per_slot_ci
            .iter()
            .map(|(lo, hi)| hi - lo)
            .sum::<f64>();
        let w_large: f64 = large
            .per_slot_ci
            .iter()
            .map(|(lo, hi)| hi - lo)
            .sum::<f64>();
        assert!(w_large < w_small);
    }
}
