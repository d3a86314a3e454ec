//! Independent exact solver: the truncated discrete-time Markov chain over
//! (slot, queue length, blocked flag), power-iterated to the per-slot
//! stationary distributions.
//!
//! Mass above the truncation level `L` is lumped into state `L` (no mass
//! is discarded), so normalisation stays exact and the truncation bias is
//! tracked explicitly.

use crate::capacity::check_stability;
use crate::error::OracleError;
use crate::model::ValidatedModel;
use crate::transform::Pmf;

/// Per-slot stationary distribution; the blocked split exists only for
/// first-green slots.
#[derive(Clone, Debug)]
pub struct SlotDist {
    pub total: Vec<f64>,
    pub blocked: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct OracleSolution {
    /// Distribution at the end of each slot, `i = 1..=c`.
    pub slots: Vec<SlotDist>,
    pub per_slot_mean: Vec<f64>,
    /// Expected departures per cycle at the fixed point.
    pub throughput: f64,
    /// Truncation bias tracker: the larger of the mass newly lumped during
    /// one cycle application and the stationary first moment held by the
    /// lump state, `max_i L * P(X_i = L)`. The latter bounds how far any
    /// reported mean can move when `L` grows.
    pub truncation_mass: f64,
    pub iterations: usize,
    pub l: usize,
}

/// Arrival laws with the truncated tail mass folded into the top entry,
/// so every kernel application is exactly stochastic.
struct LumpedLaws {
    y: Vec<Vec<f64>>,
    yb: Vec<Vec<f64>>,
}

impl LumpedLaws {
    fn new(model: &ValidatedModel) -> Self {
        let lump = |p: &crate::transform::Pmf| -> Vec<f64> {
            let mut w = p.weights.clone();
            if w.is_empty() {
                w.push(1.0);
            }
            let deficit = 1.0 - w.iter().sum::<f64>();
            if deficit > 0.0 {
                let last = w.len() - 1;
                w[last] += deficit;
            }
            w
        };
        LumpedLaws {
            y: model.y_pmf.iter().map(lump).collect(),
            yb: model.yb_pmf.iter().map(lump).collect(),
        }
    }
}

/// State vector: unblocked and blocked parts over queue lengths `0..=L`.
#[derive(Clone)]
struct Dist {
    u: Vec<f64>,
    b: Vec<f64>,
}

impl Dist {
    fn empty(l: usize) -> Self {
        let mut u = vec![0.0; l + 1];
        u[0] = 1.0;
        Dist {
            u,
            b: vec![0.0; l + 1],
        }
    }

    fn tv(&self, o: &Dist) -> f64 {
        let mut s = 0.0;
        for (a, b) in self.u.iter().zip(&o.u) {
            s += (a - b).abs();
        }
        for (a, b) in self.b.iter().zip(&o.b) {
            s += (a - b).abs();
        }
        0.5 * s
    }

    fn mass(&self) -> f64 {
        self.u.iter().sum::<f64>() + self.b.iter().sum::<f64>()
    }
}

struct StepStats {
    lumped: f64,
    departures: f64,
}

fn add_lumped(target: &mut [f64], idx: usize, mass: f64, l: usize, lumped: &mut f64) {
    if idx > l {
        target[l] += mass;
        *lumped += mass;
    } else {
        target[idx] += mass;
    }
}

/// One slot transition `end of slot i-1 -> end of slot i` (1-based `i`).
fn step(
    model: &ValidatedModel,
    laws: &LumpedLaws,
    dist: &Dist,
    slot: usize,
    l: usize,
) -> (Dist, StepStats) {
    let m = model.m;
    let g1 = model.g1;
    let g2 = model.g2;
    let y = &laws.y[slot - 1];
    let ey = model.y[slot - 1].mean();
    let mut next = Dist {
        u: vec![0.0; l + 1],
        b: vec![0.0; l + 1],
    };
    let mut lumped = 0.0;
    let mut departures = 0.0;

    if slot <= g1 {
        let p = model.p[slot - 1];
        let q = model.q[slot - 1];
        let pq = p * q;
        let yb = &laws.yb[slot - 1];
        let eyb = model.yb[slot - 1].mean();
        for x in 0..=l {
            let wu = dist.u[x];
            if wu > 0.0 {
                if x == 0 {
                    // Empty unblocked queue: pedestrians block the arrivals
                    // from the first turning vehicle onward.
                    next.u[0] += wu * (1.0 - q);
                    next.u[0] += wu * q * yb.first().copied().unwrap_or(0.0);
                    for (k, &wk) in yb.iter().enumerate().skip(1) {
                        add_lumped(&mut next.b, k, wu * q * wk, l, &mut lumped);
                    }
                    departures += wu * (ey - q * eyb);
                } else {
                    // New head batch: blocked with probability p q.
                    for (k, &wk) in y.iter().enumerate() {
                        add_lumped(&mut next.b, x + k, wu * pq * wk, l, &mut lumped);
                    }
                    if x >= m {
                        for (k, &wk) in y.iter().enumerate() {
                            add_lumped(
                                &mut next.u,
                                x + k - m,
                                wu * (1.0 - pq) * wk,
                                l,
                                &mut lumped,
                            );
                        }
                        departures += wu * (1.0 - pq) * m as f64;
                    } else {
                        next.u[0] += wu * (1.0 - pq);
                        departures += wu * (1.0 - pq) * (x as f64 + ey);
                    }
                }
            }
            let wb = dist.b[x];
            if wb > 0.0 {
                // Blockage persists with probability q.
                for (k, &wk) in y.iter().enumerate() {
                    add_lumped(&mut next.b, x + k, wb * q * wk, l, &mut lumped);
                }
                if x >= m {
                    for (k, &wk) in y.iter().enumerate() {
                        add_lumped(&mut next.u, x + k - m, wb * (1.0 - q) * wk, l, &mut lumped);
                    }
                    departures += wb * (1.0 - q) * m as f64;
                } else {
                    next.u[0] += wb * (1.0 - q);
                    departures += wb * (1.0 - q) * (x as f64 + ey);
                }
            }
        }
    } else if slot <= g1 + g2 {
        for x in 0..=l {
            let w = dist.u[x] + dist.b[x];
            if w == 0.0 {
                continue;
            }
            if x >= m {
                for (k, &wk) in y.iter().enumerate() {
                    add_lumped(&mut next.u, x + k - m, w * wk, l, &mut lumped);
                }
                departures += w * m as f64;
            } else {
                next.u[0] += w;
                departures += w * (x as f64 + ey);
            }
        }
    } else {
        for x in 0..=l {
            let w = dist.u[x] + dist.b[x];
            if w == 0.0 {
                continue;
            }
            for (k, &wk) in y.iter().enumerate() {
                add_lumped(&mut next.u, x + k, w * wk, l, &mut lumped);
            }
        }
    }

    (next, StepStats { lumped, departures })
}

/// Apply one full cycle, optionally recording each end-of-slot state.
fn cycle(
    model: &ValidatedModel,
    laws: &LumpedLaws,
    start: &Dist,
    l: usize,
    mut record: Option<&mut Vec<Dist>>,
) -> (Dist, f64, f64) {
    let mut cur = start.clone();
    let mut lumped = 0.0;
    let mut departures = 0.0;
    for slot in 1..=model.c {
        let (next, stats) = step(model, laws, &cur, slot, l);
        lumped += stats.lumped;
        departures += stats.departures;
        cur = next;
        if let Some(rec) = record.as_deref_mut() {
            rec.push(cur.clone());
        }
    }
    (cur, lumped, departures)
}

/// Iterate the cycle map to the per-slot stationary distributions.
///
/// `l` is the truncation level (queue lengths `0..=l`), `tol` the total
/// variation threshold between successive end-of-cycle distributions.
pub fn stationary(
    model: &ValidatedModel,
    l: usize,
    tol: f64,
) -> Result<OracleSolution, OracleError> {
    let need = (10.0 * model.arrival_load()).ceil() as usize;
    let need = need.max(model.m);
    if l < need {
        return Err(OracleError::TruncationTooSmall { l, need });
    }
    let report = check_stability(model);
    if !report.stable {
        return Err(OracleError::Unstable {
            r0: report.r0,
            load: report.arrival_load,
        });
    }

    let laws = LumpedLaws::new(model);
    let cap: usize = 1_000_000;
    let mut cur = Dist::empty(l);
    let mut prev_tv = f64::INFINITY;
    let mut history: Vec<Dist> = Vec::new();
    let mut iterations = 0usize;
    let mut stalled = 0usize;
    loop {
        let (next, _, _) = cycle(model, &laws, &cur, l, None);
        iterations += 1;
        let tv = next.tv(&cur);
        // Periodic componentwise Aitken extrapolation; accepted only when
        // it actually reduces the cycle residual.
        if iterations.is_multiple_of(16) && history.len() >= 2 && tv < prev_tv {
            let x0 = &history[history.len() - 2];
            let x1 = &history[history.len() - 1];
            let mut acc = next.clone();
            let mut valid = true;
            for (slot, part) in [0usize, 1].into_iter().enumerate() {
                let _ = slot;
                let (a0, a1, a2) = match part {
                    0 => (&x0.u, &x1.u, &next.u),
                    _ => (&x0.b, &x1.b, &next.b),
                };
                let target = if part == 0 { &mut acc.u } else { &mut acc.b };
                for j in 0..a0.len() {
                    let d1 = a1[j] - a0[j];
                    let d2 = a2[j] - a1[j];
                    let dd = d2 - d1;
                    if dd.abs() > 1e-300 {
                        let v = a2[j] - d2 * d2 / dd;
                        if v.is_finite() {
                            target[j] = v.max(0.0);
                        } else {
                            valid = false;
                        }
                    }
                }
            }
            if valid {
                let mass = acc.mass();
                if mass > 0.5 {
                    for v in acc.u.iter_mut().chain(acc.b.iter_mut()) {
                        *v /= mass;
                    }
                    let (after, _, _) = cycle(model, &laws, &acc, l, None);
                    if after.tv(&acc) < tv {
                        cur = acc;
                        history.clear();
                        prev_tv = tv;
                        continue;
                    }
                }
            }
        }
        history.push(next.clone());
        if history.len() > 3 {
            history.remove(0);
        }
        // Round-off floor: the map contracts until TV stops improving.
        if tv < 1e-10 && tv >= prev_tv * 0.9 {
            stalled += 1;
        } else {
            stalled = 0;
        }
        let done = tv < tol || stalled > 64;
        cur = next;
        prev_tv = tv;
        if done {
            break;
        }
        if iterations >= cap {
            return Err(OracleError::NoConvergence { cap, last_tv: tv });
        }
    }

    // Final recording pass from the fixed point.
    let mut rec: Vec<Dist> = Vec::with_capacity(model.c);
    let (_, lumped, departures) = cycle(model, &laws, &cur, l, Some(&mut rec));
    let parked = rec
        .iter()
        .map(|d| (d.u[l] + d.b[l]) * l as f64)
        .fold(0.0f64, f64::max);
    let slots: Vec<SlotDist> = rec
        .iter()
        .enumerate()
        .map(|(j, d)| {
            let total: Vec<f64> = d.u.iter().zip(&d.b).map(|(a, b)| a + b).collect();
            let blocked = if j < model.g1 {
                Some(d.b.clone())
            } else {
                debug_assert!(d.b.iter().all(|&v| v == 0.0));
                None
            };
            SlotDist { total, blocked }
        })
        .collect();
    let per_slot_mean = slots
        .iter()
        .map(|s| s.total.iter().enumerate().map(|(x, &w)| x as f64 * w).sum())
        .collect();
    Ok(OracleSolution {
        slots,
        per_slot_mean,
        throughput: departures,
        truncation_mass: lumped.max(parked),
        iterations,
        l,
    })
}

impl OracleSolution {
    pub fn slot_pmf(&self, i: usize) -> Pmf {
        Pmf {
            weights: self.slots[i - 1].total.clone(),
            tail_eps: 0.0,
        }
    }
}

/// The composed one-cycle stochastic map on truncated states, exposed for
/// direct kernel-level checks.
pub struct CycleKernel<'a> {
    model: &'a ValidatedModel,
    laws: LumpedLaws,
    l: usize,
}

pub struct CycleApplication {
    /// End-of-slot distributions over `0..=L` (blocked part merged in).
    pub slots: Vec<SlotDist>,
    /// End-of-cycle unblocked distribution (the blocked part is empty
    /// because `g2 >= 1`).
    pub end: Vec<f64>,
    pub lumped_mass: f64,
    pub expected_departures: f64,
}

impl<'a> CycleKernel<'a> {
    pub fn new(model: &'a ValidatedModel, l: usize) -> Result<Self, OracleError> {
        let need = ((10.0 * model.arrival_load()).ceil() as usize).max(model.m);
        if l < need {
            return Err(OracleError::TruncationTooSmall { l, need });
        }
        Ok(CycleKernel {
            model,
            laws: LumpedLaws::new(model),
            l,
        })
    }

    /// Apply one full cycle starting from an unblocked end-of-cycle queue
    /// distribution (excess weight is lumped at `L`).
    pub fn apply(&self, start: &[f64]) -> CycleApplication {
        let mut dist = Dist {
            u: vec![0.0; self.l + 1],
            b: vec![0.0; self.l + 1],
        };
        for (x, &w) in start.iter().enumerate() {
            dist.u[x.min(self.l)] += w;
        }
        let mut rec = Vec::with_capacity(self.model.c);
        let (end, lumped, departures) =
            cycle(self.model, &self.laws, &dist, self.l, Some(&mut rec));
        let slots = rec
            .iter()
            .enumerate()
            .map(|(j, d)| SlotDist {
                total: d.u.iter().zip(&d.b).map(|(a, b)| a + b).collect(),
                blocked: (j < self.model.g1).then(|| d.b.clone()),
            })
            .collect();
        CycleApplication {
            slots,
            end: end.u,
            lumped_mass: lumped,
            expected_departures: departures,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    #[test]
    fn zero_arrivals_fixed_immediately() {
        let model = ModelConfig::uniform_poisson(2, 4, 4, 1, 0.0, 0.5, 1.0)
            .validate()
            .unwrap();
        let sol = stationary(&model, 20, 1e-12).unwrap();
        assert_eq!(sol.iterations, 1);
        for s in &sol.slots {
            assert!((s.total[0] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_blocking_path() {
        // p = q = 1, m = 1: a lone vehicle present at the start of the
        // cycle stays blocked through g1 and departs in the first g2 slot.
        let mut cfg = ModelConfig::uniform_poisson(2, 4, 4, 1, 0.0, 1.0, 1.0);
        cfg.arrivals[9] = crate::transform::ArrivalSpec::Deterministic { k: 1 };
        let model = cfg.validate().unwrap();
        let sol = stationary(&model, 30, 1e-12).unwrap();
        // End of slot 1 and 2: queue of one, blocked.
        for i in [1, 2] {
            assert!((sol.slots[i - 1].total[1] - 1.0).abs() < 1e-12, "slot {i}");
            assert!((sol.slots[i - 1].blocked.as_ref().unwrap()[1] - 1.0).abs() < 1e-12);
        }
        // Departs in slot 3 (first slot of the second green part).
        assert!((sol.slots[2].total[0] - 1.0).abs() < 1e-12);
        assert!((sol.throughput - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_conserves_mass() {
        let model = ModelConfig::uniform_poisson(2, 4, 4, 1, 0.39, 0.6, 1.0)
            .validate()
            .unwrap();
        let kernel = CycleKernel::new(&model, 50).unwrap();
        let mut start = vec![0.0; 51];
        start[0] = 0.3;
        start[7] = 0.7;
        let out = kernel.apply(&start);
        let total: f64 = out.end.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for s in &out.slots {
            assert!((s.total.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(CycleKernel::new(&model, 3).is_err());
    }

    #[test]
    fn throughput_matches_load() {
        let model = ModelConfig::uniform_poisson(2, 4, 4, 1, 0.3, 0.5, 0.7)
            .validate()
            .unwrap();
        let sol = stationary(&model, 120, 1e-12).unwrap();
        assert!((sol.throughput - model.arrival_load()).abs() < 1e-9 + sol.truncation_mass * 10.0);
    }

    #[test]
    fn blocked_mass_never_outside_first_green() {
        let model = ModelConfig::uniform_poisson(3, 3, 3, 2, 0.4, 1.0, 0.8)
            .validate()
            .unwrap();
        let sol = stationary(&model, 100, 1e-12).unwrap();
        for (j, s) in sol.slots.iter().enumerate() {
            if j + 1 > model.g1 {
                assert!(s.blocked.is_none());
            }
        }
    }
}
