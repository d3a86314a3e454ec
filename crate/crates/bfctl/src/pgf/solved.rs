//! Solved model: boundary probabilities substituted back into the cycle
//! forms, exposing per-slot PGFs, distributions and performance measures.

use super::form::{cleared_degree, propagate_cycle, CycleForms, JetCtx};
use super::invert;
use super::roots::{find_roots, RootGroup};
use super::system::{assemble_system, solve_system};
use super::unknowns::UnknownIndex;
use crate::error::SolveError;
use crate::jet::Jet;
use crate::model::ValidatedModel;
use crate::transform::Pmf;
use num_complex::Complex64;
use serde::Serialize;

/// Performance measures of a solved model.
#[derive(Clone, Debug, Serialize)]
pub struct Metrics {
    /// `E[X_i]` at the end of each slot, `i = 1..=c`.
    pub per_slot_mean: Vec<f64>,
    /// Mean queue length at the end of an arbitrary slot.
    pub mean_queue: f64,
    /// Mean delay in slots by Little's law with time-varying rates.
    pub mean_delay: f64,
    /// False when the arrival load is zero and the delay is reported as 0.
    pub delay_defined: bool,
    pub overflow_mean: f64,
    pub overflow_variance: f64,
    /// Mean departures per cycle computed from the solved distributions.
    pub throughput_per_cycle: f64,
    pub arrival_load: f64,
}

pub struct SolvedModel {
    pub model: ValidatedModel,
    pub idx: UnknownIndex,
    pub labels: Vec<String>,
    /// Solved boundary probabilities, clamped into [0, 1].
    pub unknowns: Vec<f64>,
    /// Solver output before clamping.
    pub raw_unknowns: Vec<f64>,
    pub roots: Vec<RootGroup>,
    pub winding: i64,
    pub residual: f64,
    pub condition: f64,
}

/// Run the full analytic pipeline: stability gate, certified roots,
/// boundary system, verification and clamping.
pub fn solve(model: &ValidatedModel) -> Result<SolvedModel, SolveError> {
    let rootset = find_roots(model)?;
    let sys = assemble_system(model, &rootset)?;
    let sol = solve_system(&sys)?;
    if sol.residual > 1e-8 {
        return Err(SolveError::SingularSystem {
            cond: sol.condition,
        });
    }
    let idx = UnknownIndex::new(model.g1, model.g2, model.m);
    let mut unknowns = sol.unknowns.clone();
    for (j, v) in unknowns.iter_mut().enumerate() {
        if *v < -1e-6 || *v > 1.0 + 1e-6 {
            return Err(SolveError::UnknownOutOfRange {
                label: idx.label(j),
                value: *v,
            });
        }
        *v = v.clamp(0.0, 1.0);
    }
    Ok(SolvedModel {
        model: model.clone(),
        labels: idx.labels(),
        idx,
        unknowns,
        raw_unknowns: sol.unknowns,
        roots: rootset.groups,
        winding: rootset.winding,
        residual: sol.residual,
        condition: sol.condition,
    })
}

/// Jets of every slot PGF at one evaluation point.
pub struct SlotEval {
    /// `X_i(z)` for `i = 1..=c`.
    pub total: Vec<Jet>,
    /// `(X_{i,u}(z), X_{i,b}(z))` for `i = 1..=g1`.
    pub partials: Vec<(Jet, Jet)>,
    /// The overflow PGF jet.
    pub overflow: Jet,
}

impl SolvedModel {
    fn forms_at(&self, z: Complex64) -> CycleForms<Jet> {
        let ctx = JetCtx::new(&self.model, z);
        propagate_cycle(&self.model, &ctx)
    }

    /// Overflow jet from `(A, B)` forms; away from z = 1 a plain quotient,
    /// at z = 1 the derivative-ratio limit (order 2).
    fn overflow_jet(&self, forms: &CycleForms<Jet>, z: Complex64) -> Jet {
        let of = forms.overflow();
        let mut acc = of.const_term;
        for (j, coef) in of.coeffs.iter().enumerate() {
            if self.unknowns[j] != 0.0 {
                acc = acc.add(&coef.scale(self.unknowns[j]));
            }
        }
        if (z - Complex64::ONE).norm() < 1e-9 {
            let mm = cleared_degree(&self.model) as i64;
            let zm = Jet::var(z).powi(mm);
            let num = acc.mul(&zm);
            let den = zm.mul(&Jet::constant(Complex64::ONE).sub(&of.multiplier));
            return shifted_quotient(&num, &den);
        }
        let one_minus_a = Jet::constant(Complex64::ONE).sub(&of.multiplier);
        acc.div(&one_minus_a)
    }

    /// Evaluate every per-slot PGF at `z` (`z != 0`, `|z| <= 1 + eps`).
    pub fn eval_slots(&self, z: Complex64) -> SlotEval {
        let forms = self.forms_at(z);
        let x = self.overflow_jet(&forms, z);
        let total = (1..=self.model.c)
            .map(|i| forms.slot_total(i).eval(&x, &self.unknowns))
            .collect();
        let partials = (0..self.model.g1)
            .map(|i| {
                (
                    forms.u[i].eval(&x, &self.unknowns),
                    forms.b[i].eval(&x, &self.unknowns),
                )
            })
            .collect();
        SlotEval {
            total,
            partials,
            overflow: x,
        }
    }

    /// Per-slot PGF value.
    pub fn slot_pgf(&self, i: usize, z: Complex64) -> Complex64 {
        self.eval_slots(z).total[i - 1].value()
    }

    /// Mean queue length at the end of slot `i` (1-based).
    pub fn slot_mean(&self, i: usize) -> f64 {
        self.eval_slots(Complex64::ONE).total[i - 1].d1().re
    }

    /// Largest deviation of any `X_i(1)` from 1.
    pub fn normalization_defect(&self) -> f64 {
        let at1 = self.eval_slots(Complex64::ONE);
        at1.total
            .iter()
            .map(|j| (j.value() - Complex64::ONE).norm())
            .fold(0.0, f64::max)
    }

    /// The inversion plan used for `n_max`, with quadrature nodes kept
    /// away from denominator roots.
    pub fn inversion_plan(&self, n_max: usize) -> invert::InversionPlan {
        let mut plan = invert::plan(n_max);
        for _ in 0..12 {
            let nodes = invert::nodes(&plan);
            let clash = nodes
                .iter()
                .any(|nz| self.roots.iter().any(|g| (g.z - nz).norm() < 1e-7));
            if !clash {
                break;
            }
            plan = invert::plan_with_points(n_max, plan.n_points + 2);
        }
        plan
    }

    /// Queue-length pmfs for all slots up to `n_max`, by lattice inversion.
    pub fn queue_pmfs(&self, n_max: usize) -> Result<Vec<Pmf>, SolveError> {
        assert!(n_max >= 1, "n_max must be at least 1");
        let plan = self.inversion_plan(n_max);
        let nodes = invert::nodes(&plan);
        let c = self.model.c;
        let n = plan.n_points;
        let mut values: Vec<Vec<Complex64>> = vec![vec![Complex64::ZERO; n]; c];
        // Real coefficients: conjugate symmetry halves the evaluations.
        for k in 0..=n / 2 {
            let ev = self.eval_slots(nodes[k]);
            for (slot, vals) in values.iter_mut().enumerate() {
                vals[k] = ev.total[slot].value();
                if k > 0 && k < n - k {
                    vals[n - k] = ev.total[slot].value().conj();
                }
            }
        }
        values
            .into_iter()
            .map(|vals| {
                invert::invert(&plan, &vals, n_max).map(|weights| {
                    let total: f64 = weights.iter().sum();
                    Pmf {
                        weights,
                        tail_eps: (1.0 - total).max(0.0),
                    }
                })
            })
            .collect()
    }

    /// Queue-length pmf of one slot.
    pub fn queue_pmf(&self, i: usize, n_max: usize) -> Result<Pmf, SolveError> {
        Ok(self.queue_pmfs(n_max)?.swap_remove(i - 1))
    }

    /// Overflow-queue pmf (end of the green period).
    pub fn overflow_pmf(&self, n_max: usize) -> Result<Pmf, SolveError> {
        self.queue_pmf(self.model.g1 + self.model.g2, n_max)
    }

    /// Mean departures per cycle from the stationary distributions: both
    /// delayed vehicles served in unblocked green slots and vehicles that
    /// pass through a short or empty queue.
    pub fn throughput_per_cycle(&self) -> f64 {
        let at1 = self.eval_slots(Complex64::ONE);
        let m = self.model.m;
        let mf = m as f64;
        let g1 = self.model.g1;
        let g2 = self.model.g2;
        let mut dep = 0.0;
        for i in 1..=(g1 + g2) {
            let ey = self.model.y[i - 1].mean();
            if i <= g1 {
                let pq = self.model.p[i - 1] * self.model.q[i - 1];
                let q = self.model.q[i - 1];
                let eyb = self.model.yb[i - 1].mean();
                let (uval, bval) = if i == 1 {
                    (at1.total[self.model.c - 1].value().re, 0.0)
                } else {
                    (
                        at1.partials[i - 2].0.value().re,
                        at1.partials[i - 2].1.value().re,
                    )
                };
                let pu = |l: usize| {
                    if i == 1 {
                        self.unknowns[self.idx.xc(l)]
                    } else {
                        self.unknowns[self.idx.u(i - 1, l)]
                    }
                };
                let pb = |l: usize| {
                    if i == 1 {
                        0.0
                    } else {
                        self.unknowns[self.idx.b(i - 1, l)]
                    }
                };
                let small_u: f64 = (0..m).map(&pu).sum();
                let small_b: f64 = (1..m).map(&pb).sum();
                dep += (1.0 - pq) * (mf * (uval - small_u));
                dep += (1.0 - q) * (mf * (bval - small_b));
                for l in 1..m {
                    dep += (1.0 - pq) * pu(l) * (l as f64 + ey);
                    dep += (1.0 - q) * pb(l) * (l as f64 + ey);
                }
                dep += pu(0) * (ey - q * eyb);
            } else {
                // Second green part: the previous slot's state is pooled.
                let pl = |l: usize| -> f64 {
                    if i == g1 + 1 {
                        if g1 == 0 {
                            self.unknowns[self.idx.xc(l)]
                        } else {
                            self.unknowns[self.idx.u(g1, l)]
                                + if l >= 1 {
                                    self.unknowns[self.idx.b(g1, l)]
                                } else {
                                    0.0
                                }
                        }
                    } else {
                        self.unknowns[self.idx.mid(i - 1, l)]
                    }
                };
                let prev_total = if i == g1 + 1 && g1 > 0 {
                    at1.partials[g1 - 1].0.value().re + at1.partials[g1 - 1].1.value().re
                } else if i == g1 + 1 {
                    at1.total[self.model.c - 1].value().re
                } else {
                    at1.total[i - 2].value().re
                };
                let small: f64 = (0..m).map(&pl).sum();
                dep += mf * (prev_total - small);
                for l in 0..m {
                    dep += pl(l) * (l as f64 + ey);
                }
            }
        }
        dep
    }

    /// All aggregate performance measures.
    pub fn metrics(&self) -> Metrics {
        let at1 = self.eval_slots(Complex64::ONE);
        let per_slot_mean: Vec<f64> = at1.total.iter().map(|j| j.d1().re).collect();
        let c = self.model.c as f64;
        let mean_queue = per_slot_mean.iter().sum::<f64>() / c;
        let arrival_load = self.model.arrival_load();
        let delay_defined = arrival_load > 0.0;
        let mean_delay = if delay_defined {
            mean_queue / (arrival_load / c)
        } else {
            0.0
        };
        let x = &at1.overflow;
        let overflow_mean = x.d1().re;
        let overflow_variance = x.d2().re + overflow_mean - overflow_mean * overflow_mean;
        Metrics {
            per_slot_mean,
            mean_queue,
            mean_delay,
            delay_defined,
            overflow_mean,
            overflow_variance,
            throughput_per_cycle: self.throughput_per_cycle(),
            arrival_load,
        }
    }
}

/// Quotient of two jets that share a root at the expansion point:
/// divide out `(z - z0)` from both (twice if needed) and return the
/// remaining order-2 quotient jet.
fn shifted_quotient(num: &Jet, den: &Jet) -> Jet {
    let (mut n, mut d) = (*num, *den);
    debug_assert!(n.c[0].norm() < 1e-6, "numerator does not vanish at z=1");
    let mut shifts = 0;
    loop {
        // Drop the (vanishing) constant terms.
        for k in 0..3 {
            n.c[k] = n.c[k + 1];
            d.c[k] = d.c[k + 1];
        }
        n.c[3] = Complex64::ZERO;
        d.c[3] = Complex64::ZERO;
        shifts += 1;
        if d.c[0].norm() >= 1e-10 || shifts >= 2 {
            break;
        }
    }
    let x0 = n.c[0] / d.c[0];
    let x1 = (n.c[1] - x0 * d.c[1]) / d.c[0];
    let x2 = (n.c[2] - x0 * d.c[2] - x1 * d.c[1]) / d.c[0];
    Jet {
        c: [x0, x1, x2, Complex64::ZERO],
    }
}
