//! Lattice inversion of probability generating functions.
//!
//! Coefficients are recovered from evaluations on a circle of radius
//! `rho < 1`: `p_n = rho^-n / N * sum_k X(rho w^k) w^-kn`. The aliasing
//! error is bounded by `rho^N / (1 - rho^N)` uniformly in `n`.

use crate::error::SolveError;
use num_complex::Complex64;
use std::f64::consts::PI;

pub struct InversionPlan {
    pub rho: f64,
    pub n_points: usize,
    pub alias_bound: f64,
}

/// Radius per the standard error-control rule `rho = 10^(-8 / (2 (n_max+1)))`,
/// with a few extra quadrature nodes so the bound stays strictly below 1e-8.
pub fn plan(n_max: usize) -> InversionPlan {
    let mut n_points = 2 * (n_max + 1) + 8;
    if n_points % 2 == 1 {
        n_points += 1;
    }
    plan_with_points(n_max, n_points)
}

/// A plan with an explicit quadrature-node count (more nodes only shrink
/// the aliasing bound).
pub fn plan_with_points(n_max: usize, n_points: usize) -> InversionPlan {
    let rho = 10f64.powf(-8.0 / (2.0 * (n_max as f64 + 1.0)));
    let rn = rho.powi(n_points as i32);
    InversionPlan {
        rho,
        n_points,
        alias_bound: rn / (1.0 - rn),
    }
}

/// Quadrature nodes `rho * exp(2 pi i k / N)` for `k = 0..N`.
pub fn nodes(plan: &InversionPlan) -> Vec<Complex64> {
    (0..plan.n_points)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / plan.n_points as f64;
            plan.rho * Complex64::new(th.cos(), th.sin())
        })
        .collect()
}

/// Invert one PGF from its values at the plan's nodes.
///
/// Negative round-off down to -1e-9 is clamped to zero; anything worse
/// reports the inversion as unstable.
pub fn invert(
    plan: &InversionPlan,
    values: &[Complex64],
    n_max: usize,
) -> Result<Vec<f64>, SolveError> {
    assert_eq!(values.len(), plan.n_points);
    if plan.alias_bound > 1e-8 {
        return Err(SolveError::InversionUnstable {
            bound: plan.alias_bound,
        });
    }
    let n = plan.n_points;
    let mut out = Vec::with_capacity(n_max + 1);
    let mut rho_pow = 1.0;
    for coeff_n in 0..=n_max {
        let mut acc = Complex64::ZERO;
        for (k, v) in values.iter().enumerate() {
            let th = -2.0 * PI * (k * coeff_n % n) as f64 / n as f64;
            acc += v * Complex64::new(th.cos(), th.sin());
        }
        let mut p = acc.re / (n as f64 * rho_pow);
        if p < 0.0 {
            if p < -1e-9 {
                return Err(SolveError::InversionUnstable { bound: -p });
            }
            p = 0.0;
        }
        out.push(p);
        rho_pow *= plan.rho;
    }
    Ok(out)
}
