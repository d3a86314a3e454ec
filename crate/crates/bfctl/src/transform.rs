//! Arrival laws as evaluable probability generating functions.
//!
//! Poisson and geometric arrivals keep their exact closed forms so that
//! root finding never sees truncation error; explicit pmfs evaluate by
//! Horner. The blocked-arrival law counts vehicles from the first turning
//! vehicle onward and has a removable singularity at `z = 1 - p` that is
//! handled by a local Taylor branch.

use crate::error::Violation;
use crate::jet::Jet;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A finite nonnegative discrete distribution indexed from 0.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Pmf {
    pub weights: Vec<f64>,
    /// Mass discarded by truncation; the weights sum to `1 - tail_eps`
    /// up to round-off.
    pub tail_eps: f64,
}

impl Pmf {
    pub fn point(k: usize) -> Self {
        let mut weights = vec![0.0; k + 1];
        weights[k] = 1.0;
        Pmf {
            weights,
            tail_eps: 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(k, &w)| k as f64 * w)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.weights.get(k).copied().unwrap_or(0.0)
    }

    /// Checks the Pmf invariants (nonnegative weights, total within
    /// `[1 - tail_eps - slack, 1 + slack]`).
    pub fn check(&self, context: &str) -> Result<(), Violation> {
        if self.weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Violation::MalformedPmf {
                context: context.to_string(),
                detail: "negative or non-finite weight".to_string(),
            });
        }
        let total = self.total();
        let slack = 1e-12;
        if total > 1.0 + slack || total < 1.0 - self.tail_eps - slack {
            return Err(Violation::MalformedPmf {
                context: context.to_string(),
                detail: format!("weights sum to {total}, tail_eps {}", self.tail_eps),
            });
        }
        Ok(())
    }
}

/// Specification of a per-slot arrival law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ArrivalSpec {
    Poisson { mean: f64 },
    Geometric { mean: f64 },
    Deterministic { k: usize },
    Explicit { weights: Vec<f64> },
}

impl ArrivalSpec {
    pub fn mean(&self) -> f64 {
        match self {
            ArrivalSpec::Poisson { mean } | ArrivalSpec::Geometric { mean } => *mean,
            ArrivalSpec::Deterministic { k } => *k as f64,
            ArrivalSpec::Explicit { weights } => {
                weights.iter().enumerate().map(|(k, &w)| k as f64 * w).sum()
            }
        }
    }
}

/// Truncate an arrival law to a pmf whose discarded tail mass is at most `eps`.
pub fn arrival_pmf(spec: &ArrivalSpec, eps: f64) -> Pmf {
    assert!(eps > 0.0 && eps <= 1e-6, "eps must lie in (0, 1e-6]");
    match spec {
        ArrivalSpec::Deterministic { k } => Pmf::point(*k),
        ArrivalSpec::Explicit { weights } => Pmf {
            weights: weights.clone(),
            tail_eps: 0.0,
        },
        ArrivalSpec::Poisson { mean } => {
            if *mean == 0.0 {
                return Pmf {
                    weights: vec![1.0],
                    tail_eps: 0.0,
                };
            }
            let mut weights = Vec::new();
            let mut term = (-mean).exp();
            let mut cum = 0.0;
            let mut k = 0usize;
            // Smallest K with tail <= eps.
            loop {
                weights.push(term);
                cum += term;
                if 1.0 - cum <= eps && k as f64 >= *mean {
                    break;
                }
                k += 1;
                term *= mean / k as f64;
                if k > 10_000 {
                    break;
                }
            }
            Pmf {
                weights,
                tail_eps: (1.0 - cum).max(0.0),
            }
        }
        ArrivalSpec::Geometric { mean } => {
            if *mean == 0.0 {
                return Pmf {
                    weights: vec![1.0],
                    tail_eps: 0.0,
                };
            }
            let s = 1.0 / (1.0 + mean);
            let ratio = 1.0 - s;
            let mut weights = Vec::new();
            let mut term = s;
            let mut cum = 0.0;
            loop {
                weights.push(term);
                cum += term;
                if 1.0 - cum <= eps {
                    break;
                }
                term *= ratio;
                if weights.len() > 100_000 {
                    break;
                }
            }
            Pmf {
                weights,
                tail_eps: (1.0 - cum).max(0.0),
            }
        }
    }
}

/// An evaluable analytic transform: value plus derivatives anywhere in a
/// neighbourhood of the closed unit disk.
#[derive(Clone, Debug)]
pub enum Transform {
    Poisson {
        mean: f64,
    },
    Geometric {
        mean: f64,
    },
    Deterministic {
        k: usize,
    },
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// Remark-style blocked-arrival law built from an inner arrival law and
    /// the turning probability `p`.
    Blocked {
        inner: Box<Transform>,
        p: f64,
    },
}

impl Transform {
    pub fn from_spec(spec: &ArrivalSpec) -> Self {
        match spec {
            ArrivalSpec::Poisson { mean } => Transform::Poisson { mean: *mean },
            ArrivalSpec::Geometric { mean } => Transform::Geometric { mean: *mean },
            ArrivalSpec::Deterministic { k } => Transform::Deterministic { k: *k },
            ArrivalSpec::Explicit { weights } => Transform::Polynomial {
                coeffs: weights.clone(),
            },
        }
    }

    pub fn from_pmf(pmf: &Pmf) -> Self {
        Transform::Polynomial {
            coeffs: pmf.weights.clone(),
        }
    }

    /// Exact mean (derivative at 1).
    pub fn mean(&self) -> f64 {
        match self {
            Transform::Poisson { mean } | Transform::Geometric { mean } => *mean,
            Transform::Deterministic { k } => *k as f64,
            Transform::Polynomial { coeffs } => {
                coeffs.iter().enumerate().map(|(k, &w)| k as f64 * w).sum()
            }
            Transform::Blocked { inner, p } => blocked_mean(inner, *p),
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.jet(z).value()
    }

    /// Order-3 jet of the transform at `z`.
    pub fn jet(&self, z: Complex64) -> Jet {
        let zj = Jet::var(z);
        self.compose(&zj)
    }

    /// Apply the transform to an arbitrary inner jet (used by the blocked
    /// law and by tests).
    pub fn compose(&self, zj: &Jet) -> Jet {
        match self {
            Transform::Poisson { mean } => {
                // exp(mean * (z - 1))
                zj.sub(&Jet::real(1.0)).scale(*mean).exp()
            }
            Transform::Geometric { mean } => {
                let s = 1.0 / (1.0 + mean);
                // s / (1 - (1-s) z)
                Jet::real(s).div(&Jet::real(1.0).sub(&zj.scale(1.0 - s)))
            }
            Transform::Deterministic { k } => zj.powi(*k as i64),
            Transform::Polynomial { coeffs } => {
                let mut acc = Jet::constant(Complex64::ZERO);
                for &c in coeffs.iter().rev() {
                    acc = acc.mul(zj).add(&Jet::real(c));
                }
                acc
            }
            Transform::Blocked { inner, p } => blocked_jet(inner, *p, zj),
        }
    }

    /// Taylor coefficients `f^(k)(a)/k!` for `k = 0..n` at an arbitrary point.
    pub fn taylor(&self, a: Complex64, n: usize) -> Vec<Complex64> {
        match self {
            Transform::Poisson { mean } => {
                let base = (mean * (a - 1.0)).exp();
                let mut out = Vec::with_capacity(n + 1);
                let mut factor = Complex64::ONE;
                for k in 0..=n {
                    if k > 0 {
                        factor *= Complex64::new(*mean / k as f64, 0.0);
                    }
                    out.push(base * factor);
                }
                out
            }
            Transform::Geometric { mean } => {
                let s = 1.0 / (1.0 + mean);
                let rho = 1.0 - s;
                // s/(1 - rho z): k-th Taylor coeff at a is s rho^k / (1 - rho a)^{k+1}
                let den = Complex64::ONE - rho * a;
                let mut out = Vec::with_capacity(n + 1);
                let mut cur = Complex64::new(s, 0.0) / den;
                for _ in 0..=n {
                    out.push(cur);
                    cur = cur * rho / den;
                }
                out
            }
            Transform::Deterministic { k } => {
                let mut out = vec![Complex64::ZERO; n + 1];
                let mut binom = 1.0f64;
                for (j, slot) in out.iter_mut().enumerate().take(n.min(*k) + 1) {
                    *slot = binom * a.powi((*k - j) as i32);
                    binom *= (*k - j) as f64 / (j + 1) as f64;
                }
                out
            }
            Transform::Polynomial { coeffs } => {
                // Taylor shift by repeated synthetic division.
                let mut work: Vec<Complex64> =
                    coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect();
                let mut out = Vec::with_capacity(n + 1);
                for _ in 0..=n {
                    if work.is_empty() {
                        out.push(Complex64::ZERO);
                        continue;
                    }
                    let mut rem = Complex64::ZERO;
                    for c in work.iter_mut().rev() {
                        let t = *c + rem * a;
                        rem = t;
                        *c = t;
                    }
                    out.push(rem);
                    work.remove(0);
                }
                out
            }
            Transform::Blocked { .. } => {
                unimplemented!("nested blocked transforms are never constructed")
            }
        }
    }
}

/// The blocked-arrival transform `Y_b(z) = Y(1-p) + p z (Y(1-p) - Y(z)) / (1-p-z)`.
///
/// The apparent pole at `z = 1-p` is removable; within `1e-6` of it the
/// difference quotient is replaced by a local Taylor expansion of `Y`.
fn blocked_jet(inner: &Transform, p: f64, zj: &Jet) -> Jet {
    if p == 0.0 {
        return Jet::real(1.0);
    }
    if p == 1.0 {
        return inner.compose(zj);
    }
    let a = Complex64::new(1.0 - p, 0.0);
    if (zj.value() - a).norm() < 1e-6 {
        blocked_jet_series(inner, p, zj)
    } else {
        blocked_jet_direct(inner, p, zj)
    }
}

/// Direct closed form, valid away from the removable point `z = 1-p`.
pub(crate) fn blocked_jet_direct(inner: &Transform, p: f64, zj: &Jet) -> Jet {
    let a = Complex64::new(1.0 - p, 0.0);
    let ya = inner.eval(a);
    let yz = inner.compose(zj);
    let num = Jet::constant(ya).sub(&yz);
    let den = Jet::constant(a).sub(zj);
    Jet::constant(ya).add(&zj.scale(p).mul(&num.div(&den)))
}

/// Local expansion around the removable point:
/// `(Y(a) - Y(z)) / (a - z) = sum_{k>=1} T_k (z-a)^(k-1)` with
/// `T_k = Y^(k)(a)/k!`.
pub(crate) fn blocked_jet_series(inner: &Transform, p: f64, zj: &Jet) -> Jet {
    let a = Complex64::new(1.0 - p, 0.0);
    let ya = inner.eval(a);
    let t = inner.taylor(a, 12);
    let w = zj.sub(&Jet::constant(a));
    let mut g = Jet::constant(Complex64::ZERO);
    for k in (1..t.len()).rev() {
        g = g.mul(&w).add(&Jet::constant(t[k]));
    }
    Jet::constant(ya).add(&zj.scale(p).mul(&g))
}

fn blocked_mean(inner: &Transform, p: f64) -> f64 {
    if p == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return inner.mean();
    }
    // E[Y_b] = ((Y(1-p) - 1)(1-p) + mu p) / p, from differentiating the closed form.
    let ya = inner.eval(Complex64::new(1.0 - p, 0.0)).re;
    ((ya - 1.0) * (1.0 - p) + inner.mean() * p) / p
}

/// Coefficient form of the blocked-arrival law:
/// `P(Y_b = k) = sum_{j>=k} P(Y=j)(1-p)^(j-k) p` for `k >= 1`, and
/// `P(Y_b = 0) = sum_j P(Y=j)(1-p)^j`.
pub fn blocked_arrival_pmf(arrivals: &Pmf, p: f64) -> Pmf {
    if p == 0.0 {
        return Pmf {
            weights: vec![1.0],
            tail_eps: 0.0,
        };
    }
    if p == 1.0 {
        return arrivals.clone();
    }
    // Backward recurrence over S_k = sum_{j>=k} P(Y=j)(1-p)^(j-k):
    // S_k = P(Y=k) + (1-p) S_{k+1}; then P(Y_b=0) = S_0, P(Y_b=k) = p S_k.
    let n = arrivals.weights.len();
    let mut s = vec![0.0; n];
    for k in (0..n).rev() {
        s[k] = arrivals.weights[k] + if k + 1 < n { (1.0 - p) * s[k + 1] } else { 0.0 };
    }
    let mut weights = vec![0.0; n];
    weights[0] = s[0];
    for k in 1..n {
        weights[k] = p * s[k];
    }
    Pmf {
        weights,
        tail_eps: arrivals.tail_eps,
    }
}

/// Build the blocked-arrival transform for one slot.
pub fn blocked_arrival_transform(spec: &ArrivalSpec, p: f64) -> Transform {
    Transform::Blocked {
        inner: Box::new(Transform::from_spec(spec)),
        p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE_RATE: f64 = 0.39;

    #[test]
    fn poisson_pmf_head() {
        let pmf = arrival_pmf(&ArrivalSpec::Poisson { mean: TABLE_RATE }, 1e-12);
        assert!((pmf.weights[0] - (-TABLE_RATE).exp()).abs() < 1e-15);
        assert!(pmf.tail_eps <= 1e-12);
        assert!(pmf.weights.len() >= 10);
        pmf.check("poisson").unwrap();
    }

    #[test]
    fn deterministic_pmf() {
        let pmf = arrival_pmf(&ArrivalSpec::Deterministic { k: 2 }, 1e-9);
        assert_eq!(pmf.weights, vec![0.0, 0.0, 1.0]);
        assert_eq!(pmf.tail_eps, 0.0);
    }

    #[test]
    fn degenerate_poisson() {
        let pmf = arrival_pmf(&ArrivalSpec::Poisson { mean: 0.0 }, 1e-9);
        assert_eq!(pmf.weights, vec![1.0]);
    }

    #[test]
    fn pgf_normalisation_and_mean() {
        for spec in [
            ArrivalSpec::Poisson { mean: 0.7 },
            ArrivalSpec::Geometric { mean: 0.4 },
            ArrivalSpec::Deterministic { k: 3 },
            ArrivalSpec::Explicit {
                weights: vec![0.2, 0.5, 0.3],
            },
        ] {
            let t = Transform::from_spec(&spec);
            let at1 = t.jet(Complex64::new(1.0, 0.0));
            assert!((at1.value().re - 1.0).abs() < 1e-12, "{spec:?}");
            assert!((at1.d1().re - spec.mean()).abs() < 1e-10, "{spec:?}");
        }
    }

    #[test]
    fn poisson_closed_form_at_zero() {
        let t = Transform::Poisson { mean: TABLE_RATE };
        let v = t.eval(Complex64::ZERO);
        assert!((v.re - (-TABLE_RATE).exp()).abs() < 1e-15);
    }

    #[test]
    fn blocked_reductions() {
        let spec = ArrivalSpec::Poisson { mean: 0.5 };
        let t0 = blocked_arrival_transform(&spec, 0.0);
        let z = Complex64::new(0.3, 0.4);
        assert!((t0.eval(z) - Complex64::ONE).norm() < 1e-14);
        let t1 = blocked_arrival_transform(&spec, 1.0);
        let y = Transform::from_spec(&spec);
        assert!((t1.eval(z) - y.eval(z)).norm() < 1e-14);
    }

    #[test]
    fn blocked_no_turning_arrival_probability() {
        // P(Y_b = 0) = E[(1-p)^Y] = e^{-mu p} for Poisson.
        let t = blocked_arrival_transform(&ArrivalSpec::Poisson { mean: TABLE_RATE }, 0.6);
        let v = t.eval(Complex64::ZERO);
        assert!((v.re - (-TABLE_RATE * 0.6f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn blocked_pmf_matches_transform() {
        let spec = ArrivalSpec::Poisson { mean: TABLE_RATE };
        let pmf = blocked_arrival_pmf(&arrival_pmf(&spec, 1e-14), 0.6);
        assert!((pmf.weights[0] - (-0.234f64).exp()).abs() < 1e-12);
        let t = blocked_arrival_transform(&spec, 0.6);
        let poly = Transform::Polynomial {
            coeffs: pmf.weights.clone(),
        };
        for z in [
            Complex64::new(0.0, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(-0.5, 0.0),
            Complex64::new(0.0, 0.9),
        ] {
            assert!((t.eval(z) - poly.eval(z)).norm() < 1e-10, "z = {z}");
        }
    }

    #[test]
    fn removable_singularity_is_continuous() {
        let spec = ArrivalSpec::Poisson { mean: 0.8 };
        let p = 0.35;
        let inner = Transform::from_spec(&spec);
        let a = 1.0 - p;
        // Exactly at the removable point the value and derivative are finite.
        let t = blocked_arrival_transform(&spec, p);
        let at = t.jet(Complex64::new(a, 0.0));
        assert!(at.value().is_finite() && at.d1().is_finite());
        // The two branches agree on both sides of the removable point.
        for dz in [1e-4, -1e-4] {
            let zj = Jet::var(Complex64::new(a + dz, 0.0));
            let direct = blocked_jet_direct(&inner, p, &zj).value();
            let series = blocked_jet_series(&inner, p, &zj).value();
            assert!((direct - series).norm() < 1e-8, "dz = {dz}");
            // Continuity against the value at the point itself.
            assert!((direct - at.value()).norm() < 2.0 * dz.abs());
        }
    }

    #[test]
    fn blocked_mean_matches_jet() {
        let spec = ArrivalSpec::Poisson { mean: TABLE_RATE };
        for p in [0.2, 0.6, 0.9] {
            let t = blocked_arrival_transform(&spec, p);
            let d = t.jet(Complex64::new(1.0, 0.0)).d1().re;
            assert!((d - t.mean()).abs() < 1e-11);
        }
    }
}
