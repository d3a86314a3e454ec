//! Capacity and stability via a backward Markov-reward recursion.
//!
//! The cycle is traversed as a chain with states `(i, u)` / `(i, b)` for the
//! first green part, plain slot states for the rest, and an artificial
//! state 0 gathering the reward. Each slot in which a batch can depart
//! grants its service count; blocked slots grant nothing. The reward in
//! state 0 is the mean number of serviceable departures per cycle.

use crate::error::CapacityError;
use crate::model::ValidatedModel;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Per-slot reward granted when a batch departs unblocked.
#[derive(Clone, Debug)]
pub struct ServiceCounts {
    /// Reward for an unblocked departure in first-green slot `i` (1-based).
    pub first_green: Vec<f64>,
    /// Reward per slot of the second green part.
    pub second_green: Vec<f64>,
}

impl ServiceCounts {
    /// The default reward structure: `m` vehicles per unblocked slot.
    pub fn uniform(model: &ValidatedModel) -> Self {
        ServiceCounts {
            first_green: vec![model.m as f64; model.g1],
            second_green: vec![model.m as f64; model.g2],
        }
    }

    /// Service-rate corrected rewards `m* = p_share * m_turn + (1-p_share) * m_through`
    /// applied to every green slot; `p_share` is the overall turning share.
    pub fn corrected(model: &ValidatedModel, m_turn: f64, m_through: f64, p_share: f64) -> Self {
        let mstar = effective_service(p_share, m_turn, m_through);
        ServiceCounts {
            first_green: vec![mstar; model.g1],
            second_green: vec![mstar; model.g2],
        }
    }
}

/// `m* = p_i * m_turn + (1 - p_i) * m_through`; values need not be integers.
pub fn effective_service(p_i: f64, m_turn: f64, m_through: f64) -> f64 {
    assert!(
        m_turn > 0.0 && m_through > 0.0,
        "service rates must be positive"
    );
    p_i * m_turn + (1.0 - p_i) * m_through
}

/// Capacity-analysis output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CapacityReport {
    /// Mean serviceable departures per cycle.
    pub r0: f64,
    /// Mean arrivals per cycle.
    pub arrival_load: f64,
    pub stable: bool,
    /// Load ratio `arrival_load / r0`.
    pub rho: f64,
    /// True when `rho > 0.999`: the PGF solver degrades near criticality.
    pub near_critical_warning: bool,
    /// Accumulated reward per state, keyed by state label.
    pub per_state_rewards: BTreeMap<String, f64>,
}

/// Backward reward recursion over the cycle's state graph.
///
/// Rewards accumulate from the end of the cycle: red slots carry nothing,
/// each second-green slot adds its service count, `(i, u)` states add the
/// slot-i count plus the blocking-weighted continuation, `(i, b)` states add
/// only the continuation.
pub fn reward_recursion(model: &ValidatedModel, service: &ServiceCounts) -> CapacityReport {
    assert_eq!(service.first_green.len(), model.g1);
    assert_eq!(service.second_green.len(), model.g2);
    let g1 = model.g1;
    let g2 = model.g2;
    let mut rewards = BTreeMap::new();

    // Red period: no departures.
    for i in (g1 + g2 + 1)..=model.c {
        rewards.insert(format!("r_{i}"), 0.0);
    }
    // Second green part, walked backwards.
    let mut acc = 0.0;
    for i in (g1 + 1..=g1 + g2).rev() {
        acc += service.second_green[i - g1 - 1];
        rewards.insert(format!("r_{i}"), acc);
    }
    let r_after_g1 = acc;

    let r0 = if g1 == 0 {
        rewards.insert("r_0".to_string(), r_after_g1);
        r_after_g1
    } else {
        let mut r_b = r_after_g1;
        let mut r_u = service.first_green[g1 - 1] + r_after_g1;
        rewards.insert(format!("r_{g1},b"), r_b);
        rewards.insert(format!("r_{g1},u"), r_u);
        for i in (1..g1).rev() {
            let pq = model.p[i] * model.q[i]; // p_{i+1} q_{i+1}, zero-based index i
            let q = model.q[i];
            let new_b = q * r_b + (1.0 - q) * r_u;
            let new_u = service.first_green[i - 1] + pq * r_b + (1.0 - pq) * r_u;
            r_b = new_b;
            r_u = new_u;
            rewards.insert(format!("r_{i},b"), r_b);
            rewards.insert(format!("r_{i},u"), r_u);
        }
        let pq1 = model.p[0] * model.q[0];
        let r0 = pq1 * r_b + (1.0 - pq1) * r_u;
        rewards.insert("r_0".to_string(), r0);
        r0
    };

    let arrival_load = model.arrival_load();
    let stable = arrival_load < r0;
    let rho = if r0 > 0.0 {
        arrival_load / r0
    } else {
        f64::INFINITY
    };
    CapacityReport {
        r0,
        arrival_load,
        stable,
        rho,
        near_critical_warning: rho > 0.999,
        per_state_rewards: rewards,
    }
}

/// Run the reward recursion with default service counts and compare the
/// arrival load against the capacity (strict inequality, no epsilon).
pub fn check_stability(model: &ValidatedModel) -> CapacityReport {
    reward_recursion(model, &ServiceCounts::uniform(model))
}

/// Shared-lane capacity formula from the HCM:
/// `s_sr = s_th / (1 + P_r (E_R / f_Rpb - 1))`.
pub fn hcm_shared_lane_capacity(
    s_th: f64,
    p_r: f64,
    e_r: f64,
    f_rpb: f64,
) -> Result<f64, CapacityError> {
    if f_rpb <= 0.0 {
        return Err(CapacityError::DivisionDomain(f_rpb));
    }
    if !(0.0..=1.0).contains(&p_r) {
        return Err(CapacityError::PreconditionUnmet(format!(
            "P_r = {p_r} outside [0,1]"
        )));
    }
    if e_r <= 0.0 {
        return Err(CapacityError::PreconditionUnmet(format!(
            "E_R = {e_r} <= 0"
        )));
    }
    Ok(s_th / (1.0 + p_r * (e_r / f_rpb - 1.0)))
}

/// Closed-form capacity cross-check.
///
/// With `q_i = 1` everywhere and constant `p`, the capacity per cycle is
/// `m (g2 + (1 - (1-p)^g1)(1-p)/p)`; with `p_i = 1` everywhere it is
/// `m (g1 + g2 - sum q_i)`. Used only as an oracle for `reward_recursion`.
pub fn capacity_closed_form_q1(model: &ValidatedModel) -> Result<f64, CapacityError> {
    let m = model.m as f64;
    let all_q1 = model.q.iter().all(|&q| q == 1.0);
    let all_p1 = model.p.iter().all(|&p| p == 1.0);
    if all_p1 {
        let qsum: f64 = model.q.iter().sum();
        return Ok(m * ((model.g1 + model.g2) as f64 - qsum));
    }
    if all_q1 {
        let p = model.p.first().copied().unwrap_or(0.0);
        if model.p.iter().any(|&pi| pi != p) {
            return Err(CapacityError::PreconditionUnmet(
                "q=1 closed form needs a constant p".to_string(),
            ));
        }
        let g1 = model.g1 as f64;
        let g2 = model.g2 as f64;
        let extra = if p == 0.0 {
            g1
        } else {
            (1.0 - (1.0 - p).powf(g1)) * (1.0 - p) / p
        };
        return Ok(m * (g2 + extra));
    }
    Err(CapacityError::PreconditionUnmet(
        "needs q_i = 1 for all i, or p_i = 1 for all i".to_string(),
    ))
}
