//! Cross-engine agreement on configurations that exercise the less-common
//! paths: mixed arrival kinds, explicit blocked-arrival overrides, arrival
//! laws with no mass at zero (origin roots), and the FCTL corner g1 = 0.

use bfctl::model::ModelConfig;
use bfctl::transform::{ArrivalSpec, Pmf};

fn sup_mean_diff(model: &bfctl::ValidatedModel, l: usize) -> f64 {
    let solved = bfctl::pgf::solve(model).unwrap();
    let metrics = solved.metrics();
    let oracle = bfctl::oracle::stationary(model, l, 1e-13).unwrap();
    metrics
        .per_slot_mean
        .iter()
        .zip(&oracle.per_slot_mean)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[test]
fn mixed_arrival_kinds_agree_with_oracle() {
    let mut cfg = ModelConfig::uniform_poisson(2, 3, 3, 1, 0.3, 0.5, 0.8);
    cfg.arrivals = vec![
        ArrivalSpec::Poisson { mean: 0.35 },
        ArrivalSpec::Geometric { mean: 0.3 },
        ArrivalSpec::Explicit {
            weights: vec![0.55, 0.3, 0.15],
        },
        ArrivalSpec::Deterministic { k: 0 },
        ArrivalSpec::Poisson { mean: 0.5 },
        ArrivalSpec::Geometric { mean: 0.2 },
        ArrivalSpec::Explicit {
            weights: vec![0.7, 0.2, 0.1],
        },
        ArrivalSpec::Poisson { mean: 0.25 },
    ];
    let model = cfg.validate().unwrap();
    assert!(bfctl::check_stability(&model).stable);
    let diff = sup_mean_diff(&model, 150);
    assert!(diff < 1e-8, "means differ by {diff:.3e}");
}

#[test]
fn blocked_override_agrees_with_oracle() {
    // Two lanes with mixed traffic need an explicit blocked-arrival law;
    // whatever law is supplied, the analytic and chain engines must agree.
    let mut cfg = ModelConfig::uniform_poisson(2, 3, 2, 2, 0.6, 0.5, 0.7);
    cfg.blocked_arrivals_override = Some(vec![
        Pmf {
            weights: vec![0.5, 0.3, 0.2],
            tail_eps: 0.0,
        },
        Pmf {
            weights: vec![0.65, 0.25, 0.1],
            tail_eps: 0.0,
        },
    ]);
    let model = cfg.validate().unwrap();
    assert!(bfctl::check_stability(&model).stable);
    let diff = sup_mean_diff(&model, 120);
    assert!(diff < 1e-9, "means differ by {diff:.3e}");
}

#[test]
fn no_mass_at_zero_arrivals_put_roots_at_origin() {
    // Every slot delivers at least one vehicle: the cleared denominator
    // vanishes at the origin and the root rows go through the polynomial.
    let mut cfg = ModelConfig::uniform_poisson(1, 3, 1, 2, 0.0, 1.0, 0.6);
    cfg.arrivals = vec![
        ArrivalSpec::Explicit {
            weights: vec![0.0, 0.7, 0.3],
        };
        5
    ];
    let model = cfg.validate().unwrap();
    let report = bfctl::check_stability(&model);
    assert!(report.stable, "rho = {}", report.rho);
    let solved = bfctl::pgf::solve(&model).unwrap();
    assert!(
        solved.roots.iter().any(|g| g.z.norm() < 1e-12),
        "expected an origin root, got {:?}",
        solved.roots.iter().map(|g| g.z).collect::<Vec<_>>()
    );
    let diff = sup_mean_diff(&model, 120);
    assert!(diff < 1e-8, "means differ by {diff:.3e}");
}

#[test]
fn plain_fctl_multi_lane_corner() {
    // g1 = 0 with several lanes: the classic multi-lane FCTL queue.
    let model = ModelConfig::uniform_poisson(0, 4, 5, 3, 1.2, 0.0, 0.0)
        .validate()
        .unwrap();
    let solved = bfctl::pgf::solve(&model).unwrap();
    assert_eq!(solved.winding, 12);
    let diff = sup_mean_diff(&model, 200);
    assert!(diff < 1e-8, "means differ by {diff:.3e}");
}

#[test]
fn zero_red_time_cycle() {
    let model = ModelConfig::uniform_poisson(2, 3, 0, 1, 0.3, 0.4, 0.9)
        .validate()
        .unwrap();
    let diff = sup_mean_diff(&model, 100);
    assert!(diff < 1e-9, "means differ by {diff:.3e}");
}

#[test]
fn fully_blocked_first_green_degenerate_family() {
    // p_i q_i = 1 collapses part of the boundary system; the repair path
    // must keep every engine pair in agreement.
    // Loads kept moderate so the chain's truncation bias stays below the
    // agreement tolerance.
    for (g1, g2, r, m, rate) in [
        (1usize, 2usize, 2usize, 1usize, 0.3f64),
        (2, 4, 4, 1, 0.34),
        (3, 4, 2, 2, 0.7),
        (2, 3, 1, 3, 0.8),
    ] {
        let model = ModelConfig::uniform_poisson(g1, g2, r, m, rate, 1.0, 1.0)
            .validate()
            .unwrap();
        assert!(bfctl::check_stability(&model).stable);
        let diff = sup_mean_diff(&model, 150);
        assert!(
            diff < 1e-8,
            "g1={g1} g2={g2} r={r} m={m}: means differ by {diff:.3e}"
        );
    }
}

#[test]
fn partially_degenerate_blocking_profile() {
    // Only the first slot is fully blocked; the second keeps a fractional
    // pedestrian probability.
    let mut cfg = ModelConfig::uniform_poisson(2, 4, 3, 1, 0.3, 1.0, 1.0);
    cfg.p = vec![1.0, 0.6];
    cfg.q = vec![1.0, 0.4];
    let model = cfg.validate().unwrap();
    let diff = sup_mean_diff(&model, 120);
    assert!(diff < 1e-9, "means differ by {diff:.3e}");
}

#[test]
fn simulator_brackets_exact_on_fractional_q() {
    // A configuration where blockages resolve mid-green: the reference
    // semantics and the analytic law coincide for p = 1.
    let model = ModelConfig::uniform_poisson(3, 3, 3, 1, 0.25, 1.0, 0.6)
        .validate()
        .unwrap();
    let exact = bfctl::pgf::solve(&model).unwrap().metrics().per_slot_mean;
    let rep = bfctl::sim::simulate(&model, 8000, 60, 77);
    let covered = (0..model.c)
        .filter(|&i| {
            let (lo, hi) = rep.per_slot_ci[i];
            lo <= exact[i] && exact[i] <= hi
        })
        .count();
    assert!(covered >= 7, "only {covered}/9 exact means inside the CIs");
}
