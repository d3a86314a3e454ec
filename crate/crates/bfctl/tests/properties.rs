//! Property tests for the model-level invariants: transform/pmf
//! consistency, capacity monotonicity and symmetry, and PGF-solution
//! normalisation on randomized stable configurations.

use bfctl::capacity::{capacity_closed_form_q1, check_stability};
use bfctl::model::ModelConfig;
use bfctl::transform::{
    arrival_pmf, blocked_arrival_pmf, blocked_arrival_transform, ArrivalSpec, Transform,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn arrival_spec_strategy() -> impl Strategy<Value = ArrivalSpec> {
    prop_oneof![
        (0.0..2.5f64).prop_map(|mean| ArrivalSpec::Poisson { mean }),
        (0.0..2.0f64).prop_map(|mean| ArrivalSpec::Geometric { mean }),
        (0usize..5).prop_map(|k| ArrivalSpec::Deterministic { k }),
        proptest::collection::vec(0.0..1.0f64, 1..8).prop_map(|raw| {
            let total: f64 = raw.iter().sum();
            let weights = if total == 0.0 {
                vec![1.0]
            } else {
                raw.iter().map(|w| w / total).collect()
            };
            ArrivalSpec::Explicit { weights }
        }),
    ]
}

proptest! {
    /// Truncated pmf mean agrees with the transform derivative at 1.
    #[test]
    fn pmf_mean_matches_transform(spec in arrival_spec_strategy()) {
        let pmf = arrival_pmf(&spec, 1e-12);
        let t = Transform::from_spec(&spec);
        let d = t.jet(Complex64::ONE).d1().re;
        // The pmf drops at most 1e-12 of tail mass.
        prop_assert!((pmf.mean() - d).abs() < 1e-9, "pmf {} vs transform {}", pmf.mean(), d);
        prop_assert!((d - spec.mean()).abs() < 1e-9);
    }

    /// Probability transforms obey the modulus bound
    /// `|f(z)| <= f(|z|) <= f(1) = 1` on the closed unit disk.
    #[test]
    fn transform_modulus_bound(
        spec in arrival_spec_strategy(),
        radius in 0.0..=1.0f64,
        angle in 0.0..std::f64::consts::TAU,
    ) {
        let t = Transform::from_spec(&spec);
        let z = radius * Complex64::new(angle.cos(), angle.sin());
        let on_disk = t.eval(z).norm();
        let on_axis = t.eval(Complex64::new(radius, 0.0)).re;
        prop_assert!(on_disk <= on_axis + 1e-12);
        prop_assert!(on_axis <= 1.0 + 1e-12);
        prop_assert!((t.eval(Complex64::ONE).re - 1.0).abs() < 1e-12);
    }

    /// Blocked-arrival pmf: normalised and equal to the closed-form
    /// transform on a fan of sample points in the closed unit disk.
    #[test]
    fn blocked_pmf_agrees_with_transform(
        mean in 0.0..1.5f64,
        p in 0.0..=1.0f64,
    ) {
        let spec = ArrivalSpec::Poisson { mean };
        let base = arrival_pmf(&spec, 1e-12);
        let pmf = blocked_arrival_pmf(&base, p);
        prop_assert!((pmf.total() - 1.0).abs() <= pmf.tail_eps + 1e-12);
        let transform = blocked_arrival_transform(&spec, p);
        let poly = Transform::Polynomial { coeffs: pmf.weights.clone() };
        for k in 0..16 {
            let th = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
            let z = 0.95 * Complex64::new(th.cos(), th.sin());
            let a = transform.eval(z);
            let b = poly.eval(z);
            prop_assert!((a - b).norm() < 1e-9, "z={z}: {a} vs {b}");
        }
    }

    /// Reward recursion equals the q=1 closed form on random geometry.
    #[test]
    fn q1_closed_form_sweep(
        g1 in 1usize..7,
        g2 in 1usize..7,
        r in 0usize..5,
        m in 1usize..4,
        p in 0.0..=1.0f64,
    ) {
        let cfg = ModelConfig::uniform_poisson(g1, g2, r, m, 0.01, if m > 1 { p.round() } else { p }, 1.0);
        let model = cfg.validate().unwrap();
        let rec = check_stability(&model).r0;
        let closed = capacity_closed_form_q1(&model).unwrap();
        prop_assert!((rec - closed).abs() < 1e-12, "{rec} vs {closed}");
    }

    /// With every batch turning, the capacity depends on the pedestrian
    /// profile only through its total.
    #[test]
    fn p1_capacity_permutation_invariant(
        q in proptest::collection::vec(0.0..=1.0f64, 1..6),
        rot in 0usize..5,
    ) {
        let g1 = q.len();
        let mut cfg = ModelConfig::uniform_poisson(g1, 3, 2, 1, 0.01, 1.0, 0.0);
        cfg.q = q.clone();
        let a = check_stability(&cfg.validate().unwrap()).r0;
        let mut rotated = q.clone();
        rotated.rotate_left(rot % g1.max(1));
        cfg.q = rotated;
        let b = check_stability(&cfg.validate().unwrap()).r0;
        prop_assert!((a - b).abs() < 1e-12);
        let qsum: f64 = q.iter().sum();
        prop_assert!((a - ((g1 + 3) as f64 - qsum)).abs() < 1e-12);
    }

    /// Monotonicity under finite perturbations: raising any reachable q_i
    /// cannot raise the capacity; extending g2 cannot lower it.
    #[test]
    fn capacity_monotonicity(
        g1 in 1usize..5,
        g2 in 1usize..5,
        p in 0.01..=1.0f64,
        q in 0.0..0.9f64,
        slot in 0usize..5,
    ) {
        let slot = slot % g1;
        let base = ModelConfig::uniform_poisson(g1, g2, 2, 1, 0.01, p, q);
        let r0 = check_stability(&base.validate().unwrap()).r0;
        let mut bumped = base.clone();
        bumped.q[slot] += 0.1;
        let r0_bumped = check_stability(&bumped.validate().unwrap()).r0;
        prop_assert!(r0_bumped <= r0 + 1e-12, "q bump raised r0: {r0} -> {r0_bumped}");
        let wider = ModelConfig::uniform_poisson(g1, g2 + 1, 2, 1, 0.01, p, q);
        let r0_wider = check_stability(&wider.validate().unwrap()).r0;
        prop_assert!(r0_wider >= r0 - 1e-12, "g2 bump lowered r0: {r0} -> {r0_wider}");
    }
}

/// Normalisation of every slot PGF at z = 1 on a randomized stable suite,
/// and zero-arrival degenerate solves.
#[test]
fn slot_pgfs_normalised_on_stable_suite() {
    let mut state = 0x1234_5678_9abc_def0u64;
    let mut rand = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for case in 0..30 {
        let g1 = (rand() * 4.0) as usize;
        let g2 = 1 + (rand() * 5.0) as usize;
        let r = (rand() * 6.0) as usize;
        let m = 1 + (rand() * 2.9) as usize;
        let p = if m == 1 {
            rand()
        } else {
            (rand() * 2.0).floor().min(1.0)
        };
        let q = rand();
        let mut cfg = ModelConfig::uniform_poisson(g1, g2, r, m, 0.0, p, q);
        let r0 = check_stability(&cfg.clone().validate().unwrap()).r0;
        let rate = (0.1 + 0.8 * rand()) * r0 / cfg.cycle_len() as f64;
        cfg.arrivals = vec![ArrivalSpec::Poisson { mean: rate }; cfg.cycle_len()];
        let model = cfg.validate().unwrap();
        let solved = bfctl::pgf::solve(&model).unwrap();
        let defect = solved.normalization_defect();
        assert!(
            defect < 1e-8,
            "case {case}: normalisation defect {defect:.2e}"
        );
        for (label, v) in solved.labels.iter().zip(&solved.raw_unknowns) {
            assert!(
                (-1e-8..=1.0 + 1e-8).contains(v),
                "case {case}: {label} = {v}"
            );
        }
    }
}

#[test]
fn zero_arrival_solve_is_point_mass() {
    let model = ModelConfig::uniform_poisson(2, 4, 4, 1, 0.0, 0.6, 1.0)
        .validate()
        .unwrap();
    let solved = bfctl::pgf::solve(&model).unwrap();
    let metrics = solved.metrics();
    for mean in &metrics.per_slot_mean {
        assert!(mean.abs() < 1e-10);
    }
    assert_eq!(metrics.mean_delay, 0.0);
    assert!(!metrics.delay_defined);
    let pmfs = solved.queue_pmfs(20).unwrap();
    for pmf in pmfs {
        assert!((pmf.get(0) - 1.0).abs() < 1e-8);
    }
}

/// The overflow tail claims of the worked example: with no turning
/// traffic the queue is almost surely empty at the end of green; with all
/// vehicles turning, a queue of at least 10 remains more than half the
/// time.
#[test]
fn overflow_tail_contrast() {
    let free = ModelConfig::uniform_poisson(2, 4, 4, 1, 0.39, 0.0, 1.0)
        .validate()
        .unwrap();
    let pmf = bfctl::pgf::solve(&free).unwrap().overflow_pmf(30).unwrap();
    assert!(pmf.get(0) > 0.85, "P(X_g = 0) = {}", pmf.get(0));

    let jammed = ModelConfig::uniform_poisson(2, 4, 4, 1, 0.39, 1.0, 1.0)
        .validate()
        .unwrap();
    let pmf = bfctl::pgf::solve(&jammed)
        .unwrap()
        .overflow_pmf(60)
        .unwrap();
    let below_10: f64 = (0..10).map(|n| pmf.get(n)).sum();
    assert!(
        1.0 - below_10 > 0.5,
        "P(X_g >= 10) = {} should exceed 0.5",
        1.0 - below_10
    );
}

/// Little's law consistency: the reported delay equals the mean queue
/// over the per-slot arrival rate.
#[test]
fn delay_is_littles_law() {
    let model = ModelConfig::uniform_poisson(2, 4, 4, 1, 0.39, 0.6, 1.0)
        .validate()
        .unwrap();
    let metrics = bfctl::pgf::solve(&model).unwrap().metrics();
    let expected = metrics.mean_queue / (metrics.arrival_load / 10.0);
    assert!((metrics.mean_delay - expected).abs() < 1e-12);
}

/// Truncation sensitivity: doubling L moves the oracle's means by less
/// than ten times the reported truncation mass.
#[test]
fn oracle_truncation_sensitivity() {
    let model = ModelConfig::uniform_poisson(2, 4, 4, 1, 0.39, 0.6, 1.0)
        .validate()
        .unwrap();
    let coarse = bfctl::oracle::stationary(&model, 60, 1e-12).unwrap();
    let fine = bfctl::oracle::stationary(&model, 120, 1e-12).unwrap();
    for (a, b) in coarse.per_slot_mean.iter().zip(&fine.per_slot_mean) {
        assert!(
            (a - b).abs() <= 10.0 * coarse.truncation_mass + 1e-12,
            "means moved {:.3e} vs budget {:.3e}",
            (a - b).abs(),
            10.0 * coarse.truncation_mass
        );
    }
}
