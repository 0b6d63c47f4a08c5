mod common;

use common::flight::{audit_random_episodes, corridor_plans, reward_hand_cases, straight_x as straight};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sfcrl::bspline::KinematicState;
use sfcrl::corridor::{SafeFlightCorridor, SubCorridor};
use sfcrl::env::{
    clamp_velocity, observe, run_episode, transform_action,
    ActionSpec, EnvConfig, PlannerState, Termination,
};
use sfcrl::Vec3;

#[test]
fn cube_boundary_maps_to_disc_boundary() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for v_max in [4.0, 7.0, 15.0] {
        let spec = ActionSpec::for_max_speed(v_max);
        for _ in 0..1000 {
            let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let (c, s) = (th.cos(), th.sin());
            let m = c.abs().max(s.abs());
            let a = transform_action([c / m, s / m, rng.random_range(-1.0..1.0)], &spec);
            let h = a.x.hypot(a.y);
            assert!((h - spec.a_max).abs() <= 0.01 * spec.a_max, "theta {th}: {h}");
            assert!((a.y.atan2(a.x) - s.atan2(c)).abs() < 1e-9 || h < 1e-9);
        }
    }
}

#[test]
fn action_examples() {
    let spec = ActionSpec::for_max_speed(4.0);
    let a = transform_action([1.0, 1.0, 0.0], &spec);
    let want = spec.a_max / 2f64.sqrt();
    assert!((a.x - want).abs() < 1e-6 && (a.y - want).abs() < 1e-6);
    let a = transform_action([1.0, 0.0, 0.0], &spec);
    assert!((a.x - spec.a_max).abs() <= spec.eps * spec.a_max);
    assert_eq!(spec.a_max, 8.0);
    assert_eq!(spec.j_max, 90.0);
    assert!(spec.az_max < 9.8 && spec.eps > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn clamp_caps_and_is_idempotent(v in (-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64), v_max in 1.0..15.0f64) {
        let spec = ActionSpec::for_max_speed(v_max);
        let c = clamp_velocity(Vec3::new(v.0, v.1, v.2), &spec);
        prop_assert!(c.x.hypot(c.y) <= v_max + 1e-9);
        prop_assert!(c.z.abs() <= spec.vz_max);
        prop_assert_eq!(clamp_velocity(c, &spec), c);
    }

    #[test]
    fn inner_actions_stay_in_disc(a in (-1.0..=1.0f64, -1.0..=1.0f64, -1.0..=1.0f64)) {
        let spec = ActionSpec::for_max_speed(5.0);
        let out = transform_action([a.0, a.1, a.2], &spec);
        prop_assert!(out.x.hypot(out.y) <= spec.a_max + 1e-9);
        prop_assert!(out.z.abs() <= spec.az_max + 1e-12);
    }
}

#[test]
fn reward_and_termination_hand_cases() {
    reward_hand_cases();
}

#[test]
fn random_episodes_respect_step_contracts() {
    let (episodes, _, exits) = audit_random_episodes(&corridor_plans(10), 100, 42);
    assert_eq!(episodes, 1000);
    assert!(exits > 100);
}

#[test]
fn zero_policy_runs_to_horizon_without_progress() {
    let cfg = EnvConfig::default();
    let sfc = straight(&[3.0, 3.0, 3.0], 0.6);
    let start = KinematicState::at_rest(Vec3::new(0.5, 0.0, 1.0));
    let ep = run_episode(&sfc, &start, &mut |_: &[f64]| [0.0; 3], &cfg);
    assert_eq!(ep.cause, Termination::Horizon);
    assert_eq!(ep.steps.len(), cfg.horizon);
    let rf: f64 = ep.steps.iter().map(|s| s.parts.r_f).sum();
    assert!(rf.abs() < 1e-12);
}

#[test]
fn observation_is_translation_invariant() {
    let cfg = EnvConfig::default();
    let sfc = straight(&[3.0, 2.0, 4.0], 0.6);
    let shift = Vec3::new(13.0, -7.0, 0.4);
    let moved = SafeFlightCorridor::from_subcorridors(
        sfc.subcorridors()
            .iter()
            .map(|s| SubCorridor {
                start: s.start + shift,
                end: s.end + shift,
                z_inf: s.z_inf + shift.z,
                z_sup: s.z_sup + shift.z,
                ..*s
            })
            .collect(),
    );
    let st = KinematicState {
        position: Vec3::new(1.0, 0.1, 1.0),
        velocity: Vec3::new(1.0, 0.2, 0.0),
        acceleration: Vec3::new(0.5, 0.0, 0.0),
    };
    let a = PlannerState::new(&st, &sfc, cfg.knot_interval);
    let st2 = KinematicState {
        position: st.position + shift,
        ..st
    };
    let b = PlannerState::new(&st2, &moved, cfg.knot_interval);
    let (oa, ob) = (observe(&a, &sfc, &cfg), observe(&b, &moved, &cfg));
    for (x, y) in oa.iter().zip(&ob) {
        assert!((x - y).abs() < 1e-9);
    }
}
