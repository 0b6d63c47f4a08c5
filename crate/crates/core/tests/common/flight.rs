//! Corridor fixtures, reward hand cases and the exit-flag audit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sfcrl::bspline::KinematicState;
use sfcrl::corridor::{segment_normal, PlanningMaps, SafeFlightCorridor, SubCorridor};
use sfcrl::env::{build_plan_on, jerk_discount, observe, reward_follow, step, EnvConfig, PlannerState, Termination};
use sfcrl::Vec3;

/// Straight corridor along +x at 1 m altitude with the given segment lengths.
pub fn straight_x(lengths: &[f64], width: f64) -> SafeFlightCorridor {
    let mut x = 0.0;
    let subs = lengths
        .iter()
        .map(|&l| {
            let start = Vec3::new(x, 0.0, 1.0);
            x += l;
            let end = Vec3::new(x, 0.0, 1.0);
            SubCorridor {
                start,
                end,
                normal: segment_normal(start, end).unwrap(),
                width_left: width,
                width_right: width,
                z_inf: 0.5,
                z_sup: 1.5,
                fallback: false,
            }
        })
        .collect();
    SafeFlightCorridor::from_subcorridors(subs)
}

/// Corridors built on random block worlds.
pub fn corridor_plans(count: usize) -> Vec<SafeFlightCorridor> {
    let cfg = EnvConfig::default();
    let mut out = Vec::new();
    let mut seed = 100;
    while out.len() < count {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (raw, s, g) = super::random_block_world(&mut rng);
        let maps = PlanningMaps::new(&raw, &cfg.planning);
        if let Ok(p) = build_plan_on(&maps, s, g, &cfg.planning) {
            out.push(p.corridor);
        }
    }
    out
}

pub fn inside_all(sfc: &SafeFlightCorridor, p: Vec3) -> bool {
    sfc.subcorridors().iter().any(|s| super::membership(s, p))
}

fn resting(p: Vec3, index: usize, step: usize) -> PlannerState {
    PlannerState {
        points: [p; 3],
        velocity: Vec3::zeros(),
        index,
        step,
    }
}

/// Hand-computed rewards for progress, jerk discount, exit and success
/// with the default weights (exit 30, follow 5, success 50).
pub fn reward_hand_cases() {
    let tol = 1e-10;
    assert_eq!(reward_follow(1, 3, &[7.0, 2.0, 3.0]), 5.0);
    assert_eq!(reward_follow(3, 1, &[7.0, 2.0, 3.0]), -5.0);
    assert_eq!(reward_follow(2, 2, &[7.0, 2.0, 3.0]), 0.0);
    assert!((jerk_discount(4.0, 0.75 * 90.0, 90.0) - 2.0).abs() < tol);
    assert_eq!(jerk_discount(4.0, 0.0, 90.0), 4.0);
    assert_eq!(jerk_discount(4.0, 90.0, 90.0), 0.0);
    assert_eq!(jerk_discount(4.0, 90.0 + 1e-9, 90.0), 0.0);

    let cfg = EnvConfig::default();
    // Knot placed in sub-corridor 4 while the state still records 2.
    let sfc = straight_x(&[1.0, 1.5, 2.0, 2.5, 3.0, 1.0], 0.5);
    let (out, next) = step(&resting(Vec3::new(7.5, 0.0, 1.0), 2, 0), [0.0; 3], &sfc, &cfg);
    assert_eq!(next.index, 4);
    assert!((out.parts.r_f_raw - 4.5).abs() < tol);
    assert!((out.parts.r_f - 4.5).abs() < tol);
    assert_eq!(out.parts.r_p, 0.0);
    assert!((out.reward - 5.0 * 4.5).abs() < tol);
    assert!(!out.done());

    // Lateral offset s·(1 + u): samples u = 0.1..0.3 are inside, u = 0.4 is not.
    let sfc = straight_x(&[4.0, 4.0], 0.5);
    let s = 0.37;
    let state = PlannerState {
        points: [Vec3::new(2.0, 0.0, 1.0), Vec3::new(2.0, s, 1.0), Vec3::new(2.0, 2.0 * s, 1.0)],
        velocity: Vec3::new(0.0, s / cfg.knot_interval, 0.0),
        index: 0,
        step: 0,
    };
    assert!(s * 1.3 < 0.5 && s * 1.4 >= 0.5);
    let (out, _) = step(&state, [0.0; 3], &sfc, &cfg);
    assert_eq!(out.parts.r_p, -1.0);
    assert!(out.terminated && out.done());
    assert_eq!(out.cause, Some(Termination::CorridorExit));
    assert!((out.reward + 30.0).abs() < tol);

    let sfc = straight_x(&[2.0, 2.0, 2.0], 0.5);
    let (out, _) = step(&resting(Vec3::new(5.0, 0.0, 1.0), 1, 3), [0.0; 3], &sfc, &cfg);
    assert_eq!(out.parts.r_s, 1.0);
    assert!(out.success && out.done() && !out.terminated);
    assert!((out.reward - (5.0 * 2.0 + 50.0)).abs() < tol);
}

/// Random-policy episodes on `plans`, checking every step's exit flag
/// against ten independent de Boor membership samples along with the
/// other step contracts. Returns (episodes, steps, exits).
pub fn audit_random_episodes(plans: &[SafeFlightCorridor], per_plan: usize, seed: u64) -> (usize, usize, usize) {
    let cfg = EnvConfig::default();
    let spec = cfg.action_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut episodes, mut steps, mut exits) = (0, 0, 0);
    for (pi, sfc) in plans.iter().enumerate() {
        let v0 = sfc.vertices()[0];
        for _ in 0..per_plan {
            let start = cfg.start_noise.apply(&KinematicState::at_rest(v0), &mut rng);
            let mut state = PlannerState::new(&start, sfc, cfg.knot_interval);
            let bias = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0];
            loop {
                let alpha = [
                    (bias[0] + rng.random_range(-0.6..0.6f64)).clamp(-1.0, 1.0),
                    (bias[1] + rng.random_range(-0.6..0.6f64)).clamp(-1.0, 1.0),
                    rng.random_range(-0.2..0.2),
                ];
                let [p0, p1, p2] = state.points;
                let (out, next) = step(&state, alpha, sfc, &cfg);
                steps += 1;
                assert_eq!(out.observation.len(), 66);
                assert_eq!(observe(&state, sfc, &cfg).len(), 66);
                assert!(next.velocity.x.hypot(next.velocity.y) <= spec.v_max + 1e-9);
                assert!(next.velocity.z.abs() <= spec.vz_max + 1e-12);
                assert!(((next.points[2] - next.points[1]) / cfg.knot_interval - next.velocity).norm() < 1e-9);
                let cps = [p0, p1, p2, out.new_point];
                let t0 = 2.0 * cfg.knot_interval;
                let outside = (1..=10).any(|k| {
                    let tau = t0 + k as f64 * cfg.knot_interval / 10.0;
                    !inside_all(sfc, super::de_boor(&cps, cfg.knot_interval, tau))
                });
                assert_eq!(out.parts.r_p == -1.0, outside, "plan {pi}");
                if out.parts.r_p == -1.0 || out.parts.jerk > spec.j_max {
                    assert!(out.terminated && out.done());
                }
                assert_eq!(out.parts.r_f, jerk_discount(out.parts.r_f_raw, out.parts.jerk, spec.j_max));
                let total = 30.0 * out.parts.r_p + 5.0 * out.parts.r_f + 50.0 * out.parts.r_s;
                assert!((out.reward - total).abs() < 1e-12);
                assert_eq!(out.done(), out.terminated || out.success);
                if let Some(i) = sfc.locate(next.knot()) {
                    assert_eq!(next.index, i);
                }
                state = next;
                if let Some(c) = out.cause {
                    exits += usize::from(c == Termination::CorridorExit);
                    break;
                }
            }
            episodes += 1;
        }
    }
    (episodes, steps, exits)
}
