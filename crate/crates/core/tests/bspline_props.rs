mod common;

use nalgebra::Matrix3;
use proptest::prelude::*;
use sfcrl::bspline::{derivative_points, init_from_state, BSplineTrajectory, KinematicState};
use sfcrl::Vec3;

fn vec3() -> impl Strategy<Value = Vec3> {
    (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn spline() -> impl Strategy<Value = BSplineTrajectory> {
    (prop::collection::vec(vec3(), 4..14), 0.05..2.0f64)
        .prop_map(|(p, dt)| BSplineTrajectory::new(p, dt).unwrap())
}

fn spline_and_tau() -> impl Strategy<Value = (BSplineTrajectory, f64)> {
    (spline(), 0.0..=1.0f64).prop_map(|(s, u)| {
        let (lo, hi) = s.span().unwrap();
        let tau = lo + (hi - lo) * u;
        (s, tau)
    })
}

/// Barycentric coordinates of `p` with respect to a tetrahedron.
fn barycentric(tet: [Vec3; 4], p: Vec3) -> Option<[f64; 4]> {
    let m = Matrix3::from_columns(&[tet[1] - tet[0], tet[2] - tet[0], tet[3] - tet[0]]);
    let l = m.try_inverse()? * (p - tet[0]);
    Some([1.0 - l.sum(), l[0], l[1], l[2]])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn matches_de_boor((s, tau) in spline_and_tau()) {
        let got = s.eval_position(tau).unwrap();
        let want = common::de_boor(s.control_points(), s.knot_interval(), tau);
        prop_assert!((got - want).norm() < 1e-9, "tau {tau}: {got:?} vs {want:?}");
    }

    #[test]
    fn inside_hull_of_active_points((s, tau) in spline_and_tau()) {
        let dt = s.knot_interval();
        let n = s.control_points().len() - 1;
        let k = ((tau / dt).floor() as usize + 1).clamp(3, n);
        let p = s.control_points();
        let tet = [p[k - 3], p[k - 2], p[k - 1], p[k]];
        let x = s.eval_position(tau).unwrap();
        if let Some(b) = barycentric(tet, x) {
            let scale = tet.iter().map(|q| q.norm()).fold(1.0, f64::max);
            let det = Matrix3::from_columns(&[tet[1] - tet[0], tet[2] - tet[0], tet[3] - tet[0]]).determinant();
            prop_assume!(det.abs() > 1e-3 * scale.powi(3));
            for w in b {
                prop_assert!(w > -1e-9, "weights {b:?}");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences((s, tau) in spline_and_tau()) {
        let h = 1e-5;
        let (lo, hi) = s.span().unwrap();
        let tau = tau.clamp(lo + h, hi - h);
        let fd_v = (s.eval_position(tau + h).unwrap() - s.eval_position(tau - h).unwrap()) / (2.0 * h);
        let v = s.eval_velocity(tau).unwrap();
        prop_assert!(common::rel_err(fd_v.norm(), v.norm(), 1.0) < 1e-4);
        prop_assert!((fd_v - v).norm() / v.norm().max(1.0) < 1e-4);
        let fd_a = (s.eval_velocity(tau + h).unwrap() - s.eval_velocity(tau - h).unwrap()) / (2.0 * h);
        let a = s.eval_acceleration(tau).unwrap();
        prop_assert!((fd_a - a).norm() / a.norm().max(1.0) < 1e-4, "{fd_a:?} vs {a:?}");
    }

    #[test]
    fn perturbing_one_point_is_local(s in spline(), pick in 0usize..100, d in vec3()) {
        let n = s.control_points().len();
        let t = pick % n;
        let dt = s.knot_interval();
        let mut moved = s.control_points().to_vec();
        moved[t] += d;
        let m = BSplineTrajectory::new(moved, dt).unwrap();
        let (lo, hi) = s.span().unwrap();
        for i in 0..=200 {
            let tau = lo + (hi - lo) * i as f64 / 200.0;
            let outside = tau <= (t as f64 - 1.0) * dt + 1e-12 || tau >= (t as f64 + 3.0) * dt - 1e-12;
            if outside {
                let diff = (s.eval_position(tau).unwrap() - m.eval_position(tau).unwrap()).norm();
                prop_assert!(diff < 1e-9, "t {t} tau {tau} diff {diff}");
            }
        }
    }

    #[test]
    fn boundary_state_round_trip(p in vec3(), v in vec3(), a in vec3(), tail in vec3()) {
        let dt = 0.3;
        let state = KinematicState { position: p, velocity: v, acceleration: a };
        let [p0, p1, p2] = init_from_state(&state, dt);
        let s = BSplineTrajectory::new(vec![p0, p1, p2, tail], dt).unwrap();
        let tau = 2.0 * dt;
        prop_assert!((s.eval_position(tau).unwrap() - p).norm() < 1e-9);
        prop_assert!((s.eval_velocity(tau).unwrap() - v).norm() < 1e-9);
        prop_assert!((s.eval_acceleration(tau).unwrap() - a).norm() < 1e-9);
    }

    #[test]
    fn jerk_scales_linearly(s in spline(), scale in -5.0..5.0f64, pick in 0usize..100) {
        let n = s.control_points().len();
        let knot = 2 + pick % (n - 3);
        let scaled: Vec<Vec3> = s.control_points().iter().map(|p| p * scale).collect();
        let t = BSplineTrajectory::new(scaled, s.knot_interval()).unwrap();
        let j = s.jerk_on_segment(knot).unwrap();
        let js = t.jerk_on_segment(knot).unwrap();
        prop_assert!((js - scale.abs() * j).abs() <= 1e-9 * j.max(1.0));
    }

    #[test]
    fn jerk_is_third_derivative_on_segment(s in spline(), pick in 0usize..100, u in 0.1..0.9f64) {
        let n = s.control_points().len();
        let knot = 2 + pick % (n - 3);
        let dt = s.knot_interval();
        let v = derivative_points(s.control_points(), dt).unwrap();
        let a = derivative_points(&v, dt).unwrap();
        let j = derivative_points(&a, dt).unwrap();
        prop_assert!((j[knot - 2].norm() - s.jerk_on_segment(knot).unwrap()).abs() < 1e-9 * j[knot - 2].norm().max(1.0));
        let tau = (knot as f64 + u) * dt;
        let h = 1e-4 * dt;
        let fd = (s.eval_acceleration(tau + h).unwrap() - s.eval_acceleration(tau - h).unwrap()) / (2.0 * h);
        prop_assert!((fd - j[knot - 2]).norm() / fd.norm().max(1.0) < 1e-4);
    }
}

#[test]
fn knot_value_example() {
    let p: Vec<Vec3> = (0..4).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
    let s = BSplineTrajectory::new(p, 1.0).unwrap();
    assert!((s.eval_position(2.0).unwrap().x - 1.0).abs() < 1e-12);
}

#[test]
fn out_of_span_is_an_error() {
    let p: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
    let s = BSplineTrajectory::new(p, 0.5).unwrap();
    let (lo, hi) = s.span().unwrap();
    assert!(s.eval_position(lo - 1e-6).is_err());
    assert!(s.eval_position(hi + 1e-6).is_err());
    assert!(BSplineTrajectory::new(vec![Vec3::zeros(); 3], 0.5).unwrap().span().is_err());
}
