//! Uniform cubic B-splines on knots `τ_t = t·Δτ`.
//!
//! Control point `p_{t-1}` peaks at knot `τ_t`, so the curve at a knot is
//! `p(τ_t) = (p_{t-2} + 4 p_{t-1} + p_t) / 6` and the segment `[τ_t, τ_{t+1}]`
//! is governed by `p_{t-2} .. p_{t+1}`. With points `p_0 .. p_n` the curve
//! is defined on `[τ_2, τ_n]`.
//!
//! Derivatives are lower-degree uniform splines over the difference points
//! `(q_{i+1} - q_i) / Δτ`, with the same knot alignment.

use thiserror::Error;

use crate::table::Table;
use crate::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum SplineError {
    #[error("knot interval must be positive and finite, got {0}")]
    BadKnotInterval(f64),
    #[error("need at least {need} control points, have {have}")]
    TooFewPoints { need: usize, have: usize },
    #[error("parameter {tau} outside the valid span [{lo}, {hi}]")]
    OutOfSpan { tau: f64, lo: f64, hi: f64 },
    #[error("knot {knot} has no governing segment (valid {lo}..={hi})")]
    BadKnot { knot: usize, lo: usize, hi: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
}

impl KinematicState {
    pub fn at_rest(position: Vec3) -> Self {
        KinematicState {
            position,
            velocity: Vec3::zeros(),
            acceleration: Vec3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.position, self.velocity, self.acceleration]
            .iter()
            .all(|v| v.iter().all(|c| c.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BSplineTrajectory {
    control_points: Vec<Vec3>,
    knot_interval: f64,
}

impl BSplineTrajectory {
    pub fn new(control_points: Vec<Vec3>, knot_interval: f64) -> Result<Self, SplineError> {
        if !(knot_interval.is_finite() && knot_interval > 0.0) {
            return Err(SplineError::BadKnotInterval(knot_interval));
        }
        Ok(BSplineTrajectory {
            control_points,
            knot_interval,
        })
    }

    pub fn control_points(&self) -> &[Vec3] {
        &self.control_points
    }

    pub fn knot_interval(&self) -> f64 {
        self.knot_interval
    }

    pub fn push(&mut self, p: Vec3) {
        self.control_points.push(p);
    }

    /// Valid parameter range `[τ_2, τ_n]`.
    pub fn span(&self) -> Result<(f64, f64), SplineError> {
        let n = self.control_points.len();
        if n < 4 {
            return Err(SplineError::TooFewPoints { need: 4, have: n });
        }
        Ok((2.0 * self.knot_interval, (n - 1) as f64 * self.knot_interval))
    }

    /// Duration of the evaluable part of the curve.
    pub fn duration(&self) -> f64 {
        self.span().map(|(a, b)| b - a).unwrap_or(0.0)
    }

    pub fn eval_position(&self, tau: f64) -> Result<Vec3, SplineError> {
        eval_uniform(&self.control_points, 3, self.knot_interval, tau)
    }

    pub fn eval_velocity(&self, tau: f64) -> Result<Vec3, SplineError> {
        self.span()?;
        let v = derivative_points(&self.control_points, self.knot_interval)?;
        eval_uniform_checked(&v, 2, self.knot_interval, tau, self.span()?)
    }

    pub fn eval_acceleration(&self, tau: f64) -> Result<Vec3, SplineError> {
        self.span()?;
        let v = derivative_points(&self.control_points, self.knot_interval)?;
        let a = derivative_points(&v, self.knot_interval)?;
        eval_uniform_checked(&a, 1, self.knot_interval, tau, self.span()?)
    }

    /// Position at knot `τ_t`, `t >= 2`.
    pub fn knot_position(&self, t: usize) -> Option<Vec3> {
        let p = &self.control_points;
        (t >= 2 && t < p.len()).then(|| (p[t - 2] + p[t - 1] * 4.0 + p[t]) / 6.0)
    }

    /// Norm of the (piecewise constant) jerk on `[τ_knot, τ_{knot+1}]`.
    pub fn jerk_on_segment(&self, knot: usize) -> Result<f64, SplineError> {
        let n = self.control_points.len();
        if n < 4 {
            return Err(SplineError::TooFewPoints { need: 4, have: n });
        }
        if knot < 2 || knot > n - 2 {
            return Err(SplineError::BadKnot {
                knot,
                lo: 2,
                hi: n - 2,
            });
        }
        let p = &self.control_points;
        Ok(segment_jerk(
            [p[knot - 2], p[knot - 1], p[knot], p[knot + 1]],
            self.knot_interval,
        )
        .norm())
    }

    /// One control point per row.
    pub fn control_point_table(&self) -> Table {
        let mut t = Table::new(["index", "x", "y", "z"])
            .comment("uniform cubic B-spline control points")
            .comment(format!("knot_interval {}", self.knot_interval));
        for (i, p) in self.control_points.iter().enumerate() {
            t.push(vec![i as f64, p.x, p.y, p.z]);
        }
        t
    }

    /// Samples `per_segment` points per knot interval over the whole span.
    pub fn sampled_table(&self, per_segment: usize) -> Result<Table, SplineError> {
        let (lo, hi) = self.span()?;
        let steps = (((hi - lo) / self.knot_interval).round() as usize * per_segment).max(1);
        let mut t = Table::new(["tau", "x", "y", "z", "speed", "accel"])
            .comment("sampled B-spline trajectory");
        for i in 0..=steps {
            let tau = lo + (hi - lo) * i as f64 / steps as f64;
            let p = self.eval_position(tau)?;
            let v = self.eval_velocity(tau)?;
            let a = self.eval_acceleration(tau)?;
            t.push(vec![tau, p.x, p.y, p.z, v.norm(), a.norm()]);
        }
        Ok(t)
    }
}

/// Difference points `(q_{t+1} - q_t) / Δτ`.
pub fn derivative_points(points: &[Vec3], knot_interval: f64) -> Result<Vec<Vec3>, SplineError> {
    if !(knot_interval.is_finite() && knot_interval > 0.0) {
        return Err(SplineError::BadKnotInterval(knot_interval));
    }
    if points.len() < 2 {
        return Err(SplineError::TooFewPoints {
            need: 2,
            have: points.len(),
        });
    }
    Ok(points
        .windows(2)
        .map(|w| (w[1] - w[0]) / knot_interval)
        .collect())
}

/// First three control points reproducing position, velocity and
/// acceleration at `τ_2`:
/// `p0/6 + 2p1/3 + p2/6 = p`, `(v0 + v1)/2 = v`, `a0 = a`.
pub fn init_from_state(state: &KinematicState, knot_interval: f64) -> [Vec3; 3] {
    let dt = knot_interval;
    let p = state.position;
    let v = state.velocity;
    let a = state.acceleration * (dt * dt);
    let p1 = p - a / 6.0;
    let mid = p + a / 3.0;
    [mid - v * dt, p1, mid + v * dt]
}

/// Uniform cubic basis weights at local parameter `u ∈ [0, 1]`.
pub fn cubic_basis(u: f64) -> [f64; 4] {
    let u2 = u * u;
    let u3 = u2 * u;
    let w = 1.0 - u;
    [
        w * w * w / 6.0,
        (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0,
        (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0,
        u3 / 6.0,
    ]
}

/// Position on the segment governed by `seg` at local parameter `u`.
pub fn segment_point(seg: [Vec3; 4], u: f64) -> Vec3 {
    let b = cubic_basis(u);
    seg[0] * b[0] + seg[1] * b[1] + seg[2] * b[2] + seg[3] * b[3]
}

pub fn segment_jerk(seg: [Vec3; 4], knot_interval: f64) -> Vec3 {
    (seg[3] - seg[2] * 3.0 + seg[1] * 3.0 - seg[0]) / knot_interval.powi(3)
}

fn basis(degree: usize, u: f64) -> [f64; 4] {
    match degree {
        3 => cubic_basis(u),
        2 => {
            let w = 1.0 - u;
            [0.5 * w * w, 0.5 * (-2.0 * u * u + 2.0 * u + 1.0), 0.5 * u * u, 0.0]
        }
        1 => [1.0 - u, u, 0.0, 0.0],
        _ => [1.0, 0.0, 0.0, 0.0],
    }
}

fn eval_uniform(points: &[Vec3], degree: usize, dt: f64, tau: f64) -> Result<Vec3, SplineError> {
    let n = points.len();
    let need = if degree == 3 { 4 } else { degree + 1 };
    if n < need {
        return Err(SplineError::TooFewPoints { need, have: n });
    }
    let span = (2.0 * dt, (n + 2 - degree) as f64 * dt);
    eval_uniform_checked(points, degree, dt, tau, span)
}

fn eval_uniform_checked(
    points: &[Vec3],
    degree: usize,
    dt: f64,
    tau: f64,
    span: (f64, f64),
) -> Result<Vec3, SplineError> {
    let (lo, hi) = span;
    let slack = 1e-9 * dt;
    if !(tau >= lo - slack && tau <= hi + slack) {
        return Err(SplineError::OutOfSpan { tau, lo, hi });
    }
    let last_seg = (hi / dt).round() as usize - 1;
    let seg = ((tau / dt).floor() as usize).clamp(2, last_seg);
    let u = (tau / dt - seg as f64).clamp(0.0, 1.0);
    let w = basis(degree, u);
    let first = seg - 2;
    Ok((0..=degree).fold(Vec3::zeros(), |acc, i| acc + points[first + i] * w[i]))
}
