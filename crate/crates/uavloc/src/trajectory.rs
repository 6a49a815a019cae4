//! Closed-form velocity design for the next measurement frame.
//!
//! After a frame is estimated, one extra range-scaled Doppler sample
//! `f_bar_next` is taken and the next frame's constant planar velocity `u` is
//! chosen so that the new augmented-LS residual vanishes:
//!
//! ```text
//! u . b = d,        |u| = A_v,
//! b = p_K' - p_hat, d = f_bar_next / gamma - delta * |u|^2,
//! ```
//!
//! i.e. a line-circle intersection in velocity space. Eliminating one
//! component gives a quadratic with discriminant `Delta2`; its sign equals
//! the sign of `(A_v |b|)^2 - d^2` (the geometric intersection predicate).
//! When `Delta2 < 0` the speed itself is re-chosen as the smallest magnitude
//! making the system tangent (`Delta2 = 0`), which reduces to a quadratic in
//! `A^2` with discriminant `Delta4`; the tangent velocity is the projection
//! solution `u = (d / |b|^2) b`, clamped to `V_max`. If no admissible speed
//! exists the previous velocity is kept.

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};

/// Everything the velocity design needs from the harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryInputs {
    /// UAV position at the end of the finished frame (meters).
    pub p_k_end: Vector3<f64>,
    /// Current emitter estimate (meters).
    pub p_hat: Vector2<f64>,
    /// Range-scaled Doppler sample for the upcoming frame (Hz * m).
    pub f_bar_next: f64,
    /// Commanded speed magnitude (m/s); `0 < a_v <= v_max`.
    pub a_v: f64,
    /// Hard speed bound (m/s).
    pub v_max: f64,
    /// Doppler scale `f0 / c` (s/m).
    pub gamma: f64,
    /// Sample period (s).
    pub delta: f64,
    /// Velocity to keep when the design has no solution (m/s).
    pub prev_velocity: Vector2<f64>,
}

impl TrajectoryInputs {
    /// `b = p_K' - p_hat`, the planar offset from the estimate to the UAV.
    pub fn offset(&self) -> Vector2<f64> {
        Vector2::new(self.p_k_end.x, self.p_k_end.y) - self.p_hat
    }

    fn validate(&self) -> Result<()> {
        if !(self.a_v > 0.0 && self.a_v <= self.v_max) {
            return Err(Error::Config(format!(
                "trajectory speed must satisfy 0 < a_v <= v_max, got a_v = {}, v_max = {}",
                self.a_v, self.v_max
            )));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Config(format!("trajectory delta must be > 0, got {}", self.delta)));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Config(format!(
                "trajectory design requires gamma > 0, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Which branch produced the command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocityBranch {
    /// Two intersection roots existed at the commanded speed.
    TwoRoot,
    /// Speed re-chosen to make the system tangent.
    RechosenSpeed,
    /// No admissible solution; the previous velocity is kept.
    NoSolutionKeepPrevious,
}

/// The designed velocity for the next frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityCommand {
    /// Planar velocity (m/s).
    pub u: Vector2<f64>,
    /// Speed actually used; equals `|u|` except on the no-solution branch.
    pub speed_used: f64,
    pub branch: VelocityBranch,
    /// Discriminant of the velocity quadratic, when evaluated.
    pub delta2: Option<f64>,
    /// Discriminant of the speed-reselection quadratic, when evaluated.
    pub delta4: Option<f64>,
}

/// Residual of the design condition at a candidate velocity:
/// `u . b - d(u)` with `d(u) = f_bar_next / gamma - delta * |u|^2`.
///
/// Zero iff `u` is a stationary point of the augmented cost at its own speed.
pub fn velocity_constraint(inputs: &TrajectoryInputs, u: Vector2<f64>) -> f64 {
    let b = inputs.offset();
    let d = inputs.f_bar_next / inputs.gamma - inputs.delta * u.norm_squared();
    u.dot(&b) - d
}

/// Roots of `a u^2 - 2 b u + c = 0`, computed without cancellation.
fn stable_quadratic_roots(a: f64, b: f64, disc: f64, c: f64) -> (f64, f64) {
    let sq = disc.max(0.0).sqrt();
    if b == 0.0 {
        (sq / a, -sq / a)
    } else {
        let u1 = (b + b.signum() * sq) / a;
        let u2 = if u1 == 0.0 { 0.0 } else { c / (a * u1) };
        (u1, u2)
    }
}

/// Solve the velocity design problem.
pub fn solve_velocity(inputs: &TrajectoryInputs) -> Result<VelocityCommand> {
    inputs.validate()?;
    let b = inputs.offset();
    let b_norm2 = b.norm_squared();
    if b_norm2 == 0.0 {
        // UAV exactly above the estimate: every direction is stationary.
        return Err(Error::DegenerateGeometry);
    }

    let f_over_gamma = inputs.f_bar_next / inputs.gamma;
    let d = f_over_gamma - inputs.delta * inputs.a_v * inputs.a_v;

    // Divide by the larger component: the system is symmetric under
    // coordinate exchange, so swap when |b2| < |b1| and swap back at the end.
    let swapped = b.y.abs() < b.x.abs();
    let (b1, b2) = if swapped { (b.y, b.x) } else { (b.x, b.y) };

    let a_p = 1.0 + (b1 * b1) / (b2 * b2);
    let b_p = d * b1 / (b2 * b2);
    let c_p = d * d / (b2 * b2) - inputs.a_v * inputs.a_v;
    let delta2 = b_p * b_p - a_p * c_p;

    if delta2 >= 0.0 {
        let (ux1, ux2) = stable_quadratic_roots(a_p, b_p, delta2, c_p);
        let unswap = |ux: f64| -> Vector2<f64> {
            let uy = (d - b1 * ux) / b2;
            if swapped {
                Vector2::new(uy, ux)
            } else {
                Vector2::new(ux, uy)
            }
        };
        let cand = [unswap(ux1), unswap(ux2)];

        // Both roots satisfy u.b = d and |u| = A_v, so the next position
        // p_K + delta*u sits at the same distance from the estimate for
        // either; compare anyway, then break the (structural) tie with the
        // orientation of u around b so the choice is deterministic and
        // independent of root ordering.
        let next_dist = |u: &Vector2<f64>| (b + inputs.delta * u).norm();
        let (d0, d1) = (next_dist(&cand[0]), next_dist(&cand[1]));
        let chosen = if (d0 - d1).abs() > 1e-9 * (1.0 + d0.max(d1)) {
            if d0 < d1 {
                cand[0]
            } else {
                cand[1]
            }
        } else {
            let cross = |u: &Vector2<f64>| b.x * u.y - b.y * u.x;
            let (c0, c1) = (cross(&cand[0]), cross(&cand[1]));
            if c0 > c1 {
                cand[0]
            } else if c1 > c0 {
                cand[1]
            } else if (cand[0].x, cand[0].y) >= (cand[1].x, cand[1].y) {
                cand[0]
            } else {
                cand[1]
            }
        };
        return Ok(VelocityCommand {
            u: chosen,
            speed_used: inputs.a_v,
            branch: VelocityBranch::TwoRoot,
            delta2: Some(delta2),
            delta4: None,
        });
    }

    // Tangency re-selection: Delta2(A) = 0 means A^2 |b|^2 = d(A)^2 with
    // d(A) = F - delta * A^2. In s = A^2:
    //     delta^2 s^2 - (2 delta F + |b|^2) s + F^2 = 0.
    let a_pp = inputs.delta * inputs.delta;
    let b_pp = -(2.0 * inputs.delta * f_over_gamma + b_norm2);
    let c_pp = f_over_gamma * f_over_gamma;
    let delta4 = b_pp * b_pp - 4.0 * a_pp * c_pp;

    let no_solution = || VelocityCommand {
        u: inputs.prev_velocity,
        speed_used: inputs.prev_velocity.norm(),
        branch: VelocityBranch::NoSolutionKeepPrevious,
        delta2: Some(delta2),
        delta4: Some(delta4),
    };

    if delta4 < 0.0 {
        return Ok(no_solution());
    }
    let (s1, s2) = stable_quadratic_roots(a_pp, -0.5 * b_pp, 0.25 * delta4, c_pp);
    let s_min_positive = [s1, s2]
        .into_iter()
        .filter(|s| *s > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !s_min_positive.is_finite() {
        return Ok(no_solution());
    }

    let speed = s_min_positive.sqrt().min(inputs.v_max);
    let d_new = f_over_gamma - inputs.delta * speed * speed;
    // Tangent solution: u = (d_new / |b|^2) b, which already has magnitude
    // `speed` when the clamp is inactive; renormalizing keeps |u| = speed
    // when the clamp binds (best-effort along the same direction).
    let dir = (d_new.signum() / b_norm2.sqrt()) * b;
    let u = speed * dir;
    Ok(VelocityCommand {
        u,
        speed_used: speed,
        branch: VelocityBranch::RechosenSpeed,
        delta2: Some(delta2),
        delta4: Some(delta4),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Build inputs whose constraint scalar at the commanded speed is `d`.
    fn inputs_with(b: Vector2<f64>, d: f64, a_v: f64) -> TrajectoryInputs {
        let gamma = 1.0;
        let delta = 0.1;
        TrajectoryInputs {
            p_k_end: Vector3::new(b.x, b.y, 50.0),
            p_hat: Vector2::zeros(),
            f_bar_next: gamma * (d + delta * a_v * a_v),
            a_v,
            v_max: 100.0,
            gamma,
            delta,
            prev_velocity: Vector2::new(a_v, 0.0),
        }
    }

    #[test]
    fn constraint_residual_hand_checked() {
        // b = [1, 0], d = 3: u = [3, 4] satisfies 3*1 + 4*0 - 3 = 0.
        let inputs = inputs_with(Vector2::new(1.0, 0.0), 3.0, 5.0);
        let r = velocity_constraint(&inputs, Vector2::new(3.0, 4.0));
        assert!(r.abs() < 1e-12, "residual = {r}");
    }

    #[test]
    fn constraint_residual_at_zero_velocity_is_minus_d() {
        let inputs = inputs_with(Vector2::new(1.0, 0.0), 3.0, 5.0);
        // d recomputed at |u| = 0 is f_bar/gamma.
        let r = velocity_constraint(&inputs, Vector2::zeros());
        assert!((r + inputs.f_bar_next / inputs.gamma).abs() < 1e-12);
    }

    #[test]
    fn two_root_candidates_match_hand_elimination() {
        // b = [1, 0], d = 3, A_v = 5: elimination gives u_x = 3, u_y = +-4.
        let inputs = inputs_with(Vector2::new(1.0, 0.0), 3.0, 5.0);
        let cmd = solve_velocity(&inputs).unwrap();
        assert_eq!(cmd.branch, VelocityBranch::TwoRoot);
        assert!((cmd.u.x - 3.0).abs() < 1e-12);
        assert!((cmd.u.y.abs() - 4.0).abs() < 1e-12);
        // Both candidates satisfy the system; the tie-break picks the
        // counterclockwise one (positive cross product with b).
        assert!(cmd.u.y > 0.0);
        assert!(velocity_constraint(&inputs, cmd.u).abs() < 1e-12);
        assert!((cmd.u.norm() - 5.0).abs() < 1e-12);
        // Deterministic across repeated solves.
        let again = solve_velocity(&inputs).unwrap();
        assert_eq!(cmd.u, again.u);
    }

    #[test]
    fn tangent_case_returns_unique_solution() {
        // b = [0, 1], d = A_v: the line touches the circle at (0, A_v).
        let a_v = 2.0;
        let inputs = inputs_with(Vector2::new(0.0, 1.0), a_v, a_v);
        let cmd = solve_velocity(&inputs).unwrap();
        assert_eq!(cmd.branch, VelocityBranch::TwoRoot);
        assert!(cmd.delta2.unwrap().abs() < 1e-12);
        assert!((cmd.u.x).abs() < 1e-9);
        assert!((cmd.u.y - a_v).abs() < 1e-9);
    }

    #[test]
    fn no_intersection_engages_fallback() {
        // |d| > A_v * |b| means the line misses the circle.
        let inputs = inputs_with(Vector2::new(1.0, 0.5), 20.0, 5.0);
        let cmd = solve_velocity(&inputs).unwrap();
        assert!(cmd.delta2.unwrap() < 0.0);
        assert_ne!(cmd.branch, VelocityBranch::TwoRoot);
    }

    #[test]
    fn discriminant_sign_matches_intersection_predicate() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let b = Vector2::new(rng.gen_range(-40.0..40.0), rng.gen_range(-40.0..40.0));
            if b.norm() < 1.0 {
                continue;
            }
            let a_v = rng.gen_range(1.0..20.0);
            let eta: f64 = rng.gen_range(-2.0..2.0);
            let d = eta * a_v * b.norm();
            let inputs = inputs_with(b, d, a_v);
            let cmd = solve_velocity(&inputs).unwrap();
            let predicate = d.abs() <= a_v * b.norm();
            let margin = 1e-9 * (1.0 + d.abs());
            if (d.abs() - a_v * b.norm()).abs() < margin {
                continue; // on the tangency boundary either call is fine
            }
            assert_eq!(
                cmd.delta2.unwrap() >= 0.0,
                predicate,
                "b = {b:?}, d = {d}, A_v = {a_v}"
            );
        }
    }

    #[test]
    fn two_root_solutions_satisfy_both_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..200 {
            let b = Vector2::new(rng.gen_range(-40.0..40.0), rng.gen_range(-40.0..40.0));
            if b.norm() < 1.0 {
                continue;
            }
            let a_v = rng.gen_range(1.0..20.0);
            let eta: f64 = rng.gen_range(-0.95..0.95);
            let d = eta * a_v * b.norm();
            let inputs = inputs_with(b, d, a_v);
            let cmd = solve_velocity(&inputs).unwrap();
            assert_eq!(cmd.branch, VelocityBranch::TwoRoot);
            let scale = 1.0 + d.abs();
            assert!(velocity_constraint(&inputs, cmd.u).abs() <= 1e-9 * scale);
            assert!((cmd.u.norm() - a_v).abs() <= 1e-9 * (1.0 + a_v));
        }
    }

    #[test]
    fn rechosen_speed_makes_system_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let mut seen = 0;
        for _ in 0..400 {
            let b = Vector2::new(rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0));
            if b.norm() < 1.0 {
                continue;
            }
            let a_v = rng.gen_range(1.0..10.0);
            let eta = rng.gen_range(1.1..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let d = eta * a_v * b.norm();
            let mut inputs = inputs_with(b, d, a_v);
            inputs.v_max = 1e6; // keep the clamp inactive for this check
            let cmd = solve_velocity(&inputs).unwrap();
            if cmd.branch != VelocityBranch::RechosenSpeed {
                continue;
            }
            seen += 1;
            // At the re-chosen speed the intersection is tangent:
            // |d_new| = A_new * |b| and the command satisfies the system.
            let d_new = inputs.f_bar_next / inputs.gamma - inputs.delta * cmd.speed_used.powi(2);
            let miss = d_new.abs() - cmd.speed_used * b.norm();
            assert!(miss.abs() <= 1e-8 * (1.0 + d_new.abs()), "miss = {miss}");
            assert!((cmd.u.norm() - cmd.speed_used).abs() <= 1e-9 * (1.0 + cmd.speed_used));
            assert!(velocity_constraint(&inputs, cmd.u).abs() <= 1e-7 * (1.0 + d_new.abs()));
        }
        assert!(seen > 50, "only {seen} fallback cases sampled");
    }

    #[test]
    fn speed_never_exceeds_v_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..300 {
            let b = Vector2::new(rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0));
            if b.norm() < 0.5 {
                continue;
            }
            let a_v = rng.gen_range(1.0..10.0);
            let eta: f64 = rng.gen_range(-4.0..4.0);
            let d = eta * a_v * b.norm();
            let mut inputs = inputs_with(b, d, a_v);
            inputs.v_max = 30.0;
            inputs.a_v = a_v.min(inputs.v_max);
            let cmd = solve_velocity(&inputs).unwrap();
            assert!(cmd.speed_used <= 30.0 + 1e-12);
            if cmd.branch != VelocityBranch::NoSolutionKeepPrevious {
                assert!((cmd.u.norm() - cmd.speed_used).abs() <= 1e-9 * (1.0 + cmd.speed_used));
            }
        }
    }

    #[test]
    fn deeply_negative_f_bar_keeps_previous_velocity() {
        // Delta4 < 0 requires f_bar/gamma < -|b|^2 / (4 delta).
        let b = Vector2::new(2.0, 1.0);
        let gamma = 1.0;
        let delta = 0.1;
        let inputs = TrajectoryInputs {
            p_k_end: Vector3::new(b.x, b.y, 50.0),
            p_hat: Vector2::zeros(),
            f_bar_next: -100.0,
            a_v: 5.0,
            v_max: 30.0,
            gamma,
            delta,
            prev_velocity: Vector2::new(3.0, -1.0),
        };
        let cmd = solve_velocity(&inputs).unwrap();
        assert_eq!(cmd.branch, VelocityBranch::NoSolutionKeepPrevious);
        assert!(cmd.delta4.unwrap() < 0.0);
        assert_eq!(cmd.u, Vector2::new(3.0, -1.0));
    }

    #[test]
    fn uav_above_estimate_is_degenerate() {
        let inputs = TrajectoryInputs {
            p_k_end: Vector3::new(4.0, -2.0, 50.0),
            p_hat: Vector2::new(4.0, -2.0),
            f_bar_next: 10.0,
            a_v: 5.0,
            v_max: 30.0,
            gamma: 1.0,
            delta: 0.1,
            prev_velocity: Vector2::new(5.0, 0.0),
        };
        assert!(matches!(solve_velocity(&inputs), Err(Error::DegenerateGeometry)));
    }

    #[test]
    fn swap_handles_b2_zero_without_blowup() {
        // b aligned with x: the naive elimination would divide by b2 = 0.
        let inputs = inputs_with(Vector2::new(3.0, 0.0), 6.0, 5.0);
        let cmd = solve_velocity(&inputs).unwrap();
        assert_eq!(cmd.branch, VelocityBranch::TwoRoot);
        assert!(velocity_constraint(&inputs, cmd.u).abs() < 1e-9);
        assert!((cmd.u.norm() - 5.0).abs() < 1e-12);
    }
}
