//! Position-only reference generation and the PD tracking law.

use crate::deformation::EvaluationError;
use crate::embedding::{circle_point, to_world, EmbeddingConfig};
use crate::so3::{exp_so3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionGains {
    /// Proportional gain (1/s²).
    pub k_x: f64,
    /// Derivative gain (1/s).
    pub k_v: f64,
}

impl Default for PositionGains {
    fn default() -> Self {
        Self { k_x: 6.0, k_v: 6.5 * std::f64::consts::SQRT_2 }
    }
}

pub fn desired_on_circle(phi: f64, r_d: f64) -> Vec3 {
    circle_point(phi, r_d)
}

/// Rotates the circle point at `phi` by `exp((0, 0, ω·dt)^)` and reads the
/// new phase back with `atan2`. Result is in `(−π, π]`.
pub fn advance_phase(phi: f64, omega_zdi: f64, dt: f64, r_d: f64) -> f64 {
    let angle = omega_zdi * dt;
    if angle == 0.0 {
        return phi;
    }
    let p = exp_so3(Vec3::new(0.0, 0.0, angle)).apply(desired_on_circle(phi, r_d));
    let next = p.y.atan2(p.x);
    if next == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        next
    }
}

/// Advances the phase and maps the new circle point into the world, with
/// the deformation evaluated at the advanced phase.
pub fn next_target(phi: f64, omega_zdi: f64, cfg: &EmbeddingConfig, dt: f64) -> Result<(Vec3, f64), EvaluationError> {
    let phi_next = advance_phase(phi, omega_zdi, dt, cfg.r_d);
    let x_hat = desired_on_circle(phi_next, cfg.r_d);
    Ok((to_world(x_hat, phi_next, cfg)?, phi_next))
}

/// `u = k_x·e + k_v·(e − e_prev)/dt`.
pub fn pd_accel(e_x: Vec3, e_x_prev: Vec3, dt: f64, g: &PositionGains) -> Vec3 {
    e_x * g.k_x + (e_x - e_x_prev) * (g.k_v / dt)
}
