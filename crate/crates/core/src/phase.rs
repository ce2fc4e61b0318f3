//! Inverse-phase repulsion law on the ring and its Lyapunov function.
//!
//! Each agent speeds up or slows down relative to the nominal rate by
//! `k_φ·(1/φ_ki + 1/φ_ji)`, where `φ_ki = φ_i − φ_k` is the (negative) gap
//! to the leader and `φ_ji = φ_i − φ_j` the (positive) gap to the follower.
//! The terms cancel exactly at uniform spacing.

use std::f64::consts::{PI, TAU};

use thiserror::Error;

pub const DEFAULT_EPS_CLAMP: f64 = 1e-3;
pub const DEFAULT_CAP_FACTOR: f64 = 10.0;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum PhaseError {
    #[error("coincident phases: wrapped difference is exactly zero")]
    CoincidentPhase,
}

/// Own phase plus the phases of the leading and lagging neighbors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseView {
    pub phi_i: f64,
    pub phi_k: f64,
    pub phi_j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseGains {
    /// Repulsion gain k_φ (rad²/s).
    pub k_phi: f64,
    /// Nominal angular rate ω_zd (rad/s).
    pub omega_zd: f64,
    /// Gaps smaller than this are clamped before inversion.
    pub eps_clamp: f64,
    /// Output saturation half-width. `None` means `10·|ω_zd|`.
    pub omega_cap: Option<f64>,
}

impl PhaseGains {
    pub fn new(k_phi: f64, omega_zd: f64) -> Self {
        Self { k_phi, omega_zd, eps_clamp: DEFAULT_EPS_CLAMP, omega_cap: None }
    }

    pub fn cap(&self) -> f64 {
        self.omega_cap.unwrap_or(DEFAULT_CAP_FACTOR * self.omega_zd.abs())
    }
}

/// Wraps an angle onto `(−π, π]`.
pub fn wrap_to_pi(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let r = (theta + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

fn clamp_gap(d: f64, eps: f64) -> Result<f64, PhaseError> {
    if d == 0.0 {
        return Err(PhaseError::CoincidentPhase);
    }
    Ok(if d.abs() < eps { eps.copysign(d) } else { d })
}

/// Commanded angular rate ω_{z,d,i} for one agent.
pub fn phase_rate(view: PhaseView, g: &PhaseGains) -> Result<f64, PhaseError> {
    let ki = clamp_gap(wrap_to_pi(view.phi_i - view.phi_k), g.eps_clamp)?;
    let ji = clamp_gap(wrap_to_pi(view.phi_i - view.phi_j), g.eps_clamp)?;
    let rate = g.omega_zd + g.k_phi * (1.0 / ki + 1.0 / ji);
    let cap = g.cap();
    Ok(rate.clamp(g.omega_zd - cap, g.omega_zd + cap))
}

/// `V = Σᵢ ½(1/e_ji + 1/e_ki)²` over per-agent `(e_ji, e_ki)` pairs.
pub fn lyapunov_value(separations: &[(f64, f64)]) -> Result<f64, PhaseError> {
    separations.iter().try_fold(0.0, |acc, &(e_ji, e_ki)| {
        if e_ji == 0.0 || e_ki == 0.0 {
            return Err(PhaseError::CoincidentPhase);
        }
        let t = 1.0 / e_ji + 1.0 / e_ki;
        Ok(acc + 0.5 * t * t)
    })
}

/// Per-agent `(e_ji, e_ki)` for a ring given as phases in lead order
/// (element `r+1` leads element `r`).
pub fn ring_errors(ring_phases: &[f64]) -> Vec<(f64, f64)> {
    let n = ring_phases.len();
    (0..n)
        .map(|r| {
            let phi = ring_phases[r];
            let lead = ring_phases[(r + 1) % n];
            let lag = ring_phases[(r + n - 1) % n];
            (wrap_to_pi(phi - lag), wrap_to_pi(phi - lead))
        })
        .collect()
}
