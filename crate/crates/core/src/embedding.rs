//! Maps between the planar circular embedding and the deformed world curve.
//!
//! A point `x̂` in the embedding at phase `φ` sits in the world at
//! `center + R(φ)·x̂`, where `R(φ) = exp((ω_x(φ), ω_y(φ), 0)^)`. For a fixed
//! phase the map is a rigid motion, so [`to_embedding`] inverts it exactly.

use thiserror::Error;

use crate::deformation::{DeformationSpec, EvaluationError};
use crate::so3::{exp_so3, Rotation, Vec3};

/// Planar radius below which a phase is considered undefined.
pub const DEGENERATE_RADIUS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("point ({0}, {1}) lies on the embedding axis; phase undefined")]
    DegeneratePhase(f64, f64),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error("invalid embedding config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingConfig {
    /// Desired circle radius (m).
    pub r_d: f64,
    /// Nominal common angular rate (rad/s).
    pub omega_zd: f64,
    /// World position of the embedding origin; `center.z` is the height.
    pub center: Vec3,
    pub deformation: DeformationSpec,
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if !(self.r_d > 0.0 && self.r_d.is_finite()) {
            return Err(EmbeddingError::InvalidConfig(format!("r_d must be > 0, got {}", self.r_d)));
        }
        if !self.omega_zd.is_finite() {
            return Err(EmbeddingError::InvalidConfig("omega_zd must be finite".into()));
        }
        if !self.center.is_finite() {
            return Err(EmbeddingError::InvalidConfig("center must be finite".into()));
        }
        Ok(())
    }
}

pub fn circle_point(phi: f64, r: f64) -> Vec3 {
    Vec3::new(r * phi.cos(), r * phi.sin(), 0.0)
}

pub fn deform_rotation(phi: f64, d: &DeformationSpec) -> Result<Rotation, EvaluationError> {
    let (wx, wy) = d.eval(phi)?;
    Ok(exp_so3(Vec3::new(wx, wy, 0.0)))
}

pub fn to_world(x_hat: Vec3, phi: f64, cfg: &EmbeddingConfig) -> Result<Vec3, EvaluationError> {
    Ok(cfg.center + deform_rotation(phi, &cfg.deformation)?.apply(x_hat))
}

pub fn to_embedding(x: Vec3, phi: f64, cfg: &EmbeddingConfig) -> Result<Vec3, EvaluationError> {
    Ok(deform_rotation(phi, &cfg.deformation)?.transpose().apply(x - cfg.center))
}

/// Phase of an embedding point, in `(−π, π]`.
pub fn phase_of(x_hat: Vec3) -> Result<f64, EmbeddingError> {
    if x_hat.x.hypot(x_hat.y) < DEGENERATE_RADIUS {
        return Err(EmbeddingError::DegeneratePhase(x_hat.x, x_hat.y));
    }
    let phi = x_hat.y.atan2(x_hat.x);
    // atan2 returns −π for (−x, −0.0); fold it onto +π.
    Ok(if phi == -std::f64::consts::PI { std::f64::consts::PI } else { phi })
}

/// Samples the analytic deformed curve at `samples` phases over `[0, 2π)`.
pub fn sample_curve(cfg: &EmbeddingConfig, samples: usize) -> Result<Vec<(f64, Vec3)>, EvaluationError> {
    (0..samples)
        .map(|k| {
            let phi = std::f64::consts::TAU * k as f64 / samples as f64;
            Ok((phi, to_world(circle_point(phi, cfg.r_d), phi, cfg)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deformation::{preset, SHAPE_PRESETS};
    use crate::so3::{hat, Mat3};
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn cfg(deformation: DeformationSpec, r_d: f64, h: f64) -> EmbeddingConfig {
        EmbeddingConfig { r_d, omega_zd: 1.5, center: Vec3::new(0.0, 0.0, h), deformation }
    }

    fn series_exp(w: Vec3) -> Mat3 {
        let omega = hat(w);
        let (mut sum, mut term) = (Mat3::IDENTITY, Mat3::IDENTITY);
        for k in 1..30 {
            term = term.matmul(&omega).scale(1.0 / k as f64);
            sum = sum.add(&term);
        }
        sum
    }

    #[test]
    fn circle_points() {
        assert_eq!(circle_point(0.0, 10.0), Vec3::new(10.0, 0.0, 0.0));
        assert!((circle_point(FRAC_PI_2, 1.0) - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
        assert!((circle_point(TAU, 3.0) - Vec3::new(3.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn undistorted_rotation_is_identity() {
        let d = preset("eq23").unwrap().with_s(0.0).unwrap();
        assert_eq!(deform_rotation(1.3, &d).unwrap(), Rotation::IDENTITY);
        let d = preset("eq23").unwrap();
        assert_eq!(deform_rotation(0.0, &d).unwrap(), Rotation::IDENTITY);
    }

    #[test]
    fn eq23_quarter_turn_matches_series() {
        let d = preset("eq23").unwrap();
        // ω_x(π/2) = −0.4, ω_y(π/2) = 0 (cos π/2 vanishes up to rounding).
        let (wx, wy) = d.eval(FRAC_PI_2).unwrap();
        let r = deform_rotation(FRAC_PI_2, &d).unwrap();
        let diff = r.matrix().sub(&series_exp(Vec3::new(wx, wy, 0.0))).frobenius();
        assert!(diff < 1e-10);
        let oracle = series_exp(Vec3::new(-0.4, 0.0, 0.0));
        assert!(r.matrix().sub(&oracle).frobenius() < 1e-10);
    }

    #[test]
    fn undistorted_world_point() {
        let c = cfg(DeformationSpec::identity(), 4.0, 10.0);
        assert_eq!(to_world(Vec3::new(4.0, 0.0, 0.0), 0.0, &c).unwrap(), Vec3::new(4.0, 0.0, 10.0));
        assert_eq!(to_embedding(Vec3::new(4.0, 0.0, 10.0), 0.0, &c).unwrap(), Vec3::new(4.0, 0.0, 0.0));
    }

    #[test]
    fn fig1d_recovers_generating_point() {
        let c = cfg(preset("fig1d").unwrap(), 2.0, 1.0);
        for k in 0..200 {
            let phi = -PI + k as f64 * 0.0314;
            let x_hat = Vec3::new(2.0 * phi.cos() + 0.1, 2.0 * phi.sin() - 0.2, 0.05 * k as f64);
            let x = to_world(x_hat, phi, &c).unwrap();
            assert!((to_embedding(x, phi, &c).unwrap() - x_hat).norm() < 1e-12);
        }
    }

    #[test]
    fn eq23_height_range() {
        let c = cfg(preset("eq23").unwrap(), 10.0, 10.0);
        let pts = sample_curve(&c, 4096).unwrap();
        let zmin = pts.iter().map(|p| p.1.z).fold(f64::INFINITY, f64::min);
        let zmax = pts.iter().map(|p| p.1.z).fold(f64::NEG_INFINITY, f64::max);
        // Reported as "approximately 5 m to 11 m"; the analytic curve
        // spans about [5.64, 11.92].
        assert!((zmin - 5.0).abs() < 1.0, "zmin={zmin}");
        assert!((zmax - 11.0).abs() < 1.0, "zmax={zmax}");
        assert!((zmin - 5.6433).abs() < 1e-3 && (zmax - 11.9180).abs() < 1e-3, "{zmin} {zmax}");
    }

    #[test]
    fn closed_curves() {
        for p in SHAPE_PRESETS {
            let c = cfg(p.spec(), 3.0, 1.0);
            let a = to_world(circle_point(0.0, 3.0), 0.0, &c).unwrap();
            let b = to_world(circle_point(TAU, 3.0), TAU, &c).unwrap();
            assert!((a - b).norm() < 1e-9, "{}", p.name);
        }
    }

    #[test]
    fn phases() {
        assert_eq!(phase_of(Vec3::new(1.0, 0.0, 0.0)).unwrap(), 0.0);
        assert_eq!(phase_of(Vec3::new(0.0, -2.0, 0.3)).unwrap(), -FRAC_PI_2);
        assert_eq!(phase_of(Vec3::new(-1.0, -0.0, 0.0)).unwrap(), PI);
        assert!(matches!(phase_of(Vec3::new(0.0, 0.0, 1.0)), Err(EmbeddingError::DegeneratePhase(..))));
    }

    #[test]
    fn bounded_phase_sensitivity() {
        // Empirical Lipschitz constant of φ ↦ to_world(x̂, φ) per preset.
        for p in SHAPE_PRESETS {
            let c = cfg(p.spec(), 1.0, 0.0);
            let x_hat = Vec3::new(0.7, -0.4, 0.2);
            let mut worst = 0.0_f64;
            for k in 0..2000 {
                let phi = TAU * k as f64 / 2000.0;
                let dphi = 1e-4;
                let a = to_world(x_hat, phi, &c).unwrap();
                let b = to_world(x_hat, phi + dphi, &c).unwrap();
                worst = worst.max((b - a).norm() / dphi);
            }
            // ‖dR/dφ‖ ≤ ‖dω/dφ‖ with |dω/dφ| ≤ 6·s·√2 over all presets.
            assert!(worst < 6.0 * 1.5 * x_hat.norm(), "{} C={worst}", p.name);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn roundtrip(
                which in 0usize..5,
                phi in -PI..PI,
                x in -20.0..20.0f64, y in -20.0..20.0f64, z in -20.0..20.0f64,
            ) {
                let c = cfg(SHAPE_PRESETS[which].spec(), 10.0, 10.0);
                let x_hat = Vec3::new(x, y, z);
                let back = to_embedding(to_world(x_hat, phi, &c).unwrap(), phi, &c).unwrap();
                prop_assert!((back - x_hat).norm() < 1e-12);
                let w = Vec3::new(y, z, x) + c.center;
                let fwd = to_world(to_embedding(w, phi, &c).unwrap(), phi, &c).unwrap();
                prop_assert!((fwd - w).norm() < 1e-12);
            }

            #[test]
            fn phase_in_range(x in -5.0..5.0f64, y in -5.0..5.0f64) {
                prop_assume!(x.hypot(y) > 1e-9);
                let phi = phase_of(Vec3::new(x, y, 0.0)).unwrap();
                prop_assert!(phi > -PI && phi <= PI);
            }
        }
    }
}
