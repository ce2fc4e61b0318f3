//! Parametric deformation functions ω_x(φ), ω_y(φ) and the bundled shapes.

pub mod expr;

use std::f64::consts::TAU;

use thiserror::Error;

pub use expr::{parse, EvaluationError, Expr, ExprError};

/// Number of phase samples used to check that a deformation is finite.
pub const VALIDATION_GRID: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeformationError {
    #[error("unknown shape preset `{0}`")]
    UnknownPreset(String),
    #[error("in omega_{axis}: {source}")]
    Parse {
        axis: char,
        #[source]
        source: ExprError,
    },
    #[error("deformation is not finite on [0, 2π): {0}")]
    NotFinite(#[from] EvaluationError),
    #[error("distortion factor must be finite, got {0}")]
    BadDistortion(f64),
}

/// Angular-velocity deformation `(ω_x(φ), ω_y(φ), 0)` scaled by `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationSpec {
    pub omega_x: Expr,
    pub omega_y: Expr,
    pub s: f64,
}

impl DeformationSpec {
    /// Parses both expressions and checks they are finite on a
    /// [`VALIDATION_GRID`]-point grid over one period.
    pub fn from_text(omega_x: &str, omega_y: &str, s: f64) -> Result<Self, DeformationError> {
        let omega_x = parse(omega_x).map_err(|source| DeformationError::Parse { axis: 'x', source })?;
        let omega_y = parse(omega_y).map_err(|source| DeformationError::Parse { axis: 'y', source })?;
        let spec = DeformationSpec { omega_x, omega_y, s };
        spec.validate()?;
        Ok(spec)
    }

    /// The undistorted circle.
    pub fn identity() -> Self {
        DeformationSpec { omega_x: Expr::Num(0.0), omega_y: Expr::Num(0.0), s: 0.0 }
    }

    pub fn with_s(mut self, s: f64) -> Result<Self, DeformationError> {
        self.s = s;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), DeformationError> {
        if !self.s.is_finite() {
            return Err(DeformationError::BadDistortion(self.s));
        }
        for k in 0..VALIDATION_GRID {
            let phi = TAU * k as f64 / VALIDATION_GRID as f64;
            self.eval(phi)?;
        }
        Ok(())
    }

    /// `(ω_x(φ), ω_y(φ))` at the configured `s`.
    pub fn eval(&self, phi: f64) -> Result<(f64, f64), EvaluationError> {
        Ok((self.omega_x.eval(phi, self.s)?, self.omega_y.eval(phi, self.s)?))
    }
}

/// A named shape with its suggested nominal angular rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapePreset {
    pub name: &'static str,
    pub description: &'static str,
    pub omega_x: &'static str,
    pub omega_y: &'static str,
    pub s: f64,
    /// Suggested nominal rate (rad/s). Informational only.
    pub omega_zd: f64,
}

impl ShapePreset {
    pub fn spec(&self) -> DeformationSpec {
        DeformationSpec::from_text(self.omega_x, self.omega_y, self.s).expect("bundled shape presets are valid")
    }
}

pub const SHAPE_PRESETS: &[ShapePreset] = &[
    ShapePreset {
        name: "fig1a",
        description: "six-lobed wave with a constant tilt about y",
        omega_x: "s*sin(6*phi)*cos(6*phi)",
        omega_y: "s",
        s: 0.3,
        omega_zd: 0.8,
    },
    ShapePreset {
        name: "fig1b",
        description: "dumbbell-shaped projection in the YZ plane",
        omega_x: "s*sin(phi)*cos(phi)",
        omega_y: "0",
        s: 1.0,
        omega_zd: 2.0,
    },
    ShapePreset {
        name: "fig1c",
        description: "saddle from cos(2φ) about x and cos²φ about y",
        omega_x: "s*cos(2*phi)",
        omega_y: "s*cos(phi)^2",
        s: 0.6,
        omega_zd: 0.5,
    },
    ShapePreset {
        name: "fig1d",
        description: "three-lobed twist with a constant half-s tilt about y",
        omega_x: "s*cos(3*phi)*sin(phi)",
        omega_y: "0.5*s",
        s: 0.9,
        omega_zd: 1.8,
    },
    ShapePreset {
        name: "eq23",
        description: "closed 3D loop used by the swarm scenarios",
        omega_x: "s*(cos(phi)*sin(phi) - sin(phi)^3)",
        omega_y: "s*cos(phi)^2*sin(-phi)",
        s: 0.4,
        omega_zd: 1.5,
    },
];

pub fn shape_preset(name: &str) -> Result<&'static ShapePreset, DeformationError> {
    SHAPE_PRESETS.iter().find(|p| p.name == name).ok_or_else(|| DeformationError::UnknownPreset(name.to_string()))
}

/// Looks up a shape preset and returns its deformation.
pub fn preset(name: &str) -> Result<DeformationSpec, DeformationError> {
    Ok(shape_preset(name)?.spec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn fig1c_expressions() {
        let d = preset("fig1c").unwrap();
        assert_eq!(d.s, 0.6);
        for phi in [0.0f64, 0.4, 1.9, -2.5] {
            let (wx, wy) = d.eval(phi).unwrap();
            assert!((wx - 0.6 * (2.0 * phi).cos()).abs() < 1e-15);
            assert!((wy - 0.6 * phi.cos() * phi.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn eq23_expressions() {
        let d = preset("eq23").unwrap();
        assert_eq!(d.s, 0.4);
        assert_eq!(shape_preset("eq23").unwrap().omega_zd, 1.5);
        let (wx, wy) = d.eval(FRAC_PI_2).unwrap();
        assert!((wx + 0.4).abs() < 1e-15);
        assert!(wy.abs() < 1e-15);
        assert_eq!(d.eval(0.0).unwrap(), (0.0, 0.0));
        for phi in [0.3f64, 1.1, 2.9, -0.7] {
            let (c, s) = (phi.cos(), phi.sin());
            let (wx, wy) = d.eval(phi).unwrap();
            assert!((wx - 0.4 * (c * s - s * s * s)).abs() < 1e-15);
            assert!((wy - 0.4 * c * c * (-phi).sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn caption_metadata() {
        let got: Vec<_> = SHAPE_PRESETS.iter().map(|p| (p.name, p.s, p.omega_zd)).collect();
        assert_eq!(got, vec![("fig1a", 0.3, 0.8), ("fig1b", 1.0, 2.0), ("fig1c", 0.6, 0.5), ("fig1d", 0.9, 1.8), ("eq23", 0.4, 1.5)]);
    }

    #[test]
    fn unknown_preset() {
        assert_eq!(preset("circle"), Err(DeformationError::UnknownPreset("circle".into())));
    }

    #[test]
    fn presets_vanish_at_zero_distortion() {
        for p in SHAPE_PRESETS {
            let d = p.spec().with_s(0.0).unwrap();
            for k in 0..64 {
                assert_eq!(d.eval(k as f64 * 0.1).unwrap(), (0.0, 0.0), "{}", p.name);
            }
        }
    }

    #[test]
    fn presets_finite_on_grid() {
        for p in SHAPE_PRESETS {
            p.spec().validate().unwrap();
        }
    }

    #[test]
    fn rejects_singular_deformation() {
        let err = DeformationSpec::from_text("s/sin(phi)", "0", 1.0).unwrap_err();
        assert!(matches!(err, DeformationError::NotFinite(_)));
        let err = DeformationSpec::from_text("0", "s*tan(phi)", 1.0).unwrap_err();
        assert!(matches!(err, DeformationError::Parse { axis: 'y', .. }));
    }
}
