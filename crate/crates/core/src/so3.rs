//! Small 3D linear-algebra kernel and the SO(3) exponential map.
//!
//! Everything here is `Copy` and pure. [`Vec3`] and [`Mat3`] carry raw
//! numbers; [`Rotation`] is a `Mat3` known to be orthogonal with unit
//! determinant, produced by [`exp_so3`] or by composing other rotations.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use thiserror::Error;

/// Below this rotation angle the Rodrigues coefficients switch to their
/// second-order Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-6;

/// Symmetric-part tolerance accepted by [`vee`].
pub const SKEW_TOLERANCE: f64 = 1e-9;

/// Orthogonality/determinant tolerance for [`Rotation::try_from_matrix`].
pub const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum So3Error {
    #[error("matrix is not skew-symmetric (max |m + mᵀ|/2 = {asymmetry:e})")]
    NotSkew { asymmetry: f64 },
    #[error("matrix is not a rotation (‖mᵀm − I‖_F = {orthogonality:e}, det = {det})")]
    NotRotation { orthogonality: f64, det: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3 {
    pub rows: [[f64; 3]; 3],
}

impl Mat3 {
    pub const ZERO: Mat3 = Mat3 { rows: [[0.0; 3]; 3] };
    pub const IDENTITY: Mat3 = Mat3 { rows: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] };

    pub const fn from_rows(rows: [[f64; 3]; 3]) -> Self {
        Self { rows }
    }

    pub fn transpose(&self) -> Mat3 {
        let r = &self.rows;
        Mat3::from_rows([[r[0][0], r[1][0], r[2][0]], [r[0][1], r[1][1], r[2][1]], [r[0][2], r[1][2], r[2][2]]])
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let r = &self.rows;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    pub fn matmul(&self, o: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.rows[i][k] * o.rows[k][j]).sum();
            }
        }
        Mat3::from_rows(out)
    }

    pub fn scale(&self, k: f64) -> Mat3 {
        let mut out = self.rows;
        out.iter_mut().flatten().for_each(|c| *c *= k);
        Mat3::from_rows(out)
    }

    pub fn add(&self, o: &Mat3) -> Mat3 {
        let mut out = self.rows;
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell += o.rows[i][j];
            }
        }
        Mat3::from_rows(out)
    }

    pub fn sub(&self, o: &Mat3) -> Mat3 {
        self.add(&o.scale(-1.0))
    }

    pub fn frobenius(&self) -> f64 {
        self.rows.iter().flatten().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn det(&self) -> f64 {
        let r = &self.rows;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().flatten().all(|c| c.is_finite())
    }
}

impl Index<(usize, usize)> for Mat3 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.rows[i][j]
    }
}

/// Maps a 3-vector to its skew-symmetric cross-product matrix.
pub fn hat(w: Vec3) -> Mat3 {
    Mat3::from_rows([[0.0, -w.z, w.y], [w.z, 0.0, -w.x], [-w.y, w.x, 0.0]])
}

/// Inverse of [`hat`]. The input must be skew-symmetric within
/// [`SKEW_TOLERANCE`]; the returned vector is read from the skew part.
pub fn vee(m: &Mat3) -> Result<Vec3, So3Error> {
    let sym = m.add(&m.transpose()).scale(0.5);
    let asymmetry = sym.rows.iter().flatten().fold(0.0_f64, |a, c| a.max(c.abs()));
    if asymmetry > SKEW_TOLERANCE || !asymmetry.is_finite() {
        return Err(So3Error::NotSkew { asymmetry });
    }
    // Exactly skew input reads back bitwise; otherwise average the pairs.
    if asymmetry == 0.0 {
        return Ok(Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]));
    }
    Ok(Vec3::new(0.5 * (m[(2, 1)] - m[(1, 2)]), 0.5 * (m[(0, 2)] - m[(2, 0)]), 0.5 * (m[(1, 0)] - m[(0, 1)])))
}

/// A proper rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    m: Mat3,
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation { m: Mat3::IDENTITY };

    pub fn try_from_matrix(m: Mat3) -> Result<Rotation, So3Error> {
        let r = Rotation { m };
        let orthogonality = r.orthogonality_error();
        let det = m.det();
        if orthogonality < ROTATION_TOLERANCE && (det - 1.0).abs() < ROTATION_TOLERANCE {
            Ok(r)
        } else {
            Err(So3Error::NotRotation { orthogonality, det })
        }
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.m
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        self.m.mul_vec(v)
    }

    pub fn transpose(&self) -> Rotation {
        Rotation { m: self.m.transpose() }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation { m: self.m.matmul(&other.m) }
    }

    /// ‖RᵀR − I‖_F
    pub fn orthogonality_error(&self) -> f64 {
        self.m.transpose().matmul(&self.m).sub(&Mat3::IDENTITY).frobenius()
    }

    pub fn det(&self) -> f64 {
        self.m.det()
    }
}

/// Free-function form of [`Rotation::apply`].
pub fn apply(r: &Rotation, v: Vec3) -> Vec3 {
    r.apply(v)
}

/// Free-function form of [`Rotation::transpose`].
pub fn transpose(r: &Rotation) -> Rotation {
    r.transpose()
}

/// Exponential map so(3) → SO(3) via the Rodrigues formula
/// `R = I + sin θ/θ · Ω + (1 − cos θ)/θ² · Ω²` with `θ = ‖w‖`, `Ω = ŵ`.
pub fn exp_so3(w: Vec3) -> Rotation {
    let theta2 = w.dot(w);
    let theta = theta2.sqrt();
    let (a, b) =
        if theta < SMALL_ANGLE { (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0) } else { (theta.sin() / theta, (1.0 - theta.cos()) / theta2) };
    let omega = hat(w);
    let omega2 = omega.matmul(&omega);
    Rotation { m: Mat3::IDENTITY.add(&omega.scale(a)).add(&omega2.scale(b)) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    /// Truncated power series Σ Ωᵏ/k!, independent of the closed form.
    fn series_exp(w: Vec3, terms: usize) -> Mat3 {
        let omega = hat(w);
        let mut sum = Mat3::IDENTITY;
        let mut term = Mat3::IDENTITY;
        for k in 1..terms {
            term = term.matmul(&omega).scale(1.0 / k as f64);
            sum = sum.add(&term);
        }
        sum
    }

    #[test]
    fn hat_layout() {
        assert_eq!(hat(Vec3::ZERO), Mat3::ZERO);
        let m = hat(Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(m.rows, [[0.0, -3.0, 2.0], [3.0, 0.0, -1.0], [-2.0, 1.0, 0.0]]);
    }

    #[test]
    fn vee_inverts_hat() {
        assert_eq!(vee(&Mat3::ZERO).unwrap(), Vec3::ZERO);
        let w = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(vee(&hat(w)).unwrap(), w);
    }

    #[test]
    fn vee_rejects_symmetric_perturbation() {
        let mut m = hat(Vec3::new(1.0, 2.0, 3.0));
        m.rows[0][1] += 1e-3;
        m.rows[1][0] += 1e-3;
        assert!(matches!(vee(&m), Err(So3Error::NotSkew { .. })));
    }

    #[test]
    fn exp_special_cases() {
        assert_eq!(exp_so3(Vec3::ZERO), Rotation::IDENTITY);
        let r = exp_so3(Vec3::new(0.0, 0.0, FRAC_PI_2));
        let v = r.apply(Vec3::new(1.0, 0.0, 0.0));
        assert!((v - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        let r = exp_so3(Vec3::new(0.0, 0.0, PI));
        let v = r.apply(Vec3::new(1.0, 0.0, 0.0));
        assert!((v - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
        assert_eq!(Rotation::IDENTITY.apply(Vec3::new(1.0, 2.0, 3.0)), Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn exp_matches_series_near_taylor_switch() {
        for theta in [1e-9, 5e-7, 9.99e-7, 1e-6, 1.01e-6, 1e-4, 1e-2] {
            let w = Vec3::new(0.3, -0.5, 0.8) * (theta / 0.989_949_493_661_166_5);
            let d = exp_so3(w).matrix().sub(&series_exp(w, 30)).frobenius();
            assert!(d < 1e-15, "theta={theta} d={d}");
        }
    }

    #[test]
    fn rotation_rejects_non_orthogonal() {
        let m = Mat3::IDENTITY.scale(1.1);
        assert!(Rotation::try_from_matrix(m).is_err());
        let reflect = Mat3::from_rows([[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(Rotation::try_from_matrix(reflect).is_err());
        assert!(Rotation::try_from_matrix(*exp_so3(Vec3::new(0.1, 0.2, 0.3)).matrix()).is_ok());
    }

    #[test]
    fn no_drift_over_long_composition() {
        let step = exp_so3(Vec3::new(0.013, -0.007, 0.021));
        let mut r = Rotation::IDENTITY;
        for _ in 0..100_000 {
            r = r.compose(&step);
        }
        assert!(r.orthogonality_error() < 1e-9, "{}", r.orthogonality_error());
        assert!((r.det() - 1.0).abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vec3(bound: f64) -> impl Strategy<Value = Vec3> {
            (-bound..bound, -bound..bound, -bound..bound).prop_map(|(x, y, z)| Vec3::new(x, y, z))
        }

        proptest! {
            #[test]
            fn vee_hat_bitwise(w in vec3(1e3)) {
                prop_assert_eq!(vee(&hat(w)).unwrap(), w);
            }

            #[test]
            fn exp_is_rotation(w in vec3(50.0)) {
                let r = exp_so3(w);
                prop_assert!(r.orthogonality_error() < 1e-9);
                prop_assert!((r.det() - 1.0).abs() < 1e-9);
            }

            #[test]
            fn exp_matches_series(w in vec3(1.8).prop_filter("‖w‖ ≤ π", |w| w.norm() <= PI)) {
                let d = exp_so3(w).matrix().sub(&series_exp(w, 30)).frobenius();
                prop_assert!(d < 1e-10, "d = {}", d);
            }

            #[test]
            fn transpose_undoes_apply(w in vec3(10.0), v in vec3(100.0)) {
                let r = exp_so3(w);
                let back = r.transpose().apply(r.apply(v));
                prop_assert!((back - v).norm() < 1e-12);
            }

            #[test]
            fn exp_is_lipschitz(w in vec3(5.0), dw in vec3(1e-4 / 3f64.sqrt())) {
                let d = exp_so3(w + dw).matrix().sub(exp_so3(w).matrix()).frobenius();
                prop_assert!(d <= 2.0 * dw.norm() + 1e-15);
            }
        }
    }
}
