//! Rotations, headings and rigid transforms in a right-handed, z-up world.
//!
//! A [`Rotation`] is stored as a 3×3 matrix and converts to axis-angle, unit
//! quaternion and the continuous 6D form (first two matrix columns). The
//! heading of a rotation is the yaw of its root y-axis after the root z-axis
//! has been tilted onto world +z by the minimal rotation; heading zero faces
//! world +y.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Root z-axis closer than this to world −z has no defined heading.
pub const DEGENERATE_HEADING_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec3<S> {
    pub x: S,
    pub y: S,
    pub z: S,
}

impl<S: Real> Vec3<S> {
    #[inline]
    pub fn new(x: S, y: S, z: S) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(S::zero(), S::zero(), S::zero())
    }

    pub fn from_array(a: [S; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [S; 3] {
        [self.x, self.y, self.z]
    }

    pub fn unit_x() -> Self {
        Self::new(S::one(), S::zero(), S::zero())
    }

    pub fn unit_y() -> Self {
        Self::new(S::zero(), S::one(), S::zero())
    }

    pub fn unit_z() -> Self {
        Self::new(S::zero(), S::zero(), S::one())
    }

    #[inline]
    pub fn dot(self, o: Self) -> S {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> S {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> S {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn scale(self, s: S) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn normalized(self) -> Self {
        self.scale(self.norm().recip())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Converts the scalar type (e.g. lifts an `f64` vector into dual numbers).
    pub fn cast<T: Real>(self) -> Vec3<T> {
        Vec3::new(T::c(self.x.re()), T::c(self.y.re()), T::c(self.z.re()))
    }
}

impl<S: Real> Add for Vec3<S> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<S: Real> AddAssign for Vec3<S> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<S: Real> Sub for Vec3<S> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<S: Real> Neg for Vec3<S> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<S: Real> Index<usize> for Vec3<S> {
    type Output = S;
    fn index(&self, i: usize) -> &S {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// Row-major 3×3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3<S> {
    pub m: [[S; 3]; 3],
}

impl<S: Real> Mat3<S> {
    pub fn identity() -> Self {
        let (o, z) = (S::one(), S::zero());
        Self {
            m: [[o, z, z], [z, o, z], [z, z, o]],
        }
    }

    pub fn from_cols(c0: Vec3<S>, c1: Vec3<S>, c2: Vec3<S>) -> Self {
        Self {
            m: [[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]],
        }
    }

    #[inline]
    pub fn col(&self, j: usize) -> Vec3<S> {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.m;
        Self {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    #[inline]
    pub fn mul_vec(&self, v: Vec3<S>) -> Vec3<S> {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    /// `selfᵀ · v` without forming the transpose.
    #[inline]
    pub fn tr_mul_vec(&self, v: Vec3<S>) -> Vec3<S> {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
            m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
            m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z,
        )
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let mut m = [[S::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j] + self.m[i][2] * o.m[2][j];
            }
        }
        Self { m }
    }

    /// `selfᵀ · o` without forming the transpose.
    pub fn tr_mul_mat(&self, o: &Self) -> Self {
        let mut m = [[S::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.m[0][i] * o.m[0][j] + self.m[1][i] * o.m[1][j] + self.m[2][i] * o.m[2][j];
            }
        }
        Self { m }
    }

    pub fn trace(&self) -> S {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn determinant(&self) -> S {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn cast<T: Real>(&self) -> Mat3<T> {
        let mut m = [[T::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = T::c(self.m[i][j].re());
            }
        }
        Mat3 { m }
    }
}

/// Quaternion `w + xi + yj + zk`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quat<S> {
    pub w: S,
    pub x: S,
    pub y: S,
    pub z: S,
}

impl<S: Real> Quat<S> {
    pub fn new(w: S, x: S, y: S, z: S) -> Self {
        Self { w, x, y, z }
    }

    pub fn identity() -> Self {
        Self::new(S::one(), S::zero(), S::zero(), S::zero())
    }

    pub fn from_array(a: [S; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [S; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn dot(self, o: Self) -> S {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> S {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Self {
        let s = self.norm().recip();
        Self::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn negated(self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }

    /// Representative with `w ≥ 0` (ties broken on the first nonzero of x, y, z).
    pub fn canonical(self) -> Self {
        let first = [self.w, self.x, self.y, self.z]
            .into_iter()
            .find(|c| !c.is_zero())
            .unwrap_or(S::one());
        if first < S::zero() {
            self.negated()
        } else {
            self
        }
    }

    pub fn mul(self, o: Self) -> Self {
        Self::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }

    /// Rotation matrix of `self / |self|`.
    pub fn to_matrix(self) -> Mat3<S> {
        let q = self.normalized();
        let two = S::c(2.0);
        let (w, x, y, z) = (q.w, q.x, q.y, q.z);
        let o = S::one();
        Mat3 {
            m: [
                [o - two * (y * y + z * z), two * (x * y - w * z), two * (x * z + w * y)],
                [two * (x * y + w * z), o - two * (x * x + z * z), two * (y * z - w * x)],
                [two * (x * z - w * y), two * (y * z + w * x), o - two * (x * x + y * y)],
            ],
        }
    }

    /// Spherical interpolation along the shorter arc (`q1` sign-aligned to `q0`).
    pub fn slerp(self, q1: Self, t: S) -> Self {
        let mut q1 = q1;
        let mut d = self.dot(q1);
        if d < S::zero() {
            q1 = q1.negated();
            d = -d;
        }
        let lerp = |a: S, b: S, s0: S, s1: S| a * s0 + b * s1;
        let (s0, s1) = if d > S::c(1.0 - 1e-12) {
            (S::one() - t, t)
        } else {
            let theta = d.min(S::one()).acos();
            let sin = theta.sin();
            (((S::one() - t) * theta).sin() / sin, (t * theta).sin() / sin)
        };
        Self::new(
            lerp(self.w, q1.w, s0, s1),
            lerp(self.x, q1.x, s0, s1),
            lerp(self.y, q1.y, s0, s1),
            lerp(self.z, q1.z, s0, s1),
        )
        .normalized()
    }
}

/// Element of SO(3), stored as an orthonormal matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation<S> {
    m: Mat3<S>,
}

impl<S: Real> Rotation<S> {
    pub fn identity() -> Self {
        Self { m: Mat3::identity() }
    }

    /// Wraps a matrix assumed to be a rotation.
    pub fn from_matrix_unchecked(m: Mat3<S>) -> Self {
        Self { m }
    }

    pub fn matrix(&self) -> &Mat3<S> {
        &self.m
    }

    pub fn rz(angle: S) -> Self {
        let (s, c) = angle.sin_cos();
        let (o, z) = (S::one(), S::zero());
        Self {
            m: Mat3 {
                m: [[c, -s, z], [s, c, z], [z, z, o]],
            },
        }
    }

    pub fn rx(angle: S) -> Self {
        let (s, c) = angle.sin_cos();
        let (o, z) = (S::one(), S::zero());
        Self {
            m: Mat3 {
                m: [[o, z, z], [z, c, -s], [z, s, c]],
            },
        }
    }

    pub fn ry(angle: S) -> Self {
        let (s, c) = angle.sin_cos();
        let (o, z) = (S::one(), S::zero());
        Self {
            m: Mat3 {
                m: [[c, z, s], [z, o, z], [-s, z, c]],
            },
        }
    }

    /// Exponential map of an axis-angle vector (radians).
    pub fn from_axis_angle(w: Vec3<S>) -> Self {
        let theta2 = w.norm_squared();
        let k = skew(w);
        let k2 = k.mul_mat(&k);
        let (a, b) = if theta2 < S::c(1e-16) {
            (S::one() - theta2 / S::c(6.0), S::c(0.5) - theta2 / S::c(24.0))
        } else {
            let theta = theta2.sqrt();
            (theta.sin() / theta, (S::one() - theta.cos()) / theta2)
        };
        let mut m = Mat3::identity();
        for i in 0..3 {
            for j in 0..3 {
                m.m[i][j] = m.m[i][j] + a * k.m[i][j] + b * k2.m[i][j];
            }
        }
        Self { m }
    }

    /// Logarithm map; the returned angle lies in [0, π].
    pub fn to_axis_angle(&self) -> Vec3<S> {
        let q = self.to_quaternion();
        let v = Vec3::new(q.x, q.y, q.z);
        let s = v.norm();
        if s < S::c(1e-12) {
            return v.scale(S::c(2.0));
        }
        let angle = S::c(2.0) * s.atan2(q.w);
        v.scale(angle / s)
    }

    /// Rotation of the unit quaternion `q / |q|`.
    pub fn from_quaternion(q: Quat<S>) -> Self {
        Self { m: q.to_matrix() }
    }

    /// Unit quaternion with `w ≥ 0` (Shepperd's method).
    pub fn to_quaternion(&self) -> Quat<S> {
        let m = &self.m.m;
        let tr = self.m.trace();
        let one = S::one();
        let quarter = S::c(0.25);
        let two = S::c(2.0);
        let q = if tr > m[0][0] && tr > m[1][1] && tr > m[2][2] {
            let s = (tr + one).sqrt() * two;
            Quat::new(quarter * s, (m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s, (m[1][0] - m[0][1]) / s)
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (one + m[0][0] - m[1][1] - m[2][2]).sqrt() * two;
            Quat::new((m[2][1] - m[1][2]) / s, quarter * s, (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s)
        } else if m[1][1] > m[2][2] {
            let s = (one + m[1][1] - m[0][0] - m[2][2]).sqrt() * two;
            Quat::new((m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s, quarter * s, (m[1][2] + m[2][1]) / s)
        } else {
            let s = (one + m[2][2] - m[0][0] - m[1][1]).sqrt() * two;
            Quat::new((m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s, (m[1][2] + m[2][1]) / s, quarter * s)
        };
        q.normalized().canonical()
    }

    /// First two matrix columns, column-major: `(c0x, c0y, c0z, c1x, c1y, c1z)`.
    pub fn to_6d(&self) -> [S; 6] {
        let (a, b) = (self.m.col(0), self.m.col(1));
        [a.x, a.y, a.z, b.x, b.y, b.z]
    }

    /// Gram-Schmidt on the two 3-vector halves, completed by a cross product.
    pub fn from_6d(v: [S; 6]) -> Result<Self> {
        let a = Vec3::new(v[0], v[1], v[2]);
        let b = Vec3::new(v[3], v[4], v[5]);
        let tol = S::c(1e-8);
        let na = a.norm();
        if !(na >= tol) {
            return Err(Error::DegenerateSixD(na.re()));
        }
        let b1 = a.scale(na.recip());
        let b2 = b - b1.scale(b1.dot(b));
        let nb = b2.norm();
        if !(nb >= tol) {
            return Err(Error::DegenerateSixD(nb.re()));
        }
        let b2 = b2.scale(nb.recip());
        Ok(Self {
            m: Mat3::from_cols(b1, b2, b1.cross(b2)),
        })
    }

    /// [`Rotation::from_6d`] without degeneracy checks, for use inside
    /// differentiated code where inputs are known to be well-conditioned.
    pub fn from_6d_unchecked(v: [S; 6]) -> Self {
        let a = Vec3::new(v[0], v[1], v[2]);
        let b = Vec3::new(v[3], v[4], v[5]);
        let b1 = a.normalized();
        let b2 = (b - b1.scale(b1.dot(b))).normalized();
        Self {
            m: Mat3::from_cols(b1, b2, b1.cross(b2)),
        }
    }

    pub fn inverse(&self) -> Self {
        Self { m: self.m.transpose() }
    }

    #[inline]
    pub fn apply(&self, v: Vec3<S>) -> Vec3<S> {
        self.m.mul_vec(v)
    }

    #[inline]
    pub fn apply_inverse(&self, v: Vec3<S>) -> Vec3<S> {
        self.m.tr_mul_vec(v)
    }

    pub fn compose(&self, o: &Self) -> Self {
        Self {
            m: self.m.mul_mat(&o.m),
        }
    }

    /// `self⁻¹ ∘ o`.
    pub fn between(&self, o: &Self) -> Self {
        Self {
            m: self.m.tr_mul_mat(&o.m),
        }
    }

    /// Rotation angle in [0, π].
    pub fn angle(&self) -> S {
        let (s2, c) = sin2_cos(&self.m);
        s2.sqrt().atan2(c)
    }

    /// Squared rotation angle, smooth at zero (series below 1e-6 rad).
    pub fn angle_squared(&self) -> S {
        let (s2, c) = sin2_cos(&self.m);
        if s2 < S::c(1e-12) && c > S::zero() {
            // asin(s)^2 = s^2 + s^4 / 3 + O(s^6)
            s2 + s2 * s2 / S::c(3.0)
        } else {
            let a = s2.sqrt().atan2(c);
            a * a
        }
    }

    pub fn cast<T: Real>(&self) -> Rotation<T> {
        Rotation { m: self.m.cast() }
    }

    pub fn is_finite(&self) -> bool {
        self.m.m.iter().flatten().all(|v| v.is_finite())
    }
}

impl<S: Real> Mul for Rotation<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.compose(&o)
    }
}

/// `(sin²θ, cos θ)` of a rotation matrix from its skew part and trace.
fn sin2_cos<S: Real>(m: &Mat3<S>) -> (S, S) {
    let half = S::c(0.5);
    let v = Vec3::new(
        (m.m[2][1] - m.m[1][2]) * half,
        (m.m[0][2] - m.m[2][0]) * half,
        (m.m[1][0] - m.m[0][1]) * half,
    );
    (v.norm_squared(), (m.trace() - S::one()) * half)
}

fn skew<S: Real>(w: Vec3<S>) -> Mat3<S> {
    let z = S::zero();
    Mat3 {
        m: [[z, -w.z, w.y], [w.z, z, -w.x], [-w.y, w.x, z]],
    }
}

/// Geodesic distance `angle(r1⁻¹ ∘ r2)` in [0, π].
pub fn geodesic<S: Real>(r1: &Rotation<S>, r2: &Rotation<S>) -> S {
    r1.between(r2).angle()
}

/// Wraps an angle to (−π, π].
pub fn wrap_angle<S: Real>(a: S) -> S {
    let pi = S::c(std::f64::consts::PI);
    let two_pi = pi + pi;
    let mut r = a - two_pi * ((a + pi) / two_pi).floor();
    if r <= -pi {
        r = r + two_pi;
    }
    if r > pi {
        r = r - two_pi;
    }
    r
}

/// Heading angle of a root rotation, `None` when the root z-axis points
/// (within [`DEGENERATE_HEADING_TOL`]) straight down.
pub fn heading_of<S: Real>(rot: &Rotation<S>) -> Option<S> {
    let root_z = rot.m.col(2);
    let angle = root_z.z.max(-S::one()).min(S::one()).acos();
    if S::c(std::f64::consts::PI) - angle < S::c(DEGENERATE_HEADING_TOL) {
        return None;
    }
    // Minimal rotation about axis root_z × world_z by `angle`.
    let axis = root_z.cross(Vec3::unit_z());
    let y = rot.m.col(1);
    let aligned_y = if axis.norm_squared() < S::c(1e-30) {
        y
    } else {
        Rotation::from_axis_angle(axis.normalized().scale(angle)).apply(y)
    };
    // h = Rz(phi) * (0, 1, 0) = (-sin phi, cos phi, 0)
    Some(wrap_angle((-aligned_y.x).atan2(aligned_y.y)))
}

/// Heading with the isolated-query fallback of zero for degenerate rotations.
pub fn heading_or_zero<S: Real>(rot: &Rotation<S>) -> S {
    heading_of(rot).unwrap_or_else(S::zero)
}

/// Horizontal facing direction `Rz(phi)·(0,1,0)`.
pub fn heading_vector<S: Real>(phi: S) -> Vec3<S> {
    Vec3::new(-phi.sin(), phi.cos(), S::zero())
}

/// Quantities that can be expressed in (and restored from) heading coordinates.
pub trait HeadingFrame<S: Real>: Sized {
    /// Rotates by `Rz(−phi)`.
    fn to_heading(&self, phi: S) -> Self;
    /// Rotates by `Rz(phi)`; exact inverse of [`HeadingFrame::to_heading`].
    fn from_heading(&self, phi: S) -> Self;
}

impl<S: Real> HeadingFrame<S> for Vec3<S> {
    fn to_heading(&self, phi: S) -> Self {
        let [x, y] = rotate2(-phi, [self.x, self.y]);
        Vec3::new(x, y, self.z)
    }
    fn from_heading(&self, phi: S) -> Self {
        let [x, y] = rotate2(phi, [self.x, self.y]);
        Vec3::new(x, y, self.z)
    }
}

impl<S: Real> HeadingFrame<S> for [S; 2] {
    fn to_heading(&self, phi: S) -> Self {
        rotate2(-phi, *self)
    }
    fn from_heading(&self, phi: S) -> Self {
        rotate2(phi, *self)
    }
}

impl<S: Real> HeadingFrame<S> for Rotation<S> {
    fn to_heading(&self, phi: S) -> Self {
        Rotation::rz(-phi).compose(self)
    }
    fn from_heading(&self, phi: S) -> Self {
        Rotation::rz(phi).compose(self)
    }
}

#[inline]
pub fn rotate2<S: Real>(phi: S, v: [S; 2]) -> [S; 2] {
    let (s, c) = phi.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Rigid transform (SE(3)): `p ↦ R·p + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform<S> {
    pub rotation: Rotation<S>,
    pub translation: Vec3<S>,
}

impl<S: Real> Transform<S> {
    pub fn new(rotation: Rotation<S>, translation: Vec3<S>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Rotation::identity(), Vec3::zero())
    }

    #[inline]
    pub fn apply(&self, p: Vec3<S>) -> Vec3<S> {
        self.rotation.apply(p) + self.translation
    }

    /// `self⁻¹ · p`.
    #[inline]
    pub fn apply_inverse(&self, p: Vec3<S>) -> Vec3<S> {
        self.rotation.apply_inverse(p - self.translation)
    }

    /// `self ∘ o`.
    pub fn compose(&self, o: &Self) -> Self {
        Self::new(self.rotation.compose(&o.rotation), self.apply(o.translation))
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.inverse();
        Self::new(r, -r.apply(self.translation))
    }

    pub fn to_matrix4(&self) -> [[S; 4]; 4] {
        let r = &self.rotation.matrix().m;
        let t = self.translation;
        let (z, o) = (S::zero(), S::one());
        [
            [r[0][0], r[0][1], r[0][2], t.x],
            [r[1][0], r[1][1], r[1][2], t.y],
            [r[2][0], r[2][1], r[2][2], t.z],
            [z, z, z, o],
        ]
    }

    pub fn cast<T: Real>(&self) -> Transform<T> {
        Transform::new(self.rotation.cast(), self.translation.cast())
    }
}

impl<S: Real> Mul for Transform<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.compose(&o)
    }
}
