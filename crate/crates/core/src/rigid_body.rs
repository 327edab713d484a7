//! Rigid-body kinematics and Newton-Euler dynamics.
//!
//! Quaternions are [`nalgebra::Quaternion`] values interpreted as Hamilton,
//! scalar first (`w, i, j, k`), rotating body vectors into the inertial
//! frame. Body angular velocity enters the kinematics by right
//! multiplication: `q_dot = 1/2 q (x) (0, w)`.

use core::fmt;
use core::ops::{Add, Mul};

use nalgebra::{Matrix3, Quaternion, Vector3};

use crate::params::VehicleParams;

pub type Quat = Quaternion<f64>;

/// Accepted deviation of `|q|` from one for inputs that must be unit.
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuatError {
    Zero,
    NotUnit { norm: f64 },
}

impl fmt::Display for QuatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuatError::Zero => f.write_str("zero quaternion has no direction"),
            QuatError::NotUnit { norm } => write!(f, "quaternion norm {norm} is not 1"),
        }
    }
}

impl core::error::Error for QuatError {}

/// Skew-symmetric matrix with `hat(w) * x == w.cross(x)`.
pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -w.z, w.y, //
        w.z, 0.0, -w.x, //
        -w.y, w.x, 0.0,
    )
}

/// Hamilton product `a (x) b`.
pub fn quat_multiply(a: &Quat, b: &Quat) -> Quat {
    Quat::new(
        a.w * b.w - a.i * b.i - a.j * b.j - a.k * b.k,
        a.w * b.i + a.i * b.w + a.j * b.k - a.k * b.j,
        a.w * b.j - a.i * b.k + a.j * b.w + a.k * b.i,
        a.w * b.k + a.i * b.j - a.j * b.i + a.k * b.w,
    )
}

pub fn quat_conjugate(q: &Quat) -> Quat {
    Quat::new(q.w, -q.i, -q.j, -q.k)
}

fn quat_norm(q: &Quat) -> f64 {
    (q.w * q.w + q.i * q.i + q.j * q.j + q.k * q.k).sqrt()
}

pub fn quat_normalize(q: &Quat) -> Result<Quat, QuatError> {
    let n = quat_norm(q);
    if n == 0.0 || !n.is_finite() {
        return Err(QuatError::Zero);
    }
    if n == 1.0 {
        return Ok(*q);
    }
    Ok(Quat::new(q.w / n, q.i / n, q.j / n, q.k / n))
}

/// Rotation matrix of a unit quaternion.
pub fn quat_to_rotmat(q: &Quat) -> Result<Matrix3<f64>, QuatError> {
    let n = quat_norm(q);
    if (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(QuatError::NotUnit { norm: n });
    }
    Ok(rotation_of(q))
}

/// Rotation matrix of `q / |q|`; tolerates the small norm drift of RK4
/// intermediate stages.
pub(crate) fn rotation_of(q: &Quat) -> Matrix3<f64> {
    let s = 2.0 / (q.w * q.w + q.i * q.i + q.j * q.j + q.k * q.k);
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    Matrix3::new(
        1.0 - s * (y * y + z * z),
        s * (x * y - w * z),
        s * (x * z + w * y),
        s * (x * y + w * z),
        1.0 - s * (x * x + z * z),
        s * (y * z - w * x),
        s * (x * z - w * y),
        s * (y * z + w * x),
        1.0 - s * (x * x + y * y),
    )
}

/// Unit quaternion of a rotation matrix (Shepperd's method), with
/// nonnegative scalar part.
pub fn rotmat_to_quat(r: &Matrix3<f64>) -> Quat {
    let trace = r[(0, 0)] + r[(1, 1)] + r[(2, 2)];
    let q = if trace > r[(0, 0)] && trace > r[(1, 1)] && trace > r[(2, 2)] {
        let s = 2.0 * (1.0 + trace).sqrt();
        Quat::new(
            0.25 * s,
            (r[(2, 1)] - r[(1, 2)]) / s,
            (r[(0, 2)] - r[(2, 0)]) / s,
            (r[(1, 0)] - r[(0, 1)]) / s,
        )
    } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
        let s = 2.0 * (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt();
        Quat::new(
            (r[(2, 1)] - r[(1, 2)]) / s,
            0.25 * s,
            (r[(0, 1)] + r[(1, 0)]) / s,
            (r[(0, 2)] + r[(2, 0)]) / s,
        )
    } else if r[(1, 1)] > r[(2, 2)] {
        let s = 2.0 * (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt();
        Quat::new(
            (r[(0, 2)] - r[(2, 0)]) / s,
            (r[(0, 1)] + r[(1, 0)]) / s,
            0.25 * s,
            (r[(1, 2)] + r[(2, 1)]) / s,
        )
    } else {
        let s = 2.0 * (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt();
        Quat::new(
            (r[(1, 0)] - r[(0, 1)]) / s,
            (r[(0, 2)] + r[(2, 0)]) / s,
            (r[(1, 2)] + r[(2, 1)]) / s,
            0.25 * s,
        )
    };
    let q = quat_normalize(&q).unwrap_or_else(|_| Quat::identity());
    if q.w < 0.0 {
        -q
    } else {
        q
    }
}

/// Position and velocity in the inertial frame, attitude, and body rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub attitude: Quat,
    pub angular_velocity: Vector3<f64>,
}

impl Default for RigidBodyState {
    /// At rest at the origin, level.
    fn default() -> Self {
        Self::at_rest(Vector3::zeros())
    }
}

impl RigidBodyState {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            attitude: Quat::identity(),
            angular_velocity: Vector3::zeros(),
        }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rotation_of(&self.attitude)
    }
}

/// Body-frame force and torque.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

impl Wrench {
    pub fn new(force: Vector3<f64>, torque: Vector3<f64>) -> Self {
        Self { force, torque }
    }

    pub fn zero() -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros())
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.torque.iter()).all(|x| x.is_finite())
    }
}

/// Time derivative of a [`RigidBodyState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    pub attitude_rate: Quat,
    pub angular_acceleration: Vector3<f64>,
}

impl Add for StateDerivative {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            velocity: self.velocity + rhs.velocity,
            acceleration: self.acceleration + rhs.acceleration,
            attitude_rate: self.attitude_rate + rhs.attitude_rate,
            angular_acceleration: self.angular_acceleration + rhs.angular_acceleration,
        }
    }
}

impl Mul<f64> for StateDerivative {
    type Output = Self;

    fn mul(self, h: f64) -> Self {
        Self {
            velocity: self.velocity * h,
            acceleration: self.acceleration * h,
            attitude_rate: self.attitude_rate * h,
            angular_acceleration: self.angular_acceleration * h,
        }
    }
}

impl RigidBodyState {
    /// Euler update `self + h * d` without renormalization.
    fn advanced(&self, d: &StateDerivative, h: f64) -> Self {
        Self {
            position: self.position + d.velocity * h,
            velocity: self.velocity + d.acceleration * h,
            attitude: self.attitude + d.attitude_rate * h,
            angular_velocity: self.angular_velocity + d.angular_acceleration * h,
        }
    }
}

/// Newton-Euler equations:
/// `m v_dot = -m g e3 + R F`, `q_dot = 1/2 q (x) (0, w)`,
/// `J w_dot = -w x J w + tau`.
pub fn state_derivative(s: &RigidBodyState, wr: &Wrench, params: &VehicleParams) -> StateDerivative {
    let r = rotation_of(&s.attitude);
    let gravity = Vector3::new(0.0, 0.0, -params.gravity);
    let acceleration = gravity + r * wr.force / params.mass;

    let w = &s.angular_velocity;
    let jw = params.inertia.component_mul(w);
    let angular_acceleration = (wr.torque - w.cross(&jw)).component_div(&params.inertia);

    let attitude_rate = quat_multiply(&s.attitude, &Quat::from_imag(*w)) * 0.5;

    StateDerivative {
        velocity: s.velocity,
        acceleration,
        attitude_rate,
        angular_acceleration,
    }
}

/// One classical RK4 step with the wrench held over the step. The attitude
/// is renormalized afterwards.
pub fn rk4_step(s: &RigidBodyState, wr: &Wrench, dt: f64, params: &VehicleParams) -> RigidBodyState {
    debug_assert!(dt > 0.0);
    let k1 = state_derivative(s, wr, params);
    let k2 = state_derivative(&s.advanced(&k1, dt / 2.0), wr, params);
    let k3 = state_derivative(&s.advanced(&k2, dt / 2.0), wr, params);
    let k4 = state_derivative(&s.advanced(&k3, dt), wr, params);
    let slope = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (1.0 / 6.0);
    let mut next = s.advanced(&slope, dt);
    next.attitude = quat_normalize(&next.attitude).unwrap_or(s.attitude);
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::FRAC_PI_4;
    use nalgebra::UnitQuaternion;
    use proptest::prelude::*;

    fn unit_quat() -> impl Strategy<Value = Quat> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-degenerate", |(a, b, c, d)| a * a + b * b + c * c + d * d > 0.01)
            .prop_map(|(a, b, c, d)| quat_normalize(&Quat::new(a, b, c, d)).unwrap())
    }

    fn vec3(scale: f64) -> impl Strategy<Value = Vector3<f64>> {
        (-scale..scale, -scale..scale, -scale..scale).prop_map(|(x, y, z)| Vector3::new(x, y, z))
    }

    #[test]
    fn hat_examples() {
        assert_eq!(hat(&Vector3::zeros()), Matrix3::zeros());
        assert_eq!(
            hat(&Vector3::z()),
            Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn quaternion_examples() {
        let q = Quat::new(0.3, -0.2, 0.5, 0.1);
        assert_eq!(quat_multiply(&Quat::identity(), &q), q);
        let qq = quat_multiply(&q, &quat_conjugate(&q));
        assert_relative_eq!(qq.w, 0.39, epsilon = 1e-15);
        assert!(qq.imag().amax() < 1e-15);

        assert_eq!(quat_conjugate(&Quat::identity()), Quat::identity());
        assert_eq!(quat_conjugate(&Quat::new(0.0, 1.0, 0.0, 0.0)), Quat::new(0.0, -1.0, 0.0, 0.0));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(quat_normalize(&Quat::new(2.0, 0.0, 0.0, 0.0)).unwrap(), Quat::identity());
        let q = quat_normalize(&Quat::new(0.3, -0.2, 0.5, 0.1)).unwrap();
        let again = quat_normalize(&q).unwrap();
        assert!((again.coords - q.coords).amax() <= 1e-15);
        assert_eq!(quat_normalize(&Quat::new(0.0, 0.0, 0.0, 0.0)), Err(QuatError::Zero));
    }

    #[test]
    fn rotmat_examples() {
        assert_eq!(quat_to_rotmat(&Quat::identity()).unwrap(), Matrix3::identity());
        let r = quat_to_rotmat(&Quat::new(FRAC_PI_4.cos(), 0.0, 0.0, FRAC_PI_4.sin())).unwrap();
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((r - expected).amax() < 1e-15);
        assert!(matches!(
            quat_to_rotmat(&Quat::new(2.0, 0.0, 0.0, 0.0)),
            Err(QuatError::NotUnit { .. })
        ));
    }

    #[test]
    fn hover_is_equilibrium() {
        let p = VehicleParams::default();
        let s = RigidBodyState::at_rest(Vector3::new(0.0, 0.0, 4.0));
        let wr = Wrench::new(Vector3::new(0.0, 0.0, p.weight()), Vector3::zeros());
        let d = state_derivative(&s, &wr, &p);
        assert_eq!(d.acceleration, Vector3::zeros());
        assert_eq!(d.angular_acceleration, Vector3::zeros());
        assert_eq!(rk4_step(&s, &wr, 1e-3, &p), s);
    }

    #[test]
    fn free_fall_acceleration() {
        let p = VehicleParams::default();
        let mut s = RigidBodyState::default();
        s.attitude = quat_normalize(&Quat::new(0.2, 0.7, -0.1, 0.4)).unwrap();
        let d = state_derivative(&s, &Wrench::zero(), &p);
        assert_eq!(d.acceleration, Vector3::new(0.0, 0.0, -9.8));
    }

    #[test]
    fn spin_about_principal_axis_has_no_gyroscopic_term() {
        let p = VehicleParams::default();
        let s = RigidBodyState { angular_velocity: Vector3::z(), ..Default::default() };
        let d = state_derivative(&s, &Wrench::zero(), &p);
        assert_eq!(d.angular_acceleration, Vector3::zeros());
    }

    #[test]
    fn free_fall_one_second() {
        let p = VehicleParams::default();
        let mut s = RigidBodyState::default();
        for _ in 0..1000 {
            s = rk4_step(&s, &Wrench::zero(), 1e-3, &p);
        }
        assert!((s.velocity.z + 9.8).abs() < 1e-9);
        assert!((s.position.z + 4.9).abs() < 1e-6);
    }

    fn spin_error(steps: usize) -> f64 {
        let p = VehicleParams::default();
        let dt = 1.0 / steps as f64;
        let mut s = RigidBodyState { angular_velocity: Vector3::z(), ..Default::default() };
        for _ in 0..steps {
            s = rk4_step(&s, &Wrench::zero(), dt, &p);
        }
        // exp of a constant body rate: rotation by 1 rad about z
        let exact = Quat::new(0.5f64.cos(), 0.0, 0.0, 0.5f64.sin());
        (s.attitude.coords - exact.coords).norm()
    }

    #[test]
    fn constant_spin_matches_quaternion_exponential() {
        assert!(spin_error(1000) < 1e-8);
    }

    #[test]
    fn rk4_is_fourth_order() {
        // coarse steps keep the truncation error above round-off
        let ratio = spin_error(10) / spin_error(20);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn torque_free_motion_conserves_energy_and_momentum() {
        let p = VehicleParams { gravity: 0.0, ..Default::default() };
        let mut s = RigidBodyState {
            velocity: Vector3::new(0.3, -0.2, 0.1),
            angular_velocity: Vector3::new(0.8, -0.5, 0.3),
            ..Default::default()
        };
        let energy = |s: &RigidBodyState| {
            0.5 * p.mass * s.velocity.norm_squared()
                + 0.5 * s.angular_velocity.dot(&p.inertia.component_mul(&s.angular_velocity))
        };
        let momentum = |s: &RigidBodyState| s.rotation() * p.inertia.component_mul(&s.angular_velocity);
        let (e0, h0) = (energy(&s), momentum(&s));
        for _ in 0..10_000 {
            s = rk4_step(&s, &Wrench::zero(), 1e-3, &p);
        }
        assert!((energy(&s) - e0).abs() < 1e-8);
        assert!((momentum(&s) - h0).norm() < 1e-6);
    }

    proptest! {
        #[test]
        fn hat_is_cross_product(w in vec3(10.0), x in vec3(10.0)) {
            let via_hat = hat(&w) * x;
            let cross = Vector3::new(
                w.y * x.z - w.z * x.y,
                w.z * x.x - w.x * x.z,
                w.x * x.y - w.y * x.x,
            );
            prop_assert!((via_hat - cross).amax() < 1e-12);
            prop_assert_eq!(hat(&w).transpose(), -hat(&w));
        }

        #[test]
        fn product_composes_rotations(a in unit_quat(), b in unit_quat()) {
            let ab = quat_to_rotmat(&quat_multiply(&a, &b)).unwrap();
            let composed = quat_to_rotmat(&a).unwrap() * quat_to_rotmat(&b).unwrap();
            prop_assert!((ab - composed).amax() < 1e-12);
            let na = UnitQuaternion::from_quaternion(a) * UnitQuaternion::from_quaternion(b);
            prop_assert!((quat_multiply(&a, &b).coords - na.coords).amax() < 1e-12);
        }

        #[test]
        fn conjugate_is_involution(q in unit_quat()) {
            prop_assert_eq!(quat_conjugate(&quat_conjugate(&q)), q);
        }

        #[test]
        fn rotmat_matches_sandwich(q in unit_quat(), x in vec3(5.0)) {
            let r = quat_to_rotmat(&q).unwrap();
            let sandwich = quat_multiply(&quat_multiply(&q, &Quat::from_imag(x)), &quat_conjugate(&q));
            prop_assert!((r * x - sandwich.imag()).amax() < 1e-12);
            prop_assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-12);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn rotmat_to_quat_round_trip(q in unit_quat()) {
            let back = rotmat_to_quat(&quat_to_rotmat(&q).unwrap());
            let q = if q.w < 0.0 { -q } else { q };
            prop_assert!(back.w >= 0.0);
            prop_assert!((back.coords - q.coords).amax() < 1e-12);
        }

        #[test]
        fn derivative_matches_componentwise_equations(
            q in unit_quat(), v in vec3(3.0), w in vec3(3.0), f in vec3(50.0), tau in vec3(5.0)
        ) {
            let p = VehicleParams::default();
            let s = RigidBodyState { position: Vector3::zeros(), velocity: v, attitude: q, angular_velocity: w };
            let d = state_derivative(&s, &Wrench::new(f, tau), &p);

            let (q0, q1, q2, q3) = (q.w, q.i, q.j, q.k);
            let r = [
                [q0*q0 + q1*q1 - q2*q2 - q3*q3, 2.0*(q1*q2 - q0*q3), 2.0*(q1*q3 + q0*q2)],
                [2.0*(q1*q2 + q0*q3), q0*q0 - q1*q1 + q2*q2 - q3*q3, 2.0*(q2*q3 - q0*q1)],
                [2.0*(q1*q3 - q0*q2), 2.0*(q2*q3 + q0*q1), q0*q0 - q1*q1 - q2*q2 + q3*q3],
            ];
            let m = p.mass;
            let ax = (r[0][0]*f.x + r[0][1]*f.y + r[0][2]*f.z) / m;
            let ay = (r[1][0]*f.x + r[1][1]*f.y + r[1][2]*f.z) / m;
            let az = (r[2][0]*f.x + r[2][1]*f.y + r[2][2]*f.z) / m - p.gravity;
            let (jx, jy, jz) = (p.inertia.x, p.inertia.y, p.inertia.z);
            let wdx = (tau.x - (jz - jy) * w.y * w.z) / jx;
            let wdy = (tau.y - (jx - jz) * w.z * w.x) / jy;
            let wdz = (tau.z - (jy - jx) * w.x * w.y) / jz;
            let qd = [
                0.5 * (-q1*w.x - q2*w.y - q3*w.z),
                0.5 * (q0*w.x + q2*w.z - q3*w.y),
                0.5 * (q0*w.y + q3*w.x - q1*w.z),
                0.5 * (q0*w.z + q1*w.y - q2*w.x),
            ];

            prop_assert_eq!(d.velocity, v);
            prop_assert!((d.acceleration - Vector3::new(ax, ay, az)).amax() < 1e-12);
            prop_assert!((d.angular_acceleration - Vector3::new(wdx, wdy, wdz)).amax() < 1e-12);
            let dq = d.attitude_rate;
            prop_assert!((dq.w - qd[0]).abs() < 1e-12 && (dq.i - qd[1]).abs() < 1e-12);
            prop_assert!((dq.j - qd[2]).abs() < 1e-12 && (dq.k - qd[3]).abs() < 1e-12);
        }
    }
}
