//! Control allocation by force decomposition.
//!
//! With the decomposed rotor forces `x = [F1V, F1L, F2V, F2L, F3, F4]` the
//! reduced wrench is linear, `[F_z, tau] = A x`, with the 4x6 static matrix
//!
//! ```text
//!  [  1     0    1    0    1    1  ]
//!  [  l   -kr   -l   kr    l   -l  ]
//!  [  0    b1    0   b1    0    0  ]
//!  [ -kr   -l   kr    l   kr  -kr  ]
//! ```
//!
//! The minimum-norm solution `x = A^+ w` spreads thrust over all rotors.
//! Losing a bottom rotor removes its column. With both bottom rotors gone
//! the matrix is square and invertible, `det = 4 b1 (l^2 + kr^2)`, and the
//! vehicle flies as a plain Bicopter.

use core::fmt;

use nalgebra::{DMatrix, DVector, Matrix4x6, Matrix6x4, Vector3, Vector4};
use rand::Rng;

use crate::actuation::{recompose_with_limit, ActuatorCommand, ForceDecomposition, SaturationReport, DEFAULT_TILT_LIMIT};
use crate::params::{ParamError, VehicleParams};

/// Relative singular-value threshold for rank decisions.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BottomRotor {
    Three,
    Four,
}

impl BottomRotor {
    /// 1-based rotor index.
    pub fn index(self) -> usize {
        match self {
            BottomRotor::Three => 3,
            BottomRotor::Four => 4,
        }
    }
}

/// Which rotors are available to the allocator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FailureMode {
    #[default]
    Nominal,
    OneBottomOut(BottomRotor),
    BothBottomOut,
}

impl FailureMode {
    pub const ALL: [FailureMode; 4] = [
        FailureMode::Nominal,
        FailureMode::OneBottomOut(BottomRotor::Three),
        FailureMode::OneBottomOut(BottomRotor::Four),
        FailureMode::BothBottomOut,
    ];

    /// Columns of the nominal 4x6 matrix that remain in this mode.
    pub fn columns(self) -> &'static [usize] {
        match self {
            FailureMode::Nominal => &[0, 1, 2, 3, 4, 5],
            FailureMode::OneBottomOut(BottomRotor::Three) => &[0, 1, 2, 3, 5],
            FailureMode::OneBottomOut(BottomRotor::Four) => &[0, 1, 2, 3, 4],
            FailureMode::BothBottomOut => &[0, 1, 2, 3],
        }
    }

    /// 1-based indices of the rotors lost in this mode.
    pub fn failed_rotors(self) -> &'static [usize] {
        match self {
            FailureMode::Nominal => &[],
            FailureMode::OneBottomOut(BottomRotor::Three) => &[3],
            FailureMode::OneBottomOut(BottomRotor::Four) => &[4],
            FailureMode::BothBottomOut => &[3, 4],
        }
    }

    fn slot(self) -> usize {
        match self {
            FailureMode::Nominal => 0,
            FailureMode::OneBottomOut(BottomRotor::Three) => 1,
            FailureMode::OneBottomOut(BottomRotor::Four) => 2,
            FailureMode::BothBottomOut => 3,
        }
    }
}

impl fmt::Display for FailureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureMode::Nominal => f.write_str("nominal"),
            FailureMode::OneBottomOut(r) => write!(f, "rotor {} out", r.index()),
            FailureMode::BothBottomOut => f.write_str("both bottom rotors out"),
        }
    }
}

/// Body-z force and body torque, the part of the wrench the allocator can
/// set independently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedWrench {
    pub fz: f64,
    pub torque: Vector3<f64>,
}

impl ReducedWrench {
    pub fn new(fz: f64, torque: Vector3<f64>) -> Self {
        Self { fz, torque }
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.fz, self.torque.x, self.torque.y, self.torque.z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AllocationError {
    InvalidParams(ParamError),
    RankDeficient { mode: FailureMode, rank: usize },
    NotASolution { residual: f64 },
}

impl fmt::Display for AllocationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AllocationError::InvalidParams(e) => write!(f, "invalid vehicle parameters: {e}"),
            AllocationError::RankDeficient { mode, rank } => {
                write!(f, "allocation matrix ({mode}) has rank {rank}, need 4")
            }
            AllocationError::NotASolution { residual } => {
                write!(f, "decomposition does not reproduce the wrench (residual {residual:e})")
            }
        }
    }
}

impl core::error::Error for AllocationError {}

impl From<ParamError> for AllocationError {
    fn from(e: ParamError) -> Self {
        AllocationError::InvalidParams(e)
    }
}

/// Nominal 4x6 static allocation matrix, rows `(F_z, tau_x, tau_y, tau_z)`.
pub fn static_matrix(params: &VehicleParams) -> Matrix4x6<f64> {
    let (l, b1, kr) = (params.arm_length, params.top_offset, params.torque_ratio);
    Matrix4x6::new(
        1.0, 0.0, 1.0, 0.0, 1.0, 1.0, //
        l, -kr, -l, kr, l, -l, //
        0.0, b1, 0.0, b1, 0.0, 0.0, //
        -kr, -l, kr, l, kr, -kr,
    )
}

/// Symbolic pseudo-inverse of the nominal matrix.
pub fn closed_form_pinv(params: &VehicleParams) -> Matrix6x4<f64> {
    let (l, b1, kr) = (params.arm_length, params.top_offset, params.torque_ratio);
    let s = l * l + kr * kr;
    let s2 = s * s;
    let a = l * (l * l + 3.0 * kr * kr) / (4.0 * s2);
    let c = kr * (3.0 * l * l + kr * kr) / (4.0 * s2);
    let d = kr * kr * kr / (2.0 * s2);
    let e = l * l * l / (2.0 * s2);
    let h = 1.0 / (2.0 * b1);
    let g = l / (4.0 * s);
    let k = kr / (4.0 * s);
    Matrix6x4::new(
        0.25, a, 0.0, -c, //
        0.0, -d, h, -e, //
        0.25, -a, 0.0, c, //
        0.0, d, h, e, //
        0.25, g, 0.0, k, //
        0.25, -g, 0.0, -k,
    )
}

/// Moore-Penrose pseudo-inverse by SVD, with singular values below
/// `RANK_TOLERANCE * sigma_max` treated as zero. Returns the inverse and
/// the numerical rank.
pub fn pseudo_inverse(a: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let eps = RANK_TOLERANCE * sigma_max;
    let rank = svd.rank(eps);
    let pinv = svd
        .pseudo_inverse(eps)
        .unwrap_or_else(|_| DMatrix::zeros(a.ncols(), a.nrows()));
    (pinv, rank)
}

/// Allocation matrix of one failure mode and its precomputed pseudo-inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationMatrix {
    mode: FailureMode,
    matrix: DMatrix<f64>,
    pinv: DMatrix<f64>,
}

impl AllocationMatrix {
    pub fn mode(&self) -> FailureMode {
        self.mode
    }

    /// The 4xk matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// The kx4 pseudo-inverse.
    pub fn pinv(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    /// Determinant, for the square (both bottom rotors out) case only.
    pub fn determinant(&self) -> Option<f64> {
        self.matrix.is_square().then(|| self.matrix.determinant())
    }

    /// `A x`, the reduced wrench a decomposition produces.
    pub fn apply(&self, fd: &ForceDecomposition) -> Vector4<f64> {
        let x = DVector::from_iterator(fd.len(), fd.iter());
        let y = &self.matrix * x;
        Vector4::new(y[0], y[1], y[2], y[3])
    }

    /// Minimum-norm decomposition `A^+ w`.
    pub fn solve(&self, w: &ReducedWrench) -> ForceDecomposition {
        let v = w.as_vector();
        let x = &self.pinv * DVector::from_column_slice(v.as_slice());
        ForceDecomposition::new(self.mode, x.as_slice()).expect("pinv has one row per column of the mode")
    }
}

pub fn build_allocation(params: &VehicleParams, mode: FailureMode) -> Result<AllocationMatrix, AllocationError> {
    params.validate()?;
    let full = static_matrix(params);
    let columns = mode.columns();
    let matrix = DMatrix::from_fn(4, columns.len(), |r, c| full[(r, columns[c])]);
    let (pinv, rank) = pseudo_inverse(&matrix);
    if rank < 4 {
        return Err(AllocationError::RankDeficient { mode, rank });
    }
    Ok(AllocationMatrix { mode, matrix, pinv })
}

/// Result of allocating one wrench.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    pub decomposition: ForceDecomposition,
    pub command: ActuatorCommand,
    pub report: SaturationReport,
}

/// Allocate with a prebuilt matrix.
pub fn allocate_with(w: &ReducedWrench, matrix: &AllocationMatrix, tilt_limit: f64) -> Allocation {
    let decomposition = matrix.solve(w);
    let (command, report) = recompose_with_limit(&decomposition, tilt_limit);
    Allocation { decomposition, command, report }
}

/// One-shot allocation; builds the matrix for `mode` first. Prefer an
/// [`Allocator`] inside a control loop.
pub fn allocate(w: &ReducedWrench, params: &VehicleParams, mode: FailureMode) -> Result<Allocation, AllocationError> {
    let matrix = build_allocation(params, mode)?;
    Ok(allocate_with(w, &matrix, DEFAULT_TILT_LIMIT))
}

/// Allocation matrices for every failure mode, built once.
#[derive(Debug, Clone)]
pub struct Allocator {
    matrices: [AllocationMatrix; 4],
    tilt_limit: f64,
}

impl Allocator {
    pub fn new(params: &VehicleParams) -> Result<Self, AllocationError> {
        Self::with_tilt_limit(params, DEFAULT_TILT_LIMIT)
    }

    pub fn with_tilt_limit(params: &VehicleParams, tilt_limit: f64) -> Result<Self, AllocationError> {
        let build = |mode| build_allocation(params, mode);
        Ok(Self {
            matrices: [
                build(FailureMode::ALL[0])?,
                build(FailureMode::ALL[1])?,
                build(FailureMode::ALL[2])?,
                build(FailureMode::ALL[3])?,
            ],
            tilt_limit,
        })
    }

    pub fn matrix(&self, mode: FailureMode) -> &AllocationMatrix {
        &self.matrices[mode.slot()]
    }

    pub fn tilt_limit(&self) -> f64 {
        self.tilt_limit
    }

    pub fn allocate(&self, w: &ReducedWrench, mode: FailureMode) -> Allocation {
        allocate_with(w, self.matrix(mode), self.tilt_limit)
    }
}

/// Number of random null-space directions tried by [`min_norm_check`];
/// each is applied with both signs.
pub const NULL_SPACE_SAMPLES: usize = 50;

/// Checks that `fd` solves `A fd = w` and that no random null-space
/// perturbation `fd + n` has a smaller 2-norm.
///
/// Perturbations are drawn as `(I - A^+ A) z` for uniform `z`, scaled to
/// `1e-3 * max(|fd|, 1)` and tried as `+n` and `-n`. A square (invertible)
/// matrix has no null space and always passes.
pub fn min_norm_check<R: Rng + ?Sized>(
    w: &ReducedWrench,
    fd: &ForceDecomposition,
    matrix: &AllocationMatrix,
    rng: &mut R,
) -> Result<bool, AllocationError> {
    let target = w.as_vector();
    let residual = (matrix.apply(fd) - target).amax();
    if residual > 1e-9 * (1.0 + target.amax()) {
        return Err(AllocationError::NotASolution { residual });
    }

    let k = fd.len();
    let x = DVector::from_iterator(k, fd.iter());
    let projector = DMatrix::<f64>::identity(k, k) - matrix.pinv() * matrix.matrix();
    let base = x.norm_squared();
    let scale = 1e-3 * x.norm().max(1.0);
    let slack = 1e-12 * (base + 1.0);

    for _ in 0..NULL_SPACE_SAMPLES {
        let z = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
        let n = &projector * z;
        let len = n.norm();
        if len < 1e-9 {
            continue;
        }
        let n = n * (scale / len);
        if (&x + &n).norm_squared() + slack < base || (&x - &n).norm_squared() + slack < base {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuation::forward_wrench;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn params() -> VehicleParams {
        VehicleParams::default()
    }

    #[test]
    fn nominal_rows() {
        let a = build_allocation(&params(), FailureMode::Nominal).unwrap();
        let m = a.matrix();
        assert_eq!(m.shape(), (4, 6));
        assert_eq!(m.row(0).iter().copied().collect::<alloc::vec::Vec<_>>(), [1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        assert_eq!(
            m.row(2).iter().copied().collect::<alloc::vec::Vec<_>>(),
            [0.0, 0.14838, 0.0, 0.14838, 0.0, 0.0]
        );
    }

    #[test]
    fn mode_shapes_and_right_inverse() {
        for mode in FailureMode::ALL {
            let a = build_allocation(&params(), mode).unwrap();
            assert_eq!(a.matrix().ncols(), mode.columns().len());
            let eye = a.matrix() * a.pinv();
            assert!((eye - DMatrix::identity(4, 4)).amax() < 1e-10, "{mode}");
        }
    }

    #[test]
    fn pinv_matches_closed_form() {
        let p = params();
        let numeric = build_allocation(&p, FailureMode::Nominal).unwrap();
        let closed = closed_form_pinv(&p);
        assert_eq!(closed[(0, 0)], 0.25);
        assert!((closed[(1, 2)] - 3.369726378218089).abs() < 1e-12);
        let diff = numeric.pinv() - DMatrix::from_column_slice(6, 4, closed.as_slice());
        assert!(diff.amax() < 1e-12, "{diff}");
    }

    #[test]
    fn closed_form_is_a_right_inverse_for_random_geometry() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..100 {
            let p = VehicleParams {
                arm_length: rng.random_range(0.05..1.0),
                top_offset: rng.random_range(0.02..0.5),
                torque_ratio: rng.random_range(0.0..0.05),
                ..params()
            };
            let eye = static_matrix(&p) * closed_form_pinv(&p);
            assert!((eye - nalgebra::Matrix4::identity()).amax() < 1e-12);
        }
    }

    #[test]
    fn bicopter_determinant() {
        let p = params();
        let a = build_allocation(&p, FailureMode::BothBottomOut).unwrap();
        let det = a.determinant().unwrap();
        let expected = 4.0 * 0.14838 * (0.2539 * 0.2539 + 0.0008 * 0.0008);
        assert!((det - expected).abs() < 1e-12);
        assert!((det - 0.0382618).abs() < 1e-6);
        assert!(build_allocation(&p, FailureMode::Nominal).unwrap().determinant().is_none());
    }

    #[test]
    fn zero_arm_is_rank_deficient() {
        // l and k_r both zero: the tau_x row vanishes
        let p = VehicleParams { arm_length: 1e-300, torque_ratio: 0.0, ..params() };
        assert!(matches!(
            build_allocation(&p, FailureMode::Nominal),
            Err(AllocationError::RankDeficient { .. })
        ));
        let p = VehicleParams { arm_length: 0.0, ..params() };
        assert!(matches!(build_allocation(&p, FailureMode::Nominal), Err(AllocationError::InvalidParams(_))));
    }

    #[test]
    fn hover_allocation() {
        let p = params();
        let hover = ReducedWrench::new(49.0, Vector3::zeros());
        let out = allocate(&hover, &p, FailureMode::Nominal).unwrap();
        for f in out.command.thrust {
            assert!((f - 12.25).abs() < 1e-12);
        }
        assert!(out.command.tilt.iter().all(|b| b.abs() < 1e-12));

        let out = allocate(&hover, &p, FailureMode::BothBottomOut).unwrap();
        assert!((out.command.thrust[0] - 24.5).abs() < 1e-12);
        assert!((out.command.thrust[1] - 24.5).abs() < 1e-12);
        assert_eq!(&out.command.thrust[2..], &[0.0, 0.0]);
        assert!(out.command.tilt.iter().all(|b| b.abs() < 1e-12));
    }

    #[test]
    fn zero_wrench_zero_command() {
        let out = allocate(&ReducedWrench::new(0.0, Vector3::zeros()), &params(), FailureMode::Nominal).unwrap();
        assert_eq!(out.command.thrust, [0.0; 4]);
        assert_eq!(out.command.tilt, [0.0; 2]);
    }

    #[test]
    fn one_bottom_out_hover_split() {
        let p = params();
        let hover = ReducedWrench::new(49.0, Vector3::zeros());
        let out = allocate(&hover, &p, FailureMode::OneBottomOut(BottomRotor::Four)).unwrap();
        let f = out.command.thrust;
        assert_eq!(f[3], 0.0);
        // frozen from a numpy pinv of the 4x5 matrix
        assert!((f[0] - 12.250182420807883).abs() < 1e-9);
        assert!((f[1] - 24.49990878874713).abs() < 1e-9);
        assert!((f[2] - 12.25).abs() < 1e-9);
        assert!((f[1] / out.command.total_thrust() - 0.5).abs() < 1e-5);

        let out = allocate(&hover, &p, FailureMode::OneBottomOut(BottomRotor::Three)).unwrap();
        let f = out.command.thrust;
        assert_eq!(f[2], 0.0);
        assert!((f[0] - 24.49990878874713).abs() < 1e-9);
        assert!((f[3] - 12.25).abs() < 1e-9);
    }

    #[test]
    fn allocation_round_trip() {
        let p = params();
        let allocator = Allocator::new(&p).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        for mode in FailureMode::ALL {
            for _ in 0..200 {
                let w = ReducedWrench::new(
                    rng.random_range(20.0..100.0),
                    Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
                );
                let out = allocator.allocate(&w, mode);
                if out.report.is_saturated() {
                    continue;
                }
                let achieved = forward_wrench(&out.command, &p);
                let reduced = Vector4::new(achieved.force.z, achieved.torque.x, achieved.torque.y, achieved.torque.z);
                assert!((reduced - w.as_vector()).amax() < 1e-9, "{mode}");
            }
        }
    }

    #[test]
    fn min_norm_examples() {
        let p = params();
        let mut rng = StdRng::seed_from_u64(3);
        let w = ReducedWrench::new(60.0, Vector3::new(0.4, -0.3, 0.2));
        for mode in FailureMode::ALL {
            let m = build_allocation(&p, mode).unwrap();
            let fd = m.solve(&w);
            assert!(min_norm_check(&w, &fd, &m, &mut rng).unwrap(), "{mode}");
        }

        let m = build_allocation(&p, FailureMode::Nominal).unwrap();
        let fd = m.solve(&w);
        let projector = DMatrix::<f64>::identity(6, 6) - m.pinv() * m.matrix();
        let n = projector * DVector::from_column_slice(&[1.0, 0.5, -0.3, 0.2, 0.7, -1.0]);
        assert!(n.norm() > 0.1);
        let x: alloc::vec::Vec<f64> = fd.iter().zip(n.iter()).map(|(a, b)| a + b).collect();
        let perturbed = ForceDecomposition::new(FailureMode::Nominal, &x).unwrap();
        assert!(!min_norm_check(&w, &perturbed, &m, &mut rng).unwrap());

        let wrong = ForceDecomposition::nominal([1.0; 6]);
        assert!(matches!(
            min_norm_check(&w, &wrong, &m, &mut rng),
            Err(AllocationError::NotASolution { .. })
        ));
    }
}
