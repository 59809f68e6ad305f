//! Serial-chain kinematics for a velocity-controlled manipulator.
//!
//! Every joint is revolute. Joint `i` applies a fixed `origin` transform
//! relative to the previous link frame, then rotates about its local `axis`
//! by `q[i]`. The frame reached after that rotation is the frame of link `i`,
//! and capsules are attached to link frames.

use nalgebra::{DVector, Isometry3, Matrix3xX, RowDVector, Translation3, Unit, UnitQuaternion};
use thiserror::Error;

use crate::geometry::{Capsule, SeparationGeometry, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("expected {expected} joint values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("link index {0} out of range")]
    InvalidLink(usize),
    #[error("invalid chain: {0}")]
    InvalidChain(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub origin: Isometry3<f64>,
    pub axis: Unit<Vec3>,
}

impl Joint {
    pub fn new(translation: Vec3, rpy: Vec3, axis: Vec3) -> Self {
        let rotation = UnitQuaternion::from_euler_angles(rpy.x, rpy.y, rpy.z);
        Self {
            origin: Isometry3::from_parts(Translation3::from(translation), rotation),
            axis: Unit::new_normalize(axis),
        }
    }

    /// Revolute joint about local z, offset by `translation`.
    pub fn revolute_z(translation: Vec3) -> Self {
        Self::new(translation, Vec3::zeros(), Vec3::z())
    }
}

/// A capsule rigidly attached to a link, endpoints in the link frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CapsuleAttachment {
    pub link: usize,
    pub local: Capsule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointLimits {
    pub qd_min: DVector<f64>,
    pub qd_max: DVector<f64>,
    pub qdd_min: DVector<f64>,
    pub qdd_max: DVector<f64>,
}

impl JointLimits {
    /// Symmetric bounds `[-qd, qd]` and `[-qdd, qdd]` on every joint.
    pub fn symmetric(n: usize, qd: f64, qdd: f64) -> Self {
        Self {
            qd_min: DVector::from_element(n, -qd),
            qd_max: DVector::from_element(n, qd),
            qdd_min: DVector::from_element(n, -qdd),
            qdd_max: DVector::from_element(n, qdd),
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), KinematicsError> {
        let all = [
            ("qd_min", &self.qd_min),
            ("qd_max", &self.qd_max),
            ("qdd_min", &self.qdd_min),
            ("qdd_max", &self.qdd_max),
        ];
        for (name, v) in all {
            if v.len() != n {
                return Err(KinematicsError::InvalidChain(format!("{name} has {} entries, chain has {n} joints", v.len())));
            }
        }
        for j in 0..n {
            if !(self.qd_min[j] < 0.0 && self.qd_max[j] > 0.0) {
                return Err(KinematicsError::InvalidChain(format!("joint {j}: velocity bounds must straddle zero")));
            }
            if !(self.qdd_min[j] < 0.0 && self.qdd_max[j] > 0.0) {
                return Err(KinematicsError::InvalidChain(format!("joint {j}: acceleration bounds must straddle zero")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    joints: Vec<Joint>,
    capsules: Vec<CapsuleAttachment>,
    limits: JointLimits,
}

impl KinematicChain {
    pub fn new(joints: Vec<Joint>, capsules: Vec<CapsuleAttachment>, limits: JointLimits) -> Result<Self, KinematicsError> {
        let n = joints.len();
        if n == 0 {
            return Err(KinematicsError::InvalidChain("chain needs at least one joint".into()));
        }
        limits.validate(n)?;
        for (k, c) in capsules.iter().enumerate() {
            if c.link >= n {
                return Err(KinematicsError::InvalidChain(format!("capsule {k} references link {} of {n}", c.link)));
            }
            if !c.local.is_valid() {
                return Err(KinematicsError::InvalidChain(format!("capsule {k} has non-positive radius or non-finite endpoints")));
            }
        }
        Ok(Self { joints, capsules, limits })
    }

    /// Planar arm in the xy-plane: every joint turns about z and link `i`
    /// has length `lengths[i]` along its local x axis, with one capsule
    /// covering it.
    pub fn planar(lengths: &[f64], radius: f64, limits: JointLimits) -> Result<Self, KinematicsError> {
        let mut joints = Vec::with_capacity(lengths.len());
        let mut capsules = Vec::with_capacity(lengths.len());
        let mut offset = 0.0;
        for (i, &len) in lengths.iter().enumerate() {
            joints.push(Joint::revolute_z(Vec3::new(offset, 0.0, 0.0)));
            capsules.push(CapsuleAttachment {
                link: i,
                local: Capsule::new(Vec3::zeros(), Vec3::new(len, 0.0, 0.0), radius),
            });
            offset = len;
        }
        Self::new(joints, capsules, limits)
    }

    pub fn n_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn capsules(&self) -> &[CapsuleAttachment] {
        &self.capsules
    }

    pub fn limits(&self) -> &JointLimits {
        &self.limits
    }

    /// Upper bound on the distance of any capsule endpoint from any joint
    /// axis, obtained by summing the offsets along the chain.
    pub fn reach(&self) -> f64 {
        let offsets: f64 = self.joints.iter().map(|j| j.origin.translation.vector.norm()).sum();
        let tip = self
            .capsules
            .iter()
            .map(|c| c.local.a.norm().max(c.local.b.norm()) + c.local.radius)
            .fold(0.0, f64::max);
        offsets + tip
    }

    fn check_dim(&self, q: &DVector<f64>) -> Result<(), KinematicsError> {
        if q.len() != self.n_joints() {
            return Err(KinematicsError::DimensionMismatch { expected: self.n_joints(), got: q.len() });
        }
        Ok(())
    }
}

/// Robot joint configuration and velocity at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub q: DVector<f64>,
    pub q_dot: DVector<f64>,
    pub time: f64,
}

impl JointState {
    pub fn at_rest(q: DVector<f64>) -> Self {
        let n = q.len();
        Self { q, q_dot: DVector::zeros(n), time: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkCapsule {
    pub link: usize,
    pub capsule: Capsule,
}

/// World-frame result of forward kinematics.
#[derive(Debug, Clone)]
pub struct ChainPose {
    /// Frame of each link (after its joint rotation).
    pub frames: Vec<Isometry3<f64>>,
    /// World position of each joint axis.
    pub joint_origins: Vec<Vec3>,
    /// World direction of each joint axis.
    pub joint_axes: Vec<Vec3>,
    pub capsules: Vec<LinkCapsule>,
}

impl ChainPose {
    /// Linear-velocity Jacobian of a world point rigidly attached to `link`.
    pub fn point_jacobian(&self, link: usize, point: &Vec3) -> Result<Matrix3xX<f64>, KinematicsError> {
        let n = self.frames.len();
        if link >= n {
            return Err(KinematicsError::InvalidLink(link));
        }
        let mut jac = Matrix3xX::zeros(n);
        for j in 0..=link {
            let col = self.joint_axes[j].cross(&(point - self.joint_origins[j]));
            jac.set_column(j, &col);
        }
        Ok(jac)
    }

    /// Tip of the last capsule on the last link, or the last frame origin.
    pub fn tip(&self) -> Vec3 {
        let last = self.frames.len() - 1;
        self.capsules
            .iter()
            .rev()
            .find(|c| c.link == last)
            .map(|c| c.capsule.b)
            .unwrap_or_else(|| self.frames[last].translation.vector)
    }
}

pub fn forward_kinematics(chain: &KinematicChain, q: &DVector<f64>) -> Result<ChainPose, KinematicsError> {
    chain.check_dim(q)?;
    let n = chain.n_joints();
    let mut frames = Vec::with_capacity(n);
    let mut joint_origins = Vec::with_capacity(n);
    let mut joint_axes = Vec::with_capacity(n);
    let mut parent = Isometry3::identity();
    for (i, joint) in chain.joints.iter().enumerate() {
        let joint_frame = parent * joint.origin;
        joint_origins.push(joint_frame.translation.vector);
        joint_axes.push(joint_frame.rotation * joint.axis.into_inner());
        let link_frame = joint_frame * UnitQuaternion::from_axis_angle(&joint.axis, q[i]);
        frames.push(link_frame);
        parent = link_frame;
    }
    let capsules = chain
        .capsules
        .iter()
        .map(|att| {
            let f = &frames[att.link];
            LinkCapsule {
                link: att.link,
                capsule: Capsule::new(
                    f.transform_point(&att.local.a.into()).coords,
                    f.transform_point(&att.local.b.into()).coords,
                    att.local.radius,
                ),
            }
        })
        .collect();
    Ok(ChainPose { frames, joint_origins, joint_axes, capsules })
}

/// Maps joint velocities to the linear velocity of `point` (world frame,
/// rigidly attached to `link`). Columns of joints distal to `link` are zero.
pub fn link_position_jacobian(
    chain: &KinematicChain,
    q: &DVector<f64>,
    link: usize,
    point: &Vec3,
) -> Result<Matrix3xX<f64>, KinematicsError> {
    if link >= chain.n_joints() {
        return Err(KinematicsError::InvalidLink(link));
    }
    forward_kinematics(chain, q)?.point_jacobian(link, point)
}

/// Row `J_r` such that `J_r * q_dot` is the speed of the robot witness point
/// of `sep` toward the human witness point.
///
/// `sep.point_a` must be the robot-side point on `link`, and `sep.direction`
/// must point from robot to human.
pub fn modified_jacobian_row(
    chain: &KinematicChain,
    q: &DVector<f64>,
    link: usize,
    sep: &SeparationGeometry,
) -> Result<RowDVector<f64>, KinematicsError> {
    let jac = link_position_jacobian(chain, q, link, &sep.point_a)?;
    Ok(sep.direction.transpose() * jac)
}

/// Same as [`modified_jacobian_row`] for an already computed pose.
pub fn modified_jacobian_row_at(pose: &ChainPose, link: usize, sep: &SeparationGeometry) -> Result<RowDVector<f64>, KinematicsError> {
    let jac = pose.point_jacobian(link, &sep.point_a)?;
    Ok(sep.direction.transpose() * jac)
}
