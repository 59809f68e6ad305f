//! One control period of the safety layer, shared by the real robot loop
//! and the virtual rollouts of the predictor.

use nalgebra::DVector;

use crate::human::MovingCapsule;
use crate::kinematics::{forward_kinematics, KinematicChain, KinematicsError};
use crate::safety::{scaling_rows, separation_state, solve_scaling, IsoParams, ScalingResult, ScalingRow, SeparationState};
use crate::trajectory::ParamTrajectory;

#[derive(Debug, Clone)]
pub struct ControlStep {
    pub separation: SeparationState,
    pub rows: Vec<ScalingRow>,
    /// Joint velocity requested by the trajectory at `alpha = 1`.
    pub nominal_qd: DVector<f64>,
    pub scaling: ScalingResult,
}

impl ControlStep {
    /// Speed limit of the closest link.
    pub fn worst_v_max(&self) -> Option<f64> {
        let worst = self.separation.worst?;
        let link = self.separation.links[worst].link;
        self.rows.iter().find(|r| r.link == link).map(|r| r.v_max)
    }

    pub fn commanded_qd(&self) -> DVector<f64> {
        &self.nominal_qd * self.scaling.alpha
    }
}

/// Evaluates separation, speed limits and the scaling factor for the
/// trajectory's current progress.
pub fn control_step(
    chain: &KinematicChain,
    iso: &IsoParams,
    traj: &ParamTrajectory,
    qd_actual: &DVector<f64>,
    human: &[MovingCapsule],
) -> Result<ControlStep, KinematicsError> {
    let pose = forward_kinematics(chain, &traj.q())?;
    let separation = separation_state(&pose, human)?;
    let nominal_qd = traj.nominal_joint_velocity();
    let rows = scaling_rows(iso, &separation, &nominal_qd);
    let scaling = solve_scaling(&rows, &nominal_qd, qd_actual, chain.limits(), iso.t_r);
    Ok(ControlStep { separation, rows, nominal_qd, scaling })
}
