//! Capsule model of the human operator.

use crate::geometry::{Capsule, Vec3};

/// A capsule together with the velocity of every point on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovingCapsule {
    pub capsule: Capsule,
    pub velocity: Vec3,
}

/// Body shape as capsules expressed relative to a reference point.
#[derive(Debug, Clone, PartialEq)]
pub struct HumanBody {
    pub capsules: Vec<Capsule>,
}

impl HumanBody {
    /// Upright torso column standing on the work surface.
    pub fn column(height: f64, radius: f64) -> Self {
        Self {
            capsules: vec![Capsule::new(Vec3::zeros(), Vec3::new(0.0, 0.0, height), radius)],
        }
    }

    pub fn place(&self, state: &HumanState) -> Vec<MovingCapsule> {
        self.capsules
            .iter()
            .map(|c| MovingCapsule {
                capsule: c.translated(&state.position),
                velocity: state.velocity,
            })
            .collect()
    }
}

/// Rigid translation state of the whole body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumanState {
    pub position: Vec3,
    pub velocity: Vec3,
}

impl HumanState {
    pub fn at_rest(position: Vec3) -> Self {
        Self { position, velocity: Vec3::zeros() }
    }
}
