pub mod control;
pub mod engine;
pub mod fusion;
pub mod geometry;
pub mod human;
pub mod interface;
pub mod kinematics;
pub mod predictor;
pub mod safety;
pub mod stats;
pub mod trajectory;
