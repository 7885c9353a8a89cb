//! Gait engine: parametric keyframe gaits for the recognized motor
//! commands and an interruptible executor that streams them to a servo bus.

mod execute;
mod generate;
mod params;
mod sequence;

pub use execute::{
    execute, frames_for, GaitRun, InterruptFlag, Repeat, TaskCommand, TaskOutcome, TaskStatus,
    TurnDirection, DEFAULT_TICK,
};
pub use generate::{
    generate_pickup, generate_run_cycle, generate_turn, generate_walk_cycle, plan,
    PICKUP_DURATION, RUN_AMPLITUDE_SCALE, RUN_PERIOD_SCALE,
};
pub use params::GaitParams;
pub use sequence::{interpolate, GaitSequence, JointTargets, Keyframe};

use crate::servo::ServoError;

#[derive(Debug, thiserror::Error)]
pub enum GaitError {
    #[error("joint {joint} would reach {angle:.3} deg, outside [0, {range}]")]
    LimitViolation { joint: String, angle: f64, range: f64 },
    #[error("keyframes cover different joint sets")]
    JointSetMismatch,
    #[error("invalid gait parameters: {0}")]
    InvalidParams(String),
    #[error("invalid gait sequence: {0}")]
    InvalidSequence(String),
    #[error(transparent)]
    Servo(#[from] ServoError),
}
