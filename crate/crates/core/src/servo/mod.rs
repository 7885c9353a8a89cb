//! Servo hardware abstraction: PWM arithmetic, the robot body layout, a
//! simulated slew-limited servo bus with trace logging, and the 8x8
//! dot-matrix display.

mod body;
mod bus;
mod display;
mod pwm;

pub use body::{RobotBodyConfig, ServoModel, ServoSpec, JOINT_NAMES, MG995_JOINTS, SG90_JOINTS};
pub use bus::{
    read_trace, BusToken, JitterMode, JointState, ServoBus, ServoSnapshot, SharedBus,
    SimulatedBus, SimulatedServoState, TraceRow, TRACE_HEADER,
};
pub use display::{DotMatrixFrame, SimulatedDisplay};
pub use pwm::{angle_to_pulse, pulse_to_angle, pulse_to_duty};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum ServoError {
    #[error("unknown servo channel {0}")]
    UnknownChannel(u8),
    #[error("pulse {pulse} us outside [{min}, {max}] on channel {channel}")]
    PulseOutOfRange {
        channel: u8,
        pulse: f64,
        min: f64,
        max: f64,
    },
    #[error("angle {angle} outside [0, {range}]")]
    AngleOutOfRange { angle: f64, range: f64 },
    #[error("pulse {pulse} us exceeds the {period} us PWM period")]
    PulseExceedsPeriod { pulse: f64, period: f64 },
    #[error("bus fault: {0}")]
    BusFault(String),
    #[error("invalid body configuration: {0}")]
    InvalidBody(String),
    #[error("tick must be positive, got {0}")]
    InvalidTick(f64),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}
