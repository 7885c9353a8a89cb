use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::GaitError;
use crate::servo::{RobotBodyConfig, JOINT_NAMES};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaitParams {
    /// Seconds per full walk cycle.
    pub step_period: f64,
    pub hip_amplitude: f64,
    pub knee_amplitude: f64,
    pub ankle_amplitude: f64,
    /// Standing pose; joints not listed stand at 90 degrees.
    pub neutral: BTreeMap<String, f64>,
    /// Keyframes per cycle, excluding the closing frame. Must be even.
    pub frames_per_cycle: usize,
}

impl Default for GaitParams {
    fn default() -> Self {
        GaitParams {
            step_period: 1.2,
            hip_amplitude: 20.0,
            knee_amplitude: 25.0,
            ankle_amplitude: 10.0,
            neutral: JOINT_NAMES.iter().map(|j| (j.to_string(), 90.0)).collect(),
            frames_per_cycle: 20,
        }
    }
}

impl GaitParams {
    pub fn neutral_angle(&self, joint: &str) -> f64 {
        self.neutral.get(joint).copied().unwrap_or(90.0)
    }

    pub fn neutral_pose(&self) -> BTreeMap<String, f64> {
        JOINT_NAMES
            .iter()
            .map(|j| (j.to_string(), self.neutral_angle(j)))
            .collect()
    }

    /// Checks shape constraints and that neutral +/- each amplitude stays
    /// inside the servo range.
    pub fn validate(&self, body: &RobotBodyConfig) -> Result<(), GaitError> {
        if !(self.step_period > 0.0) || !self.step_period.is_finite() {
            return Err(GaitError::InvalidParams("step_period must be positive".into()));
        }
        if self.frames_per_cycle < 4 || self.frames_per_cycle % 2 != 0 {
            return Err(GaitError::InvalidParams(
                "frames_per_cycle must be even and at least 4".into(),
            ));
        }
        for (name, a) in [
            ("hip_amplitude", self.hip_amplitude),
            ("knee_amplitude", self.knee_amplitude),
            ("ankle_amplitude", self.ankle_amplitude),
        ] {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(GaitError::InvalidParams(format!("{name} must be >= 0")));
            }
        }
        for joint in self.neutral.keys() {
            if body.servo(joint).is_none() {
                return Err(GaitError::InvalidParams(format!("unknown joint {joint}")));
            }
        }
        let swings = [
            ("hip", self.hip_amplitude),
            ("knee", self.knee_amplitude),
            ("ankle", self.ankle_amplitude),
            ("shoulder", self.hip_amplitude / 4.0),
        ];
        for side in ["left", "right"] {
            for (part, amplitude) in swings {
                let joint = format!("{side}_{part}");
                check_swing(body, &joint, self.neutral_angle(&joint), amplitude)?;
            }
        }
        for joint in JOINT_NAMES {
            check_swing(body, joint, self.neutral_angle(joint), 0.0)?;
        }
        Ok(())
    }
}

fn check_swing(
    body: &RobotBodyConfig,
    joint: &str,
    neutral: f64,
    amplitude: f64,
) -> Result<(), GaitError> {
    let range = body
        .servo(joint)
        .ok_or_else(|| GaitError::InvalidParams(format!("body has no joint {joint}")))?
        .angle_range;
    for angle in [neutral - amplitude, neutral + amplitude] {
        if !(0.0..=range).contains(&angle) {
            return Err(GaitError::LimitViolation {
                joint: joint.to_string(),
                angle,
                range,
            });
        }
    }
    Ok(())
}
