use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::ServoError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ServoModel {
    #[serde(rename = "MG995")]
    Mg995,
    #[serde(rename = "SG90")]
    Sg90,
}

impl ServoModel {
    /// No-load slew rate in degrees per second.
    pub fn default_slew(self) -> f64 {
        match self {
            ServoModel::Mg995 => 375.0,
            ServoModel::Sg90 => 545.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServoSpec {
    /// Joint name, e.g. `left_knee`.
    pub id: String,
    pub channel: u8,
    pub model: ServoModel,
    pub min_pulse: f64,
    pub max_pulse: f64,
    pub angle_range: f64,
    pub max_slew: f64,
}

impl ServoSpec {
    pub fn new(id: impl Into<String>, channel: u8, model: ServoModel) -> Self {
        ServoSpec {
            id: id.into(),
            channel,
            model,
            min_pulse: 500.0,
            max_pulse: 2500.0,
            angle_range: 180.0,
            max_slew: model.default_slew(),
        }
    }

    pub fn validate(&self) -> Result<(), ServoError> {
        if !(self.min_pulse < self.max_pulse) {
            return Err(ServoError::InvalidBody(format!(
                "{}: min_pulse must be below max_pulse",
                self.id
            )));
        }
        if !(self.angle_range > 0.0) || !(self.max_slew > 0.0) {
            return Err(ServoError::InvalidBody(format!(
                "{}: angle_range and max_slew must be positive",
                self.id
            )));
        }
        Ok(())
    }
}

/// Large servos: legs and shoulders.
pub const MG995_JOINTS: [&str; 8] = [
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
    "left_shoulder",
    "right_shoulder",
];

/// Micro servos: elbows, neck and gripper.
pub const SG90_JOINTS: [&str; 4] = ["left_elbow", "right_elbow", "neck_pan", "gripper"];

/// All joints in default channel order.
pub const JOINT_NAMES: [&str; 12] = [
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "neck_pan",
    "gripper",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotBodyConfig {
    pub servos: Vec<ServoSpec>,
    pub pwm_frequency: f64,
    pub gripper_open_angle: f64,
    pub gripper_closed_angle: f64,
}

impl Default for RobotBodyConfig {
    /// 8 MG995 on channels 0-7 and 4 SG90 on channels 8-11 at 50 Hz.
    fn default() -> Self {
        let servos = MG995_JOINTS
            .iter()
            .map(|j| (j, ServoModel::Mg995))
            .chain(SG90_JOINTS.iter().map(|j| (j, ServoModel::Sg90)))
            .enumerate()
            .map(|(ch, (id, model))| ServoSpec::new(*id, ch as u8, model))
            .collect();
        RobotBodyConfig {
            servos,
            pwm_frequency: 50.0,
            gripper_open_angle: 150.0,
            gripper_closed_angle: 40.0,
        }
    }
}

impl RobotBodyConfig {
    pub fn validate(&self) -> Result<(), ServoError> {
        let invalid = |m: String| Err(ServoError::InvalidBody(m));
        if self.servos.len() != 12 {
            return invalid(format!("expected 12 servos, found {}", self.servos.len()));
        }
        let mg = self.servos.iter().filter(|s| s.model == ServoModel::Mg995).count();
        if mg != 8 {
            return invalid(format!("expected 8 MG995 and 4 SG90, found {mg} MG995"));
        }
        let mut channels = HashSet::new();
        for s in &self.servos {
            s.validate()?;
            if !channels.insert(s.channel) {
                return invalid(format!("channel {} used twice", s.channel));
            }
        }
        for name in JOINT_NAMES {
            if self.servo(name).is_none() {
                return invalid(format!("missing joint {name}"));
            }
        }
        if !(self.pwm_frequency > 0.0) {
            return invalid("pwm_frequency must be positive".into());
        }
        let gripper = self.servo("gripper").expect("checked above");
        for a in [self.gripper_open_angle, self.gripper_closed_angle] {
            if !(0.0..=gripper.angle_range).contains(&a) {
                return invalid(format!("gripper angle {a} out of range"));
            }
        }
        // every pulse must fit in one PWM period
        let period = 1e6 / self.pwm_frequency;
        if let Some(s) = self.servos.iter().find(|s| s.max_pulse > period) {
            return invalid(format!("{}: max_pulse exceeds the PWM period", s.id));
        }
        Ok(())
    }

    pub fn servo(&self, joint: &str) -> Option<&ServoSpec> {
        self.servos.iter().find(|s| s.id == joint)
    }

    pub fn by_channel(&self, channel: u8) -> Option<&ServoSpec> {
        self.servos.iter().find(|s| s.channel == channel)
    }

    pub fn channels(&self) -> Vec<u8> {
        self.servos.iter().map(|s| s.channel).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_body_is_eight_large_four_micro() {
        let body = RobotBodyConfig::default();
        body.validate().unwrap();
        assert_eq!(body.servos.len(), 12);
        assert_eq!(body.servo("left_knee").unwrap().max_slew, 375.0);
        assert_eq!(body.servo("gripper").unwrap().max_slew, 545.0);
        assert_eq!(body.pwm_frequency, 50.0);
    }

    #[test]
    fn duplicate_channel_and_wrong_mix_rejected() {
        let mut body = RobotBodyConfig::default();
        body.servos[1].channel = 0;
        assert!(body.validate().is_err());

        let mut body = RobotBodyConfig::default();
        body.servos[11].model = ServoModel::Mg995;
        assert!(body.validate().is_err());

        let mut body = RobotBodyConfig::default();
        body.servos.pop();
        assert!(body.validate().is_err());
    }

    #[test]
    fn json_round_trip_uses_part_names() {
        let body = RobotBodyConfig::default();
        let json = serde_json::to_string(&body).unwrap();
        assert!(json.contains("\"MG995\"") && json.contains("\"SG90\""));
        let back: RobotBodyConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, body);
    }
}
