use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::GaitError;
use crate::servo::RobotBodyConfig;

/// Joint name to angle in degrees.
pub type JointTargets = BTreeMap<String, f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    /// Seconds from the start of the sequence.
    pub t: f64,
    pub targets: JointTargets,
}

/// Per-joint linear interpolation between two keyframes, exact at both
/// ends.
pub fn interpolate(a: &Keyframe, b: &Keyframe, t: f64) -> Result<JointTargets, GaitError> {
    if a.targets.len() != b.targets.len() || a.targets.keys().ne(b.targets.keys()) {
        return Err(GaitError::JointSetMismatch);
    }
    if !(a.t <= t && t <= b.t) {
        return Err(GaitError::InvalidSequence(format!(
            "query {t} outside [{}, {}]",
            a.t, b.t
        )));
    }
    if t == a.t {
        return Ok(a.targets.clone());
    }
    if t == b.t {
        return Ok(b.targets.clone());
    }
    let frac = (t - a.t) / (b.t - a.t);
    Ok(a
        .targets
        .iter()
        .zip(b.targets.values())
        .map(|((joint, from), to)| (joint.clone(), from + (to - from) * frac))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaitSequence {
    pub name: String,
    pub keyframes: Vec<Keyframe>,
    /// Cycle length for cyclic sequences, total duration otherwise.
    pub period: f64,
    pub cyclic: bool,
}

impl GaitSequence {
    pub fn validate(&self, body: &RobotBodyConfig) -> Result<(), GaitError> {
        let invalid = |m: &str| Err(GaitError::InvalidSequence(format!("{}: {m}", self.name)));
        let Some(first) = self.keyframes.first() else {
            return invalid("no keyframes");
        };
        if first.t != 0.0 {
            return invalid("first keyframe must be at t = 0");
        }
        if self.keyframes.windows(2).any(|w| !(w[0].t < w[1].t)) {
            return invalid("keyframe times must be strictly increasing");
        }
        for kf in &self.keyframes {
            if kf.targets.keys().ne(first.targets.keys()) {
                return Err(GaitError::JointSetMismatch);
            }
            for (joint, angle) in &kf.targets {
                let spec = body
                    .servo(joint)
                    .ok_or_else(|| GaitError::InvalidSequence(format!("unknown joint {joint}")))?;
                if !(0.0..=spec.angle_range).contains(angle) {
                    return Err(GaitError::LimitViolation {
                        joint: joint.clone(),
                        angle: *angle,
                        range: spec.angle_range,
                    });
                }
            }
        }
        let last = self.keyframes.last().expect("nonempty");
        if last.t != self.period {
            return invalid("last keyframe must sit at the period");
        }
        if self.cyclic {
            let closes = first
                .targets
                .values()
                .zip(last.targets.values())
                .all(|(a, b)| (a - b).abs() <= 1e-9);
            if !closes {
                return invalid("cyclic sequence does not close");
            }
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.period
    }

    /// Targets at time `t`; cyclic sequences wrap, others hold the last
    /// keyframe.
    pub fn sample(&self, t: f64) -> JointTargets {
        let t = if self.cyclic {
            t.rem_euclid(self.period)
        } else {
            t.clamp(0.0, self.period)
        };
        let next = self.keyframes.partition_point(|k| k.t <= t);
        if next == 0 {
            return self.keyframes[0].targets.clone();
        }
        if next == self.keyframes.len() {
            return self.keyframes[next - 1].targets.clone();
        }
        interpolate(&self.keyframes[next - 1], &self.keyframes[next], t)
            .expect("validated sequences share one joint set")
    }

    pub fn joint_names(&self) -> impl Iterator<Item = &str> {
        self.keyframes[0].targets.keys().map(String::as_str)
    }
}
