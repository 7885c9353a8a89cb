use std::f64::consts::{FRAC_PI_2, TAU};

use super::{GaitError, GaitParams, GaitSequence, Keyframe, TaskCommand, TurnDirection};
use crate::servo::RobotBodyConfig;

pub const RUN_PERIOD_SCALE: f64 = 0.6;
pub const RUN_AMPLITUDE_SCALE: f64 = 1.25;
pub const PICKUP_DURATION: f64 = 4.0;

#[derive(Clone, Copy)]
struct LegSwing {
    hip: f64,
    knee: f64,
    ankle: f64,
}

/// Builds one cyclic leg/arm pattern. The right side is the left side
/// shifted by exactly half a cycle (N/2 keyframes), so antiphase holds
/// sample-for-sample.
fn cyclic_gait(
    name: &str,
    params: &GaitParams,
    body: &RobotBodyConfig,
    period: f64,
    left: LegSwing,
    right: LegSwing,
) -> Result<GaitSequence, GaitError> {
    let n = params.frames_per_cycle;
    let mut keyframes: Vec<Keyframe> = (0..n)
        .map(|k| {
            let mut targets = params.neutral_pose();
            for (side, swing, index) in [("left", left, k), ("right", right, k + n / 2)] {
                let phase = TAU * index as f64 / n as f64;
                let mut set = |part: &str, offset: f64| {
                    let joint = format!("{side}_{part}");
                    targets.insert(joint.clone(), params.neutral_angle(&joint) + offset);
                };
                set("hip", swing.hip * phase.sin());
                // knee leads the hip by a quarter cycle for swing-leg clearance
                set("knee", swing.knee * (phase + FRAC_PI_2).sin());
                set("ankle", -swing.ankle * phase.sin());
                set("shoulder", -(swing.hip / 4.0) * phase.sin());
            }
            Keyframe {
                t: period * k as f64 / n as f64,
                targets,
            }
        })
        .collect();
    let closing = Keyframe {
        t: period,
        targets: keyframes[0].targets.clone(),
    };
    keyframes.push(closing);
    let seq = GaitSequence {
        name: name.to_string(),
        keyframes,
        period,
        cyclic: true,
    };
    seq.validate(body)?;
    Ok(seq)
}

fn swing(params: &GaitParams, scale: f64) -> LegSwing {
    LegSwing {
        hip: params.hip_amplitude * scale,
        knee: params.knee_amplitude * scale,
        ankle: params.ankle_amplitude * scale,
    }
}

pub fn generate_walk_cycle(
    params: &GaitParams,
    body: &RobotBodyConfig,
) -> Result<GaitSequence, GaitError> {
    params.validate(body)?;
    let legs = swing(params, 1.0);
    cyclic_gait("walk", params, body, params.step_period, legs, legs)
}

/// Walk with a shorter period and larger leg swings.
pub fn generate_run_cycle(
    params: &GaitParams,
    body: &RobotBodyConfig,
) -> Result<GaitSequence, GaitError> {
    let scaled = GaitParams {
        step_period: params.step_period * RUN_PERIOD_SCALE,
        hip_amplitude: params.hip_amplitude * RUN_AMPLITUDE_SCALE,
        knee_amplitude: params.knee_amplitude * RUN_AMPLITUDE_SCALE,
        ankle_amplitude: params.ankle_amplitude * RUN_AMPLITUDE_SCALE,
        ..params.clone()
    };
    scaled.validate(body)?;
    let legs = swing(&scaled, 1.0);
    cyclic_gait("run", &scaled, body, scaled.step_period, legs, legs)
}

/// Walk with the inner leg's hip swing halved.
pub fn generate_turn(
    params: &GaitParams,
    body: &RobotBodyConfig,
    direction: TurnDirection,
) -> Result<GaitSequence, GaitError> {
    params.validate(body)?;
    let outer = swing(params, 1.0);
    let inner = LegSwing {
        hip: outer.hip / 2.0,
        ..outer
    };
    let (left, right, name) = match direction {
        TurnDirection::Left => (inner, outer, "turn-left"),
        TurnDirection::Right => (outer, inner, "turn-right"),
    };
    cyclic_gait(name, params, body, params.step_period, left, right)
}

/// Scripted crouch, reach, grip, lift and rise. `object` is only carried
/// for logging.
pub fn generate_pickup(
    object: &str,
    params: &GaitParams,
    body: &RobotBodyConfig,
) -> Result<GaitSequence, GaitError> {
    if object.trim().is_empty() {
        return Err(GaitError::InvalidParams("pick-up needs an object".into()));
    }
    params.validate(body)?;
    log::debug!("planning pick-up of {object:?}");
    let neutral = params.neutral_pose();
    let offset = |pose: &mut super::JointTargets, joint: &str, delta: f64| {
        let base = params.neutral_angle(joint);
        pose.insert(joint.to_string(), base + delta);
    };

    let crouch = |pose: &mut super::JointTargets| {
        for side in ["left", "right"] {
            offset(pose, &format!("{side}_knee"), 30.0);
            offset(pose, &format!("{side}_hip"), -20.0);
            offset(pose, &format!("{side}_ankle"), 10.0);
        }
    };
    let reach = |pose: &mut super::JointTargets| {
        for side in ["left", "right"] {
            offset(pose, &format!("{side}_shoulder"), 45.0);
            offset(pose, &format!("{side}_elbow"), -30.0);
        }
        offset(pose, "neck_pan", 0.0);
    };

    let mut crouched = neutral.clone();
    crouch(&mut crouched);

    let mut reaching = crouched.clone();
    reach(&mut reaching);
    reaching.insert("gripper".into(), body.gripper_open_angle);

    let mut gripping = reaching.clone();
    gripping.insert("gripper".into(), body.gripper_closed_angle);

    let mut lifting = crouched.clone();
    for side in ["left", "right"] {
        offset(&mut lifting, &format!("{side}_shoulder"), 20.0);
    }
    lifting.insert("gripper".into(), body.gripper_closed_angle);

    let mut risen = neutral.clone();
    for side in ["left", "right"] {
        offset(&mut risen, &format!("{side}_shoulder"), 20.0);
    }
    risen.insert("gripper".into(), body.gripper_closed_angle);

    let poses = [neutral, crouched, reaching, gripping, lifting, risen];
    let step = PICKUP_DURATION / (poses.len() - 1) as f64;
    let keyframes = poses
        .into_iter()
        .enumerate()
        .map(|(i, targets)| Keyframe {
            t: if i == 5 { PICKUP_DURATION } else { step * i as f64 },
            targets,
        })
        .collect();
    let seq = GaitSequence {
        name: "pickup".into(),
        keyframes,
        period: PICKUP_DURATION,
        cyclic: false,
    };
    seq.validate(body)?;
    Ok(seq)
}

/// The motion for a task command, or `None` for commands without one.
pub fn plan(
    command: &TaskCommand,
    params: &GaitParams,
    body: &RobotBodyConfig,
) -> Result<Option<GaitSequence>, GaitError> {
    Ok(Some(match command {
        TaskCommand::Walk => generate_walk_cycle(params, body)?,
        TaskCommand::Run => generate_run_cycle(params, body)?,
        TaskCommand::Turn(direction) => generate_turn(params, body, *direction)?,
        TaskCommand::PickUp(object) => generate_pickup(object, params, body)?,
        TaskCommand::Stop | TaskCommand::AssistantMode => return Ok(None),
    }))
}
