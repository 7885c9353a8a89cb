use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{GaitError, GaitParams, GaitSequence};
use crate::servo::{angle_to_pulse, RobotBodyConfig, ServoBus};

/// One control frame per 50 Hz PWM period.
pub const DEFAULT_TICK: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnDirection {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "command", content = "arg", rename_all = "snake_case")]
pub enum TaskCommand {
    Walk,
    Run,
    Stop,
    Turn(TurnDirection),
    PickUp(String),
    AssistantMode,
}

impl TaskCommand {
    pub fn name(&self) -> String {
        match self {
            TaskCommand::Walk => "walk".into(),
            TaskCommand::Run => "run".into(),
            TaskCommand::Stop => "stop".into(),
            TaskCommand::Turn(TurnDirection::Left) => "turn-left".into(),
            TaskCommand::Turn(TurnDirection::Right) => "turn-right".into(),
            TaskCommand::PickUp(object) => format!("pickup {object}"),
            TaskCommand::AssistantMode => "assistant-mode".into(),
        }
    }

    pub fn is_motion(&self) -> bool {
        !matches!(self, TaskCommand::Stop | TaskCommand::AssistantMode)
    }
}

/// Stop signal shared between whoever issues commands and the executor.
#[derive(Clone, Debug, Default)]
pub struct InterruptFlag(Arc<AtomicBool>);

impl InterruptFlag {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn raise(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn clear(&self) {
        self.0.store(false, Ordering::SeqCst);
    }

    pub fn is_raised(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Repeat {
    Times(u32),
    UntilInterrupt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "reason", rename_all = "snake_case")]
pub enum TaskStatus {
    Completed,
    Interrupted,
    Faulted(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub status: TaskStatus,
    pub frames_emitted: u64,
    /// Simulated seconds from the first frame to the end of the last tick.
    pub elapsed: f64,
}

/// Frames a sequence produces when it runs to completion.
pub fn frames_for(seq: &GaitSequence, tick: f64, repeat: Repeat) -> Option<u64> {
    if seq.cyclic {
        match repeat {
            Repeat::Times(n) => Some((f64::from(n) * seq.period / tick).round() as u64),
            Repeat::UntilInterrupt => None,
        }
    } else {
        // includes the frame on the final keyframe
        Some((seq.period / tick + 1e-9).floor() as u64 + 1)
    }
}

/// A sequence being played back one frame per call to [`GaitRun::step`].
///
/// The caller advances the bus clock between steps, so the same stepper
/// serves both the blocking [`execute`] loop and the overseer's tick loop.
#[derive(Debug)]
pub struct GaitRun {
    seq: GaitSequence,
    channels: Vec<(String, u8)>,
    body: RobotBodyConfig,
    neutral: Vec<(u8, f64)>,
    tick: f64,
    total: Option<u64>,
    frames: u64,
    interrupt: InterruptFlag,
    outcome: Option<TaskOutcome>,
}

impl GaitRun {
    pub fn new(
        seq: GaitSequence,
        body: &RobotBodyConfig,
        params: &GaitParams,
        tick: f64,
        repeat: Repeat,
        interrupt: InterruptFlag,
    ) -> Result<Self, GaitError> {
        if !(tick > 0.0) {
            return Err(GaitError::InvalidParams("tick must be positive".into()));
        }
        seq.validate(body)?;
        let channels = seq
            .joint_names()
            .map(|j| (j.to_string(), body.servo(j).expect("validated").channel))
            .collect();
        let neutral = params
            .neutral_pose()
            .into_iter()
            .map(|(joint, angle)| {
                let spec = body
                    .servo(&joint)
                    .ok_or_else(|| GaitError::InvalidParams(format!("unknown joint {joint}")))?;
                Ok((spec.channel, angle_to_pulse(angle, spec)?))
            })
            .collect::<Result<Vec<_>, GaitError>>()?;
        Ok(GaitRun {
            total: frames_for(&seq, tick, repeat),
            seq,
            channels,
            body: body.clone(),
            neutral,
            tick,
            frames: 0,
            interrupt,
            outcome: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.seq.name
    }

    pub fn frames_emitted(&self) -> u64 {
        self.frames
    }

    pub fn outcome(&self) -> Option<&TaskOutcome> {
        self.outcome.as_ref()
    }

    fn finish(&mut self, status: TaskStatus) -> TaskOutcome {
        let outcome = TaskOutcome {
            status,
            frames_emitted: self.frames,
            elapsed: self.frames as f64 * self.tick,
        };
        self.outcome = Some(outcome.clone());
        outcome
    }

    fn frame_at(&self, t: f64) -> Result<Vec<(u8, f64)>, GaitError> {
        let targets = self.seq.sample(t);
        self.channels
            .iter()
            .map(|(joint, channel)| {
                let spec = self.body.by_channel(*channel).expect("validated");
                Ok((*channel, angle_to_pulse(targets[joint], spec)?))
            })
            .collect()
    }

    /// Issues the next frame for every joint. Returns the outcome once the
    /// run has ended; an interrupt costs exactly one more frame, the
    /// neutral stance.
    pub fn step(&mut self, bus: &mut dyn ServoBus) -> Option<TaskOutcome> {
        if let Some(done) = &self.outcome {
            return Some(done.clone());
        }
        if self.interrupt.is_raised() {
            let neutral = self.neutral.clone();
            self.frames += 1;
            let status = match bus.set_frame(&neutral) {
                Ok(()) => TaskStatus::Interrupted,
                Err(e) => TaskStatus::Faulted(e.to_string()),
            };
            return Some(self.finish(status));
        }
        let t = self.frames as f64 * self.tick;
        let issued = self
            .frame_at(t)
            .and_then(|frame| bus.set_frame(&frame).map_err(GaitError::from));
        if let Err(e) = issued {
            return Some(self.finish(TaskStatus::Faulted(e.to_string())));
        }
        self.frames += 1;
        if self.total.is_some_and(|total| self.frames >= total) {
            return Some(self.finish(TaskStatus::Completed));
        }
        None
    }
}

/// Plays `seq` on `bus` until it completes, faults or is interrupted,
/// advancing the bus clock by `tick` after every frame.
pub fn execute(
    seq: GaitSequence,
    body: &RobotBodyConfig,
    params: &GaitParams,
    bus: &mut dyn ServoBus,
    tick: f64,
    interrupt: &InterruptFlag,
    repeat: Repeat,
) -> Result<TaskOutcome, GaitError> {
    let mut run = GaitRun::new(seq, body, params, tick, repeat, interrupt.clone())?;
    loop {
        let outcome = run.step(bus);
        bus.tick(tick)?;
        if let Some(outcome) = outcome {
            return Ok(outcome);
        }
    }
}
