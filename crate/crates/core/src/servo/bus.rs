use std::collections::HashSet;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{pulse_to_angle, RobotBodyConfig, ServoError};

pub const TRACE_HEADER: &str = "time,channel,pulse_commanded,pulse_effective,actual_angle";

/// How the PWM edge is timed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum JitterMode {
    /// DMA/hardware timed: the effective pulse is the commanded pulse.
    HardwareTimed,
    /// Bit-banged from a non-realtime thread: gaussian error on every pulse.
    SoftwareTimed { sigma_us: f64 },
}

impl JitterMode {
    pub fn sigma(self) -> f64 {
        match self {
            JitterMode::HardwareTimed => 0.0,
            JitterMode::SoftwareTimed { sigma_us } => sigma_us,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedServoState {
    pub channel: u8,
    pub commanded_angle: f64,
    pub actual_angle: f64,
    pub last_pulse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time: f64,
    pub channel: u8,
    pub pulse_commanded: f64,
    pub pulse_effective: f64,
    pub actual_angle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub name: String,
    pub commanded_angle: f64,
    pub actual_angle: f64,
    pub pulse: f64,
}

/// Whole-bus state at one instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServoSnapshot {
    pub time: f64,
    pub joints: Vec<JointState>,
}

pub trait ServoBus {
    fn set_pulse(&mut self, channel: u8, pulse: f64) -> Result<(), ServoError>;

    /// Issue one pulse per channel as a single frame.
    fn set_frame(&mut self, frame: &[(u8, f64)]) -> Result<(), ServoError> {
        frame.iter().try_for_each(|&(ch, p)| self.set_pulse(ch, p))
    }

    /// Advance simulated time by `dt` seconds.
    fn tick(&mut self, dt: f64) -> Result<(), ServoError>;

    fn now(&self) -> f64;
}

/// Simulated 50 Hz servo bus with a first-order, slew-limited plant.
#[derive(Debug)]
pub struct SimulatedBus {
    body: RobotBodyConfig,
    states: Vec<SimulatedServoState>,
    jitter: JitterMode,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
    time: f64,
    trace: Vec<TraceRow>,
    rejected: HashSet<u8>,
}

impl SimulatedBus {
    /// Starts every servo at rest at mid-range.
    pub fn new(body: RobotBodyConfig, jitter: JitterMode, seed: u64) -> Result<Self, ServoError> {
        body.validate()?;
        let noise = match jitter {
            JitterMode::HardwareTimed => None,
            JitterMode::SoftwareTimed { sigma_us } => Some(
                Normal::new(0.0, sigma_us)
                    .map_err(|e| ServoError::InvalidBody(format!("jitter sigma: {e}")))?,
            ),
        };
        let states = body
            .servos
            .iter()
            .map(|s| SimulatedServoState {
                channel: s.channel,
                commanded_angle: s.angle_range / 2.0,
                actual_angle: s.angle_range / 2.0,
                last_pulse: (s.min_pulse + s.max_pulse) / 2.0,
            })
            .collect();
        Ok(SimulatedBus {
            body,
            states,
            jitter,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
            time: 0.0,
            trace: Vec::new(),
            rejected: HashSet::new(),
        })
    }

    pub fn body(&self) -> &RobotBodyConfig {
        &self.body
    }

    pub fn jitter(&self) -> JitterMode {
        self.jitter
    }

    /// Fault injection: make every later write to `channel` fail.
    pub fn reject_channel(&mut self, channel: u8) {
        self.rejected.insert(channel);
    }

    pub fn states(&self) -> &[SimulatedServoState] {
        &self.states
    }

    pub fn state(&self, channel: u8) -> Option<&SimulatedServoState> {
        self.states.iter().find(|s| s.channel == channel)
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn snapshot(&self) -> ServoSnapshot {
        ServoSnapshot {
            time: self.time,
            joints: self
                .body
                .servos
                .iter()
                .zip(&self.states)
                .map(|(spec, st)| JointState {
                    name: spec.id.clone(),
                    commanded_angle: st.commanded_angle,
                    actual_angle: st.actual_angle,
                    pulse: st.last_pulse,
                })
                .collect(),
        }
    }

    /// Writes the trace as CSV ordered by (time, channel); returns the row
    /// count.
    pub fn export_trace(&self, path: impl AsRef<Path>) -> Result<usize, ServoError> {
        let path = path.as_ref();
        let io = |e: &dyn std::fmt::Display| ServoError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let mut rows: Vec<&TraceRow> = self.trace.iter().collect();
        rows.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.channel.cmp(&b.channel)));
        let mut writer = csv::Writer::from_path(path).map_err(|e| io(&e))?;
        if rows.is_empty() {
            writer
                .write_record(TRACE_HEADER.split(','))
                .map_err(|e| io(&e))?;
        }
        for row in &rows {
            writer.serialize(row).map_err(|e| io(&e))?;
        }
        writer.flush().map_err(|e| io(&e))?;
        Ok(rows.len())
    }

    fn index_of(&self, channel: u8) -> Result<usize, ServoError> {
        self.states
            .iter()
            .position(|s| s.channel == channel)
            .ok_or(ServoError::UnknownChannel(channel))
    }
}

impl ServoBus for SimulatedBus {
    fn set_pulse(&mut self, channel: u8, pulse: f64) -> Result<(), ServoError> {
        let index = self.index_of(channel)?;
        if self.rejected.contains(&channel) {
            return Err(ServoError::BusFault(format!("channel {channel} not acknowledging")));
        }
        let spec = &self.body.servos[index];
        let commanded_angle = pulse_to_angle(pulse, spec)?;
        let effective = match &self.noise {
            Some(n) => pulse + n.sample(&mut self.rng),
            None => pulse,
        };
        let state = &mut self.states[index];
        state.commanded_angle = commanded_angle;
        state.last_pulse = pulse;
        self.trace.push(TraceRow {
            time: self.time,
            channel,
            pulse_commanded: pulse,
            pulse_effective: effective,
            actual_angle: state.actual_angle,
        });
        Ok(())
    }

    fn tick(&mut self, dt: f64) -> Result<(), ServoError> {
        if !(dt > 0.0) {
            return Err(ServoError::InvalidTick(dt));
        }
        for (state, spec) in self.states.iter_mut().zip(&self.body.servos) {
            let max_step = spec.max_slew * dt;
            let error = state.commanded_angle - state.actual_angle;
            state.actual_angle += error.clamp(-max_step, max_step);
        }
        self.time += dt;
        Ok(())
    }

    fn now(&self) -> f64 {
        self.time
    }
}

/// Reads a trace CSV written by [`SimulatedBus::export_trace`].
pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRow>, ServoError> {
    let path = path.as_ref();
    let io = |e: csv::Error| ServoError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = csv::Reader::from_path(path).map_err(io)?;
    reader.deserialize().map(|r| r.map_err(io)).collect()
}

/// A [`SimulatedBus`] behind a mutex, shared between the executor and
/// snapshot readers. Only one [`BusToken`] can be held at a time.
#[derive(Clone, Debug)]
pub struct SharedBus {
    inner: Arc<Mutex<SimulatedBus>>,
    owned: Arc<AtomicBool>,
}

/// Exclusive right to drive the bus; released on drop.
#[derive(Debug)]
pub struct BusToken {
    owned: Arc<AtomicBool>,
}

impl Drop for BusToken {
    fn drop(&mut self) {
        self.owned.store(false, Ordering::Release);
    }
}

impl SharedBus {
    pub fn new(bus: SimulatedBus) -> Self {
        SharedBus {
            inner: Arc::new(Mutex::new(bus)),
            owned: Arc::new(AtomicBool::new(false)),
        }
    }

    pub fn try_acquire(&self) -> Option<BusToken> {
        self.owned
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .ok()
            .map(|_| BusToken {
                owned: Arc::clone(&self.owned),
            })
    }

    pub fn is_owned(&self) -> bool {
        self.owned.load(Ordering::Acquire)
    }

    pub fn lock(&self) -> MutexGuard<'_, SimulatedBus> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn snapshot(&self) -> ServoSnapshot {
        self.lock().snapshot()
    }
}

impl ServoBus for SharedBus {
    fn set_pulse(&mut self, channel: u8, pulse: f64) -> Result<(), ServoError> {
        self.lock().set_pulse(channel, pulse)
    }

    fn set_frame(&mut self, frame: &[(u8, f64)]) -> Result<(), ServoError> {
        let mut bus = self.lock();
        frame.iter().try_for_each(|&(ch, p)| bus.set_pulse(ch, p))
    }

    fn tick(&mut self, dt: f64) -> Result<(), ServoError> {
        self.lock().tick(dt)
    }

    fn now(&self) -> f64 {
        self.lock().now()
    }
}
