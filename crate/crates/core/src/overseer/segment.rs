//! Supervised worker threads behind request/reply channels.
//!
//! A segment fails when its thread panics or exits, or when a reply does
//! not arrive within the call timeout. Failures are returned as data; the
//! session turns them into events and schedules the restart.

use std::collections::VecDeque;
use std::panic;
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crossbeam_channel::{bounded, unbounded, Receiver, RecvTimeoutError, Sender};
use serde::{Deserialize, Serialize};

use super::{SegmentName, SegmentState, SegmentStatus};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RestartPolicy {
    /// Delay before the n-th restart within the window; the last entry repeats.
    pub backoff: Vec<f64>,
    pub max_restarts: usize,
    pub window: f64,
}

impl Default for RestartPolicy {
    fn default() -> Self {
        RestartPolicy {
            backoff: vec![0.5, 1.0, 2.0],
            max_restarts: 3,
            window: 60.0,
        }
    }
}

impl RestartPolicy {
    fn delay(&self, restarts_in_window: usize) -> f64 {
        self.backoff
            .get(restarts_in_window)
            .or(self.backoff.last())
            .copied()
            .unwrap_or(0.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    /// The worker thread panics.
    #[default]
    Panic,
    /// The worker stops replying.
    Hang,
}

/// Deliberate failure of one segment, for exercising supervision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub segment: SegmentName,
    /// 1-based call number on which the worker fails.
    #[serde(default)]
    pub on_call: Option<u64>,
    /// Session time at which the worker is killed, whether busy or not.
    #[serde(default)]
    pub at: Option<f64>,
    #[serde(default)]
    pub kind: FaultKind,
    /// Keep failing on every call from `on_call` onwards, across restarts.
    #[serde(default)]
    pub persistent: bool,
}

impl FaultSpec {
    pub fn validate(&self) -> Result<(), String> {
        match (self.on_call, self.at) {
            (Some(0), _) => Err("on_call is 1-based".into()),
            (Some(_), None) => Ok(()),
            (None, Some(t)) if t >= 0.0 && !self.persistent => Ok(()),
            (None, Some(_)) => Err("`at` faults must be non-negative and not persistent".into()),
            _ => Err(format!(
                "fault for {} needs exactly one of on_call or at",
                self.segment
            )),
        }
    }

    fn fires_on(&self, call: u64) -> bool {
        match self.on_call {
            Some(n) if self.persistent => call >= n,
            Some(n) => call == n,
            None => false,
        }
    }
}

/// Builds a fresh worker for each generation of a segment.
pub type WorkerFactory<Req, Resp> =
    Arc<dyn Fn(u32) -> Box<dyn FnMut(Req) -> Resp + Send> + Send + Sync>;

struct Job<Req, Resp> {
    request: Option<Req>,
    fault: Option<FaultKind>,
    reply: Sender<Resp>,
}

struct Worker<Req, Resp> {
    jobs: Sender<Job<Req, Resp>>,
    handle: JoinHandle<()>,
}

struct InjectedFault;

fn spawn_worker<Req, Resp>(
    name: SegmentName,
    generation: u32,
    factory: &WorkerFactory<Req, Resp>,
    hang_for: Duration,
) -> Worker<Req, Resp>
where
    Req: Send + 'static,
    Resp: Send + 'static,
{
    let (jobs, rx): (Sender<Job<Req, Resp>>, Receiver<Job<Req, Resp>>) = unbounded();
    let factory = Arc::clone(factory);
    let handle = thread::Builder::new()
        .name(format!("{name}-{generation}"))
        .spawn(move || {
            let mut work = factory(generation);
            for job in rx {
                match job.fault {
                    // resume_unwind skips the panic hook: injected faults stay quiet
                    Some(FaultKind::Panic) => panic::resume_unwind(Box::new(InjectedFault)),
                    Some(FaultKind::Hang) => {
                        thread::sleep(hang_for);
                        return;
                    }
                    None => {}
                }
                if let Some(request) = job.request {
                    let _ = job.reply.send(work(request));
                }
            }
        })
        .expect("spawn segment thread");
    Worker { jobs, handle }
}

fn panic_reason(payload: Box<dyn std::any::Any + Send>) -> String {
    if payload.is::<InjectedFault>() {
        "injected fault: worker panicked".into()
    } else if let Some(s) = payload.downcast_ref::<&str>() {
        format!("worker panicked: {s}")
    } else if let Some(s) = payload.downcast_ref::<String>() {
        format!("worker panicked: {s}")
    } else {
        "worker panicked".into()
    }
}

#[derive(Debug, PartialEq)]
pub enum CallError {
    /// Restarting or parked; no new failure.
    Unavailable,
    /// This call detected a new failure.
    Failed(String),
}

/// What changed during [`Segment::poll`].
#[derive(Debug, PartialEq)]
pub enum SegmentChange {
    Failed(String),
    Restarted(u32),
}

pub struct Segment<Req, Resp> {
    name: SegmentName,
    factory: WorkerFactory<Req, Resp>,
    worker: Option<Worker<Req, Resp>>,
    status: SegmentStatus,
    restart_count: u32,
    generation: u32,
    restarts: VecDeque<f64>,
    restart_at: Option<f64>,
    calls: u64,
    faults: Vec<FaultSpec>,
    fired_at: Vec<bool>,
    timeout: Duration,
    policy: RestartPolicy,
}

impl<Req, Resp> Segment<Req, Resp>
where
    Req: Send + 'static,
    Resp: Send + 'static,
{
    pub fn start(
        name: SegmentName,
        factory: WorkerFactory<Req, Resp>,
        faults: Vec<FaultSpec>,
        timeout: Duration,
        policy: RestartPolicy,
    ) -> Self {
        let faults: Vec<FaultSpec> = faults.into_iter().filter(|f| f.segment == name).collect();
        let worker = spawn_worker(name, 0, &factory, timeout * 2);
        Segment {
            name,
            factory,
            worker: Some(worker),
            status: SegmentStatus::Running,
            restart_count: 0,
            generation: 0,
            restarts: VecDeque::new(),
            restart_at: None,
            calls: 0,
            fired_at: vec![false; faults.len()],
            faults,
            timeout,
            policy,
        }
    }

    pub fn name(&self) -> SegmentName {
        self.name
    }

    pub fn state(&self) -> SegmentState {
        SegmentState {
            name: self.name,
            status: self.status.clone(),
            restart_count: self.restart_count,
        }
    }

    pub fn is_running(&self) -> bool {
        self.status == SegmentStatus::Running
    }

    /// Sends one request and waits for the reply.
    pub fn call(&mut self, request: Req, now: f64) -> Result<Resp, CallError> {
        let Some(worker) = self.worker.as_ref().filter(|_| self.is_running()) else {
            return Err(CallError::Unavailable);
        };
        self.calls += 1;
        let fault = self
            .faults
            .iter()
            .find(|f| f.fires_on(self.calls))
            .map(|f| f.kind);
        let (reply, replies) = bounded(1);
        let sent = worker.jobs.send(Job {
            request: Some(request),
            fault,
            reply,
        });
        if sent.is_err() {
            let reason = self.reap();
            return Err(CallError::Failed(self.fail(reason, now)));
        }
        match replies.recv_timeout(self.timeout) {
            Ok(resp) => Ok(resp),
            Err(RecvTimeoutError::Disconnected) => {
                let reason = self.reap();
                Err(CallError::Failed(self.fail(reason, now)))
            }
            Err(RecvTimeoutError::Timeout) => {
                // abandon the hung thread
                self.worker = None;
                let reason = format!("no reply within {} ms", self.timeout.as_millis());
                Err(CallError::Failed(self.fail(reason, now)))
            }
        }
    }

    /// Joins a worker known to be dead and explains why it stopped.
    fn reap(&mut self) -> String {
        match self.worker.take() {
            Some(w) => {
                drop(w.jobs);
                match w.handle.join() {
                    Err(payload) => panic_reason(payload),
                    Ok(()) => "worker exited".into(),
                }
            }
            None => "worker missing".into(),
        }
    }

    fn fail(&mut self, reason: String, now: f64) -> String {
        while self.restarts.front().is_some_and(|&t| now - t >= self.policy.window) {
            self.restarts.pop_front();
        }
        if self.restarts.len() >= self.policy.max_restarts {
            self.status = SegmentStatus::Failed(reason.clone());
            self.restart_at = None;
        } else {
            self.status = SegmentStatus::Restarting;
            self.restart_at = Some(now + self.policy.delay(self.restarts.len()));
        }
        reason
    }

    /// Liveness check, timed kills and due restarts.
    pub fn poll(&mut self, now: f64) -> Vec<SegmentChange> {
        let mut changes = Vec::new();
        if self.is_running() {
            let due = self
                .faults
                .iter()
                .zip(&self.fired_at)
                .position(|(f, fired)| !fired && f.at.is_some_and(|t| now >= t));
            if let Some(i) = due {
                self.fired_at[i] = true;
                if let Some(w) = &self.worker {
                    let (reply, _) = bounded(1);
                    let _ = w.jobs.send(Job {
                        request: None,
                        fault: Some(self.faults[i].kind),
                        reply,
                    });
                }
                let reason = match self.faults[i].kind {
                    FaultKind::Panic => self.reap(),
                    FaultKind::Hang => {
                        self.worker = None;
                        "worker stopped responding".into()
                    }
                };
                changes.push(SegmentChange::Failed(self.fail(reason, now)));
            } else if self.worker.as_ref().is_some_and(|w| w.handle.is_finished()) {
                let reason = self.reap();
                changes.push(SegmentChange::Failed(self.fail(reason, now)));
            }
        }
        if self.status == SegmentStatus::Restarting && self.restart_at.is_some_and(|t| now >= t) {
            self.generation += 1;
            self.worker = Some(spawn_worker(
                self.name,
                self.generation,
                &self.factory,
                self.timeout * 2,
            ));
            self.status = SegmentStatus::Running;
            self.restart_at = None;
            self.restarts.push_back(now);
            self.restart_count += 1;
            changes.push(SegmentChange::Restarted(self.restart_count));
        }
        changes
    }
}

impl<Req, Resp> Drop for Segment<Req, Resp> {
    fn drop(&mut self) {
        if let Some(w) = self.worker.take() {
            drop(w.jobs);
            let _ = w.handle.join();
        }
    }
}
