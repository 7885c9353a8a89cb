use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, TryRecvError};
use serde::Serialize;
use serde_json::json;

use super::{
    route, CallError, Mode, OverseerError, Route, RuntimeConfig, RuntimeEvent, Segment,
    SegmentChange, SegmentName, SessionMetrics, SupervisorStatus, TimedEvent, TranscriptSource,
    WorkerFactory,
};
use crate::assistant::{
    AssistantAnswer, Clock, FixedClock, KnowledgeFixture, ProviderChain, SystemClock,
};
use crate::gait::{
    plan, GaitRun, GaitSequence, InterruptFlag, Repeat, TaskCommand, TaskStatus,
};
use crate::gateway::{Broadcaster, GatewayServer, Published};
use crate::intent::{
    load_model, save_model, train, Chatbot, GrowthEntry, GrowthLog, IntentCorpus, Reply,
    TrainedModel,
};
use crate::servo::{BusToken, DotMatrixFrame, ServoBus, SharedBus, SimulatedBus, SimulatedDisplay};

/// Loads the configured model, or trains one from the corpus and saves it
/// when the file does not exist yet.
pub fn load_or_train_model(
    config: &RuntimeConfig,
    corpus: &IntentCorpus,
) -> Result<TrainedModel, OverseerError> {
    if config.model.exists() {
        let model = load_model(&config.model)?;
        model.check_corpus(corpus)?;
        return Ok(model);
    }
    log::info!(
        "no model at {}, training ({} epochs)",
        config.model.display(),
        config.training.epochs
    );
    let outcome = train(corpus, &config.training)?;
    if let Some(dir) = config.model.parent() {
        std::fs::create_dir_all(dir).map_err(|e| OverseerError::io(dir, e))?;
    }
    save_model(&outcome.model, &config.model)?;
    log::info!(
        "trained to {:.1}% accuracy, saved {}",
        outcome.final_accuracy() * 100.0,
        config.model.display()
    );
    Ok(outcome.model)
}

struct ChatOutput {
    reply: Reply,
    unmatched: Option<GrowthEntry>,
}

struct ActiveTask {
    name: String,
    run: GaitRun,
    until_interrupt: bool,
    _token: BusToken,
}

/// Requests a running session to end, as the "shutdown" command does.
#[derive(Clone, Debug, Default)]
pub struct ShutdownHandle(Arc<AtomicBool>);

impl ShutdownHandle {
    pub fn request(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_requested(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SessionReport {
    pub events: Vec<TimedEvent>,
    pub metrics: SessionMetrics,
    pub status: SupervisorStatus,
    pub duration: f64,
    pub trace_rows: usize,
}

/// One running robot: bus, display, segments and the active task.
pub struct Session {
    config: RuntimeConfig,
    bus: SharedBus,
    display: SimulatedDisplay,
    mode: Mode,
    metrics: SessionMetrics,
    events: Vec<TimedEvent>,
    speech: Segment<String, String>,
    chatbot: Segment<(String, f64), ChatOutput>,
    task_parser: Segment<TaskCommand, Result<GaitSequence, String>>,
    assistant: Segment<String, AssistantAnswer>,
    gateway: Segment<Published, usize>,
    outbox: VecDeque<Published>,
    active: Option<ActiveTask>,
    interrupt: InterruptFlag,
    growth: GrowthLog,
    error_log: Option<BufWriter<File>>,
    shutdown: ShutdownHandle,
    ticks: u64,
    idle_every: u64,
    last_status: Option<SupervisorStatus>,
    last_metrics: Option<SessionMetrics>,
    server: Option<GatewayServer>,
    observer: Option<Box<dyn FnMut(&TimedEvent) + Send>>,
}

fn create_parent(path: &Path) -> Result<(), OverseerError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| OverseerError::io(dir, e))
        }
        _ => Ok(()),
    }
}

impl Session {
    /// Builds a session from a validated config, loading (or training) the
    /// model and binding the console gateway if one is configured.
    pub fn new(config: RuntimeConfig) -> Result<Self, OverseerError> {
        config.validate()?;
        let corpus = match &config.intents {
            Some(path) => IntentCorpus::load(path)?,
            None => IntentCorpus::bundled(),
        };
        let model = load_or_train_model(&config, &corpus)?;
        Self::with_model(config, model, corpus)
    }

    /// Like [`Session::new`] with an already trained model.
    pub fn with_model(
        config: RuntimeConfig,
        model: TrainedModel,
        corpus: IntentCorpus,
    ) -> Result<Self, OverseerError> {
        config.validate()?;
        model.check_corpus(&corpus)?;
        let fixture = match &config.fixture {
            Some(path) => KnowledgeFixture::load(path)?,
            None => KnowledgeFixture::sample(),
        };
        let date = config.assistant_date()?;
        let bus = SharedBus::new(SimulatedBus::new(
            config.bus.body.clone(),
            config.bus.jitter,
            config.bus.seed,
        )?);

        let error_log = match &config.outputs.error_log {
            Some(path) => {
                create_parent(path)?;
                Some(BufWriter::new(
                    File::create(path).map_err(|e| OverseerError::io(path, e))?,
                ))
            }
            None => None,
        };

        let server = match &config.gateway {
            Some(addr) => Some(GatewayServer::bind(addr, config_summary(&config, &model))?),
            None => None,
        };
        let broadcaster = server.as_ref().map(GatewayServer::broadcaster);

        let timeout = Duration::from_millis(config.segment_timeout_ms);
        let start = |name, faults: &[_]| (name, faults.to_vec(), timeout, config.restart.clone());

        let speech: WorkerFactory<String, String> = Arc::new(|_| {
            Box::new(|text: String| text.split_whitespace().collect::<Vec<_>>().join(" "))
        });

        let model = Arc::new(model);
        let corpus = Arc::new(corpus);
        let chat_seed = config.chat_seed;
        let chatbot: WorkerFactory<(String, f64), ChatOutput> = Arc::new(move |generation| {
            let mut bot = Chatbot::new(
                (*model).clone(),
                (*corpus).clone(),
                chat_seed.wrapping_add(u64::from(generation)),
            )
            .expect("tag set checked when the session was built");
            Box::new(move |(text, time): (String, f64)| {
                let before = bot.growth_log().len();
                let reply = bot.respond(&text, time);
                let unmatched = (bot.growth_log().len() > before)
                    .then(|| bot.growth_log().entries().last().cloned())
                    .flatten();
                ChatOutput { reply, unmatched }
            })
        });

        let body = config.bus.body.clone();
        let params = config.gait.params.clone();
        let task_parser: WorkerFactory<TaskCommand, Result<GaitSequence, String>> =
            Arc::new(move |_| {
                let body = body.clone();
                let params = params.clone();
                Box::new(move |command: TaskCommand| match plan(&command, &params, &body) {
                    Ok(Some(seq)) => Ok(seq),
                    Ok(None) => Err(format!("{} has no motion", command.name())),
                    Err(e) => Err(e.to_string()),
                })
            });

        let fixture = Arc::new(fixture);
        let assistant: WorkerFactory<String, AssistantAnswer> = Arc::new(move |_| {
            let clock: Box<dyn Clock> = match date {
                Some(d) => Box::new(FixedClock(d)),
                None => Box::new(SystemClock),
            };
            let chain = ProviderChain::offline((*fixture).clone(), clock);
            Box::new(move |text: String| chain.ask(&text))
        });

        let gateway: WorkerFactory<Published, usize> = Arc::new(move |_| {
            let broadcaster: Option<Broadcaster> = broadcaster.clone();
            Box::new(move |msg: Published| broadcaster.as_ref().map_or(0, |b| b.broadcast(&msg)))
        });

        macro_rules! segment {
            ($name:expr, $factory:expr) => {{
                let (name, faults, timeout, policy) = start($name, &config.faults);
                Segment::start(name, $factory, faults, timeout, policy)
            }};
        }

        let idle_every = (1.0 / config.tick).ceil().max(1.0) as u64;
        let mut session = Session {
            speech: segment!(SegmentName::Speech, speech),
            chatbot: segment!(SegmentName::Chatbot, chatbot),
            task_parser: segment!(SegmentName::TaskParser, task_parser),
            assistant: segment!(SegmentName::Assistant, assistant),
            gateway: segment!(SegmentName::Gateway, gateway),
            config,
            bus,
            display: SimulatedDisplay::default(),
            mode: Mode::Normal,
            metrics: SessionMetrics::default(),
            events: Vec::new(),
            outbox: VecDeque::new(),
            active: None,
            interrupt: InterruptFlag::new(),
            growth: GrowthLog::default(),
            error_log,
            shutdown: ShutdownHandle::default(),
            ticks: 0,
            idle_every,
            last_status: None,
            last_metrics: None,
            server,
            observer: None,
        };
        session.show(DotMatrixFrame::neutral());
        session.outbox.push_back(Published::Servo(session.bus.snapshot()));
        session.publish_state();
        Ok(session)
    }

    /// Called with every event as it is emitted.
    pub fn set_observer(&mut self, observer: impl FnMut(&TimedEvent) + Send + 'static) {
        self.observer = Some(Box::new(observer));
    }

    pub fn config(&self) -> &RuntimeConfig {
        &self.config
    }

    /// Session time in seconds.
    pub fn now(&self) -> f64 {
        self.bus.now()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn metrics(&self) -> SessionMetrics {
        self.metrics
    }

    pub fn events(&self) -> &[TimedEvent] {
        &self.events
    }

    pub fn growth_log(&self) -> &GrowthLog {
        &self.growth
    }

    pub fn bus(&self) -> &SharedBus {
        &self.bus
    }

    pub fn display(&self) -> &SimulatedDisplay {
        &self.display
    }

    pub fn gateway(&self) -> Option<&GatewayServer> {
        self.server.as_ref()
    }

    pub fn shutdown_handle(&self) -> ShutdownHandle {
        self.shutdown.clone()
    }

    pub fn active_task(&self) -> Option<&str> {
        self.active.as_ref().map(|a| a.name.as_str())
    }

    pub fn is_busy(&self) -> bool {
        self.active.is_some()
    }

    pub fn status(&self) -> SupervisorStatus {
        SupervisorStatus {
            segments: vec![
                self.speech.state(),
                self.chatbot.state(),
                self.task_parser.state(),
                self.assistant.state(),
                self.gateway.state(),
            ],
            active_task: self.active_task().map(str::to_string),
        }
    }

    fn emit(&mut self, event: RuntimeEvent) {
        let at = self.now();
        if let RuntimeEvent::ErrorReport { .. } = &event {
            if let Some(log) = &mut self.error_log {
                let line = serde_json::to_string(&event).expect("events serialize");
                if let Err(e) = writeln!(log, "{line}").and_then(|_| log.flush()) {
                    log::error!("error log write failed: {e}");
                }
            }
        }
        log::debug!("{at:.2} {event:?}");
        self.outbox.push_back(Published::Event(event.clone()));
        let timed = TimedEvent { at, event };
        if let Some(observe) = &mut self.observer {
            observe(&timed);
        }
        self.events.push(timed);
    }

    fn notice(&mut self, text: impl Into<String>) {
        self.emit(RuntimeEvent::Notice { text: text.into() });
    }

    fn show(&mut self, frame: DotMatrixFrame) {
        if self.display.frames_shown() == 0 || self.display.current() != frame {
            self.display.show(frame);
            self.outbox.push_back(Published::Display(frame));
        }
    }

    fn segment_failed(&mut self, segment: SegmentName, reason: String) {
        log::warn!("segment {segment} failed: {reason}");
        let time = self.now();
        self.emit(RuntimeEvent::SegmentFailed {
            segment,
            reason: reason.clone(),
        });
        self.emit(RuntimeEvent::ErrorReport {
            segment,
            reason,
            time,
        });
        self.metrics.errors += 1;
        self.show(DotMatrixFrame::cross());
    }

    fn segment_changes(&mut self, segment: SegmentName, changes: Vec<SegmentChange>) {
        for change in changes {
            match change {
                SegmentChange::Failed(reason) => self.segment_failed(segment, reason),
                SegmentChange::Restarted(restart_count) => {
                    log::info!("segment {segment} restarted ({restart_count})");
                    self.emit(RuntimeEvent::SegmentRestarted {
                        segment,
                        restart_count,
                    });
                }
            }
        }
    }

    /// Runs one utterance through route and dispatch at the current time.
    pub fn handle_transcript(&mut self, raw: &str) {
        let now = self.now();
        let text = match self.speech.call(raw.to_string(), now) {
            Ok(text) => text,
            Err(e) => {
                if let CallError::Failed(reason) = e {
                    self.segment_failed(SegmentName::Speech, reason);
                }
                self.notice("Speech is unavailable; I did not catch that.");
                self.flush_outbox();
                return;
            }
        };
        if text.is_empty() {
            return;
        }
        self.emit(RuntimeEvent::Transcript { text: text.clone() });
        match route(&text, self.mode) {
            Route::Task(command) => {
                self.emit(RuntimeEvent::CommandDetected {
                    command: command.clone(),
                });
                self.dispatch_task(command);
            }
            Route::Chat => self.chat(text, now),
            Route::Assistant => self.ask_assistant(text, now),
            Route::ExitAssistant => {
                if self.mode == Mode::Assistant {
                    self.set_mode(Mode::Normal);
                } else {
                    self.notice("Assistant mode is not on.");
                }
            }
            Route::Shutdown => {
                self.notice("Shutting down.");
                self.shutdown.request();
                if self.active.is_some() {
                    self.interrupt.raise();
                }
            }
        }
        self.publish_state();
        self.flush_outbox();
    }

    fn set_mode(&mut self, mode: Mode) {
        if self.mode != mode {
            self.mode = mode;
            self.emit(RuntimeEvent::ModeChanged { mode });
        }
    }

    fn chat(&mut self, text: String, now: f64) {
        self.metrics.chatbot_turns += 1;
        match self.chatbot.call((text.clone(), now), now) {
            Ok(out) => {
                if let Some(entry) = out.unmatched {
                    self.growth.append(entry);
                }
                self.emit(RuntimeEvent::ChatTurn {
                    input: text,
                    reply: out.reply.text,
                    tag: out.reply.tag,
                    confidence: out.reply.confidence,
                });
            }
            Err(e) => {
                if let CallError::Failed(reason) = e {
                    self.segment_failed(SegmentName::Chatbot, reason);
                }
                self.notice("Chat is resting right now. Motor commands still work.");
            }
        }
    }

    fn ask_assistant(&mut self, text: String, now: f64) {
        self.metrics.assistant_queries += 1;
        match self.assistant.call(text.clone(), now) {
            Ok(answer) => self.emit(RuntimeEvent::AssistantAnswered {
                query: text,
                answer,
            }),
            Err(e) => {
                if let CallError::Failed(reason) = e {
                    self.segment_failed(SegmentName::Assistant, reason);
                }
                self.notice("The assistant is unavailable right now.");
            }
        }
    }

    fn dispatch_task(&mut self, command: TaskCommand) {
        let now = self.now();
        match &command {
            TaskCommand::Stop => {
                self.set_mode(Mode::Normal);
                if self.active.is_some() {
                    self.interrupt.raise();
                } else {
                    self.notice("Nothing to stop.");
                }
                return;
            }
            TaskCommand::AssistantMode => {
                self.set_mode(Mode::Assistant);
                return;
            }
            TaskCommand::Walk => self.metrics.walk += 1,
            TaskCommand::Run => self.metrics.run += 1,
            TaskCommand::Turn(_) => self.metrics.turn += 1,
            TaskCommand::PickUp(_) => self.metrics.pickup += 1,
        }
        self.set_mode(Mode::Normal);
        if let Some(active) = &self.active {
            let text = format!("Busy with {}; say stop first.", active.name);
            self.notice(text);
            return;
        }
        let seq = match self.task_parser.call(command.clone(), now) {
            Ok(Ok(seq)) => seq,
            Ok(Err(reason)) => {
                self.notice(format!("Cannot do that: {reason}"));
                return;
            }
            Err(e) => {
                if let CallError::Failed(reason) = e {
                    self.segment_failed(SegmentName::TaskParser, reason);
                }
                self.notice("The task parser is unavailable; command ignored.");
                return;
            }
        };
        let repeat = match command {
            TaskCommand::Walk | TaskCommand::Run => Repeat::UntilInterrupt,
            TaskCommand::Turn(_) => Repeat::Times(self.config.gait.turn_cycles),
            _ => Repeat::Times(1),
        };
        let Some(token) = self.bus.try_acquire() else {
            self.notice("The servo bus is in use.");
            return;
        };
        self.interrupt.clear();
        match GaitRun::new(
            seq,
            &self.config.bus.body,
            &self.config.gait.params,
            self.config.tick,
            repeat,
            self.interrupt.clone(),
        ) {
            Ok(run) => {
                let name = command.name();
                self.active = Some(ActiveTask {
                    name: name.clone(),
                    run,
                    until_interrupt: repeat == Repeat::UntilInterrupt,
                    _token: token,
                });
                self.emit(RuntimeEvent::TaskStarted { name });
                self.show(DotMatrixFrame::neutral());
            }
            Err(e) => self.notice(format!("Cannot do that: {e}")),
        }
    }

    /// Supervises segments, plays one frame of the active task and
    /// advances session time by one tick.
    pub fn tick(&mut self) -> Result<(), OverseerError> {
        let now = self.now();
        let changes = [
            (SegmentName::Speech, self.speech.poll(now)),
            (SegmentName::Chatbot, self.chatbot.poll(now)),
            (SegmentName::TaskParser, self.task_parser.poll(now)),
            (SegmentName::Assistant, self.assistant.poll(now)),
            (SegmentName::Gateway, self.gateway.poll(now)),
        ];
        for (segment, c) in changes {
            self.segment_changes(segment, c);
        }

        let outcome = self
            .active
            .as_mut()
            .and_then(|active| active.run.step(&mut self.bus));
        self.bus.tick(self.config.tick)?;
        self.ticks += 1;
        let running = self.active.is_some();
        if let Some(outcome) = outcome {
            let active = self.active.take().expect("outcome implies a task");
            self.interrupt.clear();
            let face = match &outcome.status {
                TaskStatus::Completed => DotMatrixFrame::smile(),
                TaskStatus::Interrupted => DotMatrixFrame::neutral(),
                TaskStatus::Faulted(_) => DotMatrixFrame::cross(),
            };
            self.emit(RuntimeEvent::TaskFinished {
                name: active.name,
                outcome,
            });
            self.show(face);
        }
        if running || self.ticks % self.idle_every == 0 {
            self.outbox.push_back(Published::Servo(self.bus.snapshot()));
        }
        self.publish_state();
        self.flush_outbox();
        Ok(())
    }

    fn publish_state(&mut self) {
        let status = self.status();
        if self.last_status.as_ref() != Some(&status) {
            self.outbox.push_back(Published::Supervisor(status.clone()));
            self.last_status = Some(status);
        }
        if self.last_metrics != Some(self.metrics) {
            self.outbox.push_back(Published::Metrics(self.metrics));
            self.last_metrics = Some(self.metrics);
        }
    }

    fn flush_outbox(&mut self) {
        while let Some(msg) = self.outbox.pop_front() {
            let now = self.now();
            match self.gateway.call(msg, now) {
                Ok(_) | Err(CallError::Unavailable) => {}
                Err(CallError::Failed(reason)) => self.segment_failed(SegmentName::Gateway, reason),
            }
        }
    }

    /// Interrupts a task that would otherwise run until told to stop.
    fn wind_down(&mut self) {
        if self.active.as_ref().is_some_and(|a| a.until_interrupt) {
            self.interrupt.raise();
        }
    }

    /// Writes the configured outputs and stops the gateway.
    pub fn finish(mut self) -> Result<SessionReport, OverseerError> {
        self.publish_state();
        self.flush_outbox();
        let outputs = self.config.outputs.clone();
        if let Some(path) = &outputs.metrics {
            create_parent(path)?;
            super::export_metrics(&self.metrics, path)?;
        }
        let trace_rows = match &outputs.trace {
            Some(path) => {
                create_parent(path)?;
                self.bus.lock().export_trace(path)?
            }
            None => self.bus.lock().trace().len(),
        };
        if let Some(path) = &outputs.growth_log {
            create_parent(path)?;
            self.growth
                .write_jsonl(path)
                .map_err(|e| OverseerError::io(path, e))?;
        }
        if let Some(path) = &outputs.events {
            create_parent(path)?;
            let mut out = String::new();
            for e in &self.events {
                out.push_str(&serde_json::to_string(e).expect("events serialize"));
                out.push('\n');
            }
            std::fs::write(path, out).map_err(|e| OverseerError::io(path, e))?;
        }
        if let Some(log) = &mut self.error_log {
            log.flush().map_err(|e| {
                OverseerError::io(outputs.error_log.as_deref().unwrap_or(Path::new("")), e)
            })?;
        }
        if let Some(server) = self.server.take() {
            server.shutdown();
        }
        Ok(SessionReport {
            status: self.status(),
            duration: self.now(),
            metrics: self.metrics,
            events: std::mem::take(&mut self.events),
            trace_rows,
        })
    }
}

fn config_summary(config: &RuntimeConfig, model: &TrainedModel) -> serde_json::Value {
    json!({
        "source": config.source,
        "tick": config.tick,
        "jitter": config.bus.jitter,
        "joints": config.bus.body.servos.iter().map(|s| s.id.clone()).collect::<Vec<_>>(),
        "segments": SegmentName::ALL,
        "tags": model.tags,
        "features": super::FEATURES,
    })
}

/// Feeds `source` through the session until it is exhausted or a shutdown
/// is requested, then writes outputs.
///
/// Script sources run in simulated time unless the config asks for
/// realtime; the session ends `script_gap` seconds after the last line.
/// When the source ends, a walk or run in progress is stopped and other
/// tasks are allowed to finish.
pub fn run_session(
    mut session: Session,
    source: TranscriptSource,
) -> Result<SessionReport, OverseerError> {
    let realtime = session.config.is_realtime();
    let tick = session.config.tick;
    let console: Option<Receiver<String>> = session.server.as_ref().map(GatewayServer::inbound);
    let (mut script, mut live, script_end) = match source {
        TranscriptSource::Script(lines) => {
            let end = lines.last().map_or(0.0, |l| l.at + session.config.script_gap);
            (VecDeque::from(lines), None, end)
        }
        TranscriptSource::Channel(rx) => (VecDeque::new(), Some(rx), f64::INFINITY),
    };
    let started = Instant::now();
    loop {
        let now = session.now();
        while script.front().is_some_and(|l| l.at <= now + 1e-9) {
            let line = script.pop_front().expect("checked");
            session.handle_transcript(&line.text);
        }
        let mut exhausted = live.is_none() && script.is_empty() && now + 1e-9 >= script_end;
        if let Some(rx) = &live {
            loop {
                match rx.try_recv() {
                    Ok(text) => session.handle_transcript(&text),
                    Err(TryRecvError::Empty) => break,
                    Err(TryRecvError::Disconnected) => {
                        exhausted = true;
                        break;
                    }
                }
            }
        }
        if exhausted {
            live = None;
        }
        if let Some(rx) = &console {
            while let Ok(text) = rx.try_recv() {
                session.handle_transcript(&text);
            }
        }
        if session.shutdown.is_requested() {
            if session.active.is_some() {
                session.interrupt.raise();
            }
        } else if exhausted {
            session.wind_down();
        }
        let ending = exhausted || session.shutdown.is_requested();
        if ending && !session.is_busy() {
            break;
        }
        session.tick()?;
        if realtime {
            let due = started + Duration::from_secs_f64(session.ticks as f64 * tick);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
    }
    session.finish()
}
