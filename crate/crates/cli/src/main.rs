use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::thread;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use crossbeam_channel::unbounded;
use deskbot_core::gait::{
    execute, plan, GaitParams, InterruptFlag, Repeat, TaskCommand, TurnDirection, DEFAULT_TICK,
};
use deskbot_core::intent::{
    count_parameters, load_model, save_model, train, Chatbot, IntentCorpus, TrainingConfig,
};
use deskbot_core::overseer::{
    load_script, run_session, RuntimeConfig, RuntimeEvent, Session, SourceSpec, TimedEvent,
    TranscriptSource,
};
use deskbot_core::servo::{JitterMode, RobotBodyConfig, SimulatedBus};
use deskbot_core::Parallelism;

#[derive(Parser)]
#[command(name = "deskbot", version, about = "Desk humanoid runtime: chatbot, gait and console")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the intent classifier and write a model file.
    Train {
        /// Intents corpus JSON; the bundled desk corpus when omitted.
        #[arg(long)]
        intents: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 5)]
        batch: usize,
        /// Compute per-sample gradients on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Chat with a trained model on stdin.
    Chat {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        intents: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Play a gait on the simulated bus and write the servo trace.
    Simulate {
        #[arg(long, value_enum)]
        gait: Gait,
        #[arg(long, default_value_t = 1)]
        cycles: u32,
        #[arg(long)]
        trace: PathBuf,
        /// Object for `--gait pickup`.
        #[arg(long, default_value = "something")]
        object: String,
        /// Software-timed PWM jitter in microseconds; 0 means hardware timed.
        #[arg(long, default_value_t = 0.0)]
        jitter_sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a session from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Serve the operator console on this address.
        #[arg(long)]
        serve: Option<String>,
        /// Replay this transcript script instead of the configured source.
        #[arg(long)]
        script: Option<PathBuf>,
    },
    /// Interactive session reading utterances from stdin.
    Repl {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Gait {
    Walk,
    Run,
    TurnLeft,
    TurnRight,
    Pickup,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Train {
            intents,
            out,
            seed,
            epochs,
            batch,
            sequential,
        } => cmd_train(intents, out, seed, epochs, batch, sequential),
        Command::Chat {
            model,
            intents,
            seed,
        } => cmd_chat(model, intents, seed),
        Command::Simulate {
            gait,
            cycles,
            trace,
            object,
            jitter_sigma,
            seed,
        } => cmd_simulate(gait, cycles, trace, object, jitter_sigma, seed),
        Command::Run {
            config,
            serve,
            script,
        } => cmd_run(config, serve, script, false),
        Command::Repl { config } => cmd_run(config, None, None, true),
    }
}

fn load_corpus(path: Option<PathBuf>) -> Result<IntentCorpus> {
    Ok(match path {
        Some(p) => IntentCorpus::load(&p).with_context(|| format!("loading {}", p.display()))?,
        None => IntentCorpus::bundled(),
    })
}

fn cmd_train(
    intents: Option<PathBuf>,
    out: PathBuf,
    seed: u64,
    epochs: usize,
    batch: usize,
    sequential: bool,
) -> Result<()> {
    let corpus = load_corpus(intents)?;
    let config = TrainingConfig {
        seed,
        epochs,
        batch_size: batch,
        parallelism: if sequential {
            Parallelism::Sequential
        } else {
            Parallelism::Parallel
        },
        ..TrainingConfig::default()
    };
    let started = std::time::Instant::now();
    let outcome = train(&corpus, &config)?;
    for stats in outcome.history.iter().filter(|s| (s.epoch + 1) % 20 == 0 || s.epoch == 0) {
        println!(
            "epoch {:>4}  loss {:.4}  accuracy {:.1}%",
            stats.epoch + 1,
            stats.loss,
            stats.accuracy * 100.0
        );
    }
    create_parent(&out)?;
    save_model(&outcome.model, &out)?;
    println!(
        "{} tags, vocabulary {}, {} parameters; training accuracy {:.1}% in {:.2?}; wrote {}",
        outcome.model.tags.len(),
        outcome.model.vocab.len(),
        count_parameters(outcome.model.vocab.len(), outcome.model.tags.len())?,
        outcome.final_accuracy() * 100.0,
        started.elapsed(),
        out.display()
    );
    Ok(())
}

fn cmd_chat(model: PathBuf, intents: Option<PathBuf>, seed: u64) -> Result<()> {
    let model = load_model(&model).with_context(|| format!("loading {}", model.display()))?;
    let mut bot = Chatbot::new(model, load_corpus(intents)?, seed)?;
    println!("Say something (Ctrl-D to leave).");
    let started = std::time::Instant::now();
    let stdin = io::stdin();
    for line in stdin.lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = bot.respond(&line, started.elapsed().as_secs_f64());
        match reply.tag {
            Some(tag) => println!("bot [{tag} {:.2}]: {}", reply.confidence, reply.text),
            None => println!("bot [? {:.2}]: {}", reply.confidence, reply.text),
        }
        io::stdout().flush()?;
    }
    Ok(())
}

fn cmd_simulate(
    gait: Gait,
    cycles: u32,
    trace: PathBuf,
    object: String,
    jitter_sigma: f64,
    seed: u64,
) -> Result<()> {
    if cycles == 0 {
        bail!("--cycles must be at least 1");
    }
    let body = RobotBodyConfig::default();
    let params = GaitParams::default();
    let command = match gait {
        Gait::Walk => TaskCommand::Walk,
        Gait::Run => TaskCommand::Run,
        Gait::TurnLeft => TaskCommand::Turn(TurnDirection::Left),
        Gait::TurnRight => TaskCommand::Turn(TurnDirection::Right),
        Gait::Pickup => TaskCommand::PickUp(object),
    };
    let seq = plan(&command, &params, &body)?.expect("motion commands have a sequence");
    let jitter = if jitter_sigma > 0.0 {
        JitterMode::SoftwareTimed {
            sigma_us: jitter_sigma,
        }
    } else {
        JitterMode::HardwareTimed
    };
    let mut bus = SimulatedBus::new(body.clone(), jitter, seed)?;
    let outcome = execute(
        seq,
        &body,
        &params,
        &mut bus,
        DEFAULT_TICK,
        &InterruptFlag::new(),
        Repeat::Times(cycles),
    )?;
    create_parent(&trace)?;
    let rows = bus.export_trace(&trace)?;
    println!(
        "{}: {:?} after {} frames ({:.2} s); {rows} trace rows written to {}",
        command.name(),
        outcome.status,
        outcome.frames_emitted,
        outcome.elapsed,
        trace.display()
    );
    Ok(())
}

fn print_event(e: &TimedEvent) {
    let line = match &e.event {
        RuntimeEvent::ChatTurn { reply, .. } => format!("bot: {reply}"),
        RuntimeEvent::AssistantAnswered { answer, .. } => format!("assistant: {}", answer.text),
        RuntimeEvent::Notice { text } => format!("({text})"),
        RuntimeEvent::TaskStarted { name } => format!("[{:>7.2}] started {name}", e.at),
        RuntimeEvent::TaskFinished { name, outcome } => format!(
            "[{:>7.2}] {name} finished: {:?} after {} frames",
            e.at, outcome.status, outcome.frames_emitted
        ),
        RuntimeEvent::ModeChanged { mode } => format!("(mode: {mode:?})"),
        RuntimeEvent::ErrorReport {
            segment, reason, ..
        } => format!("[{:>7.2}] error in {segment}: {reason}", e.at),
        RuntimeEvent::SegmentRestarted {
            segment,
            restart_count,
        } => format!("[{:>7.2}] {segment} restarted ({restart_count})", e.at),
        _ => return,
    };
    println!("{line}");
}

fn stdin_source() -> TranscriptSource {
    let (tx, rx) = unbounded();
    thread::spawn(move || {
        for line in io::stdin().lock().lines() {
            let Ok(line) = line else { break };
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    TranscriptSource::Channel(rx)
}

fn cmd_run(
    config_path: PathBuf,
    serve: Option<String>,
    script: Option<PathBuf>,
    repl: bool,
) -> Result<()> {
    let mut config = RuntimeConfig::load(&config_path)
        .with_context(|| format!("loading {}", config_path.display()))?;
    if let Some(addr) = serve {
        config.gateway = Some(addr);
        config.realtime.get_or_insert(true);
    }
    if let Some(script) = script {
        config.source = format!("script:{}", script.display());
    }
    if repl {
        config.source = "interactive".into();
    }
    let spec = config.source_spec()?;
    let gap = config.script_gap;
    let mut session = Session::new(config)?;
    session.set_observer(print_event);
    let source = match spec {
        SourceSpec::Script(path) => TranscriptSource::Script(
            load_script(&path, gap).with_context(|| format!("loading {}", path.display()))?,
        ),
        SourceSpec::Interactive => {
            println!("Listening (type commands or chat; Ctrl-D to end).");
            stdin_source()
        }
        SourceSpec::Gateway => match session.gateway() {
            Some(server) => {
                println!("Waiting for console commands on ws://{}", server.local_addr());
                TranscriptSource::Channel(server.inbound())
            }
            None => bail!("source \"gateway\" needs a gateway address (config or --serve)"),
        },
    };
    let report = run_session(session, source)?;
    let m = report.metrics;
    println!(
        "session ended at {:.2} s: chat {}, walk {}, run {}, turn {}, pickup {}, assistant {}, errors {}; {} trace rows",
        report.duration,
        m.chatbot_turns,
        m.walk,
        m.run,
        m.turn,
        m.pickup,
        m.assistant_queries,
        m.errors,
        report.trace_rows
    );
    Ok(())
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display())),
        _ => Ok(()),
    }
}
