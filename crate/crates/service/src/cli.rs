//! `vgd` command line.

use std::fs;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use vgd_core::controller::{Controller, PhaseId, TimingPlan};
use vgd_core::intersection_db::Registry;
use vgd_core::ntcip::{mib::ObjectRegistry, Agent, Manager, ManagerConfig, DEFAULT_AGENT_PORT, DEFAULT_COMMUNITY};
use vgd_core::sim::{self, crossing_metrics, deviation_report, reference_points, Category, EventLog, GpsMode, Scenario};

use crate::http;
use crate::session::{SessionManager, SessionMode};

#[derive(Debug, Parser)]
#[command(name = "vgd", version, about = "Virtual guide dog simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Gps,
    Enhanced,
}

impl From<ModeArg> for GpsMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Gps => GpsMode::GpsOnly,
            ModeArg::Enhanced => GpsMode::Enhanced,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario to completion and write logs and reports.
    Run {
        /// Scenario file, or `builtin:<name>`.
        #[arg(long, default_value = "builtin:demo_crossing")]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// GPS calibration; replaces the scenario's bias table with the mode default.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Host interactive sessions over HTTP.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        /// Create one READY interactive session from this scenario at startup.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
    },
    /// Recompute deviation and crossing metrics from a saved event log.
    Report {
        #[arg(long)]
        log: PathBuf,
        /// Also write deviation.txt, deviation.csv and metrics.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check scenario, corpus and timing plan documents.
    Validate {
        #[arg(long)]
        scenario: Vec<String>,
        #[arg(long)]
        corpus: Vec<PathBuf>,
        #[arg(long)]
        plan: Vec<PathBuf>,
    },
    /// Run a free-standing controller with its UDP agent on the wall clock.
    Agent {
        #[arg(long, default_value_t = DEFAULT_AGENT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        /// Timing plan file; defaults to the desk plan.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long, default_value = "public")]
        community: String,
        /// Stop after this many seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Place one pedestrian call on an agent.
    Call {
        #[arg(long, default_value = "127.0.0.1:50161")]
        endpoint: String,
        #[arg(long)]
        phase: u32,
        #[arg(long, default_value = "public")]
        community: String,
        #[arg(long, default_value_t = 500)]
        timeout_ms: u64,
        #[arg(long, default_value_t = 3)]
        attempts: u32,
    },
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { scenario, seed, mode, out } => cmd_run(&scenario, seed, mode, &out),
        Command::Serve { port, bind, scenario, speed } => cmd_serve(&bind, port, scenario.as_deref(), speed),
        Command::Report { log, out } => cmd_report(&log, out.as_deref()),
        Command::Validate { scenario, corpus, plan } => cmd_validate(&scenario, &corpus, &plan),
        Command::Agent { port, bind, plan, community, duration } => {
            cmd_agent(&bind, port, plan.as_deref(), &community, duration)
        }
        Command::Call { endpoint, phase, community, timeout_ms, attempts } => {
            cmd_call(&endpoint, phase, &community, timeout_ms, attempts)
        }
    }
}

fn load_scenario(reference: &str, seed: Option<u64>, mode: Option<ModeArg>) -> Result<Scenario> {
    let mut s = Scenario::load(reference).with_context(|| format!("loading scenario {reference}"))?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if let Some(m) = mode {
        s.set_mode(m.into());
    }
    Ok(s)
}

/// Fixes as `t,label,true_distance_m,measured_distance_m,deviation_m`.
pub fn plot_csv(log: &EventLog) -> String {
    let mut s = String::from("t,label,true_distance_m,measured_distance_m,deviation_m\n");
    for r in log.of(Category::FixMeasured) {
        let p = &r.payload;
        let num = |k: &str| p[k].as_f64().map(|v| format!("{v:.4}")).unwrap_or_default();
        s.push_str(&format!(
            "{:.1},{},{},{},{}\n",
            r.t,
            p["label"].as_str().unwrap_or(""),
            num("true_distance_m"),
            num("measured_distance_m"),
            num("deviation_m")
        ));
    }
    s
}

fn write_reports(log: &EventLog, out: &Path) -> Result<serde_json::Value> {
    let deviation = deviation_report(log, &reference_points(log));
    let crossing = crossing_metrics(log);
    let end = log.metric("run_end").map(|r| r.payload.clone());
    let metrics = json!({ "deviation": deviation, "crossing": crossing, "run_end": end });
    fs::write(out.join("deviation.txt"), deviation.to_text())?;
    fs::write(out.join("deviation.csv"), deviation.to_csv())?;
    fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&metrics)? + "\n")?;
    Ok(metrics)
}

fn cmd_run(reference: &str, seed: Option<u64>, mode: Option<ModeArg>, out: &Path) -> Result<()> {
    let scenario = load_scenario(reference, seed, mode)?;
    let started = Instant::now();
    let run = sim::run(scenario)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("events.ndjson"), run.log.to_ndjson())?;
    fs::write(out.join("announcements.ndjson"), run.transcript())?;
    fs::write(out.join("plot.csv"), plot_csv(&run.log))?;
    write_reports(&run.log, out)?;
    println!("{}", deviation_report(&run.log, &reference_points(&run.log)).to_text().trim_end());
    for a in &run.announcements {
        println!("{:>8.1}  {:<17} {}", a.t, a.kind.to_string(), a.text);
    }
    println!(
        "finished: {:?} at t={:.1} s ({} records, {:.2} s wall) -> {}",
        run.finish,
        run.log.records().last().map_or(0.0, |r| r.t),
        run.log.len(),
        started.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

fn cmd_report(path: &Path, out: Option<&Path>) -> Result<()> {
    let log = EventLog::load_file(path)?;
    let deviation = deviation_report(&log, &reference_points(&log));
    println!("{}", deviation.to_text().trim_end());
    println!("{}", serde_json::to_string_pretty(&crossing_metrics(&log))?);
    if let Some(out) = out {
        fs::create_dir_all(out)?;
        write_reports(&log, out)?;
    }
    Ok(())
}

fn cmd_validate(scenarios: &[String], corpora: &[PathBuf], plans: &[PathBuf]) -> Result<()> {
    if scenarios.is_empty() && corpora.is_empty() && plans.is_empty() {
        bail!("nothing to validate; pass --scenario, --corpus or --plan");
    }
    let mut failures = 0;
    let mut report = |what: &str, name: &str, r: Result<String, String>| match r {
        Ok(detail) => println!("ok    {what} {name}: {detail}"),
        Err(e) => {
            failures += 1;
            println!("error {what} {name}: {e}");
        }
    };
    for s in scenarios {
        let r = Scenario::load(s)
            .map(|sc| format!("target {}, route {:.1} m", sc.target_intersection().id, sc.route_length_m()))
            .map_err(|e| e.to_string());
        report("scenario", s, r);
    }
    for c in corpora {
        let r = Registry::load_file(c).map(|reg| format!("{} intersections", reg.len())).map_err(|e| e.to_string());
        report("corpus", &c.display().to_string(), r);
    }
    for p in plans {
        let r = TimingPlan::load_file(p)
            .map(|plan| format!("{} phases, max cycle {:.1} s", plan.phases().len(), plan.max_cycle_ticks() as f64 * plan.tick_s()))
            .map_err(|e| e.to_string());
        report("plan", &p.display().to_string(), r);
    }
    if failures > 0 {
        bail!("{failures} document(s) failed validation");
    }
    Ok(())
}

fn cmd_serve(bind: &str, port: u16, scenario: Option<&str>, speed: f64) -> Result<()> {
    let manager = Arc::new(SessionManager::new());
    if let Some(reference) = scenario {
        let s = manager.create(load_scenario(reference, None, None)?, SessionMode::Interactive, speed)?;
        eprintln!("created session {} from {reference}", s.id);
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((bind, port)).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, http::router(manager)).await?;
        Ok(())
    })
}

fn cmd_agent(bind: &str, port: u16, plan: Option<&Path>, community: &str, duration: Option<f64>) -> Result<()> {
    let plan = match plan {
        Some(p) => TimingPlan::load_file(p)?,
        None => TimingPlan::desk_default(),
    };
    let tick = Duration::from_micros(plan.tick_us());
    let agent = Agent::bind((bind, port), ObjectRegistry::for_plan(&plan), community.as_bytes().to_vec())?;
    eprintln!("agent on udp {}", agent.local_addr()?);
    let mut ctl = Controller::new(plan);
    let start = Instant::now();
    let mut last = ctl.snapshot();
    loop {
        let due = start + tick * (ctl.state().ticks() as u32 + 1);
        while let Some(left) = due.checked_duration_since(Instant::now()) {
            if let Some(served) = agent.serve_one(&mut ctl, left.max(Duration::from_millis(1)))? {
                let req = served.request.map(|m| m.summary()).unwrap_or_else(|e| format!("undecodable: {e}"));
                eprintln!("{:>8.1}  {} {req}", start.elapsed().as_secs_f64(), served.from);
            }
        }
        ctl.tick();
        let now = ctl.snapshot();
        if !now.same_aspect(&last) {
            println!("{}", serde_json::to_string(&now)?);
            last = now;
        }
        if duration.is_some_and(|d| start.elapsed().as_secs_f64() >= d) {
            return Ok(());
        }
    }
}

fn cmd_call(endpoint: &str, phase: u32, community: &str, timeout_ms: u64, attempts: u32) -> Result<()> {
    let addr: SocketAddr = endpoint
        .to_socket_addrs()
        .with_context(|| format!("resolving {endpoint}"))?
        .next()
        .with_context(|| format!("no address for {endpoint}"))?;
    let Some(phase) = PhaseId::new(phase) else { bail!("phase must be at least 1") };
    if attempts == 0 || timeout_ms == 0 {
        bail!("attempts and timeout must be positive");
    }
    let config = ManagerConfig {
        community: if community.is_empty() { DEFAULT_COMMUNITY.to_vec() } else { community.as_bytes().to_vec() },
        timeout: Duration::from_millis(timeout_ms),
        attempts,
    };
    let mut m = Manager::connect(addr, config)?;
    let ack = m.place_call(phase)?;
    println!("call placed on phase {} (request {}, {} attempt(s))", phase.get(), ack.request_id, ack.attempts_used);
    Ok(())
}
