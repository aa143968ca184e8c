//! Simulation sessions. Each session owns one engine (one controller, one
//! client) and one stepping thread; every mutation goes through the
//! session's mutex, and readers get immutable snapshot copies.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use vgd_core::client::Announcement;
use vgd_core::sim::{Action, Engine, EngineOptions, EngineSnapshot, Scenario, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SessionMode {
    /// Free-running; the scenario script supplies the taps.
    Scripted,
    /// Paced by the wall clock times the speed factor; taps come from
    /// action requests.
    Interactive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Ready,
    Running,
    Paused,
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionKind {
    ShortTap,
    LongTap,
    WalkToggle,
    Reset,
}

#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("{0}")]
    Rejected(String),
    #[error("invalid speed factor {0}")]
    BadSpeed(f64),
    #[error("wire setup failed: {0}")]
    Setup(String),
}

impl From<SimError> for SessionError {
    fn from(e: SimError) -> Self {
        SessionError::Setup(e.to_string())
    }
}

/// One submitted action, as the service saw it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionRecord {
    pub kind: ActionKind,
    pub accepted: bool,
    /// Tick at which the request arrived; the action is applied on the next one.
    pub tick: u64,
    pub t: f64,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ack {
    pub accepted: bool,
    pub kind: ActionKind,
    pub tick: u64,
    pub status: Status,
}

/// Everything a poller sees, taken from a single tick.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSnapshot {
    pub id: String,
    pub scenario: String,
    pub mode: SessionMode,
    pub status: Status,
    pub speed: f64,
    #[serde(flatten)]
    pub engine: EngineSnapshot,
}

#[derive(Debug)]
struct Inner {
    scenario: Scenario,
    engine: Engine,
    status: Status,
    speed: f64,
    /// Wall-clock instant and tick count the interactive pace is measured from.
    anchor: Option<(Instant, u64)>,
    snapshot: Arc<SessionSnapshot>,
    actions: Vec<ActionRecord>,
}

#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub mode: SessionMode,
    inner: Mutex<Inner>,
    wake: Condvar,
    closed: AtomicBool,
}

fn engine_for(scenario: &Scenario, mode: SessionMode) -> Result<Engine, SessionError> {
    let opts = EngineOptions { interactive: mode == SessionMode::Interactive };
    Ok(Engine::new(scenario.clone(), opts)?)
}

impl Session {
    fn new(id: String, mut scenario: Scenario, mode: SessionMode, speed: f64) -> Result<Arc<Self>, SessionError> {
        check_speed(speed)?;
        if mode == SessionMode::Interactive {
            scenario.script.clear();
        }
        let engine = engine_for(&scenario, mode)?;
        let snapshot = Arc::new(SessionSnapshot {
            id: id.clone(),
            scenario: scenario.name.clone(),
            mode,
            status: Status::Ready,
            speed,
            engine: engine.snapshot(),
        });
        let inner = Inner { scenario, engine, status: Status::Ready, speed, anchor: None, snapshot, actions: vec![] };
        let s = Arc::new(Session { id, mode, inner: Mutex::new(inner), wake: Condvar::new(), closed: AtomicBool::new(false) });
        let runner = Arc::clone(&s);
        thread::Builder::new()
            .name(format!("session-{}", s.id))
            .spawn(move || runner.run_loop())
            .map_err(|e| SessionError::Setup(e.to_string()))?;
        Ok(s)
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn snapshot(&self) -> Arc<SessionSnapshot> {
        Arc::clone(&self.lock().snapshot)
    }

    pub fn status(&self) -> Status {
        self.lock().status
    }

    pub fn announcements(&self) -> Vec<Announcement> {
        self.lock().engine.announcements().to_vec()
    }

    pub fn log_ndjson(&self) -> String {
        self.lock().engine.log().to_ndjson()
    }

    pub fn actions(&self) -> Vec<ActionRecord> {
        self.lock().actions.clone()
    }

    /// Runs `f` against the engine and the snapshot published from it, with
    /// stepping held off.
    pub fn inspect<R>(&self, f: impl FnOnce(&Engine, &SessionSnapshot) -> R) -> R {
        let g = self.lock();
        f(&g.engine, &g.snapshot)
    }

    pub fn start(&self) -> Result<Status, SessionError> {
        let mut g = self.lock();
        match g.status {
            Status::Finished => return Err(SessionError::Rejected("session is finished; reset it first".into())),
            Status::Running => {}
            Status::Ready | Status::Paused => {
                g.status = Status::Running;
                g.anchor = Some((Instant::now(), g.engine.ticks()));
            }
        }
        publish(&self.id, self.mode, &mut g);
        self.wake.notify_all();
        Ok(g.status)
    }

    pub fn pause(&self) -> Result<Status, SessionError> {
        let mut g = self.lock();
        match g.status {
            Status::Finished => return Err(SessionError::Rejected("session is finished".into())),
            Status::Ready => return Err(SessionError::Rejected("session has not been started".into())),
            Status::Running | Status::Paused => {
                g.status = Status::Paused;
                g.anchor = None;
            }
        }
        publish(&self.id, self.mode, &mut g);
        Ok(g.status)
    }

    pub fn reset(&self) -> Result<Status, SessionError> {
        let mut g = self.lock();
        g.engine = engine_for(&g.scenario, self.mode)?;
        g.status = Status::Ready;
        g.anchor = None;
        g.actions.clear();
        publish(&self.id, self.mode, &mut g);
        self.wake.notify_all();
        Ok(g.status)
    }

    pub fn set_speed(&self, speed: f64) -> Result<f64, SessionError> {
        check_speed(speed)?;
        let mut g = self.lock();
        g.speed = speed;
        if g.status == Status::Running {
            g.anchor = Some((Instant::now(), g.engine.ticks()));
        }
        publish(&self.id, self.mode, &mut g);
        Ok(speed)
    }

    /// Queues a tap or walk toggle for the next tick, or resets.
    pub fn submit(&self, kind: ActionKind) -> Result<Ack, SessionError> {
        if kind == ActionKind::Reset {
            let status = self.reset()?;
            return Ok(Ack { accepted: true, kind, tick: 0, status });
        }
        let mut g = self.lock();
        let (tick, t) = (g.engine.ticks(), g.engine.now_s());
        let refusal = match g.status {
            Status::Running => None,
            Status::Finished => Some("session is finished"),
            Status::Ready => Some("session has not been started"),
            Status::Paused => Some("session is paused"),
        };
        if let Some(reason) = refusal {
            g.actions.push(ActionRecord { kind, accepted: false, tick, t, reason: Some(reason.into()) });
            return Err(SessionError::Rejected(format!("{kind:?} rejected: {reason}")));
        }
        g.engine.submit(match kind {
            ActionKind::ShortTap => Action::ShortTap,
            ActionKind::LongTap => Action::LongTap,
            ActionKind::WalkToggle => Action::WalkToggle,
            ActionKind::Reset => unreachable!("handled above"),
        });
        g.actions.push(ActionRecord { kind, accepted: true, tick, t, reason: None });
        self.wake.notify_all();
        Ok(Ack { accepted: true, kind, tick, status: g.status })
    }

    fn close(&self) {
        self.closed.store(true, Ordering::SeqCst);
        self.wake.notify_all();
    }

    fn step_locked(&self, g: &mut Inner) {
        g.engine.step();
        if g.engine.finished().is_some() {
            g.status = Status::Finished;
            g.anchor = None;
        }
        publish(&self.id, self.mode, g);
    }

    fn run_loop(&self) {
        const BATCH: usize = 200;
        let mut g = self.lock();
        while !self.closed.load(Ordering::SeqCst) {
            if g.status != Status::Running {
                g = self.wake.wait_timeout(g, Duration::from_millis(200)).unwrap_or_else(|p| p.into_inner()).0;
                continue;
            }
            match self.mode {
                SessionMode::Scripted => {
                    for _ in 0..BATCH {
                        self.step_locked(&mut g);
                        if g.status != Status::Running {
                            break;
                        }
                    }
                    drop(g);
                    thread::yield_now();
                    g = self.lock();
                }
                SessionMode::Interactive => {
                    let (start, base) = g.anchor.expect("running sessions have an anchor");
                    let tick_s = g.scenario.plan.tick_s();
                    let due = base + (start.elapsed().as_secs_f64() * g.speed / tick_s).floor() as u64;
                    while g.status == Status::Running && g.engine.ticks() < due {
                        self.step_locked(&mut g);
                    }
                    let next = start + Duration::from_secs_f64((g.engine.ticks() + 1 - base) as f64 * tick_s / g.speed);
                    let wait = next.saturating_duration_since(Instant::now()).max(Duration::from_micros(200));
                    g = self.wake.wait_timeout(g, wait).unwrap_or_else(|p| p.into_inner()).0;
                }
            }
        }
    }
}

fn check_speed(speed: f64) -> Result<(), SessionError> {
    if speed.is_finite() && speed > 0.0 && speed <= 1000.0 {
        Ok(())
    } else {
        Err(SessionError::BadSpeed(speed))
    }
}

fn publish(id: &str, mode: SessionMode, g: &mut Inner) {
    g.snapshot = Arc::new(SessionSnapshot {
        id: id.to_string(),
        scenario: g.scenario.name.clone(),
        mode,
        status: g.status,
        speed: g.speed,
        engine: g.engine.snapshot(),
    });
}

/// All live sessions, by id.
#[derive(Debug, Default)]
pub struct SessionManager {
    sessions: Mutex<BTreeMap<String, Arc<Session>>>,
    next: AtomicU64,
}

impl SessionManager {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn create(&self, scenario: Scenario, mode: SessionMode, speed: f64) -> Result<Arc<Session>, SessionError> {
        let n = self.next.fetch_add(1, Ordering::SeqCst) + 1;
        let id = format!("s{n}");
        let s = Session::new(id.clone(), scenario, mode, speed)?;
        self.sessions.lock().unwrap_or_else(|p| p.into_inner()).insert(id, Arc::clone(&s));
        Ok(s)
    }

    pub fn get(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions.lock().unwrap_or_else(|p| p.into_inner()).get(id).cloned()
    }

    pub fn ids(&self) -> Vec<String> {
        self.sessions.lock().unwrap_or_else(|p| p.into_inner()).keys().cloned().collect()
    }

    pub fn remove(&self, id: &str) -> bool {
        let s = self.sessions.lock().unwrap_or_else(|p| p.into_inner()).remove(id);
        match s {
            Some(s) => {
                s.close();
                true
            }
            None => false,
        }
    }
}

impl Drop for SessionManager {
    fn drop(&mut self) {
        for s in self.sessions.get_mut().unwrap_or_else(|p| p.into_inner()).values() {
            s.close();
        }
    }
}
