//! Virtual actuated signal controller.
//!
//! Single-ring, sequential phases. Each phase runs GREEN, YELLOW, ALL_RED in
//! plan order. GREEN lasts `min_green` unless a pedestrian call was latched
//! on the phase before its green onset, in which case WALK starts at onset,
//! FLASHING_DONT_WALK follows for exactly `ped_clearance`, and GREEN is held
//! for `max(min_green, walk + ped_clearance)`. Calls that arrive after the
//! onset of their own phase wait for the next green of that phase.
//!
//! All time is counted in integer ticks so runs are bit-exact.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::toml_util::{self, SchemaError};

/// Assumed pedestrian walking speed for clearance checks, m/s.
pub const CLEARANCE_WALK_SPEED: f64 = 1.2;

/// Shortest WALK interval accepted, seconds.
pub const MIN_WALK_S: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhaseId(u32);

impl PhaseId {
    pub fn new(id: u32) -> Option<Self> {
        (id > 0).then_some(PhaseId(id))
    }

    /// Wraps a raw id without the non-zero check; callers validate later.
    pub(crate) fn new_unchecked(id: u32) -> Self {
        PhaseId(id)
    }

    pub fn get(&self) -> u32 {
        self.0
    }
}

impl fmt::Display for PhaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("reading timing plan {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("timing plan schema error at {0}")]
    Schema(#[from] SchemaError),
    #[error("invalid timing plan: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ControllerError {
    #[error("unknown phase {0}")]
    UnknownPhase(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub phase_id: u32,
    pub min_green: f64,
    pub max_green: f64,
    pub yellow: f64,
    pub all_red: f64,
    pub walk: f64,
    pub ped_clearance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PhaseTicks {
    min_green: u32,
    yellow: u32,
    all_red: u32,
    walk: u32,
    clearance: u32,
    max_green: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanDoc {
    tick: f64,
    phase: Vec<PhaseConfig>,
}

/// Validated timing plan.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingPlan {
    phases: Vec<PhaseConfig>,
    ticks: Vec<PhaseTicks>,
    tick_s: f64,
    tick_us: u64,
}

fn to_ticks(what: &str, seconds: f64, tick: f64) -> Result<u32, PlanError> {
    if !(seconds.is_finite() && seconds > 0.0) {
        return Err(PlanError::Invalid(format!("{what} must be > 0, got {seconds}")));
    }
    let n = seconds / tick;
    let rounded = n.round();
    if (n - rounded).abs() > 1e-6 || rounded < 1.0 || rounded > u32::MAX as f64 {
        return Err(PlanError::Invalid(format!(
            "{what} = {seconds} s is not a whole number of {tick} s ticks"
        )));
    }
    Ok(rounded as u32)
}

impl TimingPlan {
    pub fn new(phases: Vec<PhaseConfig>, tick_s: f64) -> Result<Self, PlanError> {
        if !(tick_s.is_finite() && tick_s > 0.0) {
            return Err(PlanError::Invalid(format!("tick must be > 0, got {tick_s}")));
        }
        let tick_us = (tick_s * 1e6).round();
        if tick_us < 1.0 || ((tick_us / 1e6) - tick_s).abs() > 1e-12 {
            return Err(PlanError::Invalid(format!("tick {tick_s} s is not a whole number of microseconds")));
        }
        if phases.len() < 2 {
            return Err(PlanError::Invalid(format!("needs at least 2 phases, has {}", phases.len())));
        }
        let mut ticks = Vec::with_capacity(phases.len());
        for (i, p) in phases.iter().enumerate() {
            let id = p.phase_id;
            if id == 0 {
                return Err(PlanError::Invalid("phase_id must be >= 1".into()));
            }
            if phases[..i].iter().any(|q| q.phase_id == id) {
                return Err(PlanError::Invalid(format!("duplicate phase_id {id}")));
            }
            let name = |field: &str| format!("phase {id} {field}");
            let t = PhaseTicks {
                min_green: to_ticks(&name("min_green"), p.min_green, tick_s)?,
                max_green: to_ticks(&name("max_green"), p.max_green, tick_s)?,
                yellow: to_ticks(&name("yellow"), p.yellow, tick_s)?,
                all_red: to_ticks(&name("all_red"), p.all_red, tick_s)?,
                walk: to_ticks(&name("walk"), p.walk, tick_s)?,
                clearance: to_ticks(&name("ped_clearance"), p.ped_clearance, tick_s)?,
            };
            if t.min_green > t.max_green {
                return Err(PlanError::Invalid(format!("phase {id}: min_green exceeds max_green")));
            }
            if p.walk < MIN_WALK_S {
                return Err(PlanError::Invalid(format!("phase {id}: walk must be >= {MIN_WALK_S} s")));
            }
            if t.walk + t.clearance > t.max_green {
                return Err(PlanError::Invalid(format!(
                    "phase {id}: walk + ped_clearance exceeds max_green"
                )));
            }
            ticks.push(t);
        }
        Ok(TimingPlan { phases, ticks, tick_s, tick_us: tick_us as u64 })
    }

    /// The desk default: two phases, 10/40 s green, 3 s yellow, 2 s all-red,
    /// 7 s walk, 11 s clearance, 0.1 s tick.
    pub fn desk_default() -> Self {
        TimingPlan::load(include_str!("../assets/desk_plan.toml")).expect("bundled plan is valid")
    }

    pub fn load(document: &str) -> Result<Self, PlanError> {
        let doc: PlanDoc = toml_util::parse(document)?;
        TimingPlan::new(doc.phase, doc.tick)
    }

    pub fn load_file(path: impl AsRef<Path>) -> Result<Self, PlanError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PlanError::Io {
            path: path.display().to_string(),
            source,
        })?;
        TimingPlan::load(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&PlanDoc { tick: self.tick_s, phase: self.phases.clone() })
            .expect("plan serializes")
    }

    pub fn tick_s(&self) -> f64 {
        self.tick_s
    }

    pub fn tick_us(&self) -> u64 {
        self.tick_us
    }

    pub fn phases(&self) -> &[PhaseConfig] {
        &self.phases
    }

    pub fn phase_ids(&self) -> impl Iterator<Item = PhaseId> + '_ {
        self.phases.iter().map(|p| PhaseId(p.phase_id))
    }

    pub fn index_of(&self, phase: PhaseId) -> Option<usize> {
        self.phases.iter().position(|p| p.phase_id == phase.0)
    }

    pub fn phase(&self, phase: PhaseId) -> Option<&PhaseConfig> {
        self.index_of(phase).map(|i| &self.phases[i])
    }

    /// Checks that the clearance interval of `phase` is long enough to walk
    /// `crossing_length_m` at [`CLEARANCE_WALK_SPEED`].
    pub fn check_leg(&self, phase: PhaseId, crossing_length_m: f64) -> Result<(), PlanError> {
        let cfg = self
            .phase(phase)
            .ok_or_else(|| PlanError::Invalid(format!("phase {phase} is not in the timing plan")))?;
        let needed = crossing_length_m / CLEARANCE_WALK_SPEED;
        if cfg.ped_clearance + 1e-9 < needed {
            return Err(PlanError::Invalid(format!(
                "phase {phase}: ped_clearance {} s is shorter than {needed:.2} s needed for a {crossing_length_m} m crossing",
                cfg.ped_clearance
            )));
        }
        Ok(())
    }

    /// Longest possible cycle in ticks: sum of max_green + yellow + all_red.
    pub fn max_cycle_ticks(&self) -> u64 {
        self.ticks
            .iter()
            .map(|t| (t.max_green + t.yellow + t.all_red) as u64)
            .sum()
    }

    pub(crate) fn seconds(&self, ticks: u64) -> f64 {
        (ticks * self.tick_us) as f64 / 1e6
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Interval {
    Green,
    Yellow,
    AllRed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PedIndication {
    DontWalk,
    FlashingDontWalk,
    Walk,
}

impl PedIndication {
    /// Wire enumeration: DONT_WALK = 0, FLASHING = 1, WALK = 2.
    pub fn code(&self) -> i32 {
        match self {
            PedIndication::DontWalk => 0,
            PedIndication::FlashingDontWalk => 1,
            PedIndication::Walk => 2,
        }
    }

    pub fn from_code(code: i32) -> Option<Self> {
        match code {
            0 => Some(PedIndication::DontWalk),
            1 => Some(PedIndication::FlashingDontWalk),
            2 => Some(PedIndication::Walk),
            _ => None,
        }
    }
}

/// Vehicle lamp shown by a phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Lamp {
    Green,
    Yellow,
    Red,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PedChannel {
    indication: PedIndication,
    latched: bool,
    walk_left: u32,
    clearance_left: u32,
}

impl PedChannel {
    const IDLE: PedChannel = PedChannel {
        indication: PedIndication::DontWalk,
        latched: false,
        walk_left: 0,
        clearance_left: 0,
    };
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllerState {
    now: u64,
    active: usize,
    interval: Interval,
    elapsed: u32,
    green_len: u32,
    peds: Vec<PedChannel>,
}

impl ControllerState {
    /// Green onset of the first phase at time zero with no calls.
    pub fn new(plan: &TimingPlan) -> Self {
        ControllerState {
            now: 0,
            active: 0,
            interval: Interval::Green,
            elapsed: 0,
            green_len: plan.ticks[0].min_green,
            peds: vec![PedChannel::IDLE; plan.phases.len()],
        }
    }

    /// Advances one fixed step.
    pub fn tick(&mut self, plan: &TimingPlan) {
        self.now += 1;
        self.elapsed += 1;

        let ped = &mut self.peds[self.active];
        match ped.indication {
            PedIndication::Walk => {
                ped.walk_left -= 1;
                if ped.walk_left == 0 {
                    ped.indication = PedIndication::FlashingDontWalk;
                    ped.clearance_left = plan.ticks[self.active].clearance;
                }
            }
            PedIndication::FlashingDontWalk => {
                ped.clearance_left -= 1;
                if ped.clearance_left == 0 {
                    ped.indication = PedIndication::DontWalk;
                }
            }
            PedIndication::DontWalk => {}
        }

        let t = plan.ticks[self.active];
        match self.interval {
            Interval::Green if self.elapsed >= self.green_len => {
                self.interval = Interval::Yellow;
                self.elapsed = 0;
            }
            Interval::Yellow if self.elapsed >= t.yellow => {
                self.interval = Interval::AllRed;
                self.elapsed = 0;
            }
            Interval::AllRed if self.elapsed >= t.all_red => {
                self.active = (self.active + 1) % plan.phases.len();
                self.begin_green(plan);
            }
            _ => {}
        }
    }

    fn begin_green(&mut self, plan: &TimingPlan) {
        let t = plan.ticks[self.active];
        self.interval = Interval::Green;
        self.elapsed = 0;
        let ped = &mut self.peds[self.active];
        if ped.latched {
            ped.latched = false;
            ped.indication = PedIndication::Walk;
            ped.walk_left = t.walk;
            self.green_len = t.min_green.max(t.walk + t.clearance);
        } else {
            self.green_len = t.min_green;
        }
    }

    /// Latches a pedestrian call. Idempotent; returns whether the latch was
    /// newly set.
    pub fn place_ped_call(&mut self, plan: &TimingPlan, phase: PhaseId) -> Result<bool, ControllerError> {
        let i = plan.index_of(phase).ok_or(ControllerError::UnknownPhase(phase.0))?;
        let was = self.peds[i].latched;
        self.peds[i].latched = true;
        Ok(!was)
    }

    pub fn ped_call_latched(&self, plan: &TimingPlan, phase: PhaseId) -> Option<bool> {
        plan.index_of(phase).map(|i| self.peds[i].latched)
    }

    pub fn ticks(&self) -> u64 {
        self.now
    }

    pub fn snapshot(&self, plan: &TimingPlan) -> SignalSnapshot {
        let active = &self.peds[self.active];
        let remaining_walk = if active.indication == PedIndication::Walk {
            plan.seconds(active.walk_left as u64)
        } else {
            0.0
        };
        SignalSnapshot {
            t: plan.seconds(self.now),
            active_phase: PhaseId(plan.phases[self.active].phase_id),
            interval: self.interval,
            peds: plan
                .phases
                .iter()
                .zip(&self.peds)
                .map(|(cfg, ch)| PhaseStatus {
                    phase: PhaseId(cfg.phase_id),
                    ped: ch.indication,
                    call: ch.latched,
                })
                .collect(),
            remaining_walk,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseStatus {
    pub phase: PhaseId,
    pub ped: PedIndication,
    pub call: bool,
}

/// Read-only projection of the controller at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSnapshot {
    pub t: f64,
    pub active_phase: PhaseId,
    pub interval: Interval,
    pub peds: Vec<PhaseStatus>,
    /// Seconds of WALK left on the active phase, 0 outside WALK.
    pub remaining_walk: f64,
}

impl SignalSnapshot {
    pub fn ped(&self, phase: PhaseId) -> Option<PedIndication> {
        self.peds.iter().find(|s| s.phase == phase).map(|s| s.ped)
    }

    pub fn lamp(&self, phase: PhaseId) -> Lamp {
        if phase != self.active_phase {
            return Lamp::Red;
        }
        match self.interval {
            Interval::Green => Lamp::Green,
            Interval::Yellow => Lamp::Yellow,
            Interval::AllRed => Lamp::Red,
        }
    }

    /// Same indications, ignoring the clock and countdown.
    pub fn same_aspect(&self, other: &SignalSnapshot) -> bool {
        self.active_phase == other.active_phase && self.interval == other.interval && self.peds == other.peds
    }
}

/// A controller owning its plan and state.
#[derive(Debug, Clone)]
pub struct Controller {
    plan: TimingPlan,
    state: ControllerState,
}

impl Controller {
    pub fn new(plan: TimingPlan) -> Self {
        let state = ControllerState::new(&plan);
        Controller { plan, state }
    }

    pub fn plan(&self) -> &TimingPlan {
        &self.plan
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn tick(&mut self) {
        self.state.tick(&self.plan);
    }

    pub fn place_ped_call(&mut self, phase: PhaseId) -> Result<bool, ControllerError> {
        self.state.place_ped_call(&self.plan, phase)
    }

    pub fn ped_call_latched(&self, phase: PhaseId) -> Option<bool> {
        self.state.ped_call_latched(&self.plan, phase)
    }

    pub fn snapshot(&self) -> SignalSnapshot {
        self.state.snapshot(&self.plan)
    }
}
