//! Fixed-step co-simulation of pedestrian, GPS, client, wire and controller.
//!
//! Each step advances the clock by one controller tick and runs, in order:
//! pedestrian kinematics (with exact reference-distance fixes), the
//! controller tick and signal feed to the client, the periodic GPS fix,
//! queued actions (pedestrian calls go over a loopback UDP socket pair and
//! complete within the step), the crossing policy, and the end check.

use std::collections::VecDeque;
use std::io;
use std::net::Ipv4Addr;
use std::time::Duration;

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::client::{Announcement, AnnouncementKind, AttitudeSample, CallFailure, Client, ClientConfig, Mode, PedCallPort};
use crate::controller::{Controller, PedIndication, PhaseId, SignalSnapshot};
use crate::geo::{self, GeoPoint, Heading};
use crate::ntcip::{Agent, ErrorStatus, Manager, ManagerConfig, NtcipMessage, ObjectRegistry, DEFAULT_COMMUNITY};

use super::gps::{GpsSensor, Measurement};
use super::log::{Category, EventLog};
use super::scenario::{Action, Scenario};

/// Announcements kept in a snapshot.
pub const ANNOUNCEMENT_WINDOW: usize = 20;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("wire setup failed: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineOptions {
    /// Keep running after the script is exhausted; only a completed
    /// crossing or the horizon ends the run.
    pub interactive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stage {
    Route,
    AtEnd,
    Crossing,
    Crossed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FinishReason {
    CrossingComplete,
    RouteComplete,
    Horizon,
}

#[derive(Debug, Clone)]
struct CrossState {
    start: GeoPoint,
    heading: Heading,
    length_m: f64,
    s: f64,
}

#[derive(Debug, Clone)]
struct Walker {
    route: Vec<GeoPoint>,
    cum: Vec<f64>,
    s: f64,
    walking: bool,
    stage: Stage,
    cross: Option<CrossState>,
}

impl Walker {
    fn new(route: &[GeoPoint]) -> Self {
        let mut cum = vec![0.0];
        for w in route.windows(2) {
            cum.push(cum.last().unwrap() + geo::distance(&w[0], &w[1]));
        }
        Walker { route: route.to_vec(), cum, s: 0.0, walking: true, stage: Stage::Route, cross: None }
    }

    fn total(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    fn route_point(&self, s: f64) -> GeoPoint {
        let s = s.clamp(0.0, self.total());
        let i = self.cum.partition_point(|&c| c <= s).clamp(1, self.route.len() - 1);
        let seg = self.cum[i] - self.cum[i - 1];
        let f = if seg > 0.0 { (s - self.cum[i - 1]) / seg } else { 1.0 };
        geo::interpolate(&self.route[i - 1], &self.route[i], f.clamp(0.0, 1.0))
    }

    fn position(&self) -> GeoPoint {
        match &self.cross {
            Some(c) => geo::destination(&c.start, c.heading, c.s.min(c.length_m)),
            None => self.route_point(self.s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PedestrianView {
    pub true_position: GeoPoint,
    pub true_distance_m: f64,
    pub measured_position: Option<GeoPoint>,
    pub measured_distance_m: Option<f64>,
    pub walking: bool,
    pub stage: Stage,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClientView {
    pub mode: Mode,
    pub target: Option<String>,
    pub selected_option: Option<usize>,
    pub selected_street: Option<String>,
    pub selected_phase: Option<PhaseId>,
}

/// Everything observable at one tick.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngineSnapshot {
    pub t: f64,
    pub tick: u64,
    pub signal: SignalSnapshot,
    pub pedestrian: PedestrianView,
    pub client: ClientView,
    pub announcements: Vec<Announcement>,
    pub finished: Option<FinishReason>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: EventLog,
    pub announcements: Vec<Announcement>,
    pub finish: FinishReason,
}

impl RunOutput {
    pub fn transcript(&self) -> String {
        self.announcements.iter().map(|a| a.to_json_line() + "\n").collect()
    }
}

#[derive(Debug)]
pub struct Engine {
    scenario: Scenario,
    options: EngineOptions,
    center: GeoPoint,
    ctl: Controller,
    client: Client,
    agent: Agent,
    manager: Manager,
    sensor: GpsSensor,
    log: EventLog,
    announcements: Vec<Announcement>,
    walker: Walker,
    ticks: u64,
    script_next: usize,
    pending: VecDeque<Action>,
    refs_hit: Vec<bool>,
    signal: SignalSnapshot,
    last_fix: Option<Measurement>,
    walk_start_t: Option<f64>,
    finished: Option<FinishReason>,
}

fn fix_payloads(m: &Measurement, truth: &GeoPoint, label: Option<&str>) -> (serde_json::Value, serde_json::Value) {
    let t = json!({
        "label": label,
        "lat": truth.lat_deg(),
        "lon": truth.lon_deg(),
        "distance_m": m.true_distance_m,
    });
    let mm = json!({
        "label": label,
        "lat": m.point.lat_deg(),
        "lon": m.point.lon_deg(),
        "true_distance_m": m.true_distance_m,
        "measured_distance_m": m.measured_distance_m,
        "bias_m": m.bias_m,
        "noise_m": m.noise_m,
        "deviation_m": m.deviation_m(),
    });
    (t, mm)
}

fn wire_payload(msg: &NtcipMessage, bytes: &[u8], attempt: u32) -> serde_json::Value {
    json!({
        "pdu": msg.pdu_type,
        "request_id": msg.request_id,
        "error_status": msg.error_status,
        "error_index": msg.error_index,
        "summary": msg.summary(),
        "hex": hex::encode(bytes),
        "attempt": attempt,
    })
}

/// Carries a pedestrian call across the loopback wire inside one step.
struct WirePort<'a> {
    manager: &'a mut Manager,
    agent: &'a Agent,
    ctl: &'a mut Controller,
    log: &'a mut EventLog,
    t: f64,
}

impl PedCallPort for WirePort<'_> {
    fn place_call(&mut self, phase: PhaseId) -> Result<(), CallFailure> {
        let fail = |e: &dyn std::fmt::Display| CallFailure { reason: e.to_string() };
        let req = self.manager.ped_call_request(phase);
        let cfg = self.manager.config().clone();
        for attempt in 1..=cfg.attempts {
            let bytes = self.manager.send(&req).map_err(|e| fail(&e))?;
            self.log.push(self.t, Category::WireTx, wire_payload(&req, &bytes, attempt));
            self.agent.serve_one(self.ctl, cfg.timeout).map_err(|e| fail(&e))?;
            if let Some((resp, bytes)) = self.manager.await_response(req.request_id, cfg.timeout).map_err(|e| fail(&e))? {
                self.log.push(self.t, Category::WireRx, wire_payload(&resp, &bytes, attempt));
                return match resp.error_status {
                    ErrorStatus::NoError => Ok(()),
                    status => Err(CallFailure { reason: format!("controller rejected the call: {status}") }),
                };
            }
        }
        Err(CallFailure { reason: format!("signal controller unreachable after {} attempts", cfg.attempts) })
    }
}

impl Engine {
    pub fn new(scenario: Scenario, options: EngineOptions) -> Result<Self, SimError> {
        let plan = scenario.plan.clone();
        let mut agent = Agent::bind((Ipv4Addr::LOCALHOST, 0), ObjectRegistry::for_plan(&plan), DEFAULT_COMMUNITY.to_vec())?;
        agent.set_drop_all(scenario.wire.drop_requests);
        let manager = Manager::connect(
            agent.local_addr()?,
            ManagerConfig {
                community: scenario.wire.community.as_bytes().to_vec(),
                timeout: Duration::from_millis(scenario.wire.timeout_ms),
                attempts: scenario.wire.attempts,
            },
        )?;
        let ctl = Controller::new(plan);
        let signal = ctl.snapshot();
        let center = scenario.target_intersection().center;
        let client = Client::new(ClientConfig { arrival_radius_m: scenario.arrival_radius_m, ..ClientConfig::default() });
        let sensor = GpsSensor::new(scenario.error_model.clone(), scenario.seed);
        let walker = Walker::new(&scenario.route);
        let refs_hit = vec![false; scenario.reference_points.len()];

        let mut e = Engine {
            scenario,
            options,
            center,
            ctl,
            client,
            agent,
            manager,
            sensor,
            log: EventLog::new(),
            announcements: vec![],
            walker,
            ticks: 0,
            script_next: 0,
            pending: VecDeque::new(),
            refs_hit,
            signal,
            last_fix: None,
            walk_start_t: None,
            finished: None,
        };
        e.log_start();
        Ok(e)
    }

    fn log_start(&mut self) {
        let s = &self.scenario;
        let plan = &s.plan;
        self.log.push(
            0.0,
            Category::Metric,
            json!({
                "name": "scenario_start",
                "scenario": s.name,
                "seed": s.seed,
                "intersection": s.target,
                "mode": s.error_model.mode,
                "noise_sigma": s.error_model.noise_sigma,
                "walk_speed": s.walk_speed,
                "route_length_m": self.walker.total(),
                "tick_s": plan.tick_s(),
                "fix_interval_s": s.fix_interval_s,
                "max_cycle_s": plan.max_cycle_ticks() as f64 * plan.tick_s(),
                "reference_points": s.reference_points,
            }),
        );
        self.log.push(0.0, Category::Signal, &self.signal);
        self.periodic_fix(0.0);
        let d0 = geo::distance(&self.center, &self.walker.position());
        for i in 0..self.refs_hit.len() {
            if (d0 - self.scenario.reference_points[i].distance).abs() <= 1e-6 {
                self.refs_hit[i] = true;
                let label = self.scenario.reference_points[i].label.clone();
                self.reference_fix(0.0, &self.walker.position(), &label);
            }
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn announcements(&self) -> &[Announcement] {
        &self.announcements
    }

    pub fn client(&self) -> &Client {
        &self.client
    }

    pub fn controller(&self) -> &Controller {
        &self.ctl
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn now_s(&self) -> f64 {
        self.secs(self.ticks)
    }

    pub fn finished(&self) -> Option<FinishReason> {
        self.finished
    }

    fn secs(&self, ticks: u64) -> f64 {
        (ticks * self.scenario.plan.tick_us()) as f64 / 1e6
    }

    /// Queues an action for the next step.
    pub fn submit(&mut self, action: Action) {
        self.pending.push_back(action);
    }

    pub fn snapshot(&self) -> EngineSnapshot {
        let st = self.client.state();
        let truth = self.walker.position();
        let skip = self.announcements.len().saturating_sub(ANNOUNCEMENT_WINDOW);
        EngineSnapshot {
            t: self.now_s(),
            tick: self.ticks,
            signal: self.signal.clone(),
            pedestrian: PedestrianView {
                true_position: truth,
                true_distance_m: geo::distance(&self.center, &truth),
                measured_position: self.last_fix.map(|m| m.point),
                measured_distance_m: self.last_fix.map(|m| m.measured_distance_m),
                walking: self.walker.walking,
                stage: self.walker.stage,
            },
            client: ClientView {
                mode: st.mode,
                target: st.target.as_ref().map(|x| x.id.clone()),
                selected_option: st.selection_index,
                selected_street: st.selected_leg.as_ref().map(|l| l.street_name.clone()),
                selected_phase: st.selected_leg.as_ref().map(|l| l.ped_phase),
            },
            announcements: self.announcements[skip..].to_vec(),
            finished: self.finished,
        }
    }

    fn announce(&mut self, out: Vec<Announcement>) {
        for a in out {
            if a.kind == AnnouncementKind::WalkStart && self.walk_start_t.is_none() {
                self.walk_start_t = Some(a.t);
            }
            self.log.push(a.t, Category::Announce, json!({ "kind": a.kind, "text": a.text, "payload": a.payload }));
            self.announcements.push(a);
        }
    }

    fn periodic_fix(&mut self, t: f64) {
        let truth = self.walker.position();
        let m = self.sensor.measure(&self.center, &truth);
        let (ft, fm) = fix_payloads(&m, &truth, None);
        self.log.push(t, Category::FixTrue, ft);
        self.log.push(t, Category::FixMeasured, fm);
        self.last_fix = Some(m);
        let out = self.client.on_location(t, &m.point, &self.scenario.registry);
        self.announce(out);
    }

    fn reference_fix(&mut self, t: f64, truth: &GeoPoint, label: &str) {
        let m = self.sensor.measure(&self.center, truth);
        let (ft, fm) = fix_payloads(&m, truth, Some(label));
        self.log.push(t, Category::FixTrue, ft);
        self.log.push(t, Category::FixMeasured, fm);
    }

    fn advance_walker(&mut self, t_prev: f64, t: f64) {
        if !self.walker.walking {
            return;
        }
        let v = self.scenario.walk_speed;
        let dt = t - t_prev;
        let time_at = |ds: f64| (t_prev + ds / v).clamp(t_prev, t);
        match self.walker.stage {
            Stage::Route => {
                let s0 = self.walker.s;
                let s1 = (s0 + v * dt).min(self.walker.total());
                let dist_at = |s: f64| geo::distance(&self.center, &self.walker.route_point(s));
                let mut hits = vec![];
                for (i, r) in self.scenario.reference_points.iter().enumerate() {
                    if self.refs_hit[i] || !(dist_at(s0) > r.distance && dist_at(s1) <= r.distance) {
                        continue;
                    }
                    let (mut lo, mut hi) = (s0, s1);
                    for _ in 0..80 {
                        let mid = 0.5 * (lo + hi);
                        if dist_at(mid) > r.distance {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let s = if (dist_at(lo) - r.distance).abs() < (dist_at(hi) - r.distance).abs() { lo } else { hi };
                    hits.push((time_at(s - s0), i, s));
                }
                hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                for (tt, i, s) in hits {
                    self.refs_hit[i] = true;
                    let label = self.scenario.reference_points[i].label.clone();
                    let p = self.walker.route_point(s);
                    self.reference_fix(tt, &p, &label);
                }
                self.walker.s = s1;
                if s1 >= self.walker.total() {
                    self.walker.stage = Stage::AtEnd;
                    let total = self.walker.total();
                    self.log.push(
                        time_at(total - s0),
                        Category::Metric,
                        json!({ "name": "route_complete", "route_length_m": total, "walking_s": total / v }),
                    );
                }
            }
            Stage::Crossing => {
                let c = self.walker.cross.as_mut().expect("crossing state");
                let s0 = c.s;
                c.s = (s0 + v * dt).min(c.length_m);
                if c.s >= c.length_m {
                    let length_m = c.length_m;
                    self.walker.stage = Stage::Crossed;
                    self.log.push(
                        time_at(length_m - s0),
                        Category::Metric,
                        json!({ "name": "crossing_complete", "length_m": length_m }),
                    );
                }
            }
            Stage::AtEnd | Stage::Crossed => {}
        }
    }

    fn start_crossing(&mut self, t: f64) {
        if matches!(self.walker.stage, Stage::Crossing | Stage::Crossed) {
            return;
        }
        let Some(leg) = self.client.state().selected_leg.clone() else { return };
        let ped = self.signal.ped(leg.ped_phase).unwrap_or(PedIndication::DontWalk);
        self.walker.cross = Some(CrossState {
            start: self.walker.position(),
            heading: leg.crossing_heading,
            length_m: leg.crossing_length_m,
            s: 0.0,
        });
        self.walker.stage = Stage::Crossing;
        self.walker.walking = true;
        self.log.push(
            t,
            Category::Metric,
            json!({
                "name": "crossing_start",
                "phase": leg.ped_phase,
                "street": leg.street_name,
                "ped": ped,
                "within_walk": ped == PedIndication::Walk,
            }),
        );
    }

    fn apply(&mut self, t: f64, action: Action) {
        match action {
            Action::ShortTap => {
                let out = self.client.on_short_tap(t).into_iter().collect();
                self.announce(out);
            }
            Action::LongTap => {
                let mut port = WirePort {
                    manager: &mut self.manager,
                    agent: &self.agent,
                    ctl: &mut self.ctl,
                    log: &mut self.log,
                    t,
                };
                let out = self.client.on_long_tap(t, &mut port);
                self.announce(out);
            }
            Action::WalkToggle => {
                self.walker.walking = !self.walker.walking;
                self.log.push(t, Category::Metric, json!({ "name": "walk_toggle", "walking": self.walker.walking }));
            }
            Action::StartCrossing => self.start_crossing(t),
            Action::Attitude { heading_deg, pitch_deg, roll_deg } => {
                let Ok(heading) = Heading::new(heading_deg) else { return };
                let out = self.client.on_attitude(t, &AttitudeSample { heading, pitch_deg, roll_deg });
                self.announce(out);
            }
        }
    }

    /// Advances one tick. Returns false once the run has finished.
    pub fn step(&mut self) -> bool {
        if self.finished.is_some() {
            return false;
        }
        let t_prev = self.now_s();
        self.ticks += 1;
        let t_us = self.ticks * self.scenario.plan.tick_us();
        let t = self.now_s();

        self.advance_walker(t_prev, t);

        self.ctl.tick();
        let snap = self.ctl.snapshot();
        if !snap.same_aspect(&self.signal) {
            self.log.push(t, Category::Signal, &snap);
        }
        self.signal = snap;
        let out = self.client.on_signal(t, &self.signal);
        self.announce(out);

        if t_us.is_multiple_of(self.scenario.fix_interval_us()) {
            self.periodic_fix(t);
        }

        while let Some(ev) = self.scenario.script.get(self.script_next) {
            if (ev.at_s * 1e6).round() as u64 > t_us {
                break;
            }
            let action = ev.action;
            self.script_next += 1;
            self.apply(t, action);
        }
        while let Some(action) = self.pending.pop_front() {
            self.apply(t, action);
        }

        if let (Some(policy), Some(w)) = (self.scenario.crossing, self.walk_start_t) {
            if t + 1e-9 >= w + policy.start_delay_s {
                self.start_crossing(t);
            }
        }

        self.finished = self.check_finished(t);
        if let Some(reason) = self.finished {
            self.log.push(t, Category::Metric, json!({ "name": "run_end", "reason": reason, "ticks": self.ticks }));
        }
        self.finished.is_none()
    }

    fn check_finished(&self, t: f64) -> Option<FinishReason> {
        let mode = self.client.mode();
        let busy = matches!(mode, Mode::CallPlaced | Mode::Crossing);
        if self.walker.stage == Stage::Crossed && !busy {
            return Some(FinishReason::CrossingComplete);
        }
        if t + 1e-9 >= self.scenario.horizon_s {
            return Some(FinishReason::Horizon);
        }
        let idle = self.script_next >= self.scenario.script.len() && self.pending.is_empty();
        if !self.options.interactive && self.walker.stage == Stage::AtEnd && idle && !busy {
            return Some(FinishReason::RouteComplete);
        }
        None
    }

    pub fn run_to_end(mut self) -> RunOutput {
        while self.step() {}
        RunOutput {
            finish: self.finished.expect("loop ends when finished"),
            log: self.log,
            announcements: self.announcements,
        }
    }
}

/// Runs a scripted scenario to completion.
pub fn run(scenario: Scenario) -> Result<RunOutput, SimError> {
    Ok(Engine::new(scenario, EngineOptions::default())?.run_to_end())
}
