//! The guidance client: an event-driven state machine that turns location,
//! tap, attitude and signal events into spoken-style announcements and
//! pedestrian call requests.
//!
//! Modes only move forward within one approach:
//! `FAR -> APPROACHING -> AT_INTERSECTION -> CALL_PLACED -> CROSSING -> DONE`,
//! and go back to `FAR` only through [`Client::reset`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::controller::{PedIndication, PhaseId, SignalSnapshot};
use crate::geo::{self, GeoPoint, Heading, ProximityZone};
use crate::intersection_db::{CrossingLeg, Intersection, Registry};
use crate::ntcip::{Manager, ManagerError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientConfig {
    pub arrival_radius_m: f64,
    /// Compass readings are untrusted beyond this pitch or roll.
    pub tilt_limit_deg: f64,
    /// Heading errors at or below this are not announced.
    pub alignment_tolerance_deg: f64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig { arrival_radius_m: 15.0, tilt_limit_deg: 30.0, alignment_tolerance_deg: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Far,
    Approaching,
    AtIntersection,
    CallPlaced,
    Crossing,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AnnouncementKind {
    Distance,
    Arrival,
    Option,
    TurnGuidance,
    CallConfirmed,
    WalkStart,
    RemainingTime,
    ClearanceWarning,
    Error,
}

impl fmt::Display for AnnouncementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Payload {
    Distance { band: u32, meters: i64, intersection: String },
    Arrival { intersection: String, streets: Vec<String> },
    Option { index: usize, count: usize, street: String, heading_deg: f64, phase: PhaseId },
    TurnGuidance { target_heading_deg: f64, error_deg: Option<f64>, direction: Option<TurnDirection> },
    CallConfirmed { phase: PhaseId, street: String },
    WalkStart { phase: PhaseId, street: String },
    RemainingTime { seconds: u32 },
    ClearanceWarning { phase: PhaseId },
    Error { reason: String },
}

impl Payload {
    pub fn kind(&self) -> AnnouncementKind {
        match self {
            Payload::Distance { .. } => AnnouncementKind::Distance,
            Payload::Arrival { .. } => AnnouncementKind::Arrival,
            Payload::Option { .. } => AnnouncementKind::Option,
            Payload::TurnGuidance { .. } => AnnouncementKind::TurnGuidance,
            Payload::CallConfirmed { .. } => AnnouncementKind::CallConfirmed,
            Payload::WalkStart { .. } => AnnouncementKind::WalkStart,
            Payload::RemainingTime { .. } => AnnouncementKind::RemainingTime,
            Payload::ClearanceWarning { .. } => AnnouncementKind::ClearanceWarning,
            Payload::Error { .. } => AnnouncementKind::Error,
        }
    }
}

/// One thing the client would speak. Serialized as a line-delimited record
/// `{"t", "kind", "text", "payload"}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Announcement {
    pub t: f64,
    pub kind: AnnouncementKind,
    pub text: String,
    pub payload: Payload,
}

impl Announcement {
    fn new(t: f64, text: String, payload: Payload) -> Self {
        debug_assert!(!text.is_empty());
        Announcement { t, kind: payload.kind(), text, payload }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("announcement serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnDirection {
    Left,
    Right,
}

impl fmt::Display for TurnDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TurnDirection::Left => "left",
            TurnDirection::Right => "right",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttitudeSample {
    pub heading: Heading,
    pub pitch_deg: f64,
    pub roll_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Guidance {
    /// Phone tilted past the limit; the compass reading is not usable.
    Invalid,
    /// Within tolerance, nothing to say.
    Aligned,
    Turn { error_deg: f64, direction: TurnDirection },
}

impl fmt::Display for Guidance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Guidance::Invalid => f.write_str("compass unreliable"),
            Guidance::Aligned => f.write_str("aligned"),
            Guidance::Turn { error_deg, direction } => write!(f, "turn {direction} {:.0}°", error_deg.abs()),
        }
    }
}

pub fn heading_guidance(
    sample: &AttitudeSample,
    target: Heading,
    tilt_limit_deg: f64,
    tolerance_deg: f64,
) -> Guidance {
    if sample.pitch_deg.abs() > tilt_limit_deg || sample.roll_deg.abs() > tilt_limit_deg {
        return Guidance::Invalid;
    }
    let error_deg = geo::heading_error(sample.heading, target);
    if error_deg.abs() <= tolerance_deg {
        return Guidance::Aligned;
    }
    let direction = if error_deg > 0.0 { TurnDirection::Right } else { TurnDirection::Left };
    Guidance::Turn { error_deg, direction }
}

/// Why a pedestrian call could not be placed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallFailure {
    pub reason: String,
}

/// Whatever carries a pedestrian call to the controller.
pub trait PedCallPort {
    fn place_call(&mut self, phase: PhaseId) -> Result<(), CallFailure>;
}

impl PedCallPort for Manager {
    fn place_call(&mut self, phase: PhaseId) -> Result<(), CallFailure> {
        Manager::place_call(self, phase).map(drop).map_err(|e| CallFailure {
            reason: match e {
                ManagerError::Unreachable { .. } => "signal controller unreachable".to_string(),
                other => other.to_string(),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub mode: Mode,
    pub target: Option<Intersection>,
    pub announced_bands: BTreeSet<u32>,
    pub selection_index: Option<usize>,
    pub selected_leg: Option<CrossingLeg>,
    pub last_heading: Option<Heading>,
    pub tilt_valid: bool,
    last_remaining: Option<u32>,
    last_guidance: Option<i64>,
    clearance_warned: bool,
    // WALK must be seen to begin after the call; a WALK already running when
    // the call was acknowledged is not a safe start.
    saw_not_walk: bool,
    registry_error: bool,
}

impl Default for ClientState {
    fn default() -> Self {
        ClientState {
            mode: Mode::Far,
            target: None,
            announced_bands: BTreeSet::new(),
            selection_index: None,
            selected_leg: None,
            last_heading: None,
            tilt_valid: true,
            last_remaining: None,
            last_guidance: None,
            clearance_warned: false,
            saw_not_walk: false,
            registry_error: false,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Client {
    config: ClientConfig,
    state: ClientState,
}

fn heading_words(h: Heading) -> String {
    format!("{:.0} degrees {}", h.deg(), h.cardinal())
}

impl Client {
    pub fn new(config: ClientConfig) -> Self {
        Client { config, state: ClientState::default() }
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    pub fn state(&self) -> &ClientState {
        &self.state
    }

    pub fn mode(&self) -> Mode {
        self.state.mode
    }

    pub fn reset(&mut self) {
        self.state = ClientState::default();
    }

    pub fn on_location(&mut self, now: f64, fix: &GeoPoint, registry: &Registry) -> Vec<Announcement> {
        let (target, d) = match self.state.mode {
            Mode::Far => match registry.nearest_intersection(fix) {
                Ok((x, d)) => (x.clone(), d),
                Err(e) => {
                    if self.state.registry_error {
                        return vec![];
                    }
                    self.state.registry_error = true;
                    return vec![Announcement::new(
                        now,
                        "No intersection data available.".into(),
                        Payload::Error { reason: e.to_string() },
                    )];
                }
            },
            Mode::Approaching => {
                let x = self.state.target.clone().expect("approaching implies a target");
                let d = geo::distance(fix, &x.center);
                (x, d)
            }
            _ => return vec![],
        };

        match geo::zone_of(d, self.config.arrival_radius_m) {
            ProximityZone::Far => vec![],
            ProximityZone::Band(band) => {
                self.state.mode = Mode::Approaching;
                let fire = self.state.announced_bands.first().is_none_or(|&lowest| band < lowest);
                let out = if fire {
                    self.state.announced_bands.insert(band);
                    let meters = d.round() as i64;
                    vec![Announcement::new(
                        now,
                        format!("{meters} meters to {}.", target.name),
                        Payload::Distance { band, meters, intersection: target.id.clone() },
                    )]
                } else {
                    vec![]
                };
                self.state.target = Some(target);
                out
            }
            ProximityZone::Arrived => {
                self.state.mode = Mode::AtIntersection;
                let streets: Vec<String> = target.street_names().iter().map(|s| s.to_string()).collect();
                let text = format!(
                    "Arrived at {}. Crossings: {}. Tap to hear crossing options.",
                    target.name,
                    streets.join(", ")
                );
                let a = Announcement::new(now, text, Payload::Arrival { intersection: target.id.clone(), streets });
                self.state.target = Some(target);
                vec![a]
            }
        }
    }

    /// Announces the next crossing option. The first tap announces option 0.
    pub fn on_short_tap(&mut self, now: f64) -> Option<Announcement> {
        if self.state.mode != Mode::AtIntersection {
            return None;
        }
        let target = self.state.target.as_ref()?;
        let legs = target.crossing_options();
        let index = match self.state.selection_index {
            None => 0,
            Some(i) => (i + 1) % legs.len(),
        };
        self.state.selection_index = Some(index);
        let leg = &legs[index];
        let text = format!(
            "Option {} of {}: cross {}, heading {}. Press and hold to request the crossing.",
            index + 1,
            legs.len(),
            leg.street_name,
            heading_words(leg.crossing_heading)
        );
        Some(Announcement::new(
            now,
            text,
            Payload::Option {
                index,
                count: legs.len(),
                street: leg.street_name.clone(),
                heading_deg: leg.crossing_heading.deg(),
                phase: leg.ped_phase,
            },
        ))
    }

    /// Places the call for the announced option. Ignored until an option has
    /// been announced.
    pub fn on_long_tap(&mut self, now: f64, port: &mut dyn PedCallPort) -> Vec<Announcement> {
        if self.state.mode != Mode::AtIntersection {
            return vec![];
        }
        let (Some(index), Some(target)) = (self.state.selection_index, self.state.target.as_ref()) else {
            return vec![];
        };
        let leg = target.crossing_options()[index].clone();
        match port.place_call(leg.ped_phase) {
            Ok(()) => {
                self.state.mode = Mode::CallPlaced;
                self.state.saw_not_walk = false;
                let confirmed = Announcement::new(
                    now,
                    format!("Crossing request placed for {}. Wait for the walk signal.", leg.street_name),
                    Payload::CallConfirmed { phase: leg.ped_phase, street: leg.street_name.clone() },
                );
                let turn = self.turn_announcement(now, leg.crossing_heading);
                self.state.selected_leg = Some(leg);
                vec![confirmed, turn]
            }
            Err(failure) => vec![Announcement::new(
                now,
                "Could not reach the signal controller. Press and hold to try again.".into(),
                Payload::Error { reason: failure.reason },
            )],
        }
    }

    fn turn_announcement(&mut self, now: f64, target: Heading) -> Announcement {
        let current = self.state.last_heading.filter(|_| self.state.tilt_valid);
        let (text, error_deg, direction) = match current {
            Some(h) => {
                let sample = AttitudeSample { heading: h, pitch_deg: 0.0, roll_deg: 0.0 };
                match heading_guidance(&sample, target, self.config.tilt_limit_deg, self.config.alignment_tolerance_deg) {
                    Guidance::Turn { error_deg, direction } => (
                        format!("Turn {direction} {:.0} degrees to face the crosswalk.", error_deg.abs()),
                        Some(error_deg),
                        Some(direction),
                    ),
                    _ => ("You are facing the crosswalk.".to_string(), Some(geo::heading_error(h, target)), None),
                }
            }
            None => (format!("Turn to heading {} to face the crosswalk.", heading_words(target)), None, None),
        };
        Announcement::new(now, text, Payload::TurnGuidance { target_heading_deg: target.deg(), error_deg, direction })
    }

    pub fn on_attitude(&mut self, now: f64, sample: &AttitudeSample) -> Vec<Announcement> {
        let g = match &self.state.selected_leg {
            Some(leg) => heading_guidance(sample, leg.crossing_heading, self.config.tilt_limit_deg, self.config.alignment_tolerance_deg),
            None => heading_guidance(sample, sample.heading, self.config.tilt_limit_deg, 0.0),
        };
        if g == Guidance::Invalid {
            let was_valid = self.state.tilt_valid;
            self.state.tilt_valid = false;
            self.state.last_guidance = None;
            if was_valid && self.state.selected_leg.is_some() {
                return vec![Announcement::new(
                    now,
                    "Hold the phone level; the compass reading is unreliable.".into(),
                    Payload::Error { reason: "tilt limit exceeded".into() },
                )];
            }
            return vec![];
        }
        self.state.tilt_valid = true;
        self.state.last_heading = Some(sample.heading);
        let Some(leg) = &self.state.selected_leg else { return vec![] };
        if !matches!(self.state.mode, Mode::CallPlaced | Mode::Crossing) {
            return vec![];
        }
        match g {
            Guidance::Turn { error_deg, direction } => {
                let rounded = error_deg.round() as i64;
                if self.state.last_guidance == Some(rounded) {
                    return vec![];
                }
                self.state.last_guidance = Some(rounded);
                vec![Announcement::new(
                    now,
                    format!("Turn {direction} {:.0} degrees to face the crosswalk.", error_deg.abs()),
                    Payload::TurnGuidance {
                        target_heading_deg: leg.crossing_heading.deg(),
                        error_deg: Some(error_deg),
                        direction: Some(direction),
                    },
                )]
            }
            _ => {
                self.state.last_guidance = None;
                vec![]
            }
        }
    }

    pub fn on_signal(&mut self, now: f64, snap: &SignalSnapshot) -> Vec<Announcement> {
        let Some(leg) = &self.state.selected_leg else { return vec![] };
        let phase = leg.ped_phase;
        let Some(ped) = snap.ped(phase) else { return vec![] };
        match self.state.mode {
            Mode::CallPlaced => {
                if ped != PedIndication::Walk {
                    self.state.saw_not_walk = true;
                    return vec![];
                }
                if !self.state.saw_not_walk {
                    return vec![];
                }
                self.state.mode = Mode::Crossing;
                let street = leg.street_name.clone();
                let seconds = whole_seconds(snap.remaining_walk);
                self.state.last_remaining = Some(seconds);
                vec![
                    Announcement::new(
                        now,
                        format!("Walk sign is on to cross {street}."),
                        Payload::WalkStart { phase, street },
                    ),
                    remaining(now, seconds),
                ]
            }
            Mode::Crossing => match ped {
                PedIndication::Walk => {
                    let seconds = whole_seconds(snap.remaining_walk);
                    if seconds == 0 || self.state.last_remaining == Some(seconds) {
                        return vec![];
                    }
                    self.state.last_remaining = Some(seconds);
                    vec![remaining(now, seconds)]
                }
                PedIndication::FlashingDontWalk => {
                    if self.state.clearance_warned {
                        return vec![];
                    }
                    self.state.clearance_warned = true;
                    vec![Announcement::new(
                        now,
                        "Walk time is over. Finish crossing; do not start.".into(),
                        Payload::ClearanceWarning { phase },
                    )]
                }
                PedIndication::DontWalk => {
                    self.state.mode = Mode::Done;
                    vec![]
                }
            },
            _ => vec![],
        }
    }
}

fn whole_seconds(s: f64) -> u32 {
    (s - 1e-9).ceil().max(0.0) as u32
}

fn remaining(now: f64, seconds: u32) -> Announcement {
    let unit = if seconds == 1 { "second" } else { "seconds" };
    Announcement::new(now, format!("{seconds} {unit} remaining."), Payload::RemainingTime { seconds })
}
