//! Scenario files.
//!
//! ```toml
//! name = "deviation-approach"
//! corpus = "builtin:field_site"      # or a path relative to this file
//! plan = "builtin:desk_plan"
//! target = "central-lock"            # default: intersection nearest the route end
//! seed = 7
//! fix_interval = 1.0                 # s, whole ticks, >= tick
//! walk_speed = 1.2                   # m/s
//! horizon = 120.0                    # s of simulated time
//! route = [{ lat = 40.7423, lon = -74.1792 }, { lat = 40.7425, lon = -74.1786 }]
//! reference_points = [{ label = "start", distance = 58.5 }]
//!
//! [error_model]
//! mode = "ENHANCED"                  # or GPS_ONLY
//! noise_sigma = 0.0
//! bias = [[58.5, -18.0], [12.0, -3.3]]   # optional, default per mode
//!
//! [[script]]
//! at = 60.0
//! action = "short_tap"               # long_tap, walk_toggle, start_crossing, attitude
//!
//! [crossing]
//! start_delay = 1.0                  # s after WALK_START
//!
//! [wire]
//! timeout_ms = 500
//! attempts = 3
//! drop_requests = false              # agent ignores every request
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{PlanError, TimingPlan};
use crate::geo::{self, GeoPoint, Heading};
use crate::intersection_db::{CorpusError, Intersection, LatLon, Registry};
use crate::ntcip::DEFAULT_COMMUNITY;
use crate::toml_util::{self, SchemaError};

use super::gps::{BiasTable, GpsErrorModel, GpsMode};

const FIELD_SITE: &str = include_str!("../../assets/field_site.toml");
const DESK_PLAN: &str = include_str!("../../assets/desk_plan.toml");

/// Scenarios bundled with the library, by name.
pub const BUILTIN_SCENARIOS: &[(&str, &str)] = &[
    ("deviation_approach", include_str!("../../assets/scenarios/deviation_approach.toml")),
    ("approach_600m", include_str!("../../assets/scenarios/approach_600m.toml")),
    ("demo_crossing", include_str!("../../assets/scenarios/demo_crossing.toml")),
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("reading scenario {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario schema error at {0}")]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown builtin '{0}'")]
    UnknownBuiltin(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    ShortTap,
    LongTap,
    /// Stops or resumes walking along the route.
    WalkToggle,
    StartCrossing,
    Attitude { heading_deg: f64, pitch_deg: f64, roll_deg: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScriptEvent {
    pub at_s: f64,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub label: String,
    /// True distance to the target intersection, m.
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingPolicy {
    pub start_delay_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WireConfig {
    pub community: String,
    pub timeout_ms: u64,
    pub attempts: u32,
    pub drop_requests: bool,
}

impl Default for WireConfig {
    fn default() -> Self {
        WireConfig {
            community: String::from_utf8(DEFAULT_COMMUNITY.to_vec()).expect("ascii"),
            timeout_ms: 500,
            attempts: 3,
            drop_requests: false,
        }
    }
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub registry: Registry,
    pub plan: TimingPlan,
    pub target: String,
    pub seed: u64,
    pub fix_interval_s: f64,
    pub walk_speed: f64,
    pub arrival_radius_m: f64,
    pub horizon_s: f64,
    pub route: Vec<GeoPoint>,
    pub reference_points: Vec<ReferencePoint>,
    pub error_model: GpsErrorModel,
    /// Sorted by time; ties keep file order.
    pub script: Vec<ScriptEvent>,
    pub crossing: Option<CrossingPolicy>,
    pub wire: WireConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    name: String,
    corpus: String,
    plan: String,
    target: Option<String>,
    #[serde(default)]
    seed: u64,
    tick: Option<f64>,
    #[serde(default = "default_fix_interval")]
    fix_interval: f64,
    #[serde(default = "default_walk_speed")]
    walk_speed: f64,
    #[serde(default = "default_arrival_radius")]
    arrival_radius: f64,
    #[serde(default = "default_horizon")]
    horizon: f64,
    route: Vec<LatLon>,
    #[serde(default)]
    reference_points: Vec<ReferencePoint>,
    #[serde(default)]
    error_model: ErrorModelDoc,
    #[serde(default)]
    script: Vec<ScriptDoc>,
    crossing: Option<CrossingDoc>,
    #[serde(default)]
    wire: WireDoc,
}

fn default_fix_interval() -> f64 {
    1.0
}
fn default_walk_speed() -> f64 {
    1.2
}
fn default_arrival_radius() -> f64 {
    15.0
}
fn default_horizon() -> f64 {
    600.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ErrorModelDoc {
    mode: GpsMode,
    #[serde(default)]
    noise_sigma: f64,
    bias: Option<Vec<(f64, f64)>>,
}

impl Default for ErrorModelDoc {
    fn default() -> Self {
        ErrorModelDoc { mode: GpsMode::Enhanced, noise_sigma: 0.0, bias: Some(vec![(0.0, 0.0)]) }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ActionName {
    ShortTap,
    LongTap,
    WalkToggle,
    StartCrossing,
    Attitude,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptDoc {
    at: f64,
    action: ActionName,
    heading: Option<f64>,
    pitch: Option<f64>,
    roll: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CrossingDoc {
    #[serde(default)]
    start_delay: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct WireDoc {
    community: String,
    timeout_ms: u64,
    attempts: u32,
    drop_requests: bool,
}

impl Default for WireDoc {
    fn default() -> Self {
        let w = WireConfig::default();
        WireDoc { community: w.community, timeout_ms: w.timeout_ms, attempts: w.attempts, drop_requests: w.drop_requests }
    }
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })
}

fn resolve(reference: &str, base: Option<&Path>) -> PathBuf {
    let p = Path::new(reference);
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

fn load_corpus(reference: &str, base: Option<&Path>) -> Result<Registry, ScenarioError> {
    match reference.strip_prefix("builtin:") {
        Some("field_site") => Ok(Registry::load(FIELD_SITE)?),
        Some(other) => Err(ScenarioError::UnknownBuiltin(other.to_string())),
        None => Ok(Registry::load(&read(&resolve(reference, base))?)?),
    }
}

fn load_plan(reference: &str, base: Option<&Path>) -> Result<TimingPlan, ScenarioError> {
    match reference.strip_prefix("builtin:") {
        Some("desk_plan") => Ok(TimingPlan::load(DESK_PLAN)?),
        Some(other) => Err(ScenarioError::UnknownBuiltin(other.to_string())),
        None => Ok(TimingPlan::load(&read(&resolve(reference, base))?)?),
    }
}

fn positive(name: &str, v: f64) -> Result<f64, ScenarioError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be a positive number, got {v}")))
    }
}

impl Scenario {
    /// Parses and validates a scenario document. Relative corpus and plan
    /// paths resolve against `base_dir`, or the working directory.
    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<Self, ScenarioError> {
        let doc: ScenarioDoc = toml_util::parse(text)?;
        Scenario::from_doc(doc, base_dir)
    }

    pub fn load_file(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        Scenario::from_toml(&read(path)?, path.parent())
    }

    pub fn builtin(name: &str) -> Result<Self, ScenarioError> {
        let (_, text) = BUILTIN_SCENARIOS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| ScenarioError::UnknownBuiltin(name.to_string()))?;
        Scenario::from_toml(text, None)
    }

    /// A path, or `builtin:<name>`.
    pub fn load(reference: &str) -> Result<Self, ScenarioError> {
        match reference.strip_prefix("builtin:") {
            Some(name) => Scenario::builtin(name),
            None => Scenario::load_file(reference),
        }
    }

    fn from_doc(doc: ScenarioDoc, base: Option<&Path>) -> Result<Self, ScenarioError> {
        let registry = load_corpus(&doc.corpus, base)?;
        let plan = load_plan(&doc.plan, base)?;

        if let Some(tick) = doc.tick {
            if (tick - plan.tick_s()).abs() > 1e-12 {
                return Err(invalid(format!("tick {tick} s differs from the timing plan tick {} s", plan.tick_s())));
            }
        }
        let fix_interval_s = positive("fix_interval", doc.fix_interval)?;
        let tick_us = plan.tick_us() as f64;
        let fix_us = fix_interval_s * 1e6;
        if fix_us + 1e-6 < tick_us {
            return Err(invalid(format!("fix_interval {fix_interval_s} s is shorter than the tick {} s", plan.tick_s())));
        }
        if ((fix_us / tick_us).round() * tick_us - fix_us).abs() > 1e-3 {
            return Err(invalid(format!("fix_interval {fix_interval_s} s is not a whole number of ticks")));
        }
        let walk_speed = positive("walk_speed", doc.walk_speed)?;
        let arrival_radius_m = positive("arrival_radius", doc.arrival_radius)?;
        let horizon_s = positive("horizon", doc.horizon)?;

        if doc.route.len() < 2 {
            return Err(invalid(format!("route needs at least 2 waypoints, got {}", doc.route.len())));
        }
        let route = doc
            .route
            .iter()
            .enumerate()
            .map(|(i, p)| p.to_point(&format!("route[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;

        let target = match doc.target {
            Some(id) => {
                registry.get(&id).ok_or_else(|| invalid(format!("target '{id}' is not in the corpus")))?;
                id
            }
            None => registry
                .nearest_intersection(route.last().expect("route has >= 2 points"))
                .map_err(|_| invalid("corpus is empty, no target intersection"))?
                .0
                .id
                .clone(),
        };
        for x in registry.iter() {
            for leg in x.crossing_options() {
                plan.check_leg(leg.ped_phase, leg.crossing_length_m)
                    .map_err(|e| invalid(format!("intersection '{}', leg '{}': {e}", x.id, leg.street_name)))?;
            }
        }

        let mut labels = HashSet::new();
        for r in &doc.reference_points {
            positive(&format!("reference point '{}' distance", r.label), r.distance)?;
            if !labels.insert(r.label.as_str()) {
                return Err(invalid(format!("duplicate reference point label '{}'", r.label)));
            }
        }

        let em = doc.error_model;
        let table = em.bias.unwrap_or_else(|| em.mode.default_bias_table().to_vec());
        let error_model = BiasTable::new(table)
            .and_then(|t| GpsErrorModel::new(em.mode, t, em.noise_sigma))
            .map_err(|e| invalid(format!("error_model: {e}")))?;

        let mut script = Vec::with_capacity(doc.script.len());
        for (i, s) in doc.script.iter().enumerate() {
            if !s.at.is_finite() || s.at < 0.0 {
                return Err(invalid(format!("script[{i}].at must be >= 0, got {}", s.at)));
            }
            let attitude_fields = s.heading.is_some() || s.pitch.is_some() || s.roll.is_some();
            let action = match s.action {
                ActionName::Attitude => {
                    let heading = s.heading.ok_or_else(|| invalid(format!("script[{i}]: attitude needs heading")))?;
                    let h = Heading::new(heading).map_err(|e| invalid(format!("script[{i}]: {e}")))?;
                    let (pitch_deg, roll_deg) = (s.pitch.unwrap_or(0.0), s.roll.unwrap_or(0.0));
                    if !pitch_deg.is_finite() || !roll_deg.is_finite() {
                        return Err(invalid(format!("script[{i}]: pitch and roll must be finite")));
                    }
                    Action::Attitude { heading_deg: h.deg(), pitch_deg, roll_deg }
                }
                _ if attitude_fields => {
                    return Err(invalid(format!("script[{i}]: heading/pitch/roll only apply to attitude")))
                }
                ActionName::ShortTap => Action::ShortTap,
                ActionName::LongTap => Action::LongTap,
                ActionName::WalkToggle => Action::WalkToggle,
                ActionName::StartCrossing => Action::StartCrossing,
            };
            script.push(ScriptEvent { at_s: s.at, action });
        }
        script.sort_by(|a, b| a.at_s.total_cmp(&b.at_s));

        let crossing = match doc.crossing {
            Some(c) if !c.start_delay.is_finite() || c.start_delay < 0.0 => {
                return Err(invalid(format!("crossing.start_delay must be >= 0, got {}", c.start_delay)))
            }
            Some(c) => Some(CrossingPolicy { start_delay_s: c.start_delay }),
            None => None,
        };

        let w = doc.wire;
        if w.attempts == 0 || w.timeout_ms == 0 {
            return Err(invalid("wire.attempts and wire.timeout_ms must be >= 1"));
        }
        let wire = WireConfig {
            community: w.community,
            timeout_ms: w.timeout_ms,
            attempts: w.attempts,
            drop_requests: w.drop_requests,
        };

        Ok(Scenario {
            name: doc.name,
            registry,
            plan,
            target,
            seed: doc.seed,
            fix_interval_s,
            walk_speed,
            arrival_radius_m,
            horizon_s,
            route,
            reference_points: doc.reference_points,
            error_model,
            script,
            crossing,
            wire,
        })
    }

    pub fn target_intersection(&self) -> &Intersection {
        self.registry.get(&self.target).expect("target validated")
    }

    pub fn route_length_m(&self) -> f64 {
        self.route.windows(2).map(|w| geo::distance(&w[0], &w[1])).sum()
    }

    /// Replaces the error model with the calibrated table for `mode`,
    /// keeping the noise level.
    pub fn set_mode(&mut self, mode: GpsMode) {
        self.error_model = GpsErrorModel::calibrated(mode, self.error_model.noise_sigma).expect("sigma already validated");
    }

    pub fn fix_interval_us(&self) -> u64 {
        (self.fix_interval_s * 1e6).round() as u64
    }
}
