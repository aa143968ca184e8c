//! Deterministic scenario engine and the reports computed from its logs.

pub mod engine;
pub mod gps;
pub mod log;
pub mod report;
pub mod scenario;

pub use engine::{run, Engine, EngineOptions, EngineSnapshot, FinishReason, RunOutput, SimError, Stage, ANNOUNCEMENT_WINDOW};
pub use gps::{BiasTable, GpsErrorModel, GpsMode, GpsSensor, Measurement};
pub use log::{Category, EventLog, LogError, Record};
pub use report::{crossing_metrics, deviation_report, reference_points, CrossingMetrics, DeviationReport, DeviationRow};
pub use scenario::{Action, CrossingPolicy, ReferencePoint, Scenario, ScenarioError, ScriptEvent, WireConfig, BUILTIN_SCENARIOS};
