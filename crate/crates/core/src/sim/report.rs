//! Reports computed from an event log alone.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::log::{Category, EventLog, Record};
use super::scenario::ReferencePoint;

/// Unlabelled fixes further than this from a reference distance don't count.
const NEAREST_FIX_TOLERANCE_M: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub label: String,
    pub reference_distance_m: f64,
    pub t: Option<f64>,
    pub true_distance_m: Option<f64>,
    pub measured_distance_m: Option<f64>,
    /// measured - true; negative means closer than ground truth.
    pub deviation_m: Option<f64>,
    /// 100 * deviation / true.
    pub deviation_pct: Option<f64>,
    pub missing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub mode: String,
    pub rows: Vec<DeviationRow>,
}

fn f(v: &Value, key: &str) -> Option<f64> {
    v.get(key)?.as_f64()
}

/// Reference points and mode recorded at the start of the run.
pub fn reference_points(log: &EventLog) -> Vec<ReferencePoint> {
    log.metric("scenario_start")
        .and_then(|r| serde_json::from_value(r.payload["reference_points"].clone()).ok())
        .unwrap_or_default()
}

fn mode(log: &EventLog) -> String {
    log.metric("scenario_start")
        .and_then(|r| r.payload["mode"].as_str().map(str::to_string))
        .unwrap_or_else(|| "UNKNOWN".into())
}

/// Pairs true and measured distance at each reference point. A fix labelled
/// with the point's label wins; otherwise the fix (before the route ends)
/// whose true distance is nearest, if within a metre.
pub fn deviation_report(log: &EventLog, points: &[ReferencePoint]) -> DeviationReport {
    let route_end = log.metric("route_complete").map(|r| r.t).unwrap_or(f64::INFINITY);
    let fixes: Vec<&Record> = log.of(Category::FixMeasured).filter(|r| r.t <= route_end).collect();
    let rows = points
        .iter()
        .map(|rp| {
            let labelled = fixes.iter().find(|r| r.payload["label"].as_str() == Some(rp.label.as_str()));
            let chosen = labelled.copied().or_else(|| {
                fixes
                    .iter()
                    .filter_map(|r| Some((*r, (f(&r.payload, "true_distance_m")? - rp.distance).abs())))
                    .filter(|(_, gap)| *gap <= NEAREST_FIX_TOLERANCE_M)
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(r, _)| r)
            });
            match chosen {
                Some(r) => {
                    let truth = f(&r.payload, "true_distance_m").unwrap_or(f64::NAN);
                    let measured = f(&r.payload, "measured_distance_m").unwrap_or(f64::NAN);
                    let dev = measured - truth;
                    DeviationRow {
                        label: rp.label.clone(),
                        reference_distance_m: rp.distance,
                        t: Some(r.t),
                        true_distance_m: Some(truth),
                        measured_distance_m: Some(measured),
                        deviation_m: Some(dev),
                        deviation_pct: Some(100.0 * dev / truth),
                        missing: false,
                    }
                }
                None => DeviationRow {
                    label: rp.label.clone(),
                    reference_distance_m: rp.distance,
                    t: None,
                    true_distance_m: None,
                    measured_distance_m: None,
                    deviation_m: None,
                    deviation_pct: None,
                    missing: true,
                },
            }
        })
        .collect();
    DeviationReport { mode: mode(log), rows }
}

impl DeviationReport {
    pub fn row(&self, label: &str) -> Option<&DeviationRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("distance deviation, mode {}\n", self.mode);
        let _ = writeln!(s, "{:<8} {:>9} {:>11} {:>13} {:>10}", "point", "true m", "measured m", "deviation m", "dev %");
        for r in &self.rows {
            match (r.true_distance_m, r.measured_distance_m, r.deviation_m, r.deviation_pct) {
                (Some(t), Some(m), Some(d), Some(p)) => {
                    let _ = writeln!(s, "{:<8} {t:>9.2} {m:>11.2} {d:>13.2} {p:>10.2}", r.label);
                }
                _ => {
                    let _ = writeln!(s, "{:<8} {:>9.2} {:>11} {:>13} {:>10}", r.label, r.reference_distance_m, "missing", "-", "-");
                }
            }
        }
        s
    }

    /// `reference_point,mode,deviation_m,deviation_pct`; missing points
    /// have empty value columns.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("reference_point,mode,deviation_m,deviation_pct\n");
        for r in &self.rows {
            let cell = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{}", r.label, self.mode, cell(r.deviation_m), cell(r.deviation_pct));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingMetrics {
    /// Crossing started and finished within the run.
    pub complete: bool,
    pub arrival_t: Option<f64>,
    pub call_t: Option<f64>,
    pub walk_t: Option<f64>,
    pub crossing_start_t: Option<f64>,
    pub crossing_complete_t: Option<f64>,
    /// Arrival announcement to the far curb.
    pub crossing_cycle_s: Option<f64>,
    pub start_within_walk: Option<bool>,
    pub call_to_walk_latency_s: Option<f64>,
    pub max_cycle_s: Option<f64>,
}

pub fn crossing_metrics(log: &EventLog) -> CrossingMetrics {
    let first_announce = |kind: &str| log.records().iter().find(|r| r.announce_kind() == Some(kind));
    let arrival_t = first_announce("ARRIVAL").map(|r| r.t);
    let call = first_announce("CALL_CONFIRMED");
    let call_t = call.map(|r| r.t);
    let phase = call.and_then(|r| r.payload["payload"]["phase"].as_u64());
    let walk_t = match (call_t, phase) {
        (Some(ct), Some(p)) => log
            .of(Category::Signal)
            .filter(|r| r.t >= ct)
            .find(|r| {
                r.payload["peds"]
                    .as_array()
                    .is_some_and(|peds| peds.iter().any(|s| s["phase"].as_u64() == Some(p) && s["ped"] == "WALK"))
            })
            .map(|r| r.t),
        _ => None,
    };
    let start = log.metric("crossing_start");
    let done = log.metric("crossing_complete");
    let crossing_start_t = start.map(|r| r.t);
    let crossing_complete_t = done.map(|r| r.t);
    CrossingMetrics {
        complete: start.is_some() && done.is_some(),
        arrival_t,
        call_t,
        walk_t,
        crossing_start_t,
        crossing_complete_t,
        crossing_cycle_s: arrival_t.zip(crossing_complete_t).map(|(a, c)| c - a),
        start_within_walk: start.and_then(|r| r.payload["within_walk"].as_bool()),
        call_to_walk_latency_s: call_t.zip(walk_t).map(|(c, w)| w - c),
        max_cycle_s: log.metric("scenario_start").and_then(|r| f(&r.payload, "max_cycle_s")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn fix(log: &mut EventLog, t: f64, label: Option<&str>, truth: f64, measured: f64) {
        log.push(t, Category::FixMeasured, json!({"label": label, "true_distance_m": truth, "measured_distance_m": measured}));
    }

    #[test]
    fn labelled_fix_preferred_then_nearest() {
        let mut log = EventLog::new();
        fix(&mut log, 0.0, None, 50.2, 40.0);
        fix(&mut log, 1.0, Some("a"), 50.0, 42.0);
        fix(&mut log, 2.0, None, 30.4, 29.0);
        let pts = vec![
            ReferencePoint { label: "a".into(), distance: 50.0 },
            ReferencePoint { label: "b".into(), distance: 30.0 },
            ReferencePoint { label: "c".into(), distance: 5.0 },
        ];
        let rep = deviation_report(&log, &pts);
        assert_eq!(rep.row("a").unwrap().deviation_m, Some(-8.0));
        assert_eq!(rep.row("a").unwrap().deviation_pct, Some(-16.0));
        assert_eq!(rep.row("b").unwrap().t, Some(2.0));
        assert!(rep.row("c").unwrap().missing);
        assert!(rep.to_text().contains("missing"));
        assert_eq!(rep.to_csv().lines().nth(1).unwrap(), "a,UNKNOWN,-8.0000,-16.0000");
        assert_eq!(rep.to_csv().lines().nth(3).unwrap(), "c,UNKNOWN,,");
    }

    #[test]
    fn incomplete_crossing_flagged() {
        let mut log = EventLog::new();
        log.push(0.0, Category::Announce, json!({"kind": "ARRIVAL"}));
        let m = crossing_metrics(&log);
        assert!(!m.complete);
        assert_eq!(m.arrival_t, Some(0.0));
        assert_eq!(m.crossing_cycle_s, None);
        assert_eq!(m.start_within_walk, None);
    }
}
