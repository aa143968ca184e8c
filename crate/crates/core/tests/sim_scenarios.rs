//! Scenario engine runs: calibration, kinematics, causality, determinism.

use vgd_core::controller::PedIndication;
use vgd_core::geo::{self, GeoPoint, Heading};
use vgd_core::sim::*;

fn deviation(mode: GpsMode) -> Scenario {
    let mut s = Scenario::builtin("deviation_approach").unwrap();
    s.set_mode(mode);
    s
}

fn kinds(out: &RunOutput) -> Vec<String> {
    out.announcements.iter().map(|a| a.kind.to_string()).collect()
}

#[test]
fn noise_off_reproduces_bias_table() {
    for mode in [GpsMode::Enhanced, GpsMode::GpsOnly] {
        let out = run(deviation(mode)).unwrap();
        let rep = deviation_report(&out.log, &reference_points(&out.log));
        assert_eq!(rep.mode, mode.as_str());
        for (d, bias) in mode.default_bias_table() {
            let row = rep.rows.iter().find(|r| r.reference_distance_m == *d).unwrap();
            assert!(!row.missing, "{mode} {}", row.label);
            assert!((row.true_distance_m.unwrap() - d).abs() < 1e-6, "{mode} {}: {:?}", row.label, row.true_distance_m);
            assert!((row.deviation_m.unwrap() - bias).abs() < 1e-6, "{mode} {}: {:?}", row.label, row.deviation_m);
        }
    }
}

#[test]
fn deviation_signs() {
    let e = deviation_report(&run(deviation(GpsMode::Enhanced)).unwrap().log, &deviation(GpsMode::Enhanced).reference_points);
    let dev = |r: &DeviationReport, l: &str| r.row(l).unwrap().deviation_m.unwrap();
    for l in ["start", "#1", "#2", "#3", "#4"] {
        assert!(dev(&e, l) < 0.0, "ENHANCED {l}");
    }
    assert!(dev(&e, "start").abs() > dev(&e, "#1").abs());
    assert!(dev(&e, "#1").abs() > dev(&e, "#2").abs());
    assert!(dev(&e, "#3").abs() < dev(&e, "start").abs());
    assert!(dev(&e, "#4").abs() > dev(&e, "#3").abs());

    let g = deviation_report(&run(deviation(GpsMode::GpsOnly)).unwrap().log, &deviation(GpsMode::GpsOnly).reference_points);
    assert!(dev(&g, "#2") > 0.0, "GPS_ONLY further at #2");
    assert!(dev(&g, "#3") < 0.0, "GPS_ONLY closer at #3");
    assert!(dev(&g, "#4").abs() > dev(&g, "#3").abs());
}

#[test]
fn noise_mean_matches_bias() {
    let center = GeoPoint::new(40.7425, -74.1786).unwrap();
    let truth = geo::destination(&center, Heading::new(250.0).unwrap(), 40.0);
    let sigma = 2.0;
    for seed in [1, 2, 3] {
        let model = GpsErrorModel::calibrated(GpsMode::Enhanced, sigma).unwrap();
        let bias = model.bias.eval(40.0);
        let mut sensor = GpsSensor::new(model, seed);
        let n = 10_000;
        let mean = (0..n).map(|_| sensor.measure(&center, &truth).deviation_m()).sum::<f64>() / n as f64;
        assert!((mean - bias).abs() <= 3.0 * sigma / 100.0, "seed {seed}: mean {mean} bias {bias}");
    }
}

#[test]
fn noise_off_is_seed_independent() {
    let mut a = deviation(GpsMode::Enhanced);
    let mut b = deviation(GpsMode::Enhanced);
    a.seed = 1;
    b.seed = 987_654_321;
    let la = run(a).unwrap().log.to_ndjson().replace("\"seed\":1,", "");
    let lb = run(b).unwrap().log.to_ndjson().replace("\"seed\":987654321,", "");
    assert_eq!(la, lb);
}

#[test]
fn noise_on_depends_on_seed() {
    let mut a = Scenario::builtin("demo_crossing").unwrap();
    let mut b = a.clone();
    a.seed = 1;
    b.seed = 2;
    assert_ne!(run(a).unwrap().log.to_ndjson(), run(b).unwrap().log.to_ndjson());
}

#[test]
fn arrival_after_route_walk_time() {
    let out = run(deviation(GpsMode::Enhanced)).unwrap();
    let rc = out.log.metric("route_complete").unwrap();
    assert!((rc.t - 48.75).abs() < 1e-6);
}

#[test]
fn log_times_never_decrease() {
    for (name, _) in BUILTIN_SCENARIOS {
        let out = run(Scenario::builtin(name).unwrap()).unwrap();
        assert!(out.log.records().windows(2).all(|w| w[0].t <= w[1].t), "{name}");
        assert_eq!(out.log.records()[0].metric_name(), Some("scenario_start"));
    }
}

#[test]
fn same_seed_same_log_in_process() {
    let a = run(Scenario::builtin("demo_crossing").unwrap()).unwrap();
    let b = run(Scenario::builtin("demo_crossing").unwrap()).unwrap();
    assert_eq!(a.log.to_ndjson(), b.log.to_ndjson());
    assert_eq!(a.transcript(), b.transcript());
}

#[test]
fn demo_crossing_causal_chain() {
    let out = run(Scenario::builtin("demo_crossing").unwrap()).unwrap();
    assert_eq!(out.finish, FinishReason::CrossingComplete);
    let recs = out.log.records();
    let pos = |pred: &dyn Fn(&Record) -> bool| recs.iter().position(pred).expect("record present");
    let tx = pos(&|r| r.cat == Category::WireTx && r.payload["pdu"] == "SetRequest");
    let rx = pos(&|r| r.cat == Category::WireRx && r.payload["error_status"] == "noError");
    let confirmed = pos(&|r| r.announce_kind() == Some("CALL_CONFIRMED"));
    let walk = pos(&|r| {
        r.cat == Category::Signal
            && r.payload["peds"].as_array().unwrap().iter().any(|p| p["phase"] == 2 && p["ped"] == "WALK")
    });
    let walk_start = pos(&|r| r.announce_kind() == Some("WALK_START"));
    assert!(tx < rx && rx < confirmed && confirmed < walk && walk <= walk_start, "{tx} {rx} {confirmed} {walk} {walk_start}");
    assert!(recs[tx].payload["summary"].as_str().unwrap().contains("1.3.6.1.4.1.1206.4.2.1.100.1.2=1"));

    let m = crossing_metrics(&out.log);
    assert!(m.complete);
    assert_eq!(m.start_within_walk, Some(true));
    assert!(m.call_to_walk_latency_s.unwrap() <= m.max_cycle_s.unwrap());
    assert_eq!(m.walk_t, Some(75.0));
    assert!((m.crossing_complete_t.unwrap() - m.crossing_start_t.unwrap() - 12.7 / 1.2).abs() < 1e-6);
}

#[test]
fn every_confirmation_follows_a_wire_ack() {
    let out = run(Scenario::builtin("demo_crossing").unwrap()).unwrap();
    let mut acked = false;
    for r in out.log.records() {
        if r.cat == Category::WireRx && r.payload["error_status"] == "noError" {
            acked = true;
        }
        if r.announce_kind() == Some("CALL_CONFIRMED") {
            assert!(acked);
            acked = false;
        }
    }
}

#[test]
fn late_start_is_not_within_walk() {
    let mut s = Scenario::builtin("demo_crossing").unwrap();
    s.crossing = Some(CrossingPolicy { start_delay_s: 10.0 });
    let out = run(s).unwrap();
    let m = crossing_metrics(&out.log);
    assert_eq!(m.start_within_walk, Some(false));
    assert_eq!(out.log.metric("crossing_start").unwrap().payload["ped"], "FLASHING_DONT_WALK");
}

#[test]
fn dead_controller_gives_error_announcement() {
    let mut s = Scenario::builtin("demo_crossing").unwrap();
    s.wire.drop_requests = true;
    s.wire.timeout_ms = 40;
    let out = run(s).unwrap();
    let k = kinds(&out);
    assert!(k.contains(&"ERROR".to_string()), "{k:?}");
    assert!(!k.contains(&"CALL_CONFIRMED".to_string()));
    assert_eq!(out.log.of(Category::WireTx).count(), 3);
    assert_eq!(out.log.of(Category::WireRx).count(), 0);
    let tx: Vec<_> = out.log.of(Category::WireTx).map(|r| r.payload["hex"].clone()).collect();
    assert!(tx.windows(2).all(|w| w[0] == w[1]), "retries reuse the request");
    let m = crossing_metrics(&out.log);
    assert!(!m.complete);
    assert_eq!(out.finish, FinishReason::RouteComplete);
}

#[test]
fn wrong_community_is_unreachable() {
    let mut s = Scenario::builtin("demo_crossing").unwrap();
    s.wire.community = "private".into();
    s.wire.timeout_ms = 40;
    let out = run(s).unwrap();
    assert!(kinds(&out).contains(&"ERROR".to_string()));
}

#[test]
fn report_survives_log_round_trip() {
    let out = run(deviation(GpsMode::GpsOnly)).unwrap();
    let back = EventLog::from_ndjson(&out.log.to_ndjson()).unwrap();
    assert_eq!(
        deviation_report(&back, &reference_points(&back)),
        deviation_report(&out.log, &reference_points(&out.log))
    );
}

#[test]
fn unreached_reference_point_is_missing() {
    let mut s = deviation(GpsMode::Enhanced);
    s.reference_points.push(ReferencePoint { label: "far".into(), distance: 80.0 });
    let out = run(s).unwrap();
    let rep = deviation_report(&out.log, &reference_points(&out.log));
    assert!(rep.row("far").unwrap().missing);
    assert!(!rep.row("start").unwrap().missing);
}

#[test]
fn approach_bands() {
    let out = run(Scenario::builtin("approach_600m").unwrap()).unwrap();
    let bands: Vec<u64> = out
        .announcements
        .iter()
        .filter(|a| a.kind.to_string() == "DISTANCE")
        .map(|a| serde_json::to_value(&a.payload).unwrap()["band"].as_u64().unwrap())
        .collect();
    assert_eq!(bands, [500, 400, 300, 200, 100]);
    assert_eq!(kinds(&out).iter().filter(|k| *k == "ARRIVAL").count(), 1);
    assert_eq!(out.announcements.len(), 6);
}

#[test]
fn walk_announcements_only_on_walk() {
    let out = run(Scenario::builtin("demo_crossing").unwrap()).unwrap();
    let mut ped = PedIndication::DontWalk;
    for r in out.log.records() {
        if r.cat == Category::Signal {
            let p = r.payload["peds"].as_array().unwrap().iter().find(|p| p["phase"] == 2).unwrap();
            ped = serde_json::from_value(p["ped"].clone()).unwrap();
        }
        if matches!(r.announce_kind(), Some("WALK_START") | Some("REMAINING_TIME")) {
            assert_eq!(ped, PedIndication::Walk, "at t={}", r.t);
        }
    }
}
