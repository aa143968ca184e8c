use std::thread;
use std::time::{Duration, Instant};

use vgd_core::client::{AnnouncementKind, Mode};
use vgd_core::controller::Controller;
use vgd_core::sim::{self, Scenario};
use vgd_service::session::{ActionKind, Session, SessionError, SessionManager, SessionMode, Status};

fn wait_for(s: &Session, limit: Duration, mut pred: impl FnMut(&Session) -> bool) -> bool {
    let end = Instant::now() + limit;
    while Instant::now() < end {
        if pred(s) {
            return true;
        }
        thread::sleep(Duration::from_millis(2));
    }
    pred(s)
}

fn at_intersection(s: &Session) -> bool {
    s.snapshot().engine.client.mode == Mode::AtIntersection
}

#[test]
fn created_sessions_are_ready_with_distinct_ids() {
    let m = SessionManager::new();
    let a = m.create(Scenario::builtin("demo_crossing").unwrap(), SessionMode::Interactive, 1.0).unwrap();
    let b = m.create(Scenario::builtin("demo_crossing").unwrap(), SessionMode::Scripted, 1.0).unwrap();
    assert_ne!(a.id, b.id);
    assert_eq!(a.status(), Status::Ready);
    assert_eq!(a.snapshot().engine.tick, 0);
    assert_eq!(m.ids().len(), 2);
    assert!(m.remove(&a.id));
    assert!(!m.remove(&a.id));
}

#[test]
fn bad_speed_is_refused() {
    let m = SessionManager::new();
    let sc = Scenario::builtin("demo_crossing").unwrap();
    assert_eq!(m.create(sc.clone(), SessionMode::Interactive, 0.0).unwrap_err(), SessionError::BadSpeed(0.0));
    let s = m.create(sc, SessionMode::Interactive, 1.0).unwrap();
    assert!(s.set_speed(f64::NAN).is_err());
    assert!(s.set_speed(5000.0).is_err());
    assert_eq!(s.set_speed(20.0), Ok(20.0));
}

#[test]
fn ready_and_paused_sessions_do_not_advance() {
    let m = SessionManager::new();
    let s = m.create(Scenario::builtin("demo_crossing").unwrap(), SessionMode::Interactive, 50.0).unwrap();
    thread::sleep(Duration::from_millis(150));
    assert_eq!(s.snapshot().engine.tick, 0);
    assert!(s.pause().is_err());
    s.start().unwrap();
    assert!(wait_for(&s, Duration::from_secs(5), |s| s.snapshot().engine.tick > 10));
    s.pause().unwrap();
    let frozen = s.snapshot();
    thread::sleep(Duration::from_millis(300));
    assert_eq!(*s.snapshot(), *frozen);
    assert_eq!(frozen.status, Status::Paused);
    assert!(matches!(s.submit(ActionKind::ShortTap), Err(SessionError::Rejected(_))));
    s.start().unwrap();
    assert!(wait_for(&s, Duration::from_secs(5), |s| s.snapshot().engine.tick > frozen.engine.tick));
}

#[test]
fn speed_ten_runs_sixty_seconds_in_about_six() {
    let mut sc = Scenario::builtin("approach_600m").unwrap();
    sc.horizon_s = 60.0;
    let m = SessionManager::new();
    let s = m.create(sc, SessionMode::Interactive, 10.0).unwrap();
    let t0 = Instant::now();
    s.start().unwrap();
    assert!(wait_for(&s, Duration::from_secs(20), |s| s.status() == Status::Finished));
    let wall = t0.elapsed().as_secs_f64();
    let snap = s.snapshot();
    assert!((snap.engine.t - 60.0).abs() < 1e-9, "finished at t={}", snap.engine.t);
    assert!((5.7..6.6).contains(&wall), "wall {wall:.3} s");
}

#[test]
fn finished_session_rejects_actions_until_reset() {
    let m = SessionManager::new();
    let s = m.create(Scenario::builtin("deviation_approach").unwrap(), SessionMode::Scripted, 1.0).unwrap();
    s.start().unwrap();
    assert!(wait_for(&s, Duration::from_secs(10), |s| s.status() == Status::Finished));
    for kind in [ActionKind::ShortTap, ActionKind::LongTap, ActionKind::WalkToggle] {
        assert!(matches!(s.submit(kind), Err(SessionError::Rejected(_))));
    }
    assert!(s.start().is_err());
    let rejected = s.actions();
    assert_eq!(rejected.len(), 3);
    assert!(rejected.iter().all(|a| !a.accepted && a.reason.as_deref() == Some("session is finished")));
    let ack = s.submit(ActionKind::Reset).unwrap();
    assert_eq!(ack.status, Status::Ready);
    assert_eq!(s.snapshot().engine.tick, 0);
    assert!(s.actions().is_empty());
}

#[test]
fn scripted_session_log_matches_the_batch_run() {
    let sc = Scenario::builtin("demo_crossing").unwrap();
    let batch = sim::run(sc.clone()).unwrap();
    let m = SessionManager::new();
    let s = m.create(sc, SessionMode::Scripted, 1.0).unwrap();
    s.start().unwrap();
    assert!(wait_for(&s, Duration::from_secs(20), |s| s.status() == Status::Finished));
    assert_eq!(s.log_ndjson(), batch.log.to_ndjson());
    assert_eq!(s.announcements(), batch.announcements);
}

#[test]
fn short_tap_while_far_changes_nothing() {
    let m = SessionManager::new();
    let s = m.create(Scenario::builtin("approach_600m").unwrap(), SessionMode::Interactive, 1.0).unwrap();
    s.start().unwrap();
    let ack = s.submit(ActionKind::ShortTap).unwrap();
    assert!(ack.accepted);
    assert!(wait_for(&s, Duration::from_secs(2), |s| s.snapshot().engine.tick >= ack.tick + 2));
    let snap = s.snapshot();
    assert_eq!(snap.engine.client.mode, Mode::Far);
    assert_eq!(snap.engine.client.selected_option, None);
    assert!(s.announcements().is_empty());
}

#[test]
fn polls_within_a_tick_are_identical_and_match_the_controller() {
    let m = SessionManager::new();
    let s = m.create(Scenario::builtin("demo_crossing").unwrap(), SessionMode::Interactive, 1.0).unwrap();
    s.start().unwrap();
    let mut pairs = 0;
    let end = Instant::now() + Duration::from_secs(2);
    while pairs < 50 && Instant::now() < end {
        let (a, b) = (s.snapshot(), s.snapshot());
        if a.engine.tick == b.engine.tick {
            assert_eq!(*a, *b);
            pairs += 1;
        }
    }
    assert!(pairs >= 50);
    for _ in 0..20 {
        s.inspect(|engine, snap| {
            assert_eq!(snap.engine.tick, engine.ticks());
            assert_eq!(snap.engine.signal, engine.controller().snapshot());
        });
        thread::sleep(Duration::from_millis(37));
    }
    // No call is placed before arrival, so an independent controller ticked
    // the same number of times must agree.
    let snap = s.snapshot();
    let mut ctl = Controller::new(Scenario::builtin("demo_crossing").unwrap().plan);
    for _ in 0..snap.engine.tick {
        ctl.tick();
    }
    assert_eq!(snap.engine.signal, ctl.snapshot());
}

#[test]
fn interactive_crossing_with_bounded_action_latency() {
    let m = SessionManager::new();
    let s = m.create(Scenario::builtin("demo_crossing").unwrap(), SessionMode::Interactive, 200.0).unwrap();
    s.start().unwrap();
    assert!(wait_for(&s, Duration::from_secs(10), at_intersection));
    s.set_speed(1.0).unwrap();
    let mut worst = 0;
    for (kind, expect) in [(ActionKind::ShortTap, 0usize), (ActionKind::ShortTap, 1)] {
        let ack = s.submit(kind).unwrap();
        let mut seen = None;
        assert!(wait_for(&s, Duration::from_secs(2), |s| {
            let snap = s.snapshot();
            if snap.engine.client.selected_option == Some(expect) {
                seen = Some(snap.engine.tick);
                true
            } else {
                false
            }
        }));
        worst = worst.max(seen.unwrap() - ack.tick);
    }
    assert!(worst <= 2, "action became visible {worst} ticks late");
    let ack = s.submit(ActionKind::LongTap).unwrap();
    assert!(wait_for(&s, Duration::from_secs(2), |s| {
        s.snapshot().engine.announcements.iter().any(|a| a.kind == AnnouncementKind::CallConfirmed)
    }));
    let snap = s.snapshot();
    assert!(snap.engine.tick - ack.tick <= 2);
    assert_eq!(snap.engine.client.mode, Mode::CallPlaced);
    s.set_speed(200.0).unwrap();
    assert!(wait_for(&s, Duration::from_secs(10), |s| s.status() == Status::Finished));
    let kinds: Vec<_> = s.announcements().iter().map(|a| a.kind).collect();
    assert!(kinds.contains(&AnnouncementKind::WalkStart));
    assert_eq!(s.snapshot().engine.client.mode, Mode::Done);
}
