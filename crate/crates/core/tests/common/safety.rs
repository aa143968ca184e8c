//! Drives a controller with random pedestrian calls and checks the safety
//! and service rules on every tick.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vgd_core::controller::{Controller, Interval, Lamp, PedIndication, PhaseId, TimingPlan};

#[derive(Debug, Default)]
pub struct SafetyReport {
    pub ticks: u64,
    pub calls: u64,
    pub served: u64,
    pub max_latency_ticks: u64,
    pub violations: Vec<String>,
}

pub fn exercise(plan: &TimingPlan, seed: u64, ticks: u64) -> SafetyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // seeds sweep from sparse to dense demand
    let call_p = 0.0005 + 0.05 * (seed % 20) as f64 / 20.0;
    let phases: Vec<PhaseId> = plan.phase_ids().collect();
    let bound = plan.max_cycle_ticks();
    let mut ctl = Controller::new(plan.clone());
    let mut pending: Vec<Option<u64>> = vec![None; phases.len()];
    let mut was_walk = vec![false; phases.len()];
    let mut r = SafetyReport::default();
    let fail = |r: &mut SafetyReport, msg: String| {
        if r.violations.len() < 10 {
            r.violations.push(msg);
        }
    };

    for now in 1..=ticks {
        if rng.random_bool(call_p) {
            let i = rng.random_range(0..phases.len());
            r.calls += 1;
            if ctl.place_ped_call(phases[i]).unwrap() {
                pending[i] = Some(now - 1);
            }
        }
        ctl.tick();
        let s = ctl.snapshot();
        let greens = phases.iter().filter(|&&p| s.lamp(p) == Lamp::Green).count();
        if greens > 1 {
            fail(&mut r, format!("tick {now}: {greens} phases green"));
        }
        for (i, &p) in phases.iter().enumerate() {
            let ped = s.ped(p).unwrap();
            if ped != PedIndication::DontWalk && (p != s.active_phase || s.interval != Interval::Green) {
                fail(&mut r, format!("tick {now}: phase {p} shows {ped:?} off its green"));
            }
            let walk = ped == PedIndication::Walk;
            if walk && !was_walk[i] {
                if let Some(at) = pending[i].take() {
                    let latency = now - at;
                    r.served += 1;
                    r.max_latency_ticks = r.max_latency_ticks.max(latency);
                    if latency > bound {
                        fail(&mut r, format!("tick {now}: call on phase {p} waited {latency} ticks > {bound}"));
                    }
                } else {
                    fail(&mut r, format!("tick {now}: WALK on phase {p} without a call"));
                }
            }
            was_walk[i] = walk;
            if let Some(at) = pending[i] {
                if now - at > bound {
                    fail(&mut r, format!("tick {now}: call on phase {p} from tick {at} still unserved"));
                    pending[i] = None;
                }
            }
        }
        if s.remaining_walk > 0.0 && s.ped(s.active_phase) != Some(PedIndication::Walk) {
            fail(&mut r, format!("tick {now}: remaining_walk {} outside WALK", s.remaining_walk));
        }
    }
    r.ticks = ticks;
    r
}
