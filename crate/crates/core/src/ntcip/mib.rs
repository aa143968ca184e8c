//! Controller objects exposed by the agent.
//!
//! These OIDs are a project assignment under the NEMA enterprise subtree
//! (1.3.6.1.4.1.1206), not NTCIP 1202 conformant object definitions:
//!
//! | object            | OID suffix under `BASE` | access     | value                          |
//! |-------------------|-------------------------|------------|--------------------------------|
//! | pedCall.p         | `.1.p`                  | read-write | INTEGER; write 1 to latch      |
//! | pedIndication.p   | `.2.p`                  | read-only  | DONT_WALK=0, FLASHING=1, WALK=2 |
//! | activePhase       | `.3.0`                  | read-only  | phase id                       |
//! | remainingWalk     | `.4.0`                  | read-only  | deciseconds of WALK left       |
//! | signalInterval    | `.5.0`                  | read-only  | GREEN=0, YELLOW=1, ALL_RED=2   |
//!
//! with `BASE` = 1.3.6.1.4.1.1206.4.2.1.100.

use std::collections::BTreeMap;

use crate::controller::{Interval, PhaseId, TimingPlan};

use super::Oid;

pub const NEMA: [u32; 7] = [1, 3, 6, 1, 4, 1, 1206];
pub const BASE: [u32; 11] = [1, 3, 6, 1, 4, 1, 1206, 4, 2, 1, 100];

fn base() -> Oid {
    Oid::new(&BASE.map(u64::from)).expect("static OID")
}

pub fn ped_call(phase: PhaseId) -> Oid {
    base().child(1).child(phase.get())
}

pub fn ped_indication(phase: PhaseId) -> Oid {
    base().child(2).child(phase.get())
}

pub fn active_phase() -> Oid {
    base().child(3).child(0)
}

pub fn remaining_walk() -> Oid {
    base().child(4).child(0)
}

pub fn signal_interval() -> Oid {
    base().child(5).child(0)
}

pub fn interval_code(i: Interval) -> i32 {
    match i {
        Interval::Green => 0,
        Interval::Yellow => 1,
        Interval::AllRed => 2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    ReadOnly,
    ReadWrite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKind {
    PedCall(PhaseId),
    PedIndication(PhaseId),
    ActivePhase,
    RemainingWalk,
    SignalInterval,
}

impl ObjectKind {
    /// Every object carries an INTEGER value; only pedCall is writable.
    pub fn access(&self) -> Access {
        match self {
            ObjectKind::PedCall(_) => Access::ReadWrite,
            _ => Access::ReadOnly,
        }
    }
}

/// OID to object map for one controller's timing plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectRegistry {
    objects: BTreeMap<Oid, ObjectKind>,
}

impl ObjectRegistry {
    pub fn for_plan(plan: &TimingPlan) -> Self {
        let mut objects = BTreeMap::new();
        for phase in plan.phase_ids() {
            objects.insert(ped_call(phase), ObjectKind::PedCall(phase));
            objects.insert(ped_indication(phase), ObjectKind::PedIndication(phase));
        }
        objects.insert(active_phase(), ObjectKind::ActivePhase);
        objects.insert(remaining_walk(), ObjectKind::RemainingWalk);
        objects.insert(signal_interval(), ObjectKind::SignalInterval);
        ObjectRegistry { objects }
    }

    pub fn resolve(&self, oid: &Oid) -> Option<ObjectKind> {
        self.objects.get(oid).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Oid, &ObjectKind)> {
        self.objects.iter()
    }
}
