//! Proptest strategy for arbitrary well-formed messages.

use proptest::collection::vec;
use proptest::prelude::*;
use vgd_core::ntcip::{ErrorStatus, NtcipMessage, Oid, PduType, Value, VarBind};

pub fn oid() -> impl Strategy<Value = Oid> {
    (0u64..=2, vec(any::<u32>(), 0..12)).prop_flat_map(|(first, tail)| {
        let second = if first < 2 { 0u64..40 } else { 0u64..1_000_000 };
        second.prop_map(move |s| {
            let mut arcs = vec![first, s];
            arcs.extend(tail.iter().map(|&a| u64::from(a)));
            Oid::new(&arcs).unwrap()
        })
    })
}

pub fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        any::<i32>().prop_map(Value::Integer),
        vec(any::<u8>(), 0..300).prop_map(Value::OctetString),
        Just(Value::Null),
    ]
}

pub fn message() -> impl Strategy<Value = NtcipMessage> {
    let pdu = prop_oneof![Just(PduType::GetRequest), Just(PduType::SetRequest), Just(PduType::GetResponse)];
    let status = prop_oneof![
        Just(ErrorStatus::NoError),
        Just(ErrorStatus::NoSuchName),
        Just(ErrorStatus::BadValue),
        Just(ErrorStatus::GenErr),
    ];
    (vec(any::<u8>(), 0..40), pdu, any::<i32>(), status, vec((oid(), value()), 0..8), any::<u32>()).prop_map(
        |(community, pdu_type, request_id, error_status, binds, idx)| {
            let varbinds: Vec<VarBind> = binds.into_iter().map(|(o, v)| VarBind::new(o, v)).collect();
            let (error_status, error_index) = if pdu_type == PduType::GetResponse && error_status != ErrorStatus::NoError {
                (error_status, idx % (varbinds.len() as u32 + 1))
            } else {
                (ErrorStatus::NoError, 0)
            };
            NtcipMessage { community, pdu_type, request_id, error_status, error_index, varbinds }
        },
    )
}
