//! The golden byte dumps under tests/golden/ and the messages they encode.

use vgd_core::ntcip::{mib, ErrorStatus, NtcipMessage, PduType, Value, VarBind};
use vgd_core::controller::PhaseId;

pub struct Golden {
    pub name: &'static str,
    pub hex: &'static str,
    pub message: NtcipMessage,
}

fn msg(
    community: &[u8],
    pdu_type: PduType,
    request_id: i32,
    error_status: ErrorStatus,
    error_index: u32,
    varbinds: Vec<VarBind>,
) -> NtcipMessage {
    NtcipMessage { community: community.to_vec(), pdu_type, request_id, error_status, error_index, varbinds }
}

pub fn cases() -> Vec<Golden> {
    let p1 = PhaseId::new(1).unwrap();
    let p2 = PhaseId::new(2).unwrap();
    let ok = ErrorStatus::NoError;
    vec![
        Golden {
            name: "set_ped_call_2",
            hex: include_str!("../golden/set_ped_call_2.hex"),
            message: msg(b"public", PduType::SetRequest, 1, ok, 0, vec![VarBind::new(mib::ped_call(p2), Value::Integer(1))]),
        },
        Golden {
            name: "response_ped_call_2",
            hex: include_str!("../golden/response_ped_call_2.hex"),
            message: msg(b"public", PduType::GetResponse, 1, ok, 0, vec![VarBind::new(mib::ped_call(p2), Value::Integer(1))]),
        },
        Golden {
            name: "get_ped_indication_1",
            hex: include_str!("../golden/get_ped_indication_1.hex"),
            message: msg(b"public", PduType::GetRequest, 7, ok, 0, vec![VarBind::null(mib::ped_indication(p1))]),
        },
        Golden {
            name: "response_ped_indication_walk",
            hex: include_str!("../golden/response_ped_indication_walk.hex"),
            message: msg(
                b"public",
                PduType::GetResponse,
                7,
                ok,
                0,
                vec![VarBind::new(mib::ped_indication(p1), Value::Integer(2))],
            ),
        },
        Golden {
            name: "response_active_phase_bad_value",
            hex: include_str!("../golden/response_active_phase_bad_value.hex"),
            message: msg(
                b"public",
                PduType::GetResponse,
                9,
                ErrorStatus::BadValue,
                1,
                vec![VarBind::new(mib::active_phase(), Value::Integer(1))],
            ),
        },
        Golden {
            name: "get_status_multi",
            hex: include_str!("../golden/get_status_multi.hex"),
            message: msg(
                b"public",
                PduType::GetRequest,
                0x1234_5678,
                ok,
                0,
                vec![
                    VarBind::null(mib::active_phase()),
                    VarBind::null(mib::remaining_walk()),
                    VarBind::null(mib::signal_interval()),
                ],
            ),
        },
        Golden {
            name: "response_no_such_name",
            hex: include_str!("../golden/response_no_such_name.hex"),
            message: msg(
                b"ntcip",
                PduType::GetResponse,
                -5,
                ErrorStatus::NoSuchName,
                2,
                vec![
                    VarBind::new(mib::active_phase(), Value::Integer(128)),
                    VarBind::new("1.3.6.1.4.1.1206.99".parse().unwrap(), Value::OctetString(b"vgd".to_vec())),
                ],
            ),
        },
    ]
}

pub fn bytes(g: &Golden) -> Vec<u8> {
    hex::decode(g.hex.trim()).expect("golden files are hex")
}
