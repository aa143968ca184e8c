//! SNMPv1-subset messages for NTCIP-style pedestrian call actuation.
//!
//! The wire format is BER (see [`ber`]); transport is plain UDP with a
//! controller-side [`Agent`] and a client-side [`Manager`]. Controller
//! objects live under the NEMA enterprise subtree, see [`mib`].

pub mod agent;
pub mod ber;
pub mod manager;
pub mod mib;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agent::{agent_handle, Agent, ControllerAccess, Served};
pub use ber::{decode, encode, DecodeError, DecodeErrorKind, EncodeError};
pub use manager::{Ack, Manager, ManagerConfig, ManagerError};
pub use mib::{Access, ObjectKind, ObjectRegistry};

/// Default UDP port of the controller agent.
pub const DEFAULT_AGENT_PORT: u16 = 50161;

pub const DEFAULT_COMMUNITY: &[u8] = b"public";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OidError {
    #[error("an OID needs at least two arcs")]
    TooShort,
    #[error("first arc must be 0, 1 or 2, got {0}")]
    BadFirstArc(u64),
    #[error("second arc must be < 40 under arc {0}")]
    BadSecondArc(u64),
    #[error("arc {0} does not fit in 32 bits")]
    ArcTooLarge(u64),
    #[error("cannot parse '{0}' as a dotted OID")]
    Syntax(String),
}

/// Object identifier: at least two arcs, each below 2^32.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Oid(Vec<u32>);

impl Oid {
    pub fn new(arcs: &[u64]) -> Result<Self, OidError> {
        if arcs.len() < 2 {
            return Err(OidError::TooShort);
        }
        if arcs[0] > 2 {
            return Err(OidError::BadFirstArc(arcs[0]));
        }
        if arcs[0] < 2 && arcs[1] >= 40 {
            return Err(OidError::BadSecondArc(arcs[0]));
        }
        let mut out = Vec::with_capacity(arcs.len());
        for &a in arcs {
            out.push(u32::try_from(a).map_err(|_| OidError::ArcTooLarge(a))?);
        }
        Ok(Oid(out))
    }

    pub fn arcs(&self) -> &[u32] {
        &self.0
    }

    /// This OID with one more arc appended.
    pub fn child(&self, arc: u32) -> Oid {
        let mut v = self.0.clone();
        v.push(arc);
        Oid(v)
    }

    pub fn starts_with(&self, prefix: &Oid) -> bool {
        self.0.starts_with(&prefix.0)
    }
}

impl fmt::Display for Oid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl FromStr for Oid {
    type Err = OidError;
    fn from_str(s: &str) -> Result<Self, OidError> {
        let arcs: Result<Vec<u64>, _> = s.trim_start_matches('.').split('.').map(str::parse).collect();
        Oid::new(&arcs.map_err(|_| OidError::Syntax(s.to_string()))?)
    }
}

impl Serialize for Oid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Oid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Value {
    Integer(i32),
    OctetString(Vec<u8>),
    Null,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VarBind {
    pub oid: Oid,
    pub value: Value,
}

impl VarBind {
    pub fn new(oid: Oid, value: Value) -> Self {
        VarBind { oid, value }
    }

    pub fn null(oid: Oid) -> Self {
        VarBind { oid, value: Value::Null }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PduType {
    GetRequest,
    GetResponse,
    SetRequest,
}

impl PduType {
    pub fn tag(&self) -> u8 {
        match self {
            PduType::GetRequest => ber::TAG_GET_REQUEST,
            PduType::GetResponse => ber::TAG_GET_RESPONSE,
            PduType::SetRequest => ber::TAG_SET_REQUEST,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            ber::TAG_GET_REQUEST => Some(PduType::GetRequest),
            ber::TAG_GET_RESPONSE => Some(PduType::GetResponse),
            ber::TAG_SET_REQUEST => Some(PduType::SetRequest),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ErrorStatus {
    NoError,
    NoSuchName,
    BadValue,
    GenErr,
}

impl ErrorStatus {
    pub fn code(&self) -> i64 {
        match self {
            ErrorStatus::NoError => 0,
            ErrorStatus::NoSuchName => 2,
            ErrorStatus::BadValue => 3,
            ErrorStatus::GenErr => 5,
        }
    }

    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            0 => Some(ErrorStatus::NoError),
            2 => Some(ErrorStatus::NoSuchName),
            3 => Some(ErrorStatus::BadValue),
            5 => Some(ErrorStatus::GenErr),
            _ => None,
        }
    }
}

impl fmt::Display for ErrorStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorStatus::NoError => "noError",
            ErrorStatus::NoSuchName => "noSuchName",
            ErrorStatus::BadValue => "badValue",
            ErrorStatus::GenErr => "genErr",
        })
    }
}

/// One SNMPv1 message. The version field is implicit (always 0).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NtcipMessage {
    pub community: Vec<u8>,
    pub pdu_type: PduType,
    pub request_id: i32,
    pub error_status: ErrorStatus,
    /// 1-based index of the offending varbind, 0 when not applicable.
    pub error_index: u32,
    pub varbinds: Vec<VarBind>,
}

impl NtcipMessage {
    fn request(pdu_type: PduType, community: Vec<u8>, request_id: i32, varbinds: Vec<VarBind>) -> Self {
        NtcipMessage {
            community,
            pdu_type,
            request_id,
            error_status: ErrorStatus::NoError,
            error_index: 0,
            varbinds,
        }
    }

    pub fn get_request(community: Vec<u8>, request_id: i32, oids: Vec<Oid>) -> Self {
        Self::request(PduType::GetRequest, community, request_id, oids.into_iter().map(VarBind::null).collect())
    }

    pub fn set_request(community: Vec<u8>, request_id: i32, varbinds: Vec<VarBind>) -> Self {
        Self::request(PduType::SetRequest, community, request_id, varbinds)
    }

    /// A GetResponse echoing this message's id and varbinds.
    pub fn response(&self, error_status: ErrorStatus, error_index: u32) -> Self {
        NtcipMessage {
            community: self.community.clone(),
            pdu_type: PduType::GetResponse,
            request_id: self.request_id,
            error_status,
            error_index,
            varbinds: self.varbinds.clone(),
        }
    }

    pub fn is_request(&self) -> bool {
        self.pdu_type != PduType::GetResponse
    }

    /// Compact one-line form for logs.
    pub fn summary(&self) -> String {
        let binds: Vec<String> = self
            .varbinds
            .iter()
            .map(|vb| match &vb.value {
                Value::Integer(i) => format!("{}={i}", vb.oid),
                Value::OctetString(s) => format!("{}=\"{}\"", vb.oid, String::from_utf8_lossy(s)),
                Value::Null => vb.oid.to_string(),
            })
            .collect();
        format!(
            "{:?} id={} {}/{} [{}]",
            self.pdu_type,
            self.request_id,
            self.error_status,
            self.error_index,
            binds.join(", ")
        )
    }
}
