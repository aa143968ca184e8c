//! Controller-side agent.

use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::time::Duration;

use crate::controller::{Controller, ControllerError, PhaseId, SignalSnapshot};

use super::mib::{self, Access, ObjectKind, ObjectRegistry};
use super::{ber, DecodeError, ErrorStatus, NtcipMessage, PduType, Value};

/// What the agent needs from the controller it fronts.
pub trait ControllerAccess {
    fn snapshot(&self) -> SignalSnapshot;
    fn place_ped_call(&mut self, phase: PhaseId) -> Result<bool, ControllerError>;
    fn ped_call_latched(&self, phase: PhaseId) -> Option<bool>;
}

impl ControllerAccess for Controller {
    fn snapshot(&self) -> SignalSnapshot {
        Controller::snapshot(self)
    }

    fn place_ped_call(&mut self, phase: PhaseId) -> Result<bool, ControllerError> {
        Controller::place_ped_call(self, phase)
    }

    fn ped_call_latched(&self, phase: PhaseId) -> Option<bool> {
        Controller::ped_call_latched(self, phase)
    }
}

fn read(kind: ObjectKind, ctl: &dyn ControllerAccess) -> Option<Value> {
    let snap = ctl.snapshot();
    let v = match kind {
        ObjectKind::PedCall(p) => ctl.ped_call_latched(p)? as i32,
        ObjectKind::PedIndication(p) => snap.ped(p)?.code(),
        ObjectKind::ActivePhase => snap.active_phase.get() as i32,
        ObjectKind::RemainingWalk => (snap.remaining_walk * 10.0).round() as i32,
        ObjectKind::SignalInterval => mib::interval_code(snap.interval),
    };
    Some(Value::Integer(v))
}

/// Answers one decoded request. `None` means drop silently: wrong
/// community, or a message that is not a request.
pub fn agent_handle<C: ControllerAccess>(
    req: &NtcipMessage,
    registry: &ObjectRegistry,
    community: &[u8],
    ctl: &mut C,
) -> Option<NtcipMessage> {
    if req.community != community || !req.is_request() {
        return None;
    }
    let mut kinds = Vec::with_capacity(req.varbinds.len());
    for (i, vb) in req.varbinds.iter().enumerate() {
        let index = i as u32 + 1;
        let Some(kind) = registry.resolve(&vb.oid) else {
            return Some(req.response(ErrorStatus::NoSuchName, index));
        };
        if req.pdu_type == PduType::SetRequest {
            let writable = kind.access() == Access::ReadWrite;
            if !writable || vb.value != Value::Integer(1) {
                return Some(req.response(ErrorStatus::BadValue, index));
            }
        }
        kinds.push(kind);
    }

    match req.pdu_type {
        PduType::SetRequest => {
            // validated above: every kind is a pedCall
            for (i, kind) in kinds.iter().enumerate() {
                if let ObjectKind::PedCall(p) = kind {
                    if ctl.place_ped_call(*p).is_err() {
                        return Some(req.response(ErrorStatus::GenErr, i as u32 + 1));
                    }
                }
            }
            Some(req.response(ErrorStatus::NoError, 0))
        }
        PduType::GetRequest => {
            let mut resp = req.response(ErrorStatus::NoError, 0);
            for (i, kind) in kinds.into_iter().enumerate() {
                match read(kind, &*ctl) {
                    Some(v) => resp.varbinds[i].value = v,
                    None => return Some(req.response(ErrorStatus::GenErr, i as u32 + 1)),
                }
            }
            Some(resp)
        }
        PduType::GetResponse => None,
    }
}

/// One datagram handled by [`Agent::serve_one`].
#[derive(Debug, Clone, PartialEq)]
pub struct Served {
    pub from: SocketAddr,
    pub request_bytes: Vec<u8>,
    pub request: Result<NtcipMessage, DecodeError>,
    pub response: Option<NtcipMessage>,
    pub response_bytes: Option<Vec<u8>>,
}

/// UDP agent. Serves one request at a time; the caller owns the controller
/// and decides when requests are interleaved with ticks.
#[derive(Debug)]
pub struct Agent {
    socket: UdpSocket,
    registry: ObjectRegistry,
    community: Vec<u8>,
    drop_all: bool,
}

impl Agent {
    pub fn bind(addr: impl ToSocketAddrs, registry: ObjectRegistry, community: Vec<u8>) -> io::Result<Self> {
        let socket = UdpSocket::bind(addr)?;
        Ok(Agent { socket, registry, community, drop_all: false })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    /// Fault injection: receive and discard every datagram.
    pub fn set_drop_all(&mut self, drop_all: bool) {
        self.drop_all = drop_all;
    }

    pub fn registry(&self) -> &ObjectRegistry {
        &self.registry
    }

    /// Waits up to `timeout` for one datagram and answers it. Returns
    /// `Ok(None)` when nothing arrived.
    pub fn serve_one<C: ControllerAccess>(&self, ctl: &mut C, timeout: Duration) -> io::Result<Option<Served>> {
        self.socket.set_read_timeout(Some(timeout.max(Duration::from_micros(1))))?;
        let mut buf = [0u8; 2048];
        let (n, from) = match self.socket.recv_from(&mut buf) {
            Ok(x) => x,
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => return Ok(None),
            Err(e) => return Err(e),
        };
        let request_bytes = buf[..n].to_vec();
        let request = ber::decode(&request_bytes);
        let mut served = Served { from, request_bytes, request, response: None, response_bytes: None };
        if self.drop_all {
            return Ok(Some(served));
        }
        if let Ok(req) = &served.request {
            if let Some(resp) = agent_handle(req, &self.registry, &self.community, ctl) {
                let bytes = ber::encode(&resp).expect("responses are always encodable");
                self.socket.send_to(&bytes, from)?;
                served.response = Some(resp);
                served.response_bytes = Some(bytes);
            }
        }
        Ok(Some(served))
    }
}
