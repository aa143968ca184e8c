//! Client-side manager: places pedestrian calls and reads status.

use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::controller::PhaseId;

use super::{ber, mib, ErrorStatus, NtcipMessage, Oid, PduType, Value, VarBind, DEFAULT_COMMUNITY};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManagerConfig {
    pub community: Vec<u8>,
    /// Wait per attempt.
    pub timeout: Duration,
    /// Total sends before giving up, all with the same request id.
    pub attempts: u32,
}

impl Default for ManagerConfig {
    fn default() -> Self {
        ManagerConfig {
            community: DEFAULT_COMMUNITY.to_vec(),
            timeout: Duration::from_millis(500),
            attempts: 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum ManagerError {
    #[error("socket error: {0}")]
    Io(#[from] io::Error),
    #[error("controller unreachable: no response after {attempts} attempts")]
    Unreachable { attempts: u32 },
    #[error("controller rejected request: {status} at index {index}")]
    Rejected { status: ErrorStatus, index: u32 },
    #[error("cannot encode request: {0}")]
    Encode(#[from] ber::EncodeError),
}

/// A matching noError response.
#[derive(Debug, Clone, PartialEq)]
pub struct Ack {
    pub request_id: i32,
    pub response: NtcipMessage,
    pub attempts_used: u32,
}

#[derive(Debug)]
pub struct Manager {
    socket: UdpSocket,
    agent: SocketAddr,
    config: ManagerConfig,
    next_id: i32,
}

impl Manager {
    /// Binds an ephemeral local socket aimed at `agent`.
    pub fn connect(agent: SocketAddr, config: ManagerConfig) -> io::Result<Self> {
        let local: SocketAddr = if agent.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" }
            .parse()
            .expect("static address");
        let socket = UdpSocket::bind(local)?;
        Ok(Manager { socket, agent, config, next_id: 1 })
    }

    pub fn config(&self) -> &ManagerConfig {
        &self.config
    }

    pub fn agent_addr(&self) -> SocketAddr {
        self.agent
    }

    /// Request ids count up from 1 so runs are reproducible.
    pub fn next_request_id(&mut self) -> i32 {
        let id = self.next_id;
        self.next_id = self.next_id.wrapping_add(1).max(1);
        id
    }

    pub fn ped_call_request(&mut self, phase: PhaseId) -> NtcipMessage {
        let id = self.next_request_id();
        NtcipMessage::set_request(
            self.config.community.clone(),
            id,
            vec![VarBind::new(mib::ped_call(phase), Value::Integer(1))],
        )
    }

    pub fn get_request(&mut self, oids: Vec<Oid>) -> NtcipMessage {
        let id = self.next_request_id();
        NtcipMessage::get_request(self.config.community.clone(), id, oids)
    }

    /// Sends one datagram and returns the bytes on the wire.
    pub fn send(&self, msg: &NtcipMessage) -> Result<Vec<u8>, ManagerError> {
        let bytes = ber::encode(msg)?;
        self.socket.send_to(&bytes, self.agent)?;
        Ok(bytes)
    }

    /// Waits up to `timeout` for the GetResponse answering `request_id`.
    /// Anything else that arrives meanwhile is discarded.
    pub fn await_response(
        &self,
        request_id: i32,
        timeout: Duration,
    ) -> Result<Option<(NtcipMessage, Vec<u8>)>, ManagerError> {
        let deadline = Instant::now() + timeout;
        let mut buf = [0u8; 2048];
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(None);
            }
            self.socket.set_read_timeout(Some(left))?;
            let (n, from) = match self.socket.recv_from(&mut buf) {
                Ok(x) => x,
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                    return Ok(None)
                }
                Err(e) => return Err(e.into()),
            };
            if from != self.agent {
                continue;
            }
            let Ok(msg) = ber::decode(&buf[..n]) else { continue };
            if msg.pdu_type == PduType::GetResponse
                && msg.request_id == request_id
                && msg.community == self.config.community
            {
                return Ok(Some((msg, buf[..n].to_vec())));
            }
        }
    }

    /// Sends `req` and retries until a matching response arrives or the
    /// attempts run out.
    pub fn transact(&mut self, req: &NtcipMessage) -> Result<Ack, ManagerError> {
        for attempt in 1..=self.config.attempts {
            self.send(req)?;
            if let Some((response, _)) = self.await_response(req.request_id, self.config.timeout)? {
                if response.error_status != ErrorStatus::NoError {
                    return Err(ManagerError::Rejected {
                        status: response.error_status,
                        index: response.error_index,
                    });
                }
                return Ok(Ack { request_id: req.request_id, response, attempts_used: attempt });
            }
        }
        Err(ManagerError::Unreachable { attempts: self.config.attempts })
    }

    /// Places a pedestrian call on `phase`. Blocks for at most
    /// `attempts * timeout`.
    pub fn place_call(&mut self, phase: PhaseId) -> Result<Ack, ManagerError> {
        let req = self.ped_call_request(phase);
        self.transact(&req)
    }

    pub fn get(&mut self, oids: Vec<Oid>) -> Result<Vec<VarBind>, ManagerError> {
        let req = self.get_request(oids);
        Ok(self.transact(&req)?.response.varbinds)
    }
}
