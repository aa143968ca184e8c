//! Strict BER codec for the SNMPv1 message subset.
//!
//! Encoding always uses definite, minimal lengths and minimal two's
//! complement integers, so equal messages give identical bytes. Decoding
//! accepts only that canonical form and reports the byte offset of the
//! first problem.

use thiserror::Error;

use super::{ErrorStatus, NtcipMessage, Oid, PduType, Value, VarBind};

pub const TAG_INTEGER: u8 = 0x02;
pub const TAG_OCTET_STRING: u8 = 0x04;
pub const TAG_NULL: u8 = 0x05;
pub const TAG_OID: u8 = 0x06;
pub const TAG_SEQUENCE: u8 = 0x30;
pub const TAG_GET_REQUEST: u8 = 0xA0;
pub const TAG_GET_RESPONSE: u8 = 0xA2;
pub const TAG_SET_REQUEST: u8 = 0xA3;

/// SNMPv1 version field value.
pub const VERSION_1: i64 = 0;

// Longest length field accepted: 0x84 followed by four bytes.
const MAX_LEN_BYTES: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("request PDUs must carry noError/0, got {status:?}/{index}")]
    RequestWithError { status: ErrorStatus, index: u32 },
    #[error("error_index {0} does not fit a signed 32-bit INTEGER")]
    ErrorIndexRange(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeErrorKind {
    #[error("truncated input")]
    Truncated,
    #[error("expected tag {expected:#04x}, found {found:#04x}")]
    UnexpectedTag { expected: u8, found: u8 },
    #[error("indefinite length not allowed")]
    IndefiniteLength,
    #[error("non-minimal length encoding")]
    NonMinimalLength,
    #[error("length field too large")]
    LengthOverflow,
    #[error("empty INTEGER")]
    EmptyInteger,
    #[error("non-minimal INTEGER encoding")]
    NonMinimalInteger,
    #[error("INTEGER out of 32-bit range")]
    IntegerOverflow,
    #[error("malformed OBJECT IDENTIFIER")]
    BadOid,
    #[error("NULL with non-empty contents")]
    BadNull,
    #[error("unsupported value tag {0:#04x}")]
    UnsupportedValue(u8),
    #[error("unsupported SNMP version {0}")]
    UnsupportedVersion(i64),
    #[error("unknown PDU tag {0:#04x}")]
    UnknownPdu(u8),
    #[error("unknown error-status {0}")]
    UnknownErrorStatus(i64),
    #[error("negative error-index {0}")]
    NegativeErrorIndex(i64),
    #[error("request PDU with non-zero error-status or error-index")]
    RequestWithError,
    #[error("trailing bytes")]
    TrailingBytes,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {offset}")]
pub struct DecodeError {
    pub offset: usize,
    pub kind: DecodeErrorKind,
}

fn push_len(out: &mut Vec<u8>, len: usize) {
    if len < 0x80 {
        out.push(len as u8);
    } else {
        let bytes = (len as u64).to_be_bytes();
        let skip = bytes.iter().take_while(|&&b| b == 0).count();
        out.push(0x80 | (8 - skip) as u8);
        out.extend_from_slice(&bytes[skip..]);
    }
}

fn push_tlv(out: &mut Vec<u8>, tag: u8, contents: &[u8]) {
    out.push(tag);
    push_len(out, contents.len());
    out.extend_from_slice(contents);
}

fn integer_contents(v: i64) -> Vec<u8> {
    let bytes = v.to_be_bytes();
    let mut start = 0;
    // drop redundant leading 0x00 / 0xFF octets
    while start < 7 {
        let (b, next) = (bytes[start], bytes[start + 1]);
        if (b == 0x00 && next & 0x80 == 0) || (b == 0xFF && next & 0x80 != 0) {
            start += 1;
        } else {
            break;
        }
    }
    bytes[start..].to_vec()
}

fn push_integer(out: &mut Vec<u8>, v: i64) {
    push_tlv(out, TAG_INTEGER, &integer_contents(v));
}

fn push_base128(out: &mut Vec<u8>, mut v: u64) {
    let mut tmp = [0u8; 10];
    let mut n = 0;
    loop {
        tmp[n] = (v & 0x7F) as u8;
        n += 1;
        v >>= 7;
        if v == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(tmp[i] | if i > 0 { 0x80 } else { 0 });
    }
}

pub(crate) fn oid_contents(oid: &Oid) -> Vec<u8> {
    let arcs = oid.arcs();
    let mut out = Vec::with_capacity(arcs.len() + 4);
    push_base128(&mut out, arcs[0] as u64 * 40 + arcs[1] as u64);
    for &a in &arcs[2..] {
        push_base128(&mut out, a as u64);
    }
    out
}

fn push_value(out: &mut Vec<u8>, v: &Value) {
    match v {
        Value::Integer(i) => push_integer(out, *i as i64),
        Value::OctetString(s) => push_tlv(out, TAG_OCTET_STRING, s),
        Value::Null => push_tlv(out, TAG_NULL, &[]),
    }
}

pub fn encode(msg: &NtcipMessage) -> Result<Vec<u8>, EncodeError> {
    if msg.pdu_type != PduType::GetResponse
        && (msg.error_status != ErrorStatus::NoError || msg.error_index != 0)
    {
        return Err(EncodeError::RequestWithError { status: msg.error_status, index: msg.error_index });
    }
    if msg.error_index > i32::MAX as u32 {
        return Err(EncodeError::ErrorIndexRange(msg.error_index));
    }

    let mut vbl = Vec::new();
    for vb in &msg.varbinds {
        let mut one = Vec::new();
        push_tlv(&mut one, TAG_OID, &oid_contents(&vb.oid));
        push_value(&mut one, &vb.value);
        push_tlv(&mut vbl, TAG_SEQUENCE, &one);
    }

    let mut pdu = Vec::new();
    push_integer(&mut pdu, msg.request_id as i64);
    push_integer(&mut pdu, msg.error_status.code());
    push_integer(&mut pdu, msg.error_index as i64);
    push_tlv(&mut pdu, TAG_SEQUENCE, &vbl);

    let mut body = Vec::new();
    push_integer(&mut body, VERSION_1);
    push_tlv(&mut body, TAG_OCTET_STRING, &msg.community);
    push_tlv(&mut body, msg.pdu_type.tag(), &pdu);

    let mut out = Vec::with_capacity(body.len() + 4);
    push_tlv(&mut out, TAG_SEQUENCE, &body);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    end: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, offset: usize, kind: DecodeErrorKind) -> DecodeError {
        DecodeError { offset, kind }
    }

    fn byte(&mut self) -> Result<u8, DecodeError> {
        if self.pos >= self.end {
            return Err(self.err(self.pos, DecodeErrorKind::Truncated));
        }
        let b = self.buf[self.pos];
        self.pos += 1;
        Ok(b)
    }

    fn peek(&self) -> Result<u8, DecodeError> {
        if self.pos >= self.end {
            return Err(self.err(self.pos, DecodeErrorKind::Truncated));
        }
        Ok(self.buf[self.pos])
    }

    fn length(&mut self) -> Result<usize, DecodeError> {
        let at = self.pos;
        let first = self.byte()?;
        if first < 0x80 {
            return Ok(first as usize);
        }
        if first == 0x80 {
            return Err(self.err(at, DecodeErrorKind::IndefiniteLength));
        }
        let n = (first & 0x7F) as usize;
        if n > MAX_LEN_BYTES {
            return Err(self.err(at, DecodeErrorKind::LengthOverflow));
        }
        let mut len = 0usize;
        for i in 0..n {
            let b = self.byte()?;
            if i == 0 && b == 0 {
                return Err(self.err(at, DecodeErrorKind::NonMinimalLength));
            }
            len = (len << 8) | b as usize;
        }
        if len < 0x80 {
            return Err(self.err(at, DecodeErrorKind::NonMinimalLength));
        }
        Ok(len)
    }

    /// Reads a header with the expected tag and returns a sub-reader over
    /// its contents, advancing past them.
    fn expect(&mut self, tag: u8) -> Result<Reader<'a>, DecodeError> {
        let at = self.pos;
        let found = self.byte()?;
        if found != tag {
            return Err(self.err(at, DecodeErrorKind::UnexpectedTag { expected: tag, found }));
        }
        self.contents()
    }

    fn contents(&mut self) -> Result<Reader<'a>, DecodeError> {
        let len = self.length()?;
        if len > self.end - self.pos {
            return Err(self.err(self.end, DecodeErrorKind::Truncated));
        }
        let sub = Reader { buf: self.buf, pos: self.pos, end: self.pos + len };
        self.pos += len;
        Ok(sub)
    }

    fn finish(&self) -> Result<(), DecodeError> {
        if self.pos != self.end {
            return Err(self.err(self.pos, DecodeErrorKind::TrailingBytes));
        }
        Ok(())
    }

    fn rest(&self) -> &'a [u8] {
        &self.buf[self.pos..self.end]
    }

    fn integer(&mut self) -> Result<(usize, i64), DecodeError> {
        let at = self.pos;
        let c = self.expect(TAG_INTEGER)?;
        let bytes = c.rest();
        if bytes.is_empty() {
            return Err(self.err(c.pos, DecodeErrorKind::EmptyInteger));
        }
        if bytes.len() > 1
            && ((bytes[0] == 0x00 && bytes[1] & 0x80 == 0) || (bytes[0] == 0xFF && bytes[1] & 0x80 != 0))
        {
            return Err(self.err(c.pos, DecodeErrorKind::NonMinimalInteger));
        }
        if bytes.len() > 4 {
            return Err(self.err(c.pos, DecodeErrorKind::IntegerOverflow));
        }
        let mut v: i64 = if bytes[0] & 0x80 != 0 { -1 } else { 0 };
        for &b in bytes {
            v = (v << 8) | b as i64;
        }
        Ok((at, v))
    }

    fn i32(&mut self) -> Result<i32, DecodeError> {
        let (_, v) = self.integer()?;
        // <= 4 content bytes always fits
        Ok(v as i32)
    }

    fn oid(&mut self) -> Result<Oid, DecodeError> {
        let c = self.expect(TAG_OID)?;
        let bytes = c.rest();
        let bad = |off: usize| DecodeError { offset: off, kind: DecodeErrorKind::BadOid };
        if bytes.is_empty() {
            return Err(bad(c.pos));
        }
        let mut subids = Vec::new();
        let mut acc: u64 = 0;
        let mut start = true;
        for (i, &b) in bytes.iter().enumerate() {
            let off = c.pos + i;
            if start && b == 0x80 {
                return Err(bad(off));
            }
            start = false;
            acc = (acc << 7) | (b & 0x7F) as u64;
            if acc > u32::MAX as u64 + 80 {
                return Err(bad(off));
            }
            if b & 0x80 == 0 {
                subids.push(acc);
                acc = 0;
                start = true;
            }
        }
        if !start {
            return Err(bad(c.pos + bytes.len() - 1));
        }
        let first = subids[0];
        let (a0, a1) = if first < 80 { (first / 40, first % 40) } else { (2, first - 80) };
        let mut arcs = Vec::with_capacity(subids.len() + 1);
        arcs.push(a0);
        arcs.push(a1);
        arcs.extend_from_slice(&subids[1..]);
        Oid::new(&arcs).map_err(|_| bad(c.pos))
    }

    fn value(&mut self) -> Result<Value, DecodeError> {
        let at = self.pos;
        match self.peek()? {
            TAG_INTEGER => Ok(Value::Integer(self.i32()?)),
            TAG_OCTET_STRING => {
                let c = self.expect(TAG_OCTET_STRING)?;
                Ok(Value::OctetString(c.rest().to_vec()))
            }
            TAG_NULL => {
                let c = self.expect(TAG_NULL)?;
                if c.pos != c.end {
                    return Err(self.err(at, DecodeErrorKind::BadNull));
                }
                Ok(Value::Null)
            }
            other => Err(self.err(at, DecodeErrorKind::UnsupportedValue(other))),
        }
    }
}

pub fn decode(bytes: &[u8]) -> Result<NtcipMessage, DecodeError> {
    let mut top = Reader { buf: bytes, pos: 0, end: bytes.len() };
    let mut msg = top.expect(TAG_SEQUENCE)?;
    top.finish()?;

    let (at, version) = msg.integer()?;
    if version != VERSION_1 {
        return Err(DecodeError { offset: at, kind: DecodeErrorKind::UnsupportedVersion(version) });
    }
    let community = msg.expect(TAG_OCTET_STRING)?.rest().to_vec();

    let at = msg.pos;
    let tag = msg.byte()?;
    let pdu_type = PduType::from_tag(tag)
        .ok_or(DecodeError { offset: at, kind: DecodeErrorKind::UnknownPdu(tag) })?;
    let mut pdu = msg.contents()?;
    msg.finish()?;

    let request_id = pdu.i32()?;
    let (status_at, status) = pdu.integer()?;
    let error_status = ErrorStatus::from_code(status)
        .ok_or(DecodeError { offset: status_at, kind: DecodeErrorKind::UnknownErrorStatus(status) })?;
    let (at, index) = pdu.integer()?;
    if index < 0 {
        return Err(DecodeError { offset: at, kind: DecodeErrorKind::NegativeErrorIndex(index) });
    }
    // mirror of the encoder's rule, so anything accepted re-encodes
    if pdu_type != PduType::GetResponse && (status != 0 || index != 0) {
        return Err(DecodeError { offset: status_at, kind: DecodeErrorKind::RequestWithError });
    }
    let mut vbl = pdu.expect(TAG_SEQUENCE)?;
    pdu.finish()?;

    let mut varbinds = Vec::new();
    while vbl.pos < vbl.end {
        let mut vb = vbl.expect(TAG_SEQUENCE)?;
        let oid = vb.oid()?;
        let value = vb.value()?;
        vb.finish()?;
        varbinds.push(VarBind { oid, value });
    }

    Ok(NtcipMessage {
        community,
        pdu_type,
        request_id,
        error_status,
        error_index: index as u32,
        varbinds,
    })
}
