//! Datagram format spoken between devices and the gateway.
//!
//! ```text
//! 0        1          2      3..5          5..7      ..         ..+2       ..
//! version  msg_type   code   message_id    path_len  path       pay_len    payload
//! (=1)     0 Request  0 -    u16 BE        u16 BE    UTF-8      u16 BE     bytes
//!          1 Ack      1 GET
//!          2 Error    2 PUT
//!                     3 POST
//! ```
//!
//! A datagram is at most [`MAX_DATAGRAM`] bytes and must be consumed
//! exactly. Error replies carry a one-byte [`ErrorReason`], a one-byte
//! contract error code (0 when not applicable) and a UTF-8 detail string.

use std::fmt;

use crate::runtime::ContractError;

pub const VERSION: u8 = 1;
pub const MAX_DATAGRAM: usize = 1152;
const HEADER_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MsgType {
    Request = 0,
    Ack = 1,
    Error = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Code {
    Empty = 0,
    Get = 1,
    Put = 2,
    Post = 3,
}

impl MsgType {
    fn from_u8(b: u8) -> Option<Self> {
        Some(match b {
            0 => MsgType::Request,
            1 => MsgType::Ack,
            2 => MsgType::Error,
            _ => return None,
        })
    }
}

impl Code {
    fn from_u8(b: u8) -> Option<Self> {
        Some(match b {
            0 => Code::Empty,
            1 => Code::Get,
            2 => Code::Put,
            3 => Code::Post,
            _ => return None,
        })
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Code::Empty => "EMPTY",
            Code::Get => "GET",
            Code::Put => "PUT",
            Code::Post => "POST",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Message {
    pub msg_type: MsgType,
    pub code: Code,
    pub message_id: u16,
    pub path: String,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("datagram of {0} bytes exceeds the limit")]
    TooLarge(usize),
    #[error("truncated datagram")]
    Truncated,
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("unknown message type {0}")]
    BadType(u8),
    #[error("unknown code {0}")]
    BadCode(u8),
    #[error("path is not UTF-8")]
    BadPath,
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("field too long")]
    FieldTooLong,
}

/// Reason codes carried in the first payload byte of an Error reply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorReason {
    Malformed = 1,
    BadVersion = 2,
    NotFound = 3,
    UnknownThing = 4,
    UnknownRequester = 5,
    BadPayload = 6,
    Reverted = 7,
    Internal = 8,
}

impl ErrorReason {
    pub const ALL: [ErrorReason; 8] = [
        ErrorReason::Malformed,
        ErrorReason::BadVersion,
        ErrorReason::NotFound,
        ErrorReason::UnknownThing,
        ErrorReason::UnknownRequester,
        ErrorReason::BadPayload,
        ErrorReason::Reverted,
        ErrorReason::Internal,
    ];

    pub fn from_u8(b: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|r| *r as u8 == b)
    }
}

impl fmt::Display for ErrorReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Message {
    pub fn request(code: Code, message_id: u16, path: &str, payload: &[u8]) -> Message {
        Message {
            msg_type: MsgType::Request,
            code,
            message_id,
            path: path.to_string(),
            payload: payload.to_vec(),
        }
    }

    pub fn ack(code: Code, message_id: u16, payload: Vec<u8>) -> Message {
        Message {
            msg_type: MsgType::Ack,
            code,
            message_id,
            path: String::new(),
            payload,
        }
    }

    pub fn error(code: Code, message_id: u16, reason: ErrorReason, contract: Option<ContractError>, detail: &str) -> Message {
        let mut payload = vec![reason as u8, contract.map_or(0, |e| e.code() as u8)];
        payload.extend_from_slice(detail.as_bytes());
        payload.truncate(MAX_DATAGRAM - HEADER_LEN - 4);
        Message {
            msg_type: MsgType::Error,
            code,
            message_id,
            path: String::new(),
            payload,
        }
    }

    /// For Error replies: the reason, the forwarded contract error and the
    /// detail text.
    pub fn error_parts(&self) -> Option<(ErrorReason, Option<ContractError>, String)> {
        if self.msg_type != MsgType::Error || self.payload.len() < 2 {
            return None;
        }
        Some((
            ErrorReason::from_u8(self.payload[0])?,
            ContractError::from_code(self.payload[1] as u16),
            String::from_utf8_lossy(&self.payload[2..]).into_owned(),
        ))
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        if self.path.len() > u16::MAX as usize || self.payload.len() > u16::MAX as usize {
            return Err(WireError::FieldTooLong);
        }
        let len = HEADER_LEN + 2 + self.path.len() + 2 + self.payload.len();
        if len > MAX_DATAGRAM {
            return Err(WireError::TooLarge(len));
        }
        let mut out = Vec::with_capacity(len);
        out.push(VERSION);
        out.push(self.msg_type as u8);
        out.push(self.code as u8);
        out.extend_from_slice(&self.message_id.to_be_bytes());
        out.extend_from_slice(&(self.path.len() as u16).to_be_bytes());
        out.extend_from_slice(self.path.as_bytes());
        out.extend_from_slice(&(self.payload.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.payload);
        Ok(out)
    }

    pub fn decode(buf: &[u8]) -> Result<Message, WireError> {
        if buf.len() > MAX_DATAGRAM {
            return Err(WireError::TooLarge(buf.len()));
        }
        if buf.len() < HEADER_LEN {
            return Err(WireError::Truncated);
        }
        if buf[0] != VERSION {
            return Err(WireError::BadVersion(buf[0]));
        }
        let msg_type = MsgType::from_u8(buf[1]).ok_or(WireError::BadType(buf[1]))?;
        let code = Code::from_u8(buf[2]).ok_or(WireError::BadCode(buf[2]))?;
        let message_id = u16::from_be_bytes([buf[3], buf[4]]);
        let mut rest = &buf[HEADER_LEN..];
        let path = take_field(&mut rest)?;
        let path = std::str::from_utf8(path).map_err(|_| WireError::BadPath)?.to_string();
        let payload = take_field(&mut rest)?.to_vec();
        if !rest.is_empty() {
            return Err(WireError::Trailing(rest.len()));
        }
        Ok(Message {
            msg_type,
            code,
            message_id,
            path,
            payload,
        })
    }
}

fn take_field<'a>(rest: &mut &'a [u8]) -> Result<&'a [u8], WireError> {
    if rest.len() < 2 {
        return Err(WireError::Truncated);
    }
    let len = u16::from_be_bytes([rest[0], rest[1]]) as usize;
    let body = rest.get(2..2 + len).ok_or(WireError::Truncated)?;
    *rest = &rest[2 + len..];
    Ok(body)
}

/// Message id of a possibly malformed datagram: bytes 3..5 when present,
/// otherwise 0.
pub fn salvage_message_id(buf: &[u8]) -> u16 {
    if buf.len() >= HEADER_LEN {
        u16::from_be_bytes([buf[3], buf[4]])
    } else {
        0
    }
}

/// Request code of a possibly malformed datagram, `Empty` if unreadable.
pub fn salvage_code(buf: &[u8]) -> Code {
    buf.get(2).and_then(|b| Code::from_u8(*b)).unwrap_or(Code::Empty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bit_exact_layout() {
        let m = Message::request(Code::Put, 0x1234, "/a", b"xy");
        assert_eq!(
            m.encode().unwrap(),
            vec![1, 0, 2, 0x12, 0x34, 0, 2, b'/', b'a', 0, 2, b'x', b'y']
        );
    }

    #[test]
    fn rejects_malformed() {
        let good = Message::request(Code::Get, 7, "/things/t/last", b"").encode().unwrap();
        assert_eq!(Message::decode(&good[..4]), Err(WireError::Truncated));
        let mut v2 = good.clone();
        v2[0] = 2;
        assert_eq!(Message::decode(&v2), Err(WireError::BadVersion(2)));
        let mut extra = good.clone();
        extra.push(0);
        assert_eq!(Message::decode(&extra), Err(WireError::Trailing(1)));
        assert_eq!(Message::decode(&vec![1; MAX_DATAGRAM + 1]), Err(WireError::TooLarge(MAX_DATAGRAM + 1)));
        assert_eq!(salvage_message_id(&good), 7);
        assert_eq!(salvage_message_id(&good[..3]), 0);
    }

    #[test]
    fn size_limit_on_encode() {
        let m = Message::request(Code::Put, 1, "/p", &vec![0; MAX_DATAGRAM]);
        assert!(matches!(m.encode(), Err(WireError::TooLarge(_))));
    }

    #[test]
    fn error_reply_parts() {
        let e = Message::error(Code::Post, 9, ErrorReason::Reverted, Some(ContractError::NotAuthorized), "NotAuthorized");
        let back = Message::decode(&e.encode().unwrap()).unwrap();
        let (reason, ce, detail) = back.error_parts().unwrap();
        assert_eq!(reason, ErrorReason::Reverted);
        assert_eq!(ce, Some(ContractError::NotAuthorized));
        assert_eq!(detail, "NotAuthorized");
    }

    proptest! {
        #[test]
        fn roundtrip(t in 0u8..3, c in 0u8..4, id: u16, path in "[ -~]{0,64}", payload in proptest::collection::vec(any::<u8>(), 0..256)) {
            let m = Message {
                msg_type: MsgType::from_u8(t).unwrap(),
                code: Code::from_u8(c).unwrap(),
                message_id: id,
                path,
                payload,
            };
            prop_assert_eq!(Message::decode(&m.encode().unwrap()).unwrap(), m);
        }

        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = Message::decode(&bytes);
        }
    }
}
