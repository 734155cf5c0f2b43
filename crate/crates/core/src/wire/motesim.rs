//! Binary TLV protocol of constrained nodes: 1-byte type, 2-byte big-endian
//! payload length, payload. Frames reach a mote through its GTO parent, which
//! prefixes every relayed frame with the length-prefixed target node id.

use super::{bad, Command, DataFrame, ErrCode, PlatformCodec, Reply, WireError};
use crate::model::{Platform, Unit};

pub const T_DEPLOY: u8 = 0x01;
pub const T_START: u8 = 0x02;
pub const T_STOP: u8 = 0x03;
pub const T_DELETE: u8 = 0x04;
pub const T_STATE_REQ: u8 = 0x05;
/// Reserved for migration; motes reject them as unsupported.
pub const T_MIGOUT: u8 = 0x06;
pub const T_MIGIN: u8 = 0x07;
pub const T_OK: u8 = 0x81;
pub const T_ERR: u8 = 0x82;
pub const T_DATA: u8 = 0x90;

/// Slot byte meaning "any free slot" in DEPLOY.
pub const ANY_SLOT: u8 = 0xFF;

const DATA_LEN: usize = 1 + 4 + 8 + 8 + 1;

pub struct MotesimCodec;

fn frame(kind: u8, payload: &[u8]) -> Result<Vec<u8>, WireError> {
    let len = u16::try_from(payload.len()).map_err(|_| WireError::TooLarge(payload.len()))?;
    let mut v = Vec::with_capacity(3 + payload.len());
    v.push(kind);
    v.extend_from_slice(&len.to_be_bytes());
    v.extend_from_slice(payload);
    Ok(v)
}

fn split(b: &[u8]) -> Result<(u8, &[u8]), WireError> {
    if b.len() < 3 {
        return Err(bad("short frame"));
    }
    let len = u16::from_be_bytes([b[1], b[2]]) as usize;
    if b.len() != 3 + len {
        return Err(bad("length mismatch"));
    }
    Ok((b[0], &b[3..]))
}

fn one_slot(p: &[u8]) -> Result<u8, WireError> {
    match p {
        [s] if *s != ANY_SLOT => Ok(*s),
        _ => Err(bad("expected one slot byte")),
    }
}

fn real_slot(s: u8) -> Result<u8, WireError> {
    if s == ANY_SLOT {
        Err(bad("slot 255 is reserved"))
    } else {
        Ok(s)
    }
}

impl PlatformCodec for MotesimCodec {
    fn platform(&self) -> Platform {
        Platform::Motesim
    }

    fn encode_command(&self, cmd: &Command) -> Result<Vec<u8>, WireError> {
        match cmd {
            Command::Deploy { slot, manifest } => {
                if manifest.is_empty() {
                    return Err(bad("empty manifest"));
                }
                let mut p = vec![match slot {
                    Some(s) => real_slot(*s)?,
                    None => ANY_SLOT,
                }];
                p.extend_from_slice(manifest);
                frame(T_DEPLOY, &p)
            }
            Command::Start(s) => frame(T_START, &[real_slot(*s)?]),
            Command::Stop(s) => frame(T_STOP, &[real_slot(*s)?]),
            Command::Delete(s) => frame(T_DELETE, &[real_slot(*s)?]),
            Command::State(s) => frame(T_STATE_REQ, &[real_slot(*s)?]),
            Command::MigOut(_) => Err(WireError::Unsupported("MIGOUT")),
            Command::MigIn { .. } => Err(WireError::Unsupported("MIGIN")),
        }
    }

    fn decode_command(&self, b: &[u8]) -> Result<Command, WireError> {
        let (kind, p) = split(b)?;
        match kind {
            T_DEPLOY => match p {
                [s, m @ ..] if !m.is_empty() => Ok(Command::Deploy {
                    slot: (*s != ANY_SLOT).then_some(*s),
                    manifest: m.to_vec(),
                }),
                _ => Err(bad("deploy payload")),
            },
            T_START => Ok(Command::Start(one_slot(p)?)),
            T_STOP => Ok(Command::Stop(one_slot(p)?)),
            T_DELETE => Ok(Command::Delete(one_slot(p)?)),
            T_STATE_REQ => Ok(Command::State(one_slot(p)?)),
            T_MIGOUT => Err(WireError::Unsupported("MIGOUT")),
            T_MIGIN => Err(WireError::Unsupported("MIGIN")),
            _ => Err(bad(format!("unknown command type {kind:#04x}"))),
        }
    }

    /// ERR frames carry only the code byte; any text is dropped.
    fn encode_reply(&self, reply: &Reply) -> Vec<u8> {
        let r = match reply {
            Reply::Ok { slot, payload } => {
                let mut p = vec![*slot];
                p.extend_from_slice(payload);
                frame(T_OK, &p)
            }
            Reply::Err { code, .. } => frame(T_ERR, &[code.byte()]),
        };
        r.expect("reply payloads fit in a frame")
    }

    fn decode_reply(&self, b: &[u8]) -> Result<Reply, WireError> {
        let (kind, p) = split(b)?;
        match (kind, p) {
            (T_OK, [slot, rest @ ..]) => Ok(Reply::Ok {
                slot: real_slot(*slot)?,
                payload: rest.to_vec(),
            }),
            (T_ERR, [code]) => Ok(Reply::Err {
                code: ErrCode::from_byte(*code).ok_or_else(|| bad("unknown error code"))?,
                text: String::new(),
            }),
            _ => Err(bad("unknown reply")),
        }
    }

    fn encode_data(&self, d: &DataFrame) -> Vec<u8> {
        let mut p = Vec::with_capacity(DATA_LEN);
        p.push(d.slot);
        p.extend_from_slice(&d.seq.to_be_bytes());
        p.extend_from_slice(&d.ts_ms.to_be_bytes());
        p.extend_from_slice(&d.value.to_bits().to_be_bytes());
        p.push(d.unit.code());
        frame(T_DATA, &p).unwrap()
    }

    fn decode_data(&self, b: &[u8]) -> Result<DataFrame, WireError> {
        let (kind, p) = split(b)?;
        if kind != T_DATA || p.len() != DATA_LEN {
            return Err(bad("not a data frame"));
        }
        let value = f64::from_bits(u64::from_be_bytes(p[13..21].try_into().unwrap()));
        if !value.is_finite() {
            return Err(bad("non-finite value"));
        }
        Ok(DataFrame {
            slot: p[0],
            seq: u32::from_be_bytes(p[1..5].try_into().unwrap()),
            ts_ms: u64::from_be_bytes(p[5..13].try_into().unwrap()),
            value,
            unit: Unit::from_code(p[21]).ok_or_else(|| bad("unknown unit"))?,
        })
    }
}

/// GTO relay envelope: `[len][node_id][frame]`.
pub fn wrap_relay(node_id: &str, frame: &[u8]) -> Result<Vec<u8>, WireError> {
    let id = node_id.as_bytes();
    if id.is_empty() || id.len() > 255 {
        return Err(bad("relay target id length"));
    }
    let mut v = Vec::with_capacity(1 + id.len() + frame.len());
    v.push(id.len() as u8);
    v.extend_from_slice(id);
    v.extend_from_slice(frame);
    Ok(v)
}

pub fn unwrap_relay(b: &[u8]) -> Result<(String, &[u8]), WireError> {
    let (&n, rest) = b.split_first().ok_or_else(|| bad("empty relay frame"))?;
    let n = n as usize;
    if n == 0 || rest.len() < n {
        return Err(bad("relay prefix"));
    }
    let id = std::str::from_utf8(&rest[..n]).map_err(|_| bad("relay target id"))?;
    Ok((id.to_string(), &rest[n..]))
}
