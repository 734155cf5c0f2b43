//! Node command/reply/data framing for the two simulated platforms.
//!
//! Both the node side (sensor simulation) and the IaaS side (VS communicator)
//! speak through these codecs, so every exchange in the system crosses a real
//! encode/decode boundary.

mod motesim;
mod spotsim;

pub use motesim::{unwrap_relay, wrap_relay, MotesimCodec};
pub use spotsim::SpotsimCodec;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{Platform, Unit};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("bad frame: {0}")]
    BadFrame(String),
    #[error("{0} is not supported on this platform")]
    Unsupported(&'static str),
    #[error("frame payload too large ({0} bytes)")]
    TooLarge(usize),
}

pub(crate) fn bad(msg: impl Into<String>) -> WireError {
    WireError::BadFrame(msg.into())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    /// `slot: None` lets the node pick the first free slot.
    Deploy {
        slot: Option<u8>,
        manifest: Vec<u8>,
    },
    Start(u8),
    Stop(u8),
    Delete(u8),
    State(u8),
    MigOut(u8),
    /// Installs migrated state. Targeting a slot frozen by `MigOut` on the
    /// same node thaws it instead.
    MigIn {
        slot: Option<u8>,
        manifest: Vec<u8>,
        state: Vec<u8>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Deploy { .. } => "DEPLOY",
            Command::Start(_) => "START",
            Command::Stop(_) => "STOP",
            Command::Delete(_) => "DELETE",
            Command::State(_) => "STATE",
            Command::MigOut(_) => "MIGOUT",
            Command::MigIn { .. } => "MIGIN",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrCode {
    Capacity,
    Energy,
    BadFrame,
    Unsupported,
    QueueFull,
    NoSlot,
}

impl ErrCode {
    pub const ALL: [ErrCode; 6] = [
        ErrCode::Capacity,
        ErrCode::Energy,
        ErrCode::BadFrame,
        ErrCode::Unsupported,
        ErrCode::QueueFull,
        ErrCode::NoSlot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrCode::Capacity => "CAPACITY",
            ErrCode::Energy => "ENERGY",
            ErrCode::BadFrame => "BADFRAME",
            ErrCode::Unsupported => "UNSUPPORTED",
            ErrCode::QueueFull => "QUEUEFULL",
            ErrCode::NoSlot => "NOSLOT",
        }
    }

    pub fn byte(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_byte(b: u8) -> Option<ErrCode> {
        b.checked_sub(1)
            .and_then(|i| ErrCode::ALL.get(i as usize).copied())
    }
}

impl fmt::Display for ErrCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrCode {
    type Err = WireError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrCode::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| bad(format!("unknown error code {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reply {
    /// An empty payload means "no payload".
    Ok {
        slot: u8,
        payload: Vec<u8>,
    },
    Err {
        code: ErrCode,
        text: String,
    },
}

impl Reply {
    pub fn ok(slot: u8) -> Self {
        Reply::Ok {
            slot,
            payload: Vec::new(),
        }
    }

    pub fn err(code: ErrCode, text: impl Into<String>) -> Self {
        Reply::Err {
            code,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataFrame {
    pub slot: u8,
    pub seq: u32,
    pub ts_ms: u64,
    pub value: f64,
    pub unit: Unit,
}

/// Slot status carried in `STATE` replies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotStatus {
    Deploying,
    Idle,
    Running,
    Frozen,
}

/// Five bytes: status, next sequence number (u32 BE).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotReport {
    pub status: SlotStatus,
    pub next_seq: u32,
}

impl SlotReport {
    pub fn to_bytes(self) -> Vec<u8> {
        let mut v = vec![match self.status {
            SlotStatus::Deploying => 0,
            SlotStatus::Idle => 1,
            SlotStatus::Running => 2,
            SlotStatus::Frozen => 3,
        }];
        v.extend_from_slice(&self.next_seq.to_be_bytes());
        v
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, WireError> {
        let [s, rest @ ..] = b else {
            return Err(bad("empty slot report"));
        };
        let status = match s {
            0 => SlotStatus::Deploying,
            1 => SlotStatus::Idle,
            2 => SlotStatus::Running,
            3 => SlotStatus::Frozen,
            _ => return Err(bad("unknown slot status")),
        };
        let next_seq = u32::from_be_bytes(rest.try_into().map_err(|_| bad("slot report length"))?);
        Ok(SlotReport { status, next_seq })
    }
}

/// Transferable task state: whether it was running and the next sequence
/// number it will emit. Five bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MigrationState {
    pub running: bool,
    pub next_seq: u32,
}

impl MigrationState {
    pub const LEN: usize = 5;

    pub fn to_bytes(self) -> Vec<u8> {
        let mut v = vec![self.running as u8];
        v.extend_from_slice(&self.next_seq.to_be_bytes());
        v
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, WireError> {
        if b.len() != Self::LEN || b[0] > 1 {
            return Err(bad("migration state"));
        }
        Ok(MigrationState {
            running: b[0] == 1,
            next_seq: u32::from_be_bytes(b[1..5].try_into().unwrap()),
        })
    }
}

/// `MIGOUT` reply payload: migration state followed by the manifest bytes.
pub fn encode_migout_payload(state: MigrationState, manifest: &[u8]) -> Vec<u8> {
    let mut v = state.to_bytes();
    v.extend_from_slice(manifest);
    v
}

pub fn decode_migout_payload(b: &[u8]) -> Result<(MigrationState, Vec<u8>), WireError> {
    if b.len() <= MigrationState::LEN {
        return Err(bad("migout payload too short"));
    }
    let state = MigrationState::from_bytes(&b[..MigrationState::LEN])?;
    Ok((state, b[MigrationState::LEN..].to_vec()))
}

/// Encode/decode for one platform's protocol, both directions.
pub trait PlatformCodec: Send + Sync {
    fn platform(&self) -> Platform;
    fn encode_command(&self, cmd: &Command) -> Result<Vec<u8>, WireError>;
    fn decode_command(&self, frame: &[u8]) -> Result<Command, WireError>;
    fn encode_reply(&self, reply: &Reply) -> Vec<u8>;
    fn decode_reply(&self, frame: &[u8]) -> Result<Reply, WireError>;
    fn encode_data(&self, data: &DataFrame) -> Vec<u8>;
    fn decode_data(&self, frame: &[u8]) -> Result<DataFrame, WireError>;
}

pub fn codec_for(platform: Platform) -> &'static dyn PlatformCodec {
    match platform {
        Platform::Spotsim => &SpotsimCodec,
        Platform::Motesim => &MotesimCodec,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn err_code_bytes() {
        for c in ErrCode::ALL {
            assert_eq!(ErrCode::from_byte(c.byte()), Some(c));
            assert_eq!(c.as_str().parse::<ErrCode>().unwrap(), c);
        }
        assert_eq!(ErrCode::from_byte(0), None);
        assert_eq!(ErrCode::from_byte(7), None);
    }

    #[test]
    fn migration_payload() {
        let st = MigrationState {
            running: true,
            next_seq: 42,
        };
        let p = encode_migout_payload(st, b"m=1\n");
        assert_eq!(decode_migout_payload(&p).unwrap(), (st, b"m=1\n".to_vec()));
        assert!(decode_migout_payload(&p[..5]).is_err());
        assert!(MigrationState::from_bytes(&[2, 0, 0, 0, 0]).is_err());
    }
}
