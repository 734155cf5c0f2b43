//! Line-oriented text protocol of capable nodes.
//!
//! Requests: `DEPLOY <slot|-> <b64 manifest>`, `START <slot>`, `STOP <slot>`,
//! `DELETE <slot>`, `STATE <slot>`, `MIGOUT <slot>`,
//! `MIGIN <slot|-> <b64 manifest> <b64 state>`.
//! Replies: `OK <slot>[ <b64 payload>]`, `ERR <code>[ <text>]`.
//! Data: `DATA <slot> <seq> <ts_ms> <value> <unit>`.
//! Every frame is one UTF-8 line terminated by a single LF.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;

use super::{bad, Command, DataFrame, PlatformCodec, Reply, WireError};
use crate::model::{Platform, Unit};

pub struct SpotsimCodec;

fn line(frame: &[u8]) -> Result<&str, WireError> {
    let s = std::str::from_utf8(frame).map_err(|_| bad("not utf-8"))?;
    let body = s.strip_suffix('\n').ok_or_else(|| bad("missing LF"))?;
    if body.contains('\n') {
        return Err(bad("embedded LF"));
    }
    Ok(body)
}

fn tokens(body: &str) -> Result<Vec<&str>, WireError> {
    let t: Vec<&str> = body.split(' ').collect();
    if t.iter().any(|x| x.is_empty()) {
        return Err(bad("empty token"));
    }
    Ok(t)
}

fn slot(tok: &str) -> Result<u8, WireError> {
    tok.parse().map_err(|_| bad(format!("bad slot {tok:?}")))
}

fn slot_sel(tok: &str) -> Result<Option<u8>, WireError> {
    if tok == "-" {
        Ok(None)
    } else {
        slot(tok).map(Some)
    }
}

fn fmt_slot_sel(s: Option<u8>) -> String {
    s.map_or_else(|| "-".to_string(), |s| s.to_string())
}

fn b64(tok: &str) -> Result<Vec<u8>, WireError> {
    let v = B64.decode(tok).map_err(|_| bad("bad base64"))?;
    if v.is_empty() {
        return Err(bad("empty payload"));
    }
    Ok(v)
}

fn non_empty(what: &'static str, b: &[u8]) -> Result<(), WireError> {
    if b.is_empty() {
        Err(bad(format!("empty {what}")))
    } else {
        Ok(())
    }
}

impl PlatformCodec for SpotsimCodec {
    fn platform(&self) -> Platform {
        Platform::Spotsim
    }

    fn encode_command(&self, cmd: &Command) -> Result<Vec<u8>, WireError> {
        let s = match cmd {
            Command::Deploy { slot, manifest } => {
                non_empty("manifest", manifest)?;
                format!("DEPLOY {} {}\n", fmt_slot_sel(*slot), B64.encode(manifest))
            }
            Command::Start(s) => format!("START {s}\n"),
            Command::Stop(s) => format!("STOP {s}\n"),
            Command::Delete(s) => format!("DELETE {s}\n"),
            Command::State(s) => format!("STATE {s}\n"),
            Command::MigOut(s) => format!("MIGOUT {s}\n"),
            Command::MigIn {
                slot,
                manifest,
                state,
            } => {
                non_empty("manifest", manifest)?;
                non_empty("state", state)?;
                format!(
                    "MIGIN {} {} {}\n",
                    fmt_slot_sel(*slot),
                    B64.encode(manifest),
                    B64.encode(state)
                )
            }
        };
        Ok(s.into_bytes())
    }

    fn decode_command(&self, frame: &[u8]) -> Result<Command, WireError> {
        let t = tokens(line(frame)?)?;
        let cmd = match t.as_slice() {
            ["DEPLOY", s, m] => Command::Deploy {
                slot: slot_sel(s)?,
                manifest: b64(m)?,
            },
            ["START", s] => Command::Start(slot(s)?),
            ["STOP", s] => Command::Stop(slot(s)?),
            ["DELETE", s] => Command::Delete(slot(s)?),
            ["STATE", s] => Command::State(slot(s)?),
            ["MIGOUT", s] => Command::MigOut(slot(s)?),
            ["MIGIN", s, m, st] => Command::MigIn {
                slot: slot_sel(s)?,
                manifest: b64(m)?,
                state: b64(st)?,
            },
            _ => return Err(bad("unknown command")),
        };
        Ok(cmd)
    }

    fn encode_reply(&self, reply: &Reply) -> Vec<u8> {
        let s = match reply {
            Reply::Ok { slot, payload } if payload.is_empty() => format!("OK {slot}\n"),
            Reply::Ok { slot, payload } => format!("OK {slot} {}\n", B64.encode(payload)),
            Reply::Err { code, text } if text.is_empty() => format!("ERR {code}\n"),
            Reply::Err { code, text } => format!("ERR {code} {}\n", text.replace('\n', " ")),
        };
        s.into_bytes()
    }

    fn decode_reply(&self, frame: &[u8]) -> Result<Reply, WireError> {
        let body = line(frame)?;
        if let Some(rest) = body.strip_prefix("ERR ") {
            let (code, text) = match rest.split_once(' ') {
                Some((c, t)) => (c, t),
                None => (rest, ""),
            };
            return Ok(Reply::Err {
                code: code.parse()?,
                text: text.to_string(),
            });
        }
        match tokens(body)?.as_slice() {
            ["OK", s] => Ok(Reply::ok(slot(s)?)),
            ["OK", s, p] => Ok(Reply::Ok {
                slot: slot(s)?,
                payload: b64(p)?,
            }),
            _ => Err(bad("unknown reply")),
        }
    }

    fn encode_data(&self, d: &DataFrame) -> Vec<u8> {
        format!(
            "DATA {} {} {} {} {}\n",
            d.slot, d.seq, d.ts_ms, d.value, d.unit
        )
        .into_bytes()
    }

    fn decode_data(&self, frame: &[u8]) -> Result<DataFrame, WireError> {
        match tokens(line(frame)?)?.as_slice() {
            ["DATA", s, seq, ts, v, u] => {
                let value: f64 = v.parse().map_err(|_| bad("bad value"))?;
                if !value.is_finite() {
                    return Err(bad("non-finite value"));
                }
                Ok(DataFrame {
                    slot: slot(s)?,
                    seq: seq.parse().map_err(|_| bad("bad seq"))?,
                    ts_ms: ts.parse().map_err(|_| bad("bad timestamp"))?,
                    value,
                    unit: u.parse::<Unit>().map_err(|_| bad("bad unit"))?,
                })
            }
            _ => Err(bad("not a data line")),
        }
    }
}
