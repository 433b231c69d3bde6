//! Message codec over the frame layer.
//!
//! All integers are little-endian fixed width. Payload layouts:
//!
//! * `SetGate`   (0x01): `detector_id u8 | gate_time_ps u64 | accumulation_us u64`
//! * `Counts`    (0x02): `detector_id u8 | count u64`
//! * `SetAttack` (0x03): `state_offset[H,V,D,A] 4 x i64 | common_offset i64 | active u8`
//! * `Error`     (0x7F): `code u16 | utf-8 text`

use thiserror::Error;

use qsync_core::adversary::{AttackProfile, AttackWindow};
use qsync_core::TimePs;

use crate::frame::Frame;

pub const MSG_SET_GATE: u8 = 0x01;
pub const MSG_COUNTS: u8 = 0x02;
pub const MSG_SET_ATTACK: u8 = 0x03;
pub const MSG_ERROR: u8 = 0x7F;

/// Malformed frame (framing or codec level); connection closes.
pub const ERR_MALFORMED: u16 = 1;
/// detector_id outside `[1, N]`; connection stays open.
pub const ERR_BAD_DETECTOR: u16 = 2;
/// Other invalid request field (gate beyond the period, zero accumulation);
/// connection stays open.
pub const ERR_BAD_ARGUMENT: u16 = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("unknown message type {0:#04x}")]
    UnknownType(u8),
    #[error("message {msg_type:#04x}: payload length {got}, expected {expected}")]
    BadLength {
        msg_type: u8,
        expected: usize,
        got: usize,
    },
    #[error("error text is not valid UTF-8")]
    BadUtf8,
    #[error("invalid field value for {0}")]
    BadField(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    SetGate {
        detector_id: u8,
        gate_time_ps: u64,
        accumulation_us: u64,
    },
    Counts {
        detector_id: u8,
        count: u64,
    },
    SetAttack(AttackProfile),
    Error {
        code: u16,
        text: String,
    },
}

impl Message {
    pub fn error(code: u16, text: impl Into<String>) -> Message {
        Message::Error { code, text: text.into() }
    }

    pub fn encode(&self) -> Frame {
        match self {
            Message::SetGate { detector_id, gate_time_ps, accumulation_us } => {
                let mut payload = Vec::with_capacity(17);
                payload.push(*detector_id);
                payload.extend_from_slice(&gate_time_ps.to_le_bytes());
                payload.extend_from_slice(&accumulation_us.to_le_bytes());
                Frame { msg_type: MSG_SET_GATE, payload }
            }
            Message::Counts { detector_id, count } => {
                let mut payload = Vec::with_capacity(9);
                payload.push(*detector_id);
                payload.extend_from_slice(&count.to_le_bytes());
                Frame { msg_type: MSG_COUNTS, payload }
            }
            Message::SetAttack(profile) => {
                let mut payload = Vec::with_capacity(41);
                for offset in &profile.state_offset {
                    payload.extend_from_slice(&offset.ps().to_le_bytes());
                }
                payload.extend_from_slice(&profile.common_offset.ps().to_le_bytes());
                payload.push(match profile.active_during {
                    AttackWindow::Calibration => 0,
                    AttackWindow::Always => 1,
                });
                Frame { msg_type: MSG_SET_ATTACK, payload }
            }
            Message::Error { code, text } => {
                let mut payload = Vec::with_capacity(2 + text.len());
                payload.extend_from_slice(&code.to_le_bytes());
                payload.extend_from_slice(text.as_bytes());
                Frame { msg_type: MSG_ERROR, payload }
            }
        }
    }

    pub fn decode(frame: &Frame) -> Result<Message, CodecError> {
        let p = &frame.payload;
        let expect_len = |expected: usize| -> Result<(), CodecError> {
            if p.len() != expected {
                Err(CodecError::BadLength { msg_type: frame.msg_type, expected, got: p.len() })
            } else {
                Ok(())
            }
        };
        match frame.msg_type {
            MSG_SET_GATE => {
                expect_len(17)?;
                Ok(Message::SetGate {
                    detector_id: p[0],
                    gate_time_ps: u64::from_le_bytes(p[1..9].try_into().expect("8 bytes")),
                    accumulation_us: u64::from_le_bytes(p[9..17].try_into().expect("8 bytes")),
                })
            }
            MSG_COUNTS => {
                expect_len(9)?;
                Ok(Message::Counts {
                    detector_id: p[0],
                    count: u64::from_le_bytes(p[1..9].try_into().expect("8 bytes")),
                })
            }
            MSG_SET_ATTACK => {
                expect_len(41)?;
                let read_i64 = |at: usize| {
                    i64::from_le_bytes(p[at..at + 8].try_into().expect("8 bytes"))
                };
                let state_offset =
                    [0, 8, 16, 24].map(|at| TimePs::new(read_i64(at)));
                let common_offset = TimePs::new(read_i64(32));
                let active_during = match p[40] {
                    0 => AttackWindow::Calibration,
                    1 => AttackWindow::Always,
                    _ => return Err(CodecError::BadField("active_during")),
                };
                Ok(Message::SetAttack(AttackProfile {
                    state_offset,
                    common_offset,
                    active_during,
                }))
            }
            MSG_ERROR => {
                if p.len() < 2 {
                    return Err(CodecError::BadLength {
                        msg_type: frame.msg_type,
                        expected: 2,
                        got: p.len(),
                    });
                }
                let code = u16::from_le_bytes(p[..2].try_into().expect("2 bytes"));
                let text =
                    String::from_utf8(p[2..].to_vec()).map_err(|_| CodecError::BadUtf8)?;
                Ok(Message::Error { code, text })
            }
            other => Err(CodecError::UnknownType(other)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn set_gate_layout_is_fixed() {
        let frame = Message::SetGate { detector_id: 2, gate_time_ps: 2050, accumulation_us: 1000 }
            .encode();
        assert_eq!(frame.msg_type, 0x01);
        assert_eq!(frame.payload.len(), 17);
        assert_eq!(frame.payload[0], 2);
        assert_eq!(frame.payload[1..9], 2050u64.to_le_bytes());
        assert_eq!(frame.payload[9..17], 1000u64.to_le_bytes());
    }

    #[test]
    fn unknown_type_rejected() {
        let err = Message::decode(&Frame { msg_type: 0x55, payload: vec![] }).unwrap_err();
        assert_eq!(err, CodecError::UnknownType(0x55));
    }

    #[test]
    fn short_payload_rejected() {
        let err = Message::decode(&Frame { msg_type: MSG_COUNTS, payload: vec![1, 2] }).unwrap_err();
        assert!(matches!(err, CodecError::BadLength { .. }));
    }

    #[test]
    fn attack_window_flag_validated() {
        let mut frame = Message::SetAttack(AttackProfile::default()).encode();
        frame.payload[40] = 9;
        assert_eq!(
            Message::decode(&frame).unwrap_err(),
            CodecError::BadField("active_during")
        );
    }

    fn arb_message() -> impl Strategy<Value = Message> {
        prop_oneof![
            (any::<u8>(), any::<u64>(), any::<u64>()).prop_map(|(d, g, a)| Message::SetGate {
                detector_id: d,
                gate_time_ps: g,
                accumulation_us: a,
            }),
            (any::<u8>(), any::<u64>()).prop_map(|(d, c)| Message::Counts {
                detector_id: d,
                count: c,
            }),
            ([any::<i64>(); 4], any::<i64>(), any::<bool>()).prop_map(|(s, c, w)| {
                Message::SetAttack(AttackProfile {
                    state_offset: s.map(TimePs::new),
                    common_offset: TimePs::new(c),
                    active_during: if w { AttackWindow::Always } else { AttackWindow::Calibration },
                })
            }),
            (any::<u16>(), ".{0,64}").prop_map(|(code, text)| Message::Error { code, text }),
        ]
    }

    proptest! {
        #[test]
        fn codec_round_trip(message in arb_message()) {
            let frame = message.encode();
            prop_assert!(frame.payload.len() <= crate::frame::MAX_PAYLOAD);
            prop_assert_eq!(Message::decode(&frame).unwrap(), message);
        }
    }
}
