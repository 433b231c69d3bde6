//! The controller side: a [`CountSource`] that forwards every probe over the
//! wire, so the search algorithms run unchanged against a remote emulator.

use std::net::TcpStream;
use std::os::unix::net::UnixStream;

use qsync_core::adversary::AttackProfile;
use qsync_core::source::{CountSource, SourceError};
use qsync_core::{DetectorId, TimePs};

use crate::frame::{read_frame, write_frame, FrameError};
use crate::message::Message;
use crate::server::{Conn, Endpoint, LinkError};

/// Remote pulse source speaking the framed protocol, strict
/// request/response: one outstanding request per connection.
pub struct RemoteSource {
    conn: Conn,
    period: TimePs,
}

impl RemoteSource {
    /// Connect to a server. `period` is the controller's configured pulse
    /// period, used to reduce gate positions before they go on the wire
    /// (the protocol requires `gate_time_ps < period`).
    pub fn connect(endpoint: &Endpoint, period: TimePs) -> Result<Self, LinkError> {
        let conn = match endpoint {
            Endpoint::Tcp(addr) => Conn::Tcp(TcpStream::connect(addr)?),
            Endpoint::Unix(path) => Conn::Unix(UnixStream::connect(path)?),
        };
        Ok(RemoteSource { conn, period })
    }

    /// Replace the server's active attack profile (harness use only).
    /// Fire-and-forget by contract; ordering against later `SetGate`
    /// requests is guaranteed by the serial connection.
    pub fn set_attack(&mut self, profile: &AttackProfile) -> Result<(), SourceError> {
        write_frame(&mut self.conn, &Message::SetAttack(profile.clone()).encode())
            .map_err(|e| SourceError::Transport(e.to_string()))
    }

    fn exchange(&mut self, request: &Message) -> Result<Message, SourceError> {
        write_frame(&mut self.conn, &request.encode())
            .map_err(|e| SourceError::Transport(e.to_string()))?;
        let frame = read_frame(&mut self.conn).map_err(|e| match e {
            FrameError::Closed | FrameError::Io(_) => SourceError::Transport(e.to_string()),
            other => SourceError::Protocol { code: 0, message: other.to_string() },
        })?;
        Message::decode(&frame)
            .map_err(|e| SourceError::Protocol { code: 0, message: e.to_string() })
    }
}

impl CountSource for RemoteSource {
    fn counts(
        &mut self,
        detector_id: DetectorId,
        gate_time: TimePs,
        accumulation_us: u64,
    ) -> Result<u64, SourceError> {
        let request = Message::SetGate {
            detector_id,
            gate_time_ps: gate_time.rem_period(self.period).ps() as u64,
            accumulation_us,
        };
        match self.exchange(&request)? {
            Message::Counts { detector_id: id, count } if id == detector_id => Ok(count),
            Message::Counts { detector_id: id, .. } => Err(SourceError::Protocol {
                code: 0,
                message: format!("counts for detector {id}, asked for {detector_id}"),
            }),
            Message::Error { code, text } => {
                Err(SourceError::Protocol { code, message: text })
            }
            other => Err(SourceError::Protocol {
                code: 0,
                message: format!("unexpected reply {other:?}"),
            }),
        }
    }
}
