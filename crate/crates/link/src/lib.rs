//! Framed request/response link between the synchronization controller and
//! the pulse source.
//!
//! Frames are `"QSYN" | version | msg_type | payload_len (u32 LE) | payload`
//! with a 64 KiB payload cap. A server wraps a [`qsync_core::Scenario`] and
//! answers each `SetGate` with exactly one `Counts`; the client implements
//! [`qsync_core::CountSource`], so expected-mode searches produce identical
//! outcomes over the socket and in process.

pub mod client;
pub mod frame;
pub mod message;
pub mod server;

pub use client::RemoteSource;
pub use frame::{Frame, FrameError, MAX_PAYLOAD};
pub use message::{CodecError, Message, ERR_BAD_ARGUMENT, ERR_BAD_DETECTOR, ERR_MALFORMED};
pub use server::{serve, Endpoint, LinkError, Server};
