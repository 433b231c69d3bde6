//! Byte-level framing: `"QSYN" | version | msg_type | payload_len (u32 LE) | payload`.

use std::io::{self, Read, Write};

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"QSYN";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 10;
pub const MAX_PAYLOAD: usize = 64 * 1024;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error(transparent)]
    Io(#[from] io::Error),
    /// Peer closed the connection at a frame boundary.
    #[error("connection closed")]
    Closed,
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported protocol version {0:#04x}")]
    BadVersion(u8),
    #[error("payload length {0} exceeds the 64 KiB limit")]
    Oversize(u32),
}

impl FrameError {
    /// Whether the failure is a malformed frame (as opposed to transport loss).
    pub fn is_malformed(&self) -> bool {
        match self {
            FrameError::BadMagic(_) | FrameError::BadVersion(_) | FrameError::Oversize(_) => true,
            // A stream that dies mid-frame delivered a truncated frame.
            FrameError::Io(e) => e.kind() == io::ErrorKind::UnexpectedEof,
            FrameError::Closed => false,
        }
    }
}

/// One wire frame: a type byte plus opaque payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: u8,
    pub payload: Vec<u8>,
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> io::Result<()> {
    debug_assert!(frame.payload.len() <= MAX_PAYLOAD);
    let mut header = [0u8; HEADER_LEN];
    header[..4].copy_from_slice(&MAGIC);
    header[4] = VERSION;
    header[5] = frame.msg_type;
    header[6..10].copy_from_slice(&(frame.payload.len() as u32).to_le_bytes());
    w.write_all(&header)?;
    w.write_all(&frame.payload)?;
    w.flush()
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<Frame, FrameError> {
    let mut header = [0u8; HEADER_LEN];
    // Distinguish a clean close (nothing read) from a truncated frame.
    let mut filled = 0;
    while filled < HEADER_LEN {
        match r.read(&mut header[filled..])? {
            0 if filled == 0 => return Err(FrameError::Closed),
            0 => return Err(io::Error::from(io::ErrorKind::UnexpectedEof).into()),
            n => filled += n,
        }
    }
    let magic: [u8; 4] = header[..4].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(FrameError::BadMagic(magic));
    }
    if header[4] != VERSION {
        return Err(FrameError::BadVersion(header[4]));
    }
    let msg_type = header[5];
    let len = u32::from_le_bytes(header[6..10].try_into().expect("4 bytes"));
    if len as usize > MAX_PAYLOAD {
        return Err(FrameError::Oversize(len));
    }
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload)?;
    Ok(Frame { msg_type, payload })
}
