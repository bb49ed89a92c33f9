//! Fixed little-endian frame envelope used on every link.
//!
//! ```text
//! magic "SBRG" (4) | msg_type u16 | step u64 | payload_len u32 | payload
//! ```

use std::io::{self, Read, Write};

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"SBRG";
pub const HEADER_LEN: usize = 18;

/// Upper bound applied when reading from a stream, so a corrupted length
/// field cannot trigger a multi-gigabyte allocation.
pub const DEFAULT_MAX_PAYLOAD: usize = 256 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("payload of {len} bytes does not fit the 32-bit length field")]
    PayloadTooLarge { len: usize },
    #[error("truncated frame: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unknown message type {0}")]
    UnknownMsgType(u16),
    #[error("frame payload of {len} bytes exceeds the reader limit of {limit}")]
    FrameTooLarge { len: usize, limit: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Registered message tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u16)]
pub enum MsgType {
    Tick = 1,
    PointCloud = 2,
    Image = 3,
    Imu = 4,
    Gnss = 5,
    VehicleStatus = 6,
    VehicleControl = 7,
    AckermannCommand = 8,
    SteeringReport = 9,
    VelocityReport = 10,
    Odometry = 11,
    StepEnd = 12,
    SessionEnd = 13,
}

impl MsgType {
    pub const ALL: [MsgType; 13] = [
        MsgType::Tick,
        MsgType::PointCloud,
        MsgType::Image,
        MsgType::Imu,
        MsgType::Gnss,
        MsgType::VehicleStatus,
        MsgType::VehicleControl,
        MsgType::AckermannCommand,
        MsgType::SteeringReport,
        MsgType::VelocityReport,
        MsgType::Odometry,
        MsgType::StepEnd,
        MsgType::SessionEnd,
    ];

    pub fn as_u16(self) -> u16 {
        self as u16
    }
}

impl TryFrom<u16> for MsgType {
    type Error = WireError;

    fn try_from(tag: u16) -> Result<Self, Self::Error> {
        MsgType::ALL
            .iter()
            .copied()
            .find(|t| t.as_u16() == tag)
            .ok_or(WireError::UnknownMsgType(tag))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireFrame {
    pub msg_type: MsgType,
    pub step: u64,
    pub payload: Vec<u8>,
}

impl WireFrame {
    pub fn new(msg_type: MsgType, step: u64, payload: Vec<u8>) -> Self {
        Self {
            msg_type,
            step,
            payload,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        encode_frame(self.msg_type, self.step, &self.payload)
    }
}

/// Builds the 18-byte header for a payload of `payload_len` bytes.
pub fn frame_header(
    msg_type: MsgType,
    step: u64,
    payload_len: usize,
) -> Result<[u8; HEADER_LEN], WireError> {
    let len = u32::try_from(payload_len)
        .map_err(|_| WireError::PayloadTooLarge { len: payload_len })?;
    let mut header = [0u8; HEADER_LEN];
    header[0..4].copy_from_slice(&MAGIC);
    header[4..6].copy_from_slice(&msg_type.as_u16().to_le_bytes());
    header[6..14].copy_from_slice(&step.to_le_bytes());
    header[14..18].copy_from_slice(&len.to_le_bytes());
    Ok(header)
}

pub fn encode_frame(msg_type: MsgType, step: u64, payload: &[u8]) -> Result<Vec<u8>, WireError> {
    let header = frame_header(msg_type, step, payload.len())?;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&header);
    out.extend_from_slice(payload);
    Ok(out)
}

struct Header {
    msg_type: MsgType,
    step: u64,
    payload_len: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, WireError> {
    let magic_len = bytes.len().min(4);
    if bytes[..magic_len] != MAGIC[..magic_len] {
        let mut seen = [0u8; 4];
        seen[..magic_len].copy_from_slice(&bytes[..magic_len]);
        return Err(WireError::BadMagic(seen));
    }
    if bytes.len() < HEADER_LEN {
        return Err(WireError::Truncated {
            needed: HEADER_LEN,
            available: bytes.len(),
        });
    }
    let tag = u16::from_le_bytes([bytes[4], bytes[5]]);
    let msg_type = MsgType::try_from(tag)?;
    let step = u64::from_le_bytes(bytes[6..14].try_into().expect("8-byte slice"));
    let payload_len = u32::from_le_bytes(bytes[14..18].try_into().expect("4-byte slice")) as usize;
    Ok(Header {
        msg_type,
        step,
        payload_len,
    })
}

/// Decodes one frame from the front of `bytes`, returning it together with
/// the number of bytes consumed. Trailing bytes are left for the next call.
pub fn decode_frame(bytes: &[u8]) -> Result<(WireFrame, usize), WireError> {
    let header = parse_header(bytes)?;
    let total = HEADER_LEN + header.payload_len;
    if bytes.len() < total {
        return Err(WireError::Truncated {
            needed: total,
            available: bytes.len(),
        });
    }
    let frame = WireFrame {
        msg_type: header.msg_type,
        step: header.step,
        payload: bytes[HEADER_LEN..total].to_vec(),
    };
    Ok((frame, total))
}

/// Writes header and payload without first concatenating them.
pub fn write_frame<W: Write>(
    w: &mut W,
    msg_type: MsgType,
    step: u64,
    payload: &[u8],
) -> Result<(), WireError> {
    let header = frame_header(msg_type, step, payload.len())?;
    w.write_all(&header)?;
    w.write_all(payload)?;
    w.flush()?;
    Ok(())
}

/// Reads exactly one frame. Returns `Ok(None)` on a clean end of stream at a
/// frame boundary.
pub fn read_frame<R: Read>(r: &mut R, max_payload: usize) -> Result<Option<WireFrame>, WireError> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match r.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => {
                return Err(WireError::Truncated {
                    needed: HEADER_LEN,
                    available: filled,
                })
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let parsed = parse_header(&header)?;
    if parsed.payload_len > max_payload {
        return Err(WireError::FrameTooLarge {
            len: parsed.payload_len,
            limit: max_payload,
        });
    }
    let mut payload = vec![0u8; parsed.payload_len];
    r.read_exact(&mut payload).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            WireError::Truncated {
                needed: HEADER_LEN + parsed.payload_len,
                available: HEADER_LEN,
            }
        } else {
            WireError::Io(e)
        }
    })?;
    Ok(Some(WireFrame {
        msg_type: parsed.msg_type,
        step: parsed.step,
        payload,
    }))
}
