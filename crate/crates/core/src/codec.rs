//! `MBX1` wire format.
//!
//! All integers are fixed-width little-endian and reals are IEEE-754 `f64`
//! little-endian:
//!
//! | field             | bytes |
//! |-------------------|-------|
//! | magic `"MBX1"`    | 4     |
//! | version (= 1)     | 1     |
//! | flags             | 1     |
//! | created_at        | 8     |
//! | intrinsic_value   | 8     |
//! | payload_len       | 4     |
//! | payload           | payload_len |
//! | payload_digest    | 32    |
//! | annotation_count  | 2     |
//! | annotations       | 25 each: node_id 4, time 8, value_delta 8, size_delta 4, permitted 1 |
//!
//! Flag bit 0 marks a present payload; the other bits are reserved and must
//! be zero. The digest is SHA-256 over the payload bytes only, so nodes can
//! append annotations without re-digesting.

use thiserror::Error;

use crate::mailbox::{Annotation, InfoPayload, Mailbox, ANNOTATION_WIRE_BYTES};

pub const MAGIC: [u8; 4] = *b"MBX1";
pub const VERSION: u8 = 1;
pub const FLAG_PAYLOAD_PRESENT: u8 = 0x01;

/// Bytes before the payload.
pub const PREFIX_BYTES: usize = 4 + 1 + 1 + 8 + 8 + 4;
/// Bytes between the payload and the first annotation.
pub const SUFFIX_BYTES: usize = 32 + 2;
/// Packet bytes that do not depend on payload or annotations.
pub const FIXED_OVERHEAD_BYTES: usize = PREFIX_BYTES + SUFFIX_BYTES;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("truncated packet: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("payload digest mismatch")]
    Integrity,
    #[error("annotation {index}: permitted byte is {byte:#04x}, expected 0 or 1")]
    MalformedAnnotation { index: usize, byte: u8 },
    #[error("malformed packet: {0}")]
    Malformed(&'static str),
    #[error("cannot encode: {0}")]
    Encode(&'static str),
}

/// Length in bytes of `encode(m)`.
pub fn encoded_len(m: &Mailbox) -> usize {
    FIXED_OVERHEAD_BYTES + m.payload().bytes().len() + ANNOTATION_WIRE_BYTES * m.annotations().len()
}

pub fn encode(m: &Mailbox) -> Result<Vec<u8>, CodecError> {
    let payload = m.payload().bytes();
    let payload_len =
        u32::try_from(payload.len()).map_err(|_| CodecError::Encode("payload longer than u32::MAX bytes"))?;
    let count = u16::try_from(m.annotations().len()).map_err(|_| CodecError::Encode("more than 65535 annotations"))?;

    let mut out = Vec::with_capacity(encoded_len(m));
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(if m.payload().is_present() {
        FLAG_PAYLOAD_PRESENT
    } else {
        0
    });
    out.extend_from_slice(&m.created_at().to_le_bytes());
    out.extend_from_slice(&m.intrinsic_value().to_le_bytes());
    out.extend_from_slice(&payload_len.to_le_bytes());
    out.extend_from_slice(payload);
    out.extend_from_slice(m.payload_digest());
    out.extend_from_slice(&count.to_le_bytes());
    for a in m.annotations() {
        out.extend_from_slice(&a.node_id.to_le_bytes());
        out.extend_from_slice(&a.time.to_le_bytes());
        out.extend_from_slice(&a.value_delta.to_le_bytes());
        out.extend_from_slice(&a.size_delta.to_le_bytes());
        out.push(u8::from(a.permitted));
    }
    debug_assert_eq!(out.len(), encoded_len(m));
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or(CodecError::Truncated {
                needed: self.pos.saturating_add(n),
                available: self.buf.len(),
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }
}

/// Parses a packet and verifies the payload digest.
pub fn decode(bytes: &[u8]) -> Result<Mailbox, CodecError> {
    let mut r = Reader { buf: bytes, pos: 0 };

    let magic = r.array::<4>()?;
    if magic != MAGIC {
        return Err(CodecError::BadMagic(magic));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(CodecError::UnsupportedVersion(version));
    }
    let flags = r.u8()?;
    if flags & !FLAG_PAYLOAD_PRESENT != 0 {
        return Err(CodecError::Malformed("reserved flag bits set"));
    }
    let created_at = u64::from_le_bytes(r.array()?);
    let intrinsic_value = f64::from_le_bytes(r.array()?);
    let payload_len = u32::from_le_bytes(r.array()?) as usize;
    let present = flags & FLAG_PAYLOAD_PRESENT != 0;
    if !present && payload_len != 0 {
        return Err(CodecError::Malformed("absent payload with non-zero length"));
    }
    let payload_bytes = r.take(payload_len)?.to_vec();
    let digest = r.array::<32>()?;
    let count = u16::from_le_bytes(r.array()?) as usize;

    let mut annotations = Vec::with_capacity(count);
    for index in 0..count {
        let node_id = u32::from_le_bytes(r.array()?);
        let time = u64::from_le_bytes(r.array()?);
        let value_delta = f64::from_le_bytes(r.array()?);
        let size_delta = u32::from_le_bytes(r.array()?);
        let permitted = match r.u8()? {
            0 => false,
            1 => true,
            byte => return Err(CodecError::MalformedAnnotation { index, byte }),
        };
        annotations.push(Annotation {
            node_id,
            time,
            value_delta,
            size_delta,
            permitted,
        });
    }
    if r.pos != bytes.len() {
        return Err(CodecError::Malformed("trailing bytes after last annotation"));
    }

    let payload = if present {
        InfoPayload::from_bytes(payload_bytes)
    } else {
        InfoPayload::absent()
    };
    let m = Mailbox::from_parts(payload, digest, intrinsic_value, created_at, annotations);
    if !m.verify_integrity() {
        return Err(CodecError::Integrity);
    }
    Ok(m)
}

pub fn verify_integrity(m: &Mailbox) -> bool {
    m.verify_integrity()
}
