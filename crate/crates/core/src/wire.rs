//! Binary wire format for the two-phase parameter exchange.
//!
//! Frame layout (all integers little-endian):
//!
//! ```text
//! +-------+---------+----------+-------------+---------+
//! | "DPAB"| version | msg_type | payload_len | payload |
//! |  4 B  |   1 B   |   1 B    |   u32 LE    |  N B    |
//! +-------+---------+----------+-------------+---------+
//! ```
//!
//! Payloads carry statistics and matrices as little-endian `f64`, row-major.
//! No frame ever contains data rows; Phase 1 carries per-partition summary
//! statistics and Phase 2 the global parameters, so traffic per node is a
//! fixed function of the attribute count.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::perturb::GlobalParams;
use crate::stats::PartitionSummary;

pub const MAGIC: [u8; 4] = *b"DPAB";
pub const VERSION: u8 = 1;
/// Frame header: magic + version + type + payload length.
pub const HEADER_LEN: usize = 10;
/// Hard cap on payload size (256 MiB).
pub const MAX_PAYLOAD: u32 = 256 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum MsgType {
    Hello = 1,
    Summary = 2,
    Params = 3,
    Done = 4,
    Error = 5,
}

impl MsgType {
    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            1 => Ok(MsgType::Hello),
            2 => Ok(MsgType::Summary),
            3 => Ok(MsgType::Params),
            4 => Ok(MsgType::Done),
            5 => Ok(MsgType::Error),
            other => Err(Error::UnknownMsgType(other)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MsgType::Hello => "HELLO",
            MsgType::Summary => "SUMMARY",
            MsgType::Params => "PARAMS",
            MsgType::Done => "DONE",
            MsgType::Error => "ERROR",
        }
    }
}

/// One protocol frame.
#[derive(Debug, Clone, PartialEq)]
pub struct WireMessage {
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

impl WireMessage {
    pub fn new(msg_type: MsgType, payload: Vec<u8>) -> Self {
        Self { msg_type, payload }
    }

    /// Encoded frame length.
    pub fn frame_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }
}

/// Encodes one frame.
pub fn encode(msg: &WireMessage) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + msg.payload.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(msg.msg_type as u8);
    out.extend_from_slice(&(msg.payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&msg.payload);
    out
}

/// Parses a frame header, returning the message type and payload length.
pub fn decode_header(buf: &[u8]) -> Result<(MsgType, u32)> {
    if buf.len() < HEADER_LEN {
        return Err(Error::TruncatedFrame {
            need: HEADER_LEN,
            have: buf.len(),
        });
    }
    if buf[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if buf[4] != VERSION {
        return Err(Error::BadVersion(buf[4]));
    }
    let msg_type = MsgType::from_byte(buf[5])?;
    let len = u32::from_le_bytes([buf[6], buf[7], buf[8], buf[9]]);
    if len > MAX_PAYLOAD {
        return Err(Error::Oversize(len as u64));
    }
    Ok((msg_type, len))
}

/// Decodes a buffer holding exactly one frame.
pub fn decode(buf: &[u8]) -> Result<WireMessage> {
    let (msg_type, len) = decode_header(buf)?;
    let total = HEADER_LEN + len as usize;
    if buf.len() < total {
        return Err(Error::TruncatedFrame {
            need: total,
            have: buf.len(),
        });
    }
    if buf.len() > total {
        return Err(Error::MalformedPayload("trailing bytes after frame"));
    }
    Ok(WireMessage {
        msg_type,
        payload: buf[HEADER_LEN..total].to_vec(),
    })
}

// ---- payload codecs ----

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], what: &'static str) -> Self {
        Self { buf, pos: 0, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::MalformedPayload(self.what));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::MalformedPayload(self.what));
        }
        Ok(())
    }
}

fn push_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn read_matrix(r: &mut Reader<'_>, rows: usize, cols: usize) -> Result<Matrix> {
    let data = r.f64_vec(rows * cols)?;
    Matrix::from_vec(rows, cols, data).map_err(|_| Error::MalformedPayload(r.what))
}

/// HELLO payload: the worker's node id.
pub fn encode_hello(node_id: u32) -> WireMessage {
    WireMessage::new(MsgType::Hello, node_id.to_le_bytes().to_vec())
}

pub fn decode_hello(payload: &[u8]) -> Result<u32> {
    let mut r = Reader::new(payload, "HELLO");
    let id = r.u32()?;
    r.finish()?;
    Ok(id)
}

/// SUMMARY payload: node id, attribute count, row count, mean vector, then
/// the row-major covariance matrix.
pub fn encode_summary(node_id: u32, summary: &PartitionSummary) -> WireMessage {
    let n = summary.attr_count();
    let mut payload = Vec::with_capacity(16 + 8 * n * (n + 1));
    payload.extend_from_slice(&node_id.to_le_bytes());
    payload.extend_from_slice(&(n as u32).to_le_bytes());
    payload.extend_from_slice(&summary.row_count.to_le_bytes());
    push_f64s(&mut payload, &summary.mean);
    push_f64s(&mut payload, summary.cov.as_slice());
    WireMessage::new(MsgType::Summary, payload)
}

pub fn decode_summary(payload: &[u8]) -> Result<(u32, PartitionSummary)> {
    let mut r = Reader::new(payload, "SUMMARY");
    let node_id = r.u32()?;
    let n = r.u32()? as usize;
    if n < 2 {
        return Err(Error::InvalidDimension { got: n, min: 2 });
    }
    let row_count = r.u64()?;
    let mean = r.f64_vec(n)?;
    let cov = read_matrix(&mut r, n, n)?;
    r.finish()?;
    let summary = PartitionSummary {
        cov,
        mean,
        row_count,
    };
    summary.validate()?;
    Ok((node_id, summary))
}

/// PARAMS payload: attribute count, sigma, the rotation/translation/
/// reflection matrices (each `(n+1) x (n+1)`), then stdvec and meanvec.
pub fn encode_params(params: &GlobalParams) -> WireMessage {
    WireMessage::new(MsgType::Params, params_payload(params))
}

fn params_payload(params: &GlobalParams) -> Vec<u8> {
    let n = params.attr_count();
    let dim = n + 1;
    let mut payload = Vec::with_capacity(12 + 8 * (3 * dim * dim + 2 * n));
    payload.extend_from_slice(&(n as u32).to_le_bytes());
    payload.extend_from_slice(&params.sigma.to_le_bytes());
    push_f64s(&mut payload, params.rotation.as_slice());
    push_f64s(&mut payload, params.translation.as_slice());
    push_f64s(&mut payload, params.reflection.as_slice());
    push_f64s(&mut payload, &params.stdvec);
    push_f64s(&mut payload, &params.meanvec);
    payload
}

pub fn decode_params(payload: &[u8]) -> Result<GlobalParams> {
    let mut r = Reader::new(payload, "PARAMS");
    let n = r.u32()? as usize;
    if n < 2 {
        return Err(Error::InvalidDimension { got: n, min: 2 });
    }
    let sigma = r.f64()?;
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::MalformedPayload("PARAMS"));
    }
    let dim = n + 1;
    let rotation = read_matrix(&mut r, dim, dim)?;
    let translation = read_matrix(&mut r, dim, dim)?;
    let reflection = read_matrix(&mut r, dim, dim)?;
    let stdvec = r.f64_vec(n)?;
    let meanvec = r.f64_vec(n)?;
    r.finish()?;
    let orth = rotation.matmul(&rotation.transpose())?;
    if orth.max_abs_diff_identity() > 1e-9 {
        return Err(Error::MalformedPayload("PARAMS rotation not orthonormal"));
    }
    Ok(GlobalParams {
        sigma,
        rotation,
        translation,
        reflection,
        stdvec,
        meanvec,
        search: None,
    })
}

/// ERROR payload: UTF-8 message.
pub fn encode_error(message: &str) -> WireMessage {
    WireMessage::new(MsgType::Error, message.as_bytes().to_vec())
}

pub fn decode_error(payload: &[u8]) -> alloc::string::String {
    alloc::string::String::from_utf8_lossy(payload).into_owned()
}

pub fn encode_done() -> WireMessage {
    WireMessage::new(MsgType::Done, Vec::new())
}

/// FNV-1a over the canonical PARAMS payload.
pub fn params_digest(params: &GlobalParams) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in params_payload(params) {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn summary_fixture() -> PartitionSummary {
        PartitionSummary {
            cov: Matrix::from_vec(2, 2, vec![2.0, 0.5, 0.5, 1.0]).unwrap(),
            mean: vec![1.0, -3.0],
            row_count: 4,
        }
    }

    #[test]
    fn done_frame_is_ten_bytes() {
        let bytes = encode(&encode_done());
        assert_eq!(bytes.len(), 10);
        assert_eq!(decode(&bytes).unwrap().msg_type, MsgType::Done);
    }

    #[test]
    fn summary_roundtrip() {
        let s = summary_fixture();
        let msg = encode_summary(7, &s);
        let bytes = encode(&msg);
        let back = decode(&bytes).unwrap();
        assert_eq!(back, msg);
        let (node, decoded) = decode_summary(&back.payload).unwrap();
        assert_eq!(node, 7);
        assert_eq!(decoded, s);
    }

    #[test]
    fn bad_magic_version_type_rejected() {
        let mut bytes = encode(&encode_done());
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(Error::BadMagic)));

        let mut bytes = encode(&encode_done());
        bytes[4] = 9;
        assert!(matches!(decode(&bytes), Err(Error::BadVersion(9))));

        let mut bytes = encode(&encode_done());
        bytes[5] = 77;
        assert!(matches!(decode(&bytes), Err(Error::UnknownMsgType(77))));
    }

    #[test]
    fn truncation_and_oversize_rejected() {
        let bytes = encode(&encode_summary(1, &summary_fixture()));
        assert!(matches!(
            decode(&bytes[..bytes.len() - 3]),
            Err(Error::TruncatedFrame { .. })
        ));
        assert!(matches!(
            decode(&bytes[..6]),
            Err(Error::TruncatedFrame { .. })
        ));

        let mut huge = encode(&encode_done());
        huge[6..10].copy_from_slice(&(MAX_PAYLOAD + 1).to_le_bytes());
        assert!(matches!(decode(&huge), Err(Error::Oversize(_))));
    }

    #[test]
    fn summary_payload_length_must_match_exactly() {
        let msg = encode_summary(1, &summary_fixture());
        let mut payload = msg.payload.clone();
        payload.push(0);
        assert!(decode_summary(&payload).is_err());
        payload.truncate(payload.len() - 2);
        assert!(decode_summary(&payload).is_err());
    }

    #[test]
    fn error_roundtrip() {
        let msg = encode_error("nope");
        assert_eq!(decode_error(&msg.payload), "nope");
    }

    #[test]
    fn params_decode_validates_rotation_orthonormality() {
        use crate::perturb::GlobalParams;
        let params = GlobalParams {
            sigma: 0.3,
            rotation: Matrix::identity(3),
            translation: Matrix::identity(3),
            reflection: Matrix::identity(3),
            stdvec: vec![1.0, 2.0],
            meanvec: vec![0.0, 5.0],
            search: None,
        };
        let msg = encode_params(&params);
        let back = decode_params(&msg.payload).unwrap();
        assert_eq!(back.stdvec, params.stdvec);
        assert_eq!(back.search, None);

        let mut skewed = params.clone();
        skewed.rotation.set(0, 1, 0.5);
        let bad = encode_params(&skewed);
        assert!(matches!(
            decode_params(&bad.payload),
            Err(Error::MalformedPayload(_))
        ));
    }
}
