//! Crate-wide error type.

use alloc::string::String;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An operation needs at least two attributes.
    #[error("invalid dimension: need at least {min} attributes, got {got}")]
    InvalidDimension { got: usize, min: usize },

    /// Reflection axis outside `1..=n`.
    #[error("invalid reflection axis {axis} for {attrs} attributes")]
    InvalidAxis { axis: usize, attrs: usize },

    /// Operand shapes do not conform.
    #[error("dimension mismatch in {op}: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    DimensionMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    /// A matrix constructor or product produced a NaN/Inf entry.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// A column has (near-)zero spread and cannot be normalized.
    #[error("attribute {column} is constant (standard deviation below threshold)")]
    ConstantAttribute { column: usize },

    /// Fewer rows than the operation requires.
    #[error("insufficient rows: got {got}, need at least {min}")]
    InsufficientRows { got: usize, min: usize },

    /// Bad runtime configuration (negative sigma, zero partitions, ...).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Ridge-regularized normal equations were still singular.
    #[error("singular least-squares fit despite ridge term")]
    SingularFit,

    /// A class label id is outside the model's output range.
    #[error("label id {label} out of range for {classes} classes")]
    LabelRange { label: usize, classes: usize },

    /// Models with different layer shapes cannot be averaged.
    #[error("model architectures do not match")]
    ArchitectureMismatch,

    /// Frame does not start with the protocol magic.
    #[error("bad frame magic")]
    BadMagic,

    /// Unsupported protocol version byte.
    #[error("unsupported protocol version {0}")]
    BadVersion(u8),

    /// Message type byte outside the known set.
    #[error("unknown message type {0}")]
    UnknownMsgType(u8),

    /// Buffer ends before the declared frame does.
    #[error("truncated frame: need {need} bytes, have {have}")]
    TruncatedFrame { need: usize, have: usize },

    /// Declared payload length exceeds the hard cap.
    #[error("oversize payload: {0} bytes")]
    Oversize(u64),

    /// Payload bytes do not decode to the declared structure.
    #[error("malformed {0} payload")]
    MalformedPayload(&'static str),

    /// A message arrived that the session state machine cannot accept.
    #[error("protocol state error: received {got} while {expected}")]
    ProtocolState {
        got: &'static str,
        expected: &'static str,
    },

    /// Another worker already registered this node id.
    #[error("duplicate node id {0}")]
    DuplicateNode(u32),

    /// Workers disagree on the attribute count.
    #[error("inconsistent attribute count: session has {have}, node {node} sent {got}")]
    InconsistentAttrCount { have: usize, got: usize, node: u32 },

    /// ERROR frame relayed from the remote peer.
    #[error("remote error: {0}")]
    Remote(String),
}
