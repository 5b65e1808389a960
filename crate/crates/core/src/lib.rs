//! Conflict-free merging of concurrent insert/delete edits to shared text.
//!
//! - [`diff`]: edit values, application, and position arithmetic.
//! - [`xform`]: rewriting concurrent edits so both application orders agree.
//! - [`session`]: the central-server put/get protocol.
//! - [`verify`] and [`sim`]: exhaustive, randomized and end-to-end checks.

pub mod diff;
pub mod gen;
pub mod session;
pub mod sim;
pub mod verify;
pub mod xform;

pub use diff::{apply, apply_seq, classify, lift, split_delete, subtract, Delete, Diff, DiffError, DiffSeq, Doc, Insert, Placement, Rel};
pub use session::{ClientId, ClientState, ServerState, SessionError};
pub use xform::{normalize, transform_seq, transform_single, SeqTransformPair, SplitStrategy, Step, TransformPair, Transformer};
