//! Mailbox-encapsulated information and entropy-gated edge offloading.
//!
//! A [`Mailbox`](mailbox::Mailbox) wraps an immutable raw payload together with
//! an append-only chain of node annotations. Each annotation moves the
//! mailbox's value (possibly downwards) and grows its size. An edge node
//! scores unlabeled samples by the Shannon entropy of a classifier's
//! prediction and forwards only the ones that clear a threshold; a cloud
//! learner self-trains on what it receives.
//!
//! Module map:
//!
//! - [`mailbox`]: payload, annotations, value/size calculus, popularity.
//! - [`codec`]: the `MBX1` binary wire format.
//! - [`value`]: prediction entropy and the transmit/discard rule.
//! - [`learner`]: synthetic data, softmax / one-hidden-layer classifier,
//!   supervised and self-training.
//! - [`sim`]: deterministic device/edge/cloud simulator and metrics.
//! - [`harness`]: config loading and the `run` / `compare` / `sweep` commands.

pub mod codec;
pub mod harness;
pub mod learner;
pub mod mailbox;
pub mod sim;
pub mod value;

pub use codec::{decode, encode, encoded_len, verify_integrity, CodecError};
pub use mailbox::{Annotation, InfoPayload, Mailbox, MailboxError, ValueTrajectory, ViewProfile};
pub use value::{assess, prediction_entropy, AssessPolicy, Decision, Polarity, ProbabilityVector};
