//! Mailboxes: raw information plus an append-only chain of node comments.
//!
//! The raw payload is fixed at creation and protected by a SHA-256 digest.
//! Nodes with permission append [`Annotation`]s which shift the mailbox's
//! value by a signed delta and grow its size by a non-negative delta:
//!
//! ```text
//! value(t+1) = value(t) + sum(value_delta_j)
//! size(t+1)  = size(t)  + sum(size_delta_j)
//! ```
//!
//! Time-averaged value and size over a horizon are computed on a sampled
//! [`ValueTrajectory`] with the trapezoidal rule.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use sha2::{Digest as _, Sha256};
use thiserror::Error;

/// Simulation time in integer ticks.
pub type Tick = u64;

/// SHA-256 digest of a payload.
pub type Digest = [u8; 32];

/// Serialized length of one annotation on the wire, in bytes.
pub const ANNOTATION_WIRE_BYTES: usize = 4 + 8 + 8 + 4 + 1;

/// Size delta of an annotation whose size is measured from its own encoding.
pub const ANNOTATION_WIRE_BITS: u32 = (ANNOTATION_WIRE_BYTES * 8) as u32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MailboxError {
    #[error("time {t} precedes creation time {created_at}")]
    TimeBeforeCreation { t: Tick, created_at: Tick },
    #[error("node {node_id} has no permission to modify the mailbox")]
    PermissionDenied { node_id: u32 },
    #[error("size delta must be non-negative, got {0}")]
    NegativeSize(i64),
    #[error("size delta {0} does not fit in 32 bits")]
    SizeOverflow(i64),
    #[error("value delta must be finite, got {0}")]
    NonFinite(f64),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: u32, classes: u32 },
    #[error("malformed sample payload: {0}")]
    MalformedSample(&'static str),
    #[error("unknown popularity function `{0}`")]
    UnknownValueFn(String),
    #[error("{0}")]
    Domain(String),
}

/// Raw information carried by a mailbox.
///
/// The bytes are opaque to the mailbox; [`InfoPayload::from_sample`] and
/// [`InfoPayload::sample`] give them a concrete layout for feature vectors.
/// An absent payload carries no bytes and has size zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InfoPayload {
    bytes: Vec<u8>,
    present: bool,
}

impl InfoPayload {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self { bytes, present: true }
    }

    pub fn absent() -> Self {
        Self {
            bytes: Vec::new(),
            present: false,
        }
    }

    /// Encodes a feature vector and optional class label.
    ///
    /// Layout: `dim: u16 LE`, `has_label: u8`, `dim x f64 LE`, then
    /// `label: u32 LE` when `has_label == 1`.
    pub fn from_sample(feature: &[f64], label: Option<u32>, classes: u32) -> Result<Self, MailboxError> {
        let dim =
            u16::try_from(feature.len()).map_err(|_| MailboxError::MalformedSample("more than 65535 features"))?;
        if let Some(label) = label {
            if label >= classes {
                return Err(MailboxError::LabelOutOfRange { label, classes });
            }
        }
        let mut bytes = Vec::with_capacity(3 + 8 * feature.len() + 4);
        bytes.extend_from_slice(&dim.to_le_bytes());
        bytes.push(u8::from(label.is_some()));
        for x in feature {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        if let Some(label) = label {
            bytes.extend_from_slice(&label.to_le_bytes());
        }
        Ok(Self::from_bytes(bytes))
    }

    /// Decodes the layout written by [`InfoPayload::from_sample`].
    pub fn sample(&self) -> Result<(Vec<f64>, Option<u32>), MailboxError> {
        let b = &self.bytes;
        if b.len() < 3 {
            return Err(MailboxError::MalformedSample("shorter than sample header"));
        }
        let dim = u16::from_le_bytes([b[0], b[1]]) as usize;
        let has_label = match b[2] {
            0 => false,
            1 => true,
            _ => return Err(MailboxError::MalformedSample("label flag is not 0 or 1")),
        };
        let expected = 3 + 8 * dim + if has_label { 4 } else { 0 };
        if b.len() != expected {
            return Err(MailboxError::MalformedSample("length does not match header"));
        }
        let feature = b[3..3 + 8 * dim]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let label = has_label.then(|| u32::from_le_bytes(b[3 + 8 * dim..].try_into().unwrap()));
        Ok((feature, label))
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn is_present(&self) -> bool {
        self.present
    }

    /// Payload size in bits: eight per byte.
    pub fn size_bits(&self) -> u64 {
        8 * self.bytes.len() as u64
    }

    pub fn digest(&self) -> Digest {
        Sha256::digest(&self.bytes).into()
    }
}

/// One node's comment on a mailbox.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annotation {
    pub node_id: u32,
    pub time: Tick,
    /// Signed change in value. Negative comments are allowed.
    pub value_delta: f64,
    /// Growth in bits.
    pub size_delta: u32,
    pub permitted: bool,
}

impl Annotation {
    /// A permitted annotation whose size delta is its own wire size.
    pub fn new(node_id: u32, time: Tick, value_delta: f64) -> Result<Self, MailboxError> {
        Self::try_new(node_id, time, value_delta, i64::from(ANNOTATION_WIRE_BITS), true)
    }

    pub fn try_new(
        node_id: u32,
        time: Tick,
        value_delta: f64,
        size_delta: i64,
        permitted: bool,
    ) -> Result<Self, MailboxError> {
        if !value_delta.is_finite() {
            return Err(MailboxError::NonFinite(value_delta));
        }
        if size_delta < 0 {
            return Err(MailboxError::NegativeSize(size_delta));
        }
        let size_delta = u32::try_from(size_delta).map_err(|_| MailboxError::SizeOverflow(size_delta))?;
        Ok(Self {
            node_id,
            time,
            value_delta,
            size_delta,
            permitted,
        })
    }
}

/// Raw payload, its digest, the intrinsic value and the comment chain.
///
/// Values are immutable: [`Mailbox::annotate`] returns a new mailbox.
#[derive(Debug, Clone, PartialEq)]
pub struct Mailbox {
    payload: InfoPayload,
    payload_digest: Digest,
    intrinsic_value: f64,
    created_at: Tick,
    annotations: Vec<Annotation>,
}

impl Mailbox {
    pub fn new(payload: InfoPayload, intrinsic_value: f64, created_at: Tick) -> Self {
        let payload_digest = payload.digest();
        Self {
            payload,
            payload_digest,
            intrinsic_value,
            created_at,
            annotations: Vec::new(),
        }
    }

    /// Reassembles a mailbox from decoded parts without checking the digest.
    pub(crate) fn from_parts(
        payload: InfoPayload,
        payload_digest: Digest,
        intrinsic_value: f64,
        created_at: Tick,
        annotations: Vec<Annotation>,
    ) -> Self {
        Self {
            payload,
            payload_digest,
            intrinsic_value,
            created_at,
            annotations,
        }
    }

    pub fn payload(&self) -> &InfoPayload {
        &self.payload
    }

    pub fn payload_digest(&self) -> &Digest {
        &self.payload_digest
    }

    pub fn intrinsic_value(&self) -> f64 {
        self.intrinsic_value
    }

    pub fn created_at(&self) -> Tick {
        self.created_at
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    /// Elapsed ticks since creation.
    pub fn lifecycle_age(&self, t: Tick) -> Result<Tick, MailboxError> {
        t.checked_sub(self.created_at).ok_or(MailboxError::TimeBeforeCreation {
            t,
            created_at: self.created_at,
        })
    }

    /// Returns a copy with `a` appended, or `PermissionDenied`.
    pub fn annotate(&self, a: Annotation) -> Result<Mailbox, MailboxError> {
        if !a.permitted {
            return Err(MailboxError::PermissionDenied { node_id: a.node_id });
        }
        let mut next = self.clone();
        next.annotations.push(a);
        Ok(next)
    }

    /// Intrinsic value plus every annotation's delta.
    ///
    /// The sum is correctly rounded, so it does not depend on the order in
    /// which the same deltas were attached.
    pub fn current_value(&self) -> f64 {
        exact_sum(std::iter::once(self.intrinsic_value).chain(self.annotations.iter().map(|a| a.value_delta)))
    }

    /// Payload bits plus every annotation's size delta.
    pub fn current_size(&self) -> u64 {
        self.payload.size_bits() + self.annotations.iter().map(|a| u64::from(a.size_delta)).sum::<u64>()
    }

    pub fn verify_integrity(&self) -> bool {
        self.payload.digest() == self.payload_digest
    }

    pub fn popularity(&self, t: Tick, view: &ViewProfile, registry: &PopularityRegistry) -> Result<f64, MailboxError> {
        let f = registry.get(&view.value_fn_id)?;
        let age = self.lifecycle_age(t)?;
        Ok(f(PopularityInputs {
            size_bits: self.current_size(),
            age,
            value: self.current_value(),
        }))
    }
}

/// Correctly rounded sum of finite floats (Shewchuk partials).
pub fn exact_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }

    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    // Round half-even across the remaining partials.
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

/// Inputs to a popularity function: size, age and value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopularityInputs {
    pub size_bits: u64,
    pub age: Tick,
    pub value: f64,
}

pub type PopularityFn = Arc<dyn Fn(PopularityInputs) -> f64 + Send + Sync>;

/// Name under which [`value_density`] is registered.
pub const DEFAULT_POPULARITY: &str = "value_density";

/// `value / (kilobits * (1 + age))`.
pub fn value_density(inputs: PopularityInputs) -> f64 {
    let kilobits = inputs.size_bits as f64 / 1000.0;
    inputs.value / (kilobits * (1.0 + inputs.age as f64))
}

/// Named popularity functions. Each receiver view picks one by name.
#[derive(Clone)]
pub struct PopularityRegistry {
    fns: BTreeMap<String, PopularityFn>,
}

impl PopularityRegistry {
    /// A registry holding only [`value_density`].
    pub fn new() -> Self {
        let mut r = Self { fns: BTreeMap::new() };
        r.register(DEFAULT_POPULARITY, value_density);
        r
    }

    pub fn register<F>(&mut self, id: &str, f: F)
    where
        F: Fn(PopularityInputs) -> f64 + Send + Sync + 'static,
    {
        self.fns.insert(id.to_owned(), Arc::new(f));
    }

    pub fn get(&self, id: &str) -> Result<&PopularityFn, MailboxError> {
        self.fns
            .get(id)
            .ok_or_else(|| MailboxError::UnknownValueFn(id.to_owned()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.fns.contains_key(id)
    }
}

impl Default for PopularityRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for PopularityRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.fns.keys()).finish()
    }
}

/// How one receiver evaluates mailboxes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewProfile {
    pub receiver_id: u32,
    pub value_fn_id: String,
}

impl ViewProfile {
    pub fn new(receiver_id: u32, value_fn_id: impl Into<String>) -> Self {
        Self {
            receiver_id,
            value_fn_id: value_fn_id.into(),
        }
    }
}

/// Sampled `(time, value, size_bits)` history of a mailbox.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValueTrajectory {
    samples: Vec<(Tick, f64, u64)>,
}

/// Convergence window for [`ValueTrajectory::limiting_average`].
pub const DEFAULT_AVG_WINDOW: usize = 5;
pub const DEFAULT_AVG_EPSILON: f64 = 1e-6;

impl ValueTrajectory {
    pub fn new(samples: Vec<(Tick, f64, u64)>) -> Result<Self, MailboxError> {
        let mut traj = Self::default();
        for (t, v, s) in samples {
            traj.push(t, v, s)?;
        }
        Ok(traj)
    }

    /// Appends a sample; time must increase strictly and size must not shrink.
    pub fn push(&mut self, t: Tick, value: f64, size_bits: u64) -> Result<(), MailboxError> {
        if let Some(&(lt, _, ls)) = self.samples.last() {
            if t <= lt {
                return Err(MailboxError::Domain(format!("sample time {t} does not follow {lt}")));
            }
            if size_bits < ls {
                return Err(MailboxError::Domain(format!("size {size_bits} shrinks from {ls}")));
            }
        }
        if !value.is_finite() {
            return Err(MailboxError::NonFinite(value));
        }
        self.samples.push((t, value, size_bits));
        Ok(())
    }

    /// Records a mailbox's current value and size at time `t`.
    pub fn record(&mut self, m: &Mailbox, t: Tick) -> Result<(), MailboxError> {
        self.push(t, m.current_value(), m.current_size())
    }

    pub fn samples(&self) -> &[(Tick, f64, u64)] {
        &self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time-average of value over `[t0, t0 + horizon]`, `t0` the first sample.
    pub fn average_value(&self, horizon: Tick) -> Result<f64, MailboxError> {
        self.average_by(horizon, |(_, v, _)| v)
    }

    /// Time-average of size over `[t0, t0 + horizon]`.
    pub fn average_size(&self, horizon: Tick) -> Result<f64, MailboxError> {
        self.average_by(horizon, |(_, _, s)| s as f64)
    }

    /// Running average at the final sample, and whether the last `window`
    /// running averages all lie within `epsilon` of each other.
    pub fn limiting_average(&self, window: usize, epsilon: f64) -> Result<(f64, bool), MailboxError> {
        self.limiting_by(window, epsilon, |(_, v, _)| v)
    }

    pub fn limiting_size(&self, window: usize, epsilon: f64) -> Result<(f64, bool), MailboxError> {
        self.limiting_by(window, epsilon, |(_, _, s)| s as f64)
    }

    fn average_by(&self, horizon: Tick, f: impl Fn((Tick, f64, u64)) -> f64) -> Result<f64, MailboxError> {
        let Some(&(t0, _, _)) = self.samples.first() else {
            return Err(MailboxError::Domain("empty trajectory".into()));
        };
        if horizon == 0 {
            return Err(MailboxError::Domain("horizon must be positive".into()));
        }
        let end = t0 + horizon;
        let last = self.samples.last().unwrap().0;
        if end > last {
            return Err(MailboxError::Domain(format!(
                "trajectory ends at {last}, before horizon end {end}"
            )));
        }
        let mut area = 0.0;
        for w in self.samples.windows(2) {
            let (ta, tb) = (w[0].0, w[1].0);
            if ta >= end {
                break;
            }
            let (va, vb) = (f(w[0]), f(w[1]));
            if tb <= end {
                area += 0.5 * (va + vb) * (tb - ta) as f64;
            } else {
                // Horizon ends inside this segment: interpolate.
                let frac = (end - ta) as f64 / (tb - ta) as f64;
                let ve = va + frac * (vb - va);
                area += 0.5 * (va + ve) * (end - ta) as f64;
            }
        }
        Ok(area / horizon as f64)
    }

    fn running_averages(&self, f: impl Fn((Tick, f64, u64)) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.samples.len());
        let Some(&first) = self.samples.first() else {
            return out;
        };
        let t0 = first.0;
        out.push(f(first));
        let mut area = 0.0;
        for w in self.samples.windows(2) {
            area += 0.5 * (f(w[0]) + f(w[1])) * (w[1].0 - w[0].0) as f64;
            out.push(area / (w[1].0 - t0) as f64);
        }
        out
    }

    fn limiting_by(
        &self,
        window: usize,
        epsilon: f64,
        f: impl Fn((Tick, f64, u64)) -> f64,
    ) -> Result<(f64, bool), MailboxError> {
        if self.samples.is_empty() {
            return Err(MailboxError::Domain("empty trajectory".into()));
        }
        let avgs = self.running_averages(f);
        let last = *avgs.last().unwrap();
        let converged = window > 0 && avgs.len() >= window && {
            let tail = &avgs[avgs.len() - window..];
            let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
            hi - lo < epsilon
        };
        Ok((last, converged))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kb_payload(bits: usize) -> InfoPayload {
        InfoPayload::from_bytes(vec![0xAB; bits / 8])
    }

    #[test]
    fn construction_contract() {
        let m = Mailbox::new(kb_payload(1000), 5.0, 0);
        assert_eq!(m.current_value(), 5.0);
        assert_eq!(m.current_size(), 1000);
        assert!(m.annotations().is_empty());
        assert!(m.verify_integrity());

        let m = Mailbox::new(kb_payload(1000), 0.0, 7);
        assert_eq!(m.current_value(), 0.0);
        assert_eq!(m.lifecycle_age(7).unwrap(), 0);

        let a = Mailbox::new(InfoPayload::from_bytes(b"same".to_vec()), 1.0, 3);
        let b = Mailbox::new(InfoPayload::from_bytes(b"same".to_vec()), 1.0, 3);
        assert_eq!(a.payload_digest(), b.payload_digest());
    }

    #[test]
    fn lifecycle_age_cases() {
        let m = Mailbox::new(InfoPayload::absent(), 0.0, 3);
        assert_eq!(m.lifecycle_age(10).unwrap(), 7);
        assert_eq!(m.lifecycle_age(3).unwrap(), 0);
        assert_eq!(
            m.lifecycle_age(2),
            Err(MailboxError::TimeBeforeCreation { t: 2, created_at: 3 })
        );
    }

    #[test]
    fn annotate_value_and_size() {
        let m = Mailbox::new(kb_payload(1000), 5.0, 0);
        let m = m.annotate(Annotation::try_new(1, 1, 1.0, 64, true).unwrap()).unwrap();
        let m = m.annotate(Annotation::try_new(2, 2, -2.0, 128, true).unwrap()).unwrap();
        assert_eq!(m.current_value(), 4.0);
        assert_eq!(m.current_size(), 1192);
        assert_eq!(m.annotations().len(), 2);
        assert!(m.verify_integrity());
    }

    #[test]
    fn denied_annotation_leaves_mailbox_alone() {
        let m = Mailbox::new(kb_payload(1000), 5.0, 0);
        let denied = Annotation::try_new(9, 1, 3.0, 8, false).unwrap();
        assert_eq!(m.annotate(denied), Err(MailboxError::PermissionDenied { node_id: 9 }));
        assert_eq!(m.annotations().len(), 0);
        assert_eq!(m.current_value(), 5.0);
    }

    #[test]
    fn value_can_go_negative() {
        let mut m = Mailbox::new(InfoPayload::absent(), 0.0, 0);
        for d in [1.0, 1.0, -3.0] {
            m = m.annotate(Annotation::new(0, 0, d).unwrap()).unwrap();
        }
        assert_eq!(m.current_value(), -1.0);
        assert_eq!(Mailbox::new(InfoPayload::absent(), 2.5, 0).current_value(), 2.5);
    }

    #[test]
    fn size_accumulates() {
        let m = Mailbox::new(InfoPayload::from_bytes(vec![1]), 0.0, 0);
        assert_eq!(m.current_size(), 8);
        let m = m.annotate(Annotation::try_new(0, 0, 0.0, 8, true).unwrap()).unwrap();
        let m = m.annotate(Annotation::try_new(0, 0, 0.0, 16, true).unwrap()).unwrap();
        assert_eq!(m.current_size(), 32);
    }

    #[test]
    fn annotation_construction_rejects_bad_deltas() {
        assert_eq!(
            Annotation::try_new(0, 0, 0.0, -1, true),
            Err(MailboxError::NegativeSize(-1))
        );
        assert!(matches!(
            Annotation::try_new(0, 0, f64::NAN, 1, true),
            Err(MailboxError::NonFinite(_))
        ));
        assert!(matches!(
            Annotation::try_new(0, 0, 0.0, 1 << 40, true),
            Err(MailboxError::SizeOverflow(_))
        ));
        assert_eq!(Annotation::new(0, 0, 0.0).unwrap().size_delta, 200);
    }

    #[test]
    fn single_bit_flip_breaks_integrity() {
        let m = Mailbox::new(InfoPayload::from_bytes(vec![0u8; 16]), 0.0, 0);
        for bit in 0..128 {
            let mut bytes = m.payload().bytes().to_vec();
            bytes[bit / 8] ^= 1 << (bit % 8);
            let forged = Mailbox::from_parts(InfoPayload::from_bytes(bytes), *m.payload_digest(), 0.0, 0, vec![]);
            assert!(!forged.verify_integrity());
        }
    }

    #[test]
    fn sample_payload_round_trip() {
        let p = InfoPayload::from_sample(&[1.5, -2.0, 0.25], Some(2), 4).unwrap();
        assert_eq!(p.size_bits(), 8 * (3 + 24 + 4));
        assert_eq!(p.sample().unwrap(), (vec![1.5, -2.0, 0.25], Some(2)));
        let p = InfoPayload::from_sample(&[0.0; 8], None, 4).unwrap();
        assert_eq!(p.sample().unwrap(), (vec![0.0; 8], None));
        assert_eq!(
            InfoPayload::from_sample(&[0.0], Some(4), 4),
            Err(MailboxError::LabelOutOfRange { label: 4, classes: 4 })
        );
        assert!(InfoPayload::from_bytes(vec![1, 0]).sample().is_err());
        assert!(InfoPayload::from_bytes(vec![1, 0, 2, 0, 0, 0, 0, 0, 0, 0, 0])
            .sample()
            .is_err());
    }

    #[test]
    fn popularity_default_function() {
        let reg = PopularityRegistry::new();
        let view = ViewProfile::new(1, DEFAULT_POPULARITY);

        let m = Mailbox::new(kb_payload(1000), 100.0, 0);
        assert_eq!(m.popularity(0, &view, &reg).unwrap(), 100.0);

        let m = Mailbox::new(kb_payload(50_000), 100.0, 0);
        assert_eq!(m.popularity(1, &view, &reg).unwrap(), 1.0);
    }

    #[test]
    fn popularity_is_view_dependent() {
        let mut reg = PopularityRegistry::new();
        reg.register("raw_value", |i| i.value);
        reg.register("density_copy", value_density);
        let m = Mailbox::new(kb_payload(2000), 10.0, 0);
        let a = m.popularity(4, &ViewProfile::new(1, DEFAULT_POPULARITY), &reg).unwrap();
        let b = m.popularity(4, &ViewProfile::new(2, "raw_value"), &reg).unwrap();
        let c = m.popularity(4, &ViewProfile::new(3, "density_copy"), &reg).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, c);
        assert_eq!(
            m.popularity(4, &ViewProfile::new(1, "nope"), &reg),
            Err(MailboxError::UnknownValueFn("nope".into()))
        );
        assert!(m.popularity(0, &ViewProfile::new(1, "nope"), &reg).is_err());
    }

    #[test]
    fn exact_sum_is_correctly_rounded() {
        assert_eq!(exact_sum([1e100, 1.0, -1e100]), 1.0);
        assert_eq!(exact_sum([0.1; 10]), 1.0);
        assert_eq!(exact_sum(std::iter::empty()), 0.0);
        assert_eq!(exact_sum([1.0, 1e-16, 1e-16]), 1.0000000000000002);
    }

    #[test]
    fn average_of_constant_and_ramp() {
        let traj = ValueTrajectory::new((0..=20).map(|t| (t, 3.0, 8)).collect()).unwrap();
        for horizon in [1, 7, 20] {
            assert!((traj.average_value(horizon).unwrap() - 3.0).abs() < 1e-12);
        }
        let traj = ValueTrajectory::new((0..=1000).map(|t| (t, t as f64, 8)).collect()).unwrap();
        assert!((traj.average_value(1000).unwrap() - 500.0).abs() < 1e-9);
    }

    #[test]
    fn average_interpolates_inside_last_segment() {
        let traj = ValueTrajectory::new(vec![(0, 0.0, 0), (10, 10.0, 0)]).unwrap();
        // Integral of t over [0, 4] is 8.
        assert!((traj.average_value(4).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn average_domain_errors() {
        assert!(ValueTrajectory::default().average_value(5).is_err());
        let traj = ValueTrajectory::new(vec![(0, 1.0, 0), (3, 1.0, 0)]).unwrap();
        assert!(traj.average_value(0).is_err());
        assert!(traj.average_value(4).is_err());
    }

    #[test]
    fn trajectory_rejects_bad_samples() {
        assert!(ValueTrajectory::new(vec![(1, 0.0, 0), (1, 0.0, 0)]).is_err());
        assert!(ValueTrajectory::new(vec![(1, 0.0, 8), (2, 0.0, 0)]).is_err());
        assert!(ValueTrajectory::new(vec![(1, f64::NAN, 0)]).is_err());
    }

    #[test]
    fn limiting_average_cases() {
        let traj = ValueTrajectory::new((0..10).map(|t| (t, 4.0, 0)).collect()).unwrap();
        let (avg, ok) = traj.limiting_average(DEFAULT_AVG_WINDOW, DEFAULT_AVG_EPSILON).unwrap();
        assert!((avg - 4.0).abs() < 1e-12 && ok);

        let traj = ValueTrajectory::new((0..10).map(|t| (t, 2f64.powi(t as i32), 0)).collect()).unwrap();
        let (_, ok) = traj.limiting_average(DEFAULT_AVG_WINDOW, DEFAULT_AVG_EPSILON).unwrap();
        assert!(!ok);

        let short = ValueTrajectory::new(vec![(0, 1.0, 0), (1, 1.0, 0)]).unwrap();
        assert!(!short.limiting_average(5, 1e-6).unwrap().1);
        assert!(ValueTrajectory::default().limiting_average(5, 1e-6).is_err());
    }

    #[test]
    fn trajectory_records_mailbox() {
        let mut traj = ValueTrajectory::default();
        let mut m = Mailbox::new(InfoPayload::from_bytes(vec![0; 4]), 1.0, 0);
        traj.record(&m, 0).unwrap();
        m = m.annotate(Annotation::new(1, 1, 2.0).unwrap()).unwrap();
        traj.record(&m, 1).unwrap();
        assert_eq!(traj.samples(), &[(0, 1.0, 32), (1, 3.0, 232)]);
        assert!((traj.average_size(1).unwrap() - 132.0).abs() < 1e-12);
        let (s, _) = traj.limiting_size(2, 1e-6).unwrap();
        assert!((s - 132.0).abs() < 1e-12);
    }
}
