#![allow(dead_code)]

use mbxnet::{Annotation, InfoPayload, Mailbox};
use rand::Rng;

/// Random mailbox with up to `max_payload` bytes and `max_annotations`
/// annotations. About one in eight has an absent payload.
pub fn random_mailbox<R: Rng>(rng: &mut R, max_payload: usize, max_annotations: usize) -> Mailbox {
    let payload = if rng.gen_ratio(1, 8) {
        InfoPayload::absent()
    } else {
        let len = rng.gen_range(0..=max_payload);
        let mut bytes = vec![0u8; len];
        rng.fill(bytes.as_mut_slice());
        InfoPayload::from_bytes(bytes)
    };
    let created_at = rng.gen_range(0..1_000_000u64);
    let mut m = Mailbox::new(payload, rng.gen_range(-1e6..1e6), created_at);
    for _ in 0..rng.gen_range(0..=max_annotations) {
        let a = Annotation::try_new(
            rng.gen(),
            created_at + rng.gen_range(0..1_000_000u64),
            rng.gen_range(-1e3..1e3),
            rng.gen_range(0..=i64::from(u32::MAX)),
            true,
        )
        .unwrap();
        m = m.annotate(a).unwrap();
    }
    m
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
