//! Checks against independent reference computations written here rather
//! than reusing library code.

use mbxnet::mailbox::{ValueTrajectory, DEFAULT_AVG_EPSILON, DEFAULT_AVG_WINDOW};
use mbxnet::{Annotation, InfoPayload, Mailbox};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exact integral of a right-continuous step function given as
/// `(start_time, value)` pieces, over `[t0, end]`.
fn step_integral(pieces: &[(u64, f64)], end: u64) -> f64 {
    let mut area = 0.0;
    for (i, &(start, v)) in pieces.iter().enumerate() {
        let stop = pieces.get(i + 1).map_or(end, |p| p.0).min(end);
        if stop > start {
            area += v * (stop - start) as f64;
        }
    }
    area
}

#[test]
fn step_trajectory_average_matches_exact_integral() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let t0 = rng.gen_range(0..1000u64);
        let mut pieces = vec![(t0, rng.gen_range(-5.0..5.0))];
        let mut t = t0;
        for _ in 0..rng.gen_range(1..10) {
            t += rng.gen_range(5..200u64);
            pieces.push((t, rng.gen_range(-5.0..5.0)));
        }
        let horizon = t + rng.gen_range(1..100u64) - t0;
        let end = t0 + horizon;

        // Sample every tick; each jump becomes a one-tick ramp.
        let mut traj = ValueTrajectory::default();
        let mut k = 0;
        for tick in t0..=end {
            while k + 1 < pieces.len() && pieces[k + 1].0 <= tick {
                k += 1;
            }
            traj.push(tick, pieces[k].1, 0).unwrap();
        }
        let exact = step_integral(&pieces, end) / horizon as f64;
        // A ramp over one tick misses half the jump in area.
        let jumps: f64 = pieces.windows(2).map(|w| (w[1].1 - w[0].1).abs()).sum();
        let bound = jumps / (2.0 * horizon as f64) + 1e-12;
        let got = traj.average_value(horizon).unwrap();
        assert!((got - exact).abs() <= bound, "got {got}, exact {exact}, bound {bound}");
    }
}

#[test]
fn step_trajectory_at_jump_midpoints_is_exact() {
    // Samples on both sides of each one-tick ramp: the trapezoid is exact
    // for the piecewise-linear function it interpolates.
    let traj = ValueTrajectory::new(vec![
        (0, 1.0, 0),
        (10, 1.0, 0),
        (11, 3.0, 0),
        (20, 3.0, 0),
        (21, -1.0, 0),
        (40, -1.0, 0),
    ])
    .unwrap();
    let exact = (10.0 * 1.0 + 2.0 + 9.0 * 3.0 + 1.0 - 19.0) / 40.0;
    assert_eq!(traj.average_value(40).unwrap(), exact);
}

#[test]
fn limiting_flag_matches_direct_window_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut agree = 0;
    for case in 0..300 {
        // Dyadic values and integer times keep every area exact.
        let mut m = Mailbox::new(InfoPayload::from_bytes(vec![0; 4]), 1.0, 0);
        let mut traj = ValueTrajectory::default();
        let mut samples = Vec::new();
        let mut t = 0u64;
        let settle = rng.gen_range(0..40);
        for step in 0..rng.gen_range(1..60) {
            if step < settle && rng.gen_bool(0.6) {
                let delta = f64::from(rng.gen_range(-64i32..64)) / 16.0;
                m = m.annotate(Annotation::new(1, t, delta).unwrap()).unwrap();
            }
            traj.record(&m, t).unwrap();
            samples.push((t, m.current_value()));
            t += rng.gen_range(1..4);
        }

        let t0 = samples[0].0;
        let mut twice_area = 0.0f64;
        let mut running = vec![samples[0].1];
        for w in samples.windows(2) {
            twice_area += (w[0].1 + w[1].1) * (w[1].0 - w[0].0) as f64;
            running.push(twice_area / (2 * (w[1].0 - t0)) as f64);
        }
        let tail = &running[running.len().saturating_sub(DEFAULT_AVG_WINDOW)..];
        let expected_flag = running.len() >= DEFAULT_AVG_WINDOW
            && tail
                .iter()
                .all(|a| tail.iter().all(|b| (a - b).abs() < DEFAULT_AVG_EPSILON));

        let (avg, flag) = traj.limiting_average(DEFAULT_AVG_WINDOW, DEFAULT_AVG_EPSILON).unwrap();
        assert_eq!(avg, *running.last().unwrap(), "case {case}");
        assert_eq!(flag, expected_flag, "case {case}");
        agree += usize::from(flag);
    }
    // Both outcomes should be exercised.
    assert!(agree > 0 && agree < 300, "{agree}");
}

#[test]
fn accumulation_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut m = Mailbox::new(InfoPayload::from_bytes(vec![0]), 0.0, 0);
    let mut total = 0.0f64;
    for i in 0..100 {
        // Multiples of 2^-20 below 2^10 add exactly in f64.
        let d = f64::from(rng.gen_range(-(1 << 30)..(1 << 30))) / f64::from(1 << 20);
        total += d;
        m = m.annotate(Annotation::new(0, i, d).unwrap()).unwrap();
    }
    assert_eq!(m.current_value(), total);

    let mut m = Mailbox::new(InfoPayload::from_bytes(vec![0]), 0.0, 0);
    let mut size = 8u64;
    for i in 0..1000 {
        let d = rng.gen_range(0..100_000i64);
        size += d as u64;
        m = m.annotate(Annotation::try_new(0, i, 0.0, d, true).unwrap()).unwrap();
    }
    assert_eq!(m.current_size(), size);
}
