use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tfrc_core::equation::{invert_throughput, throughput_equation, update_rtt_estimate};
use tfrc_core::freeze::{decode_options, encode_options, SignalOption};
use tfrc_core::model::{delta_p_min, rtt_closed_form, solve_nss, ModelInputs};
use tfrc_core::{LossIntervalHistory, ReceiverConfig, TfrcReceiver, DEFAULT_WEIGHTS};

proptest! {
    #[test]
    fn throughput_decreases_in_p_and_r(
        p in 1e-6f64..0.99, dp in 1e-4f64..0.5,
        r in 1e-3f64..10.0, dr in 1e-3f64..5.0,
    ) {
        let p2 = (p * (1.0 + dp)).min(1.0);
        prop_assume!(p2 > p);
        let t = |p, r| throughput_equation(p, r, 500.0, 4.0 * r).unwrap();
        prop_assert!(t(p2, r) < t(p, r));
        prop_assert!(t(p, r + dr) < t(p, r));
    }

    #[test]
    fn inversion_round_trip(log_p in -5.0f64..0.0, r in 1e-3f64..5.0) {
        let p = 10f64.powf(log_p);
        let x = throughput_equation(p, r, 500.0, 4.0 * r).unwrap();
        let inv = invert_throughput(x, r, 500.0).unwrap();
        prop_assert!((inv.p - p).abs() / p <= 1e-6, "p={} got {}", p, inv.p);
        let back = throughput_equation(inv.p, r, 500.0, 4.0 * r).unwrap();
        prop_assert!((back - x).abs() / x <= 1e-6);
    }

    #[test]
    fn ewma_matches_closed_form(r_old in 1e-3f64..5.0, r_new in 1e-3f64..5.0) {
        let mut r = r_old;
        for i in 1..=100u32 {
            r = update_rtt_estimate(Some(r), r_new, 0.9);
            let c = rtt_closed_form(i, r_old, r_new, 0.9);
            prop_assert!((r - c).abs() / c <= 1e-12, "i={} iter={} closed={}", i, r, c);
        }
    }

    #[test]
    fn in_order_arrivals_never_raise_p(
        intervals in proptest::collection::vec(1u64..400, 9),
        extra in 1u64..2000,
    ) {
        let mut h = LossIntervalHistory::from_intervals(&intervals, DEFAULT_WEIGHTS.to_vec());
        let mut prev = h.loss_event_rate().unwrap();
        let start = h.current();
        let s1: f64 = DEFAULT_WEIGHTS.iter().zip(&intervals[1..]).map(|(w, &i)| w * i as f64).sum();
        for k in 1..=extra {
            h.set_current(start + k);
            let p = h.loss_event_rate().unwrap();
            prop_assert!(p <= prev);
            let s0: f64 = DEFAULT_WEIGHTS
                .iter()
                .zip(h.intervals())
                .map(|(w, i)| w * i as f64)
                .sum();
            if s0 < s1 {
                prop_assert_eq!(p, prev);
            }
            prev = p;
        }
    }

    #[test]
    fn loss_free_stretch_stays_within_bound(
        gaps in proptest::collection::vec(20u64..300, 10),
        stretch in 1u64..3000,
    ) {
        // Feed a receiver a history of ten loss events, then a loss-free run.
        let mut rx = TfrcReceiver::new(ReceiverConfig::default());
        let mut seq = 0u64;
        let mut t = 0.0;
        for g in &gaps {
            for _ in 0..*g {
                rx.record_packet(seq, t, t, 0.01);
                seq += 1;
                t += 0.001;
            }
            seq += 1; // one loss
            t += 0.5;
        }
        rx.record_packet(seq, t, t, 0.01);
        seq += 1;
        prop_assert!(rx.history().completed().len() == 8);
        let p_prev = rx.loss_event_rate();
        for _ in 0..stretch {
            t += 0.001;
            rx.record_packet(seq, t, t, 0.01);
            seq += 1;
        }
        let dp = rx.loss_event_rate() - p_prev;
        let lo = delta_p_min(stretch as f64, p_prev, &DEFAULT_WEIGHTS);
        prop_assert!(dp <= 0.0);
        prop_assert!(dp >= lo - 1e-15, "dp={} bound={}", dp, lo);
    }
}

#[test]
fn loss_interval_worked_example() {
    let h = LossIntervalHistory::from_intervals(
        &[500, 100, 100, 100, 100, 100, 100, 100, 100],
        DEFAULT_WEIGHTS.to_vec(),
    );
    assert!((h.loss_event_rate().unwrap() - 0.006).abs() < 1e-15);
}

#[test]
fn solve_nss_matches_integer_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let r_old = 10f64.powf(rng.gen_range(-2.0..0.3));
        let r_new = 10f64.powf(rng.gen_range(-2.0..0.3));
        let q = rng.gen_range(0.5..0.99);
        let ratio = 10f64.powf(rng.gen_range(0.0..6.0));
        let mut inp = ModelInputs::new(1e6, r_old, r_new, 1.0, 1e6);
        inp.q = q;
        let x_c = inp.x_d / ratio;
        let n = solve_nss(&inp, x_c).unwrap_or_else(|e| panic!("{e} a={} q={q} ratio={ratio}", r_new / r_old));
        let a = r_new / r_old;
        let scan = (0..200)
            .find(|&k| a * 2f64.powi(k) + (1.0 - a) * (2.0 * q).powi(k) - ratio >= 0.0)
            .unwrap();
        assert_eq!(n as i32, scan, "a={a} q={q} ratio={ratio}");
    }
}

#[test]
fn option_codec_fuzz() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100_000 {
        let n = rng.gen_range(0..8);
        let opts: Vec<SignalOption> = (0..n)
            .map(|_| SignalOption::ALL[rng.gen_range(0..SignalOption::ALL.len())])
            .collect();
        assert_eq!(decode_options(&encode_options(&opts)).unwrap(), opts);

        // Interleave unknown options and padding; the known ones survive.
        let mut bytes = Vec::new();
        for o in &opts {
            match rng.gen_range(0..3) {
                0 => bytes.push(rng.gen_range(0..32)),
                1 => {
                    let mut kind = rng.gen_range(32..=255u8);
                    while SignalOption::from_code(kind).is_some() {
                        kind = rng.gen_range(32..=255u8);
                    }
                    let len = rng.gen_range(2..6u8);
                    bytes.extend([kind, len]);
                    bytes.extend((2..len).map(|_| rng.gen::<u8>()));
                }
                _ => {}
            }
            bytes.extend(encode_options(&[*o]));
        }
        assert_eq!(decode_options(&bytes).unwrap(), opts);

        // Any truncation either decodes a prefix or names an offset inside the area.
        if !bytes.is_empty() {
            let cut = rng.gen_range(0..bytes.len());
            match decode_options(&bytes[..cut]) {
                Ok(prefix) => assert!(opts.starts_with(&prefix)),
                Err(tfrc_core::Error::Truncated { offset, .. }) => assert!(offset < cut),
                Err(e) => panic!("unexpected {e}"),
            }
        }
    }
}
