use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tfrc_core::model::{lost_packets, simulate_nfi_timeline, verify_against_oracle, ModelInputs};
use tfrc_core::{SenderConfig, TfrcSender};

#[test]
fn closed_form_equals_stepped_sender_on_random_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let s = rng.gen_range(40.0..1500.0f64).round();
        let x_d = (s / 64.0) * 10f64.powf(rng.gen_range(0.0..6.5));
        let r = 10f64.powf(rng.gen_range(-3.0..1.7));
        let t_d = rng.gen_range(0.0..120.0);
        let mut inp = ModelInputs::new(x_d, r, r, t_d, x_d);
        inp.s = s;
        if let Err(e) = verify_against_oracle(&inp) {
            panic!("{inp:?}: {e}");
        }
    }
}

#[test]
fn closed_form_equals_stepped_sender_on_validation_grid() {
    for capacity in [10e6, 54e6, 100e6] {
        for delay_ms in 1..=100 {
            let r = 2.0 * delay_ms as f64 / 1000.0;
            let inp = ModelInputs::new(capacity / 8.0, r, r, 60.0, capacity / 8.0);
            verify_against_oracle(&inp).unwrap();
        }
    }
}

#[test]
fn losses_grow_with_disconnection_and_rate() {
    let mut prev = 0;
    for k in 0..200 {
        let inp = ModelInputs::new(1.27e6, 0.05, 0.05, k as f64 * 0.05, 1.27e6);
        let n = lost_packets(&inp).n_lost;
        assert!(n >= prev);
        prev = n;
    }
    let mut prev = 0;
    for k in 1..200 {
        let inp = ModelInputs::new(k as f64 * 1e4, 0.05, 0.05, 3.0, 1.27e6);
        let n = lost_packets(&inp).n_lost;
        assert!(n >= prev);
        prev = n;
    }
}

#[test]
fn backoff_trace_of_a_starved_sender() {
    let inp = ModelInputs::new(1.27e6, 0.05, 0.05, 200.0, 1.27e6);
    let run = simulate_nfi_timeline(&inp).unwrap();
    let mut s = TfrcSender::at_rate(SenderConfig::default(), 1.27e6, 0.05, 1e-6, 0.0);
    let mut t = 0.0;
    for nfi in &run.nfis {
        assert_eq!(s.x(), nfi.rate);
        assert_eq!(s.t_rto(), nfi.duration);
        t += s.t_rto();
        s.on_nofeedback_expiry(t);
    }
    assert_eq!(run.nfis[17].rate, 1.27e6 / 131072.0);
    assert_eq!(run.nfis[8].duration, 2.0 * 500.0 / (1.27e6 / 256.0));
}
