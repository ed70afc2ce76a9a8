use tfrc_core::model::handover_delay;
use tfrc_scenarios::*;
use tfrc_simnet::{run_scenario, Action, RecordKind};

use std::sync::OnceLock;

fn lab() -> &'static Lab {
    static LAB: OnceLock<Lab> = OnceLock::new();
    LAB.get_or_init(Lab::new)
}

fn reconnect_link(plan: &HandoverPlan) -> tfrc_simnet::LinkSpec {
    plan.scenario
        .events
        .iter()
        .find_map(|e| match &e.action {
            Action::Reconnect { link } => Some(*link),
            _ => None,
        })
        .unwrap()
}

#[test]
fn horizontal_handover_keeps_the_link() {
    for tech in Technology::ALL {
        let plan = build_handover_scenario(lab(), tech, tech, Variant::Standard, 0, false, Horizon::Losses).unwrap();
        assert_eq!(reconnect_link(&plan), plan.scenario.link);
        assert_eq!(plan.scenario.link, link_for(tech));
    }
}

#[test]
fn disconnection_to_umts_lasts_about_three_and_a_half_seconds() {
    let plan = build_handover_scenario(
        lab(),
        Technology::Wifi11b,
        Technology::Umts,
        Variant::Standard,
        0,
        false,
        Horizon::Losses,
    )
    .unwrap();
    let window = plan.t_reconnect - plan.t_disconnect;
    assert!((window - 3.46).abs() < 1e-9, "{window}");
    assert!((window - handover_delay(Technology::Umts.stationary_rtt())).abs() < 1e-9);
}

#[test]
fn handover_instant_follows_stationarity() {
    for from in Technology::ALL {
        for seed in 0..10 {
            let plan = build_handover_scenario(lab(), from, Technology::Wifi11b, Variant::Freeze, seed, false, Horizon::Losses).unwrap();
            let r = plan.stationary.rtt;
            let after = plan.t_disconnect - plan.stationary.t;
            assert!(after >= r && after < 5.0 * r + worst_rtt(from), "{from} seed {seed}: {after}");
            let freeze = plan.t_freeze.unwrap();
            assert!(freeze >= plan.stationary.t && freeze < plan.t_disconnect);
            assert!(plan.t_disconnect - freeze >= worst_rtt(from));
            assert!(plan.t_unfreeze.unwrap() > plan.t_reconnect);
            let standard = build_handover_scenario(lab(), from, Technology::Wifi11b, Variant::Standard, seed, false, Horizon::Losses).unwrap();
            assert_eq!(standard.t_disconnect, plan.t_disconnect);
        }
    }
}

#[test]
fn freeze_to_fast_link_loses_nothing() {
    let run = run_handover(lab(), Technology::Umts, Technology::Wifi11g, Variant::Freeze, 0, false, Horizon::Losses).unwrap();
    assert_eq!(run.trace.of_kind(RecordKind::DropDisconnected).count(), 0);
    assert_eq!(measure_losses(&run.trace, TFRC_FLOW).unwrap(), 0);
}

#[test]
fn freeze_loses_nothing_in_any_cell() {
    for from in Technology::ALL {
        for to in Technology::ALL {
            for seed in 0..3 {
                let run = run_handover(lab(), from, to, Variant::Freeze, seed, false, Horizon::Losses).unwrap();
                assert_eq!(measure_losses(&run.trace, TFRC_FLOW).unwrap(), 0, "{from}->{to} seed {seed}");
            }
        }
    }
}

#[test]
fn standard_loses_packets_on_every_handover() {
    for from in Technology::ALL {
        let run = run_handover(lab(), from, Technology::Wifi11b, Variant::Standard, 0, false, Horizon::Losses).unwrap();
        assert!(measure_losses(&run.trace, TFRC_FLOW).unwrap() > 0, "{from}");
    }
}

#[test]
fn cached_warm_up_matches_a_fresh_run() {
    let plan = build_handover_scenario(lab(), Technology::Wifi11b, Technology::Wimax, Variant::Freeze, 4, false, Horizon::Losses).unwrap();
    let cached = run_plan(lab(), plan.clone()).unwrap();
    let fresh = run_scenario(&plan.scenario).unwrap();
    assert_eq!(cached.trace.records, fresh.records);
    assert_eq!(cached.trace.flows, fresh.flows);
}

#[test]
fn freeze_restores_the_pre_freeze_rate() {
    for (from, to) in [
        (Technology::Wifi11b, Technology::Wifi11b),
        (Technology::Wimax, Technology::Umts),
        (Technology::Wifi11g, Technology::Umts),
        (Technology::Umts, Technology::Wifi11g),
    ] {
        let run = run_handover(lab(), from, to, Variant::Freeze, 1, false, Horizon::Losses).unwrap();
        let r = restoration(&run.trace, TFRC_FLOW).unwrap();
        assert_eq!(r.after, r.before, "{from}->{to}");
        let unfreeze = run.plan.t_unfreeze.unwrap();
        let new_rtt = lab().warm(to, Variant::Standard, false).unwrap().stationary.rtt;
        assert!(r.resumed_at >= unfreeze);
        assert!(r.resumed_at <= unfreeze + 2.0 * new_rtt, "{from}->{to}: {r:?}");
    }
}

#[test]
fn standard_backs_off_and_idles() {
    let run = run_handover(lab(), Technology::Wifi11b, Technology::Wifi11b, Variant::Standard, 1, false, Horizon::Settled).unwrap();
    let b = backoff_shape(&run.trace, TFRC_FLOW).unwrap();
    assert!(b.halvings >= 1, "{b:?}");
    assert!(b.t_idle > 0.0 && b.t_idle.is_finite(), "{b:?}");
    assert!(b.rate_at_reconnect < run.plan.stationary.x_recv);
}

#[test]
fn freeze_settles_within_three_rtts_on_slower_or_equal_links() {
    for from in Technology::ALL {
        for to in Technology::ALL {
            if to.capacity_bps() > from.capacity_bps() {
                continue;
            }
            let run = run_handover(lab(), from, to, Variant::Freeze, 2, false, Horizon::Settled).unwrap();
            let unfreeze = run.plan.t_unfreeze.unwrap();
            let target = 0.9 * run.plan.stationary.x_recv.min(run.x_ref);
            let steps = run.trace.rate_steps(TFRC_FLOW);
            let reached = steps
                .iter()
                .find(|(t, x)| *t >= unfreeze && *x >= target)
                .map(|(t, _)| *t)
                .unwrap_or(f64::INFINITY);
            let rtt = lab().warm(to, Variant::Standard, false).unwrap().stationary.rtt;
            assert!(reached - unfreeze <= 3.0 * rtt, "{from}->{to}: {}", reached - unfreeze);
        }
    }
}

#[test]
fn wasted_capacity_is_lower_with_freeze_on_a_horizontal_handover() {
    let waste = |v| {
        let run = run_handover(lab(), Technology::Wifi11b, Technology::Wifi11b, v, 0, false, Horizon::Settled).unwrap();
        measure_wasted(&run.trace, TFRC_FLOW, run.x_ref).unwrap().packets
    };
    let (standard, freeze) = (waste(Variant::Standard), waste(Variant::Freeze));
    // Same orders of magnitude as the reference simulation: thousands against tens.
    assert!((1e3..1e4).contains(&standard), "{standard}");
    assert!((1e1..1e2).contains(&freeze), "{freeze}");
}

#[test]
fn two_reno_flows_share_evenly() {
    let mut sc = base_scenario(Technology::Wimax, Variant::Standard, false);
    sc.events.clear();
    sc = sc
        .with_event(0.0, Action::StartFlow { kind: tfrc_simnet::FlowKind::Reno })
        .with_event(0.2, Action::StartFlow { kind: tfrc_simnet::FlowKind::Reno });
    sc.duration = 150.0;
    let trace = run_scenario(&sc).unwrap();
    let ratio = trace.flows[0].mean_goodput(30.0, 130.0) / trace.flows[1].mean_goodput(30.0, 130.0);
    assert!((ratio - 1.0).abs() < 0.3, "{ratio}");
}

#[test]
fn freeze_is_reasonably_fair_after_a_wimax_handover() {
    let run = run_handover(lab(), Technology::Wimax, Technology::Wimax, Variant::Freeze, 0, true, Horizon::Fairness).unwrap();
    let ratio = fairness_ratio(&run.trace, TFRC_FLOW, RENO_FLOW).unwrap();
    assert!((0.5..=2.0).contains(&ratio), "{ratio}");
}

#[test]
fn fairness_window_past_the_trace_is_an_error() {
    let run = run_handover(lab(), Technology::Wifi11g, Technology::Wifi11g, Variant::Freeze, 0, true, Horizon::Losses).unwrap();
    assert!(matches!(
        fairness_ratio(&run.trace, TFRC_FLOW, RENO_FLOW),
        Err(Error::WindowPastEnd { .. })
    ));
}

#[test]
fn trace_without_a_handover_is_rejected() {
    let w = lab().warm(Technology::Wifi11g, Variant::Standard, false).unwrap();
    assert!(matches!(measure_losses(w.sim.trace(), TFRC_FLOW), Err(Error::NoHandover)));
}
