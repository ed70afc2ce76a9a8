//! Building and running handover experiments.
//!
//! Every experiment starts from a warm-up run on the old link that lasts
//! until the flow is stationary. Warm-ups are deterministic, so each is run
//! once per (technology, variant, competition) and cloned for every cell
//! and seed that needs it.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tfrc_core::model::handover_delay;
use tfrc_core::Technology;
use tfrc_simnet::{
    run_to_stationarity, Action, FlowKind, Scenario, ScriptEvent, Simulator, Stationary, Trace,
    TraceLevel, SEGMENT, SIGNAL_SPACING,
};

use crate::error::{Error, Result};
use crate::metrics::settle_time;
use crate::profile::{link_for, Variant};

/// Longest warm-up allowed before giving up on stationarity, seconds.
pub const MAX_WARMUP: f64 = 600.0;
/// Cap on the post-reconnection run when waiting for the rate to settle.
pub const SETTLE_CAP: f64 = 100.0;
/// Initial settlement period discarded before measuring fairness.
pub const FAIRNESS_SKIP: f64 = 30.0;
/// Length of the fairness averaging window.
pub const FAIRNESS_WINDOW: f64 = 100.0;
/// Delay between reconnection and the unfreeze request.
pub const UNFREEZE_DELAY: f64 = 1e-4;
/// Time run past reconnection when only losses are of interest.
const LOSS_TAIL: f64 = 2.0;

/// The flow under test is always flow 0; the competitor, if any, flow 1.
pub const TFRC_FLOW: usize = 0;
pub const RENO_FLOW: usize = 1;

/// How long to keep simulating after reconnection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    /// Just past reconnection.
    Losses,
    /// Until the rate settles near the new link's reference rate, or the cap.
    Settled,
    /// Long enough for the fairness window.
    Fairness,
}

pub struct Warm {
    pub sim: Simulator,
    pub stationary: Stationary,
}

type WarmKey = (Technology, Variant, bool);

/// Warm-up cache shared across runs and threads.
pub struct Lab {
    warm: HashMap<WarmKey, OnceLock<std::result::Result<Arc<Warm>, String>>>,
}

impl Default for Lab {
    fn default() -> Self {
        Self::new()
    }
}

impl Lab {
    pub fn new() -> Self {
        let mut warm = HashMap::new();
        for t in Technology::ALL {
            for v in Variant::BOTH {
                for reno in [false, true] {
                    warm.insert((t, v, reno), OnceLock::new());
                }
            }
        }
        Self { warm }
    }

    /// The stationary warm-up on `tech`, computed on first use.
    pub fn warm(&self, tech: Technology, variant: Variant, reno: bool) -> Result<Arc<Warm>> {
        self.warm[&(tech, variant, reno)]
            .get_or_init(|| warm_up(tech, variant, reno).map(Arc::new).map_err(|e| e.to_string()))
            .clone()
            .map_err(Error::Warmup)
    }

    /// Stationary receive rate of a lone flow on `tech`, bytes/s.
    pub fn reference_rate(&self, tech: Technology) -> Result<f64> {
        Ok(self.warm(tech, Variant::Standard, false)?.stationary.x_recv)
    }
}

fn flow_kind(variant: Variant) -> FlowKind {
    match variant {
        Variant::Standard => FlowKind::Tfrc,
        Variant::Freeze => FlowKind::Freeze,
    }
}

/// The warm-up part of every experiment on `tech`.
pub fn base_scenario(tech: Technology, variant: Variant, reno: bool) -> Scenario {
    let mut sc = Scenario::new(link_for(tech), MAX_WARMUP)
        .with_event(0.0, Action::StartFlow { kind: flow_kind(variant) });
    if reno {
        sc = sc.with_event(0.0, Action::StartFlow { kind: FlowKind::Reno });
    }
    sc.trace = TraceLevel::Control;
    sc
}

fn warm_up(tech: Technology, variant: Variant, reno: bool) -> Result<Warm> {
    let sc = base_scenario(tech, variant, reno);
    let mut sim = Simulator::new(&sc)?;
    let flows: &[usize] = if reno { &[TFRC_FLOW, RENO_FLOW] } else { &[TFRC_FLOW] };
    let stationary = run_to_stationarity(&mut sim, flows, MAX_WARMUP)?;
    Ok(Warm { sim, stationary })
}

/// Base RTT of the path with a full router queue ahead of a packet.
pub fn worst_rtt(tech: Technology) -> f64 {
    let link = link_for(tech);
    let queue_drain = (link.queue_capacity + 1) as f64 * link.serialization(SEGMENT).as_secs();
    tech.base_rtt() + queue_drain
}

/// One RTT ahead of the disconnection, taken as the worst RTT the old path
/// can produce plus one signal spacing. A mean RTT leaves queued packets on
/// the link when it drops. The largest RTT estimate seen in the stationary
/// window is used if it happens to be larger.
fn freeze_lead(warm: &Warm, from: Technology) -> f64 {
    let st = warm.stationary;
    warm.sim.trace().flows[TFRC_FLOW]
        .rtt_samples
        .iter()
        .filter(|(t, _)| *t >= st.t - tfrc_simnet::stationarity::WINDOW)
        .map(|(_, r)| *r)
        .fold(worst_rtt(from) + SIGNAL_SPACING, f64::max)
}

/// A fully timed handover experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct HandoverPlan {
    pub from: Technology,
    pub to: Technology,
    pub variant: Variant,
    pub seed: u64,
    pub reno: bool,
    pub horizon: Horizon,
    pub stationary: Stationary,
    pub t_freeze: Option<f64>,
    pub t_disconnect: f64,
    pub t_reconnect: f64,
    pub t_unfreeze: Option<f64>,
    /// Scenario end; a settled run may stop earlier.
    pub end: f64,
    /// The same experiment as a self-contained scenario.
    pub scenario: Scenario,
}

impl HandoverPlan {
    pub fn handover_events(&self) -> Vec<ScriptEvent> {
        let start = self.scenario.events.iter().filter(|e| matches!(e.action, Action::StartFlow { .. })).count();
        self.scenario.events[start..].to_vec()
    }
}

/// Times the handover: a uniformly random instant within four RTTs, starting
/// one RTT after stationarity; a disconnection of `2.5 s + R` of the new
/// link; for Freeze, a freeze one RTT before it and an unfreeze just after.
/// The offset after stationarity is stretched to the freeze lead when that
/// is longer, for both variants alike, so the freeze never predates the
/// warm-up's end.
pub fn build_handover_scenario(
    lab: &Lab,
    from: Technology,
    to: Technology,
    variant: Variant,
    seed: u64,
    reno: bool,
    horizon: Horizon,
) -> Result<HandoverPlan> {
    let warm = lab.warm(from, variant, reno)?;
    let st = warm.stationary;
    let r = st.rtt;
    let lead = freeze_lead(&warm, from);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_disconnect = st.t + r.max(lead) + rng.gen_range(0.0..4.0 * r);
    let t_reconnect = t_disconnect + handover_delay(to.stationary_rtt());
    let freeze = variant == Variant::Freeze;
    let t_freeze = freeze.then_some(t_disconnect - lead);
    let t_unfreeze = freeze.then_some(t_reconnect + UNFREEZE_DELAY);
    let end = t_reconnect
        + match horizon {
            Horizon::Losses => LOSS_TAIL,
            Horizon::Settled => SETTLE_CAP,
            Horizon::Fairness => FAIRNESS_SKIP + FAIRNESS_WINDOW + 1.0,
        };

    let mut sc = base_scenario(from, variant, reno);
    sc.seed = seed;
    sc.duration = end;
    if let Some(t) = t_freeze {
        sc = sc.with_event(t, Action::Freeze { flow: TFRC_FLOW });
    }
    sc = sc.with_event(t_disconnect, Action::Disconnect).with_event(
        t_reconnect,
        Action::Reconnect { link: link_for(to) },
    );
    if let Some(t) = t_unfreeze {
        sc = sc.with_event(t, Action::Unfreeze { flow: TFRC_FLOW });
    }
    Ok(HandoverPlan {
        from,
        to,
        variant,
        seed,
        reno,
        horizon,
        stationary: st,
        t_freeze,
        t_disconnect,
        t_reconnect,
        t_unfreeze,
        end,
        scenario: sc,
    })
}

#[derive(Debug, Clone)]
pub struct HandoverRun {
    pub plan: HandoverPlan,
    pub trace: Trace,
    /// Stationary receive rate of a lone flow on the new link.
    pub x_ref: f64,
}

/// Runs a plan from its cached warm-up.
pub fn run_plan(lab: &Lab, plan: HandoverPlan) -> Result<HandoverRun> {
    let warm = lab.warm(plan.from, plan.variant, plan.reno)?;
    let x_ref = lab.reference_rate(plan.to)?;
    let mut sim = warm.sim.clone();
    sim.schedule(plan.handover_events())?;
    match plan.horizon {
        Horizon::Settled => {
            sim.run_until_secs(plan.t_reconnect);
            let mut t = plan.t_reconnect;
            while t < plan.end {
                t = (t + 1.0).min(plan.end);
                sim.run_until_secs(t);
                if settle_time(sim.trace(), TFRC_FLOW, plan.t_reconnect, x_ref).is_some() {
                    break;
                }
            }
        }
        _ => sim.run_until_secs(plan.end),
    }
    Ok(HandoverRun {
        plan,
        trace: sim.into_trace(),
        x_ref,
    })
}

pub fn run_handover(
    lab: &Lab,
    from: Technology,
    to: Technology,
    variant: Variant,
    seed: u64,
    reno: bool,
    horizon: Horizon,
) -> Result<HandoverRun> {
    run_plan(lab, build_handover_scenario(lab, from, to, variant, seed, reno, horizon)?)
}
