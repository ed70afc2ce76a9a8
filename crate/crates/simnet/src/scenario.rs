//! Declarative scenario description and its TOML form.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::link::LinkSpec;
use crate::trace::{FlowKind, TraceLevel};

fn default_wired() -> LinkSpec {
    LinkSpec::new(100e6, 0.001, 1000)
}

fn default_max_disconnection() -> f64 {
    30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    StartFlow { kind: FlowKind },
    Disconnect,
    /// Brings the wireless hop back with new characteristics.
    Reconnect { link: LinkSpec },
    /// Changes the wireless hop without taking it down.
    Reparameterize { link: LinkSpec },
    /// The receiver of `flow` asks its sender to freeze.
    Freeze { flow: usize },
    Unfreeze { flow: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub t: f64,
    #[serde(flatten)]
    pub action: Action,
}

impl ScriptEvent {
    pub fn new(t: f64, action: Action) -> Self {
        Self { t, action }
    }
}

/// Sender, router and receiver in a chain. The sender-router hop is wired;
/// the router-receiver hop is the wireless link that hands over. Reverse
/// hops mirror the forward delays with ample capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    pub duration: f64,
    #[serde(default)]
    pub trace: TraceLevel,
    /// Wireless hop at start.
    pub link: LinkSpec,
    #[serde(default = "default_wired")]
    pub wired: LinkSpec,
    /// Longest disconnection a frozen flow must survive, seconds.
    #[serde(default = "default_max_disconnection")]
    pub max_disconnection: f64,
    #[serde(default, rename = "event")]
    pub events: Vec<ScriptEvent>,
}

/// Tracks what the script has set up so far, for validation.
#[derive(Debug, Clone, Default)]
pub(crate) struct ScriptState {
    pub flows: Vec<FlowKind>,
    pub down: bool,
    pub last_t: f64,
}

impl ScriptState {
    pub fn check(&mut self, ev: &ScriptEvent) -> Result<()> {
        if !(ev.t.is_finite() && ev.t >= 0.0) {
            return Err(SimError::Config(format!("event time {} is not valid", ev.t)));
        }
        if ev.t < self.last_t {
            return Err(SimError::Config(format!(
                "events out of order: {} after {}",
                ev.t, self.last_t
            )));
        }
        self.last_t = ev.t;
        match &ev.action {
            Action::StartFlow { kind } => self.flows.push(*kind),
            Action::Disconnect => {
                if self.down {
                    return Err(SimError::Config(format!("disconnect at {} while down", ev.t)));
                }
                self.down = true;
            }
            Action::Reconnect { link } => {
                link.validate()?;
                if !self.down {
                    return Err(SimError::Config(format!(
                        "reconnect at {} without a disconnect",
                        ev.t
                    )));
                }
                self.down = false;
            }
            Action::Reparameterize { link } => link.validate()?,
            Action::Freeze { flow } | Action::Unfreeze { flow } => match self.flows.get(*flow) {
                None => return Err(SimError::UnknownFlow { t: ev.t, flow: *flow }),
                Some(FlowKind::Freeze) => {}
                Some(k) => {
                    return Err(SimError::Config(format!(
                        "flow {flow} is {k:?}, which cannot freeze"
                    )))
                }
            },
        }
        Ok(())
    }
}

impl Scenario {
    pub fn new(link: LinkSpec, duration: f64) -> Self {
        Self {
            seed: 0,
            duration,
            trace: TraceLevel::Full,
            link,
            wired: default_wired(),
            max_disconnection: default_max_disconnection(),
            events: Vec::new(),
        }
    }

    pub fn with_event(mut self, t: f64, action: Action) -> Self {
        self.events.push(ScriptEvent::new(t, action));
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        self.wired.validate()?;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(SimError::Config(format!("duration {} is not valid", self.duration)));
        }
        let mut st = ScriptState::default();
        for ev in &self.events {
            st.check(ev)?;
        }
        Ok(())
    }

    /// Parses and validates a TOML scenario.
    pub fn from_toml(text: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            SimError::Parse {
                line,
                message: e.message().to_string(),
            }
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario is always representable")
    }
}
