//! Deterministic discrete-event simulator for TFRC, Freeze-TFRC and TCP Reno
//! flows crossing a sender, a router and a wireless receiver.

pub mod endpoint;
pub mod error;
pub mod link;
pub mod packet;
pub mod scenario;
pub mod sim;
pub mod stationarity;
pub mod time;
pub mod trace;

pub use endpoint::{Flow, RenoFlow, TfrcFlow, SEGMENT, SIGNAL_SPACING};
pub use error::{Result, SimError};
pub use link::{Link, LinkSpec, Offer};
pub use packet::{FlowId, Packet, Payload, CONTROL_PACKET_SIZE};
pub use scenario::{Action, Scenario, ScriptEvent};
pub use sim::{run_scenario, Simulator};
pub use stationarity::{detect, run_to_stationarity, Stationary};
pub use time::SimTime;
pub use trace::{FlowKind, FlowStats, Record, RecordKind, Trace, TraceLevel, PATH};
