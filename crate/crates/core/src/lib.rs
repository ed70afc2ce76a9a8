//! TFRC rate control, the Freeze extension for break-before-make handovers,
//! and a closed-form model of TFRC across a disconnection.

pub mod equation;
pub mod error;
pub mod freeze;
pub mod loss_history;
pub mod model;
pub mod receiver;
pub mod sender;

pub use equation::{
    invert_throughput, throughput, throughput_equation, update_allowed_rate, update_rtt_estimate,
    Inversion,
};
pub use error::{Error, Result};
pub use loss_history::{LossIntervalHistory, DEFAULT_WEIGHTS};
pub use receiver::{Arrival, ReceiverConfig, TfrcReceiver};
pub use sender::{Feedback, FeedbackOutcome, SenderConfig, SenderPhase, TfrcSender};
pub use freeze::{
    FreezeConfig, FreezeReceiver, FreezeSender, ReceiverFreezePhase, SenderFreezePhase,
    SignalOption,
};
pub use model::{full_model, ModelInputs, ModelOutputs, Technology};
