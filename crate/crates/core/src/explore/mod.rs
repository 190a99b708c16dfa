//! The global transition system and its exhaustive exploration.
//!
//! Broadcasts reach exactly the nodes connected to the sender and happen
//! atomically. A unicast needs a connected receiver; otherwise the sender
//! takes its link-break branch instead. Steps that consume a message without
//! sending anything are internal and, by default, have priority over all
//! communication. The link change of a dynamic instance fires as soon as
//! some request reaches its destination's buffer, ahead of every other step,
//! unless it is configured to be deferred.

mod search;
mod state;
mod trace;

pub use search::{
    explore, violations, Completion, Exploration, ExploreConfig, Property, Verdict, Verdicts, DEFAULT_STATE_LIMIT,
};
pub use state::{ChangeTiming, Effect, GlobalState, Model, Tester, Transition};
pub use trace::{changed_nodes, replay, rt_digest, ReplayError, Trace, TraceStep};
