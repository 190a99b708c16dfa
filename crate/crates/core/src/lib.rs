//! Exhaustive exploration of AODV route discovery on small networks.
//!
//! The crate models each node as a deterministic state machine
//! ([`node`]), composes nodes over a topology with atomic broadcast and
//! blocking unicast ([`explore`]), and checks three route-discovery
//! properties over every topology of up to five nodes ([`enumerate`],
//! [`sweep`], [`report`]).

pub mod enumerate;
pub mod explore;
pub mod message;
pub mod msc;
pub mod net;
pub mod node;
pub mod report;
pub mod routing;
pub mod sweep;

pub use message::{Message, MsgType, NodeId, NodeSet, Sqn};
pub use net::{Instance, Link, LinkChange, Scenario, Topology};
pub use node::{NodeState, Outcome, Protocol, Variant};
