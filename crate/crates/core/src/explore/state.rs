//! Global states and the transition relation over them.

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};

use crate::message::{Message, MsgType, NodeId, NodeSet, MAX_NODES};
use crate::net::{Instance, LinkChange, Topology};
use crate::node::{BufferOverflow, NodeState, Outcome, Protocol};

/// Location of the automaton that injects the two data packets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tester {
    Init,
    Sent1,
    Final,
}

/// All nodes plus the tester and the topology-change bookkeeping.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GlobalState {
    pub nodes: ArrayVec<NodeState, MAX_NODES>,
    pub tester: Tester,
    /// The link change has been applied.
    pub changed: bool,
    /// Some request has reached its destination's buffer. Sticky; only
    /// tracked for instances with a link change.
    pub first_arrived: bool,
}

impl GlobalState {
    pub fn node(&self, id: NodeId) -> &NodeState {
        &self.nodes[id.index() - 1]
    }

    fn node_mut(&mut self, id: NodeId) -> &mut NodeState {
        &mut self.nodes[id.index() - 1]
    }

    pub fn buffers_empty(&self) -> bool {
        self.nodes.iter().all(|n| n.msgbuf.is_empty())
    }

    /// Canonical byte encoding: fixed field order and widths, so equal keys
    /// mean equal states.
    pub fn state_key(&self, out: &mut Vec<u8>) {
        out.clear();
        out.push(self.tester as u8 | (self.changed as u8) << 2 | (self.first_arrived as u8) << 3);
        out.push(self.nodes.len() as u8);
        for n in &self.nodes {
            n.encode(self.nodes.len(), out);
        }
    }

    pub fn key(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(256);
        self.state_key(&mut out);
        out
    }
}

/// A step of the global system. Together with the state it fires from, a
/// transition determines the successor uniquely.
///
/// The derived order is the order in which transitions are enumerated and
/// hence the tie-break among equally short counterexamples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Transition {
    /// The node takes the head of its message buffer.
    Process { node: NodeId },
    /// The node sends one queued data packet for `dip`.
    Send { node: NodeId, dip: NodeId },
    /// The tester injects its next data packet.
    Inject,
    /// The one-shot link change.
    Change,
}

/// What a fired transition did, for traces and charts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum Effect {
    /// Local step without communication: the consumed message was discarded,
    /// absorbed, or (for data) delivered.
    Internal {
        node: NodeId,
        consumed: Message,
        delivered: bool,
    },
    Broadcast {
        sender: NodeId,
        consumed: Option<Message>,
        msg: Message,
        receivers: NodeSet,
    },
    Unicast {
        sender: NodeId,
        consumed: Option<Message>,
        msg: Message,
        to: NodeId,
    },
    /// The intended receiver is out of range. The sender handles the broken
    /// link and possibly broadcasts a route error in the same step.
    UnicastFail {
        sender: NodeId,
        consumed: Option<Message>,
        msg: Message,
        to: NodeId,
        rerr: Option<Message>,
        receivers: NodeSet,
    },
    /// A data packet enters at `originator`; a route request may go out.
    Inject {
        originator: NodeId,
        destination: NodeId,
        rreq: Option<Message>,
        receivers: NodeSet,
    },
    Change {
        change: LinkChange,
    },
}

impl Effect {
    pub fn is_internal(&self) -> bool {
        matches!(self, Effect::Internal { .. })
    }

    /// Node whose local state the step changes first.
    pub fn actor(&self) -> Option<NodeId> {
        match *self {
            Effect::Internal { node, .. } => Some(node),
            Effect::Broadcast { sender, .. } | Effect::Unicast { sender, .. } | Effect::UnicastFail { sender, .. } => {
                Some(sender)
            }
            Effect::Inject { originator, .. } => Some(originator),
            Effect::Change { .. } => None,
        }
    }
}

/// When the link change fires once its guard holds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeTiming {
    /// At once, before any other step.
    #[default]
    Immediate,
    /// At any later point, or never.
    Deferred,
}

/// An instance bound to protocol settings: everything needed to compute
/// successors.
#[derive(Clone, Debug)]
pub struct Model {
    pub instance: Instance,
    pub protocol: Protocol,
    pub buffer_capacity: usize,
    pub prioritize: bool,
    pub change_timing: ChangeTiming,
    post: Topology,
    injections: [(NodeId, NodeId); 2],
}

impl Model {
    pub fn new(instance: Instance, protocol: Protocol, buffer_capacity: usize, prioritize: bool) -> Model {
        let post = instance.post_change().unwrap_or(instance.topology);
        Model {
            instance,
            protocol,
            buffer_capacity,
            prioritize,
            change_timing: ChangeTiming::default(),
            post,
            injections: instance.scenario.injections(),
        }
    }

    pub fn with_change_timing(mut self, timing: ChangeTiming) -> Model {
        self.change_timing = timing;
        self
    }

    pub fn n(&self) -> u8 {
        self.instance.topology.n()
    }

    pub fn dynamic(&self) -> bool {
        self.instance.change.is_some()
    }

    /// Topology in force in `gs`.
    pub fn topology(&self, gs: &GlobalState) -> &Topology {
        if gs.changed {
            &self.post
        } else {
            &self.instance.topology
        }
    }

    pub fn initial_state(&self) -> GlobalState {
        GlobalState {
            nodes: NodeId::all(self.n()).map(NodeState::new).collect(),
            tester: Tester::Init,
            changed: false,
            first_arrived: false,
        }
    }

    /// The tester has a packet left and its originator has an empty
    /// message buffer.
    pub fn inject_enabled(&self, gs: &GlobalState) -> bool {
        let k = match gs.tester {
            Tester::Init => 0,
            Tester::Sent1 => 1,
            Tester::Final => return false,
        };
        gs.node(self.injections[k].0).msgbuf.is_empty()
    }

    /// Change guard: a request has been received by its destination.
    pub fn change_enabled(&self, gs: &GlobalState) -> bool {
        self.dynamic() && !gs.changed && gs.first_arrived
    }

    /// Candidate transitions in canonical order, ignoring priority.
    pub fn candidates(&self, gs: &GlobalState, out: &mut Vec<Transition>) {
        out.clear();
        for n in &gs.nodes {
            if !n.msgbuf.is_empty() {
                out.push(Transition::Process { node: n.ip });
            }
        }
        for n in &gs.nodes {
            out.extend(n.sendable().map(|dip| Transition::Send { node: n.ip, dip }));
        }
        if self.inject_enabled(gs) {
            out.push(Transition::Inject);
        }
        if self.change_enabled(gs) {
            out.push(Transition::Change);
        }
    }

    /// All successors of `gs`. With priority on, a state with an enabled
    /// internal step has only internal successors.
    pub fn successors(
        &self,
        gs: &GlobalState,
        out: &mut Vec<(Transition, GlobalState, Effect)>,
    ) -> Result<(), BufferOverflow> {
        out.clear();
        let mut cands = Vec::with_capacity(8);
        self.candidates(gs, &mut cands);
        // Process candidates come first, so priority is settled before any
        // other transition is fired.
        if self.change_timing == ChangeTiming::Immediate && self.change_enabled(gs) {
            let (next, effect) = self.fire(gs, Transition::Change)?.expect("change is enabled");
            out.push((Transition::Change, next, effect));
            return Ok(());
        }
        let heads = cands.iter().take_while(|t| matches!(t, Transition::Process { .. })).count();
        for &t in &cands[..heads] {
            let (next, effect) = self.fire(gs, t)?.expect("candidate transitions are enabled");
            out.push((t, next, effect));
        }
        if self.prioritize && out.iter().any(|(_, _, e)| e.is_internal()) {
            out.retain(|(_, _, e)| e.is_internal());
            return Ok(());
        }
        for &t in &cands[heads..] {
            let (next, effect) = self.fire(gs, t)?.expect("candidate transitions are enabled");
            out.push((t, next, effect));
        }
        Ok(())
    }

    /// Fire `t` from `gs` without regard to priority. `Ok(None)` if `t` is
    /// not enabled.
    pub fn fire(&self, gs: &GlobalState, t: Transition) -> Result<Option<(GlobalState, Effect)>, BufferOverflow> {
        let mut next = gs.clone();
        let effect = match t {
            Transition::Process { node } => {
                if node.is_none() || node.0 > self.n() {
                    return Ok(None);
                }
                let Some((consumed, outcome)) = next.node_mut(node).process_head(&self.protocol) else {
                    return Ok(None);
                };
                match outcome {
                    Outcome::Silent => Effect::Internal { node, consumed, delivered: false },
                    Outcome::Deliver(_) => Effect::Internal { node, consumed, delivered: true },
                    out => self.transmit(&mut next, node, Some(consumed), out)?,
                }
            }
            Transition::Send { node, dip } => {
                if node.is_none() || node.0 > self.n() || dip.is_none() || dip.0 > self.n() {
                    return Ok(None);
                }
                let Some(out) = next.node_mut(node).dequeue_send(dip) else {
                    return Ok(None);
                };
                self.transmit(&mut next, node, None, out)?
            }
            Transition::Inject => {
                if !self.inject_enabled(gs) {
                    return Ok(None);
                }
                let k = if next.tester == Tester::Init { 0 } else { 1 };
                next.tester = if k == 0 { Tester::Sent1 } else { Tester::Final };
                let (originator, destination) = self.injections[k];
                match next.node_mut(originator).handle_newpkt(destination) {
                    Outcome::Broadcast(rreq) => {
                        let receivers = self.broadcast(&mut next, originator, rreq)?;
                        Effect::Inject { originator, destination, rreq: Some(rreq), receivers }
                    }
                    _ => Effect::Inject { originator, destination, rreq: None, receivers: NodeSet::EMPTY },
                }
            }
            Transition::Change => {
                if !self.change_enabled(gs) {
                    return Ok(None);
                }
                next.changed = true;
                Effect::Change { change: self.instance.change.expect("dynamic instance") }
            }
        };
        Ok(Some((next, effect)))
    }

    fn transmit(
        &self,
        next: &mut GlobalState,
        sender: NodeId,
        consumed: Option<Message>,
        outcome: Outcome,
    ) -> Result<Effect, BufferOverflow> {
        match outcome {
            Outcome::Broadcast(msg) => {
                let receivers = self.broadcast(next, sender, msg)?;
                Ok(Effect::Broadcast { sender, consumed, msg, receivers })
            }
            Outcome::Unicast { to, msg } => {
                if self.topology(next).is_connected(sender, to) {
                    self.deliver(next, to, msg)?;
                    return Ok(Effect::Unicast { sender, consumed, msg, to });
                }
                let (rerr, receivers) = match next.node_mut(sender).on_unicast_failure(&msg, to, &self.protocol) {
                    Outcome::Broadcast(rerr) => (Some(rerr), self.broadcast(next, sender, rerr)?),
                    _ => (None, NodeSet::EMPTY),
                };
                Ok(Effect::UnicastFail { sender, consumed, msg, to, rerr, receivers })
            }
            Outcome::Silent | Outcome::Deliver(_) => unreachable!("internal outcomes are not transmitted"),
        }
    }

    fn broadcast(&self, next: &mut GlobalState, sender: NodeId, msg: Message) -> Result<NodeSet, BufferOverflow> {
        let receivers = self.topology(next).neighbours(sender);
        for r in receivers.iter() {
            self.deliver(next, r, msg)?;
        }
        Ok(receivers)
    }

    fn deliver(&self, next: &mut GlobalState, to: NodeId, msg: Message) -> Result<(), BufferOverflow> {
        next.node_mut(to).enqueue_message(msg, self.buffer_capacity)?;
        if self.dynamic() && msg.kind == MsgType::Rreq && msg.dip == to {
            next.first_arrived = true;
        }
        Ok(())
    }
}
