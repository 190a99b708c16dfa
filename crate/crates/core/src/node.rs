//! The per-node AODV state machine.
//!
//! Every operation is a deterministic transformation of a [`NodeState`]
//! that reports what, if anything, the node transmits. Whether a transmission
//! actually reaches anyone is decided by the explorer, which knows the
//! topology.

use std::fmt;

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::message::{Message, MsgType, NodeId, RerrDests, Sqn, SLOTS};
use crate::routing::{RouteEntry, RoutingTable, RreqSet, MAX_RREQID};

/// Hard upper bound on the message buffer; the configured capacity may be lower.
pub const MAX_BUFFER: usize = 24;
pub const DEFAULT_BUFFER_CAPACITY: usize = 16;

/// The four protocol variants, each extending the previous one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Variant {
    /// AODV as specified.
    Basic,
    /// Intermediate nodes forward every route reply.
    ForwardAllReplies,
    /// Route requests arriving over a shorter path are answered again.
    ReplyImproved,
    /// A request whose reply failed is not marked as processed.
    RecoverFailedReplies,
}

impl Variant {
    pub const ALL: [Variant; 4] =
        [Variant::Basic, Variant::ForwardAllReplies, Variant::ReplyImproved, Variant::RecoverFailedReplies];

    pub fn id(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_id(id: u8) -> Option<Variant> {
        Variant::ALL.get((id as usize).checked_sub(1)?).copied()
    }
}

impl TryFrom<u8> for Variant {
    type Error = String;
    fn try_from(id: u8) -> Result<Self, Self::Error> {
        Variant::from_id(id).ok_or_else(|| format!("model must be 1..=4, got {id}"))
    }
}

impl From<Variant> for u8 {
    fn from(v: Variant) -> u8 {
        v.id()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "model {}", self.id())
    }
}

/// How variants 3 and 4 treat a duplicate request that arrived over a
/// shorter path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImprovedDuplicates {
    /// Handle it like a fresh request: reply if this node would reply,
    /// otherwise re-broadcast it.
    #[default]
    Reprocess,
    /// Only nodes that would reply act on it; pure forwarders just learn the
    /// shorter reverse route.
    ReplyOnly,
}

/// Protocol behaviour knobs for one exploration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Protocol {
    pub variant: Variant,
    pub improved_duplicates: ImprovedDuplicates,
}

impl Protocol {
    pub fn new(variant: Variant) -> Self {
        Protocol { variant, improved_duplicates: ImprovedDuplicates::default() }
    }

    fn forwards_all_replies(&self) -> bool {
        self.variant >= Variant::ForwardAllReplies
    }

    fn answers_improved_requests(&self) -> bool {
        self.variant >= Variant::ReplyImproved
    }

    fn recovers_failed_replies(&self) -> bool {
        self.variant >= Variant::RecoverFailedReplies
    }
}

/// What a node emits after a local step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Silent,
    /// A data packet reached its destination.
    Deliver(NodeId),
    Broadcast(Message),
    Unicast {
        to: NodeId,
        msg: Message,
    },
}

impl Outcome {
    /// Outcomes that do not need a communication partner.
    pub fn is_internal(&self) -> bool {
        matches!(self, Outcome::Silent | Outcome::Deliver(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("message buffer of node {node} is full (capacity {capacity})")]
pub struct BufferOverflow {
    pub node: NodeId,
    pub capacity: usize,
}

/// One AODV node.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NodeState {
    pub ip: NodeId,
    pub sn: Sqn,
    pub rreq_counter: u8,
    pub rt: RoutingTable,
    pub rreqs: RreqSet,
    /// Pending data packets per destination.
    pub queues: [u8; SLOTS],
    pub msgbuf: ArrayVec<Message, MAX_BUFFER>,
}

impl NodeState {
    pub fn new(ip: NodeId) -> Self {
        assert!(!ip.is_none(), "node id 0 is reserved");
        NodeState {
            ip,
            sn: 1,
            rreq_counter: 0,
            rt: RoutingTable::default(),
            rreqs: RreqSet::default(),
            queues: [0; SLOTS],
            msgbuf: ArrayVec::new(),
        }
    }

    pub fn route(&self, dip: NodeId) -> &RouteEntry {
        self.rt.get(dip)
    }

    fn has_route(&self, dip: NodeId) -> bool {
        self.rt.route(dip).is_some()
    }

    /// Routing-table update that never touches the entry for the node itself.
    fn update_route(&mut self, dip: NodeId, dsn: Sqn, hops: u8, nhop: NodeId) -> bool {
        dip != self.ip && self.rt.update(dip, dsn, hops, nhop)
    }

    /// Append a received message to the tail of the buffer.
    pub fn enqueue_message(&mut self, msg: Message, capacity: usize) -> Result<(), BufferOverflow> {
        let capacity = capacity.min(MAX_BUFFER);
        if self.msgbuf.len() >= capacity {
            return Err(BufferOverflow { node: self.ip, capacity });
        }
        self.msgbuf.push(msg);
        Ok(())
    }

    /// Start a route discovery for `dip`.
    pub fn initiate_route_discovery(&mut self, dip: NodeId) -> Message {
        debug_assert!(dip != self.ip && !self.has_route(dip));
        self.sn += 1;
        self.rreq_counter += 1;
        assert!(self.rreq_counter <= MAX_RREQID, "too many route discoveries at {}", self.ip);
        self.rreqs.insert(self.ip, self.rreq_counter);
        Message::rreq(0, self.rreq_counter, dip, self.rt.get(dip).dsn, self.ip, self.sn, self.ip)
    }

    /// A data packet for `dip` arrives from the application layer.
    ///
    /// The packet is queued. A route discovery starts only if there is no
    /// usable route and no discovery for `dip` is already in flight (i.e. the
    /// queue was empty).
    pub fn handle_newpkt(&mut self, dip: NodeId) -> Outcome {
        debug_assert!(dip != self.ip);
        let pending = self.queues[dip.index()];
        self.queues[dip.index()] = pending + 1;
        if self.has_route(dip) || pending > 0 {
            Outcome::Silent
        } else {
            Outcome::Broadcast(self.initiate_route_discovery(dip))
        }
    }

    /// Destinations with a queued packet and a usable route, ascending.
    pub fn sendable(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.queues
            .iter()
            .enumerate()
            .filter(|&(d, &q)| q > 0 && self.has_route(NodeId(d as u8)))
            .map(|(d, _)| NodeId(d as u8))
    }

    /// Send one queued packet for `dip` towards its next hop. `None` if no
    /// packet is queued for `dip` or there is no usable route.
    pub fn dequeue_send(&mut self, dip: NodeId) -> Option<Outcome> {
        let nhop = self.rt.route(dip)?.nhop;
        let q = &mut self.queues[dip.index()];
        if *q == 0 {
            return None;
        }
        *q -= 1;
        Some(Outcome::Unicast { to: nhop, msg: Message::pkt(dip, self.ip, self.ip) })
    }

    /// Remove and process the head of the message buffer.
    pub fn process_head(&mut self, proto: &Protocol) -> Option<(Message, Outcome)> {
        if self.msgbuf.is_empty() {
            return None;
        }
        let msg = self.msgbuf.remove(0);
        let outcome = match msg.kind {
            MsgType::Rreq => self.process_rreq(&msg, proto),
            MsgType::Rrep => self.process_rrep(&msg, proto),
            MsgType::Rerr => self.process_rerr(&msg),
            MsgType::Pkt => self.process_pkt(&msg),
            MsgType::NewPkt => self.handle_newpkt(msg.dip),
        };
        Some((msg, outcome))
    }

    pub fn process_rreq(&mut self, msg: &Message, proto: &Protocol) -> Outcome {
        debug_assert_eq!(msg.kind, MsgType::Rreq);
        // distance to the originator as known before this message arrived
        let known_hops = self.rt.get(msg.oip).hops;
        self.update_route(msg.sip, 0, 1, msg.sip);

        let hops = msg.hops + 1;
        let mut improved_duplicate = false;
        if self.rreqs.contains(msg.oip, msg.rreqid) {
            let improves = proto.answers_improved_requests() && msg.oip != self.ip && hops < known_hops;
            if !improves {
                return Outcome::Silent;
            }
            improved_duplicate = true;
        }

        if !self.update_route(msg.oip, msg.osn, hops, msg.sip)
            && proto.recovers_failed_replies()
            && !self.rt.get(msg.oip).valid
        {
            self.rt.overwrite(msg.oip, msg.osn, hops, msg.sip);
        }
        self.rreqs.insert(msg.oip, msg.rreqid);
        let back = self.rt.get(msg.oip).nhop;

        if msg.dip == self.ip {
            self.sn = self.sn.max(msg.dsn);
            let mut rrep = Message::rrep(0, self.ip, self.sn, msg.oip, self.ip);
            rrep.rreqid = msg.rreqid;
            return Outcome::Unicast { to: back, msg: rrep };
        }

        let known = *self.rt.get(msg.dip);
        if known.is_usable() && known.dsn != 0 && known.dsn >= msg.dsn {
            let mut rrep = Message::rrep(known.hops, msg.dip, known.dsn, msg.oip, self.ip);
            rrep.rreqid = msg.rreqid;
            return Outcome::Unicast { to: back, msg: rrep };
        }

        if improved_duplicate && proto.improved_duplicates == ImprovedDuplicates::ReplyOnly {
            return Outcome::Silent;
        }
        Outcome::Broadcast(Message::rreq(hops, msg.rreqid, msg.dip, msg.dsn.max(known.dsn), msg.oip, msg.osn, self.ip))
    }

    pub fn process_rrep(&mut self, msg: &Message, proto: &Protocol) -> Outcome {
        debug_assert_eq!(msg.kind, MsgType::Rrep);
        self.update_route(msg.sip, 0, 1, msg.sip);
        let hops = msg.hops + 1;
        let updated = self.update_route(msg.dip, msg.dsn, hops, msg.sip);
        if msg.oip == self.ip {
            return Outcome::Silent;
        }
        let back = self.rt.get(msg.oip).nhop;
        if !(updated || proto.forwards_all_replies()) || back.is_none() {
            return Outcome::Silent;
        }
        Outcome::Unicast { to: back, msg: Message::rrep(hops, msg.dip, msg.dsn, msg.oip, self.ip) }
    }

    pub fn process_rerr(&mut self, msg: &Message) -> Outcome {
        debug_assert_eq!(msg.kind, MsgType::Rerr);
        let mut dests = RerrDests::default();
        for (d, s) in msg.rerr.iter() {
            let e = *self.rt.get(d);
            if e.is_usable() && e.nhop == msg.sip && e.dsn < s {
                self.rt.invalidate(d, s);
                dests.insert(d, s);
            }
        }
        if dests.is_empty() {
            Outcome::Silent
        } else {
            Outcome::Broadcast(Message::rerr(dests, self.ip))
        }
    }

    pub fn process_pkt(&mut self, msg: &Message) -> Outcome {
        debug_assert_eq!(msg.kind, MsgType::Pkt);
        if msg.dip == self.ip {
            return Outcome::Deliver(msg.dip);
        }
        if let Some(e) = self.rt.route(msg.dip) {
            return Outcome::Unicast { to: e.nhop, msg: Message::pkt(msg.dip, msg.oip, self.ip) };
        }
        let mut dests = RerrDests::default();
        dests.insert(msg.dip, self.rt.get(msg.dip).dsn);
        Outcome::Broadcast(Message::rerr(dests, self.ip))
    }

    /// The unicast of `failed` to `nhop` could not be delivered: invalidate
    /// every route through `nhop`, bumping its sequence number, and report
    /// them in a route error (silent if there are none).
    pub fn on_unicast_failure(&mut self, failed: &Message, nhop: NodeId, proto: &Protocol) -> Outcome {
        let broken: Vec<(NodeId, Sqn)> =
            self.rt.known().filter(|(_, e)| e.valid && e.nhop == nhop).map(|(d, e)| (d, e.dsn + 1)).collect();
        let mut dests = RerrDests::default();
        for (d, s) in broken {
            self.rt.invalidate(d, s);
            dests.insert(d, s);
        }
        if proto.recovers_failed_replies() && failed.kind == MsgType::Rrep && failed.rreqid != 0 {
            self.rreqs.remove(failed.oip, failed.rreqid);
        }
        if dests.is_empty() {
            Outcome::Silent
        } else {
            Outcome::Broadcast(Message::rerr(dests, self.ip))
        }
    }

    /// Append a fixed-width encoding of this node for an `n`-node network.
    pub(crate) fn encode(&self, n: usize, out: &mut Vec<u8>) {
        out.push(self.sn);
        out.push(self.rreq_counter);
        self.rt.encode(n, out);
        out.extend_from_slice(&self.rreqs.bits().to_le_bytes());
        out.extend_from_slice(&self.queues[1..=n]);
        out.push(self.msgbuf.len() as u8);
        for m in &self.msgbuf {
            m.encode(out);
        }
    }
}
