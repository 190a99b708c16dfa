//! Node identifiers, sequence numbers and the AODV message record.

use std::fmt;

use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

/// Largest network the explorer handles: A, B, C plus two relays.
pub const MAX_NODES: usize = 5;

/// Number of per-destination slots in node-indexed arrays (slot 0 is the null id).
pub const SLOTS: usize = MAX_NODES + 1;

/// Sequence number. `0` encodes "unknown".
pub type Sqn = u8;

/// Node address. `0` is the null address used for "no next hop".
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u8);

impl NodeId {
    pub const NONE: NodeId = NodeId(0);
    pub const A: NodeId = NodeId(1);
    pub const B: NodeId = NodeId(2);
    pub const C: NodeId = NodeId(3);

    pub fn is_none(self) -> bool {
        self.0 == 0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Real nodes `1..=n`.
    pub fn all(n: u8) -> impl Iterator<Item = NodeId> {
        (1..=n).map(NodeId)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            0 => f.write_str("-"),
            1 => f.write_str("A"),
            2 => f.write_str("B"),
            3 => f.write_str("C"),
            k => write!(f, "{k}"),
        }
    }
}

impl std::str::FromStr for NodeId {
    type Err = String;

    /// `A`, `B`, `C` or a number `1..=5`.
    fn from_str(s: &str) -> Result<Self, String> {
        let id = match s.trim() {
            "A" | "a" => 1,
            "B" | "b" => 2,
            "C" | "c" => 3,
            t => t.parse::<u8>().map_err(|_| format!("bad node {s:?}"))?,
        };
        if (1..=MAX_NODES as u8).contains(&id) {
            Ok(NodeId(id))
        } else {
            Err(format!("node {s:?} outside 1..={MAX_NODES}"))
        }
    }
}

/// A small set of node ids, one bit per id.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeSet(u8);

impl NodeSet {
    pub const EMPTY: NodeSet = NodeSet(0);

    pub fn insert(&mut self, id: NodeId) {
        self.0 |= 1 << id.0;
    }

    pub fn remove(&mut self, id: NodeId) {
        self.0 &= !(1 << id.0);
    }

    pub fn contains(self, id: NodeId) -> bool {
        self.0 & (1 << id.0) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    /// Members in ascending order.
    pub fn iter(self) -> impl Iterator<Item = NodeId> {
        (1..SLOTS as u8).filter(move |i| self.0 & (1 << i) != 0).map(NodeId)
    }
}

impl FromIterator<NodeId> for NodeSet {
    fn from_iter<I: IntoIterator<Item = NodeId>>(iter: I) -> Self {
        let mut s = NodeSet::EMPTY;
        for id in iter {
            s.insert(id);
        }
        s
    }
}

impl Serialize for NodeSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.len()))?;
        for id in self.iter() {
            seq.serialize_element(&id)?;
        }
        seq.end()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MsgType {
    Rreq,
    Rrep,
    Rerr,
    Pkt,
    NewPkt,
}

impl MsgType {
    pub fn code(self) -> u8 {
        match self {
            MsgType::Rreq => 0,
            MsgType::Rrep => 1,
            MsgType::Rerr => 2,
            MsgType::Pkt => 3,
            MsgType::NewPkt => 4,
        }
    }
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MsgType::Rreq => "RREQ",
            MsgType::Rrep => "RREP",
            MsgType::Rerr => "RERR",
            MsgType::Pkt => "PKT",
            MsgType::NewPkt => "NEWPKT",
        })
    }
}

/// Unreachable destinations carried by a route error: at most one sequence
/// number per destination.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RerrDests {
    members: NodeSet,
    sqns: [Sqn; SLOTS],
}

impl RerrDests {
    pub fn insert(&mut self, dest: NodeId, sqn: Sqn) {
        self.members.insert(dest);
        self.sqns[dest.index()] = sqn;
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, Sqn)> + '_ {
        self.members.iter().map(|d| (d, self.sqns[d.index()]))
    }
}

impl Serialize for RerrDests {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.len()))?;
        for pair in self.iter() {
            seq.serialize_element(&pair)?;
        }
        seq.end()
    }
}

/// One message record. Unused fields are zero so that equal messages encode
/// identically.
///
/// `rreqid` on a route reply is non-zero only on replies the sending node
/// generated itself in answer to a request; forwarded replies carry `0`.
/// It is bookkeeping for reply-failure recovery and has no protocol meaning.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Message {
    pub kind: MsgType,
    pub hops: u8,
    pub rreqid: u8,
    pub dip: NodeId,
    pub dsn: Sqn,
    pub oip: NodeId,
    pub osn: Sqn,
    pub sip: NodeId,
    #[serde(skip_serializing_if = "RerrDests::is_empty")]
    pub rerr: RerrDests,
}

impl Message {
    fn blank(kind: MsgType) -> Self {
        Message {
            kind,
            hops: 0,
            rreqid: 0,
            dip: NodeId::NONE,
            dsn: 0,
            oip: NodeId::NONE,
            osn: 0,
            sip: NodeId::NONE,
            rerr: RerrDests::default(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn rreq(hops: u8, rreqid: u8, dip: NodeId, dsn: Sqn, oip: NodeId, osn: Sqn, sip: NodeId) -> Self {
        Message { hops, rreqid, dip, dsn, oip, osn, sip, ..Message::blank(MsgType::Rreq) }
    }

    pub fn rrep(hops: u8, dip: NodeId, dsn: Sqn, oip: NodeId, sip: NodeId) -> Self {
        Message { hops, dip, dsn, oip, sip, ..Message::blank(MsgType::Rrep) }
    }

    pub fn rerr(dests: RerrDests, sip: NodeId) -> Self {
        Message { sip, rerr: dests, ..Message::blank(MsgType::Rerr) }
    }

    pub fn pkt(dip: NodeId, oip: NodeId, sip: NodeId) -> Self {
        Message { dip, oip, sip, ..Message::blank(MsgType::Pkt) }
    }

    pub fn newpkt(dip: NodeId) -> Self {
        Message { dip, ..Message::blank(MsgType::NewPkt) }
    }

    /// Append a fixed-width encoding. Injective on messages.
    pub(crate) fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&[
            self.kind.code(),
            self.hops,
            self.rreqid,
            self.dip.0,
            self.dsn,
            self.oip.0,
            self.osn,
            self.sip.0,
            self.rerr.members.bits(),
        ]);
        if !self.rerr.is_empty() {
            out.extend_from_slice(&self.rerr.sqns[1..]);
        }
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            MsgType::Rreq => write!(
                f,
                "RREQ[{}{}#{}](hops={}, dsn={}, osn={}, sip={})",
                self.oip, self.dip, self.rreqid, self.hops, self.dsn, self.osn, self.sip
            ),
            MsgType::Rrep => {
                write!(f, "RREP[{}{}](hops={}, dsn={}, sip={})", self.oip, self.dip, self.hops, self.dsn, self.sip)
            }
            MsgType::Rerr => {
                write!(f, "RERR{{")?;
                for (i, (d, s)) in self.rerr.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{d}:{s}")?;
                }
                write!(f, "}}(sip={})", self.sip)
            }
            MsgType::Pkt => write!(f, "PKT[{}{}](sip={})", self.oip, self.dip, self.sip),
            MsgType::NewPkt => write!(f, "NEWPKT[{}]", self.dip),
        }
    }
}
