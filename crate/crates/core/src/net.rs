//! Topologies, injection scenarios, the one-shot link change and the
//! distance bound used by the route-optimality properties.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::message::{NodeId, NodeSet, MAX_NODES, SLOTS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("node count {0} outside 3..=5")]
    NodeCount(u8),
    #[error("link {0} is not between two distinct nodes of the network")]
    BadLink(Link),
    #[error("nodes A, B and C are not connected")]
    Disconnected,
    #[error("link {0} already present")]
    LinkPresent(Link),
    #[error("link {0} not present")]
    LinkAbsent(Link),
    #[error("removing link {0} disconnects A, B and C")]
    RemovalDisconnects(Link),
    #[error("scenario must be 1..=4, got {0}")]
    Scenario(u8),
}

/// Undirected link, stored with the smaller endpoint first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link(NodeId, NodeId);

/// Number of distinct links on five nodes.
pub const LINK_SLOTS: usize = MAX_NODES * (MAX_NODES - 1) / 2;

impl Link {
    pub fn new(a: NodeId, b: NodeId) -> Link {
        if a <= b {
            Link(a, b)
        } else {
            Link(b, a)
        }
    }

    pub fn ends(self) -> (NodeId, NodeId) {
        (self.0, self.1)
    }

    /// Position in the fixed order 1-2, 1-3, 1-4, 1-5, 2-3, ..., 4-5.
    pub fn slot(self) -> usize {
        let (i, j) = (self.0 .0 as usize, self.1 .0 as usize);
        debug_assert!(1 <= i && i < j && j <= MAX_NODES);
        (i - 1) * (2 * MAX_NODES - i) / 2 + (j - i - 1)
    }

    pub fn from_slot(slot: usize) -> Link {
        ALL_LINKS[slot]
    }

    /// Image under a relabelling of node ids.
    pub fn map(self, perm: &[u8; SLOTS]) -> Link {
        Link::new(NodeId(perm[self.0.index()]), NodeId(perm[self.1.index()]))
    }
}

const ALL_LINKS: [Link; LINK_SLOTS] = {
    let mut out = [Link(NodeId(0), NodeId(0)); LINK_SLOTS];
    let mut k = 0;
    let mut i = 1;
    while i <= MAX_NODES {
        let mut j = i + 1;
        while j <= MAX_NODES {
            out[k] = Link(NodeId(i as u8), NodeId(j as u8));
            k += 1;
            j += 1;
        }
        i += 1;
    }
    out
};

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.0, self.1)
    }
}

impl std::str::FromStr for Link {
    type Err = String;

    /// Two node names joined by `-`, as in `A-B` or `2-4`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once('-').ok_or_else(|| format!("bad link {s:?}, expected e.g. A-B"))?;
        let (a, b): (NodeId, NodeId) = (a.parse()?, b.parse()?);
        if a == b {
            return Err(format!("link {s:?} is a self-loop"));
        }
        Ok(Link::new(a, b))
    }
}

impl Serialize for Link {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.0 .0, self.1 .0].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Link {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [a, b] = <[u8; 2]>::deserialize(d)?;
        Ok(Link::new(NodeId(a), NodeId(b)))
    }
}

/// Symmetric, irreflexive connectivity over nodes `1..=n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Topology {
    n: u8,
    links: u16,
}

impl Topology {
    /// Validating constructor: `3 <= n <= 5`, links between distinct nodes of
    /// the network, A, B and C mutually reachable.
    pub fn new(n: u8, links: impl IntoIterator<Item = Link>) -> Result<Topology, NetError> {
        let t = Topology::unchecked(n, links)?;
        if !t.abc_connected() {
            return Err(NetError::Disconnected);
        }
        Ok(t)
    }

    /// Like [`Topology::new`] without the connectivity requirement.
    pub fn unchecked(n: u8, links: impl IntoIterator<Item = Link>) -> Result<Topology, NetError> {
        if !(3..=MAX_NODES as u8).contains(&n) {
            return Err(NetError::NodeCount(n));
        }
        let mut mask = 0u16;
        for l in links {
            let (a, b) = l.ends();
            if a.is_none() || a == b || b.0 > n {
                return Err(NetError::BadLink(l));
            }
            mask |= 1 << l.slot();
        }
        Ok(Topology { n, links: mask })
    }

    pub(crate) fn from_mask(n: u8, links: u16) -> Topology {
        Topology { n, links }
    }

    pub fn n(&self) -> u8 {
        self.n
    }

    pub fn mask(&self) -> u16 {
        self.links
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        NodeId::all(self.n)
    }

    pub fn has_link(&self, l: Link) -> bool {
        self.links & (1 << l.slot()) != 0
    }

    pub fn is_connected(&self, a: NodeId, b: NodeId) -> bool {
        a != b && !a.is_none() && !b.is_none() && self.has_link(Link::new(a, b))
    }

    pub fn links(&self) -> impl Iterator<Item = Link> + '_ {
        (0..LINK_SLOTS).filter(|s| self.links & (1 << s) != 0).map(Link::from_slot)
    }

    /// Links between nodes of this network that are absent.
    pub fn non_links(&self) -> impl Iterator<Item = Link> + '_ {
        (0..LINK_SLOTS).map(Link::from_slot).filter(|l| l.1 .0 <= self.n && !self.has_link(*l))
    }

    pub fn link_count(&self) -> usize {
        self.links.count_ones() as usize
    }

    pub fn neighbours(&self, a: NodeId) -> NodeSet {
        self.nodes().filter(|&b| self.is_connected(a, b)).collect()
    }

    pub fn with_link(&self, l: Link) -> Topology {
        Topology { n: self.n, links: self.links | (1 << l.slot()) }
    }

    pub fn without_link(&self, l: Link) -> Topology {
        Topology { n: self.n, links: self.links & !(1 << l.slot()) }
    }

    /// Nodes reachable from `from`, including itself.
    pub fn component(&self, from: NodeId) -> NodeSet {
        let mut seen = NodeSet::EMPTY;
        let mut stack = vec![from];
        seen.insert(from);
        while let Some(a) = stack.pop() {
            for b in self.neighbours(a).iter() {
                if !seen.contains(b) {
                    seen.insert(b);
                    stack.push(b);
                }
            }
        }
        seen
    }

    /// The same links on `n` node slots; extra nodes are isolated.
    pub fn widen(&self, n: u8) -> Topology {
        debug_assert!(n >= self.n && n as usize <= MAX_NODES);
        Topology { n, links: self.links }
    }

    /// A, B and C are connected and every node with a link is connected to
    /// them. Nodes without links stand for absent relays.
    pub fn in_static_class(&self) -> bool {
        let c = self.component(NodeId::A);
        c.contains(NodeId::B)
            && c.contains(NodeId::C)
            && self.nodes().all(|x| c.contains(x) || self.neighbours(x).is_empty())
    }

    pub fn abc_connected(&self) -> bool {
        let c = self.component(NodeId::A);
        c.contains(NodeId::B) && c.contains(NodeId::C)
    }

    /// Every node of the network is reachable from every other.
    pub fn fully_connected(&self) -> bool {
        self.component(NodeId::A).len() == self.n as usize
    }

    /// All-pairs hop distances by breadth-first search.
    pub fn distance_matrix(&self) -> Distances {
        let mut d = Distances::unreachable(self.n);
        for src in self.nodes() {
            d.set(src, src, 0);
            let mut frontier = vec![src];
            let mut level = 0;
            while !frontier.is_empty() {
                level += 1;
                let mut next = Vec::new();
                for a in frontier {
                    for b in self.neighbours(a).iter() {
                        if d.get(src, b).is_none() {
                            d.set(src, b, level);
                            next.push(b);
                        }
                    }
                }
                frontier = next;
            }
        }
        d
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} [", self.n)?;
        for (i, l) in self.links().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        f.write_str("]")
    }
}

/// Hop distances between node pairs; `None` marks an unreachable pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Distances {
    n: u8,
    d: [[Option<u8>; SLOTS]; SLOTS],
}

impl Distances {
    fn unreachable(n: u8) -> Self {
        Distances { n, d: [[None; SLOTS]; SLOTS] }
    }

    pub fn get(&self, a: NodeId, b: NodeId) -> Option<u8> {
        self.d[a.index()][b.index()]
    }

    fn set(&mut self, a: NodeId, b: NodeId, v: u8) {
        self.d[a.index()][b.index()] = Some(v);
    }

    /// Pointwise maximum; unreachable dominates.
    pub fn max(&self, other: &Distances) -> Distances {
        let mut out = Distances::unreachable(self.n.max(other.n));
        for a in NodeId::all(out.n) {
            for b in NodeId::all(out.n) {
                out.d[a.index()][b.index()] = match (self.get(a, b), other.get(a, b)) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    _ => None,
                };
            }
        }
        out
    }
}

/// Longest acceptable route length per node pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceBound(Distances);

impl DistanceBound {
    pub fn get(&self, oip: NodeId, dip: NodeId) -> u8 {
        self.0.get(oip, dip).unwrap_or(u8::MAX)
    }
}

/// The shortest-path bound; with a topology change, the larger of the
/// distances before and after it.
pub fn property_bound(pre: &Topology, post: Option<&Topology>) -> DistanceBound {
    let d = pre.distance_matrix();
    DistanceBound(match post {
        Some(p) => d.max(&p.distance_matrix()),
        None => d,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeKind {
    Add,
    Remove,
}

/// A single link appearing or disappearing during a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkChange {
    pub kind: ChangeKind,
    #[serde(rename = "edge")]
    pub link: Link,
}

impl LinkChange {
    pub fn add(link: Link) -> Self {
        LinkChange { kind: ChangeKind::Add, link }
    }

    pub fn remove(link: Link) -> Self {
        LinkChange { kind: ChangeKind::Remove, link }
    }

    /// Check that the change can be applied to `t` and that A, B and C stay
    /// connected afterwards.
    pub fn validate(&self, t: &Topology) -> Result<(), NetError> {
        let (a, b) = self.link.ends();
        if a.is_none() || a == b || b.0 > t.n() {
            return Err(NetError::BadLink(self.link));
        }
        match self.kind {
            ChangeKind::Add if t.has_link(self.link) => Err(NetError::LinkPresent(self.link)),
            ChangeKind::Remove if !t.has_link(self.link) => Err(NetError::LinkAbsent(self.link)),
            ChangeKind::Remove if !t.without_link(self.link).abc_connected() => {
                Err(NetError::RemovalDisconnects(self.link))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for LinkChange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.kind {
            ChangeKind::Add => '+',
            ChangeKind::Remove => '-',
        };
        write!(f, "{sign}{}", self.link)
    }
}

impl std::str::FromStr for LinkChange {
    type Err = String;

    /// `+A-B` adds the link, `-A-B` removes it.
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        match s.split_at_checked(1) {
            Some(("+", l)) => Ok(LinkChange::add(l.parse()?)),
            Some(("-", l)) => Ok(LinkChange::remove(l.parse()?)),
            _ => Err(format!("bad change {s:?}, expected +A-B or -A-B")),
        }
    }
}

/// Topology after the change. The change must have been validated.
pub fn apply_change(t: &Topology, c: &LinkChange) -> Topology {
    match c.kind {
        ChangeKind::Add => t.with_link(c.link),
        ChangeKind::Remove => t.without_link(c.link),
    }
}

/// One of the four ways of injecting two data packets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Scenario(u8);

impl Scenario {
    pub fn new(id: u8) -> Result<Scenario, NetError> {
        if (1..=4).contains(&id) {
            Ok(Scenario(id))
        } else {
            Err(NetError::Scenario(id))
        }
    }

    pub fn all() -> impl Iterator<Item = Scenario> {
        (1..=4).map(Scenario)
    }

    pub fn id(self) -> u8 {
        self.0
    }

    /// `(originator, destination)` of the first and second packet.
    pub fn injections(self) -> [(NodeId, NodeId); 2] {
        use NodeId as N;
        match self.0 {
            1 => [(N::A, N::B), (N::A, N::C)],
            2 => [(N::B, N::A), (N::C, N::A)],
            3 => [(N::A, N::B), (N::B, N::C)],
            _ => [(N::B, N::C), (N::A, N::B)],
        }
    }
}

impl TryFrom<u8> for Scenario {
    type Error = NetError;
    fn try_from(id: u8) -> Result<Self, NetError> {
        Scenario::new(id)
    }
}

impl From<Scenario> for u8 {
    fn from(s: Scenario) -> u8 {
        s.0
    }
}

/// A topology, an optional change, and a scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Instance {
    pub topology: Topology,
    pub change: Option<LinkChange>,
    pub scenario: Scenario,
}

impl Instance {
    pub fn new(topology: Topology, change: Option<LinkChange>, scenario: Scenario) -> Result<Instance, NetError> {
        if !topology.abc_connected() {
            return Err(NetError::Disconnected);
        }
        if let Some(c) = &change {
            c.validate(&topology)?;
        }
        Ok(Instance { topology, change, scenario })
    }

    pub fn post_change(&self) -> Option<Topology> {
        self.change.map(|c| apply_change(&self.topology, &c))
    }

    pub fn bound(&self) -> DistanceBound {
        property_bound(&self.topology, self.post_change().as_ref())
    }
}
