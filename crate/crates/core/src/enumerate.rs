//! Enumeration of the static and single-change topology classes, up to
//! relabelling of the relay nodes.
//!
//! Nodes A, B and C play fixed roles in the scenarios, so only the relays
//! (4 and 5) may be permuted. A static topology is kept only if every node
//! is connected to A, B and C; a relay hanging off on its own would
//! duplicate a smaller network.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::message::{MAX_NODES, SLOTS};
use crate::net::{ChangeKind, Link, LinkChange, NetError, Topology, LINK_SLOTS};

/// Which of the three experiment classes an instance belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceClass {
    Static,
    Add,
    Remove,
}

impl InstanceClass {
    pub const ALL: [InstanceClass; 3] = [InstanceClass::Static, InstanceClass::Add, InstanceClass::Remove];

    pub fn name(self) -> &'static str {
        match self {
            InstanceClass::Static => "static",
            InstanceClass::Add => "add",
            InstanceClass::Remove => "remove",
        }
    }
}

impl fmt::Display for InstanceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InstanceClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "static" => Ok(InstanceClass::Static),
            "add" | "add-link" => Ok(InstanceClass::Add),
            "remove" | "remove-link" => Ok(InstanceClass::Remove),
            _ => Err(format!("unknown class {s:?} (static, add, remove)")),
        }
    }
}

const RELAY_SWAP: [u8; SLOTS] = [0, 1, 2, 3, 5, 4];

/// Ordering key of a topology: node count, then the lexicographically
/// smallest adjacency bit string over relabellings of the relays.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalKey {
    pub n: u8,
    pub code: u16,
}

/// Adjacency bit string with link 1-2 as the most significant bit.
fn adjacency_code(t: &Topology) -> u16 {
    t.links().map(|l| 1u16 << (LINK_SLOTS - 1 - l.slot())).fold(0, |a, b| a | b)
}

fn relabel(t: &Topology, perm: &[u8; SLOTS]) -> Topology {
    let mask = t.links().map(|l| 1u16 << l.map(perm).slot()).fold(0, |a, b| a | b);
    Topology::from_mask(t.n(), mask)
}

/// Representative and key of `t` up to swapping the relays.
pub fn canonical_form(t: &Topology) -> (Topology, CanonicalKey) {
    let key = |r: Topology| (r, CanonicalKey { n: r.n(), code: adjacency_code(&r) });
    let plain = key(*t);
    if t.n() < MAX_NODES as u8 {
        return plain;
    }
    let swapped = key(relabel(t, &RELAY_SWAP));
    if swapped.1 < plain.1 {
        swapped
    } else {
        plain
    }
}

pub fn canonical_key(t: &Topology) -> CanonicalKey {
    canonical_form(t).1
}

fn node_counts(nodes: &[u8]) -> impl Iterator<Item = u8> + '_ {
    nodes.iter().copied().filter(|n| (3..=MAX_NODES as u8).contains(n))
}

/// Static class restricted to the given node counts, sorted by canonical key.
pub fn enumerate_static_with(nodes: &[u8]) -> Vec<Topology> {
    let mut seen = BTreeSet::new();
    for n in node_counts(nodes) {
        let usable: Vec<Link> = (0..LINK_SLOTS).map(Link::from_slot).filter(|l| l.ends().1 .0 <= n).collect();
        for subset in 0u32..1 << usable.len() {
            let links = usable.iter().enumerate().filter(|(i, _)| subset & (1 << i) != 0).map(|(_, l)| *l);
            let t = Topology::unchecked(n, links).expect("links within range");
            if t.fully_connected() {
                let (rep, key) = canonical_form(&t);
                seen.insert((key, rep));
            }
        }
    }
    seen.into_iter().map(|(_, t)| t).collect()
}

/// All static topologies with 3 to 5 nodes, sorted by canonical key.
pub fn enumerate_static() -> Vec<Topology> {
    enumerate_static_with(&[3, 4, 5])
}

/// A topology plus a link absent from it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkPair {
    pub smaller: Topology,
    pub link: Link,
}

impl LinkPair {
    pub fn larger(&self) -> Topology {
        self.smaller.with_link(self.link)
    }

    /// The pair traversed in the requested direction: `(initial topology, change)`.
    pub fn as_change(&self, kind: ChangeKind) -> (Topology, LinkChange) {
        match kind {
            ChangeKind::Add => (self.smaller, LinkChange::add(self.link)),
            ChangeKind::Remove => (self.larger(), LinkChange::remove(self.link)),
        }
    }
}

/// Link-change pairs: every static representative together with every
/// link whose addition keeps the result in the static class.
///
/// The representatives are read on all five node slots, so a relay missing
/// from a smaller network is an isolated node and a link attaching it to the
/// network counts as an addition. Pairs are not reduced further. Both change
/// classes use this list; removal traverses each pair from the larger
/// topology back to the smaller one.
pub fn enumerate_change_pairs_with(nodes: &[u8]) -> Vec<LinkPair> {
    let mut out = Vec::new();
    for t in enumerate_static_with(nodes) {
        for link in (0..LINK_SLOTS).map(Link::from_slot) {
            if t.has_link(link) {
                continue;
            }
            let wide = t.widen(t.n().max(link.ends().1 .0));
            if wide.with_link(link).in_static_class() {
                out.push(LinkPair { smaller: wide, link });
            }
        }
    }
    out
}

pub fn enumerate_change_pairs() -> Vec<LinkPair> {
    enumerate_change_pairs_with(&[3, 4, 5])
}

/// One numbered member of an instance class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassMember {
    pub id: u32,
    pub topology: Topology,
    pub change: Option<LinkChange>,
}

/// Members of `class` restricted to the given node counts, numbered from 0
/// in canonical order.
pub fn class_members(class: InstanceClass, nodes: &[u8]) -> Vec<ClassMember> {
    let numbered = |v: Vec<(Topology, Option<LinkChange>)>| {
        v.into_iter()
            .enumerate()
            .map(|(i, (topology, change))| ClassMember { id: i as u32, topology, change })
            .collect()
    };
    match class {
        InstanceClass::Static => numbered(enumerate_static_with(nodes).into_iter().map(|t| (t, None)).collect()),
        InstanceClass::Add | InstanceClass::Remove => {
            let kind = if class == InstanceClass::Add { ChangeKind::Add } else { ChangeKind::Remove };
            numbered(
                enumerate_change_pairs_with(nodes)
                    .into_iter()
                    .map(|p| {
                        let (t, c) = p.as_change(kind);
                        (t, Some(c))
                    })
                    .collect(),
            )
        }
    }
}

/// Line of a topology file.
///
/// ```text
/// {"id":7,"n":4,"edges":[[1,2],[1,4],[2,3]],"change":{"kind":"add","edge":[3,4]}}
/// ```
///
/// `change` is omitted for static topologies. Edges are listed in ascending
/// order with the smaller endpoint first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyRecord {
    pub id: u32,
    pub n: u8,
    pub edges: Vec<Link>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub change: Option<LinkChange>,
}

#[derive(Debug, Error)]
pub enum TopologyFileError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("line {line}: {source}")]
    Invalid { line: usize, source: NetError },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<&ClassMember> for TopologyRecord {
    fn from(m: &ClassMember) -> Self {
        TopologyRecord { id: m.id, n: m.topology.n(), edges: m.topology.links().collect(), change: m.change }
    }
}

impl TopologyRecord {
    pub fn to_member(&self) -> Result<ClassMember, NetError> {
        let topology = Topology::new(self.n, self.edges.iter().copied())?;
        if let Some(c) = &self.change {
            c.validate(&topology)?;
        }
        Ok(ClassMember { id: self.id, topology, change: self.change })
    }
}

pub fn write_topologies<W: Write>(mut w: W, members: &[ClassMember]) -> io::Result<()> {
    for m in members {
        let line = serde_json::to_string(&TopologyRecord::from(m)).map_err(io::Error::other)?;
        writeln!(w, "{line}")?;
    }
    w.flush()
}

pub fn read_topologies<R: BufRead>(r: R) -> Result<Vec<ClassMember>, TopologyFileError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TopologyRecord =
            serde_json::from_str(&line).map_err(|source| TopologyFileError::Parse { line: i + 1, source })?;
        out.push(rec.to_member().map_err(|source| TopologyFileError::Invalid { line: i + 1, source })?);
    }
    Ok(out)
}

/// The same network with relays 4 and 5 exchanged.
pub fn swap_relays(t: &Topology) -> Topology {
    relabel(t, &RELAY_SWAP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message::NodeId;

    fn topo(n: u8, links: &[(u8, u8)]) -> Topology {
        Topology::new(n, links.iter().map(|&(a, b)| Link::new(NodeId(a), NodeId(b)))).unwrap()
    }

    /// Connected labelled graphs on `n` nodes, by brute force over edge subsets
    /// with an independent union-find connectivity test.
    fn brute_connected(n: usize) -> usize {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        (0u32..1 << pairs.len())
            .filter(|mask| {
                let mut parent: Vec<usize> = (0..n).collect();
                fn find(p: &mut Vec<usize>, x: usize) -> usize {
                    if p[x] != x {
                        let r = find(p, p[x]);
                        p[x] = r;
                    }
                    p[x]
                }
                for (k, &(i, j)) in pairs.iter().enumerate() {
                    if mask & (1 << k) != 0 {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        parent[a] = b;
                    }
                }
                let r = find(&mut parent, 0);
                (0..n).all(|x| find(&mut parent, x) == r)
            })
            .count()
    }

    #[test]
    fn small_counts_match_brute_force() {
        assert_eq!(brute_connected(3), 4);
        assert_eq!(brute_connected(4), 38);
        assert_eq!(enumerate_static_with(&[3]).len(), brute_connected(3));
        assert_eq!(enumerate_static_with(&[4]).len(), brute_connected(4));
    }

    #[test]
    fn relay_swap_gives_equal_keys() {
        let t = topo(5, &[(1, 4), (4, 2), (2, 5), (5, 3)]);
        let u = topo(5, &[(1, 5), (5, 2), (2, 4), (4, 3)]);
        assert_eq!(canonical_key(&t), canonical_key(&u));
        assert_eq!(canonical_key(&t), canonical_key(&swap_relays(&t)));
        // A and B are not interchangeable
        let v = topo(3, &[(1, 3), (2, 3)]);
        let w = topo(3, &[(2, 3), (1, 2)]);
        assert_ne!(canonical_key(&v), canonical_key(&w));
    }

    #[test]
    fn three_node_pairs() {
        let pairs = enumerate_change_pairs_with(&[3]);
        // three missing triangle sides, plus a relay (4 or 5) attached to
        // any of A, B, C in each of the four three-node networks
        assert_eq!(pairs.len(), 3 + 4 * 6);
        let line = topo(3, &[(1, 2), (2, 3)]);
        let ac = Link::new(NodeId::A, NodeId::C);
        assert!(pairs.contains(&LinkPair { smaller: line, link: ac }));
    }

    #[test]
    fn change_pairs_close_over_static_class() {
        let keys: BTreeSet<_> = enumerate_static().iter().map(canonical_key).collect();
        let squeeze = |t: Topology| {
            // drop isolated relays so the key is comparable to the static class
            let mut links: Vec<Link> = t.links().collect();
            let mut n = t.n();
            if n == 5 && t.neighbours(NodeId(5)).is_empty() {
                n = 4;
            }
            if t.neighbours(NodeId(4)).is_empty() && n >= 4 {
                links = links.into_iter().map(|l| l.map(&RELAY_SWAP)).collect();
                n -= 1;
            }
            canonical_key(&Topology::unchecked(n, links).unwrap())
        };
        for p in enumerate_change_pairs_with(&[3, 4]) {
            assert!(keys.contains(&squeeze(p.smaller)), "{}", p.smaller);
            assert!(keys.contains(&squeeze(p.larger())), "{}", p.larger());
            let (t, c) = p.as_change(ChangeKind::Remove);
            c.validate(&t).unwrap();
        }
    }

    #[test]
    fn topology_file_round_trip() {
        let members = class_members(InstanceClass::Add, &[3]);
        let mut buf = Vec::new();
        write_topologies(&mut buf, &members).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            r#"{"id":0,"n":3,"edges":[[1,3],[2,3]],"change":{"kind":"add","edge":[1,2]}}"#
        );
        assert_eq!(read_topologies(&buf[..]).unwrap(), members);
    }

    #[test]
    fn malformed_topology_lines_are_reported() {
        let bad = b"{\"id\":0,\"n\":3,\"edges\":[[1,2]]}\n";
        assert!(matches!(read_topologies(&bad[..]), Err(TopologyFileError::Invalid { line: 1, .. })));
        assert!(matches!(read_topologies(&b"{"[..]), Err(TopologyFileError::Parse { line: 1, .. })));
    }
}
