//! Routing table and the set of processed route requests.

use serde::Serialize;

use crate::message::{NodeId, Sqn, SLOTS};

/// One routing table entry. `nhop == 0` is the null entry ("no route").
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct RouteEntry {
    pub dsn: Sqn,
    pub valid: bool,
    pub hops: u8,
    pub nhop: NodeId,
}

impl RouteEntry {
    pub const NULL: RouteEntry = RouteEntry { dsn: 0, valid: false, hops: 0, nhop: NodeId::NONE };

    pub fn is_null(&self) -> bool {
        self.nhop.is_none()
    }

    /// A route that can be used for forwarding.
    pub fn is_usable(&self) -> bool {
        self.valid && !self.nhop.is_none()
    }
}

/// One entry per possible destination; slot 0 is never used.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct RoutingTable {
    entries: [RouteEntry; SLOTS],
}

impl RoutingTable {
    pub fn get(&self, dip: NodeId) -> &RouteEntry {
        &self.entries[dip.index()]
    }

    /// Usable route to `dip`, if any.
    pub fn route(&self, dip: NodeId) -> Option<&RouteEntry> {
        Some(self.get(dip)).filter(|e| e.is_usable())
    }

    /// Install `(dsn, hops, nhop)` for `dip` if it is preferable to the
    /// stored entry. Returns whether the entry was replaced.
    ///
    /// Replacement happens when there is no route, when `dsn` is fresher,
    /// or when `dsn` is equal and the route is shorter or the stored entry
    /// is invalid. The unknown sequence number 0 compares like any other
    /// number, so a route with unknown `dsn` never displaces one with a
    /// known sequence number.
    pub fn update(&mut self, dip: NodeId, dsn: Sqn, hops: u8, nhop: NodeId) -> bool {
        debug_assert!(!dip.is_none() && !nhop.is_none() && hops >= 1);
        let e = &mut self.entries[dip.index()];
        let replace = e.is_null() || dsn > e.dsn || (dsn == e.dsn && (hops < e.hops || !e.valid));
        if !replace {
            return false;
        }
        *e = RouteEntry { dsn, valid: true, hops, nhop };
        true
    }

    /// Install a route regardless of freshness, never lowering the stored
    /// sequence number.
    pub(crate) fn overwrite(&mut self, dip: NodeId, dsn: Sqn, hops: u8, nhop: NodeId) {
        let e = &mut self.entries[dip.index()];
        *e = RouteEntry { dsn: dsn.max(e.dsn), valid: true, hops, nhop };
    }

    /// Mark the route to `dip` invalid with sequence number `dsn`.
    pub(crate) fn invalidate(&mut self, dip: NodeId, dsn: Sqn) {
        let e = &mut self.entries[dip.index()];
        e.valid = false;
        e.dsn = dsn;
    }

    /// Non-null entries in ascending destination order.
    pub fn known(&self) -> impl Iterator<Item = (NodeId, &RouteEntry)> {
        self.entries.iter().enumerate().skip(1).filter(|(_, e)| !e.is_null()).map(|(i, e)| (NodeId(i as u8), e))
    }

    pub(crate) fn encode(&self, n: usize, out: &mut Vec<u8>) {
        for e in &self.entries[1..=n] {
            out.extend_from_slice(&[e.dsn, e.valid as u8, e.hops, e.nhop.0]);
        }
    }
}

/// Largest request id a node can issue. Each originator gets a fixed block
/// of bits in [`RreqSet`].
pub const MAX_RREQID: u8 = 12;

/// Set of `(oip, rreqid)` pairs a node has processed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct RreqSet(u64);

impl RreqSet {
    fn bit(oip: NodeId, rreqid: u8) -> u64 {
        assert!(
            (1..=MAX_RREQID).contains(&rreqid) && (1..SLOTS as u8).contains(&oip.0),
            "request ({oip}, {rreqid}) out of range"
        );
        1 << ((oip.0 as u64 - 1) * MAX_RREQID as u64 + (rreqid as u64 - 1))
    }

    pub fn contains(&self, oip: NodeId, rreqid: u8) -> bool {
        self.0 & Self::bit(oip, rreqid) != 0
    }

    pub fn insert(&mut self, oip: NodeId, rreqid: u8) {
        self.0 |= Self::bit(oip, rreqid);
    }

    pub fn remove(&mut self, oip: NodeId, rreqid: u8) {
        self.0 &= !Self::bit(oip, rreqid);
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, u8)> + '_ {
        (0..64u64)
            .filter(move |b| self.0 & (1 << b) != 0)
            .map(|b| (NodeId((b / MAX_RREQID as u64) as u8 + 1), (b % MAX_RREQID as u64) as u8 + 1))
    }

    pub(crate) fn bits(&self) -> u64 {
        self.0
    }
}
