mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use aodvmc::explore::{GlobalState, Model, Tester};
use aodvmc::message::RerrDests;
use aodvmc::node::DEFAULT_BUFFER_CAPACITY;
use aodvmc::routing::RoutingTable;
use aodvmc::{Instance, Message, NodeId, NodeState, Protocol, Variant};

use common::*;

fn node() -> impl Strategy<Value = u8> {
    1u8..=5
}

fn other() -> impl Strategy<Value = u8> {
    prop_oneof![Just(1u8), 3u8..=5]
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (other(), 0u8..8, 1u8..5, other()).prop_map(|(dip, dsn, hops, nhop)| Op::Update { dip, dsn, hops, nhop }),
        (0u8..4, 1u8..4, node(), 0u8..8, other(), 1u8..8, other())
            .prop_map(|(hops, rreqid, dip, dsn, oip, osn, sip)| Op::Rreq { hops, rreqid, dip, dsn, oip, osn, sip }),
        (0u8..4, other(), 1u8..8, node(), other()).prop_map(|(hops, dip, dsn, oip, sip)| Op::Rrep {
            hops,
            dip,
            dsn,
            oip,
            sip
        }),
        (other(), 1u8..9, other()).prop_map(|(dest, sqn, sip)| Op::Rerr { dest, sqn, sip }),
        other().prop_map(|dip| Op::NewPkt { dip }),
        other().prop_map(|dip| Op::Send { dip }),
        other().prop_map(|nhop| Op::Fail { nhop }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 10_000, ..ProptestConfig::default() })]

    #[test]
    fn routing_invariants_hold(ops in prop::collection::vec(op(), 1..40), v in 1u8..=4) {
        let proto = Protocol::new(Variant::from_id(v).unwrap());
        let mut n = NodeState::new(ME);
        for op in &ops {
            let before = n.clone();
            apply(&mut n, &proto, op);
            check_step(&before, &n).map_err(TestCaseError::fail)?;
        }
    }

    #[test]
    fn table_update_keeps_the_best_route(entries in prop::collection::vec((0u8..6, 1u8..6, 3u8..=5), 1..20)) {
        let mut t = RoutingTable::default();
        let dip = NodeId::A;
        let mut best: Option<(u8, u8)> = None;
        for &(dsn, hops, nhop) in &entries {
            t.update(dip, dsn, hops, NodeId(nhop));
            best = Some(match best {
                Some((bd, bh)) if (bd, std::cmp::Reverse(bh)) >= (dsn, std::cmp::Reverse(hops)) => (bd, bh),
                _ => (dsn, hops),
            });
        }
        let e = t.get(dip);
        prop_assert_eq!(Some((e.dsn, e.hops)), best);
        prop_assert!(e.valid);
    }
}

#[test]
fn buffers_are_fifo() {
    assert!(fifo_holds());
}

#[test]
fn seeded_routing_sequences() {
    assert!(routing_sequences(9, 2_000).unwrap() > 2_000);
}

fn mutate(gs: &mut GlobalState, rng: &mut StdRng) {
    let n = gs.nodes.len() as u8;
    let pick = |rng: &mut StdRng| NodeId(rng.gen_range(1..=n));
    let who = rng.gen_range(0..gs.nodes.len());
    match rng.gen_range(0..9) {
        0 => gs.tester = [Tester::Init, Tester::Sent1, Tester::Final][rng.gen_range(0..3)],
        1 => gs.changed = rng.gen(),
        2 => gs.first_arrived = rng.gen(),
        3 => gs.nodes[who].sn = rng.gen_range(1..6),
        4 => {
            let d = pick(rng);
            let (dsn, hops, nhop) = (rng.gen_range(0..5), rng.gen_range(1..4), pick(rng));
            gs.nodes[who].rt.update(d, dsn, hops, nhop);
        }
        5 => {
            let (o, r) = (pick(rng), rng.gen_range(1..4));
            if rng.gen() {
                gs.nodes[who].rreqs.insert(o, r);
            } else {
                gs.nodes[who].rreqs.remove(o, r);
            }
        }
        6 => gs.nodes[who].queues[pick(rng).index()] = rng.gen_range(0..3),
        7 => {
            let buf = &mut gs.nodes[who].msgbuf;
            if buf.len() < 4 && rng.gen() {
                let m = match rng.gen_range(0..3) {
                    0 => Message::rreq(
                        rng.gen_range(0..3),
                        rng.gen_range(1..3),
                        pick(rng),
                        rng.gen_range(0..3),
                        pick(rng),
                        rng.gen_range(1..4),
                        pick(rng),
                    ),
                    1 => Message::rrep(rng.gen_range(0..3), pick(rng), rng.gen_range(0..3), pick(rng), pick(rng)),
                    _ => {
                        let mut d = RerrDests::default();
                        d.insert(pick(rng), rng.gen_range(0..3));
                        Message::rerr(d, pick(rng))
                    }
                };
                buf.push(m);
            } else if !buf.is_empty() {
                buf.remove(0);
            }
        }
        _ => gs.nodes[who].rreq_counter = rng.gen_range(0..3),
    }
}

#[test]
fn state_keys_do_not_collide() {
    let mut rng = StdRng::seed_from_u64(42);
    let mut by_key: HashMap<Vec<u8>, GlobalState> = HashMap::new();
    for n in 3..=5u8 {
        let t = topo(n, &[(1, 2), (2, 3)]);
        let t = (4..=n).fold(t, |t, r| t.with_link(aodvmc::Link::new(NodeId::A, NodeId(r))));
        let m = Model::new(
            Instance::new(t, None, scenario(1)).unwrap(),
            Protocol::new(Variant::Basic),
            DEFAULT_BUFFER_CAPACITY,
            true,
        );
        let mut gs = m.initial_state();
        for _ in 0..34_000 {
            mutate(&mut gs, &mut rng);
            let key = gs.key();
            if let Some(prev) = by_key.get(&key) {
                assert_eq!(prev, &gs, "distinct states share a key");
            } else {
                by_key.insert(key, gs.clone());
            }
        }
    }
    assert!(by_key.len() > 50_000, "only {} distinct states", by_key.len());
}

#[test]
fn class_sizes_match_the_oracle() {
    use aodvmc::enumerate::{enumerate_change_pairs, enumerate_static_with};
    let o = oracle_counts();
    assert_eq!(o.static_by_n, [4, 38, 402]);
    assert_eq!(o.static_total, 444);
    for (k, n) in (3..=5u8).enumerate() {
        assert_eq!(enumerate_static_with(&[n]).len(), o.static_by_n[k]);
    }
    assert_eq!(enumerate_change_pairs().len(), o.pairs);
    assert_eq!(o.pairs, 1978);
}
