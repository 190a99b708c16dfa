#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};
use std::sync::OnceLock;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use aodvmc::enumerate::{class_members, ClassMember, InstanceClass};
use aodvmc::explore::{GlobalState, Model, Tester, Transition, Verdict};
use aodvmc::message::RerrDests;
use aodvmc::node::DEFAULT_BUFFER_CAPACITY;
use aodvmc::routing::RouteEntry;
use aodvmc::{Instance, Link, Message, NodeId, NodeState, Protocol, Scenario, Topology, Variant};

pub const A: NodeId = NodeId::A;
pub const B: NodeId = NodeId::B;
pub const C: NodeId = NodeId::C;

/// Node under test in routing operation sequences.
pub const ME: NodeId = NodeId::B;

pub fn topo(n: u8, links: &[(u8, u8)]) -> Topology {
    Topology::new(n, links.iter().map(|&(a, b)| Link::new(NodeId(a), NodeId(b)))).unwrap()
}

pub fn line_abc() -> Topology {
    topo(3, &[(1, 2), (2, 3)])
}

pub fn scenario(id: u8) -> Scenario {
    Scenario::new(id).unwrap()
}

pub fn members(class: InstanceClass) -> &'static [ClassMember] {
    static CELLS: [OnceLock<Vec<ClassMember>>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    CELLS[class as usize].get_or_init(|| class_members(class, &[3, 4, 5]))
}

/// Random instances drawn uniformly over class, member, scenario and variant.
pub fn sample_instances(seed: u64) -> impl Iterator<Item = (Variant, InstanceClass, Instance)> {
    let mut rng = StdRng::seed_from_u64(seed);
    std::iter::from_fn(move || {
        let class = *InstanceClass::ALL.choose(&mut rng).unwrap();
        let m = members(class).choose(&mut rng).unwrap();
        let s = scenario(rng.gen_range(1..=4));
        let v = *Variant::ALL.choose(&mut rng).unwrap();
        Some((v, class, Instance::new(m.topology, m.change, s).unwrap()))
    })
}

/// Hop distance by breadth-first search over `n` nodes.
pub fn bfs_distance(t: &Topology, from: NodeId, to: NodeId) -> Option<u8> {
    let mut dist = [None; 6];
    dist[from.index()] = Some(0u8);
    let mut q = VecDeque::from([from]);
    while let Some(u) = q.pop_front() {
        for v in 1..=t.n() {
            let v = NodeId(v);
            if dist[v.index()].is_none() && t.is_connected(u, v) {
                dist[v.index()] = Some(dist[u.index()].unwrap() + 1);
                q.push_back(v);
            }
        }
    }
    dist[to.index()]
}

pub struct ReferenceResult {
    /// Per property, per pair.
    pub verdicts: [[Verdict; 2]; 3],
    pub states: usize,
}

/// Unprioritized breadth-first reachability over whole states. Every
/// enabled step is explored; only the link change is urgent. `None` if the state space exceeds `cap` or a
/// buffer overflows.
pub fn reference_explore(instance: &Instance, variant: Variant, cap: usize) -> Option<ReferenceResult> {
    let model = Model::new(*instance, Protocol::new(variant), DEFAULT_BUFFER_CAPACITY, false);
    let post = instance.post_change();
    let pairs = instance.scenario.injections();
    let bound: Vec<u8> = pairs
        .iter()
        .map(|&(o, d)| {
            let pre = bfs_distance(&instance.topology, o, d);
            let after = post.as_ref().map_or(pre, |p| bfs_distance(p, o, d));
            match (pre, after) {
                (Some(x), Some(y)) => x.max(y),
                _ => u8::MAX,
            }
        })
        .collect();

    let mut bad = [[false; 2]; 3];
    let mut judge = |gs: &GlobalState| {
        let settled = gs.tester == Tester::Final && gs.nodes.iter().all(|n| n.msgbuf.is_empty());
        for (k, &(o, d)) in pairs.iter().enumerate() {
            let e = gs.nodes[o.index() - 1].rt.get(d);
            if settled && e.nhop.is_none() {
                bad[0][k] = true;
            }
            if settled && e.hops > bound[k] {
                bad[1][k] = true;
            }
            if e.hops > bound[k] {
                bad[2][k] = true;
            }
        }
    };

    let init = model.initial_state();
    let mut seen: HashSet<GlobalState> = HashSet::from([init.clone()]);
    let mut queue = VecDeque::from([init.clone()]);
    judge(&init);
    while let Some(gs) = queue.pop_front() {
        let mut steps = Vec::new();
        if instance.change.is_some() && !gs.changed && gs.first_arrived {
            // the link change preempts everything once a request reached its destination
            steps.push(Transition::Change);
        } else {
            for n in &gs.nodes {
                if !n.msgbuf.is_empty() {
                    steps.push(Transition::Process { node: n.ip });
                }
                for d in n.sendable() {
                    steps.push(Transition::Send { node: n.ip, dip: d });
                }
            }
            let next_origin = match gs.tester {
                Tester::Init => Some(pairs[0].0),
                Tester::Sent1 => Some(pairs[1].0),
                Tester::Final => None,
            };
            if next_origin.is_some_and(|o| gs.nodes[o.index() - 1].msgbuf.is_empty()) {
                steps.push(Transition::Inject);
            }
        }
        for t in steps {
            let (next, _) = model.fire(&gs, t).ok()?.expect("reference step enabled");
            if seen.insert(next.clone()) {
                if seen.len() > cap {
                    return None;
                }
                judge(&next);
                queue.push_back(next);
            }
        }
    }
    let verdicts = bad.map(|row| row.map(|b| if b { Verdict::Violated } else { Verdict::Holds }));
    Some(ReferenceResult { verdicts, states: seen.len() })
}

pub struct Agreement {
    pub checked: usize,
    pub skipped: usize,
    pub mismatches: Vec<String>,
}

/// Compare prioritized verdicts with the reference interpreter on `want`
/// sampled instances whose unprioritized state space has at most `cap` states.
pub fn prioritization_agreement(seed: u64, want: usize, cap: usize) -> Agreement {
    let mut out = Agreement { checked: 0, skipped: 0, mismatches: Vec::new() };
    for (v, class, inst) in sample_instances(seed) {
        if out.checked == want {
            break;
        }
        let Some(reference) = reference_explore(&inst, v, cap) else {
            out.skipped += 1;
            continue;
        };
        out.checked += 1;
        let ex = aodvmc::explore::explore(&inst, &aodvmc::explore::ExploreConfig::new(v));
        if ex.verdicts.by_pair != reference.verdicts {
            out.mismatches.push(format!(
                "{v} {class} {} {:?}: prioritized {:?}, reference {:?}",
                inst.topology, inst.change, ex.verdicts.by_pair, reference.verdicts
            ));
        }
    }
    out
}

/// Explore `count` sampled instances four times, each run on a pool of a
/// different size and with a different expansion order. Returns the
/// instances whose verdicts or state counts differ between runs.
pub fn determinism_mismatches(seed: u64, count: usize, state_limit: usize) -> Vec<String> {
    use rayon::prelude::*;
    let sample: Vec<(Variant, InstanceClass, Instance)> = sample_instances(seed).take(count).collect();
    let runs: Vec<Vec<_>> = (0..4u64)
        .map(|r| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(r as usize + 1).build().unwrap();
            pool.install(|| {
                sample
                    .par_iter()
                    .map(|(v, _, inst)| {
                        let mut cfg = aodvmc::explore::ExploreConfig::new(*v);
                        cfg.state_limit = state_limit;
                        cfg.shuffle_seed = (r > 0).then_some(r);
                        let ex = aodvmc::explore::explore(inst, &cfg);
                        (ex.verdicts, ex.states, ex.completion)
                    })
                    .collect()
            })
        })
        .collect();
    (0..count)
        .filter(|&i| runs.iter().any(|run| run[i] != runs[0][i]))
        .map(|i| format!("{:?}: {:?}", sample[i], runs.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .collect()
}

/// Routing and sequence-number operations on node [`ME`]. Node ids other
/// than `ME` are 1, 3, 4, 5.
#[derive(Clone, Debug)]
pub enum Op {
    Update { dip: u8, dsn: u8, hops: u8, nhop: u8 },
    Rreq { hops: u8, rreqid: u8, dip: u8, dsn: u8, oip: u8, osn: u8, sip: u8 },
    Rrep { hops: u8, dip: u8, dsn: u8, oip: u8, sip: u8 },
    Rerr { dest: u8, sqn: u8, sip: u8 },
    NewPkt { dip: u8 },
    Send { dip: u8 },
    Fail { nhop: u8 },
}

pub fn apply(n: &mut NodeState, proto: &Protocol, op: &Op) {
    let id = NodeId;
    match *op {
        Op::Update { dip, dsn, hops, nhop } => {
            n.rt.update(id(dip), dsn, hops, id(nhop));
        }
        Op::Rreq { hops, rreqid, dip, dsn, oip, osn, sip } => {
            n.process_rreq(&Message::rreq(hops, rreqid, id(dip), dsn, id(oip), osn, id(sip)), proto);
        }
        Op::Rrep { hops, dip, dsn, oip, sip } => {
            n.process_rrep(&Message::rrep(hops, id(dip), dsn, id(oip), id(sip)), proto);
        }
        Op::Rerr { dest, sqn, sip } => {
            let mut d = RerrDests::default();
            d.insert(id(dest), sqn);
            n.process_rerr(&Message::rerr(d, id(sip)));
        }
        Op::NewPkt { dip } => {
            if n.rreq_counter < 10 {
                n.handle_newpkt(id(dip));
            }
        }
        Op::Send { dip } => {
            n.dequeue_send(id(dip));
        }
        Op::Fail { nhop } => {
            n.on_unicast_failure(&Message::pkt(NodeId::C, ME, ME), id(nhop), proto);
        }
    }
}

pub fn check_step(before: &NodeState, after: &NodeState) -> Result<(), String> {
    if after.sn < before.sn {
        return Err("sn decreased".into());
    }
    if !after.rt.get(after.ip).is_null() {
        return Err("route to itself".into());
    }
    for d in NodeId::all(5) {
        let (b, a): (&RouteEntry, &RouteEntry) = (before.rt.get(d), after.rt.get(d));
        if a.dsn < b.dsn {
            return Err(format!("dsn for {d} decreased: {b:?} -> {a:?}"));
        }
        if a.is_null() {
            if *a != RouteEntry::NULL {
                return Err(format!("null entry for {d} carries data: {a:?}"));
            }
            if !b.is_null() {
                return Err(format!("route to {d} became null"));
            }
        } else if a.hops == 0 || a.nhop == after.ip {
            return Err(format!("bad route to {d}: {a:?}"));
        }
    }
    Ok(())
}

fn other_node(rng: &mut StdRng) -> u8 {
    *[1u8, 3, 4, 5].choose(rng).unwrap()
}

pub fn random_op(rng: &mut StdRng) -> Op {
    let o = other_node;
    match rng.gen_range(0..7) {
        0 => Op::Update { dip: o(rng), dsn: rng.gen_range(0..8), hops: rng.gen_range(1..5), nhop: o(rng) },
        1 => Op::Rreq {
            hops: rng.gen_range(0..4),
            rreqid: rng.gen_range(1..4),
            dip: rng.gen_range(1..=5),
            dsn: rng.gen_range(0..8),
            oip: o(rng),
            osn: rng.gen_range(1..8),
            sip: o(rng),
        },
        2 => Op::Rrep {
            hops: rng.gen_range(0..4),
            dip: o(rng),
            dsn: rng.gen_range(1..8),
            oip: rng.gen_range(1..=5),
            sip: o(rng),
        },
        3 => Op::Rerr { dest: o(rng), sqn: rng.gen_range(1..9), sip: o(rng) },
        4 => Op::NewPkt { dip: o(rng) },
        5 => Op::Send { dip: o(rng) },
        _ => Op::Fail { nhop: o(rng) },
    }
}

/// Run `count` random operation sequences against the routing invariants.
pub fn routing_sequences(seed: u64, count: usize) -> Result<usize, String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut steps = 0;
    for i in 0..count {
        let proto = Protocol::new(*Variant::ALL.choose(&mut rng).unwrap());
        let mut n = NodeState::new(ME);
        for _ in 0..rng.gen_range(1..40) {
            let op = random_op(&mut rng);
            let before = n.clone();
            apply(&mut n, &proto, &op);
            check_step(&before, &n).map_err(|e| format!("sequence {i}, {op:?}: {e}"))?;
            steps += 1;
        }
    }
    Ok(steps)
}

/// Messages leave a node's buffer in the order they entered it, and a full
/// buffer refuses more.
pub fn fifo_holds() -> bool {
    let mut n = NodeState::new(ME);
    let msgs: Vec<Message> = (1..=5).map(|i| Message::rrep(i, A, i, C, A)).collect();
    for m in &msgs {
        n.enqueue_message(*m, DEFAULT_BUFFER_CAPACITY).unwrap();
    }
    let proto = Protocol::new(Variant::Basic);
    let taken: Vec<Message> = std::iter::from_fn(|| n.process_head(&proto).map(|(m, _)| m)).collect();
    let mut full = NodeState::new(ME);
    for _ in 0..DEFAULT_BUFFER_CAPACITY {
        full.enqueue_message(msgs[0], DEFAULT_BUFFER_CAPACITY).unwrap();
    }
    taken == msgs && n.msgbuf.is_empty() && full.enqueue_message(msgs[1], DEFAULT_BUFFER_CAPACITY).is_err()
}

/// Class sizes computed on raw edge bitmasks over five slots, independent
/// of the library's topology type.
pub struct OracleCounts {
    pub static_by_n: [usize; 3],
    pub static_total: usize,
    pub pairs: usize,
}

pub fn oracle_counts() -> OracleCounts {
    let edges: Vec<(usize, usize)> = (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).collect();
    let adjacent = |mask: u32, a: usize, b: usize| {
        edges.iter().enumerate().any(|(k, &(i, j))| mask >> k & 1 == 1 && ((i, j) == (a, b) || (i, j) == (b, a)))
    };
    let swap = |mask: u32| {
        let s = |x: usize| [0, 1, 2, 4, 3][x];
        edges.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).fold(0u32, |m, (_, &(i, j))| {
            let (a, b) = (s(i).min(s(j)), s(i).max(s(j)));
            m | 1 << edges.iter().position(|&e| e == (a, b)).unwrap()
        })
    };
    let valid = |mask: u32| -> Option<usize> {
        let mut reach = [false; 5];
        reach[0] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for a in 0..5 {
                for b in 0..5 {
                    if reach[a] && !reach[b] && adjacent(mask, a, b) {
                        reach[b] = true;
                        changed = true;
                    }
                }
            }
        }
        let used = |x: usize| (0..5).any(|y| adjacent(mask, x, y));
        let ok = reach[1] && reach[2] && (3..5).all(|r| !used(r) || reach[r]);
        ok.then(|| (3..5).filter(|&r| used(r)).count())
    };
    let mut reps = std::collections::BTreeMap::new();
    for mask in 0..1u32 << edges.len() {
        if let Some(relays) = valid(mask) {
            reps.insert(mask.min(swap(mask)), relays);
        }
    }
    let mut static_by_n = [0; 3];
    for &relays in reps.values() {
        static_by_n[relays] += 1;
    }
    let pairs = reps
        .keys()
        .map(|&m| (0..edges.len()).filter(|&k| m >> k & 1 == 0 && valid(m | 1 << k).is_some()).count())
        .sum();
    OracleCounts { static_by_n, static_total: reps.len(), pairs }
}
