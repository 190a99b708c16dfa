//! Breadth-first reachability with property monitoring.

use std::collections::VecDeque;
use std::fmt;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use super::state::{ChangeTiming, GlobalState, Model, Tester, Transition};
use super::trace::{replay, Trace};
use crate::message::NodeId;
use crate::net::{DistanceBound, Instance};
use crate::node::{Protocol, Variant, DEFAULT_BUFFER_CAPACITY};

pub const DEFAULT_STATE_LIMIT: usize = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExploreConfig {
    pub protocol: Protocol,
    /// Abort with an inconclusive verdict after this many distinct states.
    pub state_limit: usize,
    pub buffer_capacity: usize,
    /// Give internal steps priority over communication.
    pub prioritize: bool,
    /// Only judge end states in which the link change has happened.
    pub force_change: bool,
    pub change_timing: ChangeTiming,
    /// Randomize successor order; verdicts and counts must not change.
    pub shuffle_seed: Option<u64>,
}

impl ExploreConfig {
    pub fn new(variant: Variant) -> Self {
        ExploreConfig {
            protocol: Protocol::new(variant),
            state_limit: DEFAULT_STATE_LIMIT,
            buffer_capacity: DEFAULT_BUFFER_CAPACITY,
            prioritize: true,
            force_change: false,
            change_timing: ChangeTiming::Immediate,
            shuffle_seed: None,
        }
    }
}

/// The three route-discovery properties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Property {
    /// Once everything is processed, the originator has a route.
    P1,
    /// Once everything is processed, the route is not longer than the bound.
    P2,
    /// No route is ever longer than the bound.
    P3,
}

impl Property {
    pub const ALL: [Property; 3] = [Property::P1, Property::P2, Property::P3];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.index() + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Violated,
    /// The search stopped early and found no violation.
    Inconclusive,
}

impl Verdict {
    /// Conjunction: a violation wins, then inconclusive.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Violated, _) | (_, Violated) => Violated,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Holds,
        }
    }
}

/// Verdict per property and per originator/destination pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Verdicts {
    pub pairs: [(NodeId, NodeId); 2],
    pub by_pair: [[Verdict; 2]; 3],
}

impl Verdicts {
    pub fn get(&self, p: Property) -> Verdict {
        let [a, b] = self.by_pair[p.index()];
        a.and(b)
    }

    pub fn all_hold(&self) -> bool {
        Property::ALL.iter().all(|&p| self.get(p) == Verdict::Holds)
    }
}

/// How the search ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Completion {
    Complete,
    StateLimit,
    BufferOverflow { node: NodeId, capacity: usize },
}

/// Which properties fail in a state, per pair.
pub fn violations(model: &Model, bound: &DistanceBound, force_change: bool, gs: &GlobalState) -> [[bool; 2]; 3] {
    let settled = gs.tester == Tester::Final && gs.buffers_empty() && (!force_change || !model.dynamic() || gs.changed);
    let mut out = [[false; 2]; 3];
    for (k, (oip, dip)) in model.instance.scenario.injections().into_iter().enumerate() {
        let e = gs.node(oip).route(dip);
        let short = e.hops <= bound.get(oip, dip);
        out[0][k] = settled && e.nhop.is_none();
        out[1][k] = settled && !short;
        out[2][k] = !short;
    }
    out
}

/// Result of exploring one instance.
#[derive(Debug)]
pub struct Exploration {
    pub verdicts: Verdicts,
    pub states: usize,
    pub transitions: u64,
    pub completion: Completion,
    model: Model,
    witnesses: [[Option<u32>; 2]; 3],
    parents: Vec<(u32, Option<Transition>)>,
}

impl Exploration {
    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Shortest counterexample for `p` at pair index `pair`, if violated.
    pub fn trace(&self, p: Property, pair: usize) -> Option<Trace> {
        let mut at = self.witnesses[p.index()][pair]?;
        let mut path = Vec::new();
        while let (parent, Some(t)) = self.parents[at as usize] {
            path.push(t);
            at = parent;
        }
        path.reverse();
        Some(replay(&self.model, &path).expect("recorded paths replay"))
    }

    /// Shortest counterexample for `p` over both pairs.
    pub fn first_trace(&self, p: Property) -> Option<Trace> {
        (0..2).filter_map(|k| self.trace(p, k)).min_by_key(|t| t.steps.len())
    }
}

/// Explore every reachable state of `instance`.
pub fn explore(instance: &Instance, cfg: &ExploreConfig) -> Exploration {
    let model =
        Model::new(*instance, cfg.protocol, cfg.buffer_capacity, cfg.prioritize).with_change_timing(cfg.change_timing);
    let bound = instance.bound();
    let mut rng = cfg.shuffle_seed.map(StdRng::seed_from_u64);

    let mut seen: FxHashSet<Box<[u8]>> = FxHashSet::default();
    let mut parents: Vec<(u32, Option<Transition>)> = Vec::new();
    let mut witnesses = [[None; 2]; 3];
    let mut queue = VecDeque::new();
    let mut key = Vec::with_capacity(256);
    let mut succ = Vec::new();
    let mut transitions = 0u64;
    let mut completion = Completion::Complete;

    let record = |gs: &GlobalState, id: u32, witnesses: &mut [[Option<u32>; 2]; 3]| {
        let v = violations(&model, &bound, cfg.force_change, gs);
        for (p, row) in v.iter().enumerate() {
            for (k, &bad) in row.iter().enumerate() {
                if bad && witnesses[p][k].is_none() {
                    witnesses[p][k] = Some(id);
                }
            }
        }
    };

    let init = model.initial_state();
    init.state_key(&mut key);
    seen.insert(key.as_slice().into());
    parents.push((0, None));
    record(&init, 0, &mut witnesses);
    queue.push_back((0u32, init));

    'search: while let Some((id, gs)) = queue.pop_front() {
        if let Err(e) = model.successors(&gs, &mut succ) {
            completion = Completion::BufferOverflow { node: e.node, capacity: e.capacity };
            break;
        }
        if let Some(rng) = rng.as_mut() {
            succ.shuffle(rng);
        }
        for (t, next, _) in succ.drain(..) {
            transitions += 1;
            next.state_key(&mut key);
            if seen.contains(key.as_slice()) {
                continue;
            }
            if seen.len() >= cfg.state_limit {
                completion = Completion::StateLimit;
                break 'search;
            }
            seen.insert(key.as_slice().into());
            let nid = parents.len() as u32;
            parents.push((id, Some(t)));
            record(&next, nid, &mut witnesses);
            queue.push_back((nid, next));
        }
    }

    let complete = completion == Completion::Complete;
    let by_pair = witnesses.map(|row| {
        row.map(|w| match (w, complete) {
            (Some(_), _) => Verdict::Violated,
            (None, true) => Verdict::Holds,
            (None, false) => Verdict::Inconclusive,
        })
    });
    Exploration {
        verdicts: Verdicts { pairs: instance.scenario.injections(), by_pair },
        states: seen.len(),
        transitions,
        completion,
        model,
        witnesses,
        parents,
    }
}
