//! Counterexample traces: replay and the line-oriented trace file.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use super::state::{Effect, GlobalState, Model, Transition};
use crate::message::NodeId;
use crate::node::{BufferOverflow, NodeState};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("step {step}: transition {transition:?} is not enabled")]
    NotEnabled { step: usize, transition: Transition },
    #[error("step {step}: {source}")]
    Overflow { step: usize, source: BufferOverflow },
}

#[derive(Clone, Debug)]
pub struct TraceStep {
    pub transition: Transition,
    pub effect: Effect,
    /// State after the step.
    pub state: GlobalState,
}

/// A path from the initial state.
#[derive(Clone, Debug)]
pub struct Trace {
    pub initial: GlobalState,
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn last_state(&self) -> &GlobalState {
        self.steps.last().map_or(&self.initial, |s| &s.state)
    }

    pub fn transitions(&self) -> Vec<Transition> {
        self.steps.iter().map(|s| s.transition).collect()
    }

    /// State before step `i`.
    pub fn state_before(&self, i: usize) -> &GlobalState {
        if i == 0 {
            &self.initial
        } else {
            &self.steps[i - 1].state
        }
    }

    /// One JSON object per step.
    pub fn write_records<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (i, s) in self.steps.iter().enumerate() {
            let rec = TraceRecord {
                step: i + 1,
                transition: s.transition,
                effect: s.effect,
                rt: s.state.nodes.iter().map(rt_digest).collect(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct TraceRecord {
    step: usize,
    transition: Transition,
    #[serde(flatten)]
    effect: Effect,
    rt: Vec<String>,
}

/// Compact routing table: `dest:dsn/hops/nhop` per entry, `!` marks invalid.
pub fn rt_digest(n: &NodeState) -> String {
    let entries: Vec<String> =
        n.rt.known()
            .map(|(d, e)| format!("{d}:{}/{}/{}{}", e.dsn, e.hops, e.nhop, if e.valid { "" } else { "!" }))
            .collect();
    format!("{} sn={} [{}]", n.ip, n.sn, entries.join(" "))
}

/// Re-run `path` from the initial state, checking each step is enabled
/// under the model's priority rule.
pub fn replay(model: &Model, path: &[Transition]) -> Result<Trace, ReplayError> {
    let initial = model.initial_state();
    let mut cur = initial.clone();
    let mut steps = Vec::with_capacity(path.len());
    let mut succ = Vec::new();
    for (i, &t) in path.iter().enumerate() {
        model.successors(&cur, &mut succ).map_err(|source| ReplayError::Overflow { step: i + 1, source })?;
        let Some(pos) = succ.iter().position(|(u, _, _)| *u == t) else {
            return Err(ReplayError::NotEnabled { step: i + 1, transition: t });
        };
        let (_, next, effect) = succ.swap_remove(pos);
        steps.push(TraceStep { transition: t, effect, state: next.clone() });
        cur = next;
    }
    Ok(Trace { initial, steps })
}

/// Nodes whose state, apart from the message buffer, differs.
pub fn changed_nodes(before: &GlobalState, after: &GlobalState) -> Vec<NodeId> {
    before
        .nodes
        .iter()
        .zip(&after.nodes)
        .filter(|(a, b)| {
            a.sn != b.sn
                || a.rt != b.rt
                || a.rreqs != b.rreqs
                || a.queues != b.queues
                || a.rreq_counter != b.rreq_counter
        })
        .map(|(a, _)| a.ip)
        .collect()
}
