//! Text message sequence charts for traces.
//!
//! ```text
//!      A    B    C
//!   1  <----*---->      data for A at B; broadcasts RREQ[BA#1](hops=0, dsn=0, osn=2, sip=B) to A, C
//!   2  |    <----*      C broadcasts RREQ[BA#1](hops=1, dsn=0, osn=2, sip=C) on RREQ[BA] to B
//!   3  |    @    |      B absorbs RREQ[BA#1](hops=1, dsn=0, osn=2, sip=C)
//!   8  |    |    @      C discards RREQ[CA#1](hops=1, dsn=0, osn=2, sip=B)  (no state change)
//! ```
//!
//! `*` marks the sender, `<` and `>` the receivers, `x` an unreachable
//! receiver and `@` a node acting without communication. A consumed
//! message is discarded when no node state changes and absorbed otherwise.

use std::fmt::Write as _;

use crate::explore::{changed_nodes, Effect, Trace};
use crate::message::{Message, NodeId, NodeSet};
use crate::net::ChangeKind;

const STEP_WIDTH: usize = 5;
const LANE: usize = 5;

/// Short label naming the message type and its discovery.
pub fn tag(m: &Message) -> String {
    use crate::message::MsgType::*;
    match m.kind {
        Rreq | Rrep | Pkt => format!("{}[{}{}]", m.kind, m.oip, m.dip),
        Rerr | NewPkt => m.kind.to_string(),
    }
}

struct Lanes {
    n: usize,
    row: Vec<char>,
}

impl Lanes {
    fn new(n: usize) -> Lanes {
        let mut row = vec![' '; LANE * n];
        for i in 0..n {
            row[i * LANE] = '|';
        }
        Lanes { n, row }
    }

    fn col(id: NodeId) -> usize {
        (id.index() - 1) * LANE
    }

    fn mark(&mut self, id: NodeId, c: char) {
        self.row[Self::col(id)] = c;
    }

    fn arrow(&mut self, sender: NodeId, receivers: NodeSet, failed: Option<NodeId>) {
        let s = Self::col(sender);
        let targets: Vec<(usize, bool)> =
            receivers.iter().map(|r| (Self::col(r), false)).chain(failed.map(|f| (Self::col(f), true))).collect();
        for &(t, _) in &targets {
            let (lo, hi) = if t < s { (t + 1, s) } else { (s + 1, t) };
            for c in &mut self.row[lo..hi] {
                *c = '-';
            }
        }
        for &(t, fail) in &targets {
            self.row[t] = match (fail, t < s) {
                (true, _) => 'x',
                (false, true) => '<',
                (false, false) => '>',
            };
        }
        self.row[s] = '*';
    }

    fn render(&self) -> String {
        let s: String = self.row.iter().collect();
        format!("{s:<width$}", width = LANE * self.n)
    }
}

fn names(set: NodeSet) -> String {
    let v: Vec<String> = set.iter().map(|n| n.to_string()).collect();
    if v.is_empty() {
        "nobody".into()
    } else {
        v.join(", ")
    }
}

/// Render `trace` with one lifeline per node and one numbered line per step.
pub fn render_msc(trace: &Trace) -> String {
    let n = trace.initial.nodes.len();
    let mut header = format!("{:STEP_WIDTH$}", "");
    for id in NodeId::all(n as u8) {
        let _ = write!(header, "{:<LANE$}", id.to_string());
    }
    let mut out = format!("{}\n", header.trim_end());

    for (i, step) in trace.steps.iter().enumerate() {
        let mut lanes = Lanes::new(n);
        let quiet = changed_nodes(trace.state_before(i), &step.state).is_empty()
            && !matches!(step.effect, Effect::Change { .. });
        let text = match step.effect {
            Effect::Internal { node, consumed, delivered } => {
                lanes.mark(node, '@');
                match (delivered, quiet) {
                    (true, _) => format!("{node} delivers {}", tag(&consumed)),
                    (false, true) => format!("{node} discards {consumed}"),
                    (false, false) => format!("{node} absorbs {consumed}"),
                }
            }
            Effect::Broadcast { sender, consumed, msg, receivers } => {
                lanes.arrow(sender, receivers, None);
                let cause = consumed.map(|c| format!(" on {}", tag(&c))).unwrap_or_default();
                format!("{sender} broadcasts {msg}{cause} to {}", names(receivers))
            }
            Effect::Unicast { sender, consumed, msg, to } => {
                let mut r = NodeSet::EMPTY;
                r.insert(to);
                lanes.arrow(sender, r, None);
                let cause = consumed.map(|c| format!(" on {}", tag(&c))).unwrap_or_default();
                format!("{sender} sends {msg}{cause} to {to}")
            }
            Effect::UnicastFail { sender, msg, to, rerr, receivers, .. } => {
                lanes.arrow(sender, receivers, Some(to));
                match rerr {
                    Some(e) => {
                        format!("{sender} cannot reach {to} with {}; broadcasts {e} to {}", tag(&msg), names(receivers))
                    }
                    None => format!("{sender} cannot reach {to} with {}", tag(&msg)),
                }
            }
            Effect::Inject { originator, destination, rreq, receivers } => match rreq {
                Some(m) => {
                    lanes.arrow(originator, receivers, None);
                    format!("data for {destination} at {originator}; broadcasts {m} to {}", names(receivers))
                }
                None => {
                    lanes.mark(originator, '@');
                    format!("data for {destination} at {originator}")
                }
            },
            Effect::Change { change } => {
                let (a, b) = change.link.ends();
                lanes.mark(a, '~');
                lanes.mark(b, '~');
                match change.kind {
                    ChangeKind::Add => format!("link {} appears", change.link),
                    ChangeKind::Remove => format!("link {} breaks", change.link),
                }
            }
        };
        let _ = write!(out, "{:>3}  {}  {text}", i + 1, lanes.render());
        if quiet {
            out.push_str("  (no state change)");
        }
        out.push('\n');
    }
    out
}
