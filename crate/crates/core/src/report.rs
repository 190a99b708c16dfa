//! Aggregation of sweep results into per-class pass rates.
//!
//! A topology passes a column when every one of its four scenario
//! instances has no counterexample for the column's properties. Inconclusive
//! instances count as failing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::enumerate::InstanceClass;
use crate::explore::{Property, Verdict};
use crate::net::Scenario;
use crate::node::Variant;
use crate::sweep::InstanceRecord;

/// Column headings in table order.
pub const COLUMNS: [&str; 5] = ["P1", "P2", "P3", "P1&2", "all"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Conjunction over the four scenarios of each topology.
    #[default]
    PerTopology,
    /// Every (topology, scenario) instance counted on its own.
    PerInstance,
}

/// One row of the summary table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SummaryRow {
    pub variant: Variant,
    pub class: InstanceClass,
    /// Topologies (or instances) in the full class.
    pub denominator: usize,
    /// Instances present in the results.
    pub instances: usize,
    /// Instances the full class grid has.
    pub expected_instances: usize,
    pub inconclusive: usize,
    /// Passing units per column.
    pub passed: [usize; 5],
}

impl SummaryRow {
    pub fn complete(&self) -> bool {
        self.instances == self.expected_instances
    }

    /// Percentages per column, if the row is complete.
    pub fn percentages(&self) -> Option<[f64; 5]> {
        if !self.complete() || self.denominator == 0 {
            return None;
        }
        Some(self.passed.map(|p| 100.0 * p as f64 / self.denominator as f64))
    }
}

fn columns(verdicts: [Verdict; 3]) -> [bool; 5] {
    let ok = verdicts.map(|v| v == Verdict::Holds);
    [ok[0], ok[1], ok[2], ok[0] && ok[1], ok[0] && ok[1] && ok[2]]
}

/// Summarize `records`. `class_size` gives the number of topologies of a
/// full class; rows whose grid is not covered are reported as incomplete.
pub fn aggregate(
    records: &[InstanceRecord],
    class_size: impl Fn(InstanceClass) -> usize,
    mode: Aggregation,
) -> Vec<SummaryRow> {
    let mut by_topology: BTreeMap<(Variant, InstanceClass), BTreeMap<u32, BTreeMap<Scenario, [Verdict; 3]>>> =
        BTreeMap::new();
    for r in records {
        by_topology
            .entry((r.model, r.class))
            .or_default()
            .entry(r.id)
            .or_default()
            .insert(r.scenario, Property::ALL.map(|p| r.verdict(p)));
    }
    let scenarios = Scenario::all().count();
    by_topology
        .into_iter()
        .map(|((variant, class), topologies)| {
            let size = class_size(class);
            let mut passed = [0; 5];
            let mut instances = 0;
            let mut inconclusive = 0;
            for per_scenario in topologies.values() {
                instances += per_scenario.len();
                inconclusive += per_scenario.values().filter(|v| v.contains(&Verdict::Inconclusive)).count();
                match mode {
                    Aggregation::PerTopology => {
                        let mut all = [per_scenario.len() == scenarios; 5];
                        for v in per_scenario.values() {
                            for (a, c) in all.iter_mut().zip(columns(*v)) {
                                *a &= c;
                            }
                        }
                        for (p, a) in passed.iter_mut().zip(all) {
                            *p += a as usize;
                        }
                    }
                    Aggregation::PerInstance => {
                        for v in per_scenario.values() {
                            for (p, c) in passed.iter_mut().zip(columns(*v)) {
                                *p += c as usize;
                            }
                        }
                    }
                }
            }
            let expected_instances = size * scenarios;
            let denominator = match mode {
                Aggregation::PerTopology => size,
                Aggregation::PerInstance => expected_instances,
            };
            SummaryRow { variant, class, denominator, instances, expected_instances, inconclusive, passed }
        })
        .collect()
}

/// Rows grouped by class, as a fixed-width text table.
pub fn render_table(rows: &[SummaryRow]) -> String {
    let mut rows: Vec<&SummaryRow> = rows.iter().collect();
    rows.sort_by_key(|r| (r.class, r.variant));
    let mut out = String::new();
    let _ = write!(out, "{:<8} {:<8}", "class", "model");
    for c in COLUMNS {
        let _ = write!(out, " {c:>6}");
    }
    out.push('\n');
    let mut last = None;
    for r in rows {
        if last.is_some() && last != Some(r.class) {
            out.push('\n');
        }
        last = Some(r.class);
        let _ = write!(out, "{:<8} {:<8}", r.class.name(), r.variant.id());
        match r.percentages() {
            Some(ps) => {
                for p in ps {
                    let _ = write!(out, " {p:>6.1}");
                }
                if r.inconclusive > 0 {
                    let _ = write!(out, "  ({} inconclusive)", r.inconclusive);
                }
            }
            None => {
                let _ = write!(out, "  incomplete: {}/{} instances", r.instances, r.expected_instances);
            }
        }
        out.push('\n');
    }
    out
}

/// Comma-separated rows with a header line. Percentages of incomplete
/// rows are left empty.
pub fn render_csv(rows: &[SummaryRow], mode: Aggregation) -> String {
    let mode = match mode {
        Aggregation::PerTopology => "per-topology",
        Aggregation::PerInstance => "per-instance",
    };
    let mut out = String::from(
        "model,class,aggregation,denominator,instances,expected_instances,inconclusive,complete,p1,p2,p3,p1_and_p2,all\n",
    );
    let mut rows: Vec<&SummaryRow> = rows.iter().collect();
    rows.sort_by_key(|r| (r.variant, r.class));
    for r in rows {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.variant.id(),
            r.class.name(),
            mode,
            r.denominator,
            r.instances,
            r.expected_instances,
            r.inconclusive,
            r.complete()
        );
        match r.percentages() {
            Some(ps) => ps.iter().for_each(|p| {
                let _ = write!(out, ",{p:.1}");
            }),
            None => out.push_str(",,,,,"),
        }
        out.push('\n');
    }
    out
}

/// Topology ids whose column verdict differs between two result sets of
/// the same class and variant.
pub fn diff_topologies(
    a: &[InstanceRecord],
    b: &[InstanceRecord],
    column: usize,
) -> BTreeSet<(Variant, InstanceClass, u32)> {
    let pass = |rs: &[InstanceRecord]| {
        let mut m: BTreeMap<(Variant, InstanceClass, u32), bool> = BTreeMap::new();
        for r in rs {
            let c = columns(Property::ALL.map(|p| r.verdict(p)))[column];
            *m.entry((r.model, r.class, r.id)).or_insert(true) &= c;
        }
        m
    };
    let (pa, pb) = (pass(a), pass(b));
    pa.iter().filter(|(k, v)| pb.get(k).is_some_and(|w| w != *v)).map(|(k, _)| *k).collect()
}
