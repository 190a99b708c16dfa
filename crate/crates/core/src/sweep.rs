//! The experiment grid and its resumable, parallel execution.
//!
//! A results file holds one [`InstanceRecord`] per line in grid order:
//! variant, then class, then topology id, then scenario. A rerun skips
//! cells already present and appends the rest in the same order.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Seek, SeekFrom, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enumerate::{class_members, ClassMember, InstanceClass};
use crate::explore::{explore, ChangeTiming, Completion, ExploreConfig, Property, Verdict};
use crate::net::{Instance, NetError, Scenario};
use crate::node::Variant;

/// Result of one grid cell.
///
/// ```text
/// {"model":1,"class":"static","id":0,"scenario":1,"p1":["holds","holds"],"p2":["holds","holds"],"p3":["holds","holds"],"states":31,"transitions":34,"status":"complete","force_change":false,"change_timing":"immediate","millis":0}
/// ```
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub model: Variant,
    pub class: InstanceClass,
    pub id: u32,
    pub scenario: Scenario,
    pub p1: [Verdict; 2],
    pub p2: [Verdict; 2],
    pub p3: [Verdict; 2],
    pub states: usize,
    pub transitions: u64,
    #[serde(flatten)]
    pub completion: Completion,
    pub force_change: bool,
    #[serde(default)]
    pub change_timing: ChangeTiming,
    pub millis: u64,
}

impl InstanceRecord {
    pub fn key(&self) -> CellKey {
        CellKey { model: self.model, class: self.class, id: self.id, scenario: self.scenario }
    }

    pub fn pairs(&self, p: Property) -> [Verdict; 2] {
        match p {
            Property::P1 => self.p1,
            Property::P2 => self.p2,
            Property::P3 => self.p3,
        }
    }

    pub fn verdict(&self, p: Property) -> Verdict {
        let [a, b] = self.pairs(p);
        a.and(b)
    }
}

/// Grid coordinates; the derived order is the file order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub model: Variant,
    pub class: InstanceClass,
    pub id: u32,
    pub scenario: Scenario,
}

/// The members of one class to sweep.
#[derive(Clone, Debug)]
pub struct ClassGrid {
    pub class: InstanceClass,
    pub members: Vec<ClassMember>,
}

impl ClassGrid {
    /// The full enumerated class.
    pub fn enumerated(class: InstanceClass) -> ClassGrid {
        ClassGrid { class, members: class_members(class, &[3, 4, 5]) }
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub variants: Vec<Variant>,
    pub jobs: usize,
    pub state_limit: usize,
    pub force_change: bool,
    pub change_timing: ChangeTiming,
}

impl SweepConfig {
    fn settings(&self) -> String {
        format!("force_change={} change_timing={:?}", self.force_change, self.change_timing)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Cell {
    pub variant: Variant,
    pub class: InstanceClass,
    pub member: ClassMember,
    pub scenario: Scenario,
}

impl Cell {
    pub fn key(&self) -> CellKey {
        CellKey { model: self.variant, class: self.class, id: self.member.id, scenario: self.scenario }
    }

    pub fn instance(&self) -> Result<Instance, NetError> {
        Instance::new(self.member.topology, self.member.change, self.scenario)
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("results file line {line}: {source}")]
    Malformed { line: usize, source: serde_json::Error },
    #[error("results file line {line}: recorded with {found}, sweep uses {expected}")]
    SettingsMismatch { line: usize, found: String, expected: String },
    #[error("{class} topology {id}: {source}")]
    Instance { class: InstanceClass, id: u32, source: NetError },
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SweepSummary {
    pub grid: usize,
    pub skipped: usize,
    pub written: usize,
}

/// All cells in file order.
pub fn grid(variants: &[Variant], classes: &[ClassGrid]) -> Vec<Cell> {
    let mut variants = variants.to_vec();
    variants.sort();
    variants.dedup();
    let mut classes: Vec<&ClassGrid> = classes.iter().collect();
    classes.sort_by_key(|c| c.class);
    let mut out = Vec::new();
    for &variant in &variants {
        for cg in &classes {
            let mut members = cg.members.clone();
            members.sort_by_key(|m| m.id);
            for member in members {
                for scenario in Scenario::all() {
                    out.push(Cell { variant, class: cg.class, member, scenario });
                }
            }
        }
    }
    out
}

/// Explore one cell.
pub fn run_cell(cell: &Cell, cfg: &SweepConfig) -> Result<InstanceRecord, NetError> {
    let instance = cell.instance()?;
    let mut ecfg = ExploreConfig::new(cell.variant);
    ecfg.state_limit = cfg.state_limit;
    ecfg.force_change = cfg.force_change;
    ecfg.change_timing = cfg.change_timing;
    let start = Instant::now();
    let ex = explore(&instance, &ecfg);
    let by = ex.verdicts.by_pair;
    Ok(InstanceRecord {
        model: cell.variant,
        class: cell.class,
        id: cell.member.id,
        scenario: cell.scenario,
        p1: by[0],
        p2: by[1],
        p3: by[2],
        states: ex.states,
        transitions: ex.transitions,
        completion: ex.completion,
        force_change: cfg.force_change,
        change_timing: cfg.change_timing,
        millis: start.elapsed().as_millis() as u64,
    })
}

/// Parse a results file.
pub fn read_records<R: BufRead>(r: R) -> Result<Vec<InstanceRecord>, SweepError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| SweepError::Malformed { line: i + 1, source })?);
    }
    Ok(out)
}

pub fn write_record<W: Write>(mut w: W, rec: &InstanceRecord) -> io::Result<()> {
    serde_json::to_writer(&mut w, rec)?;
    w.write_all(b"\n")
}

/// Read the cells already present in `path`. An unterminated last line is
/// the remains of an interrupted write and is cut off.
fn existing_cells(path: &Path, cfg: &SweepConfig) -> Result<HashSet<CellKey>, SweepError> {
    let mut done = HashSet::new();
    let file = match OpenOptions::new().read(true).write(true).open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(done),
        Err(e) => return Err(e.into()),
    };
    let mut reader = BufReader::new(&file);
    let mut line = String::new();
    let mut good_len = 0u64;
    let mut lineno = 0;
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        lineno += 1;
        if !line.ends_with('\n') {
            file.set_len(good_len)?;
            break;
        }
        good_len += n as u64;
        if line.trim().is_empty() {
            continue;
        }
        let rec: InstanceRecord =
            serde_json::from_str(&line).map_err(|source| SweepError::Malformed { line: lineno, source })?;
        if rec.force_change != cfg.force_change || rec.change_timing != cfg.change_timing {
            let found = SweepConfig { force_change: rec.force_change, change_timing: rec.change_timing, ..cfg.clone() };
            return Err(SweepError::SettingsMismatch {
                line: lineno,
                found: found.settings(),
                expected: cfg.settings(),
            });
        }
        done.insert(rec.key());
    }
    Ok(done)
}

/// Run every cell of the grid not yet in `out`, appending records in grid
/// order. `progress` sees each record as it is written.
pub fn run_sweep(
    cfg: &SweepConfig,
    classes: &[ClassGrid],
    out: &Path,
    mut progress: impl FnMut(&InstanceRecord),
) -> Result<SweepSummary, SweepError> {
    let cells = grid(&cfg.variants, classes);
    for c in &cells {
        c.instance().map_err(|source| SweepError::Instance { class: c.class, id: c.member.id, source })?;
    }
    let done = existing_cells(out, cfg)?;
    let todo: Vec<Cell> = cells.iter().filter(|c| !done.contains(&c.key())).copied().collect();
    let mut file = OpenOptions::new().create(true).append(true).open(out)?;
    file.seek(SeekFrom::End(0))?;
    let mut w = BufWriter::new(file);

    let jobs = cfg.jobs.max(1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let chunk = jobs * 8;
    for part in todo.chunks(chunk) {
        let recs: Vec<InstanceRecord> = pool.install(|| {
            part.par_iter()
                .with_max_len(1)
                .map(|c| run_cell(c, cfg).expect("cells validated before the sweep"))
                .collect()
        });
        for r in &recs {
            write_record(&mut w, r)?;
            progress(r);
        }
        w.flush()?;
    }
    Ok(SweepSummary { grid: cells.len(), skipped: cells.len() - todo.len(), written: todo.len() })
}

/// Open and parse a results file.
pub fn load_records(path: &Path) -> Result<Vec<InstanceRecord>, SweepError> {
    read_records(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Link, Topology};
    use crate::NodeId;

    fn line_grid() -> ClassGrid {
        let t = Topology::new(3, [Link::new(NodeId::A, NodeId::B), Link::new(NodeId::B, NodeId::C)]).unwrap();
        ClassGrid { class: InstanceClass::Static, members: vec![ClassMember { id: 0, topology: t, change: None }] }
    }

    fn cfg() -> SweepConfig {
        SweepConfig {
            variants: vec![Variant::Basic],
            jobs: 1,
            state_limit: 10_000,
            force_change: false,
            change_timing: ChangeTiming::Immediate,
        }
    }

    #[test]
    fn grid_order_is_variant_class_id_scenario() {
        let cells = grid(&[Variant::ForwardAllReplies, Variant::Basic], &[line_grid()]);
        let keys: Vec<CellKey> = cells.iter().map(Cell::key).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(keys.len(), 8);
    }

    #[test]
    fn record_round_trip() {
        let rec = run_cell(&grid(&[Variant::Basic], &[line_grid()])[1], &cfg()).unwrap();
        let mut buf = Vec::new();
        write_record(&mut buf, &rec).unwrap();
        let back = read_records(buf.as_slice()).unwrap();
        assert_eq!(back, vec![rec]);
    }

    #[test]
    fn line_topology_fails_p1_in_scenario_two() {
        let rec = run_cell(&grid(&[Variant::Basic], &[line_grid()])[1], &cfg()).unwrap();
        assert_eq!(rec.verdict(Property::P1), Verdict::Violated);
        assert_eq!(rec.completion, Completion::Complete);
    }

    #[test]
    fn truncated_tail_is_dropped_on_resume() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let s = run_sweep(&cfg(), &[line_grid()], &path, |_| {}).unwrap();
        assert_eq!(s.written, 4);
        let full = std::fs::read_to_string(&path).unwrap();
        let cut = full.len() - 10;
        std::fs::write(&path, &full[..cut]).unwrap();
        let s = run_sweep(&cfg(), &[line_grid()], &path, |_| {}).unwrap();
        assert_eq!((s.skipped, s.written), (3, 1));
        assert_eq!(load_records(&path).unwrap().len(), 4);
    }
}
