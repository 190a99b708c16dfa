//! `aodvmc`: enumerate topologies, check single instances, run experiment
//! sweeps and summarize their results.
//!
//! Exit codes: 0 all checked properties hold (or the command succeeded),
//! 1 a counterexample was found, 2 inconclusive, 3 usage or I/O error.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use aodvmc::enumerate::{class_members, read_topologies, write_topologies, ClassMember, InstanceClass};
use aodvmc::explore::{explore, ChangeTiming, Completion, ExploreConfig, Property, Verdict, DEFAULT_STATE_LIMIT};
use aodvmc::msc::render_msc;
use aodvmc::report::{aggregate, render_csv, render_table, Aggregation};
use aodvmc::sweep::{load_records, run_sweep, ClassGrid, SweepConfig};
use aodvmc::{Instance, Link, LinkChange, Scenario, Topology, Variant};

const ALL_NODES: [u8; 3] = [3, 4, 5];

#[derive(Parser)]
#[command(name = "aodvmc", version, about = "Exhaustive checking of AODV route discovery on small networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the topologies of a class, one JSON record per line.
    Enum(EnumArgs),
    /// Explore one topology under one or all scenarios.
    Check(CheckArgs),
    /// Explore a grid of models, classes and scenarios into a results file.
    Sweep(SweepArgs),
    /// Summarize a results file as pass percentages.
    Report(ReportArgs),
}

#[derive(Args)]
struct EnumArgs {
    #[arg(long, default_value = "static")]
    class: InstanceClass,
    /// Node counts to include.
    #[arg(long, value_delimiter = ',', default_values_t = ALL_NODES)]
    nodes: Vec<u8>,
    /// Output file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=4))]
    model: u8,
    /// Class to take `--topology` from.
    #[arg(long, default_value = "static")]
    class: InstanceClass,
    /// Topology id within the class, as listed by `enum`.
    #[arg(long, conflicts_with = "edges")]
    topology: Option<u32>,
    /// Topology file to look `--topology` up in instead of the enumeration.
    #[arg(long, requires = "topology")]
    topologies: Option<PathBuf>,
    /// Explicit links, e.g. A-B,B-C.
    #[arg(long, value_delimiter = ',', required_unless_present = "topology")]
    edges: Vec<Link>,
    /// Node count for `--edges`; defaults to the largest node mentioned.
    #[arg(long, requires = "edges")]
    nodes: Option<u8>,
    /// Link change for `--edges`, e.g. +A-C or -B-C.
    #[arg(long, requires = "edges", allow_hyphen_values = true)]
    change: Option<LinkChange>,
    /// Scenario 1..=4; all four if absent.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    scenario: Option<u8>,
    /// Write the shortest counterexample as JSON lines.
    #[arg(long, requires = "scenario")]
    trace: Option<PathBuf>,
    /// Print the shortest counterexample as a message sequence chart.
    #[arg(long, requires = "scenario")]
    msc: bool,
    /// Property whose counterexample is shown; the first violated if absent.
    #[arg(long)]
    property: Option<PropertyArg>,
    #[arg(long, default_value_t = DEFAULT_STATE_LIMIT)]
    state_limit: usize,
    /// Judge end states only after the link change has happened.
    #[arg(long)]
    force_change: bool,
    /// When the link change fires once a request reaches its destination.
    #[arg(long, value_enum, default_value_t = TimingArg::Immediate)]
    change_timing: TimingArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum TimingArg {
    Immediate,
    Deferred,
}

impl From<TimingArg> for ChangeTiming {
    fn from(t: TimingArg) -> ChangeTiming {
        match t {
            TimingArg::Immediate => ChangeTiming::Immediate,
            TimingArg::Deferred => ChangeTiming::Deferred,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PropertyArg {
    P1,
    P2,
    P3,
}

impl From<PropertyArg> for Property {
    fn from(p: PropertyArg) -> Property {
        match p {
            PropertyArg::P1 => Property::P1,
            PropertyArg::P2 => Property::P2,
            PropertyArg::P3 => Property::P3,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1u8, 2, 3, 4], value_parser = clap::value_parser!(u8).range(1..=4))]
    models: Vec<u8>,
    #[arg(long, value_delimiter = ',', default_values_t = InstanceClass::ALL)]
    class: Vec<InstanceClass>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, env = "AODVMC_JOBS")]
    jobs: Option<usize>,
    /// Judge end states only after the link change has happened.
    #[arg(long)]
    force_change: bool,
    /// When the link change fires once a request reaches its destination.
    #[arg(long, value_enum, default_value_t = TimingArg::Immediate)]
    change_timing: TimingArg,
    #[arg(long, default_value_t = DEFAULT_STATE_LIMIT)]
    state_limit: usize,
    /// Topology file replacing the enumeration; needs a single class.
    #[arg(long)]
    topologies: Option<PathBuf>,
    /// Results file; existing records are kept and their cells skipped.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Table3)]
    format: Format,
    /// Count each (topology, scenario) instance instead of each topology.
    #[arg(long)]
    per_instance: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table3,
    Csv,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(3),
            };
        }
    };
    let result = match cli.cmd {
        Cmd::Enum(a) => cmd_enum(a),
        Cmd::Check(a) => cmd_check(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Report(a) => cmd_report(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_enum(a: EnumArgs) -> Result<u8> {
    let members = class_members(a.class, &a.nodes);
    let mut w = output(&a.out)?;
    write_topologies(&mut w, &members)?;
    eprintln!("{} {} topologies", members.len(), a.class);
    Ok(0)
}

fn read_members(path: &PathBuf) -> Result<Vec<ClassMember>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_topologies(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn check_member(a: &CheckArgs) -> Result<ClassMember> {
    if let Some(id) = a.topology {
        let members = match &a.topologies {
            Some(p) => read_members(p)?,
            None => class_members(a.class, &ALL_NODES),
        };
        return members
            .into_iter()
            .find(|m| m.id == id)
            .with_context(|| format!("no {} topology with id {id}", a.class));
    }
    let n = a.nodes.unwrap_or_else(|| {
        a.edges.iter().chain(a.change.as_ref().map(|c| &c.link)).map(|l| l.ends().1 .0).max().unwrap_or(3).max(3)
    });
    let topology = Topology::new(n, a.edges.iter().copied())?;
    if let Some(c) = &a.change {
        c.validate(&topology)?;
    }
    Ok(ClassMember { id: 0, topology, change: a.change })
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Holds => 0,
        Verdict::Violated => 1,
        Verdict::Inconclusive => 2,
    }
}

fn cmd_check(a: CheckArgs) -> Result<u8> {
    let member = check_member(&a)?;
    let variant = Variant::from_id(a.model).expect("range checked by clap");
    let mut cfg = ExploreConfig::new(variant);
    cfg.state_limit = a.state_limit;
    cfg.force_change = a.force_change;
    cfg.change_timing = a.change_timing.into();
    let scenarios: Vec<Scenario> = match a.scenario {
        Some(s) => vec![Scenario::new(s)?],
        None => Scenario::all().collect(),
    };

    let mut overall = Verdict::Holds;
    let out = &mut io::stdout().lock();
    let change = member.change.map(|c| format!(", change {c}")).unwrap_or_default();
    writeln!(out, "{variant}, {}{change}", member.topology)?;
    for s in scenarios {
        let instance = Instance::new(member.topology, member.change, s)?;
        let ex = explore(&instance, &cfg);
        let status = match ex.completion {
            Completion::Complete => "complete".to_string(),
            Completion::StateLimit => format!("stopped at the state limit of {}", cfg.state_limit),
            Completion::BufferOverflow { node, capacity } => {
                format!("stopped: buffer of node {node} exceeded {capacity} messages")
            }
        };
        writeln!(out, "scenario {}: {} states, {} transitions, {status}", s.id(), ex.states, ex.transitions)?;
        for p in Property::ALL {
            let pairs: Vec<String> = ex
                .verdicts
                .pairs
                .iter()
                .zip(ex.verdicts.by_pair[p.index()])
                .map(|((o, d), v)| format!("{o}->{d} {}", verdict_name(v)))
                .collect();
            writeln!(out, "  {p} {:<12} ({})", verdict_name(ex.verdicts.get(p)), pairs.join(", "))?;
            overall = overall.and(ex.verdicts.get(p));
        }

        if a.trace.is_some() || a.msc {
            let wanted = match a.property {
                Some(p) => Some(Property::from(p)),
                None => Property::ALL.into_iter().find(|&p| ex.verdicts.get(p) == Verdict::Violated),
            };
            let trace = wanted.and_then(|p| ex.first_trace(p).map(|t| (p, t)));
            match trace {
                Some((p, t)) => {
                    if let Some(path) = &a.trace {
                        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
                        let mut w = BufWriter::new(f);
                        t.write_records(&mut w)?;
                        w.flush()?;
                    }
                    if a.msc {
                        writeln!(out, "\ncounterexample for {p}, {} steps:", t.steps.len())?;
                        write!(out, "{}", render_msc(&t))?;
                    }
                }
                None => writeln!(out, "no counterexample to show")?,
            }
        }
    }
    Ok(verdict_code(overall))
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::Violated => "violated",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn cmd_sweep(a: SweepArgs) -> Result<u8> {
    let mut classes = a.class.clone();
    classes.sort();
    classes.dedup();
    let grids: Vec<ClassGrid> = match &a.topologies {
        Some(p) => {
            if classes.len() != 1 {
                bail!("--topologies needs exactly one --class");
            }
            vec![ClassGrid { class: classes[0], members: read_members(p)? }]
        }
        None => classes.iter().map(|&c| ClassGrid::enumerated(c)).collect(),
    };
    let jobs = a.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cfg = SweepConfig {
        variants: a.models.iter().map(|&m| Variant::from_id(m).expect("range checked by clap")).collect(),
        jobs,
        state_limit: a.state_limit,
        force_change: a.force_change,
        change_timing: a.change_timing.into(),
    };
    let total: usize = grids.iter().map(|g| g.members.len() * 4).sum::<usize>() * cfg.variants.len();
    let mut done = 0usize;
    let quiet = a.quiet;
    let summary = run_sweep(&cfg, &grids, &a.out, |r| {
        done += 1;
        if !quiet && done % 200 == 0 {
            eprintln!("{done} new records (model {} {} {})", r.model.id(), r.class, r.id);
        }
    })
    .with_context(|| format!("sweeping into {}", a.out.display()))?;
    eprintln!(
        "{} cells in grid ({total} expected), {} already present, {} written to {}",
        summary.grid,
        summary.skipped,
        summary.written,
        a.out.display()
    );
    Ok(0)
}

fn cmd_report(a: ReportArgs) -> Result<u8> {
    let records = load_records(&a.results).with_context(|| format!("reading {}", a.results.display()))?;
    let mode = if a.per_instance { Aggregation::PerInstance } else { Aggregation::PerTopology };
    let mut sizes = std::collections::BTreeMap::new();
    for r in &records {
        sizes.entry(r.class).or_insert_with(|| class_members(r.class, &ALL_NODES).len());
    }
    let rows = aggregate(&records, |c| sizes[&c], mode);
    let text = match a.format {
        Format::Table3 => render_table(&rows),
        Format::Csv => render_csv(&rows, mode),
    };
    print!("{text}");
    Ok(0)
}
