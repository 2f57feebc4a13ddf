//! Command-line driver for `kpem-core`.
//!
//! Exit statuses: 0 success, 1 usage or input error, 2 numerical contract
//! failure, 3 when `paper-examples` finds a discrepancy.

pub mod auditio;
pub mod fmt;
pub mod statefile;
pub mod worked;

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use kpem_core::audit::{eprime_tightness_search, run_suite};
use kpem_core::measures::{measure, Witness};
use kpem_core::partition::{count_k_fineness, KFineness};
use kpem_core::qstate::build_state_with;
use kpem_core::{finest_factorization, FactorKind, Limits, MeasureKind, MeasureSpec, ReducedFunction, SystemLayout};
use serde::Serialize;

use crate::fmt::num;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_DISCREPANCY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "kpem", version, about = "k-partite entanglement measures on multipartite pure states")]
pub struct Cli {
    /// Lift the default size caps on dimension, party count and partition families.
    #[arg(long, global = true)]
    pub unsafe_large: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one measure on a state file.
    Compute(ComputeArgs),
    /// Finest tensor-product factorisation of a state file.
    Factorize {
        #[arg(long)]
        state: PathBuf,
    },
    /// Enumerate or count partitions whose blocks have at most `fineness` parties.
    Partitions {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        fineness: usize,
        #[arg(long)]
        count: bool,
    },
    /// Run the axiom audit.
    Audit(AuditArgs),
    /// Recompute the worked examples and compare with the reference table.
    PaperExamples,
}

#[derive(Debug, Args)]
pub struct ComputeArgs {
    /// C | Cq:<q> | Calpha:<a> | CGq:<q> | CGalpha:<a> | E | calE | Eprime
    #[arg(long)]
    pub measure: String,
    #[arg(long)]
    pub k: usize,
    /// concurrence | entropy | q:<value> | alpha:<value>
    #[arg(long)]
    pub h: Option<String>,
    #[arg(long)]
    pub state: PathBuf,
    /// Print a JSON record instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// JSON configuration; omitted fields take the default suite.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random instances per check.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Write one JSON record per check to this file.
    #[arg(long)]
    pub jsonl: Option<PathBuf>,
    /// Recompute the witnesses of a JSONL file instead of running the suite.
    #[arg(long, conflicts_with_all = ["config", "seed", "trials", "jsonl", "tightness"])]
    pub replay: Option<PathBuf>,
    /// Also run the Eprime tight-coarsening search with this many trials.
    #[arg(long)]
    pub tightness: Option<usize>,
}

/// Parse `args` (including the program name) and run, writing to `out`
/// and `err`. Returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> i32 {
    match e.chain().find_map(|c| c.downcast_ref::<kpem_core::Error>()) {
        Some(k) if k.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> anyhow::Result<i32> {
    let limits = if cli.unsafe_large { Limits::unbounded() } else { Limits::default() };
    let text = match &cli.command {
        Command::Compute(a) => compute(a, &limits)?,
        Command::Factorize { state } => factorize(state, &limits)?,
        Command::Partitions { n, fineness, count } => partitions(*n, *fineness, *count, &limits)?,
        Command::Audit(a) => audit(a, &limits)?,
        Command::PaperExamples => {
            let table = worked::compute(&limits)?;
            out.write_all(table.render().as_bytes())?;
            let code = if table.discrepancies().next().is_some() { EXIT_DISCREPANCY } else { EXIT_OK };
            return Ok(code);
        }
    };
    out.write_all(text.as_bytes())?;
    Ok(EXIT_OK)
}

fn load_state(path: &Path, limits: &Limits) -> anyhow::Result<kpem_core::PureState> {
    let spec = statefile::parse_state_file(path)?;
    Ok(build_state_with(&spec, limits)?)
}

#[derive(Serialize)]
struct TermRecord {
    parties: String,
    h: f64,
    weight: f64,
}

#[derive(Serialize)]
struct SumRecord {
    partition: String,
    sum: f64,
}

#[derive(Serialize)]
struct ComputeRecord {
    measure: String,
    k: usize,
    value: f64,
    witness: Option<String>,
    terms: Vec<TermRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    partition_sums: Vec<SumRecord>,
}

fn compute(a: &ComputeArgs, limits: &Limits) -> anyhow::Result<String> {
    let kind = match &a.h {
        Some(h) => MeasureKind::parse(&a.measure, Some(h.parse::<ReducedFunction>()?))?,
        None => a.measure.parse::<MeasureKind>()?,
    };
    let state = load_state(&a.state, limits)?;
    let spec = MeasureSpec::new(kind, a.k);
    let r = measure(&spec, &state, limits)?;
    let layout = state.layout();
    let label = |parties: &[usize]| parties.iter().map(|&p| layout.label(p)).collect::<String>();
    let witness = match &r.witness {
        Witness::Partition(p) => Some(p.to_text(layout)),
        Witness::Factors(d) => Some(d.to_text(&state)),
        Witness::None => None,
    };
    let record = ComputeRecord {
        measure: kind.to_string(),
        k: a.k,
        value: r.value,
        witness,
        terms: r.terms.iter().map(|t| TermRecord { parties: label(&t.parties), h: t.h, weight: t.weight }).collect(),
        partition_sums: r
            .partition_sums
            .iter()
            .map(|s| SumRecord { partition: s.partition.to_text(layout), sum: s.sum })
            .collect(),
    };
    if a.json {
        return Ok(serde_json::to_string_pretty(&record)? + "\n");
    }
    let mut s = format!("{} = {}\n", spec, num(record.value));
    if let Some(w) = &record.witness {
        let _ = writeln!(s, "witness {w}");
    }
    for t in &record.terms {
        let _ = writeln!(s, "  {:<10} h = {:<15} weight {}", t.parties, num(t.h), num(t.weight));
    }
    if !record.partition_sums.is_empty() {
        let m = record.partition_sums.len();
        let _ = writeln!(s, "{m} partition{} in the product", if m == 1 { "" } else { "s" });
    }
    Ok(s)
}

fn factorize(path: &Path, limits: &Limits) -> anyhow::Result<String> {
    let state = load_state(path, limits)?;
    let dec = finest_factorization(&state, kpem_core::PURITY_TOL)?;
    let mut s = format!("{}\n", dec.to_text(&state));
    for f in &dec.factors {
        let parties: String = f.parties.iter().map(|&p| state.layout().label(p)).collect();
        let kind = match f.kind {
            FactorKind::Single => "single",
            FactorKind::GenuinelyEntangled => "genuinely entangled",
        };
        let _ = writeln!(s, "  {parties:<10} {kind}");
    }
    let _ = writeln!(s, "producibility {}", dec.producibility());
    Ok(s)
}

fn partitions(n: usize, fineness: usize, count: bool, limits: &Limits) -> anyhow::Result<String> {
    if n == 0 || fineness == 0 {
        bail!("--n and --fineness must be positive");
    }
    let total = count_k_fineness(n, fineness);
    if count {
        return Ok(format!("{total}\n"));
    }
    if total > limits.max_family as u128 {
        bail!("{total} partitions exceed the listing cap of {}; use --count or --unsafe-large", limits.max_family);
    }
    let layout = SystemLayout::lettered(n, 2)?;
    let parties: Vec<usize> = (0..n).collect();
    let mut s = String::new();
    for p in KFineness::new(&parties, fineness)? {
        s.push_str(&p.to_text(&layout));
        s.push('\n');
    }
    Ok(s)
}

fn audit(a: &AuditArgs, limits: &Limits) -> anyhow::Result<String> {
    if let Some(path) = &a.replay {
        return replay_file(path, limits);
    }
    let file = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("{}", p.display()))?
        }
        None => auditio::ConfigFile::default(),
    };
    let mut cfg = file.into_config(*limits)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(t) = a.trials {
        cfg.instances = t;
    }
    let report = run_suite(&cfg)?;
    if let Some(path) = &a.jsonl {
        std::fs::write(path, auditio::write_jsonl(&report)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    let mut s = auditio::render_report(&report);
    if let Some(trials) = a.tightness {
        for h in [ReducedFunction::Entropy, ReducedFunction::Concurrence] {
            let t = eprime_tightness_search(h, trials, cfg.seed, limits)?;
            s.push_str(&auditio::render_tightness(&h.to_string(), &t));
        }
    }
    Ok(s)
}

fn replay_file(path: &Path, limits: &Limits) -> anyhow::Result<String> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let records = auditio::read_jsonl(&text)?;
    let mut s = String::new();
    let mut mismatches = 0;
    for r in &records {
        let Some(w) = &r.witness else { continue };
        let m = r.replay(limits)?.unwrap_or(f64::NAN);
        let same = (m - w.margin).abs() <= 1e-9;
        if !same {
            mismatches += 1;
        }
        let _ = writeln!(
            s,
            "{:<28} {:<20} k={}  recorded {:<15} replayed {:<15} {}",
            r.axiom,
            r.measure,
            r.k,
            num(w.margin),
            num(m),
            if same { "ok" } else { "MISMATCH" }
        );
    }
    if mismatches > 0 {
        bail!("{mismatches} witness margins did not replay");
    }
    Ok(s)
}
