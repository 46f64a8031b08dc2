use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use axc_core::evolve::{evolve_pareto, evolve_single, ErrorMetric, Evaluator, EvolveError, Objective, SearchConfig};
use axc_core::library::{save_manifest, LibraryEntry};
use axc_core::{genome, Simulator};
use clap::ValueEnum;
use serde_json::{json, Value};

use crate::eval::{csv_row, load_cost_table, CSV_HEADER};
use crate::util::{parse_family, read_genome, seed_genome, usage, write_file, write_json, RunLog};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Minimise area inside the error window.
    Single,
    /// Archive of non-dominated points over `--objectives`.
    Pareto,
}

#[derive(clap::Args)]
pub struct Args {
    #[arg(long, value_enum, default_value = "single")]
    mode: Mode,
    /// `exact-multN` or `exact-addN`.
    #[arg(long = "ref", default_value = "exact-mult8")]
    reference: String,
    /// Seed chromosome; defaults to the exact generator for the reference.
    #[arg(long)]
    seed_circuit: Option<PathBuf>,
    /// JSON search config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<usize>,
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    generations: Option<u64>,
    #[arg(long)]
    metric: Option<ErrorMetric>,
    #[arg(long)]
    e_min: Option<f64>,
    #[arg(long)]
    e_max: Option<f64>,
    /// Comma-separated, e.g. `mae,area`.
    #[arg(long, value_delimiter = ',')]
    objectives: Option<Vec<Objective>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trace_interval: Option<u64>,
    #[arg(long)]
    cost_table: Option<PathBuf>,
    /// Add a wall-clock column to trace.csv (makes it run-dependent).
    #[arg(long)]
    trace_timing: bool,
    #[arg(long)]
    out: PathBuf,
}

fn resolve(a: &Args) -> Result<SearchConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SearchConfig::default(),
    };
    macro_rules! set {
        ($($f:ident),*) => {$(if let Some(v) = a.$f.clone() { cfg.$f = v; })*};
    }
    set!(
        lambda,
        h,
        generations,
        metric,
        e_min,
        e_max,
        objectives,
        seed,
        trace_interval
    );
    cfg.validate(a.mode == Mode::Pareto).map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

pub fn run(a: Args, workers: usize) -> Result<()> {
    let log = RunLog::start("evolve", workers);
    let cfg = resolve(&a)?;
    let (family, width) = parse_family(&a.reference).ok_or_else(|| {
        usage(format!(
            "evolve needs --ref exact-multN or exact-addN, got {:?}",
            a.reference
        ))
    })?;
    let seed = match &a.seed_circuit {
        Some(p) => read_genome(p)?,
        None => seed_genome(family, width),
    };
    let reference = seed_genome(family, width).decode()?;
    let table = load_cost_table(a.cost_table.as_ref())?;
    let eval = Evaluator::new(&reference, a.reference.as_str(), &table, &Simulator::default())?;
    let config = json!({
        "mode": format!("{:?}", a.mode).to_lowercase(),
        "ref": a.reference,
        "seed_circuit": a.seed_circuit,
        "cost_table": a.cost_table,
        "search": cfg,
    });
    let provenance = |index: usize| -> BTreeMap<String, Value> {
        let mut p = BTreeMap::new();
        p.insert("source".into(), json!("evolve"));
        p.insert("search".into(), json!(cfg));
        p.insert("archive_index".into(), json!(index));
        p
    };
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    match a.mode {
        Mode::Single => match evolve_single(&seed, &eval, &cfg) {
            Ok(outcome) => {
                let best = &outcome.best;
                write_file(&a.out.join("best.cgp"), genome::serialize(&best.genome))?;
                write_json(
                    &a.out.join("best.json"),
                    &json!({"error": best.error, "cost": best.cost}),
                )?;
                let row = csv_row("best", &a.reference, &best.error, &best.cost);
                write_file(&a.out.join("best.csv"), format!("{CSV_HEADER}\n{row}\n"))?;
                write_file(&a.out.join("trace.csv"), outcome.trace.to_csv(false, a.trace_timing))?;
                println!("{CSV_HEADER}\n{row}");
            }
            Err(EvolveError::NoSolution(trace)) => {
                write_file(&a.out.join("trace.csv"), trace.to_csv(false, a.trace_timing))?;
                log.write(&a.out, config)?;
                anyhow::bail!(
                    "no solution: no candidate inside [{}, {}] for {}",
                    cfg.e_min,
                    cfg.e_max,
                    cfg.metric
                );
            }
            Err(e) => return Err(e.into()),
        },
        Mode::Pareto => {
            let outcome = evolve_pareto(&seed, &eval, &cfg)?;
            let mut members = outcome.archive;
            let key = |c: &axc_core::evolve::Candidate| cfg.objectives.iter().map(|o| o.value(c)).collect::<Vec<f64>>();
            members.sort_by(|x, y| {
                key(x)
                    .iter()
                    .zip(key(y).iter())
                    .map(|(p, q)| p.total_cmp(q))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let mut entries = Vec::with_capacity(members.len());
            for (i, m) in members.into_iter().enumerate() {
                let id = format!("evo-s{}-{:03}", cfg.seed, i);
                entries.push(LibraryEntry {
                    id,
                    genome: m.genome,
                    error: m.error,
                    cost: m.cost,
                    family,
                    bit_width: width,
                    provenance: provenance(i),
                });
            }
            save_manifest(&entries, &a.out.join("library.json"))?;
            write_file(&a.out.join("trace.csv"), outcome.trace.to_csv(true, a.trace_timing))?;
            println!(
                "archive of {} circuits written to {}",
                entries.len(),
                a.out.join("library.json").display()
            );
        }
    }
    log.write(&a.out, config)
}
