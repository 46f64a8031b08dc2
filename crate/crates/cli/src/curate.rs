use std::collections::HashSet;
use std::path::PathBuf;

use anyhow::Result;
use axc_core::evolve::ErrorMetric;
use axc_core::library::{
    dedup_phenotypes, load_manifest, pareto_filter, save_manifest, select_even_spread, union_dedup_selection, CostAxis,
    Verify, UNION_METRICS,
};
use clap::ValueEnum;
use serde_json::json;

use crate::util::{dir_of, usage, RunLog};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Mode {
    /// Non-dominated entries for one metric.
    Pareto,
    /// Pareto front, then `--k` evenly spread members.
    Spread,
    /// Spread selection for several metrics, united and deduplicated.
    Union,
}

#[derive(clap::Args)]
pub struct Args {
    /// Input manifests; entries are merged, keeping the first of any id.
    #[arg(long = "library", required = true, num_args = 1..)]
    libraries: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "spread")]
    mode: Mode,
    #[arg(long, default_value = "mae")]
    metric: ErrorMetric,
    /// Metrics for `union`; defaults to mae,wce,mre,wcre,er.
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<ErrorMetric>>,
    #[arg(long, default_value = "power")]
    axis: CostAxis,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Output manifest path (library.json).
    #[arg(long)]
    out: PathBuf,
}

pub fn run(a: Args, workers: usize) -> Result<()> {
    let log = RunLog::start("curate", workers);
    if a.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    let mut entries = Vec::new();
    let mut ids = HashSet::new();
    for lib in &a.libraries {
        for e in load_manifest(lib, Verify::All)? {
            if ids.insert(e.id.clone()) {
                entries.push(e);
            }
        }
    }
    let entries = dedup_phenotypes(entries);
    let metrics = a.metrics.clone().unwrap_or(UNION_METRICS.to_vec());
    let selected = if entries.is_empty() {
        Vec::new()
    } else {
        match a.mode {
            Mode::Pareto => pareto_filter(&entries, a.axis, a.metric)?,
            Mode::Spread => select_even_spread(&pareto_filter(&entries, a.axis, a.metric)?, a.k, a.axis)?,
            Mode::Union => union_dedup_selection(&entries, &metrics, a.k, a.axis)?,
        }
    };
    save_manifest(&selected, &a.out)?;
    println!(
        "selected {} of {} entries into {}",
        selected.len(),
        entries.len(),
        a.out.display()
    );
    log.write(
        dir_of(&a.out),
        json!({"libraries": a.libraries, "mode": format!("{:?}", a.mode).to_lowercase(), "metric": a.metric,
               "metrics": metrics, "axis": a.axis, "k": a.k}),
    )
}
