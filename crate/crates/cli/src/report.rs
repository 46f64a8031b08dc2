use std::path::PathBuf;

use anyhow::{Context, Result};
use axc_core::evolve::ErrorMetric;
use axc_core::library::{load_manifest, pareto_filter, CostAxis, Verify};
use axc_core::resilience::SweepReport;
use serde_json::json;

use crate::eval::{csv_row, CSV_HEADER};
use crate::util::{dir_of, usage, write_file, RunLog};

#[derive(clap::Args)]
pub struct Args {
    /// Library manifest to tabulate.
    #[arg(long, conflicts_with = "sweep")]
    manifest: Option<PathBuf>,
    /// Only the Pareto front for this metric against `--axis`.
    #[arg(long, requires = "manifest")]
    front: Option<ErrorMetric>,
    #[arg(long, default_value = "power")]
    axis: CostAxis,
    /// sweep.json or full.json from `resilience`.
    #[arg(long)]
    sweep: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

pub fn run(a: Args, workers: usize) -> Result<()> {
    let log = RunLog::start("report", workers);
    let csv = match (&a.manifest, &a.sweep) {
        (Some(m), None) => {
            let mut entries = load_manifest(m, Verify::All)?;
            if let Some(metric) = a.front {
                entries = pareto_filter(&entries, a.axis, metric)?;
            }
            let mut s = format!("{CSV_HEADER}\n");
            for e in &entries {
                let reference = e.cost.reference.clone().unwrap_or_default();
                s.push_str(&csv_row(&e.id, &reference, &e.error, &e.cost));
                s.push('\n');
            }
            s
        }
        (None, Some(p)) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let r: SweepReport = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            let mut s = String::new();
            if !r.layers.is_empty() {
                s.push_str(&r.layer_csv());
            }
            if !r.full.is_empty() {
                s.push_str(&r.full_csv());
            }
            s
        }
        _ => return Err(usage("give --manifest or --sweep")),
    };
    write_file(&a.out, &csv)?;
    log.write(
        dir_of(&a.out),
        json!({"manifest": a.manifest, "front": a.front, "axis": a.axis, "sweep": a.sweep}),
    )
}
