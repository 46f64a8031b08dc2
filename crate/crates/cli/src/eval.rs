use std::path::PathBuf;

use anyhow::{Context, Result};
use axc_core::cost::{cost_report, CostTable};
use axc_core::fmt::fixed;
use axc_core::metrics::{error_report_auto, EvalMode};
use axc_core::sim::IntegerFunction;
use axc_core::{CostReport, ErrorReport, GateCostTable, Simulator};
use clap::ValueEnum;
use serde_json::json;

use crate::util::{parse_family, read_genome, seed_genome, usage, write_file, write_json, Reference, RunLog};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    circuit: PathBuf,
    /// `exact-multN`, `exact-addN` or a .cgp file.
    #[arg(long = "ref")]
    reference: String,
    /// Sample count used when the input space exceeds the exhaustive cap.
    #[arg(long, default_value_t = 1 << 20)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = axc_core::sim::DEFAULT_EXHAUSTIVE_CAP)]
    exhaustive_cap: usize,
    /// JSON file of per-gate `{area, delay}` weights.
    #[arg(long)]
    cost_table: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Also write report.csv, report.json and run.json into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub const CSV_HEADER: &str = "circuit,reference,mode,n_i,n_o,er_pct,mae_pct,wce_pct,mse_norm,mre_pct,wcre_pct,mae,mse,wce,area,power_proxy,delay_proxy,relative_power,active_gates";

pub fn csv_row(name: &str, reference: &str, e: &ErrorReport, c: &CostReport) -> String {
    let mode = match e.mode {
        EvalMode::Exhaustive => "exhaustive".to_string(),
        EvalMode::Sampled { samples, .. } => format!("sampled{samples}"),
    };
    format!(
        "{name},{reference},{mode},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        e.inputs,
        e.outputs,
        fixed(e.er_pct(), 2),
        fixed(e.mae_pct(), 2),
        fixed(e.wce_pct(), 4),
        fixed(e.mse_norm(), 8),
        fixed(e.mre_pct(), 2),
        fixed(e.wcre_pct(), 2),
        fixed(e.mae, 4),
        fixed(e.mse, 4),
        e.wce,
        fixed(c.area, 2),
        fixed(c.power_proxy, 2),
        fixed(c.delay_proxy, 2),
        c.relative_power.map(|r| fixed(r, 4)).unwrap_or_default(),
        c.active_gates
    )
}

pub fn load_cost_table(path: Option<&PathBuf>) -> Result<GateCostTable> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(CostTable::from_json(&text)?)
        }
        None => Ok(CostTable::default()),
    }
}

pub fn run(a: Args, workers: usize) -> Result<()> {
    let log = RunLog::start("eval", workers);
    let genome = read_genome(&a.circuit)?;
    let circuit = genome.decode()?;
    let (reference, ref_name) = Reference::parse(&a.reference)?;
    if (circuit.input_count(), circuit.output_count()) != (reference.input_count(), reference.output_count()) {
        return Err(usage(format!(
            "circuit is {}->{} bits but {} is {}->{}",
            circuit.input_count(),
            circuit.output_count(),
            ref_name,
            reference.input_count(),
            reference.output_count()
        )));
    }
    let table = load_cost_table(a.cost_table.as_ref())?;
    let sim = Simulator::with_cap(a.exhaustive_cap);
    let error: ErrorReport = error_report_auto(&circuit, &reference, &sim, a.samples, a.seed)?;
    let ref_circuit = match (&reference, parse_family(&ref_name)) {
        (Reference::Circuit(c), _) => Some(c.clone()),
        (_, Some((family, width))) => Some(seed_genome(family, width).decode()?),
        _ => None,
    };
    let cost = cost_report(&circuit, &table, ref_circuit.as_ref().map(|c| (ref_name.as_str(), c)))?;
    let name = a
        .circuit
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("circuit")
        .to_string();
    let csv = format!("{CSV_HEADER}\n{}\n", csv_row(&name, &ref_name, &error, &cost));
    let report = json!({"circuit": name, "reference": ref_name, "error": error, "cost": cost});
    match a.format {
        Format::Csv => print!("{csv}"),
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    if let Some(dir) = &a.out {
        write_file(&dir.join("report.csv"), &csv)?;
        write_json(&dir.join("report.json"), &report)?;
        log.write(
            dir,
            json!({"circuit": a.circuit, "ref": ref_name, "samples": a.samples, "seed": a.seed,
                   "exhaustive_cap": a.exhaustive_cap, "cost_table": a.cost_table}),
        )?;
    }
    Ok(())
}
