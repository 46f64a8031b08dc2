use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use axc_core::fmt::fixed;
use axc_core::library::{load_manifest, Verify};
use axc_core::resilience::{
    full_replacement_eval, layerwise_sweep, spearman, train_tiny_net, BlobSpec, Dataset, MultiplierLut,
    QuantizedNetwork, SweepReport, TrainConfig,
};
use clap::Subcommand;
use serde_json::json;

use crate::lut::entry_lut;
use crate::util::{usage, write_file, write_json, RunLog};

#[derive(Subcommand)]
pub enum Command {
    /// Train the blob classifier and export it with its data splits.
    TrainTiny(TrainArgs),
    /// Replace one layer's multiplier at a time.
    Sweep(SweepArgs),
    /// Replace the multiplier in every layer.
    Full(SweepArgs),
}

#[derive(clap::Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = BlobSpec::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = TrainConfig::default().seed)]
    init_seed: u64,
    #[arg(long, default_value_t = BlobSpec::default().spread)]
    spread: f64,
    #[arg(long, default_value_t = BlobSpec::default().features)]
    features: usize,
    #[arg(long, default_value_t = BlobSpec::default().classes)]
    classes: usize,
    #[arg(long, default_value_t = BlobSpec::default().train_per_class)]
    train_per_class: usize,
    #[arg(long, default_value_t = BlobSpec::default().test_per_class)]
    test_per_class: usize,
    #[arg(long, default_value_t = TrainConfig::default().hidden)]
    hidden: usize,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    learning_rate: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
pub struct SweepArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Library whose entries become the multipliers under test.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// LUT files produced by `axc lut`.
    #[arg(long, num_args = 1..)]
    lut: Vec<PathBuf>,
    /// Prepend the exact multiplier as a control row.
    #[arg(long)]
    include_exact: bool,
    #[arg(long)]
    out: PathBuf,
}

fn train(a: TrainArgs, log: RunLog) -> Result<()> {
    if a.features == 0 || a.classes < 2 || a.classes > 256 || a.hidden == 0 {
        return Err(usage("need features >= 1, 2..=256 classes and hidden >= 1"));
    }
    if !(a.spread.is_finite() && a.spread >= 0.0) {
        return Err(usage("--spread must be finite and non-negative"));
    }
    let spec = BlobSpec {
        features: a.features,
        classes: a.classes,
        train_per_class: a.train_per_class,
        test_per_class: a.test_per_class,
        spread: a.spread,
        seed: a.seed,
    };
    let cfg = TrainConfig {
        hidden: a.hidden,
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        seed: a.init_seed,
    };
    let tiny = train_tiny_net::<f64>(&spec, &cfg);
    tiny.network.save(&a.out.join("net.json"))?;
    tiny.train.save(&a.out.join("train.ds"))?;
    tiny.test.save(&a.out.join("test.ds"))?;
    let summary = json!({
        "float_accuracy_pct": fixed(tiny.float_accuracy, 2),
        "quantized_accuracy_pct": fixed(tiny.quantized_accuracy, 2),
        "train_samples": tiny.train.len(),
        "test_samples": tiny.test.len(),
        "mult_counts": tiny.network.mult_counts(),
    });
    write_json(&a.out.join("summary.json"), &summary)?;
    println!(
        "float {}%, 8-bit exact {}%",
        fixed(tiny.float_accuracy, 2),
        fixed(tiny.quantized_accuracy, 2)
    );
    log.write(&a.out, json!({"blobs": spec, "train": cfg}))
}

fn read_lut(path: &Path) -> Result<MultiplierLut> {
    let f = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(MultiplierLut::read_from(BufReader::new(f))?)
}

fn gather(a: &SweepArgs) -> Result<(QuantizedNetwork, Dataset, Vec<MultiplierLut>)> {
    let net = QuantizedNetwork::load(&a.net).with_context(|| format!("loading {}", a.net.display()))?;
    let data = Dataset::load(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    let mut luts = Vec::new();
    if a.include_exact {
        luts.push(MultiplierLut::exact(8));
    }
    if let Some(m) = &a.manifest {
        for e in load_manifest(m, Verify::All)? {
            luts.push(entry_lut(&e)?);
        }
    }
    for p in &a.lut {
        luts.push(read_lut(p)?);
    }
    if luts.is_empty() {
        return Err(usage("no multipliers: give --manifest, --lut or --include-exact"));
    }
    Ok((net, data, luts))
}

fn config(a: &SweepArgs) -> serde_json::Value {
    json!({"net": a.net, "data": a.data, "manifest": a.manifest, "lut": a.lut, "include_exact": a.include_exact})
}

fn sweep(a: SweepArgs, log: RunLog) -> Result<()> {
    let (net, data, luts) = gather(&a)?;
    let report = layerwise_sweep(&net, &data, &luts)?;
    write_file(&a.out.join("layers.csv"), report.layer_csv())?;
    write_json(&a.out.join("sweep.json"), &report)?;
    println!(
        "baseline accuracy {}%, {} layer rows",
        fixed(report.baseline_accuracy, 2),
        report.layers.len()
    );
    log.write(&a.out, config(&a))
}

/// Spearman correlation of MAE against accuracy over the full-replacement rows.
pub fn mae_accuracy_correlation(report: &SweepReport) -> Option<f64> {
    let mae: Vec<f64> = report.full.iter().map(|r| r.error.mae).collect();
    let acc: Vec<f64> = report.full.iter().map(|r| r.accuracy).collect();
    spearman(&mae, &acc)
}

fn full(a: SweepArgs, log: RunLog) -> Result<()> {
    let (net, data, luts) = gather(&a)?;
    let report = full_replacement_eval(&net, &data, &luts)?;
    report.check()?;
    write_file(&a.out.join("full.csv"), report.full_csv())?;
    write_json(&a.out.join("full.json"), &report)?;
    let rho = mae_accuracy_correlation(&report);
    write_json(
        &a.out.join("summary.json"),
        &json!({
            "baseline_accuracy_pct": fixed(report.baseline_accuracy, 2),
            "multipliers": report.full.len(),
            "spearman_mae_accuracy": rho.map(|r| fixed(r, 4)),
        }),
    )?;
    println!(
        "baseline accuracy {}%, {} multipliers, spearman(mae, accuracy) = {}",
        fixed(report.baseline_accuracy, 2),
        report.full.len(),
        rho.map(|r| fixed(r, 4)).unwrap_or_else(|| "undefined".into())
    );
    log.write(&a.out, config(&a))
}

pub fn run(c: Command, workers: usize) -> Result<()> {
    match c {
        Command::TrainTiny(a) => train(a, RunLog::start("resilience train-tiny", workers)),
        Command::Sweep(a) => sweep(a, RunLog::start("resilience sweep", workers)),
        Command::Full(a) => full(a, RunLog::start("resilience full", workers)),
    }
}
