use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use axc_core::generators::{self, BamSpec};
use axc_core::library::{save_manifest, Family, LibraryEntry};
use axc_core::{genome, GateCostTable, Genome};
use clap::ValueEnum;
use serde_json::{json, Value};

use crate::util::{dir_of, usage, write_file, RunLog};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Kind {
    /// Ripple-carry adder.
    Adder,
    /// Exact array multiplier.
    Mult,
    /// Array multiplier keeping the top `--keep` bits of each operand.
    Trunc,
    /// Broken-array multiplier with `--h` and `--v`.
    Bam,
    /// Library of exact, truncated and broken-array multipliers.
    Baselines,
}

#[derive(clap::Args)]
pub struct Args {
    kind: Kind,
    #[arg(long, default_value_t = 8)]
    bits: usize,
    #[arg(long)]
    keep: Option<usize>,
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    v: Option<usize>,
    /// Output .cgp file, or library.json for `baselines`.
    #[arg(long)]
    out: PathBuf,
}

fn baselines(bits: usize) -> Result<Vec<(String, Genome, Value)>> {
    let mut out = vec![(
        "exact".to_string(),
        generators::array_multiplier(bits),
        json!({"kind": "exact"}),
    )];
    for keep in (1..bits).rev() {
        let (_, g) = generators::truncated_multiplier(bits, keep);
        out.push((format!("trunc{keep}"), g, json!({"kind": "truncated", "keep": keep})));
    }
    for h in 0..bits.min(4) {
        for v in (h + 1)..(2 * bits - 1) {
            let (_, g) = generators::bam_multiplier(BamSpec::new(bits, h, v)?);
            out.push((format!("bam-h{h}-v{v}"), g, json!({"kind": "bam", "h": h, "v": v})));
        }
    }
    Ok(out)
}

pub fn run(a: Args, workers: usize) -> Result<()> {
    let log = RunLog::start("gen", workers);
    if a.bits == 0 || a.bits > 16 {
        return Err(usage("--bits must be in 1..=16"));
    }
    let config =
        json!({"kind": format!("{:?}", a.kind).to_lowercase(), "bits": a.bits, "keep": a.keep, "h": a.h, "v": a.v});
    let genome = match a.kind {
        Kind::Adder => generators::ripple_carry_adder(a.bits),
        Kind::Mult => generators::array_multiplier(a.bits),
        Kind::Trunc => {
            let keep = a.keep.ok_or_else(|| usage("trunc needs --keep"))?;
            if keep > a.bits {
                return Err(usage("--keep must not exceed --bits"));
            }
            generators::truncated_multiplier(a.bits, keep).1
        }
        Kind::Bam => {
            let (h, v) = a.h.zip(a.v).ok_or_else(|| usage("bam needs --h and --v"))?;
            let spec = BamSpec::new(a.bits, h, v).map_err(|e| usage(e.to_string()))?;
            generators::bam_multiplier(spec).1
        }
        Kind::Baselines => {
            let table = GateCostTable::default();
            let mut entries = Vec::new();
            for (id, g, prov) in baselines(a.bits)? {
                let mut p = BTreeMap::new();
                p.insert("generator".to_string(), prov);
                entries.push(LibraryEntry::evaluate(id, g, Family::Multiplier, a.bits, &table, p)?);
            }
            save_manifest(&entries, &a.out)?;
            println!("wrote {} entries to {}", entries.len(), a.out.display());
            return log.write(dir_of(&a.out), config);
        }
    };
    write_file(&a.out, genome::serialize(&genome))?;
    log.write(dir_of(&a.out), config)
}
