use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use axc_core::library::{load_manifest, LibraryEntry, Verify};
use axc_core::resilience::MultiplierLut;
use serde_json::json;

use crate::util::{dir_of, read_genome, usage, RunLog};

#[derive(clap::Args)]
pub struct Args {
    #[arg(long, conflicts_with = "circuit")]
    manifest: Option<PathBuf>,
    /// Entry id; all entries when omitted (then `--out` is a directory).
    #[arg(long, requires = "manifest")]
    id: Option<String>,
    /// A bare .cgp multiplier; its relative power is taken as 1.
    #[arg(long)]
    circuit: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

pub fn entry_lut(e: &LibraryEntry) -> Result<MultiplierLut> {
    Ok(MultiplierLut::build(&e.circuit(), e.id.clone(), &e.cost)?)
}

pub fn write_lut(lut: &MultiplierLut, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let f = File::create(path).with_context(|| format!("writing {}", path.display()))?;
    lut.write_to(BufWriter::new(f))?;
    Ok(())
}

pub fn run(a: Args, workers: usize) -> Result<()> {
    let log = RunLog::start("lut", workers);
    let config = json!({"manifest": a.manifest, "id": a.id, "circuit": a.circuit, "out": a.out});
    match (&a.manifest, &a.circuit) {
        (Some(m), None) => {
            let entries = load_manifest(m, Verify::All)?;
            match &a.id {
                Some(id) => {
                    let e = entries
                        .iter()
                        .find(|e| &e.id == id)
                        .ok_or_else(|| anyhow::anyhow!("no entry {id:?} in {}", m.display()))?;
                    write_lut(&entry_lut(e)?, &a.out)?;
                    log.write(dir_of(&a.out), config)
                }
                None => {
                    for e in &entries {
                        write_lut(&entry_lut(e)?, &a.out.join(format!("{}.lut", e.id)))?;
                    }
                    log.write(&a.out, config)
                }
            }
        }
        (None, Some(c)) => {
            let circuit = read_genome(c)?.decode()?;
            let id = c.file_stem().and_then(|s| s.to_str()).unwrap_or("circuit");
            write_lut(&MultiplierLut::build_with_power(&circuit, id, 1.0)?, &a.out)?;
            log.write(dir_of(&a.out), config)
        }
        _ => Err(usage("give --manifest or --circuit")),
    }
}
