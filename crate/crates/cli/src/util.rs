use std::fmt;
use std::fs;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use axc_core::generators::{self, FunctionalModel};
use axc_core::library::Family;
use axc_core::sim::IntegerFunction;
use axc_core::{genome, Circuit, Genome};
use serde_json::{json, Value};

/// Bad invocation detected after argument parsing; exits with code 1.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// `exact-mult8` / `exact-add8`.
pub fn parse_family(name: &str) -> Option<(Family, usize)> {
    let (family, width) = match name.strip_prefix("exact-mult") {
        Some(w) => (Family::Multiplier, w),
        None => (Family::Adder, name.strip_prefix("exact-add")?),
    };
    let width: usize = width.parse().ok()?;
    (1..=32).contains(&width).then_some((family, width))
}

/// A named exact function or a circuit file.
pub enum Reference {
    Model(FunctionalModel),
    Circuit(Circuit),
}

impl Reference {
    pub fn parse(spec: &str) -> Result<(Reference, String)> {
        if let Some((family, width)) = parse_family(spec) {
            return Ok((Reference::Model(family.reference_model(width)), spec.to_string()));
        }
        if spec.starts_with("exact-") {
            return Err(usage(format!(
                "unknown reference {spec:?}; use exact-multN, exact-addN or a .cgp path"
            )));
        }
        let c = read_genome(Path::new(spec))?.decode()?;
        Ok((Reference::Circuit(c), spec.to_string()))
    }
}

impl IntegerFunction for Reference {
    fn input_count(&self) -> usize {
        match self {
            Reference::Model(m) => m.input_count(),
            Reference::Circuit(c) => c.input_count(),
        }
    }
    fn output_count(&self) -> usize {
        match self {
            Reference::Model(m) => m.output_count(),
            Reference::Circuit(c) => c.output_count(),
        }
    }
    fn eval_span(&self, start: u64, out: &mut [u64]) {
        match self {
            Reference::Model(m) => m.eval_span(start, out),
            Reference::Circuit(c) => c.eval_span(start, out),
        }
    }
    fn eval_points(&self, inputs: &[u64], out: &mut [u64]) {
        match self {
            Reference::Model(m) => m.eval_points(inputs, out),
            Reference::Circuit(c) => c.eval_points(inputs, out),
        }
    }
}

/// Exact seed circuit of a family.
pub fn seed_genome(family: Family, width: usize) -> Genome {
    match family {
        Family::Adder => generators::ripple_carry_adder(width),
        Family::Multiplier => generators::array_multiplier(width),
    }
}

pub fn read_genome(path: &Path) -> Result<Genome> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    genome::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text)
}

/// Reproducibility record; the only place wall-clock data is written.
pub struct RunLog {
    command: String,
    started: SystemTime,
    clock: Instant,
    workers: usize,
}

impl RunLog {
    pub fn start(command: &str, workers: usize) -> Self {
        RunLog {
            command: command.to_string(),
            started: SystemTime::now(),
            clock: Instant::now(),
            workers,
        }
    }

    pub fn write(&self, dir: &Path, config: Value) -> Result<()> {
        let started = self
            .started
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        let record = json!({
            "tool": "axc",
            "version": axc_core::VERSION,
            "command": self.command,
            "config": config,
            "workers": self.workers,
            "argv": std::env::args().collect::<Vec<_>>(),
            "started_unix": started,
            "elapsed_seconds": self.clock.elapsed().as_secs_f64(),
        });
        write_json(&dir.join("run.json"), &record)
    }
}

/// Directory that holds `path`, for run records beside output files.
pub fn dir_of(path: &Path) -> &Path {
    path.parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
}
