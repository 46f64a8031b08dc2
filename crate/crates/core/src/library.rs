//! Circuit libraries: manifests on disk, Pareto filtering and even-spread
//! selection.
//!
//! A manifest is `library.json` next to a `circuits/` directory holding one
//! `.cgp` file per entry.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::circuit::Circuit;
use crate::cost::{cost_report, CostError, CostTable};
use crate::evolve::ErrorMetric;
use crate::generators::{self, FunctionalModel};
use crate::genome::{self, Genome, InvalidGenome, ParseError};
use crate::metrics::{self, EvalMode, MetricsError};
use crate::sim::Simulator;
use crate::{CostReport, ErrorReport, MANIFEST_VERSION};

/// Fallback sample count for families too wide to enumerate.
pub const SAMPLED_VECTORS: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("entries mix families or bit widths: {0}")]
    MixedFamilies(String),
    #[error("even-spread selection on an empty front")]
    EmptyFront,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("duplicate entry id {0:?}")]
    DuplicateId(String),
    #[error("entry {id:?}: missing genome file {path}")]
    MissingGenome { id: String, path: PathBuf },
    #[error("entry {id:?}: {source}")]
    Parse { id: String, source: ParseError },
    #[error("entry {id:?}: {source}")]
    Invalid { id: String, source: InvalidGenome },
    #[error("entry {id:?}: report mismatch in {field}")]
    ReportMismatch { id: String, field: &'static str },
    #[error("entry {id:?}: {source}")]
    Metrics { id: String, source: MetricsError },
    #[error("entry {id:?}: {source}")]
    Cost { id: String, source: CostError },
    #[error("unsupported manifest version {0}")]
    Version(u32),
    #[error("malformed manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LibraryError + '_ {
    move |source| LibraryError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Adder,
    Multiplier,
}

impl Family {
    /// Exact reference function of this family at `width` bits.
    pub fn reference_model(self, width: usize) -> FunctionalModel {
        match self {
            Family::Adder => FunctionalModel::exact_adder(width),
            Family::Multiplier => FunctionalModel::exact_multiplier(width),
        }
    }

    /// Exact seed circuit used as the relative-power reference.
    pub fn reference_circuit(self, width: usize) -> Circuit {
        let g = match self {
            Family::Adder => generators::ripple_carry_adder(width),
            Family::Multiplier => generators::array_multiplier(width),
        };
        g.decode().expect("generated seeds are valid")
    }

    pub fn io_shape(self, width: usize) -> (usize, usize) {
        match self {
            Family::Adder => (2 * width, width + 1),
            Family::Multiplier => (2 * width, 2 * width),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Adder => "adder",
            Family::Multiplier => "multiplier",
        })
    }
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "adder" | "add" => Ok(Family::Adder),
            "multiplier" | "mult" | "mul" => Ok(Family::Multiplier),
            _ => Err(format!("unknown family {s:?}")),
        }
    }
}

/// Cost field used as the x axis of a front.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostAxis {
    Area,
    Power,
    Delay,
}

impl CostAxis {
    pub fn value(self, c: &CostReport) -> f64 {
        match self {
            CostAxis::Area => c.area,
            CostAxis::Power => c.power_proxy,
            CostAxis::Delay => c.delay_proxy,
        }
    }
}

impl FromStr for CostAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "area" => Ok(CostAxis::Area),
            "power" => Ok(CostAxis::Power),
            "delay" => Ok(CostAxis::Delay),
            _ => Err(format!("unknown cost axis {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LibraryEntry {
    pub id: String,
    pub genome: Genome,
    pub error: ErrorReport,
    pub cost: CostReport,
    pub family: Family,
    pub bit_width: usize,
    pub provenance: BTreeMap<String, Value>,
}

impl LibraryEntry {
    /// Evaluates `genome` against the family reference and builds an entry.
    pub fn evaluate(
        id: impl Into<String>,
        genome: Genome,
        family: Family,
        bit_width: usize,
        table: &CostTable<f64>,
        provenance: BTreeMap<String, Value>,
    ) -> Result<Self, LibraryError> {
        let id = id.into();
        let circuit = genome
            .decode()
            .map_err(|source| LibraryError::Invalid { id: id.clone(), source })?;
        let reference = family.reference_model(bit_width);
        let error = metrics::error_report_auto(&circuit, &reference, &Simulator::default(), SAMPLED_VECTORS, 0)
            .map_err(|source| LibraryError::Metrics { id: id.clone(), source })?;
        let ref_circuit = family.reference_circuit(bit_width);
        let cost = cost_report(&circuit, table, Some((reference.name(), &ref_circuit)))
            .map_err(|source| LibraryError::Cost { id: id.clone(), source })?;
        Ok(LibraryEntry {
            id,
            genome,
            error,
            cost,
            family,
            bit_width,
            provenance,
        })
    }

    pub fn circuit(&self) -> Circuit {
        self.genome.decode().expect("library entries hold valid genomes")
    }
}

fn check_uniform(entries: &[LibraryEntry]) -> Result<(), LibraryError> {
    if let Some(first) = entries.first() {
        if let Some(e) = entries
            .iter()
            .find(|e| (e.family, e.bit_width) != (first.family, first.bit_width))
        {
            return Err(LibraryError::MixedFamilies(format!(
                "{} is a {}-bit {}, {} is a {}-bit {}",
                first.id, first.bit_width, first.family, e.id, e.bit_width, e.family
            )));
        }
    }
    Ok(())
}

/// Indices of the non-dominated points under (minimise x, minimise y), in
/// increasing x. Of points tied on both axes only the one with the smallest
/// tiebreak key survives.
pub fn pareto_indices<K: Ord>(points: &[(f64, f64)], tiebreak: impl Fn(usize) -> K) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .0
            .total_cmp(&points[b].0)
            .then(points[a].1.total_cmp(&points[b].1))
            .then_with(|| tiebreak(a).cmp(&tiebreak(b)))
    });
    let mut best = f64::INFINITY;
    let mut front = Vec::new();
    for i in order {
        if front.is_empty() || points[i].1 < best {
            best = points[i].1;
            front.push(i);
        }
    }
    front
}

/// Non-dominated entries under (minimise `x`, minimise `y`).
pub fn pareto_filter(entries: &[LibraryEntry], x: CostAxis, y: ErrorMetric) -> Result<Vec<LibraryEntry>, LibraryError> {
    check_uniform(entries)?;
    let points: Vec<(f64, f64)> = entries.iter().map(|e| (x.value(&e.cost), y.value(&e.error))).collect();
    Ok(pareto_indices(&points, |i| entries[i].id.as_str())
        .into_iter()
        .map(|i| entries[i].clone())
        .collect())
}

/// Picks the member nearest to each of `k` evenly spaced targets over the
/// axis range (ties go to the lower axis value) and drops repeats.
pub fn select_even_spread_indices(values: &[f64], k: usize) -> Result<Vec<usize>, LibraryError> {
    if values.is_empty() {
        return Err(LibraryError::EmptyFront);
    }
    if k == 0 {
        return Err(LibraryError::ZeroK);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut picked = Vec::new();
    for t in 0..k {
        let target = if k == 1 {
            lo
        } else if t == k - 1 {
            hi
        } else {
            lo + (hi - lo) * t as f64 / (k - 1) as f64
        };
        let nearest = (0..values.len())
            .min_by(|&a, &b| {
                let (da, db) = ((values[a] - target).abs(), (values[b] - target).abs());
                da.total_cmp(&db).then(values[a].total_cmp(&values[b])).then(a.cmp(&b))
            })
            .expect("non-empty");
        if !picked.contains(&nearest) {
            picked.push(nearest);
        }
    }
    Ok(picked)
}

pub fn select_even_spread(front: &[LibraryEntry], k: usize, axis: CostAxis) -> Result<Vec<LibraryEntry>, LibraryError> {
    let values: Vec<f64> = front.iter().map(|e| axis.value(&e.cost)).collect();
    Ok(select_even_spread_indices(&values, k)?
        .into_iter()
        .map(|i| front[i].clone())
        .collect())
}

/// Metrics curated by default, in selection order.
pub const UNION_METRICS: [ErrorMetric; 5] = [
    ErrorMetric::Mae,
    ErrorMetric::Wce,
    ErrorMetric::Mre,
    ErrorMetric::Wcre,
    ErrorMetric::Er,
];

/// Per metric: Pareto front against `axis`, then `k` evenly spread members;
/// the union is deduplicated by phenotype.
pub fn union_dedup_selection(
    entries: &[LibraryEntry],
    metrics: &[ErrorMetric],
    k: usize,
    axis: CostAxis,
) -> Result<Vec<LibraryEntry>, LibraryError> {
    if entries.is_empty() {
        return Ok(Vec::new());
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for &m in metrics {
        let front = pareto_filter(entries, axis, m)?;
        for e in select_even_spread(&front, k, axis)? {
            if seen.insert(e.circuit()) {
                out.push(e);
            }
        }
    }
    Ok(out)
}

/// Removes phenotype duplicates, keeping the first occurrence.
pub fn dedup_phenotypes(entries: Vec<LibraryEntry>) -> Vec<LibraryEntry> {
    let mut seen = HashSet::new();
    entries.into_iter().filter(|e| seen.insert(e.circuit())).collect()
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    cgp_path: String,
    error: ErrorReport,
    cost: CostReport,
    #[serde(default)]
    provenance: BTreeMap<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    family: Option<Family>,
    bit_width: Option<usize>,
    entries: Vec<ManifestEntry>,
}

/// How many entries `load_manifest` re-evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verify {
    All,
    /// Only the entry with this index (wrapped into range).
    One(usize),
    Nothing,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), LibraryError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| LibraryError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

/// Writes `library.json` at `path` and the genomes under `circuits/` beside it.
pub fn save_manifest(entries: &[LibraryEntry], path: &Path) -> Result<(), LibraryError> {
    check_uniform(entries)?;
    let mut ids = HashSet::new();
    for e in entries {
        if !ids.insert(e.id.as_str()) {
            return Err(LibraryError::DuplicateId(e.id.clone()));
        }
    }
    let root = path.parent().unwrap_or(Path::new(""));
    let mut records = Vec::with_capacity(entries.len());
    for e in entries {
        let rel = format!("circuits/{}.cgp", e.id);
        write_atomic(&root.join(&rel), genome::serialize(&e.genome).as_bytes())?;
        records.push(ManifestEntry {
            id: e.id.clone(),
            cgp_path: rel,
            error: e.error.clone(),
            cost: e.cost.clone(),
            provenance: e.provenance.clone(),
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        family: entries.first().map(|e| e.family),
        bit_width: entries.first().map(|e| e.bit_width),
        entries: records,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn load_manifest(path: &Path, verify: Verify) -> Result<Vec<LibraryEntry>, LibraryError> {
    load_manifest_with(path, verify, &CostTable::default())
}

/// Loads and re-validates a manifest; selected entries have their error and
/// cost reports recomputed and compared exactly with the stored ones.
pub fn load_manifest_with(
    path: &Path,
    verify: Verify,
    table: &CostTable<f64>,
) -> Result<Vec<LibraryEntry>, LibraryError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.version != MANIFEST_VERSION {
        return Err(LibraryError::Version(manifest.version));
    }
    let root = path.parent().unwrap_or(Path::new(""));
    let (family, bit_width) = match (manifest.family, manifest.bit_width) {
        (Some(f), Some(w)) => (f, w),
        _ if manifest.entries.is_empty() => return Ok(Vec::new()),
        _ => return Err(LibraryError::MixedFamilies("manifest lacks family or bit_width".into())),
    };
    let n = manifest.entries.len();
    let mut ids = HashSet::new();
    let mut out = Vec::with_capacity(n);
    for (i, m) in manifest.entries.into_iter().enumerate() {
        let id = m.id;
        if !ids.insert(id.clone()) {
            return Err(LibraryError::DuplicateId(id));
        }
        let gpath = root.join(&m.cgp_path);
        let text = fs::read_to_string(&gpath).map_err(|_| LibraryError::MissingGenome {
            id: id.clone(),
            path: gpath,
        })?;
        let genome = genome::parse(&text).map_err(|source| LibraryError::Parse { id: id.clone(), source })?;
        let circuit = genome
            .decode()
            .map_err(|source| LibraryError::Invalid { id: id.clone(), source })?;
        if (circuit.inputs(), circuit.output_count()) != family.io_shape(bit_width) {
            return Err(LibraryError::MixedFamilies(format!(
                "{id} does not have the {bit_width}-bit {family} shape"
            )));
        }
        let check = match verify {
            Verify::All => true,
            Verify::One(k) => i == k % n,
            Verify::Nothing => false,
        };
        if check {
            verify_entry(&id, &circuit, &m.error, &m.cost, family, bit_width, table)?;
        }
        out.push(LibraryEntry {
            id,
            genome,
            error: m.error,
            cost: m.cost,
            family,
            bit_width,
            provenance: m.provenance,
        });
    }
    Ok(out)
}

fn verify_entry(
    id: &str,
    circuit: &Circuit,
    error: &ErrorReport,
    cost: &CostReport,
    family: Family,
    bit_width: usize,
    table: &CostTable<f64>,
) -> Result<(), LibraryError> {
    let reference = family.reference_model(bit_width);
    let metrics_err = |source| LibraryError::Metrics {
        id: id.to_string(),
        source,
    };
    let fresh: ErrorReport = match error.mode {
        EvalMode::Exhaustive => {
            metrics::error_report(circuit, &reference, &Simulator::default()).map_err(metrics_err)?
        }
        EvalMode::Sampled { samples, seed } => {
            metrics::sampled_error_report(circuit, &reference, samples as usize, seed).map_err(metrics_err)?
        }
    };
    let mismatch = |field| {
        Err(LibraryError::ReportMismatch {
            id: id.to_string(),
            field,
        })
    };
    let fields: [(&'static str, bool); 6] = [
        ("er", fresh.er == error.er),
        ("mae", fresh.mae == error.mae),
        ("mse", fresh.mse == error.mse),
        ("mre", fresh.mre == error.mre),
        ("wce", fresh.wce == error.wce),
        ("wcre", fresh.wcre == error.wcre),
    ];
    if let Some((f, _)) = fields.iter().find(|(_, ok)| !ok) {
        return mismatch(f);
    }
    if fresh != *error {
        return mismatch("shape");
    }
    let ref_circuit = family.reference_circuit(bit_width);
    let name = cost.reference.clone().unwrap_or_else(|| reference.name().to_string());
    let fresh_cost = cost_report(
        circuit,
        table,
        cost.reference.as_ref().map(|_| (name.as_str(), &ref_circuit)),
    )
    .map_err(|source| LibraryError::Cost {
        id: id.to_string(),
        source,
    })?;
    if fresh_cost != *cost {
        return mismatch("cost");
    }
    Ok(())
}
