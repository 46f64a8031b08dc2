//! (1+λ) search over CGP chromosomes.
//!
//! Single-objective mode minimises area while the chosen error metric stays
//! inside `[e_min, e_max]`; out-of-window candidates rank behind every
//! in-window one, ordered by their distance to the window. Offspring replace
//! the parent on ties. Multi-objective mode keeps an unbounded archive of
//! non-dominated points and draws each generation's parent uniformly from it.
//!
//! Offspring are generated serially from one ChaCha stream and evaluated on
//! the current rayon pool; all error sums are exact, so results do not depend
//! on the worker count.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::Circuit;
use crate::cost::{cost_report, CostError, CostMetrics, CostTable};
use crate::genome::{Genome, InvalidGenome};
use crate::metrics::{ErrorAccumulator, ErrorStats, EvalMode, MetricsError};
use crate::num::Scalar;
use crate::sim::{IntegerFunction, Simulator};

const CHUNK: usize = 1 << 14;

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("invalid search config: {0}")]
    Config(String),
    #[error(transparent)]
    Genome(#[from] InvalidGenome),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("no candidate inside the error window was found in {} generations", .0.generations)]
    NoSolution(Box<SearchTrace>),
}

/// Error statistic driving constraints and objectives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    Er,
    Mae,
    MaePct,
    Mse,
    Mre,
    Wce,
    WcePct,
    Wcre,
}

impl ErrorMetric {
    pub const ALL: [ErrorMetric; 8] = [
        ErrorMetric::Er,
        ErrorMetric::Mae,
        ErrorMetric::MaePct,
        ErrorMetric::Mse,
        ErrorMetric::Mre,
        ErrorMetric::Wce,
        ErrorMetric::WcePct,
        ErrorMetric::Wcre,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorMetric::Er => "er",
            ErrorMetric::Mae => "mae",
            ErrorMetric::MaePct => "mae_pct",
            ErrorMetric::Mse => "mse",
            ErrorMetric::Mre => "mre",
            ErrorMetric::Wce => "wce",
            ErrorMetric::WcePct => "wce_pct",
            ErrorMetric::Wcre => "wcre",
        }
    }

    pub fn value<T: Scalar>(self, r: &ErrorStats<T>) -> f64 {
        let v = match self {
            ErrorMetric::Er => r.er,
            ErrorMetric::Mae => r.mae,
            ErrorMetric::MaePct => r.mae_pct(),
            ErrorMetric::Mse => r.mse,
            ErrorMetric::Mre => r.mre,
            ErrorMetric::Wce => T::from_u64(r.wce).unwrap(),
            ErrorMetric::WcePct => r.wce_pct(),
            ErrorMetric::Wcre => r.wcre,
        };
        v.to_f64_lossy()
    }

    pub fn needs_relative(self) -> bool {
        matches!(self, ErrorMetric::Mre | ErrorMetric::Wcre)
    }
}

impl fmt::Display for ErrorMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ErrorMetric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.to_ascii_lowercase();
        ErrorMetric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown error metric {s:?}"))
    }
}

/// One axis of a multi-objective search; all are minimised.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Error(ErrorMetric),
    Area,
    Delay,
}

impl Objective {
    pub fn value(self, c: &Candidate) -> f64 {
        match self {
            Objective::Error(m) => m.value(&c.error),
            Objective::Area => c.cost.area,
            Objective::Delay => c.cost.delay_proxy,
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Error(m) => write!(f, "{m}"),
            Objective::Area => f.write_str("area"),
            Objective::Delay => f.write_str("delay"),
        }
    }
}

impl FromStr for Objective {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "area" | "power" => Ok(Objective::Area),
            "delay" => Ok(Objective::Delay),
            other => other.parse().map(Objective::Error),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub lambda: usize,
    pub h: usize,
    pub generations: u64,
    pub metric: ErrorMetric,
    pub e_min: f64,
    pub e_max: f64,
    pub objectives: Vec<Objective>,
    pub seed: u64,
    /// Trace rows are written on improvement and every `trace_interval`
    /// generations.
    pub trace_interval: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            lambda: 1,
            h: 5,
            generations: 1_000_000,
            metric: ErrorMetric::WcePct,
            e_min: 0.0,
            e_max: 0.0,
            objectives: vec![Objective::Error(ErrorMetric::Mae), Objective::Area],
            seed: 0,
            trace_interval: 1000,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self, multi_objective: bool) -> Result<(), EvolveError> {
        let bad = |m: &str| Err(EvolveError::Config(m.to_string()));
        if self.lambda == 0 {
            return bad("lambda must be at least 1");
        }
        if self.h == 0 {
            return bad("mutation intensity h must be at least 1");
        }
        if self.generations == 0 {
            return bad("generations must be at least 1");
        }
        if self.e_min.is_nan() || self.e_max.is_nan() || self.e_min > self.e_max {
            return bad("e_min must not exceed e_max");
        }
        if multi_objective && self.objectives.len() < 2 {
            return bad("multi-objective search needs at least two objectives");
        }
        Ok(())
    }
}

/// An evaluated chromosome.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub genome: Genome,
    pub circuit: Circuit,
    pub error: ErrorStats<f64>,
    pub cost: CostMetrics<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub generation: u64,
    pub best_cost: f64,
    pub best_error: f64,
    pub evaluations: u64,
    pub archive_size: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub records: Vec<TraceRecord>,
    pub generations: u64,
    pub evaluations: u64,
    pub seconds: f64,
}

impl SearchTrace {
    /// CSV with columns `generation,best_cost,best_error,evals[,archive_size][,seconds]`.
    /// Wall time is optional so that repeated runs can be compared byte for byte.
    pub fn to_csv(&self, with_archive: bool, with_seconds: bool) -> String {
        let mut s = String::from("generation,best_cost,best_error,evals");
        if with_archive {
            s.push_str(",archive_size");
        }
        if with_seconds {
            s.push_str(",seconds");
        }
        s.push('\n');
        for r in &self.records {
            s.push_str(&format!(
                "{},{},{},{}",
                r.generation,
                crate::fmt::fixed(r.best_cost, 4),
                crate::fmt::fixed(r.best_error, 6),
                r.evaluations
            ));
            if with_archive {
                s.push_str(&format!(",{}", r.archive_size));
            }
            if with_seconds {
                s.push_str(&format!(",{}", crate::fmt::fixed(r.seconds, 3)));
            }
            s.push('\n');
        }
        s
    }
}

/// Exhaustive fitness evaluation against a cached reference truth table.
pub struct Evaluator<'a> {
    reference: &'a Circuit,
    reference_name: String,
    table: &'a CostTable<f64>,
    truth: Vec<u64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        reference: &'a Circuit,
        reference_name: impl Into<String>,
        table: &'a CostTable<f64>,
        sim: &Simulator,
    ) -> Result<Self, EvolveError> {
        if reference.output_count() > 32 {
            return Err(MetricsError::TooWide(reference.output_count()).into());
        }
        let truth = sim.truth_table(reference).map_err(MetricsError::from)?;
        Ok(Evaluator {
            reference,
            reference_name: reference_name.into(),
            table,
            truth,
        })
    }

    pub fn reference(&self) -> &Circuit {
        self.reference
    }

    fn check_arity(&self, c: &Circuit) -> Result<(), EvolveError> {
        let a = (c.inputs(), c.output_count());
        let r = (self.reference.inputs(), self.reference.output_count());
        if a != r {
            return Err(MetricsError::Arity {
                approx: a,
                reference: r,
            }
            .into());
        }
        Ok(())
    }

    pub fn accumulate(&self, circuit: &Circuit, relative: bool) -> ErrorAccumulator {
        let fresh = || {
            if relative {
                ErrorAccumulator::new()
            } else {
                ErrorAccumulator::without_relative()
            }
        };
        self.truth
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(i, exact)| {
                let mut out = vec![0; exact.len()];
                circuit.eval_span((i * CHUNK) as u64, &mut out);
                let mut acc = fresh();
                acc.push_slices(&out, exact);
                acc
            })
            .reduce(fresh, |mut a, b| {
                a.merge(&b);
                a
            })
    }

    pub fn evaluate(&self, genome: Genome, circuit: Circuit, relative: bool) -> Result<Candidate, EvolveError> {
        let acc = self.accumulate(&circuit, relative);
        let error = acc.finish(circuit.inputs(), circuit.output_count(), EvalMode::Exhaustive);
        let cost = cost_report(&circuit, self.table, Some((&self.reference_name, self.reference)))?;
        Ok(Candidate {
            genome,
            circuit,
            error,
            cost,
        })
    }

    /// Full re-evaluation including the relative metrics.
    pub fn verify(&self, candidate: &Candidate) -> Result<Candidate, EvolveError> {
        let circuit = candidate.genome.decode()?;
        self.evaluate(candidate.genome.clone(), circuit, true)
    }
}

/// Ordering key of the single-objective fitness; smaller is better.
fn window_key(c: &Candidate, cfg: &SearchConfig) -> (u8, f64, f64) {
    let e = cfg.metric.value(&c.error);
    if e >= cfg.e_min && e <= cfg.e_max {
        (0, c.cost.area, 0.0)
    } else {
        let distance = if e < cfg.e_min { cfg.e_min - e } else { e - cfg.e_max };
        (1, distance, c.cost.area)
    }
}

fn key_le(a: (u8, f64, f64), b: (u8, f64, f64)) -> bool {
    a.0.cmp(&b.0)
        .then(a.1.total_cmp(&b.1))
        .then(a.2.total_cmp(&b.2))
        .is_le()
}

struct Clock {
    start: Instant,
}

impl Clock {
    fn seconds(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

/// Produces `lambda` evaluated offspring of `parent`, reusing the parent's
/// evaluation when a mutation only touched inactive genes.
fn offspring(
    parent: &Candidate,
    eval: &Evaluator<'_>,
    cfg: &SearchConfig,
    relative: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Candidate>, EvolveError> {
    let children: Vec<Genome> = (0..cfg.lambda).map(|_| parent.genome.mutate(cfg.h, rng)).collect();
    children
        .into_par_iter()
        .map(|g| {
            let circuit = g.decode()?;
            if circuit == parent.circuit {
                Ok(Candidate {
                    genome: g,
                    ..parent.clone()
                })
            } else {
                eval.evaluate(g, circuit, relative)
            }
        })
        .collect()
}

fn check_seed(seed: &Genome, eval: &Evaluator<'_>) -> Result<Circuit, EvolveError> {
    let c = seed.decode()?;
    eval.check_arity(&c)?;
    Ok(c)
}

#[derive(Clone, Debug)]
pub struct SingleOutcome {
    pub best: Candidate,
    pub trace: SearchTrace,
}

/// Area minimisation under the error window of `cfg`.
pub fn evolve_single(seed: &Genome, eval: &Evaluator<'_>, cfg: &SearchConfig) -> Result<SingleOutcome, EvolveError> {
    cfg.validate(false)?;
    let clock = Clock { start: Instant::now() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let relative = cfg.metric.needs_relative();
    let circuit = check_seed(seed, eval)?;
    let mut parent = eval.evaluate(seed.clone(), circuit, relative)?;
    let mut parent_key = window_key(&parent, cfg);
    let mut trace = SearchTrace {
        evaluations: 1,
        ..Default::default()
    };
    let record = |trace: &mut SearchTrace, generation: u64, p: &Candidate| {
        trace.records.push(TraceRecord {
            generation,
            best_cost: p.cost.area,
            best_error: cfg.metric.value(&p.error),
            evaluations: trace.evaluations,
            archive_size: 1,
            seconds: clock.seconds(),
        });
    };
    record(&mut trace, 0, &parent);

    for generation in 1..=cfg.generations {
        let kids = offspring(&parent, eval, cfg, relative, &mut rng)?;
        trace.evaluations += kids.len() as u64;
        let best = kids
            .into_iter()
            .map(|k| (window_key(&k, cfg), k))
            .reduce(|a, b| if key_le(a.0, b.0) { a } else { b })
            .expect("lambda >= 1");
        let improved = !key_le(parent_key, best.0);
        if key_le(best.0, parent_key) {
            parent_key = best.0;
            parent = best.1;
        }
        if improved || generation % cfg.trace_interval.max(1) == 0 || generation == cfg.generations {
            record(&mut trace, generation, &parent);
        }
    }
    trace.generations = cfg.generations;
    trace.seconds = clock.seconds();

    if parent_key.0 != 0 {
        return Err(EvolveError::NoSolution(Box::new(trace)));
    }
    let best = eval.verify(&parent)?;
    let e = cfg.metric.value(&best.error);
    debug_assert!(e >= cfg.e_min && e <= cfg.e_max);
    if !(e >= cfg.e_min && e <= cfg.e_max) {
        return Err(EvolveError::NoSolution(Box::new(trace)));
    }
    Ok(SingleOutcome { best, trace })
}

/// `a` dominates `b`: no worse everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        strictly |= x < y;
    }
    strictly
}

/// Unbounded archive of mutually non-dominated points. A newcomer equal to
/// a member on every objective replaces that member.
#[derive(Clone, Debug)]
pub struct ParetoArchive<T> {
    members: Vec<(Vec<f64>, T)>,
}

impl<T> Default for ParetoArchive<T> {
    fn default() -> Self {
        ParetoArchive { members: Vec::new() }
    }
}

impl<T> ParetoArchive<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns whether `item` entered the archive.
    pub fn insert(&mut self, objectives: Vec<f64>, item: T) -> bool {
        if self.members.iter().any(|(o, _)| dominates(o, &objectives)) {
            return false;
        }
        if let Some(slot) = self.members.iter_mut().find(|(o, _)| *o == objectives) {
            slot.1 = item;
            return true;
        }
        self.members.retain(|(o, _)| !dominates(&objectives, o));
        self.members.push((objectives, item));
        true
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&T> {
        self.members.get(i).map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], &T)> {
        self.members.iter().map(|(o, t)| (o.as_slice(), t))
    }

    pub fn into_items(self) -> Vec<T> {
        self.members.into_iter().map(|(_, t)| t).collect()
    }
}

#[derive(Clone, Debug)]
pub struct ParetoOutcome {
    pub archive: Vec<Candidate>,
    pub trace: SearchTrace,
}

/// Archive-based multi-objective search over `cfg.objectives`.
pub fn evolve_pareto(seed: &Genome, eval: &Evaluator<'_>, cfg: &SearchConfig) -> Result<ParetoOutcome, EvolveError> {
    cfg.validate(true)?;
    let clock = Clock { start: Instant::now() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let relative = cfg
        .objectives
        .iter()
        .any(|o| matches!(o, Objective::Error(m) if m.needs_relative()));
    let objectives = |c: &Candidate| cfg.objectives.iter().map(|o| o.value(c)).collect::<Vec<f64>>();
    let error_axis = cfg
        .objectives
        .iter()
        .find_map(|o| match o {
            Objective::Error(m) => Some(*m),
            _ => None,
        })
        .unwrap_or(cfg.metric);

    let circuit = check_seed(seed, eval)?;
    let first = eval.evaluate(seed.clone(), circuit, relative)?;
    let mut archive = ParetoArchive::new();
    archive.insert(objectives(&first), first);
    let mut trace = SearchTrace {
        evaluations: 1,
        ..Default::default()
    };
    let record = |trace: &mut SearchTrace, generation: u64, archive: &ParetoArchive<Candidate>| {
        let best_cost = archive.iter().map(|(_, c)| c.cost.area).fold(f64::INFINITY, f64::min);
        let best_error = archive
            .iter()
            .map(|(_, c)| error_axis.value(&c.error))
            .fold(f64::INFINITY, f64::min);
        trace.records.push(TraceRecord {
            generation,
            best_cost,
            best_error,
            evaluations: trace.evaluations,
            archive_size: archive.len(),
            seconds: clock.seconds(),
        });
    };
    record(&mut trace, 0, &archive);

    for generation in 1..=cfg.generations {
        let pick = rng.random_range(0..archive.len());
        let parent = archive.get(pick).expect("archive is never empty").clone();
        let kids = offspring(&parent, eval, cfg, relative, &mut rng)?;
        trace.evaluations += kids.len() as u64;
        for k in kids {
            archive.insert(objectives(&k), k);
        }
        if generation % cfg.trace_interval.max(1) == 0 || generation == cfg.generations {
            record(&mut trace, generation, &archive);
        }
    }
    trace.generations = cfg.generations;
    trace.seconds = clock.seconds();

    let mut verified = Vec::with_capacity(archive.len());
    for (obj, c) in archive.iter() {
        let v = eval.verify(c)?;
        debug_assert_eq!(objectives(&v), obj);
        verified.push(v);
    }
    Ok(ParetoOutcome {
        archive: verified,
        trace,
    })
}
