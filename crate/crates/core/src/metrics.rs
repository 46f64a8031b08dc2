//! Error statistics of an approximate function against a reference.
//!
//! All sums are kept as exact integers so that any partition of the input
//! space, merged in any order, produces bit-identical reports. The relative
//! error sum stores each term `|d| / max(1, o)` as a 32.32 fixed-point
//! integer; the worst relative error is kept as an exact fraction.

use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{pow2, Scalar};
use crate::sim::{sample_inputs, IntegerFunction, SimError, Simulator};

const REL_FRAC_BITS: u32 = 32;
/// Vectors per parallel work item.
const CHUNK: u64 = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("arity mismatch: approximation is {approx:?}, reference is {reference:?} (inputs, outputs)")]
    Arity {
        approx: (usize, usize),
        reference: (usize, usize),
    },
    #[error("{0} outputs exceed the 32-bit limit of the error accumulators")]
    TooWide(usize),
    #[error("sampled reports need at least 1000 samples, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// How the statistics were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum EvalMode {
    Exhaustive,
    Sampled { samples: u64, seed: u64 },
}

/// Exact, mergeable accumulator of the six error statistics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorAccumulator {
    count: u64,
    mismatches: u64,
    abs_sum: u128,
    sq_sum: u128,
    rel_sum: u128,
    wce: u64,
    wcre_num: u64,
    wcre_den: u64,
    relative: bool,
}

impl Default for ErrorAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl ErrorAccumulator {
    pub fn new() -> Self {
        ErrorAccumulator {
            count: 0,
            mismatches: 0,
            abs_sum: 0,
            sq_sum: 0,
            rel_sum: 0,
            wce: 0,
            wcre_num: 0,
            wcre_den: 1,
            relative: true,
        }
    }

    /// Skips MRE/WCRE, which need a division per mismatching vector.
    pub fn without_relative() -> Self {
        ErrorAccumulator {
            relative: false,
            ..Self::new()
        }
    }

    pub fn tracks_relative(&self) -> bool {
        self.relative
    }

    #[inline]
    pub fn push(&mut self, approx: u64, exact: u64) {
        self.count += 1;
        if approx == exact {
            return;
        }
        let d = approx.abs_diff(exact);
        self.mismatches += 1;
        self.abs_sum += d as u128;
        self.sq_sum += (d as u128) * (d as u128);
        self.wce = self.wce.max(d);
        if self.relative {
            let den = exact.max(1);
            self.rel_sum += ((d as u128) << REL_FRAC_BITS) / den as u128;
            if (d as u128) * (self.wcre_den as u128) > (self.wcre_num as u128) * (den as u128) {
                let r = Ratio::new(d, den);
                self.wcre_num = *r.numer();
                self.wcre_den = *r.denom();
            }
        }
    }

    pub fn push_slices(&mut self, approx: &[u64], exact: &[u64]) {
        for (&a, &e) in approx.iter().zip(exact) {
            self.push(a, e);
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.count += other.count;
        self.mismatches += other.mismatches;
        self.abs_sum += other.abs_sum;
        self.sq_sum += other.sq_sum;
        self.rel_sum += other.rel_sum;
        self.wce = self.wce.max(other.wce);
        if (other.wcre_num as u128) * (self.wcre_den as u128) > (self.wcre_num as u128) * (other.wcre_den as u128) {
            self.wcre_num = other.wcre_num;
            self.wcre_den = other.wcre_den;
        }
        self.relative &= other.relative;
    }

    pub fn count(&self) -> u64 {
        self.count
    }
    pub fn mismatches(&self) -> u64 {
        self.mismatches
    }
    pub fn abs_sum(&self) -> u128 {
        self.abs_sum
    }
    pub fn sq_sum(&self) -> u128 {
        self.sq_sum
    }
    pub fn wce(&self) -> u64 {
        self.wce
    }

    /// Worst relative error as an exact fraction.
    pub fn wcre_exact(&self) -> Ratio<u64> {
        Ratio::new(self.wcre_num, self.wcre_den)
    }

    pub fn finish<T: Scalar>(&self, inputs: usize, outputs: usize, mode: EvalMode) -> ErrorStats<T> {
        let n = T::from_u64(self.count.max(1)).expect("count fits");
        let big = T::from_u128_lossy;
        let rel = big(self.rel_sum) / pow2::<T>(REL_FRAC_BITS as usize);
        ErrorStats {
            er: T::from_u64(self.mismatches).unwrap() / n,
            mae: big(self.abs_sum) / n,
            mse: big(self.sq_sum) / n,
            mre: rel / n,
            wce: self.wce,
            wcre: T::from_u64(self.wcre_num).unwrap() / T::from_u64(self.wcre_den).unwrap(),
            inputs,
            outputs,
            mode,
        }
    }
}

/// The six error statistics plus the normalised views used in reports.
///
/// `er`, `mre` and `wcre` are fractions; `mae`, `mse` and `wce` are in output
/// units. In sampled mode `wce` and `wcre` are lower bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorStats<T> {
    pub er: T,
    pub mae: T,
    pub mse: T,
    pub mre: T,
    pub wce: u64,
    pub wcre: T,
    pub inputs: usize,
    pub outputs: usize,
    pub mode: EvalMode,
}

impl<T: Scalar> ErrorStats<T> {
    fn range(&self) -> T {
        pow2(self.outputs)
    }

    pub fn er_pct(&self) -> T {
        self.er * T::lit(100.0)
    }
    /// MAE as a percentage of `2^outputs`.
    pub fn mae_pct(&self) -> T {
        T::lit(100.0) * self.mae / self.range()
    }
    /// WCE as a percentage of `2^outputs`.
    pub fn wce_pct(&self) -> T {
        T::lit(100.0) * T::from_u64(self.wce).unwrap() / self.range()
    }
    /// MSE divided by `2^(2 * outputs)`.
    pub fn mse_norm(&self) -> T {
        self.mse / (self.range() * self.range())
    }
    pub fn mre_pct(&self) -> T {
        self.mre * T::lit(100.0)
    }
    pub fn wcre_pct(&self) -> T {
        self.wcre * T::lit(100.0)
    }

    pub fn is_exhaustive(&self) -> bool {
        self.mode == EvalMode::Exhaustive
    }

    pub fn is_zero(&self) -> bool {
        self.er == T::zero()
            && self.mae == T::zero()
            && self.mse == T::zero()
            && self.mre == T::zero()
            && self.wce == 0
            && self.wcre == T::zero()
    }
}

/// Flat JSON shape of a report.
#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct ReportJson<T> {
    er: T,
    mae: T,
    mse: T,
    mre: T,
    wce: u64,
    wcre: T,
    mae_pct: T,
    wce_pct: T,
    mse_norm: T,
    #[serde(flatten)]
    mode: EvalMode,
    n_i: usize,
    n_o: usize,
    #[serde(default)]
    worst_case_is_lower_bound: bool,
}

impl<T: Scalar> Serialize for ErrorStats<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ReportJson {
            er: self.er,
            mae: self.mae,
            mse: self.mse,
            mre: self.mre,
            wce: self.wce,
            wcre: self.wcre,
            mae_pct: self.mae_pct(),
            wce_pct: self.wce_pct(),
            mse_norm: self.mse_norm(),
            mode: self.mode,
            n_i: self.inputs,
            n_o: self.outputs,
            worst_case_is_lower_bound: !self.is_exhaustive(),
        }
        .serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for ErrorStats<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = ReportJson::<T>::deserialize(d)?;
        let stats = ErrorStats {
            er: j.er,
            mae: j.mae,
            mse: j.mse,
            mre: j.mre,
            wce: j.wce,
            wcre: j.wcre,
            inputs: j.n_i,
            outputs: j.n_o,
            mode: j.mode,
        };
        if stats.mae_pct() != j.mae_pct || stats.wce_pct() != j.wce_pct || stats.mse_norm() != j.mse_norm {
            return Err(serde::de::Error::custom(
                "normalized fields disagree with absolute fields",
            ));
        }
        Ok(stats)
    }
}

fn check_arity<A, R>(approx: &A, reference: &R) -> Result<(), MetricsError>
where
    A: IntegerFunction + ?Sized,
    R: IntegerFunction + ?Sized,
{
    let a = (approx.input_count(), approx.output_count());
    let r = (reference.input_count(), reference.output_count());
    if a != r {
        return Err(MetricsError::Arity {
            approx: a,
            reference: r,
        });
    }
    if a.1 > 32 {
        return Err(MetricsError::TooWide(a.1));
    }
    Ok(())
}

/// Exact accumulator over the whole input space, computed in parallel on the
/// current rayon pool.
pub fn exhaustive_accumulator<A, R>(
    approx: &A,
    reference: &R,
    sim: &Simulator,
    relative: bool,
) -> Result<ErrorAccumulator, MetricsError>
where
    A: IntegerFunction + ?Sized,
    R: IntegerFunction + ?Sized,
{
    check_arity(approx, reference)?;
    sim.check_exhaustive(approx.input_count())?;
    let total = 1u64 << approx.input_count();
    Ok(accumulate_range(approx, reference, 0..total, relative))
}

/// Accumulates `range` (any bounds) in chunks; chunk results are merged
/// exactly, so the outcome does not depend on scheduling.
pub fn accumulate_range<A, R>(
    approx: &A,
    reference: &R,
    range: std::ops::Range<u64>,
    relative: bool,
) -> ErrorAccumulator
where
    A: IntegerFunction + ?Sized,
    R: IntegerFunction + ?Sized,
{
    let fresh = || {
        if relative {
            ErrorAccumulator::new()
        } else {
            ErrorAccumulator::without_relative()
        }
    };
    let chunks = (range.end - range.start).div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = range.start + c * CHUNK;
            let n = (range.end - start).min(CHUNK) as usize;
            let mut a = vec![0; n];
            let mut r = vec![0; n];
            approx.eval_span(start, &mut a);
            reference.eval_span(start, &mut r);
            let mut acc = fresh();
            acc.push_slices(&a, &r);
            acc
        })
        .reduce(fresh, |mut x, y| {
            x.merge(&y);
            x
        })
}

/// Exhaustive report over all `2^inputs` vectors.
pub fn error_report<T, A, R>(approx: &A, reference: &R, sim: &Simulator) -> Result<ErrorStats<T>, MetricsError>
where
    T: Scalar,
    A: IntegerFunction,
    R: IntegerFunction,
{
    let acc = exhaustive_accumulator(approx, reference, sim, true)?;
    Ok(acc.finish(approx.input_count(), approx.output_count(), EvalMode::Exhaustive))
}

/// Report over `samples` uniform input vectors drawn from a ChaCha stream
/// seeded with `seed`.
pub fn sampled_error_report<T, A, R>(
    approx: &A,
    reference: &R,
    samples: usize,
    seed: u64,
) -> Result<ErrorStats<T>, MetricsError>
where
    T: Scalar,
    A: IntegerFunction,
    R: IntegerFunction,
{
    check_arity(approx, reference)?;
    if samples < 1000 {
        return Err(MetricsError::TooFewSamples(samples));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = sample_inputs(approx.input_count(), samples, &mut rng);
    let acc = inputs
        .par_chunks(CHUNK as usize)
        .map(|chunk| {
            let mut a = vec![0; chunk.len()];
            let mut r = vec![0; chunk.len()];
            approx.eval_points(chunk, &mut a);
            reference.eval_points(chunk, &mut r);
            let mut acc = ErrorAccumulator::new();
            acc.push_slices(&a, &r);
            acc
        })
        .reduce(ErrorAccumulator::new, |mut x, y| {
            x.merge(&y);
            x
        });
    Ok(acc.finish(
        approx.input_count(),
        approx.output_count(),
        EvalMode::Sampled {
            samples: samples as u64,
            seed,
        },
    ))
}

/// Exhaustive report when the input space is under the cap, sampled
/// otherwise.
pub fn error_report_auto<T, A, R>(
    approx: &A,
    reference: &R,
    sim: &Simulator,
    samples: usize,
    seed: u64,
) -> Result<ErrorStats<T>, MetricsError>
where
    T: Scalar,
    A: IntegerFunction,
    R: IntegerFunction,
{
    if approx.input_count() <= sim.exhaustive_cap() {
        error_report(approx, reference, sim)
    } else {
        sampled_error_report(approx, reference, samples, seed)
    }
}
