//! Full product tables of unsigned n x n multipliers.

use std::io::{Read, Write};

use crate::cost::CostMetrics;
use crate::metrics::{ErrorAccumulator, EvalMode};
use crate::num::Scalar;
use crate::sim::{IntegerFunction, Simulator};
use crate::ErrorReport;

use super::ResilienceError;

const MAGIC: &[u8; 8] = b"AXCLUT01";

/// `table[a | b << bits] = a * b` (approximately). In inference the first
/// operand is the weight magnitude and the second the activation.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierLut {
    bits: usize,
    table: Vec<u32>,
    source: String,
    relative_power: f64,
}

impl MultiplierLut {
    /// Exact products.
    pub fn exact(bits: usize) -> Self {
        let mask = (1u32 << bits) - 1;
        let table = (0..1u32 << (2 * bits)).map(|i| (i & mask) * (i >> bits)).collect();
        MultiplierLut {
            bits,
            table,
            source: format!("exact-mult{bits}"),
            relative_power: 1.0,
        }
    }

    /// Tabulates `source` exhaustively; `relative_power` comes from its cost report.
    pub fn build<F, T>(source: &F, source_id: impl Into<String>, cost: &CostMetrics<T>) -> Result<Self, ResilienceError>
    where
        F: IntegerFunction,
        T: Scalar,
    {
        let rel = cost.relative_power.map(|r| r.to_f64_lossy()).unwrap_or(1.0);
        Self::build_with_power(source, source_id, rel)
    }

    pub fn build_with_power<F: IntegerFunction>(
        source: &F,
        source_id: impl Into<String>,
        relative_power: f64,
    ) -> Result<Self, ResilienceError> {
        let n_i = source.input_count();
        let n_o = source.output_count();
        if !n_i.is_multiple_of(2) || n_o != n_i || n_i == 0 || n_i > 24 {
            return Err(ResilienceError::LutArity {
                inputs: n_i,
                outputs: n_o,
            });
        }
        let table = Simulator::default().truth_table(source)?;
        Ok(MultiplierLut {
            bits: n_i / 2,
            table: table.into_iter().map(|v| v as u32).collect(),
            source: source_id.into(),
            relative_power,
        })
    }

    /// A table of a given function; used for synthetic multipliers in tests.
    pub fn from_fn(bits: usize, source: impl Into<String>, relative_power: f64, f: impl Fn(u32, u32) -> u32) -> Self {
        let mask = (1u32 << bits) - 1;
        let table = (0..1u32 << (2 * bits))
            .map(|i| {
                let p = f(i & mask, i >> bits);
                assert!(bits >= 16 || p >> (2 * bits) == 0, "product exceeds {} bits", 2 * bits);
                p
            })
            .collect();
        MultiplierLut {
            bits,
            table,
            source: source.into(),
            relative_power,
        }
    }

    pub fn bits(&self) -> usize {
        self.bits
    }
    pub fn source(&self) -> &str {
        &self.source
    }
    pub fn relative_power(&self) -> f64 {
        self.relative_power
    }
    pub fn table(&self) -> &[u32] {
        &self.table
    }

    #[inline]
    pub fn get(&self, a: u32, b: u32) -> u32 {
        self.table[(a | b << self.bits) as usize]
    }

    /// Products `a * x` for every second operand `x`.
    pub fn row(&self, a: u32) -> Vec<u32> {
        (0..1u32 << self.bits).map(|b| self.get(a, b)).collect()
    }

    pub fn is_exact(&self) -> bool {
        let mask = (1u32 << self.bits) - 1;
        self.table
            .iter()
            .enumerate()
            .all(|(i, &p)| p == (i as u32 & mask) * (i as u32 >> self.bits))
    }

    /// Error statistics of the table against exact multiplication.
    pub fn error_report(&self) -> ErrorReport {
        let mask = (1u64 << self.bits) - 1;
        let mut acc = ErrorAccumulator::new();
        for (i, &p) in self.table.iter().enumerate() {
            let i = i as u64;
            acc.push(p as u64, (i & mask) * (i >> self.bits));
        }
        acc.finish(2 * self.bits, 2 * self.bits, EvalMode::Exhaustive)
    }

    /// `AXCLUT01`, u32 bits, f64 relative power, u32 id length, id bytes,
    /// then `4^bits` u32 products; all little-endian.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.bits as u32).to_le_bytes())?;
        w.write_all(&self.relative_power.to_le_bytes())?;
        w.write_all(&(self.source.len() as u32).to_le_bytes())?;
        w.write_all(self.source.as_bytes())?;
        let mut buf = Vec::with_capacity(self.table.len() * 4);
        for p in &self.table {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, ResilienceError> {
        let bad = |m: &str| ResilienceError::Format(format!("LUT file: {m}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let mut u = [0u8; 4];
        let mut f = [0u8; 8];
        r.read_exact(&mut u)?;
        let bits = u32::from_le_bytes(u) as usize;
        if bits == 0 || bits > 12 {
            return Err(bad("unsupported width"));
        }
        r.read_exact(&mut f)?;
        let relative_power = f64::from_le_bytes(f);
        r.read_exact(&mut u)?;
        let len = u32::from_le_bytes(u) as usize;
        if len > 4096 {
            return Err(bad("id too long"));
        }
        let mut id = vec![0u8; len];
        r.read_exact(&mut id)?;
        let source = String::from_utf8(id).map_err(|_| bad("id is not utf-8"))?;
        let mut raw = vec![0u8; 4 << (2 * bits)];
        r.read_exact(&mut raw)?;
        let table: Vec<u32> = raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if table.iter().any(|&p| p as u64 >> (2 * bits) != 0) {
            return Err(bad("product wider than 2*bits"));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(bad("trailing bytes"));
        }
        Ok(MultiplierLut {
            bits,
            table,
            source,
            relative_power,
        })
    }
}
