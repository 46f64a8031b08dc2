//! Word-parallel circuit simulation.
//!
//! Each wire carries `BLOCK_WORDS` machine words per pass, i.e. 1024
//! independent input vectors. Input index `v` assigns bit `j` of `v` to
//! primary input `j`; for arithmetic circuits operand A occupies the low half
//! of the inputs and operand B the high half, LSB first.

use std::ops::Range;

use rand::Rng;
use thiserror::Error;

use crate::circuit::Circuit;
use crate::genome::Gate;

/// Lanes per machine word.
pub const LANES: usize = 64;
/// Words per wire processed in one pass.
pub const BLOCK_WORDS: usize = 16;
pub const BLOCK_LANES: usize = LANES * BLOCK_WORDS;
pub const DEFAULT_EXHAUSTIVE_CAP: usize = 26;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("arity mismatch: expected {expected} inputs, got {found}")]
    Arity { expected: usize, found: usize },
    #[error("{inputs} inputs exceed the exhaustive cap of {cap}; use sampled evaluation instead")]
    ExhaustiveCap { inputs: usize, cap: usize },
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("{0} outputs exceed the 64-bit output word")]
    TooWide(usize),
}

/// A function from input index to unsigned output value.
pub trait IntegerFunction: Sync {
    fn input_count(&self) -> usize;
    fn output_count(&self) -> usize;
    /// `out[l] = f(start + l)`.
    fn eval_span(&self, start: u64, out: &mut [u64]);
    /// `out[l] = f(inputs[l])`.
    fn eval_points(&self, inputs: &[u64], out: &mut [u64]);
}

/// Per-wire word storage for a block of input vectors; lane `l` of every
/// wire belongs to the same input vector.
#[derive(Clone, Debug)]
pub struct BitBatch {
    words: usize,
    data: Vec<u64>,
}

impl BitBatch {
    pub fn new(circuit: &Circuit) -> Self {
        BitBatch {
            words: BLOCK_WORDS,
            data: vec![0; circuit.wire_count() * BLOCK_WORDS],
        }
    }

    pub fn wire(&self, w: usize) -> &[u64] {
        &self.data[w * self.words..(w + 1) * self.words]
    }

    fn wire_mut(&mut self, w: usize) -> &mut [u64] {
        &mut self.data[w * self.words..(w + 1) * self.words]
    }

    /// Loads consecutive vectors `start..start + 64 * words`; `start` must be
    /// a multiple of 64.
    fn load_span(&mut self, inputs: usize, start: u64, words: usize) {
        debug_assert_eq!(start % LANES as u64, 0);
        const PATTERNS: [u64; 6] = [
            0xAAAA_AAAA_AAAA_AAAA,
            0xCCCC_CCCC_CCCC_CCCC,
            0xF0F0_F0F0_F0F0_F0F0,
            0xFF00_FF00_FF00_FF00,
            0xFFFF_0000_FFFF_0000,
            0xFFFF_FFFF_0000_0000,
        ];
        for j in 0..inputs {
            let w = self.wire_mut(j);
            if let Some(&p) = PATTERNS.get(j) {
                w[..words].fill(p);
            } else {
                for (k, word) in w[..words].iter_mut().enumerate() {
                    let base = start + (k * LANES) as u64;
                    *word = if base >> j & 1 == 1 { !0 } else { 0 };
                }
            }
        }
    }

    /// Loads arbitrary vectors; lanes past `vectors.len()` are zero.
    fn load_points(&mut self, inputs: usize, vectors: &[u64]) {
        for (k, group) in vectors.chunks(LANES).enumerate() {
            let mut m = [0u64; 64];
            m[..group.len()].copy_from_slice(group);
            transpose64(&mut m);
            for (j, &bits) in m.iter().enumerate().take(inputs) {
                self.wire_mut(j)[k] = bits;
            }
        }
    }

    fn run(&mut self, circuit: &Circuit, words: usize) {
        let n_i = circuit.inputs();
        let stride = self.words;
        for (k, g) in circuit.gates().iter().enumerate() {
            let (src, dst) = self.data.split_at_mut((n_i + k) * stride);
            let dst = &mut dst[..words];
            let a = &src[g.a as usize * stride..][..words];
            let b = &src[g.b as usize * stride..][..words];
            macro_rules! lanes {
                (|$x:ident, $y:ident| $e:expr) => {
                    for ((d, &$x), &$y) in dst.iter_mut().zip(a).zip(b) {
                        *d = $e;
                    }
                };
            }
            match g.gate {
                Gate::Identity => dst.copy_from_slice(a),
                Gate::Not => lanes!(|x, _y| !x),
                Gate::And => lanes!(|x, y| x & y),
                Gate::Or => lanes!(|x, y| x | y),
                Gate::Xor => lanes!(|x, y| x ^ y),
                Gate::Nand => lanes!(|x, y| !(x & y)),
                Gate::Nor => lanes!(|x, y| !(x | y)),
                Gate::Xnor => lanes!(|x, y| !(x ^ y)),
                Gate::Const0 => dst.fill(0),
                Gate::Const1 => dst.fill(!0),
            }
        }
    }

    /// Writes the output integers of the first `lanes` vectors.
    fn store(&self, circuit: &Circuit, out: &mut [u64]) {
        for (k, chunk) in out.chunks_mut(LANES).enumerate() {
            let mut m = [0u64; 64];
            for (j, &o) in circuit.outputs().iter().enumerate() {
                m[j] = self.wire(o as usize)[k];
            }
            transpose64(&mut m);
            chunk.copy_from_slice(&m[..chunk.len()]);
        }
    }
}

/// In-place transpose of a 64x64 bit matrix: bit `c` of `m[r]` moves to bit
/// `r` of `m[c]`.
pub fn transpose64(m: &mut [u64; 64]) {
    let mut j = 32;
    let mut mask: u64 = 0x0000_0000_FFFF_FFFF;
    while j != 0 {
        for k in 0..64 {
            if k & j == 0 {
                let t = ((m[k] >> j) ^ m[k | j]) & mask;
                m[k] ^= t << j;
                m[k | j] ^= t;
            }
        }
        j >>= 1;
        mask ^= mask << j;
    }
}

impl IntegerFunction for Circuit {
    fn input_count(&self) -> usize {
        self.inputs()
    }

    fn output_count(&self) -> usize {
        self.output_count()
    }

    fn eval_span(&self, start: u64, out: &mut [u64]) {
        if !start.is_multiple_of(LANES as u64) {
            let points: Vec<u64> = (start..start + out.len() as u64).collect();
            return self.eval_points(&points, out);
        }
        let mut batch = BitBatch::new(self);
        for (i, chunk) in out.chunks_mut(BLOCK_LANES).enumerate() {
            let words = chunk.len().div_ceil(LANES);
            batch.load_span(self.inputs(), start + (i * BLOCK_LANES) as u64, words);
            batch.run(self, words);
            batch.store(self, chunk);
        }
    }

    fn eval_points(&self, inputs: &[u64], out: &mut [u64]) {
        assert_eq!(inputs.len(), out.len());
        let mut batch = BitBatch::new(self);
        for (vectors, chunk) in inputs.chunks(BLOCK_LANES).zip(out.chunks_mut(BLOCK_LANES)) {
            let words = chunk.len().div_ceil(LANES);
            batch.load_points(self.inputs(), vectors);
            batch.run(self, words);
            batch.store(self, chunk);
        }
    }
}

/// Evaluation driver holding the exhaustive-enumeration cap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Simulator {
    exhaustive_cap: usize,
}

impl Default for Simulator {
    fn default() -> Self {
        Simulator {
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
        }
    }
}

impl Simulator {
    pub fn with_cap(exhaustive_cap: usize) -> Self {
        Simulator {
            exhaustive_cap: exhaustive_cap.min(63),
        }
    }

    pub fn exhaustive_cap(&self) -> usize {
        self.exhaustive_cap
    }

    pub fn check_exhaustive(&self, inputs: usize) -> Result<(), SimError> {
        if inputs > self.exhaustive_cap {
            Err(SimError::ExhaustiveCap {
                inputs,
                cap: self.exhaustive_cap,
            })
        } else {
            Ok(())
        }
    }

    pub fn eval_vector(&self, circuit: &Circuit, input: &[bool]) -> Result<Vec<bool>, SimError> {
        if input.len() != circuit.inputs() {
            return Err(SimError::Arity {
                expected: circuit.inputs(),
                found: input.len(),
            });
        }
        let mut wires: Vec<bool> = input.to_vec();
        for g in circuit.gates() {
            let v = g.gate.eval_bit(wires[g.a as usize], wires[g.b as usize]);
            wires.push(v);
        }
        Ok(circuit.outputs().iter().map(|&o| wires[o as usize]).collect())
    }

    /// Streams `(index, output)` for every input vector in ascending order.
    pub fn eval_exhaustive<F, S>(&self, f: &F, sink: S) -> Result<(), SimError>
    where
        F: IntegerFunction + ?Sized,
        S: FnMut(u64, u64),
    {
        self.check_exhaustive(f.input_count())?;
        self.eval_range(f, 0..1u64 << f.input_count(), sink)
    }

    /// Streams `(index, output)` for the indices in `range`, in order.
    pub fn eval_range<F, S>(&self, f: &F, range: Range<u64>, mut sink: S) -> Result<(), SimError>
    where
        F: IntegerFunction + ?Sized,
        S: FnMut(u64, u64),
    {
        if f.output_count() > 64 {
            return Err(SimError::TooWide(f.output_count()));
        }
        const CHUNK: u64 = 1 << 16;
        let mut buf = vec![0u64; CHUNK as usize];
        let mut start = range.start;
        while start < range.end {
            let n = (range.end - start).min(CHUNK) as usize;
            f.eval_span(start, &mut buf[..n]);
            for (l, &o) in buf[..n].iter().enumerate() {
                sink(start + l as u64, o);
            }
            start += n as u64;
        }
        Ok(())
    }

    /// All outputs in index order.
    pub fn truth_table<F: IntegerFunction + ?Sized>(&self, f: &F) -> Result<Vec<u64>, SimError> {
        self.check_exhaustive(f.input_count())?;
        let mut out = vec![0; 1usize << f.input_count()];
        for (i, chunk) in out.chunks_mut(1 << 16).enumerate() {
            f.eval_span((i << 16) as u64, chunk);
        }
        Ok(out)
    }

    /// `count` uniform input vectors drawn from `rng`, with their outputs.
    pub fn eval_sampled<F, R>(&self, f: &F, count: usize, rng: &mut R) -> Result<Vec<(u64, u64)>, SimError>
    where
        F: IntegerFunction + ?Sized,
        R: Rng + ?Sized,
    {
        if count == 0 {
            return Err(SimError::ZeroSamples);
        }
        let inputs = sample_inputs(f.input_count(), count, rng);
        let mut outputs = vec![0; count];
        f.eval_points(&inputs, &mut outputs);
        Ok(inputs.into_iter().zip(outputs).collect())
    }
}

pub(crate) fn sample_inputs<R: Rng + ?Sized>(inputs: usize, count: usize, rng: &mut R) -> Vec<u64> {
    let mask = if inputs >= 64 { !0 } else { (1u64 << inputs) - 1 };
    (0..count).map(|_| rng.random::<u64>() & mask).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitGate;
    use crate::generators;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive_transpose(m: &[u64; 64]) -> [u64; 64] {
        let mut t = [0u64; 64];
        for (r, row) in m.iter().enumerate() {
            for (c, col) in t.iter_mut().enumerate() {
                *col |= (row >> c & 1) << r;
            }
        }
        t
    }

    #[test]
    fn transpose_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mut m = [0u64; 64];
            m.iter_mut().for_each(|w| *w = rng.random());
            let expect = naive_transpose(&m);
            transpose64(&mut m);
            assert_eq!(m, expect);
        }
    }

    #[test]
    fn two_bit_multiplier_vector() {
        let c = generators::array_multiplier(2).decode().unwrap();
        let sim = Simulator::default();
        // a = 3 (bits 1,1), b = 2 (bits 0,1)
        let out = sim.eval_vector(&c, &[true, true, false, true]).unwrap();
        let value: u64 = out.iter().enumerate().map(|(j, &b)| (b as u64) << j).sum();
        assert_eq!(value, 6);
        assert!(matches!(
            sim.eval_vector(&c, &[true]),
            Err(SimError::Arity { expected: 4, found: 1 })
        ));
    }

    #[test]
    fn const_one_everywhere() {
        let c = Circuit::new(
            5,
            vec![CircuitGate {
                gate: Gate::Const1,
                a: 0,
                b: 0,
            }],
            vec![5, 5, 5],
        )
        .unwrap();
        Simulator::default()
            .eval_exhaustive(&c, |_, o| assert_eq!(o, 0b111))
            .unwrap();
    }

    #[test]
    fn adder_overflow_bit() {
        let c = generators::ripple_carry_adder(8).decode().unwrap();
        assert_eq!(c.eval(255 | 1 << 8), 256);
        let mut out = [0u64];
        c.eval_points(&[255 | 1 << 8], &mut out);
        assert_eq!(out[0], 256);
    }

    #[test]
    fn exhaustive_stream_is_ordered() {
        let c = generators::array_multiplier(2).decode().unwrap();
        let mut seen = Vec::new();
        Simulator::default()
            .eval_exhaustive(&c, |i, o| seen.push((i, o)))
            .unwrap();
        assert_eq!(seen.len(), 16);
        assert!(seen.iter().enumerate().all(|(k, &(i, _))| k as u64 == i));
        assert_eq!(seen[3 | 3 << 2].1, 9);
    }

    #[test]
    fn word_parallel_matches_scalar_for_8x8_multiplier() {
        let c = generators::array_multiplier(8).decode().unwrap();
        let sim = Simulator::default();
        let mut n = 0;
        sim.eval_exhaustive(&c, |i, o| {
            let bits: Vec<bool> = (0..16).map(|j| i >> j & 1 == 1).collect();
            let scalar = sim.eval_vector(&c, &bits).unwrap();
            let value: u64 = scalar.iter().enumerate().map(|(j, &b)| (b as u64) << j).sum();
            assert_eq!(o, value);
            n += 1;
        })
        .unwrap();
        assert_eq!(n, 1 << 16);
    }

    #[test]
    fn unaligned_ranges_agree() {
        let c = generators::array_multiplier(3).decode().unwrap();
        let sim = Simulator::default();
        let mut got = Vec::new();
        sim.eval_range(&c, 5..50, |i, o| got.push((i, o))).unwrap();
        assert_eq!(got.len(), 45);
        for (i, o) in got {
            assert_eq!(o, c.eval(i));
        }
    }

    #[test]
    fn cap_refusal() {
        let c = generators::array_multiplier(16).decode().unwrap();
        let err = Simulator::default().eval_exhaustive(&c, |_, _| {}).unwrap_err();
        assert_eq!(err, SimError::ExhaustiveCap { inputs: 32, cap: 26 });
        assert!(err.to_string().contains("sampled"));
    }

    #[test]
    fn sampling_is_deterministic_and_correct() {
        let c = generators::ripple_carry_adder(16).decode().unwrap();
        let sim = Simulator::default();
        let run = |seed| {
            sim.eval_sampled(&c, 1000, &mut ChaCha8Rng::seed_from_u64(seed))
                .unwrap()
        };
        let first = run(9);
        assert_eq!(first, run(9));
        for (i, o) in first {
            assert_eq!(o, (i & 0xFFFF) + (i >> 16));
        }
        assert_eq!(
            sim.eval_sampled(&c, 0, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(SimError::ZeroSamples)
        );
    }
}
