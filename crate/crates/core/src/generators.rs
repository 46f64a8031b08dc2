//! Exact seed circuits and classic approximate multipliers.
//!
//! Multipliers are built as a row-by-row ripple array over an AND
//! partial-product matrix. Omitted partial products are constant zero and
//! constants are folded while building, so truncated and broken-array
//! variants come out structurally smaller than the exact array.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::genome::{CgpParams, FunctionSet, Gate, Genome, Node};
use crate::sim::IntegerFunction;

/// Closed-form integer function used as a reference or baseline model.
#[derive(Clone)]
pub struct FunctionalModel {
    name: String,
    inputs: usize,
    outputs: usize,
    func: Arc<dyn Fn(u64) -> u64 + Send + Sync>,
}

impl FunctionalModel {
    pub fn new(
        name: impl Into<String>,
        inputs: usize,
        outputs: usize,
        func: impl Fn(u64) -> u64 + Send + Sync + 'static,
    ) -> Self {
        assert!((1..=64).contains(&inputs) && (1..=64).contains(&outputs));
        FunctionalModel {
            name: name.into(),
            inputs,
            outputs,
            func: Arc::new(func),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, input: u64) -> u64 {
        let v = (self.func)(input);
        debug_assert!(
            self.outputs == 64 || v >> self.outputs == 0,
            "{} output overflows",
            self.name
        );
        v
    }

    /// Unsigned `width x width` multiplier.
    pub fn exact_multiplier(width: usize) -> Self {
        let mask = low_mask(width);
        FunctionalModel::new(format!("exact-mult{width}"), 2 * width, 2 * width, move |v| {
            (v & mask) * (v >> width & mask)
        })
    }

    /// Unsigned `width`-bit adder with carry out.
    pub fn exact_adder(width: usize) -> Self {
        let mask = low_mask(width);
        FunctionalModel::new(format!("exact-add{width}"), 2 * width, width + 1, move |v| {
            (v & mask) + (v >> width & mask)
        })
    }
}

impl fmt::Debug for FunctionalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionalModel")
            .field("name", &self.name)
            .field("inputs", &self.inputs)
            .field("outputs", &self.outputs)
            .finish()
    }
}

impl IntegerFunction for FunctionalModel {
    fn input_count(&self) -> usize {
        self.inputs
    }
    fn output_count(&self) -> usize {
        self.outputs
    }
    fn eval_span(&self, start: u64, out: &mut [u64]) {
        for (l, o) in out.iter_mut().enumerate() {
            *o = self.eval(start + l as u64);
        }
    }
    fn eval_points(&self, inputs: &[u64], out: &mut [u64]) {
        for (i, o) in inputs.iter().zip(out) {
            *o = self.eval(*i);
        }
    }
}

fn low_mask(width: usize) -> u64 {
    if width >= 64 {
        !0
    } else {
        (1u64 << width) - 1
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BamError {
    #[error("operand width must be in 1..=32, got {0}")]
    Width(usize),
    #[error("horizontal break level {h} exceeds width {width}")]
    Horizontal { h: usize, width: usize },
    #[error("vertical break level {v} exceeds {max}")]
    Vertical { v: usize, max: usize },
}

/// Broken-array multiplier: partial product `a_j * b_i` (row `i`, column
/// `i + j`) is omitted when `i < h` or `i + j < v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BamSpec {
    width: usize,
    h: usize,
    v: usize,
}

impl BamSpec {
    pub fn new(width: usize, h: usize, v: usize) -> Result<Self, BamError> {
        if !(1..=32).contains(&width) {
            return Err(BamError::Width(width));
        }
        if h > width {
            return Err(BamError::Horizontal { h, width });
        }
        if v > 2 * width {
            return Err(BamError::Vertical { v, max: 2 * width });
        }
        Ok(BamSpec { width, h, v })
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn h(&self) -> usize {
        self.h
    }
    pub fn v(&self) -> usize {
        self.v
    }

    pub fn keeps(&self, row: usize, col: usize) -> bool {
        row >= self.h && row + col >= self.v
    }
}

/// Unsigned ripple-carry adder: inputs `a` (low `width` bits) and `b`,
/// `width + 1` outputs.
pub fn ripple_carry_adder(width: usize) -> Genome {
    assert!((1..=32).contains(&width), "adder width must be in 1..=32");
    let mut net = NetBuilder::new(2 * width);
    let mut carry = Sig::Zero;
    let mut outs = Vec::with_capacity(width + 1);
    for j in 0..width {
        let (s, c) = net.full_add(net.input(j), net.input(width + j), carry);
        outs.push(s);
        carry = c;
    }
    outs.push(carry);
    net.finish(&outs)
}

/// Exact unsigned array multiplier with `2 * width` outputs.
pub fn array_multiplier(width: usize) -> Genome {
    partial_product_multiplier(width, |_, _| true)
}

/// Multiplier of the operands with their low `width - keep` bits zeroed.
pub fn truncated_multiplier(width: usize, keep: usize) -> (FunctionalModel, Genome) {
    assert!((1..=32).contains(&width) && keep <= width, "need keep <= width <= 32");
    let drop = width - keep;
    let mask = low_mask(width) & !low_mask(drop);
    let model = FunctionalModel::new(format!("trunc{width}-{keep}"), 2 * width, 2 * width, move |v| {
        (v & mask) * (v >> width & mask)
    });
    let genome = partial_product_multiplier(width, |i, j| i >= drop && j >= drop);
    (model, genome)
}

pub fn bam_multiplier(spec: BamSpec) -> (FunctionalModel, Genome) {
    let n = spec.width;
    let model = FunctionalModel::new(format!("bam{n}-h{}-v{}", spec.h, spec.v), 2 * n, 2 * n, move |v| {
        let mut sum = 0;
        for i in 0..n {
            if v >> (n + i) & 1 == 0 {
                continue;
            }
            for j in 0..n {
                if v >> j & 1 == 1 && spec.keeps(i, j) {
                    sum += 1u64 << (i + j);
                }
            }
        }
        sum
    });
    (model, partial_product_multiplier(n, |i, j| spec.keeps(i, j)))
}

/// Array multiplier keeping partial product `a_j * b_i` iff `keep(i, j)`.
pub fn partial_product_multiplier(width: usize, keep: impl Fn(usize, usize) -> bool) -> Genome {
    assert!((1..=32).contains(&width), "multiplier width must be in 1..=32");
    let n = width;
    let mut net = NetBuilder::new(2 * n);
    let mut acc = vec![Sig::Zero; 2 * n];
    for i in 0..n {
        let b = net.input(n + i);
        let mut carry = Sig::Zero;
        for j in 0..n {
            let pp = if keep(i, j) {
                net.and(net.input(j), b)
            } else {
                Sig::Zero
            };
            let (s, c) = net.full_add(acc[i + j], pp, carry);
            acc[i + j] = s;
            carry = c;
        }
        for slot in acc.iter_mut().skip(i + n) {
            let (s, c) = net.full_add(*slot, carry, Sig::Zero);
            *slot = s;
            carry = c;
        }
    }
    net.finish(&acc)
}

/// Signal during construction: a known constant or a wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Sig {
    Zero,
    One,
    Wire(u32),
}

/// Linear-layout netlist builder with constant folding.
struct NetBuilder {
    inputs: usize,
    nodes: Vec<(Gate, u32, u32)>,
}

impl NetBuilder {
    fn new(inputs: usize) -> Self {
        NetBuilder {
            inputs,
            nodes: Vec::new(),
        }
    }

    fn input(&self, j: usize) -> Sig {
        Sig::Wire(j as u32)
    }

    fn push(&mut self, gate: Gate, a: u32, b: u32) -> Sig {
        self.nodes.push((gate, a, b));
        Sig::Wire((self.inputs + self.nodes.len() - 1) as u32)
    }

    fn not(&mut self, x: Sig) -> Sig {
        match x {
            Sig::Zero => Sig::One,
            Sig::One => Sig::Zero,
            Sig::Wire(w) => self.push(Gate::Not, w, w),
        }
    }

    fn and(&mut self, x: Sig, y: Sig) -> Sig {
        match (x, y) {
            (Sig::Zero, _) | (_, Sig::Zero) => Sig::Zero,
            (Sig::One, s) | (s, Sig::One) => s,
            (Sig::Wire(a), Sig::Wire(b)) if a == b => x,
            (Sig::Wire(a), Sig::Wire(b)) => self.push(Gate::And, a, b),
        }
    }

    fn or(&mut self, x: Sig, y: Sig) -> Sig {
        match (x, y) {
            (Sig::One, _) | (_, Sig::One) => Sig::One,
            (Sig::Zero, s) | (s, Sig::Zero) => s,
            (Sig::Wire(a), Sig::Wire(b)) if a == b => x,
            (Sig::Wire(a), Sig::Wire(b)) => self.push(Gate::Or, a, b),
        }
    }

    fn xor(&mut self, x: Sig, y: Sig) -> Sig {
        match (x, y) {
            (Sig::Zero, s) | (s, Sig::Zero) => s,
            (Sig::One, s) | (s, Sig::One) => self.not(s),
            (Sig::Wire(a), Sig::Wire(b)) if a == b => Sig::Zero,
            (Sig::Wire(a), Sig::Wire(b)) => self.push(Gate::Xor, a, b),
        }
    }

    /// Returns `(sum, carry)`.
    fn full_add(&mut self, a: Sig, b: Sig, c: Sig) -> (Sig, Sig) {
        // Put constants last so the folded forms reduce to half adders.
        let mut ops = [a, b, c];
        ops.sort_by_key(|s| matches!(s, Sig::Zero | Sig::One));
        let [a, b, c] = ops;
        let t = self.xor(a, b);
        let sum = self.xor(t, c);
        let ab = self.and(a, b);
        let tc = self.and(t, c);
        let carry = self.or(ab, tc);
        (sum, carry)
    }

    fn finish(mut self, outs: &[Sig]) -> Genome {
        let mut consts = [None, None];
        let mut selectors = Vec::with_capacity(outs.len());
        for &s in outs {
            let wire = match s {
                Sig::Wire(w) => w,
                Sig::Zero | Sig::One => {
                    let idx = (s == Sig::One) as usize;
                    match consts[idx] {
                        Some(w) => w,
                        None => {
                            let gate = if idx == 1 { Gate::Const1 } else { Gate::Const0 };
                            let Sig::Wire(w) = self.push(gate, 0, 0) else {
                                unreachable!()
                            };
                            consts[idx] = Some(w);
                            w
                        }
                    }
                }
            };
            selectors.push(wire);
        }
        if self.nodes.is_empty() {
            self.push(Gate::Identity, 0, 0);
        }
        let fnset = FunctionSet::standard();
        let params = CgpParams::new(self.inputs, outs.len(), 1, self.nodes.len()).expect("non-empty grid");
        let nodes = self
            .nodes
            .iter()
            .map(|&(g, a, b)| Node::new(a, b, fnset.code_of(g).expect("standard gate")))
            .collect();
        Genome::new(params, fnset, nodes, selectors).expect("generated genome is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Simulator;

    fn assert_matches(genome: &Genome, model: &FunctionalModel) {
        let c = genome.decode().unwrap();
        let sim = Simulator::default();
        let expect = sim.truth_table(model).unwrap();
        let got = sim.truth_table(&c).unwrap();
        assert_eq!(got, expect, "{}", model.name());
    }

    #[test]
    fn adders_match_integer_addition() {
        for n in [1, 2, 3, 4, 8] {
            assert_matches(&ripple_carry_adder(n), &FunctionalModel::exact_adder(n));
        }
        let c = ripple_carry_adder(1).decode().unwrap();
        assert_eq!(c.eval(0b11), 2);
    }

    #[test]
    fn multipliers_match_integer_multiplication() {
        for n in [1, 2, 3, 4, 8] {
            let g = array_multiplier(n);
            assert_eq!(g.params().inputs(), 2 * n);
            assert_eq!(g.params().outputs(), 2 * n);
            assert_matches(&g, &FunctionalModel::exact_multiplier(n));
        }
    }

    #[test]
    fn truncated_genomes_match_models() {
        for k in 0..=8 {
            let (m, g) = truncated_multiplier(8, k);
            assert_matches(&g, &m);
        }
        let (m, _) = truncated_multiplier(8, 7);
        assert_eq!(m.eval(3 | 5 << 8), 8);
    }

    #[test]
    fn bam_genomes_match_models() {
        for (h, v) in [
            (0, 0),
            (0, 2),
            (0, 4),
            (1, 3),
            (0, 6),
            (1, 6),
            (0, 7),
            (2, 7),
            (2, 8),
            (8, 16),
            (3, 0),
        ] {
            let (m, g) = bam_multiplier(BamSpec::new(8, h, v).unwrap());
            assert_matches(&g, &m);
        }
        let (m, _) = bam_multiplier(BamSpec::new(8, 0, 2).unwrap());
        assert_eq!(m.eval(1 | 1 << 8), 0);
    }

    #[test]
    fn bam_spec_bounds() {
        assert!(BamSpec::new(8, 9, 0).is_err());
        assert!(BamSpec::new(8, 0, 17).is_err());
        assert!(BamSpec::new(0, 0, 0).is_err());
        assert!(BamSpec::new(8, 8, 16).is_ok());
    }

    #[test]
    fn approximate_variants_are_smaller() {
        let gates = |g: &Genome| g.decode().unwrap().gate_count();
        let exact = gates(&array_multiplier(8));
        let t7 = gates(&truncated_multiplier(8, 7).1);
        let t6 = gates(&truncated_multiplier(8, 6).1);
        assert!(t6 < t7 && t7 < exact, "{t6} {t7} {exact}");
        assert_eq!(gates(&truncated_multiplier(8, 8).1), exact);
    }
}
