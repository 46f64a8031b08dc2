//! CGP chromosome: a fixed grid of two-input gate nodes plus output selectors.
//!
//! Wire ids `0..inputs` are primary inputs; node `k` drives wire
//! `inputs + k`. Nodes are numbered column-major, so node `k` lives in column
//! `k / rows`, and a node may only read primary inputs or nodes from the
//! `levels_back` columns immediately to its left.

mod gate;
mod text;

use std::fmt;
use std::ops::Range;

use rand::Rng;
use thiserror::Error;

use crate::circuit::{Circuit, CircuitGate};

pub use gate::{FunctionSet, Gate};
pub use text::{parse, serialize, ParseError};

/// Every node has exactly two input fields; unary and constant functions
/// ignore the surplus.
pub const ARITY: usize = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParamsError {
    #[error("grid needs at least one {0}")]
    Empty(&'static str),
    #[error("levels-back {levels_back} outside 1..={columns}")]
    LevelsBack { levels_back: usize, columns: usize },
    #[error("node arity must be 2, got {0}")]
    Arity(usize),
    #[error("wire count {0} does not fit in 32 bits")]
    TooLarge(usize),
}

/// Grid geometry of a chromosome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CgpParams {
    inputs: usize,
    outputs: usize,
    rows: usize,
    columns: usize,
    levels_back: usize,
}

impl CgpParams {
    /// Grid with full feed-forward connectivity (`levels_back = columns`).
    pub fn new(inputs: usize, outputs: usize, rows: usize, columns: usize) -> Result<Self, ParamsError> {
        Self::with_levels_back(inputs, outputs, rows, columns, columns)
    }

    pub fn with_levels_back(
        inputs: usize,
        outputs: usize,
        rows: usize,
        columns: usize,
        levels_back: usize,
    ) -> Result<Self, ParamsError> {
        for (n, what) in [
            (inputs, "input"),
            (outputs, "output"),
            (rows, "row"),
            (columns, "column"),
        ] {
            if n == 0 {
                return Err(ParamsError::Empty(what));
            }
        }
        if levels_back == 0 || levels_back > columns {
            return Err(ParamsError::LevelsBack { levels_back, columns });
        }
        let wires = rows
            .checked_mul(columns)
            .and_then(|n| n.checked_add(inputs))
            .ok_or(ParamsError::TooLarge(usize::MAX))?;
        if wires > u32::MAX as usize {
            return Err(ParamsError::TooLarge(wires));
        }
        Ok(CgpParams {
            inputs,
            outputs,
            rows,
            columns,
            levels_back,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }
    pub fn outputs(&self) -> usize {
        self.outputs
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn columns(&self) -> usize {
        self.columns
    }
    pub fn levels_back(&self) -> usize {
        self.levels_back
    }
    pub fn arity(&self) -> usize {
        ARITY
    }

    /// Node count `rows * columns`.
    pub fn node_count(&self) -> usize {
        self.rows * self.columns
    }

    pub fn wire_count(&self) -> usize {
        self.inputs + self.node_count()
    }

    pub fn column_of(&self, node: usize) -> usize {
        node / self.rows
    }

    /// Node-output wires a node in `column` may read (primary inputs are
    /// always readable in addition).
    pub fn node_window(&self, column: usize) -> Range<u32> {
        let first = column.saturating_sub(self.levels_back);
        let lo = self.inputs + first * self.rows;
        let hi = self.inputs + column * self.rows;
        lo as u32..hi as u32
    }

    fn legal_input_count(&self, column: usize) -> u32 {
        self.inputs as u32 + self.node_window(column).len() as u32
    }

    fn nth_legal_input(&self, column: usize, r: u32) -> u32 {
        if (r as usize) < self.inputs {
            r
        } else {
            self.node_window(column).start + (r - self.inputs as u32)
        }
    }
}

/// One grid node: two input wires and a function code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Node {
    pub in1: u32,
    pub in2: u32,
    pub func: u8,
}

impl Node {
    pub fn new(in1: u32, in2: u32, func: u8) -> Self {
        Node { in1, in2, func }
    }
}

/// A constraint broken by a chromosome.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NodeCount { expected: usize, found: usize },
    OutputCount { expected: usize, found: usize },
    BadWire { node: usize, slot: usize, wire: u32 },
    ForwardReference { node: usize, slot: usize, wire: u32 },
    LevelsBack { node: usize, slot: usize, wire: u32 },
    BadFunction { node: usize, code: u8 },
    OutputOutOfRange { output: usize, wire: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NodeCount { expected, found } => {
                write!(f, "node count mismatch: expected {expected}, found {found}")
            }
            Violation::OutputCount { expected, found } => {
                write!(f, "output count mismatch: expected {expected}, found {found}")
            }
            Violation::BadWire { node, slot, wire } => {
                write!(f, "bad wire-id {wire} in input {slot} of node {node}")
            }
            Violation::ForwardReference { node, slot, wire } => {
                write!(f, "forward reference to wire {wire} in input {slot} of node {node}")
            }
            Violation::LevelsBack { node, slot, wire } => {
                write!(f, "levels-back violation: wire {wire} in input {slot} of node {node}")
            }
            Violation::BadFunction { node, code } => write!(f, "bad function code {code} at node {node}"),
            Violation::OutputOutOfRange { output, wire } => {
                write!(f, "output out of range: output {output} selects wire {wire}")
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid genome: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct InvalidGenome(pub Vec<Violation>);

/// Integer netlist chromosome.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Genome {
    params: CgpParams,
    fnset: FunctionSet,
    nodes: Vec<Node>,
    outputs: Vec<u32>,
}

impl Genome {
    /// Assembles a chromosome without checking it; see [`Genome::validate`].
    pub fn from_parts(params: CgpParams, fnset: FunctionSet, nodes: Vec<Node>, outputs: Vec<u32>) -> Self {
        Genome {
            params,
            fnset,
            nodes,
            outputs,
        }
    }

    /// Assembles and validates a chromosome.
    pub fn new(
        params: CgpParams,
        fnset: FunctionSet,
        nodes: Vec<Node>,
        outputs: Vec<u32>,
    ) -> Result<Self, InvalidGenome> {
        let g = Self::from_parts(params, fnset, nodes, outputs);
        g.check()?;
        Ok(g)
    }

    pub fn params(&self) -> &CgpParams {
        &self.params
    }
    pub fn fnset(&self) -> &FunctionSet {
        &self.fnset
    }
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }
    pub fn outputs(&self) -> &[u32] {
        &self.outputs
    }

    /// All violated constraints; empty when the chromosome is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let p = &self.params;
        let mut out = Vec::new();
        if self.nodes.len() != p.node_count() {
            out.push(Violation::NodeCount {
                expected: p.node_count(),
                found: self.nodes.len(),
            });
        }
        if self.outputs.len() != p.outputs {
            out.push(Violation::OutputCount {
                expected: p.outputs,
                found: self.outputs.len(),
            });
        }
        let wires = p.wire_count() as u32;
        for (k, node) in self.nodes.iter().enumerate() {
            let window = p.node_window(p.column_of(k));
            for (slot, wire) in [node.in1, node.in2].into_iter().enumerate() {
                if (wire as usize) < p.inputs || window.contains(&wire) {
                    continue;
                }
                out.push(if wire >= wires {
                    Violation::BadWire { node: k, slot, wire }
                } else if wire >= window.end {
                    Violation::ForwardReference { node: k, slot, wire }
                } else {
                    Violation::LevelsBack { node: k, slot, wire }
                });
            }
            if self.fnset.gate(node.func).is_none() {
                out.push(Violation::BadFunction {
                    node: k,
                    code: node.func,
                });
            }
        }
        for (output, &wire) in self.outputs.iter().enumerate() {
            if wire >= wires {
                out.push(Violation::OutputOutOfRange { output, wire });
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    pub fn check(&self) -> Result<(), InvalidGenome> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(InvalidGenome(v))
        }
    }

    /// Number of integers in the chromosome.
    pub fn gene_count(&self) -> usize {
        3 * self.nodes.len() + self.outputs.len()
    }

    /// Redraws `h` randomly chosen integers uniformly over their legal
    /// values. Positions are drawn with replacement and a redraw may pick the
    /// current value, so at most `h` integers change.
    ///
    /// Panics if `h == 0` or the genome is invalid.
    pub fn mutate<R: Rng + ?Sized>(&self, h: usize, rng: &mut R) -> Genome {
        assert!(h >= 1, "mutation intensity must be at least 1");
        debug_assert!(self.is_valid());
        let mut child = self.clone();
        let p = self.params;
        let node_genes = 3 * child.nodes.len();
        for _ in 0..h {
            let pos = rng.random_range(0..self.gene_count());
            if pos < node_genes {
                let k = pos / 3;
                let column = p.column_of(k);
                let node = &mut child.nodes[k];
                match pos % 3 {
                    0 => node.in1 = p.nth_legal_input(column, rng.random_range(0..p.legal_input_count(column))),
                    1 => node.in2 = p.nth_legal_input(column, rng.random_range(0..p.legal_input_count(column))),
                    _ => node.func = rng.random_range(0..self.fnset.len() as u8),
                }
            } else {
                child.outputs[pos - node_genes] = rng.random_range(0..p.wire_count() as u32);
            }
        }
        child
    }

    /// Uniformly random valid chromosome.
    pub fn random<R: Rng + ?Sized>(params: CgpParams, fnset: FunctionSet, rng: &mut R) -> Genome {
        let nodes = (0..params.node_count())
            .map(|k| {
                let column = params.column_of(k);
                let count = params.legal_input_count(column);
                Node {
                    in1: params.nth_legal_input(column, rng.random_range(0..count)),
                    in2: params.nth_legal_input(column, rng.random_range(0..count)),
                    func: rng.random_range(0..fnset.len() as u8),
                }
            })
            .collect();
        let outputs = (0..params.outputs)
            .map(|_| rng.random_range(0..params.wire_count() as u32))
            .collect();
        Genome {
            params,
            fnset,
            nodes,
            outputs,
        }
    }

    /// Flags of nodes reachable from the outputs through inputs the node
    /// functions actually read.
    pub fn active_mask(&self) -> Vec<bool> {
        let n_i = self.params.inputs as u32;
        let mut active = vec![false; self.nodes.len()];
        for &o in &self.outputs {
            if o >= n_i {
                active[(o - n_i) as usize] = true;
            }
        }
        for k in (0..self.nodes.len()).rev() {
            if !active[k] {
                continue;
            }
            let node = self.nodes[k];
            let arity = self.fnset.gate(node.func).map_or(0, Gate::arity);
            for &w in [node.in1, node.in2].iter().take(arity) {
                if w >= n_i {
                    active[(w - n_i) as usize] = true;
                }
            }
        }
        active
    }

    /// Extracts the active subcircuit, renumbered densely in node order.
    pub fn decode(&self) -> Result<Circuit, InvalidGenome> {
        self.check()?;
        let n_i = self.params.inputs;
        let active = self.active_mask();
        let mut remap = vec![u32::MAX; self.nodes.len()];
        let wire = |remap: &[u32], w: u32| if (w as usize) < n_i { w } else { remap[w as usize - n_i] };
        let mut gates = Vec::new();
        for (k, node) in self.nodes.iter().enumerate() {
            if !active[k] {
                continue;
            }
            let gate = self.fnset.gate(node.func).expect("validated");
            // Unread fields are normalised so identical phenotypes compare equal.
            let (a, b) = match gate.arity() {
                0 => (0, 0),
                1 => {
                    let a = wire(&remap, node.in1);
                    (a, a)
                }
                _ => (wire(&remap, node.in1), wire(&remap, node.in2)),
            };
            remap[k] = (n_i + gates.len()) as u32;
            gates.push(CircuitGate { gate, a, b });
        }
        let outputs = self.outputs.iter().map(|&o| wire(&remap, o)).collect();
        Ok(Circuit::new(n_i, gates, outputs).expect("decoded circuit is well formed"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fig1_shape() -> Genome {
        // 2-bit multiplier on a 3x3 grid; wires a0=0 a1=1 b0=2 b1=3.
        let p = CgpParams::new(4, 4, 3, 3).unwrap();
        let and = 2;
        let xor = 4;
        let nodes = vec![
            // column 0 (wires 4, 5, 6)
            Node::new(0, 2, and), // a0b0
            Node::new(1, 2, and), // a1b0
            Node::new(0, 3, and), // a0b1
            // column 1 (wires 7, 8, 9)
            Node::new(1, 3, and), // a1b1
            Node::new(5, 6, xor), // p1
            Node::new(5, 6, and), // c1
            // column 2 (wires 10, 11, 12)
            Node::new(7, 9, xor), // p2
            Node::new(7, 9, and), // p3
            Node::new(0, 0, 8),
        ];
        Genome::new(p, FunctionSet::standard(), nodes, vec![4, 8, 10, 11]).unwrap()
    }

    #[test]
    fn fig1_shaped_genome_is_valid() {
        let g = fig1_shape();
        assert!(g.validate().is_empty());
        let c = g.decode().unwrap();
        for a in 0..4u64 {
            for b in 0..4u64 {
                assert_eq!(c.eval(a | b << 2), a * b);
            }
        }
        // the const0 node is inactive
        assert_eq!(c.gate_count(), 8);
    }

    #[test]
    fn column_zero_forward_reference() {
        let mut g = fig1_shape();
        g.nodes[1].in2 = 4;
        let v = g.validate();
        assert_eq!(
            v,
            vec![Violation::ForwardReference {
                node: 1,
                slot: 1,
                wire: 4
            }]
        );
        assert!(v[0].to_string().contains("forward reference"));
    }

    #[test]
    fn output_selector_out_of_range() {
        let mut g = fig1_shape();
        g.outputs[3] = 4 + 9;
        let v = g.validate();
        assert_eq!(v, vec![Violation::OutputOutOfRange { output: 3, wire: 13 }]);
        assert!(v[0].to_string().contains("output out of range"));
        assert!(g.decode().is_err());
    }

    #[test]
    fn levels_back_and_function_violations() {
        let p = CgpParams::with_levels_back(2, 1, 1, 4, 1).unwrap();
        let nodes = vec![
            Node::new(0, 1, 2),
            Node::new(2, 1, 2),
            Node::new(2, 3, 2), // wire 2 is two columns back
            Node::new(4, 99, 12),
        ];
        let g = Genome::from_parts(p, FunctionSet::standard(), nodes, vec![5]);
        let v = g.validate();
        assert!(v.contains(&Violation::LevelsBack {
            node: 2,
            slot: 0,
            wire: 2
        }));
        assert!(v.contains(&Violation::BadWire {
            node: 3,
            slot: 1,
            wire: 99
        }));
        assert!(v.contains(&Violation::BadFunction { node: 3, code: 12 }));
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn params_invariants() {
        assert!(CgpParams::new(0, 1, 1, 1).is_err());
        assert!(CgpParams::new(1, 1, 1, 0).is_err());
        assert!(CgpParams::with_levels_back(1, 1, 1, 3, 4).is_err());
        assert!(CgpParams::with_levels_back(1, 1, 1, 3, 0).is_err());
        let p = CgpParams::new(4, 4, 3, 3).unwrap();
        assert_eq!(p.node_count(), 9);
        assert_eq!(p.levels_back(), 3);
        assert_eq!(p.column_of(5), 1);
    }

    #[test]
    fn all_outputs_on_inputs_decode_empty() {
        let p = CgpParams::new(3, 3, 2, 2).unwrap();
        let g = Genome::new(p, FunctionSet::standard(), vec![Node::new(0, 1, 2); 4], vec![0, 1, 2]).unwrap();
        let c = g.decode().unwrap();
        assert_eq!(c.gate_count(), 0);
        assert_eq!(c.depth(), 0);
    }

    #[test]
    fn single_and_feeding_all_outputs() {
        let p = CgpParams::new(2, 3, 1, 3).unwrap();
        let nodes = vec![Node::new(0, 1, 2), Node::new(2, 0, 4), Node::new(3, 2, 3)];
        let g = Genome::new(p, FunctionSet::standard(), nodes, vec![2, 2, 2]).unwrap();
        let c = g.decode().unwrap();
        assert_eq!(c.gate_count(), 1);
        assert_eq!(c.depth(), 1);
    }

    #[test]
    fn mutation_stays_valid_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = CgpParams::with_levels_back(6, 3, 3, 10, 4).unwrap();
        let mut g = Genome::random(p, FunctionSet::standard(), &mut rng);
        for _ in 0..10_000 {
            let child = g.mutate(5, &mut rng);
            assert!(child.is_valid());
            assert_eq!(child.params, g.params);
            assert_eq!(child.fnset, g.fnset);
            assert_eq!(child.nodes.len(), g.nodes.len());
            assert_eq!(child.outputs.len(), g.outputs.len());
            let changed = genes(&child).zip(genes(&g)).filter(|(a, b)| a != b).count();
            assert!(changed <= 5);
            g = child;
        }
    }

    #[test]
    fn single_node_mutation_changes_at_most_one_gene() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = CgpParams::new(1, 1, 1, 1).unwrap();
        let g = Genome::random(p, FunctionSet::standard(), &mut rng);
        for _ in 0..200 {
            let child = g.mutate(1, &mut rng);
            assert!(genes(&child).zip(genes(&g)).filter(|(a, b)| a != b).count() <= 1);
        }
    }

    #[test]
    #[should_panic(expected = "at least 1")]
    fn zero_intensity_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        fig1_shape().mutate(0, &mut rng);
    }

    fn genes(g: &Genome) -> impl Iterator<Item = u32> + '_ {
        g.nodes
            .iter()
            .flat_map(|n| [n.in1, n.in2, n.func as u32])
            .chain(g.outputs.iter().copied())
    }
}
