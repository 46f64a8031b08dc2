//! Decoded phenotype: the active gates of a genome in topological order.

use std::fmt::Write as _;

use thiserror::Error;

use crate::genome::Gate;

/// One active gate. Wire ids `< inputs` are primary inputs; gate `k` drives
/// wire `inputs + k`. Unread operands are normalised (`b == a` for unary
/// gates, both zero for constants).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CircuitGate {
    pub gate: Gate,
    pub a: u32,
    pub b: u32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("gate {gate} reads wire {wire} that is not yet defined")]
    NotTopological { gate: usize, wire: u32 },
    #[error("output {output} selects undefined wire {wire}")]
    BadOutput { output: usize, wire: u32 },
    #[error("a circuit needs at least one input and one output")]
    Empty,
}

/// Feed-forward gate network. Equality and hashing are structural, so two
/// genomes with the same active subcircuit decode to equal circuits.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Circuit {
    inputs: usize,
    gates: Vec<CircuitGate>,
    outputs: Vec<u32>,
    depth: usize,
}

impl Circuit {
    pub fn new(inputs: usize, gates: Vec<CircuitGate>, outputs: Vec<u32>) -> Result<Self, CircuitError> {
        if inputs == 0 || outputs.is_empty() {
            return Err(CircuitError::Empty);
        }
        let mut level = vec![0usize; inputs + gates.len()];
        for (k, g) in gates.iter().enumerate() {
            let here = (inputs + k) as u32;
            let reads = [g.a, g.b];
            let reads = &reads[..g.gate.arity()];
            if let Some(&wire) = reads.iter().find(|&&w| w >= here) {
                return Err(CircuitError::NotTopological { gate: k, wire });
            }
            level[here as usize] = match g.gate {
                Gate::Const0 | Gate::Const1 => 0,
                _ => 1 + reads.iter().map(|&w| level[w as usize]).max().unwrap_or(0),
            };
        }
        let wires = (inputs + gates.len()) as u32;
        if let Some((output, &wire)) = outputs.iter().enumerate().find(|(_, &w)| w >= wires) {
            return Err(CircuitError::BadOutput { output, wire });
        }
        let depth = outputs.iter().map(|&o| level[o as usize]).max().unwrap_or(0);
        Ok(Circuit {
            inputs,
            gates,
            outputs,
            depth,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn output_count(&self) -> usize {
        self.outputs.len()
    }

    pub fn gates(&self) -> &[CircuitGate] {
        &self.gates
    }

    pub fn outputs(&self) -> &[u32] {
        &self.outputs
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    /// Longest gate path from any input to any output.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn wire_count(&self) -> usize {
        self.inputs + self.gates.len()
    }

    /// Evaluates one input vector packed LSB-first (bit `j` is input `j`);
    /// output bit `j` is output `j`. Limited to 64 inputs and outputs.
    pub fn eval(&self, input: u64) -> u64 {
        let mut wires = Vec::with_capacity(self.wire_count());
        wires.extend((0..self.inputs).map(|j| if input >> j & 1 == 1 { !0u64 } else { 0 }));
        for g in &self.gates {
            let v = g.gate.eval_word(wires[g.a as usize], wires[g.b as usize]);
            wires.push(v);
        }
        self.outputs
            .iter()
            .enumerate()
            .fold(0, |acc, (j, &o)| acc | (wires[o as usize] & 1) << j)
    }

    /// Canonical text of the active subcircuit, used as a dedupe key.
    pub fn canonical_key(&self) -> String {
        let mut s = format!("{}:", self.inputs);
        for g in &self.gates {
            let _ = write!(s, "{}({},{})", g.gate.name(), g.a, g.b);
        }
        s.push(':');
        for o in &self.outputs {
            let _ = write!(s, "{o},");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn const_one_drives_all_outputs() {
        let c = Circuit::new(
            3,
            vec![CircuitGate {
                gate: Gate::Const1,
                a: 0,
                b: 0,
            }],
            vec![3, 3],
        )
        .unwrap();
        for v in 0..8 {
            assert_eq!(c.eval(v), 0b11);
        }
        assert_eq!(c.depth(), 0);
    }

    #[test]
    fn rejects_cycles_and_bad_outputs() {
        let g = CircuitGate {
            gate: Gate::And,
            a: 0,
            b: 2,
        };
        assert!(matches!(
            Circuit::new(2, vec![g], vec![2]),
            Err(CircuitError::NotTopological { .. })
        ));
        let g = CircuitGate {
            gate: Gate::And,
            a: 0,
            b: 1,
        };
        assert!(matches!(
            Circuit::new(2, vec![g], vec![3]),
            Err(CircuitError::BadOutput { .. })
        ));
    }

    #[test]
    fn depth_counts_longest_path() {
        let gates = vec![
            CircuitGate {
                gate: Gate::And,
                a: 0,
                b: 1,
            },
            CircuitGate {
                gate: Gate::Not,
                a: 2,
                b: 2,
            },
            CircuitGate {
                gate: Gate::Or,
                a: 3,
                b: 0,
            },
        ];
        let c = Circuit::new(2, gates, vec![2, 4]).unwrap();
        assert_eq!(c.depth(), 3);
    }
}
