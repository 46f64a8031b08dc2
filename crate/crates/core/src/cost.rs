//! Technology-proxy cost model.
//!
//! Area is the sum of per-gate weights over active gates, power is taken as
//! proportional to area, and delay is the heaviest weighted input-to-output
//! path. Default weights follow CMOS transistor-count ratios (inverter 0.5,
//! two-input NAND/NOR/AND/OR 1, XOR/XNOR 2). All power figures are proxies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::Circuit;
use crate::genome::{FunctionSet, Gate};
use crate::num::Scalar;

/// Label attached to every cost report.
pub const POWER_MODEL: &str = "weighted-area-proxy";

#[derive(Debug, Error)]
pub enum CostError {
    #[error("cost table has no weight for gate {0}")]
    MissingWeight(Gate),
    #[error("negative weight for gate {0}")]
    NegativeWeight(Gate),
    #[error("unknown gate name {0:?} in cost table")]
    UnknownGate(String),
    #[error("malformed cost table: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GateWeight<T> {
    pub area: T,
    pub delay: T,
}

/// Per-function area and delay weights.
#[derive(Clone, Debug, PartialEq)]
pub struct CostTable<T> {
    weights: BTreeMap<Gate, GateWeight<T>>,
}

impl<T: Scalar> Default for CostTable<T> {
    fn default() -> Self {
        Self::proxy_default()
    }
}

impl<T: Scalar> CostTable<T> {
    pub fn proxy_default() -> Self {
        let weights = Gate::ALL
            .iter()
            .map(|&g| {
                let w = match g {
                    Gate::And | Gate::Or | Gate::Nand | Gate::Nor => 1.0,
                    Gate::Xor | Gate::Xnor => 2.0,
                    Gate::Not => 0.5,
                    Gate::Identity | Gate::Const0 | Gate::Const1 => 0.0,
                };
                (
                    g,
                    GateWeight {
                        area: T::lit(w),
                        delay: T::lit(w),
                    },
                )
            })
            .collect();
        CostTable { weights }
    }

    pub fn new(weights: impl IntoIterator<Item = (Gate, GateWeight<T>)>) -> Result<Self, CostError> {
        let weights: BTreeMap<_, _> = weights.into_iter().collect();
        for (&g, w) in &weights {
            if !(w.area >= T::zero() && w.delay >= T::zero()) {
                return Err(CostError::NegativeWeight(g));
            }
        }
        Ok(CostTable { weights })
    }

    /// Parses `{"and": {"area": 1.0, "delay": 1.0}, ...}`.
    pub fn from_json(text: &str) -> Result<Self, CostError> {
        let raw: BTreeMap<String, GateWeight<T>> = serde_json::from_str(text)?;
        let mut weights = Vec::with_capacity(raw.len());
        for (name, w) in raw {
            let g = Gate::from_name(&name).ok_or(CostError::UnknownGate(name))?;
            weights.push((g, w));
        }
        Self::new(weights)
    }

    pub fn to_json(&self) -> String {
        let named: BTreeMap<&str, &GateWeight<T>> = self.weights.iter().map(|(g, w)| (g.name(), w)).collect();
        serde_json::to_string_pretty(&named).expect("cost table serializes")
    }

    pub fn weight(&self, gate: Gate) -> Result<&GateWeight<T>, CostError> {
        self.weights.get(&gate).ok_or(CostError::MissingWeight(gate))
    }

    pub fn covers(&self, fnset: &FunctionSet) -> bool {
        fnset.gates().all(|g| self.weights.contains_key(&g))
    }

    /// Weighted area of the active gates.
    pub fn area(&self, circuit: &Circuit) -> Result<T, CostError> {
        circuit
            .gates()
            .iter()
            .try_fold(T::zero(), |acc, g| Ok(acc + self.weight(g.gate)?.area))
    }

    /// Heaviest weighted path from any input to any output.
    pub fn delay(&self, circuit: &Circuit) -> Result<T, CostError> {
        let mut arrival = vec![T::zero(); circuit.wire_count()];
        let n_i = circuit.inputs();
        for (k, g) in circuit.gates().iter().enumerate() {
            let reads = [g.a, g.b];
            let latest = reads[..g.gate.arity()]
                .iter()
                .map(|&w| arrival[w as usize])
                .fold(T::zero(), T::max);
            arrival[n_i + k] = latest + self.weight(g.gate)?.delay;
        }
        Ok(circuit
            .outputs()
            .iter()
            .map(|&o| arrival[o as usize])
            .fold(T::zero(), T::max))
    }
}

/// Area, power and delay proxies of one circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CostMetrics<T> {
    pub area: T,
    pub power_proxy: T,
    pub delay_proxy: T,
    pub active_gates: usize,
    /// Power relative to a named reference circuit, when one was given.
    pub relative_power: Option<T>,
    #[serde(default)]
    pub reference: Option<String>,
    #[serde(default = "power_model")]
    pub power_model: String,
}

fn power_model() -> String {
    POWER_MODEL.to_string()
}

pub fn cost_report<T: Scalar>(
    circuit: &Circuit,
    table: &CostTable<T>,
    reference: Option<(&str, &Circuit)>,
) -> Result<CostMetrics<T>, CostError> {
    let area = table.area(circuit)?;
    let relative_power = match reference {
        Some((_, r)) => Some(relative(area, table.area(r)?)),
        None => None,
    };
    Ok(CostMetrics {
        area,
        power_proxy: area,
        delay_proxy: table.delay(circuit)?,
        active_gates: circuit.gate_count(),
        relative_power,
        reference: reference.map(|(name, _)| name.to_string()),
        power_model: power_model(),
    })
}

fn relative<T: Scalar>(area: T, reference: T) -> T {
    if reference > T::zero() {
        area / reference
    } else if area > T::zero() {
        T::infinity()
    } else {
        T::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitGate;
    use crate::generators;

    #[test]
    fn empty_circuit_costs_nothing() {
        let c = Circuit::new(2, vec![], vec![0, 1]).unwrap();
        let r = cost_report(&c, &CostTable::<f64>::default(), None).unwrap();
        assert_eq!((r.area, r.delay_proxy, r.active_gates), (0.0, 0.0, 0));
        assert_eq!(r.relative_power, None);
    }

    #[test]
    fn single_and_gate() {
        let c = Circuit::new(
            2,
            vec![CircuitGate {
                gate: Gate::And,
                a: 0,
                b: 1,
            }],
            vec![2],
        )
        .unwrap();
        let r = cost_report(&c, &CostTable::<f64>::default(), None).unwrap();
        assert_eq!((r.area, r.delay_proxy), (1.0, 1.0));
        let r32 = cost_report(&c, &CostTable::<f32>::default(), None).unwrap();
        assert_eq!((r32.area, r32.delay_proxy), (1.0, 1.0));
    }

    #[test]
    fn reference_against_itself() {
        let c = generators::array_multiplier(8).decode().unwrap();
        let r = cost_report(&c, &CostTable::<f64>::default(), Some(("exact-mult8", &c))).unwrap();
        assert_eq!(r.relative_power, Some(1.0));
        assert_eq!(r.power_model, POWER_MODEL);
    }

    #[test]
    fn truncation_order() {
        let t = CostTable::<f64>::default();
        let area = |g: &crate::genome::Genome| t.area(&g.decode().unwrap()).unwrap();
        let exact = area(&generators::array_multiplier(8));
        let t7 = area(&generators::truncated_multiplier(8, 7).1);
        let t6 = area(&generators::truncated_multiplier(8, 6).1);
        assert!(t6 < t7 && t7 < exact);
    }

    #[test]
    fn delay_follows_heaviest_path() {
        let gates = vec![
            CircuitGate {
                gate: Gate::Xor,
                a: 0,
                b: 1,
            },
            CircuitGate {
                gate: Gate::Not,
                a: 2,
                b: 2,
            },
            CircuitGate {
                gate: Gate::And,
                a: 0,
                b: 1,
            },
        ];
        let c = Circuit::new(2, gates, vec![3, 4]).unwrap();
        let t = CostTable::<f64>::default();
        assert_eq!(t.delay(&c).unwrap(), 2.5);
        assert_eq!(t.area(&c).unwrap(), 3.5);
    }

    #[test]
    fn json_table_and_missing_weight() {
        let t = CostTable::<f64>::from_json(r#"{"and": {"area": 3.0, "delay": 0.5}}"#).unwrap();
        let and = Circuit::new(
            2,
            vec![CircuitGate {
                gate: Gate::And,
                a: 0,
                b: 1,
            }],
            vec![2],
        )
        .unwrap();
        let r = cost_report(&and, &t, None).unwrap();
        assert_eq!((r.area, r.delay_proxy), (3.0, 0.5));
        let xor = Circuit::new(
            2,
            vec![CircuitGate {
                gate: Gate::Xor,
                a: 0,
                b: 1,
            }],
            vec![2],
        )
        .unwrap();
        assert!(matches!(
            cost_report(&xor, &t, None),
            Err(CostError::MissingWeight(Gate::Xor))
        ));
        assert!(!t.covers(&FunctionSet::standard()));
        assert!(CostTable::<f64>::from_json(r#"{"mux": {"area": 1.0, "delay": 1.0}}"#).is_err());
        assert!(CostTable::<f64>::from_json(r#"{"or": {"area": -1.0, "delay": 1.0}}"#).is_err());
        let d = CostTable::<f64>::default();
        assert_eq!(CostTable::<f64>::from_json(&d.to_json()).unwrap(), d);
    }
}
