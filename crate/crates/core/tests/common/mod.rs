//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use axc_core::Genome;

/// Gate semantics by function code, written out separately from the crate.
pub fn gate_bit(code: u8, a: bool, b: bool) -> bool {
    match code {
        0 => a,
        1 => !a,
        2 => a & b,
        3 => a | b,
        4 => a ^ b,
        5 => !(a & b),
        6 => !(a | b),
        7 => !(a ^ b),
        8 => false,
        9 => true,
        _ => panic!("unknown function code {code}"),
    }
}

fn wire_value(g: &Genome, wire: u32, input: u64, memo: &mut [Option<bool>]) -> bool {
    let n_i = g.params().inputs() as u32;
    if wire < n_i {
        return input >> wire & 1 == 1;
    }
    let k = (wire - n_i) as usize;
    if let Some(v) = memo[k] {
        return v;
    }
    let node = g.nodes()[k];
    let v = match node.func {
        8 | 9 => gate_bit(node.func, false, false),
        0 | 1 => {
            let a = wire_value(g, node.in1, input, memo);
            gate_bit(node.func, a, false)
        }
        f => {
            let a = wire_value(g, node.in1, input, memo);
            let b = wire_value(g, node.in2, input, memo);
            gate_bit(f, a, b)
        }
    };
    memo[k] = Some(v);
    v
}

/// Recursive interpretation of the chromosome straight from its genes.
pub fn naive_eval(g: &Genome, input: u64) -> u64 {
    let mut memo = vec![None; g.nodes().len()];
    g.outputs().iter().enumerate().fold(0, |acc, (bit, &o)| {
        acc | (wire_value(g, o, input, &mut memo) as u64) << bit
    })
}

/// Statistics from a plain double loop over both operands.
#[derive(Debug, Clone, PartialEq)]
pub struct Oracle {
    pub count: u64,
    pub mismatches: u64,
    pub abs_sum: u128,
    pub sq_sum: u128,
    /// Sum of `floor(d * 2^32 / max(1, exact))`.
    pub rel_fixed: u128,
    /// Exact mean relative error as a float of the true rational.
    pub mre_true: f64,
    pub wce: u64,
    pub wcre: (u64, u64),
}

impl Oracle {
    pub fn er(&self) -> f64 {
        self.mismatches as f64 / self.count as f64
    }
    pub fn mae(&self) -> f64 {
        self.abs_sum as f64 / self.count as f64
    }
    pub fn mse(&self) -> f64 {
        self.sq_sum as f64 / self.count as f64
    }
    pub fn mre(&self) -> f64 {
        self.rel_fixed as f64 / 2f64.powi(32) / self.count as f64
    }
    pub fn wcre(&self) -> f64 {
        self.wcre.0 as f64 / self.wcre.1 as f64
    }
}

/// Enumerates `a` in the low `width` input bits and `b` above them.
pub fn double_loop(width: usize, approx: impl Fn(u64) -> u64, exact: impl Fn(u64, u64) -> u64) -> Oracle {
    let mut o = Oracle {
        count: 0,
        mismatches: 0,
        abs_sum: 0,
        sq_sum: 0,
        rel_fixed: 0,
        mre_true: 0.0,
        wce: 0,
        wcre: (0, 1),
    };
    let mut rel_true = 0f64;
    for b in 0..1u64 << width {
        for a in 0..1u64 << width {
            let got = approx(a | b << width);
            let want = exact(a, b);
            o.count += 1;
            let d = got.abs_diff(want);
            if d == 0 {
                continue;
            }
            let den = want.max(1);
            o.mismatches += 1;
            o.abs_sum += d as u128;
            o.sq_sum += (d as u128).pow(2);
            o.rel_fixed += ((d as u128) << 32) / den as u128;
            rel_true += d as f64 / den as f64;
            o.wce = o.wce.max(d);
            if d as u128 * o.wcre.1 as u128 > o.wcre.0 as u128 * den as u128 {
                o.wcre = (d, den);
            }
        }
    }
    o.mre_true = rel_true / o.count as f64;
    o
}
