use std::fmt;

use serde::{Deserialize, Serialize};

/// Two-input gate functions. Codes follow the standard function set order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gate {
    Identity,
    Not,
    And,
    Or,
    Xor,
    Nand,
    Nor,
    Xnor,
    Const0,
    Const1,
}

impl Gate {
    pub const ALL: [Gate; 10] = [
        Gate::Identity,
        Gate::Not,
        Gate::And,
        Gate::Or,
        Gate::Xor,
        Gate::Nand,
        Gate::Nor,
        Gate::Xnor,
        Gate::Const0,
        Gate::Const1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Gate::Identity => "identity",
            Gate::Not => "not",
            Gate::And => "and",
            Gate::Or => "or",
            Gate::Xor => "xor",
            Gate::Nand => "nand",
            Gate::Nor => "nor",
            Gate::Xnor => "xnor",
            Gate::Const0 => "const0",
            Gate::Const1 => "const1",
        }
    }

    pub fn from_name(name: &str) -> Option<Gate> {
        Gate::ALL.iter().copied().find(|g| g.name() == name)
    }

    /// Number of inputs the function actually reads.
    pub fn arity(self) -> usize {
        match self {
            Gate::Const0 | Gate::Const1 => 0,
            Gate::Identity | Gate::Not => 1,
            _ => 2,
        }
    }

    #[inline(always)]
    pub fn eval_word(self, a: u64, b: u64) -> u64 {
        match self {
            Gate::Identity => a,
            Gate::Not => !a,
            Gate::And => a & b,
            Gate::Or => a | b,
            Gate::Xor => a ^ b,
            Gate::Nand => !(a & b),
            Gate::Nor => !(a | b),
            Gate::Xnor => !(a ^ b),
            Gate::Const0 => 0,
            Gate::Const1 => !0,
        }
    }

    pub fn eval_bit(self, a: bool, b: bool) -> bool {
        let w = |x: bool| if x { !0u64 } else { 0 };
        self.eval_word(w(a), w(b)) & 1 == 1
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ordered function set. Codes are dense; a set of size `n` holds the first
/// `n` gates of [`Gate::ALL`], which is what the `.cgp` header can express.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FunctionSet {
    size: u8,
}

impl FunctionSet {
    pub fn standard() -> Self {
        FunctionSet {
            size: Gate::ALL.len() as u8,
        }
    }

    /// First `size` gates of the standard set.
    pub fn prefix(size: usize) -> Option<Self> {
        (1..=Gate::ALL.len())
            .contains(&size)
            .then_some(FunctionSet { size: size as u8 })
    }

    pub fn len(&self) -> usize {
        self.size as usize
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn gate(&self, code: u8) -> Option<Gate> {
        (code < self.size).then(|| Gate::ALL[code as usize])
    }

    pub fn code_of(&self, gate: Gate) -> Option<u8> {
        let code = Gate::ALL.iter().position(|&g| g == gate)? as u8;
        (code < self.size).then_some(code)
    }

    pub fn gates(&self) -> impl Iterator<Item = Gate> + '_ {
        Gate::ALL[..self.len()].iter().copied()
    }
}

impl Default for FunctionSet {
    fn default() -> Self {
        Self::standard()
    }
}
