//! Opinion states and the single-node update rules.
//!
//! A state assigns each node an opinion in {0, 1}. The process itself
//! (node selection, step counting) lives in [`crate::engine`]; this module
//! only answers "given this state, what does node `u` do?".
//!
//! Draw discipline, which the whole crate relies on for reproducibility:
//! [`biased_update`] first spends exactly one Bernoulli(alpha) draw on the
//! bias coin. If the coin fires, the node adopts 1 and *no rule draws are
//! consumed*. Otherwise the rule draws whatever it needs: the majority rule
//! draws one fair coin only on an exact tie, and the voter rule draws one
//! neighbor index.

use rand::Rng;
use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("opinion must be 0 or 1, got {value} at position {pos}")]
    InvalidBit { pos: usize, value: u8 },
    #[error("bias must lie in [0, 1], got {alpha}")]
    InvalidAlpha { alpha: f64 },
    #[error("empty opinion state")]
    Empty,
}

/// Per-node opinions plus a running count of ones, kept incrementally so
/// absorption checks are O(1).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpinionState {
    bits: Vec<u8>,
    ones: usize,
}

impl OpinionState {
    pub fn all_zero(n: usize) -> Self {
        OpinionState {
            bits: vec![0; n],
            ones: 0,
        }
    }

    pub fn all_one(n: usize) -> Self {
        OpinionState {
            bits: vec![1; n],
            ones: n,
        }
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<Self, DynamicsError> {
        if bits.is_empty() {
            return Err(DynamicsError::Empty);
        }
        for (pos, &b) in bits.iter().enumerate() {
            if b > 1 {
                return Err(DynamicsError::InvalidBit { pos, value: b });
            }
        }
        let ones = bits.iter().map(|&b| b as usize).sum();
        Ok(OpinionState { bits, ones })
    }

    /// Parses a string of `0`/`1` characters, e.g. `"1100"`.
    pub fn from_bitstring(s: &str) -> Result<Self, DynamicsError> {
        let bits = s
            .bytes()
            .enumerate()
            .map(|(pos, c)| match c {
                b'0' => Ok(0),
                b'1' => Ok(1),
                other => Err(DynamicsError::InvalidBit {
                    pos,
                    value: other,
                }),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        OpinionState::from_bits(bits)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, u: usize) -> u8 {
        self.bits[u]
    }

    pub fn set(&mut self, u: usize, bit: u8) {
        debug_assert!(bit <= 1);
        let old = self.bits[u];
        self.bits[u] = bit;
        self.ones = self.ones + bit as usize - old as usize;
        debug_assert_eq!(
            self.ones,
            self.bits.iter().map(|&b| b as usize).sum::<usize>(),
            "ones cache diverged from bit vector"
        );
    }

    pub fn ones(&self) -> usize {
        self.ones
    }

    pub fn zeros(&self) -> usize {
        self.bits.len() - self.ones
    }

    pub fn is_all_one(&self) -> bool {
        self.ones == self.bits.len()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|&b| char::from(b'0' + b)).collect()
    }

    /// Sum of opinions over `u`'s neighborhood.
    pub fn ones_among_neighbors(&self, g: &Graph, u: usize) -> usize {
        g.neighbors(u)
            .iter()
            .map(|&v| self.bits[v as usize] as usize)
            .sum()
    }
}

/// The rule a node applies when the bias coin does not fire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateRule {
    Majority,
    Voter,
}

impl UpdateRule {
    pub fn value(self, g: &Graph, x: &OpinionState, u: usize, rng: &mut impl Rng) -> u8 {
        match self {
            UpdateRule::Majority => majority_value(g, x, u, rng),
            UpdateRule::Voter => voter_value(g, x, u, rng),
        }
    }
}

impl std::fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UpdateRule::Majority => write!(f, "majority"),
            UpdateRule::Voter => write!(f, "voter"),
        }
    }
}

impl std::str::FromStr for UpdateRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "majority" => Ok(UpdateRule::Majority),
            "voter" => Ok(UpdateRule::Voter),
            other => Err(format!("unknown update rule {other:?} (expected \"majority\" or \"voter\")")),
        }
    }
}

/// Bias strength, validated once at the boundary: alpha in [0, 1].
/// alpha = 0 is allowed here so the pure rules can be exercised on their
/// own; the engine additionally requires alpha > 0 before chasing
/// absorption.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasConfig {
    alpha: f64,
}

impl BiasConfig {
    pub fn new(alpha: f64) -> Result<Self, DynamicsError> {
        if alpha.is_finite() && (0.0..=1.0).contains(&alpha) {
            Ok(BiasConfig { alpha })
        } else {
            Err(DynamicsError::InvalidAlpha { alpha })
        }
    }

    pub fn alpha(self) -> f64 {
        self.alpha
    }
}

/// Majority over `u`'s neighborhood. Exact ties (even degree, half the
/// neighbors at 1) are resolved by one fair coin draw; the comparison is
/// `2 * ones` against `degree` in integers, so no float threshold is
/// involved.
pub fn majority_value(g: &Graph, x: &OpinionState, u: usize, rng: &mut impl Rng) -> u8 {
    let ones = x.ones_among_neighbors(g, u);
    let d = g.degree(u);
    match (2 * ones).cmp(&d) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => 0,
        std::cmp::Ordering::Equal => rng.random_bool(0.5) as u8,
    }
}

/// Copy the opinion of one uniformly random neighbor (one index draw).
pub fn voter_value(g: &Graph, x: &OpinionState, u: usize, rng: &mut impl Rng) -> u8 {
    let nbrs = g.neighbors(u);
    let v = nbrs[rng.random_range(0..nbrs.len())];
    x.get(v as usize)
}

/// One biased update of node `u`: adopt 1 with probability `alpha`
/// (consuming exactly one draw), otherwise defer to `rule`.
pub fn biased_update(
    rule: UpdateRule,
    bias: BiasConfig,
    g: &Graph,
    x: &OpinionState,
    u: usize,
    rng: &mut impl Rng,
) -> u8 {
    if rng.random_bool(bias.alpha()) {
        1
    } else {
        rule.value(g, x, u, rng)
    }
}
