//! Closed-form expectations, birth–death chain utilities, cycle structure
//! counts, and exact brute-force oracles for small graphs.
//!
//! The exact oracles enumerate the full 2^n state space, so they carry hard
//! node caps: 16 nodes for distribution propagation, 12 for the absorption
//! linear system. They exist to check the simulator and the closed forms
//! against an independent computation path, so they deliberately share no
//! sampling code with the engine — only the rule definitions themselves.

use std::cmp::Ordering;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{OpinionState, UpdateRule};
use crate::engine::substream_rng;
use crate::graph::Graph;

/// Node cap for full-distribution propagation (2^n states).
pub const MAX_EXACT_STATE_NODES: usize = 16;
/// Node cap for the exact absorption-time solve.
pub const MAX_ABSORPTION_NODES: usize = 12;
/// Transient systems up to 2^8 states are solved by dense elimination;
/// larger ones fall back to Gauss–Seidel iteration.
const DENSE_ABSORPTION_NODES: usize = 8;
/// Step cap for distribution propagation, to keep `exact` CLI calls sane.
pub const MAX_EXACT_STEPS: u64 = 100_000;

const GS_MAX_SWEEPS: usize = 200_000;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("graph is not a single cycle (need connected and 2-regular)")]
    NotACycle,
    #[error("state vector has {got} bits but the graph has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
    #[error("exact computation supports at most {max} nodes, got {n}")]
    StateTooLarge { n: usize, max: usize },
    #[error("exact propagation supports at most {max} steps, got {t}")]
    TooManySteps { t: u64, max: u64 },
    #[error("bias alpha must lie in {range}, got {alpha}")]
    InvalidAlpha { alpha: f64, range: &'static str },
    #[error("step rates must be positive with up + down <= 1, got up = {up}, down = {down}")]
    RateOutOfRange { up: f64, down: f64 },
    #[error("equal up and down rates make the hit probability formula singular")]
    EqualRates,
    #[error("start state {start} outside chain 0..={top}")]
    StartOutOfRange { start: usize, top: usize },
    #[error("eps must lie strictly between 0 and 1, got {eps}")]
    EpsOutOfRange { eps: f64 },
    #[error("no samples")]
    EmptySamples,
    #[error("absorption solve did not converge after {sweeps} sweeps (residual {residual:.3e})")]
    NoConvergence { sweeps: usize, residual: f64 },
}

fn check_alpha_closed(alpha: f64) -> Result<(), AnalysisError> {
    if alpha.is_finite() && (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(AnalysisError::InvalidAlpha {
            alpha,
            range: "[0, 1]",
        })
    }
}

fn check_alpha_positive(alpha: f64) -> Result<(), AnalysisError> {
    if alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(AnalysisError::InvalidAlpha {
            alpha,
            range: "(0, 1]",
        })
    }
}

// ---------------------------------------------------------------------------
// sample statistics

/// Sample mean and `z`-scaled half-width `z * s / sqrt(len)` using the
/// unbiased sample standard deviation. A single sample has half-width 0.
pub fn mean_ci(samples: &[f64], z: f64) -> Result<(f64, f64), AnalysisError> {
    if samples.is_empty() {
        return Err(AnalysisError::EmptySamples);
    }
    let len = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / len;
    if samples.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (len - 1.0);
    Ok((mean, z * (var / len).sqrt()))
}

/// Linear-interpolation quantile of an ascending-sorted slice.
pub(crate) fn quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&p));
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

// ---------------------------------------------------------------------------
// cycle structure

/// Exact half-integer, stored in half-units so the cycle category identity
/// can be checked without floating point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct HalfInt {
    halves: i64,
}

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt { halves: 0 };

    pub fn from_halves(halves: i64) -> Self {
        HalfInt { halves }
    }

    pub fn halves(self) -> i64 {
        self.halves
    }

    pub fn as_f64(self) -> f64 {
        self.halves as f64 / 2.0
    }

    pub fn is_zero(self) -> bool {
        self.halves == 0
    }
}

impl std::fmt::Display for HalfInt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.halves % 2 == 0 {
            write!(f, "{}", self.halves / 2)
        } else {
            write!(f, "{}/2", self.halves)
        }
    }
}

/// Counts of cycle nodes by opinion and by which side of the ring disagrees
/// with them. Taking "right" as the direction of a fixed walk around the
/// cycle (node id order on generated cycles):
///
/// * `b`: both neighbors disagree;
/// * `r`: only the right neighbor disagrees;
/// * `l`: only the left neighbor disagrees;
/// * `z`: neither neighbor disagrees.
///
/// The suffix is the node's own opinion. Flipping the walk direction swaps
/// `r` and `l`, which no downstream quantity depends on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CategoryCounts {
    pub b0: usize,
    pub b1: usize,
    pub r0: usize,
    pub r1: usize,
    pub l0: usize,
    pub l1: usize,
    pub z0: usize,
    pub z1: usize,
}

impl CategoryCounts {
    /// Single-disagreement nodes with opinion 0.
    pub fn s0(&self) -> usize {
        self.r0 + self.l0
    }

    /// Single-disagreement nodes with opinion 1.
    pub fn s1(&self) -> usize {
        self.r1 + self.l1
    }

    pub fn total(&self) -> usize {
        self.b0 + self.b1 + self.s0() + self.s1() + self.z0 + self.z1
    }
}

/// Orders the nodes of a single cycle by walking it, starting at node 0
/// toward its smallest neighbor (so generated cycles come out in id order).
fn ring_order(g: &Graph) -> Vec<usize> {
    let n = g.node_count();
    let mut ring = Vec::with_capacity(n);
    ring.push(0usize);
    let mut prev = 0usize;
    let mut cur = g.neighbors(0)[0] as usize;
    while cur != 0 {
        ring.push(cur);
        let nb = g.neighbors(cur);
        let next = if nb[0] as usize == prev {
            nb[1] as usize
        } else {
            nb[0] as usize
        };
        prev = cur;
        cur = next;
    }
    debug_assert_eq!(ring.len(), n);
    ring
}

/// Buckets every node of a cycle by its opinion and disagreement pattern.
pub fn classify_cycle_nodes(g: &Graph, x: &OpinionState) -> Result<CategoryCounts, AnalysisError> {
    let n = g.node_count();
    if x.len() != n {
        return Err(AnalysisError::LengthMismatch {
            expected: n,
            got: x.len(),
        });
    }
    if !g.is_cycle() {
        return Err(AnalysisError::NotACycle);
    }
    let ring = ring_order(g);
    let mut counts = CategoryCounts::default();
    for pos in 0..n {
        let v = ring[pos];
        let left = ring[(pos + n - 1) % n];
        let right = ring[(pos + 1) % n];
        let own = x.get(v);
        let left_differs = x.get(left) != own;
        let right_differs = x.get(right) != own;
        let slot = match (own, left_differs, right_differs) {
            (0, true, true) => &mut counts.b0,
            (1, true, true) => &mut counts.b1,
            (0, false, true) => &mut counts.r0,
            (1, false, true) => &mut counts.r1,
            (0, true, false) => &mut counts.l0,
            (1, true, false) => &mut counts.l1,
            (0, false, false) => &mut counts.z0,
            (_, false, false) => &mut counts.z1,
            _ => unreachable!(),
        };
        *slot += 1;
    }
    debug_assert_eq!(counts.total(), n);
    Ok(counts)
}

/// The category-count identity residual `(b0 + s0/2) - (b1 + s1/2)`, exact
/// in half-units. On any cycle state this is zero: walking the ring, 0->1
/// and 1->0 boundaries alternate, which pins the two weighted counts to the
/// same value.
pub fn structural_residual(counts: &CategoryCounts) -> HalfInt {
    let zero_side = 2 * counts.b0 as i64 + counts.s0() as i64;
    let one_side = 2 * counts.b1 as i64 + counts.s1() as i64;
    HalfInt::from_halves(zero_side - one_side)
}

/// One-step transition probabilities for the ones-count of a biased
/// majority process on a cycle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransitionProbs {
    /// Probability the ones-count increases by 1.
    pub p: f64,
    /// Probability the ones-count decreases by 1.
    pub q: f64,
    /// Probability the ones-count is unchanged.
    pub r: f64,
}

/// Exact one-step up/down/stay probabilities of the ones-count for biased
/// majority on a cycle in state `x`:
///
/// * p = alpha * (n - k) / n + (1 - alpha) * (b0 + s0/2) / n
/// * q = (1 - alpha) * (b1 + s1/2) / n
///
/// A both-disagreeing node flips outright under majority, a single-
/// disagreement node flips on the fair tie coin, and an agreeing node only
/// moves on the bias coin. The category identity makes the drift
/// `p - q = alpha * (n - k) / n` exactly.
pub fn cycle_transition_probs(
    g: &Graph,
    x: &OpinionState,
    alpha: f64,
) -> Result<TransitionProbs, AnalysisError> {
    check_alpha_closed(alpha)?;
    let counts = classify_cycle_nodes(g, x)?;
    let n = g.node_count() as f64;
    let k = x.ones() as f64;
    // category weights in half-units, divided out once
    let zero_halves = (2 * counts.b0 + counts.s0()) as f64;
    let one_halves = (2 * counts.b1 + counts.s1()) as f64;
    let p = alpha * (n - k) / n + (1.0 - alpha) * zero_halves / (2.0 * n);
    let q = (1.0 - alpha) * one_halves / (2.0 * n);
    Ok(TransitionProbs { p, q, r: 1.0 - p - q })
}

// ---------------------------------------------------------------------------
// birth–death chains

/// Probability that a birth–death walk on `0..=top` started at `start`,
/// moving up with probability `up` and down with probability `down` each
/// step (staying put otherwise), reaches `top` before 0:
///
/// ((down/up)^start - 1) / ((down/up)^top - 1)
///
/// Evaluated in log space when `down > up` so large chains neither overflow
/// nor lose the ratio; extreme parameters may underflow to exactly 0, which
/// is the honest answer at f64 precision. `up == down` is rejected (the
/// formula degenerates to `start/top`, a case this toolkit never needs).
pub fn bd_hit_probability(
    top: usize,
    start: usize,
    up: f64,
    down: f64,
) -> Result<f64, AnalysisError> {
    if !(up > 0.0 && down > 0.0 && up + down <= 1.0) || !up.is_finite() || !down.is_finite() {
        return Err(AnalysisError::RateOutOfRange { up, down });
    }
    if up == down {
        return Err(AnalysisError::EqualRates);
    }
    if start > top || top == 0 {
        return Err(AnalysisError::StartOutOfRange { start, top });
    }
    if start == 0 {
        return Ok(0.0);
    }
    if start == top {
        return Ok(1.0);
    }
    let rho = down / up;
    if rho < 1.0 {
        // rho^m decays; the direct form is stable
        let num = 1.0 - rho.powi(start as i32);
        let den = 1.0 - rho.powi(top as i32);
        return Ok(num / den);
    }
    // rho > 1: evaluate (rho^k - 1)/(rho^n - 1) in log space, writing
    // ln(rho^m - 1) = m ln(rho) + ln(1 - rho^-m) so only the tiny tail
    // terms ever leave the exponent.
    let ln_rho = rho.ln();
    // ln(1 - rho^-m); the inner exp underflows to 0 for huge m, which
    // correctly collapses the tail to ln(1) = 0
    let ln_tail = |m: usize| (-(-(m as f64) * ln_rho).exp()).ln_1p();
    let ln_ratio = (start as f64 - top as f64) * ln_rho + ln_tail(start) - ln_tail(top);
    Ok(ln_ratio.exp())
}

/// Monte Carlo companion to [`bd_hit_probability`]: simulate the chain
/// `trials` times and report the frequency of hitting `top` before 0.
pub fn bd_hit_frequency(
    top: usize,
    start: usize,
    up: f64,
    down: f64,
    trials: usize,
    seed: u64,
) -> f64 {
    let mut rng = substream_rng(seed, 0);
    let mut hits = 0usize;
    for _ in 0..trials {
        let mut k = start;
        loop {
            if k == 0 {
                break;
            }
            if k == top {
                hits += 1;
                break;
            }
            let u: f64 = rng.random();
            if u < up {
                k += 1;
            } else if u < up + down {
                k -= 1;
            }
        }
    }
    hits as f64 / trials as f64
}

/// Per-step rates at which the ones-count inside node `u`'s neighborhood
/// moves, while every neighborhood involved is still strictly below its
/// majority threshold (so non-bias updates write 0): with `ones` of the
/// `degree` neighbors at 1,
///
/// * up   = alpha * (degree - ones) / n
/// * down = (1 - alpha) * ones / n
pub fn node_bd_rates(degree: usize, ones: usize, alpha: f64, n: usize) -> (f64, f64) {
    debug_assert!(ones <= degree);
    debug_assert!(n >= 1);
    debug_assert!((0.0..=1.0).contains(&alpha));
    let nf = n as f64;
    (
        alpha * (degree - ones) as f64 / nf,
        (1.0 - alpha) * ones as f64 / nf,
    )
}

/// Lower bound on the expected absorption time of biased majority on any
/// graph with minimum degree `min_degree`, valid when alpha <= (1-eps)/2:
/// `exp(eps^2 * min_degree / 6) / (6n)`. Grows exponentially in the minimum
/// degree, which is what separates dense graphs from sparse ones.
pub fn min_degree_lower_bound(n: usize, min_degree: usize, eps: f64) -> Result<f64, AnalysisError> {
    if !(eps > 0.0 && eps < 1.0) || !eps.is_finite() {
        return Err(AnalysisError::EpsOutOfRange { eps });
    }
    Ok((eps * eps * min_degree as f64 / 6.0).exp() / (6.0 * n as f64))
}

// ---------------------------------------------------------------------------
// closed-form expectations

/// Expected ones-count after `t` steps of biased majority on a cycle of
/// size `n` started all-zero: `n * (1 - (1 - alpha/n)^t)`. Exact — the
/// cycle category identity cancels every rule term in the drift.
pub fn cycle_expected_ones(n: usize, alpha: f64, t: u64) -> f64 {
    let nf = n as f64;
    nf * (1.0 - (1.0 - alpha / nf).powf(t as f64))
}

/// Expected zeros after `t` steps of the biased voter process started
/// all-zero, on any graph with `n` nodes: `n * (1 - alpha/n)^t`. Exact: the
/// random-walk smoothing term averages out when every node starts equal.
pub fn voter_expected_zeros(n: usize, alpha: f64, t: u64) -> f64 {
    n as f64 * (1.0 - alpha / n as f64).powf(t as f64)
}

/// Per-node expected deficit `E[1 - x_v(t)]` of the biased voter process
/// from an arbitrary start, by `t` sparse products with the one-step
/// smoothing operator
///
/// y' = ((1 - alpha) * P y + (n - 1) * y) / n,
///
/// where `P` is the simple-random-walk matrix (average over neighbors).
/// The voter update is linear in the state, so this recursion is exact.
pub fn voter_expected_deficit(
    g: &Graph,
    x0: &OpinionState,
    alpha: f64,
    t: u64,
) -> Result<Vec<f64>, AnalysisError> {
    check_alpha_closed(alpha)?;
    let n = g.node_count();
    if x0.len() != n {
        return Err(AnalysisError::LengthMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    let nf = n as f64;
    let mut y: Vec<f64> = x0.bits().iter().map(|&b| 1.0 - f64::from(b)).collect();
    let mut walk = vec![0.0f64; n];
    for _ in 0..t {
        for v in 0..n {
            let nbrs = g.neighbors(v);
            walk[v] = nbrs.iter().map(|&w| y[w as usize]).sum::<f64>() / nbrs.len() as f64;
        }
        for v in 0..n {
            y[v] = ((1.0 - alpha) * walk[v] + (nf - 1.0) * y[v]) / nf;
        }
    }
    Ok(y)
}

// ---------------------------------------------------------------------------
// exact oracles (2^n enumeration)

/// P[node u writes 1 | current state s] for every (u, s), bias folded in.
fn one_prob_table(g: &Graph, rule: UpdateRule, alpha: f64) -> Vec<f64> {
    let n = g.node_count();
    let states = 1usize << n;
    let masks: Vec<u32> = (0..n)
        .map(|u| {
            g.neighbors(u)
                .iter()
                .fold(0u32, |m, &v| m | (1u32 << v))
        })
        .collect();
    let mut table = vec![0.0f64; n * states];
    for u in 0..n {
        let d = g.degree(u) as u32;
        for s in 0..states {
            let k = (s as u32 & masks[u]).count_ones();
            let rule_one = match rule {
                UpdateRule::Voter => f64::from(k) / f64::from(d),
                UpdateRule::Majority => match (2 * k).cmp(&d) {
                    Ordering::Greater => 1.0,
                    Ordering::Less => 0.0,
                    Ordering::Equal => 0.5,
                },
            };
            table[u * states + s] = alpha + (1.0 - alpha) * rule_one;
        }
    }
    table
}

fn state_index(x0: &OpinionState) -> usize {
    x0.bits()
        .iter()
        .enumerate()
        .fold(0usize, |s, (v, &b)| s | ((b as usize) << v))
}

/// Exact per-node expectation `E[x_v(t)]` by propagating the full state
/// distribution `t` steps. Brute force over 2^n states; n <= 16.
pub fn exact_expected_state(
    g: &Graph,
    rule: UpdateRule,
    alpha: f64,
    x0: &OpinionState,
    t: u64,
) -> Result<Vec<f64>, AnalysisError> {
    check_alpha_closed(alpha)?;
    let n = g.node_count();
    if n > MAX_EXACT_STATE_NODES {
        return Err(AnalysisError::StateTooLarge {
            n,
            max: MAX_EXACT_STATE_NODES,
        });
    }
    if x0.len() != n {
        return Err(AnalysisError::LengthMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    if t > MAX_EXACT_STEPS {
        return Err(AnalysisError::TooManySteps {
            t,
            max: MAX_EXACT_STEPS,
        });
    }
    let states = 1usize << n;
    let table = one_prob_table(g, rule, alpha);
    let mut dist = vec![0.0f64; states];
    dist[state_index(x0)] = 1.0;
    let mut next = vec![0.0f64; states];
    let nf = n as f64;
    for _ in 0..t {
        // gather form: each target state pulls from its 2n predecessors
        // (same state with node u's bit at either value), so the sum order
        // is fixed and the update is deterministic.
        for (s2, slot) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for u in 0..n {
                let bit = 1usize << u;
                let target_one = s2 & bit != 0;
                for prev in [s2 & !bit, s2 | bit] {
                    let p_one = table[u * states + prev];
                    let p = if target_one { p_one } else { 1.0 - p_one };
                    acc += dist[prev] * p;
                }
            }
            *slot = acc / nf;
        }
        std::mem::swap(&mut dist, &mut next);
        debug_assert!(
            (dist.iter().sum::<f64>() - 1.0).abs() < 1e-9,
            "distribution mass drifted"
        );
    }
    let mut expect = vec![0.0f64; n];
    for (s, &mass) in dist.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        for (v, e) in expect.iter_mut().enumerate() {
            if s & (1 << v) != 0 {
                *e += mass;
            }
        }
    }
    Ok(expect)
}

/// Exact expected absorption time E[tau] from `x0`, by solving the linear
/// system `E(s) = 1 + sum_s' K(s, s') E(s')` over the 2^n - 1 transient
/// states. Dense elimination up to 8 nodes, Gauss–Seidel (sweeping states
/// nearest absorption first, residual <= 1e-10 relative to the solution
/// scale) up to 12.
pub fn exact_expected_absorption(
    g: &Graph,
    rule: UpdateRule,
    alpha: f64,
    x0: &OpinionState,
) -> Result<f64, AnalysisError> {
    check_alpha_positive(alpha)?;
    let n = g.node_count();
    if n > MAX_ABSORPTION_NODES {
        return Err(AnalysisError::StateTooLarge {
            n,
            max: MAX_ABSORPTION_NODES,
        });
    }
    if x0.len() != n {
        return Err(AnalysisError::LengthMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    if x0.is_all_one() {
        return Ok(0.0);
    }
    let table = one_prob_table(g, rule, alpha);
    let expectations = if n <= DENSE_ABSORPTION_NODES {
        absorption_dense(g, &table)
    } else {
        absorption_gauss_seidel(g, &table)?
    };
    Ok(expectations[state_index(x0)])
}

fn absorption_dense(g: &Graph, table: &[f64]) -> Vec<f64> {
    let n = g.node_count();
    let states = 1usize << n;
    let transient = states - 1; // all-ones (index states-1) is absorbing
    let nf = n as f64;
    let mut a = vec![vec![0.0f64; transient]; transient];
    let mut rhs = vec![1.0f64; transient];
    for (s, row) in a.iter_mut().enumerate() {
        row[s] = 1.0;
        for u in 0..n {
            let bit = 1usize << u;
            let p_one = table[u * states + s];
            let s_up = s | bit;
            let s_dn = s & !bit;
            if s_up < transient {
                row[s_up] -= p_one / nf;
            }
            row[s_dn] -= (1.0 - p_one) / nf; // s_dn < transient always
        }
    }
    solve_dense(&mut a, &mut rhs);
    rhs
}

/// In-place Gaussian elimination with partial pivoting; solution lands in
/// `rhs`. The absorption matrices are weakly diagonally dominant, so this
/// is well within its comfort zone.
fn solve_dense(a: &mut [Vec<f64>], rhs: &mut [f64]) {
    let m = rhs.len();
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        let diag = a[col][col];
        for row in (col + 1)..m {
            let factor = a[row][col] / diag;
            if factor == 0.0 {
                continue;
            }
            // split_at_mut so we can read the pivot row while editing
            let (top, bottom) = a.split_at_mut(row);
            let pivot_row = &top[col];
            let target = &mut bottom[0];
            for c in col..m {
                target[c] -= factor * pivot_row[c];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    for row in (0..m).rev() {
        let mut acc = rhs[row];
        for c in (row + 1)..m {
            acc -= a[row][c] * rhs[c];
        }
        rhs[row] = acc / a[row][row];
    }
}

fn absorption_gauss_seidel(g: &Graph, table: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    let n = g.node_count();
    let states = 1usize << n;
    let absorbing = states - 1;
    let nf = n as f64;
    // Sweep the states closest to absorption first: the dominant flow is
    // upward in ones-count, so this propagates boundary information fast.
    let mut order: Vec<usize> = (0..absorbing).collect();
    order.sort_by_key(|&s| std::cmp::Reverse(s.count_ones()));
    let mut e = vec![0.0f64; states]; // e[absorbing] stays 0

    let row_parts = |s: usize, e: &[f64]| -> (f64, f64) {
        let mut other = 0.0;
        let mut self_w = 0.0;
        for u in 0..n {
            let bit = 1usize << u;
            let p_one = table[u * states + s];
            let s_up = s | bit;
            if s_up == s {
                self_w += p_one;
            } else if s_up != absorbing {
                other += p_one * e[s_up];
            }
            let s_dn = s & !bit;
            if s_dn == s {
                self_w += 1.0 - p_one;
            } else {
                other += (1.0 - p_one) * e[s_dn];
            }
        }
        (other, self_w)
    };

    let mut residual = f64::INFINITY;
    for sweep in 1..=GS_MAX_SWEEPS {
        for &s in &order {
            let (other, self_w) = row_parts(s, &e);
            e[s] = (nf + other) / (nf - self_w);
        }
        let scale = e.iter().fold(1.0f64, |m, &v| m.max(v.abs()));
        residual = order
            .iter()
            .map(|&s| {
                let (other, self_w) = row_parts(s, &e);
                (e[s] - (nf + other + self_w * e[s]) / nf).abs()
            })
            .fold(0.0f64, f64::max);
        if residual <= 1e-10 * scale {
            return Ok(e);
        }
        if sweep == GS_MAX_SWEEPS {
            break;
        }
    }
    Err(AnalysisError::NoConvergence {
        sweeps: GS_MAX_SWEEPS,
        residual,
    })
}
