//! Process execution: single steps, runs to absorption, and seeded
//! ensembles.
//!
//! RNG layout. Everything derives from one `u64` seed through ChaCha8.
//! Run `i` of an ensemble gets `ChaCha8Rng::seed_from_u64(seed)` switched to
//! stream `i`; a standalone run is stream 0, so an ensemble of one run
//! reproduces it exactly. Streams are independent by construction, which
//! makes ensembles embarrassingly parallel with no coordination: results
//! are collected in run order and are byte-identical for any worker count,
//! including the sequential build (`--no-default-features`).
//!
//! Draw order within a step is fixed and documented: one draw for the node
//! index, then the bias coin, then whatever the rule needs (see
//! [`crate::dynamics`]). Tests rely on this to replay runs draw by draw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::analysis;
use crate::dynamics::{biased_update, BiasConfig, OpinionState, UpdateRule};
use crate::graph::{Graph, GraphError, GraphSpec};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("absorption requires bias alpha in (0, 1], got {alpha}")]
    InvalidAlpha { alpha: f64 },
    #[error("step cap must be at least 1")]
    ZeroCap,
    #[error("initial state has {got} bits but the graph has {expected} nodes")]
    InitialLength { expected: usize, got: usize },
    #[error("ensemble needs at least one run")]
    ZeroRuns,
    #[error("could not build worker pool: {0}")]
    WorkerPool(String),
}

/// Where a run starts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InitialState {
    AllZero,
    AllOne,
    Bits(Vec<u8>),
}

impl InitialState {
    pub fn materialize(&self, n: usize) -> Result<OpinionState, EngineError> {
        match self {
            InitialState::AllZero => Ok(OpinionState::all_zero(n)),
            InitialState::AllOne => Ok(OpinionState::all_one(n)),
            InitialState::Bits(bits) => {
                if bits.len() != n {
                    return Err(EngineError::InitialLength {
                        expected: n,
                        got: bits.len(),
                    });
                }
                OpinionState::from_bits(bits.clone())
                    .map_err(|_| EngineError::InitialLength { expected: n, got: bits.len() })
            }
        }
    }
}

impl std::str::FromStr for InitialState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(InitialState::AllZero),
            "one" => Ok(InitialState::AllOne),
            bits if !bits.is_empty() && bits.bytes().all(|c| c == b'0' || c == b'1') => {
                Ok(InitialState::Bits(bits.bytes().map(|c| c - b'0').collect()))
            }
            other => Err(format!(
                "bad initial state {other:?} (expected \"zero\", \"one\", or a 0/1 string)"
            )),
        }
    }
}

/// Full description of a run: what to simulate and how to seed it.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub graph: GraphSpec,
    pub rule: UpdateRule,
    pub alpha: f64,
    pub initial: InitialState,
    pub seed: u64,
    /// Hard step limit; a run that reaches it without absorbing is censored.
    pub cap: u64,
    /// Record `(t, ones)` at every multiple of this period (plus the final
    /// step); 0 disables trajectory recording.
    pub sample_every: u64,
}

/// Default step cap: generous enough that censoring means "genuinely slow".
pub const DEFAULT_CAP: u64 = 1_000_000_000;

impl RunConfig {
    pub fn new(graph: GraphSpec, rule: UpdateRule, alpha: f64, seed: u64) -> Self {
        RunConfig {
            graph,
            rule,
            alpha,
            initial: InitialState::AllZero,
            seed,
            cap: DEFAULT_CAP,
            sample_every: 0,
        }
    }

    fn validate(&self) -> Result<BiasConfig, EngineError> {
        let bias = BiasConfig::new(self.alpha)
            .map_err(|_| EngineError::InvalidAlpha { alpha: self.alpha })?;
        if !(self.alpha > 0.0) {
            return Err(EngineError::InvalidAlpha { alpha: self.alpha });
        }
        if self.cap == 0 {
            return Err(EngineError::ZeroCap);
        }
        Ok(bias)
    }
}

/// Outcome of one run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunResult {
    /// Base seed the run was derived from.
    pub seed: u64,
    /// RNG stream index within that seed (run index in an ensemble).
    pub stream: u64,
    /// Steps taken: the absorption time, or the cap if censored.
    pub steps: u64,
    pub absorbed: bool,
    /// Ones count when the run stopped (n exactly when absorbed).
    pub final_ones: usize,
    /// `(t, ones)` samples, present when `sample_every > 0`; times are
    /// strictly increasing and always include 0 and the final step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<(u64, usize)>>,
}

/// RNG for stream `stream` of `seed`; the project-wide randomness scheme.
pub fn substream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stable derivation of an unrelated child seed (SplitMix64 finalizer over
/// the pair). Used by sweeps so each grid point gets its own seed space.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One step of the process: pick a node uniformly, apply the biased update,
/// write the result back. Returns `(node, new_opinion)`.
pub fn step(
    g: &Graph,
    x: &mut OpinionState,
    rule: UpdateRule,
    bias: BiasConfig,
    rng: &mut impl Rng,
) -> (usize, u8) {
    let u = rng.random_range(0..g.node_count());
    let bit = biased_update(rule, bias, g, x, u, rng);
    x.set(u, bit);
    (u, bit)
}

fn run_stream(g: &Graph, config: &RunConfig, bias: BiasConfig, stream: u64) -> RunResult {
    let n = g.node_count();
    let mut x = config
        .initial
        .materialize(n)
        .expect("validated before dispatch");
    let mut rng = substream_rng(config.seed, stream);
    let sample = config.sample_every;
    let mut trajectory = (sample > 0).then(|| vec![(0u64, x.ones())]);

    if x.is_all_one() {
        return RunResult {
            seed: config.seed,
            stream,
            steps: 0,
            absorbed: true,
            final_ones: n,
            trajectory,
        };
    }

    let mut steps = config.cap;
    let mut absorbed = false;
    for t in 1..=config.cap {
        step(g, &mut x, config.rule, bias, &mut rng);
        let on_grid = sample > 0 && t % sample == 0;
        if on_grid {
            trajectory.as_mut().unwrap().push((t, x.ones()));
        }
        if x.is_all_one() {
            steps = t;
            absorbed = true;
            if sample > 0 && !on_grid {
                trajectory.as_mut().unwrap().push((t, x.ones()));
            }
            break;
        }
        if t == config.cap && sample > 0 && !on_grid {
            trajectory.as_mut().unwrap().push((t, x.ones()));
        }
    }

    RunResult {
        seed: config.seed,
        stream,
        steps,
        absorbed,
        final_ones: x.ones(),
        trajectory,
    }
}

/// Runs stream 0 of `config` until absorption or the cap.
pub fn run_to_absorption(config: &RunConfig) -> Result<RunResult, EngineError> {
    let bias = config.validate()?;
    let g = config.graph.build()?;
    config.initial.materialize(g.node_count())?;
    Ok(run_stream(&g, config, bias, 0))
}

/// Runs streams `0..runs`, in parallel when the `parallel` feature is on.
/// `workers = 0` means "use the default pool"; any other value pins the
/// worker count. The result vector is in stream order regardless.
pub fn run_ensemble_results(
    config: &RunConfig,
    runs: usize,
    workers: usize,
) -> Result<Vec<RunResult>, EngineError> {
    if runs == 0 {
        return Err(EngineError::ZeroRuns);
    }
    let bias = config.validate()?;
    let g = config.graph.build()?;
    config.initial.materialize(g.node_count())?;
    map_indexed(runs, workers, |i| run_stream(&g, config, bias, i as u64))
}

/// Ensemble summary: [`run_ensemble_results`] reduced to [`EnsembleStats`].
pub fn run_ensemble(
    config: &RunConfig,
    runs: usize,
    workers: usize,
) -> Result<EnsembleStats, EngineError> {
    let results = run_ensemble_results(config, runs, workers)?;
    Ok(EnsembleStats::from_results(&results))
}

#[cfg(feature = "parallel")]
fn map_indexed<T, F>(count: usize, workers: usize, f: F) -> Result<Vec<T>, EngineError>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if workers == 0 {
        Ok((0..count).into_par_iter().map(f).collect())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| EngineError::WorkerPool(e.to_string()))?;
        Ok(pool.install(|| (0..count).into_par_iter().map(f).collect()))
    }
}

#[cfg(not(feature = "parallel"))]
fn map_indexed<T, F>(count: usize, _workers: usize, f: F) -> Result<Vec<T>, EngineError>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    Ok((0..count).map(f).collect())
}

/// Summary statistics over an ensemble. Location statistics (mean, median,
/// q90, stderr) are taken over the absorbed runs only and are NaN when
/// every run was censored.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub runs: usize,
    pub absorbed: usize,
    pub censored: usize,
    pub mean: f64,
    pub median: f64,
    pub q90: f64,
    pub stderr: f64,
}

impl EnsembleStats {
    pub fn from_results(results: &[RunResult]) -> Self {
        let mut taus: Vec<f64> = results
            .iter()
            .filter(|r| r.absorbed)
            .map(|r| r.steps as f64)
            .collect();
        taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let absorbed = taus.len();
        let (mean, median, q90, stderr) = if absorbed == 0 {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            let (mean, se) = analysis::mean_ci(&taus, 1.0).expect("nonempty");
            (
                mean,
                analysis::quantile(&taus, 0.5),
                analysis::quantile(&taus, 0.9),
                se,
            )
        };
        EnsembleStats {
            runs: results.len(),
            absorbed,
            censored: results.len() - absorbed,
            mean,
            median,
            q90,
            stderr,
        }
    }
}
