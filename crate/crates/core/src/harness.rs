//! Experiment orchestration: alpha sweeps over a graph/rule pair, threshold
//! bracketing from censoring rates, ensemble-mean trajectories, and the
//! CSV/JSONL emitters used by the command-line front end.
//!
//! Output files are plain text with a `# schema=...` first line so
//! downstream plotting scripts can assert they were handed the layout they
//! expect. Sweep points run sequentially; parallelism lives inside each
//! ensemble.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::UpdateRule;
use crate::engine::{
    derive_seed, run_ensemble, run_ensemble_results, EngineError, RunConfig, RunResult,
};
use crate::graph::GraphSpec;

/// A sweep row counts as "slow" when at least this fraction of its runs hit
/// the step cap. Censoring is robust to the heavy right tail of absorption
/// times, which makes it a steadier classifier than any mean-based cut.
pub const DEFAULT_SLOW_FRACTION: f64 = 0.5;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("alpha grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

// ---------------------------------------------------------------------------
// alpha grids

/// Ascending, deduplicated bias values to sweep. Parsed from either
/// `log:LO:HI:COUNT` (geometric spacing, endpoints included — absorption
/// thresholds live on a log scale) or `list:a,b,c`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaGrid {
    values: Vec<f64>,
}

impl AlphaGrid {
    pub fn from_values(values: Vec<f64>) -> Result<Self, HarnessError> {
        if values.is_empty() {
            return Err(HarnessError::Grid("grid is empty".into()));
        }
        for &v in &values {
            if !v.is_finite() || v <= 0.0 || v > 1.0 {
                return Err(HarnessError::Grid(format!(
                    "alpha {v} outside (0, 1]"
                )));
            }
        }
        let mut values = values;
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        Ok(AlphaGrid { values })
    }

    pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Result<Self, HarnessError> {
        if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || hi > 1.0 || lo > hi {
            return Err(HarnessError::Grid(format!(
                "log grid needs 0 < LO <= HI <= 1, got {lo}:{hi}"
            )));
        }
        if count == 0 {
            return Err(HarnessError::Grid("log grid needs COUNT >= 1".into()));
        }
        if count == 1 {
            if lo != hi {
                return Err(HarnessError::Grid(
                    "log grid with COUNT=1 needs LO == HI".into(),
                ));
            }
            return Self::from_values(vec![lo]);
        }
        let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
        let mut values: Vec<f64> = (0..count)
            .map(|i| (ln_lo + (ln_hi - ln_lo) * i as f64 / (count - 1) as f64).exp())
            .collect();
        // pin the endpoints so rounding never pushes the last point past HI
        values[0] = lo;
        values[count - 1] = hi;
        Self::from_values(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl std::str::FromStr for AlphaGrid {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(rest) = s.strip_prefix("log:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(HarnessError::Grid(format!(
                    "expected log:LO:HI:COUNT, got '{s}'"
                )));
            }
            let lo: f64 = parts[0]
                .parse()
                .map_err(|_| HarnessError::Grid(format!("bad LO '{}'", parts[0])))?;
            let hi: f64 = parts[1]
                .parse()
                .map_err(|_| HarnessError::Grid(format!("bad HI '{}'", parts[1])))?;
            let count: usize = parts[2]
                .parse()
                .map_err(|_| HarnessError::Grid(format!("bad COUNT '{}'", parts[2])))?;
            Self::log_spaced(lo, hi, count)
        } else if let Some(rest) = s.strip_prefix("list:") {
            let values = rest
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|_| HarnessError::Grid(format!("bad alpha '{tok}'")))
                })
                .collect::<Result<Vec<f64>, _>>()?;
            Self::from_values(values)
        } else {
            Err(HarnessError::Grid(format!(
                "expected log:LO:HI:COUNT or list:a,b,c, got '{s}'"
            )))
        }
    }
}

// ---------------------------------------------------------------------------
// sweeps

/// One alpha sweep: a graph/rule pair, the grid, and the per-point ensemble
/// size. Point `j` of the grid runs with seed `derive_seed(seed, j)`, so
/// adding grid points never perturbs the others.
#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub graph: GraphSpec,
    pub rule: UpdateRule,
    pub grid: AlphaGrid,
    pub runs: usize,
    pub cap: u64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub runs: usize,
    pub absorbed: usize,
    pub censored: usize,
    pub mean: f64,
    pub median: f64,
    pub q90: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

/// Run one ensemble per grid point and tabulate absorption statistics.
/// `workers` follows the engine convention (0 = default thread pool).
pub fn sweep_alpha(cfg: &SweepConfig, workers: usize) -> Result<SweepTable, HarnessError> {
    let mut rows = Vec::with_capacity(cfg.grid.values().len());
    for (j, &alpha) in cfg.grid.values().iter().enumerate() {
        let mut point = RunConfig::new(cfg.graph.clone(), cfg.rule, alpha, derive_seed(cfg.seed, j as u64));
        point.cap = cfg.cap;
        let stats = run_ensemble(&point, cfg.runs, workers)?;
        rows.push(SweepRow {
            alpha,
            runs: stats.runs,
            absorbed: stats.absorbed,
            censored: stats.censored,
            mean: stats.mean,
            median: stats.median,
            q90: stats.q90,
            stderr: stats.stderr,
        });
    }
    Ok(SweepTable { rows })
}

// ---------------------------------------------------------------------------
// threshold detection

/// Result of scanning a sweep for the slow/fast boundary. `slow` is the
/// largest slow alpha, `fast` the smallest fast alpha above it; either side
/// is `None` when the table never reaches that regime. `monotone` is false
/// when a fast point sits below a slow one, in which case the bracket is
/// the conservative outermost one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdBracket {
    pub slow: Option<f64>,
    pub fast: Option<f64>,
    pub monotone: bool,
}

/// Classify each row by its censored fraction (>= `slow_fraction` means
/// slow) and bracket the transition. Rows must be sorted by alpha
/// ascending, which [`sweep_alpha`] guarantees.
pub fn detect_threshold(table: &SweepTable, slow_fraction: f64) -> ThresholdBracket {
    let flags: Vec<bool> = table
        .rows
        .iter()
        .map(|r| (r.censored as f64) >= slow_fraction * (r.runs as f64))
        .collect();
    let mut seen_fast = false;
    let mut monotone = true;
    for &slow in &flags {
        if slow && seen_fast {
            monotone = false;
        }
        if !slow {
            seen_fast = true;
        }
    }
    match flags.iter().rposition(|&slow| slow) {
        None => ThresholdBracket {
            slow: None,
            fast: table.rows.first().map(|r| r.alpha),
            monotone,
        },
        Some(last_slow) => ThresholdBracket {
            slow: Some(table.rows[last_slow].alpha),
            fast: table.rows.get(last_slow + 1).map(|r| r.alpha),
            monotone,
        },
    }
}

// ---------------------------------------------------------------------------
// trajectories

/// Ensemble-mean ones-count over sampled runs, on the grid 0, stride,
/// 2·stride, ... out to the last step any run took (rounded up to the
/// stride). Each run holds its final recorded value after it stops —
/// absorbed runs therefore contribute n to every later grid point. Every
/// result must carry a trajectory, i.e. come from a config with
/// `sample_every` set to this stride.
pub fn mean_trajectory(
    results: &[RunResult],
    stride: u64,
) -> Result<Vec<(u64, f64)>, HarnessError> {
    let stride = stride.max(1);
    let trajectories: Vec<&[(u64, usize)]> = results
        .iter()
        .map(|r| {
            r.trajectory
                .as_deref()
                .ok_or_else(|| HarnessError::Grid("run carries no trajectory samples".into()))
        })
        .collect::<Result<_, _>>()?;
    if trajectories.is_empty() {
        return Err(HarnessError::Grid("no runs to average".into()));
    }
    let max_steps = results.iter().map(|r| r.steps).max().unwrap_or(0);
    let grid_max = max_steps.div_ceil(stride) * stride;
    let mut cursors = vec![0usize; trajectories.len()];
    let mut out = Vec::with_capacity((grid_max / stride + 1) as usize);
    let mut t = 0u64;
    loop {
        let mut total = 0.0f64;
        for (traj, cursor) in trajectories.iter().zip(cursors.iter_mut()) {
            while *cursor + 1 < traj.len() && traj[*cursor + 1].0 <= t {
                *cursor += 1;
            }
            total += traj[*cursor].1 as f64;
        }
        out.push((t, total / trajectories.len() as f64));
        if t >= grid_max {
            break;
        }
        t += stride;
    }
    Ok(out)
}

/// [`mean_trajectory`] over a fresh ensemble of `config` (its
/// `sample_every` is the stride, default 1).
pub fn ensemble_mean_trajectory(
    config: &RunConfig,
    runs: usize,
    workers: usize,
) -> Result<Vec<(u64, f64)>, HarnessError> {
    let stride = config.sample_every.max(1);
    let mut cfg = config.clone();
    cfg.sample_every = stride;
    let results = run_ensemble_results(&cfg, runs, workers)?;
    mean_trajectory(&results, stride)
}

// ---------------------------------------------------------------------------
// writers

/// Per-run results: `# schema=opdyn-runs-v1`, columns seed,steps,absorbed.
/// Rows appear in run order (sub-stream 0, 1, ...), which together with the
/// shared seed pins every row to a reproducible stream.
pub fn write_runs_csv<W: Write>(w: &mut W, results: &[RunResult]) -> io::Result<()> {
    writeln!(w, "# schema=opdyn-runs-v1")?;
    writeln!(w, "seed,steps,absorbed")?;
    for r in results {
        writeln!(w, "{},{},{}", r.seed, r.steps, r.absorbed)?;
    }
    Ok(())
}

/// Full per-run records, one JSON object per line.
pub fn write_runs_jsonl<W: Write>(w: &mut W, results: &[RunResult]) -> io::Result<()> {
    for r in results {
        serde_json::to_writer(&mut *w, r)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Ensemble-mean trajectory: `# schema=opdyn-traj-v1`, columns t,ones.
pub fn write_trajectory_csv<W: Write>(w: &mut W, points: &[(u64, f64)]) -> io::Result<()> {
    writeln!(w, "# schema=opdyn-traj-v1")?;
    writeln!(w, "t,ones")?;
    for (t, ones) in points {
        writeln!(w, "{t},{ones}")?;
    }
    Ok(())
}

/// Sweep table: `# schema=opdyn-sweep-v1`, one row per grid point. Rows
/// with no absorbed runs carry NaN statistics, which downstream tooling
/// should treat as missing.
pub fn write_sweep_csv<W: Write>(w: &mut W, table: &SweepTable) -> io::Result<()> {
    writeln!(w, "# schema=opdyn-sweep-v1")?;
    writeln!(w, "alpha,runs,absorbed,censored,mean,median,q90,stderr")?;
    for r in &table.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.alpha, r.runs, r.absorbed, r.censored, r.mean, r.median, r.q90, r.stderr
        )?;
    }
    Ok(())
}

/// Plot-ready two-column file: `# schema=opdyn-sweep-plot-v1`, alpha vs
/// median absorption time.
pub fn write_sweep_plot_csv<W: Write>(w: &mut W, table: &SweepTable) -> io::Result<()> {
    writeln!(w, "# schema=opdyn-sweep-plot-v1")?;
    writeln!(w, "alpha,median")?;
    for r in &table.rows {
        writeln!(w, "{},{}", r.alpha, r.median)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(s: &str) -> AlphaGrid {
        s.parse().unwrap()
    }

    #[test]
    fn log_grid_hits_decade_points() {
        let g = grid("log:0.001:1:4");
        let want = [0.001, 0.01, 0.1, 1.0];
        assert_eq!(g.values().len(), 4);
        for (got, want) in g.values().iter().zip(want) {
            assert_relative_eq!(*got, want, max_relative = 1e-12);
        }
        assert_eq!(g.values()[0], 0.001);
        assert_eq!(g.values()[3], 1.0);
    }

    #[test]
    fn list_grid_sorts_and_dedupes() {
        let g = grid("list:0.5, 0.1,0.5,0.02");
        assert_eq!(g.values(), &[0.02, 0.1, 0.5]);
    }

    #[test]
    fn grid_rejects_malformed_input() {
        for bad in [
            "0.1:0.5:3",
            "log:0.1:0.5",
            "log:0:0.5:3",
            "log:0.5:0.1:3",
            "log:0.1:1.5:3",
            "log:0.1:0.5:0",
            "log:0.1:0.5:1",
            "list:",
            "list:0.1,nope",
            "list:0.1,0",
            "list:1.01",
        ] {
            assert!(bad.parse::<AlphaGrid>().is_err(), "accepted '{bad}'");
        }
        // single-point grids are fine in both syntaxes
        assert_eq!(grid("log:0.25:0.25:1").values(), &[0.25]);
        assert_eq!(grid("list:0.25").values(), &[0.25]);
    }

    #[test]
    fn sweep_is_deterministic_and_grid_stable() {
        let cfg = SweepConfig {
            graph: GraphSpec::Cycle(12),
            rule: UpdateRule::Voter,
            grid: grid("list:0.4,0.9"),
            runs: 30,
            cap: 100_000,
            seed: 5,
        };
        let a = sweep_alpha(&cfg, 0).unwrap();
        let b = sweep_alpha(&cfg, 1).unwrap();
        assert_eq!(a, b);
        assert!(a.rows.iter().all(|r| r.absorbed == 30));
        assert!(a.rows[0].alpha < a.rows[1].alpha);
        // a wider grid reproduces the shared points exactly, because each
        // point's seed comes from its own index
        let wider = SweepConfig {
            grid: grid("list:0.4,0.9,0.95"),
            ..cfg
        };
        let w = sweep_alpha(&wider, 0).unwrap();
        assert_eq!(w.rows[0], a.rows[0]);
        assert_eq!(w.rows[1], a.rows[1]);
    }

    #[test]
    fn full_bias_sweep_is_a_coupon_collector() {
        // alpha = 1 ignores the rule entirely: absorption needs every node
        // selected at least once, so the median sits near n*H_n = 21.7
        let cfg = SweepConfig {
            graph: GraphSpec::Cycle(8),
            rule: UpdateRule::Majority,
            grid: grid("list:1.0"),
            runs: 400,
            cap: 10_000,
            seed: 9,
        };
        let table = sweep_alpha(&cfg, 0).unwrap();
        let row = &table.rows[0];
        assert_eq!(row.censored, 0);
        assert!(
            row.median >= 14.0 && row.median <= 32.0,
            "median {} far from coupon-collector range",
            row.median
        );
    }

    #[test]
    fn censored_points_report_nan_statistics() {
        let cfg = SweepConfig {
            graph: GraphSpec::Cycle(30),
            rule: UpdateRule::Majority,
            grid: grid("list:0.1"),
            runs: 10,
            cap: 5, // 30 nodes cannot all flip in 5 steps
            seed: 3,
        };
        let table = sweep_alpha(&cfg, 0).unwrap();
        let row = &table.rows[0];
        assert_eq!(row.absorbed, 0);
        assert_eq!(row.censored, 10);
        assert!(row.mean.is_nan() && row.median.is_nan());
        let bracket = detect_threshold(&table, DEFAULT_SLOW_FRACTION);
        assert_eq!(bracket.slow, Some(0.1));
        assert_eq!(bracket.fast, None);
        assert!(bracket.monotone);
    }

    fn synthetic_row(alpha: f64, runs: usize, censored: usize) -> SweepRow {
        SweepRow {
            alpha,
            runs,
            absorbed: runs - censored,
            censored,
            mean: 10.0,
            median: 10.0,
            q90: 12.0,
            stderr: 1.0,
        }
    }

    #[test]
    fn threshold_brackets_a_clean_transition() {
        let table = SweepTable {
            rows: vec![
                synthetic_row(0.001, 100, 100),
                synthetic_row(0.003, 100, 97),
                synthetic_row(0.03, 100, 2),
                synthetic_row(0.1, 100, 0),
            ],
        };
        let b = detect_threshold(&table, 0.5);
        assert_eq!(b.slow, Some(0.003));
        assert_eq!(b.fast, Some(0.03));
        assert!(b.monotone);
    }

    #[test]
    fn threshold_open_brackets_and_boundary_fraction() {
        let all_fast = SweepTable {
            rows: vec![synthetic_row(0.01, 100, 0), synthetic_row(0.1, 100, 3)],
        };
        let b = detect_threshold(&all_fast, 0.5);
        assert_eq!((b.slow, b.fast), (None, Some(0.01)));
        // exactly half censored counts as slow
        let half = SweepTable {
            rows: vec![synthetic_row(0.01, 100, 50)],
        };
        assert_eq!(detect_threshold(&half, 0.5).slow, Some(0.01));
    }

    #[test]
    fn threshold_flags_non_monotone_tables() {
        let table = SweepTable {
            rows: vec![
                synthetic_row(0.001, 50, 50),
                synthetic_row(0.01, 50, 1), // fast dip below a slow point
                synthetic_row(0.05, 50, 49),
                synthetic_row(0.2, 50, 0),
            ],
        };
        let b = detect_threshold(&table, 0.5);
        assert_eq!(b.slow, Some(0.05));
        assert_eq!(b.fast, Some(0.2));
        assert!(!b.monotone);
    }

    #[test]
    fn mean_trajectory_of_full_bias_runs_rises_to_consensus() {
        let mut cfg = RunConfig::new(GraphSpec::Cycle(4), UpdateRule::Voter, 1.0, 21);
        cfg.sample_every = 2;
        let traj = ensemble_mean_trajectory(&cfg, 50, 0).unwrap();
        assert_eq!(traj[0], (0, 0.0));
        for pair in traj.windows(2) {
            assert_eq!(pair[1].0, pair[0].0 + 2);
            assert!(pair[1].1 >= pair[0].1, "ones can never fall at alpha=1");
        }
        assert_eq!(traj.last().unwrap().1, 4.0);
    }

    #[test]
    fn trajectory_grid_extends_to_the_slowest_run() {
        let mut cfg = RunConfig::new(GraphSpec::Cycle(6), UpdateRule::Voter, 0.5, 33);
        cfg.sample_every = 5;
        let results = run_ensemble_results(&cfg, 20, 0).unwrap();
        let max_steps = results.iter().map(|r| r.steps).max().unwrap();
        let traj = ensemble_mean_trajectory(&cfg, 20, 0).unwrap();
        let last_t = traj.last().unwrap().0;
        assert!(last_t >= max_steps);
        assert!(last_t < max_steps + 5);
        assert_eq!(traj.last().unwrap().1, 6.0);
    }

    #[test]
    fn csv_writers_emit_frozen_layouts() {
        let table = SweepTable {
            rows: vec![SweepRow {
                alpha: 0.1,
                runs: 4,
                absorbed: 4,
                censored: 0,
                mean: 12.5,
                median: 12.0,
                q90: 14.0,
                stderr: 0.5,
            }],
        };
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &table).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# schema=opdyn-sweep-v1\nalpha,runs,absorbed,censored,mean,median,q90,stderr\n0.1,4,4,0,12.5,12,14,0.5\n"
        );
        let mut buf = Vec::new();
        write_sweep_plot_csv(&mut buf, &table).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# schema=opdyn-sweep-plot-v1\nalpha,median\n0.1,12\n"
        );

        let results = vec![
            RunResult {
                seed: 7,
                stream: 0,
                steps: 42,
                absorbed: true,
                final_ones: 5,
                trajectory: None,
            },
            RunResult {
                seed: 7,
                stream: 1,
                steps: 10,
                absorbed: false,
                final_ones: 3,
                trajectory: None,
            },
        ];
        let mut buf = Vec::new();
        write_runs_csv(&mut buf, &results).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# schema=opdyn-runs-v1\nseed,steps,absorbed\n7,42,true\n7,10,false\n"
        );

        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &[(0, 0.0), (5, 2.25)]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# schema=opdyn-traj-v1\nt,ones\n0,0\n5,2.25\n"
        );
    }

    #[test]
    fn jsonl_lines_parse_back_as_records() {
        let results = vec![RunResult {
            seed: 11,
            stream: 2,
            steps: 99,
            absorbed: true,
            final_ones: 8,
            trajectory: Some(vec![(0, 0), (99, 8)]),
        }];
        let mut buf = Vec::new();
        write_runs_jsonl(&mut buf, &results).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let value: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(value["seed"], 11);
        assert_eq!(value["stream"], 2);
        assert_eq!(value["steps"], 99);
        assert_eq!(value["absorbed"], true);
        assert_eq!(value["trajectory"][1][1], 8);
    }
}
