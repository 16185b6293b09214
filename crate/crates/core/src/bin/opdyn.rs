//! Command-line front end: graph generation, ensemble simulation, alpha
//! sweeps, the exact small-graph oracles, and the verification suite.
//!
//! All outputs are deterministic functions of the flags, so rerunning a
//! command reproduces its files byte for byte.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use opinion_dynamics::dynamics::{OpinionState, UpdateRule};
use opinion_dynamics::engine::{
    run_ensemble_results, EnsembleStats, InitialState, RunConfig, DEFAULT_CAP,
};
use opinion_dynamics::graph::GraphSpec;
use opinion_dynamics::harness::{
    detect_threshold, mean_trajectory, sweep_alpha, write_runs_csv, write_runs_jsonl,
    write_sweep_csv, write_sweep_plot_csv, write_trajectory_csv, AlphaGrid, SweepConfig,
    DEFAULT_SLOW_FRACTION,
};
use opinion_dynamics::verify::{self, Scale};
use opinion_dynamics::analysis::{exact_expected_absorption, exact_expected_state};

#[derive(Parser)]
#[command(
    name = "opdyn",
    version,
    about = "Biased binary opinion dynamics on graphs: simulate, sweep, verify"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a graph from a spec string and emit its edge list
    Gen {
        /// Graph spec: cycle:N | petersen | cliques:KxS | tree:N:DMAX:SEED |
        /// regular:N:D:SEED | file:PATH
        spec: GraphSpec,
        /// Write to this file instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an ensemble to absorption and write per-run results
    Simulate {
        #[arg(long)]
        graph: GraphSpec,
        /// Update rule: majority | voter
        #[arg(long)]
        rule: UpdateRule,
        /// Bias toward opinion 1, in (0, 1]
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// Step cap per run; runs still going are reported censored
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u64,
        /// Initial configuration: zero | one | an explicit bitstring
        #[arg(long, default_value = "zero")]
        init: InitialState,
        /// Record the ones-count every K steps (enables --traj)
        #[arg(long)]
        sample_every: Option<u64>,
        /// Per-run results CSV
        #[arg(long)]
        out: PathBuf,
        /// Also write the ensemble-mean trajectory CSV here
        #[arg(long)]
        traj: Option<PathBuf>,
        /// Also write full per-run records as JSON lines here
        #[arg(long)]
        jsonl: Option<PathBuf>,
        /// Worker threads (0 = default pool)
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Sweep alpha over a grid and tabulate absorption statistics
    Sweep {
        #[arg(long)]
        graph: GraphSpec,
        #[arg(long)]
        rule: UpdateRule,
        /// Grid: log:LO:HI:COUNT or list:a,b,c
        #[arg(long)]
        alphas: AlphaGrid,
        #[arg(long)]
        runs: usize,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u64,
        #[arg(long)]
        seed: u64,
        /// Sweep table CSV; a plot-ready alpha/median file lands next to it
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Exact small-graph oracles (full 2^n state space), printed as JSON
    Exact {
        #[arg(long)]
        graph: GraphSpec,
        #[arg(long)]
        rule: UpdateRule,
        #[arg(long)]
        alpha: f64,
        /// Expected per-node state after T steps from all-zero
        #[arg(long)]
        t: Option<u64>,
        /// Expected absorption time from all-zero
        #[arg(long)]
        absorption: bool,
    },
    /// Run the acceptance suite; exit code reflects pass/fail
    Verify {
        #[arg(long, default_value = "small")]
        scale: Scale,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Also write the report as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen { spec, out } => gen(spec, out),
        Command::Simulate {
            graph,
            rule,
            alpha,
            seed,
            runs,
            cap,
            init,
            sample_every,
            out,
            traj,
            jsonl,
            workers,
        } => simulate(
            graph,
            rule,
            alpha,
            seed,
            runs,
            cap,
            init,
            sample_every,
            out,
            traj,
            jsonl,
            workers,
        ),
        Command::Sweep {
            graph,
            rule,
            alphas,
            runs,
            cap,
            seed,
            out,
            workers,
        } => sweep(graph, rule, alphas, runs, cap, seed, out, workers),
        Command::Exact {
            graph,
            rule,
            alpha,
            t,
            absorption,
        } => exact(graph, rule, alpha, t, absorption),
        Command::Verify {
            scale,
            workers,
            out,
        } => run_verify(scale, workers, out),
    }
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("cannot create {}", path.display())
    })?))
}

fn gen(spec: GraphSpec, out: Option<PathBuf>) -> Result<()> {
    let g = spec.build()?;
    let listing = g.to_edge_list();
    match out {
        Some(path) => {
            let mut w = create(&path)?;
            w.write_all(listing.as_bytes())?;
            w.flush()?;
            println!(
                "{spec}: {} nodes, {} edges -> {}",
                g.node_count(),
                g.edge_count(),
                path.display()
            );
        }
        None => print!("{listing}"),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    graph: GraphSpec,
    rule: UpdateRule,
    alpha: f64,
    seed: u64,
    runs: usize,
    cap: u64,
    init: InitialState,
    sample_every: Option<u64>,
    out: PathBuf,
    traj: Option<PathBuf>,
    jsonl: Option<PathBuf>,
    workers: usize,
) -> Result<()> {
    let mut config = RunConfig::new(graph, rule, alpha, seed);
    config.cap = cap;
    config.initial = init;
    config.sample_every = match (sample_every, &traj) {
        (Some(k), _) => k,
        (None, Some(_)) => 1, // trajectory output implies sampling
        (None, None) => 0,
    };
    let results = run_ensemble_results(&config, runs, workers)?;

    let mut w = create(&out)?;
    write_runs_csv(&mut w, &results)?;
    w.flush()?;

    if let Some(path) = &jsonl {
        let mut w = create(path)?;
        write_runs_jsonl(&mut w, &results)?;
        w.flush()?;
    }
    if let Some(path) = &traj {
        let points = mean_trajectory(&results, config.sample_every)?;
        let mut w = create(path)?;
        write_trajectory_csv(&mut w, &points)?;
        w.flush()?;
    }

    let stats = EnsembleStats::from_results(&results);
    println!(
        "runs={} absorbed={} censored={} mean={:.4} median={} q90={} stderr={:.4}",
        stats.runs, stats.absorbed, stats.censored, stats.mean, stats.median, stats.q90,
        stats.stderr
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    graph: GraphSpec,
    rule: UpdateRule,
    alphas: AlphaGrid,
    runs: usize,
    cap: u64,
    seed: u64,
    out: PathBuf,
    workers: usize,
) -> Result<()> {
    let cfg = SweepConfig {
        graph,
        rule,
        grid: alphas,
        runs,
        cap,
        seed,
    };
    let table = sweep_alpha(&cfg, workers)?;
    let mut w = create(&out)?;
    write_sweep_csv(&mut w, &table)?;
    w.flush()?;
    let plot_path = out.with_extension("plot.csv");
    let mut w = create(&plot_path)?;
    write_sweep_plot_csv(&mut w, &table)?;
    w.flush()?;

    let bracket = detect_threshold(&table, DEFAULT_SLOW_FRACTION);
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |a| a.to_string());
    println!(
        "{} points -> {} (plot: {}); threshold bracket slow={} fast={}{}",
        table.rows.len(),
        out.display(),
        plot_path.display(),
        fmt(bracket.slow),
        fmt(bracket.fast),
        if bracket.monotone {
            ""
        } else {
            " [non-monotone]"
        }
    );
    Ok(())
}

fn exact(
    graph: GraphSpec,
    rule: UpdateRule,
    alpha: f64,
    t: Option<u64>,
    absorption: bool,
) -> Result<()> {
    if t.is_none() && !absorption {
        bail!("nothing to compute: pass --t T and/or --absorption");
    }
    let g = graph.build()?;
    let x0 = OpinionState::all_zero(g.node_count());
    let mut report = serde_json::Map::new();
    report.insert("graph".into(), graph.to_string().into());
    report.insert("nodes".into(), g.node_count().into());
    report.insert("rule".into(), rule.to_string().into());
    report.insert("alpha".into(), alpha.into());
    if let Some(t) = t {
        let state = exact_expected_state(&g, rule, alpha, &x0, t)?;
        let ones: f64 = state.iter().sum();
        report.insert("t".into(), t.into());
        report.insert("expected_state".into(), state.into());
        report.insert("expected_ones".into(), ones.into());
    }
    if absorption {
        let tau = exact_expected_absorption(&g, rule, alpha, &x0)?;
        report.insert("expected_absorption".into(), tau.into());
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn run_verify(scale: Scale, workers: usize, out: Option<PathBuf>) -> Result<()> {
    let report = verify::run(scale, workers);
    for check in &report.checks {
        println!(
            "[{}] {}",
            if check.passed { "PASS" } else { "FAIL" },
            check.name
        );
        for line in check.detail.lines() {
            println!("    {line}");
        }
    }
    println!(
        "{}: {}/{} checks in {:.1}s",
        if report.passed { "PASSED" } else { "FAILED" },
        report.checks.iter().filter(|c| c.passed).count(),
        report.checks.len(),
        report.elapsed_secs
    );
    if report.scale == Scale::Small && report.elapsed_secs > 300.0 {
        eprintln!(
            "warning: small scale took {:.0}s, over the 300s budget",
            report.elapsed_secs
        );
    }
    if let Some(path) = out {
        let mut w = create(&path)?;
        serde_json::to_writer_pretty(&mut w, &report)?;
        writeln!(w)?;
        w.flush()?;
    }
    if !report.passed {
        std::process::exit(1);
    }
    Ok(())
}
