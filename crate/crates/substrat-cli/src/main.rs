//! Batch experiment runner: subgradient runs, schedule sweeps, and the
//! convergence-theory diagnostics, all emitting deterministic artifacts.
//!
//! Exit codes: 0 success, 1 configuration/usage errors, 2 run truncated by
//! leaving the stated box.

mod config;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use serde::Serialize;

use config::{config_hash, load_json, parse_policy, parse_schedule, RunConfig, SweepConfig};
use substrat::corpus;
use substrat::diagnostics::{
    check_diameter_bound, estimate_kl, extract_indices, BoundReport, IndexTrace,
};
use substrat::engine::{detect_convergence, run, summarize, trace_csv, Trajectory, Verdict};
use substrat::parallel::par_map;
use substrat::poly::{Field, Polynomial};
use substrat::strata::{
    quasiconvexity_estimate, shrink_cell, verify_inclusions, LRegularCell, ShrinkParams,
};

#[derive(Parser)]
#[command(name = "substrat", version, about = "subgradient sequence experiments")]
struct Cli {
    /// worker threads for sweeps and sampling (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct RunArgs {
    /// JSON config file; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    benchmark: Option<String>,
    /// comma-separated coordinates
    #[arg(long)]
    x0: Option<String>,
    /// schedule tag: constant:C | harmonic:C[:K0] | power:C:P[:K0]
    #[arg(long)]
    schedule: Option<String>,
    /// min_norm | first_active | random_vertex | random_convex
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    activity_tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one subgradient sequence; writes trace.csv and summary.json
    Run(RunArgs),
    /// Run a grid of configurations in parallel; writes sweep.csv and per-row traces
    Sweep {
        /// JSON file with benchmarks/schedules/policies/seeds/k arrays
        #[arg(long)]
        config: PathBuf,
    },
    /// Diameter-bound report for one run; writes bound.json
    Bound {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        sigma1: Option<f64>,
        #[arg(long)]
        sigma2: Option<f64>,
    },
    /// Desingularizing-exponent fit on a benchmark stratum; writes kl.json
    Kl {
        #[arg(long)]
        benchmark: String,
        #[arg(long)]
        stratum: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Crossing-index trace for one run; writes indices.json
    Indices(RunArgs),
    /// Shrink a cell and verify both inclusions; writes cellcheck.json
    Cellcheck {
        /// interval | graph | triangle | horseshoe
        #[arg(long, default_value = "triangle")]
        cell: String,
        #[arg(long, default_value_t = 0.1)]
        t: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// scale the band inset by this factor first (negative control)
        #[arg(long)]
        corrupt_beta: Option<f64>,
        /// also estimate the quasiconvexity constant
        #[arg(long, default_value_t = false)]
        quasiconvexity: bool,
    },
    /// List the shipped benchmarks
    ListBenchmarks,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help/version are success paths
            if e.use_stderr() {
                eprintln!("{e}");
                std::process::exit(1);
            }
            print!("{e}");
            std::process::exit(0);
        }
    };
    if cli.jobs > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global();
    }
    let code = match dispatch(&cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            1
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: &Cli) -> Result<i32, String> {
    match &cli.command {
        Command::Run(args) => cmd_run(args, &cli.out),
        Command::Sweep { config } => cmd_sweep(config, &cli.out),
        Command::Bound {
            run,
            sigma1,
            sigma2,
        } => cmd_bound(run, *sigma1, *sigma2, &cli.out),
        Command::Kl {
            benchmark,
            stratum,
            samples,
            seed,
        } => cmd_kl(benchmark, *stratum, *samples, *seed, &cli.out),
        Command::Indices(args) => cmd_indices(args, &cli.out),
        Command::Cellcheck {
            cell,
            t,
            samples,
            seed,
            corrupt_beta,
            quasiconvexity,
        } => cmd_cellcheck(
            cell,
            *t,
            *samples,
            *seed,
            *corrupt_beta,
            *quasiconvexity,
            &cli.out,
        ),
        Command::ListBenchmarks => {
            for name in corpus::list() {
                let e = corpus::get(name).expect("registered");
                println!("{name}: {}", e.description);
            }
            Ok(0)
        }
    }
}

fn resolve_config(args: &RunArgs) -> Result<RunConfig, String> {
    let mut cfg: RunConfig = match &args.config {
        Some(path) => load_json(path)?,
        None => RunConfig {
            benchmark: String::new(),
            x0: None,
            schedule: "harmonic:1:1".into(),
            policy: "min_norm".into(),
            k: 1000,
            seed: 0,
            activity_tol: None,
        },
    };
    if let Some(b) = &args.benchmark {
        cfg.benchmark = b.clone();
    }
    if let Some(x0) = &args.x0 {
        let coords: Result<Vec<f64>, _> = x0.split(',').map(|t| t.trim().parse()).collect();
        cfg.x0 = Some(coords.map_err(|e| format!("bad --x0 '{x0}': {e}"))?);
    }
    if let Some(s) = &args.schedule {
        cfg.schedule = s.clone();
    }
    if let Some(p) = &args.policy {
        cfg.policy = p.clone();
    }
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = args.activity_tol {
        cfg.activity_tol = Some(tol);
    }
    if cfg.benchmark.is_empty() {
        return Err("no benchmark given (use --benchmark or a config file)".into());
    }
    Ok(cfg)
}

fn execute(cfg: &RunConfig) -> Result<(corpus::BenchmarkEntry, Trajectory), String> {
    let entry = corpus::get(&cfg.benchmark).map_err(|e| e.to_string())?;
    let x0 = DVector::from_vec(cfg.x0.clone().unwrap_or_else(|| entry.default_x0.clone()));
    let schedule = parse_schedule(&cfg.schedule)?;
    let policy = parse_policy(&cfg.policy)?;
    let tol = cfg.activity_tol.unwrap_or(entry.activity_tol);
    let traj = run(
        &entry.function,
        &x0,
        &schedule,
        policy,
        cfg.k,
        cfg.seed,
        tol,
    )
    .map_err(|e| e.to_string())?;
    Ok((entry, traj))
}

fn timestamp() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("{secs}")
}

fn write_atomic(path: &Path, content: &str) -> Result<(), String> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| e.to_string())?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, content).map_err(|e| e.to_string())?;
    std::fs::rename(&tmp, path).map_err(|e| e.to_string())
}

/// JSON artifact with the volatile timing line pinned to the top so reruns
/// differ in exactly one line.
fn write_report<T: Serialize>(path: &Path, timing: &str, body: &T) -> Result<(), String> {
    let body_json = serde_json::to_string_pretty(body).map_err(|e| e.to_string())?;
    let inner = body_json
        .strip_prefix('{')
        .ok_or("report body must be a JSON object")?;
    let content = format!("{{\n  \"timing\": \"{timing}\",{inner}");
    write_atomic(path, &content)
}

fn cmd_run(args: &RunArgs, out: &Path) -> Result<i32, String> {
    let cfg = resolve_config(args)?;
    let hash = config_hash(&cfg);
    let started = Instant::now();
    let (_, traj) = execute(&cfg)?;
    let wall = started.elapsed().as_secs_f64();
    let ts = timestamp();
    let verdict = detect_convergence(&traj, 1e-6);
    write_atomic(&out.join("trace.csv"), &trace_csv(&traj, hash, &ts))?;
    let summary = summarize(&traj, verdict, hash, wall, &ts);
    write_atomic(
        &out.join("summary.json"),
        &serde_json::to_string_pretty(&summary).map_err(|e| e.to_string())?,
    )?;
    println!(
        "run {}: verdict {:?} ({} iterates) -> {}",
        cfg.benchmark,
        summary.verdict,
        traj.points.len(),
        out.display()
    );
    Ok(if traj.left_domain { 2 } else { 0 })
}

#[derive(Serialize)]
struct SweepRow {
    benchmark: String,
    schedule: String,
    policy: String,
    seed: u64,
    k: usize,
    status: String,
    verdict: String,
    tail_diameter: f64,
    final_value: f64,
    final_point: String,
}

fn cmd_sweep(config_path: &Path, out: &Path) -> Result<i32, String> {
    let cfg: SweepConfig = load_json(config_path)?;
    let hash = config_hash(&cfg);
    let mut grid: Vec<RunConfig> = Vec::new();
    for b in &cfg.benchmarks {
        for s in &cfg.schedules {
            for p in &cfg.policies {
                for &seed in &cfg.seeds {
                    grid.push(RunConfig {
                        benchmark: b.clone(),
                        x0: cfg.x0.clone(),
                        schedule: s.clone(),
                        policy: p.clone(),
                        k: cfg.k,
                        seed,
                        activity_tol: None,
                    });
                }
            }
        }
    }
    if grid.is_empty() {
        return Err("empty sweep grid".into());
    }
    let ts = timestamp();
    let tol = cfg.convergence_tol;
    type RowResult = (RunConfig, Result<(Trajectory, Verdict), String>);
    let results: Vec<RowResult> = par_map(grid, |cfg| {
        let r = execute(&cfg).map(|(_, t)| {
            let v = detect_convergence(&t, tol);
            (t, v)
        });
        (cfg, r)
    });

    let mut rows: Vec<SweepRow> = Vec::new();
    let mut ok_count = 0usize;
    for (cfg, result) in &results {
        let row = match result {
            Ok((traj, verdict)) => {
                ok_count += 1;
                let row_hash = config_hash(cfg);
                let fname = format!(
                    "trace_{}_{}_{}_{}.csv",
                    cfg.benchmark,
                    cfg.schedule.replace(':', "-"),
                    cfg.policy,
                    cfg.seed
                );
                write_atomic(&out.join(&fname), &trace_csv(traj, row_hash, &ts))?;
                let (vtag, amp) = match verdict {
                    Verdict::ConvergedTo { tail_diameter, .. } => ("converged", *tail_diameter),
                    Verdict::Oscillating { amplitude } => ("oscillating", *amplitude),
                    Verdict::Truncated => ("truncated", f64::NAN),
                };
                SweepRow {
                    benchmark: cfg.benchmark.clone(),
                    schedule: cfg.schedule.clone(),
                    policy: cfg.policy.clone(),
                    seed: cfg.seed,
                    k: cfg.k,
                    status: if traj.left_domain {
                        "left_domain"
                    } else {
                        "ok"
                    }
                    .into(),
                    verdict: vtag.into(),
                    tail_diameter: amp,
                    final_value: *traj.values.last().unwrap(),
                    final_point: traj
                        .last_point()
                        .iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join(";"),
                }
            }
            Err(msg) => SweepRow {
                benchmark: cfg.benchmark.clone(),
                schedule: cfg.schedule.clone(),
                policy: cfg.policy.clone(),
                seed: cfg.seed,
                k: cfg.k,
                status: format!("error: {msg}"),
                verdict: "".into(),
                tail_diameter: f64::NAN,
                final_value: f64::NAN,
                final_point: "".into(),
            },
        };
        rows.push(row);
    }
    rows.sort_by(|a, b| {
        (&a.benchmark, &a.schedule, &a.policy, a.seed).cmp(&(
            &b.benchmark,
            &b.schedule,
            &b.policy,
            b.seed,
        ))
    });

    let mut csv = String::new();
    csv.push_str(&format!("# schema: sweep-v1 config_hash={hash:016x}\n"));
    csv.push_str(&format!("# timestamp: {ts}\n"));
    csv.push_str(
        "benchmark,schedule,policy,seed,k,status,verdict,tail_diameter,final_value,final_point\n",
    );
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.benchmark,
            r.schedule,
            r.policy,
            r.seed,
            r.k,
            r.status,
            r.verdict,
            r.tail_diameter,
            r.final_value,
            r.final_point
        ));
    }
    write_atomic(&out.join("sweep.csv"), &csv)?;
    println!(
        "sweep: {}/{} rows ok -> {}",
        ok_count,
        rows.len(),
        out.join("sweep.csv").display()
    );
    Ok(if ok_count > 0 { 0 } else { 1 })
}

#[derive(Serialize)]
struct BoundArtifact {
    config: RunConfig,
    config_hash: String,
    report: BoundReport,
}

fn cmd_bound(
    args: &RunArgs,
    sigma1: Option<f64>,
    sigma2: Option<f64>,
    out: &Path,
) -> Result<i32, String> {
    let cfg = resolve_config(args)?;
    let started = Instant::now();
    let (entry, traj) = execute(&cfg)?;
    let mut pc = entry.constants.clone();
    if let Some(s1) = sigma1 {
        pc.sigma1 = s1;
    }
    if let Some(s2) = sigma2 {
        pc.sigma2 = s2;
    }
    let report = check_diameter_bound(&traj, &pc);
    let artifact = BoundArtifact {
        config_hash: format!("{:016x}", config_hash(&cfg)),
        config: cfg,
        report,
    };
    let timing = format!(
        "{} wall={:.3}s",
        timestamp(),
        started.elapsed().as_secs_f64()
    );
    write_report(&out.join("bound.json"), &timing, &artifact)?;
    println!(
        "bound: lhs {:.6} vs rhs {:.6} -> satisfied = {}",
        artifact.report.diam_lhs, artifact.report.rhs_total, artifact.report.satisfied
    );
    Ok(if traj.left_domain { 2 } else { 0 })
}

fn cmd_kl(
    benchmark: &str,
    stratum: usize,
    samples: usize,
    seed: u64,
    out: &Path,
) -> Result<i32, String> {
    let entry = corpus::get(benchmark).map_err(|e| e.to_string())?;
    if stratum >= entry.stratification.strata.len() {
        return Err(format!(
            "stratum {stratum} out of range for {benchmark} ({} strata)",
            entry.stratification.strata.len()
        ));
    }
    let started = Instant::now();
    let fit = estimate_kl(
        &entry.function,
        entry.stratification.stratum(stratum),
        entry.constants.f_star,
        entry.epsilon,
        samples,
        seed,
    )
    .map_err(|e| e.to_string())?;
    let timing = format!(
        "{} wall={:.3}s",
        timestamp(),
        started.elapsed().as_secs_f64()
    );
    write_report(&out.join("kl.json"), &timing, &fit)?;
    println!(
        "kl {benchmark}/{stratum}: theta = {:.4}, eta = {:.4} ({} samples)",
        fit.theta, fit.eta, fit.sample_count
    );
    Ok(0)
}

#[derive(Serialize)]
struct IndicesArtifact {
    config: RunConfig,
    config_hash: String,
    i_c_runs: Vec<(usize, usize)>,
    trace: IndexTrace,
    invariant_violations: Vec<String>,
}

fn cmd_indices(args: &RunArgs, out: &Path) -> Result<i32, String> {
    let cfg = resolve_config(args)?;
    let started = Instant::now();
    let (entry, traj) = execute(&cfg)?;
    let trace = extract_indices(
        &traj,
        &entry.function,
        &entry.constants,
        &entry.stratification,
    )
    .map_err(|e| e.to_string())?;
    let violations = trace.check_invariants(entry.stratification.non_open_ids().len());
    let artifact = IndicesArtifact {
        config_hash: format!("{:016x}", config_hash(&cfg)),
        config: cfg,
        i_c_runs: trace.i_c_runs(),
        invariant_violations: violations.clone(),
        trace,
    };
    let timing = format!(
        "{} wall={:.3}s",
        timestamp(),
        started.elapsed().as_secs_f64()
    );
    write_report(&out.join("indices.json"), &timing, &artifact)?;
    println!(
        "indices: |I_C| = {}, {} excursions, invariants {}",
        artifact.trace.i_c.len(),
        artifact.trace.l.len(),
        if violations.is_empty() {
            "ok"
        } else {
            "VIOLATED"
        }
    );
    Ok(if traj.left_domain { 2 } else { 0 })
}

fn preset_cell(tag: &str) -> Result<(LRegularCell, ShrinkParams), String> {
    let t_coord = Polynomial::coord(1, 0);
    match tag {
        "interval" => Ok((LRegularCell::interval(0.0, 1.0), ShrinkParams::default())),
        "graph" => Ok((
            LRegularCell::graph(LRegularCell::interval(0.0, 1.0), Field::Poly(t_coord), 1.0),
            ShrinkParams::default(),
        )),
        "triangle" => Ok((
            LRegularCell::band(
                LRegularCell::interval(0.0, 1.0),
                Field::constant(1, 0.0),
                Field::Poly(t_coord),
                1.0,
            ),
            ShrinkParams { c: 1.0, kappa: 1.0 },
        )),
        "horseshoe" => {
            let bend = Polynomial::new(1, [(vec![2], 2.0)]);
            Ok((
                LRegularCell::band(
                    LRegularCell::interval(-1.0, 1.0),
                    Field::Poly(bend.clone()),
                    Field::Poly(bend.add(&Polynomial::constant(1, 0.3))),
                    4.0,
                ),
                ShrinkParams { c: 0.3, kappa: 1.0 },
            ))
        }
        other => Err(format!("unknown cell preset '{other}'")),
    }
}

#[derive(Serialize)]
struct CellcheckArtifact {
    cell: String,
    t: f64,
    samples: usize,
    seed: u64,
    rho: f64,
    theta: f64,
    beta_t: f64,
    corrupt_beta: Option<f64>,
    report: substrat::strata::InclusionReport,
    quasiconvexity: Option<f64>,
}

fn cmd_cellcheck(
    cell_tag: &str,
    t: f64,
    samples: usize,
    seed: u64,
    corrupt_beta: Option<f64>,
    quasiconvexity: bool,
    out: &Path,
) -> Result<i32, String> {
    let (cell, params) = preset_cell(cell_tag)?;
    let started = Instant::now();
    let mut shrunken = shrink_cell(&cell, t, &params).map_err(|e| e.to_string())?;
    if let Some(factor) = corrupt_beta {
        shrunken = substrat::strata::cell::with_scaled_inset(&shrunken, factor)
            .map_err(|e| e.to_string())?;
    }
    let report = verify_inclusions(&shrunken, samples, seed);
    let qc = if quasiconvexity {
        Some(quasiconvexity_estimate(&cell, samples, seed).map_err(|e| e.to_string())?)
    } else {
        None
    };
    let artifact = CellcheckArtifact {
        cell: cell_tag.into(),
        t,
        samples,
        seed,
        rho: shrunken.rho,
        theta: shrunken.theta,
        beta_t: shrunken.beta_t,
        corrupt_beta,
        report: report.clone(),
        quasiconvexity: qc,
    };
    let timing = format!(
        "{} wall={:.3}s",
        timestamp(),
        started.elapsed().as_secs_f64()
    );
    write_report(&out.join("cellcheck.json"), &timing, &artifact)?;
    println!(
        "cellcheck {cell_tag}: left violations {}, right violations {}{}",
        report.violations_left,
        report.violations_right,
        qc.map(|c| format!(", quasiconvexity {c:.4}"))
            .unwrap_or_default()
    );
    Ok(0)
}
