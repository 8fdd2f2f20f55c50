//! Command-line front end for the ddsro pipeline: generate data, fit
//! per-class uncertainty models, solve, and benchmark against the
//! deterministic / stochastic-program / box-ARO baselines.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 solver stopped
//! without reaching the gap tolerance, 3 infeasible or incomplete recourse.

use clap::{Args, Parser, Subcommand, ValueEnum};
use ddsro::dataio::{estimate_class_probabilities, load_dataset, ClassDistribution, LabeledDataset};
use ddsro::dpmm::{fit_dpmm, DpmmConfig, MixturePosterior};
use ddsro::models::{
    build_demand_supply_unions, build_motivating_example, build_planning_problem,
    gen_synthetic_motivating, gen_synthetic_planning, solve_box_aro, solve_deterministic,
    solve_scenario_sp, synthetic_planning_instance, CompactProblem, PlanningInstance,
};
use ddsro::robust::{solve_ddanro, solve_ddsro, DdsroInstance, SolveReport};
use ddsro::sets::{build_union, ScalingPolicy, UncertaintySetUnion};
use rand::{seq::SliceRandom, SeedableRng};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "ddsro", version, about = "data-driven stochastic robust optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labeled uncertainty dataset as CSV.
    Gen(GenArgs),
    /// Fit per-class mixture posteriors and uncertainty sets from a CSV.
    Fit(FitArgs),
    /// Solve a problem with the data-driven decomposition.
    Solve(SolveArgs),
    /// Compare deterministic, scenario-SP, box-ARO, DDANRO and DDSRO.
    Benchmark(BenchmarkArgs),
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Problem {
    Motivating,
    Planning,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Mode {
    Ddsro,
    Ddanro,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "motivating")]
    problem: Problem,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Total number of samples (motivating: multiple of 20; planning: of 5).
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Output CSV (motivating data, or planning demand data).
    #[arg(long)]
    out: PathBuf,
    /// Second output CSV for planning supply data.
    #[arg(long)]
    supply_out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct FitOpts {
    #[arg(long, default_value_t = 10)]
    truncation: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Component weight threshold gamma*.
    #[arg(long, default_value_t = 0.05)]
    gamma_star: f64,
    /// l1 budget of each basic set (per block for planning).
    #[arg(long, default_value_t = 2)]
    budget: usize,
    /// Supply-block budget for the planning problem.
    #[arg(long, default_value_t = 2)]
    supply_budget: usize,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    fit: FitOpts,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum, default_value = "motivating")]
    problem: Problem,
    /// Labeled data CSV (motivating), or demand CSV (planning).
    #[arg(long)]
    data: PathBuf,
    /// Supply data CSV (planning only).
    #[arg(long)]
    supply_data: Option<PathBuf>,
    /// Planning instance JSON; built-in synthetic instance when omitted.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "ddsro")]
    mode: Mode,
    #[command(flatten)]
    fit: FitOpts,
    /// Relative optimality gap tolerance.
    #[arg(long, default_value_t = 1e-3)]
    zeta: f64,
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    /// Report JSON output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Iteration table (r, lb, ub, gap) CSV output path.
    #[arg(long)]
    iterations_csv: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long, value_enum, default_value = "motivating")]
    problem: Problem,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    supply_data: Option<PathBuf>,
    #[arg(long)]
    instance: Option<PathBuf>,
    #[command(flatten)]
    fit: FitOpts,
    #[arg(long, default_value_t = 1e-3)]
    zeta: f64,
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    /// Scenario count for the stochastic-program baseline.
    #[arg(long, default_value_t = 100)]
    scenarios: usize,
    /// Comparison table CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    };
    std::process::exit(code);
}

fn exit_code_for(e: &ddsro::Error) -> i32 {
    use ddsro::Error::*;
    match e {
        IncompleteRecourse { .. } | MasterInfeasible | DualPolytopeEmpty => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> ddsro::Result<i32> {
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    }
}

fn cmd_gen(a: GenArgs) -> ddsro::Result<i32> {
    match a.problem {
        Problem::Motivating => {
            let ds = gen_synthetic_motivating(a.seed, a.samples)?;
            ds.write_csv(&a.out)?;
            println!("wrote {} samples ({} classes) to {}", ds.len(), ds.class_ids.len(), a.out.display());
        }
        Problem::Planning => {
            let supply_out = a.supply_out.ok_or_else(|| {
                ddsro::Error::Invalid("planning data needs --supply-out for the supply CSV".into())
            })?;
            let (demand, supply) = gen_synthetic_planning(a.seed, a.samples)?;
            demand.write_csv(&a.out)?;
            supply.write_csv(&supply_out)?;
            println!(
                "wrote {} demand samples to {} and {} supply samples to {}",
                demand.len(),
                a.out.display(),
                supply.len(),
                supply_out.display()
            );
        }
    }
    Ok(0)
}

/// One fitted class: posterior, weights, and the derived uncertainty set.
#[derive(Serialize, Deserialize)]
struct ClassFit {
    class_id: usize,
    label: String,
    probability: f64,
    posterior: MixturePosterior,
    union: UncertaintySetUnion,
}

#[derive(Serialize, Deserialize)]
struct FitDocument {
    class_probabilities: BTreeMap<usize, f64>,
    classes: Vec<ClassFit>,
}

fn fit_classes(ds: &LabeledDataset, opts: &FitOpts) -> ddsro::Result<(ClassDistribution, Vec<ClassFit>)> {
    let dist = estimate_class_probabilities(ds);
    let mut classes = Vec::new();
    for (idx, &cid) in ds.class_ids.iter().enumerate() {
        let points = ds.class_points(cid);
        let cfg = DpmmConfig {
            truncation: opts.truncation,
            alpha: opts.alpha,
            seed: opts.seed.wrapping_add(cid as u64),
            ..DpmmConfig::default()
        };
        let mut post = fit_dpmm(&points, &cfg).map_err(|e| {
            ddsro::Error::Invalid(format!("class {cid} ({}): {e}", ds.class_names[idx]))
        })?;
        post.class_id = cid;
        let union = build_union(&post, opts.gamma_star, opts.budget, &ScalingPolicy::Identity)
            .map_err(|e| ddsro::Error::Invalid(format!("class {cid}: {e}")))?;
        println!(
            "class {cid} ({}): {} points, {} effective components, final ELBO {:.4} after {} iterations",
            ds.class_names[idx],
            points.len(),
            union.basics.len(),
            post.elbo_trace.last().copied().unwrap_or(f64::NAN),
            post.elbo_trace.len()
        );
        classes.push(ClassFit {
            class_id: cid,
            label: ds.class_names[idx].clone(),
            probability: dist.prob(cid),
            posterior: post,
            union,
        });
    }
    Ok((dist, classes))
}

fn cmd_fit(a: FitArgs) -> ddsro::Result<i32> {
    let ds = load_dataset(&a.data)?;
    let (dist, classes) = fit_classes(&ds, &a.fit)?;
    let doc = FitDocument { class_probabilities: dist.probabilities.clone(), classes };
    std::fs::write(&a.out, serde_json::to_string_pretty(&doc)?)?;
    println!("wrote uncertainty model to {}", a.out.display());
    Ok(0)
}

fn print_iteration_table(rep: &SolveReport) {
    println!("{:>4}  {:>14}  {:>14}  {:>10}", "r", "LB", "UB", "gap");
    for it in &rep.iterations {
        println!(
            "{:>4}  {:>14.4}  {:>14.4}  {:>9.4}%",
            it.iteration,
            it.lower_bound,
            it.upper_bound,
            it.gap * 100.0
        );
    }
    println!(
        "{} after {} iterations, objective {:.4}, gap {:.4}%",
        if rep.converged { "converged" } else { "NOT converged" },
        rep.iterations.len(),
        rep.objective,
        rep.gap * 100.0
    );
}

fn write_iterations_csv(rep: &SolveReport, path: &Path) -> ddsro::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "lower_bound", "upper_bound", "gap"])?;
    for it in &rep.iterations {
        w.write_record([
            it.iteration.to_string(),
            it.lower_bound.to_string(),
            it.upper_bound.to_string(),
            it.gap.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn load_planning_instance(path: &Option<PathBuf>) -> ddsro::Result<PlanningInstance> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            let pi: PlanningInstance = serde_json::from_str(&text)?;
            pi.validate()?;
            Ok(pi)
        }
        None => Ok(synthetic_planning_instance()),
    }
}

/// Shared setup: the compact problem plus per-class unions and probabilities.
struct Prepared {
    problem: CompactProblem,
    unions: Vec<UncertaintySetUnion>,
    probs: BTreeMap<usize, f64>,
    /// All data points in the problem's u space (planning: demand x supply
    /// pairs are formed index-aligned after a seeded shuffle).
    pooled: Vec<Vec<f64>>,
    /// Raw per-source points, labels dropped. Planning keeps demand and
    /// supply apart so unlabeled refits stay block-structured.
    demand_points: Vec<Vec<f64>>,
    supply_points: Option<Vec<Vec<f64>>>,
}

fn prepare(
    problem_kind: Problem,
    data: &Path,
    supply_data: &Option<PathBuf>,
    instance: &Option<PathBuf>,
    opts: &FitOpts,
) -> ddsro::Result<Prepared> {
    match problem_kind {
        Problem::Motivating => {
            let ds = load_dataset(data)?;
            let (dist, classes) = fit_classes(&ds, opts)?;
            Ok(Prepared {
                problem: build_motivating_example(),
                unions: classes.iter().map(|c| c.union.clone()).collect(),
                probs: dist.probabilities,
                pooled: ds.points.clone(),
                demand_points: ds.points,
                supply_points: None,
            })
        }
        Problem::Planning => {
            let supply_path = supply_data.as_ref().ok_or_else(|| {
                ddsro::Error::Invalid("planning needs --supply-data".into())
            })?;
            let demand = load_dataset(data)?;
            let supply = load_dataset(supply_path)?;
            let pi = load_planning_instance(instance)?;
            let problem = build_planning_problem(&pi)?;
            let (dist, demand_classes) = fit_classes(&demand, opts)?;
            let mut sup_opts = opts.clone();
            sup_opts.budget = opts.supply_budget;
            let (_, supply_classes) = fit_classes(&supply, &sup_opts)?;
            let unions = build_demand_supply_unions(
                &demand_classes.iter().map(|c| c.union.clone()).collect::<Vec<_>>(),
                &supply_classes.iter().map(|c| c.union.clone()).collect::<Vec<_>>(),
            )?;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
            let mut sup_pts = supply.points.clone();
            sup_pts.shuffle(&mut rng);
            let pooled = demand
                .points
                .iter()
                .zip(sup_pts.iter().cycle())
                .map(|(d, s)| {
                    let mut u = d.clone();
                    u.extend_from_slice(s);
                    u
                })
                .collect();
            Ok(Prepared {
                problem,
                unions,
                probs: dist.probabilities,
                pooled,
                demand_points: demand.points,
                supply_points: Some(supply.points),
            })
        }
    }
}

/// Single uncertainty set for the label-free comparator: refit on pooled
/// points. Planning fits demand and supply pools separately and crosses the
/// unions so the joint set keeps its block-diagonal shape and per-block
/// budgets; a joint 5-d fit yields a dense shape matrix whose linearized
/// worst-case subproblem is far too large for the dense kernel.
fn ddanro_union(
    problem_kind: Problem,
    prep: &Prepared,
    opts: &FitOpts,
) -> ddsro::Result<UncertaintySetUnion> {
    let cfg = DpmmConfig {
        truncation: opts.truncation,
        alpha: opts.alpha,
        seed: opts.seed,
        ..DpmmConfig::default()
    };
    match problem_kind {
        Problem::Motivating => {
            let post = fit_dpmm(&prep.demand_points, &cfg)?;
            build_union(&post, opts.gamma_star, opts.budget, &ScalingPolicy::Identity)
        }
        Problem::Planning => {
            let supply_points = prep
                .supply_points
                .as_ref()
                .ok_or_else(|| ddsro::Error::Invalid("planning needs supply points".into()))?;
            let dpost = fit_dpmm(&prep.demand_points, &cfg)?;
            let spost = fit_dpmm(supply_points, &cfg)?;
            let du = build_union(&dpost, opts.gamma_star, opts.budget, &ScalingPolicy::Identity)?;
            let su =
                build_union(&spost, opts.gamma_star, opts.supply_budget, &ScalingPolicy::Identity)?;
            let mut joint = build_demand_supply_unions(&[du], &[su])?;
            Ok(joint.pop().expect("one class in, one class out"))
        }
    }
}

fn report_exit(rep: &SolveReport) -> i32 {
    if rep.converged {
        0
    } else {
        2
    }
}

fn cmd_solve(a: SolveArgs) -> ddsro::Result<i32> {
    let prep = prepare(a.problem, &a.data, &a.supply_data, &a.instance, &a.fit)?;
    let rep = match a.mode {
        Mode::Ddsro => {
            let mut inst = DdsroInstance::new(prep.problem, prep.unions, prep.probs);
            inst.gap_tol = a.zeta;
            inst.max_iters = a.max_iters;
            solve_ddsro(&inst)?
        }
        Mode::Ddanro => {
            let union = ddanro_union(a.problem, &prep, &a.fit)?;
            solve_ddanro(prep.problem, union, a.zeta, a.max_iters)?
        }
    };
    print_iteration_table(&rep);
    if let Some(out) = &a.out {
        std::fs::write(out, serde_json::to_string_pretty(&rep)?)?;
        println!("wrote report to {}", out.display());
    }
    if let Some(path) = &a.iterations_csv {
        write_iterations_csv(&rep, path)?;
        println!("wrote iteration table to {}", path.display());
    }
    Ok(report_exit(&rep))
}

struct BenchRow {
    method: &'static str,
    objective: f64,
    iterations: usize,
    seconds: f64,
    x: Vec<f64>,
}

fn bench_row(method: &'static str, rep: &SolveReport) -> BenchRow {
    BenchRow {
        method,
        objective: rep.objective,
        iterations: rep.iterations.len(),
        seconds: rep.wall_time_s,
        x: rep.x.clone(),
    }
}

fn cmd_benchmark(a: BenchmarkArgs) -> ddsro::Result<i32> {
    let prep = prepare(a.problem, &a.data, &a.supply_data, &a.instance, &a.fit)?;
    let mut rows = Vec::new();
    let mut nonconverged = false;

    // deterministic at the pooled mean
    let dim = prep.pooled[0].len();
    let mean: Vec<f64> = (0..dim)
        .map(|j| prep.pooled.iter().map(|p| p[j]).sum::<f64>() / prep.pooled.len() as f64)
        .collect();
    eprintln!("solving deterministic...");
    rows.push(bench_row("deterministic", &solve_deterministic(&prep.problem, &mean)?));

    // stochastic program on a seeded subsample of the data
    let mut idx: Vec<usize> = (0..prep.pooled.len()).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.fit.seed.wrapping_add(1));
    idx.shuffle(&mut rng);
    idx.truncate(a.scenarios.min(prep.pooled.len()));
    idx.sort_unstable();
    let scenarios: Vec<Vec<f64>> = idx.iter().map(|&i| prep.pooled[i].clone()).collect();
    eprintln!("solving scenario-sp ({} scenarios)...", scenarios.len());
    rows.push(bench_row("scenario-sp", &solve_scenario_sp(&prep.problem, &scenarios)?));

    // single-set and multi-set robust variants
    let union = ddanro_union(a.problem, &prep, &a.fit)?;
    eprintln!("solving ddanro...");
    let ddanro = solve_ddanro(prep.problem.clone(), union, a.zeta, a.max_iters)?;
    nonconverged |= !ddanro.converged;
    rows.push(bench_row("ddanro", &ddanro));

    let mut inst =
        DdsroInstance::new(prep.problem.clone(), prep.unions.clone(), prep.probs.clone());
    inst.gap_tol = a.zeta;
    inst.max_iters = a.max_iters;
    eprintln!("solving ddsro...");
    let ddsro_rep = solve_ddsro(&inst)?;
    nonconverged |= !ddsro_rep.converged;
    rows.push(bench_row("ddsro", &ddsro_rep));

    eprintln!("solving box-aro...");
    let box_rep = solve_box_aro(&prep.problem, &prep.pooled, a.zeta, a.max_iters)?;
    nonconverged |= !box_rep.converged;
    rows.push(bench_row("box-aro", &box_rep));

    println!("{:<14}  {:>14}  {:>10}  {:>9}  first-stage x", "method", "objective", "iterations", "seconds");
    for r in &rows {
        let xs = r
            .x
            .iter()
            .map(|v| format!("{v:.2}"))
            .collect::<Vec<_>>()
            .join(" ");
        let xs_short = if xs.len() > 48 { format!("{}...", &xs[..45]) } else { xs };
        println!(
            "{:<14}  {:>14.4}  {:>10}  {:>9.2}  {}",
            r.method, r.objective, r.iterations, r.seconds, xs_short
        );
    }

    if let Some(out) = &a.out {
        let mut w = csv::Writer::from_path(out)?;
        w.write_record(["method", "objective", "iterations", "seconds", "x"])?;
        for r in &rows {
            w.write_record([
                r.method.to_string(),
                r.objective.to_string(),
                r.iterations.to_string(),
                r.seconds.to_string(),
                r.x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"),
            ])?;
        }
        w.flush()?;
        println!("wrote comparison table to {}", out.display());
    }
    Ok(if nonconverged { 2 } else { 0 })
}
