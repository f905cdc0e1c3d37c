//! `mentor` — train, evaluate, compare and plot feedback-shaped Q-learning
//! runs. All the actual work lives in `mentor-core`; this binary is argument
//! parsing, output directories and printing.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mentor_core::{
    compare, evaluate, load_run_input, moving_average, read_metrics, train, Dominance,
    EvaluatorKind, Manifest, QTable, RunConfig, TaskName, TaskSpec, TrainReport,
};

/// Overrides the evaluator endpoint URL from the environment, taking
/// precedence over the config file. The API key has its own variable
/// (`MENTOR_API_KEY`, read by the core client).
const ENDPOINT_ENV: &str = "MENTOR_ENDPOINT_URL";

#[derive(Parser)]
#[command(name = "mentor", version, about = "Sparse-reward manipulation tasks learned faster with good/bad-move feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded training and write manifest, metrics, Q-table and summary.
    Train(TrainArgs),
    /// Greedy evaluation of a saved Q-table on fresh episodes.
    Eval(EvalArgs),
    /// Compare two completed run directories (e.g. shaped vs baseline).
    Compare {
        dir_a: PathBuf,
        dir_b: PathBuf,
    },
    /// Render learning-curve SVGs from a run's metrics stream.
    Plot(PlotArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Run config TOML, or the manifest.json of a previous run to replay.
    #[arg(long)]
    config: PathBuf,
    /// Train a single seed. Default: every seed listed in the config
    /// (or the manifest's own seed when replaying).
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's evaluator choice.
    #[arg(long, value_enum)]
    evaluator: Option<EvaluatorChoice>,
    /// Output directory. With --seed it is the run directory itself;
    /// otherwise each seed writes to <out>/seed-<n>.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvaluatorChoice {
    /// Scripted phase-aware oracle.
    Oracle,
    /// Chat-completion endpoint.
    Llm,
    /// Oracle with randomly flipped verdicts.
    Noisy,
    /// No evaluator: the sparse-reward baseline.
    None,
    /// Evaluator whose replies never parse (degenerates to baseline).
    Unparsed,
}

#[derive(Args)]
struct EvalArgs {
    /// Q-table file written by `train` (qtable.tsv).
    #[arg(long)]
    qtable: PathBuf,
    /// Task name; must match the one the table was trained on.
    #[arg(long)]
    task: String,
    /// Number of greedy episodes.
    #[arg(long, default_value_t = 100)]
    episodes: u32,
    /// Seed for the evaluation episode layouts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PlotArgs {
    /// A completed run directory (contains metrics.jsonl).
    dir: PathBuf,
    /// Moving-average window, in episodes.
    #[arg(long, default_value_t = 20)]
    window: usize,
    /// Output file. Default: <dir>/learning_curves.svg
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Compare { dir_a, dir_b } => cmd_compare(&dir_a, &dir_b),
        Command::Plot(args) => cmd_plot(args),
    }
}

// --- train ---------------------------------------------------------------

fn apply_evaluator_choice(cfg: &mut RunConfig, choice: EvaluatorChoice) {
    let kind = match choice {
        EvaluatorChoice::None => {
            cfg.evaluator = None;
            return;
        }
        EvaluatorChoice::Oracle => EvaluatorKind::Oracle,
        EvaluatorChoice::Llm => EvaluatorKind::Llm,
        EvaluatorChoice::Noisy => EvaluatorKind::NoisyOracle,
        EvaluatorChoice::Unparsed => EvaluatorKind::Unparsed,
    };
    // Keep the config file's tuning (timeout, flip probability, ...) and
    // swap only the kind.
    let mut evaluator = cfg.evaluator.take().unwrap_or_default();
    evaluator.kind = kind;
    cfg.evaluator = Some(evaluator);
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let (mut cfg, prompts) = load_run_input(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;

    if let Some(choice) = args.evaluator {
        apply_evaluator_choice(&mut cfg, choice);
    }
    if let Some(evaluator) = cfg.evaluator.as_mut() {
        if evaluator.kind == EvaluatorKind::Llm {
            if let Ok(url) = std::env::var(ENDPOINT_ENV) {
                if !url.is_empty() {
                    evaluator.endpoint_url = url;
                }
            }
        }
    }

    // Replaying a manifest without --seed reruns exactly that seed.
    let manifest_seed = Manifest::read(&args.config).ok().map(|m| m.seed);
    let seeds = match (args.seed, manifest_seed) {
        (Some(seed), _) => vec![seed],
        (None, Some(seed)) => vec![seed],
        (None, None) => cfg.run.seeds.clone(),
    };
    if seeds.is_empty() {
        bail!("config lists no seeds; pass --seed");
    }

    let out_root = args.out.clone().unwrap_or_else(|| cfg.run.output_dir.clone());
    for seed in seeds {
        let run_dir = if args.seed.is_some() {
            out_root.clone()
        } else {
            out_root.join(format!("seed-{seed}"))
        };
        let report = train(&cfg, &prompts, seed, &run_dir)
            .with_context(|| format!("training seed {seed}"))?;
        print_train_line(&report);
    }
    Ok(())
}

fn print_train_line(report: &TrainReport) {
    let s = &report.summary;
    println!(
        "task={} seed={} episodes={} train_success={:.3} eval_success={:.3} eval_mean_len={:.1} states={} -> {}",
        s.task,
        s.seed,
        s.episodes,
        s.train_success_rate,
        s.eval.success_rate,
        s.eval.mean_episode_length,
        s.states_visited,
        report.run_dir.display()
    );
}

// --- eval ----------------------------------------------------------------

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let name: TaskName = args.task.parse().map_err(|e: String| anyhow!(e))?;
    let (table, meta) = QTable::load(&args.qtable)
        .with_context(|| format!("loading {}", args.qtable.display()))?;
    if meta.task != name {
        bail!(
            "Q-table was trained on {} but --task is {}",
            meta.task,
            name
        );
    }
    let spec = TaskSpec::built_in(name);
    let report = evaluate(&table, meta.bins_per_axis, &spec, args.episodes, args.seed)?;
    println!(
        "task={} episodes={} success_rate={:.3} mean_episode_length={:.2}",
        name, report.episodes, report.success_rate, report.mean_episode_length
    );
    Ok(())
}

// --- compare ---------------------------------------------------------------

fn dominance_label(d: Dominance) -> &'static str {
    match d {
        Dominance::A => "A",
        Dominance::B => "B",
        Dominance::Tie => "tie",
    }
}

fn cmd_compare(dir_a: &Path, dir_b: &Path) -> Result<()> {
    let report = compare(dir_a, dir_b)?;
    println!("task: {}", report.task);
    println!("A: {}", report.a.dir);
    println!("B: {}", report.b.dir);
    println!(
        "{:<28} {:>10} {:>10} {:>10}  winner",
        "metric", "A", "B", "A-B"
    );
    println!(
        "{:<28} {:>10.3} {:>10.3} {:>10.3}  {}",
        "eval success rate",
        report.a.eval_success_rate,
        report.b.eval_success_rate,
        report.eval_success_rate_delta,
        dominance_label(report.dominates_eval_success)
    );
    println!(
        "{:<28} {:>10.3} {:>10.3} {:>10.3}  {}",
        "train success (AULC)",
        report.a.aulc_success,
        report.b.aulc_success,
        report.aulc_success_delta,
        dominance_label(report.dominates_aulc)
    );
    println!(
        "{:<28} {:>10.1} {:>10.1} {:>10.1}  {}",
        "final mean episode length",
        report.a.final_mean_episode_length,
        report.b.final_mean_episode_length,
        report.final_mean_episode_length_delta,
        dominance_label(report.dominates_episode_length)
    );
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

// --- plot ----------------------------------------------------------------

fn cmd_plot(args: PlotArgs) -> Result<()> {
    let metrics_path = args.dir.join("metrics.jsonl");
    let records = read_metrics(&metrics_path)
        .with_context(|| format!("reading {}", metrics_path.display()))?;
    if records.is_empty() {
        bail!("{} has no episodes to plot", metrics_path.display());
    }
    let success: Vec<f64> = records.iter().map(|r| if r.success { 1.0 } else { 0.0 }).collect();
    let lengths: Vec<f64> = records.iter().map(|r| f64::from(r.episode_length)).collect();
    let success_ma = moving_average(&success, args.window);
    let length_ma = moving_average(&lengths, args.window);

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.dir.join("learning_curves.svg"));
    render_curves(&out, &success_ma, &length_ma, args.window)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn render_curves(path: &Path, success: &[f64], length: &[f64], window: usize) -> Result<()> {
    use plotters::prelude::*;

    let root = SVGBackend::new(path, (900, 640)).into_drawing_area();
    root.fill(&WHITE)?;
    let (top, bottom) = root.split_vertically(320);
    let n = success.len();

    let mut chart = ChartBuilder::on(&top)
        .margin(12)
        .caption(
            format!("success rate ({window}-episode moving average)"),
            ("sans-serif", 16),
        )
        .x_label_area_size(28)
        .y_label_area_size(44)
        .build_cartesian_2d(0..n, 0.0..1.05f64)?;
    chart
        .configure_mesh()
        .x_desc("episode")
        .y_desc("success")
        .draw()?;
    chart.draw_series(LineSeries::new(
        success.iter().copied().enumerate(),
        &BLUE,
    ))?;

    let max_len = length.iter().copied().fold(1.0f64, f64::max) * 1.05;
    let mut chart = ChartBuilder::on(&bottom)
        .margin(12)
        .caption(
            format!("episode length ({window}-episode moving average)"),
            ("sans-serif", 16),
        )
        .x_label_area_size(28)
        .y_label_area_size(44)
        .build_cartesian_2d(0..n, 0.0..max_len)?;
    chart
        .configure_mesh()
        .x_desc("episode")
        .y_desc("steps")
        .draw()?;
    chart.draw_series(LineSeries::new(
        length.iter().copied().enumerate(),
        &RED,
    ))?;

    root.present()?;
    Ok(())
}
