use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use subspace_cli::bench::{compute_bench, emit_sensitivity, write_outputs, write_sensitivity, SweepParam};
use subspace_cli::config::{ExperimentConfig, Overrides};
use subspace_cli::dataset::{load_csv, LabelColumn};
use subspace_cli::verify::{verify_fit, MAX_VERIFY_N};
use subspace_cli::{CliError, CliResult};
use subspace_core::data::{center_with, column_means};
use subspace_core::eval::{fit_method, trace_scales, GridPoint, Method, TraceScales, Weight};
use subspace_core::graph::DEFAULT_NEIGHBORS;
use subspace_core::linalg::EPS;
use subspace_core::pcan::{fit_pcan, PcanParams};
use subspace_core::sdspcaan::{fit_sdspcaan, SdspcaanParams, Variant};

#[derive(Parser)]
#[command(name = "subspace", version, about = "Supervised subspace learning benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full train/validation/test protocol for every configured cell.
    Bench(BenchArgs),
    /// Fit one method on a whole dataset and print its diagnostics.
    Fit(FitArgs),
    /// Sensitivity curve of one hyperparameter.
    Sweep(SweepArgs),
    /// Validate a CSV file and summarize it.
    ConvertCheck(CheckArgs),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self, no_timing: bool) -> CliResult<ExperimentConfig> {
        ExperimentConfig::load(
            &self.config,
            &Overrides {
                seed: self.seed,
                output_dir: self.out.clone(),
                no_timing,
            },
        )
    }
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Write runtime_seconds as 0 so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct FitArgs {
    /// CSV file with one sample per row.
    #[arg(long)]
    dataset: PathBuf,
    /// baseline, pca, sdspca, pcan, spcan, sdspca_lpp or sdspcaan.
    #[arg(long)]
    method: Method,
    /// Target dimension.
    #[arg(long)]
    k: usize,
    /// Absolute weights; each defaults to its trace scale.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Neighbors per row of the similarity graph.
    #[arg(long, default_value_t = DEFAULT_NEIGHBORS)]
    m: usize,
    /// "last", a zero-based index, or a header name.
    #[arg(long, default_value = "last")]
    label_column: String,
    /// Cross-check the fit against brute-force oracles (n ≤ 200).
    #[arg(long)]
    verify: bool,
    /// Write the convergence trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Method whose curve is drawn.
    #[arg(long)]
    method: Method,
    /// k, alpha, beta or delta.
    #[arg(long)]
    param: String,
    /// Comma-separated values (weights are multipliers of the trace scale).
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
}

#[derive(Args)]
struct CheckArgs {
    /// CSV file to validate.
    #[arg(long)]
    dataset: PathBuf,
    /// "last", a zero-based index, or a header name.
    #[arg(long, default_value = "last")]
    label_column: String,
}

fn bench(args: &BenchArgs) -> CliResult<()> {
    let config = args.common.load(args.no_timing)?;
    let out = compute_bench(&config, args.common.jobs)?;
    write_outputs(&out, &config.output_dir)?;
    print!("{}", out.table.to_text());
    for e in &out.errors {
        eprintln!("error: {e}");
    }
    println!("results written to {}", config.output_dir.display());
    Ok(())
}

fn fit(args: &FitArgs) -> CliResult<()> {
    let data = load_csv(&args.dataset, &LabelColumn::parse(&args.label_column))?;
    let x = center_with(&data.x, &column_means(&data.x))?;
    let y = data.y.clone();
    let defaults = if args.alpha.is_none() || args.beta.is_none() || args.delta.is_none() {
        trace_scales(&x, &y, args.m, args.delta.is_none() && args.method.uses(Weight::Delta))?
    } else {
        TraceScales { alpha: 1.0, beta: 1.0, delta: 1.0 }
    };
    let point = GridPoint {
        k: args.k,
        alpha: args.alpha.unwrap_or(defaults.alpha),
        beta: args.beta.unwrap_or(defaults.beta),
        delta: args.delta.unwrap_or(defaults.delta),
    };
    let unit = TraceScales { alpha: 1.0, beta: 1.0, delta: 1.0 };

    let (model, graph) = match args.method {
        Method::Pcan => {
            let mut p = PcanParams::new(point.k, y.ncols());
            p.m = args.m;
            let (model, g) = fit_pcan(&x, &p)?;
            (model, Some(g))
        }
        Method::Spcan | Method::SdspcaLpp | Method::Sdspcaan => {
            let variant = match args.method {
                Method::Spcan => Variant::SpcanOnly,
                Method::SdspcaLpp => Variant::FixedGraph,
                _ => Variant::Full,
            };
            let delta = if args.method == Method::Spcan { 1.0 } else { point.delta };
            let mut p = SdspcaanParams::new(point.k, point.alpha, point.beta, delta).with_variant(variant);
            p.m = args.m;
            p.eps = EPS;
            let (model, g) = fit_sdspcaan(&x, &y, &p)?;
            (model, Some(g))
        }
        _ => (fit_method(args.method, &x, &y, &point, &unit, args.m)?, None),
    };

    let diag = &model.diagnostics;
    println!("method          {}", args.method);
    println!("samples         {} × {} features, {} classes", x.nrows(), x.ncols(), y.ncols());
    println!("k               {}", model.k());
    if args.method.uses(Weight::Alpha) {
        println!("alpha, beta     {:e}, {:e}", point.alpha, point.beta);
    }
    if args.method.uses(Weight::Delta) {
        println!("delta           {:e}", point.delta);
    }
    println!("iterations      {}", diag.iterations);
    println!("converged       {}", diag.converged);
    if let Some(obj) = diag.objective.last() {
        println!("final objective {obj:e}");
    }
    if let Some(l) = diag.final_lambda {
        println!("final lambda    {l:e}");
    }
    if let Some(c) = diag.components {
        println!("components      {c}");
    }
    println!("subproblem violations {}", diag.subproblem_violations);
    if let Some(path) = &args.trace {
        std::fs::write(path, subspace_cli::bench::trace_csv(diag)).map_err(|e| CliError::io(path, e))?;
    }

    if args.verify {
        match verify_fit(&x, &model, graph.as_ref(), args.m)? {
            None => println!("verify: skipped (n = {} > {MAX_VERIFY_N})", x.nrows()),
            Some(checks) => {
                let failed = checks.iter().filter(|c| !c.passed).count();
                for c in &checks {
                    println!("{c}");
                }
                if failed > 0 {
                    return Err(CliError::Config(format!("{failed} verification check(s) failed")));
                }
            }
        }
    }
    Ok(())
}

fn sweep(args: &SweepArgs) -> CliResult<()> {
    let param = SweepParam::parse(&args.param)?;
    param.check(args.method)?;
    let config = args.common.load(true)?;
    let curves = emit_sensitivity(&config, args.method, param, &args.values, args.common.jobs)?;
    for path in write_sensitivity(&curves, args.method, param, &config.output_dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn convert_check(args: &CheckArgs) -> CliResult<()> {
    let data = load_csv(&args.dataset, &LabelColumn::parse(&args.label_column))?;
    println!("samples   {}", data.x.nrows());
    println!("features  {}", data.x.ncols());
    println!("classes   {}", data.class_names.len());
    println!("header    {}", if data.header.is_some() { "yes" } else { "no" });
    for (name, count) in data.class_names.iter().zip(data.class_counts()) {
        println!("  {name}: {count}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Bench(a) => bench(a),
        Command::Fit(a) => fit(a),
        Command::Sweep(a) => sweep(a),
        Command::ConvertCheck(a) => convert_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
