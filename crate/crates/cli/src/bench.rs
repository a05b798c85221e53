//! Benchmark orchestration: every (dataset, method, repetition) runs the
//! split / select / test protocol; results are reduced per (dataset,
//! method) and written once at the end.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use subspace_core::eval::{
    fit_method, grid_search, score, select_hyperparameters, split, trace_scales, BenchReport, Dataset, Method,
    RunResult, SplitSpec, Weight,
};
use subspace_core::synth::make_blobs;
use subspace_core::{data::labels_from_one_hot, FitDiagnostics};

use crate::config::{DataSource, DatasetConfig, ExperimentConfig};
use crate::dataset::load_csv;
use crate::error::{CliError, CliResult};

pub const RESULTS_HEADER: &str = "dataset,method,mean_bca,std_bca,best_k_mode,runtime_seconds";
const ERROR_MARKER: &str = "ERROR";

pub fn load_dataset(cfg: &DatasetConfig) -> CliResult<Dataset> {
    match &cfg.source {
        DataSource::Csv { path, label_column } => {
            let d = load_csv(path, label_column)?;
            Ok(Dataset::new(d.x, d.labels)?)
        }
        DataSource::Synthetic(s) => {
            let (x, y) = make_blobs(&s.blob_spec());
            Ok(Dataset::new(x, labels_from_one_hot(&y)?)?)
        }
    }
}

/// One (dataset, method) row. `mean_bca`, `std_bca` and `best_k_mode` are
/// `None` when any repetition failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    pub method: String,
    pub mean_bca: Option<f64>,
    pub std_bca: Option<f64>,
    pub best_k_mode: Option<usize>,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| ERROR_MARKER.to_string(), |x| x.to_string())
}

impl ResultsTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{RESULTS_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.dataset,
                r.method,
                opt(&r.mean_bca),
                opt(&r.std_bca),
                opt(&r.best_k_mode),
                r.runtime_seconds
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> CliResult<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == RESULTS_HEADER => {}
            _ => return Err(CliError::Config("results table header mismatch".into())),
        }
        let bad = |i: usize, what: &str| CliError::Parse {
            path: "results.csv".into(),
            line: i as u64 + 1,
            message: format!("invalid {what}"),
        };
        let mut rows = Vec::new();
        for (i, line) in lines {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad(i, "field count"));
            }
            let float = |s: &str| -> CliResult<Option<f64>> {
                if s == ERROR_MARKER {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad(i, "number"))
                }
            };
            rows.push(ResultRow {
                dataset: f[0].to_string(),
                method: f[1].to_string(),
                mean_bca: float(f[2])?,
                std_bca: float(f[3])?,
                best_k_mode: if f[4] == ERROR_MARKER {
                    None
                } else {
                    Some(f[4].parse().map_err(|_| bad(i, "k"))?)
                },
                runtime_seconds: f[5].parse().map_err(|_| bad(i, "runtime"))?,
            });
        }
        Ok(Self { rows })
    }

    /// Aligned plain-text table, BCAs in percent.
    pub fn to_text(&self) -> String {
        let cells: Vec<[String; 5]> = self
            .rows
            .iter()
            .map(|r| {
                let bca = match (r.mean_bca, r.std_bca) {
                    (Some(m), Some(s)) => format!("{:.2} ± {:.2}", 100.0 * m, 100.0 * s),
                    _ => ERROR_MARKER.to_string(),
                };
                [
                    r.dataset.clone(),
                    r.method.clone(),
                    bca,
                    opt(&r.best_k_mode),
                    format!("{:.3}", r.runtime_seconds),
                ]
            })
            .collect();
        let head = ["dataset", "method", "BCA (%)", "k (mode)", "seconds"];
        let mut widths = head.map(|h| h.chars().count());
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |row: &[String]| {
            let mut s = String::new();
            for (i, (c, w)) in row.iter().zip(widths).enumerate() {
                let pad = w - c.chars().count();
                if i >= 2 {
                    s.push_str(&" ".repeat(pad));
                    s.push_str(c);
                } else {
                    s.push_str(c);
                    s.push_str(&" ".repeat(pad));
                }
                if i + 1 < row.len() {
                    s.push_str("  ");
                }
            }
            s.trim_end().to_string() + "\n"
        };
        let mut out = line(&head.map(String::from));
        let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
        out.push_str(&"-".repeat(total));
        out.push('\n');
        for row in &cells {
            out.push_str(&line(row));
        }
        out
    }
}

/// Everything a bench run produces, before it is written to disk.
#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub table: ResultsTable,
    /// (file name, contents) of per-fit convergence traces.
    pub traces: Vec<(String, String)>,
    /// One line per failed cell.
    pub errors: Vec<String>,
}

/// Keeps file names portable.
pub fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn trace_csv(diag: &FitDiagnostics) -> String {
    let mut out = String::from("iter,objective,lambda\n");
    for (i, obj) in diag.objective.iter().enumerate() {
        let lambda = diag.lambda.get(i).map_or(String::new(), |l| l.to_string());
        let _ = writeln!(out, "{},{},{}", i + 1, obj, lambda);
    }
    out
}

/// Runs the thread pool; `jobs = 0` uses rayon's default size.
pub fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs the full protocol for every configured cell.
pub fn compute_bench(config: &ExperimentConfig, jobs: usize) -> CliResult<BenchOutput> {
    let datasets: Vec<Result<Dataset, String>> = config
        .datasets
        .iter()
        .map(|d| load_dataset(d).map_err(|e| e.to_string()))
        .collect();
    let items: Vec<(usize, usize, usize)> = (0..config.datasets.len())
        .flat_map(|d| {
            (0..config.methods.len())
                .flat_map(move |m| (0..config.repetitions).map(move |r| (d, m, r)))
        })
        .collect();
    let outcomes: Vec<(Result<RunResult, String>, f64)> = with_pool(jobs, || {
        items
            .par_iter()
            .map(|&(d, m, r)| {
                let start = Instant::now();
                let out = match &datasets[d] {
                    Ok(data) => grid_search(
                        data,
                        config.methods[m],
                        &config.protocol,
                        &SplitSpec::new(config.seed, r as u64),
                    )
                    .map_err(|e| e.to_string()),
                    Err(e) => Err(format!("dataset failed to load: {e}")),
                };
                (out, start.elapsed().as_secs_f64())
            })
            .collect()
    })?;

    let mut table = ResultsTable::default();
    let mut traces = Vec::new();
    let mut errors = Vec::new();
    for (cell, chunk) in outcomes.chunks(config.repetitions).enumerate() {
        let (d, m) = (cell / config.methods.len(), cell % config.methods.len());
        let (dname, method) = (&config.datasets[d].name, config.methods[m]);
        let runtime = if config.timing {
            chunk.iter().map(|(_, t)| t).sum()
        } else {
            0.0
        };
        let mut runs = Vec::new();
        let mut failure = None;
        for (rep, (out, _)) in chunk.iter().enumerate() {
            match out {
                Ok(run) => {
                    traces.push((
                        format!("trace_{}_{}_{}.csv", sanitize(dname), method.name(), rep),
                        trace_csv(&run.diagnostics),
                    ));
                    runs.push(run.clone());
                }
                Err(e) if failure.is_none() => failure = Some(format!("repetition {rep}: {e}")),
                Err(_) => {}
            }
        }
        let row = match (failure, BenchReport::from_runs(&runs)) {
            (None, Ok(report)) => ResultRow {
                dataset: dname.clone(),
                method: method.name().into(),
                mean_bca: Some(report.mean),
                std_bca: Some(report.std),
                best_k_mode: Some(report.best_k_mode()),
                runtime_seconds: runtime,
            },
            (failure, report) => {
                let reason = failure.unwrap_or_else(|| report.err().map_or_else(String::new, |e| e.to_string()));
                errors.push(format!("{dname},{}: {reason}", method.name()));
                ResultRow {
                    dataset: dname.clone(),
                    method: method.name().into(),
                    mean_bca: None,
                    std_bca: None,
                    best_k_mode: None,
                    runtime_seconds: runtime,
                }
            }
        };
        table.rows.push(row);
    }
    Ok(BenchOutput { table, traces, errors })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(path, e))
}

pub fn write_outputs(out: &BenchOutput, dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_file(dir, "results.csv", &out.table.to_csv())?;
    write_file(dir, "results.txt", &out.table.to_text())?;
    for (name, contents) in &out.traces {
        write_file(dir, name, contents)?;
    }
    let errors_path = dir.join("errors.txt");
    if out.errors.is_empty() {
        if errors_path.exists() {
            std::fs::remove_file(&errors_path).map_err(|e| CliError::io(&errors_path, e))?;
        }
    } else {
        write_file(dir, "errors.txt", &(out.errors.join("\n") + "\n"))?;
    }
    Ok(())
}

/// Computes the benchmark and writes every output file to the
/// configured output directory.
pub fn run_bench(config: &ExperimentConfig, jobs: usize) -> CliResult<ResultsTable> {
    let out = compute_bench(config, jobs)?;
    write_outputs(&out, &config.output_dir)?;
    Ok(out.table)
}

/// A hyperparameter that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    K,
    Weight(Weight),
}

impl SweepParam {
    pub fn parse(name: &str) -> CliResult<Self> {
        if name.trim().eq_ignore_ascii_case("k") {
            Ok(SweepParam::K)
        } else {
            Ok(SweepParam::Weight(name.parse()?))
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::K => "k",
            SweepParam::Weight(w) => w.name(),
        }
    }

    /// Fails unless `method` has this parameter. The baseline has none:
    /// its k only selects a feature prefix.
    pub fn check(self, method: Method) -> CliResult<()> {
        let ok = match self {
            SweepParam::K => method != Method::Baseline,
            SweepParam::Weight(w) => method.uses(w),
        };
        if ok {
            Ok(())
        } else {
            Err(CliError::Config(format!(
                "parameter {} does not belong to method {}",
                self.name(),
                method.name()
            )))
        }
    }
}

/// One sensitivity curve: (value, mean trace scale, mean test BCA).
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityCurve {
    pub dataset: String,
    pub rows: Vec<(f64, f64, f64)>,
}

impl SensitivityCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value,mean_scale,mean_bca\n");
        for (v, s, b) in &self.rows {
            let _ = writeln!(out, "{v},{s},{b}");
        }
        out
    }
}

/// Holds every other hyperparameter at its validation-selected value and
/// sweeps `param` over `values` (k directly, weights as multipliers of
/// their trace scale). BCAs are on the test fold, averaged over the
/// configured repetitions.
pub fn emit_sensitivity(
    config: &ExperimentConfig,
    method: Method,
    param: SweepParam,
    values: &[f64],
    jobs: usize,
) -> CliResult<Vec<SensitivityCurve>> {
    param.check(method)?;
    if values.is_empty() {
        return Err(CliError::Config("no sweep values".into()));
    }
    if param == SweepParam::K && values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
        return Err(CliError::Config("k values must be positive integers".into()));
    }
    let mut curves = Vec::new();
    for dcfg in &config.datasets {
        let data = load_dataset(dcfg)?;
        let reps: Vec<subspace_core::Result<(f64, Vec<f64>)>> = with_pool(jobs, || {
            (0..config.repetitions)
                .into_par_iter()
                .map(|r| sweep_repetition(&data, config, method, param, values, r as u64))
                .collect()
        })?;
        let reps: Vec<(f64, Vec<f64>)> = reps.into_iter().collect::<subspace_core::Result<_>>()?;
        let n = reps.len() as f64;
        let mean_scale = reps.iter().map(|r| r.0).sum::<f64>() / n;
        let rows = values
            .iter()
            .enumerate()
            .map(|(i, v)| (*v, mean_scale, reps.iter().map(|r| r.1[i]).sum::<f64>() / n))
            .collect();
        curves.push(SensitivityCurve {
            dataset: dcfg.name.clone(),
            rows,
        });
    }
    Ok(curves)
}

fn sweep_repetition(
    data: &Dataset,
    config: &ExperimentConfig,
    method: Method,
    param: SweepParam,
    values: &[f64],
    rep: u64,
) -> subspace_core::Result<(f64, Vec<f64>)> {
    let protocol = &config.protocol;
    let parts = split(data.x.nrows(), &data.labels, &SplitSpec::new(config.seed, rep))?;
    let (train, val, test) = data.folds(&parts)?;
    let y = subspace_core::data::one_hot(&train.labels, data.c)?;
    let needs_graph = method.uses(Weight::Delta);
    let scales = trace_scales(&train.x, &y, protocol.m, needs_graph)?;
    let points = protocol
        .grid
        .points(method, train.x.nrows(), train.x.ncols(), data.c)?;
    let best = select_hyperparameters(method, &train, &val, data.c, &points, &scales, protocol.m)?.point;
    let mut bcas = Vec::with_capacity(values.len());
    for &v in values {
        let mut p = best;
        match param {
            SweepParam::K => p.k = v as usize,
            SweepParam::Weight(w) => p.set_multiplier(w, v),
        }
        let model = fit_method(method, &train.x, &y, &p, &scales, protocol.m)?;
        bcas.push(score(&model, &train, &test, data.c)?);
    }
    let scale = match param {
        SweepParam::K => 1.0,
        SweepParam::Weight(w) => scales.scale(w),
    };
    Ok((scale, bcas))
}

pub fn write_sensitivity(
    curves: &[SensitivityCurve],
    method: Method,
    param: SweepParam,
    dir: &Path,
) -> CliResult<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut paths = Vec::new();
    for c in curves {
        let name = format!(
            "sensitivity_{}_{}_{}.csv",
            sanitize(&c.dataset),
            method.name(),
            param.name()
        );
        write_file(dir, &name, &c.to_csv())?;
        paths.push(dir.join(name));
    }
    Ok(paths)
}
