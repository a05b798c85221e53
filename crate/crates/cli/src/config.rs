//! Experiment configuration (TOML).
//!
//! ```toml
//! seed = 7                 # optional; falls back to SUBSPACE_SEED, then 0
//! repetitions = 10
//! output_dir = "results"   # relative to the config file
//! methods = ["baseline", "pca", "sdspcaan"]
//! neighbors = 5
//! timing = true            # false writes runtime_seconds = 0
//!
//! [grids]                  # each list optional; weights are multipliers
//! k = [10, 20, 30]
//! alpha = [0.01, 0.1, 1, 10, 100]
//!
//! [[dataset]]
//! name = "musk1"
//! path = "data/musk1.csv"
//! label_column = "last"    # "last", a zero-based index, or a header name
//!
//! [[dataset]]
//! name = "blobs"
//! synthetic = { n_per_class = 100, c = 3, d_informative = 10, d_noise = 40,
//!               separation = 6.0, noise_scale = 3.0, seed = 1 }
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use subspace_core::eval::{Grid, Method, Protocol};
use subspace_core::graph::DEFAULT_NEIGHBORS;
use subspace_core::synth::BlobSpec;

use crate::dataset::LabelColumn;
use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "SUBSPACE_SEED";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    repetitions: Option<usize>,
    output_dir: Option<PathBuf>,
    methods: Vec<String>,
    neighbors: Option<usize>,
    timing: Option<bool>,
    #[serde(default)]
    grids: RawGrids,
    #[serde(default)]
    dataset: Vec<RawDataset>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrids {
    k: Option<Vec<usize>>,
    alpha: Option<Vec<f64>>,
    beta: Option<Vec<f64>>,
    delta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    name: String,
    path: Option<PathBuf>,
    label_column: Option<String>,
    synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_per_class: usize,
    pub c: usize,
    pub d_informative: usize,
    #[serde(default)]
    pub d_noise: usize,
    pub separation: f64,
    #[serde(default)]
    pub noise_scale: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn blob_spec(&self) -> BlobSpec {
        let spec = BlobSpec::new(
            self.n_per_class,
            self.c,
            self.d_informative,
            self.d_noise,
            self.separation,
            self.seed,
        );
        match self.noise_scale {
            Some(s) => spec.anisotropic(s),
            None => spec,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv { path: PathBuf, label_column: LabelColumn },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub name: String,
    pub source: DataSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetConfig>,
    pub methods: Vec<Method>,
    pub protocol: Protocol,
    pub repetitions: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub timing: bool,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub no_timing: bool,
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, overrides)
    }

    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path, overrides: &Overrides) -> CliResult<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;

        if raw.methods.is_empty() {
            return Err(CliError::Config("methods list is empty".into()));
        }
        let mut methods = Vec::new();
        for name in &raw.methods {
            let m: Method = name.parse()?;
            if methods.contains(&m) {
                return Err(CliError::Config(format!("method {m} listed twice")));
            }
            methods.push(m);
        }

        if raw.dataset.is_empty() {
            return Err(CliError::Config("no [[dataset]] blocks".into()));
        }
        let mut datasets: Vec<DatasetConfig> = Vec::new();
        for d in raw.dataset {
            if datasets.iter().any(|e| e.name == d.name) {
                return Err(CliError::Config(format!("dataset {:?} defined twice", d.name)));
            }
            let source = match (d.path, d.synthetic) {
                (Some(p), None) => {
                    let path = base.join(p);
                    if !path.is_file() {
                        return Err(CliError::Config(format!(
                            "dataset {:?}: {} does not exist",
                            d.name,
                            path.display()
                        )));
                    }
                    DataSource::Csv {
                        path,
                        label_column: d.label_column.as_deref().map(LabelColumn::parse).unwrap_or_default(),
                    }
                }
                (None, Some(s)) => DataSource::Synthetic(s),
                _ => {
                    return Err(CliError::Config(format!(
                        "dataset {:?} needs exactly one of `path` or `synthetic`",
                        d.name
                    )))
                }
            };
            datasets.push(DatasetConfig { name: d.name, source });
        }

        let repetitions = raw.repetitions.unwrap_or(10);
        if repetitions == 0 {
            return Err(CliError::Config("repetitions must be at least 1".into()));
        }

        let mut grid = Grid::default();
        let check = |name: &str, empty: bool| {
            if empty {
                Err(CliError::Config(format!("grid {name} is empty")))
            } else {
                Ok(())
            }
        };
        if let Some(k) = raw.grids.k {
            check("k", k.is_empty())?;
            grid.k = k;
        }
        for (name, values, slot) in [
            ("alpha", raw.grids.alpha, &mut grid.alpha),
            ("beta", raw.grids.beta, &mut grid.beta),
            ("delta", raw.grids.delta, &mut grid.delta),
        ] {
            if let Some(v) = values {
                check(name, v.is_empty())?;
                if v.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                    return Err(CliError::Config(format!("grid {name} has a negative or non-finite value")));
                }
                *slot = v;
            }
        }

        let seed = match overrides.seed.or(raw.seed) {
            Some(s) => s,
            None => seed_from_env()?.unwrap_or(0),
        };
        let output_dir = overrides
            .output_dir
            .clone()
            .or_else(|| raw.output_dir.map(|p| base.join(p)))
            .unwrap_or_else(|| base.join("results"));

        Ok(Self {
            datasets,
            methods,
            protocol: Protocol {
                grid,
                m: raw.neighbors.unwrap_or(DEFAULT_NEIGHBORS),
            },
            repetitions,
            seed,
            output_dir,
            timing: raw.timing.unwrap_or(true) && !overrides.no_timing,
        })
    }
}

pub fn seed_from_env() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}
