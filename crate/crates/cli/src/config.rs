//! Run configuration: a single JSON document.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use vmot::certificates::{PathSweep, DEFAULT_MASS_FLOOR};
use vmot::lp::{DeltaPolicy, Mode};
use vmot::marginals::synthetic::{lognormal_system, random_split_system, LognormalConfig};
use vmot::marginals::{breeden_litzenberger_with_report, MarginalGrid, MarginalSystem};
use vmot::payoff::{self, AutocallSpec, CostTensor, Direction};
use vmot::pdhg::SolverConfig;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub marginals: MarginalSource,
    /// Observation times for file and inline marginals.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    pub payoff: PayoffSpec,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub delta: DeltaPolicy<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_outputs")]
    pub outputs: PathBuf,
    #[serde(default)]
    pub verify: VerifyConfig,
    /// Directory relative paths are resolved against; the config file's
    /// directory when loaded from disk.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_outputs() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MarginalSource {
    Files(Vec<MarginalFile>),
    Synthetic(Synthetic),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    /// `support,weight` rows.
    #[default]
    Pmf,
    /// `strike,price` rows, converted by butterfly differences.
    Calls,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarginalFile {
    pub t: usize,
    pub i: usize,
    pub file: PathBuf,
    #[serde(default)]
    pub format: FileFormat,
    /// Clip negative butterfly masses instead of rejecting the quotes.
    #[serde(default)]
    pub clip: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InlineGrid {
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum Synthetic {
    Lognormal(LognormalConfig),
    RandomSplit {
        n_assets: usize,
        n_times: usize,
        first_len: usize,
        #[serde(default)]
        seed: u64,
    },
    /// `grids[t][i]` given directly.
    Inline {
        grids: Vec<Vec<InlineGrid>>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    /// Reference worst-of autocallable observed at the marginal times.
    WorstOfAutocall,
    /// `sum_{t,k} |x_{t+1,k} - x_{t,k}|`
    AbsIncrement,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PayoffSpec {
    Autocall(AutocallSpec<f64>),
    /// CSV with a `cost` column, one row per grid path in flat order.
    Table {
        table: PathBuf,
    },
    Constant {
        constant: f64,
    },
    Builtin(Builtin),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SupportCheck {
    #[serde(default = "default_floor")]
    pub mass_floor: f64,
}

fn default_floor() -> f64 {
    DEFAULT_MASS_FLOOR
}

impl Default for SupportCheck {
    fn default() -> Self {
        Self { mass_floor: DEFAULT_MASS_FLOOR }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct VerifyConfig {
    #[serde(default)]
    pub subhedge: PathSweep,
    #[serde(default)]
    pub support_equality: SupportCheck,
    /// Allowed hedge violation and support gap (the latter on top of the
    /// duality gap).
    #[serde(default = "default_verify_tol")]
    pub tol: f64,
}

fn default_verify_tol() -> f64 {
    1e-6
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { subhedge: PathSweep::default(), support_equality: SupportCheck::default(), tol: default_verify_tol() }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub outdir: Option<PathBuf>,
    pub tol: Option<f64>,
    pub mode: Option<Mode>,
    pub deterministic: bool,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).context("parsing run configuration")?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, base)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(dir) = &o.outdir {
            self.outputs = dir.clone();
        }
        if let Some(tol) = o.tol {
            self.solver.eps_abs = tol;
            self.solver.eps_rel = tol;
        }
        if let Some(mode) = o.mode {
            self.mode = mode;
        }
        if o.deterministic {
            self.solver.deterministic_reductions = true;
        }
        if let Some(seed) = o.seed {
            if let MarginalSource::Synthetic(Synthetic::RandomSplit { seed: s, .. }) = &mut self.marginals {
                *s = seed;
            }
            if let PathSweep::Sampled { seed: s, .. } = &mut self.verify.subhedge {
                *s = seed;
            }
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.outputs)
    }

    /// Loads or generates the marginal system (unvalidated).
    pub fn load_marginals(&self) -> Result<MarginalSystem<f64>> {
        match &self.marginals {
            MarginalSource::Synthetic(Synthetic::Lognormal(cfg)) => {
                Ok(lognormal_system(cfg).context("generating lognormal marginals")?)
            }
            MarginalSource::Synthetic(Synthetic::RandomSplit { n_assets, n_times, first_len, seed }) => {
                let mut rng = rand::rngs::StdRng::seed_from_u64(*seed);
                let s = random_split_system(*n_assets, *n_times, *first_len, &mut rng);
                match &self.times {
                    Some(times) => Ok(MarginalSystem::new(times.clone(), s.grids().to_vec())?),
                    None => Ok(s),
                }
            }
            MarginalSource::Synthetic(Synthetic::Inline { grids }) => {
                let grids = grids
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|g| MarginalGrid::new(g.support.clone(), g.weights.clone()))
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let times = self.times.clone().unwrap_or_else(|| (1..=grids.len()).map(|t| t as f64).collect());
                Ok(MarginalSystem::new(times, grids)?)
            }
            MarginalSource::Files(files) => self.load_files(files),
        }
    }

    fn load_files(&self, files: &[MarginalFile]) -> Result<MarginalSystem<f64>> {
        ensure!(!files.is_empty(), "no marginal files listed");
        let n_times = files.iter().map(|f| f.t).max().unwrap_or(0) + 1;
        let d = files.iter().map(|f| f.i).max().unwrap_or(0) + 1;
        let mut grids: Vec<Vec<Option<MarginalGrid<f64>>>> = vec![vec![None; d]; n_times];
        for f in files {
            let path = self.resolve(&f.file);
            ensure!(path.exists(), "marginal file {} does not exist", path.display());
            let rows = read_pairs(&path)?;
            let grid = match f.format {
                FileFormat::Pmf => {
                    let (s, w): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
                    MarginalGrid::new(s, w)
                }
                FileFormat::Calls => {
                    let (k, c): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
                    breeden_litzenberger_with_report(&k, &c, f.clip).map(|e| {
                        if e.clipped_mass > 0.0 {
                            log::warn!("{}: clipped {:e} of negative mass", path.display(), e.clipped_mass);
                        }
                        e.grid
                    })
                }
            }
            .with_context(|| format!("marginal ({}, {}) from {}", f.t, f.i, path.display()))?;
            if grids[f.t][f.i].replace(grid).is_some() {
                bail!("marginal ({}, {}) listed twice", f.t, f.i);
            }
        }
        let grids = grids
            .into_iter()
            .enumerate()
            .map(|(t, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(i, g)| g.with_context(|| format!("marginal ({t}, {i}) missing")))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let times = self.times.clone().context("`times` is required with marginal files")?;
        Ok(MarginalSystem::new(times, grids)?)
    }

    pub fn cost_tensor(&self, system: &MarginalSystem<f64>, direction: Direction) -> Result<CostTensor<f64>> {
        let tensor = match &self.payoff {
            PayoffSpec::Autocall(spec) => payoff::autocall_cost_tensor(system, spec, direction)?,
            PayoffSpec::Builtin(Builtin::WorstOfAutocall) => {
                let mut spec = AutocallSpec::two_index_reference();
                spec.d = system.n_assets();
                spec.observation_times = system.times().to_vec();
                payoff::autocall_cost_tensor(system, &spec, direction)?
            }
            PayoffSpec::Builtin(Builtin::AbsIncrement) => {
                let d = system.n_assets();
                payoff::build_cost_tensor(
                    system,
                    |p| p.iter().skip(d).zip(p).map(|(b, a)| (b - a).abs()).sum(),
                    direction,
                )?
            }
            PayoffSpec::Constant { constant } => {
                let k = *constant;
                payoff::build_cost_tensor(system, |_| k, direction)?
            }
            PayoffSpec::Table { table } => {
                let path = self.resolve(table);
                let values = read_table(&path)?;
                let map = vmot::lp::IndexMap::new(system.dims());
                ensure!(
                    values.len() == map.len(),
                    "{} has {} costs, the grid has {} paths",
                    path.display(),
                    values.len(),
                    map.len()
                );
                CostTensor::new(values, map, direction)?
            }
        };
        Ok(tensor)
    }
}

fn read_pairs(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.with_context(|| format!("{} row {}", path.display(), k + 1))?;
        ensure!(rec.len() == 2, "{} row {}: expected two columns", path.display(), k + 1);
        let parse =
            |s: &str| s.parse::<f64>().with_context(|| format!("{} row {}: bad number {s:?}", path.display(), k + 1));
        rows.push((parse(&rec[0])?, parse(&rec[1])?));
    }
    Ok(rows)
}

fn read_table(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let col = reader
        .headers()?
        .iter()
        .position(|h| h == "cost")
        .with_context(|| format!("{} has no `cost` column", path.display()))?;
    reader
        .records()
        .map(|r| {
            let r = r?;
            r[col].parse::<f64>().with_context(|| format!("bad cost {:?}", &r[col]))
        })
        .collect()
}
