//! Inpainting accuracy (mIoU), label statistics, and the planner study harness.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path as FsPath, PathBuf};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bev::downsample;
use crate::classes::{ClassId, ClassPartition};
use crate::error::{Error, Result};
use crate::grid::{Cell, CellState, InpaintMask, ObstacleMap, Occupancy, SemanticGrid};
use crate::imageio::load_obstacle_png;
use crate::planner::{astar, simulate, Outcome, SensorModel, TrialResult};

// ---------------------------------------------------------------------------
// mIoU

/// Which classes enter the mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiouMode {
    /// Classes that occur in the prediction or the reference inside the mask.
    #[default]
    PresentClasses,
    /// Every class of the partition; absent classes contribute zero.
    AllClasses,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ClassCounts {
    pub fn union(&self) -> u64 {
        self.tp + self.fp + self.fn_
    }

    pub fn iou(&self) -> f64 {
        match self.union() {
            0 => 0.0,
            u => self.tp as f64 / u as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiouScore {
    pub mean: f64,
    pub mode: MiouMode,
    /// IoU of every class counted in the mean.
    pub per_class: BTreeMap<ClassId, f64>,
    pub counts: BTreeMap<ClassId, ClassCounts>,
    pub scored_cells: u64,
}

/// Accumulates the confusion over masked cells whose reference is labeled.
/// A masked cell the prediction left unlabeled counts as a miss for the
/// reference class.
pub fn confusion(
    pred: &SemanticGrid,
    gt: &SemanticGrid,
    mask: &InpaintMask,
) -> Result<(BTreeMap<ClassId, ClassCounts>, u64)> {
    pred.spec().check_shape(gt.spec())?;
    pred.spec().check_shape(mask.spec())?;
    let mut counts: BTreeMap<ClassId, ClassCounts> = BTreeMap::new();
    let mut scored = 0;
    for ((&p, &g), &m) in pred.cells().iter().zip(gt.cells()).zip(mask.cells()) {
        let (true, Some(g)) = (m, g.class()) else {
            continue;
        };
        scored += 1;
        match p.class() {
            Some(p) if p == g => counts.entry(g).or_default().tp += 1,
            Some(p) => {
                counts.entry(p).or_default().fp += 1;
                counts.entry(g).or_default().fn_ += 1;
            }
            None => counts.entry(g).or_default().fn_ += 1,
        }
    }
    Ok((counts, scored))
}

pub fn miou(
    pred: &SemanticGrid,
    gt: &SemanticGrid,
    mask: &InpaintMask,
    partition: &ClassPartition,
    mode: MiouMode,
) -> Result<MiouScore> {
    let (counts, scored) = confusion(pred, gt, mask)?;
    if scored == 0 {
        return Err(Error::EmptyMask);
    }
    if let Some(&c) = counts.keys().find(|&&c| !partition.contains(c)) {
        return Err(Error::UnknownClass(c));
    }
    let per_class: BTreeMap<ClassId, f64> = match mode {
        MiouMode::PresentClasses => counts.iter().map(|(&c, k)| (c, k.iou())).collect(),
        MiouMode::AllClasses => partition
            .classes()
            .map(|c| (c, counts.get(&c).map_or(0.0, ClassCounts::iou)))
            .collect(),
    };
    let mean = per_class.values().sum::<f64>() / per_class.len() as f64;
    Ok(MiouScore {
        mean,
        mode,
        per_class,
        counts,
        scored_cells: scored,
    })
}

/// Cell count per class of `C` (zero for absent classes).
pub fn class_histogram(grid: &SemanticGrid, partition: &ClassPartition) -> BTreeMap<ClassId, u64> {
    let mut hist: BTreeMap<ClassId, u64> = partition.classes().map(|c| (c, 0)).collect();
    for c in grid.cells().iter().filter_map(|s| s.class()) {
        *hist.entry(c).or_insert(0) += 1;
    }
    hist
}

// ---------------------------------------------------------------------------
// Planner study

#[derive(Debug, Clone, PartialEq)]
pub struct MapTriple {
    pub input: ObstacleMap,
    pub inpainted: ObstacleMap,
    pub gt: ObstacleMap,
}

impl MapTriple {
    pub fn get(&self, variant: Variant) -> &ObstacleMap {
        match variant {
            Variant::Input => &self.input,
            Variant::Inpainted => &self.inpainted,
            Variant::Gt => &self.gt,
        }
    }

    pub fn downsample(&self, factor: usize) -> Result<Self> {
        Ok(MapTriple {
            input: downsample(&self.input, factor)?,
            inpainted: downsample(&self.inpainted, factor)?,
            gt: downsample(&self.gt, factor)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    Input,
    Inpainted,
    #[serde(rename = "GT")]
    Gt,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Input, Variant::Inpainted, Variant::Gt];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Input => "Input",
            Variant::Inpainted => "Inpainted",
            Variant::Gt => "GT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StartMode {
    /// Gaussian around `mean` (row, col) with standard deviation `sigma` cells.
    FixedNearSensor {
        mean: [f64; 2],
        sigma: f64,
    },
    Random,
}

pub const DEFAULT_START_SIGMA: f64 = 5.0;
pub const DEFAULT_TRIALS: usize = 50;
const MAX_START_DRAWS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub maps: MapTriple,
    pub trials: usize,
    pub start_mode: StartMode,
    pub sensor: SensorModel,
    pub seed: u64,
}

impl StudyConfig {
    pub fn new(maps: MapTriple, start_mode: StartMode, sensor: SensorModel, seed: u64) -> Self {
        StudyConfig {
            maps,
            trials: DEFAULT_TRIALS,
            start_mode,
            sensor,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig(
                "a study needs at least one trial".into(),
            ));
        }
        if let StartMode::FixedNearSensor { sigma, mean } = self.start_mode {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::InvalidConfig("start sigma must be positive".into()));
            }
            if !mean.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidConfig("start mean must be finite".into()));
            }
        }
        let gt = self.maps.gt.spec();
        gt.check_shape(self.maps.input.spec())?;
        gt.check_shape(self.maps.inpainted.spec())?;
        Ok(())
    }

    fn trial_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }

    /// Start and goal of trial `index`, both free in the ground truth.
    pub fn sample_endpoints(&self, index: usize, free: &[Cell]) -> Result<(Cell, Cell)> {
        if free.is_empty() {
            return Err(Error::NoFreeCells(
                "ground-truth map has no free cells".into(),
            ));
        }
        let mut rng = self.trial_rng(index);
        let gt = &self.maps.gt;
        let start = match self.start_mode {
            StartMode::Random => free[rng.random_range(0..free.len())],
            StartMode::FixedNearSensor { mean, sigma } => {
                let normal =
                    Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
                let mut found = None;
                for _ in 0..MAX_START_DRAWS {
                    let r = (mean[0] + normal.sample(&mut rng)).round();
                    let c = (mean[1] + normal.sample(&mut rng)).round();
                    if r < 0.0 || c < 0.0 {
                        continue;
                    }
                    let cell = Cell::new(r as usize, c as usize);
                    if gt.is_free(cell) {
                        found = Some(cell);
                        break;
                    }
                }
                found.ok_or_else(|| {
                    Error::NoFreeCells(format!(
                        "no free start found near ({}, {})",
                        mean[0], mean[1]
                    ))
                })?
            }
        };
        let goal = free[rng.random_range(0..free.len())];
        Ok((start, goal))
    }
}

/// Everything that happened in one trial, across the three maps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRun {
    pub index: usize,
    pub start: Cell,
    pub goal: Cell,
    /// Shortest path on the ground truth, if the goal is reachable.
    pub optimal_steps: Option<usize>,
    pub results: Vec<(Variant, TrialResult)>,
}

fn free_cells(map: &ObstacleMap) -> Vec<Cell> {
    map.iter()
        .filter(|(_, o)| **o == Occupancy::Free)
        .map(|(c, _)| c)
        .collect()
}

fn run_trial_with(config: &StudyConfig, index: usize, free: &[Cell]) -> Result<TrialRun> {
    let (start, goal) = config.sample_endpoints(index, free)?;
    let gt = &config.maps.gt;
    let optimal_steps = astar(gt, start, goal)?.map(|p| p.steps());
    let results = Variant::ALL
        .iter()
        .map(|&v| {
            Ok((
                v,
                simulate(config.maps.get(v), gt, start, goal, &config.sensor)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialRun {
        index,
        start,
        goal,
        optimal_steps,
        results,
    })
}

/// Runs trial `index` of a study in isolation; identical to the trial that
/// [`run_study`] executes at that index.
pub fn run_trial(config: &StudyConfig, index: usize) -> Result<TrialRun> {
    config.validate()?;
    run_trial_with(config, index, &free_cells(&config.maps.gt))
}

/// Runs all trials and aggregates them.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    run_study_with_jobs(config, 1)
}

/// Like [`run_study`] on `jobs` worker threads. Each trial draws from its own
/// generator stream, so the report does not depend on `jobs`.
pub fn run_study_with_jobs(config: &StudyConfig, jobs: usize) -> Result<StudyReport> {
    config.validate()?;
    let free = free_cells(&config.maps.gt);
    if free.is_empty() {
        return Err(Error::NoFreeCells(
            "ground-truth map has no free cells".into(),
        ));
    }
    let runs: Vec<TrialRun> = if jobs <= 1 {
        (0..config.trials)
            .map(|i| run_trial_with(config, i, &free))
            .collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..config.trials)
                .into_par_iter()
                .map(|i| run_trial_with(config, i, &free))
                .collect::<Result<Vec<_>>>()
        })?
    };
    Ok(StudyReport::aggregate(config, &runs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation; `None` for no samples.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(MeanStd {
            mean,
            std: var.sqrt(),
        })
    }
}

pub const METRIC_PATH_STEPS: &str = "Path Steps";
pub const METRIC_REPLANS: &str = "Replans";
pub const METRIC_NO_PATH_REPLANS: &str = "Replans (no path found)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub samples: usize,
    pub value: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub reached: usize,
    pub no_path: usize,
    pub metrics: Vec<MetricSummary>,
}

impl VariantSummary {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantOutcome {
    pub variant: Variant,
    pub outcome: Outcome,
    pub path_steps: usize,
    pub replans: usize,
    pub path_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub start: Cell,
    pub goal: Cell,
    pub optimal_steps: Option<usize>,
    pub outcomes: Vec<VariantOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyHeader {
    pub trials: usize,
    pub seed: u64,
    pub sensor_radius: f64,
    pub start_mode: StartMode,
    pub map_width: usize,
    pub map_height: usize,
    pub std_convention: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub header: Option<StudyHeader>,
    pub variants: Vec<VariantSummary>,
    pub trials: Vec<TrialRecord>,
}

impl StudyReport {
    pub fn empty() -> Self {
        StudyReport {
            header: None,
            variants: Vec::new(),
            trials: Vec::new(),
        }
    }

    pub fn variant(&self, variant: Variant) -> Option<&VariantSummary> {
        self.variants.iter().find(|v| v.variant == variant.label())
    }

    fn aggregate(config: &StudyConfig, runs: &[TrialRun]) -> Self {
        let variants = Variant::ALL
            .iter()
            .map(|&variant| {
                let results: Vec<&TrialResult> = runs
                    .iter()
                    .flat_map(|run| {
                        run.results
                            .iter()
                            .filter(|(v, _)| *v == variant)
                            .map(|(_, r)| r)
                    })
                    .collect();
                let pick = |outcome: Outcome, f: fn(&TrialResult) -> usize| -> Vec<f64> {
                    results
                        .iter()
                        .filter(|r| r.outcome == outcome)
                        .map(|r| f(r) as f64)
                        .collect()
                };
                let metric = |name: &str, values: Vec<f64>| MetricSummary {
                    name: name.to_string(),
                    samples: values.len(),
                    value: MeanStd::of(&values),
                };
                let steps = pick(Outcome::Reached, |r| r.path_steps);
                let reached = steps.len();
                let no_path = pick(Outcome::NoPathFound, |r| r.replans);
                VariantSummary {
                    variant: variant.label().to_string(),
                    reached,
                    no_path: no_path.len(),
                    metrics: vec![
                        metric(METRIC_PATH_STEPS, steps),
                        metric(METRIC_REPLANS, pick(Outcome::Reached, |r| r.replans)),
                        metric(METRIC_NO_PATH_REPLANS, no_path),
                    ],
                }
            })
            .collect();
        let trials = runs
            .iter()
            .map(|run| TrialRecord {
                index: run.index,
                start: run.start,
                goal: run.goal,
                optimal_steps: run.optimal_steps,
                outcomes: run
                    .results
                    .iter()
                    .map(|(variant, r)| VariantOutcome {
                        variant: *variant,
                        outcome: r.outcome,
                        path_steps: r.path_steps,
                        replans: r.replans,
                        path_cost: r.executed.cost,
                    })
                    .collect(),
            })
            .collect();
        StudyReport {
            header: Some(StudyHeader {
                trials: config.trials,
                seed: config.seed,
                sensor_radius: config.sensor.radius,
                start_mode: config.start_mode,
                map_width: config.maps.gt.width(),
                map_height: config.maps.gt.height(),
                std_convention: "population".into(),
            }),
            variants,
            trials,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    /// Plain-text table, one row per metric and one column per map.
    #[default]
    Text,
    /// Pretty-printed JSON.
    Structured,
}

const METRIC_COL: usize = 25;
const VALUE_COL: usize = 16;

fn table_row(first: &str, rest: impl IntoIterator<Item = String>) -> String {
    let mut line = format!("| {first:<w$}", w = METRIC_COL - 1);
    for cell in rest {
        let _ = write!(line, "| {cell:<w$}", w = VALUE_COL - 1);
    }
    line.push('|');
    line
}

/// Renders a report. The text form is a table of `mean (std)` entries with
/// population standard deviations.
pub fn render_report(report: &StudyReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Structured => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Text => {
            let mut out = String::new();
            out.push_str(&table_row(
                "Metric",
                report.variants.iter().map(|v| v.variant.clone()),
            ));
            out.push('\n');
            out.push_str(&table_row(
                &"-".repeat(METRIC_COL - 2),
                report.variants.iter().map(|_| "-".repeat(VALUE_COL - 2)),
            ));
            out.push('\n');
            let names: Vec<&str> = report
                .variants
                .first()
                .map(|v| v.metrics.iter().map(|m| m.name.as_str()).collect())
                .unwrap_or_default();
            for name in names {
                let cells =
                    report
                        .variants
                        .iter()
                        .map(|v| match v.metric(name).and_then(|m| m.value) {
                            Some(ms) => format!("{:.1} ({:.1})", ms.mean, ms.std),
                            None => "n/a".to_string(),
                        });
                out.push_str(&table_row(name, cells));
                out.push('\n');
            }
            out
        }
    }
}

pub const PLOT_FREE: [u8; 3] = [255, 255, 255];
pub const PLOT_OBSTACLE: [u8; 3] = [0, 0, 0];
pub const PLOT_DISCOVERED: [u8; 3] = [255, 0, 0];
pub const PLOT_PATH: [u8; 3] = [0, 0, 255];
pub const PLOT_OVERLAP: [u8; 3] = [0, 200, 0];

/// Draws an executed trial over the map the robot started with: obstacles
/// black, obstacles discovered online red, the path blue, and cells the
/// path visits more than once green.
pub fn plot_trial(initial_belief: &ObstacleMap, result: &TrialResult) -> RgbImage {
    let mut img = RgbImage::from_fn(
        initial_belief.width() as u32,
        initial_belief.height() as u32,
        |x, y| {
            Rgb(match initial_belief[Cell::new(y as usize, x as usize)] {
                Occupancy::Free => PLOT_FREE,
                Occupancy::Obstacle => PLOT_OBSTACLE,
            })
        },
    );
    for cell in &result.discovered_obstacles {
        img.put_pixel(cell.col as u32, cell.row as u32, Rgb(PLOT_DISCOVERED));
    }
    let mut visits: BTreeMap<Cell, usize> = BTreeMap::new();
    for cell in &result.executed.cells {
        *visits.entry(*cell).or_insert(0) += 1;
    }
    for (cell, n) in visits {
        let color = if n > 1 { PLOT_OVERLAP } else { PLOT_PATH };
        img.put_pixel(cell.col as u32, cell.row as u32, Rgb(color));
    }
    img
}

// ---------------------------------------------------------------------------
// Study config file

/// On-disk study description (TOML). Map paths are resolved relative to the
/// file's directory.
///
/// ```toml
/// input = "input.png"          # obstacle maps: black = obstacle
/// inpainted = "inpainted.png"
/// gt = "gt.png"
/// trials = 50
/// seed = 0
/// downsample = 4               # optional block-majority factor
/// sensor_radius = 8.0          # optional; defaults to 30 / downsample
///
/// [start]
/// mode = "fixed_near_sensor"   # or "random"
/// mean = [140.0, 87.0]
/// sigma = 5.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyFile {
    pub input: PathBuf,
    pub inpainted: PathBuf,
    pub gt: PathBuf,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub downsample: Option<usize>,
    #[serde(default)]
    pub sensor_radius: Option<f64>,
    #[serde(default = "default_start")]
    pub start: StartMode,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_start() -> StartMode {
    StartMode::Random
}

impl StudyFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<(Self, PathBuf)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(FsPath::to_path_buf).unwrap_or_default();
        Ok((Self::parse(&text)?, base))
    }

    /// Loads the maps and builds the study; `seed` overrides the file's seed.
    pub fn into_config(self, base: &FsPath, seed: Option<u64>) -> Result<StudyConfig> {
        let load = |p: &PathBuf| load_obstacle_png(base.join(p));
        let mut maps = MapTriple {
            input: load(&self.input)?,
            inpainted: load(&self.inpainted)?,
            gt: load(&self.gt)?,
        };
        let factor = self.downsample.unwrap_or(1);
        if factor != 1 {
            maps = maps.downsample(factor)?;
        }
        let sensor = match self.sensor_radius {
            Some(r) => SensorModel::new(r)?,
            None => SensorModel::for_downsample(factor)?,
        };
        let config = StudyConfig {
            maps,
            trials: self.trials,
            start_mode: self.start,
            sensor,
            seed: seed.unwrap_or(self.seed),
        };
        config.validate()?;
        Ok(config)
    }
}

/// Semantic cells inside the mask that are labeled in the reference; shorthand
/// used by the command line when no explicit mask is given.
pub fn labeled_mask(grid: &SemanticGrid) -> InpaintMask {
    grid.map(|s| matches!(s, CellState::Class(_)))
}
