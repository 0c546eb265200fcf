//! The `bevnav` command line.
//!
//! Every subcommand wraps one pipeline stage, reads its inputs completely
//! before writing anything, and maps failures to an exit code: 2 for usage
//! errors, 3 for unreadable or invalid inputs, 4 for pipeline failures.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bev::{
    apply_mask, build_training_pair, downsample, hull_mask, rasterize_bev_clipped, to_obstacle_map,
    HeightClip,
};
use crate::classes::{ClassId, ClassPartition};
use crate::error::{Error, ErrorCategory, Result};
use crate::eval::{
    class_histogram, miou, plot_trial, render_report, run_study_with_jobs, MiouMode, ReportFormat,
    StudyFile, StudyReport,
};
use crate::grid::{Cell, GridSpec};
use crate::imageio::{
    load_mask_png, load_obstacle_png, load_png, render_mask_png, render_obstacle_png, render_png,
    save_rgb_png,
};
use crate::ingest::{frustum_filter, load_cloud, strip_dynamic, CalibrationSet};
use crate::inpaint::{inpaint, CommandTemplate, InpainterChoice, DEFAULT_RADIUS};
use crate::planner::{astar, simulate, Outcome, SensorModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_PIPELINE: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "bevnav",
    version,
    about = "Semantic BEV grids, occlusion inpainting, and replanning studies"
)]
pub struct Cli {
    /// Configuration file. For `study` this is the study description; for
    /// every other subcommand it is a class-partition TOML file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Progress messages on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Output format of reporting commands.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Structured,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => ReportFormat::Text,
            Format::Structured => ReportFormat::Structured,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build input / mask / target PNG triples for every scan of a sequence.
    Datagen(DatagenArgs),
    /// Rasterize one labeled scan into a semantic BEV grid.
    Rasterize(RasterizeArgs),
    /// Compute the convex-hull inpaint mask of a semantic grid.
    Mask(MaskArgs),
    /// Fill the inpaint targets of a semantic grid.
    Inpaint(InpaintArgs),
    /// Derive an obstacle map from a semantic grid.
    Obstacles(ObstaclesArgs),
    /// Shortest path on a known obstacle map.
    Plan(PlanArgs),
    /// Navigate on a belief map with online sensing of the true map.
    Simulate(SimulateArgs),
    /// Run a seeded multi-trial study over input / inpainted / ground-truth maps.
    Study(StudyArgs),
    /// Mean intersection-over-union inside a mask.
    Miou(MiouArgs),
    /// Per-class cell counts over one or more semantic grids.
    Histogram(HistogramArgs),
    /// Re-render a saved structured study report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CameraArgs {
    /// Projection row of the calibration file to use.
    #[arg(long, default_value = "P2")]
    pub camera: String,
    #[arg(long, default_value_t = 1241)]
    pub image_width: u32,
    #[arg(long, default_value_t = 376)]
    pub image_height: u32,
    /// Drop points below this height (sensor frame, metres).
    #[arg(long, allow_hyphen_values = true)]
    pub min_z: Option<f64>,
    /// Drop points above this height.
    #[arg(long, allow_hyphen_values = true)]
    pub max_z: Option<f64>,
}

impl CameraArgs {
    fn calibration(&self, path: &FsPath) -> Result<CalibrationSet> {
        CalibrationSet::load(path, &self.camera, self.image_width, self.image_height)
    }

    fn clip(&self) -> Result<HeightClip> {
        if let (Some(lo), Some(hi)) = (self.min_z, self.max_z) {
            if lo > hi {
                return Err(Error::InvalidConfig("--min-z exceeds --max-z".into()));
            }
        }
        Ok(HeightClip {
            min_z: self.min_z,
            max_z: self.max_z,
        })
    }
}

#[derive(Debug, Args)]
pub struct DatagenArgs {
    /// Sequence directory with calib.txt, velodyne/, labels/, and completed/.
    #[arg(long)]
    pub sequence: PathBuf,
    /// Output directory; receives input/, mask/, and target/.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub camera: CameraArgs,
}

#[derive(Debug, Args)]
pub struct RasterizeArgs {
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Calibration file; without it no frustum filtering is applied.
    #[arg(long)]
    pub calib: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub camera: CameraArgs,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Mask PNG (white = fill).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the grid with masked cells marked for inpainting.
    #[arg(long)]
    pub masked: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Nearest,
    Majority,
    External,
}

#[derive(Debug, Args)]
pub struct InpaintArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Majority)]
    pub method: Method,
    /// Majority window radius in cells.
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    pub radius: usize,
    /// Majority pass cap (default: width + height).
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// External command template with {input}, {mask}, {output} placeholders.
    #[arg(long = "command")]
    pub command: Option<String>,
}

#[derive(Debug, Args)]
pub struct ObstaclesArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Block-majority downsampling factor.
    #[arg(long, default_value_t = 1)]
    pub downsample: usize,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Obstacle map PNG (black = obstacle).
    #[arg(long)]
    pub map: PathBuf,
    /// Start cell as `row,col`.
    #[arg(long)]
    pub start: Cell,
    #[arg(long)]
    pub goal: Cell,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Map the robot plans on initially.
    #[arg(long)]
    pub belief: PathBuf,
    /// True map revealed by the sensor.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub start: Cell,
    #[arg(long)]
    pub goal: Cell,
    #[arg(long, default_value_t = 30.0)]
    pub sensor_radius: f64,
    /// Write the executed path over the belief map as a PNG.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Worker threads; results do not depend on this.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Also write the structured report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MiouArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    /// Average over every class of the partition instead of present ones.
    #[arg(long)]
    pub all_classes: bool,
}

#[derive(Debug, Args)]
pub struct HistogramArgs {
    #[arg(long = "input", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Structured report produced by `study`.
    #[arg(long)]
    pub input: PathBuf,
}

/// Parses `args` (including the program name) and runs the command,
/// writing results to stdout and diagnostics to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.category() {
        ErrorCategory::Input => EXIT_INPUT,
        ErrorCategory::Pipeline => EXIT_PIPELINE,
    }
}

struct Ctx<'a> {
    cli: &'a Cli,
    err: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn log(&mut self, msg: impl AsRef<str>) {
        if self.cli.verbose > 0 {
            let _ = writeln!(self.err, "{}", msg.as_ref());
        }
    }

    fn partition(&self) -> Result<ClassPartition> {
        match &self.cli.config {
            Some(path) => ClassPartition::load(path),
            None => Ok(ClassPartition::semantic_kitti()),
        }
    }

    fn seed(&self) -> u64 {
        self.cli.seed.unwrap_or(0)
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Serde(e.to_string()))?;
    s.push('\n');
    emit(out, &s)
}

fn create_dir(path: &FsPath) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let mut ctx = Ctx { cli, err };
    match &cli.command {
        Command::Datagen(a) => datagen(&mut ctx, a, out),
        Command::Rasterize(a) => rasterize(&mut ctx, a),
        Command::Mask(a) => mask(&mut ctx, a),
        Command::Inpaint(a) => inpaint_cmd(&mut ctx, a),
        Command::Obstacles(a) => obstacles(&mut ctx, a),
        Command::Plan(a) => plan(&ctx, a, out),
        Command::Simulate(a) => simulate_cmd(&mut ctx, a, out),
        Command::Study(a) => study(&mut ctx, a, out),
        Command::Miou(a) => miou_cmd(&ctx, a, out),
        Command::Histogram(a) => histogram(&ctx, a, out),
        Command::Report(a) => report(&ctx, a, out),
    }
}

fn sorted_files(dir: &FsPath, ext: &str) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == ext) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn require_file(path: PathBuf) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::io(
            &path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ))
    }
}

fn datagen(ctx: &mut Ctx, a: &DatagenArgs, out: &mut dyn Write) -> Result<()> {
    let partition = ctx.partition()?;
    let calib = a.camera.calibration(&a.sequence.join("calib.txt"))?;
    let clip = a.camera.clip()?;
    let spec = GridSpec::kitti_volume();

    // Resolve every scan's four files before writing anything.
    let mut jobs = Vec::new();
    for scan in sorted_files(&a.sequence.join("velodyne"), "bin")? {
        let stem = scan
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        let labels = require_file(a.sequence.join("labels").join(format!("{stem}.label")))?;
        let map_points = require_file(a.sequence.join("completed").join(format!("{stem}.bin")))?;
        let map_labels = require_file(a.sequence.join("completed").join(format!("{stem}.label")))?;
        jobs.push((stem, scan, labels, map_points, map_labels));
    }
    if jobs.is_empty() {
        return Err(Error::MalformedFile {
            path: a.sequence.join("velodyne"),
            reason: "no .bin scans found".into(),
        });
    }

    let dirs = ["input", "mask", "target"].map(|d| a.out.join(d));
    for d in &dirs {
        create_dir(d)?;
    }
    for (stem, scan, labels, map_points, map_labels) in &jobs {
        let scan = load_cloud(scan, labels)?;
        let map = load_cloud(map_points, map_labels)?;
        let pair = build_training_pair(&scan, &map, &calib, &spec, &partition, clip)?;
        let name = format!("{stem}.png");
        render_png(&pair.input, &partition, dirs[0].join(&name))?;
        render_mask_png(&pair.mask, dirs[1].join(&name))?;
        render_png(&pair.target, &partition, dirs[2].join(&name))?;
        ctx.log(format!("wrote {stem}"));
    }
    emit(
        out,
        &format!(
            "{} training pairs written to {}\n",
            jobs.len(),
            a.out.display()
        ),
    )
}

fn rasterize(ctx: &mut Ctx, a: &RasterizeArgs) -> Result<()> {
    let partition = ctx.partition()?;
    let clip = a.camera.clip()?;
    let mut cloud = load_cloud(&a.points, &a.labels)?;
    if let Some(calib) = &a.calib {
        cloud = frustum_filter(&cloud, &a.camera.calibration(calib)?);
    }
    let cloud = strip_dynamic(&cloud, &partition);
    ctx.log(format!("{} points after filtering", cloud.len()));
    let grid = rasterize_bev_clipped(&cloud, &GridSpec::kitti_volume(), &partition, clip);
    render_png(&grid, &partition, &a.out)
}

fn mask(ctx: &mut Ctx, a: &MaskArgs) -> Result<()> {
    let partition = ctx.partition()?;
    let grid = load_png(&a.input, &partition)?;
    let m = hull_mask(&grid);
    let masked = apply_mask(&grid, &m)?;
    ctx.log(format!(
        "{} cells to fill",
        m.cells().iter().filter(|&&b| b).count()
    ));
    render_mask_png(&m, &a.out)?;
    if let Some(path) = &a.masked {
        render_png(&masked, &partition, path)?;
    }
    Ok(())
}

fn inpaint_cmd(ctx: &mut Ctx, a: &InpaintArgs) -> Result<()> {
    let partition = ctx.partition()?;
    let choice = match a.method {
        Method::Nearest => InpainterChoice::NearestClass,
        Method::Majority => InpainterChoice::IterativeMajority {
            radius: a.radius,
            max_iters: a.max_iters,
            seed: ctx.seed(),
        },
        Method::External => {
            let cmd = a
                .command
                .as_deref()
                .ok_or_else(|| Error::InvalidConfig("--method external needs --command".into()))?;
            InpainterChoice::External {
                command: CommandTemplate::parse(cmd)?,
            }
        }
    };
    let grid = load_png(&a.input, &partition)?;
    let filled = inpaint(&grid, &choice, &partition)?;
    render_png(&filled, &partition, &a.out)
}

fn obstacles(ctx: &mut Ctx, a: &ObstaclesArgs) -> Result<()> {
    let partition = ctx.partition()?;
    let grid = load_png(&a.input, &partition)?;
    let map = downsample(&to_obstacle_map(&grid, &partition)?, a.downsample)?;
    ctx.log(format!("{}x{} obstacle map", map.width(), map.height()));
    render_obstacle_png(&map, &a.out)
}

#[derive(Serialize)]
struct PlanSummary {
    found: bool,
    steps: Option<usize>,
    cost: Option<f64>,
    path: Vec<Cell>,
}

fn join_cells(cells: &[Cell]) -> String {
    cells
        .iter()
        .map(Cell::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

fn plan(ctx: &Ctx, a: &PlanArgs, out: &mut dyn Write) -> Result<()> {
    let map = load_obstacle_png(&a.map)?;
    let path = astar(&map, a.start, a.goal)?;
    let summary = PlanSummary {
        found: path.is_some(),
        steps: path.as_ref().map(|p| p.steps()),
        cost: path.as_ref().map(|p| p.cost),
        path: path.map(|p| p.cells).unwrap_or_default(),
    };
    match ctx.cli.format {
        Format::Structured => emit_json(out, &summary),
        Format::Text => match (summary.steps, summary.cost) {
            (Some(steps), Some(cost)) => emit(
                out,
                &format!(
                    "steps {steps}\ncost {cost:.6}\npath {}\n",
                    join_cells(&summary.path)
                ),
            ),
            _ => emit(out, "no path\n"),
        },
    }
}

#[derive(Serialize)]
struct SimulationSummary {
    outcome: Outcome,
    path_steps: usize,
    path_cost: f64,
    replans: usize,
    discovered_obstacles: Vec<Cell>,
    executed: Vec<Cell>,
}

fn simulate_cmd(ctx: &mut Ctx, a: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let belief = load_obstacle_png(&a.belief)?;
    let gt = load_obstacle_png(&a.gt)?;
    let sensor = SensorModel::new(a.sensor_radius)?;
    let result = simulate(&belief, &gt, a.start, a.goal, &sensor)?;
    if let Some(path) = &a.plot {
        save_rgb_png(&plot_trial(&belief, &result), path)?;
        ctx.log(format!("plot written to {}", path.display()));
    }
    let summary = SimulationSummary {
        outcome: result.outcome,
        path_steps: result.path_steps,
        path_cost: result.executed.cost,
        replans: result.replans,
        discovered_obstacles: result.discovered_obstacles,
        executed: result.executed.cells,
    };
    match ctx.cli.format {
        Format::Structured => emit_json(out, &summary),
        Format::Text => {
            let outcome = match summary.outcome {
                Outcome::Reached => "reached",
                Outcome::NoPathFound => "no_path_found",
            };
            emit(
                out,
                &format!(
                    "outcome {outcome}\nsteps {}\ncost {:.6}\nreplans {}\ndiscovered {}\n",
                    summary.path_steps,
                    summary.path_cost,
                    summary.replans,
                    summary.discovered_obstacles.len()
                ),
            )
        }
    }
}

fn study(ctx: &mut Ctx, a: &StudyArgs, out: &mut dyn Write) -> Result<()> {
    let path = ctx
        .cli
        .config
        .clone()
        .ok_or_else(|| Error::InvalidConfig("study needs --config <study file>".into()))?;
    let (file, base) = StudyFile::load(&path)?;
    let config = file.into_config(&base, ctx.cli.seed)?;
    ctx.log(format!(
        "{} trials on {}x{} maps, seed {}",
        config.trials,
        config.maps.gt.width(),
        config.maps.gt.height(),
        config.seed
    ));
    let report = run_study_with_jobs(&config, a.jobs)?;
    if let Some(dest) = &a.out {
        let text = render_report(&report, ReportFormat::Structured);
        std::fs::write(dest, text).map_err(|e| Error::io(dest, e))?;
    }
    emit(out, &render_report(&report, ctx.cli.format.into()))
}

/// Shortest decimal that keeps a `.0` on whole numbers.
fn format_score(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0');
    if s.ends_with('.') {
        format!("{s}0")
    } else {
        s.to_string()
    }
}

fn miou_cmd(ctx: &Ctx, a: &MiouArgs, out: &mut dyn Write) -> Result<()> {
    let partition = ctx.partition()?;
    let pred = load_png(&a.pred, &partition)?;
    let gt = load_png(&a.gt, &partition)?;
    let m = load_mask_png(&a.mask)?;
    let mode = if a.all_classes {
        MiouMode::AllClasses
    } else {
        MiouMode::PresentClasses
    };
    let score = miou(&pred, &gt, &m, &partition, mode)?;
    match ctx.cli.format {
        Format::Structured => emit_json(out, &score),
        Format::Text => {
            let mut text = format!("{}\n", format_score(score.mean));
            for (c, iou) in &score.per_class {
                text.push_str(&format!(
                    "  {:<20} {}\n",
                    partition.name(*c).unwrap_or("?"),
                    format_score(*iou)
                ));
            }
            emit(out, &text)
        }
    }
}

fn histogram(ctx: &Ctx, a: &HistogramArgs, out: &mut dyn Write) -> Result<()> {
    let partition = ctx.partition()?;
    let mut total: BTreeMap<ClassId, u64> = partition.classes().map(|c| (c, 0)).collect();
    for path in &a.inputs {
        let grid = load_png(path, &partition)?;
        for (c, n) in class_histogram(&grid, &partition) {
            *total.entry(c).or_insert(0) += n;
        }
    }
    match ctx.cli.format {
        Format::Structured => {
            let named: BTreeMap<String, u64> = total
                .iter()
                .map(|(c, n)| (partition.name(*c).unwrap_or("?").to_string(), *n))
                .collect();
            emit_json(out, &named)
        }
        Format::Text => {
            let mut text = String::new();
            for (c, n) in &total {
                text.push_str(&format!(
                    "{:>4} {:<20} {n}\n",
                    c,
                    partition.name(*c).unwrap_or("?")
                ));
            }
            emit(out, &text)
        }
    }
}

fn report(ctx: &Ctx, a: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    let text = std::fs::read_to_string(&a.input).map_err(|e| Error::io(&a.input, e))?;
    let report: StudyReport =
        serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))?;
    emit(out, &render_report(&report, ctx.cli.format.into()))
}
