//! Filling inpaint targets of a semantic grid.
//!
//! Two classical fills are built in. Any other inpainter (for example a
//! trained image inpainting network) can be plugged in as a subprocess that
//! follows the `<command> <input.png> <mask.png> <output.png>` contract.

use std::collections::BTreeMap;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bev::mask_of;
use crate::classes::{ClassId, ClassPartition};
use crate::error::{Error, Result};
use crate::grid::{CellState, InpaintMask, SemanticGrid};
use crate::imageio::{grid_to_image, image_to_grid_quantized, mask_to_image};

pub const DEFAULT_RADIUS: usize = 1;

/// Argument template for an external inpainter. Tokens are separated by
/// whitespace and `{input}`, `{mask}`, `{output}` are replaced by file paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CommandTemplate {
    tokens: Vec<String>,
}

impl CommandTemplate {
    pub fn parse(template: &str) -> Result<Self> {
        let tokens: Vec<String> = template.split_whitespace().map(String::from).collect();
        if tokens.is_empty() {
            return Err(Error::InvalidConfig("empty inpainter command".into()));
        }
        for placeholder in ["{input}", "{mask}", "{output}"] {
            if !tokens.iter().any(|t| t.contains(placeholder)) {
                return Err(Error::InvalidConfig(format!(
                    "inpainter command lacks the {placeholder} placeholder"
                )));
            }
        }
        Ok(CommandTemplate { tokens })
    }

    fn render(&self, input: &str, mask: &str, output: &str) -> Vec<String> {
        self.tokens
            .iter()
            .map(|t| {
                t.replace("{input}", input)
                    .replace("{mask}", mask)
                    .replace("{output}", output)
            })
            .collect()
    }
}

impl TryFrom<String> for CommandTemplate {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Self::parse(&s)
    }
}

impl From<CommandTemplate> for String {
    fn from(t: CommandTemplate) -> String {
        t.tokens.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum InpainterChoice {
    NearestClass,
    IterativeMajority {
        #[serde(default = "default_radius")]
        radius: usize,
        /// Pass cap; `None` means width + height.
        #[serde(default)]
        max_iters: Option<usize>,
        #[serde(default)]
        seed: u64,
    },
    External {
        command: CommandTemplate,
    },
}

fn default_radius() -> usize {
    DEFAULT_RADIUS
}

impl InpainterChoice {
    pub fn majority(seed: u64) -> Self {
        InpainterChoice::IterativeMajority {
            radius: DEFAULT_RADIUS,
            max_iters: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InpainterChoice::IterativeMajority {
                radius, max_iters, ..
            } => {
                if *radius == 0 {
                    return Err(Error::InvalidConfig(
                        "majority radius must be at least 1".into(),
                    ));
                }
                if *max_iters == Some(0) {
                    return Err(Error::InvalidConfig(
                        "iteration cap must be at least 1".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Fills every inpaint target of `grid` and checks the result: no target
/// left, every other cell untouched, every filled value a class of `C`.
pub fn inpaint(
    grid: &SemanticGrid,
    choice: &InpainterChoice,
    partition: &ClassPartition,
) -> Result<SemanticGrid> {
    choice.validate()?;
    if !grid.cells().contains(&CellState::ToInpaint) {
        return Ok(grid.clone());
    }
    let out = match choice {
        InpainterChoice::NearestClass => nearest_class_fill(grid)?,
        InpainterChoice::IterativeMajority {
            radius,
            max_iters,
            seed,
        } => {
            let cap = max_iters.unwrap_or(grid.width() + grid.height());
            iterative_majority_fill(grid, *radius, cap, *seed)?
        }
        InpainterChoice::External { command } => {
            external_inpaint(grid, &mask_of(grid), command, partition)?.grid
        }
    };
    check_fill(grid, &out, partition)?;
    Ok(out)
}

fn check_fill(
    before: &SemanticGrid,
    after: &SemanticGrid,
    partition: &ClassPartition,
) -> Result<()> {
    let mut remaining = 0;
    for (&a, &b) in before.cells().iter().zip(after.cells()) {
        match a {
            CellState::ToInpaint => match b {
                CellState::Class(c) if partition.contains(c) => {}
                CellState::Class(c) => return Err(Error::UnknownClass(c)),
                _ => remaining += 1,
            },
            known => assert_eq!(known, b, "fill modified a known cell"),
        }
    }
    if remaining > 0 {
        return Err(Error::IncompleteFill { remaining });
    }
    Ok(())
}

const UNREACHED: f64 = f64::INFINITY;

/// Exact squared distance from each cell to the nearest site, by separable
/// lower envelopes of parabolas. Cells are row-major over `width x height`.
fn squared_distance_transform(sites: &[bool], width: usize, height: usize) -> Vec<f64> {
    let mut grid: Vec<f64> = sites
        .iter()
        .map(|&s| if s { 0.0 } else { UNREACHED })
        .collect();
    let mut column = vec![0.0; height];
    for c in 0..width {
        for r in 0..height {
            column[r] = grid[r * width + c];
        }
        let out = envelope_1d(&column);
        for r in 0..height {
            grid[r * width + c] = out[r];
        }
    }
    for r in 0..height {
        let row = &mut grid[r * width..(r + 1) * width];
        let out = envelope_1d(row);
        row.copy_from_slice(&out);
    }
    grid
}

fn envelope_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![UNREACHED; n];
    let mut vertices: Vec<usize> = Vec::with_capacity(n);
    let mut bounds: Vec<f64> = Vec::with_capacity(n + 1);
    for q in (0..n).filter(|&q| f[q].is_finite()) {
        let qf = q as f64;
        loop {
            let Some(&v) = vertices.last() else {
                vertices.push(q);
                bounds.clear();
                bounds.push(f64::NEG_INFINITY);
                break;
            };
            let vf = v as f64;
            let s = ((f[q] + qf * qf) - (f[v] + vf * vf)) / (2.0 * qf - 2.0 * vf);
            if s <= *bounds.last().unwrap() {
                vertices.pop();
                bounds.pop();
            } else {
                vertices.push(q);
                bounds.push(s);
                break;
            }
        }
    }
    if vertices.is_empty() {
        return out;
    }
    let mut k = 0;
    for (q, slot) in out.iter_mut().enumerate() {
        while k + 1 < vertices.len() && bounds[k + 1] < q as f64 {
            k += 1;
        }
        let v = vertices[k];
        let d = q as f64 - v as f64;
        *slot = d * d + f[v];
    }
    out
}

/// Each target takes the class of the nearest labeled cell (euclidean cell
/// distance); equidistant classes resolve to the lowest id.
pub fn nearest_class_fill(grid: &SemanticGrid) -> Result<SemanticGrid> {
    let present: std::collections::BTreeSet<ClassId> =
        grid.cells().iter().filter_map(|s| s.class()).collect();
    if present.is_empty() {
        return Err(Error::NoKnownCells);
    }
    let (w, h) = (grid.width(), grid.height());
    let mut best: Vec<Option<(f64, ClassId)>> = vec![None; grid.cells().len()];
    // Ascending ids with a strict comparison keep the lowest id on ties.
    for &class in &present {
        let sites: Vec<bool> = grid
            .cells()
            .iter()
            .map(|s| *s == CellState::Class(class))
            .collect();
        let dist = squared_distance_transform(&sites, w, h);
        for (slot, &d) in best.iter_mut().zip(&dist) {
            if slot.is_none_or(|(bd, _)| d < bd) {
                *slot = Some((d, class));
            }
        }
    }
    let mut out = grid.clone();
    for (cell, slot) in out.cells_mut().iter_mut().zip(best) {
        if *cell == CellState::ToInpaint {
            *cell = CellState::Class(slot.expect("some class present").1);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MajorityStats {
    /// Passes that filled at least one cell.
    pub passes: usize,
    /// Cells left for the nearest-class fallback.
    pub fallback_cells: usize,
}

pub fn iterative_majority_fill(
    grid: &SemanticGrid,
    radius: usize,
    max_iters: usize,
    seed: u64,
) -> Result<SemanticGrid> {
    iterative_majority_fill_with_stats(grid, radius, max_iters, seed).map(|(g, _)| g)
}

/// Synchronous passes: every target with labeled cells in its
/// `(2 * radius + 1)^2` window takes their majority class, with ties drawn
/// from a seeded generator in row-major order. Targets without labeled
/// neighbors wait. Whatever survives `max_iters` passes is filled by
/// [`nearest_class_fill`].
pub fn iterative_majority_fill_with_stats(
    grid: &SemanticGrid,
    radius: usize,
    max_iters: usize,
    seed: u64,
) -> Result<(SemanticGrid, MajorityStats)> {
    if radius == 0 || max_iters == 0 {
        return Err(Error::InvalidConfig(
            "radius and iteration cap must be at least 1".into(),
        ));
    }
    let (w, h) = (grid.width(), grid.height());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = grid.clone();
    let mut stats = MajorityStats::default();
    let mut pending: Vec<usize> = (0..current.cells().len())
        .filter(|&i| current.cells()[i] == CellState::ToInpaint)
        .collect();
    let mut counts: BTreeMap<ClassId, u32> = BTreeMap::new();

    for _ in 0..max_iters {
        if pending.is_empty() {
            break;
        }
        let snapshot = current.cells().to_vec();
        let mut still = Vec::with_capacity(pending.len());
        let mut filled_any = false;
        for &i in &pending {
            let (r, c) = (i / w, i % w);
            counts.clear();
            for rr in r.saturating_sub(radius)..=(r + radius).min(h - 1) {
                for cc in c.saturating_sub(radius)..=(c + radius).min(w - 1) {
                    if let CellState::Class(k) = snapshot[rr * w + cc] {
                        *counts.entry(k).or_insert(0) += 1;
                    }
                }
            }
            let Some(&top) = counts.values().max() else {
                still.push(i);
                continue;
            };
            let tied: Vec<ClassId> = counts
                .iter()
                .filter(|(_, &n)| n == top)
                .map(|(&k, _)| k)
                .collect();
            let pick = if tied.len() == 1 {
                tied[0]
            } else {
                tied[rng.random_range(0..tied.len())]
            };
            current.cells_mut()[i] = CellState::Class(pick);
            filled_any = true;
        }
        pending = still;
        if !filled_any {
            break;
        }
        stats.passes += 1;
    }
    stats.fallback_cells = pending.len();
    if !pending.is_empty() {
        current = nearest_class_fill(&current)?;
    }
    Ok((current, stats))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalOutcome {
    pub grid: SemanticGrid,
    /// Known cells the inpainter repainted; restored to their input values.
    pub drift: usize,
    /// Output pixels that were off-palette and snapped to the nearest entry.
    pub snapped: usize,
}

/// Runs an external inpainter in a fresh temporary directory.
pub fn external_inpaint(
    grid: &SemanticGrid,
    mask: &InpaintMask,
    command: &CommandTemplate,
    partition: &ClassPartition,
) -> Result<ExternalOutcome> {
    grid.spec().check_shape(mask.spec())?;
    let failed = |what: String| Error::ExternalFailed(what);
    let dir = tempfile::Builder::new()
        .prefix("bevnav-inpaint-")
        .tempdir()
        .map_err(|e| failed(format!("cannot create workspace: {e}")))?;
    let input = dir.path().join("input.png");
    let mask_path = dir.path().join("mask.png");
    let output = dir.path().join("output.png");
    crate::imageio::save_rgb_png(&grid_to_image(grid, partition)?, &input)?;
    mask_to_image(mask)
        .save_with_format(&mask_path, image::ImageFormat::Png)
        .map_err(|e| failed(format!("cannot write mask: {e}")))?;

    let argv = command.render(
        &input.to_string_lossy(),
        &mask_path.to_string_lossy(),
        &output.to_string_lossy(),
    );
    let result = Command::new(&argv[0])
        .args(&argv[1..])
        .output()
        .map_err(|e| failed(format!("cannot run {}: {e}", argv[0])))?;
    if !result.status.success() {
        return Err(failed(format!(
            "{} exited with {}: {}",
            argv[0],
            result.status,
            String::from_utf8_lossy(&result.stderr).trim()
        )));
    }
    if !output.exists() {
        return Err(failed("inpainter produced no output image".into()));
    }
    let img = image::open(&output)
        .map_err(|e| failed(format!("unreadable output image: {e}")))?
        .to_rgb8();
    if img.width() as usize != grid.width() || img.height() as usize != grid.height() {
        return Err(failed(format!(
            "output is {}x{}, expected {}x{}",
            img.width(),
            img.height(),
            grid.width(),
            grid.height()
        )));
    }
    let (loaded, snapped) = image_to_grid_quantized(&img, partition)?;
    let mut drift = 0;
    let mut remaining = 0;
    let mut out = grid.clone();
    for ((slot, &orig), &new) in out
        .cells_mut()
        .iter_mut()
        .zip(grid.cells())
        .zip(loaded.cells())
    {
        if orig == CellState::ToInpaint {
            match new {
                CellState::Class(_) => *slot = new,
                _ => remaining += 1,
            }
        } else if new != orig {
            drift += 1;
        }
    }
    if remaining > 0 {
        return Err(Error::IncompleteFill { remaining });
    }
    Ok(ExternalOutcome {
        grid: out,
        drift,
        snapped,
    })
}
