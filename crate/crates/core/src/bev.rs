//! Bird's-eye-view rasterization and the grids derived from it.

use crate::classes::{ClassId, ClassPartition};
use crate::error::{Error, Result};
use crate::grid::{
    Cell, CellState, GridSpec, InpaintMask, ObstacleMap, Occupancy, Raster, SemanticGrid,
};
use crate::ingest::{frustum_filter, strip_dynamic, CalibrationSet, LabeledCloud};

/// Optional vertical band of points kept during rasterization.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HeightClip {
    pub min_z: Option<f64>,
    pub max_z: Option<f64>,
}

impl HeightClip {
    pub fn keeps(&self, z: f64) -> bool {
        self.min_z.is_none_or(|lo| z >= lo) && self.max_z.is_none_or(|hi| z <= hi)
    }
}

/// Rasterizes with no height clipping. See [`rasterize_bev_clipped`].
pub fn rasterize_bev(
    cloud: &LabeledCloud,
    spec: &GridSpec,
    partition: &ClassPartition,
) -> SemanticGrid {
    rasterize_bev_clipped(cloud, spec, partition, HeightClip::default())
}

/// Projects points onto the ground plane. Each cell takes the label of its
/// highest point; equal heights prefer obstacle classes, then the lowest id.
/// Points outside the grid or whose class is not in `C` are dropped.
pub fn rasterize_bev_clipped(
    cloud: &LabeledCloud,
    spec: &GridSpec,
    partition: &ClassPartition,
    clip: HeightClip,
) -> SemanticGrid {
    let mut best: Vec<Option<(f32, ClassId)>> = vec![None; spec.len()];
    for p in &cloud.points {
        if !partition.contains(p.class) || !clip.keeps(p.z as f64) {
            continue;
        }
        let Some(cell) = spec.cell_of(p.x as f64, p.y as f64) else {
            continue;
        };
        let slot = &mut best[spec.index(cell)];
        let replace = match *slot {
            None => true,
            Some((z, c)) => {
                if p.z != z {
                    p.z > z
                } else {
                    let (new_obs, old_obs) =
                        (partition.is_obstacle(p.class), partition.is_obstacle(c));
                    if new_obs != old_obs {
                        new_obs
                    } else {
                        p.class < c
                    }
                }
            }
        };
        if replace {
            *slot = Some((p.z, p.class));
        }
    }
    let cells = best
        .into_iter()
        .map(|b| b.map_or(CellState::Unobserved, |(_, c)| CellState::Class(c)))
        .collect();
    Raster::from_vec(*spec, cells).expect("one slot per cell")
}

type Pt = (i64, i64);

fn cross(o: Pt, a: Pt, b: Pt) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Monotone-chain convex hull in counter-clockwise order without collinear
/// vertices. Returns fewer than three points for degenerate input.
fn convex_hull(mut pts: Vec<Pt>) -> Vec<Pt> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Pt> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Pt>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn inside_or_on(hull: &[Pt], p: Pt) -> bool {
    (0..hull.len()).all(|i| cross(hull[i], hull[(i + 1) % hull.len()], p) >= 0)
}

/// Flags the unobserved cells whose centers lie inside or on the convex
/// hull of the observed cell centers.
pub fn hull_mask(grid: &SemanticGrid) -> InpaintMask {
    let spec = *grid.spec();
    let observed: Vec<Pt> = grid
        .iter()
        .filter(|(_, s)| matches!(s, CellState::Class(_)))
        .map(|(c, _)| (c.row as i64, c.col as i64))
        .collect();
    let hull = convex_hull(observed);
    if hull.len() < 3 {
        return Raster::filled(spec, false);
    }
    let (rmin, rmax) = hull.iter().fold((i64::MAX, i64::MIN), |(lo, hi), p| {
        (lo.min(p.0), hi.max(p.0))
    });
    let (cmin, cmax) = hull.iter().fold((i64::MAX, i64::MIN), |(lo, hi), p| {
        (lo.min(p.1), hi.max(p.1))
    });
    Raster::from_fn(spec, |cell| {
        let p = (cell.row as i64, cell.col as i64);
        grid[cell] == CellState::Unobserved
            && (rmin..=rmax).contains(&p.0)
            && (cmin..=cmax).contains(&p.1)
            && inside_or_on(&hull, p)
    })
}

/// Turns flagged unobserved cells into inpaint targets.
pub fn apply_mask(grid: &SemanticGrid, mask: &InpaintMask) -> Result<SemanticGrid> {
    grid.spec().check_shape(mask.spec())?;
    let cells = grid
        .cells()
        .iter()
        .zip(mask.cells())
        .map(|(&state, &flag)| match (state, flag) {
            (CellState::Unobserved, true) => CellState::ToInpaint,
            (s, _) => s,
        })
        .collect();
    Raster::from_vec(*grid.spec(), cells)
}

/// Mask flagging exactly the grid's inpaint targets.
pub fn mask_of(grid: &SemanticGrid) -> InpaintMask {
    grid.map(|s| *s == CellState::ToInpaint)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub input: SemanticGrid,
    pub mask: InpaintMask,
    pub target: SemanticGrid,
}

/// Builds one inpainting example from a single scan and the aggregated map
/// around it. Both clouds go through the same frustum filter, dynamic-class
/// removal, and rasterization.
pub fn build_training_pair(
    scan: &LabeledCloud,
    gt_map: &LabeledCloud,
    calib: &CalibrationSet,
    spec: &GridSpec,
    partition: &ClassPartition,
    clip: HeightClip,
) -> Result<TrainingPair> {
    let prepare = |cloud: &LabeledCloud| {
        let visible = strip_dynamic(&frustum_filter(cloud, calib), partition);
        rasterize_bev_clipped(&visible, spec, partition, clip)
    };
    let scan_grid = prepare(scan);
    let target = prepare(gt_map);
    let mask = hull_mask(&scan_grid);
    let input = apply_mask(&scan_grid, &mask)?;
    Ok(TrainingPair {
        input,
        mask,
        target,
    })
}

/// Obstacle classes become obstacles; free classes and every unknown cell
/// are treated as free.
pub fn to_obstacle_map(grid: &SemanticGrid, partition: &ClassPartition) -> Result<ObstacleMap> {
    let cells = grid
        .cells()
        .iter()
        .map(|s| match *s {
            CellState::Class(c) if partition.is_obstacle(c) => Ok(Occupancy::Obstacle),
            CellState::Class(c) if partition.is_free(c) => Ok(Occupancy::Free),
            CellState::Class(c) => Err(Error::UnknownClass(c)),
            CellState::Unobserved | CellState::ToInpaint => Ok(Occupancy::Free),
        })
        .collect::<Result<Vec<_>>>()?;
    Raster::from_vec(*grid.spec(), cells)
}

/// Block-majority downsampling. Ties resolve to obstacle; trailing partial
/// blocks vote over the cells they actually contain.
pub fn downsample(map: &ObstacleMap, factor: usize) -> Result<ObstacleMap> {
    if factor == 0 {
        return Err(Error::BadFactor);
    }
    let src = map.spec();
    let spec = GridSpec {
        width: src.width.div_ceil(factor),
        height: src.height.div_ceil(factor),
        cell_size: src.cell_size * factor as f64,
        ..*src
    };
    Ok(Raster::from_fn(spec, |cell| {
        let rows = cell.row * factor..((cell.row + 1) * factor).min(src.height);
        let cols = cell.col * factor..((cell.col + 1) * factor).min(src.width);
        let total = rows.len() * cols.len();
        let obstacles = rows
            .flat_map(|r| cols.clone().map(move |c| Cell::new(r, c)))
            .filter(|&c| map[c] == Occupancy::Obstacle)
            .count();
        if 2 * obstacles >= total {
            Occupancy::Obstacle
        } else {
            Occupancy::Free
        }
    }))
}
