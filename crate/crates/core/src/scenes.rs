//! Small synthetic scenes with known structure, used by the examples and
//! the test suites.

use nalgebra::{Matrix3x4, Matrix4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bev::{apply_mask, hull_mask, to_obstacle_map};
use crate::classes::{ClassId, ClassPartition};
use crate::error::Result;
use crate::eval::MapTriple;
use crate::grid::{Cell, CellState, GridSpec, Raster, SemanticGrid};
use crate::ingest::{CalibrationSet, LabeledCloud, LabeledPoint};
use crate::inpaint::{inpaint, InpainterChoice};

pub const ROAD: ClassId = 40;
pub const SIDEWALK: ClassId = 48;
pub const BUILDING: ClassId = 50;
pub const VEGETATION: ClassId = 70;
pub const CAR: ClassId = 10;
pub const MOVING_PERSON: ClassId = 254;

/// A street split by a thick building wall. The only real passage is at the
/// far right; a one-cell gap in the middle of the wall was occluded in the
/// scan, so an optimistic planner believes it can cut through there.
#[derive(Debug, Clone)]
pub struct WallGapScene {
    pub partition: ClassPartition,
    /// Fully labeled ground truth.
    pub truth: SemanticGrid,
    /// The scan view: gap cells are inpaint targets, cells outside the
    /// observed region are unobserved.
    pub observed: SemanticGrid,
    pub gap: Vec<Cell>,
    /// Cell the sensor sat at when the scan was taken.
    pub sensor_cell: Cell,
}

pub const WALL_GAP_ROWS: usize = 48;
pub const WALL_GAP_COLS: usize = 64;
const WALL_ROWS: std::ops::RangeInclusive<usize> = 22..=24;
const WALL_END_COL: usize = 53;
const GAP_COL: usize = 16;

pub fn wall_gap_scene() -> WallGapScene {
    let spec = GridSpec::pixels(WALL_GAP_COLS, WALL_GAP_ROWS);
    let truth = Raster::from_fn(spec, |cell| {
        let class = if WALL_ROWS.contains(&cell.row) && cell.col <= WALL_END_COL {
            BUILDING
        } else if cell.col < 2 || cell.col >= WALL_GAP_COLS - 2 {
            SIDEWALK
        } else if cell.row < 3 && cell.col < 10 {
            VEGETATION
        } else {
            ROAD
        };
        CellState::Class(class)
    });
    let gap: Vec<Cell> = WALL_ROWS.map(|r| Cell::new(r, GAP_COL)).collect();
    let mut scan = truth.clone();
    for &cell in &gap {
        scan[cell] = CellState::Unobserved;
    }
    let mask = hull_mask(&scan);
    let observed = apply_mask(&scan, &mask).expect("same shape");
    WallGapScene {
        partition: ClassPartition::semantic_kitti(),
        truth,
        observed,
        gap,
        sensor_cell: Cell::new(40, 8),
    }
}

impl WallGapScene {
    /// Input, inpainted, and ground-truth obstacle maps; the inpainted map
    /// comes from running `inpainter` on the scan.
    pub fn maps(&self, inpainter: &InpainterChoice) -> Result<MapTriple> {
        let filled = inpaint(&self.observed, inpainter, &self.partition)?;
        Ok(MapTriple {
            input: to_obstacle_map(&self.observed, &self.partition)?,
            inpainted: to_obstacle_map(&filled, &self.partition)?,
            gt: to_obstacle_map(&self.truth, &self.partition)?,
        })
    }
}

/// Camera calibration with the geometry of the KITTI odometry rig
/// (left color camera, 1241x376 image).
pub fn kitti_like_calibration() -> CalibrationSet {
    #[rustfmt::skip]
    let tr = Matrix4::new(
        0.0, -1.0,  0.0,  0.0,
        0.0,  0.0, -1.0, -0.08,
        1.0,  0.0,  0.0, -0.27,
        0.0,  0.0,  0.0,  1.0,
    );
    #[rustfmt::skip]
    let p = Matrix3x4::new(
        718.856, 0.0, 607.1928, 45.38225,
        0.0, 718.856, 185.2157, -0.1130887,
        0.0, 0.0, 1.0, 0.003779761,
    );
    CalibrationSet::new(tr, p, 1241, 376).expect("valid calibration")
}

/// A straight street seen from a car-mounted lidar: road, sidewalks, building
/// fronts, a parked car that casts a shadow, and a walking pedestrian.
#[derive(Debug, Clone)]
pub struct StreetScene {
    /// Single sparse sweep with the occlusion shadow behind the parked car.
    pub scan: LabeledCloud,
    /// Dense aggregated map of the static scene.
    pub map: LabeledCloud,
    pub calib: CalibrationSet,
}

const GROUND_Z: f32 = -1.73;
const CAR_X: (f32, f32) = (12.0, 16.0);
const CAR_Y: (f32, f32) = (2.0, 4.0);

fn street_class(x: f32, y: f32) -> (ClassId, f32) {
    let ay = y.abs();
    if (CAR_X.0..CAR_X.1).contains(&x) && (CAR_Y.0..CAR_Y.1).contains(&y) {
        (CAR, -0.3)
    } else if ay < 6.0 {
        (ROAD, GROUND_Z)
    } else if ay < 9.0 {
        (SIDEWALK, GROUND_Z + 0.15)
    } else if x > 30.0 && y > 0.0 {
        (VEGETATION, 0.5)
    } else {
        (BUILDING, 2.0)
    }
}

/// True when the parked car blocks the ray from the sensor to (x, y).
fn behind_car(x: f32, y: f32) -> bool {
    if x <= CAR_X.0 || (CAR_X.0..CAR_X.1).contains(&x) && (CAR_Y.0..CAR_Y.1).contains(&y) {
        return false;
    }
    let bearing = y.atan2(x);
    let lo = CAR_Y.0.atan2(CAR_X.1);
    let hi = CAR_Y.1.atan2(CAR_X.0);
    (lo..=hi).contains(&bearing)
}

pub fn street_scene(seed: u64) -> StreetScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 0.15_f32;
    let mut map = Vec::new();
    let mut scan = Vec::new();
    let nx = (45.0 / step) as usize;
    let ny = (22.0 / step) as usize;
    for i in 0..nx {
        for j in 0..ny {
            let x = 2.0 + i as f32 * step + rng.random_range(0.0..step);
            let y = -11.0 + j as f32 * step + rng.random_range(0.0..step);
            let (class, z) = street_class(x, y);
            let point = LabeledPoint::new(x, y, z, class);
            map.push(point);
            let range = x.hypot(y);
            let keep = rng.random_bool((6.0 / range).min(1.0) as f64);
            if keep && !behind_car(x, y) {
                scan.push(point);
            }
        }
    }
    for k in 0..40 {
        let a = k as f32 * 0.16;
        scan.push(LabeledPoint::new(
            8.0 + 0.2 * a.cos(),
            -3.0 + 0.2 * a.sin(),
            0.0,
            MOVING_PERSON,
        ));
    }
    StreetScene {
        scan: LabeledCloud::new(scan),
        map: LabeledCloud::new(map),
        calib: kitti_like_calibration(),
    }
}
