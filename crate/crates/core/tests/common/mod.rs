#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use bevnav::ingest::CalibrationSet;
use bevnav::{Cell, CellState, ClassId, GridSpec, ObstacleMap, Occupancy, Raster, SemanticGrid};
use nalgebra::{Matrix3, Matrix3x4, Matrix4, Rotation3, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_map(rng: &mut impl Rng, w: usize, h: usize, density: f64) -> ObstacleMap {
    Raster::from_fn(GridSpec::pixels(w, h), |_| {
        if rng.random_bool(density) {
            Occupancy::Obstacle
        } else {
            Occupancy::Free
        }
    })
}

pub fn free_cells(map: &ObstacleMap) -> Vec<Cell> {
    map.iter()
        .filter(|(_, o)| **o == Occupancy::Free)
        .map(|(c, _)| c)
        .collect()
}

/// Legal 8-connected moves written out from the movement rules, independent
/// of the planner's successor function.
pub fn legal_moves(map: &ObstacleMap, c: Cell) -> Vec<(Cell, f64)> {
    let mut out = Vec::new();
    for dr in -1isize..=1 {
        for dc in -1isize..=1 {
            if dr == 0 && dc == 0 {
                continue;
            }
            let (r, col) = (c.row as isize + dr, c.col as isize + dc);
            if r < 0 || col < 0 || r as usize >= map.height() || col as usize >= map.width() {
                continue;
            }
            let n = Cell::new(r as usize, col as usize);
            if map[n] == Occupancy::Obstacle {
                continue;
            }
            if dr != 0 && dc != 0 {
                let side_a = Cell::new(c.row, col as usize);
                let side_b = Cell::new(r as usize, c.col);
                if map[side_a] == Occupancy::Obstacle || map[side_b] == Occupancy::Obstacle {
                    continue;
                }
                out.push((n, std::f64::consts::SQRT_2));
            } else {
                out.push((n, 1.0));
            }
        }
    }
    out
}

/// Uniform-cost search; returns the optimal cost to `goal`, if reachable.
pub fn ucs_cost(map: &ObstacleMap, start: Cell, goal: Cell) -> Option<f64> {
    if map[goal] == Occupancy::Obstacle {
        return None;
    }
    let w = map.width();
    let idx = |c: Cell| c.row * w + c.col;
    let mut dist = vec![f64::INFINITY; map.cells().len()];
    dist[idx(start)] = 0.0;
    // Costs are a + b*sqrt2 with small integers; order by the f64 bits of a
    // non-negative float, which preserves numeric order.
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((0.0f64.to_bits(), idx(start))));
    while let Some(Reverse((bits, i))) = heap.pop() {
        let d = f64::from_bits(bits);
        if d > dist[i] {
            continue;
        }
        let c = Cell::new(i / w, i % w);
        if c == goal {
            return Some(d);
        }
        for (n, step) in legal_moves(map, c) {
            let nd = d + step;
            if nd < dist[idx(n)] {
                dist[idx(n)] = nd;
                heap.push(Reverse((nd.to_bits(), idx(n))));
            }
        }
    }
    None
}

/// Fewest-moves distance (every move counts 1), used for step lower bounds.
pub fn bfs_steps(map: &ObstacleMap, start: Cell, goal: Cell) -> Option<usize> {
    let w = map.width();
    let mut seen = vec![usize::MAX; map.cells().len()];
    seen[start.row * w + start.col] = 0;
    let mut q = VecDeque::from([start]);
    while let Some(c) = q.pop_front() {
        let d = seen[c.row * w + c.col];
        if c == goal {
            return Some(d);
        }
        for (n, _) in legal_moves(map, c) {
            if seen[n.row * w + n.col] == usize::MAX {
                seen[n.row * w + n.col] = d + 1;
                q.push_back(n);
            }
        }
    }
    None
}

/// Checks that `cells` is a connected chain of legal moves on `map` and
/// returns its cost.
pub fn walk_cost(map: &ObstacleMap, cells: &[Cell]) -> Result<f64, String> {
    let mut cost = 0.0;
    for pair in cells.windows(2) {
        let step = legal_moves(map, pair[0])
            .into_iter()
            .find(|(n, _)| *n == pair[1])
            .ok_or_else(|| format!("illegal move {} -> {}", pair[0], pair[1]))?;
        cost += step.1;
    }
    Ok(cost)
}

pub const PALETTE: [ClassId; 6] = [10, 40, 48, 50, 70, 72];

/// Random semantic grid: labeled cells from a small class set, some
/// unobserved cells, and some inpaint targets.
pub fn random_semantic(
    rng: &mut impl Rng,
    w: usize,
    h: usize,
    p_target: f64,
    p_unobserved: f64,
) -> SemanticGrid {
    Raster::from_fn(GridSpec::pixels(w, h), |_| {
        let x: f64 = rng.random();
        if x < p_target {
            CellState::ToInpaint
        } else if x < p_target + p_unobserved {
            CellState::Unobserved
        } else {
            CellState::Class(PALETTE[rng.random_range(0..PALETTE.len())])
        }
    })
}

pub fn count_state(grid: &SemanticGrid, s: CellState) -> usize {
    grid.cells().iter().filter(|&&c| c == s).count()
}

// ---------------------------------------------------------------------------
// Projection

/// Random lidar-to-camera rig: near-KITTI axes with a small random rotation.
pub fn random_calibration(rng: &mut impl Rng) -> CalibrationSet {
    let rot = Rotation3::from_euler_angles(
        rng.random_range(-0.2..0.2),
        rng.random_range(-0.2..0.2),
        rng.random_range(-0.2..0.2),
    );
    // Lidar axes (x forward, y left, z up) to camera axes (z forward).
    let axes = Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0);
    let r = rot.matrix() * axes;
    let t = Vector3::new(
        rng.random_range(-0.5..0.5),
        rng.random_range(-0.5..0.5),
        rng.random_range(-0.5..0.5),
    );
    let mut tr = Matrix4::identity();
    tr.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    tr.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
    let f = rng.random_range(300.0..900.0);
    let (w, h) = (
        rng.random_range(200..1400u32),
        rng.random_range(100..500u32),
    );
    let p = Matrix3x4::new(
        f,
        0.0,
        w as f64 / 2.0 + rng.random_range(-20.0..20.0),
        rng.random_range(-50.0..50.0),
        0.0,
        f,
        h as f64 / 2.0 + rng.random_range(-20.0..20.0),
        rng.random_range(-1.0..1.0),
        0.0,
        0.0,
        1.0,
        rng.random_range(-0.01..0.01),
    );
    CalibrationSet::new(tr, p, w, h).unwrap()
}

/// Inverts a projection analytically: camera point from (u, v, depth), then
/// back through the rigid transform.
pub fn unproject(u: f64, v: f64, depth: f64, calib: &CalibrationSet) -> Vector3<f64> {
    let p = calib.p();
    let m = p.fixed_view::<3, 3>(0, 0).into_owned();
    let p4 = p.column(3).into_owned();
    let xc = m.try_inverse().unwrap() * (Vector3::new(u * depth, v * depth, depth) - p4);
    let x = calib.tr().try_inverse().unwrap() * Vector4::new(xc.x, xc.y, xc.z, 1.0);
    Vector3::new(x.x, x.y, x.z)
}

/// Per-point visibility computed from the raw matrices.
pub fn visible_oracle(x: &Vector3<f64>, calib: &CalibrationSet) -> bool {
    let cam = calib.tr() * Vector4::new(x.x, x.y, x.z, 1.0);
    let img = calib.p() * cam;
    let d = img.z;
    if d <= 0.0 {
        return false;
    }
    let (u, v) = (img.x / d, img.y / d);
    u >= 0.0 && u < calib.image_width() as f64 && v >= 0.0 && v < calib.image_height() as f64
}

// ---------------------------------------------------------------------------
// Inpainting

/// Brute force: for every target, scan all labeled cells.
pub fn nearest_oracle(grid: &SemanticGrid) -> SemanticGrid {
    let known: Vec<_> = grid
        .iter()
        .filter_map(|(c, s)| s.class().map(|k| (c, k)))
        .collect();
    let mut out = grid.clone();
    for (cell, state) in grid.iter() {
        if *state != CellState::ToInpaint {
            continue;
        }
        let mut best: Option<(usize, u16)> = None;
        for &(c, k) in &known {
            let dr = c.row.abs_diff(cell.row);
            let dc = c.col.abs_diff(cell.col);
            let d = dr * dr + dc * dc;
            if best.is_none_or(|(bd, bk)| d < bd || d == bd && k < bk) {
                best = Some((d, k));
            }
        }
        out[cell] = CellState::Class(best.unwrap().1);
    }
    out
}
