//! Grid A* and the online replanning simulator.
//!
//! Moves are 8-connected with cost 1 (axial) or √2 (diagonal). A diagonal
//! move is only allowed when both axial cells it sweeps past are free, so
//! paths never cut obstacle corners.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, GridSpec, ObstacleMap, Occupancy};

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Sensor range in cells at full image resolution.
pub const FULL_RES_SENSOR_RADIUS: f64 = 30.0;

const MOVES: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub cells: Vec<Cell>,
    pub cost: f64,
}

impl Path {
    /// Number of moves.
    pub fn steps(&self) -> usize {
        self.cells.len().saturating_sub(1)
    }

    pub fn goal(&self) -> Option<Cell> {
        self.cells.last().copied()
    }
}

fn move_cost(a: Cell, b: Cell) -> f64 {
    if a.row != b.row && a.col != b.col {
        SQRT_2
    } else {
        1.0
    }
}

fn check_bounds(spec: &GridSpec, cell: Cell) -> Result<()> {
    if spec.contains(cell) {
        Ok(())
    } else {
        Err(Error::OutOfBounds {
            row: cell.row,
            col: cell.col,
            width: spec.width,
            height: spec.height,
        })
    }
}

/// Whether the single move `from -> to` is legal on `map`: `to` is a free
/// neighbor and a diagonal move has both side cells free.
pub fn move_allowed(map: &ObstacleMap, from: Cell, to: Cell) -> bool {
    let (dr, dc) = (to.row.abs_diff(from.row), to.col.abs_diff(from.col));
    if dr > 1 || dc > 1 || dr + dc == 0 || !map.is_free(to) {
        return false;
    }
    dr == 0
        || dc == 0
        || map.is_free(Cell::new(from.row, to.col)) && map.is_free(Cell::new(to.row, from.col))
}

/// Free cells reachable in one move from `cell`.
pub fn successors(map: &ObstacleMap, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
    MOVES.iter().filter_map(move |&(dr, dc)| {
        let next = cell.offset(dr, dc)?;
        move_allowed(map, cell, next).then_some(next)
    })
}

#[derive(Debug, Clone, Copy)]
struct Frontier {
    f: f64,
    g: f64,
    index: usize,
}

// Max-heap order: smallest f, then largest g, then smallest row-major index.
impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

/// Minimum-cost path with a euclidean heuristic, or `Ok(None)` when the goal
/// is unreachable.
pub fn astar(map: &ObstacleMap, start: Cell, goal: Cell) -> Result<Option<Path>> {
    let spec = map.spec();
    check_bounds(spec, start)?;
    check_bounds(spec, goal)?;
    if !map.is_free(start) {
        return Err(Error::StartBlocked {
            row: start.row,
            col: start.col,
        });
    }
    if !map.is_free(goal) {
        return Ok(None);
    }
    let n = spec.len();
    let mut g_score = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let start_i = spec.index(start);
    let goal_i = spec.index(goal);
    g_score[start_i] = 0.0;
    open.push(Frontier {
        f: start.distance(goal),
        g: 0.0,
        index: start_i,
    });
    while let Some(Frontier { g, index, .. }) = open.pop() {
        if closed[index] || g > g_score[index] {
            continue;
        }
        closed[index] = true;
        if index == goal_i {
            let mut cells = vec![goal];
            let mut i = goal_i;
            while i != start_i {
                i = parent[i];
                cells.push(spec.cell_at(i));
            }
            cells.reverse();
            return Ok(Some(Path { cells, cost: g }));
        }
        let cell = spec.cell_at(index);
        for next in successors(map, cell) {
            let j = spec.index(next);
            if closed[j] {
                continue;
            }
            let tentative = g + move_cost(cell, next);
            if tentative < g_score[j] {
                g_score[j] = tentative;
                parent[j] = index;
                open.push(Frontier {
                    f: tentative + next.distance(goal),
                    g: tentative,
                    index: j,
                });
            }
        }
    }
    Ok(None)
}

/// Omnidirectional range sensor; `radius` is in cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub radius: f64,
}

impl SensorModel {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "sensor radius {radius} must be at least 1"
            )));
        }
        Ok(SensorModel { radius })
    }

    /// The full-resolution 30-cell range scaled to a downsampled map and rounded.
    pub fn for_downsample(factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::BadFactor);
        }
        Self::new((FULL_RES_SENSOR_RADIUS / factor as f64).round().max(1.0))
    }
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel {
            radius: FULL_RES_SENSOR_RADIUS,
        }
    }
}

fn for_each_in_disk(spec: &GridSpec, pos: Cell, radius: f64, mut f: impl FnMut(Cell)) {
    let reach = radius.floor() as usize;
    let r2 = radius * radius;
    for r in pos.row.saturating_sub(reach)..=(pos.row + reach).min(spec.height - 1) {
        for c in pos.col.saturating_sub(reach)..=(pos.col + reach).min(spec.width - 1) {
            let dr = r as f64 - pos.row as f64;
            let dc = c as f64 - pos.col as f64;
            if dr * dr + dc * dc <= r2 {
                f(Cell::new(r, c));
            }
        }
    }
}

/// Copies the ground truth into the belief for every cell whose center is
/// within the sensor radius of `pos`. There is no line-of-sight test.
pub fn reveal(
    belief: &ObstacleMap,
    gt: &ObstacleMap,
    pos: Cell,
    sensor: &SensorModel,
) -> Result<ObstacleMap> {
    belief.spec().check_shape(gt.spec())?;
    check_bounds(belief.spec(), pos)?;
    let mut out = belief.clone();
    for_each_in_disk(belief.spec(), pos, sensor.radius, |cell| {
        out[cell] = gt[cell]
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Reached,
    NoPathFound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub outcome: Outcome,
    pub path_steps: usize,
    pub replans: usize,
    pub executed: Path,
    pub belief_map_final: ObstacleMap,
    /// Cells first believed free and then sensed as obstacles, in discovery order.
    pub discovered_obstacles: Vec<Cell>,
}

struct Belief<'a> {
    map: ObstacleMap,
    gt: &'a ObstacleMap,
    discovered: Vec<Cell>,
}

impl Belief<'_> {
    fn sense(&mut self, cell: Cell) {
        let truth = self.gt[cell];
        let slot = &mut self.map[cell];
        if *slot != truth {
            if truth == Occupancy::Obstacle {
                self.discovered.push(cell);
            }
            *slot = truth;
        }
    }

    fn observe(&mut self, pos: Cell, sensor: &SensorModel) {
        let spec = *self.map.spec();
        for_each_in_disk(&spec, pos, sensor.radius, |cell| self.sense(cell));
        // Contact sensing of the eight neighbors keeps every next move
        // truth-checked even when the radius does not reach the diagonals.
        for (dr, dc) in MOVES {
            if let Some(cell) = pos.offset(dr, dc).filter(|c| spec.contains(*c)) {
                self.sense(cell);
            }
        }
    }
}

/// Drives a robot from `start` to `goal`, planning on its belief map and
/// replanning whenever sensing makes a move of the remaining plan illegal
/// (an obstacle on the plan, or beside one of its diagonal moves). The
/// first plan does not count as a replan.
pub fn simulate(
    initial_belief: &ObstacleMap,
    gt: &ObstacleMap,
    start: Cell,
    goal: Cell,
    sensor: &SensorModel,
) -> Result<TrialResult> {
    initial_belief.spec().check_shape(gt.spec())?;
    check_bounds(gt.spec(), start)?;
    check_bounds(gt.spec(), goal)?;
    if !gt.is_free(start) {
        return Err(Error::StartBlocked {
            row: start.row,
            col: start.col,
        });
    }
    let mut belief = Belief {
        map: initial_belief.clone(),
        gt,
        discovered: Vec::new(),
    };
    let mut pos = start;
    let mut executed = Path {
        cells: vec![start],
        cost: 0.0,
    };
    let mut plan: Option<Vec<Cell>> = None;
    let mut cursor = 0;
    let mut replans = 0;

    let finish = |outcome, executed: Path, replans, belief: Belief| TrialResult {
        outcome,
        path_steps: executed.steps(),
        replans,
        executed,
        belief_map_final: belief.map,
        discovered_obstacles: belief.discovered,
    };

    loop {
        belief.observe(pos, sensor);
        if pos == goal {
            return Ok(finish(Outcome::Reached, executed, replans, belief));
        }
        let blocked = match &plan {
            None => true,
            Some(cells) => cells[cursor..]
                .windows(2)
                .any(|m| !move_allowed(&belief.map, m[0], m[1])),
        };
        if blocked {
            if plan.is_some() {
                replans += 1;
            }
            match astar(&belief.map, pos, goal)? {
                Some(p) => {
                    plan = Some(p.cells);
                    cursor = 0;
                }
                None => return Ok(finish(Outcome::NoPathFound, executed, replans, belief)),
            }
        }
        let cells = plan.as_ref().expect("plan exists");
        let next = cells[cursor + 1];
        debug_assert!(gt.is_free(next), "stepping into a ground-truth obstacle");
        executed.cost += move_cost(pos, next);
        executed.cells.push(next);
        cursor += 1;
        pos = next;
    }
}
