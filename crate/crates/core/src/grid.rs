//! Grid geometry and the row-major raster container shared by semantic
//! grids, inpaint masks, and obstacle maps.

use serde::{Deserialize, Serialize};

use crate::classes::ClassId;
use crate::error::{Error, Result};

/// Direction in the sensor ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    PosX,
    NegX,
    PosY,
    NegY,
}

impl Axis {
    fn unit(self) -> (f64, f64) {
        match self {
            Axis::PosX => (1.0, 0.0),
            Axis::NegX => (-1.0, 0.0),
            Axis::PosY => (0.0, 1.0),
            Axis::NegY => (0.0, -1.0),
        }
    }

    fn is_x(self) -> bool {
        matches!(self, Axis::PosX | Axis::NegX)
    }
}

/// Placement of a raster on the ground plane.
///
/// `origin` is the sensor-frame `(x, y)` of the outer corner of cell
/// `(0, 0)`; rows grow along `row_axis` and columns along `col_axis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    pub origin: [f64; 2],
    pub row_axis: Axis,
    pub col_axis: Axis,
}

impl GridSpec {
    pub fn new(
        width: usize,
        height: usize,
        cell_size: f64,
        origin: [f64; 2],
        row_axis: Axis,
        col_axis: Axis,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig(
                "grid dimensions must be positive".into(),
            ));
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::InvalidConfig("cell size must be positive".into()));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("grid origin must be finite".into()));
        }
        if row_axis.is_x() == col_axis.is_x() {
            return Err(Error::InvalidConfig(
                "row and column axes must be orthogonal".into(),
            ));
        }
        Ok(GridSpec {
            width,
            height,
            cell_size,
            origin,
            row_axis,
            col_axis,
        })
    }

    /// A bare pixel grid with unit cells, used for rasters read back from images.
    pub fn pixels(width: usize, height: usize) -> Self {
        GridSpec {
            width,
            height,
            cell_size: 1.0,
            origin: [0.0, 0.0],
            row_axis: Axis::PosX,
            col_axis: Axis::PosY,
        }
    }

    /// 256x256 cells of 0.2 m in front of the sensor: x in [0, 51.2),
    /// y in [-25.6, 25.6). Forward is up (row 0 is the far edge) and the
    /// sensor's left is column 0.
    pub fn kitti_volume() -> Self {
        GridSpec {
            width: 256,
            height: 256,
            cell_size: 0.2,
            origin: [51.2, 25.6],
            row_axis: Axis::NegX,
            col_axis: Axis::NegY,
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn same_shape(&self, other: &GridSpec) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn check_shape(&self, other: &GridSpec) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::SpecMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: other.width,
                right_h: other.height,
            })
        }
    }

    /// Cell containing the ground-plane point, if inside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<Cell> {
        let (dx, dy) = (x - self.origin[0], y - self.origin[1]);
        let along = |axis: Axis| {
            let (ux, uy) = axis.unit();
            ((dx * ux + dy * uy) / self.cell_size).floor()
        };
        let (r, c) = (along(self.row_axis), along(self.col_axis));
        if r >= 0.0 && c >= 0.0 && (r as usize) < self.height && (c as usize) < self.width {
            Some(Cell::new(r as usize, c as usize))
        } else {
            None
        }
    }

    /// Ground-plane center of a cell.
    pub fn cell_center(&self, cell: Cell) -> (f64, f64) {
        let (rx, ry) = self.row_axis.unit();
        let (cx, cy) = self.col_axis.unit();
        let r = (cell.row as f64 + 0.5) * self.cell_size;
        let c = (cell.col as f64 + 0.5) * self.cell_size;
        (
            self.origin[0] + r * rx + c * cx,
            self.origin[1] + r * ry + c * cy,
        )
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.height && cell.col < self.width
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index / self.width, index % self.width)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::kitti_volume()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }

    pub fn distance(self, other: Cell) -> f64 {
        let dr = self.row as f64 - other.row as f64;
        let dc = self.col as f64 - other.col as f64;
        (dr * dr + dc * dc).sqrt()
    }

    pub fn offset(self, dr: isize, dc: isize) -> Option<Cell> {
        Some(Cell::new(
            self.row.checked_add_signed(dr)?,
            self.col.checked_add_signed(dc)?,
        ))
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.row, self.col)
    }
}

impl std::str::FromStr for Cell {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (r, c) = s
            .split_once(',')
            .ok_or_else(|| format!("expected ROW,COL, got {s:?}"))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
        Ok(Cell::new(parse(r)?, parse(c)?))
    }
}

/// Row-major raster of values over a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    spec: GridSpec,
    cells: Vec<T>,
}

impl<T: Clone> Raster<T> {
    pub fn filled(spec: GridSpec, value: T) -> Self {
        Raster {
            cells: vec![value; spec.len()],
            spec,
        }
    }
}

impl<T> Raster<T> {
    pub fn from_vec(spec: GridSpec, cells: Vec<T>) -> Result<Self> {
        if cells.len() != spec.len() {
            return Err(Error::InvalidConfig(format!(
                "raster needs {} cells, got {}",
                spec.len(),
                cells.len()
            )));
        }
        Ok(Raster { spec, cells })
    }

    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(Cell) -> T) -> Self {
        let cells = (0..spec.len()).map(|i| f(spec.cell_at(i))).collect();
        Raster { spec, cells }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn height(&self) -> usize {
        self.spec.height
    }

    pub fn get(&self, cell: Cell) -> Option<&T> {
        self.spec
            .contains(cell)
            .then(|| &self.cells[self.spec.index(cell)])
    }

    pub fn set(&mut self, cell: Cell, value: T) {
        let i = self.spec.index(cell);
        self.cells[i] = value;
    }

    pub fn cells(&self) -> &[T] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [T] {
        &mut self.cells
    }

    pub fn iter(&self) -> impl Iterator<Item = (Cell, &T)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .map(|(i, v)| (self.spec.cell_at(i), v))
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Raster<U> {
        Raster {
            spec: self.spec,
            cells: self.cells.iter().map(f).collect(),
        }
    }

    pub fn into_cells(self) -> Vec<T> {
        self.cells
    }
}

impl<T> std::ops::Index<Cell> for Raster<T> {
    type Output = T;

    fn index(&self, cell: Cell) -> &T {
        assert!(self.spec.contains(cell), "cell {cell} out of bounds");
        &self.cells[self.spec.index(cell)]
    }
}

impl<T> std::ops::IndexMut<Cell> for Raster<T> {
    fn index_mut(&mut self, cell: Cell) -> &mut T {
        assert!(self.spec.contains(cell), "cell {cell} out of bounds");
        let i = self.spec.index(cell);
        &mut self.cells[i]
    }
}

/// State of one semantic grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellState {
    Class(ClassId),
    Unobserved,
    ToInpaint,
}

impl CellState {
    pub fn class(self) -> Option<ClassId> {
        match self {
            CellState::Class(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Occupancy {
    Free,
    Obstacle,
}

pub type SemanticGrid = Raster<CellState>;
/// `true` marks a cell to be filled.
pub type InpaintMask = Raster<bool>;
pub type ObstacleMap = Raster<Occupancy>;

impl Raster<Occupancy> {
    pub fn is_free(&self, cell: Cell) -> bool {
        self.get(cell) == Some(&Occupancy::Free)
    }

    pub fn is_obstacle(&self, cell: Cell) -> bool {
        self.get(cell) == Some(&Occupancy::Obstacle)
    }

    /// Parses a map from rows of `.` (free) and `#` (obstacle).
    pub fn from_ascii(rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut cells = Vec::with_capacity(width * height);
        for row in rows {
            if row.chars().count() != width {
                return Err(Error::InvalidConfig("ragged ascii map".into()));
            }
            for ch in row.chars() {
                cells.push(match ch {
                    '.' => Occupancy::Free,
                    '#' => Occupancy::Obstacle,
                    other => {
                        return Err(Error::InvalidConfig(format!(
                            "unexpected map glyph {other:?}"
                        )))
                    }
                });
            }
        }
        Raster::from_vec(GridSpec::pixels(width.max(1), height.max(1)), cells)
    }

    pub fn to_ascii(&self) -> Vec<String> {
        self.cells
            .chunks(self.spec.width)
            .map(|row| {
                row.iter()
                    .map(|c| match c {
                        Occupancy::Free => '.',
                        Occupancy::Obstacle => '#',
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct ObstacleMapRecord {
    spec: GridSpec,
    rows: Vec<String>,
}

impl Serialize for Raster<Occupancy> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ObstacleMapRecord {
            spec: self.spec,
            rows: self.to_ascii(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Raster<Occupancy> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rec = ObstacleMapRecord::deserialize(d)?;
        let rows: Vec<&str> = rec.rows.iter().map(String::as_str).collect();
        let map = Raster::from_ascii(&rows).map_err(D::Error::custom)?;
        if !map.spec.same_shape(&rec.spec) {
            return Err(D::Error::custom("rows do not match spec dimensions"));
        }
        Ok(Raster {
            spec: rec.spec,
            cells: map.cells,
        })
    }
}
