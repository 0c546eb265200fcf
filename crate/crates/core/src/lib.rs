//! Occlusion-aware grid navigation from semantic point clouds.
//!
//! The pipeline turns a semantically labeled point cloud into a
//! bird's-eye-view semantic grid ([`bev`]), marks the occluded cells inside
//! the observed region for inpainting, fills them ([`inpaint`]), derives
//! obstacle maps, and measures how those maps change A* replanning behavior
//! under a limited-range sensor ([`planner`], [`eval`]).
//!
//! Runnable walkthroughs of each stage live in `examples/`.

pub mod bev;
pub mod classes;
pub mod cli;
pub mod error;
pub mod eval;
pub mod grid;
pub mod imageio;
pub mod ingest;
pub mod inpaint;
pub mod planner;
pub mod scenes;

pub use classes::{ClassId, ClassPartition, ClassRole};
pub use error::{Error, Result};
pub use grid::{
    Cell, CellState, GridSpec, InpaintMask, ObstacleMap, Occupancy, Raster, SemanticGrid,
};
