//! PNG encoding of grids.
//!
//! Semantic grids use the partition palette, with pure white for cells to
//! inpaint and a fixed grey for unobserved cells. Masks are white where a
//! cell must be filled and black elsewhere. Obstacle maps are black for
//! obstacles and white for free space.

use std::path::Path;

use image::{GrayImage, Luma, Rgb, RgbImage};

use crate::classes::{ClassPartition, Rgb as Color, TO_INPAINT_RGB, UNOBSERVED_RGB};
use crate::error::{Error, Result};
use crate::grid::{CellState, GridSpec, InpaintMask, ObstacleMap, Occupancy, Raster, SemanticGrid};

fn save(img: &impl SaveAs, path: &Path) -> Result<()> {
    img.save_png(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

trait SaveAs {
    fn save_png(&self, path: &Path) -> image::ImageResult<()>;
}

impl SaveAs for RgbImage {
    fn save_png(&self, path: &Path) -> image::ImageResult<()> {
        self.save_with_format(path, image::ImageFormat::Png)
    }
}

impl SaveAs for GrayImage {
    fn save_png(&self, path: &Path) -> image::ImageResult<()> {
        self.save_with_format(path, image::ImageFormat::Png)
    }
}

fn open_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(img.to_rgb8())
}

fn cell_color(state: CellState, partition: &ClassPartition) -> Result<Color> {
    match state {
        CellState::Class(c) => partition.color(c).ok_or(Error::UnknownClass(c)),
        CellState::Unobserved => Ok(UNOBSERVED_RGB),
        CellState::ToInpaint => Ok(TO_INPAINT_RGB),
    }
}

pub fn grid_to_image(grid: &SemanticGrid, partition: &ClassPartition) -> Result<RgbImage> {
    let mut img = RgbImage::new(grid.width() as u32, grid.height() as u32);
    for (cell, state) in grid.iter() {
        img.put_pixel(
            cell.col as u32,
            cell.row as u32,
            Rgb(cell_color(*state, partition)?),
        );
    }
    Ok(img)
}

pub fn render_png(
    grid: &SemanticGrid,
    partition: &ClassPartition,
    path: impl AsRef<Path>,
) -> Result<()> {
    save(&grid_to_image(grid, partition)?, path.as_ref())
}

fn exact_state(rgb: Color, partition: &ClassPartition) -> Option<CellState> {
    match rgb {
        TO_INPAINT_RGB => Some(CellState::ToInpaint),
        UNOBSERVED_RGB => Some(CellState::Unobserved),
        _ => partition.class_by_color(rgb).map(CellState::Class),
    }
}

pub fn image_to_grid(img: &RgbImage, partition: &ClassPartition) -> Result<SemanticGrid> {
    let spec = GridSpec::pixels(img.width() as usize, img.height() as usize);
    let cells = img
        .enumerate_pixels()
        .map(|(x, y, px)| {
            exact_state(px.0, partition).ok_or(Error::UnknownColor {
                row: y as usize,
                col: x as usize,
                rgb: px.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Raster::from_vec(spec, cells)
}

/// Loads a grid rendered by [`render_png`]; any off-palette pixel is an error.
/// The returned grid has a unit pixel spec.
pub fn load_png(path: impl AsRef<Path>, partition: &ClassPartition) -> Result<SemanticGrid> {
    image_to_grid(&open_rgb(path.as_ref())?, partition)
}

fn dist2(a: Color, b: Color) -> u32 {
    a.iter()
        .zip(b)
        .map(|(&x, y)| (x as i32 - y as i32).pow(2) as u32)
        .sum()
}

/// Like [`image_to_grid`] but snaps every off-palette pixel to the nearest
/// palette entry (white and grey included) in RGB distance. Returns the
/// number of snapped pixels.
pub fn image_to_grid_quantized(
    img: &RgbImage,
    partition: &ClassPartition,
) -> Result<(SemanticGrid, usize)> {
    let mut palette: Vec<(Color, CellState)> = vec![
        (TO_INPAINT_RGB, CellState::ToInpaint),
        (UNOBSERVED_RGB, CellState::Unobserved),
    ];
    palette.extend(partition.classes().map(|c| {
        (
            partition.color(c).expect("class in C has a color"),
            CellState::Class(c),
        )
    }));
    let mut snapped = 0;
    let spec = GridSpec::pixels(img.width() as usize, img.height() as usize);
    let cells = img
        .pixels()
        .map(|px| {
            exact_state(px.0, partition).unwrap_or_else(|| {
                snapped += 1;
                palette
                    .iter()
                    .min_by_key(|(rgb, _)| dist2(*rgb, px.0))
                    .map(|(_, s)| *s)
                    .expect("palette is never empty")
            })
        })
        .collect();
    Ok((Raster::from_vec(spec, cells)?, snapped))
}

pub fn mask_to_image(mask: &InpaintMask) -> GrayImage {
    GrayImage::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        Luma([if mask.cells()[y as usize * mask.width() + x as usize] {
            255
        } else {
            0
        }])
    })
}

pub fn render_mask_png(mask: &InpaintMask, path: impl AsRef<Path>) -> Result<()> {
    save(&mask_to_image(mask), path.as_ref())
}

/// Loads a mask; pixels brighter than mid-grey are fill targets.
pub fn load_mask_png(path: impl AsRef<Path>) -> Result<InpaintMask> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .to_luma8();
    let spec = GridSpec::pixels(img.width() as usize, img.height() as usize);
    Raster::from_vec(spec, img.pixels().map(|p| p.0[0] >= 128).collect())
}

pub fn obstacle_map_to_image(map: &ObstacleMap) -> GrayImage {
    GrayImage::from_fn(map.width() as u32, map.height() as u32, |x, y| {
        Luma([match map.cells()[y as usize * map.width() + x as usize] {
            Occupancy::Free => 255,
            Occupancy::Obstacle => 0,
        }])
    })
}

pub fn render_obstacle_png(map: &ObstacleMap, path: impl AsRef<Path>) -> Result<()> {
    save(&obstacle_map_to_image(map), path.as_ref())
}

/// Loads an obstacle map; dark pixels (below mid-grey) are obstacles.
pub fn load_obstacle_png(path: impl AsRef<Path>) -> Result<ObstacleMap> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .to_luma8();
    let spec = GridSpec::pixels(img.width() as usize, img.height() as usize);
    Raster::from_vec(
        spec,
        img.pixels()
            .map(|p| {
                if p.0[0] < 128 {
                    Occupancy::Obstacle
                } else {
                    Occupancy::Free
                }
            })
            .collect(),
    )
}

/// Writes an RGB image (for example a trial plot) as PNG.
pub fn save_rgb_png(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    save(img, path.as_ref())
}
