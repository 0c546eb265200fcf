//! Labeled point clouds, camera calibration, and camera-frustum filtering.
//!
//! Point files are packed little-endian `f32` quadruples `(x, y, z,
//! intensity)`; label files are packed little-endian `u32` records whose low
//! 16 bits hold the semantic class (the upper half is an instance id and is
//! discarded).

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3x4, Matrix4, Vector3, Vector4};

use crate::classes::{ClassId, ClassPartition};
use crate::error::{Error, Result};

const POINT_RECORD: usize = 16;
const LABEL_RECORD: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub class: ClassId,
}

impl LabeledPoint {
    pub fn new(x: f32, y: f32, z: f32, class: ClassId) -> Self {
        LabeledPoint { x, y, z, class }
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x as f64, self.y as f64, self.z as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledCloud {
    pub points: Vec<LabeledPoint>,
}

impl LabeledCloud {
    pub fn new(points: Vec<LabeledPoint>) -> Self {
        LabeledCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks that every coordinate is finite and every label is known to
    /// the partition (either in `C` or in its ignore list).
    pub fn validate(&self, partition: &ClassPartition) -> Result<()> {
        for p in &self.points {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "non-finite point ({}, {}, {})",
                    p.x, p.y, p.z
                )));
            }
            if partition.role(p.class).is_none() {
                return Err(Error::UnknownClass(p.class));
            }
        }
        Ok(())
    }
}

impl FromIterator<LabeledPoint> for LabeledCloud {
    fn from_iter<I: IntoIterator<Item = LabeledPoint>>(iter: I) -> Self {
        LabeledCloud::new(iter.into_iter().collect())
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn check_multiple(path: &Path, len: usize, record: usize) -> Result<usize> {
    if !len.is_multiple_of(record) {
        return Err(Error::MalformedFile {
            path: path.to_path_buf(),
            reason: format!("{len} bytes is not a multiple of the {record}-byte record size"),
        });
    }
    Ok(len / record)
}

/// Parses packed point records, discarding intensity.
pub fn parse_points(path: &Path, bytes: &[u8]) -> Result<Vec<[f32; 3]>> {
    check_multiple(path, bytes.len(), POINT_RECORD)?;
    Ok(bytes
        .chunks_exact(POINT_RECORD)
        .map(|rec| {
            let f = |i: usize| f32::from_le_bytes(rec[i * 4..i * 4 + 4].try_into().unwrap());
            [f(0), f(1), f(2)]
        })
        .collect())
}

pub fn parse_labels(path: &Path, bytes: &[u8]) -> Result<Vec<ClassId>> {
    check_multiple(path, bytes.len(), LABEL_RECORD)?;
    Ok(bytes
        .chunks_exact(LABEL_RECORD)
        .map(|rec| (u32::from_le_bytes(rec.try_into().unwrap()) & 0xffff) as ClassId)
        .collect())
}

pub fn load_cloud(
    points_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<LabeledCloud> {
    let (points_path, labels_path) = (points_path.as_ref(), labels_path.as_ref());
    let xyz = parse_points(points_path, &read_file(points_path)?)?;
    let labels = parse_labels(labels_path, &read_file(labels_path)?)?;
    if xyz.len() != labels.len() {
        return Err(Error::MismatchedCounts {
            points: xyz.len(),
            labels: labels.len(),
        });
    }
    Ok(xyz
        .into_iter()
        .zip(labels)
        .map(|([x, y, z], class)| LabeledPoint::new(x, y, z, class))
        .collect())
}

/// Writes a cloud in the same layout [`load_cloud`] reads, with zero intensity.
pub fn write_cloud(
    cloud: &LabeledCloud,
    points_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    let (points_path, labels_path) = (points_path.as_ref(), labels_path.as_ref());
    let mut pts = Vec::with_capacity(cloud.len() * POINT_RECORD);
    let mut lbl = Vec::with_capacity(cloud.len() * LABEL_RECORD);
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, 0.0] {
            pts.extend_from_slice(&v.to_le_bytes());
        }
        lbl.extend_from_slice(&(p.class as u32).to_le_bytes());
    }
    fs::write(points_path, pts).map_err(|e| Error::io(points_path, e))?;
    fs::write(labels_path, lbl).map_err(|e| Error::io(labels_path, e))
}

/// Lidar-to-image calibration: a rigid lidar→rectified-camera transform and
/// the rectified projection matrix, plus the image bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    tr: Matrix4<f64>,
    p: Matrix3x4<f64>,
    image_width: u32,
    image_height: u32,
}

impl CalibrationSet {
    pub fn new(
        tr: Matrix4<f64>,
        p: Matrix3x4<f64>,
        image_width: u32,
        image_height: u32,
    ) -> Result<Self> {
        if tr.iter().chain(p.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCalibration("non-finite matrix entry".into()));
        }
        if tr.row(3) != Matrix4::<f64>::identity().row(3) {
            return Err(Error::InvalidCalibration(
                "Tr bottom row must be (0, 0, 0, 1)".into(),
            ));
        }
        let rank = p.svd(false, false).rank(1e-12 * p.norm().max(1.0));
        if rank < 3 {
            return Err(Error::InvalidCalibration(format!(
                "projection matrix has rank {rank}, expected 3"
            )));
        }
        if image_width == 0 || image_height == 0 {
            return Err(Error::InvalidCalibration(
                "image size must be positive".into(),
            ));
        }
        Ok(CalibrationSet {
            tr,
            p,
            image_width,
            image_height,
        })
    }

    /// Parses a `calib.txt` in the odometry layout, taking `Tr:` and the
    /// projection row named `p_key` (usually `P2`). Other keys are ignored.
    pub fn from_kitti_str(
        text: &str,
        p_key: &str,
        image_width: u32,
        image_height: u32,
    ) -> Result<Self> {
        let mut tr = None;
        let mut p = None;
        for line in text.lines() {
            let Some((key, rest)) = line.split_once(':') else {
                continue;
            };
            let key = key.trim();
            if key != "Tr" && key != p_key {
                continue;
            }
            let vals = rest
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidCalibration(format!("{key}: {e}")))?;
            if vals.len() != 12 {
                return Err(Error::InvalidCalibration(format!(
                    "{key}: expected 12 values, found {}",
                    vals.len()
                )));
            }
            let m = Matrix3x4::from_row_slice(&vals);
            if key == "Tr" {
                let mut t = Matrix4::identity();
                t.fixed_view_mut::<3, 4>(0, 0).copy_from(&m);
                tr = Some(t);
            } else {
                p = Some(m);
            }
        }
        let tr = tr.ok_or_else(|| Error::InvalidCalibration("missing Tr row".into()))?;
        let p = p.ok_or_else(|| Error::InvalidCalibration(format!("missing {p_key} row")))?;
        Self::new(tr, p, image_width, image_height)
    }

    pub fn load(
        path: impl AsRef<Path>,
        p_key: &str,
        image_width: u32,
        image_height: u32,
    ) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kitti_str(&text, p_key, image_width, image_height)
    }

    /// Writes `Tr:` and the projection row under `p_key` in the layout
    /// [`from_kitti_str`](Self::from_kitti_str) reads. Values round-trip exactly.
    pub fn to_kitti_string(&self, p_key: &str) -> String {
        let row = |vals: Vec<f64>| {
            vals.iter()
                .map(|v| format!("{v:?}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let p: Vec<f64> = (0..3)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .map(|(r, c)| self.p[(r, c)])
            .collect();
        let tr: Vec<f64> = (0..3)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .map(|(r, c)| self.tr[(r, c)])
            .collect();
        format!("{p_key}: {}\nTr: {}\n", row(p), row(tr))
    }

    pub fn tr(&self) -> &Matrix4<f64> {
        &self.tr
    }

    pub fn p(&self) -> &Matrix3x4<f64> {
        &self.p
    }

    pub fn image_width(&self) -> u32 {
        self.image_width
    }

    pub fn image_height(&self) -> u32 {
        self.image_height
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagePoint {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// Projects a lidar-frame point into the image: `P * (Tr * X)` in
/// homogeneous coordinates, divided by the third coordinate.
pub fn project_point(x: &Vector3<f64>, calib: &CalibrationSet) -> Result<ImagePoint> {
    let cam = calib.tr * Vector4::new(x[0], x[1], x[2], 1.0);
    let img = calib.p * cam;
    let depth = img[2];
    if depth.is_nan() || depth <= 0.0 {
        return Err(Error::BehindCamera { depth });
    }
    Ok(ImagePoint {
        u: img[0] / depth,
        v: img[1] / depth,
        depth,
    })
}

/// True when the point projects into `[0, width) x [0, height)` with positive depth.
pub fn in_frustum(x: &Vector3<f64>, calib: &CalibrationSet) -> bool {
    match project_point(x, calib) {
        Ok(ip) => {
            ip.u >= 0.0
                && ip.v >= 0.0
                && ip.u < calib.image_width as f64
                && ip.v < calib.image_height as f64
        }
        Err(_) => false,
    }
}

/// Keeps the points visible in the camera image; survivors stay in the lidar frame.
pub fn frustum_filter(cloud: &LabeledCloud, calib: &CalibrationSet) -> LabeledCloud {
    cloud
        .points
        .iter()
        .filter(|p| in_frustum(&p.position(), calib))
        .copied()
        .collect()
}

/// Drops points of moving or unidentifiable classes.
pub fn strip_dynamic(cloud: &LabeledCloud, partition: &ClassPartition) -> LabeledCloud {
    cloud
        .points
        .iter()
        .filter(|p| !partition.is_dynamic_or_ignored(p.class))
        .copied()
        .collect()
}
