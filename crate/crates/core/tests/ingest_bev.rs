mod common;

use bevnav::bev::{
    apply_mask, build_training_pair, downsample, hull_mask, rasterize_bev, to_obstacle_map,
    HeightClip,
};
use bevnav::imageio::{load_png, render_png};
use bevnav::ingest::{
    frustum_filter, load_cloud, project_point, strip_dynamic, write_cloud, CalibrationSet,
    LabeledCloud, LabeledPoint,
};
use bevnav::scenes::kitti_like_calibration;
use bevnav::{
    Cell, CellState, ClassPartition, GridSpec, ObstacleMap, Occupancy, Raster, SemanticGrid,
};
use common::*;
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn projection_inverts_analytically() {
    let mut rng = rng(1);
    for _ in 0..50 {
        let calib = random_calibration(&mut rng);
        for _ in 0..40 {
            let fwd: f64 = rng.random_range(1.0..60.0);
            let x = Vector3::new(
                fwd,
                rng.random_range(-0.5..0.5) * fwd,
                rng.random_range(-0.25..0.25) * fwd,
            );
            let ip = project_point(&x, &calib).unwrap();
            let back = unproject(ip.u, ip.v, ip.depth, &calib);
            assert!((back - x).norm() < 1e-9, "{x} -> {back}");
        }
    }
}

#[test]
fn frustum_filter_matches_per_point_oracle() {
    let mut rng = rng(2);
    for _ in 0..40 {
        let calib = random_calibration(&mut rng);
        let cloud: LabeledCloud = (0..300)
            .map(|_| {
                LabeledPoint::new(
                    rng.random_range(-40.0..40.0),
                    rng.random_range(-40.0..40.0),
                    rng.random_range(-3.0..3.0),
                    40,
                )
            })
            .collect();
        let kept = frustum_filter(&cloud, &calib);
        let want: Vec<LabeledPoint> = cloud
            .points
            .iter()
            .copied()
            .filter(|p| visible_oracle(&p.position(), &calib))
            .collect();
        assert_eq!(kept.points, want);
    }
}

#[test]
fn calibration_text_round_trips() {
    let mut rng = rng(3);
    for _ in 0..20 {
        let calib = random_calibration(&mut rng);
        let text = calib.to_kitti_string("P2");
        let back =
            CalibrationSet::from_kitti_str(&text, "P2", calib.image_width(), calib.image_height())
                .unwrap();
        assert_eq!(back, calib);
    }
}

#[test]
fn cloud_files_round_trip() {
    let mut rng = rng(4);
    let dir = tempfile::tempdir().unwrap();
    for i in 0..20 {
        let cloud: LabeledCloud = (0..rng.random_range(0..500))
            .map(|_| {
                LabeledPoint::new(
                    rng.random(),
                    rng.random_range(-1e4..1e4),
                    rng.random(),
                    rng.random(),
                )
            })
            .collect();
        let (p, l) = (
            dir.path().join(format!("{i}.bin")),
            dir.path().join(format!("{i}.label")),
        );
        write_cloud(&cloud, &p, &l).unwrap();
        assert_eq!(load_cloud(&p, &l).unwrap(), cloud);
    }
}

/// L-shaped building corner in front of the sensor with a pocket of road
/// hidden from the scan (as if behind a passing truck).
fn l_scene() -> (LabeledCloud, LabeledCloud) {
    let mut map = Vec::new();
    let mut scan = Vec::new();
    let pocket = |x: f32, y: f32| (9.0..11.0).contains(&x) && (-1.0..1.0).contains(&y);
    for i in 0..120 {
        for j in 0..120 {
            let (x, y) = (4.05 + i as f32 * 0.1, -5.95 + j as f32 * 0.1);
            let wall =
                ((3.0..3.4).contains(&y) && x < 15.0) || ((15.0..15.4).contains(&x) && y < 3.4);
            let beyond = y >= 3.4 || x >= 15.4;
            if beyond {
                continue;
            }
            let p = if wall {
                LabeledPoint::new(x, y, 1.5, 50)
            } else {
                LabeledPoint::new(x, y, -1.7, 40)
            };
            map.push(p);
            if !pocket(x, y) {
                scan.push(p);
            }
        }
    }
    // The occluder itself is a moving vehicle and is removed.
    scan.push(LabeledPoint::new(8.0, 0.0, 0.5, 258));
    (LabeledCloud::new(scan), LabeledCloud::new(map))
}

#[test]
fn l_shaped_pocket_is_masked_and_labeled() {
    let (scan, map) = l_scene();
    let partition = ClassPartition::semantic_kitti();
    let spec = GridSpec::kitti_volume();
    let calib = kitti_like_calibration();
    let pair = build_training_pair(
        &scan,
        &map,
        &calib,
        &spec,
        &partition,
        HeightClip::default(),
    )
    .unwrap();

    let pocket: Vec<Cell> = (0..spec.len())
        .map(|i| spec.cell_at(i))
        .filter(|&c| {
            let (x, y) = spec.cell_center(c);
            (9.0..11.0).contains(&x) && (-1.0..1.0).contains(&y)
        })
        .collect();
    assert_eq!(pocket.len(), 100);
    for &c in &pocket {
        assert!(pair.mask[c], "pocket cell {c} not masked");
        assert_eq!(pair.input[c], CellState::ToInpaint);
        assert_eq!(pair.target[c], CellState::Class(40));
    }
    // Only the pocket is hidden inside the hull of this dense scan.
    assert_eq!(
        pair.mask.cells().iter().filter(|&&m| m).count(),
        pocket.len()
    );
    // Nothing lies behind the wall, so those cells stay unobserved.
    let behind = spec.cell_of(10.0, 5.0).unwrap();
    assert_eq!(pair.input[behind], CellState::Unobserved);
    assert_eq!(pair.target[behind], CellState::Unobserved);
    // The wall corner made it into both grids.
    let corner = spec.cell_of(15.2, 3.2).unwrap();
    assert_eq!(pair.input[corner], CellState::Class(50));
    // Identity pair: the target matches the input outside the mask.
    let same = build_training_pair(
        &scan,
        &scan,
        &calib,
        &spec,
        &partition,
        HeightClip::default(),
    )
    .unwrap();
    for ((t, i), m) in same
        .target
        .cells()
        .iter()
        .zip(same.input.cells())
        .zip(same.mask.cells())
    {
        if *m {
            assert_eq!(*t, CellState::Unobserved);
        } else {
            assert_eq!(t, i);
        }
    }
}

#[test]
fn dynamic_points_never_reach_the_grid() {
    let partition = ClassPartition::semantic_kitti();
    let cloud: LabeledCloud = [252u16, 254, 0, 1]
        .iter()
        .map(|&c| LabeledPoint::new(10.0, 0.0, 0.0, c))
        .collect();
    assert!(strip_dynamic(&cloud, &partition).is_empty());
    let grid = rasterize_bev(&cloud, &GridSpec::kitti_volume(), &partition);
    assert!(grid.cells().iter().all(|&s| s == CellState::Unobserved));
}

fn point_in_triangle(p: (i64, i64), a: (i64, i64), b: (i64, i64), c: (i64, i64)) -> bool {
    let cr = |o: (i64, i64), u: (i64, i64), v: (i64, i64)| {
        (u.0 - o.0) * (v.1 - o.1) - (u.1 - o.1) * (v.0 - o.0)
    };
    let (d1, d2, d3) = (cr(a, b, p), cr(b, c, p), cr(c, a, p));
    let neg = d1 < 0 || d2 < 0 || d3 < 0;
    let pos = d1 > 0 || d2 > 0 || d3 > 0;
    if !(neg && pos) {
        // Degenerate triangles only contain points of their segments.
        if cr(a, b, c) == 0 {
            let on = |u: (i64, i64), v: (i64, i64)| {
                cr(u, v, p) == 0
                    && p.0 >= u.0.min(v.0)
                    && p.0 <= u.0.max(v.0)
                    && p.1 >= u.1.min(v.1)
                    && p.1 <= u.1.max(v.1)
            };
            return on(a, b) || on(b, c) || on(a, c);
        }
        return true;
    }
    false
}

/// A cell is inside the hull iff some triangle of observed cells contains it.
fn hull_oracle(grid: &SemanticGrid) -> Vec<bool> {
    let pts: Vec<(i64, i64)> = grid
        .iter()
        .filter(|(_, s)| s.class().is_some())
        .map(|(c, _)| (c.row as i64, c.col as i64))
        .collect();
    let collinear = pts.len() < 3
        || pts.iter().all(|&p| {
            let (a, b) = (
                pts[0],
                pts.iter().copied().find(|&q| q != pts[0]).unwrap_or(pts[0]),
            );
            (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) == 0
        });
    grid.iter()
        .map(|(c, s)| {
            if collinear || *s != CellState::Unobserved {
                return false;
            }
            let p = (c.row as i64, c.col as i64);
            let n = pts.len();
            (0..n).any(|i| {
                (i + 1..n).any(|j| (j + 1..n).any(|k| point_in_triangle(p, pts[i], pts[j], pts[k])))
            })
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hull_mask_matches_triangle_oracle(w in 1usize..9, h in 1usize..9, seed in any::<u64>(), p in 0.02f64..0.3) {
        let mut rng = rng(seed);
        let grid = random_semantic(&mut rng, w, h, 0.0, 1.0 - p);
        let mask = hull_mask(&grid);
        prop_assert_eq!(mask.cells().to_vec(), hull_oracle(&grid));
        let applied = apply_mask(&grid, &mask).unwrap();
        for ((a, b), m) in grid.cells().iter().zip(applied.cells()).zip(mask.cells()) {
            prop_assert_eq!(*b, if *m { CellState::ToInpaint } else { *a });
        }
    }

    #[test]
    fn obstacle_map_is_cellwise(w in 1usize..10, h in 1usize..10, seed in any::<u64>()) {
        let mut rng = rng(seed);
        let partition = ClassPartition::semantic_kitti();
        let grid = random_semantic(&mut rng, w, h, 0.2, 0.2);
        let map = to_obstacle_map(&grid, &partition).unwrap();
        for (s, o) in grid.cells().iter().zip(map.cells()) {
            let want = match s.class() {
                Some(k) if partition.is_obstacle(k) => Occupancy::Obstacle,
                _ => Occupancy::Free,
            };
            prop_assert_eq!(*o, want);
        }
    }

    #[test]
    fn downsample_matches_block_vote(w in 1usize..20, h in 1usize..20, f in 1usize..6, seed in any::<u64>()) {
        let mut rng = rng(seed);
        let map = random_map(&mut rng, w, h, 0.4);
        let small = downsample(&map, f).unwrap();
        prop_assert_eq!((small.width(), small.height()), (w.div_ceil(f), h.div_ceil(f)));
        for (c, o) in small.iter() {
            let (mut obs, mut total) = (0, 0);
            for r in c.row * f..((c.row + 1) * f).min(h) {
                for col in c.col * f..((c.col + 1) * f).min(w) {
                    total += 1;
                    obs += (map[Cell::new(r, col)] == Occupancy::Obstacle) as usize;
                }
            }
            let want = if 2 * obs >= total { Occupancy::Obstacle } else { Occupancy::Free };
            prop_assert_eq!(*o, want);
        }
        if f == 1 {
            prop_assert_eq!(small, map);
        }
    }
}

#[test]
fn semantic_png_round_trips() {
    let mut rng = rng(6);
    let partition = ClassPartition::semantic_kitti();
    let classes: Vec<u16> = partition.classes().collect();
    let dir = tempfile::tempdir().unwrap();
    for i in 0..20 {
        let (w, h) = (rng.random_range(1..40), rng.random_range(1..40));
        let grid: SemanticGrid =
            Raster::from_fn(GridSpec::pixels(w, h), |_| match rng.random_range(0..10) {
                0 => CellState::Unobserved,
                1 => CellState::ToInpaint,
                _ => CellState::Class(classes[rng.random_range(0..classes.len())]),
            });
        let path = dir.path().join(format!("{i}.png"));
        render_png(&grid, &partition, &path).unwrap();
        assert_eq!(load_png(&path, &partition).unwrap(), grid);
    }
}

#[test]
fn obstacle_png_round_trips() {
    let mut rng = rng(7);
    let dir = tempfile::tempdir().unwrap();
    let map: ObstacleMap = random_map(&mut rng, 33, 17, 0.3);
    let path = dir.path().join("m.png");
    bevnav::imageio::render_obstacle_png(&map, &path).unwrap();
    assert_eq!(bevnav::imageio::load_obstacle_png(&path).unwrap(), map);
}
