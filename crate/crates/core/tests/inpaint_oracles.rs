mod common;

use std::collections::VecDeque;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};

use bevnav::bev::mask_of;
use bevnav::inpaint::{
    external_inpaint, inpaint, iterative_majority_fill, iterative_majority_fill_with_stats,
    nearest_class_fill, CommandTemplate, InpainterChoice,
};
use bevnav::{CellState, ClassPartition, Error, GridSpec, Raster, SemanticGrid};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn assert_fill_contract(input: &SemanticGrid, out: &SemanticGrid) {
    assert_eq!(count_state(out, CellState::ToInpaint), 0);
    for (a, b) in input.cells().iter().zip(out.cells()) {
        match a {
            CellState::ToInpaint => {
                assert!(matches!(b, CellState::Class(k) if PALETTE.contains(k)))
            }
            other => assert_eq!(other, b),
        }
    }
}

#[test]
fn nearest_matches_brute_force() {
    let mut rng = rng(21);
    for _ in 0..100 {
        let (w, h) = (rng.random_range(1..24), rng.random_range(1..24));
        let grid = random_semantic(&mut rng, w, h, 0.5, 0.2);
        if !grid.cells().iter().any(|s| s.class().is_some()) {
            assert!(
                matches!(nearest_class_fill(&grid), Err(Error::NoKnownCells))
                    || count_state(&grid, CellState::ToInpaint) == 0
            );
            continue;
        }
        let got = nearest_class_fill(&grid).unwrap();
        assert_eq!(got, nearest_oracle(&grid));
        assert_fill_contract(&grid, &got);
    }
}

#[test]
fn sparse_seeds_far_apart() {
    // Mostly targets with a handful of labels: long distances stress the
    // distance transform.
    let mut rng = rng(8);
    for _ in 0..30 {
        let grid = random_semantic(&mut rng, 40, 30, 0.98, 0.0);
        if grid.cells().iter().all(|s| s.class().is_none()) {
            continue;
        }
        assert_eq!(nearest_class_fill(&grid).unwrap(), nearest_oracle(&grid));
    }
}

/// Pass in which each target first gets a labeled cell in its window:
/// breadth-first depth through targets from the labeled cells.
fn fill_depths(grid: &SemanticGrid, radius: usize) -> Vec<Option<usize>> {
    let (w, h) = (grid.width(), grid.height());
    let mut depth = vec![None; w * h];
    let mut q = VecDeque::new();
    for (i, s) in grid.cells().iter().enumerate() {
        if s.class().is_some() {
            depth[i] = Some(0);
            q.push_back(i);
        }
    }
    while let Some(i) = q.pop_front() {
        let (r, c) = (i / w, i % w);
        for rr in r.saturating_sub(radius)..=(r + radius).min(h - 1) {
            for cc in c.saturating_sub(radius)..=(c + radius).min(w - 1) {
                let j = rr * w + cc;
                if depth[j].is_none() && grid.cells()[j] == CellState::ToInpaint {
                    depth[j] = Some(depth[i].unwrap() + 1);
                    q.push_back(j);
                }
            }
        }
    }
    depth
}

#[test]
fn majority_pass_count_matches_bfs_depth() {
    let mut rng = rng(34);
    for _ in 0..100 {
        let (w, h) = (rng.random_range(1..20), rng.random_range(1..20));
        let radius = rng.random_range(1..3);
        let grid = random_semantic(&mut rng, w, h, 0.6, 0.15);
        if grid.cells().iter().all(|s| s.class().is_none()) {
            continue;
        }
        let depths = fill_depths(&grid, radius);
        let targets: Vec<usize> = (0..w * h)
            .filter(|&i| grid.cells()[i] == CellState::ToInpaint)
            .collect();
        let max_depth = targets.iter().filter_map(|&i| depths[i]).max().unwrap_or(0);
        let unreachable = targets.iter().filter(|&&i| depths[i].is_none()).count();
        let (out, stats) = iterative_majority_fill_with_stats(&grid, radius, w * h + 1, 7).unwrap();
        assert_eq!(stats.passes, max_depth);
        assert_eq!(stats.fallback_cells, unreachable);
        assert_fill_contract(&grid, &out);
        // Unreachable targets take the nearest-class value of the grid as it
        // stood after the last pass; reachable ones with a single-class
        // window at depth 1 take that class.
        for &i in &targets {
            if depths[i] == Some(1) {
                let (r, c) = (i / w, i % w);
                let mut classes: Vec<u16> = Vec::new();
                for rr in r.saturating_sub(radius)..=(r + radius).min(h - 1) {
                    for cc in c.saturating_sub(radius)..=(c + radius).min(w - 1) {
                        if let Some(k) = grid.cells()[rr * w + cc].class() {
                            classes.push(k);
                        }
                    }
                }
                classes.dedup();
                if classes.iter().all(|&k| k == classes[0]) {
                    assert_eq!(out.cells()[i], CellState::Class(classes[0]));
                }
            }
        }
    }
}

#[test]
fn majority_is_seed_deterministic() {
    let mut rng = rng(99);
    let grid = random_semantic(&mut rng, 30, 30, 0.5, 0.1);
    let a = iterative_majority_fill(&grid, 1, 60, 5).unwrap();
    assert_eq!(a, iterative_majority_fill(&grid, 1, 60, 5).unwrap());
    // Different seeds may break ties differently but keep the contract.
    assert_fill_contract(&grid, &iterative_majority_fill(&grid, 1, 60, 6).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn builtin_methods_keep_the_fill_contract(seed in any::<u64>(), w in 1usize..16, h in 1usize..16,
                                              p in 0.0f64..0.9) {
        let mut rng = rng(seed);
        let mut grid = random_semantic(&mut rng, w, h, p, 0.1);
        grid.cells_mut()[0] = CellState::Class(PALETTE[0]);
        let partition = ClassPartition::semantic_kitti();
        for choice in [InpainterChoice::NearestClass, InpainterChoice::majority(seed)] {
            let out = inpaint(&grid, &choice, &partition).unwrap();
            assert_fill_contract(&grid, &out);
            prop_assert_eq!(&out, &inpaint(&grid, &choice, &partition).unwrap());
        }
    }
}

// ---------------------------------------------------------------------------
// External inpainter through stub scripts.

fn script(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, format!("#!/bin/sh\nset -e\n{body}\n")).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path
}

fn python3() -> bool {
    std::process::Command::new("python3")
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success())
}

fn masked_fixture() -> SemanticGrid {
    let road = CellState::Class(40);
    let building = CellState::Class(50);
    Raster::from_vec(
        GridSpec::pixels(4, 3),
        vec![
            road,
            road,
            building,
            building,
            road,
            CellState::ToInpaint,
            CellState::ToInpaint,
            building,
            road,
            road,
            CellState::Unobserved,
            building,
        ],
    )
    .unwrap()
}

fn template(path: &Path) -> CommandTemplate {
    CommandTemplate::parse(&format!("{} {{input}} {{mask}} {{output}}", path.display())).unwrap()
}

#[test]
fn external_copy_leaves_targets() {
    let dir = tempfile::tempdir().unwrap();
    let copy = script(dir.path(), "copy.sh", "cp \"$1\" \"$3\"");
    let grid = masked_fixture();
    let partition = ClassPartition::semantic_kitti();
    let err = external_inpaint(&grid, &mask_of(&grid), &template(&copy), &partition).unwrap_err();
    assert!(
        matches!(err, Error::IncompleteFill { remaining: 2 }),
        "{err}"
    );
    let via_choice = inpaint(
        &grid,
        &InpainterChoice::External {
            command: template(&copy),
        },
        &partition,
    );
    assert!(matches!(via_choice, Err(Error::IncompleteFill { .. })));
}

#[test]
fn external_failure_and_missing_output() {
    let dir = tempfile::tempdir().unwrap();
    let fail = script(dir.path(), "fail.sh", "echo broken >&2; exit 3");
    let silent = script(dir.path(), "silent.sh", "true");
    let grid = masked_fixture();
    let partition = ClassPartition::semantic_kitti();
    for s in [fail, silent] {
        let err = external_inpaint(&grid, &mask_of(&grid), &template(&s), &partition).unwrap_err();
        assert!(matches!(err, Error::ExternalFailed(_)), "{err}");
    }
    let missing = CommandTemplate::parse("/nonexistent/inpainter {input} {mask} {output}").unwrap();
    assert!(matches!(
        external_inpaint(&grid, &mask_of(&grid), &missing, &partition),
        Err(Error::ExternalFailed(_))
    ));
}

const PAINT: &str = r#"
import struct, sys, zlib
def read_png(path):
    data = open(path, 'rb').read()
    pos, chunks = 8, []
    while pos < len(data):
        n, = struct.unpack('>I', data[pos:pos+4]); kind = data[pos+4:pos+8]
        chunks.append((kind, data[pos+8:pos+8+n])); pos += 12 + n
    ihdr = dict(chunks)[b'IHDR']
    w, h, depth, ctype = struct.unpack('>IIBB', ihdr[:10])
    ch = {0: 1, 2: 3, 6: 4}[ctype]
    raw = zlib.decompress(b''.join(d for k, d in chunks if k == b'IDAT'))
    rows, prev, stride, i = [], bytearray(w * ch), w * ch, 0
    for _ in range(h):
        f = raw[i]; line = bytearray(raw[i+1:i+1+stride]); i += 1 + stride
        for x in range(stride):
            a = line[x-ch] if x >= ch else 0; b = prev[x]; c = prev[x-ch] if x >= ch else 0
            if f == 1: line[x] = (line[x] + a) & 255
            elif f == 2: line[x] = (line[x] + b) & 255
            elif f == 3: line[x] = (line[x] + (a + b) // 2) & 255
            elif f == 4:
                p = a + b - c; pa, pb, pc = abs(p-a), abs(p-b), abs(p-c)
                line[x] = (line[x] + (a if pa <= pb and pa <= pc else b if pb <= pc else c)) & 255
        rows.append(line); prev = line
    return w, h, ch, rows
def write_png(path, w, h, rows):
    raw = b''.join(b'\x00' + bytes(r) for r in rows)
    def chunk(k, d): return struct.pack('>I', len(d)) + k + d + struct.pack('>I', zlib.crc32(k + d) & 0xffffffff)
    open(path, 'wb').write(b'\x89PNG\r\n\x1a\n' + chunk(b'IHDR', struct.pack('>IIBBBBB', w, h, 8, 2, 0, 0, 0))
        + chunk(b'IDAT', zlib.compress(raw)) + chunk(b'IEND', b''))
w, h, ch, rows = read_png(sys.argv[1])
mode, rgb = sys.argv[4], [int(v) for v in sys.argv[5].split(',')]
for y in range(h):
    for x in range(w):
        px = list(rows[y][x*3:x*3+3])
        hit = px == [255, 255, 255] if mode == 'white' else (x, y) == (0, 0)
        if hit: rows[y][x*3:x*3+3] = bytes(rgb)
write_png(sys.argv[3], w, h, rows)
"#;

fn painter(dir: &Path, mode: &str, rgb: [u8; 3]) -> CommandTemplate {
    let py = dir.join("paint.py");
    std::fs::write(&py, PAINT).unwrap();
    CommandTemplate::parse(&format!(
        "python3 {} {{input}} {{mask}} {{output}} {mode} {},{},{}",
        py.display(),
        rgb[0],
        rgb[1],
        rgb[2]
    ))
    .unwrap()
}

#[test]
fn external_paints_targets() {
    if !python3() {
        eprintln!("python3 unavailable; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let partition = ClassPartition::semantic_kitti();
    let road = partition.color(40).unwrap();
    let grid = masked_fixture();
    let out = external_inpaint(
        &grid,
        &mask_of(&grid),
        &painter(dir.path(), "white", road),
        &partition,
    )
    .unwrap();
    assert_eq!(out.drift, 0);
    assert_eq!(out.snapped, 0);
    let mut want = grid.clone();
    for s in want.cells_mut() {
        if *s == CellState::ToInpaint {
            *s = CellState::Class(40);
        }
    }
    assert_eq!(out.grid, want);
}

#[test]
fn external_drift_is_restored_and_counted() {
    if !python3() {
        eprintln!("python3 unavailable; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let partition = ClassPartition::semantic_kitti();
    let building = partition.color(50).unwrap();
    // Fill the targets first so only the drift remains to observe.
    let grid = masked_fixture();
    let filled = nearest_class_fill(&grid).unwrap();
    let mask = mask_of(&grid);
    let mut reopened = filled.clone();
    for (s, &m) in reopened.cells_mut().iter_mut().zip(mask.cells()) {
        if m {
            *s = CellState::ToInpaint;
        }
    }
    // The stub recolors cell (0,0) (a known road cell) and paints targets
    // with an off-palette near-building color.
    let near = [building[0].saturating_sub(3), building[1], building[2]];
    let py = painter(dir.path(), "corner", building);
    let out = external_inpaint(&filled, &mask, &py, &partition).unwrap();
    assert_eq!(out.drift, 1);
    assert_eq!(out.grid, filled);
    let py = painter(dir.path(), "white", near);
    let out = external_inpaint(&reopened, &mask, &py, &partition).unwrap();
    assert_eq!(out.snapped, 2);
    assert_eq!(out.grid[bevnav::Cell::new(1, 1)], CellState::Class(50));
}
