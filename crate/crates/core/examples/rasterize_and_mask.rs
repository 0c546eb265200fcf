//! Turns one synthetic street scan into a bird's-eye-view semantic grid,
//! computes the convex-hull inpaint mask, and writes the PNGs.
//!
//! cargo run --example rasterize_and_mask -- [out_dir]

use bevnav::bev::{apply_mask, hull_mask, rasterize_bev};
use bevnav::eval::class_histogram;
use bevnav::imageio::{render_mask_png, render_png};
use bevnav::ingest::{frustum_filter, strip_dynamic};
use bevnav::scenes::street_scene;
use bevnav::{CellState, ClassPartition, GridSpec};

fn main() -> bevnav::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/rasterize_and_mask".into());
    std::fs::create_dir_all(&out).expect("create output directory");

    let partition = ClassPartition::semantic_kitti();
    let scene = street_scene(1);
    let visible = strip_dynamic(&frustum_filter(&scene.scan, &scene.calib), &partition);
    println!(
        "{} scan points, {} after frustum and dynamic filtering",
        scene.scan.len(),
        visible.len()
    );

    let grid = rasterize_bev(&visible, &GridSpec::kitti_volume(), &partition);
    let mask = hull_mask(&grid);
    let input = apply_mask(&grid, &mask)?;

    let count = |s: CellState| input.cells().iter().filter(|&&c| c == s).count();
    println!(
        "{} labeled, {} to inpaint, {} unobserved cells",
        input.cells().iter().filter(|c| c.class().is_some()).count(),
        count(CellState::ToInpaint),
        count(CellState::Unobserved)
    );
    for (class, n) in class_histogram(&input, &partition)
        .into_iter()
        .filter(|(_, n)| *n > 0)
    {
        println!("  {:<12} {n}", partition.name(class).unwrap_or("?"));
    }

    render_png(&input, &partition, format!("{out}/input.png"))?;
    render_mask_png(&mask, format!("{out}/mask.png"))?;
    println!("wrote {out}/input.png and {out}/mask.png");
    Ok(())
}
