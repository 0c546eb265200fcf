//! Scores a prediction against a reference inside a mask, in both averaging
//! modes.
//!
//! cargo run --example miou_scoring

use bevnav::eval::{miou, MiouMode};
use bevnav::{CellState, ClassPartition, GridSpec, Raster};

fn main() -> bevnav::Result<()> {
    let partition = ClassPartition::semantic_kitti();
    let road = partition.id_by_name("road").expect("road");
    let building = partition.id_by_name("building").expect("building");
    let (a, b) = (CellState::Class(road), CellState::Class(building));
    let spec = GridSpec::pixels(3, 3);

    let gt = Raster::from_vec(spec, vec![a, a, a, b, b, b, b, a, b])?;
    let pred = Raster::from_vec(spec, vec![a, a, b, b, b, b, a, b, a])?;
    let mask = Raster::from_vec(
        spec,
        vec![true, true, true, true, true, true, true, false, false],
    )?;

    for mode in [MiouMode::PresentClasses, MiouMode::AllClasses] {
        let s = miou(&pred, &gt, &mask, &partition, mode)?;
        println!(
            "{mode:?}: mIoU {:.4} over {} classes",
            s.mean,
            s.per_class.len()
        );
    }
    let s = miou(&pred, &gt, &mask, &partition, MiouMode::PresentClasses)?;
    for (class, counts) in &s.counts {
        println!(
            "  {:<9} TP {} FP {} FN {} IoU {:.3}",
            partition.name(*class).unwrap_or("?"),
            counts.tp,
            counts.fp,
            counts.fn_,
            counts.iou()
        );
    }
    Ok(())
}
