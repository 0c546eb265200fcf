//! Compares the built-in inpainters on a rasterized street scan: each fills
//! the masked cells, and the result is scored against the dense map.
//!
//! cargo run --example inpaint_methods

use bevnav::bev::build_training_pair;
use bevnav::eval::{miou, MiouMode};
use bevnav::inpaint::{inpaint, iterative_majority_fill_with_stats, InpainterChoice};
use bevnav::scenes::street_scene;
use bevnav::{ClassPartition, GridSpec};

fn main() -> bevnav::Result<()> {
    let partition = ClassPartition::semantic_kitti();
    let scene = street_scene(3);
    let pair = build_training_pair(
        &scene.scan,
        &scene.map,
        &scene.calib,
        &GridSpec::kitti_volume(),
        &partition,
        Default::default(),
    )?;
    let targets = pair.mask.cells().iter().filter(|&&m| m).count();
    println!("{targets} cells to fill");

    let methods = [
        ("nearest class", InpainterChoice::NearestClass),
        ("majority r=1", InpainterChoice::majority(0)),
        (
            "majority r=2",
            InpainterChoice::IterativeMajority {
                radius: 2,
                max_iters: None,
                seed: 0,
            },
        ),
    ];
    for (name, choice) in &methods {
        let filled = inpaint(&pair.input, choice, &partition)?;
        let score = miou(
            &filled,
            &pair.target,
            &pair.mask,
            &partition,
            MiouMode::PresentClasses,
        )?;
        println!(
            "{name:<14} mIoU {:.4} over {} scored cells",
            score.mean, score.scored_cells
        );
    }

    let (_, stats) = iterative_majority_fill_with_stats(&pair.input, 1, 512, 0)?;
    println!(
        "majority r=1 converged in {} passes, {} cells fell back to nearest",
        stats.passes, stats.fallback_cells
    );
    Ok(())
}
