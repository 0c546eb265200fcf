//! Runs a seeded study on a street split by a building wall whose one-cell
//! gap was occluded in the scan. The raw scan lets the planner believe it can
//! cut through the wall; the inpainted grid closes the gap.
//!
//! cargo run --example wall_gap_study -- [trials] [seed] [plot.png]

use bevnav::eval::{
    plot_trial, render_report, run_study, ReportFormat, StartMode, StudyConfig, Variant,
};
use bevnav::imageio::save_rgb_png;
use bevnav::inpaint::InpainterChoice;
use bevnav::planner::{simulate, SensorModel};
use bevnav::scenes::wall_gap_scene;
use bevnav::Cell;

fn main() -> bevnav::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let trials = args.first().and_then(|s| s.parse().ok()).unwrap_or(50);
    let seed = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(7);

    let scene = wall_gap_scene();
    let maps = scene.maps(&InpainterChoice::majority(seed))?;
    let sensor = SensorModel::new(4.0)?;
    let start_mode = StartMode::FixedNearSensor {
        mean: [scene.sensor_cell.row as f64, scene.sensor_cell.col as f64],
        sigma: 3.0,
    };
    let mut config = StudyConfig::new(maps, start_mode, sensor, seed);
    config.trials = trials;

    let report = run_study(&config)?;
    print!("{}", render_report(&report, ReportFormat::Text));

    // One hand-picked trip that crosses the wall, drawn for each map.
    let (start, goal) = (Cell::new(40, 16), Cell::new(5, 16));
    for variant in Variant::ALL {
        let belief = config.maps.get(variant);
        let r = simulate(belief, &config.maps.gt, start, goal, &config.sensor)?;
        println!(
            "{:<10} {start} -> {goal}: {} steps, {} replans",
            variant.label(),
            r.path_steps,
            r.replans
        );
        if let Some(path) = args.get(2) {
            if variant == Variant::Input {
                save_rgb_png(&plot_trial(belief, &r), path)?;
            }
        }
    }
    Ok(())
}
