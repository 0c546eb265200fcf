//! A robot plans on an outdated map, senses the true one as it drives, and
//! replans when a hidden obstacle blocks its route.
//!
//! cargo run --example replanning_simulation

use bevnav::planner::{simulate, Outcome, SensorModel};
use bevnav::{Cell, ObstacleMap};

fn main() -> bevnav::Result<()> {
    let truth = ObstacleMap::from_ascii(&[".......#..", ".########.", ".........."])?;
    let belief = ObstacleMap::from_ascii(&["..........", ".########.", ".........."])?;
    let sensor = SensorModel::new(2.0)?;
    let r = simulate(&belief, &truth, Cell::new(0, 0), Cell::new(0, 9), &sensor)?;
    println!(
        "{:?} after {} steps and {} replans; discovered {}",
        r.outcome,
        r.path_steps,
        r.replans,
        r.discovered_obstacles
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    );

    // A goal inside a sealed room: the robot explores until the belief map
    // proves it unreachable.
    let room = ObstacleMap::from_ascii(&[".......", "...###.", "...#.#.", "...###.", "......."])?;
    let open = ObstacleMap::filled(*room.spec(), bevnav::Occupancy::Free);
    let r = simulate(
        &open,
        &room,
        Cell::new(2, 0),
        Cell::new(2, 4),
        &SensorModel::new(1.0)?,
    )?;
    assert_eq!(r.outcome, Outcome::NoPathFound);
    println!(
        "sealed room: gave up after {} steps and {} replans",
        r.path_steps, r.replans
    );
    Ok(())
}
