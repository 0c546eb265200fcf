//! Plans on a small hand-drawn obstacle map with 8-connected A*.
//!
//! cargo run --example astar_grid

use bevnav::planner::astar;
use bevnav::{Cell, ObstacleMap};

fn main() -> bevnav::Result<()> {
    let map = ObstacleMap::from_ascii(&[
        "..........",
        "..######..",
        "..#....#..",
        "..#.##.#..",
        "....#.....",
        "#####.###.",
        "..........",
    ])?;
    let (start, goal) = (Cell::new(3, 3), Cell::new(6, 0));
    let Some(path) = astar(&map, start, goal)? else {
        println!("no path");
        return Ok(());
    };
    println!("{} steps, cost {:.4}", path.steps(), path.cost);
    let mut rows: Vec<Vec<char>> = map.to_ascii().iter().map(|r| r.chars().collect()).collect();
    for c in &path.cells {
        rows[c.row][c.col] = '*';
    }
    rows[start.row][start.col] = 'S';
    rows[goal.row][goal.col] = 'G';
    for r in rows {
        println!("{}", r.into_iter().collect::<String>());
    }

    // Diagonal moves never squeeze between two obstacle corners.
    let pinch = ObstacleMap::from_ascii(&[".#", "#."])?;
    println!(
        "through a pinched corner: {:?}",
        astar(&pinch, Cell::new(0, 0), Cell::new(1, 1))?.map(|p| p.steps())
    );
    Ok(())
}
