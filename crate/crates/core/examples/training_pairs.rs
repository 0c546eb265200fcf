//! Lays out a tiny sequence directory on disk and runs the `datagen`
//! command over it, producing input / mask / target PNG triples.
//!
//! cargo run --example training_pairs

use bevnav::ingest::write_cloud;
use bevnav::scenes::street_scene;

fn main() -> bevnav::Result<()> {
    let root = tempfile::tempdir().expect("temp dir");
    let seq = root.path().join("00");
    for dir in ["velodyne", "labels", "completed"] {
        std::fs::create_dir_all(seq.join(dir)).expect("create dir");
    }
    for frame in 0..3u64 {
        let scene = street_scene(frame);
        let stem = format!("{frame:06}");
        write_cloud(
            &scene.scan,
            seq.join(format!("velodyne/{stem}.bin")),
            seq.join(format!("labels/{stem}.label")),
        )?;
        write_cloud(
            &scene.map,
            seq.join(format!("completed/{stem}.bin")),
            seq.join(format!("completed/{stem}.label")),
        )?;
        if frame == 0 {
            std::fs::write(seq.join("calib.txt"), scene.calib.to_kitti_string("P2"))
                .expect("write calib");
        }
    }

    let out = root.path().join("pairs");
    let code = bevnav::cli::run([
        "bevnav",
        "datagen",
        "--sequence",
        seq.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    for dir in ["input", "mask", "target"] {
        let n = std::fs::read_dir(out.join(dir)).expect("read dir").count();
        println!("{dir}/: {n} PNGs");
    }
    Ok(())
}
