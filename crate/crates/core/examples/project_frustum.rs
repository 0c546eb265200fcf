//! Projects lidar points into the camera image and keeps the ones the
//! camera can see.
//!
//! cargo run --example project_frustum

use bevnav::ingest::{
    frustum_filter, in_frustum, project_point, CalibrationSet, LabeledCloud, LabeledPoint,
};
use bevnav::scenes::kitti_like_calibration;
use nalgebra::Vector3;

fn main() -> bevnav::Result<()> {
    let calib = kitti_like_calibration();
    // Calibration files round-trip through the odometry text layout.
    let text = calib.to_kitti_string("P2");
    print!("{text}");
    let calib = CalibrationSet::from_kitti_str(&text, "P2", 1241, 376)?;

    let probes = [
        ("ahead", Vector3::new(10.0, 0.0, -1.0)),
        ("ahead-left", Vector3::new(10.0, 5.0, 0.0)),
        ("far left", Vector3::new(5.0, 20.0, 0.0)),
        ("behind", Vector3::new(-10.0, 0.0, 0.0)),
    ];
    for (name, x) in &probes {
        match project_point(x, &calib) {
            Ok(ip) => println!(
                "{name:<11} u={:8.2} v={:8.2} depth={:6.2} visible={}",
                ip.u,
                ip.v,
                ip.depth,
                in_frustum(x, &calib)
            ),
            Err(e) => println!("{name:<11} {e}"),
        }
    }

    let cloud: LabeledCloud = probes
        .iter()
        .map(|(_, x)| LabeledPoint::new(x.x as f32, x.y as f32, x.z as f32, 40))
        .collect();
    let visible = frustum_filter(&cloud, &calib);
    println!(
        "{} of {} points inside the camera frustum",
        visible.len(),
        cloud.len()
    );
    Ok(())
}
