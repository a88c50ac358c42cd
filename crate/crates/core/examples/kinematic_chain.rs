// Forward kinematics of the bundled skeleton: pose a few joints, walk the
// chain and print where the virtual markers end up.

use mocaplab::skeleton::Dof;
use mocaplab::{Axis, Mat4, Point3, SkeletonModel};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = SkeletonModel::default_human();
    println!("{} bones, {} DoF, height {:.0} mm", model.bones().len(), model.dof_count(), model.height());

    let mut pose = model.zero_pose();
    pose.0[model.state_index("pelvis", Dof::Tz).ok_or("no pelvis.t_z")?] = 950.0;
    pose.0[model.state_index("left_hip", Dof::Ry).ok_or("no left_hip.r_y")?] = -0.4;
    pose.0[model.state_index("left_knee", Dof::Ry).ok_or("no left_knee.r_y")?] = 0.8;

    let globals = model.pose_globals(&pose)?;
    for (bone, w) in model.bones().iter().zip(&globals).take(5) {
        let o = w.translation_part();
        println!("{:>14}: origin ({:7.1}, {:7.1}, {:7.1})", bone.name, o.x, o.y, o.z);
    }
    let markers = model.marker_positions(&pose)?;
    println!("{} markers, first at {:?}", markers.len(), markers[0].to_array());

    // The fused translate-rotate matrix is the explicit product.
    let t = Point3::new(10.0, -20.0, 30.0);
    let fused = Mat4::fused_trxyz(t, 0.3, -0.2, 0.1);
    let explicit = Mat4::translation(t)
        .multiply(&Mat4::rotation(Axis::X, 0.3))
        .multiply(&Mat4::rotation(Axis::Y, -0.2))
        .multiply(&Mat4::rotation(Axis::Z, 0.1));
    println!("fused vs explicit: {:.1e}", fused.max_abs_diff(&explicit));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
