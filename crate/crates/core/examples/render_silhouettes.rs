// Renders the model into a four-camera ring and writes the label images
// as PGM files.

use mocaplab::pipeline::{MotionScript, SceneSpec};
use mocaplab::render::render_pose;
use mocaplab::imaging::pgm;
use mocaplab::SkeletonModel;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = SkeletonModel::default_human();
    let rig = SceneSpec::default().rig()?;
    let pose = MotionScript::walk().pose_at(&model, 12)?;
    let globals = model.pose_globals(&pose)?;
    let out = std::env::temp_dir().join("mocaplab_render");
    std::fs::create_dir_all(&out)?;
    for (c, cam) in rig.cameras.iter().enumerate() {
        let img = render_pose(&model, &globals, &mocaplab::render::CameraView::new(*cam))?;
        let area = img.data.iter().filter(|&&v| v != 0).count();
        let edges = img.data.iter().filter(|&&v| v & mocaplab::render::EDGE_FLAG != 0).count();
        println!("camera {c}: {area} model pixels, {edges} edge pixels");
        pgm::write(out.join(format!("cam{c}.pgm")), &img.to_debug_gray())?;
    }
    println!("images in {}", out.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
