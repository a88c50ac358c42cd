// Scores the true pose of a synthetic frame against poses with one hip
// rotated further and further away.

use mocaplab::objective::{Evaluator, ObjectiveConfig};
use mocaplab::pipeline::{synth_generate, FeatureParams, SequenceSpec};
use mocaplab::skeleton::Dof;
use mocaplab::SkeletonModel;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = SkeletonModel::default_human();
    let seq = synth_generate(&SequenceSpec { frames: 1, ..SequenceSpec::default() }, &model)?;
    let features = seq.features(&FeatureParams::default())?.remove(0);
    let eval = Evaluator::new(model.clone(), &seq.rig.cameras, ObjectiveConfig::default(), 1)?;
    let hip = model.state_index("left_hip", Dof::Ry).ok_or("no left_hip.r_y")?;
    for deg in [0.0, 5.0, 10.0, 20.0, 40.0] {
        let mut pose = seq.truth[0].clone();
        pose.0[hip] += f64::to_radians(deg);
        println!("hip +{deg:>4.0} deg: score {:.4}", eval.score(&model.clamp_limits(&pose), &features));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
