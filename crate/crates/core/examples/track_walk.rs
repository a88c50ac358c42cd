// Closed loop on a short synthetic walk: generate, track with PSO and
// compare against the ground truth and a tracker that never moves.

use mocaplab::pipeline::{evaluate, evaluate_run, synth_generate, track_sequence, FeatureParams, PreparedFeatures, SequenceSpec, TrackOptions};
use mocaplab::SkeletonModel;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    walk(12)
}

fn walk(frames: usize) -> Result<(), Box<dyn std::error::Error>> {
    let model = SkeletonModel::default_human();
    let spec = SequenceSpec { frames, ..SequenceSpec::default() };
    let seq = synth_generate(&spec, &model)?;
    let mut features = PreparedFeatures(seq.features(&FeatureParams::default())?);
    let cfg = spec.calibrated_tracker(&model)?;

    let run = track_sequence(&model, &seq.rig, &mut features, &seq.truth[0], &cfg, &TrackOptions::default())?;
    let report = evaluate_run(&run, &seq.truth, &model)?;
    let frozen = vec![seq.truth[0].clone(); frames];
    let idx: Vec<usize> = (0..frames).collect();
    let baseline = evaluate(&idx, &frozen, &seq.truth, &model, 1.0, 1.0)?;
    let secs: f64 = run.records.iter().map(|r| r.ms).sum::<f64>() / 1e3;
    println!(
        "{frames} frames in {secs:.1} s: mean marker error {:.1} mm (frozen pose {:.1} mm, height {:.0} mm)",
        report.mean,
        baseline.mean,
        model.height()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    // frame count from the command line, e.g. `-- 100`
    match std::env::args().nth(1) {
        Some(n) => walk(n.parse()?),
        None => run_example(),
    }
}
