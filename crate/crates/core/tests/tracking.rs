use mocaplab::objective::{components, Evaluator, FitnessComponents, ObjectiveConfig};
use mocaplab::optimize::{normalized_weights, systematic_indices, Algorithm, RngPool, TrackerConfig};
use mocaplab::pipeline::{
    evaluate_run, synth_generate, track_sequence, FeatureParams, PreparedFeatures, SequenceSpec, SyntheticSequence,
    TrackOptions,
};
use mocaplab::skeleton::Dof;
use mocaplab::SkeletonModel;

fn short_walk(frames: usize) -> (SkeletonModel, SyntheticSequence) {
    let model = SkeletonModel::default_human();
    let seq = synth_generate(&SequenceSpec { frames, ..SequenceSpec::default() }, &model).unwrap();
    (model, seq)
}

fn run_csv(model: &SkeletonModel, seq: &SyntheticSequence, cfg: &TrackerConfig, workers: usize) -> String {
    let mut src = PreparedFeatures(seq.features(&FeatureParams::default()).unwrap());
    let opts = TrackOptions { workers: Some(workers), realtime_fps: None };
    track_sequence(model, &seq.rig, &mut src, &seq.truth[0], cfg, &opts)
        .unwrap()
        .to_csv_string()
        .unwrap()
}

#[test]
fn synthesis_is_deterministic() {
    let (model, a) = short_walk(3);
    let b = synth_generate(&a.spec, &model).unwrap();
    assert_eq!(a.truth, b.truth);
    assert_eq!(a.model_images, b.model_images);
}

#[test]
fn worker_count_does_not_change_the_run() {
    let (model, seq) = short_walk(4);
    for algorithm in [Algorithm::Pso, Algorithm::Pf] {
        let cfg = TrackerConfig { algorithm, seed: 5, ..seq.spec.calibrated_tracker(&model).unwrap() };
        assert_eq!(run_csv(&model, &seq, &cfg, 1), run_csv(&model, &seq, &cfg, 3), "{algorithm:?}");
    }
}

#[test]
fn tracking_beats_standing_still() {
    let (model, seq) = short_walk(8);
    let cfg = seq.spec.calibrated_tracker(&model).unwrap();
    let mut src = PreparedFeatures(seq.features(&FeatureParams::default()).unwrap());
    let run = track_sequence(&model, &seq.rig, &mut src, &seq.truth[0], &cfg, &TrackOptions::default()).unwrap();
    let err = evaluate_run(&run, &seq.truth, &model).unwrap().mean;
    assert!(err < 0.05 * model.height(), "{err}");
}

#[test]
fn truth_scores_high_and_beats_hip_perturbation() {
    let (model, seq) = short_walk(30);
    let features = seq.features(&FeatureParams::default()).unwrap();
    let eval = Evaluator::new(model.clone(), &seq.rig.cameras, ObjectiveConfig::default(), 1).unwrap();
    let hip = model.state_index("left_hip", Dof::Ry).unwrap();
    for t in (0..30).step_by(6) {
        let truth = &seq.truth[t];
        let mut off = truth.clone();
        off.0[hip] += 10f64.to_radians();
        let s = eval.score(truth, &features[t]);
        assert!(s >= 0.95, "frame {t}: {s}");
        assert!(s > eval.score(&model.clamp_limits(&off), &features[t]));
    }
}

#[test]
fn fused_components_equal_two_pass() {
    let (model, seq) = short_walk(2);
    let features = seq.features(&FeatureParams::default()).unwrap();
    let eval = Evaluator::new(model.clone(), &seq.rig.cameras, ObjectiveConfig::default(), 1).unwrap();
    let mut pose = seq.truth[1].clone();
    pose.0[0] += 35.0;
    pose.0[10] -= 0.2;
    let fused = eval.pose_components(&pose, &features[1]).unwrap();
    let imgs = eval.render(&pose).unwrap();
    let two_pass: Vec<FitnessComponents> = imgs
        .iter()
        .zip(features[1].refs.iter().zip(&features[1].rois))
        .map(|(img, (r, roi))| components(img, r, roi).unwrap())
        .collect();
    assert_eq!(fused, two_pass);
}

#[test]
fn systematic_copy_counts_follow_weights() {
    let mut rng = RngPool::new(9);
    let raw: Vec<f64> = (0..50).map(|_| rng.uniform()).collect();
    let w = normalized_weights(&raw, 0.3).unwrap();
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let n = w.len() as f64;
    let reps = 2000;
    let mut total = vec![0usize; w.len()];
    for r in 0..reps {
        let mut counts = vec![0usize; w.len()];
        for i in systematic_indices(&w, (r as f64 + 0.5) / reps as f64 / n) {
            counts[i] += 1;
        }
        for (i, c) in counts.iter().enumerate() {
            // every draw gives floor or ceil of N w
            assert!((*c as f64 - n * w[i]).abs() < 1.0 + 1e-9);
            total[i] += c;
        }
    }
    for (c, wi) in total.iter().zip(&w) {
        let mean = *c as f64 / reps as f64;
        assert!((mean - n * wi).abs() <= 0.01 * n * wi + 1.0 / reps as f64, "{mean} vs {}", n * wi);
    }
}
