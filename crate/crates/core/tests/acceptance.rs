// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit when
// any criterion fails.

mod common;

use std::time::Instant;

use common::{brute_distance, exhaustive_fill, random_mask, random_pose, recursive_globals};
use mocaplab::camera::undistorted_to_distorted;
use mocaplab::imaging::{distance_map, Metric, RoiRect};
use mocaplab::objective::{components, worker_count, Evaluator, FitnessComponents, ObjectiveConfig};
use mocaplab::optimize::{
    limit_clamp, normalized_weights, pf_track_frame, pso_optimize, systematic_indices, Algorithm, ParticleSet, PsoParams,
    RngPool, TrackerConfig,
};
use mocaplab::pipeline::{
    bench_evaluate_batch, evaluate, evaluate_run, perf_metrics, synth_generate, track_sequence, FeatureParams,
    PreparedFeatures, SequenceSpec, SyntheticSequence, TrackOptions,
};
use mocaplab::render::{rasterize_pose, EncodedImage, ScreenTriangle};
use mocaplab::skeleton::Dof;
use mocaplab::{Axis, Mat4, Point3, PoseState, SkeletonModel, TsaiCamera};
use mocaplab::objective::FrameFeatures;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRACK_SEEDS: u64 = 10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn rasterizer_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (w, h) = (64, 64);
    let mut mismatches = 0;
    for i in 0..200 {
        let mut c = || rng.gen_range(-16.0..80.0);
        let t = ScreenTriangle { v: [[c(), c()], [c(), c()], [c(), c()]], label: 1 + (i % 120) as u8, depth: 0.0 };
        let mut img = EncodedImage::new(w, h);
        rasterize_pose(&[t], &[], &RoiRect::full(w, h), &mut img, None);
        let got = img.data.iter().map(|&b| b != 0);
        mismatches += got.zip(exhaustive_fill(&t, w, h)).filter(|(a, b)| a != b).count();
    }
    let el = secs(t0);
    outcome(mismatches == 0 && el < 5.0, format!("200 triangles, {mismatches} mismatched pixels, {el:.2} s (< 5 s)"))
}

fn distance_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_int = 0.0f64;
    let mut worst_real = 0.0f64;
    for _ in 0..50 {
        let density = rng.gen_range(0.005..0.2);
        let mut edges = random_mask(32, 32, density, &mut rng);
        edges.set(rng.gen_range(0..32), rng.gen_range(0..32), true);
        for m in [Metric::Euclidean, Metric::CityBlock, Metric::Chessboard, Metric::Quasi] {
            let got = distance_map(&edges, m).data;
            let err = got.iter().zip(brute_distance(&edges, m)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            match m {
                Metric::CityBlock | Metric::Chessboard => worst_int = worst_int.max(err),
                _ => worst_real = worst_real.max(err),
            }
        }
    }
    let el = secs(t0);
    outcome(
        worst_int == 0.0 && worst_real <= 1e-9 && el < 10.0,
        format!("50 masks x 4 metrics, integer max err {worst_int}, real max err {worst_real:.1e}, {el:.2} s (< 10 s)"),
    )
}

fn kinematic_oracle() -> Outcome {
    let model = SkeletonModel::default_human();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut chain = 0.0f64;
    let mut fused = 0.0f64;
    for _ in 0..1000 {
        let pose = random_pose(&model, &mut rng);
        let locals = model.local_matrices(&model.expand_state(&pose).expect("pose has model length"));
        for (a, b) in model.global_matrices(&locals).iter().zip(recursive_globals(&model, &locals)) {
            chain = chain.max(a.max_abs_diff(&b));
        }
        let t = Point3::new(rng.gen_range(-3e3..3e3), rng.gen_range(-3e3..3e3), rng.gen_range(-3e3..3e3));
        let (a, b, g) = (rng.gen_range(-3.2..3.2), rng.gen_range(-3.2..3.2), rng.gen_range(-3.2..3.2));
        let explicit = Mat4::translation(t)
            .multiply(&Mat4::rotation(Axis::X, a))
            .multiply(&Mat4::rotation(Axis::Y, b))
            .multiply(&Mat4::rotation(Axis::Z, g));
        fused = fused.max(Mat4::fused_trxyz(t, a, b, g).max_abs_diff(&explicit));
    }
    outcome(
        chain < 1e-9 && fused < 1e-12,
        format!("1000 poses, chain max err {chain:.1e} (< 1e-9), fused max err {fused:.1e} (< 1e-12)"),
    )
}

fn tsai_projection() -> Outcome {
    let mut cam = TsaiCamera {
        r_x: 0.0,
        r_y: 0.0,
        r_z: 0.0,
        t_x: 0.0,
        t_y: 0.0,
        t_z: 0.0,
        f: 100.0,
        kappa: 0.0,
        c_x: 320.0,
        c_y: 240.0,
        s_x: 1.0,
        d_px: 0.01,
        d_py: 0.01,
        img_w: 640,
        img_h: 480,
    };
    let worked = cam.project(Point3::new(1.0, 2.0, 100.0)).expect("in front of the camera");
    let worked_err = (worked.x - 420.0).abs().max((worked.y - 440.0).abs());
    let mut on_axis = true;
    for k in [-0.02, 0.0, 0.01] {
        cam.kappa = k;
        let p = cam.project(Point3::new(0.0, 0.0, 750.0)).expect("in front of the camera");
        on_axis &= p.x == cam.c_x && p.y == cam.c_y;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut residual = 0.0f64;
    for _ in 0..1000 {
        let r_u = rng.gen_range(0.01..10.0f64);
        let bound = 0.5 / (r_u * r_u);
        let k = rng.gen_range(-bound..bound) * 0.999;
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let (xu, yu) = (r_u * phi.cos(), r_u * phi.sin());
        let (xd, yd) = undistorted_to_distorted(k, xu, yu);
        let s = 1.0 + k * (xd * xd + yd * yd);
        residual = residual.max((xd * s - xu).abs()).max((yd * s - yu).abs());
    }
    outcome(
        on_axis && worked_err < 1e-9 && residual < 1e-9,
        format!(
            "on-axis exact: {on_axis}, worked example ({:.3}, {:.3}) err {worked_err:.1e}, distortion residual {residual:.1e} mm",
            worked.x, worked.y
        ),
    )
}

struct Scene {
    model: SkeletonModel,
    seq: SyntheticSequence,
    features: Vec<FrameFeatures>,
    prep_s: f64,
}

fn objective_sanity(scene: &Scene) -> Outcome {
    let Scene { model, seq, features, .. } = scene;
    let eval = Evaluator::new(model.clone(), &seq.rig.cameras, ObjectiveConfig::default(), 1).expect("valid config");
    let hip = model.state_index("left_hip", Dof::Ry).expect("model has a left hip");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut frames: Vec<usize> = (0..seq.truth.len()).collect();
    for i in 0..20 {
        let j = rng.gen_range(i..frames.len());
        frames.swap(i, j);
    }
    let (mut min_truth, mut wins, mut exact) = (f64::INFINITY, 0, true);
    for &t in &frames[..20] {
        let truth = &seq.truth[t];
        let mut bent = truth.clone();
        bent.0[hip] += 10f64.to_radians();
        let bent = model.clamp_limits(&bent);
        let s = eval.score(truth, &features[t]);
        min_truth = min_truth.min(s);
        wins += (s > eval.score(&bent, &features[t])) as usize;
        for pose in [truth, &bent] {
            let fused = eval.pose_components(pose, &features[t]).expect("pose is valid");
            let imgs = eval.render(pose).expect("pose is valid");
            let two_pass: Vec<FitnessComponents> = imgs
                .iter()
                .zip(features[t].refs.iter().zip(&features[t].rois))
                .map(|(img, (r, roi))| components(img, r, roi).expect("matching sizes"))
                .collect();
            exact &= fused == two_pass;
        }
    }
    outcome(
        min_truth >= 0.95 && wins == 20 && exact,
        format!("20 frames, min truth score {min_truth:.4} (>= 0.95), truth beats +10 deg hip {wins}/20, fused == two-pass: {exact}"),
    )
}

fn pso_sphere() -> Outcome {
    let t0 = Instant::now();
    let params = PsoParams::sphere_benchmark();
    let mut errs = Vec::new();
    for seed in 0..30 {
        let mut rng = RngPool::new(seed);
        let init: Vec<Vec<f64>> = (0..params.particles)
            .map(|_| (0..5).map(|_| rng.uniform() * 10.24 - 5.12).collect())
            .collect();
        let mut eval = |xs: &[Vec<f64>]| -> Vec<f64> { xs.iter().map(|x| -x.iter().map(|v| v * v).sum::<f64>()).collect() };
        let (g, _) = pso_optimize(init, &params, &mut rng, &|_: &mut [f64]| {}, &mut eval);
        errs.push(g.iter().map(|v| v.abs()).fold(0.0, f64::max));
    }
    errs.sort_by(f64::total_cmp);
    let median = (errs[14] + errs[15]) / 2.0;
    let el = secs(t0);
    outcome(median < 1e-3 && el < 2.0, format!("30 seeds, median |g - x*|inf {median:.2e} (< 1e-3), {el:.3} s (< 2 s)"))
}

struct TrackStats {
    errors: Vec<f64>,
    seconds: f64,
    first_csv: String,
}

fn track_seeds(scene: &Scene, cfg: &TrackerConfig, workers: usize) -> TrackStats {
    let t0 = Instant::now();
    let mut errors = Vec::new();
    let mut first_csv = String::new();
    for seed in 0..TRACK_SEEDS {
        let run = track_once(scene, &TrackerConfig { seed, ..cfg.clone() }, workers);
        errors.push(evaluate_run(&run, &scene.seq.truth, &scene.model).expect("aligned frames").mean);
        if seed == 0 {
            first_csv = run.to_csv_string().expect("csv");
        }
    }
    TrackStats { errors, seconds: secs(t0), first_csv }
}

fn track_once(scene: &Scene, cfg: &TrackerConfig, workers: usize) -> mocaplab::pipeline::TrackRun {
    let mut src = PreparedFeatures(scene.features.clone());
    let opts = TrackOptions { workers: Some(workers), realtime_fps: None };
    track_sequence(&scene.model, &scene.seq.rig, &mut src, &scene.seq.truth[0], cfg, &opts).expect("tracking runs")
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn closed_loop(scene: &Scene, pso: &TrackStats) -> Outcome {
    let n = scene.seq.truth.len();
    let frozen = vec![scene.seq.truth[0].clone(); n];
    let idx: Vec<usize> = (0..n).collect();
    let baseline = evaluate(&idx, &frozen, &scene.seq.truth, &scene.model, 1.0, 1.0).expect("aligned").mean;
    let err = mean(&pso.errors);
    let limit = 0.05 * scene.model.height();
    let total = scene.prep_s + pso.seconds;
    outcome(
        err < limit && err < 0.2 * baseline && total < 120.0,
        format!(
            "mean marker error {err:.1} mm over {TRACK_SEEDS} seeds (< {limit:.1} mm and < {:.1} mm = 20% of frozen baseline {baseline:.1} mm), worst seed {:.1} mm, {total:.1} s (< 120 s)",
            0.2 * baseline,
            pso.errors.iter().copied().fold(0.0, f64::max)
        ),
    )
}

fn pf_vs_pso(scene: &Scene, cfg: &TrackerConfig, pso: &TrackStats, workers: usize) -> Outcome {
    let pf_cfg = TrackerConfig { algorithm: Algorithm::Pf, particles: 960, iterations: 1, ..cfg.clone() };
    let budget = (cfg.evaluations_per_frame(), pf_cfg.evaluations_per_frame());
    let pf = track_seeds(scene, &pf_cfg, workers);
    let (a, b) = (mean(&pso.errors), mean(&pf.errors));
    outcome(
        budget.0 == 960 && budget.1 == 960 && a <= b,
        format!("960 evaluations per frame: PSO {a:.1} mm <= PF {b:.1} mm over {TRACK_SEEDS} seeds, PF {:.1} s", pf.seconds),
    )
}

fn pf_mechanics(scene: &Scene) -> Outcome {
    let mut rng = RngPool::new(9);
    let scores: Vec<f64> = (0..100).map(|_| rng.uniform()).collect();
    let w = normalized_weights(&scores, 0.2).expect("positive weights");
    let reps = 10_000;
    let n = w.len() as f64;
    let mut totals = vec![0usize; w.len()];
    let mut floor_ceil = true;
    for r in 0..reps {
        // offsets stratified over [0, 1/N)
        let mut counts = vec![0usize; w.len()];
        for i in systematic_indices(&w, (r as f64 + 0.5) / reps as f64 / n) {
            counts[i] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            floor_ceil &= (c as f64 - n * w[i]).abs() < 1.0 + 1e-9;
            totals[i] += c;
        }
    }
    let worst = totals
        .iter()
        .zip(&w)
        .map(|(&c, &wi)| ((c as f64 / reps as f64 - n * wi).abs() - 1.0 / reps as f64).max(0.0) / (n * wi))
        .fold(0.0, f64::max);

    // weights inside a real filter run
    let Scene { model, seq, features, .. } = scene;
    let eval = Evaluator::new(model.clone(), &seq.rig.cameras, ObjectiveConfig::default(), worker_count(None)).expect("valid");
    let sigma = seq.spec.calibrated_tracker(model).expect("valid script").sigma.resolve(model.dof_count()).expect("sigma");
    let clamp = limit_clamp(model);
    let mut ps = ParticleSet::new(&seq.truth[0].0, 200);
    let mut sum_err = 0.0f64;
    for f in features.iter().take(20) {
        let mut score = |xs: &[Vec<f64>]| -> Vec<f64> {
            let poses: Vec<PoseState> = xs.iter().map(|x| PoseState(x.clone())).collect();
            eval.evaluate_batch(&poses, f).expect("matching features")
        };
        let step = pf_track_frame(&mut ps, &sigma, 0.1, &mut rng, &clamp, &mut score);
        sum_err = sum_err.max((step.weights.iter().sum::<f64>() - 1.0).abs());
    }
    outcome(
        worst <= 0.01 && floor_ceil && sum_err <= 1e-12,
        format!(
            "mean copies vs N*w over {reps} reps: worst deviation {:.3}% (<= 1%), floor/ceil every draw: {floor_ceil}, weight-sum error over 20 frames {sum_err:.1e} (<= 1e-12)",
            worst * 100.0
        ),
    )
}

fn determinism(scene: &Scene, cfg: &TrackerConfig, pso: &TrackStats, workers: usize) -> Outcome {
    let other = if workers == 1 { worker_count(None).max(4) } else { 1 };
    let csv = track_once(scene, &TrackerConfig { seed: 0, ..cfg.clone() }, other).to_csv_string().expect("csv");
    outcome(
        csv == pso.first_csv,
        format!("seed 0 run.csv with {workers} vs {other} workers: {}", if csv == pso.first_csv { "byte-identical" } else { "DIFFERENT" }),
    )
}

fn perf() -> Outcome {
    let r = perf_metrics(100.0, 25.0, 8, None, None, None).expect("valid input");
    let exact = r.speedup == 4.0 && r.efficiency == 0.5 && (r.karp_flatt.unwrap_or(f64::NAN) - 1.0 / 7.0).abs() < 1e-15;
    let bench = bench_evaluate_batch(96, 5, &[1, 2, 4], 1).expect("bench runs");
    let e4 = bench[2].efficiency;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let note = if e4 > 0.5 {
        String::new()
    } else {
        format!(" WARNING: E(4) <= 0.5 ({cores} core(s) available)")
    };
    outcome(
        exact,
        format!(
            "worked example S {} E {} e {:.6}; bench S(2) {:.2} S(4) {:.2} E(4) {:.2}{note}",
            r.speedup,
            r.efficiency,
            r.karp_flatt.unwrap_or(f64::NAN),
            bench[1].speedup,
            bench[2].speedup,
            e4
        ),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, title: &'static str, o: Outcome| {
        println!("{} {n:>2} {title}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, title, o));
    };

    report(1, "rasterizer oracle", rasterizer_oracle());
    report(2, "distance-map oracle", distance_oracle());
    report(3, "kinematic chain", kinematic_oracle());
    report(4, "Tsai projection", tsai_projection());

    let t0 = Instant::now();
    let model = SkeletonModel::default_human();
    let seq = synth_generate(&SequenceSpec::default(), &model).expect("default spec is valid");
    let features = seq.features(&FeatureParams::default()).expect("features");
    let scene = Scene { model, seq, features, prep_s: secs(t0) };

    report(5, "objective sanity", objective_sanity(&scene));
    report(6, "PSO sphere benchmark", pso_sphere());

    let workers = worker_count(None);
    let cfg = scene.seq.spec.calibrated_tracker(&scene.model).expect("valid script");
    let pso = track_seeds(&scene, &cfg, workers);
    report(7, "closed-loop tracking", closed_loop(&scene, &pso));
    report(8, "PSO vs PF at equal budget", pf_vs_pso(&scene, &cfg, &pso, workers));
    report(9, "particle filter mechanics", pf_mechanics(&scene));
    report(10, "determinism across worker counts", determinism(&scene, &cfg, &pso, workers));
    report(11, "parallel performance metrics", perf());

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("all {} criteria passed", results.len());
    } else {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
