use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mocaplab::optimize::TrackerConfig;
use mocaplab::pipeline::{
    bench_evaluate_batch, evaluate_run, read_truth, synth_generate, track_sequence, FeatureParams, FeatureSource,
    PipelineError, SequenceDir, SequenceSpec, TrackOptions, TrackRun,
};
use mocaplab::{CameraRig, SkeletonModel};

#[derive(Parser)]
#[command(name = "mocaplab", version, about = "Markerless 3D human pose tracking")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render a synthetic sequence with ground truth.
    Synth {
        /// Sequence spec (JSON); omitted fields take defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Track a sequence directory.
    Track {
        #[arg(long)]
        rig: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        tracker: PathBuf,
        #[arg(long)]
        seq: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Drop frames that arrive while the tracker is busy.
        #[arg(long, value_name = "FPS")]
        realtime_sim: Option<f64>,
        /// Extract features from grayscale frames instead of the masks.
        #[arg(long)]
        full_vision: bool,
        /// Overrides the seed in the tracker file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Marker error of a run against ground truth.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Model file; defaults to the bundled model.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Time batch evaluation at 1, 2, 4, ... up to P workers.
    Bench {
        #[arg(long, default_value_t = 96)]
        particles: usize,
        #[arg(long, default_value_t = 10)]
        iters: usize,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Cmd) -> Result<(), PipelineError> {
    match cmd {
        Cmd::Synth { spec, out } => synth(spec.as_deref(), &out),
        Cmd::Track { rig, model, tracker, seq, out, realtime_sim, full_vision, seed } => {
            let rig = CameraRig::load(rig)?;
            let model = SkeletonModel::load(model)?;
            let mut cfg = TrackerConfig::from_json(&std::fs::read_to_string(tracker)?)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dir = SequenceDir::open(&seq, rig.len())?;
            let initial = read_truth(&seq.join("truth.csv"))?
                .into_iter()
                .next()
                .ok_or_else(|| PipelineError::MissingFrame("truth.csv has no frames".into()))?;
            let params = FeatureParams::default();
            let mut source: Box<dyn FeatureSource> = if full_vision {
                Box::new(dir.vision_features(&params)?)
            } else {
                Box::new(dir.mask_features(&params)?)
            };
            let opts = TrackOptions { workers: None, realtime_fps: realtime_sim };
            let run = track_sequence(&model, &rig, source.as_mut(), &initial, &cfg, &opts)?;
            run.write(&out)?;
            let ms: f64 = run.records.iter().map(|r| r.ms).sum();
            println!(
                "tracked {} of {} frames in {:.1} s -> {}",
                run.records.len(),
                dir.spec.frames,
                ms / 1e3,
                out.display()
            );
            Ok(())
        }
        Cmd::Eval { run, truth, model } => {
            let model = match model {
                Some(p) => SkeletonModel::load(p)?,
                None => SkeletonModel::default_human(),
            };
            let tr = TrackRun::read(&run)?;
            let report = evaluate_run(&tr, &read_truth(&truth)?, &model)?;
            std::fs::write(run.join("errors.json"), serde_json::to_string_pretty(&report)?)?;
            println!(
                "frames {}  mean {:.2} mm  std {:.2} mm  ({:.2}% of model height)",
                report.frames,
                report.mean,
                report.std,
                100.0 * report.mean / model.height()
            );
            Ok(())
        }
        Cmd::Bench { particles, iters, workers } => {
            let max = mocaplab::objective::worker_count(workers);
            let mut ps: Vec<usize> = std::iter::successors(Some(1), |p| Some(p * 2)).take_while(|&p| p < max).collect();
            ps.push(max);
            println!("{:>7} {:>10} {:>7} {:>6} {:>10}", "workers", "ms", "S", "E", "karp-flatt");
            for r in bench_evaluate_batch(particles, iters, &ps, 1)? {
                let kf = r.karp_flatt.map_or("-".to_string(), |e| format!("{e:.3}"));
                println!("{:>7} {:>10.1} {:>7.2} {:>6.2} {:>10}", r.workers, r.t_parallel_ms, r.speedup, r.efficiency, kf);
            }
            Ok(())
        }
    }
}

fn synth(spec: Option<&Path>, out: &Path) -> Result<(), PipelineError> {
    let spec: SequenceSpec = match spec {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => SequenceSpec::default(),
    };
    let model = SkeletonModel::default_human();
    let seq = synth_generate(&spec, &model)?;
    seq.write(out)?;
    std::fs::write(out.join("tracker.json"), spec.calibrated_tracker(&model)?.to_json())?;
    println!("{} frames x {} cameras -> {}", spec.frames, seq.rig.len(), out.display());
    Ok(())
}
