// Bootstrap particle filter following a 1-D random walk, plus the
// systematic resampling copy counts for a fixed weight vector.

use mocaplab::optimize::{pf_track_frame, systematic_indices, ParticleSet, RngPool};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = RngPool::new(3);
    let mut ps = ParticleSet::new(&[0.0], 500);
    let mut truth = 0.0;
    for t in 0..20 {
        truth += 0.5 * (t as f64 * 0.7).sin();
        let mut eval = |xs: &[Vec<f64>]| -> Vec<f64> { xs.iter().map(|x| (-(x[0] - truth).abs()).exp()).collect() };
        let step = pf_track_frame(&mut ps, &[0.6], 0.1, &mut rng, &|_: &mut [f64]| {}, &mut eval);
        if t % 5 == 4 {
            println!("t {t:>2}: truth {truth:6.3}  estimate {:6.3}", step.estimate[0]);
        }
    }

    let w = [0.1, 0.2, 0.05, 0.4, 0.25];
    let mut counts = [0usize; 5];
    for i in systematic_indices(&w, 0.013) {
        counts[i] += 1;
    }
    println!("copies for weights {w:?}: {counts:?}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
