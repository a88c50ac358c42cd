// Global-best PSO maximizing a negated 5-D sphere function.

use mocaplab::optimize::{pso_optimize, PsoParams, RngPool};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let optimum = [1.0, -2.0, 0.5, 3.0, -1.5];
    let params = PsoParams::sphere_benchmark();
    let clamp = |x: &mut [f64]| x.iter_mut().for_each(|v| *v = v.clamp(-10.0, 10.0));
    let mut eval = |xs: &[Vec<f64>]| -> Vec<f64> {
        xs.iter()
            .map(|x| -x.iter().zip(&optimum).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .collect()
    };
    for seed in 0..3 {
        let mut rng = RngPool::new(seed);
        let init = (0..params.particles)
            .map(|_| (0..5).map(|_| 20.0 * rng.uniform() - 10.0).collect())
            .collect();
        let (best, score) = pso_optimize(init, &params, &mut rng, &clamp, &mut eval);
        let err = best.iter().zip(&optimum).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("seed {seed}: f = {score:.2e}, max |x - x*| = {err:.2e}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
