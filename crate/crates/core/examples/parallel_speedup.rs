// Parallel-performance metrics: a worked example, then measured batch
// evaluation speedup on this machine.

use mocaplab::pipeline::{bench_evaluate_batch, perf_metrics};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let r = perf_metrics(100.0, 25.0, 8, Some(0.1), Some(0.13), Some(11.0))?;
    println!(
        "T_s 100 ms, T_p 25 ms, p 8: S {} E {} Karp-Flatt {:.4} Gustafson {:.2} in flight {:.2}",
        r.speedup,
        r.efficiency,
        r.karp_flatt.unwrap_or(f64::NAN),
        r.gustafson.unwrap_or(f64::NAN),
        r.little_parallelism.unwrap_or(f64::NAN)
    );
    for r in bench_evaluate_batch(96, 2, &[1, 2, 4], 1)? {
        println!("p {}: {:.1} ms, S {:.2}, E {:.2}", r.workers, r.t_parallel_ms, r.speedup, r.efficiency);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
