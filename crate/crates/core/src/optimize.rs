//! Particle swarm optimization and the SIR particle filter, driven by a
//! seeded random pool so runs are reproducible.
//!
//! All random draws happen on the calling thread, before any batch is handed
//! to the (possibly parallel) evaluation closure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::objective::ObjectiveConfig;
use crate::skeleton::SkeletonModel;

#[derive(Debug, Error, PartialEq)]
pub enum OptimizeError {
    #[error("weights sum to {0}, expected 1")]
    UnnormalizedWeights(f64),
    #[error("bad tracker config: {0}")]
    BadConfig(String),
}

/// Seeded source of uniforms drawn in blocks, with Box-Muller normals.
#[derive(Debug, Clone)]
pub struct RngPool {
    seed: u64,
    rng: ChaCha8Rng,
    pool: Vec<f64>,
    cursor: usize,
}

const DEFAULT_BLOCK: usize = 4096;

impl RngPool {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pool: Vec::new(),
            cursor: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generates the next `n` uniforms up front, discarding anything left
    /// in the current block.
    pub fn refill(&mut self, n: usize) {
        self.pool.clear();
        self.pool.extend((0..n).map(|_| self.rng.gen::<f64>()));
        self.cursor = 0;
    }

    pub fn remaining(&self) -> usize {
        self.pool.len() - self.cursor
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        if self.cursor == self.pool.len() {
            self.refill(DEFAULT_BLOCK);
        }
        let u = self.pool[self.cursor];
        self.cursor += 1;
        u
    }

    /// Two independent standard normals from two uniforms.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        // 1 - u lies in (0, 1], keeping the log finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }

    /// Fills `out` with standard normals; an odd tail drops the second
    /// value of its pair.
    pub fn fill_normal(&mut self, out: &mut [f64]) {
        let mut chunks = out.chunks_mut(2);
        for ch in &mut chunks {
            let (a, b) = self.normal_pair();
            ch[0] = a;
            if ch.len() > 1 {
                ch[1] = b;
            }
        }
    }
}

/// Gaussian perturbation of `best` with per-dimension std-devs, clamped by
/// `clamp`.
pub fn diffuse(best: &[f64], sigma: &[f64], rng: &mut RngPool, clamp: &dyn Fn(&mut [f64])) -> Vec<f64> {
    let mut noise = vec![0.0; best.len()];
    rng.fill_normal(&mut noise);
    let mut x: Vec<f64> = best
        .iter()
        .zip(sigma)
        .zip(&noise)
        .map(|((&b, &s), &n)| if s == 0.0 { b } else { b + s * n })
        .collect();
    clamp(&mut x);
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsoParams {
    pub particles: usize,
    pub iterations: usize,
    /// Inertia at the first iteration.
    pub omega: f64,
    /// Inertia at the last iteration, interpolated linearly; constant when
    /// absent.
    pub omega_end: Option<f64>,
    pub c1: f64,
    pub c2: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            particles: 96,
            iterations: 10,
            omega: 0.8,
            omega_end: Some(0.4),
            c1: 2.05 * 0.72,
            c2: 2.05 * 0.72,
        }
    }
}

impl PsoParams {
    /// Fast-converging schedule for static benchmark functions: 96
    /// particles, 20 iterations, inertia falling from 0.3 to 0.
    pub fn sphere_benchmark() -> Self {
        Self {
            particles: 96,
            iterations: 20,
            omega: 0.3,
            omega_end: Some(0.0),
            ..Self::default()
        }
    }

    pub fn omega_at(&self, k: usize) -> f64 {
        match self.omega_end {
            Some(end) if self.iterations > 1 => {
                self.omega + (end - self.omega) * k as f64 / (self.iterations - 1) as f64
            }
            _ => self.omega,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub p_best: Vec<f64>,
    pub f_best: f64,
}

/// Synchronous global-best swarm.
#[derive(Debug, Clone, PartialEq)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub g: Vec<f64>,
    pub f_g: f64,
}

impl Swarm {
    /// Particles at the given positions with zero velocity and no best yet.
    pub fn new(positions: Vec<Vec<f64>>) -> Self {
        let dims = positions.first().map_or(0, |p| p.len());
        let g = positions.first().cloned().unwrap_or_default();
        Self {
            particles: positions
                .into_iter()
                .map(|x| Particle { v: vec![0.0; dims], p_best: x.clone(), x, f_best: f64::NEG_INFINITY })
                .collect(),
            g,
            f_g: f64::NEG_INFINITY,
        }
    }

    pub fn positions(&self) -> Vec<Vec<f64>> {
        self.particles.iter().map(|p| p.x.clone()).collect()
    }

    /// Takes scores of the current positions; replaces personal and global
    /// bests only on strict improvement.
    pub fn update_bests(&mut self, scores: &[f64]) {
        assert_eq!(scores.len(), self.particles.len(), "one score per particle");
        for (p, &f) in self.particles.iter_mut().zip(scores) {
            if f > p.f_best {
                p.f_best = f;
                p.p_best.clone_from(&p.x);
            }
        }
        for p in &self.particles {
            if p.f_best > self.f_g {
                self.f_g = p.f_best;
                self.g.clone_from(&p.p_best);
            }
        }
    }

    /// Velocity and position update with fresh `r1`, `r2` per particle and
    /// dimension, followed by clamping.
    pub fn step(&mut self, omega: f64, c1: f64, c2: f64, rng: &mut RngPool, clamp: &dyn Fn(&mut [f64])) {
        for p in &mut self.particles {
            for d in 0..p.x.len() {
                let r1 = rng.uniform();
                let r2 = rng.uniform();
                p.v[d] = omega * p.v[d] + c1 * r1 * (p.p_best[d] - p.x[d]) + c2 * r2 * (self.g[d] - p.x[d]);
                p.x[d] += p.v[d];
            }
            clamp(&mut p.x);
        }
    }
}

/// One full PSO iteration: bests from `scores`, then the move.
pub fn pso_iteration(
    swarm: &mut Swarm,
    scores: &[f64],
    omega: f64,
    c1: f64,
    c2: f64,
    rng: &mut RngPool,
    clamp: &dyn Fn(&mut [f64]),
) {
    swarm.update_bests(scores);
    swarm.step(omega, c1, c2, rng, clamp);
}

/// Runs `params.iterations` rounds of batch evaluation and update starting
/// from `initial`; returns the global best and its score. Costs
/// `particles * iterations` evaluations.
pub fn pso_optimize(
    initial: Vec<Vec<f64>>,
    params: &PsoParams,
    rng: &mut RngPool,
    clamp: &dyn Fn(&mut [f64]),
    eval: &mut dyn FnMut(&[Vec<f64>]) -> Vec<f64>,
) -> (Vec<f64>, f64) {
    let mut swarm = Swarm::new(initial);
    for k in 0..params.iterations {
        let scores = eval(&swarm.positions());
        pso_iteration(&mut swarm, &scores, params.omega_at(k), params.c1, params.c2, rng, clamp);
    }
    (swarm.g, swarm.f_g)
}

/// One tracking step: particle 0 sits on `prev_best`, the others are
/// diffused around it.
pub fn pso_track_frame(
    prev_best: &[f64],
    sigma: &[f64],
    params: &PsoParams,
    rng: &mut RngPool,
    clamp: &dyn Fn(&mut [f64]),
    eval: &mut dyn FnMut(&[Vec<f64>]) -> Vec<f64>,
) -> (Vec<f64>, f64) {
    if params.iterations == 0 || params.particles == 0 {
        let f = eval(&[prev_best.to_vec()])[0];
        return (prev_best.to_vec(), f);
    }
    let mut init = Vec::with_capacity(params.particles);
    init.push(prev_best.to_vec());
    for _ in 1..params.particles {
        init.push(diffuse(prev_best, sigma, rng, clamp));
    }
    pso_optimize(init, params, rng, clamp, eval)
}

/// Weighted particle population.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl ParticleSet {
    /// `n` copies of `x` with uniform weights.
    pub fn new(x: &[f64], n: usize) -> Self {
        Self {
            particles: vec![x.to_vec(); n],
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weighted_mean(&self) -> Vec<f64> {
        let dims = self.particles.first().map_or(0, |p| p.len());
        let mut m = vec![0.0; dims];
        for (p, &w) in self.particles.iter().zip(&self.weights) {
            for (acc, v) in m.iter_mut().zip(p) {
                *acc += w * v;
            }
        }
        m
    }
}

/// Unnormalized observation weight for score `f`.
pub fn observation_weight(f: f64, sigma_z: f64) -> f64 {
    (-(1.0 - f).powi(2) / (sigma_z * sigma_z)).exp() / (sigma_z * (std::f64::consts::TAU).sqrt())
}

/// Normalized weights from scores. Computed in the log domain so tiny
/// `sigma_z` does not underflow; the ratios equal those of
/// [`observation_weight`]. Returns `None` when no weight is usable.
pub fn normalized_weights(scores: &[f64], sigma_z: f64) -> Option<Vec<f64>> {
    let logs: Vec<f64> = scores.iter().map(|&f| -(1.0 - f).powi(2) / (sigma_z * sigma_z)).collect();
    let max = logs.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut w: Vec<f64> = logs.iter().map(|&l| if l.is_finite() { (l - max).exp() } else { 0.0 }).collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    Some(w)
}

/// Indices chosen by systematic resampling with first pointer `u1` in
/// `[0, 1/N)`.
pub fn systematic_indices(weights: &[f64], u1: f64) -> Vec<usize> {
    let n = weights.len();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    let mut c = weights.first().copied().unwrap_or(0.0);
    for j in 0..n {
        let u = u1 + j as f64 / n as f64;
        while u > c && i + 1 < n {
            i += 1;
            c += weights[i];
        }
        out.push(i);
    }
    out
}

/// Systematic resampling; every output weight is `1/N`.
pub fn pf_resample(ps: &ParticleSet, rng: &mut RngPool) -> Result<ParticleSet, OptimizeError> {
    let total: f64 = ps.weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 || ps.weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(OptimizeError::UnnormalizedWeights(total));
    }
    let n = ps.len();
    let u1 = rng.uniform() / n as f64;
    let idx = systematic_indices(&ps.weights, u1);
    Ok(ParticleSet {
        particles: idx.iter().map(|&i| ps.particles[i].clone()).collect(),
        weights: vec![1.0 / n as f64; n],
    })
}

/// Outcome of one filter step.
#[derive(Debug, Clone, PartialEq)]
pub struct PfStep {
    pub estimate: Vec<f64>,
    /// Best single-particle score, for reporting.
    pub best_score: f64,
    /// Set when every weight vanished and uniform weights were used.
    pub weights_reset: bool,
    /// Normalized weights before resampling.
    pub weights: Vec<f64>,
}

/// Predict, weight, estimate (weighted mean), resample.
pub fn pf_track_frame(
    ps: &mut ParticleSet,
    sigma: &[f64],
    sigma_z: f64,
    rng: &mut RngPool,
    clamp: &dyn Fn(&mut [f64]),
    eval: &mut dyn FnMut(&[Vec<f64>]) -> Vec<f64>,
) -> PfStep {
    for p in ps.particles.iter_mut() {
        *p = diffuse(p, sigma, rng, clamp);
    }
    let scores = eval(&ps.particles);
    let n = ps.len();
    let (weights, reset) = match normalized_weights(&scores, sigma_z) {
        Some(w) => (w, false),
        None => (vec![1.0 / n as f64; n], true),
    };
    ps.weights.clone_from(&weights);
    let mut estimate = ps.weighted_mean();
    clamp(&mut estimate);
    let best_score = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    *ps = pf_resample(ps, rng).expect("weights were just normalized");
    PfStep { estimate, best_score, weights_reset: reset, weights }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Pso,
    Pf,
}

/// Diffusion std-devs: one value for every DoF, or one per DoF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sigma {
    Scalar(f64),
    PerDof(Vec<f64>),
}

impl Sigma {
    pub fn resolve(&self, dofs: usize) -> Result<Vec<f64>, OptimizeError> {
        let v = match self {
            Sigma::Scalar(s) => vec![*s; dofs],
            Sigma::PerDof(v) if v.len() == dofs => v.clone(),
            Sigma::PerDof(v) => {
                return Err(OptimizeError::BadConfig(format!("sigma has {} values, model has {dofs} DoF", v.len())))
            }
        };
        if v.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(OptimizeError::BadConfig("sigma values must be finite and >= 0".into()));
        }
        Ok(v)
    }

    /// Separate std-devs for root translation (mm) and rotations (rad).
    pub fn split(model: &SkeletonModel, translation: f64, rotation: f64) -> Sigma {
        let mut v = Vec::with_capacity(model.dof_count());
        for b in model.bones() {
            for d in &b.dof {
                v.push(if d.is_translation() { translation } else { rotation });
            }
        }
        Sigma::PerDof(v)
    }
}

/// Tracker configuration as stored in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub algorithm: Algorithm,
    pub particles: usize,
    pub iterations: usize,
    pub omega: f64,
    pub omega_end: Option<f64>,
    pub c1: f64,
    pub c2: f64,
    pub sigma: Sigma,
    pub sigma_z: f64,
    pub seed: u64,
    pub objective: ObjectiveConfig,
}

/// Default diffusion for the bundled model: 20 mm root translation and
/// 0.08 rad per joint angle.
pub const DEFAULT_SIGMA_T: f64 = 20.0;
pub const DEFAULT_SIGMA_R: f64 = 0.08;

impl Default for TrackerConfig {
    fn default() -> Self {
        let pso = PsoParams::default();
        Self {
            algorithm: Algorithm::Pso,
            particles: pso.particles,
            iterations: pso.iterations,
            omega: pso.omega,
            omega_end: pso.omega_end,
            c1: pso.c1,
            c2: pso.c2,
            sigma: Sigma::split(&SkeletonModel::default_human(), DEFAULT_SIGMA_T, DEFAULT_SIGMA_R),
            sigma_z: 0.1,
            seed: 1,
            objective: ObjectiveConfig::default(),
        }
    }
}

impl TrackerConfig {
    pub fn from_json(text: &str) -> Result<Self, OptimizeError> {
        let cfg: TrackerConfig = serde_json::from_str(text).map_err(|e| OptimizeError::BadConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), OptimizeError> {
        let bad = |m: &str| Err(OptimizeError::BadConfig(m.to_string()));
        if self.particles == 0 {
            return bad("particles must be >= 1");
        }
        if self.algorithm == Algorithm::Pf && !(self.sigma_z > 0.0) {
            return bad("sigma_z must be > 0");
        }
        if ![self.omega, self.c1, self.c2].iter().all(|v| v.is_finite()) {
            return bad("omega, c1 and c2 must be finite");
        }
        self.objective.validate().map_err(|e| OptimizeError::BadConfig(e.to_string()))?;
        Ok(())
    }

    pub fn pso_params(&self) -> PsoParams {
        PsoParams {
            particles: self.particles,
            iterations: self.iterations,
            omega: self.omega,
            omega_end: self.omega_end,
            c1: self.c1,
            c2: self.c2,
        }
    }

    /// Objective evaluations spent per frame.
    pub fn evaluations_per_frame(&self) -> usize {
        match self.algorithm {
            Algorithm::Pso => self.particles * self.iterations.max(1),
            Algorithm::Pf => self.particles,
        }
    }
}

/// Clamp closure for a model's joint limits.
pub fn limit_clamp(model: &SkeletonModel) -> impl Fn(&mut [f64]) + '_ {
    move |x: &mut [f64]| model.clamp_in_place(x)
}
