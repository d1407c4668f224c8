//! Interacting particle system on the torus, integrated with Euler-Maruyama.
//!
//! dxᵢ = -V'(xᵢ)dt - (κ/N) Σⱼ W'(xᵢ - xⱼ) dt + √(2/β) dBᵢ
//!
//! The pairwise sum uses the trigonometric moments of the ensemble, so one
//! step costs O(N·n) for an n-mode interaction.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::TorusDensity;
use crate::error::{Error, Result};
use crate::grid::{wrap_angle, Grid, DEFAULT_GRID};
use crate::io;
use crate::model::Model;
use crate::potentials::Potential;

pub const DEFAULT_PARTICLES: usize = 500;
pub const DEFAULT_SDE_DT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    #[serde(flatten)]
    pub model: Model,
    #[serde(default = "default_particles")]
    pub n_particles: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Grid for density estimates.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// KDE bandwidth; 2π/√N for single runs and 2π/√(N·R) for ensemble
    /// averages when absent.
    #[serde(default)]
    pub bandwidth: Option<f64>,
}

fn default_particles() -> usize {
    DEFAULT_PARTICLES
}
fn default_dt() -> f64 {
    DEFAULT_SDE_DT
}
fn default_runs() -> usize {
    1
}
fn default_grid() -> usize {
    DEFAULT_GRID
}

impl SdeConfig {
    pub fn new(model: Model, t_final: f64) -> Self {
        SdeConfig {
            model,
            n_particles: DEFAULT_PARTICLES,
            dt: DEFAULT_SDE_DT,
            t_final,
            seed: 0,
            n_runs: 1,
            snapshot_times: Vec::new(),
            grid: DEFAULT_GRID,
            bandwidth: None,
        }
    }

    pub fn with_particles(mut self, n: usize) -> Self {
        self.n_particles = n;
        self
    }

    pub fn with_runs(mut self, r: usize) -> Self {
        self.n_runs = r;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth.unwrap_or_else(|| default_bandwidth(self.n_particles))
    }

    /// Bandwidth for the average over all runs, which pools N·R samples.
    pub fn ensemble_bandwidth(&self) -> f64 {
        self.bandwidth
            .unwrap_or_else(|| default_bandwidth(self.n_particles * self.n_runs))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.n_particles < 2 {
            return Err(Error::Domain(format!("need at least 2 particles, got {}", self.n_particles)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Domain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0) {
            return Err(Error::Domain("t_final must be non-negative".into()));
        }
        if self.n_runs == 0 {
            return Err(Error::Domain("n_runs must be at least 1".into()));
        }
        Grid::new(self.grid)?;
        Ok(())
    }
}

pub fn default_bandwidth(n: usize) -> f64 {
    std::f64::consts::TAU / (n as f64).sqrt()
}

/// Particle positions with their private noise stream.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    positions: Vec<f64>,
    time: f64,
    seed: u64,
    stream: u64,
    step_count: u64,
    rng: ChaCha8Rng,
}

impl ParticleEnsemble {
    /// Positions are wrapped into [0, 2π).
    pub fn from_positions(positions: Vec<f64>, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        ParticleEnsemble {
            positions: positions.into_iter().map(wrap_angle).collect(),
            time: 0.0,
            seed,
            stream,
            step_count: 0,
            rng,
        }
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One Euler-Maruyama step with fresh noise from the ensemble's stream.
    pub fn em_step(&mut self, model: &Model, dt: f64) {
        let rng = &mut self.rng;
        let noise: Vec<f64> = (0..self.positions.len()).map(|_| rng.sample(StandardNormal)).collect();
        self.em_step_with_noise(model, dt, &noise);
    }

    /// One step with caller-supplied standard normal increments.
    pub fn em_step_with_noise(&mut self, model: &Model, dt: f64, noise: &[f64]) {
        assert_eq!(noise.len(), self.positions.len());
        let b = drift(&self.positions, model);
        let sigma = (2.0 * dt / model.beta).sqrt();
        for ((x, bi), xi) in self.positions.iter_mut().zip(&b).zip(noise) {
            *x = wrap_angle(*x - bi * dt + sigma * xi);
        }
        self.time += dt;
        self.step_count += 1;
    }

    pub fn density(&self, g: usize, bandwidth: f64) -> Result<TorusDensity> {
        empirical_density(&self.positions, g, bandwidth)
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        io::write_columns(path, &["x"], &[&self.positions])
    }
}

/// bᵢ = V'(xᵢ) + (κ/N) Σⱼ W'(xᵢ - xⱼ), via
/// Σⱼ sin k(xᵢ - xⱼ) = sin kxᵢ Σⱼ cos kxⱼ - cos kxᵢ Σⱼ sin kxⱼ.
pub fn drift(positions: &[f64], model: &Model) -> Vec<f64> {
    let n = positions.len() as f64;
    let w = &model.interaction;
    let modes: Vec<(f64, f64, f64)> = (1..=w.modes())
        .filter(|&k| w.coeff(k) != 0.0)
        .map(|k| {
            let kf = k as f64;
            let (s, c) = positions
                .iter()
                .map(|x| (kf * x).sin_cos())
                .fold((0.0, 0.0), |(a, b), (s, c)| (a + s, b + c));
            (kf, s, c)
        })
        .collect();
    positions
        .iter()
        .map(|&x| {
            let mut pair = 0.0;
            for &(k, ssum, csum) in &modes {
                let (s, c) = (k * x).sin_cos();
                // W'(y) = -Σ k c_k sin ky
                pair -= k * w.coeff(k as usize) * (s * csum - c * ssum);
            }
            model.confinement.derivative(x) + model.kappa * pair / n
        })
        .collect()
}

/// O(N²) reference for [`drift`].
pub fn drift_naive(positions: &[f64], model: &Model) -> Vec<f64> {
    let n = positions.len() as f64;
    positions
        .iter()
        .map(|&xi| {
            let pair: f64 = positions.iter().map(|&xj| model.interaction.derivative(xi - xj)).sum();
            model.confinement.derivative(xi) + model.kappa * pair / n
        })
        .collect()
}

/// Inverse-CDF draws from the piecewise-linear interpolant of `rho0`.
pub fn sample_initial(rho0: &TorusDensity, n: usize, seed: u64, stream: u64) -> Result<ParticleEnsemble> {
    let grid = rho0.grid();
    let g = grid.len();
    let h = grid.spacing();
    let v = rho0.values();
    let mut cum = Vec::with_capacity(g + 1);
    cum.push(0.0);
    for j in 0..g {
        let m = 0.5 * h * (v[j] + v[(j + 1) % g]);
        cum.push(cum[j] + m);
    }
    let total = cum[g];
    if !(total > 0.0) {
        return Err(Error::NonPositiveDensity(total));
    }
    let mut e = ParticleEnsemble::from_positions(Vec::new(), seed, stream);
    let mut positions = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = e.rng.random::<f64>() * total;
        let j = cum.partition_point(|&c| c <= u).clamp(1, g) - 1;
        let m = u - cum[j];
        let (a, b) = (v[j], v[(j + 1) % g]);
        let slope = (b - a) / h;
        let t = if slope.abs() < 1e-12 * a.max(1e-300) {
            m / a
        } else {
            (-a + (a * a + 2.0 * slope * m).max(0.0).sqrt()) / slope
        };
        positions.push(wrap_angle(grid.point(j) + t.clamp(0.0, h)));
    }
    e.positions = positions;
    Ok(e)
}

/// Wrapped-Gaussian kernel density estimate on a G-point grid.
pub fn empirical_density(positions: &[f64], g: usize, bandwidth: f64) -> Result<TorusDensity> {
    let grid = Grid::new(g)?;
    if !(bandwidth > 0.0) {
        return Err(Error::Domain(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if positions.is_empty() {
        return Err(Error::InsufficientData("no particles".into()));
    }
    let images = (6.0 * bandwidth / std::f64::consts::TAU).ceil() as i64 + 1;
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    let values: Vec<f64> = grid
        .points()
        .par_iter()
        .map(|&x| {
            let mut acc = 0.0;
            for &p in positions {
                let d = x - p;
                for m in -images..=images {
                    let y = d + std::f64::consts::TAU * m as f64;
                    acc += (-y * y * inv).exp();
                }
            }
            acc
        })
        .collect();
    TorusDensity::new(values)
}

/// Snapshots of one run.
#[derive(Debug, Clone)]
pub struct ParticleRun {
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub final_state: ParticleEnsemble,
}

/// Sample from `rho0` and integrate one run on stream `run_index`.
pub fn run(cfg: &SdeConfig, rho0: &TorusDensity, run_index: u64) -> Result<ParticleRun> {
    cfg.validate()?;
    let mut e = sample_initial(rho0, cfg.n_particles, cfg.seed, run_index)?;
    let steps = (cfg.t_final / cfg.dt).round() as u64;
    let mut times: Vec<u64> = cfg
        .snapshot_times
        .iter()
        .filter(|t| **t >= 0.0 && **t <= cfg.t_final)
        .map(|t| (t / cfg.dt).round() as u64)
        .collect();
    times.sort_unstable();
    times.dedup();
    let mut next = times.into_iter().peekable();
    let mut snapshots = Vec::new();
    for n in 0..=steps {
        while next.peek() == Some(&n) {
            snapshots.push((n as f64 * cfg.dt, e.positions.clone()));
            next.next();
        }
        if n < steps {
            e.em_step(&cfg.model, cfg.dt);
        }
    }
    Ok(ParticleRun {
        snapshots,
        final_state: e,
    })
}

/// Final densities of runs 0..n_runs at the given bandwidth, computed in
/// parallel.
pub fn run_ensemble(cfg: &SdeConfig, rho0: &TorusDensity, bw: f64) -> Result<Vec<TorusDensity>> {
    cfg.validate()?;
    (0..cfg.n_runs as u64)
        .into_par_iter()
        .map(|r| run(cfg, rho0, r)?.final_state.density(cfg.grid, bw))
        .collect()
}

/// Mean of the final empirical densities over `cfg.n_runs` runs.
pub fn ensemble_average(cfg: &SdeConfig, rho0: &TorusDensity) -> Result<TorusDensity> {
    let dens = run_ensemble(cfg, rho0, cfg.ensemble_bandwidth())?;
    average(&dens)
}

pub fn average(dens: &[TorusDensity]) -> Result<TorusDensity> {
    let first = dens
        .first()
        .ok_or_else(|| Error::InsufficientData("no densities to average".into()))?;
    let mut acc = vec![0.0; first.len()];
    for d in dens {
        if d.len() != acc.len() {
            return Err(Error::GridMismatch(acc.len(), d.len()));
        }
        for (a, v) in acc.iter_mut().zip(d.values()) {
            *a += v;
        }
    }
    let r = dens.len() as f64;
    acc.iter_mut().for_each(|a| *a /= r);
    TorusDensity::new(acc)
}

/// Replay record for a particle experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdeManifest {
    pub config: SdeConfig,
    pub seed: u64,
    /// One ChaCha8 stream per run, numbered from 0.
    pub streams: Vec<u64>,
    pub bandwidth: f64,
    pub wall_time: f64,
}

impl SdeManifest {
    pub fn new(cfg: &SdeConfig, wall_time: f64) -> Self {
        SdeManifest {
            config: cfg.clone(),
            seed: cfg.seed,
            streams: (0..cfg.n_runs as u64).collect(),
            bandwidth: if cfg.n_runs > 1 { cfg.ensemble_bandwidth() } else { cfg.bandwidth() },
            wall_time,
        }
    }
}
