//! Pseudospectral time stepping of the mean-field PDE.
//!
//! Diffusion is integrated exactly in Fourier space; the transport term
//! (b ρ)' with b = V' + κ (W⋆ρ)' is treated explicitly with a first-order
//! exponential time differencing step:
//!
//! ρ̂ₖ ← e^{Lₖ dt} ρ̂ₖ + (e^{Lₖ dt} - 1)/Lₖ · ik (bρ)^ₖ,  Lₖ = -k²/β.
//!
//! Stationary states are exact fixed points of this update, and the k = 0
//! coefficient is never touched, so mass is conserved to rounding.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::density::{TorusDensity, NEGATIVITY_TOL, UNIFORM_LEVEL};
use crate::error::{Error, Result};
use crate::grid::{self, Grid, DEFAULT_GRID};
use crate::io;
use crate::model::Model;
use crate::potentials::Potential;

pub const BLOWUP_LIMIT: f64 = 1e6;
pub const TOL_STEADY: f64 = 1e-9;
pub const PROBE_INTERVAL: f64 = 1.0;
pub const DEFAULT_DT: f64 = 1e-3;
pub const MAX_HALVINGS: usize = 10;
/// Allowed mass defect of a single raw step.
pub const MASS_DEFECT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeConfig {
    #[serde(flatten)]
    pub model: Model,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Spacing of the free-energy series.
    #[serde(default = "default_record_interval")]
    pub record_interval: f64,
    #[serde(default = "default_tol_steady")]
    pub tol_steady: f64,
    /// Stop as soon as the steady-state test passes.
    #[serde(default = "default_true")]
    pub stop_when_steady: bool,
}

fn default_grid() -> usize {
    DEFAULT_GRID
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_record_interval() -> f64 {
    0.1
}
fn default_tol_steady() -> f64 {
    TOL_STEADY
}
fn default_true() -> bool {
    true
}

impl PdeConfig {
    pub fn new(model: Model, t_final: f64) -> Self {
        PdeConfig {
            model,
            grid: DEFAULT_GRID,
            dt: DEFAULT_DT,
            t_final,
            snapshot_times: Vec::new(),
            record_interval: default_record_interval(),
            tol_steady: TOL_STEADY,
            stop_when_steady: true,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_grid(mut self, g: usize) -> Self {
        self.grid = g;
        self
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn with_record_interval(mut self, every: f64) -> Self {
        self.record_interval = every;
        self
    }

    pub fn run_to_end(mut self) -> Self {
        self.stop_when_steady = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Domain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= self.dt) {
            return Err(Error::Domain(format!(
                "t_final = {} is shorter than dt = {}",
                self.t_final, self.dt
            )));
        }
        if self.grid < 32 || !self.grid.is_multiple_of(2) {
            return Err(Error::GridTooSmall(self.grid, 32));
        }
        if !(self.record_interval > 0.0) {
            return Err(Error::Domain("record_interval must be positive".into()));
        }
        Ok(())
    }
}

/// Precomputed spectral factors for one (model, grid, dt).
#[derive(Debug, Clone)]
pub struct PdeSolver {
    model: Model,
    grid: Grid,
    dt: f64,
    decay: Vec<f64>,
    /// (e^{L dt} - 1)/L · ik, zero outside the 2/3-rule band.
    transport: Vec<Complex64>,
    /// ik π c_|k|: maps ρ̂ to (W⋆ρ)'^.
    interaction: Vec<Complex64>,
    v_prime: Vec<f64>,
}

impl PdeSolver {
    pub fn new(model: &Model, g: usize, dt: f64) -> Result<Self> {
        model.validate()?;
        let grid = Grid::new(g)?;
        let beta = model.beta;
        let cutoff = g as f64 / 3.0;
        let mut decay = Vec::with_capacity(g);
        let mut transport = Vec::with_capacity(g);
        let mut interaction = Vec::with_capacity(g);
        for j in 0..g {
            let k = grid.wavenumber(j);
            let nyquist = j == g / 2;
            let l = -k * k / beta;
            let e = (l * dt).exp();
            decay.push(e);
            let phi = if l == 0.0 { dt } else { (e - 1.0) / l };
            let keep = !nyquist && k.abs() <= cutoff;
            transport.push(if keep { Complex64::new(0.0, k * phi) } else { Complex64::new(0.0, 0.0) });
            let c = if nyquist { 0.0 } else { model.interaction.coeff(k.abs() as usize) };
            interaction.push(Complex64::new(0.0, k * PI * model.kappa * c));
        }
        let v_prime = model.confinement.sample_derivative(&grid);
        Ok(PdeSolver {
            model: model.clone(),
            grid,
            dt,
            decay,
            transport,
            interaction,
            v_prime,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// One raw step on grid values (no renormalisation). Values above the
    /// blow-up limit, NaN, or clearly negative values signal instability.
    pub fn advance(&self, rho: &mut [f64]) -> Result<()> {
        let g = self.grid.len();
        let spec = grid::forward(rho);

        let mut drift: Vec<Complex64> = spec.iter().zip(&self.interaction).map(|(r, f)| r * f).collect();
        grid::inverse_in_place(&mut drift);
        let mut flux: Vec<Complex64> = (0..g)
            .map(|j| Complex64::new((self.v_prime[j] + drift[j].re) * rho[j], 0.0))
            .collect();
        grid::forward_in_place(&mut flux);

        let mut next: Vec<Complex64> = (0..g)
            .map(|j| spec[j] * self.decay[j] + flux[j] * self.transport[j])
            .collect();
        grid::inverse_in_place(&mut next);
        for (r, c) in rho.iter_mut().zip(&next) {
            if !c.re.is_finite() || c.re.abs() > BLOWUP_LIMIT || c.re < -NEGATIVITY_TOL {
                return Err(Error::BlowUp { time: f64::NAN });
            }
            *r = c.re;
        }
        Ok(())
    }

    pub fn step(&self, rho: &TorusDensity) -> Result<TorusDensity> {
        check_grid(rho, self.grid)?;
        let mut v = rho.values().to_vec();
        self.advance(&mut v)?;
        let mass = self.grid.integrate(&v);
        if (mass - 1.0).abs() > MASS_DEFECT_TOL {
            return Err(Error::Domain(format!("mass defect {} after step", mass - 1.0)));
        }
        TorusDensity::new(v)
    }

    fn density(&self, values: &[f64]) -> Result<TorusDensity> {
        TorusDensity::new(values.to_vec())
    }

    /// Integrate without dt adaptation.
    pub fn run(&self, rho0: &TorusDensity, cfg: &PdeConfig) -> Result<Trajectory> {
        check_grid(rho0, self.grid)?;
        let started = Instant::now();
        let dt = self.dt;
        let total = (cfg.t_final / dt).round() as u64;
        let probe_steps = ((PROBE_INTERVAL / dt).round() as u64).max(1);
        let record_every = (((cfg.record_interval.max(cfg.t_final / 1e5)) / dt).round() as u64).max(1);

        let mut snap_times: Vec<f64> = cfg
            .snapshot_times
            .iter()
            .copied()
            .filter(|t| *t >= 0.0 && *t <= cfg.t_final)
            .collect();
        snap_times.sort_by(f64::total_cmp);
        snap_times.dedup();
        let mut snap_iter = snap_times.into_iter().peekable();

        let mut rho = rho0.values().to_vec();
        let mut traj = Trajectory {
            snapshots: Vec::new(),
            free_energy: Vec::new(),
            converged: false,
            steady_state: None,
            final_time: 0.0,
            dt,
            wall_time: 0.0,
            max_mass_drift: 0.0,
        };
        let mut last_probe = rho.clone();
        let initial_mass = self.grid.integrate(&rho);
        let mut last_mass = initial_mass;

        let mut n: u64 = 0;
        loop {
            let t = n as f64 * dt;
            while let Some(&ts) = snap_iter.peek() {
                if ts <= t + 0.5 * dt {
                    traj.snapshots.push((t, self.density(&rho)?));
                    snap_iter.next();
                } else {
                    break;
                }
            }
            if n.is_multiple_of(record_every) {
                let d = self.density(&rho)?;
                traj.free_energy.push((t, self.model.free_energy(&d)));
            }
            if n > 0 && n.is_multiple_of(probe_steps) {
                let change = rho
                    .iter()
                    .zip(&last_probe)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
                    / (probe_steps as f64 * dt);
                traj.converged = change < cfg.tol_steady;
                last_probe.copy_from_slice(&rho);
                if traj.converged && cfg.stop_when_steady {
                    break;
                }
            }
            if n >= total {
                break;
            }
            self.advance(&mut rho).map_err(|_| Error::BlowUp { time: t + dt })?;
            let mass = self.grid.integrate(&rho);
            if (mass - last_mass).abs() > MASS_DEFECT_TOL {
                return Err(Error::Domain(format!("mass defect {} at t = {}", mass - last_mass, t + dt)));
            }
            last_mass = mass;
            traj.max_mass_drift = traj.max_mass_drift.max((mass - initial_mass).abs());
            n += 1;
        }

        let t_end = n as f64 * dt;
        let last = self.density(&rho)?;
        if traj.free_energy.last().is_none_or(|(t, _)| *t < t_end) {
            traj.free_energy.push((t_end, self.model.free_energy(&last)));
        }
        if traj.snapshots.last().is_none_or(|(t, _)| *t < t_end) {
            traj.snapshots.push((t_end, last.clone()));
        }
        if traj.converged {
            traj.steady_state = Some(last);
        }
        traj.final_time = t_end;
        traj.wall_time = started.elapsed().as_secs_f64();
        Ok(traj)
    }
}

fn check_grid(rho: &TorusDensity, grid: Grid) -> Result<()> {
    if rho.len() != grid.len() {
        return Err(Error::GridMismatch(rho.len(), grid.len()));
    }
    Ok(())
}

/// Advance one step with the configured dt.
pub fn step(rho: &TorusDensity, cfg: &PdeConfig) -> Result<TorusDensity> {
    cfg.validate()?;
    PdeSolver::new(&cfg.model, cfg.grid, cfg.dt)?.step(rho)
}

/// Integrate to `t_final`, halving dt after a blow-up (up to 10 times).
pub fn evolve(rho0: &TorusDensity, cfg: &PdeConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let mut dt = cfg.dt;
    let mut last_err = None;
    for _ in 0..=MAX_HALVINGS {
        let solver = PdeSolver::new(&cfg.model, cfg.grid, dt)?;
        match solver.run(rho0, cfg) {
            Err(e @ Error::BlowUp { .. }) => {
                last_err = Some(e);
                dt *= 0.5;
            }
            other => return other,
        }
    }
    Err(last_err.unwrap_or(Error::BlowUp { time: 0.0 }))
}

/// 1/(2π) + 0.01 sin(x - π/2).
pub fn default_initial(g: usize) -> Result<TorusDensity> {
    let grid = Grid::new(g)?;
    TorusDensity::from_fn(grid, |x| UNIFORM_LEVEL + 0.01 * (x - PI / 2.0).sin())
}

/// Free energy of a density for explicit potentials.
pub fn free_energy<V: Potential + ?Sized>(
    rho: &TorusDensity,
    v: &V,
    w: &crate::potentials::FourierPotential,
    beta: f64,
    kappa: f64,
) -> f64 {
    crate::model::free_energy(rho, v, w, beta, kappa)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<(f64, TorusDensity)>,
    pub free_energy: Vec<(f64, f64)>,
    pub converged: bool,
    pub steady_state: Option<TorusDensity>,
    pub final_time: f64,
    /// Step actually used (after any halving).
    pub dt: f64,
    pub wall_time: f64,
    /// Largest |∫ρ(t) - ∫ρ(0)| over all raw (unrenormalised) steps.
    pub max_mass_drift: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub config: PdeConfig,
    pub converged: bool,
    pub final_time: f64,
    pub dt_used: f64,
    pub wall_time: f64,
    pub max_mass_drift: f64,
    pub snapshot_files: Vec<String>,
    pub snapshot_times: Vec<f64>,
}

impl Trajectory {
    pub fn final_density(&self) -> &TorusDensity {
        &self.snapshots.last().expect("trajectory has a final snapshot").1
    }

    /// Largest increase between consecutive free-energy records.
    pub fn max_free_energy_increase(&self) -> f64 {
        self.free_energy
            .windows(2)
            .map(|w| w[1].1 - w[0].1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_free_energy<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let (t, f): (Vec<f64>, Vec<f64>) = self.free_energy.iter().copied().unzip();
        io::write_columns(path, &["t", "F"], &[&t, &f])
    }

    /// snapshot_###.csv files, free_energy.csv and manifest.json in `dir`.
    pub fn write_all<P: AsRef<Path>>(&self, dir: P, cfg: &PdeConfig) -> Result<TrajectoryManifest> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for (i, (_, rho)) in self.snapshots.iter().enumerate() {
            let name = format!("snapshot_{i:03}.csv");
            rho.write_csv(dir.join(&name))?;
            files.push(name);
        }
        self.write_free_energy(dir.join("free_energy.csv"))?;
        let manifest = TrajectoryManifest {
            config: cfg.clone(),
            converged: self.converged,
            final_time: self.final_time,
            dt_used: self.dt,
            wall_time: self.wall_time,
            max_mass_drift: self.max_mass_drift,
            snapshot_files: files,
            snapshot_times: self.snapshots.iter().map(|(t, _)| *t).collect(),
        };
        io::write_json(dir.join("manifest.json"), &manifest)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::FourierPotential;
    use crate::self_consistency::{solve_fixed_point, Method, SolverOptions};

    fn kuramoto(beta: f64) -> Model {
        Model::new(FourierPotential::new(vec![-1.0]), beta)
    }

    #[test]
    fn default_initial_values() {
        let rho = default_initial(256).unwrap();
        assert!((rho.values()[64] - UNIFORM_LEVEL).abs() < 1e-15);
        assert!((rho.values()[128] - UNIFORM_LEVEL - 0.01).abs() < 1e-15);
        assert!((rho.mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_is_fixed() {
        let cfg = PdeConfig::new(Model::new(FourierPotential::new(vec![-3.0, -1.0]), 5.0), 1.0);
        let u = TorusDensity::uniform(256).unwrap();
        let next = step(&u, &cfg).unwrap();
        assert!(next.distance_sup(&u).unwrap() < 1e-13);
    }

    #[test]
    fn gibbs_state_is_fixed() {
        let m = kuramoto(3.0);
        let sol = solve_fixed_point(&m, &[0.5], Method::Newton, &SolverOptions::default()).unwrap();
        let cfg = PdeConfig::new(m, 1.0);
        let next = step(&sol.density, &cfg).unwrap();
        assert!(next.distance_sup(&sol.density).unwrap() < 1e-8);
    }

    #[test]
    fn subcritical_perturbation_decays_monotonically() {
        let cfg = PdeConfig::new(kuramoto(1.0), 5.0).with_snapshots((0..=50).map(|i| 0.1 * i as f64).collect());
        let traj = evolve(&default_initial(256).unwrap(), &cfg).unwrap();
        let dev: Vec<f64> = traj.snapshots.iter().map(|(_, r)| r.deviation_from_uniform()).collect();
        assert!(dev.windows(2).all(|w| w[1] < w[0]));
        assert!(traj.max_free_energy_increase() <= 1e-9);
        assert!(traj.max_mass_drift < 1e-12);
    }

    #[test]
    fn blowup_is_detected() {
        // β huge, dt huge: explicit transport is unstable.
        let m = Model::new(FourierPotential::new(vec![-40.0, -40.0, -40.0]), 50.0);
        let solver = PdeSolver::new(&m, 64, 1.0).unwrap();
        let cfg = PdeConfig::new(m, 100.0).with_grid(64).with_dt(1.0);
        let r = solver.run(&default_initial(64).unwrap(), &cfg);
        assert!(matches!(r, Err(Error::BlowUp { .. })), "{r:?}");
    }

    #[test]
    fn config_validation() {
        let m = kuramoto(2.0);
        assert!(PdeConfig::new(m.clone(), 1.0).with_dt(0.0).validate().is_err());
        assert!(PdeConfig::new(m.clone(), 1e-4).validate().is_err());
        assert!(PdeConfig::new(m.clone(), 1.0).with_grid(16).validate().is_err());
        assert!(PdeConfig::new(m, 1.0).validate().is_ok());
    }

    #[test]
    fn exports() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PdeConfig::new(kuramoto(3.0), 2.0)
            .with_grid(64)
            .with_snapshots(vec![0.0, 1.0]);
        let traj = evolve(&default_initial(64).unwrap(), &cfg).unwrap();
        let man = traj.write_all(dir.path(), &cfg).unwrap();
        assert_eq!(man.snapshot_files.len(), 3);
        let (h, cols) = io::read_columns(dir.path().join("free_energy.csv")).unwrap();
        assert_eq!(h, vec!["t", "F"]);
        assert_eq!(cols[0].len(), traj.free_energy.len());
        let json = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        assert!(json.contains("\"W\"") && json.contains("\"converged\""));
    }
}
