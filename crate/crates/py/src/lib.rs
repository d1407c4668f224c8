//! Python bindings. Densities and spectra cross the boundary as plain lists.

use mvtorus::particles::{self, default_bandwidth, drift};
use mvtorus::pde::DEFAULT_DT;
use mvtorus::stability::{self, second_variation};
use mvtorus::{
    grid::DEFAULT_GRID, particles::DEFAULT_SDE_DT, BranchLabel, Confinement, FourierPotential, Method, PdeConfig,
    SdeConfig, Sector, SolverOptions,
};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(mvtorus_py, MvtorusError, PyRuntimeError);

fn err(e: mvtorus::Error) -> PyErr {
    MvtorusError::new_err(e.to_string())
}

fn potential(c: Vec<f64>) -> FourierPotential {
    FourierPotential::new(c)
}

#[pyclass(name = "Density", module = "mvtorus_py", from_py_object)]
#[derive(Clone)]
struct PyDensity(mvtorus::TorusDensity);

#[pymethods]
impl PyDensity {
    /// Normalises the samples to unit mass on [0, 2π).
    #[new]
    fn new(values: Vec<f64>) -> PyResult<Self> {
        mvtorus::TorusDensity::new(values).map(PyDensity).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (grid = DEFAULT_GRID))]
    fn uniform(grid: usize) -> PyResult<Self> {
        mvtorus::TorusDensity::uniform(grid).map(PyDensity).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (cos, sin = Vec::new(), grid = DEFAULT_GRID))]
    fn from_moments(cos: Vec<f64>, sin: Vec<f64>, grid: usize) -> PyResult<Self> {
        let g = mvtorus::Grid::new(grid).map_err(err)?;
        mvtorus::TorusDensity::from_moments(g, &cos, &sin).map(PyDensity).map_err(err)
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.0.grid().points()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn mass(&self) -> f64 {
        self.0.mass()
    }

    fn cos_moment(&self, k: usize) -> f64 {
        self.0.cos_moment(k)
    }

    fn sin_moment(&self, k: usize) -> f64 {
        self.0.sin_moment(k)
    }

    /// (position, height) of each local maximum.
    fn peaks(&self) -> Vec<(f64, f64)> {
        self.0.peaks().iter().map(|p| (p.position, p.height)).collect()
    }

    fn deviation_from_uniform(&self) -> f64 {
        self.0.deviation_from_uniform()
    }

    fn distance_l1(&self, other: &PyDensity) -> PyResult<f64> {
        self.0.distance_l1(&other.0).map_err(err)
    }

    fn distance_sup(&self, other: &PyDensity) -> PyResult<f64> {
        self.0.distance_sup(&other.0).map_err(err)
    }

    /// (s, d): other(x + s) is closest to self(x), at L1 distance d.
    fn align(&self, other: &PyDensity) -> PyResult<(f64, f64)> {
        let a = self.0.align(&other.0).map_err(err)?;
        Ok((a.shift, a.distance))
    }

    /// ρ(x - s).
    fn shifted(&self, s: f64) -> PyResult<Self> {
        self.0.shifted(s).map(PyDensity).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Density(grid={}, peaks={})", self.0.len(), self.0.peaks().len())
    }
}

#[pyclass(name = "Model", module = "mvtorus_py", from_py_object)]
#[derive(Clone)]
struct PyModel(mvtorus::Model);

#[pymethods]
impl PyModel {
    /// `W` and `V` are cosine coefficients a_1, a_2, ...
    #[new]
    #[pyo3(signature = (W, beta, V = None, kappa = 1.0))]
    #[allow(non_snake_case)]
    fn new(W: Vec<f64>, beta: f64, V: Option<Vec<f64>>, kappa: f64) -> PyResult<Self> {
        let mut m = mvtorus::Model::new(potential(W), beta).with_kappa(kappa);
        if let Some(v) = V {
            m = m.with_confinement(potential(v));
        }
        m.validate().map_err(err)?;
        Ok(PyModel(m))
    }

    #[getter(W)]
    fn w(&self) -> Vec<f64> {
        self.0.interaction.coeffs().to_vec()
    }

    /// Cosine coefficients of V, or None for a sampled confinement.
    #[getter(V)]
    fn v(&self) -> Option<Vec<f64>> {
        match &self.0.confinement {
            Confinement::Fourier(p) => Some(p.coeffs().to_vec()),
            Confinement::Sampled(_) => None,
        }
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.0.kappa
    }

    #[pyo3(signature = (r, grid = DEFAULT_GRID))]
    fn gibbs(&self, r: Vec<f64>, grid: usize) -> PyResult<PyDensity> {
        self.0.gibbs(&r, grid).map(PyDensity).map_err(err)
    }

    fn free_energy(&self, rho: &PyDensity) -> f64 {
        self.0.free_energy(&rho.0)
    }

    fn stationary_residual(&self, rho: &PyDensity) -> f64 {
        self.0.stationary_residual(&rho.0)
    }

    /// Particle drift -V'(x_i) - κ/N Σ_j W'(x_i - x_j).
    fn drift(&self, positions: Vec<f64>) -> Vec<f64> {
        drift(&positions, &self.0)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(W={:?}, beta={}, V={:?}, kappa={})",
            self.w(),
            self.0.beta,
            self.v(),
            self.0.kappa
        )
    }
}

#[pyclass(name = "Branch", module = "mvtorus_py", frozen, skip_from_py_object)]
struct PyBranch {
    #[pyo3(get)]
    r: Vec<f64>,
    #[pyo3(get)]
    residual: f64,
    #[pyo3(get)]
    label: &'static str,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    density: PyDensity,
}

fn label(b: BranchLabel) -> &'static str {
    match b {
        BranchLabel::Uniform => "uniform",
        BranchLabel::SinglePeak => "single_peak",
        BranchLabel::MultiPeak => "multi_peak",
        BranchLabel::Other => "other",
    }
}

impl From<mvtorus::SelfConsistencySolution> for PyBranch {
    fn from(s: mvtorus::SelfConsistencySolution) -> Self {
        PyBranch {
            r: s.params.into_inner(),
            residual: s.residual,
            label: label(s.branch),
            iterations: s.iterations,
            density: PyDensity(s.density),
        }
    }
}

#[pymethods]
impl PyBranch {
    fn __repr__(&self) -> String {
        format!("Branch(label={}, r={:?}, residual={:.1e})", self.label, self.r, self.residual)
    }
}

#[pyclass(name = "Trajectory", module = "mvtorus_py", frozen, skip_from_py_object)]
struct PyTrajectory {
    #[pyo3(get)]
    times: Vec<f64>,
    #[pyo3(get)]
    snapshots: Vec<PyDensity>,
    /// (t, F) pairs.
    #[pyo3(get)]
    free_energy: Vec<(f64, f64)>,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    final_time: f64,
    #[pyo3(get)]
    dt: f64,
    #[pyo3(get)]
    max_mass_drift: f64,
}

#[pymethods]
impl PyTrajectory {
    fn final_density(&self) -> PyDensity {
        self.snapshots.last().cloned().expect("trajectory has a final snapshot")
    }
}

fn parse_method(s: &str) -> PyResult<Method> {
    match s {
        "picard" => Ok(Method::Picard),
        "newton" => Ok(Method::Newton),
        _ => Err(PyValueError::new_err(format!("unknown method {s:?}"))),
    }
}

fn parse_sector(s: &str) -> PyResult<Sector> {
    match s {
        "full" => Ok(Sector::Full),
        "even" => Ok(Sector::Even),
        "odd" => Ok(Sector::Odd),
        _ => Err(PyValueError::new_err(format!("unknown sector {s:?}"))),
    }
}

fn opts(grid: usize) -> SolverOptions {
    SolverOptions {
        grid,
        ..SolverOptions::default()
    }
}

/// Inverse temperature at which the uniform state loses stability, or None
/// when no mode has a negative coefficient.
#[pyfunction]
#[allow(non_snake_case)]
fn critical_beta(W: Vec<f64>) -> Option<f64> {
    mvtorus::critical_beta(&potential(W))
}

#[pyfunction]
#[allow(non_snake_case)]
fn growth_rates(W: Vec<f64>, beta: f64, j_max: usize) -> Vec<f64> {
    mvtorus::growth_rates(&potential(W), beta, j_max)
}

#[pyfunction(name = "second_variation")]
#[allow(non_snake_case)]
fn second_variation_py(W: Vec<f64>, beta: f64, s_max: usize) -> Vec<f64> {
    second_variation(&potential(W), beta, s_max)
}

#[pyfunction]
#[pyo3(signature = (model, r0, method = "picard", grid = DEFAULT_GRID))]
fn solve_fixed_point(py: Python<'_>, model: &PyModel, r0: Vec<f64>, method: &str, grid: usize) -> PyResult<PyBranch> {
    let method = parse_method(method)?;
    let m = model.0.clone();
    py.detach(|| mvtorus::solve_fixed_point(&m, &r0, method, &opts(grid)))
        .map(PyBranch::from)
        .map_err(err)
}

/// Distinct stationary states reached from `seeds` (default: the standard seed set).
#[pyfunction]
#[pyo3(signature = (model, seeds = None, grid = DEFAULT_GRID))]
fn enumerate_branches(
    py: Python<'_>,
    model: &PyModel,
    seeds: Option<Vec<Vec<f64>>>,
    grid: usize,
) -> Vec<PyBranch> {
    let m = model.0.clone();
    let seeds = seeds.unwrap_or_else(|| mvtorus::standard_seeds(m.order()));
    py.detach(|| mvtorus::enumerate_branches(&m, &seeds, &opts(grid)))
        .into_iter()
        .map(PyBranch::from)
        .collect()
}

#[pyfunction]
#[pyo3(signature = (grid = DEFAULT_GRID))]
fn default_initial(grid: usize) -> PyResult<PyDensity> {
    mvtorus::default_initial(grid).map(PyDensity).map_err(err)
}

/// Integrate the PDE from `rho0` on its own grid. Stops early at a steady
/// state unless `run_to_end`.
#[pyfunction]
#[pyo3(signature = (model, rho0, T, dt = DEFAULT_DT, snapshots = None, run_to_end = false))]
#[allow(non_snake_case)]
fn evolve(
    py: Python<'_>,
    model: &PyModel,
    rho0: &PyDensity,
    T: f64,
    dt: f64,
    snapshots: Option<Vec<f64>>,
    run_to_end: bool,
) -> PyResult<PyTrajectory> {
    let mut cfg = PdeConfig::new(model.0.clone(), T)
        .with_grid(rho0.0.len())
        .with_dt(dt)
        .with_snapshots(snapshots.unwrap_or_default());
    if run_to_end {
        cfg = cfg.run_to_end();
    }
    let rho = rho0.0.clone();
    let traj = py.detach(|| mvtorus::evolve(&rho, &cfg)).map_err(err)?;
    Ok(PyTrajectory {
        times: traj.snapshots.iter().map(|(t, _)| *t).collect(),
        snapshots: traj.snapshots.into_iter().map(|(_, d)| PyDensity(d)).collect(),
        free_energy: traj.free_energy,
        converged: traj.converged,
        final_time: traj.final_time,
        dt: traj.dt,
        max_mass_drift: traj.max_mass_drift,
    })
}

fn sde(model: &PyModel, t: f64, n: usize, dt: f64, seed: u64, runs: usize) -> SdeConfig {
    SdeConfig::new(model.0.clone(), t)
        .with_particles(n)
        .with_dt(dt)
        .with_seed(seed)
        .with_runs(runs)
}

/// Final particle positions of run `run` (the RNG stream index).
#[pyfunction]
#[pyo3(signature = (model, T, rho0 = None, N = 500, dt = DEFAULT_SDE_DT, seed = 0, run = 0))]
#[allow(non_snake_case, clippy::too_many_arguments)]
fn simulate_particles(
    py: Python<'_>,
    model: &PyModel,
    T: f64,
    rho0: Option<PyDensity>,
    N: usize,
    dt: f64,
    seed: u64,
    run: u64,
) -> PyResult<Vec<f64>> {
    let cfg = sde(model, T, N, dt, seed, 1);
    let rho = match rho0 {
        Some(r) => r.0,
        None => mvtorus::default_initial(DEFAULT_GRID).map_err(err)?,
    };
    let out = py.detach(|| particles::run(&cfg, &rho, run)).map_err(err)?;
    Ok(out.final_state.positions().to_vec())
}

/// Periodic Gaussian KDE; bandwidth defaults to 2π/√N.
#[pyfunction]
#[pyo3(signature = (positions, grid = DEFAULT_GRID, bandwidth = None))]
fn empirical_density(positions: Vec<f64>, grid: usize, bandwidth: Option<f64>) -> PyResult<PyDensity> {
    let bw = bandwidth.unwrap_or_else(|| default_bandwidth(positions.len()));
    mvtorus::empirical_density(&positions, grid, bw).map(PyDensity).map_err(err)
}

/// Mean final density over `runs` independent runs.
#[pyfunction]
#[pyo3(signature = (model, T, runs, rho0 = None, N = 500, dt = DEFAULT_SDE_DT, seed = 0))]
#[allow(non_snake_case, clippy::too_many_arguments)]
fn ensemble_average(
    py: Python<'_>,
    model: &PyModel,
    T: f64,
    runs: usize,
    rho0: Option<PyDensity>,
    N: usize,
    dt: f64,
    seed: u64,
) -> PyResult<PyDensity> {
    let cfg = sde(model, T, N, dt, seed, runs);
    let rho = match rho0 {
        Some(r) => r.0,
        None => mvtorus::default_initial(DEFAULT_GRID).map_err(err)?,
    };
    py.detach(|| mvtorus::ensemble_average(&cfg, &rho))
        .map(PyDensity)
        .map_err(err)
}

/// Top `k` eigenvalues (descending) of the ground-state-transformed
/// linearisation at a stationary density.
#[pyfunction]
#[pyo3(signature = (model, rho, sector = "full", k = 5))]
fn schroedinger_spectrum(model: &PyModel, rho: &PyDensity, sector: &str, k: usize) -> PyResult<Vec<f64>> {
    let s = parse_sector(sector)?;
    stability::schroedinger_spectrum(&rho.0, &model.0, s, k)
        .map(|r| r.eigenvalues)
        .map_err(err)
}

/// First `count` nonzero eigenvalues for W = -cos x at β = 2(1 + δ²).
#[pyfunction]
#[pyo3(signature = (delta, count = 3, grid = DEFAULT_GRID))]
fn kuramoto_numeric(delta: f64, count: usize, grid: usize) -> PyResult<Vec<f64>> {
    stability::kuramoto_numeric(delta, count, grid).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (eta, count = 3, grid = DEFAULT_GRID))]
fn bichromatic_numeric(eta: f64, count: usize, grid: usize) -> PyResult<Vec<f64>> {
    stability::bichromatic_numeric(eta, count, grid).map_err(err)
}

/// Rows (m, perturbative, numerical) for W = -cos nx.
#[pyfunction]
#[pyo3(signature = (n, delta, rows = 4, grid = DEFAULT_GRID))]
fn harmonic_table(n: usize, delta: f64, rows: usize, grid: usize) -> PyResult<Vec<(usize, f64, f64)>> {
    let t = stability::harmonic_table(n, delta, rows, grid).map_err(err)?;
    Ok(t.into_iter().map(|r| (r.m, r.perturbation, r.numerical)).collect())
}

#[pyfunction]
fn perturbation_eigenvalue_kuramoto(m: usize, delta: f64) -> f64 {
    stability::perturbation_eigenvalue_kuramoto(m, delta)
}

#[pyfunction]
fn perturbation_eigenvalue_harmonic(n: usize, m: usize, delta: f64) -> f64 {
    stability::perturbation_eigenvalue_harmonic(n, m, delta)
}

#[pyfunction]
fn perturbation_eigenvalue_bichromatic(m: usize, eta: f64) -> f64 {
    stability::perturbation_eigenvalue_bichromatic(m, eta)
}

/// Samples of a zero-mean V making `target` stationary for interaction W.
#[pyfunction]
#[pyo3(signature = (target, W, beta, kappa = 1.0))]
#[allow(non_snake_case)]
fn design_confinement(target: &PyDensity, W: Vec<f64>, beta: f64, kappa: f64) -> PyResult<Vec<f64>> {
    mvtorus::design_confinement(&target.0, &potential(W), beta, kappa)
        .map(|v| v.samples().to_vec())
        .map_err(err)
}

#[pymodule]
fn mvtorus_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MvtorusError", m.py().get_type::<MvtorusError>())?;
    m.add_class::<PyDensity>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyBranch>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(critical_beta, m)?)?;
    m.add_function(wrap_pyfunction!(growth_rates, m)?)?;
    m.add_function(wrap_pyfunction!(second_variation_py, m)?)?;
    m.add_function(wrap_pyfunction!(solve_fixed_point, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_branches, m)?)?;
    m.add_function(wrap_pyfunction!(default_initial, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_particles, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_density, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble_average, m)?)?;
    m.add_function(wrap_pyfunction!(schroedinger_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(kuramoto_numeric, m)?)?;
    m.add_function(wrap_pyfunction!(bichromatic_numeric, m)?)?;
    m.add_function(wrap_pyfunction!(harmonic_table, m)?)?;
    m.add_function(wrap_pyfunction!(perturbation_eigenvalue_kuramoto, m)?)?;
    m.add_function(wrap_pyfunction!(perturbation_eigenvalue_harmonic, m)?)?;
    m.add_function(wrap_pyfunction!(perturbation_eigenvalue_bichromatic, m)?)?;
    m.add_function(wrap_pyfunction!(design_confinement, m)?)?;
    Ok(())
}
