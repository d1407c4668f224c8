//! Linear stability of uniform and peaked states.
//!
//! Uniform state: closed-form Fourier growth rates and second-variation
//! eigenvalues. Peaked states: the ground-state transformed operator
//! H = ∂² - Φ, Φ = (β²/4)U'² - (β/2)U'', discretised spectrally and split by
//! parity. Closed-form perturbation eigenvalues near β = 2 are provided for
//! comparison.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::density::TorusDensity;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::io;
use crate::model::Model;
use crate::pde::Trajectory;
use crate::potentials::{FourierPotential, Potential, TrigSeries};
use crate::self_consistency::{bichromatic_r_approx, harmonic_r_approx, kuramoto_r_approx};

/// Residual above which a density is not accepted as stationary.
pub const STATIONARY_TOL: f64 = 1e-4;

/// min over a_k < 0 of -2/a_k; `None` when no coefficient is negative.
pub fn critical_beta(w: &FourierPotential) -> Option<f64> {
    w.coeffs()
        .iter()
        .filter(|&&a| a < 0.0)
        .map(|&a| -2.0 / a)
        .min_by(f64::total_cmp)
}

/// γ_j = j²(-a_j/2 - 1/β), j = 1..=j_max. Positive means unstable.
pub fn growth_rates(w: &FourierPotential, beta: f64, j_max: usize) -> Vec<f64> {
    (1..=j_max)
        .map(|j| {
            let jf = (j * j) as f64;
            jf * (-0.5 * w.coeff(j) - 1.0 / beta)
        })
        .collect()
}

/// λ_s = (πs²/2)(2 + βa_s), s = 1..=s_max. Negative means unstable.
pub fn second_variation(w: &FourierPotential, beta: f64, s_max: usize) -> Vec<f64> {
    (1..=s_max)
        .map(|s| {
            let sf = (s * s) as f64;
            0.5 * PI * sf * (2.0 + beta * w.coeff(s))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorTag {
    SecondVariation,
    LinearizedGrowth,
    Schroedinger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    Full,
    Even,
    Odd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    pub operator: OperatorTag,
    pub sector: Sector,
    pub beta: f64,
    #[serde(rename = "W")]
    pub w: FourierPotential,
    /// Mode index per eigenvalue for the closed-form spectra.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub modes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SpectrumReport {
    fn closed_form(values: Vec<f64>, operator: OperatorTag, w: &FourierPotential, beta: f64, note: &str) -> Self {
        let mut pairs: Vec<(usize, f64)> = values.into_iter().enumerate().map(|(i, v)| (i + 1, v)).collect();
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1));
        SpectrumReport {
            eigenvalues: pairs.iter().map(|p| p.1).collect(),
            modes: pairs.iter().map(|p| p.0).collect(),
            operator,
            sector: Sector::Full,
            beta,
            w: w.clone(),
            delta: None,
            eta: None,
            note: Some(note.into()),
        }
    }

    pub fn top(&self) -> Option<f64> {
        self.eigenvalues.first().copied()
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let idx: Vec<f64> = (0..self.eigenvalues.len()).map(|i| i as f64).collect();
        io::write_columns(path, &["index", "eigenvalue"], &[&idx, &self.eigenvalues])
    }

    pub fn write_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        io::write_json(path, self)
    }
}

pub fn growth_rate_report(w: &FourierPotential, beta: f64, j_max: usize) -> SpectrumReport {
    SpectrumReport::closed_form(
        growth_rates(w, beta, j_max),
        OperatorTag::LinearizedGrowth,
        w,
        beta,
        "gamma_j = j^2 (-a_j/2 - 1/beta); positive is unstable",
    )
}

pub fn second_variation_spectrum(w: &FourierPotential, beta: f64, s_max: usize) -> SpectrumReport {
    SpectrumReport::closed_form(
        second_variation(w, beta, s_max),
        OperatorTag::SecondVariation,
        w,
        beta,
        "lambda_s = (pi s^2/2)(2 + beta a_s); negative is unstable",
    )
}

/// Spectral second-derivative matrix on an even G-point periodic grid.
pub fn second_derivative_matrix(g: usize) -> DMatrix<f64> {
    let h = 2.0 * PI / g as f64;
    DMatrix::from_fn(g, g, |i, j| {
        if i == j {
            -PI * PI / (3.0 * h * h) - 1.0 / 6.0
        } else {
            let d = i as isize - j as isize;
            let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let s = (d as f64 * h / 2.0).sin();
            -sign / (2.0 * s * s)
        }
    })
}

/// H = ∂² - Φ on a periodic grid.
#[derive(Debug, Clone)]
pub struct SchroedingerOperator {
    grid: Grid,
    beta: f64,
    phi: Vec<f64>,
    matrix: DMatrix<f64>,
    w: FourierPotential,
}

impl SchroedingerOperator {
    /// Build from the effective potential U, so that ρ ∝ exp(-βU).
    pub fn from_potential<P: Potential + ?Sized>(u: &P, beta: f64, w: &FourierPotential, g: usize) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        let grid = Grid::new(g)?;
        let du = u.sample_derivative(&grid);
        let d2u = u.sample_second_derivative(&grid);
        let phi: Vec<f64> = du
            .iter()
            .zip(&d2u)
            .map(|(a, b)| 0.25 * beta * beta * a * a - 0.5 * beta * b)
            .collect();
        let mut matrix = second_derivative_matrix(g);
        for (i, p) in phi.iter().enumerate() {
            matrix[(i, i)] -= p;
        }
        Ok(SchroedingerOperator {
            grid,
            beta,
            phi,
            matrix,
            w: w.clone(),
        })
    }

    /// U = V + κ Σ a_k r_k cos kx.
    pub fn from_order_parameters(model: &Model, r: &[f64], g: usize) -> Result<Self> {
        let w = &model.interaction;
        let cos: Vec<f64> = r
            .iter()
            .enumerate()
            .map(|(i, rk)| model.kappa * w.coeff(i + 1) * rk)
            .collect();
        let sin = vec![0.0; cos.len()];
        let inter = TrigSeries::new(0.0, cos, sin);
        let u = Sum(&model.confinement, &inter);
        Self::from_potential(&u, model.beta, w, g)
    }

    /// U = V + κ W⋆ρ. Fails with `NotStationary` if ρ is not a stationary
    /// state of `model` to within 1e-4.
    pub fn from_density(rho: &TorusDensity, model: &Model) -> Result<Self> {
        let res = model.stationary_residual(rho);
        if res > STATIONARY_TOL {
            return Err(Error::NotStationary(res));
        }
        Self::from_density_unchecked(rho, model)
    }

    pub fn from_density_unchecked(rho: &TorusDensity, model: &Model) -> Result<Self> {
        let conv = model.interaction.convolve(rho);
        let scaled = TrigSeries::new(
            0.0,
            conv.cos.iter().map(|c| model.kappa * c).collect(),
            conv.sin.iter().map(|s| model.kappa * s).collect(),
        );
        let u = Sum(&model.confinement, &scaled);
        Self::from_potential(&u, model.beta, &model.interaction, rho.len())
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn potential(&self) -> &[f64] {
        &self.phi
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Largest |H_ij - H_ji|.
    pub fn asymmetry(&self) -> f64 {
        let m = &self.matrix;
        let mut worst: f64 = 0.0;
        for i in 0..m.nrows() {
            for j in 0..i {
                worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(f);
        (&self.matrix * v).iter().copied().collect()
    }

    fn is_even(&self) -> bool {
        let g = self.grid.len();
        let scale = self.phi.iter().map(|p| p.abs()).fold(1.0, f64::max);
        (1..g).all(|j| (self.phi[j] - self.phi[g - j]).abs() <= 1e-10 * scale)
    }

    /// Orthonormal basis of grid functions with the given reflection parity.
    fn parity_basis(&self, sector: Sector) -> DMatrix<f64> {
        let g = self.grid.len();
        let half = g / 2;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match sector {
            Sector::Even => {
                let mut p = DMatrix::zeros(g, half + 1);
                p[(0, 0)] = 1.0;
                p[(half, half)] = 1.0;
                for j in 1..half {
                    p[(j, j)] = s;
                    p[(g - j, j)] = s;
                }
                p
            }
            Sector::Odd => {
                let mut p = DMatrix::zeros(g, half - 1);
                for j in 1..half {
                    p[(j, j - 1)] = s;
                    p[(g - j, j - 1)] = -s;
                }
                p
            }
            Sector::Full => DMatrix::identity(g, g),
        }
    }

    /// Eigenvalues in a parity sector, sorted descending. The even and odd
    /// sectors need Φ to be even about x = 0.
    pub fn eigenvalues(&self, sector: Sector) -> Result<Vec<f64>> {
        if sector != Sector::Full && !self.is_even() {
            return Err(Error::Domain("parity sectors need a potential that is even about 0".into()));
        }
        let block = match sector {
            Sector::Full => self.matrix.clone(),
            _ => {
                let p = self.parity_basis(sector);
                p.transpose() * &self.matrix * p
            }
        };
        let sym = (&block + block.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        Ok(ev)
    }

    /// Top `k` eigenvalues of the sector.
    pub fn spectrum(&self, sector: Sector, k: usize) -> Result<SpectrumReport> {
        let mut ev = self.eigenvalues(sector)?;
        ev.truncate(k);
        Ok(SpectrumReport {
            eigenvalues: ev,
            operator: OperatorTag::Schroedinger,
            sector,
            beta: self.beta,
            w: self.w.clone(),
            modes: Vec::new(),
            delta: None,
            eta: None,
            note: None,
        })
    }

    /// Eigenvalues after the zero (ground-state) eigenvalue.
    pub fn excited(&self, sector: Sector, k: usize) -> Result<Vec<f64>> {
        let ev = self.eigenvalues(sector)?;
        Ok(ev.into_iter().skip(1).take(k).collect())
    }
}

struct Sum<'a, A: ?Sized, B: ?Sized>(&'a A, &'a B);

impl<A: Potential + ?Sized, B: Potential + ?Sized> Potential for Sum<'_, A, B> {
    fn value(&self, x: f64) -> f64 {
        self.0.value(x) + self.1.value(x)
    }
    fn derivative(&self, x: f64) -> f64 {
        self.0.derivative(x) + self.1.derivative(x)
    }
    fn second_derivative(&self, x: f64) -> f64 {
        self.0.second_derivative(x) + self.1.second_derivative(x)
    }
}

/// Top `k` eigenvalues of H at a stationary density.
pub fn schroedinger_spectrum(rho: &TorusDensity, model: &Model, sector: Sector, k: usize) -> Result<SpectrumReport> {
    SchroedingerOperator::from_density(rho, model)?.spectrum(sector, k)
}

/// β = 2(1 + δ²).
pub fn beta_from_delta(delta: f64) -> f64 {
    2.0 * (1.0 + delta * delta)
}

/// β = 2(1 + η⁴).
pub fn beta_from_eta(eta: f64) -> f64 {
    2.0 * (1.0 + eta.powi(4))
}

/// E = -m² + δ²E₂ with E₂ = -2/3 for m = 1 and -1/(2(4m²-1)) - 1/2 otherwise.
pub fn perturbation_eigenvalue_kuramoto(m: usize, delta: f64) -> f64 {
    let mf = m as f64;
    let e2 = if m == 1 {
        -2.0 / 3.0
    } else {
        -1.0 / (2.0 * (4.0 * mf * mf - 1.0)) - 0.5
    };
    -mf * mf + delta * delta * e2
}

/// Eigenvalue m for W = -cos nx:
/// -(n²/2)(1/2 + δ) if 2m = n; -n² - δ²n²/6 if m = n;
/// -m² + δ²(n⁴/(2(n² - 4m²)) - n²/2) otherwise.
pub fn perturbation_eigenvalue_harmonic(n: usize, m: usize, delta: f64) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    let n2 = nf * nf;
    if 2 * m == n {
        -(n2 / 2.0) * (0.5 + delta)
    } else if m == n {
        -n2 - delta * delta * n2 / 6.0
    } else {
        -mf * mf + delta * delta * (n2 * n2 / (2.0 * (n2 - 4.0 * mf * mf)) - n2 / 2.0)
    }
}

/// The m = n case with second-order coefficient 2n²/3 instead of n²/6.
pub fn perturbation_eigenvalue_harmonic_alt(n: usize, delta: f64) -> f64 {
    let n2 = (n * n) as f64;
    -n2 - (2.0 / 3.0) * n2 * delta * delta
}

/// Eigenvalue m for W = -cos x - ½cos 2x at β = 2(1 + η⁴).
pub fn perturbation_eigenvalue_bichromatic(m: usize, eta: f64) -> f64 {
    let s = 1.5f64.sqrt();
    if m == 1 {
        -1.0 - eta * eta * (36f64.powf(0.25) / 12.0 + 1.5 * s)
    } else {
        let mf = m as f64;
        -mf * mf - eta * eta * 0.5 * s * (1.0 / (4.0 * mf * mf - 1.0) + 1.0)
    }
}

/// Even-sector spectrum of H for W = -cos nx with the analytic order
/// parameter r = √ε/(1+ε), β = 2(1+δ²). The zero mode is dropped.
pub fn harmonic_numeric(n: usize, delta: f64, count: usize, g: usize) -> Result<Vec<f64>> {
    let beta = beta_from_delta(delta);
    let model = Model::new(FourierPotential::single_mode(n, -1.0), beta);
    let mut r = vec![0.0; n];
    // ρ ∝ exp(-β r cos nx): order parameter -r.
    r[n - 1] = -harmonic_r_approx(beta)?;
    SchroedingerOperator::from_order_parameters(&model, &r, g)?.excited(Sector::Even, count)
}

/// Even-sector spectrum for the Kuramoto state with r = √(1 - 2/β).
pub fn kuramoto_numeric(delta: f64, count: usize, g: usize) -> Result<Vec<f64>> {
    let beta = beta_from_delta(delta);
    let model = Model::new(FourierPotential::new(vec![-1.0]), beta);
    let r = kuramoto_r_approx(beta)?;
    SchroedingerOperator::from_order_parameters(&model, &[r], g)?.excited(Sector::Even, count)
}

/// Even-sector spectrum for W = -cos x - ½cos 2x with the analytic (r₁, r₂).
pub fn bichromatic_numeric(eta: f64, count: usize, g: usize) -> Result<Vec<f64>> {
    let beta = beta_from_eta(eta);
    let model = Model::new(FourierPotential::new(vec![-1.0, -0.5]), beta);
    let (r1, r2) = bichromatic_r_approx(beta)?;
    SchroedingerOperator::from_order_parameters(&model, &[r1, r2], g)?.excited(Sector::Even, count)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub m: usize,
    pub perturbation: f64,
    /// Only for m = n: the 2n²/3 coefficient variant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation_alt: Option<f64>,
    pub numerical: f64,
}

/// Perturbation vs numerical eigenvalues for W = -cos nx, m = 1..=rows.
pub fn harmonic_table(n: usize, delta: f64, rows: usize, g: usize) -> Result<Vec<TableRow>> {
    let numeric = harmonic_numeric(n, delta, rows, g)?;
    Ok((1..=rows)
        .zip(numeric)
        .map(|(m, numerical)| TableRow {
            m,
            perturbation: perturbation_eigenvalue_harmonic(n, m, delta),
            perturbation_alt: (m == n).then(|| perturbation_eigenvalue_harmonic_alt(n, delta)),
            numerical,
        })
        .collect())
}

pub fn write_table<P: AsRef<Path>>(path: P, rows: &[TableRow]) -> Result<()> {
    let m: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
    let p: Vec<f64> = rows.iter().map(|r| r.perturbation).collect();
    let a: Vec<f64> = rows.iter().map(|r| r.perturbation_alt.unwrap_or(f64::NAN)).collect();
    let n: Vec<f64> = rows.iter().map(|r| r.numerical).collect();
    io::write_columns(path, &["m", "perturbation", "perturbation_alt", "numerical"], &[&m, &p, &a, &n])
}

/// Perturbation size below which the dynamics counts as linear.
pub const LINEAR_REGIME: f64 = 0.05;

/// Least-squares slope of log|mode-j amplitude| over the snapshots whose
/// deviation from uniform is below 0.05.
pub fn extract_decay_rate(traj: &Trajectory, j: usize) -> Result<f64> {
    if j == 0 {
        return Err(Error::Domain("mode index starts at 1".into()));
    }
    let mut pts = Vec::new();
    for (t, rho) in &traj.snapshots {
        if rho.deviation_from_uniform() >= LINEAR_REGIME {
            break;
        }
        let a = rho.mode_amplitude(j);
        if a > 1e-11 {
            pts.push((*t, a.ln()));
        }
    }
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} usable snapshots for mode {j} in the linear regime",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t, b + y));
    let (mt, my) = (st / n, sy / n);
    let (num, den) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, y)| (a + (t - mt) * (y - my), b + (t - mt) * (t - mt)));
    if den == 0.0 {
        return Err(Error::InsufficientData("snapshots share one time".into()));
    }
    Ok(num / den)
}
