//! Order-parameter fixed point for stationary states.
//!
//! Every stationary state with even V and W has the Gibbs form
//! ρ ∝ exp(-β Σ_k (v_k + κ r_k a_k) cos kx), where r_k = ∫cos(kx)ρ dx.
//! The map r ↦ (moments of the Gibbs state for r) is solved here by damped
//! Picard iteration or by Newton's method with a finite-difference Jacobian.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::TorusDensity;
use crate::error::{Error, Result};
use crate::grid::DEFAULT_GRID;
use crate::model::Model;
use crate::potentials::{Confinement, FourierPotential};

/// Cosine moments (r_1..r_m) of a stationary state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderParameters(Vec<f64>);

impl OrderParameters {
    /// Rejects non-finite entries and entries outside [-1, 1].
    pub fn new(r: Vec<f64>) -> Result<Self> {
        if let Some(bad) = r.iter().find(|x| !x.is_finite() || x.abs() > 1.0) {
            return Err(Error::Domain(format!("order parameter {bad} outside [-1, 1]")));
        }
        Ok(OrderParameters(r))
    }

    pub fn zeros(m: usize) -> Self {
        OrderParameters(vec![0.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0.get(k - 1).copied().unwrap_or(0.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Picard,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchLabel {
    Uniform,
    SinglePeak,
    MultiPeak,
    Other,
}

impl BranchLabel {
    pub fn classify(rho: &TorusDensity, r: &[f64]) -> Self {
        match rho.peaks().len() {
            0 if r.iter().all(|x| x.abs() < 1e-8) && rho.deviation_from_uniform() < 1e-8 => {
                BranchLabel::Uniform
            }
            0 => BranchLabel::Other,
            1 => BranchLabel::SinglePeak,
            _ => BranchLabel::MultiPeak,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Picard relaxation ω in r ← (1-ω)r + ω S(r).
    pub damping: f64,
    /// Forward-difference step for the Newton Jacobian.
    pub jacobian_step: f64,
    pub grid: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-12,
            max_iters: 10_000,
            damping: 0.5,
            jacobian_step: 1e-6,
            grid: DEFAULT_GRID,
        }
    }
}

/// L¹ distance (after optimal rotation when V = 0) below which two solutions
/// are considered the same branch.
pub const DEDUP_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct SelfConsistencySolution {
    pub params: OrderParameters,
    /// ‖S(r) - r‖_∞ at the returned r.
    pub residual: f64,
    pub density: TorusDensity,
    pub branch: BranchLabel,
    pub iterations: usize,
}

/// JSON export of a solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub r: Vec<f64>,
    pub residual: f64,
    pub branch_label: BranchLabel,
    pub beta: f64,
    pub kappa: f64,
    #[serde(rename = "W")]
    pub w: FourierPotential,
    #[serde(rename = "V")]
    pub v: Confinement,
    pub peaks: usize,
}

impl SelfConsistencySolution {
    pub fn record(&self, model: &Model) -> SolutionRecord {
        SolutionRecord {
            r: self.params.as_slice().to_vec(),
            residual: self.residual,
            branch_label: self.branch,
            beta: model.beta,
            kappa: model.kappa,
            w: model.interaction.clone(),
            v: model.confinement.clone(),
            peaks: self.density.peaks().len(),
        }
    }
}

/// One application of the self-consistency map: the first m cosine moments
/// of the Gibbs state built from `r` (m = r.len()).
pub fn sc_map(r: &[f64], model: &Model, g: usize) -> Result<Vec<f64>> {
    let rho = model.gibbs(r, g)?;
    Ok((1..=r.len()).map(|k| rho.cos_moment(k)).collect())
}

fn defect(r: &[f64], model: &Model, g: usize) -> Result<(Vec<f64>, f64)> {
    let s = sc_map(r, model, g)?;
    let f: Vec<f64> = s.iter().zip(r).map(|(a, b)| a - b).collect();
    let norm = f.iter().map(|x| x.abs()).fold(0.0, f64::max);
    Ok((f, norm))
}

/// Solve S(r) = r from `r_init`.
pub fn solve_fixed_point(
    model: &Model,
    r_init: &[f64],
    method: Method,
    opts: &SolverOptions,
) -> Result<SelfConsistencySolution> {
    model.validate()?;
    if r_init.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("initial order parameters must be finite".into()));
    }
    let m = model.order();
    let mut r = r_init.to_vec();
    r.resize(m, 0.0);

    let (r, iterations) = match method {
        Method::Picard => picard(model, r, opts)?,
        Method::Newton => newton(model, r, opts)?,
    };
    finish(model, r, iterations, opts)
}

fn finish(
    model: &Model,
    r: Vec<f64>,
    iterations: usize,
    opts: &SolverOptions,
) -> Result<SelfConsistencySolution> {
    let (_, residual) = defect(&r, model, opts.grid)?;
    let density = model.gibbs(&r, opts.grid)?;
    let branch = BranchLabel::classify(&density, &r);
    Ok(SelfConsistencySolution {
        params: OrderParameters::new(r)?,
        residual,
        density,
        branch,
        iterations,
    })
}

fn picard(model: &Model, mut r: Vec<f64>, opts: &SolverOptions) -> Result<(Vec<f64>, usize)> {
    let omega = opts.damping;
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iters {
        let s = sc_map(&r, model, opts.grid)?;
        residual = s.iter().zip(&r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if residual < opts.tol {
            return Ok((r, it));
        }
        for (ri, si) in r.iter_mut().zip(&s) {
            *ri = (1.0 - omega) * *ri + omega * si;
        }
    }
    Err(Error::NoConvergence {
        iters: opts.max_iters,
        residual,
    })
}

fn newton(model: &Model, mut r: Vec<f64>, opts: &SolverOptions) -> Result<(Vec<f64>, usize)> {
    let m = r.len();
    let g = opts.grid;
    let h = opts.jacobian_step;
    let (mut f, mut norm) = defect(&r, model, g)?;
    for it in 0..opts.max_iters {
        if norm < opts.tol {
            return Ok((r, it));
        }
        let s0: Vec<f64> = f.iter().zip(&r).map(|(a, b)| a + b).collect();
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            let mut rp = r.clone();
            rp[j] += h;
            let sp = sc_map(&rp, model, g)?;
            for i in 0..m {
                jac[(i, j)] = (sp[i] - s0[i]) / h - if i == j { 1.0 } else { 0.0 };
            }
        }
        let rhs = -DVector::from_vec(f.clone());
        let step = jac
            .lu()
            .solve(&rhs)
            .filter(|d| d.iter().all(|x| x.is_finite()))
            .ok_or(Error::NoConvergence {
                iters: it,
                residual: norm,
            })?;

        // Backtrack until the defect decreases and r stays a moment vector.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = r.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
            if trial.iter().all(|x| x.abs() <= 1.0) {
                if let Ok((ft, nt)) = defect(&trial, model, g) {
                    if nt < norm || nt < opts.tol {
                        r = trial;
                        f = ft;
                        norm = nt;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iters: it,
                residual: norm,
            });
        }
    }
    Err(Error::NoConvergence {
        iters: opts.max_iters,
        residual: norm,
    })
}

/// {0, 0.5·e_k for each k, (0.5, ..), (-0.5, ..)}.
pub fn standard_seeds(m: usize) -> Vec<Vec<f64>> {
    let mut seeds = vec![vec![0.0; m]];
    for k in 0..m {
        let mut e = vec![0.0; m];
        e[k] = 0.5;
        seeds.push(e);
    }
    if m > 1 {
        seeds.push(vec![0.5; m]);
    }
    seeds.push(vec![-0.5; m]);
    seeds
}

/// Solve from every seed (Picard, falling back to Newton) and keep one
/// representative per distinct stationary state. With V = 0, rotations of a
/// state are the same branch. Newton alone also lands on unstable mixed
/// states, so it is only used where Picard fails.
pub fn enumerate_branches(
    model: &Model,
    seeds: &[Vec<f64>],
    opts: &SolverOptions,
) -> Vec<SelfConsistencySolution> {
    let solved: Vec<SelfConsistencySolution> = seeds
        .par_iter()
        .filter_map(|seed| {
            solve_fixed_point(model, seed, Method::Picard, opts)
                .or_else(|_| solve_fixed_point(model, seed, Method::Newton, opts))
                .ok()
        })
        .collect();

    let translation_invariant = model.confinement.is_zero();
    let mut kept: Vec<SelfConsistencySolution> = Vec::new();
    for sol in solved {
        let duplicate = kept.iter().any(|k| {
            let d = if translation_invariant {
                k.density.align(&sol.density).map(|a| a.distance)
            } else {
                k.density.distance_l1(&sol.density)
            };
            d.is_ok_and(|d| d < DEDUP_TOL)
        });
        if !duplicate {
            kept.push(sol);
        }
    }
    kept
}

/// ‖ρ - Z⁻¹exp(-β(V + κW⋆ρ))‖_∞ on the grid.
pub fn stationary_residual(rho: &TorusDensity, model: &Model) -> f64 {
    model.stationary_residual(rho)
}

/// r(β) ≈ sqrt(1 - 2/β) for the Kuramoto interaction near β = 2.
pub fn kuramoto_r_approx(beta: f64) -> Result<f64> {
    if !(beta >= 2.0) {
        return Err(Error::Domain(format!("approximation needs beta >= 2, got {beta}")));
    }
    Ok((1.0 - 2.0 / beta).sqrt())
}

/// Order parameter for W = -cos nx at β = 2(1 + ε): r = √ε/(1 + ε).
pub fn harmonic_r_approx(beta: f64) -> Result<f64> {
    if !(beta >= 2.0) {
        return Err(Error::Domain(format!("approximation needs beta >= 2, got {beta}")));
    }
    let eps = beta / 2.0 - 1.0;
    Ok(eps.sqrt() / (1.0 + eps))
}

/// (r1, r2) for W = -cos x - ½cos 2x near β = 2:
/// r2 = sqrt(3/2 - 3/β), r1 = sqrt(r2 (r2 + 2/β)).
pub fn bichromatic_r_approx(beta: f64) -> Result<(f64, f64)> {
    if !(beta >= 2.0) {
        return Err(Error::Domain(format!("approximation needs beta >= 2, got {beta}")));
    }
    let r2 = (1.5 - 3.0 / beta).max(0.0).sqrt();
    let r1 = (r2 * (r2 + 2.0 / beta)).sqrt();
    Ok((r1, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn bichromatic(beta: f64) -> Model {
        Model::new(FourierPotential::new(vec![-1.0, -1.0]), beta)
    }

    /// Independent oracle: midpoint-free Riemann sums of the defining
    /// integrals with many more points than the solver's grid.
    fn quadrature_map(r: &[f64], a: &[f64], beta: f64) -> Vec<f64> {
        let n = 4096;
        let mut num = vec![0.0; r.len()];
        let mut z = 0.0;
        for j in 0..n {
            let x = TAU * j as f64 / n as f64;
            let e: f64 = r
                .iter()
                .zip(a)
                .enumerate()
                .map(|(i, (ri, ai))| ri * ai * ((i + 1) as f64 * x).cos())
                .sum();
            let w = (-beta * e).exp();
            z += w;
            for (l, acc) in num.iter_mut().enumerate() {
                *acc += ((l + 1) as f64 * x).cos() * w;
            }
        }
        num.into_iter().map(|v| v / z).collect()
    }

    #[test]
    fn zero_is_fixed_without_confinement() {
        let m = Model::new(FourierPotential::new(vec![-2.0, 0.5, -1.0]), 4.0);
        let s = sc_map(&[0.0, 0.0, 0.0], &m, 256).unwrap();
        assert!(s.iter().all(|&x| x.abs() < 1e-16), "{s:?}");
    }

    #[test]
    fn map_matches_quadrature_oracle() {
        let m = Model::new(FourierPotential::new(vec![-1.0]), 4.0);
        let s = sc_map(&[0.5], &m, 256).unwrap();
        let o = quadrature_map(&[0.5], &[-1.0], 4.0);
        assert!((s[0] - o[0]).abs() < 1e-13, "{s:?} vs {o:?}");

        let m = bichromatic(3.0);
        let s = sc_map(&[0.3, 0.3], &m, 256).unwrap();
        let o = quadrature_map(&[0.3, 0.3], &[-1.0, -1.0], 3.0);
        for (a, b) in s.iter().zip(&o) {
            assert!((a - b).abs() < 1e-13);
            assert!(*a > 0.0 && *a < 1.0);
        }
    }

    #[test]
    fn kuramoto_below_threshold_goes_uniform() {
        let m = Model::new(FourierPotential::new(vec![-1.0]), 1.5);
        let sol = solve_fixed_point(&m, &[0.5], Method::Picard, &SolverOptions::default()).unwrap();
        assert!(sol.params.get(1).abs() < 1e-11);
        assert_eq!(sol.branch, BranchLabel::Uniform);
    }

    #[test]
    fn bichromatic_one_peak_and_two_peak_branches() {
        let m = bichromatic(3.0);
        let opts = SolverOptions::default();
        let one = solve_fixed_point(&m, &[0.5, 0.5], Method::Picard, &opts).unwrap();
        assert!(one.residual < 1e-10);
        assert!(one.params.get(1).abs() > 0.1 && one.params.get(2).abs() > 0.1);
        assert_eq!(one.branch, BranchLabel::SinglePeak);

        let two = solve_fixed_point(&m, &[0.0, 0.5], Method::Newton, &opts).unwrap();
        assert!(two.residual < 1e-10);
        assert!(two.params.get(1).abs() < 1e-14);
        assert!(two.params.get(2) > 0.1);
        assert_eq!(two.branch, BranchLabel::MultiPeak);
        // r2 agrees with the oracle map at the solution.
        let o = quadrature_map(two.params.as_slice(), &[-1.0, -1.0], 3.0);
        assert!((o[1] - two.params.get(2)).abs() < 1e-10);
    }

    #[test]
    fn newton_and_picard_agree() {
        let m = bichromatic(3.0);
        let opts = SolverOptions::default();
        let a = solve_fixed_point(&m, &[0.5, 0.5], Method::Picard, &opts).unwrap();
        let b = solve_fixed_point(&m, &[0.5, 0.5], Method::Newton, &opts).unwrap();
        for k in 1..=2 {
            assert!((a.params.get(k) - b.params.get(k)).abs() < 1e-10);
        }
        assert!(b.iterations < a.iterations);
    }

    #[test]
    fn branch_counts() {
        let opts = SolverOptions::default();
        let k = Model::new(FourierPotential::new(vec![-1.0]), 1.0);
        assert_eq!(enumerate_branches(&k, &standard_seeds(1), &opts).len(), 1);
        for beta in [3.0, 10.0] {
            let m = bichromatic(beta);
            let b = enumerate_branches(&m, &standard_seeds(2), &opts);
            let mut labels: Vec<_> = b.iter().map(|s| s.branch).collect();
            labels.sort_by_key(|l| *l as u8);
            assert_eq!(
                labels,
                vec![BranchLabel::Uniform, BranchLabel::SinglePeak, BranchLabel::MultiPeak],
                "beta = {beta}"
            );
        }
    }

    #[test]
    fn solver_output_is_stationary() {
        let m = bichromatic(3.0);
        let sol = solve_fixed_point(&m, &[0.5, 0.5], Method::Newton, &SolverOptions::default()).unwrap();
        assert!(stationary_residual(&sol.density, &m) < 1e-8);
    }

    #[test]
    fn closed_form_approximations() {
        assert_eq!(kuramoto_r_approx(2.0).unwrap(), 0.0);
        assert!((kuramoto_r_approx(2.5).unwrap() - 0.447_213_595_499_958).abs() < 1e-12);
        assert!(matches!(kuramoto_r_approx(1.9), Err(Error::Domain(_))));
        assert_eq!(bichromatic_r_approx(2.0).unwrap(), (0.0, 0.0));
        let (_, r2) = bichromatic_r_approx(2.4).unwrap();
        assert!((r2 - 0.5).abs() < 1e-12);
        assert!(bichromatic_r_approx(1.0).is_err());
        // δ = 0.1: r = 0.1/1.01
        assert!((harmonic_r_approx(2.02).unwrap() - 0.1 / 1.01).abs() < 1e-12);
    }

    #[test]
    fn kuramoto_approximation_is_a_lower_bound_near_threshold() {
        let opts = SolverOptions::default();
        for beta in [2.05, 2.1, 2.3] {
            let m = Model::new(FourierPotential::new(vec![-1.0]), beta);
            let sol = solve_fixed_point(&m, &[0.5], Method::Newton, &opts).unwrap();
            assert!(sol.params.get(1) > kuramoto_r_approx(beta).unwrap());
        }
    }

    #[test]
    fn order_parameters_validate() {
        assert!(OrderParameters::new(vec![0.5, -1.0]).is_ok());
        assert!(OrderParameters::new(vec![1.5]).is_err());
        assert!(OrderParameters::new(vec![f64::NAN]).is_err());
    }
}
