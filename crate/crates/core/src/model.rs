//! Parameter bundle for the mean-field dynamics
//! ∂ρ/∂t = β⁻¹ρ'' + (V'ρ)' + κ((W'⋆ρ)ρ)'
//! together with its Gibbs states and free energy.

use serde::{Deserialize, Serialize};

use crate::density::TorusDensity;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::potentials::{Confinement, FourierPotential, Potential};

/// Largest admissible |exponent| before exp() is considered unsafe.
pub const EXPONENT_GUARD: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    /// External potential V.
    #[serde(rename = "V", default)]
    pub confinement: Confinement,
    /// Interaction potential W.
    #[serde(rename = "W")]
    pub interaction: FourierPotential,
    pub beta: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

fn default_kappa() -> f64 {
    1.0
}

impl Model {
    /// No confinement, κ = 1.
    pub fn new(interaction: FourierPotential, beta: f64) -> Self {
        Model {
            confinement: Confinement::default(),
            interaction,
            beta,
            kappa: 1.0,
        }
    }

    pub fn with_confinement(mut self, v: impl Into<Confinement>) -> Self {
        self.confinement = v.into();
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Domain(format!("beta must be positive, got {}", self.beta)));
        }
        if !self.kappa.is_finite() {
            return Err(Error::Domain("kappa must be finite".into()));
        }
        Ok(())
    }

    /// Number of order parameters, max(n, n').
    pub fn order(&self) -> usize {
        self.interaction
            .effective_modes()
            .max(self.confinement.modes())
            .max(1)
    }

    /// Gibbs state for order parameters `r` on a G-point grid.
    pub fn gibbs(&self, r: &[f64], g: usize) -> Result<TorusDensity> {
        gibbs(&self.confinement, &self.interaction, r, self.beta, self.kappa, g)
    }

    /// Mean-field potential V + κ W⋆ρ sampled on ρ's grid.
    pub fn mean_field_potential(&self, rho: &TorusDensity) -> Vec<f64> {
        let grid = rho.grid();
        let v = self.confinement.sample(&grid);
        let u = self.interaction.convolve(rho).sample(&grid);
        v.iter().zip(&u).map(|(a, b)| a + self.kappa * b).collect()
    }

    /// F = β⁻¹∫ρ log ρ + ∫Vρ + (κ/2)∫(W⋆ρ)ρ, with 0·log 0 = 0.
    pub fn free_energy(&self, rho: &TorusDensity) -> f64 {
        free_energy(rho, &self.confinement, &self.interaction, self.beta, self.kappa)
    }

    /// sup-norm of ρ - Z⁻¹exp(-β(V + κW⋆ρ)).
    pub fn stationary_residual(&self, rho: &TorusDensity) -> f64 {
        let phi = self.mean_field_potential(rho);
        let target = boltzmann(&phi, self.beta, &rho.grid());
        rho.values()
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Normalised exp(-β φ) on the grid (max-shifted for stability).
pub(crate) fn boltzmann(phi: &[f64], beta: f64, grid: &Grid) -> Vec<f64> {
    let min = phi.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = phi.iter().map(|p| (-beta * (p - min)).exp()).collect();
    let z = grid.integrate(&w);
    w.iter_mut().for_each(|x| *x /= z);
    w
}

/// ρ ∝ exp(-β [V + κ Σ_k r_k a_k cos(kx)]), normalised by trapezoidal quadrature.
pub fn gibbs<P: Potential + ?Sized>(
    v: &P,
    w: &FourierPotential,
    r: &[f64],
    beta: f64,
    kappa: f64,
    g: usize,
) -> Result<TorusDensity> {
    if beta <= 0.0 {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    let grid = Grid::new(g)?;
    let phi: Vec<f64> = grid
        .points()
        .into_iter()
        .zip(v.sample(&grid))
        .map(|(x, vx)| {
            let inter: f64 = r
                .iter()
                .enumerate()
                .map(|(i, &rk)| {
                    let k = i + 1;
                    rk * w.coeff(k) * (k as f64 * x).cos()
                })
                .sum();
            vx + kappa * inter
        })
        .collect();
    let sup = phi.iter().map(|p| p.abs()).fold(0.0, f64::max);
    if beta * sup > EXPONENT_GUARD {
        return Err(Error::OverflowRisk(beta * sup));
    }
    TorusDensity::new(boltzmann(&phi, beta, &grid))
}

pub fn free_energy<P: Potential + ?Sized>(
    rho: &TorusDensity,
    v: &P,
    w: &FourierPotential,
    beta: f64,
    kappa: f64,
) -> f64 {
    let grid = rho.grid();
    let entropy: Vec<f64> = rho
        .values()
        .iter()
        .map(|&p| if p > 0.0 { p * p.ln() } else { 0.0 })
        .collect();
    let vs = v.sample(&grid);
    let u = w.convolve(rho).sample(&grid);
    let energy: Vec<f64> = rho
        .values()
        .iter()
        .zip(vs.iter().zip(&u))
        .map(|(&p, (&vx, &ux))| p * (vx + 0.5 * kappa * ux))
        .collect();
    grid.integrate(&entropy) / beta + grid.integrate(&energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::UNIFORM_LEVEL;
    use std::f64::consts::TAU;

    fn kuramoto(beta: f64) -> Model {
        Model::new(FourierPotential::new(vec![-1.0]), beta)
    }

    #[test]
    fn gibbs_with_zero_exponent_is_uniform() {
        let m = Model::new(FourierPotential::new(vec![-1.0, -2.0]), 3.0);
        let rho = m.gibbs(&[0.0, 0.0], 64).unwrap();
        assert!(rho.deviation_from_uniform() < 1e-15);
    }

    #[test]
    fn gibbs_kuramoto_closed_form() {
        let (beta, r1) = (2.5, 0.4);
        let rho = kuramoto(beta).gibbs(&[r1], 128).unwrap();
        let grid = rho.grid();
        let raw: Vec<f64> = grid.points().iter().map(|x| (beta * r1 * x.cos()).exp()).collect();
        let z = grid.integrate(&raw);
        for (a, b) in rho.values().iter().zip(&raw) {
            assert!((a - b / z).abs() < 1e-14);
        }
    }

    #[test]
    fn gibbs_two_peak_when_only_second_mode() {
        let m = Model::new(FourierPotential::new(vec![-1.0, -1.0]), 3.0);
        let rho = m.gibbs(&[0.0, 0.6], 256).unwrap();
        assert_eq!(rho.peaks().len(), 2);
    }

    #[test]
    fn overflow_guard() {
        let m = kuramoto(1000.0);
        assert!(matches!(m.gibbs(&[1.0], 64), Err(Error::OverflowRisk(_))));
    }

    #[test]
    fn free_energy_of_uniform() {
        let u = TorusDensity::uniform(64).unwrap();
        let free = Model::new(FourierPotential::zero(), 1.0);
        let expected = UNIFORM_LEVEL.ln();
        assert!((free.free_energy(&u) - expected).abs() < 1e-14);
        assert!((expected + 1.837_877_066_409_345).abs() < 1e-12);
        let k = kuramoto(1.0).with_kappa(7.0);
        assert!((k.free_energy(&u) - expected).abs() < 1e-14);
    }

    #[test]
    fn uniform_is_stationary_without_confinement() {
        let u = TorusDensity::uniform(128).unwrap();
        let m = Model::new(FourierPotential::new(vec![-3.0, 0.5, -1.0]), 7.0);
        assert!(m.stationary_residual(&u) < 1e-12);
        let confined = kuramoto(3.0).with_confinement(FourierPotential::new(vec![-0.2]));
        assert!(confined.stationary_residual(&u) > 0.01);
        assert!((u.mass() - TAU * UNIFORM_LEVEL).abs() < 1e-15);
    }

    #[test]
    fn model_json_uses_short_names() {
        let m = kuramoto(3.0).with_confinement(FourierPotential::new(vec![-0.2]));
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"V\":[-0.2]") && s.contains("\"W\":[-1.0]"), "{s}");
        let back: Model = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
