//! Even cosine-series potentials, general trigonometric fields, and the
//! inverse problem of designing a confinement for a prescribed equilibrium.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::density::TorusDensity;
use crate::error::{Error, Result};
use crate::grid::{self, Grid};

/// Anything that can be evaluated (with derivatives) on the circle.
pub trait Potential {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    fn second_derivative(&self, x: f64) -> f64;

    fn sample(&self, grid: &Grid) -> Vec<f64> {
        grid.points().into_iter().map(|x| self.value(x)).collect()
    }

    fn sample_derivative(&self, grid: &Grid) -> Vec<f64> {
        grid.points().into_iter().map(|x| self.derivative(x)).collect()
    }

    fn sample_second_derivative(&self, grid: &Grid) -> Vec<f64> {
        grid.points()
            .into_iter()
            .map(|x| self.second_derivative(x))
            .collect()
    }
}

/// Reduce to [-π, π] symmetrically so that x and -x stay exact negatives.
fn reduce(x: f64) -> f64 {
    x - TAU * (x / TAU).round()
}

/// Σ_{k=1}^{n} c_k cos(kx). Serialises as a bare JSON array of coefficients.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FourierPotential {
    coeffs: Vec<f64>,
}

impl FourierPotential {
    pub fn new(coeffs: Vec<f64>) -> Self {
        FourierPotential { coeffs }
    }

    pub fn zero() -> Self {
        FourierPotential::default()
    }

    /// `coeff`·cos(kx) alone.
    pub fn single_mode(k: usize, coeff: f64) -> Self {
        let mut coeffs = vec![0.0; k];
        coeffs[k - 1] = coeff;
        FourierPotential { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Number of stored modes, n.
    pub fn modes(&self) -> usize {
        self.coeffs.len()
    }

    /// Index of the highest non-zero mode (0 for the zero potential).
    pub fn effective_modes(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|&c| c != 0.0)
            .map_or(0, |i| i + 1)
    }

    /// Coefficient of cos(kx), k >= 1; zero past the stored modes.
    pub fn coeff(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.coeffs.get(k - 1).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// All Fourier coefficients non-negative: no phase transition.
    pub fn is_h_stable(&self) -> bool {
        self.coeffs.iter().all(|&c| c >= 0.0)
    }

    pub fn sup_norm_bound(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    /// Exact convolution with a density: Σ c_k [cos(kx) C_k + sin(kx) S_k].
    pub fn convolve(&self, rho: &TorusDensity) -> TrigSeries {
        let n = self.modes();
        let mut cos = Vec::with_capacity(n);
        let mut sin = Vec::with_capacity(n);
        for k in 1..=n {
            let c = self.coeff(k);
            cos.push(c * rho.cos_moment(k));
            sin.push(c * rho.sin_moment(k));
        }
        TrigSeries::new(0.0, cos, sin)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        FourierPotential::new(self.coeffs.iter().map(|c| c * factor).collect())
    }
}

impl Potential for FourierPotential {
    fn value(&self, x: f64) -> f64 {
        let x = reduce(x);
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * ((i + 1) as f64 * x).cos())
            .sum()
    }

    fn derivative(&self, x: f64) -> f64 {
        let x = reduce(x);
        -self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let k = (i + 1) as f64;
                k * c * (k * x).sin()
            })
            .sum::<f64>()
    }

    fn second_derivative(&self, x: f64) -> f64 {
        let x = reduce(x);
        -self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let k = (i + 1) as f64;
                k * k * c * (k * x).cos()
            })
            .sum::<f64>()
    }
}

impl fmt::Display for FourierPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coeffs.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for FourierPotential {
    type Err = Error;

    /// Parses a comma-separated coefficient list such as `-1,-0.5`.
    /// The empty string is the zero potential.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches('[').trim_end_matches(']');
        if s.trim().is_empty() {
            return Ok(FourierPotential::zero());
        }
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Domain(format!("bad coefficient {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(FourierPotential::new)
    }
}

/// General real trigonometric polynomial
/// mean + Σ_{k=1}^{K} (a_k cos kx + b_k sin kx).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigSeries {
    pub mean: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl TrigSeries {
    pub fn new(mean: f64, cos: Vec<f64>, sin: Vec<f64>) -> Self {
        assert_eq!(cos.len(), sin.len());
        TrigSeries { mean, cos, sin }
    }

    pub fn modes(&self) -> usize {
        self.cos.len()
    }

    /// Drop the sine part when it is negligible, giving an even potential
    /// (the constant is discarded).
    pub fn to_even(&self, tol: f64) -> Option<FourierPotential> {
        if self.sin.iter().all(|s| s.abs() <= tol) {
            Some(FourierPotential::new(self.cos.clone()))
        } else {
            None
        }
    }
}

impl Potential for TrigSeries {
    fn value(&self, x: f64) -> f64 {
        let x = reduce(x);
        let mut acc = self.mean;
        for (i, (&a, &b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let (s, c) = ((i + 1) as f64 * x).sin_cos();
            acc += a * c + b * s;
        }
        acc
    }

    fn derivative(&self, x: f64) -> f64 {
        let x = reduce(x);
        let mut acc = 0.0;
        for (i, (&a, &b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let k = (i + 1) as f64;
            let (s, c) = (k * x).sin_cos();
            acc += k * (b * c - a * s);
        }
        acc
    }

    fn second_derivative(&self, x: f64) -> f64 {
        let x = reduce(x);
        let mut acc = 0.0;
        for (i, (&a, &b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let k = (i + 1) as f64;
            let (s, c) = (k * x).sin_cos();
            acc -= k * k * (a * c + b * s);
        }
        acc
    }
}

/// A potential known only through its samples on a uniform grid.
/// Off-grid values come from the trigonometric interpolant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "SampledRepr", into = "SampledRepr")]
pub struct SampledPotential {
    samples: Vec<f64>,
    series: TrigSeries,
    nyquist: f64,
}

#[derive(Serialize, Deserialize)]
struct SampledRepr {
    samples: Vec<f64>,
}

impl From<SampledRepr> for SampledPotential {
    fn from(r: SampledRepr) -> Self {
        SampledPotential::from_samples(r.samples)
    }
}

impl From<SampledPotential> for SampledRepr {
    fn from(p: SampledPotential) -> Self {
        SampledRepr { samples: p.samples }
    }
}

impl SampledPotential {
    /// Build from samples at x_j = 2πj/G (G even).
    pub fn from_samples(samples: Vec<f64>) -> Self {
        let g = samples.len();
        assert!(g >= 2 && g.is_multiple_of(2), "sampled potentials need an even grid");
        let spec = grid::forward(&samples);
        let gf = g as f64;
        let half = g / 2;
        let cos = spec[1..half].iter().map(|c| 2.0 * c.re / gf).collect();
        let sin = spec[1..half].iter().map(|c| -2.0 * c.im / gf).collect();
        let series = TrigSeries::new(spec[0].re / gf, cos, sin);
        let nyquist = spec[half].re / gf;
        SampledPotential {
            samples,
            series,
            nyquist,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn series(&self) -> &TrigSeries {
        &self.series
    }

    /// Truncate to the first `m` modes and report the sup-norm error on the
    /// sampling grid (the constant offset is kept in the series).
    pub fn project(&self, m: usize) -> (TrigSeries, f64) {
        let m = m.min(self.series.modes());
        let truncated = TrigSeries::new(
            self.series.mean,
            self.series.cos[..m].to_vec(),
            self.series.sin[..m].to_vec(),
        );
        let grid = Grid::new(self.samples.len()).expect("validated at construction");
        let err = grid
            .points()
            .iter()
            .zip(&self.samples)
            .map(|(&x, &v)| (truncated.value(x) - v).abs())
            .fold(0.0, f64::max);
        (truncated, err)
    }
}

impl Potential for SampledPotential {
    fn value(&self, x: f64) -> f64 {
        let half = (self.samples.len() / 2) as f64;
        self.series.value(x) + self.nyquist * (half * reduce(x)).cos()
    }

    fn derivative(&self, x: f64) -> f64 {
        let half = (self.samples.len() / 2) as f64;
        self.series.derivative(x) - half * self.nyquist * (half * reduce(x)).sin()
    }

    fn second_derivative(&self, x: f64) -> f64 {
        let half = (self.samples.len() / 2) as f64;
        self.series.second_derivative(x) - half * half * self.nyquist * (half * reduce(x)).cos()
    }

    fn sample(&self, grid: &Grid) -> Vec<f64> {
        if grid.len() == self.samples.len() {
            self.samples.clone()
        } else {
            grid.points().into_iter().map(|x| self.value(x)).collect()
        }
    }
}

/// External (confining) potential: an even cosine series or a sampled field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Confinement {
    Fourier(FourierPotential),
    Sampled(SampledPotential),
}

impl Default for Confinement {
    fn default() -> Self {
        Confinement::Fourier(FourierPotential::zero())
    }
}

impl From<FourierPotential> for Confinement {
    fn from(p: FourierPotential) -> Self {
        Confinement::Fourier(p)
    }
}

impl From<SampledPotential> for Confinement {
    fn from(p: SampledPotential) -> Self {
        Confinement::Sampled(p)
    }
}

impl Confinement {
    pub fn is_zero(&self) -> bool {
        match self {
            Confinement::Fourier(p) => p.is_zero(),
            Confinement::Sampled(p) => p.samples.iter().all(|&v| v == 0.0),
        }
    }

    /// Number of cosine modes for the self-consistency system; sampled
    /// fields contribute none.
    pub fn modes(&self) -> usize {
        match self {
            Confinement::Fourier(p) => p.effective_modes(),
            Confinement::Sampled(_) => 0,
        }
    }
}

impl Potential for Confinement {
    fn value(&self, x: f64) -> f64 {
        match self {
            Confinement::Fourier(p) => p.value(x),
            Confinement::Sampled(p) => p.value(x),
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match self {
            Confinement::Fourier(p) => p.derivative(x),
            Confinement::Sampled(p) => p.derivative(x),
        }
    }

    fn second_derivative(&self, x: f64) -> f64 {
        match self {
            Confinement::Fourier(p) => p.second_derivative(x),
            Confinement::Sampled(p) => p.second_derivative(x),
        }
    }

    fn sample(&self, grid: &Grid) -> Vec<f64> {
        match self {
            Confinement::Fourier(p) => p.sample(grid),
            Confinement::Sampled(p) => p.sample(grid),
        }
    }
}

/// External potential making `target` an equilibrium for interaction `w`:
/// V = -β⁻¹ ln ρ̂ - κ W⋆ρ̂, shifted to zero mean.
pub fn design_confinement(
    target: &TorusDensity,
    w: &FourierPotential,
    beta: f64,
    kappa: f64,
) -> Result<SampledPotential> {
    if beta <= 0.0 {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    let min = target.values().iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Err(Error::NonPositiveDensity(min));
    }
    let grid = target.grid();
    let u = w.convolve(target).sample(&grid);
    let mut v: Vec<f64> = target
        .values()
        .iter()
        .zip(&u)
        .map(|(&r, &wr)| -r.ln() / beta - kappa * wr)
        .collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    Ok(SampledPotential::from_samples(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn evaluate_examples() {
        let p = FourierPotential::new(vec![-1.0]);
        assert_eq!(p.value(0.0), -1.0);
        assert!((p.value(PI) - 1.0).abs() < 1e-15);
        let q = FourierPotential::new(vec![-3.0, -1.0]);
        assert!((q.value(PI / 2.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn derivative_examples() {
        let p = FourierPotential::new(vec![-1.0]);
        assert!((p.derivative(PI / 2.0) - 1.0).abs() < 1e-15);
        let q = FourierPotential::new(vec![0.0, -1.0]);
        assert!((q.derivative(PI / 4.0) - 2.0).abs() < 1e-14);
        let h = 1e-5;
        let fd = (q.value(PI / 4.0 + h) - q.value(PI / 4.0 - h)) / (2.0 * h);
        assert!((fd - 2.0).abs() < 1e-8);
        let r = FourierPotential::new(vec![0.3, -2.0, 1.5]);
        assert_eq!(r.derivative(0.0), 0.0);
    }

    #[test]
    fn parse_and_display() {
        let p: FourierPotential = "-1,-0.5".parse().unwrap();
        assert_eq!(p.coeffs(), &[-1.0, -0.5]);
        assert_eq!(p.to_string(), "-1,-0.5");
        assert!("".parse::<FourierPotential>().unwrap().is_zero());
        assert!("-1,x".parse::<FourierPotential>().is_err());
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, "[-1.0,-0.5]");
    }

    #[test]
    fn h_stability() {
        assert!(FourierPotential::new(vec![1.0, 0.0, 2.0]).is_h_stable());
        assert!(!FourierPotential::new(vec![-1.0, 0.5]).is_h_stable());
        assert!(FourierPotential::zero().is_h_stable());
    }

    #[test]
    fn sampled_interpolant_reproduces_samples_and_trig_polys() {
        let grid = Grid::new(32).unwrap();
        let f = TrigSeries::new(0.3, vec![1.0, 0.0, -0.2], vec![0.5, 0.1, 0.0]);
        let s = SampledPotential::from_samples(f.sample(&grid));
        for &x in &[0.1, 1.3, 2.9, 5.5] {
            assert!((s.value(x) - f.value(x)).abs() < 1e-13);
            assert!((s.derivative(x) - f.derivative(x)).abs() < 1e-12);
        }
        let (proj, err) = s.project(3);
        assert!(err < 1e-13);
        assert!((proj.mean - 0.3).abs() < 1e-14);
    }

    #[test]
    fn confinement_json_forms() {
        let c: Confinement = serde_json::from_str("[0.2]").unwrap();
        assert_eq!(c, Confinement::Fourier(FourierPotential::new(vec![0.2])));
        let s: Confinement = serde_json::from_str(r#"{"samples":[0,1,0,-1,0,1,0,-1]}"#).unwrap();
        assert!(matches!(s, Confinement::Sampled(_)));
    }
}
