//! Probability densities sampled on the circle grid, with cached Fourier
//! moments and the diagnostics used to compare states (peaks, distances,
//! alignment up to rotation).

use std::f64::consts::{PI, TAU};
use std::path::Path;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, Grid};
use crate::io;

/// Samples in [-NEGATIVITY_TOL, 0) are clamped to zero; anything lower is an error.
pub const NEGATIVITY_TOL: f64 = 1e-10;

/// Relative excess over the uniform level a maximum must reach to be a peak.
pub const PEAK_THRESHOLD: f64 = 0.05;

/// Minimum topographic prominence (absolute density units) of a peak.
pub const PEAK_MIN_PROMINENCE: f64 = 0.01 / TAU;

/// Density of the uniform state, 1/(2π).
pub const UNIFORM_LEVEL: f64 = 1.0 / TAU;

/// A normalised probability density on [0, 2π).
///
/// Moments are C_k = ∫cos(kx)ρ dx and S_k = ∫sin(kx)ρ dx for k = 1..=G/2-1,
/// computed once by FFT (trapezoidal quadrature, exact for band-limited ρ).
#[derive(Debug, Clone, PartialEq)]
pub struct TorusDensity {
    grid: Grid,
    values: Vec<f64>,
    cos_moments: Vec<f64>,
    sin_moments: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub position: f64,
    pub height: f64,
}

/// Best rotation of one density onto another.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// s such that b(x + s) best matches a(x), in [0, 2π).
    pub shift: f64,
    /// L¹ distance between a and b(· + s).
    pub distance: f64,
}

impl TorusDensity {
    /// Validate, clamp tiny negatives and normalise to unit mass.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        let grid = Grid::new(values.len())?;
        let mut min = f64::INFINITY;
        for v in values.iter_mut() {
            if !v.is_finite() {
                return Err(Error::Domain("density sample is not finite".into()));
            }
            min = min.min(*v);
            if *v < 0.0 {
                if *v < -NEGATIVITY_TOL {
                    return Err(Error::NegativeDensity(*v));
                }
                *v = 0.0;
            }
        }
        let mass = grid.integrate(&values);
        if mass <= 0.0 {
            return Err(Error::NonPositiveDensity(min));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Ok(Self::from_normalized(grid, values))
    }

    fn from_normalized(grid: Grid, values: Vec<f64>) -> Self {
        let spec = grid::forward(&values);
        let dx = grid.spacing();
        let kmax = grid.max_mode();
        let cos_moments = (1..=kmax).map(|k| dx * spec[k].re).collect();
        let sin_moments = (1..=kmax).map(|k| -dx * spec[k].im).collect();
        TorusDensity {
            grid,
            values,
            cos_moments,
            sin_moments,
        }
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: Grid, f: F) -> Result<Self> {
        Self::new(grid.points().into_iter().map(f).collect())
    }

    pub fn uniform(g: usize) -> Result<Self> {
        let grid = Grid::new(g)?;
        Ok(TorusDensity {
            grid,
            values: vec![UNIFORM_LEVEL; g],
            cos_moments: vec![0.0; grid.max_mode()],
            sin_moments: vec![0.0; grid.max_mode()],
        })
    }

    /// Band-limited density 1/(2π) + (1/π) Σ (C_k cos kx + S_k sin kx).
    pub fn from_moments(grid: Grid, cos: &[f64], sin: &[f64]) -> Result<Self> {
        Self::from_fn(grid, |x| {
            let mut v = UNIFORM_LEVEL;
            for (i, (&c, &s)) in cos.iter().zip(sin).enumerate() {
                let (sk, ck) = ((i + 1) as f64 * x).sin_cos();
                v += (c * ck + s * sk) / PI;
            }
            v
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn cos_moments(&self) -> &[f64] {
        &self.cos_moments
    }

    pub fn sin_moments(&self) -> &[f64] {
        &self.sin_moments
    }

    /// C_k; falls back to direct quadrature past the cached range.
    pub fn cos_moment(&self, k: usize) -> f64 {
        match k {
            0 => self.mass(),
            k if k <= self.cos_moments.len() => self.cos_moments[k - 1],
            k => self.direct_moment(k, f64::cos),
        }
    }

    pub fn sin_moment(&self, k: usize) -> f64 {
        match k {
            0 => 0.0,
            k if k <= self.sin_moments.len() => self.sin_moments[k - 1],
            k => self.direct_moment(k, f64::sin),
        }
    }

    fn direct_moment(&self, k: usize, f: fn(f64) -> f64) -> f64 {
        let g = self.grid;
        let w: Vec<f64> = (0..g.len())
            .map(|j| f(k as f64 * g.point(j)) * self.values[j])
            .collect();
        g.integrate(&w)
    }

    /// |ρ̂_k| = sqrt(C_k² + S_k²).
    pub fn mode_amplitude(&self, k: usize) -> f64 {
        self.cos_moment(k).hypot(self.sin_moment(k))
    }

    /// sup |ρ - 1/(2π)|.
    pub fn deviation_from_uniform(&self) -> f64 {
        self.values
            .iter()
            .map(|v| (v - UNIFORM_LEVEL).abs())
            .fold(0.0, f64::max)
    }

    /// On-grid rotation: result(x) = ρ(x - steps·dx).
    pub fn rotated(&self, steps: isize) -> Self {
        let g = self.len() as isize;
        let values = (0..g)
            .map(|j| self.values[(j - steps).rem_euclid(g) as usize])
            .collect();
        Self::from_normalized(self.grid, values)
    }

    /// Spectral translation by an arbitrary angle: result(x) = ρ(x - s).
    pub fn shifted(&self, s: f64) -> Result<Self> {
        let mut spec = grid::forward(&self.values);
        let half = self.len() / 2;
        for (j, c) in spec.iter_mut().enumerate() {
            let k = self.grid.wavenumber(j);
            if j == half {
                // Nyquist mode cannot carry a phase on a real grid.
                *c *= (k * s).cos();
            } else {
                *c *= Complex64::from_polar(1.0, -k * s);
            }
        }
        Self::new(grid::inverse_real(spec))
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::GridMismatch(self.len(), other.len()));
        }
        Ok(())
    }

    pub fn distance_l1(&self, other: &Self) -> Result<f64> {
        self.check_grid(other)?;
        let d: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .collect();
        Ok(self.grid.integrate(&d))
    }

    pub fn distance_l2(&self, other: &Self) -> Result<f64> {
        self.check_grid(other)?;
        let d: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        Ok(self.grid.integrate(&d).sqrt())
    }

    pub fn distance_sup(&self, other: &Self) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Rotation of `other` maximising circular cross-correlation with `self`.
    pub fn align(&self, other: &Self) -> Result<Alignment> {
        self.check_grid(other)?;
        let a = grid::forward(&self.values);
        let b = grid::forward(&other.values);
        let prod: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x.conj() * y).collect();
        let corr = grid::inverse_real(prod);
        let mut best = 0;
        for (s, &c) in corr.iter().enumerate() {
            if c > corr[best] + 1e-15 * corr[best].abs() {
                best = s;
            }
        }
        let aligned = other.rotated(-(best as isize));
        Ok(Alignment {
            shift: self.grid.point(best),
            distance: self.distance_l1(&aligned)?,
        })
    }

    /// Circular local maxima exceeding (1 + PEAK_THRESHOLD)/(2π) with at
    /// least PEAK_MIN_PROMINENCE of topographic prominence, sorted by position.
    pub fn peaks(&self) -> Vec<Peak> {
        self.peaks_with(PEAK_THRESHOLD, PEAK_MIN_PROMINENCE)
    }

    pub fn peaks_with(&self, threshold: f64, min_prominence: f64) -> Vec<Peak> {
        let v = &self.values;
        let g = v.len();
        let level = UNIFORM_LEVEL * (1.0 + threshold);
        let at = |j: isize| v[j.rem_euclid(g as isize) as usize];
        let global_min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let dx = self.grid.spacing();

        let mut peaks = Vec::new();
        for j in 0..g as isize {
            let h = at(j);
            if h <= level || !(h > at(j - 1) && h >= at(j + 1)) {
                continue;
            }
            // Walk each way to the first strictly higher sample.
            let walk = |dir: isize| -> Option<f64> {
                let mut lo = h;
                for step in 1..g as isize {
                    let y = at(j + dir * step);
                    if y > h {
                        return Some(lo);
                    }
                    lo = lo.min(y);
                }
                None
            };
            let prominence = match (walk(-1), walk(1)) {
                (Some(l), Some(r)) => h - l.max(r),
                (Some(l), None) => h - l,
                (None, Some(r)) => h - r,
                (None, None) => h - global_min,
            };
            if prominence < min_prominence {
                continue;
            }
            let (ym, yp) = (at(j - 1), at(j + 1));
            let curv = ym - 2.0 * h + yp;
            let offset = if curv < 0.0 { 0.5 * (ym - yp) / curv } else { 0.0 };
            peaks.push(Peak {
                position: grid::wrap_angle((j as f64 + offset) * dx),
                height: h,
            });
        }
        peaks.sort_by(|a, b| a.position.total_cmp(&b.position));
        peaks
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        io::write_columns(path, &["x", "rho"], &[&self.grid.points(), &self.values])
    }

    pub fn to_record(&self) -> DensityRecord {
        DensityRecord {
            grid: self.len(),
            x: self.grid.points(),
            rho: self.values.clone(),
            cos_moments: self.cos_moments.clone(),
            sin_moments: self.sin_moments.clone(),
        }
    }

    pub fn write_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        io::write_json(path, &self.to_record())
    }
}

/// JSON form of a density: grid, samples and moments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityRecord {
    pub grid: usize,
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    pub cos_moments: Vec<f64>,
    pub sin_moments: Vec<f64>,
}

impl TryFrom<DensityRecord> for TorusDensity {
    type Error = Error;

    fn try_from(r: DensityRecord) -> Result<Self> {
        TorusDensity::new(r.rho)
    }
}
