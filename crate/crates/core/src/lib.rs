//! Numerical toolkit for McKean-Vlasov (mean-field Fokker-Planck) dynamics on
//! the circle with finitely many Fourier modes: stationary states and their
//! order parameters, pseudospectral PDE evolution, interacting particle
//! simulation, and linear stability of uniform and peaked states.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod error;
pub mod grid;
pub mod io;
pub mod model;
pub mod particles;
pub mod pde;
pub mod potentials;
pub mod self_consistency;
pub mod stability;

pub use density::{Alignment, Peak, TorusDensity};
pub use error::{Error, Result};
pub use grid::Grid;
pub use model::Model;
pub use potentials::{design_confinement, Confinement, FourierPotential, Potential, SampledPotential, TrigSeries};
pub use self_consistency::{
    enumerate_branches, solve_fixed_point, standard_seeds, BranchLabel, Method, OrderParameters,
    SelfConsistencySolution, SolverOptions,
};
pub use pde::{default_initial, evolve, PdeConfig, PdeSolver, Trajectory};
pub use particles::{empirical_density, ensemble_average, sample_initial, ParticleEnsemble, SdeConfig};
pub use stability::{critical_beta, growth_rates, SchroedingerOperator, Sector, SpectrumReport};
