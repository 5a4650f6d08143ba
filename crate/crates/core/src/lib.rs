//! Variational computation of homoclinic orbits for singular, time-periodic
//! second-order Hamiltonian systems `u'' + a(t) grad W(u) = 0`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod error;
pub mod multiplicity;
pub mod potential;
pub mod scalar;
pub mod solver;
pub mod space;

pub use action::{ActionEval, ActionFunctional, PositivityReport, ResidualReport};
pub use error::{Error, Result};
pub use multiplicity::{
    geometric_distance, is_distinct, multibump_guess, ps_split, search_distinct, BumpDecomposition,
    SearchConfig, SearchOutcome, SolutionLibrary,
};
pub use potential::{
    CoefficientSpec, CustomPotential, GrowthProfile, HamiltonianSystem, Potential, PowerWell,
    StrongForceWitness,
};
pub use scalar::Scalar;
pub use solver::{
    descend_to_critical, minimize_over_e, solve_homoclinic, HomoclinicCandidate, Solution,
    SolverConfig,
};
pub use space::{Grid, GridFunction, SobolevReport, SobolevSweep};

pub type Grid64 = Grid<f64>;
pub type Trajectory64 = GridFunction<f64>;
pub type ExampleSystem64 = HamiltonianSystem<f64, PowerWell<f64>>;
