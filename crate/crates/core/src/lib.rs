//! Game engineering: find minimal payoff perturbations of a finite
//! normal-form game so that chosen pure profiles become strict Nash
//! equilibria and others stop being equilibria.

pub mod bench;
pub mod error;
pub mod game;
pub mod io;
pub mod milp;
pub mod model;
pub mod pipeline;

pub use error::{Error, Result};
pub use game::{Game, Perturbation, PerturbationSet, Profile};
pub use pipeline::{engineer, enumerate_solutions, verify, Enumeration, Solution, Termination};
