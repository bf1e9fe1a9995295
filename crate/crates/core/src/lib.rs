//! Parametric Galton-Watson trees driven by a power series `psi`: Lagrange
//! inversion of `g = z psi(g)`, extinction probabilities, progeny laws,
//! conditional tree measures, coefficient asymptotics and simulation.

pub mod error;
pub mod asym;
pub mod cli;
pub mod family;
pub mod gw;
pub mod lagrange;
pub mod series;
pub mod sim;
pub mod trees;

pub use error::{Error, Result};
pub use family::{Classification, FamilyPoint, OffspringKind, OffspringSpec};
pub use gw::{Extinction, ExtinctionMethod, ProgenyLaw};
pub use lagrange::LagrangeSolution;
pub use series::{Coeff, PowerSeries};
pub use trees::{PlaneTree, SubclassPredicate};
