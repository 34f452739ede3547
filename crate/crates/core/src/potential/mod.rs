//! Grid functions and potential-theoretic checks.

mod checks;
mod classical;
mod grid;
mod io;
mod subaffine;
mod supconv;

pub use checks::{
    classical_subharmonic_check, directionality_check, find_bad_test_jet, inner_domain, translate_perturb,
    translate_perturb_classical,
};
pub use classical::{Affinely, Classical, ClosureFunction, QuadraticFunction, SumFunction};
pub use grid::{BoundaryMode, BoxDomain, CellTag, Face, GridFunction, Side};
pub use subaffine::{sub_a_check, sub_a_check_with, QuadraticClass, CLASS_SAMPLES};
pub use supconv::{lattice_directions, quasi_convexity_check, sup_convolution, sup_convolution_global};
