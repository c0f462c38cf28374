//! Bead configurations on threads and their scaling limits: exact counting
//! and uniform sampling of standard (skew) Young tableaux, the bijection with
//! bead configurations, entropy functionals and free energies, a variational
//! limit-shape solver, and exact dimer partition functions.

pub mod dimer;
pub mod entropy;
pub mod io;
pub mod shapes;
pub mod solver;
pub mod tableaux;
