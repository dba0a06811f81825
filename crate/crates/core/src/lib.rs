//! Discrepancy, height and the inequality D <= sqrt(2) sqrt(H) for root
//! distributions of polynomials and for measures on the circle.

pub mod cli;
pub mod discretize;
pub mod extremal;
pub mod harmonic;
pub mod kernels;
pub mod measures;
pub mod polynomials;
pub mod sediment;
