//! Formal germs of self-maps of the disk in positive characteristic: their
//! invariants, normal forms, Böttcher-type coordinates and growth bounds.

pub mod fields;
pub mod scalar;
pub mod series;
pub mod invariants;
pub mod normalizer;
pub mod analytic;
pub mod multidim;
pub mod cli;
