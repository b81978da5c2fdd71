//! Spectral adversary lower bounds for ordered search and Tarski fixed points.

pub mod adversary;
pub mod herringbone;
pub mod lab;
pub mod lattice;
pub mod problems;
pub mod spectral;
