//! Core library for compiling multi-domain physical-system netlists into
//! power-oriented graph block schemes and state-space models, reducing them
//! by congruent transformations, and simulating the result.

pub mod expr;
pub mod modelio;
pub mod netlist;
pub mod pogir;
pub mod reduce;
pub mod render;
pub mod sim;
pub mod statespace;
pub mod testgen;
pub mod topology;
