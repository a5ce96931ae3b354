//! Shared fixtures for the benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;

use subdiff_core::{CoefficientField, EllipticOperator, Mesh};

/// Dirichlet Laplacian with unit coefficient on `(0, 1)` with `n` interior nodes.
pub fn unit_operator(n: usize) -> Arc<EllipticOperator> {
    let mesh = Mesh::interval(1.0, n).expect("valid mesh");
    let coeff = CoefficientField::constant(&mesh, 1.0).expect("positive coefficient");
    Arc::new(EllipticOperator::assemble(&mesh, &coeff).expect("assembled operator"))
}

pub fn sine_field(op: &EllipticOperator) -> Vec<f64> {
    op.mesh().sample(|x| (PI * x[0]).sin())
}
