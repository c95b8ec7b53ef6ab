//! Assemble a CGO solution for a smooth potential and print its diagnostics.
//!
//! cargo run --release --example cgo_solution

use std::f64::consts::PI;

use cgo_lab::carleman::Potential;
use cgo_lab::cgo::{assemble_cgo, CgoConfig, Orientation};
use cgo_lab::phase::BoundaryPartition;
use cgo_lab::{DiskGrid, HolomorphicPolynomial};

fn main() -> cgo_lab::Result<()> {
    let grid = DiskGrid::build(48, 96, 0.1)?;
    let q = Potential::from_fn(&grid, |z| (-(z.norm_sqr()) / 0.1).exp());
    let phi = HolomorphicPolynomial::from_real(&[0.0, 0.0, 1.0]);
    let a = HolomorphicPolynomial::from_real(&[1.0]);
    let partition = BoundaryPartition::centered(0.3, 0.45, PI / 2.0)?;
    let cfg = CgoConfig::default();
    for tau in [8.0, 16.0] {
        let u1 = assemble_cgo(&q, &phi, &partition, &a, tau, Orientation::Holomorphic, &cfg)?;
        let d = &u1.diagnostics;
        println!(
            "τ = {tau}: residual {:.3e}, Γ₋ trace {:.1e}, ‖u₁₁,₁‖ {:.3e}, reflected defect {:.3e}",
            d.residual, d.trace_sup, d.u11_1_norm, d.reflected_defect
        );
    }
    Ok(())
}
