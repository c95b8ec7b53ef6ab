//! Dirichlet-to-Neumann matrices and the conductivity-to-potential map.
//!
//! cargo run --release --example dn_map

use cgo_lab::carleman::{assemble_dn_map, conductivity_to_potential, Potential};
use cgo_lab::{DiskGrid, GridFunction};
use num_complex::Complex64;

fn main() -> cgo_lab::Result<()> {
    let grid = DiskGrid::build(32, 64, 0.1)?;
    let free = assemble_dn_map(&Potential::from_fn(&grid, |_| 0.0), 8)?;
    println!("q = 0: max |Λ − diag|n|| = {:.2e}", free.deviation_from_free(8));

    let bump = assemble_dn_map(&Potential::from_fn(&grid, |z| 3.0 * (-z.norm_sqr() / 0.1).exp()), 8)?;
    let n0 = bump.modes.iter().position(|&n| n == 0).unwrap();
    println!("radial bump: Λ₀₀ = {:.6}, symmetry defect {:.1e}", bump.matrix[(n0, n0)].re, bump.symmetry_defect());

    // γ = e^{2x₁} gives q = Δ√γ/√γ = 1
    let gamma = GridFunction::from_fn(&grid, |z| Complex64::new((2.0 * z.re).exp(), 0.0));
    let q = conductivity_to_potential(&gamma)?;
    let dev = q.q.iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
    println!("γ = e^(2x₁): max |q − 1| = {dev:.2e}");
    Ok(())
}
