//! ∂̄⁻¹ on the disk grid and the oscillatory operator R_Φ.
//!
//! cargo run --example cauchy_transform

use cgo_lab::cauchy::{dbar_inverse, dbar_inverse_at, r_phi, r_phi_residual};
use cgo_lab::phase::PhaseFields;
use cgo_lab::{DiskGrid, GridFunction, HolomorphicPolynomial};
use num_complex::Complex64;

fn main() -> cgo_lab::Result<()> {
    let grid = DiskGrid::build(64, 128, 0.1)?;
    let one = GridFunction::from_fn(&grid, |_| Complex64::new(1.0, 0.0));
    let pts = [Complex64::new(0.3, 0.1), Complex64::new(-0.5, 0.6)];
    for (z, v) in pts.iter().zip(dbar_inverse_at(&one, &pts)) {
        println!("∂̄⁻¹1 at {z}: {v:.12}  (z̄ = {})", z.conj());
    }

    let g = GridFunction::from_fn(&grid, |z| Complex64::new((-z.norm_sqr() / 0.04).exp(), 0.0) * (1.0 + z));
    let u = dbar_inverse(&g);
    println!("max |∂̄(∂̄⁻¹g) − g| = {:.2e}", u.dbar().sub(&g).sup());

    let phase = PhaseFields::new(&HolomorphicPolynomial::from_real(&[0.0, 0.0, 1.0]), &grid);
    for tau in [8.0, 32.0] {
        let r = r_phi(&g, &phase, tau)?;
        let res = r_phi_residual(&g, &phase, tau)?;
        println!("τ = {tau}: sup |R_Φg| = {:.3e}, defining-equation residual {:.2e}", r.sup(), res.sup());
    }
    Ok(())
}
