//! Critical points, Hessians and the boundary sign classification of a holomorphic phase.
//!
//! cargo run --example phase_geometry

use std::f64::consts::PI;

use cgo_lab::phase::{classify_boundary_poly, find_critical_points, BoundaryPartition};
use cgo_lab::HolomorphicPolynomial;
use num_complex::Complex64;

fn main() -> cgo_lab::Result<()> {
    // Φ = (z − 0.3)(z + 0.2)(z − 0.5) has two simple critical points
    let phi = HolomorphicPolynomial::from_roots(Complex64::new(1.0, 0.0), &[0.3.into(), (-0.2).into(), 0.5.into()]);
    let crit = find_critical_points(&phi, 1e-10)?;
    for (z, h) in crit.points.iter().zip(&crit.second_derivatives) {
        println!("critical point {z:.6}  Φ″ = {h:.6}");
    }

    let partition = BoundaryPartition::centered(0.3, 0.45, PI / 2.0)?;
    let samples: Vec<f64> = (0..16).map(|k| 2.0 * PI * k as f64 / 16.0).collect();
    let class = classify_boundary_poly(&phi, 0.0, 0.0, &samples, &partition);
    for (t, d) in class.angles.iter().zip(&class.normal_derivative) {
        println!("θ = {t:.3}  ∂_νφ₁ = {d:+.4}");
    }
    println!("Γ₋ inside ∂Ω₋: {}, S inside ∂Ω₊: {}", class.gamma_minus_contained, class.s_contained);
    Ok(())
}
