//! Oscillatory integrals against their stationary-phase leading term, and frequency fitting.
//!
//! cargo run --example stationary_phase

use cgo_lab::phase::{find_critical_points, PhaseFields};
use cgo_lab::stationary::{extract_coefficients, leading_term, oscillatory_integral};
use cgo_lab::{DiskGrid, GridFunction, HolomorphicPolynomial};
use num_complex::Complex64;

fn main() -> cgo_lab::Result<()> {
    let grid = DiskGrid::build(96, 192, 0.1)?;
    let poly = HolomorphicPolynomial::from_real(&[0.0, 0.0, 1.0]);
    let phase = PhaseFields::new(&poly, &grid);
    let crit = find_critical_points(&poly, 1e-10)?;
    let s = 0.2;
    let g = GridFunction::from_fn(&grid, |z| Complex64::new((-z.norm_sqr() / (s * s)).exp(), 0.0));
    for tau in [2.0, 4.0, 6.0, 8.0] {
        // closed form of ∫e^{−|z|²/s²}e^{2iτ xy}
        let exact = std::f64::consts::PI / (s.powi(-4) + 4.0 * tau * tau).sqrt();
        match oscillatory_integral(&g, &phase, tau) {
            Ok(i) => {
                let l = leading_term(&g, &crit, &phase, tau)?;
                println!("τ = {tau}: integral {:.8} (exact {exact:.8}), leading {:.8}", i.re, l.re);
            }
            Err(e) => println!("τ = {tau}: rejected, {e}"),
        }
    }

    // τJ(τ) = c₁e^{2iτ·0.5} + c₂e^{2iτ·(−1)} with noise; recover c₁, c₂
    let (c1, c2) = (Complex64::new(0.7, -0.2), Complex64::new(0.1, 0.4));
    let samples: Vec<(f64, Complex64)> = (0..24)
        .map(|k| {
            let t = 4.0 + 0.37 * k as f64;
            let noise = Complex64::new(1e-6 * (k as f64).sin(), 0.0);
            (t, (c1 * Complex64::from_polar(1.0, t) + c2 * Complex64::from_polar(1.0, -2.0 * t) + noise) / t)
        })
        .collect();
    let fit = extract_coefficients(&samples, &[0.5, -1.0])?;
    for (k, c) in fit.coefficients.iter().enumerate() {
        println!("c{} = {c:.6}", k + 1);
    }
    println!("condition {:.2}, expected {c1}, {c2}", fit.condition);
    Ok(())
}
