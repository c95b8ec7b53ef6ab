//! Recover the missing Neumann data of a harmonic function on the arcs P_ε.
//!
//! cargo run --example cauchy_completion

use cgo_lab::completion::{complete_cauchy_data, default_schedule, CauchyData, ExtremalConfig, HarmonicExpansion};
use cgo_lab::phase::BoundaryPartition;

fn main() -> cgo_lab::Result<()> {
    let partition = BoundaryPartition::centered(1.2, 0.3, 0.0)?;
    // ψ = Re z³ − 0.5 Im z
    let mut psi = HarmonicExpansion::zero(3);
    psi.alpha[3] = 1.0;
    psi.beta[1] = -0.5;
    let data = CauchyData::from_harmonic(partition, 256, &psi);
    let cfg = ExtremalConfig { eps_reg: 1e-3, degree: 12, boundary_samples: 256, window_ramp: 0.05 };
    let done = complete_cauchy_data(&data, &cfg, &default_schedule(), 32)?;
    let err = done
        .angles
        .iter()
        .zip(&done.normal_derivative)
        .fold(0.0f64, |m, (&t, &b)| m.max((b - psi.normal_derivative(t)).abs()));
    println!("ε steps: {}", done.history.len());
    println!("max |∂_νψ error| on P_ε: {err:.2e}");
    Ok(())
}
