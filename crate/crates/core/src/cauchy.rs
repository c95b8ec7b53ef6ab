//! Cauchy transforms ∂̄⁻¹, ∂⁻¹ on the unit disk and the conjugated operators R_Φ, R̃_Φ.
//!
//! On the grid, ∂̄⁻¹ is evaluated mode by mode. Writing ĝ_n(ρ) for the angular
//! Fourier coefficients,
//!
//!   T g(re^{iθ}) = 2Σ_{k≥0} e^{−i(k+1)θ} A_k(r) − 2Σ_{k≥0} e^{ikθ} B_k(r),
//!   A_k(r) = ∫_0^r (ρ/r)^{k+1} ĝ_{−k}(ρ) dρ,   B_k(r) = ∫_r^1 (r/ρ)^k ĝ_{k+1}(ρ) dρ,
//!
//! and both radial integrals are accumulated node to node with damping factors ≤ 1.

use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::GaussLegendre;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::grid::{DiskGrid, GridFunction};
use crate::phase::PhaseFields;

const SUB_NODES: usize = 20;

/// Default bound on τ·osc(Im Φ) before the phase data is considered corrupt.
pub const DEFAULT_EXPONENT_BUDGET: f64 = 1e6;

/// Sub-quadrature on the radial segments between consecutive nodes.
#[derive(Debug)]
pub struct CauchyPlan {
    rho: Vec<f64>,
    w: Vec<f64>,
    /// Segment s covers [r_{s−1}, r_s] with r_{−1} = 0 and r_{N_r} = 1.
    seg: Vec<std::ops::Range<usize>>,
    even: DMatrix<f64>,
    odd: DMatrix<f64>,
}

impl CauchyPlan {
    fn new(grid: &DiskGrid) -> Self {
        let gl = GaussLegendre::new(NonZeroUsize::new(SUB_NODES).unwrap());
        let ref_pairs = gl.as_node_weight_pairs();
        let mut ends = vec![0.0];
        ends.extend(grid.r.iter().copied());
        ends.push(1.0);
        let mut rho = Vec::new();
        let mut w = Vec::new();
        let mut seg = Vec::new();
        for s in 0..ends.len() - 1 {
            let (a, b) = (ends[s], ends[s + 1]);
            let start = rho.len();
            for &(x, wx) in ref_pairs {
                rho.push(a + (b - a) * (x + 1.0) / 2.0);
                w.push(wx * (b - a) / 2.0);
            }
            seg.push(start..rho.len());
        }
        let nr = grid.nr;
        let mut even = DMatrix::zeros(rho.len(), nr);
        let mut odd = DMatrix::zeros(rho.len(), nr);
        for (q, &p) in rho.iter().enumerate() {
            let (s, m) = grid.radial.interp_row(p);
            for k in 0..nr {
                even[(q, k)] = s[k] + m[k];
                odd[(q, k)] = s[k] - m[k];
            }
        }
        Self {
            rho,
            w,
            seg,
            even,
            odd,
        }
    }

    /// ĝ_n at the sub-nodes, given ĝ_n at the grid radii.
    fn radial_profile(&self, n: i64, at_nodes: &[Complex64]) -> Vec<Complex64> {
        let l = if n.rem_euclid(2) == 0 {
            &self.even
        } else {
            &self.odd
        };
        (0..self.rho.len())
            .map(|q| {
                at_nodes
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * l[(q, k)])
                    .sum()
            })
            .collect()
    }
}

fn plan(grid: &DiskGrid) -> &CauchyPlan {
    grid.cauchy_plan.get_or_init(|| CauchyPlan::new(grid))
}

/// Ring coefficients arranged as coeffs[slot][i].
fn mode_table(grid: &DiskGrid, values: &[Complex64]) -> Vec<Vec<Complex64>> {
    let nt = grid.nt;
    let rings: Vec<Vec<Complex64>> = (0..grid.nr)
        .map(|i| grid.ring_fft(&values[i * nt..(i + 1) * nt]))
        .collect();
    (0..nt)
        .map(|slot| rings.iter().map(|c| c[slot]).collect())
        .collect()
}

/// ∂̄⁻¹g = −(1/π)∫_Ω g(ζ)/(ζ − z) dA(ζ) at the grid nodes.
pub fn dbar_inverse(g: &GridFunction) -> GridFunction {
    let grid = &g.grid;
    let p = plan(grid);
    let nt = grid.nt;
    let nr = grid.nr;
    let half = (nt / 2) as i64;
    let modes = mode_table(grid, &g.values);
    let slot = |n: i64| n.rem_euclid(nt as i64) as usize;

    // each job returns (output slot, radial profile at the nodes)
    let inner: Vec<(usize, Vec<Complex64>)> = (0..half)
        .into_par_iter()
        .map(|k| {
            let n = -k;
            let prof = p.radial_profile(n, &modes[slot(n)]);
            let e = (k + 1) as i32;
            let mut out = Vec::with_capacity(nr);
            let mut acc = Complex64::new(0.0, 0.0);
            let mut prev = 0.0;
            for (i, &ri) in grid.r.iter().enumerate() {
                let mut s = Complex64::new(0.0, 0.0);
                for q in p.seg[i].clone() {
                    s += prof[q] * (p.w[q] * (p.rho[q] / ri).powi(e));
                }
                acc = acc * (prev / ri).powi(e) + s;
                prev = ri;
                out.push(2.0 * acc);
            }
            (slot(-(k + 1)), out)
        })
        .collect();
    let outer: Vec<(usize, Vec<Complex64>)> = (0..half - 1)
        .into_par_iter()
        .map(|k| {
            let n = k + 1;
            let prof = p.radial_profile(n, &modes[slot(n)]);
            let e = k as i32;
            let mut out = vec![Complex64::new(0.0, 0.0); nr];
            let mut acc = Complex64::new(0.0, 0.0);
            let mut next = 1.0;
            for i in (0..nr).rev() {
                let ri = grid.r[i];
                let mut s = Complex64::new(0.0, 0.0);
                for q in p.seg[i + 1].clone() {
                    s += prof[q] * (p.w[q] * (ri / p.rho[q]).powi(e));
                }
                acc = acc * (ri / next).powi(e) + s;
                next = ri;
                out[i] = -2.0 * acc;
            }
            (slot(k), out)
        })
        .collect();

    let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); nt]; nr];
    for (s, prof) in inner.iter().chain(outer.iter()) {
        for i in 0..nr {
            coeffs[i][*s] += prof[i];
        }
    }
    let mut values = Vec::with_capacity(nr * nt);
    for c in &coeffs {
        values.extend(grid.ring_ifft(c));
    }
    GridFunction::new(grid, values)
}

/// ∂⁻¹g = −(1/π)∫_Ω g(ζ)/(ζ̄ − z̄) dA(ζ), via ∂⁻¹g = conj(∂̄⁻¹ conj g).
pub fn dz_inverse(g: &GridFunction) -> GridFunction {
    dbar_inverse(&g.conj()).conj()
}

/// ∂̄⁻¹g at arbitrary points by direct quadrature with singularity subtraction:
/// T g(z) = −(1/π)Σ w_j (g_j − g(z))/(ζ_j − z) + g(z)·z̄, the coincident term dropped.
pub fn dbar_inverse_direct(g: &GridFunction, points: &[Complex64]) -> Vec<Complex64> {
    let grid = &g.grid;
    points
        .par_iter()
        .map(|&z| {
            let gz = g.eval_at(z);
            let mut s = Complex64::new(0.0, 0.0);
            for ((zeta, w), gj) in grid.nodes.iter().zip(&grid.weights).zip(&g.values) {
                let d = zeta - z;
                if d.norm() > 1e-14 {
                    s += (gj - gz) * *w / d;
                }
            }
            -s / std::f64::consts::PI + gz * z.conj()
        })
        .collect()
}

/// Spectral interpolation of ∂̄⁻¹g at arbitrary points.
pub fn dbar_inverse_at(g: &GridFunction, points: &[Complex64]) -> Vec<Complex64> {
    let t = dbar_inverse(g);
    points.iter().map(|&z| t.eval_at(z)).collect()
}

fn check_phase(phase: &PhaseFields, tau: f64, budget: f64) -> Result<()> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(LabError::OverflowRisk(tau));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in &phase.psi {
        if !v.is_finite() {
            return Err(LabError::OverflowRisk(f64::INFINITY));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let osc = tau * (hi - lo);
    if osc > budget {
        return Err(LabError::OverflowRisk(osc));
    }
    Ok(())
}

/// e^{2iτ Im Φ} on the grid.
pub fn unimodular(phase: &PhaseFields, tau: f64) -> GridFunction {
    GridFunction::new(
        &phase.grid,
        phase
            .psi
            .iter()
            .map(|&p| Complex64::from_polar(1.0, 2.0 * tau * p))
            .collect(),
    )
}

/// R_Φ g = e^{τ(Φ̄−Φ)} ∂̄⁻¹(g e^{τ(Φ−Φ̄)}), solving ∂̄R − τ conj(Φ′) R = g.
pub fn r_phi(g: &GridFunction, phase: &PhaseFields, tau: f64) -> Result<GridFunction> {
    r_phi_with_budget(g, phase, tau, DEFAULT_EXPONENT_BUDGET)
}

pub fn r_phi_with_budget(
    g: &GridFunction,
    phase: &PhaseFields,
    tau: f64,
    budget: f64,
) -> Result<GridFunction> {
    check_phase(phase, tau, budget)?;
    let e = unimodular(phase, tau);
    Ok(dbar_inverse(&g.mul(&e)).mul(&e.conj()))
}

/// R̃_Φ g = e^{τ(Φ̄−Φ)} ∂⁻¹(g e^{τ(Φ−Φ̄)}), solving ∂R̃ + τΦ′R̃ = g.
pub fn r_tilde_phi(g: &GridFunction, phase: &PhaseFields, tau: f64) -> Result<GridFunction> {
    check_phase(phase, tau, DEFAULT_EXPONENT_BUDGET)?;
    let e = unimodular(phase, tau);
    Ok(dz_inverse(&g.mul(&e)).mul(&e.conj()))
}

/// Pointwise residual of ∂̄R − τ conj(Φ′)R − g. The unimodular factor is
/// differentiated analytically, so only ∂̄(∂̄⁻¹h) − h is discretised.
pub fn r_phi_residual(g: &GridFunction, phase: &PhaseFields, tau: f64) -> Result<GridFunction> {
    check_phase(phase, tau, DEFAULT_EXPONENT_BUDGET)?;
    let e = unimodular(phase, tau);
    let h = g.mul(&e);
    Ok(dbar_inverse(&h).dbar().sub(&h).mul(&e.conj()))
}

/// Pointwise residual of ∂R̃ + τΦ′R̃ − g, in the same product form.
pub fn r_tilde_phi_residual(
    g: &GridFunction,
    phase: &PhaseFields,
    tau: f64,
) -> Result<GridFunction> {
    check_phase(phase, tau, DEFAULT_EXPONENT_BUDGET)?;
    let e = unimodular(phase, tau);
    let h = g.mul(&e);
    Ok(dz_inverse(&h).dz().sub(&h).mul(&e.conj()))
}

/// Residual of ∂̄R − τ conj(Φ′)R − g with every factor discretised directly.
pub fn r_phi_residual_direct(r: &GridFunction, g: &GridFunction, phase: &PhaseFields, tau: f64) -> GridFunction {
    let d = r.dbar();
    GridFunction::new(
        &r.grid,
        (0..r.values.len())
            .map(|k| d.values[k] - tau * phase.dphi[k].conj() * r.values[k] - g.values[k])
            .collect(),
    )
}

/// Sup of |f| over the nodes with 1 − |z| ≤ width.
pub fn collar_sup(f: &GridFunction, width: f64) -> f64 {
    let g: &Arc<DiskGrid> = &f.grid;
    f.values
        .iter()
        .enumerate()
        .filter(|(k, _)| g.in_collar(*k, width))
        .map(|(_, v)| v.norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::HolomorphicPolynomial;

    fn cx(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn transform_of_one_is_zbar() {
        let g = DiskGrid::build(24, 48, 0.1).unwrap();
        let t = dbar_inverse(&GridFunction::from_fn(&g, |_| cx(1.0)));
        for (k, z) in g.nodes.iter().enumerate() {
            assert!((t.values[k] - z.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn transform_of_zero_is_zero() {
        let g = DiskGrid::build(8, 16, 0.1).unwrap();
        assert_eq!(dbar_inverse(&GridFunction::zeros(&g)).sup(), 0.0);
    }

    #[test]
    fn closed_forms() {
        let g = DiskGrid::build(24, 48, 0.1).unwrap();
        for f in [
            |z: Complex64| z.conj(),
            |z: Complex64| z * z,
            |z: Complex64| (z * 1.3).exp() * z.conj(),
        ] {
            let gf = GridFunction::from_fn(&g, f);
            let res = dbar_inverse(&gf).dbar().sub(&gf);
            assert!(res.sup() < 1e-9, "{}", res.sup());
        }
    }

    #[test]
    fn polynomial_closed_form() {
        // T z = |z|² − 1
        let g = DiskGrid::build(16, 32, 0.1).unwrap();
        let t = dbar_inverse(&GridFunction::from_fn(&g, |z| z));
        for (k, z) in g.nodes.iter().enumerate() {
            let exact = z * z.conj() - 1.0;
            assert!((t.values[k] - exact).norm() < 1e-12, "{} {}", t.values[k], exact);
        }
    }

    #[test]
    fn mirror_symmetry_and_direct_route() {
        let g = DiskGrid::build(24, 48, 0.1).unwrap();
        let f = GridFunction::from_fn(&g, |z| (-(z - cx(0.2)).norm_sqr() * 4.0).exp() * cx(1.0));
        let a = dz_inverse(&f.conj());
        let b = dbar_inverse(&f).conj();
        assert!(a.sub(&b).sup() < 1e-14);
        let pts = [Complex64::new(0.1, 0.2), Complex64::new(-0.5, 0.3)];
        let d = dbar_inverse_direct(&f, &pts);
        let s = dbar_inverse_at(&f, &pts);
        for k in 0..2 {
            assert!((d[k] - s[k]).norm() < 2e-2, "{} {}", d[k], s[k]);
        }
    }

    #[test]
    fn r_phi_reduces_at_tau_zero() {
        let g = DiskGrid::build(16, 32, 0.1).unwrap();
        let ph = PhaseFields::new(&HolomorphicPolynomial::from_real(&[0.0, 0.0, 1.0]), &g);
        let f = GridFunction::from_fn(&g, |_| cx(1.0));
        let r = r_phi(&f, &ph, 0.0).unwrap();
        assert_eq!(r.values, dbar_inverse(&f).values);
        assert!(r_phi(&GridFunction::zeros(&g), &ph, 5.0).unwrap().sup() == 0.0);
    }

    #[test]
    fn corrupted_phase_is_rejected() {
        let g = DiskGrid::build(8, 16, 0.1).unwrap();
        let mut ph = PhaseFields::new(&HolomorphicPolynomial::from_real(&[0.0, 0.0, 1.0]), &g);
        ph.psi[3] = f64::NAN;
        let f = GridFunction::from_fn(&g, |_| cx(1.0));
        assert!(matches!(r_phi(&f, &ph, 1.0), Err(LabError::OverflowRisk(_))));
    }
}
