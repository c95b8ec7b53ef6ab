//! Holomorphic phases: sampled fields, critical points, boundary geometry,
//! probe polynomials and the vanishing corrections m₁, m₂, m₃.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cauchy;
use crate::error::{LabError, Result};
use crate::grid::{DiskGrid, GridFunction};
use crate::poly::HolomorphicPolynomial;

/// Default distance critical points must keep from the unit circle.
pub const DEFAULT_BOUNDARY_MARGIN: f64 = 0.05;

const CLUSTER_TOL: f64 = 1e-4;

fn cx(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Φ and its derivatives sampled on a grid. Φ′ = ψ₁ + iψ₂.
#[derive(Clone, Debug)]
pub struct PhaseFields {
    pub poly: HolomorphicPolynomial,
    pub grid: Arc<DiskGrid>,
    pub phi1: Vec<f64>,
    pub psi: Vec<f64>,
    pub psi1: Vec<f64>,
    pub psi2: Vec<f64>,
    pub dphi: Vec<Complex64>,
    pub ddphi: Vec<Complex64>,
}

impl PhaseFields {
    pub fn new(poly: &HolomorphicPolynomial, grid: &Arc<DiskGrid>) -> Self {
        let d1 = poly.derivative();
        let d2 = d1.derivative();
        let vals: Vec<Complex64> = grid.nodes.iter().map(|&z| poly.eval(z)).collect();
        let dphi: Vec<Complex64> = grid.nodes.iter().map(|&z| d1.eval(z)).collect();
        Self {
            poly: poly.clone(),
            grid: grid.clone(),
            phi1: vals.iter().map(|v| v.re).collect(),
            psi: vals.iter().map(|v| v.im).collect(),
            psi1: dphi.iter().map(|v| v.re).collect(),
            psi2: dphi.iter().map(|v| v.im).collect(),
            ddphi: grid.nodes.iter().map(|&z| d2.eval(z)).collect(),
            dphi,
        }
    }

    /// Largest |Δφ₁| and |Δψ| under the grid's discrete Laplacian.
    pub fn harmonicity_defect(&self) -> f64 {
        let g = &self.grid;
        let a: Vec<Complex64> = self.phi1.iter().map(|&v| cx(v)).collect();
        let b: Vec<Complex64> = self.psi.iter().map(|&v| cx(v)).collect();
        g.laplacian(&a)
            .iter()
            .chain(g.laplacian(&b).iter())
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Largest deviation from ψ₁ = ∂φ₁/∂x₁, ψ₂ = −∂φ₁/∂x₂ under discrete differentiation.
    pub fn cauchy_riemann_defect(&self) -> f64 {
        let a: Vec<Complex64> = self.phi1.iter().map(|&v| cx(v)).collect();
        let (g1, g2) = self.grid.gradient(&a);
        (0..a.len())
            .map(|k| (g1[k].re - self.psi1[k]).abs().max((g2[k].re + self.psi2[k]).abs()))
            .fold(0.0, f64::max)
    }
}

/// eval_phase_fields
pub fn eval_phase_fields(poly: &HolomorphicPolynomial, grid: &Arc<DiskGrid>) -> PhaseFields {
    PhaseFields::new(poly, grid)
}

/// Hessian of Im Φ at z, from Φ″(z): [[Im Φ″, Re Φ″], [Re Φ″, −Im Φ″]].
pub fn hessian_im(second: Complex64) -> [[f64; 2]; 2] {
    [[second.im, second.re], [second.re, -second.im]]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalPointSet {
    pub points: Vec<Complex64>,
    pub hessians: Vec<[[f64; 2]; 2]>,
    pub second_derivatives: Vec<Complex64>,
    pub vanishing_poly: HolomorphicPolynomial,
}

impl CriticalPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// |det Hess Im Φ(z_k)|
    pub fn abs_det(&self, k: usize) -> f64 {
        let h = self.hessians[k];
        (h[0][0] * h[1][1] - h[0][1] * h[1][0]).abs()
    }

    /// CSV rows (re, im, |Φ″|, |det Hess|).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("re,im,abs_d2phi,abs_det_hess\n");
        for k in 0..self.len() {
            s.push_str(&format!(
                "{:.15e},{:.15e},{:.15e},{:.15e}\n",
                self.points[k].re,
                self.points[k].im,
                self.second_derivatives[k].norm(),
                self.abs_det(k)
            ));
        }
        s
    }
}

pub fn find_critical_points(poly: &HolomorphicPolynomial, tol: f64) -> Result<CriticalPointSet> {
    find_critical_points_with_margin(poly, tol, DEFAULT_BOUNDARY_MARGIN)
}

pub fn find_critical_points_with_margin(
    poly: &HolomorphicPolynomial,
    tol: f64,
    delta_bd: f64,
) -> Result<CriticalPointSet> {
    let d1 = poly.derivative();
    let d2 = d1.derivative();
    let mut points = Vec::new();
    if !d1.is_zero() {
        for (z, mult) in d1.root_clusters(CLUSTER_TOL) {
            if z.norm() > 1.0 + delta_bd {
                continue;
            }
            if (z.norm() - 1.0).abs() < delta_bd {
                return Err(LabError::BoundaryCriticalPoint {
                    point: z,
                    margin: delta_bd,
                });
            }
            let s = d2.eval(z).norm();
            if mult > 1 || s <= tol {
                return Err(LabError::DegenerateCriticalPoint {
                    point: z,
                    second_derivative: s,
                });
            }
            points.push(z);
        }
    }
    points.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let second_derivatives: Vec<Complex64> = points.iter().map(|&z| d2.eval(z)).collect();
    Ok(CriticalPointSet {
        hessians: second_derivatives.iter().map(|&s| hessian_im(s)).collect(),
        vanishing_poly: HolomorphicPolynomial::from_roots(cx(1.0), &points),
        second_derivatives,
        points,
    })
}

/// Moves each multiple root ẑ of Φ′ (multiplicity s ≥ 2) to ẑ + k·eps2, k = 1..s, and
/// integrates back keeping the constant term. Simple-rooted input is returned unchanged.
pub fn split_degenerate_critical_points(poly: &HolomorphicPolynomial, eps2: f64) -> HolomorphicPolynomial {
    let d1 = poly.derivative();
    if d1.degree() < 2 {
        return poly.clone();
    }
    let clusters = d1.root_clusters(CLUSTER_TOL);
    if clusters.iter().all(|c| c.1 == 1) {
        return poly.clone();
    }
    let mut roots = Vec::with_capacity(d1.degree());
    for (z, s) in clusters {
        if s == 1 {
            roots.push(z);
        } else {
            roots.extend((1..=s).map(|k| z + k as f64 * eps2));
        }
    }
    let lead = d1.coeffs()[d1.degree()];
    HolomorphicPolynomial::from_roots(lead, &roots).integral(poly.coeffs()[0])
}

/// Splitting offsets tried, in order, by [`section4_phase_from`].
pub const SPLIT_SCHEDULE: [f64; 4] = [1e-3, 1e-4, 1e-5, 1e-6];

/// Φ̃ = z²Φ (Φ shifted by a small real number when Φ(0) vanishes to 1e−10 relative), with degenerate critical
/// points split and the sign conditions on closure(Γ₋) and closure(S) checked.
pub fn section4_phase_from(phi: &HolomorphicPolynomial, partition: &BoundaryPartition) -> Result<HolomorphicPolynomial> {
    partition.validate()?;
    let mut phi = phi.clone();
    let m = phi.max_abs_coeff();
    if phi.eval(cx(0.0)).norm() <= 1e-10 * m {
        let shift = 1e-3 * if m > 0.0 { m } else { 1.0 };
        phi = phi.add(&HolomorphicPolynomial::constant(cx(shift)));
    }
    let tilde = HolomorphicPolynomial::monomial(2, cx(1.0)).mul(&phi);
    let mut last = String::new();
    for eps2 in SPLIT_SCHEDULE {
        let cand = split_degenerate_critical_points(&tilde, eps2);
        if let Err(e) = find_critical_points(&cand, 1e-10) {
            last = e.to_string();
            continue;
        }
        let gm = partition.gamma_minus_closure(512);
        let sc = partition.s_closure(512);
        let worst_minus = gm.iter().map(|&t| normal_derivative_phi1(&cand, t)).fold(f64::MIN, f64::max);
        let worst_plus = sc.iter().map(|&t| normal_derivative_phi1(&cand, t)).fold(f64::MAX, f64::min);
        if worst_minus < 0.0 && worst_plus > 0.0 {
            return Ok(cand);
        }
        last = format!("max ∂ν Re Φ̃ on Γ₋ = {worst_minus:.3e}, min on S = {worst_plus:.3e}");
    }
    Err(LabError::SignConditionUnsatisfiable(last))
}

/// Completes (a, b) to a harmonic ψ, forms Φ with Im Φ = ψ and returns Φ̃ = z²Φ.
pub fn build_section4_phase(
    data: &crate::completion::CauchyData,
    degree: usize,
    cfg: &crate::completion::ExtremalConfig,
) -> Result<HolomorphicPolynomial> {
    if degree < 2 {
        return Err(LabError::ConfigError(format!("section-4 phase needs degree ≥ 2, got {degree}")));
    }
    let cfg = crate::completion::ExtremalConfig { degree, ..cfg.clone() };
    let done = crate::completion::complete_cauchy_data(data, &cfg, &crate::completion::default_schedule(), 8)?;
    section4_phase_from(&done.psi.holomorphic_completion(), &data.partition)
}

/// Γ₋ = {|θ − c| < θ₀}, Γ₋,ε = {|θ − c| < θ₀ + ε}, with c the arc centre.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPartition {
    pub theta0: f64,
    pub eps: f64,
    #[serde(default)]
    pub center: f64,
}

impl BoundaryPartition {
    pub fn new(theta0: f64, eps: f64) -> Result<Self> {
        Self::centered(theta0, eps, 0.0)
    }

    pub fn centered(theta0: f64, eps: f64, center: f64) -> Result<Self> {
        let p = Self {
            theta0,
            eps,
            center,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta0 > 0.0 && self.theta0 < PI && self.eps > 0.0 && self.theta0 + self.eps <= PI) {
            return Err(LabError::ConfigError(format!(
                "partition needs 0 < θ₀ < π, ε > 0, θ₀ + ε ≤ π; got θ₀ = {}, ε = {}",
                self.theta0, self.eps
            )));
        }
        Ok(())
    }

    /// |θ − c| folded into [0, π].
    pub fn offset(&self, theta: f64) -> f64 {
        let d = (theta - self.center).rem_euclid(2.0 * PI);
        d.min(2.0 * PI - d)
    }

    pub fn in_gamma_minus(&self, t: f64) -> bool {
        self.offset(t) < self.theta0
    }

    pub fn in_gamma_minus_eps(&self, t: f64) -> bool {
        self.offset(t) < self.theta0 + self.eps
    }

    pub fn in_gamma_plus(&self, t: f64) -> bool {
        !self.in_gamma_minus(t)
    }

    pub fn in_s(&self, t: f64) -> bool {
        !self.in_gamma_minus_eps(t)
    }

    /// The connector arcs ℓ± between x̂± and x̂±,ε.
    pub fn in_p_eps(&self, t: f64) -> bool {
        let d = self.offset(t);
        d > self.theta0 && d < self.theta0 + self.eps
    }

    /// (x̂₊, x̂₋, x̂₊,ε, x̂₋,ε)
    pub fn endpoints(&self) -> [Complex64; 4] {
        let c = self.center;
        let t = self.theta0;
        let e = self.theta0 + self.eps;
        [
            Complex64::from_polar(1.0, c + t),
            Complex64::from_polar(1.0, c - t),
            Complex64::from_polar(1.0, c + e),
            Complex64::from_polar(1.0, c - e),
        ]
    }

    /// Angles sampling the closure of Γ₋, endpoints included.
    pub fn gamma_minus_closure(&self, n: usize) -> Vec<f64> {
        (0..=n)
            .map(|k| self.center - self.theta0 + 2.0 * self.theta0 * k as f64 / n as f64)
            .collect()
    }

    /// Angles sampling the closure of S, endpoints included.
    pub fn s_closure(&self, n: usize) -> Vec<f64> {
        let e = self.theta0 + self.eps;
        let span = 2.0 * (PI - e);
        (0..=n)
            .map(|k| self.center + e + span * k as f64 / n as f64)
            .collect()
    }
}

/// ∂φ₁/∂ν = Re(Φ′(e^{iθ}) e^{iθ}) on the unit circle.
pub fn normal_derivative_phi1(poly: &HolomorphicPolynomial, theta: f64) -> f64 {
    let w = Complex64::from_polar(1.0, theta);
    (poly.derivative().eval(w) * w).re
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryClassification {
    pub angles: Vec<f64>,
    pub normal_derivative: Vec<f64>,
    pub plus: Vec<bool>,
    pub minus: Vec<bool>,
    pub minus_eps: Vec<bool>,
    pub plus_eps_prime: Vec<bool>,
    /// closure(Γ₋) ⊂ ∂Ω₋,−ε
    pub gamma_minus_contained: bool,
    /// closure(S) ⊂ ∂Ω₊,ε′
    pub s_contained: bool,
}

/// Labels boundary samples by the sign of (∇φ₁, ν) and checks the two containments.
pub fn classify_boundary(
    phase: &PhaseFields,
    eps: f64,
    eps_prime: f64,
    samples: &[f64],
    partition: &BoundaryPartition,
) -> BoundaryClassification {
    classify_boundary_poly(&phase.poly, eps, eps_prime, samples, partition)
}

pub fn classify_boundary_poly(
    poly: &HolomorphicPolynomial,
    eps: f64,
    eps_prime: f64,
    samples: &[f64],
    partition: &BoundaryPartition,
) -> BoundaryClassification {
    let nd: Vec<f64> = samples.iter().map(|&t| normal_derivative_phi1(poly, t)).collect();
    let check = |angles: Vec<f64>, ok: &dyn Fn(f64) -> bool| {
        angles.into_iter().all(|t| ok(normal_derivative_phi1(poly, t)))
    };
    let mut gm: Vec<f64> = partition.gamma_minus_closure(256);
    gm.extend(samples.iter().copied().filter(|&t| partition.in_gamma_minus(t)));
    let mut sc: Vec<f64> = partition.s_closure(256);
    sc.extend(samples.iter().copied().filter(|&t| partition.in_s(t)));
    BoundaryClassification {
        angles: samples.to_vec(),
        plus: nd.iter().map(|&v| v > 0.0).collect(),
        minus: nd.iter().map(|&v| v < 0.0).collect(),
        minus_eps: nd.iter().map(|&v| v < -eps).collect(),
        plus_eps_prime: nd.iter().map(|&v| v > eps_prime).collect(),
        gamma_minus_contained: check(gm, &|v| v < -eps),
        s_contained: check(sc, &|v| v > eps_prime),
        normal_derivative: nd,
    }
}

/// p with ∂p(z_ĵ) = d, ∂²p(z_ĵ) = d₁ and p = ∂p = ∂²p = 0 at every other critical point.
/// `j_hat` is zero based.
pub fn build_probe_polynomial(
    crit: &CriticalPointSet,
    j_hat: usize,
    d: Complex64,
    d1: Complex64,
) -> Result<HolomorphicPolynomial> {
    build_probe_polynomial_tol(crit, j_hat, d, d1, 1e-8)
}

pub fn build_probe_polynomial_tol(
    crit: &CriticalPointSet,
    j_hat: usize,
    d: Complex64,
    d1: Complex64,
    tol: f64,
) -> Result<HolomorphicPolynomial> {
    let pts = &crit.points;
    if j_hat >= pts.len() {
        return Err(LabError::ConfigError(format!(
            "probe index {j_hat} out of range for {} critical points",
            pts.len()
        )));
    }
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            if (pts[a] - pts[b]).norm() < tol {
                return Err(LabError::CoincidentCriticalPoints(pts[a], pts[b]));
            }
        }
    }
    let zj = pts[j_hat];
    let others: Vec<Complex64> = pts
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != j_hat)
        .flat_map(|(_, &z)| [z, z, z])
        .collect();
    let raw = HolomorphicPolynomial::from_roots(cx(1.0), &others);
    let q = raw.scale(raw.eval(zj).inv());
    // the quadratic coefficient absorbs the 2d·Q′(z_ĵ) term so that ∂²p(z_ĵ) = d₁ exactly
    let c2 = d1 / 2.0 - d * q.derivative().eval(zj);
    let lin = HolomorphicPolynomial::new(vec![-zj, cx(1.0)]);
    let inner = lin.scale(d).add(&lin.mul(&lin).scale(c2));
    Ok(q.mul(&inner))
}

/// Lagrange interpolant through (z_k, v_k).
fn lagrange(points: &[Complex64], values: &[Complex64]) -> Result<HolomorphicPolynomial> {
    let mut out = HolomorphicPolynomial::zero();
    for (k, &zk) in points.iter().enumerate() {
        let others: Vec<Complex64> = points
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, &z)| z)
            .collect();
        let basis = HolomorphicPolynomial::from_roots(cx(1.0), &others);
        let den = basis.eval(zk);
        if den.norm() < 1e-300 || !den.is_finite() {
            return Err(LabError::InterpolationSingular(format!(
                "node {zk} repeats in the Lagrange system"
            )));
        }
        out = out.add(&basis.scale(values[k] / den));
    }
    Ok(out)
}

/// Values, first and second z-derivatives of F at the given points.
pub fn jets_at(f: &GridFunction, points: &[Complex64]) -> Vec<[Complex64; 3]> {
    let d1 = f.dz();
    let d2 = d1.dz();
    points
        .iter()
        .map(|&z| [f.eval_at(z), d1.eval_at(z), d2.eval_at(z)])
        .collect()
}

/// Hermite-type corrections (m₁, m₂, m₃) from jets (F, ∂F, ∂²F) at the critical points:
/// m₁ interpolates F, m₂ = r·h₂ fixes ∂F, m₃ = r²·h₃ fixes ∂²F.
pub fn corrections_from_jets(
    crit: &CriticalPointSet,
    jets: &[[Complex64; 3]],
) -> Result<[HolomorphicPolynomial; 3]> {
    let pts = &crit.points;
    let r = &crit.vanishing_poly;
    let rd = r.derivative();
    let rp: Vec<Complex64> = pts.iter().map(|&z| rd.eval(z)).collect();
    let scale = rp.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    if !(scale > 1e-12) {
        return Err(LabError::InterpolationSingular(
            "r′ vanishes at a critical point".into(),
        ));
    }
    let m1 = lagrange(pts, &jets.iter().map(|j| j[0]).collect::<Vec<_>>())?;
    let m1d = m1.derivative();
    let h2v: Vec<Complex64> = (0..pts.len())
        .map(|k| (jets[k][1] - m1d.eval(pts[k])) / rp[k])
        .collect();
    let m2 = r.mul(&lagrange(pts, &h2v)?);
    let m1dd = m1d.derivative();
    let m2dd = m2.derivative().derivative();
    let h3v: Vec<Complex64> = (0..pts.len())
        .map(|k| {
            (jets[k][2] - m1dd.eval(pts[k]) - m2dd.eval(pts[k])) / (2.0 * rp[k] * rp[k])
        })
        .collect();
    let m3 = r.mul(r).mul(&lagrange(pts, &h3v)?);
    Ok([m1, m2, m3])
}

/// build_vanishing_corrections. Holomorphic case: polynomials in z matching ∂̄⁻¹source
/// to second order at H. Antiholomorphic case: the returned polynomials are in the
/// variable z̄ and match ∂⁻¹source to second order in ∂_z̄.
pub fn build_vanishing_corrections(
    source: &GridFunction,
    crit: &CriticalPointSet,
    antiholomorphic: bool,
) -> Result<[HolomorphicPolynomial; 3]> {
    if crit.is_empty() {
        return Err(LabError::InterpolationSingular("no critical points".into()));
    }
    if source.sup() == 0.0 {
        let z = HolomorphicPolynomial::zero();
        return Ok([z.clone(), z.clone(), z]);
    }
    if antiholomorphic {
        let f = cauchy::dbar_inverse(&source.conj());
        let [a, b, c] = corrections_from_jets(crit, &jets_at(&f, &crit.points))?;
        Ok([conj_coeffs(&a), conj_coeffs(&b), conj_coeffs(&c)])
    } else {
        let f = cauchy::dbar_inverse(source);
        corrections_from_jets(crit, &jets_at(&f, &crit.points))
    }
}

/// Coefficient-wise conjugate: if m(z) is returned, conj(m(z)) = m*(z̄).
pub fn conj_coeffs(p: &HolomorphicPolynomial) -> HolomorphicPolynomial {
    HolomorphicPolynomial::new(p.coeffs().iter().map(|c| c.conj()).collect())
}

/// Sum of the three corrections sampled on a grid; `antiholomorphic` evaluates at z̄.
pub fn corrections_on_grid(
    grid: &Arc<DiskGrid>,
    m: &[HolomorphicPolynomial; 3],
    antiholomorphic: bool,
) -> GridFunction {
    GridFunction::from_fn(grid, |z| {
        let w = if antiholomorphic { z.conj() } else { z };
        m.iter().map(|p| p.eval(w)).sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn phase_fields_of_z_squared() {
        let g = DiskGrid::build(8, 16, 0.1).unwrap();
        let ph = PhaseFields::new(&HolomorphicPolynomial::from_real(&[0.0, 0.0, 1.0]), &g);
        for (k, w) in g.nodes.iter().enumerate() {
            assert!((ph.phi1[k] - (w.re * w.re - w.im * w.im)).abs() < 1e-14);
            assert!((ph.psi[k] - 2.0 * w.re * w.im).abs() < 1e-14);
        }
        assert!(ph.harmonicity_defect() < 1e-10);
        assert!(ph.cauchy_riemann_defect() < 1e-10);
    }

    #[test]
    fn phase_fields_linear_and_cubic() {
        let g = DiskGrid::build(8, 16, 0.1).unwrap();
        let ph = PhaseFields::new(&HolomorphicPolynomial::from_real(&[0.0, 1.0]), &g);
        assert!(ph.psi1.iter().all(|&v| v == 1.0) && ph.psi2.iter().all(|&v| v == 0.0));
        let cubic = HolomorphicPolynomial::from_real(&[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(cubic.derivative().eval(z(1.0, 0.0)), z(3.0, 0.0));
    }

    #[test]
    fn critical_points_examples() {
        let c = find_critical_points(&HolomorphicPolynomial::from_real(&[0.0, 0.0, 1.0]), 1e-8).unwrap();
        assert_eq!(c.points.len(), 1);
        assert!(c.points[0].norm() < 1e-14);
        assert_eq!(c.hessians[0], [[0.0, 2.0], [2.0, 0.0]]);
        assert!((c.abs_det(0) - 4.0).abs() < 1e-14);
        let lin = find_critical_points(&HolomorphicPolynomial::from_real(&[0.0, 1.0]), 1e-8).unwrap();
        assert!(lin.is_empty());
        let cubic = HolomorphicPolynomial::from_real(&[0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            find_critical_points(&cubic, 1e-8),
            Err(LabError::DegenerateCriticalPoint { .. })
        ));
    }

    #[test]
    fn boundary_critical_point_rejected() {
        // Φ′ = z − 0.98
        let p = HolomorphicPolynomial::from_real(&[0.0, -0.98, 0.5]);
        assert!(matches!(
            find_critical_points(&p, 1e-8),
            Err(LabError::BoundaryCriticalPoint { .. })
        ));
    }

    #[test]
    fn splitting_examples() {
        let cubic = HolomorphicPolynomial::from_real(&[0.0, 0.0, 0.0, 1.0]);
        let s = split_degenerate_critical_points(&cubic, 0.1);
        assert_eq!(s.degree(), 3);
        let r = s.derivative().roots();
        assert_eq!(r.len(), 2);
        assert!((r[0] - r[1]).norm() > 0.05 && (r[0] - r[1]).norm() < 0.2);
        let quartic = HolomorphicPolynomial::from_real(&[1.0, 0.0, 0.0, 0.0, 1.0]);
        let s4 = split_degenerate_critical_points(&quartic, 0.01);
        assert_eq!(s4.coeffs()[0], z(1.0, 0.0));
        assert_eq!(s4.derivative().root_clusters(1e-4).len(), 3);
        let simple = HolomorphicPolynomial::from_real(&[0.2, 0.0, 1.0, 0.3]);
        assert_eq!(split_degenerate_critical_points(&simple, 0.1), simple);
    }

    #[test]
    fn classification_of_z_squared() {
        let g = DiskGrid::build(8, 16, 0.1).unwrap();
        let ph = PhaseFields::new(&HolomorphicPolynomial::from_real(&[0.0, 0.0, 1.0]), &g);
        let part = BoundaryPartition::centered(0.5, 0.1, PI / 2.0).unwrap();
        let c = classify_boundary(&ph, 0.1, 0.1, &g.theta, &part);
        for (k, &t) in g.theta.iter().enumerate() {
            assert!((c.normal_derivative[k] - 2.0 * (2.0 * t).cos()).abs() < 1e-12);
            if (2.0 * t).cos().abs() > 1e-12 {
                assert_eq!(c.plus[k], (2.0 * t).cos() > 0.0);
            }
        }
        assert!(c.gamma_minus_contained);
        assert!(!c.s_contained);
        let big = classify_boundary(&ph, 5.0, 0.1, &g.theta, &part);
        assert!(big.minus_eps.iter().all(|&b| !b));
        assert!(!big.gamma_minus_contained);
    }

    #[test]
    fn probe_polynomial_examples() {
        let single = CriticalPointSet {
            points: vec![z(0.0, 0.0)],
            hessians: vec![hessian_im(z(2.0, 0.0))],
            second_derivatives: vec![z(2.0, 0.0)],
            vanishing_poly: HolomorphicPolynomial::from_real(&[0.0, 1.0]),
        };
        let p = build_probe_polynomial(&single, 0, z(1.0, 0.0), z(0.0, 0.0)).unwrap();
        assert_eq!(p, HolomorphicPolynomial::from_real(&[0.0, 1.0]));
        let p2 = build_probe_polynomial(&single, 0, z(0.0, 0.0), z(2.0, 0.0)).unwrap();
        assert_eq!(p2, HolomorphicPolynomial::from_real(&[0.0, 0.0, 1.0]));

        let pts = vec![z(0.0, 0.0), z(1.0, 0.0)];
        let two = CriticalPointSet {
            hessians: vec![[[0.0; 2]; 2]; 2],
            second_derivatives: vec![z(1.0, 0.0); 2],
            vanishing_poly: HolomorphicPolynomial::from_roots(z(1.0, 0.0), &pts),
            points: pts,
        };
        let d = z(1.0, 0.0);
        let d1 = z(0.3, -0.2);
        let p = build_probe_polynomial(&two, 0, d, d1).unwrap();
        let (pd, pdd) = (p.derivative(), p.derivative().derivative());
        let one = z(1.0, 0.0);
        assert!(p.eval(one).norm() < 1e-12 && pd.eval(one).norm() < 1e-12 && pdd.eval(one).norm() < 1e-12);
        assert!((pd.eval(z(0.0, 0.0)) - d).norm() < 1e-12);
        assert!((pdd.eval(z(0.0, 0.0)) - d1).norm() < 1e-12);

        let dup = CriticalPointSet {
            points: vec![z(0.1, 0.0), z(0.1, 0.0)],
            ..two
        };
        assert!(matches!(
            build_probe_polynomial(&dup, 0, d, d1),
            Err(LabError::CoincidentCriticalPoints(..))
        ));
    }

    #[test]
    fn corrections_match_taylor_jets() {
        let crit = find_critical_points(&HolomorphicPolynomial::from_real(&[0.0, 0.0, 1.0]), 1e-8).unwrap();
        let jets = [[z(1.0, 2.0), z(-0.5, 0.0), z(0.6, 0.4)]];
        let [m1, m2, m3] = corrections_from_jets(&crit, &jets).unwrap();
        assert_eq!(m1, HolomorphicPolynomial::constant(z(1.0, 2.0)));
        assert!(m2.sub(&HolomorphicPolynomial::monomial(1, z(-0.5, 0.0))).max_abs_coeff() < 1e-14);
        assert!(m3.sub(&HolomorphicPolynomial::monomial(2, z(0.3, 0.2))).max_abs_coeff() < 1e-14);
    }

    #[test]
    fn corrections_vanish_for_zero_source() {
        let g = DiskGrid::build(8, 16, 0.1).unwrap();
        let crit = find_critical_points(&HolomorphicPolynomial::from_real(&[0.0, 0.0, 1.0]), 1e-8).unwrap();
        let m = build_vanishing_corrections(&GridFunction::zeros(&g), &crit, false).unwrap();
        assert!(m.iter().all(|p| p.is_zero()));
    }

    #[test]
    fn residual_vanishes_to_second_order() {
        let g = DiskGrid::build(24, 48, 0.1).unwrap();
        let phi = HolomorphicPolynomial::from_real(&[0.0, 0.0, 1.0, -1.2]);
        let crit = find_critical_points(&phi, 1e-8).unwrap();
        assert_eq!(crit.len(), 2);
        let src = GridFunction::from_fn(&g, |w| (w * z(0.7, 0.2)).exp() * (1.0 + w.conj() * 0.3));
        for anti in [false, true] {
            let m = build_vanishing_corrections(&src, &crit, anti).unwrap();
            let f = if anti {
                cauchy::dz_inverse(&src)
            } else {
                cauchy::dbar_inverse(&src)
            };
            let rho = f.sub(&corrections_on_grid(&g, &m, anti));
            let rho = if anti { rho.conj() } else { rho };
            for jet in jets_at(&rho, &crit.points) {
                for v in jet {
                    assert!(v.norm() < 1e-6 * src.sup(), "{v}");
                }
            }
        }
    }
    #[test]
    fn section4_constant_phase_fails_sign_check() {
        let p = BoundaryPartition::centered(0.5, 0.3, PI / 2.0).unwrap();
        let r = section4_phase_from(&HolomorphicPolynomial::from_real(&[1.0]), &p);
        assert!(matches!(r, Err(LabError::SignConditionUnsatisfiable(_))));
    }

    #[test]
    fn section4_from_cauchy_data_of_x2() {
        use crate::completion::{CauchyData, ExtremalConfig, HarmonicExpansion};
        let p = BoundaryPartition::centered(0.25, PI - 0.65, PI).unwrap();
        let mut psi = HarmonicExpansion::zero(1);
        psi.beta[1] = 1.0;
        let data = CauchyData::from_harmonic(p, 256, &psi);
        let phi = build_section4_phase(&data, 3, &ExtremalConfig::default()).unwrap();
        assert!(phi.eval(cx(0.0)).norm() == 0.0);
        assert!(phi.coeffs()[2].norm() > 0.0, "shift applied");
        let crit = find_critical_points(&phi, 1e-10).unwrap();
        assert!(crit.points.iter().any(|z| z.norm() < 1e-9));
        for (z, s) in crit.points.iter().zip(&crit.second_derivatives) {
            assert!(phi.derivative().eval(*z).norm() < 1e-9 && s.norm() > 1e-10);
        }
    }
}
