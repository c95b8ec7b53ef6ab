//! Stationary phase: oscillatory integrals ∫ g e^{2iτ Im Φ}, the leading-term formula at
//! nondegenerate critical points, the CGO pairing ∫ q u₁ v₁, least-squares extraction of
//! almost-periodic coefficients, and the ε-family derivative probe.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::carleman::{Potential, SchrodingerSolver};
use crate::cgo::{CGOSolution, Orientation};
use crate::error::{LabError, Result};
use crate::grid::GridFunction;
use crate::phase::{find_critical_points, CriticalPointSet, PhaseFields};
use crate::poly::HolomorphicPolynomial;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Phase increment allowed per grid cell.
pub const RADIANS_PER_CELL: f64 = PI / 4.0;

/// Condition number above which a frequency fit is rejected.
pub const FIT_CONDITION_LIMIT: f64 = 1e8;

/// Largest increment of 2τ Im Φ between radially or angularly adjacent nodes, over the
/// cells touching a node where g does not vanish.
pub fn radians_per_cell(g: &GridFunction, phase: &PhaseFields, tau: f64) -> f64 {
    let grid = &g.grid;
    let (nr, nt) = (grid.nr, grid.nt);
    let floor = g.sup() * 1e-14;
    let live = |k: usize| g.values[k].norm() > floor;
    let mut worst: f64 = 0.0;
    for i in 0..nr {
        for j in 0..nt {
            let k = grid.idx(i, j);
            let mut nb = vec![grid.idx(i, (j + 1) % nt)];
            if i + 1 < nr {
                nb.push(grid.idx(i + 1, j));
            }
            for m in nb {
                if live(k) || live(m) {
                    worst = worst.max(2.0 * tau * (phase.psi[m] - phase.psi[k]).abs());
                }
            }
        }
    }
    worst
}

/// ∫_Ω g e^{2iτ Im Φ} dx by the grid quadrature.
pub fn oscillatory_integral(g: &GridFunction, phase: &PhaseFields, tau: f64) -> Result<Complex64> {
    oscillatory_integral_with_budget(g, phase, tau, RADIANS_PER_CELL)
}

pub fn oscillatory_integral_with_budget(
    g: &GridFunction,
    phase: &PhaseFields,
    tau: f64,
    budget: f64,
) -> Result<Complex64> {
    let rpc = radians_per_cell(g, phase, tau);
    if rpc > budget {
        return Err(LabError::ResolutionInsufficient {
            radians_per_cell: rpc,
            budget,
        });
    }
    let grid = &g.grid;
    Ok((0..grid.len())
        .map(|k| g.values[k] * Complex64::from_polar(grid.weights[k], 2.0 * tau * phase.psi[k]))
        .sum())
}

/// Σ_k π g(x_k) e^{2iτ Im Φ(x_k)} / (τ|det Im Φ″(x_k)|^{1/2}) with g sampled at the
/// critical points.
pub fn leading_term_from_values(
    values: &[Complex64],
    crit: &CriticalPointSet,
    poly: &HolomorphicPolynomial,
    tau: f64,
) -> Result<Complex64> {
    let mut s = ZERO;
    for (k, &x) in crit.points.iter().enumerate() {
        let det = crit.second_derivatives[k].norm();
        if det < 1e-12 {
            return Err(LabError::DegeneratePhase(format!("|Φ″({x})| = {det:.3e}")));
        }
        s += PI * values[k] * Complex64::from_polar(1.0, 2.0 * tau * poly.eval(x).im) / (tau * det);
    }
    Ok(s)
}

pub fn leading_term(
    g: &GridFunction,
    crit: &CriticalPointSet,
    phase: &PhaseFields,
    tau: f64,
) -> Result<Complex64> {
    let values: Vec<Complex64> = crit.points.iter().map(|&x| g.eval_at(x)).collect();
    leading_term_from_values(&values, crit, &phase.poly, tau)
}

#[derive(Clone, Debug, Serialize)]
pub struct PairingReport {
    pub tau: f64,
    /// ∫ q u₁ v₁
    pub value: Complex64,
    /// ∫ q a b̄ e^{2iτ Im Φ}
    pub leading: Complex64,
    /// ∫ q (a − u₁₁)(b̄ − v₁₁) e^{2iτ Im Φ}
    pub main: Complex64,
    /// reflected term of one solution against the main part of the other
    pub cross: Complex64,
    /// product of the two reflected terms (χ₁χ₂ ≡ 0)
    pub disjoint: Complex64,
    /// everything involving u₁₂ or v₁₂
    pub remainder: Complex64,
}

pub fn pairing_integral(q_diff: &Potential, u1: &CGOSolution, v1: &CGOSolution) -> Result<PairingReport> {
    if u1.tau != v1.tau {
        return Err(LabError::MismatchedTau(u1.tau, v1.tau));
    }
    if u1.orientation != Orientation::Holomorphic || v1.orientation != Orientation::Antiholomorphic {
        return Err(LabError::ConfigError("pairing expects u₁ with +Φ and v₁ with −Φ̄".into()));
    }
    let grid = &q_diff.grid;
    if grid.len() != u1.grid.len() || grid.len() != v1.grid.len() {
        return Err(LabError::ConfigError("solutions and potential live on different grids".into()));
    }
    let tau = u1.tau;
    if q_diff.is_zero() {
        return Ok(PairingReport {
            tau,
            value: ZERO,
            leading: ZERO,
            main: ZERO,
            cross: ZERO,
            disjoint: ZERO,
            remainder: ZERO,
        });
    }
    let int = |a: &GridFunction, b: &GridFunction| -> Complex64 {
        (0..grid.len())
            .into_par_iter()
            .map(|k| grid.weights[k] * q_diff.q[k] * a.values[k] * b.values[k])
            .collect::<Vec<_>>()
            .iter()
            .sum()
    };
    let (au, av) = (u1.main_weighted(), v1.main_weighted());
    let (ru, rv) = (u1.reflected_weighted(), v1.reflected_weighted());
    let (wu, wv) = (u1.correction_weighted(), v1.correction_weighted());
    let leading = int(&u1.leading_weighted(), &v1.leading_weighted());
    let main = int(&au, &av);
    let cross = int(&ru, &av) + int(&au, &rv);
    let disjoint = int(&ru, &rv);
    let u = au.add(&ru).add(&wu);
    let v = av.add(&rv).add(&wv);
    let value = int(&u, &v);
    Ok(PairingReport {
        tau,
        value,
        leading,
        main,
        cross,
        disjoint,
        remainder: value - main - cross - disjoint,
    })
}

/// ∫_∂Ω (u ∂_ν v − v ∂_ν u) for (Δ+q₁)u = 0, (Δ+q₂)v = 0 with the given Dirichlet traces;
/// equals ∫_Ω (q₁ − q₂) u v.
pub fn boundary_pairing(
    s1: &SchrodingerSolver,
    s2: &SchrodingerSolver,
    u_trace: &[Complex64],
    v_trace: &[Complex64],
) -> Result<Complex64> {
    let u = s1.solve_homogeneous(u_trace)?;
    let v = s2.solve_homogeneous(v_trace)?;
    let (du, dv) = (u.normal_derivative(), v.normal_derivative());
    let w = 2.0 * PI / u_trace.len() as f64;
    Ok((0..u_trace.len())
        .map(|j| w * (u_trace[j] * dv[j] - v_trace[j] * du[j]))
        .sum())
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightedSumCoefficients {
    /// Im Φ(x_k); the model is Σ c_k e^{2iτ f_k}
    pub frequencies: Vec<f64>,
    pub coefficients: Vec<Complex64>,
    /// Σ c_k, the value of the sum at τ = 0
    pub total: Complex64,
    /// ‖A c − τ·samples‖₂
    pub residual: f64,
    pub condition: f64,
}

impl WeightedSumCoefficients {
    pub fn max_abs(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, tau: f64) -> Complex64 {
        self.coefficients
            .iter()
            .zip(&self.frequencies)
            .map(|(c, f)| c * Complex64::from_polar(1.0, 2.0 * tau * f))
            .sum()
    }
}

/// c_k = π(q a b̄)(x_k)/|det Im Φ″(x_k)|^{1/2}, with the products sampled at the critical points.
pub fn predicted_coefficients(qab: &[Complex64], crit: &CriticalPointSet, poly: &HolomorphicPolynomial) -> WeightedSumCoefficients {
    let coefficients: Vec<Complex64> = qab
        .iter()
        .zip(&crit.second_derivatives)
        .map(|(v, s)| PI * v / s.norm())
        .collect();
    WeightedSumCoefficients {
        frequencies: crit.points.iter().map(|&x| poly.eval(x).im).collect(),
        total: coefficients.iter().sum(),
        coefficients,
        residual: 0.0,
        condition: 1.0,
    }
}

/// Least-squares fit of τ·value ≈ Σ c_k e^{2iτ f_k}.
pub fn extract_coefficients(samples: &[(f64, Complex64)], frequencies: &[f64]) -> Result<WeightedSumCoefficients> {
    let m = frequencies.len();
    if m == 0 || samples.len() < 2 * m {
        return Err(LabError::ConfigError(format!(
            "{} samples cannot separate {m} frequencies (need at least {})",
            samples.len(),
            2 * m
        )));
    }
    let n = samples.len();
    let a = DMatrix::from_fn(n, m, |i, k| Complex64::from_polar(1.0, 2.0 * samples[i].0 * frequencies[k]));
    let b = DMatrix::from_fn(n, 1, |i, _| samples[i].0 * samples[i].1);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= FIT_CONDITION_LIMIT) {
        return Err(LabError::IllConditionedFit(condition));
    }
    let c = svd
        .solve(&b, 0.0)
        .map_err(|e| LabError::SingularNormalSystem(e.to_string()))?;
    let residual = (&a * &c - &b).norm();
    let coefficients: Vec<Complex64> = c.iter().copied().collect();
    Ok(WeightedSumCoefficients {
        frequencies: frequencies.to_vec(),
        total: coefficients.iter().sum(),
        coefficients,
        residual,
        condition,
    })
}

/// Value and first derivatives (∂_z, ∂_z̄) of q·a·b̄ at a point.
fn amplitude_jet(
    q: &GridFunction,
    qz: &GridFunction,
    qzb: &GridFunction,
    a: &HolomorphicPolynomial,
    b: &HolomorphicPolynomial,
    x: Complex64,
) -> [Complex64; 3] {
    let (qv, q1, q2) = (q.eval_at(x), qz.eval_at(x), qzb.eval_at(x));
    let (av, a1) = (a.eval(x), a.derivative().eval(x));
    let (bv, b1) = (b.eval(x).conj(), b.derivative().eval(x).conj());
    [qv * av * bv, q1 * av * bv + qv * a1 * bv, q2 * av * bv + qv * av * b1]
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeTerms {
    /// critical points moving through q a b̄
    pub amplitude_motion: Complex64,
    /// change of |Φ″| from p″ at fixed points
    pub hessian_probe: Complex64,
    /// change of |Φ″| from the motion of the points
    pub hessian_motion: Complex64,
}

impl ProbeTerms {
    pub fn sum(&self) -> Complex64 {
        self.amplitude_motion + self.hessian_probe + self.hessian_motion
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub eps: Vec<f64>,
    pub j_values: Vec<Complex64>,
    pub j0: Complex64,
    /// J′(0) by (Richardson-combined) central differences
    pub derivative: Complex64,
    pub terms: ProbeTerms,
    /// ∂x_j/∂ε at 0 by central differences
    pub velocity_fd: Vec<Complex64>,
    /// −p′(x_j)/Φ″(x_j)
    pub velocity_predicted: Vec<Complex64>,
}

impl ProbeReport {
    pub fn velocity_error(&self) -> f64 {
        self.velocity_fd
            .iter()
            .zip(&self.velocity_predicted)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn decomposition_error(&self) -> f64 {
        (self.terms.sum() - self.derivative).norm()
    }
}

/// Critical points of Φ + εp matched to those of Φ.
fn follow_points(poly: &HolomorphicPolynomial, base: &[Complex64], eps: f64) -> Result<Vec<Complex64>> {
    let set = find_critical_points(poly, 1e-10).map_err(|_| LabError::CriticalPointCollision { eps })?;
    if set.points.len() != base.len() {
        return Err(LabError::CriticalPointCollision { eps });
    }
    let mut out = Vec::with_capacity(base.len());
    let mut used = vec![false; base.len()];
    for &x in base {
        let (k, d) = set
            .points
            .iter()
            .enumerate()
            .map(|(k, p)| (k, (p - x).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if used[k] || d > 0.1 {
            return Err(LabError::CriticalPointCollision { eps });
        }
        used[k] = true;
        out.push(set.points[k]);
    }
    for a in 0..out.len() {
        for b in a + 1..out.len() {
            if (out[a] - out[b]).norm() < 1e-6 {
                return Err(LabError::CriticalPointCollision { eps });
            }
        }
    }
    Ok(out)
}

/// J(ε) = Σ_j (q a b̄)(x_j(ε)) / |det Im(Φ + εp)″(x_j(ε))|^{1/2} and its derivative at 0.
/// `eps_list` must be symmetric about 0; when it contains ±h and ±2h the central
/// differences are Richardson combined.
pub fn probe_family_derivative(
    base: &HolomorphicPolynomial,
    probe: &HolomorphicPolynomial,
    q_diff: &GridFunction,
    a: &HolomorphicPolynomial,
    b: &HolomorphicPolynomial,
    eps_list: &[f64],
) -> Result<ProbeReport> {
    let mut pos: Vec<f64> = eps_list.iter().copied().filter(|e| *e > 0.0).collect();
    pos.sort_by(f64::total_cmp);
    if pos.is_empty() || pos.iter().any(|h| !eps_list.iter().any(|e| (e + h).abs() < 1e-15)) {
        return Err(LabError::ConfigError("eps list must be symmetric about 0".into()));
    }
    let crit = find_critical_points(base, 1e-10)?;
    let x0 = crit.points.clone();
    let qz = q_diff.dz();
    let qzb = q_diff.dbar();
    let j_at = |eps: f64| -> Result<(Complex64, Vec<Complex64>)> {
        let f = base.add(&probe.scale(Complex64::new(eps, 0.0)));
        let pts = if eps == 0.0 { x0.clone() } else { follow_points(&f, &x0, eps)? };
        let f2 = f.derivative().derivative();
        let mut s = ZERO;
        for &x in &pts {
            let g = amplitude_jet(q_diff, &qz, &qzb, a, b, x)[0];
            s += g / f2.eval(x).norm();
        }
        Ok((s, pts))
    };
    let mut j_values = Vec::new();
    let mut points = Vec::new();
    for &e in eps_list {
        let (j, p) = j_at(e)?;
        j_values.push(j);
        points.push(p);
    }
    let lookup = |h: f64| eps_list.iter().position(|e| (e - h).abs() < 1e-15).unwrap();
    let central = |h: f64| {
        let (ip, im) = (lookup(h), lookup(-h));
        let dj = (j_values[ip] - j_values[im]) / (2.0 * h);
        let dx: Vec<Complex64> = (0..x0.len()).map(|k| (points[ip][k] - points[im][k]) / (2.0 * h)).collect();
        (dj, dx)
    };
    let h = pos[0];
    let (mut derivative, mut velocity_fd) = central(h);
    if pos.iter().any(|e| (e - 2.0 * h).abs() < 1e-15) {
        let (d2, v2) = central(2.0 * h);
        derivative = (4.0 * derivative - d2) / 3.0;
        velocity_fd = velocity_fd.iter().zip(&v2).map(|(a, b)| (4.0 * a - b) / 3.0).collect();
    }
    let d1 = base.derivative();
    let d2 = d1.derivative();
    let d3 = d2.derivative();
    let p1 = probe.derivative();
    let p2 = p1.derivative();
    let mut terms = ProbeTerms {
        amplitude_motion: ZERO,
        hessian_probe: ZERO,
        hessian_motion: ZERO,
    };
    let mut velocity_predicted = Vec::new();
    for &x in &x0 {
        let f2 = d2.eval(x);
        let n = f2.norm();
        let v = -p1.eval(x) / f2;
        velocity_predicted.push(v);
        let [g, gz, gzb] = amplitude_jet(q_diff, &qz, &qzb, a, b, x);
        terms.amplitude_motion += (gz * v + gzb * v.conj()) / n;
        terms.hessian_probe += -g * (f2.conj() * p2.eval(x)).re / (n * n * n);
        terms.hessian_motion += -g * (f2.conj() * d3.eval(x) * v).re / (n * n * n);
    }
    let j0 = j_at(0.0)?.0;
    Ok(ProbeReport {
        eps: eps_list.to_vec(),
        j_values,
        j0,
        derivative,
        terms,
        velocity_fd,
        velocity_predicted,
    })
}

/// The Richardson stencil ±1e−3, ±2e−3.
pub const PROBE_EPS: [f64; 4] = [-2e-3, -1e-3, 1e-3, 2e-3];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DiskGrid;
    use crate::phase::build_probe_polynomial;

    fn cx(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn z2() -> HolomorphicPolynomial {
        HolomorphicPolynomial::from_real(&[0.0, 0.0, 1.0])
    }

    #[test]
    fn tau_zero_is_plain_integral() {
        let g = DiskGrid::build(16, 32, 0.1).unwrap();
        let ph = PhaseFields::new(&z2(), &g);
        let f = GridFunction::from_fn(&g, |z| cx(z.norm_sqr()));
        let v = oscillatory_integral(&f, &ph, 0.0).unwrap();
        assert!((v - cx(PI / 2.0)).norm() < 1e-12);
    }

    #[test]
    fn leading_term_for_z_squared() {
        let g = DiskGrid::build(8, 16, 0.1).unwrap();
        let ph = PhaseFields::new(&z2(), &g);
        let crit = find_critical_points(&z2(), 1e-10).unwrap();
        let one = GridFunction::from_fn(&g, |_| cx(1.0));
        let v = leading_term(&one, &crit, &ph, 10.0).unwrap();
        assert!((v - cx(PI / 20.0)).norm() < 1e-12);
        let vanish = GridFunction::from_fn(&g, |z| cx(z.norm_sqr()));
        assert!(leading_term(&vanish, &crit, &ph, 10.0).unwrap().norm() < 1e-12);
    }

    #[test]
    fn oscillatory_integral_matches_leading_term() {
        let g = DiskGrid::build(128, 256, 0.1).unwrap();
        let ph = PhaseFields::new(&z2(), &g);
        let crit = find_critical_points(&z2(), 1e-10).unwrap();
        let f = GridFunction::from_fn(&g, |z| cx((-z.norm_sqr() / 0.09 - (z.norm() / 0.6).powi(8)).exp()));
        let err: Vec<f64> = [4.0, 8.0]
            .iter()
            .map(|&tau| {
                let v = oscillatory_integral(&f, &ph, tau).unwrap();
                (v - leading_term(&f, &crit, &ph, tau).unwrap()).norm() * tau
            })
            .collect();
        assert!(err[1] < 0.5 * err[0], "{err:?}");
    }

    #[test]
    fn under_resolved_phase_is_rejected() {
        let g = DiskGrid::build(16, 32, 0.1).unwrap();
        let ph = PhaseFields::new(&z2(), &g);
        let one = GridFunction::from_fn(&g, |_| cx(1.0));
        assert!(matches!(
            oscillatory_integral(&one, &ph, 200.0),
            Err(LabError::ResolutionInsufficient { .. })
        ));
    }

    #[test]
    fn boundary_pairing_matches_interior_integral() {
        let g = DiskGrid::build(24, 64, 0.1).unwrap();
        let q1 = Potential::from_fn(&g, |z| 2.0 * (-z.norm_sqr() / 0.1).exp());
        let q2 = Potential::zero(&g);
        let (s1, s2) = (SchrodingerSolver::new(&q1).unwrap(), SchrodingerSolver::new(&q2).unwrap());
        let b = g.boundary_points();
        let ut: Vec<Complex64> = b.iter().map(|z| (z * z * 1.5).exp()).collect();
        let vt: Vec<Complex64> = b.iter().map(|z| (-(z * z).conj() * 1.5).exp()).collect();
        let lhs = boundary_pairing(&s1, &s2, &ut, &vt).unwrap();
        let u = s1.solve_homogeneous(&ut).unwrap().interior;
        let v = s2.solve_homogeneous(&vt).unwrap().interior;
        let rhs: Complex64 = (0..g.len()).map(|k| g.weights[k] * q1.q[k] * u.values[k] * v.values[k]).sum();
        assert!((lhs - rhs).norm() < 1e-8 * rhs.norm().max(1.0), "{lhs} {rhs}");
        assert!(boundary_pairing(&s1, &s1, &ut, &ut).unwrap().norm() < 1e-10);
    }

    #[test]
    fn single_frequency_is_exact() {
        let c = Complex64::new(2.0, 1.0);
        let samples: Vec<(f64, Complex64)> = [4.0, 5.0, 7.0].iter().map(|&t| (t, c * Complex64::from_polar(1.0, 2.0 * t * 0.3) / t)).collect();
        let fit = extract_coefficients(&samples, &[0.3]).unwrap();
        assert!((fit.coefficients[0] - c).norm() < 1e-10);
        let zero: Vec<(f64, Complex64)> = samples.iter().map(|(t, _)| (*t, ZERO)).collect();
        assert_eq!(extract_coefficients(&zero, &[0.3]).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn two_frequencies_with_noise() {
        let cs = [cx(1.0), cx(-0.5)];
        let fs = [0.0, 1.3];
        let samples: Vec<(f64, Complex64)> = (0..12)
            .map(|i| {
                let t = 4.0 + 0.7 * i as f64;
                let clean: Complex64 = cs.iter().zip(&fs).map(|(c, f)| c * Complex64::from_polar(1.0, 2.0 * t * f)).sum();
                let noise = 1e-6 * ((i as f64 * 1.618).sin());
                (t, (clean + noise) / t)
            })
            .collect();
        let fit = extract_coefficients(&samples, &fs).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&cs) {
            assert!((a - b).norm() < 1e-4);
        }
    }

    #[test]
    fn coincident_frequencies_are_ill_conditioned() {
        let samples: Vec<(f64, Complex64)> = (0..8).map(|i| (1.0 + i as f64, cx(1.0))).collect();
        assert!(matches!(
            extract_coefficients(&samples, &[0.5, 0.5 + 1e-12]),
            Err(LabError::IllConditionedFit(_))
        ));
    }

    #[test]
    fn velocity_of_linear_probe() {
        let g = DiskGrid::build(16, 32, 0.1).unwrap();
        let q = GridFunction::from_fn(&g, |z| cx((-z.norm_sqr()).exp()));
        let one = HolomorphicPolynomial::constant(cx(1.0));
        let p = HolomorphicPolynomial::from_real(&[0.0, 1.0]);
        let r = probe_family_derivative(&z2(), &p, &q, &one, &one, &PROBE_EPS).unwrap();
        assert!((r.velocity_predicted[0] - cx(-0.5)).norm() < 1e-14);
        assert!(r.velocity_error() < 1e-6);
        assert!(r.decomposition_error() < 1e-4, "{:?}", r);
    }

    #[test]
    fn zero_potential_gives_zero_derivative() {
        let g = DiskGrid::build(16, 32, 0.1).unwrap();
        let one = HolomorphicPolynomial::constant(cx(1.0));
        let phi = HolomorphicPolynomial::from_roots(cx(1.0), &[ZERO, ZERO, cx(0.5)]);
        let crit = find_critical_points(&phi, 1e-10).unwrap();
        let p = build_probe_polynomial(&crit, 0, Complex64::new(0.3, 0.2), cx(0.1)).unwrap();
        let r = probe_family_derivative(&phi, &p, &GridFunction::zeros(&g), &one, &one, &PROBE_EPS).unwrap();
        assert!(r.derivative.norm() < 1e-8);
    }

    #[test]
    fn pure_hessian_variation() {
        let g = DiskGrid::build(24, 48, 0.1).unwrap();
        let q = GridFunction::from_fn(&g, |z| cx(1.0 + 0.3 * z.re));
        let one = HolomorphicPolynomial::constant(cx(1.0));
        let crit = find_critical_points(&z2(), 1e-10).unwrap();
        for d1 in [Complex64::new(0.0, 0.7), cx(0.7)] {
            let p = build_probe_polynomial(&crit, 0, ZERO, d1).unwrap();
            let r = probe_family_derivative(&z2(), &p, &q, &one, &one, &PROBE_EPS).unwrap();
            assert_eq!(r.terms.amplitude_motion, ZERO);
            assert_eq!(r.terms.hessian_motion, ZERO);
            assert!((r.terms.hessian_probe - r.derivative).norm() < 1e-6);
        }
    }
}
