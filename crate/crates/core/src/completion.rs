//! Quasi-reversibility completion of Laplace Cauchy data on the unit disk.
//!
//! ψ is sought in span{1, Re z^k, Im z^k : k ≤ K}. Every basis element is harmonic,
//! so the biharmonic penalty of the extremal functional vanishes and what is left
//! is a windowed H²(arc) misfit plus ε·‖ψ‖²_{H²(S¹)}.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{DiskGrid, GridFunction};
use crate::phase::BoundaryPartition;
use crate::poly::HolomorphicPolynomial;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalConfig {
    pub eps_reg: f64,
    pub degree: usize,
    /// Uniform samples on S¹ used for the discrete H² norms.
    #[serde(default = "default_samples")]
    pub boundary_samples: usize,
    /// Width (radians) of the window ramp inside the data arcs.
    #[serde(default = "default_ramp")]
    pub window_ramp: f64,
}

fn default_samples() -> usize {
    256
}

fn default_ramp() -> f64 {
    0.2
}

impl Default for ExtremalConfig {
    fn default() -> Self {
        Self {
            eps_reg: 1e-2,
            degree: 6,
            boundary_samples: default_samples(),
            window_ramp: default_ramp(),
        }
    }
}

impl ExtremalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_reg > 0.0) || self.degree < 1 || self.boundary_samples < 8 {
            return Err(LabError::ConfigError(format!(
                "extremal config needs eps_reg > 0, K ≥ 1, ≥ 8 samples; got {:?}",
                self
            )));
        }
        Ok(())
    }
}

/// Cauchy data (ψ, ∂ψ/∂ν) = (a, b) at uniform angles 2πj/M; entries on P_ε are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyData {
    pub partition: BoundaryPartition,
    pub angles: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl CauchyData {
    pub fn sample(
        partition: BoundaryPartition,
        m: usize,
        a: impl Fn(f64) -> f64,
        b: impl Fn(f64) -> f64,
    ) -> Self {
        let angles: Vec<f64> = (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect();
        let mask = |t: f64| if partition.in_p_eps(t) { 0.0 } else { 1.0 };
        Self {
            a: angles.iter().map(|&t| mask(t) * a(t)).collect(),
            b: angles.iter().map(|&t| mask(t) * b(t)).collect(),
            angles,
            partition,
        }
    }

    /// Data of the harmonic function ψ = Σ α_k Re z^k + β_k Im z^k.
    pub fn from_harmonic(partition: BoundaryPartition, m: usize, psi: &HarmonicExpansion) -> Self {
        Self::sample(partition, m, |t| psi.trace(t), |t| psi.normal_derivative(t))
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().chain(&self.b).all(|&v| v == 0.0)
    }

    fn max_abs(&self) -> f64 {
        self.a.iter().chain(&self.b).fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// ψ = α₀ + Σ_{k≥1} α_k Re z^k + β_k Im z^k.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicExpansion {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl HarmonicExpansion {
    pub fn zero(degree: usize) -> Self {
        Self {
            alpha: vec![0.0; degree + 1],
            beta: vec![0.0; degree + 1],
        }
    }

    pub fn degree(&self) -> usize {
        self.alpha.len() - 1
    }

    pub fn eval(&self, z: Complex64) -> f64 {
        let mut zk = Complex64::new(1.0, 0.0);
        let mut s = 0.0;
        for k in 0..=self.degree() {
            s += self.alpha[k] * zk.re + self.beta[k] * zk.im;
            zk *= z;
        }
        s
    }

    pub fn trace(&self, t: f64) -> f64 {
        self.eval(Complex64::from_polar(1.0, t))
    }

    pub fn normal_derivative(&self, t: f64) -> f64 {
        (1..=self.degree())
            .map(|k| {
                let kt = k as f64 * t;
                k as f64 * (self.alpha[k] * kt.cos() + self.beta[k] * kt.sin())
            })
            .sum()
    }

    pub fn on_grid(&self, grid: &Arc<DiskGrid>) -> GridFunction {
        GridFunction::from_real_fn(grid, |z| self.eval(z))
    }

    /// Φ holomorphic with Im Φ = ψ and Re Φ(0) = 0, i.e. c_k = β_k + iα_k.
    pub fn holomorphic_completion(&self) -> HolomorphicPolynomial {
        HolomorphicPolynomial::new(
            self.alpha
                .iter()
                .zip(&self.beta)
                .enumerate()
                .map(|(k, (&a, &b))| if k == 0 { Complex64::new(0.0, a) } else { Complex64::new(b, a) })
                .collect(),
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtremalTerms {
    pub neumann_misfit: f64,
    pub dirichlet_misfit: f64,
    pub regularization: f64,
    pub biharmonic: f64,
}

impl ExtremalTerms {
    pub fn misfit(&self) -> f64 {
        self.neumann_misfit + self.dirichlet_misfit
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtremalSolution {
    pub psi: HarmonicExpansion,
    pub j_value: f64,
    pub terms: ExtremalTerms,
    /// max over basis directions of |J′(ψ̂)[δ]|
    pub stationarity: f64,
}

/// Smooth window: 1 on the data arcs away from P_ε, 0 on P_ε.
fn window(p: &BoundaryPartition, ramp: f64, t: f64) -> f64 {
    let d = p.offset(t);
    let lo = p.theta0;
    let hi = p.theta0 + p.eps;
    if d > lo && d < hi {
        return 0.0;
    }
    let dist = if d <= lo { lo - d } else { d - hi };
    let ramp = ramp.min(0.5 * lo).min(0.5 * (PI - hi)).max(1e-12);
    smooth_step(dist / ramp)
}

fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let f = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    f(x) / (f(x) + f(1.0 - x))
}

/// Rows of the real linear map c ↦ √(1+n²+n⁴)·FFT(window·v) stacked as (re, im) pairs.
struct SobolevRows {
    m: usize,
    weights: Vec<f64>,
}

impl SobolevRows {
    fn new(m: usize) -> Self {
        let weights = (0..m)
            .map(|k| {
                let n = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
                (1.0 + n * n + n.powi(4)).sqrt()
            })
            .collect();
        Self { m, weights }
    }

    /// Returns 2m real values whose squared sum is the discrete H² norm² of v on S¹.
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(self.m);
        let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fft.process(&mut buf);
        let s = (2.0 * PI).sqrt() / self.m as f64;
        let mut out = Vec::with_capacity(2 * self.m);
        for (c, w) in buf.iter().zip(&self.weights) {
            out.push(c.re * w * s);
            out.push(c.im * w * s);
        }
        out
    }
}

/// Column k of the basis: (trace, normal derivative, H²(S¹) weight²).
fn basis(k: usize, angles: &[f64]) -> Vec<(Vec<f64>, Vec<f64>, f64)> {
    if k == 0 {
        let one = vec![1.0; angles.len()];
        return vec![(one, vec![0.0; angles.len()], 2.0 * PI)];
    }
    let kf = k as f64;
    let w = PI * (1.0 + kf * kf + kf.powi(4));
    let cos: Vec<f64> = angles.iter().map(|t| (kf * t).cos()).collect();
    let sin: Vec<f64> = angles.iter().map(|t| (kf * t).sin()).collect();
    vec![
        (cos.clone(), cos.iter().map(|v| kf * v).collect(), w),
        (sin.clone(), sin.iter().map(|v| kf * v).collect(), w),
    ]
}

struct System {
    /// Misfit design rows (Neumann block then Dirichlet block).
    design: DMatrix<f64>,
    rhs: DVector<f64>,
    reg: Vec<f64>,
    neumann_rows: usize,
}

fn assemble(data: &CauchyData, cfg: &ExtremalConfig) -> System {
    let m = data.angles.len();
    let sob = SobolevRows::new(m);
    let win: Vec<f64> = data
        .angles
        .iter()
        .map(|&t| window(&data.partition, cfg.window_ramp, t))
        .collect();
    let windowed = |v: &[f64]| -> Vec<f64> { v.iter().zip(&win).map(|(x, w)| x * w).collect() };
    let mut cols_n = Vec::new();
    let mut cols_d = Vec::new();
    let mut reg = Vec::new();
    for k in 0..=cfg.degree {
        for (tr, nd, w) in basis(k, &data.angles) {
            cols_d.push(sob.apply(&windowed(&tr)));
            cols_n.push(sob.apply(&windowed(&nd)));
            reg.push(w);
        }
    }
    let rn = 2 * m;
    let ncols = reg.len();
    let mut design = DMatrix::<f64>::zeros(2 * rn, ncols);
    for c in 0..ncols {
        for r in 0..rn {
            design[(r, c)] = cols_n[c][r];
            design[(rn + r, c)] = cols_d[c][r];
        }
    }
    let bn = sob.apply(&windowed(&data.b));
    let ad = sob.apply(&windowed(&data.a));
    let rhs = DVector::from_iterator(2 * rn, bn.into_iter().chain(ad));
    System {
        design,
        rhs,
        reg,
        neumann_rows: rn,
    }
}

fn expansion_from(coeffs: &DVector<f64>, degree: usize) -> HarmonicExpansion {
    let mut e = HarmonicExpansion::zero(degree);
    e.alpha[0] = coeffs[0];
    for k in 1..=degree {
        e.alpha[k] = coeffs[2 * k - 1];
        e.beta[k] = coeffs[2 * k];
    }
    e
}

fn solve_at(sys: &System, eps: f64, degree: usize) -> Result<ExtremalSolution> {
    let at = sys.design.transpose();
    let mut normal = &at * &sys.design;
    for (i, w) in sys.reg.iter().enumerate() {
        normal[(i, i)] += eps * w;
    }
    let rhs = &at * &sys.rhs;
    let chol = normal
        .clone()
        .cholesky()
        .ok_or_else(|| LabError::SingularNormalSystem(format!("Cholesky failed at ε = {eps:.1e}")))?;
    let c = chol.solve(&rhs);
    let res = &sys.design * &c - &sys.rhs;
    let nrow = sys.neumann_rows;
    let neumann_misfit = res.rows(0, nrow).norm_squared();
    let dirichlet_misfit = res.rows(nrow, nrow).norm_squared();
    let regularization = eps * sys.reg.iter().zip(c.iter()).map(|(w, v)| w * v * v).sum::<f64>();
    let grad = &normal * &c - &rhs;
    Ok(ExtremalSolution {
        psi: expansion_from(&c, degree),
        j_value: neumann_misfit + dirichlet_misfit + regularization,
        terms: ExtremalTerms {
            neumann_misfit,
            dirichlet_misfit,
            regularization,
            biharmonic: 0.0,
        },
        stationarity: grad.amax(),
    })
}

/// Minimiser of the extremal functional at fixed ε = cfg.eps_reg.
pub fn minimize_extremal(data: &CauchyData, cfg: &ExtremalConfig) -> Result<ExtremalSolution> {
    cfg.validate()?;
    data.partition.validate()?;
    if data.is_zero() {
        return Ok(ExtremalSolution {
            psi: HarmonicExpansion::zero(cfg.degree),
            j_value: 0.0,
            terms: ExtremalTerms {
                neumann_misfit: 0.0,
                dirichlet_misfit: 0.0,
                regularization: 0.0,
                biharmonic: 0.0,
            },
            stationarity: 0.0,
        });
    }
    solve_at(&assemble(data, cfg), cfg.eps_reg, cfg.degree)
}

#[derive(Clone, Debug, Serialize)]
pub struct CompletionStep {
    pub eps: f64,
    pub misfit: f64,
    pub j_value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Completion {
    pub psi: HarmonicExpansion,
    /// Angles on P_ε where the completed traces are reported.
    pub angles: Vec<f64>,
    pub trace: Vec<f64>,
    pub normal_derivative: Vec<f64>,
    pub history: Vec<CompletionStep>,
}

/// ε = 1e−1, 1e−2, …, 1e−8.
pub fn default_schedule() -> Vec<f64> {
    (1..=8).map(|k| 10f64.powi(-k)).collect()
}

/// Relative misfit at which the continuation counts as converged.
pub const MISFIT_TOL: f64 = 1e-8;

/// Runs the ε continuation and returns ψ̂ together with its traces on P_ε.
pub fn complete_cauchy_data(
    data: &CauchyData,
    cfg: &ExtremalConfig,
    schedule: &[f64],
    p_eps_samples: usize,
) -> Result<Completion> {
    cfg.validate()?;
    if schedule.is_empty() {
        return Err(LabError::ConfigError("empty ε schedule".into()));
    }
    let p = data.partition;
    let angles: Vec<f64> = p_eps_angles(&p, p_eps_samples);
    let sys = (!data.is_zero()).then(|| assemble(data, cfg));
    let mut history = Vec::new();
    let mut best = HarmonicExpansion::zero(cfg.degree);
    if let Some(sys) = &sys {
        let scale = data.max_abs().powi(2) * sys.rhs.len() as f64;
        let mut last = f64::INFINITY;
        for &eps in schedule {
            let sol = solve_at(sys, eps, cfg.degree)?;
            let misfit = sol.terms.misfit();
            history.push(CompletionStep {
                eps,
                misfit,
                j_value: sol.j_value,
            });
            let improved = misfit < 0.99 * last;
            if misfit <= last {
                best = sol.psi;
            }
            last = last.min(misfit);
            if !improved {
                break;
            }
        }
        if last > MISFIT_TOL * scale {
            return Err(LabError::NoConvergence {
                misfit: (last / scale).sqrt(),
            });
        }
    }
    Ok(Completion {
        trace: angles.iter().map(|&t| best.trace(t)).collect(),
        normal_derivative: angles.iter().map(|&t| best.normal_derivative(t)).collect(),
        psi: best,
        angles,
        history,
    })
}

/// n samples spread over the two connector arcs, endpoints excluded.
pub fn p_eps_angles(p: &BoundaryPartition, n: usize) -> Vec<f64> {
    let half = n.div_ceil(2).max(1);
    let mut out = Vec::with_capacity(2 * half);
    for side in [1.0, -1.0] {
        for k in 0..half {
            let s = (k as f64 + 0.5) / half as f64;
            out.push(p.center + side * (p.theta0 + s * p.eps));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part() -> BoundaryPartition {
        BoundaryPartition::new(1.2, 0.3).unwrap()
    }

    fn expansion(alpha: &[(usize, f64)], beta: &[(usize, f64)], k: usize) -> HarmonicExpansion {
        let mut e = HarmonicExpansion::zero(k);
        for &(i, v) in alpha {
            e.alpha[i] = v;
        }
        for &(i, v) in beta {
            e.beta[i] = v;
        }
        e
    }

    #[test]
    fn zero_data_gives_zero() {
        let d = CauchyData::sample(part(), 128, |_| 0.0, |_| 0.0);
        let s = minimize_extremal(&d, &ExtremalConfig::default()).unwrap();
        assert_eq!(s.j_value, 0.0);
        assert!(s.psi.alpha.iter().chain(&s.psi.beta).all(|&v| v == 0.0));
        let c = complete_cauchy_data(&d, &ExtremalConfig::default(), &default_schedule(), 16).unwrap();
        assert!(c.normal_derivative.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exact_data_has_zero_misfit_at_truth() {
        let truth = expansion(&[(2, 1.0)], &[], 6);
        let d = CauchyData::from_harmonic(part(), 256, &truth);
        let sys = assemble(&d, &ExtremalConfig::default());
        let mut c = DVector::zeros(sys.reg.len());
        c[3] = 1.0;
        let res = &sys.design * &c - &sys.rhs;
        assert!(res.norm() < 1e-10);
    }

    #[test]
    fn minimizer_is_stationary() {
        let truth = expansion(&[(3, 1.0)], &[(1, 0.4)], 6);
        let d = CauchyData::from_harmonic(part(), 256, &truth);
        let s = minimize_extremal(&d, &ExtremalConfig::default()).unwrap();
        assert!(s.stationarity < 1e-8 * s.j_value.max(1.0), "{}", s.stationarity);
    }

    #[test]
    fn recovers_re_z3_normal_derivative() {
        let truth = expansion(&[(3, 1.0)], &[], 6);
        let d = CauchyData::from_harmonic(part(), 256, &truth);
        let c = complete_cauchy_data(&d, &ExtremalConfig::default(), &default_schedule(), 32).unwrap();
        for (t, v) in c.angles.iter().zip(&c.normal_derivative) {
            assert!((v - 3.0 * (3.0 * t).cos()).abs() < 1e-3);
        }
        let m: Vec<f64> = c.history.iter().map(|s| s.misfit).collect();
        assert!(m.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)), "{m:?}");
    }

    #[test]
    fn x1_completion_matches_cos() {
        let truth = expansion(&[(1, 1.0)], &[], 6);
        let d = CauchyData::from_harmonic(part(), 256, &truth);
        let c = complete_cauchy_data(&d, &ExtremalConfig::default(), &default_schedule(), 32).unwrap();
        for (t, v) in c.angles.iter().zip(&c.normal_derivative) {
            assert!((v - t.cos()).abs() < 1e-6);
        }
    }

    #[test]
    fn under_resolved_data_does_not_pass_silently() {
        let truth = expansion(&[(5, 1.0)], &[], 5);
        let d = CauchyData::from_harmonic(part(), 256, &truth);
        let cfg = ExtremalConfig {
            degree: 4,
            ..Default::default()
        };
        match complete_cauchy_data(&d, &cfg, &default_schedule(), 16) {
            Err(LabError::NoConvergence { misfit }) => assert!(misfit > 0.0),
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn holomorphic_completion_has_psi_as_imaginary_part() {
        let e = expansion(&[(0, 0.3), (2, 1.0)], &[(1, -0.5)], 3);
        let phi = e.holomorphic_completion();
        let z = Complex64::new(0.3, -0.4);
        assert!((phi.eval(z).im - e.eval(z)).abs() < 1e-14);
    }
}
