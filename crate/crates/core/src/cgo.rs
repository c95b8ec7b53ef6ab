//! Complex geometrical optics solutions
//!
//!   u₁ = e^{τΦ}(a − u₁₁) − χ₁e^{τΦ(1/z̄)}a(1/z̄) + e^{τφ₁}u₁₂
//!   v₁ = e^{−τΦ̄}(b̄ − v₁₁) − χ₂e^{−τΦ̄(1/z̄)}b̄(1/z̄) + e^{−τφ₁}v₁₂
//!
//! with the boundary cut-offs, the transport corrections u₁₁ = u₁₁,₁ + u₁₁,₂, and the
//! weighted correction u₁₂. The v₁ branch is the complex conjugate of the u₁ construction
//! for the holomorphic phase −Φ, amplitude b, cut-off χ₂ and Γ̃ = S.

use std::f64::consts::PI;
use std::sync::Arc;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::carleman::{weighted_solve_scaled, ExtField, Potential};
use crate::cauchy::{dbar_inverse, r_tilde_phi};
use crate::error::{LabError, Result};
use crate::fit::loglog_slope;
use crate::grid::{DiskGrid, GridFunction};
use crate::phase::{
    build_vanishing_corrections, classify_boundary_poly, corrections_on_grid, find_critical_points,
    BoundaryPartition, CriticalPointSet, PhaseFields,
};
use crate::poly::HolomorphicPolynomial;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn cx(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Quintic smoothstep and its first two derivatives, clamped to [0, 1].
fn smoothstep(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let u = 1.0 - t;
        (
            t * t * t * (10.0 - 15.0 * t + 6.0 * t * t),
            30.0 * t * t * u * u,
            60.0 * t * u * (1.0 - 2.0 * t),
        )
    }
}

/// C^∞ step e^{−1/t}/(e^{−1/t} + e^{−1/(1−t)}).
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// Profile that is 1 below `lo` and 0 above `hi` (or the reverse when `rising`).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Ramp {
    pub lo: f64,
    pub hi: f64,
    pub rising: bool,
}

impl Ramp {
    fn eval(&self, x: f64) -> (f64, f64, f64) {
        let w = self.hi - self.lo;
        let (s, s1, s2) = smoothstep((x - self.lo) / w);
        if self.rising {
            (s, s1 / w, s2 / (w * w))
        } else {
            (1.0 - s, -s1 / w, -s2 / (w * w))
        }
    }
}

/// χ(re^{iθ}) = A(|θ − c|)·B(1 − r): an angular ramp about the arc centre times a
/// boundary collar that is 1 for 1 − r ≤ w/2 and 0 for 1 − r ≥ w.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Cutoff {
    pub center: f64,
    pub angular: Ramp,
    pub radial_width: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct CutoffJet {
    pub value: f64,
    pub dz: Complex64,
    pub laplacian: f64,
}

impl Cutoff {
    pub fn is_zero(&self) -> bool {
        self.radial_width <= 0.0
    }

    fn offset(&self, t: f64) -> (f64, f64) {
        let d = (t - self.center).rem_euclid(2.0 * PI);
        if d <= PI {
            (d, 1.0)
        } else {
            (2.0 * PI - d, -1.0)
        }
    }

    fn radial(&self, r: f64) -> (f64, f64, f64) {
        let w = self.radial_width;
        Ramp {
            lo: w / 2.0,
            hi: w,
            rising: false,
        }
        .eval(1.0 - r)
    }

    pub fn eval(&self, z: Complex64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let r = z.norm();
        if 1.0 - r >= self.radial_width {
            return 0.0;
        }
        let (d, _) = self.offset(z.arg());
        self.angular.eval(d).0 * self.radial(r).0
    }

    pub fn jet(&self, z: Complex64) -> CutoffJet {
        let r = z.norm();
        if self.is_zero() || 1.0 - r >= self.radial_width {
            return CutoffJet {
                value: 0.0,
                dz: ZERO,
                laplacian: 0.0,
            };
        }
        let t = z.arg();
        let (d, sgn) = self.offset(t);
        let (a, a1, a2) = self.angular.eval(d);
        let (b, b1, b2) = self.radial(r);
        // B is a function of 1 − r
        let fr = -a * b1;
        let frr = a * b2;
        let ft = a1 * sgn * b;
        let ftt = a2 * b;
        CutoffJet {
            value: a * b,
            dz: 0.5 * Complex64::from_polar(1.0, -t) * Complex64::new(fr, -ft / r),
            laplacian: frr + fr / r + ftt / (r * r),
        }
    }

    /// Largest angular offset from the centre on the support.
    pub fn angular_extent(&self) -> f64 {
        if self.angular.rising {
            PI
        } else {
            self.angular.hi
        }
    }

    pub fn on_grid(&self, grid: &Arc<DiskGrid>) -> GridFunction {
        GridFunction::from_real_fn(grid, |z| self.eval(z))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct CutoffWidths {
    /// Collar width w; zero gives χ₁ = χ₂ ≡ 0.
    pub radial: f64,
    /// χ₁ drops to zero by θ₀ + split_lo·ε, χ₂ rises from θ₀ + split_hi·ε.
    pub split_lo: f64,
    pub split_hi: f64,
}

impl Default for CutoffWidths {
    fn default() -> Self {
        Self {
            radial: 0.2,
            split_lo: 0.4,
            split_hi: 0.6,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CutoffPair {
    pub chi1: Cutoff,
    pub chi2: Cutoff,
    /// min over supp χ₁ of |∂̄(Φ(1/z̄) − Φ̄(z))|
    pub c0: f64,
    /// Every sampled point of supp χ₁ ∩ Ω has φ̃₁ < φ₁.
    pub chi1_ok: bool,
    /// None when χ₂ satisfies φ̃₁ > φ₁ and the mirrored non-stationarity; otherwise the reason.
    pub chi2_issue: Option<String>,
    /// supp ∇χ₁ stays inside the open disk. Never true on the unit disk with an arc Γ₋:
    /// the angular ramp reaches the circle.
    pub grad_support_interior: bool,
}

/// Samples of the (open) support of a cut-off.
fn support_samples(c: &Cutoff, n_r: usize, n_t: usize) -> Vec<Complex64> {
    let mut out = Vec::new();
    let ext = c.angular_extent();
    for i in 0..n_r {
        let t = c.radial_width * (i as f64 + 0.5) / n_r as f64;
        for j in 0..n_t {
            let d = -ext + 2.0 * ext * (j as f64 + 0.5) / n_t as f64;
            let z = Complex64::from_polar(1.0 - t, c.center + d);
            if c.eval(z) > 0.0 {
                out.push(z);
            }
        }
    }
    out
}

fn reflect(z: Complex64) -> Complex64 {
    1.0 / z.conj()
}

/// Sign of φ₁(1/z̄) − φ₁(z) required on the support (negative for χ₁, positive for χ₂) and
/// the non-stationarity margin.
fn check_cutoff(poly: &HolomorphicPolynomial, c: &Cutoff, sign: f64) -> (bool, f64) {
    let d1 = poly.derivative();
    let mut ok = true;
    let mut c0 = f64::INFINITY;
    for z in support_samples(c, 24, 256) {
        let w = reflect(z);
        let diff = poly.eval(w).re - poly.eval(z).re;
        if !(sign * diff > 0.0) {
            ok = false;
        }
        let ns = (-d1.eval(w) / (z.conj() * z.conj()) - d1.eval(z).conj()).norm();
        c0 = c0.min(ns);
    }
    (ok && c0 > 0.0, c0)
}

pub fn build_cutoffs(
    poly: &HolomorphicPolynomial,
    partition: &BoundaryPartition,
    widths: &CutoffWidths,
) -> Result<CutoffPair> {
    partition.validate()?;
    let (t0, eps) = (partition.theta0, partition.eps);
    let mk = |w: f64| {
        (
            Cutoff {
                center: partition.center,
                angular: Ramp {
                    lo: t0,
                    hi: t0 + widths.split_lo * eps,
                    rising: false,
                },
                radial_width: w,
            },
            Cutoff {
                center: partition.center,
                angular: Ramp {
                    lo: t0 + widths.split_hi * eps,
                    hi: t0 + eps,
                    rising: true,
                },
                radial_width: w,
            },
        )
    };
    if widths.radial <= 0.0 {
        let (chi1, chi2) = mk(0.0);
        return Ok(CutoffPair {
            chi1,
            chi2,
            c0: f64::INFINITY,
            chi1_ok: true,
            chi2_issue: None,
            grad_support_interior: true,
        });
    }
    if !(widths.split_lo > 0.0 && widths.split_lo < widths.split_hi && widths.split_hi < 1.0) {
        return Err(LabError::ConfigError(
            "cut-off split fractions must satisfy 0 < lo < hi < 1".into(),
        ));
    }
    let samples: Vec<f64> = (0..512).map(|k| 2.0 * PI * k as f64 / 512.0).collect();
    let class = classify_boundary_poly(poly, 0.0, 0.0, &samples, partition);
    if !class.gamma_minus_contained {
        return Err(LabError::SupportInfeasible(
            "closure of Γ₋ is not inside ∂Ω₋".into(),
        ));
    }
    for k in 0..4 {
        let w = widths.radial / (1 << k) as f64;
        let (chi1, chi2) = mk(w);
        let (ok1, c0) = check_cutoff(poly, &chi1, -1.0);
        if !ok1 {
            continue;
        }
        let (ok2, c2) = check_cutoff(&poly.scale(cx(-1.0)), &chi2, -1.0);
        let chi2_issue = if ok2 {
            None
        } else if !class.s_contained {
            Some("closure of S is not inside ∂Ω₊".into())
        } else {
            Some(format!("φ̃₁ > φ₁ or non-stationarity fails on supp χ₂ (margin {c2:.3e})"))
        };
        return Ok(CutoffPair {
            chi1,
            chi2,
            c0,
            chi1_ok: true,
            chi2_issue,
            grad_support_interior: false,
        });
    }
    Err(LabError::SupportInfeasible(
        "φ̃₁ < φ₁ or non-stationarity fails on supp χ₁ for every collar width".into(),
    ))
}

/// e₁ = 1 − Π_k(1 − bump_k) with C^∞ radial bumps: 1 within `radius` of a critical point, 0 beyond radius + overlap.
#[derive(Clone, Debug, Serialize)]
pub struct PartitionOfUnity {
    pub points: Vec<Complex64>,
    pub radius: f64,
    pub overlap: f64,
}

impl PartitionOfUnity {
    pub fn new(points: &[Complex64], radius: f64, overlap: f64) -> Result<Self> {
        if !(radius > 0.0 && overlap > 0.0) {
            return Err(LabError::ConfigError("partition of unity needs positive radii".into()));
        }
        for p in points {
            if p.norm() + radius + overlap >= 1.0 {
                return Err(LabError::ConfigError(format!(
                    "e₁ around {p} reaches the boundary; shrink radius/overlap"
                )));
            }
        }
        Ok(Self {
            points: points.to_vec(),
            radius,
            overlap,
        })
    }

    pub fn e1(&self, z: Complex64) -> f64 {
        1.0 - self
            .points
            .iter()
            .map(|p| smooth_step(((z - p).norm() - self.radius) / self.overlap))
            .product::<f64>()
    }

    pub fn e2(&self, z: Complex64) -> f64 {
        1.0 - self.e1(z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// u₁ with phase Φ
    Holomorphic,
    /// v₁ with phase −Φ̄
    Antiholomorphic,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct CgoConfig {
    pub pde_nr: usize,
    pub pde_nt: usize,
    pub widths: CutoffWidths,
    pub pou_radius: f64,
    pub pou_overlap: f64,
    /// Build the reflected term and u₁₂. Without them the field is e^{τΦ}(a − u₁₁) only.
    pub boundary_terms: bool,
}

impl Default for CgoConfig {
    fn default() -> Self {
        Self {
            pde_nr: 24,
            pde_nt: 64,
            widths: CutoffWidths::default(),
            pou_radius: 0.3,
            pou_overlap: 0.4,
            boundary_terms: true,
        }
    }
}

/// The pieces u₁₁,₁ and u₁₁,₂ on the grid of q, plus the transport remainder.
#[derive(Clone, Debug)]
pub struct TransportCorrection {
    pub u11_1: GridFunction,
    pub u11_2: GridFunction,
    /// ∂̄ρ where ρ is the o(1/τ) remainder of the transport equation
    pub dbar_remainder: GridFunction,
    /// ‖ρ‖_{L²}
    pub remainder_norm: f64,
}

impl TransportCorrection {
    pub fn total(&self) -> GridFunction {
        self.u11_1.add(&self.u11_2)
    }
}

/// 4∂u₁₁ + 4τΦ′u₁₁ = ∂̄⁻¹(aq) − Σm_k + ρ with u₁₁,₁ = ¼R̃_Φ(e₁(·)) and
/// u₁₁,₂ = e₂(·)/(4τΦ′).
pub fn build_u11(
    q: &Potential,
    amplitude: &HolomorphicPolynomial,
    phase: &PhaseFields,
    crit: &CriticalPointSet,
    pou: &PartitionOfUnity,
    tau: f64,
) -> Result<TransportCorrection> {
    let grid = &q.grid;
    if q.is_zero() || amplitude.is_zero() {
        let z = GridFunction::zeros(grid);
        return Ok(TransportCorrection {
            u11_1: z.clone(),
            u11_2: z.clone(),
            dbar_remainder: z,
            remainder_norm: 0.0,
        });
    }
    if crit.second_derivatives.iter().any(|s| s.norm() < 1e-12) {
        return Err(LabError::DegeneratePhase("Φ″ vanishes at a critical point".into()));
    }
    let aq = GridFunction::new(
        grid,
        grid.nodes
            .iter()
            .zip(&q.q)
            .map(|(&z, &qv)| amplitude.eval(z) * qv)
            .collect(),
    );
    let m = build_vanishing_corrections(&aq, crit, false)?;
    let g = dbar_inverse(&aq).sub(&corrections_on_grid(grid, &m, false));
    let e1 = GridFunction::from_real_fn(grid, |z| pou.e1(z));
    let u11_1 = r_tilde_phi(&g.mul(&e1), phase, tau)?.scale(cx(0.25));
    // σ = e₂G/Φ′ so that u₁₁,₂ = σ/(4τ), ρ = ∂σ/τ and ∂̄ρ = Δσ/(4τ)
    let sigma = GridFunction::new(
        grid,
        (0..grid.len())
            .map(|k| {
                let e2 = 1.0 - e1.values[k].re;
                if e2 == 0.0 {
                    ZERO
                } else {
                    e2 * g.values[k] / phase.dphi[k]
                }
            })
            .collect(),
    );
    let u11_2 = sigma.scale(cx(0.25 / tau));
    let dbar_remainder = sigma.laplacian().scale(cx(0.25 / tau));
    let remainder_norm = sigma.dz().l2_norm() / tau;
    Ok(TransportCorrection {
        u11_1,
        u11_2,
        dbar_remainder,
        remainder_norm,
    })
}

/// Weighted reflected source −e^{−τφ₁}(Δ + q)(χh), h = e^{τΦ(1/z̄)}a(1/z̄), at one point.
pub fn reflected_source(
    poly: &HolomorphicPolynomial,
    amplitude: &HolomorphicPolynomial,
    chi: &Cutoff,
    tau: f64,
    z: Complex64,
    q: f64,
) -> Complex64 {
    let jet = chi.jet(z);
    if jet.value == 0.0 && jet.laplacian == 0.0 && jet.dz == ZERO {
        return ZERO;
    }
    let w = reflect(z);
    let e = (tau * poly.eval(w) - tau * poly.eval(z).re).exp();
    let a = amplitude.eval(w);
    let h = e * a;
    let zb2 = z.conj() * z.conj();
    let dbar_h = -e * (tau * poly.derivative().eval(w) * a + amplitude.derivative().eval(w)) / zb2;
    -(h * jet.laplacian + 4.0 * jet.dz * dbar_h + q * jet.value * h)
}

/// Weighted reflected term χe^{τΦ(1/z̄) − τφ₁(z)}a(1/z̄).
pub fn reflected_term(
    poly: &HolomorphicPolynomial,
    amplitude: &HolomorphicPolynomial,
    chi: &Cutoff,
    tau: f64,
    z: Complex64,
) -> Complex64 {
    let c = chi.eval(z);
    if c == 0.0 {
        return ZERO;
    }
    let w = reflect(z);
    c * (tau * poly.eval(w) - tau * poly.eval(z).re).exp() * amplitude.eval(w)
}

fn interpolate(f: &GridFunction, points: &[Complex64]) -> Vec<Complex64> {
    points.par_iter().map(|&z| f.eval_at(z)).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CgoDiagnostics {
    pub tau: f64,
    /// ‖(Δ+q)u₁·e^{−τφ₁}‖_{L²} on the grid of q, u₁₂ interpolated from the PDE grid
    pub residual: f64,
    /// ‖(Δ+q)(u₁ − e^{τφ₁}u₁₂)e^{−τφ₁}‖_{L²}, the source that u₁₂ has to absorb
    pub explicit_defect: f64,
    /// max |u₁| over the PDE boundary nodes on Γ₋ (S for v₁)
    pub trace_sup: f64,
    /// ‖(Δ+q)(χ₁h)e^{−τφ₁}‖_{L²}
    pub reflected_defect: f64,
    /// ‖ρ‖_{L²} of the transport remainder
    pub transport_remainder: f64,
    pub u11_1_norm: f64,
    pub u11_2_sup: f64,
    pub u11_boundary_sup: f64,
    pub u12_norm: f64,
    /// max residual of the discrete weighted problem for u₁₂
    pub u12_solver_residual: f64,
}

/// One CGO solution. Field values are stored for the holomorphic construction with phase P
/// (P = Φ or −Φ); for the antiholomorphic orientation the physical field is its conjugate.
#[derive(Clone, Debug)]
pub struct CGOSolution {
    pub orientation: Orientation,
    pub tau: f64,
    pub phase: HolomorphicPolynomial,
    pub core_phase: HolomorphicPolynomial,
    pub amplitude: HolomorphicPolynomial,
    pub grid: Arc<DiskGrid>,
    pub transport: TransportCorrection,
    pub cutoff: Option<Cutoff>,
    pub pou: PartitionOfUnity,
    pub u12: Option<ExtField>,
    pub diagnostics: CgoDiagnostics,
}

impl CGOSolution {
    fn orient(&self, f: GridFunction) -> GridFunction {
        match self.orientation {
            Orientation::Holomorphic => f,
            Orientation::Antiholomorphic => f.conj(),
        }
    }

    /// e^{iτ Im P}(a − u₁₁), the main part in weighted form.
    pub fn main_weighted(&self) -> GridFunction {
        let g = &self.grid;
        let u11 = self.transport.total();
        let f = GridFunction::new(
            g,
            (0..g.len())
                .map(|k| {
                    let z = g.nodes[k];
                    let p = self.core_phase.eval(z);
                    Complex64::from_polar(1.0, self.tau * p.im) * (self.amplitude.eval(z) - u11.values[k])
                })
                .collect(),
        );
        self.orient(f)
    }

    /// e^{iτ Im P}a in weighted form (no correction).
    pub fn leading_weighted(&self) -> GridFunction {
        let f = GridFunction::from_fn(&self.grid, |z| {
            Complex64::from_polar(1.0, self.tau * self.core_phase.eval(z).im) * self.amplitude.eval(z)
        });
        self.orient(f)
    }

    /// −χe^{τP(1/z̄) − τ Re P}a(1/z̄)
    pub fn reflected_weighted(&self) -> GridFunction {
        let f = match &self.cutoff {
            Some(c) => GridFunction::new(
                &self.grid,
                self.grid
                    .nodes
                    .par_iter()
                    .map(|&z| -reflected_term(&self.core_phase, &self.amplitude, c, self.tau, z))
                    .collect(),
            ),
            None => GridFunction::zeros(&self.grid),
        };
        self.orient(f)
    }

    /// u₁₂ interpolated to the grid of q.
    pub fn correction_weighted(&self) -> GridFunction {
        let f = match &self.u12 {
            Some(w) => GridFunction::new(
                &self.grid,
                self.grid.nodes.par_iter().map(|&z| w.eval_at(z)).collect(),
            ),
            None => GridFunction::zeros(&self.grid),
        };
        self.orient(f)
    }

    /// u₁e^{−τφ₁} (resp. v₁e^{τφ₁}).
    pub fn weighted_field(&self) -> GridFunction {
        self.main_weighted()
            .add(&self.reflected_weighted())
            .add(&self.correction_weighted())
    }
}

fn amplitude_nonvanishing(a: &HolomorphicPolynomial) -> Result<()> {
    if a.is_zero() {
        return Err(LabError::ConfigError("amplitude is identically zero".into()));
    }
    if let Some(r) = a.roots().into_iter().find(|r| r.norm() <= 1.0 + 1e-9) {
        return Err(LabError::ConfigError(format!("amplitude vanishes at {r} in the closed disk")));
    }
    Ok(())
}

/// Builds u₁ (orientation +Φ, amplitude a) or v₁ (orientation −Φ̄, amplitude b; the
/// antiholomorphic amplitude is b̄).
pub fn assemble_cgo(
    q: &Potential,
    phi: &HolomorphicPolynomial,
    partition: &BoundaryPartition,
    amplitude: &HolomorphicPolynomial,
    tau: f64,
    orientation: Orientation,
    cfg: &CgoConfig,
) -> Result<CGOSolution> {
    amplitude_nonvanishing(amplitude)?;
    let grid = q.grid.clone();
    let core = match orientation {
        Orientation::Holomorphic => phi.clone(),
        Orientation::Antiholomorphic => phi.scale(cx(-1.0)),
    };
    let crit = find_critical_points(phi, 1e-10).map_err(|e| e.in_stage("critical points"))?;
    let pou = PartitionOfUnity::new(&crit.points, cfg.pou_radius, cfg.pou_overlap)?;
    let core_crit = CriticalPointSet {
        second_derivatives: crit.second_derivatives.iter().map(|s| -*s).collect(),
        ..crit.clone()
    };
    let crit_used = if orientation == Orientation::Holomorphic { &crit } else { &core_crit };
    let phase = PhaseFields::new(&core, &grid);
    let transport = build_u11(q, amplitude, &phase, crit_used, &pou, tau)
        .map_err(|e| e.in_stage("u11"))?;
    let u11 = transport.total();
    let mut diagnostics = CgoDiagnostics {
        tau,
        residual: 0.0,
        explicit_defect: 0.0,
        trace_sup: 0.0,
        reflected_defect: 0.0,
        transport_remainder: transport.remainder_norm,
        u11_1_norm: transport.u11_1.l2_norm(),
        u11_2_sup: transport.u11_2.sup(),
        u11_boundary_sup: 0.0,
        u12_norm: 0.0,
        u12_solver_residual: 0.0,
    };
    let bpts = grid.boundary_points();
    diagnostics.u11_boundary_sup = interpolate(&u11, &bpts).iter().map(|v| v.norm()).fold(0.0, f64::max);
    // weighted amplitude source e^{iτ Im P}(−∂̄ρ − q u₁₁), kept without the unimodular factor
    let amp_src = GridFunction::new(
        &grid,
        (0..grid.len())
            .map(|k| -transport.dbar_remainder.values[k] - q.q[k] * u11.values[k])
            .collect(),
    );
    let unimod = |z: Complex64| Complex64::from_polar(1.0, tau * core.eval(z).im);
    if !cfg.boundary_terms {
        diagnostics.residual = GridFunction::new(
            &grid,
            (0..grid.len()).map(|k| amp_src.values[k] * unimod(grid.nodes[k])).collect(),
        )
        .l2_norm();
        diagnostics.explicit_defect = diagnostics.residual;
        return Ok(CGOSolution {
            orientation,
            tau,
            phase: phi.clone(),
            core_phase: core,
            amplitude: amplitude.clone(),
            grid,
            transport,
            cutoff: None,
            pou,
            u12: None,
            diagnostics,
        });
    }
    let pair = build_cutoffs(phi, partition, &cfg.widths).map_err(|e| e.in_stage("cutoffs"))?;
    let chi = match orientation {
        Orientation::Holomorphic => pair.chi1.clone(),
        Orientation::Antiholomorphic => {
            if let Some(issue) = &pair.chi2_issue {
                return Err(LabError::SupportInfeasible(issue.clone()).in_stage("cutoffs"));
            }
            pair.chi2.clone()
        }
    };
    let ref_src: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|k| reflected_source(&core, amplitude, &chi, tau, grid.nodes[k], q.q[k]))
        .collect();
    diagnostics.reflected_defect = GridFunction::new(&grid, ref_src.clone()).l2_norm();
    diagnostics.explicit_defect = GridFunction::new(
        &grid,
        (0..grid.len())
            .map(|k| amp_src.values[k] * unimod(grid.nodes[k]) + ref_src[k])
            .collect(),
    )
    .l2_norm();

    // u₁₂ on the PDE grid: L_τ w = −(amplitude + reflected sources), w = e^{iτ Im P}u₁₁ on Γ̃
    let pde = DiskGrid::build(cfg.pde_nr, cfg.pde_nt, grid.collar_width)?;
    let q_field = q.field();
    let q_pde = Potential {
        grid: pde.clone(),
        q: interpolate(&q_field, &pde.nodes).iter().map(|v| v.re).collect(),
    };
    let amp_pde = interpolate(&amp_src, &pde.nodes);
    let f_w = GridFunction::new(
        &pde,
        (0..pde.len())
            .into_par_iter()
            .map(|k| {
                let z = pde.nodes[k];
                -(amp_pde[k] * unimod(z) + reflected_source(&core, amplitude, &chi, tau, z, q_pde.q[k]))
            })
            .collect(),
    );
    let pde_b = pde.boundary_points();
    let u11_b = interpolate(&u11, &pde_b);
    let g_w: Vec<Complex64> = pde_b.iter().zip(&u11_b).map(|(&z, &v)| unimod(z) * v).collect();
    let mask: Vec<bool> = pde
        .theta
        .iter()
        .map(|&t| match orientation {
            Orientation::Holomorphic => partition.in_gamma_minus(t),
            Orientation::Antiholomorphic => partition.in_s(t),
        })
        .collect();
    let core_pde = PhaseFields::new(&core, &pde);
    let sol = weighted_solve_scaled(&q_pde, &f_w, &g_w, &mask, &core_pde, tau)
        .map_err(|e| e.in_stage("u12"))?;
    diagnostics.u12_norm = sol.weighted_norm;
    diagnostics.u12_solver_residual = sol.residual;

    // trace of the assembled field at the PDE boundary nodes of Γ̃
    let mut trace_sup: f64 = 0.0;
    for j in 0..pde.nt {
        if !mask[j] {
            continue;
        }
        let z = pde_b[j];
        let main = unimod(z) * (amplitude.eval(z) - u11_b[j]);
        let refl = reflected_term(&core, amplitude, &chi, tau, z);
        let weighted = main - refl + sol.weighted.boundary[j];
        trace_sup = trace_sup.max(weighted.norm() * (tau * core.eval(z).re).exp());
    }
    diagnostics.trace_sup = trace_sup;

    // residual on the grid of q: L_τ w₁₂ + amplitude source + reflected source
    let w_fine = GridFunction::new(&grid, grid.nodes.par_iter().map(|&z| sol.weighted.eval_at(z)).collect());
    let lap = w_fine.laplacian();
    let (wx, wy) = grid.gradient(&w_fine.values);
    let res = GridFunction::new(
        &grid,
        (0..grid.len())
            .map(|k| {
                let z = grid.nodes[k];
                let dp = phase.dphi[k];
                let lw = lap.values[k]
                    + 2.0 * tau * (dp.re * wx[k] - dp.im * wy[k])
                    + (tau * tau * dp.norm_sqr() + q.q[k]) * w_fine.values[k];
                lw + amp_src.values[k] * unimod(z) + ref_src[k]
            })
            .collect(),
    );
    diagnostics.residual = res.l2_norm();
    Ok(CGOSolution {
        orientation,
        tau,
        phase: phi.clone(),
        core_phase: core,
        amplitude: amplitude.clone(),
        grid,
        transport,
        cutoff: Some(chi),
        pou,
        u12: Some(sol.weighted),
        diagnostics,
    })
}

/// Tensor Gauss–Legendre rule on the collar support of a cut-off: composite panels in θ
/// (count growing with τ) and geometrically graded panels in 1 − r toward the circle.
fn collar_rule(c: &Cutoff, tau: f64) -> Vec<(Complex64, f64)> {
    let gl = GaussLegendre::new(std::num::NonZeroUsize::new(16).unwrap());
    let pairs: Vec<(f64, f64)> = gl.iter().map(|(x, w)| (*x, *w)).collect();
    let ext = c.angular_extent();
    let n_theta = 32 + (4.0 * tau * ext).ceil() as usize;
    let mut tb = vec![0.0];
    let mut t = 0.125 / tau.max(1.0);
    while t < c.radial_width {
        tb.push(t);
        t *= 2.0;
    }
    tb.push(c.radial_width);
    let mut radial = Vec::new();
    for s in tb.windows(2) {
        let (a, b) = (s[0], s[1]);
        for &(x, w) in &pairs {
            radial.push((0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w));
        }
    }
    let h = 2.0 * ext / n_theta as f64;
    let mut out = Vec::with_capacity(n_theta * 16 * radial.len());
    for p in 0..n_theta {
        let a = c.center - ext + p as f64 * h;
        for &(x, wt) in &pairs {
            let th = a + 0.5 * h * (1.0 + x);
            for &(tr, wr) in &radial {
                let r = 1.0 - tr;
                out.push((Complex64::from_polar(r, th), 0.5 * h * wt * wr * r));
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossTermReport {
    pub tau: Vec<f64>,
    pub value: Vec<Complex64>,
    pub abs: Vec<f64>,
    pub slope: f64,
}

/// J(τ) = ∫ χ r e^{τΦ(1/z̄) − τΦ̄(z)} over the collar support of χ.
pub fn cross_term_integral(
    r: impl Fn(Complex64) -> Complex64 + Sync,
    cutoff: &Cutoff,
    poly: &HolomorphicPolynomial,
    tau_sweep: &[f64],
) -> CrossTermReport {
    let value: Vec<Complex64> = tau_sweep
        .iter()
        .map(|&tau| {
            if cutoff.is_zero() {
                return ZERO;
            }
            collar_rule(cutoff, tau)
                .par_iter()
                .map(|&(z, w)| {
                    let c = cutoff.eval(z);
                    if c == 0.0 {
                        return ZERO;
                    }
                    let rv = r(z);
                    if rv == ZERO {
                        return ZERO;
                    }
                    let e = (tau * poly.eval(reflect(z)) - tau * poly.eval(z).conj()).exp();
                    w * c * rv * e
                })
                .collect::<Vec<_>>()
                .iter()
                .sum()
        })
        .collect();
    let abs: Vec<f64> = value.iter().map(|v| v.norm()).collect();
    CrossTermReport {
        tau: tau_sweep.to_vec(),
        slope: loglog_slope(tau_sweep, &abs),
        value,
        abs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z2() -> HolomorphicPolynomial {
        HolomorphicPolynomial::from_real(&[0.0, 0.0, 1.0])
    }

    fn partition() -> BoundaryPartition {
        BoundaryPartition::centered(0.5, 0.2, PI / 2.0).unwrap()
    }

    #[test]
    fn smoothstep_derivatives() {
        let h = 1e-6;
        for t in [0.2, 0.5, 0.9] {
            let (_, d1, d2) = smoothstep(t);
            let fd1 = (smoothstep(t + h).0 - smoothstep(t - h).0) / (2.0 * h);
            let fd2 = (smoothstep(t + h).1 - smoothstep(t - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-8 && (d2 - fd2).abs() < 1e-6);
        }
    }

    #[test]
    fn cutoff_jet_matches_finite_differences() {
        let pair = build_cutoffs(&z2(), &partition(), &CutoffWidths::default()).unwrap();
        let c = &pair.chi1;
        let h = 1e-5;
        for z in [Complex64::from_polar(0.88, PI / 2.0 + 0.55), Complex64::from_polar(0.95, PI / 2.0 - 0.52)] {
            let j = c.jet(z);
            let fx = (c.eval(z + h) - c.eval(z - h)) / (2.0 * h);
            let fy = (c.eval(z + Complex64::new(0.0, h)) - c.eval(z - Complex64::new(0.0, h))) / (2.0 * h);
            assert!((j.dz - 0.5 * Complex64::new(fx, -fy)).norm() < 1e-6);
            let lap = (c.eval(z + h) + c.eval(z - h) + c.eval(z + Complex64::new(0.0, h))
                + c.eval(z - Complex64::new(0.0, h))
                - 4.0 * c.eval(z))
                / (h * h);
            assert!((j.laplacian - lap).abs() < 1e-2 * (1.0 + lap.abs()));
        }
    }

    #[test]
    fn cutoff_invariants_for_z_squared() {
        let pair = build_cutoffs(&z2(), &partition(), &CutoffWidths::default()).unwrap();
        assert!(pair.chi1_ok && pair.c0 > 0.0);
        // Re z² has the same sign at antipodes, so S cannot lie in ∂Ω₊
        assert!(pair.chi2_issue.is_some());
        let g = DiskGrid::build(32, 64, 0.1).unwrap();
        for &z in &g.nodes {
            let (a, b) = (pair.chi1.eval(z), pair.chi2.eval(z));
            assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
            assert_eq!(a * b, 0.0);
        }
        assert_eq!(pair.chi1.eval(Complex64::new(0.0, 0.99)), 1.0);
    }

    #[test]
    fn zero_width_gives_zero_cutoffs() {
        let w = CutoffWidths {
            radial: 0.0,
            ..Default::default()
        };
        let pair = build_cutoffs(&z2(), &partition(), &w).unwrap();
        assert_eq!(pair.chi1.eval(Complex64::new(0.0, 0.999)), 0.0);
        assert_eq!(pair.chi2.eval(Complex64::new(0.999, 0.0)), 0.0);
    }

    #[test]
    fn gamma_minus_outside_minus_set_is_infeasible() {
        let p = BoundaryPartition::centered(0.5, 0.2, 0.0).unwrap();
        assert!(matches!(
            build_cutoffs(&z2(), &p, &CutoffWidths::default()),
            Err(LabError::SupportInfeasible(_))
        ));
    }

    #[test]
    fn partition_of_unity_supports() {
        let p = PartitionOfUnity::new(&[ZERO], 0.2, 0.1).unwrap();
        assert_eq!(p.e2(Complex64::new(0.1, 0.0)), 0.0);
        assert_eq!(p.e1(Complex64::new(0.5, 0.0)), 0.0);
        assert!(PartitionOfUnity::new(&[Complex64::new(0.8, 0.0)], 0.2, 0.1).is_err());
    }

    #[test]
    fn zero_potential_drops_transport_terms() {
        let g = DiskGrid::build(16, 32, 0.1).unwrap();
        let cfg = CgoConfig {
            pde_nr: 12,
            pde_nt: 24,
            ..Default::default()
        };
        let one = HolomorphicPolynomial::constant(cx(1.0));
        let s = assemble_cgo(&Potential::zero(&g), &z2(), &partition(), &one, 2.0, Orientation::Holomorphic, &cfg)
            .unwrap();
        assert_eq!(s.transport.total().sup(), 0.0);
        assert!(s.diagnostics.trace_sup < 1e-10, "{}", s.diagnostics.trace_sup);
        assert!(s.diagnostics.reflected_defect > 0.0);
    }

    #[test]
    fn transport_equation_holds() {
        let g = DiskGrid::build(96, 192, 0.1).unwrap();
        let q = Potential::from_fn(&g, |z| (-z.norm_sqr() / 0.09).exp());
        let a = HolomorphicPolynomial::constant(cx(1.0));
        let ph = PhaseFields::new(&z2(), &g);
        let crit = find_critical_points(&z2(), 1e-10).unwrap();
        let pou = PartitionOfUnity::new(&crit.points, 0.3, 0.4).unwrap();
        let tau = 8.0;
        let t = build_u11(&q, &a, &ph, &crit, &pou, tau).unwrap();
        let u = t.total();
        let du = u.dz();
        let aq = q.field();
        let m = build_vanishing_corrections(&aq, &crit, false).unwrap();
        let rhs = dbar_inverse(&aq).sub(&corrections_on_grid(&g, &m, false));
        // away from the overlap annulus the remainder is the only mismatch
        let mut worst: f64 = 0.0;
        for k in 0..g.len() {
            let r = g.nodes[k].norm();
            if r < 0.28 {
                let lhs = 4.0 * du.values[k] + 4.0 * tau * ph.dphi[k] * u.values[k];
                worst = worst.max((lhs - rhs.values[k]).norm());
            }
        }
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn cross_term_trivial_cases() {
        let pair = build_cutoffs(&z2(), &partition(), &CutoffWidths::default()).unwrap();
        let r0 = cross_term_integral(|_| ZERO, &pair.chi1, &z2(), &[8.0]);
        assert_eq!(r0.value[0], ZERO);
        let zero = Cutoff {
            radial_width: 0.0,
            ..pair.chi1.clone()
        };
        assert_eq!(cross_term_integral(|_| cx(1.0), &zero, &z2(), &[8.0]).value[0], ZERO);
    }

    #[test]
    fn cross_term_decays_faster_than_one_over_tau() {
        let pair = build_cutoffs(&z2(), &partition(), &CutoffWidths::default()).unwrap();
        let rep = cross_term_integral(|_| cx(1.0), &pair.chi1, &z2(), &crate::fit::DECAY_SWEEP);
        assert!(rep.slope < -1.0, "{:?}", rep);
    }
}
