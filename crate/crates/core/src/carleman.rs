//! Schrödinger and conductivity solvers on the disk, DN maps, partial Cauchy data,
//! the Carleman estimate check and the weighted (minimum-norm) solver.
//!
//! Fields that carry boundary values live on the extended layout: the N_r·N_θ interior
//! nodes followed by one ring at r = 1.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, LU};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grid::{DiskGrid, GridFunction};
use crate::phase::{find_critical_points, BoundaryPartition, PhaseFields};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Condition number above which a discrete system counts as resonant.
pub const RESONANCE_THRESHOLD: f64 = 1e12;

fn cx(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Clone, Debug)]
pub struct Potential {
    pub grid: Arc<DiskGrid>,
    pub q: Vec<f64>,
}

impl Potential {
    pub fn zero(grid: &Arc<DiskGrid>) -> Self {
        Self {
            grid: grid.clone(),
            q: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: &Arc<DiskGrid>, f: impl Fn(Complex64) -> f64) -> Self {
        Self {
            grid: grid.clone(),
            q: grid.nodes.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn sup(&self) -> f64 {
        self.q.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.q.iter().all(|&v| v == 0.0)
    }

    /// True when q is constant on every ring.
    pub fn is_radial(&self) -> bool {
        let nt = self.grid.nt;
        self.q.chunks(nt).all(|ring| {
            let s = ring.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            ring.iter().all(|v| (v - ring[0]).abs() <= 1e-14 * s)
        })
    }

    pub fn field(&self) -> GridFunction {
        GridFunction::new(&self.grid, self.q.iter().map(|&v| cx(v)).collect())
    }
}

/// q = Δ√γ / √γ
pub fn conductivity_to_potential(gamma: &GridFunction) -> Result<Potential> {
    let min = gamma.values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(LabError::NonpositiveConductivity(min));
    }
    let root = gamma.map(|v| cx(v.re.sqrt()));
    let lap = root.laplacian();
    Ok(Potential {
        grid: gamma.grid.clone(),
        q: lap.values.iter().zip(&root.values).map(|(l, s)| l.re / s.re).collect(),
    })
}

/// Interior values plus the boundary ring.
#[derive(Clone, Debug)]
pub struct ExtField {
    pub interior: GridFunction,
    pub boundary: Vec<Complex64>,
}

impl ExtField {
    pub fn zeros(grid: &Arc<DiskGrid>) -> Self {
        Self {
            interior: GridFunction::zeros(grid),
            boundary: vec![ZERO; grid.nt],
        }
    }

    pub fn from_fn(grid: &Arc<DiskGrid>, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            interior: GridFunction::from_fn(grid, &f),
            boundary: grid.boundary_points().into_iter().map(f).collect(),
        }
    }

    pub fn grid(&self) -> &Arc<DiskGrid> {
        &self.interior.grid
    }

    pub fn stacked(&self) -> Vec<Complex64> {
        let mut v = self.interior.values.clone();
        v.extend_from_slice(&self.boundary);
        v
    }

    fn from_stacked(grid: &Arc<DiskGrid>, v: &[Complex64]) -> Self {
        let n = grid.len();
        Self {
            interior: GridFunction::new(grid, v[..n].to_vec()),
            boundary: v[n..].to_vec(),
        }
    }

    /// ∂_r at r = 1 from the extended radial interpolant.
    pub fn normal_derivative(&self) -> Vec<Complex64> {
        let g = self.grid();
        let v = self.stacked();
        let ur = g.d_r_ext(&v);
        ur[g.nr * g.nt..].to_vec()
    }

    /// Δ at the interior nodes.
    pub fn laplacian(&self) -> GridFunction {
        let g = self.grid();
        let v = self.stacked();
        let ur = g.d_r_ext(&v);
        let urr = g.d_rr_ext(&v);
        let utt = g.d_theta2_rows(&v, g.nr);
        let nt = g.nt;
        GridFunction::new(
            g,
            (0..g.len())
                .map(|k| {
                    let r = g.r[k / nt];
                    urr[k] + ur[k] / r + utt[k] / (r * r)
                })
                .collect(),
        )
    }

    /// Cartesian gradient at the interior nodes.
    pub fn gradient(&self) -> (GridFunction, GridFunction) {
        let g = self.grid();
        let v = self.stacked();
        let ur = g.d_r_ext(&v);
        let ut = g.d_theta_rows(&v, g.nr);
        let a = g.combine_dz(&ur, &ut, g.nr);
        let b = g.combine_dbar(&ur, &ut, g.nr);
        let i = Complex64::new(0.0, 1.0);
        (
            GridFunction::new(g, a.iter().zip(&b).map(|(x, y)| x + y).collect()),
            GridFunction::new(g, a.iter().zip(&b).map(|(x, y)| i * (x - y)).collect()),
        )
    }

    pub fn eval_at(&self, z: Complex64) -> Complex64 {
        let g = self.grid();
        let rho = z.norm().min(1.0);
        let (s, m) = g.radial_ext.interp_row(rho);
        let v = self.stacked();
        let nt = g.nt;
        let h = nt / 2;
        let mut ring = vec![ZERO; nt];
        for k in 0..s.len() {
            for j in 0..nt {
                ring[j] += v[k * nt + j] * s[k] + v[k * nt + (j + h) % nt] * m[k];
            }
        }
        g.ring_eval(&ring, z.arg())
    }
}

/// First column of the circulant angular operators (∂_θ, ∂_θθ).
fn angular_stencils(grid: &DiskGrid) -> (Vec<f64>, Vec<f64>) {
    let mut e = vec![ZERO; grid.nt];
    e[0] = cx(1.0);
    let d1 = grid.d_theta_rows(&e, 1).iter().map(|v| v.re).collect();
    let d2 = grid.d_theta2_rows(&e, 1).iter().map(|v| v.re).collect();
    (d1, d2)
}

/// Real matrix of w ↦ Δw + b_r ∂_r w + b_θ ∂_θ w + c w on the extended layout, rows at the
/// interior nodes.
fn operator_matrix(grid: &DiskGrid, br: &[f64], bt: &[f64], c: &[f64]) -> DMatrix<f64> {
    let (nr, nt) = (grid.nr, grid.nt);
    let n = nr * nt;
    let h = nt / 2;
    let ops = &grid.radial_ext;
    let (a1, a2) = angular_stencils(grid);
    let col = |k: usize, l: usize| if k < nr { k * nt + l } else { n + l };
    let mut m = DMatrix::<f64>::zeros(n, n + nt);
    for i in 0..nr {
        let r = grid.r[i];
        for j in 0..nt {
            let row = i * nt + j;
            for k in 0..=nr {
                let s = ops.d2_same[(i, k)] + ops.d1_same[(i, k)] * (1.0 / r + br[row]);
                let t = ops.d2_mirror[(i, k)] + ops.d1_mirror[(i, k)] * (1.0 / r + br[row]);
                m[(row, col(k, j))] += s;
                m[(row, col(k, (j + h) % nt))] += t;
            }
            for l in 0..nt {
                let d = (j + nt - l) % nt;
                m[(row, i * nt + l)] += a2[d] / (r * r) + bt[row] * a1[d];
            }
            m[(row, row)] += c[row];
        }
    }
    m
}

/// Lower estimate of ‖A⁻¹‖₁ from a few probe solves.
fn inverse_norm1_estimate(lu: &LU<f64, nalgebra::Dyn, nalgebra::Dyn>, n: usize) -> f64 {
    let probes = [
        DVector::from_element(n, 1.0 / n as f64),
        DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 } / n as f64),
        DVector::from_fn(n, |i, _| ((i as f64 * 0.754_877_666).fract() - 0.5) / n as f64),
    ];
    let mut est: f64 = 0.0;
    for x in &probes {
        let Some(y) = lu.solve(x) else { return f64::INFINITY };
        est = est.max(y.lp_norm(1) / x.lp_norm(1));
    }
    est
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max)
}

enum Factor {
    /// Per FFT slot: LU of the radial block and the coupling to the boundary value.
    Modes(Vec<(LU<f64, nalgebra::Dyn, nalgebra::Dyn>, DVector<f64>)>),
    Dense {
        lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
        boundary: DMatrix<f64>,
    },
}

/// Factorised Dirichlet problem for Δ + q.
pub struct SchrodingerSolver {
    pub grid: Arc<DiskGrid>,
    pub q: Potential,
    pub condition: f64,
    factor: Factor,
}

impl SchrodingerSolver {
    pub fn new(q: &Potential) -> Result<Self> {
        let grid = q.grid.clone();
        if q.is_radial() {
            Self::modes(q)
        } else {
            let (nr, nt) = (grid.nr, grid.nt);
            let n = nr * nt;
            let zeros = vec![0.0; n];
            let full = operator_matrix(&grid, &zeros, &zeros, &q.q);
            let a = full.columns(0, n).into_owned();
            let boundary = full.columns(n, nt).into_owned();
            let an = norm1(&a);
            let lu = a.lu();
            let condition = an * inverse_norm1_estimate(&lu, n);
            check_resonance(condition)?;
            Ok(Self {
                grid,
                q: q.clone(),
                condition,
                factor: Factor::Dense { lu, boundary },
            })
        }
    }

    fn modes(q: &Potential) -> Result<Self> {
        let grid = q.grid.clone();
        let (nr, nt) = (grid.nr, grid.nt);
        let ops = &grid.radial_ext;
        let qr: Vec<f64> = (0..nr).map(|i| q.q[i * nt]).collect();
        let blocks: Vec<_> = (0..nt)
            .map(|k| {
                let n = grid.wavenumber(k);
                let n = if k == nt / 2 { (nt / 2) as i64 } else { n };
                let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let nf = n as f64;
                let entry = |i: usize, k: usize| {
                    let r = grid.r[i];
                    (ops.d2_same[(i, k)] + sign * ops.d2_mirror[(i, k)])
                        + (ops.d1_same[(i, k)] + sign * ops.d1_mirror[(i, k)]) / r
                };
                let a = DMatrix::from_fn(nr, nr, |i, k| {
                    let mut v = entry(i, k);
                    if i == k {
                        let r = grid.r[i];
                        v += qr[i] - nf * nf / (r * r);
                    }
                    v
                });
                let b = DVector::from_fn(nr, |i, _| entry(i, nr));
                (a, b)
            })
            .collect();
        let mut condition: f64 = 0.0;
        let mut factors = Vec::with_capacity(nt);
        for (a, b) in blocks {
            let an = norm1(&a);
            let lu = a.lu();
            condition = condition.max(an * inverse_norm1_estimate(&lu, nr));
            factors.push((lu, b));
        }
        check_resonance(condition)?;
        Ok(Self {
            grid,
            q: q.clone(),
            condition,
            factor: Factor::Modes(factors),
        })
    }

    /// Solution of (Δ + q)u = f in the disk, u = boundary on S¹ (samples at the grid angles).
    pub fn solve(&self, f: &GridFunction, boundary: &[Complex64]) -> Result<ExtField> {
        let g = &self.grid;
        let (nr, nt) = (g.nr, g.nt);
        assert_eq!(boundary.len(), nt);
        let interior = match &self.factor {
            Factor::Modes(blocks) => {
                let mut fc = vec![vec![ZERO; nt]; nr];
                for i in 0..nr {
                    fc[i] = g.ring_fft(&f.values[i * nt..(i + 1) * nt]);
                }
                let bc = g.ring_fft(boundary);
                let mut coeff = vec![vec![ZERO; nt]; nr];
                for (k, (lu, b)) in blocks.iter().enumerate() {
                    let rhs_re = DVector::from_fn(nr, |i, _| fc[i][k].re - b[i] * bc[k].re);
                    let rhs_im = DVector::from_fn(nr, |i, _| fc[i][k].im - b[i] * bc[k].im);
                    let (Some(x), Some(y)) = (lu.solve(&rhs_re), lu.solve(&rhs_im)) else {
                        return Err(LabError::NearResonance(f64::INFINITY));
                    };
                    for i in 0..nr {
                        coeff[i][k] = Complex64::new(x[i], y[i]);
                    }
                }
                coeff.iter().flat_map(|c| g.ring_ifft(c)).collect::<Vec<_>>()
            }
            Factor::Dense { lu, boundary: bm } => {
                let n = nr * nt;
                let bre = DVector::from_iterator(nt, boundary.iter().map(|v| v.re));
                let bim = DVector::from_iterator(nt, boundary.iter().map(|v| v.im));
                let rre = DVector::from_fn(n, |k, _| f.values[k].re) - bm * bre;
                let rim = DVector::from_fn(n, |k, _| f.values[k].im) - bm * bim;
                let (Some(x), Some(y)) = (lu.solve(&rre), lu.solve(&rim)) else {
                    return Err(LabError::NearResonance(f64::INFINITY));
                };
                (0..n).map(|k| Complex64::new(x[k], y[k])).collect()
            }
        };
        Ok(ExtField {
            interior: GridFunction::new(g, interior),
            boundary: boundary.to_vec(),
        })
    }

    pub fn solve_homogeneous(&self, boundary: &[Complex64]) -> Result<ExtField> {
        self.solve(&GridFunction::zeros(&self.grid), boundary)
    }
}

fn check_resonance(condition: f64) -> Result<()> {
    if !condition.is_finite() || condition > RESONANCE_THRESHOLD {
        return Err(LabError::NearResonance(condition));
    }
    Ok(())
}

pub fn solve_schrodinger_dirichlet(q: &Potential, f_boundary: &[Complex64]) -> Result<ExtField> {
    SchrodingerSolver::new(q)?.solve_homogeneous(f_boundary)
}

#[derive(Clone, Debug)]
pub struct DNMap {
    /// Wavenumbers −N..=N; entry (m, n) is the e^{imθ} coefficient of Λ(e^{inθ}).
    pub modes: Vec<i64>,
    pub matrix: DMatrix<Complex64>,
}

impl DNMap {
    /// max |Λ_{−k,n} − Λ_{−n,k}|, the defect of the bilinear symmetry ∫fΛg = ∫gΛf.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.modes.len();
        let idx = |m: i64| self.modes.iter().position(|&x| x == m).unwrap();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let (k, m) = (self.modes[a], self.modes[b]);
                let d = self.matrix[(idx(-k), b)] - self.matrix[(idx(-m), a)];
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    /// max |Λ − diag(|n|)| over the rows and columns with |n| ≤ limit.
    pub fn deviation_from_free(&self, limit: i64) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, &m) in self.modes.iter().enumerate() {
            for (b, &n) in self.modes.iter().enumerate() {
                if m.abs() > limit || n.abs() > limit {
                    continue;
                }
                let want = if m == n { n.abs() as f64 } else { 0.0 };
                worst = worst.max((self.matrix[(a, b)] - want).norm());
            }
        }
        worst
    }
}

pub fn assemble_dn_map(q: &Potential, n_modes: usize) -> Result<DNMap> {
    let solver = SchrodingerSolver::new(q)?;
    dn_map_with(&solver, n_modes)
}

pub fn dn_map_with(solver: &SchrodingerSolver, n_modes: usize) -> Result<DNMap> {
    let g = &solver.grid;
    let nt = g.nt;
    if 2 * n_modes >= nt {
        return Err(LabError::ConfigError(format!(
            "{n_modes} modes need N_θ > {}, grid has {nt}",
            2 * n_modes
        )));
    }
    let modes: Vec<i64> = (-(n_modes as i64)..=n_modes as i64).collect();
    let cols: Vec<Vec<Complex64>> = modes
        .par_iter()
        .map(|&n| {
            let data: Vec<Complex64> = g.theta.iter().map(|&t| Complex64::from_polar(1.0, n as f64 * t)).collect();
            let u = solver.solve_homogeneous(&data)?;
            let c = g.ring_fft(&u.normal_derivative());
            Ok(modes.iter().map(|&m| c[m.rem_euclid(nt as i64) as usize]).collect())
        })
        .collect::<Result<_>>()?;
    let k = modes.len();
    Ok(DNMap {
        matrix: DMatrix::from_fn(k, k, |a, b| cols[b][a]),
        modes,
    })
}

#[derive(Clone, Debug)]
pub struct PartialCauchyData {
    pub partition: BoundaryPartition,
    pub input: Vec<Complex64>,
    /// (angle, u) on Γ₊
    pub dirichlet_trace: Vec<(f64, Complex64)>,
    /// (angle, ∂u/∂ν) on Γ₋,ε
    pub neumann_trace: Vec<(f64, Complex64)>,
}

/// Inputs are boundary samples at the grid angles and must vanish on Γ₋.
pub fn partial_cauchy_data(
    q: &Potential,
    partition: &BoundaryPartition,
    inputs: &[Vec<Complex64>],
) -> Result<Vec<PartialCauchyData>> {
    let g = &q.grid;
    for f in inputs {
        let bad = g
            .theta
            .iter()
            .zip(f)
            .filter(|(t, _)| partition.in_gamma_minus(**t))
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max);
        if bad > 1e-12 {
            return Err(LabError::InputNotVanishingOnGammaMinus(bad));
        }
    }
    let solver = SchrodingerSolver::new(q)?;
    inputs
        .iter()
        .map(|f| {
            let u = solver.solve_homogeneous(f)?;
            let dn = u.normal_derivative();
            Ok(PartialCauchyData {
                partition: *partition,
                input: f.clone(),
                dirichlet_trace: g
                    .theta
                    .iter()
                    .zip(f)
                    .filter(|(t, _)| partition.in_gamma_plus(**t))
                    .map(|(&t, &v)| (t, v))
                    .collect(),
                neumann_trace: g
                    .theta
                    .iter()
                    .zip(&dn)
                    .filter(|(t, _)| partition.in_gamma_minus_eps(**t))
                    .map(|(&t, &v)| (t, v))
                    .collect(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct CarlemanReport {
    pub tau: f64,
    /// τ‖ue^{τφ₁}‖²
    pub weighted_l2: f64,
    /// ‖ue^{τφ₁}‖²_{H¹}
    pub weighted_h1: f64,
    /// τ²‖|Φ′|ue^{τφ₁}‖²
    pub critical_weighted: f64,
    /// −τ∫_{∂Ω₋}(ν,∇φ₁)|∂_νu|²e^{2τφ₁} (nonnegative)
    pub boundary_minus: f64,
    /// ‖fe^{τφ₁}‖²
    pub source: f64,
    /// τ∫_{∂Ω₊}(ν,∇φ₁)|∂_νu|²e^{2τφ₁} (nonnegative)
    pub boundary_plus: f64,
    /// All terms carry the common factor e^{−2τ max φ₁}.
    pub scale_exponent: f64,
    pub ratio: f64,
}

impl CarlemanReport {
    pub fn lhs(&self) -> f64 {
        self.weighted_l2 + self.weighted_h1 + self.critical_weighted + self.boundary_minus
    }

    pub fn rhs(&self) -> f64 {
        self.source + self.boundary_plus
    }

    pub fn is_finite(&self) -> bool {
        [
            self.weighted_l2,
            self.weighted_h1,
            self.critical_weighted,
            self.boundary_minus,
            self.source,
            self.boundary_plus,
            self.ratio,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    pub fn csv_header() -> &'static str {
        "tau,weighted_l2,weighted_h1,critical_weighted,boundary_minus,source,boundary_plus,ratio"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            self.tau,
            self.weighted_l2,
            self.weighted_h1,
            self.critical_weighted,
            self.boundary_minus,
            self.source,
            self.boundary_plus,
            self.ratio
        )
    }
}

/// Every term of the Carleman estimate for u with zero trace and f = Δu.
pub fn carleman_check(
    u: &GridFunction,
    f: &GridFunction,
    phase: &PhaseFields,
    tau_sweep: &[f64],
) -> Result<Vec<CarlemanReport>> {
    find_critical_points(&phase.poly, 1e-10).map_err(|e| LabError::InadmissiblePhase(e.to_string()))?;
    let g = &u.grid;
    let bpts = g.boundary_points();
    let d1 = phase.poly.derivative();
    let phi_b: Vec<f64> = bpts.iter().map(|&w| phase.poly.eval(w).re).collect();
    let nd_b: Vec<f64> = bpts.iter().map(|&w| (d1.eval(w) * w).re).collect();
    let top = phase
        .phi1
        .iter()
        .chain(&phi_b)
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let (u1, u2) = g.gradient(&u.values);
    let dnu = g.boundary_normal_derivative(&u.values);
    let ds = 2.0 * PI / g.nt as f64;
    let reports = tau_sweep
        .iter()
        .map(|&tau| {
            let mut l2 = 0.0;
            let mut h1 = 0.0;
            let mut crit = 0.0;
            let mut src = 0.0;
            for k in 0..g.len() {
                let w = g.weights[k];
                let e = (tau * (phase.phi1[k] - top)).exp();
                let v = u.values[k] * e;
                let gx = (u1[k] + tau * phase.psi1[k] * u.values[k]) * e;
                let gy = (u2[k] - tau * phase.psi2[k] * u.values[k]) * e;
                l2 += w * v.norm_sqr();
                h1 += w * (v.norm_sqr() + gx.norm_sqr() + gy.norm_sqr());
                crit += w * phase.dphi[k].norm_sqr() * v.norm_sqr();
                src += w * (f.values[k] * e).norm_sqr();
            }
            let mut bm = 0.0;
            let mut bp = 0.0;
            for j in 0..g.nt {
                let e2 = (2.0 * tau * (phi_b[j] - top)).exp();
                let t = nd_b[j] * dnu[j].norm_sqr() * e2 * ds;
                if nd_b[j] < 0.0 {
                    bm -= t;
                } else {
                    bp += t;
                }
            }
            let mut rep = CarlemanReport {
                tau,
                weighted_l2: tau * l2,
                weighted_h1: h1,
                critical_weighted: tau * tau * crit,
                boundary_minus: tau * bm,
                source: src,
                boundary_plus: tau * bp,
                scale_exponent: 2.0 * tau * top,
                ratio: 0.0,
            };
            rep.ratio = rep.lhs() / rep.rhs();
            rep
        })
        .collect();
    Ok(reports)
}

#[derive(Clone, Debug)]
pub struct WeightedSolution {
    pub tau: f64,
    /// w = u e^{−τφ₁}
    pub weighted: ExtField,
    /// ‖ue^{−τφ₁}‖_{L²(Ω)}
    pub weighted_norm: f64,
    /// ‖fe^{−τφ₁}‖_{L²(Ω)} + ‖ge^{−τφ₁}‖_{L²(Γ̃)}
    pub data_norm: f64,
    /// max |(Δ+q₀)u − f|·e^{−τφ₁} over the interior nodes, relative to the largest weighted datum
    pub residual: f64,
}

impl WeightedSolution {
    /// ‖ue^{−τφ₁}‖·τ^{1/2} / data norm
    pub fn bound_ratio(&self) -> f64 {
        if self.data_norm == 0.0 {
            0.0
        } else {
            self.weighted_norm * self.tau.sqrt() / self.data_norm
        }
    }
}

/// Boundary shell thickness used to weight the trace unknowns in the minimum-norm objective.
fn boundary_shell(grid: &DiskGrid) -> f64 {
    (1.0 - grid.r[grid.nr - 1]) * 2.0 * PI / grid.nt as f64
}

/// Solves Δu + q₀u = f, u = g on Γ̃ (and u = 0 on the rest of ∂Ω₋) with minimal
/// ‖ue^{−τφ₁}‖. `gamma_tilde` masks the grid angles of Γ̃.
pub fn weighted_solve(
    q0: &Potential,
    f: &GridFunction,
    g: &[Complex64],
    gamma_tilde: &[bool],
    phase: &PhaseFields,
    tau: f64,
) -> Result<WeightedSolution> {
    let grid = &q0.grid;
    let fw = GridFunction::new(
        grid,
        f.values.iter().zip(&phase.phi1).map(|(v, p)| v * (-tau * p).exp()).collect(),
    );
    let gw: Vec<Complex64> = grid
        .boundary_points()
        .iter()
        .zip(g)
        .map(|(w, v)| v * (-tau * phase.poly.eval(*w).re).exp())
        .collect();
    weighted_solve_scaled(q0, &fw, &gw, gamma_tilde, phase, tau)
}

/// As [`weighted_solve`] with data already multiplied by e^{−τφ₁}; returns w = ue^{−τφ₁}.
pub fn weighted_solve_scaled(
    q0: &Potential,
    f_w: &GridFunction,
    g_w: &[Complex64],
    gamma_tilde: &[bool],
    phase: &PhaseFields,
    tau: f64,
) -> Result<WeightedSolution> {
    let grid = &q0.grid;
    let (nr, nt) = (grid.nr, grid.nt);
    let n = nr * nt;
    let bpts = grid.boundary_points();
    let d1 = phase.poly.derivative();
    let nd: Vec<f64> = bpts.iter().map(|&w| (d1.eval(w) * w).re).collect();
    for j in 0..nt {
        if gamma_tilde[j] && nd[j] >= 0.0 {
            return Err(LabError::ConstraintInfeasible(format!(
                "Γ̃ contains θ = {:.4} where (ν,∇φ₁) = {:.3e} ≥ 0",
                grid.theta[j], nd[j]
            )));
        }
    }
    let ds = 2.0 * PI / nt as f64;
    let data_norm = f_w.l2_norm()
        + (0..nt)
            .filter(|&j| gamma_tilde[j])
            .map(|j| g_w[j].norm_sqr() * ds)
            .sum::<f64>()
            .sqrt();
    if f_w.values.iter().all(|v| *v == ZERO) && (0..nt).all(|j| !gamma_tilde[j] || g_w[j] == ZERO) {
        return Ok(WeightedSolution {
            tau,
            weighted: ExtField::zeros(grid),
            weighted_norm: 0.0,
            data_norm,
            residual: 0.0,
        });
    }
    // w ↦ e^{−τφ₁}(Δ + q₀)(e^{τφ₁}w) = Δw + 2τ∇φ₁·∇w + τ²|Φ′|²w + q₀w
    let mut br = vec![0.0; n];
    let mut bt = vec![0.0; n];
    let mut c = vec![0.0; n];
    for k in 0..n {
        let z = grid.nodes[k];
        let r = z.norm();
        let dp = phase.dphi[k];
        br[k] = 2.0 * tau * (dp * z / r).re;
        bt[k] = 2.0 * tau * (-(dp * z).im) / (r * r);
        c[k] = tau * tau * dp.norm_sqr() + q0.q[k];
    }
    let op = operator_matrix(grid, &br, &bt, &c);
    let minus: Vec<usize> = (0..nt).filter(|&j| nd[j] < 0.0).collect();
    let m = n + minus.len();
    let cols = n + nt;
    let mut sqrt_w: Vec<f64> = grid.weights.iter().map(|w| w.sqrt()).collect();
    sqrt_w.extend(std::iter::repeat(boundary_shell(grid).sqrt()).take(nt));
    // Constraint matrix in the scaled unknowns y = √W·w, transposed for a thin QR.
    let mut at = DMatrix::<f64>::zeros(cols, m);
    for row in 0..n {
        for col in 0..cols {
            let v = op[(row, col)];
            if v != 0.0 {
                at[(col, row)] = v / sqrt_w[col];
            }
        }
    }
    for (t, &j) in minus.iter().enumerate() {
        at[(n + j, n + t)] = 1.0 / sqrt_w[n + j];
    }
    let mut rhs_re = DVector::<f64>::zeros(m);
    let mut rhs_im = DVector::<f64>::zeros(m);
    for k in 0..n {
        rhs_re[k] = f_w.values[k].re;
        rhs_im[k] = f_w.values[k].im;
    }
    for (t, &j) in minus.iter().enumerate() {
        if gamma_tilde[j] {
            rhs_re[n + t] = g_w[j].re;
            rhs_im[n + t] = g_w[j].im;
        }
    }
    let qr = at.qr();
    let r = qr.r();
    let diag_max = (0..m).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let diag_min = (0..m).map(|i| r[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if !(diag_min > 1e-13 * diag_max) {
        return Err(LabError::ConstraintInfeasible(format!(
            "trace system is rank deficient (pivot ratio {:.3e})",
            diag_min / diag_max
        )));
    }
    let rt = r.transpose();
    let solve = |b: &DVector<f64>| -> Result<DVector<f64>> {
        let x = rt
            .solve_lower_triangular(b)
            .ok_or_else(|| LabError::ConstraintInfeasible("singular triangular factor".into()))?;
        Ok(qr.q() * x)
    };
    let yre = solve(&rhs_re)?;
    let yim = solve(&rhs_im)?;
    let w: Vec<Complex64> = (0..cols)
        .map(|k| Complex64::new(yre[k], yim[k]) / sqrt_w[k])
        .collect();
    let weighted = ExtField::from_stacked(grid, &w);
    let wr = DVector::from_iterator(cols, w.iter().map(|v| v.re));
    let wi = DVector::from_iterator(cols, w.iter().map(|v| v.im));
    let ar = &op * &wr;
    let ai = &op * &wi;
    let scale = f_w.sup().max(g_w.iter().map(|v| v.norm()).fold(0.0, f64::max));
    let residual = (0..n)
        .map(|k| (Complex64::new(ar[k], ai[k]) - f_w.values[k]).norm())
        .fold(0.0, f64::max)
        / scale;
    Ok(WeightedSolution {
        tau,
        weighted_norm: weighted.interior.l2_norm(),
        weighted,
        data_norm,
        residual,
    })
}

/// Grid-angle mask of an angular predicate.
pub fn boundary_mask(grid: &DiskGrid, pred: impl Fn(f64) -> bool) -> Vec<bool> {
    grid.theta.iter().map(|&t| pred(t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::HolomorphicPolynomial;

    fn grid(nr: usize, nt: usize) -> Arc<DiskGrid> {
        DiskGrid::build(nr, nt, 0.1).unwrap()
    }

    #[test]
    fn constant_conductivity_has_zero_potential() {
        let g = grid(16, 32);
        let q = conductivity_to_potential(&GridFunction::from_real_fn(&g, |_| 1.0)).unwrap();
        assert!(q.sup() < 1e-9, "{}", q.sup());
    }

    #[test]
    fn exponential_conductivity_gives_unit_potential() {
        let g = grid(24, 48);
        let q = conductivity_to_potential(&GridFunction::from_real_fn(&g, |z| (2.0 * z.re).exp())).unwrap();
        assert!(q.q.iter().all(|v| (v - 1.0).abs() < 1e-6));
    }

    #[test]
    fn quadratic_conductivity_matches_symbolic_potential() {
        let g = grid(24, 48);
        let q = conductivity_to_potential(&GridFunction::from_real_fn(&g, |z| 1.0 + z.norm_sqr())).unwrap();
        for (k, z) in g.nodes.iter().enumerate() {
            let s = z.norm_sqr();
            // √γ = (1+s)^{1/2}; Δ√γ = (2 + s)/(1+s)^{3/2}
            let want = (2.0 + s) / (1.0 + s).powi(2);
            assert!((q.q[k] - want).abs() < 1e-8);
        }
    }

    #[test]
    fn nonpositive_conductivity_is_rejected() {
        let g = grid(8, 16);
        let r = conductivity_to_potential(&GridFunction::from_real_fn(&g, |z| z.re));
        assert!(matches!(r, Err(LabError::NonpositiveConductivity(_))));
    }

    #[test]
    fn harmonic_extensions() {
        let g = grid(16, 32);
        let q = Potential::zero(&g);
        for n in [1, 3] {
            let f: Vec<Complex64> = g.theta.iter().map(|t| cx((n as f64 * t).cos())).collect();
            let u = solve_schrodinger_dirichlet(&q, &f).unwrap();
            for (k, z) in g.nodes.iter().enumerate() {
                assert!((u.interior.values[k].re - (z.powi(n)).re).abs() < 1e-11);
            }
        }
    }

    fn bessel_j0(x: f64) -> f64 {
        let mut term = 1.0;
        let mut s = 1.0;
        for k in 1..40 {
            term *= -(x * x / 4.0) / (k * k) as f64;
            s += term;
        }
        s
    }

    #[test]
    fn radial_helmholtz() {
        let g = grid(16, 16);
        let q = Potential::from_fn(&g, |_| 1.0);
        let u = solve_schrodinger_dirichlet(&q, &vec![cx(1.0); g.nt]).unwrap();
        for (k, z) in g.nodes.iter().enumerate() {
            assert!((u.interior.values[k].re - bessel_j0(z.norm()) / bessel_j0(1.0)).abs() < 1e-11);
        }
    }

    #[test]
    fn dense_and_modal_solvers_agree() {
        let g = grid(10, 16);
        let q = Potential::from_fn(&g, |z| 0.5 + 0.0 * z.re);
        let f: Vec<Complex64> = g.theta.iter().map(|t| Complex64::new(t.cos(), (2.0 * t).sin())).collect();
        let a = solve_schrodinger_dirichlet(&q, &f).unwrap();
        let mut qb = q.clone();
        qb.q[3] += 1e-30;
        let modal = SchrodingerSolver::modes(&q).unwrap().solve_homogeneous(&f).unwrap();
        let zeros = vec![0.0; g.len()];
        let full = operator_matrix(&g, &zeros, &zeros, &q.q);
        let n = g.len();
        let x = DVector::from_iterator(n + g.nt, a.stacked().iter().map(|v| v.re));
        let res = (&full * &x).amax();
        assert!(res < 1e-9, "{res}");
        for k in 0..n {
            assert!((modal.interior.values[k] - a.interior.values[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn anisotropic_potential_uses_dense_path() {
        let g = grid(10, 16);
        let q = Potential::from_fn(&g, |z| 2.0 * z.re * z.im);
        assert!(!q.is_radial());
        let s = SchrodingerSolver::new(&q).unwrap();
        let f: Vec<Complex64> = g.theta.iter().map(|t| cx(t.cos())).collect();
        let u = s.solve_homogeneous(&f).unwrap();
        let res = u
            .laplacian()
            .values
            .iter()
            .zip(&u.interior.values)
            .zip(&q.q)
            .map(|((l, v), q)| (l + v * q).norm())
            .fold(0.0, f64::max);
        assert!(res < 1e-9, "{res}");
    }

    #[test]
    fn free_dn_map_is_diagonal() {
        let g = grid(32, 64);
        let dn = assemble_dn_map(&Potential::zero(&g), 16).unwrap();
        assert!(dn.deviation_from_free(16) < 1e-6);
        assert!(dn.matrix[(16, 16)].norm() < 1e-12);
    }

    #[test]
    fn dn_map_is_symmetric_for_real_potential() {
        let g = grid(12, 24);
        let q = Potential::from_fn(&g, |z| 1.0 + z.re - 0.5 * z.im * z.im);
        let dn = assemble_dn_map(&q, 5).unwrap();
        assert!(dn.symmetry_defect() < 1e-6, "{}", dn.symmetry_defect());
    }

    #[test]
    fn partial_data_rejects_inputs_on_gamma_minus() {
        let g = grid(8, 16);
        let p = BoundaryPartition::new(1.0, 0.3).unwrap();
        let r = partial_cauchy_data(&Potential::zero(&g), &p, &[vec![cx(1.0); 16]]);
        assert!(matches!(r, Err(LabError::InputNotVanishingOnGammaMinus(_))));
        let zero = partial_cauchy_data(&Potential::zero(&g), &p, &[vec![ZERO; 16]]).unwrap();
        assert!(zero[0].neumann_trace.iter().all(|(_, v)| *v == ZERO));
    }

    #[test]
    fn carleman_terms_scale_quadratically() {
        let g = grid(24, 48);
        let phase = PhaseFields::new(&HolomorphicPolynomial::from_real(&[0.0, 0.0, 1.0]), &g);
        let u = GridFunction::from_fn(&g, |z| cx(1.0 - z.norm_sqr()));
        let f = u.laplacian();
        let a = carleman_check(&u, &f, &phase, &[8.0, 32.0]).unwrap();
        let b = carleman_check(&u.scale(cx(2.0)), &f.scale(cx(2.0)), &phase, &[8.0, 32.0]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y.weighted_h1 / x.weighted_h1 - 4.0).abs() < 1e-12);
            assert!((y.ratio / x.ratio - 1.0).abs() < 1e-12);
        }
        let z = carleman_check(&GridFunction::zeros(&g), &GridFunction::zeros(&g), &phase, &[8.0]).unwrap();
        assert_eq!(z[0].lhs(), 0.0);
    }

    #[test]
    fn carleman_rejects_degenerate_phase() {
        let g = grid(8, 16);
        let phase = PhaseFields::new(&HolomorphicPolynomial::from_real(&[0.0, 0.0, 0.0, 1.0]), &g);
        let u = GridFunction::zeros(&g);
        assert!(matches!(
            carleman_check(&u, &u, &phase, &[1.0]),
            Err(LabError::InadmissiblePhase(_))
        ));
    }

    #[test]
    fn weighted_solver_zero_data() {
        let g = grid(8, 16);
        let phase = PhaseFields::new(&HolomorphicPolynomial::from_real(&[0.0, 0.0, 1.0]), &g);
        let mask = vec![false; 16];
        let s = weighted_solve(&Potential::zero(&g), &GridFunction::zeros(&g), &vec![ZERO; 16], &mask, &phase, 4.0).unwrap();
        assert!(s.weighted.stacked().iter().all(|v| *v == ZERO));
    }

    #[test]
    fn weighted_solver_meets_constraints() {
        let g = grid(12, 24);
        let phase = PhaseFields::new(&HolomorphicPolynomial::from_real(&[0.0, 0.0, 1.0]), &g);
        let p = BoundaryPartition::centered(0.5, 0.2, PI / 2.0).unwrap();
        let mask = boundary_mask(&g, |t| p.in_gamma_minus(t));
        let f = GridFunction::from_fn(&g, |z| cx((-4.0 * z.norm_sqr()).exp()));
        let gb: Vec<Complex64> = g.theta.iter().map(|t| cx(t.sin())).collect();
        let s = weighted_solve(&Potential::from_fn(&g, |_| 0.5), &f, &gb, &mask, &phase, 2.0).unwrap();
        assert!(s.residual < 1e-8, "{}", s.residual);
        for j in 0..g.nt {
            let w = Complex64::from_polar(1.0, g.theta[j]);
            let want = if mask[j] { gb[j] * (-2.0 * (w * w).re).exp() } else { ZERO };
            if (w * w).re < 0.0 || mask[j] {
                assert!((s.weighted.boundary[j] - want).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn weighted_solver_rejects_gamma_outside_minus_set() {
        let g = grid(8, 16);
        let phase = PhaseFields::new(&HolomorphicPolynomial::from_real(&[0.0, 0.0, 1.0]), &g);
        let mask = boundary_mask(&g, |t| t.cos() > 0.9);
        let f = GridFunction::from_fn(&g, |_| cx(1.0));
        let r = weighted_solve(&Potential::zero(&g), &f, &vec![ZERO; 16], &mask, &phase, 1.0);
        assert!(matches!(r, Err(LabError::ConstraintInfeasible(_))));
    }
}
