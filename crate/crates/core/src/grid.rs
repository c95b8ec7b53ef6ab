//! Polar quadrature grid on the unit disk and spectral differentiation on it.
//!
//! Radial nodes are r_i = √s_i with s_i the Gauss–Legendre nodes on (0,1), so the
//! area weights ½w_s·(2π/N_θ) integrate radial polynomials in r² exactly. Radial
//! derivatives use the diameter trick: the nodes {±r_i} carry the values
//! u(−r,θ) = u(r,θ+π), and a barycentric interpolant on that symmetric set is
//! split into a part acting on the same ray and a part acting on the opposite ray.

use std::f64::consts::PI;
use std::fmt;
use std::num::NonZeroUsize;
use std::sync::{Arc, OnceLock};

use gauss_quad::GaussLegendre;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{LabError, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Barycentric interpolation on {±p_k}, folded back onto the positive nodes.
#[derive(Clone, Debug)]
pub struct RadialOps {
    pub nodes: Vec<f64>,
    full: Vec<f64>,
    bary: Vec<f64>,
    pub d1_same: DMatrix<f64>,
    pub d1_mirror: DMatrix<f64>,
    pub d2_same: DMatrix<f64>,
    pub d2_mirror: DMatrix<f64>,
}

impl RadialOps {
    pub fn new(pos: &[f64]) -> Self {
        let m = pos.len();
        let full: Vec<f64> = pos.iter().rev().map(|x| -x).chain(pos.iter().copied()).collect();
        let n = full.len();
        let bary: Vec<f64> = (0..n)
            .map(|k| {
                let p: f64 = (0..n)
                    .filter(|&j| j != k)
                    .map(|j| 2.0 * (full[k] - full[j]))
                    .product();
                1.0 / p
            })
            .collect();
        let mut d = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut diag = 0.0;
            for k in 0..n {
                if k != i {
                    let v = bary[k] / bary[i] / (full[i] - full[k]);
                    d[(i, k)] = v;
                    diag -= v;
                }
            }
            d[(i, i)] = diag;
        }
        let mut d2 = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut diag = 0.0;
            for k in 0..n {
                if k != i {
                    let v = 2.0 * d[(i, k)] * (d[(i, i)] - 1.0 / (full[i] - full[k]));
                    d2[(i, k)] = v;
                    diag -= v;
                }
            }
            d2[(i, i)] = diag;
        }
        let fold = |a: &DMatrix<f64>| {
            let same = DMatrix::from_fn(m, m, |i, k| a[(m + i, m + k)]);
            let mirror = DMatrix::from_fn(m, m, |i, k| a[(m + i, m - 1 - k)]);
            (same, mirror)
        };
        let (d1_same, d1_mirror) = fold(&d);
        let (d2_same, d2_mirror) = fold(&d2);
        Self {
            nodes: pos.to_vec(),
            full,
            bary,
            d1_same,
            d1_mirror,
            d2_same,
            d2_mirror,
        }
    }

    fn fold_row(&self, row: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = self.nodes.len();
        let same = (0..m).map(|k| row[m + k]).collect();
        let mirror = (0..m).map(|k| row[m - 1 - k]).collect();
        (same, mirror)
    }

    fn lagrange_full(&self, rho: f64) -> Vec<f64> {
        if let Some(k) = self.full.iter().position(|&x| x == rho) {
            let mut e = vec![0.0; self.full.len()];
            e[k] = 1.0;
            return e;
        }
        let t: Vec<f64> = self
            .full
            .iter()
            .zip(&self.bary)
            .map(|(x, w)| w / (rho - x))
            .collect();
        let s: f64 = t.iter().sum();
        t.into_iter().map(|v| v / s).collect()
    }

    /// Interpolation weights at radius rho ∈ [0, 1], as (same ray, opposite ray).
    pub fn interp_row(&self, rho: f64) -> (Vec<f64>, Vec<f64>) {
        self.fold_row(&self.lagrange_full(rho))
    }

    /// Weights of the radial derivative of the interpolant at rho.
    pub fn deriv_row(&self, rho: f64) -> (Vec<f64>, Vec<f64>) {
        let l = self.lagrange_full(rho);
        let n = self.full.len();
        let mut d = vec![0.0; n];
        for (j, &lj) in l.iter().enumerate() {
            if lj == 0.0 {
                continue;
            }
            for (k, dk) in d.iter_mut().enumerate() {
                let djk = if j == k {
                    -(0..n)
                        .filter(|&q| q != j)
                        .map(|q| self.bary[q] / self.bary[j] / (self.full[j] - self.full[q]))
                        .sum::<f64>()
                } else {
                    self.bary[k] / self.bary[j] / (self.full[j] - self.full[k])
                };
                *dk += lj * djk;
            }
        }
        self.fold_row(&d)
    }
}

/// Polar tensor grid; node (i, j) sits at r_i e^{iθ_j} and is stored at index i·N_θ + j.
pub struct DiskGrid {
    pub nr: usize,
    pub nt: usize,
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
    pub nodes: Vec<Complex64>,
    pub weights: Vec<f64>,
    pub collar_width: f64,
    pub radial: RadialOps,
    /// Radial operators on the interior nodes plus r = 1.
    pub radial_ext: RadialOps,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    pub(crate) cauchy_plan: OnceLock<crate::cauchy::CauchyPlan>,
}

impl fmt::Debug for DiskGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiskGrid")
            .field("nr", &self.nr)
            .field("nt", &self.nt)
            .field("collar_width", &self.collar_width)
            .finish()
    }
}

impl DiskGrid {
    pub fn build(nr: usize, nt: usize, collar_width: f64) -> Result<Arc<Self>> {
        if nr < 4 || nt < 4 {
            return Err(LabError::InvalidResolution(format!(
                "need N_r, N_θ ≥ 4, got {nr}×{nt}"
            )));
        }
        if nt % 2 != 0 {
            return Err(LabError::InvalidResolution(format!("N_θ must be even, got {nt}")));
        }
        if !(0.0..1.0).contains(&collar_width) {
            return Err(LabError::InvalidResolution(format!(
                "collar width {collar_width} outside [0,1)"
            )));
        }
        let gl = GaussLegendre::new(NonZeroUsize::new(nr).unwrap());
        let mut pairs: Vec<(f64, f64)> = gl
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| ((x + 1.0) / 2.0, w / 2.0))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let r: Vec<f64> = pairs.iter().map(|p| p.0.sqrt()).collect();
        let theta: Vec<f64> = (0..nt).map(|j| 2.0 * PI * j as f64 / nt as f64).collect();
        let dth = 2.0 * PI / nt as f64;
        let mut nodes = Vec::with_capacity(nr * nt);
        let mut weights = Vec::with_capacity(nr * nt);
        for (i, &ri) in r.iter().enumerate() {
            for &t in &theta {
                nodes.push(Complex64::from_polar(ri, t));
                weights.push(0.5 * pairs[i].1 * dth);
            }
        }
        let mut ext = r.clone();
        ext.push(1.0);
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Self {
            nr,
            nt,
            radial: RadialOps::new(&r),
            radial_ext: RadialOps::new(&ext),
            r,
            theta,
            nodes,
            weights,
            collar_width,
            fwd: planner.plan_fft_forward(nt),
            inv: planner.plan_fft_inverse(nt),
            cauchy_plan: OnceLock::new(),
        }))
    }

    pub fn len(&self) -> usize {
        self.nr * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nt + j
    }

    /// Largest node spacing, radial or angular.
    pub fn spacing(&self) -> f64 {
        let mut h = self.r[0];
        for w in self.r.windows(2) {
            h = h.max(w[1] - w[0]);
        }
        h = h.max(1.0 - self.r[self.nr - 1]);
        h.max(2.0 * PI / self.nt as f64)
    }

    pub fn in_collar(&self, k: usize, width: f64) -> bool {
        1.0 - self.r[k / self.nt] <= width
    }

    /// Fourier coefficients of one ring (normalised by N_θ).
    pub fn ring_fft(&self, ring: &[Complex64]) -> Vec<Complex64> {
        let mut buf = ring.to_vec();
        self.fwd.process(&mut buf);
        let s = 1.0 / self.nt as f64;
        buf.iter_mut().for_each(|v| *v *= s);
        buf
    }

    pub fn ring_ifft(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut buf = coeffs.to_vec();
        self.inv.process(&mut buf);
        buf
    }

    /// Signed wavenumber of FFT slot k.
    pub fn wavenumber(&self, k: usize) -> i64 {
        if k <= self.nt / 2 {
            k as i64
        } else {
            k as i64 - self.nt as i64
        }
    }

    /// Fourier multiplier applied ring by ring; the Nyquist slot gets `nyq`.
    fn angular_multiplier(
        &self,
        u: &[Complex64],
        rows: usize,
        mult: impl Fn(i64) -> Complex64,
        nyq: Complex64,
    ) -> Vec<Complex64> {
        let nt = self.nt;
        let mut out = Vec::with_capacity(rows * nt);
        for i in 0..rows {
            let mut c = self.ring_fft(&u[i * nt..(i + 1) * nt]);
            for (k, v) in c.iter_mut().enumerate() {
                *v *= if k == nt / 2 { nyq } else { mult(self.wavenumber(k)) };
            }
            out.extend(self.ring_ifft(&c));
        }
        out
    }

    pub fn d_theta_rows(&self, u: &[Complex64], rows: usize) -> Vec<Complex64> {
        self.angular_multiplier(u, rows, |n| I * n as f64, Complex64::new(0.0, 0.0))
    }

    pub fn d_theta2_rows(&self, u: &[Complex64], rows: usize) -> Vec<Complex64> {
        let h = (self.nt / 2) as f64;
        self.angular_multiplier(
            u,
            rows,
            |n| Complex64::new(-((n * n) as f64), 0.0),
            Complex64::new(-h * h, 0.0),
        )
    }

    fn radial_apply(
        &self,
        ops: &RadialOps,
        same: &DMatrix<f64>,
        mirror: &DMatrix<f64>,
        u: &[Complex64],
    ) -> Vec<Complex64> {
        let m = ops.nodes.len();
        let nt = self.nt;
        let h = nt / 2;
        let mut out = vec![Complex64::new(0.0, 0.0); m * nt];
        for i in 0..m {
            let row = &mut out[i * nt..(i + 1) * nt];
            for k in 0..m {
                let a = same[(i, k)];
                let b = mirror[(i, k)];
                let src = &u[k * nt..(k + 1) * nt];
                for j in 0..nt {
                    row[j] += src[j] * a + src[(j + h) % nt] * b;
                }
            }
        }
        out
    }

    pub fn d_r(&self, u: &[Complex64]) -> Vec<Complex64> {
        let o = &self.radial;
        self.radial_apply(o, &o.d1_same, &o.d1_mirror, u)
    }

    pub fn d_rr(&self, u: &[Complex64]) -> Vec<Complex64> {
        let o = &self.radial;
        self.radial_apply(o, &o.d2_same, &o.d2_mirror, u)
    }

    /// u extended with a boundary ring: layout (N_r + 1)·N_θ, the last ring at r = 1.
    pub fn d_r_ext(&self, u: &[Complex64]) -> Vec<Complex64> {
        let o = &self.radial_ext;
        self.radial_apply(o, &o.d1_same, &o.d1_mirror, u)
    }

    pub fn d_rr_ext(&self, u: &[Complex64]) -> Vec<Complex64> {
        let o = &self.radial_ext;
        self.radial_apply(o, &o.d2_same, &o.d2_mirror, u)
    }

    /// Cartesian-free derivative bundle (∂_r, ∂_θ, ∂_rr, ∂_θθ) on interior values.
    fn polar_parts(&self, u: &[Complex64]) -> [Vec<Complex64>; 4] {
        [
            self.d_r(u),
            self.d_theta_rows(u, self.nr),
            self.d_rr(u),
            self.d_theta2_rows(u, self.nr),
        ]
    }

    /// ∂̄ = ½e^{iθ}(∂_r + (i/r)∂_θ)
    pub fn dbar(&self, u: &[Complex64]) -> Vec<Complex64> {
        let ur = self.d_r(u);
        let ut = self.d_theta_rows(u, self.nr);
        self.combine_dbar(&ur, &ut, self.nr)
    }

    /// ∂ = ½e^{−iθ}(∂_r − (i/r)∂_θ)
    pub fn dz(&self, u: &[Complex64]) -> Vec<Complex64> {
        let ur = self.d_r(u);
        let ut = self.d_theta_rows(u, self.nr);
        self.combine_dz(&ur, &ut, self.nr)
    }

    fn r_of_row(&self, i: usize) -> f64 {
        if i < self.nr {
            self.r[i]
        } else {
            1.0
        }
    }

    pub(crate) fn combine_dbar(
        &self,
        ur: &[Complex64],
        ut: &[Complex64],
        rows: usize,
    ) -> Vec<Complex64> {
        let nt = self.nt;
        (0..rows * nt)
            .map(|k| {
                let (i, j) = (k / nt, k % nt);
                let r = self.r_of_row(i);
                0.5 * Complex64::from_polar(1.0, self.theta[j]) * (ur[k] + I * ut[k] / r)
            })
            .collect()
    }

    pub(crate) fn combine_dz(&self, ur: &[Complex64], ut: &[Complex64], rows: usize) -> Vec<Complex64> {
        let nt = self.nt;
        (0..rows * nt)
            .map(|k| {
                let (i, j) = (k / nt, k % nt);
                let r = self.r_of_row(i);
                0.5 * Complex64::from_polar(1.0, -self.theta[j]) * (ur[k] - I * ut[k] / r)
            })
            .collect()
    }

    pub fn laplacian(&self, u: &[Complex64]) -> Vec<Complex64> {
        let [ur, _, urr, utt] = self.polar_parts(u);
        let nt = self.nt;
        (0..u.len())
            .map(|k| {
                let r = self.r[k / nt];
                urr[k] + ur[k] / r + utt[k] / (r * r)
            })
            .collect()
    }

    /// Cartesian gradient (∂₁u, ∂₂u) = (∂u + ∂̄u, i(∂u − ∂̄u)).
    pub fn gradient(&self, u: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let a = self.dz(u);
        let b = self.dbar(u);
        let g1 = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let g2 = a.iter().zip(&b).map(|(x, y)| I * (x - y)).collect();
        (g1, g2)
    }

    /// Values on the ring of radius rho (0 ≤ rho ≤ 1) by radial interpolation.
    pub fn ring_at(&self, u: &[Complex64], rho: f64) -> Vec<Complex64> {
        let (s, m) = self.radial.interp_row(rho);
        self.ring_from_rows(u, &s, &m)
    }

    /// Radial derivative of the interpolant on the ring of radius rho.
    pub fn ring_dr_at(&self, u: &[Complex64], rho: f64) -> Vec<Complex64> {
        let (s, m) = self.radial.deriv_row(rho);
        self.ring_from_rows(u, &s, &m)
    }

    fn ring_from_rows(&self, u: &[Complex64], s: &[f64], m: &[f64]) -> Vec<Complex64> {
        let nt = self.nt;
        let h = nt / 2;
        let mut out = vec![Complex64::new(0.0, 0.0); nt];
        for k in 0..s.len() {
            let src = &u[k * nt..(k + 1) * nt];
            for j in 0..nt {
                out[j] += src[j] * s[k] + src[(j + h) % nt] * m[k];
            }
        }
        out
    }

    pub fn boundary_trace(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.ring_at(u, 1.0)
    }

    pub fn boundary_normal_derivative(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.ring_dr_at(u, 1.0)
    }

    /// Trigonometric interpolation of one ring at angle t.
    pub fn ring_eval(&self, ring: &[Complex64], t: f64) -> Complex64 {
        let c = self.ring_fft(ring);
        let nt = self.nt;
        let mut v = Complex64::new(0.0, 0.0);
        for (k, ck) in c.iter().enumerate() {
            if k == nt / 2 {
                v += ck * (t * (nt / 2) as f64).cos();
            } else {
                v += ck * Complex64::from_polar(1.0, self.wavenumber(k) as f64 * t);
            }
        }
        v
    }

    /// Spectral interpolation of a grid field at an arbitrary point of the closed disk.
    pub fn eval_at(&self, u: &[Complex64], z: Complex64) -> Complex64 {
        let ring = self.ring_at(u, z.norm().min(1.0));
        self.ring_eval(&ring, z.arg())
    }

    pub fn integrate(&self, u: &[Complex64]) -> Complex64 {
        u.iter().zip(&self.weights).map(|(v, w)| v * *w).sum()
    }

    pub fn integrate_real(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    pub fn sample(&self, f: impl Fn(Complex64) -> Complex64) -> Vec<Complex64> {
        self.nodes.iter().map(|&z| f(z)).collect()
    }

    /// Unit-circle points at the grid angles.
    pub fn boundary_points(&self) -> Vec<Complex64> {
        self.theta.iter().map(|&t| Complex64::from_polar(1.0, t)).collect()
    }
}

/// A complex field sampled on a grid.
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub grid: Arc<DiskGrid>,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: &Arc<DiskGrid>, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), grid.len(), "field length must match the grid");
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Arc<DiskGrid>) -> Self {
        Self::new(grid, vec![Complex64::new(0.0, 0.0); grid.len()])
    }

    pub fn from_fn(grid: &Arc<DiskGrid>, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::new(grid, grid.sample(f))
    }

    pub fn from_real_fn(grid: &Arc<DiskGrid>, f: impl Fn(Complex64) -> f64) -> Self {
        Self::new(grid, grid.sample(|z| Complex64::new(f(z), 0.0)))
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::new(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, o: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        Self::new(
            &self.grid,
            self.values.iter().zip(&o.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn mul(&self, o: &Self) -> Self {
        self.zip_with(o, |a, b| a * b)
    }

    pub fn add(&self, o: &Self) -> Self {
        self.zip_with(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.zip_with(o, |a, b| a - b)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|v| v * s)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.grid.weights)
            .map(|(v, w)| v.norm_sqr() * w)
            .sum::<f64>()
            .sqrt()
    }

    pub fn integral(&self) -> Complex64 {
        self.grid.integrate(&self.values)
    }

    pub fn eval_at(&self, z: Complex64) -> Complex64 {
        self.grid.eval_at(&self.values, z)
    }

    pub fn dbar(&self) -> Self {
        Self::new(&self.grid, self.grid.dbar(&self.values))
    }

    pub fn dz(&self) -> Self {
        Self::new(&self.grid, self.grid.dz(&self.values))
    }

    pub fn laplacian(&self) -> Self {
        Self::new(&self.grid, self.grid.laplacian(&self.values))
    }

    pub fn boundary_trace(&self) -> Vec<Complex64> {
        self.grid.boundary_trace(&self.values)
    }

    pub fn boundary_normal_derivative(&self) -> Vec<Complex64> {
        self.grid.boundary_normal_derivative(&self.values)
    }

    /// Real parts, for fields that are real by construction.
    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cx(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn weights_sum_to_pi() {
        let g = DiskGrid::build(32, 64, 0.1).unwrap();
        let s: f64 = g.weights.iter().sum();
        assert!((s - PI).abs() < 1e-12);
        assert!(g.nodes.iter().all(|z| z.norm() < 1.0));
    }

    #[test]
    fn integrates_one_and_r_squared() {
        let g = DiskGrid::build(32, 64, 0.1).unwrap();
        let one = GridFunction::from_fn(&g, |_| cx(1.0));
        assert!((one.integral().re - PI).abs() < 1e-12);
        let r2 = GridFunction::from_fn(&g, |z| cx(z.norm_sqr()));
        assert!((r2.integral().re - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_tiny_grids() {
        assert!(matches!(
            DiskGrid::build(3, 64, 0.1),
            Err(LabError::InvalidResolution(_))
        ));
        assert!(DiskGrid::build(8, 9, 0.1).is_err());
    }

    #[test]
    fn derivatives_of_polynomials() {
        let g = DiskGrid::build(16, 32, 0.1).unwrap();
        let u = GridFunction::from_fn(&g, |z| z * z * z.conj() + z.conj().powu(3));
        let db = u.dbar();
        let dz = u.dz();
        let lap = u.laplacian();
        for (k, &z) in g.nodes.iter().enumerate() {
            assert!((db.values[k] - (z * z + 3.0 * z.conj().powu(2))).norm() < 1e-10);
            assert!((dz.values[k] - 2.0 * z * z.conj()).norm() < 1e-10);
            assert!((lap.values[k] - 8.0 * z).norm() < 1e-9);
        }
    }

    #[test]
    fn traces_and_interpolation() {
        let g = DiskGrid::build(16, 32, 0.1).unwrap();
        let u = GridFunction::from_fn(&g, |z| (z * 0.7).exp() + z.conj().powu(2));
        let tr = u.boundary_trace();
        let dn = u.boundary_normal_derivative();
        for (j, &t) in g.theta.iter().enumerate() {
            let w = Complex64::from_polar(1.0, t);
            assert!((tr[j] - ((w * 0.7).exp() + w.conj().powu(2))).norm() < 1e-10);
            let exact = 0.7 * w * (w * 0.7).exp() + 2.0 * w.conj().powu(2);
            assert!((dn[j] - exact).norm() < 1e-8);
        }
        let p = Complex64::new(0.31, -0.42);
        let exact = (p * 0.7).exp() + p.conj().powu(2);
        assert!((u.eval_at(p) - exact).norm() < 1e-10);
        assert!((u.eval_at(cx(0.0)) - cx(1.0)).norm() < 1e-10);
    }

    #[test]
    fn extended_operators_use_boundary_ring() {
        let g = DiskGrid::build(12, 24, 0.1).unwrap();
        let mut ext: Vec<Complex64> = g.nodes.iter().map(|z| z.powu(3)).collect();
        ext.extend(g.boundary_points().iter().map(|w| w.powu(3)));
        let d = g.d_rr_ext(&ext);
        for k in 0..ext.len() {
            let (i, j) = (k / g.nt, k % g.nt);
            let r = if i < g.nr { g.r[i] } else { 1.0 };
            let exact = 6.0 * r * Complex64::from_polar(1.0, 3.0 * g.theta[j]);
            assert!((d[k] - exact).norm() < 1e-9);
        }
    }
}
