//! Polynomials in one complex variable.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Σ c_k z^k. Trailing zero coefficients are trimmed, the zero polynomial keeps one entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct HolomorphicPolynomial {
    coeffs: Vec<Complex64>,
}

impl From<Vec<[f64; 2]>> for HolomorphicPolynomial {
    fn from(v: Vec<[f64; 2]>) -> Self {
        Self::new(v.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

impl From<HolomorphicPolynomial> for Vec<[f64; 2]> {
    fn from(p: HolomorphicPolynomial) -> Self {
        p.coeffs.iter().map(|c| [c.re, c.im]).collect()
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

impl HolomorphicPolynomial {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == Complex64::new(0.0, 0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(c(0.0));
        }
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&x| c(x)).collect())
    }

    pub fn zero() -> Self {
        Self::new(vec![])
    }

    pub fn constant(a: Complex64) -> Self {
        Self::new(vec![a])
    }

    /// a·z^k
    pub fn monomial(k: usize, a: Complex64) -> Self {
        let mut v = vec![c(0.0); k + 1];
        v[k] = a;
        Self::new(v)
    }

    /// lead·Π(z − r_k)
    pub fn from_roots(lead: Complex64, roots: &[Complex64]) -> Self {
        let mut p = Self::constant(lead);
        for &r in roots {
            p = p.mul(&Self::new(vec![-r, c(1.0)]));
        }
        p
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == c(0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(c(0.0), |acc, &a| acc * z + a)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &a)| a * k as f64)
                .collect(),
        )
    }

    /// Antiderivative with the given constant term.
    pub fn integral(&self, c0: Complex64) -> Self {
        let mut v = vec![c0];
        v.extend(self.coeffs.iter().enumerate().map(|(k, &a)| a / (k + 1) as f64));
        Self::new(v)
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        Self::new(
            (0..n)
                .map(|k| {
                    self.coeffs.get(k).copied().unwrap_or_default()
                        + o.coeffs.get(k).copied().unwrap_or_default()
                })
                .collect(),
        )
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(c(-1.0)))
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|&x| x * a).collect())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut v = vec![c(0.0); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in o.coeffs.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        Self::new(v)
    }

    pub fn pow(&self, k: usize) -> Self {
        (0..k).fold(Self::constant(c(1.0)), |acc, _| acc.mul(self))
    }

    /// Roots from the companion matrix, each polished by one Newton step.
    /// Exact zero roots are deflated first.
    pub fn roots(&self) -> Vec<Complex64> {
        let zeros = self.coeffs.iter().take_while(|c| **c == Complex64::new(0.0, 0.0)).count();
        if zeros > 0 && !self.is_zero() {
            let mut out = vec![c(0.0); zeros];
            out.extend(Self::new(self.coeffs[zeros..].to_vec()).roots());
            out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
            return out;
        }
        let n = self.degree();
        if n == 0 {
            return vec![];
        }
        let lead = self.coeffs[n];
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = c(1.0);
        }
        for i in 0..n {
            m[(i, n - 1)] = -self.coeffs[i] / lead;
        }
        let raw: Vec<Complex64> = match Schur::try_new(m, f64::EPSILON, 100 * n) {
            Some(s) => {
                let (_, t) = s.unpack();
                (0..n).map(|i| t[(i, i)]).collect()
            }
            None => self.aberth(),
        };
        let dp = self.derivative();
        let mut out: Vec<Complex64> = raw
            .into_iter()
            .map(|z| {
                let d = dp.eval(z);
                if d.norm() > 1e-8 * self.max_abs_coeff() {
                    let z1 = z - self.eval(z) / d;
                    if self.eval(z1).norm() <= self.eval(z).norm() {
                        return z1;
                    }
                }
                z
            })
            .collect();
        out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        out
    }

    /// Aberth iteration from points on a circle; fallback when the Schur sweep stalls.
    fn aberth(&self) -> Vec<Complex64> {
        let n = self.degree();
        let lead = self.coeffs[n].norm();
        let rad = 1.0 + self.coeffs[..n].iter().map(|a| a.norm() / lead).fold(0.0, f64::max);
        let mut z: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(0.5 * rad, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64))
            .collect();
        let dp = self.derivative();
        for _ in 0..500 {
            let mut moved = 0.0f64;
            for k in 0..n {
                let ratio = self.eval(z[k]) / dp.eval(z[k]);
                let rep: Complex64 = (0..n).filter(|&j| j != k).map(|j| (z[k] - z[j]).inv()).sum();
                let w = ratio / (c(1.0) - ratio * rep);
                if w.is_finite() {
                    z[k] -= w;
                    moved = moved.max(w.norm());
                }
            }
            if moved < 1e-15 * rad {
                break;
            }
        }
        z
    }

    /// Roots grouped into clusters of numerically coincident values, as (center, multiplicity).
    pub fn root_clusters(&self, tol: f64) -> Vec<(Complex64, usize)> {
        let mut clusters: Vec<(Vec<Complex64>, Complex64)> = Vec::new();
        for z in self.roots() {
            match clusters
                .iter_mut()
                .find(|(_, centre)| (*centre - z).norm() < tol * (1.0 + z.norm()))
            {
                Some((members, centre)) => {
                    members.push(z);
                    *centre = members.iter().sum::<Complex64>() / members.len() as f64;
                }
                None => clusters.push((vec![z], z)),
            }
        }
        clusters
            .into_iter()
            .map(|(m, centre)| (centre, m.len()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn monomials_evaluate_exactly() {
        let p = HolomorphicPolynomial::monomial(3, c(2.0));
        assert_eq!(p.eval(z(0.5, 0.0)), c(0.25));
        assert_eq!(p.degree(), 3);
        assert_eq!(p.derivative().degree(), 2);
        assert!(HolomorphicPolynomial::constant(c(4.0)).derivative().is_zero());
    }

    #[test]
    fn roots_of_product() {
        let rs = [z(0.3, 0.1), z(-0.5, 0.2), z(0.0, -0.7)];
        let p = HolomorphicPolynomial::from_roots(z(2.0, 1.0), &rs);
        let found = p.roots();
        for r in rs {
            assert!(found.iter().any(|f| (f - r).norm() < 1e-12));
        }
    }

    #[test]
    fn clusters_detect_multiplicity() {
        let p = HolomorphicPolynomial::from_roots(c(1.0), &[c(0.2), c(0.2), c(0.2), c(-0.4)]);
        let mut cl = p.root_clusters(1e-4);
        cl.sort_by_key(|x| x.1);
        assert_eq!(cl.len(), 2);
        assert_eq!(cl[1].1, 3);
        assert!((cl[1].0 - c(0.2)).norm() < 1e-6);
    }

    #[test]
    fn serde_roundtrip_as_pairs() {
        let p = HolomorphicPolynomial::new(vec![z(1.0, -2.0), z(0.0, 0.5)]);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[[1.0,-2.0],[0.0,0.5]]");
        let q: HolomorphicPolynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn integral_inverts_derivative() {
        let p = HolomorphicPolynomial::new(vec![z(1.0, 1.0), z(2.0, 0.0), z(0.0, 3.0)]);
        assert_eq!(p.derivative().integral(p.coeffs()[0]), p);
    }
}
