use std::sync::{Arc, OnceLock};

use cgo_lab::carleman::carleman_check;
use cgo_lab::cauchy::dbar_inverse;
use cgo_lab::phase::{find_critical_points, PhaseFields};
use cgo_lab::{DiskGrid, GridFunction, HolomorphicPolynomial};
use num_complex::Complex64;
use proptest::prelude::*;

fn grid() -> &'static Arc<DiskGrid> {
    static G: OnceLock<Arc<DiskGrid>> = OnceLock::new();
    G.get_or_init(|| DiskGrid::build(24, 48, 0.1).unwrap())
}

fn cplx() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| Complex64::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dbar_inverse_is_linear(a in cplx(), b in cplx(), c in cplx()) {
        let g = grid();
        let f1 = GridFunction::from_fn(g, |z| (z * a).exp());
        let f2 = GridFunction::from_fn(g, |z| Complex64::new((-(z - b).norm_sqr() * 4.0).exp(), 0.0));
        let lhs = dbar_inverse(&f1.scale(c).add(&f2));
        let rhs = dbar_inverse(&f1).scale(c).add(&dbar_inverse(&f2));
        prop_assert!(lhs.sub(&rhs).sup() <= 1e-12 * (1.0 + rhs.sup()));
    }

    #[test]
    fn critical_points_zero_the_derivative(r1 in cplx(), r2 in cplx(), r3 in cplx()) {
        prop_assume!((r1 - r2).norm() > 0.1 && (r2 - r3).norm() > 0.1 && (r1 - r3).norm() > 0.1);
        let p = HolomorphicPolynomial::from_roots(Complex64::new(1.0, 0.0), &[r1, r2, r3]);
        if let Ok(set) = find_critical_points(&p, 1e-10) {
            let d = p.derivative();
            for z in &set.points {
                prop_assert!(z.norm() < 1.0);
                prop_assert!(d.eval(*z).norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn carleman_ratio_is_invariant_under_power_of_two_scaling(k in -20i32..20, c in cplx()) {
        let g = grid();
        let phase = PhaseFields::new(&HolomorphicPolynomial::from_real(&[0.0, 0.0, 1.0]), g);
        let u = GridFunction::from_fn(g, |z| (1.0 - z.norm_sqr()) * (z * c).exp());
        let f = u.laplacian();
        let s = Complex64::new(2f64.powi(k), 0.0);
        let a = carleman_check(&u, &f, &phase, &[16.0, 32.0]).unwrap();
        let b = carleman_check(&u.scale(s), &f.scale(s), &phase, &[16.0, 32.0]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(((x.ratio - y.ratio) / x.ratio).abs() <= 1e-14);
        }
    }
}
