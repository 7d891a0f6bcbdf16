use forchflow::{degree_condition, monotonicity_gap, ConductivityKernel, ForchheimerPolynomial, Kernel32, Polynomial32};
use proptest::prelude::*;

type P = ForchheimerPolynomial<f64>;

fn poly_strategy() -> impl Strategy<Value = P> {
    (1usize..=3)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0.05f64..1.5, n),
                prop::collection::vec(-1.0f64..1.0, n + 1),
            )
        })
        .prop_map(|(gaps, logs)| {
            let mut exps = vec![0.0];
            for g in gaps {
                exps.push(exps.last().unwrap() + g);
            }
            let coefs = logs.iter().map(|l| 10f64.powf(*l)).collect();
            P::from_parts(exps, coefs).unwrap()
        })
}

fn xi_strategy() -> impl Strategy<Value = f64> {
    (-4.0f64..4.0).prop_map(|e| 10f64.powf(e))
}

fn vec_strategy() -> impl Strategy<Value = [f64; 2]> {
    (xi_strategy(), 0.0f64..std::f64::consts::TAU).prop_map(|(r, t)| [r * t.cos(), r * t.sin()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn root_solves_the_defining_equation(poly in poly_strategy(), xi in xi_strategy()) {
        let k = ConductivityKernel::new(poly.clone());
        let s = k.solve_s(xi).unwrap();
        let g = poly.eval_g(s).unwrap();
        prop_assert!((s * g - xi).abs() <= 1e-12 * xi);
        prop_assert!((k.k(xi) - 1.0 / g).abs() <= 1e-14 / g);
    }

    #[test]
    fn derivative_bound(poly in poly_strategy(), xi in xi_strategy()) {
        let k = ConductivityKernel::new(poly.clone());
        let a = poly.degeneracy().a;
        let ev = k.eval(xi).unwrap();
        prop_assert!(ev.xi_k_prime <= 0.0);
        prop_assert!(ev.xi_k_prime >= -a * ev.K * (1.0 + 1e-12));
    }

    #[test]
    fn derivative_matches_finite_difference(poly in poly_strategy(), xi in (-2.0f64..2.0).prop_map(|e| 10f64.powf(e))) {
        let k = ConductivityKernel::new(poly);
        let h = xi * 1e-5;
        let fd = (k.k(xi + h) - k.k(xi - h)) / (2.0 * h);
        let ev = k.eval(xi).unwrap();
        prop_assert!((ev.k_prime - fd).abs() <= 1e-6 * ev.K / xi + 1e-12);
    }

    #[test]
    fn h_forms_agree_and_sandwich(poly in poly_strategy(), xi in (-3.0f64..3.0).prop_map(|e| 10f64.powf(e))) {
        let k = ConductivityKernel::new(poly);
        let closed = k.eval_h_closed_form(xi).unwrap();
        let quad = k.eval_h(xi).unwrap();
        prop_assert!((closed - quad).abs() <= 1e-7 * closed);
        let kx2 = k.k(xi) * xi * xi;
        prop_assert!(closed >= kx2 * (1.0 - 1e-12) && closed <= 2.0 * kx2 * (1.0 + 1e-12));
    }

    #[test]
    fn k_decreasing_and_k_xi_m_increasing(poly in poly_strategy(), xi in xi_strategy(), r in 1e-6f64..2.0) {
        let k = ConductivityKernel::new(poly);
        let x2 = xi * (1.0 + r);
        let (k1, k2) = (k.k(xi), k.k(x2));
        prop_assert!(k2 <= k1 * (1.0 + 1e-13));
        prop_assert!(k2 * x2 >= k1 * xi * (1.0 - 1e-13));
        prop_assert!(k2 * x2 * x2 >= k1 * xi * xi * (1.0 - 1e-13));
    }

    #[test]
    fn monotonicity(poly in poly_strategy(), y in vec_strategy(), yp in vec_strategy(), shift in prop::collection::vec(-0.5f64..0.5, 4)) {
        let gap = monotonicity_gap(&poly, &poly, y, yp).unwrap();
        prop_assert_eq!(gap.rhs_perturb, 0.0);
        prop_assert!(gap.slack() >= -1e-12 * gap.lhs.abs().max(gap.rhs_coercive));
        let c: Vec<f64> = poly.coefficients().iter().zip(shift.iter().cycle()).map(|(c, s)| c * (1.0 + s)).collect();
        let other = poly.with_coefficients(c).unwrap();
        let gap = monotonicity_gap(&poly, &other, y, yp).unwrap();
        let scale = gap.lhs.abs().max(gap.rhs_coercive).max(gap.rhs_perturb);
        prop_assert!(gap.slack() >= -1e-12 * scale);
    }

    #[test]
    fn jacobian_bound_and_symmetry(poly in poly_strategy(), y in vec_strategy(), z in vec_strategy()) {
        let k = ConductivityKernel::new(poly.clone());
        let a = poly.degeneracy().a;
        let j = k.flux_jacobian(y);
        prop_assert!((j[0][1] - j[1][0]).abs() <= 1e-15 * (j[0][0].abs() + j[1][1].abs()));
        let quad = z[0] * (j[0][0] * z[0] + j[0][1] * z[1]) + z[1] * (j[1][0] * z[0] + j[1][1] * z[1]);
        let floor = (1.0 - a) * k.k(y[0].hypot(y[1]));
        prop_assert!(quad >= floor * (z[0] * z[0] + z[1] * z[1]) * (1.0 - 1e-12));
        prop_assert!(k.jacobian_min_eigenvalue(y) >= floor * (1.0 - 1e-12));
    }

    #[test]
    fn single_precision_tracks_double(alpha in 0.5f64..2.0, beta in 0.1f64..5.0, xi in (-2.0f64..2.0).prop_map(|e| 10f64.powf(e))) {
        let k64 = ConductivityKernel::new(P::two_term(alpha, beta).unwrap());
        let k32 = Kernel32::new(Polynomial32::two_term(alpha as f32, beta as f32).unwrap());
        let v64 = k64.k(xi);
        let v32 = f64::from(k32.k(xi as f32));
        prop_assert!((v64 - v32).abs() <= 1e-5 * v64);
    }
}

#[test]
fn degree_condition_examples() {
    let p = P::two_term(1.0, 1.0).unwrap();
    assert!(degree_condition(&p, 2).unwrap().satisfies_sdc);
    assert!(degree_condition(&p, 3).unwrap().satisfies_sdc);
    let steep = P::new(&[(0.0, 1.0), (5.0, 1.0)]).unwrap();
    let dc = degree_condition(&steep, 3).unwrap();
    assert!(!dc.satisfies_dc && !dc.satisfies_sdc);
    assert!(degree_condition(&steep, 2).unwrap().satisfies_sdc);
}

#[test]
fn large_argument_asymptotics() {
    // g = 1 + s has a = 1/2, so K(ξ)(1+ξ)^{1/2} stays in a fixed positive interval
    let k = ConductivityKernel::new(P::two_term(1.0, 1.0).unwrap());
    let ratios: Vec<f64> = [0.0, 1.0, 1e3, 1e6].iter().map(|&x: &f64| k.k(x) * (1.0 + x).sqrt()).collect();
    assert!(ratios.iter().all(|&r| r > 0.5 && r < 1.5), "{ratios:?}");
    assert!((ratios[3] - 1.0).abs() < 1e-3);
}
