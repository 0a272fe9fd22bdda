use cavitation::energy::{FamilyRegistry, ModelSpec, RadialState, StoredEnergy};
use proptest::prelude::*;

fn energies() -> Vec<StoredEnergy> {
    let reg = FamilyRegistry::builtin();
    let power_g = ModelSpec::new("power_sum", &[0.5, 0.3])
        .with_exponents(&[2.0, 1.5])
        .with_shifts(&[0.0, 1.0]);
    let power_h = ModelSpec::new("power_sum", &[0.5, 1.0]).with_exponents(&[2.0, -1.0]);
    let inv_g = ModelSpec::new("inverse_power_sum", &[1.0])
        .with_exponents(&[1.0])
        .with_shifts(&[1.0])
        .with_linear(1.0);
    vec![
        StoredEnergy::reference(3),
        StoredEnergy::reference(5),
        StoredEnergy::from_specs(&reg, &power_g, &power_h, 3).unwrap(),
        StoredEnergy::from_specs(&reg, &inv_g, &power_h, 2).unwrap(),
    ]
}

/// Independent assembly of `Φ(v₁, …, v_d) = Σ g(vᵢ) + h(Π vᵢ)`.
fn phi_full(e: &StoredEnergy, v: &[f64]) -> f64 {
    let prod: f64 = v.iter().product();
    v.iter().map(|x| e.g().eval(*x)[0]).sum::<f64>() + e.h().eval(prod)[0]
}

fn diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

fn close(fd: f64, an: f64, tol: f64) -> bool {
    (fd - an).abs() <= tol * an.abs().max(1.0)
}

proptest! {
    #[test]
    fn first_derivatives_match_full_energy(k in 0usize..4, la in -1.0f64..1.0, lb in -1.0f64..1.0) {
        let e = &energies()[k];
        let (a, b) = (la.exp(), lb.exp());
        let d = e.dim();
        let an = e.eval_derivatives(RadialState::new(a, b)).unwrap();
        let at = |i: usize, x: f64| {
            let mut v = vec![b; d];
            v[0] = a;
            v[i] = x;
            phi_full(e, &v)
        };
        prop_assert!(close(diff(|x| at(0, x), a, 1e-3 * a), an.phi1, 1e-7));
        prop_assert!(close(diff(|x| at(1, x), b, 1e-3 * b), an.phi2, 1e-7));
        prop_assert!(close(phi_full(e, &[&[a][..], &vec![b; d - 1]].concat()), e.phi(RadialState::new(a, b)).unwrap(), 1e-13));
    }

    #[test]
    fn mixed_derivatives_match_differences(k in 0usize..4, la in -1.0f64..1.0, lb in -1.0f64..1.0) {
        let e = &energies()[k];
        let (a, b) = (la.exp(), lb.exp());
        let d = e.dim();
        let an = e.eval_derivatives(RadialState::new(a, b)).unwrap();
        // Φ₁ as a function of the second stretch alone.
        let phi1_of_v2 = |x: f64| {
            let mut v = vec![b; d];
            v[0] = a;
            v[1] = x;
            let h = 1e-4 * a;
            diff(|y| { let mut w = v.clone(); w[0] = y; phi_full(e, &w) }, a, h)
        };
        prop_assert!(close(diff(phi1_of_v2, b, 1e-3 * b), an.phi12, 1e-5));
        let at = |x: f64| e.eval_derivatives(RadialState::new(x, b)).unwrap();
        prop_assert!(close(diff(|x| at(x).phi11, a, 1e-3 * a), an.phi111, 1e-6));
        prop_assert!(close(diff(|x| at(x).phi12, a, 1e-3 * a), an.phi112, 1e-6));
    }

    #[test]
    fn p_is_continuous_at_the_diagonal(k in 0usize..4, lb in -1.0f64..1.0, eps in 1e-7f64..1e-4) {
        let e = &energies()[k];
        let b = lb.exp();
        let diag = e.eval_p(RadialState::diagonal(b)).unwrap();
        let near = e.eval_p(RadialState::new(b * (1.0 - eps), b)).unwrap();
        // P is smooth across the diagonal, so the quotient branch differs by O(ε).
        prop_assert!((near - diag).abs() <= 50.0 * eps * diag.abs().max(1.0), "{near} vs {diag}");
        let phi11 = e.phi11(RadialState::diagonal(b)).unwrap();
        prop_assert!((diag - phi11).abs() <= 1e-12 * phi11);
    }

    #[test]
    fn q_is_speed_squared_minus_phi11(la in -1.0f64..0.0, lb in 0.0f64..1.0, s in 0.0f64..3.0) {
        let e = StoredEnergy::reference(3);
        let st = RadialState::new(la.exp(), lb.exp());
        let q = e.eval_q(st, s).unwrap();
        let (a, b) = (st.a, st.b);
        let v = a * b * b;
        let phi11 = 1.0 + b.powi(4) * (1.0 / v + 1.0 / (v * v));
        prop_assert!((q - (s * s - phi11)).abs() <= 1e-12 * phi11);
    }

    #[test]
    fn h_prime_inverse_round_trips(y in -20.0f64..20.0) {
        let e = StoredEnergy::reference(3);
        let x = e.h_prime_inverse(y).unwrap();
        prop_assert!((e.h().first(x) - y).abs() <= 1e-10 * y.abs().max(1.0));
    }

    #[test]
    fn chi_is_increasing(lx in -3.0f64..3.0, step in 1e-3f64..1.0) {
        let e = StoredEnergy::reference(3);
        let x = lx.exp();
        prop_assert!(e.chi(x * (1.0 + step)) > e.chi(x));
    }
}

#[test]
fn softening_and_positive_p_along_reference_states() {
    // Signs the solver depends on below the diagonal.
    let e = StoredEnergy::reference(3);
    for b in [0.5, 1.0, 2.0, 7.0] {
        for frac in [0.01, 0.3, 0.9, 0.999] {
            let st = RadialState::new(frac * b, b);
            let der = e.eval_derivatives(st).unwrap();
            assert!(der.phi11 > 0.0);
            assert!(der.phi111 < 0.0);
            assert!(e.eval_p(st).unwrap() > 0.0);
        }
    }
}
