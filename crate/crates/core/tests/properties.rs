use proptest::prelude::*;
use szegolab::functional_calculus::{function_diagonal, ScalarFunction, Smoothness};
use szegolab::harness::{fit_expansion, identity_suite, toeplitz_trace, IdentityInputs};
use szegolab::lattice_models::{EnsembleSpec, LatticeBox, Symbol1D};
use szegolab::stats::MCAccumulator;
use szegolab::szego_coefficients::{
    comb_constants, inclusion_exclusion_check, sample_g, sample_terms, CoefficientPlan, PermutationPartition,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fit_is_exact_on_polynomials(d in 1usize..=3, coeffs in prop::collection::vec(-5.0f64..5.0, 4)) {
        let ell: Vec<f64> = (0..d + 3).map(|i| 6.0 + 4.0 * i as f64).collect();
        let row: Vec<f64> = ell.iter().map(|l| (0..=d).map(|m| coeffs[m] * l.powi((d - m) as i32)).sum()).collect();
        let f = fit_expansion(d, &ell, &[row]).unwrap();
        for m in 0..=d {
            prop_assert!((f.a_hat[m].mean - coeffs[m]).abs() <= 1e-9 * (1.0 + coeffs[m].abs()), "m={} {:?}", m, f.a_hat);
        }
    }

    #[test]
    fn inclusion_exclusion_vanishes(d in 1usize..=3, n_off in 0usize..3, side in 1i64..=4, pick in 0usize..64) {
        let n = 1 + n_off % d;
        let part = PermutationPartition::new(d, n).unwrap();
        let b = &part.blocks[pick % part.blocks.len()];
        prop_assert_eq!(inclusion_exclusion_check(n, b.l, &b.k, side, d).unwrap(), 0);
        prop_assert!(part.is_exact_cover());
    }

    #[test]
    fn merged_accumulators_match_concatenation(xs in prop::collection::vec(-1e3f64..1e3, 2..40), cut in 0usize..40) {
        let cut = cut.min(xs.len());
        let mut a = MCAccumulator::from_values(&xs[..cut]);
        a.merge(&MCAccumulator::from_values(&xs[cut..]));
        let b = MCAccumulator::from_values(&xs);
        prop_assert!((a.mean - b.mean).abs() <= 1e-9 * (1.0 + b.mean.abs()));
        prop_assert!((a.stderr() - b.stderr()).abs() <= 1e-9 * (1.0 + b.stderr()));
    }

    #[test]
    fn toeplitz_identity_trace(a0 in 0.5f64..3.0, a1 in -1.0f64..1.0, l in 1usize..40) {
        let s = Symbol1D::from_real_pairs(&[(-1, a1), (0, a0), (1, a1)]);
        let t = toeplitz_trace(&s, &ScalarFunction::identity(), l).unwrap();
        prop_assert!((t - l as f64 * a0).abs() <= 1e-10 * l as f64);
    }

    #[test]
    fn weight_variants_relate_to_c(d in 1usize..=3) {
        // c̃'_{m,n} = c_{m,n} / n! and c̃'_{m,n} = 4^m c̃_{m,n}, exactly.
        let t = comb_constants(d).unwrap();
        for m in 0..=d {
            for n in 0..=m {
                let fact: i64 = (1..=n as i64).product();
                prop_assert_eq!(t.c_tilde_recurrence[m][n] * fact, t.c[m][n]);
                prop_assert_eq!(t.c_tilde_printed[m][n] * 4i64.pow(m as u32), t.c_tilde_recurrence[m][n]);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn identity_h_nullity_any_seed(seed in 0u64..1_000_000, d in 1usize..=2) {
        let g = ScalarFunction::bump(2.0, 1.5, Smoothness::Finite(4)).unwrap();
        let gop = sample_g(&EnsembleSpec::anderson(8.0, seed), 0, &g, d, 8).unwrap();
        let plans = [CoefficientPlan::new(d, 3, 8).unwrap()];
        let t = &sample_terms(&gop, &ScalarFunction::identity(), &plans, true).unwrap()[0];
        for m in 1..=d {
            prop_assert!(t.a_m[m].abs() <= 1e-10, "A_{} = {}", m, t.a_m[m]);
        }
        prop_assert_eq!(t.error_term, Some(0.0));
    }

    #[test]
    fn volume_density_matches_diagonal(seed in 0u64..1_000) {
        // A_0 is the mean diagonal of h(g(H)) over Λ, computed independently here.
        let g = ScalarFunction::bump(2.0, 1.5, Smoothness::Finite(4)).unwrap();
        let h = ScalarFunction::polynomial(vec![0.0, 0.0, 1.0]);
        let gop = sample_g(&EnsembleSpec::anderson(8.0, seed), 0, &g, 1, 20).unwrap();
        let t = &sample_terms(&gop, &h, &[CoefficientPlan::new(1, 6, 20).unwrap()], false).unwrap()[0];
        let full = function_diagonal(gop.matrix(), &h).unwrap();
        let idx = gop.lattice_box().embedding_of(&LatticeBox::cube(1, -6, 5).unwrap()).unwrap();
        let mean = idx.iter().map(|&i| full[i]).sum::<f64>() / idx.len() as f64;
        prop_assert!((t.a0 - mean).abs() < 1e-12);
    }

    #[test]
    fn telescoping_random_families(seed in 0u64..1_000_000) {
        let inputs = IdentityInputs {
            spec: EnsembleSpec::anderson(4.0, seed),
            g: ScalarFunction::bump(2.0, 1.5, Smoothness::Finite(4)).unwrap(),
            h: ScalarFunction::polynomial(vec![0.0, 0.0, 1.0]),
            seed,
            telescoping_trials: 2,
        };
        let r = identity_suite(&[1, 2], 3, &inputs).unwrap();
        prop_assert!(r.passed);
    }
}
