use gibbs_spectral::bounds::{dsg_norm_bound_from_c, dsg_norm_bound_from_l, random_weights};
use gibbs_spectral::geometry::{
    friedrichs_angle_bruteforce, friedrichs_angle_from_norm, inclination_lower_bound, inclination_seeded,
};
use gibbs_spectral::measure::{
    conditional_mean, inner_product, mean_project, norm, random_target, PiFunction, TargetDistribution,
};
use gibbs_spectral::operators::{
    adjoint, dsg, rsg, stationary_projection, symmetrized_sweep, MarkovOperator, Permutation, Weights,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn target() -> impl Strategy<Value = TargetDistribution> {
    (any::<u64>(), prop::collection::vec(2usize..=3, 2..=4), 0.3f64..3.0)
        .prop_map(|(seed, dims, conc)| random_target(seed, &dims, conc).unwrap())
}

fn target_and_function() -> impl Strategy<Value = (TargetDistribution, Vec<f64>, Vec<f64>)> {
    target().prop_flat_map(|pi| {
        let n = pi.pmf().len();
        let vals = prop::collection::vec(-5.0f64..5.0, n);
        (Just(pi), vals.clone(), vals)
    })
}

fn func(pi: &TargetDistribution, v: Vec<f64>) -> PiFunction {
    PiFunction::new(pi.space(), v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mean_projection_contracts((pi, f, _) in target_and_function()) {
        let f = func(&pi, f);
        let pf = mean_project(&f, &pi).unwrap();
        prop_assert!(norm(&pf, &pi).unwrap() <= norm(&f, &pi).unwrap() + 1e-12);
    }

    #[test]
    fn conditional_mean_is_an_orthogonal_projection((pi, f, g) in target_and_function(), coord in 0usize..4) {
        let coord = coord % pi.num_coords();
        let f = func(&pi, f);
        let g = func(&pi, g);
        let pf = conditional_mean(&f, coord, &pi).unwrap();
        let ppf = conditional_mean(&pf, coord, &pi).unwrap();
        for (a, b) in pf.values().iter().zip(ppf.values()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let pg = conditional_mean(&g, coord, &pi).unwrap();
        let lhs = inner_product(&pf, &g, &pi).unwrap();
        let rhs = inner_product(&f, &pg, &pi).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn residual_is_orthogonal_to_functions_constant_in_coordinate(
        (pi, f, g) in target_and_function(),
        coord in 0usize..4,
    ) {
        let coord = coord % pi.num_coords();
        let space = pi.space().clone();
        // h(x) = g(x with coordinate `coord` set to 0) lies in M_coord
        let h = PiFunction::from_fn(&space, |m| {
            let mut m = m.to_vec();
            m[coord] = 0;
            g[space.flat_index(&m).unwrap()]
        });
        let f = func(&pi, f);
        let pf = conditional_mean(&f, coord, &pi).unwrap();
        let resid: Vec<f64> = f.values().iter().zip(pf.values()).map(|(a, b)| a - b).collect();
        let ip = inner_product(&func(&pi, resid), &h, &pi).unwrap();
        prop_assert!(ip.abs() <= 1e-12);
    }

    #[test]
    fn constructed_operators_are_valid_contractions(pi in target(), mix in 0.0f64..1.0, seed in any::<u64>()) {
        let d = pi.num_coords();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = dsg(&Permutation::identity(d), &pi).unwrap();
        let b = rsg(&random_weights(&mut rng, d), &pi).unwrap();
        let c = symmetrized_sweep(&Permutation::identity(d).reversed(), &pi).unwrap();
        let combo = MarkovOperator::new(
            a.kernel() * mix + b.kernel() * (1.0 - mix),
            pi.pmf().to_vec(),
            pi.space().dims().to_vec(),
            "mix",
        ).unwrap();
        for op in [&a, &b, &c, &combo] {
            prop_assert!(op.max_row_sum_error() <= 1e-10);
            prop_assert!(op.max_stationarity_error() <= 1e-10);
            prop_assert!(op.l2_norm_centered().unwrap() <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn stationary_projection_absorbs(pi in target()) {
        let d = pi.num_coords();
        let proj = stationary_projection(&pi).unwrap();
        for op in [dsg(&Permutation::identity(d), &pi).unwrap(), rsg(&Weights::uniform(d), &pi).unwrap()] {
            let left = op.then(&proj).unwrap();
            let right = proj.then(&op).unwrap();
            prop_assert!((left.kernel() - proj.kernel()).amax() <= 1e-12);
            prop_assert!((right.kernel() - proj.kernel()).amax() <= 1e-12);
        }
    }

    #[test]
    fn gap_existence_is_permutation_and_weight_invariant(pi in target(), seed in any::<u64>()) {
        let d = pi.num_coords();
        let norms: Vec<f64> = Permutation::all(d)
            .iter()
            .map(|s| dsg(s, &pi).unwrap().l2_norm_centered().unwrap())
            .collect();
        let below = norms.iter().filter(|&&v| v < 1.0).count();
        prop_assert!(below == 0 || below == norms.len());
        prop_assert_eq!(below, norms.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if rsg(&Weights::uniform(d), &pi).unwrap().l2_norm_centered().unwrap() < 1.0 {
            for _ in 0..50 {
                let w = random_weights(&mut rng, d);
                prop_assert!(rsg(&w, &pi).unwrap().l2_norm_centered().unwrap() < 1.0);
            }
        }
    }

    #[test]
    fn radius_is_at_most_norm(pi in target(), seed in any::<u64>()) {
        let d = pi.num_coords();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ops = [
            dsg(&Permutation::identity(d), &pi).unwrap(),
            rsg(&random_weights(&mut rng, d), &pi).unwrap(),
            symmetrized_sweep(&Permutation::identity(d), &pi).unwrap(),
        ];
        for op in &ops {
            let rho = op.spectral_radius_centered().unwrap();
            let nrm = op.l2_norm_centered().unwrap();
            prop_assert!(rho <= nrm + 1e-9);
            if op.is_reversible() {
                prop_assert!((rho - nrm).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn dsg_adjoint_is_reversed_sweep(pi in target()) {
        let d = pi.num_coords();
        let sigma = Permutation::identity(d);
        let star = adjoint(&dsg(&sigma, &pi).unwrap()).unwrap();
        let rev = dsg(&sigma.reversed(), &pi).unwrap();
        prop_assert!((star.kernel() - rev.kernel()).amax() <= 1e-10);
    }

    #[test]
    fn angle_oracles_agree_and_stay_in_range(pi in target()) {
        let closed = friedrichs_angle_from_norm(&pi).unwrap().value;
        let brute = friedrichs_angle_bruteforce(&pi).unwrap().value;
        prop_assert!((closed - brute).abs() <= 1e-8);
        prop_assert!(brute <= 1.0 + 1e-9);
        let d = pi.num_coords();
        let avg = rsg(&Weights::uniform(d), &pi).unwrap().l2_norm_centered().unwrap();
        prop_assert_eq!((brute - 1.0).abs() <= 1e-9, (avg - 1.0).abs() <= 1e-9);
        prop_assert!(avg >= 1.0 / d as f64 - 1e-9);
    }

    // M_i ∩ M_j ∩ M⊥ is nontrivial once d ≥ 3, which gives c = (d − 2)/(d − 1);
    // the angle vanishes only for two coordinates.
    #[test]
    fn independent_products_have_shape_only_angle(
        marginals in prop::collection::vec(prop::collection::vec(0.05f64..1.0, 2..=3), 2..=4),
    ) {
        let marginals: Vec<Vec<f64>> = marginals
            .into_iter()
            .map(|m| { let s: f64 = m.iter().sum(); m.iter().map(|v| v / s).collect() })
            .collect();
        let d = marginals.len() as f64;
        let expected = (d - 2.0) / (d - 1.0);
        let pi = TargetDistribution::independent(&marginals).unwrap();
        prop_assert!((friedrichs_angle_from_norm(&pi).unwrap().value - expected).abs() <= 1e-9);
        prop_assert!((friedrichs_angle_bruteforce(&pi).unwrap().value - expected).abs() <= 1e-9);
    }

    #[test]
    fn two_dsg_bounds_coincide(c in 0.0f64..=1.0, d in 2usize..12) {
        let via_c = dsg_norm_bound_from_c(c, d).unwrap();
        let via_l = dsg_norm_bound_from_l(inclination_lower_bound(c, d), d).unwrap();
        prop_assert!((via_c - via_l).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn inclination_witness_reproduces_value(pi in target(), seed in any::<u64>()) {
        let tol = 1e-8;
        let res = inclination_seeded(&pi, 8, tol, seed).unwrap();
        let w = func(&pi, res.witness.clone());
        let recomputed = (0..pi.num_coords())
            .map(|i| {
                let p = conditional_mean(&w, i, &pi).unwrap();
                let r: Vec<f64> = w.values().iter().zip(p.values()).map(|(a, b)| a - b).collect();
                norm(&func(&pi, r), &pi).unwrap()
            })
            .fold(0.0, f64::max);
        prop_assert!((recomputed - res.value).abs() <= tol);
        let unit = norm(&func(&pi, mean_free(&pi, res.witness)), &pi).unwrap();
        prop_assert!((unit - 1.0).abs() <= 1e-8);
    }
}

fn mean_free(pi: &TargetDistribution, v: Vec<f64>) -> Vec<f64> {
    let m = pi.expectation(&v);
    v.into_iter().map(|x| x - m).collect()
}

#[test]
fn angle_tracks_correlation() {
    for k in 1..=10 {
        let eps = 0.05 * k as f64;
        let pi = TargetDistribution::equicorrelated_binary(2, eps).unwrap();
        let c = friedrichs_angle_from_norm(&pi).unwrap().value;
        assert!((c - (1.0 - 2.0 * eps).abs()).abs() <= 1e-8, "ε = {eps}: c = {c}");
    }
}
