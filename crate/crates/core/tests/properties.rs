//! Property-based invariants over random jump configurations.

use std::sync::Arc;

use hawkes_malliavin::malliavin::{
    basis_projection_check, carre_du_champ, divergence_m, grad_smooth, xi_gap_lower_bound, xi_gram,
    xi_kernel, xi_quadratic_form, CameronMartin, CappedJumpTime, Compensator, Composed, Functional,
    MalliavinGradient, Product,
};
use hawkes_malliavin::numeric::pairwise_sum;
use hawkes_malliavin::parallel::map_indexed;
use hawkes_malliavin::rng::RngStream;
use hawkes_malliavin::{
    simulate_batch, simulate_path, Baseline, HawkesModel, HawkesPath, Kernel, Nonlinearity,
    Parallelism,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

const HORIZON: f64 = 5.0;

/// Strictly increasing times in `(0, T)` with a minimum gap, so finite
/// differences and gap products are well conditioned.
fn jump_times(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..0.999, 1..=max_len).prop_map(|mut u| {
        u.sort_by(f64::total_cmp);
        u.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        u.into_iter().map(|x| x * HORIZON).collect()
    })
}

fn path(times: &[f64]) -> HawkesPath {
    HawkesPath::new(HORIZON, times.to_vec()).unwrap()
}

fn family(model: &HawkesModel) -> Vec<Functional> {
    let t1: Functional = Arc::new(CappedJumpTime(1));
    let t2: Functional = Arc::new(CappedJumpTime(2));
    vec![
        t1.clone(),
        t2.clone(),
        Arc::new(Composed::tanh(t1.clone())),
        Arc::new(Composed::exp_neg(t2.clone())),
        Arc::new(Product(t1, t2)),
        Arc::new(Compensator(model.clone())),
    ]
}

fn combine(a: f64, f: &MalliavinGradient, b: f64, g: &MalliavinGradient) -> MalliavinGradient {
    MalliavinGradient {
        partials: f
            .partials
            .iter()
            .zip(&g.partials)
            .map(|(p, q)| a * p + b * q)
            .collect(),
        ..f.clone()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn carre_du_champ_is_symmetric_bilinear_and_psd(
        times in jump_times(8),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let model = HawkesModel::linear_exponential(1.0, 0.5, 1.0).unwrap();
        let p = path(&times);
        let grads: Vec<MalliavinGradient> = family(&model)
            .iter()
            .filter_map(|f| grad_smooth(f.as_ref(), &p).ok())
            .collect();
        let k = grads.len();
        let gram = DMatrix::from_fn(k, k, |i, j| carre_du_champ(&grads[i], &grads[j]).unwrap());
        for i in 0..k {
            for j in 0..k {
                prop_assert!((gram[(i, j)] - gram[(j, i)]).abs() <= 1e-12 * (1.0 + gram[(i, j)].abs()));
            }
        }
        let scale = gram.amax().max(1.0);
        prop_assert!(gram.symmetric_eigenvalues().min() >= -1e-10 * scale);

        let (f, g, h) = (&grads[0], &grads[k - 1], &grads[k / 2]);
        let lhs = carre_du_champ(&combine(a, f, b, g), h).unwrap();
        let rhs = a * carre_du_champ(f, h).unwrap() + b * carre_du_champ(g, h).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn gram_matches_piecewise_integral(times in jump_times(10)) {
        let model = HawkesModel::linear_exponential(1.0, 0.5, 1.0).unwrap();
        let p = path(&times);
        for f in family(&model) {
            if let Ok(g) = grad_smooth(f.as_ref(), &p) {
                let gamma = carre_du_champ(&g, &g).unwrap();
                prop_assert!((gamma - g.l2_norm_sq_piecewise()).abs() <= 1e-12 * (1.0 + gamma));
                prop_assert!(g.integral().abs() <= 1e-12 * (1.0 + gamma.sqrt()));
            }
        }
    }

    #[test]
    fn gap_bound_holds(
        times in jump_times(12),
        coeffs in prop::collection::vec(-5.0f64..5.0, 12),
    ) {
        let c = &coeffs[..times.len()];
        let form = xi_quadratic_form(HORIZON, &times, c).unwrap();
        let bound = xi_gap_lower_bound(HORIZON, &times, c).unwrap();
        let scale = HORIZON * c.iter().map(|v| v.abs()).sum::<f64>().powi(2);
        prop_assert!(form - bound >= -1e-12 * scale, "form {form} < bound {bound}");
    }

    #[test]
    fn xi_gram_is_positive_definite_on_distinct_times(times in jump_times(10)) {
        let rows = xi_gram(HORIZON, &times).unwrap();
        let k = times.len();
        let gram = DMatrix::from_fn(k, k, |i, j| rows[i][j]);
        prop_assert!(gram.symmetric_eigenvalues().min() > 0.0);
        for (i, &ti) in times.iter().enumerate() {
            prop_assert_eq!(xi_kernel(HORIZON, times[0], ti).unwrap(), rows[0][i]);
            prop_assert_eq!(xi_kernel(HORIZON, ti, ti).unwrap(), rows[i][i]);
        }
    }

    #[test]
    fn directional_derivative_is_consistent(times in jump_times(8), k in 1u32..4) {
        let model = HawkesModel::linear_exponential(1.0, 0.5, 1.0).unwrap();
        let p = path(&times);
        for m in [
            CameronMartin::linear(HORIZON).unwrap(),
            CameronMartin::cosine(HORIZON, k).unwrap(),
            CameronMartin::sine(HORIZON, k).unwrap(),
        ] {
            for f in family(&model) {
                if let Ok(g) = grad_smooth(f.as_ref(), &p) {
                    let direct: f64 = -g
                        .partials
                        .iter()
                        .zip(&g.jump_times)
                        .map(|(q, &t)| q * m.antiderivative(t))
                        .sum::<f64>();
                    prop_assert!((g.directional(&m) - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
                    prop_assert!((g.directional_by_quadrature(&m) - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
                }
            }
        }
    }

    #[test]
    fn basis_residual_never_grows(times in jump_times(5)) {
        let p = path(&times);
        let g = grad_smooth(&CappedJumpTime(1), &p).unwrap();
        let mut last = f64::INFINITY;
        for k in [4, 8, 16, 32, 64] {
            let r = basis_projection_check(&g, k);
            prop_assert!(r <= last + 1e-12);
            last = r;
        }
    }

    #[test]
    fn poisson_divergence_is_sum_of_directions(times in jump_times(10)) {
        let model = HawkesModel::new(
            Baseline::Constant { rate: 2.0 },
            Kernel::exponential(0.0, 1.0),
            Nonlinearity::Linear,
        )
        .unwrap();
        let m = CameronMartin::linear(HORIZON).unwrap();
        let expected: f64 = times.iter().map(|&t| m.value(t)).sum();
        prop_assert!((divergence_m(&model, &path(&times), &m) - expected).abs() <= 1e-12);
    }

    #[test]
    fn pairwise_sum_is_accurate_and_deterministic(values in prop::collection::vec(-1e6f64..1e6, 0..500)) {
        let exact = neumaier_sum(&values);
        let total = pairwise_sum(&values);
        let magnitude: f64 = values.iter().map(|v| v.abs()).sum();
        prop_assert!((total - exact).abs() <= 1e-13 * magnitude.max(1.0));
        prop_assert_eq!(total.to_bits(), pairwise_sum(&values.to_vec()).to_bits());
    }

    #[test]
    fn simulated_paths_are_valid_and_reproducible(seed in any::<u64>(), index in 0u64..1_000_000) {
        let model = HawkesModel::new(
            Baseline::Constant { rate: 1.0 },
            Kernel::exponential(0.5, 1.0),
            Nonlinearity::SaturatingTanh { cap: 0.8 },
        )
        .unwrap();
        let stream = RngStream::new(seed, index);
        let p = simulate_path(&model, HORIZON, stream).unwrap();
        prop_assert!(p.jump_times().windows(2).all(|w| w[0] < w[1]));
        prop_assert!(p.jump_times().iter().all(|&t| t > 0.0 && t <= HORIZON));
        prop_assert_eq!(&p, &simulate_path(&model, HORIZON, stream).unwrap());
    }

    #[test]
    fn map_indexed_keeps_index_order(len in 0u64..2000, threads in 0usize..6) {
        let out = map_indexed(0..len, Parallelism(threads), |i| i * i);
        prop_assert!(out.iter().enumerate().all(|(i, &v)| v == (i as u64) * (i as u64)));
    }
}

/// Compensated summation, used only as a more accurate reference.
fn neumaier_sum(values: &[f64]) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for &v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + carry
}

#[test]
fn batches_do_not_depend_on_thread_count() {
    let model = HawkesModel::linear_exponential(1.0, 0.5, 1.0).unwrap();
    let one = simulate_batch(&model, HORIZON, 99, 3000, Parallelism(1)).unwrap();
    for threads in [0, 2, 7] {
        assert_eq!(
            one,
            simulate_batch(&model, HORIZON, 99, 3000, Parallelism(threads)).unwrap()
        );
    }
}
