//! End-to-end behaviour on small Monte Carlo batches and closed-form cases.

use std::sync::Arc;

use hawkes_malliavin::experiments::solve_mean_intensity;
use hawkes_malliavin::greeks::{malliavin_delta, single_jump_boundary_term, AssetModel, Payoff};
use hawkes_malliavin::malliavin::{
    divergence_scaled, grad_smooth, weight_terms, write_weight_csv, CameronMartin, CappedJumpTime,
    Composed, Functional, SmoothFunctional,
};
use hawkes_malliavin::sde::{grad_and_gamma_XT, LinearScalar};
use hawkes_malliavin::{
    simulate_batch, Baseline, HawkesModel, HawkesPath, Kernel, Nonlinearity, Parallelism,
};

const HORIZON: f64 = 5.0;
const AUTO: Parallelism = Parallelism(0);

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn without_excitation_the_count_is_poisson_mean() {
    let rate = 1.7;
    let model = HawkesModel::new(
        Baseline::Constant { rate },
        Kernel::exponential(0.0, 1.0),
        Nonlinearity::Linear,
    )
    .unwrap();
    let batch = simulate_batch(&model, HORIZON, 404, 40_000, AUTO).unwrap();
    let counts: Vec<f64> = batch.paths.iter().map(|p| p.count() as f64).collect();
    let (mean, se) = mean_and_se(&counts);
    assert!(
        ((mean - rate * HORIZON) / se).abs() < 4.0,
        "mean count {mean} ± {se}"
    );
}

#[test]
fn volterra_bound_covers_the_actual_error() {
    // Linear model with rate 1 and kernel 0.5 e^{-t}: g(s) = 2 − e^{−s/2}.
    let model = HawkesModel::linear_exponential(1.0, 0.5, 1.0).unwrap();
    let sol = solve_mean_intensity(&model, HORIZON).unwrap();
    let cells = sol.values.len() - 1;
    let actual = (0..=cells)
        .map(|k| {
            let s = k as f64 * HORIZON / cells as f64;
            (sol.values[k] - (2.0 - (-s / 2.0).exp())).abs()
        })
        .fold(0.0, f64::max);
    assert!(sol.error_bound > 0.0);
    assert!(
        actual <= 4.0 * sol.error_bound + 1e-13,
        "actual {actual:e}, bound {:e}",
        sol.error_bound
    );
}

#[test]
fn volterra_refuses_a_nonlinear_link() {
    let model = HawkesModel::new(
        Baseline::Constant { rate: 1.0 },
        Kernel::exponential(0.5, 1.0),
        Nonlinearity::SaturatingTanh { cap: 1.0 },
    )
    .unwrap();
    assert!(solve_mean_intensity(&model, HORIZON).is_err());
}

#[test]
fn degenerate_sde_has_no_jump_sensitivity() {
    // a β = α b makes φ vanish identically, so no jump time moves X_T.
    let sde = LinearScalar {
        a: 1.0,
        b: 1.0,
        alpha: 1.0,
        beta: 1.0,
        x0: 1.0,
    };
    let model = HawkesModel::linear_exponential(1.0, 0.5, 1.0).unwrap();
    let batch = simulate_batch(&model, 2.0, 8, 200, AUTO).unwrap();
    for path in batch.paths.iter().filter(|p| p.count() > 0) {
        let report = grad_and_gamma_XT(&sde, path).unwrap();
        let scale = report.terminal.amax().max(1.0);
        for v in &report.coefficients {
            assert!(
                v.amax() <= 1e-12 * scale,
                "v = {v} on {:?}",
                path.jump_times()
            );
        }
        assert_eq!(report.gamma[(0, 0)], 0.0);
    }
}

#[test]
fn duality_holds_for_a_smooth_pair() {
    // E[A · D_mF] = E[F · δ(mA)] with F = T̄₂ and A = exp(−T̄₁).
    let model = HawkesModel::linear_exponential(1.0, 0.5, 1.0).unwrap();
    let m = CameronMartin::linear(HORIZON).unwrap();
    let f = CappedJumpTime(2);
    let a = Composed::exp_neg(Arc::new(CappedJumpTime(1)) as Functional);
    let batch = simulate_batch(&model, HORIZON, 2024, 100_000, AUTO).unwrap();
    let gaps: Vec<f64> = batch
        .paths
        .iter()
        .map(|p| {
            let times = p.jump_times();
            let a_val = a.value(times, HORIZON).unwrap();
            let f_val = f.value(times, HORIZON).unwrap();
            let lhs = a_val * grad_smooth(&f, p).unwrap().directional(&m);
            let rhs = f_val * divergence_scaled(&model, p, &m, &a).unwrap();
            lhs - rhs
        })
        .collect();
    let (mean, se) = mean_and_se(&gaps);
    assert!((mean / se).abs() < 4.0, "duality gap {mean} ± {se}");
}

#[test]
fn identity_payoff_delta_matches_the_discount_factor() {
    // e^{−σΛ_T}(1+σ)^{N_T} has unit mean, so E[S_T] = x₀ e^{rT} and Delta = e^{rT}.
    let (rate, sigma) = (0.03, 0.25);
    let hawkes = HawkesModel::linear_exponential(1.0, 0.5, 1.0).unwrap();
    let asset = AssetModel::new(100.0, rate, sigma, hawkes.clone()).unwrap();
    let m = CameronMartin::linear(HORIZON).unwrap();
    let batch = simulate_batch(&hawkes, HORIZON, 55, 200_000, AUTO).unwrap();
    let est = malliavin_delta(&asset, &Payoff::identity(), &batch, &m, AUTO).unwrap();
    let exact = (rate * HORIZON).exp();
    let z = (est.mean - exact) / est.std_error;
    assert!(
        z.abs() < 4.0,
        "delta {} ± {} vs {exact}",
        est.mean,
        est.std_error
    );
    assert!(est.boundary_term.unwrap().abs() > 0.0);
}

#[test]
fn digital_boundary_term_vanishes_below_two_jumps() {
    let hawkes = HawkesModel::linear_exponential(1.0, 0.5, 1.0).unwrap();
    let asset = AssetModel::new(100.0, 0.0, 0.2, hawkes).unwrap();
    // One jump lifts the price by at most 20% of e^{−σΛ}, never above 120.
    assert_eq!(
        single_jump_boundary_term(&asset, &Payoff::digital(130.0), HORIZON).unwrap(),
        0.0
    );
}

#[test]
fn weight_csv_lists_one_row_per_jump() {
    let model = HawkesModel::linear_exponential(1.0, 0.5, 1.0).unwrap();
    let m = CameronMartin::cosine(HORIZON, 1).unwrap();
    let a = HawkesPath::new(HORIZON, vec![0.5, 1.25, 4.0]).unwrap();
    let b = HawkesPath::new(HORIZON, vec![2.0]).unwrap();
    let (ta, tb) = (weight_terms(&model, &a, &m), weight_terms(&model, &b, &m));
    let mut bytes = Vec::new();
    write_weight_csv([(0, &ta), (7, &tb)], &mut bytes).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "path_index,j,T_j,psi,gamma1,gamma2,m,m_hat");
    assert_eq!(lines.len(), 1 + 3 + 1);
    assert!(lines[4].starts_with("7,1,2,"));
}
