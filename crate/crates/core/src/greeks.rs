//! Delta of a claim on `S_T = x₀ exp(rT − σΛ_T)(1 + σ)^{N_T}`, an asset driven
//! by a compensated linear Hawkes process.
//!
//! Three estimators of `∂/∂x₀ E[1_{N_T>0} f(S_T)]` are provided: the
//! Malliavin weight, which never differentiates `f`; a central finite
//! difference with common random numbers; and the pathwise derivative, valid
//! only for differentiable payoffs.

use std::io::Write;
use std::sync::Arc;

use crate::density::log_kappa;
use crate::error::{input, Error, Result};
use crate::malliavin::{divergence_m, CameronMartin};
use crate::model::{HawkesModel, ScalarFn};
use crate::parallel::{map_indexed, Parallelism};
use crate::simulate::{integrated_intensity, HawkesPath, PathBatch};
use crate::stats::{mc_estimate, mc_estimate_weighted};

/// Relative floor on `|D|` below which a path is excluded.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;
/// Largest tolerated fraction of excluded paths.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct AssetModel {
    pub x0: f64,
    pub rate: f64,
    pub sigma: f64,
    pub hawkes: HawkesModel,
}

impl AssetModel {
    pub fn new(x0: f64, rate: f64, sigma: f64, hawkes: HawkesModel) -> Result<Self> {
        if !(x0 > 0.0 && x0.is_finite()) {
            return input(format!("initial price must be positive, got {x0}"));
        }
        if !(sigma > -1.0 && sigma.is_finite()) {
            return input(format!("jump size must exceed -1, got {sigma}"));
        }
        if !rate.is_finite() {
            return input("rate must be finite");
        }
        Ok(Self {
            x0,
            rate,
            sigma,
            hawkes,
        })
    }

    fn require_linear(&self) -> Result<()> {
        if self.hawkes.nonlinearity.is_linear() {
            Ok(())
        } else {
            Err(Error::Unsupported(
                "the asset model and its Delta weight need a linear link".into(),
            ))
        }
    }
}

/// A piece `intercept + slope·x` on `[lower, upper)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPiece {
    pub lower: f64,
    pub upper: f64,
    pub intercept: f64,
    pub slope: f64,
}

#[derive(Clone)]
pub enum Payoff {
    Smooth {
        name: String,
        value: ScalarFn,
        derivative: ScalarFn,
    },
    /// `1_{[K, ∞)}`.
    Digital { strike: f64 },
    /// Sum of linear pieces on disjoint intervals; may jump at the endpoints.
    Piecewise {
        name: String,
        pieces: Vec<LinearPiece>,
    },
}

impl std::fmt::Debug for Payoff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

impl Payoff {
    pub fn constant(c: f64) -> Self {
        Payoff::Smooth {
            name: format!("constant({c})"),
            value: Arc::new(move |_| c),
            derivative: Arc::new(|_| 0.0),
        }
    }

    /// `f(x) = x`.
    pub fn identity() -> Self {
        Payoff::Smooth {
            name: "identity".into(),
            value: Arc::new(|x| x),
            derivative: Arc::new(|_| 1.0),
        }
    }

    /// `f(x) = tanh((x − K)/K)`.
    pub fn tanh(strike: f64) -> Self {
        Payoff::Smooth {
            name: format!("tanh({strike})"),
            value: Arc::new(move |x| ((x - strike) / strike).tanh()),
            derivative: Arc::new(move |x| 1.0 / (strike * ((x - strike) / strike).cosh().powi(2))),
        }
    }

    pub fn digital(strike: f64) -> Self {
        Payoff::Digital { strike }
    }

    /// `(x − K)⁺` as a single linear piece.
    pub fn call(strike: f64) -> Self {
        Payoff::Piecewise {
            name: format!("call({strike})"),
            pieces: vec![LinearPiece {
                lower: strike,
                upper: f64::INFINITY,
                intercept: -strike,
                slope: 1.0,
            }],
        }
    }

    pub fn name(&self) -> String {
        match self {
            Payoff::Smooth { name, .. } | Payoff::Piecewise { name, .. } => name.clone(),
            Payoff::Digital { strike } => format!("digital({strike})"),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Payoff::Smooth { value, .. } => value(x),
            Payoff::Digital { strike } => {
                if x >= *strike {
                    1.0
                } else {
                    0.0
                }
            }
            Payoff::Piecewise { pieces, .. } => pieces
                .iter()
                .filter(|p| p.lower <= x && x < p.upper)
                .map(|p| p.intercept + p.slope * x)
                .sum(),
        }
    }

    /// `f′(x)` when `f` is differentiable everywhere.
    pub fn derivative(&self, x: f64) -> Option<f64> {
        match self {
            Payoff::Smooth { derivative, .. } => Some(derivative(x)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalPrice {
    pub price: f64,
    /// `∂S_T/∂x₀ = S_T/x₀`.
    pub d_price_d_x0: f64,
}

pub fn terminal_price(asset: &AssetModel, path: &HawkesPath) -> Result<TerminalPrice> {
    asset.require_linear()?;
    Ok(price_unchecked(asset, path, asset.x0))
}

fn price_unchecked(asset: &AssetModel, path: &HawkesPath, x0: f64) -> TerminalPrice {
    let horizon = path.horizon();
    let compensator = integrated_intensity(&asset.hawkes, path.jump_times(), horizon);
    let n = path.count() as i32;
    let price =
        x0 * (asset.rate * horizon - asset.sigma * compensator).exp() * (1.0 + asset.sigma).powi(n);
    TerminalPrice {
        price,
        d_price_d_x0: price / x0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreekEstimate {
    pub estimator: String,
    pub payoff: String,
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub effective_sample_size: f64,
    pub excluded_paths: usize,
    /// Smallest `|D|` among paths with jumps (Malliavin estimator only).
    pub min_abs_denominator: Option<f64>,
    /// Deterministic `{N_T = 1}` boundary term included in `mean`
    /// (Malliavin estimator only).
    pub boundary_term: Option<f64>,
}

impl GreekEstimate {
    /// z-score of the difference with an independent estimate.
    pub fn z_against(&self, other: &GreekEstimate) -> f64 {
        crate::stats::z_score(
            self.mean - other.mean,
            (self.std_error.powi(2) + other.std_error.powi(2)).sqrt(),
        )
    }
}

/// Per-path Malliavin weight, or `None` when `|D|` is below the floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSample {
    pub weight: f64,
    pub denominator: f64,
}

/// The Delta weight `W` on a path with at least one jump:
///
/// ```text
/// W = −δ(m)/(σx₀D) − Σ μ′(T−T_i) m̂(T_i)² /(σx₀D²) + Σ μ(T−T_i) m(T_i) m̂(T_i) /(σx₀D²)
/// ```
///
/// with `D = Σ μ(T−T_i) m̂(T_i)`. Only the path, the model and `m` enter.
pub fn delta_weight(
    asset: &AssetModel,
    path: &HawkesPath,
    m: &CameronMartin,
) -> Result<WeightSample> {
    asset.require_linear()?;
    if path.count() == 0 {
        return input("the Delta weight is defined on paths with jumps");
    }
    let horizon = path.horizon();
    let kernel = &asset.hawkes.kernel;
    let mut denominator = 0.0;
    let mut curvature = 0.0;
    let mut cross = 0.0;
    for &t in path.jump_times() {
        let lag = horizon - t;
        let m_hat = m.antiderivative(t);
        denominator += kernel.value(lag) * m_hat;
        curvature += kernel.derivative(lag) * m_hat * m_hat;
        cross += kernel.value(lag) * m.value(t) * m_hat;
    }
    let scale = asset.sigma * asset.x0;
    let delta = divergence_m(&asset.hawkes, path, m);
    let weight = -delta / (scale * denominator) - curvature / (scale * denominator * denominator)
        + cross / (scale * denominator * denominator);
    Ok(WeightSample {
        weight,
        denominator,
    })
}

/// The part of the Delta on `{N_T = 1}` that integration by parts leaves on
/// the boundary of `[0, T]`.
///
/// With a single jump at `t`, `S_T` moves with `t` at rate `σ μ(T − t) S_T`,
/// so `1/D` behaves like `1/m̂(t)` and the flux
/// `h(t) = κ(t) / (σ x₀ μ(T − t))` does not vanish at either end. The weight
/// accounts for `−h′` inside the interval; this adds
/// `f(S_T(T)) h(T) − f(S_T(0)) h(0)`. On `{N_T ≥ 2}` the flux `m̂(T_i)/D` stays
/// bounded and no such term appears.
pub fn single_jump_boundary_term(asset: &AssetModel, payoff: &Payoff, horizon: f64) -> Result<f64> {
    asset.require_linear()?;
    let kernel = &asset.hawkes.kernel;
    let mut total = 0.0;
    for (t, sign) in [(horizon, 1.0), (0.0, -1.0)] {
        let rate = kernel.value(horizon - t);
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Refused(format!(
                "the Delta weight needs mu > 0 on [0, T]; mu({}) = {rate}",
                horizon - t
            )));
        }
        // The jump at the origin is the limit from inside the simplex.
        let inside = t.max(f64::MIN_POSITIVE);
        let path = HawkesPath::new(horizon, vec![inside])?;
        let kappa = log_kappa(&asset.hawkes, horizon, &[inside]).exp();
        let price = price_unchecked(asset, &path, asset.x0).price;
        total += sign * payoff.value(price) * kappa / (asset.sigma * asset.x0 * rate);
    }
    Ok(total)
}

/// Malliavin-weight Delta: the mean of `1_{N_T>0} f(S_T) W`, plus the
/// deterministic [`single_jump_boundary_term`].
pub fn malliavin_delta(
    asset: &AssetModel,
    payoff: &Payoff,
    batch: &PathBatch,
    m: &CameronMartin,
    parallelism: Parallelism,
) -> Result<GreekEstimate> {
    asset.require_linear()?;
    if asset.sigma == 0.0 {
        return input("the Malliavin Delta divides by the jump size; sigma must be nonzero");
    }
    let horizon = batch
        .horizon()
        .ok_or_else(|| Error::Input("empty batch".into()))?;
    let floor = DENOMINATOR_FLOOR * asset.hawkes.kernel.sup_norm() * horizon;
    let samples: Vec<Result<Option<(f64, f64, f64)>>> =
        map_indexed(0..batch.len() as u64, parallelism, |i| {
            let path = &batch.paths[i as usize];
            if path.count() == 0 {
                return Ok(Some((0.0, 0.0, f64::INFINITY)));
            }
            let w = delta_weight(asset, path, m)?;
            if w.denominator.abs() < floor {
                return Ok(None);
            }
            let price = price_unchecked(asset, path, asset.x0).price;
            Ok(Some((
                payoff.value(price) * w.weight,
                w.weight,
                w.denominator.abs(),
            )))
        });
    let mut values = Vec::with_capacity(samples.len());
    let mut weights = Vec::with_capacity(samples.len());
    let mut min_den = f64::INFINITY;
    let mut excluded = 0;
    for s in samples {
        match s? {
            Some((v, w, d)) => {
                values.push(v);
                weights.push(w.abs());
                min_den = min_den.min(d);
            }
            None => excluded += 1,
        }
    }
    if excluded as f64 > MAX_EXCLUDED_FRACTION * batch.len() as f64 {
        return Err(Error::Refused(format!(
            "{excluded} of {} paths have a vanishing weight denominator",
            batch.len()
        )));
    }
    let est = mc_estimate_weighted(&values, &weights)?;
    let boundary = single_jump_boundary_term(asset, payoff, horizon)?;
    Ok(GreekEstimate {
        estimator: "malliavin".into(),
        payoff: payoff.name(),
        mean: est.mean + boundary,
        std_error: est.std_error,
        n_paths: est.n,
        effective_sample_size: est.ess,
        excluded_paths: excluded,
        min_abs_denominator: min_den.is_finite().then_some(min_den),
        boundary_term: Some(boundary),
    })
}

/// Central difference in `x₀` on the same jump paths. `N_T` and `Λ_T` do not
/// depend on `x₀`, so only the price is re-evaluated.
pub fn fd_delta(
    asset: &AssetModel,
    payoff: &Payoff,
    batch: &PathBatch,
    bump: f64,
    parallelism: Parallelism,
) -> Result<GreekEstimate> {
    asset.require_linear()?;
    if !(bump > 0.0 && bump < asset.x0) {
        return input(format!("bump must lie in (0, x0), got {bump}"));
    }
    let values = map_indexed(0..batch.len() as u64, parallelism, |i| {
        let path = &batch.paths[i as usize];
        if path.count() == 0 {
            return 0.0;
        }
        let base = price_unchecked(asset, path, asset.x0).price;
        let up = base * (asset.x0 + bump) / asset.x0;
        let down = base * (asset.x0 - bump) / asset.x0;
        (payoff.value(up) - payoff.value(down)) / (2.0 * bump)
    });
    plain_estimate("fd", payoff, &values)
}

/// `E[1_{N_T>0} f′(S_T) S_T/x₀]`; needs a differentiable payoff.
pub fn pathwise_delta(
    asset: &AssetModel,
    payoff: &Payoff,
    batch: &PathBatch,
    parallelism: Parallelism,
) -> Result<GreekEstimate> {
    asset.require_linear()?;
    if payoff.derivative(asset.x0).is_none() {
        return Err(Error::Unsupported(format!(
            "pathwise Delta needs a differentiable payoff, got {}",
            payoff.name()
        )));
    }
    let values = map_indexed(0..batch.len() as u64, parallelism, |i| {
        let path = &batch.paths[i as usize];
        if path.count() == 0 {
            return 0.0;
        }
        let p = price_unchecked(asset, path, asset.x0);
        payoff.derivative(p.price).unwrap_or(f64::NAN) * p.d_price_d_x0
    });
    plain_estimate("pathwise", payoff, &values)
}

fn plain_estimate(estimator: &str, payoff: &Payoff, values: &[f64]) -> Result<GreekEstimate> {
    let est = mc_estimate(values)?;
    Ok(GreekEstimate {
        estimator: estimator.into(),
        payoff: payoff.name(),
        mean: est.mean,
        std_error: est.std_error,
        n_paths: est.n,
        effective_sample_size: est.ess,
        excluded_paths: 0,
        min_abs_denominator: None,
        boundary_term: None,
    })
}

/// The `{N_T = 0}` contribution `P(N_T = 0) f′(s) s/x₀` with `s` the
/// deterministic no-jump price, when `f` is differentiable there.
pub fn no_jump_delta(asset: &AssetModel, payoff: &Payoff, horizon: f64) -> Result<Option<f64>> {
    asset.require_linear()?;
    let empty = HawkesPath::empty(horizon)?;
    let p = price_unchecked(asset, &empty, asset.x0);
    let probability = (-asset.hawkes.baseline.integral(horizon)).exp();
    Ok(payoff
        .derivative(p.price)
        .map(|d| probability * d * p.d_price_d_x0))
}

/// Writes `(estimator, payoff, n_paths, mean, std_error, ESS, excluded_paths)`.
pub fn write_greeks_csv<W: Write>(rows: &[GreekEstimate], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "estimator",
        "payoff",
        "n_paths",
        "mean",
        "std_error",
        "ESS",
        "excluded_paths",
    ])?;
    for r in rows {
        out.write_record([
            r.estimator.clone(),
            r.payoff.clone(),
            r.n_paths.to_string(),
            r.mean.to_string(),
            r.std_error.to_string(),
            r.effective_sample_size.to_string(),
            r.excluded_paths.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
