//! Smooth functionals `F = f_n(T_1, …, T_n)` on `{N_T = n}` and their gradients.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{input, Result};
use crate::model::{HawkesModel, ScalarFn};
use crate::numeric::GaussLegendre;
use crate::simulate::{integrated_intensity, HawkesPath};

use super::direction::CameronMartin;
use super::weights::link_terms;

/// A functional of the jump times. `value` returns `None` when the functional
/// is not defined for the given number of jumps.
pub trait SmoothFunctional: Send + Sync {
    fn value(&self, times: &[f64], horizon: f64) -> Option<f64>;

    /// Exact partials `∂f_n/∂t_i`; `None` requests the finite-difference fallback.
    fn partials(&self, _times: &[f64], _horizon: f64) -> Option<Vec<f64>> {
        None
    }

    fn label(&self) -> String;
}

pub type Functional = Arc<dyn SmoothFunctional>;

/// The constant functional.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl SmoothFunctional for Constant {
    fn value(&self, _: &[f64], _: f64) -> Option<f64> {
        Some(self.0)
    }
    fn partials(&self, times: &[f64], _: f64) -> Option<Vec<f64>> {
        Some(vec![0.0; times.len()])
    }
    fn label(&self) -> String {
        format!("const({})", self.0)
    }
}

/// `T̄_j = T_j ∧ T`, 1-based.
#[derive(Debug, Clone, Copy)]
pub struct CappedJumpTime(pub usize);

impl SmoothFunctional for CappedJumpTime {
    fn value(&self, times: &[f64], horizon: f64) -> Option<f64> {
        Some(
            times
                .get(self.0.checked_sub(1)?)
                .copied()
                .unwrap_or(horizon),
        )
    }
    fn partials(&self, times: &[f64], _: f64) -> Option<Vec<f64>> {
        let mut p = vec![0.0; times.len()];
        if let Some(slot) = p.get_mut(self.0.checked_sub(1)?) {
            *slot = 1.0;
        }
        Some(p)
    }
    fn label(&self) -> String {
        format!("Tbar_{}", self.0)
    }
}

/// `N_T`.
#[derive(Debug, Clone, Copy)]
pub struct JumpCount;

impl SmoothFunctional for JumpCount {
    fn value(&self, times: &[f64], _: f64) -> Option<f64> {
        Some(times.len() as f64)
    }
    fn partials(&self, times: &[f64], _: f64) -> Option<Vec<f64>> {
        Some(vec![0.0; times.len()])
    }
    fn label(&self) -> String {
        "N_T".into()
    }
}

/// `Λ_T = ∫₀ᵀ λ*`, whose partials are `−(Γ₁ + Γ₂)` at each jump.
#[derive(Debug, Clone)]
pub struct Compensator(pub HawkesModel);

impl SmoothFunctional for Compensator {
    fn value(&self, times: &[f64], horizon: f64) -> Option<f64> {
        Some(integrated_intensity(&self.0, times, horizon))
    }
    fn partials(&self, times: &[f64], horizon: f64) -> Option<Vec<f64>> {
        let (g1, g2) = link_terms(&self.0, times, horizon);
        Some(g1.iter().zip(&g2).map(|(a, b)| -(a + b)).collect())
    }
    fn label(&self) -> String {
        "Lambda_T".into()
    }
}

/// `Φ ∘ F` for a C¹ scalar map `Φ`.
#[derive(Clone)]
pub struct Composed {
    pub outer: ScalarFn,
    pub outer_derivative: ScalarFn,
    pub inner: Functional,
    pub name: String,
}

impl Composed {
    pub fn tanh(inner: Functional) -> Self {
        Self {
            outer: Arc::new(f64::tanh),
            outer_derivative: Arc::new(|x: f64| 1.0 / x.cosh().powi(2)),
            name: format!("tanh({})", inner.label()),
            inner,
        }
    }

    /// `e^{−F}`.
    pub fn exp_neg(inner: Functional) -> Self {
        Self {
            outer: Arc::new(|x: f64| (-x).exp()),
            outer_derivative: Arc::new(|x: f64| -(-x).exp()),
            name: format!("exp(-{})", inner.label()),
            inner,
        }
    }
}

impl fmt::Debug for Composed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl SmoothFunctional for Composed {
    fn value(&self, times: &[f64], horizon: f64) -> Option<f64> {
        Some((self.outer)(self.inner.value(times, horizon)?))
    }
    fn partials(&self, times: &[f64], horizon: f64) -> Option<Vec<f64>> {
        let scale = (self.outer_derivative)(self.inner.value(times, horizon)?);
        Some(
            self.inner
                .partials(times, horizon)?
                .into_iter()
                .map(|p| scale * p)
                .collect(),
        )
    }
    fn label(&self) -> String {
        self.name.clone()
    }
}

/// `F · G`.
#[derive(Clone)]
pub struct Product(pub Functional, pub Functional);

impl SmoothFunctional for Product {
    fn value(&self, times: &[f64], horizon: f64) -> Option<f64> {
        Some(self.0.value(times, horizon)? * self.1.value(times, horizon)?)
    }
    fn partials(&self, times: &[f64], horizon: f64) -> Option<Vec<f64>> {
        let f = self.0.value(times, horizon)?;
        let g = self.1.value(times, horizon)?;
        let pf = self.0.partials(times, horizon)?;
        let pg = self.1.partials(times, horizon)?;
        Some(pf.iter().zip(&pg).map(|(a, b)| a * g + f * b).collect())
    }
    fn label(&self) -> String {
        format!("{}*{}", self.0.label(), self.1.label())
    }
}

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type PartialsFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A functional given separately for each jump count, with optional exact
/// partials; counts without an entry are undefined.
#[derive(Clone, Default)]
pub struct PerCount {
    name: String,
    pieces: BTreeMap<usize, (ValueFn, Option<PartialsFn>)>,
}

impl PerCount {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pieces: BTreeMap::new(),
        }
    }

    pub fn with(
        mut self,
        n: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        partials: Option<PartialsFn>,
    ) -> Self {
        self.pieces.insert(n, (Arc::new(value), partials));
        self
    }
}

impl SmoothFunctional for PerCount {
    fn value(&self, times: &[f64], _: f64) -> Option<f64> {
        self.pieces.get(&times.len()).map(|(f, _)| f(times))
    }
    fn partials(&self, times: &[f64], _: f64) -> Option<Vec<f64>> {
        self.pieces.get(&times.len())?.1.as_ref().map(|p| p(times))
    }
    fn label(&self) -> String {
        self.name.clone()
    }
}

/// `D_sF = Σ_i p_i (T_i/T − 1_{[0,T_i]}(s))`, stored through its partials.
#[derive(Debug, Clone, PartialEq)]
pub struct MalliavinGradient {
    pub horizon: f64,
    pub jump_times: Vec<f64>,
    pub partials: Vec<f64>,
    /// Set when the partials came from the finite-difference fallback.
    pub finite_difference: bool,
}

impl MalliavinGradient {
    /// `D_sF`. Left-closed indicator: `1_{[0,T_i]}(s)`.
    pub fn eval(&self, s: f64) -> f64 {
        self.jump_times
            .iter()
            .zip(&self.partials)
            .map(|(&t, &p)| p * (t / self.horizon - if s <= t { 1.0 } else { 0.0 }))
            .sum()
    }

    /// Breakpoints `0 = b_0 < … < b_k = T` between which `D_sF` is constant.
    pub fn pieces(&self) -> Vec<(f64, f64)> {
        let mut edges = vec![0.0];
        edges.extend(
            self.jump_times
                .iter()
                .copied()
                .filter(|&t| t < self.horizon),
        );
        edges.push(self.horizon);
        edges.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// `⟨DF, m⟩ = D_mF = −Σ_i p_i m̂(T_i)`.
    pub fn directional(&self, m: &CameronMartin) -> f64 {
        -self
            .jump_times
            .iter()
            .zip(&self.partials)
            .map(|(&t, &p)| p * m.antiderivative(t))
            .sum::<f64>()
    }

    /// `∫₀ᵀ D_sF m(s) ds` by Gauss–Legendre on each constant piece; an
    /// oracle for [`MalliavinGradient::directional`].
    pub fn directional_by_quadrature(&self, m: &CameronMartin) -> f64 {
        let rule = GaussLegendre::order64();
        self.pieces()
            .into_iter()
            .map(|(a, b)| self.eval(0.5 * (a + b)) * rule.integrate(a, b, |s| m.value(s)))
            .sum()
    }

    /// `∫₀ᵀ (D_sF)² ds`, exact on the constant pieces.
    pub fn l2_norm_sq_piecewise(&self) -> f64 {
        self.pieces()
            .into_iter()
            .map(|(a, b)| self.eval(0.5 * (a + b)).powi(2) * (b - a))
            .sum()
    }

    /// `∫₀ᵀ D_sF ds`, zero up to rounding.
    pub fn integral(&self) -> f64 {
        self.pieces()
            .into_iter()
            .map(|(a, b)| self.eval(0.5 * (a + b)) * (b - a))
            .sum()
    }
}

/// `ξ(t_i, t_j) = t_i ∧ t_j − t_i t_j / T`, the Brownian-bridge covariance.
pub fn xi_kernel(horizon: f64, ti: f64, tj: f64) -> Result<f64> {
    if !(horizon > 0.0) {
        return input(format!("horizon must be positive, got {horizon}"));
    }
    if !(0.0..=horizon).contains(&ti) || !(0.0..=horizon).contains(&tj) {
        return input(format!(
            "kernel arguments ({ti}, {tj}) outside [0, {horizon}]"
        ));
    }
    Ok(xi_unchecked(horizon, ti, tj))
}

#[inline]
pub(crate) fn xi_unchecked(horizon: f64, ti: f64, tj: f64) -> f64 {
    ti.min(tj) - ti * tj / horizon
}

/// The Gram matrix `[ξ(t_i, t_j)]` as row-major rows.
pub fn xi_gram(horizon: f64, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    times
        .iter()
        .map(|&a| times.iter().map(|&b| xi_kernel(horizon, a, b)).collect())
        .collect()
}

/// `Σ_{i,j} c_i c_j ξ(t_i, t_j)` for increasing times in `(0, T)`.
pub fn xi_quadratic_form(horizon: f64, times: &[f64], c: &[f64]) -> Result<f64> {
    check_form_inputs(horizon, times, c)?;
    let mut total = 0.0;
    for (i, (&ti, &ci)) in times.iter().zip(c).enumerate() {
        total += ci * ci * xi_unchecked(horizon, ti, ti);
        for (&tj, &cj) in times[i + 1..].iter().zip(&c[i + 1..]) {
            total += 2.0 * ci * cj * xi_unchecked(horizon, ti, tj);
        }
    }
    Ok(total)
}

/// Lower bound on [`xi_quadratic_form`] from neighbouring gaps:
/// `(1/T) Σ_k (t_k − t_{k−1})(t_{k+1} − t_k) c_k²` with `t_0 = 0`, `t_{n+1} = T`.
///
/// The difference between the two is a sum of squares of partial sums of
/// `c`, which is why the quadratic form is coercive away from collisions.
pub fn xi_gap_lower_bound(horizon: f64, times: &[f64], c: &[f64]) -> Result<f64> {
    check_form_inputs(horizon, times, c)?;
    let n = times.len();
    let at = |k: usize| match k {
        0 => 0.0,
        k if k > n => horizon,
        k => times[k - 1],
    };
    Ok((1..=n)
        .map(|k| (at(k) - at(k - 1)) * (at(k + 1) - at(k)) * c[k - 1] * c[k - 1])
        .sum::<f64>()
        / horizon)
}

fn check_form_inputs(horizon: f64, times: &[f64], c: &[f64]) -> Result<()> {
    if !(horizon > 0.0) {
        return input(format!("horizon must be positive, got {horizon}"));
    }
    if times.len() != c.len() {
        return input(format!(
            "{} times but {} coefficients",
            times.len(),
            c.len()
        ));
    }
    let mut previous = 0.0;
    for &t in times {
        if !(t > previous && t < horizon) {
            return input(format!(
                "times must increase strictly inside (0, {horizon})"
            ));
        }
        previous = t;
    }
    Ok(())
}

/// Relative step of the central-difference fallback.
pub const FD_STEP: f64 = 1e-6;

/// Gradient of `F` along `path`, from exact partials when `F` supplies them and
/// from central differences otherwise.
pub fn grad_smooth(f: &dyn SmoothFunctional, path: &HawkesPath) -> Result<MalliavinGradient> {
    let times = path.jump_times();
    let horizon = path.horizon();
    if f.value(times, horizon).is_none() {
        return input(format!(
            "functional {} is not defined for N_T = {}",
            f.label(),
            times.len()
        ));
    }
    let (partials, finite_difference) = match f.partials(times, horizon) {
        Some(p) => (p, false),
        None => (fd_partials(f, times, horizon), true),
    };
    if partials.len() != times.len() {
        return input(format!(
            "functional {} returned {} partials for {} jumps",
            f.label(),
            partials.len(),
            times.len()
        ));
    }
    Ok(MalliavinGradient {
        horizon,
        jump_times: times.to_vec(),
        partials,
        finite_difference,
    })
}

/// Central differences with step `1e-6·max(1, |t_i|)`, shrunk so the
/// perturbed times stay ordered inside `(0, T]`.
pub(crate) fn fd_partials(f: &dyn SmoothFunctional, times: &[f64], horizon: f64) -> Vec<f64> {
    let mut work = times.to_vec();
    (0..times.len())
        .map(|i| {
            let t = times[i];
            let lower = if i == 0 { 0.0 } else { times[i - 1] };
            let upper = times.get(i + 1).copied().unwrap_or(horizon);
            let mut h = FD_STEP * t.abs().max(1.0);
            h = h.min(0.5 * (t - lower)).min(0.5 * (upper - t).max(0.0));
            if h <= 0.0 {
                // A jump at T: one-sided difference from below.
                h = (FD_STEP * t.abs().max(1.0)).min(0.5 * (t - lower));
                work[i] = t - h;
                let down = f.value(&work, horizon).unwrap_or(f64::NAN);
                work[i] = t;
                let here = f.value(&work, horizon).unwrap_or(f64::NAN);
                return (here - down) / h;
            }
            work[i] = t + h;
            let up = f.value(&work, horizon).unwrap_or(f64::NAN);
            work[i] = t - h;
            let down = f.value(&work, horizon).unwrap_or(f64::NAN);
            work[i] = t;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `Γ[F, G] = Σ_{i,j} ∂_i f ∂_j g ξ(T_i, T_j)`.
pub fn carre_du_champ(gf: &MalliavinGradient, gg: &MalliavinGradient) -> Result<f64> {
    if gf.horizon != gg.horizon || gf.jump_times != gg.jump_times {
        return input("carre du champ needs two gradients on the same path");
    }
    let h = gf.horizon;
    let t = &gf.jump_times;
    let mut total = 0.0;
    for i in 0..t.len() {
        if gf.partials[i] == 0.0 {
            continue;
        }
        let row: f64 = (0..t.len())
            .map(|j| gg.partials[j] * xi_unchecked(h, t[i], t[j]))
            .sum();
        total += gf.partials[i] * row;
    }
    Ok(total)
}

/// `D_mF = ⟨DF, m⟩`.
pub fn directional_derivative(
    f: &dyn SmoothFunctional,
    path: &HawkesPath,
    m: &CameronMartin,
) -> Result<f64> {
    Ok(grad_smooth(f, path)?.directional(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn path(times: &[f64]) -> HawkesPath {
        HawkesPath::new(5.0, times.to_vec()).unwrap()
    }

    #[test]
    fn gap_bound_is_tight_for_one_jump() {
        let form = xi_quadratic_form(4.0, &[1.0], &[3.0]).unwrap();
        let bound = xi_gap_lower_bound(4.0, &[1.0], &[3.0]).unwrap();
        assert_relative_eq!(form, 9.0 * 0.75, epsilon = 1e-15);
        assert_relative_eq!(bound, form, epsilon = 1e-15);
    }

    #[test]
    fn gap_bound_slack_is_a_partial_sum_square() {
        // n = 2: slack = t_1 (T − t_2) (c_1 + c_2)² / T.
        let (t, c) = ([1.0, 3.0], [2.0, -0.5]);
        let form = xi_quadratic_form(4.0, &t, &c).unwrap();
        let bound = xi_gap_lower_bound(4.0, &t, &c).unwrap();
        assert_relative_eq!(
            form - bound,
            1.0 * 1.0 * 1.5f64.powi(2) / 4.0,
            epsilon = 1e-14
        );
        assert!(xi_gap_lower_bound(4.0, &[3.0, 1.0], &c).is_err());
    }

    #[test]
    fn xi_examples() {
        assert_eq!(xi_kernel(1.0, 0.5, 0.5).unwrap(), 0.25);
        assert_eq!(xi_kernel(1.0, 0.25, 0.5).unwrap(), 0.125);
        assert_eq!(xi_kernel(1.0, 0.5, 0.25).unwrap(), 0.125);
        assert!(xi_kernel(1.0, 1.5, 0.25).is_err());
        assert!(xi_kernel(1.0, -0.1, 0.25).is_err());
        let g = xi_gram(1.0, &[0.25, 0.5]).unwrap();
        assert_eq!(g, vec![vec![0.1875, 0.125], vec![0.125, 0.25]]);
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        assert!((det - 0.03125).abs() < 1e-16);
    }

    #[test]
    fn first_jump_time_gradient() {
        let p = path(&[1.5, 2.0, 4.0]);
        let g = grad_smooth(&CappedJumpTime(1), &p).unwrap();
        assert_eq!(g.partials, vec![1.0, 0.0, 0.0]);
        assert!(!g.finite_difference);
        assert_relative_eq!(g.eval(1.0), 1.5 / 5.0 - 1.0);
        assert_relative_eq!(g.eval(3.0), 1.5 / 5.0);
        let gamma = carre_du_champ(&g, &g).unwrap();
        assert_relative_eq!(gamma, 1.5 * (1.0 - 1.5 / 5.0), max_relative = 1e-15);
        assert!((gamma - g.l2_norm_sq_piecewise()).abs() < 1e-12);
        assert!(g.integral().abs() < 1e-14);
    }

    #[test]
    fn capped_time_beyond_count_is_constant() {
        let p = path(&[1.5]);
        let g = grad_smooth(&CappedJumpTime(2), &p).unwrap();
        assert_eq!(g.partials, vec![0.0]);
        assert_eq!(CappedJumpTime(2).value(p.jump_times(), 5.0), Some(5.0));
    }

    #[test]
    fn jump_count_has_zero_gradient() {
        let p = path(&[0.5, 2.5]);
        let g = grad_smooth(&JumpCount, &p).unwrap();
        assert!(g.partials.iter().all(|&x| x == 0.0));
        assert_eq!(carre_du_champ(&g, &g).unwrap(), 0.0);
    }

    #[test]
    fn linear_compensator_partials_match_kernel_and_fd() {
        let model = HawkesModel::linear_exponential(1.0, 0.5, 1.0).unwrap();
        let f = Compensator(model);
        let p = path(&[0.7, 1.3, 3.1]);
        let exact = grad_smooth(&f, &p).unwrap();
        let fd = fd_partials(&f, p.jump_times(), 5.0);
        for (i, &t) in p.jump_times().iter().enumerate() {
            let expected = -0.5 * (-(5.0 - t)).exp();
            assert_relative_eq!(exact.partials[i], expected, max_relative = 1e-14);
            assert!((fd[i] - expected).abs() <= 1e-4 * expected.abs());
        }
    }

    #[test]
    fn missing_count_is_an_input_error() {
        let f = PerCount::new("f2").with(2, |t| t[0] * t[1], None);
        assert!(grad_smooth(&f, &path(&[1.0])).is_err());
        let g = grad_smooth(&f, &path(&[1.0, 3.0])).unwrap();
        assert!(g.finite_difference);
        assert!((g.partials[0] - 3.0).abs() < 1e-6);
        assert!((g.partials[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn chain_rule_for_tanh() {
        let inner: Functional = Arc::new(Product(
            Arc::new(CappedJumpTime(1)),
            Arc::new(CappedJumpTime(2)),
        ));
        let outer = Composed::tanh(inner.clone());
        let p = path(&[0.8, 1.9, 2.2]);
        let gi = grad_smooth(inner.as_ref(), &p).unwrap();
        let go = grad_smooth(&outer, &p).unwrap();
        let scale = 1.0 / (0.8f64 * 1.9).cosh().powi(2);
        for i in 0..3 {
            assert_eq!(go.partials[i], gi.partials[i] * scale);
        }
    }

    #[test]
    fn directional_derivative_matches_quadrature() {
        let m = CameronMartin::linear(5.0).unwrap();
        let f = Product(Arc::new(CappedJumpTime(1)), Arc::new(CappedJumpTime(2)));
        let p = path(&[0.8, 1.9, 2.2, 4.7]);
        let g = grad_smooth(&f, &p).unwrap();
        assert!((g.directional(&m) - g.directional_by_quadrature(&m)).abs() < 1e-10);
        let c = CameronMartin::sine(5.0, 3).unwrap();
        assert!((g.directional(&c) - g.directional_by_quadrature(&c)).abs() < 1e-10);
    }

    #[test]
    fn path_mismatch_is_rejected() {
        let a = grad_smooth(&CappedJumpTime(1), &path(&[1.0])).unwrap();
        let b = grad_smooth(&CappedJumpTime(1), &path(&[2.0])).unwrap();
        assert!(carre_du_champ(&a, &b).is_err());
    }
}
