//! Jump SDEs `dX = f(t, X) dt + g(t, X₋) dN` driven by a Hawkes path, solved by
//! composing the drift flow with the jump maps, together with the tangent
//! processes that turn jump-time perturbations into sensitivities of `X_T`.

use std::io::Write;

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector};

use crate::error::{input, Error, Result};
use crate::malliavin::xi_unchecked;
use crate::parallel::{map_indexed, Parallelism};
use crate::simulate::{HawkesPath, PathBatch};

/// Relative step bound of the RK4 flow integrator, as a fraction of `T`.
pub const FLOW_STEP_FRACTION: f64 = 1e-3;
/// Minimum number of RK4 steps per inter-jump segment.
pub const MIN_SEGMENT_STEPS: usize = 16;
/// Jumps with `|det(I + ∇g)|` below this are treated as singular.
pub const SINGULAR_DET: f64 = 1e-12;

/// Analytic inputs of the scalar Wronskian criterion
/// `inf |W(f, g)| > ½ ‖f″‖∞ ‖g‖²∞`, with `W(f, g) = f g′ − f′ g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WronskianBounds {
    pub inf_abs_wronskian: f64,
    pub sup_abs_f_second: f64,
    pub sup_abs_g: f64,
}

impl WronskianBounds {
    pub fn threshold(&self) -> f64 {
        if self.sup_abs_f_second == 0.0 {
            return 0.0;
        }
        0.5 * self.sup_abs_f_second * self.sup_abs_g.powi(2)
    }

    pub fn certified(&self) -> bool {
        self.inf_abs_wronskian > self.threshold()
    }
}

/// Coefficients of a jump SDE and their derivatives.
pub trait JumpSde: Send + Sync {
    fn dim(&self) -> usize;
    fn initial_state(&self) -> DVector<f64>;
    fn drift(&self, t: f64, x: &DVector<f64>) -> DVector<f64>;
    /// `∇_x f`.
    fn drift_jacobian(&self, t: f64, x: &DVector<f64>) -> DMatrix<f64>;
    fn jump(&self, t: f64, x: &DVector<f64>) -> DVector<f64>;
    /// `∇_x g`.
    fn jump_jacobian(&self, t: f64, x: &DVector<f64>) -> DMatrix<f64>;
    /// `∂g/∂t`; zero for autonomous jump coefficients.
    fn jump_time_derivative(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(x.len())
    }
    /// `φ(t, x) = f(t, x + g) − (I + ∇g) f − ∂g/∂t`.
    fn phi(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let shifted = x + self.jump(t, x);
        let jac = DMatrix::identity(x.len(), x.len()) + self.jump_jacobian(t, x);
        self.drift(t, &shifted) - jac * self.drift(t, x) - self.jump_time_derivative(t, x)
    }
    /// User-supplied bounds for the scalar Wronskian criterion, if known.
    fn wronskian_bounds(&self) -> Option<WronskianBounds> {
        None
    }
    fn label(&self) -> String;
}

/// `f = a x + b`, `g = α x + β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearScalar {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
    pub x0: f64,
}

impl JumpSde for LinearScalar {
    fn dim(&self) -> usize {
        1
    }
    fn initial_state(&self) -> DVector<f64> {
        DVector::from_element(1, self.x0)
    }
    fn drift(&self, _: f64, x: &DVector<f64>) -> DVector<f64> {
        x.map(|v| self.a * v + self.b)
    }
    fn drift_jacobian(&self, _: f64, _: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.a)
    }
    fn jump(&self, _: f64, x: &DVector<f64>) -> DVector<f64> {
        x.map(|v| self.alpha * v + self.beta)
    }
    fn jump_jacobian(&self, _: f64, _: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.alpha)
    }
    /// Constant `aβ − αb`, exact rather than a cancelling difference.
    fn phi(&self, _: f64, _: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, self.a * self.beta - self.alpha * self.b)
    }
    fn wronskian_bounds(&self) -> Option<WronskianBounds> {
        Some(WronskianBounds {
            inf_abs_wronskian: (self.alpha * self.b - self.a * self.beta).abs(),
            sup_abs_f_second: 0.0,
            // Unbounded unless α = 0; irrelevant since f″ = 0.
            sup_abs_g: if self.alpha == 0.0 {
                self.beta.abs()
            } else {
                f64::INFINITY
            },
        })
    }
    fn label(&self) -> String {
        format!(
            "linear-scalar(a={},b={},alpha={},beta={},x0={})",
            self.a, self.b, self.alpha, self.beta, self.x0
        )
    }
}

/// `f = cos`, `g = sin`: `W(f, g) ≡ 1 > ½ = ½ ‖f″‖∞ ‖g‖²∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosSin {
    pub x0: f64,
}

impl JumpSde for CosSin {
    fn dim(&self) -> usize {
        1
    }
    fn initial_state(&self) -> DVector<f64> {
        DVector::from_element(1, self.x0)
    }
    fn drift(&self, _: f64, x: &DVector<f64>) -> DVector<f64> {
        x.map(f64::cos)
    }
    fn drift_jacobian(&self, _: f64, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, -x[0].sin())
    }
    fn jump(&self, _: f64, x: &DVector<f64>) -> DVector<f64> {
        x.map(f64::sin)
    }
    fn jump_jacobian(&self, _: f64, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x[0].cos())
    }
    fn wronskian_bounds(&self) -> Option<WronskianBounds> {
        Some(WronskianBounds {
            inf_abs_wronskian: 1.0,
            sup_abs_f_second: 1.0,
            sup_abs_g: 1.0,
        })
    }
    fn label(&self) -> String {
        format!("cos-sin(x0={})", self.x0)
    }
}

/// `f = A x + b`, `g = M x + β` in dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub m: DMatrix<f64>,
    pub beta: DVector<f64>,
    pub x0: DVector<f64>,
}

impl LinearSystem {
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        m: DMatrix<f64>,
        beta: DVector<f64>,
        x0: DVector<f64>,
    ) -> Result<Self> {
        let d = x0.len();
        if d == 0 || a.shape() != (d, d) || m.shape() != (d, d) || b.len() != d || beta.len() != d {
            return input(format!("linear system blocks must all have dimension {d}"));
        }
        Ok(Self { a, b, m, beta, x0 })
    }

    /// `A = I`, `M = diag(1, 2)`, `b = 0`, `β = (1, 1)`, `x₀ = (1, 1)`.
    pub fn two_dimensional_example() -> Self {
        Self {
            a: DMatrix::identity(2, 2),
            b: DVector::zeros(2),
            m: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])),
            beta: DVector::from_vec(vec![1.0, 1.0]),
            x0: DVector::from_vec(vec![1.0, 1.0]),
        }
    }
}

impl JumpSde for LinearSystem {
    fn dim(&self) -> usize {
        self.x0.len()
    }
    fn initial_state(&self) -> DVector<f64> {
        self.x0.clone()
    }
    fn drift(&self, _: f64, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b
    }
    fn drift_jacobian(&self, _: f64, _: &DVector<f64>) -> DMatrix<f64> {
        self.a.clone()
    }
    fn jump(&self, _: f64, x: &DVector<f64>) -> DVector<f64> {
        &self.m * x + &self.beta
    }
    fn jump_jacobian(&self, _: f64, _: &DVector<f64>) -> DMatrix<f64> {
        self.m.clone()
    }
    /// `(AM − MA) x + Aβ − M b`, expanded symbolically.
    fn phi(&self, _: f64, x: &DVector<f64>) -> DVector<f64> {
        let commutator = &self.a * &self.m - &self.m * &self.a;
        commutator * x + &self.a * &self.beta - &self.m * &self.b
    }
    fn label(&self) -> String {
        format!("linear-d{}", self.dim())
    }
}

/// Named presets reachable from configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdePreset {
    LinearScalar,
    CosSin,
    LinearD2,
}

impl SdePreset {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "linear-scalar" => Ok(Self::LinearScalar),
            "cos-sin" => Ok(Self::CosSin),
            "linear-d2" => Ok(Self::LinearD2),
            other => input(format!(
                "unknown SDE preset '{other}' (expected linear-scalar, cos-sin or linear-d2)"
            )),
        }
    }
}

/// Terminal state of a flow together with a Richardson error estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    pub state: DVector<f64>,
    pub error_estimate: f64,
}

fn segment_steps(horizon: f64, s: f64, t: f64) -> usize {
    let span = t - s;
    if span <= 0.0 {
        return 0;
    }
    let h = (FLOW_STEP_FRACTION * horizon).min(span / MIN_SEGMENT_STEPS as f64);
    ((span / h).ceil() as usize).max(MIN_SEGMENT_STEPS)
}

/// Classic RK4 on a flat state. The stage buffers are allocated once per
/// segment, so the per-step cost is dominated by `rhs` itself.
fn rk4<F>(s: f64, t: f64, steps: usize, mut z: DVector<f64>, rhs: F) -> DVector<f64>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    if steps == 0 {
        return z;
    }
    let n = z.len();
    let h = (t - s) / steps as f64;
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut probe = vec![0.0; n];
    let z = z.as_mut_slice();
    for step in 0..steps {
        let u = s + step as f64 * h;
        rhs(u, z, &mut k1);
        for i in 0..n {
            probe[i] = z[i] + 0.5 * h * k1[i];
        }
        rhs(u + 0.5 * h, &probe, &mut k2);
        for i in 0..n {
            probe[i] = z[i] + 0.5 * h * k2[i];
        }
        rhs(u + 0.5 * h, &probe, &mut k3);
        for i in 0..n {
            probe[i] = z[i] + h * k3[i];
        }
        rhs(u + h, &probe, &mut k4);
        for i in 0..n {
            z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    DVector::from_column_slice(z)
}

fn drift_rhs(sde: &dyn JumpSde) -> impl Fn(f64, &[f64], &mut [f64]) + '_ {
    move |u, z, out| out.copy_from_slice(sde.drift(u, &DVector::from_column_slice(z)).as_slice())
}

fn ensure_finite(z: &DVector<f64>, at: f64) -> Result<()> {
    if z.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Integrator(format!("non-finite state at t = {at}")))
    }
}

/// `Φ_{s,t}(x)`: the drift flow from `s` to `t`, by RK4 with step
/// `min(10⁻³ T, (t − s)/16)`. The error estimate compares against half steps.
pub fn solve_flow(
    sde: &dyn JumpSde,
    horizon: f64,
    s: f64,
    t: f64,
    x: &DVector<f64>,
) -> Result<FlowSolution> {
    if !(s <= t) {
        return input(format!("flow needs s <= t, got s = {s}, t = {t}"));
    }
    if x.len() != sde.dim() {
        return input(format!(
            "state has dimension {}, SDE has {}",
            x.len(),
            sde.dim()
        ));
    }
    let steps = segment_steps(horizon, s, t);
    let rhs = drift_rhs(sde);
    let coarse = rk4(s, t, steps, x.clone(), &rhs);
    let fine = rk4(s, t, 2 * steps, x.clone(), &rhs);
    ensure_finite(&fine, t)?;
    let error_estimate = (&fine - &coarse).amax() / 15.0;
    Ok(FlowSolution {
        state: fine,
        error_estimate,
    })
}

/// `X_T` and the pre-jump states `X_{T_i−}` along a path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSolution {
    pub terminal: DVector<f64>,
    pub pre_jump: Vec<DVector<f64>>,
}

/// Solves along `path` as `Φ_{T_n,T} ∘ Ψ_n ∘ ⋯ ∘ Ψ_1 ∘ Φ_{0,T_1}(x₀)` with
/// `Ψ_i(x) = x + g(T_i, x)`.
pub fn solve_path(sde: &dyn JumpSde, path: &HawkesPath) -> Result<PathSolution> {
    solve_times(sde, path.horizon(), path.jump_times())
}

fn solve_times(sde: &dyn JumpSde, horizon: f64, times: &[f64]) -> Result<PathSolution> {
    let rhs = drift_rhs(sde);
    let mut x = sde.initial_state();
    let mut clock = 0.0;
    let mut pre_jump = Vec::with_capacity(times.len());
    for &t in times {
        x = rk4(clock, t, segment_steps(horizon, clock, t), x, &rhs);
        ensure_finite(&x, t)?;
        let jump = sde.jump(t, &x);
        pre_jump.push(x.clone());
        x += jump;
        clock = t;
    }
    let terminal = rk4(
        clock,
        horizon,
        segment_steps(horizon, clock, horizon),
        x,
        &rhs,
    );
    ensure_finite(&terminal, horizon)?;
    Ok(PathSolution { terminal, pre_jump })
}

/// Explicit Euler on a uniform grid of width `step`, stopping exactly at
/// each jump time. An independent reference for [`solve_path`].
pub fn solve_path_euler(sde: &dyn JumpSde, path: &HawkesPath, step: f64) -> Result<DVector<f64>> {
    if !(step > 0.0) {
        return input("Euler step must be positive");
    }
    let mut x = sde.initial_state();
    let mut clock = 0.0;
    let advance = |x: &mut DVector<f64>, from: f64, to: f64| {
        let mut u = from;
        while u < to {
            let h = step.min(to - u);
            let dx = sde.drift(u, x) * h;
            *x += dx;
            u += h;
        }
    };
    for &t in path.jump_times() {
        advance(&mut x, clock, t);
        let jump = sde.jump(t, &x);
        x += jump;
        clock = t;
    }
    advance(&mut x, clock, path.horizon());
    ensure_finite(&x, path.horizon())?;
    Ok(x)
}

/// Tangent processes along a path.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentState {
    /// `K_T`, the derivative of `X_T` with respect to `x₀`.
    pub k: DMatrix<f64>,
    /// `K̃_T`, integrated by its own equation.
    pub k_tilde: DMatrix<f64>,
    /// `K_T^{T_i} = K_T K̃_{T_i}` for each jump.
    pub propagators: Vec<DMatrix<f64>>,
    /// `max ‖K_t K̃_t − I‖` over the jump times and `T`.
    pub product_drift: f64,
}

fn pack(x: &DVector<f64>, k: &DMatrix<f64>, kt: &DMatrix<f64>) -> DVector<f64> {
    let mut z = Vec::with_capacity(x.len() + k.len() + kt.len());
    z.extend(x.iter());
    z.extend(k.iter());
    z.extend(kt.iter());
    DVector::from_vec(z)
}

fn unpack(z: &DVector<f64>, d: usize) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
    let x = DVector::from_column_slice(&z.as_slice()[..d]);
    let k = DMatrix::from_column_slice(d, d, &z.as_slice()[d..d + d * d]);
    let kt = DMatrix::from_column_slice(d, d, &z.as_slice()[d + d * d..]);
    (x, k, kt)
}

/// Solves the state, `K` and `K̃` together. Between jumps `dK = ∇f K dt` and
/// `dK̃ = −K̃ ∇f dt`; at a jump `K ← (I + ∇g) K` and `K̃ ← K̃ (I + ∇g)⁻¹`.
pub fn tangents(sde: &dyn JumpSde, path: &HawkesPath) -> Result<(PathSolution, TangentState)> {
    let d = sde.dim();
    let horizon = path.horizon();
    let identity = DMatrix::<f64>::identity(d, d);
    let dd = d * d;
    let rhs = |u: f64, z: &[f64], out: &mut [f64]| {
        let x = DVector::from_column_slice(&z[..d]);
        let jac = sde.drift_jacobian(u, &x);
        out[..d].copy_from_slice(sde.drift(u, &x).as_slice());
        let k = DMatrixView::from_slice(&z[d..d + dd], d, d);
        let kt = DMatrixView::from_slice(&z[d + dd..], d, d);
        let (dx_dk, dkt) = out.split_at_mut(d + dd);
        let mut dk = DMatrixViewMut::from_slice(&mut dx_dk[d..], d, d);
        dk.gemm(1.0, &jac, &k, 0.0);
        let mut dkt = DMatrixViewMut::from_slice(dkt, d, d);
        dkt.gemm(-1.0, &kt, &jac, 0.0);
    };
    let mut z = pack(&sde.initial_state(), &identity, &identity);
    let mut clock = 0.0;
    let mut pre_jump = Vec::with_capacity(path.count());
    let mut after_jump = Vec::with_capacity(path.count());
    let mut drift: f64 = 0.0;
    for &t in path.jump_times() {
        z = rk4(clock, t, segment_steps(horizon, clock, t), z, rhs);
        ensure_finite(&z, t)?;
        let (x, k, kt) = unpack(&z, d);
        let jac = &identity + sde.jump_jacobian(t, &x);
        let det = jac.determinant();
        let inverse = match jac.clone().try_inverse() {
            Some(inv) if det.abs() >= SINGULAR_DET => inv,
            _ => {
                return Err(Error::Assumption(format!(
                    "I + grad g is singular at the jump t = {t} (det = {det})"
                )))
            }
        };
        let x_next = &x + sde.jump(t, &x);
        let k_next = &jac * k;
        let kt_next = kt * inverse;
        drift = drift.max((&k_next * &kt_next - &identity).amax());
        pre_jump.push(x);
        after_jump.push(kt_next.clone());
        z = pack(&x_next, &k_next, &kt_next);
        clock = t;
    }
    z = rk4(
        clock,
        horizon,
        segment_steps(horizon, clock, horizon),
        z,
        rhs,
    );
    ensure_finite(&z, horizon)?;
    let (terminal, k, k_tilde) = unpack(&z, d);
    drift = drift.max((&k * &k_tilde - &identity).amax());
    let propagators = after_jump.iter().map(|kt| &k * kt).collect();
    Ok((
        PathSolution { terminal, pre_jump },
        TangentState {
            k,
            k_tilde,
            propagators,
            product_drift: drift,
        },
    ))
}

/// `φ(t, x) = f(t, x + g(t, x)) − (I + ∇g(t, x)) f(t, x) − ∂g/∂t(t, x)`.
pub fn phi_jump_sensitivity(sde: &dyn JumpSde, t: f64, x: &DVector<f64>) -> DVector<f64> {
    sde.phi(t, x)
}

/// Sensitivities of `X_T` on one path.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub terminal: DVector<f64>,
    pub jump_times: Vec<f64>,
    /// `v_i = ∂X_T/∂T_i = −K_T^{T_i} φ(T_i, X_{T_i−})`.
    pub coefficients: Vec<DVector<f64>>,
    /// `Γ[X_T] = Σ_{i,j} v_i v_jᵀ ξ(T_i, T_j)`.
    pub gamma: DMatrix<f64>,
    pub det: f64,
    pub min_eigenvalue: f64,
    /// Numerical rank of `{v_i}`.
    pub spanning_rank: usize,
    pub product_drift: f64,
}

impl SensitivityReport {
    pub fn count(&self) -> usize {
        self.jump_times.len()
    }

    /// `D_s X_T = Σ_i v_i (T_i/T − 1_{[0,T_i]}(s))`.
    pub fn gradient_at(&self, s: f64, horizon: f64) -> DVector<f64> {
        let d = self.terminal.len();
        let mut out = DVector::zeros(d);
        for (v, &t) in self.coefficients.iter().zip(&self.jump_times) {
            out += v * (t / horizon - if s <= t { 1.0 } else { 0.0 });
        }
        out
    }
}

/// Relative tolerance of the spanning rank.
const RANK_TOL: f64 = 1e-10;

#[allow(non_snake_case)]
pub fn grad_and_gamma_XT(sde: &dyn JumpSde, path: &HawkesPath) -> Result<SensitivityReport> {
    let (solution, tangent) = tangents(sde, path)?;
    let d = sde.dim();
    let times = path.jump_times();
    let coefficients: Vec<DVector<f64>> = times
        .iter()
        .zip(&solution.pre_jump)
        .zip(&tangent.propagators)
        .map(|((&t, x), prop)| -(prop * sde.phi(t, x)))
        .collect();
    let mut gamma = DMatrix::zeros(d, d);
    for (i, vi) in coefficients.iter().enumerate() {
        for (j, vj) in coefficients.iter().enumerate() {
            let w = xi_unchecked(path.horizon(), times[i], times[j]);
            if w != 0.0 {
                gamma += vi * vj.transpose() * w;
            }
        }
    }
    // Symmetrize away rounding so the eigen-decomposition sees a symmetric matrix.
    let gamma = (&gamma + gamma.transpose()) * 0.5;
    let det = gamma.determinant();
    let min_eigenvalue = gamma.clone().symmetric_eigenvalues().min();
    let spanning_rank = if coefficients.is_empty() {
        0
    } else {
        let columns = DMatrix::from_columns(&coefficients);
        let sv = columns.svd(false, false).singular_values;
        let top = sv.max();
        if top == 0.0 {
            0
        } else {
            sv.iter().filter(|&&s| s > RANK_TOL * top).count()
        }
    };
    Ok(SensitivityReport {
        terminal: solution.terminal,
        jump_times: times.to_vec(),
        coefficients,
        gamma,
        det,
        min_eigenvalue,
        spanning_rank,
        product_drift: tangent.product_drift,
    })
}

/// Central finite differences of `X_T` in each jump time, re-solving the path.
/// An oracle for the coefficients of [`grad_and_gamma_XT`].
pub fn fd_jump_sensitivities(
    sde: &dyn JumpSde,
    path: &HawkesPath,
    rel_step: f64,
) -> Result<Vec<DVector<f64>>> {
    let times = path.jump_times();
    let horizon = path.horizon();
    let mut work = times.to_vec();
    let mut out = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let t = times[i];
        let lower = if i == 0 { 0.0 } else { times[i - 1] };
        let upper = times.get(i + 1).copied().unwrap_or(horizon);
        let h = (rel_step * t.max(1.0))
            .min(0.5 * (t - lower))
            .min(0.5 * (upper - t));
        if h <= 0.0 {
            return input("finite differences need jumps strictly inside (0, T)");
        }
        work[i] = t + h;
        let up = solve_times(sde, horizon, &work)?.terminal;
        work[i] = t - h;
        let down = solve_times(sde, horizon, &work)?.terminal;
        work[i] = t;
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// Sensitivity reports for every path of a batch, in path order.
pub fn sensitivity_batch(
    sde: &dyn JumpSde,
    batch: &PathBatch,
    parallelism: Parallelism,
) -> Result<Vec<SensitivityReport>> {
    map_indexed(0..batch.len() as u64, parallelism, |i| {
        grad_and_gamma_XT(sde, &batch.paths[i as usize])
    })
    .into_iter()
    .collect()
}

/// Batch-level absolute-continuity diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CriteriaReport {
    pub paths: usize,
    pub paths_with_jumps: usize,
    /// Smallest eigenvalue of `Γ[X_T]` over paths with `N_T ≥ 1`.
    pub min_gamma_eigenvalue: Option<f64>,
    /// Every path with `N_T ≥ 1` has a positive definite `Γ[X_T]`.
    pub gamma_positive_everywhere: bool,
    /// Scalar Wronskian certificate, when the SDE supplies bounds.
    pub wronskian: Option<WronskianBounds>,
    /// `ℓ`: the spanning check is restricted to paths with `N_T ≥ ℓ`.
    pub spanning_level: usize,
    pub paths_at_level: usize,
    pub min_spanning_rank: Option<usize>,
    /// Smallest singular value of `Γ[X_T]` on `{N_T ≥ ℓ}`.
    pub min_singular_value: Option<f64>,
    pub max_product_drift: f64,
}

impl CriteriaReport {
    /// Full rank on every path of `{N_T ≥ ℓ}`.
    pub fn spanning_everywhere(&self, dim: usize) -> bool {
        self.min_spanning_rank.is_none_or(|r| r == dim)
    }
}

pub fn density_criteria(
    sde: &dyn JumpSde,
    reports: &[SensitivityReport],
    level: usize,
) -> CriteriaReport {
    let with_jumps: Vec<&SensitivityReport> = reports.iter().filter(|r| r.count() >= 1).collect();
    let at_level: Vec<&SensitivityReport> = reports
        .iter()
        .filter(|r| r.count() >= level.max(1))
        .collect();
    let min_gamma_eigenvalue = with_jumps.iter().map(|r| r.min_eigenvalue).reduce(f64::min);
    CriteriaReport {
        paths: reports.len(),
        paths_with_jumps: with_jumps.len(),
        min_gamma_eigenvalue,
        gamma_positive_everywhere: with_jumps.iter().all(|r| r.min_eigenvalue > 0.0),
        wronskian: if sde.dim() == 1 {
            sde.wronskian_bounds()
        } else {
            None
        },
        spanning_level: level,
        paths_at_level: at_level.len(),
        min_spanning_rank: at_level.iter().map(|r| r.spanning_rank).min(),
        min_singular_value: at_level
            .iter()
            .map(|r| r.gamma.clone().svd(false, false).singular_values.min())
            .reduce(f64::min),
        max_product_drift: reports.iter().map(|r| r.product_drift).fold(0.0, f64::max),
    }
}

/// Writes `(path_index, N_T, x_1..x_d, det_gamma, min_eigenvalue,
/// gamma_positive, full_span)` rows.
pub fn write_sensitivity_csv<W: Write>(
    reports: &[SensitivityReport],
    first_index: u64,
    writer: W,
) -> Result<()> {
    let d = reports.first().map_or(1, |r| r.terminal.len());
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec!["path_index".to_string(), "N_T".to_string()];
    header.extend((1..=d).map(|k| format!("x_{k}")));
    header.extend(["det_gamma", "min_eigenvalue", "gamma_positive", "full_span"].map(String::from));
    out.write_record(&header)?;
    for (i, r) in reports.iter().enumerate() {
        let mut row = vec![(first_index + i as u64).to_string(), r.count().to_string()];
        row.extend(r.terminal.iter().map(|v| v.to_string()));
        row.push(r.det.to_string());
        row.push(r.min_eigenvalue.to_string());
        row.push((r.min_eigenvalue > 0.0).to_string());
        row.push((r.spanning_rank == d).to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
