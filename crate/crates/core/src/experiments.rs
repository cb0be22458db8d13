//! Cross-checks between simulation, densities and Malliavin weights, each
//! reported as z-scores against a reference with a 3·SE pass threshold.

use std::io::Write;
use std::sync::Arc;

use crate::digest::sha256_hex;
use crate::error::{input, Result};
use crate::malliavin::{
    divergence_m, grad_smooth, z_eps, CameronMartin, CappedJumpTime, Composed, Constant,
    Functional, Product,
};
use crate::model::HawkesModel;
use crate::numeric::GaussLegendre;
use crate::parallel::{map_indexed, Parallelism};
use crate::simulate::{integrated_intensity, PathBatch};
use crate::stats::{mc_estimate, z_score};

/// Pass threshold on `|z|`.
pub const Z_THRESHOLD: f64 = 3.0;
/// Coarse Volterra grid size; the reported solution uses twice as many cells.
pub const VOLTERRA_CELLS: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub estimate: f64,
    pub reference: f64,
    pub std_error: f64,
    pub z: f64,
}

impl ReportRow {
    pub fn new(label: impl Into<String>, estimate: f64, reference: f64, std_error: f64) -> Self {
        Self {
            label: label.into(),
            estimate,
            reference,
            std_error,
            z: z_score(estimate - reference, std_error),
        }
    }

    pub fn passed(&self) -> bool {
        self.z.abs() <= Z_THRESHOLD
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    pub digest: String,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(ReportRow::passed)
    }

    pub fn worst_z(&self) -> f64 {
        self.rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max)
    }
}

fn batch_digest(name: &str, model: &HawkesModel, batch: &PathBatch, extra: &str) -> String {
    sha256_hex(&format!(
        "{name}|{model:?}|T={:?}|seed={}|first={}|n={}|{extra}",
        batch.horizon(),
        batch.master_seed,
        batch.first_index,
        batch.len()
    ))
}

/// Writes `(experiment, parameter_digest, estimate, reference, SE, z, pass)`,
/// one row per report row, labelled `name:label`.
pub fn write_report_csv<W: Write>(reports: &[ExperimentReport], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "experiment",
        "parameter_digest",
        "estimate",
        "reference",
        "SE",
        "z",
        "pass",
    ])?;
    for report in reports {
        for row in &report.rows {
            out.write_record([
                format!("{}:{}", report.name, row.label),
                report.digest.clone(),
                row.estimate.to_string(),
                row.reference.to_string(),
                row.std_error.to_string(),
                row.z.to_string(),
                row.passed().to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Solution of the renewal equation `g(s) = λ_s + ∫₀ˢ μ(s − t) g(t) dt` on a
/// uniform grid, with a discretization bound from one grid refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraSolution {
    pub horizon: f64,
    /// Values at `s_k = k T / cells`, `k = 0..=cells`.
    pub values: Vec<f64>,
    /// `max_k |g_h(s_k) − g_{h/2}(s_k)| / 3` over the coarse nodes.
    pub error_bound: f64,
}

impl VolterraSolution {
    /// Value at a time, by linear interpolation between nodes.
    pub fn at(&self, s: f64) -> f64 {
        let cells = self.values.len() - 1;
        let x = (s / self.horizon * cells as f64).clamp(0.0, cells as f64);
        let k = (x.floor() as usize).min(cells - 1);
        let w = x - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }
}

/// Product-trapezoid solution: `g` is piecewise linear between nodes and each
/// cell's kernel moments are integrated by 8-point Gauss–Legendre.
fn product_trapezoid(model: &HawkesModel, horizon: f64, cells: usize) -> Vec<f64> {
    let h = horizon / cells as f64;
    let rule = GaussLegendre::new(8);
    // left[d], right[d]: ∫₀ʰ μ(d h − u) (1 − u/h) du and ∫₀ʰ μ(d h − u) (u/h) du.
    let mut left = vec![0.0; cells + 1];
    let mut right = vec![0.0; cells + 1];
    for d in 1..=cells {
        let lag = d as f64 * h;
        for (u, w) in rule.mapped(0.0, h) {
            let k = model.kernel.value(lag - u);
            left[d] += w * k * (1.0 - u / h);
            right[d] += w * k * (u / h);
        }
    }
    let mut g = vec![0.0; cells + 1];
    g[0] = model.baseline.value(0.0);
    for k in 1..=cells {
        let mut acc = model.baseline.value(k as f64 * h);
        for j in 0..k {
            acc += left[k - j] * g[j];
            if j + 1 < k {
                acc += right[k - j] * g[j + 1];
            }
        }
        g[k] = acc / (1.0 - right[1]);
    }
    g
}

/// Solves the mean-intensity equation of a linear model on `[0, T]`.
pub fn solve_mean_intensity(model: &HawkesModel, horizon: f64) -> Result<VolterraSolution> {
    if !model.nonlinearity.is_linear() {
        return input("the mean-intensity identity holds for a linear link only");
    }
    if !(horizon > 0.0) {
        return input("horizon must be positive");
    }
    let coarse = product_trapezoid(model, horizon, VOLTERRA_CELLS);
    let fine = product_trapezoid(model, horizon, 2 * VOLTERRA_CELLS);
    let error_bound = coarse
        .iter()
        .enumerate()
        .map(|(k, &c)| (c - fine[2 * k]).abs() / 3.0)
        .fold(0.0, f64::max);
    Ok(VolterraSolution {
        horizon,
        values: fine,
        error_bound,
    })
}

/// Compares the Monte Carlo mean of `λ*(s)` with the Volterra solution at
/// `s_k = k T / grid`, `k = 1..=grid`.
pub fn mean_intensity_check(
    model: &HawkesModel,
    grid: usize,
    batch: &PathBatch,
    parallelism: Parallelism,
) -> Result<ExperimentReport> {
    let horizon = batch
        .horizon()
        .ok_or_else(|| crate::Error::Input("empty batch".into()))?;
    if grid == 0 {
        return input("grid needs at least one point");
    }
    let volterra = solve_mean_intensity(model, horizon)?;
    let points: Vec<f64> = (1..=grid)
        .map(|k| k as f64 * horizon / grid as f64)
        .collect();
    let per_path: Vec<Vec<f64>> = map_indexed(0..batch.len() as u64, parallelism, |i| {
        let times = batch.paths[i as usize].jump_times();
        points
            .iter()
            .map(|&s| model.intensity_unchecked(times, s))
            .collect()
    });
    let mut rows = Vec::with_capacity(grid);
    for (k, &s) in points.iter().enumerate() {
        let column: Vec<f64> = per_path.iter().map(|v| v[k]).collect();
        let est = mc_estimate(&column)?;
        let se = (est.std_error.powi(2) + volterra.error_bound.powi(2)).sqrt();
        rows.push(ReportRow::new(
            format!("s={s}"),
            est.mean,
            volterra.at(s),
            se,
        ));
    }
    Ok(ExperimentReport {
        name: "mean_intensity".into(),
        digest: batch_digest("mean_intensity", model, batch, &format!("grid={grid}")),
        rows,
    })
}

/// `E[N_T − Λ_T] = 0`.
pub fn martingale_check(
    model: &HawkesModel,
    batch: &PathBatch,
    parallelism: Parallelism,
) -> Result<ExperimentReport> {
    let horizon = batch
        .horizon()
        .ok_or_else(|| crate::Error::Input("empty batch".into()))?;
    let values = map_indexed(0..batch.len() as u64, parallelism, |i| {
        let p = &batch.paths[i as usize];
        p.count() as f64 - integrated_intensity(model, p.jump_times(), horizon)
    });
    let est = mc_estimate(&values)?;
    Ok(ExperimentReport {
        name: "martingale".into(),
        digest: batch_digest("martingale", model, batch, ""),
        rows: vec![ReportRow::new("N_T-Lambda_T", est.mean, 0.0, est.std_error)],
    })
}

/// `E[Z^ε] = 1` for each `ε`.
pub fn unit_mass_check(
    model: &HawkesModel,
    m: &CameronMartin,
    eps: &[f64],
    batch: &PathBatch,
    parallelism: Parallelism,
) -> Result<ExperimentReport> {
    let mut rows = Vec::with_capacity(eps.len());
    for &e in eps {
        let values: Vec<f64> = map_indexed(0..batch.len() as u64, parallelism, |i| {
            z_eps(model, &batch.paths[i as usize], m, e)
        })
        .into_iter()
        .collect::<Result<_>>()?;
        let est = mc_estimate(&values)?;
        rows.push(ReportRow::new(
            format!("eps={e}"),
            est.mean,
            1.0,
            est.std_error,
        ));
    }
    Ok(ExperimentReport {
        name: "unit_mass".into(),
        digest: batch_digest(
            "unit_mass",
            model,
            batch,
            &format!("m={:?}|eps={eps:?}", m.kind()),
        ),
        rows,
    })
}

/// The built-in functionals of the integration-by-parts suite.
pub fn ibp_catalog() -> Vec<Functional> {
    let t1: Functional = Arc::new(CappedJumpTime(1));
    let t2: Functional = Arc::new(CappedJumpTime(2));
    vec![
        Arc::new(Constant(1.0)),
        t1.clone(),
        Arc::new(Composed::exp_neg(t1.clone())),
        Arc::new(Product(t1, t2)),
    ]
}

/// Resolves a catalog name: `one`, `tbar1`, `tbar2`, `exp_neg_tbar1`, `tbar1_tbar2`.
pub fn functional_by_name(name: &str) -> Result<Functional> {
    let t1: Functional = Arc::new(CappedJumpTime(1));
    Ok(match name {
        "one" => Arc::new(Constant(1.0)),
        "tbar1" => t1,
        "tbar2" => Arc::new(CappedJumpTime(2)),
        "exp_neg_tbar1" => Arc::new(Composed::exp_neg(t1)),
        "tbar1_tbar2" => Arc::new(Product(t1, Arc::new(CappedJumpTime(2)))),
        other => return input(format!("unknown functional '{other}'")),
    })
}

/// `E[D_m F] = E[F δ(m)]` for each `F`, with the standard error of the paired
/// difference. `F = 1` checks `E[δ(m)] = 0`.
pub fn ibp_check(
    model: &HawkesModel,
    m: &CameronMartin,
    functionals: &[Functional],
    batch: &PathBatch,
    parallelism: Parallelism,
) -> Result<ExperimentReport> {
    // Per path: δ(m) and, for each functional, (D_mF, F δ(m)).
    type PathSides = Result<(f64, Vec<(f64, f64)>)>;
    let per_path: Vec<PathSides> = map_indexed(0..batch.len() as u64, parallelism, |i| {
        let path = &batch.paths[i as usize];
        let delta = divergence_m(model, path, m);
        let sides = functionals
            .iter()
            .map(|f| {
                let value = f.value(path.jump_times(), path.horizon()).ok_or_else(|| {
                    crate::Error::Input(format!("{} undefined on a path", f.label()))
                })?;
                let lhs = grad_smooth(f.as_ref(), path)?.directional(m);
                Ok((lhs, value * delta))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((delta, sides))
    });
    let per_path = per_path.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(functionals.len());
    for (k, f) in functionals.iter().enumerate() {
        let lhs: Vec<f64> = per_path.iter().map(|(_, s)| s[k].0).collect();
        let rhs: Vec<f64> = per_path.iter().map(|(_, s)| s[k].1).collect();
        let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        let l = mc_estimate(&lhs)?;
        let r = mc_estimate(&rhs)?;
        let d = mc_estimate(&diff)?;
        rows.push(ReportRow::new(f.label(), l.mean, r.mean, d.std_error));
    }
    let labels: Vec<String> = functionals.iter().map(|f| f.label()).collect();
    Ok(ExperimentReport {
        name: "ibp".into(),
        digest: batch_digest(
            "ibp",
            model,
            batch,
            &format!("m={:?}|F={labels:?}", m.kind()),
        ),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::simulate_batch;

    #[test]
    fn volterra_matches_exponential_resolvent() {
        let model = HawkesModel::linear_exponential(1.0, 0.5, 1.0).unwrap();
        let sol = solve_mean_intensity(&model, 5.0).unwrap();
        for k in 0..=64 {
            let s = k as f64 * 5.0 / 64.0;
            let exact = 2.0 - (-0.5 * s).exp();
            assert!(
                (sol.at(s) - exact).abs() < 1e-6,
                "s={s}: {} vs {exact}",
                sol.at(s)
            );
        }
        assert!(sol.error_bound < 1e-6);
    }

    #[test]
    fn volterra_poisson_is_flat() {
        let model = HawkesModel::linear_exponential(1.3, 0.0, 1.0).unwrap();
        let sol = solve_mean_intensity(&model, 2.0).unwrap();
        assert!(sol.values.iter().all(|&g| g == 1.3));
    }

    #[test]
    fn refinement_is_second_order() {
        let model = HawkesModel::linear_exponential(1.0, 0.5, 1.0).unwrap();
        let a = product_trapezoid(&model, 5.0, 512);
        let b = product_trapezoid(&model, 5.0, 1024);
        let c = product_trapezoid(&model, 5.0, 2048);
        let e1 = (0..=512)
            .map(|k| (a[k] - b[2 * k]).abs())
            .fold(0.0, f64::max);
        let e2 = (0..=512)
            .map(|k| (b[2 * k] - c[4 * k]).abs())
            .fold(0.0, f64::max);
        assert!(e2 <= e1 / 3.0, "{e1} {e2}");
    }

    #[test]
    fn small_batch_reports_are_well_formed() {
        let model = HawkesModel::linear_exponential(1.0, 0.5, 1.0).unwrap();
        let batch = simulate_batch(&model, 5.0, 11, 500, Parallelism::SEQUENTIAL).unwrap();
        let m = CameronMartin::linear(5.0).unwrap();
        let r = ibp_check(&model, &m, &ibp_catalog(), &batch, Parallelism::SEQUENTIAL).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert_eq!(r.rows[0].estimate, 0.0);
        let u = unit_mass_check(&model, &m, &[0.0], &batch, Parallelism::SEQUENTIAL).unwrap();
        assert_eq!(u.rows[0].estimate, 1.0);
        assert_eq!(u.rows[0].std_error, 0.0);
        let mut buf = Vec::new();
        write_report_csv(&[r, u], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 6);
    }
}
