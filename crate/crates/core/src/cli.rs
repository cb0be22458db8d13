//! Command runner behind the `hawkes-mc` binary. Every command writes CSV files
//! prefixed by `#` comment lines carrying the config digest and, optionally, a
//! timestamp; everything else is a pure function of the configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::config::RunConfig;
use crate::density::{density_vs_empirical, write_gof_csv, GofRow};
use crate::error::{Error, Result};
use crate::experiments::{
    functional_by_name, ibp_check, martingale_check, mean_intensity_check, unit_mass_check,
    write_report_csv, ExperimentReport,
};
use crate::greeks::{fd_delta, malliavin_delta, pathwise_delta, write_greeks_csv, GreekEstimate};
use crate::model::HawkesModel;
use crate::parallel::Parallelism;
use crate::sde::{density_criteria, sensitivity_batch, write_sensitivity_csv};
use crate::simulate::{integrated_intensity, simulate_batch, PathBatch};
use crate::stats::{mc_estimate, poisson_chi_square};

/// Significance level of goodness-of-fit checks.
pub const GOF_LEVEL: f64 = 0.01;
/// Largest excluded-path fraction for which a Greeks run passes.
pub const GREEKS_MAX_EXCLUDED: f64 = 1e-3;
/// Product-drift tolerance `‖K K̃ − I‖` of the tangent integrator.
pub const TANGENT_DRIFT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    DensityCheck,
    IbpCheck,
    UnitMass,
    MeanIntensity,
    SdeDensity,
    Greeks,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Simulate,
        Command::DensityCheck,
        Command::IbpCheck,
        Command::UnitMass,
        Command::MeanIntensity,
        Command::SdeDensity,
        Command::Greeks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::DensityCheck => "density-check",
            Command::IbpCheck => "ibp-check",
            Command::UnitMass => "unit-mass",
            Command::MeanIntensity => "mean-intensity",
            Command::SdeDensity => "sde-density",
            Command::Greeks => "greeks",
        }
    }

    fn file_stem(self) -> String {
        self.name().replace('-', "_")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub timestamp: bool,
    pub parallelism: Parallelism,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub passed: bool,
    pub files: Vec<PathBuf>,
    /// Human-readable lines for the terminal.
    pub summary: Vec<String>,
}

/// Maps a run result to the process exit code: 0 pass, 1 failed check,
/// 2 configuration or input error, 3 model assumption violated.
pub fn exit_code(result: &Result<RunOutcome>) -> i32 {
    match result {
        Ok(outcome) if outcome.passed => 0,
        Ok(_) => 1,
        Err(Error::Assumption(_)) => 3,
        Err(Error::Config(_) | Error::Input(_) | Error::Io(_) | Error::Csv(_)) => 2,
        Err(_) => 1,
    }
}

struct Writer<'a> {
    command: Command,
    config: &'a RunConfig,
    options: &'a RunOptions,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn emit(&mut self, suffix: &str, body: Vec<u8>) -> Result<()> {
        fs::create_dir_all(&self.options.out_dir)?;
        let name = format!("{}{suffix}.csv", self.command.file_stem());
        let path = self.options.out_dir.join(name);
        let mut text = format!(
            "# hawkes-mc {}\n# config_digest={}\n",
            self.command.name(),
            self.config.digest()
        );
        if self.options.timestamp {
            let secs = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            text.push_str(&format!("# generated_unix={secs}\n"));
        }
        let mut bytes = text.into_bytes();
        bytes.extend(body);
        fs::write(&path, bytes)?;
        self.files.push(path);
        Ok(())
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Runs one command. Model admissibility failures surface as
/// [`Error::Assumption`] before any simulation.
pub fn run(command: Command, config: &RunConfig, options: &RunOptions) -> Result<RunOutcome> {
    config.check()?;
    let model = config.model.build()?;
    let mut out = Writer {
        command,
        config,
        options,
        files: Vec::new(),
    };
    let par = options.parallelism;
    let batch = || simulate_batch(&model, config.horizon, config.seed, config.paths, par);
    let (passed, summary) = match command {
        Command::Simulate => simulate(&model, &batch()?, &mut out, par)?,
        Command::DensityCheck => density(&model, config, &batch()?, &mut out)?,
        Command::IbpCheck => {
            let m = config.direction.build(config.horizon)?;
            let fs = config
                .experiments
                .functionals
                .iter()
                .map(|n| functional_by_name(n))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::Config(format!("experiments.functionals: {e}")))?;
            report(
                ibp_check(&model, &m, &fs, &batch()?, par)?,
                config,
                &mut out,
            )?
        }
        Command::UnitMass => {
            let m = config.direction.build(config.horizon)?;
            report(
                unit_mass_check(&model, &m, &config.experiments.eps, &batch()?, par)?,
                config,
                &mut out,
            )?
        }
        Command::MeanIntensity => report(
            mean_intensity_check(&model, config.experiments.grid, &batch()?, par)?,
            config,
            &mut out,
        )?,
        Command::SdeDensity => sde_density(config, &batch()?, &mut out, par)?,
        Command::Greeks => greeks(&model, config, &mut out, par)?,
    };
    Ok(RunOutcome {
        passed,
        files: out.files,
        summary,
    })
}

fn report(
    mut r: ExperimentReport,
    config: &RunConfig,
    out: &mut Writer,
) -> Result<(bool, Vec<String>)> {
    r.digest = config.digest();
    out.emit(
        "",
        csv_bytes(|b| write_report_csv(std::slice::from_ref(&r), b))?,
    )?;
    let lines = r
        .rows
        .iter()
        .map(|row| {
            format!(
                "{}:{}  estimate={:.6} reference={:.6} se={:.3e} z={:+.2} {}",
                r.name,
                row.label,
                row.estimate,
                row.reference,
                row.std_error,
                row.z,
                if row.passed() { "pass" } else { "FAIL" }
            )
        })
        .collect();
    Ok((r.passed(), lines))
}

fn simulate(
    model: &HawkesModel,
    batch: &PathBatch,
    out: &mut Writer,
    par: Parallelism,
) -> Result<(bool, Vec<String>)> {
    out.emit("_paths", csv_bytes(|b| batch.write_csv(b))?)?;
    let horizon = batch.horizon().unwrap_or(0.0);
    let counts: Vec<f64> = batch.paths.iter().map(|p| p.count() as f64).collect();
    let compensators: Vec<f64> = batch
        .paths
        .iter()
        .map(|p| integrated_intensity(model, p.jump_times(), horizon))
        .collect();
    let n = mc_estimate(&counts)?;
    let lam = mc_estimate(&compensators)?;
    let mart = martingale_check(model, batch, par)?;
    let row = &mart.rows[0];
    let body = csv_bytes(|b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["statistic", "value", "std_error"])?;
        w.write_record(["paths".to_string(), batch.len().to_string(), "0".into()])?;
        w.write_record([
            "mean_N_T".to_string(),
            n.mean.to_string(),
            n.std_error.to_string(),
        ])?;
        w.write_record([
            "mean_Lambda_T".to_string(),
            lam.mean.to_string(),
            lam.std_error.to_string(),
        ])?;
        w.write_record([
            "mean_N_T_minus_Lambda_T".to_string(),
            row.estimate.to_string(),
            row.std_error.to_string(),
        ])?;
        w.flush()?;
        Ok(())
    })?;
    out.emit("_summary", body)?;
    Ok((
        row.passed(),
        vec![
            format!(
                "paths={} mean N_T={:.4} (se {:.2e})",
                batch.len(),
                n.mean,
                n.std_error
            ),
            format!(
                "mean Lambda_T={:.4}; N_T - Lambda_T z={:+.2}",
                lam.mean, row.z
            ),
        ],
    ))
}

fn density(
    model: &HawkesModel,
    config: &RunConfig,
    batch: &PathBatch,
    out: &mut Writer,
) -> Result<(bool, Vec<String>)> {
    let mut rows: Vec<GofRow> =
        density_vs_empirical(model, config.horizon, config.density.n, batch)?;
    if model.kernel.sup_norm() == 0.0 {
        // Without excitation the count is Poisson with mean ∫₀ᵀ λ.
        let counts: Vec<usize> = batch.paths.iter().map(|p| p.count()).collect();
        let mean = model.baseline.integral(config.horizon);
        rows.push(GofRow {
            n: 0,
            test_name: "chi_square_count".into(),
            outcome: poisson_chi_square(&counts, mean)?,
        });
    }
    out.emit("", csv_bytes(|b| write_gof_csv(&rows, b))?)?;
    let passed = rows.iter().all(|r| r.outcome.p_value >= GOF_LEVEL);
    let lines = rows
        .iter()
        .map(|r| {
            format!(
                "{} (n={}): statistic={:.5} p={:.4} samples={}",
                r.test_name, r.n, r.outcome.statistic, r.outcome.p_value, r.outcome.samples
            )
        })
        .collect();
    Ok((passed, lines))
}

fn sde_density(
    config: &RunConfig,
    batch: &PathBatch,
    out: &mut Writer,
    par: Parallelism,
) -> Result<(bool, Vec<String>)> {
    let sde = config.sde.build()?;
    let reports = sensitivity_batch(sde.as_ref(), batch, par)?;
    out.emit(
        "_paths",
        csv_bytes(|b| write_sensitivity_csv(&reports, batch.first_index, b))?,
    )?;
    let c = density_criteria(sde.as_ref(), &reports, config.sde.level);
    let d = sde.dim();
    let opt = |v: Option<f64>| v.map_or("NA".to_string(), |x| x.to_string());
    let mut rows: Vec<(String, String, bool)> = vec![
        (
            "paths_with_jumps".into(),
            c.paths_with_jumps.to_string(),
            true,
        ),
        (
            "min_gamma_eigenvalue".into(),
            opt(c.min_gamma_eigenvalue),
            c.gamma_positive_everywhere,
        ),
        (
            format!("min_spanning_rank_at_level_{}", c.spanning_level),
            c.min_spanning_rank.map_or("NA".into(), |r| r.to_string()),
            c.spanning_everywhere(d),
        ),
        ("min_singular_value".into(), opt(c.min_singular_value), true),
        (
            "max_product_drift".into(),
            c.max_product_drift.to_string(),
            c.max_product_drift <= TANGENT_DRIFT_TOL,
        ),
    ];
    if let Some(w) = c.wronskian {
        rows.push((
            "wronskian_margin".into(),
            (w.inf_abs_wronskian - w.threshold()).to_string(),
            w.certified(),
        ));
    }
    let body = csv_bytes(|b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["criterion", "value", "pass"])?;
        for (name, value, pass) in &rows {
            w.write_record([name.clone(), value.clone(), pass.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    out.emit("_criteria", body)?;
    let passed = rows.iter().all(|r| r.2);
    let lines = rows
        .iter()
        .map(|(n, v, p)| {
            format!(
                "{} [{n}] = {v} {}",
                sde.label(),
                if *p { "pass" } else { "FAIL" }
            )
        })
        .collect();
    Ok((passed, lines))
}

/// Seed offset of the independent, larger finite-difference batch used for
/// discontinuous payoffs.
const FD_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

fn greeks(
    model: &HawkesModel,
    config: &RunConfig,
    out: &mut Writer,
    par: Parallelism,
) -> Result<(bool, Vec<String>)> {
    let g = &config.greeks;
    let asset = g.asset(model.clone())?;
    let payoff = g.payoff.build();
    let m = config.direction.build(config.horizon)?;
    let batch = simulate_batch(model, config.horizon, config.seed, config.paths, par)?;
    let malliavin = malliavin_delta(&asset, &payoff, &batch, &m, par)?;
    let fd = if g.discontinuous() {
        let big = simulate_batch(
            model,
            config.horizon,
            config.seed.wrapping_add(FD_SEED_OFFSET),
            config.paths * g.fd_path_multiplier,
            par,
        )?;
        fd_delta(&asset, &payoff, &big, g.bump(), par)?
    } else {
        fd_delta(&asset, &payoff, &batch, g.bump(), par)?
    };
    let pathwise = match pathwise_delta(&asset, &payoff, &batch, par) {
        Ok(p) => p,
        Err(Error::Unsupported(_)) => GreekEstimate {
            estimator: "pathwise".into(),
            payoff: payoff.name(),
            mean: f64::NAN,
            std_error: f64::NAN,
            n_paths: 0,
            effective_sample_size: 0.0,
            excluded_paths: 0,
            min_abs_denominator: None,
            boundary_term: None,
        },
        Err(e) => return Err(e),
    };
    let rows = vec![malliavin, fd, pathwise];
    out.emit("", csv_bytes(|b| write_greeks_csv(&rows, b))?)?;
    let available: Vec<&GreekEstimate> = rows.iter().filter(|r| r.n_paths > 0).collect();
    let mut lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{:<9} {}: {:.6} (se {:.2e}, n {})",
                r.estimator, r.payoff, r.mean, r.std_error, r.n_paths
            )
        })
        .collect();
    let mut passed = true;
    for i in 0..available.len() {
        for j in i + 1..available.len() {
            let z = available[i].z_against(available[j]);
            passed &= z.abs() <= 3.0;
            lines.push(format!(
                "{} vs {}: z={z:+.2}",
                available[i].estimator, available[j].estimator
            ));
        }
    }
    let excluded_fraction = rows[0].excluded_paths as f64 / batch.len() as f64;
    passed &= excluded_fraction < GREEKS_MAX_EXCLUDED;
    lines.push(format!("excluded paths: {}", rows[0].excluded_paths));
    Ok((passed, lines))
}

/// Resolves the output directory: the flag wins over the config entry.
pub fn output_dir(flag: Option<&Path>, config: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}
