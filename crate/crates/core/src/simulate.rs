//! Path simulation by thinning, compensators and reproducible batches.

use std::io::Write;
use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{input, Error, Result};
use crate::model::{check_sorted, HawkesModel};
use crate::numeric::adaptive_simpson;
use crate::parallel::{map_indexed, Parallelism};
pub use crate::rng::RngStream;

/// Absolute tolerance per inter-jump interval for numerical compensators.
pub const COMPENSATOR_TOL: f64 = 1e-10;

/// A realized path on `[0, T]`: strictly increasing jump times in `(0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HawkesPath {
    horizon: f64,
    jump_times: Vec<f64>,
}

impl HawkesPath {
    pub fn new(horizon: f64, jump_times: Vec<f64>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return input(format!(
                "horizon must be positive and finite, got {horizon}"
            ));
        }
        check_sorted(&jump_times)?;
        if let (Some(&first), Some(&last)) = (jump_times.first(), jump_times.last()) {
            if first <= 0.0 || last > horizon {
                return input("jump times must lie in (0, T]");
            }
        }
        Ok(Self {
            horizon,
            jump_times,
        })
    }

    pub fn empty(horizon: f64) -> Result<Self> {
        Self::new(horizon, Vec::new())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    /// `N_T`.
    pub fn count(&self) -> usize {
        self.jump_times.len()
    }

    /// `T̄_j = T_j ∧ T` (1-based); equals `T` when fewer than `j` jumps occurred.
    pub fn capped_time(&self, j: usize) -> f64 {
        assert!(j >= 1, "jump ordinals are 1-based");
        self.jump_times.get(j - 1).copied().unwrap_or(self.horizon)
    }

    /// Same count with times replaced; used by perturbation oracles.
    pub fn with_times(&self, jump_times: Vec<f64>) -> Result<Self> {
        Self::new(self.horizon, jump_times)
    }
}

/// Simulates one path by Ogata thinning.
///
/// The envelope after the current time `t` is `λ^T + γ(Σ_i sup_{v ≥ t − t_i} μ(v))`,
/// refreshed after every candidate. It dominates the intensity until the next
/// accepted jump because `γ` is nondecreasing.
pub fn simulate_path(model: &HawkesModel, horizon: f64, stream: RngStream) -> Result<HawkesPath> {
    Thinning::new(model, horizon)?.run(stream)
}

/// Precomputed envelope data shared by all paths of one batch.
struct Thinning<'a> {
    model: &'a HawkesModel,
    horizon: f64,
    baseline_bound: f64,
}

impl<'a> Thinning<'a> {
    fn new(model: &'a HawkesModel, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return input(format!(
                "horizon must be positive and finite, got {horizon}"
            ));
        }
        if !model.nonlinearity.is_nondecreasing() {
            return Err(Error::Assumption(
                "thinning requires a nondecreasing nonlinearity".into(),
            ));
        }
        Ok(Self {
            model,
            horizon,
            baseline_bound: model.baseline.upper_bound(horizon),
        })
    }

    fn run(&self, stream: RngStream) -> Result<HawkesPath> {
        let mut rng = stream.rng();
        let kernel = &self.model.kernel;
        let gamma = &self.model.nonlinearity;
        let mut jumps: Vec<f64> = Vec::new();
        let mut t = 0.0;
        loop {
            let envelope_sum: f64 = jumps
                .iter()
                .map(|&ti| kernel.forward_envelope(t - ti))
                .sum();
            let bound = self.baseline_bound + gamma.value(envelope_sum);
            let wait: f64 = Exp1.sample(&mut rng);
            t += wait / bound;
            if t > self.horizon {
                break;
            }
            let intensity = self.model.intensity_unchecked(&jumps, t);
            if intensity > bound * (1.0 + 1e-12) {
                return Err(Error::EnvelopeViolation {
                    time: t,
                    intensity,
                    bound,
                });
            }
            debug_assert!((0.0..=1.0 + 1e-12).contains(&(intensity / bound)));
            let u: f64 = rng.random();
            if u * bound <= intensity && jumps.last().is_none_or(|&last| t > last) {
                jumps.push(t);
            }
        }
        Ok(HawkesPath {
            horizon: self.horizon,
            jump_times: jumps,
        })
    }
}

/// Paths for a contiguous index range under one master seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub master_seed: u64,
    pub first_index: u64,
    pub paths: Vec<HawkesPath>,
}

impl PathBatch {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn horizon(&self) -> Option<f64> {
        self.paths.first().map(HawkesPath::horizon)
    }

    /// `(path_index, path)` pairs.
    pub fn indexed(&self) -> impl Iterator<Item = (u64, &HawkesPath)> {
        (self.first_index..).zip(self.paths.iter())
    }

    /// Optional path dump: `path_index,jump_ordinal,jump_time`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["path_index", "jump_ordinal", "jump_time"])?;
        for (idx, path) in self.indexed() {
            for (j, t) in path.jump_times().iter().enumerate() {
                w.write_record([idx.to_string(), (j + 1).to_string(), t.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulates paths `0..n_paths`. Output is bit-identical for any parallelism.
pub fn simulate_batch(
    model: &HawkesModel,
    horizon: f64,
    master_seed: u64,
    n_paths: usize,
    parallelism: Parallelism,
) -> Result<PathBatch> {
    if n_paths == 0 {
        return input("n_paths must be at least 1");
    }
    simulate_range(model, horizon, master_seed, 0..n_paths as u64, parallelism)
}

/// Simulates the paths with indices in `range`.
pub fn simulate_range(
    model: &HawkesModel,
    horizon: f64,
    master_seed: u64,
    range: Range<u64>,
    parallelism: Parallelism,
) -> Result<PathBatch> {
    let thinning = Thinning::new(model, horizon)?;
    let first_index = range.start;
    let results = map_indexed(range, parallelism, |i| {
        thinning.run(RngStream::new(master_seed, i))
    });
    let paths = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(PathBatch {
        master_seed,
        first_index,
        paths,
    })
}

/// `Λ_t = ∫₀ᵗ λ*(s) ds` along `path`.
pub fn compensator(model: &HawkesModel, path: &HawkesPath, t: f64) -> Result<f64> {
    if !(0.0..=path.horizon()).contains(&t) {
        return input(format!(
            "compensator time {t} outside [0, {}]",
            path.horizon()
        ));
    }
    Ok(integrated_intensity(model, path.jump_times(), t))
}

/// `∫₀ᵗ λ*(s; times) ds` for sorted `times`. Closed form for a linear link,
/// adaptive Simpson per inter-jump interval otherwise.
pub(crate) fn integrated_intensity(model: &HawkesModel, times: &[f64], t: f64) -> f64 {
    let base = model.baseline.integral(t);
    if model.nonlinearity.is_linear() {
        let jumps: f64 = times
            .iter()
            .take_while(|&&ti| ti < t)
            .map(|&ti| model.kernel.integral(t - ti))
            .sum();
        return base + jumps;
    }
    base + integrated_link(model, times, t)
}

/// `∫₀ᵗ γ(Σ_{t_i < s} μ(s − t_i)) ds`, integrating each smooth piece separately.
pub(crate) fn integrated_link(model: &HawkesModel, times: &[f64], t: f64) -> f64 {
    let mut total = 0.0;
    let active: Vec<f64> = times.iter().copied().take_while(|&ti| ti < t).collect();
    for k in 0..active.len() {
        let a = active[k];
        let b = active.get(k + 1).copied().unwrap_or(t);
        let prefix = &active[..=k];
        let f = |s: f64| {
            let exc: f64 = prefix.iter().map(|&ti| model.kernel.value(s - ti)).sum();
            model.nonlinearity.value(exc)
        };
        total += adaptive_simpson(f, a, b, COMPENSATOR_TOL);
    }
    total
}
