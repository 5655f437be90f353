//! Replicate seeding, ordered parallel evaluation and summary statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lattice::NoiseField;

/// Mean with its standard error, plus how many runs fed it and how many
/// were set aside (rejected or extinct).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub mean: f64,
    pub stderr: f64,
    pub reps: usize,
    pub excluded: usize,
}

impl EstimateWithCI {
    /// Sample mean and `sd / sqrt(len)`; summation runs in slice order.
    pub fn from_samples(samples: &[f64], excluded: usize) -> Self {
        let reps = samples.len();
        assert!(reps >= 1, "estimate needs at least one sample");
        let mean = samples.iter().sum::<f64>() / reps as f64;
        let stderr = if reps > 1 {
            let ss: f64 = samples.iter().map(|x| (x - mean).powi(2)).sum();
            (ss / (reps - 1) as f64).sqrt() / (reps as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, reps, excluded }
    }

    /// Binomial frequency `hits / trials` with `sqrt(q (1 - q) / trials)`.
    pub fn from_counts(hits: usize, trials: usize, excluded: usize) -> Self {
        assert!(trials >= 1);
        let q = hits as f64 / trials as f64;
        Self {
            mean: q,
            stderr: (q * (1.0 - q) / trials as f64).sqrt(),
            reps: trials,
            excluded,
        }
    }

    pub fn combined_stderr(&self, other: &EstimateWithCI) -> f64 {
        self.stderr.hypot(other.stderr)
    }
}

/// Deterministic replicate seeds derived from one experiment seed.
///
/// Replicate `i` uses the field seeded by `splitmix(seed ^ splitmix(i))`, so
/// a replicate's field depends only on `(seed, i)`. Evaluating the same plan
/// at different `p` therefore reuses the same noise: the monotone coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicatePlan {
    pub seed: u64,
    pub reps: usize,
}

impl ReplicatePlan {
    pub fn new(seed: u64, reps: usize) -> Self {
        Self { seed, reps }
    }

    pub fn replicate_seed(&self, index: usize) -> u64 {
        mix64(self.seed ^ mix64(index as u64 ^ 0xA5A5_5A5A_C3C3_3C3C))
    }

    pub fn field(&self, index: usize) -> NoiseField {
        NoiseField::new(self.replicate_seed(index))
    }

    /// Runs `job` for every replicate on the current rayon pool and returns
    /// results in replicate order, whatever the completion order was.
    pub fn map<T, F>(&self, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, NoiseField) -> T + Sync,
    {
        self.map_range(0, self.reps, job)
    }

    pub fn map_range<T, F>(&self, start: usize, end: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, NoiseField) -> T + Sync,
    {
        (start..end)
            .into_par_iter()
            .map(|i| job(i, self.field(i)))
            .collect()
    }
}

pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Delete-one jackknife for the pooled ratio `sum(num) / sum(den)`.
/// Returns `(ratio, stderr)`.
pub fn jackknife_ratio(num: &[f64], den: &[f64]) -> (f64, f64) {
    assert_eq!(num.len(), den.len());
    let k = num.len();
    let (sn, sd): (f64, f64) = (num.iter().sum(), den.iter().sum());
    let ratio = sn / sd;
    if k < 2 {
        return (ratio, 0.0);
    }
    let loo: Vec<f64> = num
        .iter()
        .zip(den)
        .map(|(x, t)| (sn - x) / (sd - t))
        .collect();
    let mean = loo.iter().sum::<f64>() / k as f64;
    let var = loo.iter().map(|r| (r - mean).powi(2)).sum::<f64>() * (k - 1) as f64 / k as f64;
    (ratio, var.sqrt())
}

/// Ordinary least squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2);
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples_have_zero_stderr() {
        let e = EstimateWithCI::from_samples(&[1.0; 10], 0);
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn stderr_of_known_samples() {
        let e = EstimateWithCI::from_samples(&[1.0, 2.0, 3.0, 4.0], 1);
        assert_eq!(e.mean, 2.5);
        // sd = sqrt(5/3), stderr = sd / 2
        assert!((e.stderr - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(e.excluded, 1);
    }

    #[test]
    fn jackknife_of_proportional_data_is_exact() {
        let den = [1.0, 2.0, 3.0, 5.0];
        let num: Vec<f64> = den.iter().map(|t| 0.5 * t).collect();
        let (r, se) = jackknife_ratio(&num, &den);
        assert_eq!(r, 0.5);
        assert!(se < 1e-15);
    }

    #[test]
    fn replicate_map_keeps_order() {
        let plan = ReplicatePlan::new(9, 64);
        let seeds = plan.map(|i, f| (i, f.seed()));
        for (i, (j, s)) in seeds.iter().enumerate() {
            assert_eq!(i, *j);
            assert_eq!(*s, plan.replicate_seed(i));
        }
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.25 * v).collect();
        let (s, c) = linear_fit(&x, &y);
        assert!((s + 0.25).abs() < 1e-12 && (c - 3.0).abs() < 1e-12);
    }
}
