//! Binning and jackknife error estimation for correlated Monte Carlo
//! series.
//!
//! The accumulator keeps pairwise-merged bin hierarchies online, so a
//! run never stores the full sample series: level `l` holds statistics of
//! bin means at bin size `2^l`. The standard error is read from the
//! deepest level with enough bins to be trustworthy, and the integrated
//! autocorrelation time follows from the ratio of binned to naive
//! variance.

/// Online mean/variance accumulator (Welford).
#[derive(Clone, Debug, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.m2 / (self.count - 1) as f64
    }
}

/// Streaming binning accumulator with pairwise bin merging.
#[derive(Clone, Debug, Default)]
pub struct BinningAccumulator {
    levels: Vec<(Moments, Option<f64>)>,
}

/// Require this many bins before trusting a binning level.
const MIN_BINS: u64 = 32;

impl BinningAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        let mut value = x;
        let mut level = 0usize;
        loop {
            if self.levels.len() == level {
                self.levels.push((Moments::default(), None));
            }
            self.levels[level].0.push(value);
            match self.levels[level].1.take() {
                Some(pending) => {
                    value = 0.5 * (pending + value);
                    level += 1;
                }
                None => {
                    self.levels[level].1 = Some(value);
                    break;
                }
            }
        }
    }

    pub fn count(&self) -> u64 {
        self.levels.first().map_or(0, |(m, _)| m.count)
    }

    pub fn mean(&self) -> f64 {
        self.levels.first().map_or(0.0, |(m, _)| m.mean)
    }

    /// Naive (uncorrelated) variance of the mean.
    pub fn naive_variance_of_mean(&self) -> f64 {
        let m = &self.levels[0].0;
        m.variance() / m.count as f64
    }

    /// Variance of the mean at the selected binning level: the largest
    /// estimate over levels with at least [`MIN_BINS`] bins, which is the
    /// plateau value once bins decorrelate.
    pub fn binned_variance_of_mean(&self) -> f64 {
        let mut best = self.naive_variance_of_mean();
        for (m, _) in &self.levels {
            if m.count >= MIN_BINS {
                best = best.max(m.variance() / m.count as f64);
            }
        }
        best
    }

    pub fn stderr(&self) -> f64 {
        self.binned_variance_of_mean().sqrt()
    }

    /// Integrated autocorrelation time from the binned/naive variance
    /// ratio; 0.5 for uncorrelated data.
    pub fn tau_int(&self) -> f64 {
        let naive = self.naive_variance_of_mean();
        if naive == 0.0 {
            return 0.5;
        }
        0.5 * self.binned_variance_of_mean() / naive
    }
}

/// Jackknife standard error of the mean over pre-binned values.
pub fn jackknife_stderr(bins: &[f64]) -> f64 {
    let n = bins.len();
    if n < 2 {
        return 0.0;
    }
    let total: f64 = bins.iter().sum();
    let full_mean = total / n as f64;
    let mut sum_sq = 0.0;
    for &b in bins {
        let leave_out = (total - b) / (n - 1) as f64;
        sum_sq += (leave_out - full_mean) * (leave_out - full_mean);
    }
    ((n - 1) as f64 / n as f64 * sum_sq).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn uncorrelated_series_tau_half() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut acc = BinningAccumulator::new();
        for _ in 0..4096 {
            acc.push(rng.gen::<f64>());
        }
        assert!((acc.mean() - 0.5).abs() < 0.02);
        assert!(acc.tau_int() < 1.0, "tau {}", acc.tau_int());
        // stderr close to sqrt(1/12/n)
        let expect = (1.0f64 / 12.0 / 4096.0).sqrt();
        assert!((acc.stderr() - expect).abs() < 0.5 * expect);
    }

    #[test]
    fn correlated_series_inflates_error() {
        // AR(1) with strong correlation: binned error must exceed naive
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let rho: f64 = 0.9;
        let mut acc = BinningAccumulator::new();
        let mut x = 0.0;
        for _ in 0..65536 {
            x = rho * x + (1.0 - rho * rho).sqrt() * (rng.gen::<f64>() - 0.5);
            acc.push(x);
        }
        // tau_int for AR(1) is (1+rho)/(2(1-rho)) = 9.5
        let tau = acc.tau_int();
        assert!(tau > 4.0 && tau < 20.0, "tau {tau}");
        assert!(acc.stderr() > 2.0 * acc.naive_variance_of_mean().sqrt());
    }

    #[test]
    fn jackknife_matches_direct_for_iid() {
        let bins: Vec<f64> = (0..64).map(|i| (i % 7) as f64).collect();
        let jk = jackknife_stderr(&bins);
        let n = bins.len() as f64;
        let mean = bins.iter().sum::<f64>() / n;
        let var: f64 = bins.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / (n - 1.0);
        let direct = (var / n).sqrt();
        assert!((jk - direct).abs() < 1e-12);
    }

    #[test]
    fn stderr_positive_with_two_samples() {
        let mut acc = BinningAccumulator::new();
        acc.push(1.0);
        acc.push(2.0);
        assert!(acc.stderr() > 0.0);
    }
}
