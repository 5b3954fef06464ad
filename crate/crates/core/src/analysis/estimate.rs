use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided confidence level of every reported interval.
pub const CONFIDENCE: f64 = 0.99;

/// Success rate with a Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub successes: u64,
    pub trials: u64,
    pub exact_reference: Option<f64>,
}

fn z_quantile(confidence: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + confidence / 2.0)
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(trials > 0, "Wilson interval needs at least one trial");
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = z_quantile(confidence);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

impl Estimate {
    pub fn from_counts(successes: u64, trials: u64, exact_reference: Option<f64>) -> Self {
        let (ci_low, ci_high) = wilson_interval(successes, trials, CONFIDENCE);
        Self { point: successes as f64 / trials as f64, ci_low, ci_high, successes, trials, exact_reference }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }

    /// Whether the interval covers the exact reference; `None` without one.
    pub fn covers_reference(&self) -> Option<bool> {
        self.exact_reference.map(|r| self.contains(r))
    }

    pub fn failures(&self) -> u64 {
        self.trials - self.successes
    }

    /// Whether the two intervals are disjoint.
    pub fn separated_from(&self, other: &Estimate) -> bool {
        self.ci_high < other.ci_low || other.ci_high < self.ci_low
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_is_the_usual_value() {
        assert!((z_quantile(0.99) - 2.5758293035489).abs() < 1e-9);
    }

    #[test]
    fn interval_brackets_the_point() {
        for (s, n) in [(0, 10), (10, 10), (3, 10), (500, 1000), (1, 100_000)] {
            let e = Estimate::from_counts(s, n, None);
            assert!(e.ci_low <= e.point && e.point <= e.ci_high);
            assert!(e.ci_low >= 0.0 && e.ci_high <= 1.0);
        }
    }

    #[test]
    fn known_interval() {
        // 50/100 at 99%: centre 0.5, half-width z·0.05/(1+z²/100)·sqrt(1+z²/100).
        let (lo, hi) = wilson_interval(50, 100, 0.99);
        let z = z_quantile(0.99);
        let half = z * (0.25 / 100.0 + z * z / 40_000.0).sqrt() / (1.0 + z * z / 100.0);
        assert!((lo - (0.5 - half)).abs() < 1e-12);
        assert!((hi - (0.5 + half)).abs() < 1e-12);
    }

    #[test]
    fn all_successes_touch_one() {
        let e = Estimate::from_counts(1000, 1000, Some(1.0));
        assert_eq!(e.ci_high, 1.0);
        assert_eq!(e.failures(), 0);
        assert_eq!(e.covers_reference(), Some(true));
    }
}
