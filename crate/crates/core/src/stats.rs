//! Summation, Monte Carlo statistics and log-log rate fits.

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use serde::{Deserialize, Serialize};

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut s = CompensatedSum::new();
    s.extend(iter);
    s.value()
}

/// Sum whose result does not depend on the order of the terms: terms are
/// sorted by their bit pattern before a compensated accumulation.
pub fn order_invariant_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(|a, b| a.total_cmp(b));
    compensated_sum(terms)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        if xs.len() < 2 {
            return Err(Error::Statistics(format!(
                "need at least 2 samples, got {}",
                xs.len()
            )));
        }
        let n = xs.len() as f64;
        let mean = compensated_sum(xs.iter().copied()) / n;
        let var = compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0);
        Ok(Self {
            mean,
            std_err: (var / n).sqrt(),
            samples: xs.len(),
        })
    }

    /// Number of standard errors separating `self.mean` from `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.std_err == 0.0 {
            if self.mean == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - target) / self.std_err
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    compensated_sum(xs.iter().copied()) / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    compensated_sum(xs.iter().map(|x| (x - m) * (x - m))) / (xs.len() as f64 - 1.0)
}

/// Standard error of the mean of a correlated series by non-overlapping batch
/// means (`batches` batches, default 20 when `None`).
pub fn batch_means(xs: &[f64], batches: Option<usize>) -> Result<Estimate> {
    let b = batches.unwrap_or(20);
    if xs.len() < 2 * b {
        return Err(Error::Statistics(format!(
            "series of length {} too short for {b} batches",
            xs.len()
        )));
    }
    let size = xs.len() / b;
    let means: Vec<f64> = (0..b).map(|i| mean(&xs[i * size..(i + 1) * size])).collect();
    let est = Estimate::from_samples(&means)?;
    Ok(Estimate {
        mean: mean(&xs[..b * size]),
        std_err: est.std_err,
        samples: xs.len(),
    })
}

/// Effective sample size via Geyer's initial positive sequence.
pub fn effective_sample_size(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(xs);
    let c0 = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return n as f64;
    }
    let acf = |lag: usize| -> f64 {
        (0..n - lag)
            .map(|i| (xs[i] - m) * (xs[i + lag] - m))
            .sum::<f64>()
            / (n as f64 * c0)
    };
    let mut tau = 1.0;
    let mut lag = 1;
    while lag + 1 < n {
        let pair = acf(lag) + acf(lag + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    n as f64 / tau
}

/// Geweke z-score comparing the mean of the first 10% of a chain with the
/// mean of its last 50%, each with a batch-means standard error.
pub fn geweke_z(xs: &[f64]) -> Result<f64> {
    let n = xs.len();
    let a = &xs[..n / 10];
    let b = &xs[n / 2..];
    let ea = batch_means(a, Some(10))?;
    let eb = batch_means(b, Some(10))?;
    let se = (ea.std_err.powi(2) + eb.std_err.powi(2)).sqrt();
    Ok((ea.mean - eb.mean) / se)
}

/// Percentile bootstrap interval for the mean of `xs`.
pub fn bootstrap_mean_ci(
    xs: &[f64],
    resamples: usize,
    level: f64,
    rng: &mut StreamRng,
) -> (f64, f64) {
    let n = xs.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut s = CompensatedSum::new();
            for _ in 0..n {
                s.add(xs[rng.index(n)]);
            }
            s.value() / n as f64
        })
        .collect();
    means.sort_by(|a, b| a.total_cmp(b));
    let lo = ((1.0 - level) / 2.0 * resamples as f64) as usize;
    let hi = (((1.0 + level) / 2.0) * resamples as f64) as usize;
    (means[lo.min(resamples - 1)], means[hi.min(resamples - 1)])
}

/// Least-squares line through `(log x, log y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Standard error of the slope (zero for exact fits and for 2 points).
    pub slope_std_err: f64,
}

/// Fits `log error = slope * log parameter + intercept`.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.len() < 3 {
        return Err(Error::Domain(format!(
            "rate fit needs at least 3 pairs, got {}",
            pairs.len()
        )));
    }
    if let Some((p, e)) = pairs.iter().find(|(p, e)| !(*p > 0.0 && *e > 0.0)) {
        return Err(Error::Domain(format!(
            "rate fit needs positive values, got ({p}, {e})"
        )));
    }
    let pts: Vec<(f64, f64)> = pairs.iter().map(|(p, e)| (p.ln(), e.ln())).collect();
    Ok(linear_fit(&pts))
}

pub(crate) fn linear_fit(pts: &[(f64, f64)]) -> RateFit {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    let slope_std_err = if pts.len() > 2 {
        (ss_res / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    RateFit {
        slope,
        intercept,
        r_squared,
        slope_std_err,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamId;

    #[test]
    fn compensated_beats_naive() {
        let xs: Vec<f64> = std::iter::once(1e16)
            .chain(std::iter::repeat_n(1.0, 1000))
            .chain(std::iter::once(-1e16))
            .collect();
        assert_eq!(compensated_sum(xs.iter().copied()), 1000.0);
    }

    #[test]
    fn order_invariant_is_bitwise_stable() {
        let mut rng = StreamId::new(1, 1).rng();
        let xs: Vec<f64> = (0..257).map(|_| rng.normal() * 1e3).collect();
        let mut ys = xs.clone();
        ys.rotate_left(100);
        assert_eq!(
            order_invariant_sum(xs).to_bits(),
            order_invariant_sum(ys).to_bits()
        );
    }

    #[test]
    fn fit_rate_exact_power() {
        let pairs: Vec<(f64, f64)> = [0.5, 0.25, 0.125, 0.0625]
            .iter()
            .map(|&e| (e, 3.0 * e))
            .collect();
        let fit = fit_rate(&pairs).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_rate_noisy_half_power() {
        let mut rng = StreamId::new(11, 0).rng();
        let pairs: Vec<(f64, f64)> = (0..8)
            .map(|i| {
                let e = 2f64.powi(-i);
                (e, 2.0 * e.sqrt() * (1.0 + 0.01 * rng.normal()))
            })
            .collect();
        let fit = fit_rate(&pairs).unwrap();
        assert!((0.45..=0.55).contains(&fit.slope), "{}", fit.slope);
    }

    #[test]
    fn fit_rate_rejects_two_points_and_nonpositive() {
        assert!(matches!(
            fit_rate(&[(1.0, 1.0), (2.0, 2.0)]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            fit_rate(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ess_of_iid_is_close_to_n() {
        let mut rng = StreamId::new(5, 0).rng();
        let xs: Vec<f64> = (0..4000).map(|_| rng.normal()).collect();
        let ess = effective_sample_size(&xs);
        assert!(ess > 2500.0 && ess < 6000.0, "{ess}");
    }

    #[test]
    fn estimate_standard_error() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let e = Estimate::from_samples(&xs).unwrap();
        assert_eq!(e.mean, 2.5);
        assert!((e.std_err - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(Estimate::from_samples(&[1.0]).is_err());
    }
}
