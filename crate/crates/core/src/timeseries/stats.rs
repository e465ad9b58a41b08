use crate::error::{Error, Result};

use super::transform::difference;
use super::PolynomialSpec;

/// Two-sided 95% normal quantile for the white-noise band.
pub const SIGNIFICANCE_Z: f64 = 1.96;
const MAX_ORDER: usize = 5;
const MAX_DIFF: usize = 2;
pub const MIN_SUGGEST_LEN: usize = 20;
/// A difference is taken only if it shrinks the variance at least this much,
/// which corresponds to a lag-1 autocorrelation above 0.9.
pub const DIFF_VARIANCE_RATIO: f64 = 0.2;

/// Sample autocorrelations and partial autocorrelations for lags
/// `0..=max_lag` (index 0 is always 1).
pub fn acf_pacf(y: &[f64], max_lag: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = y.len();
    if n <= max_lag + 1 {
        return Err(Error::SeriesTooShort {
            needed: max_lag + 2,
            got: n,
        });
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let c0 = dev.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if c0 <= f64::EPSILON * mean.abs().max(1.0) {
        return Err(Error::DegenerateVariance);
    }
    let acf: Vec<f64> = (0..=max_lag)
        .map(|k| {
            dev[..n - k]
                .iter()
                .zip(&dev[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64
                / c0
        })
        .collect();

    // Durbin-Levinson
    let mut pacf = vec![1.0; max_lag + 1];
    let mut phi_prev: Vec<f64> = Vec::new();
    let mut v = 1.0f64;
    for k in 1..=max_lag {
        let num = acf[k] - (1..k).map(|j| phi_prev[j - 1] * acf[k - j]).sum::<f64>();
        let phi_kk = if v.abs() < 1e-300 { 0.0 } else { num / v };
        let mut phi = Vec::with_capacity(k);
        for j in 1..k {
            phi.push(phi_prev[j - 1] - phi_kk * phi_prev[k - j - 1]);
        }
        phi.push(phi_kk);
        v *= 1.0 - phi_kk * phi_kk;
        pacf[k] = phi_kk;
        phi_prev = phi;
    }
    Ok((acf, pacf))
}

fn variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
}

/// Number of leading lags (from 1) outside the band, capped.
fn cutoff(values: &[f64], band: f64) -> usize {
    values[1..]
        .iter()
        .take(MAX_ORDER)
        .take_while(|v| v.abs() > band)
        .count()
}

/// Band-rule order suggestion. Differencing is increased while it cuts the
/// variance by [`DIFF_VARIANCE_RATIO`] (up to 2); p and q are the PACF and ACF cutoffs. With a
/// period, one seasonal AR/MA term is added when the lag-s correlation is
/// significant.
pub fn suggest_orders(y: &[f64], period: Option<usize>) -> Result<PolynomialSpec> {
    if y.len() < MIN_SUGGEST_LEN {
        return Err(Error::SeriesTooShort {
            needed: MIN_SUGGEST_LEN,
            got: y.len(),
        });
    }
    if variance(y) <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let mut series = y.to_vec();
    let mut sd = 0;
    if let Some(s) = period {
        if s >= 2 && y.len() > 2 * s + MIN_SUGGEST_LEN / 2 {
            let seasonal = difference(&series, s);
            if variance(&seasonal) < DIFF_VARIANCE_RATIO * variance(&series) {
                series = seasonal;
                sd = 1;
            }
        }
    }
    let mut d = 0;
    while d < MAX_DIFF {
        let next = difference(&series, 1);
        if next.len() < MIN_SUGGEST_LEN / 2
            || variance(&next) >= DIFF_VARIANCE_RATIO * variance(&series)
        {
            break;
        }
        series = next;
        d += 1;
    }
    let n = series.len();
    let band = SIGNIFICANCE_Z / (n as f64).sqrt();
    let seasonal_lag = period.filter(|&s| s >= 2 && s + 2 < n).unwrap_or(0);
    let max_lag = MAX_ORDER.max(seasonal_lag).min(n - 2);
    let (acf, pacf) = acf_pacf(&series, max_lag)?;
    let mut spec = PolynomialSpec::new(cutoff(&pacf, band), d, cutoff(&acf, band));
    if let Some(s) = period {
        let (sp, sq) = if seasonal_lag > 0 {
            (
                usize::from(pacf[s].abs() > band),
                usize::from(acf[s].abs() > band),
            )
        } else {
            (0, 0)
        };
        spec = spec.seasonal(sp, sd, sq, s);
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn ar(coefs: &[f64], n: usize, seed: u64) -> Vec<f64> {
        let e = noise(n + 100, seed);
        let mut y = vec![0.0; n + 100];
        for t in 0..n + 100 {
            y[t] = e[t]
                + coefs
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| t > *i)
                    .map(|(i, c)| c * y[t - i - 1])
                    .sum::<f64>();
        }
        y.split_off(100)
    }

    #[test]
    fn lag_zero_is_one() {
        let (acf, pacf) = acf_pacf(&noise(50, 1), 5).unwrap();
        assert_eq!(acf[0], 1.0);
        assert_eq!(pacf[0], 1.0);
    }

    #[test]
    fn white_noise_inside_band() {
        let n = 500;
        let (acf, _) = acf_pacf(&noise(n, 2), 20).unwrap();
        let band = 1.96 / (n as f64).sqrt();
        let inside = acf[1..].iter().filter(|v| v.abs() < band).count();
        assert!(inside as f64 >= 0.9 * 20.0, "{inside}/20");
    }

    #[test]
    fn ar1_pacf() {
        let (_, pacf) = acf_pacf(&ar(&[0.8], 2000, 3), 5).unwrap();
        assert!((pacf[1] - 0.8).abs() < 0.05, "{}", pacf[1]);
        assert!(pacf[2].abs() < 0.06, "{}", pacf[2]);
    }

    #[test]
    fn constant_series_is_degenerate() {
        assert!(matches!(
            acf_pacf(&[3.0; 30], 5),
            Err(Error::DegenerateVariance)
        ));
        assert!(matches!(
            suggest_orders(&[3.0; 30], None),
            Err(Error::DegenerateVariance)
        ));
    }

    #[test]
    fn short_series() {
        assert!(matches!(
            suggest_orders(&[1.0; 10], None),
            Err(Error::SeriesTooShort { .. })
        ));
        assert!(matches!(
            acf_pacf(&[1.0, 2.0], 3),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn white_noise_needs_no_differencing() {
        assert_eq!(suggest_orders(&noise(300, 4), None).unwrap().d, 0);
    }

    #[test]
    fn trend_needs_one_difference() {
        let e = noise(200, 5);
        let y: Vec<f64> = e
            .iter()
            .enumerate()
            .map(|(t, v)| 0.5 * t as f64 + 0.3 * v)
            .collect();
        assert_eq!(suggest_orders(&y, None).unwrap().d, 1);
    }

    #[test]
    fn ar2_suggests_p2() {
        let hits = (0..50)
            .filter(|&seed| {
                suggest_orders(&ar(&[0.5, 0.3], 500, 100 + seed), None)
                    .unwrap()
                    .p
                    == 2
            })
            .count();
        assert!(hits >= 40, "{hits}/50");
    }
}
