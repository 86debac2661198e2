//! Small numerical helpers shared across modules.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

/// Standard normal quantile function.
pub fn normal_quantile(p: f64) -> f64 {
    // statrs' Normal with (0, 1) is always constructible.
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

/// Standard normal CDF, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Median of a non-empty slice (mean of the two middle values for even
/// lengths). Returns NaN for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Linear-interpolated percentile (`q` in [0, 100]) of a non-empty slice.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = (q / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Γ(m/2 + 1) for a positive integer `m`, via the half-integer recurrence.
pub fn gamma_half_plus_one(m: usize) -> f64 {
    // Γ(1) = 1, Γ(3/2) = √π / 2, Γ(x + 1) = x Γ(x).
    let (mut value, mut x) = if m % 2 == 0 {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt() / 2.0, 1.5)
    };
    let target = m as f64 / 2.0 + 1.0;
    while x + 0.5 < target {
        value *= x;
        x += 1.0;
    }
    value
}

/// Draw from Laplace(0, scale) by inverting the CDF.
pub fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    let u: f64 = rng.random::<f64>() - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn percentile_endpoints() {
        let v = [0.0, 10.0, 20.0, 30.0, 40.0];
        assert_eq!(percentile(&v, 0.0), 0.0);
        assert_eq!(percentile(&v, 100.0), 40.0);
        assert!((percentile(&v, 60.0) - 24.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_values() {
        // Γ(2) = 1, Γ(5/2) = 3√π/4, Γ(3) = 2, Γ(7/2) = 15√π/8
        let sp = std::f64::consts::PI.sqrt();
        assert!((gamma_half_plus_one(2) - 1.0).abs() < 1e-15);
        assert!((gamma_half_plus_one(3) - 0.75 * sp).abs() < 1e-15);
        assert!((gamma_half_plus_one(4) - 2.0).abs() < 1e-15);
        assert!((gamma_half_plus_one(5) - 15.0 * sp / 8.0).abs() < 1e-14);
        assert!((gamma_half_plus_one(1) - sp / 2.0).abs() < 1e-15);
    }

    #[test]
    fn laplace_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_laplace(&mut rng, 0.5)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let mean_abs = draws.iter().map(|d| d.abs()).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01);
        // E|X| = scale
        assert!((mean_abs - 0.5).abs() < 0.01);
    }

    #[test]
    fn quantile_and_cdf_are_inverse() {
        for p in [1e-6, 0.01, 0.2, 0.5, 0.9, 0.999] {
            assert!((normal_cdf(normal_quantile(p)) - p).abs() < 1e-9 * p.max(1e-3));
        }
    }
}
