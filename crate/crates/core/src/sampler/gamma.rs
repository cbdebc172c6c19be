use rand::Rng;
use rand_distr::{Open01, StandardNormal};

use crate::error::{Error, Result};

/// Draws from `Gamma(shape, rate)` (density `∝ t^{shape−1} e^{−rate·t}`, mean
/// `shape / rate`).
///
/// Shapes `≥ 1` use the Marsaglia–Tsang squeeze/rejection method; smaller
/// shapes draw at `shape + 1` and rescale by `U^{1/shape}`.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0) || !shape.is_finite() {
        return Err(Error::Domain {
            name: "shape",
            value: shape,
        });
    }
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::Domain {
            name: "rate",
            value: rate,
        });
    }
    if shape < 1.0 {
        let boost: f64 = rng.sample(Open01);
        return Ok(standard_gamma_large(shape + 1.0, rng) * libm::pow(boost, 1.0 / shape) / rate);
    }
    Ok(standard_gamma_large(shape, rng) / rate)
}

/// Unit-rate gamma variate for `shape ≥ 1`.
fn standard_gamma_large<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / libm::sqrt(9.0 * d);
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let t = 1.0 + c * z;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u: f64 = rng.sample(Open01);
        let z2 = z * z;
        // squeeze
        if u < 1.0 - 0.0331 * z2 * z2 {
            return d * v;
        }
        if libm::log(u) < 0.5 * z2 + d * (1.0 - v + libm::log(v)) {
            return d * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments(shape: f64, rate: f64, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n).map(|_| sample_gamma(shape, rate, &mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        (mean, var)
    }

    #[test]
    fn exponential_special_case() {
        let n = 100_000;
        let (mean, _) = moments(1.0, 2.0, n, 1);
        // sd of Exp(2) is 0.5
        let se = 0.5 / libm::sqrt(n as f64);
        assert!((mean - 0.5).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn large_shape_moments() {
        let n = 100_000;
        let (shape, rate) = (450.0, 3.0);
        let (mean, var) = moments(shape, rate, n, 2);
        let true_var = shape / (rate * rate);
        let se_mean = libm::sqrt(true_var / n as f64);
        // var of the sample variance: (μ4 − σ⁴)/n with μ4 = σ⁴(3 + 6/shape)
        let se_var = true_var * libm::sqrt((2.0 + 6.0 / shape) / n as f64);
        assert!((mean - 150.0).abs() < 3.0 * se_mean, "{mean}");
        assert!((var - 50.0).abs() < 3.0 * se_var, "{var}");
    }

    #[test]
    fn small_shape_mean() {
        let n = 100_000;
        let (shape, rate) = (0.3, 1.5);
        let (mean, _) = moments(shape, rate, n, 3);
        let se = libm::sqrt(shape / (rate * rate) / n as f64);
        assert!((mean - shape / rate).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn seed_reproduces_sequence() {
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            (0..50)
                .map(|_| sample_gamma(3.5, 0.25, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn invalid_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_gamma(0.0, 1.0, &mut rng).is_err());
        assert!(sample_gamma(1.0, 0.0, &mut rng).is_err());
        assert!(sample_gamma(-2.0, 1.0, &mut rng).is_err());
        assert!(sample_gamma(1.0, f64::NAN, &mut rng).is_err());
    }
}
