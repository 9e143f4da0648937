use std::f64::consts::{LN_2, PI, SQRT_2};

use nalgebra::DVector;
use libm::erfc;

use super::{Prior, TargetModel};
use crate::posterior::Hyperparameters;

/// Coefficient vectors of the three skewed bivariate benchmark targets.
pub const REFERENCE_COEFFICIENTS: [[f64; 6]; 3] = [
    [-3.0, 1.0, -1.0, -1.0, -1.0, -1.0],
    [0.0, -2.0, -4.0, -1.0, -3.0, 0.0],
    [1.0, 0.0, 2.0, 1.0, -1.0, 0.0],
];

// below this argument ln Phi switches to its asymptotic expansion
const ASYMPTOTIC_BELOW: f64 = -30.0;

/// `1 - 1/h^2 + 3/h^4 - 15/h^6 + 105/h^8`, the leading terms of the Mills
/// ratio expansion.
fn mills_series(h: f64) -> f64 {
    let u = 1.0 / (h * h);
    1.0 + u * (-1.0 + u * (3.0 + u * (-15.0 + u * 105.0)))
}

/// `ln Phi(h)` for the standard normal CDF, accurate in both tails.
pub fn log_normal_cdf(h: f64) -> f64 {
    if h < ASYMPTOTIC_BELOW {
        -0.5 * h * h - (-h).ln() - 0.5 * (2.0 * PI).ln() + mills_series(h).ln()
    } else if h > 0.0 {
        (-0.5 * erfc(h / SQRT_2)).ln_1p()
    } else {
        (0.5 * erfc(-h / SQRT_2)).ln()
    }
}

/// `phi(h) / Phi(h)`.
fn inverse_mills(h: f64) -> f64 {
    if h < ASYMPTOTIC_BELOW {
        -h / mills_series(h)
    } else {
        let log_pdf = -0.5 * h * h - 0.5 * (2.0 * PI).ln();
        (log_pdf - log_normal_cdf(h)).exp()
    }
}

/// `h(w) = (w1, w2, w1 w2^2, w1^2 w2, w1^3, w2^3) a`; odd in `w`.
pub fn azzalini_h(w: [f64; 2], a: &[f64; 6]) -> f64 {
    let [x, y] = w;
    a[0] * x + a[1] * y + a[2] * x * y * y + a[3] * x * x * y + a[4] * x * x * x + a[5] * y * y * y
}

fn grad_h(w: [f64; 2], a: &[f64; 6]) -> [f64; 2] {
    let [x, y] = w;
    [
        a[0] + a[2] * y * y + 2.0 * a[3] * x * y + 3.0 * a[4] * x * x,
        a[1] + 2.0 * a[2] * x * y + a[3] * x * x + 3.0 * a[5] * y * y,
    ]
}

/// Skewed bivariate density `2 N(w | 0, I_2) Phi(h(w))`.
///
/// Used as a fitting target with a flat prior: its "log-likelihood" is the
/// normalised log-density itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AzzaliniTarget {
    a: [f64; 6],
}

impl AzzaliniTarget {
    pub fn new(a: [f64; 6]) -> Self {
        AzzaliniTarget { a }
    }

    pub fn coefficients(&self) -> &[f64; 6] {
        &self.a
    }

    pub fn log_density(&self, w: [f64; 2]) -> f64 {
        LN_2 - (2.0 * PI).ln() - 0.5 * (w[0] * w[0] + w[1] * w[1])
            + log_normal_cdf(azzalini_h(w, &self.a))
    }

    pub fn grad_log_density(&self, w: [f64; 2]) -> [f64; 2] {
        let r = inverse_mills(azzalini_h(w, &self.a));
        let gh = grad_h(w, &self.a);
        [-w[0] + r * gh[0], -w[1] + r * gh[1]]
    }
}

fn pair(w: &DVector<f64>) -> [f64; 2] {
    [w[0], w[1]]
}

impl TargetModel for AzzaliniTarget {
    fn dim(&self) -> usize {
        2
    }

    fn log_lik(&self, w: &DVector<f64>, _hyper: &Hyperparameters) -> f64 {
        self.log_density(pair(w))
    }

    fn grad_log_lik(&self, w: &DVector<f64>, _hyper: &Hyperparameters) -> DVector<f64> {
        let g = self.grad_log_density(pair(w));
        DVector::from_vec(g.to_vec())
    }

    fn prior(&self) -> Prior {
        Prior::Flat
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn origin_value() {
        for a in REFERENCE_COEFFICIENTS {
            let v = AzzaliniTarget::new(a).log_density([0.0, 0.0]);
            assert!((v + (2.0 * PI).ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn h_is_odd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a: [f64; 6] = std::array::from_fn(|_| rng.random_range(-5.0..5.0));
            let w = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
            assert_eq!(azzalini_h([-w[0], -w[1]], &a), -azzalini_h(w, &a));
        }
    }

    #[test]
    fn log_cdf_is_continuous_and_finite_in_tails() {
        let h = ASYMPTOTIC_BELOW;
        let direct = (0.5 * erfc(-h / SQRT_2)).ln();
        assert!((log_normal_cdf(h - 1e-12) - direct).abs() < 1e-9);
        for h in [-1e4, -300.0, -40.0, -5.0, 0.0, 5.0, 40.0] {
            assert!(log_normal_cdf(h).is_finite());
        }
        assert!((log_normal_cdf(0.0) - 0.5f64.ln()).abs() < 1e-15);
        // Phi(-1.959963984540054) = 0.025
        assert!((log_normal_cdf(-1.959963984540054) - 0.025f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn inverse_mills_is_continuous() {
        let below = inverse_mills(ASYMPTOTIC_BELOW - 1e-9);
        let above = inverse_mills(ASYMPTOTIC_BELOW + 1e-9);
        assert!((below - above).abs() / above < 1e-9);
    }
}
