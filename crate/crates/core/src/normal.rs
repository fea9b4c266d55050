//! Standard normal distribution helpers and Gauss-Hermite quadrature.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this point `erfc` underflows, so the log-CDF switches to its
/// asymptotic series.
const LOG_CDF_ASYMPTOTIC: f64 = -37.0;

pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

pub fn log_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Standard normal CDF.
pub fn cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// `log Phi(z)`, accurate deep into the lower tail.
pub fn log_cdf(z: f64) -> f64 {
    if z > 5.0 {
        // Phi(z) = 1 - Phi(-z); log1p keeps the tiny complement.
        (-cdf(-z)).ln_1p()
    } else if z > LOG_CDF_ASYMPTOTIC {
        cdf(z).ln()
    } else {
        log_pdf(z) - (-z).ln() + mills_series(z).ln()
    }
}

/// `d/dz log Phi(z) = phi(z) / Phi(z)`.
pub fn log_cdf_grad(z: f64) -> f64 {
    if z > LOG_CDF_ASYMPTOTIC {
        (log_pdf(z) - log_cdf(z)).exp()
    } else {
        -z / mills_series(z)
    }
}

/// `(log Phi(z), d/dz log Phi(z))` sharing one CDF evaluation.
pub fn log_cdf_with_grad(z: f64) -> (f64, f64) {
    if z > 5.0 {
        let tail = cdf(-z);
        ((-tail).ln_1p(), pdf(z) / (1.0 - tail))
    } else if z > LOG_CDF_ASYMPTOTIC {
        let c = cdf(z);
        (c.ln(), pdf(z) / c)
    } else {
        let series = mills_series(z);
        (log_pdf(z) - (-z).ln() + series.ln(), -z / series)
    }
}

// 1 - 1/z^2 + 3/z^4 - 15/z^6 + ..., truncated; only used for |z| > 37.
fn mills_series(z: f64) -> f64 {
    let inv = 1.0 / (z * z);
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..8 {
        term *= -((2 * n - 1) as f64) * inv;
        sum += term;
    }
    sum
}

/// Gauss-Hermite rule for integrals against `exp(-x^2)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes by Newton iteration on the orthonormal Hermite recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature needs at least one node");
        let pim4 = PI.powf(-0.25);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0_f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let step = p1 / pp;
                z -= step;
                if step.abs() <= 1e-15 {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Self { nodes, weights }
    }

    /// `E[g(X)]` for `X ~ N(mean, sd^2)`.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mean: f64, sd: f64, mut g: F) -> f64 {
        let scale = std::f64::consts::SQRT_2 * sd;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * g(mean + scale * x))
            .sum::<f64>()
            / PI.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_values() {
        assert_eq!(cdf(0.0), 0.5);
        assert!(cdf(-200.0) < 1e-30);
        assert_close!(cdf(1.959963984540054), 0.975, 1e-12);
    }

    #[test]
    fn log_cdf_matches_reference_values() {
        // Reference values from an arbitrary-precision evaluation.
        assert_close!(log_cdf(0.0), -std::f64::consts::LN_2, 1e-15);
        assert_close!(log_cdf(-10.0), -53.23128515051247, 1e-9);
        assert_close!(log_cdf(-40.0), -804.6084420137538, 1e-9);
        let upper = log_cdf(20.0 * 2f64.tanh());
        assert!(upper <= 0.0 && upper > -1e-80);
        assert!((log_cdf(8.0) - (-6.22096057427178e-16)).abs() < 1e-25);
    }

    #[test]
    fn log_cdf_grad_is_continuous_at_switch() {
        let a = log_cdf_grad(LOG_CDF_ASYMPTOTIC + 1e-9);
        let b = log_cdf_grad(LOG_CDF_ASYMPTOTIC - 1e-9);
        assert!((a - b).abs() / a.abs() < 1e-8);
        assert_close!(log_cdf_grad(0.0), 2.0 * pdf(0.0), 1e-15);
    }

    #[test]
    fn combined_log_cdf_matches_parts() {
        for z in [-60.0, -37.5, -36.5, -3.0, 0.0, 2.0, 5.5, 9.0] {
            let (v, g) = log_cdf_with_grad(z);
            assert_close!(v, log_cdf(z), 1e-12 * log_cdf(z).abs().max(1e-300));
            assert_close!(g, log_cdf_grad(z), 1e-12 * log_cdf_grad(z).abs().max(1e-300));
        }
    }

    #[test]
    fn gauss_hermite_moments() {
        let gh = GaussHermite::new(32);
        assert_close!(gh.weights.iter().sum::<f64>(), PI.sqrt(), 1e-12);
        assert_close!(gh.expect(1.5, 2.0, |x| x), 1.5, 1e-12);
        assert_close!(gh.expect(1.5, 2.0, |x| x * x), 1.5 * 1.5 + 4.0, 1e-10);
        assert_close!(gh.expect(0.0, 1.0, |x| x.powi(4)), 3.0, 1e-10);
        // E[Phi(X)] for X ~ N(m, s^2) is Phi(m / sqrt(1 + s^2)).
        assert_close!(gh.expect(0.7, 1.3, cdf), cdf(0.7 / (1.0f64 + 1.69).sqrt()), 1e-9);
    }
}
