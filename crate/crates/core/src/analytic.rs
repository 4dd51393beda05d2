//! Closed forms for the lognormal index and Gauss-Hermite quadrature.

use statrs::function::erf::erfc;

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E[(K - R_T)^+]` for `R_T = r0 exp((mu - sigma^2/2) T + sigma W_T)`, undiscounted.
pub fn lognormal_put(r0: f64, mu: f64, sigma: f64, horizon: f64, strike: f64) -> f64 {
    let fwd = r0 * (mu * horizon).exp();
    let v = sigma * horizon.sqrt();
    if v == 0.0 {
        return (strike - fwd).max(0.0);
    }
    let d1 = ((fwd / strike).ln() + 0.5 * v * v) / v;
    let d2 = d1 - v;
    strike * norm_cdf(-d2) - fwd * norm_cdf(-d1)
}

/// Nodes and weights with `sum w_i f(x_i) ~ E[f(xi)]`, `xi ~ N(0, 1)`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    // Newton iteration on the orthonormal physicists' Hermite recurrence.
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let nodes = x.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
    let weights = w.iter().map(|v| v / sqrt_pi).collect();
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((norm_cdf(1.959963984540054) - 0.975).abs() < 2e-12, "{}", norm_cdf(1.959963984540054) - 0.975);
        assert!((norm_cdf(-3.0) - 0.0013498980316301).abs() < 1e-13);
    }

    #[test]
    fn hermite_integrates_moments() {
        let (x, w) = gauss_hermite(16);
        let moment = |k: i32| x.iter().zip(&w).map(|(a, b)| b * a.powi(k)).sum::<f64>();
        assert!((moment(0) - 1.0).abs() < 1e-13);
        assert!(moment(1).abs() < 1e-13);
        assert!((moment(2) - 1.0).abs() < 1e-12);
        assert!((moment(4) - 3.0).abs() < 1e-11);
        assert!((moment(6) - 15.0).abs() < 1e-10);
        let e = x.iter().zip(&w).map(|(a, b)| b * (0.3 * a).exp()).sum::<f64>();
        assert!((e - (0.045f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn put_against_quadrature() {
        // independent route: Gauss-Hermite is inaccurate at the kink, so use fine midpoint rule
        let (r0, mu, sigma, t, k) = (170.0f64, 0.12f64, 0.41f64, 1.0f64, 180.0f64);
        let n = 400_000;
        let (a, b) = (-10.0, 10.0);
        let dx = (b - a) / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let z = a + (i as f64 + 0.5) * dx;
            let r = r0 * ((mu - 0.5 * sigma * sigma) * t + sigma * t.sqrt() * z).exp();
            acc += (k - r).max(0.0) * norm_pdf(z) * dx;
        }
        let cf = lognormal_put(r0, mu, sigma, t, k);
        assert!((acc - cf).abs() < 1e-6, "{acc} vs {cf}");
    }
}
