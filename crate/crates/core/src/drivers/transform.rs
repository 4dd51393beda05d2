//! Exponential (Cole-Hopf) change of variables `P = exp(gamma Y)`, `Q = gamma P Z`.
//!
//! For a driver `l + a + (gamma / 2) z^2` the transformed equation has driver
//! `F(t, x, p, q) = gamma p l(t, x, log(p) / gamma) + a(t, x, q)`, which no longer
//! contains a quadratic term and is Lipschitz once `p` stays in a compact subset of
//! `(0, inf)`.

use super::{finite, Driver, QuadraticDriverSpec};
use crate::error::{Error, Result};
use crate::validate::{linspace, Lattice};

pub fn cole_hopf_forward(gamma: f64, y: f64, z: f64) -> Result<(f64, f64)> {
    nonzero_gamma(gamma)?;
    let p = (gamma * y).exp();
    Ok((p, gamma * p * z))
}

pub fn cole_hopf_inverse(gamma: f64, p: f64, q: f64) -> Result<(f64, f64)> {
    nonzero_gamma(gamma)?;
    if !(p > 0.0) {
        return Err(Error::Domain { value: p, floor: 0.0 });
    }
    Ok((p.ln() / gamma, q / (gamma * p)))
}

fn nonzero_gamma(gamma: f64) -> Result<()> {
    if gamma == 0.0 || !gamma.is_finite() {
        Err(Error::config("the exponential transform needs a finite nonzero quadratic coefficient"))
    } else {
        Ok(())
    }
}

/// Closed interval `[lower, upper]` with `lower > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompactSet {
    pub lower: f64,
    pub upper: f64,
}

impl CompactSet {
    pub fn clamp(&self, p: f64) -> f64 {
        p.clamp(self.lower, self.upper)
    }
}

/// Sampled Lipschitz and linear-growth constants of a transformed driver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzCertificate {
    pub x_slope: f64,
    pub p_slope: f64,
    pub q_slope: f64,
    /// `max |F| / (1 + |x| + |p| + |q|)`
    pub growth: f64,
}

#[derive(Clone, Debug)]
pub struct LipschitzDriver {
    spec: QuadraticDriverSpec,
    compact: CompactSet,
    floor: f64,
    certificate: LipschitzCertificate,
}

impl LipschitzDriver {
    pub fn gamma(&self) -> f64 {
        self.spec.gamma()
    }

    pub fn compact(&self) -> CompactSet {
        self.compact
    }

    /// Evaluation below (or at) this value is a domain error.
    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn certificate(&self) -> LipschitzCertificate {
        self.certificate
    }

    pub fn eval(&self, t: f64, x: f64, p: f64, q: f64) -> Result<f64> {
        if !(p > self.floor) {
            return Err(Error::Domain { value: p, floor: self.floor });
        }
        let g = self.spec.gamma();
        finite(g * p * self.spec.l(t, x, p.ln() / g) + self.spec.a(t, x, q), "transformed driver")
    }
}

impl Driver for LipschitzDriver {
    fn eval(&self, t: f64, x: f64, y: f64, z: f64) -> Result<f64> {
        LipschitzDriver::eval(self, t, x, y, z)
    }

    fn value_domain(&self) -> Option<(f64, f64)> {
        Some((self.compact.lower, self.compact.upper))
    }
}

/// A priori bound on `|Y|`: `(cap + T sup|l(., ., 0)|) exp(T L_y)`, with the
/// sup and the `y`-Lipschitz constant `L_y` sampled on the lattice.
pub fn value_bound(spec: &QuadraticDriverSpec, payoff_cap: f64, horizon: f64, lattice: &Lattice) -> f64 {
    let yr = 4.0 * (payoff_cap + 1.0);
    let ys = linspace(-yr, yr, 9);
    let mut l0 = 0.0f64;
    let mut ly = 0.0f64;
    for (t, x) in lattice.points() {
        l0 = l0.max(spec.l(t, x, 0.0).abs());
        for w in ys.windows(2) {
            let s = (spec.l(t, x, w[1]) - spec.l(t, x, w[0])).abs() / (w[1] - w[0]);
            ly = ly.max(s);
        }
    }
    (payoff_cap + horizon * l0) * (horizon * ly).exp()
}

/// Transformed driver with `p` confined to `[exp(-|gamma| B), exp(|gamma| B)]` for the
/// value bound `B`; the domain floor sits at half the lower end.
pub fn transformed_driver(spec: &QuadraticDriverSpec, bound: f64, lattice: &Lattice) -> Result<LipschitzDriver> {
    let g = spec.gamma();
    nonzero_gamma(g)?;
    if !(bound.is_finite() && bound >= 0.0) {
        return Err(Error::config(format!("value bound must be finite and nonnegative, got {bound}")));
    }
    let lower = (-g.abs() * bound).exp();
    let upper = (g.abs() * bound).exp();
    if !(lower > 0.0 && upper.is_finite()) {
        return Err(Error::config(format!(
            "transformed value range overflows: |gamma| * bound = {}",
            g.abs() * bound
        )));
    }
    let mut driver = LipschitzDriver {
        spec: spec.clone(),
        compact: CompactSet { lower, upper },
        floor: 0.5 * lower,
        certificate: LipschitzCertificate { x_slope: 0.0, p_slope: 0.0, q_slope: 0.0, growth: 0.0 },
    };
    driver.certificate = certify(&driver, lattice)?;
    Ok(driver)
}

fn certify(d: &LipschitzDriver, lattice: &Lattice) -> Result<LipschitzCertificate> {
    let CompactSet { lower, upper } = d.compact;
    let ps: Vec<f64> = linspace(lower.ln(), upper.ln(), 9).into_iter().map(f64::exp).collect();
    let ps: Vec<f64> = ps.into_iter().map(|p| p.clamp(lower, upper)).collect();
    let qs = linspace(-10.0, 10.0, 9);
    let mut c = LipschitzCertificate { x_slope: 0.0, p_slope: 0.0, q_slope: 0.0, growth: 0.0 };
    let g = d.spec.gamma();
    // The two parts of F are differenced separately so the linear part is not lost
    // to cancellation against a large value part.
    let value = |t: f64, x: f64, p: f64| g * p * d.spec.l(t, x, p.ln() / g);
    let linear = |t: f64, x: f64, q: f64| d.spec.a(t, x, q);
    for &t in &lattice.times {
        for (ix, &x) in lattice.states.iter().enumerate() {
            for (ip, &p) in ps.iter().enumerate() {
                for (iq, &q) in qs.iter().enumerate() {
                    let f = d.eval(t, x, p, q)?;
                    c.growth = c.growth.max(f.abs() / (1.0 + x.abs() + p.abs() + q.abs()));
                    if ix > 0 && x != lattice.states[ix - 1] {
                        let x0 = lattice.states[ix - 1];
                        let dv = (value(t, x, p) - value(t, x0, p)).abs();
                        let dl = (linear(t, x, q) - linear(t, x0, q)).abs();
                        c.x_slope = c.x_slope.max((dv + dl) / (x - x0));
                    }
                    if ip > 0 && p != ps[ip - 1] {
                        let p0 = ps[ip - 1];
                        c.p_slope = c.p_slope.max((value(t, x, p) - value(t, x, p0)).abs() / (p - p0));
                    }
                    if iq > 0 {
                        let q0 = qs[iq - 1];
                        c.q_slope = c.q_slope.max((linear(t, x, q) - linear(t, x, q0)).abs() / (q - q0));
                    }
                }
            }
        }
    }
    if [c.x_slope, c.p_slope, c.q_slope, c.growth].iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "Lipschitz certificate" });
    }
    Ok(c)
}
