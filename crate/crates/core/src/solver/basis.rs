use crate::error::{Error, Result};
use crate::payoff::PayoffSpec;

/// Monomials of the standardized state, optionally followed by the payoff of the raw state.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionBasis {
    degrees: Vec<u32>,
    payoff: Option<PayoffSpec>,
    /// Payoff column enters as `exp(c F(x))` when set.
    exponent: Option<f64>,
}

impl RegressionBasis {
    pub fn monomials(degrees: impl IntoIterator<Item = u32>) -> Result<Self> {
        let degrees: Vec<u32> = degrees.into_iter().collect();
        if degrees.is_empty() {
            return Err(Error::config("regression basis must contain at least one function"));
        }
        let mut sorted = degrees.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != degrees.len() {
            return Err(Error::config("regression basis degrees must be distinct"));
        }
        Ok(RegressionBasis { degrees, payoff: None, exponent: None })
    }

    /// `{1, x, x^2, x^3, x^4, F(x)}`.
    pub fn standard(payoff: &PayoffSpec) -> Self {
        RegressionBasis {
            degrees: (0..=4).collect(),
            payoff: Some(payoff.clone()),
            exponent: None,
        }
    }

    pub fn with_payoff(mut self, payoff: &PayoffSpec) -> Self {
        self.payoff = Some(payoff.clone());
        self
    }

    /// Same basis for a problem whose terminal is `exp(c F)`: the payoff column becomes
    /// `exp(c F(x))`. Without a payoff column the basis is unchanged.
    pub fn exponential(&self, c: f64) -> Self {
        RegressionBasis {
            exponent: self.payoff.as_ref().map(|_| c),
            ..self.clone()
        }
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn payoff(&self) -> Option<&PayoffSpec> {
        self.payoff.as_ref()
    }

    pub fn len(&self) -> usize {
        self.degrees.len() + usize::from(self.payoff.is_some())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Evaluates every basis function at raw state `x` with standardized value `s`.
    pub(crate) fn row(&self, x: f64, s: f64, out: &mut [f64]) {
        for (o, &d) in out.iter_mut().zip(&self.degrees) {
            *o = s.powi(d as i32);
        }
        if let Some(p) = &self.payoff {
            let v = p.eval(x);
            out[self.degrees.len()] = match self.exponent {
                Some(c) => (c * v).exp(),
                None => v,
            };
        }
    }
}
