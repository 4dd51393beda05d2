//! Cross-sectional least squares on a fixed state sample.
//!
//! States are standardized before monomials are formed and the Gram matrix is
//! equilibrated to unit diagonal before its Cholesky factorization. A nearly singular
//! factor triggers one retry with a `1e-10` ridge.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use super::basis::RegressionBasis;
use crate::error::{Error, Result};
use crate::parallel::{block_map, sum_by};

const RIDGE: f64 = 1e-10;
/// Smallest accepted ratio of squared Cholesky pivots.
const PIVOT_RATIO: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionFit {
    /// One coefficient per basis function (zero for functions that vanish on the sample).
    pub coefficients: Vec<f64>,
    pub fitted: Vec<f64>,
    pub center: f64,
    pub scale: f64,
    pub ridge: bool,
}

#[derive(Debug)]
pub(crate) struct Singular;

/// Factorized normal equations for one state sample.
pub(crate) struct Design {
    basis: RegressionBasis,
    center: f64,
    scale: f64,
    kind: DesignKind,
    ridge: bool,
}

enum DesignKind {
    /// All states equal: projection onto constants.
    Degenerate { row: Vec<f64> },
    Full {
        active: Vec<usize>,
        equil: Vec<f64>,
        chol: Cholesky<f64, Dyn>,
    },
}

impl Design {
    pub(crate) fn new(states: &[f64], basis: &RegressionBasis) -> std::result::Result<Self, Singular> {
        let m = states.len();
        let b = basis.len();
        let center = sum_by(m, |k| states[k]) / m as f64;
        let var = sum_by(m, |k| (states[k] - center).powi(2)) / m as f64;
        let scale = var.sqrt();

        if !(scale > 1e-12 * center.abs().max(1.0)) {
            let mut row = vec![0.0; b];
            basis.row(center, 0.0, &mut row);
            if row.iter().all(|v| *v == 0.0) {
                return Err(Singular);
            }
            return Ok(Design {
                basis: basis.clone(),
                center,
                scale: 1.0,
                kind: DesignKind::Degenerate { row },
                ridge: false,
            });
        }

        let partials = block_map(m, |r| {
            let mut g = vec![0.0; b * b];
            let mut row = vec![0.0; b];
            for k in r {
                basis.row(states[k], (states[k] - center) / scale, &mut row);
                for i in 0..b {
                    for j in i..b {
                        g[i * b + j] += row[i] * row[j];
                    }
                }
            }
            g
        });
        let mut gram = vec![0.0; b * b];
        for p in &partials {
            for (a, v) in gram.iter_mut().zip(p) {
                *a += v;
            }
        }
        let diag_max = (0..b).map(|i| gram[i * b + i]).fold(0.0, f64::max);
        let active: Vec<usize> = (0..b).filter(|&i| gram[i * b + i] > 1e-14 * diag_max).collect();
        if active.is_empty() {
            return Err(Singular);
        }
        let equil: Vec<f64> = active.iter().map(|&i| 1.0 / gram[i * b + i].sqrt()).collect();
        let na = active.len();
        let mat = DMatrix::from_fn(na, na, |r, c| {
            let (i, j) = (active[r.min(c)], active[r.max(c)]);
            gram[i * b + j] * equil[r] * equil[c]
        });

        let (chol, ridge) = match factor(mat.clone()) {
            Some(c) => (c, false),
            None => {
                let ridged = mat + DMatrix::identity(na, na) * RIDGE;
                (factor(ridged).ok_or(Singular)?, true)
            }
        };
        Ok(Design {
            basis: basis.clone(),
            center,
            scale,
            kind: DesignKind::Full { active, equil, chol },
            ridge,
        })
    }

    pub(crate) fn center(&self) -> f64 {
        self.center
    }

    pub(crate) fn scale(&self) -> f64 {
        self.scale
    }

    pub(crate) fn fit(&self, values: &[f64], states: &[f64]) -> RegressionFit {
        let m = values.len();
        let b = self.basis.len();
        let (coefficients, fitted) = match &self.kind {
            DesignKind::Degenerate { row } => {
                let mean = sum_by(m, |k| values[k]) / m as f64;
                let j = row.iter().position(|v| *v != 0.0).expect("nonzero row");
                let mut coef = vec![0.0; b];
                coef[j] = mean / row[j];
                (coef, vec![mean; m])
            }
            DesignKind::Full { active, equil, chol } => {
                let partials = block_map(m, |r| {
                    let mut acc = vec![0.0; b];
                    let mut row = vec![0.0; b];
                    for k in r {
                        self.basis.row(states[k], (states[k] - self.center) / self.scale, &mut row);
                        for (a, v) in acc.iter_mut().zip(&row) {
                            *a += v * values[k];
                        }
                    }
                    acc
                });
                let mut rhs = vec![0.0; b];
                for p in &partials {
                    for (a, v) in rhs.iter_mut().zip(p) {
                        *a += v;
                    }
                }
                let rhs = DVector::from_iterator(active.len(), active.iter().zip(equil).map(|(&i, e)| rhs[i] * e));
                let sol = chol.solve(&rhs);
                let mut coef = vec![0.0; b];
                for (r, &i) in active.iter().enumerate() {
                    coef[i] = sol[r] * equil[r];
                }
                let fitted = (0..m)
                    .into_par_iter()
                    .with_min_len(1024)
                    .map_init(
                        || vec![0.0; b],
                        |row, k| {
                            self.basis.row(states[k], (states[k] - self.center) / self.scale, row);
                            row.iter().zip(&coef).map(|(a, c)| a * c).sum::<f64>()
                        },
                    )
                    .collect();
                (coef, fitted)
            }
        };
        RegressionFit {
            coefficients,
            fitted,
            center: self.center,
            scale: self.scale,
            ridge: self.ridge,
        }
    }
}

fn factor(mat: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let chol = Cholesky::new(mat)?;
    let l = chol.l_dirty();
    let d: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).collect();
    let max = d.iter().cloned().fold(0.0, f64::max);
    let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > PIVOT_RATIO * max {
        Some(chol)
    } else {
        None
    }
}

/// Least-squares projection of `values` onto the basis evaluated at `states`.
pub fn regress(values: &[f64], states: &[f64], basis: &RegressionBasis) -> Result<RegressionFit> {
    if values.len() != states.len() {
        return Err(Error::config(format!(
            "regression needs one value per state ({} values, {} states)",
            values.len(),
            states.len()
        )));
    }
    if values.len() < basis.len() {
        return Err(Error::config(format!(
            "regression needs at least {} samples, got {}",
            basis.len(),
            values.len()
        )));
    }
    if values.iter().chain(states).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "regression input" });
    }
    let design = Design::new(states, basis).map_err(|_| Error::RankDeficient)?;
    Ok(design.fit(values, states))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::PayoffSpec;
    use proptest::prelude::*;

    fn states(n: usize) -> Vec<f64> {
        (0..n).map(|i| 150.0 + 40.0 * ((i as f64) * 0.61803).fract()).collect()
    }

    #[test]
    fn identity_on_linear_basis() {
        let x = states(500);
        let basis = RegressionBasis::monomials([0, 1]).unwrap();
        let fit = regress(&x, &x, &basis).unwrap();
        // coefficients refer to the standardized state: x = c + s * z
        assert!((fit.coefficients[0] - fit.center).abs() < 1e-10 * fit.center);
        assert!((fit.coefficients[1] - fit.scale).abs() < 1e-10 * fit.scale);
        // in raw-state terms: intercept 0, slope 1
        let slope = fit.coefficients[1] / fit.scale;
        let intercept = fit.coefficients[0] - slope * fit.center;
        assert!(intercept.abs() < 1e-10 && (slope - 1.0).abs() < 1e-10);
        for (f, v) in fit.fitted.iter().zip(&x) {
            assert!((f - v).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_basis_gives_sample_mean() {
        let x = states(1000);
        let noise: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64 / 1000.0 - 0.4995).collect();
        let fit = regress(&noise, &x, &RegressionBasis::monomials([0]).unwrap()).unwrap();
        let mean = noise.iter().sum::<f64>() / 1000.0;
        assert!((fit.coefficients[0] - mean).abs() < 1e-14);
    }

    #[test]
    fn recovers_quadratic() {
        let x = states(300);
        let c = x.iter().sum::<f64>() / 300.0;
        let s = (x.iter().map(|v| (v - c).powi(2)).sum::<f64>() / 300.0).sqrt();
        let z: Vec<f64> = x.iter().map(|v| (v - c) / s).collect();
        let y: Vec<f64> = z.iter().map(|v| v * v).collect();
        let fit = regress(&y, &x, &RegressionBasis::monomials([0, 1, 2]).unwrap()).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-8);
        assert!(fit.coefficients[1].abs() < 1e-8);
        assert!((fit.coefficients[2] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn collinear_payoff_column_uses_ridge() {
        // every state below the strike: the put column is affine in x
        let x: Vec<f64> = (0..400).map(|i| 100.0 + i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 + 0.5 * v).collect();
        let basis = RegressionBasis::standard(&PayoffSpec::put(200.0).unwrap());
        let fit = regress(&y, &x, &basis).unwrap();
        assert!(fit.ridge);
        for (f, v) in fit.fitted.iter().zip(&y) {
            assert!((f - v).abs() < 1e-6, "{f} vs {v}");
        }
    }

    #[test]
    fn degenerate_states_project_onto_constants() {
        let x = vec![170.0; 50];
        let v: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let fit = regress(&v, &x, &RegressionBasis::standard(&PayoffSpec::put(180.0).unwrap())).unwrap();
        assert!(fit.fitted.iter().all(|f| *f == 24.5));
    }

    #[test]
    fn vanishing_payoff_column_is_dropped() {
        let x = states(200); // all above 100
        let v: Vec<f64> = x.iter().map(|s| s.sqrt()).collect();
        let basis = RegressionBasis::monomials([0, 1]).unwrap().with_payoff(&PayoffSpec::put(100.0).unwrap());
        let fit = regress(&v, &x, &basis).unwrap();
        assert_eq!(fit.coefficients[2], 0.0);
    }

    #[test]
    fn input_errors() {
        let basis = RegressionBasis::monomials([0, 1, 2]).unwrap();
        assert!(matches!(regress(&[1.0, 2.0], &[1.0, 2.0], &basis), Err(Error::Config(_))));
        assert!(matches!(regress(&[1.0], &[1.0, 2.0], &basis), Err(Error::Config(_))));
        assert!(matches!(
            regress(&[1.0, f64::NAN, 3.0], &[1.0, 2.0, 3.0], &basis),
            Err(Error::NonFinite { .. })
        ));
        let zero_cols = RegressionBasis::monomials([1]).unwrap();
        assert!(matches!(regress(&[1.0; 4], &[2.0; 4], &zero_cols), Err(Error::RankDeficient)));
    }

    proptest! {
        #[test]
        fn residuals_orthogonal_to_basis(seed in 0u64..500) {
            let n = 400;
            let x: Vec<f64> = (0..n).map(|i| 120.0 + 100.0 * (((i as u64 * 2654435761 + seed * 97) % 10007) as f64 / 10007.0)).collect();
            let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| (v / 50.0).sin() * 10.0 + ((i * 31 + seed as usize) % 17) as f64 * 0.1).collect();
            let basis = RegressionBasis::standard(&PayoffSpec::put(180.0).unwrap());
            let fit = regress(&y, &x, &basis).unwrap();
            prop_assume!(!fit.ridge);
            let mut row = vec![0.0; basis.len()];
            let mut ip = vec![0.0; basis.len()];
            let mut norms = vec![0.0; basis.len()];
            for k in 0..n {
                basis.row(x[k], (x[k] - fit.center) / fit.scale, &mut row);
                let r = y[k] - fit.fitted[k];
                for j in 0..basis.len() {
                    ip[j] += row[j] * r;
                    norms[j] += row[j] * row[j];
                }
            }
            let rn = y.iter().zip(&fit.fitted).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            for j in 0..basis.len() {
                prop_assert!(ip[j].abs() / (norms[j].sqrt() * rn.max(1e-300)) < 1e-6);
            }
        }
    }
}
