use crate::error::{Error, Result};

/// Rectangular lattice of `(t, x)` points on which coefficient conditions are checked.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    pub times: Vec<f64>,
    pub states: Vec<f64>,
}

impl Lattice {
    pub fn new(t_range: (f64, f64), x_range: (f64, f64), nt: usize, nx: usize) -> Result<Self> {
        if nt == 0 || nx == 0 {
            return Err(Error::config("validation lattice needs at least one point per axis"));
        }
        if !(t_range.0 <= t_range.1 && x_range.0 <= x_range.1) {
            return Err(Error::config("validation lattice ranges must be ordered"));
        }
        Ok(Lattice {
            times: linspace(t_range.0, t_range.1, nt),
            states: linspace(x_range.0, x_range.1, nx),
        })
    }

    /// 21 x 21 points over `[0, T] x [x0 / 4, 4 x0]`.
    pub fn around(horizon: f64, x0: f64) -> Result<Self> {
        Lattice::new((0.0, horizon), (x0 / 4.0, 4.0 * x0), 21, 21)
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times
            .iter()
            .flat_map(move |&t| self.states.iter().map(move |&x| (t, x)))
    }
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_lattice_shape() {
        let l = Lattice::around(1.0, 170.0).unwrap();
        assert_eq!(l.times.len(), 21);
        assert_eq!(l.states.len(), 21);
        assert_eq!(l.states[0], 42.5);
        assert_eq!(l.states[20], 680.0);
        assert_eq!(l.points().count(), 441);
    }
}
