//! Axis-aligned boxes over the problem variables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One branching decision: `variable` was split at `point`, and this region
/// kept the `upper` or lower half.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub variable: usize,
    pub point: f64,
    pub upper: bool,
}

/// Per-variable interval box, with its volume as a fraction of the root box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub volume_fraction: f64,
    pub depth: usize,
    pub history: Vec<Branch>,
}

impl Region {
    pub fn root(bounds: &[(f64, f64)]) -> Self {
        Self {
            lower: bounds.iter().map(|b| b.0).collect(),
            upper: bounds.iter().map(|b| b.1).collect(),
            volume_fraction: 1.0,
            depth: 0,
            history: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(&v, (&l, &u))| l <= v && v <= u)
    }

    /// Splits `variable` at `point`, which must lie strictly inside its
    /// interval. Child volumes are proportional to the sub-interval widths.
    pub fn split(&self, variable: usize, point: f64) -> Result<(Region, Region)> {
        if variable >= self.dim() {
            return Err(Error::Logic(format!("split variable {variable} out of range")));
        }
        let (l, u) = (self.lower[variable], self.upper[variable]);
        if !(l < point && point < u) {
            return Err(Error::Logic(format!(
                "split point {point} not strictly inside [{l}, {u}] for x{variable}"
            )));
        }
        let frac = (point - l) / (u - l);
        let mut low = self.clone();
        low.upper[variable] = point;
        low.volume_fraction = self.volume_fraction * frac;
        low.depth += 1;
        low.history.push(Branch { variable, point, upper: false });

        let mut high = self.clone();
        high.lower[variable] = point;
        high.volume_fraction = self.volume_fraction - low.volume_fraction;
        high.depth += 1;
        high.history.push(Branch { variable, point, upper: true });
        Ok((low, high))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_halves_symmetric_interval() {
        let r = Region::root(&[(-1.0, 1.0)]);
        let (a, b) = r.split(0, 0.0).unwrap();
        assert_eq!(a.volume_fraction, 0.5);
        assert_eq!(b.volume_fraction, 0.5);
        assert_eq!((a.lower[0], a.upper[0]), (-1.0, 0.0));
        assert_eq!((b.lower[0], b.upper[0]), (0.0, 1.0));
        assert_eq!(a.depth, 1);
    }

    #[test]
    fn split_is_proportional() {
        let r = Region::root(&[(0.0, 1.0), (0.0, 2.0)]);
        let (a, b) = r.split(0, 0.25).unwrap();
        assert!((a.volume_fraction - 0.25).abs() < 1e-15);
        assert!((b.volume_fraction - 0.75).abs() < 1e-15);
    }

    #[test]
    fn split_rejects_boundary_points() {
        let r = Region::root(&[(0.0, 1.0)]);
        assert!(matches!(r.split(0, 0.0), Err(Error::Logic(_))));
        assert!(matches!(r.split(0, 1.5), Err(Error::Logic(_))));
        assert!(matches!(r.split(3, 0.5), Err(Error::Logic(_))));
    }
}
