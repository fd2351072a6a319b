use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel normalization of the coordinate-wise operator.
///
/// `Probabilistic` carries the constant `C_s / 2` in front of the
/// second-difference kernel, so that the Fourier symbol of the negated
/// operator is exactly `sum_i |2 pi xi_i|^{2s}` and the operator is the
/// generator of the coordinate-wise stable process.  `Plain` drops the
/// constant and integrates against `1/|t|^{1+2s}` alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Probabilistic,
    Plain,
}

/// Problem parameters shared across modules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionalParams {
    pub dim: usize,
    /// Fractional order, `0 < s < 1`.
    pub s: f64,
    /// Nonlinearity exponent, `p > 1`.
    pub p: f64,
    pub normalization: Normalization,
}

impl FractionalParams {
    pub fn new(dim: usize, s: f64, p: f64, normalization: Normalization) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim must be at least 1"));
        }
        if !(s > 0.0 && s < 1.0) || !s.is_finite() {
            return Err(Error::invalid(format!("s must lie in (0, 1), got {s}")));
        }
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::invalid(format!("p must exceed 1, got {p}")));
        }
        Ok(FractionalParams {
            dim,
            s,
            p,
            normalization,
        })
    }

    /// Critical exponent `N / (N - 2s)` below which (inclusive) no positive
    /// solution of `u = u^p * G_s` exists.  `None` when `N <= 2s`, in which
    /// case every `p > 1` is admissible.
    pub fn critical_exponent(&self) -> Option<f64> {
        let n = self.dim as f64;
        if n > 2.0 * self.s {
            Some(n / (n - 2.0 * self.s))
        } else {
            None
        }
    }

    /// Decay exponent `2s / (p - 1)` of the scaling family
    /// `u_mu(x) = mu^{2s/(p-1)} u(mu x)`.
    pub fn scaling_exponent(&self) -> f64 {
        2.0 * self.s / (self.p - 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_ranges() {
        assert!(FractionalParams::new(2, 0.5, 3.0, Normalization::Probabilistic).is_ok());
        assert!(FractionalParams::new(0, 0.5, 3.0, Normalization::Plain).is_err());
        assert!(FractionalParams::new(2, 0.0, 3.0, Normalization::Plain).is_err());
        assert!(FractionalParams::new(2, 1.0, 3.0, Normalization::Plain).is_err());
        assert!(FractionalParams::new(2, 0.5, 1.0, Normalization::Plain).is_err());
    }

    #[test]
    fn critical_exponent_matches_formula() {
        let p = FractionalParams::new(2, 0.5, 3.0, Normalization::Probabilistic).unwrap();
        // N/(N-2s) = 2/(2-1) = 2
        assert!((p.critical_exponent().unwrap() - 2.0).abs() < 1e-15);
        let p = FractionalParams::new(3, 0.75, 3.0, Normalization::Probabilistic).unwrap();
        assert!((p.critical_exponent().unwrap() - 2.0).abs() < 1e-15);
        // N = 1, s = 0.6: N <= 2s, no restriction
        let p = FractionalParams::new(1, 0.6, 3.0, Normalization::Probabilistic).unwrap();
        assert!(p.critical_exponent().is_none());
    }

    #[test]
    fn scaling_exponent() {
        let p = FractionalParams::new(2, 0.5, 3.0, Normalization::Probabilistic).unwrap();
        assert!((p.scaling_exponent() - 0.5).abs() < 1e-15);
    }
}
