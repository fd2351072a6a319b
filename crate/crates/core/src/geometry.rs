//! Reflection hyperplanes used by the moving-plane diagnostics.
//!
//! Supported planes: axis planes `{x_i = lambda}` and the two diagonal
//! families `{x_i + x_j = lambda}` and `{x_i - x_j = lambda}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalSign {
    /// Plane `x_i + x_j = lambda`.
    Plus,
    /// Plane `x_i - x_j = lambda`.
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum HyperplaneKind {
    Axis { axis: usize },
    Diagonal { i: usize, j: usize, sign: DiagonalSign },
}

impl HyperplaneKind {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            HyperplaneKind::Axis { axis } => {
                if axis >= dim {
                    return Err(Error::invalid(format!(
                        "axis {axis} out of range for dim {dim}"
                    )));
                }
            }
            HyperplaneKind::Diagonal { i, j, .. } => {
                if i >= dim || j >= dim {
                    return Err(Error::invalid(format!(
                        "diagonal axes ({i}, {j}) out of range for dim {dim}"
                    )));
                }
                if i == j {
                    return Err(Error::invalid("diagonal plane needs two distinct axes"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub kind: HyperplaneKind,
    pub offset: f64,
}

impl Hyperplane {
    pub fn axis(axis: usize, offset: f64) -> Hyperplane {
        Hyperplane {
            kind: HyperplaneKind::Axis { axis },
            offset,
        }
    }

    pub fn diagonal(i: usize, j: usize, sign: DiagonalSign, offset: f64) -> Hyperplane {
        Hyperplane {
            kind: HyperplaneKind::Diagonal { i, j, sign },
            offset,
        }
    }

    /// Signed plane coordinate: zero on the plane, negative on the side
    /// swept by the moving plane.  For diagonal planes this is the plane
    /// form `x_i +/- x_j - lambda`, not the Euclidean distance.
    pub fn signed_coordinate(&self, x: &[f64]) -> f64 {
        match self.kind {
            HyperplaneKind::Axis { axis } => x[axis] - self.offset,
            HyperplaneKind::Diagonal {
                i,
                j,
                sign: DiagonalSign::Plus,
            } => x[i] + x[j] - self.offset,
            HyperplaneKind::Diagonal {
                i,
                j,
                sign: DiagonalSign::Minus,
            } => x[i] - x[j] - self.offset,
        }
    }

    /// Euclidean distance from `x` to the plane.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let c = self.signed_coordinate(x).abs();
        match self.kind {
            HyperplaneKind::Axis { .. } => c,
            HyperplaneKind::Diagonal { .. } => c / std::f64::consts::SQRT_2,
        }
    }

    /// Mirror image of `x` across the plane (an involution).
    pub fn reflect(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.reflect_into(x, &mut y);
        y
    }

    pub fn reflect_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
        let lambda = self.offset;
        match self.kind {
            HyperplaneKind::Axis { axis } => {
                out[axis] = 2.0 * lambda - x[axis];
            }
            HyperplaneKind::Diagonal {
                i,
                j,
                sign: DiagonalSign::Plus,
            } => {
                out[i] = lambda - x[j];
                out[j] = lambda - x[i];
            }
            HyperplaneKind::Diagonal {
                i,
                j,
                sign: DiagonalSign::Minus,
            } => {
                out[i] = lambda + x[j];
                out[j] = x[i] - lambda;
            }
        }
    }
}

/// Convenience free function mirroring `Hyperplane::reflect`.
pub fn reflect_point(x: &[f64], plane: &Hyperplane) -> Vec<f64> {
    plane.reflect(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn axis_reflection() {
        let p = Hyperplane::axis(0, 1.0);
        assert_eq!(p.reflect(&[0.0, 5.0]), vec![2.0, 5.0]);
        // lambda = x_i fixes the point
        assert_eq!(p.reflect(&[1.0, -3.0]), vec![1.0, -3.0]);
    }

    #[test]
    fn diagonal_reflection_examples() {
        // x_1 + x_2 = 0: (1, 2) -> (-2, -1)
        let p = Hyperplane::diagonal(0, 1, DiagonalSign::Plus, 0.0);
        assert_eq!(p.reflect(&[1.0, 2.0]), vec![-2.0, -1.0]);
        // points on the plane are fixed
        let q = Hyperplane::diagonal(0, 1, DiagonalSign::Plus, 3.0);
        assert_eq!(q.reflect(&[1.0, 2.0]), vec![1.0, 2.0]);
        // x_1 - x_2 = 0 swaps coordinates
        let m = Hyperplane::diagonal(0, 1, DiagonalSign::Minus, 0.0);
        assert_eq!(m.reflect(&[1.0, 2.0]), vec![2.0, 1.0]);
    }

    #[test]
    fn signed_coordinate_flips_under_reflection() {
        let planes = [
            Hyperplane::axis(1, 0.7),
            Hyperplane::diagonal(0, 2, DiagonalSign::Plus, -0.4),
            Hyperplane::diagonal(1, 2, DiagonalSign::Minus, 1.3),
        ];
        let x = [0.3, -1.2, 2.1];
        for p in &planes {
            let y = p.reflect(&x);
            let a = p.signed_coordinate(&x);
            let b = p.signed_coordinate(&y);
            assert!((a + b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn validation() {
        assert!(HyperplaneKind::Axis { axis: 2 }.validate(2).is_err());
        assert!(HyperplaneKind::Diagonal {
            i: 0,
            j: 0,
            sign: DiagonalSign::Plus
        }
        .validate(2)
        .is_err());
        assert!(HyperplaneKind::Diagonal {
            i: 0,
            j: 1,
            sign: DiagonalSign::Minus
        }
        .validate(2)
        .is_ok());
    }

    proptest! {
        #[test]
        fn reflection_is_involution(
            x0 in -10.0f64..10.0, x1 in -10.0f64..10.0, x2 in -10.0f64..10.0,
            lambda in -5.0f64..5.0, which in 0usize..4,
        ) {
            let x = [x0, x1, x2];
            let plane = match which {
                0 => Hyperplane::axis(0, lambda),
                1 => Hyperplane::axis(2, lambda),
                2 => Hyperplane::diagonal(0, 1, DiagonalSign::Plus, lambda),
                _ => Hyperplane::diagonal(1, 2, DiagonalSign::Minus, lambda),
            };
            let twice = plane.reflect(&plane.reflect(&x));
            for (a, b) in x.iter().zip(twice.iter()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
