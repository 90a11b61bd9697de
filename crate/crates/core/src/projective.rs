//! Points of real projective space as sign-canonical unit vectors, the
//! metric `d(x, y) = sqrt(1 - <x, y>^2)` and the normalized matrix action.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{InvertibleMatrix, Matrix};

/// Coordinates with magnitude at or below this count as zero when choosing
/// the canonical sign.
pub const SIGN_TOL: f64 = 1e-14;

/// A line through the origin, stored as a unit vector whose first
/// coordinate above [`SIGN_TOL`] in magnitude is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjPoint {
    vec: Vec<f64>,
}

impl ProjPoint {
    pub fn new(v: &[f64]) -> Result<Self> {
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidArgument(
                "a projective point needs a finite non-zero vector".into(),
            ));
        }
        Ok(Self::from_nonzero(v, norm))
    }

    fn from_nonzero(v: &[f64], norm: f64) -> Self {
        let mut vec: Vec<f64> = v.iter().map(|c| c / norm).collect();
        canonicalize(&mut vec);
        ProjPoint { vec }
    }

    /// Line at angle `theta` in the plane.
    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let mut vec = vec![c, s];
        canonicalize(&mut vec);
        ProjPoint { vec }
    }

    /// Standard basis line `e_i` in dimension `dim`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut vec = vec![0.0; dim];
        vec[i] = 1.0;
        ProjPoint { vec }
    }

    pub fn dim(&self) -> usize {
        self.vec.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.vec
    }
}

fn canonicalize(v: &mut [f64]) {
    if let Some(first) = v.iter().copied().find(|c| c.abs() > SIGN_TOL) {
        if first < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
    }
}

/// `d(x, y) = (1 - <x, y>^2)^(1/2)`, in `[0, 1]`.
pub fn proj_metric(x: &ProjPoint, y: &ProjPoint) -> f64 {
    unit_metric(&x.vec, &y.vec)
}

/// Same metric on raw unit vectors, no canonicalization needed.
///
/// Evaluated as `|x ^ y|` (Lagrange's identity), which avoids the
/// cancellation in `1 - <x, y>^2` for nearby lines.
pub fn unit_metric(x: &[f64], y: &[f64]) -> f64 {
    if x.len() == 2 {
        return (x[0] * y[1] - x[1] * y[0]).abs().min(1.0);
    }
    let mut acc = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let w = x[i] * y[j] - x[j] * y[i];
            acc += w * w;
        }
    }
    acc.sqrt().min(1.0)
}

/// `[Mx]`, the normalized action of `m` on the line `x`.
pub fn proj_action(m: &InvertibleMatrix, x: &ProjPoint) -> ProjPoint {
    let (y, norm) = image(m.matrix(), &x.vec);
    ProjPoint::from_nonzero(&y, norm)
}

/// `log |Mx|` for the unit representative `x`.
pub fn log_gain(m: &InvertibleMatrix, x: &ProjPoint) -> f64 {
    image(m.matrix(), &x.vec).1.ln()
}

/// Applies `m` to `x` and returns both the image and its length.
pub fn image(m: &Matrix, x: &[f64]) -> (Vec<f64>, f64) {
    let y = m.mul_vec(x);
    let norm = y.iter().map(|c| c * c).sum::<f64>().sqrt();
    (y, norm)
}

/// Angle of a line in the plane, folded into `[0, pi)`.
pub fn angle_chart(x: &ProjPoint) -> Result<f64> {
    if x.dim() != 2 {
        return Err(Error::UnsupportedDimension {
            dim: x.dim(),
            what: "the angle chart",
        });
    }
    Ok(fold_angle(x.vec[1].atan2(x.vec[0])))
}

/// Folds any angle into `[0, pi)`.
#[inline]
pub fn fold_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}
