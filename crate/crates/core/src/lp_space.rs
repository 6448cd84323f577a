//! Finite-dimensional real ℓ^p spaces with p ≥ 2.
//!
//! Besides the norm, every space carries the Giles semi-inner product
//!
//! ```text
//! [x, y] = ‖y‖^{2-p} Σᵢ xᵢ yᵢ |yᵢ|^{p-2}
//! ```
//!
//! and the normalized duality mapping `J`, related by `[x, y] = Σᵢ xᵢ J(y)ᵢ`.
//! The inverse of `J` is the duality mapping of the conjugate space ℓ^q,
//! `q = p / (p - 1)`. The smoothness constant `c = p - 1` bounds the second
//! order term in `‖x + y‖² ≤ ‖x‖² + 2[y, x] + c‖y‖²`.
//!
//! All sums are evaluated on data rescaled by the largest magnitude entry, so
//! neither `|xᵢ|^p` nor `‖y‖^{p-2}` overflows for large p.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real ℓ^p space of fixed dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct LpSpace {
    dim: usize,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    dim: usize,
    p: f64,
}

impl TryFrom<RawSpace> for LpSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        LpSpace::new(raw.dim, raw.p)
    }
}

impl From<LpSpace> for RawSpace {
    fn from(space: LpSpace) -> Self {
        RawSpace {
            dim: space.dim,
            p: space.p,
        }
    }
}

impl LpSpace {
    /// Creates ℓ^p of dimension `dim`. Rejects `p < 2`, where the space is
    /// no longer 2-uniformly smooth.
    pub fn new(dim: usize, p: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if !p.is_finite() || p < 2.0 {
            return Err(Error::InvalidExponent(p));
        }
        Ok(Self { dim, p })
    }

    /// Euclidean space of dimension `dim`.
    pub fn hilbert(dim: usize) -> Result<Self> {
        Self::new(dim, 2.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn is_hilbert(&self) -> bool {
        self.p == 2.0
    }

    /// Constant of smoothness, `p - 1`.
    pub fn smoothness_constant(&self) -> f64 {
        self.p - 1.0
    }

    /// Conjugate exponent `q = p / (p - 1)`.
    pub fn conjugate_exponent(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn zeros(&self) -> DVector<f64> {
        DVector::zeros(self.dim)
    }

    /// Checks that `x` belongs to this space: right length, finite entries.
    pub fn check(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector"));
        }
        Ok(())
    }

    /// `‖x‖_p`.
    pub fn norm(&self, x: &DVector<f64>) -> Result<f64> {
        self.check(x)?;
        Ok(lp_norm(x.as_slice(), self.p))
    }

    /// `‖x - y‖_p`.
    pub fn distance(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(lp_norm((x - y).as_slice(), self.p))
    }

    /// Giles semi-inner product `[x, y]`. Linear in `x`; positively
    /// homogeneous (in modulus) in `y`. `[x, 0] = 0` by convention.
    pub fn sip(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        if self.is_hilbert() {
            return Ok(x.dot(y));
        }
        let scale = max_abs(y.as_slice());
        if scale == 0.0 {
            return Ok(0.0);
        }
        let weight = self.p - 2.0;
        let mut sum = 0.0;
        let mut pow_sum = 0.0;
        for (&xi, &yi) in x.iter().zip(y.iter()) {
            if yi == 0.0 {
                continue;
            }
            let t = yi / scale;
            let w = t.abs().powf(weight);
            sum += xi * t * w;
            pow_sum += t.abs() * t.abs() * w;
        }
        // ‖y/scale‖^{p-2} = pow_sum^{(p-2)/p}
        Ok(sum * scale / pow_sum.powf(weight / self.p))
    }

    /// Normalized duality mapping `J(y)ᵢ = ‖y‖^{2-p} yᵢ |yᵢ|^{p-2}`,
    /// returned in dual (ℓ^q) coordinates. `J(0) = 0`.
    pub fn duality_map(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(y)?;
        Ok(duality_with_exponent(y, self.p))
    }

    /// Inverse of [`duality_map`](Self::duality_map): the duality mapping of
    /// the conjugate space ℓ^q applied to `u`.
    pub fn inverse_duality_map(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(u)?;
        Ok(duality_with_exponent(u, self.conjugate_exponent()))
    }
}

pub(crate) fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `‖x‖_r` for any finite `r ≥ 1`.
pub(crate) fn lp_norm(x: &[f64], r: f64) -> f64 {
    let scale = max_abs(x);
    if scale == 0.0 {
        return 0.0;
    }
    if r == 2.0 {
        let s: f64 = x.iter().map(|v| (v / scale) * (v / scale)).sum();
        return scale * s.sqrt();
    }
    if r == 1.0 {
        return x.iter().map(|v| v.abs()).sum();
    }
    let s: f64 = x.iter().map(|v| (v.abs() / scale).powf(r)).sum();
    scale * s.powf(1.0 / r)
}

/// Duality mapping of ℓ^r for `r > 1`; identity at `r = 2`.
pub(crate) fn duality_with_exponent(y: &DVector<f64>, r: f64) -> DVector<f64> {
    if r == 2.0 {
        return y.clone();
    }
    let scale = max_abs(y.as_slice());
    if scale == 0.0 {
        return DVector::zeros(y.len());
    }
    let weight = r - 2.0;
    let mut out = DVector::zeros(y.len());
    let mut pow_sum = 0.0;
    for (o, &yi) in out.iter_mut().zip(y.iter()) {
        if yi == 0.0 {
            continue;
        }
        let t = yi / scale;
        let w = t.abs().powf(weight);
        *o = t * w;
        pow_sum += t.abs() * t.abs() * w;
    }
    let factor = scale / pow_sum.powf(weight / r);
    out *= factor;
    out
}
