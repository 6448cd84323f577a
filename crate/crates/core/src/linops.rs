//! Dense bounded linear operators between two ℓ^p spaces.
//!
//! The generalized adjoint `A⁺` is characterized by `[Ax, y]_Y = [x, A⁺y]_X`
//! for every `x`. Writing the semi-inner products through the duality maps
//! gives the closed form `A⁺y = J_X⁻¹(Aᵀ J_Y(y))`, which is nonlinear unless
//! both spaces are Hilbert.
//!
//! Operator norms ‖A‖_{p₁→p₂} are bracketed: a certified upper bound from the
//! Schur test (interpolating the column-sum and row-sum norms) and an
//! empirical lower estimate from random sampling followed by a nonlinear
//! power iteration.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::lp_space::{lp_norm, LpSpace};
use crate::sample::{rng_from_seed, uniform_vector};

const DEFAULT_LOWER_SAMPLES: usize = 64;
const POWER_ITERATIONS: usize = 50;

/// A dense matrix viewed as a map `domain → codomain`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedLinearOp {
    matrix: DMatrix<f64>,
    domain: LpSpace,
    codomain: LpSpace,
    norm_upper: f64,
    norm_lower: f64,
}

impl BoundedLinearOp {
    /// Wraps `matrix` (rows = codomain dimension, columns = domain dimension)
    /// and computes both norm brackets.
    pub fn new(matrix: DMatrix<f64>, domain: LpSpace, codomain: LpSpace) -> Result<Self> {
        if matrix.ncols() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                found: matrix.ncols(),
            });
        }
        if matrix.nrows() != codomain.dim() {
            return Err(Error::DimensionMismatch {
                expected: codomain.dim(),
                found: matrix.nrows(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("operator matrix"));
        }
        let norm_upper = upper_bound(&matrix, domain.p(), codomain.p());
        let mut op = Self {
            matrix,
            domain,
            codomain,
            norm_upper,
            norm_lower: 0.0,
        };
        let mut rng = rng_from_seed(0x0005_eed0_fa11);
        op.norm_lower = op.p_norm_lower_estimate(DEFAULT_LOWER_SAMPLES, &mut rng);
        Ok(op)
    }

    pub fn identity(space: LpSpace) -> Self {
        Self::new(DMatrix::identity(space.dim(), space.dim()), space, space)
            .expect("identity has matching dimensions")
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn domain(&self) -> LpSpace {
        self.domain
    }

    pub fn codomain(&self) -> LpSpace {
        self.codomain
    }

    /// Certified upper bound on ‖A‖.
    pub fn norm_upper(&self) -> f64 {
        self.norm_upper
    }

    /// Sampled lower estimate of ‖A‖.
    pub fn norm_lower(&self) -> f64 {
        self.norm_lower
    }

    /// Bound used for ‖A⁺‖ = sup ‖A⁺y‖/‖y‖, which never exceeds ‖A‖.
    pub fn adjoint_norm_bound(&self) -> f64 {
        self.norm_upper
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.domain.check(x)?;
        Ok(&self.matrix * x)
    }

    /// `A⁺y = J_X⁻¹(Aᵀ J_Y(y))`. Defined on the whole codomain, `A⁺0 = 0`.
    pub fn generalized_adjoint_apply(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let dual = self.codomain.duality_map(y)?;
        let pulled = self.matrix.tr_mul(&dual);
        self.domain.inverse_duality_map(&pulled)
    }

    /// Same value as [`norm_upper`](Self::norm_upper), recomputed.
    pub fn p_norm_upper_bound(&self) -> f64 {
        upper_bound(&self.matrix, self.domain.p(), self.codomain.p())
    }

    /// Largest ratio ‖Ay‖/‖y‖ found over `samples` random directions, then
    /// refined by the power iteration `y ← A⁺(Ay)` started from the best
    /// sample. Clamped to the certified upper bound.
    pub fn p_norm_lower_estimate<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> f64 {
        let (p1, p2) = (self.domain.p(), self.codomain.p());
        let ratio = |y: &DVector<f64>| {
            let ny = lp_norm(y.as_slice(), p1);
            if ny == 0.0 {
                0.0
            } else {
                lp_norm((&self.matrix * y).as_slice(), p2) / ny
            }
        };

        let dim = self.domain.dim();
        let mut best = 0.0;
        let mut best_vec = DVector::zeros(dim);
        let consider = |y: DVector<f64>, best: &mut f64, best_vec: &mut DVector<f64>| {
            let r = ratio(&y);
            if r > *best {
                *best = r;
                *best_vec = y;
            }
        };
        for j in 0..dim {
            let mut e = DVector::zeros(dim);
            e[j] = 1.0;
            consider(e, &mut best, &mut best_vec);
        }
        for _ in 0..samples.max(1) {
            consider(uniform_vector(rng, dim, 1.0), &mut best, &mut best_vec);
        }

        let mut y = best_vec.clone();
        for _ in 0..POWER_ITERATIONS {
            if best == 0.0 {
                break;
            }
            let next = match self.generalized_adjoint_apply(&(&self.matrix * &y)) {
                Ok(v) => v,
                Err(_) => break,
            };
            let n = lp_norm(next.as_slice(), p1);
            if n == 0.0 || !n.is_finite() {
                break;
            }
            y = next / n;
            let r = ratio(&y);
            if r > best {
                best = r;
            }
        }
        best.min(self.norm_upper)
    }
}

fn column_sum_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn row_sum_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Schur test bound ‖A‖_{p→p} ≤ ‖A‖₁^{1/p} ‖A‖_∞^{1-1/p}, nudged up by a few
/// ulps so that rounding in `powf` cannot push it below the true norm.
fn schur_bound(col: f64, row: f64, p: f64) -> f64 {
    if col == row {
        return col;
    }
    if col == 0.0 || row == 0.0 {
        return 0.0;
    }
    let raw = if p == 2.0 {
        (col * row).sqrt()
    } else {
        col.powf(1.0 / p) * row.powf(1.0 - 1.0 / p)
    };
    raw * (1.0 + 4.0 * f64::EPSILON)
}

/// Largest singular value with a safety margin for the SVD's own rounding.
fn spectral_bound(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let top = sv.iter().cloned().fold(0.0, f64::max);
    let n = a.nrows().max(a.ncols()) as f64;
    top * (1.0 + 64.0 * n * f64::EPSILON)
}

/// Relative margin covering rounding in evaluated norms of `Ax` and `A⁺y`,
/// which pass through several `powf` calls.
const EVALUATION_MARGIN: f64 = 32.0 * f64::EPSILON;

/// Certified bound on ‖A‖_{p1→p2}, valid also against the floating-point
/// evaluation of `‖Ax‖` and `‖A⁺y‖`.
///
/// For mixed exponents the bound routes through one of the two equal-exponent
/// norms and the inclusion constant between ℓ^{p1} and ℓ^{p2}
/// (`‖z‖_s ≤ n^{1/s - 1/t} ‖z‖_t` for `s < t`), keeping the smaller result.
fn upper_bound(a: &DMatrix<f64>, p1: f64, p2: f64) -> f64 {
    analytic_bound(a, p1, p2) * (1.0 + EVALUATION_MARGIN)
}

fn analytic_bound(a: &DMatrix<f64>, p1: f64, p2: f64) -> f64 {
    let col = column_sum_norm(a);
    let row = row_sum_norm(a);
    let inclusion = |n: usize, from: f64, to: f64| -> f64 {
        if to >= from {
            1.0
        } else {
            (n as f64).powf(1.0 / to - 1.0 / from) * (1.0 + 4.0 * f64::EPSILON)
        }
    };
    let same = |p: f64| -> f64 {
        let schur = schur_bound(col, row, p);
        if p == 2.0 {
            schur.min(spectral_bound(a))
        } else {
            schur
        }
    };
    if p1 == p2 {
        return same(p1);
    }
    // A : ℓ^{p1} → ℓ^{p1} followed by the inclusion ℓ^{p1} ⊂ ℓ^{p2} on the rows
    let via_domain = same(p1) * inclusion(a.nrows(), p1, p2);
    // inclusion ℓ^{p1} ⊂ ℓ^{p2} on the columns followed by A : ℓ^{p2} → ℓ^{p2}
    let via_codomain = inclusion(a.ncols(), p1, p2) * same(p2);
    via_domain.min(via_codomain)
}
