//! Problem data for systems of split variational inequalities.
//!
//! An instance couples two ℓ^p spaces `E₁`, `E₂` through a bounded linear
//! operator `A : E₁ → E₂`. It asks for `(x₁, y₁) ∈ C₁ × C₁` with images
//! `x₂ = Ax₁`, `y₂ = Ay₁` in `C₂` such that, for step sizes `λ, γ > 0`,
//!
//! ```text
//! x₁ = Q₁(y₁ - λ F y₁)      x₂ = Q₂(y₂ - γ f y₂)
//! y₁ = Q₁(x₁ - λ G x₁)      y₂ = Q₂(x₂ - γ g x₂)
//! ```
//!
//! where `Q₁`, `Q₂` are the sunny nonexpansive retractions onto `C₁`, `C₂`.
//! The four residuals of this fixed-point system vanish exactly at solutions.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::BoundedLinearOp;
use crate::lp_space::LpSpace;
use crate::retractions::{ConvexSet, Retraction};
use crate::sample::{rng_from_seed, rough_vector, uniform_matrix};

/// A strongly monotone, Lipschitz continuous map with exactly known moduli.
///
/// Every variant acts coordinate by coordinate with slopes in `[α, β]`.
/// Since the semi-inner product of ℓ^p is a positively weighted coordinate
/// sum, `[Fx - Fy, x - y] ≥ α‖x - y‖²` and `‖Fx - Fy‖ ≤ β‖x - y‖` then hold
/// in every ℓ^p, not just in ℓ².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MonotoneMap {
    /// `x ↦ a x + shift`
    AffineScalar { a: f64, shift: Vec<f64> },
    /// `x ↦ diag ⊙ x + shift`
    DiagonalAffine { diag: Vec<f64>, shift: Vec<f64> },
    /// `xᵢ ↦ α xᵢ + (β - α)(xᵢ + sin xᵢ)/2 + shiftᵢ`, slope `α + (β - α)(1 + cos xᵢ)/2`
    ComponentwiseMonotone { alpha: f64, beta: f64, shift: Vec<f64> },
}

impl MonotoneMap {
    pub fn identity(dim: usize) -> Self {
        MonotoneMap::AffineScalar {
            a: 1.0,
            shift: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MonotoneMap::AffineScalar { shift, .. }
            | MonotoneMap::DiagonalAffine { shift, .. }
            | MonotoneMap::ComponentwiseMonotone { shift, .. } => shift.len(),
        }
    }

    /// Strong monotonicity modulus.
    pub fn alpha(&self) -> f64 {
        match self {
            MonotoneMap::AffineScalar { a, .. } => *a,
            MonotoneMap::DiagonalAffine { diag, .. } => diag.iter().cloned().fold(f64::INFINITY, f64::min),
            MonotoneMap::ComponentwiseMonotone { alpha, .. } => *alpha,
        }
    }

    /// Lipschitz modulus.
    pub fn beta(&self) -> f64 {
        match self {
            MonotoneMap::AffineScalar { a, .. } => *a,
            MonotoneMap::DiagonalAffine { diag, .. } => diag.iter().cloned().fold(0.0, f64::max),
            MonotoneMap::ComponentwiseMonotone { beta, .. } => *beta,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: self.dim() });
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let ok = match self {
            MonotoneMap::AffineScalar { a, .. } => positive(*a),
            MonotoneMap::DiagonalAffine { diag, .. } => diag.len() == dim && diag.iter().all(|&d| positive(d)),
            MonotoneMap::ComponentwiseMonotone { alpha, beta, .. } => {
                positive(*alpha) && beta.is_finite() && alpha <= beta
            }
        };
        if !ok {
            return Err(Error::InvalidParameter(format!("monotone map moduli out of range: {self:?}")));
        }
        if self.shift().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("map shift"));
        }
        Ok(())
    }

    fn shift(&self) -> &[f64] {
        match self {
            MonotoneMap::AffineScalar { shift, .. }
            | MonotoneMap::DiagonalAffine { shift, .. }
            | MonotoneMap::ComponentwiseMonotone { shift, .. } => shift,
        }
    }

    fn shift_mut(&mut self) -> &mut Vec<f64> {
        match self {
            MonotoneMap::AffineScalar { shift, .. }
            | MonotoneMap::DiagonalAffine { shift, .. }
            | MonotoneMap::ComponentwiseMonotone { shift, .. } => shift,
        }
    }

    fn unshifted(&self, i: usize, t: f64) -> f64 {
        match self {
            MonotoneMap::AffineScalar { a, .. } => a * t,
            MonotoneMap::DiagonalAffine { diag, .. } => diag[i] * t,
            MonotoneMap::ComponentwiseMonotone { alpha, beta, .. } => {
                alpha * t + (beta - alpha) * 0.5 * (t + t.sin())
            }
        }
    }

    pub fn evaluate(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        let shift = self.shift();
        Ok(DVector::from_fn(x.len(), |i, _| self.unshifted(i, x[i]) + shift[i]))
    }

    /// The same map re-shifted to vanish at `u`.
    pub fn vanishing_at(&self, u: &DVector<f64>) -> Result<Self> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: u.len() });
        }
        let mut out = self.clone();
        let base: Vec<f64> = (0..u.len()).map(|i| -self.unshifted(i, u[i])).collect();
        *out.shift_mut() = base;
        Ok(out)
    }
}

/// Sampled moduli: `alpha_est = min [Fx-Fy, x-y]/‖x-y‖²`,
/// `beta_est = max ‖Fx-Fy‖/‖x-y‖` over `trials` random pairs.
pub fn estimate_moduli<R: Rng + ?Sized>(
    map: &MonotoneMap,
    space: LpSpace,
    trials: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if trials < 2 {
        return Err(Error::InvalidParameter("estimate_moduli needs at least 2 trials".into()));
    }
    let mut alpha_est = f64::INFINITY;
    let mut beta_est: f64 = 0.0;
    let mut seen = 0;
    while seen < trials {
        let x = rough_vector(rng, space.dim());
        let y = rough_vector(rng, space.dim());
        let d = &x - &y;
        let nd = space.norm(&d)?;
        if nd == 0.0 {
            continue;
        }
        let df = map.evaluate(&x)? - map.evaluate(&y)?;
        alpha_est = alpha_est.min(space.sip(&df, &d)? / (nd * nd));
        beta_est = beta_est.max(space.norm(&df)? / nd);
        seen += 1;
    }
    Ok((alpha_est, beta_est))
}

/// The eight moduli: `F ~ (α₁, β₁)`, `G ~ (α₂, β₂)`, `f ~ (σ₁, η₁)`, `g ~ (σ₂, η₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moduli {
    pub alpha1: f64,
    pub beta1: f64,
    pub alpha2: f64,
    pub beta2: f64,
    pub sigma1: f64,
    pub eta1: f64,
    pub sigma2: f64,
    pub eta2: f64,
}

impl Moduli {
    pub fn from_array(v: [f64; 8]) -> Result<Self> {
        let m = Moduli {
            alpha1: v[0],
            beta1: v[1],
            alpha2: v[2],
            beta2: v[3],
            sigma1: v[4],
            eta1: v[5],
            sigma2: v[6],
            eta2: v[7],
        };
        m.validate()?;
        Ok(m)
    }

    pub fn uniform(alpha: f64, beta: f64) -> Result<Self> {
        Self::from_array([alpha, beta, alpha, beta, alpha, beta, alpha, beta])
    }

    pub fn validate(&self) -> Result<()> {
        let pairs = [
            ("alpha1/beta1", self.alpha1, self.beta1),
            ("alpha2/beta2", self.alpha2, self.beta2),
            ("sigma1/eta1", self.sigma1, self.eta1),
            ("sigma2/eta2", self.sigma2, self.eta2),
        ];
        for (name, m, l) in pairs {
            if !(m.is_finite() && l.is_finite() && m > 0.0 && m <= l) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must satisfy 0 < modulus <= lipschitz, got {m}, {l}"
                )));
            }
        }
        Ok(())
    }
}

impl FromStr for Moduli {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let vals: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidParameter(format!("moduli: {e}")))?;
        let arr: [f64; 8] = vals
            .try_into()
            .map_err(|v: Vec<f64>| Error::InvalidParameter(format!("moduli needs 8 values, got {}", v.len())))?;
        Self::from_array(arr)
    }
}

/// Intermediate points of one sweep of the fixed-point system.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub x2: DVector<f64>,
    pub y2: DVector<f64>,
    /// `Q₁(y₁ - λ F y₁)`
    pub a1: DVector<f64>,
    /// `Q₂(y₂ - γ f y₂)`
    pub a2: DVector<f64>,
    /// `Q₁(x₁ - λ G x₁)`
    pub b1: DVector<f64>,
    /// `Q₂(x₂ - γ g x₂)`
    pub b2: DVector<f64>,
}

/// A fully specified instance.
#[derive(Debug, Clone)]
pub struct SspvipInstance {
    space1: LpSpace,
    space2: LpSpace,
    set1: Retraction,
    set2: Retraction,
    map_f1: MonotoneMap,
    map_g1: MonotoneMap,
    map_f2: MonotoneMap,
    map_g2: MonotoneMap,
    operator: BoundedLinearOp,
    known_solution: Option<(DVector<f64>, DVector<f64>)>,
    seed: Option<u64>,
}

/// On-disk form of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub space1: LpSpace,
    pub space2: LpSpace,
    pub set1: ConvexSet,
    pub set2: ConvexSet,
    /// `F` on `E₁`
    pub map_f1: MonotoneMap,
    /// `G` on `E₁`
    pub map_g1: MonotoneMap,
    /// `f` on `E₂`
    pub map_f2: MonotoneMap,
    /// `g` on `E₂`
    pub map_g2: MonotoneMap,
    /// Row-major entries of `A`, `dim2` rows of `dim1` columns.
    pub matrix: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_solution: Option<KnownSolution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownSolution {
    pub x1: Vec<f64>,
    pub y1: Vec<f64>,
}

impl SspvipInstance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        space1: LpSpace,
        space2: LpSpace,
        set1: ConvexSet,
        set2: ConvexSet,
        maps: [MonotoneMap; 4],
        matrix: DMatrix<f64>,
        known_solution: Option<(DVector<f64>, DVector<f64>)>,
    ) -> Result<Self> {
        let [map_f1, map_g1, map_f2, map_g2] = maps;
        map_f1.validate(space1.dim())?;
        map_g1.validate(space1.dim())?;
        map_f2.validate(space2.dim())?;
        map_g2.validate(space2.dim())?;
        if let Some((x, y)) = &known_solution {
            space1.check(x)?;
            space1.check(y)?;
        }
        Ok(Self {
            space1,
            space2,
            set1: Retraction::new(set1, space1)?,
            set2: Retraction::new(set2, space2)?,
            map_f1,
            map_g1,
            map_f2,
            map_g2,
            operator: BoundedLinearOp::new(matrix, space1, space2)?,
            known_solution,
            seed: None,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn space1(&self) -> LpSpace {
        self.space1
    }

    pub fn space2(&self) -> LpSpace {
        self.space2
    }

    pub fn set1(&self) -> &Retraction {
        &self.set1
    }

    pub fn set2(&self) -> &Retraction {
        &self.set2
    }

    /// `F`
    pub fn map_f1(&self) -> &MonotoneMap {
        &self.map_f1
    }

    /// `G`
    pub fn map_g1(&self) -> &MonotoneMap {
        &self.map_g1
    }

    /// `f`
    pub fn map_f2(&self) -> &MonotoneMap {
        &self.map_f2
    }

    /// `g`
    pub fn map_g2(&self) -> &MonotoneMap {
        &self.map_g2
    }

    pub fn operator(&self) -> &BoundedLinearOp {
        &self.operator
    }

    pub fn known_solution(&self) -> Option<(&DVector<f64>, &DVector<f64>)> {
        self.known_solution.as_ref().map(|(x, y)| (x, y))
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn moduli(&self) -> Moduli {
        Moduli {
            alpha1: self.map_f1.alpha(),
            beta1: self.map_f1.beta(),
            alpha2: self.map_g1.alpha(),
            beta2: self.map_g1.beta(),
            sigma1: self.map_f2.alpha(),
            eta1: self.map_f2.beta(),
            sigma2: self.map_g2.alpha(),
            eta2: self.map_g2.beta(),
        }
    }

    /// One sweep of the fixed-point maps at `(x₁, y₁)`.
    pub fn stage(&self, x1: &DVector<f64>, y1: &DVector<f64>, lambda: f64, gamma: f64) -> Result<Stage> {
        let x2 = self.operator.apply(x1)?;
        let y2 = self.operator.apply(y1)?;
        let a1 = self.set1.retract(&(y1 - self.map_f1.evaluate(y1)? * lambda))?;
        let a2 = self.set2.retract(&(&y2 - self.map_f2.evaluate(&y2)? * gamma))?;
        let b1 = self.set1.retract(&(x1 - self.map_g1.evaluate(x1)? * lambda))?;
        let b2 = self.set2.retract(&(&x2 - self.map_g2.evaluate(&x2)? * gamma))?;
        Ok(Stage { x2, y2, a1, a2, b1, b2 })
    }

    /// `[‖x₁ - a₁‖, ‖Ax₁ - a₂‖, ‖y₁ - b₁‖, ‖Ay₁ - b₂‖]` in the host norms.
    pub fn residuals(&self, x1: &DVector<f64>, y1: &DVector<f64>, lambda: f64, gamma: f64) -> Result<[f64; 4]> {
        check_steps(lambda, gamma)?;
        let st = self.stage(x1, y1, lambda, gamma)?;
        self.residuals_of(x1, y1, &st)
    }

    pub(crate) fn residuals_of(&self, x1: &DVector<f64>, y1: &DVector<f64>, st: &Stage) -> Result<[f64; 4]> {
        Ok([
            self.space1.distance(x1, &st.a1)?,
            self.space2.distance(&st.x2, &st.a2)?,
            self.space1.distance(y1, &st.b1)?,
            self.space2.distance(&st.y2, &st.b2)?,
        ])
    }

    pub fn to_file(&self) -> InstanceFile {
        let m = self.operator.matrix();
        InstanceFile {
            space1: self.space1,
            space2: self.space2,
            set1: self.set1.set().clone(),
            set2: self.set2.set().clone(),
            map_f1: self.map_f1.clone(),
            map_g1: self.map_g1.clone(),
            map_f2: self.map_f2.clone(),
            map_g2: self.map_g2.clone(),
            matrix: m.row_iter().map(|r| r.iter().cloned().collect()).collect(),
            known_solution: self.known_solution.as_ref().map(|(x, y)| KnownSolution {
                x1: x.as_slice().to_vec(),
                y1: y.as_slice().to_vec(),
            }),
            seed: self.seed,
        }
    }

    pub fn from_file(file: InstanceFile) -> Result<Self> {
        let rows = file.space2.dim();
        let cols = file.space1.dim();
        if file.matrix.len() != rows {
            return Err(Error::DimensionMismatch { expected: rows, found: file.matrix.len() });
        }
        for row in &file.matrix {
            if row.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, found: row.len() });
            }
        }
        let matrix = DMatrix::from_fn(rows, cols, |i, j| file.matrix[i][j]);
        let known = file
            .known_solution
            .map(|k| (DVector::from_vec(k.x1), DVector::from_vec(k.y1)));
        let inst = Self::new(
            file.space1,
            file.space2,
            file.set1,
            file.set2,
            [file.map_f1, file.map_g1, file.map_f2, file.map_g2],
            matrix,
            known,
        )?;
        Ok(match file.seed {
            Some(s) => inst.with_seed(s),
            None => inst,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn check_steps(lambda: f64, gamma: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0 && gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step sizes must be positive, got lambda = {lambda}, gamma = {gamma}"
        )));
    }
    Ok(())
}

/// Outcome of [`verify_instance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceCheck {
    pub residuals: [f64; 4],
    /// `‖x₁ - Q₁x₁‖ + ‖y₁ - Q₁y₁‖`
    pub infeasibility1: f64,
    /// Same for the images `Ax₁`, `Ay₁` in `C₂`.
    pub infeasibility2: f64,
    pub tolerance: f64,
}

impl InstanceCheck {
    pub fn passed(&self) -> bool {
        self.residuals.iter().all(|&r| r <= self.tolerance)
            && self.infeasibility1 <= self.tolerance
            && self.infeasibility2 <= self.tolerance
    }
}

/// Checks that the recorded known solution really solves the instance.
/// Returns `None` for instances without one.
pub fn verify_instance(inst: &SspvipInstance, lambda: f64, gamma: f64, tol: f64) -> Result<Option<InstanceCheck>> {
    let Some((x1, y1)) = inst.known_solution() else {
        return Ok(None);
    };
    let residuals = inst.residuals(x1, y1, lambda, gamma)?;
    let a = inst.operator();
    let infeasibility1 = inst.set1().infeasibility(x1)? + inst.set1().infeasibility(y1)?;
    let infeasibility2 = inst.set2().infeasibility(&a.apply(x1)?)? + inst.set2().infeasibility(&a.apply(y1)?)?;
    Ok(Some(InstanceCheck {
        residuals,
        infeasibility1,
        infeasibility2,
        tolerance: tol,
    }))
}

/// Catalog choice for generated sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetChoice {
    Whole,
    Box,
    Orthant,
    Subspace,
    Ball,
}

impl FromStr for SetChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whole" => Ok(SetChoice::Whole),
            "box" => Ok(SetChoice::Box),
            "orthant" => Ok(SetChoice::Orthant),
            "subspace" => Ok(SetChoice::Subspace),
            "ball" => Ok(SetChoice::Ball),
            other => Err(Error::InvalidParameter(format!(
                "unknown set {other:?} (expected whole, box, orthant, subspace or ball)"
            ))),
        }
    }
}

impl fmt::Display for SetChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SetChoice::Whole => "whole",
            SetChoice::Box => "box",
            SetChoice::Orthant => "orthant",
            SetChoice::Subspace => "subspace",
            SetChoice::Ball => "ball",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapFamily {
    Componentwise,
    Diagonal,
}

/// Parameters of [`generate_instance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub dim1: usize,
    pub dim2: usize,
    pub p1: f64,
    pub p2: f64,
    pub moduli: Moduli,
    pub set1: SetChoice,
    pub set2: SetChoice,
    pub map_family: MapFamily,
    /// `A` is rescaled so that its certified norm bound equals this value.
    pub operator_norm: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            dim1: 4,
            dim2: 3,
            p1: 2.0,
            p2: 2.0,
            moduli: Moduli::uniform(1.0, 1.5).expect("valid default moduli"),
            set1: SetChoice::Box,
            set2: SetChoice::Box,
            map_family: MapFamily::Componentwise,
            operator_norm: 1.0,
        }
    }
}

/// Builds a random instance with known solution `(u, u)`.
///
/// `u` is drawn in `C₁` (often on its boundary), `A` is adjusted so that
/// `Au ∈ C₂`, and all four maps are shifted to vanish at `u` or `Au`. The
/// whole construction is a function of the spec, seed included.
pub fn generate_instance(spec: &GeneratorSpec) -> Result<SspvipInstance> {
    spec.moduli.validate()?;
    let space1 = LpSpace::new(spec.dim1, spec.p1)?;
    let space2 = LpSpace::new(spec.dim2, spec.p2)?;
    if !(spec.operator_norm.is_finite() && spec.operator_norm > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "operator norm must be positive, got {}",
            spec.operator_norm
        )));
    }
    for (choice, space) in [(spec.set1, space1), (spec.set2, space2)] {
        if choice == SetChoice::Ball && !space.is_hilbert() {
            return Err(Error::InvalidSet(format!(
                "ball sets need p = 2, got p = {}",
                space.p()
            )));
        }
    }

    let mut rng = rng_from_seed(spec.seed);
    let (n1, n2) = (spec.dim1, spec.dim2);

    let (set1, u) = domain_set_and_point(&mut rng, spec.set1, n1);

    let mut a = uniform_matrix(&mut rng, n2, n1, 1.0);
    match spec.set2 {
        SetChoice::Orthant => {
            let au = &a * &u;
            for i in 0..n2 {
                if au[i] < 0.0 {
                    a.row_mut(i).neg_mut();
                }
            }
        }
        SetChoice::Subspace => {
            let uu = u.dot(&u);
            if uu > 0.0 {
                for i in (0..n2).filter(|i| subspace_masked(*i, n2)) {
                    let c = a.row(i).transpose().dot(&u) / uu;
                    let fixed = a.row(i) - u.transpose() * c;
                    a.set_row(i, &fixed);
                }
            }
        }
        _ => {}
    }
    let raw = BoundedLinearOp::new(a.clone(), space1, space2)?;
    if raw.norm_upper() > 0.0 {
        a *= spec.operator_norm / raw.norm_upper();
    }
    let v = &a * &u;

    let set2 = codomain_set(&mut rng, spec.set2, &v);

    let make = |lo: f64, hi: f64, anchor: &DVector<f64>, rng: &mut crate::sample::SeededRng| {
        let dim = anchor.len();
        let base = match spec.map_family {
            MapFamily::Diagonal if lo == hi => MonotoneMap::AffineScalar { a: lo, shift: vec![0.0; dim] },
            MapFamily::Diagonal if dim >= 2 => {
                let mut diag: Vec<f64> = (0..dim).map(|_| rng.gen_range(lo..=hi)).collect();
                diag[0] = lo;
                diag[dim - 1] = hi;
                MonotoneMap::DiagonalAffine { diag, shift: vec![0.0; dim] }
            }
            _ => MonotoneMap::ComponentwiseMonotone { alpha: lo, beta: hi, shift: vec![0.0; dim] },
        };
        base.vanishing_at(anchor)
    };
    let md = spec.moduli;
    let map_f1 = make(md.alpha1, md.beta1, &u, &mut rng)?;
    let map_g1 = make(md.alpha2, md.beta2, &u, &mut rng)?;
    let map_f2 = make(md.sigma1, md.eta1, &v, &mut rng)?;
    let map_g2 = make(md.sigma2, md.eta2, &v, &mut rng)?;

    Ok(SspvipInstance::new(
        space1,
        space2,
        set1,
        set2,
        [map_f1, map_g1, map_f2, map_g2],
        a,
        Some((u.clone(), u)),
    )?
    .with_seed(spec.seed))
}

fn subspace_masked(i: usize, dim: usize) -> bool {
    dim > 1 && i % 3 == 1
}

fn domain_set_and_point<R: Rng + ?Sized>(rng: &mut R, choice: SetChoice, n: usize) -> (ConvexSet, DVector<f64>) {
    match choice {
        SetChoice::Whole => (ConvexSet::WholeSpace, DVector::from_fn(n, |_, _| rng.gen_range(-2.0..=2.0))),
        SetChoice::Box => {
            let mut lower = Vec::with_capacity(n);
            let mut upper = Vec::with_capacity(n);
            let mut u = DVector::zeros(n);
            for i in 0..n {
                let l = if i % 4 == 3 { f64::NEG_INFINITY } else { -rng.gen_range(0.5..=2.0) };
                let h = rng.gen_range(0.5..=2.0);
                u[i] = if i % 3 == 0 { h } else { rng.gen_range(l.max(-2.0)..=h) };
                lower.push(l);
                upper.push(h);
            }
            (ConvexSet::Box { lower, upper }, u)
        }
        SetChoice::Orthant => (
            ConvexSet::NonnegativeOrthant,
            DVector::from_fn(n, |i, _| if i % 3 == 0 { 0.0 } else { rng.gen_range(0.0..=2.0) }),
        ),
        SetChoice::Subspace => {
            let mask: Vec<bool> = (0..n).map(|i| subspace_masked(i, n)).collect();
            let u = DVector::from_fn(n, |i, _| if mask[i] { 0.0 } else { rng.gen_range(-2.0..=2.0) });
            (ConvexSet::CoordinateSubspace { mask }, u)
        }
        SetChoice::Ball => {
            let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let radius = rng.gen_range(1.0..=2.0);
            let set = ConvexSet::EuclideanBall { center: center.clone(), radius };
            let dir: DVector<f64> = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..=1.0));
            let c = DVector::from_vec(center);
            let n_dir = dir.norm().max(f64::MIN_POSITIVE);
            let boundary = &c + dir * (radius / n_dir);
            let space = LpSpace::hilbert(n).expect("positive dimension");
            let u = set.retract(space, &boundary).expect("valid ball");
            (set, u)
        }
    }
}

fn codomain_set<R: Rng + ?Sized>(rng: &mut R, choice: SetChoice, v: &DVector<f64>) -> ConvexSet {
    let n = v.len();
    match choice {
        SetChoice::Whole => ConvexSet::WholeSpace,
        SetChoice::Box => {
            let lower = (0..n)
                .map(|i| if i % 3 == 0 { v[i] } else { v[i] - rng.gen_range(0.0..=1.0) })
                .collect();
            let upper = (0..n)
                .map(|i| if i % 4 == 3 { f64::INFINITY } else { v[i] + rng.gen_range(0.5..=1.5) })
                .collect();
            ConvexSet::Box { lower, upper }
        }
        SetChoice::Orthant => ConvexSet::NonnegativeOrthant,
        SetChoice::Subspace => ConvexSet::CoordinateSubspace {
            mask: (0..n).map(|i| subspace_masked(i, n)).collect(),
        },
        SetChoice::Ball => {
            let radius = rng.gen_range(1.0..=2.0);
            let dir: DVector<f64> = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..=1.0));
            let n_dir = dir.norm().max(f64::MIN_POSITIVE);
            let center = v - dir * (0.5 * radius / n_dir);
            ConvexSet::EuclideanBall { center: center.as_slice().to_vec(), radius }
        }
    }
}
