//! Relaxed retraction iterations and their contraction certificate.
//!
//! One iteration of the coupled scheme, with `x₂ = Ax₁`, `y₂ = Ay₁`:
//!
//! ```text
//! a₁ = Q₁(y₁ - λFy₁)    a₂ = Q₂(y₂ - γfy₂)
//! b₁ = Q₁(x₁ - λGx₁)    b₂ = Q₂(x₂ - γgx₂)
//! x₁ ← (1 - αₙ)x₁ + αₙ(a₁ + ρA⁺(a₂ - Aa₁))
//! y₁ ← (1 - αₙ)y₁ + αₙ(b₁ + ρA⁺(b₂ - Ab₁))
//! ```
//!
//! With `θ₁ = √(1 - 2λα₁ + c₁λ²β₁²)` (and `θ₂`, `θ₃`, `θ₄` built the same
//! way from `G`, `f`, `g`), `m = ρ‖A⁺‖‖A‖` and `kᵢ = θᵢ + m(θᵢ + θᵢ₊₂)`, the
//! error in the sum norm `‖(x, y)‖_* = ‖x‖ + ‖y‖` obeys
//! `‖eⁿ⁺¹‖_* ≤ (1 - αₙ(1 - θ))‖eⁿ‖_*` with `θ = max(k₁, k₂)`. `θ < 1` is
//! equivalent to `θᵢ < pᵢ = (1 - mθᵢ₊₂)/(1 + m)`, i.e. to `λ` lying strictly
//! inside the window between the roots of `c₁βᵢ²λ² - 2αᵢλ + (1 - pᵢ²)`.

use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::BoundedLinearOp;
use crate::lp_space::LpSpace;
use crate::problem::{Moduli, MonotoneMap, SspvipInstance, Stage};
use crate::retractions::Retraction;

/// Error growth factor treated as divergence.
const DIVERGENCE_FACTOR: f64 = 1e12;

/// Relaxation sequence `αₙ ∈ (0, 1]`. Both variants have a divergent sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Relaxation {
    Constant { value: f64 },
    /// `αₙ = scale / (n + 1)`
    Harmonic { scale: f64 },
}

impl Relaxation {
    pub fn at(&self, n: usize) -> f64 {
        match *self {
            Relaxation::Constant { value } => value,
            Relaxation::Harmonic { scale } => scale / (n as f64 + 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            Relaxation::Constant { value } => value,
            Relaxation::Harmonic { scale } => scale,
        };
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::InvalidParameter(format!("relaxation must lie in (0, 1], got {v}")));
        }
        Ok(())
    }
}

impl FromStr for Relaxation {
    type Err = Error;

    /// `"0.9"`, `"harmonic"` or `"harmonic:0.5"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |e: std::num::ParseFloatError| Error::InvalidParameter(format!("relaxation {s:?}: {e}"));
        let r = if s == "harmonic" {
            Relaxation::Harmonic { scale: 1.0 }
        } else if let Some(rest) = s.strip_prefix("harmonic:") {
            Relaxation::Harmonic { scale: rest.parse().map_err(bad)? }
        } else {
            Relaxation::Constant { value: s.parse().map_err(bad)? }
        };
        r.validate()?;
        Ok(r)
    }
}

impl fmt::Display for Relaxation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relaxation::Constant { value } => write!(f, "{value}"),
            Relaxation::Harmonic { scale } => write!(f, "harmonic:{scale}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub rho: f64,
    pub relaxation: Relaxation,
    pub max_iters: usize,
    /// Stop once the largest fixed-point residual is at most this.
    pub tol_residual: f64,
    /// Stop once `‖(x₁ⁿ⁺¹, y₁ⁿ⁺¹) - (x₁ⁿ, y₁ⁿ)‖_*` is at most this.
    pub tol_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.4,
            gamma: 0.4,
            rho: 0.05,
            relaxation: Relaxation::Constant { value: 0.9 },
            max_iters: 10_000,
            tol_residual: 1e-10,
            tol_step: 1e-14,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("gamma", self.gamma), ("rho", self.rho)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("tol_residual", self.tol_residual), ("tol_step", self.tol_step)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        self.relaxation.validate()
    }
}

/// Everything the certificate depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateInputs {
    pub moduli: Moduli,
    /// Smoothness constant of `E₁`.
    pub c1: f64,
    /// Smoothness constant of `E₂`.
    pub c2: f64,
    pub norm_a: f64,
    pub norm_adjoint: f64,
    pub lambda: f64,
    pub gamma: f64,
    /// Zero is accepted here (decoupled limit) even though the solver needs `ρ > 0`.
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaWindow {
    pub lower: f64,
    pub upper: f64,
}

impl LambdaWindow {
    pub fn is_empty(&self) -> bool {
        self.lower >= self.upper
    }

    pub fn contains(&self, lambda: f64) -> bool {
        self.lower < lambda && lambda < self.upper
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Contraction factors and the admissible step-size window.
///
/// Quantities that are undefined for the given parameters (a negative
/// radicand, a nonpositive `pᵢ`) are `None`, with the reason recorded in
/// `diagnostics`; the certificate is then infeasible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionCertificate {
    pub inputs: CertificateInputs,
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub theta3: Option<f64>,
    pub theta4: Option<f64>,
    pub m: f64,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub theta: Option<f64>,
    pub lambda_window: Option<LambdaWindow>,
    pub feasible: bool,
    pub diagnostics: Vec<String>,
}

fn contraction_factor(step: f64, modulus: f64, lipschitz: f64, c: f64) -> std::result::Result<f64, f64> {
    let radicand = 1.0 - 2.0 * step * modulus + c * step * step * lipschitz * lipschitz;
    if radicand >= 0.0 {
        Ok(radicand.sqrt())
    } else if radicand >= -16.0 * f64::EPSILON {
        Ok(0.0)
    } else {
        Err(radicand)
    }
}

impl ContractionCertificate {
    pub fn compute(inputs: CertificateInputs) -> Self {
        let CertificateInputs { moduli: md, c1, c2, norm_a, norm_adjoint, lambda, gamma, rho } = inputs;
        let mut diagnostics = Vec::new();

        let mut factor = |name: &str, step: f64, modulus: f64, lipschitz: f64, c: f64| {
            match contraction_factor(step, modulus, lipschitz, c) {
                Ok(t) => Some(t),
                Err(r) => {
                    diagnostics.push(format!("{name}: negative radicand {r:e}"));
                    None
                }
            }
        };
        let theta1 = factor("theta1", lambda, md.alpha1, md.beta1, c1);
        let theta2 = factor("theta2", lambda, md.alpha2, md.beta2, c1);
        let theta3 = factor("theta3", gamma, md.sigma1, md.eta1, c2);
        let theta4 = factor("theta4", gamma, md.sigma2, md.eta2, c2);

        let m = rho * norm_adjoint * norm_a;
        let p_of = |t: Option<f64>| t.map(|t| (1.0 - m * t) / (1.0 + m));
        let p1 = p_of(theta3);
        let p2 = p_of(theta4);
        let k_of = |a: Option<f64>, b: Option<f64>| Some(a? + m * (a? + b?));
        let k1 = k_of(theta1, theta3);
        let k2 = k_of(theta2, theta4);
        let theta = match (k1, k2) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };

        let mut window: Option<LambdaWindow> = Some(LambdaWindow {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        });
        for (i, p, alpha, beta) in [(1, p1, md.alpha1, md.beta1), (2, p2, md.alpha2, md.beta2)] {
            let Some(p) = p else {
                window = None;
                continue;
            };
            if !(p > 0.0 && p <= 1.0) {
                diagnostics.push(format!("p{i} = {p} outside (0, 1]: m * theta{} >= 1", i + 2));
                window = None;
                continue;
            }
            let disc = alpha * alpha - c1 * beta * beta * (1.0 - p * p);
            if disc <= 0.0 {
                diagnostics.push(format!("alpha{i} <= beta{i} * sqrt(c1 (1 - p{i}^2)): window {i} is empty"));
                window = None;
                continue;
            }
            let denom = c1 * beta * beta;
            let root = disc.sqrt();
            if let Some(w) = window.as_mut() {
                w.lower = w.lower.max((alpha - root) / denom);
                w.upper = w.upper.min((alpha + root) / denom);
            }
        }

        let mut feasible = window.is_some() && theta.is_some();
        if let Some(w) = window {
            if w.is_empty() {
                diagnostics.push(format!("lambda window ({}, {}) is empty", w.lower, w.upper));
                feasible = false;
            } else if !w.contains(lambda) {
                diagnostics.push(format!("lambda = {lambda} outside window ({}, {})", w.lower, w.upper));
                feasible = false;
            }
        }
        if let Some(t) = theta {
            if t >= 1.0 {
                diagnostics.push(format!("theta = {t} >= 1"));
                feasible = false;
            }
        }

        Self {
            inputs,
            theta1,
            theta2,
            theta3,
            theta4,
            m,
            p1,
            p2,
            k1,
            k2,
            theta,
            lambda_window: window,
            feasible,
            diagnostics,
        }
    }

    /// `λ` strictly inside a nonempty window.
    pub fn lambda_in_window(&self) -> bool {
        self.lambda_window
            .is_some_and(|w| !w.is_empty() && w.contains(self.inputs.lambda))
    }

    /// Per-iteration factor `1 - αₙ(1 - θ)`.
    pub fn rate(&self, alpha_n: f64) -> Option<f64> {
        self.theta.map(|t| 1.0 - alpha_n * (1.0 - t))
    }
}

pub fn certificate_inputs(inst: &SspvipInstance, cfg: &SolverConfig) -> CertificateInputs {
    let a = inst.operator();
    CertificateInputs {
        moduli: inst.moduli(),
        c1: inst.space1().smoothness_constant(),
        c2: inst.space2().smoothness_constant(),
        norm_a: a.norm_upper(),
        norm_adjoint: a.adjoint_norm_bound(),
        lambda: cfg.lambda,
        gamma: cfg.gamma,
        rho: cfg.rho,
    }
}

pub fn certificate(inst: &SspvipInstance, cfg: &SolverConfig) -> ContractionCertificate {
    ContractionCertificate::compute(certificate_inputs(inst, cfg))
}

/// Minimizes `max(g₁(t), g₂(t))` for two convex quadratics on `[0, hi]`.
fn minimize_max_convex(g: impl Fn(f64) -> f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..200 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if g(a) <= g(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

/// Picks `γ` minimizing `max(θ₃, θ₄)`, then `λ` at the middle of the
/// resulting window (or minimizing `max(θ₁, θ₂)` when there is no window).
pub fn tune_steps(inst: &SspvipInstance, rho: f64) -> (f64, f64) {
    let md = inst.moduli();
    let c1 = inst.space1().smoothness_constant();
    let c2 = inst.space2().smoothness_constant();
    let rad = |t: f64, a: f64, b: f64, c: f64| 1.0 - 2.0 * t * a + c * t * t * b * b;
    let gamma = minimize_max_convex(
        |g| rad(g, md.sigma1, md.eta1, c2).max(rad(g, md.sigma2, md.eta2, c2)),
        2.0 * (md.sigma1 / (c2 * md.eta1 * md.eta1)).max(md.sigma2 / (c2 * md.eta2 * md.eta2)),
    );
    let probe = SolverConfig { lambda: 1.0, gamma, rho, ..SolverConfig::default() };
    let cert = certificate(inst, &probe);
    let lambda = match cert.lambda_window {
        Some(w) if !w.is_empty() => w.midpoint(),
        _ => minimize_max_convex(
            |l| rad(l, md.alpha1, md.beta1, c1).max(rad(l, md.alpha2, md.beta2, c1)),
            2.0 * (md.alpha1 / (c1 * md.beta1 * md.beta1)).max(md.alpha2 / (c1 * md.beta2 * md.beta2)),
        ),
    };
    (lambda, gamma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    ResidualTolerance,
    StepTolerance,
    MaxIterations,
    Diverged { detail: String },
}

impl Termination {
    pub fn converged(&self) -> bool {
        matches!(self, Termination::ResidualTolerance | Termination::StepTolerance)
    }
}

/// State after `n` iterations together with the intermediates computed from it.
#[derive(Debug, Clone)]
pub struct IterateRecord {
    pub n: usize,
    pub x1: DVector<f64>,
    pub y1: DVector<f64>,
    pub stage: Stage,
    pub residuals: [f64; 4],
    /// `‖(x₁ⁿ, y₁ⁿ) - (x₁★, y₁★)‖_*`, when the solution is known.
    pub err_star: Option<f64>,
    /// `[‖x₂ⁿ - x₂★‖, ‖y₂ⁿ - y₂★‖]`, when the solution is known.
    pub image_errors: Option<[f64; 2]>,
    /// Relaxation used to reach this state; `None` for the start.
    pub alpha: Option<f64>,
    pub step: Option<f64>,
    /// `(1 - αₙ₋₁(1 - θ)) ‖eⁿ⁻¹‖_*`, the bound this record's error must meet.
    pub theta_bound_rhs: Option<f64>,
}

impl IterateRecord {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct IterateTrace {
    pub records: Vec<IterateRecord>,
    pub termination: Termination,
    pub certificate: ContractionCertificate,
}

impl IterateTrace {
    /// Iterations executed; one less than the number of records.
    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }

    pub fn last(&self) -> &IterateRecord {
        self.records.last().expect("trace holds the initial state")
    }
}

/// Runs the coupled iteration from `(x₁⁰, y₁⁰)`.
///
/// The run proceeds even if the certificate is infeasible (a warning is
/// logged). Divergence (non-finite values, or residuals or errors growing by
/// more than 10¹²) ends the run with [`Termination::Diverged`].
pub fn solve_sspvip(
    inst: &SspvipInstance,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
) -> Result<IterateTrace> {
    cfg.validate()?;
    let space = inst.space1();
    space.check(x0)?;
    space.check(y0)?;
    let cert = certificate(inst, cfg);
    if !cert.feasible {
        warn!("contraction certificate is infeasible: {}", cert.diagnostics.join("; "));
    }
    let a = inst.operator();
    let solution = inst
        .known_solution()
        .map(|(x, y)| -> Result<_> { Ok((x.clone(), y.clone(), a.apply(x)?, a.apply(y)?)) })
        .transpose()?;
    let errors = |x: &DVector<f64>, y: &DVector<f64>, st: &Stage| -> Result<(Option<f64>, Option<[f64; 2]>)> {
        match &solution {
            None => Ok((None, None)),
            Some((xs, ys, x2s, y2s)) => {
                let e = space.distance(x, xs)? + space.distance(y, ys)?;
                let s2 = inst.space2();
                Ok((Some(e), Some([s2.distance(&st.x2, x2s)?, s2.distance(&st.y2, y2s)?])))
            }
        }
    };

    let stage = inst.stage(x0, y0, cfg.lambda, cfg.gamma)?;
    let residuals = inst.residuals_of(x0, y0, &stage)?;
    let (err_star, image_errors) = errors(x0, y0, &stage)?;
    let mut records = vec![IterateRecord {
        n: 0,
        x1: x0.clone(),
        y1: y0.clone(),
        stage,
        residuals,
        err_star,
        image_errors,
        alpha: None,
        step: None,
        theta_bound_rhs: None,
    }];
    let residual_limit = DIVERGENCE_FACTOR * (1.0 + records[0].max_residual());
    let error_limit = err_star.map(|e| DIVERGENCE_FACTOR * (1.0 + e));

    let mut termination = Termination::MaxIterations;
    for n in 0..cfg.max_iters {
        let prev = records.last().expect("nonempty");
        let alpha = cfg.relaxation.at(n);
        let st = &prev.stage;
        let x_target = &st.a1 + a.generalized_adjoint_apply(&(&st.a2 - a.apply(&st.a1)?))? * cfg.rho;
        let y_target = &st.b1 + a.generalized_adjoint_apply(&(&st.b2 - a.apply(&st.b1)?))? * cfg.rho;
        let x = &prev.x1 * (1.0 - alpha) + x_target * alpha;
        let y = &prev.y1 * (1.0 - alpha) + y_target * alpha;
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            termination = Termination::Diverged { detail: format!("non-finite iterate at n = {}", n + 1) };
            break;
        }
        let stage = match inst.stage(&x, &y, cfg.lambda, cfg.gamma) {
            Ok(s) => s,
            Err(Error::NonFinite(what)) => {
                termination = Termination::Diverged { detail: format!("non-finite {what} at n = {}", n + 1) };
                break;
            }
            Err(e) => return Err(e),
        };
        let step = space.distance(&x, &prev.x1)? + space.distance(&y, &prev.y1)?;
        let theta_bound_rhs = match (prev.err_star, cert.rate(alpha)) {
            (Some(e), Some(r)) => Some(r * e),
            _ => None,
        };
        let residuals = inst.residuals_of(&x, &y, &stage)?;
        let (err_star, image_errors) = errors(&x, &y, &stage)?;
        records.push(IterateRecord {
            n: n + 1,
            x1: x,
            y1: y,
            stage,
            residuals,
            err_star,
            image_errors,
            alpha: Some(alpha),
            step: Some(step),
            theta_bound_rhs,
        });

        let max_res = residuals.iter().cloned().fold(0.0, f64::max);
        if !max_res.is_finite() || max_res > residual_limit {
            termination = Termination::Diverged { detail: format!("residual {max_res:e} at n = {}", n + 1) };
            break;
        }
        if let (Some(e), Some(limit)) = (err_star, error_limit) {
            if e > limit {
                termination = Termination::Diverged { detail: format!("error {e:e} at n = {}", n + 1) };
                break;
            }
        }
        if max_res <= cfg.tol_residual {
            termination = Termination::ResidualTolerance;
            break;
        }
        if step <= cfg.tol_step {
            termination = Termination::StepTolerance;
            break;
        }
    }
    Ok(IterateTrace { records, termination, certificate: cert })
}

/// The single-inequality special case: `G = F`, `g = f`, `γ = λ`, `y₁ = x₁`.
#[derive(Debug, Clone)]
pub struct SpvipInstance {
    space1: LpSpace,
    space2: LpSpace,
    set1: Retraction,
    set2: Retraction,
    map_f1: MonotoneMap,
    map_f2: MonotoneMap,
    operator: BoundedLinearOp,
    known_solution: Option<DVector<f64>>,
}

impl SpvipInstance {
    /// Keeps `F`, `f` and the `x`-part of the known solution of `inst`,
    /// dropping `G`, `g`.
    pub fn from_sspvip(inst: &SspvipInstance) -> Self {
        Self {
            space1: inst.space1(),
            space2: inst.space2(),
            set1: inst.set1().clone(),
            set2: inst.set2().clone(),
            map_f1: inst.map_f1().clone(),
            map_f2: inst.map_f2().clone(),
            operator: inst.operator().clone(),
            known_solution: inst.known_solution().map(|(x, _)| x.clone()),
        }
    }

    /// The equivalent coupled instance with `G = F`, `g = f`.
    pub fn to_sspvip(&self) -> Result<SspvipInstance> {
        SspvipInstance::new(
            self.space1,
            self.space2,
            self.set1.set().clone(),
            self.set2.set().clone(),
            [self.map_f1.clone(), self.map_f1.clone(), self.map_f2.clone(), self.map_f2.clone()],
            self.operator.matrix().clone(),
            self.known_solution.clone().map(|x| (x.clone(), x)),
        )
    }

    pub fn known_solution(&self) -> Option<&DVector<f64>> {
        self.known_solution.as_ref()
    }

    pub fn space1(&self) -> LpSpace {
        self.space1
    }
}

#[derive(Debug, Clone)]
pub struct SpvipRecord {
    pub n: usize,
    pub x1: DVector<f64>,
    /// `Q₁(x₁ - λFx₁)`
    pub a1: DVector<f64>,
    /// `Q₂(Ax₁ - λfAx₁)`
    pub a2: DVector<f64>,
    /// `[‖x₁ - a₁‖, ‖Ax₁ - a₂‖]`
    pub residuals: [f64; 2],
    pub err: Option<f64>,
    pub step: Option<f64>,
    pub theta_bound_rhs: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SpvipTrace {
    pub records: Vec<SpvipRecord>,
    pub termination: Termination,
    pub certificate: ContractionCertificate,
}

impl SpvipTrace {
    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }
}

/// Single-sequence iteration for the reduced problem. `cfg.gamma` is ignored:
/// both retractions use the step `λ`.
pub fn solve_spvip(inst: &SpvipInstance, cfg: &SolverConfig, x0: &DVector<f64>) -> Result<SpvipTrace> {
    let cfg = SolverConfig { gamma: cfg.lambda, ..cfg.clone() };
    cfg.validate()?;
    let space = inst.space1;
    space.check(x0)?;
    let cert = certificate(&inst.to_sspvip()?, &cfg);
    if !cert.feasible {
        warn!("contraction certificate is infeasible: {}", cert.diagnostics.join("; "));
    }
    let a = &inst.operator;
    let lambda = cfg.lambda;
    let sweep = |x: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>, [f64; 2])> {
        let x2 = a.apply(x)?;
        let a1 = inst.set1.retract(&(x - inst.map_f1.evaluate(x)? * lambda))?;
        let a2 = inst.set2.retract(&(&x2 - inst.map_f2.evaluate(&x2)? * lambda))?;
        let r = [space.distance(x, &a1)?, inst.space2.distance(&x2, &a2)?];
        Ok((a1, a2, r))
    };
    let err = |x: &DVector<f64>| -> Result<Option<f64>> {
        inst.known_solution.as_ref().map(|s| space.distance(x, s)).transpose()
    };

    let (a1, a2, residuals) = sweep(x0)?;
    let mut records = vec![SpvipRecord {
        n: 0,
        x1: x0.clone(),
        a1,
        a2,
        residuals,
        err: err(x0)?,
        step: None,
        theta_bound_rhs: None,
    }];
    let residual_limit = DIVERGENCE_FACTOR * (1.0 + residuals[0].max(residuals[1]));

    let mut termination = Termination::MaxIterations;
    for n in 0..cfg.max_iters {
        let prev = records.last().expect("nonempty");
        let alpha = cfg.relaxation.at(n);
        let target = &prev.a1 + a.generalized_adjoint_apply(&(&prev.a2 - a.apply(&prev.a1)?))? * cfg.rho;
        let x = &prev.x1 * (1.0 - alpha) + target * alpha;
        if x.iter().any(|v| !v.is_finite()) {
            termination = Termination::Diverged { detail: format!("non-finite iterate at n = {}", n + 1) };
            break;
        }
        let (a1, a2, residuals) = match sweep(&x) {
            Ok(v) => v,
            Err(Error::NonFinite(what)) => {
                termination = Termination::Diverged { detail: format!("non-finite {what} at n = {}", n + 1) };
                break;
            }
            Err(e) => return Err(e),
        };
        let step = space.distance(&x, &prev.x1)?;
        let theta_bound_rhs = match (prev.err, cert.rate(alpha)) {
            (Some(e), Some(r)) => Some(r * e),
            _ => None,
        };
        let e = err(&x)?;
        records.push(SpvipRecord {
            n: n + 1,
            x1: x,
            a1,
            a2,
            residuals,
            err: e,
            step: Some(step),
            theta_bound_rhs,
        });
        let max_res = residuals[0].max(residuals[1]);
        if !max_res.is_finite() || max_res > residual_limit {
            termination = Termination::Diverged { detail: format!("residual {max_res:e} at n = {}", n + 1) };
            break;
        }
        if max_res <= cfg.tol_residual {
            termination = Termination::ResidualTolerance;
            break;
        }
        if step <= cfg.tol_step {
            termination = Termination::StepTolerance;
            break;
        }
    }
    Ok(SpvipTrace { records, termination, certificate: cert })
}
