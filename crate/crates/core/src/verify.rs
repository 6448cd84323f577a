//! Randomized invariant checks behind the `verify` command.
//!
//! Every check reports its largest normalized violation; a check passes when
//! that violation is at most its tolerance. All sampling is driven by one
//! seed, so reports are reproducible bit for bit.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lp_space::LpSpace;
use crate::problem::{estimate_moduli, verify_instance, MonotoneMap, SspvipInstance};
use crate::retractions::RetractionReport;
use crate::sample::{rng_from_seed, rough_vector, uniform_vector, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub trials: usize,
    /// Relative tolerance for the semi-inner-product and adjoint checks.
    pub tol: f64,
    /// Tolerance for the retraction characterization.
    pub retraction_tol: f64,
    /// Slack on declared moduli.
    pub moduli_tol: f64,
    /// Residual tolerance at the known solution.
    pub solution_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 42,
            trials: 1000,
            tol: 1e-10,
            retraction_tol: 1e-12,
            moduli_tol: 1e-9,
            solution_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, max_violation: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            max_violation,
            tolerance,
            // NaN violations fail
            passed: max_violation <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub trials: usize,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Largest violations of the semi-inner-product axioms and the smoothness
/// inequality, each divided by the natural scale of the sampled terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SipViolations {
    pub additivity: f64,
    pub homogeneity: f64,
    pub positivity: f64,
    pub cauchy_schwarz: f64,
    pub second_homogeneity: f64,
    pub smoothness: f64,
    pub duality: f64,
}

fn draw<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    if rng.gen_bool(0.5) {
        uniform_vector(rng, dim, 1.0)
    } else {
        rough_vector(rng, dim)
    }
}

pub fn sip_violations<R: Rng + ?Sized>(space: LpSpace, trials: usize, rng: &mut R) -> Result<SipViolations> {
    let mut v = SipViolations::default();
    let c = space.smoothness_constant();
    for _ in 0..trials {
        let n = space.dim();
        let (x, y, z) = (draw(rng, n), draw(rng, n), draw(rng, n));
        let t: f64 = rng.gen_range(-5.0..5.0);
        let (nx, ny, nz) = (space.norm(&x)?, space.norm(&y)?, space.norm(&z)?);

        let lhs = space.sip(&(&x + &y), &z)?;
        let rhs = space.sip(&x, &z)? + space.sip(&y, &z)?;
        v.additivity = v.additivity.max((lhs - rhs).abs() / ((nx + ny) * nz).max(f64::MIN_POSITIVE));

        let sxz = space.sip(&x, &z)?;
        let scale = (t.abs() * nx * nz).max(f64::MIN_POSITIVE);
        v.homogeneity = v.homogeneity.max((space.sip(&(&x * t), &z)? - t * sxz).abs() / scale);
        v.second_homogeneity = v.second_homogeneity.max((space.sip(&x, &(&z * t))? - t * sxz).abs() / scale);

        let sxx = space.sip(&x, &x)?;
        let pos = if nx > 0.0 { (sxx - nx * nx).abs() / (nx * nx) } else { sxx.abs() };
        v.positivity = v.positivity.max(pos).max(-sxx);

        let cs = (sxz.abs() - nx * nz) / (nx * nz).max(f64::MIN_POSITIVE);
        v.cauchy_schwarz = v.cauchy_schwarz.max(cs);

        let lhs = space.norm(&(&x + &y))?.powi(2);
        let rhs = nx * nx + 2.0 * space.sip(&y, &x)? + c * ny * ny;
        let scale = (nx + ny).powi(2).max(f64::MIN_POSITIVE);
        let gap = if space.is_hilbert() { (lhs - rhs).abs() } else { lhs - rhs };
        v.smoothness = v.smoothness.max(gap / scale);

        let jx = space.duality_map(&x)?;
        let back = space.inverse_duality_map(&jx)?;
        let round_trip = space.distance(&back, &x)? / nx.max(f64::MIN_POSITIVE);
        let pairing = (jx.dot(&z) - space.sip(&z, &x)?).abs() / scale_of(nx * nz);
        v.duality = v.duality.max(round_trip).max(pairing);
    }
    Ok(v)
}

fn scale_of(s: f64) -> f64 {
    s.max(f64::MIN_POSITIVE)
}

fn push_sip_checks(checks: &mut Vec<Check>, label: &str, v: SipViolations, tol: f64) {
    for (name, val) in [
        ("additivity", v.additivity),
        ("homogeneity", v.homogeneity),
        ("positivity", v.positivity),
        ("cauchy_schwarz", v.cauchy_schwarz),
        ("second_argument_homogeneity", v.second_homogeneity),
        ("smoothness", v.smoothness),
        ("duality_map", v.duality),
    ] {
        checks.push(Check::new(format!("{label}.sip.{name}"), val, tol));
    }
}

/// Relative violations of `[Ax, y]_Y = [x, A⁺y]_X` and `‖A⁺y‖ ≤ ‖A‖ ‖y‖`.
fn adjoint_violations(inst: &SspvipInstance, trials: usize, rng: &mut SeededRng) -> Result<(f64, f64)> {
    let a = inst.operator();
    let (s1, s2) = (inst.space1(), inst.space2());
    let (mut identity, mut bound) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let x = draw(rng, s1.dim());
        let y = draw(rng, s2.dim());
        let ax = a.apply(&x)?;
        let ay = a.generalized_adjoint_apply(&y)?;
        let (nx, ny) = (s1.norm(&x)?, s2.norm(&y)?);
        let lhs = s2.sip(&ax, &y)?;
        let rhs = s1.sip(&x, &ay)?;
        let scale = scale_of(s2.norm(&ax)? * ny + nx * s1.norm(&ay)?);
        identity = identity.max((lhs - rhs).abs() / scale);
        bound = bound.max((s1.norm(&ay)? - a.norm_upper() * ny) / scale_of(a.norm_upper() * ny));
    }
    Ok((identity, bound))
}

fn push_retraction(checks: &mut Vec<Check>, label: &str, r: &RetractionReport) {
    let tol = r.tolerance;
    checks.push(Check::new(format!("{label}.firm_nonexpansive"), r.max_firm_violation, tol));
    checks.push(Check::new(format!("{label}.variational_inequality"), r.max_variational_violation, tol));
    checks.push(Check::new(format!("{label}.nonexpansive"), r.max_nonexpansive_violation, tol));
    checks.push(Check::new(format!("{label}.sunny"), r.max_sunny_violation, tol));
    checks.push(Check::new(format!("{label}.idempotence_failures"), r.idempotence_failures as f64, 0.0));
    checks.push(Check::new(format!("{label}.fixed_point_failures"), r.fixed_point_failures as f64, 0.0));
}

fn push_moduli(
    checks: &mut Vec<Check>,
    name: &str,
    map: &MonotoneMap,
    space: LpSpace,
    opts: &VerifyOptions,
    rng: &mut SeededRng,
) -> Result<()> {
    let (a_est, b_est) = estimate_moduli(map, space, opts.trials.max(2), rng)?;
    checks.push(Check::new(format!("moduli.{name}.monotonicity"), map.alpha() - a_est, opts.moduli_tol));
    checks.push(Check::new(format!("moduli.{name}.lipschitz"), b_est - map.beta(), opts.moduli_tol));
    Ok(())
}

/// Runs all suites against the spaces, sets, maps and operator of `inst`.
/// `lambda`, `gamma` are used only for the residuals at the known solution.
pub fn verify_suite(inst: &SspvipInstance, lambda: f64, gamma: f64, opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut rng = rng_from_seed(opts.seed);
    let mut checks = Vec::new();

    let v1 = sip_violations(inst.space1(), opts.trials, &mut rng)?;
    push_sip_checks(&mut checks, "space1", v1, opts.tol);
    let v2 = sip_violations(inst.space2(), opts.trials, &mut rng)?;
    push_sip_checks(&mut checks, "space2", v2, opts.tol);

    let (identity, bound) = adjoint_violations(inst, opts.trials, &mut rng)?;
    checks.push(Check::new("adjoint.identity", identity, opts.tol));
    checks.push(Check::new("adjoint.norm_bound", bound, 0.0));

    let r1 = inst.set1().verify_sunny_nonexpansive(opts.trials, opts.retraction_tol, &mut rng)?;
    push_retraction(&mut checks, "set1", &r1);
    let r2 = inst.set2().verify_sunny_nonexpansive(opts.trials, opts.retraction_tol, &mut rng)?;
    push_retraction(&mut checks, "set2", &r2);

    push_moduli(&mut checks, "F", inst.map_f1(), inst.space1(), opts, &mut rng)?;
    push_moduli(&mut checks, "G", inst.map_g1(), inst.space1(), opts, &mut rng)?;
    push_moduli(&mut checks, "f", inst.map_f2(), inst.space2(), opts, &mut rng)?;
    push_moduli(&mut checks, "g", inst.map_g2(), inst.space2(), opts, &mut rng)?;

    if let Some(c) = verify_instance(inst, lambda, gamma, opts.solution_tol)? {
        for (i, r) in c.residuals.iter().enumerate() {
            checks.push(Check::new(format!("solution.r{}", i + 1), *r, c.tolerance));
        }
        checks.push(Check::new("solution.infeasibility1", c.infeasibility1, c.tolerance));
        checks.push(Check::new("solution.infeasibility2", c.infeasibility2, c.tolerance));
    }

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { seed: opts.seed, trials: opts.trials, checks, passed })
}
