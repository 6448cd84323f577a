//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits nonzero if any fails.
//!
//! Reference values come from the oracles below, which are written directly
//! from the defining formulas and share no code with the library.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use sspvip::problem::{generate_instance, GeneratorSpec, MapFamily, Moduli, MonotoneMap, SetChoice, SspvipInstance};
use sspvip::retractions::{ConvexSet, Retraction};
use sspvip::sample::{rng_from_seed, SeededRng};
use sspvip::solver::{
    solve_spvip, solve_sspvip, tune_steps, CertificateInputs, ContractionCertificate, IterateTrace,
    Relaxation, SolverConfig, SpvipInstance,
};
use sspvip::{BoundedLinearOp, LpSpace};

// ---------- oracles ----------

fn o_norm(x: &[f64], p: f64) -> f64 {
    x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `‖y‖^{2-p} Σ xᵢ yᵢ |yᵢ|^{p-2}`, zero when `y = 0`.
fn o_sip(x: &[f64], y: &[f64], p: f64) -> f64 {
    let ny = o_norm(y, p);
    if ny == 0.0 {
        return 0.0;
    }
    let s: f64 = x.iter().zip(y).map(|(a, b)| a * b * b.abs().powf(p - 2.0)).sum();
    ny.powf(2.0 - p) * s
}

/// Normalized duality map of ℓ^r.
fn o_duality(y: &[f64], r: f64) -> Vec<f64> {
    let ny = o_norm(y, r);
    if ny == 0.0 {
        return vec![0.0; y.len()];
    }
    y.iter().map(|v| ny.powf(2.0 - r) * v.signum() * v.abs().powf(r - 1.0)).collect()
}

/// `A⁺y = J_{q₁}(Aᵀ J_{p₂}(y))`, using `J_p⁻¹ = J_q`.
fn o_adjoint(a: &DMatrix<f64>, y: &[f64], p1: f64, p2: f64) -> Vec<f64> {
    let jy = o_duality(y, p2);
    let u: Vec<f64> = (0..a.ncols()).map(|j| (0..a.nrows()).map(|i| a[(i, j)] * jy[i]).sum()).collect();
    o_duality(&u, p1 / (p1 - 1.0))
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn draw(rng: &mut SeededRng, n: usize) -> DVector<f64> {
    // mixed magnitudes and exact zeros stress the weighted sums
    if rng.gen_bool(0.5) {
        DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
    } else {
        DVector::from_fn(n, |_, _| {
            if rng.gen_bool(0.1) {
                0.0
            } else {
                rng.gen_range(-1.0..1.0) * 10f64.powf(rng.gen_range(-3.0..3.0))
            }
        })
    }
}

// ---------- harness ----------

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

// ---------- criteria ----------

fn sip_axioms() -> Outcome {
    let clock = Instant::now();
    let mut rng = rng_from_seed(1);
    let mut worst = [0.0f64; 7];
    for p in [2.0, 3.0, 4.0] {
        for n in [1, 2, 5, 50] {
            let s = LpSpace::new(n, p).unwrap();
            for _ in 0..10_000 {
                let (x, y, z) = (draw(&mut rng, n), draw(&mut rng, n), draw(&mut rng, n));
                let t: f64 = rng.gen_range(-5.0..5.0);
                let (nx, ny, nz) = (o_norm(x.as_slice(), p), o_norm(y.as_slice(), p), o_norm(z.as_slice(), p));
                let sip = |a: &DVector<f64>, b: &DVector<f64>| s.sip(a, b).unwrap();
                let rel = |v: f64, scale: f64| if scale > 0.0 { v.abs() / scale } else { v.abs() };

                let sxz = sip(&x, &z);
                let checks = [
                    rel(sip(&(&x + &y), &z) - sxz - sip(&y, &z), (nx + ny) * nz),
                    rel(sip(&(&x * t), &z) - t * sxz, t.abs() * nx * nz),
                    rel(sip(&x, &x) - nx * nx, nx * nx).max(-sip(&x, &x)),
                    ((sxz.abs() - nx * nz) / (nx * nz).max(f64::MIN_POSITIVE)).max(0.0),
                    rel(sip(&x, &(&z * t)) - t * sxz, t.abs() * nx * nz),
                    rel(sxz - o_sip(x.as_slice(), z.as_slice(), p), nx * nz),
                    rel(s.norm(&x).unwrap() - nx, nx),
                ];
                for (w, c) in worst.iter_mut().zip(checks) {
                    *w = w.max(c);
                }
            }
        }
    }
    let max = worst.iter().cloned().fold(0.0, f64::max);
    let secs = clock.elapsed().as_secs_f64();
    outcome(
        max <= 1e-10 && secs < 5.0,
        format!(
            "additivity {:.1e}, homogeneity {:.1e}, positivity {:.1e}, Cauchy-Schwarz {:.1e}, \
             second-argument homogeneity {:.1e}, oracle sip {:.1e}, oracle norm {:.1e}; {secs:.2} s",
            worst[0], worst[1], worst[2], worst[3], worst[4], worst[5], worst[6]
        ),
    )
}

fn smoothness() -> Outcome {
    let mut rng = rng_from_seed(2);
    let mut worst = 0.0f64;
    let mut hilbert_gap = 0.0f64;
    for p in [2.0, 3.0, 4.0] {
        for k in 0..10_000 {
            let n = [1, 2, 5, 50][k % 4];
            let s = LpSpace::new(n, p).unwrap();
            let (x, y) = (draw(&mut rng, n), draw(&mut rng, n));
            let (nx, ny) = (o_norm(x.as_slice(), p), o_norm(y.as_slice(), p));
            let lhs = o_norm((&x + &y).as_slice(), p).powi(2);
            let rhs = nx * nx + 2.0 * s.sip(&y, &x).unwrap() + s.smoothness_constant() * ny * ny;
            let scale = (nx + ny).powi(2).max(f64::MIN_POSITIVE);
            worst = worst.max((lhs - rhs) / scale);
            if p == 2.0 {
                hilbert_gap = hilbert_gap.max((lhs - rhs).abs() / scale);
            }
        }
    }
    outcome(
        worst <= 1e-10 && hilbert_gap <= 1e-12,
        format!("max violation {worst:.1e}, |gap| at p = 2 {hilbert_gap:.1e}"),
    )
}

fn generalized_adjoint() -> Outcome {
    let mut rng = rng_from_seed(3);
    let (mut identity, mut oracle, mut bound_violations, mut transpose) = (0.0f64, 0.0f64, 0usize, 0.0f64);
    let mut triples = 0;
    for p1 in [2.0, 3.0, 4.0] {
        for p2 in [2.0, 3.0, 4.0] {
            for _ in 0..1000 {
                let (m, n) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
                let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-2.0..2.0));
                let (sx, sy) = (LpSpace::new(n, p1).unwrap(), LpSpace::new(m, p2).unwrap());
                let op = BoundedLinearOp::new(a.clone(), sx, sy).unwrap();
                let (x, y) = (draw(&mut rng, n), draw(&mut rng, m));
                let ax = op.apply(&x).unwrap();
                let ay = op.generalized_adjoint_apply(&y).unwrap();
                let (nx, ny) = (o_norm(x.as_slice(), p1), o_norm(y.as_slice(), p2));
                let nay = o_norm(ay.as_slice(), p1);
                let lhs = o_sip(ax.as_slice(), y.as_slice(), p2);
                let rhs = o_sip(x.as_slice(), ay.as_slice(), p1);
                let scale = (o_norm(ax.as_slice(), p2) * ny + nx * nay).max(f64::MIN_POSITIVE);
                identity = identity.max((lhs - rhs).abs() / scale);
                let want = o_adjoint(&a, y.as_slice(), p1, p2);
                oracle = oracle.max(o_norm(&sub(ay.as_slice(), &want), p1) / o_norm(&want, p1).max(f64::MIN_POSITIVE));
                if nay > op.norm_upper() * ny || op.norm_lower() > op.norm_upper() {
                    bound_violations += 1;
                }
                if p1 == 2.0 && p2 == 2.0 {
                    let y_unit = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
                    let got = op.generalized_adjoint_apply(&y_unit).unwrap();
                    for j in 0..n {
                        let t: f64 = (0..m).map(|i| a[(i, j)] * y_unit[i]).sum();
                        transpose = transpose.max((got[j] - t).abs());
                    }
                }
                triples += 1;
            }
        }
    }
    // nonlinearity: A = [[1,1],[0,1]] on ℓ³, A⁺(e₁+e₂) ≠ A⁺e₁ + A⁺e₂
    let s3 = LpSpace::new(2, 3.0).unwrap();
    let op = BoundedLinearOp::new(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]), s3, s3).unwrap();
    let e1 = DVector::from_vec(vec![1.0, 0.0]);
    let e2 = DVector::from_vec(vec![0.0, 1.0]);
    let joint = op.generalized_adjoint_apply(&(&e1 + &e2)).unwrap();
    let split = op.generalized_adjoint_apply(&e1).unwrap() + op.generalized_adjoint_apply(&e2).unwrap();
    let want_joint = o_adjoint(op.matrix(), &[1.0, 1.0], 3.0, 3.0);
    let witness_gap = (&joint - &split).amax();
    let witness_ok = witness_gap > 1e-3 && o_norm(&sub(joint.as_slice(), &want_joint), 3.0) <= 1e-12;
    outcome(
        identity <= 1e-10 && oracle <= 1e-10 && bound_violations == 0 && transpose <= 1e-14 && witness_ok,
        format!(
            "{triples} triples: identity {identity:.1e}, oracle {oracle:.1e}, bound violations {bound_violations}, \
             transpose {transpose:.1e}; witness A+(e1+e2) = [{:.6}, {:.6}] vs A+e1 + A+e2 = [{:.6}, {:.6}]",
            joint[0], joint[1], split[0], split[1]
        ),
    )
}

fn catalog() -> Vec<(ConvexSet, f64)> {
    let mut out = Vec::new();
    for p in [2.0, 3.0, 4.0] {
        out.push((ConvexSet::WholeSpace, p));
        out.push((
            ConvexSet::Box {
                lower: vec![-1.0, 0.0, f64::NEG_INFINITY, -0.5, 2.0],
                upper: vec![1.0, 0.0, 0.5, f64::INFINITY, 3.0],
            },
            p,
        ));
        out.push((ConvexSet::NonnegativeOrthant, p));
        out.push((ConvexSet::CoordinateSubspace { mask: vec![true, false, false, true, false] }, p));
    }
    out.push((ConvexSet::EuclideanBall { center: vec![0.5, -0.5, 0.0, 1.0, 0.2], radius: 1.5 }, 2.0));
    out
}

fn retractions() -> Outcome {
    let mut rng = rng_from_seed(4);
    let mut lib_worst = 0.0f64;
    let mut worst = [0.0f64; 4];
    let mut exact_failures = 0usize;
    let mut lib_failures = Vec::new();
    for (set, p) in catalog() {
        let space = LpSpace::new(5, p).unwrap();
        let q = Retraction::new(set.clone(), space).unwrap();
        let report = q.verify_sunny_nonexpansive(1000, 1e-12, &mut rng).unwrap();
        lib_worst = lib_worst.max(report.max_violation());
        if !report.passed() {
            lib_failures.push(format!("{}@p={p}", set.name()));
        }
        for _ in 0..1000 {
            let x = DVector::from_fn(5, |_, _| rng.gen_range(-4.0..4.0));
            let z = DVector::from_fn(5, |_, _| rng.gen_range(-4.0..4.0));
            let (qx, qz) = (q.retract(&x).unwrap(), q.retract(&z).unwrap());
            let y = qz.clone();
            let scale = 1.0 + o_norm(x.as_slice(), p).powi(2) + o_norm(z.as_slice(), p).powi(2);
            let dq = sub(qx.as_slice(), qz.as_slice());
            let dx = sub(x.as_slice(), z.as_slice());
            // ‖Qx - Qz‖² ≤ [x - z, Qx - Qz]
            worst[0] = worst[0].max((o_norm(&dq, p).powi(2) - o_sip(&dx, &dq, p)) / scale);
            // [x - Qx, y - Qx] ≤ 0 for y ∈ C
            let r = sub(x.as_slice(), qx.as_slice());
            worst[1] = worst[1].max(o_sip(&r, &sub(y.as_slice(), qx.as_slice()), p) / scale);
            worst[2] = worst[2].max((o_norm(&dq, p) - o_norm(&dx, p)) / scale.sqrt());
            for t in [0.0, 0.5, 1.0, 2.0, 10.0] {
                let ray = &qx + (&x - &qx) * t;
                let back = q.retract(&ray).unwrap();
                worst[3] = worst[3].max(o_norm(&sub(back.as_slice(), qx.as_slice()), p) / scale.sqrt());
            }
            if q.retract(&qx).unwrap() != qx || q.retract(&y).unwrap() != y {
                exact_failures += 1;
            }
        }
    }
    let max = worst.iter().cloned().fold(lib_worst, f64::max);
    outcome(
        max <= 1e-12 && exact_failures == 0 && lib_failures.is_empty(),
        format!(
            "13 set/exponent pairs: firm {:.1e}, variational {:.1e}, nonexpansive {:.1e}, sunny {:.1e}, \
             library report {lib_worst:.1e}, exactness failures {exact_failures}{}",
            worst[0],
            worst[1],
            worst[2],
            worst[3],
            if lib_failures.is_empty() { String::new() } else { format!(", failing {lib_failures:?}") }
        ),
    )
}

fn certificate_algebra() -> Outcome {
    let mut rng = rng_from_seed(5);
    let (mut draws, mut inside, mut disagreements, mut k_disagreements, mut inconsistent) = (0, 0, 0, 0, 0);
    while draws < 100 {
        let mut pair = || {
            let a: f64 = rng.gen_range(0.5..2.0);
            (a, a * rng.gen_range(1.0..1.6))
        };
        let (a1, b1) = pair();
        let (a2, b2) = pair();
        let (s1, e1) = pair();
        let (s2, e2) = pair();
        let c1 = [1.0, 2.0, 3.0][rng.gen_range(0..3)];
        let c2 = [1.0, 2.0, 3.0][rng.gen_range(0..3)];
        let norm_a = rng.gen_range(0.5..2.0);
        let inputs = CertificateInputs {
            moduli: Moduli::from_array([a1, b1, a2, b2, s1, e1, s2, e2]).unwrap(),
            c1,
            c2,
            norm_a,
            norm_adjoint: norm_a,
            lambda: rng.gen_range(0.0..1.0) * 2.0 * a1.max(a2) / c1,
            gamma: (s1 / (c2 * e1 * e1)).min(s2 / (c2 * e2 * e2)) * rng.gen_range(0.5..1.5),
            rho: rng.gen_range(0.0..0.3) / (norm_a * norm_a),
        };
        let cert = ContractionCertificate::compute(inputs);
        let Some(w) = cert.lambda_window.filter(|w| !w.is_empty()) else {
            continue;
        };
        draws += 1;

        let th = |l: f64, a: f64, b: f64, c: f64| (1.0 - 2.0 * l * a + c * l * l * b * b).max(0.0).sqrt();
        let m = inputs.rho * inputs.norm_adjoint * inputs.norm_a;
        let t1 = th(inputs.lambda, a1, b1, c1);
        let t2 = th(inputs.lambda, a2, b2, c1);
        let t3 = th(inputs.gamma, s1, e1, c2);
        let t4 = th(inputs.gamma, s2, e2, c2);
        let p1 = (1.0 - m * t3) / (1.0 + m);
        let p2 = (1.0 - m * t4) / (1.0 + m);
        let by_theta = t1 < p1 && t2 < p2;
        let in_window = cert.lambda_in_window();
        inside += in_window as usize;
        if by_theta != in_window {
            disagreements += 1;
            eprintln!("  disagreement: lambda {} window ({}, {})", inputs.lambda, w.lower, w.upper);
        }
        let k_ok = cert.k1.unwrap() < 1.0 && cert.k2.unwrap() < 1.0;
        if k_ok != by_theta {
            k_disagreements += 1;
        }
        if cert.feasible != (in_window && cert.theta.unwrap() < 1.0) {
            inconsistent += 1;
        }
    }
    outcome(
        disagreements == 0 && k_disagreements == 0 && inconsistent == 0 && inside > 0 && inside < draws,
        format!(
            "{draws} draws ({inside} inside the window): window vs theta_i < p_i disagreements {disagreements}, \
             vs k_i < 1 {k_disagreements}, feasibility inconsistencies {inconsistent}"
        ),
    )
}

struct Run {
    inst: SspvipInstance,
    trace: IterateTrace,
}

fn instance_spec(i: u64, rng: &mut SeededRng) -> (GeneratorSpec, Relaxation) {
    let p = if i.is_multiple_of(2) { 2.0 } else { 3.0 };
    let (dim1, dim2) = [(4, 3), (10, 6), (25, 15), (50, 30), (8, 8)][(i / 2) as usize % 5];
    let sets = [
        (SetChoice::Box, SetChoice::Box),
        (SetChoice::Orthant, SetChoice::Subspace),
        (SetChoice::Subspace, SetChoice::Orthant),
        (SetChoice::Whole, SetChoice::Box),
        (SetChoice::Ball, SetChoice::Ball),
    ];
    let (set1, set2) = sets[i as usize % 5];
    let (set1, set2) = if p != 2.0 && set1 == SetChoice::Ball { (SetChoice::Box, SetChoice::Orthant) } else { (set1, set2) };
    let mut v = [0.0; 8];
    for k in 0..4 {
        let a: f64 = rng.gen_range(1.0..1.3);
        v[2 * k] = a;
        v[2 * k + 1] = a * rng.gen_range(1.0..1.2);
    }
    let spec = GeneratorSpec {
        seed: 1000 + i,
        dim1,
        dim2,
        p1: p,
        p2: p,
        moduli: Moduli::from_array(v).unwrap(),
        set1,
        set2,
        map_family: if i.is_multiple_of(3) { MapFamily::Diagonal } else { MapFamily::Componentwise },
        operator_norm: rng.gen_range(0.5..1.5),
    };
    let relaxation = Relaxation::Constant { value: [0.9, 1.0, 0.6][i as usize % 3] };
    (spec, relaxation)
}

fn contraction_runs() -> Vec<Run> {
    let mut rng = rng_from_seed(6);
    (0..20)
        .map(|i| {
            let (spec, relaxation) = instance_spec(i, &mut rng);
            let inst = generate_instance(&spec).unwrap();
            let rho = 0.05;
            let (lambda, gamma) = tune_steps(&inst, rho);
            let cfg = SolverConfig {
                lambda,
                gamma,
                rho,
                relaxation,
                max_iters: 10_000,
                tol_residual: 1e-13,
                tol_step: 0.0,
            };
            let mut srng = rng_from_seed(7000 + i);
            let n = inst.space1().dim();
            let x0 = inst.set1().retract(&DVector::from_fn(n, |_, _| srng.gen_range(-3.0..3.0))).unwrap();
            let y0 = inst.set1().retract(&DVector::from_fn(n, |_, _| srng.gen_range(-3.0..3.0))).unwrap();
            let trace = solve_sspvip(&inst, &cfg, &x0, &y0).unwrap();
            Run { inst, trace }
        })
        .collect()
}

fn star_error(run: &Run, k: usize) -> f64 {
    let p = run.inst.space1().p();
    let (xs, ys) = run.inst.known_solution().unwrap();
    let r = &run.trace.records[k];
    o_norm(&sub(r.x1.as_slice(), xs.as_slice()), p) + o_norm(&sub(r.y1.as_slice(), ys.as_slice()), p)
}

fn contraction(runs: &[Run], secs: f64) -> Outcome {
    let (mut step_violations, mut product_violations, mut infeasible, mut unconverged) = (0, 0, 0, 0);
    let (mut worst_final, mut worst_theta, mut max_iters) = (0.0f64, 0.0f64, 0);
    for run in runs {
        let cert = &run.trace.certificate;
        if !cert.feasible {
            infeasible += 1;
            continue;
        }
        let theta = cert.theta.unwrap();
        worst_theta = worst_theta.max(theta);
        let e0 = star_error(run, 0);
        let mut product = 1.0;
        for k in 1..run.trace.records.len() {
            let alpha = run.trace.records[k].alpha.unwrap();
            let rate = 1.0 - alpha * (1.0 - theta);
            let (prev, cur) = (star_error(run, k - 1), star_error(run, k));
            if cur > rate * prev + 1e-12 * (1.0 + prev) {
                step_violations += 1;
            }
            product *= rate;
            if cur > product * e0 + 1e-12 * (1.0 + e0) * k as f64 {
                product_violations += 1;
            }
        }
        let last = star_error(run, run.trace.records.len() - 1);
        worst_final = worst_final.max(last);
        max_iters = max_iters.max(run.trace.iterations());
        if last > 1e-8 || run.trace.iterations() > 10_000 {
            unconverged += 1;
        }
    }
    outcome(
        infeasible == 0 && step_violations == 0 && product_violations == 0 && unconverged == 0 && secs < 30.0,
        format!(
            "20 instances (max theta {worst_theta:.3}): per-step violations {step_violations}, cumulative \
             violations {product_violations}, infeasible {infeasible}, worst final error {worst_final:.1e} \
             (max {max_iters} iterations); {secs:.2} s"
        ),
    )
}

fn intermediate_estimates(runs: &[Run]) -> Outcome {
    let mut violations = [0usize; 4];
    let mut checked = 0;
    let mut worst_ratio = 0.0f64;
    for run in runs {
        let cert = &run.trace.certificate;
        let th = [cert.theta1.unwrap(), cert.theta2.unwrap(), cert.theta3.unwrap(), cert.theta4.unwrap()];
        let (p1, p2) = (run.inst.space1().p(), run.inst.space2().p());
        let (xs, ys) = run.inst.known_solution().unwrap();
        let a = run.inst.operator().matrix();
        let (x2s, y2s) = (a * xs, a * ys);
        for r in &run.trace.records {
            let st = &r.stage;
            let d = |u: &DVector<f64>, v: &DVector<f64>, p: f64| o_norm(&sub(u.as_slice(), v.as_slice()), p);
            let pairs = [
                (d(&st.a1, xs, p1), th[0] * d(&r.y1, ys, p1)),
                (d(&st.b1, ys, p1), th[1] * d(&r.x1, xs, p1)),
                (d(&st.a2, &x2s, p2), th[2] * d(&st.y2, &y2s, p2)),
                (d(&st.b2, &y2s, p2), th[3] * d(&st.x2, &x2s, p2)),
            ];
            for (k, (lhs, rhs)) in pairs.into_iter().enumerate() {
                if lhs > rhs + 1e-10 * (1.0 + rhs) {
                    violations[k] += 1;
                }
                if rhs > 1e-6 {
                    worst_ratio = worst_ratio.max(lhs / rhs);
                }
            }
            checked += 1;
        }
    }
    outcome(
        violations.iter().all(|&v| v == 0),
        format!(
            "{checked} iterations: violations a1 {}, b1 {}, a2 {}, b2 {}; largest lhs/rhs {worst_ratio:.3}",
            violations[0], violations[1], violations[2], violations[3]
        ),
    )
}

/// Direct Hilbert-space iteration: metric projections and the transpose.
fn hilbert_reference(inst: &SspvipInstance, cfg: &SolverConfig, x0: &[f64], y0: &[f64], iters: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let a = inst.operator().matrix();
    let (m, n) = (a.nrows(), a.ncols());
    let mul = |x: &[f64]| -> Vec<f64> { (0..m).map(|i| (0..n).map(|j| a[(i, j)] * x[j]).sum()).collect() };
    let mul_t = |y: &[f64]| -> Vec<f64> { (0..n).map(|j| (0..m).map(|i| a[(i, j)] * y[i]).sum()).collect() };
    let eval = |map: &MonotoneMap, x: &[f64]| -> Vec<f64> {
        match map {
            MonotoneMap::AffineScalar { a, shift } => x.iter().zip(shift).map(|(v, s)| a * v + s).collect(),
            MonotoneMap::DiagonalAffine { diag, shift } => {
                x.iter().zip(diag).zip(shift).map(|((v, d), s)| d * v + s).collect()
            }
            MonotoneMap::ComponentwiseMonotone { alpha, beta, shift } => x
                .iter()
                .zip(shift)
                .map(|(v, s)| alpha * v + (beta - alpha) * 0.5 * (v + v.sin()) + s)
                .collect(),
        }
    };
    let project = |set: &ConvexSet, x: Vec<f64>| -> Vec<f64> {
        match set {
            ConvexSet::WholeSpace => x,
            ConvexSet::Box { lower, upper } => {
                x.iter().zip(lower).zip(upper).map(|((v, l), u)| v.clamp(*l, *u)).collect()
            }
            ConvexSet::NonnegativeOrthant => x.iter().map(|v| v.max(0.0)).collect(),
            ConvexSet::CoordinateSubspace { mask } => {
                x.iter().zip(mask).map(|(v, &z)| if z { 0.0 } else { *v }).collect()
            }
            ConvexSet::EuclideanBall { center, radius } => {
                let d = sub(&x, center);
                let nd = o_norm(&d, 2.0);
                if nd <= *radius {
                    x
                } else {
                    center.iter().zip(&d).map(|(c, v)| c + v * radius / nd).collect()
                }
            }
        }
    };
    let (c1, c2) = (inst.set1().set(), inst.set2().set());
    let step = |map: &MonotoneMap, v: &[f64], h: f64| -> Vec<f64> {
        v.iter().zip(eval(map, v)).map(|(a, b)| a - h * b).collect()
    };
    let relax = |x: &[f64], a1: &[f64], a2: &[f64], alpha: f64| -> Vec<f64> {
        let r = sub(a2, &mul(a1));
        let back = mul_t(&r);
        (0..n).map(|j| (1.0 - alpha) * x[j] + alpha * (a1[j] + cfg.rho * back[j])).collect()
    };
    let mut out = vec![(x0.to_vec(), y0.to_vec())];
    for k in 0..iters {
        let (x, y) = out.last().unwrap().clone();
        let (x2, y2) = (mul(&x), mul(&y));
        let a1 = project(c1, step(inst.map_f1(), &y, cfg.lambda));
        let a2 = project(c2, step(inst.map_f2(), &y2, cfg.gamma));
        let b1 = project(c1, step(inst.map_g1(), &x, cfg.lambda));
        let b2 = project(c2, step(inst.map_g2(), &x2, cfg.gamma));
        let alpha = cfg.relaxation.at(k);
        out.push((relax(&x, &a1, &a2, alpha), relax(&y, &b1, &b2, alpha)));
    }
    out
}

fn reductions() -> Outcome {
    let mut single_gap = 0.0f64;
    let mut hilbert_gap = 0.0f64;
    let mut runs = 0;
    for i in 0..6u64 {
        let mut rng = rng_from_seed(800 + i);
        let (mut spec, relaxation) = instance_spec(i, &mut rng);
        spec.dim1 = spec.dim1.min(10);
        spec.dim2 = spec.dim2.min(6);
        let inst = generate_instance(&spec).unwrap();
        let (lambda, gamma) = tune_steps(&inst, 0.05);
        let cfg = SolverConfig {
            lambda,
            gamma,
            relaxation,
            max_iters: 200,
            tol_residual: 0.0,
            tol_step: 0.0,
            ..SolverConfig::default()
        };
        let n = inst.space1().dim();
        let x0 = inst.set1().retract(&DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0))).unwrap();
        let y0 = inst.set1().retract(&DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0))).unwrap();

        let single = SpvipInstance::from_sspvip(&inst);
        let coupled = single.to_sspvip().unwrap();
        let cfg_single = SolverConfig { gamma: lambda, ..cfg.clone() };
        let t_single = solve_spvip(&single, &cfg_single, &x0).unwrap();
        let t_coupled = solve_sspvip(&coupled, &cfg_single, &x0, &x0).unwrap();
        if t_single.records.len() != t_coupled.records.len() {
            single_gap = f64::INFINITY;
        }
        for (s, c) in t_single.records.iter().zip(&t_coupled.records) {
            single_gap = single_gap.max((&s.x1 - &c.x1).amax()).max((&c.x1 - &c.y1).amax());
        }

        if spec.p1 == 2.0 {
            let trace = solve_sspvip(&inst, &cfg, &x0, &y0).unwrap();
            let reference = hilbert_reference(&inst, &cfg, x0.as_slice(), y0.as_slice(), trace.iterations());
            for (r, (x, y)) in trace.records.iter().zip(&reference) {
                let gx = sub(r.x1.as_slice(), x).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let gy = sub(r.y1.as_slice(), y).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                hilbert_gap = hilbert_gap.max(gx).max(gy);
            }
            runs += 1;
        }
    }
    outcome(
        single_gap <= 1e-14 && hilbert_gap <= 1e-14 && runs > 0,
        format!(
            "single-map vs coupled {single_gap:.1e} (6 instances); generic p = 2 vs direct Hilbert {hilbert_gap:.1e} \
             ({runs} instances, 200 iterations each)"
        ),
    )
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_sspvip");
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str, extra: &[&str]| -> (i32, Vec<u8>) {
        let out = dir.path().join(tag);
        let o = Command::new(bin)
            .args(extra)
            .arg("--out")
            .arg(&out)
            .args(["--seed", "7", "--p1", "3", "--p2", "3", "--dim1", "12", "--dim2", "7", "--set2", "orthant"])
            .output()
            .unwrap();
        (o.status.code().unwrap_or(-1), o.stdout)
    };
    let read = |tag: &str, name: &str| std::fs::read(Path::new(&dir.path().join(tag)).join(name)).unwrap_or_default();

    let (s1, _) = run("solve1", &["--command", "solve"]);
    let (s2, _) = run("solve2", &["--command", "solve"]);
    let (v1, out1) = run("verify1", &["--command", "verify", "--trials", "300"]);
    let (v2, out2) = run("verify2", &["--command", "verify", "--trials", "300"]);
    let same_solve = read("solve1", "trace.csv") == read("solve2", "trace.csv")
        && read("solve1", "summary.json") == read("solve2", "summary.json")
        && !read("solve1", "trace.csv").is_empty();
    let same_verify = out1 == out2 && read("verify1", "verify.json") == read("verify2", "verify.json") && !out1.is_empty();
    outcome(
        s1 == 0 && s2 == 0 && v1 == 0 && v2 == 0 && same_solve && same_verify,
        format!(
            "solve exits {s1}/{s2}, identical trace and summary {same_solve}; verify exits {v1}/{v2}, \
             identical report {same_verify} ({} bytes)",
            out1.len()
        ),
    )
}

fn main() -> ExitCode {
    let early = [
        (1, "semi-inner-product axioms", sip_axioms()),
        (2, "smoothness inequality", smoothness()),
        (3, "generalized adjoint", generalized_adjoint()),
        (4, "retraction characterization", retractions()),
        (5, "certificate algebra", certificate_algebra()),
    ];
    let clock = Instant::now();
    let runs = contraction_runs();
    let secs = clock.elapsed().as_secs_f64();
    let late = [
        (6, "contraction bound and convergence", contraction(&runs, secs)),
        (7, "intermediate estimates", intermediate_estimates(&runs)),
        (8, "reductions", reductions()),
        (9, "CLI determinism", determinism()),
    ];
    let results: Vec<(u32, &str, Outcome)> = early.into_iter().chain(late).collect();

    let mut failed = 0;
    for (k, name, o) in &results {
        println!("acceptance {k} [{}] {name}: {}", if o.ok { "PASS" } else { "FAIL" }, o.detail);
        failed += (!o.ok) as usize;
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
