//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error or malformed input, 2 diverged,
//! 3 verification failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use log::{info, warn};
use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{generate_instance, GeneratorSpec, MapFamily, Moduli, SetChoice, SspvipInstance};
use crate::sample::{rng_from_seed, uniform_vector};
use crate::solver::{
    certificate, solve_sspvip, tune_steps, ContractionCertificate, IterateTrace, Relaxation, SolverConfig,
    Termination,
};
use crate::verify::{verify_suite, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

/// Decorrelates the start point from the generator stream.
const START_STREAM: u64 = 0x5747_4152_5400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Generate,
    Certify,
    Solve,
    Verify,
}

/// A step size, or `auto` to pick one from the moduli.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Auto,
    Fixed(f64),
}

impl FromStr for Step {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Step::Auto);
        }
        let v: f64 = s
            .parse()
            .map_err(|e| Error::InvalidParameter(format!("step {s:?}: {e}")))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!("step must be positive, got {v}")));
        }
        Ok(Step::Fixed(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MapChoice {
    Componentwise,
    Diagonal,
}

impl From<MapChoice> for MapFamily {
    fn from(m: MapChoice) -> Self {
        match m {
            MapChoice::Componentwise => MapFamily::Componentwise,
            MapChoice::Diagonal => MapFamily::Diagonal,
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "sspvip", version, about = "Relaxed retraction solver for split variational inequality systems in l^p")]
pub struct Args {
    #[arg(long, value_enum)]
    pub command: Command,
    /// Instance file; generated from the flags below when absent.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// `generate`: instance file (stdout when absent). `solve`, `verify`: output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "auto")]
    pub lambda: Step,
    #[arg(long, default_value = "auto")]
    pub gamma: Step,
    #[arg(long, default_value_t = 0.05)]
    pub rho: f64,
    /// Constant relaxation in (0, 1], `harmonic` or `harmonic:<scale>`.
    #[arg(long, default_value = "0.9")]
    pub alpha: Relaxation,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol_residual: f64,
    #[arg(long, default_value_t = 1e-14)]
    pub tol_step: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p1: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p2: f64,
    #[arg(long, default_value_t = 4)]
    pub dim1: usize,
    #[arg(long, default_value_t = 3)]
    pub dim2: usize,
    /// whole, box, orthant, subspace or ball
    #[arg(long, default_value = "box")]
    pub set1: SetChoice,
    #[arg(long, default_value = "box")]
    pub set2: SetChoice,
    /// Eight comma-separated values: α₁,β₁,α₂,β₂,σ₁,η₁,σ₂,η₂
    #[arg(long, default_value = "1,1.5,1,1.5,1,1.5,1,1.5")]
    pub moduli: Moduli,
    #[arg(long, value_enum, default_value = "componentwise")]
    pub maps: MapChoice,
    /// Certified norm bound given to the generated operator.
    #[arg(long, default_value_t = 1.0)]
    pub operator_norm: f64,
    /// Random samples per check for `verify`.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
}

impl Args {
    pub fn generator_spec(&self) -> GeneratorSpec {
        GeneratorSpec {
            seed: self.seed,
            dim1: self.dim1,
            dim2: self.dim2,
            p1: self.p1,
            p2: self.p2,
            moduli: self.moduli,
            set1: self.set1,
            set2: self.set2,
            map_family: self.maps.into(),
            operator_norm: self.operator_norm,
        }
    }

    pub fn load_instance(&self) -> Result<SspvipInstance> {
        match &self.instance {
            Some(path) => SspvipInstance::load(path),
            None => generate_instance(&self.generator_spec()),
        }
    }

    pub fn solver_config(&self, inst: &SspvipInstance) -> SolverConfig {
        let (auto_lambda, auto_gamma) = tune_steps(inst, self.rho);
        let pick = |s: Step, auto: f64| match s {
            Step::Auto => auto,
            Step::Fixed(v) => v,
        };
        SolverConfig {
            lambda: pick(self.lambda, auto_lambda),
            gamma: pick(self.gamma, auto_gamma),
            rho: self.rho,
            relaxation: self.alpha,
            max_iters: self.max_iters,
            tol_residual: self.tol_residual,
            tol_step: self.tol_step,
        }
    }
}

/// Seeded start point `(x₁⁰, y₁⁰) ∈ C₁ × C₁`: entries uniform in `[-3, 3]`,
/// then retracted onto `C₁`.
pub fn start_point(inst: &SspvipInstance, seed: u64) -> Result<(DVector<f64>, DVector<f64>)> {
    let mut rng = rng_from_seed(seed ^ START_STREAM);
    let n = inst.space1().dim();
    let x = inst.set1().retract(&uniform_vector(&mut rng, n, 3.0))?;
    let y = inst.set1().retract(&uniform_vector(&mut rng, n, 3.0))?;
    Ok((x, y))
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    seed: u64,
    config: &'a SolverConfig,
    termination: &'a Termination,
    converged: bool,
    iterations: usize,
    final_residuals: [f64; 4],
    final_err_star: Option<f64>,
    final_step: Option<f64>,
    x1: &'a [f64],
    y1: &'a [f64],
    certificate: &'a ContractionCertificate,
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

/// CSV with one row per record, initial state included.
pub fn trace_csv(trace: &IterateTrace) -> String {
    let mut s = String::from("n,r1,r2,r3,r4,err_star,step,theta_bound_rhs\n");
    for r in &trace.records {
        let _ = write!(s, "{}", r.n);
        for v in r.residuals {
            let _ = write!(s, ",{v:.16e}");
        }
        let _ = writeln!(s, ",{},{},{}", cell(r.err_star), cell(r.step), cell(r.theta_bound_rhs));
    }
    s
}

fn write_out_dir(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// Runs one command and returns the process exit code. Errors map to
/// [`EXIT_USAGE`] in [`main_with_args`].
pub fn run(args: &Args) -> Result<i32> {
    let inst = args.load_instance()?;
    match args.command {
        Command::Generate => {
            let text = inst.to_json()? + "\n";
            match &args.out {
                Some(path) => fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(EXIT_OK)
        }
        Command::Certify => {
            let cfg = args.solver_config(&inst);
            print!("{}", to_json(&certificate(&inst, &cfg))?);
            Ok(EXIT_OK)
        }
        Command::Solve => {
            let cfg = args.solver_config(&inst);
            let (x0, y0) = start_point(&inst, args.seed)?;
            let clock = Instant::now();
            let trace = solve_sspvip(&inst, &cfg, &x0, &y0)?;
            let elapsed = clock.elapsed();
            let last = trace.last();
            let summary = Summary {
                seed: args.seed,
                config: &cfg,
                termination: &trace.termination,
                converged: trace.termination.converged(),
                iterations: trace.iterations(),
                final_residuals: last.residuals,
                final_err_star: last.err_star,
                final_step: last.step,
                x1: last.x1.as_slice(),
                y1: last.y1.as_slice(),
                certificate: &trace.certificate,
            };
            let out = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
            write_out_dir(&out, "trace.csv", &trace_csv(&trace))?;
            write_out_dir(&out, "summary.json", &to_json(&summary)?)?;
            info!("solve finished in {:.3} s", elapsed.as_secs_f64());
            eprintln!(
                "{:?} after {} iterations, max residual {:e}, wall time {:.3} s",
                trace.termination,
                trace.iterations(),
                last.max_residual(),
                elapsed.as_secs_f64()
            );
            Ok(match trace.termination {
                Termination::Diverged { .. } => EXIT_DIVERGED,
                Termination::MaxIterations => {
                    warn!("iteration limit reached before the tolerances were met");
                    EXIT_OK
                }
                _ => EXIT_OK,
            })
        }
        Command::Verify => {
            let cfg = args.solver_config(&inst);
            let opts = VerifyOptions { seed: args.seed, trials: args.trials, ..VerifyOptions::default() };
            let report = verify_suite(&inst, cfg.lambda, cfg.gamma, &opts)?;
            let text = to_json(&report)?;
            if let Some(dir) = &args.out {
                write_out_dir(dir, "verify.json", &text)?;
            }
            print!("{text}");
            for c in report.failures() {
                eprintln!("FAILED {}: {:e} > {:e}", c.name, c.max_violation, c.tolerance);
            }
            Ok(if report.passed { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
    }
}

/// Parses `argv`, runs, and returns the exit code. Help and version exit 0.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
