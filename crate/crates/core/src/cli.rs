//! Command-line dispatcher.
//!
//! Exit codes: 0 success, 1 runtime failure or a failed `verify` assertion,
//! 2 usage or parameter error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::classical::classical_sweep;
use crate::error::{Error, Result};
use crate::io::{
    basis_csv, bounds_csv, classical_csv, coefficients_to_json, format_float, matrix_from_json, matrix_to_json,
    pattern_csv, sidecar_path, sign_csv, tensor_csv, write_text, RunManifest,
};
use crate::linalg::FactorSpace;
use crate::schauder::{
    basis_constant_sweep, unconditionality_constant, NormMethod, SignMode, SweepSettings, DEFAULT_RESTARTS,
    DEFAULT_TOL, MAX_EXPLICIT_SIDE,
};
use crate::state::{lp_norm, LpContext, Side, StateSpec};
use crate::tensor::{tensor_sweep, TensorContext, IRRATIONALITY_NOTE};
use crate::verify::{run_suite, Suite};
use crate::walsh::{walsh_coefficients, walsh_matrix, GeneratorMode};

/// Largest level accepted by `verify` (its exhaustive checks grow like `16^m`).
pub const MAX_VERIFY_LEVEL: usize = 4;

#[derive(Debug, Parser)]
#[command(name = "ncwalsh", version, about = "Walsh systems on biased matrix towers")]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the Walsh matrix w_N as matrix JSON.
    GenWalsh {
        #[arg(long)]
        index: usize,
        #[arg(long)]
        level: usize,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value = "paper")]
        mode: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Walsh coefficients of a matrix JSON file.
    Coeffs {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weighted L^p norm of a matrix JSON file.
    Norm {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_p)]
        p: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value = "left")]
        side: String,
    },
    /// Run a verification suite and print a pass/fail table.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long)]
        level: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = crate::verify::DEFAULT_TOL)]
        tol: f64,
    },
    /// Norms of the partial-sum projections P_0..P_N.
    BasisConstants {
        #[arg(long)]
        level: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_parser = parse_p)]
        p: f64,
        #[arg(long)]
        method: String,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "left")]
        side: String,
        /// Largest n (default 4^level - 1).
        #[arg(long)]
        nmax: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Empirical unconditionality constant of the martingale differences.
    Unconditionality {
        #[arg(long)]
        level: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_parser = parse_p)]
        p: f64,
        #[arg(long)]
        mode: String,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "left")]
        side: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Norms of the shell-ordered partial sums on a two-factor tensor product.
    TensorSweep {
        #[command(flatten)]
        common: TensorArgs,
    },
    /// Norms of classical Walsh partial sums on L^p([0,1], mu_alpha).
    Classical {
        #[arg(long)]
        level: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_parser = parse_p)]
        p: f64,
        #[arg(long)]
        nmax: usize,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run the command recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        /// Write to this path instead of the recorded output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct TensorArgs {
    #[arg(long)]
    level: usize,
    #[arg(long)]
    level2: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    alpha2: f64,
    #[arg(long, value_parser = parse_p)]
    p: f64,
    #[arg(long)]
    nmax: usize,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "left")]
    side: String,
    #[arg(long)]
    out: PathBuf,
}

fn parse_p(s: &str) -> std::result::Result<f64, String> {
    let p = match s {
        "inf" | "infinity" | "Inf" => f64::INFINITY,
        other => other.parse::<f64>().map_err(|e| e.to_string())?,
    };
    if p.is_nan() || p < 1.0 {
        return Err(format!("p must lie in [1, inf], got {s}"));
    }
    Ok(p)
}

/// A failure attributed either to the arguments (exit 2) or to the run (exit 1).
#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage(flag: &str, msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(format!("invalid value for {flag}: {msg}"))
}

fn check<T>(flag: &str, r: Result<T>) -> CliResult<T> {
    r.map_err(|e| usage(flag, e))
}

fn parse_flag<T: std::str::FromStr<Err = Error>>(flag: &str, s: &str) -> CliResult<T> {
    check(flag, s.parse())
}

fn state(level: usize, alpha: f64) -> CliResult<StateSpec<f64>> {
    check("--level", FactorSpace::new(level))?;
    check("--alpha", StateSpec::new(alpha, level))
}

fn require_seed(seed: Option<u64>, why: &str) -> CliResult<u64> {
    seed.ok_or_else(|| Failure::Usage(format!("--seed is required {why}")))
}

fn explicit_level(flag: &str, m: usize) -> CliResult<()> {
    if (1usize << (2 * m)) > MAX_EXPLICIT_SIDE {
        return Err(usage(flag, format!("norm sweeps materialize 4^m x 4^m maps and need m <= 4, got {m}")));
    }
    Ok(())
}

fn pick_method(p: f64, seed: Option<u64>, restarts: Option<usize>) -> CliResult<SweepSettings<f64>> {
    if p == 2.0 {
        return Ok(SweepSettings::exact());
    }
    let seed = require_seed(seed, "for p != 2 (the estimator is randomized)")?;
    Ok(SweepSettings::estimate(restarts.unwrap_or(DEFAULT_RESTARTS), seed))
}

/// Runs `argv` (including the program name) and returns the exit status.
pub fn run_command(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return if code == 0 { 0 } else { 2 };
        }
    };
    let args: Vec<String> = argv.iter().skip(1).cloned().collect();
    // Standard output is buffered so the command can run inside a dedicated pool.
    let mut buffer = Vec::new();
    let result = match cli.workers {
        Some(0) => Err(usage("--workers", "must be at least 1")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command, &args, &mut buffer)),
            Err(e) => Err(Failure::Runtime(Error::InvalidArgument(e.to_string()))),
        },
        None => dispatch(cli.command, &args, &mut buffer),
    };
    let _ = out.write_all(&buffer);
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn emit(out: &mut Vec<u8>, path: Option<&Path>, body: &str, manifest: RunManifest) -> CliResult<()> {
    match path {
        Some(p) => write_artifacts(p, body, &[], manifest),
        None => {
            writeln!(out, "{body}").map_err(Error::from)?;
            Ok(())
        }
    }
}

/// Writes the main output, its sidecars and `<out>.manifest.json`.
fn write_artifacts(path: &Path, body: &str, sidecars: &[(&str, String)], mut manifest: RunManifest) -> CliResult<()> {
    write_text(path, body)?;
    manifest.outputs.push(path.display().to_string());
    for (suffix, text) in sidecars {
        let p = sidecar_path(path, suffix);
        write_text(&p, text)?;
        manifest.outputs.push(p.display().to_string());
    }
    write_text(&sidecar_path(path, "manifest.json"), &manifest.to_json()?)?;
    Ok(())
}

fn dispatch(command: Command, args: &[String], out: &mut Vec<u8>) -> CliResult<i32> {
    let manifest = |seed| RunManifest::new(args.to_vec(), seed);
    match command {
        Command::GenWalsh {
            index,
            level,
            alpha,
            mode,
            out: path,
        } => {
            let mode: GeneratorMode = parse_flag("--mode", &mode)?;
            let spec = state(level, alpha)?;
            if index >= spec.level().walsh_len() {
                return Err(usage("--index", format!("must be below 4^{level} = {}", spec.level().walsh_len())));
            }
            let w = walsh_matrix(index, spec.level(), alpha, mode)?;
            let m = manifest(None)
                .param("index", index)
                .param("level", level)
                .param("alpha", alpha)
                .param("mode", format!("{mode:?}").to_lowercase());
            emit(out, path.as_deref(), &matrix_to_json(&w)?, m)?;
        }
        Command::Coeffs { input, out: path } => {
            let x = matrix_from_json(&std::fs::read_to_string(&input).map_err(Error::from)?)?;
            let level = FactorSpace::from_dim(x.dim())?;
            let body = coefficients_to_json(&walsh_coefficients(&x)?, level)?;
            emit(out, path.as_deref(), &body, manifest(None).param("input", input.display().to_string()))?;
        }
        Command::Norm { input, p, alpha, side } => {
            let side: Side = parse_flag("--side", &side)?;
            let x = matrix_from_json(&std::fs::read_to_string(&input).map_err(Error::from)?)?;
            let level = FactorSpace::from_dim(x.dim())?;
            let spec = state(level.m(), alpha)?;
            let ctx = LpContext::new(p, &spec, side)?;
            writeln!(out, "{}", format_float(lp_norm(&x, &ctx)?)).map_err(Error::from)?;
        }
        Command::Verify { suite, level, alpha, tol } => {
            let suite: Suite = parse_flag("--suite", &suite)?;
            if level > MAX_VERIFY_LEVEL {
                return Err(usage("--level", format!("verify supports m <= {MAX_VERIFY_LEVEL}")));
            }
            let spec = state(level, alpha)?;
            if !(tol > 0.0) {
                return Err(usage("--tol", "must be positive"));
            }
            let rows = run_suite(suite, &spec, tol)?;
            let mut ok = true;
            for r in &rows {
                writeln!(out, "{r}").map_err(Error::from)?;
                ok &= r.passed();
            }
            let verdict = if ok { "all assertions passed" } else { "some assertions FAILED" };
            writeln!(out, "{verdict} (tol {tol:e})").map_err(Error::from)?;
            return Ok(if ok { 0 } else { 1 });
        }
        Command::BasisConstants {
            level,
            alpha,
            p,
            method,
            restarts,
            seed,
            side,
            nmax,
            out: path,
        } => {
            let method: NormMethod = parse_flag("--method", &method)?;
            let side: Side = parse_flag("--side", &side)?;
            let spec = state(level, alpha)?;
            explicit_level("--level", level)?;
            let settings = match method {
                NormMethod::Exact2 => {
                    if p != 2.0 {
                        return Err(usage("--method", "exact2 requires --p 2"));
                    }
                    SweepSettings::exact()
                }
                NormMethod::Estimate => SweepSettings::estimate(
                    restarts.unwrap_or(DEFAULT_RESTARTS),
                    require_seed(seed, "with --method estimate")?,
                ),
            };
            if settings.method == NormMethod::Estimate && settings.restarts == 0 {
                return Err(usage("--restarts", "must be at least 1"));
            }
            let n_max = nmax.unwrap_or(spec.level().walsh_len() - 1);
            if n_max >= spec.level().walsh_len() {
                return Err(usage("--nmax", format!("must be below 4^{level}")));
            }
            let ctx = LpContext::new(p, &spec, side)?;
            let rows = basis_constant_sweep(&spec, &ctx, n_max, &settings)?;
            let m = manifest(seed)
                .param("level", level)
                .param("alpha", alpha)
                .param("p", format_float(p))
                .param("method", method.as_str())
                .param("restarts", settings.restarts)
                .param("side", side.as_str())
                .param("nmax", n_max)
                .param("tol", DEFAULT_TOL);
            write_artifacts(&path, &basis_csv(&rows), &[("bounds.csv", bounds_csv(&rows))], m)?;
        }
        Command::Unconditionality {
            level,
            alpha,
            p,
            mode,
            trials,
            seed,
            side,
            out: path,
        } => {
            let mode: SignMode = parse_flag("--mode", &mode)?;
            let side: Side = parse_flag("--side", &side)?;
            let spec = state(level, alpha)?;
            let seed = require_seed(seed, "for unconditionality sweeps")?;
            if trials == 0 {
                return Err(usage("--trials", "must be positive"));
            }
            if mode == SignMode::Exhaustive && level > crate::schauder::sweep::MAX_EXHAUSTIVE_LEVEL {
                return Err(usage("--level", "exhaustive sign sweeps need 2m <= 12"));
            }
            let ctx = LpContext::new(p, &spec, side)?;
            let report = unconditionality_constant(&spec, &ctx, mode, trials, seed)?;
            let sidecars: Vec<(&str, String)> = report
                .per_pattern
                .as_ref()
                .map(|v| vec![("patterns.csv", pattern_csv(v))])
                .unwrap_or_default();
            let m = manifest(Some(seed))
                .param("level", level)
                .param("alpha", alpha)
                .param("p", format_float(p))
                .param("mode", format!("{mode:?}").to_lowercase())
                .param("trials", trials)
                .param("side", side.as_str());
            write_artifacts(&path, &sign_csv(&report), &sidecars, m)?;
        }
        Command::TensorSweep { common: t } => {
            let side: Side = parse_flag("--side", &t.side)?;
            let left = state(t.level, t.alpha)?;
            check("--level2", FactorSpace::new(t.level2))?;
            let right = check("--alpha2", StateSpec::new(t.alpha2, t.level2))?;
            explicit_level("--level2", t.level + t.level2)?;
            let ctx = check("--level2", TensorContext::new(left, right))?;
            let limit = ctx.max_shell_index();
            if t.nmax > limit {
                return Err(usage("--nmax", format!("largest shell index at these levels is {limit}")));
            }
            let settings = pick_method(t.p, t.seed, t.restarts)?;
            let lp = ctx.lp_context(t.p, side)?;
            let rows = tensor_sweep(&ctx, &lp, t.nmax, settings.method, settings.restarts, settings.seed, settings.tol)?;
            let mut m = manifest(t.seed)
                .param("level", t.level)
                .param("level2", t.level2)
                .param("alpha", t.alpha)
                .param("alpha2", t.alpha2)
                .param("p", format_float(t.p))
                .param("nmax", t.nmax)
                .param("method", settings.method.as_str())
                .param("restarts", settings.restarts)
                .param("side", side.as_str());
            m.notes.push(IRRATIONALITY_NOTE.to_string());
            m.parameters.insert(
                "log_lambda_ratio".into(),
                json!(format_float(left.lambda().ln() / right.lambda().ln())),
            );
            write_artifacts(&t.out, &tensor_csv(&rows), &[], m)?;
        }
        Command::Classical {
            level,
            alpha,
            p,
            nmax,
            restarts,
            seed,
            out: path,
        } => {
            let spec = state(level, alpha)?;
            if nmax >= 1 << level {
                return Err(usage("--nmax", format!("must be below 2^{level}")));
            }
            let settings = pick_method(p, seed, restarts)?;
            let rows = classical_sweep(
                spec.m(),
                alpha,
                p,
                nmax,
                settings.method,
                settings.restarts,
                settings.seed,
                settings.tol,
            )?;
            let m = manifest(seed)
                .param("level", level)
                .param("alpha", alpha)
                .param("p", format_float(p))
                .param("nmax", nmax)
                .param("method", settings.method.as_str())
                .param("restarts", settings.restarts);
            write_artifacts(&path, &classical_csv(&rows), &[], m)?;
        }
        Command::Replay { manifest: path, out: target } => {
            let recorded = check("--manifest", RunManifest::read(&path))?;
            let argv = replay_argv(&recorded.command_line, target.as_deref());
            let command = Cli::try_parse_from(&argv)
                .map_err(|e| usage("--manifest", format!("recorded command does not parse: {e}")))?
                .command;
            if matches!(command, Command::Replay { .. }) {
                return Err(usage("--manifest", "refusing to replay a replay"));
            }
            return dispatch(command, &argv[1..], out);
        }
    }
    Ok(0)
}

/// The recorded arguments with `--workers` dropped and `--out` optionally redirected.
fn replay_argv(recorded: &[String], target: Option<&Path>) -> Vec<String> {
    let mut argv = vec!["ncwalsh".to_string()];
    let mut it = recorded.iter();
    while let Some(a) = it.next() {
        if a == "--workers" {
            it.next();
            continue;
        }
        if a.starts_with("--workers=") {
            continue;
        }
        if let Some(t) = target {
            if a == "--out" {
                it.next();
                argv.push("--out".into());
                argv.push(t.display().to_string());
                continue;
            }
            if a.starts_with("--out=") {
                argv.push(format!("--out={}", t.display()));
                continue;
            }
        }
        argv.push(a.clone());
    }
    argv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let argv: Vec<String> = std::iter::once("ncwalsh").chain(args.iter().copied()).map(String::from).collect();
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run_command(&argv, &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(&["frobnicate"]).0, 2);
        assert_eq!(run(&["gen-walsh", "--index", "0"]).0, 2);
        let (code, _, err) = run(&["gen-walsh", "--index", "16", "--level", "2"]);
        assert_eq!(code, 2);
        assert!(err.contains("--index"));
        let (code, _, err) = run(&["gen-walsh", "--index", "0", "--level", "2", "--alpha", "0.7"]);
        assert_eq!(code, 2);
        assert!(err.contains("--alpha"));
        let (code, _, err) = run(&["norm", "--in", "x.json", "--p", "0.5", "--alpha", "0.3"]);
        assert_eq!(code, 2);
        assert!(err.contains("--p"));
    }

    #[test]
    fn gen_walsh_to_stdout() {
        let (code, out, _) = run(&["gen-walsh", "--index", "0", "--level", "2"]);
        assert_eq!(code, 0);
        let x = matrix_from_json(out.trim()).unwrap();
        assert_eq!(x.dim(), 4);
        assert!(x.max_abs_diff(&crate::linalg::Matrix::identity(4)) == 0.0);
    }

    #[test]
    fn replay_arguments() {
        let rec: Vec<String> = ["--workers", "3", "classical", "--out", "a.csv", "--p", "2"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            replay_argv(&rec, Some(Path::new("b.csv"))),
            vec!["ncwalsh", "classical", "--out", "b.csv", "--p", "2"]
        );
    }
}
