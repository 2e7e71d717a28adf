//! Command-line front end. Exit codes: 0 success, 2 usage, 3 mathematical failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use crate::analysis::quasi_interp;
use crate::conditions::{bite_sigma, sufficient_conditions, tachev_classify_on, TACHEV_T_RANGE};
use crate::decomposer::{decompose, decompose_adapted, decompose_undersynth, DecomposeOptions, DecompositionResult, Domain};
use crate::dictionary::SynthesizerSpec;
use crate::error::{Error, Result};
use crate::numerics::{dp_distance, lp_power, Grid, LatticeConfig, Signal};
use crate::riesz::{
    cell_grid, empirical_riesz_bounds, injectivity_scan, lower_riesz_constant, split_pieces, write_rows, RieszRow,
};
use crate::signals;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MATH: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "affine-lp", version, about = "Affine systems and atomic decompositions in L^p, 0 < p <= 1")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Synthesizer: a built-in name, inline JSON or a JSON file.
    #[arg(long, global = true, default_value = "haar")]
    pub synth: String,
    /// Analyzer, by default `b^{-1} 1_[0,b)`.
    #[arg(long, global = true)]
    pub analyzer: Option<String>,
    #[arg(long, global = true, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, global = true, default_value_t = 2.0)]
    pub a: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub b: f64,
    /// lo:hi:log2n
    #[arg(long, global = true, default_value = "-4:4:15", allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for output files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Order of the `bspline` family.
    #[arg(long, global = true, default_value_t = 2)]
    pub order: u32,
    /// Exponent of the `power` family.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub beta: f64,
}

#[derive(Args, Debug, Clone)]
pub struct SignalArgs {
    /// CSV file of (x, re, im) rows.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Built-in signal: bump, triangle, smoothed_step, random_pc.
    #[arg(long, default_value = "bump")]
    pub signal: String,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Admissibility report.
    Check,
    /// Atomic decomposition of a signal.
    Decompose {
        #[command(flatten)]
        signal: SignalArgs,
        #[arg(long)]
        sigma_prime: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        #[arg(long, default_value_t = 0)]
        jmin: u32,
        #[arg(long)]
        jmax: Option<u32>,
        /// Open intervals "lo:hi,lo:hi".
        #[arg(long, allow_hyphen_values = true)]
        adapt_domain: Option<String>,
        #[arg(long)]
        undersynth: bool,
        #[arg(long, default_value_t = 8)]
        beta_max: u32,
    },
    /// Quasi-interpolation errors `d_p(S_j T_j f, f)`.
    QuasiInterp {
        #[command(flatten)]
        signal: SignalArgs,
        #[arg(long, default_value_t = 0)]
        jmin: u32,
        #[arg(long, default_value_t = 8)]
        jmax: u32,
    },
    /// Threshold sweep for `x^{-β} 1_[0,1)`.
    Tachev {
        /// Comma list or lo:hi:step.
        #[arg(long, default_value = "1.0:1.9:0.1")]
        betas: String,
        /// lo:hi:points_per_decade
        #[arg(long)]
        t_grid: Option<String>,
    },
    /// Single-scale Riesz diagnostics.
    Riesz {
        /// Comma list of scales.
        #[arg(long, default_value = "1,2,3")]
        j: String,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 64)]
        restarts: usize,
        #[arg(long, default_value_t = 256)]
        xi_count: usize,
        #[arg(long, default_value_t = 8)]
        ell_max: u32,
    },
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| usage(format!("'{s}' is not a number")))
}

pub fn parse_grid(s: &str) -> Result<Grid> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(usage(format!("grid '{s}' is not lo:hi:log2n")));
    }
    let log2n = parts[2].trim().parse::<u32>().map_err(|_| usage(format!("bad log2n in '{s}'")))?;
    if log2n > 26 {
        return Err(usage("grid too large"));
    }
    Grid::covering(parse_f64(parts[0])?, parse_f64(parts[1])?, log2n)
}

pub fn parse_domain(s: &str) -> Result<Domain> {
    let intervals = s
        .split(',')
        .map(|iv| {
            let ends: Vec<&str> = iv.split(':').collect();
            if ends.len() != 2 {
                return Err(usage(format!("interval '{iv}' is not lo:hi")));
            }
            Ok((parse_f64(ends[0])?, parse_f64(ends[1])?))
        })
        .collect::<Result<Vec<_>>>()?;
    Domain::new(intervals)
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    if s.is_empty() {
        return Err(usage("empty list"));
    }
    if s.contains(':') {
        let parts: Vec<f64> = s.split(':').map(parse_f64).collect::<Result<_>>()?;
        let [lo, hi, step] = parts[..] else {
            return Err(usage(format!("range '{s}' is not lo:hi:step")));
        };
        if !(step > 0.0) || hi < lo {
            return Err(usage(format!("range '{s}' is empty")));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        // trim the drift of repeated steps, 1.7000000000000002 -> 1.7
        return Ok((0..=n).map(|i| ((lo + step * i as f64) * 1e12).round() / 1e12).collect());
    }
    s.split(',').map(parse_f64).collect()
}

/// Built-in name, inline JSON or a path to a JSON file.
pub fn parse_synth(s: &str, common: &Common) -> Result<SynthesizerSpec> {
    let s = s.trim();
    let one = || SynthesizerSpec::indicator(0.0, 1.0);
    match s {
        "indicator" => return one(),
        "normalized_indicator" => return SynthesizerSpec::normalized_indicator(common.b),
        "haar" => return Ok(SynthesizerSpec::haar()),
        "bspline" => return SynthesizerSpec::bspline(common.order),
        "step_difference" => return Ok(SynthesizerSpec::step_difference(one()?)),
        "second_difference" => return Ok(SynthesizerSpec::second_difference(one()?)),
        "mexican_hat" => return Ok(SynthesizerSpec::mexican_hat()),
        "power" | "power_singular" => return SynthesizerSpec::power_singular(common.beta),
        _ => {}
    }
    let text = if s.starts_with('{') {
        s.to_string()
    } else if Path::new(s).is_file() {
        fs::read_to_string(s)?
    } else {
        return Err(usage(format!("unknown synthesizer '{s}'")));
    };
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| usage(format!("synthesizer JSON: {e}")))?;
    SynthesizerSpec::from_json(&v)
}

fn load_signal(args: &SignalArgs, grid: Grid, seed: u64) -> Result<Signal> {
    match &args.input {
        Some(path) => Signal::read_csv(fs::File::open(path)?),
        None => signals::by_name(&args.signal, grid, seed),
    }
}

fn write_file(dir: &Option<PathBuf>, name: &str, bytes: &[u8]) -> Result<()> {
    if let Some(d) = dir {
        fs::create_dir_all(d)?;
        fs::write(d.join(name), bytes)?;
    }
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    if e.is_mathematical() {
        EXIT_MATH
    } else {
        EXIT_USAGE
    }
}

/// Parses `args` (program name first) and runs, writing primary output to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if code == EXIT_OK {
                let _ = write!(out, "{e}");
            } else {
                eprintln!("{e}");
            }
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let c = &cli.common;
    let cfg = LatticeConfig::new(c.p, c.a, c.b)?;
    let psi = parse_synth(&c.synth, c)?;
    let phi = match &c.analyzer {
        Some(s) => parse_synth(s, c)?,
        None => SynthesizerSpec::normalized_indicator(c.b)?,
    };
    match &cli.command {
        Command::Check => cmd_check(&psi, &cfg, c, out),
        Command::Decompose { signal, sigma_prime, tol, max_iter, jmin, jmax, adapt_domain, undersynth, beta_max } => {
            let f = load_signal(signal, parse_grid(&c.grid)?, c.seed)?;
            let opts = DecomposeOptions {
                sigma_prime: *sigma_prime,
                tol_rel: *tol,
                max_iter: *max_iter,
                j_min: *jmin,
                j_max: *jmax,
                lambda: None,
            };
            let r = match (adapt_domain, undersynth) {
                (Some(_), true) => return Err(usage("--adapt-domain and --undersynth are exclusive")),
                (Some(d), false) => decompose_adapted(&f, &parse_domain(d)?, &psi, &phi, &cfg, &opts)?,
                (None, true) => decompose_undersynth(&f, &psi, &cfg, &opts, *beta_max)?,
                (None, false) => decompose(&f, &psi, &phi, &cfg, &opts)?,
            };
            cmd_decompose_report(&r, c, out)
        }
        Command::QuasiInterp { signal, jmin, jmax } => {
            let f = load_signal(signal, parse_grid(&c.grid)?, c.seed)?;
            if jmin > jmax {
                return Err(usage("jmin exceeds jmax"));
            }
            let sigma = bite_sigma(&psi, &cfg, Complex64::new(1.0, 0.0))?;
            let target = sigma * lp_power(&f, cfg.p())?;
            let mut buf = Vec::new();
            {
                let mut w = csv::Writer::from_writer(&mut buf);
                w.write_record(["j", "e_j", "sigma_target"])?;
                for j in *jmin..=*jmax {
                    let q = quasi_interp(&f, j, &psi, &phi, &cfg)?;
                    let e = dp_distance(&q, &f, cfg.p())?;
                    w.write_record([j.to_string(), e.to_string(), target.to_string()])?;
                }
                w.flush()?;
            }
            out.write_all(&buf)?;
            write_file(&c.out, "quasi_interp.csv", &buf)?;
            Ok(EXIT_OK)
        }
        Command::Tachev { betas, t_grid } => {
            let betas = parse_list(betas)?;
            let (range, per_decade) = match t_grid {
                None => (TACHEV_T_RANGE, 8),
                Some(s) => {
                    let parts: Vec<&str> = s.split(':').collect();
                    if parts.len() != 3 {
                        return Err(usage(format!("t grid '{s}' is not lo:hi:per_decade")));
                    }
                    let (lo, hi) = (parse_f64(parts[0])?, parse_f64(parts[1])?);
                    let per = parts[2].trim().parse::<usize>().map_err(|_| usage("bad points per decade"))?;
                    if !(lo > 0.0 && hi > lo) || per == 0 {
                        return Err(usage(format!("t grid '{s}' is empty")));
                    }
                    ((lo, hi), per)
                }
            };
            let mut buf = Vec::new();
            {
                let mut w = csv::Writer::from_writer(&mut buf);
                w.write_record(["beta", "p", "min_t_F", "t_min", "classification", "numeric", "agrees"])?;
                for beta in betas {
                    let r = tachev_classify_on(beta, cfg.p(), range, per_decade)?;
                    w.write_record([
                        beta.to_string(),
                        cfg.p().to_string(),
                        (1.0 + r.min_excess).to_string(),
                        r.t_min.to_string(),
                        r.class.as_str().to_string(),
                        r.numeric.as_str().to_string(),
                        r.agrees.to_string(),
                    ])?;
                }
                w.flush()?;
            }
            out.write_all(&buf)?;
            write_file(&c.out, "tachev.csv", &buf)?;
            Ok(EXIT_OK)
        }
        Command::Riesz { j, trials, restarts, xi_count, ell_max } => {
            let js: Vec<u32> = j
                .split(',')
                .map(|s| s.trim().parse::<u32>().map_err(|_| usage(format!("bad scale '{s}'"))))
                .collect::<Result<_>>()?;
            let system = split_pieces(&psi, &cfg, &cell_grid(&cfg, 10)?)?;
            let c_est = lower_riesz_constant(&system, cfg.p(), *restarts, c.seed);
            let energy = system.trig_energy_min(*xi_count);
            let scan = injectivity_scan(&psi, &cfg, *xi_count, *ell_max);
            let mut rows = Vec::new();
            for &jj in &js {
                let (ratio_min, ratio_max) = empirical_riesz_bounds(&psi, &cfg, jj, *trials, c.seed)?;
                rows.push(RieszRow { p: cfg.p(), j: jj, c_estimate: c_est, ratio_min, ratio_max, min_xi_energy: energy });
            }
            let mut buf = Vec::new();
            write_rows(&rows, &mut buf)?;
            out.write_all(&buf)?;
            write_file(&c.out, "riesz.csv", &buf)?;
            let mut dump = system.to_json();
            dump["injectivity"] = serde_json::to_value(scan)?;
            dump["c_estimate"] = c_est.into();
            dump["c_estimate_kind"] = "upper estimate from multi-start local search".into();
            write_file(&c.out, "pieces.json", serde_json::to_string_pretty(&dump)?.as_bytes())?;
            Ok(EXIT_OK)
        }
    }
}

fn cmd_check(psi: &SynthesizerSpec, cfg: &LatticeConfig, c: &Common, out: &mut dyn Write) -> Result<i32> {
    let report = sufficient_conditions(psi, cfg)?;
    let text = report.to_json()?;
    writeln!(out, "{text}")?;
    write_file(&c.out, "report.json", text.as_bytes())?;
    Ok(if report.admissible() { EXIT_OK } else { EXIT_MATH })
}

fn cmd_decompose_report(r: &DecompositionResult, c: &Common, out: &mut dyn Write) -> Result<i32> {
    let header = r.header_json()?;
    writeln!(out, "{header}")?;
    write_file(&c.out, "header.json", header.as_bytes())?;
    let mut coeffs = Vec::new();
    r.coeffs.write_jsonl(&mut coeffs)?;
    write_file(&c.out, "coeffs.jsonl", &coeffs)?;
    let mut trace = Vec::new();
    r.write_trace_csv(&mut trace)?;
    write_file(&c.out, "trace.csv", &trace)?;
    if r.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!("error: residual {} above tolerance after {} iterations", r.residual_power, r.iterations);
        Ok(EXIT_MATH)
    }
}
