//! Command-line front end for `spinrelax`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use spinrelax::chirp::{deconvolve_chirp, fit_hole_profile};
use spinrelax::fitting::{fit, fit_many, AdapterKind, ModelAdapter};
use spinrelax::io::{
    default_abscissa, fit_result_json, fit_result_value, format_trace, generate_synthetic,
    read_trace, RunConfig, SyntheticSpec,
};
use spinrelax::model::{validate_system, FitResult, LinewidthModel, RateLawParams, DEFAULT_T_OPT};
use spinrelax::observables::linewidth_budget;
use spinrelax::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "spinrelax",
    version,
    about = "Hyperfine relaxation and coherence analysis"
)]
pub struct Cli {
    #[command(flatten)]
    pub opts: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct GlobalOpts {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for synthetic noise; overrides the configuration.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory. Without it results go to stdout.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Input trace CSV; repeatable.
    #[arg(long, global = true, value_name = "PATH")]
    pub trace: Vec<PathBuf>,
    /// Model name; overrides the configuration.
    #[arg(long, global = true, value_name = "NAME")]
    pub model: Option<String>,
    /// Freeze a parameter at a value; repeatable.
    #[arg(long, global = true, value_name = "NAME=VAL", value_parser = parse_assignment)]
    pub fix: Vec<(String, f64)>,
    /// Let a frozen parameter vary; repeatable.
    #[arg(long, global = true, value_name = "NAME")]
    pub free: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Noise-free model curve as CSV.
    Simulate,
    /// Noisy synthetic trace plus its truth record.
    GenSynthetic,
    /// Fit one trace; JSON result.
    Fit,
    /// Fit every --trace independently; JSON array.
    FitSeries,
    /// Undo chirp beats in a hole profile; needs [chirp] and --out.
    Deconvolve,
    /// Linewidth budget table against temperature.
    DecomposeLinewidth {
        /// Temperatures in kelvin; repeatable.
        #[arg(long = "temperature", value_name = "K")]
        temperatures: Vec<f64>,
    },
    /// Check a configuration and traces without computing anything.
    Validate,
}

/// Parses `NAME=VALUE`.
pub fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got {s:?}"))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(format!("empty parameter name in {s:?}"));
    }
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| format!("{:?} is not a number", v.trim()))?;
    if !v.is_finite() {
        return Err(format!("{k} must be finite"));
    }
    Ok((k.to_string(), v))
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SingularJacobian(_) | Error::StepSize { .. } => EXIT_NOT_CONVERGED,
            _ => EXIT_VALIDATION,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn validation(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_VALIDATION,
        message: msg.into(),
    }
}

/// What a command produced: files to write, or text for stdout.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl Outcome {
    fn emit(&mut self, name: &str, body: String, to_stdout: bool) {
        if to_stdout {
            self.stdout.push_str(&body);
        }
        self.files.push((name.to_string(), body));
    }
}

struct Ctx {
    cfg: RunConfig,
    opts: GlobalOpts,
}

impl Ctx {
    fn new(opts: GlobalOpts) -> Result<Ctx, Failure> {
        let cfg = match &opts.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        Ok(Ctx { cfg, opts })
    }

    fn seed(&self) -> u64 {
        self.opts.seed.unwrap_or(self.cfg.seed)
    }

    fn to_stdout(&self) -> bool {
        self.opts.out.is_none()
    }

    /// Configuration with the command-line model overrides applied.
    fn effective_config(&self) -> Result<RunConfig, Failure> {
        let mut cfg = self.cfg.clone();
        let model = cfg.model.get_or_insert_with(Default::default);
        if let Some(name) = &self.opts.model {
            if AdapterKind::parse(name).is_none() {
                let names: Vec<&str> = AdapterKind::ALL.iter().map(|k| k.name()).collect();
                return Err(validation(format!(
                    "unknown model {name:?}; expected one of {}",
                    names.join(", ")
                )));
            }
            model.name = name.clone();
        }
        if model.name.is_empty() {
            return Err(validation(
                "no model given (use --model or [model] in --config)",
            ));
        }
        for (k, v) in &self.opts.fix {
            model.fixed.insert(k.clone(), *v);
            model.free.retain(|f| f != k);
        }
        for k in &self.opts.free {
            model.free.push(k.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn adapter(&self) -> Result<(RunConfig, ModelAdapter), Failure> {
        let cfg = self.effective_config()?;
        let a = cfg.adapter()?;
        Ok((cfg, a))
    }

    fn synthetic_spec(
        &self,
        cfg: &RunConfig,
        adapter: &ModelAdapter,
    ) -> Result<SyntheticSpec, Failure> {
        if cfg.synthetic.is_some() {
            let mut spec = cfg.synthetic_spec()?;
            // Values from --fix also define the truth.
            for (k, v) in &self.opts.fix {
                spec.truth.insert(k.clone(), *v);
            }
            return Ok(spec);
        }
        Ok(SyntheticSpec {
            model: adapter.kind,
            truth: adapter
                .params
                .iter()
                .map(|p| (p.name.clone(), p.value))
                .collect(),
            noise: 0.0,
            noise_kind: Default::default(),
            abscissa: default_abscissa(adapter.kind),
            temperature: f64::NAN,
            kind: None,
        })
    }

    fn single_trace(&self) -> Result<&Path, Failure> {
        match self.opts.trace.as_slice() {
            [one] => Ok(one),
            [] => Err(validation("--trace is required")),
            _ => Err(validation("this command takes exactly one --trace")),
        }
    }
}

fn fit_outcome(out: &mut Outcome, results: &[FitResult]) {
    if results.iter().any(|r| !r.converged) {
        out.code = EXIT_NOT_CONVERGED;
        out.stderr
            .push_str("fit did not converge; best parameters so far were written\n");
    }
}

fn run_command(command: &Command, ctx: &Ctx) -> Result<Outcome, Failure> {
    let mut out = Outcome::default();
    let stdout = ctx.to_stdout();
    match command {
        Command::Simulate => {
            let (cfg, adapter) = ctx.adapter()?;
            let mut spec = ctx.synthetic_spec(&cfg, &adapter)?;
            spec.noise = 0.0;
            let (trace, _) = generate_synthetic(&spec, ctx.seed())?;
            out.emit("simulate.csv", format_trace(&trace), stdout);
        }
        Command::GenSynthetic => {
            let (cfg, adapter) = ctx.adapter()?;
            let spec = ctx.synthetic_spec(&cfg, &adapter)?;
            let (trace, truth) = generate_synthetic(&spec, ctx.seed())?;
            out.emit("synthetic.csv", format_trace(&trace), stdout);
            let mut truth_json =
                serde_json::to_string_pretty(&truth).expect("truth records serialize");
            truth_json.push('\n');
            out.emit("truth.json", truth_json, false);
        }
        Command::Fit => {
            let (cfg, adapter) = ctx.adapter()?;
            let trace = read_trace(ctx.single_trace()?)?;
            let r = fit(&adapter, &trace, &cfg.init())?;
            fit_outcome(&mut out, std::slice::from_ref(&r));
            out.emit("fit.json", fit_result_json(&r), stdout);
        }
        Command::FitSeries => {
            let (cfg, adapter) = ctx.adapter()?;
            if ctx.opts.trace.is_empty() {
                return Err(validation("--trace is required"));
            }
            let traces = ctx
                .opts
                .trace
                .iter()
                .map(|p| read_trace(p))
                .collect::<Result<Vec<_>, _>>()?;
            let results = fit_many(&adapter, &traces, &cfg.init())
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?;
            fit_outcome(&mut out, &results);
            let records: Vec<serde_json::Value> = ctx
                .opts
                .trace
                .iter()
                .zip(&results)
                .map(|(p, r)| {
                    let mut v = fit_result_value(r);
                    v["trace"] = serde_json::Value::from(p.display().to_string());
                    v
                })
                .collect();
            let mut body = serde_json::to_string_pretty(&records).expect("fit records serialize");
            body.push('\n');
            out.emit("fit_series.json", body, stdout);
        }
        Command::Deconvolve => {
            if ctx.opts.out.is_none() {
                return Err(validation("deconvolve writes two files and needs --out"));
            }
            let chirp = ctx
                .cfg
                .chirp
                .ok_or_else(|| validation("deconvolve needs a [chirp] section in --config"))?
                .readout()?;
            let trace = read_trace(ctx.single_trace()?)?;
            let d = deconvolve_chirp(&trace, &chirp)?;
            let r = fit_hole_profile(&d.profile)?;
            fit_outcome(&mut out, std::slice::from_ref(&r));
            out.emit("profile.csv", format_trace(&d.profile), false);
            out.emit("profile_fit.json", fit_result_json(&r), false);
        }
        Command::DecomposeLinewidth { temperatures } => {
            let known = ["gamma_h0", "gamma_r", "alpha_r", "t_opt"];
            let mut v: BTreeMap<&str, f64> = BTreeMap::from([
                ("gamma_h0", LinewidthModel::PPM2.gamma_h0),
                ("gamma_r", LinewidthModel::PPM2.gamma_r),
                ("alpha_r", 2.0e-5),
                (
                    "t_opt",
                    ctx.cfg.system.as_ref().map_or(DEFAULT_T_OPT, |s| s.t_opt),
                ),
            ]);
            for (k, x) in &ctx.opts.fix {
                let key = known.iter().find(|n| *n == k).ok_or_else(|| {
                    validation(format!(
                        "unknown parameter {k:?}; expected one of {}",
                        known.join(", ")
                    ))
                })?;
                v.insert(key, *x);
            }
            let lw = LinewidthModel {
                gamma_h0: v["gamma_h0"],
                gamma_r: v["gamma_r"],
            };
            lw.validate()?;
            let rates = RateLawParams::raman(v["alpha_r"]);
            rates.validate()?;
            let temps: Vec<f64> = if temperatures.is_empty() {
                (2..=20).map(f64::from).collect()
            } else {
                temperatures.clone()
            };
            let mut body = String::new();
            let _ = writeln!(body, "# alpha_r = {}", v["alpha_r"]);
            let _ = writeln!(body, "# gamma_h0_Hz = {}", v["gamma_h0"]);
            let _ = writeln!(body, "# gamma_r = {}", v["gamma_r"]);
            let _ = writeln!(body, "# t_opt_s = {}", v["t_opt"]);
            let _ = writeln!(
                body,
                "T_K,gamma_h_Hz,gamma_direct_Hz,gamma_radiative_Hz,gamma_elastic_raman_Hz,residual_Hz,direct_fraction"
            );
            for t in temps {
                let b = linewidth_budget(&lw, &rates, v["t_opt"], t)?;
                let _ = writeln!(
                    body,
                    "{},{},{},{},{},{},{}",
                    b.temperature,
                    b.gamma_h,
                    b.gamma_direct,
                    b.gamma_radiative,
                    b.gamma_elastic_raman,
                    b.residual,
                    b.direct_raman_fraction()
                );
            }
            out.emit("linewidth_budget.csv", body, stdout);
        }
        Command::Validate => {
            if let Some(sys) = &ctx.cfg.system {
                // Already checked on load; repeated so every violation is listed.
                let v = validate_system(sys);
                if !v.is_empty() {
                    let lines: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                    return Err(validation(lines.join("\n")));
                }
            }
            for p in &ctx.opts.trace {
                read_trace(p).map_err(|e| validation(format!("{}: {e}", p.display())))?;
            }
            out.stdout.push_str("ok\n");
        }
    }
    Ok(out)
}

fn write_outputs(dir: &Path, out: &Outcome, argv: &[String]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure {
        code: EXIT_VALIDATION,
        message: format!("{}: {e}", dir.display()),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    for (name, body) in &out.files {
        std::fs::write(dir.join(name), body).map_err(io)?;
    }
    // Timestamps live only in this sidecar so the results stay byte-stable.
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let log = format!("unix_time = {stamp}\nargv = {argv:?}\n");
    std::fs::write(dir.join("run.log"), log).map_err(io)?;
    Ok(())
}

/// Runs the CLI on `argv` (program name first) and returns the exit code
/// together with what should go to stdout and stderr.
pub fn run(argv: &[String]) -> (i32, String, String) {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    (EXIT_OK, text, String::new())
                }
                _ => (EXIT_USAGE, String::new(), text),
            };
        }
    };
    let dir = cli.opts.out.clone();
    let result = Ctx::new(cli.opts).and_then(|ctx| run_command(&cli.command, &ctx));
    match result {
        Ok(out) => {
            if let Some(dir) = dir {
                if let Err(f) = write_outputs(&dir, &out, argv) {
                    return (f.code, String::new(), format!("error: {}\n", f.message));
                }
            }
            (out.code, out.stdout, out.stderr)
        }
        Err(f) => (f.code, String::new(), format!("error: {}\n", f.message)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignments() {
        assert_eq!(
            parse_assignment("t_opt=1.3e-3"),
            Ok(("t_opt".into(), 1.3e-3))
        );
        assert!(parse_assignment("t_opt").is_err());
        assert!(parse_assignment("=1").is_err());
        assert!(parse_assignment("a=inf").is_err());
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let argv: Vec<String> = ["spinrelax", "fit", "--bogus"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let (code, _, err) = run(&argv);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("Usage"));
    }
}
