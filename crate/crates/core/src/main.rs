use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use z2mon::experiment::fit::{fit_saturation, linear_fit, FitModel};
use z2mon::experiment::sweep::{parse_values, read_summary, summary_path, SweepAxis};
use z2mon::experiment::{run_single, run_sweep, verify, RunConfig, Settings};
use z2mon::{Error, Result, SpinConventions};

/// Environment variable selecting a deliberately wrong encoding for `verify`.
const MUTATION_ENV: &str = "Z2MON_VERIFY_MUTATION";

#[derive(Parser)]
#[command(name = "z2mon", version, about = "No-click monitored dynamics of the 1+1D Z2 gauge theory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the strong-coupling vacuum and write the time series CSV.
    Run(CommonArgs),
    /// Run one trajectory per value of a swept parameter.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Swept parameter: gamma, x or L.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        /// Also fit the saturation curve with this model and write fit.json.
        #[arg(long)]
        fit: Option<String>,
    },
    /// Fit a saturation curve from a sweep summary CSV.
    Fit {
        summary: PathBuf,
        /// exp-offset, power-exp or rational.
        #[arg(long, default_value = "exp-offset")]
        model: String,
        /// Output JSON path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check the engine against full-register oracles (L <= 8).
    Verify(CommonArgs),
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    #[arg(long = "L")]
    sites: Option<usize>,
    #[arg(long)]
    x: Option<f64>,
    #[arg(long = "m-over-g")]
    m_over_g: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// flux or density.
    #[arg(long)]
    measure: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "T")]
    total: Option<f64>,
    /// Entanglement cut bond (default L/2 - 1).
    #[arg(long)]
    cut: Option<usize>,
    /// Saturation window t1:t2.
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    /// Gauss-law check cadence in steps (0 disables).
    #[arg(long = "gauss-every")]
    gauss_every: Option<usize>,
    #[arg(long = "krylov-tol")]
    krylov_tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Key-value configuration file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl CommonArgs {
    fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::new(),
        };
        let overrides: [(&str, Option<String>); 13] = [
            ("L", self.sites.map(|v| v.to_string())),
            ("x", self.x.map(|v| v.to_string())),
            ("m_over_g", self.m_over_g.map(|v| v.to_string())),
            ("gamma", self.gamma.map(|v| v.to_string())),
            ("measure", self.measure.clone()),
            ("dt", self.dt.map(|v| v.to_string())),
            ("T", self.total.map(|v| v.to_string())),
            ("cut", self.cut.map(|v| v.to_string())),
            ("window", self.window.clone()),
            ("workers", self.workers.map(|v| v.to_string())),
            ("gauss_every", self.gauss_every.map(|v| v.to_string())),
            ("krylov_tol", self.krylov_tol.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
        ];
        for (k, v) in overrides {
            if let Some(v) = v {
                s.set(k, v)?;
            }
        }
        Ok(s)
    }
}

fn cmd_run(args: &CommonArgs) -> Result<()> {
    let cfg = RunConfig::from_settings(&args.settings()?)?;
    let out = run_single(&cfg)?;
    if cfg.output.is_none() {
        out.series.write_csv(io::stdout().lock())?;
    }
    eprintln!(
        "L={} x={} gamma={} measure={}: S_sat = {:.10} +- {:.3e} over [{}, {}] ({})",
        cfg.lattice.sites(),
        cfg.params.x(),
        cfg.params.gamma(),
        cfg.params.measurement(),
        out.saturation.mean,
        out.saturation.std,
        cfg.window.0,
        cfg.window.1,
        if out.saturated { "saturated" } else { "not saturated" },
    );
    Ok(())
}

fn cmd_sweep(args: &CommonArgs, axis: &str, values: &str, fit: Option<&str>) -> Result<bool> {
    let settings = args.settings()?;
    let axis: SweepAxis = axis.parse()?;
    let values = parse_values(values)?;
    let model = fit.map(str::parse::<FitModel>).transpose()?;
    let mut base = RunConfig::from_settings(&settings)?;
    let out_dir = base.output.take();
    let mut result = run_sweep(&base, axis, &values, settings.workers()?, out_dir.as_deref())?;

    for p in result.failures() {
        eprintln!("point {}={} failed: {}", axis, p.value, p.error.as_deref().unwrap_or(""));
    }
    let curve = result.curve();
    if let Ok((slope, intercept)) = linear_fit(&curve) {
        eprintln!("linear fit: S_sat = {slope:.6e} * {axis} + {intercept:.6e}");
    }
    if let Some(model) = model {
        match fit_saturation(&curve, model) {
            Ok(f) => result.fit = Some(f),
            Err(e) => eprintln!("fit skipped: {e}"),
        }
    }
    match &out_dir {
        Some(dir) => {
            result.write_summary_file(&summary_path(dir))?;
            if let Some(f) = &result.fit {
                write_json(Some(&dir.join("fit.json")), f)?;
            }
        }
        None => result.write_summary(io::stdout().lock())?,
    }
    let all_ok = result.failures().next().is_none();
    Ok(all_ok)
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    match path {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => writeln!(io::stdout().lock(), "{text}")?,
    }
    Ok(())
}

fn cmd_fit(summary: &Path, model: &str, out: Option<&Path>) -> Result<()> {
    let model: FitModel = model.parse()?;
    let points = read_summary(std::fs::File::open(summary)?)?;
    let curve: Vec<(f64, f64)> = points.iter().map(|p| (p.value, p.s_sat_mean)).collect();
    let fit = fit_saturation(&curve, model)?;
    if !fit.converged {
        eprintln!("warning: fit did not converge; parameters are unreliable");
    }
    write_json(out, &fit)
}

fn cmd_verify(args: &CommonArgs) -> Result<()> {
    let mut settings = args.settings()?;
    if settings.get("L").is_none() {
        settings.set("L", "6")?;
    }
    let cfg = RunConfig::from_settings(&settings)?;
    let conventions = match std::env::var(MUTATION_ENV).ok().as_deref() {
        None | Some("") => SpinConventions::default(),
        Some("flip-links") => SpinConventions::flipped_links(),
        Some(other) => return Err(Error::Config(format!("unknown {MUTATION_ENV} value {other:?}"))),
    };
    let report = verify(&cfg, conventions)?;
    for c in &report.checks {
        println!("{c}");
    }
    if report.all_passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        Err(Error::Verification(failed.join(", ")))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep { common, axis, values, fit } => {
            cmd_sweep(common, axis, values, fit.as_deref()).and_then(|all_ok| {
                if all_ok {
                    Ok(())
                } else {
                    Err(Error::Config("one or more sweep points failed".into()))
                }
            })
        }
        Command::Fit { summary, model, out } => cmd_fit(summary, model, out.as_deref()),
        Command::Verify(args) => cmd_verify(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
