mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use wgident::bspline::make_coefficient_basis;
use wgident::grid::{add_noise, compute_noise_sigma, read_grid, write_grid, NoiseSpec, SigmaMode};
use wgident::metrics::{ppv, tpr, e2, GroundTruth};
use wgident::pipeline::{identify, Report, RunConfig};
use wgident::simulate::{simulate, NamedProfile, PdeKind, PdeSpec};
use wgident::spectrum::plan_test_functions;
use wgident::weak::FeatureGroup;
use wgident::Error;

use config::FileConfig;

#[derive(Parser)]
#[command(name = "wgident", version, about = "Identify PDEs with spatially varying coefficients from gridded data")]
struct Cli {
    /// Flat `key = value` file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress informational output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a benchmark PDE and write clean and noisy grid files.
    Simulate(SimulateArgs),
    /// Run the identification pipeline on a grid file.
    Identify(IdentifyArgs),
    /// Score reports against a truth file, one CSV row per trial.
    Evaluate(EvaluateArgs),
    /// Print the noise cutoffs and test-function plan for a grid file.
    Spectrum(SpectrumArgs),
}

fn parse_nsr(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("nsr must lie in [0, 1], got {v}"))
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// advection-diffusion, burgers, kdv or inviscid-burgers
    #[arg(long)]
    pde: PdeKind,
    #[arg(long, default_value_t = 256)]
    nx: usize,
    #[arg(long, default_value_t = 200)]
    nt: usize,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    length: Option<f64>,
    /// Initial condition as an expression in x.
    #[arg(long)]
    initial: Option<String>,
    /// Transport coefficient a(x).
    #[arg(long)]
    a: Option<String>,
    /// Diffusion coefficient.
    #[arg(long)]
    c: Option<f64>,
    /// Dispersion coefficient b(x) (KdV).
    #[arg(long)]
    b: Option<String>,
    /// Fixed internal time step.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_parser = parse_nsr)]
    nsr: Option<f64>,
    #[arg(long)]
    noise_sigma_mode: Option<SigmaMode>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunFlags {
    #[arg(long)]
    dictionary: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    tau_x: Option<f64>,
    #[arg(long)]
    tau_t: Option<f64>,
    /// Group trimming threshold.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Args)]
struct IdentifyArgs {
    #[arg(long)]
    input: PathBuf,
    /// Report path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Noise added to the input before identification.
    #[arg(long, value_parser = parse_nsr)]
    nsr: Option<f64>,
    #[arg(long)]
    noise_sigma_mode: Option<SigmaMode>,
    /// Independent noise realisations with seeds seed, seed+1, ...
    #[arg(long)]
    trials: Option<usize>,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    tau_x: Option<f64>,
    #[arg(long)]
    tau_t: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
}

/// One identified trial as written to disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ReportDoc {
    seed: u64,
    nsr: f64,
    #[serde(flatten)]
    report: Report,
    /// Reports for channels after the first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    other_channels: Vec<Report>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TruthTerm {
    label: String,
    coefficient: String,
    #[serde(default)]
    channel: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TruthFile {
    pde: String,
    terms: Vec<TruthTerm>,
}

enum Failure {
    Usage(String),
    Run(&'static str, Error),
}

impl Failure {
    fn run(cmd: &'static str) -> impl Fn(Error) -> Failure {
        move |e| Failure::Run(cmd, e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(cmd, e)) => {
            eprintln!("wgident {cmd}: {e}");
            match e {
                Error::Simulation(_) => ExitCode::from(3),
                _ => ExitCode::from(4),
            }
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let name = match &cli.command {
        Command::Simulate(_) => "simulate",
        Command::Identify(_) => "identify",
        Command::Evaluate(_) => "evaluate",
        Command::Spectrum(_) => "spectrum",
    };
    let file = match &cli.config {
        Some(p) => FileConfig::load(p).map_err(Failure::run(name))?,
        None => FileConfig::default(),
    };
    let seed = match cli.seed {
        Some(s) => s,
        None => file.get("seed").map_err(Failure::run(name))?.unwrap_or(0),
    };
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, &file, seed, cli.quiet),
        Command::Identify(a) => cmd_identify(a, &file, seed, cli.quiet),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Spectrum(a) => cmd_spectrum(a, &file),
    }
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}{suffix}"))
}

fn cmd_simulate(a: &SimulateArgs, file: &FileConfig, seed: u64, quiet: bool) -> Result<(), Failure> {
    let fail = Failure::run("simulate");
    let nsr = match a.nsr {
        Some(v) => v,
        None => file.get("nsr").map_err(&fail)?.unwrap_or(0.0),
    };
    if !(0.0..=1.0).contains(&nsr) {
        return Err(Failure::Usage(format!("nsr must lie in [0, 1], got {nsr}")));
    }
    let mode = match a.noise_sigma_mode {
        Some(m) => m,
        None => file.sigma_mode().map_err(&fail)?.unwrap_or_default(),
    };
    let mut spec = PdeSpec::for_kind(a.pde, a.nx, a.nt);
    if let Some(v) = a.t_end {
        spec.t_end = v;
    }
    if let Some(v) = a.x0 {
        spec.x0 = v;
    }
    if let Some(v) = a.length {
        spec.length = v;
    }
    if let Some(t) = &a.initial {
        spec.initial = NamedProfile::parse(t).map_err(&fail)?;
    }
    if let Some(t) = &a.a {
        spec.a = NamedProfile::parse(t).map_err(&fail)?;
    }
    if let Some(v) = a.c {
        spec.c = v;
    }
    if let Some(t) = &a.b {
        spec.b = Some(NamedProfile::parse(t).map_err(&fail)?);
    }
    spec.dt = a.dt;

    let clean = simulate(&spec).map_err(&fail)?;
    let noisy = add_noise(&clean, &NoiseSpec { nsr, seed, mode }).map_err(&fail)?;
    write_grid(&noisy, &a.out).map_err(&fail)?;
    write_grid(&clean, sibling(&a.out, ".clean.grid")).map_err(&fail)?;
    let truth = TruthFile {
        pde: a.pde.name().into(),
        terms: spec
            .truth_terms()
            .into_iter()
            .map(|(label, coefficient)| TruthTerm {
                label,
                coefficient,
                channel: 0,
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&truth).expect("truth serializes");
    std::fs::write(sibling(&a.out, ".truth.json"), json + "\n").map_err(|e| fail(e.into()))?;
    if !quiet {
        for c in 0..clean.n_channels() {
            let sigma = compute_noise_sigma(&clean, c, nsr, mode).map_err(&fail)?;
            println!("channel {c}: sigma = {sigma:.6e} (nsr {nsr}, {mode:?})");
        }
    }
    Ok(())
}

fn run_config(flags: &RunFlags, file: &FileConfig, n_channels: usize) -> wgident::Result<RunConfig> {
    let mut cfg = file.run_config(n_channels)?;
    if let Some(v) = &flags.dictionary {
        cfg.dictionary = v.clone();
    }
    if let Some(v) = flags.m {
        cfg.m = v;
    }
    if let Some(v) = flags.d {
        cfg.d = v;
    }
    if let Some(v) = flags.tau_x {
        cfg.tau_x = v;
    }
    if let Some(v) = flags.tau_t {
        cfg.tau_t = v;
    }
    if let Some(v) = flags.tau {
        cfg.tau = v;
    }
    if let Some(v) = flags.l {
        cfg.l = v;
    }
    if let Some(v) = flags.rho {
        cfg.rho = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_identify(a: &IdentifyArgs, file: &FileConfig, seed: u64, quiet: bool) -> Result<(), Failure> {
    let fail = Failure::run("identify");
    let data = read_grid(&a.input).map_err(&fail)?;
    let cfg = run_config(&a.run, file, data.n_channels()).map_err(&fail)?;
    let nsr = match a.nsr {
        Some(v) => v,
        None => file.get("nsr").map_err(&fail)?.unwrap_or(0.0),
    };
    let mode = match a.noise_sigma_mode {
        Some(m) => m,
        None => file.sigma_mode().map_err(&fail)?.unwrap_or_default(),
    };
    let trials = match a.trials {
        Some(v) => v,
        None => file.get("trials").map_err(&fail)?.unwrap_or(1),
    };
    if trials == 0 {
        return Err(Failure::Usage("trials must be at least 1".into()));
    }
    let docs = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let s = seed + i;
            let field = add_noise(&data, &NoiseSpec { nsr, seed: s, mode })?;
            let mut reports = identify(&field, &cfg)?.reports.into_iter();
            let report = reports.next().expect("at least one channel");
            Ok(ReportDoc {
                seed: s,
                nsr,
                report,
                other_channels: reports.collect(),
            })
        })
        .collect::<wgident::Result<Vec<_>>>()
        .map_err(&fail)?;
    if !quiet {
        for d in &docs {
            for r in std::iter::once(&d.report).chain(&d.other_channels) {
                eprintln!(
                    "seed {} channel {}: theta* = {}, support = {{{}}}",
                    d.seed,
                    r.channel,
                    r.theta_star,
                    r.support_labels.join(", ")
                );
                for w in &r.warnings {
                    eprintln!("  warning: {w}");
                }
            }
        }
    }
    let json = if docs.len() == 1 {
        serde_json::to_string_pretty(&docs[0])
    } else {
        serde_json::to_string_pretty(&docs)
    }
    .expect("report serializes");
    match &a.out {
        Some(p) => std::fs::write(p, json + "\n").map_err(|e| fail(e.into()))?,
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{json}").map_err(|e| fail(e.into()))?;
        }
    }
    Ok(())
}

fn load_reports(path: &Path) -> wgident::Result<Vec<ReportDoc>> {
    let text = std::fs::read_to_string(path)?;
    let bad = |e: serde_json::Error| Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
    if value.is_array() {
        serde_json::from_value(value).map_err(bad)
    } else {
        Ok(vec![serde_json::from_value(value).map_err(bad)?])
    }
}

fn load_truth(path: &Path) -> wgident::Result<TruthFile> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    })
}

/// `(e2, tpr, ppv)` of one channel report.
fn score(report: &Report, truth: &TruthFile) -> wgident::Result<(f64, f64, f64)> {
    let terms: Vec<(String, String)> = truth
        .terms
        .iter()
        .filter(|t| t.channel == report.channel)
        .map(|t| (t.label.clone(), t.coefficient.clone()))
        .collect();
    let n_channels = truth.terms.iter().map(|t| t.channel + 1).max().unwrap_or(1).max(report.channel + 1);
    let dict = report
        .labels
        .iter()
        .map(|l| FeatureGroup::parse(l, n_channels))
        .collect::<wgident::Result<Vec<_>>>()?;
    if report.coefficients.len() != dict.len() * report.m {
        return Err(Error::Domain(format!(
            "report has {} coefficients for {} groups of {}",
            report.coefficients.len(),
            dict.len(),
            report.m
        )));
    }
    let xs = &report.x_grid;
    if xs.len() < 2 {
        return Err(Error::Domain("report has no spatial grid".into()));
    }
    let dx = xs[1] - xs[0];
    let basis = make_coefficient_basis(xs[0], dx * xs.len() as f64, report.m, report.config_echo.d)?;
    let gt = GroundTruth::from_labels(&dict, &basis, &terms)?;
    Ok((
        e2(&report.coefficients, &gt.c_star)?,
        tpr(&report.support, &gt.support)?,
        ppv(&report.support, &gt.support)?,
    ))
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<(), Failure> {
    let fail = Failure::run("evaluate");
    let docs = load_reports(&a.report).map_err(&fail)?;
    let truth = load_truth(&a.truth).map_err(&fail)?;
    let mut rows = vec!["seed,nsr,e2,e_res,tpr,ppv,theta_star".to_string()];
    for d in &docs {
        for r in std::iter::once(&d.report).chain(&d.other_channels) {
            let (e, t, p) = score(r, &truth).map_err(&fail)?;
            rows.push(format!("{},{},{e:.6e},{:.6e},{t},{p},{}", d.seed, d.nsr, r.e_res, r.theta_star));
        }
    }
    let mut out = std::io::stdout().lock();
    for row in rows {
        writeln!(out, "{row}").map_err(|e| fail(e.into()))?;
    }
    Ok(())
}

fn cmd_spectrum(a: &SpectrumArgs, file: &FileConfig) -> Result<(), Failure> {
    let fail = Failure::run("spectrum");
    let data = read_grid(&a.input).map_err(&fail)?;
    let cfg = file.run_config(data.n_channels()).map_err(&fail)?;
    let tau_x = a.tau_x.unwrap_or(cfg.tau_x);
    let tau_t = a.tau_t.unwrap_or(cfg.tau_t);
    let d = a.d.unwrap_or(cfg.d);
    let plan = plan_test_functions(&data, d + 1, tau_x, tau_t).map_err(&fail)?;
    println!("k_x_star = {}", plan.k_x_star);
    println!("k_t_star = {}", plan.k_t_star);
    println!("alpha_x = {:.10}", plan.alpha_x);
    println!("alpha_t = {:.10}", plan.alpha_t);
    println!("J_x = {}", plan.j_x);
    println!("J_t = {}", plan.j_t);
    println!("S = {}", plan.s());
    Ok(())
}
