use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use normip::harness::{init_threads, run_sweep, run_trials, verify::verify_suite, SweepConfig, SweepOutput};
use normip::norms::{dual_norm_bruteforce, eval_norm, NormSpec};
use normip::protocols::run_protocol;
use normip::vector::{dot, read_vector};
use normip::ProtocolSpec;
use rand::SeedableRng;

/// Randomized inner-product protocols under norm constraints.
#[derive(Parser)]
#[command(name = "normip", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one protocol on fixed (v, w) for many seeds.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        v: PathBuf,
        #[arg(long)]
        w: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the first trial's transcript in debug form.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Run every cell of a sweep config; writes reports.json, summary.csv, timings.json.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in invariant/oracle suite, or re-validate a reports.json.
    Verify {
        #[arg(long)]
        reports: Option<PathBuf>,
    },
    /// Print a norm, its dual (closed form and brute force) and ⟨v, w⟩.
    Oracle {
        /// NormSpec as inline JSON or a path to a JSON file.
        #[arg(long)]
        norm: String,
        #[arg(long)]
        v: Option<PathBuf>,
        #[arg(long)]
        w: Option<PathBuf>,
    },
}

fn load_json<T: serde::de::DeserializeOwned>(arg: &str) -> anyhow::Result<T> {
    let text = if Path::new(arg).exists() { fs::read_to_string(arg)? } else { arg.to_string() };
    serde_json::from_str(&text).with_context(|| format!("parsing {arg}"))
}

fn cmd_run(spec: &Path, v: &Path, w: &Path, seed: u64, trials: usize, out: Option<&Path>, transcript: Option<&Path>) -> anyhow::Result<bool> {
    let protocol: ProtocolSpec = load_json(&spec.to_string_lossy())?;
    let v = read_vector(v)?;
    let w = read_vector(w)?;
    if v.len() != w.len() {
        bail!("v has {} entries, w has {}", v.len(), w.len());
    }
    let report = run_trials("run", 0, &protocol, &v, &w, trials, seed)?;
    report.validate()?;
    if let Some(path) = transcript {
        let first = run_protocol(&protocol, &v, &w, &mut rand_chacha::ChaCha8Rng::seed_from_u64(report.seeds[0]))?;
        fs::write(path, first.transcript.to_debug_string())?;
    }
    let stderr = report.stderr();
    println!(
        "truth {:.6}  eps {}  success {:.4} (±{:.4})  mean|Z| {:.4e}  p95|Z| {:.4e}  bits {} / {} declared",
        report.truth,
        report.epsilon,
        report.success_rate,
        stderr,
        report.mean_abs,
        report.p95_abs,
        report.max_bits(),
        report.declared_bits
    );
    if let Some(path) = out {
        fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    let contract = report.success_rate >= 1.0 - report.delta - 3.0 * stderr;
    if !contract {
        eprintln!("success rate below 1 - delta - 3 stderr");
    }
    Ok(contract)
}

fn cmd_sweep(config: &Path, out: &Path) -> anyhow::Result<bool> {
    let cfg = SweepConfig::load(config)?;
    let res = run_sweep(&cfg)?;
    res.write_artifacts(out)?;
    for r in &res.reports {
        println!("{:<40} success {:.4}  p95|Z| {:.4e}  bits {}", r.cell, r.success_rate, r.p95_abs, r.max_bits());
    }
    for f in &res.failures {
        eprintln!("{:<40} FAILED: {}", f.cell, f.error);
    }
    Ok(res.failures.is_empty())
}

fn cmd_verify(reports: Option<&Path>) -> anyhow::Result<bool> {
    if let Some(path) = reports {
        let out = SweepOutput::from_json(&fs::read_to_string(path)?)?;
        println!("{} reports consistent", out.reports.len());
        return Ok(true);
    }
    let mut ok = true;
    for c in verify_suite() {
        println!("{} {:<28} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    Ok(ok)
}

fn cmd_oracle(norm: &str, v: Option<&Path>, w: Option<&Path>) -> anyhow::Result<bool> {
    let spec: NormSpec = load_json(norm)?;
    println!("norm {}", spec.label());
    let v = v.map(read_vector).transpose()?;
    let w = w.map(read_vector).transpose()?;
    if let Some(v) = &v {
        println!("||v|| = {:.12}", eval_norm(&spec, v)?);
    }
    if let Some(w) = &w {
        let dual = spec.dual();
        match &dual {
            Ok(d) => println!("||w||_* = {:.12} ({})", eval_norm(d, w)?, d.label()),
            Err(e) => println!("||w||_* closed form unavailable: {e}"),
        }
        let bf = dual_norm_bruteforce(&spec, w, 2000)?;
        println!("||w||_* brute force = {:.12}{}", bf.value, if bf.exact { "" } else { " (lower bound)" });
    }
    if let (Some(v), Some(w)) = (&v, &w) {
        if v.len() != w.len() {
            bail!("v has {} entries, w has {}", v.len(), w.len());
        }
        println!("<v, w> = {:.12}", dot(v, w));
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().map_err(anyhow::Error::from).and_then(|_| match &cli.cmd {
        Cmd::Run { spec, v, w, seed, trials, out, transcript } => cmd_run(spec, v, w, *seed, *trials, out.as_deref(), transcript.as_deref()),
        Cmd::Sweep { config, out } => cmd_sweep(config, out),
        Cmd::Verify { reports } => cmd_verify(reports.as_deref()),
        Cmd::Oracle { norm, v, w } => cmd_oracle(norm, v.as_deref(), w.as_deref()),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
