use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use wlp_core::io::{read_gf, write_gf};
use wlp_core::ops::Operator;
use wlp_core::report::{read_jsonl, summarize, write_jsonl, Summary};
use wlp_core::verify::{run, RunConfig};
use wlp_core::weights::{ap_constant, CubeFamily};
use wlp_core::{par, weighted_lp_norm, QuadratureRule, Weight};

const IDS_HELP: &str = "Theorem ids accepted by `verify`:
  suf       Steklov mean bound 3^{2d+1/p}[w]_p^{1/p}
  suwf      weighted Steklov mean, constant stable under refinement
  ruwf      R-operator bound 4^{1/min(1,p)}
  commute   S_{u,w} and S_{delta,v} commute
  frac      fractional difference bound and truncation
  sduf      S_{delta,v} bounded, stable under refinement
  dela      de la Vallee Poussin reproduction, band and norm bound
  jackson   empirical Jackson constant, stable under refinement
  marchaud  reverse Marchaud constant, positive and stable
  sandwich  ||f|| <= sup F_f <= 4^{1/min(1,p)} ||f||
  trver     L_a version of the sandwich
  holder    Hoelder pairing";

#[derive(Parser)]
#[command(name = "wlp", version, about = "Weighted Lebesgue-space operators and inequality checks", after_help = IDS_HELP)]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "WSL_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Weighted L_p norm of a sampled function.
    Norm(NormArgs),
    /// Dyadic estimate of the Muckenhoupt A_p constant.
    Apconst(ApArgs),
    /// Apply an averaging operator to a sampled function.
    Op(OpArgs),
    /// Run inequality checks from a config file.
    #[command(after_help = IDS_HELP)]
    Verify(VerifyArgs),
    /// Summarize a JSON-lines report file.
    Report(ReportArgs),
}

#[derive(Args)]
struct NormArgs {
    #[arg(long)]
    p: f64,
    #[arg(long, default_value = "const:1")]
    weight: String,
    /// `.gf` sample file.
    #[arg(long)]
    input: PathBuf,
    /// Midpoint sub-samples per cell and axis.
    #[arg(long, default_value_t = 1)]
    refinement: usize,
}

#[derive(Args)]
struct ApArgs {
    #[arg(long)]
    weight: String,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 8)]
    depth: usize,
    #[arg(long, default_value_t = 1)]
    d: usize,
}

#[derive(Args)]
struct OpArgs {
    /// One of I, S_u, S_uw, R, S_dv, V, Z, B.
    #[arg(long = "op")]
    tag: String,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Shift, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    u: Option<Vec<f64>>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value = "const:1")]
    weight: String,
    #[arg(long)]
    normalizer: Option<f64>,
    /// Exponent of the reported norm ratio.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `ensemble.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON-lines report; stdout when neither this nor `output.report` is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for CSV plot data.
    #[arg(long)]
    csv_dir: Option<PathBuf>,
    /// Print the normalized config and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    input: PathBuf,
}

/// Errors exit with 2, failed checks with 1.
enum Outcome {
    Pass,
    Fail,
}

fn weight(s: &str) -> Result<Weight> {
    s.parse().with_context(|| format!("weight `{s}`"))
}

fn load_gf(path: &Path) -> Result<wlp_core::GridFunction> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_gf(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RunConfig::from_json(&text).with_context(|| format!("config {}", path.display()))
}

fn print_summary(s: &Summary, mut out: impl Write) -> Result<()> {
    let count = |v| s.counts.get(&v).copied().unwrap_or(0);
    writeln!(
        out,
        "{} reports: {} pass, {} fail, {} inconclusive",
        s.total,
        count(wlp_core::report::Verdict::Pass),
        count(wlp_core::report::Verdict::Fail),
        count(wlp_core::report::Verdict::Inconclusive)
    )?;
    if let Some((id, v)) = &s.worst_utilization {
        writeln!(out, "worst utilization: {v:.6e} ({id})")?;
    }
    for f in &s.failed {
        writeln!(out, "FAIL {f}")?;
    }
    Ok(())
}

fn norm(a: NormArgs) -> Result<Outcome> {
    let f = load_gf(&a.input)?;
    let rule = QuadratureRule::midpoint().with_refinement(a.refinement);
    let v = weighted_lp_norm(&f, a.p, &weight(&a.weight)?, &rule)?;
    println!("{v}");
    Ok(Outcome::Pass)
}

fn apconst(a: ApArgs) -> Result<Outcome> {
    let w = weight(&a.weight)?;
    let est = ap_constant(&w, a.p, &CubeFamily::unit(a.d, a.depth)?, &QuadratureRule::midpoint())?;
    println!("value = {}", est.value);
    println!("diverging = {}", est.diverging);
    for (depth, v) in &est.depth_profile {
        println!("depth {depth}: {v}");
    }
    Ok(Outcome::Pass)
}

fn op(a: OpArgs) -> Result<Outcome> {
    let f = load_gf(&a.input)?;
    let w = weight(&a.weight)?;
    let op = Operator::from_tag(&a.tag, f.grid().dim(), a.u.as_deref(), a.delta, &w, a.normalizer)?;
    let g = op.apply(&f)?;
    let rule = QuadratureRule::midpoint();
    let nf = weighted_lp_norm(&f, a.p, &w, &rule)?;
    let ng = weighted_lp_norm(&g, a.p, &w, &rule)?;
    println!("ratio = {}", if nf > 0.0 { ng / nf } else { 0.0 });
    if let Some(path) = a.output {
        let mut out = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        write_gf(&g, &mut out)?;
    }
    Ok(Outcome::Pass)
}

fn verify(a: VerifyArgs) -> Result<Outcome> {
    let mut cfg = load_config(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.ensemble.seed = seed;
    }
    if a.out.is_some() {
        cfg.output.report = a.out;
    }
    if a.csv_dir.is_some() {
        cfg.output.csv_dir = a.csv_dir;
    }
    if a.print_config {
        println!("{}", cfg.normalized()?);
        return Ok(Outcome::Pass);
    }
    let out = run(&cfg)?;
    match &cfg.output.report {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_jsonl(&out.reports, BufWriter::new(f))?;
        }
        None => write_jsonl(&out.reports, io::stdout().lock())?,
    }
    if let Some(dir) = &cfg.output.csv_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for art in &out.artifacts {
            fs::write(dir.join(&art.name), &art.contents)?;
        }
    }
    let s = summarize(&out.reports);
    print_summary(&s, io::stderr().lock())?;
    Ok(if s.all_pass() { Outcome::Pass } else { Outcome::Fail })
}

fn report(a: ReportArgs) -> Result<Outcome> {
    let f = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let reports = read_jsonl(BufReader::new(f))?;
    let s = summarize(&reports);
    println!("{}", serde_json::to_string_pretty(&s)?);
    print_summary(&s, io::stderr().lock())?;
    Ok(if s.all_pass() { Outcome::Pass } else { Outcome::Fail })
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let res = par::with_jobs(cli.jobs, move || match cli.cmd {
        Cmd::Norm(a) => norm(a),
        Cmd::Apconst(a) => apconst(a),
        Cmd::Op(a) => op(a),
        Cmd::Verify(a) => verify(a),
        Cmd::Report(a) => report(a),
    });
    match res {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
