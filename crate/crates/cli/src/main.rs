use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sigmalab::config::{RunConfig, Settings};
use sigmalab::suites::SuiteRegistry;

#[derive(Parser)]
#[command(name = "sigmalab", version, about = "Numerical checks for sigma_k curvature functionals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Variational formulas against exact jet derivatives, plus integrated identities.
    VerifyLemmas(Opts),
    /// Criticality, second variation, sign table and scaling of the functional.
    VerifyFunctional(Opts),
    /// Product-family scan, expansion audit and instability certificate.
    Counterexample(Opts),
    /// Randomized scaled conformal trials on the round sphere.
    CompareSphere(Opts),
    /// Quadrature, jet and oracle self-consistency.
    Selftest(Opts),
}

#[derive(Args, Clone, Default)]
struct Opts {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    l: Option<Vec<usize>>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    t_grid: Option<Vec<f64>>,
    /// `n-2l` or `2n-l`.
    #[arg(long)]
    beta_variant: Option<String>,
    /// Exit with status 2 when any finding is reported.
    #[arg(long)]
    strict_paper: bool,
    /// Output directory for report.csv and summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Randomized cases per background for verify-lemmas.
    #[arg(long)]
    cases: Option<usize>,
    #[arg(long)]
    quad_order: Option<usize>,
    /// `sphere`, `product` or `both`.
    #[arg(long)]
    model: Option<String>,
}

impl Command {
    fn split(self) -> (&'static str, Opts) {
        match self {
            Command::VerifyLemmas(o) => ("verify-lemmas", o),
            Command::VerifyFunctional(o) => ("verify-functional", o),
            Command::Counterexample(o) => ("counterexample", o),
            Command::CompareSphere(o) => ("compare-sphere", o),
            Command::Selftest(o) => ("selftest", o),
        }
    }
}

fn settings(name: &str, o: Opts) -> sigmalab::Result<Settings> {
    let file = match &o.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(c) = &file.command {
        if c != name {
            return Err(sigmalab::LabError::Config(format!("config is for `{c}`, not `{name}`")));
        }
    }
    let flags = RunConfig {
        command: Some(name.to_string()),
        n: o.n,
        k: o.k,
        l: o.l,
        lambda: o.lambda,
        model: o.model,
        quad_order: o.quad_order,
        t_grid: o.t_grid,
        trials: o.trials,
        epsilon: o.epsilon,
        seed: o.seed,
        beta_variant: o.beta_variant,
        out: o.out,
        cases: o.cases,
        strict_paper: o.strict_paper.then_some(true),
        tolerances: None,
    };
    Settings::resolve(file.overlay(flags))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, opts) = cli.command.split();
    let settings = match settings(name, opts) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("sigmalab: {e}");
            return ExitCode::from(1);
        }
    };
    let registry = SuiteRegistry::with_defaults();
    let summary = registry
        .report(&settings)
        .and_then(|report| report.write(&settings.out, settings.strict_paper));
    match summary {
        Ok(s) => {
            let c = &s.counts;
            println!(
                "{name}: {} pass, {} fail, {} finding, {} info -> {}",
                c.pass,
                c.fail,
                c.finding,
                c.info,
                settings.out.display()
            );
            for f in &s.failures {
                eprintln!("FAIL {} {} [{}] residual {} > {}", f.id, f.case, f.suite, f.residual, f.tolerance);
            }
            ExitCode::from(s.exit_code as u8)
        }
        Err(e) => {
            eprintln!("sigmalab: {e}");
            ExitCode::from(1)
        }
    }
}
