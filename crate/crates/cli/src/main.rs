use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

mod config;
mod experiments;
mod output;
mod verify;

use config::{read_config_file, Experiment, ExperimentConfig};
use verify::{Suite, Verifier};

const EXIT_VERIFY: u8 = 1;
const EXIT_CONFIG: u8 = 2;

/// Bias, variance and MSE of least-squares amplitude estimation on quantized sine waves.
///
/// Experiments write CSV to --out (or stdout) and a summary to stdout (or stderr).
/// Parameters come from experiment defaults, then --config, then flags.
/// `sigma` and `offset` are in units of the quantization step.
#[derive(Parser, Debug)]
#[command(name = "quantsine", version)]
struct Cli {
    /// fig1..fig8, offset-sweep, noise-bias, noise-var, custom-sweep, or verify
    command: String,
    /// Bits (list or range, e.g. 4,6 or 2..12)
    #[arg(long)]
    bits: Option<String>,
    /// Quantization step, overriding bits
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    amp_min: Option<String>,
    #[arg(long)]
    amp_max: Option<String>,
    #[arg(long)]
    amp_steps: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    /// Samples per record (list or range)
    #[arg(long)]
    n: Option<String>,
    /// Monte Carlo records, or `auto`
    #[arg(long)]
    records: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    offset: Option<String>,
    /// key=value file, or a CSV written by an earlier run
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Verification suite
    #[arg(long, value_enum)]
    suite: Option<Suite>,
    #[arg(long, hide = true, allow_hyphen_values = true)]
    perturb_g: Option<f64>,
}

impl Cli {
    fn flag_pairs(&self) -> Vec<(String, String)> {
        let fields = [
            ("bits", &self.bits),
            ("delta", &self.delta),
            ("amp-min", &self.amp_min),
            ("amp-max", &self.amp_max),
            ("amp-steps", &self.amp_steps),
            ("lambda", &self.lambda),
            ("n", &self.n),
            ("records", &self.records),
            ("seed", &self.seed),
            ("sigma", &self.sigma),
            ("offset", &self.offset),
        ];
        let mut v: Vec<(String, String)> = fields
            .iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect();
        if let Some(out) = &self.out {
            v.push(("out".into(), out.display().to_string()));
        }
        v
    }
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("quantsine: {msg}");
    ExitCode::from(EXIT_CONFIG)
}

fn run_verify(cli: &Cli) -> ExitCode {
    if cli.config.is_some() || cli.flag_pairs().iter().any(|(k, _)| k != "out") {
        return config_error("verify takes only --suite, --out");
    }
    let suite = cli.suite.unwrap_or(Suite::Fast);
    let checks = match Verifier::new(suite, cli.perturb_g.unwrap_or(0.0)).run() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("quantsine: verification aborted: {e:#}");
            return ExitCode::from(EXIT_VERIFY);
        }
    };
    let text = verify::report(suite, &checks);
    print!("{text}");
    if let Some(path) = &cli.out {
        if let Err(e) = std::fs::write(path, &text) {
            return config_error(format!("cannot write {}: {e}", path.display()));
        }
    }
    if checks.iter().all(|c| c.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFY)
    }
}

fn run_experiment(cli: &Cli, experiment: Experiment) -> ExitCode {
    if cli.suite.is_some() || cli.perturb_g.is_some() {
        return config_error("--suite applies only to verify");
    }
    let file = match cli.config.as_deref().map(read_config_file).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => return config_error(e),
    };
    let cfg = match ExperimentConfig::resolve(experiment, &file, &cli.flag_pairs()) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let table = match experiments::run(&cfg) {
        Ok(t) => t,
        Err(e) => return config_error(format!("{e:#}")),
    };
    if table.non_coprime {
        eprintln!("quantsine: warning: lambda and n are not coprime; recorded as non_coprime=true");
    }
    let written = match &cfg.params.out {
        Some(path) => File::create(path).and_then(|f| {
            let mut w = BufWriter::new(f);
            output::write_csv(&mut w, &cfg, &table)?;
            w.flush()
        }),
        None => output::write_csv(&mut io::stdout().lock(), &cfg, &table),
    };
    if let Err(e) = written {
        return config_error(format!("cannot write output: {e}"));
    }
    let summary = table.summary.join("\n");
    if cfg.params.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.command == "verify" {
        return run_verify(&cli);
    }
    match Experiment::from_id(&cli.command) {
        Some(e) => run_experiment(&cli, e),
        None => {
            let ids: Vec<&str> = Experiment::ALL.iter().map(|e| e.id()).collect();
            config_error(format!(
                "unknown command `{}`; expected verify or one of {}",
                cli.command,
                ids.join(", ")
            ))
        }
    }
}
