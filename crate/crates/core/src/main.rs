use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use permsym::config::RunConfig;
use permsym::counting::EntryCounts;
use permsym::runner::{execute, exit_code};
use permsym::Error;

/// Lindblad dynamics of identical emitters in the symmetric Fock sector.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one configuration and write CSV files plus a manifest.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also evolve the product-space reference and report deviations.
        #[arg(long)]
        oracle: bool,
        /// Treat warnings (leakage, positivity, drift) as failures.
        #[arg(long)]
        strict: bool,
    },
    /// Print basis dimensions and density-matrix entry counts.
    Dims { config: PathBuf },
    /// Run a configuration for every combination of the given values.
    Sweep {
        config: PathBuf,
        /// `key=v1,v2,...`; may be repeated.
        #[arg(long, required = true)]
        vary: Vec<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        strict: bool,
    },
}

fn load(path: &Path) -> Result<RunConfig, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config {
        line: 0,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    RunConfig::parse(&text)
}

fn run_one(cfg: &RunConfig, out: &Path, strict: bool) -> Result<(), Error> {
    let outcome = execute(cfg, strict)?;
    let files = outcome.write(out)?;
    let name = cfg.output_name();
    println!(
        "{name}: emitter_dim = {} total_dim = {} steps = {} wall = {:.2}s",
        outcome.emitter_dim,
        outcome.total_dim,
        outcome.trajectory.diagnostics.steps.accepted,
        outcome.wall_seconds
    );
    if let Some(o) = &outcome.oracle {
        println!("{name}: reference dim = {} max deviation = {:e}", o.dim, o.deviation.max());
    }
    for w in &outcome.warnings {
        eprintln!("{name}: warning: {w}");
    }
    for f in files {
        println!("{name}: wrote {}", f.display());
    }
    Ok(())
}

/// Parse `key=v1,v2` into the key and its values.
fn parse_vary(spec: &str) -> Result<(String, Vec<String>), Error> {
    let bad = || Error::Config {
        line: 0,
        message: format!("--vary expects key=v1,v2,..., got {spec:?}"),
    };
    let (key, values) = spec.split_once('=').ok_or_else(bad)?;
    let values: Vec<String> = values
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if key.trim().is_empty() || values.is_empty() {
        return Err(bad());
    }
    Ok((key.trim().to_string(), values))
}

fn sweep_configs(base: &RunConfig, vary: &[String]) -> Result<Vec<RunConfig>, Error> {
    let mut configs = vec![(base.clone(), base.output_name())];
    for spec in vary {
        let (key, values) = parse_vary(spec)?;
        let mut next = Vec::with_capacity(configs.len() * values.len());
        for (cfg, name) in &configs {
            for v in &values {
                let mut c = cfg.clone();
                c.set(&key, v)?;
                let tag: String = v
                    .chars()
                    .map(|ch| if ch.is_ascii_alphanumeric() || ch == '.' || ch == '-' { ch } else { '_' })
                    .collect();
                next.push((c, format!("{name}_{key}-{tag}")));
            }
        }
        configs = next;
    }
    configs
        .into_iter()
        .map(|(mut c, name)| {
            c.set("output", &name)?;
            c.validate()?;
            Ok(c)
        })
        .collect()
}

fn main_inner(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            config,
            out,
            oracle,
            strict,
        } => {
            let mut cfg = load(&config)?;
            cfg.oracle |= oracle;
            run_one(&cfg, &out, strict)
        }
        Command::Dims { config } => {
            let cfg = load(&config)?;
            let s = &cfg.spec;
            let counts = EntryCounts::new(s.emitter_modes(), s.n, s.cavity_dim())?;
            println!("model = {}", s.kind);
            for (k, v) in counts.rows() {
                println!("{k} = {v}");
            }
            Ok(())
        }
        Command::Sweep {
            config,
            vary,
            jobs,
            out,
            oracle,
            strict,
        } => {
            let mut base = load(&config)?;
            base.oracle |= oracle;
            let configs = sweep_configs(&base, &vary)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build()
                .map_err(|e| Error::Config {
                    line: 0,
                    message: format!("cannot start {jobs} workers: {e}"),
                })?;
            let results: Vec<Result<(), Error>> =
                pool.install(|| configs.par_iter().map(|c| run_one(c, &out, strict)).collect());
            let mut worst: Option<Error> = None;
            for (c, r) in configs.iter().zip(results) {
                if let Err(e) = r {
                    eprintln!("{}: error: {e}", c.output_name());
                    if worst.as_ref().is_none_or(|w| exit_code(&e) > exit_code(w)) {
                        worst = Some(e);
                    }
                }
            }
            worst.map_or(Ok(()), Err)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
