//! `glnem` command line: fit generalized linear network eigenmodels, run
//! dimension-selection baselines, simulate networks, and compute posterior
//! predictive checks.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
//! failure.

use glnem::config::RunConfig;
use glnem::error::GlnemError;

const USAGE: &str = "\
usage: glnem <command> [options]

commands:
  simulate     generate a synthetic network and its ground truth
  fit          fit the spike-and-slab eigenmodel to a network
  select       fixed-dimension baselines (AIC/BIC/DIC/WAIC, optional K-fold CV)
  gof          posterior-predictive goodness-of-fit checks
  postprocess  re-align an existing draws file and summarize

options:
  --config <path>   key = value configuration file
  --seed <n>        override sampler.seed / sim.seed
  --chains <n>      override sampler.chains
  --out <dir>       output directory (default glnem_out)
  --data <path>     network file
  --format <f>      edge | dense (default edge)

environment:
  GLNEM_THREADS     caps worker threads for chains, folds, and replicates
";

fn parse_args(args: &[String]) -> Result<(String, RunConfig), GlnemError> {
    if args.is_empty() {
        return Err(GlnemError::Config("missing command".into()));
    }
    let command = args[0].clone();
    let mut config = RunConfig::default();
    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut i = 1;
    while i < args.len() {
        let flag = args[i].as_str();
        let value = |i: usize| -> Result<String, GlnemError> {
            args.get(i + 1)
                .cloned()
                .ok_or_else(|| GlnemError::Config(format!("{flag} needs a value")))
        };
        match flag {
            "--config" => {
                config = RunConfig::load(std::path::Path::new(&value(i)?))?;
                i += 2;
            }
            "--seed" => {
                let v = value(i)?;
                overrides.push(("sampler.seed".into(), v.clone()));
                overrides.push(("sim.seed".into(), v));
                i += 2;
            }
            "--chains" => {
                overrides.push(("sampler.chains".into(), value(i)?));
                i += 2;
            }
            "--out" => {
                overrides.push(("out".into(), value(i)?));
                i += 2;
            }
            "--data" => {
                overrides.push(("data".into(), value(i)?));
                i += 2;
            }
            "--format" => {
                overrides.push(("format".into(), value(i)?));
                i += 2;
            }
            other => {
                return Err(GlnemError::Config(format!("unknown option '{other}'")));
            }
        }
    }
    for (k, v) in overrides {
        config.set(&k, v);
    }
    Ok((command, config))
}

fn run() -> Result<(), GlnemError> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--help" || a == "-h") || args.is_empty() {
        print!("{USAGE}");
        return Ok(());
    }
    let (command, config) = parse_args(&args)?;
    let out = match command.as_str() {
        "simulate" => glnem::cli::cmd_simulate(&config)?,
        "fit" => glnem::cli::cmd_fit(&config)?,
        "select" => glnem::cli::cmd_select(&config)?,
        "gof" => glnem::cli::cmd_gof(&config)?,
        "postprocess" => glnem::cli::cmd_postprocess(&config)?,
        other => {
            return Err(GlnemError::Config(format!("unknown command '{other}'")));
        }
    };
    println!("wrote artifacts to {}", out.display());
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("glnem: {e}");
        std::process::exit(e.exit_code());
    }
}
