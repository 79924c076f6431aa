//! Command implementations behind the `glnem` binary: fit, simulate,
//! select, gof, and postprocess. Each takes a parsed `RunConfig` and writes
//! its artifacts under the configured output directory.

use crate::config::RunConfig;
use crate::data::{load_network, save_network, NetworkData};
use crate::error::{GlnemError, Result};
use crate::families::FamilyKind;
use crate::gof::{degree_distribution, posterior_predictive, predictive_degrees, GofStatistic};
use crate::postprocess;
use crate::report;
use crate::sampler::{run_chain, DrawStore, ModelKind};
use crate::simulate::{generate_glnem, generate_zip, SimConfig};
use std::path::PathBuf;

fn ensure_out_dir(config: &RunConfig) -> Result<PathBuf> {
    let dir = config.out_dir();
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn provenance(config: &RunConfig) -> Vec<(String, String)> {
    config
        .entries()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn load_data(config: &RunConfig) -> Result<NetworkData> {
    load_network(&config.data_path()?, config.format()?)
}

/// Fits the spike-and-slab model and writes draws, aligned draws, traces,
/// and posterior summaries.
pub fn cmd_fit(config: &RunConfig) -> Result<PathBuf> {
    let out = ensure_out_dir(config)?;
    // Validate the model specification before touching the data.
    let family = config.family()?;
    let link = config.link(family)?;
    let sampler_cfg = config.sampler()?;
    let data = load_data(config)?;
    let hyper = config.hyper(data.n)?;
    let draws = run_chain(
        &data,
        &hyper,
        family,
        link,
        ModelKind::SsIbp,
        config.fixed_phi()?,
        config.fixed_power()?,
        &sampler_cfg,
    )?;
    report::write_draws_csv(&draws, &out.join("draws.csv"), true)?;
    report::write_trace_csv(&draws, &out.join("trace.csv"))?;
    let aligned = postprocess::align_store(&draws);
    report::write_draws_csv(&aligned.store, &out.join("aligned_draws.csv"), true)?;
    let summary = postprocess::summarize(&aligned)?;
    report::write_summary(&summary, &draws, &provenance(config), &out)?;
    Ok(out)
}

/// Generates a synthetic network (optionally zero-inflated) and writes the
/// network plus ground-truth parameter files.
pub fn cmd_simulate(config: &RunConfig) -> Result<PathBuf> {
    let out = ensure_out_dir(config)?;
    let kind = match config.get("sim.family").unwrap_or("poisson") {
        "bernoulli" => FamilyKind::Bernoulli,
        "gaussian" => FamilyKind::Gaussian,
        "poisson" => FamilyKind::Poisson,
        "negative_binomial" | "negbin" => FamilyKind::NegativeBinomial,
        "tweedie" => FamilyKind::Tweedie,
        other => return Err(GlnemError::Config(format!("unknown sim.family '{other}'"))),
    };
    let n = config.get_usize("sim.n")?.unwrap_or(100);
    let seed = config.get_u64("sim.seed")?.unwrap_or(1);
    let mut sim = SimConfig::for_family(kind, n, seed);
    if let Some(d0) = config.get_usize("sim.d0")? {
        sim.d0 = d0.max(1);
    }
    let (data, truth) = match config.get_f64("sim.zero_inflation")? {
        Some(pi) if pi > 0.0 => {
            if !(0.0..1.0).contains(&pi) {
                return Err(GlnemError::Config("sim.zero_inflation must be in [0,1)".into()));
            }
            generate_zip(&sim, pi)?
        }
        _ => generate_glnem(&sim)?,
    };
    save_network(&data, &out.join("network.csv"))?;

    let mut truth_csv = String::new();
    truth_csv.push_str("parameter,value\n");
    for (k, v) in truth.beta0.iter().enumerate() {
        truth_csv.push_str(&format!("beta.{},{v}\n", k + 1));
    }
    for (h, v) in truth.lambda0.iter().enumerate() {
        truth_csv.push_str(&format!("lambda.{},{v}\n", h + 1));
    }
    truth_csv.push_str(&format!("phi,{}\n", truth.phi));
    truth_csv.push_str(&format!("power,{}\n", truth.power));
    std::fs::write(out.join("truth_params.csv"), truth_csv)?;

    let mut u_csv = String::from("node");
    for h in 1..=truth.u0.cols() {
        u_csv.push_str(&format!(",U.{h}"));
    }
    u_csv.push('\n');
    for i in 0..truth.u0.rows() {
        u_csv.push_str(&i.to_string());
        for h in 0..truth.u0.cols() {
            u_csv.push_str(&format!(",{}", truth.u0.at(i, h)));
        }
        u_csv.push('\n');
    }
    std::fs::write(out.join("truth_latent_positions.csv"), u_csv)?;
    Ok(out)
}

/// Runs the fixed-dimension selection battery over a dimension grid and
/// writes one row per candidate.
pub fn cmd_select(config: &RunConfig) -> Result<PathBuf> {
    let out = ensure_out_dir(config)?;
    let family = config.family()?;
    let link = config.link(family)?;
    let data = load_data(config)?;
    let d_min = config.get_usize("select.d_min")?.unwrap_or(1);
    let d_max = config.get_usize("select.d_max")?.unwrap_or(8);
    if d_min > d_max {
        return Err(GlnemError::Config("select.d_min exceeds select.d_max".into()));
    }
    let d_grid: Vec<usize> = (d_min..=d_max).collect();
    let k_folds = match config.get_usize("select.kfold")? {
        Some(0) | None => None,
        Some(k) => Some(k),
    };
    let sigma_beta = config.get_f64("hyper.sigma_beta")?.unwrap_or(10.0);
    let sampler_cfg = config.sampler()?;
    let report_rows = crate::selection::selection_report(
        &data,
        family,
        link,
        &d_grid,
        k_folds,
        sigma_beta,
        &sampler_cfg,
    )?;
    report::write_selection_csv(&report_rows, &out.join("selection.csv"))?;
    Ok(out)
}

fn read_draws(config: &RunConfig, out: &std::path::Path) -> Result<DrawStore> {
    let path = config
        .get("draws")
        .map(PathBuf::from)
        .unwrap_or_else(|| out.join("draws.csv"));
    report::read_draws_csv(&path)
}

/// Posterior-predictive goodness-of-fit: transitivity (or mean edge value)
/// plus degree-distribution replicates.
pub fn cmd_gof(config: &RunConfig) -> Result<PathBuf> {
    let out = ensure_out_dir(config)?;
    let data = load_data(config)?;
    let draws = read_draws(config, &out)?;
    if draws.n != data.n {
        return Err(GlnemError::Data(format!(
            "draws are for n={} nodes but the network has n={}",
            draws.n, data.n
        )));
    }
    let subsample = config.get_usize("gof.subsample")?.unwrap_or(200);
    let seed = config.get_u64("gof.seed")?.unwrap_or(0);
    let statistic = match config.get("gof.statistic").unwrap_or("transitivity") {
        "transitivity" => GofStatistic::Transitivity,
        "mean_edge" => GofStatistic::MeanEdge,
        other => return Err(GlnemError::Config(format!("unknown gof.statistic '{other}'"))),
    };
    let rep = posterior_predictive(&draws, &data, statistic, subsample, seed)?;
    report::write_gof_csv(&rep, &out.join(format!("gof_{}.csv", statistic.name())))?;

    // Degree distributions: weighted by default, binary for binary families.
    let binary = match config.get("gof.degree") {
        Some("binary") => true,
        Some("weighted") => false,
        _ => draws.family == FamilyKind::Bernoulli,
    };
    let observed = degree_distribution(&data.y, binary);
    let degree_reps = predictive_degrees(&draws, &data, subsample.min(50), binary, seed);
    report::write_degrees_csv(&observed, &degree_reps, &out.join("gof_degrees.csv"))?;
    Ok(out)
}

/// Re-aligns an existing draws file and writes aligned draws and summaries.
pub fn cmd_postprocess(config: &RunConfig) -> Result<PathBuf> {
    let out = ensure_out_dir(config)?;
    let draws = read_draws(config, &out)?;
    let aligned = postprocess::align_store(&draws);
    report::write_draws_csv(&aligned.store, &out.join("aligned_draws.csv"), true)?;
    let summary = postprocess::summarize(&aligned)?;
    report::write_summary(&summary, &draws, &provenance(config), &out)?;
    Ok(out)
}
