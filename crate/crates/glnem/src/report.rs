//! CSV serialization of draws, summaries, selection tables, and
//! goodness-of-fit reports. Numeric formatting uses Rust's shortest
//! round-trip representation, so files reload exactly.

use crate::error::{GlnemError, Result};
use crate::families::{FamilyKind, Link};
use crate::gof::GofReport;
use crate::postprocess::Summary;
use crate::sampler::DrawStore;
use crate::selection::CriterionReport;
use std::fmt::Write as _;
use std::path::Path;

fn family_from_name(name: &str) -> Result<FamilyKind> {
    Ok(match name {
        "bernoulli" => FamilyKind::Bernoulli,
        "gaussian" => FamilyKind::Gaussian,
        "poisson" => FamilyKind::Poisson,
        "negative_binomial" => FamilyKind::NegativeBinomial,
        "tweedie" => FamilyKind::Tweedie,
        other => return Err(GlnemError::Data(format!("unknown family '{other}'"))),
    })
}

fn link_from_name(name: &str) -> Result<Link> {
    Ok(match name {
        "identity" => Link::Identity,
        "log" => Link::Log,
        "logit" => Link::Logit,
        "probit" => Link::Probit,
        "cloglog" => Link::CLogLog,
        other => return Err(GlnemError::Data(format!("unknown link '{other}'"))),
    })
}

/// Writes one row per draw with headered columns `beta.k`, `lambda.h`,
/// `Z.h`, `U.i.h`, `phi`, `power`, `loglik`, `logpost`.
pub fn write_draws_csv(store: &DrawStore, path: &Path, include_u: bool) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# glnem draws").ok();
    writeln!(out, "# family={}", store.family.name()).ok();
    writeln!(out, "# link={}", store.link.name()).ok();
    writeln!(out, "# n={} d={} p={}", store.n, store.d, store.p).ok();
    writeln!(out, "# seed={}", store.seed).ok();
    out.push_str("chain,draw");
    for k in 1..=store.p {
        write!(out, ",beta.{k}").ok();
    }
    for h in 1..=store.d {
        write!(out, ",lambda.{h}").ok();
    }
    for h in 1..=store.d {
        write!(out, ",Z.{h}").ok();
    }
    out.push_str(",phi,power,loglik,logpost");
    if include_u {
        for i in 1..=store.n {
            for h in 1..=store.d {
                write!(out, ",U.{i}.{h}").ok();
            }
        }
    }
    out.push('\n');
    let per_chain = store.len() / store.chains;
    for s in 0..store.len() {
        write!(out, "{},{}", s / per_chain, s % per_chain).ok();
        for v in store.beta_row(s) {
            write!(out, ",{v}").ok();
        }
        for v in store.lambda_row(s) {
            write!(out, ",{v}").ok();
        }
        for z in store.z_row(s) {
            write!(out, ",{z}").ok();
        }
        write!(
            out,
            ",{},{},{},{}",
            store.phi[s], store.power[s], store.loglik[s], store.log_post[s]
        )
        .ok();
        if include_u {
            let nd = store.n * store.d;
            for v in &store.u[s * nd..(s + 1) * nd] {
                write!(out, ",{v}").ok();
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a draws CSV produced by `write_draws_csv` with `include_u = true`.
pub fn read_draws_csv(path: &Path) -> Result<DrawStore> {
    let text = std::fs::read_to_string(path)?;
    let mut family = FamilyKind::Bernoulli;
    let mut link = Link::Logit;
    let mut seed = 0u64;
    let mut dims: Option<(usize, usize, usize)> = None;
    let mut rows: Vec<&str> = Vec::new();
    let mut header: Option<&str> = None;
    for line in text.lines() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("family=") {
                family = family_from_name(v)?;
            } else if let Some(v) = rest.strip_prefix("link=") {
                link = link_from_name(v)?;
            } else if let Some(v) = rest.strip_prefix("seed=") {
                seed = v.parse().unwrap_or(0);
            } else if rest.starts_with("n=") {
                let mut n = 0;
                let mut d = 0;
                let mut p = 0;
                for tok in rest.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("n=") {
                        n = v.parse().unwrap_or(0);
                    } else if let Some(v) = tok.strip_prefix("d=") {
                        d = v.parse().unwrap_or(0);
                    } else if let Some(v) = tok.strip_prefix("p=") {
                        p = v.parse().unwrap_or(0);
                    }
                }
                dims = Some((n, d, p));
            }
            continue;
        }
        if header.is_none() {
            header = Some(t);
        } else {
            rows.push(t);
        }
    }
    let (n, d, p) =
        dims.ok_or_else(|| GlnemError::Data("draws file is missing the dims header".into()))?;
    let header =
        header.ok_or_else(|| GlnemError::Data("draws file has no column header".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let expect_cols = 2 + p + d + d + 4 + n * d;
    if cols.len() != expect_cols {
        return Err(GlnemError::Data(format!(
            "draws file has {} columns, expected {expect_cols} (was U included?)",
            cols.len()
        )));
    }
    let s_total = rows.len();
    let mut store = DrawStore {
        n,
        d,
        p,
        chains: 1,
        draws_per_chain: s_total,
        beta: Vec::with_capacity(s_total * p),
        lambda: Vec::with_capacity(s_total * d),
        z: Vec::with_capacity(s_total * d),
        u: Vec::with_capacity(s_total * n * d),
        phi: Vec::with_capacity(s_total),
        power: Vec::with_capacity(s_total),
        loglik: Vec::with_capacity(s_total),
        log_post: Vec::with_capacity(s_total),
        dyad_loglik: None,
        dyads: Vec::new(),
        divergences: 0,
        family,
        link,
        seed,
    };
    let mut max_chain = 0usize;
    for (ridx, row) in rows.iter().enumerate() {
        let toks: Vec<&str> = row.split(',').collect();
        if toks.len() != expect_cols {
            return Err(GlnemError::Data(format!(
                "draws row {} has {} fields, expected {expect_cols}",
                ridx + 1,
                toks.len()
            )));
        }
        let parse = |t: &str| -> Result<f64> {
            t.parse::<f64>()
                .map_err(|_| GlnemError::Data(format!("row {}: bad number '{t}'", ridx + 1)))
        };
        max_chain = max_chain.max(toks[0].parse::<usize>().unwrap_or(0));
        let mut c = 2;
        for _ in 0..p {
            store.beta.push(parse(toks[c])?);
            c += 1;
        }
        for _ in 0..d {
            store.lambda.push(parse(toks[c])?);
            c += 1;
        }
        for _ in 0..d {
            store.z.push(if toks[c] == "1" { 1 } else { 0 });
            c += 1;
        }
        store.phi.push(parse(toks[c])?);
        store.power.push(parse(toks[c + 1])?);
        store.loglik.push(parse(toks[c + 2])?);
        store.log_post.push(parse(toks[c + 3])?);
        c += 4;
        for _ in 0..(n * d) {
            store.u.push(parse(toks[c])?);
            c += 1;
        }
    }
    store.chains = max_chain + 1;
    store.draws_per_chain = if store.chains > 0 { s_total / store.chains } else { 0 };
    Ok(store)
}

/// Scalar traces only (for plotting): chain, draw, loglik, logpost, the
/// active-dimension count, β, λ, φ, power.
pub fn write_trace_csv(store: &DrawStore, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("chain,draw,loglik,logpost,active_dims");
    for k in 1..=store.p {
        write!(out, ",beta.{k}").ok();
    }
    for h in 1..=store.d {
        write!(out, ",lambda.{h}").ok();
    }
    out.push_str(",phi,power\n");
    let per_chain = store.len() / store.chains;
    for s in 0..store.len() {
        write!(
            out,
            "{},{},{},{},{}",
            s / per_chain,
            s % per_chain,
            store.loglik[s],
            store.log_post[s],
            store.active_count(s)
        )
        .ok();
        for v in store.beta_row(s) {
            write!(out, ",{v}").ok();
        }
        for v in store.lambda_row(s) {
            write!(out, ",{v}").ok();
        }
        writeln!(out, ",{},{}", store.phi[s], store.power[s]).ok();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Posterior summary files: parameter table, dimension posterior, and
/// inclusion probabilities, each with full provenance headers.
pub fn write_summary(
    summary: &Summary,
    store: &DrawStore,
    provenance: &[(String, String)],
    dir: &Path,
) -> Result<()> {
    let mut head = String::new();
    writeln!(head, "# glnem version={}", env!("CARGO_PKG_VERSION")).ok();
    writeln!(head, "# family={}", store.family.name()).ok();
    writeln!(head, "# link={}", store.link.name()).ok();
    writeln!(head, "# n={} d={} p={}", store.n, store.d, store.p).ok();
    writeln!(head, "# seed={}", store.seed).ok();
    writeln!(head, "# chains={} draws={}", store.chains, store.draws_per_chain).ok();
    writeln!(head, "# divergences={}", store.divergences).ok();
    for (k, v) in provenance {
        writeln!(head, "# config.{k}={v}").ok();
    }

    let mut out = head.clone();
    out.push_str("parameter,mean,q2.5,q97.5\n");
    for (k, s) in summary.beta.iter().enumerate() {
        writeln!(out, "beta.{},{},{},{}", k + 1, s.mean, s.lo, s.hi).ok();
    }
    for (h, s) in summary.lambda.iter().enumerate() {
        writeln!(out, "lambda.{},{},{},{}", h + 1, s.mean, s.lo, s.hi).ok();
    }
    writeln!(out, "phi,{},{},{}", summary.phi.mean, summary.phi.lo, summary.phi.hi).ok();
    writeln!(
        out,
        "power,{},{},{}",
        summary.power.mean, summary.power.lo, summary.power.hi
    )
    .ok();
    std::fs::write(dir.join("summary_params.csv"), out)?;

    let mut out = head.clone();
    out.push_str("dimension,probability,is_mode\n");
    for (k, pr) in summary.dim_pmf.iter().enumerate() {
        writeln!(out, "{k},{pr},{}", usize::from(k == summary.dim_mode)).ok();
    }
    std::fs::write(dir.join("summary_dimension.csv"), out)?;

    let mut out = head.clone();
    out.push_str("dimension,inclusion_probability\n");
    for (h, pr) in summary.inclusion.iter().enumerate() {
        writeln!(out, "{},{pr}", h + 1).ok();
    }
    std::fs::write(dir.join("summary_inclusion.csv"), out)?;

    let mut out = head;
    out.push_str("node");
    for h in 1..=summary.u_mean.cols() {
        write!(out, ",U.{h}").ok();
    }
    out.push('\n');
    for i in 0..summary.u_mean.rows() {
        write!(out, "{i}").ok();
        for h in 0..summary.u_mean.cols() {
            write!(out, ",{}", summary.u_mean.at(i, h)).ok();
        }
        out.push('\n');
    }
    std::fs::write(dir.join("summary_latent_positions.csv"), out)?;
    Ok(())
}

/// One row per candidate dimension with every criterion.
pub fn write_selection_csv(report: &CriterionReport, path: &Path) -> Result<()> {
    let mut out = String::new();
    writeln!(
        out,
        "# selected: aic={} bic={} dic={} waic={}{}{}",
        report.aic_choice,
        report.bic_choice,
        report.dic_choice,
        report.waic_choice,
        report
            .cv_choice
            .map(|d| format!(" cv={d}"))
            .unwrap_or_default(),
        report
            .cv_1se_choice
            .map(|d| format!(" cv_1se={d}"))
            .unwrap_or_default(),
    )
    .ok();
    out.push_str("d,aic,bic,dic,waic,cv_mean,cv_se\n");
    for row in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.d,
            row.aic,
            row.bic,
            row.dic,
            row.waic,
            row.cv_mean.map(|v| v.to_string()).unwrap_or_default(),
            row.cv_se.map(|v| v.to_string()).unwrap_or_default(),
        )
        .ok();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Observed value and per-draw predictive rows for one statistic.
pub fn write_gof_csv(report: &GofReport, path: &Path) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# statistic={}", report.statistic.name()).ok();
    writeln!(
        out,
        "# observed={} q2.5={} median={} q97.5={}",
        report.observed, report.q025, report.q500, report.q975
    )
    .ok();
    out.push_str("replicate,value\n");
    writeln!(out, "observed,{}", report.observed).ok();
    for (i, v) in report.predictive.iter().enumerate() {
        writeln!(out, "{i},{v}").ok();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Observed and predictive per-node degree rows.
pub fn write_degrees_csv(
    observed: &[f64],
    predictive: &[Vec<f64>],
    path: &Path,
) -> Result<()> {
    let mut out = String::new();
    out.push_str("replicate");
    for i in 0..observed.len() {
        write!(out, ",node{i}").ok();
    }
    out.push('\n');
    out.push_str("observed");
    for v in observed {
        write!(out, ",{v}").ok();
    }
    out.push('\n');
    for (r, degs) in predictive.iter().enumerate() {
        write!(out, "{r}").ok();
        for v in degs {
            write!(out, ",{v}").ok();
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
