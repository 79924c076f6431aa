//! Competing dimension-selection criteria for fixed-dimension fits with
//! Gaussian latent-scale priors: AIC, BIC, DIC, WAIC, and K-fold
//! cross-validation over dyads with the one-standard-error rule.

use crate::data::NetworkData;
use crate::error::{GlnemError, Result};
use crate::families::{self, AuxParams, Family, Link};
#[cfg(test)]
use crate::linalg::Mat;
use crate::postprocess;
use crate::sampler::{run_chain, DrawStore, ModelKind, SamplerConfig};
use crate::ssibp::HyperParams;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Per-candidate-dimension criteria values.
#[derive(Debug, Clone)]
pub struct CriterionRow {
    pub d: usize,
    pub aic: f64,
    pub bic: f64,
    pub dic: f64,
    pub waic: f64,
    pub cv_mean: Option<f64>,
    pub cv_se: Option<f64>,
}

/// Full report over the candidate grid with the selected dimension per rule.
#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub rows: Vec<CriterionRow>,
    pub aic_choice: usize,
    pub bic_choice: usize,
    pub dic_choice: usize,
    pub waic_choice: usize,
    pub cv_choice: Option<usize>,
    pub cv_1se_choice: Option<usize>,
}

/// Number of model parameters of a d-dimensional fit: nd + d + p.
pub fn param_count(n: usize, d: usize, p: usize) -> usize {
    n * d + d + p
}

/// AIC on the deviance scale.
pub fn aic(loglik_at_estimate: f64, n: usize, d: usize, p: usize) -> f64 {
    -2.0 * loglik_at_estimate + 2.0 * param_count(n, d, p) as f64
}

/// BIC with the dyad count n(n−1)/2 as the sample size.
pub fn bic(loglik_at_estimate: f64, n: usize, d: usize, p: usize) -> f64 {
    let dyads = n as f64 * (n as f64 - 1.0) / 2.0;
    -2.0 * loglik_at_estimate + param_count(n, d, p) as f64 * dyads.ln()
}

/// DIC with the effective parameter count
/// p_DIC = 2 (log p(Y|ξ̂) − mean_s log p(Y|ξ^{(s)})).
pub fn dic(draws: &DrawStore, loglik_at_estimate: f64) -> f64 {
    let mean_ll: f64 = draws.loglik.iter().sum::<f64>() / draws.len() as f64;
    let p_dic = 2.0 * (loglik_at_estimate - mean_ll);
    -2.0 * loglik_at_estimate + 2.0 * p_dic
}

/// WAIC from the S×D matrix of per-draw, per-dyad log densities:
/// −2 Σ_dyads [log mean_s exp(ℓ_sd)] + 2 Σ_dyads Var_s(ℓ_sd).
///
/// The log-mean-exp is computed in one streaming pass per dyad with running
/// rescaling; the variance uses the S−1 denominator.
pub fn waic(per_dyad_loglik: &[f64], s_draws: usize, n_dyads: usize) -> f64 {
    assert!(s_draws >= 2, "WAIC needs at least two draws");
    assert_eq!(per_dyad_loglik.len(), s_draws * n_dyads);
    let mut lppd = 0.0;
    let mut penalty = 0.0;
    for dy in 0..n_dyads {
        // Streaming log-sum-exp with a running maximum.
        let mut max = f64::NEG_INFINITY;
        let mut acc = 0.0;
        // Welford for the variance.
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for s in 0..s_draws {
            let v = per_dyad_loglik[s * n_dyads + dy];
            if v > max {
                if max.is_finite() {
                    acc *= (max - v).exp();
                }
                max = v;
                acc += 1.0;
            } else {
                acc += (v - max).exp();
            }
            let count = (s + 1) as f64;
            let delta = v - mean;
            mean += delta / count;
            m2 += delta * (v - mean);
        }
        lppd += max + (acc / s_draws as f64).ln();
        penalty += m2 / (s_draws as f64 - 1.0);
    }
    -2.0 * lppd + 2.0 * penalty
}

/// Point-estimate log likelihood for the information criteria: posterior
/// means of all parameters with the basis replaced by its Fréchet mean,
/// evaluated after aligning draws.
pub fn loglik_at_posterior_means(
    data: &NetworkData,
    family: Family,
    link: Link,
    hyper: &HyperParams,
    kind: ModelKind,
    fixed_phi: f64,
    fixed_power: f64,
    draws: &DrawStore,
) -> Result<f64> {
    let aligned = postprocess::align_store(draws);
    let summary = postprocess::summarize(&aligned)?;
    let mut model = crate::sampler::GlnemModel::new(
        data,
        family,
        link,
        hyper.clone(),
        kind,
        fixed_phi,
        fixed_power,
    )?;
    let beta: Vec<f64> = summary.beta.iter().map(|s| s.mean).collect();
    let lambda: Vec<f64> = summary.lambda.iter().map(|s| s.mean).collect();
    let mut eta = Vec::new();
    model.compute_eta(&summary.u_mean, &lambda, &beta, &mut eta);
    model.loglik_from_eta(&eta, summary.phi.mean, summary.power.mean, None)
}

/// Fits the fixed-dimension baseline (λ_h ~ N(0, n), no indicator step).
pub fn fit_fixed_dimension(
    data: &NetworkData,
    family: Family,
    link: Link,
    d: usize,
    sigma_beta: f64,
    config: &SamplerConfig,
) -> Result<DrawStore> {
    let hyper = HyperParams {
        d,
        a: 1.0,
        kappa: 0.0,
        b_slab: 1.0,
        v0: 0.0,
        sigma_beta,
    };
    let kind = ModelKind::FixedGauss { lambda_var: data.n as f64 };
    run_chain(data, &hyper, family, link, kind, 1.0, 1.5, config)
}

/// Information criteria over a dimension grid, one fixed-dimension fit each.
pub fn information_criteria_grid(
    data: &NetworkData,
    family: Family,
    link: Link,
    d_grid: &[usize],
    sigma_beta: f64,
    config: &SamplerConfig,
) -> Result<Vec<CriterionRow>> {
    let jobs: Vec<usize> = d_grid.to_vec();
    let results = crate::parallel::parallel_map(jobs, |d| -> Result<CriterionRow> {
        let mut cfg = config.clone();
        cfg.seed = config.seed.wrapping_add(1000 * d as u64);
        let draws = fit_fixed_dimension(data, family, link, d, sigma_beta, &cfg)?;
        let hyper = HyperParams { d, a: 1.0, kappa: 0.0, b_slab: 1.0, v0: 0.0, sigma_beta };
        let kind = ModelKind::FixedGauss { lambda_var: data.n as f64 };
        let ll_hat =
            loglik_at_posterior_means(data, family, link, &hyper, kind, 1.0, 1.5, &draws)?;
        let per = draws.dyad_loglik.as_ref().ok_or_else(|| {
            GlnemError::Config("per-dyad log likelihood storage is required".into())
        })?;
        Ok(CriterionRow {
            d,
            aic: aic(ll_hat, data.n, d, data.p()),
            bic: bic(ll_hat, data.n, d, data.p()),
            dic: dic(&draws, ll_hat),
            waic: waic(per, draws.len(), draws.dyads.len()),
            cv_mean: None,
            cv_se: None,
        })
    });
    results.into_iter().collect()
}

/// Random non-overlapping partition of the observed off-diagonal dyads.
pub fn partition_dyads(
    data: &NetworkData,
    k_folds: usize,
    seed: u64,
) -> Result<Vec<Vec<(usize, usize)>>> {
    if k_folds < 2 {
        return Err(GlnemError::Config("K-fold CV needs K >= 2".into()));
    }
    let mut dyads: Vec<(usize, usize)> =
        data.dyads().into_iter().filter(|&(i, j)| i != j).collect();
    if dyads.len() < k_folds {
        return Err(GlnemError::Config(format!(
            "cannot split {} dyads into {k_folds} folds",
            dyads.len()
        )));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    for i in (1..dyads.len()).rev() {
        let j = rng.random_range(0..=i);
        dyads.swap(i, j);
    }
    let mut folds: Vec<Vec<(usize, usize)>> = vec![Vec::new(); k_folds];
    for (idx, dy) in dyads.into_iter().enumerate() {
        folds[idx % k_folds].push(dy);
    }
    if folds.iter().any(|f| f.is_empty()) {
        return Err(GlnemError::Config("a CV fold has no held-out dyads".into()));
    }
    Ok(folds)
}

/// Held-out log predictive score of one fitted fold: natural parameters are
/// averaged over draws, and the held-out dyads are scored at those means.
fn score_fold(
    data: &NetworkData,
    family: Family,
    link: Link,
    draws: &DrawStore,
    held_out: &[(usize, usize)],
) -> Result<f64> {
    let s_total = draws.len();
    let phi_hat: f64 = draws.phi.iter().sum::<f64>() / s_total as f64;
    let power_hat: f64 = draws.power.iter().sum::<f64>() / s_total as f64;
    let mut score = 0.0;
    for &(i, j) in held_out {
        let mut theta_sum = 0.0;
        for s in 0..s_total {
            let u = draws.u_mat(s);
            let lambda = draws.lambda_row(s);
            let beta = draws.beta_row(s);
            let mut eta = 0.0;
            for (k, xk) in data.x.iter().enumerate() {
                eta += beta[k] * xk.at(i, j);
            }
            for h in 0..draws.d {
                eta += lambda[h] * u.at(i, h) * u.at(j, h);
            }
            let mu = families::inverse_link(link, eta);
            let aux = AuxParams { phi: draws.phi[s], power: draws.power[s] };
            theta_sum += families::natural_param(family.kind, mu, &aux);
        }
        let theta_hat = theta_sum / s_total as f64;
        let aux = AuxParams { phi: phi_hat, power: power_hat };
        let mu_hat = families::mean_from_natural(family.kind, theta_hat, &aux);
        score += families::log_density(family, data.y.at(i, j), mu_hat, &aux)?;
    }
    Ok(score)
}

/// K-fold cross-validation over the dimension grid. Held-out dyads are
/// excluded from the training likelihood via the observation mask.
pub fn kfold_cv(
    data: &NetworkData,
    family: Family,
    link: Link,
    d_grid: &[usize],
    k_folds: usize,
    sigma_beta: f64,
    config: &SamplerConfig,
) -> Result<Vec<(usize, f64, f64)>> {
    let folds = partition_dyads(data, k_folds, config.seed.wrapping_add(555))?;
    let mut jobs = Vec::new();
    for &d in d_grid {
        for (k, fold) in folds.iter().enumerate() {
            jobs.push((d, k, fold.clone()));
        }
    }
    let scores = crate::parallel::parallel_map(jobs, |(d, k, fold)| -> Result<(usize, f64)> {
        let train = data.mask_out(&fold);
        let mut cfg = config.clone();
        cfg.seed = config.seed.wrapping_add((d * 100 + k) as u64);
        cfg.store_dyad_loglik = false;
        let draws = fit_fixed_dimension(&train, family, link, d, sigma_beta, &cfg)?;
        Ok((d, score_fold(data, family, link, &draws, &fold)?))
    });
    let scores = scores.into_iter().collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for &d in d_grid {
        let per_fold: Vec<f64> =
            scores.iter().filter(|(dd, _)| *dd == d).map(|(_, s)| *s).collect();
        let mean = per_fold.iter().sum::<f64>() / per_fold.len() as f64;
        let var = per_fold.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>()
            / (per_fold.len() as f64 - 1.0);
        let se = (var / per_fold.len() as f64).sqrt();
        out.push((d, mean, se));
    }
    Ok(out)
}

/// Index of the minimum (ties to the earlier entry).
fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for (i, v) in values.enumerate() {
        if v < best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

/// Applies the one-standard-error rule: the smallest dimension whose CV
/// score is within one SE (of the best dimension) of the best score.
pub fn one_se_choice(rows: &[(usize, f64, f64)]) -> usize {
    let mut best = 0usize;
    for i in 1..rows.len() {
        if rows[i].1 > rows[best].1 {
            best = i;
        }
    }
    let threshold = rows[best].1 - rows[best].2;
    for row in rows {
        if row.1 >= threshold {
            return row.0;
        }
    }
    rows[best].0
}

/// Runs the full selection battery over a dimension grid.
pub fn selection_report(
    data: &NetworkData,
    family: Family,
    link: Link,
    d_grid: &[usize],
    k_folds: Option<usize>,
    sigma_beta: f64,
    config: &SamplerConfig,
) -> Result<CriterionReport> {
    let mut rows = information_criteria_grid(data, family, link, d_grid, sigma_beta, config)?;
    let mut cv_choice = None;
    let mut cv_1se_choice = None;
    if let Some(k) = k_folds {
        let cv = kfold_cv(data, family, link, d_grid, k, sigma_beta, config)?;
        for (row, (_, mean, se)) in rows.iter_mut().zip(&cv) {
            row.cv_mean = Some(*mean);
            row.cv_se = Some(*se);
        }
        let best = cv
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
            .map(|(i, _)| cv[i].0);
        cv_choice = best;
        cv_1se_choice = Some(one_se_choice(&cv));
    }
    Ok(CriterionReport {
        aic_choice: d_grid[argmin(rows.iter().map(|r| r.aic))],
        bic_choice: d_grid[argmin(rows.iter().map(|r| r.bic))],
        dic_choice: d_grid[argmin(rows.iter().map(|r| r.dic))],
        waic_choice: d_grid[argmin(rows.iter().map(|r| r.waic))],
        cv_choice,
        cv_1se_choice,
        rows,
    })
}
