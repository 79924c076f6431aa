//! Posterior-predictive goodness-of-fit checks: the transitivity coefficient
//! and the degree distribution, with predictive replication from stored
//! posterior draws.

use crate::data::NetworkData;
use crate::error::Result;
use crate::families::{self, AuxParams, Family};
use crate::linalg::Mat;
use crate::sampler::DrawStore;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Transitivity coefficient of a binary adjacency matrix: three times the
/// triangle count over the connected-triple count (zero when no triples).
/// Weighted input is thresholded at zero; the diagonal is ignored.
pub fn transitivity(y: &Mat) -> f64 {
    let n = y.rows();
    let edge = |i: usize, j: usize| i != j && y.at(i, j) != 0.0;
    let mut triangles = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            if !edge(i, j) {
                continue;
            }
            for k in (j + 1)..n {
                if edge(i, k) && edge(j, k) {
                    triangles += 1;
                }
            }
        }
    }
    let mut triples = 0usize;
    for i in 0..n {
        let deg = (0..n).filter(|&j| edge(i, j)).count();
        triples += deg * deg.saturating_sub(1) / 2;
    }
    if triples == 0 {
        0.0
    } else {
        3.0 * triangles as f64 / triples as f64
    }
}

/// Per-node degrees: weighted sums by default, or edge counts after
/// thresholding at zero when `binary` is set. The diagonal is excluded.
pub fn degree_distribution(y: &Mat, binary: bool) -> Vec<f64> {
    let n = y.rows();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    if binary {
                        f64::from(y.at(i, j) != 0.0)
                    } else {
                        y.at(i, j)
                    }
                })
                .sum()
        })
        .collect()
}

/// Histogram of integer degrees (binary graphs).
pub fn degree_histogram(y: &Mat) -> std::collections::BTreeMap<u64, usize> {
    let mut hist = std::collections::BTreeMap::new();
    for deg in degree_distribution(y, true) {
        *hist.entry(deg as u64).or_insert(0) += 1;
    }
    hist
}

/// Scalar network statistic computed on predictive replicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GofStatistic {
    Transitivity,
    /// Mean edge value over observed dyads.
    MeanEdge,
}

impl GofStatistic {
    pub fn name(&self) -> &'static str {
        match self {
            GofStatistic::Transitivity => "transitivity",
            GofStatistic::MeanEdge => "mean_edge",
        }
    }

    pub fn compute(&self, data: &NetworkData) -> f64 {
        match self {
            GofStatistic::Transitivity => transitivity(&data.y),
            GofStatistic::MeanEdge => {
                let dyads = data.dyads();
                let s: f64 = dyads.iter().map(|&(i, j)| data.y.at(i, j)).sum();
                s / dyads.len() as f64
            }
        }
    }
}

/// Observed statistic, per-draw predictive replicates, and quantiles.
#[derive(Debug, Clone)]
pub struct GofReport {
    pub statistic: GofStatistic,
    pub observed: f64,
    pub predictive: Vec<f64>,
    pub q025: f64,
    pub q500: f64,
    pub q975: f64,
}

/// Simulates one network from the parameters of draw `s`, respecting the
/// observed-diagonal flag and the observation mask.
pub fn simulate_replicate<R: Rng + ?Sized>(
    draws: &DrawStore,
    data: &NetworkData,
    s: usize,
    rng: &mut R,
) -> NetworkData {
    let n = data.n;
    let family = Family::new(draws.family);
    let aux = AuxParams { phi: draws.phi[s], power: draws.power[s] };
    let u = draws.u_mat(s);
    let lambda = draws.lambda_row(s);
    let beta = draws.beta_row(s);
    let mut y = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            if !data.is_observed(i, j) {
                continue;
            }
            let mut eta = 0.0;
            for (k, xk) in data.x.iter().enumerate() {
                eta += beta[k] * xk.at(i, j);
            }
            for h in 0..draws.d {
                eta += lambda[h] * u.at(i, h) * u.at(j, h);
            }
            let mu = families::inverse_link(draws.link, eta);
            let v = families::sample(family, mu, &aux, rng);
            *y.at_mut(i, j) = v;
            *y.at_mut(j, i) = v;
        }
    }
    let mut rep = data.clone();
    rep.y = y;
    rep
}

/// Posterior-predictive check: subsample draws without replacement, simulate
/// a full network per draw, and compare the statistic with its observed
/// value.
pub fn posterior_predictive(
    draws: &DrawStore,
    data: &NetworkData,
    statistic: GofStatistic,
    subsample: usize,
    seed: u64,
) -> Result<GofReport> {
    assert!(!draws.is_empty(), "posterior_predictive needs draws");
    let mut rng = StdRng::seed_from_u64(seed);
    let take = subsample.min(draws.len()).max(1);
    let mut indices: Vec<usize> = (0..draws.len()).collect();
    for i in (1..indices.len()).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
    indices.truncate(take);
    indices.sort_unstable();

    let observed = statistic.compute(data);
    let mut predictive = Vec::with_capacity(take);
    for &s in &indices {
        let rep = simulate_replicate(draws, data, s, &mut rng);
        predictive.push(statistic.compute(&rep));
    }
    let mut sorted = predictive.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(GofReport {
        statistic,
        observed,
        q025: crate::postprocess::quantile(&sorted, 0.025),
        q500: crate::postprocess::quantile(&sorted, 0.5),
        q975: crate::postprocess::quantile(&sorted, 0.975),
        predictive,
    })
}

/// Per-draw predictive degree vectors (for degree-distribution overlays).
pub fn predictive_degrees(
    draws: &DrawStore,
    data: &NetworkData,
    subsample: usize,
    binary: bool,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = StdRng::seed_from_u64(seed);
    let take = subsample.min(draws.len()).max(1);
    let stride = (draws.len() / take).max(1);
    (0..take)
        .map(|t| {
            let rep = simulate_replicate(draws, data, t * stride, &mut rng);
            degree_distribution(&rep.y, binary)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{FamilyKind, Link};

    fn complete_graph(n: usize) -> Mat {
        Mat::from_fn(n, n, |i, j| f64::from(i != j))
    }

    #[test]
    fn transitivity_examples() {
        assert!((transitivity(&complete_graph(3)) - 1.0).abs() < 1e-15);
        // Path on three nodes: no triangles.
        let mut p3 = Mat::zeros(3, 3);
        *p3.at_mut(0, 1) = 1.0;
        *p3.at_mut(1, 0) = 1.0;
        *p3.at_mut(1, 2) = 1.0;
        *p3.at_mut(2, 1) = 1.0;
        assert_eq!(transitivity(&p3), 0.0);
        // K4 minus one edge: 2 triangles, 8 triples → 0.75.
        let mut k4 = complete_graph(4);
        *k4.at_mut(0, 1) = 0.0;
        *k4.at_mut(1, 0) = 0.0;
        assert!((transitivity(&k4) - 0.75).abs() < 1e-15);
        // Empty graph.
        assert_eq!(transitivity(&Mat::zeros(5, 5)), 0.0);
    }

    #[test]
    fn degree_examples() {
        let empty = Mat::zeros(4, 4);
        assert!(degree_distribution(&empty, true).iter().all(|&d| d == 0.0));
        let k3 = complete_graph(3);
        assert_eq!(degree_distribution(&k3, true), vec![2.0, 2.0, 2.0]);
        // Star on four nodes: hub degree 3, leaves degree 1.
        let mut star = Mat::zeros(4, 4);
        for leaf in 1..4 {
            *star.at_mut(0, leaf) = 1.0;
            *star.at_mut(leaf, 0) = 1.0;
        }
        let hist = degree_histogram(&star);
        assert_eq!(hist.get(&3), Some(&1));
        assert_eq!(hist.get(&1), Some(&3));
        // Histogram mass equals n.
        assert_eq!(hist.values().sum::<usize>(), 4);
        // Weighted degrees sum the edge values.
        let mut w = Mat::zeros(3, 3);
        *w.at_mut(0, 1) = 2.5;
        *w.at_mut(1, 0) = 2.5;
        assert_eq!(degree_distribution(&w, false), vec![2.5, 2.5, 0.0]);
    }

    fn degenerate_store(n: usize, beta: f64, draws: usize) -> (DrawStore, NetworkData) {
        let y = complete_graph(n);
        let x = vec![Mat::from_fn(n, n, |_, _| 1.0)];
        let data = NetworkData::new(y, x, false).unwrap();
        let store = DrawStore {
            n,
            d: 0,
            p: 1,
            chains: 1,
            draws_per_chain: draws,
            beta: vec![beta; draws],
            lambda: vec![],
            z: vec![],
            u: vec![],
            phi: vec![1.0; draws],
            power: vec![1.5; draws],
            loglik: vec![0.0; draws],
            log_post: vec![0.0; draws],
            dyad_loglik: None,
            dyads: data.dyads(),
            divergences: 0,
            family: FamilyKind::Bernoulli,
            link: Link::Logit,
            seed: 0,
        };
        (store, data)
    }

    #[test]
    fn degenerate_bernoulli_predictive_transitivity_is_one() {
        // Mean forced to ~1 everywhere: every replicate is complete.
        let (store, data) = degenerate_store(6, 40.0, 10);
        let report =
            posterior_predictive(&store, &data, GofStatistic::Transitivity, 10, 3).unwrap();
        assert!(report.predictive.iter().all(|&t| (t - 1.0).abs() < 1e-12));
        assert!((report.observed - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_subsample_single_replicate() {
        let (store, data) = degenerate_store(5, 0.0, 8);
        let report =
            posterior_predictive(&store, &data, GofStatistic::MeanEdge, 1, 11).unwrap();
        assert_eq!(report.predictive.len(), 1);
    }

    #[test]
    fn gaussian_mean_edge_predictive_tracks_posterior_mean() {
        // Gaussian model with identity link: predictive mean-edge values
        // concentrate near the posterior mean of the means (here β).
        let n = 12;
        let y = Mat::zeros(n, n);
        let x = vec![Mat::from_fn(n, n, |_, _| 1.0)];
        let data = NetworkData::new(y, x, false).unwrap();
        let draws = 200;
        let store = DrawStore {
            n,
            d: 0,
            p: 1,
            chains: 1,
            draws_per_chain: draws,
            beta: (0..draws).map(|s| 2.0 + 0.01 * (s % 5) as f64).collect(),
            lambda: vec![],
            z: vec![],
            u: vec![],
            phi: vec![0.5; draws],
            power: vec![1.5; draws],
            loglik: vec![0.0; draws],
            log_post: vec![0.0; draws],
            dyad_loglik: None,
            dyads: data.dyads(),
            divergences: 0,
            family: FamilyKind::Gaussian,
            link: Link::Identity,
            seed: 0,
        };
        let report =
            posterior_predictive(&store, &data, GofStatistic::MeanEdge, 200, 4).unwrap();
        let mean_pred: f64 =
            report.predictive.iter().sum::<f64>() / report.predictive.len() as f64;
        let beta_mean: f64 = store.beta.iter().sum::<f64>() / draws as f64;
        // Monte Carlo error of a mean of D-dyad averages.
        let d_count = data.dyads().len() as f64;
        let se = (0.5 / (d_count * draws as f64)).sqrt() * 4.0;
        assert!(
            (mean_pred - beta_mean).abs() < se + 0.01,
            "{mean_pred} vs {beta_mean}"
        );
    }

    #[test]
    fn predictive_respects_diagonal_flag() {
        let (store, mut data) = degenerate_store(5, 40.0, 4);
        data.diagonal_observed = false;
        let mut rng = StdRng::seed_from_u64(1);
        let rep = simulate_replicate(&store, &data, 0, &mut rng);
        for i in 0..5 {
            assert_eq!(rep.y.at(i, i), 0.0);
        }
    }
}
