//! Post-processing of posterior draws: resolving the signed-permutation
//! invariance of the latent basis by aligning every draw to the highest
//! posterior draw, inclusion probabilities, the dimension posterior, point
//! estimates, and credible intervals.

use crate::assignment::solve_max;
use crate::error::Result;
use crate::linalg::Mat;
use crate::manifold;
use crate::sampler::DrawStore;

/// Result of aligning one draw to a reference basis.
#[derive(Debug, Clone)]
pub struct AlignedDraw {
    pub u: Mat,
    pub lambda: Vec<f64>,
    /// `perm[i]` is the source column placed at reference position `i`.
    pub perm: Vec<usize>,
    /// Sign applied to each aligned column of U (λ is sign-invariant).
    pub signs: Vec<f64>,
}

/// Aligns `(u_s, lambda_s)` to `u_ref` over signed column permutations,
/// maximizing Σ_i |u_ref_iᵀ u_assigned(i)| and then matching signs.
pub fn align_draw(u_s: &Mat, lambda_s: &[f64], u_ref: &Mat) -> AlignedDraw {
    let d = u_s.cols();
    assert_eq!(u_ref.cols(), d);
    assert_eq!(u_ref.rows(), u_s.rows());
    assert_eq!(lambda_s.len(), d);
    let n = u_s.rows();
    // Cost: absolute column inner products.
    let mut dots = Mat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for r in 0..n {
                acc += u_ref.at(r, i) * u_s.at(r, j);
            }
            *dots.at_mut(i, j) = acc;
        }
    }
    let score = Mat::from_fn(d, d, |i, j| dots.at(i, j).abs());
    let perm = solve_max(&score);
    let signs: Vec<f64> = (0..d)
        .map(|i| if dots.at(i, perm[i]) < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let u = Mat::from_fn(n, d, |r, i| signs[i] * u_s.at(r, perm[i]));
    let lambda: Vec<f64> = (0..d).map(|i| lambda_s[perm[i]]).collect();
    AlignedDraw { u, lambda, perm, signs }
}

/// The highest-log-posterior draw (lowest index on ties) and its basis.
pub fn map_reference(draws: &DrawStore) -> (Mat, usize) {
    assert!(!draws.is_empty(), "map_reference of an empty draw store");
    let mut best = 0usize;
    for s in 1..draws.len() {
        if draws.log_post[s] > draws.log_post[best] {
            best = s;
        }
    }
    (draws.u_mat(best), best)
}

/// Posterior inclusion probability of each dimension.
pub fn inclusion_probabilities(draws: &DrawStore) -> Vec<f64> {
    let s_total = draws.len();
    let mut probs = vec![0.0; draws.d];
    for s in 0..s_total {
        for (h, &z) in draws.z_row(s).iter().enumerate() {
            if z == 1 {
                probs[h] += 1.0;
            }
        }
    }
    probs.iter_mut().for_each(|p| *p /= s_total as f64);
    probs
}

/// Empirical pmf of the active dimension count over 0..=d and its mode
/// (smaller count on ties).
pub fn dimension_posterior(draws: &DrawStore) -> (Vec<f64>, usize) {
    let mut pmf = vec![0.0; draws.d + 1];
    for s in 0..draws.len() {
        pmf[draws.active_count(s)] += 1.0;
    }
    pmf.iter_mut().for_each(|p| *p /= draws.len() as f64);
    let mut mode = 0usize;
    for k in 1..pmf.len() {
        if pmf[k] > pmf[mode] {
            mode = k;
        }
    }
    (pmf, mode)
}

/// Draws with the signed-permutation invariance resolved.
#[derive(Debug, Clone)]
pub struct AlignedDraws {
    pub store: DrawStore,
    pub reference_index: usize,
    pub perms: Vec<Vec<usize>>,
    pub signs: Vec<Vec<f64>>,
}

/// Aligns every stored draw to the MAP reference.
pub fn align_store(draws: &DrawStore) -> AlignedDraws {
    let (u_ref, reference_index) = map_reference(draws);
    let mut store = draws.clone();
    let mut perms = Vec::with_capacity(draws.len());
    let mut signs = Vec::with_capacity(draws.len());
    let nd = draws.n * draws.d;
    for s in 0..draws.len() {
        let aligned = align_draw(&draws.u_mat(s), draws.lambda_row(s), &u_ref);
        store.u[s * nd..(s + 1) * nd].copy_from_slice(aligned.u.data());
        store.lambda[s * draws.d..(s + 1) * draws.d].copy_from_slice(&aligned.lambda);
        let z_src: Vec<u8> = aligned.perm.iter().map(|&j| draws.z_row(s)[j]).collect();
        store.z[s * draws.d..(s + 1) * draws.d].copy_from_slice(&z_src);
        perms.push(aligned.perm);
        signs.push(aligned.signs);
    }
    AlignedDraws { store, reference_index, perms, signs }
}

/// Posterior mean, and equal-tailed 95% interval of one scalar series.
#[derive(Debug, Clone, Copy)]
pub struct ScalarSummary {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Equal-tailed interval endpoints by linear interpolation of order
/// statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0);
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

fn summarize_series(values: impl Iterator<Item = f64> + Clone) -> ScalarSummary {
    let mut v: Vec<f64> = values.collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ScalarSummary { mean, lo: quantile(&v, 0.025), hi: quantile(&v, 0.975) }
}

/// Posterior summary: point estimates and 95% intervals for the scalar
/// parameters, the Fréchet-mean basis, the dimension pmf, and inclusion
/// probabilities.
#[derive(Debug, Clone)]
pub struct Summary {
    pub beta: Vec<ScalarSummary>,
    pub lambda: Vec<ScalarSummary>,
    pub phi: ScalarSummary,
    pub power: ScalarSummary,
    pub u_mean: Mat,
    pub inclusion: Vec<f64>,
    pub dim_pmf: Vec<f64>,
    pub dim_mode: usize,
}

/// Summarizes aligned draws.
pub fn summarize(aligned: &AlignedDraws) -> Result<Summary> {
    let store = &aligned.store;
    let s_total = store.len();
    let beta = (0..store.p)
        .map(|k| summarize_series((0..s_total).map(|s| store.beta_row(s)[k])))
        .collect();
    let lambda = (0..store.d)
        .map(|h| summarize_series((0..s_total).map(|s| store.lambda_row(s)[h])))
        .collect();
    let phi = summarize_series(store.phi.iter().copied());
    let power = summarize_series(store.power.iter().copied());
    let u_mean = if store.d > 0 {
        let mats: Vec<Mat> = (0..s_total).map(|s| store.u_mat(s)).collect();
        manifold::frechet_mean(&mats)?.into_matrix()
    } else {
        Mat::zeros(store.n, 0)
    };
    let inclusion = inclusion_probabilities(store);
    let (dim_pmf, dim_mode) = dimension_posterior(store);
    Ok(Summary { beta, lambda, phi, power, u_mean, inclusion, dim_pmf, dim_mode })
}
