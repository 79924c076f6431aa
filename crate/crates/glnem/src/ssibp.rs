//! The truncated non-homogeneous spike-and-slab Indian buffet process prior
//! on the latent-space scale parameters.
//!
//! Stick-breaking slab probabilities θ_h = ∏_{ℓ≤h} ν_ℓ shrink with the
//! dimension index; conditional on an active indicator Z_h, the scale λ_h is
//! a Laplace draw represented hierarchically as λ_h = Z_h σ_h λ̃_h with
//! σ²_h exponential and λ̃_h standard normal.

use crate::error::{GlnemError, Result};
use crate::special::{log1p_exp, log_sigmoid, sigmoid};
use rand::Rng;
use rand_distr::{Beta, Distribution, Exp, StandardNormal};

/// Prior hyperparameters.
#[derive(Debug, Clone)]
pub struct HyperParams {
    /// Truncation level. Zero disables the latent space entirely.
    pub d: usize,
    /// IBP concentration (> 0).
    pub a: f64,
    /// First-stick penalty (>= 0).
    pub kappa: f64,
    /// Laplace slab scale (> 0).
    pub b_slab: f64,
    /// Spike-to-slab scale ratio in [0, 1). Only the discrete spike (0) is
    /// supported by the sampler.
    pub v0: f64,
    /// Scale of the Gaussian prior on the regression coefficients.
    pub sigma_beta: f64,
}

impl HyperParams {
    /// Defaults: a = 1/d, κ = d^{1.1}, b = sqrt(n/2), σ_β = 10.
    pub fn defaults(d: usize, n: usize) -> Self {
        let df = (d.max(1)) as f64;
        HyperParams {
            d,
            a: 1.0 / df,
            kappa: df.powf(1.1),
            b_slab: (n as f64 / 2.0).sqrt(),
            v0: 0.0,
            sigma_beta: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) {
            return Err(GlnemError::Config(format!("ibp concentration a must be > 0, got {}", self.a)));
        }
        if !(self.kappa >= 0.0) {
            return Err(GlnemError::Config(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        if !(self.b_slab > 0.0) {
            return Err(GlnemError::Config(format!("slab scale must be > 0, got {}", self.b_slab)));
        }
        if self.v0 != 0.0 {
            return Err(GlnemError::Config(
                "only the discrete spike (v0 = 0) is supported".into(),
            ));
        }
        if !(self.sigma_beta > 0.0) {
            return Err(GlnemError::Config(format!(
                "sigma_beta must be > 0, got {}",
                self.sigma_beta
            )));
        }
        Ok(())
    }

    /// Shrinkage exponent implied by (a, κ, d): δ = log κ / log d − 1.
    pub fn delta(&self) -> f64 {
        let d = self.d as f64;
        self.kappa.ln() / d.ln() - 1.0
    }
}

/// A full draw of the latent-scale block.
#[derive(Debug, Clone)]
pub struct LambdaState {
    pub nu: Vec<f64>,
    pub theta: Vec<f64>,
    pub z: Vec<u8>,
    pub sigma2: Vec<f64>,
    pub lambda_tilde: Vec<f64>,
}

impl LambdaState {
    /// λ_h = Z_h σ_h λ̃_h; exactly zero whenever Z_h = 0.
    pub fn lambda(&self) -> Vec<f64> {
        (0..self.z.len())
            .map(|h| {
                if self.z[h] == 0 {
                    0.0
                } else {
                    self.sigma2[h].sqrt() * self.lambda_tilde[h]
                }
            })
            .collect()
    }
}

/// Cumulative products of the sticks: θ_h = ∏_{ℓ ≤ h} ν_ℓ.
pub fn slab_probabilities(nu: &[f64]) -> Vec<f64> {
    let mut theta = Vec::with_capacity(nu.len());
    let mut acc = 1.0;
    for &v in nu {
        acc *= v;
        theta.push(acc);
    }
    theta
}

/// Draws the latent-scale block from the prior.
pub fn sample_prior<R: Rng + ?Sized>(hyper: &HyperParams, rng: &mut R) -> LambdaState {
    let d = hyper.d;
    let mut nu = Vec::with_capacity(d);
    for h in 0..d {
        let beta = if h == 0 {
            Beta::new(hyper.a, hyper.kappa + 1.0).unwrap()
        } else {
            Beta::new(hyper.a, 1.0).unwrap()
        };
        nu.push(beta.sample(rng).clamp(1e-300, 1.0 - 1e-16));
    }
    let theta = slab_probabilities(&nu);
    let z: Vec<u8> = theta
        .iter()
        .map(|&t| if rng.random::<f64>() < t { 1 } else { 0 })
        .collect();
    let exp = Exp::new(1.0 / (2.0 * hyper.b_slab * hyper.b_slab)).unwrap();
    let sigma2: Vec<f64> = (0..d).map(|_| exp.sample(rng)).collect();
    let lambda_tilde: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    LambdaState { nu, theta, z, sigma2, lambda_tilde }
}

/// Additive components of the unconstrained-scale log prior.
///
/// `stick` holds the Beta stick terms together with the logit Jacobian (the
/// quantity pinned by the all-zero-state example); `indicator` holds the
/// Bernoulli terms for Z given θ.
#[derive(Debug, Clone, Copy, Default)]
pub struct PriorTerms {
    pub gauss_b: f64,
    pub gauss_beta: f64,
    pub gauss_lambda_tilde: f64,
    pub sigma_mixture: f64,
    pub stick: f64,
    pub indicator: f64,
    pub dispersion: f64,
    pub power: f64,
}

impl PriorTerms {
    pub fn total(&self) -> f64 {
        self.gauss_b
            + self.gauss_beta
            + self.gauss_lambda_tilde
            + self.sigma_mixture
            + self.stick
            + self.indicator
            + self.dispersion
            + self.power
    }
}

/// Borrowed view of the unconstrained parameter block.
pub struct PsiView<'a> {
    pub b: &'a [f64],
    pub beta: &'a [f64],
    pub lambda_tilde: &'a [f64],
    pub eta_sigma: &'a [f64],
    pub eta_nu: &'a [f64],
    pub eta_phi: Option<f64>,
    pub eta_power: Option<f64>,
}

const LN_2PI: f64 = 1.8378770664093454835606594;

/// Log prior of the unconstrained block conditional on the indicators,
/// including all change-of-variable Jacobians.
///
/// The σ-block is the exponential scale mixture expressed in η = log σ:
/// −e^{2η}/(2b²) + 2η per coordinate (the factor 2 is the Jacobian of
/// σ² = e^{2η}, which keeps the marginal of σ λ̃ exactly Laplace(b)).
pub fn log_prior_unconstrained(psi: &PsiView, z: &[u8], hyper: &HyperParams) -> Result<PriorTerms> {
    let mut t = PriorTerms::default();
    for &v in psi.b {
        if !v.is_finite() {
            return Err(GlnemError::Numeric("non-finite latent matrix entry".into()));
        }
        t.gauss_b += -0.5 * (v * v + LN_2PI);
    }
    let sb2 = hyper.sigma_beta * hyper.sigma_beta;
    for &v in psi.beta {
        if !v.is_finite() {
            return Err(GlnemError::Numeric("non-finite coefficient".into()));
        }
        t.gauss_beta += -0.5 * (v * v / sb2 + LN_2PI + sb2.ln());
    }
    for &v in psi.lambda_tilde {
        t.gauss_lambda_tilde += -0.5 * (v * v + LN_2PI);
    }
    let b2 = hyper.b_slab * hyper.b_slab;
    for &e in psi.eta_sigma {
        if !e.is_finite() {
            return Err(GlnemError::Numeric("non-finite eta_sigma".into()));
        }
        t.sigma_mixture += -(2.0 * e).exp() / (2.0 * b2) + 2.0 * e - (2.0 * b2).ln() + 2.0f64.ln();
    }

    // Stick block: κ log(1−ν₁) + (a−1) Σ log ν_h + Σ log[ν_h(1−ν_h)]
    for (h, &e) in psi.eta_nu.iter().enumerate() {
        if !e.is_finite() {
            return Err(GlnemError::Numeric("non-finite eta_nu".into()));
        }
        let log_nu = log_sigmoid(e);
        let log_1m_nu = log_sigmoid(-e);
        if h == 0 {
            t.stick += hyper.kappa * log_1m_nu;
        }
        t.stick += (hyper.a - 1.0) * log_nu;
        t.stick += log_nu + log_1m_nu; // logit Jacobian
    }

    // Indicator block: Σ Z_h log θ_h + (1−Z_h) log(1−θ_h)
    let mut log_theta = 0.0;
    for (h, &e) in psi.eta_nu.iter().enumerate() {
        log_theta += log_sigmoid(e);
        if z[h] == 1 {
            t.indicator += log_theta;
        } else {
            let theta = log_theta.exp().min(1.0 - 1e-16);
            t.indicator += (-theta).ln_1p();
        }
    }

    if let Some(e) = psi.eta_phi {
        if !e.is_finite() {
            return Err(GlnemError::Numeric("non-finite eta_phi".into()));
        }
        // Half-Cauchy(0,1) on φ with log transform: −log(1+φ²) + η.
        t.dispersion += (2.0 / std::f64::consts::PI).ln() - log1p_exp(2.0 * e) + e;
    }
    if let Some(e) = psi.eta_power {
        if !e.is_finite() {
            return Err(GlnemError::Numeric("non-finite eta_power".into()));
        }
        // Uniform power via logit onto its bounds: Jacobian log σ + log(1−σ).
        t.power += log_sigmoid(e) + log_sigmoid(-e);
    }
    Ok(t)
}

/// Mutable view matching `PsiView` for gradient accumulation.
pub struct PsiGrad<'a> {
    pub b: &'a mut [f64],
    pub beta: &'a mut [f64],
    pub lambda_tilde: &'a mut [f64],
    pub eta_sigma: &'a mut [f64],
    pub eta_nu: &'a mut [f64],
    pub eta_phi: Option<&'a mut f64>,
    pub eta_power: Option<&'a mut f64>,
}

/// Adds ∂ log prior / ∂ψ to the gradient block.
pub fn add_grad_log_prior(psi: &PsiView, z: &[u8], hyper: &HyperParams, grad: &mut PsiGrad) {
    for (g, &v) in grad.b.iter_mut().zip(psi.b) {
        *g += -v;
    }
    let sb2 = hyper.sigma_beta * hyper.sigma_beta;
    for (g, &v) in grad.beta.iter_mut().zip(psi.beta) {
        *g += -v / sb2;
    }
    for (g, &v) in grad.lambda_tilde.iter_mut().zip(psi.lambda_tilde) {
        *g += -v;
    }
    let b2 = hyper.b_slab * hyper.b_slab;
    for (g, &e) in grad.eta_sigma.iter_mut().zip(psi.eta_sigma) {
        *g += -(2.0 * e).exp() / b2 + 2.0;
    }

    let d = psi.eta_nu.len();
    let nu: Vec<f64> = psi.eta_nu.iter().map(|&e| sigmoid(e)).collect();
    let theta = slab_probabilities(&nu);
    // Suffix sums of the indicator contributions.
    let mut active_tail = vec![0.0; d + 1];
    let mut inactive_tail = vec![0.0; d + 1];
    for h in (0..d).rev() {
        active_tail[h] = active_tail[h + 1] + if z[h] == 1 { 1.0 } else { 0.0 };
        let inactive = if z[h] == 0 {
            let th = theta[h].min(1.0 - 1e-12);
            th / (1.0 - th)
        } else {
            0.0
        };
        inactive_tail[h] = inactive_tail[h + 1] + inactive;
    }
    for h in 0..d {
        let mut g = (hyper.a - 1.0) * (1.0 - nu[h]); // Beta shape term
        if h == 0 {
            g += -hyper.kappa * nu[0];
        }
        g += 1.0 - 2.0 * nu[h]; // logit Jacobian
        g += (1.0 - nu[h]) * active_tail[h]; // Z_h = 1 terms
        g += -(1.0 - nu[h]) * inactive_tail[h]; // Z_h = 0 terms
        grad.eta_nu[h] += g;
    }

    if let Some(g) = grad.eta_phi.as_deref_mut() {
        // d/dη [−log(1+e^{2η}) + η] = 1 − 2σ(2η), stable at any η.
        let e = psi.eta_phi.unwrap();
        *g += 1.0 - 2.0 * sigmoid(2.0 * e);
    }
    if let Some(g) = grad.eta_power.as_deref_mut() {
        let e = psi.eta_power.unwrap();
        *g += 1.0 - 2.0 * sigmoid(e);
    }
}
