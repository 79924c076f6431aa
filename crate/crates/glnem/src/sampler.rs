//! The Metropolis-within-Gibbs sampler: no-U-turn HMC updates of the
//! continuous block conditional on the dimension indicators, discrete Gibbs
//! updates of the indicators in a fresh random order each scan, warmup
//! adaptation, and initialization.
//!
//! The continuous block is sampled on an unconstrained scale. Gradients are
//! accumulated analytically: per-dyad likelihood adjoints flow into the
//! coefficients, the latent scales, and the latent basis, and the basis
//! adjoint is pulled back through the QR construction in closed form.

use crate::data::{check_family_support, NetworkData};
use crate::error::{GlnemError, Result};
use crate::families::{
    inverse_link, inverse_link_deriv, Family, FamilyKind, Link, TWEEDIE_POWER_MAX,
    TWEEDIE_POWER_MIN,
};
use crate::hmc::{ChainState, Nuts, NutsOptions, Target};
use crate::linalg::Mat;
use crate::manifold::CenteredQr;
use crate::special::{ln_gamma, log_sigmoid, sigmoid};
use crate::ssibp::{self, HyperParams, PsiGrad, PsiView};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Which prior drives the latent scales.
#[derive(Debug, Clone, Copy)]
pub enum ModelKind {
    /// Spike-and-slab IBP prior with indicator Gibbs updates.
    SsIbp,
    /// Fixed-dimension baseline: λ_h ~ N(0, lambda_var), all dimensions
    /// active, no indicator step.
    FixedGauss { lambda_var: f64 },
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub warmup: usize,
    pub draws: usize,
    pub chains: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub max_depth: usize,
    /// Iterations of the all-dimensions-active pre-run used to initialize.
    pub init_iters: usize,
    /// Keep per-dyad log-likelihood rows in the draw store.
    pub store_dyad_loglik: bool,
    /// Fix the per-dyad reduction order (the implementation always reduces
    /// in dyad order, so results are bitwise reproducible per seed).
    pub reproducible_reduction: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            warmup: 5000,
            draws: 5000,
            chains: 1,
            seed: 0,
            target_accept: 0.8,
            max_depth: 10,
            init_iters: 500,
            store_dyad_loglik: true,
            reproducible_reduction: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 || self.chains == 0 {
            return Err(GlnemError::Config("draws and chains must be positive".into()));
        }
        if !(0.0 < self.target_accept && self.target_accept < 1.0) {
            return Err(GlnemError::Config("target_accept must lie in (0,1)".into()));
        }
        Ok(())
    }
}

/// Index ranges of the unconstrained parameter vector.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub n: usize,
    pub d: usize,
    pub p: usize,
    pub ssibp: bool,
    pub has_phi: bool,
    pub has_power: bool,
}

impl Layout {
    pub fn new(n: usize, p: usize, hyper_d: usize, family: Family, kind: ModelKind) -> Self {
        Layout {
            n,
            d: hyper_d,
            p,
            ssibp: matches!(kind, ModelKind::SsIbp),
            has_phi: family.samples_dispersion(),
            has_power: family.has_power(),
        }
    }

    #[inline]
    pub fn b_range(&self) -> std::ops::Range<usize> {
        0..self.n * self.d
    }
    #[inline]
    pub fn beta_range(&self) -> std::ops::Range<usize> {
        let s = self.n * self.d;
        s..s + self.p
    }
    /// λ̃ for the spike-and-slab model; raw λ for the fixed-Gaussian model.
    #[inline]
    pub fn lambda_range(&self) -> std::ops::Range<usize> {
        let s = self.n * self.d + self.p;
        s..s + self.d
    }
    #[inline]
    pub fn eta_sigma_range(&self) -> std::ops::Range<usize> {
        let s = self.n * self.d + self.p + self.d;
        if self.ssibp {
            s..s + self.d
        } else {
            s..s
        }
    }
    #[inline]
    pub fn eta_nu_range(&self) -> std::ops::Range<usize> {
        let e = self.eta_sigma_range().end;
        if self.ssibp {
            e..e + self.d
        } else {
            e..e
        }
    }
    #[inline]
    pub fn phi_index(&self) -> Option<usize> {
        if self.has_phi {
            Some(self.eta_nu_range().end)
        } else {
            None
        }
    }
    #[inline]
    pub fn power_index(&self) -> Option<usize> {
        if self.has_power {
            Some(self.eta_nu_range().end + usize::from(self.has_phi))
        } else {
            None
        }
    }
    #[inline]
    pub fn dim(&self) -> usize {
        self.eta_nu_range().end + usize::from(self.has_phi) + usize::from(self.has_power)
    }
}

/// Sampled quantities: the unconstrained continuous block and the indicators.
#[derive(Debug, Clone)]
pub struct ParamState {
    pub psi: Vec<f64>,
    pub z: Vec<u8>,
}

/// Constrained view of a state.
#[derive(Debug, Clone)]
pub struct Constrained {
    pub u: Mat,
    pub lambda: Vec<f64>,
    pub beta: Vec<f64>,
    pub phi: f64,
    pub power: f64,
}

pub fn power_from_unconstrained(e: f64) -> f64 {
    TWEEDIE_POWER_MIN + (TWEEDIE_POWER_MAX - TWEEDIE_POWER_MIN) * sigmoid(e)
}

/// Flattened per-dyad data with per-family precomputed constants.
struct LikData {
    pairs: Vec<(u32, u32)>,
    y: Vec<f64>,
    x: Vec<f64>, // D × p, row-major
    p: usize,
    /// Constant term per dyad (−log Γ(y+1) for counts, −log y for positive
    /// Tweedie responses, 0 otherwise).
    const_term: Vec<f64>,
    /// Unique response values and the index of each dyad into them (counts
    /// only; used to share log-gamma evaluations across dyads).
    unique_y: Vec<f64>,
    y_idx: Vec<u32>,
}

impl LikData {
    fn new(data: &NetworkData, family: Family) -> Self {
        let dyads = data.dyads();
        let p = data.p();
        let mut y = Vec::with_capacity(dyads.len());
        let mut x = Vec::with_capacity(dyads.len() * p);
        for &(i, j) in &dyads {
            y.push(data.y.at(i, j));
            for xk in &data.x {
                x.push(xk.at(i, j));
            }
        }
        let const_term: Vec<f64> = match family.kind {
            FamilyKind::Poisson | FamilyKind::NegativeBinomial => {
                y.iter().map(|&v| -ln_gamma(v + 1.0)).collect()
            }
            FamilyKind::Tweedie => {
                y.iter().map(|&v| if v > 0.0 { -v.ln() } else { 0.0 }).collect()
            }
            _ => vec![0.0; y.len()],
        };
        let (unique_y, y_idx) = if family.kind == FamilyKind::NegativeBinomial {
            let mut uniq: Vec<f64> = y.clone();
            uniq.sort_by(|a, b| a.partial_cmp(b).unwrap());
            uniq.dedup();
            let idx = y
                .iter()
                .map(|v| uniq.partition_point(|u| u < v) as u32)
                .collect();
            (uniq, idx)
        } else {
            (Vec::new(), Vec::new())
        };
        LikData {
            pairs: dyads.iter().map(|&(i, j)| (i as u32, j as u32)).collect(),
            y,
            x,
            p,
            const_term,
            unique_y,
            y_idx,
        }
    }

    #[inline]
    fn len(&self) -> usize {
        self.pairs.len()
    }
}

/// A GLNEM posterior conditional on the indicators, exposing the log density
/// and gradient over the unconstrained block.
pub struct GlnemModel {
    lik: LikData,
    pub layout: Layout,
    pub hyper: HyperParams,
    pub family: Family,
    pub link: Link,
    pub kind: ModelKind,
    pub fixed_phi: f64,
    pub fixed_power: f64,
    z: Vec<u8>,
    // per-evaluation caches for the negative binomial tables
    nb_phi: f64,
    nb_lgamma: Vec<f64>,
    nb_digamma: Vec<f64>,
    // scratch
    u_bar: Mat,
}

impl GlnemModel {
    pub fn new(
        data: &NetworkData,
        family: Family,
        link: Link,
        hyper: HyperParams,
        kind: ModelKind,
        fixed_phi: f64,
        fixed_power: f64,
    ) -> Result<Self> {
        hyper.validate()?;
        if !link.compatible_with(family.kind) {
            return Err(GlnemError::Config(format!(
                "link {} is not compatible with family {}",
                link.name(),
                family.kind.name()
            )));
        }
        check_family_support(data, family)?;
        let layout = Layout::new(data.n, data.p(), hyper.d, family, kind);
        let lik = LikData::new(data, family);
        Ok(GlnemModel {
            lik,
            layout,
            hyper,
            family,
            link,
            kind,
            fixed_phi,
            fixed_power,
            z: vec![1u8; layout.d],
            nb_phi: f64::NAN,
            nb_lgamma: Vec::new(),
            nb_digamma: Vec::new(),
            u_bar: Mat::zeros(data.n, layout.d),
        })
    }

    pub fn z(&self) -> &[u8] {
        &self.z
    }

    pub fn set_z(&mut self, z: &[u8]) {
        self.z.copy_from_slice(z);
    }

    pub fn n_dyads(&self) -> usize {
        self.lik.len()
    }

    /// Current dispersion given the unconstrained vector. The exponent is
    /// clamped so that extreme trajectory excursions keep φ and 1/φ finite
    /// and the series windows bounded; such states are rejected by the
    /// energy check, not by a panic. The clamp is far outside any posterior
    /// mass a half-Cauchy prior admits.
    pub fn phi_of(&self, psi: &[f64]) -> f64 {
        match self.layout.phi_index() {
            Some(i) => psi[i].clamp(-40.0, 40.0).exp(),
            None => self.fixed_phi,
        }
    }

    /// Current Tweedie power given the unconstrained vector.
    pub fn power_of(&self, psi: &[f64]) -> f64 {
        match self.layout.power_index() {
            Some(i) => power_from_unconstrained(psi[i]),
            None => self.fixed_power,
        }
    }

    /// Latent scales λ_h implied by the unconstrained vector and indicators.
    pub fn lambda_of(&self, psi: &[f64]) -> Vec<f64> {
        let lt = &psi[self.layout.lambda_range()];
        if !self.layout.ssibp {
            return lt.to_vec();
        }
        let es = &psi[self.layout.eta_sigma_range()];
        (0..self.layout.d)
            .map(|h| {
                if self.z[h] == 0 {
                    0.0
                } else {
                    es[h].exp() * lt[h]
                }
            })
            .collect()
    }

    /// Full constrained view of a state.
    pub fn constrain(&self, state: &ParamState) -> Result<Constrained> {
        let b = self.b_matrix(&state.psi);
        let qr = CenteredQr::new(&b)?;
        // lambda is reconstructed from the state's own indicators rather
        // than the model's current conditioning set.
        let lambda = {
            let lt = &state.psi[self.layout.lambda_range()];
            if !self.layout.ssibp {
                lt.to_vec()
            } else {
                let es = &state.psi[self.layout.eta_sigma_range()];
                (0..self.layout.d)
                    .map(|h| if state.z[h] == 0 { 0.0 } else { es[h].exp() * lt[h] })
                    .collect()
            }
        };
        Ok(Constrained {
            u: qr.basis().into_matrix(),
            lambda,
            beta: state.psi[self.layout.beta_range()].to_vec(),
            phi: self.phi_of(&state.psi),
            power: self.power_of(&state.psi),
        })
    }

    fn b_matrix(&self, psi: &[f64]) -> Mat {
        let n = self.layout.n;
        let d = self.layout.d;
        let b = &psi[self.layout.b_range()];
        Mat::from_fn(n, d, |i, j| b[i * d + j])
    }

    /// Refreshes the shared negative-binomial tables for the current φ.
    fn prepare_tables(&mut self, phi: f64) {
        if self.family.kind != FamilyKind::NegativeBinomial || self.nb_phi == phi {
            return;
        }
        let r = 1.0 / phi;
        self.nb_lgamma.clear();
        self.nb_digamma.clear();
        for &u in &self.lik.unique_y {
            self.nb_lgamma.push(ln_gamma(u + r));
            self.nb_digamma.push(crate::special::digamma(u + r));
        }
        self.nb_phi = phi;
    }

    /// Log density of one dyad given its mean, using shared tables.
    #[inline]
    fn dyad_loglik(&self, idx: usize, mu: f64, phi: f64, power: f64) -> Result<f64> {
        let y = self.lik.y[idx];
        match self.family.kind {
            FamilyKind::Bernoulli => Ok(y * mu.ln() + (1.0 - y) * (1.0 - mu).ln()),
            FamilyKind::Gaussian => {
                let z = y - mu;
                Ok(-0.5 * ((2.0 * std::f64::consts::PI * phi).ln() + z * z / phi))
            }
            FamilyKind::Poisson => Ok(y * mu.ln() - mu + self.lik.const_term[idx]),
            FamilyKind::NegativeBinomial => {
                let r = 1.0 / phi;
                let lg_yr = self.nb_lgamma[self.lik.y_idx[idx] as usize];
                Ok(lg_yr - ln_gamma(r) + r * (r.ln() - (r + mu).ln())
                    + y * (mu.ln() - (r + mu).ln())
                    + self.lik.const_term[idx])
            }
            FamilyKind::Tweedie => {
                let t1 = 1.0 - power;
                let t2 = 2.0 - power;
                let theta_term = (y * mu.powf(t1) / t1 - mu.powf(t2) / t2) / phi;
                if y == 0.0 {
                    Ok(theta_term)
                } else {
                    let log_w = crate::families::tweedie_log_normalizer(y, phi, power)?;
                    Ok(theta_term + log_w + self.lik.const_term[idx])
                }
            }
        }
    }

    /// Linear predictor per dyad.
    pub fn compute_eta(&self, u: &Mat, lambda: &[f64], beta: &[f64], out: &mut Vec<f64>) {
        let d = self.layout.d;
        let p = self.lik.p;
        out.clear();
        out.reserve(self.lik.len());
        for (dy, &(i, j)) in self.lik.pairs.iter().enumerate() {
            let (i, j) = (i as usize, j as usize);
            let mut eta = 0.0;
            let xrow = &self.lik.x[dy * p..(dy + 1) * p];
            for k in 0..p {
                eta += beta[k] * xrow[k];
            }
            let ui = u.row(i);
            let uj = u.row(j);
            for h in 0..d {
                eta += lambda[h] * ui[h] * uj[h];
            }
            out.push(eta);
        }
    }

    /// Total log likelihood from cached linear predictors, with an optional
    /// per-dyad output vector.
    pub fn loglik_from_eta(
        &mut self,
        eta: &[f64],
        phi: f64,
        power: f64,
        per_dyad: Option<&mut Vec<f64>>,
    ) -> Result<f64> {
        self.prepare_tables(phi);
        let mut total = 0.0;
        let mut out = per_dyad;
        if let Some(v) = out.as_deref_mut() {
            v.clear();
        }
        for idx in 0..self.lik.len() {
            let mu = inverse_link(self.link, eta[idx]);
            let ll = self.dyad_loglik(idx, mu, phi, power)?;
            if !ll.is_finite() {
                return Err(GlnemError::Numeric(format!(
                    "non-finite log likelihood at dyad index {idx}"
                )));
            }
            total += ll;
            if let Some(v) = out.as_deref_mut() {
                v.push(ll);
            }
        }
        Ok(total)
    }

    /// Total log likelihood when dimension `h`'s contribution is shifted by
    /// `delta_lambda` (the rank-one indicator toggle).
    fn loglik_with_shift(
        &mut self,
        eta: &[f64],
        u: &Mat,
        h: usize,
        delta_lambda: f64,
        phi: f64,
        power: f64,
    ) -> Result<f64> {
        self.prepare_tables(phi);
        let mut total = 0.0;
        for (idx, &(i, j)) in self.lik.pairs.iter().enumerate() {
            let shift = delta_lambda * u.at(i as usize, h) * u.at(j as usize, h);
            let mu = inverse_link(self.link, eta[idx] + shift);
            total += self.dyad_loglik(idx, mu, phi, power)?;
        }
        if !total.is_finite() {
            return Err(GlnemError::Numeric("non-finite shifted log likelihood".into()));
        }
        Ok(total)
    }

    /// Log likelihood of a state plus the per-dyad vector.
    pub fn log_likelihood(&mut self, state: &ParamState) -> Result<(f64, Vec<f64>)> {
        let c = self.constrain(state)?;
        let mut eta = Vec::new();
        self.compute_eta(&c.u, &c.lambda, &c.beta, &mut eta);
        let mut per = Vec::new();
        let total = self.loglik_from_eta(&eta, c.phi, c.power, Some(&mut per))?;
        Ok((total, per))
    }

    /// Log prior of the unconstrained block given the current indicators.
    fn log_prior(&self, psi: &[f64]) -> Result<f64> {
        match self.kind {
            ModelKind::SsIbp => {
                let view = PsiView {
                    b: &psi[self.layout.b_range()],
                    beta: &psi[self.layout.beta_range()],
                    lambda_tilde: &psi[self.layout.lambda_range()],
                    eta_sigma: &psi[self.layout.eta_sigma_range()],
                    eta_nu: &psi[self.layout.eta_nu_range()],
                    eta_phi: self.layout.phi_index().map(|i| psi[i]),
                    eta_power: self.layout.power_index().map(|i| psi[i]),
                };
                Ok(ssibp::log_prior_unconstrained(&view, &self.z, &self.hyper)?.total())
            }
            ModelKind::FixedGauss { lambda_var } => {
                let mut lp = 0.0;
                const LN_2PI: f64 = 1.8378770664093454835606594;
                for &v in &psi[self.layout.b_range()] {
                    lp += -0.5 * (v * v + LN_2PI);
                }
                let sb2 = self.hyper.sigma_beta * self.hyper.sigma_beta;
                for &v in &psi[self.layout.beta_range()] {
                    lp += -0.5 * (v * v / sb2 + LN_2PI + sb2.ln());
                }
                for &v in &psi[self.layout.lambda_range()] {
                    lp += -0.5 * (v * v / lambda_var + LN_2PI + lambda_var.ln());
                }
                if let Some(i) = self.layout.phi_index() {
                    let e = psi[i];
                    lp += (2.0 / std::f64::consts::PI).ln()
                        - crate::special::log1p_exp(2.0 * e)
                        + e;
                }
                if let Some(i) = self.layout.power_index() {
                    let e = psi[i];
                    lp += log_sigmoid(e) + log_sigmoid(-e);
                }
                if !lp.is_finite() {
                    return Err(GlnemError::Numeric("non-finite log prior".into()));
                }
                Ok(lp)
            }
        }
    }

    /// Log posterior (likelihood + prior) of a state under its indicators.
    pub fn log_posterior(&mut self, state: &ParamState) -> Result<f64> {
        let saved = self.z.clone();
        self.z.copy_from_slice(&state.z);
        let ll = self.log_likelihood(state)?.0;
        let lp = self.log_prior(&state.psi);
        self.z = saved;
        Ok(ll + lp?)
    }
}

/// Specialized per-dyad likelihood/adjoint arms for the gradient sweep.
/// Canonical family/link pairs avoid redundant transcendental calls; the
/// generic arm reproduces the reference formulas exactly.
enum SweepArm<'a> {
    BernLogit,
    PoisLog {
        const_term: &'a [f64],
    },
    GaussIdent {
        inv_phi: f64,
        neg_half_ln_2pi_phi: f64,
        phi: f64,
    },
    NbLog {
        r: f64,
        ln_r: f64,
        lg_r: f64,
        dg_r: f64,
        lg_tab: &'a [f64],
        dg_tab: &'a [f64],
        y_idx: &'a [u32],
        const_term: &'a [f64],
    },
    TweedieLog {
        phi: f64,
        power: f64,
        const_term: &'a [f64],
    },
    Generic {
        kind: FamilyKind,
        link: Link,
        phi: f64,
        power: f64,
    },
}

const SWEEP_ETA_CLAMP: f64 = 30.0;

impl<'a> SweepArm<'a> {
    fn prepare(
        kind: FamilyKind,
        link: Link,
        phi: f64,
        power: f64,
        lik: &'a LikData,
        nb_lgamma: &'a [f64],
        nb_digamma: &'a [f64],
    ) -> Self {
        match (kind, link) {
            (FamilyKind::Bernoulli, Link::Logit) => SweepArm::BernLogit,
            (FamilyKind::Poisson, Link::Log) => SweepArm::PoisLog { const_term: &lik.const_term },
            (FamilyKind::Gaussian, Link::Identity) => SweepArm::GaussIdent {
                inv_phi: 1.0 / phi,
                neg_half_ln_2pi_phi: -0.5 * (2.0 * std::f64::consts::PI * phi).ln(),
                phi,
            },
            (FamilyKind::NegativeBinomial, Link::Log) => {
                let r = 1.0 / phi;
                SweepArm::NbLog {
                    r,
                    ln_r: r.ln(),
                    lg_r: ln_gamma(r),
                    dg_r: crate::special::digamma(r),
                    lg_tab: nb_lgamma,
                    dg_tab: nb_digamma,
                    y_idx: &lik.y_idx,
                    const_term: &lik.const_term,
                }
            }
            (FamilyKind::Tweedie, Link::Log) => {
                SweepArm::TweedieLog { phi, power, const_term: &lik.const_term }
            }
            _ => SweepArm::Generic { kind, link, phi, power },
        }
    }

    /// Returns (log density, ∂ℓ/∂η) for one dyad and accumulates the φ and
    /// power adjoints when requested. Numeric failures surface as −∞.
    #[inline]
    fn eval(
        &self,
        idx: usize,
        y: f64,
        eta: f64,
        g_phi: &mut f64,
        g_pow: &mut f64,
        need_phi: bool,
        need_pow: bool,
    ) -> (f64, f64) {
        match self {
            SweepArm::BernLogit => {
                let e = eta.clamp(-SWEEP_ETA_CLAMP, SWEEP_ETA_CLAMP);
                let mu = sigmoid(e);
                let ll = y * e - crate::special::log1p_exp(e);
                let w = if eta.abs() > SWEEP_ETA_CLAMP { 0.0 } else { y - mu };
                (ll, w)
            }
            SweepArm::PoisLog { const_term } => {
                let e = eta.clamp(-SWEEP_ETA_CLAMP, SWEEP_ETA_CLAMP);
                let mu = e.exp();
                let ll = y * e - mu + const_term[idx];
                let w = if eta.abs() > SWEEP_ETA_CLAMP { 0.0 } else { y - mu };
                (ll, w)
            }
            SweepArm::GaussIdent { inv_phi, neg_half_ln_2pi_phi, phi } => {
                let z = y - eta;
                let ll = neg_half_ln_2pi_phi - 0.5 * z * z * inv_phi;
                if need_phi {
                    *g_phi += 0.5 * z * z / (phi * phi) - 0.5 / phi;
                }
                (ll, z * inv_phi)
            }
            SweepArm::NbLog {
                r,
                ln_r,
                lg_r,
                dg_r,
                lg_tab,
                dg_tab,
                y_idx,
                const_term,
            } => {
                let e = eta.clamp(-SWEEP_ETA_CLAMP, SWEEP_ETA_CLAMP);
                let mu = e.exp();
                let ln_r_mu = (r + mu).ln();
                let u = y_idx[idx] as usize;
                let ll = lg_tab[u] - lg_r + r * (ln_r - ln_r_mu) + y * (e - ln_r_mu)
                    + const_term[idx];
                let w = if eta.abs() > SWEEP_ETA_CLAMP {
                    0.0
                } else {
                    y - mu * (y + r) / (r + mu)
                };
                if need_phi {
                    let dl_dr =
                        dg_tab[u] - dg_r + (ln_r - ln_r_mu) + 1.0 - (r + y) / (r + mu);
                    *g_phi += -r * r * dl_dr;
                }
                (ll, w)
            }
            SweepArm::TweedieLog { phi, power, const_term } => {
                let e = eta.clamp(-SWEEP_ETA_CLAMP, SWEEP_ETA_CLAMP);
                let mu = e.exp();
                let t1 = 1.0 - power;
                let t2 = 2.0 - power;
                let mu_t1 = mu.powf(t1);
                let theta_term = (y * mu_t1 / t1 - mu * mu_t1 / t2) / phi;
                let fam = Family::new(FamilyKind::Tweedie);
                let aux = crate::families::AuxParams { phi: *phi, power: *power };
                let ll = if y == 0.0 {
                    theta_term
                } else {
                    match crate::families::tweedie_log_normalizer(y, *phi, *power) {
                        Ok(log_w) => theta_term + log_w + const_term[idx],
                        Err(_) => return (f64::NEG_INFINITY, 0.0),
                    }
                };
                let w = if eta.abs() > SWEEP_ETA_CLAMP {
                    0.0
                } else {
                    (y - mu) * mu_t1 / phi
                };
                if need_phi {
                    *g_phi += crate::families::dlogf_dphi(fam, y, mu, &aux);
                }
                if need_pow {
                    *g_pow += crate::families::dlogf_dpower(fam, y, mu, &aux);
                }
                (ll, w)
            }
            SweepArm::Generic { kind, link, phi, power } => {
                let fam = Family::new(*kind);
                let aux = crate::families::AuxParams { phi: *phi, power: *power };
                let mu = inverse_link(*link, eta);
                let ll = match crate::families::log_density(fam, y, mu, &aux) {
                    Ok(v) => v,
                    Err(_) => return (f64::NEG_INFINITY, 0.0),
                };
                let w = crate::families::dlogf_dmu(fam, y, mu, &aux)
                    * inverse_link_deriv(*link, eta);
                if need_phi {
                    *g_phi += crate::families::dlogf_dphi(fam, y, mu, &aux);
                }
                if need_pow {
                    *g_pow += crate::families::dlogf_dpower(fam, y, mu, &aux);
                }
                (ll, w)
            }
        }
    }
}

impl Target for GlnemModel {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn logp_grad(&mut self, pos: &[f64], grad: &mut [f64]) -> Result<f64> {
        let layout = self.layout;
        let d = layout.d;
        let p = layout.p;
        grad.iter_mut().for_each(|g| *g = 0.0);

        let b = self.b_matrix(pos);
        let qr = CenteredQr::new(&b)?;
        let u = qr.basis().into_matrix();

        let beta = &pos[layout.beta_range()];
        let lt = &pos[layout.lambda_range()];
        let phi = self.phi_of(pos);
        let power = self.power_of(pos);
        self.prepare_tables(phi);

        // λ and the chain factors dλ/dλ̃, dλ/dη_σ.
        let mut lambda = vec![0.0; d];
        let mut sigma = vec![1.0; d];
        if layout.ssibp {
            let es = &pos[layout.eta_sigma_range()];
            for h in 0..d {
                sigma[h] = es[h].exp();
                lambda[h] = if self.z[h] == 0 { 0.0 } else { sigma[h] * lt[h] };
            }
        } else {
            lambda.copy_from_slice(lt);
        }

        // Likelihood sweep: accumulate scalar adjoints dyad by dyad. The
        // per-family arms are specialized so common family/link pairs pay
        // for a single transcendental call per dyad.
        let mut loglik = 0.0;
        let mut g_beta = vec![0.0; p];
        let mut g_lambda = vec![0.0; d]; // ∂/∂λ_h
        let mut g_phi_nat = 0.0; // ∂/∂φ
        let mut g_pow_nat = 0.0; // ∂/∂ξ
        for r in self.u_bar.data_mut() {
            *r = 0.0;
        }
        let need_phi = layout.has_phi;
        let need_pow = layout.has_power;
        let fam = self.family;
        let link = self.link;
        let sweep = SweepArm::prepare(fam.kind, link, phi, power, &self.lik, &self.nb_lgamma,
            &self.nb_digamma);
        {
            let lik = &self.lik;
            let ud = u.data();
            let ub = self.u_bar.data_mut();
            for (idx, &(i, j)) in lik.pairs.iter().enumerate() {
                let (i, j) = (i as usize, j as usize);
                let xrow = &lik.x[idx * p..idx * p + p];
                let mut eta = 0.0;
                for (b, x) in beta.iter().zip(xrow) {
                    eta += b * x;
                }
                let ui = &ud[i * d..i * d + d];
                let uj = &ud[j * d..j * d + d];
                for h in 0..d {
                    eta += lambda[h] * ui[h] * uj[h];
                }
                let y = lik.y[idx];
                let (ll, w) = sweep.eval(idx, y, eta, &mut g_phi_nat, &mut g_pow_nat,
                    need_phi, need_pow);
                loglik += ll;
                for (g, x) in g_beta.iter_mut().zip(xrow) {
                    *g += w * x;
                }
                let ubi = i * d;
                let ubj = j * d;
                for h in 0..d {
                    g_lambda[h] += w * ui[h] * uj[h];
                    let wl = w * lambda[h];
                    ub[ubi + h] += wl * uj[h];
                    ub[ubj + h] += wl * ui[h];
                }
            }
        }
        if !loglik.is_finite() {
            return Err(GlnemError::Numeric("non-finite log likelihood".into()));
        }

        // Pull the basis adjoint back through the QR construction.
        let b_bar = qr.vjp(&self.u_bar);
        let gb = &mut grad[layout.b_range()];
        gb.copy_from_slice(b_bar.data());
        grad[layout.beta_range()].copy_from_slice(&g_beta);
        if layout.ssibp {
            // λ_h = Z_h σ_h λ̃_h
            let lambda_grad_slice = layout.lambda_range();
            for h in 0..d {
                if self.z[h] == 1 {
                    grad[lambda_grad_slice.start + h] = g_lambda[h] * sigma[h];
                }
            }
            let es_range = layout.eta_sigma_range();
            for h in 0..d {
                if self.z[h] == 1 {
                    grad[es_range.start + h] = g_lambda[h] * sigma[h] * lt[h];
                }
            }
        } else {
            grad[layout.lambda_range()].copy_from_slice(&g_lambda);
        }
        if let Some(i) = layout.phi_index() {
            grad[i] = g_phi_nat * phi; // dφ/dη_φ = φ
        }
        if let Some(i) = layout.power_index() {
            let s = sigmoid(pos[i]);
            grad[i] = g_pow_nat * (TWEEDIE_POWER_MAX - TWEEDIE_POWER_MIN) * s * (1.0 - s);
        }

        // Prior terms and adjoints.
        let log_prior = self.log_prior(pos)?;
        match self.kind {
            ModelKind::SsIbp => {
                let (before, rest) = grad.split_at_mut(layout.b_range().end);
                let _ = before;
                let (gbeta, rest) = rest.split_at_mut(p);
                let (glt, rest) = rest.split_at_mut(d);
                let (ges, rest) = rest.split_at_mut(d);
                let (gen_, rest) = rest.split_at_mut(d);
                let mut phi_slot = None;
                let mut pow_slot = None;
                let mut it = rest.iter_mut();
                if layout.has_phi {
                    phi_slot = it.next();
                }
                if layout.has_power {
                    pow_slot = it.next();
                }
                let view = PsiView {
                    b: &pos[layout.b_range()],
                    beta: &pos[layout.beta_range()],
                    lambda_tilde: &pos[layout.lambda_range()],
                    eta_sigma: &pos[layout.eta_sigma_range()],
                    eta_nu: &pos[layout.eta_nu_range()],
                    eta_phi: layout.phi_index().map(|i| pos[i]),
                    eta_power: layout.power_index().map(|i| pos[i]),
                };
                // The B-block prior gradient (−B) is accumulated after the
                // match for both model kinds, so pass an empty slice here.
                let mut empty: [f64; 0] = [];
                let mut pg = PsiGrad {
                    b: &mut empty,
                    beta: gbeta,
                    lambda_tilde: glt,
                    eta_sigma: ges,
                    eta_nu: gen_,
                    eta_phi: phi_slot,
                    eta_power: pow_slot,
                };
                ssibp::add_grad_log_prior(&view, &self.z, &self.hyper, &mut pg);
            }
            ModelKind::FixedGauss { lambda_var } => {
                for (g, &v) in grad[layout.beta_range().clone()]
                    .iter_mut()
                    .zip(&pos[layout.beta_range()])
                {
                    *g += -v / (self.hyper.sigma_beta * self.hyper.sigma_beta);
                }
                let lr = layout.lambda_range();
                for h in 0..d {
                    grad[lr.start + h] += -pos[lr.start + h] / lambda_var;
                }
                if let Some(i) = layout.phi_index() {
                    grad[i] += 1.0 - 2.0 * sigmoid(2.0 * pos[i]);
                }
                if let Some(i) = layout.power_index() {
                    grad[i] += 1.0 - 2.0 * sigmoid(pos[i]);
                }
            }
        }
        // B-block prior gradient, shared by both model kinds.
        for (g, &v) in grad[layout.b_range()].iter_mut().zip(&pos[layout.b_range()]) {
            *g += -v;
        }

        Ok(loglik + log_prior)
    }
}

/// One Gibbs scan over the indicators in a fresh uniform random order.
///
/// The likelihood for each toggle is evaluated through a rank-one shift of
/// the cached linear predictors; accepted flips update the cache in place.
pub fn gibbs_update_z<R: Rng + ?Sized>(
    model: &mut GlnemModel,
    state: &mut ParamState,
    eta: &mut [f64],
    cached_loglik: &mut f64,
    rng: &mut R,
) -> Result<usize> {
    let d = model.layout.d;
    if d == 0 || !model.layout.ssibp {
        return Ok(0);
    }
    let psi = state.psi.clone();
    let lt = &psi[model.layout.lambda_range()];
    let es = &psi[model.layout.eta_sigma_range()];
    let en = &psi[model.layout.eta_nu_range()];
    let phi = model.phi_of(&psi);
    let power = model.power_of(&psi);
    let b = model.b_matrix(&psi);
    let u = CenteredQr::new(&b)?.basis().into_matrix();

    // log θ_h via cumulative log-sigmoid sums.
    let mut log_theta = vec![0.0; d];
    let mut acc = 0.0;
    for h in 0..d {
        acc += log_sigmoid(en[h]);
        log_theta[h] = acc;
    }

    let mut order: Vec<usize> = (0..d).collect();
    // Fisher-Yates for a uniform random permutation.
    for i in (1..d).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }

    let mut flips = 0;
    for &h in &order {
        let lam_active = es[h].exp() * lt[h];
        let theta = log_theta[h].exp().min(1.0);
        let prob_active = if lam_active == 0.0 {
            // Likelihood ratio is one: prior odds only.
            theta
        } else {
            // A numerically unevaluable toggled state is a zero-probability
            // candidate, not a run failure.
            let (ll_active, ll_inactive) = if state.z[h] == 1 {
                let ll0 = model
                    .loglik_with_shift(eta, &u, h, -lam_active, phi, power)
                    .unwrap_or(f64::NEG_INFINITY);
                (*cached_loglik, ll0)
            } else {
                let ll1 = model
                    .loglik_with_shift(eta, &u, h, lam_active, phi, power)
                    .unwrap_or(f64::NEG_INFINITY);
                (ll1, *cached_loglik)
            };
            if theta >= 1.0 {
                1.0
            } else {
                let logit = (ll_active - ll_inactive) + theta.ln() - (-theta).ln_1p();
                sigmoid(logit)
            }
        };
        let new_z = u8::from(rng.random::<f64>() < prob_active);
        if new_z != state.z[h] {
            flips += 1;
            let delta = if new_z == 1 { lam_active } else { -lam_active };
            if delta != 0.0 {
                for (idx, &(i, j)) in model.lik.pairs.iter().enumerate() {
                    eta[idx] += delta * u.at(i as usize, h) * u.at(j as usize, h);
                }
                *cached_loglik = model.loglik_from_eta(eta, phi, power, None)?;
            }
            state.z[h] = new_z;
            model.set_z(&state.z);
        }
    }
    Ok(flips)
}

/// Posterior draws of all parameters with metadata.
#[derive(Debug, Clone)]
pub struct DrawStore {
    pub n: usize,
    pub d: usize,
    pub p: usize,
    pub chains: usize,
    pub draws_per_chain: usize,
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub z: Vec<u8>,
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
    pub power: Vec<f64>,
    pub loglik: Vec<f64>,
    pub log_post: Vec<f64>,
    pub dyad_loglik: Option<Vec<f64>>,
    pub dyads: Vec<(usize, usize)>,
    pub divergences: usize,
    pub family: FamilyKind,
    pub link: Link,
    pub seed: u64,
}

impl DrawStore {
    pub fn len(&self) -> usize {
        self.loglik.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loglik.is_empty()
    }

    pub fn beta_row(&self, s: usize) -> &[f64] {
        &self.beta[s * self.p..(s + 1) * self.p]
    }

    pub fn lambda_row(&self, s: usize) -> &[f64] {
        &self.lambda[s * self.d..(s + 1) * self.d]
    }

    pub fn z_row(&self, s: usize) -> &[u8] {
        &self.z[s * self.d..(s + 1) * self.d]
    }

    pub fn u_mat(&self, s: usize) -> Mat {
        let nd = self.n * self.d;
        let slice = &self.u[s * nd..(s + 1) * nd];
        Mat::from_fn(self.n, self.d, |i, j| slice[i * self.d + j])
    }

    pub fn active_count(&self, s: usize) -> usize {
        self.z_row(s).iter().filter(|&&z| z == 1).count()
    }
}

/// Draws an initial state: unconstrained coordinates uniform on (−2, 2),
/// then `init_iters` adaptive HMC iterations with every dimension active.
pub fn initialize<R: Rng + ?Sized>(
    model: &mut GlnemModel,
    init_iters: usize,
    opts: NutsOptions,
    rng: &mut R,
) -> Result<ParamState> {
    let dim = model.layout.dim();
    let psi: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    let z = vec![1u8; model.layout.d];
    model.set_z(&z);
    let mut state = ParamState { psi, z };
    if init_iters == 0 {
        return Ok(state);
    }
    let mut chain = ChainState::new(model, state.psi.clone())?;
    let mut nuts = Nuts::new(dim, init_iters, opts);
    nuts.init_step_size(model, &chain, rng)?;
    let mut divergent = 0usize;
    for _ in 0..init_iters {
        let info = nuts.transition(model, &mut chain, rng)?;
        if info.divergent {
            divergent += 1;
        }
    }
    if divergent * 10 > init_iters * 9 {
        return Err(GlnemError::InitFailure(format!(
            "{divergent} of {init_iters} initialization iterations diverged"
        )));
    }
    state.psi = chain.pos;
    Ok(state)
}

/// Runs `config.chains` chains and concatenates their draws.
pub fn run_chain(
    data: &NetworkData,
    hyper: &HyperParams,
    family: Family,
    link: Link,
    kind: ModelKind,
    fixed_phi: f64,
    fixed_power: f64,
    config: &SamplerConfig,
) -> Result<DrawStore> {
    config.validate()?;
    let chains: Vec<u64> = (0..config.chains as u64).collect();
    let stores = crate::parallel::parallel_map(chains, |c| {
        run_single_chain(
            data,
            hyper,
            family,
            link,
            kind,
            fixed_phi,
            fixed_power,
            config,
            config.seed.wrapping_add(c),
        )
    });
    let mut stores = stores.into_iter().collect::<Result<Vec<_>>>()?;
    let mut out = stores.remove(0);
    for s in stores {
        out.beta.extend(s.beta);
        out.lambda.extend(s.lambda);
        out.z.extend(s.z);
        out.u.extend(s.u);
        out.phi.extend(s.phi);
        out.power.extend(s.power);
        out.loglik.extend(s.loglik);
        out.log_post.extend(s.log_post);
        if let (Some(a), Some(b)) = (out.dyad_loglik.as_mut(), s.dyad_loglik) {
            a.extend(b);
        }
        out.divergences += s.divergences;
    }
    out.chains = config.chains;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn run_single_chain(
    data: &NetworkData,
    hyper: &HyperParams,
    family: Family,
    link: Link,
    kind: ModelKind,
    fixed_phi: f64,
    fixed_power: f64,
    config: &SamplerConfig,
    seed: u64,
) -> Result<DrawStore> {
    let mut model = GlnemModel::new(data, family, link, hyper.clone(), kind, fixed_phi, fixed_power)?;
    let mut rng = StdRng::seed_from_u64(seed);
    let opts = NutsOptions { target_accept: config.target_accept, max_depth: config.max_depth };

    let mut state = initialize(&mut model, config.init_iters, opts, &mut rng)?;
    let dim = model.layout.dim();
    let mut chain = ChainState::new(&mut model, state.psi.clone())?;
    let mut nuts = Nuts::new(dim, config.warmup, opts);
    nuts.init_step_size(&mut model, &chain, &mut rng)?;

    let total = config.warmup + config.draws;
    let n_dyads = model.n_dyads();
    let mut eta = Vec::with_capacity(n_dyads);
    let mut per_dyad = Vec::with_capacity(n_dyads);
    let d = model.layout.d;
    let p = model.layout.p;
    let n = model.layout.n;

    let mut store = DrawStore {
        n,
        d,
        p,
        chains: 1,
        draws_per_chain: config.draws,
        beta: Vec::with_capacity(config.draws * p),
        lambda: Vec::with_capacity(config.draws * d),
        z: Vec::with_capacity(config.draws * d),
        u: Vec::with_capacity(config.draws * n * d),
        phi: Vec::with_capacity(config.draws),
        power: Vec::with_capacity(config.draws),
        loglik: Vec::with_capacity(config.draws),
        log_post: Vec::with_capacity(config.draws),
        dyad_loglik: if config.store_dyad_loglik {
            Some(Vec::with_capacity(config.draws * n_dyads))
        } else {
            None
        },
        dyads: data.dyads(),
        divergences: 0,
        family: family.kind,
        link,
        seed,
    };

    for iter in 0..total {
        // Step 1: HMC over the continuous block given the indicators.
        let info = nuts.transition(&mut model, &mut chain, &mut rng)?;
        if info.divergent && iter >= config.warmup {
            store.divergences += 1;
        }
        state.psi.copy_from_slice(&chain.pos);

        // Step 2: Gibbs scan over the indicators.
        if model.layout.ssibp && d > 0 {
            let c = model.constrain(&state)?;
            model.compute_eta(&c.u, &c.lambda, &c.beta, &mut eta);
            let mut cached = model.loglik_from_eta(&eta, c.phi, c.power, None)?;
            let flips =
                gibbs_update_z(&mut model, &mut state, &mut eta, &mut cached, &mut rng)?;
            if flips > 0 {
                // The conditional target changed; refresh the cached density
                // and gradient.
                chain.logp = model.logp_grad(&chain.pos, &mut chain.grad)?;
            }
        }

        if iter >= config.warmup {
            let c = model.constrain(&state)?;
            model.compute_eta(&c.u, &c.lambda, &c.beta, &mut eta);
            let ll = model.loglik_from_eta(&eta, c.phi, c.power, Some(&mut per_dyad))?;
            let lp = model.log_prior(&state.psi)?;
            store.beta.extend_from_slice(&c.beta);
            store.lambda.extend_from_slice(&c.lambda);
            store.z.extend_from_slice(&state.z);
            store.u.extend_from_slice(c.u.data());
            store.phi.push(c.phi);
            store.power.push(c.power);
            store.loglik.push(ll);
            store.log_post.push(ll + lp);
            if let Some(v) = store.dyad_loglik.as_mut() {
                v.extend_from_slice(&per_dyad);
            }
        }
    }
    Ok(store)
}
