//! Hamiltonian Monte Carlo with dynamic trajectory lengths (no-U-turn
//! criterion), dual-averaging step-size adaptation, and a diagonal mass
//! matrix estimated over expanding warmup windows.
//!
//! The sampler is generic over any differentiable unnormalized log density,
//! which keeps it testable against targets with known moments.

use crate::error::{GlnemError, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// A differentiable unnormalized log density.
pub trait Target {
    fn dim(&self) -> usize;
    /// Log density at `pos`; the gradient is written into `grad`.
    fn logp_grad(&mut self, pos: &[f64], grad: &mut [f64]) -> Result<f64>;
}

/// Position with cached log density and gradient.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub pos: Vec<f64>,
    pub logp: f64,
    pub grad: Vec<f64>,
}

impl ChainState {
    pub fn new<T: Target>(target: &mut T, pos: Vec<f64>) -> Result<Self> {
        let mut grad = vec![0.0; pos.len()];
        let logp = target.logp_grad(&pos, &mut grad)?;
        if !logp.is_finite() {
            return Err(GlnemError::Numeric(
                "non-finite log density at the initial point".into(),
            ));
        }
        Ok(ChainState { pos, logp, grad })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NutsOptions {
    pub target_accept: f64,
    pub max_depth: usize,
}

impl Default for NutsOptions {
    fn default() -> Self {
        NutsOptions { target_accept: 0.8, max_depth: 10 }
    }
}

/// Summary of one transition.
#[derive(Debug, Clone, Copy, Default)]
pub struct TransitionInfo {
    pub accept_stat: f64,
    pub divergent: bool,
    pub depth: usize,
    pub n_leapfrog: usize,
}

/// Energy error beyond which a trajectory is declared divergent.
const DIVERGENCE_THRESHOLD: f64 = 1000.0;

struct DualAveraging {
    mu: f64,
    log_eps: f64,
    log_eps_bar: f64,
    h_bar: f64,
    count: f64,
    gamma: f64,
    t0: f64,
    kappa: f64,
    target: f64,
}

impl DualAveraging {
    fn new(eps0: f64, target: f64) -> Self {
        DualAveraging {
            mu: (10.0 * eps0).ln(),
            log_eps: eps0.ln(),
            log_eps_bar: eps0.ln(),
            h_bar: 0.0,
            count: 0.0,
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
            target,
        }
    }

    fn update(&mut self, accept_stat: f64) {
        self.count += 1.0;
        let m = self.count;
        let eta = 1.0 / (m + self.t0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept_stat);
        self.log_eps = self.mu - m.sqrt() / self.gamma * self.h_bar;
        let w = m.powf(-self.kappa);
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar;
    }
}

/// Per-coordinate running variance.
struct Welford {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Welford { count: 0.0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    fn reset(&mut self) {
        self.count = 0.0;
        self.mean.iter_mut().for_each(|v| *v = 0.0);
        self.m2.iter_mut().for_each(|v| *v = 0.0);
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1.0;
        for i in 0..x.len() {
            let delta = x[i] - self.mean[i];
            self.mean[i] += delta / self.count;
            self.m2[i] += delta * (x[i] - self.mean[i]);
        }
    }

    /// Regularized variance estimate, shrunk toward a small constant the way
    /// adaptive HMC implementations commonly do.
    fn variance(&self, out: &mut [f64]) {
        let n = self.count;
        for i in 0..out.len() {
            let var = if n > 1.0 { self.m2[i] / (n - 1.0) } else { 1.0 };
            out[i] = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
        }
    }
}

/// Adaptive NUTS kernel: owns the step size, mass matrix, and warmup
/// schedule; the caller owns the chain state and the target.
pub struct Nuts {
    pub opts: NutsOptions,
    pub eps: f64,
    /// Diagonal of the inverse mass matrix (posterior variance estimates).
    pub inv_mass: Vec<f64>,
    da: DualAveraging,
    welford: Welford,
    warmup: usize,
    iter: usize,
    window_ends: Vec<usize>,
    collect_from: usize,
}

impl Nuts {
    pub fn new(dim: usize, warmup: usize, opts: NutsOptions) -> Self {
        let (window_ends, collect_from) = warmup_windows(warmup);
        Nuts {
            opts,
            eps: 0.1,
            inv_mass: vec![1.0; dim],
            da: DualAveraging::new(0.1, opts.target_accept),
            welford: Welford::new(dim),
            warmup,
            iter: 0,
            window_ends,
            collect_from,
        }
    }

    /// Heuristic initial step size: double or halve until a single leapfrog
    /// step crosses 50% acceptance.
    pub fn init_step_size<T: Target, R: Rng + ?Sized>(
        &mut self,
        target: &mut T,
        state: &ChainState,
        rng: &mut R,
    ) -> Result<()> {
        let dim = state.pos.len();
        let mut eps = 1.0;
        let r0: Vec<f64> = (0..dim)
            .map(|i| {
                let z: f64 = StandardNormal.sample(rng);
                z / self.inv_mass[i].sqrt()
            })
            .collect();
        let h0 = -state.logp + kinetic(&r0, &self.inv_mass);
        let ratio_at = |eps: f64, target: &mut T| -> f64 {
            let mut pos = state.pos.clone();
            let mut r = r0.clone();
            let mut grad = state.grad.clone();
            match leapfrog(target, &mut pos, &mut r, &mut grad, eps, &self.inv_mass) {
                Ok(logp) if logp.is_finite() => {
                    let h1 = -logp + kinetic(&r, &self.inv_mass);
                    (h0 - h1).exp()
                }
                _ => 0.0,
            }
        };
        let mut ratio = ratio_at(eps, target);
        let dir: f64 = if ratio > 0.5 { 1.0 } else { -1.0 };
        for _ in 0..60 {
            if dir > 0.0 && ratio <= 0.5 {
                break;
            }
            if dir < 0.0 && ratio >= 0.5 {
                break;
            }
            eps *= 2.0f64.powf(dir);
            if !(1e-10..=1e6).contains(&eps) {
                return Err(GlnemError::InitFailure(format!(
                    "step-size search ran away (eps = {eps})"
                )));
            }
            ratio = ratio_at(eps, target);
        }
        self.eps = eps;
        self.da = DualAveraging::new(eps, self.opts.target_accept);
        Ok(())
    }

    /// One NUTS transition; adapts while within warmup, then freezes.
    pub fn transition<T: Target, R: Rng + ?Sized>(
        &mut self,
        target: &mut T,
        state: &mut ChainState,
        rng: &mut R,
    ) -> Result<TransitionInfo> {
        let info = nuts_once(
            target,
            state,
            self.eps,
            &self.inv_mass,
            self.opts.max_depth,
            rng,
        )?;

        if self.iter < self.warmup {
            self.da.update(info.accept_stat);
            self.eps = self.da.log_eps.exp();
            if self.iter >= self.collect_from {
                self.welford.push(&state.pos);
            }
            if self.window_ends.contains(&(self.iter + 1)) && self.welford.count > 4.0 {
                self.welford.variance(&mut self.inv_mass);
                self.welford.reset();
                // Fresh step-size search under the new metric.
                self.init_step_size(target, state, rng)?;
            }
            if self.iter + 1 == self.warmup {
                self.eps = self.da.log_eps_bar.exp();
            }
        }
        self.iter += 1;
        Ok(info)
    }
}

/// Mass-update boundaries within warmup: a step-size-only opening buffer, a
/// doubling sequence of variance-estimation windows, and a closing buffer.
fn warmup_windows(warmup: usize) -> (Vec<usize>, usize) {
    if warmup < 40 {
        return (Vec::new(), warmup);
    }
    let init = ((warmup as f64 * 0.15) as usize).max(10);
    let term = ((warmup as f64 * 0.10) as usize).max(10);
    let slow = warmup - init - term;
    let mut ends = Vec::new();
    let mut size = (slow / 7).max(10);
    let mut pos = init;
    while pos + size <= init + slow {
        pos += size;
        ends.push(pos);
        size *= 2;
    }
    if let Some(last) = ends.last_mut() {
        *last = init + slow; // absorb the remainder into the final window
    } else {
        ends.push(init + slow);
    }
    ends.dedup();
    (ends, init)
}

#[inline]
fn kinetic(r: &[f64], inv_mass: &[f64]) -> f64 {
    0.5 * r.iter().zip(inv_mass).map(|(ri, mi)| ri * ri * mi).sum::<f64>()
}

/// One leapfrog step in place; returns the new log density.
fn leapfrog<T: Target>(
    target: &mut T,
    pos: &mut [f64],
    r: &mut [f64],
    grad: &mut [f64],
    eps: f64,
    inv_mass: &[f64],
) -> Result<f64> {
    for i in 0..pos.len() {
        r[i] += 0.5 * eps * grad[i];
        pos[i] += eps * inv_mass[i] * r[i];
    }
    let logp = target.logp_grad(pos, grad)?;
    for i in 0..pos.len() {
        r[i] += 0.5 * eps * grad[i];
    }
    Ok(logp)
}

struct TreeEnd {
    pos: Vec<f64>,
    r: Vec<f64>,
    grad: Vec<f64>,
}

struct Tree {
    minus: TreeEnd,
    plus: TreeEnd,
    prop_pos: Vec<f64>,
    prop_logp: f64,
    prop_grad: Vec<f64>,
    n_valid: f64,
    keep_going: bool,
    sum_alpha: f64,
    n_alpha: f64,
    divergent: bool,
    n_leapfrog: usize,
}

fn u_turn(minus: &TreeEnd, plus: &TreeEnd, inv_mass: &[f64]) -> bool {
    let mut dot_minus = 0.0;
    let mut dot_plus = 0.0;
    for i in 0..minus.pos.len() {
        let dp = plus.pos[i] - minus.pos[i];
        dot_minus += dp * inv_mass[i] * minus.r[i];
        dot_plus += dp * inv_mass[i] * plus.r[i];
    }
    dot_minus < 0.0 || dot_plus < 0.0
}

#[allow(clippy::too_many_arguments)]
fn build_tree<T: Target, R: Rng + ?Sized>(
    target: &mut T,
    from: &TreeEnd,
    depth: usize,
    dir: f64,
    log_u: f64,
    eps: f64,
    inv_mass: &[f64],
    h0: f64,
    rng: &mut R,
) -> Result<Tree> {
    if depth == 0 {
        let mut pos = from.pos.clone();
        let mut r = from.r.clone();
        let mut grad = from.grad.clone();
        let logp = match leapfrog(target, &mut pos, &mut r, &mut grad, dir * eps, inv_mass) {
            Ok(lp) => lp,
            // A numeric failure inside a trajectory is treated as a hard
            // divergence rather than an error: the step is rejected.
            Err(_) => f64::NEG_INFINITY,
        };
        let h = if logp.is_finite() { -logp + kinetic(&r, inv_mass) } else { f64::INFINITY };
        let n_valid = if log_u <= -h { 1.0 } else { 0.0 };
        let divergent = log_u - DIVERGENCE_THRESHOLD > -h;
        let alpha = (h0 - h).exp().min(1.0);
        let end = TreeEnd { pos: pos.clone(), r, grad: grad.clone() };
        return Ok(Tree {
            minus: TreeEnd { pos: end.pos.clone(), r: end.r.clone(), grad: end.grad.clone() },
            plus: end,
            prop_pos: pos,
            prop_logp: logp,
            prop_grad: grad,
            n_valid,
            keep_going: !divergent,
            sum_alpha: if alpha.is_finite() { alpha } else { 0.0 },
            n_alpha: 1.0,
            divergent,
            n_leapfrog: 1,
        });
    }

    let mut first = build_tree(target, from, depth - 1, dir, log_u, eps, inv_mass, h0, rng)?;
    if !first.keep_going {
        return Ok(first);
    }
    let grow_from = if dir > 0.0 { &first.plus } else { &first.minus };
    let second = build_tree(target, grow_from, depth - 1, dir, log_u, eps, inv_mass, h0, rng)?;

    if dir > 0.0 {
        first.plus = second.plus;
    } else {
        first.minus = second.minus;
    }
    let total = first.n_valid + second.n_valid;
    if second.n_valid > 0.0 && rng.random::<f64>() < second.n_valid / total {
        first.prop_pos = second.prop_pos;
        first.prop_logp = second.prop_logp;
        first.prop_grad = second.prop_grad;
    }
    first.n_valid = total;
    first.sum_alpha += second.sum_alpha;
    first.n_alpha += second.n_alpha;
    first.n_leapfrog += second.n_leapfrog;
    first.divergent |= second.divergent;
    first.keep_going =
        second.keep_going && !u_turn(&first.minus, &first.plus, inv_mass);
    Ok(first)
}

/// A single no-U-turn transition updating `state` in place.
pub fn nuts_once<T: Target, R: Rng + ?Sized>(
    target: &mut T,
    state: &mut ChainState,
    eps: f64,
    inv_mass: &[f64],
    max_depth: usize,
    rng: &mut R,
) -> Result<TransitionInfo> {
    let dim = state.pos.len();
    let r0: Vec<f64> = (0..dim)
        .map(|i| {
            let z: f64 = StandardNormal.sample(rng);
            z / inv_mass[i].sqrt()
        })
        .collect();
    let h0 = -state.logp + kinetic(&r0, inv_mass);
    let log_u = (-h0) + rng.random::<f64>().ln();

    let mut minus = TreeEnd { pos: state.pos.clone(), r: r0.clone(), grad: state.grad.clone() };
    let mut plus = TreeEnd { pos: state.pos.clone(), r: r0, grad: state.grad.clone() };
    let mut n_valid = 1.0;
    let mut depth = 0;
    let mut info = TransitionInfo::default();
    let mut sum_alpha = 0.0;
    let mut n_alpha = 0.0;

    while depth < max_depth {
        let dir: f64 = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
        let from = if dir > 0.0 { &plus } else { &minus };
        let tree = build_tree(target, from, depth, dir, log_u, eps, inv_mass, h0, rng)?;
        info.n_leapfrog += tree.n_leapfrog;
        sum_alpha += tree.sum_alpha;
        n_alpha += tree.n_alpha;
        info.divergent |= tree.divergent;

        if tree.keep_going && tree.n_valid > 0.0 && rng.random::<f64>() < tree.n_valid / n_valid {
            state.pos.copy_from_slice(&tree.prop_pos);
            state.logp = tree.prop_logp;
            state.grad.copy_from_slice(&tree.prop_grad);
        }
        n_valid += tree.n_valid;
        if dir > 0.0 {
            plus = tree.plus;
        } else {
            minus = tree.minus;
        }
        depth += 1;
        if !tree.keep_going || u_turn(&minus, &plus, inv_mass) {
            break;
        }
    }
    info.depth = depth;
    info.accept_stat = if n_alpha > 0.0 { sum_alpha / n_alpha } else { 0.0 };
    Ok(info)
}

/// Fixed-trajectory HMC transition (used by tests; zero steps is a no-op by
/// construction).
pub fn hmc_fixed<T: Target, R: Rng + ?Sized>(
    target: &mut T,
    state: &mut ChainState,
    n_steps: usize,
    eps: f64,
    inv_mass: &[f64],
    rng: &mut R,
) -> Result<bool> {
    if n_steps == 0 {
        return Ok(true);
    }
    let dim = state.pos.len();
    let r0: Vec<f64> = (0..dim)
        .map(|i| {
            let z: f64 = StandardNormal.sample(rng);
            z / inv_mass[i].sqrt()
        })
        .collect();
    let h0 = -state.logp + kinetic(&r0, inv_mass);
    let mut pos = state.pos.clone();
    let mut r = r0;
    let mut grad = state.grad.clone();
    let mut logp = state.logp;
    for _ in 0..n_steps {
        logp = leapfrog(target, &mut pos, &mut r, &mut grad, eps, inv_mass)?;
        if !logp.is_finite() {
            return Ok(false);
        }
    }
    let h1 = -logp + kinetic(&r, inv_mass);
    if rng.random::<f64>().ln() < h0 - h1 {
        state.pos = pos;
        state.logp = logp;
        state.grad = grad;
        Ok(true)
    } else {
        Ok(false)
    }
}

/// Energy error |H(end) − H(start)| of one fixed trajectory, for integrator
/// diagnostics.
pub fn trajectory_energy_error<T: Target>(
    target: &mut T,
    state: &ChainState,
    r0: &[f64],
    n_steps: usize,
    eps: f64,
    inv_mass: &[f64],
) -> Result<f64> {
    let h0 = -state.logp + kinetic(r0, inv_mass);
    let mut pos = state.pos.clone();
    let mut r = r0.to_vec();
    let mut grad = state.grad.clone();
    let mut logp = state.logp;
    for _ in 0..n_steps {
        logp = leapfrog(target, &mut pos, &mut r, &mut grad, eps, inv_mass)?;
    }
    let h1 = -logp + kinetic(&r, inv_mass);
    Ok((h1 - h0).abs())
}
