//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use glnem::families::{self, Family, FamilyKind, Link};
use glnem::linalg::Mat;
use glnem::manifold;
use glnem::postprocess;
use glnem::sampler::{run_chain, DrawStore, GlnemModel, ModelKind, SamplerConfig};
use glnem::simulate::{self, SimConfig};
use glnem::ssibp::{self, HyperParams};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::Distribution;

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn fit_ssibp(
    data: &glnem::data::NetworkData,
    family: Family,
    link: Link,
    d: usize,
    warmup: usize,
    draws: usize,
    init_iters: usize,
    seed: u64,
) -> DrawStore {
    let hyper = HyperParams::defaults(d, data.n);
    let config = SamplerConfig {
        warmup,
        draws,
        chains: 1,
        seed,
        init_iters,
        ..Default::default()
    };
    run_chain(data, &hyper, family, link, ModelKind::SsIbp, 1.0, 1.5, &config).unwrap()
}

/// Criterion 1: Poisson dimension selection at full scale; the posterior
/// mode must equal the generating dimension in at least 8 of 10 replicates,
/// within the stated per-replicate runtime budget.
#[test]
fn criterion_01_dimension_selection_poisson() {
    let reps: Vec<u64> = (0..10).collect();
    let results = glnem::parallel::parallel_map(reps, |r| {
        let sim = SimConfig::for_family(FamilyKind::Poisson, 100, 900 + r);
        let (data, _) = simulate::generate_glnem(&sim).unwrap();
        let t0 = std::time::Instant::now();
        let draws = fit_ssibp(&data, sim.family, sim.link, 8, 2000, 2000, 500, 40 + r);
        let secs = t0.elapsed().as_secs_f64();
        let (_, mode) = postprocess::dimension_posterior(&draws);
        (mode, secs)
    });
    let hits = results.iter().filter(|(m, _)| *m == 3).count();
    let max_secs = results.iter().map(|(_, s)| *s).fold(0.0, f64::max);
    let detail = format!(
        "mode==3 in {hits}/10 replicates, slowest replicate {max_secs:.0}s"
    );
    report("1 (Poisson dimension selection)", hits >= 8 && max_secs <= 600.0, &detail);
}

/// Criterion 2: Bernoulli parameter recovery medians over 10 replicates.
#[test]
fn criterion_02_parameter_recovery_bernoulli() {
    let reps: Vec<u64> = (0..10).collect();
    let metrics = glnem::parallel::parallel_map(reps, |r| {
        let sim = SimConfig::for_family(FamilyKind::Bernoulli, 100, 1700 + r);
        let (data, truth) = simulate::generate_glnem(&sim).unwrap();
        let draws = fit_ssibp(&data, sim.family, sim.link, 8, 1000, 1000, 500, 60 + r);
        simulate::score_fit(&draws, &truth).unwrap()
    });
    let mut tc: Vec<f64> = metrics.iter().map(|m| m.trace_corr).collect();
    let mut be: Vec<f64> = metrics.iter().map(|m| m.beta_rel_err).collect();
    let mut ue: Vec<f64> = metrics.iter().map(|m| m.low_rank_rel_err).collect();
    let (tc, be, ue) = (median(&mut tc), median(&mut be), median(&mut ue));
    let pass = tc >= 0.85 && be <= 0.05 && ue <= 0.25;
    let detail = format!(
        "median trace correlation {tc:.3} (>=0.85), beta rel err {be:.4} (<=0.05), low-rank rel err {ue:.3} (<=0.25)"
    );
    report("2 (Bernoulli parameter recovery)", pass, &detail);
}

/// Criterion 3: zero-inflated Poisson misspecification. The negative
/// binomial fit recovers the dimension; the Poisson fit overshoots; the
/// negative binomial intercept absorbs a bias near |log 0.9|.
#[test]
fn criterion_03_zero_inflation_misspecification() {
    let jobs: Vec<u64> = (0..5).collect();
    let results = glnem::parallel::parallel_map(jobs, |r| {
        let sim = SimConfig::for_family(FamilyKind::Poisson, 100, 2500 + r);
        let (data, truth) = simulate::generate_zip(&sim, 0.1).unwrap();
        let nb = Family::new(FamilyKind::NegativeBinomial);
        let nb_draws = fit_ssibp(&data, nb, Link::Log, 8, 1200, 1200, 500, 70 + r);
        let (_, nb_mode) = postprocess::dimension_posterior(&nb_draws);
        let aligned = postprocess::align_store(&nb_draws);
        let summary = postprocess::summarize(&aligned).unwrap();
        let intercept_err = (summary.beta[0].mean - truth.beta0[0]).abs();

        let pois = Family::new(FamilyKind::Poisson);
        let pois_draws = fit_ssibp(&data, pois, Link::Log, 8, 1200, 1200, 500, 80 + r);
        let (_, pois_mode) = postprocess::dimension_posterior(&pois_draws);
        (nb_mode, pois_mode, intercept_err)
    });
    let nb_hits = results.iter().filter(|(nb, _, _)| *nb == 3).count();
    let pois_over = results.iter().filter(|(_, p, _)| *p > 3).count();
    let mut errs: Vec<f64> = results.iter().map(|(_, _, e)| *e).collect();
    let med_err = median(&mut errs);
    let err_ok = (med_err - 0.105f64).abs() <= 0.1;
    let pass = nb_hits >= 4 && pois_over >= 4 && err_ok;
    let detail = format!(
        "negbin mode==3 in {nb_hits}/5, poisson mode>3 in {pois_over}/5, median intercept abs err {med_err:.3} (0.105±0.1)"
    );
    report("3 (zero-inflation misspecification)", pass, &detail);
}

/// Criterion 4: prior tail bound on the active-dimension count with the
/// theorem's own hyperparameters.
#[test]
fn criterion_04_tail_bound() {
    let d = 20usize;
    let delta = 6.0 / (d as f64).ln();
    let hyper = HyperParams {
        d,
        a: 0.5,
        kappa: (d as f64).powf(1.0 + delta),
        b_slab: 1.0,
        v0: 0.0,
        sigma_beta: 1.0,
    };
    let mut rng = StdRng::seed_from_u64(4040);
    let n = 100_000;
    let mut exceed = vec![0usize; 6];
    for _ in 0..n {
        let s = ssibp::sample_prior(&hyper, &mut rng);
        let k = s.z.iter().filter(|&&z| z == 1).count();
        for t in 1..=5 {
            if k > t {
                exceed[t] += 1;
            }
        }
    }
    let mut pass = true;
    let mut worst = String::new();
    for t in 1..=5usize {
        let p = exceed[t] as f64 / n as f64;
        let bound = 2.0 * (-(t as f64) * (delta / 6.0) * (d as f64).ln()).exp();
        let se = (p.max(1e-9) * (1.0 - p.min(1.0 - 1e-9)) / n as f64).sqrt();
        if p > bound + 3.0 * se {
            pass = false;
            worst = format!("t={t}: {p:.5} > {bound:.5}");
        }
    }
    let detail = if pass {
        format!("P(active>t) within 2e^(-t(delta/6)log d) for t=1..5 at {n} draws")
    } else {
        worst
    };
    report("4 (prior tail bound)", pass, &detail);
}

/// Criterion 5: stochastic ordering of the small-ball probabilities under
/// the default prior.
#[test]
fn criterion_05_stochastic_ordering() {
    let hyper = HyperParams::defaults(8, 100);
    let mut rng = StdRng::seed_from_u64(5050);
    let n = 100_000;
    let mut hits = vec![0usize; hyper.d];
    for _ in 0..n {
        let s = ssibp::sample_prior(&hyper, &mut rng);
        let lam = s.lambda();
        for h in 0..hyper.d {
            if lam[h].abs() <= 0.1 {
                hits[h] += 1;
            }
        }
    }
    let mut pass = true;
    let mut detail = String::from("P(|lambda_h|<=0.1) nondecreasing in h");
    for h in 1..hyper.d {
        let p_prev = hits[h - 1] as f64 / n as f64;
        let p = hits[h] as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-6);
        if p + 3.0 * se < p_prev {
            pass = false;
            detail = format!("violated at h={h}: {p_prev:.4} -> {p:.4}");
        }
    }
    report("5 (stochastic ordering)", pass, &detail);
}

fn toy_instance(
    rng: &mut StdRng,
    kind: FamilyKind,
) -> (glnem::data::NetworkData, Family, Link) {
    let family = Family::new(kind);
    let link = match kind {
        FamilyKind::Bernoulli => Link::Logit,
        FamilyKind::Gaussian => Link::Identity,
        _ => Link::Log,
    };
    let n = 6;
    let p = 2;
    let aux = families::AuxParams::new(0.8, 1.5).unwrap();
    let mut y = Mat::zeros(n, n);
    let mut xs = vec![Mat::zeros(n, n); p];
    for i in 0..n {
        for j in i..n {
            for (k, xk) in xs.iter_mut().enumerate() {
                let v = if k == 0 { 1.0 } else { rng.random_range(-1.0..1.0) };
                *xk.at_mut(i, j) = v;
                *xk.at_mut(j, i) = v;
            }
            let eta: f64 = rng.random_range(-0.8..0.8);
            let mu = families::inverse_link(link, eta);
            let v = families::sample(family, mu, &aux, rng);
            *y.at_mut(i, j) = v;
            *y.at_mut(j, i) = v;
        }
    }
    (glnem::data::NetworkData::new(y, xs, false).unwrap(), family, link)
}

/// Criterion 6: the posterior gradient (including the QR pullback) matches
/// central finite differences for every family.
#[test]
fn criterion_06_gradient_correctness() {
    use glnem::hmc::Target;
    let mut rng = StdRng::seed_from_u64(606);
    let mut worst: f64 = 0.0;
    for kind in [
        FamilyKind::Bernoulli,
        FamilyKind::Gaussian,
        FamilyKind::Poisson,
        FamilyKind::NegativeBinomial,
        FamilyKind::Tweedie,
    ] {
        let (data, family, link) = toy_instance(&mut rng, kind);
        let mut hyper = HyperParams::defaults(2, data.n);
        hyper.b_slab = 1.5;
        let mut model =
            GlnemModel::new(&data, family, link, hyper, ModelKind::SsIbp, 1.0, 1.5).unwrap();
        let dim = model.layout.dim();
        let mut pos: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.8..0.8)).collect();
        let z: Vec<u8> = (0..2).map(|_| u8::from(rng.random::<f64>() < 0.7)).collect();
        model.set_z(&z);
        let mut grad = vec![0.0; dim];
        model.logp_grad(&pos, &mut grad).unwrap();
        for c in 0..dim {
            let h = 1e-5;
            let orig = pos[c];
            let mut g = vec![0.0; dim];
            pos[c] = orig + h;
            let fp = model.logp_grad(&pos, &mut g).unwrap();
            pos[c] = orig - h;
            let fm = model.logp_grad(&pos, &mut g).unwrap();
            pos[c] = orig;
            let fd = (fp - fm) / (2.0 * h);
            let scale = fd.abs().max(grad[c].abs()).max(1e-2);
            worst = worst.max((grad[c] - fd).abs() / scale);
        }
    }
    let pass = worst <= 1e-5;
    report(
        "6 (gradient correctness)",
        pass,
        &format!("worst relative error {worst:.2e} (<=1e-5) across five families"),
    );
}

/// Criterion 7: membership invariants of the QR construction and the
/// Fréchet mean at scale.
#[test]
fn criterion_07_manifold_invariants() {
    let mut rng = StdRng::seed_from_u64(707);
    let mut worst: f64 = 0.0;
    let residual = |u: &Mat| -> f64 {
        let d = u.cols();
        let gram = u.tr_matmul(u);
        let mut r: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let t = if i == j { 1.0 } else { 0.0 };
                r = r.max((gram.at(i, j) - t).abs());
            }
        }
        for j in 0..d {
            let s: f64 = (0..u.rows()).map(|i| u.at(i, j)).sum();
            r = r.max(s.abs());
        }
        r
    };
    let mut bases = Vec::new();
    for trial in 0..1000 {
        let n = rng.random_range(5..=200);
        let d = rng.random_range(1..=10.min(n - 1));
        let b = Mat::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
        let u = manifold::centered_orthogonalize(&b).unwrap().into_matrix();
        worst = worst.max(residual(&u));
        if trial < 40 {
            bases.push(u);
        }
    }
    // Fréchet means of same-shape groups.
    let mut rng2 = StdRng::seed_from_u64(708);
    for _ in 0..50 {
        let n = rng2.random_range(10..=60);
        let d = rng2.random_range(1..=6);
        let draws: Vec<Mat> = (0..5)
            .map(|_| {
                let b = Mat::from_fn(n, d, |_, _| rng2.random_range(-2.0..2.0));
                manifold::centered_orthogonalize(&b).unwrap().into_matrix()
            })
            .collect();
        if let Ok(mean) = manifold::frechet_mean(&draws) {
            worst = worst.max(residual(mean.matrix()));
        }
    }
    let pass = worst <= 1e-10;
    report(
        "7 (manifold invariants)",
        pass,
        &format!("worst orthonormality/centering residual {worst:.2e} (<=1e-10)"),
    );
}

/// Criterion 8: Tweedie series density against the latent-count brute force
/// and unit total mass.
#[test]
fn criterion_08_tweedie_density_oracle() {
    use glnem::special::ln_gamma;
    let brute = |y: f64, mu: f64, phi: f64, power: f64| -> f64 {
        let (lambda, alpha, tau) = families::tweedie_cpg_params(mu, phi, power);
        let mut total = 0.0;
        for j in 1..=3000 {
            let j = j as f64;
            let log_pois = -lambda + j * lambda.ln() - ln_gamma(j + 1.0);
            let shape = j * alpha;
            let log_gamma_pdf =
                (shape - 1.0) * y.ln() - y / tau - ln_gamma(shape) - shape * tau.ln();
            total += (log_pois + log_gamma_pdf).exp();
        }
        total.ln()
    };
    let mut rng = StdRng::seed_from_u64(808);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let y: f64 = rng.random_range(0.05..10.0);
        let mu: f64 = rng.random_range(0.2..5.0);
        let phi: f64 = rng.random_range(0.3..3.0);
        let power: f64 = rng.random_range(1.05..1.95);
        let series = families::tweedie_log_density(y, mu, phi, power).unwrap();
        let reference = brute(y, mu, phi, power);
        worst = worst.max((series - reference).abs() / reference.abs().max(1.0));
    }
    let series_ok = worst <= 1e-8;

    // Total mass: zero atom plus quadrature over (0, 50μ].
    let mut mass_worst: f64 = 0.0;
    for &(mu, phi, power) in &[
        (1.0, 1.0, 1.5),
        (2.0, 0.5, 1.3),
        (0.7, 2.0, 1.7),
        (1.5, 1.2, 1.9),
        (3.0, 0.8, 1.2),
    ] {
        let mass = tweedie_total_mass(mu, phi, power);
        mass_worst = mass_worst.max((mass - 1.0).abs());
    }
    let mass_ok = mass_worst <= 1e-4;
    // The near-Poisson edge keeps unit mass at its looser tolerance.
    let edge = (tweedie_total_mass(1.0, 1.0, 1.01) - 1.0).abs();
    let edge_ok = edge <= 1e-3;
    let pass = series_ok && mass_ok && edge_ok;
    let detail = format!(
        "series worst rel err {worst:.2e} (<=1e-8), mass dev {mass_worst:.2e} (<=1e-4), power=1.01 dev {edge:.2e} (<=1e-3)"
    );
    report("8 (Tweedie density oracle)", pass, &detail);
}

fn tweedie_total_mass(mu: f64, phi: f64, power: f64) -> f64 {
    let zero = families::tweedie_log_density(0.0, mu, phi, power).unwrap().exp();
    let alpha = (2.0 - power) / (power - 1.0);
    let upper = 50.0 * mu;
    let density = |y: f64| families::tweedie_log_density(y, mu, phi, power).unwrap().exp();
    let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize| -> f64 {
        let n = if n % 2 == 0 { n } else { n + 1 };
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        s * h / 3.0
    };
    let integral = if alpha < 1.0 {
        let g = |u: f64| {
            let y = u.powf(1.0 / alpha);
            density(y) * y / (alpha * u)
        };
        simpson(&g, 1e-12, upper.powf(alpha), 60_000)
    } else {
        simpson(&density, 1e-12, upper, 60_000)
    };
    zero + integral
}

/// Criterion 9: signed-permutation alignment recovery and exhaustive
/// optimality at d=3.
#[test]
fn criterion_09_alignment() {
    let mut rng = StdRng::seed_from_u64(909);
    let b = Mat::from_fn(20, 5, |_, _| rng.random_range(-2.0..2.0));
    let u = manifold::centered_orthogonalize(&b).unwrap().into_matrix();
    let lambda: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
    let mut recovered = 0usize;
    for _ in 0..100 {
        let mut perm: Vec<usize> = (0..5).collect();
        for i in (1..5).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        let signs: Vec<f64> =
            (0..5).map(|_| if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 }).collect();
        let scrambled = Mat::from_fn(20, 5, |i, j| signs[j] * u.at(i, perm[j]));
        let lam_s: Vec<f64> = (0..5).map(|j| lambda[perm[j]]).collect();
        let a = postprocess::align_draw(&scrambled, &lam_s, &u);
        if a.u.max_abs_diff(&u) < 1e-10 && a.lambda == lambda {
            recovered += 1;
        }
    }

    // Exhaustive optimality at d=3.
    let mut exhaustive_ok = true;
    for _ in 0..25 {
        let b1 = Mat::from_fn(9, 3, |_, _| rng.random_range(-2.0..2.0));
        let b2 = Mat::from_fn(9, 3, |_, _| rng.random_range(-2.0..2.0));
        let u_ref = manifold::centered_orthogonalize(&b1).unwrap().into_matrix();
        let u_s = manifold::centered_orthogonalize(&b2).unwrap().into_matrix();
        let a = postprocess::align_draw(&u_s, &[1.0, 2.0, 3.0], &u_ref);
        let dist = |m: &Mat| -> f64 {
            let mut acc = 0.0;
            for i in 0..9 {
                for j in 0..3 {
                    let z = m.at(i, j) - u_ref.at(i, j);
                    acc += z * z;
                }
            }
            acc
        };
        let got = dist(&a.u);
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut best = f64::INFINITY;
        for perm in perms {
            for mask in 0..8u32 {
                let cand = Mat::from_fn(9, 3, |i, j| {
                    let s = if mask >> j & 1 == 1 { -1.0 } else { 1.0 };
                    s * u_s.at(i, perm[j])
                });
                best = best.min(dist(&cand));
            }
        }
        if (got - best).abs() > 1e-10 {
            exhaustive_ok = false;
        }
    }
    let pass = recovered == 100 && exhaustive_ok;
    let detail = format!(
        "{recovered}/100 signed permutations recovered exactly; exhaustive d=3 optimality {}",
        if exhaustive_ok { "verified" } else { "violated" }
    );
    report("9 (alignment)", pass, &detail);
}

/// Solves the small SPD system A x = b by Gaussian elimination (test-side
/// conjugate-posterior oracle).
fn solve_spd(a: &mut Vec<Vec<f64>>, b: &mut Vec<f64>) {
    let n = b.len();
    for k in 0..n {
        let piv = a[k][k];
        for j in k..n {
            a[k][j] /= piv;
        }
        b[k] /= piv;
        for i in 0..n {
            if i != k && a[i][k] != 0.0 {
                let f = a[i][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
}

/// Criterion 10a: with the latent space disabled and known dispersion, the
/// posterior mean of β matches the closed-form conjugate posterior.
#[test]
fn criterion_10a_conjugate_linear_model() {
    let mut rng = StdRng::seed_from_u64(1010);
    let n = 30;
    let p = 3;
    let phi: f64 = 4.0;
    let sigma_beta = 10.0;
    let beta_true = [1.2, -0.6, 0.4];
    let mut y = Mat::zeros(n, n);
    let mut xs = vec![Mat::zeros(n, n); p];
    for i in 0..n {
        for j in i..n {
            let mut eta = 0.0;
            for (k, xk) in xs.iter_mut().enumerate() {
                let v = if k == 0 { 1.0 } else { rng.random_range(-1.0..1.0) };
                *xk.at_mut(i, j) = v;
                *xk.at_mut(j, i) = v;
                eta += beta_true[k] * v;
            }
            let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
            let v = eta + phi.sqrt() * z;
            *y.at_mut(i, j) = v;
            *y.at_mut(j, i) = v;
        }
    }
    let data = glnem::data::NetworkData::new(y, xs, false).unwrap();

    // Closed-form conjugate posterior mean over dyad rows.
    let dyads = data.dyads();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for &(i, j) in &dyads {
        for a in 0..p {
            for b in 0..p {
                xtx[a][b] += data.x[a].at(i, j) * data.x[b].at(i, j) / phi;
            }
            xty[a] += data.x[a].at(i, j) * data.y.at(i, j) / phi;
        }
    }
    for a in 0..p {
        xtx[a][a] += 1.0 / (sigma_beta * sigma_beta);
    }
    let mut a = xtx;
    let mut posterior_mean = xty;
    solve_spd(&mut a, &mut posterior_mean);

    // Fit with d = 0 (no latent space) and known dispersion.
    let family = Family::with_known_dispersion(FamilyKind::Gaussian);
    let hyper = HyperParams {
        d: 0,
        a: 1.0,
        kappa: 0.0,
        b_slab: 1.0,
        v0: 0.0,
        sigma_beta,
    };
    let config = SamplerConfig {
        warmup: 800,
        draws: 3000,
        chains: 1,
        seed: 11,
        init_iters: 200,
        ..Default::default()
    };
    let draws = run_chain(
        &data,
        &hyper,
        family,
        Link::Identity,
        ModelKind::SsIbp,
        phi,
        1.5,
        &config,
    )
    .unwrap();
    let s_total = draws.len() as f64;
    let mut pass = true;
    let mut detail = String::new();
    for k in 0..p {
        let mean: f64 =
            (0..draws.len()).map(|s| draws.beta_row(s)[k]).sum::<f64>() / s_total;
        let var: f64 = (0..draws.len())
            .map(|s| (draws.beta_row(s)[k] - mean).powi(2))
            .sum::<f64>()
            / (s_total - 1.0);
        // Conservative effective sample size for the MC standard error.
        let se = (var / (s_total / 5.0)).sqrt();
        let dev = (mean - posterior_mean[k]).abs();
        if dev > 3.0 * se {
            pass = false;
        }
        detail.push_str(&format!("beta{k}: {dev:.4} vs 3se {:.4}; ", 3.0 * se));
    }
    report("10a (conjugate linear-model check)", pass, &detail);
}

/// Criterion 10b: simulation-based calibration of the full Gibbs sampler on
/// a small Bernoulli model; the rank statistic of β₁ must be uniform.
#[test]
fn criterion_10b_simulation_based_calibration() {
    let n = 10usize;
    let d = 2usize;
    let p = 2usize;
    let hyper = HyperParams {
        d,
        a: 0.5,
        kappa: 2.0f64.powf(1.1),
        b_slab: 1.5,
        v0: 0.0,
        sigma_beta: 1.5,
    };
    let family = Family::new(FamilyKind::Bernoulli);
    let link = Link::Logit;
    let reps: Vec<u64> = (0..200).collect();
    let thin = 6usize;
    let kept = 64usize;
    let hyper_ref = &hyper;
    let ranks = glnem::parallel::parallel_map(reps, |r| {
        let mut rng = StdRng::seed_from_u64(300_000 + r);
        // Draw truth from the prior.
        let prior = ssibp::sample_prior(hyper_ref, &mut rng);
        let lambda = prior.lambda();
        let b = Mat::from_fn(n, d, |_, _| {
            let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
            z
        });
        let u = manifold::centered_orthogonalize(&b).unwrap().into_matrix();
        let beta_true: Vec<f64> = (0..p)
            .map(|_| {
                let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
                hyper_ref.sigma_beta * z
            })
            .collect();
        let mut y = Mat::zeros(n, n);
        let mut xs = vec![Mat::zeros(n, n); p];
        for i in 0..n {
            for j in i..n {
                for (k, xk) in xs.iter_mut().enumerate() {
                    let v = if k == 0 { 1.0 } else { rng.random_range(-1.0..1.0) };
                    *xk.at_mut(i, j) = v;
                    *xk.at_mut(j, i) = v;
                }
                let mut eta = 0.0;
                for k in 0..p {
                    eta += beta_true[k] * xs[k].at(i, j);
                }
                for h in 0..d {
                    eta += lambda[h] * u.at(i, h) * u.at(j, h);
                }
                let mu = families::inverse_link(link, eta);
                let v = families::sample(family, mu, &aux_unit(), &mut rng);
                *y.at_mut(i, j) = v;
                *y.at_mut(j, i) = v;
            }
        }
        let data = glnem::data::NetworkData::new(y, xs, false).unwrap();
        let config = SamplerConfig {
            warmup: 300,
            draws: thin * kept,
            chains: 1,
            seed: 700_000 + r,
            init_iters: 100,
            ..Default::default()
        };
        let draws = run_chain(
            &data,
            hyper_ref,
            family,
            link,
            ModelKind::SsIbp,
            1.0,
            1.5,
            &config,
        )
        .unwrap();
        // Rank of the true intercept among thinned posterior draws.
        let mut rank = 0usize;
        for t in 0..kept {
            if draws.beta_row(t * thin)[0] < beta_true[0] {
                rank += 1;
            }
        }
        rank
    });
    // Bin the 0..=kept ranks into 13 bins of 5 and test uniformity.
    let bins = 13usize;
    let mut counts = vec![0usize; bins];
    for &r in &ranks {
        counts[(r * bins) / (kept + 1)] += 1;
    }
    let expect = ranks.len() as f64 / bins as f64;
    let chi2: f64 =
        counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    let p_value = glnem::special::chi_square_sf(chi2, bins - 1);
    let pass = p_value > 0.01;
    report(
        "10b (simulation-based calibration)",
        pass,
        &format!("rank-uniformity chi2 {chi2:.1} on {bins} bins, p = {p_value:.3} (>0.01)"),
    );
}

fn aux_unit() -> families::AuxParams {
    families::AuxParams::unit()
}

/// Criterion 11: fixed-dimension baselines on Gaussian networks follow the
/// expected qualitative pattern, and the criteria match independent
/// two-pass computations.
#[test]
fn criterion_11_selection_baselines() {
    // Exactness against independent two-pass references.
    let mut rng = StdRng::seed_from_u64(1111);
    let (s, dyads) = (60, 23);
    let per: Vec<f64> = (0..s * dyads).map(|_| rng.random_range(-6.0..-0.2)).collect();
    let waic_got = glnem::selection::waic(&per, s, dyads);
    let mut lppd = 0.0;
    let mut penalty = 0.0;
    for dy in 0..dyads {
        let col: Vec<f64> = (0..s).map(|i| per[i * dyads + dy]).collect();
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = col.iter().map(|v| (v - max).exp()).sum();
        lppd += max + (sum / s as f64).ln();
        let mean = col.iter().sum::<f64>() / s as f64;
        penalty +=
            col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (s as f64 - 1.0);
    }
    let waic_ref = -2.0 * lppd + 2.0 * penalty;
    let exact_waic = (waic_got - waic_ref).abs() <= 1e-8 * waic_ref.abs().max(1.0);

    let n = 100;
    let (dck, pck) = (4, 5);
    let ll_hat = -1234.5678;
    let aic_ref = -2.0 * ll_hat + 2.0 * (n * dck + dck + pck) as f64;
    let bic_ref =
        -2.0 * ll_hat + ((n * dck + dck + pck) as f64) * (n as f64 * 99.0 / 2.0).ln();
    let exact_aic = (glnem::selection::aic(ll_hat, n, dck, pck) - aic_ref).abs() < 1e-8;
    let exact_bic = (glnem::selection::bic(ll_hat, n, dck, pck) - bic_ref).abs() < 1e-8;

    // Qualitative selection pattern on Gaussian replicates.
    let reps: Vec<u64> = (0..5).collect();
    let outcomes = glnem::parallel::parallel_map(reps, |r| {
        let sim = SimConfig::for_family(FamilyKind::Gaussian, 100, 5500 + r);
        let (data, _) = simulate::generate_glnem(&sim).unwrap();
        let config = SamplerConfig {
            warmup: 500,
            draws: 500,
            chains: 1,
            seed: 90 + r,
            init_iters: 200,
            ..Default::default()
        };
        let grid: Vec<usize> = (1..=6).collect();
        let report = glnem::selection::selection_report(
            &data,
            sim.family,
            sim.link,
            &grid,
            None,
            10.0,
            &config,
        )
        .unwrap();
        (report.bic_choice, report.dic_choice, report.waic_choice, report.aic_choice)
    });
    let bic_ok = outcomes.iter().filter(|(b, _, _, _)| *b <= 3).count();
    let dic_ok = outcomes.iter().filter(|(_, d, _, _)| *d >= 3).count();
    let waic_ok = outcomes.iter().filter(|(_, _, w, _)| *w >= 3).count();
    let pattern = bic_ok >= 3 && dic_ok >= 3 && waic_ok >= 3;
    let pass = exact_waic && exact_aic && exact_bic && pattern;
    let detail = format!(
        "two-pass match: waic {exact_waic}, aic {exact_aic}, bic {exact_bic}; pattern over 5 reps: bic<=3 in {bic_ok}, dic>=3 in {dic_ok}, waic>=3 in {waic_ok} (choices {outcomes:?})"
    );
    report("11 (selection baselines)", pass, &detail);
}

/// DIC two-pass exactness rides along with criterion 11's references.
#[test]
fn criterion_11_dic_reference() {
    let lls = [-100.0, -103.0, -98.5, -101.25];
    let store = {
        let mut rng = StdRng::seed_from_u64(3);
        let b = Mat::from_fn(5, 1, |_, _| rng.random_range(-1.0..1.0));
        let u = manifold::centered_orthogonalize(&b).unwrap().into_matrix();
        let mut us = Vec::new();
        for _ in 0..lls.len() {
            us.extend_from_slice(u.data());
        }
        DrawStore {
            n: 5,
            d: 1,
            p: 1,
            chains: 1,
            draws_per_chain: lls.len(),
            beta: vec![0.0; lls.len()],
            lambda: vec![1.0; lls.len()],
            z: vec![1; lls.len()],
            u: us,
            phi: vec![1.0; lls.len()],
            power: vec![1.5; lls.len()],
            loglik: lls.to_vec(),
            log_post: lls.to_vec(),
            dyad_loglik: None,
            dyads: vec![(0, 1)],
            divergences: 0,
            family: FamilyKind::Gaussian,
            link: Link::Identity,
            seed: 0,
        }
    };
    let ll_hat = -99.0;
    let mean = lls.iter().sum::<f64>() / lls.len() as f64;
    let reference = -2.0 * ll_hat + 2.0 * (2.0 * (ll_hat - mean));
    let got = glnem::selection::dic(&store, ll_hat);
    let pass = (got - reference).abs() < 1e-8;
    report("11.dic (two-pass reference)", pass, &format!("{got} vs {reference}"));
}
