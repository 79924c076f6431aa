//! End-to-end checks of the `glnem` binary: exit codes, a full
//! simulate → fit → select → gof pipeline on a small network, and sign
//! recovery of the generating coefficients.

use std::path::{Path, PathBuf};
use std::process::Command;

fn glnem() -> Command {
    Command::new(env!("CARGO_BIN_EXE_glnem"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("glnem_bin_{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn help_and_error_exit_codes() {
    let out = glnem().arg("--help").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("usage: glnem"));

    // Unknown command: configuration error, exit 2.
    let out = glnem().arg("transmogrify").output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Incompatible family/link: exit 2.
    let dir = tmp("cfg");
    std::fs::write(dir.join("bad.cfg"), "family = poisson\nlink = logit\ndata = x.csv\n").unwrap();
    let out = glnem()
        .args(["fit", "--config"])
        .arg(dir.join("bad.cfg"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Missing data file: exit 3.
    let out = glnem()
        .args(["fit", "--data", "/nonexistent/net.csv", "--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    // Malformed data (duplicate dyad): exit 3 with a line number.
    std::fs::write(dir.join("dup.csv"), "i,j,y\n0,1,1\n1,0,1\n").unwrap();
    let out = glnem()
        .args(["fit", "--data"])
        .arg(dir.join("dup.csv"))
        .args(["--out"])
        .arg(dir.join("out2"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate dyad"));
}

fn write_cfg(path: &Path, body: &str) {
    std::fs::write(path, body).unwrap();
}

#[test]
fn pipeline_runs_and_recovers_coefficient_signs() {
    let dir = tmp("pipe");
    let sim_out = dir.join("sim");
    let status = glnem()
        .args(["simulate", "--seed", "9", "--out"])
        .arg(&sim_out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(sim_out.join("network.csv").exists());
    assert!(sim_out.join("truth_params.csv").exists());
    assert!(sim_out.join("truth_latent_positions.csv").exists());

    // Small fresh Bernoulli network for the fit (fast at n = 40).
    let cfg = dir.join("sim.cfg");
    write_cfg(
        &cfg,
        &format!(
            "sim.family = bernoulli\nsim.n = 40\nsim.seed = 4\nout = {}\n",
            dir.join("bern").display()
        ),
    );
    assert!(glnem().args(["simulate", "--config"]).arg(&cfg).status().unwrap().success());

    let fit_cfg = dir.join("fit.cfg");
    write_cfg(
        &fit_cfg,
        &format!(
            "family = bernoulli\ndata = {}\nout = {}\nhyper.d = 4\n\
             sampler.warmup = 250\nsampler.draws = 250\nsampler.init_iters = 150\nsampler.seed = 3\n",
            dir.join("bern/network.csv").display(),
            dir.join("fit").display()
        ),
    );
    assert!(glnem().args(["fit", "--config"]).arg(&fit_cfg).status().unwrap().success());

    // The generating design uses beta = (-1, -0.5, 0.5, 0, 0); the posterior
    // means must recover the nonzero signs decisively.
    let summary = std::fs::read_to_string(dir.join("fit/summary_params.csv")).unwrap();
    let mean_of = |name: &str| -> f64 {
        summary
            .lines()
            .find(|l| l.starts_with(name))
            .unwrap_or_else(|| panic!("{name} missing"))
            .split(',')
            .nth(1)
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(mean_of("beta.1,") < 0.0, "intercept sign");
    assert!(mean_of("beta.2,") < 0.0, "beta2 sign");
    assert!(mean_of("beta.3,") > 0.0, "beta3 sign");

    // gof on the fitted draws.
    let gof_cfg = dir.join("gof.cfg");
    write_cfg(
        &gof_cfg,
        &format!(
            "data = {}\nout = {}\ngof.subsample = 40\n",
            dir.join("bern/network.csv").display(),
            dir.join("fit").display()
        ),
    );
    assert!(glnem().args(["gof", "--config"]).arg(&gof_cfg).status().unwrap().success());
    assert!(dir.join("fit/gof_transitivity.csv").exists());
    assert!(dir.join("fit/gof_degrees.csv").exists());

    // postprocess reproduces the aligned draws from the stored file.
    assert!(glnem()
        .args(["postprocess", "--config"])
        .arg(&fit_cfg)
        .status()
        .unwrap()
        .success());

    // select on a coarse grid with short chains.
    let sel_cfg = dir.join("sel.cfg");
    write_cfg(
        &sel_cfg,
        &format!(
            "family = bernoulli\ndata = {}\nout = {}\nselect.d_min = 1\nselect.d_max = 2\n\
             sampler.warmup = 120\nsampler.draws = 120\nsampler.init_iters = 60\nsampler.seed = 5\n",
            dir.join("bern/network.csv").display(),
            dir.join("sel").display()
        ),
    );
    assert!(glnem().args(["select", "--config"]).arg(&sel_cfg).status().unwrap().success());
    let sel = std::fs::read_to_string(dir.join("sel/selection.csv")).unwrap();
    assert_eq!(sel.lines().filter(|l| !l.starts_with('#') && !l.starts_with("d,")).count(), 2);
}
