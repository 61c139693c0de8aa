use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use besqlab_core::analytic::{
    corollary_identity, lt_sum_decomposed, lt_sum_decomposed_quadrature, quadrature, wolf_integral,
};
use besqlab_core::samplers::{
    sample_absorption_time, sample_besq_transition, sample_besq_zero_marginal, sample_entrance_negdim, sample_gamma,
};
use besqlab_core::sde::integrate_besq;
use besqlab_core::skew::gamma_for_delta;
use besqlab_core::skew::streaming::{figure_data, run_embedding_batch, EmbeddingSpec, FigureData};
use besqlab_core::verify::{list_experiments, run_experiment, ExperimentConfig};
use besqlab_core::{Error, RandomStream};

use crate::config::RunConfig;
use crate::{Law, UsageError};

/// Seventeen significant digits, so equal files mean equal numbers.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LawParams {
    pub r: Option<f64>,
    pub delta: Option<f64>,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub mu: Option<f64>,
    pub v: Option<f64>,
}

fn need(value: Option<f64>, flag: &str, law: &str) -> Result<f64> {
    value.ok_or_else(|| UsageError(format!("law {law} needs --{flag}")).into())
}

fn law_name(law: Law) -> &'static str {
    match law {
        Law::Gamma => "gamma",
        Law::Besq0 => "besq0",
        Law::BesqTransition => "besq_transition",
        Law::EntranceNegdim => "entrance_negdim",
        Law::AbsorptionTime => "absorption_time",
    }
}

pub fn sample(cfg: &RunConfig, law: Law, p: LawParams) -> Result<()> {
    let name = law_name(law);
    let n = cfg.n.unwrap_or(1000);
    let mut s = RandomStream::new(cfg.seed, 0);
    let mut draw: Box<dyn FnMut(&mut RandomStream) -> besqlab_core::Result<f64>> = match law {
        Law::Gamma => {
            let r = need(p.r, "r", name)?;
            Box::new(move |s| sample_gamma(r, s))
        }
        Law::Besq0 => {
            let (d, x) = (need(p.delta, "delta", name)?, need(p.x, "x", name)?);
            Box::new(move |s| sample_besq_zero_marginal(d, x, s))
        }
        Law::BesqTransition => {
            let (d, y, x) = (need(p.delta, "delta", name)?, need(p.y, "y", name)?, need(p.x, "x", name)?);
            Box::new(move |s| sample_besq_transition(d, y, x, s))
        }
        Law::EntranceNegdim => {
            let (d, mu, x) = (need(p.delta, "delta", name)?, need(p.mu, "mu", name)?, need(p.x, "x", name)?);
            Box::new(move |s| sample_entrance_negdim(d, mu, x, s))
        }
        Law::AbsorptionTime => {
            let (d, v) = (need(p.delta, "delta", name)?, need(p.v, "v", name)?);
            Box::new(move |s| sample_absorption_time(d, v, s))
        }
    };
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(draw(&mut s)?);
    }
    let mut csv = String::from("value\n");
    for v in &values {
        csv.push_str(&num(*v));
        csv.push('\n');
    }
    let path = write_file(&cfg.output_dir, &format!("sample_{name}.csv"), &csv)?;

    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let zeros = values.iter().filter(|v| **v == 0.0).count();
    println!("law {name}: n = {n}, seed = {}", cfg.seed);
    println!("mean {mean:.6}  sd {:.6}  min {min:.6}  max {max:.6}  zeros {zeros}", var.sqrt());
    println!("wrote {}", path.display());
    Ok(())
}

pub fn simulate_path(cfg: &RunConfig, delta: f64, y: f64) -> Result<()> {
    let dt = cfg.dt.unwrap_or(1e-3);
    let horizon = cfg.horizon.unwrap_or(1.0);
    let mut s = RandomStream::new(cfg.seed, 0);
    let path = integrate_besq(delta, y, dt, horizon, &mut s)?;
    let mut csv = String::from("t,y\n");
    for (k, v) in path.values.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", num(path.time(k)), num(*v));
    }
    let out = write_file(&cfg.output_dir, "path.csv", &csv)?;
    println!("BESQ_{y}({delta}) on [0, {horizon}] with dt = {dt}: {} steps", path.steps());
    println!("terminal value {:.6}", path.terminal());
    match path.absorption_time {
        Some(t) => println!("absorbed at t = {t:.6}"),
        None => println!("not absorbed"),
    }
    println!("wrote {}", out.display());
    Ok(())
}

const DEFAULT_LEVELS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];
const FIGURE_ATTEMPTS: u64 = 16;

fn figure(delta: f64, v: f64, levels: &[f64], dt: f64, seed: u64) -> Result<FigureData> {
    for k in 0..FIGURE_ATTEMPTS {
        let mut s = RandomStream::replicate(seed, 1, k);
        match figure_data(delta, v, levels, dt, 4_000_000, 5000, &mut s) {
            Err(Error::HorizonExhausted { .. }) => continue,
            other => return Ok(other?),
        }
    }
    Err(Error::ResourceLimit(format!("no figure path finished within {FIGURE_ATTEMPTS} attempts")).into())
}

pub fn embed(cfg: &RunConfig, delta: f64, v: f64) -> Result<()> {
    let gamma = gamma_for_delta(delta)?;
    let dt = cfg.dt.unwrap_or(1e-4);
    let n = cfg.n.unwrap_or(1000);
    let levels = cfg.levels.clone().unwrap_or_else(|| DEFAULT_LEVELS.to_vec());
    println!("delta = {delta}, skewness gamma = 1/(1+delta) = {gamma}, v = {v}, dt = {dt}, n = {n}");

    let spec = EmbeddingSpec::adaptive(delta, v, levels.clone(), dt);
    let batch = run_embedding_batch(&spec, n, cfg.seed, 0)?;
    if batch.resampled as f64 > 0.01 * n as f64 {
        println!(
            "warning: {} of {n} replicates ran past the time limit and were redrawn on fresh streams",
            batch.resampled
        );
    }

    let mut profiles = String::from("replicate,level,yd,ymix,yv,ltau\n");
    let mut zeta = String::from("replicate,zeta,tau\n");
    for (i, o) in batch.outcomes.iter().enumerate() {
        let yv = o.yv();
        for (j, x) in levels.iter().enumerate() {
            let _ = writeln!(
                profiles,
                "{i},{},{},{},{},{}",
                num(*x),
                num(o.yd[j]),
                num(o.ymix[j]),
                num(yv[j]),
                num(o.ltau[j])
            );
        }
        let _ = writeln!(zeta, "{i},{},{}", num(o.zeta), num(o.tau));
    }

    let fig = figure(delta, v, &levels, dt.max(1e-4), cfg.seed)?;
    let mut path_csv = String::from("t,b,x,gamma_ell\n");
    for k in 0..fig.t.len() {
        let _ = writeln!(path_csv, "{},{},{},{}", num(fig.t[k]), num(fig.b[k]), num(fig.x[k]), num(fig.front[k]));
    }
    let mut frontier_csv = String::from("level,time\n");
    for (x, t) in fig.frontier_levels.iter().zip(&fig.frontier_times) {
        let _ = writeln!(frontier_csv, "{},{}", num(*x), num(*t));
    }

    let dir = &cfg.output_dir;
    for p in [
        write_file(dir, "profiles.csv", &profiles)?,
        write_file(dir, "zeta.csv", &zeta)?,
        write_file(dir, "figure.csv", &path_csv)?,
        write_file(dir, "frontier.csv", &frontier_csv)?,
    ] {
        println!("wrote {}", p.display());
    }
    let mean_zeta = batch.outcomes.iter().map(|o| o.zeta).sum::<f64>() / n as f64;
    println!("mean absorption level {mean_zeta:.4}");
    Ok(())
}

/// Prints one line per identity family; true when all are within tolerance.
pub fn identity() -> Result<bool> {
    let mut worst = 0.0f64;
    for &p in &[0.0, 0.5, 1.0, 2.0, 3.0] {
        for &t in &[0.1, 1.0, 5.0] {
            worst = worst.max(corollary_identity(p, t)?.rel_error());
        }
    }
    let ok1 = worst <= 1e-6;
    println!("gamma integral identity      max rel error {worst:.3e} (<= 1e-6) {}", verdict(ok1));

    let grid = [0.3, 1.0, 2.5];
    let mut worst = 0.0f64;
    for &mu in &grid {
        for &x in &grid {
            for &lam in &grid {
                let a = lt_sum_decomposed(1.0, mu, x, lam)?;
                let b = lt_sum_decomposed_quadrature(1.0, mu, x, lam)?;
                worst = worst.max((a - b).abs());
            }
        }
    }
    let ok2 = worst <= 1e-8;
    println!("sum transform closed vs quad max abs error {worst:.3e} (<= 1e-8) {}", verdict(ok2));

    let mut s = RandomStream::new(1, 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (a, b, q) = (10.0 * s.uniform(), 10.0 * s.uniform(), 0.1 + 4.9 * s.uniform());
        let w = wolf_integral(a, b, q)?;
        let r = quadrature::integrate(
            |u| (1.0 + a * (1.0 - u)).powf(q - 1.0) / (1.0 + b * u).powf(q + 1.0),
            0.0,
            1.0,
            1e-13,
        )?;
        worst = worst.max((w - r.value).abs() / w);
    }
    let ok3 = worst <= 1e-9;
    println!("closed integral vs quadrature max rel error {worst:.3e} (<= 1e-9) {}", verdict(ok3));
    Ok(ok1 && ok2 && ok3)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn verify(cfg: &RunConfig, id: &str) -> Result<bool> {
    let ec = ExperimentConfig {
        dt: cfg.dt,
        n: cfg.n,
        seed: cfg.seed,
        significance: cfg.significance,
        tolerance_se: cfg.tolerance_se,
        output_dir: Some(cfg.output_dir.clone()),
    };
    let report = run_experiment(id, &ec)?;
    print!("{}", report.summary());
    for a in &report.artifacts {
        println!("wrote {a}");
    }
    Ok(report.passed())
}

pub fn list(json: bool) -> Result<()> {
    let all = list_experiments();
    if json {
        println!("{}", serde_json::to_string_pretty(&all)?);
        return Ok(());
    }
    for e in all {
        println!("{:<3} dt {:<7e} n {:<6} {}", e.id, e.default_dt, e.default_n, e.title);
        println!("    {}", e.anchor);
    }
    Ok(())
}
