//! Acceptance suite. Runs every criterion, prints one PASS/FAIL/SKIP line per
//! criterion and exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use coxrate::diagnose::{pearson_residuals, VarianceCorrection};
use coxrate::estimate::{
    bootstrap_ci, estimating_function, godambe_matrix, jacobian, l_closed_form, newton_solve, FitData, McSamples, NewtonOptions,
};
use coxrate::posterior::{forecast_intensity, mala_log_acceptance, run_chain, run_monitor, CellModel, MalaConfig, MalaState, NextInterval};
use coxrate::rate::{mc_rate_moments, mean_ci, rate_mean_approx, rate_var_approx, sample_rates, var_ci};
use coxrate::rng::{derive_seed, stream, Purpose};
use coxrate::scenario::{decreasing_spec, groningen_like, groningen_params, increasing_spec, slochteren_spec, FieldScenario};
use coxrate::sim::simulate_with_mean;
use coxrate::state::{gamma_closed_form, gamma_euler_step, MomentSpec};
use coxrate::{Cell, CountsField, Field, ModelParams, ParamMode, SpaceTimeGrid};
use coxrate_cli::binning::bin_catalogue;
use coxrate_cli::config::RunConfig;
use coxrate_cli::production::field_total;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

enum Verdict {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

fn judge(pass: bool, detail: String) -> Outcome {
    Outcome {
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        detail,
    }
}

const SIGMA2: f64 = 7.17 * 7.17;

fn groningen(n: usize, m: usize, sigma2: f64, total: f64) -> FieldScenario {
    groningen_like(n, n, m, groningen_params(), sigma2, total).expect("scenario")
}

fn simulate(sc: &FieldScenario, params: &ModelParams, seed: u64) -> CountsField {
    simulate_with_mean(&sc.mean, sc.sigma2, &sc.covariates, params, &sc.grid, seed)
        .expect("simulation")
        .counts
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let mut rng = stream(1, Purpose::Synthetic, 1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let len = rng.random_range(2..60);
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-5.0..5.0)).collect();
        let alpha = rng.random_range(0.01..2.0);
        let gamma0 = rng.random_range(0.0..10.0);
        let step = rng.random_range(0.01..2.0);
        let closed = gamma_closed_form(&x, alpha, gamma0, step).expect("closed form").gamma;
        let mut g = gamma0;
        for k in 1..len {
            g = gamma_euler_step(g, x[k - 1], x[k], alpha, step).expect("euler");
            worst = worst.max((closed[k] - g).abs() / g.abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    judge(
        worst <= 1e-12 && secs < 1.0,
        format!("max relative error {worst:.2e} over 1000 instances in {secs:.3} s"),
    )
}

/// Counts of (means, covariances) checked and failing the 3 SE band.
fn moments_vs_mc(spec: &MomentSpec, n: usize, seed: u64) -> (usize, usize, Vec<String>) {
    let m = spec.last_index();
    let sd = spec.sigma2().sqrt();
    let mut rng = stream(seed, Purpose::Synthetic, 2);
    let draws: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let x: Vec<f64> = spec
                .mean_series()
                .iter()
                .map(|&mu| mu + sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            gamma_closed_form(&x, spec.alpha(), spec.gamma0(), spec.step()).expect("closed form").gamma
        })
        .collect();
    let nf = n as f64;
    let exact: Vec<f64> = (0..=m).map(|k| spec.state_mean(k).expect("mean")).collect();
    let mut checked = 0;
    let mut failures = Vec::new();
    for k in 1..=m {
        let v: Vec<f64> = draws.iter().map(|d| d[k]).collect();
        let mean = v.iter().sum::<f64>() / nf;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        checked += 1;
        if (mean - exact[k]).abs() >= 3.0 * (var / nf).sqrt() {
            failures.push(format!("mean k={k}"));
        }
    }
    let idx: Vec<usize> = {
        let mut v = vec![1, m / 4, m / 2, 3 * m / 4, m];
        v.retain(|&k| k >= 1);
        v.dedup();
        v
    };
    for (a, &k) in idx.iter().enumerate() {
        for &l in &idx[a..] {
            // Centred at the exact means, so the product mean is unbiased for the covariance.
            let prod: Vec<f64> = draws.iter().map(|d| (d[k] - exact[k]) * (d[l] - exact[l])).collect();
            let cov = prod.iter().sum::<f64>() / nf;
            let se = (prod.iter().map(|p| (p - cov).powi(2)).sum::<f64>() / (nf - 1.0) / nf).sqrt();
            let target = spec.state_cov(k, l).expect("cov");
            checked += 1;
            if (cov - target).abs() >= 3.0 * se {
                failures.push(format!("cov ({k},{l})"));
            }
        }
    }
    (checked, failures.len(), failures)
}

fn ac2() -> Outcome {
    let start = Instant::now();
    let constant = MomentSpec::new(vec![5.0; 51], 0.01, 0.2, 2.0, 0.1).expect("spec");
    let scenarios = [
        ("table1", slochteren_spec()),
        ("increasing", increasing_spec(50)),
        ("constant", constant),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (i, (name, spec)) in scenarios.iter().enumerate() {
        let (checked, failed, which) = moments_vs_mc(spec, 100_000, 20 + i as u64);
        ok &= failed == 0;
        parts.push(format!("{name}: {}/{checked} within 3 SE{}", checked - failed, if which.is_empty() { String::new() } else { format!(" (outside: {})", which.join(", ")) }));
    }
    let secs = start.elapsed().as_secs_f64();
    judge(ok && secs < 30.0, format!("{}; {secs:.1} s", parts.join("; ")))
}

fn ac3() -> Outcome {
    let cov = |s2: f64| {
        MomentSpec::new(vec![3.0, 2.0, 1.0], 1.0, 0.0, s2, 1.0)
            .expect("spec")
            .state_cov(1, 2)
            .expect("cov")
    };
    let (a, b, c) = (cov(0.5), cov(1.0), cov(2.0));
    judge(
        a < 0.0 && b.abs() < 1e-12 && c > 0.0,
        format!("Cov(G1,G2) = {a:.6} at 0.5, {b:.2e} at 1, {c:.6} at 2"),
    )
}

fn ac4() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    // Same trajectories as `coxrate moments` under its default seed.
    let seed = derive_seed(RunConfig::default().seed, Purpose::RateTrajectory, 0);
    for (name, spec) in [("fig1", increasing_spec(50)), ("fig2", decreasing_spec(50))] {
        let samples = sample_rates(&spec, 500, seed).expect("samples");
        let (mut mean_in, mut var_in) = (0, 0);
        for k in 1..=50 {
            let s = &samples.samples[k];
            mean_in += mean_ci(s, 0.95).expect("ci").contains(rate_mean_approx(&spec, k).expect("approx")) as usize;
            if let Ok(ci) = var_ci(s, 0.95) {
                var_in += ci.contains(rate_var_approx(&spec, k).expect("approx")) as usize;
            }
        }
        ok &= mean_in >= 45 && var_in >= 45;
        parts.push(format!("{name}: mean {mean_in}/50, variance {var_in}/50"));
    }
    let secs = start.elapsed().as_secs_f64();
    judge(ok && secs < 60.0, format!("{}; {secs:.1} s", parts.join("; ")))
}

fn ac5() -> Outcome {
    let start = Instant::now();
    let sc = groningen(8, 27, SIGMA2, 332.0);
    let reps = 200;
    let mut values = vec![Vec::with_capacity(reps); 3];
    for r in 0..reps as u64 {
        let counts = simulate(&sc, &sc.params, derive_seed(500, Purpose::Counts, r));
        let data = FitData::new(&sc.grid, &counts, &sc.covariates, &sc.mean, sc.sigma2).expect("data");
        let samples = McSamples::generate(&sc.grid, sc.sigma2, 100, derive_seed(500, Purpose::McSamples, r)).expect("samples");
        let f = estimating_function(&data, &sc.params, ParamMode::Reduced, &samples).expect("F");
        for c in 0..3 {
            values[c].push(f[c]);
        }
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for (c, v) in values.iter().enumerate() {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let se = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        ok &= mean.abs() < 3.0 * se;
        parts.push(format!("F{} mean {mean:.3} (SE {se:.3})", c + 1));
    }
    let secs = start.elapsed().as_secs_f64();
    judge(ok && secs < 300.0, format!("{}; 200 catalogues in {secs:.1} s", parts.join(", ")))
}

fn random_instance(seed: u64) -> (SpaceTimeGrid, Field<u64>, Field<f64>, Field<f64>, f64, ModelParams) {
    let mut rng = stream(seed, Purpose::Synthetic, 6);
    let n_cells = rng.random_range(1..6);
    let m = rng.random_range(3..10);
    let cells = (0..n_cells)
        .map(|i| Cell {
            id: i as u64,
            x: i as f64,
            y: 0.0,
            area: rng.random_range(0.5..3.0),
        })
        .collect();
    let grid = SpaceTimeGrid::new(cells, 0.0, rng.random_range(0.2..1.5), m).expect("grid");
    let mut mean = Field::filled(n_cells, m + 1, 0.0);
    let mut cov = Field::filled(n_cells, m + 1, 0.0);
    let mut counts = Field::filled(n_cells, m + 1, 0u64);
    for i in 0..n_cells {
        let mut level = 20.0;
        for k in 0..=m {
            mean.set(i, k, level);
            level -= rng.random_range(0.0..1.5);
            cov.set(i, k, rng.random_range(0.0..0.3));
            if k > 0 {
                counts.set(i, k, rng.random_range(0..6));
            }
        }
    }
    let params = ModelParams::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(0.05..0.6),
        rng.random_range(-3.0..0.5),
    )
    .expect("params");
    (grid, counts, cov, mean, rng.random_range(0.1..1.0), params)
}

fn ac6() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let (grid, counts, cov, mean, sigma2, p) = random_instance(seed);
        let data = FitData::new(&grid, &counts, &cov, &mean, sigma2).expect("data");
        let samples = McSamples::generate(&grid, sigma2, 30, seed).expect("samples");
        let j = jacobian(&data, &p, ParamMode::Full, &samples).expect("J");
        let z = p.to_vec(ParamMode::Full);
        for col in 0..4 {
            let h = 1e-6 * z[col].abs().max(1.0);
            let shifted = |d: f64| {
                let mut v = z.clone();
                v[col] += d;
                estimating_function(&data, &ModelParams::from_slice(&v, ParamMode::Full), ParamMode::Full, &samples).expect("F")
            };
            let (fu, fd) = (shifted(h), shifted(-h));
            for row in 0..4 {
                let num = (fu[row] - fd[row]) / (2.0 * h);
                let scale = j[(row, col)].abs().max(1e-6 * j.row(row).amax());
                worst = worst.max((num - j[(row, col)]).abs() / scale);
            }
        }
    }
    let (grid, counts, cov, mean, sigma2, p) = random_instance(99);
    let mut bumped = counts.clone();
    for i in 0..bumped.n_cells() {
        for k in 1..bumped.n_times() {
            bumped.set(i, k, bumped.get(i, k) + 2 + k as u64);
        }
    }
    let samples = McSamples::generate(&grid, sigma2, 10, 1).expect("samples");
    let a = FitData::new(&grid, &counts, &cov, &mean, sigma2).expect("data");
    let ja = jacobian(&a, &p, ParamMode::Full, &samples).expect("J");
    let jb = jacobian(&a.with_counts(&bumped), &p, ParamMode::Full, &samples).expect("J");
    let invariant = (0..2).all(|r| (0..4).all(|c| ja[(r, c)].to_bits() == jb[(r, c)].to_bits()));
    let asymmetric = (0..4).any(|r| (0..4).any(|c| (ja[(r, c)] - ja[(c, r)]).abs() > 1e-8 * ja.amax()));
    judge(
        worst < 1e-5 && invariant && asymmetric,
        format!("max relative FD error {worst:.2e} over 20 instances; rows 1-2 count-invariant: {invariant}; asymmetric: {asymmetric}"),
    )
}

fn ac7() -> Outcome {
    let start = Instant::now();
    let sc = groningen(8, 27, SIGMA2, 332.0);
    let truth = sc.params.to_vec(ParamMode::Reduced);
    let reps = 50;
    let mut covered = [0usize; 3];
    let mut theta2_positive = 0;
    let mut failures = 0;
    for r in 0..reps as u64 {
        let counts = simulate(&sc, &sc.params, derive_seed(700, Purpose::Counts, r));
        let data = FitData::new(&sc.grid, &counts, &sc.covariates, &sc.mean, sc.sigma2).expect("data");
        let opts = NewtonOptions {
            n_mc: 100,
            mc_seed: derive_seed(700, Purpose::McSamples, r),
            godambe: false,
            ..NewtonOptions::default()
        };
        let outcome = newton_solve(&data, &sc.params, &opts)
            .ok()
            .filter(|f| f.converged)
            .and_then(|f| bootstrap_ci(&f, &data, &opts, 200, 0.95, derive_seed(700, Purpose::Bootstrap, r)).ok());
        let Some(boot) = outcome else {
            failures += 1;
            continue;
        };
        for c in 0..3 {
            covered[c] += boot.cis[c].contains(truth[c]) as usize;
        }
        theta2_positive += (boot.cis[1].lo > 0.0) as usize;
    }
    let secs = start.elapsed().as_secs_f64();
    let need = (0.9 * reps as f64).ceil() as usize;
    judge(
        covered.iter().all(|&c| c >= need) && theta2_positive == reps && secs < 1200.0,
        format!(
            "coverage theta1 {}/{reps}, theta2 {}/{reps}, alpha {}/{reps}; theta2 CI positive in {theta2_positive}/{reps}; {failures} failed fits; {secs:.0} s",
            covered[0], covered[1], covered[2]
        ),
    )
}

fn poisson_irls(rows: &[(Vec<f64>, f64, f64)], init: &[f64]) -> Vec<f64> {
    let p = init.len();
    let mut beta = DVector::from_column_slice(init);
    for _ in 0..200 {
        let mut info = DMatrix::<f64>::zeros(p, p);
        let mut score = DVector::<f64>::zeros(p);
        for (x, offset, y) in rows {
            let x = DVector::from_column_slice(x);
            let mu = (x.dot(&beta) + offset).exp();
            info += &x * x.transpose() * mu;
            score += &x * (y - mu);
        }
        let step = info.lu().solve(&score).expect("information matrix");
        beta += &step;
        if step.amax() < 1e-14 * beta.amax().max(1.0) {
            break;
        }
    }
    beta.iter().copied().collect()
}

fn ac8() -> Outcome {
    let sc = groningen(8, 27, 0.0, 332.0);
    let counts = simulate(&sc, &sc.params, 8);
    let data = FitData::new(&sc.grid, &counts, &sc.covariates, &sc.mean, 0.0).expect("data");
    let init = ModelParams::reduced(-5.0, 0.0, 0.01).expect("params");
    let fit = newton_solve(&data, &init, &NewtonOptions { n_mc: 1, ..NewtonOptions::default() }).expect("fit");
    let mut rows = Vec::new();
    for i in 0..sc.grid.n_cells() {
        for k in 1..sc.grid.n_times() {
            let d = sc.mean.get(i, 0) - sc.mean.get(i, k);
            rows.push((vec![1.0, *sc.covariates.get(i, k), d], sc.grid.exposure(i).ln(), *counts.get(i, k) as f64));
        }
    }
    let oracle = poisson_irls(&rows, &[-5.0, 0.0, 0.01]);
    let got = fit.zeta_hat.to_vec(ParamMode::Reduced);
    let worst = got.iter().zip(&oracle).map(|(g, o)| (g - o).abs()).fold(0.0, f64::max);
    judge(
        fit.converged && worst < 1e-6,
        format!("estimate {got:.6?} vs Poisson likelihood {oracle:.6?}; max difference {worst:.2e}"),
    )
}

fn ac9() -> Outcome {
    let sc = groningen(6, 27, 0.0, 332.0);
    let g = godambe_matrix(&sc.params, &sc.grid, &sc.mean, &sc.covariates, 0.0).expect("godambe");
    let mut worst = 0.0f64;
    for r in 0..3 {
        for c in 0..3 {
            worst = worst.max((g.u[r][c] - g.sigma_f[r][c]).abs() / g.sigma_f[r][c].abs());
        }
    }
    let p = groningen_params();
    let (v, mu) = (0.05, 60.0);
    let n = 1_000_000;
    let mut rng = stream(9, Purpose::Synthetic, 9);
    // D = μ_d + E₀ − E_t with independent noise at both times.
    let sd = (2.0 * SIGMA2).sqrt();
    let base = (p.theta1 + p.theta2 * v).exp();
    let draws: Vec<f64> = (0..n)
        .map(|_| {
            let d = mu + sd * rng.sample::<f64, _>(StandardNormal);
            base * d * (p.alpha * d).exp()
        })
        .collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let se = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0) / n as f64).sqrt();
    let exact = l_closed_form(&p, v, mu, SIGMA2);
    let z = (mean - exact).abs() / se;
    judge(
        worst <= 1e-10 && z < 3.0,
        format!("max |U - Sigma_F|/|Sigma_F| = {worst:.2e}; l closed form {exact:.6e} vs MC {mean:.6e} ({z:.2} SE)"),
    )
}

struct OneCell {
    grid: SpaceTimeGrid,
    counts: Field<u64>,
    cov: Field<f64>,
    mean: Field<f64>,
}

fn one_cell(counts: Vec<u64>, mean: Vec<f64>) -> OneCell {
    let m = mean.len() - 1;
    OneCell {
        grid: SpaceTimeGrid::new(vec![Cell { id: 0, x: 0.5, y: 0.5, area: 1.0 }], 0.0, 1.0, m).expect("grid"),
        counts: Field::from_rows(vec![counts]).expect("counts"),
        cov: Field::filled(1, m + 1, 0.0),
        mean: Field::from_rows(vec![mean]).expect("mean"),
    }
}

fn ac10() -> Outcome {
    let start = Instant::now();
    let c = one_cell(vec![0, 1, 3], vec![10.0, 9.5, 8.5]);
    let sigma2 = 1.0;
    let params = ModelParams::reduced(0.0, 0.0, 1.0).expect("params");
    let data = FitData::new(&c.grid, &c.counts, &c.cov, &c.mean, sigma2).expect("data");
    let model = CellModel::new(&data, 0, &params).expect("model");

    let mut rng = stream(10, Purpose::Synthetic, 10);
    let mut grad_err = 0.0f64;
    for _ in 0..20 {
        let e: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let g = model.gradient(&e).expect("gradient");
        for j in 0..3 {
            let h = 1e-5;
            let mut up = e.clone();
            up[j] += h;
            let mut down = e.clone();
            down[j] -= h;
            let num = (model.log_posterior(&up).expect("lp") - model.log_posterior(&down).expect("lp")) / (2.0 * h);
            grad_err = grad_err.max((num - g[j]).abs() / g[j].abs().max(1.0));
        }
    }
    let s = MalaState::new(&model, vec![0.3, -0.4, 0.2]).expect("state");
    let zero_move = mala_log_acceptance(&s, &s.clone(), 0.1).exp();

    // Posterior moments of (e0, e1, e2) by quadrature on a regular grid.
    let (lo, hi, n) = (-6.0, 6.0, 161usize);
    let h = (hi - lo) / (n - 1) as f64;
    let node = |i: usize| lo + i as f64 * h;
    let mut lp = Vec::with_capacity(n * n * n);
    for a in 0..n {
        for b in 0..n {
            for d in 0..n {
                lp.push(model.log_posterior(&[node(a), node(b), node(d)]).expect("lp"));
            }
        }
    }
    let max = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w_sum = 0.0;
    let mut m1 = [0.0; 3];
    let mut m2 = [[0.0; 3]; 3];
    for a in 0..n {
        for b in 0..n {
            for d in 0..n {
                let w = (lp[(a * n + b) * n + d] - max).exp();
                let e = [node(a), node(b), node(d)];
                w_sum += w;
                for i in 0..3 {
                    m1[i] += w * e[i];
                    for j in 0..3 {
                        m2[i][j] += w * e[i] * e[j];
                    }
                }
            }
        }
    }
    let q_mean: Vec<f64> = m1.iter().map(|v| v / w_sum).collect();
    let q_cov: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..3).map(|j| m2[i][j] / w_sum - q_mean[i] * q_mean[j]).collect())
        .collect();

    let cfg = MalaConfig {
        // Proposal variance giving an acceptance rate near 0.57.
        step_size: 0.4,
        burn_in: 5_000,
        thin: 1,
        n_samples: 100_000,
        seed: 10,
        keep_full: true,
    };
    let chain = run_chain(&model, 0, &cfg).expect("chain");
    let ns = chain.samples.len() as f64;
    let c_mean: Vec<f64> = (0..3).map(|i| chain.samples.iter().map(|e| e[i]).sum::<f64>() / ns).collect();
    let c_cov: Vec<Vec<f64>> = (0..3)
        .map(|i| {
            (0..3)
                .map(|j| chain.samples.iter().map(|e| (e[i] - c_mean[i]) * (e[j] - c_mean[j])).sum::<f64>() / (ns - 1.0))
                .collect()
        })
        .collect();
    // Relative Frobenius error of the covariance; mean error in units of the posterior spread sqrt(tr C).
    let frob = |m: &dyn Fn(usize, usize) -> f64| (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| m(i, j).powi(2)).sum::<f64>().sqrt();
    let cov_err = frob(&|i, j| c_cov[i][j] - q_cov[i][j]) / frob(&|i, j| q_cov[i][j]);
    let spread = (0..3).map(|i| q_cov[i][i]).sum::<f64>().sqrt();
    let mean_err = (0..3).map(|i| (c_mean[i] - q_mean[i]).powi(2)).sum::<f64>().sqrt() / spread;
    let secs = start.elapsed().as_secs_f64();
    judge(
        grad_err < 1e-6 && zero_move == 1.0 && mean_err < 0.02 && cov_err < 0.02 && secs < 120.0,
        format!(
            "gradient FD error {grad_err:.2e}; zero-move ratio {zero_move}; chain vs quadrature: relative mean error {mean_err:.4}, relative covariance error {cov_err:.4}, acceptance {:.2}; {secs:.1} s",
            chain.acceptance_rate
        ),
    )
}

/// Truth world with m + 1 intervals; the last one is held out.
fn forecast_run(r: u64) -> (bool, u64, (u64, u64)) {
    let m = 10;
    let sc = groningen(4, m + 1, SIGMA2, 12.0 * (m + 1) as f64);
    let truth = simulate(&sc, &sc.params, derive_seed(1100, Purpose::Counts, r));
    let grid = sc.grid.with_steps(m).expect("grid");
    let cut = |f: &Field<f64>| Field::from_rows(f.rows().map(|row| row[..=m].to_vec()).collect()).expect("field");
    let (mean, cov) = (cut(&sc.mean), cut(&sc.covariates));
    let counts = Field::from_rows(truth.rows().map(|row| row[..=m].to_vec()).collect()).expect("counts");
    let data = FitData::new(&grid, &counts, &cov, &mean, SIGMA2).expect("data");
    let cfg = MalaConfig {
        burn_in: 2_000,
        thin: 10,
        n_samples: 5_000,
        ..MalaConfig::defaults_for(7.17, derive_seed(1100, Purpose::Mala, r))
    };
    let chains = run_monitor(&data, &sc.params, &cfg).expect("chains");
    let next = NextInterval {
        mean: sc.mean.rows().map(|row| row[m + 1]).collect(),
        covariate: sc.covariates.rows().map(|row| row[m + 1]).collect(),
    };
    let fc = forecast_intensity(&chains, &data, &sc.params, &next, derive_seed(1100, Purpose::Forecast, r)).expect("forecast");
    let realized: u64 = truth.rows().map(|row| row[m + 1]).sum();
    let (lo, hi) = fc.central_interval(0.95);
    (lo <= realized && realized <= hi, realized, (lo, hi))
}

fn ac11() -> Outcome {
    let start = Instant::now();
    let runs = 50;
    let inside = (0..runs as u64).filter(|&r| forecast_run(r).0).count();
    let secs = start.elapsed().as_secs_f64();
    judge(
        inside >= 45,
        format!("realized next-interval total inside the central 95% predictive interval in {inside}/{runs} runs; {secs:.1} s"),
    )
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

/// Library routines serialized under a given worker count.
fn library_outputs(threads: usize) -> Vec<String> {
    in_pool(threads, || {
        let sc = groningen(4, 12, SIGMA2, 200.0);
        let sim = simulate_with_mean(&sc.mean, sc.sigma2, &sc.covariates, &sc.params, &sc.grid, 3).expect("sim");
        let data = FitData::new(&sc.grid, &sim.counts, &sc.covariates, &sc.mean, sc.sigma2).expect("data");
        let opts = NewtonOptions {
            n_mc: 50,
            mc_seed: 4,
            ..NewtonOptions::default()
        };
        let fit = newton_solve(&data, &sc.params, &opts).expect("fit");
        let boot = bootstrap_ci(&fit, &data, &opts, 6, 0.9, 5).expect("bootstrap");
        let samples = McSamples::generate(&sc.grid, sc.sigma2, 50, 6).expect("samples");
        let res = pearson_residuals(&data, &fit.zeta_hat, &samples, VarianceCorrection::Printed).expect("residuals");
        let cfg = MalaConfig {
            burn_in: 50,
            thin: 2,
            n_samples: 50,
            ..MalaConfig::defaults_for(7.17, 7)
        };
        let chains = run_monitor(&data, &fit.zeta_hat, &cfg).expect("chains");
        let next = NextInterval {
            mean: sc.mean.rows().map(|r| r[12] - 3.0).collect(),
            covariate: sc.covariates.rows().map(|r| r[12]).collect(),
        };
        let fc = forecast_intensity(&chains, &data, &fit.zeta_hat, &next, 8).expect("forecast");
        let rates = mc_rate_moments(&increasing_spec(20), 2_000, 9).expect("rates");
        vec![
            format!("{:?}{:?}{:?}", sim.noise, sim.lambda, sim.counts),
            serde_json::to_string(&fit).expect("json"),
            serde_json::to_string(&boot).expect("json"),
            serde_json::to_string(&res).expect("json"),
            serde_json::to_string(&chains).expect("json"),
            serde_json::to_string(&fc).expect("json"),
            serde_json::to_string(&rates).expect("json"),
        ]
    })
}

const SMALL_CONFIG: &str = "nx = 4\nny = 4\nn_steps = 8\nn_mc = 40\nn_boot = 4\nburn_in = 100\nthin = 2\nn_samples = 100\nn_bins = 5\nsynth_pressure_obs = 400\nsynth_wells = 8\nproduction_bandwidth_km = 5.0\nseed = 3\n\
catalogue = \"data/catalogue.csv\"\npressure = \"data/pressure.csv\"\nproduction = \"data/production.csv\"\noutput_dir = \"out\"\n\
spatial_order = 2\ntemporal_order = 1\ninteraction_time_order = 1\ninteraction_space_order = 1\n";

const COMMANDS: [&[&str]; 6] = [
    &["simulate"],
    &["fit"],
    &["diagnose"],
    &["monitor"],
    &["forecast"],
    &["moments", "--scenario", "fig1", "--n", "200"],
];

fn run_pipeline(dir: &Path, threads: usize) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    std::fs::write(dir.join("run.toml"), SMALL_CONFIG).map_err(|e| e.to_string())?;
    for args in COMMANDS {
        let out = Command::new(env!("CARGO_BIN_EXE_coxrate"))
            .current_dir(dir)
            .env("RAYON_NUM_THREADS", threads.to_string())
            .args(["--config", "run.toml"])
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
        }
    }
    Ok(())
}

/// Relative paths of all files under `dir` except timing sidecars.
fn output_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("read dir") {
            let p = entry.expect("entry").path();
            if p.is_dir() {
                stack.push(p);
            } else if !p.to_string_lossy().ends_with("-timings.json") {
                out.push(p.strip_prefix(dir).expect("prefix").to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn ac12() -> Outcome {
    let start = Instant::now();
    let lib_same = library_outputs(1) == library_outputs(4);
    let tmp = tempfile::tempdir().expect("tempdir");
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    let runs = run_pipeline(&a, 1).and_then(|_| run_pipeline(&b, 1)).and_then(|_| run_pipeline(&c, 3));
    if let Err(e) = runs {
        return judge(false, format!("CLI pipeline failed: {e}"));
    }
    let files = output_files(&a);
    let mut differing = Vec::new();
    for other in [&b, &c] {
        if output_files(other) != files {
            differing.push(format!("file set differs in {}", other.display()));
            continue;
        }
        for f in &files {
            if std::fs::read(a.join(f)).ok() != std::fs::read(other.join(f)).ok() {
                differing.push(f.display().to_string());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    judge(
        lib_same && differing.is_empty() && !files.is_empty(),
        format!(
            "library routines identical on 1 and 4 workers: {lib_same}; {} CLI output files compared across repeated and 1/3-worker runs, {} differ{}; {secs:.1} s",
            files.len(),
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(" ({})", differing.join(", ")) }
        ),
    )
}

fn ac13() -> Outcome {
    let Some(dir) = std::env::var_os("COXRATE_DATA_DIR").map(PathBuf::from) else {
        return Outcome {
            verdict: Verdict::Skip,
            detail: "set COXRATE_DATA_DIR to a directory with catalogue.csv, pressure.csv, production.csv (and optionally config.toml)".into(),
        };
    };
    let cfg_path = dir.join("config.toml");
    let cfg = if cfg_path.exists() {
        match RunConfig::load(&cfg_path) {
            Ok(c) => c,
            Err(e) => return judge(false, format!("config: {e:#}")),
        }
    } else {
        let mut c = RunConfig::default();
        c.resolve_paths(&dir);
        c
    };
    let mut ok = true;
    let mut parts = Vec::new();
    let mut have_all = true;
    if cfg.catalogue.exists() {
        let res = coxrate_cli::io::read_catalogue(&cfg.catalogue).and_then(|ev| Ok(bin_catalogue(&ev, &cfg.grid()?, cfg.min_magnitude)));
        match res {
            Ok((counts, _)) => {
                ok &= counts.total() == 332;
                parts.push(format!("catalogue total {} (expected 332)", counts.total()));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("catalogue: {e:#}"));
            }
        }
    } else {
        have_all = false;
    }
    if cfg.pressure.exists() {
        match coxrate_cli::commands::trend_only(&cfg) {
            Ok(t) => {
                ok &= (t.sigma() / 7.17 - 1.0).abs() < 0.05;
                parts.push(format!("sigma hat {:.3} (expected 7.17 within 5%)", t.sigma()));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("pressure: {e:#}"));
            }
        }
    } else {
        have_all = false;
    }
    if cfg.production.exists() {
        match coxrate_cli::io::read_production(&cfg.production) {
            Ok(recs) => {
                let total = field_total(&recs, 2021.0, 2022.0);
                ok &= (total - 6.48).abs() <= 0.005;
                parts.push(format!("2021 production {total:.3} Nbcm (expected 6.48)"));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("production: {e:#}"));
            }
        }
    } else {
        have_all = false;
    }
    if have_all {
        let fitted = coxrate_cli::commands::prepare(&cfg).and_then(|prep| {
            let data = prep.data()?;
            let init = ModelParams::reduced(-5.3, 9.7, 0.0097)?;
            Ok(newton_solve(&data, &init, &NewtonOptions::default())?)
        });
        match fitted {
            Ok(f) => parts.push(format!(
                "fitted (theta1, theta2, alpha) = ({:.3}, {:.3}, {:.5}); reference (-5.3, 9.7, 0.0097)",
                f.zeta_hat.theta1, f.zeta_hat.theta2, f.zeta_hat.alpha
            )),
            Err(e) => parts.push(format!("fit not available: {e:#}")),
        }
    }
    if parts.is_empty() {
        return Outcome {
            verdict: Verdict::Skip,
            detail: format!("no data files found in {}", dir.display()),
        };
    }
    judge(ok, parts.join("; "))
}

fn main() {
    // Honour a libtest-style name filter so `cargo test <filter>` skips this suite.
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("AC1", ac1),
        ("AC2", ac2),
        ("AC3", ac3),
        ("AC4", ac4),
        ("AC5", ac5),
        ("AC6", ac6),
        ("AC7", ac7),
        ("AC8", ac8),
        ("AC9", ac9),
        ("AC10", ac10),
        ("AC11", ac11),
        ("AC12", ac12),
        ("AC13", ac13),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.eq_ignore_ascii_case(f) || "acceptance".contains(f.as_str())) {
            continue;
        }
        let outcome = run();
        let tag = match outcome.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                failed += 1;
                "FAIL"
            }
            Verdict::Skip => "SKIP",
        };
        println!("{name} {tag}: {}", outcome.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
