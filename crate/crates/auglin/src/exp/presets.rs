//! Named experiment presets reproducing the desk-scale figures: each runs a
//! deterministic grid × trials design and returns a [`ResultsTable`].

use nalgebra::DVector;
use rayon::prelude::*;

use super::config::ConfigError;
use super::table::{Cell, ResultsTable};
use crate::augment::Augmentation;
use crate::estimate::{self, AsgdConfig};
use crate::metrics;
use crate::model::{
    gen_classification_labels, gen_regression_labels, make_sparse_signal, sample_covariates,
    LatentDistribution, SignalModel, Spectrum,
};
use crate::rng;

/// Preset names with one-line descriptions, in a stable order.
pub fn list_presets() -> Vec<(&'static str, &'static str)> {
    vec![
        ("decomposition", "bias/variance/approximation split of the masked estimator across mask rates"),
        ("bias-impact", "biased vs unbiased mask in regression MSE and classification POE across n"),
        ("asgd-convergence", "augmented SGD convergence to the closed-form estimator across batch/aug sizes"),
        ("mask-limit", "weak-mask estimator against the minimum-Mahalanobis interpolator and plain min-norm"),
        ("augmentation-map", "bias/variance and survival/contamination maps for noise, mask, and rotation"),
        ("precomputed-double-descent", "stacked pre-computed augmentation vs closed-form estimator across n"),
        ("signal-mask", "non-uniform mask: sweep the signal-coordinate rate at fixed noise rate"),
        ("spectrum-mask", "bilevel mask intensity ratio across a decaying spectrum"),
        ("tuning-gap", "regression MSE vs classification POE across augmentation intensity"),
    ]
}

/// Parsed overrides with per-preset accepted keys.
struct Overrides {
    entries: Vec<(String, String)>,
}

impl Overrides {
    fn new(entries: &[(String, String)], accepted: &[&str]) -> Result<Self, ConfigError> {
        for (k, _) in entries {
            if !accepted.contains(&k.as_str()) {
                return Err(ConfigError::at(
                    format!("override.{k}"),
                    format!("unknown key (accepted: {})", accepted.join(", ")),
                ));
            }
        }
        Ok(Self { entries: entries.to_vec() })
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.entries.iter().rev().find(|(k, _)| k == key) {
            Some((_, v)) => v.parse().map_err(|_| ConfigError::at(format!("override.{key}"), "expected an integer")),
            None => Ok(default),
        }
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.entries.iter().rev().find(|(k, _)| k == key) {
            Some((_, v)) => v.parse().map_err(|_| ConfigError::at(format!("override.{key}"), "expected a number")),
            None => Ok(default),
        }
    }
}

fn rel_sigma_dist(a: &DVector<f64>, b: &DVector<f64>, sigma: &Spectrum) -> f64 {
    sigma.weighted_norm(&(a - b)) / sigma.weighted_norm(b).max(f64::MIN_POSITIVE)
}

/// Log-spaced integer grid from `lo` to `hi` inclusive (deduplicated).
pub fn log_grid(lo: usize, hi: usize, points: usize) -> Vec<usize> {
    let (lo_f, hi_f) = (lo as f64, hi as f64);
    let mut out = Vec::new();
    for i in 0..points {
        let t = i as f64 / (points - 1) as f64;
        let v = (lo_f.ln() + t * (hi_f.ln() - lo_f.ln())).exp().round() as usize;
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    out
}

fn collect_rows<T, F>(jobs: Vec<T>, f: F) -> Result<Vec<Vec<Cell>>, ConfigError>
where
    T: Send + Sync,
    F: Fn(&T) -> Result<Vec<Vec<Cell>>, String> + Send + Sync,
{
    let results: Vec<Result<Vec<Vec<Cell>>, String>> = jobs.par_iter().map(&f).collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r.map_err(|m| ConfigError::at("preset", m))?);
    }
    Ok(rows)
}

fn table_for(name: &str, seed: u64, columns: Vec<&str>) -> ResultsTable {
    ResultsTable::new(columns.into_iter().map(String::from).collect())
        .with_metadata("preset", name)
        .with_metadata("seed", seed)
        .with_metadata("library_version", env!("CARGO_PKG_VERSION"))
}

/// Run a named preset with key=value overrides under a root seed.
pub fn run_preset(
    name: &str,
    overrides: &[(String, String)],
    seed: u64,
) -> Result<ResultsTable, ConfigError> {
    match name {
        "decomposition" => decomposition(overrides, seed),
        "bias-impact" => bias_impact(overrides, seed),
        "asgd-convergence" => asgd_convergence(overrides, seed),
        "mask-limit" => mask_limit(overrides, seed),
        "augmentation-map" => augmentation_map(overrides, seed),
        "precomputed-double-descent" => precomputed_double_descent(overrides, seed),
        "signal-mask" => signal_mask(overrides, seed),
        "spectrum-mask" => spectrum_mask(overrides, seed),
        "tuning-gap" => tuning_gap(overrides, seed),
        other => Err(ConfigError::UnknownPreset(other.to_string())),
    }
}

fn decomposition(overrides: &[(String, String)], seed: u64) -> Result<ResultsTable, ConfigError> {
    let ov = Overrides::new(overrides, &["trials", "p", "n", "sigma_eps", "ratio"])?;
    let trials = ov.usize("trials", 50)?;
    let p = ov.usize("p", 128)?;
    let n = ov.usize("n", 64)?;
    let sigma_eps = ov.f64("sigma_eps", 0.5)?;
    let ratio = ov.f64("ratio", 0.6)?;
    let betas = [0.1, 0.2, 0.3, 0.4, 0.5];

    let sigma = Spectrum::geometric_with_ratio(ratio, p).map_err(|e| ConfigError::at("preset", e.to_string()))?;
    let theta = SignalModel::isotropic_random(p, seed).theta;

    let jobs: Vec<(usize, usize)> =
        (0..betas.len()).flat_map(|b| (0..trials).map(move |t| (b, t))).collect();
    let rows = collect_rows(jobs, |&(b, t)| {
        let beta = betas[b];
        let spec = Augmentation::mask_unbiased(beta).map_err(|e| e.to_string())?;
        let data_seed = rng::derive_seed(seed, &[b as u64, t as u64]);
        let x = sample_covariates(&sigma, LatentDistribution::Gaussian, n, data_seed);
        let y = gen_regression_labels(&x, &theta, sigma_eps, LatentDistribution::Gaussian, data_seed);
        let d = metrics::decompose_mse(&x, &y, &theta, &sigma, &spec).map_err(|e| e.to_string())?;
        Ok(vec![vec![
            beta.into(),
            t.into(),
            d.bias.into(),
            d.variance.into(),
            d.approx_error.into(),
            d.total_mse.into(),
        ]])
    })?;

    let mut table = table_for("decomposition", seed, vec!["beta", "trial", "bias", "variance", "approx", "mse"]);
    for row in rows {
        table.push_row(row).expect("fixed schema");
    }
    Ok(table)
}

fn bias_impact(overrides: &[(String, String)], seed: u64) -> Result<ResultsTable, ConfigError> {
    let ov = Overrides::new(overrides, &["trials", "p", "beta", "sigma_eps", "nu_star"])?;
    let trials = ov.usize("trials", 50)?;
    let p = ov.usize("p", 128)?;
    let beta = ov.f64("beta", 0.3)?;
    let sigma_eps = ov.f64("sigma_eps", 0.5)?;
    let nu_star = ov.f64("nu_star", 0.1)?;
    let n_grid = [16usize, 32, 64, 128, 256];

    let sigma = Spectrum::isotropic(p).map_err(|e| ConfigError::at("preset", e.to_string()))?;
    let theta = make_sparse_signal(&sigma, 0).map_err(|e| ConfigError::at("preset", e.to_string()))?.theta;
    let unbiased = Augmentation::mask_unbiased(beta).map_err(|e| ConfigError::at("preset", e.to_string()))?;
    let biased = Augmentation::mask_biased(beta).map_err(|e| ConfigError::at("preset", e.to_string()))?;

    let jobs: Vec<(usize, usize)> =
        (0..n_grid.len()).flat_map(|i| (0..trials).map(move |t| (i, t))).collect();
    let rows = collect_rows(jobs, |&(i, t)| {
        let n = n_grid[i];
        let data_seed = rng::derive_seed(seed, &[n as u64, t as u64]);
        let x = sample_covariates(&sigma, LatentDistribution::Gaussian, n, data_seed);
        let y_reg = gen_regression_labels(&x, &theta, sigma_eps, LatentDistribution::Gaussian, data_seed);
        let y_cls = gen_classification_labels(&x, &theta, nu_star, data_seed).map_err(|e| e.to_string())?;

        let fit = |spec: &Augmentation, y: &DVector<f64>| {
            estimate::solve_aerm(&x, y, spec).map(|e| e.theta).map_err(|e| e.to_string())
        };
        let mse_u = metrics::mse(&fit(&unbiased, &y_reg)?, &theta, &sigma);
        let mse_b = metrics::mse(&fit(&biased, &y_reg)?, &theta, &sigma);
        let poe_u = metrics::poe_closed_form(&fit(&unbiased, &y_cls)?, &sigma, 0).map_err(|e| e.to_string())?;
        let poe_b = metrics::poe_closed_form(&fit(&biased, &y_cls)?, &sigma, 0).map_err(|e| e.to_string())?;
        Ok(vec![vec![
            n.into(),
            t.into(),
            mse_u.into(),
            mse_b.into(),
            poe_u.into(),
            poe_b.into(),
        ]])
    })?;

    let mut table = table_for(
        "bias-impact",
        seed,
        vec!["n", "trial", "mse_unbiased", "mse_biased", "poe_unbiased", "poe_biased"],
    );
    for row in rows {
        table.push_row(row).expect("fixed schema");
    }
    Ok(table)
}

fn asgd_convergence(overrides: &[(String, String)], seed: u64) -> Result<ResultsTable, ConfigError> {
    let ov = Overrides::new(overrides, &["trials", "p", "n", "beta", "eta", "passes", "sigma_eps", "ratio", "stride"])?;
    let trials = ov.usize("trials", 1)?;
    let p = ov.usize("p", 128)?;
    let n = ov.usize("n", 64)?;
    let beta = ov.f64("beta", 0.3)?;
    let eta = ov.f64("eta", 1e-5)?;
    let passes = ov.usize("passes", 200_000)?;
    let sigma_eps = ov.f64("sigma_eps", 0.5)?;
    let ratio = ov.f64("ratio", 0.6)?;
    let stride = ov.usize("stride", 2000)?;
    let configs: [(usize, usize); 3] = [(n, 1), (8.min(n), 8), (1, n.min(64))];

    let sigma = Spectrum::geometric_with_ratio(ratio, p).map_err(|e| ConfigError::at("preset", e.to_string()))?;
    let theta_star = SignalModel::isotropic_random(p, seed).theta;
    let spec = Augmentation::mask_unbiased(beta).map_err(|e| ConfigError::at("preset", e.to_string()))?;

    let jobs: Vec<(usize, usize)> =
        (0..configs.len()).flat_map(|c| (0..trials).map(move |t| (c, t))).collect();
    let rows = collect_rows(jobs, |&(c, t)| {
        let (batch, aug_size) = configs[c];
        let data_seed = rng::derive_seed(seed, &[t as u64]);
        let x = sample_covariates(&sigma, LatentDistribution::Gaussian, n, data_seed);
        let y = gen_regression_labels(&x, &theta_star, sigma_eps, LatentDistribution::Gaussian, data_seed);
        let target = estimate::solve_aerm(&x, &y, &spec).map_err(|e| e.to_string())?.theta;

        let batches_per_epoch = n.div_ceil(batch);
        let epochs = passes.div_ceil(batches_per_epoch).max(1);
        let mut cfg = AsgdConfig::new(batch, aug_size, eta, epochs, rng::derive_seed(data_seed, &[c as u64]));
        cfg.snapshot_stride = stride;
        let traj = estimate::run_asgd(&x, &y, &spec, &cfg).map_err(|e| e.to_string())?;
        Ok(traj
            .snapshots
            .iter()
            .map(|s| {
                vec![
                    batch.into(),
                    aug_size.into(),
                    t.into(),
                    s.step.into(),
                    rel_sigma_dist(&s.theta, &target, &sigma).into(),
                    s.objective.into(),
                ]
            })
            .collect())
    })?;

    let mut table = table_for(
        "asgd-convergence",
        seed,
        vec!["batch", "aug_size", "trial", "step", "rel_dist", "objective"],
    );
    for row in rows {
        table.push_row(row).expect("fixed schema");
    }
    Ok(table)
}

fn mask_limit(overrides: &[(String, String)], seed: u64) -> Result<ResultsTable, ConfigError> {
    let ov = Overrides::new(overrides, &["trials", "p", "n", "beta", "sigma_eps", "gamma"])?;
    let trials = ov.usize("trials", 20)?;
    let p = ov.usize("p", 128)?;
    let n = ov.usize("n", 64)?;
    let beta = ov.f64("beta", 1e-3)?;
    let sigma_eps = ov.f64("sigma_eps", 0.5)?;
    let gamma = ov.f64("gamma", 0.95)?;

    let sigma = Spectrum::geometric(gamma, p).map_err(|e| ConfigError::at("preset", e.to_string()))?;
    let theta_star = SignalModel::isotropic_random(p, seed).theta;
    let spec = Augmentation::mask_unbiased(beta).map_err(|e| ConfigError::at("preset", e.to_string()))?;

    let jobs: Vec<usize> = (0..trials).collect();
    let rows = collect_rows(jobs, |&t| {
        let data_seed = rng::derive_seed(seed, &[t as u64]);
        let x = sample_covariates(&sigma, LatentDistribution::Gaussian, n, data_seed);
        let y = gen_regression_labels(&x, &theta_star, sigma_eps, LatentDistribution::Gaussian, data_seed);
        let aerm = estimate::solve_aerm(&x, &y, &spec).map_err(|e| e.to_string())?.theta;
        let c_inf = {
            let gram_diag = (x.transpose() * &x).diagonal() / n as f64;
            nalgebra::DMatrix::from_diagonal(&gram_diag)
        };
        let mlse = estimate::solve_limit_interpolator(&x, &y, &c_inf).map_err(|e| e.to_string())?.theta;
        let lse = estimate::solve_min_norm(&x, &y).map_err(|e| e.to_string())?.theta;
        Ok(vec![vec![
            t.into(),
            rel_sigma_dist(&aerm, &mlse, &sigma).into(),
            rel_sigma_dist(&aerm, &lse, &sigma).into(),
            metrics::mse(&aerm, &theta_star, &sigma).into(),
            metrics::mse(&mlse, &theta_star, &sigma).into(),
            metrics::mse(&lse, &theta_star, &sigma).into(),
        ]])
    })?;

    let mut table = table_for(
        "mask-limit",
        seed,
        vec!["trial", "dist_mlse", "dist_lse", "mse_aerm", "mse_mlse", "mse_lse"],
    );
    for row in rows {
        table.push_row(row).expect("fixed schema");
    }
    Ok(table)
}

fn augmentation_map(overrides: &[(String, String)], seed: u64) -> Result<ResultsTable, ConfigError> {
    let ov = Overrides::new(overrides, &["trials", "p", "n", "sigma_eps", "nu_star", "gamma", "isotropic"])?;
    let trials = ov.usize("trials", 20)?;
    let p = ov.usize("p", 128)?;
    let n = ov.usize("n", 64)?;
    let sigma_eps = ov.f64("sigma_eps", 0.5)?;
    let nu_star = ov.f64("nu_star", 0.1)?;
    let gamma = ov.f64("gamma", 0.95)?;
    let isotropic = ov.usize("isotropic", 0)? != 0;

    let sigma = if isotropic {
        Spectrum::isotropic(p).map_err(|e| ConfigError::at("preset", e.to_string()))?
    } else {
        Spectrum::geometric(gamma, p).map_err(|e| ConfigError::at("preset", e.to_string()))?
    };
    let theta_reg = SignalModel::isotropic_random(p, seed).theta;
    let theta_cls = make_sparse_signal(&sigma, 0).map_err(|e| ConfigError::at("preset", e.to_string()))?.theta;

    let grid: Vec<(&str, f64)> = [
        ("gaussian_noise", [0.25, 0.5, 1.0, 2.0, 4.0].as_slice()),
        ("mask_unbiased", [0.1, 0.3, 0.5, 0.7, 0.9].as_slice()),
        ("rotation", [15.0, 30.0, 45.0, 60.0, 90.0].as_slice()),
    ]
    .into_iter()
    .flat_map(|(f, vals)| vals.iter().map(move |&v| (f, v)))
    .collect();

    let jobs: Vec<(usize, usize)> =
        (0..grid.len()).flat_map(|g| (0..trials).map(move |t| (g, t))).collect();
    let rows = collect_rows(jobs, |&(g, t)| {
        let (family, param) = grid[g];
        let spec = match family {
            "gaussian_noise" => Augmentation::gaussian_noise(param * param),
            "mask_unbiased" => Augmentation::mask_unbiased(param).map_err(|e| e.to_string())?,
            _ => Augmentation::rotation(param).map_err(|e| e.to_string())?,
        };
        let data_seed = rng::derive_seed(seed, &[g as u64, t as u64]);
        let x = sample_covariates(&sigma, LatentDistribution::Gaussian, n, data_seed);
        let y_reg = gen_regression_labels(&x, &theta_reg, sigma_eps, LatentDistribution::Gaussian, data_seed);
        let y_cls = gen_classification_labels(&x, &theta_cls, nu_star, data_seed).map_err(|e| e.to_string())?;

        let d = metrics::decompose_mse(&x, &y_reg, &theta_reg, &sigma, &spec).map_err(|e| e.to_string())?;
        let theta_hat = estimate::solve_aerm(&x, &y_cls, &spec).map_err(|e| e.to_string())?.theta;
        let (su, cn) = metrics::survival_contamination(&theta_hat, &sigma, 0);
        let poe = metrics::poe_closed_form(&theta_hat, &sigma, 0).map_err(|e| e.to_string())?;
        Ok(vec![vec![
            Cell::text(family),
            param.into(),
            t.into(),
            d.bias.into(),
            d.variance.into(),
            d.total_mse.into(),
            su.into(),
            cn.into(),
            poe.into(),
        ]])
    })?;

    let mut table = table_for(
        "augmentation-map",
        seed,
        vec!["family", "param", "trial", "bias", "variance", "mse", "su", "cn", "poe"],
    );
    for row in rows {
        table.push_row(row).expect("fixed schema");
    }
    Ok(table)
}

fn precomputed_double_descent(overrides: &[(String, String)], seed: u64) -> Result<ResultsTable, ConfigError> {
    let ov = Overrides::new(overrides, &["trials", "p", "sigma", "sigma_eps", "points", "n_max"])?;
    let trials = ov.usize("trials", 50)?;
    let p = ov.usize("p", 128)?;
    let noise_sd = ov.f64("sigma", 1.0)?;
    let sigma_eps = ov.f64("sigma_eps", 0.5)?;
    let points = ov.usize("points", 11)?;
    let n_max = ov.usize("n_max", 256)?;
    let aug_sizes = [1usize, 2, 4, 8];

    let sigma = Spectrum::isotropic(p).map_err(|e| ConfigError::at("preset", e.to_string()))?;
    let theta_star = SignalModel::isotropic_random(p, seed).theta;
    let spec = Augmentation::gaussian_noise(noise_sd * noise_sd);
    let n_grid = log_grid(8, n_max, points);

    let jobs: Vec<(usize, usize)> =
        (0..n_grid.len()).flat_map(|i| (0..trials).map(move |t| (i, t))).collect();
    let rows = collect_rows(jobs, |&(i, t)| {
        let n = n_grid[i];
        let data_seed = rng::derive_seed(seed, &[n as u64, t as u64]);
        let x = sample_covariates(&sigma, LatentDistribution::Gaussian, n, data_seed);
        let y = gen_regression_labels(&x, &theta_star, sigma_eps, LatentDistribution::Gaussian, data_seed);
        let mse_aerm =
            metrics::mse(&estimate::solve_aerm(&x, &y, &spec).map_err(|e| e.to_string())?.theta, &theta_star, &sigma);
        let mse_lse =
            metrics::mse(&estimate::solve_min_norm(&x, &y).map_err(|e| e.to_string())?.theta, &theta_star, &sigma);
        let mut out = Vec::new();
        for &k in &aug_sizes {
            let pre = estimate::solve_precomputed(&x, &y, &spec, k, data_seed).map_err(|e| e.to_string())?;
            out.push(vec![
                n.into(),
                k.into(),
                t.into(),
                metrics::mse(&pre.theta, &theta_star, &sigma).into(),
                mse_aerm.into(),
                mse_lse.into(),
            ]);
        }
        Ok(out)
    })?;

    let mut table = table_for(
        "precomputed-double-descent",
        seed,
        vec!["n", "aug_size", "trial", "mse_pre", "mse_aerm", "mse_lse"],
    );
    for row in rows {
        table.push_row(row).expect("fixed schema");
    }
    Ok(table)
}

fn signal_mask(overrides: &[(String, String)], seed: u64) -> Result<ResultsTable, ConfigError> {
    let ov = Overrides::new(overrides, &["trials", "p", "n", "beta_noise", "sigma_eps"])?;
    let trials = ov.usize("trials", 30)?;
    let p = ov.usize("p", 128)?;
    let n = ov.usize("n", 64)?;
    let beta_noise = ov.f64("beta_noise", 0.2)?;
    let sigma_eps = ov.f64("sigma_eps", 0.5)?;
    let beta_sig_grid = [0.02, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8];

    let sigma = Spectrum::isotropic(p).map_err(|e| ConfigError::at("preset", e.to_string()))?;
    let theta = make_sparse_signal(&sigma, 0).map_err(|e| ConfigError::at("preset", e.to_string()))?.theta;

    let jobs: Vec<(usize, usize)> =
        (0..beta_sig_grid.len()).flat_map(|b| (0..trials).map(move |t| (b, t))).collect();
    let rows = collect_rows(jobs, |&(b, t)| {
        let beta_sig = beta_sig_grid[b];
        let mut betas = vec![beta_noise; p];
        betas[0] = beta_sig;
        let spec = Augmentation::mask_nonuniform(betas).map_err(|e| e.to_string())?;
        let data_seed = rng::derive_seed(seed, &[b as u64, t as u64]);
        let x = sample_covariates(&sigma, LatentDistribution::Gaussian, n, data_seed);
        let y = gen_regression_labels(&x, &theta, sigma_eps, LatentDistribution::Gaussian, data_seed);
        let d = metrics::decompose_mse(&x, &y, &theta, &sigma, &spec).map_err(|e| e.to_string())?;
        Ok(vec![vec![
            beta_sig.into(),
            t.into(),
            d.bias.into(),
            d.variance.into(),
            d.total_mse.into(),
        ]])
    })?;

    let mut table =
        table_for("signal-mask", seed, vec!["beta_sig", "trial", "bias", "variance", "mse"]);
    for row in rows {
        table.push_row(row).expect("fixed schema");
    }
    Ok(table)
}

fn spectrum_mask(overrides: &[(String, String)], seed: u64) -> Result<ResultsTable, ConfigError> {
    let ov = Overrides::new(overrides, &["trials", "p", "n", "beta_base", "sigma_eps", "gamma"])?;
    let trials = ov.usize("trials", 30)?;
    let p = ov.usize("p", 128)?;
    let n = ov.usize("n", 64)?;
    let beta_base = ov.f64("beta_base", 0.2)?;
    let sigma_eps = ov.f64("sigma_eps", 0.5)?;
    let gamma = ov.f64("gamma", 0.95)?;
    let ratios = [0.25, 0.5, 1.0, 2.0, 4.0];

    let sigma = Spectrum::geometric(gamma, p).map_err(|e| ConfigError::at("preset", e.to_string()))?;
    let theta = SignalModel::isotropic_random(p, seed).theta;

    let jobs: Vec<(usize, usize)> =
        (0..ratios.len()).flat_map(|r| (0..trials).map(move |t| (r, t))).collect();
    let rows = collect_rows(jobs, |&(r, t)| {
        let ratio = ratios[r];
        let beta_second = (beta_base * ratio).min(0.95);
        let mut betas = vec![beta_base; p];
        for b in betas.iter_mut().skip(p / 2) {
            *b = beta_second;
        }
        let spec = Augmentation::mask_nonuniform(betas).map_err(|e| e.to_string())?;
        let data_seed = rng::derive_seed(seed, &[r as u64, t as u64]);
        let x = sample_covariates(&sigma, LatentDistribution::Gaussian, n, data_seed);
        let y = gen_regression_labels(&x, &theta, sigma_eps, LatentDistribution::Gaussian, data_seed);
        let d = metrics::decompose_mse(&x, &y, &theta, &sigma, &spec).map_err(|e| e.to_string())?;
        Ok(vec![vec![
            ratio.into(),
            t.into(),
            d.bias.into(),
            d.variance.into(),
            d.total_mse.into(),
        ]])
    })?;

    let mut table = table_for("spectrum-mask", seed, vec!["ratio", "trial", "bias", "variance", "mse"]);
    for row in rows {
        table.push_row(row).expect("fixed schema");
    }
    Ok(table)
}

fn tuning_gap(overrides: &[(String, String)], seed: u64) -> Result<ResultsTable, ConfigError> {
    let ov = Overrides::new(overrides, &["trials", "p", "n", "sigma_eps", "nu_star", "gamma"])?;
    let trials = ov.usize("trials", 30)?;
    let p = ov.usize("p", 128)?;
    let n = ov.usize("n", 64)?;
    let sigma_eps = ov.f64("sigma_eps", 0.5)?;
    let nu_star = ov.f64("nu_star", 0.1)?;
    let gamma = ov.f64("gamma", 0.95)?;

    let sigma = Spectrum::geometric(gamma, p).map_err(|e| ConfigError::at("preset", e.to_string()))?;
    let theta = make_sparse_signal(&sigma, 0).map_err(|e| ConfigError::at("preset", e.to_string()))?.theta;

    let grid: Vec<(&str, f64)> = [
        ("gaussian_noise", [0.5, 1.0, 2.0, 4.0, 8.0, 16.0].as_slice()),
        ("mask_unbiased", [0.1, 0.3, 0.5, 0.7, 0.9, 0.97].as_slice()),
    ]
    .into_iter()
    .flat_map(|(f, vals)| vals.iter().map(move |&v| (f, v)))
    .collect();

    let jobs: Vec<(usize, usize)> =
        (0..grid.len()).flat_map(|g| (0..trials).map(move |t| (g, t))).collect();
    let rows = collect_rows(jobs, |&(g, t)| {
        let (family, param) = grid[g];
        let spec = match family {
            "gaussian_noise" => Augmentation::gaussian_noise(param * param),
            _ => Augmentation::mask_unbiased(param).map_err(|e| e.to_string())?,
        };
        let data_seed = rng::derive_seed(seed, &[g as u64, t as u64]);
        let x = sample_covariates(&sigma, LatentDistribution::Gaussian, n, data_seed);
        let y_reg = gen_regression_labels(&x, &theta, sigma_eps, LatentDistribution::Gaussian, data_seed);
        let y_cls = gen_classification_labels(&x, &theta, nu_star, data_seed).map_err(|e| e.to_string())?;
        let mse = metrics::mse(
            &estimate::solve_aerm(&x, &y_reg, &spec).map_err(|e| e.to_string())?.theta,
            &theta,
            &sigma,
        );
        let poe = metrics::poe_closed_form(
            &estimate::solve_aerm(&x, &y_cls, &spec).map_err(|e| e.to_string())?.theta,
            &sigma,
            0,
        )
        .map_err(|e| e.to_string())?;
        Ok(vec![vec![Cell::text(family), param.into(), t.into(), mse.into(), poe.into()]])
    })?;

    let mut table = table_for("tuning-gap", seed, vec!["family", "param", "trial", "mse", "poe"]);
    for row in rows {
        table.push_row(row).expect("fixed schema");
    }
    Ok(table)
}
