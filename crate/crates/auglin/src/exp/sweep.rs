//! Generic sweep engine: Cartesian grid of (augmentation × parameter × n)
//! times independent trials, evaluated in parallel and gathered in
//! deterministic order.

use nalgebra::DVector;
use rayon::prelude::*;
use thiserror::Error;

use super::config::{AugConfig, ExperimentConfig, MetricKind, SignalSpec, SolverKind};
use super::table::{Cell, ResultsTable};
use crate::augment::Augmentation;
use crate::estimate;
use crate::metrics;
use crate::model::{
    gen_classification_labels, gen_regression_labels, sample_covariates, LatentDistribution,
    SignalModel, Spectrum,
};
use crate::rng;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] super::config::ConfigError),
    #[error("augmentation '{family}': {message}")]
    BadAugmentation { family: String, message: String },
    #[error("evaluation failed at grid point {point}: {message}")]
    Eval { point: String, message: String },
    #[error(transparent)]
    Table(#[from] super::table::TableError),
}

/// Instantiate an [`Augmentation`] from a config block, substituting the
/// swept parameter when `sweep_value` is given.
pub fn build_augmentation(
    aug: &AugConfig,
    sweep_value: Option<f64>,
    cfg: &ExperimentConfig,
) -> Result<Augmentation, SweepError> {
    let get = |key: &str, default: Option<f64>| -> Result<f64, SweepError> {
        if let Some((axis, values)) = aug.sweep_axis() {
            if axis == key {
                // During validation no sweep value is bound yet; use the first.
                return Ok(sweep_value.unwrap_or(values[0]));
            }
        }
        aug.scalar(key).or(default).ok_or_else(|| SweepError::BadAugmentation {
            family: aug.family.clone(),
            message: format!("missing parameter '{key}'"),
        })
    };
    let bad = |message: String| SweepError::BadAugmentation { family: aug.family.clone(), message };

    Ok(match aug.family.as_str() {
        "gaussian_noise" => {
            let variance = if aug.params.contains_key("variance") {
                get("variance", None)?
            } else {
                let sigma = get("sigma", Some(1.0))?;
                sigma * sigma
            };
            Augmentation::gaussian_noise(variance)
        }
        "mask_unbiased" => Augmentation::mask_unbiased(get("beta", None)?).map_err(|e| bad(e.to_string()))?,
        "mask_biased" => Augmentation::mask_biased(get("beta", None)?).map_err(|e| bad(e.to_string()))?,
        "mask_nonuniform" => {
            let p = cfg.data.p;
            let mut betas;
            if aug.params.contains_key("beta_signal") || aug.params.contains_key("beta_noise") {
                let beta_signal = get("beta_signal", None)?;
                let beta_noise = get("beta_noise", None)?;
                let SignalSpec::Sparse { index } = cfg.data.signal else {
                    return Err(bad("beta_signal/beta_noise need a sparse signal".into()));
                };
                betas = vec![beta_noise; p];
                betas[index] = beta_signal;
            } else {
                let first = get("beta_first", None)?;
                let second = get("beta_second", None)?;
                betas = vec![first; p];
                for b in betas.iter_mut().skip(p / 2) {
                    *b = second;
                }
            }
            Augmentation::mask_nonuniform(betas).map_err(|e| bad(e.to_string()))?
        }
        "cutout" => {
            let k = get("k", None)? as usize;
            if k >= cfg.data.p {
                return Err(bad(format!("cutout needs k < p = {}", cfg.data.p)));
            }
            Augmentation::cutout(k)
        }
        "salt_pepper" => {
            let beta = get("beta", None)?;
            let mu = get("mu", Some(0.0))?;
            let variance = if aug.params.contains_key("variance") {
                get("variance", None)?
            } else {
                let sigma = get("sigma", Some(1.0))?;
                sigma * sigma
            };
            Augmentation::salt_pepper(beta, mu, variance).map_err(|e| bad(e.to_string()))?
        }
        "rotation" => {
            if !cfg.data.p.is_multiple_of(2) {
                return Err(bad("rotation needs even p".into()));
            }
            Augmentation::rotation(get("alpha", None)?).map_err(|e| bad(e.to_string()))?
        }
        "group_mix" => {
            let sigma = cfg.data.spectrum.build(cfg.data.p)?;
            Augmentation::group_mix(Some(sigma))
        }
        other => return Err(bad(format!("unknown family '{other}'"))),
    })
}

fn build_signal(cfg: &ExperimentConfig, sigma: &Spectrum) -> Result<SignalModel, SweepError> {
    match cfg.data.signal {
        SignalSpec::IsotropicRandom => Ok(SignalModel::isotropic_random(cfg.data.p, cfg.seed)),
        SignalSpec::Sparse { index } => crate::model::make_sparse_signal(sigma, index)
            .map_err(|e| SweepError::Eval { point: "signal".into(), message: e.to_string() }),
    }
}

fn solve(
    solver: &SolverKind,
    x: &nalgebra::DMatrix<f64>,
    y: &DVector<f64>,
    spec: &Augmentation,
    sigma: &Spectrum,
    seed: u64,
) -> Result<DVector<f64>, estimate::EstimateError> {
    Ok(match solver {
        SolverKind::Aerm => estimate::solve_aerm(x, y, spec)?.theta,
        SolverKind::Deterministic => estimate::solve_aerm_deterministic(x, y, spec, sigma)?.theta,
        SolverKind::MinNorm => estimate::solve_min_norm(x, y)?.theta,
        SolverKind::Ridge { lambda } => estimate::solve_ridge(x, y, *lambda)?.theta,
        SolverKind::Precomputed { copies } => estimate::solve_precomputed(x, y, spec, *copies, seed)?.theta,
    })
}

struct GridPoint {
    aug_idx: usize,
    family: String,
    param: f64,
    n: usize,
    spec: Augmentation,
}

/// Run the Cartesian sweep described by `cfg`. Every row carries its full
/// grid coordinates `(family, param, n, trial)` followed by one column per
/// `(metric × solver)` pair.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<ResultsTable, SweepError> {
    super::config::validate(cfg)?;
    let p = cfg.data.p;
    let sigma = cfg.data.spectrum.build(p)?;
    let signal = build_signal(cfg, &sigma)?;
    let theta_star = signal.theta.clone();
    let sparse_index = match cfg.data.signal {
        SignalSpec::Sparse { index } => Some(index),
        SignalSpec::IsotropicRandom => None,
    };

    let mut points = Vec::new();
    for (aug_idx, aug) in cfg.augmentations.iter().enumerate() {
        let sweep_values: Vec<f64> = match aug.sweep_axis() {
            Some((_, values)) => values.to_vec(),
            None => vec![aug.params.values().next().map(|v| v[0]).unwrap_or(f64::NAN)],
        };
        for &value in &sweep_values {
            let spec = build_augmentation(aug, Some(value), cfg)?;
            for &n in &cfg.data.n_grid {
                points.push(GridPoint { aug_idx, family: aug.family.clone(), param: value, n, spec: spec.clone() });
            }
        }
    }

    let mut columns = vec!["family".to_string(), "param".to_string(), "n".to_string(), "trial".to_string()];
    for metric in &cfg.metrics {
        for solver in &cfg.solvers {
            if cfg.solvers.len() == 1 {
                columns.push(metric.name().to_string());
            } else {
                columns.push(format!("{}_{}", metric.name(), solver.name()));
            }
        }
    }

    let needs_regression = cfg.metrics.iter().any(|m| !m.needs_classification());
    let needs_classification = cfg.metrics.iter().any(|m| m.needs_classification());

    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|g| (0..cfg.trials).map(move |t| (g, t)))
        .collect();

    let mut rows: Vec<(usize, usize, Vec<Cell>)> = jobs
        .par_iter()
        .map(|&(g, t)| -> Result<(usize, usize, Vec<Cell>), SweepError> {
            let point = &points[g];
            let fail = |message: String| SweepError::Eval {
                point: format!("{} param={} n={} trial={t}", point.family, point.param, point.n),
                message,
            };
            // Seed streams depend on (grid point identity, trial) only.
            let data_seed = rng::derive_seed(
                cfg.seed,
                &[point.aug_idx as u64, point.param.to_bits(), point.n as u64, t as u64],
            );
            let x = sample_covariates(&sigma, cfg.data.latent, point.n, data_seed);

            let mut cells: Vec<Cell> = vec![
                Cell::text(point.family.clone()),
                point.param.into(),
                point.n.into(),
                t.into(),
            ];

            let y_reg = needs_regression.then(|| {
                gen_regression_labels(&x, &theta_star, cfg.data.sigma_eps, LatentDistribution::Gaussian, data_seed)
            });
            let y_cls = if needs_classification {
                Some(
                    gen_classification_labels(&x, &theta_star, cfg.data.nu_star, data_seed)
                        .map_err(|e| fail(e.to_string()))?,
                )
            } else {
                None
            };

            for metric in &cfg.metrics {
                for solver in &cfg.solvers {
                    let y = if metric.needs_classification() {
                        y_cls.as_ref().expect("classification labels generated")
                    } else {
                        y_reg.as_ref().expect("regression labels generated")
                    };
                    let value = match metric {
                        MetricKind::Mse => {
                            let theta = solve(solver, &x, y, &point.spec, &sigma, data_seed)
                                .map_err(|e| fail(e.to_string()))?;
                            metrics::mse(&theta, &theta_star, &sigma)
                        }
                        MetricKind::Bias | MetricKind::Variance | MetricKind::Approx => {
                            let d = metrics::decompose_mse(&x, y, &theta_star, &sigma, &point.spec)
                                .map_err(|e| fail(e.to_string()))?;
                            match metric {
                                MetricKind::Bias => d.bias,
                                MetricKind::Variance => d.variance,
                                _ => d.approx_error,
                            }
                        }
                        MetricKind::Su | MetricKind::Cn => {
                            let theta = solve(solver, &x, y, &point.spec, &sigma, data_seed)
                                .map_err(|e| fail(e.to_string()))?;
                            let (su, cn) = metrics::survival_contamination(
                                &theta,
                                &sigma,
                                sparse_index.expect("validated sparse signal"),
                            );
                            if matches!(metric, MetricKind::Su) {
                                su
                            } else {
                                cn
                            }
                        }
                        MetricKind::Poe => {
                            let theta = solve(solver, &x, y, &point.spec, &sigma, data_seed)
                                .map_err(|e| fail(e.to_string()))?;
                            metrics::poe_closed_form(&theta, &sigma, sparse_index.expect("sparse"))
                                .map_err(|e| fail(e.to_string()))?
                        }
                    };
                    cells.push(value.into());
                }
            }
            Ok((g, t, cells))
        })
        .collect::<Result<Vec<_>, _>>()?;

    rows.sort_by_key(|(g, t, _)| (*g, *t));
    let mut table = ResultsTable::new(columns)
        .with_metadata("seed", cfg.seed)
        .with_metadata("trials", cfg.trials)
        .with_metadata("p", p)
        .with_metadata("library_version", env!("CARGO_PKG_VERSION"));
    for (_, _, cells) in rows {
        table.push_row(cells)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exp::config::parse_config;
    use crate::exp::csvio::to_csv_string;
    use crate::exp::table::median;

    const BASE: &str = "
[experiment]
trials = 1
seed = 11
metrics = mse
solvers = aerm

[data]
p = 12
n = 6
spectrum = isotropic
signal = isotropic

[augmentation]
family = gaussian_noise
sigma = 1.0
";

    #[test]
    fn one_point_one_trial_one_row() {
        let cfg = parse_config(BASE, &[]).unwrap();
        let t = run_sweep(&cfg).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.columns, vec!["family", "param", "n", "trial", "mse"]);
    }

    #[test]
    fn trials_multiply_rows() {
        let cfg = parse_config(BASE, &[("experiment.trials".into(), "50".into())]).unwrap();
        let t = run_sweep(&cfg).unwrap();
        assert_eq!(t.rows.len(), 50);
    }

    #[test]
    fn deterministic_bytes() {
        let cfg = parse_config(BASE, &[("experiment.trials".into(), "4".into())]).unwrap();
        let a = to_csv_string(&run_sweep(&cfg).unwrap());
        let b = to_csv_string(&run_sweep(&cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn mask_beta_sweep_bias_up_variance_down() {
        // On an isotropic spectrum the trial-median bias is non-decreasing
        // and the variance non-increasing in beta.
        let text = "
[experiment]
trials = 12
seed = 5
metrics = bias, variance
solvers = aerm

[data]
p = 48
n = 24
spectrum = isotropic
signal = isotropic
sigma_eps = 0.5

[augmentation]
family = mask_unbiased
beta = 0.1,0.3,0.5,0.7,0.9
";
        let cfg = parse_config(text, &[]).unwrap();
        let t = run_sweep(&cfg).unwrap();
        let param_idx = t.column_index("param").unwrap();
        let bias_idx = t.column_index("bias").unwrap();
        let var_idx = t.column_index("variance").unwrap();
        let betas = [0.1, 0.3, 0.5, 0.7, 0.9];
        let med = |col: usize, beta: f64| -> f64 {
            let vals: Vec<f64> = t
                .rows
                .iter()
                .filter(|r| r[param_idx].as_f64() == Some(beta))
                .map(|r| r[col].as_f64().unwrap())
                .collect();
            median(&vals)
        };
        for w in betas.windows(2) {
            assert!(med(bias_idx, w[1]) >= med(bias_idx, w[0]) * 0.999, "bias not increasing at {w:?}");
            assert!(med(var_idx, w[1]) <= med(var_idx, w[0]) * 1.001, "variance not decreasing at {w:?}");
        }
    }
}
