//! Estimators: closed-form augmented ERM, its deterministic-regularizer
//! approximation, ridge, pre-computed augmentation, the minimum-Mahalanobis
//! limit interpolator, the ridge-equivalence transform, and the augmented
//! SGD trainer.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::augment::{
    draw_augmented_indexed, empirical_cov_operator, expected_cov_operator, mean_operator_matrix,
    Augmentation, AugmentError,
};
use crate::model::Spectrum;
use crate::numerics::{self, NumericsError};
use crate::rng::{self, Purpose};

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("augmented system is singular; the augmentation provides no regularization ({0})")]
    SingularSystem(String),
    #[error("expected augmentation covariance is singular")]
    SingularExpectedCov,
    #[error("limit interpolator norm matrix is singular")]
    SingularCov,
    #[error("aSGD diverged at step {step} (|theta| = {norm:.3e})")]
    DivergenceDetected { step: usize, norm: f64 },
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Which solver produced an estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub solver: &'static str,
    pub augmentation: Option<String>,
    pub hyperparams: String,
    pub seed: Option<u64>,
}

/// A fitted coefficient vector with its provenance.
#[derive(Debug, Clone)]
pub struct Estimator {
    pub theta: DVector<f64>,
    pub provenance: Provenance,
}

impl Estimator {
    fn new(theta: DVector<f64>, provenance: Provenance) -> Result<Self, EstimateError> {
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(EstimateError::SingularSystem("non-finite coefficients".into()));
        }
        Ok(Self { theta, provenance })
    }
}

fn solve_regularized(
    design: &DMatrix<f64>,
    regularizer: DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<DVector<f64>, EstimateError> {
    let a = design.transpose() * design + regularizer;
    let rhs = design.transpose() * y;
    numerics::spd_solve_vec(&a, &rhs).map_err(|e| match e {
        NumericsError::NotPositiveDefinite { min_eigenvalue } => {
            EstimateError::SingularSystem(format!("min eigenvalue {min_eigenvalue:.3e}"))
        }
        other => EstimateError::Numerics(other),
    })
}

/// Closed-form augmented ERM estimator
/// `θ̂ = (μ(X)ᵀμ(X) + n·Cov_G(X))⁻¹ μ(X)ᵀ y`.
pub fn solve_aerm(x: &DMatrix<f64>, y: &DVector<f64>, spec: &Augmentation) -> Result<Estimator, EstimateError> {
    let n = x.nrows() as f64;
    let mu = mean_operator_matrix(spec, x);
    let reg = empirical_cov_operator(spec, x)? * n;
    let theta = solve_regularized(&mu, reg, y)?;
    Estimator::new(
        theta,
        Provenance { solver: "aerm", augmentation: Some(spec.label()), hyperparams: String::new(), seed: None },
    )
}

/// Idealized estimator with the population regularizer
/// `θ̄ = (μ(X)ᵀμ(X) + n·E_x[Cov_g(x)])⁻¹ μ(X)ᵀ y`.
pub fn solve_aerm_deterministic(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    spec: &Augmentation,
    sigma: &Spectrum,
) -> Result<Estimator, EstimateError> {
    let n = x.nrows() as f64;
    let mu = mean_operator_matrix(spec, x);
    let reg = expected_cov_operator(spec, sigma)? * n;
    let theta = solve_regularized(&mu, reg, y).map_err(|e| match e {
        EstimateError::SingularSystem(_) => EstimateError::SingularExpectedCov,
        other => other,
    })?;
    Estimator::new(
        theta,
        Provenance {
            solver: "aerm_deterministic",
            augmentation: Some(spec.label()),
            hyperparams: String::new(),
            seed: None,
        },
    )
}

/// Ridge estimator `(XᵀX + λI)⁻¹Xᵀy`.
pub fn solve_ridge(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<Estimator, EstimateError> {
    if lambda < 0.0 {
        return Err(EstimateError::InvalidConfig(format!("ridge needs lambda >= 0, got {lambda}")));
    }
    let p = x.ncols();
    let theta = solve_regularized(x, DMatrix::identity(p, p) * lambda, y)?;
    Estimator::new(
        theta,
        Provenance { solver: "ridge", augmentation: None, hyperparams: format!("lambda={lambda}"), seed: None },
    )
}

/// Minimum-norm least squares (ridgeless baseline).
pub fn solve_min_norm(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Estimator, EstimateError> {
    let theta = numerics::min_norm_lsq(x, y)?;
    Estimator::new(
        theta,
        Provenance { solver: "min_norm_lsq", augmentation: None, hyperparams: String::new(), seed: None },
    )
}

/// Pre-computed augmentation: minimum-norm least squares over `m` stacked
/// augmented copies of the data paired with repeated labels.
pub fn solve_precomputed(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    spec: &Augmentation,
    m: usize,
    seed: u64,
) -> Result<Estimator, EstimateError> {
    if m < 1 {
        return Err(EstimateError::InvalidConfig("need at least one augmented copy".into()));
    }
    let (n, p) = (x.nrows(), x.ncols());
    let mut stacked = DMatrix::zeros(m * n, p);
    let mut y_rep = DVector::zeros(m * n);
    for i in 0..m {
        let gx = draw_augmented_indexed(spec, x, seed, i as u64)?;
        stacked.view_mut((i * n, 0), (n, p)).copy_from(&gx);
        y_rep.rows_mut(i * n, n).copy_from(y);
    }
    let theta = numerics::min_norm_lsq(&stacked, &y_rep)?;
    Estimator::new(
        theta,
        Provenance {
            solver: "precomputed",
            augmentation: Some(spec.label()),
            hyperparams: format!("copies={m}"),
            seed: Some(seed),
        },
    )
}

/// Minimum-Mahalanobis-norm interpolator
/// `θ̂ = C⁻¹Xᵀ(XC⁻¹Xᵀ)†y` for positive-definite `C`.
pub fn solve_limit_interpolator(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    c_inf: &DMatrix<f64>,
) -> Result<Estimator, EstimateError> {
    let eig = numerics::sym_eig(c_inf)?;
    let min = eig.eigenvalues[eig.eigenvalues.len() - 1];
    if min <= 1e-14 * eig.eigenvalues[0].max(1.0) {
        return Err(EstimateError::SingularCov);
    }
    let c_inv = eig.apply_spectral(|l| 1.0 / l);
    let gram = x * &c_inv * x.transpose();
    let gram_pinv = numerics::sym_pinv(&gram)?;
    let theta = c_inv * x.transpose() * gram_pinv * y;
    Estimator::new(
        theta,
        Provenance { solver: "limit_interpolator", augmentation: None, hyperparams: String::new(), seed: None },
    )
}

/// Learning-rate schedule for aSGD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    Constant(f64),
    /// `η_t = initial · decay^t` per step.
    Geometric { initial: f64, decay: f64 },
}

impl LrSchedule {
    fn at(&self, step: usize) -> f64 {
        match self {
            LrSchedule::Constant(eta) => *eta,
            LrSchedule::Geometric { initial, decay } => initial * decay.powi(step as i32),
        }
    }
}

/// Configuration for [`run_asgd`].
#[derive(Debug, Clone, PartialEq)]
pub struct AsgdConfig {
    pub batch_size: usize,
    pub aug_size: usize,
    pub schedule: LrSchedule,
    /// Full passes over the batched data; total steps = epochs · ceil(n/B).
    pub epochs: usize,
    pub seed: u64,
    /// Record a snapshot every this many steps (the final step is always kept).
    pub snapshot_stride: usize,
    /// Optional early stop when consecutive snapshots move less than this
    /// (Euclidean norm).
    pub movement_tol: Option<f64>,
}

impl AsgdConfig {
    pub fn new(batch_size: usize, aug_size: usize, eta: f64, epochs: usize, seed: u64) -> Self {
        Self {
            batch_size,
            aug_size,
            schedule: LrSchedule::Constant(eta),
            epochs,
            seed,
            snapshot_stride: 1000,
            movement_tol: None,
        }
    }

    fn validate(&self) -> Result<(), EstimateError> {
        if self.batch_size == 0 || self.aug_size == 0 {
            return Err(EstimateError::InvalidConfig("batch and augmentation sizes must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(EstimateError::InvalidConfig("epoch budget must be >= 1".into()));
        }
        if self.schedule.at(0) <= 0.0 {
            return Err(EstimateError::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Why an aSGD run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    BudgetExhausted,
    MovementTolerance { step: usize },
}

/// One recorded point along an aSGD run.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub theta: DVector<f64>,
    /// Deterministic surrogate objective `||Xθ-y||² + n·θᵀCov_G(X)θ`.
    pub objective: f64,
}

/// The recorded trajectory of an aSGD run.
#[derive(Debug, Clone)]
pub struct TrainingTrajectory {
    pub snapshots: Vec<Snapshot>,
    pub stop_reason: StopReason,
}

impl TrainingTrajectory {
    pub fn final_theta(&self) -> &DVector<f64> {
        &self.snapshots.last().expect("trajectory has at least one snapshot").theta
    }
}

/// Augmented SGD on the squared loss: per step, each of `B` batch rows is
/// augmented `H` times and the summed gradient over the `B·H` pairs is
/// applied with the scheduled rate. θ₀ = 0.
pub fn run_asgd(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    spec: &Augmentation,
    config: &AsgdConfig,
) -> Result<TrainingTrajectory, EstimateError> {
    config.validate()?;
    let (n, p) = (x.nrows(), x.ncols());
    let b = config.batch_size.min(n);
    let batches_per_epoch = n.div_ceil(b);
    let total_steps = config.epochs * batches_per_epoch;

    let surrogate_reg = empirical_cov_operator(spec, x)? * n as f64;
    let objective = |theta: &DVector<f64>| -> f64 {
        let resid = x * theta - y;
        resid.norm_squared() + (theta.transpose() * &surrogate_reg * theta)[(0, 0)]
    };

    let ref_norm = (x.transpose() * y).norm() / (x.norm_squared()).max(f64::MIN_POSITIVE);
    let ref_norm = ref_norm.max(1.0);
    let sampler = crate::augment::RowSampler::new(spec)?;

    let mut theta = DVector::zeros(p);
    let mut snapshots = vec![Snapshot { step: 0, theta: theta.clone(), objective: objective(&theta) }];
    let mut stop_reason = StopReason::BudgetExhausted;
    let mut last_recorded = theta.clone();

    let mut step = 0usize;
    'outer: for _epoch in 0..config.epochs {
        for batch_idx in 0..batches_per_epoch {
            let lo = batch_idx * b;
            let hi = (lo + b).min(n);
            let eta = config.schedule.at(step);
            let mut grad = DVector::zeros(p);
            for i in lo..hi {
                let xi = x.row(i).transpose();
                let mut g =
                    rng::stream(config.seed, &[Purpose::Augmentation as u64, step as u64, i as u64]);
                for _ in 0..config.aug_size {
                    let gx = sampler.draw(&xi, &mut g)?;
                    let err = gx.dot(&theta) - y[i];
                    grad.axpy(2.0 * err, &gx, 1.0);
                }
            }
            theta.axpy(-eta, &grad, 1.0);
            step += 1;

            if theta.norm() > 1e6 * ref_norm {
                return Err(EstimateError::DivergenceDetected { step, norm: theta.norm() });
            }
            if step.is_multiple_of(config.snapshot_stride) || step == total_steps {
                snapshots.push(Snapshot { step, theta: theta.clone(), objective: objective(&theta) });
                if let Some(tol) = config.movement_tol {
                    if (&theta - &last_recorded).norm() < tol {
                        stop_reason = StopReason::MovementTolerance { step };
                        break 'outer;
                    }
                }
                last_recorded = theta.clone();
            }
        }
    }
    if snapshots.last().map(|s| s.step) != Some(step) {
        snapshots.push(Snapshot { step, theta: theta.clone(), objective: objective(&theta) });
    }
    Ok(TrainingTrajectory { snapshots, stop_reason })
}

/// The ridge problem equivalent to deterministic aERM:
/// `X̃ = X·E^{-1/2}`, `θ̃* = E^{1/2}θ*`, `λ = n`.
pub fn ridge_equivalence_transform(
    x: &DMatrix<f64>,
    sigma: &Spectrum,
    theta_star: &DVector<f64>,
    spec: &Augmentation,
) -> Result<(DMatrix<f64>, DVector<f64>, f64), EstimateError> {
    let e = expected_cov_operator(spec, sigma)?;
    let eig = numerics::sym_eig(&e)?;
    let min = eig.eigenvalues[eig.eigenvalues.len() - 1];
    if min <= 1e-14 * eig.eigenvalues[0].max(1.0) {
        return Err(EstimateError::SingularExpectedCov);
    }
    let inv_sqrt = eig.apply_spectral(|l| 1.0 / l.sqrt());
    let sqrt = eig.apply_spectral(|l| l.sqrt());
    Ok((x * &inv_sqrt, &sqrt * theta_star, x.nrows() as f64))
}
