//! Covariance spectra, signal models, and synthetic data generation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::rng::{self, Purpose};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("eigenvalue at index {index} is zero; cannot place a sparse signal there")]
    ZeroEigenvalue { index: usize },
}

/// Diagonal data covariance as a non-increasing eigenvalue sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
}

impl Spectrum {
    /// Spectrum from an explicit non-increasing, non-negative list.
    pub fn explicit(eigenvalues: Vec<f64>) -> Result<Self, ModelError> {
        if eigenvalues.is_empty() {
            return Err(ModelError::InvalidParam("spectrum must have p >= 1".into()));
        }
        for w in eigenvalues.windows(2) {
            if w[1] > w[0] {
                return Err(ModelError::InvalidParam("explicit spectrum must be non-increasing".into()));
            }
        }
        if eigenvalues.iter().any(|&l| l < 0.0 || !l.is_finite()) {
            return Err(ModelError::InvalidParam("eigenvalues must be finite and non-negative".into()));
        }
        Ok(Self { eigenvalues })
    }

    /// All-ones spectrum of length `p`.
    pub fn isotropic(p: usize) -> Result<Self, ModelError> {
        Self::explicit(vec![1.0; p.max(1)]).and_then(|s| {
            if p == 0 {
                Err(ModelError::InvalidParam("p must be >= 1".into()))
            } else {
                Ok(s)
            }
        })
    }

    /// Geometric decay `λ_i = γ^i`, i = 1..p.
    pub fn geometric(gamma: f64, p: usize) -> Result<Self, ModelError> {
        if !(0.0 < gamma && gamma < 1.0) {
            return Err(ModelError::InvalidParam(format!("gamma must be in (0,1), got {gamma}")));
        }
        if p == 0 {
            return Err(ModelError::InvalidParam("p must be >= 1".into()));
        }
        Self::explicit((1..=p).map(|i| gamma.powi(i as i32)).collect())
    }

    /// Geometric spectrum with a prescribed condition `λ_p / λ_1 = ratio`.
    pub fn geometric_with_ratio(ratio: f64, p: usize) -> Result<Self, ModelError> {
        if !(0.0 < ratio && ratio < 1.0) {
            return Err(ModelError::InvalidParam(format!("ratio must be in (0,1), got {ratio}")));
        }
        if p < 2 {
            return Err(ModelError::InvalidParam("ratio spectrum needs p >= 2".into()));
        }
        let gamma = ratio.powf(1.0 / (p as f64 - 1.0));
        Self::geometric(gamma, p)
    }

    /// Two-level spectrum: the first `split` eigenvalues equal `a`, the rest `b`.
    pub fn bilevel(a: f64, b: f64, split: usize, p: usize) -> Result<Self, ModelError> {
        if !(a >= b && b > 0.0) {
            return Err(ModelError::InvalidParam(format!("need a >= b > 0, got a={a}, b={b}")));
        }
        if split > p || p == 0 {
            return Err(ModelError::InvalidParam(format!("split {split} out of range for p={p}")));
        }
        let mut v = vec![a; split];
        v.extend(std::iter::repeat_n(b, p - split));
        Self::explicit(v)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Dense diagonal matrix form.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(self.eigenvalues.clone()))
    }

    /// Σ-weighted squared norm `vᵀ diag(λ) v`.
    pub fn weighted_sq_norm(&self, v: &DVector<f64>) -> f64 {
        v.iter().zip(&self.eigenvalues).map(|(vi, li)| li * vi * vi).sum()
    }

    /// Σ-weighted norm.
    pub fn weighted_norm(&self, v: &DVector<f64>) -> f64 {
        self.weighted_sq_norm(v).sqrt()
    }
}

/// Zero-mean, unit-variance latent coordinate distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LatentDistribution {
    #[default]
    Gaussian,
    Rademacher,
    /// Uniform on `(-√3, √3)`.
    UniformScaled,
}

impl LatentDistribution {
    pub fn sample(&self, g: &mut ChaCha8Rng) -> f64 {
        match self {
            LatentDistribution::Gaussian => g.sample(StandardNormal),
            LatentDistribution::Rademacher => {
                if g.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            LatentDistribution::UniformScaled => {
                let u: f64 = g.gen();
                (2.0 * u - 1.0) * 3.0f64.sqrt()
            }
        }
    }
}

/// Structure descriptor of the true coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalKind {
    Dense,
    OneSparse { index: usize },
    KSparse { support: Vec<usize> },
}

/// True coefficient vector with its structure.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalModel {
    pub theta: DVector<f64>,
    pub kind: SignalKind,
}

impl SignalModel {
    pub fn dense(theta: DVector<f64>) -> Self {
        Self { theta, kind: SignalKind::Dense }
    }

    /// Isotropic random signal `θ* ~ N(0, I_p)`.
    pub fn isotropic_random(p: usize, seed: u64) -> Self {
        let mut g = rng::trial_stream(seed, 0, Purpose::Signal);
        Self::dense(DVector::from_fn(p, |_, _| g.sample(StandardNormal)))
    }

    /// k-sparse signal with the given support and coefficients.
    pub fn k_sparse(p: usize, support: Vec<usize>, coeffs: &[f64]) -> Result<Self, ModelError> {
        if support.len() != coeffs.len() {
            return Err(ModelError::InvalidParam("support and coefficients differ in length".into()));
        }
        let mut theta = DVector::zeros(p);
        for (&i, &c) in support.iter().zip(coeffs) {
            if i >= p {
                return Err(ModelError::InvalidParam(format!("support index {i} out of range for p={p}")));
            }
            theta[i] = c;
        }
        Ok(Self { theta, kind: SignalKind::KSparse { support } })
    }
}

/// 1-sparse signal `θ*_t = 1/√λ_t`, which has unit Σ-norm by construction.
pub fn make_sparse_signal(spectrum: &Spectrum, t: usize) -> Result<SignalModel, ModelError> {
    let p = spectrum.dim();
    if t >= p {
        return Err(ModelError::InvalidParam(format!("index {t} out of range for p={p}")));
    }
    let lam = spectrum.eigenvalues()[t];
    if lam <= 0.0 {
        return Err(ModelError::ZeroEigenvalue { index: t });
    }
    let mut theta = DVector::zeros(p);
    theta[t] = 1.0 / lam.sqrt();
    Ok(SignalModel { theta, kind: SignalKind::OneSparse { index: t } })
}

/// Draw `n` i.i.d. rows `x = Σ^{1/2} z` with the given latent distribution.
pub fn sample_covariates(
    spectrum: &Spectrum,
    latent: LatentDistribution,
    n: usize,
    seed: u64,
) -> DMatrix<f64> {
    let p = spectrum.dim();
    let sqrt_lam: Vec<f64> = spectrum.eigenvalues().iter().map(|l| l.sqrt()).collect();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let mut g = rng::stream(seed, &[Purpose::Covariates as u64, i as u64]);
        for j in 0..p {
            x[(i, j)] = sqrt_lam[j] * latent.sample(&mut g);
        }
    }
    x
}

/// Regression labels `y = Xθ* + ε`, ε i.i.d. from the latent family scaled to std `σ_ε`.
pub fn gen_regression_labels(
    x: &DMatrix<f64>,
    theta_star: &DVector<f64>,
    sigma_eps: f64,
    noise: LatentDistribution,
    seed: u64,
) -> DVector<f64> {
    let mut y = x * theta_star;
    if sigma_eps > 0.0 {
        let mut g = rng::trial_stream(seed, 0, Purpose::Labels);
        for i in 0..y.len() {
            y[i] += sigma_eps * noise.sample(&mut g);
        }
    }
    y
}

/// `sgn` with the `sgn(0) := +1` convention.
pub fn sign_pm1(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Binary labels `y_i = sgn(x_iᵀθ*)` flipped independently with probability `ν*`.
pub fn gen_classification_labels(
    x: &DMatrix<f64>,
    theta_star: &DVector<f64>,
    nu_star: f64,
    seed: u64,
) -> Result<DVector<f64>, ModelError> {
    if !(0.0..0.5).contains(&nu_star) {
        return Err(ModelError::InvalidParam(format!("nu_star must be in [0, 1/2), got {nu_star}")));
    }
    let scores = x * theta_star;
    let mut g = rng::trial_stream(seed, 0, Purpose::Labels);
    let mut y = DVector::zeros(x.nrows());
    for i in 0..x.nrows() {
        let flip = g.gen::<f64>() < nu_star;
        let s = sign_pm1(scores[i]);
        y[i] = if flip { -s } else { s };
    }
    Ok(y)
}

/// Task marker carried by [`Dataset`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaskKind {
    Regression { sigma_eps: f64 },
    Classification { nu_star: f64 },
}

/// A generated training set together with the exact configuration that produced it.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub kind: TaskKind,
    pub seed: u64,
}

impl Dataset {
    pub fn regression(
        spectrum: &Spectrum,
        signal: &SignalModel,
        latent: LatentDistribution,
        n: usize,
        sigma_eps: f64,
        seed: u64,
    ) -> Self {
        let x = sample_covariates(spectrum, latent, n, seed);
        let y = gen_regression_labels(&x, &signal.theta, sigma_eps, LatentDistribution::Gaussian, seed);
        Self { x, y, kind: TaskKind::Regression { sigma_eps }, seed }
    }

    pub fn classification(
        spectrum: &Spectrum,
        signal: &SignalModel,
        latent: LatentDistribution,
        n: usize,
        nu_star: f64,
        seed: u64,
    ) -> Result<Self, ModelError> {
        let x = sample_covariates(spectrum, latent, n, seed);
        let y = gen_classification_labels(&x, &signal.theta, nu_star, seed)?;
        Ok(Self { x, y, kind: TaskKind::Classification { nu_star }, seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn geometric_direct_powers() {
        let s = Spectrum::geometric(0.95, 3).unwrap();
        let want = [0.95, 0.9025, 0.857375];
        for (a, b) in s.eigenvalues().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn isotropic_is_ones() {
        assert_eq!(Spectrum::isotropic(4).unwrap().eigenvalues(), &[1.0; 4]);
    }

    #[test]
    fn bilevel_split() {
        let s = Spectrum::bilevel(10.0, 1.0, 50, 128).unwrap();
        assert!(s.eigenvalues()[..50].iter().all(|&l| l == 10.0));
        assert!(s.eigenvalues()[50..].iter().all(|&l| l == 1.0));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(Spectrum::geometric(1.0, 3).is_err());
        assert!(Spectrum::geometric(0.0, 3).is_err());
        assert!(Spectrum::explicit(vec![1.0, 2.0]).is_err());
        assert!(Spectrum::bilevel(1.0, 2.0, 1, 4).is_err());
    }

    #[test]
    fn sparse_signal_unit_sigma_norm() {
        let s = Spectrum::explicit(vec![4.0, 1.0]).unwrap();
        let sig = make_sparse_signal(&s, 0).unwrap();
        assert!((sig.theta[0] - 0.5).abs() < 1e-15);
        assert_eq!(sig.theta[1], 0.0);
        assert!((s.weighted_sq_norm(&sig.theta) - 1.0).abs() < 1e-15);

        let iso = Spectrum::isotropic(3).unwrap();
        let sig = make_sparse_signal(&iso, 2).unwrap();
        assert_eq!(sig.theta[2], 1.0);
    }

    #[test]
    fn sparse_signal_zero_eigenvalue() {
        let s = Spectrum::explicit(vec![1.0, 0.0]).unwrap();
        assert!(matches!(make_sparse_signal(&s, 1), Err(ModelError::ZeroEigenvalue { index: 1 })));
    }

    #[test]
    fn covariates_deterministic() {
        let s = Spectrum::geometric(0.9, 5).unwrap();
        let a = sample_covariates(&s, LatentDistribution::Gaussian, 7, 3);
        let b = sample_covariates(&s, LatentDistribution::Gaussian, 7, 3);
        assert_eq!(a, b);
    }

    #[test]
    fn covariates_monte_carlo_covariance() {
        let s = Spectrum::isotropic(4).unwrap();
        let n = 10_000;
        let x = sample_covariates(&s, LatentDistribution::Gaussian, n, 17);
        let cov = x.transpose() * &x / n as f64;
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((cov[(i, j)] - want).abs() < 0.1, "cov[{i},{j}] = {}", cov[(i, j)]);
            }
        }
    }

    #[test]
    fn covariates_scalar_variance() {
        let s = Spectrum::explicit(vec![4.0]).unwrap();
        let x = sample_covariates(&s, LatentDistribution::Gaussian, 10_000, 23);
        let var = x.column(0).map(|v| v * v).sum() / 10_000.0;
        assert!((3.5..=4.5).contains(&var), "variance {var}");
    }

    #[test]
    fn rademacher_exact_magnitudes() {
        let s = Spectrum::explicit(vec![4.0, 2.0, 1.0]).unwrap();
        let x = sample_covariates(&s, LatentDistribution::Rademacher, 100, 5);
        for i in 0..x.nrows() {
            for j in 0..3 {
                let want = s.eigenvalues()[j].sqrt();
                assert!((x[(i, j)].abs() - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn regression_labels_noiseless_and_noisy() {
        let s = Spectrum::isotropic(3).unwrap();
        let x = sample_covariates(&s, LatentDistribution::Gaussian, 10_000, 31);
        let theta = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let y0 = gen_regression_labels(&x, &theta, 0.0, LatentDistribution::Gaussian, 31);
        assert_eq!(y0, &x * &theta);

        let y = gen_regression_labels(&x, &theta, 0.5, LatentDistribution::Gaussian, 31);
        let resid = &y - &x * &theta;
        let std = (resid.norm_squared() / resid.len() as f64).sqrt();
        assert!((0.45..=0.55).contains(&std), "noise std {std}");

        let y2 = gen_regression_labels(&x, &theta, 0.5, LatentDistribution::Gaussian, 31);
        assert_eq!(y, y2);
    }

    #[test]
    fn classification_labels_flip_rate() {
        let s = Spectrum::isotropic(4).unwrap();
        let x = sample_covariates(&s, LatentDistribution::Gaussian, 10_000, 41);
        let theta = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let clean = gen_classification_labels(&x, &theta, 0.0, 41).unwrap();
        for i in 0..x.nrows() {
            assert_eq!(clean[i], sign_pm1(x.row(i).transpose().dot(&theta)));
        }
        let noisy = gen_classification_labels(&x, &theta, 0.1, 41).unwrap();
        let disagree =
            clean.iter().zip(noisy.iter()).filter(|(a, b)| a != b).count() as f64 / 10_000.0;
        assert!((0.08..=0.12).contains(&disagree), "flip fraction {disagree}");
    }

    #[test]
    fn nu_star_half_rejected() {
        let s = Spectrum::isotropic(2).unwrap();
        let x = sample_covariates(&s, LatentDistribution::Gaussian, 4, 1);
        let theta = DVector::from_vec(vec![1.0, 0.0]);
        assert!(gen_classification_labels(&x, &theta, 0.5, 1).is_err());
    }

    #[test]
    fn sign_convention_at_zero() {
        assert_eq!(sign_pm1(0.0), 1.0);
        assert_eq!(sign_pm1(-0.0), 1.0);
    }

    proptest! {
        #[test]
        fn spectra_always_non_increasing(gamma in 0.01f64..0.99, p in 1usize..40,
                                         a in 0.5f64..20.0, extra in 0.0f64..10.0, split in 0usize..40) {
            let g = Spectrum::geometric(gamma, p).unwrap();
            prop_assert!(g.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
            let b = Spectrum::bilevel(a + extra, a, split.min(p), p).unwrap();
            prop_assert!(b.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn labels_deterministic_in_seed(seed in 0u64..1000) {
            let s = Spectrum::isotropic(3).unwrap();
            let x = sample_covariates(&s, LatentDistribution::Gaussian, 8, seed);
            let theta = DVector::from_vec(vec![1.0, 2.0, 3.0]);
            let a = gen_classification_labels(&x, &theta, 0.2, seed).unwrap();
            let b = gen_classification_labels(&x, &theta, 0.2, seed).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
