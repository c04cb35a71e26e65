//! Generalization metrics: Σ-weighted MSE, the bias/variance/approximation
//! decomposition, survival/contamination and POE for the signed
//! classification model, effective ranks, augmentation-transformed spectral
//! quantities, and biased-augmentation shift statistics.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::augment::{
    expected_cov_operator, mean_operator_matrix, psi, Augmentation, AugmentError,
};
use crate::estimate::{self, EstimateError};
use crate::model::{sign_pm1, LatentDistribution, Spectrum};
use crate::numerics::{operator_norm, sym_eig, NumericsError};
use crate::rng::{self, Purpose};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("survival and contamination are both zero; POE is undefined")]
    Degenerate,
    #[error("tail eigenvalue at k+1 = {index} is zero; rho_k is undefined")]
    ZeroTailEigenvalue { index: usize },
    #[error("expected augmentation covariance is singular")]
    SingularExpectedCov,
    #[error("invalid argument: {0}")]
    InvalidArg(String),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Σ-weighted squared distance `||θ̂ - θ*||²_Σ` (the population test MSE).
pub fn mse(theta_hat: &DVector<f64>, theta_star: &DVector<f64>, sigma: &Spectrum) -> f64 {
    sigma.weighted_sq_norm(&(theta_hat - theta_star))
}

/// Three-way error split for one realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseDecomposition {
    pub bias: f64,
    pub variance: f64,
    pub approx_error: f64,
    pub total_mse: f64,
}

/// Decompose the MSE of the augmented estimator on `(X, y)` into bias,
/// variance, and approximation error against the deterministic-regularizer
/// estimator refit on noiseless labels.
pub fn decompose_mse(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    theta_star: &DVector<f64>,
    sigma: &Spectrum,
    spec: &Augmentation,
) -> Result<MseDecomposition, MetricsError> {
    let noiseless = x * theta_star;
    let det_noisy = estimate::solve_aerm_deterministic(x, y, spec, sigma)?;
    let det_clean = estimate::solve_aerm_deterministic(x, &noiseless, spec, sigma)?;
    let emp = estimate::solve_aerm(x, y, spec)?;
    let bias = sigma.weighted_sq_norm(&(&det_clean.theta - theta_star));
    let variance = sigma.weighted_sq_norm(&(&det_noisy.theta - &det_clean.theta));
    let approx_error = sigma.weighted_sq_norm(&(&emp.theta - &det_noisy.theta));
    let total_mse = sigma.weighted_sq_norm(&(&emp.theta - theta_star));
    Ok(MseDecomposition { bias, variance, approx_error, total_mse })
}

/// Survival, contamination, and closed-form POE of one estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationMetrics {
    pub survival: f64,
    pub contamination: f64,
    pub poe: f64,
}

/// Bundle of the signed-model metrics; the POE is the closed form, so the
/// gaussian independent-feature caveat of [`poe_closed_form`] applies.
pub fn classification_metrics(
    theta_hat: &DVector<f64>,
    sigma: &Spectrum,
    t: usize,
) -> Result<ClassificationMetrics, MetricsError> {
    let (survival, contamination) = survival_contamination(theta_hat, sigma, t);
    let poe = poe_closed_form(theta_hat, sigma, t)?;
    Ok(ClassificationMetrics { survival, contamination, poe })
}

/// Survival `√λ_t·θ̂_t` and contamination `√(Σ_{j≠t} λ_j θ̂_j²)`.
pub fn survival_contamination(theta_hat: &DVector<f64>, sigma: &Spectrum, t: usize) -> (f64, f64) {
    let lam = sigma.eigenvalues();
    assert!(t < lam.len(), "signal index {t} out of range for p={}", lam.len());
    let su = lam[t].sqrt() * theta_hat[t];
    let cn_sq: f64 = (0..lam.len())
        .filter(|&j| j != t)
        .map(|j| lam[j] * theta_hat[j] * theta_hat[j])
        .sum();
    (su, cn_sq.sqrt())
}

/// Closed-form POE `1/2 - atan(SU/CN)/π`, valid for independent Gaussian
/// features and a 1-sparse signal at coordinate `t`.
pub fn poe_closed_form(theta_hat: &DVector<f64>, sigma: &Spectrum, t: usize) -> Result<f64, MetricsError> {
    let (su, cn) = survival_contamination(theta_hat, sigma, t);
    if su == 0.0 && cn == 0.0 {
        return Err(MetricsError::Degenerate);
    }
    if cn == 0.0 {
        return Ok(if su > 0.0 { 0.0 } else { 1.0 });
    }
    if su == 0.0 {
        return Ok(0.5);
    }
    Ok(0.5 - (su / cn).atan() / std::f64::consts::PI)
}

/// Monte-Carlo POE over `n_test` fresh test points.
pub fn poe_monte_carlo(
    theta_hat: &DVector<f64>,
    theta_star: &DVector<f64>,
    sigma: &Spectrum,
    latent: LatentDistribution,
    n_test: usize,
    seed: u64,
) -> f64 {
    assert!(n_test >= 1);
    let p = sigma.dim();
    let sqrt_lam: Vec<f64> = sigma.eigenvalues().iter().map(|l| l.sqrt()).collect();
    let mut errors = 0usize;
    let mut g = rng::trial_stream(seed, 0, Purpose::TestPoints);
    for _ in 0..n_test {
        let mut s_hat = 0.0;
        let mut s_star = 0.0;
        for j in 0..p {
            let xj = sqrt_lam[j] * latent.sample(&mut g);
            s_hat += xj * theta_hat[j];
            s_star += xj * theta_star[j];
        }
        if sign_pm1(s_hat) != sign_pm1(s_star) {
            errors += 1;
        }
    }
    errors as f64 / n_test as f64
}

/// `(ρ_k, R_k)` for a descending eigenvalue list with ridge intensity `c`.
pub fn effective_ranks(eigs: &[f64], c: f64, n: usize, k: usize) -> Result<(f64, f64), MetricsError> {
    let p = eigs.len();
    if k >= p {
        return Err(MetricsError::InvalidArg(format!("k = {k} out of range for p = {p}")));
    }
    let lam_next = eigs[k];
    if lam_next <= 0.0 {
        return Err(MetricsError::ZeroTailEigenvalue { index: k });
    }
    let tail: f64 = eigs[k..].iter().sum();
    let tail_sq: f64 = eigs[k..].iter().map(|l| l * l).sum();
    let rho = (c + tail) / (n as f64 * lam_next);
    let big_r = (c + tail) * (c + tail) / tail_sq;
    Ok((rho, big_r))
}

/// Effective ranks `ρ_k`, `R_k` for every split `k = 0..p-1` at once.
#[derive(Debug, Clone)]
pub struct EffectiveRanks {
    pub rho: Vec<f64>,
    pub big_r: Vec<f64>,
    pub c: f64,
    pub n: usize,
}

impl EffectiveRanks {
    /// Direct summation over all splits (left-to-right per split so the
    /// values agree bit-exactly with a naive oracle); entries where `ρ_k`
    /// or `R_k` are undefined (zero tail) hold infinity.
    pub fn profile(eigs: &[f64], c: f64, n: usize) -> Self {
        let p = eigs.len();
        let mut rho = Vec::with_capacity(p);
        let mut big_r = Vec::with_capacity(p);
        for k in 0..p {
            let tail: f64 = eigs[k..].iter().sum();
            let tail_sq: f64 = eigs[k..].iter().map(|l| l * l).sum();
            if eigs[k] > 0.0 {
                rho.push((c + tail) / (n as f64 * eigs[k]));
            } else {
                rho.push(f64::INFINITY);
            }
            if tail_sq > 0.0 {
                big_r.push((c + tail) * (c + tail) / tail_sq);
            } else {
                big_r.push(f64::INFINITY);
            }
        }
        Self { rho, big_r, c, n }
    }
}

/// Augmentation-transformed spectral quantities.
///
/// `Σ_aug = E^{-1/2} Σ̄ E^{-1/2}` with `E = E_x[Cov_g(x)]` and `Σ̄` the
/// covariance of the mean-augmented point. `lambda_aug` is descending;
/// `theta_aug_sorted` holds the coordinates of `θ*_aug = E^{1/2}θ*` in the
/// eigenbasis of `Σ_aug` (for independent-feature families this is just a
/// permutation of coordinates, recorded in `perm`).
#[derive(Debug, Clone)]
pub struct AugTransformed {
    pub lambda_aug: Vec<f64>,
    pub theta_aug_sorted: DVector<f64>,
    /// `perm[rank] = original feature index`, when the transform is diagonal.
    pub perm: Option<Vec<usize>>,
    /// Diagonal of `Σ̄` (covariance of the mean augmentation).
    pub sigma_bar: Vec<f64>,
    /// Condition number of `Σ_aug`.
    pub kappa: f64,
    /// Filled by the caller when a realized `X` is available.
    pub delta_g: Option<f64>,
}

fn sigma_bar_diag(spec: &Augmentation, sigma: &Spectrum) -> Vec<f64> {
    match spec {
        Augmentation::MaskBiased { beta } => {
            sigma.eigenvalues().iter().map(|l| (1.0 - beta) * (1.0 - beta) * l).collect()
        }
        Augmentation::GroupMix { .. } => sigma.eigenvalues().iter().map(|l| l / 2.0).collect(),
        // Constant shifts (salt with mu != 0) do not change the covariance.
        _ => sigma.eigenvalues().to_vec(),
    }
}

fn is_diagonal_family(spec: &Augmentation) -> bool {
    matches!(
        spec,
        Augmentation::GaussianNoise { .. }
            | Augmentation::MaskUnbiased { .. }
            | Augmentation::MaskBiased { .. }
            | Augmentation::MaskNonuniform { .. }
            | Augmentation::SaltPepper { .. }
            | Augmentation::GroupMix { .. }
    )
}

/// Compute the augmentation-transformed quantities for `(Σ, θ*, spec)`.
pub fn aug_transformed(
    sigma: &Spectrum,
    theta_star: &DVector<f64>,
    spec: &Augmentation,
) -> Result<AugTransformed, MetricsError> {
    let p = sigma.dim();
    let e = expected_cov_operator(spec, sigma)?;
    let bar = sigma_bar_diag(spec, sigma);

    if is_diagonal_family(spec) {
        let e_diag: Vec<f64> = (0..p).map(|i| e[(i, i)]).collect();
        if e_diag.iter().any(|&d| d <= 0.0) {
            return Err(MetricsError::SingularExpectedCov);
        }
        let lam_aug_raw: Vec<f64> = (0..p).map(|i| bar[i] / e_diag[i]).collect();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| lam_aug_raw[j].partial_cmp(&lam_aug_raw[i]).unwrap());
        let lambda_aug: Vec<f64> = order.iter().map(|&i| lam_aug_raw[i]).collect();
        let theta_aug_sorted =
            DVector::from_iterator(p, order.iter().map(|&i| e_diag[i].sqrt() * theta_star[i]));
        let kappa = lambda_aug[0] / lambda_aug[p - 1];
        return Ok(AugTransformed {
            lambda_aug,
            theta_aug_sorted,
            perm: Some(order),
            sigma_bar: bar,
            kappa,
            delta_g: None,
        });
    }

    // Dense path for rotation / correlated noise / cutout.
    let eig_e = sym_eig(&e)?;
    let min = eig_e.eigenvalues[p - 1];
    if min <= 1e-14 * eig_e.eigenvalues[0].max(1.0) {
        return Err(MetricsError::SingularExpectedCov);
    }
    let inv_sqrt = eig_e.apply_spectral(|l| 1.0 / l.sqrt());
    let sqrt_e = eig_e.apply_spectral(|l| l.sqrt());
    let bar_mat = DMatrix::from_diagonal(&DVector::from_vec(bar.clone()));
    let sigma_aug = &inv_sqrt * bar_mat * &inv_sqrt;
    let eig_aug = sym_eig(&sigma_aug)?;
    let lambda_aug: Vec<f64> = eig_aug.eigenvalues.iter().cloned().collect();
    let theta_aug = &sqrt_e * theta_star;
    let theta_aug_sorted = eig_aug.eigenvectors.transpose() * theta_aug;
    let kappa = lambda_aug[0] / lambda_aug[p - 1];
    Ok(AugTransformed {
        lambda_aug,
        theta_aug_sorted,
        perm: None,
        sigma_bar: bar,
        kappa,
        delta_g: None,
    })
}

/// Bias statistics of a (possibly biased) augmentation:
/// `ξ(x) = μ_G(x) - x`, `Cov_ξ = E_x[ξξᵀ]`, and the realized deviation
/// `Δ_ξ = ||(μ(X)-X)ᵀ(μ(X)-X)/n - Cov_ξ||` when `X` is supplied.
#[derive(Debug, Clone)]
pub struct BiasShift {
    pub cov_xi: DMatrix<f64>,
    pub theta_norm_xi: f64,
    pub delta_xi: Option<f64>,
}

pub fn bias_shift(
    spec: &Augmentation,
    sigma: &Spectrum,
    theta_star: &DVector<f64>,
    x: Option<&DMatrix<f64>>,
) -> BiasShift {
    let p = sigma.dim();
    let cov_xi = match spec {
        Augmentation::MaskBiased { beta } => sigma.to_matrix() * (beta * beta),
        Augmentation::GroupMix { .. } => {
            let c = (1.0 - 1.0 / 2.0f64.sqrt()).powi(2);
            sigma.to_matrix() * c
        }
        Augmentation::SaltPepper { beta, mu, .. } if *mu != 0.0 => {
            let shift = psi(*beta) * mu;
            DMatrix::from_element(p, p, shift * shift)
        }
        _ => DMatrix::zeros(p, p),
    };
    let theta_norm_xi = (theta_star.transpose() * &cov_xi * theta_star)[(0, 0)].max(0.0).sqrt();
    let delta_xi = x.map(|x| {
        let diff = mean_operator_matrix(spec, x) - x;
        let realized = diff.transpose() * &diff / x.nrows() as f64;
        operator_norm(&(realized - &cov_xi))
    });
    BiasShift { cov_xi, theta_norm_xi, delta_xi }
}

/// Transformed eigenvalues (pre-sorting, per original coordinate) of the
/// salt-and-pepper, unbiased-mask, and gaussian-noise families used by the
/// harmonic-mean identity: `λ_pepper⁻¹ = λ_rm⁻¹ + β⁻¹·λ_gn⁻¹` where the
/// gaussian reference is taken at the matched variance `(ψσ)²`.
pub fn pepper_harmonic_triple(beta: f64, variance: f64, sigma: &Spectrum) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let ps = psi(beta);
    let matched_var = (ps * variance.sqrt()).powi(2);
    let lam = sigma.eigenvalues();
    let pepper: Vec<f64> = lam.iter().map(|&l| l / (ps * (l + variance / (1.0 - beta)))).collect();
    let rm: Vec<f64> = lam.iter().map(|_| 1.0 / ps).collect();
    let gn: Vec<f64> = lam.iter().map(|&l| l / matched_var).collect();
    (pepper, rm, gn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_sparse_signal, sample_covariates, SignalModel};

    fn vecd(v: &[f64]) -> DVector<f64> {
        DVector::from_vec(v.to_vec())
    }

    #[test]
    fn mse_basics() {
        let sigma = Spectrum::explicit(vec![2.0, 1.0]).unwrap();
        let a = vecd(&[1.0, 2.0]);
        assert_eq!(mse(&a, &a, &sigma), 0.0);
        let iso = Spectrum::isotropic(2).unwrap();
        let b = vecd(&[0.0, 0.0]);
        assert_eq!(mse(&a, &b, &iso), 5.0);
    }

    #[test]
    fn mse_matches_monte_carlo_expectation() {
        let sigma = Spectrum::explicit(vec![3.0, 1.0, 0.5]).unwrap();
        let diff = vecd(&[0.4, -0.2, 1.0]);
        let theta_star = vecd(&[0.0, 0.0, 0.0]);
        let n = 100_000usize;
        let x = sample_covariates(&sigma, LatentDistribution::Gaussian, n, 99);
        let emp: f64 = (0..n)
            .map(|i| {
                let s = x.row(i).transpose().dot(&diff);
                s * s
            })
            .sum::<f64>()
            / n as f64;
        let exact = mse(&diff, &theta_star, &sigma);
        // Var of (x·d)² is 2·exact² for gaussian; 3 standard errors.
        let se = (2.0f64).sqrt() * exact / (n as f64).sqrt();
        assert!((emp - exact).abs() <= 3.0 * se, "emp {emp} vs exact {exact}");
    }

    #[test]
    fn survival_contamination_basics() {
        let sigma = Spectrum::explicit(vec![4.0, 1.0]).unwrap();
        let sig = make_sparse_signal(&sigma, 0).unwrap();
        let (su, cn) = survival_contamination(&sig.theta, &sigma, 0);
        assert!((su - 1.0).abs() < 1e-15);
        assert_eq!(cn, 0.0);

        let theta = vecd(&[0.5, 2.0]);
        let (su1, cn1) = survival_contamination(&theta, &sigma, 0);
        let scaled = &theta * 3.0;
        let (su3, cn3) = survival_contamination(&scaled, &sigma, 0);
        assert!((su3 - 3.0 * su1).abs() < 1e-12);
        assert!((cn3 - 3.0 * cn1).abs() < 1e-12);
        // Parseval split of the Σ-norm.
        assert!((su1 * su1 + cn1 * cn1 - sigma.weighted_sq_norm(&theta)).abs() < 1e-12);
    }

    #[test]
    fn classification_metrics_bundle() {
        let sigma = Spectrum::explicit(vec![4.0, 1.0]).unwrap();
        let m = classification_metrics(&vecd(&[0.5, 2.0]), &sigma, 0).unwrap();
        let (su, cn) = survival_contamination(&vecd(&[0.5, 2.0]), &sigma, 0);
        assert_eq!(m.survival, su);
        assert_eq!(m.contamination, cn);
        assert!((0.0..=1.0).contains(&m.poe));
    }

    #[test]
    fn poe_closed_form_cases() {
        let sigma = Spectrum::isotropic(2).unwrap();
        // SU == CN  ->  1/4.
        let theta = vecd(&[1.0, 1.0]);
        assert!((poe_closed_form(&theta, &sigma, 0).unwrap() - 0.25).abs() < 1e-15);
        // CN = 0, SU > 0  ->  0.
        let aligned = vecd(&[2.0, 0.0]);
        assert_eq!(poe_closed_form(&aligned, &sigma, 0).unwrap(), 0.0);
        // SU = 0  ->  1/2.
        let orth = vecd(&[0.0, 1.0]);
        assert_eq!(poe_closed_form(&orth, &sigma, 0).unwrap(), 0.5);
        // Degenerate.
        let zero = vecd(&[0.0, 0.0]);
        assert!(matches!(poe_closed_form(&zero, &sigma, 0), Err(MetricsError::Degenerate)));
    }

    #[test]
    fn poe_monte_carlo_invariances() {
        let sigma = Spectrum::isotropic(3).unwrap();
        let theta_star = vecd(&[1.0, 0.0, 0.0]);
        let aligned = &theta_star * 2.5;
        assert_eq!(poe_monte_carlo(&aligned, &theta_star, &sigma, LatentDistribution::Gaussian, 2000, 3), 0.0);

        let theta_hat = vecd(&[0.3, -1.0, 0.7]);
        let a = poe_monte_carlo(&theta_hat, &theta_star, &sigma, LatentDistribution::Gaussian, 5000, 4);
        let b = poe_monte_carlo(&(&theta_hat * 7.0), &theta_star, &sigma, LatentDistribution::Gaussian, 5000, 4);
        assert_eq!(a, b);

        // Orthogonal 1-sparse estimator on independent symmetric features.
        let n = 100_000;
        let wrong = vecd(&[0.0, 1.0, 0.0]);
        let poe = poe_monte_carlo(&wrong, &theta_star, &sigma, LatentDistribution::Gaussian, n, 5);
        assert!((poe - 0.5).abs() <= 3.0 / (2.0 * (n as f64).sqrt()), "poe {poe}");
    }

    #[test]
    fn effective_ranks_isotropic() {
        let eigs = vec![1.0; 10];
        let (rho, big_r) = effective_ranks(&eigs, 0.0, 5, 0).unwrap();
        assert!((rho - 2.0).abs() < 1e-15); // p/n
        assert!((big_r - 10.0).abs() < 1e-12); // p
    }

    #[test]
    fn effective_ranks_mask_transformed() {
        // Flat transformed spectrum ψ^{-1}·I with intensity c = n gives
        // ρ_k = (ψn + p - k)/n and R_k = (ψn + p - k)²/(p - k).
        let (psi_v, n, p) = (0.5, 32usize, 48usize);
        let eigs = vec![1.0 / psi_v; p];
        for k in [0usize, 7, 20] {
            let (rho, big_r) = effective_ranks(&eigs, n as f64, n, k).unwrap();
            let a = psi_v * n as f64 + (p - k) as f64;
            assert!((rho - a / n as f64).abs() < 1e-12);
            assert!((big_r - a * a / (p - k) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn effective_ranks_brute_force_oracle() {
        let sigma = Spectrum::geometric(0.97, 200).unwrap();
        let eigs = sigma.eigenvalues();
        let profile = EffectiveRanks::profile(eigs, 13.0, 64);
        for k in 0..200 {
            let tail: f64 = eigs[k..].iter().sum();
            let tail_sq: f64 = eigs[k..].iter().map(|l| l * l).sum();
            let rho = (13.0 + tail) / (64.0 * eigs[k]);
            let big_r = (13.0 + tail) * (13.0 + tail) / tail_sq;
            assert_eq!(profile.rho[k], rho, "rho mismatch at k={k}");
            assert_eq!(profile.big_r[k], big_r, "R mismatch at k={k}");
            let (r1, r2) = effective_ranks(eigs, 13.0, 64, k).unwrap();
            assert_eq!(r1, rho);
            assert_eq!(r2, big_r);
        }
    }

    #[test]
    fn zero_tail_eigenvalue_rejected() {
        let eigs = vec![1.0, 0.0];
        assert!(matches!(
            effective_ranks(&eigs, 0.0, 4, 1),
            Err(MetricsError::ZeroTailEigenvalue { index: 1 })
        ));
    }

    #[test]
    fn aug_transformed_mask() {
        let sigma = Spectrum::explicit(vec![4.0, 2.0, 1.0]).unwrap();
        let theta = vecd(&[0.5, -1.0, 2.0]);
        let spec = Augmentation::mask_unbiased(0.5).unwrap();
        let at = aug_transformed(&sigma, &theta, &spec).unwrap();
        // Σ_aug = ψ^{-1}I with ψ = 1.
        for l in &at.lambda_aug {
            assert!((l - 1.0).abs() < 1e-14);
        }
        assert!((at.kappa - 1.0).abs() < 1e-14);
        // θ*_aug = √ψ Σ^{1/2} θ*.
        let perm = at.perm.as_ref().unwrap();
        for (rank, &orig) in perm.iter().enumerate() {
            let want = sigma.eigenvalues()[orig].sqrt() * theta[orig];
            assert!((at.theta_aug_sorted[rank] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn aug_transformed_gaussian() {
        let sigma = Spectrum::explicit(vec![4.0, 1.0]).unwrap();
        let theta = vecd(&[1.0, 1.0]);
        let spec = Augmentation::gaussian_noise(2.0);
        let at = aug_transformed(&sigma, &theta, &spec).unwrap();
        assert!((at.lambda_aug[0] - 2.0).abs() < 1e-14);
        assert!((at.lambda_aug[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn aug_transformed_singular_expected_cov() {
        let sigma = Spectrum::isotropic(3).unwrap();
        let theta = vecd(&[1.0, 0.0, 0.0]);
        let err = aug_transformed(&sigma, &theta, &Augmentation::mask_unbiased(0.0).unwrap()).unwrap_err();
        assert!(matches!(err, MetricsError::SingularExpectedCov));
    }

    #[test]
    fn aug_transformed_group_mix_is_identity() {
        let sigma = Spectrum::geometric(0.9, 8).unwrap();
        let theta = SignalModel::isotropic_random(8, 3).theta;
        let spec = Augmentation::group_mix(Some(sigma.clone()));
        let at = aug_transformed(&sigma, &theta, &spec).unwrap();
        for l in &at.lambda_aug {
            assert!((l - 1.0).abs() < 1e-12);
        }
        for (i, &b) in at.sigma_bar.iter().enumerate() {
            assert!((b - sigma.eigenvalues()[i] / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn pepper_harmonic_identity_exact() {
        let sigma = Spectrum::geometric(0.95, 12).unwrap();
        let (beta, var) = (0.3, 1.7);
        let (pepper, rm, gn) = pepper_harmonic_triple(beta, var, &sigma);
        for i in 0..12 {
            let lhs = 1.0 / pepper[i];
            let rhs = 1.0 / rm[i] + (1.0 / beta) / gn[i];
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs(), "coordinate {i}");
        }
    }

    #[test]
    fn independent_feature_bias_matches_permuted_form() {
        // The general sorted-basis expression equals the reordered original-
        // coordinate expression for diagonal families.
        let sigma = Spectrum::explicit(vec![5.0, 3.0, 2.0, 0.5]).unwrap();
        let theta = vecd(&[1.0, -0.5, 0.25, 2.0]);
        let spec = Augmentation::salt_pepper(0.3, 0.0, 0.8).unwrap();
        let at = aug_transformed(&sigma, &theta, &spec).unwrap();
        let perm = at.perm.as_ref().unwrap();
        let e = expected_cov_operator(&spec, &sigma).unwrap();
        let k1 = 2;
        // Tail: ||P_{k1+1:p} θ*_aug||²_{Σ_aug} == Σ_{i in π(k1+1:p)} λ_i θ_i².
        let tail_general: f64 = (k1..4)
            .map(|r| at.lambda_aug[r] * at.theta_aug_sorted[r] * at.theta_aug_sorted[r])
            .sum();
        let tail_perm: f64 =
            perm[k1..].iter().map(|&i| sigma.eigenvalues()[i] * theta[i] * theta[i]).sum();
        assert!((tail_general - tail_perm).abs() < 1e-12);
        // Head: ||P_{1:k1} θ*_aug||²_{Σ_aug^{-1}} == Σ_{i in π(1:k1)} E_ii² θ_i²/λ_i.
        let head_general: f64 = (0..k1)
            .map(|r| at.theta_aug_sorted[r] * at.theta_aug_sorted[r] / at.lambda_aug[r])
            .sum();
        let head_perm: f64 = perm[..k1]
            .iter()
            .map(|&i| e[(i, i)] * e[(i, i)] * theta[i] * theta[i] / sigma.eigenvalues()[i])
            .sum();
        assert!((head_general - head_perm).abs() < 1e-12);
    }

    #[test]
    fn bias_shift_closed_forms() {
        let sigma = Spectrum::explicit(vec![2.0, 1.0]).unwrap();
        let theta = vecd(&[1.0, 1.0]);
        let unb = bias_shift(&Augmentation::gaussian_noise(1.0), &sigma, &theta, None);
        assert_eq!(unb.cov_xi, DMatrix::zeros(2, 2));
        assert_eq!(unb.theta_norm_xi, 0.0);

        let b = bias_shift(&Augmentation::mask_biased(0.25).unwrap(), &sigma, &theta, None);
        assert!((b.cov_xi - sigma.to_matrix() * 0.0625).norm() < 1e-14);

        let gm = bias_shift(&Augmentation::group_mix(None), &sigma, &theta, None);
        let c = (1.0 - 1.0 / 2.0f64.sqrt()).powi(2);
        assert!((gm.cov_xi - sigma.to_matrix() * c).norm() < 1e-14);
    }

    #[test]
    fn bias_shift_delta_xi_mask() {
        // For the biased mask, ξ(x) = -βx so Δ_ξ = β²·||XᵀX/n − Σ||.
        let sigma = Spectrum::isotropic(4).unwrap();
        let x = sample_covariates(&sigma, LatentDistribution::Gaussian, 50, 8);
        let beta = 0.3;
        let shift =
            bias_shift(&Augmentation::mask_biased(beta).unwrap(), &sigma, &vecd(&[1.0; 4]), Some(&x));
        let realized = x.transpose() * &x / 50.0;
        let want = operator_norm(&((realized - sigma.to_matrix()) * beta * beta));
        assert!((shift.delta_xi.unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn decomposition_triangle_and_edge_cases() {
        let sigma = Spectrum::geometric_with_ratio(0.6, 24).unwrap();
        let signal = SignalModel::isotropic_random(24, 5);
        let x = sample_covariates(&sigma, LatentDistribution::Gaussian, 12, 5);
        let spec = Augmentation::mask_unbiased(0.3).unwrap();

        // Noiseless labels  ->  variance exactly zero.
        let y0 = &x * &signal.theta;
        let d0 = decompose_mse(&x, &y0, &signal.theta, &sigma, &spec).unwrap();
        assert!(d0.variance < 1e-20);

        // Gaussian noise  ->  approximation error exactly zero.
        let y = crate::model::gen_regression_labels(&x, &signal.theta, 0.5, LatentDistribution::Gaussian, 5);
        let dg = decompose_mse(&x, &y, &signal.theta, &sigma, &Augmentation::gaussian_noise(1.0)).unwrap();
        assert!(dg.approx_error < 1e-18);

        // Triangle inequality on Σ-norms.
        let d = decompose_mse(&x, &y, &signal.theta, &sigma, &spec).unwrap();
        let lhs = d.total_mse.sqrt();
        let rhs = d.bias.sqrt() + d.variance.sqrt() + d.approx_error.sqrt();
        assert!(lhs <= rhs + 1e-8, "triangle violated: {lhs} > {rhs}");
    }
}
