//! Augmentation families: sampling, mean operators, covariance operators,
//! and the normalized approximation-error statistic Δ_G.
//!
//! Three covariance views coexist and serve different purposes:
//!
//! * [`empirical_cov_operator`] — the closed-form `Cov_G(X)` used by the
//!   estimators (rotation and cutout follow the published operator
//!   conventions, which for those two families are large-p approximations
//!   of the sampling process);
//! * [`expected_cov_operator`] — its population counterpart `E_x[Cov_g(x)]`;
//! * [`per_sample_cov`] — the exact covariance of a single draw `g(x)`,
//!   which is what [`monte_carlo_cov`] converges to.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::model::{LatentDistribution, Spectrum};
use crate::numerics::{operator_norm, sym_eig};
use crate::rng::{self, Purpose};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("rotation augmentation requires even dimension, got p = {p}")]
    OddDimensionForRotation { p: usize },
    #[error("group-mix closed form requires the data spectrum")]
    MissingSpectrum,
    #[error("expected augmentation covariance is singular (min eigenvalue {min_eigenvalue:.3e})")]
    SingularExpectedCov { min_eigenvalue: f64 },
    #[error("invalid augmentation parameter: {0}")]
    InvalidParam(String),
}

/// An augmentation family with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Augmentation {
    /// `g(x) = x + n`, `n ~ N(0, σ²I)`.
    GaussianNoise { variance: f64 },
    /// `g(x) = x + n`, `n ~ N(0, W)` for symmetric PSD `W`.
    CorrelatedNoise { w: DMatrix<f64> },
    /// `g(x)_i = b_i x_i / (1-β)`, `b_i ~ Bernoulli(1-β)`.
    MaskUnbiased { beta: f64 },
    /// `g(x)_i = b_i x_i` without rescaling; biased with mean `(1-β)x`.
    MaskBiased { beta: f64 },
    /// Per-feature unbiased mask with rates `β_1..β_p`.
    MaskNonuniform { betas: Vec<f64> },
    /// Zero out `k` cyclically consecutive coordinates, rescale by `p/(p-k)`.
    Cutout { k: usize },
    /// Each coordinate kept as `x_i/(1-β)` w.p. `1-β`, else replaced by
    /// `N(μ, σ²)/(1-β)`; unbiased exactly when `μ = 0`.
    SaltPepper { beta: f64, mu: f64, variance: f64 },
    /// Simultaneous rotation by `α` in p/2 Haar-random orthogonal planes,
    /// debiased by subtracting the exact mean shift.
    Rotation { angle_deg: f64 },
    /// `g(x) = (x + x')/√2` with `x'` an independent copy resampled from
    /// the spectrum; the spectrum is needed for drawing and closed forms.
    GroupMix { spectrum: Option<Spectrum>, latent: LatentDistribution },
}

impl Augmentation {
    pub fn gaussian_noise(variance: f64) -> Self {
        Augmentation::GaussianNoise { variance }
    }

    pub fn mask_unbiased(beta: f64) -> Result<Self, AugmentError> {
        if !(0.0..1.0).contains(&beta) {
            return Err(AugmentError::InvalidParam(format!("unbiased mask needs beta in [0,1), got {beta}")));
        }
        Ok(Augmentation::MaskUnbiased { beta })
    }

    pub fn mask_biased(beta: f64) -> Result<Self, AugmentError> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(AugmentError::InvalidParam(format!("biased mask needs beta in [0,1], got {beta}")));
        }
        Ok(Augmentation::MaskBiased { beta })
    }

    pub fn mask_nonuniform(betas: Vec<f64>) -> Result<Self, AugmentError> {
        if betas.iter().any(|b| !(0.0..1.0).contains(b)) {
            return Err(AugmentError::InvalidParam("per-feature mask rates must lie in [0,1)".into()));
        }
        Ok(Augmentation::MaskNonuniform { betas })
    }

    pub fn cutout(k: usize) -> Self {
        Augmentation::Cutout { k }
    }

    pub fn salt_pepper(beta: f64, mu: f64, variance: f64) -> Result<Self, AugmentError> {
        if !(0.0..1.0).contains(&beta) {
            return Err(AugmentError::InvalidParam(format!("salt-pepper needs beta in [0,1), got {beta}")));
        }
        if variance < 0.0 {
            return Err(AugmentError::InvalidParam("salt-pepper variance must be >= 0".into()));
        }
        Ok(Augmentation::SaltPepper { beta, mu, variance })
    }

    pub fn rotation(angle_deg: f64) -> Result<Self, AugmentError> {
        if !(0.0..=180.0).contains(&angle_deg) {
            return Err(AugmentError::InvalidParam(format!("rotation angle must be in [0,180], got {angle_deg}")));
        }
        Ok(Augmentation::Rotation { angle_deg })
    }

    pub fn correlated_noise(w: DMatrix<f64>) -> Result<Self, AugmentError> {
        let eig = sym_eig(&w).map_err(|e| AugmentError::InvalidParam(format!("W: {e}")))?;
        let min = eig.eigenvalues[eig.eigenvalues.len() - 1];
        if min < -1e-10 * eig.eigenvalues[0].abs().max(1.0) {
            return Err(AugmentError::InvalidParam(format!("W must be PSD, min eigenvalue {min:.3e}")));
        }
        Ok(Augmentation::CorrelatedNoise { w })
    }

    pub fn group_mix(spectrum: Option<Spectrum>) -> Self {
        Augmentation::GroupMix { spectrum, latent: LatentDistribution::Gaussian }
    }

    /// Whether `μ_G(x) = x` for every x.
    pub fn is_unbiased(&self) -> bool {
        match self {
            Augmentation::GaussianNoise { .. }
            | Augmentation::CorrelatedNoise { .. }
            | Augmentation::MaskUnbiased { .. }
            | Augmentation::MaskNonuniform { .. }
            | Augmentation::Cutout { .. }
            | Augmentation::Rotation { .. } => true,
            Augmentation::SaltPepper { mu, .. } => *mu == 0.0,
            Augmentation::MaskBiased { beta } => *beta == 0.0,
            Augmentation::GroupMix { .. } => false,
        }
    }

    /// Short identifier used in provenance records and result tables.
    pub fn label(&self) -> String {
        match self {
            Augmentation::GaussianNoise { variance } => format!("gaussian_noise(var={variance})"),
            Augmentation::CorrelatedNoise { .. } => "correlated_noise".into(),
            Augmentation::MaskUnbiased { beta } => format!("mask_unbiased(beta={beta})"),
            Augmentation::MaskBiased { beta } => format!("mask_biased(beta={beta})"),
            Augmentation::MaskNonuniform { .. } => "mask_nonuniform".into(),
            Augmentation::Cutout { k } => format!("cutout(k={k})"),
            Augmentation::SaltPepper { beta, mu, variance } => {
                format!("salt_pepper(beta={beta},mu={mu},var={variance})")
            }
            Augmentation::Rotation { angle_deg } => format!("rotation(alpha={angle_deg})"),
            Augmentation::GroupMix { .. } => "group_mix".into(),
        }
    }
}

/// `ψ = β/(1-β)`.
pub fn psi(beta: f64) -> f64 {
    beta / (1.0 - beta)
}

fn check_rotation_dim(p: usize) -> Result<(), AugmentError> {
    if !p.is_multiple_of(2) || p < 2 {
        Err(AugmentError::OddDimensionForRotation { p })
    } else {
        Ok(())
    }
}

/// Closed-form augmentation mean `μ_G(x)`; no sampling involved.
pub fn mean_operator(spec: &Augmentation, x: &DVector<f64>) -> DVector<f64> {
    match spec {
        Augmentation::MaskBiased { beta } => x * (1.0 - beta),
        Augmentation::SaltPepper { beta, mu, .. } => {
            if *mu == 0.0 {
                x.clone()
            } else {
                x.add_scalar(psi(*beta) * mu)
            }
        }
        Augmentation::GroupMix { .. } => x / 2.0f64.sqrt(),
        _ => x.clone(),
    }
}

/// Row-wise mean-augmented data matrix `μ_G(X)`.
pub fn mean_operator_matrix(spec: &Augmentation, x: &DMatrix<f64>) -> DMatrix<f64> {
    match spec {
        Augmentation::MaskBiased { beta } => x * (1.0 - beta),
        Augmentation::SaltPepper { beta, mu, .. } => {
            if *mu == 0.0 {
                x.clone()
            } else {
                x.add_scalar(psi(*beta) * mu)
            }
        }
        Augmentation::GroupMix { .. } => x / 2.0f64.sqrt(),
        _ => x.clone(),
    }
}

/// Haar-random orthogonal matrix via QR of a Gaussian matrix with the
/// R-diagonal sign correction.
fn haar_orthogonal(p: usize, g: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(p, p, |_, _| g.sample::<f64, _>(StandardNormal));
    let qr = m.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            for i in 0..p {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Apply the raw (biased) multi-plane rotation `h(x) = cos(α)x + sin(α)Ax`
/// where `A = QJQᵀ` pairs consecutive Haar basis vectors. Exposed so the
/// isometry property of the un-debiased rotation can be tested directly.
pub fn rotate_raw(x: &DVector<f64>, angle_deg: f64, g: &mut ChaCha8Rng) -> Result<DVector<f64>, AugmentError> {
    let p = x.len();
    check_rotation_dim(p)?;
    let alpha = angle_deg.to_radians();
    let q = haar_orthogonal(p, g);
    let yv = q.transpose() * x;
    let mut jy = DVector::zeros(p);
    for i in 0..p / 2 {
        jy[2 * i] = yv[2 * i + 1];
        jy[2 * i + 1] = -yv[2 * i];
    }
    Ok(x * alpha.cos() + q * jy * alpha.sin())
}

fn draw_row(
    spec: &Augmentation,
    x: &DVector<f64>,
    w_sqrt: Option<&DMatrix<f64>>,
    g: &mut ChaCha8Rng,
) -> Result<DVector<f64>, AugmentError> {
    let p = x.len();
    Ok(match spec {
        Augmentation::GaussianNoise { variance } => {
            let sd = variance.sqrt();
            DVector::from_fn(p, |i, _| x[i] + sd * g.sample::<f64, _>(StandardNormal))
        }
        Augmentation::CorrelatedNoise { .. } => {
            let z = DVector::from_fn(p, |_, _| g.sample::<f64, _>(StandardNormal));
            x + w_sqrt.expect("precomputed W^{1/2}") * z
        }
        Augmentation::MaskUnbiased { beta } => {
            let keep = 1.0 - beta;
            DVector::from_fn(p, |i, _| if g.gen::<f64>() < keep { x[i] / keep } else { 0.0 })
        }
        Augmentation::MaskBiased { beta } => {
            let keep = 1.0 - beta;
            DVector::from_fn(p, |i, _| if g.gen::<f64>() < keep { x[i] } else { 0.0 })
        }
        Augmentation::MaskNonuniform { betas } => {
            if betas.len() != p {
                return Err(AugmentError::InvalidParam(format!(
                    "mask rates have length {}, expected {p}",
                    betas.len()
                )));
            }
            DVector::from_fn(p, |i, _| {
                let keep = 1.0 - betas[i];
                if g.gen::<f64>() < keep {
                    x[i] / keep
                } else {
                    0.0
                }
            })
        }
        Augmentation::Cutout { k } => {
            if *k >= p {
                return Err(AugmentError::InvalidParam(format!("cutout needs k < p, got k={k}, p={p}")));
            }
            let start = g.gen_range(0..p);
            let scale = p as f64 / (p - k) as f64;
            let mut out = x * scale;
            for d in 0..*k {
                out[(start + d) % p] = 0.0;
            }
            out
        }
        Augmentation::SaltPepper { beta, mu, variance } => {
            let keep = 1.0 - beta;
            let sd = variance.sqrt();
            DVector::from_fn(p, |i, _| {
                if g.gen::<f64>() < keep {
                    x[i] / keep
                } else {
                    (mu + sd * g.sample::<f64, _>(StandardNormal)) / keep
                }
            })
        }
        Augmentation::Rotation { angle_deg } => {
            // Debiased: h(x) - (E h(x) - x) = x + sin(α) A x.
            let alpha = angle_deg.to_radians();
            let h = rotate_raw(x, *angle_deg, g)?;
            h - x * (alpha.cos() - 1.0)
        }
        Augmentation::GroupMix { spectrum, latent } => {
            let spectrum = spectrum.as_ref().ok_or(AugmentError::MissingSpectrum)?;
            if spectrum.dim() != p {
                return Err(AugmentError::InvalidParam(format!(
                    "group-mix spectrum has dim {}, expected {p}",
                    spectrum.dim()
                )));
            }
            let fresh = DVector::from_fn(p, |i, _| spectrum.eigenvalues()[i].sqrt() * latent.sample(g));
            (x + fresh) / 2.0f64.sqrt()
        }
    })
}

fn correlated_sqrt(spec: &Augmentation) -> Result<Option<DMatrix<f64>>, AugmentError> {
    if let Augmentation::CorrelatedNoise { w } = spec {
        let eig = sym_eig(w).map_err(|e| AugmentError::InvalidParam(format!("W: {e}")))?;
        Ok(Some(eig.apply_spectral(|l| l.max(0.0).sqrt())))
    } else {
        Ok(None)
    }
}

/// Repeated single-row sampler that precomputes family-level factorizations
/// (currently `W^{1/2}` for correlated noise) once.
pub struct RowSampler<'a> {
    spec: &'a Augmentation,
    w_sqrt: Option<DMatrix<f64>>,
}

impl<'a> RowSampler<'a> {
    pub fn new(spec: &'a Augmentation) -> Result<Self, AugmentError> {
        Ok(Self { spec, w_sqrt: correlated_sqrt(spec)? })
    }

    pub fn draw(&self, x: &DVector<f64>, g: &mut ChaCha8Rng) -> Result<DVector<f64>, AugmentError> {
        draw_row(self.spec, x, self.w_sqrt.as_ref(), g)
    }
}

/// Augment every row of `X` independently: `G(X) = [g_1(x_1) … g_n(x_n)]ᵀ`.
///
/// Each row uses its own sub-stream, so the result is independent of row
/// evaluation order and deterministic given `seed`.
pub fn draw_augmented(spec: &Augmentation, x: &DMatrix<f64>, seed: u64) -> Result<DMatrix<f64>, AugmentError> {
    draw_augmented_indexed(spec, x, seed, 0)
}

/// [`draw_augmented`] with an extra index so repeated stacked draws
/// (pre-computed augmentation, aSGD steps) get disjoint streams.
pub fn draw_augmented_indexed(
    spec: &Augmentation,
    x: &DMatrix<f64>,
    seed: u64,
    draw_index: u64,
) -> Result<DMatrix<f64>, AugmentError> {
    let w_sqrt = correlated_sqrt(spec)?;
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for i in 0..x.nrows() {
        let mut g = rng::stream(seed, &[Purpose::Augmentation as u64, draw_index, i as u64]);
        let row = draw_row(spec, &x.row(i).transpose(), w_sqrt.as_ref(), &mut g)?;
        out.set_row(i, &row.transpose());
    }
    Ok(out)
}

/// Cutout weight at cyclic distance `d` as published: near/far switch at
/// `k-1`, diagonal pinned to the exact `k/p`.
fn cutout_m_published(d: usize, k: usize, p: usize) -> f64 {
    let (kf, pf) = (k as f64, p as f64);
    if d == 0 {
        kf / pf
    } else if d < k.saturating_sub(1) {
        kf / pf - d as f64 / (pf - kf)
    } else {
        kf / pf - kf / (pf - kf)
    }
}

/// Exact cutout weight: both coordinates survive a length-k cyclic window
/// unless their cyclic distance is below k.
fn cutout_m_exact(d: usize, k: usize, p: usize) -> f64 {
    let (kf, pf) = (k as f64, p as f64);
    if d < k {
        kf / pf - d as f64 / (pf - kf)
    } else {
        kf / pf - kf / (pf - kf)
    }
}

fn cyclic_distance(i: usize, j: usize, p: usize) -> usize {
    let d = i.abs_diff(j);
    d.min(p - d)
}

/// The published circulant cutout weight matrix `M`.
pub fn cutout_weight_matrix(k: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| cutout_m_published(cyclic_distance(i, j, p), k, p))
}

/// Closed-form empirical covariance operator `Cov_G(X)`.
pub fn empirical_cov_operator(spec: &Augmentation, x: &DMatrix<f64>) -> Result<DMatrix<f64>, AugmentError> {
    let (n, p) = (x.nrows(), x.ncols());
    let nf = n as f64;
    Ok(match spec {
        Augmentation::GaussianNoise { variance } => DMatrix::identity(p, p) * *variance,
        Augmentation::CorrelatedNoise { w } => w.clone(),
        Augmentation::MaskUnbiased { beta } => {
            let gram_diag = (x.transpose() * x).diagonal() / nf;
            DMatrix::from_diagonal(&(gram_diag * psi(*beta)))
        }
        Augmentation::MaskBiased { beta } => {
            let gram_diag = (x.transpose() * x).diagonal() / nf;
            DMatrix::from_diagonal(&(gram_diag * (beta * (1.0 - beta))))
        }
        Augmentation::MaskNonuniform { betas } => {
            if betas.len() != p {
                return Err(AugmentError::InvalidParam(format!(
                    "mask rates have length {}, expected {p}",
                    betas.len()
                )));
            }
            let gram_diag = (x.transpose() * x).diagonal() / nf;
            let scaled = DVector::from_fn(p, |i, _| psi(betas[i]) * gram_diag[i]);
            DMatrix::from_diagonal(&scaled)
        }
        Augmentation::Cutout { k } => {
            if *k >= p {
                return Err(AugmentError::InvalidParam(format!("cutout needs k < p, got k={k}, p={p}")));
            }
            let gram = x.transpose() * x / nf;
            let m = cutout_weight_matrix(*k, p);
            (p as f64 / (p - k) as f64) * m.component_mul(&gram)
        }
        Augmentation::SaltPepper { beta, mu, variance } => {
            let centered = x.add_scalar(-mu);
            let gram_diag = (centered.transpose() * &centered).diagonal() / nf;
            let ps = psi(*beta);
            DMatrix::from_diagonal(&(gram_diag * ps))
                + DMatrix::identity(p, p) * (ps * variance / (1.0 - beta))
        }
        Augmentation::Rotation { angle_deg } => {
            check_rotation_dim(p)?;
            let alpha = angle_deg.to_radians();
            let gram = x.transpose() * x;
            let c = 4.0 * (1.0 - alpha.cos()) / (nf * p as f64);
            (DMatrix::identity(p, p) * gram.trace() - gram) * c
        }
        Augmentation::GroupMix { spectrum, .. } => match spectrum {
            Some(s) => {
                if s.dim() != p {
                    return Err(AugmentError::InvalidParam(format!(
                        "group-mix spectrum has dim {}, expected {p}",
                        s.dim()
                    )));
                }
                s.to_matrix() / 2.0
            }
            None => x.transpose() * x / (2.0 * nf),
        },
    })
}

/// Population covariance operator `E_x[Cov_g(x)]` for diagonal data
/// covariance `Σ`.
pub fn expected_cov_operator(spec: &Augmentation, sigma: &Spectrum) -> Result<DMatrix<f64>, AugmentError> {
    let p = sigma.dim();
    let lam = sigma.eigenvalues();
    Ok(match spec {
        Augmentation::GaussianNoise { variance } => DMatrix::identity(p, p) * *variance,
        Augmentation::CorrelatedNoise { w } => {
            if w.nrows() != p {
                return Err(AugmentError::InvalidParam(format!("W is {}x{}, expected {p}x{p}", w.nrows(), w.ncols())));
            }
            w.clone()
        }
        Augmentation::MaskUnbiased { beta } => sigma.to_matrix() * psi(*beta),
        Augmentation::MaskBiased { beta } => sigma.to_matrix() * (beta * (1.0 - beta)),
        Augmentation::MaskNonuniform { betas } => {
            if betas.len() != p {
                return Err(AugmentError::InvalidParam(format!(
                    "mask rates have length {}, expected {p}",
                    betas.len()
                )));
            }
            let d = DVector::from_fn(p, |i, _| psi(betas[i]) * lam[i]);
            DMatrix::from_diagonal(&d)
        }
        Augmentation::Cutout { k } => {
            if *k >= p {
                return Err(AugmentError::InvalidParam(format!("cutout needs k < p, got k={k}, p={p}")));
            }
            sigma.to_matrix() * (*k as f64 / (p - k) as f64)
        }
        Augmentation::SaltPepper { beta, mu, variance } => {
            let ps = psi(*beta);
            let d = DVector::from_fn(p, |i, _| ps * (lam[i] + mu * mu) + ps * variance / (1.0 - beta));
            DMatrix::from_diagonal(&d)
        }
        Augmentation::Rotation { angle_deg } => {
            check_rotation_dim(p)?;
            let alpha = angle_deg.to_radians();
            let c = 4.0 * (1.0 - alpha.cos()) / p as f64;
            (DMatrix::identity(p, p) * sigma.trace() - sigma.to_matrix()) * c
        }
        Augmentation::GroupMix { .. } => sigma.to_matrix() / 2.0,
    })
}

/// Exact covariance of a single draw `g(x)` around its mean `μ_G(x)`.
///
/// For rotation and cutout this is the exact sampling covariance rather
/// than the published operator approximation; [`monte_carlo_cov`] converges
/// to this matrix for every family.
pub fn per_sample_cov(spec: &Augmentation, x: &DVector<f64>) -> Result<DMatrix<f64>, AugmentError> {
    let p = x.len();
    Ok(match spec {
        Augmentation::GaussianNoise { variance } => DMatrix::identity(p, p) * *variance,
        Augmentation::CorrelatedNoise { w } => w.clone(),
        Augmentation::MaskUnbiased { beta } => {
            DMatrix::from_diagonal(&x.map(|v| psi(*beta) * v * v))
        }
        Augmentation::MaskBiased { beta } => {
            DMatrix::from_diagonal(&x.map(|v| beta * (1.0 - beta) * v * v))
        }
        Augmentation::MaskNonuniform { betas } => {
            if betas.len() != p {
                return Err(AugmentError::InvalidParam(format!(
                    "mask rates have length {}, expected {p}",
                    betas.len()
                )));
            }
            DMatrix::from_diagonal(&DVector::from_fn(p, |i, _| psi(betas[i]) * x[i] * x[i]))
        }
        Augmentation::Cutout { k } => {
            if *k >= p {
                return Err(AugmentError::InvalidParam(format!("cutout needs k < p, got k={k}, p={p}")));
            }
            let scale = p as f64 / (p - k) as f64;
            DMatrix::from_fn(p, p, |i, j| {
                scale * cutout_m_exact(cyclic_distance(i, j, p), *k, p) * x[i] * x[j]
            })
        }
        Augmentation::SaltPepper { beta, mu, variance } => {
            let ps = psi(*beta);
            let floor = ps * variance / (1.0 - beta);
            DMatrix::from_diagonal(&x.map(|v| ps * (v - mu) * (v - mu) + floor))
        }
        Augmentation::Rotation { angle_deg } => {
            check_rotation_dim(p)?;
            let s2 = angle_deg.to_radians().sin().powi(2);
            let c = s2 / (p as f64 - 1.0);
            (DMatrix::identity(p, p) * x.norm_squared() - x * x.transpose()) * c
        }
        Augmentation::GroupMix { spectrum, .. } => {
            let s = spectrum.as_ref().ok_or(AugmentError::MissingSpectrum)?;
            if s.dim() != p {
                return Err(AugmentError::InvalidParam(format!(
                    "group-mix spectrum has dim {}, expected {p}",
                    s.dim()
                )));
            }
            s.to_matrix() / 2.0
        }
    })
}

/// Empirical covariance of `m` independent draws of `g(x)` about their
/// empirical mean.
pub fn monte_carlo_cov(
    spec: &Augmentation,
    x: &DVector<f64>,
    m: usize,
    seed: u64,
) -> Result<DMatrix<f64>, AugmentError> {
    if m < 2 {
        return Err(AugmentError::InvalidParam(format!("monte_carlo_cov needs M >= 2, got {m}")));
    }
    let p = x.len();
    let w_sqrt = correlated_sqrt(spec)?;
    let mut sum = DVector::zeros(p);
    let mut sum_outer = DMatrix::zeros(p, p);
    for draw in 0..m {
        let mut g = rng::stream(seed, &[Purpose::Augmentation as u64, draw as u64]);
        let gx = draw_row(spec, x, w_sqrt.as_ref(), &mut g)?;
        sum += &gx;
        sum_outer.syger(1.0, &gx, &gx, 1.0);
    }
    // syger fills the lower triangle; mirror it before combining.
    for i in 0..p {
        for j in (i + 1)..p {
            sum_outer[(i, j)] = sum_outer[(j, i)];
        }
    }
    let mf = m as f64;
    let mean = sum / mf;
    Ok(sum_outer / mf - &mean * mean.transpose())
}

/// Empirical mean of `m` draws of `g(x)` together with the per-coordinate
/// sample standard deviations (test helper for the unbiasedness contract).
pub fn monte_carlo_mean(
    spec: &Augmentation,
    x: &DVector<f64>,
    m: usize,
    seed: u64,
) -> Result<(DVector<f64>, DVector<f64>), AugmentError> {
    let p = x.len();
    let w_sqrt = correlated_sqrt(spec)?;
    let mut sum: DVector<f64> = DVector::zeros(p);
    let mut sum_sq: DVector<f64> = DVector::zeros(p);
    for draw in 0..m {
        let mut g = rng::stream(seed, &[Purpose::Augmentation as u64, draw as u64]);
        let gx = draw_row(spec, x, w_sqrt.as_ref(), &mut g)?;
        for i in 0..p {
            sum[i] += gx[i];
            sum_sq[i] += gx[i] * gx[i];
        }
    }
    let mf = m as f64;
    let mean = sum / mf;
    let std = DVector::from_fn(p, |i, _| (sum_sq[i] / mf - mean[i] * mean[i]).max(0.0).sqrt());
    Ok((mean, std))
}

/// Inverse square root of the expected covariance operator, with a
/// positive-definiteness check.
pub fn expected_cov_inv_sqrt(
    spec: &Augmentation,
    sigma: &Spectrum,
) -> Result<DMatrix<f64>, AugmentError> {
    let e = expected_cov_operator(spec, sigma)?;
    let eig = sym_eig(&e).map_err(|err| AugmentError::InvalidParam(err.to_string()))?;
    let min = eig.eigenvalues[eig.eigenvalues.len() - 1];
    let max = eig.eigenvalues[0];
    if min <= 1e-14 * max.max(1.0) {
        return Err(AugmentError::SingularExpectedCov { min_eigenvalue: min });
    }
    Ok(eig.apply_spectral(|l| 1.0 / l.sqrt()))
}

/// Normalized operator-norm deviation of the empirical augmentation
/// covariance from its expectation:
/// `Δ_G = ||E^{-1/2} Cov_G(X) E^{-1/2} - I||`.
pub fn delta_g(spec: &Augmentation, x: &DMatrix<f64>, sigma: &Spectrum) -> Result<f64, AugmentError> {
    let inv_sqrt = expected_cov_inv_sqrt(spec, sigma)?;
    let emp = empirical_cov_operator(spec, x)?;
    let normalized = &inv_sqrt * emp * &inv_sqrt;
    let dev = normalized - DMatrix::identity(x.ncols(), x.ncols());
    Ok(operator_norm(&dev))
}

/// First- and second-order statistics of an augmentation on a realized
/// training set.
#[derive(Debug, Clone)]
pub struct AugmentationStats {
    /// `μ_G(X)` row-wise.
    pub mean: DMatrix<f64>,
    /// `Cov_G(X)`.
    pub empirical_cov: DMatrix<f64>,
    /// `E_x[Cov_g(x)]`.
    pub expected_cov: DMatrix<f64>,
    pub is_unbiased: bool,
}

impl AugmentationStats {
    pub fn compute(spec: &Augmentation, x: &DMatrix<f64>, sigma: &Spectrum) -> Result<Self, AugmentError> {
        Ok(Self {
            mean: mean_operator_matrix(spec, x),
            empirical_cov: empirical_cov_operator(spec, x)?,
            expected_cov: expected_cov_operator(spec, sigma)?,
            is_unbiased: spec.is_unbiased(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sample_covariates;

    fn vecd(v: &[f64]) -> DVector<f64> {
        DVector::from_vec(v.to_vec())
    }

    #[test]
    fn gaussian_sigma_zero_is_identity_map() {
        let x = sample_covariates(&Spectrum::isotropic(4).unwrap(), LatentDistribution::Gaussian, 5, 1);
        let gx = draw_augmented(&Augmentation::gaussian_noise(0.0), &x, 9).unwrap();
        assert_eq!(gx, x);
    }

    #[test]
    fn full_biased_mask_zeroes_everything() {
        let x = sample_covariates(&Spectrum::isotropic(3).unwrap(), LatentDistribution::Gaussian, 4, 2);
        let gx = draw_augmented(&Augmentation::mask_biased(1.0).unwrap(), &x, 9).unwrap();
        assert_eq!(gx, DMatrix::zeros(4, 3));
    }

    #[test]
    fn raw_rotation_preserves_norms() {
        let mut g = rng::stream(3, &[7]);
        for p in [2usize, 8, 64] {
            let x = DVector::from_fn(p, |i, _| (i as f64 + 1.0).sin());
            let h = rotate_raw(&x, 37.0, &mut g).unwrap();
            assert!((h.norm() - x.norm()).abs() <= 1e-8 * x.norm(), "p={p}");
        }
    }

    #[test]
    fn rotation_rejects_odd_dimension() {
        let x = DMatrix::zeros(2, 3);
        let err = draw_augmented(&Augmentation::rotation(30.0).unwrap(), &x, 1).unwrap_err();
        assert!(matches!(err, AugmentError::OddDimensionForRotation { p: 3 }));
    }

    #[test]
    fn mean_operator_closed_forms() {
        let x = vecd(&[1.0, -2.0, 3.0]);
        for spec in [
            Augmentation::gaussian_noise(2.0),
            Augmentation::mask_unbiased(0.3).unwrap(),
            Augmentation::cutout(1),
            Augmentation::rotation(45.0).unwrap(),
        ] {
            assert_eq!(mean_operator(&spec, &x), x);
        }
        let biased = Augmentation::mask_biased(0.25).unwrap();
        assert_eq!(mean_operator(&biased, &x), &x * 0.75);
        let gm = Augmentation::group_mix(None);
        assert!((mean_operator(&gm, &x) - &x / 2.0f64.sqrt()).norm() < 1e-15);
    }

    #[test]
    fn empirical_cov_gaussian_constant() {
        let x = sample_covariates(&Spectrum::isotropic(3).unwrap(), LatentDistribution::Gaussian, 6, 4);
        let cov = empirical_cov_operator(&Augmentation::gaussian_noise(2.0), &x).unwrap();
        assert_eq!(cov, DMatrix::identity(3, 3) * 2.0);
    }

    #[test]
    fn empirical_cov_mask_single_row() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let cov = empirical_cov_operator(&Augmentation::mask_unbiased(0.5).unwrap(), &x).unwrap();
        let want = DMatrix::from_diagonal(&vecd(&[1.0, 4.0]));
        assert!((cov - want).norm() < 1e-14);
    }

    #[test]
    fn cutout_weight_matrix_is_circulant_symmetric() {
        let (k, p) = (3usize, 11usize);
        let m = cutout_weight_matrix(k, p);
        for i in 0..p {
            assert!((m[(i, i)] - k as f64 / p as f64).abs() < 1e-15);
            for j in 0..p {
                assert!((m[(i, j)] - m[(j, i)]).abs() < 1e-15);
                let shifted = m[((i + 1) % p, (j + 1) % p)];
                assert!((m[(i, j)] - shifted).abs() < 1e-15, "not circulant at ({i},{j})");
            }
        }
        // Published entries match the stated formula away from the diagonal.
        for d in 1..p / 2 {
            let got = m[(0, d)];
            let want = if d < k - 1 {
                k as f64 / p as f64 - d as f64 / (p - k) as f64
            } else {
                k as f64 / p as f64 - k as f64 / (p - k) as f64
            };
            assert!((got - want).abs() < 1e-15, "d={d}");
        }
    }

    #[test]
    fn cutout_exact_and_published_differ_only_at_boundary() {
        let (k, p) = (4usize, 13usize);
        for d in 0..=p / 2 {
            let diff = cutout_m_exact(d, k, p) - cutout_m_published(d, k, p);
            if d == k - 1 {
                assert!((diff - 1.0 / (p - k) as f64).abs() < 1e-15);
            } else {
                assert_eq!(diff, 0.0, "d={d}");
            }
        }
    }

    #[test]
    fn expected_cov_closed_forms() {
        let sigma = Spectrum::explicit(vec![4.0, 2.0]).unwrap();
        let mask = expected_cov_operator(&Augmentation::mask_unbiased(0.5).unwrap(), &sigma).unwrap();
        assert!((mask - DMatrix::from_diagonal(&vecd(&[4.0, 2.0]))).norm() < 1e-14);

        let k = 1;
        let cut = expected_cov_operator(&Augmentation::cutout(k), &sigma).unwrap();
        assert!((cut - sigma.to_matrix() * (1.0 / 1.0)).norm() < 1e-14);

        let gm = expected_cov_operator(&Augmentation::group_mix(None), &sigma).unwrap();
        assert!((gm - sigma.to_matrix() / 2.0).norm() < 1e-14);
    }

    #[test]
    fn empirical_cov_is_row_average_of_per_sample() {
        // Exact identity for the independent-feature families and pepper.
        let x = sample_covariates(&Spectrum::geometric(0.9, 5).unwrap(), LatentDistribution::Gaussian, 7, 11);
        let specs = [
            Augmentation::mask_unbiased(0.3).unwrap(),
            Augmentation::mask_biased(0.3).unwrap(),
            Augmentation::mask_nonuniform(vec![0.1, 0.2, 0.3, 0.4, 0.5]).unwrap(),
            Augmentation::salt_pepper(0.2, 0.0, 1.5).unwrap(),
        ];
        for spec in specs {
            let emp = empirical_cov_operator(&spec, &x).unwrap();
            let mut avg = DMatrix::zeros(5, 5);
            for i in 0..7 {
                avg += per_sample_cov(&spec, &x.row(i).transpose()).unwrap();
            }
            avg /= 7.0;
            assert!((emp - avg).norm() < 1e-12, "{}", spec.label());
        }
    }

    #[test]
    fn covariance_operators_are_psd() {
        let sigma = Spectrum::geometric(0.9, 6).unwrap();
        let x = sample_covariates(&sigma, LatentDistribution::Gaussian, 9, 13);
        let specs = [
            Augmentation::gaussian_noise(0.7),
            Augmentation::mask_unbiased(0.4).unwrap(),
            Augmentation::mask_biased(0.6).unwrap(),
            Augmentation::mask_nonuniform(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap(),
            Augmentation::cutout(2),
            Augmentation::salt_pepper(0.3, 0.5, 2.0).unwrap(),
            Augmentation::rotation(60.0).unwrap(),
            Augmentation::group_mix(Some(sigma.clone())),
        ];
        for spec in specs {
            for cov in [
                empirical_cov_operator(&spec, &x).unwrap(),
                expected_cov_operator(&spec, &sigma).unwrap(),
                per_sample_cov(&spec, &x.row(0).transpose()).unwrap(),
            ] {
                let eig = sym_eig(&cov).unwrap();
                let min = eig.eigenvalues[eig.eigenvalues.len() - 1];
                assert!(min >= -1e-10, "{} produced eigenvalue {min}", spec.label());
            }
        }
    }

    #[test]
    fn monte_carlo_two_draws_sigma_zero() {
        let x = vecd(&[1.0, 2.0]);
        let cov = monte_carlo_cov(&Augmentation::gaussian_noise(0.0), &x, 2, 5).unwrap();
        assert_eq!(cov, DMatrix::zeros(2, 2));
    }

    #[test]
    fn delta_g_zero_for_constant_covariance_families() {
        let sigma = Spectrum::geometric(0.9, 4).unwrap();
        let x = sample_covariates(&sigma, LatentDistribution::Gaussian, 8, 3);
        let d = delta_g(&Augmentation::gaussian_noise(1.3), &x, &sigma).unwrap();
        assert!(d < 1e-12);
        let d = delta_g(&Augmentation::group_mix(Some(sigma.clone())), &x, &sigma).unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn delta_g_scalar_case() {
        // n = 1, p = 1 unbiased mask: Δ_G = |x²/λ − 1|.
        let sigma = Spectrum::explicit(vec![2.0]).unwrap();
        let x = DMatrix::from_row_slice(1, 1, &[1.5]);
        let d = delta_g(&Augmentation::mask_unbiased(0.3).unwrap(), &x, &sigma).unwrap();
        assert!((d - (1.5f64 * 1.5 / 2.0 - 1.0).abs()).abs() < 1e-12);
    }

    #[test]
    fn delta_g_singular_for_beta_zero() {
        let sigma = Spectrum::isotropic(3).unwrap();
        let x = sample_covariates(&sigma, LatentDistribution::Gaussian, 4, 1);
        let err = delta_g(&Augmentation::mask_unbiased(0.0).unwrap(), &x, &sigma).unwrap_err();
        assert!(matches!(err, AugmentError::SingularExpectedCov { .. }));
    }

    #[test]
    fn delta_g_decays_with_n() {
        // Median over 20 trials at n = 512 sits below the median at n = 64.
        let sigma = Spectrum::geometric(0.97, 16).unwrap();
        let spec = Augmentation::mask_unbiased(0.3).unwrap();
        let median = |n: usize| {
            let mut vals: Vec<f64> = (0..20)
                .map(|t| {
                    let x = sample_covariates(&sigma, LatentDistribution::Gaussian, n, 1000 + t);
                    delta_g(&spec, &x, &sigma).unwrap()
                })
                .collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            0.5 * (vals[9] + vals[10])
        };
        let (m64, m512) = (median(64), median(512));
        assert!(m512 < m64, "median at n=512 ({m512}) should sit below n=64 ({m64})");
    }

    #[test]
    fn unbiased_families_have_unbiased_draws() {
        // Empirical mean within 5 σ̂/√M per coordinate.
        let sigma = Spectrum::geometric(0.8, 6).unwrap();
        let x = sample_covariates(&sigma, LatentDistribution::Gaussian, 1, 21).row(0).transpose();
        let m = 20_000;
        let specs = [
            Augmentation::gaussian_noise(0.5),
            Augmentation::mask_unbiased(0.35).unwrap(),
            Augmentation::mask_nonuniform(vec![0.1, 0.2, 0.3, 0.1, 0.2, 0.3]).unwrap(),
            Augmentation::cutout(2),
            Augmentation::salt_pepper(0.25, 0.0, 0.8).unwrap(),
            Augmentation::rotation(50.0).unwrap(),
        ];
        for spec in specs {
            assert!(spec.is_unbiased());
            let (mean, std) = monte_carlo_mean(&spec, &x, m, 77).unwrap();
            for i in 0..x.len() {
                let tol = 5.0 * std[i] / (m as f64).sqrt();
                assert!(
                    (mean[i] - x[i]).abs() <= tol.max(1e-12),
                    "{}: coord {i} off by {} (tol {tol})",
                    spec.label(),
                    (mean[i] - x[i]).abs()
                );
            }
        }
    }

    #[test]
    fn stats_bundle_is_consistent() {
        let sigma = Spectrum::geometric(0.9, 4).unwrap();
        let x = sample_covariates(&sigma, LatentDistribution::Gaussian, 6, 2);
        let spec = Augmentation::mask_unbiased(0.25).unwrap();
        let stats = AugmentationStats::compute(&spec, &x, &sigma).unwrap();
        assert!(stats.is_unbiased);
        assert_eq!(stats.mean, x);
        assert_eq!(stats.empirical_cov, empirical_cov_operator(&spec, &x).unwrap());
        assert_eq!(stats.expected_cov, expected_cov_operator(&spec, &sigma).unwrap());
        for cov in [&stats.empirical_cov, &stats.expected_cov] {
            let eig = sym_eig(cov).unwrap();
            assert!(eig.eigenvalues[eig.eigenvalues.len() - 1] >= -1e-10);
        }
    }

    #[test]
    fn biased_families_report_bias() {
        assert!(!Augmentation::mask_biased(0.2).unwrap().is_unbiased());
        assert!(!Augmentation::group_mix(None).is_unbiased());
        assert!(!Augmentation::salt_pepper(0.2, 1.0, 0.5).unwrap().is_unbiased());
        assert!(Augmentation::salt_pepper(0.2, 0.0, 0.5).unwrap().is_unbiased());
    }
}
