//! Minimal tour: generate data, fit augmented estimators, decompose the
//! error, and evaluate a bound.

use auglin::augment::Augmentation;
use auglin::bounds::{self, CondNumbers};
use auglin::estimate;
use auglin::metrics;
use auglin::model::{gen_regression_labels, sample_covariates, LatentDistribution, SignalModel, Spectrum};

fn main() {
    let (p, n, seed) = (64usize, 32usize, 7u64);
    let sigma = Spectrum::geometric(0.95, p).unwrap();
    let theta_star = SignalModel::isotropic_random(p, seed).theta;
    let x = sample_covariates(&sigma, LatentDistribution::Gaussian, n, seed);
    let y = gen_regression_labels(&x, &theta_star, 0.5, LatentDistribution::Gaussian, seed);

    for spec in [
        Augmentation::gaussian_noise(1.0),
        Augmentation::mask_unbiased(0.3).unwrap(),
        Augmentation::rotation(45.0).unwrap(),
    ] {
        let d = metrics::decompose_mse(&x, &y, &theta_star, &sigma, &spec).unwrap();
        println!(
            "{:24} mse {:7.3}  bias {:7.3}  variance {:6.3}  approx {:8.2e}",
            spec.label(),
            d.total_mse,
            d.bias,
            d.variance,
            d.approx_error
        );
    }

    let lse = estimate::solve_min_norm(&x, &y).unwrap();
    println!("{:24} mse {:7.3}", "min-norm baseline", metrics::mse(&lse.theta, &theta_star, &sigma));

    let spec = Augmentation::mask_unbiased(0.3).unwrap();
    let aug = metrics::aug_transformed(&sigma, &theta_star, &spec).unwrap();
    let delta = auglin::augment::delta_g(&spec, &x, &sigma).unwrap();
    let report = bounds::regression_bound(
        &aug,
        n,
        None,
        None,
        delta,
        sigma.weighted_norm(&theta_star),
        0.5,
        &CondNumbers::Unit,
    )
    .unwrap();
    println!(
        "mask bound: bias {:.3} (k1={}), variance {:.3} (k2={}), approx {:.3}  [delta_G {:.3}]",
        report.bias_bound, report.k1, report.variance_bound, report.k2, report.approx_bound, delta
    );
}
