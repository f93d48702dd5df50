//! L1-penalized logistic fit for elimination, unpenalized refit on the
//! survivors, Wald tests on the refit.
//!
//! cargo run --example lasso_then_wald

use demaudit::stats::{fit_logistic_l1, fit_logistic_mle, wald_tests, Design, SolverSettings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let n = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // column 0 carries the effect, column 1 is weak noise
    let mut x = Vec::with_capacity(n * 2);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let signal = f64::from(u8::from(rng.random_bool(0.3)));
        let noise = 0.01 * (rng.random::<f64>() - 0.5);
        let p = 1.0 / (1.0 + (-(-0.4 + 1.3 * signal)).exp());
        x.extend([signal, noise]);
        y.push(f64::from(u8::from(rng.random_bool(p))));
    }
    let names = ["signal", "noise"];

    let settings = SolverSettings::default();
    let design = Design::new(&x, n, 2, &y).unwrap();
    let lasso = fit_logistic_l1(&design, &settings).unwrap();
    println!(
        "L1 (lambda {}): coefficients {:?}, kkt residual {:.1e}",
        settings.lambda, lasso.coefficients, lasso.kkt_residual
    );
    for j in &lasso.eliminated {
        println!("  eliminated {} (|gradient| {:.4} <= lambda)", names[*j], lasso.gradient[j + 1].abs());
    }

    let kept: Vec<usize> = (0..2).filter(|j| !lasso.eliminated.contains(j)).collect();
    let xs: Vec<f64> = (0..n).flat_map(|r| kept.iter().map(move |&c| (r, c))).map(|(r, c)| x[r * 2 + c]).collect();
    let refit_design = Design::new(&xs, n, kept.len(), &y).unwrap();
    let fit = fit_logistic_mle(&refit_design, &settings).unwrap();
    println!("refit: {} Newton iterations, max |gradient| {:.1e}", fit.iterations, fit.max_abs_gradient);

    let mut labels = vec!["(intercept)".to_string()];
    labels.extend(kept.iter().map(|&j| names[j].to_string()));
    for row in wald_tests(&labels, &fit.coefficients, &fit.covariance).unwrap() {
        println!(
            "  {:<12} b {:>8.4}  se {:.4}  z {:>7.3}  p {:.3e} {}",
            row.name,
            row.coefficient,
            row.std_error,
            row.z,
            row.p_value,
            row.tier.marker()
        );
    }
}
