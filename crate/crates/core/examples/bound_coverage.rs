//! How often the probabilistic bounds contain the true reconstruction error
//! for one fixed (d, m) model, over repeated noise draws.

use re_sysid::estimator::{
    delta_true, fit_candidate, reconstruction_error_true, ReBoundSet, ValidationParams,
};
use re_sysid::signals::{add_noise, bernoulli_input, simulate_output, ImpulseResponse, NoiseModel, Signal};

fn main() -> re_sysid::Result<()> {
    let n = 300;
    let (d, m) = (1, 5);
    let u = bernoulli_input(n, 1)?;
    let theta = ImpulseResponse::new(1, vec![1.0, 0.7, 0.4, 0.2, 0.1, 0.05], 12)?;
    let ybar = simulate_output(&theta, &u);
    let s = 0.05;
    let delta = delta_true(&u, &theta, d, m)?;

    let params = ValidationParams::new(2.0, 2.0)?;
    let draws = 2000;
    let (mut z_in, mut d_in) = (0, 0);
    for k in 0..draws {
        let y = add_noise(&ybar, &NoiseModel::new(s, 100 + k)?);
        let fit = fit_candidate(&u, &y, d, m)?;
        let yhat: Vec<f64> = y.samples().iter().zip(&fit.fit.residual).map(|(a, r)| a - r).collect();
        let z = reconstruction_error_true(&ybar, &Signal::new(yhat)?)?;
        if let Ok(b) = ReBoundSet::compute(fit.x_dm, d, m, n, s, &params) {
            z_in += usize::from(b.z_lo <= z && z <= b.z_hi);
            d_in += usize::from(b.lower <= delta && delta <= b.upper);
        }
    }
    println!("unmodeled energy Delta = {delta:.5}");
    println!("Delta in [L, U]: {:.4}", d_in as f64 / draws as f64);
    println!("z in [z_lo, z_hi]: {:.4}", z_in as f64 / draws as f64);
    println!("nominal: {:.4} / {:.4}", params.validation_probability(), params.confidence_probability());
    Ok(())
}
