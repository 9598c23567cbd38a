//! Impulse response length chosen by AIC, BIC and the relative-entropy bound
//! on the same records.

use re_sysid::baselines::{aic_order, bic_order};
use re_sysid::estimator::{select_model, NoiseGrid, SearchSpace, ValidationParams};
use re_sysid::experiments::{system_i, FirDesign, TrialData};

fn main() -> re_sysid::Result<()> {
    let theta = system_i(&FirDesign::default(), 100)?;
    println!("true length {}", theta.length());
    println!(" SNR    aic   bic   re (d, m)");
    for snr in [0.0, 5.0, 10.0, 20.0, 30.0] {
        let data = TrialData::generate(1000, &theta, snr, 1)?;
        let aic = aic_order(&data.u, &data.y, 100)?;
        let bic = bic_order(&data.u, &data.y, 100)?;
        let grid = NoiseGrid::known(data.noise_var)?;
        let re = select_model(&data.u, &data.y, &SearchSpace::full(100)?, &grid, &ValidationParams::default())?;
        println!("{snr:4}  {:5} {:5}   ({}, {})", aic.m, bic.m, re.d, re.m);
    }
    Ok(())
}
