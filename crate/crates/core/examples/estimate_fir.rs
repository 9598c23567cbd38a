//! Delay and length of the 62-tap lowpass FIR from one noisy record, with the
//! noise variance known.

use re_sysid::estimator::{select_model, NoiseGrid, SearchSpace, ValidationParams};
use re_sysid::experiments::{rmse_theta, system_i, FirDesign, TrialData};

fn main() -> re_sysid::Result<()> {
    let theta = system_i(&FirDesign::default(), 100)?;
    let data = TrialData::generate(1000, &theta, 20.0, 7)?;

    let space = SearchSpace::full(100)?;
    let grid = NoiseGrid::known(data.noise_var)?;
    let sel = select_model(&data.u, &data.y, &space, &grid, &ValidationParams::default())?;

    println!("true support:  d = {}, m = {}", theta.delay(), theta.length());
    println!("selected:      d = {}, m = {}", sel.d, sel.m);
    println!("re_hi = {:.3}, x = {:.5}, z in [{:.5}, {:.5}]", sel.re_hi, sel.candidate.x_dm, sel.bounds.z_lo, sel.bounds.z_hi);

    let est = sel.impulse_response(100)?;
    let reference = theta.truncated(100)?;
    println!("coefficient rmse = {:.5}", rmse_theta(&reference, &est, 100)?);
    Ok(())
}
