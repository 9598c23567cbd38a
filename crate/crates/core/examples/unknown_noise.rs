//! Joint selection of (d, m) and the noise variance over a grid of SNR levels
//! relative to the observed output power.

use re_sysid::estimator::{select_model, NoiseGrid, SearchSpace, SigmaStatus, ValidationParams};
use re_sysid::experiments::{system_ii, TrialData};

fn main() -> re_sysid::Result<()> {
    let theta = system_ii(400)?;
    let data = TrialData::generate(1000, &theta, 10.0, 11)?;

    let grid = NoiseGrid::snr_relative(data.y.power(), 0.0, 20.0, 1.0)?;
    let sel = select_model(&data.u, &data.y, &SearchSpace::full(100)?, &grid, &ValidationParams::default())?;

    for o in &sel.sigma_outcomes {
        match &o.status {
            SigmaStatus::Accepted { d, m, re_hi } => {
                println!("  {:.3e}  accepted  best ({d}, {m})  re_hi {re_hi:.2}", o.noise_var)
            }
            SigmaStatus::Rejected { d, m, reason } => {
                println!("  {:.3e}  rejected at ({d}, {m}): {reason}", o.noise_var)
            }
        }
    }
    let chosen = sel.noise_var.expect("grid mode selects a variance");
    println!("true variance {:.4e}, selected {:.4e} ({:+.2} dB)", data.noise_var, chosen, 10.0 * (chosen / data.noise_var).log10());
    println!("selected (d, m) = ({}, {})", sel.d, sel.m);
    Ok(())
}
