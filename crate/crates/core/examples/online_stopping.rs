//! Streaming estimation: update every candidate per sample and stop once the
//! reconstruction bound is small relative to the output power.

use re_sysid::estimator::{SearchSpace, ValidationParams};
use re_sysid::experiments::{system_i, FirDesign, TrialData};
use re_sysid::online::{nested_estimator, OnlineNoise, StopReason, StoppingRule};

fn main() -> re_sysid::Result<()> {
    let data = TrialData::generate(1000, &system_i(&FirDesign::default(), 100)?, 15.0, 3)?;
    let space = SearchSpace::new(80, 0..20)?;
    let rule = StoppingRule::new(0.03)?;

    let mut est = nested_estimator(
        &data.u,
        &data.y,
        90,
        &space,
        OnlineNoise::Known(data.noise_var),
        ValidationParams::default(),
        Some(rule),
    )?;
    let run = est.run(&data.u, &data.y)?;

    for r in run.trace.iter().step_by(50) {
        if let Some(s) = r.selection {
            println!("N = {:4}  (d, m) = ({:2}, {:2})  z_hi / power = {:.4}", r.n, s.d, s.m, r.ratio);
        }
    }
    match run.reason {
        StopReason::Criterion => println!("stopped at N = {} (epsilon {})", run.stop_n, rule.epsilon()),
        StopReason::DataExhausted => println!("ran out of data at N = {}", run.stop_n),
    }
    Ok(())
}
