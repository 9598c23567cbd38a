//! Delay estimation error against record length, with the true delay drawn
//! per trial.

use re_sysid::experiments::{delay_rmse_sweep, Scenario};

fn main() -> re_sysid::Result<()> {
    let scenario = Scenario { trials: 30, ..Scenario::fir() };
    let lengths = [100, 200, 400, 800];
    for p in delay_rmse_sweep(&scenario, &lengths, 15.0, 0..=15)? {
        let flag = if p.low_rank_risk { "  (grid shrunk to fit)" } else { "" };
        println!("N = {:4}  delay rmse {:.3}  over {} trials{flag}", p.n, p.delay_rmse, p.trials_used);
    }
    Ok(())
}
