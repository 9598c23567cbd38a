//! Write a simulated record to text files, read it back and estimate from it.

use re_sysid::estimator::{select_model, NoiseGrid, SearchSpace, ValidationParams};
use re_sysid::experiments::{system_i, FirDesign, TrialData};
use re_sysid::signals::{read_signal, write_signal};

fn main() -> re_sysid::Result<()> {
    let dir = std::env::temp_dir().join("re_sysid_signal_files");
    std::fs::create_dir_all(&dir)?;
    let data = TrialData::generate(600, &system_i(&FirDesign::default(), 100)?, 18.0, 4)?;
    write_signal(&dir.join("u.txt"), &data.u)?;
    write_signal(&dir.join("y.txt"), &data.y)?;

    let u = read_signal(&dir.join("u.txt"))?;
    let y = read_signal(&dir.join("y.txt"))?;
    assert_eq!(y.samples(), data.y.samples());

    let grid = NoiseGrid::snr_relative(y.power(), 0.0, 40.0, 1.0)?;
    let sel = select_model(&u, &y, &SearchSpace::full(90)?, &grid, &ValidationParams::default())?;
    println!("{} samples from {}", u.len(), dir.display());
    println!("(d, m) = ({}, {}), noise variance {:.3e} (true {:.3e})", sel.d, sel.m, sel.noise_var.unwrap(), data.noise_var);
    Ok(())
}
