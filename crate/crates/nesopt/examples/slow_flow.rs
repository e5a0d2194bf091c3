//! Validates the complex envelope (slow-flow) model against the full
//! simulation: integrates both for one impulse, extracts the
//! attachment-relative envelope from the full trajectory, and compares the
//! amplitude histories. Writes both series as CSV.

use nesopt::export::write_complex_series_csv;
use nesopt::model::reference_nondim;
use nesopt::reduction::{
    envelope_from_full, fast_frequency, integrate_slow, rms_amplitude_mismatch, slow_model,
};
use nesopt::sim::{integrate_system, IntegratorConfig, SystemModel};
use std::path::Path;

fn main() -> nesopt::Result<()> {
    let params = reference_nondim();
    let omega = fast_frequency(&params);
    let v0 = 0.115;
    let cfg = IntegratorConfig::default().with_tols(1e-10, 1e-12);

    let slow = slow_model(&params, omega)?;
    let (times, us) = integrate_slow(&slow, v0, (0.0, 50.0), &cfg)?;
    let u2_slow: Vec<_> = us.iter().map(|u| u[1]).collect();

    let traj = integrate_system(&SystemModel::TwoDof(params), v0, (0.0, 50.0), &cfg)?;
    let env = envelope_from_full(&params, &traj, omega);
    let u2_full: Vec<_> = env.iter().map(|u| u[1]).collect();

    let a: Vec<f64> = u2_slow.iter().map(|z| z.norm()).collect();
    let b: Vec<f64> = u2_full.iter().map(|z| z.norm()).collect();
    println!("carrier frequency: {omega:.4}");
    println!(
        "relative-envelope RMS amplitudes: slow {:.4}, full {:.4} (mismatch {:.2}%)",
        nesopt::reduction::rms(&a),
        nesopt::reduction::rms(&b),
        100.0 * rms_amplitude_mismatch(&a, &b)
    );

    std::fs::create_dir_all("out")?;
    let config = serde_json::json!({"system": params, "v0": v0, "omega": omega});
    write_complex_series_csv(Path::new("out/u2_slow.csv"), &times, &u2_slow, &config)?;
    write_complex_series_csv(Path::new("out/u2_full.csv"), &traj.times, &u2_full, &config)?;
    println!("wrote out/u2_slow.csv and out/u2_full.csv");
    Ok(())
}
