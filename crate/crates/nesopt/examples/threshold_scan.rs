//! Scans impulse velocities for the threshold that triggers strong energy
//! transfer to the cubic absorber, then compares it with the closed-form
//! critical velocity from the averaged model.

use nesopt::model::reference_nondim;
use nesopt::reduction::{fast_frequency, v_critical};
use nesopt::sim::{detect_threshold, IntegratorConfig, SystemModel, ThresholdResult};
use nesopt::sweep::velocity_sweep;

fn main() -> nesopt::Result<()> {
    let params = reference_nondim();
    let cfg = IntegratorConfig::default();
    let grid: Vec<f64> = (0..26).map(|i| 0.05 + 0.01 * i as f64).collect();

    let sweep = velocity_sweep(&params, &grid, 50.0, &cfg)?;
    println!("v0      primary fraction at tau = 50");
    for (i, v) in sweep.axis1.iter().enumerate() {
        println!("{v:.2}    {:.4}", sweep.at(i, 0));
    }

    let threshold = detect_threshold(&SystemModel::TwoDof(params), &grid, 50.0, 0.2, &cfg)?;
    match threshold {
        ThresholdResult::Found { v_threshold } => {
            println!("\nsimulated threshold (fraction < 0.2): v0 = {v_threshold:.4}");
        }
        ThresholdResult::NoThresholdInRange => println!("\nno threshold in range"),
    }
    let omega = fast_frequency(&params);
    let v_cr = v_critical(&params, omega, (0.0, 50.0))?;
    println!("critical velocity from the averaged model: {v_cr:.4}");
    Ok(())
}
