//! Compares the four-dimensional scaled envelope pair against its
//! two-dimensional reduction, in which the first complex variable is
//! replaced by its analytic solution. Below the critical impulse the
//! attachment envelope stays in a small loop; near it the orbit makes large
//! excursions. Phase portraits go to CSV.

use num_complex::Complex64;

use nesopt::export::write_complex_series_csv;
use nesopt::model::reference_nondim;
use nesopt::reduction::{
    fast_frequency, integrate_reduced2, integrate_superslow4, relative_rms_diff, superslow_model,
};
use nesopt::sim::IntegratorConfig;
use std::path::Path;

fn main() -> nesopt::Result<()> {
    let params = reference_nondim();
    let omega = fast_frequency(&params);
    let ss = superslow_model(&params, omega)?;
    let cfg = IntegratorConfig::default().with_tols(1e-10, 1e-12);
    std::fs::create_dir_all("out")?;

    for v0 in [0.05, 0.115] {
        let z0 = Complex64::new(v0 / params.eps.sqrt(), 0.0);
        let (t4, z4) = integrate_superslow4(&ss, z0, z0, (0.0, 50.0), &cfg)?;
        let z2_pair: Vec<_> = z4.iter().map(|z| z.1).collect();
        let (t2, z2_single) = integrate_reduced2(&ss, z0, z0, (0.0, 50.0), &cfg)?;

        let a: Vec<f64> = z2_single.iter().map(|z| z.norm()).collect();
        let b: Vec<f64> = z2_pair.iter().map(|z| z.norm()).collect();
        let max_amp = b.iter().cloned().fold(0.0, f64::max);
        println!(
            "v0 = {v0}: max |z2| = {max_amp:.3}, 2-vs-4 dimensional rms = {:.2}%",
            100.0 * relative_rms_diff(&a, &b)
        );

        let config = serde_json::json!({"system": params, "v0": v0});
        let tag = format!("{}", (v0 * 1000.0) as u32);
        write_complex_series_csv(
            Path::new(&format!("out/z2_pair_v{tag}.csv")),
            &t4,
            &z2_pair,
            &config,
        )?;
        write_complex_series_csv(
            Path::new(&format!("out/z2_reduced_v{tag}.csv")),
            &t2,
            &z2_single,
            &config,
        )?;
    }
    println!("wrote out/z2_pair_v*.csv and out/z2_reduced_v*.csv");
    Ok(())
}
