//! Full critical analysis of the averaged planar system: mean forcing
//! components, turning points of the zero-level orbit, the critical scaled
//! amplitude and impulse velocity, and the numerical saddle-capture census.

use nesopt::model::reference_nondim;
use nesopt::reduction::{
    f_of_a, fast_frequency, fixed_points, hamiltonian_model, homoclinic_check, mean_c1c2,
    v_critical, z3_critical, HomoclinicOptions,
};

fn main() -> nesopt::Result<()> {
    let params = reference_nondim();
    let omega = fast_frequency(&params);
    let window = (0.0, 50.0);
    let stiffness = params.attachment.stiffness();

    let (chat1, chat2) = mean_c1c2(&params, omega, window)?;
    println!("carrier omega = {omega:.5}");
    println!("mean forcing over tau in [0, 50]: ({chat1:.5}, {chat2:.5})");

    let z3cr = z3_critical(omega, stiffness, (chat1, chat2))?;
    let v_cr = v_critical(&params, omega, window)?;
    println!("critical scaled amplitude z3(0) = {z3cr:.4}");
    println!("critical impulse velocity     = {v_cr:.4}");

    let hm = hamiltonian_model(&params, omega, window, z3cr)?;
    let roots = fixed_points(&hm)?;
    println!("turning points of the critical orbit (a = |z2|^2): {roots:?}");
    for a in [0.3, 0.6388, 1.5, 2.55] {
        println!("  f({a:.4}) = {:+.3e}", f_of_a(&hm, a));
    }

    let report = homoclinic_check(&hm, &HomoclinicOptions::default())?;
    println!(
        "forward capture near the saddle (a = {:.3}): {} (entry at tau = {:.1})",
        report.saddle_a,
        report.forward_capture,
        report.entry_time.unwrap_or(f64::NAN)
    );
    println!(
        "backward-time return to the origin: {} (min a = {:.2e})",
        report.backward_return,
        report.backward_min_a_after_leave.unwrap_or(f64::NAN)
    );
    Ok(())
}
