//! Closed-form tuning of a linear absorber on a single grounded mass:
//! optimal damping and stiffness ratios, the dissipated-energy fraction
//! there, and a cost surface written as CSV for plotting.

use std::fmt::Write as _;

use nesopt::export::format_sig12;
use nesopt::tmdopt::{cost_at_impulse, cost_j_1dof, optimal_kappa, optimal_zeta2};

fn main() -> nesopt::Result<()> {
    let eps = 0.05;
    let zeta1 = 0.02;
    let zeta2 = optimal_zeta2(eps, zeta1)?;
    let kappa = optimal_kappa(eps, zeta1, zeta2)?;
    let j = cost_j_1dof(eps, zeta1, zeta2, kappa)?;
    println!("absorber/primary mass ratio eps = {eps}, primary damping zeta1 = {zeta1}");
    println!("optimal absorber damping  zeta2 = {zeta2:.5}");
    println!("optimal stiffness ratio   kappa = {kappa:.5}");
    println!("dissipated-energy fraction    J = {j:.5}");
    println!(
        "  (quoted at a reference impulse of 0.1: {:.5})",
        cost_at_impulse(j, 0.1)
    );

    std::fs::create_dir_all("out")?;
    let mut csv = String::from("zeta2,kappa,j\n");
    for iz in 0..60 {
        let z = 0.001 + 0.0002 * iz as f64;
        for ik in 0..60 {
            let k = 0.02 + 0.001 * ik as f64;
            let cost = cost_j_1dof(eps, zeta1, z, k)?;
            writeln!(
                csv,
                "{},{},{}",
                format_sig12(z),
                format_sig12(k),
                format_sig12(cost)
            )
            .unwrap();
        }
    }
    std::fs::write("out/tmd_cost_surface_1dof.csv", csv)?;
    println!("wrote out/tmd_cost_surface_1dof.csv");
    Ok(())
}
