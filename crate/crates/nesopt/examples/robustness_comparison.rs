//! Robustness of the two absorber kinds under plant perturbations: perturbs
//! the second primary mass around its nominal value over a grid of impulse
//! velocities and compares the cubic absorber (designed for v0 = 0.1)
//! against the Lyapunov-tuned linear one. Heatmaps go to SVG.

use nesopt::export::write_heatmap_svg;
use nesopt::model::{reference_nondim, AttachmentKind};
use nesopt::sim::IntegratorConfig;
use nesopt::sweep::{
    compare, design_nes_stiffness, robustness_sweep, PerturbTarget, PerturbationSpec, SampleMode,
};
use nesopt::tmdopt::{optimize_2dof, OptimizeOptions};
use std::path::Path;

fn main() -> nesopt::Result<()> {
    let params = reference_nondim();
    let cfg = IntegratorConfig::default();
    let window = (0.0, 50.0);

    let c = design_nes_stiffness(&params, 0.1, 0.9, window)?;
    let nes = params.with_attachment(AttachmentKind::CubicNes { stiffness: c });
    let opt = optimize_2dof(&params, &OptimizeOptions::default())?;
    let tmd = params
        .with_zeta3(opt.zeta3)
        .with_attachment(AttachmentKind::LinearTmd {
            stiffness: opt.k_tmd,
        });
    println!("cubic absorber: C = {c:.4} (designed for v0 = 0.1, derate 0.9)");
    println!(
        "linear absorber: zeta3 = {:.4}, k_tmd = {:.4}",
        opt.zeta3, opt.k_tmd
    );

    let spec = PerturbationSpec {
        target: PerturbTarget::MassM2,
        sample: SampleMode::Quantile {
            sigma_frac: 0.05,
            count: 7,
        },
    };
    let v_grid: Vec<f64> = (0..9).map(|i| 0.06 + 0.01 * i as f64).collect();
    let nes_sweep = robustness_sweep(&nes, &spec, &v_grid, 50.0, &cfg)?;
    let tmd_sweep = robustness_sweep(&tmd, &spec, &v_grid, 50.0, &cfg)?;
    let report = compare(&nes_sweep, &tmd_sweep)?;
    println!(
        "best cells: cubic {:.4}, linear {:.4}",
        report.best_first, report.best_second
    );
    println!(
        "worst cells: cubic {:.4}, linear {:.4}",
        report.worst_first, report.worst_second
    );
    println!(
        "cubic wins {:.0}% of the grid",
        100.0 * report.first_wins_fraction
    );

    std::fs::create_dir_all("out")?;
    let config = serde_json::json!({"nes": nes, "tmd": tmd, "tau_eval": 50.0});
    write_heatmap_svg(Path::new("out/robustness_nes.svg"), &nes_sweep, &config)?;
    write_heatmap_svg(Path::new("out/robustness_tmd.svg"), &tmd_sweep, &config)?;
    println!("wrote out/robustness_nes.svg and out/robustness_tmd.svg");
    Ok(())
}
