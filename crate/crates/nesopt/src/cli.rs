//! Command-line front end: JSON configuration, dotted-path overrides, and
//! one subcommand per capability. All heavy lifting stays in the library;
//! the binary only dispatches.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::export;
use crate::model::{nondimensionalize, AttachmentKind, NondimParams, PhysicalParams};
use crate::reduction::{
    self, fast_frequency, hamiltonian_model, homoclinic_check, integrate_reduced2, integrate_slow,
    integrate_superslow4, mean_c1c2, HomoclinicOptions,
};
use crate::sim::{
    detect_threshold, energy_trace, integrate_system, IntegratorConfig, SystemModel,
    ThresholdResult,
};
use crate::sweep::{
    compare, design_nes_stiffness, robustness_sweep, stiffness_sweep, velocity_sweep,
    PerturbationSpec,
};
use crate::tmdopt::{
    cost_at_impulse, cost_j_1dof, optimal_kappa, optimal_zeta2, optimize_2dof, OptimizeOptions,
};

/// Reference impulse at which absolute dissipation costs are quoted.
pub const REFERENCE_IMPULSE: f64 = 0.1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub physical: Option<PhysicalParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nondimensional: Option<NondimBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attachment: Option<AttachmentKind>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NondimBlock {
    pub mu: f64,
    pub eps: f64,
    pub zeta1: f64,
    pub zeta12: f64,
    pub zeta3: f64,
    pub k12: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub v0: f64,
    pub tspan: [f64; 2],
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub sample_dt: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            v0: 0.115,
            tspan: [0.0, 50.0],
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: 1.0,
            sample_dt: 0.02,
        }
    }
}

impl SimulationConfig {
    fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            dense_output_dt: self.sample_dt,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.count == 0 || self.stop <= self.start {
            return Err(Error::Config(
                "grid needs count > 0 and stop > start".into(),
            ));
        }
        if self.count == 1 {
            return Ok(vec![self.start]);
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        Ok((0..self.count)
            .map(|i| self.start + i as f64 * step)
            .collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    Velocity,
    Stiffness,
    Robustness,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub kind: SweepKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stiffness_grid: Option<GridSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DesignConfig {
    pub v_design: f64,
    pub derate: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TmdOptConfig {
    pub dof: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta1: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TmdPoint {
    pub zeta3: f64,
    pub k_tmd: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareConfig {
    pub perturbation: PerturbationSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tmd: Option<TmdPoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub window: [f64; 2],
    pub v_grid: GridSpec,
    pub drop_criterion: f64,
    pub tau_eval: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tmd: Option<TmdOptConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub homoclinic: Option<HomoclinicOptions>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            window: [0.0, 50.0],
            v_grid: GridSpec {
                start: 0.05,
                stop: 0.3,
                count: 26,
            },
            drop_criterion: 0.2,
            tau_eval: 50.0,
            design: None,
            sweep: None,
            tmd: None,
            compare: None,
            homoclinic: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            formats: vec!["csv".into(), "json".into(), "svg".into()],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    /// Resolves the system block into nondimensional parameters. Exactly
    /// one of the physical/nondimensional blocks must be present.
    pub fn resolve_system(&self) -> Result<NondimParams> {
        let params = match (&self.system.physical, &self.system.nondimensional) {
            (Some(phys), None) => nondimensionalize(phys)?.0,
            (None, Some(nd)) => NondimParams {
                mu: nd.mu,
                eps: nd.eps,
                zeta1: nd.zeta1,
                zeta12: nd.zeta12,
                zeta3: nd.zeta3,
                k12: nd.k12,
                attachment: self.system.attachment.ok_or_else(|| {
                    Error::Config(
                        "system.attachment is required with a nondimensional block".into(),
                    )
                })?,
            },
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "system block must contain exactly one of `physical` or `nondimensional`, found both"
                        .into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "system block must contain exactly one of `physical` or `nondimensional`, found neither"
                        .into(),
                ))
            }
        };
        let params = match self.system.attachment {
            Some(att) => params.with_attachment(att),
            None => params,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn window(&self) -> (f64, f64) {
        (self.analysis.window[0], self.analysis.window[1])
    }

    fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    fn wants(&self, format: &str) -> bool {
        self.output.formats.iter().any(|f| f == format)
    }
}

/// Loads a config file and applies dotted-path overrides such as
/// `system.nondimensional.eps=0.05`.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    if text.trim().is_empty() {
        return Err(Error::Config(
            "config file is empty; a `system` block is required".into(),
        ));
    }
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
    for item in overrides {
        let (path_part, raw) = item.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "override `{item}` is not of the form key.path=value"
            ))
        })?;
        let parsed: serde_json::Value = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let segments: Vec<&str> = path_part.split('.').collect();
        let (last, parents) = segments.split_last().expect("split_once gave a key");
        let mut node = &mut value;
        for seg in parents {
            node = match node {
                serde_json::Value::Object(map) => map
                    .entry(seg.to_string())
                    .or_insert_with(|| serde_json::Value::Object(Default::default())),
                _ => {
                    return Err(Error::Config(format!(
                        "override `{item}` walks through a non-object at `{seg}`"
                    )))
                }
            };
        }
        match node {
            serde_json::Value::Object(map) => {
                map.insert(last.to_string(), parsed);
            }
            _ => {
                return Err(Error::Config(format!(
                    "override `{item}` targets a non-object parent"
                )))
            }
        }
    }
    serde_json::from_value(value).map_err(|e| Error::Config(format!("invalid config: {e}")))
}

#[derive(Parser, Debug)]
#[command(
    name = "nesopt",
    about = "Design and evaluate impulsively excited vibration absorbers",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    config: PathBuf,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted-path overrides of config leaves, e.g. --set system.nondimensional.eps=0.05
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the full-order model and write trajectory and energy trace.
    Simulate(CommonArgs),
    /// Integrate the reduced models and write envelope/phase-portrait series.
    Reduce(CommonArgs),
    /// Fixed points, critical amplitude and velocity, saddle-capture report.
    Critical(CommonArgs),
    /// Optimal absorber damping/stiffness by Lyapunov analysis.
    TmdOpt(CommonArgs),
    /// Cubic stiffness realizing a target critical velocity.
    DesignNes(CommonArgs),
    /// Velocity, stiffness, or robustness sweep.
    Sweep(CommonArgs),
    /// Robustness comparison of the cubic and linear absorbers.
    Compare(CommonArgs),
}

/// Parses arguments, runs the subcommand, and maps errors to exit codes:
/// 0 success, 1 configuration/usage error, 2 numerical failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let (name, args) = match &cli.command {
        Command::Simulate(a) => ("simulate", a),
        Command::Reduce(a) => ("reduce", a),
        Command::Critical(a) => ("critical", a),
        Command::TmdOpt(a) => ("tmd-opt", a),
        Command::DesignNes(a) => ("design-nes", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Compare(a) => ("compare", a),
    };
    match dispatch(name, args) {
        Ok(()) => 0,
        Err(e) => {
            let numerical = matches!(
                e,
                Error::Stiffness { .. }
                    | Error::Numerical(_)
                    | Error::Stability(_)
                    | Error::Singularity(_)
                    | Error::ZeroStartEnergy
            );
            if numerical {
                let payload = json!({"error": {"kind": error_kind(&e), "message": e.to_string()}});
                eprintln!("{payload}");
                2
            } else {
                eprintln!("error: {e}");
                1
            }
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::Stiffness { .. } => "stiffness",
        Error::Stability(_) => "stability",
        Error::Singularity(_) => "singularity",
        Error::ZeroStartEnergy => "zero-start-energy",
        Error::AxisMismatch(_) => "axis-mismatch",
        Error::Numerical(_) => "numerical",
        Error::Config(_) => "config",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

fn dispatch(name: &str, args: &CommonArgs) -> Result<()> {
    let mut config = load_config(&args.config, &args.set)?;
    if let Some(out) = &args.out {
        config.output.dir = out.clone();
    }
    std::fs::create_dir_all(&config.output.dir)?;
    match name {
        "simulate" => cmd_simulate(&config),
        "reduce" => cmd_reduce(&config),
        "critical" => cmd_critical(&config),
        "tmd-opt" => cmd_tmd_opt(&config),
        "design-nes" => cmd_design_nes(&config),
        "sweep" => cmd_sweep(&config),
        "compare" => cmd_compare(&config),
        _ => unreachable!("clap restricts subcommands"),
    }
}

fn out_path(config: &RunConfig, name: &str) -> PathBuf {
    config.output.dir.join(name)
}

fn cmd_simulate(config: &RunConfig) -> Result<()> {
    let params = config.resolve_system()?;
    let sim = &config.simulation;
    let model = SystemModel::TwoDof(params);
    let traj = integrate_system(
        &model,
        sim.v0,
        (sim.tspan[0], sim.tspan[1]),
        &sim.integrator(),
    )?;
    let trace = energy_trace(&traj)?;
    let echo = config.echo();
    if config.wants("csv") {
        export::write_trajectory_csv(&out_path(config, "trajectory.csv"), &traj, &echo)?;
        export::write_energy_trace_csv(
            &out_path(config, "energy.csv"),
            &trace,
            &["1", "12", "3"],
            &echo,
        )?;
    }
    if config.wants("json") {
        let body = json!({
            "v0": sim.v0,
            "tau_end": sim.tspan[1],
            "final_primary_fraction": trace.primary_fraction.last(),
            "final_nes_fraction": trace.nes_fraction.last(),
        });
        export::write_json_report(&out_path(config, "simulate.json"), body, &echo)?;
    }
    println!(
        "simulate: primary fraction at tau={} is {:.6}",
        sim.tspan[1],
        trace.primary_fraction.last().unwrap()
    );
    Ok(())
}

fn cmd_reduce(config: &RunConfig) -> Result<()> {
    let params = config.resolve_system()?;
    let sim = &config.simulation;
    let tspan = (sim.tspan[0], sim.tspan[1]);
    let cfg = sim.integrator();
    let omega = fast_frequency(&params);
    let echo = config.echo();

    let slow = reduction::slow_model(&params, omega)?;
    let (times_s, us) = integrate_slow(&slow, sim.v0, tspan, &cfg)?;
    let u2_slow: Vec<Complex64> = us.iter().map(|u| u[1]).collect();

    let traj = integrate_system(&SystemModel::TwoDof(params), sim.v0, tspan, &cfg)?;
    let env = reduction::envelope_from_full(&params, &traj, omega);
    let u2_full: Vec<Complex64> = env.iter().map(|u| u[1]).collect();

    let ss = reduction::superslow_model(&params, omega)?;
    let z0 = Complex64::new(sim.v0 / params.eps.sqrt(), 0.0);
    let (times_4, z4) = integrate_superslow4(&ss, z0, z0, tspan, &cfg)?;
    let z2_4: Vec<Complex64> = z4.iter().map(|z| z.1).collect();
    let (times_2, z2_2) = integrate_reduced2(&ss, z0, z0, tspan, &cfg)?;

    if config.wants("csv") {
        export::write_complex_series_csv(
            &out_path(config, "u2_slow.csv"),
            &times_s,
            &u2_slow,
            &echo,
        )?;
        export::write_complex_series_csv(
            &out_path(config, "u2_full.csv"),
            &traj.times,
            &u2_full,
            &echo,
        )?;
        export::write_complex_series_csv(
            &out_path(config, "z2_superslow4.csv"),
            &times_4,
            &z2_4,
            &echo,
        )?;
        export::write_complex_series_csv(
            &out_path(config, "z2_reduced2.csv"),
            &times_2,
            &z2_2,
            &echo,
        )?;
    }
    let abs_slow: Vec<f64> = u2_slow.iter().map(|z| z.norm()).collect();
    let abs_full: Vec<f64> = u2_full.iter().map(|z| z.norm()).collect();
    let abs_4: Vec<f64> = z2_4.iter().map(|z| z.norm()).collect();
    let abs_2: Vec<f64> = z2_2.iter().map(|z| z.norm()).collect();
    let slow_vs_full = reduction::rms_amplitude_mismatch(&abs_slow, &abs_full);
    let two_vs_four = reduction::relative_rms_diff(&abs_2, &abs_4);
    if config.wants("json") {
        let body = json!({
            "omega": omega,
            "v0": sim.v0,
            "slow_vs_full_rms_amplitude_mismatch": slow_vs_full,
            "reduced2_vs_superslow4_rms": two_vs_four,
        });
        export::write_json_report(&out_path(config, "reduce.json"), body, &echo)?;
    }
    println!(
        "reduce: slow-vs-full amplitude mismatch {:.3}, 2d-vs-4d rms {:.3}",
        slow_vs_full, two_vs_four
    );
    Ok(())
}

fn cmd_critical(config: &RunConfig) -> Result<()> {
    let params = config.resolve_system()?;
    let omega = fast_frequency(&params);
    let window = config.window();
    let (chat1, chat2) = mean_c1c2(&params, omega, window)?;
    let stiffness = match params.attachment {
        AttachmentKind::CubicNes { stiffness } => stiffness,
        AttachmentKind::LinearTmd { .. } => {
            return Err(Error::Domain(
                "critical analysis applies to the cubic attachment".into(),
            ))
        }
    };
    let z3_cr = reduction::z3_critical(omega, stiffness, (chat1, chat2))?;
    let v_cr = reduction::v_critical(&params, omega, window)?;
    let hm = hamiltonian_model(&params, omega, window, z3_cr)?;
    let roots = reduction::fixed_points(&hm)?;
    let opts = config.analysis.homoclinic.unwrap_or_default();
    let report = homoclinic_check(&hm, &opts)?;
    let echo = config.echo();
    let body = json!({
        "omega": omega,
        "window": [window.0, window.1],
        "chat1": chat1,
        "chat2": chat2,
        "roots": roots,
        "z3_cr": z3_cr,
        "v_cr": v_cr,
        "saddle_amplitude": report.saddle_a,
        "homoclinic": report,
    });
    export::write_json_report(&out_path(config, "critical.json"), body, &echo)?;
    println!(
        "critical: v_cr = {v_cr:.4}, roots = {:?}, forward capture = {}",
        roots, report.forward_capture
    );
    Ok(())
}

fn write_cost_surface(
    config: &RunConfig,
    echo: &serde_json::Value,
    center: (f64, f64),
    mut cost: impl FnMut(f64, f64) -> Result<f64>,
) -> Result<()> {
    use std::fmt::Write as _;
    let mut csv = String::new();
    writeln!(csv, "# config: {echo}").unwrap();
    writeln!(csv, "zeta,stiffness,j").unwrap();
    let n = 41;
    for iz in 0..n {
        let z = center.0 * (0.2 + 1.6 * iz as f64 / (n - 1) as f64);
        for ik in 0..n {
            let k = center.1 * (0.5 + 1.0 * ik as f64 / (n - 1) as f64);
            let j = cost(z, k).unwrap_or(f64::NAN);
            writeln!(
                csv,
                "{},{},{}",
                crate::export::format_sig12(z),
                crate::export::format_sig12(k),
                crate::export::format_sig12(j)
            )
            .unwrap();
        }
    }
    std::fs::write(out_path(config, "tmd_cost_surface.csv"), csv)?;
    Ok(())
}

fn cmd_tmd_opt(config: &RunConfig) -> Result<()> {
    let tmd = config.analysis.tmd.ok_or_else(|| {
        Error::Config("analysis.tmd block (with `dof`) is required for tmd-opt".into())
    })?;
    let echo = config.echo();
    match tmd.dof {
        1 => {
            let eps = tmd
                .eps
                .ok_or_else(|| Error::Config("analysis.tmd.eps is required for dof = 1".into()))?;
            let zeta1 = tmd.zeta1.ok_or_else(|| {
                Error::Config("analysis.tmd.zeta1 is required for dof = 1".into())
            })?;
            let zeta2 = optimal_zeta2(eps, zeta1)?;
            let kappa = optimal_kappa(eps, zeta1, zeta2)?;
            let j = cost_j_1dof(eps, zeta1, zeta2, kappa)?;
            let body = json!({
                "dof": 1,
                "eps": eps,
                "zeta1": zeta1,
                "zeta2_opt": zeta2,
                "kappa_opt": kappa,
                "j_fraction": j,
                "j_at_reference_impulse": cost_at_impulse(j, REFERENCE_IMPULSE),
                "reference_impulse": REFERENCE_IMPULSE,
            });
            export::write_json_report(&out_path(config, "tmd_opt.json"), body, &echo)?;
            if config.wants("csv") {
                write_cost_surface(config, &echo, (zeta2, kappa), |z, k| {
                    cost_j_1dof(eps, zeta1, z, k)
                })?;
            }
            println!("tmd-opt(1): zeta2 = {zeta2:.6}, kappa = {kappa:.6}, J = {j:.6}");
        }
        2 => {
            let params = config.resolve_system()?;
            let result = optimize_2dof(&params, &OptimizeOptions::default())?;
            let body = json!({
                "dof": 2,
                "zeta3_opt": result.zeta3,
                "k_tmd_opt": result.k_tmd,
                "j_fraction": result.cost,
                "j_at_reference_impulse": cost_at_impulse(result.cost, REFERENCE_IMPULSE),
                "reference_impulse": REFERENCE_IMPULSE,
                "converged": result.converged,
                "iterations": result.iterations,
                "gradient_norm": result.gradient_norm,
            });
            export::write_json_report(&out_path(config, "tmd_opt.json"), body, &echo)?;
            if config.wants("csv") {
                write_cost_surface(config, &echo, (result.zeta3, result.k_tmd), |z, k| {
                    crate::tmdopt::cost_j_2dof(&params, z, k)
                })?;
            }
            println!(
                "tmd-opt(2): zeta3 = {:.6}, k_tmd = {:.6}, J = {:.6}, converged = {}",
                result.zeta3, result.k_tmd, result.cost, result.converged
            );
        }
        other => {
            return Err(Error::Config(format!(
                "analysis.tmd.dof must be 1 or 2, got {other}"
            )))
        }
    }
    Ok(())
}

fn cmd_design_nes(config: &RunConfig) -> Result<()> {
    let params = config.resolve_system()?;
    let design = config.analysis.design.ok_or_else(|| {
        Error::Config("analysis.design block (v_design, derate) is required for design-nes".into())
    })?;
    let window = config.window();
    let stiffness = design_nes_stiffness(&params, design.v_design, design.derate, window)?;
    let designed = params.with_attachment(AttachmentKind::CubicNes { stiffness });
    let omega = fast_frequency(&designed);
    let v_cr = reduction::v_critical(&designed, omega, window)?;
    let echo = config.echo();
    let body = json!({
        "v_design": design.v_design,
        "derate": design.derate,
        "window": [window.0, window.1],
        "stiffness": stiffness,
        "v_critical_roundtrip": v_cr,
    });
    export::write_json_report(&out_path(config, "design_nes.json"), body, &echo)?;
    println!("design-nes: stiffness = {stiffness:.6} (v_cr = {v_cr:.4})");
    Ok(())
}

fn cmd_sweep(config: &RunConfig) -> Result<()> {
    let params = config.resolve_system()?;
    let analysis = &config.analysis;
    let sweep_cfg = analysis.sweep.as_ref().ok_or_else(|| {
        Error::Config("analysis.sweep block (with `kind`) is required for sweep".into())
    })?;
    let cfg = config.simulation.integrator();
    let echo = config.echo();
    let result = match sweep_cfg.kind {
        SweepKind::Velocity => {
            let v_grid = analysis.v_grid.values()?;
            velocity_sweep(&params, &v_grid, analysis.tau_eval, &cfg)?
        }
        SweepKind::Stiffness => {
            let grid = sweep_cfg
                .stiffness_grid
                .ok_or_else(|| {
                    Error::Config(
                        "analysis.sweep.stiffness_grid is required for kind = stiffness".into(),
                    )
                })?
                .values()?;
            stiffness_sweep(
                &params,
                &grid,
                config.simulation.v0,
                analysis.tau_eval,
                &cfg,
            )?
        }
        SweepKind::Robustness => {
            let spec = sweep_cfg.perturbation.clone().ok_or_else(|| {
                Error::Config(
                    "analysis.sweep.perturbation is required for kind = robustness".into(),
                )
            })?;
            let v_grid = analysis.v_grid.values()?;
            robustness_sweep(&params, &spec, &v_grid, analysis.tau_eval, &cfg)?
        }
    };
    if config.wants("csv") {
        export::write_sweep_csv(&out_path(config, "sweep.csv"), &result, &echo)?;
    }
    if config.wants("json") {
        let body = serde_json::to_value(&result)?;
        export::write_json_report(&out_path(config, "sweep.json"), body, &echo)?;
    }
    if config.wants("svg") {
        export::write_heatmap_svg(&out_path(config, "sweep.svg"), &result, &echo)?;
    }
    let best = result.best_cell();
    println!(
        "sweep: {} cells, best metric {:?}",
        result.metric.len(),
        best.map(|c| c.2)
    );

    // velocity sweeps double as threshold scans
    if matches!(sweep_cfg.kind, SweepKind::Velocity) && config.wants("json") {
        let threshold = detect_threshold(
            &SystemModel::TwoDof(params),
            &analysis.v_grid.values()?,
            analysis.tau_eval,
            analysis.drop_criterion,
            &cfg,
        )?;
        let text = match threshold {
            ThresholdResult::Found { v_threshold } => format!("{v_threshold:.4}"),
            ThresholdResult::NoThresholdInRange => "none".into(),
        };
        println!("sweep: threshold {text}");
        export::write_json_report(
            &out_path(config, "threshold.json"),
            serde_json::to_value(threshold)?,
            &echo,
        )?;
    }
    Ok(())
}

fn cmd_compare(config: &RunConfig) -> Result<()> {
    let params = config.resolve_system()?;
    let analysis = &config.analysis;
    let compare_cfg = analysis
        .compare
        .as_ref()
        .ok_or_else(|| Error::Config("analysis.compare block is required for compare".into()))?;
    let cfg = config.simulation.integrator();
    let window = config.window();
    let echo = config.echo();

    // cubic side: designed stiffness when a design rule is present
    let nes_params = match analysis.design {
        Some(d) => {
            let c = design_nes_stiffness(&params, d.v_design, d.derate, window)?;
            params.with_attachment(AttachmentKind::CubicNes { stiffness: c })
        }
        None => params.with_attachment(AttachmentKind::CubicNes {
            stiffness: params.attachment.stiffness(),
        }),
    };
    // linear side: explicit design point or Lyapunov optimum
    let (tmd_zeta3, tmd_k) = match compare_cfg.tmd {
        Some(pt) => (pt.zeta3, pt.k_tmd),
        None => {
            let r = optimize_2dof(&params, &OptimizeOptions::default())?;
            (r.zeta3, r.k_tmd)
        }
    };
    let tmd_params = params
        .with_zeta3(tmd_zeta3)
        .with_attachment(AttachmentKind::LinearTmd { stiffness: tmd_k });

    let v_grid = analysis.v_grid.values()?;
    let nes_sweep = robustness_sweep(
        &nes_params,
        &compare_cfg.perturbation,
        &v_grid,
        analysis.tau_eval,
        &cfg,
    )?;
    let tmd_sweep = robustness_sweep(
        &tmd_params,
        &compare_cfg.perturbation,
        &v_grid,
        analysis.tau_eval,
        &cfg,
    )?;
    let report = compare(&nes_sweep, &tmd_sweep)?;
    if config.wants("csv") {
        export::write_sweep_csv(&out_path(config, "nes_sweep.csv"), &nes_sweep, &echo)?;
        export::write_sweep_csv(&out_path(config, "tmd_sweep.csv"), &tmd_sweep, &echo)?;
    }
    if config.wants("svg") {
        export::write_heatmap_svg(&out_path(config, "nes_sweep.svg"), &nes_sweep, &echo)?;
        export::write_heatmap_svg(&out_path(config, "tmd_sweep.svg"), &tmd_sweep, &echo)?;
    }
    if config.wants("json") {
        let body = json!({
            "nes": {"stiffness": nes_params.attachment.stiffness(), "zeta3": nes_params.zeta3},
            "tmd": {"stiffness": tmd_k, "zeta3": tmd_zeta3},
            "report": report,
        });
        export::write_json_report(&out_path(config, "compare.json"), body, &echo)?;
    }
    println!(
        "compare: best nes {:.4}, best tmd {:.4}, nes wins {:.0}% of cells",
        report.best_first,
        report.best_second,
        100.0 * report.first_wins_fraction
    );
    Ok(())
}
