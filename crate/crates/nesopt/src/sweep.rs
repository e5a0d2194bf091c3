//! Batch experiment harness: velocity, stiffness, and robustness sweeps
//! over perturbed plants, with deterministic grids or seeded Monte Carlo
//! sampling, and side-by-side comparison of absorber kinds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::{AttachmentKind, NondimParams};
use crate::reduction::{fast_frequency, mean_c1c2};
use crate::sim::{primary_fraction_at, IntegratorConfig, SystemModel};

/// Plant parameter a robustness sweep perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerturbTarget {
    /// Second primary mass, through its mass ratio.
    #[serde(rename = "M2")]
    MassM2,
    /// Attachment mass, through its mass ratio.
    #[serde(rename = "M3")]
    MassM3,
    /// Absorber damping ratio.
    #[serde(rename = "zeta3")]
    Zeta3,
    /// Absorber stiffness (cubic or linear, whichever is attached).
    #[serde(rename = "stiffness")]
    AttachmentStiffness,
}

impl PerturbTarget {
    pub fn label(&self) -> &'static str {
        match self {
            PerturbTarget::MassM2 => "M2",
            PerturbTarget::MassM3 => "M3",
            PerturbTarget::Zeta3 => "zeta3",
            PerturbTarget::AttachmentStiffness => "stiffness",
        }
    }

    fn nominal(&self, p: &NondimParams) -> f64 {
        match self {
            PerturbTarget::MassM2 => p.mu,
            PerturbTarget::MassM3 => p.eps,
            PerturbTarget::Zeta3 => p.zeta3,
            PerturbTarget::AttachmentStiffness => p.attachment.stiffness(),
        }
    }

    fn apply(&self, p: &NondimParams, value: f64) -> NondimParams {
        let mut out = *p;
        match self {
            PerturbTarget::MassM2 => out.mu = value,
            PerturbTarget::MassM3 => out.eps = value,
            PerturbTarget::Zeta3 => out.zeta3 = value,
            PerturbTarget::AttachmentStiffness => {
                out.attachment = match p.attachment {
                    AttachmentKind::CubicNes { .. } => {
                        AttachmentKind::CubicNes { stiffness: value }
                    }
                    AttachmentKind::LinearTmd { .. } => {
                        AttachmentKind::LinearTmd { stiffness: value }
                    }
                }
            }
        }
        out
    }
}

/// How perturbed values are drawn around the nominal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SampleMode {
    /// Deterministic grid at equispaced quantiles of a normal distribution
    /// centered on the nominal with standard deviation `sigma_frac` times
    /// the nominal.
    Quantile { sigma_frac: f64, count: usize },
    /// Explicit list of values.
    Explicit { values: Vec<f64> },
    /// Seeded normal draws, sorted ascending.
    MonteCarlo {
        sigma_frac: f64,
        count: usize,
        seed: u64,
    },
}

impl Default for SampleMode {
    fn default() -> Self {
        SampleMode::Quantile {
            sigma_frac: 0.05,
            count: 9,
        }
    }
}

/// Perturbation of one plant parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub target: PerturbTarget,
    #[serde(default)]
    pub sample: SampleMode,
}

impl PerturbationSpec {
    /// Concrete perturbed values for a given nominal plant.
    pub fn values(&self, p: &NondimParams) -> Result<Vec<f64>> {
        let nominal = self.target.nominal(p);
        match &self.sample {
            SampleMode::Quantile { sigma_frac, count } => {
                if *sigma_frac <= 0.0 || *count == 0 {
                    return Err(Error::Domain(
                        "quantile sampling needs sigma_frac > 0 and count > 0".into(),
                    ));
                }
                let normal = Normal::new(nominal, sigma_frac * nominal)
                    .map_err(|e| Error::Domain(format!("bad distribution: {e}")))?;
                Ok((0..*count)
                    .map(|i| normal.inverse_cdf((i as f64 + 0.5) / *count as f64))
                    .collect())
            }
            SampleMode::Explicit { values } => {
                if values.is_empty() {
                    return Err(Error::Domain("explicit grid is empty".into()));
                }
                if values.iter().any(|&v| v <= 0.0) {
                    return Err(Error::Domain("grid values must be positive".into()));
                }
                Ok(values.clone())
            }
            SampleMode::MonteCarlo {
                sigma_frac,
                count,
                seed,
            } => {
                if *sigma_frac <= 0.0 || *count == 0 {
                    return Err(Error::Domain(
                        "monte carlo sampling needs sigma_frac > 0 and count > 0".into(),
                    ));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let normal = Normal::new(nominal, sigma_frac * nominal)
                    .map_err(|e| Error::Domain(format!("bad distribution: {e}")))?;
                let mut vals: Vec<f64> = (0..*count)
                    .map(|_| rand::Rng::sample(&mut rng, normal))
                    .collect();
                vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                Ok(vals)
            }
        }
    }

    fn seed(&self) -> Option<u64> {
        match self.sample {
            SampleMode::MonteCarlo { seed, .. } => Some(seed),
            _ => None,
        }
    }

    fn sigma_frac(&self) -> Option<f64> {
        match self.sample {
            SampleMode::Quantile { sigma_frac, .. } | SampleMode::MonteCarlo { sigma_frac, .. } => {
                Some(sigma_frac)
            }
            SampleMode::Explicit { .. } => None,
        }
    }
}

/// Context recorded with every sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SweepMeta {
    pub tau_eval: f64,
    pub absorber: String,
    pub design_rule: Option<String>,
    pub sigma_frac: Option<f64>,
    pub seed: Option<u64>,
}

/// Labeled metric grid over two axes; row-major with axis1 varying slowest.
/// Failed cells carry NaN and an entry in `failures`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis1_name: String,
    pub axis1: Vec<f64>,
    pub axis2_name: String,
    pub axis2: Vec<f64>,
    pub metric: Vec<f64>,
    pub failures: Vec<(usize, usize, String)>,
    pub meta: SweepMeta,
}

impl SweepResult {
    pub fn at(&self, i1: usize, i2: usize) -> f64 {
        self.metric[i1 * self.axis2.len() + i2]
    }

    /// Smallest finite metric value with its axis indices.
    pub fn best_cell(&self) -> Option<(usize, usize, f64)> {
        let n2 = self.axis2.len();
        self.metric
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, &v)| (i / n2, i % n2, v))
    }

    /// Largest finite metric value with its axis indices.
    pub fn worst_cell(&self) -> Option<(usize, usize, f64)> {
        let n2 = self.axis2.len();
        self.metric
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, &v)| (i / n2, i % n2, v))
    }
}

fn absorber_label(p: &NondimParams) -> String {
    match p.attachment {
        AttachmentKind::CubicNes { .. } => "nes".into(),
        AttachmentKind::LinearTmd { .. } => "tmd".into(),
    }
}

/// Evaluates a grid of (plant, v0) cells in parallel, recording per-cell
/// failures instead of aborting.
fn evaluate_grid(
    plants: &[NondimParams],
    v_grid: &[f64],
    tau_eval: f64,
    cfg: &IntegratorConfig,
    v_outer: bool,
) -> (Vec<f64>, Vec<(usize, usize, String)>) {
    let (n1, n2) = if v_outer {
        (v_grid.len(), plants.len())
    } else {
        (plants.len(), v_grid.len())
    };
    let cells: Vec<(usize, usize)> = (0..n1).flat_map(|i| (0..n2).map(move |j| (i, j))).collect();
    let results: Vec<(usize, usize, std::result::Result<f64, String>)> = cells
        .par_iter()
        .map(|&(i, j)| {
            let (plant, v0) = if v_outer {
                (&plants[j], v_grid[i])
            } else {
                (&plants[i], v_grid[j])
            };
            let r = primary_fraction_at(&SystemModel::TwoDof(*plant), v0, tau_eval, cfg)
                .map_err(|e| e.to_string());
            (i, j, r)
        })
        .collect();
    let mut metric = vec![f64::NAN; n1 * n2];
    let mut failures = Vec::new();
    for (i, j, r) in results {
        match r {
            Ok(v) => metric[i * n2 + j] = v,
            Err(e) => failures.push((i, j, e)),
        }
    }
    (metric, failures)
}

/// Primary energy fraction at `tau_eval` across an ascending impulse grid.
pub fn velocity_sweep(
    p: &NondimParams,
    v_grid: &[f64],
    tau_eval: f64,
    cfg: &IntegratorConfig,
) -> Result<SweepResult> {
    if v_grid.is_empty() {
        return Err(Error::Domain("velocity grid is empty".into()));
    }
    if v_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("velocity grid must be ascending".into()));
    }
    let plants = vec![*p];
    let (metric, failures) = evaluate_grid(&plants, v_grid, tau_eval, cfg, true);
    Ok(SweepResult {
        axis1_name: "v0".into(),
        axis1: v_grid.to_vec(),
        axis2_name: "nominal".into(),
        axis2: vec![p.attachment.stiffness()],
        metric,
        failures,
        meta: SweepMeta {
            tau_eval,
            absorber: absorber_label(p),
            ..Default::default()
        },
    })
}

/// Primary energy fraction at `tau_eval` across an absorber stiffness grid
/// at fixed impulse. The best stiffness is the argmin of the metric.
pub fn stiffness_sweep(
    p: &NondimParams,
    stiffness_grid: &[f64],
    v0: f64,
    tau_eval: f64,
    cfg: &IntegratorConfig,
) -> Result<SweepResult> {
    if stiffness_grid.is_empty() || stiffness_grid.iter().any(|&k| k <= 0.0) {
        return Err(Error::Domain("stiffness grid must be positive".into()));
    }
    let plants: Vec<NondimParams> = stiffness_grid
        .iter()
        .map(|&k| PerturbTarget::AttachmentStiffness.apply(p, k))
        .collect();
    let (metric, failures) = evaluate_grid(&plants, &[v0], tau_eval, cfg, false);
    Ok(SweepResult {
        axis1_name: "stiffness".into(),
        axis1: stiffness_grid.to_vec(),
        axis2_name: "v0".into(),
        axis2: vec![v0],
        metric,
        failures,
        meta: SweepMeta {
            tau_eval,
            absorber: absorber_label(p),
            ..Default::default()
        },
    })
}

/// Stiffness value minimizing the metric of a stiffness sweep.
pub fn argmin_stiffness(result: &SweepResult) -> Option<f64> {
    result.best_cell().map(|(i1, _, _)| result.axis1[i1])
}

/// Inverts the critical-velocity formula for the cubic stiffness: the
/// stiffness for which the critical impulse equals `derate * v_design`.
/// The mean forcing components do not depend on the stiffness, so the
/// inversion is closed-form.
pub fn design_nes_stiffness(
    p: &NondimParams,
    v_design: f64,
    derate: f64,
    window: (f64, f64),
) -> Result<f64> {
    if v_design <= 0.0 {
        return Err(Error::Domain("design velocity must be positive".into()));
    }
    if !(derate > 0.0 && derate <= 1.0) {
        return Err(Error::Domain("derate must lie in (0, 1]".into()));
    }
    let omega = fast_frequency(p);
    let (c1, c2) = mean_c1c2(p, omega, window)?;
    let d = c1 * c1 + c2 * c2;
    if d <= 0.0 {
        return Err(Error::Domain("mean forcing is degenerate".into()));
    }
    let v_cr = derate * v_design;
    Ok(2.0 * p.eps * omega.powi(6) / (81.0 * v_cr * v_cr * d))
}

/// Metric grid over (impulse, perturbed plant parameter). The absorber
/// design stays fixed at the nominal; only the plant is perturbed.
pub fn robustness_sweep(
    nominal: &NondimParams,
    spec: &PerturbationSpec,
    v_grid: &[f64],
    tau_eval: f64,
    cfg: &IntegratorConfig,
) -> Result<SweepResult> {
    if v_grid.is_empty() {
        return Err(Error::Domain("velocity grid is empty".into()));
    }
    let values = spec.values(nominal)?;
    let plants: Vec<NondimParams> = values
        .iter()
        .map(|&v| spec.target.apply(nominal, v))
        .collect();
    for plant in &plants {
        plant.validate()?;
    }
    let (metric, failures) = evaluate_grid(&plants, v_grid, tau_eval, cfg, true);
    Ok(SweepResult {
        axis1_name: "v0".into(),
        axis1: v_grid.to_vec(),
        axis2_name: spec.target.label().into(),
        axis2: values,
        metric,
        failures,
        meta: SweepMeta {
            tau_eval,
            absorber: absorber_label(nominal),
            design_rule: None,
            sigma_frac: spec.sigma_frac(),
            seed: spec.seed(),
        },
    })
}

/// Side-by-side summary of two sweeps on identical axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    /// first metric minus second metric, per cell
    pub difference: Vec<f64>,
    pub best_first: f64,
    pub best_second: f64,
    pub worst_first: f64,
    pub worst_second: f64,
    /// Fraction of cells where the first result has the lower metric.
    pub first_wins_fraction: f64,
}

/// Compares two sweeps cell by cell. Axes must match exactly.
pub fn compare(first: &SweepResult, second: &SweepResult) -> Result<CompareReport> {
    if first.axis1 != second.axis1 || first.axis2 != second.axis2 {
        return Err(Error::AxisMismatch(
            "sweeps were produced on different grids".into(),
        ));
    }
    let difference: Vec<f64> = first
        .metric
        .iter()
        .zip(&second.metric)
        .map(|(a, b)| a - b)
        .collect();
    let wins = difference.iter().filter(|d| **d < 0.0).count();
    let finite = difference.iter().filter(|d| d.is_finite()).count().max(1);
    let best = |r: &SweepResult| r.best_cell().map(|c| c.2).unwrap_or(f64::NAN);
    let worst = |r: &SweepResult| r.worst_cell().map(|c| c.2).unwrap_or(f64::NAN);
    Ok(CompareReport {
        axis1: first.axis1.clone(),
        axis2: first.axis2.clone(),
        difference,
        best_first: best(first),
        best_second: best(second),
        worst_first: worst(first),
        worst_second: worst(second),
        first_wins_fraction: wins as f64 / finite as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_nondim;
    use crate::reduction::v_critical;

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    #[test]
    fn linear_absorber_metric_is_constant_in_the_impulse() {
        let p = reference_nondim().with_attachment(AttachmentKind::LinearTmd { stiffness: 0.02 });
        let grid = [0.05, 0.115, 0.2];
        let tight = IntegratorConfig::default().with_tols(1e-11, 1e-13);
        let r = velocity_sweep(&p, &grid, 50.0, &tight).unwrap();
        assert_eq!(r.axis1, grid.to_vec());
        for i in 1..grid.len() {
            assert!((r.at(i, 0) - r.at(0, 0)).abs() < 1e-10);
        }
    }

    #[test]
    fn metric_values_are_energy_fractions() {
        let p = reference_nondim();
        let grid = [0.05, 0.1, 0.15, 0.2];
        let r = velocity_sweep(&p, &grid, 50.0, &cfg()).unwrap();
        assert!(r.failures.is_empty());
        for &m in &r.metric {
            assert!((0.0..=1.01).contains(&m), "metric {m}");
        }
    }

    #[test]
    fn single_point_stiffness_grid_is_its_own_argmin() {
        let p = reference_nondim();
        let r = stiffness_sweep(&p, &[0.5], 0.115, 50.0, &cfg()).unwrap();
        assert_eq!(argmin_stiffness(&r), Some(0.5));
    }

    #[test]
    fn cubic_stiffness_response_has_an_interior_optimum() {
        let p = reference_nondim();
        let grid: Vec<f64> = (0..13).map(|i| 0.1 + 0.15 * i as f64).collect();
        let r = stiffness_sweep(&p, &grid, 0.2, 50.0, &cfg()).unwrap();
        let best = argmin_stiffness(&r).unwrap();
        assert!(
            best > grid[0] && best < grid[grid.len() - 1],
            "argmin {best}"
        );
    }

    #[test]
    fn designed_stiffness_round_trips_through_the_critical_velocity() {
        let p = reference_nondim();
        let window = (0.0, 50.0);
        for v in [0.08, 0.1, 0.13] {
            let c = design_nes_stiffness(&p, v, 1.0, window).unwrap();
            let designed = p.with_attachment(AttachmentKind::CubicNes { stiffness: c });
            let omega = crate::reduction::fast_frequency(&designed);
            let back = v_critical(&designed, omega, window).unwrap();
            assert!((back - v).abs() < 1e-8, "{back} vs {v}");
        }
        // stronger derating calls for a stiffer spring
        let c90 = design_nes_stiffness(&p, 0.1, 0.9, window).unwrap();
        let c75 = design_nes_stiffness(&p, 0.1, 0.75, window).unwrap();
        assert!(c75 > c90);
        assert!(design_nes_stiffness(&p, 0.1, 1.5, window).is_err());
    }

    #[test]
    fn nominal_only_perturbation_reduces_to_a_velocity_sweep() {
        let p = reference_nondim();
        let grid = [0.08, 0.115, 0.15];
        let spec = PerturbationSpec {
            target: PerturbTarget::MassM2,
            sample: SampleMode::Explicit { values: vec![p.mu] },
        };
        let robust = robustness_sweep(&p, &spec, &grid, 50.0, &cfg()).unwrap();
        let plain = velocity_sweep(&p, &grid, 50.0, &cfg()).unwrap();
        for i in 0..grid.len() {
            assert!((robust.at(i, 0) - plain.at(i, 0)).abs() < 1e-14);
        }
    }

    #[test]
    fn quantile_grid_is_symmetric_and_ordered() {
        let p = reference_nondim();
        let spec = PerturbationSpec {
            target: PerturbTarget::MassM3,
            sample: SampleMode::Quantile {
                sigma_frac: 0.05,
                count: 9,
            },
        };
        let values = spec.values(&p).unwrap();
        assert_eq!(values.len(), 9);
        assert!((values[4] - p.eps).abs() < 1e-12);
        for w in values.windows(2) {
            assert!(w[1] > w[0]);
        }
        for i in 0..4 {
            let lo = p.eps - values[i];
            let hi = values[8 - i] - p.eps;
            assert!((lo - hi).abs() < 1e-12);
        }
    }

    #[test]
    fn seeded_runs_are_byte_identical() {
        let p = reference_nondim();
        let spec = PerturbationSpec {
            target: PerturbTarget::AttachmentStiffness,
            sample: SampleMode::MonteCarlo {
                sigma_frac: 0.05,
                count: 4,
                seed: 99,
            },
        };
        let grid = [0.1, 0.12];
        let a = robustness_sweep(&p, &spec, &grid, 30.0, &cfg()).unwrap();
        let b = robustness_sweep(&p, &spec, &grid, 30.0, &cfg()).unwrap();
        assert_eq!(
            serde_json::to_vec(&a).unwrap(),
            serde_json::to_vec(&b).unwrap()
        );
        assert_eq!(a.meta.seed, Some(99));
    }

    #[test]
    fn comparison_requires_matching_axes_and_zeroes_on_itself() {
        let p = reference_nondim();
        let grid = [0.1, 0.12];
        let spec = PerturbationSpec {
            target: PerturbTarget::MassM2,
            sample: SampleMode::Quantile {
                sigma_frac: 0.05,
                count: 3,
            },
        };
        let a = robustness_sweep(&p, &spec, &grid, 30.0, &cfg()).unwrap();
        let report = compare(&a, &a).unwrap();
        assert!(report.difference.iter().all(|&d| d == 0.0));
        assert_eq!(report.best_first, report.best_second);
        let b = velocity_sweep(&p, &grid, 30.0, &cfg()).unwrap();
        assert!(matches!(
            compare(&a, &b),
            Err(crate::Error::AxisMismatch(_))
        ));
    }
}
