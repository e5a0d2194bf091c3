//! Time integration of the full-order models: adaptive Dormand-Prince 5(4)
//! with dense output, a fixed-step variant for step-halving checks, energy
//! traces, and numeric detection of the energy-transfer threshold velocity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    chain_dissipation_power, chain_primary_energy, chain_rhs, dissipation_power, nes_energy,
    primary_energy, rhs, ChainParams, NondimParams, State,
};

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
];
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
// 5th-order minus embedded 4th-order weights.
const ER: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Step-size controller safety factor.
const SAFETY: f64 = 0.8;

/// Tolerances and sampling for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Interval of the stored sample grid.
    pub dense_output_dt: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: 1.0,
            dense_output_dt: 0.02,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(t > 0.0 && t <= 1e-2) {
                return Err(Error::Domain(format!("{name} must lie in (0, 1e-2]")));
            }
        }
        if self.max_step <= 0.0 || self.dense_output_dt <= 0.0 {
            return Err(Error::Domain(
                "max_step and dense_output_dt must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn with_tols(mut self, rel: f64, abs: f64) -> Self {
        self.rel_tol = rel;
        self.abs_tol = abs;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dense_output_dt = dt;
        self
    }
}

/// Which full-order system a trajectory belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum SystemModel {
    TwoDof(NondimParams),
    Chain(ChainParams),
}

impl SystemModel {
    pub fn n_coords(&self) -> usize {
        match self {
            SystemModel::TwoDof(_) => 3,
            SystemModel::Chain(c) => c.n() + 1,
        }
    }

    pub fn derivative(&self, s: &State) -> Result<State> {
        match self {
            SystemModel::TwoDof(p) => Ok(rhs(p, s)),
            SystemModel::Chain(c) => chain_rhs(c, s),
        }
    }
}

/// Sampled solution of an initial value problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// One flat [x.., v..] vector per sample.
    pub states: Vec<Vec<f64>>,
    /// Snapshot of the generating system, when integrated through
    /// [`integrate_system`].
    pub system: Option<SystemModel>,
}

impl Trajectory {
    pub fn state(&self, i: usize) -> State {
        State::from_flat(&self.states[i])
    }

    pub fn last_state(&self) -> State {
        State::from_flat(self.states.last().expect("trajectory is nonempty"))
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], rel: f64, abs: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..err.len() {
        let scale = abs + rel * y0[i].abs().max(y1[i].abs());
        let r = err[i] / scale;
        sum += r * r;
    }
    (sum / err.len() as f64).sqrt()
}

/// Integrates dy/dtau = f(tau, y) with the adaptive 5(4) pair. Steps are
/// clipped to land exactly on the `dense_output_dt` sample grid, so every
/// stored sample is an error-controlled solution point; the end point is
/// always included.
pub fn integrate<F>(
    mut f: F,
    y0: &[f64],
    tspan: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    cfg.validate()?;
    let (t0, t1) = tspan;
    if t1 <= t0 {
        return Err(Error::Domain("tspan.end must exceed tspan.start".into()));
    }
    let dim = y0.len();
    let span = t1 - t0;

    // sample grid, end point always included
    let n_samples = (span / cfg.dense_output_dt).floor() as usize;
    let mut sample_times: Vec<f64> = (0..=n_samples)
        .map(|i| t0 + i as f64 * cfg.dense_output_dt)
        .collect();
    if t1 - sample_times[sample_times.len() - 1] > 1e-12 * span {
        sample_times.push(t1);
    } else {
        let last = sample_times.len() - 1;
        sample_times[last] = t1;
    }

    let mut times = Vec::with_capacity(sample_times.len());
    let mut states = Vec::with_capacity(sample_times.len());
    times.push(t0);
    states.push(y0.to_vec());
    let mut next_sample = 1usize;

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; dim]).collect();
    let mut k0 = vec![0.0; dim];
    f(t, &y, &mut k0);

    let mut h_ctrl = (cfg.rel_tol.powf(0.25) * span).min(cfg.max_step).min(span) * 0.1;
    let h_floor = span * 1e-14;
    let mut y_stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    let mut facold: f64 = 1e-4;
    let max_steps = 50_000_000usize;

    for _step in 0..max_steps {
        if next_sample >= sample_times.len() {
            return Ok(Trajectory {
                times,
                states,
                system: None,
            });
        }
        if h_ctrl < h_floor {
            return Err(Error::Stiffness { t });
        }
        // clip to the next sample boundary
        let boundary = sample_times[next_sample];
        let h = h_ctrl.min(cfg.max_step).min(boundary - t);
        let lands_on_sample = t + h >= boundary - 1e-13 * span;

        k[0].copy_from_slice(&k0);
        for stage in 1..6 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(stage) {
                    acc += A[stage][j] * kj[i];
                }
                y_stage[i] = y[i] + h * acc;
            }
            f(t + C[stage] * h, &y_stage, &mut k[stage]);
        }
        // 5th-order solution, then the trailing derivative evaluation
        for i in 0..dim {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(6) {
                acc += B5[j] * kj[i];
            }
            y_new[i] = y[i] + h * acc;
        }
        f(t + h, &y_new, &mut k[6]);
        for i in 0..dim {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate() {
                acc += ER[j] * kj[i];
            }
            err[i] = h * acc;
        }
        let err_norm = error_norm(&err, &y, &y_new, cfg.rel_tol, cfg.abs_tol);

        if err_norm <= 1.0 {
            t = if lands_on_sample { boundary } else { t + h };
            y.copy_from_slice(&y_new);
            k0.copy_from_slice(&k[6]);
            if lands_on_sample {
                times.push(boundary);
                states.push(y.clone());
                next_sample += 1;
            }
            // PI step-size control on the controller step, which clipping
            // must not inflate
            let fac11 = err_norm.max(1e-16).powf(0.2);
            let fac = (fac11 / facold.powf(0.04) / SAFETY).clamp(0.2, 5.0);
            facold = err_norm.max(1e-4);
            let h_next = h / fac;
            if h_next > h_ctrl || !lands_on_sample || h >= 0.5 * h_ctrl {
                h_ctrl = h_next.min(cfg.max_step);
            }
        } else {
            let fac11 = err_norm.powf(0.2);
            h_ctrl = h / (fac11 / SAFETY).min(5.0);
        }
    }
    Err(Error::Stiffness { t })
}

/// Fixed-step 5th-order integration storing every step. Serves as the
/// independent route for step-halving convergence checks.
pub fn integrate_fixed<F>(mut f: F, y0: &[f64], tspan: (f64, f64), dt: f64) -> Trajectory
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let (t0, t1) = tspan;
    let dim = y0.len();
    let n_steps = ((t1 - t0) / dt).round().max(1.0) as usize;
    let h = (t1 - t0) / n_steps as f64;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut t = t0;
    let mut y = y0.to_vec();
    times.push(t);
    states.push(y.clone());
    let mut k: Vec<Vec<f64>> = (0..6).map(|_| vec![0.0; dim]).collect();
    let mut y_stage = vec![0.0; dim];
    for step in 0..n_steps {
        f(t, &y, &mut k[0]);
        for stage in 1..6 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(stage) {
                    acc += A[stage][j] * kj[i];
                }
                y_stage[i] = y[i] + h * acc;
            }
            f(t + C[stage] * h, &y_stage, &mut k[stage]);
        }
        for i in 0..dim {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(6) {
                acc += B5[j] * kj[i];
            }
            y[i] += h * acc;
        }
        t = t0 + (step + 1) as f64 * h;
        times.push(t);
        states.push(y.clone());
    }
    Trajectory {
        times,
        states,
        system: None,
    }
}

/// Integrates a full-order system from rest with an impulse on the first
/// mass.
pub fn integrate_system(
    model: &SystemModel,
    v0: f64,
    tspan: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let n = model.n_coords();
    let ic = State::impulse(n, v0);
    let mut traj = match model {
        SystemModel::TwoDof(p) => {
            p.validate()?;
            let p = *p;
            integrate(
                move |_t, y, dy| {
                    let d = rhs(&p, &State::from_flat(y));
                    dy[..n].copy_from_slice(&d.x);
                    dy[n..].copy_from_slice(&d.v);
                },
                &ic.to_flat(),
                tspan,
                cfg,
            )?
        }
        SystemModel::Chain(c) => {
            c.validate()?;
            let c = c.clone();
            integrate(
                move |_t, y, dy| {
                    let d = chain_rhs(&c, &State::from_flat(y)).expect("dimension checked");
                    dy[..n].copy_from_slice(&d.x);
                    dy[n..].copy_from_slice(&d.v);
                },
                &ic.to_flat(),
                tspan,
                cfg,
            )?
        }
    };
    traj.system = Some(model.clone());
    Ok(traj)
}

/// Energy bookkeeping along a trajectory of an impulse-excited system:
/// primary and attachment energies as fractions of the starting energy, and
/// cumulative dissipated energy per damping channel (trapezoidal quadrature
/// of the channel powers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub primary_fraction: Vec<f64>,
    pub nes_fraction: Vec<f64>,
    /// One cumulative series per damping channel.
    pub dissipated_cumulative: Vec<Vec<f64>>,
}

/// Computes the energy trace of a trajectory produced by
/// [`integrate_system`]. The initial state must carry nonzero energy.
pub fn energy_trace(traj: &Trajectory) -> Result<EnergyTrace> {
    let model = traj
        .system
        .as_ref()
        .ok_or_else(|| Error::Domain("trajectory carries no system snapshot".into()))?;
    let n = traj.len();
    if n == 0 {
        return Err(Error::Domain("empty trajectory".into()));
    }
    let (e_primary, e_nes, powers): (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) = match model {
        SystemModel::TwoDof(p) => {
            let mut ep = Vec::with_capacity(n);
            let mut en = Vec::with_capacity(n);
            let mut pw = Vec::with_capacity(n);
            for i in 0..n {
                let s = traj.state(i);
                ep.push(primary_energy(p, &s));
                en.push(nes_energy(p, &s));
                pw.push(dissipation_power(p, &s).to_vec());
            }
            (ep, en, pw)
        }
        SystemModel::Chain(c) => {
            let mut ep = Vec::with_capacity(n);
            let mut en = Vec::with_capacity(n);
            let mut pw = Vec::with_capacity(n);
            for i in 0..n {
                let s = traj.state(i);
                ep.push(chain_primary_energy(c, &s));
                en.push(crate::model::chain_nes_energy(c, &s));
                pw.push(chain_dissipation_power(c, &s));
            }
            (ep, en, pw)
        }
    };
    let e_start = e_primary[0] + e_nes[0];
    if e_start <= 0.0 {
        return Err(Error::ZeroStartEnergy);
    }
    let n_channels = powers[0].len();
    let mut dissipated = vec![vec![0.0; n]; n_channels];
    for i in 1..n {
        let dt = traj.times[i] - traj.times[i - 1];
        for ch in 0..n_channels {
            dissipated[ch][i] =
                dissipated[ch][i - 1] + 0.5 * dt * (powers[i - 1][ch] + powers[i][ch]);
        }
    }
    Ok(EnergyTrace {
        times: traj.times.clone(),
        primary_fraction: e_primary.iter().map(|e| e / e_start).collect(),
        nes_fraction: e_nes.iter().map(|e| e / e_start).collect(),
        dissipated_cumulative: dissipated,
    })
}

/// Primary energy fraction remaining at `tau_eval` for an impulse of size
/// `v0`.
pub fn primary_fraction_at(
    model: &SystemModel,
    v0: f64,
    tau_eval: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let mut cfg = *cfg;
    cfg.dense_output_dt = tau_eval; // endpoints only
    let traj = integrate_system(model, v0, (0.0, tau_eval), &cfg)?;
    let s = traj.last_state();
    let e = match model {
        SystemModel::TwoDof(p) => primary_energy(p, &s),
        SystemModel::Chain(c) => chain_primary_energy(c, &s),
    };
    Ok(e / (0.5 * v0 * v0))
}

/// Outcome of a threshold scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ThresholdResult {
    Found { v_threshold: f64 },
    NoThresholdInRange,
}

/// Scans an ascending velocity grid for the smallest impulse whose primary
/// energy fraction at `tau_eval` falls below `drop_criterion`, then refines
/// the bracket by bisection to resolution 1e-3.
pub fn detect_threshold(
    model: &SystemModel,
    v_grid: &[f64],
    tau_eval: f64,
    drop_criterion: f64,
    cfg: &IntegratorConfig,
) -> Result<ThresholdResult> {
    if v_grid.is_empty() {
        return Err(Error::Domain("velocity grid is empty".into()));
    }
    if v_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("velocity grid must be ascending".into()));
    }
    if tau_eval <= 0.0 {
        return Err(Error::Domain("tau_eval must be positive".into()));
    }
    let mut previous: Option<f64> = None;
    for &v in v_grid {
        let frac = primary_fraction_at(model, v, tau_eval, cfg)?;
        if frac < drop_criterion {
            let Some(mut lo) = previous else {
                return Ok(ThresholdResult::Found { v_threshold: v });
            };
            let mut hi = v;
            while hi - lo > 1e-3 {
                let mid = 0.5 * (lo + hi);
                if primary_fraction_at(model, mid, tau_eval, cfg)? < drop_criterion {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(ThresholdResult::Found { v_threshold: hi });
        }
        previous = Some(v);
    }
    Ok(ThresholdResult::NoThresholdInRange)
}
