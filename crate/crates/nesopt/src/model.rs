//! System definitions: physical and nondimensional parameter sets, equations
//! of motion for the 2-DOF primary with an attachment and for general chains,
//! modal analysis of the primary, and instantaneous energy functionals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensional parameters of the two-mass primary with a grounded first mass
/// and an attachment on the second. `kappa3` is the cubic spring coefficient
/// of the attachment (N/m^3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub kappa1: f64,
    pub kappa12: f64,
    pub kappa3: f64,
    pub b1: f64,
    pub b12: f64,
    pub b3: f64,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        if self.m1 <= 0.0 || self.m2 <= 0.0 || self.m3 <= 0.0 {
            return Err(Error::Domain("masses must be positive".into()));
        }
        if self.kappa1 <= 0.0 || self.kappa12 <= 0.0 || self.kappa3 <= 0.0 {
            return Err(Error::Domain("stiffnesses must be positive".into()));
        }
        if self.b1 < 0.0 || self.b12 < 0.0 || self.b3 < 0.0 {
            return Err(Error::Domain("dampings must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Kind of absorber attached to the second primary mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AttachmentKind {
    /// Essentially nonlinear attachment: cubic spring, no linear term.
    CubicNes { stiffness: f64 },
    /// Linear tuned mass damper.
    LinearTmd { stiffness: f64 },
}

impl AttachmentKind {
    pub fn stiffness(&self) -> f64 {
        match *self {
            AttachmentKind::CubicNes { stiffness } => stiffness,
            AttachmentKind::LinearTmd { stiffness } => stiffness,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, AttachmentKind::LinearTmd { .. })
    }
}

/// Nondimensional constants of the 2-DOF primary plus attachment. This is
/// the single source of truth every model variant is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NondimParams {
    /// Mass ratio of the second primary mass to the first.
    pub mu: f64,
    /// Mass ratio of the attachment to the first primary mass.
    pub eps: f64,
    pub zeta1: f64,
    pub zeta12: f64,
    pub zeta3: f64,
    /// Coupling stiffness ratio between the two primary masses.
    pub k12: f64,
    pub attachment: AttachmentKind,
}

impl NondimParams {
    pub fn validate(&self) -> Result<()> {
        if self.mu <= 0.0 || self.eps <= 0.0 {
            return Err(Error::Domain("mass ratios must be positive".into()));
        }
        if self.k12 <= 0.0 || self.attachment.stiffness() <= 0.0 {
            return Err(Error::Domain("stiffness ratios must be positive".into()));
        }
        if self.zeta1 < 0.0 || self.zeta12 < 0.0 || self.zeta3 < 0.0 {
            return Err(Error::Domain("damping ratios must be nonnegative".into()));
        }
        Ok(())
    }

    /// Same primary with a different absorber.
    pub fn with_attachment(mut self, attachment: AttachmentKind) -> Self {
        self.attachment = attachment;
        self
    }

    /// Same system with a different absorber damping ratio.
    pub fn with_zeta3(mut self, zeta3: f64) -> Self {
        self.zeta3 = zeta3;
        self
    }
}

/// Converts dimensional parameters to the nondimensional set. Also returns
/// the time scale sqrt(kappa1/m1) in rad/s that maps dimensionless time back
/// to seconds (t = tau / time_scale).
pub fn nondimensionalize(p: &PhysicalParams) -> Result<(NondimParams, f64)> {
    p.validate()?;
    let denom = 2.0 * (p.m1 * p.kappa1).sqrt();
    let params = NondimParams {
        mu: p.m2 / p.m1,
        eps: p.m3 / p.m1,
        zeta1: p.b1 / denom,
        zeta12: p.b12 / denom,
        zeta3: p.b3 / denom,
        k12: p.kappa12 / p.kappa1,
        attachment: AttachmentKind::CubicNes {
            stiffness: p.kappa3 / p.kappa1,
        },
    };
    Ok((params, (p.kappa1 / p.m1).sqrt()))
}

/// Chain of `n` primary masses in series, grounded at the first, with a
/// cubic-spring absorber on the last. Index conventions: `mass_ratios[i]`
/// is mass i+1 relative to mass 1 (so `mass_ratios[0] == 1`), `dampings`
/// has n+1 entries (ground damper, n-1 couplers, absorber damper), and
/// `stiffness_ratios` has n-1 entries for the couplers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub mass_ratios: Vec<f64>,
    pub dampings: Vec<f64>,
    pub stiffness_ratios: Vec<f64>,
    pub eps: f64,
    pub nes_stiffness: f64,
}

impl ChainParams {
    /// Number of primary masses.
    pub fn n(&self) -> usize {
        self.mass_ratios.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n < 1 {
            return Err(Error::Domain("chain needs at least one mass".into()));
        }
        if self.dampings.len() != n + 1 {
            return Err(Error::Domain(format!(
                "expected {} damping ratios, got {}",
                n + 1,
                self.dampings.len()
            )));
        }
        if self.stiffness_ratios.len() != n - 1 {
            return Err(Error::Domain(format!(
                "expected {} stiffness ratios, got {}",
                n - 1,
                self.stiffness_ratios.len()
            )));
        }
        if (self.mass_ratios[0] - 1.0).abs() > 1e-12 {
            return Err(Error::Domain("first mass ratio must be 1".into()));
        }
        if self.mass_ratios.iter().any(|&m| m <= 0.0)
            || self.stiffness_ratios.iter().any(|&k| k <= 0.0)
            || self.eps <= 0.0
            || self.nes_stiffness <= 0.0
        {
            return Err(Error::Domain(
                "masses and stiffnesses must be positive".into(),
            ));
        }
        if self.dampings.iter().any(|&z| z < 0.0) {
            return Err(Error::Domain("dampings must be nonnegative".into()));
        }
        Ok(())
    }

    /// Two-mass chain equivalent to a `NondimParams` set with a cubic
    /// attachment.
    pub fn from_nondim(p: &NondimParams) -> Result<Self> {
        let stiffness = match p.attachment {
            AttachmentKind::CubicNes { stiffness } => stiffness,
            AttachmentKind::LinearTmd { .. } => {
                return Err(Error::Domain(
                    "chain form exists only for the cubic attachment".into(),
                ))
            }
        };
        Ok(ChainParams {
            mass_ratios: vec![1.0, p.mu],
            dampings: vec![p.zeta1, p.zeta12, p.zeta3],
            stiffness_ratios: vec![p.k12],
            eps: p.eps,
            nes_stiffness: stiffness,
        })
    }
}

/// Phase state: displacements and velocities, attachment last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl State {
    pub fn new(x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if x.len() != v.len() {
            return Err(Error::Domain("x and v must have equal length".into()));
        }
        Ok(State { x, v })
    }

    /// Rest state with an impulse `v0` on the first mass.
    pub fn impulse(n_coords: usize, v0: f64) -> Self {
        let mut v = vec![0.0; n_coords];
        v[0] = v0;
        State {
            x: vec![0.0; n_coords],
            v,
        }
    }

    pub fn zeros(n_coords: usize) -> Self {
        State {
            x: vec![0.0; n_coords],
            v: vec![0.0; n_coords],
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Packs as [x.., v..] for the integrator.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.x.clone();
        out.extend_from_slice(&self.v);
        out
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        let n = flat.len() / 2;
        State {
            x: flat[..n].to_vec(),
            v: flat[n..].to_vec(),
        }
    }
}

/// Time derivative of the full-order state for the 2-DOF primary plus
/// attachment. The attachment force is cubic or linear in the relative
/// displacement depending on `params.attachment`.
pub fn rhs(params: &NondimParams, s: &State) -> State {
    debug_assert_eq!(s.dim(), 3);
    let (x1, x2, x3) = (s.x[0], s.x[1], s.x[2]);
    let (v1, v2, v3) = (s.v[0], s.v[1], s.v[2]);
    let coupling = match params.attachment {
        AttachmentKind::CubicNes { stiffness } => {
            let d = x2 - x3;
            stiffness * d * d * d
        }
        AttachmentKind::LinearTmd { stiffness } => stiffness * (x2 - x3),
    };
    let a1 =
        -(2.0 * params.zeta1 * v1 + 2.0 * params.zeta12 * (v1 - v2) + x1 + params.k12 * (x1 - x2));
    let a2 = -(2.0 * params.zeta12 * (v2 - v1)
        + 2.0 * params.zeta3 * (v2 - v3)
        + params.k12 * (x2 - x1)
        + coupling)
        / params.mu;
    let a3 = -(2.0 * params.zeta3 * (v3 - v2) - coupling) / params.eps;
    State {
        x: vec![v1, v2, v3],
        v: vec![a1, a2, a3],
    }
}

/// Time derivative for an n-mass chain with the absorber on the last mass.
pub fn chain_rhs(params: &ChainParams, s: &State) -> Result<State> {
    let n = params.n();
    if s.dim() != n + 1 {
        return Err(Error::Domain(format!(
            "state has {} coordinates, chain needs {}",
            s.dim(),
            n + 1
        )));
    }
    let x = &s.x;
    let v = &s.v;
    let z = &params.dampings;
    let k = &params.stiffness_ratios;
    let mut a = vec![0.0; n + 1];
    for i in 0..n {
        // spring/damper to the left neighbour (ground for i = 0)
        let mut f = if i == 0 {
            2.0 * z[0] * v[0] + x[0]
        } else {
            2.0 * z[i] * (v[i] - v[i - 1]) + k[i - 1] * (x[i] - x[i - 1])
        };
        // spring/damper to the right neighbour or the absorber
        if i + 1 < n {
            f += 2.0 * z[i + 1] * (v[i] - v[i + 1]) + k[i] * (x[i] - x[i + 1]);
        } else {
            let d = x[n - 1] - x[n];
            f += 2.0 * z[n] * (v[n - 1] - v[n]) + params.nes_stiffness * d * d * d;
        }
        a[i] = -f / params.mass_ratios[i];
    }
    let d = x[n] - x[n - 1];
    a[n] = -(2.0 * z[n] * (v[n] - v[n - 1]) + params.nes_stiffness * d * d * d) / params.eps;
    Ok(State { x: v.clone(), v: a })
}

/// Undamped natural frequencies and unit mode shapes of the 2-DOF primary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalData {
    /// Ascending frequencies in dimensionless rad per unit tau.
    pub frequencies: Vec<f64>,
    /// Unit-norm shapes, first component nonnegative, one per frequency.
    pub mode_shapes: Vec<Vec<f64>>,
    /// Set when a frequency is (numerically) zero, e.g. a decoupled mass.
    pub degenerate: bool,
}

/// Solves det(K - w^2 M) = 0 for the primary blocks M = diag(1, mu),
/// K = [[1 + k12, -k12], [-k12, k12]].
pub fn modal_analysis(params: &NondimParams) -> ModalData {
    let mu = params.mu;
    let k12 = params.k12;
    // quadratic in w^2: mu w^4 - (k12 + mu (1 + k12)) w^2 + k12 = 0
    let b = k12 + mu * (1.0 + k12);
    let disc = (b * b - 4.0 * mu * k12).max(0.0).sqrt();
    let w2_lo = (b - disc) / (2.0 * mu);
    let w2_hi = (b + disc) / (2.0 * mu);
    let mut frequencies = Vec::with_capacity(2);
    let mut mode_shapes = Vec::with_capacity(2);
    let mut degenerate = false;
    for w2 in [w2_lo, w2_hi] {
        let w2 = w2.max(0.0);
        if w2 < 1e-12 {
            degenerate = true;
        }
        frequencies.push(w2.sqrt());
        // (1 + k12 - w^2) s1 - k12 s2 = 0; pick the better-conditioned row
        let r1 = 1.0 + k12 - w2;
        let (mut s1, mut s2) = if r1.abs() > k12 * 1e-12 {
            (k12, r1)
        } else {
            (k12 - mu * w2, k12)
        };
        let norm = (s1 * s1 + s2 * s2).sqrt();
        s1 /= norm;
        s2 /= norm;
        if s1 < 0.0 {
            s1 = -s1;
            s2 = -s2;
        }
        mode_shapes.push(vec![s1, s2]);
    }
    ModalData {
        frequencies,
        mode_shapes,
        degenerate,
    }
}

/// Instantaneous energy stored in the primary pair: ground-spring and
/// coupling-spring potentials plus both kinetic terms.
pub fn primary_energy(params: &NondimParams, s: &State) -> f64 {
    let (x1, x2) = (s.x[0], s.x[1]);
    let (v1, v2) = (s.v[0], s.v[1]);
    0.5 * (x1 * x1 + v1 * v1) + 0.5 * params.mu * v2 * v2 + 0.5 * params.k12 * (x1 - x2) * (x1 - x2)
}

/// Instantaneous energy stored in the attachment (kinetic plus spring
/// potential, quartic for the cubic spring).
pub fn nes_energy(params: &NondimParams, s: &State) -> f64 {
    let d = s.x[1] - s.x[2];
    let v3 = s.v[2];
    let potential = match params.attachment {
        AttachmentKind::CubicNes { stiffness } => 0.25 * stiffness * d * d * d * d,
        AttachmentKind::LinearTmd { stiffness } => 0.5 * stiffness * d * d,
    };
    0.5 * params.eps * v3 * v3 + potential
}

pub fn total_energy(params: &NondimParams, s: &State) -> f64 {
    primary_energy(params, s) + nes_energy(params, s)
}

/// Bookkeeping convention for instantaneous dissipation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DissipationConvention {
    /// Power 2 zeta (dv)^2 per channel; closes the energy balance of the
    /// equations of motion. Default.
    EnergyConsistent,
    /// Power zeta (dv)^2, half the energy-consistent value; retained as an
    /// alternative integrand convention for comparison.
    HalfCoefficient,
}

/// Dissipated power per damping channel (ground, coupler, absorber), using
/// the energy-consistent coefficient.
pub fn dissipation_power(params: &NondimParams, s: &State) -> [f64; 3] {
    dissipation_power_with(params, s, DissipationConvention::EnergyConsistent)
}

pub fn dissipation_power_with(
    params: &NondimParams,
    s: &State,
    convention: DissipationConvention,
) -> [f64; 3] {
    let factor = match convention {
        DissipationConvention::EnergyConsistent => 2.0,
        DissipationConvention::HalfCoefficient => 1.0,
    };
    let (v1, v2, v3) = (s.v[0], s.v[1], s.v[2]);
    [
        factor * params.zeta1 * v1 * v1,
        factor * params.zeta12 * (v1 - v2) * (v1 - v2),
        factor * params.zeta3 * (v2 - v3) * (v2 - v3),
    ]
}

/// Primary energy of a chain: ground spring, coupler springs, and kinetic
/// energy of all primary masses.
pub fn chain_primary_energy(params: &ChainParams, s: &State) -> f64 {
    let n = params.n();
    let mut e = 0.5 * s.x[0] * s.x[0];
    for i in 0..n {
        e += 0.5 * params.mass_ratios[i] * s.v[i] * s.v[i];
    }
    for i in 0..n - 1 {
        let d = s.x[i] - s.x[i + 1];
        e += 0.5 * params.stiffness_ratios[i] * d * d;
    }
    e
}

pub fn chain_nes_energy(params: &ChainParams, s: &State) -> f64 {
    let n = params.n();
    let d = s.x[n - 1] - s.x[n];
    0.5 * params.eps * s.v[n] * s.v[n] + 0.25 * params.nes_stiffness * d * d * d * d
}

pub fn chain_total_energy(params: &ChainParams, s: &State) -> f64 {
    chain_primary_energy(params, s) + chain_nes_energy(params, s)
}

/// Dissipated power for each of the n+1 chain damping channels.
pub fn chain_dissipation_power(params: &ChainParams, s: &State) -> Vec<f64> {
    let n = params.n();
    let mut out = Vec::with_capacity(n + 1);
    out.push(2.0 * params.dampings[0] * s.v[0] * s.v[0]);
    for i in 0..n {
        let dv = s.v[i] - s.v[i + 1];
        out.push(2.0 * params.dampings[i + 1] * dv * dv);
    }
    out
}

/// Table-style reference parameters used across the examples and tests:
/// masses 2200/1400/70 kg, stiffnesses 5.2e5/1.3e6/2.6e5, dampers
/// 500/1000/50 N s/m.
pub fn reference_physical() -> PhysicalParams {
    PhysicalParams {
        m1: 2200.0,
        m2: 1400.0,
        m3: 70.0,
        kappa1: 5.2e5,
        kappa12: 1.3e6,
        kappa3: 2.6e5,
        b1: 500.0,
        b12: 1000.0,
        b3: 50.0,
    }
}

/// Nondimensional form of [`reference_physical`].
pub fn reference_nondim() -> NondimParams {
    let (p, _) = nondimensionalize(&reference_physical()).expect("reference params are valid");
    p
}
