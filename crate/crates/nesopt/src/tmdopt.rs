//! Tuned-mass-damper design by Lyapunov analysis: the impulse-response
//! energy-dissipation cost as a quadratic form in the initial state, closed
//! forms for the single-mass primary, and a numerical optimizer for the
//! two-mass primary.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NondimParams;

/// Design parameters of a TMD on a single grounded primary mass: absorber
/// mass ratio, primary and absorber damping ratios, absorber stiffness
/// ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TmdDesign1Dof {
    pub eps: f64,
    pub zeta1: f64,
    pub zeta2: f64,
    pub kappa: f64,
}

impl TmdDesign1Dof {
    pub fn validate(&self) -> Result<()> {
        if self.eps <= 0.0 || self.kappa <= 0.0 {
            return Err(Error::Domain(
                "mass and stiffness ratios must be positive".into(),
            ));
        }
        if self.zeta1 < 0.0 || self.zeta2 < 0.0 {
            return Err(Error::Domain("damping ratios must be nonnegative".into()));
        }
        Ok(())
    }
}

/// First-order state matrix [[0, I], [-M^-1 K, -M^-1 C]] of the single-mass
/// primary with TMD. State ordering (x1, x2, v1, v2).
pub fn build_a_1dof(d: &TmdDesign1Dof) -> Result<DMatrix<f64>> {
    d.validate()?;
    let (e, z1, z2, k) = (d.eps, d.zeta1, d.zeta2, d.kappa);
    Ok(DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0,
            0.0,
            1.0,
            0.0, //
            0.0,
            0.0,
            0.0,
            1.0, //
            -1.0 - k,
            k,
            -2.0 * (z1 + z2),
            2.0 * z2, //
            k / e,
            -k / e,
            2.0 * z2 / e,
            -2.0 * z2 / e,
        ],
    ))
}

/// State matrix of the two-mass primary with a TMD of damping `zeta3` and
/// stiffness `k_tmd` on the second mass. State ordering
/// (x1, x2, x3, v1, v2, v3).
pub fn build_a_2dof(p: &NondimParams, zeta3: f64, k_tmd: f64) -> Result<DMatrix<f64>> {
    if p.mu <= 0.0 || p.eps <= 0.0 || p.k12 <= 0.0 || k_tmd <= 0.0 {
        return Err(Error::Domain(
            "mass and stiffness ratios must be positive".into(),
        ));
    }
    if zeta3 < 0.0 {
        return Err(Error::Domain("damping must be nonnegative".into()));
    }
    let (mu, e, z1, z12, k12) = (p.mu, p.eps, p.zeta1, p.zeta12, p.k12);
    let mut a = DMatrix::zeros(6, 6);
    for i in 0..3 {
        a[(i, i + 3)] = 1.0;
    }
    // -M^-1 K
    a[(3, 0)] = -(1.0 + k12);
    a[(3, 1)] = k12;
    a[(4, 0)] = k12 / mu;
    a[(4, 1)] = -(k12 + k_tmd) / mu;
    a[(4, 2)] = k_tmd / mu;
    a[(5, 1)] = k_tmd / e;
    a[(5, 2)] = -k_tmd / e;
    // -M^-1 C
    a[(3, 3)] = -2.0 * (z1 + z12);
    a[(3, 4)] = 2.0 * z12;
    a[(4, 3)] = 2.0 * z12 / mu;
    a[(4, 4)] = -2.0 * (z12 + zeta3) / mu;
    a[(4, 5)] = 2.0 * zeta3 / mu;
    a[(5, 4)] = 2.0 * zeta3 / e;
    a[(5, 5)] = -2.0 * zeta3 / e;
    Ok(a)
}

/// Largest eigenvalue real part of a state matrix.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

const HURWITZ_TOL: f64 = 1e-12;

/// Solves A' P + P A = -Q for symmetric P by vectorizing the upper triangle
/// into a dense linear system. A must be Hurwitz and Q symmetric.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(Error::Domain("A and Q must be square and same size".into()));
    }
    if (q - q.transpose()).amax() > 1e-12 * (1.0 + q.amax()) {
        return Err(Error::Domain("Q must be symmetric".into()));
    }
    let abscissa = spectral_abscissa(a);
    if abscissa >= -HURWITZ_TOL {
        return Err(Error::Stability(format!(
            "state matrix is not Hurwitz (max eigenvalue real part {abscissa:.3e})"
        )));
    }

    let idx = |i: usize, j: usize| -> usize {
        // upper-triangle index of (min, max)
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * n - i * (i + 1) / 2 + j
    };
    let m = n * (n + 1) / 2;
    let mut sys = DMatrix::zeros(m, m);
    let mut rhs = nalgebra::DVector::zeros(m);
    for k in 0..n {
        for l in k..n {
            let row = idx(k, l);
            for s in 0..n {
                sys[(row, idx(s, l))] += a[(s, k)];
                sys[(row, idx(k, s))] += a[(s, l)];
            }
            rhs[row] = -q[(k, l)];
        }
    }
    let sol = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("Lyapunov system is singular".into()))?;
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            p[(i, j)] = sol[idx(i, j)];
            p[(j, i)] = sol[idx(i, j)];
        }
    }
    let residual = (a.transpose() * &p + &p * a + q).amax();
    let bound = 1e-10 * q.amax().max(f64::MIN_POSITIVE);
    if residual > bound {
        return Err(Error::Numerical(format!(
            "Lyapunov residual {residual:.3e} exceeds {bound:.3e}"
        )));
    }
    Ok(p)
}

/// State matrix, weight, and solution of one Lyapunov cost evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovProblem {
    pub a: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub p: Option<DMatrix<f64>>,
    pub j: Option<f64>,
}

impl LyapunovProblem {
    pub fn new(a: DMatrix<f64>, q: DMatrix<f64>) -> Self {
        LyapunovProblem {
            a,
            q,
            p: None,
            j: None,
        }
    }

    /// Solves for P and evaluates the cost q0' P q0.
    pub fn solve(&mut self, q0: &[f64]) -> Result<f64> {
        let p = solve_lyapunov(&self.a, &self.q)?;
        let q0 = nalgebra::DVector::from_column_slice(q0);
        let j = (q0.transpose() * &p * &q0)[(0, 0)];
        self.p = Some(p);
        self.j = Some(j);
        Ok(j)
    }
}

/// Weight selecting the squared relative velocity of the absorber pair,
/// scaled by 4 zeta / v10^2 so that q0' P q0 is the dissipated-energy
/// fraction.
fn dissipation_weight(n: usize, vel_a: usize, vel_b: usize, zeta: f64, v10: f64) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n, n);
    let w = 4.0 * zeta / (v10 * v10);
    q[(vel_a, vel_a)] = w;
    q[(vel_b, vel_b)] = w;
    q[(vel_a, vel_b)] = -w;
    q[(vel_b, vel_a)] = -w;
    q
}

/// Fraction of the impulse energy dissipated in the absorber of the
/// single-mass design, via the Lyapunov route. Invariant to the impulse
/// magnitude.
pub fn cost_j_1dof_lyapunov(eps: f64, zeta1: f64, zeta2: f64, kappa: f64) -> Result<f64> {
    let d = TmdDesign1Dof {
        eps,
        zeta1,
        zeta2,
        kappa,
    };
    let a = build_a_1dof(&d)?;
    let v10 = 1.0;
    let q = dissipation_weight(4, 2, 3, zeta2, v10);
    let p = solve_lyapunov(&a, &q)?;
    Ok(v10 * v10 * p[(2, 2)])
}

/// Closed-form dissipated-energy fraction of the single-mass design, a
/// rational function of the four ratios. Agrees with
/// [`cost_j_1dof_lyapunov`] to near machine precision.
pub fn cost_j_1dof(eps: f64, zeta1: f64, zeta2: f64, kappa: f64) -> Result<f64> {
    let d = TmdDesign1Dof {
        eps,
        zeta1,
        zeta2,
        kappa,
    };
    d.validate()?;
    let (e, z1, z2, k) = (eps, zeta1, zeta2, kappa);
    let num = z2 * e * (4.0 * z1 * z1 * z2 * k + z2 * (4.0 * z1 * z2 + e) + z1 * k * k * (e + 1.0));
    let den = z1 * z2 * (4.0 * z1 * z2 * k + 4.0 * z2 * z2 + k * k)
        + e * e * (z1 + z2) * (z1 * k * k + z2)
        + 2.0 * z1 * z2 * e * (k * (2.0 * z1 * (z1 + z2) - 1.0) + 2.0 * z2 * (z1 + z2) + k * k);
    if den == 0.0 {
        return Err(Error::Domain("cost denominator vanishes".into()));
    }
    Ok(num / den)
}

/// Rescales a normalized dissipation fraction to the absolute quadratic
/// cost q0' P q0 for an impulse of size v10 with the weight normalized at
/// unit impulse.
pub fn cost_at_impulse(fraction: f64, v10: f64) -> f64 {
    v10 * v10 * fraction
}

/// Stationarity condition of the fraction in the stiffness ratio:
/// kappa = (eps + 2 zeta1 zeta2) / (1 + eps - 2 zeta1^2).
pub fn optimal_kappa(eps: f64, zeta1: f64, zeta2: f64) -> Result<f64> {
    let den = 1.0 + eps - 2.0 * zeta1 * zeta1;
    if den <= 0.0 {
        return Err(Error::Domain(
            "optimal stiffness requires 1 + eps - 2 zeta1^2 > 0".into(),
        ));
    }
    Ok((eps + 2.0 * zeta1 * zeta2) / den)
}

/// Absorber damping solving the joint stationarity conditions of the
/// fraction, after eliminating the stiffness ratio.
pub fn optimal_zeta2(eps: f64, zeta1: f64) -> Result<f64> {
    let t = 1.0 + eps - zeta1 * zeta1;
    let den = 2.0 * t * (1.0 + eps - 4.0 * (1.0 + eps) * zeta1 * zeta1 + 4.0 * zeta1.powi(4));
    if den == 0.0 {
        return Err(Error::Domain("optimal damping denominator vanishes".into()));
    }
    let num = 2.0 * eps * eps * zeta1 * t
        + eps * (1.0 + eps - 2.0 * zeta1 * zeta1).abs() * (eps * t).sqrt();
    Ok(num / den)
}

/// Fraction of the impulse energy dissipated in a TMD of damping `zeta3`
/// and stiffness `k_tmd` on the two-mass primary.
pub fn cost_j_2dof(p: &NondimParams, zeta3: f64, k_tmd: f64) -> Result<f64> {
    let a = build_a_2dof(p, zeta3, k_tmd)?;
    let v10 = 1.0;
    let q = dissipation_weight(6, 4, 5, zeta3, v10);
    let sol = solve_lyapunov(&a, &q)?;
    Ok(v10 * v10 * sol[(3, 3)])
}

/// Settings for [`optimize_2dof`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    /// Starting point; defaults to the single-mass closed forms applied to
    /// the absorber-to-second-mass ratio, scaled back by the second-mass
    /// ratio.
    pub init: Option<(f64, f64)>,
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Multiplicative backtracking factor in (0, 1).
    pub backtrack: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            init: None,
            max_iter: 500,
            grad_tol: 1e-8,
            backtrack: 0.5,
        }
    }
}

/// Result of the two-parameter ascent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub zeta3: f64,
    pub k_tmd: f64,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
}

fn default_init(p: &NondimParams) -> Result<(f64, f64)> {
    // treat the absorber as a TMD on the second mass alone, then scale the
    // ratios from second-mass units back to first-mass units
    let eps_local = p.eps / p.mu;
    let z = optimal_zeta2(eps_local, p.zeta1)?;
    let k = optimal_kappa(eps_local, p.zeta1, z)?;
    Ok((z * p.mu, k * p.mu))
}

/// Fourth-order central difference of f at x with step h.
fn central_diff4(mut f: impl FnMut(f64) -> Option<f64>, x: f64, h: f64) -> Option<f64> {
    let fm2 = f(x - 2.0 * h)?;
    let fm1 = f(x - h)?;
    let fp1 = f(x + h)?;
    let fp2 = f(x + 2.0 * h)?;
    Some((-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h))
}

/// Maximizes the dissipated-energy fraction over (zeta3, k_tmd) by gradient
/// ascent with central-difference gradients, Barzilai-Borwein step seeding,
/// and backtracking. Steps leaving the Hurwitz region are rejected by the
/// backtracking loop. On hitting the iteration cap the best point found is
/// returned with `converged` unset.
pub fn optimize_2dof(p: &NondimParams, opts: &OptimizeOptions) -> Result<OptimizeResult> {
    let eval = |x: [f64; 2]| -> Option<f64> {
        if x[0] <= 0.0 || x[1] <= 0.0 {
            return None;
        }
        cost_j_2dof(p, x[0], x[1]).ok()
    };
    let grad = |x: [f64; 2]| -> Option<[f64; 2]> {
        let mut g = [0.0; 2];
        for i in 0..2 {
            let h = 1e-5 * x[i].abs().max(1e-2);
            let mut xi = x;
            g[i] = central_diff4(
                |v| {
                    xi[i] = v;
                    eval(xi)
                },
                x[i],
                h,
            )?;
        }
        Some(g)
    };

    let init = match opts.init {
        Some(init) => init,
        None => default_init(p)?,
    };
    let mut x = [init.0, init.1];
    let mut fx = eval(x)
        .ok_or_else(|| Error::Stability("initial design is outside the Hurwitz region".into()))?;
    let mut g = grad(x).ok_or_else(|| {
        Error::Numerical("gradient evaluation failed at the initial design".into())
    })?;
    let mut step = 1e-3;
    let mut prev: Option<([f64; 2], [f64; 2])> = None;
    let mut best = (x, fx);
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        let gnorm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        if gnorm < opts.grad_tol {
            return Ok(OptimizeResult {
                zeta3: x[0],
                k_tmd: x[1],
                cost: fx,
                iterations: iter,
                converged: true,
                gradient_norm: gnorm,
            });
        }
        // Barzilai-Borwein step seed from the previous move
        if let Some((xp, gp)) = prev {
            let sx = [x[0] - xp[0], x[1] - xp[1]];
            let sy = [g[0] - gp[0], g[1] - gp[1]];
            let num = sx[0] * sx[0] + sx[1] * sx[1];
            let den = (sx[0] * sy[0] + sx[1] * sy[1]).abs();
            if den > 0.0 && num > 0.0 {
                step = (num / den).clamp(1e-12, 1e6);
            }
        }
        let mut t = step;
        let mut accepted = false;
        for _ in 0..60 {
            let xn = [x[0] + t * g[0], x[1] + t * g[1]];
            if let Some(f_trial) = eval(xn) {
                if f_trial >= fx + 1e-4 * t * gnorm * gnorm {
                    prev = Some((x, g));
                    x = xn;
                    fx = f_trial;
                    accepted = true;
                    break;
                }
            }
            t *= opts.backtrack;
        }
        if fx > best.1 {
            best = (x, fx);
        }
        if !accepted {
            // no progress at the smallest step: the gradient estimate is at
            // its noise floor
            break;
        }
        g = match grad(x) {
            Some(g) => g,
            None => break,
        };
    }
    let (xb, fb) = best;
    let gnorm = grad(xb)
        .map(|g| (g[0] * g[0] + g[1] * g[1]).sqrt())
        .unwrap_or(f64::NAN);
    Ok(OptimizeResult {
        zeta3: xb[0],
        k_tmd: xb[1],
        cost: fb,
        iterations,
        converged: gnorm < opts.grad_tol,
        gradient_norm: gnorm,
    })
}
