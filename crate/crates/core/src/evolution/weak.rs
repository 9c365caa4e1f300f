//! Weak-formulation residuals of the five hydrodynamic equations. Each
//! functional tests a density trajectory against a space-time test function;
//! a weak solution makes every admissible residual vanish, so the computed
//! magnitude |F| measures how far a trajectory is from solving its equation.
//!
//! Spatial pairings <rho_s, h> of lattice profiles against continuum
//! weights come in two flavours: the plain lattice Riemann sum
//! (N-1)^-1 sum_x rho(x) h(x/N) matching the microscopic pairing, and a
//! cellwise-Simpson quadrature of the linear interpolant with exact weight
//! evaluations at cell midpoints. Time integrals use composite Simpson on
//! the trajectory grid (trapezoid when the grid is not uniform).

use super::{DensityTrajectory, Regime};
use crate::error::{Error, Result};
use crate::kernel::{continuum_rates_with, riemann_zeta};
use crate::operators::{FracOps, SmoothFunction};
use crate::quad::{simpson_uniform, trapezoid};
use std::sync::Arc;

/// How lattice profiles are paired against continuum weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairingPath {
    /// (N-1)^-1 sum_x rho(x) h(x/N); matches the generator pairing.
    LatticeRiemann,
    /// Cellwise Simpson on the linear interpolant with exact midpoint
    /// weights and linearly extrapolated end strips.
    InterpolatedQuadrature,
}

type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Separable space-time test function G(t, u) = phi(t) psi(u), with an
/// optional compact support interval for psi.
#[derive(Clone)]
pub struct TimeTestFunction {
    psi: SmoothFunction,
    phi: TimeFn,
    dphi: TimeFn,
    support: Option<(f64, f64)>,
}

impl TimeTestFunction {
    pub fn separable<P, D>(phi: P, dphi: D, psi: SmoothFunction) -> Self
    where
        P: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        TimeTestFunction { psi, phi: Arc::new(phi), dphi: Arc::new(dphi), support: None }
    }

    pub fn time_independent(psi: SmoothFunction) -> Self {
        TimeTestFunction {
            psi,
            phi: Arc::new(|_| 1.0),
            dphi: Arc::new(|_| 0.0),
            support: None,
        }
    }

    /// Declare that psi is compactly supported inside (a, b).
    pub fn with_support(mut self, a: f64, b: f64) -> Self {
        self.support = Some((a, b));
        self
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        self.support
    }

    pub fn eval(&self, t: f64, u: f64) -> f64 {
        (self.phi)(t) * self.psi.eval(u)
    }

    pub fn spatial(&self) -> &SmoothFunction {
        &self.psi
    }
}

/// Spatial weight sampled on the lattice (and cell midpoints for the
/// quadrature path).
struct Weight {
    nodes: Vec<f64>,
    mids: Vec<f64>,
}

impl Weight {
    fn sample<H: Fn(f64) -> f64>(n: usize, path: PairingPath, h: H) -> Self {
        let nodes: Vec<f64> = (1..n).map(|x| h(x as f64 / n as f64)).collect();
        let mids = match path {
            PairingPath::LatticeRiemann => Vec::new(),
            PairingPath::InterpolatedQuadrature => {
                (1..n - 1).map(|x| h((x as f64 + 0.5) / n as f64)).collect()
            }
        };
        Weight { nodes, mids }
    }

    /// <rho, h> for lattice values rho.
    fn pair(&self, rho: &[f64], n: usize, path: PairingPath) -> f64 {
        match path {
            PairingPath::LatticeRiemann => {
                let s: f64 = rho.iter().zip(&self.nodes).map(|(r, h)| r * h).sum();
                s / (n - 1) as f64
            }
            PairingPath::InterpolatedQuadrature => {
                let hcell = 1.0 / n as f64;
                let m = rho.len();
                let mut total = 0.0;
                for x in 0..m - 1 {
                    let w0 = rho[x] * self.nodes[x];
                    let w1 = rho[x + 1] * self.nodes[x + 1];
                    let rho_mid = 0.5 * (rho[x] + rho[x + 1]);
                    total += hcell / 6.0 * (w0 + 4.0 * rho_mid * self.mids[x] + w1);
                }
                // end strips by linear extrapolation of the nodal integrand
                let w1 = rho[0] * self.nodes[0];
                let w2 = rho[1.min(m - 1)] * self.nodes[1.min(m - 1)];
                total += hcell * 0.5 * ((2.0 * w1 - w2) + w1);
                let wm = rho[m - 1] * self.nodes[m - 1];
                let wp = rho[m - 2.min(m - 1)] * self.nodes[m - 2.min(m - 1)];
                total += hcell * 0.5 * (wm + (2.0 * wm - wp));
                total
            }
        }
    }
}

fn time_integral(times: &[f64], values: &[f64]) -> f64 {
    if times.len() < 2 {
        return 0.0;
    }
    let h = times[1] - times[0];
    let uniform = times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1e-12));
    if uniform {
        simpson_uniform(values, h)
    } else {
        trapezoid(times, values)
    }
}

/// Evaluate |F(t, rho, G, g)| for the functional attached to `regime`.
///
/// The trajectory must be sampled from time 0 up to at least t, with t on
/// its grid. Dirichlet-type regimes (reaction, fractional reaction-diffusion
/// and fractional diffusion with Dirichlet data) require a test function
/// compactly supported inside (0,1).
#[allow(clippy::too_many_arguments)]
pub fn weak_residual<F>(
    regime: Regime,
    traj: &DensityTrajectory,
    test: &TimeTestFunction,
    g: &F,
    t: f64,
    kappa_hat: f64,
    alpha: f64,
    beta: f64,
    ops: &FracOps,
    path: PairingPath,
) -> Result<f64>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    let needs_support = matches!(
        regime,
        Regime::ReactionDirichlet
            | Regime::FracReactionDiffusionDirichlet
            | Regime::FracDiffusionDirichlet
    );
    if needs_support {
        match test.support() {
            Some((a, b)) if a > 0.0 && b < 1.0 && a < b => {}
            _ => {
                return Err(Error::InadmissibleTestFunction(format!(
                    "{regime} requires compact support strictly inside (0,1)"
                )))
            }
        }
    }
    if traj.times.is_empty() || traj.times[0].abs() > 1e-12 {
        return Err(Error::Numerical("trajectory must start at time 0".into()));
    }
    let it = traj.index_of_time(t)?;
    let n = traj.n;
    let gamma = ops.gamma();
    let c_gamma = ops.c_gamma();

    let psi = test.spatial();
    let psi_w = Weight::sample(n, path, |u| psi.eval(u));
    let needs_laplacian = matches!(
        regime,
        Regime::FracDiffusionNeumann
            | Regime::FracDiffusionDirichlet
            | Regime::FracDiffusionRobin
            | Regime::FracReactionDiffusionDirichlet
    );
    let lpsi_w = if needs_laplacian {
        Some(Weight::sample(n, path, |u| ops.regional_laplacian(psi, u).unwrap_or(f64::NAN)))
    } else {
        None
    };
    let v1psi_w = if matches!(
        regime,
        Regime::FracReactionDiffusionDirichlet | Regime::ReactionDirichlet
    ) {
        Some(Weight::sample(n, path, |u| {
            let r = continuum_rates_with(c_gamma, u, alpha, beta, gamma).unwrap();
            r.v1 * psi.eval(u)
        }))
    } else {
        None
    };
    let v0_source: Option<f64> = if matches!(
        regime,
        Regime::FracReactionDiffusionDirichlet | Regime::ReactionDirichlet
    ) {
        // <G_s, V0> is rho-independent: pair V0 psi against the unit profile
        let w = Weight::sample(n, path, |u| {
            let r = continuum_rates_with(c_gamma, u, alpha, beta, gamma).unwrap();
            r.v0 * psi.eval(u)
        });
        Some(w.pair(&vec![1.0; n - 1], n, path))
    } else {
        None
    };
    let robin_m = if matches!(regime, Regime::FracDiffusionRobin) {
        if gamma <= 1.0 {
            return Err(Error::InvalidParameter(
                "Robin residual needs finite mean jump (gamma > 1)".into(),
            ));
        }
        Some(c_gamma * riemann_zeta(gamma))
    } else {
        None
    };

    let g_vals: Vec<f64> = (1..n).map(|x| g(x as f64 / n as f64)).collect();
    let phi = |s: f64| (test.phi)(s);
    let dphi = |s: f64| (test.dphi)(s);

    // boundary terms <rho_t, G_t> - <g, G_0>
    let head = phi(t) * psi_w.pair(traj.profiles[it].values(), n, path)
        - phi(0.0) * psi_w.pair(&g_vals, n, path);

    // time integrand w(s) with F = head + int_0^t w(s) ds
    let times = &traj.times[..=it];
    let mut w_vals = Vec::with_capacity(times.len());
    for (i, &s) in times.iter().enumerate() {
        let rho = traj.profiles[i].values();
        let pair_psi = psi_w.pair(rho, n, path);
        let mut w = -dphi(s) * pair_psi;
        match regime {
            Regime::FracDiffusionNeumann | Regime::FracDiffusionDirichlet => {
                w -= phi(s) * lpsi_w.as_ref().unwrap().pair(rho, n, path);
            }
            Regime::FracReactionDiffusionDirichlet => {
                // L_kappa G = L G - kappa V1 G, plus the source term
                w -= phi(s) * lpsi_w.as_ref().unwrap().pair(rho, n, path);
                w += kappa_hat * phi(s) * v1psi_w.as_ref().unwrap().pair(rho, n, path);
                w -= kappa_hat * phi(s) * v0_source.unwrap();
            }
            Regime::ReactionDirichlet => {
                w += kappa_hat * phi(s) * v1psi_w.as_ref().unwrap().pair(rho, n, path);
                w -= kappa_hat * phi(s) * v0_source.unwrap();
            }
            Regime::FracDiffusionRobin => {
                w -= phi(s) * lpsi_w.as_ref().unwrap().pair(rho, n, path);
                let m = robin_m.unwrap();
                let profile = &traj.profiles[i];
                let left = test.eval(s, 0.0) * (alpha - profile.trace_left());
                let right = test.eval(s, 1.0) * (beta - profile.trace_right());
                w -= kappa_hat * m * (left + right);
            }
        }
        w_vals.push(w);
    }
    let integral = time_integral(times, &w_vals);
    Ok((head + integral).abs())
}
