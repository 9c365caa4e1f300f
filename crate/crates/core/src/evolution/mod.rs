//! Deterministic finite-N density evolution. The symmetric dynamics closes
//! linearly in first moments, so the expected occupation solves the affine
//! ODE d rho/dt = Theta(N) (A rho + b) exactly; this module integrates it,
//! solves for its fixed point, classifies the (gamma, theta) phase of the
//! hydrodynamic limit and evaluates the weak-formulation residuals.

mod weak;

pub use weak::{weak_residual, PairingPath, TimeTestFunction};

use crate::error::{Error, Result};
use crate::kernel::{continuum_rates_with, JumpKernel, ModelParams, Variant};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// The five hydrodynamic phases over (gamma, theta).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    ReactionDirichlet,
    FracReactionDiffusionDirichlet,
    FracDiffusionDirichlet,
    FracDiffusionRobin,
    FracDiffusionNeumann,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::ReactionDirichlet => "reaction-dirichlet",
            Regime::FracReactionDiffusionDirichlet => "fractional-reaction-diffusion-dirichlet",
            Regime::FracDiffusionDirichlet => "fractional-diffusion-dirichlet",
            Regime::FracDiffusionRobin => "fractional-diffusion-robin",
            Regime::FracDiffusionNeumann => "fractional-diffusion-neumann",
        };
        f.write_str(s)
    }
}

/// Phase of the full model at (gamma, theta). The critical lines theta = 0
/// and theta = gamma - 1 are classified by exact equality.
pub fn classify_regime(gamma: f64, theta: f64) -> Result<Regime> {
    if !(gamma > 0.0 && gamma < 2.0) || gamma == 1.0 {
        return Err(Error::InvalidParameter(format!(
            "gamma must lie in (0,2) with gamma != 1, got {gamma}"
        )));
    }
    Ok(if theta < 0.0 {
        Regime::ReactionDirichlet
    } else if theta == 0.0 {
        Regime::FracReactionDiffusionDirichlet
    } else if gamma > 1.0 && theta < gamma - 1.0 {
        Regime::FracDiffusionDirichlet
    } else if gamma > 1.0 && theta == gamma - 1.0 {
        Regime::FracDiffusionRobin
    } else {
        Regime::FracDiffusionNeumann
    })
}

/// Deterministic density on the bulk sites 1..=N-1.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    n: usize,
    values: Vec<f64>,
}

impl DensityProfile {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n - 1 {
            return Err(Error::InvalidParameter(format!(
                "profile length {} does not match N = {n}",
                values.len()
            )));
        }
        if let Some(&v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::ProfileOutOfRange(v));
        }
        Ok(DensityProfile { n, values })
    }

    pub(crate) fn from_unchecked(n: usize, values: Vec<f64>) -> Self {
        DensityProfile { n, values }
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::new(n, vec![c; n - 1])
    }

    pub fn from_fn<F: Fn(f64) -> f64>(n: usize, g: F) -> Result<Self> {
        Self::new(n, (1..n).map(|x| g(x as f64 / n as f64)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Density at site x (1-indexed).
    pub fn value(&self, x: usize) -> f64 {
        self.values[x - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Piecewise-linear interpolant through (x/N, rho(x)), extended linearly
    /// onto the end strips [0, 1/N] and [1 - 1/N, 1] and used for boundary
    /// traces as the finite-N surrogate of the continuum values.
    pub fn interpolate(&self, u: f64) -> f64 {
        let n = self.n as f64;
        let m = self.values.len();
        let pos = u * n - 1.0; // index coordinate: site x at pos = x-1
        if pos <= 0.0 {
            // linear extrapolation from the two leftmost sites
            if m == 1 {
                return self.values[0];
            }
            return self.values[0] + pos * (self.values[1] - self.values[0]);
        }
        if pos >= (m - 1) as f64 {
            if m == 1 {
                return self.values[0];
            }
            let d = pos - (m - 1) as f64;
            return self.values[m - 1] + d * (self.values[m - 1] - self.values[m - 2]);
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Trace estimate at u = 0 (two-point linear extrapolation).
    pub fn trace_left(&self) -> f64 {
        self.interpolate(0.0)
    }

    /// Trace estimate at u = 1.
    pub fn trace_right(&self) -> f64 {
        self.interpolate(1.0)
    }
}

/// Profiles sampled at increasing macroscopic times.
#[derive(Debug, Clone)]
pub struct DensityTrajectory {
    pub times: Vec<f64>,
    pub profiles: Vec<DensityProfile>,
    pub n: usize,
}

impl DensityTrajectory {
    pub fn index_of_time(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or_else(|| Error::Numerical(format!("time {t} is not on the sample grid")))
    }
}

/// The affine generator of the mean-occupation ODE in process time units:
/// d rho / d(process t) = A rho + b. The macroscopic equation carries the
/// extra factor Theta(N).
pub struct MeanFlowSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub n: usize,
}

pub fn assemble_system(params: &ModelParams, kernel: &JumpKernel) -> Result<MeanFlowSystem> {
    let n = params.n;
    if kernel.n() != n {
        return Err(Error::InvalidParameter("kernel size does not match params".into()));
    }
    let m = n - 1;
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut b = DVector::<f64>::zeros(m);
    let pre = params.reservoir_prefactor();

    match params.variant {
        Variant::Full | Variant::OneSite => {
            for x in 1..n {
                let mut diag = 0.0;
                for y in 1..n {
                    if y != x {
                        let p = kernel.jump_prob(y as i64 - x as i64);
                        a[(x - 1, y - 1)] = p;
                        diag += p;
                    }
                }
                a[(x - 1, x - 1)] = -diag;
            }
        }
        Variant::DiffusiveBulk => {
            for x in 1..n {
                let mut diag = 0.0;
                if x >= 2 {
                    a[(x - 1, x - 2)] = 1.0;
                    diag += 1.0;
                }
                if x + 1 <= n - 1 {
                    a[(x - 1, x)] = 1.0;
                    diag += 1.0;
                }
                a[(x - 1, x - 1)] = -diag;
            }
        }
    }

    match params.variant {
        Variant::Full | Variant::DiffusiveBulk => {
            for x in 1..n {
                let rm = kernel.reservoir_tail_left(x)?;
                let rp = kernel.reservoir_tail_right(x)?;
                a[(x - 1, x - 1)] -= pre * (rm + rp);
                b[x - 1] = pre * (params.alpha * rm + params.beta * rp);
            }
        }
        Variant::OneSite => {
            a[(0, 0)] -= pre;
            b[0] += pre * params.alpha;
            a[(m - 1, m - 1)] -= pre;
            b[m - 1] += pre * params.beta;
        }
    }
    Ok(MeanFlowSystem { a, b, n })
}

/// Exact time derivative of the expected occupation, in macroscopic time:
/// Theta(N) [ sum_y p(y-x)(rho(y)-rho(x))
///            + kappa N^-theta (r^-_N (alpha-rho(x)) + r^+_N (beta-rho(x))) ].
pub fn drift(rho: &DensityProfile, params: &ModelParams, kernel: &JumpKernel) -> Result<Vec<f64>> {
    if rho.n() != params.n {
        return Err(Error::InvalidParameter("profile size does not match params".into()));
    }
    let sys = assemble_system(params, kernel)?;
    let v = DVector::from_column_slice(rho.values());
    let d = &sys.a * v + &sys.b;
    let theta_n = params.time_scale();
    Ok(d.iter().map(|x| theta_n * x).collect())
}

/// Adaptive step control for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    /// Local error target per step (maximum norm).
    pub tol: f64,
    pub h_min: f64,
    pub max_steps: u64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { tol: 1e-8, h_min: 1e-14, max_steps: 20_000_000 }
    }
}

/// Integrate the mean-occupation ODE with the implicit trapezoidal rule and
/// step-doubling error control; the system is linear and possibly stiff, so
/// each step solves dense LU systems that are cached while the step size
/// stays fixed. Requested sample times are filled by cubic Hermite
/// interpolation between accepted steps.
pub fn integrate(
    rho0: &DensityProfile,
    params: &ModelParams,
    kernel: &JumpKernel,
    t_max: f64,
    sample_times: &[f64],
    ctrl: &StepControl,
) -> Result<DensityTrajectory> {
    if t_max < 0.0 {
        return Err(Error::InvalidParameter("horizon T must be nonnegative".into()));
    }
    if sample_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("sample times must be strictly increasing".into()));
    }
    if sample_times.iter().any(|&s| s < 0.0 || s > t_max + 1e-12) {
        return Err(Error::InvalidParameter("sample times must lie within [0, T]".into()));
    }
    let theta_n = params.time_scale();
    let sys = assemble_system(params, kernel)?;
    let m = sys.n - 1;
    let gen = sys.a.clone() * theta_n;
    let forcing = sys.b.clone() * theta_n;

    let mut outputs: Vec<DensityProfile> = Vec::with_capacity(sample_times.len());
    let mut pending = sample_times.iter().copied().peekable();

    let mut y = DVector::from_column_slice(rho0.values());
    let mut t = 0.0;
    while let Some(&s) = pending.peek() {
        if s <= 0.0 {
            outputs.push(DensityProfile::from_unchecked(sys.n, y.as_slice().to_vec()));
            pending.next();
        } else {
            break;
        }
    }
    if t_max == 0.0 || pending.peek().is_none() {
        return Ok(DensityTrajectory {
            times: sample_times[..outputs.len()].to_vec(),
            profiles: outputs,
            n: sys.n,
        });
    }

    let norm = gen.abs().row_sum().max() + 1e-300;
    let mut h = (t_max / 16.0).min(0.1 / norm).max(ctrl.h_min);
    let mut factors: Option<(f64, nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
                              nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>)> = None;

    let eye = DMatrix::<f64>::identity(m, m);
    let mut f_prev = &gen * &y + &forcing;
    let mut steps: u64 = 0;

    while t < t_max {
        let h_try = h.min(t_max - t);
        if factors.as_ref().map(|(hh, _, _)| (*hh - h_try).abs() > 1e-15 * h_try).unwrap_or(true) {
            let lu_full = nalgebra::linalg::LU::new(&eye - &gen * (0.5 * h_try));
            let lu_half = nalgebra::linalg::LU::new(&eye - &gen * (0.25 * h_try));
            factors = Some((h_try, lu_full, lu_half));
        }
        let (_, lu_full, lu_half) = factors.as_ref().unwrap();

        let trap = |lu: &nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
                    y0: &DVector<f64>,
                    hh: f64|
         -> Result<DVector<f64>> {
            let rhs = y0 + (&gen * y0 + &forcing) * (0.5 * hh) + &forcing * (0.5 * hh);
            lu.solve(&rhs).ok_or_else(|| Error::SolveFailed("singular trapezoidal step".into()))
        };

        let y_full = trap(lu_full, &y, h_try)?;
        let y_mid = trap(lu_half, &y, 0.5 * h_try)?;
        let y_half = trap(lu_half, &y_mid, 0.5 * h_try)?;
        let err = (&y_full - &y_half).amax() / 3.0;

        steps += 1;
        if steps > ctrl.max_steps {
            return Err(Error::Numerical("step budget exhausted".into()));
        }

        if err <= ctrl.tol || h_try <= ctrl.h_min {
            let t_new = t + h_try;
            let f_new = &gen * &y_half + &forcing;
            // emit pending samples inside (t, t_new] via cubic Hermite
            while let Some(&s) = pending.peek() {
                if s > t_new + 1e-15 {
                    break;
                }
                let th = ((s - t) / h_try).clamp(0.0, 1.0);
                let h00 = (1.0 + 2.0 * th) * (1.0 - th) * (1.0 - th);
                let h10 = th * (1.0 - th) * (1.0 - th);
                let h01 = th * th * (3.0 - 2.0 * th);
                let h11 = th * th * (th - 1.0);
                let interp = &y * h00 + &f_prev * (h10 * h_try) + &y_half * h01
                    + &f_new * (h11 * h_try);
                outputs.push(DensityProfile::from_unchecked(sys.n, interp.as_slice().to_vec()));
                pending.next();
            }
            t = t_new;
            y = y_half;
            f_prev = f_new;
        }

        let scale = if err > 0.0 { 0.9 * (ctrl.tol / err).powf(1.0 / 3.0) } else { 5.0 };
        h = (h_try * scale.clamp(0.2, 5.0)).max(ctrl.h_min);
    }

    // anything left pins to the final state
    while pending.next().is_some() {
        outputs.push(DensityProfile::from_unchecked(sys.n, y.as_slice().to_vec()));
    }
    Ok(DensityTrajectory { times: sample_times.to_vec(), profiles: outputs, n: sys.n })
}

/// Fixed-step classical RK4 on the same affine system; explicit companion
/// to [`integrate`] for cross-checks at small N. The macroscopic step must
/// resolve the fastest mode (h below ~2.8 / (Theta(N) ||A||) for stability),
/// so this path is only sensible away from the stiff regime.
pub fn integrate_explicit_rk4(
    rho0: &DensityProfile,
    params: &ModelParams,
    kernel: &JumpKernel,
    t_max: f64,
    sample_times: &[f64],
    h: f64,
) -> Result<DensityTrajectory> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter("step must be positive".into()));
    }
    let theta_n = params.time_scale();
    let sys = assemble_system(params, kernel)?;
    let gen = sys.a.clone() * theta_n;
    let forcing = sys.b.clone() * theta_n;
    let rhs = |y: &DVector<f64>| &gen * y + &forcing;

    let mut y = DVector::from_column_slice(rho0.values());
    let mut t = 0.0;
    let mut outputs = Vec::with_capacity(sample_times.len());
    let mut pending = sample_times.iter().copied().peekable();
    while let Some(&s) = pending.peek() {
        if s > t_max + 1e-12 {
            return Err(Error::InvalidParameter("sample times must lie within [0, T]".into()));
        }
        // step to the sample time exactly
        while t < s - 1e-15 {
            let step = h.min(s - t);
            let k1 = rhs(&y);
            let k2 = rhs(&(&y + &k1 * (0.5 * step)));
            let k3 = rhs(&(&y + &k2 * (0.5 * step)));
            let k4 = rhs(&(&y + &k3 * step));
            y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step / 6.0);
            t += step;
        }
        outputs.push(DensityProfile::from_unchecked(sys.n, y.as_slice().to_vec()));
        pending.next();
    }
    Ok(DensityTrajectory { times: sample_times.to_vec(), profiles: outputs, n: sys.n })
}

/// A-posteriori integrability functional of the Dirichlet-type weak
/// formulations for gamma in (1,2):
/// int_0^T int_0^1 { (alpha-rho)^2 / u^gamma + (beta-rho)^2 / (1-u)^gamma },
/// reported (not enforced) on lattice trajectories via Riemann and
/// trapezoid sums.
pub fn dirichlet_integrability(
    traj: &DensityTrajectory,
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> f64 {
    let n = traj.n as f64;
    let space: Vec<f64> = traj
        .profiles
        .iter()
        .map(|p| {
            let mut s = 0.0;
            for x in 1..traj.n {
                let u = x as f64 / n;
                let da = alpha - p.value(x);
                let db = beta - p.value(x);
                s += da * da * u.powf(-gamma) + db * db * (1.0 - u).powf(-gamma);
            }
            s / (n - 1.0)
        })
        .collect();
    crate::quad::trapezoid(&traj.times, &space)
}

/// Stationary profile: the unique solution of A rho = -b. The reservoir
/// terms add strictly positive mass to every diagonal of the full model, so
/// the system is strictly row diagonally dominant; one step of iterative
/// refinement polishes the LU solution.
pub fn stationary_profile(params: &ModelParams, kernel: &JumpKernel) -> Result<DensityProfile> {
    let sys = assemble_system(params, kernel)?;
    let rhs = -&sys.b;
    let lu = nalgebra::linalg::LU::new(sys.a.clone());
    let mut rho = lu
        .solve(&rhs)
        .ok_or_else(|| Error::SolveFailed("stationary system is singular".into()))?;
    let resid = &rhs - &sys.a * &rho;
    if let Some(corr) = lu.solve(&resid) {
        rho += corr;
    }
    Ok(DensityProfile::from_unchecked(sys.n, rho.as_slice().to_vec()))
}

/// Explicit solution of the pure reaction evolution
/// d rho/dt = -kappa_hat V1 rho + kappa_hat V0 at a fixed interior point:
/// rho_t(u) = V0/V1 + (g(u) - V0/V1) exp(-t kappa_hat V1(u)).
pub fn reaction_solution<F>(
    g: &F,
    u: f64,
    t: f64,
    kappa_hat: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> Result<f64>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    let c = crate::kernel::normalization_constant(gamma)?;
    let rates = continuum_rates_with(c, u, alpha, beta, gamma)?;
    let q = rates.v0 / rates.v1;
    Ok(q + (g(u) - q) * (-t * kappa_hat * rates.v1).exp())
}

/// Reaction solution sampled on the lattice at the given times.
pub fn reaction_trajectory<F>(
    g: &F,
    n: usize,
    times: &[f64],
    kappa_hat: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> Result<DensityTrajectory>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    let mut profiles = Vec::with_capacity(times.len());
    for &t in times {
        let mut values = Vec::with_capacity(n - 1);
        for x in 1..n {
            values.push(reaction_solution(g, x as f64 / n as f64, t, kappa_hat, alpha, beta, gamma)?);
        }
        profiles.push(DensityProfile::from_unchecked(n, values));
    }
    Ok(DensityTrajectory { times: times.to_vec(), profiles, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ModelParams;
    use approx::assert_abs_diff_eq;

    fn params(n: usize, gamma: f64, theta: f64) -> ModelParams {
        ModelParams::new(n, gamma, theta, 1.0, 0.2, 0.8, Variant::Full).unwrap()
    }

    #[test]
    fn regime_classification_cases() {
        use Regime::*;
        assert_eq!(classify_regime(1.5, 0.2).unwrap(), FracDiffusionDirichlet);
        assert_eq!(classify_regime(0.5, -1.0).unwrap(), ReactionDirichlet);
        assert_eq!(classify_regime(1.5, 0.5).unwrap(), FracDiffusionRobin);
        assert_eq!(classify_regime(1.5, 0.0).unwrap(), FracReactionDiffusionDirichlet);
        assert_eq!(classify_regime(0.5, 0.0).unwrap(), FracReactionDiffusionDirichlet);
        assert_eq!(classify_regime(0.5, 0.7).unwrap(), FracDiffusionNeumann);
        assert_eq!(classify_regime(1.5, 0.7).unwrap(), FracDiffusionNeumann);
        assert_eq!(classify_regime(1.9, -3.0).unwrap(), ReactionDirichlet);
        assert!(classify_regime(1.0, 0.3).is_err());
        assert!(classify_regime(2.0, 0.3).is_err());
        assert!(classify_regime(0.0, 0.3).is_err());
    }

    #[test]
    fn drift_vanishes_at_flat_equilibrium() {
        let rho = 0.37;
        let p = ModelParams::new(16, 1.5, 0.0, 1.0, rho, rho, Variant::Full).unwrap();
        let kernel = JumpKernel::build(16, 1.5).unwrap();
        let profile = DensityProfile::constant(16, rho).unwrap();
        for d in drift(&profile, &p, &kernel).unwrap() {
            assert_abs_diff_eq!(d, 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn drift_hand_enumeration_n3() {
        let p = params(3, 1.5, 0.0);
        let kernel = JumpKernel::build(3, 1.5).unwrap();
        let profile = DensityProfile::new(3, vec![1.0, 0.0]).unwrap();
        let d = drift(&profile, &p, &kernel).unwrap();
        let theta_n = 3f64.powf(1.5);
        let p1 = kernel.jump_prob(1);
        let rm1 = kernel.reservoir_tail_left(1).unwrap();
        let rm2 = kernel.reservoir_tail_left(2).unwrap();
        // site 1: p(1)(rho2 - rho1) + (r^-(1/3)(a - 1) + r^+(1/3)(b - 1))
        let d1 = theta_n * (p1 * (0.0 - 1.0) + rm1 * (0.2 - 1.0) + rm2 * (0.8 - 1.0));
        let d2 = theta_n * (p1 * (1.0 - 0.0) + rm2 * 0.2 + rm1 * 0.8);
        assert_abs_diff_eq!(d[0], d1, epsilon = 1e-10);
        assert_abs_diff_eq!(d[1], d2, epsilon = 1e-10);
    }

    #[test]
    fn drift_reflection_symmetry() {
        let kernel = JumpKernel::build(12, 0.5).unwrap();
        let p_ab = ModelParams::new(12, 0.5, 0.3, 1.0, 0.2, 0.8, Variant::Full).unwrap();
        let p_ba = ModelParams::new(12, 0.5, 0.3, 1.0, 0.8, 0.2, Variant::Full).unwrap();
        let vals: Vec<f64> = (1..12).map(|x| 0.5 + 0.4 * (x as f64 / 12.0 - 0.3)).collect();
        let mut rev = vals.clone();
        rev.reverse();
        let d1 = drift(&DensityProfile::new(12, vals).unwrap(), &p_ab, &kernel).unwrap();
        let mut d2 = drift(&DensityProfile::new(12, rev).unwrap(), &p_ba, &kernel).unwrap();
        d2.reverse();
        for (a, b) in d1.iter().zip(&d2) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn integrate_horizon_zero() {
        let p = params(8, 0.5, 0.0);
        let kernel = JumpKernel::build(8, 0.5).unwrap();
        let rho0 = DensityProfile::from_fn(8, |u| 0.3 + 0.4 * u).unwrap();
        let traj = integrate(&rho0, &p, &kernel, 0.0, &[0.0], &StepControl::default()).unwrap();
        assert_eq!(traj.profiles.len(), 1);
        for (a, b) in traj.profiles[0].values().iter().zip(rho0.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn integrate_matches_eigendecomposition_oracle() {
        // the generator is symmetric, so rho(t) = rho_ss + Q exp(L t) Q^T
        // (rho0 - rho_ss) is computable by a dense symmetric eigensolve
        let n = 32;
        let p = params(n, 1.5, 0.0);
        let kernel = JumpKernel::build(n, 1.5).unwrap();
        let rho0 = DensityProfile::from_fn(n, |u| 0.5 + 0.3 * (2.0 * std::f64::consts::PI * u).sin())
            .unwrap();
        let t_max = 0.05;
        let times = [0.01, 0.03, 0.05];
        let ctrl = StepControl { tol: 1e-11, ..StepControl::default() };
        let traj = integrate(&rho0, &p, &kernel, t_max, &times, &ctrl).unwrap();

        let sys = assemble_system(&p, &kernel).unwrap();
        let theta_n = p.time_scale();
        let m = sys.a.clone() * theta_n;
        let c = sys.b.clone() * theta_n;
        let lu = nalgebra::linalg::LU::new(m.clone());
        let rho_ss = lu.solve(&(-&c)).unwrap();
        let eig = nalgebra::SymmetricEigen::new(m);
        let q = eig.eigenvectors;
        let lam = eig.eigenvalues;
        let y0 = DVector::from_column_slice(rho0.values()) - &rho_ss;
        let z0 = q.transpose() * y0;
        for (i, &t) in times.iter().enumerate() {
            let zt = DVector::from_iterator(
                n - 1,
                z0.iter().zip(lam.iter()).map(|(z, l)| z * (l * t).exp()),
            );
            let oracle = &q * zt + &rho_ss;
            for x in 1..n {
                assert_abs_diff_eq!(
                    traj.profiles[i].value(x),
                    oracle[x - 1],
                    epsilon = 1e-7
                );
            }
        }
    }

    #[test]
    fn explicit_rk4_cross_checks_trapezoidal() {
        let n = 16;
        let p = params(n, 0.5, 0.5);
        let kernel = JumpKernel::build(n, 0.5).unwrap();
        let rho0 = DensityProfile::from_fn(n, |u| 0.2 + 0.5 * u).unwrap();
        let times = [0.05, 0.1];
        let a = integrate(&rho0, &p, &kernel, 0.1, &times, &StepControl::default()).unwrap();
        let theta_n = p.time_scale();
        let b = integrate_explicit_rk4(&rho0, &p, &kernel, 0.1, &times, 0.01 / theta_n).unwrap();
        for i in 0..2 {
            for x in 1..n {
                assert_abs_diff_eq!(
                    a.profiles[i].value(x),
                    b.profiles[i].value(x),
                    epsilon = 1e-7
                );
            }
        }
    }

    #[test]
    fn integrability_functional_is_finite_and_reported() {
        let n = 64;
        let p = params(n, 1.5, 0.2);
        let kernel = JumpKernel::build(n, 1.5).unwrap();
        let rho0 = DensityProfile::constant(n, 0.5).unwrap();
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.01).collect();
        let traj = integrate(&rho0, &p, &kernel, 0.1, &times, &StepControl::default()).unwrap();
        let v = dirichlet_integrability(&traj, p.alpha, p.beta, 1.5);
        assert!(v.is_finite() && v > 0.0, "integrability functional {v}");
    }

    #[test]
    fn lattice_ode_approaches_reaction_solution_as_n_grows() {
        // theta < 0: the bulk term is subdominant by N^theta, so the gap to
        // the explicit reaction solution at fixed t shrinks with N
        let (gamma, theta, t) = (0.5, -1.0, 0.5);
        let g = |_: f64| 0.9;
        let mut prev = f64::INFINITY;
        for n in [64usize, 128, 256] {
            let p = params(n, gamma, theta);
            let kernel = JumpKernel::build(n, gamma).unwrap();
            let rho0 = DensityProfile::from_fn(n, g).unwrap();
            let traj = integrate(&rho0, &p, &kernel, t, &[t], &StepControl::default()).unwrap();
            let mut sup: f64 = 0.0;
            for x in 1..n {
                let u = x as f64 / n as f64;
                if !(0.1..=0.9).contains(&u) {
                    continue;
                }
                let exact = reaction_solution(&g, u, t, p.kappa, p.alpha, p.beta, gamma).unwrap();
                sup = sup.max((traj.profiles[0].value(x) - exact).abs());
            }
            assert!(sup < prev, "N={n}: sup gap {sup} did not shrink (prev {prev})");
            prev = sup;
        }
    }

    #[test]
    fn stationary_flat_when_reservoir_densities_match() {
        let p = ModelParams::new(64, 1.5, 0.3, 2.0, 0.4, 0.4, Variant::Full).unwrap();
        let kernel = JumpKernel::build(64, 1.5).unwrap();
        let rho = stationary_profile(&p, &kernel).unwrap();
        for x in 1..64 {
            assert_abs_diff_eq!(rho.value(x), 0.4, epsilon = 1e-12);
        }
    }

    #[test]
    fn stationary_profile_is_fixed_point_and_bounded() {
        for (gamma, theta) in [(0.5, -1.0), (1.5, 0.2), (0.5, 2.0)] {
            let p = params(128, gamma, theta);
            let kernel = JumpKernel::build(128, gamma).unwrap();
            let rho = stationary_profile(&p, &kernel).unwrap();
            let d = drift(&rho, &p, &kernel).unwrap();
            let sup = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(sup < 1e-10, "({gamma},{theta}): residual {sup}");
            for x in 1..128 {
                let v = rho.value(x);
                assert!((0.2..=0.8).contains(&v), "value {v} escapes [alpha, beta]");
            }
        }
    }

    #[test]
    fn stationary_approaches_reaction_quotient_for_strong_reservoirs() {
        let mut prev = f64::INFINITY;
        for n in [128usize, 256, 512] {
            let p = params(n, 0.5, -1.0);
            let kernel = JumpKernel::build(n, 0.5).unwrap();
            let rho = stationary_profile(&p, &kernel).unwrap();
            let mut sup: f64 = 0.0;
            for x in 1..n {
                let u = x as f64 / n as f64;
                if !(0.1..=0.9).contains(&u) {
                    continue;
                }
                let r = kernel.continuum_rates(u, p.alpha, p.beta).unwrap();
                sup = sup.max((rho.value(x) - r.v0 / r.v1).abs());
            }
            assert!(sup < prev, "N={n}: {sup} !< {prev}");
            prev = sup;
        }
    }

    #[test]
    fn reaction_solution_identities_and_rk_oracle() {
        let g = |_: f64| 0.5;
        let (kh, a, b, gamma) = (1.0, 0.2, 0.8, 0.5);
        // t = 0 returns g
        assert_abs_diff_eq!(
            reaction_solution(&g, 0.3, 0.0, kh, a, b, gamma).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        // long-time limit is V0/V1
        let r = crate::kernel::continuum_rates(0.3, a, b, gamma).unwrap();
        assert_abs_diff_eq!(
            reaction_solution(&g, 0.3, 200.0, kh, a, b, gamma).unwrap(),
            r.v0 / r.v1,
            epsilon = 1e-12
        );
        // scalar RK4 oracle for d rho/dt = -kh V1 rho + kh V0 at u = 0.3
        let mut y = 0.5;
        let t_end = 1.0;
        let steps = 4000;
        let h = t_end / steps as f64;
        let f = |y: f64| -kh * r.v1 * y + kh * r.v0;
        for _ in 0..steps {
            let k1 = f(y);
            let k2 = f(y + 0.5 * h * k1);
            let k3 = f(y + 0.5 * h * k2);
            let k4 = f(y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert_abs_diff_eq!(
            reaction_solution(&g, 0.3, t_end, kh, a, b, gamma).unwrap(),
            y,
            epsilon = 1e-9
        );
        assert!(reaction_solution(&g, 0.0, 1.0, kh, a, b, gamma).is_err());
    }

    #[test]
    fn comparison_principle_and_boundedness() {
        // off-diagonal coefficients are nonnegative, so the flow preserves
        // componentwise order and the unit box
        use rand::Rng;
        use rand::SeedableRng;
        let n = 16;
        let p = params(n, 1.5, 0.0);
        let kernel = JumpKernel::build(n, 1.5).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(31);
        for _ in 0..8 {
            let lo: Vec<f64> = (1..n).map(|_| rng.gen::<f64>() * 0.5).collect();
            let hi: Vec<f64> = lo.iter().map(|v| v + rng.gen::<f64>() * (1.0 - v)).collect();
            let tlo = integrate(
                &DensityProfile::new(n, lo).unwrap(),
                &p,
                &kernel,
                0.02,
                &[0.01, 0.02],
                &StepControl::default(),
            )
            .unwrap();
            let thi = integrate(
                &DensityProfile::new(n, hi).unwrap(),
                &p,
                &kernel,
                0.02,
                &[0.01, 0.02],
                &StepControl::default(),
            )
            .unwrap();
            for i in 0..2 {
                for x in 1..n {
                    let a = tlo.profiles[i].value(x);
                    let b = thi.profiles[i].value(x);
                    assert!(a <= b + 1e-9, "ordering violated at x={x}: {a} > {b}");
                    assert!((-1e-9..=1.0 + 1e-9).contains(&a));
                    assert!((-1e-9..=1.0 + 1e-9).contains(&b));
                }
            }
        }
    }

    #[test]
    fn interpolation_and_traces() {
        let rho = DensityProfile::new(10, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
            .unwrap();
        assert_abs_diff_eq!(rho.interpolate(0.35), 0.35, epsilon = 1e-12);
        // linear data extrapolates exactly
        assert_abs_diff_eq!(rho.trace_left(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.trace_right(), 1.0, epsilon = 1e-12);
    }
}
