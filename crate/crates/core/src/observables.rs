//! Monte Carlo observables bridging the particle system and its
//! hydrodynamic description: empirical pairings, block averages,
//! boundary-gap path statistics, replica ensembles and the discrete
//! Gagliardo energy.

use crate::error::{Error, Result};
use crate::evolution::{DensityProfile, DensityTrajectory};
use crate::kernel::{normalization_constant, JumpKernel, ModelParams};
use crate::process::{replica_rng, sample_initial, simulate, Configuration, SimOptions};
use crate::quad::trapezoid;

/// Pairing of the empirical measure with a test function:
/// <pi^N, G> = (N-1)^-1 sum_x G(x/N) eta(x).
pub fn empirical_pairing<G: Fn(f64) -> f64 + ?Sized>(config: &Configuration, g: &G) -> f64 {
    let n = config.n();
    let mut s = 0.0;
    for x in 1..n {
        if config.get(x) {
            s += g(x as f64 / n as f64);
        }
    }
    s / (n - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockSide {
    /// Average over the `width` sites to the right of the anchor.
    Right,
    /// Average over the `width` sites to the left of the anchor.
    Left,
}

/// Width ceil(epsilon * N) used for boundary blocks.
pub fn block_width(epsilon: f64, n: usize) -> usize {
    (epsilon * n as f64).ceil().max(1.0) as usize
}

fn block_bounds(n: usize, anchor: usize, width: usize, side: BlockSide) -> Result<(usize, usize)> {
    if width == 0 {
        return Err(Error::InvalidParameter("block width must be >= 1".into()));
    }
    let (lo, hi) = match side {
        BlockSide::Right => (anchor as i64 + 1, anchor as i64 + width as i64),
        BlockSide::Left => (anchor as i64 - width as i64, anchor as i64 - 1),
    };
    if lo < 1 || hi > (n - 1) as i64 {
        return Err(Error::WindowOutOfRange { lo, hi, max: n - 1 });
    }
    Ok((lo as usize, hi as usize))
}

/// Empirical block average of the configuration next to `anchor`.
pub fn block_average(
    config: &Configuration,
    anchor: usize,
    width: usize,
    side: BlockSide,
) -> Result<f64> {
    let (lo, hi) = block_bounds(config.n(), anchor, width, side)?;
    let mut s = 0.0;
    for y in lo..=hi {
        if config.get(y) {
            s += 1.0;
        }
    }
    Ok(s / width as f64)
}

/// Block average of a deterministic profile, the mean-field analog of
/// [`block_average`].
pub fn block_average_profile(
    rho: &DensityProfile,
    anchor: usize,
    width: usize,
    side: BlockSide,
) -> Result<f64> {
    let (lo, hi) = block_bounds(rho.n(), anchor, width, side)?;
    let s: f64 = (lo..=hi).map(|y| rho.value(y)).sum();
    Ok(s / width as f64)
}

/// |int_0^T (target - v(s)) ds| by trapezoid on the sample grid.
pub fn path_gap_statistic(times: &[f64], values: &[f64], target: f64) -> f64 {
    let gaps: Vec<f64> = values.iter().map(|v| target - v).collect();
    trapezoid(times, &gaps).abs()
}

/// Boundary-gap statistic of a deterministic trajectory: the block average
/// of width ceil(epsilon N) read off next to the chosen boundary, integrated
/// against its reservoir target over the whole time window.
pub fn boundary_gap_deterministic(
    traj: &DensityTrajectory,
    epsilon: f64,
    side: BlockSide,
    target: f64,
) -> Result<f64> {
    let width = block_width(epsilon, traj.n);
    let anchor = match side {
        BlockSide::Right => 0,
        BlockSide::Left => traj.n,
    };
    let mut vals = Vec::with_capacity(traj.profiles.len());
    for p in &traj.profiles {
        vals.push(block_average_profile(p, anchor, width, side)?);
    }
    Ok(path_gap_statistic(&traj.times, &vals, target))
}

/// Same statistic on one sampled particle trajectory.
pub fn boundary_gap_empirical(
    times: &[f64],
    snapshots: &[Vec<u8>],
    n: usize,
    epsilon: f64,
    side: BlockSide,
    target: f64,
) -> Result<f64> {
    let width = block_width(epsilon, n);
    let anchor = match side {
        BlockSide::Right => 0,
        BlockSide::Left => n,
    };
    let mut vals = Vec::with_capacity(snapshots.len());
    for snap in snapshots {
        let config = Configuration::from_occupancies(n, snap.clone())?;
        vals.push(block_average(&config, anchor, width, side)?);
    }
    Ok(path_gap_statistic(times, &vals, target))
}

/// Occupancy samples of one replica at the common sample times.
#[derive(Debug, Clone)]
pub struct ReplicaSamples {
    pub replica: u64,
    /// snapshots[i][x-1] at sample time i
    pub snapshots: Vec<Vec<u8>>,
}

/// Ensemble of replicas sharing parameters and sample times.
#[derive(Debug, Clone)]
pub struct ReplicaEnsemble {
    pub n: usize,
    pub times: Vec<f64>,
    pub base_seed: u64,
    pub replicas: Vec<ReplicaSamples>,
}

/// Run replica `k` of an ensemble: Bernoulli(g) initial data and dynamics
/// driven by the counter-derived stream (base_seed, k).
pub fn run_replica<G>(
    params: &ModelParams,
    kernel: &JumpKernel,
    g: &G,
    t_max: f64,
    times: &[f64],
    base_seed: u64,
    k: u64,
    opts: SimOptions,
) -> Result<ReplicaSamples>
where
    G: Fn(f64) -> f64 + ?Sized,
{
    let mut rng = replica_rng(base_seed, k);
    let initial = sample_initial(g, params.n, &mut rng)?;
    let mut snapshots = Vec::with_capacity(times.len());
    let mut obs = |_t: f64, config: &Configuration| {
        snapshots.push(config.occupancies().to_vec());
    };
    simulate(params, kernel, initial, t_max, times, opts, &mut rng, &mut obs)?;
    Ok(ReplicaSamples { replica: k, snapshots })
}

/// Run replicas 0..r sequentially. Replicas are independent; a parallel
/// driver can call [`run_replica`] per worker and merge with
/// [`ReplicaEnsemble::from_parts`] in any order.
#[allow(clippy::too_many_arguments)]
pub fn run_ensemble<G>(
    params: &ModelParams,
    kernel: &JumpKernel,
    g: &G,
    t_max: f64,
    times: &[f64],
    r: u64,
    base_seed: u64,
    opts: SimOptions,
) -> Result<ReplicaEnsemble>
where
    G: Fn(f64) -> f64 + ?Sized,
{
    let mut replicas = Vec::with_capacity(r as usize);
    for k in 0..r {
        replicas.push(run_replica(params, kernel, g, t_max, times, base_seed, k, opts)?);
    }
    ReplicaEnsemble::from_parts(params.n, times.to_vec(), base_seed, replicas)
}

impl ReplicaEnsemble {
    /// Assemble from independently produced replicas; sorts by replica
    /// index so the merge is order-insensitive.
    pub fn from_parts(
        n: usize,
        times: Vec<f64>,
        base_seed: u64,
        mut replicas: Vec<ReplicaSamples>,
    ) -> Result<Self> {
        for r in &replicas {
            if r.snapshots.len() != times.len() {
                return Err(Error::MismatchedGrids);
            }
            if r.snapshots.iter().any(|s| s.len() != n - 1) {
                return Err(Error::MismatchedGrids);
            }
        }
        replicas.sort_by_key(|r| r.replica);
        Ok(ReplicaEnsemble { n, times, base_seed, replicas })
    }

    pub fn replica_count(&self) -> usize {
        self.replicas.len()
    }

    pub fn index_of_time(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or_else(|| Error::Numerical(format!("time {t} is not on the sample grid")))
    }

    /// Per-site sample mean and standard error (sample std / sqrt(R)) at
    /// sample index `i`.
    pub fn mean_profile(&self, i: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let r = self.replicas.len();
        if r < 2 {
            return Err(Error::InvalidParameter("ensemble needs at least 2 replicas".into()));
        }
        let m = self.n - 1;
        let mut mean = vec![0.0; m];
        for rep in &self.replicas {
            for (j, &v) in rep.snapshots[i].iter().enumerate() {
                mean[j] += v as f64;
            }
        }
        for v in mean.iter_mut() {
            *v /= r as f64;
        }
        let mut se = vec![0.0; m];
        for rep in &self.replicas {
            for (j, &v) in rep.snapshots[i].iter().enumerate() {
                let d = v as f64 - mean[j];
                se[j] += d * d;
            }
        }
        for v in se.iter_mut() {
            *v = (*v / (r as f64 - 1.0)).sqrt() / (r as f64).sqrt();
        }
        Ok((mean, se))
    }

    /// Mean boundary block average across replicas at each sample time.
    pub fn mean_block_series(
        &self,
        epsilon: f64,
        side: BlockSide,
    ) -> Result<Vec<f64>> {
        let width = block_width(epsilon, self.n);
        let anchor = match side {
            BlockSide::Right => 0,
            BlockSide::Left => self.n,
        };
        let mut series = vec![0.0; self.times.len()];
        for rep in &self.replicas {
            for (i, snap) in rep.snapshots.iter().enumerate() {
                let config = Configuration::from_occupancies(self.n, snap.clone())?;
                series[i] += block_average(&config, anchor, width, side)?;
            }
        }
        for v in series.iter_mut() {
            *v /= self.replicas.len() as f64;
        }
        Ok(series)
    }
}

/// Lattice Riemann approximation of the squared Gagliardo seminorm of a
/// profile: (c_gamma/2) N^-2 sum_{x != y} (rho(x)-rho(y))^2 / |x/N - y/N|^(1+gamma).
pub fn profile_energy(rho: &DensityProfile, gamma: f64) -> Result<f64> {
    let c = normalization_constant(gamma)?;
    let n = rho.n();
    let inv_n = 1.0 / n as f64;
    let mut s = 0.0;
    for x in 1..n {
        for y in (x + 1)..n {
            let d = rho.value(x) - rho.value(y);
            let dist = (y - x) as f64 * inv_n;
            s += d * d / dist.powf(1.0 + gamma);
        }
    }
    // off-diagonal pairs counted once; the symmetric double integral counts
    // both orders, cancelling the 1/2 prefactor
    Ok(c * s * inv_n * inv_n)
}

/// Time-integrated energy int_0^T ||rho_t||^2_{gamma/2} dt of a trajectory,
/// by trapezoid on the sample grid.
pub fn discrete_energy(traj: &DensityTrajectory, gamma: f64) -> Result<f64> {
    let mut vals = Vec::with_capacity(traj.profiles.len());
    for p in &traj.profiles {
        vals.push(profile_energy(p, gamma)?);
    }
    Ok(trapezoid(&traj.times, &vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Variant;
    use approx::assert_abs_diff_eq;

    #[test]
    fn empirical_pairing_cases() {
        let empty = Configuration::empty(10);
        assert_eq!(empirical_pairing(&empty, &|_| 1.0), 0.0);
        let full = Configuration::full(10);
        assert_abs_diff_eq!(empirical_pairing(&full, &|_| 1.0), 1.0, epsilon = 1e-15);
        // N = 5, eta = (1,0,1,1), G(u) = u: (1/4)(1/5 + 3/5 + 4/5) = 0.4
        let c = Configuration::from_occupancies(5, vec![1, 0, 1, 1]).unwrap();
        assert_abs_diff_eq!(empirical_pairing(&c, &|u| u), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn empirical_pairing_linear_and_monotone() {
        let c = Configuration::from_occupancies(8, vec![1, 0, 0, 1, 0, 1, 0]).unwrap();
        let g1 = |u: f64| u;
        let g2 = |u: f64| (3.0 * u).cos();
        let combined = |u: f64| 2.0 * u + 0.5 * (3.0 * u).cos();
        assert_abs_diff_eq!(
            empirical_pairing(&c, &combined),
            2.0 * empirical_pairing(&c, &g1) + 0.5 * empirical_pairing(&c, &g2),
            epsilon = 1e-14
        );
        // adding a particle with G >= 0 never decreases the pairing
        let mut more = c.clone();
        more.flip(3);
        assert!(empirical_pairing(&more, &g1) >= empirical_pairing(&c, &g1));
    }

    #[test]
    fn block_average_cases() {
        let c = Configuration::from_occupancies(6, vec![1, 1, 1, 1, 1]).unwrap();
        assert_abs_diff_eq!(block_average(&c, 0, 3, BlockSide::Right).unwrap(), 1.0);
        // width 1 is the single neighbour
        let c = Configuration::from_occupancies(6, vec![0, 1, 0, 0, 0]).unwrap();
        assert_abs_diff_eq!(block_average(&c, 1, 1, BlockSide::Right).unwrap(), 1.0);
        assert_abs_diff_eq!(block_average(&c, 3, 1, BlockSide::Left).unwrap(), 1.0);
        // N = 10 alternating from site 1, anchor 0, width 4: (1+0+1+0)/4
        let alt: Vec<u8> = (0..9).map(|i| ((i + 1) % 2) as u8).collect();
        let c = Configuration::from_occupancies(10, alt).unwrap();
        assert_abs_diff_eq!(block_average(&c, 0, 4, BlockSide::Right).unwrap(), 0.5);
        // windows leaving the bulk are rejected
        assert!(block_average(&c, 7, 4, BlockSide::Right).is_err());
        assert!(block_average(&c, 2, 4, BlockSide::Left).is_err());
        // sweeping the whole bulk reproduces the global density
        let c = Configuration::from_occupancies(10, vec![1, 0, 1, 0, 1, 0, 1, 0, 1]).unwrap();
        assert_abs_diff_eq!(
            block_average(&c, 0, 9, BlockSide::Right).unwrap(),
            c.particle_count() as f64 / 9.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn block_width_ceiling() {
        assert_eq!(block_width(0.05, 128), 7); // ceil(6.4)
        assert_eq!(block_width(0.05, 100), 5);
        assert_eq!(block_width(1e-9, 16), 1);
    }

    #[test]
    fn gap_statistic_trivial_cases() {
        // frozen trajectory at the target gives zero
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let vals = vec![0.2; 11];
        assert_abs_diff_eq!(path_gap_statistic(&times, &vals, 0.2), 0.0, epsilon = 1e-15);
        // empty time window gives zero
        assert_eq!(path_gap_statistic(&[0.0], &[0.7], 0.2), 0.0);
    }

    #[test]
    fn deterministic_boundary_gap_shrinks_with_n() {
        // Dirichlet regime: the stationary block average near 0 approaches
        // alpha as N grows
        let (gamma, theta) = (1.5, 0.2);
        let mut prev = f64::INFINITY;
        for n in [64usize, 128, 256] {
            let p = ModelParams::new(n, gamma, theta, 1.0, 0.2, 0.8, Variant::Full).unwrap();
            let kernel = JumpKernel::build(n, gamma).unwrap();
            let rho = crate::evolution::stationary_profile(&p, &kernel).unwrap();
            let traj = DensityTrajectory {
                times: vec![0.0, 1.0],
                profiles: vec![rho.clone(), rho],
                n,
            };
            let gap = boundary_gap_deterministic(&traj, 0.05, BlockSide::Right, p.alpha).unwrap();
            assert!(gap < prev, "N={n}: {gap} !< {prev}");
            prev = gap;
        }
    }

    #[test]
    fn ensemble_statistics() {
        // identical replicas: zero standard error
        let snap = vec![vec![1u8, 0, 1]];
        let reps = vec![
            ReplicaSamples { replica: 0, snapshots: snap.clone() },
            ReplicaSamples { replica: 1, snapshots: snap.clone() },
            ReplicaSamples { replica: 2, snapshots: snap },
        ];
        let ens = ReplicaEnsemble::from_parts(4, vec![0.0], 1, reps).unwrap();
        let (mean, se) = ens.mean_profile(0).unwrap();
        assert_eq!(mean, vec![1.0, 0.0, 1.0]);
        assert_eq!(se, vec![0.0, 0.0, 0.0]);

        // complementary pair averages to 1/2 with equal SEs
        let reps = vec![
            ReplicaSamples { replica: 0, snapshots: vec![vec![1, 0, 1]] },
            ReplicaSamples { replica: 1, snapshots: vec![vec![0, 1, 0]] },
        ];
        let ens = ReplicaEnsemble::from_parts(4, vec![0.0], 1, reps).unwrap();
        let (mean, _) = ens.mean_profile(0).unwrap();
        assert_eq!(mean, vec![0.5, 0.5, 0.5]);

        // mismatched grids rejected
        let reps = vec![ReplicaSamples { replica: 0, snapshots: vec![] }];
        assert!(ReplicaEnsemble::from_parts(4, vec![0.0], 1, reps).is_err());
    }

    #[test]
    fn merge_is_order_insensitive() {
        let a = ReplicaSamples { replica: 0, snapshots: vec![vec![1, 0]] };
        let b = ReplicaSamples { replica: 1, snapshots: vec![vec![0, 1]] };
        let e1 = ReplicaEnsemble::from_parts(3, vec![0.0], 9, vec![a.clone(), b.clone()]).unwrap();
        let e2 = ReplicaEnsemble::from_parts(3, vec![0.0], 9, vec![b, a]).unwrap();
        assert_eq!(e1.replicas[0].snapshots, e2.replicas[0].snapshots);
        assert_eq!(e1.replicas[1].snapshots, e2.replicas[1].snapshots);
    }

    #[test]
    fn energy_basics() {
        let n = 64;
        // constant profiles carry no energy
        let flat = DensityProfile::constant(n, 0.5).unwrap();
        assert_abs_diff_eq!(profile_energy(&flat, 1.5).unwrap(), 0.0, epsilon = 1e-15);
        // doubling T doubles the integral for a frozen profile
        let rho = DensityProfile::from_fn(n, |u| 0.3 + 0.4 * u).unwrap();
        let times1: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
        let times2: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).collect();
        let t1 = DensityTrajectory {
            times: times1.clone(),
            profiles: vec![rho.clone(); times1.len()],
            n,
        };
        let t2 = DensityTrajectory {
            times: times2.clone(),
            profiles: vec![rho.clone(); times2.len()],
            n,
        };
        let e1 = discrete_energy(&t1, 1.5).unwrap();
        let e2 = discrete_energy(&t2, 1.5).unwrap();
        assert_abs_diff_eq!(e2, 2.0 * e1, epsilon = 1e-10);
    }

    #[test]
    fn energy_stable_under_lattice_refinement() {
        // interpolate the N=128 stationary profile onto N=256 and compare
        // the two Riemann energies
        let p = ModelParams::new(128, 1.5, 0.2, 1.0, 0.2, 0.8, Variant::Full).unwrap();
        let kernel = JumpKernel::build(128, 1.5).unwrap();
        let rho = crate::evolution::stationary_profile(&p, &kernel).unwrap();
        let fine = DensityProfile::from_fn(256, |u| rho.interpolate(u)).unwrap();
        let e_coarse = profile_energy(&rho, 1.5).unwrap();
        let e_fine = profile_energy(&fine, 1.5).unwrap();
        assert!(e_coarse.is_finite() && e_fine.is_finite());
        assert!(
            (e_fine - e_coarse).abs() / e_coarse < 0.10,
            "energies differ beyond 10%: {e_coarse} vs {e_fine}"
        );
    }
}
