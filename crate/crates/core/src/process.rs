//! Event-driven continuous-time dynamics: long-jump exchanges inside the
//! bulk, reservoir creation/annihilation at every site, run in the
//! accelerated macroscopic time scale t * Theta(N).
//!
//! Exchange events are sampled in one of two equivalent ways. On small
//! lattices a per-site discordant mass is maintained exactly. On large
//! lattices a static per-site upper bound kappa_x = (1/2) sum_y p(y-x) is
//! used to propose (site, partner) pairs and proposals landing on a
//! concordant partner are thinned into null events. Both paths realize the
//! same jump law; the thinning path keeps updates at O(log N).

use crate::error::{Error, Result};
use crate::fenwick::Fenwick;
use crate::kernel::{JumpKernel, ModelParams, Variant};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp1};

/// Occupation state on the bulk sites 1..=N-1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    n: usize,
    occ: Vec<u8>,
    count: usize,
}

impl Configuration {
    pub fn empty(n: usize) -> Self {
        Configuration { n, occ: vec![0; n - 1], count: 0 }
    }

    pub fn full(n: usize) -> Self {
        Configuration { n, occ: vec![1; n - 1], count: n - 1 }
    }

    pub fn from_occupancies(n: usize, occ: Vec<u8>) -> Result<Self> {
        if occ.len() != n - 1 {
            return Err(Error::InvalidParameter(format!(
                "occupancy vector of length {} does not match N = {n}",
                occ.len()
            )));
        }
        if occ.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParameter("occupancies must be 0 or 1".into()));
        }
        let count = occ.iter().map(|&v| v as usize).sum();
        Ok(Configuration { n, occ, count })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of bulk sites.
    pub fn sites(&self) -> usize {
        self.n - 1
    }

    pub fn get(&self, x: usize) -> bool {
        self.occ[x - 1] == 1
    }

    pub fn particle_count(&self) -> usize {
        self.count
    }

    pub fn occupancies(&self) -> &[u8] {
        &self.occ
    }

    pub fn flip(&mut self, x: usize) {
        let v = &mut self.occ[x - 1];
        if *v == 1 {
            *v = 0;
            self.count -= 1;
        } else {
            *v = 1;
            self.count += 1;
        }
    }

    pub fn exchange(&mut self, x: usize, y: usize) {
        self.occ.swap(x - 1, y - 1);
    }
}

/// Draw an initial configuration from the inhomogeneous Bernoulli product
/// measure with marginal g(x/N) at site x.
pub fn sample_initial<F, R>(g: &F, n: usize, rng: &mut R) -> Result<Configuration>
where
    F: Fn(f64) -> f64 + ?Sized,
    R: Rng + ?Sized,
{
    let mut occ = Vec::with_capacity(n - 1);
    for x in 1..n {
        let p = g(x as f64 / n as f64);
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ProfileOutOfRange(p));
        }
        occ.push(u8::from(rng.gen::<f64>() < p));
    }
    Configuration::from_occupancies(n, occ)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    /// Exchange the occupations of sites x and y.
    Exchange { x: usize, y: usize },
    /// Flip the occupation of site x (reservoir action).
    Flip { x: usize },
    /// Thinned bulk proposal; advances time without touching the state.
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    /// Exact per-site discordant masses (O(N log N) updates).
    Exact,
    /// Static proposal bounds with rejection (O(log N) updates).
    Thinning,
    /// Exact below `EXACT_THRESHOLD` sites, thinning above.
    Auto,
}

const EXACT_THRESHOLD: usize = 32;

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub mode: SamplingMode,
    /// Rebuild the rate structures from scratch after this many applied
    /// events to clear accumulated float drift.
    pub rebuild_every: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { mode: SamplingMode::Auto, rebuild_every: 1_000_000 }
    }
}

#[derive(Debug, Clone)]
enum BulkSampler {
    /// d holds (1/2) sum over discordant partners of p(y-x) per site.
    Exact { d: Fenwick },
    /// Static cumulative site bounds kappa_x; partner by magnitude table.
    Thinning { site_cum: Vec<f64>, total: f64 },
    /// Discordant nearest-neighbour pairs (x, x+1), indexed by x-1.
    NearestNeighbor { pairs: Fenwick },
}

/// Current event rates: per-site reservoir flip rates in a Fenwick tree and
/// a bulk exchange sampler. All rates are in process (pre-acceleration)
/// units; the time scale enters only through waiting times.
#[derive(Debug, Clone)]
pub struct RateTable {
    n: usize,
    variant: Variant,
    /// reservoir flip rate at x when eta(x) = 0 (index x-1)
    rate_vac: Vec<f64>,
    /// reservoir flip rate at x when eta(x) = 1
    rate_occ: Vec<f64>,
    res: Fenwick,
    bulk: BulkSampler,
}

impl RateTable {
    pub fn build(
        config: &Configuration,
        params: &ModelParams,
        kernel: &JumpKernel,
        mode: SamplingMode,
    ) -> Result<Self> {
        let n = params.n;
        if config.n() != n || kernel.n() != n {
            return Err(Error::InvalidParameter(
                "configuration, parameters and kernel disagree on N".into(),
            ));
        }
        let pre = params.reservoir_prefactor();
        let mut rate_vac = vec![0.0; n - 1];
        let mut rate_occ = vec![0.0; n - 1];
        match params.variant {
            Variant::Full | Variant::DiffusiveBulk => {
                for x in 1..n {
                    let rm = kernel.reservoir_tail_left(x)?;
                    let rp = kernel.reservoir_tail_right(x)?;
                    rate_vac[x - 1] = pre * (rm * params.alpha + rp * params.beta);
                    rate_occ[x - 1] = pre * (rm * (1.0 - params.alpha) + rp * (1.0 - params.beta));
                }
            }
            Variant::OneSite => {
                rate_vac[0] += pre * params.alpha;
                rate_occ[0] += pre * (1.0 - params.alpha);
                rate_vac[n - 2] += pre * params.beta;
                rate_occ[n - 2] += pre * (1.0 - params.beta);
            }
        }
        let current: Vec<f64> = (1..n)
            .map(|x| if config.get(x) { rate_occ[x - 1] } else { rate_vac[x - 1] })
            .collect();
        let res = Fenwick::new(current);

        let bulk = match params.variant {
            Variant::DiffusiveBulk => {
                let weights: Vec<f64> = (1..n - 1)
                    .map(|x| if config.get(x) != config.get(x + 1) { 1.0 } else { 0.0 })
                    .collect();
                BulkSampler::NearestNeighbor { pairs: Fenwick::new(weights) }
            }
            Variant::Full | Variant::OneSite => {
                let exact = match mode {
                    SamplingMode::Exact => true,
                    SamplingMode::Thinning => false,
                    SamplingMode::Auto => n - 1 <= EXACT_THRESHOLD,
                };
                if exact {
                    let d: Vec<f64> = (1..n).map(|x| discordant_mass(config, kernel, x)).collect();
                    BulkSampler::Exact { d: Fenwick::new(d) }
                } else {
                    let mut site_cum = Vec::with_capacity(n - 1);
                    let mut acc = 0.0;
                    for x in 1..n {
                        acc += kernel.pair_rate_bound(x);
                        site_cum.push(acc);
                    }
                    BulkSampler::Thinning { total: acc, site_cum }
                }
            }
        };
        Ok(RateTable { n, variant: params.variant, rate_vac, rate_occ, res, bulk })
    }

    pub fn reservoir_total(&self) -> f64 {
        self.res.total()
    }

    pub fn reservoir_rate(&self, x: usize) -> f64 {
        self.res.get(x - 1)
    }

    /// Total bulk event rate: exchange rate in exact/nearest-neighbour mode,
    /// proposal bound in thinning mode.
    pub fn bulk_total(&self) -> f64 {
        match &self.bulk {
            BulkSampler::Exact { d } => d.total(),
            BulkSampler::Thinning { total, .. } => *total,
            BulkSampler::NearestNeighbor { pairs } => pairs.total(),
        }
    }

    /// Exact total exchange rate (sum of p(y-x) over discordant pairs),
    /// recomputed from the configuration. Used by tests and diagnostics.
    pub fn exact_exchange_rate(&self, config: &Configuration, kernel: &JumpKernel) -> f64 {
        match self.variant {
            Variant::DiffusiveBulk => (1..self.n - 1)
                .filter(|&x| config.get(x) != config.get(x + 1))
                .count() as f64,
            _ => (1..self.n).map(|x| discordant_mass(config, kernel, x)).sum(),
        }
    }

    pub fn total(&self) -> f64 {
        self.reservoir_total() + self.bulk_total()
    }

    /// Whether exchange events are drawn from exact discordant masses
    /// (as opposed to thinned static bounds).
    pub fn is_exact(&self) -> bool {
        !matches!(self.bulk, BulkSampler::Thinning { .. })
    }

    /// Update rates for a flip of site z. `config` is the state before the
    /// flip; the caller mutates it afterwards.
    fn on_flip(&mut self, config: &Configuration, kernel: &JumpKernel, z: usize) {
        let now_occupied = !config.get(z);
        self.res.set(
            z - 1,
            if now_occupied { self.rate_occ[z - 1] } else { self.rate_vac[z - 1] },
        );
        match &mut self.bulk {
            BulkSampler::Exact { d } => {
                let eta_z = config.get(z);
                for x in 1..self.n {
                    if x == z {
                        continue;
                    }
                    let step = 0.5 * kernel.jump_prob(x as i64 - z as i64);
                    let old = d.get(x - 1);
                    // concordant before the flip becomes discordant after
                    if config.get(x) == eta_z {
                        d.set(x - 1, old + step);
                    } else {
                        d.set(x - 1, (old - step).max(0.0));
                    }
                }
                let bound = kernel.pair_rate_bound(z);
                let old = d.get(z - 1);
                d.set(z - 1, (bound - old).max(0.0));
            }
            BulkSampler::Thinning { .. } => {}
            BulkSampler::NearestNeighbor { pairs } => {
                if z >= 2 {
                    let disc = config.get(z - 1) != config.get(z);
                    pairs.set(z - 2, if disc { 0.0 } else { 1.0 });
                }
                if z + 1 <= self.n - 1 {
                    let disc = config.get(z) != config.get(z + 1);
                    pairs.set(z - 1, if disc { 0.0 } else { 1.0 });
                }
            }
        }
    }

    /// Rebuild every dynamic structure from the configuration.
    pub fn rebuild(&mut self, config: &Configuration, kernel: &JumpKernel) {
        for x in 1..self.n {
            self.res.set(
                x - 1,
                if config.get(x) { self.rate_occ[x - 1] } else { self.rate_vac[x - 1] },
            );
        }
        match &mut self.bulk {
            BulkSampler::Exact { d } => {
                for x in 1..self.n {
                    d.set(x - 1, discordant_mass(config, kernel, x));
                }
            }
            BulkSampler::Thinning { .. } => {}
            BulkSampler::NearestNeighbor { pairs } => {
                for x in 1..self.n - 1 {
                    pairs.set(x - 1, if config.get(x) != config.get(x + 1) { 1.0 } else { 0.0 });
                }
            }
        }
    }
}

/// (1/2) sum over y with eta(y) != eta(x) of p(y - x).
fn discordant_mass(config: &Configuration, kernel: &JumpKernel, x: usize) -> f64 {
    let eta_x = config.get(x);
    let mut s = 0.0;
    for y in 1..config.n() {
        if y != x && config.get(y) != eta_x {
            s += kernel.jump_prob(y as i64 - x as i64);
        }
    }
    0.5 * s
}

/// Build the event rates of the full model for a configuration.
pub fn build_rate_table(
    config: &Configuration,
    params: &ModelParams,
    kernel: &JumpKernel,
) -> Result<RateTable> {
    RateTable::build(config, params, kernel, SamplingMode::Auto)
}

/// Build rates for an explicit dynamics variant, overriding `params.variant`.
pub fn variant_rates(
    variant: Variant,
    config: &Configuration,
    params: &ModelParams,
    kernel: &JumpKernel,
) -> Result<RateTable> {
    let mut p = params.clone();
    p.variant = variant;
    RateTable::build(config, &p, kernel, SamplingMode::Auto)
}

/// Streaming observer contract: called with (macroscopic time, read-only
/// configuration view) at each requested sample time.
pub trait Observer {
    fn observe(&mut self, t: f64, config: &Configuration);
}

impl<F: FnMut(f64, &Configuration)> Observer for F {
    fn observe(&mut self, t: f64, config: &Configuration) {
        self(t, config)
    }
}

/// One running process instance.
pub struct Simulation<'k> {
    params: ModelParams,
    kernel: &'k JumpKernel,
    config: Configuration,
    table: RateTable,
    time_scale: f64,
    t: f64,
    applied_events: u64,
    null_events: u64,
    opts: SimOptions,
}

impl<'k> Simulation<'k> {
    pub fn new(
        params: ModelParams,
        kernel: &'k JumpKernel,
        config: Configuration,
        opts: SimOptions,
    ) -> Result<Self> {
        let table = RateTable::build(&config, &params, kernel, opts.mode)?;
        let time_scale = params.time_scale();
        Ok(Simulation {
            params,
            kernel,
            config,
            table,
            time_scale,
            t: 0.0,
            applied_events: 0,
            null_events: 0,
            opts,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn table(&self) -> &RateTable {
        &self.table
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn applied_events(&self) -> u64 {
        self.applied_events
    }

    pub fn null_events(&self) -> u64 {
        self.null_events
    }

    /// Advance by one event. Returns the event and the waiting time that
    /// preceded it, in macroscopic units (already divided by Theta(N)).
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(Event, f64)> {
        let res_total = self.table.reservoir_total();
        let bulk_total = self.table.bulk_total();
        let total = res_total + bulk_total;
        if !(total > 0.0) {
            return Err(Error::Numerical("total event rate vanished (absorbing state)".into()));
        }
        let exp: f64 = Exp1.sample(rng);
        let wait = exp / (self.time_scale * total);
        self.t += wait;

        let u = rng.gen::<f64>() * total;
        let event = if u < res_total {
            let x = self.table.res.find(u) + 1;
            Event::Flip { x }
        } else {
            self.sample_bulk_event(u - res_total, rng)
        };
        self.apply(event);
        Ok((event, wait))
    }

    fn sample_bulk_event<R: Rng + ?Sized>(&mut self, v: f64, rng: &mut R) -> Event {
        match &self.table.bulk {
            BulkSampler::Exact { d } => {
                let x = d.find(v) + 1;
                let mass = d.get(x - 1);
                let target = rng.gen::<f64>() * mass;
                let eta_x = self.config.get(x);
                let mut acc = 0.0;
                let mut last_discordant = None;
                for y in 1..self.config.n() {
                    if y == x || self.config.get(y) == eta_x {
                        continue;
                    }
                    last_discordant = Some(y);
                    acc += 0.5 * self.kernel.jump_prob(y as i64 - x as i64);
                    if acc > target {
                        return Event::Exchange { x, y };
                    }
                }
                // float drift can leave a sliver past the scan; fall back to
                // the last discordant partner, or thin if none exists
                match last_discordant {
                    Some(y) => Event::Exchange { x, y },
                    None => Event::Null,
                }
            }
            BulkSampler::Thinning { site_cum, .. } => {
                let idx = match site_cum
                    .binary_search_by(|c| c.partial_cmp(&v).unwrap())
                {
                    Ok(i) | Err(i) => i.min(site_cum.len() - 1),
                };
                let x = idx + 1;
                // partner proportional to p(y-x) over bulk sites
                let n = self.config.n();
                let y = loop {
                    let z = self.kernel.sample_magnitude(rng);
                    let y = if rng.gen::<bool>() { x.checked_add(z) } else { x.checked_sub(z) };
                    if let Some(y) = y {
                        if y >= 1 && y <= n - 1 {
                            break y;
                        }
                    }
                };
                if self.config.get(x) != self.config.get(y) {
                    Event::Exchange { x, y }
                } else {
                    Event::Null
                }
            }
            BulkSampler::NearestNeighbor { pairs } => {
                let x = pairs.find(v) + 1;
                Event::Exchange { x, y: x + 1 }
            }
        }
    }

    fn apply(&mut self, event: Event) {
        match event {
            Event::Null => {
                self.null_events += 1;
                return;
            }
            Event::Flip { x } => {
                self.table.on_flip(&self.config, self.kernel, x);
                self.config.flip(x);
            }
            Event::Exchange { x, y } => {
                self.table.on_flip(&self.config, self.kernel, x);
                self.config.flip(x);
                self.table.on_flip(&self.config, self.kernel, y);
                self.config.flip(y);
            }
        }
        self.applied_events += 1;
        if self.applied_events % self.opts.rebuild_every == 0 {
            self.table.rebuild(&self.config, self.kernel);
        }
    }
}

/// Deterministic per-replica RNG: replica k reads stream k of a ChaCha
/// generator keyed by the base seed, so enlarging an ensemble never perturbs
/// existing replicas.
pub fn replica_rng(base_seed: u64, replica: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(base_seed);
    rng.set_stream(replica);
    rng
}

/// Run the process until macroscopic time `t_max`, invoking the observer at
/// the requested sample times. The observed state is right-continuous: a
/// sample at time s sees every event with event time <= s.
pub fn simulate<'k, R, O>(
    params: &ModelParams,
    kernel: &'k JumpKernel,
    initial: Configuration,
    t_max: f64,
    sample_times: &[f64],
    opts: SimOptions,
    rng: &mut R,
    observer: &mut O,
) -> Result<Simulation<'k>>
where
    R: Rng + ?Sized,
    O: Observer + ?Sized,
{
    if t_max < 0.0 {
        return Err(Error::InvalidParameter("horizon T must be nonnegative".into()));
    }
    let mut times: Vec<f64> = sample_times.to_vec();
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("sample times must be strictly increasing".into()));
    }
    if times.iter().any(|&s| s < 0.0 || s > t_max) {
        return Err(Error::InvalidParameter("sample times must lie within [0, T]".into()));
    }
    times.reverse(); // pop from the back in increasing order

    let mut sim = Simulation::new(params.clone(), kernel, initial, opts)?;
    if t_max == 0.0 {
        while let Some(s) = times.pop() {
            observer.observe(s, &sim.config);
        }
        return Ok(sim);
    }
    loop {
        let res_total = sim.table.reservoir_total();
        let total = res_total + sim.table.bulk_total();
        if !(total > 0.0) {
            return Err(Error::Numerical("total event rate vanished (absorbing state)".into()));
        }
        let exp: f64 = Exp1.sample(rng);
        let wait = exp / (sim.time_scale * total);
        let t_next = sim.t + wait;

        while let Some(&s) = times.last() {
            if s < t_next {
                observer.observe(s, &sim.config);
                times.pop();
            } else {
                break;
            }
        }
        if t_next >= t_max {
            // no event before the horizon; state is frozen up to t_max
            sim.t = t_max;
            while let Some(s) = times.pop() {
                observer.observe(s, &sim.config);
            }
            return Ok(sim);
        }
        sim.t = t_next;
        let u = rng.gen::<f64>() * total;
        let event = if u < res_total {
            Event::Flip { x: sim.table.res.find(u) + 1 }
        } else {
            sim.sample_bulk_event(u - res_total, rng)
        };
        sim.apply(event);
    }
}

/// Sampled trajectory of one replica.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub params: ModelParams,
    pub seed: u64,
    pub sample_times: Vec<f64>,
    /// occupancy snapshot per sample time (length N-1 each)
    pub snapshots: Vec<Vec<u8>>,
    pub applied_events: u64,
    pub null_events: u64,
}

impl TrajectoryRecord {
    /// Occupancy of site x at sample index i.
    pub fn occupied(&self, i: usize, x: usize) -> bool {
        self.snapshots[i][x - 1] == 1
    }
}

/// Convenience wrapper: Bernoulli(g) initial data, snapshot observer,
/// seeded RNG. Fully deterministic given (params, seed).
pub fn simulate_record<F>(
    params: &ModelParams,
    kernel: &JumpKernel,
    g: &F,
    t_max: f64,
    sample_times: &[f64],
    seed: u64,
    opts: SimOptions,
) -> Result<TrajectoryRecord>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let initial = sample_initial(g, params.n, &mut rng)?;
    let mut snapshots: Vec<Vec<u8>> = Vec::with_capacity(sample_times.len());
    let mut observer = |_t: f64, config: &Configuration| {
        snapshots.push(config.occupancies().to_vec());
    };
    let sim = simulate(params, kernel, initial, t_max, sample_times, opts, &mut rng, &mut observer)?;
    Ok(TrajectoryRecord {
        params: params.clone(),
        seed,
        sample_times: sample_times.to_vec(),
        snapshots,
        applied_events: sim.applied_events(),
        null_events: sim.null_events(),
    })
}
