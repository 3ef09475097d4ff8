//! Exact event-driven simulation of the individual-based model.
//!
//! Direct method: the holding time is exponential with the total rate and the
//! event is drawn in two levels, first one of six event classes by class
//! total, then a species inside the class from a sum tree. Per-species rates
//! are cached and updated locally after each event; the caches are rebuilt
//! from scratch every [`SimOptions::resync_every`] events.

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::Community;
use crate::rates::{CompetitionMatrix, Kernels, RateParams};
use crate::rng::{stream_rng, SimRng, Stream};
use crate::trajectory::{digest, Scale, Trajectory, TrajectoryMeta};

/// Binary tree of partial sums over nonnegative leaves.
///
/// Internal nodes are always recomputed from their children, so no rounding
/// error accumulates in them.
#[derive(Debug, Clone)]
struct SumTree {
    size: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(len: usize) -> Self {
        let size = len.next_power_of_two().max(1);
        Self { size, nodes: vec![0.0; 2 * size] }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn get(&self, i: usize) -> f64 {
        self.nodes[self.size + i]
    }

    fn set(&mut self, i: usize, v: f64) {
        let mut p = self.size + i;
        self.nodes[p] = v;
        p /= 2;
        while p >= 1 {
            self.nodes[p] = self.nodes[2 * p] + self.nodes[2 * p + 1];
            p /= 2;
        }
    }

    fn rebuild(&mut self, len: usize, f: impl Fn(usize) -> f64) {
        for i in 0..len {
            self.nodes[self.size + i] = f(i);
        }
        for p in (1..self.size).rev() {
            self.nodes[p] = self.nodes[2 * p] + self.nodes[2 * p + 1];
        }
    }

    /// Leaf `i` such that the prefix sum before `i` is `≤ u`; never returns a
    /// zero leaf when the total is positive.
    fn sample(&self, mut u: f64) -> usize {
        let mut p = 1;
        while p < self.size {
            let (l, r) = (self.nodes[2 * p], self.nodes[2 * p + 1]);
            if (u < l && l > 0.0) || r <= 0.0 {
                p *= 2;
            } else {
                u -= l;
                p = 2 * p + 1;
            }
        }
        p - self.size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EventKind {
    PlantBirth,
    PlantDeath,
    PlantCompetitionDeath,
    PollinatorBirth,
    PollinatorDeath,
    PollinatorCompetitionDeath,
}

impl EventKind {
    const ALL: [EventKind; 6] = [
        EventKind::PlantBirth,
        EventKind::PlantDeath,
        EventKind::PlantCompetitionDeath,
        EventKind::PollinatorBirth,
        EventKind::PollinatorDeath,
        EventKind::PollinatorCompetitionDeath,
    ];

    pub fn is_plant(self) -> bool {
        matches!(self, EventKind::PlantBirth | EventKind::PlantDeath | EventKind::PlantCompetitionDeath)
    }

    pub fn is_birth(self) -> bool {
        matches!(self, EventKind::PlantBirth | EventKind::PollinatorBirth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub index: usize,
    pub dt: f64,
    /// Total rate in force during the holding time.
    pub total_rate: f64,
}

/// Per-species rates recomputed from the counts alone.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRates {
    pub plant_birth: Vec<f64>,
    /// Intrinsic plus competition death.
    pub plant_death: Vec<f64>,
    pub pollinator_birth: Vec<f64>,
    pub pollinator_death: Vec<f64>,
    pub total: f64,
}

#[derive(Debug, Clone)]
enum CompetitionCache {
    /// Class total is `value·S²/(len·K)`; the victim is drawn proportional to counts.
    Constant { value: f64, counts: SumTree },
    /// `sums_i = Σ_l k(i,l)·N_l`; leaf `i` is `sums_i·N_i/(len·K)`.
    Dense { sums: Vec<f64>, tree: SumTree },
}

#[derive(Debug, Clone)]
struct GuildCache {
    /// `Σ_partners C·N_partner`, not yet divided by K.
    resources: Vec<f64>,
    birth: SumTree,
    death: SumTree,
    competition: CompetitionCache,
    total_count: u64,
}

impl GuildCache {
    fn competition_total(&self, len: usize, k: f64) -> f64 {
        match &self.competition {
            CompetitionCache::Constant { value, .. } => {
                let s = self.total_count as f64;
                value * s * s / (len as f64 * k)
            }
            CompetitionCache::Dense { tree, .. } => tree.total(),
        }
    }
}

/// Individual-based state: integer counts at carrying capacity `k`.
#[derive(Debug, Clone)]
pub struct IbmState {
    pub t: f64,
    pub k: u64,
    pub plants: Vec<u64>,
    pub pollinators: Vec<u64>,
    plant_cache: GuildCache,
    pollinator_cache: GuildCache,
    pub events: u64,
}

impl IbmState {
    pub fn normalized(&self) -> Vec<f64> {
        let k = self.k as f64;
        self.plants.iter().chain(&self.pollinators).map(|&c| c as f64 / k).collect()
    }

    pub fn total_rate(&self) -> f64 {
        let (n, m, k) = (self.plants.len(), self.pollinators.len(), self.k as f64);
        self.plant_cache.birth.total()
            + self.plant_cache.death.total()
            + self.plant_cache.competition_total(n, k)
            + self.pollinator_cache.birth.total()
            + self.pollinator_cache.death.total()
            + self.pollinator_cache.competition_total(m, k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub event_cap: u64,
    pub resync_every: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { event_cap: 100_000_000, resync_every: 10_000 }
    }
}

#[derive(Clone, Copy)]
enum Guild {
    Plant,
    Pollinator,
}

/// A community with its rate laws, ready to drive [`IbmState`]s.
#[derive(Debug, Clone)]
pub struct IbmModel<'a> {
    community: &'a Community,
    params: RateParams,
    plant_competition: CompetitionMatrix,
    pollinator_competition: CompetitionMatrix,
}

impl<'a> IbmModel<'a> {
    pub fn new(community: &'a Community, params: &RateParams, kernels: &Kernels) -> Result<Self> {
        params.validate()?;
        kernels.validate()?;
        Ok(Self {
            community,
            params: *params,
            plant_competition: CompetitionMatrix::new(&kernels.plant, &community.x),
            pollinator_competition: CompetitionMatrix::new(&kernels.pollinator, &community.y),
        })
    }

    pub fn community(&self) -> &Community {
        self.community
    }

    pub fn init_state(&self, k: u64, plants: Vec<u64>, pollinators: Vec<u64>) -> Result<IbmState> {
        if k == 0 {
            return Err(Error::Config("carrying capacity K must be a positive integer".into()));
        }
        if plants.len() != self.community.n() || pollinators.len() != self.community.m() {
            return Err(Error::Domain(format!(
                "initial counts have lengths {}+{} for a {}+{} community",
                plants.len(),
                pollinators.len(),
                self.community.n(),
                self.community.m()
            )));
        }
        let empty = |len: usize, comp: &CompetitionMatrix| GuildCache {
            resources: vec![0.0; len],
            birth: SumTree::new(len),
            death: SumTree::new(len),
            competition: match comp {
                CompetitionMatrix::Constant { value, .. } => {
                    CompetitionCache::Constant { value: *value, counts: SumTree::new(len) }
                }
                CompetitionMatrix::Dense { .. } => {
                    CompetitionCache::Dense { sums: vec![0.0; len], tree: SumTree::new(len) }
                }
            },
            total_count: 0,
        };
        let mut state = IbmState {
            t: 0.0,
            k,
            plant_cache: empty(plants.len(), &self.plant_competition),
            pollinator_cache: empty(pollinators.len(), &self.pollinator_competition),
            plants,
            pollinators,
            events: 0,
        };
        self.resync(&mut state);
        Ok(state)
    }

    fn birth(&self, guild: Guild, r: f64) -> f64 {
        match guild {
            Guild::Plant => self.params.birth_p(r),
            Guild::Pollinator => self.params.birth_a(r),
        }
    }

    fn death(&self, guild: Guild, r: f64) -> f64 {
        match guild {
            Guild::Plant => self.params.death_p(r),
            Guild::Pollinator => self.params.death_a(r),
        }
    }

    /// Rebuild every cache from the counts.
    pub fn resync(&self, state: &mut IbmState) {
        let k = state.k as f64;
        let plants: Vec<f64> = state.plants.iter().map(|&c| c as f64).collect();
        let pollinators: Vec<f64> = state.pollinators.iter().map(|&c| c as f64).collect();
        let pr = crate::rates::plant_resources_unchecked(self.community, &pollinators, 1.0);
        let ar = crate::rates::pollinator_resources_unchecked(self.community, &plants, 1.0);
        self.rebuild_guild(Guild::Plant, &mut state.plant_cache, &state.plants, pr, k);
        self.rebuild_guild(Guild::Pollinator, &mut state.pollinator_cache, &state.pollinators, ar, k);
    }

    fn rebuild_guild(&self, guild: Guild, cache: &mut GuildCache, counts: &[u64], resources: Vec<f64>, k: f64) {
        let len = counts.len();
        cache.resources = resources;
        let res = &cache.resources;
        cache.birth.rebuild(len, |i| self.birth(guild, res[i].max(0.0) / k) * counts[i] as f64);
        cache.death.rebuild(len, |i| self.death(guild, res[i].max(0.0) / k) * counts[i] as f64);
        cache.total_count = counts.iter().sum();
        let matrix = match guild {
            Guild::Plant => &self.plant_competition,
            Guild::Pollinator => &self.pollinator_competition,
        };
        match &mut cache.competition {
            CompetitionCache::Constant { counts: tree, .. } => tree.rebuild(len, |i| counts[i] as f64),
            CompetitionCache::Dense { sums, tree } => {
                for (i, s) in sums.iter_mut().enumerate() {
                    *s = (0..len).map(|l| matrix.entry(i, l) * counts[l] as f64).sum();
                }
                let scale = len as f64 * k;
                tree.rebuild(len, |i| sums[i] * counts[i] as f64 / scale);
            }
        }
    }

    /// Rates computed directly from the counts, bypassing every cache.
    pub fn event_rates(&self, state: &IbmState) -> EventRates {
        let k = state.k as f64;
        let plants: Vec<f64> = state.plants.iter().map(|&c| c as f64).collect();
        let pollinators: Vec<f64> = state.pollinators.iter().map(|&c| c as f64).collect();
        let rp = crate::rates::plant_resources_unchecked(self.community, &pollinators, k);
        let ra = crate::rates::pollinator_resources_unchecked(self.community, &plants, k);
        let cp = self.plant_competition.apply(&plants);
        let ca = self.pollinator_competition.apply(&pollinators);
        let plant_birth: Vec<f64> = rp.iter().zip(&plants).map(|(&r, &p)| self.params.birth_p(r) * p).collect();
        let plant_death: Vec<f64> = rp
            .iter()
            .zip(&plants)
            .zip(&cp)
            .map(|((&r, &p), &c)| (self.params.death_p(r) + c / k) * p)
            .collect();
        let pollinator_birth: Vec<f64> =
            ra.iter().zip(&pollinators).map(|(&r, &a)| self.params.birth_a(r) * a).collect();
        let pollinator_death: Vec<f64> = ra
            .iter()
            .zip(&pollinators)
            .zip(&ca)
            .map(|((&r, &a), &c)| (self.params.death_a(r) + c / k) * a)
            .collect();
        let total = plant_birth.iter().chain(&plant_death).chain(&pollinator_birth).chain(&pollinator_death).sum();
        EventRates { plant_birth, plant_death, pollinator_birth, pollinator_death, total }
    }

    /// Rates as currently held in the caches, in the layout of [`event_rates`](Self::event_rates).
    pub fn cached_rates(&self, state: &IbmState) -> EventRates {
        let k = state.k as f64;
        let guild = |cache: &GuildCache, counts: &[u64]| {
            let len = counts.len();
            let birth: Vec<f64> = (0..len).map(|i| cache.birth.get(i)).collect();
            let death: Vec<f64> = (0..len)
                .map(|i| {
                    let comp = match &cache.competition {
                        CompetitionCache::Constant { value, .. } => {
                            value * cache.total_count as f64 * counts[i] as f64 / (len as f64 * k)
                        }
                        CompetitionCache::Dense { tree, .. } => tree.get(i),
                    };
                    cache.death.get(i) + comp
                })
                .collect();
            (birth, death)
        };
        let (plant_birth, plant_death) = guild(&state.plant_cache, &state.plants);
        let (pollinator_birth, pollinator_death) = guild(&state.pollinator_cache, &state.pollinators);
        EventRates { plant_birth, plant_death, pollinator_birth, pollinator_death, total: state.total_rate() }
    }

    /// Largest relative gap between cached and recomputed per-species rates.
    ///
    /// Rates below `1e-12·Λ` on both sides count as equal.
    pub fn cache_discrepancy(&self, state: &IbmState) -> f64 {
        let fresh = self.event_rates(state);
        let cached = self.cached_rates(state);
        let floor = 1e-12 * fresh.total.max(f64::MIN_POSITIVE);
        let pairs = [
            (&cached.plant_birth, &fresh.plant_birth),
            (&cached.plant_death, &fresh.plant_death),
            (&cached.pollinator_birth, &fresh.pollinator_birth),
            (&cached.pollinator_death, &fresh.pollinator_death),
        ];
        let mut worst: f64 = 0.0;
        for (c, f) in pairs {
            for (a, b) in c.iter().zip(f.iter()) {
                worst = worst.max((a - b).abs() / b.abs().max(floor));
            }
        }
        worst
    }

    /// Draw and apply one event; `Err(AbsorbedAtZero)` once every rate vanishes.
    pub fn step(&self, state: &mut IbmState, rng: &mut SimRng) -> Result<Event> {
        let event = self.draw(state, rng)?;
        state.t += event.dt;
        self.apply(state, event.kind, event.index);
        Ok(event)
    }

    fn class_totals(&self, state: &IbmState) -> [f64; 6] {
        let (n, m, k) = (state.plants.len(), state.pollinators.len(), state.k as f64);
        let (p, a) = (&state.plant_cache, &state.pollinator_cache);
        [
            p.birth.total(),
            p.death.total(),
            p.competition_total(n, k),
            a.birth.total(),
            a.death.total(),
            a.competition_total(m, k),
        ]
    }

    /// Draw the next event without applying it.
    pub fn draw(&self, state: &IbmState, rng: &mut SimRng) -> Result<Event> {
        let totals = self.class_totals(state);
        let total: f64 = totals.iter().sum();
        if !(total > 0.0) {
            return Err(Error::AbsorbedAtZero);
        }
        let e: f64 = rng.sample(Exp1);
        let dt = e / total;
        let mut u = rng.random::<f64>() * total;
        let last_positive = totals.iter().rposition(|&c| c > 0.0).unwrap_or(0);
        let mut class = last_positive;
        for (c, &w) in totals.iter().enumerate() {
            if w > 0.0 && u < w {
                class = c;
                break;
            }
            u -= w;
        }
        if class == last_positive {
            u = u.clamp(0.0, totals[class]);
        }
        let (cache, len) = if class < 3 {
            (&state.plant_cache, state.plants.len())
        } else {
            (&state.pollinator_cache, state.pollinators.len())
        };
        let index = match class % 3 {
            0 => cache.birth.sample(u),
            1 => cache.death.sample(u),
            _ => match &cache.competition {
                CompetitionCache::Constant { value, counts } => {
                    let per_individual = value * cache.total_count as f64 / (len as f64 * state.k as f64);
                    counts.sample(u / per_individual)
                }
                CompetitionCache::Dense { tree, .. } => tree.sample(u),
            },
        };
        Ok(Event { kind: EventKind::ALL[class], index, dt, total_rate: total })
    }

    fn apply(&self, state: &mut IbmState, kind: EventKind, index: usize) {
        let delta: i64 = if kind.is_birth() { 1 } else { -1 };
        let k = state.k as f64;
        if kind.is_plant() {
            self.change(Guild::Plant, state, index, delta, k);
        } else {
            self.change(Guild::Pollinator, state, index, delta, k);
        }
        state.events += 1;
    }

    fn change(&self, guild: Guild, state: &mut IbmState, index: usize, delta: i64, k: f64) {
        let (counts, cache, partner_counts, partner_cache, matrix, partner_guild) = match guild {
            Guild::Plant => (
                &mut state.plants,
                &mut state.plant_cache,
                &state.pollinators,
                &mut state.pollinator_cache,
                &self.plant_competition,
                Guild::Pollinator,
            ),
            Guild::Pollinator => (
                &mut state.pollinators,
                &mut state.pollinator_cache,
                &state.plants,
                &mut state.plant_cache,
                &self.pollinator_competition,
                Guild::Plant,
            ),
        };
        counts[index] = counts[index].checked_add_signed(delta).expect("death of an absent individual");
        cache.total_count = cache.total_count.checked_add_signed(delta).expect("negative total count");
        let c = counts[index] as f64;
        let r = cache.resources[index].max(0.0) / k;
        cache.birth.set(index, self.birth(guild, r) * c);
        cache.death.set(index, self.death(guild, r) * c);

        let len = counts.len();
        match &mut cache.competition {
            CompetitionCache::Constant { counts: tree, .. } => tree.set(index, c),
            CompetitionCache::Dense { sums, tree } => {
                let d = delta as f64;
                for (i, s) in sums.iter_mut().enumerate() {
                    *s += d * matrix.entry(i, index);
                }
                let scale = len as f64 * k;
                tree.rebuild(len, |i| sums[i] * counts[i] as f64 / scale);
            }
        }

        let neighbors = match guild {
            Guild::Plant => self.community.plant_neighbors(index),
            Guild::Pollinator => self.community.pollinator_neighbors(index),
        };
        for &(j, w) in neighbors {
            partner_cache.resources[j] += delta as f64 * w;
            let r = partner_cache.resources[j].max(0.0) / k;
            let c = partner_counts[j] as f64;
            partner_cache.birth.set(j, self.birth(partner_guild, r) * c);
            partner_cache.death.set(j, self.death(partner_guild, r) * c);
        }
    }
}

/// Run one exact sample path, recorded at `record_times` (strictly increasing,
/// within `[0, t_end]`). Values are counts divided by `k`; between events the
/// last value is held.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    community: &Community,
    params: &RateParams,
    kernels: &Kernels,
    k: u64,
    init_plants: Vec<u64>,
    init_pollinators: Vec<u64>,
    t_end: f64,
    record_times: &[f64],
    seed: u64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    if !(t_end > 0.0) {
        return Err(Error::Config(format!("tEnd must be positive, got {t_end}")));
    }
    if record_times.iter().any(|&t| !(0.0..=t_end).contains(&t)) || !record_times.windows(2).all(|w| w[0] < w[1])
    {
        return Err(Error::Config("record times must be strictly increasing within [0, tEnd]".into()));
    }
    let model = IbmModel::new(community, params, kernels)?;
    let mut state = model.init_state(k, init_plants, init_pollinators)?;
    let mut rng = stream_rng(seed, Stream::Dynamics, 0);
    let meta = TrajectoryMeta {
        scale: Scale::Ibm,
        seed: Some(seed),
        params_digest: digest(&(params, kernels, k, community.seed)),
        carrying_capacity: Some(k),
    };
    let mut traj = Trajectory::new(community.n(), community.m(), meta);
    let mut next = 0;
    let resync_every = opts.resync_every.max(1);

    loop {
        let event = match model.draw(&state, &mut rng) {
            Ok(e) => Some(e),
            Err(Error::AbsorbedAtZero) => None,
            Err(e) => return Err(e),
        };
        let t_next = event.map_or(f64::INFINITY, |e| state.t + e.dt);
        if next < record_times.len() && record_times[next] < t_next {
            let row = state.normalized();
            while next < record_times.len() && record_times[next] < t_next {
                traj.push(record_times[next], row.clone())?;
                next += 1;
            }
        }
        let Some(event) = event else { break };
        if t_next > t_end {
            break;
        }
        if state.events >= opts.event_cap {
            return Err(Error::RuntimeBudgetExceeded { events: state.events, t: state.t, partial: Box::new(traj) });
        }
        state.t = t_next;
        model.apply(&mut state, event.kind, event.index);
        if state.events % resync_every == 0 {
            model.resync(&mut state);
        }
    }
    Ok(traj)
}
