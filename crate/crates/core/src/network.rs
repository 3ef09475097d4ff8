//! Trait-structured bipartite random communities.
//!
//! A [`Community`] holds `n` plant traits and `m` pollinator traits (both
//! sorted), a Bernoulli adjacency drawn from a graphon `φ(x, y)` and a matrix
//! of interaction weights whose conditional mean is `c(x, y) / (n + m)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::tabulated::Grid2;

/// Edge-probability function on `[0,1]²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum GraphonSpec {
    /// Bipartite Erdős–Rényi graph.
    Constant { p: f64 },
    /// `φ(x, y) = x·y`, which yields nested graphs.
    Product,
    /// Stochastic block model. Boundaries are the cut points `0 = b_0 < … < b_K = 1`.
    #[serde(rename_all = "camelCase")]
    Block {
        row_boundaries: Vec<f64>,
        col_boundaries: Vec<f64>,
        block_probs: Vec<Vec<f64>>,
    },
    /// Bilinear interpolation of a probability table, clamped to `[0,1]`.
    Tabulated { grid: Grid2 },
}

impl GraphonSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            GraphonSpec::Constant { p } => check_probability(*p, "graphon.p"),
            GraphonSpec::Product => Ok(()),
            GraphonSpec::Block { row_boundaries, col_boundaries, block_probs } => {
                check_boundaries(row_boundaries, "graphon.rowBoundaries")?;
                check_boundaries(col_boundaries, "graphon.colBoundaries")?;
                let rows = row_boundaries.len() - 1;
                let cols = col_boundaries.len() - 1;
                if block_probs.len() != rows || block_probs.iter().any(|r| r.len() != cols) {
                    return Err(Error::Model(format!(
                        "graphon.blockProbs must be {rows}×{cols} to match the boundaries"
                    )));
                }
                block_probs
                    .iter()
                    .flatten()
                    .try_for_each(|&p| check_probability(p, "graphon.blockProbs"))
            }
            GraphonSpec::Tabulated { grid } => grid.validate(),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            GraphonSpec::Constant { p } => *p,
            GraphonSpec::Product => x * y,
            GraphonSpec::Block { row_boundaries, col_boundaries, block_probs } => {
                block_probs[block_index(row_boundaries, x)][block_index(col_boundaries, y)]
            }
            GraphonSpec::Tabulated { grid } => grid.eval(x, y).clamp(0.0, 1.0),
        }
    }
}

fn check_probability(p: f64, field: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Model(format!("{field} = {p} is not a probability")))
    }
}

fn check_boundaries(b: &[f64], field: &str) -> Result<()> {
    let ok = b.len() >= 2
        && b[0] == 0.0
        && b[b.len() - 1] == 1.0
        && b.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::Model(format!(
            "{field} must be strictly increasing from 0 to 1"
        )))
    }
}

fn block_index(boundaries: &[f64], v: f64) -> usize {
    let last = boundaries.len() - 2;
    boundaries[1..=last].partition_point(|&b| b <= v).min(last)
}

/// Mean interaction strength `c(x, y)` before the `1/(n+m)` scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum HarvestKind {
    Constant { c0: f64 },
    #[serde(rename = "productXY")]
    ProductXY,
    /// `c(x, y) = x·(1 − y)`.
    #[serde(rename = "productXOneMinusY")]
    ProductXOneMinusY,
    Tabulated { grid: Grid2 },
}

/// Weight distribution: `C_ij = c(x_i, y_j)/(n+m) · (1 + U_ij)` with
/// `U_ij ~ Uniform[−w, w]`, `w = noise_half_width ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HarvestSpec {
    #[serde(flatten)]
    pub kind: HarvestKind,
    #[serde(default)]
    pub noise_half_width: f64,
}

impl HarvestSpec {
    pub fn noiseless(kind: HarvestKind) -> Self {
        Self { kind, noise_half_width: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.noise_half_width) {
            return Err(Error::Model(format!(
                "harvest.noiseHalfWidth = {} must lie in [0, 1]",
                self.noise_half_width
            )));
        }
        match &self.kind {
            HarvestKind::Constant { c0 } if !(*c0 >= 0.0 && c0.is_finite()) => {
                Err(Error::Model(format!("harvest.c0 = {c0} must be nonnegative")))
            }
            HarvestKind::Tabulated { grid } => {
                grid.validate()?;
                if grid.min_max().0 < 0.0 {
                    return Err(Error::Model("harvest.grid has negative entries".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self, x: f64, y: f64) -> f64 {
        match &self.kind {
            HarvestKind::Constant { c0 } => *c0,
            HarvestKind::ProductXY => x * y,
            HarvestKind::ProductXOneMinusY => x * (1.0 - y),
            HarvestKind::Tabulated { grid } => grid.eval(x, y).max(0.0),
        }
    }
}

/// Trait distribution, given by its inverse CDF on `[0,1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum TraitDistribution {
    #[default]
    Uniform,
    Constant { value: f64 },
    /// `F⁻¹(u) = u^exponent`.
    Power { exponent: f64 },
    /// Piecewise-linear inverse CDF through equally spaced quantiles.
    Tabulated { quantiles: Vec<f64> },
}

impl TraitDistribution {
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        match self {
            TraitDistribution::Uniform => u,
            TraitDistribution::Constant { value } => *value,
            TraitDistribution::Power { exponent } => u.powf(*exponent),
            TraitDistribution::Tabulated { quantiles } => {
                let last = quantiles.len() - 1;
                let s = u.clamp(0.0, 1.0) * last as f64;
                let i = (s.floor() as usize).min(last.saturating_sub(1));
                let t = s - i as f64;
                if last == 0 {
                    quantiles[0]
                } else {
                    quantiles[i] * (1.0 - t) + quantiles[i + 1] * t
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TraitDistribution::Power { exponent } if *exponent <= 0.0 => {
                Err(Error::Config(format!("trait power exponent {exponent} must be positive")))
            }
            TraitDistribution::Tabulated { quantiles } if quantiles.is_empty() => {
                Err(Error::Config("trait quantile table is empty".into()))
            }
            _ => check_inverse_cdf(&|u| self.inverse_cdf(u)),
        }
    }
}

const PROBE_POINTS: usize = 1024;

fn check_inverse_cdf(f: &dyn Fn(f64) -> f64) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for k in 0..=PROBE_POINTS {
        let v = f(k as f64 / PROBE_POINTS as f64);
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Config(format!("inverse CDF leaves [0,1]: F⁻¹({}) = {v}", k as f64 / PROBE_POINTS as f64)));
        }
        if v < prev {
            return Err(Error::Config("inverse CDF is not monotone nondecreasing".into()));
        }
        prev = v;
    }
    Ok(())
}

/// Order statistics of `n` (resp. `m`) uniforms pushed through the inverse CDFs.
pub fn sample_traits(
    n: usize,
    m: usize,
    plant_inverse_cdf: &dyn Fn(f64) -> f64,
    pollinator_inverse_cdf: &dyn Fn(f64) -> f64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || m == 0 {
        return Err(Error::Config("species counts must be at least 1".into()));
    }
    check_inverse_cdf(plant_inverse_cdf)?;
    check_inverse_cdf(pollinator_inverse_cdf)?;
    let draw = |count: usize, index: u64, inv: &dyn Fn(f64) -> f64| {
        let mut rng = stream_rng(seed, Stream::Traits, index);
        let mut u: Vec<f64> = (0..count).map(|_| rng.random::<f64>()).collect();
        u.sort_by(f64::total_cmp);
        u.into_iter().map(inv).collect::<Vec<_>>()
    };
    Ok((draw(n, 0, plant_inverse_cdf), draw(m, 1, pollinator_inverse_cdf)))
}

/// Dense `n × m` 0/1 matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    m: usize,
    bits: Vec<u8>,
}

impl Adjacency {
    pub fn from_fn(n: usize, m: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                bits.push(u8::from(f(i, j)));
            }
        }
        Self { n, m, bits }
    }

    pub fn complete(n: usize, m: usize) -> Self {
        Self { n, m, bits: vec![1; n * m] }
    }

    pub fn empty(n: usize, m: usize) -> Self {
        Self { n, m, bits: vec![0; n * m] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.m + j] != 0
    }

    pub fn edge_count(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let mut plant_degrees = vec![0; self.n];
        let mut pollinator_degrees = vec![0; self.m];
        for i in 0..self.n {
            for j in 0..self.m {
                if self.get(i, j) {
                    plant_degrees[i] += 1;
                    pollinator_degrees[j] += 1;
                }
            }
        }
        let histogram = |degrees: &[usize], max: usize| {
            let mut h = vec![0; max + 1];
            degrees.iter().for_each(|&d| h[d] += 1);
            h
        };
        DegreeStats {
            plant_histogram: histogram(&plant_degrees, self.m),
            pollinator_histogram: histogram(&pollinator_degrees, self.n),
            edge_count: plant_degrees.iter().sum(),
            plant_degrees,
            pollinator_degrees,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DegreeStats {
    pub plant_degrees: Vec<usize>,
    pub pollinator_degrees: Vec<usize>,
    /// `plant_histogram[d]` = number of plants of degree `d`, `d = 0..=m`.
    pub plant_histogram: Vec<usize>,
    pub pollinator_histogram: Vec<usize>,
    pub edge_count: usize,
}

pub fn degree_stats(g: &Adjacency) -> DegreeStats {
    g.degree_stats()
}

fn check_traits(t: &[f64]) -> Result<()> {
    if t.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain("traits must lie in [0, 1]".into()));
    }
    Ok(())
}

/// Independent Bernoulli(`φ(x_i, y_j)`) edges, drawn row-major.
pub fn sample_graph(x: &[f64], y: &[f64], graphon: &GraphonSpec, seed: u64) -> Result<Adjacency> {
    check_traits(x)?;
    check_traits(y)?;
    graphon.validate()?;
    let mut rng = stream_rng(seed, Stream::Graph, 0);
    let mut err = None;
    let g = Adjacency::from_fn(x.len(), y.len(), |i, j| {
        let p = graphon.eval(x[i], y[j]);
        if !(0.0..=1.0).contains(&p) && err.is_none() {
            err = Some(Error::Model(format!("φ({}, {}) = {p} outside [0,1]", x[i], y[j])));
        }
        rng.random::<f64>() < p
    });
    match err {
        Some(e) => Err(e),
        None => Ok(g),
    }
}

/// Weight matrix, row-major `n × m`.
pub fn sample_weights(x: &[f64], y: &[f64], harvest: &HarvestSpec, seed: u64) -> Result<Vec<f64>> {
    check_traits(x)?;
    check_traits(y)?;
    harvest.validate()?;
    let scale = 1.0 / (x.len() + y.len()) as f64;
    let w = harvest.noise_half_width;
    let mut rng = stream_rng(seed, Stream::Weights, 0);
    let mut c = Vec::with_capacity(x.len() * y.len());
    for &xi in x {
        for &yj in y {
            let u: f64 = rng.random();
            c.push(harvest.mean(xi, yj) * scale * (1.0 + w * (2.0 * u - 1.0)));
        }
    }
    Ok(c)
}

/// Everything needed to draw a [`Community`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CommunitySpec {
    pub n: usize,
    pub m: usize,
    pub graphon: GraphonSpec,
    pub harvest: HarvestSpec,
    #[serde(default)]
    pub plant_traits: TraitDistribution,
    #[serde(default)]
    pub pollinator_traits: TraitDistribution,
}

impl CommunitySpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::Config("community.n and community.m must be ≥ 1".into()));
        }
        self.graphon.validate()?;
        self.harvest.validate()?;
        self.plant_traits.validate()?;
        self.pollinator_traits.validate()
    }

    pub fn sample(&self, seed: u64) -> Result<Community> {
        self.validate()?;
        let (x, y) = sample_traits(
            self.n,
            self.m,
            &|u| self.plant_traits.inverse_cdf(u),
            &|u| self.pollinator_traits.inverse_cdf(u),
            seed,
        )?;
        let g = sample_graph(&x, &y, &self.graphon, seed)?;
        let c = sample_weights(&x, &y, &self.harvest, seed)?;
        Community::new(x, y, g, c, seed)
    }
}

/// The random environment shared by every scale of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Community {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub adjacency: Adjacency,
    /// Row-major `n × m`; only entries with an edge enter the dynamics.
    pub weights: Vec<f64>,
    pub seed: u64,
    plant_neighbors: Vec<Vec<(usize, f64)>>,
    pollinator_neighbors: Vec<Vec<(usize, f64)>>,
}

impl Community {
    pub fn new(x: Vec<f64>, y: Vec<f64>, adjacency: Adjacency, weights: Vec<f64>, seed: u64) -> Result<Self> {
        let (n, m) = (x.len(), y.len());
        if n == 0 || m == 0 {
            return Err(Error::Config("community needs at least one species per side".into()));
        }
        if adjacency.n != n || adjacency.m != m || weights.len() != n * m {
            return Err(Error::Config("adjacency/weight dimensions do not match traits".into()));
        }
        check_traits(&x)?;
        check_traits(&y)?;
        if !x.windows(2).all(|w| w[0] <= w[1]) || !y.windows(2).all(|w| w[0] <= w[1]) {
            return Err(Error::Config("traits must be sorted ascending".into()));
        }
        if weights.iter().any(|&c| !(c >= 0.0 && c.is_finite())) {
            return Err(Error::Config("interaction weights must be finite and nonnegative".into()));
        }
        let mut plant_neighbors = vec![Vec::new(); n];
        let mut pollinator_neighbors = vec![Vec::new(); m];
        for i in 0..n {
            for j in 0..m {
                if adjacency.get(i, j) {
                    let c = weights[i * m + j];
                    plant_neighbors[i].push((j, c));
                    pollinator_neighbors[j].push((i, c));
                }
            }
        }
        Ok(Self { x, y, adjacency, weights, seed, plant_neighbors, pollinator_neighbors })
    }

    /// One plant and one pollinator, connected with weight `c`. Traits are 1.
    pub fn pair(c: f64) -> Self {
        Self::new(vec![1.0], vec![1.0], Adjacency::complete(1, 1), vec![c], 0)
            .expect("a connected pair is a valid community")
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.m() + j]
    }

    /// `G_ij · C_ij`.
    pub fn effective_weight(&self, i: usize, j: usize) -> f64 {
        if self.adjacency.get(i, j) {
            self.weight(i, j)
        } else {
            0.0
        }
    }

    /// `(j, C_ij)` for every pollinator `j` linked to plant `i`.
    pub fn plant_neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.plant_neighbors[i]
    }

    /// `(i, C_ij)` for every plant `i` linked to pollinator `j`.
    pub fn pollinator_neighbors(&self, j: usize) -> &[(usize, f64)] {
        &self.pollinator_neighbors[j]
    }

    /// Edge list CSV with 1-based indices.
    pub fn edges_csv(&self) -> String {
        let mut out = String::from("i,j,weight\n");
        for i in 0..self.n() {
            for &(j, c) in self.plant_neighbors(i) {
                out.push_str(&format!("{},{},{}\n", i + 1, j + 1, c));
            }
        }
        out
    }

    pub fn snapshot(&self, spec: Option<&CommunitySpec>) -> CommunitySnapshot {
        let edges = (0..self.n())
            .flat_map(|i| {
                self.plant_neighbors(i)
                    .iter()
                    .map(move |&(j, weight)| EdgeRecord { i: i + 1, j: j + 1, weight })
            })
            .collect();
        CommunitySnapshot {
            n: self.n(),
            m: self.m(),
            x: self.x.clone(),
            y: self.y.clone(),
            edges,
            seed: self.seed,
            spec: spec.cloned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// JSON form of a sampled community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunitySnapshot {
    pub n: usize,
    pub m: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub edges: Vec<EdgeRecord>,
    pub seed: u64,
    pub spec: Option<CommunitySpec>,
}

impl CommunitySnapshot {
    /// Rebuild the community. Non-edges get weight 0.
    pub fn to_community(&self) -> Result<Community> {
        let mut weights = vec![0.0; self.n * self.m];
        let mut g = Adjacency::empty(self.n, self.m);
        for e in &self.edges {
            if e.i == 0 || e.j == 0 || e.i > self.n || e.j > self.m {
                return Err(Error::Config(format!("edge ({}, {}) out of range", e.i, e.j)));
            }
            g.bits[(e.i - 1) * self.m + e.j - 1] = 1;
            weights[(e.i - 1) * self.m + e.j - 1] = e.weight;
        }
        Community::new(self.x.clone(), self.y.clone(), g, weights, self.seed)
    }
}
