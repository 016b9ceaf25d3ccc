//! Instance generators: random games, partitioning systems and the
//! label-cover reduction built on top of them.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::BasisFunction;
use crate::error::{Error, Result};
use crate::game::{GameInstance, Player, Resource};
use crate::kernel::{binomial_expectation, cost_table};

/// Transversal choices above which P2 is sampled instead of enumerated.
pub const P2_EXHAUSTIVE_LIMIT: u128 = 1_000_000;
pub const P2_DEFAULT_SAMPLES: usize = 100_000;
pub const MAX_CONSTRUCTION_ATTEMPTS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionParams {
    pub n: usize,
    pub beta: usize,
    pub h: usize,
    pub k: usize,
    pub eta: f64,
}

impl PartitionParams {
    pub fn block_size(&self) -> usize {
        self.k * self.n / self.h
    }

    pub fn validate(&self) -> Result<()> {
        let PartitionParams { n, beta, h, k, eta } = *self;
        if n == 0 || beta == 0 || k == 0 {
            return Err(Error::InvalidParams("n, beta and k must be >= 1".into()));
        }
        if h < k {
            return Err(Error::InvalidParams(format!(
                "need h >= k, got h = {h}, k = {k}"
            )));
        }
        if (k * n) % h != 0 {
            return Err(Error::InvalidParams(format!(
                "k·n/h must be an integer, got {k}·{n}/{h}"
            )));
        }
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidParams(format!(
                "eta must lie in (0, 1), got {eta}"
            )));
        }
        Ok(())
    }

    /// `c(k)²/(2η²)·[ln 10 + β ln(h+1)]`, the size above which existence is guaranteed.
    pub fn n_threshold(&self, c: &[f64]) -> f64 {
        let ck = c[self.k];
        ck * ck / (2.0 * self.eta * self.eta)
            * (10f64.ln() + self.beta as f64 * ((self.h + 1) as f64).ln())
    }

    /// Number of transversal choices `C(β,h)·h^h`; zero when `β < h`.
    pub fn transversal_count(&self) -> u128 {
        if self.beta < self.h {
            return 0;
        }
        let mut binom = 1u128;
        for t in 0..self.h as u128 {
            binom = binom.saturating_mul(self.beta as u128 - t) / (t + 1);
        }
        binom.saturating_mul((self.h as u128).saturating_pow(self.h as u32))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum P2Mode {
    /// Enumerate all choices when there are at most [`P2_EXHAUSTIVE_LIMIT`],
    /// otherwise fall back to [`P2_DEFAULT_SAMPLES`] samples.
    Exhaustive,
    Sampled {
        samples: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum P2Coverage {
    Exhaustive,
    /// The margin is a lower bound over the sampled choices only.
    Sampled {
        samples: usize,
    },
    /// `β < h`: no admissible transversal exists.
    Vacuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub p1_pass: bool,
    /// `Σ_r c(|P_j|_r)` per partition.
    pub p1_row_costs: Vec<f64>,
    /// `c(k)·n`.
    pub p1_target: f64,
    pub p2_coverage: P2Coverage,
    /// `min_Q Σ_r c(|Q|_r) − (E_{Bin(h,k/h)}[c] − η)·n`; `None` when vacuous.
    pub p2_worst_margin: Option<f64>,
    pub p2_threshold: f64,
    pub n_threshold: f64,
    pub attempts: usize,
}

impl PartitionReport {
    pub fn pass(&self) -> bool {
        self.p1_pass && self.p2_worst_margin.is_none_or(|m| m >= 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitioningSystem {
    pub params: PartitionParams,
    /// `blocks[j][i]` is `P_{j,i}` as a sorted list of ground-set elements.
    pub blocks: Vec<Vec<Vec<usize>>>,
    pub report: PartitionReport,
}

fn check_cost_table(c: &[f64], h: usize) -> Result<()> {
    if c.len() < h + 1 {
        return Err(Error::InvalidParams(format!(
            "cost table has {} entries, need h + 1 = {}",
            c.len(),
            h + 1
        )));
    }
    if c[0] != 0.0 {
        return Err(Error::InvalidParams(
            "cost table must start with c(0) = 0".into(),
        ));
    }
    Ok(())
}

/// One random partition: `k` passes over a shuffled ground set cut into `h`
/// consecutive chunks of `k·n/h`. Consecutive copies of an element are `n`
/// apart and chunks are at most `n` long, so each element lands in `k`
/// distinct blocks.
fn random_partition(params: &PartitionParams, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..params.n).collect();
    order.shuffle(rng);
    let size = params.block_size();
    let sequence: Vec<usize> = (0..params.k).flat_map(|_| order.iter().copied()).collect();
    let mut blocks: Vec<Vec<usize>> = sequence.chunks(size).map(|c| c.to_vec()).collect();
    blocks.shuffle(rng);
    for b in &mut blocks {
        b.sort_unstable();
    }
    blocks
}

fn row_counts(n: usize, row: &[Vec<usize>]) -> Vec<usize> {
    let mut counts = vec![0usize; n];
    for block in row {
        for &e in block {
            counts[e] += 1;
        }
    }
    counts
}

fn verify_p1(params: &PartitionParams, blocks: &[Vec<Vec<usize>>], c: &[f64]) -> (bool, Vec<f64>) {
    let size = params.block_size();
    let mut pass = blocks.len() == params.beta;
    let mut costs = Vec::with_capacity(blocks.len());
    for row in blocks {
        pass &= row.len() == params.h;
        pass &= row.iter().all(|b| {
            b.len() == size && b.windows(2).all(|w| w[0] < w[1]) && b.iter().all(|&e| e < params.n)
        });
        let counts = row_counts(params.n, row);
        pass &= counts.iter().all(|&x| x == params.k);
        costs.push(counts.iter().map(|&x| c[x.min(c.len() - 1)]).sum());
    }
    (pass, costs)
}

fn transversal_cost(
    n: usize,
    blocks: &[Vec<Vec<usize>>],
    q: &[(usize, usize)],
    c: &[f64],
    counts: &mut Vec<usize>,
) -> f64 {
    counts.clear();
    counts.resize(n, 0);
    for &(j, i) in q {
        for &e in &blocks[j][i] {
            counts[e] += 1;
        }
    }
    counts.iter().map(|&x| c[x]).sum()
}

/// Worst P2 margin and the coverage actually used.
fn verify_p2(
    params: &PartitionParams,
    blocks: &[Vec<Vec<usize>>],
    c: &[f64],
    threshold: f64,
    mode: P2Mode,
    rng: &mut ChaCha8Rng,
) -> (P2Coverage, Option<f64>) {
    let (n, beta, h) = (params.n, params.beta, params.h);
    let total = params.transversal_count();
    if total == 0 {
        return (P2Coverage::Vacuous, None);
    }
    let samples = match mode {
        P2Mode::Exhaustive if total <= P2_EXHAUSTIVE_LIMIT => None,
        P2Mode::Exhaustive => Some(P2_DEFAULT_SAMPLES),
        P2Mode::Sampled { samples } => Some(samples.max(1)),
    };
    let mut counts = Vec::with_capacity(n);
    let mut worst = f64::INFINITY;
    let mut q = Vec::with_capacity(h);

    match samples {
        None => {
            let mut subset: Vec<usize> = (0..h).collect();
            loop {
                let mut pick = vec![0usize; h];
                loop {
                    q.clear();
                    q.extend(subset.iter().zip(&pick).map(|(&j, &i)| (j, i)));
                    worst = worst.min(transversal_cost(n, blocks, &q, c, &mut counts) - threshold);
                    if !advance_radix(&mut pick, h) {
                        break;
                    }
                }
                if !advance_combination(&mut subset, beta) {
                    break;
                }
            }
            (P2Coverage::Exhaustive, Some(worst))
        }
        Some(m) => {
            for _ in 0..m {
                let subset = index::sample(rng, beta, h);
                q.clear();
                q.extend(subset.iter().map(|j| (j, rng.gen_range(0..h))));
                worst = worst.min(transversal_cost(n, blocks, &q, c, &mut counts) - threshold);
            }
            (P2Coverage::Sampled { samples: m }, Some(worst))
        }
    }
}

fn advance_radix(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

// Next h-subset of 0..beta in lexicographic order.
fn advance_combination(subset: &mut [usize], beta: usize) -> bool {
    let h = subset.len();
    for pos in (0..h).rev() {
        if subset[pos] < beta - h + pos {
            subset[pos] += 1;
            for next in pos + 1..h {
                subset[next] = subset[next - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Random construction, retried until P1 holds and the P2 margin is non-negative.
pub fn build_partitioning_system(
    params: PartitionParams,
    c: &[f64],
    seed: u64,
    mode: P2Mode,
) -> Result<PartitioningSystem> {
    params.validate()?;
    check_cost_table(c, params.h)?;
    let expectation = binomial_expectation(c, params.h, params.k)?;
    let p2_threshold = (expectation - params.eta) * params.n as f64;
    let n_threshold = params.n_threshold(c);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_margin = f64::NEG_INFINITY;

    for attempt in 1..=MAX_CONSTRUCTION_ATTEMPTS {
        let blocks: Vec<Vec<Vec<usize>>> = (0..params.beta)
            .map(|_| random_partition(&params, &mut rng))
            .collect();
        let (p1_pass, p1_row_costs) = verify_p1(&params, &blocks, c);
        let (p2_coverage, p2_worst_margin) =
            verify_p2(&params, &blocks, c, p2_threshold, mode, &mut rng);
        let report = PartitionReport {
            p1_pass,
            p1_row_costs,
            p1_target: c[params.k] * params.n as f64,
            p2_coverage,
            p2_worst_margin,
            p2_threshold,
            n_threshold,
            attempts: attempt,
        };
        if report.pass() {
            return Ok(PartitioningSystem {
                params,
                blocks,
                report,
            });
        }
        best_margin = best_margin.max(p2_worst_margin.unwrap_or(f64::NEG_INFINITY));
    }
    Err(Error::ConstructionFailed {
        attempts: MAX_CONSTRUCTION_ATTEMPTS,
        best_margin,
    })
}

impl PartitioningSystem {
    /// `Σ_r c(|Q|_r)` for `Q = {P_{j,i}}` given as `(j, i)` pairs: exactly `h`
    /// blocks taken from `h` distinct partitions.
    pub fn transversal_cost(&self, q: &[(usize, usize)], c: &[f64]) -> Result<f64> {
        let p = &self.params;
        if q.len() != p.h {
            return Err(Error::InvalidParams(format!(
                "Q must contain h = {} blocks, got {}",
                p.h,
                q.len()
            )));
        }
        let rows: BTreeSet<usize> = q.iter().map(|&(j, _)| j).collect();
        if rows.len() != q.len() {
            return Err(Error::InvalidParams(
                "Q must take its blocks from distinct partitions".into(),
            ));
        }
        if let Some(&(j, i)) = q.iter().find(|&&(j, i)| j >= p.beta || i >= p.h) {
            return Err(Error::InvalidParams(format!(
                "block ({j}, {i}) out of range"
            )));
        }
        check_cost_table(c, p.h)?;
        let mut counts = Vec::new();
        Ok(transversal_cost(p.n, &self.blocks, q, c, &mut counts))
    }
}

/// Bipartite label-cover instance. Labels and rows are 0-based; `pi["v,u"]`
/// maps each of the `alpha` left labels of `v` to a right label in `0..beta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelCoverInstance {
    pub left: usize,
    pub right: usize,
    pub edges: Vec<[usize; 2]>,
    pub h: usize,
    pub alpha: usize,
    pub beta: usize,
    pub pi: BTreeMap<String, Vec<usize>>,
}

impl LabelCoverInstance {
    pub fn edge_key(v: usize, u: usize) -> String {
        format!("{v},{u}")
    }

    pub fn validate(&self) -> Result<()> {
        if self.left == 0 || self.right == 0 || self.alpha == 0 || self.beta == 0 || self.h == 0 {
            return Err(Error::Validation("label cover sizes must be >= 1".into()));
        }
        let mut seen = BTreeSet::new();
        let mut right_degree = vec![0usize; self.right];
        let mut left_degree = vec![0usize; self.left];
        for &[v, u] in &self.edges {
            if v >= self.left || u >= self.right {
                return Err(Error::Validation(format!("edge ({v}, {u}) out of range")));
            }
            if !seen.insert((v, u)) {
                return Err(Error::Validation(format!("duplicate edge ({v}, {u})")));
            }
            right_degree[u] += 1;
            left_degree[v] += 1;
            let map = self.pi.get(&Self::edge_key(v, u)).ok_or_else(|| {
                Error::Validation(format!("missing constraint for edge \"{v},{u}\""))
            })?;
            if map.len() != self.alpha {
                return Err(Error::Validation(format!(
                    "constraint \"{v},{u}\" has {} entries, alpha = {}",
                    map.len(),
                    self.alpha
                )));
            }
            if let Some(&bad) = map.iter().find(|&&j| j >= self.beta) {
                return Err(Error::Validation(format!(
                    "constraint \"{v},{u}\" maps to {bad}, beta = {}",
                    self.beta
                )));
            }
        }
        if let Some(u) = right_degree.iter().position(|&d| d != self.h) {
            return Err(Error::Validation(format!(
                "right vertex {u} has degree {}, expected h = {}",
                right_degree[u], self.h
            )));
        }
        if let Some(v) = left_degree.iter().position(|&d| d == 0) {
            return Err(Error::Validation(format!("left vertex {v} has no edges")));
        }
        Ok(())
    }

    /// Left neighbours of each right vertex, sorted.
    pub fn right_neighbours(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.right];
        for &[v, u] in &self.edges {
            nb[u].push(v);
        }
        for list in &mut nb {
            list.sort_unstable();
        }
        nb
    }

    /// Every right vertex sees all its neighbours agree on one right label.
    pub fn strongly_satisfies(&self, labels: &[usize]) -> bool {
        self.right_neighbours().iter().enumerate().all(|(u, nb)| {
            let rows: BTreeSet<usize> = nb
                .iter()
                .map(|&v| self.pi[&Self::edge_key(v, u)][labels[v]])
                .collect();
            rows.len() <= 1
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionParams {
    pub n: usize,
    pub k: usize,
    pub eta: f64,
    pub mode: P2Mode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub instance: GameInstance,
    pub system: PartitioningSystem,
}

/// One congestion game per label-cover instance: players are left vertices,
/// each right vertex `u` carries a copy of the partitioning system on
/// resources `u·n .. u·n + n`, and label `l` of player `v` selects
/// `∪_{u∈N(v)} P^u_{π_{(v,u)}(l), col(v,u)}` where `col(v,u)` is the rank of
/// `v` among the neighbours of `u`. Strategy index equals the label.
pub fn reduce_label_cover(
    lc: &LabelCoverInstance,
    params: ReductionParams,
    basis: &BasisFunction,
    seed: u64,
) -> Result<Reduction> {
    lc.validate()?;
    let ps = PartitionParams {
        n: params.n,
        beta: lc.beta,
        h: lc.h,
        k: params.k,
        eta: params.eta,
    };
    let c = cost_table(basis, lc.h);
    let system = build_partitioning_system(ps, &c, seed, params.mode)?;

    let neighbours = lc.right_neighbours();
    let mut player_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); lc.left];
    for (u, nb) in neighbours.iter().enumerate() {
        for (col, &v) in nb.iter().enumerate() {
            player_edges[v].push((u, col));
        }
    }
    let players = player_edges
        .iter()
        .enumerate()
        .map(|(v, edges)| {
            let strategies = (0..lc.alpha)
                .map(|l| {
                    let mut set: Vec<usize> = edges
                        .iter()
                        .flat_map(|&(u, col)| {
                            let row = lc.pi[&LabelCoverInstance::edge_key(v, u)][l];
                            system.blocks[row][col]
                                .iter()
                                .map(move |&e| u * params.n + e)
                        })
                        .collect();
                    set.sort_unstable();
                    set
                })
                .collect();
            Player { strategies }
        })
        .collect();
    let resources = vec![Resource { coeffs: vec![1.0] }; lc.right * params.n];
    let instance = GameInstance::new(vec![basis.clone()], resources, players)?;
    Ok(Reduction { instance, system })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomInstanceParams {
    pub players: usize,
    pub resources: usize,
    pub basis: Vec<BasisFunction>,
    /// Inclusive range of strategies per player.
    pub strategy_count: (usize, usize),
    /// Inclusive range of resources per strategy (clipped to the resource count).
    pub strategy_size: (usize, usize),
    /// Range for each coefficient `α_j^r`.
    pub coeff_range: (f64, f64),
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k as u128).fold(1u128, |acc, t| acc.saturating_mul(n as u128 - t) / (t + 1))
}

/// Deterministic per seed. Strategies are distinct per player and every
/// resource is used by some strategy; covering an unused resource may enlarge
/// a strategy past the size range.
pub fn random_instance(params: &RandomInstanceParams, seed: u64) -> Result<GameInstance> {
    let m = params.resources;
    let (cmin, cmax) = params.strategy_count;
    let (smin, smax) = params.strategy_size;
    let (lo, hi) = params.coeff_range;
    if params.players == 0 || m == 0 || params.basis.is_empty() {
        return Err(Error::InvalidParams(
            "players, resources and basis must be nonempty".into(),
        ));
    }
    if cmin == 0 || cmin > cmax || smin == 0 || smin > smax {
        return Err(Error::InvalidParams(
            "strategy ranges must be nonempty and start at >= 1".into(),
        ));
    }
    if smin > m {
        return Err(Error::InfeasibleParams(format!(
            "strategy size {smin} exceeds {m} resources"
        )));
    }
    if !(lo >= 0.0 && hi > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "coefficient range [{lo}, {hi}] invalid"
        )));
    }
    let smax = smax.min(m);
    let available: u128 = (smin..=smax).map(|s| binomial(m, s)).sum();
    if cmax as u128 > available {
        return Err(Error::InfeasibleParams(format!(
            "{cmax} distinct strategies requested, only {available} subsets of {m} resources have size {smin}..={smax}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let resources: Vec<Resource> = (0..m)
        .map(|_| Resource {
            coeffs: params
                .basis
                .iter()
                .map(|_| rng.gen_range(lo..=hi))
                .collect(),
        })
        .collect();

    let mut strategies: Vec<Vec<Vec<usize>>> = Vec::with_capacity(params.players);
    for _ in 0..params.players {
        let count = rng.gen_range(cmin..=cmax);
        let mut mine: Vec<Vec<usize>> = Vec::with_capacity(count);
        let mut tries = 0usize;
        while mine.len() < count {
            tries += 1;
            if tries > 100_000 {
                return Err(Error::InfeasibleParams(
                    "could not draw distinct strategies".into(),
                ));
            }
            let size = rng.gen_range(smin..=smax);
            let mut s: Vec<usize> = index::sample(&mut rng, m, size).into_vec();
            s.sort_unstable();
            if !mine.contains(&s) {
                mine.push(s);
            }
        }
        strategies.push(mine);
    }

    let mut used = vec![false; m];
    for s in strategies.iter().flatten().flatten() {
        used[*s] = true;
    }
    for r in (0..m).filter(|&r| !used[r]) {
        let mut slots: Vec<(usize, usize)> = strategies
            .iter()
            .enumerate()
            .flat_map(|(i, ss)| (0..ss.len()).map(move |k| (i, k)))
            .collect();
        slots.shuffle(&mut rng);
        let slot = slots.into_iter().find(|&(i, k)| {
            let mut grown = strategies[i][k].clone();
            grown.push(r);
            grown.sort_unstable();
            !strategies[i].contains(&grown)
        });
        let (i, k) = slot.ok_or_else(|| {
            Error::InfeasibleParams(format!("resource {r} cannot be added to any strategy"))
        })?;
        strategies[i][k].push(r);
        strategies[i][k].sort_unstable();
    }

    let players = strategies
        .into_iter()
        .map(|strategies| Player { strategies })
        .collect();
    GameInstance::new(params.basis.clone(), resources, players)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_cost(h: usize) -> Vec<f64> {
        (0..=h).map(|x| (x * x) as f64).collect()
    }

    #[test]
    fn params_validation() {
        let ok = PartitionParams {
            n: 120,
            beta: 4,
            h: 3,
            k: 2,
            eta: 0.9,
        };
        assert!(ok.validate().is_ok());
        assert!(PartitionParams { n: 10, ..ok }.validate().is_err());
        assert!(PartitionParams { k: 4, ..ok }.validate().is_err());
        assert!(PartitionParams { eta: 1.0, ..ok }.validate().is_err());
        assert_eq!(ok.transversal_count(), 4 * 27);
        assert_eq!(PartitionParams { beta: 2, ..ok }.transversal_count(), 0);
    }

    #[test]
    fn full_cover_when_k_equals_h() {
        let params = PartitionParams {
            n: 6,
            beta: 3,
            h: 3,
            k: 3,
            eta: 0.5,
        };
        let c = quadratic_cost(3);
        let ps = build_partitioning_system(params, &c, 1, P2Mode::Exhaustive).unwrap();
        for row in &ps.blocks {
            for block in row {
                assert_eq!(block, &(0..6).collect::<Vec<_>>());
            }
        }
        assert!(ps.report.p1_pass);
        assert_eq!(ps.report.p1_target, 9.0 * 6.0);
        assert!(ps.report.p1_row_costs.iter().all(|&x| x == 54.0));
    }

    #[test]
    fn desk_scale_system() {
        let params = PartitionParams {
            n: 120,
            beta: 4,
            h: 3,
            k: 2,
            eta: 0.9,
        };
        let c = quadratic_cost(3);
        let ps = build_partitioning_system(params, &c, 0, P2Mode::Exhaustive).unwrap();
        assert!(ps.report.p1_pass);
        assert_eq!(ps.report.p2_coverage, P2Coverage::Exhaustive);
        assert!(ps.report.p2_worst_margin.unwrap() >= 0.0);
        assert!(ps.report.n_threshold < 120.0);
        for row in &ps.blocks {
            assert_eq!(row.len(), 3);
            assert!(row.iter().all(|b| b.len() == 80));
        }
    }

    #[test]
    fn sampled_mode_is_flagged() {
        let params = PartitionParams {
            n: 60,
            beta: 4,
            h: 3,
            k: 1,
            eta: 0.5,
        };
        let c = quadratic_cost(3);
        let ps = build_partitioning_system(params, &c, 5, P2Mode::Sampled { samples: 50 }).unwrap();
        assert_eq!(ps.report.p2_coverage, P2Coverage::Sampled { samples: 50 });
    }

    #[test]
    fn transversal_shape_is_checked() {
        let params = PartitionParams {
            n: 12,
            beta: 4,
            h: 3,
            k: 1,
            eta: 0.9,
        };
        let c = quadratic_cost(3);
        let ps = build_partitioning_system(params, &c, 2, P2Mode::Exhaustive).unwrap();
        // a full row is not a transversal
        assert!(ps.transversal_cost(&[(0, 0), (0, 1), (0, 2)], &c).is_err());
        assert!(ps.transversal_cost(&[(0, 0), (1, 1)], &c).is_err());
        assert!(ps.transversal_cost(&[(0, 0), (1, 1), (9, 0)], &c).is_err());
        let cost = ps.transversal_cost(&[(0, 0), (1, 1), (2, 2)], &c).unwrap();
        assert!(cost >= 12.0);
    }

    #[test]
    fn combinations_enumerate_all_subsets() {
        let mut subset = vec![0, 1];
        let mut all = vec![subset.clone()];
        while advance_combination(&mut subset, 4) {
            all.push(subset.clone());
        }
        assert_eq!(all.len(), 6);
        assert_eq!(all.last().unwrap(), &vec![2, 3]);
    }

    fn single_edge_cover() -> LabelCoverInstance {
        LabelCoverInstance {
            left: 1,
            right: 1,
            edges: vec![[0, 0]],
            h: 1,
            alpha: 1,
            beta: 1,
            pi: BTreeMap::from([("0,0".to_string(), vec![0])]),
        }
    }

    #[test]
    fn single_player_reduction() {
        let lc = single_edge_cover();
        let params = ReductionParams {
            n: 4,
            k: 1,
            eta: 0.5,
            mode: P2Mode::Exhaustive,
        };
        let red =
            reduce_label_cover(&lc, params, &BasisFunction::monomial(1.0).unwrap(), 0).unwrap();
        assert_eq!(red.instance.num_players(), 1);
        assert_eq!(red.instance.strategies(0).len(), 1);
        assert_eq!(red.instance.strategies(0)[0], red.system.blocks[0][0]);
    }

    #[test]
    fn two_labels_two_neighbours() {
        // left vertex 0 and two right vertices; each right vertex needs h = 2 neighbours
        let lc = LabelCoverInstance {
            left: 2,
            right: 2,
            edges: vec![[0, 0], [1, 0], [0, 1], [1, 1]],
            h: 2,
            alpha: 2,
            beta: 2,
            pi: BTreeMap::from([
                ("0,0".to_string(), vec![0, 1]),
                ("0,1".to_string(), vec![1, 0]),
                ("1,0".to_string(), vec![0, 1]),
                ("1,1".to_string(), vec![1, 0]),
            ]),
        };
        let params = ReductionParams {
            n: 4,
            k: 1,
            eta: 0.5,
            mode: P2Mode::Exhaustive,
        };
        let red =
            reduce_label_cover(&lc, params, &BasisFunction::monomial(1.0).unwrap(), 3).unwrap();
        let g = &red.instance;
        assert_eq!(g.num_players(), 2);
        assert_eq!(g.num_resources(), 2 * 4);
        let blocks = &red.system.blocks;
        let expected: Vec<usize> = blocks[0][0]
            .iter()
            .copied()
            .chain(blocks[1][0].iter().map(|e| e + 4))
            .collect();
        assert_eq!(g.strategies(0)[0], expected);
        let expected: Vec<usize> = blocks[1][0]
            .iter()
            .copied()
            .chain(blocks[0][0].iter().map(|e| e + 4))
            .collect();
        assert_eq!(g.strategies(0)[1], expected);
        for s in g.strategies(0) {
            assert_eq!(s.len(), 2 * params.k * params.n / 2);
        }
    }

    #[test]
    fn label_cover_validation() {
        let mut lc = single_edge_cover();
        lc.h = 2;
        assert!(lc.validate().is_err());
        let mut lc = single_edge_cover();
        lc.pi.insert("0,0".into(), vec![3]);
        assert!(lc.validate().is_err());
        let mut lc = single_edge_cover();
        lc.pi.clear();
        assert!(lc.validate().is_err());
    }

    fn small_params() -> RandomInstanceParams {
        RandomInstanceParams {
            players: 3,
            resources: 3,
            basis: vec![BasisFunction::monomial(1.0).unwrap()],
            strategy_count: (1, 3),
            strategy_size: (1, 2),
            coeff_range: (0.5, 2.0),
        }
    }

    #[test]
    fn random_instance_is_reproducible() {
        let a = random_instance(&small_params(), 7).unwrap();
        let b = random_instance(&small_params(), 7).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn singleton_two_by_two_family() {
        let params = RandomInstanceParams {
            players: 2,
            resources: 2,
            strategy_count: (2, 2),
            strategy_size: (1, 1),
            ..small_params()
        };
        let g = random_instance(&params, 0).unwrap();
        for i in 0..2 {
            let mut s = g.strategies(i).to_vec();
            s.sort();
            assert_eq!(s, vec![vec![0], vec![1]]);
        }
    }

    #[test]
    fn infeasible_strategy_demand() {
        let params = RandomInstanceParams {
            resources: 2,
            strategy_count: (4, 4),
            strategy_size: (1, 2),
            ..small_params()
        };
        assert!(matches!(
            random_instance(&params, 0),
            Err(Error::InfeasibleParams(_))
        ));
    }

    #[test]
    fn generated_instances_cover_resources() {
        for seed in 0..1000 {
            let g = random_instance(&small_params(), seed).unwrap();
            let mut used = vec![false; g.num_resources()];
            for p in g.players() {
                for s in &p.strategies {
                    for &r in s {
                        used[r] = true;
                    }
                }
                let distinct: BTreeSet<&Vec<usize>> = p.strategies.iter().collect();
                assert_eq!(distinct.len(), p.strategies.len());
            }
            assert!(used.iter().all(|&u| u));
            let text = serde_json::to_string(&g).unwrap();
            assert!(serde_json::from_str::<GameInstance>(&text).is_ok());
        }
    }
}
