//! Best-response dynamics and multiplicative-weights play.
//!
//! Randomness comes from ChaCha8 (a counter-based stream cipher generator)
//! seeded with `seed_from_u64`, so traces are reproducible from the seed.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Allocation, CostView, GameInstance, TaxProfile};
use crate::oracle::{best_deviation, brute_force_min_sc, improves, smoothness_lhs};
use crate::relaxation::check_feasible;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrdOutcome {
    pub allocation: Allocation,
    pub steps: usize,
    /// Potential before the first move and after every accepted move.
    pub potentials: Vec<f64>,
}

fn random_profile(instance: &GameInstance, rng: &mut ChaCha8Rng) -> Vec<usize> {
    instance
        .players()
        .iter()
        .map(|p| rng.gen_range(0..p.strategies.len()))
        .collect()
}

/// Round-robin best-improvement dynamics on taxed costs.
///
/// Starts from `start`, or from a seeded uniformly random profile.
pub fn best_response_dynamics(
    instance: &GameInstance,
    taxes: Option<&TaxProfile>,
    start: Option<&Allocation>,
    seed: u64,
    max_steps: usize,
) -> Result<BrdOutcome> {
    if max_steps == 0 {
        return Err(Error::InvalidParams("max_steps must be >= 1".into()));
    }
    if let Some(t) = taxes {
        instance.validate_taxes(t)?;
    }
    let mut choices = match start {
        Some(a) => {
            instance.validate_allocation(a)?;
            a.choices.clone()
        }
        None => random_profile(instance, &mut ChaCha8Rng::seed_from_u64(seed)),
    };
    let view = CostView::new(instance, taxes);
    let mut loads = instance.loads_unchecked(&choices);
    let mut potentials = vec![view.potential(&loads)];
    let mut steps = 0usize;

    loop {
        let mut moved = false;
        for i in 0..choices.len() {
            let strategies = instance.strategies(i);
            let current = view.strategy_cost(&strategies[choices[i]], &loads);
            let (k, cost) = best_deviation(&view, instance, &choices, &loads, i);
            if k == choices[i] || !improves(cost, current) {
                continue;
            }
            if steps == max_steps {
                return Err(Error::NotConverged { steps });
            }
            for &r in &strategies[choices[i]] {
                loads[r] -= 1;
            }
            for &r in &strategies[k] {
                loads[r] += 1;
            }
            choices[i] = k;
            steps += 1;
            moved = true;
            let phi = view.potential(&loads);
            debug_assert!(
                phi < *potentials.last().unwrap(),
                "potential must drop on an improving move"
            );
            potentials.push(phi);
        }
        if !moved {
            return Ok(BrdOutcome {
                allocation: Allocation::new(choices),
                steps,
                potentials,
            });
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MwOptions {
    pub rounds: usize,
    /// Learning rate; `None` selects `sqrt(8 ln s_i / T)` per player.
    pub eta: Option<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub profile: Vec<usize>,
    pub sc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileCount {
    pub profile: Allocation,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub seed: u64,
    pub rounds: usize,
    pub eta: Vec<f64>,
    /// Loss normalisers `K_i`.
    pub normalizers: Vec<f64>,
    pub records: Vec<RoundRecord>,
    /// Realised taxed cost per player, summed over rounds.
    pub cumulative_cost: Vec<f64>,
    /// Cost each fixed strategy would have paid against the realised play of the others.
    pub strategy_cumulative_cost: Vec<Vec<f64>>,
    /// External regret `cumulative_cost_i − min_k strategy_cumulative_cost_{i,k}`.
    pub regret: Vec<f64>,
    pub best_profile: Allocation,
    pub best_sc: f64,
    /// Visit counts of pure profiles, sorted by profile.
    pub empirical: Vec<ProfileCount>,
}

impl RunTrace {
    pub fn average_regret(&self) -> Vec<f64> {
        self.regret.iter().map(|r| r / self.rounds as f64).collect()
    }

    pub fn max_average_regret(&self) -> f64 {
        self.average_regret().into_iter().fold(0.0, f64::max)
    }

    /// One JSON object per round, then a footer object.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for rec in &self.records {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        let footer = TraceFooter {
            seed: self.seed,
            rounds: self.rounds,
            eta: &self.eta,
            normalizers: &self.normalizers,
            cumulative_cost: &self.cumulative_cost,
            regret: &self.regret,
            average_regret: self.average_regret(),
            best_profile: &self.best_profile,
            best_sc: self.best_sc,
            empirical: &self.empirical,
        };
        serde_json::to_writer(&mut out, &serde_json::json!({ "footer": footer }))?;
        out.write_all(b"\n")
    }
}

#[derive(Serialize)]
struct TraceFooter<'a> {
    seed: u64,
    rounds: usize,
    eta: &'a [f64],
    normalizers: &'a [f64],
    cumulative_cost: &'a [f64],
    regret: &'a [f64],
    average_regret: Vec<f64>,
    best_profile: &'a Allocation,
    best_sc: f64,
    empirical: &'a [ProfileCount],
}

/// `K_i = max_k Σ_{r∈a_{i,k}} ℓ̄_r(N)`, an upper bound on any taxed cost of player `i`.
fn normalizers(instance: &GameInstance, view: &CostView<'_>) -> Vec<f64> {
    let n = instance.num_players();
    instance
        .players()
        .iter()
        .map(|p| {
            p.strategies
                .iter()
                .map(|s| s.iter().map(|&r| view.resource(r, n)).sum::<f64>())
                .fold(0.0, f64::max)
        })
        .collect()
}

fn sample(log_weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let top = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_weights.iter().map(|w| (w - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return k;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Full-information Hedge for every player on taxed costs.
pub fn multiplicative_weights_run(
    instance: &GameInstance,
    taxes: &TaxProfile,
    opts: &MwOptions,
) -> Result<RunTrace> {
    if opts.rounds == 0 {
        return Err(Error::InvalidParams("rounds must be >= 1".into()));
    }
    if let Some(eta) = opts.eta {
        if !eta.is_finite() || eta < 0.0 {
            return Err(Error::InvalidParams(format!(
                "eta must be finite and >= 0, got {eta}"
            )));
        }
    }
    instance.validate_taxes(taxes)?;
    let view = CostView::new(instance, Some(taxes));
    let k_norm = normalizers(instance, &view);
    if k_norm.iter().any(|k| !k.is_finite()) {
        return Err(Error::Validation("taxed costs must be finite".into()));
    }
    let t_total = opts.rounds as f64;
    let eta: Vec<f64> = instance
        .players()
        .iter()
        .map(|p| {
            opts.eta
                .unwrap_or_else(|| (8.0 * (p.strategies.len() as f64).ln() / t_total).sqrt())
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = instance.num_players();
    let mut log_w: Vec<Vec<f64>> = instance
        .players()
        .iter()
        .map(|p| vec![0.0; p.strategies.len()])
        .collect();
    let mut cumulative = vec![0.0; n];
    let mut strategy_cum: Vec<Vec<f64>> = log_w.clone();
    let mut records = Vec::with_capacity(opts.rounds);
    let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    let mut best: Option<(Vec<usize>, f64)> = None;

    for t in 0..opts.rounds {
        let choices: Vec<usize> = log_w.iter().map(|w| sample(w, &mut rng)).collect();
        let loads = instance.loads_unchecked(&choices);
        let sc = instance.social_cost_from_loads(&loads);

        for i in 0..n {
            let strategies = instance.strategies(i);
            let current = &strategies[choices[i]];
            for (k, s) in strategies.iter().enumerate() {
                let cost = if k == choices[i] {
                    view.strategy_cost(s, &loads)
                } else {
                    view.deviation_cost(current, s, &loads)
                };
                strategy_cum[i][k] += cost;
                if k == choices[i] {
                    cumulative[i] += cost;
                }
                if k_norm[i] > 0.0 {
                    log_w[i][k] -= eta[i] * cost / k_norm[i];
                }
            }
        }

        if best.as_ref().is_none_or(|(_, b)| sc < *b) {
            best = Some((choices.clone(), sc));
        }
        *counts.entry(choices.clone()).or_insert(0) += 1;
        records.push(RoundRecord {
            t,
            profile: choices,
            sc,
        });
    }

    let regret = cumulative
        .iter()
        .zip(&strategy_cum)
        .map(|(c, s)| c - s.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let (best_choices, best_sc) = best.expect("at least one round");
    Ok(RunTrace {
        seed: opts.seed,
        rounds: opts.rounds,
        eta,
        normalizers: k_norm,
        records,
        cumulative_cost: cumulative,
        strategy_cumulative_cost: strategy_cum,
        regret,
        best_profile: Allocation::new(best_choices),
        best_sc,
        empirical: counts
            .into_iter()
            .map(|(profile, count)| ProfileCount {
                profile: Allocation::new(profile),
                count,
            })
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestProfile {
    pub allocation: Allocation,
    pub sc: f64,
    pub min_sc: Option<f64>,
    pub ratio: Option<f64>,
}

/// Lowest social cost among visited profiles, compared against the exact optimum
/// when the profile space fits under `cap`.
pub fn best_profile_approximation(
    instance: &GameInstance,
    trace: &RunTrace,
    cap: u128,
) -> Result<BestProfile> {
    let best = trace
        .records
        .iter()
        .min_by(|a, b| a.sc.total_cmp(&b.sc))
        .ok_or_else(|| Error::InvalidParams("trace has no rounds".into()))?;
    let allocation = Allocation::new(best.profile.clone());
    let sc = instance.social_cost(&allocation)?;
    let min_sc = match brute_force_min_sc(instance, cap) {
        Ok((_, m)) => Some(m),
        Err(Error::TooLarge { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(BestProfile {
        allocation,
        sc,
        min_sc,
        ratio: min_sc.map(|m| sc / m),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CceReport {
    /// `E_{a~σ̂}[SC(a)]` over the empirical distribution.
    pub expected_sc: f64,
    /// Expectation of the smoothness left-hand side.
    pub expected_lhs: f64,
    pub opt_cost: f64,
    pub rho: f64,
    /// `ρ·SC(a*) − E[SC]`.
    pub slack: f64,
    /// `Σ_i regret_i / T`, which bounds `expected_lhs` from above.
    pub regret_bound: f64,
    pub pass: bool,
    pub tol: f64,
}

/// Expectation form of the smoothness chain on the empirical play distribution.
/// Passes when `ρ·SC(a*) − E[SC] ≥ −tol·SC(a*)`.
pub fn coarse_correlated_check(
    instance: &GameInstance,
    taxes: &TaxProfile,
    y: &[Vec<f64>],
    rho: f64,
    trace: &RunTrace,
    tol: f64,
    cap: u128,
) -> Result<CceReport> {
    instance.validate_taxes(taxes)?;
    check_feasible(instance, y)?;
    let (_, opt_cost) = brute_force_min_sc(instance, cap)?;
    let view = CostView::new(instance, Some(taxes));
    let total: u64 = trace.empirical.iter().map(|p| p.count).sum();
    let mut expected_sc = 0.0;
    let mut expected_lhs = 0.0;
    for entry in &trace.empirical {
        instance.validate_allocation(&entry.profile)?;
        let w = entry.count as f64 / total as f64;
        let loads = instance.loads_unchecked(&entry.profile.choices);
        expected_sc += w * instance.social_cost_from_loads(&loads);
        expected_lhs += w * smoothness_lhs(&view, instance, y, &entry.profile.choices, &loads);
    }
    let slack = rho * opt_cost - expected_sc;
    Ok(CceReport {
        expected_sc,
        expected_lhs,
        opt_cost,
        rho,
        slack,
        regret_bound: trace.regret.iter().sum::<f64>() / trace.rounds as f64,
        pass: slack >= -tol * opt_cost,
        tol,
    })
}
