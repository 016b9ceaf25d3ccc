//! Exhaustive ground truth on small instances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Allocation, CostView, GameInstance, TaxProfile};
use crate::relaxation::check_feasible;

pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Relative threshold below which a deviation does not count as an improvement.
pub const IMPROVEMENT_THRESHOLD: f64 = 1e-12;

/// Visits every pure profile in lexicographic order of the choice vector.
pub(crate) fn for_each_profile<F>(instance: &GameInstance, cap: u128, mut visit: F) -> Result<u128>
where
    F: FnMut(&[usize]),
{
    let size = instance.profile_count();
    if size > cap {
        return Err(Error::TooLarge { size, cap });
    }
    let radix = instance.strategy_counts();
    let mut choices = vec![0usize; radix.len()];
    let mut count = 0u128;
    loop {
        visit(&choices);
        count += 1;
        let mut pos = radix.len();
        loop {
            if pos == 0 {
                return Ok(count);
            }
            pos -= 1;
            choices[pos] += 1;
            if choices[pos] < radix[pos] {
                break;
            }
            choices[pos] = 0;
        }
    }
}

#[inline]
pub(crate) fn improves(candidate: f64, current: f64) -> bool {
    candidate < current - IMPROVEMENT_THRESHOLD * current.abs()
}

/// Best unilateral deviation for `player`: lowest-index minimiser over strategies,
/// with its cost. The current strategy is included.
pub(crate) fn best_deviation(
    view: &CostView<'_>,
    instance: &GameInstance,
    choices: &[usize],
    loads: &[usize],
    player: usize,
) -> (usize, f64) {
    let strategies = instance.strategies(player);
    let current = &strategies[choices[player]];
    let mut best = (0usize, f64::INFINITY);
    for (k, s) in strategies.iter().enumerate() {
        let cost = if k == choices[player] {
            view.strategy_cost(s, loads)
        } else {
            view.deviation_cost(current, s, loads)
        };
        if cost < best.1 {
            best = (k, cost);
        }
    }
    best
}

pub(crate) fn is_nash(
    view: &CostView<'_>,
    instance: &GameInstance,
    choices: &[usize],
    loads: &[usize],
) -> bool {
    (0..choices.len()).all(|i| {
        let current = view.strategy_cost(&instance.strategies(i)[choices[i]], loads);
        let (_, best) = best_deviation(view, instance, choices, loads, i);
        !improves(best, current)
    })
}

/// Whether `a` is a pure Nash equilibrium under the (optionally taxed) player costs.
pub fn is_pure_nash(
    instance: &GameInstance,
    taxes: Option<&TaxProfile>,
    a: &Allocation,
) -> Result<bool> {
    if let Some(t) = taxes {
        instance.validate_taxes(t)?;
    }
    let loads = instance.loads(a)?;
    Ok(is_nash(
        &CostView::new(instance, taxes),
        instance,
        &a.choices,
        &loads,
    ))
}

/// Exact minimiser of the social cost; ties go to the lexicographically first profile.
pub fn brute_force_min_sc(instance: &GameInstance, cap: u128) -> Result<(Allocation, f64)> {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for_each_profile(instance, cap, |choices| {
        let sc = instance.social_cost_from_loads(&instance.loads_unchecked(choices));
        if best.as_ref().is_none_or(|(_, b)| sc < *b) {
            best = Some((choices.to_vec(), sc));
        }
    })?;
    let (choices, sc) = best.expect("profile space is nonempty");
    Ok((Allocation::new(choices), sc))
}

/// All pure Nash equilibria, in lexicographic order.
pub fn enumerate_pure_nash(
    instance: &GameInstance,
    taxes: Option<&TaxProfile>,
    cap: u128,
) -> Result<Vec<Allocation>> {
    if let Some(t) = taxes {
        instance.validate_taxes(t)?;
    }
    let view = CostView::new(instance, taxes);
    let mut out = Vec::new();
    for_each_profile(instance, cap, |choices| {
        let loads = instance.loads_unchecked(choices);
        if is_nash(&view, instance, choices, &loads) {
            out.push(Allocation::new(choices.to_vec()));
        }
    })?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoaReport {
    pub min_cost: f64,
    pub min_witness: Allocation,
    pub worst_ne_cost: Option<f64>,
    pub worst_ne_witness: Option<Allocation>,
    /// `worst_ne_cost / min_cost`.
    pub poa: Option<f64>,
    pub num_pure_ne: usize,
    pub enumerated_profiles: u128,
}

/// Per-instance price of anarchy over pure equilibria. Equilibria are judged
/// on taxed costs; their social cost is always the untaxed one.
pub fn empirical_poa(
    instance: &GameInstance,
    taxes: Option<&TaxProfile>,
    cap: u128,
) -> Result<PoaReport> {
    if let Some(t) = taxes {
        instance.validate_taxes(t)?;
    }
    let view = CostView::new(instance, taxes);
    let mut min: Option<(Vec<usize>, f64)> = None;
    let mut worst: Option<(Vec<usize>, f64)> = None;
    let mut num_ne = 0usize;
    let enumerated = for_each_profile(instance, cap, |choices| {
        let loads = instance.loads_unchecked(choices);
        let sc = instance.social_cost_from_loads(&loads);
        if min.as_ref().is_none_or(|(_, b)| sc < *b) {
            min = Some((choices.to_vec(), sc));
        }
        if is_nash(&view, instance, choices, &loads) {
            num_ne += 1;
            if worst.as_ref().is_none_or(|(_, w)| sc > *w) {
                worst = Some((choices.to_vec(), sc));
            }
        }
    })?;
    let (min_choices, min_cost) = min.expect("profile space is nonempty");
    Ok(PoaReport {
        min_cost,
        min_witness: Allocation::new(min_choices),
        worst_ne_cost: worst.as_ref().map(|(_, c)| *c),
        worst_ne_witness: worst.as_ref().map(|(a, _)| Allocation::new(a.clone())),
        poa: worst.as_ref().map(|(_, c)| c / min_cost),
        num_pure_ne: num_ne,
        enumerated_profiles: enumerated,
    })
}

/// `Σ_i Σ_k y_{i,k} [C̄_i(a) − C̄_i(a'_{i,k}, a_{−i})]` for one profile.
pub(crate) fn smoothness_lhs(
    view: &CostView<'_>,
    instance: &GameInstance,
    y: &[Vec<f64>],
    choices: &[usize],
    loads: &[usize],
) -> f64 {
    let mut total = 0.0;
    for (i, yi) in y.iter().enumerate() {
        let strategies = instance.strategies(i);
        let current = &strategies[choices[i]];
        let own = view.strategy_cost(current, loads);
        for (k, &w) in yi.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let dev = if k == choices[i] {
                own
            } else {
                view.deviation_cost(current, &strategies[k], loads)
            };
            total += w * (own - dev);
        }
    }
    total
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    pub pass: bool,
    /// `min_a [LHS(a) − (SC(a) − ρ·SC(a*))]`.
    pub worst_margin: f64,
    pub witness: Allocation,
    pub opt_cost: f64,
    pub rho: f64,
}

/// Tolerance on the smoothness margin, relative to `max(1, SC(a))`.
pub const SMOOTHNESS_TOL: f64 = 1e-7;

/// Verifies `LHS(a) ≥ SC(a) − ρ·SC(a*)` on every pure profile.
pub fn check_smoothness(
    instance: &GameInstance,
    taxes: &TaxProfile,
    y: &[Vec<f64>],
    rho: f64,
    cap: u128,
) -> Result<SmoothnessReport> {
    instance.validate_taxes(taxes)?;
    check_feasible(instance, y)?;
    let (_, opt_cost) = brute_force_min_sc(instance, cap)?;
    let view = CostView::new(instance, Some(taxes));
    let mut pass = true;
    let mut worst: Option<(Vec<usize>, f64)> = None;
    for_each_profile(instance, cap, |choices| {
        let loads = instance.loads_unchecked(choices);
        let sc = instance.social_cost_from_loads(&loads);
        let lhs = smoothness_lhs(&view, instance, y, choices, &loads);
        let margin = lhs - (sc - rho * opt_cost);
        if margin < -SMOOTHNESS_TOL * sc.max(1.0) {
            pass = false;
        }
        if worst.as_ref().is_none_or(|(_, m)| margin < *m) {
            worst = Some((choices.to_vec(), margin));
        }
    })?;
    let (witness, worst_margin) = worst.expect("profile space is nonempty");
    Ok(SmoothnessReport {
        pass,
        worst_margin,
        witness: Allocation::new(witness),
        opt_cost,
        rho,
    })
}
