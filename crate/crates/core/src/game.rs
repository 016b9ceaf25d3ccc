//! Atomic congestion games and their cost accounting.

use serde::{Deserialize, Serialize};

use crate::basis::BasisFunction;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    /// `α_j^r`, one per basis function.
    pub coeffs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Player {
    /// Each strategy is a set of 0-based resource indices.
    pub strategies: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct InstanceSpec {
    basis: Vec<BasisFunction>,
    resources: Vec<Resource>,
    players: Vec<Player>,
}

/// A validated congestion game. Resource costs are `ℓ_r(x) = Σ_j α_j^r b_j(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceSpec", into = "InstanceSpec")]
pub struct GameInstance {
    basis: Vec<BasisFunction>,
    resources: Vec<Resource>,
    players: Vec<Player>,
    // ℓ_r(x) for x = 0..=N
    cost_table: Vec<Vec<f64>>,
}

impl From<GameInstance> for InstanceSpec {
    fn from(g: GameInstance) -> Self {
        InstanceSpec {
            basis: g.basis,
            resources: g.resources,
            players: g.players,
        }
    }
}

impl TryFrom<InstanceSpec> for GameInstance {
    type Error = Error;

    fn try_from(spec: InstanceSpec) -> Result<Self> {
        GameInstance::new(spec.basis, spec.resources, spec.players)
    }
}

impl GameInstance {
    pub fn new(
        basis: Vec<BasisFunction>,
        resources: Vec<Resource>,
        players: Vec<Player>,
    ) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::Validation("instance has no basis functions".into()));
        }
        for (j, b) in basis.iter().enumerate() {
            b.validate()
                .map_err(|e| Error::Validation(format!("basis {j}: {e}")))?;
        }
        if resources.is_empty() {
            return Err(Error::Validation("instance has no resources".into()));
        }
        for (r, res) in resources.iter().enumerate() {
            if res.coeffs.len() != basis.len() {
                return Err(Error::Validation(format!(
                    "resource {r}: expected {} coefficients, got {}",
                    basis.len(),
                    res.coeffs.len()
                )));
            }
            if let Some(j) = res.coeffs.iter().position(|a| !a.is_finite() || *a < 0.0) {
                return Err(Error::Validation(format!(
                    "resource {r}: coefficient {j} must be finite and >= 0, got {}",
                    res.coeffs[j]
                )));
            }
            if res.coeffs.iter().all(|&a| a == 0.0) {
                return Err(Error::Validation(format!(
                    "resource {r}: all coefficients are zero"
                )));
            }
        }
        if players.is_empty() {
            return Err(Error::Validation("instance has no players".into()));
        }
        for (i, p) in players.iter().enumerate() {
            if p.strategies.is_empty() {
                return Err(Error::Validation(format!("player {i}: no strategies")));
            }
            for (k, s) in p.strategies.iter().enumerate() {
                if s.is_empty() {
                    return Err(Error::Validation(format!(
                        "player {i}, strategy {k}: empty"
                    )));
                }
                for &r in s {
                    if r >= resources.len() {
                        return Err(Error::Validation(format!(
                            "player {i}, strategy {k}: resource {r} out of range (0..{})",
                            resources.len()
                        )));
                    }
                }
                let mut sorted = s.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != s.len() {
                    return Err(Error::Validation(format!(
                        "player {i}, strategy {k}: repeated resource"
                    )));
                }
            }
        }

        let n = players.len();
        let cost_table = resources
            .iter()
            .map(|res| {
                (0..=n)
                    .map(|x| {
                        res.coeffs
                            .iter()
                            .zip(&basis)
                            .map(|(a, b)| a * b.value(x))
                            .sum()
                    })
                    .collect()
            })
            .collect();

        Ok(GameInstance {
            basis,
            resources,
            players,
            cost_table,
        })
    }

    pub fn num_players(&self) -> usize {
        self.players.len()
    }

    pub fn num_resources(&self) -> usize {
        self.resources.len()
    }

    pub fn basis(&self) -> &[BasisFunction] {
        &self.basis
    }

    pub fn resources(&self) -> &[Resource] {
        &self.resources
    }

    pub fn players(&self) -> &[Player] {
        &self.players
    }

    pub fn strategies(&self, player: usize) -> &[Vec<usize>] {
        &self.players[player].strategies
    }

    pub fn strategy_counts(&self) -> Vec<usize> {
        self.players.iter().map(|p| p.strategies.len()).collect()
    }

    /// Size of the pure profile space `Π_i s_i` (saturating).
    pub fn profile_count(&self) -> u128 {
        self.players.iter().fold(1u128, |acc, p| {
            acc.saturating_mul(p.strategies.len() as u128)
        })
    }

    /// Indices of basis functions with a positive coefficient on some resource.
    pub fn bases_in_use(&self) -> Vec<usize> {
        (0..self.basis.len())
            .filter(|&j| self.resources.iter().any(|r| r.coeffs[j] > 0.0))
            .collect()
    }

    /// `ℓ_r(x)` for `0 ≤ x ≤ N`.
    pub fn resource_cost(&self, r: usize, x: usize) -> f64 {
        self.cost_table[r][x]
    }

    pub fn validate_allocation(&self, a: &Allocation) -> Result<()> {
        if a.choices.len() != self.players.len() {
            return Err(Error::Validation(format!(
                "allocation has {} choices for {} players",
                a.choices.len(),
                self.players.len()
            )));
        }
        for (i, (&k, p)) in a.choices.iter().zip(&self.players).enumerate() {
            if k >= p.strategies.len() {
                return Err(Error::Validation(format!(
                    "player {i}: strategy index {k} out of range (0..{})",
                    p.strategies.len()
                )));
            }
        }
        Ok(())
    }

    pub fn validate_taxes(&self, taxes: &TaxProfile) -> Result<()> {
        if taxes.resources.len() != self.resources.len() {
            return Err(Error::Validation(format!(
                "tax profile covers {} resources, instance has {}",
                taxes.resources.len(),
                self.resources.len()
            )));
        }
        if taxes.n_cap < self.players.len() {
            return Err(Error::Validation(format!(
                "tax tables stop at x = {}, instance has {} players",
                taxes.n_cap,
                self.players.len()
            )));
        }
        for (r, t) in taxes.resources.iter().enumerate() {
            if t.tau.len() != taxes.n_cap + 1 || t.ell_bar.len() != taxes.n_cap + 1 {
                return Err(Error::Validation(format!(
                    "resource {r}: tax tables must have n_cap + 1 = {} entries",
                    taxes.n_cap + 1
                )));
            }
        }
        Ok(())
    }

    /// `|a|_r` for every resource.
    pub fn loads(&self, a: &Allocation) -> Result<Vec<usize>> {
        self.validate_allocation(a)?;
        Ok(self.loads_unchecked(&a.choices))
    }

    pub(crate) fn loads_unchecked(&self, choices: &[usize]) -> Vec<usize> {
        let mut loads = vec![0usize; self.resources.len()];
        for (p, &k) in self.players.iter().zip(choices) {
            for &r in &p.strategies[k] {
                loads[r] += 1;
            }
        }
        loads
    }

    /// `SC(a) = Σ_r |a|_r · ℓ_r(|a|_r)`. Taxes never enter the social cost.
    pub fn social_cost(&self, a: &Allocation) -> Result<f64> {
        let loads = self.loads(a)?;
        Ok(self.social_cost_from_loads(&loads))
    }

    pub(crate) fn social_cost_from_loads(&self, loads: &[usize]) -> f64 {
        loads
            .iter()
            .enumerate()
            .map(|(r, &x)| x as f64 * self.cost_table[r][x])
            .sum()
    }

    /// `C_i(a) = Σ_{r∈a_i} [ℓ_r(|a|_r) + τ_r(|a|_r)]`; untaxed when `taxes` is `None`.
    pub fn player_cost(
        &self,
        taxes: Option<&TaxProfile>,
        a: &Allocation,
        player: usize,
    ) -> Result<f64> {
        if player >= self.players.len() {
            return Err(Error::Validation(format!(
                "player {player} out of range (0..{})",
                self.players.len()
            )));
        }
        if let Some(t) = taxes {
            self.validate_taxes(t)?;
        }
        let loads = self.loads(a)?;
        let costs = CostView::new(self, taxes);
        Ok(costs.strategy_cost(&self.players[player].strategies[a.choices[player]], &loads))
    }

    /// `Φ(a) = Σ_r Σ_{u=1}^{|a|_r} ℓ̄_r(u)`.
    pub fn rosenthal_potential(&self, taxes: Option<&TaxProfile>, a: &Allocation) -> Result<f64> {
        if let Some(t) = taxes {
            self.validate_taxes(t)?;
        }
        let loads = self.loads(a)?;
        Ok(CostView::new(self, taxes).potential(&loads))
    }
}

/// A pure profile: one strategy index per player.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Allocation {
    pub choices: Vec<usize>,
}

impl Allocation {
    pub fn new(choices: Vec<usize>) -> Self {
        Allocation { choices }
    }
}

impl From<Vec<usize>> for Allocation {
    fn from(choices: Vec<usize>) -> Self {
        Allocation { choices }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceTax {
    pub v: f64,
    /// `τ_r(x)` for `x = 0..=n_cap`.
    pub tau: Vec<f64>,
    /// `ℓ̄_r(x) = ℓ_r(x) + τ_r(x)` for `x = 0..=n_cap`.
    pub ell_bar: Vec<f64>,
}

/// Congestion-dependent taxes for every resource, tabulated up to `n_cap`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaxProfile {
    pub resources: Vec<ResourceTax>,
    pub n_cap: usize,
}

impl TaxProfile {
    /// The all-zero profile: `ℓ̄ = ℓ`.
    pub fn zero(instance: &GameInstance) -> Self {
        let n = instance.num_players();
        TaxProfile {
            n_cap: n,
            resources: (0..instance.num_resources())
                .map(|r| ResourceTax {
                    v: 0.0,
                    tau: vec![0.0; n + 1],
                    ell_bar: (0..=n).map(|x| instance.resource_cost(r, x)).collect(),
                })
                .collect(),
        }
    }
}

/// Player-perceived resource costs: `ℓ̄_r` when taxed, `ℓ_r` otherwise.
/// Callers validate the tax profile against the instance beforehand.
#[derive(Clone, Copy)]
pub(crate) struct CostView<'a> {
    instance: &'a GameInstance,
    taxes: Option<&'a TaxProfile>,
}

impl<'a> CostView<'a> {
    pub(crate) fn new(instance: &'a GameInstance, taxes: Option<&'a TaxProfile>) -> Self {
        CostView { instance, taxes }
    }

    #[inline]
    pub(crate) fn resource(&self, r: usize, x: usize) -> f64 {
        match self.taxes {
            Some(t) => self.instance.cost_table[r][x] + t.resources[r].tau[x],
            None => self.instance.cost_table[r][x],
        }
    }

    pub(crate) fn strategy_cost(&self, strategy: &[usize], loads: &[usize]) -> f64 {
        strategy.iter().map(|&r| self.resource(r, loads[r])).sum()
    }

    /// Cost of `strategy` for a player currently on `current`, holding others fixed.
    pub(crate) fn deviation_cost(
        &self,
        current: &[usize],
        strategy: &[usize],
        loads: &[usize],
    ) -> f64 {
        strategy
            .iter()
            .map(|&r| {
                let x = if current.contains(&r) {
                    loads[r]
                } else {
                    loads[r] + 1
                };
                self.resource(r, x)
            })
            .sum()
    }

    pub(crate) fn potential(&self, loads: &[usize]) -> f64 {
        loads
            .iter()
            .enumerate()
            .map(|(r, &x)| (1..=x).map(|u| self.resource(r, u)).sum::<f64>())
            .sum()
    }
}
