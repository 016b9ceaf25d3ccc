//! Frank-Wolfe solver for the convex relaxation
//!
//! ```text
//! min  Σ_r Σ_j α_j^r p_j(v_r)
//! s.t. v_r = Σ_i Σ_{k: r∈a_{i,k}} y_{i,k},   y_i ∈ Δ(s_i)
//! ```
//!
//! The feasible set is a product of simplices, so the linear minimisation
//! oracle is a per-player argmin over strategies and the Frank-Wolfe gap
//! `⟨∇F(y), y − s⟩` certifies `F(y) − F* ≤ gap`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::GameInstance;
use crate::kernel::{poisson_kernel, poisson_kernel_derivative, KernelConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// `γ_t = 2/(t+2)`, falling back to a line search whenever the step would
    /// increase the objective.
    #[default]
    Classic,
    /// Exact line search along the Frank-Wolfe direction.
    LineSearch,
    /// Per-player pairwise steps (away strategy → Frank-Wolfe strategy) with
    /// exact line search, one sweep over all players per iteration.
    Pairwise,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop when `gap ≤ tol_gap·max(1, |F(y)|)`.
    pub tol_gap: f64,
    pub max_iters: usize,
    pub step_rule: StepRule,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_gap: 1e-6,
            max_iters: 10_000,
            step_rule: StepRule::Classic,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionalProfile {
    pub y: Vec<Vec<f64>>,
    pub v: Vec<f64>,
    pub objective: f64,
    pub gap: f64,
    pub iters: usize,
    #[serde(default)]
    pub objective_history: Vec<f64>,
}

/// `v_r = Σ_i Σ_{k: r∈a_{i,k}} y_{i,k}`.
pub fn fractional_loads(instance: &GameInstance, y: &[Vec<f64>]) -> Vec<f64> {
    let mut v = vec![0.0; instance.num_resources()];
    for (p, yi) in instance.players().iter().zip(y) {
        for (s, &w) in p.strategies.iter().zip(yi) {
            if w != 0.0 {
                for &r in s {
                    v[r] += w;
                }
            }
        }
    }
    v
}

pub fn check_feasible(instance: &GameInstance, y: &[Vec<f64>]) -> Result<()> {
    if y.len() != instance.num_players() {
        return Err(Error::Validation(format!(
            "profile has {} players, instance has {}",
            y.len(),
            instance.num_players()
        )));
    }
    for (i, (yi, p)) in y.iter().zip(instance.players()).enumerate() {
        if yi.len() != p.strategies.len() {
            return Err(Error::Validation(format!(
                "player {i}: {} weights for {} strategies",
                yi.len(),
                p.strategies.len()
            )));
        }
        if yi.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Validation(format!(
                "player {i}: negative or non-finite weight"
            )));
        }
        let total: f64 = yi.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "player {i}: weights sum to {total}"
            )));
        }
    }
    Ok(())
}

/// Per-resource objective `Σ_j α_j^r p_j(v)`.
fn resource_objective(
    instance: &GameInstance,
    r: usize,
    v: f64,
    cfg: &KernelConfig,
) -> Result<f64> {
    let mut total = 0.0;
    for (b, &alpha) in instance.basis().iter().zip(&instance.resources()[r].coeffs) {
        if alpha != 0.0 {
            total += alpha * poisson_kernel(b, v, cfg).map_err(|e| e.at_resource(r))?;
        }
    }
    Ok(total)
}

/// Per-resource marginal `Σ_j α_j^r p_j'(v)`.
fn resource_marginal(instance: &GameInstance, r: usize, v: f64, cfg: &KernelConfig) -> Result<f64> {
    let mut total = 0.0;
    for (b, &alpha) in instance.basis().iter().zip(&instance.resources()[r].coeffs) {
        if alpha != 0.0 {
            total += alpha * poisson_kernel_derivative(b, v, cfg).map_err(|e| e.at_resource(r))?;
        }
    }
    Ok(total)
}

fn objective_at_loads(instance: &GameInstance, v: &[f64], cfg: &KernelConfig) -> Result<f64> {
    v.iter()
        .enumerate()
        .map(|(r, &vr)| resource_objective(instance, r, vr, cfg))
        .sum()
}

fn marginals_at_loads(instance: &GameInstance, v: &[f64], cfg: &KernelConfig) -> Result<Vec<f64>> {
    v.iter()
        .enumerate()
        .map(|(r, &vr)| resource_marginal(instance, r, vr, cfg))
        .collect()
}

fn strategy_gradients(instance: &GameInstance, marginals: &[f64]) -> Vec<Vec<f64>> {
    instance
        .players()
        .iter()
        .map(|p| {
            p.strategies
                .iter()
                .map(|s| s.iter().map(|&r| marginals[r]).sum())
                .collect()
        })
        .collect()
}

/// `F(y) = Σ_r Σ_j α_j^r p_j(v_r)`.
pub fn relaxation_objective(
    instance: &GameInstance,
    y: &[Vec<f64>],
    cfg: &KernelConfig,
) -> Result<f64> {
    check_feasible(instance, y)?;
    objective_at_loads(instance, &fractional_loads(instance, y), cfg)
}

/// `∂F/∂y_{i,k} = Σ_{r∈a_{i,k}} Σ_j α_j^r p_j'(v_r)`.
pub fn relaxation_gradient(
    instance: &GameInstance,
    y: &[Vec<f64>],
    cfg: &KernelConfig,
) -> Result<Vec<Vec<f64>>> {
    check_feasible(instance, y)?;
    let marginals = marginals_at_loads(instance, &fractional_loads(instance, y), cfg)?;
    Ok(strategy_gradients(instance, &marginals))
}

// Lowest-index argmin.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &g) in values.iter().enumerate() {
        if g < values[best] {
            best = k;
        }
    }
    best
}

fn fw_gap(y: &[Vec<f64>], grads: &[Vec<f64>]) -> f64 {
    y.iter()
        .zip(grads)
        .map(|(yi, gi)| {
            let inner: f64 = yi.iter().zip(gi).map(|(w, g)| w * g).sum();
            (inner - gi[argmin(gi)]).max(0.0)
        })
        .sum()
}

/// Frank-Wolfe gap `⟨∇F(y), y − s⟩` with `s` the linear-oracle vertex.
pub fn duality_gap(instance: &GameInstance, y: &[Vec<f64>], cfg: &KernelConfig) -> Result<f64> {
    let grads = relaxation_gradient(instance, y, cfg)?;
    Ok(fw_gap(y, &grads))
}

/// Minimises the convex `φ(γ) = F(v + γ·dv)` on `[0, γ_max]` by bisection on `φ'`.
fn line_search(
    instance: &GameInstance,
    v: &[f64],
    dv: &[f64],
    gamma_max: f64,
    cfg: &KernelConfig,
) -> Result<f64> {
    let slope = |gamma: f64| -> Result<f64> {
        let mut total = 0.0;
        for (r, (&vr, &d)) in v.iter().zip(dv).enumerate() {
            if d != 0.0 {
                let at = (vr + gamma * d).max(0.0);
                total += d * resource_marginal(instance, r, at, cfg)?;
            }
        }
        Ok(total)
    };
    if slope(0.0)? >= 0.0 {
        return Ok(0.0);
    }
    if slope(gamma_max)? <= 0.0 {
        return Ok(gamma_max);
    }
    let (mut lo, mut hi) = (0.0, gamma_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(lo)
}

fn vertex_loads(instance: &GameInstance, vertex: &[usize]) -> Vec<f64> {
    instance
        .loads_unchecked(vertex)
        .into_iter()
        .map(|x| x as f64)
        .collect()
}

fn renormalize(y: &mut [Vec<f64>]) {
    for yi in y.iter_mut() {
        let total: f64 = yi.iter().sum();
        for w in yi.iter_mut() {
            *w /= total;
        }
    }
}

/// Solves the relaxation from the uniform profile `y_{i,k} = 1/s_i`.
pub fn solve_relaxation(
    instance: &GameInstance,
    opts: &SolverOptions,
    cfg: &KernelConfig,
) -> Result<FractionalProfile> {
    if opts.tol_gap.is_nan() || opts.tol_gap <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "tol_gap must be > 0, got {}",
            opts.tol_gap
        )));
    }
    cfg.validate()?;

    let mut y: Vec<Vec<f64>> = instance
        .players()
        .iter()
        .map(|p| vec![1.0 / p.strategies.len() as f64; p.strategies.len()])
        .collect();
    let mut history = Vec::new();
    let mut t = 0usize;

    loop {
        let v = fractional_loads(instance, &y);
        let objective = objective_at_loads(instance, &v, cfg)?;
        history.push(objective);
        let marginals = marginals_at_loads(instance, &v, cfg)?;
        let grads = strategy_gradients(instance, &marginals);
        let gap = fw_gap(&y, &grads);

        let snapshot = |y: &Vec<Vec<f64>>, history: &Vec<f64>| FractionalProfile {
            y: y.clone(),
            v: v.clone(),
            objective,
            gap,
            iters: t,
            objective_history: history.clone(),
        };
        if gap <= opts.tol_gap * objective.abs().max(1.0) {
            return Ok(snapshot(&y, &history));
        }
        if t >= opts.max_iters {
            return Err(Error::MaxItersExceeded {
                best: Box::new(snapshot(&y, &history)),
            });
        }

        match opts.step_rule {
            StepRule::Classic | StepRule::LineSearch => {
                let vertex: Vec<usize> = grads.iter().map(|g| argmin(g)).collect();
                let target = vertex_loads(instance, &vertex);
                let dv: Vec<f64> = target.iter().zip(&v).map(|(s, x)| s - x).collect();
                let mut gamma = if opts.step_rule == StepRule::Classic {
                    2.0 / (t as f64 + 2.0)
                } else {
                    line_search(instance, &v, &dv, 1.0, cfg)?
                };
                if opts.step_rule == StepRule::Classic {
                    let trial: Vec<f64> = v.iter().zip(&dv).map(|(x, d)| x + gamma * d).collect();
                    if objective_at_loads(instance, &trial, cfg)? > objective {
                        gamma = line_search(instance, &v, &dv, gamma, cfg)?;
                    }
                }
                for (yi, &k) in y.iter_mut().zip(&vertex) {
                    for w in yi.iter_mut() {
                        *w *= 1.0 - gamma;
                    }
                    yi[k] += gamma;
                }
                renormalize(&mut y);
            }
            StepRule::Pairwise => {
                let mut v = v;
                let mut marginals = marginals;
                for i in 0..instance.num_players() {
                    let strategies = instance.strategies(i);
                    let g: Vec<f64> = strategies
                        .iter()
                        .map(|s| s.iter().map(|&r| marginals[r]).sum())
                        .collect();
                    let fw = argmin(&g);
                    let away = (0..g.len())
                        .filter(|&k| y[i][k] > 0.0)
                        .fold(None, |best: Option<usize>, k| match best {
                            Some(b) if g[b] >= g[k] => Some(b),
                            _ => Some(k),
                        })
                        .expect("a simplex point has nonempty support");
                    if fw == away || g[away] <= g[fw] {
                        continue;
                    }
                    let mut dv = vec![0.0; v.len()];
                    for &r in &strategies[fw] {
                        dv[r] += 1.0;
                    }
                    for &r in &strategies[away] {
                        dv[r] -= 1.0;
                    }
                    let gamma_max = y[i][away];
                    let gamma = line_search(instance, &v, &dv, gamma_max, cfg)?;
                    if gamma == 0.0 {
                        continue;
                    }
                    if gamma >= gamma_max {
                        y[i][fw] += gamma_max;
                        y[i][away] = 0.0;
                    } else {
                        y[i][fw] += gamma;
                        y[i][away] -= gamma;
                    }
                    v = fractional_loads(instance, &y);
                    for (r, &d) in dv.iter().enumerate() {
                        if d != 0.0 {
                            marginals[r] = resource_marginal(instance, r, v[r], cfg)?;
                        }
                    }
                }
            }
        }
        t += 1;
    }
}
