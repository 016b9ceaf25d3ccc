//! The parameterised taxation mechanism.
//!
//! For a basis `b` with Poisson kernel `p`, the modified cost generator is
//!
//! ```text
//! f(x, v) = (x−1)!/v^x · Σ_{i=0}^{x−1} (p(v) − c(i)) · v^i / i!,   c(i) = i·b(i)
//! ```
//!
//! with `f(0, v) = 0` and `f(x, 0) = b(x)`. A resource with cost
//! `Σ_j α_j b_j` and parameter `v_r` is taxed `τ_r(x) = Σ_j α_j (f_j(x, v_r) − b_j(x))`.
//!
//! Because `Σ_{i≥0} (p(v) − c(i)) v^i/i! = 0`, the same value equals the tail
//! form `(x−1)!/v^x · Σ_{i≥x} (c(i) − p(v)) v^i/i!`. The head sum is used for
//! `x ≤ v` and the tail sum for `x > v`; each is free of cancellation in its range.

use serde::{Deserialize, Serialize};

use crate::basis::BasisFunction;
use crate::error::{Error, Result};
use crate::game::{GameInstance, ResourceTax, TaxProfile};
use crate::kernel::{poisson_kernel, KernelConfig};

/// Below this parameter `f(x, v)` is replaced by its `v → 0` limit `b(x)`.
pub const V_FLOOR: f64 = 1e-8;

/// Default absolute audit tolerance, scaled by `max(1, p(v))`.
pub const DEFAULT_AUDIT_TOL: f64 = 1e-7;

/// `f(x, v)` given a precomputed `p = p(v)`.
pub fn f_value_with_kernel(
    b: &BasisFunction,
    x: usize,
    v: f64,
    p: f64,
    cfg: &KernelConfig,
) -> Result<f64> {
    if x == 0 {
        return Ok(0.0);
    }
    if v < V_FLOOR {
        return Ok(b.value(x));
    }
    let value = if x as f64 <= v {
        head_sum(b, x, v, p)
    } else {
        tail_sum(b, x, v, p, cfg)?
    };
    if !value.is_finite() {
        return Err(Error::Overflow { x, v });
    }
    Ok(value)
}

pub fn f_value(b: &BasisFunction, x: usize, v: f64, cfg: &KernelConfig) -> Result<f64> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidParams(format!(
            "tax parameter must be finite and >= 0, got {v}"
        )));
    }
    if x == 0 {
        return Ok(0.0);
    }
    if v < V_FLOOR {
        return Ok(b.value(x));
    }
    let p = poisson_kernel(b, v, cfg)?;
    f_value_with_kernel(b, x, v, p, cfg)
}

// Σ_{i<x} (p − c(i)) · (x−1)!/(i!·v^{x−i}); the weight for i−1 is weight(i)·i/v.
fn head_sum(b: &BasisFunction, x: usize, v: f64, p: f64) -> f64 {
    let mut weight = 1.0 / v;
    let mut sum = 0.0;
    for i in (0..x).rev() {
        sum += (p - b.cost(i)) * weight;
        weight *= i as f64 / v;
    }
    sum
}

// Σ_{i≥x} (c(i) − p) · (x−1)!·v^{i−x}/i!; the weight for i+1 is weight(i)·v/(i+1).
fn tail_sum(b: &BasisFunction, x: usize, v: f64, p: f64, cfg: &KernelConfig) -> Result<f64> {
    let mut weight = 1.0 / x as f64;
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut i = x;
    loop {
        let excess = b.cost(i) - p;
        let t = excess * weight;
        sum += t;
        if !sum.is_finite() {
            return Err(Error::Overflow { x, v });
        }
        if i > x && excess >= 0.0 && t <= prev && t < cfg.tol_tail * (sum.abs() + 1.0) {
            return Ok(sum);
        }
        if i - x >= cfg.i_max {
            return Err(Error::NonConvergent { v, terms: i - x });
        }
        if excess >= 0.0 {
            prev = t;
        }
        i += 1;
        weight *= v / i as f64;
    }
}

/// Tabulates `τ_r` and `ℓ̄_r` on `x = 0..=N` for the parameter vector `v`.
pub fn build_tax_profile(
    instance: &GameInstance,
    v: &[f64],
    cfg: &KernelConfig,
) -> Result<TaxProfile> {
    let m = instance.num_resources();
    if v.len() != m {
        return Err(Error::Validation(format!(
            "parameter vector has {} entries for {m} resources",
            v.len()
        )));
    }
    let n = instance.num_players();
    let basis = instance.basis();
    let mut resources = Vec::with_capacity(m);
    for (r, (res, &v_r)) in instance.resources().iter().zip(v).enumerate() {
        let build = || -> Result<ResourceTax> {
            if !v_r.is_finite() || v_r < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "tax parameter must be finite and >= 0, got {v_r}"
                )));
            }
            let mut tau = vec![0.0; n + 1];
            for (b, &alpha) in basis.iter().zip(&res.coeffs) {
                if alpha == 0.0 || v_r < V_FLOOR {
                    continue;
                }
                let p = poisson_kernel(b, v_r, cfg)?;
                for (x, t) in tau.iter_mut().enumerate().skip(1) {
                    *t += alpha * (f_value_with_kernel(b, x, v_r, p, cfg)? - b.value(x));
                }
            }
            let ell_bar = tau
                .iter()
                .enumerate()
                .map(|(x, t)| instance.resource_cost(r, x) + t)
                .collect();
            Ok(ResourceTax {
                v: v_r,
                tau,
                ell_bar,
            })
        };
        resources.push(build().map_err(|e| e.at_resource(r))?);
    }
    Ok(TaxProfile {
        resources,
        n_cap: n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceAudit {
    /// `max_{j,x} |x b_j(x) − x f_j(x,v) + v f_j(x+1,v) − p_j(v)| / max(1, p_j(v))`.
    pub max_recursion_residual: f64,
    /// `min_{j,x} f_j(x+1, v) − f_j(x, v)`.
    pub min_monotonicity_gap: f64,
    /// `min_x τ_r(x)`.
    pub min_tax: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaxAudit {
    pub resources: Vec<ResourceAudit>,
    pub tol: f64,
    pub pass: bool,
}

/// Checks the recursion, monotonicity and non-negativity properties the
/// price-of-anarchy argument relies on. Failures are reported, not raised.
pub fn audit_taxes(
    instance: &GameInstance,
    taxes: &TaxProfile,
    tol: f64,
    cfg: &KernelConfig,
) -> Result<TaxAudit> {
    instance.validate_taxes(taxes)?;
    let n = taxes.n_cap;
    let mut resources = Vec::with_capacity(taxes.resources.len());
    for (r, (res, tax)) in instance
        .resources()
        .iter()
        .zip(&taxes.resources)
        .enumerate()
    {
        let v = tax.v;
        let mut max_residual = 0.0f64;
        let mut min_gap = f64::INFINITY;
        for (b, &alpha) in instance.basis().iter().zip(&res.coeffs) {
            if alpha == 0.0 {
                continue;
            }
            let p = poisson_kernel(b, v, cfg).map_err(|e| e.at_resource(r))?;
            let fs = (0..=n)
                .map(|x| f_value_with_kernel(b, x, v, p, cfg))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.at_resource(r))?;
            let scale = p.max(1.0);
            for x in 0..n {
                let xf = x as f64;
                let residual = (xf * b.value(x) - xf * fs[x] + v * fs[x + 1] - p).abs();
                // below the floor f = b exactly and the recursion degenerates to c(x) − x b(x) = 0
                let residual = if v < V_FLOOR { 0.0 } else { residual };
                max_residual = max_residual.max(residual / scale);
                min_gap = min_gap.min(fs[x + 1] - fs[x]);
            }
        }
        let min_tax = tax.tau.iter().copied().fold(f64::INFINITY, f64::min);
        resources.push(ResourceAudit {
            max_recursion_residual: max_residual,
            min_monotonicity_gap: if min_gap.is_finite() { min_gap } else { 0.0 },
            min_tax,
        });
    }
    let pass = resources.iter().all(|a| {
        a.max_recursion_residual <= tol && a.min_monotonicity_gap >= -tol && a.min_tax >= -tol
    });
    Ok(TaxAudit {
        resources,
        tol,
        pass,
    })
}
