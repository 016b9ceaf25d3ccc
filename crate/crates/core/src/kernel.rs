//! Poisson-ratio analysis of a basis function.
//!
//! The central quantity is the Poisson kernel `p(v) = E_{P~Poi(v)}[P·b(P)]`,
//! from which the optimal price-of-anarchy factor
//! `ρ_b = sup_{x∈ℕ} p(x) / (x·b(x))` follows. For monomials `ρ_b` is a
//! (fractional) Bell number; `μ_b` is the weaker factor obtained by scaling a
//! `Poi(1)` variable instead.

use serde::{Deserialize, Serialize};

use crate::basis::BasisFunction;
use crate::error::{Error, Result};

/// Truncation control for the infinite Poisson sums.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub tol_tail: f64,
    pub i_max: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            tol_tail: 1e-15,
            i_max: 10_000,
        }
    }
}

impl KernelConfig {
    pub fn new(tol_tail: f64, i_max: usize) -> Result<Self> {
        let cfg = KernelConfig { tol_tail, i_max };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol_tail > 0.0 && self.tol_tail < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "tol_tail must lie in (0, 1), got {}",
                self.tol_tail
            )));
        }
        if self.i_max < 64 {
            return Err(Error::InvalidConfig(format!(
                "i_max must be >= 64, got {}",
                self.i_max
            )));
        }
        Ok(())
    }
}

/// `ln(n!)`; exact summation for small `n`, Stirling series beyond.
pub(crate) fn ln_factorial(n: usize) -> f64 {
    if n < 128 {
        (2..=n).map(|i| (i as f64).ln()).sum()
    } else {
        let x = n as f64;
        let x2 = x * x;
        x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x * x2)
            + 1.0 / (1260.0 * x * x2 * x2)
    }
}

/// `E_{P~Poi(v)}[g(P)]` for non-negative, non-decreasing `g`.
///
/// Weights are taken relative to the mode and normalised by their sum. A sweep
/// stops once its terms are decreasing and both the latest weight and term are
/// below `tol_tail` relative to the running sums.
pub(crate) fn poisson_expectation<G>(g: G, v: f64, cfg: &KernelConfig) -> Result<f64>
where
    G: Fn(usize) -> f64,
{
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidParams(format!(
            "poisson mean must be finite and >= 0, got {v}"
        )));
    }
    if v == 0.0 {
        return Ok(g(0));
    }
    let mode = v.floor() as usize;
    let tol = cfg.tol_tail;

    let mut sum = 0.0;
    let mut mass = 0.0;
    let mut terms = 0usize;
    let non_convergent = |terms| Error::NonConvergent { v, terms };

    let mut w = 1.0;
    let mut i = mode;
    let mut prev = f64::INFINITY;
    loop {
        let t = w * g(i);
        terms += 1;
        sum += t;
        mass += w;
        if !sum.is_finite() {
            return Err(non_convergent(terms));
        }
        if i > mode && t <= prev && t < tol * (sum + mass) && w < tol * mass {
            break;
        }
        if terms >= cfg.i_max {
            return Err(non_convergent(terms));
        }
        prev = t;
        i += 1;
        w *= v / i as f64;
    }

    let mut w = 1.0;
    for i in (0..mode).rev() {
        w *= (i + 1) as f64 / v;
        let t = w * g(i);
        terms += 1;
        sum += t;
        mass += w;
        if t < tol * (sum + mass) && w < tol * mass {
            break;
        }
        if terms >= cfg.i_max {
            return Err(non_convergent(terms));
        }
    }
    let value = sum / mass;
    if !value.is_finite() {
        return Err(non_convergent(terms));
    }
    Ok(value)
}

/// `p(v) = E_{P~Poi(v)}[P·b(P)]`.
pub fn poisson_kernel(b: &BasisFunction, v: f64, cfg: &KernelConfig) -> Result<f64> {
    poisson_expectation(|i| b.cost(i), v, cfg)
}

/// `p'(v) = E_{P~Poi(v)}[c(P+1) − c(P)]` with `c(x) = x·b(x)`.
pub fn poisson_kernel_derivative(b: &BasisFunction, v: f64, cfg: &KernelConfig) -> Result<f64> {
    poisson_expectation(|i| b.cost(i + 1) - b.cost(i), v, cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSample {
    pub x: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoReport {
    /// `None` when the kernel diverged, i.e. `ρ_b = ∞`.
    pub rho: Option<f64>,
    pub argmax: usize,
    pub x_max: usize,
    pub samples: Vec<RatioSample>,
    pub infinite: bool,
    /// The ratio was still rising when the scan hit `x_max`.
    pub tail_increasing: bool,
}

impl RhoReport {
    pub fn value(&self) -> f64 {
        self.rho.unwrap_or(f64::INFINITY)
    }
}

/// Consecutive decreases after which the `ρ_b` scan stops.
const RHO_DECREASING_RUN: usize = 50;

/// Scans `p(x)/(x·b(x))` over `x = 1..=x_max`.
pub fn rho_factor(b: &BasisFunction, x_max: usize, cfg: &KernelConfig) -> RhoReport {
    let x_max = x_max.max(1);
    let mut samples = Vec::new();
    let mut infinite = false;
    let mut decreasing_run = 0;
    let mut stopped_early = false;

    for x in 1..=x_max {
        let ratio = match poisson_kernel(b, x as f64, cfg) {
            Ok(p) => p / b.cost(x),
            Err(_) => {
                infinite = true;
                break;
            }
        };
        if !ratio.is_finite() {
            infinite = true;
            break;
        }
        if let Some(last) = samples.last().map(|s: &RatioSample| s.ratio) {
            if ratio < last {
                decreasing_run += 1;
            } else {
                decreasing_run = 0;
            }
        }
        samples.push(RatioSample { x, ratio });
        if decreasing_run >= RHO_DECREASING_RUN {
            stopped_early = true;
            break;
        }
    }

    let (argmax, best) = samples
        .iter()
        .fold((1, f64::NEG_INFINITY), |(ax, best), s| {
            if s.ratio > best {
                (s.x, s.ratio)
            } else {
                (ax, best)
            }
        });
    let tail_increasing = !infinite
        && !stopped_early
        && samples.len() >= 2
        && samples[samples.len() - 1].ratio > samples[samples.len() - 2].ratio;

    RhoReport {
        rho: if infinite || samples.is_empty() {
            None
        } else {
            Some(best)
        },
        argmax,
        x_max,
        samples,
        infinite: infinite || best == f64::NEG_INFINITY,
        tail_increasing,
    }
}

/// Dobiński sum `(1/e) Σ_i i^{d+1}/i!`; the `(d+1)`'st Bell number for integer `d`.
pub fn bell_fractional(d: f64) -> f64 {
    let exponent = d + 1.0;
    let mut sum = 0.0;
    let mut i = 1usize;
    loop {
        let t = (exponent * (i as f64).ln() - ln_factorial(i) - 1.0).exp();
        sum += t;
        if (i as f64) > exponent && t < 1e-14 * sum {
            break;
        }
        i += 1;
    }
    sum
}

const MU_GRID_POINTS: usize = 2048;
const MU_GRID_LO: f64 = 1e-3;
const MU_GRID_HI: f64 = 1e3;
const MU_BRACKET_LIMIT: f64 = 1e15;

/// `μ_b = sup_{x>0} E_{P~Poi(1)}[(xP)·b(xP)] / (x·b(x))`. Table bases are rejected.
pub fn mu_factor(b: &BasisFunction, cfg: &KernelConfig) -> Result<f64> {
    if b.is_table() {
        return Err(Error::UnsupportedBasis(
            "mu requires evaluation at real arguments; table bases are not supported".into(),
        ));
    }
    Ok(mu_supremum(|x| b.value_real(x).unwrap_or(f64::NAN), cfg))
}

/// `μ_b` for a table basis extended to the reals by linear interpolation
/// between tabulated points and the first and last segments beyond them.
pub fn mu_factor_interpolated(b: &BasisFunction, cfg: &KernelConfig) -> Result<f64> {
    let BasisFunction::Table { values } = b else {
        return mu_factor(b, cfg);
    };
    let values = values.clone();
    Ok(mu_supremum(move |x| interpolate_table(&values, x), cfg))
}

fn interpolate_table(values: &[f64], x: f64) -> f64 {
    if values.len() == 1 {
        return values[0];
    }
    let last = values.len() - 1;
    // segment k joins (k+1, values[k]) and (k+2, values[k+1])
    let k = ((x - 1.0).floor().max(0.0) as usize).min(last - 1);
    let t = x - (k + 1) as f64;
    (values[k] + t * (values[k + 1] - values[k])).max(0.0)
}

fn mu_supremum<B: Fn(f64) -> f64>(b: B, cfg: &KernelConfig) -> f64 {
    let ratio = |x: f64| -> f64 {
        let bx = b(x);
        let g = |i: usize| {
            if i == 0 {
                0.0
            } else {
                i as f64 * b(x * i as f64) / bx
            }
        };
        match poisson_expectation(g, 1.0, cfg) {
            Ok(val) if val.is_finite() => val,
            _ => f64::INFINITY,
        }
    };

    let log_lo = MU_GRID_LO.ln();
    let step = (MU_GRID_HI.ln() - log_lo) / (MU_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..MU_GRID_POINTS)
        .map(|k| (log_lo + step * k as f64).exp())
        .collect();
    let values: Vec<f64> = grid.iter().map(|&x| ratio(x)).collect();
    if values.iter().any(|v| v.is_infinite()) {
        return f64::INFINITY;
    }
    let (best_idx, mut best) =
        values
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc },
            );

    // The supremum may only be approached at 0 or ∞; push the bracket outward.
    if best_idx == MU_GRID_POINTS - 1 {
        let mut x = MU_GRID_HI;
        while x < MU_BRACKET_LIMIT {
            x *= 10.0;
            let r = ratio(x);
            if r.is_infinite() {
                return f64::INFINITY;
            }
            if r <= best * (1.0 + 1e-13) {
                best = best.max(r);
                break;
            }
            best = r;
        }
        return best;
    }
    if best_idx == 0 {
        let mut x = MU_GRID_LO;
        while x > 1.0 / MU_BRACKET_LIMIT {
            x /= 10.0;
            let r = ratio(x);
            if r <= best * (1.0 + 1e-13) {
                best = best.max(r);
                break;
            }
            best = r;
        }
        return best;
    }

    let (lo, hi) = (grid[best_idx - 1].ln(), grid[best_idx + 1].ln());
    let refined = golden_section_max(|t| ratio(t.exp()), lo, hi, 100);
    best.max(refined)
}

fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    for _ in 0..iters {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        }
    }
    fa.max(fb)
}

/// `E_{X~Bin(h, k/h)}[c(X)]` for a cost table `c_values[x]`, `x = 0..=h`.
pub fn binomial_expectation(c_values: &[f64], h: usize, k: usize) -> Result<f64> {
    if k == 0 || k > h {
        return Err(Error::InvalidParams(format!(
            "need h >= k >= 1, got h = {h}, k = {k}"
        )));
    }
    if c_values.len() < h + 1 {
        return Err(Error::InvalidParams(format!(
            "cost table has {} entries, need h + 1 = {}",
            c_values.len(),
            h + 1
        )));
    }
    if k == h {
        return Ok(c_values[h]);
    }
    let q = k as f64 / h as f64;
    let (ln_q, ln_1q) = (q.ln(), (1.0 - q).ln());
    let ln_h = ln_factorial(h);
    Ok((0..=h)
        .map(|x| {
            let ln_pmf = ln_h - ln_factorial(x) - ln_factorial(h - x)
                + x as f64 * ln_q
                + (h - x) as f64 * ln_1q;
            ln_pmf.exp() * c_values[x]
        })
        .sum())
}

/// `c(x) = x·b(x)` tabulated on `0..=upto`.
pub fn cost_table(b: &BasisFunction, upto: usize) -> Vec<f64> {
    (0..=upto).map(|x| b.cost(x)).collect()
}
