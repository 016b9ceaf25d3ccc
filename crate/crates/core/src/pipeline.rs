//! End-to-end workflows: basis reports and the design-and-evaluate bundle.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::basis::BasisFunction;
use crate::error::{Error, Result};
use crate::game::{GameInstance, TaxProfile};
use crate::kernel::{
    bell_fractional, mu_factor, mu_factor_interpolated, rho_factor, KernelConfig, RhoReport,
};
use crate::oracle::{
    check_smoothness, empirical_poa, PoaReport, SmoothnessReport, DEFAULT_ENUMERATION_CAP,
};
use crate::relaxation::{solve_relaxation, FractionalProfile, SolverOptions, StepRule};
use crate::tax::{audit_taxes, build_tax_profile, TaxAudit, DEFAULT_AUDIT_TOL};

pub const DEFAULT_RHO_X_MAX: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MuStatus {
    Finite,
    Infinite,
    /// Table basis without a real extension.
    Unsupported,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisReport {
    pub basis: BasisFunction,
    pub rho: RhoReport,
    pub mu: Option<f64>,
    pub mu_status: MuStatus,
    /// `B_{d+1}` (fractional for non-integer `d`) for monomial bases.
    pub bell: Option<f64>,
}

pub fn analyze_basis(
    b: &BasisFunction,
    x_max: usize,
    cfg: &KernelConfig,
    interpolate_tables: bool,
) -> Result<BasisReport> {
    b.validate()?;
    cfg.validate()?;
    let rho = rho_factor(b, x_max, cfg);
    let mu = if b.is_table() && !interpolate_tables {
        None
    } else if b.is_table() {
        Some(mu_factor_interpolated(b, cfg)?)
    } else {
        Some(mu_factor(b, cfg)?)
    };
    let (mu, mu_status) = match mu {
        None => (None, MuStatus::Unsupported),
        Some(m) if m.is_finite() => (Some(m), MuStatus::Finite),
        Some(_) => (None, MuStatus::Infinite),
    };
    let bell = match b {
        BasisFunction::Monomial { degree } => Some(bell_fractional(*degree)),
        _ => None,
    };
    Ok(BasisReport {
        basis: b.clone(),
        rho,
        mu,
        mu_status,
        bell,
    })
}

/// `(d, B_{d+1})` for `d = 0..=max_degree`.
pub fn bell_table(max_degree: usize) -> Vec<(usize, f64)> {
    (0..=max_degree)
        .map(|d| (d, bell_fractional(d as f64)))
        .collect()
}

pub fn bell_csv(rows: &[(usize, f64)]) -> String {
    let mut out = String::from("d,bell\n");
    for (d, b) in rows {
        let _ = writeln!(out, "{d},{b}");
    }
    out
}

fn csv_number(x: Option<f64>) -> String {
    match x {
        Some(v) => v.to_string(),
        None => "inf".into(),
    }
}

pub fn basis_csv(reports: &[BasisReport]) -> String {
    let mut out = String::from("basis,rho,mu\n");
    for r in reports {
        let mu = match r.mu_status {
            MuStatus::Unsupported => String::new(),
            _ => csv_number(r.mu),
        };
        let _ = writeln!(out, "\"{}\",{},{}", r.basis, csv_number(r.rho.rho), mu);
    }
    out
}

/// `max_j ρ_{b_j}` over the bases with a nonzero coefficient; `None` when any is infinite.
pub fn instance_rho(instance: &GameInstance, x_max: usize, cfg: &KernelConfig) -> Option<f64> {
    let mut rho = 1.0f64;
    for j in instance.bases_in_use() {
        rho = rho.max(rho_factor(&instance.basis()[j], x_max, cfg).rho?);
    }
    Some(rho)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "detail")]
pub enum StageStatus {
    Ok,
    /// The relaxation stopped at its iteration cap; the best iterate is kept.
    NotConverged(String),
    /// A Poisson series diverged: `ρ_b = ∞` for some basis in use.
    InfiniteRho(String),
    Failed(String),
    Skipped(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage<T> {
    #[serde(flatten)]
    pub status: StageStatus,
    pub result: Option<T>,
}

impl<T> Stage<T> {
    fn ok(result: T) -> Self {
        Stage {
            status: StageStatus::Ok,
            result: Some(result),
        }
    }

    fn skipped(reason: &str) -> Self {
        Stage {
            status: StageStatus::Skipped(reason.into()),
            result: None,
        }
    }

    fn from_error(err: Error) -> Self {
        let status = if err.is_non_convergent() {
            StageStatus::InfiniteRho(err.to_string())
        } else {
            StageStatus::Failed(err.to_string())
        };
        Stage {
            status,
            result: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == StageStatus::Ok
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignOptions {
    pub solver: SolverOptions,
    pub kernel: KernelConfig,
    pub audit_tol: f64,
    pub enumeration_cap: u128,
    pub rho_x_max: usize,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions {
            solver: SolverOptions {
                tol_gap: 1e-8,
                max_iters: 10_000,
                step_rule: StepRule::Pairwise,
            },
            kernel: KernelConfig::default(),
            audit_tol: DEFAULT_AUDIT_TOL,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            rho_x_max: DEFAULT_RHO_X_MAX,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignBundle {
    /// `max_j ρ_{b_j}` over bases in use; `None` when infinite.
    pub rho: Option<f64>,
    pub relaxation: Stage<FractionalProfile>,
    pub taxes: Stage<TaxProfile>,
    pub audit: Stage<TaxAudit>,
    pub poa: Stage<PoaReport>,
    pub smoothness: Stage<SmoothnessReport>,
}

/// relaxation → taxes → audit → PoA → smoothness. A failed stage marks its
/// dependents as skipped; the bundle itself is always returned.
pub fn design_and_evaluate(instance: &GameInstance, opts: &DesignOptions) -> DesignBundle {
    let rho = instance_rho(instance, opts.rho_x_max, &opts.kernel);

    let relaxation = match solve_relaxation(instance, &opts.solver, &opts.kernel) {
        Ok(fp) => Stage::ok(fp),
        Err(Error::MaxItersExceeded { best }) => Stage {
            status: StageStatus::NotConverged(format!(
                "gap {:.3e} after {} iterations",
                best.gap, best.iters
            )),
            result: Some(*best),
        },
        Err(e) => Stage::from_error(e),
    };
    let taxes = match &relaxation.result {
        Some(fp) => match build_tax_profile(instance, &fp.v, &opts.kernel) {
            Ok(t) => Stage::ok(t),
            Err(e) => Stage::from_error(e),
        },
        None => Stage::skipped("relaxation unavailable"),
    };
    let Some(tax_profile) = taxes.result.as_ref() else {
        return DesignBundle {
            rho,
            relaxation,
            taxes,
            audit: Stage::skipped("taxes unavailable"),
            poa: Stage::skipped("taxes unavailable"),
            smoothness: Stage::skipped("taxes unavailable"),
        };
    };

    let audit = match audit_taxes(instance, tax_profile, opts.audit_tol, &opts.kernel) {
        Ok(a) if a.pass => Stage::ok(a),
        Ok(a) => Stage {
            status: StageStatus::Failed("tax audit found violations".into()),
            result: Some(a),
        },
        Err(e) => Stage::from_error(e),
    };

    let enumerable = instance.profile_count() <= opts.enumeration_cap;
    let poa = if !enumerable {
        Stage::skipped("profile space exceeds enumeration cap")
    } else {
        match empirical_poa(instance, Some(tax_profile), opts.enumeration_cap) {
            Ok(r) => Stage::ok(r),
            Err(e) => Stage::from_error(e),
        }
    };

    let smoothness = match (enumerable, rho, relaxation.result.as_ref()) {
        (false, _, _) => Stage::skipped("profile space exceeds enumeration cap"),
        (_, None, _) => Stage {
            status: StageStatus::InfiniteRho("rho is infinite for a basis in use".into()),
            result: None,
        },
        (true, Some(rho), Some(fp)) => {
            match check_smoothness(instance, tax_profile, &fp.y, rho, opts.enumeration_cap) {
                Ok(r) if r.pass => Stage::ok(r),
                Ok(r) => Stage {
                    status: StageStatus::Failed("smoothness inequality violated".into()),
                    result: Some(r),
                },
                Err(e) => Stage::from_error(e),
            }
        }
        (true, Some(_), None) => Stage::skipped("relaxation unavailable"),
    };

    DesignBundle {
        rho,
        relaxation,
        taxes,
        audit,
        poa,
        smoothness,
    }
}
