//! Spectral lower bounds, discreteness, stochastic classification, exit
//! times and mean-curvature obstructions assembled from a [`RatioTable`].
//!
//! With `A = sup |H| / I_d` over the image:
//!
//! ```text
//! λ* ≥ max{ (1-A) / ∫_0^{r_φ} I_d^{-1},  (1-A)² inf I_d² / 4 }
//! ```
//!
//! valid when `σ' ≥ 0`, `𝓘_d` is nondecreasing and `A ≤ 1`. The bound is
//! still produced when a hypothesis fails, marked conditional.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::isoperimetric::{
    check_script_ratio_monotone, inf_ratio, integral_inv_ratio, InfReport, MonotoneReport, RatioTable,
    TailOptions, TailStatus,
};
use crate::jacobi::{check_positivity_monotonicity, PositivityReport};
use crate::profile::{HEnvelope, KneserReport, ProfileSpec, Radius};
use crate::quad;
use crate::reference::{known_discrepancies, Discrepancy};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("effective dimension m - l = {d} is below 2 (m = {m}, l = {l})")]
    DimensionMismatch { m: u32, l: u32, d: i64 },
}

/// Geometric facts that cannot be checked from the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Assumptions {
    pub proper: bool,
    pub minimal: bool,
    #[serde(rename = "stochastically_complete_M")]
    pub stochastically_complete_m: bool,
}

/// Effective dimension `d = m - l` of a (possibly product) immersion.
pub fn product_reduce(p: &ProfileSpec) -> Result<u32, BoundsError> {
    let d = p.m as i64 - p.l as i64;
    if d < 2 {
        return Err(BoundsError::DimensionMismatch { m: p.m, l: p.l, d });
    }
    Ok(d as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupReport {
    #[serde(rename = "A", with = "crate::serde_ext")]
    pub a: f64,
    pub arg_sup: Option<f64>,
}

/// `A = sup H(r) / I_d(r)` over `(0, upto]`.
pub fn compute_a(t: &RatioTable, h: &HEnvelope, inf: &InfReport) -> SupReport {
    if let Some(h0) = h.constant() {
        if h0 == 0.0 {
            return SupReport { a: 0.0, arg_sup: None };
        }
        let a = h0 / inf.value;
        let arg = match inf.argmin {
            crate::isoperimetric::Argmin::Interior { r } => Some(r),
            crate::isoperimetric::Argmin::LimitAtEnd { r_end } => Some(r_end),
        };
        return SupReport { a, arg_sup: arg };
    }
    let upto = match inf.argmin {
        crate::isoperimetric::Argmin::LimitAtEnd { r_end } => r_end,
        _ => t.r_end(),
    };
    let ratio = |r: f64| h.eval(r) / t.ratio_at(r).ratio;
    let mut best = (0usize, 0.0f64);
    for i in 1..t.grid.len() {
        if t.grid[i] > upto {
            break;
        }
        let v = h.eval(t.grid[i]) / t.ratio[i];
        if v > best.1 {
            best = (i, v);
        }
    }
    if best.0 == 0 {
        return SupReport { a: 0.0, arg_sup: None };
    }
    let lo = t.grid[best.0.saturating_sub(2).max(1)];
    let hi = t.grid[(best.0 + 2).min(t.grid.len() - 1)].min(upto);
    let (x, neg) = quad::golden_min(|r| -ratio(r), lo, hi, 1e-10 * hi.max(1.0));
    if -neg > best.1 {
        SupReport { a: -neg, arg_sup: Some(x) }
    } else {
        SupReport { a: best.1, arg_sup: Some(t.grid[best.0]) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub holds: bool,
    /// First radius where the check fails, or the offending value.
    pub witness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisChecks {
    pub sigma_prime_nonneg: Check,
    pub script_ratio_nondecreasing: Check,
    pub kneser: KneserReport,
    #[serde(rename = "A_le_1")]
    pub a_le_1: Check,
    pub proper_assumed: bool,
    /// Set when `σ` could only be resolved on a shorter interval.
    pub window_truncated_at: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discreteness {
    Yes,
    NoInference,
    HypothesesViolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelStochastic {
    Incomplete,
    Complete,
    Inconclusive,
    NotApplicableFiniteRadius,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum MeanCurvatureVerdict {
    NotApplicable {
        missing: Vec<String>,
    },
    /// `sup |H| / I_d < 1`: the immersed manifold cannot be stochastically complete.
    IncompatibleWithStochasticCompleteness {
        sup_h_over_ratio: f64,
        /// `I_d^{-1} → 0`: only unbounded `|H|` is compatible with completeness.
        unbounded_h_required: bool,
        conflicts_with_declared_completeness: bool,
    },
    NoObstruction {
        #[serde(with = "crate::serde_ext")]
        sup_h_over_ratio: f64,
        unbounded_h_required: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub rule: String,
    pub inputs: Vec<String>,
    pub hypotheses: Vec<String>,
}

fn prov(rule: &str, inputs: &[&str], hyps: &[&str]) -> Provenance {
    Provenance {
        rule: rule.into(),
        inputs: inputs.iter().map(|s| s.to_string()).collect(),
        hypotheses: hyps.iter().map(|s| s.to_string()).collect(),
    }
}

/// Infimum of `I_d` as reported and as used in the bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfSummary {
    #[serde(flatten)]
    pub report: InfReport,
    /// Value entering the bound; below `report.value` when the table was
    /// truncated while `I_d` was still decreasing.
    pub value_used: f64,
    /// The computed infimum bounds the model's Cheeger constant from above.
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub effective_dim: u32,
    #[serde(flatten)]
    pub a: SupReport,
    pub hypothesis_checks: HypothesisChecks,
    /// True when the spectral bound rests on a failed hypothesis.
    pub conditional: bool,
    pub inf_ratio: InfSummary,
    pub tail: TailStatus,
    pub lambda_branch_integral: Option<f64>,
    pub lambda_branch_inf: f64,
    /// Finite radius only: `[(floor - sup H)_+]² / 4` with the analytic floor
    /// `(d - 1) σ'/σ(r_φ)`.
    pub lambda_branch_inf_floor: Option<f64>,
    pub lambda_lower: f64,
    pub discrete_spectrum: Discreteness,
    pub stochastically_incomplete_model: ModelStochastic,
    pub mean_exit_time_upper: Option<f64>,
    pub mean_curvature_verdict: MeanCurvatureVerdict,
    /// Product case with minimal immersion: `Some(true)` when the immersed
    /// manifold is shown not to be L¹-Liouville.
    pub l1_liouville_fails: Option<bool>,
    pub provenance: BTreeMap<String, Provenance>,
    pub known_discrepancies: Vec<Discrepancy>,
}

impl EstimateReport {
    /// Exit status policy: hypotheses violated means "do not trust as a theorem".
    pub fn hypotheses_violated(&self) -> bool {
        self.conditional || self.discrete_spectrum == Discreteness::HypothesesViolated
    }
}

/// Extra inputs of [`estimate`].
#[derive(Debug, Clone, Copy, Default)]
pub struct EstimateOptions {
    pub tail: TailOptions,
    /// Right end of the resolved window when `σ` could not be followed to
    /// the requested radius.
    pub window_truncated_at: Option<f64>,
}

fn inv_ratio_vanishes(t: &RatioTable) -> bool {
    let end = t.r_end();
    let a = t.ratio_at(0.5 * end);
    let b = t.ratio_at(end);
    b.ratio.is_finite() && a.ratio.is_finite() && 1.0 / b.ratio < 0.5 / a.ratio && b.dlog > a.dlog
}

/// Full estimate for one profile on one ratio table.
///
/// `r_phi` decides the interval: `[0, r_φ]` when finite, the whole table
/// (standing for `[0, ∞)`) otherwise.
pub fn estimate(
    t: &RatioTable,
    p: &ProfileSpec,
    assumptions: Assumptions,
    opts: EstimateOptions,
) -> EstimateReport {
    let d = t.dim;
    let finite = p.r_phi.finite();
    let upto = finite.unwrap_or(t.r_end()).min(t.r_end());
    let infinite_domain = matches!(p.r_phi, Radius::Infinite);
    let truncated = opts.window_truncated_at.is_some();

    let pos: PositivityReport = check_positivity_monotonicity(&t.w, upto);
    let mono: MonotoneReport = check_script_ratio_monotone(t, upto);
    let kneser = p.kneser_check(upto);
    let inf = inf_ratio(t, upto, infinite_domain);
    let inf_used = if infinite_domain && inf.limit_governed {
        // the table stops while I_d still decreases: only the limit of
        // (d-1) σ'/σ is a safe value, and zero when none was detected
        inf.analytic_floor.map_or(0.0, |f| f.min(inf.value))
    } else {
        inf.value
    };
    let inf_summary = InfSummary {
        report: inf.clone(),
        value_used: inf_used,
        label: "upper estimate for the Cheeger constant of the model".into(),
    };
    let mut a_used = inf.clone();
    a_used.value = inf_used;
    let sup = compute_a(t, &p.h_envelope, &a_used);
    let a = sup.a;
    let tail = if infinite_domain && truncated {
        match integral_inv_ratio(t, None, opts.tail) {
            TailStatus::Converged { .. } | TailStatus::Inconclusive { .. } => {
                TailStatus::Inconclusive { r_reached: t.r_end() }
            }
            div => div,
        }
    } else {
        integral_inv_ratio(t, finite.map(|r| r.min(t.r_end())), opts.tail)
    };

    let sigma_ok = pos.sigma_positive && pos.sigma_prime_nonneg && !(finite.is_some() && truncated);
    let checks = HypothesisChecks {
        sigma_prime_nonneg: Check {
            holds: sigma_ok,
            witness: pos.first_violation.or(opts.window_truncated_at),
        },
        script_ratio_nondecreasing: Check {
            holds: mono.nondecreasing,
            witness: mono.first_violation,
        },
        kneser,
        a_le_1: Check {
            holds: a <= 1.0,
            witness: Some(a).filter(|v| v.is_finite()),
        },
        proper_assumed: assumptions.proper,
        window_truncated_at: opts.window_truncated_at,
    };
    let conditional = !(checks.sigma_prime_nonneg.holds
        && checks.script_ratio_nondecreasing.holds
        && checks.a_le_1.holds);
    let hyps = ["sigma_prime_nonneg", "script_ratio_nondecreasing", "A_le_1"];

    let one_minus_a = if a.is_finite() { (1.0 - a).max(0.0) } else { 0.0 };
    let integral = tail.converged_value();
    let lambda_branch_integral = integral.map(|v| one_minus_a / v);
    let lambda_branch_inf = one_minus_a * one_minus_a * inf_used * inf_used / 4.0;
    let lambda_branch_inf_floor = finite.and(inf.analytic_floor).map(|floor| {
        let gap = (floor - p.h_envelope.sup()).max(0.0);
        gap * gap / 4.0
    });
    let lambda_lower = lambda_branch_integral.unwrap_or(0.0).max(lambda_branch_inf);

    let discrete_spectrum = if !(a < 1.0) || conditional {
        Discreteness::HypothesesViolated
    } else if assumptions.proper && integral.is_some() {
        Discreteness::Yes
    } else {
        Discreteness::NoInference
    };
    let stochastically_incomplete_model = if finite.is_some() {
        ModelStochastic::NotApplicableFiniteRadius
    } else {
        match tail {
            TailStatus::Converged { .. } => ModelStochastic::Incomplete,
            TailStatus::Divergent { .. } => ModelStochastic::Complete,
            TailStatus::Inconclusive { .. } => ModelStochastic::Inconclusive,
        }
    };

    let mut missing = Vec::new();
    if !checks.kneser.guaranteed {
        missing.push("kneser".to_string());
    }
    if !mono.nondecreasing {
        missing.push("script_ratio_nondecreasing".to_string());
    }
    if integral.is_none() {
        missing.push("inv_ratio_integrable".to_string());
    }
    let unbounded_h_required = infinite_domain && integral.is_some() && inv_ratio_vanishes(t);
    let mean_curvature_verdict = if !missing.is_empty() {
        MeanCurvatureVerdict::NotApplicable { missing }
    } else if a < 1.0 {
        MeanCurvatureVerdict::IncompatibleWithStochasticCompleteness {
            sup_h_over_ratio: a,
            unbounded_h_required,
            conflicts_with_declared_completeness: assumptions.stochastically_complete_m,
        }
    } else {
        MeanCurvatureVerdict::NoObstruction {
            sup_h_over_ratio: a,
            unbounded_h_required,
        }
    };
    let l1_liouville_fails = (p.l > 0 && assumptions.minimal).then(|| {
        matches!(
            mean_curvature_verdict,
            MeanCurvatureVerdict::IncompatibleWithStochasticCompleteness { .. }
        )
    });

    let mut provenance = BTreeMap::new();
    provenance.insert("A".into(), prov("sup_mean_curvature_over_ratio", &["H", "I_d"], &[]));
    provenance.insert(
        "inf_ratio".into(),
        prov("ratio_infimum_grid_golden", &["I_d", "interval"], &[]),
    );
    if lambda_branch_integral.is_some() {
        provenance.insert(
            "lambda_branch_integral".into(),
            prov("spectral_bound_integral_branch", &["A", "tail.value"], &hyps),
        );
    }
    provenance.insert(
        "lambda_branch_inf".into(),
        prov("spectral_bound_infimum_branch", &["A", "inf_ratio.value_used"], &hyps),
    );
    if lambda_branch_inf_floor.is_some() {
        provenance.insert(
            "lambda_branch_inf_floor".into(),
            prov("spectral_bound_riccati_floor", &["H", "sigma_prime_over_sigma(r_phi)"], &hyps),
        );
    }
    provenance.insert(
        "lambda_lower".into(),
        prov("spectral_bound_max_of_branches", &["lambda_branch_integral", "lambda_branch_inf"], &hyps),
    );
    provenance.insert(
        "discrete_spectrum".into(),
        prov("discreteness_from_finite_exit_integral", &["tail", "A"], &["proper_assumed", "A_lt_1"]),
    );
    provenance.insert(
        "stochastically_incomplete_model".into(),
        prov("model_incompleteness_iff_integrable_inverse_ratio", &["tail"], &[]),
    );
    if integral.is_some() {
        provenance.insert(
            "mean_exit_time_upper".into(),
            prov("exit_time_comparison", &["tail.value"], &["sigma_prime_nonneg"]),
        );
    }
    provenance.insert(
        "mean_curvature_verdict".into(),
        prov(
            "mean_curvature_obstruction",
            &["A", "tail"],
            &["kneser", "script_ratio_nondecreasing", "inv_ratio_integrable"],
        ),
    );
    if l1_liouville_fails.is_some() {
        provenance.insert(
            "l1_liouville_fails".into(),
            prov("product_l1_liouville_obstruction", &["mean_curvature_verdict"], &["minimal"]),
        );
    }

    let mut report = EstimateReport {
        effective_dim: d,
        a: sup,
        hypothesis_checks: checks,
        conditional,
        inf_ratio: inf_summary,
        mean_exit_time_upper: integral,
        tail,
        lambda_branch_integral,
        lambda_branch_inf,
        lambda_branch_inf_floor,
        lambda_lower,
        discrete_spectrum,
        stochastically_incomplete_model,
        mean_curvature_verdict,
        l1_liouville_fails,
        provenance,
        known_discrepancies: Vec::new(),
    };
    report.known_discrepancies = known_discrepancies(p, &report);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isoperimetric::build_ratio_table;
    use crate::jacobi::solve_sigma;
    use crate::profile::*;
    use std::sync::Arc;

    pub(crate) fn spec(sigma: SigmaConfig, m: u32, l: u32, r_phi: Radius, h: f64) -> ProfileSpec {
        make_profile(&ProfileConfig {
            profile: ProfileBlock {
                curvature: CurvatureConfig::ClosedFormSigma(sigma),
                tail_majorant: TailMajorant::Zero,
            },
            m,
            l,
            r_phi,
            h: HConfig::Constant(h),
        })
        .unwrap()
    }

    fn run(p: &ProfileSpec, upto: f64, assumptions: Assumptions) -> EstimateReport {
        let d = product_reduce(p).unwrap();
        let w = Arc::new(solve_sigma(p, upto, 1e-10).unwrap());
        let t = build_ratio_table(w, d, upto, 1e-10, 2000).unwrap();
        estimate(&t, p, assumptions, EstimateOptions::default())
    }

    #[test]
    fn hyperbolic_minimal_plane() {
        let p = spec(SigmaConfig::Hyperbolic { k: 1.0 }, 2, 0, Radius::Infinite, 0.0);
        let r = run(&p, 50.0, Assumptions::default());
        assert_eq!(r.a.a, 0.0);
        assert!((r.lambda_branch_inf - 0.25).abs() < 1e-9);
        assert_eq!(r.lambda_branch_integral, None);
        assert_eq!(r.stochastically_incomplete_model, ModelStochastic::Complete);
        assert_eq!(r.discrete_spectrum, Discreteness::NoInference);
        assert!(matches!(r.mean_curvature_verdict, MeanCurvatureVerdict::NotApplicable { .. }));
    }

    #[test]
    fn hyperbolic_with_mean_curvature() {
        let p = spec(SigmaConfig::Hyperbolic { k: 1.0 }, 2, 0, Radius::Infinite, 0.5);
        let r = run(&p, 50.0, Assumptions::default());
        assert!((r.a.a - 0.5).abs() < 1e-9);
        assert!((r.lambda_branch_inf - 0.0625).abs() < 1e-9);
    }

    #[test]
    fn a_equal_one_violates_discreteness() {
        let p = spec(SigmaConfig::Hyperbolic { k: 1.0 }, 2, 0, Radius::Infinite, 1.0);
        let r = run(&p, 50.0, Assumptions { proper: true, ..Default::default() });
        assert!((r.a.a - 1.0).abs() < 1e-9);
        assert_eq!(r.discrete_spectrum, Discreteness::HypothesesViolated);
        assert_eq!(r.lambda_lower, 0.0);
        assert!(r.hypotheses_violated());
    }

    #[test]
    fn euclidean_ball() {
        for m in [2u32, 3] {
            for rp in [1.0, 2.0] {
                let p = spec(SigmaConfig::Euclidean, m, 0, Radius::Finite(rp), 0.0);
                let r = run(&p, rp, Assumptions::default());
                let e = r.mean_exit_time_upper.unwrap();
                assert!((e - rp * rp / (2.0 * m as f64)).abs() < 1e-8);
                assert!((r.inf_ratio.value_used - m as f64 / rp).abs() < 1e-6);
                assert!((r.inf_ratio.report.analytic_floor.unwrap() - (m - 1) as f64 / rp).abs() < 1e-12);
                let floor = ((m - 1) as f64 / rp).powi(2) / 4.0;
                assert!((r.lambda_branch_inf_floor.unwrap() - floor).abs() < 1e-12);
                assert_eq!(r.stochastically_incomplete_model, ModelStochastic::NotApplicableFiniteRadius);
            }
        }
    }

    #[test]
    fn euclidean_unbounded_has_zero_infimum() {
        let p = spec(SigmaConfig::Euclidean, 2, 0, Radius::Infinite, 0.0);
        let r = run(&p, 50.0, Assumptions::default());
        assert_eq!(r.inf_ratio.value_used, 0.0);
        assert_eq!(r.lambda_lower, 0.0);
        assert_eq!(r.stochastically_incomplete_model, ModelStochastic::Complete);
    }

    #[test]
    fn product_dimension_guard() {
        let p = spec(SigmaConfig::Euclidean, 3, 2, Radius::Finite(1.0), 0.0);
        assert_eq!(product_reduce(&p), Err(BoundsError::DimensionMismatch { m: 3, l: 2, d: 1 }));
        let p = spec(SigmaConfig::Euclidean, 4, 2, Radius::Finite(1.0), 0.0);
        assert_eq!(product_reduce(&p), Ok(2));
    }

    #[test]
    fn monotone_in_mean_curvature() {
        let mut prev = f64::INFINITY;
        for h in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let p = spec(SigmaConfig::Hyperbolic { k: 1.0 }, 2, 0, Radius::Infinite, h);
            let r = run(&p, 20.0, Assumptions::default());
            assert!(r.lambda_lower <= prev);
            prev = r.lambda_lower;
        }
    }
}
