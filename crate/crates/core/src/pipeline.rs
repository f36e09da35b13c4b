//! End-to-end runs: profile → warping function → ratio table → estimates,
//! plus Monte Carlo comparisons and parameter sweeps.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{estimate, product_reduce, BoundsError, EstimateOptions, EstimateReport};
use crate::isoperimetric::{build_ratio_table, IsoError, RatioTable, TailOptions, TailStatus};
use crate::jacobi::{solve_sigma, JacobiError, WarpingFunction};
use crate::montecarlo::{exit_time_profile, paths_csv, simulate_exit_time, ExitTimeEstimate, McError, McOptions};
use crate::profile::{make_profile, ProfileError, ProfileSpec};
use crate::scenario::{Scenario, ScenarioError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("profile: {0}")]
    Profile(#[from] ProfileError),
    #[error("jacobi: {0}")]
    Jacobi(#[from] JacobiError),
    #[error("isoperimetric: {0}")]
    Isoperimetric(#[from] IsoError),
    #[error("bounds: {0}")]
    Bounds(#[from] BoundsError),
    #[error("montecarlo: {0}")]
    MonteCarlo(#[from] McError),
    #[error("montecarlo: no simulation options (`mc`) in the scenario")]
    MissingMc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        ToolInfo {
            name: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpingSummary {
    pub r_max: f64,
    pub t0: f64,
    pub tol: f64,
    pub max_defect: f64,
    pub closed_form: bool,
    pub grid_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McComparison {
    pub estimate: ExitTimeEstimate,
    /// `F(R) - F(ρ0)` from the ratio table.
    pub model_exit_time: f64,
    /// `max(3 stderr, 0.005)`.
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: ToolInfo,
    pub input: Scenario,
    pub warping: Option<WarpingSummary>,
    pub estimate: Option<EstimateReport>,
    pub mc: Option<Vec<McComparison>>,
    /// Names of the CSV dumps written next to the report.
    pub tables: Vec<String>,
    /// Wall-clock seconds per stage; absent in reproducible runs.
    pub timings: Option<BTreeMap<String, f64>>,
}

/// A report plus the files that accompany it.
#[derive(Debug, Clone)]
pub struct Run {
    pub report: Report,
    /// `(file name, contents)`.
    pub artifacts: Vec<(String, String)>,
    /// Intermediate objects, for callers that want more than the report.
    pub spec: ProfileSpec,
    pub table: Option<Arc<RatioTable>>,
}

impl Run {
    /// Exit status: 0 clean, 2 when a hypothesis fails or a comparison misses.
    pub fn exit_code(&self) -> i32 {
        let violated = self.report.estimate.as_ref().is_some_and(|e| e.hypotheses_violated());
        let mc_failed = self.report.mc.as_ref().is_some_and(|m| m.iter().any(|c| !c.pass));
        if violated || mc_failed {
            2
        } else {
            0
        }
    }
}

struct Timer {
    on: bool,
    stages: BTreeMap<String, f64>,
    last: Instant,
}

impl Timer {
    fn new(on: bool) -> Self {
        Timer {
            on,
            stages: BTreeMap::new(),
            last: Instant::now(),
        }
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        *self.stages.entry(name.into()).or_default() += (now - self.last).as_secs_f64();
        self.last = now;
    }

    fn finish(self) -> Option<BTreeMap<String, f64>> {
        self.on.then_some(self.stages)
    }
}

/// Solves for `σ` on `[0, upto]`, falling back to the resolved part when
/// `σ` vanishes or the integrator stalls.
fn warping(spec: &ProfileSpec, upto: f64, tol: f64) -> Result<(WarpingFunction, Option<f64>), PipelineError> {
    match solve_sigma(spec, upto, tol) {
        Ok(w) => Ok((w, None)),
        Err(JacobiError::SigmaVanished { r_star, partial }) => Ok((*partial, Some(r_star))),
        Err(JacobiError::StepUnderflow { last_good, partial }) => Ok((*partial, Some(last_good))),
        Err(e) => Err(e.into()),
    }
}

fn summary(w: &WarpingFunction) -> WarpingSummary {
    WarpingSummary {
        r_max: w.r_max,
        t0: w.t0,
        tol: w.tol,
        max_defect: w.max_defect,
        closed_form: w.is_closed_form(),
        grid_points: w.grid.len(),
    }
}

/// Full analysis of one scenario.
pub fn run_analyze(sc: &Scenario, timings: bool) -> Result<Run, PipelineError> {
    sc.validate()?;
    let mut clock = Timer::new(timings);
    let spec = make_profile(&sc.profile)?;
    let d = product_reduce(&spec)?;
    let opts = &sc.analysis;
    let upto = spec.r_phi.finite().unwrap_or(opts.r_cap);
    let (w, truncated) = warping(&spec, upto, opts.tol)?;
    clock.lap("jacobi");
    let reach = w.r_max;
    let w = Arc::new(w);
    let table = build_ratio_table(w.clone(), d, reach, opts.tol, opts.grid_points)?;
    clock.lap("isoperimetric");
    let est = estimate(
        &table,
        &spec,
        sc.assumptions,
        EstimateOptions {
            tail: TailOptions {
                tail_tol: opts.tail_tol,
                ..TailOptions::default()
            },
            window_truncated_at: truncated,
        },
    );
    clock.lap("bounds");
    let mut artifacts = Vec::new();
    if sc.output.dump_tables {
        artifacts.push(("warping.csv".to_string(), w.to_csv()));
        artifacts.push(("ratios.csv".to_string(), table.to_csv()));
    }
    let report = Report {
        tool: ToolInfo::default(),
        input: sc.clone(),
        warping: Some(summary(&w)),
        estimate: Some(est),
        mc: None,
        tables: artifacts.iter().map(|a| a.0.clone()).collect(),
        timings: clock.finish(),
    };
    Ok(Run {
        report,
        artifacts,
        spec,
        table: Some(Arc::new(table)),
    })
}

/// Monte Carlo exit times for every radius in `mc.R_list`, each compared
/// with `F(R) - F(ρ0)`.
pub fn run_simulate(sc: &Scenario, timings: bool) -> Result<Run, PipelineError> {
    sc.validate()?;
    let mc = sc.mc.as_ref().ok_or(PipelineError::MissingMc)?;
    let mut clock = Timer::new(timings);
    let spec = make_profile(&sc.profile)?;
    let d = product_reduce(&spec)?;
    let r_top = mc.r_list.iter().copied().fold(0.0, f64::max);
    let w = solve_sigma(&spec, r_top, sc.analysis.tol)?;
    let w = Arc::new(w);
    let table = build_ratio_table(w.clone(), d, r_top, sc.analysis.tol, sc.analysis.grid_points)?;
    clock.lap("model");
    let mut out = Vec::new();
    let mut artifacts = Vec::new();
    for &r in &mc.r_list {
        let model = exit_time_profile(&table, r) - exit_time_profile(&table, mc.rho0);
        let opts = McOptions {
            n_paths: mc.n_paths,
            dt: mc.dt,
            seed: mc.seed,
            t_cap: mc.t_cap.unwrap_or(100.0 * model.max(mc.dt)),
            antithetic: mc.antithetic,
        };
        let (estimate, records) = simulate_exit_time(&w, d, r, mc.rho0, &opts)?;
        let tolerance = (3.0 * estimate.stderr_tau).max(0.005);
        let pass = (estimate.mean_tau - model).abs() <= tolerance;
        if sc.output.dump_tables {
            artifacts.push((format!("paths_R{r}.csv"), paths_csv(&records)));
        }
        out.push(McComparison {
            estimate,
            model_exit_time: model,
            tolerance,
            pass,
        });
        clock.lap("montecarlo");
    }
    let report = Report {
        tool: ToolInfo::default(),
        input: sc.clone(),
        warping: Some(summary(&w)),
        estimate: None,
        mc: Some(out),
        tables: artifacts.iter().map(|a| a.0.clone()).collect(),
        timings: clock.finish(),
    };
    Ok(Run {
        report,
        artifacts,
        spec,
        table: Some(Arc::new(table)),
    })
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    pub report: Option<EstimateReport>,
    pub error: Option<String>,
}

/// Runs the analysis once per value of `param`; rows keep the input order.
pub fn run_sweep(sc: &Scenario, param: &str, values: &[String]) -> Result<Vec<SweepRow>, PipelineError> {
    // reject unknown names before doing any work
    let scenarios: Vec<Scenario> = values
        .iter()
        .map(|v| sc.with_parameter(param, v))
        .collect::<Result<_, _>>()?;
    Ok(scenarios
        .par_iter()
        .zip(values.par_iter())
        .map(|(s, v)| match run_analyze(s, false) {
            Ok(run) => SweepRow {
                value: v.clone(),
                report: run.report.estimate,
                error: None,
            },
            Err(e) => SweepRow {
                value: v.clone(),
                report: None,
                error: Some(e.to_string()),
            },
        })
        .collect())
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn snake<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// CSV with one row per sweep value.
pub fn sweep_csv(param: &str, rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "param,value,effective_dim,A,lambda_branch_integral,lambda_branch_inf,lambda_lower,\
         discrete_spectrum,stochastically_incomplete_model,mean_exit_time,conditional,error\n",
    );
    for row in rows {
        let _ = match &row.report {
            Some(r) => {
                let exit = match &r.tail {
                    TailStatus::Converged { value, .. } => value.to_string(),
                    TailStatus::Divergent { .. } => "divergent".into(),
                    TailStatus::Inconclusive { .. } => "inconclusive".into(),
                };
                writeln!(
                    out,
                    "{param},{},{},{},{},{},{},{},{},{},{},",
                    row.value,
                    r.effective_dim,
                    r.a.a,
                    opt(r.lambda_branch_integral),
                    r.lambda_branch_inf,
                    r.lambda_lower,
                    snake(&r.discrete_spectrum),
                    snake(&r.stochastically_incomplete_model),
                    exit,
                    r.conditional
                )
            }
            None => writeln!(
                out,
                "{param},{},,,,,,,,,,\"{}\"",
                row.value,
                row.error.clone().unwrap_or_default().replace('"', "'")
            ),
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(text: &str) -> Scenario {
        Scenario::from_json(text).unwrap()
    }

    #[test]
    fn hyperbolic_report_round_trips() {
        let sc = scenario(
            r#"{"profile":{"kind":"closed_form_sigma","params":{"family":"hyperbolic","k":1.0}},
                "m":2,"r_phi":"inf","H":0,"analysis":{"grid_points":1000,"r_cap":20}}"#,
        );
        let run = run_analyze(&sc, false).unwrap();
        let est = run.report.estimate.as_ref().unwrap();
        assert!((est.lambda_lower - 0.25).abs() < 1e-9);
        assert_eq!(run.exit_code(), 0);
        let text = serde_json::to_string(&run.report).unwrap();
        let back: Report = serde_json::from_str(&text).unwrap();
        assert_eq!(back, run.report);
        assert!(!text.contains("Infinity") && !text.contains("NaN"));
    }

    #[test]
    fn sweep_keeps_order_and_rejects_unknown() {
        let sc = scenario(
            r#"{"profile":{"kind":"closed_form_sigma","params":{"family":"hyperbolic","k":1.0}},
                "m":2,"r_phi":"inf","H":0,"analysis":{"grid_points":1000,"r_cap":20}}"#,
        );
        let values: Vec<String> = ["0", "0.5", "1.0"].iter().map(|s| s.to_string()).collect();
        let rows = run_sweep(&sc, "H0", &values).unwrap();
        let l: Vec<f64> = rows.iter().map(|r| r.report.as_ref().unwrap().lambda_lower).collect();
        // oracle: [(1 - H0)]² / 4
        for (got, h) in l.iter().zip([0.0, 0.5, 1.0]) {
            assert!((got - (1.0f64 - h).powi(2) / 4.0).abs() < 1e-9);
        }
        assert!(sweep_csv("H0", &rows).lines().count() == 4);
        assert!(matches!(
            run_sweep(&sc, "bogus", &values),
            Err(PipelineError::Scenario(ScenarioError::UnknownParameter(_)))
        ));
    }

    #[test]
    fn sphere_beyond_its_diameter_is_conditional() {
        let sc = scenario(
            r#"{"profile":{"kind":"closed_form_sigma","params":{"family":"spherical","k":1.0}},
                "m":2,"r_phi":4,"H":0,"analysis":{"grid_points":1000}}"#,
        );
        let run = run_analyze(&sc, false).unwrap();
        let est = run.report.estimate.unwrap();
        assert!(est.conditional);
        assert!(!est.hypothesis_checks.sigma_prime_nonneg.holds);
    }
}
