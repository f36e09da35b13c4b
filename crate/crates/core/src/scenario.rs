//! Scenario files: a profile plus analysis, simulation and output options.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bounds::Assumptions;
use crate::profile::ProfileConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    /// Truncation radius standing for `+∞`.
    pub r_cap: f64,
    pub tol: f64,
    pub grid_points: usize,
    /// Relative size below which an extrapolated tail counts as converged.
    pub tail_tol: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            r_cap: 50.0,
            tol: 1e-10,
            grid_points: crate::isoperimetric::DEFAULT_GRID,
            tail_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    #[serde(rename = "R_list")]
    pub r_list: Vec<f64>,
    pub rho0: f64,
    pub antithetic: bool,
    /// Censoring time; defaults to `100 F(R)`.
    pub t_cap: Option<f64>,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_paths: 100_000,
            dt: 1e-5,
            seed: 0,
            r_list: vec![1.0],
            rho0: 0.0,
            antithetic: false,
            t_cap: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    Both,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputOptions {
    pub format: OutputFormat,
    pub dump_tables: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(flatten)]
    pub profile: ProfileConfig,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    #[serde(default)]
    pub mc: Option<McConfig>,
    #[serde(default)]
    pub output: OutputOptions,
    #[serde(default)]
    pub assumptions: Assumptions,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),
    #[error("sweep parameter `{name}` does not apply to this profile: {detail}")]
    ParameterNotApplicable { name: String, detail: String },
    #[error("bad value `{value}` for `{name}`")]
    BadValue { name: String, value: String },
    #[error("invalid option: {0}")]
    BadOption(String),
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let sc: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let a = &self.analysis;
        if !(a.r_cap > 0.0 && a.r_cap.is_finite()) {
            return Err(ScenarioError::BadOption(format!("analysis.r_cap = {}", a.r_cap)));
        }
        if !(1e-13..=1e-3).contains(&a.tol) {
            return Err(ScenarioError::BadOption(format!("analysis.tol = {} not in [1e-13, 1e-3]", a.tol)));
        }
        if a.grid_points < 1000 {
            return Err(ScenarioError::BadOption(format!("analysis.grid_points = {} < 1000", a.grid_points)));
        }
        if !(a.tail_tol > 0.0 && a.tail_tol < 1.0) {
            return Err(ScenarioError::BadOption(format!("analysis.tail_tol = {}", a.tail_tol)));
        }
        if let Some(mc) = &self.mc {
            if mc.r_list.is_empty() || mc.r_list.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                return Err(ScenarioError::BadOption("mc.R_list must hold positive radii".into()));
            }
        }
        Ok(())
    }

    /// Copy of the scenario with one parameter replaced.
    ///
    /// Names: `k`, `H0`, `r_phi`, `m`, `l`, `poly[i]`, `exp_poly[i]`,
    /// `coefficients[i]`, `value`, `amplitude`, `shift`, `power`.
    pub fn with_parameter(&self, name: &str, value: &str) -> Result<Scenario, ScenarioError> {
        let mut v = serde_json::to_value(self).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let bad = || ScenarioError::BadValue {
            name: name.into(),
            value: value.into(),
        };
        let number = || -> Result<Value, ScenarioError> {
            let x: f64 = value.trim().parse().map_err(|_| bad())?;
            serde_json::Number::from_f64(x).map(Value::Number).ok_or_else(bad)
        };
        let (base, index) = match name.find('[') {
            Some(open) if name.ends_with(']') => {
                let i: usize = name[open + 1..name.len() - 1].parse().map_err(|_| ScenarioError::UnknownParameter(name.into()))?;
                (&name[..open], Some(i))
            }
            _ => (name, None),
        };
        match (base, index) {
            ("H0" | "H", None) => v["H"] = number()?,
            ("r_phi", None) => {
                v["r_phi"] = match value.trim() {
                    "inf" | "+inf" | "infinity" => Value::String("inf".into()),
                    _ => number()?,
                }
            }
            ("m" | "l", None) => {
                let n: u32 = value.trim().parse().map_err(|_| bad())?;
                v[base] = Value::from(n);
            }
            ("k" | "value" | "amplitude" | "shift" | "power", None) => {
                let params = &mut v["profile"]["params"];
                if params.get(base).is_none() {
                    return Err(ScenarioError::ParameterNotApplicable {
                        name: name.into(),
                        detail: format!("profile has no parameter `{base}`"),
                    });
                }
                params[base] = number()?;
            }
            ("poly" | "exp_poly" | "coefficients", Some(i)) => {
                let arr = v["profile"]["params"]
                    .get_mut(base)
                    .and_then(Value::as_array_mut)
                    .ok_or_else(|| ScenarioError::ParameterNotApplicable {
                        name: name.into(),
                        detail: format!("profile has no coefficient list `{base}`"),
                    })?;
                if arr.len() <= i {
                    arr.resize(i + 1, Value::from(0.0));
                }
                arr[i] = number()?;
            }
            _ => return Err(ScenarioError::UnknownParameter(name.into())),
        }
        let sc: Scenario = serde_json::from_value(v).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HYP: &str = r#"{"profile":{"kind":"closed_form_sigma","params":{"family":"hyperbolic","k":1.0}},
        "m":2,"r_phi":"inf","H":0}"#;

    #[test]
    fn defaults_and_round_trip() {
        let sc = Scenario::from_json(HYP).unwrap();
        assert_eq!(sc.analysis, AnalysisOptions::default());
        assert!(sc.mc.is_none());
        let back = Scenario::from_json(&serde_json::to_string(&sc).unwrap()).unwrap();
        assert_eq!(back, sc);
    }

    #[test]
    fn parameter_overrides() {
        let sc = Scenario::from_json(HYP).unwrap();
        let s = sc.with_parameter("H0", "0.25").unwrap();
        assert_eq!(s.profile.h, crate::profile::HConfig::Constant(0.25));
        let s = sc.with_parameter("m", "4").unwrap();
        assert_eq!(s.profile.m, 4);
        let s = sc.with_parameter("r_phi", "2").unwrap();
        assert_eq!(s.profile.r_phi, crate::profile::Radius::Finite(2.0));
        assert!(sc.with_parameter("k", "2").is_ok());
        assert_eq!(
            sc.with_parameter("curvature", "1"),
            Err(ScenarioError::UnknownParameter("curvature".into()))
        );
        assert!(matches!(
            sc.with_parameter("poly[3]", "1"),
            Err(ScenarioError::ParameterNotApplicable { .. })
        ));
        assert!(matches!(sc.with_parameter("H0", "abc"), Err(ScenarioError::BadValue { .. })));
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!(Scenario::from_json("{"), Err(ScenarioError::Parse(_))));
        let bad = HYP.replace("\"H\":0", "\"H\":0,\"analysis\":{\"tol\":1}");
        assert!(matches!(Scenario::from_json(&bad), Err(ScenarioError::BadOption(_))));
    }
}
