//! Radial curvature profiles.
//!
//! A profile is either a lower curvature function `G` (the ambient radial
//! sectional curvature is at most `-G(r)`), or a warping function `σ` given
//! in closed form, together with the dimension data `m`, `l`, the extrinsic
//! radius and a mean-curvature envelope.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::interp::{Interpolant, Interpolation, TableError};
use crate::poly::Poly;
use crate::quad;

/// Below this radius `σ''/σ` is evaluated from the divided polynomial form.
pub const SERIES_CUTOFF: f64 = 1e-3;
/// Number of Taylor coefficients carried for `G` and `σ` at the origin.
pub const SERIES_ORDER: usize = 12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("extrinsic radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("dimension mismatch: m = {m}, l = {l} (need m >= 2 and m - l >= 1)")]
    DimensionMismatch { m: u32, l: u32 },
    #[error("tabulated data is not strictly increasing: {0}")]
    NonMonotoneTable(TableError),
    #[error("mean-curvature envelope must be nonnegative, got {0}")]
    NegativeHEnvelope(f64),
    #[error("parameter `{0}` is not finite or out of range")]
    BadParameter(&'static str),
    #[error("closed-form sigma must satisfy sigma(0) = 0, sigma'(0) = 1 and be odd: {0}")]
    BadNormalization(&'static str),
    #[error("table does not cover the origin (first knot at {0})")]
    TableMissingOrigin(f64),
    #[error("G requested at |t| = {t} beyond the last knot {last} with extrapolation disabled")]
    EvalOutsideTable { t: f64, last: f64 },
}

/// Extrinsic radius: a positive length or `+∞` (serialised as `"inf"`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Radius {
    Finite(f64),
    Infinite,
}

impl Radius {
    pub fn is_finite(&self) -> bool {
        matches!(self, Radius::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            Radius::Finite(r) => Some(*r),
            Radius::Infinite => None,
        }
    }

    pub fn as_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for Radius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Radius::Finite(r) => write!(f, "{r}"),
            Radius::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Radius {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Radius::Finite(r) => s.serialize_f64(*r),
            Radius::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Radius {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(r) => Ok(Radius::Finite(r)),
            Repr::Str(s) if matches!(s.as_str(), "inf" | "+inf" | "infinity") => {
                Ok(Radius::Infinite)
            }
            Repr::Str(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Raw (serialisable) configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GConfig {
    /// `G ≡ value`.
    Constant { value: f64 },
    /// `G(t) = Σ c_i |t|^i`.
    Polynomial { coefficients: Vec<f64> },
    /// `G(t) = amplitude · (shift + |t|)^(-power)`.
    PowerDecay { amplitude: f64, shift: f64, power: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaConfig {
    /// `σ(t) = t`.
    Euclidean,
    /// `σ(t) = sinh(kt)/k`.
    Hyperbolic { k: f64 },
    /// `σ(t) = sin(kt)/k`.
    Spherical { k: f64 },
    /// `σ(t) = p(t) · exp(q(t))`, `p` odd with `p'(0) = 1`, `q` even.
    PolyExp { poly: Vec<f64>, exp_poly: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    /// `(t, G(t))` pairs.
    pub table: Vec<(f64, f64)>,
    #[serde(default)]
    pub interpolation: Interpolation,
    #[serde(default)]
    pub extrapolate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum CurvatureConfig {
    #[serde(rename = "closed_form_G")]
    ClosedFormG(GConfig),
    ClosedFormSigma(SigmaConfig),
    #[serde(rename = "tabulated_G")]
    TabulatedG(TableConfig),
}

/// Declared decaying bound for `G_-` beyond the checked window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TailMajorant {
    /// `G ≥ 0` eventually.
    #[default]
    Zero,
    /// `G_-(s) ≤ coefficient · s^(-power)`.
    Power { coefficient: f64, power: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileBlock {
    #[serde(flatten)]
    pub curvature: CurvatureConfig,
    #[serde(default)]
    pub tail_majorant: TailMajorant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HConfig {
    Constant(f64),
    Table { table: Vec<(f64, f64)> },
}

impl Default for HConfig {
    fn default() -> Self {
        HConfig::Constant(0.0)
    }
}

/// The profile part of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub profile: ProfileBlock,
    pub m: u32,
    #[serde(default)]
    pub l: u32,
    pub r_phi: Radius,
    #[serde(rename = "H", default)]
    pub h: HConfig,
}

// ---------------------------------------------------------------------------
// Validated profile

#[derive(Debug, Clone, PartialEq)]
pub enum GFamily {
    Constant(f64),
    Polynomial(Poly),
    PowerDecay { amplitude: f64, shift: f64, power: f64 },
}

/// Closed-form warping function with its exact derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaFamily {
    Euclidean,
    Hyperbolic { k: f64 },
    Spherical { k: f64 },
    PolyExp(PolyExp),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyExp {
    pub p: Poly,
    pub q: Poly,
    dp: Poly,
    dq: Poly,
    /// `σ''/σ · p` numerator `p'' + 2p'q' + pq'' + pq'^2`, divided by `t`.
    g_num_div_t: Poly,
    /// `p / t`.
    p_div_t: Poly,
    /// `p'/p + q' - 1/t = (t p' - p)/(t p) + q'`; numerator divided by `t^2`.
    reg_num: Poly,
}

impl PolyExp {
    fn new(p: Poly, q: Poly) -> Result<Self, ProfileError> {
        if p.coeff(0) != 0.0 || !p.has_parity(true) {
            return Err(ProfileError::BadNormalization("poly must be odd"));
        }
        if !q.has_parity(false) {
            return Err(ProfileError::BadNormalization("exp_poly must be even"));
        }
        if ((p.coeff(1) * q.coeff(0).exp()) - 1.0).abs() > 1e-12 {
            return Err(ProfileError::BadNormalization("poly'(0)·exp(exp_poly(0)) must be 1"));
        }
        let dp = p.derivative();
        let dq = q.derivative();
        let ddp = dp.derivative();
        let ddq = dq.derivative();
        let num = ddp
            .add(&dp.mul(&dq).mul(&Poly::new(vec![2.0])))
            .add(&p.mul(&ddq))
            .add(&p.mul(&dq).mul(&dq));
        let t = Poly::new(vec![0.0, 1.0]);
        let reg = t.mul(&dp).add(&p.mul(&Poly::new(vec![-1.0])));
        Ok(PolyExp {
            g_num_div_t: num.shift_down(1),
            p_div_t: p.shift_down(1),
            reg_num: reg.shift_down(2),
            p,
            q,
            dp,
            dq,
        })
    }

    /// Smallest positive root of `p`, if any below `limit`.
    fn first_zero(&self, limit: f64) -> Option<f64> {
        let n = 20_000;
        let h = limit / n as f64;
        let mut prev = self.p_div_t.eval(0.0);
        for i in 1..=n {
            let t = i as f64 * h;
            let v = self.p_div_t.eval(t);
            if v <= 0.0 && prev > 0.0 {
                let (mut a, mut b) = (t - h, t);
                for _ in 0..200 {
                    let c = 0.5 * (a + b);
                    if self.p_div_t.eval(c) > 0.0 {
                        a = c;
                    } else {
                        b = c;
                    }
                }
                return Some(0.5 * (a + b));
            }
            prev = v;
        }
        None
    }
}

/// Values of a closed-form warping function at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaValues {
    pub sigma: f64,
    pub sigma_prime: f64,
    pub log_sigma: f64,
    /// `σ'/σ`.
    pub dlog: f64,
    /// `σ'/σ - 1/t`, finite at the origin.
    pub dlog_regular: f64,
    pub sigma_second: f64,
    /// `σ''/σ`.
    pub curvature: f64,
}

impl SigmaFamily {
    fn from_config(cfg: &SigmaConfig) -> Result<Self, ProfileError> {
        Ok(match cfg {
            SigmaConfig::Euclidean => SigmaFamily::Euclidean,
            SigmaConfig::Hyperbolic { k } => {
                positive_finite(*k, "k")?;
                SigmaFamily::Hyperbolic { k: *k }
            }
            SigmaConfig::Spherical { k } => {
                positive_finite(*k, "k")?;
                SigmaFamily::Spherical { k: *k }
            }
            SigmaConfig::PolyExp { poly, exp_poly } => {
                if poly.iter().chain(exp_poly).any(|c| !c.is_finite()) {
                    return Err(ProfileError::BadParameter("poly"));
                }
                SigmaFamily::PolyExp(PolyExp::new(
                    Poly::new(poly.clone()),
                    Poly::new(exp_poly.clone()),
                )?)
            }
        })
    }

    /// First zero of `σ` on `(0, limit]`.
    pub fn first_zero(&self, limit: f64) -> Option<f64> {
        match self {
            SigmaFamily::Spherical { k } => {
                let z = std::f64::consts::PI / k;
                (z <= limit).then_some(z)
            }
            SigmaFamily::PolyExp(pe) => pe.first_zero(limit),
            _ => None,
        }
    }

    /// Evaluates `σ` and its derivatives at `t > 0`.
    pub fn eval(&self, t: f64) -> SigmaValues {
        match self {
            SigmaFamily::Euclidean => SigmaValues {
                sigma: t,
                sigma_prime: 1.0,
                log_sigma: t.ln(),
                dlog: 1.0 / t,
                dlog_regular: 0.0,
                sigma_second: 0.0,
                curvature: 0.0,
            },
            SigmaFamily::Hyperbolic { k } => {
                let x = k * t;
                let log_sigma = if x > 20.0 {
                    x + (-(-2.0 * x).exp()).ln_1p() - std::f64::consts::LN_2 - k.ln()
                } else {
                    (x.sinh() / k).ln()
                };
                let dlog = k / x.tanh();
                let dlog_regular = if x < 1e-3 {
                    // k coth(kt) - 1/t = k (x/3 - x^3/45 + 2x^5/945)
                    let x2 = x * x;
                    k * x * (1.0 / 3.0 - x2 / 45.0 + 2.0 * x2 * x2 / 945.0)
                } else {
                    dlog - 1.0 / t
                };
                SigmaValues {
                    sigma: x.sinh() / k,
                    sigma_prime: x.cosh(),
                    log_sigma,
                    dlog,
                    dlog_regular,
                    sigma_second: k * x.sinh(),
                    curvature: k * k,
                }
            }
            SigmaFamily::Spherical { k } => {
                let x = k * t;
                let dlog = k / x.tan();
                let dlog_regular = if x < 1e-3 {
                    let x2 = x * x;
                    -k * x * (1.0 / 3.0 + x2 / 45.0 + 2.0 * x2 * x2 / 945.0)
                } else {
                    dlog - 1.0 / t
                };
                SigmaValues {
                    sigma: x.sin() / k,
                    sigma_prime: x.cos(),
                    log_sigma: (x.sin() / k).ln(),
                    dlog,
                    dlog_regular,
                    sigma_second: -k * x.sin(),
                    curvature: -k * k,
                }
            }
            SigmaFamily::PolyExp(pe) => {
                let pt = pe.p.eval(t);
                let qt = pe.q.eval(t);
                let p_div_t = pe.p_div_t.eval(t);
                let dlog_regular = pe.reg_num.eval(t) / p_div_t + pe.dq.eval(t);
                let dlog = pe.dp.eval(t) / pt + pe.dq.eval(t);
                let log_sigma = t.ln() + p_div_t.ln() + qt;
                let sigma = pt * qt.exp();
                SigmaValues {
                    sigma,
                    sigma_prime: sigma * dlog,
                    log_sigma,
                    dlog,
                    dlog_regular,
                    sigma_second: t * pe.g_num_div_t.eval(t) * qt.exp(),
                    curvature: pe.g_num_div_t.eval(t) / p_div_t,
                }
            }
        }
    }

    /// Taylor coefficients of `σ` at 0.
    pub fn taylor(&self) -> Poly {
        let n = SERIES_ORDER;
        match self {
            SigmaFamily::Euclidean => Poly::new(vec![0.0, 1.0]),
            SigmaFamily::Hyperbolic { k } | SigmaFamily::Spherical { k } => {
                let sign = if matches!(self, SigmaFamily::Hyperbolic { .. }) { 1.0 } else { -1.0 };
                let mut c = vec![0.0; n + 1];
                let mut term = 1.0;
                let mut j = 1;
                while j <= n {
                    c[j] = term;
                    term *= sign * k * k / ((j + 1) * (j + 2)) as f64;
                    j += 2;
                }
                Poly::new(c)
            }
            SigmaFamily::PolyExp(pe) => {
                let q0 = pe.q.coeff(0);
                let shifted = pe.q.add(&Poly::new(vec![-q0]));
                let mut exp_series = Poly::new(vec![q0.exp()]);
                let mut power = Poly::new(vec![q0.exp()]);
                for k in 1..=n {
                    power = power.mul(&shifted).truncate(n);
                    if power.is_zero() {
                        break;
                    }
                    exp_series = exp_series.add(&power.mul(&Poly::new(vec![1.0 / factorial(k)])));
                }
                pe.p.mul(&exp_series).truncate(n)
            }
        }
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn positive_finite(x: f64, name: &'static str) -> Result<(), ProfileError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(ProfileError::BadParameter(name))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedG {
    pub interp: Interpolant,
    pub extrapolate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Curvature {
    ClosedFormG(GFamily),
    ClosedFormSigma(SigmaFamily),
    TabulatedG(TabulatedG),
}

#[derive(Debug, Clone, PartialEq)]
pub enum HEnvelope {
    Constant(f64),
    Tabulated(Interpolant),
}

impl HEnvelope {
    /// Held constant beyond the table ends.
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            HEnvelope::Constant(h) => *h,
            HEnvelope::Tabulated(t) => t.eval_clamped(r).max(0.0),
        }
    }

    pub fn constant(&self) -> Option<f64> {
        match self {
            HEnvelope::Constant(h) => Some(*h),
            HEnvelope::Tabulated(_) => None,
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            HEnvelope::Constant(h) => *h,
            HEnvelope::Tabulated(t) => t.values().iter().copied().fold(0.0, f64::max),
        }
    }
}

/// Validated curvature input plus dimension data. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpec {
    pub curvature: Curvature,
    pub m: u32,
    pub l: u32,
    pub r_phi: Radius,
    pub h_envelope: HEnvelope,
    pub tail_majorant: TailMajorant,
}

/// Builds a validated [`ProfileSpec`] from its configuration form.
pub fn make_profile(cfg: &ProfileConfig) -> Result<ProfileSpec, ProfileError> {
    if cfg.m < 2 || (cfg.l > 0 && cfg.m < cfg.l + 1) {
        return Err(ProfileError::DimensionMismatch { m: cfg.m, l: cfg.l });
    }
    let r_phi = match cfg.r_phi {
        Radius::Finite(r) if r.is_nan() || r <= 0.0 => {
            return Err(ProfileError::NonPositiveRadius(r))
        }
        Radius::Finite(r) if r.is_infinite() => Radius::Infinite,
        other => other,
    };
    let h_envelope = match &cfg.h {
        HConfig::Constant(h) => {
            if !h.is_finite() {
                return Err(ProfileError::BadParameter("H"));
            }
            if *h < 0.0 {
                return Err(ProfileError::NegativeHEnvelope(*h));
            }
            HEnvelope::Constant(*h)
        }
        HConfig::Table { table } => {
            if let Some(&(_, h)) = table.iter().find(|p| p.1 < 0.0) {
                return Err(ProfileError::NegativeHEnvelope(h));
            }
            HEnvelope::Tabulated(
                Interpolant::new(table, Interpolation::MonotoneCubic)
                    .map_err(ProfileError::NonMonotoneTable)?,
            )
        }
    };
    let curvature = match &cfg.profile.curvature {
        CurvatureConfig::ClosedFormG(g) => Curvature::ClosedFormG(match g {
            GConfig::Constant { value } => {
                if !value.is_finite() {
                    return Err(ProfileError::BadParameter("value"));
                }
                GFamily::Constant(*value)
            }
            GConfig::Polynomial { coefficients } => {
                if coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(ProfileError::BadParameter("coefficients"));
                }
                GFamily::Polynomial(Poly::new(coefficients.clone()))
            }
            GConfig::PowerDecay {
                amplitude,
                shift,
                power,
            } => {
                if !amplitude.is_finite() {
                    return Err(ProfileError::BadParameter("amplitude"));
                }
                positive_finite(*shift, "shift")?;
                positive_finite(*power, "power")?;
                GFamily::PowerDecay {
                    amplitude: *amplitude,
                    shift: *shift,
                    power: *power,
                }
            }
        }),
        CurvatureConfig::ClosedFormSigma(s) => {
            Curvature::ClosedFormSigma(SigmaFamily::from_config(s)?)
        }
        CurvatureConfig::TabulatedG(t) => {
            let interp = Interpolant::new(&t.table, t.interpolation)
                .map_err(ProfileError::NonMonotoneTable)?;
            if interp.x_min() > 0.0 && !t.extrapolate {
                return Err(ProfileError::TableMissingOrigin(interp.x_min()));
            }
            Curvature::TabulatedG(TabulatedG {
                interp,
                extrapolate: t.extrapolate,
            })
        }
    };
    if let TailMajorant::Power { coefficient, power } = cfg.profile.tail_majorant {
        if !(coefficient.is_finite() && coefficient >= 0.0) {
            return Err(ProfileError::BadParameter("tail_majorant.coefficient"));
        }
        positive_finite(power, "tail_majorant.power")?;
    }
    Ok(ProfileSpec {
        curvature,
        m: cfg.m,
        l: cfg.l,
        r_phi,
        h_envelope,
        tail_majorant: cfg.profile.tail_majorant,
    })
}

/// Outcome of the Kneser-type sufficient condition for `σ' ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KneserReport {
    pub guaranteed: bool,
    #[serde(with = "crate::serde_ext")]
    pub sup_product: f64,
    /// Absent when the supremum is not attained at a finite radius.
    pub arg_sup: Option<f64>,
    pub reason: Option<KneserFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KneserFailure {
    /// `∫^∞ G_-` diverges.
    TailUnbounded { detail: String },
    /// `G_-` exceeds the declared majorant beyond the checked window.
    MajorantViolated { at: f64 },
    /// `t ∫_t^∞ G_-` grows without bound.
    ProductUnbounded,
    /// `G` could not be evaluated.
    Evaluation { detail: String },
}

enum Tail {
    /// `∫_t^∞ G_-` for `t ≥ t_max`.
    Known(Box<dyn Fn(f64) -> f64>),
    Unbounded(String),
}

impl ProfileSpec {
    pub fn effective_dim(&self) -> u32 {
        self.m - self.l
    }

    pub fn closed_sigma(&self) -> Option<&SigmaFamily> {
        match &self.curvature {
            Curvature::ClosedFormSigma(s) => Some(s),
            _ => None,
        }
    }

    /// `G(|t|)`; for a closed-form `σ` this is `σ''/σ`.
    pub fn eval_g(&self, t: f64) -> Result<f64, ProfileError> {
        let t = t.abs();
        Ok(match &self.curvature {
            Curvature::ClosedFormG(g) => match g {
                GFamily::Constant(c) => *c,
                GFamily::Polynomial(p) => p.eval(t),
                GFamily::PowerDecay {
                    amplitude,
                    shift,
                    power,
                } => amplitude * (shift + t).powf(-power),
            },
            Curvature::ClosedFormSigma(s) => match s {
                SigmaFamily::Euclidean => 0.0,
                SigmaFamily::Hyperbolic { k } => k * k,
                SigmaFamily::Spherical { k } => -k * k,
                SigmaFamily::PolyExp(pe) => {
                    if t < SERIES_CUTOFF {
                        pe.g_num_div_t.eval(t) / pe.p_div_t.eval(t)
                    } else {
                        s.eval(t).curvature
                    }
                }
            },
            Curvature::TabulatedG(tab) => {
                let last = tab.interp.x_max();
                if t > last && !tab.extrapolate {
                    return Err(ProfileError::EvalOutsideTable { t, last });
                }
                tab.interp.eval_clamped(t)
            }
        })
    }

    /// Taylor coefficients of `G` on `t ≥ 0` at the origin, and the radius
    /// up to which that expansion is exact (or trustworthy).
    pub fn g_taylor(&self) -> (Poly, f64) {
        let n = SERIES_ORDER;
        match &self.curvature {
            Curvature::ClosedFormG(GFamily::Constant(c)) => (Poly::new(vec![*c]), f64::INFINITY),
            Curvature::ClosedFormG(GFamily::Polynomial(p)) => (p.clone(), f64::INFINITY),
            Curvature::ClosedFormG(GFamily::PowerDecay {
                amplitude,
                shift,
                power,
            }) => {
                // a (c + t)^-p = a c^-p Σ binom(-p, i) (t/c)^i
                let mut coeffs = Vec::with_capacity(n + 1);
                let mut binom = 1.0;
                for i in 0..=n {
                    coeffs.push(amplitude * shift.powf(-power) * binom / shift.powi(i as i32));
                    binom *= (-power - i as f64) / (i + 1) as f64;
                }
                (Poly::new(coeffs), *shift)
            }
            Curvature::ClosedFormSigma(s) => {
                // σ''/σ from the Taylor series of σ: exact division of power series
                let sig = s.taylor().shift_down(1);
                let dd = s.taylor().derivative().derivative().shift_down(1);
                (series_div(&dd, &sig, n.saturating_sub(3)), 0.1)
            }
            Curvature::TabulatedG(tab) => {
                let c = tab.interp.leading_taylor();
                if tab.interp.x_min() > 0.0 {
                    (Poly::new(vec![tab.interp.values()[0]]), tab.interp.x_min())
                } else {
                    let reach = tab.interp.knots()[1];
                    (Poly::new(c.to_vec()), reach)
                }
            }
        }
    }

    /// `G_-` at `t`, zero when `G` cannot be evaluated.
    fn g_minus(&self, t: f64) -> Result<f64, ProfileError> {
        Ok((-self.eval_g(t)?).max(0.0))
    }

    fn tail_beyond(&self, t_max: f64) -> Result<Tail, KneserFailure> {
        let majorant = |maj: TailMajorant| -> Result<Tail, KneserFailure> {
            // the majorant must dominate G_- where G is still evaluable
            let mut s = t_max;
            while s <= 4.0 * t_max {
                if let Ok(gm) = self.g_minus(s) {
                    let bound = match maj {
                        TailMajorant::Zero => 0.0,
                        TailMajorant::Power { coefficient, power } => coefficient * s.powf(-power),
                    };
                    if gm > bound * (1.0 + 1e-9) + 1e-14 {
                        return Err(KneserFailure::MajorantViolated { at: s });
                    }
                }
                s += t_max / 64.0;
            }
            match maj {
                TailMajorant::Zero => Ok(Tail::Known(Box::new(|_| 0.0))),
                TailMajorant::Power { coefficient, power } => {
                    if power <= 1.0 {
                        Ok(Tail::Unbounded(format!(
                            "declared majorant s^-{power} is not integrable"
                        )))
                    } else {
                        Ok(Tail::Known(Box::new(move |t: f64| {
                            coefficient * t.powf(1.0 - power) / (power - 1.0)
                        })))
                    }
                }
            }
        };
        match &self.curvature {
            Curvature::ClosedFormG(GFamily::Constant(c)) => {
                if *c < 0.0 {
                    Ok(Tail::Unbounded(format!("G ≡ {c} < 0 has a non-integrable negative part")))
                } else {
                    Ok(Tail::Known(Box::new(|_| 0.0)))
                }
            }
            Curvature::ClosedFormG(GFamily::PowerDecay {
                amplitude,
                shift,
                power,
            }) => {
                if *amplitude >= 0.0 {
                    Ok(Tail::Known(Box::new(|_| 0.0)))
                } else if *power <= 1.0 {
                    Ok(Tail::Unbounded(format!("G_- decays like s^-{power}")))
                } else {
                    let (a, c, p) = (-amplitude, *shift, *power);
                    Ok(Tail::Known(Box::new(move |t: f64| {
                        a * (c + t).powf(1.0 - p) / (p - 1.0)
                    })))
                }
            }
            Curvature::ClosedFormG(GFamily::Polynomial(p)) => {
                let Some(deg) = p.degree() else {
                    return Ok(Tail::Known(Box::new(|_| 0.0)));
                };
                let lead = p.coeff(deg);
                if lead < 0.0 {
                    return Ok(Tail::Unbounded("polynomial G is eventually negative".into()));
                }
                // beyond the Cauchy root bound G > 0
                let bound = 1.0 + (0..deg).map(|i| (p.coeff(i) / lead).abs()).fold(0.0, f64::max);
                let p = p.clone();
                Ok(Tail::Known(Box::new(move |t: f64| {
                    if t >= bound {
                        0.0
                    } else {
                        quad::integrate_nonneg(|s| (-p.eval(s)).max(0.0), t, bound, 1e-12)
                    }
                })))
            }
            Curvature::ClosedFormSigma(SigmaFamily::Spherical { k }) => Ok(Tail::Unbounded(
                format!("G ≡ -{} < 0 has a non-integrable negative part", k * k),
            )),
            Curvature::ClosedFormSigma(SigmaFamily::Euclidean | SigmaFamily::Hyperbolic { .. }) => {
                Ok(Tail::Known(Box::new(|_| 0.0)))
            }
            Curvature::TabulatedG(tab) if tab.extrapolate => {
                let last = *tab.interp.values().last().unwrap();
                if last < 0.0 {
                    Ok(Tail::Unbounded("extrapolated table holds a negative G".into()))
                } else {
                    majorant(self.tail_majorant)
                }
            }
            _ => majorant(self.tail_majorant),
        }
    }

    /// Checks `sup_t t ∫_t^∞ G_-(s) ds ≤ 1/4`, which guarantees `σ' ≥ 0`.
    ///
    /// The integral is computed on `[0, t_max]`; beyond `t_max` the tail comes
    /// from the closed form when one is known and otherwise from the declared
    /// majorant. A `false` verdict does not prove that `σ'` changes sign.
    pub fn kneser_check(&self, t_max: f64) -> KneserReport {
        let fail = |reason: KneserFailure| KneserReport {
            guaranteed: false,
            sup_product: f64::INFINITY,
            arg_sup: None,
            reason: Some(reason),
        };
        let tail = match self.tail_beyond(t_max) {
            Ok(Tail::Known(f)) => f,
            Ok(Tail::Unbounded(detail)) => return fail(KneserFailure::TailUnbounded { detail }),
            Err(reason) => return fail(reason),
        };
        let n = 2000;
        let h = t_max / n as f64;
        let gm = |s: f64| self.g_minus(s).unwrap_or(0.0);
        if let Err(e) = self.eval_g(t_max) {
            return fail(KneserFailure::Evaluation {
                detail: e.to_string(),
            });
        }
        // cumulative from the right: inner[i] = ∫_{t_i}^{t_max} G_-
        let mut inner = vec![0.0; n + 1];
        for i in (0..n).rev() {
            let a = i as f64 * h;
            inner[i] = inner[i + 1] + quad::integrate_nonneg(gm, a, a + h, 1e-13);
        }
        let tail_at_max = tail(t_max);
        let product = |t: f64| -> f64 {
            if t >= t_max {
                return t * tail(t);
            }
            let i = ((t / h).floor() as usize).min(n - 1);
            let b = (i + 1) as f64 * h;
            t * (inner[i + 1] + quad::integrate_nonneg(gm, t, b, 1e-13) + tail_at_max)
        };
        let mut best = (0.0, 0.0);
        for i in 0..=n {
            let t = i as f64 * h;
            let v = t * (inner[i] + tail_at_max);
            if v > best.1 {
                best = (t, v);
            }
        }
        // beyond the window: geometric scan of the known tail
        let mut t = t_max;
        let mut beyond = Vec::new();
        for _ in 0..200 {
            t *= 1.1;
            beyond.push((t, t * tail(t)));
        }
        let growing = beyond.windows(2).rev().take(20).all(|w| w[1].1 > w[0].1 * (1.0 + 1e-6))
            && beyond.last().unwrap().1 > 0.0;
        if growing {
            return KneserReport {
                guaranteed: false,
                sup_product: f64::INFINITY,
                arg_sup: None,
                reason: Some(KneserFailure::ProductUnbounded),
            };
        }
        for &(t, v) in &beyond {
            if v > best.1 {
                best = (t, v);
            }
        }
        if best.1 > 0.0 {
            let (lo, hi) = if best.0 <= t_max {
                ((best.0 - 2.0 * h).max(0.0), (best.0 + 2.0 * h).min(t_max))
            } else {
                (best.0 / 1.21, best.0 * 1.21)
            };
            let (x, neg) = quad::golden_min(|t| -product(t), lo, hi, 1e-12 * hi.max(1.0));
            if -neg > best.1 {
                best = (x, -neg);
            }
        }
        // rounding slack on the boundary case sup = 1/4
        let guaranteed = best.1 <= 0.25 * (1.0 + 1e-12);
        KneserReport {
            guaranteed,
            sup_product: best.1,
            arg_sup: Some(best.0),
            reason: None,
        }
    }
}

/// Power series quotient `a / b` up to degree `n` (requires `b(0) ≠ 0`).
fn series_div(a: &Poly, b: &Poly, n: usize) -> Poly {
    let b0 = b.coeff(0);
    let mut q = vec![0.0; n + 1];
    for k in 0..=n {
        let mut s = a.coeff(k);
        for j in 1..=k {
            s -= b.coeff(j) * q[k - j];
        }
        q[k] = s / b0;
    }
    Poly::new(q)
}
