//! Volumes and isoperimetric ratios of the model space.
//!
//! For effective dimension `d`:
//!
//! ```text
//! V(r)  = ∫_0^r σ^{d-1}           (ball volume up to the sphere constant)
//! I(r)  = σ(r)^{d-1} / V(r)       (non-homogeneous ratio)
//! 𝓘(r) = σ(r)^d / V(r) = σ I     (homogeneous ratio)
//! F(r)  = ∫_0^r I^{-1}            (exit-time profile, F'' + (d-1)(σ'/σ)F' = 1)
//! ```
//!
//! Volumes are accumulated in log form so that warping functions like
//! `exp(r^6/6)` never overflow.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::jacobi::WarpingFunction;
use crate::poly::Poly;
use crate::quad::{self, log_add};

/// Above this `σ` ratios are formed from logarithms.
pub const LOG_RATIO_SWITCH: f64 = 1e150;
/// Default number of uniform grid cells.
pub const DEFAULT_GRID: usize = 2000;
/// First doubling window for tail classification ends here.
pub const FIRST_WINDOW: f64 = 1.0;
/// Step of the centred difference in [`riccati_residual`].
pub const RICCATI_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IsoError {
    #[error("sigma is only known to be positive on [0, {window_end}], table requested up to {requested}")]
    SigmaNotPositive { window_end: f64, requested: f64 },
    #[error("ratio machinery needs dimension >= 2, got {0}")]
    DimensionTooSmall(u32),
    #[error("invalid table request: {0}")]
    BadRequest(String),
}

/// Three-valued verdict on `∫^{r_φ} I^{-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TailStatus {
    Converged {
        value: f64,
        /// Extrapolated contribution beyond the table (zero for finite radius).
        extrapolated_tail: f64,
        /// Window end at which the geometric decay was detected.
        decided_at: Option<f64>,
    },
    Divergent {
        /// `I^{-1} ≥ witness` on `[window_start, window_end]`.
        witness: f64,
        window_start: f64,
        window_end: f64,
    },
    Inconclusive {
        r_reached: f64,
    },
}

impl TailStatus {
    pub fn converged_value(&self) -> Option<f64> {
        match self {
            TailStatus::Converged { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, TailStatus::Divergent { .. })
    }
}

/// Sampled ratios of one warping function at one effective dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioTable {
    pub w: Arc<WarpingFunction>,
    pub dim: u32,
    pub grid: Vec<f64>,
    pub log_v: Vec<f64>,
    /// `I(r)`; `+inf` at the origin.
    pub ratio: Vec<f64>,
    /// `𝓘(r) = I(r) σ(r)`.
    pub script_ratio: Vec<f64>,
    /// `∫_0^r I^{-1}`.
    pub inv_ratio_cum: Vec<f64>,
    pub sigma: Vec<f64>,
    pub log_sigma: Vec<f64>,
    pub dlog: Vec<f64>,
    pub tol: f64,
    /// Series of `V(r) / r^d` used on `[0, t0]`.
    v_series: Poly,
    /// `σ(r)/r` series on `[0, t0]`.
    s_series: Poly,
}

/// `I` and `σ'/σ` at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioSample {
    pub ratio: f64,
    pub dlog: f64,
}

/// One evaluated point of a [`RatioTable`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioPoint {
    pub r: f64,
    pub log_v: f64,
    pub ratio: f64,
    pub script_ratio: f64,
    pub inv_ratio_cum: f64,
    pub sigma: f64,
    pub dlog: f64,
}

fn ratio_from_logs(d: u32, sigma: f64, log_sigma: f64, log_v: f64) -> f64 {
    if sigma.is_finite() && sigma <= LOG_RATIO_SWITCH {
        sigma.powi(d as i32 - 1) / log_v.exp()
    } else {
        ((d - 1) as f64 * log_sigma - log_v).exp()
    }
}

fn script_from(ratio: f64, sigma: f64, log_sigma: f64) -> f64 {
    if sigma.is_finite() {
        ratio * sigma
    } else {
        (ratio.ln() + log_sigma).exp()
    }
}

/// Builds the ratio table of dimension `d` on `[0, upto]`.
///
/// `upto` must lie inside the solved window of `w`; callers extend `w`
/// beforehand (see [`WarpingFunction::extended`]).
pub fn build_ratio_table(
    w: Arc<WarpingFunction>,
    d: u32,
    upto: f64,
    tol: f64,
    grid_points: usize,
) -> Result<RatioTable, IsoError> {
    if d < 2 {
        return Err(IsoError::DimensionTooSmall(d));
    }
    if !(upto > 0.0) || !upto.is_finite() {
        return Err(IsoError::BadRequest(format!("upto = {upto}")));
    }
    if upto > w.r_max * (1.0 + 1e-12) {
        return Err(IsoError::SigmaNotPositive {
            window_end: w.r_max,
            requested: upto,
        });
    }
    let upto = upto.min(w.r_max);
    let n = grid_points.max(1000);
    let t0 = w.t0.min(upto);
    let mut grid: Vec<f64> = (0..=n).map(|i| upto * i as f64 / n as f64).collect();
    grid.push(t0);
    let mut b = FIRST_WINDOW;
    while b < upto {
        grid.push(b);
        b *= 2.0;
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1.0));

    let s_series = w.series_head.shift_down(1);
    // V = ∫ t^{d-1} S^{d-1} = r^d · Σ c_k r^k / (k + d)
    let s_pow = s_series.pow_truncated(d - 1, 40);
    let v_series = Poly::new(
        s_pow
            .0
            .iter()
            .enumerate()
            .map(|(k, c)| c / (k as f64 + d as f64))
            .collect(),
    );

    let mut table = RatioTable {
        w,
        dim: d,
        grid: Vec::new(),
        log_v: Vec::new(),
        ratio: Vec::new(),
        script_ratio: Vec::new(),
        inv_ratio_cum: Vec::new(),
        sigma: Vec::new(),
        log_sigma: Vec::new(),
        dlog: Vec::new(),
        tol,
        v_series,
        s_series,
    };
    let m = grid.len();
    table.log_v.reserve(m);
    table.log_v.push(f64::NEG_INFINITY);
    table.inv_ratio_cum.push(0.0);
    table.ratio.push(f64::INFINITY);
    table.script_ratio.push(d as f64);
    table.sigma.push(0.0);
    table.log_sigma.push(f64::NEG_INFINITY);
    table.dlog.push(f64::INFINITY);
    table.grid.push(0.0);
    for i in 1..m {
        let (a, r) = (grid[i - 1], grid[i]);
        let log_v = table.log_v_from(a, table.log_v[i - 1], r);
        let inv_cum = table.inv_ratio_cum[i - 1] + table.inv_ratio_integral(a, table.log_v[i - 1], r);
        let st = table.w.state(r);
        let ratio = ratio_from_logs(d, st.sigma, st.log_sigma, log_v);
        table.grid.push(r);
        table.log_v.push(log_v);
        table.inv_ratio_cum.push(inv_cum);
        table.ratio.push(ratio);
        table.script_ratio.push(script_from(ratio, st.sigma, st.log_sigma));
        table.sigma.push(st.sigma);
        table.log_sigma.push(st.log_sigma);
        table.dlog.push(st.dlog);
    }
    Ok(table)
}

impl RatioTable {
    pub fn r_end(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    fn d_minus_one(&self) -> f64 {
        (self.dim - 1) as f64
    }

    fn series_log_v(&self, r: f64) -> f64 {
        self.dim as f64 * r.ln() + self.v_series.eval(r).ln()
    }

    /// `log V(x)` from the value at `a ≤ x` (with `a ≥ t0` or `x ≤ t0`).
    fn log_v_from(&self, a: f64, log_v_a: f64, x: f64) -> f64 {
        if x <= self.w.t0 {
            return self.series_log_v(x);
        }
        let (a, log_v_a) = if a < self.w.t0 {
            (self.w.t0, self.series_log_v(self.w.t0))
        } else {
            (a, log_v_a)
        };
        let dm1 = self.d_minus_one();
        let w = &self.w;
        let cell = quad::log_integrate(|t| dm1 * w.log_sigma_at(t), a, x, self.tol);
        log_add(log_v_a, cell.log_value)
    }

    /// `I^{-1}(x)` given `log V(x)`.
    fn inv_ratio_from(&self, x: f64, log_v: f64) -> f64 {
        (log_v - self.d_minus_one() * self.w.log_sigma_at(x)).exp()
    }

    /// `∫_a^x I^{-1}` with `log V(a)` known.
    fn inv_ratio_integral(&self, a: f64, log_v_a: f64, x: f64) -> f64 {
        let t0 = self.w.t0;
        let dm1 = self.d_minus_one() as i32;
        let mut total = 0.0;
        let mut lo = a;
        if lo < t0 {
            let hi = x.min(t0);
            // I^{-1} = r A(r) / S(r)^{d-1} on the series head
            let f = |r: f64| r * self.v_series.eval(r) / self.s_series.eval(r).powi(dm1);
            total += quad::integrate_nonneg(f, lo, hi, self.tol);
            lo = hi;
        }
        if x > lo {
            let log_v_lo = if lo == a { log_v_a } else { self.series_log_v(lo) };
            let g = |y: f64| {
                let lv = self.log_v_from(lo, log_v_lo, y);
                lv - self.d_minus_one() * self.w.log_sigma_at(y)
            };
            let scale = self.d_minus_one() * self.w.log_sigma_at(x).abs();
            total += quad::log_integrate_scaled(g, lo, x, self.tol, scale).value();
        }
        total
    }

    fn cell_of(&self, r: f64) -> usize {
        self.grid.partition_point(|&g| g <= r).saturating_sub(1).min(self.grid.len() - 2)
    }

    /// Evaluates every table quantity at an arbitrary radius `0 < r ≤ r_end`.
    pub fn eval_at(&self, r: f64) -> RatioPoint {
        let r = r.clamp(f64::MIN_POSITIVE, self.r_end());
        let i = self.cell_of(r);
        let a = self.grid[i];
        let log_v = if r == a { self.log_v[i] } else { self.log_v_from(a, self.log_v[i], r) };
        let inv_cum = if r == a {
            self.inv_ratio_cum[i]
        } else {
            self.inv_ratio_cum[i] + self.inv_ratio_integral(a, self.log_v[i], r)
        };
        let st = self.w.state(r);
        let ratio = ratio_from_logs(self.dim, st.sigma, st.log_sigma, log_v);
        RatioPoint {
            r,
            log_v,
            ratio,
            script_ratio: script_from(ratio, st.sigma, st.log_sigma),
            inv_ratio_cum: inv_cum,
            sigma: st.sigma,
            dlog: st.dlog,
        }
    }

    /// `I(r)` and `σ'/σ(r)` only; skips the exit-time integral.
    pub fn ratio_at(&self, r: f64) -> RatioSample {
        let r = r.clamp(f64::MIN_POSITIVE, self.r_end());
        let i = self.cell_of(r);
        let a = self.grid[i];
        let log_v = if r == a { self.log_v[i] } else { self.log_v_from(a, self.log_v[i], r) };
        let st = self.w.state(r);
        RatioSample {
            ratio: ratio_from_logs(self.dim, st.sigma, st.log_sigma, log_v),
            dlog: st.dlog,
        }
    }

    pub fn inv_ratio_cum_at(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        self.eval_at(r).inv_ratio_cum
    }

    /// `I^{-1}` at grid point `i`.
    pub fn inv_ratio(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.inv_ratio_from(self.grid[i], self.log_v[i])
        }
    }

    /// CSV with columns `r,sigma,sigma_prime_over_sigma,V_or_logV,I,script_I,inv_I_cum`.
    ///
    /// `V_or_logV` holds `V` while it is representable and `log:<ln V>` after.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,sigma,sigma_prime_over_sigma,V_or_logV,I,script_I,inv_I_cum\n");
        for i in 0..self.grid.len() {
            let v = self.log_v[i].exp();
            let v_col = if v.is_finite() && v < 1e300 {
                format!("{v}")
            } else {
                format!("log:{}", self.log_v[i])
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.grid[i],
                self.sigma[i],
                self.dlog[i],
                v_col,
                self.ratio[i],
                self.script_ratio[i],
                self.inv_ratio_cum[i]
            );
        }
        out
    }
}

/// Result of the `𝓘` monotonicity scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub nondecreasing: bool,
    pub first_violation: Option<f64>,
    /// Minimum of `q = d (σ'/σ) I^{-1} - 1`, the sign of `𝓘'`.
    pub margin_min: f64,
}

/// Threshold below which the normalised margin counts as negative.
pub fn monotone_threshold(tol: f64) -> f64 {
    (100.0 * tol).max(1e-9)
}

/// Checks `𝓘' ≥ 0` on `(0, upto]` through the sign of
/// `d σ' V - σ^d`, evaluated as `q = d (σ'/σ) / I - 1`.
pub fn check_script_ratio_monotone(t: &RatioTable, upto: f64) -> MonotoneReport {
    let d = t.dim as f64;
    let thr = monotone_threshold(t.tol);
    let q = |p: &RatioSample| d * p.dlog / p.ratio - 1.0;
    let mut samples = Vec::new();
    for i in 1..t.grid.len() {
        let (a, b) = (t.grid[i - 1], t.grid[i]);
        if a >= upto {
            break;
        }
        let mid = 0.5 * (a + b);
        samples.push(mid.min(upto));
        if b <= upto {
            samples.push(b);
        }
    }
    let mut min_q = f64::INFINITY;
    let mut first = None;
    let mut prev = 0.0;
    for &r in &samples {
        let v = q(&t.ratio_at(r));
        min_q = min_q.min(v);
        if first.is_none() && v < -thr {
            let (mut lo, mut hi) = (prev, r);
            for _ in 0..60 {
                let c = 0.5 * (lo + hi);
                if c <= 0.0 {
                    break;
                }
                if q(&t.ratio_at(c)) < -thr {
                    hi = c;
                } else {
                    lo = c;
                }
            }
            first = Some(hi);
        }
        prev = r;
    }
    MonotoneReport {
        nondecreasing: first.is_none(),
        first_violation: first,
        margin_min: min_q,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Argmin {
    Interior { r: f64 },
    /// The infimum is approached at the right end of the interval.
    LimitAtEnd { r_end: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfReport {
    pub value: f64,
    pub argmin: Argmin,
    pub limit_governed: bool,
    /// `(d - 1) lim σ'/σ` at the end of the interval, when it exists.
    pub analytic_floor: Option<f64>,
}

/// Infimum of `I` on `(0, upto]`: grid scan plus golden-section refinement
/// within two cells of the best sample.
///
/// `limit_end` says whether `upto` stands for a genuine endpoint (`false`,
/// finite radius) or a truncation of `[0, ∞)`.
pub fn inf_ratio(t: &RatioTable, upto: f64, limit_end: bool) -> InfReport {
    let upto = upto.min(t.r_end());
    let last = t.grid.partition_point(|&g| g <= upto) - 1;
    let mut best = (1usize, f64::INFINITY);
    for i in 1..=last {
        if t.ratio[i] < best.1 {
            best = (i, t.ratio[i]);
        }
    }
    let end_value = if t.grid[last] < upto { t.ratio_at(upto).ratio } else { t.ratio[last] };
    let d_minus_one = (t.dim - 1) as f64;
    let at_end = end_value <= best.1 * (1.0 + 1e-12);
    let analytic_floor = if !limit_end {
        Some(d_minus_one * t.w.state(upto).dlog)
    } else {
        let a = t.w.state(upto).dlog;
        let b = t.w.state(0.5 * upto).dlog;
        ((a - b).abs() <= 1e-6 * a.abs().max(1e-300)).then_some(d_minus_one * a)
    };
    if at_end {
        return InfReport {
            value: end_value.min(best.1),
            argmin: Argmin::LimitAtEnd { r_end: upto },
            limit_governed: true,
            analytic_floor,
        };
    }
    let lo = t.grid[best.0.saturating_sub(2).max(1)].min(t.grid[best.0]);
    let hi = t.grid[(best.0 + 2).min(last)].min(upto);
    let (x, fx) = quad::golden_min(|r| t.ratio_at(r).ratio, lo, hi, 1e-10 * hi.max(1.0));
    let (value, r) = if fx < best.1 { (fx, x) } else { (best.1, t.grid[best.0]) };
    InfReport {
        value,
        argmin: Argmin::Interior { r },
        limit_governed: false,
        analytic_floor,
    }
}

/// Options for the improper-integral classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailOptions {
    /// Extrapolated tail must be below `tail_tol · value`.
    pub tail_tol: f64,
    /// Smallest window index at which divergence may be declared.
    pub min_divergence_window: usize,
}

impl Default for TailOptions {
    fn default() -> Self {
        TailOptions {
            tail_tol: 1e-6,
            min_divergence_window: 3,
        }
    }
}

/// Classifies `∫_0^{r_φ} I^{-1}`.
///
/// A finite radius is a plain quadrature. For `r_φ = ∞` the table is cut
/// into doubling windows `[2^{j-1}, 2^j]`; the integral is declared
/// convergent once window contributions shrink by at least one half and the
/// geometric extrapolation of the remaining tail is negligible, and
/// divergent once the last two windows each contribute at least as much as
/// their predecessor (so `I^{-1}` decays no faster than `1/r`).
pub fn integral_inv_ratio(t: &RatioTable, r_phi: Option<f64>, opts: TailOptions) -> TailStatus {
    if let Some(r) = r_phi {
        if r > t.r_end() * (1.0 + 1e-12) {
            return TailStatus::Inconclusive { r_reached: t.r_end() };
        }
        return TailStatus::Converged {
            value: t.inv_ratio_cum_at(r.min(t.r_end())),
            extrapolated_tail: 0.0,
            decided_at: None,
        };
    }
    let end = t.r_end();
    let mut bounds = vec![];
    let mut b = FIRST_WINDOW;
    while b <= end * (1.0 + 1e-12) {
        bounds.push(b.min(end));
        b *= 2.0;
    }
    if bounds.len() < 2 {
        return TailStatus::Inconclusive { r_reached: end };
    }
    let cum = |r: f64| t.inv_ratio_cum_at(r);
    let contrib: Vec<f64> = (0..bounds.len())
        .map(|j| if j == 0 { cum(bounds[0]) } else { cum(bounds[j]) - cum(bounds[j - 1]) })
        .collect();
    for j in 1..bounds.len() {
        let ratio = contrib[j] / contrib[j - 1];
        if ratio <= 0.5 {
            let tail = contrib[j] * ratio / (1.0 - ratio);
            if tail < opts.tail_tol * cum(bounds[j]) {
                // use the whole table, extrapolating past its end
                let last = bounds.len() - 1;
                let r_last = contrib[last] / contrib[last - 1];
                let beyond = if r_last < 1.0 && last > j {
                    contrib[last] * r_last / (1.0 - r_last)
                } else {
                    tail
                };
                let through = if last > j { cum(end) } else { cum(bounds[j]) };
                return TailStatus::Converged {
                    value: through + beyond,
                    extrapolated_tail: beyond,
                    decided_at: Some(bounds[j]),
                };
            }
        }
        if j >= opts.min_divergence_window.max(2) {
            let prev_ratio = contrib[j - 1] / contrib[j - 2];
            if ratio >= 1.0 && prev_ratio >= 1.0 {
                let (lo, hi) = (bounds[j - 2], bounds[j]);
                let witness = (0..t.grid.len())
                    .filter(|&i| t.grid[i] >= lo && t.grid[i] <= hi)
                    .map(|i| t.inv_ratio(i))
                    .fold(f64::INFINITY, f64::min);
                if witness > 0.0 {
                    return TailStatus::Divergent {
                        witness,
                        window_start: lo,
                        window_end: hi,
                    };
                }
            }
        }
    }
    TailStatus::Inconclusive { r_reached: end }
}

/// `I' + I² - (d-1)(σ'/σ) I` at `r`, with `I'` from a centred difference.
pub fn riccati_residual(t: &RatioTable, r: f64) -> f64 {
    let h = RICCATI_STEP;
    let p = t.ratio_at(r);
    let ip = (t.ratio_at(r + h).ratio - t.ratio_at(r - h).ratio) / (2.0 * h);
    ip + p.ratio * p.ratio - (t.dim - 1) as f64 * p.dlog * p.ratio
}
