//! The warping function: solution of `σ'' = G σ`, `σ(0) = 0`, `σ'(0) = 1`.
//!
//! Near the origin the solution is a truncated power series obtained by
//! formal substitution; from the handover radius `t0` on, an adaptive
//! Dormand–Prince integrator with dense output takes over. Once `σ`
//! exceeds [`LOG_SWITCH`] the integrator continues with `(log σ, σ'/σ)`,
//! which obeys `u' = v`, `v' = G - v²`.
//!
//! Closed-form warping functions are evaluated exactly and only checked.

use std::fmt::Write as _;

use crate::ode::{self, Attempt, Segment, State, Tolerance};
use crate::poly::Poly;
use crate::profile::{Curvature, ProfileError, ProfileSpec, SigmaFamily};

pub const LOG_SWITCH: f64 = 1e300;
const MAX_STEPS: usize = 2_000_000;
const CLOSED_GRID: usize = 4000;
const T0_CAP: f64 = 0.05;

#[derive(Debug, Clone, thiserror::Error)]
pub enum JacobiError {
    #[error("sigma vanishes at r* = {r_star}")]
    SigmaVanished {
        r_star: f64,
        /// Solution restricted to `[0, r*)`.
        partial: Box<WarpingFunction>,
    },
    #[error("step size underflow at r = {last_good}")]
    StepUnderflow {
        last_good: f64,
        partial: Box<WarpingFunction>,
    },
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// state `(σ, σ')`
    Linear,
    /// state `(log σ, σ'/σ)`
    Log,
}

#[derive(Debug, Clone, PartialEq)]
struct Piece {
    mode: Mode,
    seg: Segment,
}

#[derive(Debug, Clone, PartialEq)]
enum Source {
    Closed(SigmaFamily),
    Numeric(Vec<Piece>),
}

/// `σ` and friends at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpState {
    /// May be `+inf` once the logarithmic representation is active.
    pub sigma: f64,
    pub sigma_prime: f64,
    pub log_sigma: f64,
    /// `σ'/σ`.
    pub dlog: f64,
    /// `σ'/σ - 1/r`.
    pub dlog_regular: f64,
}

/// Dense solution of the warping problem on `[0, r_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpingFunction {
    source: Source,
    pub grid: Vec<f64>,
    pub sigma: Vec<f64>,
    pub sigma_prime: Vec<f64>,
    pub log_sigma: Vec<f64>,
    pub dlog: Vec<f64>,
    /// Odd-dominated power series of `σ` used on `[0, t0]`.
    pub series_head: Poly,
    pub t0: f64,
    pub r_max: f64,
    pub tol: f64,
    /// `max |σ'' - Gσ| / (1 + |Gσ|)` over step midpoints (log form in the
    /// logarithmic regime).
    pub max_defect: f64,
}

/// Power series of the solution from the Taylor coefficients of `G`:
/// `n(n-1) s_n = Σ_{i ≤ n-2} g_i s_{n-2-i}` with `s_0 = 0`, `s_1 = 1`.
pub fn series_from_g(g: &Poly, degree: usize) -> Poly {
    let mut s = vec![0.0; degree + 1];
    if degree >= 1 {
        s[1] = 1.0;
    }
    for n in 2..=degree {
        let acc: f64 = (0..=n - 2).map(|i| g.coeff(i) * s[n - 2 - i]).sum();
        s[n] = acc / (n * (n - 1)) as f64;
    }
    Poly::new(s)
}

/// Handover radius: the omitted series terms stay below `tol · t`.
fn handover(full: &Poly, kept: usize, reach: f64, r_max: f64, tol: f64) -> f64 {
    let omitted = |t: f64| {
        (kept + 1..=kept + 2)
            .map(|n| full.coeff(n).abs() * t.powi(n as i32))
            .sum::<f64>()
    };
    let mut t = T0_CAP.min(0.5 * reach).min(0.25 * r_max);
    while t > 1e-6 && omitted(t) > 0.1 * tol * t {
        t *= 0.8;
    }
    t.max(1e-6)
}

const HEAD_DEGREE: usize = 9;

/// Local error target handed to the step controller. The dense-output
/// derivative converges like `rtol^(4/5)`, so a super-linear map makes the
/// defect scale linearly (or better) with the requested tolerance.
fn controller_rtol(tol: f64) -> f64 {
    tol.powf(1.5).clamp(5e-15, tol)
}

fn series_state(head: &Poly, r: f64) -> WarpState {
    let s = head.eval(r);
    let ds = head.derivative().eval(r);
    // σ = r S(r); σ'/σ = 1/r + S'/S
    let big_s = head.shift_down(1);
    let sv = big_s.eval(r);
    let reg = big_s.derivative().eval(r) / sv;
    WarpState {
        sigma: s,
        sigma_prime: ds,
        log_sigma: r.ln() + sv.ln(),
        dlog: 1.0 / r + reg,
        dlog_regular: reg,
    }
}

/// Solves the warping problem on `[0, r_max]` with relative tolerance `tol`.
pub fn solve_sigma(p: &ProfileSpec, r_max: f64, tol: f64) -> Result<WarpingFunction, JacobiError> {
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(JacobiError::BadRequest(format!("r_max = {r_max}")));
    }
    if !(1e-13..=1e-3).contains(&tol) {
        return Err(JacobiError::BadRequest(format!("tol = {tol} outside [1e-13, 1e-3]")));
    }
    match p.closed_sigma() {
        Some(fam) => solve_closed(p, fam, r_max, tol),
        None => solve_numeric(p, r_max, tol),
    }
}

fn solve_closed(
    p: &ProfileSpec,
    fam: &SigmaFamily,
    r_max: f64,
    tol: f64,
) -> Result<WarpingFunction, JacobiError> {
    let full = fam.taylor();
    let head = full.truncate(HEAD_DEGREE);
    let t0 = handover(&full, HEAD_DEGREE, f64::INFINITY, r_max, tol);
    let vanish = fam.first_zero(r_max);
    let end = vanish.unwrap_or(r_max);
    let mut grid = vec![0.0];
    let n = CLOSED_GRID;
    for i in 0..=n {
        let r = t0 + (end - t0) * i as f64 / n as f64;
        if vanish.is_some() && i == n {
            break;
        }
        grid.push(r);
    }
    let mut w = WarpingFunction {
        source: Source::Closed(fam.clone()),
        grid: Vec::new(),
        sigma: Vec::new(),
        sigma_prime: Vec::new(),
        log_sigma: Vec::new(),
        dlog: Vec::new(),
        series_head: head,
        t0,
        r_max: end,
        tol,
        max_defect: 0.0,
    };
    w.fill_samples(grid);
    let mut defect: f64 = 0.0;
    for pair in w.grid.windows(2) {
        let mid = 0.5 * (pair[0] + pair[1]);
        let v = fam.eval(mid);
        let g = p.eval_g(mid)?;
        // σ''/σ against G, normalised like |σ'' - Gσ| / (1 + |Gσ|) with σ factored out
        let d = (v.curvature - g).abs() / (1.0 / v.sigma.abs().min(1e300) + g.abs());
        defect = defect.max(d);
    }
    w.max_defect = defect;
    match vanish {
        Some(r_star) => Err(JacobiError::SigmaVanished {
            r_star,
            partial: Box::new(w),
        }),
        None => Ok(w),
    }
}

fn solve_numeric(p: &ProfileSpec, r_max: f64, tol: f64) -> Result<WarpingFunction, JacobiError> {
    let (g_taylor, reach) = p.g_taylor();
    let full = series_from_g(&g_taylor, HEAD_DEGREE + 2);
    let head = full.truncate(HEAD_DEGREE);
    let t0 = handover(&full, HEAD_DEGREE, reach, r_max, tol);
    // fail early on unevaluable G
    p.eval_g(r_max)?;

    let rhs_lin = |t: f64, y: &State| -> Result<State, String> {
        let g = p.eval_g(t).map_err(|e| e.to_string())?;
        Ok([y[1], g * y[0]])
    };
    let rhs_log = |t: f64, y: &State| -> Result<State, String> {
        let g = p.eval_g(t).map_err(|e| e.to_string())?;
        Ok([y[1], g - y[1] * y[1]])
    };
    let rtol = controller_rtol(tol);
    let ode_tol = Tolerance {
        rtol,
        atol: rtol * 1e-3,
    };
    let start = series_state(&head, t0);
    let mut mode = Mode::Linear;
    let mut t = t0;
    let mut y: State = [start.sigma, start.sigma_prime];
    let mut h = (0.01 * tol.powf(0.2)).max(1e-4).min(r_max - t0);
    let mut pieces: Vec<Piece> = Vec::new();
    let mut vanished = None;
    let mut underflow = None;
    let mut steps = 0usize;
    // steps never straddle a knot of tabulated data (G is only C¹ there)
    let breakpoints: Vec<f64> = match &p.curvature {
        Curvature::TabulatedG(tab) => tab
            .interp
            .knots()
            .iter()
            .copied()
            .filter(|&k| k > t0 && k < r_max)
            .collect(),
        _ => Vec::new(),
    };

    while t < r_max {
        steps += 1;
        let rhs = |tt: f64, yy: &State| match mode {
            Mode::Linear => rhs_lin(tt, yy),
            Mode::Log => rhs_log(tt, yy),
        };
        let next_stop = breakpoints
            .iter()
            .copied()
            .find(|&k| k > t * (1.0 + 1e-15))
            .unwrap_or(r_max);
        let step = h.min(next_stop - t);
        if step < 1e-14 * t.max(1.0) || steps > MAX_STEPS {
            underflow = Some(t);
            break;
        }
        let k1 = rhs(t, &y).map_err(JacobiError::BadRequest)?;
        match ode::attempt(&rhs, t, &y, &k1, step, ode_tol).map_err(JacobiError::BadRequest)? {
            Attempt::Rejected { next_h } => h = next_h,
            Attempt::Accepted { segment, next_h } => {
                let end = segment.end();
                if mode == Mode::Linear && end[0] <= 0.0 {
                    // σ crossed zero inside this step
                    let (mut a, mut b) = (segment.t0, segment.t1());
                    for _ in 0..200 {
                        let c = 0.5 * (a + b);
                        if segment.eval(c)[0] > 0.0 {
                            a = c;
                        } else {
                            b = c;
                        }
                    }
                    let r_star = 0.5 * (a + b);
                    vanished = Some(r_star);
                    pieces.push(Piece { mode, seg: segment });
                    break;
                }
                t = segment.t1();
                y = end;
                h = next_h;
                pieces.push(Piece { mode, seg: segment });
                if mode == Mode::Linear && y[0] > LOG_SWITCH {
                    y = [y[0].ln(), y[1] / y[0]];
                    mode = Mode::Log;
                }
            }
        }
    }

    let end = vanished.or(underflow).unwrap_or(r_max);
    let mut grid = vec![0.0, t0];
    grid.extend(pieces.iter().map(|pc| pc.seg.t1()).filter(|&r| r < end));
    if vanished.is_none() && underflow.is_none() {
        grid.pop();
        grid.push(r_max);
    }
    let mut defect: f64 = 0.0;
    for pc in &pieces {
        let mid = pc.seg.t0 + 0.5 * pc.seg.h;
        if mid >= end {
            continue;
        }
        let g = p.eval_g(mid)?;
        let y = pc.seg.eval(mid);
        let dy = pc.seg.eval_derivative(mid);
        let d = match pc.mode {
            Mode::Linear => (dy[1] - g * y[0]).abs() / (1.0 + (g * y[0]).abs()),
            Mode::Log => (dy[1] - (g - y[1] * y[1])).abs() / (1.0 + g.abs() + y[1] * y[1]),
        };
        defect = defect.max(d);
    }
    let mut w = WarpingFunction {
        source: Source::Numeric(pieces),
        grid: Vec::new(),
        sigma: Vec::new(),
        sigma_prime: Vec::new(),
        log_sigma: Vec::new(),
        dlog: Vec::new(),
        series_head: head,
        t0,
        r_max: end,
        tol,
        max_defect: defect,
    };
    w.fill_samples(grid);
    if let Some(r_star) = vanished {
        return Err(JacobiError::SigmaVanished {
            r_star,
            partial: Box::new(w),
        });
    }
    if let Some(last_good) = underflow {
        return Err(JacobiError::StepUnderflow {
            last_good,
            partial: Box::new(w),
        });
    }
    Ok(w)
}

impl WarpingFunction {
    fn fill_samples(&mut self, grid: Vec<f64>) {
        let n = grid.len();
        let (mut s, mut sp, mut ls, mut dl) = (
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        );
        for &r in &grid {
            if r == 0.0 {
                s.push(0.0);
                sp.push(1.0);
                ls.push(f64::NEG_INFINITY);
                dl.push(f64::INFINITY);
            } else {
                let st = self.state(r);
                s.push(st.sigma);
                sp.push(st.sigma_prime);
                ls.push(st.log_sigma);
                dl.push(st.dlog);
            }
        }
        self.grid = grid;
        self.sigma = s;
        self.sigma_prime = sp;
        self.log_sigma = ls;
        self.dlog = dl;
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.source, Source::Closed(_))
    }

    /// State at `0 < r ≤ r_max` (clamped to the solved range).
    pub fn state(&self, r: f64) -> WarpState {
        let r = r.min(self.r_max);
        match &self.source {
            Source::Closed(fam) => {
                let v = fam.eval(r);
                WarpState {
                    sigma: v.sigma,
                    sigma_prime: v.sigma_prime,
                    log_sigma: v.log_sigma,
                    dlog: v.dlog,
                    dlog_regular: v.dlog_regular,
                }
            }
            Source::Numeric(pieces) => {
                if r <= self.t0 || pieces.is_empty() {
                    return series_state(&self.series_head, r);
                }
                let i = pieces
                    .partition_point(|pc| pc.seg.t1() < r)
                    .min(pieces.len() - 1);
                let pc = &pieces[i];
                let y = pc.seg.eval(r);
                match pc.mode {
                    Mode::Linear => {
                        let dlog = y[1] / y[0];
                        WarpState {
                            sigma: y[0],
                            sigma_prime: y[1],
                            log_sigma: y[0].ln(),
                            dlog,
                            dlog_regular: dlog - 1.0 / r,
                        }
                    }
                    Mode::Log => {
                        let sigma = y[0].exp();
                        WarpState {
                            sigma,
                            sigma_prime: sigma * y[1],
                            log_sigma: y[0],
                            dlog: y[1],
                            dlog_regular: y[1] - 1.0 / r,
                        }
                    }
                }
            }
        }
    }

    pub fn log_sigma_at(&self, r: f64) -> f64 {
        self.state(r).log_sigma
    }

    /// Re-solves on a larger window; the receiver is left untouched.
    pub fn extended(&self, p: &ProfileSpec, r_max: f64) -> Result<WarpingFunction, JacobiError> {
        if r_max <= self.r_max {
            return Ok(self.clone());
        }
        solve_sigma(p, r_max, self.tol)
    }

    /// CSV with columns `r,sigma,sigma_prime,log_sigma,sigma_prime_over_sigma`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,sigma,sigma_prime,log_sigma,sigma_prime_over_sigma\n");
        for i in 0..self.grid.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.grid[i], self.sigma[i], self.sigma_prime[i], self.log_sigma[i], self.dlog[i]
            );
        }
        out
    }
}

/// Sign scan of `σ` and `σ'` on `[0, R]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PositivityReport {
    pub sigma_positive: bool,
    pub sigma_prime_nonneg: bool,
    pub first_violation: Option<f64>,
}

/// Scans grid points and dense-output subsamples with `-tol` as the sign
/// threshold; `first_violation` is refined by bisection.
pub fn check_positivity_monotonicity(w: &WarpingFunction, upto: f64) -> PositivityReport {
    let upto = upto.min(w.r_max);
    let thr = -w.tol;
    let bad = |r: f64| {
        let st = w.state(r);
        // in the logarithmic regime σ > 0 by construction, sign of σ' is sign of σ'/σ
        let prime_bad = if st.sigma.is_finite() {
            st.sigma_prime < thr
        } else {
            st.dlog < thr
        };
        (st.sigma <= 0.0, prime_bad)
    };
    let sub = 8;
    let mut prev = w.t0.min(upto) * 0.5;
    let mut samples: Vec<f64> = Vec::new();
    for pair in w.grid.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a >= upto {
            break;
        }
        let b = b.min(upto);
        for j in 1..=sub {
            samples.push(a + (b - a) * j as f64 / sub as f64);
        }
    }
    let mut report = PositivityReport {
        sigma_positive: true,
        sigma_prime_nonneg: true,
        first_violation: None,
    };
    for &r in &samples {
        let (s_bad, p_bad) = bad(r);
        if s_bad || p_bad {
            let (mut a, mut b) = (prev, r);
            for _ in 0..100 {
                let c = 0.5 * (a + b);
                let (sb, pb) = bad(c);
                if sb || pb {
                    b = c;
                } else {
                    a = c;
                }
            }
            let (sb, pb) = bad(b);
            report.sigma_positive = !sb;
            report.sigma_prime_nonneg = !pb;
            report.first_violation = Some(b);
            // keep scanning for σ ≤ 0 beyond the first σ' violation
            if report.sigma_positive {
                report.sigma_positive = samples.iter().filter(|&&x| x > b).all(|&x| !bad(x).0);
            }
            return report;
        }
        prev = r;
    }
    report
}
