//! Quadrature and one-dimensional minimisation helpers.
//!
//! Every integrand in this crate is nonnegative and some of them span
//! thousands of orders of magnitude (warping functions growing like
//! `exp(r^6/6)`), so the adaptive rule works on the logarithm of the
//! integrand and returns the logarithm of the integral.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Gauss–Kronrod 7/15 nodes on [-1, 1] (nonnegative half, centre last).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
/// Gauss 7-point weights for the odd-indexed Kronrod nodes (1, 3, 5, centre).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Log-space adaptive Gauss–Kronrod result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogQuad {
    /// `ln ∫ f`; `-inf` when the integral is zero.
    pub log_value: f64,
    /// `ln` of the absolute error estimate.
    pub log_err: f64,
    pub intervals: usize,
    pub converged: bool,
}

impl LogQuad {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, log_add)
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    log_val: f64,
    log_err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.log_err == other.log_err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.log_err.total_cmp(&other.log_err)
    }
}

/// Largest tolerated gap between the log-integrand at an endpoint and at
/// the nearest Kronrod node before the piece is treated as unresolved.
const ENDPOINT_GAP: f64 = 4.0;

fn gk15_log<F: Fn(f64) -> f64>(log_f: &F, a: f64, b: f64) -> Piece {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut lv = [0.0f64; 15];
    for i in 0..7 {
        lv[i] = log_f(c - h * XGK[i]);
        lv[14 - i] = log_f(c + h * XGK[i]);
    }
    lv[7] = log_f(c);
    let la = log_f(a);
    let lb = log_f(b);
    let shift = lv
        .iter()
        .chain([la, lb].iter())
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return Piece {
            a,
            b,
            log_val: f64::NEG_INFINITY,
            log_err: f64::NEG_INFINITY,
        };
    }
    let w = |k: usize| (lv[k] - shift).exp();
    let mut kron = WGK[7] * w(7);
    let mut gauss = WG[3] * w(7);
    for i in 0..7 {
        let pair = w(i) + w(14 - i);
        kron += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    kron *= h;
    gauss *= h;
    let mut err = (kron - gauss).abs();
    // An endpoint much larger than its neighbouring node means the mass sits
    // between samples; bound the piece by width times the endpoint value.
    let node_left = lv[0];
    let node_right = lv[14];
    if la - node_left > ENDPOINT_GAP || lb - node_right > ENDPOINT_GAP {
        err = err.max((b - a) * ((la.max(lb)) - shift).exp());
    }
    let log_val = if kron > 0.0 { kron.ln() + shift } else { f64::NEG_INFINITY };
    let log_err = if err > 0.0 { err.ln() + shift } else { f64::NEG_INFINITY };
    Piece {
        a,
        b,
        log_val,
        log_err,
    }
}

/// Adaptive integral of `exp(log_f)` over `[a, b]`, returned in log form.
///
/// Global bisection on the piece with the largest error estimate until the
/// total error is below `rel_tol` times the total value. The tolerance is
/// floored at the rounding level of the logarithm itself.
pub fn log_integrate<F: Fn(f64) -> f64>(log_f: F, a: f64, b: f64, rel_tol: f64) -> LogQuad {
    log_integrate_scaled(log_f, a, b, rel_tol, 0.0)
}

/// As [`log_integrate`], for a log-integrand formed from terms of size up
/// to `log_scale`; their rounding sets the attainable relative accuracy.
pub fn log_integrate_scaled<F: Fn(f64) -> f64>(
    log_f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    log_scale: f64,
) -> LogQuad {
    const MAX_PIECES: usize = 4000;
    if b <= a {
        return LogQuad {
            log_value: f64::NEG_INFINITY,
            log_err: f64::NEG_INFINITY,
            intervals: 0,
            converged: true,
        };
    }
    let mut heap = BinaryHeap::new();
    heap.push(gk15_log(&log_f, a, b));
    let log_tol = rel_tol.ln();
    loop {
        let total = log_sum_exp(heap.iter().map(|p| p.log_val));
        let err = log_sum_exp(heap.iter().map(|p| p.log_err));
        // the log-integrand itself carries rounding error proportional to its size
        let noise = (1e3 * f64::EPSILON * total.abs().max(log_scale).max(1.0)).ln();
        let done = err == f64::NEG_INFINITY || err <= log_tol.max(noise) + total;
        if done || heap.len() >= MAX_PIECES {
            return LogQuad {
                log_value: total,
                log_err: err,
                intervals: heap.len(),
                converged: done,
            };
        }
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval collapsed to machine precision: accept it as is
            let mut frozen = worst;
            frozen.log_err = f64::NEG_INFINITY;
            heap.push(frozen);
            continue;
        }
        heap.push(gk15_log(&log_f, worst.a, mid));
        heap.push(gk15_log(&log_f, mid, worst.b));
    }
}

/// Adaptive integral of a nonnegative function.
pub fn integrate_nonneg<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    log_integrate(|x| f(x).max(0.0).ln(), a, b, rel_tol).value()
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, x_tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iters = 0;
    while (b - a).abs() > x_tol && iters < 200 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        iters += 1;
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(x, fx), (c, fc), (d, fd)]
        .into_iter()
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .unwrap()
}

/// Pairwise (cascade) summation in index order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let (l, r) = xs.split_at(xs.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}
