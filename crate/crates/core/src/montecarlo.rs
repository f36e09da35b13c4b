//! Monte Carlo exit times of the radial diffusion of the model space.
//!
//! The process has generator `∂² + (d-1)(σ'/σ) ∂`, i.e. the radial part of
//! the Laplacian itself (not one half of it), so
//!
//! ```text
//! dρ = (d-1) σ'/σ(ρ) dt + √2 dW
//! ```
//!
//! and its mean exit time from `[0, R)` started at `ρ0` is `F(R) - F(ρ0)`
//! with `F = ∫ I_d^{-1}`.
//!
//! Randomness: path `i` draws from `ChaCha8Rng::seed_from_u64(seed)` with
//! stream number `i` (or `i / 2` with sign-flipped increments for the odd
//! member of an antithetic pair). Results are reduced in path order, so the
//! estimate does not depend on scheduling.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::isoperimetric::RatioTable;
use crate::jacobi::WarpingFunction;
use crate::quad::pairwise_sum;

/// Paths whose radius is below `NEAR_ORIGIN · max(d, 5) · √(2dt)` take an
/// exact Gaussian step in `ℝ^d` instead of an Euler step.
const NEAR_ORIGIN: f64 = 1.0;
/// Substeps shorter than `dt · MIN_SUBSTEP` are refused.
const MIN_SUBSTEP: f64 = 1e-6;
/// Cells of the drift lookup table.
const DRIFT_CELLS: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum McError {
    #[error("invalid simulation request: {0}")]
    BadRequest(String),
    #[error("drift {drift} at r = {at} needs a step below {min_step}; reduce dt")]
    DriftBlowup { at: f64, drift: f64, min_step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    /// Paths still inside at this time are censored.
    pub t_cap: f64,
    pub antithetic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeEstimate {
    #[serde(rename = "R")]
    pub r: f64,
    pub rho0: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub mean_tau: f64,
    pub stderr_tau: f64,
    pub seed: u64,
    pub n_censored: usize,
    /// Censored paths count with `t_cap`, so the mean is only a lower bound.
    pub lower_bound_only: bool,
    pub t_cap: f64,
    pub antithetic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRecord {
    pub tau: f64,
    pub censored: bool,
}

/// `F(r) = ∫_0^r I_d^{-1}`, the model's mean exit time from the ball of radius `r`.
pub fn exit_time_profile(t: &RatioTable, r: f64) -> f64 {
    t.inv_ratio_cum_at(r)
}

/// `σ'/σ - 1/r` on a uniform grid, linearly interpolated.
struct Drift {
    h_inv: f64,
    /// `(value, slope per cell)` pairs.
    cells: Vec<[f64; 2]>,
    max_abs: f64,
}

impl Drift {
    fn new(w: &WarpingFunction, r_max: f64) -> Self {
        let h = r_max / DRIFT_CELLS as f64;
        let vals: Vec<f64> = (0..=DRIFT_CELLS)
            .map(|i| w.state((i as f64 * h).min(w.r_max)).dlog_regular)
            .collect();
        let max_abs = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let cells = vals.windows(2).map(|p| [p[0], p[1] - p[0]]).collect();
        Drift {
            h_inv: 1.0 / h,
            cells,
            max_abs,
        }
    }

    #[inline]
    fn regular(&self, r: f64) -> f64 {
        let x = r * self.h_inv;
        let i = (x as usize).min(DRIFT_CELLS - 1);
        let [v, s] = self.cells[i];
        v + (x - i as f64) * s
    }
}

struct Path<'a> {
    drift: &'a Drift,
    dm1: f64,
    d: usize,
    r: f64,
    dt: f64,
    sqrt_2dt: f64,
    /// Drift above which a step is split.
    b_max: f64,
    near: f64,
    t_cap: f64,
}

/// Paths advanced together by one worker; independent dependency chains
/// keep the floating-point pipeline busy.
const LANES: usize = 8;

enum Outcome {
    Running,
    Done(PathRecord),
}

struct Lane {
    index: usize,
    rho: f64,
    t: f64,
    sign: f64,
    rng: ChaCha8Rng,
}

impl Path<'_> {
    #[inline]
    fn normal(rng: &mut ChaCha8Rng, sign: f64) -> f64 {
        sign * rng.sample::<f64, _>(StandardNormal)
    }

    /// One step of one path.
    #[inline]
    fn step(&self, lane: &mut Lane) -> Result<Outcome, McError> {
        if lane.rho >= self.r {
            return Ok(Outcome::Done(PathRecord { tau: lane.t, censored: false }));
        }
        if lane.t >= self.t_cap {
            return Ok(Outcome::Done(PathRecord { tau: self.t_cap, censored: true }));
        }
        let rho = lane.rho;
        let g = self.drift.regular(rho);
        if rho < self.near {
            // exact step of Brownian motion in ℝ^d, then the regular drift
            let x0 = rho + self.sqrt_2dt * Self::normal(&mut lane.rng, lane.sign);
            let mut s = x0 * x0;
            for _ in 1..self.d {
                let z = self.sqrt_2dt * Self::normal(&mut lane.rng, lane.sign);
                s += z * z;
            }
            lane.rho = (s.sqrt() + self.dm1 * g * self.dt).abs();
            lane.t += self.dt;
            return Ok(Outcome::Running);
        }
        let b = self.dm1 * (1.0 / rho + g);
        if b.abs() <= self.b_max {
            lane.rho = (rho + b * self.dt + self.sqrt_2dt * Self::normal(&mut lane.rng, lane.sign)).abs();
            lane.t += self.dt;
            return Ok(Outcome::Running);
        }
        let h = 1.0 / (b * b);
        if h < self.dt * MIN_SUBSTEP {
            return Err(McError::DriftBlowup {
                at: rho,
                drift: b,
                min_step: h,
            });
        }
        lane.rho = (rho + b * h + (2.0 * h).sqrt() * Self::normal(&mut lane.rng, lane.sign)).abs();
        lane.t += h;
        Ok(Outcome::Running)
    }

    /// Runs paths `range`, writing each record at its own index.
    fn run_block(
        &self,
        range: std::ops::Range<usize>,
        rho0: f64,
        opts: &McOptions,
        out: &mut [PathRecord],
    ) -> Result<(), McError> {
        let base = range.start;
        let make = |i: usize| {
            let (stream, sign) = if opts.antithetic {
                ((i / 2) as u64, if i % 2 == 0 { 1.0 } else { -1.0 })
            } else {
                (i as u64, 1.0)
            };
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(stream);
            Lane {
                index: i,
                rho: rho0,
                t: 0.0,
                sign,
                rng,
            }
        };
        let mut next = range.start;
        let mut lanes: Vec<Lane> = Vec::with_capacity(LANES);
        while lanes.len() < LANES && next < range.end {
            lanes.push(make(next));
            next += 1;
        }
        // plain Euler steps run interleaved across lanes; the rest goes through `step`
        let fast_lo = self.near;
        let (r, t_stop) = (self.r, self.t_cap - self.dt);
        // above `near` the drift bound only matters when `σ'/σ - 1/r` is large
        let check_b = self.dm1 * (1.0 / fast_lo + self.drift.max_abs) > self.b_max;
        let mut stalled = [false; LANES];
        let (dm1, dt, sqrt_2dt, b_max) = (self.dm1, self.dt, self.sqrt_2dt, self.b_max);
        let drift = self.drift;
        while !lanes.is_empty() {
            loop {
                let mut any_stalled = false;
                for (k, lane) in lanes.iter_mut().enumerate() {
                    let rho = lane.rho;
                    let b = dm1 * (1.0 / rho + drift.regular(rho));
                    if !(rho >= fast_lo && rho < r && lane.t < t_stop) || (check_b && b.abs() > b_max) {
                        stalled[k] = true;
                        any_stalled = true;
                        continue;
                    }
                    let z = Self::normal(&mut lane.rng, lane.sign);
                    lane.rho = (rho + b * dt + sqrt_2dt * z).abs();
                    lane.t += dt;
                }
                if any_stalled {
                    break;
                }
            }
            let mut k = lanes.len();
            while k > 0 {
                k -= 1;
                if !stalled[k] {
                    continue;
                }
                stalled[k] = false;
                if let Outcome::Done(rec) = self.step(&mut lanes[k])? {
                    out[lanes[k].index - base] = rec;
                    if next < range.end {
                        lanes[k] = make(next);
                        next += 1;
                    } else {
                        lanes.swap_remove(k);
                        let last = lanes.len();
                        stalled.swap(k, last);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Simulates `opts.n_paths` exit times from the ball of radius `r`.
pub fn simulate_exit_time(
    w: &WarpingFunction,
    d: u32,
    r: f64,
    rho0: f64,
    opts: &McOptions,
) -> Result<(ExitTimeEstimate, Vec<PathRecord>), McError> {
    if d < 2 {
        return Err(McError::BadRequest(format!("dimension {d} < 2")));
    }
    if !(r > 0.0) || r > w.r_max * (1.0 + 1e-12) {
        return Err(McError::BadRequest(format!(
            "exit radius {r} outside the solved window [0, {}]",
            w.r_max
        )));
    }
    if !(0.0..=r).contains(&rho0) {
        return Err(McError::BadRequest(format!("start radius {rho0} not in [0, {r}]")));
    }
    if !(opts.dt > 0.0) || opts.dt > (r / 100.0).powi(2) {
        return Err(McError::BadRequest(format!(
            "dt = {} must be positive and at most (R/100)^2 = {}",
            opts.dt,
            (r / 100.0).powi(2)
        )));
    }
    if opts.n_paths < 1000 {
        return Err(McError::BadRequest(format!("n_paths = {} < 1000", opts.n_paths)));
    }
    if opts.antithetic && opts.n_paths % 2 == 1 {
        return Err(McError::BadRequest("antithetic pairing needs an even n_paths".into()));
    }
    if !(opts.t_cap > 0.0) {
        return Err(McError::BadRequest("t_cap must be positive".into()));
    }
    let drift = Drift::new(w, r);
    let sqrt_2dt = (2.0 * opts.dt).sqrt();
    let path = Path {
        drift: &drift,
        dm1: (d - 1) as f64,
        d: d as usize,
        r,
        dt: opts.dt,
        sqrt_2dt,
        b_max: 1.0 / opts.dt.sqrt(),
        near: NEAR_ORIGIN * (d.max(5) as f64) * sqrt_2dt,
        t_cap: opts.t_cap,
    };
    const BLOCK: usize = 256;
    let mut records = vec![PathRecord { tau: 0.0, censored: false }; opts.n_paths];
    records
        .par_chunks_mut(BLOCK)
        .enumerate()
        .try_for_each(|(b, out)| {
            let start = b * BLOCK;
            path.run_block(start..start + out.len(), rho0, opts, out)
        })?;

    let taus: Vec<f64> = records.iter().map(|p| p.tau).collect();
    let n = taus.len() as f64;
    let mean = pairwise_sum(&taus) / n;
    let stderr = if opts.antithetic {
        let pairs: Vec<f64> = taus.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect();
        let k = pairs.len() as f64;
        let dev: Vec<f64> = pairs.iter().map(|p| (p - mean).powi(2)).collect();
        (pairwise_sum(&dev) / (k - 1.0) / k).sqrt()
    } else {
        let dev: Vec<f64> = taus.iter().map(|p| (p - mean).powi(2)).collect();
        (pairwise_sum(&dev) / (n - 1.0) / n).sqrt()
    };
    let n_censored = records.iter().filter(|p| p.censored).count();
    Ok((
        ExitTimeEstimate {
            r,
            rho0,
            n_paths: opts.n_paths,
            dt: opts.dt,
            mean_tau: mean,
            stderr_tau: stderr,
            seed: opts.seed,
            n_censored,
            lower_bound_only: n_censored > 0,
            t_cap: opts.t_cap,
            antithetic: opts.antithetic,
        },
        records,
    ))
}

/// Per-path CSV with columns `path_index,tau,censored`.
pub fn paths_csv(records: &[PathRecord]) -> String {
    let mut out = String::from("path_index,tau,censored\n");
    for (i, p) in records.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{}", p.tau, p.censored);
    }
    out
}
