//! Monte Carlo estimates of hitting probabilities `P^x[T_A < ∞]` for unions
//! of balls: walk-on-spheres for Brownian motion and a skeleton random walk
//! for isotropic α-stable processes.
//!
//! Every path draws from its own ChaCha stream selected by the path index,
//! and only integer counts are reduced across threads, so results do not
//! depend on scheduling.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::BallConfig;
use crate::error::{Error, Result};
use crate::kernel::{Kernel, Point};
use crate::spatial::BallIndex;
use crate::wiener::csv_number;

/// Walk-on-spheres radius as a fraction of the clearance.
pub const WOS_RADIUS_FRACTION: f64 = 0.45;
/// A walker this close to a ball, relative to its radius, has hit it.
pub const HIT_TOLERANCE: f64 = 1e-9;
/// Default escape bias budget.
pub const TARGET_BIAS: f64 = 1e-3;
/// Fraction of truncated paths above which a warning is issued.
const TRUNCATION_WARNING: f64 = 1e-3;
/// Stable walk: away from the balls the step scale is this fraction of
/// the clearance.
const STEP_GROWTH: f64 = 0.1;
const SELF_CHECK_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub paths: u64,
    /// Escape radius around `x₀`; chosen from the bias budget when absent.
    pub r_esc: Option<f64>,
    pub seed: u64,
    pub max_steps: u64,
    /// Stable walk: smallest step scale; `0.1·(min radius)` when absent.
    pub step_scale: Option<f64>,
    /// Stable walk: rerun with half the step scale and compare.
    pub self_check: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        Self { paths: 100_000, r_esc: None, seed: 0, max_steps: 1_000_000, step_scale: None, self_check: true }
    }
}

/// Result of a halved-step rerun of the stable walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepSelfCheck {
    pub step_scale: f64,
    pub p_hat: f64,
    pub stderr: f64,
    /// `|p̂ − p̂_half|` in units of the combined standard error.
    pub shift_sigmas: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub escape_bias_bound: f64,
    pub paths: u64,
    pub hits: u64,
    pub seed: u64,
    pub r_esc: f64,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub self_check: Option<StepSelfCheck>,
}

impl HittingEstimate {
    fn from_counts(hits: u64, paths: u64, seed: u64, r_esc: f64, bias: f64) -> Self {
        let p_hat = hits as f64 / paths as f64;
        Self {
            p_hat,
            stderr: (p_hat * (1.0 - p_hat) / paths as f64).sqrt(),
            escape_bias_bound: bias,
            paths,
            hits,
            seed,
            r_esc,
            warnings: Vec::new(),
            self_check: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PathEnd {
    Hit,
    Escape,
    Truncated,
}

#[derive(Debug, Default, Clone, Copy)]
struct Counts {
    hits: u64,
    truncated: u64,
}

fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

fn run_paths(paths: u64, seed: u64, walk: impl Fn(&mut ChaCha8Rng) -> PathEnd + Sync) -> Counts {
    (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            match walk(&mut rng) {
                PathEnd::Hit => Counts { hits: 1, truncated: 0 },
                PathEnd::Escape => Counts::default(),
                PathEnd::Truncated => Counts { hits: 0, truncated: 1 },
            }
        })
        .reduce(Counts::default, |a, b| Counts { hits: a.hits + b.hits, truncated: a.truncated + b.truncated })
}

/// Uniform point of the unit sphere of ℝᵈ.
pub fn unit_direction<R: Rng + ?Sized>(rng: &mut R, d: usize, out: &mut [f64]) {
    loop {
        let mut n2 = 0.0;
        for o in out.iter_mut().take(d) {
            let g: f64 = rng.sample(StandardNormal);
            *o = g;
            n2 += g * g;
        }
        if n2 > 1e-300 {
            let inv = 1.0 / n2.sqrt();
            out.iter_mut().for_each(|o| *o *= inv);
            return;
        }
    }
}

/// Positive strictly `a`-stable variable with `E e^{−sW} = e^{−s^a}`,
/// `0 < a < 1`, by Kanter's representation.
pub fn positive_stable<R: Rng + ?Sized>(rng: &mut R, a: f64) -> f64 {
    loop {
        let theta = std::f64::consts::PI * rng.random::<f64>();
        let e: f64 = rng.sample(Exp1);
        if theta <= 0.0 || e <= 0.0 {
            continue;
        }
        let num = (a * theta).sin().powf(a / (1.0 - a)) * ((1.0 - a) * theta).sin();
        let den = theta.sin().powf(1.0 / (1.0 - a));
        let w = (num / den / e).powf((1.0 - a) / a);
        if w.is_finite() && w > 0.0 {
            return w;
        }
    }
}

/// Isotropic α-stable vector with characteristic function `e^{−|ξ|^α}`,
/// as `√(2W)·N` with `W` positive `α/2`-stable and `N` standard normal.
pub fn isotropic_stable<R: Rng + ?Sized>(rng: &mut R, alpha: f64, out: &mut [f64]) {
    let scale = if alpha == 2.0 { 2f64.sqrt() } else { (2.0 * positive_stable(rng, alpha / 2.0)).sqrt() };
    for o in out.iter_mut() {
        let g: f64 = rng.sample(StandardNormal);
        *o = scale * g;
    }
}

/// `min(1, c²·g(r_esc)/g(R_A))`, tightened for explicit configurations by
/// the per-ball sum `Σ c²·g(r_esc − |z − x₀|)/g(r_z)`.
pub fn escape_bias(config: &BallConfig, kernel: &Kernel, r_esc: f64) -> f64 {
    let c2 = kernel.comparison_constant().powi(2);
    let reach = config.reach();
    if reach == 0.0 {
        return 0.0;
    }
    let mut bias = (c2 * kernel.g(r_esc) / kernel.g(reach)).min(1.0);
    if let Some(balls) = config.explicit_balls() {
        let sum: f64 = balls
            .iter()
            .map(|b| c2 * kernel.g(r_esc - b.center().distance(config.x0())) / kernel.g(b.radius()))
            .sum();
        bias = bias.min(sum);
    }
    bias
}

/// Escape radius: the given one, or the smallest multiple-of-reach radius
/// with bias below [`TARGET_BIAS`], and in any case beyond `2·reach` and
/// the start point.
fn resolve_r_esc(config: &BallConfig, kernel: &Kernel, x: &Point, params: &SimParams) -> Result<f64> {
    let reach = config.reach();
    let start = x.distance(config.x0());
    if let Some(r) = params.r_esc {
        if !(r > 2.0 * reach && r.is_finite()) {
            return Err(Error::InvalidParameters(format!(
                "escape radius {r} must exceed twice the configuration reach {reach}"
            )));
        }
        if r <= start {
            return Err(Error::InvalidParameters(format!("start point lies beyond the escape radius {r}")));
        }
        return Ok(r);
    }
    let c2 = kernel.comparison_constant().powi(2);
    let by_bias = reach * (c2 / TARGET_BIAS).powf(1.0 / kernel.exponent());
    Ok(by_bias.max(2.0 * reach).max(2.0 * start).max(1.0))
}

fn validate(config: &BallConfig, kernel: &Kernel, x: &Point, params: &SimParams) -> Result<()> {
    kernel.check_point(config.x0())?;
    kernel.check_point(x)?;
    if params.paths == 0 {
        return Err(Error::InvalidParameters("at least one path is required".into()));
    }
    if params.max_steps == 0 {
        return Err(Error::InvalidParameters("max_steps must be at least 1".into()));
    }
    Ok(())
}

fn finish(mut est: HittingEstimate, counts: Counts, paths: u64) -> HittingEstimate {
    if counts.truncated as f64 > TRUNCATION_WARNING * paths as f64 {
        est.warnings.push(format!(
            "{} of {paths} paths reached max_steps and were counted as escapes",
            counts.truncated
        ));
    }
    est
}

/// Walk-on-spheres estimate of `P^x[T_A < ∞]` for Brownian motion (α = 2).
pub fn wos_hit_probability(config: &BallConfig, kernel: &Kernel, x: &Point, params: &SimParams) -> Result<HittingEstimate> {
    validate(config, kernel, x, params)?;
    if kernel.alpha() != 2.0 || kernel.d() < 3 {
        return Err(Error::InvalidParameters("walk-on-spheres needs α = 2 and d ≥ 3".into()));
    }
    let r_esc = resolve_r_esc(config, kernel, x, params)?;
    let bias = escape_bias(config, kernel, r_esc);
    let index = BallIndex::new(config);
    let d = kernel.d();
    let x0 = config.x0().coords();
    let esc2 = r_esc * r_esc;

    let walk = |rng: &mut ChaCha8Rng| {
        let mut p = x.coords().to_vec();
        let mut dir = vec![0.0; d];
        for _ in 0..params.max_steps {
            let q = index.query(&p);
            if q.inside || q.clearance < HIT_TOLERANCE * q.nearest_radius {
                return PathEnd::Hit;
            }
            let step = WOS_RADIUS_FRACTION * q.clearance;
            unit_direction(rng, d, &mut dir);
            let mut r2 = 0.0;
            for k in 0..d {
                p[k] += step * dir[k];
                r2 += (p[k] - x0[k]) * (p[k] - x0[k]);
            }
            if r2 > esc2 {
                return PathEnd::Escape;
            }
        }
        PathEnd::Truncated
    };
    let counts = if index.query(x.coords()).inside {
        Counts { hits: params.paths, truncated: 0 }
    } else if config.is_empty() {
        Counts::default()
    } else {
        run_paths(params.paths, params.seed, walk)
    };
    let est = HittingEstimate::from_counts(counts.hits, params.paths, params.seed, r_esc, bias);
    Ok(finish(est, counts, params.paths))
}

struct StableWalk<'a> {
    index: BallIndex,
    alpha: f64,
    x0: &'a [f64],
    r_esc: f64,
    max_steps: u64,
}

impl StableWalk<'_> {
    fn counts(&self, x: &Point, step_scale: f64, paths: u64, seed: u64) -> Counts {
        if self.index.query(x.coords()).inside {
            return Counts { hits: paths, truncated: 0 };
        }
        let d = x.dim();
        let esc2 = self.r_esc * self.r_esc;
        let walk = |rng: &mut ChaCha8Rng| {
            let mut p = x.coords().to_vec();
            let mut jump = vec![0.0; d];
            for _ in 0..self.max_steps {
                let q = self.index.query(&p);
                if q.inside {
                    return PathEnd::Hit;
                }
                let sigma = step_scale.max(STEP_GROWTH * q.clearance.min(self.r_esc));
                isotropic_stable(rng, self.alpha, &mut jump);
                let mut r2 = 0.0;
                for k in 0..d {
                    p[k] += sigma * jump[k];
                    r2 += (p[k] - self.x0[k]) * (p[k] - self.x0[k]);
                }
                if r2 > esc2 {
                    return PathEnd::Escape;
                }
            }
            PathEnd::Truncated
        };
        run_paths(paths, seed, walk)
    }
}

/// Skeleton random-walk estimate of `P^x[T_A < ∞]` for the isotropic
/// α-stable process, α < 2. A hit is a landing inside a ball.
pub fn stable_walk_hit_probability(
    config: &BallConfig,
    kernel: &Kernel,
    x: &Point,
    params: &SimParams,
) -> Result<HittingEstimate> {
    validate(config, kernel, x, params)?;
    if kernel.alpha() >= 2.0 {
        return Err(Error::InvalidParameters("the stable walk needs α < 2".into()));
    }
    let r_esc = resolve_r_esc(config, kernel, x, params)?;
    let bias = escape_bias(config, kernel, r_esc);
    if config.is_empty() {
        return Ok(HittingEstimate::from_counts(0, params.paths, params.seed, r_esc, bias));
    }
    let step_scale = params.step_scale.unwrap_or(0.1 * config.min_radius());
    if !(step_scale > 0.0 && step_scale.is_finite()) {
        return Err(Error::InvalidParameters(format!("step scale {step_scale} must be positive")));
    }
    let walk = StableWalk {
        index: BallIndex::new(config),
        alpha: kernel.alpha(),
        x0: config.x0().coords(),
        r_esc,
        max_steps: params.max_steps,
    };
    let counts = walk.counts(x, step_scale, params.paths, params.seed);
    let mut est = HittingEstimate::from_counts(counts.hits, params.paths, params.seed, r_esc, bias);
    est.warnings.push("escape bias bound refers to the continuous-time process".into());
    if params.self_check && counts.hits < params.paths {
        let half = walk.counts(x, 0.5 * step_scale, params.paths, params.seed ^ SELF_CHECK_SALT);
        let other = HittingEstimate::from_counts(half.hits, params.paths, params.seed, r_esc, bias);
        let combined = (est.stderr.powi(2) + other.stderr.powi(2)).sqrt();
        let shift = (est.p_hat - other.p_hat).abs();
        let shift_sigmas = if combined > 0.0 { shift / combined } else if shift == 0.0 { 0.0 } else { f64::INFINITY };
        let accepted = shift_sigmas < 3.0;
        if !accepted {
            est.warnings.push(format!("halving the step scale moved p_hat by {shift_sigmas:.2} standard errors"));
        }
        est.self_check = Some(StepSelfCheck {
            step_scale: 0.5 * step_scale,
            p_hat: other.p_hat,
            stderr: other.stderr,
            shift_sigmas,
            accepted,
        });
    }
    Ok(finish(est, counts, params.paths))
}

/// Dispatches to the estimator matching the kernel.
pub fn hit_probability(config: &BallConfig, kernel: &Kernel, x: &Point, params: &SimParams) -> Result<HittingEstimate> {
    if kernel.alpha() == 2.0 {
        wos_hit_probability(config, kernel, x, params)
    } else {
        stable_walk_hit_probability(config, kernel, x, params)
    }
}

/// Hitting probabilities from `x₀ + (L, 0, …, 0)` for increasing `L`.
pub fn zero_one_probe(
    config: &BallConfig,
    kernel: &Kernel,
    distances: &[f64],
    params: &SimParams,
) -> Result<Vec<(f64, HittingEstimate)>> {
    if distances.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameters("probe distances must increase".into()));
    }
    if let Some(l) = distances.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidParameters(format!("probe distance {l} must be non-negative")));
    }
    let mut params = *params;
    if params.r_esc.is_none() {
        if let Some(&l_max) = distances.last() {
            let far = config.x0().offset(&unit_axis(config.dim()), l_max);
            params.r_esc = Some(resolve_r_esc(config, kernel, &far, &params)?);
        }
    }
    distances
        .iter()
        .map(|&l| {
            let x = config.x0().offset(&unit_axis(config.dim()), l);
            Ok((l, hit_probability(config, kernel, &x, &params)?))
        })
        .collect()
}

fn unit_axis(d: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[0] = 1.0;
    e
}

/// Rows `distance, p_hat, stderr, bias`.
pub fn probe_csv(table: &[(f64, HittingEstimate)]) -> String {
    let mut out = String::from("distance,p_hat,stderr,bias\n");
    for (l, e) in table {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            csv_number(*l),
            csv_number(e.p_hat),
            csv_number(e.stderr),
            csv_number(e.escape_bias_bound)
        );
    }
    out
}
