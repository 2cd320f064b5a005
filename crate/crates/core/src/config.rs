//! Ball configurations, lattice generators with power-law radii, and the
//! closed-form criteria for them.

use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wiener::{Rationale, Verdict, VerdictKind};
use crate::kernel::{distance, unit_ball_volume, Kernel, Point};

/// Open ball `B(center, radius)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BallSpec", into = "BallSpec")]
pub struct Ball {
    center: Point,
    radius: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BallSpec {
    center: Point,
    radius: f64,
}

impl TryFrom<BallSpec> for Ball {
    type Error = Error;
    fn try_from(s: BallSpec) -> Result<Self> {
        Ball::new(s.center, s.radius)
    }
}

impl From<Ball> for BallSpec {
    fn from(b: Ball) -> Self {
        BallSpec { center: b.center, radius: b.radius }
    }
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::DegenerateInput(format!("ball radius {radius} must be positive and finite")));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        crate::kernel::distance(self.center.coords(), x) < self.radius
    }

    pub fn dilated(&self, factor: f64) -> Ball {
        Ball { center: self.center.clone(), radius: self.radius * factor }
    }
}

/// Power-law radius envelope `φ(ρ) = c·ρ^(−β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLawRadius {
    pub c: f64,
    pub beta: f64,
}

impl PowerLawRadius {
    pub fn new(c: f64, beta: f64) -> Result<Self> {
        let phi = Self { c, beta };
        phi.validate()?;
        Ok(phi)
    }

    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameters(format!("phi.c = {} must be positive", self.c)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameters(format!("phi.beta = {} must be non-negative", self.beta)));
        }
        Ok(())
    }

    #[inline]
    pub fn at(&self, rho: f64) -> f64 {
        if self.beta == 0.0 {
            self.c
        } else {
            self.c * rho.powf(-self.beta)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Lattice,
}

/// Balls of radius `φ(|z − x₀|)` centered at the points `z ≠ x₀` of the
/// lattice `(spacing·ℤ)ᵈ` with `|z − x₀| < spacing·2^n_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    #[serde(rename = "type")]
    pub kind: GeneratorKind,
    pub spacing: f64,
    pub phi: PowerLawRadius,
    pub n_max: u32,
}

impl GeneratorSpec {
    pub fn lattice(spacing: f64, phi: PowerLawRadius, n_max: u32) -> Self {
        Self { kind: GeneratorKind::Lattice, spacing, phi, n_max }
    }

    fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidParameters(format!("spacing {} must be positive", self.spacing)));
        }
        if self.n_max > 40 {
            return Err(Error::InvalidParameters(format!("n_max = {} is too large", self.n_max)));
        }
        self.phi.validate()
    }

    /// Centers are generated strictly inside this distance from `x₀`.
    pub fn truncation_radius(&self) -> f64 {
        self.spacing * 2f64.powi(self.n_max as i32)
    }
}

/// `S(x₀, inner, outer) = {y : inner ≤ |y − x₀| < outer}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Shell {
    pub x0: Point,
    pub inner: f64,
    pub outer: f64,
}

impl Shell {
    pub fn new(x0: Point, inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && inner < outer && outer.is_finite()) {
            return Err(Error::InvalidParameters(format!("shell radii {inner} < {outer} must satisfy 0 < inner < outer")));
        }
        Ok(Self { x0, inner, outer })
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        let r = distance(self.x0.coords(), y);
        self.inner <= r && r < self.outer
    }
}

/// Explicit configurations larger than this are rejected, and generator
/// configurations are only materialized as lists below it.
pub const MAX_EXPLICIT_BALLS: usize = 1_000_000;

#[derive(Debug, Clone)]
enum Source {
    Explicit(Vec<Ball>),
    Lattice { spec: GeneratorSpec, r_max: f64 },
}

/// A locally finite family of pairwise disjoint balls and a reference point.
#[derive(Debug, Clone)]
pub struct BallConfig {
    x0: Point,
    source: Source,
    disjointness_factor: f64,
    warnings: Vec<String>,
    cache: OnceLock<Arc<Vec<Ball>>>,
}

/// Largest `k ≤ 3` with `B(z, r_z) ∩ B(z′, k·r_z′) = ∅` for all `z ≠ z′`,
/// or the first overlapping pair.
fn separation_factor(balls: &[Ball]) -> std::result::Result<f64, (usize, usize)> {
    if balls.len() < 2 {
        return Ok(3.0);
    }
    let r_max = balls.iter().map(Ball::radius).fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..balls.len()).collect();
    let key = |i: usize| balls[i].center().coords()[0];
    order.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
    let mut factor: f64 = 3.0;
    let mut overlap: Option<(usize, usize)> = None;
    for (pos, &i) in order.iter().enumerate() {
        let reach = balls[i].radius() + 3.0 * r_max;
        for &j in &order[pos + 1..] {
            if key(j) - key(i) >= reach {
                break;
            }
            let dist = balls[i].center().distance(balls[j].center());
            let (ri, rj) = (balls[i].radius(), balls[j].radius());
            if dist < ri + rj {
                let pair = (i.min(j), i.max(j));
                overlap = Some(overlap.map_or(pair, |p| p.min(pair)));
            }
            factor = factor.min((dist - ri) / rj).min((dist - rj) / ri);
        }
    }
    match overlap {
        Some(pair) => Err(pair),
        None => Ok(factor),
    }
}

impl BallConfig {
    /// Explicit configuration; rejects overlapping balls with the offending
    /// pair of indices.
    pub fn explicit(x0: Point, balls: Vec<Ball>) -> Result<Self> {
        if balls.len() > MAX_EXPLICIT_BALLS {
            return Err(Error::InvalidConfiguration(format!(
                "{} balls exceed the limit of {MAX_EXPLICIT_BALLS}",
                balls.len()
            )));
        }
        for b in &balls {
            if b.dim() != x0.dim() {
                return Err(Error::DimensionMismatch { expected: x0.dim(), got: b.dim() });
            }
        }
        if let Some(i) = balls.iter().position(|b| b.center() == &x0) {
            return Err(Error::InvalidConfiguration(format!("ball {i} is centered at x0")));
        }
        let disjointness_factor =
            separation_factor(&balls).map_err(|(first, second)| Error::Overlap { first, second })?;
        let mut warnings = Vec::new();
        if let Some(i) = balls.iter().position(|b| b.radius() > 0.5 * b.center().distance(&x0)) {
            warnings.push(format!("ball {i} has radius above half its distance to x0"));
        }
        Ok(Self { x0, source: Source::Explicit(balls), disjointness_factor, warnings, cache: OnceLock::new() })
    }

    pub fn empty(x0: Point) -> Self {
        Self::explicit(x0, Vec::new()).expect("empty configuration is valid")
    }

    pub fn x0(&self) -> &Point {
        &self.x0
    }

    pub fn dim(&self) -> usize {
        self.x0.dim()
    }

    pub fn generator(&self) -> Option<&GeneratorSpec> {
        match &self.source {
            Source::Lattice { spec, .. } => Some(spec),
            Source::Explicit(_) => None,
        }
    }

    pub fn explicit_balls(&self) -> Option<&[Ball]> {
        match &self.source {
            Source::Explicit(b) => Some(b),
            Source::Lattice { .. } => None,
        }
    }

    /// Largest `k ≤ 3` with `B(z, r_z) ∩ B(z′, k·r_z′) = ∅` for `z ≠ z′`.
    pub fn disjointness_factor(&self) -> f64 {
        self.disjointness_factor
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Upper bound on the largest radius.
    pub fn max_radius(&self) -> f64 {
        match &self.source {
            Source::Explicit(b) => b.iter().map(Ball::radius).fold(0.0, f64::max),
            Source::Lattice { r_max, .. } => *r_max,
        }
    }

    /// Lower bound on the smallest radius (`+∞` when empty).
    pub fn min_radius(&self) -> f64 {
        match &self.source {
            Source::Explicit(b) => b.iter().map(Ball::radius).fold(f64::INFINITY, f64::min),
            Source::Lattice { spec, .. } => spec.phi.at(spec.truncation_radius()),
        }
    }

    /// `R_A` with `A ⊂ B(x₀, R_A)`; 0 when empty.
    pub fn reach(&self) -> f64 {
        match &self.source {
            Source::Explicit(b) => b.iter().map(|b| b.center().distance(&self.x0) + b.radius()).fold(0.0, f64::max),
            Source::Lattice { spec, r_max } => spec.truncation_radius() + r_max,
        }
    }

    /// Calls `f(center, radius)` for every ball whose center lies in
    /// `S(x₀, inner, outer)` (`inner` may be 0), in a fixed order.
    pub fn for_each_in_annulus(&self, inner: f64, outer: f64, mut f: impl FnMut(&[f64], f64)) {
        match &self.source {
            Source::Explicit(balls) => {
                for b in balls {
                    let rho = b.center().distance(&self.x0);
                    if inner <= rho && rho < outer {
                        f(b.center().coords(), b.radius());
                    }
                }
            }
            Source::Lattice { spec, .. } => {
                let outer = outer.min(spec.truncation_radius());
                lattice_points(spec.spacing, self.x0.coords(), inner, outer, |z, rho| f(z, spec.phi.at(rho)));
            }
        }
    }

    /// Number of balls with centers in `S(x₀, inner, outer)`.
    pub fn count_in_annulus(&self, inner: f64, outer: f64) -> usize {
        let mut n = 0;
        self.for_each_in_annulus(inner, outer, |_, _| n += 1);
        n
    }

    pub fn balls_in_shell(&self, shell: &Shell) -> Result<Vec<Ball>> {
        let mut out = Vec::new();
        let mut err = None;
        self.for_each_in_annulus(shell.inner, shell.outer, |z, r| {
            if err.is_none() {
                if out.len() == MAX_EXPLICIT_BALLS {
                    err = Some(Error::InvalidConfiguration(format!(
                        "shell [{}, {}) holds more than {MAX_EXPLICIT_BALLS} balls",
                        shell.inner, shell.outer
                    )));
                } else {
                    out.push(Ball { center: Point::new(z.to_vec()).expect("finite center"), radius: r });
                }
            }
        });
        err.map_or(Ok(out), Err)
    }

    /// All balls as a list, memoized.
    pub fn materialize(&self) -> Result<Arc<Vec<Ball>>> {
        if let Some(b) = self.cache.get() {
            return Ok(b.clone());
        }
        let balls = match &self.source {
            Source::Explicit(b) => b.clone(),
            Source::Lattice { spec, .. } => {
                let volume = unit_ball_volume(self.dim()) * (spec.truncation_radius() / spec.spacing + 1.0).powi(self.dim() as i32);
                if volume > 2.0 * MAX_EXPLICIT_BALLS as f64 {
                    return Err(Error::InvalidConfiguration(format!(
                        "generator with n_max = {} is too large to materialize",
                        spec.n_max
                    )));
                }
                let mut out = Vec::new();
                self.for_each_in_annulus(0.0, f64::INFINITY, |z, r| {
                    out.push(Ball { center: Point::new(z.to_vec()).expect("finite center"), radius: r })
                });
                if out.len() > MAX_EXPLICIT_BALLS {
                    return Err(Error::InvalidConfiguration(format!("{} balls exceed the limit", out.len())));
                }
                out
            }
        };
        Ok(self.cache.get_or_init(|| Arc::new(balls)).clone())
    }

    /// Whether the configuration has no balls.
    pub fn is_empty(&self) -> bool {
        match &self.source {
            Source::Explicit(b) => b.is_empty(),
            Source::Lattice { spec, .. } => {
                let probe = spec.truncation_radius().min(spec.spacing * ((self.dim() as f64).sqrt() + 1.0));
                self.count_in_annulus(0.0, probe) == 0
            }
        }
    }
}

/// Visits the points `z ≠ x₀` of `(spacing·ℤ)ᵈ` with `inner ≤ |z − x₀| < outer`
/// in lexicographic index order, passing `(z, |z − x₀|)`.
fn lattice_points(spacing: f64, x0: &[f64], inner: f64, outer: f64, mut f: impl FnMut(&[f64], f64)) {
    assert!(outer.is_finite(), "unbounded lattice enumeration");
    if outer <= inner {
        return;
    }
    let d = x0.len();
    let lo: Vec<i64> = x0.iter().map(|c| ((c - outer) / spacing).ceil() as i64).collect();
    let hi: Vec<i64> = x0.iter().map(|c| ((c + outer) / spacing).floor() as i64).collect();
    if lo.iter().zip(&hi).any(|(l, h)| l > h) {
        return;
    }
    let (in2, out2) = (inner * inner, outer * outer);
    let tiny = 1e-24 * spacing * spacing;
    let mut idx = lo.clone();
    let mut z = vec![0.0; d];
    loop {
        let mut r2 = 0.0;
        for k in 0..d {
            z[k] = idx[k] as f64 * spacing;
            r2 += (z[k] - x0[k]) * (z[k] - x0[k]);
        }
        if r2 >= in2 && r2 < out2 && r2 > tiny {
            f(&z, r2.sqrt());
        }
        // Odometer step; along the last axis, jump past the hole of the annulus.
        let mut k = d - 1;
        loop {
            idx[k] += 1;
            if k == d - 1 && d > 1 {
                let lead: f64 = (0..k).map(|j| (z[j] - x0[j]) * (z[j] - x0[j])).sum();
                let rest = in2 - lead;
                let t = idx[k] as f64 * spacing - x0[k];
                if rest > 0.0 && t * t < rest {
                    let exit = ((x0[k] + rest.sqrt()) / spacing).ceil() as i64 - 1;
                    idx[k] = idx[k].max(exit);
                }
            }
            if idx[k] <= hi[k] {
                break;
            }
            idx[k] = lo[k];
            if k == 0 {
                return;
            }
            k -= 1;
        }
    }
}

/// Builds the lattice configuration of `spec` around `x0`, certifying
/// `B(z, r_z) ∩ B(z′, 3r_z′) = ∅` for every pair of generated balls.
pub fn generate_lattice_config(kernel: &Kernel, spec: &GeneratorSpec, x0: Point) -> Result<BallConfig> {
    spec.validate()?;
    kernel.check_point(&x0)?;
    let d = x0.dim();
    let s = spec.spacing;
    let trunc = spec.truncation_radius();
    let mut nearest = f64::INFINITY;
    lattice_points(s, x0.coords(), 0.0, trunc.min(s * (0.5 * (d as f64).sqrt() + 2.0)), |_, rho| {
        nearest = nearest.min(rho)
    });
    let r_max = if nearest.is_finite() { spec.phi.at(nearest) } else { 0.0 };

    if 4.0 * r_max > s {
        // Any offending pair has a ball of radius above s/4, hence within
        // `big` of x0, and a partner within 4·r_max of it.
        let big = if spec.phi.beta == 0.0 { nearest } else { (4.0 * spec.phi.c / s).powf(1.0 / spec.phi.beta) };
        let horizon = (big + 4.0 * r_max).min(trunc);
        let volume = unit_ball_volume(d) * (horizon / s + 1.0).powi(d as i32);
        if volume > MAX_EXPLICIT_BALLS as f64 {
            return Err(Error::InvalidConfiguration(format!(
                "radii near x0 reach {r_max}, far beyond the spacing {s}"
            )));
        }
        let mut pts: Vec<(Vec<f64>, f64)> = Vec::new();
        lattice_points(s, x0.coords(), 0.0, horizon, |z, rho| pts.push((z.to_vec(), spec.phi.at(rho))));
        for (i, (zi, ri)) in pts.iter().enumerate() {
            for (zj, rj) in &pts[i + 1..] {
                let dist = distance(zi, zj);
                if dist < ri + 3.0 * rj || dist < rj + 3.0 * ri {
                    return Err(Error::InvalidConfiguration(format!(
                        "balls B({zi:?}, {ri}) and B({zj:?}, {rj}) are not 3-separated"
                    )));
                }
            }
        }
    }

    let mut warnings = Vec::new();
    if nearest.is_finite() && r_max > 0.5 * nearest {
        warnings.push(format!("nearest ball has radius {r_max} above half its distance {nearest} to x0"));
    }
    Ok(BallConfig {
        x0,
        source: Source::Lattice { spec: *spec, r_max },
        disjointness_factor: 3.0,
        warnings,
        cache: OnceLock::new(),
    })
}

/// Configurations below this size are scanned pair by pair.
const BRUTE_FORCE_LIMIT: f64 = 20_000.0;

/// Distance from each center to its nearest other center.
fn nearest_neighbour_distances(centers: &[&[f64]]) -> Vec<f64> {
    let n = centers.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| centers[a][0].total_cmp(&centers[b][0]).then(a.cmp(&b)));
    let mut best = vec![f64::INFINITY; n];
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if centers[j][0] - centers[i][0] >= best[i] {
                break;
            }
            let dist = distance(centers[i], centers[j]);
            best[i] = best[i].min(dist);
            best[j] = best[j].min(dist);
        }
        for &j in order[..pos].iter().rev() {
            if centers[i][0] - centers[j][0] >= best[i] {
                break;
            }
            best[i] = best[i].min(distance(centers[i], centers[j]));
        }
    }
    best
}

/// `inf_{z ≠ z′} [λ(B(z, |z − z′|/4)) / λ(B(x₀, 4|z − x₀|))] · g(r_z)/g(|z − x₀|)`
/// with λ the Lebesgue measure; `+∞` for fewer than two balls.
pub fn separation_infimum(config: &BallConfig, kernel: &Kernel) -> Result<f64> {
    kernel.check_point(config.x0())?;
    let d = config.dim() as i32;
    let term = |nn: f64, rho: f64, r: f64| (nn / (16.0 * rho)).powi(d) * kernel.g(r) / kernel.g(rho);
    let small = match config.generator() {
        Some(spec) => unit_ball_volume(config.dim()) * (spec.truncation_radius() / spec.spacing).powi(d) <= BRUTE_FORCE_LIMIT,
        None => true,
    };
    if small {
        let balls = config.materialize()?;
        if balls.len() < 2 {
            return Ok(f64::INFINITY);
        }
        let centers: Vec<&[f64]> = balls.iter().map(|b| b.center().coords()).collect();
        let nn = nearest_neighbour_distances(&centers);
        Ok(balls
            .iter()
            .zip(nn)
            .map(|(b, nn)| term(nn, b.center().distance(config.x0()), b.radius()))
            .fold(f64::INFINITY, f64::min))
    } else {
        // Every generated point has a generated lattice neighbour at distance `spacing`.
        let spacing = config.generator().map(|g| g.spacing).expect("generator");
        let mut inf = f64::INFINITY;
        config.for_each_in_annulus(0.0, f64::INFINITY, |z, r| {
            inf = inf.min(term(spacing, distance(z, config.x0().coords()), r))
        });
        Ok(inf)
    }
}

/// Outcome of [`regularity_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub regular: bool,
    /// Smallest distance between checked centers.
    pub epsilon: f64,
    /// Covering radius `R` that was probed, if any.
    pub covering_radius: Option<f64>,
    pub checked_balls: usize,
    pub reasons: Vec<String>,
}

const MAX_REASONS: usize = 20;
const COVERING_PROBES: usize = 256;
const SEPARATION_PREFIX: usize = 4000;

/// Checks the regular-location conditions on the materialized balls:
/// center separation, covering of `B(x₀, trunc/2)` by balls of radius
/// `spacing·√d` around centers (generators only), and the radius envelope
/// `φ(ρ) < r_z < C·φ(ρ)`. Generators default to the envelope
/// `φ = 2/(1 + C)·φ_gen`, which brackets the generated radii strictly.
pub fn regularity_check(config: &BallConfig, c_env: f64, envelope: Option<PowerLawRadius>) -> Result<RegularityReport> {
    if !(c_env > 1.0 && c_env.is_finite()) {
        return Err(Error::InvalidParameters(format!("C = {c_env} must exceed 1")));
    }
    let mut reasons = Vec::new();
    let phi = match (envelope, config.generator()) {
        (Some(phi), _) => Some(phi),
        (None, Some(g)) => Some(PowerLawRadius { c: g.phi.c * 2.0 / (1.0 + c_env), beta: g.phi.beta }),
        (None, None) => {
            reasons.push("explicit configuration without an envelope".to_string());
            None
        }
    };

    let x0 = config.x0().coords();
    let mut checked = 0usize;
    let mut violations = 0usize;
    let mut prefix: Vec<Vec<f64>> = Vec::new();
    let mut index = 0usize;
    config.for_each_in_annulus(0.0, f64::INFINITY, |z, r| {
        let rho = distance(z, x0);
        if let Some(phi) = &phi {
            let lo = phi.at(rho);
            if !(lo < r && r < c_env * lo) {
                violations += 1;
                if reasons.len() < MAX_REASONS {
                    reasons.push(format!("ball {index} at {z:?}: radius {r} outside ({lo}, {})", c_env * lo));
                }
            }
        }
        if prefix.len() < SEPARATION_PREFIX {
            prefix.push(z.to_vec());
        }
        checked += 1;
        index += 1;
    });
    if violations > MAX_REASONS {
        reasons.push(format!("{} further envelope violations", violations - MAX_REASONS));
    }

    let refs: Vec<&[f64]> = prefix.iter().map(Vec::as_slice).collect();
    let epsilon = nearest_neighbour_distances(&refs).into_iter().fold(f64::INFINITY, f64::min);
    let mut covering_radius = None;
    if let Some(g) = config.generator() {
        if epsilon < g.spacing * (1.0 - 1e-12) {
            reasons.push(format!("centers closer than the spacing: {epsilon}"));
        }
        let r_cov = g.spacing * (config.dim() as f64).sqrt();
        covering_radius = Some(r_cov);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c0de);
        let half = 0.5 * g.truncation_radius();
        for _ in 0..COVERING_PROBES {
            let p: Vec<f64> = loop {
                let v: Vec<f64> = (0..config.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                if crate::kernel::norm(&v) < 1.0 {
                    break v.iter().zip(x0).map(|(a, c)| c + half * a).collect();
                }
            };
            let mut found = false;
            lattice_points(g.spacing, &p, 0.0, r_cov, |z, _| found |= distance(z, x0) < g.truncation_radius());
            if !found {
                reasons.push(format!("probe ball B({p:?}, {r_cov}) contains no center"));
                break;
            }
        }
    }
    Ok(RegularityReport { regular: reasons.is_empty(), epsilon, covering_radius, checked_balls: checked, reasons })
}

/// Terms `g(|z − x₀|)/g(r_z)` summed over the binary shell
/// `2ⁿ ≤ |z − x₀| < 2ⁿ⁺¹`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionShell {
    pub n: i32,
    pub count: usize,
    pub sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub shells: Vec<CriterionShell>,
    pub partial_sums: Vec<f64>,
}

impl CriterionReport {
    pub fn total(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }
}

fn contains_x0_error(z: &[f64], r: f64) -> Error {
    Error::InvalidConfiguration(format!("ball B({z:?}, {r}) contains x0"))
}

/// Per-ball terms `g(|z − x₀|)/g(r_z)` of a materializable configuration.
pub fn criterion_terms(config: &BallConfig, kernel: &Kernel) -> Result<Vec<(Ball, f64)>> {
    kernel.check_point(config.x0())?;
    let balls = config.materialize()?;
    balls
        .iter()
        .map(|b| {
            let rho = b.center().distance(config.x0());
            if rho < b.radius() {
                return Err(contains_x0_error(b.center().coords(), b.radius()));
            }
            Ok((b.clone(), kernel.g(rho) / kernel.g(b.radius())))
        })
        .collect()
}

/// The series `Σ_z g(|z − x₀|)/g(r_z)` grouped by binary shells.
pub fn criterion_series(config: &BallConfig, kernel: &Kernel) -> Result<CriterionReport> {
    kernel.check_point(config.x0())?;
    let x0 = config.x0().coords();
    let mut shells: std::collections::BTreeMap<i32, (usize, f64)> = Default::default();
    let mut err = None;
    let mut visit = |z: &[f64], r: f64| {
        let rho = distance(z, x0);
        if rho < r {
            err.get_or_insert_with(|| contains_x0_error(z, r));
            return;
        }
        let n = rho.log2().floor() as i32;
        // Guard against rounding of log2 at exact powers of two.
        let n = if 2f64.powi(n) > rho { n - 1 } else if 2f64.powi(n + 1) <= rho { n + 1 } else { n };
        let e = shells.entry(n).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += kernel.g(rho) / kernel.g(r);
    };
    match config.generator() {
        Some(g) => {
            let trunc = g.truncation_radius();
            let mut n = -60;
            while 2f64.powi(n) < trunc {
                config.for_each_in_annulus(2f64.powi(n), 2f64.powi(n + 1), &mut visit);
                n += 1;
            }
        }
        None => config.for_each_in_annulus(0.0, f64::INFINITY, &mut visit),
    }
    if let Some(e) = err {
        return Err(e);
    }
    let shells: Vec<CriterionShell> = shells.into_iter().map(|(n, (count, sum))| CriterionShell { n, count, sum }).collect();
    let partial_sums = shells
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s.sum;
            Some(*acc)
        })
        .collect();
    Ok(CriterionReport { shells, partial_sums })
}

/// `d − 1 + (1 + β)(α − d)`: the shell sums of the criterion series for
/// power-law radii on a lattice behave like `2^(n·(exponent + 1))`.
pub fn powerlaw_series_exponent(d: usize, alpha: f64, beta: f64) -> f64 {
    d as f64 - 1.0 + (1.0 + beta) * (alpha - d as f64)
}

/// Closed-form verdict for lattice configurations with radii `c·|z − x₀|^(−β)`:
/// unavoidable iff `(1 + β)(d − α) ≤ d`.
pub fn powerlaw_classifier(d: usize, alpha: f64, beta: f64) -> Result<Verdict> {
    Kernel::new(d, alpha)?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameters(format!("beta = {beta} must be non-negative")));
    }
    let kind = if (1.0 + beta) * (d as f64 - alpha) <= d as f64 {
        VerdictKind::Unavoidable
    } else {
        VerdictKind::Avoidable
    };
    Ok(Verdict::new(kind, Rationale::ClosedForm { series_exponent: powerlaw_series_exponent(d, alpha, beta) }))
}

/// Samples of `h(r) = λ(B(x₀, r))·g(r)/g(φ(r))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MvReport {
    /// `h(r) ∝ r^exponent` with `exponent = d + (α − d)(1 + β)`.
    pub exponent: f64,
    pub samples: Vec<(f64, f64)>,
    /// Whether `limsup h > 0`, i.e. `exponent ≥ 0`.
    pub holds: bool,
}

pub fn mv_condition(config: &BallConfig, kernel: &Kernel, r_samples: &[f64]) -> Result<MvReport> {
    let g = config
        .generator()
        .ok_or_else(|| Error::InvalidConfiguration("the volume condition needs a power-law generator".into()))?;
    if let Some(r) = r_samples.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidParameters(format!("sample radius {r} must be positive")));
    }
    let d = kernel.d();
    let vd = unit_ball_volume(d);
    let samples = r_samples
        .iter()
        .map(|&r| (r, vd * r.powi(d as i32) * kernel.g(r) / kernel.g(g.phi.at(r))))
        .collect();
    let exponent = d as f64 + (kernel.alpha() - d as f64) * (1.0 + g.phi.beta);
    Ok(MvReport { exponent, samples, holds: exponent >= 0.0 })
}
