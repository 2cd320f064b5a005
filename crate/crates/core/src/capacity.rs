//! Discrete measures, Green potentials and capacities of unions of balls.
//!
//! The inner capacity of an open set `U` is the largest mass of a measure
//! carried by `U` whose potential stays below one. For a finite union of
//! balls this is discretized into a packing LP: atoms sit on a grid inside
//! the balls, each atom stands for a small cell of charge (so its own
//! potential is finite), and the potential constraint is imposed on a
//! constraint grid that contains every atom. A finer audit grid then measures
//! how far the optimal potential exceeds one between constraint points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Ball, BallConfig};
use crate::error::{Error, Result};
use crate::kernel::{unit_ball_volume, Kernel, Point};
use crate::lp::{self, GenerationOptions, RowSource};

/// Finite measure `Σ wᵢ δ_{yᵢ}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<(Point, f64)>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<(Point, f64)>) -> Result<Self> {
        if let Some((p, w)) = atoms.iter().find(|(_, w)| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameters(format!(
                "atom at {:?} has invalid weight {w}",
                p.coords()
            )));
        }
        if let Some(first) = atoms.first() {
            let d = first.0.dim();
            if let Some((p, _)) = atoms.iter().find(|(p, _)| p.dim() != d) {
                return Err(Error::DimensionMismatch { expected: d, got: p.dim() });
            }
        }
        Ok(Self { atoms })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn point_mass(at: Point, weight: f64) -> Result<Self> {
        Self::new(vec![(at, weight)])
    }

    pub fn atoms(&self) -> &[(Point, f64)] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Total mass `‖μ‖`.
    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.atoms.iter().map(|(p, w)| (p.clone(), w * factor)).collect())
    }

    /// `self + other`.
    pub fn plus(&self, other: &DiscreteMeasure) -> Result<Self> {
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        Self::new(atoms)
    }

    /// Whether every atom of positive weight lies in `ball`.
    pub fn supported_in(&self, ball: &Ball) -> bool {
        self.atoms.iter().all(|(p, w)| *w == 0.0 || ball.contains(p.coords()))
    }
}

/// `Gμ(x) = Σ wᵢ G(x, yᵢ)`; `+∞` on atoms of positive weight.
pub fn potential(mu: &DiscreteMeasure, kernel: &Kernel, x: &Point) -> f64 {
    mu.atoms
        .iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|(y, w)| w * kernel.green(x, y))
        .sum()
}

/// `c₀ = d/α`, the maximum of `Gλ_{B(x,r)} / g(r)` for the normalized
/// Lebesgue measure `λ_{B(x,r)}`; it is attained at the center.
pub fn compute_c0(kernel: &Kernel) -> f64 {
    kernel.d() as f64 / kernel.alpha()
}

/// `(c₀⁻¹ g(r)⁻¹, c g(r)⁻¹)`, enclosing `cap B(x, r)`.
pub fn ball_capacity_bounds(kernel: &Kernel, r: f64) -> Result<(f64, f64)> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::DegenerateInput(format!("radius {r} must be positive")));
    }
    let inv = 1.0 / kernel.g(r);
    Ok((inv / compute_c0(kernel), kernel.comparison_constant() * inv))
}

/// Bounds on the hitting probability `R₁^B(x)` of `B = B(center, r)`:
/// `c⁻¹ cap B · g(|x − center| + r) ≤ R₁^B(x) ≤ c g(|x − center|)/g(r)`,
/// both clipped to `[0, 1]`; the upper bound is 1 inside `B`.
pub fn hitting_bounds_ball(kernel: &Kernel, center: &Point, r: f64, x: &Point, cap_b: f64) -> Result<(f64, f64)> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::DegenerateInput(format!("radius {r} must be positive")));
    }
    kernel.check_point(center)?;
    kernel.check_point(x)?;
    let c = kernel.comparison_constant();
    let dist = x.distance(center);
    let lower = (cap_b * kernel.g(dist + r) / c).min(1.0);
    let upper = if dist < r { 1.0 } else { (c * kernel.g(dist) / kernel.g(r)).min(1.0) };
    Ok((lower, upper))
}

/// Discretization parameters of [`capacity_lp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// Atoms on the boundary sphere (α = 2), or on the outermost layer of
    /// the volume grid (α < 2), of each ball.
    pub boundary_points: usize,
    /// Number of radial layers of the volume grid (α < 2).
    pub radial_layers: usize,
    /// Density multiplier of the audit grid.
    pub audit_refinement: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { boundary_points: 2000, radial_layers: 6, audit_refinement: 4 }
    }
}

impl GridSpec {
    /// Default grid for `kernel`: volume grids multiply the atom count by
    /// the number of layers, so they start from a smaller outer layer.
    pub fn for_kernel(kernel: &Kernel) -> Self {
        if kernel.alpha() == 2.0 && kernel.d() >= 2 {
            Self::default()
        } else {
            Self { boundary_points: 300, ..Self::default() }
        }
    }
}

/// Capacity value with an enclosure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub support_points: usize,
    pub constraint_points: usize,
}

impl CapacityEstimate {
    pub fn zero() -> Self {
        Self { value: 0.0, lower: 0.0, upper: 0.0, support_points: 0, constraint_points: 0 }
    }
}

/// Full output of the capacity LP.
#[derive(Debug, Clone)]
pub struct CapacitySolution {
    pub estimate: CapacityEstimate,
    /// Optimal atoms; each stands for a cell of radius `cell_radii[i]`.
    pub measure: DiscreteMeasure,
    pub cell_radii: Vec<f64>,
    /// Largest potential of the optimal measure on the audit grid.
    pub audit_max: f64,
    pub lp_pivots: usize,
    pub lp_rounds: usize,
}

/// Relative depth of the outermost atoms below the ball boundary.
const BOUNDARY_DEPTH: f64 = 1e-6;
/// Random constraint samples per atom.
const RANDOM_SAMPLES_PER_ATOM: usize = 10;
const GRID_SEED: u64 = 0x00ca_9ac1_7e5e_ed00;

/// Atoms and probe points of a union of balls, flattened (`d` coordinates each).
struct Discretization {
    d: usize,
    support: Vec<f64>,
    /// Potential of an atom of unit mass at its own location.
    caps: Vec<f64>,
    cell_radii: Vec<f64>,
    /// Constraint points beyond the support.
    extra: Vec<f64>,
    audit: Vec<f64>,
}

impl Discretization {
    fn n_support(&self) -> usize {
        self.caps.len()
    }

    fn n_constraints(&self) -> usize {
        self.n_support() + self.extra.len() / self.d
    }

    fn constraint(&self, i: usize) -> &[f64] {
        let n = self.n_support();
        let d = self.d;
        if i < n {
            &self.support[i * d..(i + 1) * d]
        } else {
            &self.extra[(i - n) * d..(i - n + 1) * d]
        }
    }
}

/// Kernel with the distance passed squared; `g` is evaluated without a
/// separate square root.
#[derive(Clone, Copy)]
struct SquaredKernel {
    amplitude: f64,
    half_exponent: f64,
}

impl SquaredKernel {
    fn new(kernel: &Kernel) -> Self {
        Self { amplitude: kernel.amplitude(), half_exponent: kernel.exponent() / 2.0 }
    }

    #[inline]
    fn eval(&self, r2: f64) -> f64 {
        if self.half_exponent == 0.5 {
            self.amplitude / r2.sqrt()
        } else {
            self.amplitude * r2.powf(-self.half_exponent)
        }
    }
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct CappedRows<'a> {
    grid: &'a Discretization,
    kernel: SquaredKernel,
}

impl CappedRows<'_> {
    fn potential_at(&self, x: &[f64], weights: &[f64]) -> f64 {
        let d = self.grid.d;
        let mut total = 0.0;
        for (j, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                let y = &self.grid.support[j * d..(j + 1) * d];
                total += w * self.kernel.eval(squared_distance(x, y)).min(self.grid.caps[j]);
            }
        }
        total
    }
}

impl RowSource for CappedRows<'_> {
    fn num_cols(&self) -> usize {
        self.grid.n_support()
    }

    fn num_rows(&self) -> usize {
        self.grid.n_constraints()
    }

    fn fill_row(&self, i: usize, out: &mut [f64]) {
        let d = self.grid.d;
        let x = self.grid.constraint(i);
        for (j, o) in out.iter_mut().enumerate() {
            let y = &self.grid.support[j * d..(j + 1) * d];
            *o = self.kernel.eval(squared_distance(x, y)).min(self.grid.caps[j]);
        }
    }
}

fn random_direction(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = crate::kernel::norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Nearly uniform directions on the unit sphere of ℝᵈ: a Fibonacci lattice
/// for d = 3, equal angles for d = 2, seeded random points otherwise.
fn sphere_directions(d: usize, n: usize, salt: u64) -> Vec<Vec<f64>> {
    match d {
        1 => (0..n).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }]).collect(),
        2 => {
            let offset = (salt as f64 * 0.618_033_988_749_895).fract();
            (0..n)
                .map(|i| {
                    let t = std::f64::consts::TAU * (i as f64 + offset) / n as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect()
        }
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            let phase = salt as f64 * 1.234_567;
            (0..n)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                    let s = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * i as f64 + phase;
                    vec![s * phi.cos(), s * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(GRID_SEED ^ salt);
            (0..n).map(|_| random_direction(&mut rng, d)).collect()
        }
    }
}

fn sphere_area(d: usize, r: f64) -> f64 {
    d as f64 * unit_ball_volume(d) * r.powi(d as i32 - 1)
}

/// Uniform point of the spherical shell `inner ≤ |y| ≤ outer` (unit center).
fn shell_sample(rng: &mut ChaCha8Rng, d: usize, inner: f64, outer: f64) -> Vec<f64> {
    let dir = random_direction(rng, d);
    let (a, b) = (inner.powi(d as i32), outer.powi(d as i32));
    let rho = (a + rng.random::<f64>() * (b - a)).powf(1.0 / d as f64);
    dir.into_iter().map(|x| x * rho).collect()
}

/// Grid of a single ball in unit coordinates (center 0, radius 1), so that
/// dilating a ball dilates its grid exactly.
struct UnitGrid {
    support: Vec<Vec<f64>>,
    /// Cell radius in unit coordinates.
    cells: Vec<f64>,
    /// Self-potential of a unit-mass atom, as a multiple of `g(cell radius)`.
    self_factor: f64,
    extra: Vec<Vec<f64>>,
    audit: Vec<Vec<f64>>,
}

fn nearest_neighbour_midpoints(points: &[Vec<f64>], project_to: Option<f64>) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut pairs = std::collections::BTreeSet::new();
    for i in 0..n {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in 0..n {
            if i != j {
                let d2 = squared_distance(&points[i], &points[j]);
                if d2 < best.0 {
                    best = (d2, j);
                }
            }
        }
        if best.1 != usize::MAX {
            pairs.insert((i.min(best.1), i.max(best.1)));
        }
    }
    pairs
        .into_iter()
        .map(|(i, j)| {
            let mut m: Vec<f64> = points[i].iter().zip(&points[j]).map(|(a, b)| 0.5 * (a + b)).collect();
            if let Some(rho) = project_to {
                let len = crate::kernel::norm(&m);
                if len > 0.0 {
                    m.iter_mut().for_each(|x| *x *= rho / len);
                }
            }
            m
        })
        .collect()
}

/// Atoms on the sphere of radius `1 − BOUNDARY_DEPTH`, each carrying the
/// charge of a flat (d−1)-disk cell of equal area.
fn surface_grid(kernel: &Kernel, spec: &GridSpec) -> UnitGrid {
    let d = kernel.d();
    let n = spec.boundary_points;
    let rho = 1.0 - BOUNDARY_DEPTH;
    let support: Vec<Vec<f64>> =
        sphere_directions(d, n, 0).into_iter().map(|u| u.into_iter().map(|x| x * rho).collect()).collect();
    let cell_area = sphere_area(d, rho) / n as f64;
    let cell = if d >= 2 {
        (cell_area / unit_ball_volume(d - 1)).powf(1.0 / (d as f64 - 1.0))
    } else {
        rho
    };
    // Mean over a uniform (d−1)-disk of radius h of s^(α−d), at its center.
    let self_factor = (d as f64 - 1.0) / (kernel.alpha() - 1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(GRID_SEED);
    let band = (rho - 2.0 * cell).max(0.0);
    let mut extra = nearest_neighbour_midpoints(&support, Some(rho));
    for k in 0..RANDOM_SAMPLES_PER_ATOM * n {
        let (inner, outer) = if k % 2 == 0 { (0.0, rho) } else { (band, rho) };
        extra.push(shell_sample(&mut rng, d, inner, outer));
    }

    let refined = spec.audit_refinement.max(1) * n;
    let mut audit: Vec<Vec<f64>> = sphere_directions(d, refined, 1)
        .into_iter()
        .map(|u| u.into_iter().map(|x| x * rho).collect())
        .collect();
    for _ in 0..refined {
        audit.push(shell_sample(&mut rng, d, band, rho));
    }
    for _ in 0..n {
        audit.push(shell_sample(&mut rng, d, 0.0, rho));
    }
    UnitGrid { cells: vec![cell; support.len()], support, self_factor, extra, audit }
}

/// Atoms on concentric layers graded towards the boundary, each carrying
/// the charge of a ball cell of the layer's volume share.
fn volume_grid(kernel: &Kernel, spec: &GridSpec) -> UnitGrid {
    let d = kernel.d();
    let layers = spec.radial_layers.max(1);
    let outer = 1.0 - BOUNDARY_DEPTH;
    let radii: Vec<f64> = (0..layers)
        .map(|k| outer * (std::f64::consts::FRAC_PI_2 * (k as f64 + 0.5) / layers as f64).sin())
        .collect();
    let mut edges = vec![0.0];
    edges.extend(radii.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    edges.push(outer);
    let top = radii[layers - 1];
    let counts: Vec<usize> = radii
        .iter()
        .map(|&r| ((spec.boundary_points as f64) * (r / top).powi(d as i32 - 1)).round().max(1.0) as usize)
        .collect();

    let vd = unit_ball_volume(d);
    let mut support = Vec::new();
    let mut cells = Vec::new();
    for (k, (&r, &count)) in radii.iter().zip(&counts).enumerate() {
        let shell = vd * (edges[k + 1].powi(d as i32) - edges[k].powi(d as i32));
        let cell = (shell / count as f64 / vd).powf(1.0 / d as f64);
        for u in sphere_directions(d, count, k as u64 + 1) {
            support.push(u.into_iter().map(|x| x * r).collect::<Vec<f64>>());
            cells.push(cell);
        }
    }
    let n = support.len();

    let mut rng = ChaCha8Rng::seed_from_u64(GRID_SEED);
    let band = edges[layers - 1];
    let mut extra = nearest_neighbour_midpoints(&support, None);
    for k in 0..RANDOM_SAMPLES_PER_ATOM * n {
        let inner = if k % 2 == 0 { 0.0 } else { band };
        extra.push(shell_sample(&mut rng, d, inner, outer));
    }

    let refine = spec.audit_refinement.max(1);
    let mut audit = Vec::new();
    let mut audit_radii: Vec<(f64, usize)> = radii.iter().zip(&counts).map(|(&r, &c)| (r, c)).collect();
    audit_radii.extend(edges[1..].iter().zip(&counts).map(|(&r, &c)| (r, c)));
    for (k, (r, c)) in audit_radii.into_iter().enumerate() {
        for u in sphere_directions(d, refine * c, 1000 + k as u64) {
            audit.push(u.into_iter().map(|x| x * r).collect());
        }
    }
    for _ in 0..refine * n {
        audit.push(shell_sample(&mut rng, d, band, outer));
    }
    for _ in 0..n {
        audit.push(shell_sample(&mut rng, d, 0.0, outer));
    }
    // Mean of s^(α−d) over a uniform ball of radius h, at its center, in units of h^(α−d).
    UnitGrid { support, cells, self_factor: compute_c0(kernel), extra, audit }
}

fn unit_grid(kernel: &Kernel, spec: &GridSpec) -> UnitGrid {
    if kernel.alpha() == 2.0 && kernel.d() >= 2 {
        surface_grid(kernel, spec)
    } else {
        volume_grid(kernel, spec)
    }
}

fn discretize(balls: &[Ball], kernel: &Kernel, spec: &GridSpec) -> Discretization {
    let d = kernel.d();
    let unit = unit_grid(kernel, spec);
    let place = |ball: &Ball, u: &[f64], out: &mut Vec<f64>| {
        out.extend(u.iter().zip(ball.center().coords()).map(|(x, c)| c + ball.radius() * x));
    };
    let mut grid = Discretization {
        d,
        support: Vec::new(),
        caps: Vec::new(),
        cell_radii: Vec::new(),
        extra: Vec::new(),
        audit: Vec::new(),
    };
    for ball in balls {
        for (u, &cell) in unit.support.iter().zip(&unit.cells) {
            place(ball, u, &mut grid.support);
            let h = cell * ball.radius();
            grid.cell_radii.push(h);
            grid.caps.push(unit.self_factor * kernel.g(h));
        }
        for u in &unit.extra {
            place(ball, u, &mut grid.extra);
        }
        for u in &unit.audit {
            place(ball, u, &mut grid.audit);
        }
    }
    grid
}

fn check_balls(balls: &[Ball], kernel: &Kernel) -> Result<()> {
    for b in balls {
        kernel.check_point(b.center())?;
    }
    Ok(())
}

/// Solves the capacity LP for a union of balls and returns the optimal
/// measure together with the estimate.
pub fn capacity_lp_solution(balls: &[Ball], kernel: &Kernel, grid: &GridSpec) -> Result<CapacitySolution> {
    check_balls(balls, kernel)?;
    if grid.boundary_points == 0 {
        return Err(Error::DegenerateInput("grid has no support points".into()));
    }
    let c = kernel.comparison_constant();
    let upper: f64 = balls.iter().map(|b| c / kernel.g(b.radius())).sum();
    if balls.is_empty() {
        return Ok(CapacitySolution {
            estimate: CapacityEstimate::zero(),
            measure: DiscreteMeasure::empty(),
            cell_radii: vec![],
            audit_max: 0.0,
            lp_pivots: 0,
            lp_rounds: 0,
        });
    }

    let disc = discretize(balls, kernel, grid);
    let n = disc.n_support();
    let rows = CappedRows { grid: &disc, kernel: SquaredKernel::new(kernel) };
    let initial: Vec<usize> = (0..n).collect();
    let sol = lp::solve_packing(&rows, &vec![1.0; n], &initial, GenerationOptions::default())?;
    let value = sol.objective;
    if !(value.is_finite() && value >= 0.0) {
        return Err(Error::Computation(format!("capacity LP returned {value}")));
    }

    let d = disc.d;
    let audit_max = disc
        .audit
        .par_chunks(d)
        .map(|x| rows.potential_at(x, &sol.x))
        .reduce(|| 0.0, f64::max);
    let lower = value / audit_max.max(1.0);

    let measure = DiscreteMeasure::new(
        sol.x
            .iter()
            .enumerate()
            .map(|(j, &w)| (Point::new(disc.support[j * d..(j + 1) * d].to_vec()).expect("finite grid"), w))
            .collect(),
    )?;
    Ok(CapacitySolution {
        estimate: CapacityEstimate {
            value,
            lower,
            upper,
            support_points: n,
            constraint_points: disc.n_constraints(),
        },
        measure,
        cell_radii: disc.cell_radii,
        audit_max,
        lp_pivots: sol.pivots,
        lp_rounds: sol.generation_rounds,
    })
}

/// Inner capacity of a union of balls by linear programming.
pub fn capacity_lp(balls: &[Ball], kernel: &Kernel, grid: &GridSpec) -> Result<CapacityEstimate> {
    Ok(capacity_lp_solution(balls, kernel, grid)?.estimate)
}

/// Default dilation of the outer-capacity surrogate.
pub const OUTER_DILATION: f64 = 0.05;

/// Outer capacity surrogate: the inner capacity of the union of the balls
/// dilated by `1 + delta`.
pub fn outer_capacity_lp(balls: &[Ball], kernel: &Kernel, grid: &GridSpec, delta: f64) -> Result<CapacityEstimate> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameters(format!("dilation {delta} must be non-negative")));
    }
    let dilated: Vec<Ball> = balls.iter().map(|b| b.dilated(1.0 + delta)).collect();
    capacity_lp(&dilated, kernel, grid)
}

/// One summand of the comparison inequality: a ball `B(z, r_z)` with two
/// measures carried by it.
#[derive(Debug, Clone)]
pub struct ComparisonGroup {
    pub ball: Ball,
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub probes: usize,
    /// Probes where `Gμ > w + c²c_D Gν + 1e−9`.
    pub violations: usize,
    /// Largest `Gμ − (w + c²c_D Gν)` observed; negative when the inequality
    /// holds everywhere with room to spare.
    pub max_excess: f64,
    /// Largest `Gμ / (w + c²c_D Gν)`.
    pub max_ratio: f64,
}

/// Checks `Gμ ≤ w + c²c_D Gν` for `μ = Σ μ_z`, `ν = Σ ν_z` at the probe
/// points, after verifying the hypotheses: each `μ_z, ν_z` is carried by
/// `B(z, r_z)`, `‖μ_z‖ ≤ ‖ν_z‖`, `B(z, r_z) ∩ B(z′, 3r_z′) = ∅` and
/// `Gμ_z ≤ w` at the probes.
pub fn comparison_check(
    groups: &[ComparisonGroup],
    w_bound: f64,
    kernel: &Kernel,
    probe_points: &[Point],
) -> Result<ComparisonReport> {
    for (i, g) in groups.iter().enumerate() {
        kernel.check_point(g.ball.center())?;
        if !g.mu.supported_in(&g.ball) || !g.nu.supported_in(&g.ball) {
            return Err(Error::InvalidConfiguration(format!("group {i}: measure not carried by its ball")));
        }
        if g.mu.mass() > g.nu.mass() * (1.0 + 1e-12) {
            return Err(Error::InvalidConfiguration(format!("group {i}: ‖μ‖ exceeds ‖ν‖")));
        }
        for (j, h) in groups.iter().enumerate() {
            if i != j && g.ball.center().distance(h.ball.center()) < g.ball.radius() + 3.0 * h.ball.radius() {
                return Err(Error::InvalidConfiguration(format!("balls {i} and {j} are not 3-separated")));
            }
        }
    }
    for p in probe_points {
        kernel.check_point(p)?;
    }

    let c = kernel.comparison_constant();
    let factor = c * c * kernel.doubling_constant();
    let mut report = ComparisonReport { probes: probe_points.len(), violations: 0, max_excess: f64::NEG_INFINITY, max_ratio: 0.0 };
    if groups.is_empty() {
        report.max_excess = -w_bound;
        return Ok(report);
    }
    for x in probe_points {
        let mut g_mu = 0.0;
        let mut g_nu = 0.0;
        for (i, g) in groups.iter().enumerate() {
            let pm = potential(&g.mu, kernel, x);
            if pm > w_bound * (1.0 + 1e-12) {
                return Err(Error::InvalidConfiguration(format!(
                    "group {i}: Gμ = {pm} exceeds w = {w_bound} at {:?}",
                    x.coords()
                )));
            }
            g_mu += pm;
            g_nu += potential(&g.nu, kernel, x);
        }
        let rhs = w_bound + factor * g_nu;
        let excess = g_mu - rhs;
        if excess > 1e-9 {
            report.violations += 1;
        }
        report.max_excess = report.max_excess.max(excess);
        if rhs.is_finite() {
            report.max_ratio = report.max_ratio.max(g_mu / rhs);
        }
    }
    Ok(report)
}

/// Certified lower bound `ε (2c³c_D C)⁻¹ Σ c₀⁻¹ g(r_z)⁻¹` for the capacity
/// of a union of 3-separated balls.
pub fn union_capacity_lower(config: &BallConfig, kernel: &Kernel, epsilon: f64, c_lambda: f64) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameters(format!("epsilon {epsilon} must be non-negative")));
    }
    if !(c_lambda >= 1.0) {
        return Err(Error::InvalidParameters(format!("C = {c_lambda} must be at least 1")));
    }
    let balls = config.materialize()?;
    if config.disjointness_factor() < 3.0 {
        return Err(Error::InvalidConfiguration("balls B(z, 3r_z) are not pairwise disjoint".into()));
    }
    let c = kernel.comparison_constant();
    let mut sum = 0.0;
    for b in balls.iter() {
        sum += ball_capacity_bounds(kernel, b.radius())?.0;
    }
    Ok(epsilon.min(1.0) / (2.0 * c.powi(3) * kernel.doubling_constant() * c_lambda) * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::separation_infimum;
    use proptest::prelude::*;
    use rand::Rng;

    fn newtonian() -> Kernel {
        Kernel::new(3, 2.0).unwrap()
    }

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn ball(c: &[f64], r: f64) -> Ball {
        Ball::new(pt(c), r).unwrap()
    }

    fn small_grid() -> GridSpec {
        GridSpec { boundary_points: 400, ..GridSpec::default() }
    }

    fn random_probe(rng: &mut ChaCha8Rng, extent: f64) -> Point {
        pt(&(0..3).map(|_| rng.random_range(-extent..extent)).collect::<Vec<_>>())
    }

    #[test]
    fn potential_examples() {
        let k = newtonian();
        let unit = DiscreteMeasure::point_mass(Point::origin(3), 1.0).unwrap();
        assert_eq!(potential(&unit, &k, &pt(&[0.0, 0.0, 4.0])), 0.25);
        assert_eq!(potential(&DiscreteMeasure::empty(), &k, &pt(&[1.0, 2.0, 3.0])), 0.0);
        let two = DiscreteMeasure::new(vec![(pt(&[1.0, 0.0, 0.0]), 0.5), (pt(&[-1.0, 0.0, 0.0]), 0.5)]).unwrap();
        assert_eq!(potential(&two, &k, &Point::origin(3)), 1.0);
        assert_eq!(potential(&unit, &k, &Point::origin(3)), f64::INFINITY);
        assert!(DiscreteMeasure::point_mass(Point::origin(3), -1.0).is_err());
    }

    #[test]
    fn c0_examples_and_radial_integral() {
        for (d, alpha, expected) in [(3, 2.0, 1.5), (3, 1.0, 3.0), (2, 1.0, 2.0), (3, 1.5, 2.0)] {
            let k = Kernel::new(d, alpha).unwrap();
            assert_eq!(compute_c0(&k), expected);
            // (d/rᵈ)∫₀^r t^(d−1) t^(α−d) dt / g(r) at r = 1 by the substitution t = s^(1/α).
            let n = 100_000;
            let integral: f64 = (0..n)
                .map(|i| {
                    let s = (i as f64 + 0.5) / n as f64;
                    let t = s.powf(1.0 / alpha);
                    t.powi(d as i32 - 1) * t.powf(alpha - d as f64) * t.powf(1.0 - alpha) / alpha
                })
                .sum::<f64>()
                / n as f64;
            assert!((d as f64 * integral - expected).abs() < 1e-6, "({d}, {alpha})");
        }
    }

    #[test]
    fn c0_is_the_maximum_of_the_ball_average() {
        let k = newtonian();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples = 200_000;
        let mut ys = Vec::with_capacity(samples);
        while ys.len() < samples {
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            if crate::kernel::norm(&y) < 1.0 {
                ys.push(y);
            }
        }
        let mean_at = |x: &[f64]| ys.iter().map(|y| k.green_slices(x, y)).sum::<f64>() / samples as f64;
        let center = mean_at(&[0.0, 0.0, 0.0]);
        assert!((center - compute_c0(&k)).abs() < 0.01, "{center}");
        for x in [[0.5, 0.0, 0.0], [0.0, 0.9, 0.0], [2.0, 0.0, 0.0]] {
            assert!(mean_at(&x) < center);
        }
    }

    #[test]
    fn ball_capacity_bounds_examples() {
        assert_eq!(ball_capacity_bounds(&newtonian(), 1.0).unwrap(), (2.0 / 3.0, 1.0));
        assert_eq!(ball_capacity_bounds(&newtonian(), 2.0).unwrap(), (4.0 / 3.0, 2.0));
        let (lo, hi) = ball_capacity_bounds(&Kernel::new(3, 1.0).unwrap(), 1.0).unwrap();
        assert!((lo - 1.0 / 3.0).abs() < 1e-15 && hi == 1.0);
        assert!(ball_capacity_bounds(&newtonian(), 0.0).is_err());
    }

    #[test]
    fn hitting_bounds_examples() {
        let k = newtonian();
        let (lo, hi) = hitting_bounds_ball(&k, &Point::origin(3), 1.0, &pt(&[2.0, 0.0, 0.0]), 1.0).unwrap();
        assert!((lo - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(hi, 0.5);
        assert_eq!(hitting_bounds_ball(&k, &Point::origin(3), 1.0, &Point::origin(3), 1.0).unwrap(), (1.0, 1.0));
        let (lo, hi) = hitting_bounds_ball(&k, &Point::origin(3), 1.0, &pt(&[1e12, 0.0, 0.0]), 1.0).unwrap();
        assert!(lo < 1e-11 && hi < 1e-11);
    }

    #[test]
    fn capacity_lp_trivial_cases() {
        let k = newtonian();
        assert_eq!(capacity_lp(&[], &k, &GridSpec::default()).unwrap().value, 0.0);
        let degenerate = GridSpec { boundary_points: 0, ..GridSpec::default() };
        assert!(matches!(capacity_lp(&[ball(&[0.0; 3], 1.0)], &k, &degenerate), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn single_ball_is_enclosed_and_scales() {
        for alpha in [2.0, 1.5] {
            let k = Kernel::new(3, alpha).unwrap();
            let grid = if alpha == 2.0 { small_grid() } else { GridSpec { boundary_points: 150, ..GridSpec::default() } };
            let base = capacity_lp(&[ball(&[0.0; 3], 1.0)], &k, &grid).unwrap();
            let (lo, hi) = ball_capacity_bounds(&k, 1.0).unwrap();
            assert!(base.lower <= base.value && base.value <= base.upper);
            assert!(lo <= base.value && base.value <= hi * 1.05, "α = {alpha}: {base:?}");
            for s in [2.0, 4.0] {
                let scaled = capacity_lp(&[ball(&[0.0; 3], s)], &k, &grid).unwrap();
                let ratio = scaled.value / base.value;
                let exact = s.powf(3.0 - alpha);
                assert!((ratio / exact - 1.0).abs() < 0.05, "α = {alpha}, s = {s}: {ratio}");
            }
        }
    }

    #[test]
    fn monotone_and_subadditive() {
        let k = newtonian();
        let grid = small_grid();
        let a = [ball(&[-3.0, 0.0, 0.0], 1.0)];
        let b = [ball(&[3.0, 0.0, 0.0], 1.0)];
        let both = [a[0].clone(), b[0].clone()];
        let cap_a = capacity_lp(&a, &k, &grid).unwrap().value;
        let cap_b = capacity_lp(&b, &k, &grid).unwrap().value;
        let cap_ab = capacity_lp(&both, &k, &grid).unwrap().value;
        let tol = 0.02 * cap_ab;
        assert!(cap_a <= cap_ab + tol && cap_b <= cap_ab + tol);
        assert!(cap_ab <= cap_a + cap_b + tol);
        // Two unit balls at distance 6: mass 2/(1 + 1/6) is admissible and optimal by symmetry.
        assert!((cap_ab - 2.0 / (1.0 + 1.0 / 6.0)).abs() < 0.05 * cap_ab, "{cap_ab}");
        let outer = outer_capacity_lp(&both, &k, &grid, OUTER_DILATION).unwrap().value;
        assert!(outer > cap_ab);
    }

    #[test]
    fn comparison_holds_for_point_masses() {
        let k = newtonian();
        let groups: Vec<ComparisonGroup> = [8.0, -8.0]
            .iter()
            .map(|&x| {
                let z = pt(&[x, 0.0, 0.0]);
                let m = DiscreteMeasure::point_mass(z.clone(), 1.0).unwrap();
                ComparisonGroup { ball: Ball::new(z, 1.0).unwrap(), mu: m.clone(), nu: m }
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut probes = Vec::new();
        while probes.len() < 1000 {
            let p = random_probe(&mut rng, 20.0);
            if groups.iter().all(|g| !g.ball.contains(p.coords())) {
                probes.push(p);
            }
        }
        let rep = comparison_check(&groups, k.g(1.0), &k, &probes).unwrap();
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.probes, 1000);
        let single = comparison_check(&groups[..1], 1.0, &k, &probes).unwrap();
        assert_eq!(single.violations, 0);
        let empty = comparison_check(&[], 1.0, &k, &probes).unwrap();
        assert_eq!((empty.violations, empty.max_excess), (0, -1.0));
    }

    #[test]
    fn comparison_rejects_violated_hypotheses() {
        let k = newtonian();
        let z = pt(&[0.0; 3]);
        let inside = DiscreteMeasure::point_mass(z.clone(), 1.0).unwrap();
        let outside = DiscreteMeasure::point_mass(pt(&[5.0, 0.0, 0.0]), 1.0).unwrap();
        let g = |mu: DiscreteMeasure, nu: DiscreteMeasure| ComparisonGroup { ball: Ball::new(z.clone(), 1.0).unwrap(), mu, nu };
        let probes = [pt(&[3.0, 3.0, 3.0])];
        assert!(comparison_check(&[g(outside, inside.clone())], 1.0, &k, &probes).is_err());
        let heavy = inside.scaled(2.0).unwrap();
        assert!(comparison_check(&[g(heavy, inside.clone())], 1.0, &k, &probes).is_err());
        let near = ComparisonGroup {
            ball: ball(&[3.0, 0.0, 0.0], 1.0),
            mu: DiscreteMeasure::point_mass(pt(&[3.0, 0.0, 0.0]), 1.0).unwrap(),
            nu: DiscreteMeasure::point_mass(pt(&[3.0, 0.0, 0.0]), 1.0).unwrap(),
        };
        assert!(comparison_check(&[g(inside.clone(), inside), near], 1.0, &k, &probes).is_err());
    }

    #[test]
    fn union_lower_bound_examples() {
        let k = newtonian();
        let cfg = BallConfig::explicit(Point::origin(3), vec![ball(&[8.0, 0.0, 0.0], 1.0), ball(&[-8.0, 0.0, 0.0], 1.0)]).unwrap();
        let eps = separation_infimum(&cfg, &k).unwrap();
        let bound = union_capacity_lower(&cfg, &k, eps, 1.5).unwrap();
        assert!((bound - eps * 2.0 / 9.0).abs() < 1e-15);
        let cap = capacity_lp(&cfg.materialize().unwrap(), &k, &small_grid()).unwrap();
        assert!(cap.lower >= bound);
        let one = BallConfig::explicit(Point::origin(3), vec![ball(&[8.0, 0.0, 0.0], 1.0)]).unwrap();
        assert!(union_capacity_lower(&one, &k, 1.0, 1.5).unwrap() <= 1.0);
        assert_eq!(union_capacity_lower(&cfg, &k, 0.0, 1.5).unwrap(), 0.0);
        let close = BallConfig::explicit(Point::origin(3), vec![ball(&[8.0, 0.0, 0.0], 1.0), ball(&[11.0, 0.0, 0.0], 1.0)]).unwrap();
        assert!(matches!(union_capacity_lower(&close, &k, 0.5, 1.5), Err(Error::InvalidConfiguration(_))));
    }

    proptest! {
        #[test]
        fn potential_is_linear(
            atoms in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0, 0.0f64..3.0), 1..6),
            a in 0.0f64..4.0,
            b in 0.0f64..4.0,
            x in (10.0f64..20.0, -5.0f64..5.0, -5.0f64..5.0),
        ) {
            let k = Kernel::new(3, 1.5).unwrap();
            let mu = DiscreteMeasure::new(atoms.iter().map(|(p, q, r, w)| (pt(&[*p, *q, *r]), *w)).collect()).unwrap();
            let nu = DiscreteMeasure::new(atoms.iter().map(|(p, q, r, w)| (pt(&[*q, *r, *p]), 3.0 - w)).collect()).unwrap();
            let x = pt(&[x.0, x.1, x.2]);
            let combined = potential(&mu.scaled(a).unwrap().plus(&nu.scaled(b).unwrap()).unwrap(), &k, &x);
            let separate = a * potential(&mu, &k, &x) + b * potential(&nu, &k, &x);
            prop_assert!((combined - separate).abs() <= 1e-12 * separate.abs().max(1e-300));
        }

        #[test]
        fn capacity_bound_implies_hitting_lower_bound(
            alpha in 0.5f64..2.0,
            r in 0.1f64..10.0,
            dir in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
            excess in 0.0f64..50.0,
        ) {
            let k = Kernel::new(3, alpha).unwrap();
            let norm = (dir.0 * dir.0 + dir.1 * dir.1 + dir.2 * dir.2).sqrt();
            prop_assume!(norm > 1e-3);
            let dist = r * (1.0 + excess);
            let y = pt(&[dir.0 / norm * dist, dir.1 / norm * dist, dir.2 / norm * dist]);
            let c_big = compute_c0(&k);
            let cap = ball_capacity_bounds(&k, r).unwrap().0;
            prop_assert!(cap >= 1.0 / (c_big * k.g(r)) * (1.0 - 1e-12));
            let (lower, _) = hitting_bounds_ball(&k, &Point::origin(3), r, &y, cap).unwrap();
            let c = k.comparison_constant();
            let rhs = k.green(&y, &Point::origin(3)) / (c * c * k.doubling_constant() * c_big * k.g(r));
            prop_assert!(lower >= rhs * (1.0 - 1e-12), "{} < {}", lower, rhs);
        }
    }
}
