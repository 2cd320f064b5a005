//! Wiener series at infinity for unions of balls, and the
//! avoidable/unavoidable verdict.

use std::fmt::Write as _;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::{capacity_lp, compute_c0, CapacityEstimate, GridSpec};
use crate::config::{Ball, BallConfig, Shell};
use crate::error::{Error, Result};
use crate::kernel::{distance, Kernel, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictKind {
    Unavoidable,
    Avoidable,
    Inconclusive,
}

impl VerdictKind {
    /// Whether `self` and `other` are conclusive and different.
    pub fn contradicts(self, other: VerdictKind) -> bool {
        self != VerdictKind::Inconclusive && other != VerdictKind::Inconclusive && self != other
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rationale {
    /// Integral test on lattice shells; the series diverges iff
    /// `series_exponent ≥ −1`.
    ClosedForm { series_exponent: f64 },
    SeriesGrowth { last_terms: Vec<f64> },
    SeriesConvergence { ratios: Vec<f64>, tail_bound: f64 },
    EmptySeries,
    InsufficientData { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub rationale: Rationale,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corroboration: Option<Box<Verdict>>,
}

impl Verdict {
    pub fn new(kind: VerdictKind, rationale: Rationale) -> Self {
        Self { kind, rationale, corroboration: None }
    }
}

/// Truncation thresholds of the heuristic verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub k: usize,
    pub delta: f64,
    pub ratio_max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { k: 4, delta: 1e-6, ratio_max: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMethod {
    /// No balls in the shell.
    Empty,
    /// Sum of single-ball capacities, with the additivity lower bound for
    /// 3-separated balls.
    SeparatedSum,
    LinearProgram,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellTerm {
    pub n: u32,
    pub shell: Shell,
    pub ball_count: usize,
    pub cap: CapacityEstimate,
    pub method: CapacityMethod,
    /// `g(γⁿR)·cap`.
    pub term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesReport {
    pub gamma: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub shells: Vec<ShellTerm>,
    pub partial_sums: Vec<f64>,
    /// Set when shells beyond the generator's truncation radius were dropped.
    pub truncated_after: Option<u32>,
}

impl SeriesReport {
    pub fn terms(&self) -> Vec<f64> {
        self.shells.iter().map(|s| s.term).collect()
    }

    /// Rows `n, inner_radius, outer_radius, ball_count, cap_value,
    /// cap_lower, cap_upper, term, partial_sum`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,inner_radius,outer_radius,ball_count,cap_value,cap_lower,cap_upper,term,partial_sum\n");
        for (s, p) in self.shells.iter().zip(&self.partial_sums) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                s.n,
                csv_number(s.shell.inner),
                csv_number(s.shell.outer),
                s.ball_count,
                csv_number(s.cap.value),
                csv_number(s.cap.lower),
                csv_number(s.cap.upper),
                csv_number(s.term),
                csv_number(*p)
            );
        }
        out
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn csv_number(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.16e}")
}

/// Total support points of a shell LP.
const LP_SUPPORT_BUDGET: usize = 4000;
const MIN_POINTS_PER_BALL: usize = 24;

/// Single-ball LP capacities scale as `r^(d−α)`; the unit ball is solved once.
struct UnitBallCapacity<'a> {
    kernel: &'a Kernel,
    grid: GridSpec,
    value: OnceLock<Result<f64>>,
}

impl UnitBallCapacity<'_> {
    fn get(&self) -> Result<f64> {
        let v = self.value.get_or_init(|| {
            let unit = Ball::new(Point::origin(self.kernel.d()), 1.0)?;
            Ok(capacity_lp(&[unit], self.kernel, &self.grid)?.value)
        });
        match v {
            Ok(v) => Ok(*v),
            Err(e) => Err(Error::Computation(e.to_string())),
        }
    }
}

/// Ball count, largest radius and capacity sums over a shell.
struct ShellStats {
    count: usize,
    r_max: f64,
    sum_lower: f64,
    sum_upper: f64,
    sum_scaled: f64,
}

fn separated_shell(config: &BallConfig, kernel: &Kernel, shell: &Shell, unit_cap: f64) -> ShellStats {
    let c = kernel.comparison_constant();
    let c0 = compute_c0(kernel);
    let mut st = ShellStats { count: 0, r_max: 0.0, sum_lower: 0.0, sum_upper: 0.0, sum_scaled: 0.0 };
    config.for_each_in_annulus(shell.inner, shell.outer, |_, r| {
        let inv = 1.0 / kernel.g(r);
        st.count += 1;
        st.r_max = st.r_max.max(r);
        st.sum_lower += inv / c0;
        st.sum_upper += c * inv;
        st.sum_scaled += (unit_cap * r.powf(kernel.exponent())).min(c * inv);
    });
    st
}

/// Smallest distance between distinct centers of the configuration.
fn min_center_distance(config: &BallConfig) -> Result<f64> {
    if let Some(g) = config.generator() {
        return Ok(g.spacing);
    }
    let balls = config.materialize()?;
    let mut best = f64::INFINITY;
    for (i, a) in balls.iter().enumerate() {
        for b in &balls[i + 1..] {
            best = best.min(a.center().distance(b.center()));
        }
    }
    Ok(best)
}

fn shell_lp(balls: &[Ball], kernel: &Kernel, grid: &GridSpec) -> Result<CapacityEstimate> {
    let per_ball = (LP_SUPPORT_BUDGET / balls.len()).min(grid.boundary_points);
    if per_ball < MIN_POINTS_PER_BALL {
        return Err(Error::Computation(format!(
            "{} balls that are not 3-separated exceed the LP budget",
            balls.len()
        )));
    }
    capacity_lp(balls, kernel, &GridSpec { boundary_points: per_ball, ..*grid })
}

/// Shell decomposition `Aₙ = A ∩ S(x₀, γⁿR, γⁿ⁺¹R)`, `n = 0..=n_max`, with
/// capacity estimates and terms `g(γⁿR)·cap Aₙ`.
///
/// For 3-separated configurations the capacity of a shell is estimated by
/// the sum of its single-ball capacities and bracketed below by the
/// additivity bound for separated balls; otherwise a joint LP is solved.
pub fn shell_capacities(
    config: &BallConfig,
    kernel: &Kernel,
    r: f64,
    gamma: f64,
    n_max: u32,
    grid: &GridSpec,
) -> Result<SeriesReport> {
    if !(gamma > 1.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameters(format!("gamma = {gamma} must exceed 1")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameters(format!("R = {r} must be positive")));
    }
    if n_max < 1 {
        return Err(Error::InvalidParameters("n_max must be at least 1".into()));
    }
    kernel.check_point(config.x0())?;

    let trunc = config.generator().map(|g| g.truncation_radius());
    let mut count = n_max + 1;
    let mut truncated_after = None;
    if let Some(t) = trunc {
        let fits = (0..=n_max).take_while(|&n| gamma.powi(n as i32 + 1) * r <= t).count() as u32;
        if fits < count {
            count = fits;
            truncated_after = Some(fits.saturating_sub(1));
        }
    }

    let separated = config.disjointness_factor() >= 3.0;
    let nn = if separated { min_center_distance(config)? } else { 0.0 };
    let unit = UnitBallCapacity { kernel, grid: *grid, value: OnceLock::new() };
    let c = kernel.comparison_constant();
    let c0 = compute_c0(kernel);
    let d = kernel.d() as i32;

    let shells: Vec<Result<ShellTerm>> = (0..count)
        .into_par_iter()
        .map(|n| {
            let inner = gamma.powi(n as i32) * r;
            let shell = Shell::new(config.x0().clone(), inner, gamma * inner)?;
            let g_inner = kernel.g(inner);
            let (cap, method, ball_count) = if separated {
                let probe = separated_shell(config, kernel, &shell, 0.0);
                if probe.count == 0 {
                    (CapacityEstimate::zero(), CapacityMethod::Empty, 0)
                } else {
                    let st = separated_shell(config, kernel, &shell, unit.get()?);
                    let r_l = 2.0 * shell.outer;
                    let epsilon = (kernel.g(st.r_max) * (nn / (4.0 * r_l)).powi(d) / kernel.g(r_l)).min(1.0);
                    let lower = epsilon / (2.0 * c.powi(3) * kernel.doubling_constant() * c0) * st.sum_lower;
                    let est = CapacityEstimate {
                        value: st.sum_scaled,
                        lower,
                        upper: st.sum_upper,
                        support_points: 0,
                        constraint_points: 0,
                    };
                    (est, CapacityMethod::SeparatedSum, st.count)
                }
            } else {
                let balls = config.balls_in_shell(&shell)?;
                if balls.is_empty() {
                    (CapacityEstimate::zero(), CapacityMethod::Empty, 0)
                } else {
                    (shell_lp(&balls, kernel, grid)?, CapacityMethod::LinearProgram, balls.len())
                }
            };
            Ok(ShellTerm { n, shell, ball_count, cap, method, term: g_inner * cap.value })
        })
        .collect();
    let shells = shells.into_iter().collect::<Result<Vec<_>>>()?;
    let partial_sums = shells
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s.term;
            Some(*acc)
        })
        .collect();
    Ok(SeriesReport { gamma, r, shells, partial_sums, truncated_after })
}

fn term_ratio(next: f64, prev: f64) -> f64 {
    if prev == 0.0 {
        if next == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        next / prev
    }
}

/// Verdict from the tail of the series alone.
pub fn classify_heuristic(report: &SeriesReport, th: &Thresholds) -> Verdict {
    let terms = report.terms();
    if terms.iter().all(|&t| t == 0.0) {
        return Verdict::new(VerdictKind::Avoidable, Rationale::EmptySeries);
    }
    if terms.len() < th.k.max(2) {
        return Verdict::new(
            VerdictKind::Inconclusive,
            Rationale::InsufficientData { reason: format!("{} shells, at least {} needed", terms.len(), th.k.max(2)) },
        );
    }
    let tail = &terms[terms.len() - th.k..];
    if tail.iter().all(|&t| t >= th.delta) && tail[tail.len() - 1] >= tail[0] {
        return Verdict::new(VerdictKind::Unavoidable, Rationale::SeriesGrowth { last_terms: tail.to_vec() });
    }
    let ratios: Vec<f64> = tail.windows(2).map(|w| term_ratio(w[1], w[0])).collect();
    if ratios.iter().all(|&q| q <= th.ratio_max) {
        let tail_bound = tail[tail.len() - 1] / (1.0 - th.ratio_max);
        return Verdict::new(VerdictKind::Avoidable, Rationale::SeriesConvergence { ratios, tail_bound });
    }
    Verdict::new(
        VerdictKind::Inconclusive,
        Rationale::InsufficientData { reason: "tail neither grows nor decays geometrically".into() },
    )
}

/// The closed-form verdict when available, corroborated by the heuristic
/// one; otherwise the heuristic verdict.
pub fn classify(report: &SeriesReport, closed_form: Option<Verdict>, th: &Thresholds) -> Verdict {
    let heuristic = classify_heuristic(report, th);
    match closed_form {
        Some(mut v) => {
            v.corroboration = Some(Box::new(heuristic));
            v
        }
        None => heuristic,
    }
}

/// Partial sums over `n = 0..=n_max` of `Σ_{z ∈ Aₙ} min(1, c·g(|x − z|)/g(r_z))`
/// with `Aₙ = A ∩ S(x₀, s₀qⁿ, s₀qⁿ⁺¹)`: upper bounds for `Σ R₁^{Aₙ}(x)`.
pub fn shell_reduced_sum_probe(
    config: &BallConfig,
    kernel: &Kernel,
    x: &Point,
    s0: f64,
    q: f64,
    n_max: u32,
) -> Result<Vec<f64>> {
    if !(s0 > 0.0 && q > 1.0 && s0.is_finite() && q.is_finite()) {
        return Err(Error::InvalidParameters(format!("radius sequence {s0}·{q}ⁿ is not geometric and increasing")));
    }
    kernel.check_point(x)?;
    let c = kernel.comparison_constant();
    let sums: Vec<f64> = (0..=n_max)
        .into_par_iter()
        .map(|n| {
            let inner = s0 * q.powi(n as i32);
            let mut sum = 0.0;
            config.for_each_in_annulus(inner, q * inner, |z, r| {
                let dist = distance(x.coords(), z);
                sum += if dist < r { 1.0 } else { (c * kernel.g(dist) / kernel.g(r)).min(1.0) };
            });
            sum
        })
        .collect();
    Ok(sums
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s;
            Some(*acc)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{generate_lattice_config, powerlaw_classifier, GeneratorSpec, PowerLawRadius};
    use proptest::prelude::*;

    fn newtonian() -> Kernel {
        Kernel::new(3, 2.0).unwrap()
    }

    fn small_grid() -> GridSpec {
        GridSpec { boundary_points: 400, ..GridSpec::default() }
    }

    fn lattice(beta: f64, n_max: u32) -> BallConfig {
        let spec = GeneratorSpec::lattice(4.0, PowerLawRadius::new(0.5, beta).unwrap(), n_max);
        generate_lattice_config(&newtonian(), &spec, Point::origin(3)).unwrap()
    }

    fn single(at: [f64; 3], r: f64) -> BallConfig {
        BallConfig::explicit(Point::origin(3), vec![Ball::new(Point::new(at.to_vec()).unwrap(), r).unwrap()]).unwrap()
    }

    /// Least-squares slope of `log₂ yᵢ` against `i`.
    fn log2_slope(ys: &[f64]) -> f64 {
        let n = ys.len() as f64;
        let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
        let ls: Vec<f64> = ys.iter().map(|y| y.log2()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / n, ls.iter().sum::<f64>() / n);
        let cov: f64 = xs.iter().zip(&ls).map(|(x, y)| (x - mx) * (y - my)).sum();
        let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        cov / var
    }

    #[test]
    fn single_ball_occupies_one_shell() {
        let rep = shell_capacities(&single([4.0, 0.0, 0.0], 1.0), &newtonian(), 1.0, 2.0, 4, &small_grid()).unwrap();
        let nonzero: Vec<u32> = rep.shells.iter().filter(|s| s.term > 0.0).map(|s| s.n).collect();
        assert_eq!(nonzero, vec![2]);
        let t = rep.shells[2].term;
        assert!((t - 0.25).abs() < 0.05 * 0.25, "{t}");
        assert_eq!(rep.shells[2].method, CapacityMethod::SeparatedSum);
        assert_eq!(rep.shells[0].method, CapacityMethod::Empty);
    }

    #[test]
    fn empty_configuration_is_avoidable() {
        let cfg = BallConfig::empty(Point::origin(3));
        let rep = shell_capacities(&cfg, &newtonian(), 1.0, 2.0, 8, &small_grid()).unwrap();
        assert!(rep.terms().iter().all(|&t| t == 0.0));
        assert!(rep.partial_sums.iter().all(|&p| p == 0.0));
        let v = classify(&rep, None, &Thresholds::default());
        assert_eq!((v.kind, v.rationale), (VerdictKind::Avoidable, Rationale::EmptySeries));
        let csv = rep.to_csv();
        assert_eq!(csv.lines().count(), 10);
        assert!(csv.lines().skip(1).all(|l| l.ends_with(",0,0,0,0,0,0")));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let cfg = BallConfig::empty(Point::origin(3));
        let k = newtonian();
        assert!(shell_capacities(&cfg, &k, 1.0, 1.0, 4, &small_grid()).is_err());
        assert!(shell_capacities(&cfg, &k, 0.0, 2.0, 4, &small_grid()).is_err());
        assert!(shell_capacities(&cfg, &k, 1.0, 2.0, 0, &small_grid()).is_err());
    }

    #[test]
    fn constant_radius_lattice_terms_grow() {
        // Count ∝ 2³ⁿ, cap ∝ 0.5, g(2ⁿ) = 2⁻ⁿ: terms grow like 4ⁿ.
        let cfg = lattice(0.0, 6);
        let rep = shell_capacities(&cfg, &newtonian(), 1.0, 2.0, 8, &small_grid()).unwrap();
        assert_eq!(rep.shells.len(), 8);
        assert_eq!(rep.truncated_after, Some(7));
        let terms = rep.terms();
        let slope = log2_slope(&terms[3..]);
        assert!((slope - 2.0).abs() < 0.3, "slope {slope}");
        let v = classify(&rep, None, &Thresholds::default());
        assert_eq!(v.kind, VerdictKind::Unavoidable);
        assert!(matches!(v.rationale, Rationale::SeriesGrowth { .. }));
        assert!(!v.kind.contradicts(powerlaw_classifier(3, 2.0, 0.0).unwrap().kind));
    }

    #[test]
    fn fast_decay_lattice_terms_halve() {
        let cfg = lattice(3.0, 8);
        let rep = shell_capacities(&cfg, &newtonian(), 1.0, 2.0, 8, &small_grid()).unwrap();
        let terms = rep.terms();
        for w in terms[4..].windows(2) {
            assert!((w[1] / w[0] - 0.5).abs() < 0.1, "{terms:?}");
        }
        let v = classify(&rep, None, &Thresholds::default());
        assert_eq!(v.kind, VerdictKind::Avoidable);
        match v.rationale {
            Rationale::SeriesConvergence { tail_bound, .. } => {
                assert_eq!(tail_bound, terms[terms.len() - 1] / 0.25)
            }
            other => panic!("{other:?}"),
        }
        let closed = classify(&rep, Some(powerlaw_classifier(3, 2.0, 3.0).unwrap()), &Thresholds::default());
        assert!(matches!(closed.rationale, Rationale::ClosedForm { .. }));
        assert_eq!(closed.corroboration.unwrap().kind, VerdictKind::Avoidable);
    }

    #[test]
    fn short_reports_are_inconclusive() {
        let rep = shell_capacities(&single([4.0, 0.0, 0.0], 1.0), &newtonian(), 1.0, 2.0, 2, &small_grid()).unwrap();
        assert_eq!(classify(&rep, None, &Thresholds::default()).kind, VerdictKind::Inconclusive);
    }

    #[test]
    fn separated_sum_brackets_the_lp() {
        let k = newtonian();
        let cfg = lattice(0.0, 3);
        let rep = shell_capacities(&cfg, &k, 1.0, 2.0, 3, &small_grid()).unwrap();
        for n in [2usize] {
            let s = &rep.shells[n];
            let balls = cfg.balls_in_shell(&s.shell).unwrap();
            assert_eq!(balls.len(), s.ball_count);
            let per_ball = (LP_SUPPORT_BUDGET / balls.len()).clamp(MIN_POINTS_PER_BALL, 40);
            let lp = capacity_lp(&balls, &k, &GridSpec { boundary_points: per_ball, ..GridSpec::default() }).unwrap();
            assert!(s.cap.lower <= lp.lower, "shell {n}: {} > {}", s.cap.lower, lp.lower);
            assert!(lp.value <= s.cap.upper, "shell {n}: {} > {}", lp.value, s.cap.upper);
        }
    }

    #[test]
    fn reduced_sum_probe_examples() {
        let k = newtonian();
        let x = Point::new(vec![1.0, 0.0, 0.0]).unwrap();
        let avoidable = shell_reduced_sum_probe(&lattice(3.0, 7), &k, &x, 1.0, 2.0, 10).unwrap();
        assert!(avoidable.iter().all(|s| s.is_finite()));
        for w in avoidable[8..].windows(2) {
            assert!(w[1] - w[0] < 1e-3, "{avoidable:?}");
        }
        let unavoidable = shell_reduced_sum_probe(&lattice(0.0, 4), &k, &x, 1.0, 2.0, 8).unwrap();
        assert!(unavoidable[8] > 10.0);
        let empty = shell_reduced_sum_probe(&BallConfig::empty(Point::origin(3)), &k, &x, 1.0, 2.0, 8).unwrap();
        assert!(empty.iter().all(|&s| s == 0.0));
        assert!(shell_reduced_sum_probe(&lattice(0.0, 2), &k, &x, 1.0, 1.0, 3).is_err());
    }

    #[test]
    fn csv_numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2f64.sqrt() * 1e-300, 123456789.123456789, f64::MIN_POSITIVE, f64::MAX] {
            assert_eq!(csv_number(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(csv_number(0.0), "0");
    }

    #[test]
    fn contradiction_ignores_inconclusive() {
        use VerdictKind::*;
        assert!(Unavoidable.contradicts(Avoidable));
        assert!(!Unavoidable.contradicts(Inconclusive));
        assert!(!Inconclusive.contradicts(Avoidable));
        assert!(!Avoidable.contradicts(Avoidable));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn partial_sums_are_monotone(
            raw in prop::collection::vec((2.0f64..60.0, 0.0f64..std::f64::consts::TAU, 0.05f64..0.4), 1..12),
            gamma in 1.5f64..4.0,
        ) {
            let mut balls: Vec<Ball> = Vec::new();
            for (rho, phi, frac) in raw {
                let b = Ball::new(Point::new(vec![rho * phi.cos(), rho * phi.sin(), 0.0]).unwrap(), frac * rho).unwrap();
                if balls.iter().all(|o| o.center().distance(b.center()) > o.radius() + b.radius()) {
                    balls.push(b);
                }
            }
            let k = newtonian();
            let cfg = BallConfig::explicit(Point::origin(3), balls).unwrap();
            let grid = GridSpec { boundary_points: 60, ..GridSpec::default() };
            let rep = shell_capacities(&cfg, &k, 1.0, gamma, 6, &grid).unwrap();
            for s in &rep.shells {
                prop_assert!(s.term >= 0.0);
                prop_assert_eq!(s.term, k.g(s.shell.inner) * s.cap.value);
                prop_assert!((s.shell.inner - gamma.powi(s.n as i32)).abs() <= 1e-12 * s.shell.inner);
            }
            prop_assert!(rep.partial_sums.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}
