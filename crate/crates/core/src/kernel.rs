//! Isotropic Riesz kernels `g(r) = A·r^(α−d)` on ℝᵈ, the Green function
//! `G(x, y) = g(|x − y|)`, doubling diagnostics and the metrization of
//! `1/G`-type quasimetrics by chains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of ℝᵈ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::DegenerateInput("point without coordinates".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::DegenerateInput(format!("non-finite coordinate in {coords:?}")));
        }
        Ok(Self(coords))
    }

    pub fn origin(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        distance(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// `self + t·v`.
    pub fn offset(&self, v: &[f64], t: f64) -> Point {
        Point(self.0.iter().zip(v).map(|(a, b)| a + t * b).collect())
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Volume of the unit ball of ℝᵈ.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / d as f64 * unit_ball_volume(d - 2),
    }
}

fn default_amplitude() -> f64 {
    1.0
}

/// The Riesz kernel of the isotropic α-stable process on ℝᵈ (Brownian motion
/// for α = 2). The comparison constant is `c = 1` and the doubling threshold is
/// `R₀ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpec", into = "KernelSpec")]
pub struct Kernel {
    d: usize,
    alpha: f64,
    amplitude: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSpec {
    d: usize,
    alpha: f64,
    #[serde(default = "default_amplitude")]
    amplitude: f64,
}

impl TryFrom<KernelSpec> for Kernel {
    type Error = Error;

    fn try_from(s: KernelSpec) -> Result<Self> {
        Kernel::with_amplitude(s.d, s.alpha, s.amplitude)
    }
}

impl From<Kernel> for KernelSpec {
    fn from(k: Kernel) -> Self {
        KernelSpec { d: k.d, alpha: k.alpha, amplitude: k.amplitude }
    }
}

impl Kernel {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        Self::with_amplitude(d, alpha, 1.0)
    }

    pub fn with_amplitude(d: usize, alpha: f64, amplitude: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidKernel("dimension must be at least 1".into()));
        }
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::InvalidKernel(format!("alpha = {alpha} outside (0, 2]")));
        }
        if alpha >= d as f64 {
            return Err(Error::InvalidKernel(format!(
                "alpha = {alpha} must be below d = {d} (transience)"
            )));
        }
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidKernel(format!("amplitude = {amplitude} must be positive")));
        }
        Ok(Self { d, alpha, amplitude })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// `d − α`, the decay exponent of `g`.
    pub fn exponent(&self) -> f64 {
        self.d as f64 - self.alpha
    }

    /// Comparison constant `c` in `c⁻¹ g∘ρ ≤ G ≤ c g∘ρ`.
    pub fn comparison_constant(&self) -> f64 {
        1.0
    }

    /// Doubling threshold `R₀`.
    pub fn r0(&self) -> f64 {
        0.0
    }

    /// `g(r) = A·r^(α−d)`, with `g(0) = +∞`.
    #[inline]
    pub fn g(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0, "negative radius {r}");
        if r == 0.0 {
            return f64::INFINITY;
        }
        self.amplitude * r.powf(self.alpha - self.d as f64)
    }

    /// Inverse of `g` on `(0, ∞]`.
    pub fn g_inverse(&self, value: f64) -> f64 {
        if value.is_infinite() {
            return 0.0;
        }
        (value / self.amplitude).powf(-1.0 / self.exponent())
    }

    pub fn green(&self, x: &Point, y: &Point) -> f64 {
        self.g(x.distance(y))
    }

    #[inline]
    pub fn green_slices(&self, x: &[f64], y: &[f64]) -> f64 {
        self.g(distance(x, y))
    }

    /// `c_D = 2^(d−α)`, exact for every `r > 0`.
    pub fn doubling_constant(&self) -> f64 {
        2f64.powf(self.exponent())
    }

    pub fn check_point(&self, p: &Point) -> Result<()> {
        if p.dim() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: p.dim() });
        }
        Ok(())
    }
}

/// Finite sample of a Green function: points and the Gram matrix
/// `G(x_i, x_j)`, with `+∞` on the diagonal.
#[derive(Debug, Clone)]
pub struct QuasimetricSample {
    points: Vec<Point>,
    gram: Vec<Vec<f64>>,
}

/// Output of [`QuasimetricSample::frink_metrize`].
#[derive(Debug, Clone)]
pub struct Metrization {
    /// The quasimetric `q(x, y) = (G(x,y)⁻¹ + G(y,x)⁻¹)^(1/γ)`.
    pub quasimetric: Vec<Vec<f64>>,
    /// Chain metric `ρ*`, the shortest-path closure of `q`.
    pub metric: Vec<Vec<f64>>,
    /// `max q/ρ*` over distinct pairs.
    pub distortion: f64,
}

impl QuasimetricSample {
    pub fn new(points: Vec<Point>, gram: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if gram.len() != n || gram.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidParameters(format!("gram matrix must be {n}x{n}")));
        }
        for i in 0..n {
            for j in 0..i {
                if gram[i][j] != gram[j][i] {
                    return Err(Error::InvalidParameters(format!(
                        "gram matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { points, gram })
    }

    pub fn from_kernel(kernel: &Kernel, points: Vec<Point>) -> Result<Self> {
        for p in &points {
            kernel.check_point(p)?;
        }
        let gram = points
            .iter()
            .map(|x| points.iter().map(|y| kernel.green(x, y)).collect())
            .collect();
        Self::new(points, gram)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn gram(&self) -> &[Vec<f64>] {
        &self.gram
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn check_off_diagonal(&self) -> Result<()> {
        for (i, row) in self.gram.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if i != j && !(v.is_finite() && v > 0.0) {
                    return Err(Error::DegenerateInput(format!(
                        "gram entry ({i}, {j}) = {v} must be finite and positive"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Smallest `C` with `min{G(x,z), G(y,z)} ≤ C·G(x,y)` over all ordered
    /// triples of distinct sample points.
    pub fn triangle_property_constant(&self) -> Result<f64> {
        let n = self.len();
        if n < 3 {
            return Err(Error::DegenerateInput(format!("need at least 3 points, got {n}")));
        }
        self.check_off_diagonal()?;
        let g = &self.gram;
        let mut best = 0.0f64;
        for x in 0..n {
            for y in 0..n {
                if y == x {
                    continue;
                }
                let gxy = g[x][y];
                for z in 0..n {
                    if z == x || z == y {
                        continue;
                    }
                    best = best.max(g[x][z].min(g[y][z]) / gxy);
                }
            }
        }
        Ok(best)
    }

    /// Snowflakes `1/G` into `q = (G(x,y)⁻¹ + G(y,x)⁻¹)^(1/γ)` and closes it
    /// under chains. The closure is iterated to a floating-point fixpoint, so
    /// the triangle inequality holds exactly for the returned matrix.
    pub fn frink_metrize(&self, gamma: f64) -> Result<Metrization> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameters(format!("gamma = {gamma} must be positive")));
        }
        self.check_off_diagonal()?;
        let n = self.len();
        let g = &self.gram;
        let quasimetric: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { 0.0 } else { (1.0 / g[i][j] + 1.0 / g[j][i]).powf(1.0 / gamma) })
                    .collect()
            })
            .collect();

        let mut metric = quasimetric.clone();
        loop {
            let mut changed = false;
            for k in 0..n {
                for i in 0..n {
                    let dik = metric[i][k];
                    for j in 0..n {
                        let via = dik + metric[k][j];
                        if via < metric[i][j] {
                            metric[i][j] = via;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let mut distortion = 1.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    distortion = distortion.max(quasimetric[i][j] / metric[i][j]);
                }
            }
        }
        Ok(Metrization { quasimetric, metric, distortion })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> Vec<Point> {
        xs.iter().map(|&x| Point::new(vec![x]).unwrap()).collect()
    }

    fn inverse_distance_sample(xs: &[f64]) -> QuasimetricSample {
        let pts = line(xs);
        let gram = pts
            .iter()
            .map(|a| {
                pts.iter()
                    .map(|b| {
                        let r = a.distance(b);
                        if r == 0.0 {
                            f64::INFINITY
                        } else {
                            1.0 / r
                        }
                    })
                    .collect()
            })
            .collect();
        QuasimetricSample::new(pts, gram).unwrap()
    }

    #[test]
    fn g_values() {
        let k = Kernel::new(3, 2.0).unwrap();
        assert_eq!(k.g(1.0), 1.0);
        assert_eq!(k.g(2.0), 0.5);
        assert_eq!(k.g(0.0), f64::INFINITY);
        let k = Kernel::new(3, 1.5).unwrap();
        assert!((k.g(4.0) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn green_values() {
        let k = Kernel::new(3, 2.0).unwrap();
        let o = Point::origin(3);
        let z = Point::new(vec![0.0, 0.0, 2.0]).unwrap();
        assert_eq!(k.green(&o, &z), 0.5);
        assert_eq!(k.green(&z, &z), f64::INFINITY);
        let x = Point::new(vec![1.0, 0.0, 0.0]).unwrap();
        let y = Point::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert!((k.green(&x, &y) - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn doubling_constants() {
        assert_eq!(Kernel::new(3, 2.0).unwrap().doubling_constant(), 2.0);
        assert_eq!(Kernel::new(3, 1.0).unwrap().doubling_constant(), 4.0);
        assert_eq!(Kernel::new(2, 1.0).unwrap().doubling_constant(), 2.0);
    }

    #[test]
    fn kernel_domain_is_checked() {
        assert!(Kernel::new(2, 2.0).is_err());
        assert!(Kernel::new(3, 2.5).is_err());
        assert!(Kernel::new(3, 0.0).is_err());
        assert!(Kernel::with_amplitude(3, 2.0, -1.0).is_err());
        assert!(Kernel::new(0, 0.5).is_err());
    }

    #[test]
    fn kernel_json_shape() {
        let k: Kernel = serde_json::from_str(r#"{"d": 3, "alpha": 2.0}"#).unwrap();
        assert_eq!(k.amplitude(), 1.0);
        let v = serde_json::to_value(k).unwrap();
        assert_eq!(v, serde_json::json!({"d": 3, "alpha": 2.0, "amplitude": 1.0}));
        assert!(serde_json::from_str::<Kernel>(r#"{"d": 2, "alpha": 2.0}"#).is_err());
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn triangle_constant_on_line() {
        // Exhaustive scan of the six ordered triples on {0, 1, 3}: the largest
        // ratio is min(G(0,1), G(3,1)) / G(0,3) = (1/2)/(1/3) = 1.5.
        let c = inverse_distance_sample(&[0.0, 1.0, 3.0]).triangle_property_constant().unwrap();
        assert!((c - 1.5).abs() < 1e-12);
        assert!(c <= 2.0);
        // Equally spaced: min(G(0,1), G(2,1)) / G(0,2) = 1 / (1/2).
        let c = inverse_distance_sample(&[0.0, 1.0, 2.0]).triangle_property_constant().unwrap();
        assert!((c - 2.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_constant_equal_distances() {
        let pts = line(&[0.0, 1.0, 2.0, 3.0]);
        let gram = (0..4)
            .map(|i| (0..4).map(|j| if i == j { f64::INFINITY } else { 0.7 }).collect())
            .collect();
        let s = QuasimetricSample::new(pts, gram).unwrap();
        assert_eq!(s.triangle_property_constant().unwrap(), 1.0);
    }

    #[test]
    fn triangle_constant_rejects_bad_gram() {
        let pts = line(&[0.0, 1.0, 2.0]);
        let mut gram: Vec<Vec<f64>> =
            (0..3).map(|i| (0..3).map(|j| if i == j { f64::INFINITY } else { 1.0 }).collect()).collect();
        gram[0][1] = 0.0;
        gram[1][0] = 0.0;
        let s = QuasimetricSample::new(pts.clone(), gram.clone()).unwrap();
        assert!(s.triangle_property_constant().is_err());
        gram[0][1] = f64::INFINITY;
        gram[1][0] = f64::INFINITY;
        let s = QuasimetricSample::new(pts.clone(), gram).unwrap();
        assert!(s.triangle_property_constant().is_err());
        assert!(inverse_distance_sample(&[0.0, 1.0]).triangle_property_constant().is_err());
    }

    #[test]
    fn frink_on_line_is_twice_distance() {
        let m = inverse_distance_sample(&[0.0, 1.0, 3.0]).frink_metrize(1.0).unwrap();
        let xs = [0.0f64, 1.0, 3.0];
        for i in 0..3 {
            for j in 0..3 {
                let expected = 2.0 * (xs[i] - xs[j]).abs();
                assert!((m.metric[i][j] - expected).abs() < 1e-12, "{i} {j}");
            }
        }
        assert!((m.distortion - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frink_single_pair() {
        let m = inverse_distance_sample(&[0.0, 2.5]).frink_metrize(1.0).unwrap();
        assert_eq!(m.metric[0][1], m.quasimetric[0][1]);
        assert_eq!(m.distortion, 1.0);
    }

    #[test]
    fn frink_shortens_non_metric() {
        // Squaring the line distance breaks the triangle inequality; the chain
        // closure must repair it and report distortion > 1.
        let m = inverse_distance_sample(&[0.0, 1.0, 2.0]).frink_metrize(0.5).unwrap();
        assert_eq!(m.quasimetric[0][2], 16.0);
        assert_eq!(m.metric[0][2], 8.0);
        assert_eq!(m.distortion, 2.0);
    }

    #[test]
    fn frink_rejects_bad_gamma() {
        assert!(inverse_distance_sample(&[0.0, 1.0]).frink_metrize(0.0).is_err());
    }

    proptest! {
        #[test]
        fn g_strictly_decreasing(r in 1e-3f64..1e3, f in 1.001f64..10.0, alpha in 0.1f64..2.0) {
            let k = Kernel::new(3, alpha).unwrap();
            prop_assert!(k.g(r) > k.g(r * f));
        }

        #[test]
        fn exact_doubling(r in 1e-3f64..1e3, alpha in 0.1f64..2.0, d in 3usize..6) {
            let k = Kernel::new(d, alpha).unwrap();
            let ratio = k.g(r / 2.0) / k.g(r);
            prop_assert!((ratio / k.doubling_constant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn green_symmetric(a in prop::collection::vec(-10.0f64..10.0, 3), b in prop::collection::vec(-10.0f64..10.0, 3)) {
            let k = Kernel::new(3, 1.3).unwrap();
            let x = Point::new(a).unwrap();
            let y = Point::new(b).unwrap();
            prop_assert_eq!(k.green(&x, &y), k.green(&y, &x));
        }

        #[test]
        fn frink_output_is_metric(coords in prop::collection::vec(-5.0f64..5.0, 24), gamma in 0.3f64..2.0) {
            let k = Kernel::new(3, 1.2).unwrap();
            let pts: Vec<Point> = coords.chunks(3).map(|c| Point::new(c.to_vec()).unwrap()).collect();
            let s = QuasimetricSample::from_kernel(&k, pts).unwrap();
            prop_assume!(s.check_off_diagonal().is_ok());
            let m = s.frink_metrize(gamma).unwrap();
            let n = s.len();
            for i in 0..n { for j in 0..n { for l in 0..n {
                prop_assert!(m.metric[i][l] <= m.metric[i][j] + m.metric[j][l]);
            }}}
            prop_assert!(m.distortion >= 1.0);
        }

        #[test]
        fn riesz_triangle_constant_bounded(coords in prop::collection::vec(-5.0f64..5.0, 18), alpha in 0.5f64..2.0) {
            let k = Kernel::new(3, alpha).unwrap();
            let pts: Vec<Point> = coords.chunks(3).map(|c| Point::new(c.to_vec()).unwrap()).collect();
            let s = QuasimetricSample::from_kernel(&k, pts).unwrap();
            prop_assume!(s.check_off_diagonal().is_ok());
            let c = s.triangle_property_constant().unwrap();
            prop_assert!(c <= k.doubling_constant() + 1e-9);
        }
    }
}
