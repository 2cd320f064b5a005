//! Nearest-ball queries for random walks.

use std::collections::HashMap;

use crate::config::{BallConfig, PowerLawRadius};
use crate::kernel::distance;

/// Answer of [`BallIndex::query`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proximity {
    pub inside: bool,
    /// Lower bound on the distance to the union of the balls (0 inside).
    pub clearance: f64,
    /// Radius of the nearest ball found, or 0 if none was examined.
    pub nearest_radius: f64,
}

const BRUTE_FORCE_BALLS: usize = 64;
/// Rings of grid cells searched around a query point.
const SEARCH_RINGS: i64 = 2;

#[derive(Debug)]
enum Layout {
    Brute(Vec<(Vec<f64>, f64)>),
    Grid {
        balls: Vec<(Vec<f64>, f64)>,
        cells: HashMap<Vec<i64>, Vec<u32>>,
        cell: f64,
        r_max: f64,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Lattice {
        spacing: f64,
        phi: PowerLawRadius,
        x0: Vec<f64>,
        truncation: f64,
        r_max: f64,
        half_width: i64,
    },
}

/// Point queries against the balls of a configuration.
#[derive(Debug)]
pub struct BallIndex {
    layout: Layout,
}

impl BallIndex {
    /// Explicit configurations are indexed directly; generator
    /// configurations are queried through the lattice arithmetic.
    pub fn new(config: &BallConfig) -> Self {
        if let Some(g) = config.generator() {
            let r_max = config.max_radius();
            return Self {
                layout: Layout::Lattice {
                    spacing: g.spacing,
                    phi: g.phi,
                    x0: config.x0().coords().to_vec(),
                    truncation: g.truncation_radius(),
                    r_max,
                    half_width: ((r_max / g.spacing) + 0.5).ceil().max(1.0) as i64,
                },
            };
        }
        let balls: Vec<(Vec<f64>, f64)> = config
            .explicit_balls()
            .unwrap_or_default()
            .iter()
            .map(|b| (b.center().coords().to_vec(), b.radius()))
            .collect();
        if balls.len() <= BRUTE_FORCE_BALLS {
            return Self { layout: Layout::Brute(balls) };
        }
        let d = config.dim();
        let r_max = balls.iter().map(|b| b.1).fold(0.0, f64::max);
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for (z, _) in &balls {
            for k in 0..d {
                lo[k] = lo[k].min(z[k]);
                hi[k] = hi[k].max(z[k]);
            }
        }
        // Cells of at least 4·r_max keep the ring bound positive; the volume
        // term aims at a few balls per cell.
        let extent: f64 = lo.iter().zip(&hi).map(|(a, b)| (b - a).max(r_max)).product();
        let per_ball = (extent / balls.len() as f64).powf(1.0 / d as f64);
        let cell = (4.0 * r_max).max(per_ball);
        let mut cells: HashMap<Vec<i64>, Vec<u32>> = HashMap::new();
        for (i, (z, _)) in balls.iter().enumerate() {
            cells.entry(cell_of(z, cell)).or_default().push(i as u32);
        }
        Self { layout: Layout::Grid { balls, cells, cell, r_max, lo, hi } }
    }

    pub fn query(&self, p: &[f64]) -> Proximity {
        match &self.layout {
            Layout::Brute(balls) => nearest_of(balls.iter().map(|(z, r)| (z.as_slice(), *r)), p, f64::INFINITY),
            Layout::Grid { balls, cells, cell, r_max, lo, hi } => {
                let outside: f64 = p
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(x, (a, b))| {
                        let e = (a - x).max(x - b).max(0.0);
                        e * e
                    })
                    .sum::<f64>()
                    .sqrt();
                let far = outside - r_max;
                if far > SEARCH_RINGS as f64 * cell {
                    return Proximity { inside: false, clearance: far, nearest_radius: 0.0 };
                }
                let home = cell_of(p, *cell);
                let mut found = Vec::new();
                for_each_offset(p.len(), SEARCH_RINGS, |off| {
                    let key: Vec<i64> = home.iter().zip(off).map(|(h, o)| h + o).collect();
                    if let Some(ids) = cells.get(&key) {
                        found.extend(ids.iter().map(|&i| &balls[i as usize]));
                    }
                });
                let unseen = SEARCH_RINGS as f64 * cell - r_max;
                let mut q = nearest_of(found.iter().map(|(z, r)| (z.as_slice(), *r)), p, unseen);
                if !q.inside {
                    q.clearance = q.clearance.max(far);
                }
                q
            }
            Layout::Lattice { spacing, phi, x0, truncation, r_max, half_width } => {
                let far = distance(p, x0) - truncation - r_max;
                let s = *spacing;
                let unseen = (*half_width as f64 + 0.5) * s - r_max;
                if far >= unseen {
                    return Proximity { inside: false, clearance: far, nearest_radius: 0.0 };
                }
                let home: Vec<i64> = p.iter().map(|x| (x / s).round() as i64).collect();
                let tiny = 1e-12 * s;
                if *r_max < 0.5 * s {
                    return nearest_lattice_ball(p, &home, s, phi, x0, *truncation, *r_max, far);
                }
                let mut best = Proximity { inside: false, clearance: unseen, nearest_radius: 0.0 };
                let mut z = vec![0.0; p.len()];
                for_each_offset(p.len(), *half_width, |off| {
                    if best.inside {
                        return;
                    }
                    for (k, zk) in z.iter_mut().enumerate() {
                        *zk = (home[k] + off[k]) as f64 * s;
                    }
                    let rho = distance(&z, x0);
                    if rho <= tiny || rho >= *truncation {
                        return;
                    }
                    let r = phi.at(rho);
                    let gap = distance(p, &z) - r;
                    if gap < 0.0 {
                        best = Proximity { inside: true, clearance: 0.0, nearest_radius: r };
                    } else if gap < best.clearance {
                        best = Proximity { inside: false, clearance: gap, nearest_radius: r };
                    }
                });
                if !best.inside {
                    best.clearance = best.clearance.max(far);
                }
                best
            }
        }
    }
}

/// Every lattice point other than `home` is at least `s − max_k |p_k − home_k|`
/// from `p`, so with radii below `s/2` only the home ball needs a distance.
#[allow(clippy::too_many_arguments)]
fn nearest_lattice_ball(
    p: &[f64],
    home: &[i64],
    s: f64,
    phi: &PowerLawRadius,
    x0: &[f64],
    truncation: f64,
    r_max: f64,
    far: f64,
) -> Proximity {
    let mut off_max = 0.0f64;
    let mut to_home = 0.0;
    let mut rho = 0.0;
    for k in 0..p.len() {
        let z = home[k] as f64 * s;
        off_max = off_max.max((p[k] - z).abs());
        to_home += (p[k] - z) * (p[k] - z);
        rho += (z - x0[k]) * (z - x0[k]);
    }
    let others = s - off_max - r_max;
    let rho = rho.sqrt();
    if rho > 1e-12 * s && rho < truncation {
        let r = phi.at(rho);
        let gap = to_home.sqrt() - r;
        if gap < 0.0 {
            return Proximity { inside: true, clearance: 0.0, nearest_radius: r };
        }
        if gap < others {
            return Proximity { inside: false, clearance: gap.max(far), nearest_radius: r };
        }
    }
    Proximity { inside: false, clearance: others.max(far), nearest_radius: 0.0 }
}

fn cell_of(p: &[f64], cell: f64) -> Vec<i64> {
    p.iter().map(|x| (x / cell).floor() as i64).collect()
}

/// Calls `f` for every offset in `{−w, …, w}ᵈ`.
fn for_each_offset(d: usize, w: i64, mut f: impl FnMut(&[i64])) {
    let mut off = vec![-w; d];
    loop {
        f(&off);
        let mut k = d;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            off[k] += 1;
            if off[k] <= w {
                break;
            }
            off[k] = -w;
        }
    }
}

fn nearest_of<'a>(balls: impl Iterator<Item = (&'a [f64], f64)>, p: &[f64], unseen: f64) -> Proximity {
    let mut best = Proximity { inside: false, clearance: unseen, nearest_radius: 0.0 };
    for (z, r) in balls {
        let gap = distance(p, z) - r;
        if gap < 0.0 {
            return Proximity { inside: true, clearance: 0.0, nearest_radius: r };
        }
        if gap < best.clearance {
            best = Proximity { inside: false, clearance: gap, nearest_radius: r };
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{generate_lattice_config, Ball, GeneratorSpec};
    use crate::kernel::{Kernel, Point};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(config: &BallConfig, p: &[f64]) -> (bool, f64) {
        let balls = config.materialize().unwrap();
        let mut gap = f64::INFINITY;
        for b in balls.iter() {
            gap = gap.min(distance(p, b.center().coords()) - b.radius());
        }
        (gap < 0.0, gap.max(0.0))
    }

    fn check_against_brute(config: &BallConfig, extent: f64) {
        let index = BallIndex::new(config);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..3000 {
            let p: Vec<f64> = (0..config.dim()).map(|_| rng.random_range(-extent..extent)).collect();
            let q = index.query(&p);
            let (inside, gap) = brute(config, &p);
            assert_eq!(q.inside, inside, "at {p:?}");
            assert!(q.clearance <= gap + 1e-12, "clearance {} above true gap {gap} at {p:?}", q.clearance);
            if !inside && gap < 0.5 {
                assert!((q.clearance - gap).abs() < 1e-12, "near ball the clearance is exact");
            }
        }
    }

    #[test]
    fn lattice_queries_match_brute_force() {
        let k = Kernel::new(3, 2.0).unwrap();
        for beta in [0.0, 1.0, 3.0] {
            let spec = GeneratorSpec::lattice(4.0, PowerLawRadius::new(0.5, beta).unwrap(), 3);
            let cfg = generate_lattice_config(&k, &spec, Point::origin(3)).unwrap();
            check_against_brute(&cfg, 45.0);
            let off = generate_lattice_config(&k, &spec, Point::new(vec![2.0, 2.0, 2.0]).unwrap()).unwrap();
            check_against_brute(&off, 45.0);
        }
    }

    #[test]
    fn grid_queries_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut balls = Vec::new();
        while balls.len() < 300 {
            let c: Vec<f64> = (0..3).map(|_| rng.random_range(-30.0..30.0)).collect();
            let r = rng.random_range(0.1..1.0);
            let b = Ball::new(Point::new(c).unwrap(), r).unwrap();
            if balls.iter().all(|o: &Ball| o.center().distance(b.center()) > o.radius() + r) {
                balls.push(b);
            }
        }
        let cfg = BallConfig::explicit(Point::new(vec![100.0, 0.0, 0.0]).unwrap(), balls).unwrap();
        check_against_brute(&cfg, 60.0);
    }

    #[test]
    fn empty_configuration_is_never_hit() {
        let cfg = BallConfig::empty(Point::origin(2));
        let q = BallIndex::new(&cfg).query(&[1.0, 1.0]);
        assert!(!q.inside);
        assert!(q.clearance.is_infinite());
    }
}
