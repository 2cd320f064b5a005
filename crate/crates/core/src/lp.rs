//! Dense packing linear programs
//!
//! ```text
//!     maximize  cᵀx   subject to  A x ≤ b,  x ≥ 0,   b > 0, A ≥ 0
//! ```
//!
//! solved with a revised simplex method carrying an explicit basis inverse.
//! Rows are supplied by a [`RowSource`] and brought into the working problem
//! lazily: the problem restricted to an initial row set is optimized first,
//! then violated candidate rows are appended and the dual simplex restores
//! feasibility. When the initial row set is square, the basis of all
//! structural columns is tried first (a crash basis) since for potential
//! matrices it is usually optimal already.
//!
//! Pricing is Dantzig's rule; all ties are broken by the lowest index, so
//! runs are bit-reproducible.

use ndarray::{Array1, Array2};
use ndarray_linalg::{FactorizeInto, Inverse, Solve};

use crate::error::{Error, Result};

/// Feasibility and optimality tolerance.
pub const TOLERANCE: f64 = 1e-9;
const PIVOT_TOLERANCE: f64 = 1e-11;
const REFACTOR_INTERVAL: usize = 1000;
const MAX_PIVOTS: usize = 200_000;
/// Working rows whose slack exceeds this are dropped between rounds.
const DROP_SLACK: f64 = 1e-6;

/// Candidate constraint rows of a packing LP.
pub trait RowSource: Sync {
    fn num_cols(&self) -> usize;
    fn num_rows(&self) -> usize;
    /// Writes row `i` of `A` into `out` (length `num_cols`).
    fn fill_row(&self, i: usize, out: &mut [f64]);
    fn rhs(&self, _i: usize) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Candidate rows of the final working problem.
    pub active_rows: Vec<usize>,
    pub pivots: usize,
    pub generation_rounds: usize,
    /// Whether the crash basis was accepted without pivoting.
    pub crashed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Primal,
    Dual,
}

struct Simplex {
    n: usize,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    cost: Vec<f64>,
    /// Variable in each basis position: `j < n` structural, `n + i` slack of row `i`.
    basis: Vec<usize>,
    /// Basis position of each variable, if basic.
    position: Vec<Option<usize>>,
    /// Row-major `m × m` inverse; row = basis position, column = constraint.
    binv: Vec<f64>,
    x_basic: Vec<f64>,
    /// Reduced costs of all variables, updated at every pivot.
    d: Vec<f64>,
    pivots: usize,
    since_refactor: usize,
}

impl Simplex {
    fn m(&self) -> usize {
        self.rows.len()
    }

    fn with_slack_basis(n: usize, rows: Vec<Vec<f64>>, rhs: Vec<f64>, cost: Vec<f64>) -> Self {
        let m = rows.len();
        let mut position = vec![None; n + m];
        let basis: Vec<usize> = (0..m).map(|i| n + i).collect();
        for (p, &v) in basis.iter().enumerate() {
            position[v] = Some(p);
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let x_basic = rhs.clone();
        let mut d = cost.clone();
        d.extend(std::iter::repeat_n(0.0, m));
        Self { n, rows, rhs, cost, basis, position, binv, x_basic, d, pivots: 0, since_refactor: 0 }
    }

    fn set_basis(&mut self, basis: Vec<usize>) -> Result<()> {
        let m = self.m();
        debug_assert_eq!(basis.len(), m);
        self.position = vec![None; self.n + m];
        for (p, &v) in basis.iter().enumerate() {
            self.position[v] = Some(p);
        }
        self.basis = basis;
        self.refactor()
    }

    fn column_entry(&self, row: usize, var: usize) -> f64 {
        if var < self.n {
            self.rows[row][var]
        } else if var - self.n == row {
            1.0
        } else {
            0.0
        }
    }

    /// Recomputes the explicit inverse and the basic solution from scratch.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m();
        if m == 0 {
            self.binv.clear();
            self.x_basic.clear();
            self.d = self.cost.clone();
            return Ok(());
        }
        let b = Array2::from_shape_fn((m, m), |(i, p)| self.column_entry(i, self.basis[p]));
        let inv = b
            .inv()
            .map_err(|e| Error::Computation(format!("singular simplex basis: {e}")))?;
        self.binv = inv.iter().copied().collect();
        self.x_basic = (0..m)
            .map(|p| (0..m).map(|i| self.binv[p * m + i] * self.rhs[i]).sum())
            .collect();
        self.d = self.reduced_costs();
        self.since_refactor = 0;
        Ok(())
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m();
        let mut y = vec![0.0; m];
        for (p, &v) in self.basis.iter().enumerate() {
            let c = if v < self.n { self.cost[v] } else { 0.0 };
            if c != 0.0 {
                let row = &self.binv[p * m..(p + 1) * m];
                for (yi, bi) in y.iter_mut().zip(row) {
                    *yi += c * bi;
                }
            }
        }
        y
    }

    /// `vᵀA` for a row-space vector `v`.
    fn left_product(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (vi, row) in v.iter().zip(&self.rows) {
            if *vi != 0.0 {
                for (o, a) in out.iter_mut().zip(row) {
                    *o += vi * a;
                }
            }
        }
        out
    }

    fn reduced_costs(&self) -> Vec<f64> {
        let y = self.duals();
        let ya = self.left_product(&y);
        let mut d: Vec<f64> = (0..self.n).map(|j| self.cost[j] - ya[j]).collect();
        d.extend(y.iter().map(|yi| -yi));
        d
    }

    /// `B⁻¹ a_var`.
    fn ftran(&self, var: usize) -> Vec<f64> {
        let m = self.m();
        if var >= self.n {
            let i = var - self.n;
            return (0..m).map(|p| self.binv[p * m + i]).collect();
        }
        let col: Vec<f64> = self.rows.iter().map(|r| r[var]).collect();
        (0..m)
            .map(|p| self.binv[p * m..(p + 1) * m].iter().zip(&col).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Basis change; `row_struct` is row `leave_pos` of `B⁻¹A` if known.
    fn pivot(&mut self, leave_pos: usize, enter: usize, alpha: &[f64], row_struct: Option<Vec<f64>>) -> Result<()> {
        let m = self.m();
        let a_r = alpha[leave_pos];

        let rho = &self.binv[leave_pos * m..(leave_pos + 1) * m];
        let row_struct = row_struct.unwrap_or_else(|| self.left_product(rho));
        let step = self.d[enter] / a_r;
        if step != 0.0 {
            for (dj, a) in self.d[..self.n].iter_mut().zip(&row_struct) {
                *dj -= step * a;
            }
            for (dj, a) in self.d[self.n..].iter_mut().zip(rho) {
                *dj -= step * a;
            }
        }
        self.d[enter] = 0.0;

        let theta = self.x_basic[leave_pos] / a_r;
        for p in 0..m {
            if p != leave_pos {
                self.x_basic[p] -= theta * alpha[p];
            }
        }
        self.x_basic[leave_pos] = theta;

        let (before, rest) = self.binv.split_at_mut(leave_pos * m);
        let (pivot_row, after) = rest.split_at_mut(m);
        for v in pivot_row.iter_mut() {
            *v /= a_r;
        }
        for (k, row) in before.chunks_mut(m).chain(after.chunks_mut(m)).enumerate() {
            let p = if k < leave_pos { k } else { k + 1 };
            let f = alpha[p];
            if f != 0.0 {
                for (v, pr) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * pr;
                }
            }
        }

        let leaving = self.basis[leave_pos];
        self.position[leaving] = None;
        self.position[enter] = Some(leave_pos);
        self.basis[leave_pos] = enter;
        self.pivots += 1;
        self.since_refactor += 1;
        if self.pivots > MAX_PIVOTS {
            return Err(Error::Computation("simplex pivot limit exceeded".into()));
        }
        if self.since_refactor >= REFACTOR_INTERVAL {
            self.refactor()?;
        }
        Ok(())
    }

    fn primal(&mut self) -> Result<()> {
        loop {
            let mut enter = None;
            let mut best = TOLERANCE;
            for (j, &dj) in self.d.iter().enumerate() {
                if self.position[j].is_none() && dj > best {
                    best = dj;
                    enter = Some(j);
                }
            }
            let Some(q) = enter else { return Ok(()) };
            let alpha = self.ftran(q);
            let mut leave: Option<(usize, f64)> = None;
            for (p, &a) in alpha.iter().enumerate() {
                if a > PIVOT_TOLERANCE {
                    let ratio = self.x_basic[p].max(0.0) / a;
                    leave = match leave {
                        None => Some((p, ratio)),
                        Some((bp, br)) => {
                            if ratio < br || (ratio == br && self.basis[p] < self.basis[bp]) {
                                Some((p, ratio))
                            } else {
                                Some((bp, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Computation("linear program is unbounded".into()));
            };
            self.pivot(r, q, &alpha, None)?;
        }
    }

    fn dual(&mut self) -> Result<()> {
        let m = self.m();
        loop {
            let mut leave = None;
            let mut worst = -TOLERANCE;
            for (p, &x) in self.x_basic.iter().enumerate() {
                if x < worst {
                    worst = x;
                    leave = Some(p);
                }
            }
            let Some(r) = leave else { return Ok(()) };
            let rho = self.binv[r * m..(r + 1) * m].to_vec();
            let alpha_struct = self.left_product(&rho);
            let d = &self.d;
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..self.n + m {
                if self.position[j].is_some() {
                    continue;
                }
                let a = if j < self.n { alpha_struct[j] } else { rho[j - self.n] };
                if a < -PIVOT_TOLERANCE {
                    let ratio = d[j].min(0.0) / a;
                    if enter.is_none_or(|(_, br)| ratio < br) {
                        enter = Some((j, ratio));
                    }
                }
            }
            let Some((q, _)) = enter else {
                return Err(Error::Computation("linear program is infeasible".into()));
            };
            let alpha = self.ftran(q);
            self.pivot(r, q, &alpha, Some(alpha_struct))?;
        }
    }

    /// Appends constraint rows with their slacks basic.
    fn add_rows(&mut self, new_rows: Vec<Vec<f64>>, new_rhs: Vec<f64>) {
        let m = self.m();
        let k = new_rows.len();
        let mt = m + k;
        // rb[t][p] = new row t at the basic variable of position p.
        let rb: Vec<Vec<f64>> = new_rows
            .iter()
            .map(|row| self.basis.iter().map(|&v| if v < self.n { row[v] } else { 0.0 }).collect())
            .collect();
        let mut binv = vec![0.0; mt * mt];
        for p in 0..m {
            binv[p * mt..p * mt + m].copy_from_slice(&self.binv[p * m..(p + 1) * m]);
        }
        for (t, rbt) in rb.iter().enumerate() {
            let out = &mut binv[(m + t) * mt..(m + t + 1) * mt];
            for (p, &f) in rbt.iter().enumerate() {
                if f != 0.0 {
                    for (o, v) in out[..m].iter_mut().zip(&self.binv[p * m..(p + 1) * m]) {
                        *o -= f * v;
                    }
                }
            }
            out[m + t] = 1.0;
        }
        let new_x: Vec<f64> = rb
            .iter()
            .zip(&new_rhs)
            .map(|(rbt, b)| b - rbt.iter().zip(&self.x_basic).map(|(a, x)| a * x).sum::<f64>())
            .collect();

        let n = self.n;
        let mut position = vec![None; n + mt];
        position[..n].copy_from_slice(&self.position[..n]);
        position[n..n + m].copy_from_slice(&self.position[n..n + m]);
        for t in 0..k {
            position[n + m + t] = Some(m + t);
            self.basis.push(n + m + t);
        }
        self.position = position;
        self.binv = binv;
        self.x_basic.extend(new_x);
        self.d.extend(std::iter::repeat_n(0.0, k));
        self.rows.extend(new_rows);
        self.rhs.extend(new_rhs);
    }

    /// Removes the rows whose slack is basic with a value above `threshold`
    /// and returns the indices of the rows kept. The inverse of the reduced
    /// basis is the corresponding block of the current inverse.
    fn drop_slack_rows(&mut self, threshold: f64) -> Vec<usize> {
        let (n, m) = (self.n, self.m());
        let dropped: Vec<bool> = (0..m)
            .map(|i| self.position[n + i].is_some_and(|p| self.x_basic[p] > threshold))
            .collect();
        let kept: Vec<usize> = (0..m).filter(|&i| !dropped[i]).collect();
        if kept.len() == m {
            return kept;
        }
        let mut new_index = vec![usize::MAX; m];
        for (k, &i) in kept.iter().enumerate() {
            new_index[i] = k;
        }
        let positions: Vec<usize> = (0..m)
            .filter(|&p| {
                let v = self.basis[p];
                v < n || !dropped[v - n]
            })
            .collect();
        let mt = kept.len();
        debug_assert_eq!(positions.len(), mt);
        let mut binv = Vec::with_capacity(mt * mt);
        for &p in &positions {
            let row = &self.binv[p * m..(p + 1) * m];
            binv.extend(kept.iter().map(|&i| row[i]));
        }
        let basis: Vec<usize> = positions
            .iter()
            .map(|&p| {
                let v = self.basis[p];
                if v < n { v } else { n + new_index[v - n] }
            })
            .collect();
        let mut position = vec![None; n + mt];
        for (p, &v) in basis.iter().enumerate() {
            position[v] = Some(p);
        }
        self.x_basic = positions.iter().map(|&p| self.x_basic[p]).collect();
        let mut d = self.d[..n].to_vec();
        d.extend(kept.iter().map(|&i| self.d[n + i]));
        self.d = d;
        self.rows = kept.iter().map(|&i| std::mem::take(&mut self.rows[i])).collect();
        self.rhs = kept.iter().map(|&i| self.rhs[i]).collect();
        self.basis = basis;
        self.position = position;
        self.binv = binv;
        kept
    }

    fn structural_values(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (p, &v) in self.basis.iter().enumerate() {
            if v < self.n {
                x[v] = self.x_basic[p].max(0.0);
            }
        }
        x
    }

    /// Tries the all-structural basis of a square problem. Returns the phase
    /// from which optimization must continue, or `None` if the crash basis is
    /// neither primal nor dual feasible.
    fn crash(&mut self) -> Result<Option<Phase>> {
        let n = self.n;
        if self.m() != n || n == 0 {
            return Ok(None);
        }
        let a = Array2::from_shape_fn((n, n), |(i, j)| self.rows[i][j]);
        let Ok(lu) = a.factorize_into() else { return Ok(None) };
        let b = Array1::from(self.rhs.clone());
        let c = Array1::from(self.cost.clone());
        let (Ok(x), Ok(y)) = (lu.solve(&b), lu.solve_t(&c)) else { return Ok(None) };
        let primal_ok = x.iter().all(|&v| v >= -TOLERANCE);
        let dual_ok = y.iter().all(|&v| v >= -TOLERANCE);
        if !primal_ok && !dual_ok {
            return Ok(None);
        }
        let inv = lu
            .inv()
            .map_err(|e| Error::Computation(format!("crash basis inversion failed: {e}")))?;
        self.basis = (0..n).collect();
        self.position = vec![None; 2 * n];
        for j in 0..n {
            self.position[j] = Some(j);
        }
        self.binv = inv.iter().copied().collect();
        self.x_basic = x.to_vec();
        self.d = self.reduced_costs();
        self.since_refactor = 0;
        Ok(Some(if primal_ok { Phase::Primal } else { Phase::Dual }))
    }
}

/// Row generation settings.
#[derive(Debug, Clone, Copy)]
pub struct GenerationOptions {
    /// Maximum number of violated rows appended per round.
    pub batch: usize,
    pub max_rounds: usize,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        Self { batch: 256, max_rounds: 200 }
    }
}

fn fetch_rows(source: &dyn RowSource, idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter()
        .map(|&i| {
            let mut row = vec![0.0; source.num_cols()];
            source.fill_row(i, &mut row);
            row
        })
        .collect()
}

/// Maximizes `cᵀx` over `x ≥ 0` subject to every row of `source`.
///
/// `initial` lists the rows of the first working problem; when it has as many
/// rows as there are columns, a crash basis is attempted. The remaining rows
/// are checked after each optimization and violated ones are appended.
pub fn solve_packing(
    source: &dyn RowSource,
    cost: &[f64],
    initial: &[usize],
    options: GenerationOptions,
) -> Result<LpSolution> {
    use rayon::prelude::*;

    let n = source.num_cols();
    if cost.len() != n {
        return Err(Error::InvalidParameters("cost length does not match columns".into()));
    }
    for i in 0..source.num_rows() {
        if !(source.rhs(i) > 0.0) {
            return Err(Error::InvalidParameters(format!("row {i} has non-positive bound")));
        }
    }
    if n == 0 {
        return Ok(LpSolution {
            x: vec![],
            objective: 0.0,
            active_rows: vec![],
            pivots: 0,
            generation_rounds: 0,
            crashed: false,
        });
    }

    let rows = fetch_rows(source, initial);
    let rhs = initial.iter().map(|&i| source.rhs(i)).collect();
    let mut lp = Simplex::with_slack_basis(n, rows, rhs, cost.to_vec());
    let crashed = match lp.crash()? {
        Some(Phase::Primal) => {
            lp.primal()?;
            true
        }
        Some(Phase::Dual) => {
            lp.dual()?;
            lp.primal()?;
            true
        }
        None => {
            let slack_basis = (n..n + lp.m()).collect();
            lp.set_basis(slack_basis)?;
            lp.primal()?;
            false
        }
    };

    let mut active = vec![false; source.num_rows()];
    for &i in initial {
        active[i] = true;
    }
    let mut working = initial.to_vec();
    let mut rounds = 0;
    loop {
        let x = lp.structural_values();
        let mut violated: Vec<(usize, f64)> = (0..source.num_rows())
            .into_par_iter()
            .filter(|&i| !active[i])
            .map_init(
                || vec![0.0; n],
                |row, i| {
                    source.fill_row(i, row);
                    let lhs: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
                    (i, lhs - source.rhs(i))
                },
            )
            .filter(|&(_, v)| v > TOLERANCE)
            .collect();
        if violated.is_empty() {
            break;
        }
        rounds += 1;
        if rounds > options.max_rounds {
            return Err(Error::Computation("row generation did not converge".into()));
        }
        violated.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        violated.truncate(options.batch);
        let idx: Vec<usize> = violated.iter().map(|&(i, _)| i).collect();
        let kept = lp.drop_slack_rows(DROP_SLACK);
        if kept.len() < working.len() {
            let mut keep = vec![false; working.len()];
            for &k in &kept {
                keep[k] = true;
            }
            for (w, k) in working.iter().zip(&keep) {
                if !k {
                    active[*w] = false;
                }
            }
            working = kept.iter().map(|&k| working[k]).collect();
        }
        for &i in &idx {
            active[i] = true;
        }
        working.extend(&idx);

        let rhs = idx.iter().map(|&i| source.rhs(i)).collect();
        lp.add_rows(fetch_rows(source, &idx), rhs);
        lp.dual()?;
        lp.primal()?;
    }

    lp.refactor()?;
    lp.dual()?;
    lp.primal()?;
    let x = lp.structural_values();
    let objective = x.iter().zip(cost).map(|(a, b)| a * b).sum();
    Ok(LpSolution {
        x,
        objective,
        active_rows: working,
        pivots: lp.pivots,
        generation_rounds: rounds,
        crashed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Dense {
        rows: Vec<Vec<f64>>,
        rhs: Vec<f64>,
    }

    impl RowSource for Dense {
        fn num_cols(&self) -> usize {
            self.rows.first().map_or(0, |r| r.len())
        }
        fn num_rows(&self) -> usize {
            self.rows.len()
        }
        fn fill_row(&self, i: usize, out: &mut [f64]) {
            out.copy_from_slice(&self.rows[i]);
        }
        fn rhs(&self, i: usize) -> f64 {
            self.rhs[i]
        }
    }

    /// Exhaustive vertex enumeration for tiny 2-variable packing LPs.
    fn brute_force_2d(rows: &[Vec<f64>], rhs: &[f64], cost: &[f64]) -> f64 {
        let mut lines: Vec<(f64, f64, f64)> = rows.iter().zip(rhs).map(|(r, &b)| (r[0], r[1], b)).collect();
        lines.push((1.0, 0.0, 0.0));
        lines.push((0.0, 1.0, 0.0));
        let feasible = |x: f64, y: f64| {
            x >= -1e-9
                && y >= -1e-9
                && rows.iter().zip(rhs).all(|(r, &b)| r[0] * x + r[1] * y <= b + 1e-9)
        };
        let mut best = 0.0f64;
        for i in 0..lines.len() {
            for j in i + 1..lines.len() {
                let (a1, b1, c1) = lines[i];
                let (a2, b2, c2) = lines[j];
                let det = a1 * b2 - a2 * b1;
                if det.abs() < 1e-12 {
                    continue;
                }
                let x = (c1 * b2 - c2 * b1) / det;
                let y = (a1 * c2 - a2 * c1) / det;
                if feasible(x, y) {
                    best = best.max(cost[0] * x + cost[1] * y);
                }
            }
        }
        best
    }

    #[test]
    fn small_lp_matches_vertex_enumeration() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 1.0], vec![1.0, 1.0]];
        let rhs = vec![4.0, 6.0, 2.5];
        let src = Dense { rows: rows.clone(), rhs: rhs.clone() };
        let cost = [1.0, 1.0];
        let sol = solve_packing(&src, &cost, &[0, 1], GenerationOptions::default()).unwrap();
        let oracle = brute_force_2d(&rows, &rhs, &cost);
        assert!((sol.objective - oracle).abs() < 1e-9, "{} vs {oracle}", sol.objective);
        assert_eq!(sol.generation_rounds, 1);
    }

    #[test]
    fn crash_rejected_falls_back_to_slack_basis() {
        // K⁻¹1 has a negative entry here, so the crash basis is infeasible.
        let rows = vec![vec![1.0, 3.0], vec![3.0, 10.0]];
        let rhs = vec![1.0, 1.0];
        let src = Dense { rows: rows.clone(), rhs: rhs.clone() };
        let sol = solve_packing(&src, &[1.0, 1.0], &[0, 1], GenerationOptions::default()).unwrap();
        assert!((sol.objective - brute_force_2d(&rows, &rhs, &[1.0, 1.0])).abs() < 1e-9);
    }

    #[test]
    fn random_lps_match_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let m = rng.random_range(2..7);
            let rows: Vec<Vec<f64>> =
                (0..m).map(|_| vec![rng.random_range(0.05..3.0), rng.random_range(0.05..3.0)]).collect();
            let rhs: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..2.0)).collect();
            let cost = [rng.random_range(0.1..2.0), rng.random_range(0.1..2.0)];
            let src = Dense { rows: rows.clone(), rhs: rhs.clone() };
            let sol = solve_packing(&src, &cost, &[0, 1], GenerationOptions { batch: 1, max_rounds: 50 }).unwrap();
            let oracle = brute_force_2d(&rows, &rhs, &cost);
            assert!((sol.objective - oracle).abs() < 1e-8, "{} vs {oracle}", sol.objective);
        }
    }

    #[test]
    fn larger_problem_satisfies_all_rows() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 30;
        let rows: Vec<Vec<f64>> =
            (0..120).map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let rhs = vec![1.0; 120];
        let src = Dense { rows: rows.clone(), rhs };
        let initial: Vec<usize> = (0..n).collect();
        let sol = solve_packing(&src, &vec![1.0; n], &initial, GenerationOptions { batch: 5, max_rounds: 100 })
            .unwrap();
        for r in &rows {
            let lhs: f64 = r.iter().zip(&sol.x).map(|(a, b)| a * b).sum();
            assert!(lhs <= 1.0 + 1e-8);
        }
        // Dense generation from scratch must land on the same optimum.
        let all: Vec<usize> = (0..120).collect();
        let full = solve_packing(&src, &vec![1.0; n], &all, GenerationOptions::default()).unwrap();
        assert!((full.objective - sol.objective).abs() < 1e-8);
    }

    #[test]
    fn empty_problem() {
        let src = Dense { rows: vec![], rhs: vec![] };
        let sol = solve_packing(&src, &[], &[], GenerationOptions::default()).unwrap();
        assert_eq!(sol.objective, 0.0);
    }
}
