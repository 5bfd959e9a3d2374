//! Bounded-variable revised simplex with an explicit dense basis inverse.
//!
//! Two phases: phase one drives per-row artificial variables to zero, phase
//! two optimizes the real objective from the feasible basis found. Pricing
//! is Dantzig's largest reduced cost with a Harris ratio test; after a run of
//! degenerate pivots the solver switches to Bland's smallest-index rule until
//! the objective moves again, which rules out cycling.

use super::{LinearProgram, LpError, LpSolution, LpStatus, Relation};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pricing {
    /// Largest reduced cost, with Bland's rule during degenerate stalls.
    #[default]
    DantzigBland,
    /// Bland's smallest-index rule for every pivot.
    Bland,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub pricing: Pricing,
    /// Defaults to a bound proportional to the problem size.
    pub max_iterations: Option<usize>,
    /// Consecutive degenerate pivots tolerated before switching to Bland.
    pub stall_limit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            pricing: Pricing::default(),
            max_iterations: None,
            stall_limit: 50,
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_with(lp, &SolverOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let mut tab = Tableau::new(lp, opts);

    if tab.run()? == Outcome::Unbounded {
        // Phase one is bounded below by zero.
        return Err(LpError::Singular);
    }
    let scale = tab.b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let infeasibility: f64 = (tab.art_start..tab.ncols()).map(|j| tab.x[j]).sum();
    if infeasibility > tol::LP_FEASIBILITY * scale {
        return Ok(tab.solution(lp, LpStatus::Infeasible));
    }

    tab.enter_phase_two(lp);
    let outcome = tab.run()?;
    if outcome == Outcome::Unbounded {
        return Ok(tab.solution(lp, LpStatus::Unbounded));
    }
    tab.compute_xb();
    let x: Vec<f64> = tab.structural_values(lp);
    if lp.max_violation(&x) > tol::LP_FEASIBILITY {
        tab.refactor()?;
        tab.compute_xb();
        let x = tab.structural_values(lp);
        let violation = lp.max_violation(&x);
        if violation > tol::LP_FEASIBILITY {
            return Err(LpError::Inaccurate(violation));
        }
    }
    Ok(tab.solution(lp, LpStatus::Optimal))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
}

const RECOMPUTE_EVERY: usize = 100;
const HARRIS: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;

struct Tableau {
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    b: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    /// Row-major `m x m` inverse of the basis matrix.
    binv: Vec<f64>,
    /// Simplex multipliers `c_B^T B^-1`.
    y: Vec<f64>,
    art_start: usize,
    iterations: usize,
    limit: usize,
    pricing: Pricing,
    stall_limit: usize,
}

impl Tableau {
    fn new(lp: &LinearProgram, opts: &SolverOptions) -> Self {
        let m = lp.num_constraints();
        let n = lp.num_vars();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, c) in lp.constraints().iter().enumerate() {
            for &(j, a) in &c.coeffs {
                if a == 0.0 {
                    continue;
                }
                // Merge repeated entries of the same variable in a row.
                match cols[j].last_mut() {
                    Some((row, v)) if *row == i => *v += a,
                    _ => cols[j].push((i, a)),
                }
            }
        }
        let mut lower: Vec<f64> = lp.vars().iter().map(|v| v.lower).collect();
        let mut upper: Vec<f64> = lp.vars().iter().map(|v| v.upper).collect();
        let mut cost = vec![0.0; n];
        let b: Vec<f64> = lp.constraints().iter().map(|c| c.rhs).collect();

        let mut x = Vec::with_capacity(n + 2 * m);
        let mut state = Vec::with_capacity(n + 2 * m);
        for j in 0..n {
            let (v, s) = if lower[j].is_finite() {
                (lower[j], State::Lower)
            } else if upper[j].is_finite() {
                (upper[j], State::Upper)
            } else {
                (0.0, State::Free)
            };
            x.push(v);
            state.push(s);
        }

        let mut residual = b.clone();
        for (j, col) in cols.iter().enumerate() {
            for &(i, a) in col {
                residual[i] -= a * x[j];
            }
        }

        // Slacks: +s for <=, -s for >=.
        let mut slack_of = vec![None; m];
        for (i, c) in lp.constraints().iter().enumerate() {
            let sign = match c.relation {
                Relation::Le => 1.0,
                Relation::Ge => -1.0,
                Relation::Eq => continue,
            };
            slack_of[i] = Some((cols.len(), sign));
            cols.push(vec![(i, sign)]);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            cost.push(0.0);
            x.push(0.0);
            state.push(State::Lower);
        }

        let art_start = cols.len();
        let mut basis = vec![0; m];
        for i in 0..m {
            let sign = if residual[i] < 0.0 { -1.0 } else { 1.0 };
            let art = cols.len();
            cols.push(vec![(i, sign)]);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            cost.push(1.0);
            match slack_of[i] {
                Some((s, ssign)) if residual[i] * ssign >= 0.0 => {
                    basis[i] = s;
                    x[s] = residual[i] * ssign;
                    state[s] = State::Basic;
                    // Unused artificial stays fixed at zero.
                    upper[art] = 0.0;
                    x.push(0.0);
                    state.push(State::Lower);
                }
                _ => {
                    basis[i] = art;
                    x.push(residual[i].abs());
                    state.push(State::Basic);
                }
            }
        }

        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            let j = basis[i];
            binv[i * m + i] = 1.0 / cols[j][0].1;
        }

        let ncols = cols.len();
        let limit = opts
            .max_iterations
            .unwrap_or(50_000 + 50 * (m + ncols));
        let mut tab = Self {
            m,
            cols,
            lower,
            upper,
            cost,
            b,
            x,
            state,
            basis,
            binv,
            y: vec![0.0; m],
            art_start,
            iterations: 0,
            limit,
            pricing: opts.pricing,
            stall_limit: opts.stall_limit,
        };
        tab.compute_y();
        tab
    }

    fn ncols(&self) -> usize {
        self.cols.len()
    }

    fn enter_phase_two(&mut self, lp: &LinearProgram) {
        for j in self.art_start..self.ncols() {
            self.upper[j] = 0.0;
            if self.state[j] != State::Basic {
                self.x[j] = 0.0;
                self.state[j] = State::Lower;
            }
        }
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        self.cost[..lp.num_vars()].copy_from_slice(lp.objective());
        self.compute_xb();
        self.compute_y();
    }

    fn structural_values(&self, lp: &LinearProgram) -> Vec<f64> {
        lp.vars()
            .iter()
            .zip(&self.x)
            .map(|(v, &x)| x.clamp(v.lower, v.upper))
            .collect()
    }

    fn solution(&self, lp: &LinearProgram, status: LpStatus) -> LpSolution {
        let values = self.structural_values(lp);
        LpSolution {
            status,
            objective: lp.evaluate(&values),
            values,
            iterations: self.iterations,
        }
    }

    fn compute_y(&mut self) {
        let m = self.m;
        self.y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            let c = self.cost[self.basis[i]];
            if c != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, &r) in self.y.iter_mut().zip(row) {
                    *yk += c * r;
                }
            }
        }
    }

    fn compute_xb(&mut self) {
        let m = self.m;
        let mut rhs = self.b.clone();
        for j in 0..self.ncols() {
            if self.state[j] != State::Basic && self.x[j] != 0.0 {
                for &(i, a) in &self.cols[j] {
                    rhs[i] -= a * self.x[j];
                }
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
            self.x[self.basis[i]] = v;
        }
    }

    /// Rebuilds the basis inverse from scratch by Gauss-Jordan elimination.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[j] {
                a[i * m + k] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&r1, &r2| a[r1 * m + c].abs().total_cmp(&a[r2 * m + c].abs()))
                .expect("nonempty range");
            if a[p * m + c].abs() < 1e-12 {
                return Err(LpError::Singular);
            }
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let piv = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= piv;
                inv[c * m + k] /= piv;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        // Rows of `inv` now invert B, whose column k is the variable in row k.
        self.binv = inv;
        self.compute_y();
        Ok(())
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        self.cost[j]
            - self.cols[j]
                .iter()
                .map(|&(i, a)| self.y[i] * a)
                .sum::<f64>()
    }

    /// Picks an entering column and its direction of motion.
    fn price(&self, bland: bool) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.ncols() {
            let dir = match self.state[j] {
                State::Basic => continue,
                _ if self.lower[j] == self.upper[j] => continue,
                State::Lower => 1.0,
                State::Upper => -1.0,
                State::Free => 0.0,
            };
            let d = self.reduced_cost(j);
            let dir = if dir == 0.0 { -d.signum() } else { dir };
            if d * dir >= -tol::LP_REDUCED_COST {
                continue;
            }
            if bland {
                return Some((j, dir, d));
            }
            if best.is_none_or(|(_, _, bd)| d.abs() > bd.abs()) {
                best = Some((j, dir, d));
            }
        }
        best
    }

    fn column_image(&self, q: usize) -> Vec<f64> {
        let m = self.m;
        (0..m)
            .map(|i| {
                self.cols[q]
                    .iter()
                    .map(|&(k, a)| self.binv[i * m + k] * a)
                    .sum()
            })
            .collect()
    }

    /// Distance basic row `i` can move before hitting a bound, with `slack`
    /// added to the bound.
    fn room(&self, i: usize, delta: f64, slack: f64) -> Option<f64> {
        let j = self.basis[i];
        if delta > 0.0 {
            let lb = self.lower[j];
            lb.is_finite()
                .then(|| ((self.x[j] - lb + slack).max(0.0)) / delta)
        } else {
            let ub = self.upper[j];
            ub.is_finite()
                .then(|| ((ub - self.x[j] + slack).max(0.0)) / -delta)
        }
    }

    /// Returns the step length and the leaving row (`None` for a bound flip).
    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], bland: bool) -> Option<(f64, Option<usize>)> {
        let flip = self.upper[q] - self.lower[q];
        if bland {
            let mut theta = flip;
            let mut leave: Option<usize> = None;
            for (i, &a) in alpha.iter().enumerate() {
                if a.abs() <= tol::LP_PIVOT {
                    continue;
                }
                let Some(t) = self.room(i, dir * a, 0.0) else {
                    continue;
                };
                let better = match leave {
                    _ if t < theta - DEGENERATE_STEP => true,
                    Some(r) if t <= theta + DEGENERATE_STEP => self.basis[i] < self.basis[r],
                    _ => false,
                };
                if better {
                    theta = theta.min(t);
                    leave = Some(i);
                }
            }
            return (theta.is_finite()).then_some((theta, leave));
        }

        // Harris: bound the step with relaxed bounds, then take the largest
        // pivot among rows that block within that bound.
        let mut limit = flip;
        for (i, &a) in alpha.iter().enumerate() {
            if a.abs() > tol::LP_PIVOT {
                if let Some(t) = self.room(i, dir * a, HARRIS) {
                    limit = limit.min(t);
                }
            }
        }
        if !limit.is_finite() {
            return None;
        }
        if flip <= limit {
            return Some((flip, None));
        }
        let mut pick: Option<usize> = None;
        for (i, &a) in alpha.iter().enumerate() {
            if a.abs() <= tol::LP_PIVOT {
                continue;
            }
            if let Some(t) = self.room(i, dir * a, 0.0) {
                if t <= limit && pick.is_none_or(|r| a.abs() > alpha[r].abs()) {
                    pick = Some(i);
                }
            }
        }
        let r = pick?;
        let t = self.room(r, dir * alpha[r], 0.0).expect("picked rows block");
        Some((t, Some(r)))
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let p = alpha[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        prow.iter_mut().for_each(|v| *v /= p);
        for (i, &a) in alpha.iter().enumerate() {
            if i == r || a == 0.0 {
                continue;
            }
            let row = if i < r {
                &mut before[i * m..(i + 1) * m]
            } else {
                &mut after[(i - r - 1) * m..(i - r) * m]
            };
            for (v, &pv) in row.iter_mut().zip(prow.iter()) {
                *v -= a * pv;
            }
        }
    }

    fn run(&mut self) -> Result<Outcome, LpError> {
        let mut stall = 0usize;
        let mut bland = self.pricing == Pricing::Bland;
        let mut since_recompute = 0usize;
        loop {
            if self.iterations >= self.limit {
                return Err(LpError::IterationLimit(self.iterations));
            }
            if since_recompute >= RECOMPUTE_EVERY {
                self.compute_xb();
                self.compute_y();
                since_recompute = 0;
            }
            let Some((q, dir, d)) = self.price(bland) else {
                return Ok(Outcome::Optimal);
            };
            let alpha = self.column_image(q);
            let Some((theta, leave)) = self.ratio_test(q, dir, &alpha, bland) else {
                return Ok(Outcome::Unbounded);
            };
            self.iterations += 1;
            since_recompute += 1;

            let step = dir * theta;
            for (i, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    self.x[self.basis[i]] -= step * a;
                }
            }
            match leave {
                None => {
                    if dir > 0.0 {
                        self.x[q] = self.upper[q];
                        self.state[q] = State::Upper;
                    } else {
                        self.x[q] = self.lower[q];
                        self.state[q] = State::Lower;
                    }
                }
                Some(r) => {
                    self.x[q] += step;
                    let out = self.basis[r];
                    if dir * alpha[r] > 0.0 {
                        self.x[out] = self.lower[out];
                        self.state[out] = State::Lower;
                    } else {
                        self.x[out] = self.upper[out];
                        self.state[out] = State::Upper;
                    }
                    self.basis[r] = q;
                    self.state[q] = State::Basic;
                    self.pivot(r, &alpha);
                    let m = self.m;
                    let row = &self.binv[r * m..(r + 1) * m];
                    for (yk, &v) in self.y.iter_mut().zip(row) {
                        *yk += d * v;
                    }
                }
            }

            if theta <= DEGENERATE_STEP {
                stall += 1;
                if stall > self.stall_limit {
                    bland = true;
                }
            } else {
                stall = 0;
                bland = self.pricing == Pricing::Bland;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpcore::LinearProgram;

    fn assert_close(a: f64, b: f64) {
        assert!((a - b).abs() <= 1e-7 * (1.0 + b.abs()), "{a} vs {b}");
    }

    #[test]
    fn single_lower_bound_row() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Ge, 3.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.objective, 3.0);
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, f64::INFINITY, -3.0);
        let y = lp.add_var("y", 0.0, f64::INFINITY, -5.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Le, 4.0);
        lp.add_constraint(vec![(y, 2.0)], Relation::Le, 12.0);
        lp.add_constraint(vec![(x, 3.0), (y, 2.0)], Relation::Le, 18.0);
        for pricing in [Pricing::DantzigBland, Pricing::Bland] {
            let opts = SolverOptions {
                pricing,
                ..Default::default()
            };
            let sol = solve_lp_with(&lp, &opts).unwrap();
            assert_close(sol.objective, -36.0);
            assert_close(sol.values[x], 2.0);
            assert_close(sol.values[y], 6.0);
        }
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Le, 1.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Ge, 2.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);

        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, f64::INFINITY, -1.0);
        let y = lp.add_var("y", 0.0, f64::INFINITY, 0.0);
        lp.add_constraint(vec![(x, 1.0), (y, -1.0)], Relation::Le, 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_rows_bounds_and_free_variables() {
        // min x - y, x + y = 4, x - y free, y <= 3, x in [-5, 5]
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", -5.0, 5.0, 1.0);
        let y = lp.add_var("y", f64::NEG_INFINITY, 3.0, -1.0);
        let z = lp.add_var("z", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Eq, 4.0);
        lp.add_constraint(vec![(z, 1.0), (x, -1.0)], Relation::Eq, 0.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.values[x], 1.0);
        assert_close(sol.values[y], 3.0);
        assert_close(sol.values[z], 1.0);
        assert_close(sol.objective, -2.0);
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        let y = lp.add_var("y", 0.0, f64::INFINITY, 2.0);
        lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Eq, 2.0);
        lp.add_constraint(vec![(x, 2.0), (y, 2.0)], Relation::Eq, 4.0);
        lp.add_constraint(vec![(x, -1.0), (y, -1.0)], Relation::Eq, -2.0);
        let sol = solve_lp(&lp).unwrap();
        assert_close(sol.objective, 2.0);
        assert!(lp.max_violation(&sol.values) <= 1e-7);
    }

    /// Beale's example cycles under the textbook largest-coefficient rule.
    fn beale() -> LinearProgram {
        let mut lp = LinearProgram::new();
        let x4 = lp.add_var("x4", 0.0, f64::INFINITY, -0.75);
        let x5 = lp.add_var("x5", 0.0, f64::INFINITY, 150.0);
        let x6 = lp.add_var("x6", 0.0, f64::INFINITY, -0.02);
        let x7 = lp.add_var("x7", 0.0, f64::INFINITY, 6.0);
        lp.add_constraint(
            vec![(x4, 0.25), (x5, -60.0), (x6, -0.04), (x7, 9.0)],
            Relation::Le,
            0.0,
        );
        lp.add_constraint(
            vec![(x4, 0.5), (x5, -90.0), (x6, -0.02), (x7, 3.0)],
            Relation::Le,
            0.0,
        );
        lp.add_constraint(vec![(x6, 1.0)], Relation::Le, 1.0);
        lp
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        for pricing in [Pricing::DantzigBland, Pricing::Bland] {
            for stall_limit in [0, 3, 50] {
                let opts = SolverOptions {
                    pricing,
                    stall_limit,
                    max_iterations: Some(1000),
                };
                let sol = solve_lp_with(&beale(), &opts).unwrap();
                assert_eq!(sol.status, LpStatus::Optimal);
                assert_close(sol.objective, -0.05);
            }
        }
    }

    #[test]
    fn deterministic() {
        let a = solve_lp(&beale()).unwrap();
        let b = solve_lp(&beale()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_program() {
        let mut lp = LinearProgram::new();
        lp.add_var("x", 1.0, 2.0, 1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.values, vec![1.0]);
    }

    #[test]
    fn refactor_reproduces_the_inverse() {
        let lp = beale();
        let mut tab = Tableau::new(&lp, &SolverOptions::default());
        tab.run().unwrap();
        let before = tab.binv.clone();
        tab.refactor().unwrap();
        for (a, b) in before.iter().zip(&tab.binv) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    /// Minimum over all vertices of the polytope, by solving every square
    /// subsystem of active constraints.
    fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
        use nalgebra::{DMatrix, DVector};
        let n = lp.num_vars();
        let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
        for c in lp.constraints() {
            let mut row = vec![0.0; n];
            for &(j, a) in &c.coeffs {
                row[j] += a;
            }
            planes.push((row, c.rhs));
        }
        for (j, v) in lp.vars().iter().enumerate() {
            for bound in [v.lower, v.upper] {
                let mut row = vec![0.0; n];
                row[j] = 1.0;
                planes.push((row, bound));
            }
        }
        let mut best: Option<f64> = None;
        let total = planes.len();
        let mut pick: Vec<usize> = (0..n).collect();
        loop {
            let a = DMatrix::from_fn(n, n, |r, c| planes[pick[r]].0[c]);
            let b = DVector::from_fn(n, |r, _| planes[pick[r]].1);
            if let Some(x) = a.lu().solve(&b) {
                let x: Vec<f64> = x.iter().copied().collect();
                if lp.max_violation(&x) <= 1e-9 {
                    let z = lp.evaluate(&x);
                    best = Some(best.map_or(z, |m: f64| m.min(z)));
                }
            }
            // Next n-combination of the planes.
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if pick[i] < total - n + i {
                    break;
                }
            }
            pick[i] += 1;
            for k in i + 1..n {
                pick[k] = pick[k - 1] + 1;
            }
        }
    }

    fn arb_lp() -> impl Strategy<Value = LinearProgram> {
        (1usize..=4, 1usize..=4).prop_flat_map(|(n, m)| {
            let var = (-3i32..=0, 1i32..=6, -4i32..=4);
            let row = (
                proptest::collection::vec(-3i32..=3, n),
                0u8..3,
                -6i32..=12,
            );
            (
                proptest::collection::vec(var, n),
                proptest::collection::vec(row, m),
            )
                .prop_map(|(vars, rows)| {
                    let mut lp = LinearProgram::new();
                    for (j, (lo, width, c)) in vars.into_iter().enumerate() {
                        lp.add_var(format!("x{j}"), lo as f64, (lo + width) as f64, c as f64);
                    }
                    for (coeffs, rel, rhs) in rows {
                        let coeffs = coeffs
                            .into_iter()
                            .enumerate()
                            .map(|(j, a)| (j, a as f64))
                            .collect();
                        let rel = [Relation::Le, Relation::Ge, Relation::Eq][rel as usize];
                        lp.add_constraint(coeffs, rel, rhs as f64);
                    }
                    lp
                })
        })
    }

    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]

        #[test]
        fn matches_vertex_enumeration(lp in arb_lp(), bland in any::<bool>()) {
            let opts = SolverOptions {
                pricing: if bland { Pricing::Bland } else { Pricing::DantzigBland },
                ..Default::default()
            };
            let sol = solve_lp_with(&lp, &opts).unwrap();
            match vertex_oracle(&lp) {
                None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
                Some(best) => {
                    prop_assert_eq!(sol.status, LpStatus::Optimal);
                    prop_assert!(lp.max_violation(&sol.values) <= 1e-7);
                    prop_assert!((sol.objective - best).abs() <= 1e-7 * (1.0 + best.abs()),
                        "simplex {} vs oracle {}", sol.objective, best);
                }
            }
        }
    }
}
