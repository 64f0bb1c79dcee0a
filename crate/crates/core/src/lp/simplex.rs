//! Revised primal simplex applied to the dual of the user's problem.
//!
//! For `min c.x` subject to rows `g_r.x >= h_r` (`<=` rows are negated, `=`
//! rows split and finite bounds turned into rows) the dual is
//!
//! ```text
//! max h.w   s.t.  sum_r w_r g_r = c,   w >= 0
//! ```
//!
//! which has one equality per primal *variable*. The masters solved here have
//! few variables and many rows, so the basis stays small, and appending primal
//! rows only appends dual columns: the previous optimal basis remains feasible
//! and the solve continues where it stopped. The primal solution is read off
//! the simplex multipliers and the row duals are the basic `w`.

use std::collections::HashMap;

use log::{debug, warn};

use super::{LinearProgram, LpBackend, LpSolution, LpStatus, Sense};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub feasibility: f64,
    pub optimality: f64,
    pub pivot: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { feasibility: 1e-7, optimality: 1e-9, pivot: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOptions {
    pub tol: Tolerances,
    pub max_iterations: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
    pub refactor_every: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { tol: Tolerances::default(), max_iterations: 200_000, bland_after: 1000, refactor_every: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum ColId {
    /// Row `r`, negated when the flag is set.
    Row(usize, bool),
    Lower(usize),
    Upper(usize),
    Art(usize),
}

/// Basis of a previous solve, reusable after rows are appended.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    basis: Vec<ColId>,
}

struct Column {
    id: ColId,
    idx: Vec<usize>,
    val: Vec<f64>,
    cost: f64,
}

struct DualForm {
    n: usize,
    cols: Vec<Column>,
    rhs: Vec<f64>,
}

impl DualForm {
    fn new(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let mut cols = Vec::with_capacity(lp.num_rows() + 2 * n);
        for (r, row) in lp.rows().iter().enumerate() {
            let mut merged: Vec<(usize, f64)> = row.coefs.clone();
            merged.sort_by_key(|e| e.0);
            merged.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            merged.retain(|e| e.1 != 0.0);
            let idx: Vec<usize> = merged.iter().map(|e| e.0).collect();
            let val: Vec<f64> = merged.iter().map(|e| e.1).collect();
            if matches!(row.sense, Sense::Ge | Sense::Eq) {
                cols.push(Column { id: ColId::Row(r, false), idx: idx.clone(), val: val.clone(), cost: -row.rhs });
            }
            if matches!(row.sense, Sense::Le | Sense::Eq) {
                cols.push(Column { id: ColId::Row(r, true), idx, val: val.iter().map(|v| -v).collect(), cost: row.rhs });
            }
        }
        for (j, v) in lp.vars().iter().enumerate() {
            if v.lower.is_finite() {
                cols.push(Column { id: ColId::Lower(j), idx: vec![j], val: vec![1.0], cost: -v.lower });
            }
            if v.upper.is_finite() {
                cols.push(Column { id: ColId::Upper(j), idx: vec![j], val: vec![-1.0], cost: v.upper });
            }
        }
        let rhs = lp.vars().iter().map(|v| v.cost).collect();
        DualForm { n, cols, rhs }
    }
}

enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
    Singular,
}

struct Engine<'a> {
    d: &'a DualForm,
    opts: &'a SimplexOptions,
    n: usize,
    m: usize,
    sign: Vec<f64>,
    basis: Vec<usize>,
    pos_of: Vec<Option<usize>>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    /// Right-hand side in use; differs from the dual form's while perturbed.
    rhs: Vec<f64>,
    perturbed: bool,
}

impl<'a> Engine<'a> {
    fn new(d: &'a DualForm, opts: &'a SimplexOptions) -> Self {
        let n = d.n;
        let m = d.cols.len();
        let sign: Vec<f64> = d.rhs.iter().map(|&c| if c < 0.0 { -1.0 } else { 1.0 }).collect();
        Engine {
            d,
            opts,
            n,
            m,
            sign,
            basis: Vec::new(),
            pos_of: vec![None; m + n],
            binv: Vec::new(),
            xb: Vec::new(),
            iterations: 0,
            since_refactor: 0,
            rhs: d.rhs.clone(),
            perturbed: false,
        }
    }

    fn set_basis(&mut self, basis: Vec<usize>) -> bool {
        self.pos_of.iter_mut().for_each(|p| *p = None);
        for (i, &j) in basis.iter().enumerate() {
            if self.pos_of[j].is_some() {
                return false;
            }
            self.pos_of[j] = Some(i);
        }
        self.basis = basis;
        self.refactor()
    }

    fn slack_basis(&mut self) {
        let n = self.n;
        self.rhs = self.d.rhs.clone();
        self.perturbed = false;
        self.basis = (0..n).map(|i| self.m + i).collect();
        self.pos_of.iter_mut().for_each(|p| *p = None);
        for i in 0..n {
            self.pos_of[self.m + i] = Some(i);
        }
        self.binv = vec![0.0; n * n];
        for i in 0..n {
            self.binv[i * n + i] = self.sign[i];
        }
        self.xb = self.d.rhs.iter().map(|c| c.abs()).collect();
        self.since_refactor = 0;
    }

    fn for_each_entry(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.m {
            let c = &self.d.cols[j];
            for (&i, &v) in c.idx.iter().zip(&c.val) {
                f(i, v);
            }
        } else {
            let i = j - self.m;
            f(i, self.sign[i]);
        }
    }

    fn cost(&self, j: usize, phase1: bool) -> f64 {
        match (j < self.m, phase1) {
            (true, true) => 0.0,
            (true, false) => self.d.cols[j].cost,
            (false, true) => 1.0,
            (false, false) => 0.0,
        }
    }

    fn refactor(&mut self) -> bool {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for (pos, &j) in self.basis.iter().enumerate() {
            self.for_each_entry(j, |i, v| a[i * n + pos] += v);
        }
        let mut inv = vec![0.0; n * n];
        for i in 0..n {
            inv[i * n + i] = 1.0;
        }
        for col in 0..n {
            let mut p = col;
            let mut best = a[col * n + col].abs();
            for r in col + 1..n {
                let v = a[r * n + col].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best < 1e-12 {
                return false;
            }
            if p != col {
                for k in 0..n {
                    a.swap(p * n + k, col * n + k);
                    inv.swap(p * n + k, col * n + k);
                }
            }
            let piv = a[col * n + col];
            for k in 0..n {
                a[col * n + k] /= piv;
                inv[col * n + k] /= piv;
            }
            let arow: Vec<f64> = a[col * n..col * n + n].to_vec();
            let irow: Vec<f64> = inv[col * n..col * n + n].to_vec();
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[r * n + col];
                if f != 0.0 {
                    for k in 0..n {
                        a[r * n + k] -= f * arow[k];
                        inv[r * n + k] -= f * irow[k];
                    }
                }
            }
        }
        self.binv = inv;
        self.xb = (0..n).map(|i| (0..n).map(|k| self.binv[i * n + k] * self.rhs[k]).sum()).collect();
        // two rounds of iterative refinement against the original columns
        for _ in 0..2 {
            let mut resid = self.rhs.clone();
            for (pos, &j) in self.basis.iter().enumerate() {
                let x = self.xb[pos];
                self.for_each_entry(j, |k, v| resid[k] -= v * x);
            }
            for i in 0..n {
                self.xb[i] += (0..n).map(|k| self.binv[i * n + k] * resid[k]).sum::<f64>();
            }
        }
        self.since_refactor = 0;
        true
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let n = self.n;
        let mut alpha = vec![0.0; n];
        self.for_each_entry(j, |k, v| {
            for (i, a) in alpha.iter_mut().enumerate() {
                *a += self.binv[i * n + k] * v;
            }
        });
        alpha
    }

    fn multipliers(&self, phase1: bool) -> Vec<f64> {
        let n = self.n;
        let mut pi = vec![0.0; n];
        for (i, &j) in self.basis.iter().enumerate() {
            let cb = self.cost(j, phase1);
            if cb != 0.0 {
                let row = &self.binv[i * n..i * n + n];
                for (p, b) in pi.iter_mut().zip(row) {
                    *p += cb * b;
                }
            }
        }
        pi
    }

    fn reduced_cost(&self, j: usize, pi: &[f64], phase1: bool) -> f64 {
        let mut d = self.cost(j, phase1);
        self.for_each_entry(j, |i, v| d -= pi[i] * v);
        d
    }

    fn pivot(&mut self, r: usize, j: usize, alpha: &[f64]) {
        let n = self.n;
        let piv = alpha[r];
        let theta = self.xb[r] / piv;
        for (i, x) in self.xb.iter_mut().enumerate() {
            if i != r {
                *x -= theta * alpha[i];
            }
        }
        self.xb[r] = theta;
        let row: Vec<f64> = self.binv[r * n..r * n + n].iter().map(|b| b / piv).collect();
        for i in 0..n {
            if i == r {
                continue;
            }
            let f = alpha[i];
            if f != 0.0 {
                for (b, rv) in self.binv[i * n..i * n + n].iter_mut().zip(&row) {
                    *b -= f * rv;
                }
            }
        }
        self.binv[r * n..r * n + n].copy_from_slice(&row);
        let old = self.basis[r];
        self.pos_of[old] = None;
        self.pos_of[j] = Some(r);
        self.basis[r] = j;
        self.iterations += 1;
        self.since_refactor += 1;
    }

    /// Harris two-pass ratio test. Returns the leaving position.
    fn ratio(&self, alpha: &[f64], phase1: bool, bland: bool) -> Option<usize> {
        let tol = &self.opts.tol;
        if !phase1 {
            // artificials left in the basis must stay at zero
            let mut forced: Option<(usize, f64)> = None;
            for (i, &j) in self.basis.iter().enumerate() {
                if j >= self.m && alpha[i].abs() > 1e-9 && forced.is_none_or(|(_, a)| alpha[i].abs() > a) {
                    forced = Some((i, alpha[i].abs()));
                }
            }
            if let Some((i, _)) = forced {
                return Some(i);
            }
        }
        let mut theta_max = f64::INFINITY;
        for (i, &a) in alpha.iter().enumerate() {
            if a > tol.pivot {
                theta_max = theta_max.min((self.xb[i].max(0.0) + tol.feasibility) / a);
            }
        }
        if theta_max == f64::INFINITY {
            return None;
        }
        let mut leave: Option<usize> = None;
        if bland {
            let mut min_ratio = f64::INFINITY;
            for (i, &a) in alpha.iter().enumerate() {
                if a > tol.pivot {
                    min_ratio = min_ratio.min(self.xb[i].max(0.0) / a);
                }
            }
            for (i, &a) in alpha.iter().enumerate() {
                if a > tol.pivot
                    && self.xb[i].max(0.0) / a <= min_ratio + 1e-12
                    && leave.is_none_or(|l| self.basis[i] < self.basis[l])
                {
                    leave = Some(i);
                }
            }
        } else {
            let mut best = 0.0;
            for (i, &a) in alpha.iter().enumerate() {
                if a > tol.pivot && self.xb[i].max(0.0) / a <= theta_max && a > best {
                    best = a;
                    leave = Some(i);
                }
            }
        }
        leave
    }

    fn iterate(&mut self, phase1: bool) -> Outcome {
        let mut degenerate_run = 0usize;
        let mut best_obj = self.objective(phase1);
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Outcome::IterationLimit;
            }
            if self.since_refactor >= self.opts.refactor_every && !self.refactor() {
                return Outcome::Singular;
            }
            // phase 1 is done once the artificials are out, whatever the reduced costs say
            if phase1 && self.artificial_mass() <= 1e-11 * self.feasibility_scale() {
                return Outcome::Optimal;
            }
            let pi = self.multipliers(phase1);
            if !phase1 && !self.perturbed && degenerate_run >= self.opts.bland_after {
                self.perturb();
                degenerate_run = 0;
                best_obj = self.objective(phase1);
            }
            let bland = degenerate_run >= self.opts.bland_after;
            let mut enter = None;
            let mut best = 0.0;
            for j in 0..self.m {
                if self.pos_of[j].is_some() {
                    continue;
                }
                let c = self.cost(j, phase1);
                let dj = self.reduced_cost(j, &pi, phase1);
                if dj < -self.opts.tol.optimality * (1.0 + c.abs()) {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if dj < best {
                        best = dj;
                        enter = Some(j);
                    }
                }
            }
            let Some(j) = enter else {
                return Outcome::Optimal;
            };
            let alpha = self.ftran(j);
            let Some(r) = self.ratio(&alpha, phase1, bland) else {
                return Outcome::Unbounded;
            };
            self.pivot(r, j, &alpha);
            // progress is judged against the best objective so far, so that
            // pivots that only shuffle rounding noise still count as stalling
            let obj = self.objective(phase1);
            if obj < best_obj - 1e-11 * (1.0 + obj.abs()) {
                best_obj = obj;
                degenerate_run = 0;
            } else {
                degenerate_run += 1;
            }
        }
    }

    /// Lifts every structural basic value by a small distinct amount and
    /// moves the right-hand side to match, which breaks the ties behind a
    /// degenerate stall while keeping the basis feasible.
    fn perturb(&mut self) {
        let n = self.n;
        let base = 1e-8 * self.feasibility_scale();
        let mut rhs = vec![0.0; n];
        for pos in 0..n {
            let j = self.basis[pos];
            if j < self.m {
                let h = (pos as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) >> 40;
                self.xb[pos] = self.xb[pos].max(0.0) + base * (1.0 + h as f64 / (1u64 << 24) as f64);
            }
            let x = self.xb[pos];
            self.for_each_entry(j, |k, v| rhs[k] += v * x);
        }
        self.rhs = rhs;
        self.perturbed = true;
    }

    /// Restores the true right-hand side, refactors, and repairs any basic
    /// value that is negative (from the perturbation or from drift in the
    /// updated inverse) with dual simplex pivots. The basis stays dual
    /// feasible throughout. Returns the outcome and the number of pivots.
    fn repair(&mut self) -> (Outcome, usize) {
        self.rhs = self.d.rhs.clone();
        self.perturbed = false;
        let start = self.iterations;
        if !self.refactor() {
            return (Outcome::Singular, 0);
        }
        let tol = self.opts.tol.feasibility * self.feasibility_scale();
        let n = self.n;
        loop {
            let done = self.iterations - start;
            if self.iterations >= self.opts.max_iterations {
                return (Outcome::IterationLimit, done);
            }
            let Some(r) = (0..n).filter(|&i| self.xb[i] < -tol).min_by(|&a, &b| self.xb[a].total_cmp(&self.xb[b])) else {
                return (Outcome::Optimal, done);
            };
            let pi = self.multipliers(false);
            let row: Vec<f64> = self.binv[r * n..r * n + n].to_vec();
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..self.m {
                if self.pos_of[j].is_some() {
                    continue;
                }
                let mut a = 0.0;
                self.for_each_entry(j, |k, v| a += row[k] * v);
                if a < -self.opts.tol.pivot {
                    let ratio = self.reduced_cost(j, &pi, false).max(0.0) / -a;
                    if enter.is_none_or(|(_, best)| ratio < best) {
                        enter = Some((j, ratio));
                    }
                }
            }
            let Some((j, _)) = enter else {
                // the row cannot be repaired, which with a dual feasible basis
                // means the factorisation has lost accuracy
                return (Outcome::Singular, done);
            };
            let alpha = self.ftran(j);
            self.pivot(r, j, &alpha);
            if self.since_refactor >= self.opts.refactor_every && !self.refactor() {
                return (Outcome::Singular, done);
            }
        }
    }

    fn objective(&self, phase1: bool) -> f64 {
        self.basis.iter().zip(&self.xb).map(|(&j, x)| self.cost(j, phase1) * x).sum()
    }

    fn artificial_mass(&self) -> f64 {
        self.basis.iter().zip(&self.xb).filter(|(&j, _)| j >= self.m).map(|(_, x)| x.max(0.0)).sum()
    }

    /// Pivots zero-valued artificials out of the basis where some structural
    /// column can replace them.
    fn drive_out_artificials(&mut self) {
        let n = self.n;
        for r in 0..n {
            if self.basis[r] < self.m {
                continue;
            }
            let row: Vec<f64> = self.binv[r * n..r * n + n].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.m {
                if self.pos_of[j].is_some() {
                    continue;
                }
                let mut a = 0.0;
                self.for_each_entry(j, |k, v| a += row[k] * v);
                if a.abs() > 1e-7 && best.is_none_or(|(_, b)| a.abs() > b) {
                    best = Some((j, a.abs()));
                }
            }
            if let Some((j, _)) = best {
                let alpha = self.ftran(j);
                self.pivot(r, j, &alpha);
            }
        }
    }

    fn feasibility_scale(&self) -> f64 {
        1.0 + self.d.rhs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Phase 1 (when artificials carry mass) followed by phase 2.
    fn run(&mut self) -> (Outcome, bool) {
        if self.artificial_mass() > 0.0 {
            match self.iterate(true) {
                Outcome::Optimal => {}
                other => return (other, false),
            }
            if self.artificial_mass() > self.opts.tol.feasibility * self.feasibility_scale() {
                return (Outcome::Optimal, false);
            }
        }
        self.drive_out_artificials();
        if !self.refactor() {
            return (Outcome::Singular, true);
        }
        loop {
            match self.iterate(false) {
                Outcome::Optimal => match self.repair() {
                    (Outcome::Optimal, 0) => return (Outcome::Optimal, true),
                    (Outcome::Optimal, _) => continue,
                    (other, _) => return (other, true),
                },
                other => return (other, true),
            }
        }
    }
}

/// Dense revised simplex working on the dual standard form.
#[derive(Debug, Clone, Default)]
pub struct DenseSimplex {
    pub options: SimplexOptions,
}

impl DenseSimplex {
    pub fn new(options: SimplexOptions) -> Self {
        DenseSimplex { options }
    }

    fn solve_from(&self, lp: &LinearProgram, warm: Option<&WarmStart>) -> LpSolution {
        if lp.num_vars() == 0 {
            return trivial(lp);
        }
        let d = DualForm::new(lp);
        let mut eng = Engine::new(&d, &self.options);
        let mut warmed = false;
        if let Some(ws) = warm {
            warmed = apply_warm(&mut eng, &d, ws, &self.options);
            if !warmed {
                debug!("warm start rejected, solving from scratch");
            }
        }
        if !warmed {
            eng.slack_basis();
        }
        let (mut outcome, mut feasible) = eng.run();
        if matches!(outcome, Outcome::Singular) {
            warn!("basis became singular, restarting from the slack basis");
            let used = eng.iterations;
            eng.slack_basis();
            eng.iterations = used;
            (outcome, feasible) = eng.run();
        }
        let iterations = eng.iterations;
        match outcome {
            Outcome::Optimal if !feasible => {
                let status = if dual_ray_exists(lp, &self.options) { LpStatus::Infeasible } else { LpStatus::Unbounded };
                empty(lp, status, iterations)
            }
            Outcome::Optimal => extract(lp, &d, &mut eng, LpStatus::Optimal),
            Outcome::Unbounded => empty(lp, LpStatus::Infeasible, iterations),
            Outcome::IterationLimit | Outcome::Singular => {
                if feasible {
                    extract(lp, &d, &mut eng, LpStatus::IterationLimit)
                } else {
                    empty(lp, LpStatus::IterationLimit, iterations)
                }
            }
        }
    }
}

impl LpBackend for DenseSimplex {
    fn solve(&self, lp: &LinearProgram) -> LpSolution {
        self.solve_from(lp, None)
    }

    fn resolve(&self, lp: &LinearProgram, prior: &LpSolution) -> LpSolution {
        self.solve_from(lp, prior.warm.as_ref())
    }
}

fn apply_warm(eng: &mut Engine<'_>, d: &DualForm, ws: &WarmStart, opts: &SimplexOptions) -> bool {
    if ws.basis.len() != d.n {
        return false;
    }
    let index: HashMap<ColId, usize> = d.cols.iter().enumerate().map(|(j, c)| (c.id, j)).collect();
    let mut basis = Vec::with_capacity(d.n);
    for id in &ws.basis {
        match id {
            ColId::Art(i) if *i < d.n => basis.push(d.cols.len() + i),
            other => match index.get(other) {
                Some(&j) => basis.push(j),
                None => return false,
            },
        }
    }
    if !eng.set_basis(basis) {
        return false;
    }
    let tol = opts.tol.feasibility * eng.feasibility_scale();
    eng.xb.iter().all(|&x| x >= -tol)
}

/// Feasibility of the primal: with a zero objective its dual is bounded
/// exactly when the primal rows admit a point.
fn dual_ray_exists(lp: &LinearProgram, opts: &SimplexOptions) -> bool {
    let mut zero = lp.clone();
    for j in 0..zero.num_vars() {
        zero.set_cost(j, 0.0);
    }
    let d = DualForm::new(&zero);
    let mut eng = Engine::new(&d, opts);
    eng.slack_basis();
    let (outcome, _) = eng.run();
    matches!(outcome, Outcome::Unbounded)
}

fn trivial(lp: &LinearProgram) -> LpSolution {
    let ok = lp.primal_residual(&[]) <= 0.0;
    LpSolution {
        status: if ok { LpStatus::Optimal } else { LpStatus::Infeasible },
        primal: Vec::new(),
        duals: vec![0.0; lp.num_rows()],
        objective: 0.0,
        iterations: 0,
        dual_degenerate: false,
        warm: None,
    }
}

fn empty(lp: &LinearProgram, status: LpStatus, iterations: usize) -> LpSolution {
    LpSolution {
        status,
        primal: vec![f64::NAN; lp.num_vars()],
        duals: vec![f64::NAN; lp.num_rows()],
        objective: match status {
            LpStatus::Unbounded => f64::NEG_INFINITY,
            LpStatus::Infeasible => f64::INFINITY,
            _ => f64::NAN,
        },
        iterations,
        dual_degenerate: false,
        warm: None,
    }
}

fn extract(lp: &LinearProgram, d: &DualForm, eng: &mut Engine<'_>, status: LpStatus) -> LpSolution {
    eng.refactor();
    let pi = eng.multipliers(false);
    let primal: Vec<f64> = pi.iter().map(|p| -p).collect();
    let mut duals = vec![0.0; lp.num_rows()];
    for (pos, &j) in eng.basis.iter().enumerate() {
        if j >= eng.m {
            continue;
        }
        let w = eng.xb[pos];
        match d.cols[j].id {
            ColId::Row(r, false) => duals[r] += w,
            ColId::Row(r, true) => duals[r] -= w,
            _ => {}
        }
    }
    let mut dual_degenerate = false;
    for (j, col) in d.cols.iter().enumerate() {
        if eng.pos_of[j].is_some() {
            continue;
        }
        if let ColId::Row(r, _) = col.id {
            if lp.rows()[r].sense == Sense::Eq {
                let twin = if j > 0 && matches!(d.cols[j - 1].id, ColId::Row(q, false) if q == r) { j - 1 } else { j + 1 };
                if eng.pos_of[twin].is_none() {
                    dual_degenerate = true;
                }
                continue;
            }
        }
        let dj = eng.reduced_cost(j, &pi, false);
        if dj.abs() <= eng.opts.tol.optimality * (1.0 + col.cost.abs()) * 10.0 {
            dual_degenerate = true;
        }
    }
    let warm = WarmStart {
        basis: eng
            .basis
            .iter()
            .map(|&j| if j < eng.m { d.cols[j].id } else { ColId::Art(j - eng.m) })
            .collect(),
    };
    LpSolution {
        status,
        objective: lp.objective(&primal),
        primal,
        duals,
        iterations: eng.iterations,
        dual_degenerate,
        warm: Some(warm),
    }
}
