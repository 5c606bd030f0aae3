//! Dense log-barrier interior-point solver for linearly constrained LPs and
//! QPs. Small and deterministic: this is the reference oracle the iterative
//! fits are checked against, not a production solver.
//!
//! Programs are `minimize (1/2) w'Qw + c'w + k  s.t.  G w <= h` (or the
//! maximize counterpart for linear objectives). Constraint rows are stored
//! sparsely; the Newton Hessian `t Q + G' diag(1/s^2) G` is accumulated from
//! row products, which keeps the per-step cost at `O(sum nnz_r^2 + v^3)`.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Barrier parameters. Fixed schedule, no randomization: identical inputs
/// produce bit-identical outputs.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Target duality-gap bound m/t.
    pub tol: f64,
    /// Barrier increase factor.
    pub mu: f64,
    /// Newton stopping threshold on the decrement lambda^2 / 2.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub max_outer_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            mu: 10.0,
            newton_tol: 1e-18,
            max_newton_iters: 80,
            max_outer_iters: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    MaxIterations,
}

/// A dense-standard-form convex program over `num_vars` variables with
/// inequality constraints `G w <= h`.
#[derive(Debug, Clone)]
pub struct ConvexProgram {
    num_vars: usize,
    quadratic: Option<DMatrix<f64>>,
    linear: DVector<f64>,
    constant: f64,
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    sense: Sense,
}

impl ConvexProgram {
    pub fn minimize(num_vars: usize) -> Self {
        Self {
            num_vars,
            quadratic: None,
            linear: DVector::zeros(num_vars),
            constant: 0.0,
            rows: Vec::new(),
            rhs: Vec::new(),
            sense: Sense::Minimize,
        }
    }

    pub fn maximize(num_vars: usize) -> Self {
        Self {
            sense: Sense::Maximize,
            ..Self::minimize(num_vars)
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    /// Set the quadratic term `(1/2) w' Q w`. Q must be symmetric PSD; this is
    /// verified by an attempted factorization at solve time.
    pub fn set_quadratic(&mut self, q: DMatrix<f64>) -> Result<()> {
        if q.nrows() != self.num_vars || q.ncols() != self.num_vars {
            return Err(Error::ShapeMismatch(format!(
                "quadratic is {}x{}, want {0}x{0}",
                q.nrows(),
                q.ncols()
            )));
        }
        if self.sense == Sense::Maximize {
            return Err(Error::InvalidConfig(
                "maximize is only supported for linear objectives".into(),
            ));
        }
        self.quadratic = Some(q);
        Ok(())
    }

    pub fn set_linear_term(&mut self, idx: usize, coef: f64) {
        self.linear[idx] = coef;
    }

    pub fn set_constant(&mut self, k: f64) {
        self.constant = k;
    }

    /// Add a constraint `sum coefs . w <= rhs` given as sparse (index, value)
    /// pairs. Repeated indices accumulate.
    pub fn add_constraint(&mut self, coefs: &[(usize, f64)], rhs: f64) {
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(coefs.len());
        for &(i, v) in coefs {
            debug_assert!(i < self.num_vars);
            if v == 0.0 {
                continue;
            }
            match row.iter_mut().find(|(j, _)| *j == i) {
                Some((_, acc)) => *acc += v,
                None => row.push((i, v)),
            }
        }
        self.rows.push(row);
        self.rhs.push(rhs);
    }

    /// Dense view of the constraint matrix, for debugging and small tests.
    pub fn ineq_matrix(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.rows.len(), self.num_vars);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                g[(r, c)] += v;
            }
        }
        g
    }

    pub fn ineq_rhs(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.rhs)
    }

    /// Objective value in the program's own sense.
    pub fn objective_value(&self, w: &DVector<f64>) -> f64 {
        let raw = self.raw_objective(w);
        match self.sense {
            Sense::Minimize => raw,
            Sense::Maximize => -raw,
        }
    }

    // Internal objective is always a minimization.
    fn raw_objective(&self, w: &DVector<f64>) -> f64 {
        let sign = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut v = sign * (self.linear.dot(w) + self.constant);
        if let Some(q) = &self.quadratic {
            v += 0.5 * (w.transpose() * q * w)[(0, 0)];
        }
        v
    }

    fn raw_gradient(&self, w: &DVector<f64>, out: &mut DVector<f64>) {
        let sign = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        out.copy_from(&self.linear);
        *out *= sign;
        if let Some(q) = &self.quadratic {
            *out += q * w;
        }
    }

    fn row_dot(&self, r: usize, w: &DVector<f64>) -> f64 {
        self.rows[r].iter().map(|&(c, v)| v * w[c]).sum()
    }

    /// Slacks `h - G w`.
    fn slacks(&self, w: &DVector<f64>) -> Vec<f64> {
        (0..self.rows.len())
            .map(|r| self.rhs[r] - self.row_dot(r, w))
            .collect()
    }

    /// Plain-text dump of the program, one line per entity:
    ///
    /// ```text
    /// vars <v> constraints <m> sense <min|max>
    /// linear <v floats>
    /// constant <k>
    /// quadratic <none | v lines of v floats>
    /// row <nnz> <idx:val ...> rhs <h>
    /// ```
    pub fn write_debug_dump<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(
            out,
            "vars {} constraints {} sense {}",
            self.num_vars,
            self.rows.len(),
            match self.sense {
                Sense::Minimize => "min",
                Sense::Maximize => "max",
            }
        )?;
        write!(out, "linear")?;
        for v in self.linear.iter() {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
        writeln!(out, "constant {}", self.constant)?;
        match &self.quadratic {
            None => writeln!(out, "quadratic none")?,
            Some(q) => {
                writeln!(out, "quadratic dense")?;
                for r in 0..q.nrows() {
                    let line: Vec<String> = (0..q.ncols()).map(|c| q[(r, c)].to_string()).collect();
                    writeln!(out, "{}", line.join(" "))?;
                }
            }
        }
        for (row, h) in self.rows.iter().zip(&self.rhs) {
            write!(out, "row {}", row.len())?;
            for (c, v) in row {
                write!(out, " {c}:{v}")?;
            }
            writeln!(out, " rhs {h}")?;
        }
        Ok(())
    }
}

/// Primal solution plus the barrier's dual estimate for each constraint.
#[derive(Debug, Clone)]
pub struct Solution {
    pub w: DVector<f64>,
    pub objective: f64,
    pub duals: Vec<f64>,
    pub status: Status,
    pub newton_steps: usize,
}

impl Solution {
    /// Max violation of `G w <= h` (positive means infeasible).
    pub fn max_violation(&self, prog: &ConvexProgram) -> f64 {
        prog.slacks(&self.w)
            .iter()
            .map(|s| -s)
            .fold(0.0, f64::max)
    }
}

pub fn solve(prog: &ConvexProgram, tol: f64) -> Result<Solution> {
    solve_with(prog, &SolveOptions { tol, ..Default::default() })
}

pub fn solve_with(prog: &ConvexProgram, opts: &SolveOptions) -> Result<Solution> {
    if opts.tol <= 0.0 {
        return Err(Error::InvalidConfig("tol must be positive".into()));
    }
    if let Some(q) = &prog.quadratic {
        // PSD check: Cholesky of Q + eps I must succeed.
        let jitter = 1e-10 * (1.0 + q.amax());
        let mut qj = q.clone();
        for i in 0..qj.nrows() {
            qj[(i, i)] += jitter;
        }
        if Cholesky::new(qj).is_none() {
            return Err(Error::InvalidConfig("quadratic term is not PSD".into()));
        }
    }

    let w0 = phase_one(prog, opts)?;
    barrier_minimize(prog, w0, opts)
}

/// Infeasible-start phase I: minimize s over (w, s) subject to
/// `g_r' w - s <= h_r`, starting from w = 0, s = max violation + 1.
/// Stops early once s is comfortably negative.
fn phase_one(prog: &ConvexProgram, opts: &SolveOptions) -> Result<DVector<f64>> {
    let m = prog.rows.len();
    let v = prog.num_vars;
    if m == 0 {
        return Ok(DVector::zeros(v));
    }

    let w0 = DVector::zeros(v);
    let slacks = prog.slacks(&w0);
    let worst = slacks.iter().map(|s| -s).fold(f64::NEG_INFINITY, f64::max);
    if worst < 0.0 {
        // strictly feasible already
        return Ok(w0);
    }

    let mut aux = ConvexProgram::minimize(v + 1);
    aux.set_linear_term(v, 1.0);
    for (row, &h) in prog.rows.iter().zip(&prog.rhs) {
        let mut coefs: Vec<(usize, f64)> = row.clone();
        coefs.push((v, -1.0));
        aux.add_constraint(&coefs, h);
    }

    let scale = 1.0 + prog.rhs.iter().map(|h| h.abs()).fold(0.0, f64::max);
    let margin = 1e-9 * scale;

    let mut point = DVector::zeros(v + 1);
    point[v] = worst + 1.0;

    let mut t = (aux.rows.len() as f64) / point[v].abs().max(1.0);
    let mut total_steps = 0usize;
    for _ in 0..opts.max_outer_iters {
        let (next, steps) = newton_center(&aux, point, t, opts, Some((v, -margin)))?;
        point = next;
        total_steps += steps;
        if point[v] < -margin {
            return Ok(point.rows(0, v).into_owned());
        }
        if (aux.rows.len() as f64) / t < opts.tol {
            break;
        }
        t *= opts.mu;
        if total_steps > 10_000 {
            break;
        }
    }
    if point[v] < 0.0 {
        Ok(point.rows(0, v).into_owned())
    } else {
        Err(Error::Infeasible(point[v]))
    }
}

fn barrier_minimize(
    prog: &ConvexProgram,
    mut w: DVector<f64>,
    opts: &SolveOptions,
) -> Result<Solution> {
    let m = prog.rows.len();
    if m == 0 {
        return Err(Error::InvalidConfig(
            "unconstrained programs are not supported".into(),
        ));
    }

    let f0 = prog.raw_objective(&w);
    let mut t = (m as f64) / f0.abs().max(1.0);
    let mut steps = 0usize;
    let mut status = Status::MaxIterations;

    for _ in 0..opts.max_outer_iters {
        let (next, ns) = newton_center(prog, w, t, opts, None)?;
        w = next;
        steps += ns;
        if (m as f64) / t < opts.tol {
            status = Status::Optimal;
            break;
        }
        t *= opts.mu;
    }

    let slacks = prog.slacks(&w);
    let duals: Vec<f64> = slacks.iter().map(|s| 1.0 / (t * s)).collect();
    Ok(Solution {
        objective: prog.objective_value(&w),
        w,
        duals,
        status,
        newton_steps: steps,
    })
}

/// Newton's method with backtracking on `t f(w) + phi(w)` where `phi` is the
/// log barrier of the constraints. `early_exit` stops as soon as coordinate
/// `i` drops below the given threshold (used by phase I).
fn newton_center(
    prog: &ConvexProgram,
    mut w: DVector<f64>,
    t: f64,
    opts: &SolveOptions,
    early_exit: Option<(usize, f64)>,
) -> Result<(DVector<f64>, usize)> {
    let v = prog.num_vars;
    let mut grad = DVector::zeros(v);
    let mut obj_grad = DVector::zeros(v);

    let barrier_value = |w: &DVector<f64>| -> Option<f64> {
        let mut val = t * prog.raw_objective(w);
        for r in 0..prog.rows.len() {
            let s = prog.rhs[r] - prog.row_dot(r, w);
            if s <= 0.0 {
                return None;
            }
            val -= s.ln();
        }
        Some(val)
    };

    let mut fw = match barrier_value(&w) {
        Some(v) => v,
        None => return Err(Error::NumericalFailure("infeasible start for centering".into())),
    };

    let mut best_decrement = f64::INFINITY;
    let mut stall = 0usize;
    for step in 0..opts.max_newton_iters {
        if let Some((idx, thr)) = early_exit {
            if w[idx] < thr {
                return Ok((w, step));
            }
        }

        // gradient and Hessian of t f + phi
        prog.raw_gradient(&w, &mut obj_grad);
        grad.copy_from(&obj_grad);
        grad *= t;
        let mut hess = match &prog.quadratic {
            Some(q) => q * t,
            None => DMatrix::zeros(v, v),
        };
        for r in 0..prog.rows.len() {
            let s = prog.rhs[r] - prog.row_dot(r, &w);
            let inv = 1.0 / s;
            let inv2 = inv * inv;
            for &(c1, v1) in &prog.rows[r] {
                grad[c1] += v1 * inv;
                for &(c2, v2) in &prog.rows[r] {
                    if c2 >= c1 {
                        hess[(c1, c2)] += v1 * v2 * inv2;
                    }
                }
            }
        }
        for c1 in 0..v {
            for c2 in (c1 + 1)..v {
                hess[(c2, c1)] = hess[(c1, c2)];
            }
        }
        // The programs have flat directions (e.g. a common shift of all z),
        // so the barrier Hessian can be singular; a scale-relative ridge
        // keeps the factorization positive definite without distorting the
        // step in curved directions.
        let max_diag = (0..v).map(|i| hess[(i, i)]).fold(0.0f64, f64::max);
        let ridge = 1e-13 * (1.0 + max_diag);
        for i in 0..v {
            hess[(i, i)] += ridge;
        }

        // solve H dx = -g, adding jitter if the factorization fails
        let mut jitter = 0.0;
        let dx = loop {
            let mut h = hess.clone();
            if jitter > 0.0 {
                for i in 0..v {
                    h[(i, i)] += jitter;
                }
            }
            if blocked_cholesky(&mut h) {
                let mut sol = -&grad;
                cholesky_solve_in_place(&h, &mut sol);
                break sol;
            }
            jitter = if jitter == 0.0 { 1e-12 * (1.0 + hess.amax()) } else { jitter * 100.0 };
            if jitter > 1e6 * (1.0 + hess.amax()) {
                return Err(Error::NumericalFailure(
                    "Newton system factorization failed".into(),
                ));
            }
        };

        let decrement = -grad.dot(&dx); // lambda^2
        if !decrement.is_finite() {
            return Err(Error::NumericalFailure("non-finite Newton decrement".into()));
        }
        if decrement / 2.0 <= opts.newton_tol {
            return Ok((w, step));
        }
        // The achievable decrement has a rounding floor that grows with t;
        // once progress stalls at an already-small decrement, the point is
        // as centered as arithmetic allows.
        if decrement > 0.3 * best_decrement {
            stall += 1;
            if stall >= 3 && decrement <= 1e-2 {
                return Ok((w, step));
            }
        } else {
            stall = 0;
        }
        best_decrement = best_decrement.min(decrement);

        // largest step that keeps every slack strictly positive
        let mut max_lr = 1.0f64;
        for r in 0..prog.rows.len() {
            let gd: f64 = prog.rows[r].iter().map(|&(c, v)| v * dx[c]).sum();
            if gd > 0.0 {
                let s = prog.rhs[r] - prog.row_dot(r, &w);
                max_lr = max_lr.min(0.99 * s / gd);
            }
        }

        if decrement <= 1e-6 {
            // quadratic-convergence region: take the capped full step. Armijo
            // comparisons here drown in the rounding of t*f(w).
            let cand = &w + &dx * max_lr;
            match barrier_value(&cand) {
                Some(fc) => {
                    w = cand;
                    fw = fc;
                }
                None => return Ok((w, step)),
            }
        } else {
            // backtracking line search (alpha = 0.25, beta = 0.5)
            let mut lr = max_lr;
            let mut accepted = false;
            for _ in 0..60 {
                let cand = &w + &dx * lr;
                if let Some(fc) = barrier_value(&cand) {
                    if fc <= fw - 0.25 * lr * decrement {
                        w = cand;
                        fw = fc;
                        accepted = true;
                        break;
                    }
                }
                lr *= 0.5;
            }
            if !accepted {
                // cannot make progress; treat current point as centered
                return Ok((w, step));
            }
        }
        if w.amax() > 1e14 {
            return Err(Error::Unbounded);
        }
    }
    Ok((w, opts.max_newton_iters))
}

/// In-place blocked Cholesky of the lower triangle; returns false when the
/// matrix is not positive definite. The trailing updates go through gemm,
/// which is where the cubic work lives.
fn blocked_cholesky(h: &mut DMatrix<f64>) -> bool {
    let n = h.nrows();
    const BLOCK: usize = 48;
    let mut k = 0;
    while k < n {
        let b = BLOCK.min(n - k);
        {
            let s = h.as_mut_slice();
            for j in k..k + b {
                let (before, rest) = s.split_at_mut(j * n);
                for t in k..j {
                    let f = before[t * n + j];
                    let col_t = &before[t * n + j..t * n + n];
                    let col_j = &mut rest[j..n];
                    for (cj, ct) in col_j.iter_mut().zip(col_t) {
                        *cj -= f * *ct;
                    }
                }
                let d = rest[j];
                if d <= 0.0 || !d.is_finite() {
                    return false;
                }
                let root = d.sqrt();
                rest[j] = root;
                let inv = 1.0 / root;
                for v in rest[j + 1..n].iter_mut() {
                    *v *= inv;
                }
            }
        }
        let rows = n - k - b;
        if rows > 0 {
            // owned copies so the update dispatches to the fast gemm path
            let panel = h.view((k + b, k), (rows, b)).into_owned();
            let panel_t = panel.transpose();
            let mut trailing = h.view_mut((k + b, k + b), (rows, rows));
            trailing.gemm(-1.0, &panel, &panel_t, 1.0);
        }
        k += b;
    }
    true
}

/// Forward/backward substitution against a lower-triangular factor.
fn cholesky_solve_in_place(l: &DMatrix<f64>, x: &mut DVector<f64>) {
    let n = l.nrows();
    let s = l.as_slice();
    for j in 0..n {
        let xj = x[j] / s[j * n + j];
        x[j] = xj;
        let col = &s[j * n + j + 1..j * n + n];
        for (i, &lij) in col.iter().enumerate() {
            x[j + 1 + i] -= lij * xj;
        }
    }
    for j in (0..n).rev() {
        let col = &s[j * n + j + 1..j * n + n];
        let mut acc = x[j];
        for (i, &lij) in col.iter().enumerate() {
            acc -= lij * x[j + 1 + i];
        }
        x[j] = acc / s[j * n + j];
    }
}
