//! Parallel ADMM fitter for the regularized piecewise-linear DC program.
//!
//! The equality reformulation splits the pairwise interpolation inequalities
//! with slacks `s, t >= 0`, ties the slope matrices to copies `p, q` under a
//! component-wise budget `|p_{i,d}| + |q_{i,d}| + u_{i,d} = L_d`, and runs a
//! Gauss-Seidel sweep of closed-form block updates followed by scaled dual
//! ascent. Every slack/copy update is a clamp or soft-threshold, so one
//! iteration is O(n^2 d) with no inner solves.
//!
//! Loss variants share the sweep and differ only in the yhat block:
//!
//! - squared: the joint (yhat, z) solve is exact because the block optimum
//!   satisfies sum(yhat) = sum(y), which is what lets the update couple
//!   through the observed responses;
//! - absolute / hinge: no such identity, so the coupling uses the current
//!   fitted values and the yhat block becomes the loss prox against the same
//!   rho-weighted quadratic (weight n*rho, hence prox parameter 1/(n*rho)),
//!   followed by re-centering z (the program only sees z differences).

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::dataset::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::model::{build_from_witness, FitMeta, PldcModel};

type PrevBlocks = (DVector<f64>, DVector<f64>, DMatrix<f64>, DMatrix<f64>, DVector<f64>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Squared,
    Absolute,
    Hinge,
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Squared => "squared",
            LossKind::Absolute => "absolute",
            LossKind::Hinge => "hinge",
        }
    }
}

/// Which responses the yhat-update couples through; see the module docs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    ObservedResponses,
    FittedValues,
}

impl Coupling {
    pub fn name(&self) -> &'static str {
        match self {
            Coupling::ObservedResponses => "observed",
            Coupling::FittedValues => "fitted",
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub lambda: f64,
    pub rho: f64,
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub loss: LossKind,
    /// Standardize predictors before fitting and store the transform in the
    /// model (conditioning of the slope updates depends on feature scale).
    pub standardize: bool,
    /// Record the augmented Lagrangian per iteration in the report.
    pub record_trace: bool,
}

impl FitConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            rho: 0.01,
            max_iters: 20_000,
            tol_primal: 1e-6,
            tol_dual: 1e-6,
            loss: LossKind::Squared,
            standardize: true,
            record_trace: false,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if n < 2 {
            return Err(Error::TooFewSamples { need: 2, got: n });
        }
        if !self.rho.is_finite() || self.rho <= 0.0 {
            return Err(Error::InvalidConfig("rho must be positive".into()));
        }
        if self.lambda < 0.0 {
            return Err(Error::InvalidConfig("lambda must be nonnegative".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if self.tol_primal.is_nan() || self.tol_primal <= 0.0 || self.tol_dual.is_nan() || self.tol_dual <= 0.0 {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Final loss + lambda * sum_d L_d.
    pub objective: f64,
    pub training_loss: f64,
    pub l_sum: f64,
    pub loss: LossKind,
    pub lambda: f64,
    pub rho: f64,
    pub coupling: Coupling,
    /// Smallest entry of the clamped blocks (s, t, u) after the last sweep.
    pub min_slack: f64,
    /// max_{i,d} |p_{i,d}| + |q_{i,d}| + u_{i,d} - L_d after the last sweep.
    pub norm_gap: f64,
    /// Augmented Lagrangian per iteration (empty unless requested).
    pub trace: Vec<f64>,
}

/// Full variable roster of the ADMM sweep. Matrices indexed `(i, j)` over
/// sample pairs or `(i, d)` over sample/coordinate.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub yhat: DVector<f64>,
    pub z: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub alpha: DMatrix<f64>,
    pub beta: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub eta: DMatrix<f64>,
    pub zeta: DMatrix<f64>,
    pub l: DVector<f64>,
    /// Inverses of `sum_j (x_i - x_j)(x_i - x_j)' + I`, one per sample;
    /// symmetric positive definite by the identity shift.
    pub lambda_mats: Vec<DMatrix<f64>>,
    pub rho: f64,
    pub lambda: f64,

    // previous iterate of the reported blocks, for the dual residual
    prev: Option<PrevBlocks>,
    // residuals tracked during the last sweep
    last_primal: f64,
    last_dual: f64,
    // scratch reused across sweeps
    dots_a: DMatrix<f64>, // <a_i, x_j>
    dots_b: DMatrix<f64>,
    xt: DMatrix<f64>,
    c_mat: DMatrix<f64>,
    cx: DMatrix<f64>,
}

impl AdmmState {
    pub fn new(data: &Dataset, rho: f64, lambda: f64) -> Result<Self> {
        let (n, d) = (data.n(), data.dim());
        if n < 2 {
            return Err(Error::TooFewSamples { need: 2, got: n });
        }
        let x = data.x();

        // Lambda_i = (n x_i x_i' - x_i xs' - xs x_i' + sum_j x_j x_j' + I)^-1
        let xs = x.row_sum().transpose(); // sum of rows, d-vector
        let mut gram = DMatrix::zeros(d, d);
        for i in 0..n {
            let xi = x.row(i).transpose();
            gram += &xi * xi.transpose();
        }
        let mut lambda_mats = Vec::with_capacity(n);
        for i in 0..n {
            let xi = x.row(i).transpose();
            let mut m = &xi * xi.transpose() * (n as f64);
            m -= &xi * xs.transpose();
            m -= &xs * xi.transpose();
            m += &gram;
            for k in 0..d {
                m[(k, k)] += 1.0;
            }
            let inv = Cholesky::new(m)
                .ok_or_else(|| Error::NumericalFailure("slope normal matrix not SPD".into()))?
                .inverse();
            lambda_mats.push(inv);
        }

        Ok(Self {
            yhat: DVector::zeros(n),
            z: DVector::zeros(n),
            a: DMatrix::zeros(n, d),
            b: DMatrix::zeros(n, d),
            p: DMatrix::zeros(n, d),
            q: DMatrix::zeros(n, d),
            u: DMatrix::zeros(n, d),
            s: DMatrix::zeros(n, n),
            t: DMatrix::zeros(n, n),
            alpha: DMatrix::zeros(n, n),
            beta: DMatrix::zeros(n, n),
            gamma: DMatrix::zeros(n, d),
            eta: DMatrix::zeros(n, d),
            zeta: DMatrix::zeros(n, d),
            l: DVector::zeros(d),
            lambda_mats,
            rho,
            lambda,
            prev: None,
            last_primal: f64::INFINITY,
            last_dual: f64::INFINITY,
            dots_a: DMatrix::zeros(n, n),
            dots_b: DMatrix::zeros(n, n),
            xt: x.transpose(),
            c_mat: DMatrix::zeros(n, n),
            cx: DMatrix::zeros(n, d),
        })
    }

    /// State whose variables reproduce a witness tuple, with slacks and
    /// copies chosen to zero the equality constraints wherever the witness
    /// satisfies the pairwise inequalities.
    pub fn from_witness(
        data: &Dataset,
        rho: f64,
        lambda: f64,
        yhat: &DVector<f64>,
        z: &DVector<f64>,
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
    ) -> Result<Self> {
        let mut st = Self::new(data, rho, lambda)?;
        let (n, d) = (data.n(), data.dim());
        st.yhat.copy_from(yhat);
        st.z.copy_from(z);
        st.a.copy_from(a);
        st.b.copy_from(b);
        st.p.copy_from(a);
        st.q.copy_from(b);
        st.refresh_dots();
        for i in 0..n {
            for j in 0..n {
                let da = st.dots_a[(i, i)] - st.dots_a[(i, j)];
                let db = st.dots_b[(i, i)] - st.dots_b[(i, j)];
                st.s[(i, j)] = (da - (yhat[i] - yhat[j] + z[i] - z[j])).max(0.0);
                st.t[(i, j)] = (db - (z[i] - z[j])).max(0.0);
            }
        }
        for k in 0..d {
            let mut lk = 0.0f64;
            for i in 0..n {
                lk = lk.max(a[(i, k)].abs() + b[(i, k)].abs());
            }
            st.l[k] = lk;
            for i in 0..n {
                st.u[(i, k)] = lk - a[(i, k)].abs() - b[(i, k)].abs();
            }
        }
        Ok(st)
    }

    fn refresh_dots(&mut self) {
        self.dots_a.gemm(1.0, &self.a, &self.xt, 0.0);
        self.dots_b.gemm(1.0, &self.b, &self.xt, 0.0);
    }

    /// Run one update sweep. `data` must be the dataset the state was built
    /// from.
    pub fn step(&mut self, data: &Dataset, loss: LossKind) {
        self.sweep(data, loss);
    }

    /// One full sweep in the printed block order; each block reads the most
    /// recent values of the others. Passes run column-contiguous over the
    /// pairwise matrices, and the slope systems assemble their right-hand
    /// sides through one n-by-n times n-by-d product each.
    fn sweep(&mut self, data: &Dataset, loss: LossKind) {
        let (n, d) = (data.n(), data.dim());
        let nf = n as f64;
        let (rho, lambda) = (self.rho, self.lambda);
        let x = data.x();
        let y = data.y();

        match &mut self.prev {
            Some((py, pz, pa, pb, pl)) => {
                py.copy_from(&self.yhat);
                pz.copy_from(&self.z);
                pa.copy_from(&self.a);
                pb.copy_from(&self.b);
                pl.copy_from(&self.l);
            }
            None => {
                self.prev = Some((
                    self.yhat.clone(),
                    self.z.clone(),
                    self.a.clone(),
                    self.b.clone(),
                    self.l.clone(),
                ));
            }
        }

        self.refresh_dots();

        // A_i and B_i collect the dual/slack pressure on (yhat_i, z_i):
        // column sums minus row sums of the dual/slack matrices plus the
        // pairwise slope terms, which reduce to row/column sums of the
        // inner-product tables.
        let coupling = match loss {
            LossKind::Squared => 2.0 * y.sum(),
            _ => 2.0 * self.yhat.sum(),
        };
        let mut big_a = vec![coupling; n];
        let mut big_b = vec![0.0f64; n];
        {
            let alpha = self.alpha.as_slice();
            let s = self.s.as_slice();
            let beta = self.beta.as_slice();
            let t = self.t.as_slice();
            let da = self.dots_a.as_slice();
            let db = self.dots_b.as_slice();
            let mut diag_sum_a = 0.0;
            let mut diag_sum_b = 0.0;
            for j in 0..n {
                diag_sum_a += da[j * n + j];
                diag_sum_b += db[j * n + j];
            }
            for j in 0..n {
                let col = j * n;
                let mut col_sum_a = 0.0;
                let mut col_sum_dots_a = 0.0;
                let mut col_sum_b = 0.0;
                let mut col_sum_dots_b = 0.0;
                for i in 0..n {
                    let va = alpha[col + i] + s[col + i];
                    let vb = beta[col + i] + t[col + i];
                    // subtract the row sums as they stream by
                    big_a[i] -= va + da[col + i];
                    big_b[i] -= vb + db[col + i];
                    col_sum_a += va;
                    col_sum_dots_a += da[col + i];
                    col_sum_b += vb;
                    col_sum_dots_b += db[col + i];
                }
                big_a[j] += col_sum_a + col_sum_dots_a;
                big_b[j] += col_sum_b + col_sum_dots_b;
            }
            for i in 0..n {
                big_a[i] += nf * da[i * n + i] - diag_sum_a;
                big_b[i] += nf * db[i * n + i] - diag_sum_b;
            }
        }

        // yhat and z blocks
        match loss {
            LossKind::Squared => {
                let den = 2.0 + nf * rho;
                for i in 0..n {
                    self.yhat[i] =
                        2.0 / den * y[i] + rho / (2.0 * den) * big_a[i] - rho / (2.0 * den) * big_b[i];
                    self.z[i] = -1.0 / den * y[i]
                        + 1.0 / (2.0 * nf * den) * big_a[i]
                        + (1.0 + nf * rho) / (2.0 * nf * den) * big_b[i];
                }
            }
            LossKind::Absolute | LossKind::Hinge => {
                let sigma = 1.0 / (nf * rho);
                for i in 0..n {
                    let w = (big_a[i] - big_b[i]) / (2.0 * nf);
                    self.yhat[i] = match loss {
                        LossKind::Absolute => prox_absolute(y[i], w, sigma),
                        LossKind::Hinge => prox_hinge(y[i], w, sigma),
                        LossKind::Squared => unreachable!(),
                    };
                    self.z[i] = (big_a[i] + big_b[i]) / (4.0 * nf) - self.yhat[i] / 2.0;
                }
                // z is a gauge direction: only differences enter anywhere
                let zm = self.z.sum() / nf;
                for i in 0..n {
                    self.z[i] -= zm;
                }
            }
        }

        // slope blocks: C[(i,j)] holds the dual-plus-slack coefficient of
        // (x_i - x_j); the right-hand side needs rowsum(C) x_i - (C X)_i.
        let mut v = vec![0.0f64; d];
        let mut crow = vec![0.0f64; n];
        for pass in 0..2 {
            crow.fill(0.0);
            {
                let (dual, slack) = if pass == 0 {
                    (self.alpha.as_slice(), self.s.as_slice())
                } else {
                    (self.beta.as_slice(), self.t.as_slice())
                };
                let c = self.c_mat.as_mut_slice();
                for j in 0..n {
                    let col = j * n;
                    let offset_j = if pass == 0 {
                        self.yhat[j] + self.z[j]
                    } else {
                        self.z[j]
                    };
                    for i in 0..n {
                        let offset_i = if pass == 0 {
                            self.yhat[i] + self.z[i]
                        } else {
                            self.z[i]
                        };
                        let cij = dual[col + i] + slack[col + i] + offset_i - offset_j;
                        c[col + i] = cij;
                        crow[i] += cij;
                    }
                }
            }
            self.cx.gemm(1.0, &self.c_mat, x, 0.0);
            let (copy, dual_copy, target) = if pass == 0 {
                (&self.p, &self.eta, &mut self.a)
            } else {
                (&self.q, &self.zeta, &mut self.b)
            };
            for i in 0..n {
                for (k, vk) in v.iter_mut().enumerate() {
                    *vk = copy[(i, k)] - dual_copy[(i, k)] + crow[i] * x[(i, k)] - self.cx[(i, k)];
                }
                let lam = &self.lambda_mats[i];
                for k in 0..d {
                    let mut acc = 0.0;
                    for (l, vl) in v.iter().enumerate() {
                        acc += lam[(k, l)] * vl;
                    }
                    target[(i, k)] = acc;
                }
            }
        }
        self.refresh_dots();

        // budget blocks
        for k in 0..d {
            let mut acc = -lambda / rho;
            for i in 0..n {
                acc += self.gamma[(i, k)]
                    + self.p[(i, k)].abs()
                    + self.q[(i, k)].abs()
                    + self.u[(i, k)];
            }
            self.l[k] = acc / nf;
        }
        for k in 0..d {
            let lk = self.l[k];
            for i in 0..n {
                let e = self.eta[(i, k)] + self.a[(i, k)];
                let room = lk - self.u[(i, k)] - self.q[(i, k)].abs() - self.gamma[(i, k)];
                self.p[(i, k)] = 0.5 * sign(e) * (e.abs() + room).max(0.0);
            }
        }
        for k in 0..d {
            let lk = self.l[k];
            for i in 0..n {
                let e = self.zeta[(i, k)] + self.b[(i, k)];
                let room = lk - self.u[(i, k)] - self.p[(i, k)].abs() - self.gamma[(i, k)];
                self.q[(i, k)] = 0.5 * sign(e) * (e.abs() + room).max(0.0);
            }
        }
        for k in 0..d {
            let lk = self.l[k];
            for i in 0..n {
                self.u[(i, k)] =
                    (lk - self.gamma[(i, k)] - self.p[(i, k)].abs() - self.q[(i, k)].abs())
                        .max(0.0);
            }
        }

        // pairwise slacks, dual ascent, and primal-residual tracking in one
        // column-ordered pass: the dual increments are exactly the residuals
        // of the two pairwise constraint families.
        let mut primal = 0.0f64;
        {
            let da = self.dots_a.as_slice();
            let db = self.dots_b.as_slice();
            let s = self.s.as_mut_slice();
            let t = self.t.as_mut_slice();
            let alpha = self.alpha.as_mut_slice();
            let beta = self.beta.as_mut_slice();
            for j in 0..n {
                let col = j * n;
                let oj = self.yhat[j] + self.z[j];
                let zj = self.z[j];
                for i in 0..n {
                    let base_a = self.yhat[i] + self.z[i] - oj - (da[i * n + i] - da[col + i]);
                    let si = (-alpha[col + i] - base_a).max(0.0);
                    s[col + i] = si;
                    let r1 = si + base_a;
                    alpha[col + i] += r1;
                    primal = primal.max(r1.abs());

                    let base_b = self.z[i] - zj - (db[i * n + i] - db[col + i]);
                    let ti = (-beta[col + i] - base_b).max(0.0);
                    t[col + i] = ti;
                    let r2 = ti + base_b;
                    beta[col + i] += r2;
                    primal = primal.max(r2.abs());
                }
            }
        }
        for k in 0..d {
            let lk = self.l[k];
            for i in 0..n {
                let r3 = self.u[(i, k)] + self.p[(i, k)].abs() + self.q[(i, k)].abs() - lk;
                let r4 = self.a[(i, k)] - self.p[(i, k)];
                let r5 = self.b[(i, k)] - self.q[(i, k)];
                self.gamma[(i, k)] += r3;
                self.eta[(i, k)] += r4;
                self.zeta[(i, k)] += r5;
                primal = primal.max(r3.abs()).max(r4.abs()).max(r5.abs());
            }
        }
        self.last_primal = primal;

        let mut dual = 0.0f64;
        if let Some((py, pz, pa, pb, pl)) = &self.prev {
            for i in 0..n {
                dual = dual.max((self.yhat[i] - py[i]).abs());
                dual = dual.max((self.z[i] - pz[i]).abs());
            }
            for i in 0..n {
                for k in 0..d {
                    dual = dual.max((self.a[(i, k)] - pa[(i, k)]).abs());
                    dual = dual.max((self.b[(i, k)] - pb[(i, k)]).abs());
                }
            }
            for k in 0..d {
                dual = dual.max((self.l[k] - pl[k]).abs());
            }
        }
        self.last_dual = dual;
    }

    fn training_loss(&self, y: &DVector<f64>, loss: LossKind) -> f64 {
        match loss {
            LossKind::Squared => (0..y.len()).map(|i| (self.yhat[i] - y[i]).powi(2)).sum(),
            LossKind::Absolute => (0..y.len()).map(|i| (self.yhat[i] - y[i]).abs()).sum(),
            LossKind::Hinge => (0..y.len())
                .map(|i| (1.0 - y[i] * self.yhat[i]).max(0.0))
                .sum(),
        }
    }

    fn objective(&self, y: &DVector<f64>, loss: LossKind) -> f64 {
        self.training_loss(y, loss) + self.lambda * self.l.sum()
    }

    /// Augmented Lagrangian in scaled-dual form.
    fn augmented_lagrangian(&self, y: &DVector<f64>, loss: LossKind) -> f64 {
        let n = y.len();
        let d = self.l.len();
        let mut al = self.objective(y, loss);
        let half_rho = 0.5 * self.rho;
        for i in 0..n {
            for j in 0..n {
                let r1 = self.s[(i, j)] + self.yhat[i] - self.yhat[j] + self.z[i] - self.z[j]
                    - (self.dots_a[(i, i)] - self.dots_a[(i, j)]);
                let r2 = self.t[(i, j)] + self.z[i] - self.z[j]
                    - (self.dots_b[(i, i)] - self.dots_b[(i, j)]);
                al += half_rho
                    * ((r1 + self.alpha[(i, j)]).powi(2) - self.alpha[(i, j)].powi(2)
                        + (r2 + self.beta[(i, j)]).powi(2)
                        - self.beta[(i, j)].powi(2));
            }
        }
        for i in 0..n {
            for k in 0..d {
                let r3 = self.u[(i, k)] + self.p[(i, k)].abs() + self.q[(i, k)].abs() - self.l[k];
                let r4 = self.a[(i, k)] - self.p[(i, k)];
                let r5 = self.b[(i, k)] - self.q[(i, k)];
                al += half_rho
                    * ((r3 + self.gamma[(i, k)]).powi(2) - self.gamma[(i, k)].powi(2)
                        + (r4 + self.eta[(i, k)]).powi(2)
                        - self.eta[(i, k)].powi(2)
                        + (r5 + self.zeta[(i, k)]).powi(2)
                        - self.zeta[(i, k)].powi(2));
            }
        }
        al
    }

    /// Smallest entry over the clamped blocks s, t, u.
    pub fn min_slack(&self) -> f64 {
        let ms = self.s.iter().chain(self.t.iter()).chain(self.u.iter());
        ms.fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// `max_{i,d} |p| + |q| + u - L_d` (signed).
    pub fn norm_gap(&self) -> f64 {
        let (n, d) = self.p.shape();
        let mut g = f64::NEG_INFINITY;
        for i in 0..n {
            for k in 0..d {
                g = g.max(
                    self.p[(i, k)].abs() + self.q[(i, k)].abs() + self.u[(i, k)] - self.l[k],
                );
            }
        }
        g
    }

    fn is_finite(&self) -> bool {
        self.yhat.iter().all(|v| v.is_finite())
            && self.l.iter().all(|v| v.is_finite())
            && self.a.iter().all(|v| v.is_finite())
    }
}

/// Max violation of the equality reformulation (primal) and the largest
/// change of (yhat, z, a, b, L) since the previous sweep (dual, infinity
/// norm). The dual residual is infinite before the first sweep.
pub fn residuals(state: &AdmmState, data: &Dataset) -> (f64, f64) {
    let (n, d) = (data.n(), data.dim());
    let x = data.x();
    let mut primal = 0.0f64;
    for i in 0..n {
        let xi = x.row(i);
        for j in 0..n {
            let mut da = 0.0;
            let mut db = 0.0;
            for k in 0..d {
                let dx = xi[k] - x[(j, k)];
                da += state.a[(i, k)] * dx;
                db += state.b[(i, k)] * dx;
            }
            let r1 = state.s[(i, j)] + state.yhat[i] - state.yhat[j] + state.z[i] - state.z[j] - da;
            let r2 = state.t[(i, j)] + state.z[i] - state.z[j] - db;
            primal = primal.max(r1.abs()).max(r2.abs());
        }
    }
    for i in 0..n {
        for k in 0..d {
            let r3 =
                state.u[(i, k)] + state.p[(i, k)].abs() + state.q[(i, k)].abs() - state.l[k];
            let r4 = state.a[(i, k)] - state.p[(i, k)];
            let r5 = state.b[(i, k)] - state.q[(i, k)];
            primal = primal.max(r3.abs()).max(r4.abs()).max(r5.abs());
        }
    }

    let dual = match &state.prev {
        None => f64::INFINITY,
        Some((py, pz, pa, pb, pl)) => {
            let mut m = 0.0f64;
            for i in 0..n {
                m = m.max((state.yhat[i] - py[i]).abs());
                m = m.max((state.z[i] - pz[i]).abs());
            }
            for i in 0..n {
                for k in 0..d {
                    m = m.max((state.a[(i, k)] - pa[(i, k)]).abs());
                    m = m.max((state.b[(i, k)] - pb[(i, k)]).abs());
                }
            }
            for k in 0..d {
                m = m.max((state.l[k] - pl[k]).abs());
            }
            m
        }
    };
    (primal, dual)
}

#[inline]
fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Prox of `|v - y|` against `(1/(2 sigma)) (v - w)^2`: soft-threshold of
/// `w` toward `y` by `sigma`.
pub(crate) fn prox_absolute(y: f64, w: f64, sigma: f64) -> f64 {
    if w - y > sigma {
        w - sigma
    } else if w - y < -sigma {
        w + sigma
    } else {
        y
    }
}

/// Prox of `max(1 - y v, 0)` for labels y in {-1, +1}.
pub(crate) fn prox_hinge(y: f64, w: f64, sigma: f64) -> f64 {
    let margin = y * w;
    if margin >= 1.0 {
        w
    } else if margin <= 1.0 - sigma {
        w + sigma * y
    } else {
        y
    }
}

/// Fit with the loss named in `config`.
pub fn fit(data: &Dataset, config: &FitConfig) -> Result<(PldcModel, FitReport)> {
    config.validate(data.n())?;
    if config.loss == LossKind::Hinge {
        if let Some(bad) = data.y().iter().find(|v| v.abs() != 1.0) {
            return Err(Error::InvalidLabel(*bad));
        }
    }

    let (work, standardizer): (Dataset, Option<Standardizer>) = if config.standardize {
        let (ds, s) = data.standardized();
        (ds, Some(s))
    } else {
        (data.clone(), None)
    };

    let mut state = AdmmState::new(&work, config.rho, config.lambda)?;
    let y = work.y();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);

    for it in 1..=config.max_iters {
        state.sweep(&work, config.loss);
        iterations = it;
        if !state.is_finite() {
            return Err(Error::NonFinite(it));
        }
        if config.record_trace {
            trace.push(state.augmented_lagrangian(y, config.loss));
        }
        primal = state.last_primal;
        dual = state.last_dual;
        if primal <= config.tol_primal && dual <= config.tol_dual {
            converged = true;
            break;
        }
    }

    let report = FitReport {
        iterations,
        converged,
        primal_residual: primal,
        dual_residual: dual,
        objective: state.objective(y, config.loss),
        training_loss: state.training_loss(y, config.loss),
        l_sum: state.l.sum(),
        loss: config.loss,
        lambda: config.lambda,
        rho: config.rho,
        coupling: match config.loss {
            LossKind::Squared => Coupling::ObservedResponses,
            _ => Coupling::FittedValues,
        },
        min_slack: state.min_slack(),
        norm_gap: state.norm_gap(),
        trace,
    };

    let model = build_from_witness(work.x(), &state.yhat, &state.z, &state.a, &state.b)?
        .with_standardizer(standardizer)
        .with_meta(FitMeta {
            lambda: config.lambda,
            rho: config.rho,
            loss: config.loss.name().to_string(),
            iterations: report.iterations,
            primal_residual: report.primal_residual,
            dual_residual: report.dual_residual,
            objective: report.objective,
            coupling: report.coupling.name().to_string(),
        });
    Ok((model, report))
}

/// Fit with the absolute (L1) empirical loss.
pub fn fit_absolute(data: &Dataset, config: &FitConfig) -> Result<(PldcModel, FitReport)> {
    fit(
        data,
        &FitConfig {
            loss: LossKind::Absolute,
            ..config.clone()
        },
    )
}

/// Fit a binary classifier with the hinge loss; labels must be -1 or +1.
/// The decision rule is the sign of the fitted function.
pub fn fit_hinge_binary(data: &Dataset, config: &FitConfig) -> Result<(PldcModel, FitReport)> {
    fit(
        data,
        &FitConfig {
            loss: LossKind::Hinge,
            ..config.clone()
        },
    )
}
