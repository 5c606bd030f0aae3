//! Builder for the regularized fitting program in oracle (LP/QP) form.
//!
//! Decision variables, in order: `yhat (n)`, `z (n)`, `a+ (n*d)`, `a- (n*d)`,
//! `b+ (n*d)`, `b- (n*d)`, the budget `L` (one variable, or `d` of them in
//! component-wise mode), then one loss slack per sample for the absolute and
//! hinge losses. The l1 budget rows use the positive/negative split, so the
//! whole program is linear except for the squared-loss quadratic.

use nalgebra::{DMatrix, DVector};

use crate::admm::LossKind;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::oracle::{ConvexProgram, Solution};

/// Scalar budget (`||a_i||_1 + ||b_i||_1 <= L`) or one budget per coordinate
/// (`|a_{i,d}| + |b_{i,d}| <= L_d`), matching the ADMM path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LMode {
    Scalar,
    PerCoordinate,
}

/// Variable layout shared by the fitting and discrepancy programs.
#[derive(Debug, Clone)]
pub(crate) struct VarLayout {
    pub n: usize,
    pub d: usize,
    pub num_l: usize,
    pub num_slacks: usize,
}

impl VarLayout {
    pub fn yhat(&self, i: usize) -> usize {
        i
    }
    pub fn z(&self, i: usize) -> usize {
        self.n + i
    }
    pub fn a_pos(&self, i: usize, k: usize) -> usize {
        2 * self.n + i * self.d + k
    }
    pub fn a_neg(&self, i: usize, k: usize) -> usize {
        2 * self.n + self.n * self.d + i * self.d + k
    }
    pub fn b_pos(&self, i: usize, k: usize) -> usize {
        2 * self.n + 2 * self.n * self.d + i * self.d + k
    }
    pub fn b_neg(&self, i: usize, k: usize) -> usize {
        2 * self.n + 3 * self.n * self.d + i * self.d + k
    }
    pub fn l(&self, k: usize) -> usize {
        debug_assert!(k < self.num_l);
        2 * self.n + 4 * self.n * self.d + k
    }
    pub fn slack(&self, i: usize) -> usize {
        2 * self.n + 4 * self.n * self.d + self.num_l + i
    }
    pub fn total(&self) -> usize {
        2 * self.n + 4 * self.n * self.d + self.num_l + self.num_slacks
    }

    /// Pairwise families (i) and (ii) over all ordered pairs i != j:
    /// `<a_j, x_i - x_j> - yhat_i + yhat_j - z_i + z_j <= 0` and the same for
    /// `b` without the yhat terms.
    pub fn add_pair_constraints(&self, prog: &mut ConvexProgram, x: &DMatrix<f64>) {
        let (n, d) = (self.n, self.d);
        let mut coefs: Vec<(usize, f64)> = Vec::with_capacity(4 + 2 * d);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                coefs.clear();
                coefs.push((self.yhat(i), -1.0));
                coefs.push((self.yhat(j), 1.0));
                coefs.push((self.z(i), -1.0));
                coefs.push((self.z(j), 1.0));
                for k in 0..d {
                    let dx = x[(i, k)] - x[(j, k)];
                    coefs.push((self.a_pos(j, k), dx));
                    coefs.push((self.a_neg(j, k), -dx));
                }
                prog.add_constraint(&coefs, 0.0);
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                coefs.clear();
                coefs.push((self.z(i), -1.0));
                coefs.push((self.z(j), 1.0));
                for k in 0..d {
                    let dx = x[(i, k)] - x[(j, k)];
                    coefs.push((self.b_pos(j, k), dx));
                    coefs.push((self.b_neg(j, k), -dx));
                }
                prog.add_constraint(&coefs, 0.0);
            }
        }
    }

    pub fn add_split_nonnegativity(&self, prog: &mut ConvexProgram) {
        for i in 0..self.n {
            for k in 0..self.d {
                for idx in [
                    self.a_pos(i, k),
                    self.a_neg(i, k),
                    self.b_pos(i, k),
                    self.b_neg(i, k),
                ] {
                    prog.add_constraint(&[(idx, -1.0)], 0.0);
                }
            }
        }
    }

    pub fn witness(
        &self,
        sol: &Solution,
    ) -> (DVector<f64>, DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
        let w = &sol.w;
        let yhat = DVector::from_fn(self.n, |i, _| w[self.yhat(i)]);
        let z = DVector::from_fn(self.n, |i, _| w[self.z(i)]);
        let a = DMatrix::from_fn(self.n, self.d, |i, k| {
            w[self.a_pos(i, k)] - w[self.a_neg(i, k)]
        });
        let b = DMatrix::from_fn(self.n, self.d, |i, k| {
            w[self.b_pos(i, k)] - w[self.b_neg(i, k)]
        });
        (yhat, z, a, b)
    }
}

/// The assembled program plus enough layout to pull the witness back out.
#[derive(Debug, Clone)]
pub struct SrmProgram {
    pub program: ConvexProgram,
    pub(crate) layout: VarLayout,
    pub loss: LossKind,
    pub l_mode: LMode,
}

impl SrmProgram {
    pub fn witness(
        &self,
        sol: &Solution,
    ) -> (DVector<f64>, DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
        self.layout.witness(sol)
    }

    /// Sum of the budget variables (equals L itself in scalar mode).
    pub fn l_sum(&self, sol: &Solution) -> f64 {
        (0..self.layout.num_l).map(|k| sol.w[self.layout.l(k)]).sum()
    }
}

/// Assemble the fitting program for the given loss and budget mode.
pub fn build_srm_program(
    data: &Dataset,
    lambda: f64,
    loss: LossKind,
    l_mode: LMode,
) -> Result<SrmProgram> {
    let (n, d) = (data.n(), data.dim());
    if n < 2 {
        return Err(Error::TooFewSamples { need: 2, got: n });
    }
    if lambda < 0.0 {
        return Err(Error::InvalidConfig("lambda must be nonnegative".into()));
    }
    let x = data.x();
    let y = data.y();
    if loss == LossKind::Hinge {
        if let Some(bad) = y.iter().find(|v| v.abs() != 1.0) {
            return Err(Error::InvalidLabel(*bad));
        }
    }

    let layout = VarLayout {
        n,
        d,
        num_l: match l_mode {
            LMode::Scalar => 1,
            LMode::PerCoordinate => d,
        },
        num_slacks: match loss {
            LossKind::Squared => 0,
            _ => n,
        },
    };
    let mut prog = ConvexProgram::minimize(layout.total());

    match loss {
        LossKind::Squared => {
            let mut q = DMatrix::zeros(layout.total(), layout.total());
            let mut konst = 0.0;
            for i in 0..n {
                q[(layout.yhat(i), layout.yhat(i))] = 2.0;
                prog.set_linear_term(layout.yhat(i), -2.0 * y[i]);
                konst += y[i] * y[i];
            }
            prog.set_quadratic(q)?;
            prog.set_constant(konst);
        }
        LossKind::Absolute => {
            for i in 0..n {
                prog.set_linear_term(layout.slack(i), 1.0);
                // e_i >= yhat_i - y_i and e_i >= y_i - yhat_i
                prog.add_constraint(&[(layout.yhat(i), 1.0), (layout.slack(i), -1.0)], y[i]);
                prog.add_constraint(&[(layout.yhat(i), -1.0), (layout.slack(i), -1.0)], -y[i]);
            }
        }
        LossKind::Hinge => {
            for i in 0..n {
                prog.set_linear_term(layout.slack(i), 1.0);
                // e_i >= 1 - y_i yhat_i and e_i >= 0
                prog.add_constraint(&[(layout.yhat(i), -y[i]), (layout.slack(i), -1.0)], -1.0);
                prog.add_constraint(&[(layout.slack(i), -1.0)], 0.0);
            }
        }
    }
    for k in 0..layout.num_l {
        prog.set_linear_term(layout.l(k), lambda);
    }

    layout.add_pair_constraints(&mut prog, x);

    match l_mode {
        LMode::Scalar => {
            for i in 0..n {
                let mut coefs: Vec<(usize, f64)> = Vec::with_capacity(4 * d + 1);
                for k in 0..d {
                    coefs.push((layout.a_pos(i, k), 1.0));
                    coefs.push((layout.a_neg(i, k), 1.0));
                    coefs.push((layout.b_pos(i, k), 1.0));
                    coefs.push((layout.b_neg(i, k), 1.0));
                }
                coefs.push((layout.l(0), -1.0));
                prog.add_constraint(&coefs, 0.0);
            }
        }
        LMode::PerCoordinate => {
            for i in 0..n {
                for k in 0..d {
                    prog.add_constraint(
                        &[
                            (layout.a_pos(i, k), 1.0),
                            (layout.a_neg(i, k), 1.0),
                            (layout.b_pos(i, k), 1.0),
                            (layout.b_neg(i, k), 1.0),
                            (layout.l(k), -1.0),
                        ],
                        0.0,
                    );
                }
            }
        }
    }

    layout.add_split_nonnegativity(&mut prog);

    Ok(SrmProgram {
        program: prog,
        layout,
        loss,
        l_mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::solve;

    #[test]
    fn variable_count_squared_scalar() {
        for (n, d) in [(2usize, 1usize), (5, 2), (8, 3)] {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..d).map(|k| (i * d + k) as f64).collect())
                .collect();
            let y: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let data = Dataset::from_rows(&rows, &y).unwrap();
            let srm = build_srm_program(&data, 1.0, LossKind::Squared, LMode::Scalar).unwrap();
            assert_eq!(srm.program.num_vars(), 2 * n * (2 * d + 1) + 1);
        }
    }

    #[test]
    fn constraint_count_matches_families() {
        let (n, d) = (4usize, 2usize);
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let data = Dataset::from_rows(&rows, &y).unwrap();
        let srm = build_srm_program(&data, 0.5, LossKind::Squared, LMode::Scalar).unwrap();
        // 2n(n-1) pairwise rows + n budget rows + 4nd nonnegativity rows
        assert_eq!(
            srm.program.num_constraints(),
            2 * n * (n - 1) + n + 4 * n * d
        );
    }

    #[test]
    fn symmetric_two_point_fit_is_symmetric() {
        let data = Dataset::from_rows(&[vec![-1.0], vec![1.0]], &[1.0, 1.0]).unwrap();
        let srm = build_srm_program(&data, 0.3, LossKind::Squared, LMode::Scalar).unwrap();
        let sol = solve(&srm.program, 1e-9).unwrap();
        let (yhat, _, _, _) = srm.witness(&sol);
        assert!((yhat[0] - yhat[1]).abs() <= 1e-6, "{yhat}");
    }
}
