//! Empirical maximum discrepancy of the seminorm ball: the LP that maximizes
//! the half-sample mean gap over values a budget-L model can take at the
//! given sites, and the regularization grid derived from it.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::oracle::{solve_with, ConvexProgram, SolveOptions};
use crate::srm::VarLayout;

/// Value and maximizing witness of the discrepancy LP.
#[derive(Debug, Clone)]
pub struct DiscrepancyResult {
    pub value: f64,
    pub yhat: DVector<f64>,
    pub z: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Budget the program was solved at.
    pub l: f64,
    /// Row dropped to make the sample count even, if any.
    pub dropped: Option<usize>,
}

pub fn discrepancy(x: &DMatrix<f64>, l: f64, split: Option<&[usize]>) -> Result<DiscrepancyResult> {
    discrepancy_with(x, l, split, &SolveOptions { tol: 1e-10, ..Default::default() })
}

/// Maximize `(2/n) (sum_{first half} yhat_i - sum_{second half} yhat_i)`
/// subject to the pairwise interpolation constraints and
/// `||a_i||_1 + ||b_i||_1 <= l`.
///
/// The halves follow the supplied order unless `split` gives an explicit
/// permutation (its first n/2 entries form the positive half). Odd sample
/// counts drop the final row, which is reported in the result.
///
/// Rows with identical predictors are forced by the constraints to share
/// their value, so they are merged into one weighted site before solving;
/// this also keeps the program strictly feasible.
pub fn discrepancy_with(
    x: &DMatrix<f64>,
    l: f64,
    split: Option<&[usize]>,
    opts: &SolveOptions,
) -> Result<DiscrepancyResult> {
    if x.nrows() < 2 {
        return Err(Error::TooFewSamples { need: 2, got: x.nrows() });
    }
    if !l.is_finite() || l < 0.0 {
        return Err(Error::InvalidConfig("budget L must be nonnegative".into()));
    }

    let (x, dropped) = if x.nrows() % 2 == 1 {
        (x.rows(0, x.nrows() - 1).into_owned(), Some(x.nrows() - 1))
    } else {
        (x.clone(), None)
    };
    let n = x.nrows();
    let d = x.ncols();

    let order: Vec<usize> = match split {
        None => (0..n).collect(),
        Some(p) => {
            let mut seen = vec![false; n];
            if p.len() != n || p.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
                return Err(Error::InvalidConfig(format!(
                    "split must be a permutation of 0..{n}"
                )));
            }
            p.to_vec()
        }
    };

    // +2/n weight for the first half, -2/n for the second.
    let mut weight = vec![0.0f64; n];
    for (pos, &idx) in order.iter().enumerate() {
        weight[idx] = if pos < n / 2 { 2.0 } else { -2.0 } / n as f64;
    }

    // merge exact-duplicate predictor rows, summing their weights
    let mut uniq: Vec<usize> = Vec::new();
    let mut site_of = vec![0usize; n];
    for (i, site) in site_of.iter_mut().enumerate() {
        match uniq.iter().position(|&u| x.row(u) == x.row(i)) {
            Some(pos) => *site = pos,
            None => {
                *site = uniq.len();
                uniq.push(i);
            }
        }
    }
    let m = uniq.len();
    let mut site_weight = vec![0.0f64; m];
    for i in 0..n {
        site_weight[site_of[i]] += weight[i];
    }

    // Degenerate cases have no strictly feasible interior; their value is 0
    // (the zero function is the only candidate the constraints allow).
    if m == 1 || l == 0.0 {
        return Ok(DiscrepancyResult {
            value: 0.0,
            yhat: DVector::zeros(n),
            z: DVector::zeros(n),
            a: DMatrix::zeros(n, d),
            b: DMatrix::zeros(n, d),
            l,
            dropped,
        });
    }

    let xs = DMatrix::from_fn(m, d, |r, c| x[(uniq[r], c)]);
    let layout = VarLayout {
        n: m,
        d,
        num_l: 0,
        num_slacks: 0,
    };
    let mut prog = ConvexProgram::maximize(layout.total());
    for (site, &w) in site_weight.iter().enumerate() {
        prog.set_linear_term(layout.yhat(site), w);
    }
    layout.add_pair_constraints(&mut prog, &xs);
    for i in 0..m {
        let mut coefs: Vec<(usize, f64)> = Vec::with_capacity(4 * d);
        for k in 0..d {
            coefs.push((layout.a_pos(i, k), 1.0));
            coefs.push((layout.a_neg(i, k), 1.0));
            coefs.push((layout.b_pos(i, k), 1.0));
            coefs.push((layout.b_neg(i, k), 1.0));
        }
        prog.add_constraint(&coefs, l);
    }
    layout.add_split_nonnegativity(&mut prog);

    let sol = solve_with(&prog, opts)?;
    let (yhat_u, z_u, a_u, b_u) = layout.witness(&sol);

    // expand merged sites back to the original row indexing
    let yhat = DVector::from_fn(n, |i, _| yhat_u[site_of[i]]);
    let z = DVector::from_fn(n, |i, _| z_u[site_of[i]]);
    let a = DMatrix::from_fn(n, d, |i, k| a_u[(site_of[i], k)]);
    let b = DMatrix::from_fn(n, d, |i, k| b_u[(site_of[i], k)]);

    Ok(DiscrepancyResult {
        value: sol.objective,
        yhat,
        z,
        a,
        b,
        l,
        dropped,
    })
}

/// The cross-validation grid `{2^{-j} * m_scale * Dhat : j = -8..=1}` over
/// the unit-budget discrepancy `Dhat`, in descending order. The default
/// solve tolerance gives the grid far more digits than the power-of-two
/// spacing can use.
pub fn lambda_grid(data: &Dataset, m_scale: f64) -> Result<Vec<f64>> {
    lambda_grid_with(data, m_scale, &SolveOptions { tol: 1e-6, ..Default::default() })
}

pub fn lambda_grid_with(data: &Dataset, m_scale: f64, opts: &SolveOptions) -> Result<Vec<f64>> {
    let dhat = discrepancy_with(data.x(), 1.0, None, opts)?.value;
    Ok((-8..=1).map(|j| 2.0f64.powi(-j) * m_scale * dhat).collect())
}

/// The theory-prescribed weight `24 M * Dhat`.
pub fn theoretical_lambda(m_bound: f64, dhat: f64) -> f64 {
    24.0 * m_bound * dhat
}

/// A seeded random permutation for use as an explicit half-sample split.
pub fn seeded_split(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_value_two_points() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let r = discrepancy(&x, 1.0, None).unwrap();
        assert_relative_eq!(r.value, 2.0, epsilon = 1e-6);
        assert!(r.dropped.is_none());
    }

    #[test]
    fn identical_points_give_zero() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let r = discrepancy(&x, 1.0, None).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn zero_budget_gives_zero() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert_eq!(discrepancy(&x, 0.0, None).unwrap().value, 0.0);
        assert!(discrepancy(&x, -1.0, None).is_err());
    }

    #[test]
    fn value_scales_linearly_in_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let x = DMatrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
        let base = discrepancy(&x, 1.0, None).unwrap().value;
        for l in [0.5, 2.0, 10.0] {
            let v = discrepancy(&x, l, None).unwrap().value;
            assert!(
                (v - l * base).abs() <= 1e-8 * (1.0 + (l * base).abs()),
                "L={l}: {v} vs {}",
                l * base
            );
        }
    }

    #[test]
    fn translation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let x = DMatrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
        let shifted = DMatrix::from_fn(6, 2, |r, c| x[(r, c)] + if c == 0 { 3.5 } else { -1.25 });
        let v0 = discrepancy(&x, 1.0, None).unwrap().value;
        let v1 = discrepancy(&shifted, 1.0, None).unwrap().value;
        assert!((v0 - v1).abs() <= 1e-8 * (1.0 + v0.abs()), "{v0} vs {v1}");
    }

    #[test]
    fn swap_halves_leaves_value_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let n = 6;
        let x = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-2.0..2.0));
        let v0 = discrepancy(&x, 1.0, None).unwrap().value;
        let swapped: Vec<usize> = (n / 2..n).chain(0..n / 2).collect();
        let v1 = discrepancy(&x, 1.0, Some(&swapped)).unwrap().value;
        assert!((v0 - v1).abs() <= 1e-8 * (1.0 + v0.abs()), "{v0} vs {v1}");
        assert!(v0 >= 0.0);
    }

    #[test]
    fn odd_sample_drops_last_row() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 9.0]);
        let r = discrepancy(&x, 1.0, None).unwrap();
        assert_eq!(r.dropped, Some(2));
        assert_relative_eq!(r.value, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn witness_satisfies_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let n = 4;
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
        let r = discrepancy(&x, 1.5, None).unwrap();
        let tol = 1e-7;
        for i in 0..n {
            let norm: f64 = (0..2).map(|k| r.a[(i, k)].abs() + r.b[(i, k)].abs()).sum();
            assert!(norm <= 1.5 + tol);
            for j in 0..n {
                let diff = x.row(i) - x.row(j);
                let da: f64 = (0..2).map(|k| r.a[(j, k)] * diff[k]).sum();
                let db: f64 = (0..2).map(|k| r.b[(j, k)] * diff[k]).sum();
                assert!(r.yhat[i] - r.yhat[j] + r.z[i] - r.z[j] >= da - tol);
                assert!(r.z[i] - r.z[j] >= db - tol);
            }
        }
    }

    #[test]
    fn grid_from_unit_discrepancy() {
        // Dhat = 2 for x = {0, 1}: grid runs 512 down to 1.
        let data = Dataset::from_rows(&[vec![0.0], vec![1.0]], &[0.0, 0.0]).unwrap();
        let opts = SolveOptions { tol: 1e-10, ..Default::default() };
        let grid = lambda_grid_with(&data, 1.0, &opts).unwrap();
        assert_eq!(grid.len(), 10);
        assert_relative_eq!(grid[0], 512.0, epsilon = 1e-5);
        assert_relative_eq!(grid[9], 1.0, epsilon = 1e-8);
        for w in grid.windows(2) {
            assert_relative_eq!(w[0] / w[1], 2.0, epsilon = 1e-9);
        }

        let zeros = lambda_grid(&data, 0.0).unwrap();
        assert!(zeros.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn theoretical_lambda_formula() {
        assert_eq!(theoretical_lambda(1.0, 2.0), 48.0);
        assert_eq!(theoretical_lambda(1.0 / 12.0, 2.0), 4.0);
    }
}
