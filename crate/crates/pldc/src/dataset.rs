use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A regression/classification dataset: predictor rows `x` and responses `y`.
///
/// Construction deduplicates rows whose predictors *and* response are equal
/// and rejects rows that share predictors but disagree on the response (the
/// interpolation constructions divide by pairwise predictor distances).
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} predictor rows vs {} responses",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite value in dataset".into()));
        }

        // Exact comparison is intentional: only bitwise-identical rows are
        // merged, anything else keeps its own plane.
        let mut keep: Vec<usize> = Vec::with_capacity(x.nrows());
        for i in 0..x.nrows() {
            let mut dup = None;
            for &k in &keep {
                if x.row(i) == x.row(k) {
                    dup = Some(k);
                    break;
                }
            }
            match dup {
                Some(k) if y[i] == y[k] => {} // drop exact duplicate
                Some(k) => return Err(Error::DuplicatePredictors { i, j: k }),
                None => keep.push(i),
            }
        }

        if keep.len() == x.nrows() {
            return Ok(Self { x, y });
        }
        let xr = DMatrix::from_fn(keep.len(), x.ncols(), |r, c| x[(keep[r], c)]);
        let yr = DVector::from_fn(keep.len(), |r, _| y[keep[r]]);
        Ok(Self { x: xr, y: yr })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let d = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::ShapeMismatch(format!(
                "ragged predictor rows: {} vs {}",
                bad.len(),
                d
            )));
        }
        let x = DMatrix::from_fn(rows.len(), d, |r, c| rows[r][c]);
        Self::new(x, DVector::from_column_slice(y))
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.x.row(i).transpose()
    }

    /// Dataset restricted to the given row indices.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let x = DMatrix::from_fn(idx.len(), self.dim(), |r, c| self.x[(idx[r], c)]);
        let y = DVector::from_fn(idx.len(), |r, _| self.y[idx[r]]);
        Self::new(x, y)
    }

    /// Standardize predictors to zero mean and unit variance per feature.
    /// Returns the transformed dataset and the transform itself.
    pub fn standardized(&self) -> (Self, Standardizer) {
        let s = Standardizer::fit(&self.x);
        let xs = s.apply_matrix(&self.x);
        (
            Self {
                x: xs,
                y: self.y.clone(),
            },
            s,
        )
    }
}

/// Per-feature affine input transform `x -> (x - mean) / scale`.
///
/// Scales are strictly positive; features with (near-)zero variance keep
/// scale 1 so the transform stays invertible.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: DVector<f64>,
    pub scale: DVector<f64>,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let d = x.ncols();
        let mut mean = DVector::zeros(d);
        let mut scale = DVector::zeros(d);
        for c in 0..d {
            let col = x.column(c);
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            mean[c] = m;
            scale[c] = if var > 1e-24 { var.sqrt() } else { 1.0 };
        }
        Self { mean, scale }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(x.len(), |i, _| (x[i] - self.mean[i]) / self.scale[i])
    }

    pub fn apply_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| {
            (x[(r, c)] - self.mean[c]) / self.scale[c]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_conflicting_duplicates() {
        let err = Dataset::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]], &[0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::DuplicatePredictors { i: 1, j: 0 }));
    }

    #[test]
    fn merges_exact_duplicates() {
        let d = Dataset::from_rows(&[vec![1.0], vec![1.0], vec![2.0]], &[3.0, 3.0, 4.0]).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.y()[1], 4.0);
    }

    #[test]
    fn standardizer_zero_mean_unit_variance() {
        let d = Dataset::from_rows(&[vec![0.0], vec![2.0], vec![4.0]], &[1.0, 2.0, 3.0]).unwrap();
        let (ds, s) = d.standardized();
        assert!(s.scale[0] > 0.0);
        let col = ds.x().column(0);
        assert!(col.sum().abs() < 1e-12);
        let var: f64 = col.iter().map(|v| v * v).sum::<f64>() / 3.0;
        assert!((var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standardizer_constant_feature_keeps_unit_scale() {
        let x = DMatrix::from_row_slice(3, 2, &[5.0, 1.0, 5.0, 2.0, 5.0, 3.0]);
        let s = Standardizer::fit(&x);
        assert_eq!(s.scale[0], 1.0);
        let z = s.apply(&DVector::from_column_slice(&[5.0, 2.0]));
        assert_eq!(z[0], 0.0);
    }
}
