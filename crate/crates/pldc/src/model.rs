//! Max-affine parts, difference-of-convex models, and the interpolation /
//! seminorm-bound constructions that everything else is built on.

use nalgebra::{DMatrix, DVector};

use crate::dataset::{Dataset, Standardizer};
use crate::error::{Error, Result};

/// Default guard on the number of planes produced by [`PldcModel::add`].
pub const DEFAULT_PLANE_CAP: usize = 1 << 20;

/// One affine piece `x -> <slope, x> + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub slope: DVector<f64>,
    pub offset: f64,
}

impl Plane {
    pub fn new(slope: DVector<f64>, offset: f64) -> Self {
        Self { slope, offset }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.slope.dot(x) + self.offset
    }

    fn l1_slope(&self) -> f64 {
        self.slope.iter().map(|v| v.abs()).sum()
    }
}

/// Pointwise maximum of finitely many affine functions: convex and piecewise
/// linear. The plane list is never empty.
///
/// Argmax ties need no tie-breaking: the value is tie-invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxAffine {
    planes: Vec<Plane>,
    dim: usize,
}

impl MaxAffine {
    pub fn new(planes: Vec<Plane>) -> Result<Self> {
        let dim = match planes.first() {
            Some(p) => p.slope.len(),
            None => return Err(Error::ShapeMismatch("max-affine needs at least one plane".into())),
        };
        if let Some(p) = planes.iter().find(|p| p.slope.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.slope.len(),
            });
        }
        Ok(Self { planes, dim })
    }

    /// The constant function `c` (single zero-slope plane).
    pub fn constant(dim: usize, c: f64) -> Self {
        Self {
            planes: vec![Plane::new(DVector::zeros(dim), c)],
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    pub fn num_planes(&self) -> usize {
        self.planes.len()
    }

    /// Linear scan over all planes.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.planes
            .iter()
            .map(|p| p.value(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_k ||slope_k||_1`.
    pub fn max_l1_slope(&self) -> f64 {
        self.planes.iter().map(Plane::l1_slope).fold(0.0, f64::max)
    }

    fn scaled(&self, c: f64) -> Self {
        debug_assert!(c >= 0.0);
        Self {
            planes: self
                .planes
                .iter()
                .map(|p| Plane::new(&p.slope * c, p.offset * c))
                .collect(),
            dim: self.dim,
        }
    }

    /// Minkowski sum of plane lists: `(self + other)(x) = self(x) + other(x)`.
    fn plane_sum(&self, other: &Self) -> Self {
        let mut planes = Vec::with_capacity(self.planes.len() * other.planes.len());
        for p in &self.planes {
            for q in &other.planes {
                planes.push(Plane::new(&p.slope + &q.slope, p.offset + q.offset));
            }
        }
        Self {
            planes,
            dim: self.dim,
        }
    }
}

/// How a model was fitted; carried along for reporting and persistence.
#[derive(Debug, Clone, PartialEq)]
pub struct FitMeta {
    pub lambda: f64,
    pub rho: f64,
    pub loss: String,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    /// Which response coupling the yhat-update used ("observed" or "fitted").
    pub coupling: String,
}

/// A piecewise-linear difference-of-convex model `f = phi1 - phi2`.
///
/// If a standardizer is present, inputs are transformed before evaluating
/// the two max-affine parts; the parts live in standardized coordinates.
#[derive(Debug, Clone)]
pub struct PldcModel {
    pub phi1: MaxAffine,
    pub phi2: MaxAffine,
    pub standardizer: Option<Standardizer>,
    pub meta: Option<FitMeta>,
}

impl PldcModel {
    pub fn new(phi1: MaxAffine, phi2: MaxAffine) -> Result<Self> {
        if phi1.dim() != phi2.dim() {
            return Err(Error::DimensionMismatch {
                expected: phi1.dim(),
                got: phi2.dim(),
            });
        }
        Ok(Self {
            phi1,
            phi2,
            standardizer: None,
            meta: None,
        })
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self {
            phi1: MaxAffine::constant(dim, c),
            phi2: MaxAffine::constant(dim, 0.0),
            standardizer: None,
            meta: None,
        }
    }

    pub fn with_standardizer(mut self, s: Option<Standardizer>) -> Self {
        self.standardizer = s;
        self
    }

    pub fn with_meta(mut self, meta: FitMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    /// Input dimension before standardization.
    pub fn dim(&self) -> usize {
        match &self.standardizer {
            Some(s) => s.dim(),
            None => self.phi1.dim(),
        }
    }

    /// `phi1(x') - phi2(x')` with `x'` the standardized input.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(match &self.standardizer {
            Some(s) => {
                let z = s.apply(x);
                self.phi1.value(&z) - self.phi2.value(&z)
            }
            None => self.phi1.value(x) - self.phi2.value(x),
        })
    }

    /// Evaluate every row of `x`.
    pub fn evaluate_rows(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(x.nrows());
        for i in 0..x.nrows() {
            out[i] = self.evaluate(&x.row(i).transpose())?;
        }
        Ok(out)
    }

    /// Upper bound on the DC seminorm of this representation:
    /// `max_k ||slope1_k||_1 + max_k ||slope2_k||_1`.
    ///
    /// This bounds the seminorm of the representation at hand, not the
    /// infimum over all representations.
    pub fn seminorm_bound(&self) -> f64 {
        self.phi1.max_l1_slope() + self.phi2.max_l1_slope()
    }

    /// Pointwise scaling `c * f`. Negative `c` swaps the two parts.
    pub fn scale(&self, c: f64) -> Self {
        let (phi1, phi2) = if c >= 0.0 {
            (self.phi1.scaled(c), self.phi2.scaled(c))
        } else {
            (self.phi2.scaled(-c), self.phi1.scaled(-c))
        };
        Self {
            phi1,
            phi2,
            standardizer: self.standardizer.clone(),
            meta: None,
        }
    }

    /// Pointwise sum, with plane lists growing to `K1 * K2` per part.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.add_with_cap(other, DEFAULT_PLANE_CAP)
    }

    pub fn add_with_cap(&self, other: &Self, cap: usize) -> Result<Self> {
        if self.phi1.dim() != other.phi1.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.phi1.dim(),
                got: other.phi1.dim(),
            });
        }
        if self.standardizer != other.standardizer {
            return Err(Error::InvalidConfig(
                "cannot add models with different standardizers".into(),
            ));
        }
        let count = self
            .phi1
            .num_planes()
            .saturating_mul(other.phi1.num_planes())
            .max(self.phi2.num_planes().saturating_mul(other.phi2.num_planes()));
        if count > cap {
            return Err(Error::PlaneCapExceeded { count, cap });
        }
        Ok(Self {
            phi1: self.phi1.plane_sum(&other.phi1),
            phi2: self.phi2.plane_sum(&other.phi2),
            standardizer: self.standardizer.clone(),
            meta: None,
        })
    }
}

/// Build the model of a witness tuple `(yhat, z, a, b)` over data sites `x`:
/// phi1 planes are `(a_i, yhat_i + z_i - <a_i, x_i>)`, phi2 planes are
/// `(b_i, z_i - <b_i, x_i>)`.
///
/// If the witness satisfies the pairwise interpolation inequalities exactly,
/// the model reproduces `yhat_i` at every `x_i`. Feasibility is the caller's
/// responsibility: the model is constructed either way.
pub fn build_from_witness(
    x: &DMatrix<f64>,
    yhat: &DVector<f64>,
    z: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<PldcModel> {
    let (n, d) = (x.nrows(), x.ncols());
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    for (name, len) in [("yhat", yhat.len()), ("z", z.len())] {
        if len != n {
            return Err(Error::ShapeMismatch(format!("{name} has length {len}, want {n}")));
        }
    }
    for (name, m) in [("a", a), ("b", b)] {
        if m.nrows() != n || m.ncols() != d {
            return Err(Error::ShapeMismatch(format!(
                "{name} is {}x{}, want {n}x{d}",
                m.nrows(),
                m.ncols()
            )));
        }
    }

    let mut p1 = Vec::with_capacity(n);
    let mut p2 = Vec::with_capacity(n);
    for i in 0..n {
        let xi = x.row(i).transpose();
        let ai = a.row(i).transpose();
        let bi = b.row(i).transpose();
        p1.push(Plane::new(ai.clone(), yhat[i] + z[i] - ai.dot(&xi)));
        p2.push(Plane::new(bi.clone(), z[i] - bi.dot(&xi)));
    }
    PldcModel::new(MaxAffine::new(p1)?, MaxAffine::new(p2)?)
}

/// Quadratic-shift interpolant: an exact PLDC interpolant of the data with
/// curvature constant `C = max_{i != j} |y_i - y_j| / ||x_i - x_j||^2`.
///
/// With a single point or all-equal responses the max is empty or zero;
/// `C = 0` and the result is the constant `y_1`.
pub fn interpolate_quadratic_shift(data: &Dataset) -> Result<PldcModel> {
    let (n, x, y) = (data.n(), data.x(), data.y());

    let mut c = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dist2 = (x.row(i) - x.row(j)).norm_squared();
            // distinct rows are guaranteed by Dataset's invariant
            c = c.max((y[i] - y[j]).abs() / dist2);
        }
    }

    let mut p1 = Vec::with_capacity(n);
    let mut p2 = Vec::with_capacity(n);
    for i in 0..n {
        let xi = x.row(i).transpose();
        let slope = &xi * c;
        let base = 0.5 * c * xi.norm_squared() - slope.dot(&xi);
        p1.push(Plane::new(slope.clone(), base + 0.5 * y[i]));
        p2.push(Plane::new(slope, base - 0.5 * y[i]));
    }
    PldcModel::new(MaxAffine::new(p1)?, MaxAffine::new(p2)?)
}
