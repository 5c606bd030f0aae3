//! Conversions between small bias-free ReLU networks and PLDC models.
//!
//! Forward direction: every unit is tracked as a difference of two pure-slope
//! max-affine parts. A unit's ReLU is `max(F - G, 0) = max(F, G) - G`, so the
//! positive part takes the union of the plane lists and the negative part
//! keeps `G`. After each hidden unit, both parts are re-centered by the
//! componentwise midrange of the `G` planes (subtracting the same linear
//! functional from both parts leaves the unit's value unchanged); this keeps
//! the representation's seminorm bound under the layer-product certificate.
//! Exact duplicate slopes are dropped, otherwise the zero weights of the
//! positive/negative splits would inflate the plane count multiplicatively.
//!
//! Reverse direction: plane lists are padded to a power of two (repeating an
//! existing plane, which leaves the maxima unchanged), inner products are
//! encoded as relu pairs, and pairwise maxima are merged two hidden layers at
//! a time, giving `2 ceil(log2 K)` layers of width at most `3K`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{MaxAffine, Plane, PldcModel};

/// Default guard on the plane count while expanding a network.
pub const RELU_PLANE_CAP: usize = 1 << 20;

/// Fully connected ReLU network without biases: hidden weight matrices
/// `W^1..W^D` and an output vector. Constants are handled by appending a
/// fixed 1 to the input where needed.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluNet {
    weights: Vec<DMatrix<f64>>,
    output: DVector<f64>,
}

impl ReluNet {
    pub fn new(weights: Vec<DMatrix<f64>>, output: DVector<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::ShapeMismatch("need at least one hidden layer".into()));
        }
        for w in weights.windows(2) {
            if w[1].ncols() != w[0].nrows() {
                return Err(Error::ShapeMismatch(format!(
                    "layer shapes do not compose: {}x{} into {}x{}",
                    w[0].nrows(),
                    w[0].ncols(),
                    w[1].nrows(),
                    w[1].ncols()
                )));
            }
        }
        if output.len() != weights.last().unwrap().nrows() {
            return Err(Error::ShapeMismatch(format!(
                "output vector has {} entries for {} last-layer units",
                output.len(),
                weights.last().unwrap().nrows()
            )));
        }
        Ok(Self { weights, output })
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn max_width(&self) -> usize {
        self.weights.iter().map(|w| w.nrows()).max().unwrap_or(0)
    }

    pub fn weights(&self) -> &[DMatrix<f64>] {
        &self.weights
    }

    pub fn output(&self) -> &DVector<f64> {
        &self.output
    }

    pub fn forward(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut act = x.clone();
        for w in &self.weights {
            act = (w * act).map(|v| v.max(0.0));
        }
        Ok(self.output.dot(&act))
    }
}

/// One convex part of a unit: a list of pure slopes (offsets are zero
/// throughout because the network has no biases).
type Slopes = Vec<DVector<f64>>;

fn dedup_slopes(mut planes: Slopes) -> Slopes {
    planes.sort_by(|a, b| {
        for (x, y) in a.iter().zip(b.iter()) {
            match x.total_cmp(y) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        std::cmp::Ordering::Equal
    });
    planes.dedup();
    planes
}

/// A max of linear functions is the support function of its slope set, so
/// slopes inside the convex hull never attain the max. In one and two
/// dimensions the hull is cheap, and pruning it keeps the plane counts of
/// deep networks from compounding.
fn reduce_slopes(planes: Slopes, dim: usize) -> Slopes {
    let planes = dedup_slopes(planes);
    match dim {
        1 if planes.len() > 2 => {
            // already sorted: keep the extremes
            vec![planes[0].clone(), planes[planes.len() - 1].clone()]
        }
        2 if planes.len() > 3 => hull_2d(planes),
        _ => planes,
    }
}

/// Monotone-chain convex hull over lexicographically sorted points.
fn hull_2d(pts: Slopes) -> Slopes {
    let n = pts.len();
    let cross = |o: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<usize> = Vec::new();
    for i in 0..n {
        while lower.len() >= 2
            && cross(&pts[lower[lower.len() - 2]], &pts[lower[lower.len() - 1]], &pts[i]) <= 0.0
        {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for i in (0..n).rev() {
        while upper.len() >= 2
            && cross(&pts[upper[upper.len() - 2]], &pts[upper[upper.len() - 1]], &pts[i]) <= 0.0
        {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    let mut keep: Vec<usize> = lower;
    keep.sort_unstable();
    keep.dedup();
    keep.into_iter().map(|i| pts[i].clone()).collect()
}

/// Minkowski sum of two slope lists, reduced.
fn minkowski(a: &Slopes, b: &Slopes, cap: usize, dim: usize) -> Result<Slopes> {
    let count = a.len().saturating_mul(b.len());
    if count > cap {
        return Err(Error::PlaneCapExceeded { count, cap });
    }
    let mut out = Vec::with_capacity(count);
    for p in a {
        for q in b {
            out.push(p + q);
        }
    }
    Ok(reduce_slopes(out, dim))
}

fn scale_slopes(planes: &Slopes, c: f64, dim: usize) -> Slopes {
    if c == 0.0 {
        return vec![DVector::zeros(dim)];
    }
    dedup_slopes(planes.iter().map(|p| p * c).collect())
}

/// Componentwise midrange of a slope list.
fn midrange(planes: &Slopes, dim: usize) -> DVector<f64> {
    let mut lo = DVector::from_element(dim, f64::INFINITY);
    let mut hi = DVector::from_element(dim, f64::NEG_INFINITY);
    for p in planes {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    DVector::from_fn(dim, |k, _| 0.5 * (lo[k] + hi[k]))
}

struct UnitParts {
    alpha: Slopes,
    beta: Slopes,
}

/// Combine lower units through one weight row: the convex parts of
/// `sum_j w_j (P_j - Q_j)` are `sum_j (w_j^+ P_j + w_j^- Q_j)` and the same
/// with the parts swapped. Only one of the two picks is live per unit since
/// `w^+ w^- = 0`.
fn combine(row: &[f64], units: &[UnitParts], dim: usize, cap: usize) -> Result<(Slopes, Slopes)> {
    let mut f: Slopes = vec![DVector::zeros(dim)];
    let mut g: Slopes = vec![DVector::zeros(dim)];
    for (j, &w) in row.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let (pos_part, neg_part) = if w > 0.0 {
            (
                scale_slopes(&units[j].alpha, w, dim),
                scale_slopes(&units[j].beta, w, dim),
            )
        } else {
            (
                scale_slopes(&units[j].beta, -w, dim),
                scale_slopes(&units[j].alpha, -w, dim),
            )
        };
        f = minkowski(&f, &pos_part, cap, dim)?;
        g = minkowski(&g, &neg_part, cap, dim)?;
    }
    Ok((f, g))
}

pub fn relu_to_pldc(net: &ReluNet) -> Result<PldcModel> {
    relu_to_pldc_with_cap(net, RELU_PLANE_CAP)
}

pub fn relu_to_pldc_with_cap(net: &ReluNet, cap: usize) -> Result<PldcModel> {
    let dim = net.input_dim();
    let zero = || vec![DVector::zeros(dim)];

    // first hidden layer: unit i is max(<w_i, x>, 0)
    let mut units: Vec<UnitParts> = (0..net.weights[0].nrows())
        .map(|i| UnitParts {
            alpha: dedup_slopes(vec![net.weights[0].row(i).transpose(), DVector::zeros(dim)]),
            beta: zero(),
        })
        .collect();

    for w in &net.weights[1..] {
        let mut next = Vec::with_capacity(w.nrows());
        for i in 0..w.nrows() {
            let row: Vec<f64> = w.row(i).iter().copied().collect();
            let (f, g) = combine(&row, &units, dim, cap)?;
            // relu: max(F - G, 0) = max(F, G) - G
            let mut alpha = f;
            alpha.extend(g.iter().cloned());
            let alpha = reduce_slopes(alpha, dim);
            let center = midrange(&g, dim);
            let recenter =
                |planes: Slopes| -> Slopes { planes.into_iter().map(|p| p - &center).collect() };
            next.push(UnitParts {
                alpha: recenter(alpha),
                beta: recenter(g),
            });
        }
        units = next;
    }

    let out_row: Vec<f64> = net.output.iter().copied().collect();
    let (f, g) = combine(&out_row, &units, dim, cap)?;
    let planes = |s: Slopes| -> Result<MaxAffine> {
        MaxAffine::new(s.into_iter().map(|v| Plane::new(v, 0.0)).collect())
    };
    PldcModel::new(planes(f)?, planes(g)?)
}

/// Entrywise-absolute layer product `|w_out|' (prod |W^l|) 1`.
pub fn seminorm_certificate(net: &ReluNet) -> f64 {
    let mut v = DVector::from_element(net.input_dim(), 1.0);
    for w in &net.weights {
        v = w.map(f64::abs) * v;
    }
    net.output.map(f64::abs).dot(&v)
}

/// Compile a model into a ReLU net over the augmented input `(x, 1)`.
///
/// Both plane lists are padded to the same power-of-two count K by repeating
/// their first plane, the standardizer (if any) is folded into the slopes, and
/// the net evaluates to `model(x)` at every augmented input. Depth is
/// `2 log2 K` hidden layers for K >= 2 and a single +/- pair for K = 1;
/// width never exceeds `3K`.
pub fn pldc_to_relu(model: &PldcModel) -> Result<ReluNet> {
    let raw_dim = model.dim();
    let aug = raw_dim + 1;

    // plane -> augmented slope in raw coordinates
    let fold = |p: &Plane| -> DVector<f64> {
        let mut v = DVector::zeros(aug);
        match &model.standardizer {
            Some(s) => {
                let mut off = p.offset;
                for k in 0..raw_dim {
                    v[k] = p.slope[k] / s.scale[k];
                    off -= p.slope[k] * s.mean[k] / s.scale[k];
                }
                v[raw_dim] = off;
            }
            None => {
                for k in 0..raw_dim {
                    v[k] = p.slope[k];
                }
                v[raw_dim] = p.offset;
            }
        }
        v
    };

    let mut part1: Slopes = model.phi1.planes().iter().map(fold).collect();
    let mut part2: Slopes = model.phi2.planes().iter().map(fold).collect();
    let k_raw = part1.len().max(part2.len());
    let k = k_raw.next_power_of_two();
    while part1.len() < k {
        part1.push(part1[0].clone());
    }
    while part2.len() < k {
        part2.push(part2[0].clone());
    }

    if k == 1 {
        // affine difference: one relu pair reproduces <c, x~> exactly
        let c = &part1[0] - &part2[0];
        let mut w = DMatrix::zeros(2, aug);
        w.row_mut(0).copy_from(&c.transpose());
        w.row_mut(1).copy_from(&(-&c).transpose());
        return ReluNet::new(vec![w], DVector::from_column_slice(&[1.0, -1.0]));
    }

    // Layer plan per part and stage (m pairs -> m/2 pairs):
    //   collate: 3 nodes per group from the previous encoding
    //   merge:   a +/- relu pair per group
    let mut weights: Vec<DMatrix<f64>> = Vec::new();

    // stage 1 collate reads the raw augmented input
    let m0 = k / 2;
    let mut w1 = DMatrix::zeros(2 * 3 * m0, aug);
    for (part_idx, part) in [&part1, &part2].into_iter().enumerate() {
        for j in 0..m0 {
            let base = part_idx * 3 * m0 + 3 * j;
            let (va, vb) = (&part[2 * j], &part[2 * j + 1]);
            w1.row_mut(base).copy_from(&(va - vb).transpose());
            w1.row_mut(base + 1).copy_from(&vb.transpose());
            w1.row_mut(base + 2).copy_from(&(-vb).transpose());
        }
    }
    weights.push(w1);

    let mut m = m0; // pairs per part after the upcoming merge
    loop {
        // merge: from 3 nodes per group to a +/- pair per group
        let mut wm = DMatrix::zeros(2 * 2 * m, 2 * 3 * m);
        for part_idx in 0..2 {
            for j in 0..m {
                let src = part_idx * 3 * m + 3 * j;
                let dst = part_idx * 2 * m + 2 * j;
                for (node, sgn) in [(0usize, 1.0f64), (1, 1.0), (2, -1.0)] {
                    wm[(dst, src + node)] = sgn;
                    wm[(dst + 1, src + node)] = -sgn;
                }
            }
        }
        weights.push(wm);
        if m == 1 {
            break;
        }

        // collate: pairs (2g, 2g+1) -> 3 nodes per group g
        let groups = m / 2;
        let mut wc = DMatrix::zeros(2 * 3 * groups, 2 * 2 * m);
        for part_idx in 0..2 {
            for g in 0..groups {
                let pa = part_idx * 2 * m + 4 * g; // pair 2g: (+, -)
                let pb = pa + 2; // pair 2g+1
                let dst = part_idx * 3 * groups + 3 * g;
                // value(2g) - value(2g+1)
                wc[(dst, pa)] = 1.0;
                wc[(dst, pa + 1)] = -1.0;
                wc[(dst, pb)] = -1.0;
                wc[(dst, pb + 1)] = 1.0;
                // +/- value(2g+1)
                wc[(dst + 1, pb)] = 1.0;
                wc[(dst + 1, pb + 1)] = -1.0;
                wc[(dst + 2, pb)] = -1.0;
                wc[(dst + 2, pb + 1)] = 1.0;
            }
        }
        weights.push(wc);
        m = groups;
    }

    // final pairs: [P+, P-, Q+, Q-] -> (P+ - P-) - (Q+ - Q-)
    let output = DVector::from_column_slice(&[1.0, -1.0, -1.0, 1.0]);
    ReluNet::new(weights, output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn vecf(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    pub(crate) fn random_net(rng: &mut ChaCha8Rng, d: usize, depth: usize, width: usize) -> ReluNet {
        let mut weights = Vec::new();
        let mut prev = d;
        for _ in 0..depth {
            let w = rng.random_range(1..=width);
            weights.push(DMatrix::from_fn(w, prev, |_, _| rng.random_range(-1.5..1.5)));
            prev = w;
        }
        let output = DVector::from_fn(prev, |_, _| rng.random_range(-1.5..1.5));
        ReluNet::new(weights, output).unwrap()
    }

    #[test]
    fn single_relu_unit() {
        let net = ReluNet::new(
            vec![DMatrix::from_row_slice(1, 1, &[1.0])],
            vecf(&[1.0]),
        )
        .unwrap();
        let m = relu_to_pldc(&net).unwrap();
        for t in [-1.0, 0.0, 2.0] {
            assert_eq!(m.evaluate(&vecf(&[t])).unwrap(), t.max(0.0));
        }
        // phi1 holds {x, 0}, phi2 only the zero plane
        assert_eq!(m.phi1.num_planes(), 2);
        assert_eq!(m.phi2.num_planes(), 1);
    }

    #[test]
    fn random_nets_match_forward_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for trial in 0..20 {
            let d = rng.random_range(1..=2);
            let depth = rng.random_range(1..=2);
            let net = random_net(&mut rng, d, depth, 3);
            let m = relu_to_pldc(&net).unwrap();
            for _ in 0..200 {
                let x = DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
                let got = m.evaluate(&x).unwrap();
                let want = net.forward(&x).unwrap();
                assert!(
                    (got - want).abs() <= 1e-9,
                    "trial {trial}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn certificate_hand_value_and_zero() {
        let net = ReluNet::new(
            vec![DMatrix::from_row_slice(1, 2, &[1.0, -2.0])],
            vecf(&[3.0]),
        )
        .unwrap();
        assert_eq!(seminorm_certificate(&net), 9.0);

        let zero = ReluNet::new(vec![DMatrix::zeros(2, 2)], vecf(&[0.0, 0.0])).unwrap();
        assert_eq!(seminorm_certificate(&zero), 0.0);
    }

    #[test]
    fn certificate_dominates_constructed_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(303);
        for trial in 0..30 {
            let d = rng.random_range(1..=2);
            let depth = rng.random_range(1..=2);
            let net = random_net(&mut rng, d, depth, 3);
            let m = relu_to_pldc(&net).unwrap();
            let cert = seminorm_certificate(&net);
            let bound = m.seminorm_bound();
            assert!(
                cert >= bound - 1e-9 * (1.0 + cert.abs()),
                "trial {trial}: certificate {cert} < bound {bound}"
            );
        }
    }

    #[test]
    fn certificate_homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = random_net(&mut rng, 2, 2, 3);
        let base = seminorm_certificate(&net);
        for c in [2.0f64, -4.0, 0.5] {
            let scaled = ReluNet::new(net.weights.clone(), &net.output * c).unwrap();
            assert_eq!(seminorm_certificate(&scaled), c.abs() * base);
        }
    }

    #[test]
    fn affine_case_single_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = PldcModel::new(
            MaxAffine::new(vec![Plane::new(vecf(&[1.5, -0.5]), 0.75)]).unwrap(),
            MaxAffine::new(vec![Plane::new(vecf(&[0.25, 1.0]), -0.5)]).unwrap(),
        )
        .unwrap();
        let net = pldc_to_relu(&m).unwrap();
        assert_eq!(net.depth(), 1);
        for _ in 0..100 {
            let x = DVector::from_fn(2, |_, _| rng.random_range(-4.0..4.0));
            let aug = vecf(&[x[0], x[1], 1.0]);
            assert_relative_eq!(
                net.forward(&aug).unwrap(),
                m.evaluate(&x).unwrap(),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn two_plane_model_depth_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let part = |rng: &mut ChaCha8Rng| {
            MaxAffine::new(
                (0..2)
                    .map(|_| Plane::new(vecf(&[rng.random_range(-1.0..1.0)]), rng.random_range(-1.0..1.0)))
                    .collect(),
            )
            .unwrap()
        };
        let m = PldcModel::new(part(&mut rng), part(&mut rng)).unwrap();
        let net = pldc_to_relu(&m).unwrap();
        assert_eq!(net.depth(), 2);
        assert!(net.max_width() <= 16);
        for _ in 0..200 {
            let x = vecf(&[rng.random_range(-5.0..5.0)]);
            let aug = vecf(&[x[0], 1.0]);
            assert!(
                (net.forward(&aug).unwrap() - m.evaluate(&x).unwrap()).abs() <= 1e-9
            );
        }
    }

    fn random_model(rng: &mut ChaCha8Rng, d: usize, k1: usize, k2: usize) -> PldcModel {
        let part = |rng: &mut ChaCha8Rng, k: usize| {
            MaxAffine::new(
                (0..k)
                    .map(|_| {
                        Plane::new(
                            DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)),
                            rng.random_range(-1.0..1.0),
                        )
                    })
                    .collect(),
            )
            .unwrap()
        };
        PldcModel::new(part(rng, k1), part(rng, k2)).unwrap()
    }

    #[test]
    fn conversion_round_trip() {
        // the round trip re-expands the merge-tree net; plane counts stay
        // small for 1-D models (hull pruning) and for shallow trees otherwise
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        for trial in 0..10 {
            let (d, k) = if trial % 2 == 0 {
                (1, rng.random_range(1..=6))
            } else {
                (2, rng.random_range(1..=2))
            };
            let m = random_model(&mut rng, d, k, k);
            let net = pldc_to_relu(&m).unwrap();
            let back = relu_to_pldc(&net).unwrap();
            for _ in 0..50 {
                let x = DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
                let aug = x.clone().insert_row(d, 1.0);
                let got = back.evaluate(&aug).unwrap();
                let want = m.evaluate(&x).unwrap();
                assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn resource_bounds_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(505);
        for _ in 0..30 {
            let d = rng.random_range(1..=3);
            let k1 = rng.random_range(1..=8);
            let k2 = rng.random_range(1..=8);
            let m = random_model(&mut rng, d, k1, k2);
            let k = k1.max(k2);
            let net = pldc_to_relu(&m).unwrap();
            if k == 1 {
                assert_eq!(net.depth(), 1);
            } else {
                let ceil_log2 = (usize::BITS - (k - 1).leading_zeros()) as usize;
                assert!(net.depth() <= 2 * ceil_log2, "K={k}, depth {}", net.depth());
                assert!(net.max_width() <= 8 * k, "K={k}, width {}", net.max_width());
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(606);
        let net = random_net(&mut rng, 2, 2, 3);
        assert!(matches!(
            relu_to_pldc_with_cap(&net, 2),
            Err(Error::PlaneCapExceeded { .. })
        ));
    }
}
