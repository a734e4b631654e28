//! Data depths, location/scatter estimates and the depth transform that
//! maps a point to its vector of per-class depths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::lp::{solve_min_max_weight, MinMaxWeight};
use crate::mcd::McdEstimator;
use crate::tolerance::DEPTH_CLAMP_TOL;

/// Points with class labels `0..q`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    points: Matrix,
    labels: Vec<usize>,
    class_sizes: Vec<usize>,
}

impl LabeledDataset {
    /// `q` is the number of classes; every label must be below it.
    pub fn new(points: Matrix, labels: Vec<usize>, q: usize) -> Result<Self> {
        if points.rows() != labels.len() {
            return Err(Error::LengthMismatch {
                left: points.rows(),
                right: labels.len(),
            });
        }
        let mut class_sizes = vec![0; q];
        for &l in &labels {
            if l >= q {
                return Err(Error::InvalidArgument(format!(
                    "label {l} out of range for {q} classes"
                )));
            }
            class_sizes[l] += 1;
        }
        Ok(LabeledDataset {
            points,
            labels,
            class_sizes,
        })
    }

    /// Dataset from per-class samples, labelled by position.
    pub fn from_classes(classes: &[Matrix]) -> Result<Self> {
        let mut points = Matrix::zeros(0, classes.first().map_or(0, Matrix::cols));
        let mut labels = Vec::new();
        for (j, c) in classes.iter().enumerate() {
            points = points.vstack(c)?;
            labels.extend(std::iter::repeat_n(j, c.rows()));
        }
        LabeledDataset::new(points, labels, classes.len())
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.points.rows()
    }

    pub fn d(&self) -> usize {
        self.points.cols()
    }

    pub fn q(&self) -> usize {
        self.class_sizes.len()
    }

    pub fn class_sizes(&self) -> &[usize] {
        &self.class_sizes
    }

    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.labels[i] == class).collect()
    }

    pub fn class_points(&self, class: usize) -> Matrix {
        self.points.select_rows(&self.class_indices(class))
    }

    /// Rows `idx`, keeping the class count.
    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        let labels: Vec<usize> = idx.iter().map(|&i| self.labels[i]).collect();
        let mut class_sizes = vec![0; self.q()];
        for &l in &labels {
            class_sizes[l] += 1;
        }
        LabeledDataset {
            points: self.points.select_rows(idx),
            labels,
            class_sizes,
        }
    }

    /// Training needs `q >= 2` and at least `d + 1` points per class.
    pub fn check_trainable(&self) -> Result<()> {
        if self.q() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least two classes, got {}",
                self.q()
            )));
        }
        let needed = self.d() + 1;
        for (class, &count) in self.class_sizes.iter().enumerate() {
            if count < needed {
                return Err(Error::TooFewPoints {
                    class,
                    count,
                    needed,
                });
            }
        }
        Ok(())
    }
}

/// Depths of one point with respect to each class.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthVector(Vec<f64>);

impl DepthVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(format!(
                "depth values must lie in [0, 1]: {values:?}"
            )));
        }
        Ok(DepthVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn q(&self) -> usize {
        self.0.len()
    }

    /// All components zero: the point is outside every class's hull.
    pub fn is_outsider(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocationScatter {
    #[serde(with = "crate::sig17::vec")]
    pub mu: Vec<f64>,
    pub sigma: Matrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthKind {
    Zonoid,
    MahalanobisMoment,
    MahalanobisMcd,
}

/// Which location/scatter estimator to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Moment,
    Mcd,
}

fn clamp_depth(v: f64) -> f64 {
    if v < 0.0 {
        debug_assert!(v >= -DEPTH_CLAMP_TOL, "depth {v} below range");
        0.0
    } else if v > 1.0 {
        debug_assert!(v <= 1.0 + DEPTH_CLAMP_TOL, "depth {v} above range");
        1.0
    } else {
        v
    }
}

/// Zonoid depth of `x` in the cloud `data`: `1 / (n t*)` with `t*` the
/// smallest achievable maximal convex weight, and `0` outside the hull.
pub fn zonoid_depth(x: &[f64], data: &Matrix) -> Result<f64> {
    let n = data.rows();
    match solve_min_max_weight(data, x)? {
        MinMaxWeight::Infeasible => Ok(0.0),
        MinMaxWeight::Optimal { t, .. } => Ok(clamp_depth(1.0 / (n as f64 * t))),
    }
}

/// `1 / (1 + (x - mu)' sigma^{-1} (x - mu))`.
pub fn mahalanobis_depth(x: &[f64], ls: &LocationScatter) -> Result<f64> {
    let chol = Cholesky::factor(&ls.sigma)?;
    Ok(depth_from_factor(x, &ls.mu, &chol))
}

fn depth_from_factor(x: &[f64], mu: &[f64], chol: &Cholesky) -> f64 {
    let diff: Vec<f64> = x.iter().zip(mu).map(|(a, b)| a - b).collect();
    1.0 / (1.0 + chol.quadratic_form(&diff))
}

/// Sample mean and covariance (divisor `n - 1`).
pub fn estimate_moments(data: &Matrix) -> Result<LocationScatter> {
    let n = data.rows();
    let d = data.cols();
    if n < 2 {
        return Err(Error::DegenerateData(format!(
            "moment estimates need at least 2 points, got {n}"
        )));
    }
    let mut mu = vec![0.0; d];
    for r in data.row_iter() {
        for (m, v) in mu.iter_mut().zip(r) {
            *m += v;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n as f64);
    let sigma = covariance_about(data, &mu, n - 1);
    for i in 0..d {
        if !(sigma[(i, i)] >= 0.0) {
            return Err(Error::DegenerateData("covariance is not PSD".into()));
        }
    }
    Ok(LocationScatter { mu, sigma })
}

/// `sum (x - mu)(x - mu)' / divisor` over the rows of `data`.
pub(crate) fn covariance_about(data: &Matrix, mu: &[f64], divisor: usize) -> Matrix {
    let d = data.cols();
    let mut s = Matrix::zeros(d, d);
    let mut diff = vec![0.0; d];
    for r in data.row_iter() {
        for k in 0..d {
            diff[k] = r[k] - mu[k];
        }
        for i in 0..d {
            for j in 0..=i {
                s[(i, j)] += diff[i] * diff[j];
            }
        }
    }
    let div = divisor.max(1) as f64;
    for i in 0..d {
        for j in 0..=i {
            let v = s[(i, j)] / div;
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// Location/scatter with a ready Cholesky factor. A singular scatter gets a
/// ridge of `1e-8 * trace / d` on the diagonal.
#[derive(Clone, Debug)]
pub struct MahalanobisSummary {
    ls: LocationScatter,
    chol: Cholesky,
}

impl MahalanobisSummary {
    pub fn new(ls: LocationScatter) -> Result<Self> {
        let chol = factor_with_ridge(&ls.sigma)?;
        Ok(MahalanobisSummary { ls, chol })
    }

    pub fn fit(data: &Matrix, estimator: Estimator, seed: u64) -> Result<Self> {
        let ls = match estimator {
            Estimator::Moment => estimate_moments(data)?,
            Estimator::Mcd => McdEstimator {
                ridge_singular: true,
                ..McdEstimator::default()
            }
            .fit(data, seed)?,
        };
        MahalanobisSummary::new(ls)
    }

    pub fn location_scatter(&self) -> &LocationScatter {
        &self.ls
    }

    pub fn depth(&self, x: &[f64]) -> f64 {
        depth_from_factor(x, &self.ls.mu, &self.chol)
    }

    /// Squared Mahalanobis distance between two points under this scatter.
    pub fn distance_sq(&self, a: &[f64], b: &[f64]) -> f64 {
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.chol.quadratic_form(&diff)
    }
}

pub(crate) fn factor_with_ridge(sigma: &Matrix) -> Result<Cholesky> {
    match Cholesky::factor(sigma) {
        Ok(c) => Ok(c),
        Err(Error::NotPositiveDefinite { .. }) => {
            let d = sigma.rows();
            let ridge = 1e-8 * sigma.trace() / d as f64;
            if !(ridge > 0.0) {
                return Err(Error::DegenerateData(
                    "scatter matrix has zero trace".into(),
                ));
            }
            let mut reg = sigma.clone();
            for i in 0..d {
                reg[(i, i)] += ridge;
            }
            Cholesky::factor(&reg).map_err(|e| {
                Error::DegenerateData(format!("scatter singular even after ridge: {e}"))
            })
        }
        Err(e) => Err(e),
    }
}

#[derive(Clone, Debug)]
enum ClassDepth {
    Zonoid(Matrix),
    Mahalanobis(MahalanobisSummary),
}

/// Per-class depth machinery fitted once on a training set; maps points of
/// `R^d` to `[0, 1]^q`.
#[derive(Clone, Debug)]
pub struct DepthTransform {
    kind: DepthKind,
    d: usize,
    classes: Vec<ClassDepth>,
}

impl DepthTransform {
    /// `seed` only matters for [`DepthKind::MahalanobisMcd`].
    pub fn fit(ds: &LabeledDataset, kind: DepthKind, seed: u64) -> Result<Self> {
        let classes = (0..ds.q())
            .map(|j| {
                let pts = ds.class_points(j);
                Ok(match kind {
                    DepthKind::Zonoid => ClassDepth::Zonoid(pts),
                    DepthKind::MahalanobisMoment => ClassDepth::Mahalanobis(
                        MahalanobisSummary::fit(&pts, Estimator::Moment, seed)?,
                    ),
                    DepthKind::MahalanobisMcd => ClassDepth::Mahalanobis(
                        MahalanobisSummary::fit(&pts, Estimator::Mcd, seed.wrapping_add(j as u64))?,
                    ),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DepthTransform {
            kind,
            d: ds.d(),
            classes,
        })
    }

    pub fn kind(&self) -> DepthKind {
        self.kind
    }

    pub fn q(&self) -> usize {
        self.classes.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<DepthVector> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, expected {}",
                x.len(),
                self.d
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("query point"));
        }
        let values = self
            .classes
            .iter()
            .map(|c| match c {
                ClassDepth::Zonoid(pts) => zonoid_depth(x, pts),
                ClassDepth::Mahalanobis(s) => Ok(s.depth(x)),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DepthVector(values))
    }

    /// Depth vectors of every row, computed in parallel, in row order.
    pub fn apply_rows(&self, points: &Matrix) -> Result<Vec<DepthVector>> {
        (0..points.rows())
            .into_par_iter()
            .map(|i| self.apply(points.row(i)))
            .collect()
    }
}
