//! The DD-alpha classifier: depth transform, one alpha-procedure separator
//! per class pair, majority vote, and outsider handling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alpha::{alpha_train, count_errors, extend_features, Separator};
use crate::depth::{
    estimate_moments, DepthKind, DepthTransform, DepthVector, Estimator, LabeledDataset,
    MahalanobisSummary,
};
use crate::error::{Error, Result};
use crate::evaluation::stratified_folds;
use crate::linalg::Matrix;
use crate::mcd::McdEstimator;
use crate::rng;

/// Degrees tried by cross-validated degree selection.
pub const CV_DEGREES: [u32; 3] = [1, 2, 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeChoice {
    Fixed(u32),
    /// Pick the degree from [`CV_DEGREES`] by stratified k-fold
    /// cross-validation in the depth space.
    CrossValidated { folds: usize },
}

/// Treatment of points with zero depth in every class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum OutsiderRule {
    /// Draw a class from the training proportions.
    RandomPrior,
    KnnEuclid { k: usize },
    /// k-NN under the pooled within-class scatter.
    KnnMahalanobis { k: usize, estimator: Estimator },
    MaxMahalanobisDepth { estimator: Estimator },
}

impl OutsiderRule {
    fn k(&self) -> Option<usize> {
        match *self {
            OutsiderRule::KnnEuclid { k } | OutsiderRule::KnnMahalanobis { k, .. } => Some(k),
            _ => None,
        }
    }

    fn with_k(self, k: usize) -> Self {
        match self {
            OutsiderRule::KnnEuclid { .. } => OutsiderRule::KnnEuclid { k },
            OutsiderRule::KnnMahalanobis { estimator, .. } => {
                OutsiderRule::KnnMahalanobis { k, estimator }
            }
            other => other,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub depth: DepthKind,
    pub degree: DegreeChoice,
    pub outsider: OutsiderRule,
    pub seed: u64,
    /// When set, k-NN outsider rules choose `k` in `1..=max` by
    /// leave-one-out on the training set.
    pub knn_max_k: Option<usize>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            depth: DepthKind::Zonoid,
            degree: DegreeChoice::Fixed(2),
            outsider: OutsiderRule::KnnEuclid { k: 1 },
            seed: 0,
            knn_max_k: None,
        }
    }
}

/// Names carried along with a model for reporting; not used by the
/// classifier itself.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub label_column: Option<String>,
}

#[derive(Clone, Debug)]
enum OutsiderState {
    Prior,
    Euclid,
    Pooled(MahalanobisSummary),
    PerClass(Vec<MahalanobisSummary>),
}

#[derive(Clone, Debug)]
pub struct Model {
    train: LabeledDataset,
    depth_kind: DepthKind,
    degree: u32,
    seed: u64,
    priors: Vec<f64>,
    separators: Vec<Separator>,
    outsider: OutsiderRule,
    metadata: ModelMetadata,
    transform: DepthTransform,
    outsider_state: OutsiderState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub votes: Vec<usize>,
    pub depth_vector: DepthVector,
    pub outsider: bool,
}

/// Trains a model on `ds`.
pub fn train(ds: &LabeledDataset, config: &Config) -> Result<Model> {
    ds.check_trainable()?;
    if let Some(k) = config.outsider.k() {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
    }
    let transform = DepthTransform::fit(ds, config.depth, config.seed)?;
    let depths = transform.apply_rows(ds.points())?;

    let degree = match config.degree {
        DegreeChoice::Fixed(p) => p,
        DegreeChoice::CrossValidated { folds } => {
            select_degree(ds, &depths, folds, config.seed)?
        }
    };
    let all: Vec<usize> = (0..ds.n()).collect();
    let separators = train_separators(ds, &depths, &all, degree)?;

    let outsider = match (config.knn_max_k, config.outsider.k()) {
        (Some(max_k), Some(_)) => {
            let state = fit_outsider_state(ds, config.outsider, config.seed)?;
            config
                .outsider
                .with_k(select_k(ds, &state, max_k.max(1)))
        }
        _ => config.outsider,
    };

    Model::assemble(
        ds.clone(),
        config.depth,
        degree,
        config.seed,
        separators,
        outsider,
        ModelMetadata::default(),
        Some(transform),
    )
}

/// One separator per class pair `j < k`, trained on the rows `idx` of
/// those two classes that are not outsiders.
fn train_separators(
    ds: &LabeledDataset,
    depths: &[DepthVector],
    idx: &[usize],
    degree: u32,
) -> Result<Vec<Separator>> {
    let q = ds.q();
    let mut out = Vec::with_capacity(q * (q - 1) / 2);
    for j in 0..q {
        for k in j + 1..q {
            let rows: Vec<usize> = idx
                .iter()
                .copied()
                .filter(|&i| {
                    let l = ds.labels()[i];
                    (l == j || l == k) && !depths[i].is_outsider()
                })
                .collect();
            let dv: Vec<DepthVector> = rows.iter().map(|&i| depths[i].clone()).collect();
            let first: Vec<bool> = rows.iter().map(|&i| ds.labels()[i] == j).collect();
            let fm = extend_features(&dv, &first, degree, (j, k))?;
            out.push(alpha_train(&fm)?);
        }
    }
    Ok(out)
}

fn select_degree(
    ds: &LabeledDataset,
    depths: &[DepthVector],
    folds: usize,
    seed: u64,
) -> Result<u32> {
    if folds < 2 {
        return Err(Error::InvalidArgument(
            "degree cross-validation needs at least two folds".into(),
        ));
    }
    let assignment = stratified_folds(ds.labels(), ds.q(), folds, seed)?;
    let sizes = ds.class_sizes();
    let mut best: Option<(usize, u32)> = None;
    for p in CV_DEGREES {
        let mut errors = 0;
        for f in 0..folds {
            let (test, fit): (Vec<usize>, Vec<usize>) =
                (0..ds.n()).partition(|&i| assignment[i] == f);
            let seps = train_separators(ds, depths, &fit, p)?;
            errors += test
                .iter()
                .filter(|&&i| !depths[i].is_outsider())
                .filter(|&&i| vote(&seps, sizes, &depths[i]).0 != ds.labels()[i])
                .count();
        }
        if best.is_none_or(|(e, _)| errors < e) {
            best = Some((errors, p));
        }
    }
    Ok(best.unwrap().1)
}

/// Pairwise votes and the majority winner for a non-outsider point.
fn vote(separators: &[Separator], class_sizes: &[usize], dv: &DepthVector) -> (usize, Vec<usize>) {
    let q = class_sizes.len();
    let mut votes = vec![0; q];
    for s in separators {
        let (j, k) = s.pair;
        let score = s.eval(dv);
        let d = dv.values();
        // Zero scores go to the deeper class, then the larger one.
        let winner = if score > 0.0 {
            j
        } else if score < 0.0 {
            k
        } else if d[k] > d[j] || (d[k] == d[j] && class_sizes[k] > class_sizes[j]) {
            k
        } else {
            j
        };
        votes[winner] += 1;
    }
    let top = *votes.iter().max().unwrap();
    let d = dv.values();
    let mut label = usize::MAX;
    for c in (0..q).filter(|&c| votes[c] == top) {
        if label == usize::MAX || d[c] > d[label] {
            label = c;
        }
    }
    (label, votes)
}

fn fit_outsider_state(ds: &LabeledDataset, rule: OutsiderRule, seed: u64) -> Result<OutsiderState> {
    Ok(match rule {
        OutsiderRule::RandomPrior => OutsiderState::Prior,
        OutsiderRule::KnnEuclid { .. } => OutsiderState::Euclid,
        OutsiderRule::KnnMahalanobis { estimator, .. } => {
            OutsiderState::Pooled(pooled_scatter(ds, estimator, seed)?)
        }
        OutsiderRule::MaxMahalanobisDepth { estimator } => OutsiderState::PerClass(
            (0..ds.q())
                .map(|j| {
                    MahalanobisSummary::fit(&ds.class_points(j), estimator, seed.wrapping_add(j as u64))
                })
                .collect::<Result<Vec<_>>>()?,
        ),
    })
}

/// Scatter of the training points after centering each class at its own
/// location estimate.
fn pooled_scatter(ds: &LabeledDataset, estimator: Estimator, seed: u64) -> Result<MahalanobisSummary> {
    let mut centered = ds.points().clone();
    for j in 0..ds.q() {
        let pts = ds.class_points(j);
        let mu = match estimator {
            Estimator::Moment => estimate_moments(&pts)?.mu,
            Estimator::Mcd => McdEstimator {
                ridge_singular: true,
                ..McdEstimator::default()
            }
            .fit(&pts, seed.wrapping_add(j as u64))?
            .mu,
        };
        for i in ds.class_indices(j) {
            for (c, m) in mu.iter().enumerate() {
                centered[(i, c)] -= m;
            }
        }
    }
    MahalanobisSummary::fit(&centered, estimator, seed)
}

fn distance(state: &OutsiderState, a: &[f64], b: &[f64]) -> f64 {
    match state {
        OutsiderState::Pooled(s) => s.distance_sq(a, b),
        _ => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
    }
}

/// Training indices ordered by distance to `x`, ties by index.
fn neighbours(points: &Matrix, state: &OutsiderState, x: &[f64], skip: Option<usize>) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = points
        .row_iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(i, r)| (distance(state, x, r), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.into_iter().map(|(_, i)| i).collect()
}

fn majority(labels: &[usize], idx: &[usize], q: usize) -> usize {
    let mut counts = vec![0usize; q];
    for &i in idx {
        counts[labels[i]] += 1;
    }
    let top = *counts.iter().max().unwrap();
    counts.iter().position(|&c| c == top).unwrap()
}

/// Leave-one-out choice of `k` (smallest on ties).
fn select_k(ds: &LabeledDataset, state: &OutsiderState, max_k: usize) -> usize {
    let max_k = max_k.min(ds.n() - 1).max(1);
    let orders: Vec<Vec<usize>> = (0..ds.n())
        .into_par_iter()
        .map(|i| {
            let mut o = neighbours(ds.points(), state, ds.points().row(i), Some(i));
            o.truncate(max_k);
            o
        })
        .collect();
    let mut best = (usize::MAX, 1);
    for k in 1..=max_k {
        let errors = (0..ds.n())
            .filter(|&i| majority(ds.labels(), &orders[i][..k], ds.q()) != ds.labels()[i])
            .count();
        if errors < best.0 {
            best = (errors, k);
        }
    }
    best.1
}

fn priors(sizes: &[usize]) -> Vec<f64> {
    let n: usize = sizes.iter().sum();
    sizes.iter().map(|&s| s as f64 / n as f64).collect()
}

impl Model {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        train: LabeledDataset,
        depth_kind: DepthKind,
        degree: u32,
        seed: u64,
        separators: Vec<Separator>,
        outsider: OutsiderRule,
        metadata: ModelMetadata,
        transform: Option<DepthTransform>,
    ) -> Result<Model> {
        let q = train.q();
        if separators.len() != q * (q - 1) / 2 {
            return Err(Error::ModelFormat(format!(
                "expected {} separators, found {}",
                q * (q - 1) / 2,
                separators.len()
            )));
        }
        let transform = match transform {
            Some(t) => t,
            None => DepthTransform::fit(&train, depth_kind, seed)?,
        };
        let outsider_state = fit_outsider_state(&train, outsider, seed)?;
        Ok(Model {
            priors: priors(train.class_sizes()),
            train,
            depth_kind,
            degree,
            seed,
            separators,
            outsider,
            metadata,
            transform,
            outsider_state,
        })
    }

    pub fn q(&self) -> usize {
        self.train.q()
    }

    pub fn d(&self) -> usize {
        self.train.d()
    }

    pub fn depth_kind(&self) -> DepthKind {
        self.depth_kind
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn separators(&self) -> &[Separator] {
        &self.separators
    }

    pub fn outsider_rule(&self) -> OutsiderRule {
        self.outsider
    }

    pub fn training_data(&self) -> &LabeledDataset {
        &self.train
    }

    pub fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    pub fn set_metadata(&mut self, metadata: ModelMetadata) {
        self.metadata = metadata;
    }

    pub fn depth_vector(&self, x: &[f64]) -> Result<DepthVector> {
        self.transform.apply(x)
    }

    /// Classifies `x`. The random-prior outsider rule draws from a stream
    /// keyed by the model seed and `x`, so results do not depend on call
    /// order.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let mut stream = rng::point_stream(self.seed, x);
        self.predict_with(x, &mut stream)
    }

    /// Like [`Model::predict`] with a caller-supplied stream for the
    /// random-prior rule.
    pub fn predict_with<R: Rng + ?Sized>(&self, x: &[f64], stream: &mut R) -> Result<Prediction> {
        let dv = self.transform.apply(x)?;
        if dv.is_outsider() {
            let label = self.outsider_with(x, stream);
            return Ok(Prediction {
                label,
                votes: vec![0; self.q()],
                depth_vector: dv,
                outsider: true,
            });
        }
        let (label, votes) = vote(&self.separators, self.train.class_sizes(), &dv);
        Ok(Prediction {
            label,
            votes,
            depth_vector: dv,
            outsider: false,
        })
    }

    /// Predictions for every row, computed in parallel, in row order.
    pub fn predict_rows(&self, points: &Matrix) -> Result<Vec<Prediction>> {
        (0..points.rows())
            .into_par_iter()
            .map(|i| self.predict(points.row(i)))
            .collect()
    }

    /// Class assigned to `x` by the outsider rule alone.
    pub fn classify_outsider(&self, x: &[f64]) -> usize {
        let mut stream = rng::point_stream(self.seed, x);
        self.outsider_with(x, &mut stream)
    }

    fn outsider_with<R: Rng + ?Sized>(&self, x: &[f64], stream: &mut R) -> usize {
        match &self.outsider_state {
            OutsiderState::Prior => {
                let u: f64 = stream.random();
                let mut acc = 0.0;
                for (j, p) in self.priors.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return j;
                    }
                }
                self.q() - 1
            }
            OutsiderState::PerClass(summaries) => {
                let mut best = 0;
                let mut best_depth = f64::NEG_INFINITY;
                for (j, s) in summaries.iter().enumerate() {
                    let d = s.depth(x);
                    if d > best_depth {
                        best = j;
                        best_depth = d;
                    }
                }
                best
            }
            state => {
                let k = self.outsider.k().unwrap_or(1).min(self.train.n());
                let order = neighbours(self.train.points(), state, x, None);
                majority(self.train.labels(), &order[..k], self.q())
            }
        }
    }
}

/// Fraction of training points of each pair misclassified by its separator.
pub fn pair_training_amr(model: &Model) -> Vec<((usize, usize), f64)> {
    model
        .separators
        .iter()
        .map(|s| (s.pair, s.training_amr()))
        .collect()
}

/// Misclassification count of a separator on explicit scores; exposed for
/// consistency checks.
pub fn separator_errors(s: &Separator, depths: &[DepthVector], first_class: &[bool]) -> usize {
    let scores: Vec<f64> = depths.iter().map(|d| s.eval(d)).collect();
    count_errors(&scores, first_class)
}

// Serialized form.

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TrainingBlock {
    points: Matrix,
    labels: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    tool_version: String,
    seed: u64,
    q: usize,
    d: usize,
    depth_kind: DepthKind,
    degree: u32,
    #[serde(with = "crate::sig17::vec")]
    priors: Vec<f64>,
    class_names: Vec<String>,
    feature_names: Vec<String>,
    label_column: Option<String>,
    outsider_rule: OutsiderRule,
    separators: Vec<Separator>,
    training: TrainingBlock,
}

impl Model {
    /// Versioned JSON document; weights are written with 17 significant
    /// digits so that reading and rewriting is lossless.
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            q: self.q(),
            d: self.d(),
            depth_kind: self.depth_kind,
            degree: self.degree,
            priors: self.priors.clone(),
            class_names: self.metadata.class_names.clone(),
            feature_names: self.metadata.feature_names.clone(),
            label_column: self.metadata.label_column.clone(),
            outsider_rule: self.outsider,
            separators: self.separators.clone(),
            training: TrainingBlock {
                points: self.train.points().clone(),
                labels: self.train.labels().to_vec(),
            },
        };
        let mut s =
            serde_json::to_string_pretty(&file).map_err(|e| Error::ModelFormat(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Model> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if file.version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported model version {}",
                file.version
            )));
        }
        let train = LabeledDataset::new(file.training.points, file.training.labels, file.q)
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        if train.d() != file.d {
            return Err(Error::ModelFormat("training matrix width differs from d".into()));
        }
        for s in &file.separators {
            if s.weights.len() != s.monomials.len()
                || s.monomials.iter().any(|m| m.exponents().len() != file.q)
            {
                return Err(Error::ModelFormat("malformed separator".into()));
            }
        }
        let mut model = Model::assemble(
            train,
            file.depth_kind,
            file.degree,
            file.seed,
            file.separators,
            file.outsider_rule,
            ModelMetadata {
                class_names: file.class_names,
                feature_names: file.feature_names,
                label_column: file.label_column,
            },
            None,
        )?;
        model.priors = file.priors;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn cloud(n: usize, center: &[f64], seed: u64) -> Matrix {
        let mut r = rng::stream(seed, 0);
        let d = center.len();
        let data: Vec<f64> = (0..n * d)
            .map(|i| center[i % d] + Distribution::<f64>::sample(&StandardNormal, &mut r))
            .collect();
        Matrix::new(n, d, data).unwrap()
    }

    fn two_clouds(sep: f64) -> LabeledDataset {
        LabeledDataset::from_classes(&[cloud(60, &[0.0, 0.0], 1), cloud(60, &[sep, 0.0], 2)])
            .unwrap()
    }

    #[test]
    fn separated_clouds_train_without_error() {
        let ds = two_clouds(10.0);
        let model = train(&ds, &Config::default()).unwrap();
        assert_eq!(model.separators().len(), 1);
        assert_eq!(model.separators()[0].training_amr(), 0.0);
        for i in 0..ds.n() {
            let p = model.predict(ds.points().row(i)).unwrap();
            assert!(!p.outsider);
            assert_eq!(p.label, ds.labels()[i]);
        }
    }

    #[test]
    fn training_error_reproduced_by_prediction() {
        for (sep, seed) in [(1.5, 1), (0.5, 2), (1.0, 3)] {
            let ds = LabeledDataset::from_classes(&[
                cloud(40, &[0.0, 0.0], seed),
                cloud(40, &[sep, 0.0], seed + 10),
            ])
            .unwrap();
            let model = train(&ds, &Config::default()).unwrap();
            let wrong = (0..ds.n())
                .filter(|&i| model.predict(ds.points().row(i)).unwrap().label != ds.labels()[i])
                .count();
            assert_eq!(wrong as f64 / ds.n() as f64, model.separators()[0].training_amr());
        }
    }

    #[test]
    fn three_classes_give_three_separators() {
        let ds = LabeledDataset::from_classes(&[
            cloud(30, &[0.0, 0.0], 1),
            cloud(30, &[6.0, 0.0], 2),
            cloud(30, &[0.0, 6.0], 3),
        ])
        .unwrap();
        let model = train(&ds, &Config::default()).unwrap();
        assert_eq!(model.separators().len(), 3);
        let p = model.predict(&[0.0, 6.0]).unwrap();
        assert_eq!(p.label, 2);
        assert_eq!(p.votes.iter().sum::<usize>(), 3);
    }

    #[test]
    fn too_few_points() {
        let ds = LabeledDataset::from_classes(&[
            cloud(10, &[0.0, 0.0], 1),
            cloud(2, &[3.0, 0.0], 2),
        ])
        .unwrap();
        assert!(matches!(
            train(&ds, &Config::default()),
            Err(Error::TooFewPoints { class: 1, .. })
        ));
    }

    #[test]
    fn vote_ties_go_to_deeper_class() {
        let mk = |pair, w: Vec<f64>| Separator {
            pair,
            degree: 1,
            monomials: crate::alpha::monomials(3, 1),
            weights: w,
            steps: vec![],
        };
        // 0 beats 1, 1 beats 2, 2 beats 0.
        let seps = vec![
            mk((0, 1), vec![1.0, 0.0, 0.0]),
            mk((0, 2), vec![-1.0, 0.0, 0.0]),
            mk((1, 2), vec![0.0, 1.0, 0.0]),
        ];
        let dv = DepthVector::new(vec![0.2, 0.3, 0.25]).unwrap();
        let (label, votes) = vote(&seps, &[10, 10, 10], &dv);
        assert_eq!(votes, vec![1, 1, 1]);
        assert_eq!(label, 1);
        let dv = DepthVector::new(vec![0.3, 0.3, 0.3]).unwrap();
        assert_eq!(vote(&seps, &[10, 10, 10], &dv).0, 0);
    }

    #[test]
    fn zero_score_goes_to_deeper_then_larger_class() {
        let s = Separator {
            pair: (0, 1),
            degree: 1,
            monomials: crate::alpha::monomials(2, 1),
            weights: vec![1.0, -1.0],
            steps: vec![],
        };
        let dv = DepthVector::new(vec![0.4, 0.4]).unwrap();
        assert_eq!(vote(std::slice::from_ref(&s), &[5, 9], &dv).0, 1);
        assert_eq!(vote(std::slice::from_ref(&s), &[9, 9], &dv).0, 0);
        // A point on the depth axis of class 1 scores 0 under D_X - D_X D_Y.
        let s = Separator {
            weights: vec![1.0, 0.0, 0.0, -1.0, 0.0],
            monomials: crate::alpha::monomials(2, 2),
            degree: 2,
            ..s
        };
        let dv = DepthVector::new(vec![0.0, 0.3]).unwrap();
        assert_eq!(s.eval(&dv), 0.0);
        assert_eq!(vote(std::slice::from_ref(&s), &[9, 5], &dv).0, 1);
    }

    #[test]
    fn knn_euclid_on_training_point() {
        let ds = two_clouds(4.0);
        let model = train(&ds, &Config::default()).unwrap();
        let x = ds.points().row(70).to_vec();
        assert_eq!(model.classify_outsider(&x), 1);
    }

    #[test]
    fn max_mahalanobis_depth_at_class_mean() {
        let ds = two_clouds(4.0);
        let config = Config {
            outsider: OutsiderRule::MaxMahalanobisDepth {
                estimator: Estimator::Moment,
            },
            ..Config::default()
        };
        let model = train(&ds, &config).unwrap();
        let mu = estimate_moments(&ds.class_points(0)).unwrap().mu;
        assert_eq!(model.classify_outsider(&mu), 0);
    }

    #[test]
    fn mahalanobis_knn_uses_pooled_metric() {
        // Both classes are (+-1, +-10) around their centers, so the pooled
        // scatter is proportional to diag(1, 100).
        let square = |cx: f64, cy: f64| {
            Matrix::from_rows(&[
                [cx - 1.0, cy - 10.0],
                [cx + 1.0, cy - 10.0],
                [cx - 1.0, cy + 10.0],
                [cx + 1.0, cy + 10.0],
            ])
            .unwrap()
        };
        let ds = LabeledDataset::from_classes(&[square(0.0, 0.0), square(3.0, 40.0)]).unwrap();
        let config = Config {
            outsider: OutsiderRule::KnnMahalanobis {
                k: 1,
                estimator: Estimator::Moment,
            },
            ..Config::default()
        };
        let model = train(&ds, &config).unwrap();
        // (2, 18) is Euclid-closer to (1, 10) of class 0 but closer to
        // (2, 30) of class 1 along the high-variance axis.
        let x = [2.0, 18.0];
        let euclid = OutsiderState::Euclid;
        assert!(distance(&euclid, &x, &[1.0, 10.0]) < distance(&euclid, &x, &[2.0, 30.0]));
        assert_eq!(model.train.labels()[neighbours(model.train.points(), &euclid, &x, None)[0]], 0);
        assert_eq!(model.classify_outsider(&x), 1);
    }

    #[test]
    fn random_prior_is_deterministic() {
        let ds = two_clouds(4.0);
        let config = Config {
            outsider: OutsiderRule::RandomPrior,
            seed: 3,
            ..Config::default()
        };
        let model = train(&ds, &config).unwrap();
        let x = [100.0, 100.0];
        let a = model.predict(&x).unwrap();
        assert!(a.outsider);
        assert_eq!(a, model.predict(&x).unwrap());
    }

    #[test]
    fn knn_k_selection_is_in_range() {
        let ds = two_clouds(2.0);
        let config = Config {
            knn_max_k: Some(7),
            ..Config::default()
        };
        let model = train(&ds, &config).unwrap();
        let k = model.outsider_rule().k().unwrap();
        assert!((1..=7).contains(&k));
    }

    #[test]
    fn cross_validated_degree() {
        let ds = two_clouds(2.0);
        let config = Config {
            degree: DegreeChoice::CrossValidated { folds: 4 },
            ..Config::default()
        };
        let model = train(&ds, &config).unwrap();
        assert!(CV_DEGREES.contains(&model.degree()));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let ds = two_clouds(1.5);
        let config = Config {
            outsider: OutsiderRule::KnnMahalanobis {
                k: 3,
                estimator: Estimator::Moment,
            },
            seed: 9,
            ..Config::default()
        };
        let model = train(&ds, &config).unwrap();
        let text = model.to_json().unwrap();
        let back = Model::from_json(&text).unwrap();
        assert_eq!(back.to_json().unwrap(), text);
        assert_eq!(back.separators(), model.separators());
        for x in [[0.3, 0.1], [1.0, -0.5], [50.0, 0.0]] {
            assert_eq!(back.predict(&x).unwrap(), model.predict(&x).unwrap());
        }
        assert!(Model::from_json(&text.replace("\"version\": 1", "\"version\": 7")).is_err());
    }
}
