//! Error rates, split schemes and the benchmark harness.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::classifier::{train, Config};
use crate::depth::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng;

/// Fraction of positions where `predicted` and `truth` differ.
pub fn amr(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    let wrong = predicted.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// Fold id in `0..k` for every point; each class is shuffled with its own
/// stream and dealt round-robin, continuing where the previous class
/// stopped, so fold sizes differ by at most one.
pub fn stratified_folds(labels: &[usize], q: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || k > labels.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot split {} points into {k} folds",
            labels.len()
        )));
    }
    let mut fold = vec![0; labels.len()];
    let mut offset = 0;
    for c in 0..q {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng::stream(seed, c as u64));
        for (pos, &i) in idx.iter().enumerate() {
            fold[i] = (offset + pos) % k;
        }
        offset += idx.len();
    }
    Ok(fold)
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainSize {
    /// Training points taken from each class, in class order.
    PerClass(Vec<usize>),
    /// Training points taken from the start of the (shuffled) data.
    Total(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum SplitScheme {
    /// Single split; the rest of the data is the test set. With
    /// `shuffle`, rows are permuted by that seed before splitting.
    TrainTest { train: TrainSize, shuffle: Option<u64> },
    /// Stratified k-fold cross-validation.
    KFold { k: usize, seed: u64 },
    LeaveOneOut,
}

impl SplitScheme {
    /// `(training rows, test rows)` per fold.
    pub fn splits(&self, ds: &LabeledDataset) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
        let n = ds.n();
        match self {
            SplitScheme::TrainTest { train, shuffle } => {
                let mut order: Vec<usize> = (0..n).collect();
                if let Some(s) = shuffle {
                    order.shuffle(&mut rng::stream(*s, 0));
                }
                let in_train: Vec<bool> = match train {
                    TrainSize::Total(t) => {
                        if *t == 0 || *t >= n {
                            return Err(Error::InvalidArgument(format!(
                                "training size {t} leaves no train or test rows out of {n}"
                            )));
                        }
                        let mut v = vec![false; n];
                        for &i in &order[..*t] {
                            v[i] = true;
                        }
                        v
                    }
                    TrainSize::PerClass(sizes) => {
                        if sizes.len() != ds.q() {
                            return Err(Error::LengthMismatch {
                                left: sizes.len(),
                                right: ds.q(),
                            });
                        }
                        let mut taken = vec![0; ds.q()];
                        let mut v = vec![false; n];
                        for &i in &order {
                            let c = ds.labels()[i];
                            if taken[c] < sizes[c] {
                                taken[c] += 1;
                                v[i] = true;
                            }
                        }
                        if taken != *sizes {
                            return Err(Error::InvalidArgument(format!(
                                "requested {sizes:?} training points per class, classes have {:?}",
                                ds.class_sizes()
                            )));
                        }
                        v
                    }
                };
                let (tr, te): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| in_train[i]);
                if te.is_empty() {
                    return Err(Error::InvalidArgument("split leaves no test rows".into()));
                }
                Ok(vec![(tr, te)])
            }
            SplitScheme::KFold { k, seed } => {
                let fold = stratified_folds(ds.labels(), ds.q(), *k, *seed)?;
                Ok((0..*k)
                    .map(|f| (0..n).partition(|&i| fold[i] != f))
                    .collect())
            }
            SplitScheme::LeaveOneOut => Ok((0..n)
                .map(|i| ((0..n).filter(|&j| j != i).collect(), vec![i]))
                .collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub amr: f64,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub outsider_rate: f64,
    pub n_test: usize,
    pub folds: usize,
    /// Mean training time per fold.
    pub train_seconds: f64,
    pub test_seconds_per_point: f64,
}

struct FoldOutcome {
    rows: Vec<(usize, usize, bool)>,
    train_seconds: f64,
    test_seconds: f64,
}

/// Trains and tests on every split of `scheme`; folds run in parallel.
pub fn evaluate(ds: &LabeledDataset, scheme: &SplitScheme, config: &Config) -> Result<EvalReport> {
    let splits = scheme.splits(ds)?;
    let outcomes: Vec<Result<FoldOutcome>> = splits
        .par_iter()
        .enumerate()
        .map(|(index, (tr, te))| {
            run_fold(ds, tr, te, config).map_err(|e| Error::FoldFailed {
                index,
                source: Box::new(e),
            })
        })
        .collect();
    let q = ds.q();
    let mut confusion = vec![vec![0; q]; q];
    let (mut wrong, mut outsiders, mut n_test) = (0, 0, 0);
    let (mut train_s, mut test_s) = (0.0, 0.0);
    for o in outcomes {
        let o = o?;
        for (truth, pred, outsider) in o.rows {
            confusion[truth][pred] += 1;
            wrong += usize::from(truth != pred);
            outsiders += usize::from(outsider);
            n_test += 1;
        }
        train_s += o.train_seconds;
        test_s += o.test_seconds;
    }
    Ok(EvalReport {
        amr: wrong as f64 / n_test as f64,
        confusion,
        outsider_rate: outsiders as f64 / n_test as f64,
        n_test,
        folds: splits.len(),
        train_seconds: train_s / splits.len() as f64,
        test_seconds_per_point: test_s / n_test as f64,
    })
}

fn run_fold(ds: &LabeledDataset, tr: &[usize], te: &[usize], config: &Config) -> Result<FoldOutcome> {
    let start = Instant::now();
    let model = train(&ds.subset(tr), config)?;
    let train_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let test = ds.subset(te);
    let preds = model.predict_rows(test.points())?;
    let test_seconds = start.elapsed().as_secs_f64();
    Ok(FoldOutcome {
        rows: preds
            .iter()
            .zip(test.labels())
            .map(|(p, &t)| (t, p.label, p.outsider))
            .collect(),
        train_seconds,
        test_seconds,
    })
}

impl EvalReport {
    /// `metric,value` rows. Timings vary between runs and are only
    /// included on request.
    pub fn to_csv(&self, with_timings: bool) -> String {
        let mut s = String::from("metric,value\n");
        let _ = writeln!(s, "amr,{}", self.amr);
        let _ = writeln!(s, "outsider_rate,{}", self.outsider_rate);
        let _ = writeln!(s, "n_test,{}", self.n_test);
        let _ = writeln!(s, "folds,{}", self.folds);
        for (t, row) in self.confusion.iter().enumerate() {
            for (p, c) in row.iter().enumerate() {
                let _ = writeln!(s, "confusion_{t}_{p},{c}");
            }
        }
        if with_timings {
            let _ = writeln!(s, "train_seconds,{}", self.train_seconds);
            let _ = writeln!(s, "test_seconds_per_point,{}", self.test_seconds_per_point);
        }
        s
    }

    pub fn summary(&self, class_names: &[String]) -> String {
        let name = |i: usize| class_names.get(i).cloned().unwrap_or_else(|| i.to_string());
        let mut s = String::new();
        let _ = writeln!(s, "test points:    {} in {} fold(s)", self.n_test, self.folds);
        let _ = writeln!(s, "error rate:     {:.4}", self.amr);
        let _ = writeln!(s, "outsider rate:  {:.4}", self.outsider_rate);
        let _ = writeln!(s, "train time:     {:.4} s per fold", self.train_seconds);
        let _ = writeln!(s, "test time:      {:.6} s per point", self.test_seconds_per_point);
        let _ = writeln!(s, "confusion (rows: true class, columns: predicted):");
        let header: Vec<String> = (0..self.confusion.len()).map(name).collect();
        let _ = writeln!(s, "  \t{}", header.join("\t"));
        for (t, row) in self.confusion.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(usize::to_string).collect();
            let _ = writeln!(s, "  {}\t{}", name(t), cells.join("\t"));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Five-number summary. Quartiles are the medians of the lower and upper
/// halves; for odd sizes the median belongs to neither half.
pub fn boxplot_stats(values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("boxplot input"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let half = n / 2;
    let (lower, upper) = if n == 1 {
        (&v[..], &v[..])
    } else {
        (&v[..half], &v[n - half..])
    };
    Ok(BoxStats {
        min: v[0],
        q1: median(lower),
        median: median(&v),
        q3: median(upper),
        max: v[n - 1],
    })
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn amr_examples() {
        assert_eq!(amr(&[0, 1, 1], &[0, 1, 1]).unwrap(), 0.0);
        assert_eq!(amr(&[1, 0], &[0, 1]).unwrap(), 1.0);
        assert_eq!(amr(&[0, 1, 1, 0], &[0, 1, 1, 1]).unwrap(), 0.25);
        assert!(matches!(amr(&[0], &[0, 1]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(amr(&[], &[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn boxplot_examples() {
        let b = boxplot_stats(&[5.0, 3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!((b.min, b.q1, b.median, b.q3, b.max), (1.0, 1.5, 3.0, 4.5, 5.0));
        let b = boxplot_stats(&[0.0, 1.0]).unwrap();
        assert_eq!((b.min, b.q1, b.median, b.q3, b.max), (0.0, 0.0, 0.5, 1.0, 1.0));
        let b = boxplot_stats(&[2.0; 4]).unwrap();
        assert_eq!((b.min, b.q1, b.median, b.q3, b.max), (2.0, 2.0, 2.0, 2.0, 2.0));
        assert!(matches!(boxplot_stats(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn folds_partition_and_stratify() {
        let labels: Vec<usize> = (0..23).map(|i| usize::from(i % 3 == 0)).collect();
        let f = stratified_folds(&labels, 2, 4, 7).unwrap();
        assert_eq!(f, stratified_folds(&labels, 2, 4, 7).unwrap());
        let mut sizes = [0; 4];
        for &x in &f {
            sizes[x] += 1;
        }
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert!(stratified_folds(&labels, 2, 1, 0).is_err());
    }

    fn blobs(n: usize) -> LabeledDataset {
        let mut r = rng::stream(5, 0);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..2 {
            for _ in 0..n {
                let x: f64 = StandardNormal.sample(&mut r);
                let y: f64 = StandardNormal.sample(&mut r);
                rows.push([x + 2.0 * c as f64, y]);
                labels.push(c);
            }
        }
        LabeledDataset::new(Matrix::from_rows(&rows).unwrap(), labels, 2).unwrap()
    }

    #[test]
    fn leave_one_out_counts() {
        let ds = blobs(8);
        let report = evaluate(&ds, &SplitScheme::LeaveOneOut, &Config::default()).unwrap();
        assert_eq!(report.folds, 16);
        assert_eq!(report.n_test, 16);
        let total: usize = report.confusion.iter().flatten().sum();
        assert_eq!(total, 16);
    }

    #[test]
    fn fold_failures_carry_index() {
        let ds = blobs(3);
        let err = evaluate(&ds, &SplitScheme::KFold { k: 2, seed: 0 }, &Config::default())
            .unwrap_err();
        assert!(matches!(err, Error::FoldFailed { index: 0, .. }));
    }

    #[test]
    fn per_class_split() {
        let ds = blobs(10);
        let s = SplitScheme::TrainTest {
            train: TrainSize::PerClass(vec![6, 6]),
            shuffle: None,
        };
        let splits = s.splits(&ds).unwrap();
        assert_eq!(splits[0].0.len(), 12);
        assert_eq!(splits[0].1.len(), 8);
        let bad = SplitScheme::TrainTest {
            train: TrainSize::PerClass(vec![11, 6]),
            shuffle: None,
        };
        assert!(bad.splits(&ds).is_err());
    }
}
