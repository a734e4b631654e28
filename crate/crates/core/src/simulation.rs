//! Data generators for the simulated settings and the experiment and
//! timing protocols built on them.

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::classifier::{train, Config};
use crate::depth::LabeledDataset;
use crate::error::{Error, Result};
use crate::evaluation::{amr, boxplot_stats, BoxStats};
use crate::linalg::{Cholesky, Matrix};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub enum DistributionSpec {
    Normal { mean: Vec<f64>, cov: Matrix },
    /// Elliptical Cauchy: `loc + L z / |w|` with `L L' = scatter`.
    Cauchy { loc: Vec<f64>, scatter: Matrix },
    /// Independent exponential coordinates with the given rates, shifted.
    Exponential { rates: Vec<f64>, shift: Vec<f64> },
    /// Independent coordinates `MixN(mu, s1, s2)`: `mu - s1 |N|` or
    /// `mu + s2 |N|` with probability 1/2 each.
    MixN { params: Vec<(f64, f64, f64)> },
    /// Training draws replace exactly `round(fraction * n)` points of
    /// `base` by draws from `contaminant`; test draws come from `base` only.
    Contaminated {
        base: Box<DistributionSpec>,
        contaminant: Box<DistributionSpec>,
        fraction: f64,
    },
}

fn lower_factor(m: &Matrix) -> Result<Matrix> {
    Ok(Cholesky::factor(m)?.lower().clone())
}

impl DistributionSpec {
    pub fn normal(mean: &[f64], cov: Matrix) -> Self {
        DistributionSpec::Normal {
            mean: mean.to_vec(),
            cov,
        }
    }

    pub fn cauchy(loc: &[f64], scatter: Matrix) -> Self {
        DistributionSpec::Cauchy {
            loc: loc.to_vec(),
            scatter,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DistributionSpec::Normal { mean, .. } => mean.len(),
            DistributionSpec::Cauchy { loc, .. } => loc.len(),
            DistributionSpec::Exponential { rates, .. } => rates.len(),
            DistributionSpec::MixN { params } => params.len(),
            DistributionSpec::Contaminated { base, .. } => base.dim(),
        }
    }

    /// `n` i.i.d. draws from the clean distribution.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Matrix> {
        let d = self.dim();
        let mut data = Vec::with_capacity(n * d);
        match self {
            DistributionSpec::Normal { mean, cov } => {
                let l = lower_factor(cov)?;
                for _ in 0..n {
                    let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                    let lz = l.mat_vec(&z);
                    data.extend(mean.iter().zip(lz).map(|(m, v)| m + v));
                }
            }
            DistributionSpec::Cauchy { loc, scatter } => {
                let l = lower_factor(scatter)?;
                for _ in 0..n {
                    let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                    let w: f64 = StandardNormal.sample(rng);
                    let lz = l.mat_vec(&z);
                    data.extend(loc.iter().zip(lz).map(|(m, v)| m + v / w.abs()));
                }
            }
            DistributionSpec::Exponential { rates, shift } => {
                for _ in 0..n {
                    for (rate, s) in rates.iter().zip(shift) {
                        let u: f64 = 1.0 - rng.random::<f64>();
                        data.push(s - u.ln() / rate);
                    }
                }
            }
            DistributionSpec::MixN { params } => {
                for _ in 0..n {
                    for &(mu, s1, s2) in params {
                        let z: f64 = StandardNormal.sample(rng);
                        let v = if rng.random::<bool>() {
                            mu - s1 * z.abs()
                        } else {
                            mu + s2 * z.abs()
                        };
                        data.push(v);
                    }
                }
            }
            DistributionSpec::Contaminated { base, .. } => return base.sample(n, rng),
        }
        Matrix::new(n, d, data)
    }

    /// Training draws; the flags mark contaminant rows.
    pub fn sample_training<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> Result<(Matrix, Vec<bool>)> {
        match self {
            DistributionSpec::Contaminated {
                base,
                contaminant,
                fraction,
            } => {
                let bad = (fraction * n as f64).round() as usize;
                let clean = base.sample(n - bad, rng)?;
                let dirty = contaminant.sample(bad, rng)?;
                let mut tags = vec![false; n - bad];
                tags.extend(std::iter::repeat_n(true, bad));
                Ok((clean.vstack(&dirty)?, tags))
            }
            _ => Ok((self.sample(n, rng)?, vec![false; n])),
        }
    }
}

fn cov(a: f64, b: f64, c: f64) -> Matrix {
    Matrix::from_rows(&[[a, b], [b, c]]).unwrap()
}

/// The ten two-class settings of the simulation study, numbered 1..=10.
pub fn setting(id: u32) -> Result<[DistributionSpec; 2]> {
    use DistributionSpec as S;
    let sigma = || cov(1.0, 1.0, 4.0);
    let sigma4 = || cov(4.0, 4.0, 16.0);
    let contaminated = |base: S| S::Contaminated {
        base: Box::new(base),
        contaminant: Box::new(S::normal(&[10.0, 10.0], sigma())),
        fraction: 0.1,
    };
    let exp = |r1: f64, r2: f64, s: f64| S::Exponential {
        rates: vec![r1, r2],
        shift: vec![s, s],
    };
    Ok(match id {
        1 => [S::normal(&[0.0, 0.0], sigma()), S::normal(&[1.0, 1.0], sigma())],
        2 => [S::normal(&[0.0, 0.0], sigma()), S::normal(&[1.0, 1.0], sigma4())],
        3 => [S::cauchy(&[0.0, 0.0], sigma()), S::cauchy(&[1.0, 1.0], sigma())],
        4 => [S::cauchy(&[0.0, 0.0], sigma()), S::cauchy(&[1.0, 1.0], sigma4())],
        5 => {
            let [a, b] = setting(1)?;
            [contaminated(a), b]
        }
        6 => {
            let [a, b] = setting(2)?;
            [contaminated(a), b]
        }
        7 => [exp(1.0, 1.0, 0.0), exp(1.0, 1.0, 1.0)],
        8 => [exp(1.0, 0.5, 0.0), exp(0.5, 1.0, 1.0)],
        9 => [
            S::MixN {
                params: vec![(0.0, 1.0, 2.0), (0.0, 1.0, 4.0)],
            },
            S::MixN {
                params: vec![(1.0, 1.0, 2.0), (1.0, 1.0, 4.0)],
            },
        ],
        10 => [S::normal(&[0.0, 0.0], Matrix::identity(2)), exp(1.0, 1.0, 0.0)],
        _ => {
            return Err(Error::InvalidArgument(format!(
                "setting {id} is not in 1..=10"
            )))
        }
    })
}

/// The two d-variate normal pairs of the timing study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimingSetting {
    /// `N(0, I)` against `N(0.25 * 1, I)`.
    Shift,
    /// `N(0, I)` against `N((0.25, 0, ..., 0), 5 I)`.
    LocationScale,
}

impl TimingSetting {
    pub fn pair(self, d: usize) -> [DistributionSpec; 2] {
        let first = DistributionSpec::normal(&vec![0.0; d], Matrix::identity(d));
        let second = match self {
            TimingSetting::Shift => DistributionSpec::normal(&vec![0.25; d], Matrix::identity(d)),
            TimingSetting::LocationScale => {
                let mut mean = vec![0.0; d];
                mean[0] = 0.25;
                DistributionSpec::normal(&mean, Matrix::identity(d).scale(5.0))
            }
        };
        [first, second]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    /// Label written to the `setting` column.
    pub setting: String,
    pub classes: [DistributionSpec; 2],
    pub n_train: usize,
    pub n_test: usize,
    pub replications: usize,
    pub seed: u64,
}

impl ExperimentPlan {
    /// 200 training and 500 test points per class.
    pub fn for_setting(id: u32, replications: usize, seed: u64) -> Result<Self> {
        Ok(ExperimentPlan {
            setting: id.to_string(),
            classes: setting(id)?,
            n_train: 200,
            n_test: 500,
            replications,
            seed,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 || self.replications == 0 {
            return Err(Error::InvalidArgument(
                "training size, test size and replications must be positive".into(),
            ));
        }
        if self.classes[0].dim() != self.classes[1].dim() {
            return Err(Error::DimensionMismatch(
                "class distributions differ in dimension".into(),
            ));
        }
        Ok(())
    }
}

/// One training and one test set of a replication, drawn from `stream`.
pub fn draw_replication<R: Rng + ?Sized>(
    plan: &ExperimentPlan,
    stream: &mut R,
) -> Result<(LabeledDataset, LabeledDataset, Vec<bool>)> {
    let (a, ta) = plan.classes[0].sample_training(plan.n_train, stream)?;
    let (b, tb) = plan.classes[1].sample_training(plan.n_train, stream)?;
    let train = LabeledDataset::from_classes(&[a, b])?;
    let test = LabeledDataset::from_classes(&[
        plan.classes[0].sample(plan.n_test, stream)?,
        plan.classes[1].sample(plan.n_test, stream)?,
    ])?;
    let mut tags = ta;
    tags.extend(tb);
    Ok((train, test, tags))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AmrSample {
    pub setting: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmrSummary {
    pub boxplot: BoxStats,
    pub mean: f64,
    pub sd: f64,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

impl AmrSample {
    pub fn summary(&self) -> Result<AmrSummary> {
        let boxplot = boxplot_stats(&self.values)?;
        let (mean, sd) = mean_sd(&self.values);
        Ok(AmrSummary { boxplot, mean, sd })
    }

    /// `setting,replication,amr` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("setting,replication,amr\n");
        for (r, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "{},{r},{v}", self.setting);
        }
        s
    }
}

impl AmrSummary {
    pub fn to_csv(&self, setting: &str) -> String {
        let b = &self.boxplot;
        format!(
            "setting,min,q1,median,q3,max,mean,sd\n{setting},{},{},{},{},{},{},{}\n",
            b.min, b.q1, b.median, b.q3, b.max, self.mean, self.sd
        )
    }
}

/// Runs every replication of `plan`. Replication `r` draws from its own
/// stream `(seed, r)` and trains with a seed taken from that stream, so
/// results do not depend on scheduling.
pub fn run_experiment(plan: &ExperimentPlan, config: &Config) -> Result<AmrSample> {
    plan.validate()?;
    let values = (0..plan.replications)
        .into_par_iter()
        .map(|r| {
            replication_amr(plan, config, r).map_err(|e| Error::ReplicationFailed {
                index: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(AmrSample {
        setting: plan.setting.clone(),
        values,
    })
}

fn replication_amr(plan: &ExperimentPlan, config: &Config, r: usize) -> Result<f64> {
    let mut stream = rng::stream(plan.seed, r as u64);
    let (train_set, test_set, _) = draw_replication(plan, &mut stream)?;
    let config = Config {
        seed: stream.random(),
        ..config.clone()
    };
    let model = train(&train_set, &config)?;
    let predicted: Vec<usize> = model
        .predict_rows(test_set.points())?
        .iter()
        .map(|p| p.label)
        .collect();
    amr(&predicted, test_set.labels())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimingRow {
    pub d: usize,
    pub n: usize,
    pub mean_s: f64,
    pub sd_s: f64,
}

/// Test points per class in a timing run.
pub const TIMING_TEST_PER_CLASS: usize = 1250;

/// Wall-clock seconds of training on `n / 2` points per class and
/// classifying `2 * 1250` points, for every `(d, n)` cell. Runs serially on
/// a one-thread pool; data generation is not timed.
pub fn run_timing(
    cells: &[(usize, usize)],
    which: TimingSetting,
    repetitions: usize,
    config: &Config,
    seed: u64,
) -> Result<Vec<TimingRow>> {
    if cells.is_empty() || repetitions == 0 {
        return Err(Error::InvalidArgument(
            "timing needs at least one cell and one repetition".into(),
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| {
        cells
            .iter()
            .enumerate()
            .map(|(c, &(d, n))| {
                if d == 0 || n < 2 * (d + 1) {
                    return Err(Error::InvalidArgument(format!(
                        "timing cell d={d} n={n} is too small"
                    )));
                }
                let plan = ExperimentPlan {
                    setting: format!("d={d} n={n}"),
                    classes: which.pair(d),
                    n_train: n / 2,
                    n_test: TIMING_TEST_PER_CLASS,
                    replications: repetitions,
                    seed,
                };
                let times = (0..repetitions)
                    .map(|r| {
                        let mut stream = rng::stream(seed, ((c as u64) << 32) | r as u64);
                        let (train_set, test_set, _) = draw_replication(&plan, &mut stream)?;
                        let start = Instant::now();
                        let model = train(&train_set, config)?;
                        model.predict_rows(test_set.points())?;
                        Ok(start.elapsed().as_secs_f64())
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let (mean_s, sd_s) = mean_sd(&times);
                Ok(TimingRow { d, n, mean_s, sd_s })
            })
            .collect()
    })
}

/// `d,n,mean_s,sd_s` rows.
pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut s = String::from("d,n,mean_s,sd_s\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.d, r.n, r.mean_s, r.sd_s);
    }
    s
}

/// Text table with one row per `d` and a `mean (sd)` column per `n`.
pub fn timing_table(rows: &[TimingRow]) -> String {
    let mut ds: Vec<usize> = rows.iter().map(|r| r.d).collect();
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ds.sort_unstable();
    ds.dedup();
    ns.sort_unstable();
    ns.dedup();
    let mut s = format!("{:>6}", "d \\ n");
    for n in &ns {
        let _ = write!(s, " {n:>18}");
    }
    s.push('\n');
    for d in &ds {
        let _ = write!(s, "{d:>6}");
        for n in &ns {
            match rows.iter().find(|r| r.d == *d && r.n == *n) {
                Some(r) => {
                    let _ = write!(s, " {:>18}", format!("{:.3} ({:.3})", r.mean_s, r.sd_s));
                }
                None => {
                    let _ = write!(s, " {:>18}", "-");
                }
            }
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth::estimate_moments;

    const N: usize = 100_000;

    fn col_median(m: &Matrix, c: usize) -> f64 {
        let mut v = m.column(c);
        v.sort_by(f64::total_cmp);
        0.5 * (v[N / 2 - 1] + v[N / 2])
    }

    #[test]
    fn normal_covariance() {
        let spec = DistributionSpec::normal(&[0.0, 0.0], cov(1.0, 1.0, 4.0));
        let m = spec.sample(N, &mut rng::stream(1, 0)).unwrap();
        let est = estimate_moments(&m).unwrap();
        assert!(est.sigma.max_abs_diff(&cov(1.0, 1.0, 4.0)) < 0.1);
    }

    #[test]
    fn cauchy_median() {
        let spec = DistributionSpec::cauchy(&[1.0, 1.0], cov(1.0, 1.0, 4.0));
        let m = spec.sample(N, &mut rng::stream(2, 0)).unwrap();
        for c in 0..2 {
            assert!((col_median(&m, c) - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn mixn_mean() {
        let spec = DistributionSpec::MixN {
            params: vec![(0.0, 1.0, 2.0)],
        };
        let m = spec.sample(N, &mut rng::stream(3, 0)).unwrap();
        let mean = m.column(0).iter().sum::<f64>() / N as f64;
        let target = 0.5 * (2.0f64 / std::f64::consts::PI).sqrt();
        assert!((mean - target).abs() < 0.02, "{mean}");
    }

    #[test]
    fn exponential_means_use_rates() {
        let spec = DistributionSpec::Exponential {
            rates: vec![1.0, 0.5],
            shift: vec![1.0, 0.0],
        };
        let m = spec.sample(N, &mut rng::stream(4, 0)).unwrap();
        let mean0 = m.column(0).iter().sum::<f64>() / N as f64;
        let mean1 = m.column(1).iter().sum::<f64>() / N as f64;
        assert!((mean0 - 2.0).abs() < 0.02);
        assert!((mean1 - 2.0).abs() < 0.04);
        assert!(m.column(0).iter().all(|&v| v >= 1.0));
    }

    #[test]
    fn contamination_only_in_training() {
        let [a, _] = setting(5).unwrap();
        let (m, tags) = a.sample_training(200, &mut rng::stream(5, 0)).unwrap();
        assert_eq!(tags.iter().filter(|&&t| t).count(), 20);
        for (row, &t) in m.row_iter().zip(&tags) {
            if !t {
                assert!(row[0] < 6.0);
            }
        }
        let test = a.sample(2000, &mut rng::stream(5, 1)).unwrap();
        // The contaminant sits at (10, 10); clean draws stay far from it.
        assert!(test.row_iter().all(|r| r[0] < 7.0));
    }

    #[test]
    fn settings_cover_one_to_ten() {
        for id in 1..=10 {
            let [a, b] = setting(id).unwrap();
            assert_eq!(a.dim(), 2);
            assert_eq!(b.dim(), 2);
        }
        assert!(setting(0).is_err());
        assert!(setting(11).is_err());
    }

    #[test]
    fn zero_test_size_rejected() {
        let mut plan = ExperimentPlan::for_setting(1, 2, 0).unwrap();
        plan.n_test = 0;
        assert!(run_experiment(&plan, &Config::default()).is_err());
    }

    #[test]
    fn replications_are_order_independent() {
        let plan = ExperimentPlan {
            n_train: 20,
            n_test: 30,
            ..ExperimentPlan::for_setting(1, 4, 11).unwrap()
        };
        let all = run_experiment(&plan, &Config::default()).unwrap();
        assert_eq!(all, run_experiment(&plan, &Config::default()).unwrap());
        for r in (0..4).rev() {
            assert_eq!(replication_amr(&plan, &Config::default(), r).unwrap(), all.values[r]);
        }
    }

    #[test]
    fn summary_and_csv() {
        let s = AmrSample {
            setting: "1".into(),
            values: vec![0.25, 0.5],
        };
        assert_eq!(s.to_csv(), "setting,replication,amr\n1,0,0.25\n1,1,0.5\n");
        let sum = s.summary().unwrap();
        assert_eq!(sum.mean, 0.375);
        assert!((sum.sd - 0.03125f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn timing_table_layout() {
        let rows = [
            TimingRow { d: 5, n: 200, mean_s: 0.5, sd_s: 0.01 },
            TimingRow { d: 5, n: 500, mean_s: 1.5, sd_s: 0.02 },
        ];
        let t = timing_table(&rows);
        assert!(t.contains("0.500 (0.010)"));
        assert_eq!(t.lines().count(), 2);
        assert_eq!(timing_csv(&rows), "d,n,mean_s,sd_s\n5,200,0.5,0.01\n5,500,1.5,0.02\n");
    }
}
