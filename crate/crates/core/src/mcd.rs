//! Minimum covariance determinant estimator (random starts + C-steps).

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::depth::{covariance_about, factor_with_ridge, LocationScatter};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::rng;

/// Random-start C-step MCD.
///
/// Each start draws a `(d+1)`-subset, enlarged with further random points
/// while its covariance is singular, then iterates C-steps until the
/// log-determinant stops decreasing by more than `tolerance`. The subset of
/// size `h = floor((n + d + 1) / 2)` with the smallest determinant wins; its
/// scatter is rescaled by `median(d_i^2) / chi2_d(0.5)` for consistency at
/// the normal model.
#[derive(Clone, Debug)]
pub struct McdEstimator {
    pub restarts: usize,
    pub tolerance: f64,
    pub max_csteps: usize,
    /// Regularize singular subset covariances instead of failing.
    pub ridge_singular: bool,
}

impl Default for McdEstimator {
    fn default() -> Self {
        McdEstimator {
            restarts: 500,
            tolerance: 1e-12,
            max_csteps: 200,
            ridge_singular: false,
        }
    }
}

/// MCD with the default settings.
pub fn estimate_mcd(data: &Matrix, seed: u64) -> Result<LocationScatter> {
    McdEstimator::default().fit(data, seed)
}

struct Candidate {
    log_det: f64,
    subset: Vec<usize>,
}

impl McdEstimator {
    pub fn subset_size(n: usize, d: usize) -> usize {
        (n + d + 1) / 2
    }

    pub fn fit(&self, data: &Matrix, seed: u64) -> Result<LocationScatter> {
        let n = data.rows();
        let d = data.cols();
        if n < d + 1 || d == 0 {
            return Err(Error::DegenerateData(format!(
                "MCD needs at least d + 1 = {} points, got {n}",
                d + 1
            )));
        }
        let h = Self::subset_size(n, d);
        let best = if h >= n {
            let all: Vec<usize> = (0..n).collect();
            let (_, chol) = self.subset_fit(data, &all)?;
            Candidate {
                log_det: chol.log_det(),
                subset: all,
            }
        } else {
            let outcomes: Vec<Result<Option<Candidate>>> = (0..self.restarts.max(1))
                .into_par_iter()
                .map(|r| self.run_start(data, h, seed, r as u64))
                .collect();
            let mut best: Option<Candidate> = None;
            for o in outcomes {
                if let Some(c) = o? {
                    if best.as_ref().is_none_or(|b| c.log_det < b.log_det) {
                        best = Some(c);
                    }
                }
            }
            best.ok_or_else(|| {
                Error::DegenerateData("every MCD start has a singular covariance".into())
            })?
        };

        let sub = data.select_rows(&best.subset);
        let mu = mean(&sub);
        let raw = covariance_about(&sub, &mu, sub.rows() - 1);
        let chol = if self.ridge_singular {
            factor_with_ridge(&raw)?
        } else {
            Cholesky::factor(&raw).map_err(|_| {
                Error::DegenerateData("best MCD subset has a singular covariance".into())
            })?
        };
        let mut dist: Vec<f64> = data
            .row_iter()
            .map(|r| chol.quadratic_form(&diff(r, &mu)))
            .collect();
        dist.sort_by(f64::total_cmp);
        let med = median_sorted(&dist);
        let chi_med = ChiSquared::new(d as f64)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .inverse_cdf(0.5);
        let factor = med / chi_med;
        if !(factor > 0.0) {
            return Err(Error::DegenerateData(
                "MCD consistency factor is zero".into(),
            ));
        }
        Ok(LocationScatter {
            mu,
            sigma: raw.scale(factor),
        })
    }

    /// Mean and factored covariance of the rows in `idx`.
    fn subset_fit(&self, data: &Matrix, idx: &[usize]) -> Result<(Vec<f64>, Cholesky)> {
        let sub = data.select_rows(idx);
        let mu = mean(&sub);
        let cov = covariance_about(&sub, &mu, idx.len().saturating_sub(1));
        let chol = if self.ridge_singular {
            factor_with_ridge(&cov)?
        } else {
            Cholesky::factor(&cov)?
        };
        Ok((mu, chol))
    }

    fn run_start(&self, data: &Matrix, h: usize, seed: u64, start: u64) -> Result<Option<Candidate>> {
        let n = data.rows();
        let d = data.cols();
        let mut rng = rng::stream(seed, start);
        let mut subset = sample(&mut rng, n, d + 1).into_vec();
        let (mut mu, mut chol) = loop {
            let sub = data.select_rows(&subset);
            let m = mean(&sub);
            match Cholesky::factor(&covariance_about(&sub, &m, subset.len() - 1)) {
                Ok(c) => break (m, c),
                Err(_) if subset.len() < h => {
                    let extra = loop {
                        let k = rng.random_range(0..n);
                        if !subset.contains(&k) {
                            break k;
                        }
                    };
                    subset.push(extra);
                }
                Err(_) if self.ridge_singular => match self.subset_fit(data, &subset) {
                    Ok(fit) => break fit,
                    Err(_) => return Ok(None),
                },
                Err(_) => return Ok(None),
            }
        };

        let mut log_det = f64::INFINITY;
        let mut current: Vec<usize> = Vec::new();
        for _ in 0..self.max_csteps {
            let mut order: Vec<(f64, usize)> = data
                .row_iter()
                .enumerate()
                .map(|(i, r)| (chol.quadratic_form(&diff(r, &mu)), i))
                .collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut next: Vec<usize> = order[..h].iter().map(|&(_, i)| i).collect();
            next.sort_unstable();
            if next == current {
                break;
            }
            let (new_mu, new_chol) = match self.subset_fit(data, &next) {
                Ok(fit) => fit,
                Err(Error::NotPositiveDefinite { .. }) => {
                    // An h-subset on a hyperplane: determinant zero.
                    return Err(Error::DegenerateData(
                        "MCD subset with singular covariance (exact fit)".into(),
                    ));
                }
                Err(e) => return Err(e),
            };
            let new_log_det = new_chol.log_det();
            let converged = log_det - new_log_det < self.tolerance;
            if new_log_det <= log_det {
                mu = new_mu;
                chol = new_chol;
                current = next;
                log_det = new_log_det;
            }
            if converged {
                break;
            }
        }
        if current.is_empty() {
            return Ok(None);
        }
        Ok(Some(Candidate {
            log_det,
            subset: current,
        }))
    }
}

fn mean(m: &Matrix) -> Vec<f64> {
    let mut mu = vec![0.0; m.cols()];
    for r in m.row_iter() {
        for (a, b) in mu.iter_mut().zip(r) {
            *a += b;
        }
    }
    let n = m.rows().max(1) as f64;
    mu.iter_mut().for_each(|v| *v /= n);
    mu
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth::estimate_moments;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_sample(n: usize, d: usize, seed: u64) -> Matrix {
        let mut r = rng::stream(seed, 0);
        let data: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut r)).collect();
        Matrix::new(n, d, data).unwrap()
    }

    fn det2(m: &Matrix) -> f64 {
        m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
    }

    #[test]
    fn clean_sample_location_near_mean() {
        let data = normal_sample(100, 2, 11);
        let mcd = McdEstimator {
            restarts: 100,
            ..Default::default()
        }
        .fit(&data, 5)
        .unwrap();
        let mom = estimate_moments(&data).unwrap();
        for k in 0..2 {
            assert!((mcd.mu[k] - mom.mu[k]).abs() < 0.5);
        }
    }

    #[test]
    fn resists_far_contamination() {
        let mut rows: Vec<Vec<f64>> = normal_sample(80, 2, 3).row_iter().map(<[f64]>::to_vec).collect();
        let far = normal_sample(20, 2, 4);
        rows.extend(far.row_iter().map(|r| vec![r[0] + 100.0, r[1] + 100.0]));
        let data = Matrix::from_rows(&rows).unwrap();
        let mcd = McdEstimator {
            restarts: 100,
            ..Default::default()
        }
        .fit(&data, 1)
        .unwrap();
        let mom = estimate_moments(&data).unwrap();
        assert!(mcd.mu[0].abs() < 1.0 && mcd.mu[1].abs() < 1.0, "{:?}", mcd.mu);
        assert!(det2(&mcd.sigma) < det2(&mom.sigma));
    }

    #[test]
    fn forced_subset_matches_moments_up_to_scale() {
        let data = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.2], [0.3, 1.0]]).unwrap();
        let mcd = estimate_mcd(&data, 0).unwrap();
        let mom = estimate_moments(&data).unwrap();
        for k in 0..2 {
            assert!((mcd.mu[k] - mom.mu[k]).abs() < 1e-12);
        }
        let ratio = mcd.sigma[(0, 0)] / mom.sigma[(0, 0)];
        assert!(ratio > 0.0);
        assert!(mcd.sigma.max_abs_diff(&mom.sigma.scale(ratio)) < 1e-12);
    }

    #[test]
    fn deterministic_given_seed() {
        let data = normal_sample(60, 3, 9);
        let est = McdEstimator {
            restarts: 50,
            ..Default::default()
        };
        assert_eq!(est.fit(&data, 42).unwrap(), est.fit(&data, 42).unwrap());
    }

    #[test]
    fn collinear_data_is_degenerate() {
        let rows: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 2.0 * i as f64]).collect();
        let data = Matrix::from_rows(&rows).unwrap();
        assert!(matches!(
            estimate_mcd(&data, 0),
            Err(Error::DegenerateData(_))
        ));
        assert!(estimate_mcd(&Matrix::from_rows(&[[0.0, 0.0]]).unwrap(), 0).is_err());
    }

    #[test]
    fn ridge_mode_handles_constant_column() {
        let rows: Vec<[f64; 2]> = (0..12).map(|i| [((i * 7) % 5) as f64, 3.0]).collect();
        let data = Matrix::from_rows(&rows).unwrap();
        let est = McdEstimator {
            restarts: 20,
            ridge_singular: true,
            ..Default::default()
        };
        let ls = est.fit(&data, 0).unwrap();
        assert!((ls.mu[1] - 3.0).abs() < 1e-12);
    }
}
