//! The alpha-procedure: a stepwise linear separator in a polynomial
//! extension of the depth space.
//!
//! Depth vectors are extended by all monomials of total degree `1..=p`
//! ("basic features"). The first step picks the pair of basic features whose
//! best line through the origin misclassifies the fewest training points,
//! and replaces the pair by its projection onto the normal of that line.
//! Every later step couples the synthesized feature with each unused basic
//! feature and keeps the best coupling as long as the error strictly drops.
//! The result is a polynomial in the depths with no constant term.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::depth::DepthVector;
use crate::error::{Error, Result};

/// Exponent tuple of a monomial in the `q` class depths.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn eval(&self, depths: &[f64]) -> f64 {
        let mut v = 1.0;
        for (&e, &x) in self.0.iter().zip(depths) {
            for _ in 0..e {
                v *= x;
            }
        }
        v
    }
}

/// All monomials in `q` variables with total degree `1..=p`, by ascending
/// degree and then in graded-lexicographic order (`x1` before `x2`, `x1^2`
/// before `x1 x2` before `x2^2`).
pub fn monomials(q: usize, p: u32) -> Vec<Monomial> {
    fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for e in (0..=left).rev() {
            cur[pos] = e;
            rec(pos + 1, left - e, cur, out);
        }
    }
    let mut out = Vec::new();
    if q == 0 {
        return out;
    }
    for deg in 1..=p {
        let mut level = Vec::new();
        rec(0, deg, &mut vec![0; q], &mut level);
        out.extend(level.into_iter().map(Monomial));
    }
    out
}

/// `C(p + q, q) - 1`.
pub fn feature_count(q: usize, p: u32) -> usize {
    let (n, k) = (p as u128 + q as u128, q as u128);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    (c - 1) as usize
}

/// Basic features of the depth vectors of two classes.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    values: Vec<f64>,
    rows: usize,
    monomials: Vec<Monomial>,
    /// `true` for the first class of `pair`.
    labels: Vec<bool>,
    degree: u32,
    pair: (usize, usize),
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn r(&self) -> usize {
        self.monomials.len()
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn pair(&self) -> (usize, usize) {
        self.pair
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let r = self.r();
        &self.values[i * r..(i + 1) * r]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i)[j]).collect()
    }

    /// Rows `idx` only.
    pub fn select(&self, idx: &[usize]) -> FeatureMatrix {
        let r = self.r();
        let mut values = Vec::with_capacity(idx.len() * r);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            values,
            rows: idx.len(),
            monomials: self.monomials.clone(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            degree: self.degree,
            pair: self.pair,
        }
    }

    /// Scores `Z w` computed row by row in monomial order.
    fn project(&self, w: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(w).map(|(z, w)| w * z).sum())
            .collect()
    }
}

/// Builds the basic features of `depths`.
///
/// `first_class[i]` tells whether point `i` belongs to the first class of
/// `pair`. Outsiders (all-zero depth vectors) should be left out by the
/// caller; they sit at the origin and carry no information.
pub fn extend_features(
    depths: &[DepthVector],
    first_class: &[bool],
    p: u32,
    pair: (usize, usize),
) -> Result<FeatureMatrix> {
    if depths.len() != first_class.len() {
        return Err(Error::LengthMismatch {
            left: depths.len(),
            right: first_class.len(),
        });
    }
    if p == 0 {
        return Err(Error::InvalidArgument("degree must be at least 1".into()));
    }
    let q = depths.first().map_or(pair.0.max(pair.1) + 1, DepthVector::q);
    if pair.0 >= q || pair.1 >= q || pair.0 == pair.1 {
        return Err(Error::InvalidArgument(format!(
            "class pair {pair:?} invalid for {q} classes"
        )));
    }
    let monos = monomials(q, p);
    let mut values = Vec::with_capacity(depths.len() * monos.len());
    for dv in depths {
        if dv.q() != q {
            return Err(Error::DimensionMismatch("depth vectors of mixed length".into()));
        }
        values.extend(monos.iter().map(|m| m.eval(dv.values())));
    }
    Ok(FeatureMatrix {
        values,
        rows: depths.len(),
        monomials: monos,
        labels: first_class.to_vec(),
        degree: p,
        pair,
    })
}

/// Best line through the origin in a plane of two features.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleResult {
    /// Normal direction `(cos alpha, sin alpha)` of the line, in `[0, 2 pi)`.
    pub alpha: f64,
    pub amr: f64,
    pub errors: usize,
    /// Merged minimizing arc; `start` in `[0, 2 pi)`, `end = start + length`
    /// (may exceed `2 pi` when the arc wraps).
    pub minimizing_arc: (f64, f64),
}

/// Number of misclassified points when the first class is predicted for
/// positive scores and the second for negative ones. Zero scores count as
/// errors for neither class.
pub fn count_errors(scores: &[f64], first_class: &[bool]) -> usize {
    scores
        .iter()
        .zip(first_class)
        .filter(|(&s, &first)| if first { s < 0.0 } else { s > 0.0 })
        .count()
}

/// Average misclassification rate of the normal direction `alpha`.
pub fn amr_at(z1: &[f64], z2: &[f64], first_class: &[bool], alpha: f64) -> f64 {
    let (s, c) = alpha.sin_cos();
    let scores: Vec<f64> = z1.iter().zip(z2).map(|(a, b)| a * c + b * s).collect();
    count_errors(&scores, first_class) as f64 / first_class.len() as f64
}

const ANGLE_MERGE_TOL: f64 = 1e-12;

/// Exact minimizer of the misclassification rate over all lines through
/// the origin of the `(z1, z2)` plane.
///
/// The rate is piecewise constant in the angle; it only changes where the
/// line passes through a data point, at the two angles perpendicular to the
/// point's direction. A sweep over the sorted breakpoints gives the count
/// on every arc; adjacent minimal arcs are merged and the midpoint of the
/// longest merged arc is returned (ties: smallest start angle).
pub fn best_angle(z1: &[f64], z2: &[f64], first_class: &[bool]) -> Result<AngleResult> {
    let m = first_class.len();
    if z1.len() != m || z2.len() != m {
        return Err(Error::LengthMismatch {
            left: z1.len().max(z2.len()),
            right: m,
        });
    }
    // (angle, change in error count when the sweep passes it)
    let mut events: Vec<(f64, i64)> = Vec::with_capacity(2 * m);
    for i in 0..m {
        if z1[i] == 0.0 && z2[i] == 0.0 {
            continue;
        }
        let phi = z2[i].atan2(z1[i]);
        // Entering `phi - pi/2` the projection turns positive, leaving
        // `phi + pi/2` it turns negative.
        let (on_enter, on_exit) = if first_class[i] { (-1, 1) } else { (1, -1) };
        events.push((wrap(phi - PI / 2.0), on_enter));
        events.push((wrap(phi + PI / 2.0), on_exit));
    }
    if events.is_empty() {
        return Err(Error::DegenerateProjection);
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut breaks: Vec<(f64, i64)> = Vec::new();
    for (angle, delta) in events {
        match breaks.last_mut() {
            Some(last) if angle - last.0 <= ANGLE_MERGE_TOL => last.1 += delta,
            _ => breaks.push((angle, delta)),
        }
    }
    if breaks.len() > 1 && breaks[0].0 + TAU - breaks[breaks.len() - 1].0 <= ANGLE_MERGE_TOL {
        let (_, delta) = breaks.pop().unwrap();
        breaks[0].1 += delta;
    }

    let k = breaks.len();
    let arc_end = |i: usize| {
        if i + 1 < k {
            breaks[i + 1].0
        } else {
            breaks[0].0 + TAU
        }
    };
    // Direct count on arc 0, then walk around the circle.
    let (s, c) = (0.5 * (breaks[0].0 + arc_end(0))).sin_cos();
    let first_scores: Vec<f64> = z1.iter().zip(z2).map(|(a, b)| a * c + b * s).collect();
    let mut counts = Vec::with_capacity(k);
    let mut current = count_errors(&first_scores, first_class) as i64;
    counts.push(current);
    for b in breaks.iter().skip(1) {
        current += b.1;
        counts.push(current);
    }
    let best = *counts.iter().min().unwrap();

    // Runs of consecutive minimal arcs, merged circularly.
    let minimal: Vec<bool> = counts.iter().map(|&c| c == best).collect();
    let (start_arc, arc_len) = if minimal.iter().all(|&v| v) {
        (0, TAU)
    } else {
        let mut best_run: Option<(usize, f64)> = None;
        // Start scanning just after a non-minimal arc so runs never split.
        let pivot = minimal.iter().position(|&v| !v).unwrap();
        let mut i = 0;
        while i < k {
            let idx = (pivot + 1 + i) % k;
            if !minimal[idx] {
                i += 1;
                continue;
            }
            let run_start = idx;
            let mut len = 0.0;
            while i < k && minimal[(pivot + 1 + i) % k] {
                let a = (pivot + 1 + i) % k;
                len += arc_end(a) - breaks[a].0;
                i += 1;
            }
            let better = match best_run {
                None => true,
                Some((s, l)) => {
                    len > l + ANGLE_MERGE_TOL
                        || (len >= l - ANGLE_MERGE_TOL && breaks[run_start].0 < breaks[s].0)
                }
            };
            if better {
                best_run = Some((run_start, len));
            }
        }
        best_run.unwrap()
    };
    let start = breaks[start_arc].0;
    let alpha = wrap(start + 0.5 * arc_len);
    Ok(AngleResult {
        alpha,
        amr: best as f64 / m as f64,
        errors: best as usize,
        minimizing_arc: (start, start + arc_len),
    })
}

fn wrap(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Which features a step combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepFeatures {
    /// First step: two basic features.
    Basic(usize, usize),
    /// Later steps: the synthesized feature and one basic feature.
    Synthesized(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaStep {
    pub features: StepFeatures,
    #[serde(with = "crate::sig17")]
    pub alpha: f64,
    #[serde(with = "crate::sig17")]
    pub amr: f64,
    pub errors: usize,
}

/// Polynomial separator for one class pair; positive scores vote for the
/// first class of `pair`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Separator {
    pub pair: (usize, usize),
    pub degree: u32,
    pub monomials: Vec<Monomial>,
    #[serde(with = "crate::sig17::vec")]
    pub weights: Vec<f64>,
    pub steps: Vec<AlphaStep>,
}

impl Separator {
    pub fn eval(&self, dv: &DepthVector) -> f64 {
        self.eval_values(dv.values())
    }

    /// Same as [`Separator::eval`] on raw depth values.
    pub fn eval_values(&self, depths: &[f64]) -> f64 {
        self.monomials
            .iter()
            .zip(&self.weights)
            .map(|(m, w)| w * m.eval(depths))
            .sum()
    }

    /// Misclassification rate of the last accepted step.
    pub fn training_amr(&self) -> f64 {
        self.steps.last().map_or(f64::NAN, |s| s.amr)
    }

    /// Monomials with nonzero weight.
    pub fn support(&self) -> Vec<&Monomial> {
        self.monomials
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w != 0.0)
            .map(|(m, _)| m)
            .collect()
    }
}

/// Pair admissibility of the first step: the two features must involve the
/// depths of both classes being separated.
fn admissible(a: &Monomial, b: &Monomial, pair: (usize, usize)) -> bool {
    let (j, k) = pair;
    let on_j = a.exponents()[j] + b.exponents()[j];
    let on_k = a.exponents()[k] + b.exponents()[k];
    on_j > 0 && on_k > 0
}

/// Runs the alpha-procedure on a feature matrix.
pub fn alpha_train(fm: &FeatureMatrix) -> Result<Separator> {
    let r = fm.r();
    let labels = fm.labels();
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Err(Error::InvalidArgument(
            "alpha-procedure needs points of both classes".into(),
        ));
    }
    let cols: Vec<Vec<f64>> = (0..r).map(|j| fm.column(j)).collect();
    let monos = fm.monomials();

    // Step 1: all admissible pairs of basic features.
    let mut best: Option<((usize, u32, usize, usize), AngleResult)> = None;
    for a in 0..r {
        for b in a + 1..r {
            if !admissible(&monos[a], &monos[b], fm.pair()) {
                continue;
            }
            let res = match best_angle(&cols[a], &cols[b], labels) {
                Ok(res) => res,
                Err(Error::DegenerateProjection) => continue,
                Err(e) => return Err(e),
            };
            let key = (res.errors, monos[a].degree() + monos[b].degree(), a, b);
            if best.as_ref().is_none_or(|(k, _)| key < *k) {
                best = Some((key, res));
            }
        }
    }
    let Some(((_, _, a, b), res)) = best else {
        return Err(Error::NoAdmissiblePair(fm.pair().0, fm.pair().1));
    };
    let mut w = vec![0.0; r];
    let (sin, cos) = res.alpha.sin_cos();
    w[a] = cos;
    w[b] = sin;
    let mut scores = fm.project(&w);
    let mut errors = count_errors(&scores, labels);
    let m = labels.len() as f64;
    let mut steps = vec![AlphaStep {
        features: StepFeatures::Basic(a, b),
        alpha: res.alpha,
        amr: errors as f64 / m,
        errors,
    }];
    let mut used = vec![false; r];
    used[a] = true;
    used[b] = true;

    // Later steps: couple the synthesized feature with each unused one.
    while used.iter().any(|&u| !u) && errors > 0 {
        let mut best: Option<((usize, u32, usize), AngleResult)> = None;
        for v in (0..r).filter(|&v| !used[v]) {
            let res = match best_angle(&scores, &cols[v], labels) {
                Ok(res) => res,
                Err(Error::DegenerateProjection) => continue,
                Err(e) => return Err(e),
            };
            let key = (res.errors, monos[v].degree(), v);
            if best.as_ref().is_none_or(|(k, _)| key < *k) {
                best = Some((key, res));
            }
        }
        let Some(((_, _, v), res)) = best else { break };
        let (sin, cos) = res.alpha.sin_cos();
        let mut next_w: Vec<f64> = w.iter().map(|x| x * cos).collect();
        next_w[v] += sin;
        let next_scores = fm.project(&next_w);
        let next_errors = count_errors(&next_scores, labels);
        if next_errors >= errors {
            break;
        }
        w = next_w;
        scores = next_scores;
        errors = next_errors;
        used[v] = true;
        steps.push(AlphaStep {
            features: StepFeatures::Synthesized(v),
            alpha: res.alpha,
            amr: errors as f64 / m,
            errors,
        });
    }

    Ok(Separator {
        pair: fm.pair(),
        degree: fm.degree(),
        monomials: monos.to_vec(),
        weights: w,
        steps,
    })
}
