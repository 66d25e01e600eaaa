//! Logistic regression with per-configuration intercepts, and ROC analysis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use std::collections::BTreeSet;

/// One (program, configuration) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub program_id: String,
    pub config_id: String,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "A")]
    pub a: usize,
    #[serde(rename = "H")]
    pub h: usize,
    /// Additional covariates, aligned with [`ModelSpec::extra`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<f64>,
    pub outcome: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Feature {
    L,
    A,
    H,
}

impl Feature {
    fn value(self, r: &FeatureRow) -> f64 {
        match self {
            Feature::L => r.l as f64,
            Feature::A => r.a as f64,
            Feature::H => r.h as f64,
        }
    }
}

/// Shared slopes besides the per-configuration intercepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub features: Vec<Feature>,
    /// Names of the `extra` covariates of each row.
    pub extra: Vec<String>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            features: vec![Feature::L, Feature::A, Feature::H],
            extra: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub ridge: f64,
    /// On the Euclidean norm of the penalized gradient.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            ridge: 1e-6,
            tolerance: 1e-8,
            max_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub configs: Vec<String>,
    pub alpha: Vec<f64>,
    pub features: Vec<Feature>,
    pub beta: Vec<f64>,
    pub extra: Vec<String>,
    pub gamma: Vec<f64>,
    /// Parameter order: alpha, beta, gamma.
    pub std_errors: Vec<f64>,
    pub wald_p_values: Vec<f64>,
    /// Unpenalized.
    pub log_likelihood: f64,
    pub gradient_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n: usize,
}

impl RegressionFit {
    pub fn beta(&self, f: Feature) -> Option<f64> {
        self.features
            .iter()
            .position(|&x| x == f)
            .map(|i| self.beta[i])
    }

    pub fn std_error_of(&self, f: Feature) -> Option<f64> {
        self.features
            .iter()
            .position(|&x| x == f)
            .map(|i| self.std_errors[self.alpha.len() + i])
    }

    pub fn param_count(&self) -> usize {
        self.alpha.len() + self.beta.len() + self.gamma.len()
    }

    /// Success probability; None for a configuration not in the fit.
    pub fn predict(&self, r: &FeatureRow) -> Option<f64> {
        let j = self.configs.iter().position(|c| *c == r.config_id)?;
        let mut eta = self.alpha[j];
        for (f, b) in self.features.iter().zip(&self.beta) {
            eta += b * f.value(r);
        }
        for (x, g) in r.extra.iter().zip(&self.gamma) {
            eta += g * x;
        }
        Some(sigmoid(eta))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("both outcome classes are required")]
    SingleClass,
    #[error("no data")]
    Empty,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular information matrix")]
    Singular,
}

/// Columns: one indicator per configuration (sorted by id), then the
/// features, then the extra covariates.
#[derive(Debug, Clone)]
pub struct Design {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub configs: Vec<String>,
}

pub fn design_matrix(rows: &[FeatureRow], spec: &ModelSpec) -> Result<Design, StatsError> {
    if rows.is_empty() {
        return Err(StatsError::Empty);
    }
    let configs: Vec<String> = rows
        .iter()
        .map(|r| r.config_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let p = configs.len() + spec.features.len() + spec.extra.len();
    let mut x = DMatrix::zeros(rows.len(), p);
    for (i, r) in rows.iter().enumerate() {
        if r.extra.len() != spec.extra.len() {
            return Err(StatsError::Dimension(format!(
                "row {} has {} extra covariates, expected {}",
                i,
                r.extra.len(),
                spec.extra.len()
            )));
        }
        let j = configs
            .binary_search(&r.config_id)
            .expect("collected above");
        x[(i, j)] = 1.0;
        for (k, f) in spec.features.iter().enumerate() {
            x[(i, configs.len() + k)] = f.value(r);
        }
        for (k, v) in r.extra.iter().enumerate() {
            x[(i, configs.len() + spec.features.len() + k)] = *v;
        }
    }
    let y = DVector::from_iterator(
        rows.len(),
        rows.iter().map(|r| f64::from(u8::from(r.outcome))),
    );
    Ok(Design { x, y, configs })
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^t) without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

pub fn log_likelihood(d: &Design, theta: &DVector<f64>) -> f64 {
    let eta = &d.x * theta;
    eta.iter()
        .zip(d.y.iter())
        .map(|(e, y)| y * e - softplus(*e))
        .sum()
}

/// Penalized log-likelihood maximized by [`fit_logistic`].
pub fn objective(d: &Design, theta: &DVector<f64>, ridge: f64) -> f64 {
    log_likelihood(d, theta) - 0.5 * ridge * theta.norm_squared()
}

pub fn gradient(d: &Design, theta: &DVector<f64>, ridge: f64) -> DVector<f64> {
    let eta = &d.x * theta;
    let resid = DVector::from_iterator(
        d.y.len(),
        d.y.iter().zip(eta.iter()).map(|(y, e)| y - sigmoid(*e)),
    );
    d.x.transpose() * resid - theta * ridge
}

/// Negative Hessian of the objective.
fn information(d: &Design, theta: &DVector<f64>, ridge: f64) -> DMatrix<f64> {
    let eta = &d.x * theta;
    let mut xw = d.x.clone();
    for (i, e) in eta.iter().enumerate() {
        let p = sigmoid(*e);
        let w = p * (1.0 - p);
        xw.row_mut(i).scale_mut(w);
    }
    let mut info = d.x.transpose() * xw;
    for k in 0..info.nrows() {
        info[(k, k)] += ridge;
    }
    info
}

/// Newton iterations with step halving on the penalized objective.
pub fn fit_logistic(
    rows: &[FeatureRow],
    spec: &ModelSpec,
    opts: &FitOptions,
) -> Result<RegressionFit, StatsError> {
    let d = design_matrix(rows, spec)?;
    let positives = rows.iter().filter(|r| r.outcome).count();
    if positives == 0 || positives == rows.len() {
        return Err(StatsError::SingleClass);
    }
    let p = d.x.ncols();
    let mut theta = DVector::zeros(p);
    let mut obj = objective(&d, &theta, opts.ridge);
    let mut iterations = 0;
    let mut grad = gradient(&d, &theta, opts.ridge);
    while grad.norm() >= opts.tolerance && iterations < opts.max_iterations {
        let info = information(&d, &theta, opts.ridge);
        let step = info.cholesky().ok_or(StatsError::Singular)?.solve(&grad);
        let mut t = 1.0;
        loop {
            let cand = &theta + &step * t;
            let c = objective(&d, &cand, opts.ridge);
            if c >= obj || t < 1e-12 {
                theta = cand;
                obj = c;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        grad = gradient(&d, &theta, opts.ridge);
    }
    let gradient_norm = grad.norm();
    let cov = information(&d, &theta, opts.ridge)
        .cholesky()
        .ok_or(StatsError::Singular)?
        .inverse();
    let std_errors: Vec<f64> = (0..p).map(|k| cov[(k, k)].sqrt()).collect();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let wald_p_values = (0..p)
        .map(|k| 2.0 * (1.0 - normal.cdf((theta[k] / std_errors[k]).abs())))
        .collect();
    let nc = d.configs.len();
    let nf = spec.features.len();
    Ok(RegressionFit {
        alpha: theta.rows(0, nc).iter().copied().collect(),
        beta: theta.rows(nc, nf).iter().copied().collect(),
        gamma: theta
            .rows(nc + nf, spec.extra.len())
            .iter()
            .copied()
            .collect(),
        configs: d.configs.clone(),
        features: spec.features.clone(),
        extra: spec.extra.clone(),
        std_errors,
        wald_p_values,
        log_likelihood: log_likelihood(&d, &theta),
        gradient_norm,
        converged: gradient_norm < opts.tolerance,
        iterations,
        n: rows.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Likelihood-ratio test of a reduced model nested in a full model fitted
/// to the same rows.
pub fn lr_test(reduced: &RegressionFit, full: &RegressionFit) -> Result<LrTest, StatsError> {
    if reduced.n != full.n || full.param_count() <= reduced.param_count() {
        return Err(StatsError::Dimension(format!(
            "reduced model ({} params, {} rows) is not nested in full model ({} params, {} rows)",
            reduced.param_count(),
            reduced.n,
            full.param_count(),
            full.n
        )));
    }
    let df = full.param_count() - reduced.param_count();
    let statistic = (2.0 * (full.log_likelihood - reduced.log_likelihood)).max(0.0);
    let chi = ChiSquared::new(df as f64).expect("positive df");
    Ok(LrTest {
        statistic,
        df,
        p_value: 1.0 - chi.cdf(statistic),
    })
}

fn check_labels(scores: &[f64], labels: &[bool]) -> Result<(usize, usize), StatsError> {
    if scores.len() != labels.len() {
        return Err(StatsError::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let pos = labels.iter().filter(|l| **l).count();
    if pos == 0 || pos == labels.len() {
        return Err(StatsError::SingleClass);
    }
    Ok((pos, labels.len() - pos))
}

/// Mann-Whitney statistic over all positive/negative pairs, ties counting
/// one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, StatsError> {
    let (pos, neg) = check_labels(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean
        let rank = (i + j + 2) as f64 / 2.0;
        rank_sum += rank * idx[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos * neg) as f64)
}

/// (false positive rate, true positive rate) at every distinct threshold,
/// from (0, 0) to (1, 1).
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>, StatsError> {
    let (pos, neg) = check_labels(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (n, &k) in idx.iter().enumerate() {
        if labels[k] {
            tp += 1;
        } else {
            fp += 1;
        }
        if idx.get(n + 1).is_none_or(|&next| scores[next] != scores[k]) {
            out.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(config: &str, l: usize, outcome: bool) -> FeatureRow {
        FeatureRow {
            program_id: format!("p{l}"),
            config_id: config.into(),
            l,
            a: 0,
            h: 0,
            extra: vec![],
            outcome,
        }
    }

    #[test]
    fn intercept_only_closed_form() {
        let rows: Vec<FeatureRow> = (0..100).map(|i| row("c", i, i % 10 < 3)).collect();
        let spec = ModelSpec {
            features: vec![],
            extra: vec![],
        };
        let fit = fit_logistic(&rows, &spec, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.beta.is_empty());
        assert!((fit.alpha[0] - (0.3f64 / 0.7).ln()).abs() < 1e-6);
        assert_eq!(fit.beta(Feature::H), None);
    }

    #[test]
    fn separable_data_stays_finite() {
        let rows: Vec<FeatureRow> = (0..8).map(|i| row("c", i, i >= 4)).collect();
        let spec = ModelSpec {
            features: vec![Feature::L],
            extra: vec![],
        };
        let fit = fit_logistic(&rows, &spec, &FitOptions::default()).unwrap();
        assert!(fit.converged, "{fit:?}");
        assert!(fit.beta[0].is_finite() && fit.beta[0] > 0.0);
        assert!(fit.alpha[0].is_finite());
    }

    #[test]
    fn single_class_and_empty() {
        let rows = vec![row("c", 1, true), row("c", 2, true)];
        assert_eq!(
            fit_logistic(&rows, &ModelSpec::default(), &FitOptions::default()).unwrap_err(),
            StatsError::SingleClass
        );
        assert_eq!(
            fit_logistic(&[], &ModelSpec::default(), &FitOptions::default()).unwrap_err(),
            StatsError::Empty
        );
        assert_eq!(
            roc_auc(&[0.1, 0.2], &[false, false]),
            Err(StatsError::SingleClass)
        );
    }

    #[test]
    fn auc_fixtures() {
        assert_eq!(
            roc_auc(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]),
            Ok(1.0)
        );
        assert_eq!(
            roc_auc(&[0.5; 6], &[true, false, true, false, true, false]),
            Ok(0.5)
        );
        let s = [0.9, 0.8, 0.4, 0.7, 0.3, 0.2];
        let l = [true, true, true, false, false, false];
        assert!((roc_auc(&s, &l).unwrap() - 8.0 / 9.0).abs() < 1e-15);
        let curve = roc_curve(&s, &l).unwrap();
        assert_eq!(curve.first(), Some(&(0.0, 0.0)));
        assert_eq!(curve.last(), Some(&(1.0, 1.0)));
        assert_eq!(curve.len(), 7);
    }
}
