//! Evaluation metrics: MCC, F1, MSE, realized log-volatility, n-day returns,
//! LRAP and ROC AUC for multi-label probes, and a paired sign test.

use crate::error::{Error, Result};

/// Binary confusion counts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn observe(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
        }
    }
}

/// Matthews correlation coefficient. Returns 0 when any factor of the
/// denominator is zero.
pub fn mcc(cm: &ConfusionMatrix) -> f64 {
    let (tp, tn, fp, fn_) = (cm.tp as f64, cm.tn as f64, cm.fp as f64, cm.fn_ as f64);
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        return 0.0;
    }
    (tp * tn - fp * fn_) / denom.sqrt()
}

/// F1 score; 0 when the denominator is zero.
pub fn f1(cm: &ConfusionMatrix) -> f64 {
    let denom = 2 * cm.tp + cm.fp + cm.fn_;
    if denom == 0 {
        return 0.0;
    }
    2.0 * cm.tp as f64 / denom as f64
}

/// Adjusted closing prices around one event day; `prices[0]` is the base.
#[derive(Clone, Debug)]
pub struct PriceWindow {
    prices: Vec<f64>,
}

impl PriceWindow {
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        if prices.len() < 2 {
            return Err(Error::contract(format!(
                "price window needs at least 2 prices, got {}",
                prices.len()
            )));
        }
        if prices.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::contract("price window contains non-positive price".to_string()));
        }
        Ok(PriceWindow { prices })
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    /// Simple daily returns r_i = p_i / p_{i-1} - 1 for the first `n` days.
    pub fn returns(&self, n: usize) -> Result<Vec<f64>> {
        if self.prices.len() < n + 1 {
            return Err(Error::contract(format!(
                "window covers {} days, need {n}",
                self.prices.len() - 1
            )));
        }
        Ok((1..=n)
            .map(|i| self.prices[i] / self.prices[i - 1] - 1.0)
            .collect())
    }
}

/// Variance floor keeping the log finite on degenerate windows.
pub const VOLATILITY_VARIANCE_FLOOR: f64 = 1e-12;

/// Log realized volatility of a return series: ln of the root mean squared
/// deviation from the window mean.
pub fn volatility_from_returns(returns: &[f64]) -> Result<f64> {
    if returns.is_empty() {
        return Err(Error::contract("volatility of empty return series".to_string()));
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|&r| (r - mean) * (r - mean)).sum::<f64>() / n;
    Ok(var.max(VOLATILITY_VARIANCE_FLOOR).sqrt().ln())
}

/// n-day log volatility from a price window.
pub fn volatility(window: &PriceWindow, n: usize) -> Result<f64> {
    volatility_from_returns(&window.returns(n)?)
}

/// Simple n-day return p_n / p_0 - 1.
pub fn n_day_return(window: &PriceWindow, n: usize) -> Result<f64> {
    if window.prices.len() < n + 1 {
        return Err(Error::contract(format!(
            "window covers {} days, need {n}",
            window.prices.len() - 1
        )));
    }
    Ok(window.prices[n] / window.prices[0] - 1.0)
}

/// Mean squared error.
pub fn mse(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() || predictions.is_empty() {
        return Err(Error::contract(format!(
            "mse over {} predictions vs {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    let s: f64 = predictions
        .iter()
        .zip(truths)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok(s / predictions.len() as f64)
}

/// Label ranking average precision for multi-label scores.
///
/// Samples with no positive label (or all labels positive) contribute 1.0.
/// Ties in scores count as "ranked at least as high".
pub fn lrap(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> Result<f64> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::contract(format!(
            "lrap over {} score rows vs {} label rows",
            scores.len(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (s, y) in scores.iter().zip(labels) {
        if s.len() != y.len() {
            return Err(Error::contract("lrap row length mismatch".to_string()));
        }
        let n_pos = y.iter().filter(|&&b| b).count();
        if n_pos == 0 || n_pos == y.len() {
            total += 1.0;
            continue;
        }
        let mut sample = 0.0;
        for j in 0..s.len() {
            if !y[j] {
                continue;
            }
            let rank = s.iter().filter(|&&v| v >= s[j]).count() as f64;
            let hits = s
                .iter()
                .zip(y)
                .filter(|&(&v, &lab)| lab && v >= s[j])
                .count() as f64;
            sample += hits / rank;
        }
        total += sample / n_pos as f64;
    }
    Ok(total / scores.len() as f64)
}

/// Binary ROC AUC via tie-aware average ranks. `None` when only one class
/// is present.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::contract(format!(
            "roc_auc over {} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&b| b).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    // Average ranks over tied scores (1-based).
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|&(_, &lab)| lab)
        .map(|(&r, _)| r)
        .sum();
    let auc = (rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos * n_neg) as f64;
    Ok(Some(auc))
}

/// Macro-average ROC AUC across labels of a multi-label problem, skipping
/// labels with a degenerate class distribution. `None` when every label is
/// degenerate.
pub fn roc_auc_macro(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> Result<Option<f64>> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::contract("roc_auc_macro shape mismatch".to_string()));
    }
    let width = scores[0].len();
    let mut aucs = Vec::new();
    for j in 0..width {
        let col_scores: Vec<f64> = scores.iter().map(|r| r[j]).collect();
        let col_labels: Vec<bool> = labels.iter().map(|r| r[j]).collect();
        if let Some(a) = roc_auc(&col_scores, &col_labels)? {
            aucs.push(a);
        }
    }
    if aucs.is_empty() {
        return Ok(None);
    }
    Ok(Some(aucs.iter().sum::<f64>() / aucs.len() as f64))
}

/// Two-sided paired sign test p-value; ties are dropped.
pub fn paired_sign_test(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::contract("paired sign test needs equal nonempty inputs".to_string()));
    }
    let mut n = 0u64;
    let mut wins = 0u64;
    for (x, y) in xs.iter().zip(ys) {
        if x > y {
            wins += 1;
            n += 1;
        } else if x < y {
            n += 1;
        }
    }
    if n == 0 {
        return Ok(1.0);
    }
    // Two-sided binomial tail at p = 1/2.
    let k = wins.min(n - wins);
    let mut tail = 0.0;
    for i in 0..=k {
        tail += binomial_pmf(n, i);
    }
    Ok((2.0 * tail).min(1.0))
}

fn binomial_pmf(n: u64, k: u64) -> f64 {
    // log-space to stay finite for larger n.
    let mut log_c = 0.0;
    for i in 0..k {
        log_c += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    (log_c + n as f64 * 0.5f64.ln()).exp()
}
