//! Post-hoc calibration: temperature scaling for the deep model, Platt
//! scaling for the baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{ece, nll};
use crate::model::sigmoid;
use crate::train::Fold;

pub const TEMPERATURE_RANGE: (f64, f64) = (0.05, 20.0);
pub const ECE_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CalibratorKind {
    Temperature { t: f64 },
    /// `p = σ(a·s + b)` where `s` is the raw logit.
    Platt { a: f64, b: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibrator {
    #[serde(flatten)]
    pub kind: CalibratorKind,
    pub fitted_on: Fold,
    pub n: usize,
    pub pre_nll: f64,
    pub post_nll: f64,
    pub pre_ece: f64,
    pub post_ece: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl Calibrator {
    /// Calibrated probability from a raw logit.
    pub fn apply(&self, logit: f64) -> f64 {
        match self.kind {
            CalibratorKind::Temperature { t } => sigmoid(logit / t),
            CalibratorKind::Platt { a, b } => sigmoid(a * logit + b),
        }
    }

    pub fn apply_all(&self, logits: &[f64]) -> Vec<f64> {
        logits.iter().map(|&l| self.apply(l)).collect()
    }

    fn finish(kind: CalibratorKind, logits: &[f64], labels: &[bool], warning: Option<String>) -> Self {
        let before: Vec<f64> = logits.iter().map(|&l| sigmoid(l)).collect();
        let mut c = Calibrator {
            kind,
            fitted_on: Fold::Calib,
            n: logits.len(),
            pre_nll: nll(&before, labels),
            post_nll: 0.0,
            pre_ece: ece(&before, labels, ECE_BINS),
            post_ece: 0.0,
            warning,
        };
        let after = c.apply_all(logits);
        c.post_nll = nll(&after, labels);
        c.post_ece = ece(&after, labels, ECE_BINS);
        c
    }
}

fn guard(fold: Fold) -> Result<()> {
    if fold != Fold::Calib {
        return Err(Error::Calibration(format!(
            "calibrators are fit on the calibration fold, not the {} fold",
            fold.as_str()
        )));
    }
    Ok(())
}

fn temperature_nll(logits: &[f64], labels: &[bool], t: f64) -> f64 {
    let p: Vec<f64> = logits.iter().map(|&l| sigmoid(l / t)).collect();
    nll(&p, labels)
}

/// Temperature minimizing the NLL of `σ(logit / T)` by golden-section search
/// over [`TEMPERATURE_RANGE`]. `T = 1` is kept unless the search improves on
/// it. A single-class fold yields the identity with a warning.
pub fn fit_temperature(logits: &[f64], labels: &[bool], fold: Fold) -> Result<Calibrator> {
    guard(fold)?;
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == labels.len() {
        let warn = format!("calibration fold has a single class ({pos} of {} positive); using T = 1", labels.len());
        log::warn!("{warn}");
        return Ok(Calibrator::finish(CalibratorKind::Temperature { t: 1.0 }, logits, labels, Some(warn)));
    }
    let f = |t: f64| temperature_nll(logits, labels, t);
    let (mut lo, mut hi) = TEMPERATURE_RANGE;
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-7 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    let best = (lo + hi) / 2.0;
    let t = if f(best) < f(1.0) { best } else { 1.0 };
    Ok(Calibrator::finish(CalibratorKind::Temperature { t }, logits, labels, None))
}

/// Platt scaling on logits with smoothed targets, by Newton's method with
/// step halving until the mean gradient norm is at most 1e-8.
pub fn fit_platt(logits: &[f64], labels: &[bool], fold: Fold) -> Result<Calibrator> {
    guard(fold)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Calibration(format!(
            "Platt scaling needs both classes; fold has {n_pos} positive and {n_neg} negative"
        )));
    }
    let t_pos = (n_pos as f64 + 1.0) / (n_pos as f64 + 2.0);
    let t_neg = 1.0 / (n_neg as f64 + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&l| if l { t_pos } else { t_neg }).collect();
    let objective = |a: f64, b: f64| -> f64 {
        logits
            .iter()
            .zip(&targets)
            .map(|(&s, &t)| {
                // log(1 + e^m) - t·m, stable for either sign of m
                let m = a * s + b;
                let softplus = if m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() };
                softplus - t * m
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, ((n_pos as f64 + 1.0) / (n_neg as f64 + 1.0)).ln());
    const MAX_ITER: usize = 100;
    let mut grad_norm = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&s, &t) in logits.iter().zip(&targets) {
            let p = sigmoid(a * s + b);
            let d = p - t;
            let w = p * (1.0 - p);
            ga += d * s;
            gb += d;
            haa += w * s * s;
            hab += w * s;
            hbb += w;
        }
        // gradient of the mean objective, so the tolerance does not scale with n
        grad_norm = ga.hypot(gb) / logits.len() as f64;
        if grad_norm <= 1e-8 {
            return Ok(Calibrator::finish(CalibratorKind::Platt { a, b }, logits, labels, None));
        }
        let det = haa * hbb - hab * hab;
        let (da, db) = if det.abs() > 1e-300 {
            ((hbb * ga - hab * gb) / det, (haa * gb - hab * ga) / det)
        } else {
            (ga, gb)
        };
        let current = objective(a, b);
        let mut step = 1.0;
        while step > 1e-12 && objective(a - step * da, b - step * db) > current {
            step /= 2.0;
        }
        a -= step * da;
        b -= step * db;
    }
    Err(Error::Convergence { what: "Platt scaling", iterations: MAX_ITER, grad_norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::auc;
    use rand::Rng as _;

    /// Labels drawn from σ(logit).
    fn generative(n: usize, seed: u64) -> (Vec<f64>, Vec<bool>) {
        let mut r = crate::rng::rng(seed);
        let logits: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let labels = logits.iter().map(|&l| r.random::<f64>() < sigmoid(l)).collect();
        (logits, labels)
    }

    fn t_of(c: &Calibrator) -> f64 {
        match c.kind {
            CalibratorKind::Temperature { t } => t,
            _ => unreachable!(),
        }
    }

    #[test]
    fn calibrated_scores_keep_temperature_near_one() {
        let (logits, labels) = generative(20_000, 1);
        let c = fit_temperature(&logits, &labels, Fold::Calib).unwrap();
        assert!((t_of(&c) - 1.0).abs() < 0.05, "{}", t_of(&c));
        assert!(c.post_nll <= c.pre_nll);
    }

    #[test]
    fn overconfident_scores_get_temperature_three() {
        let (logits, labels) = generative(20_000, 2);
        let sharp: Vec<f64> = logits.iter().map(|l| 3.0 * l).collect();
        let c = fit_temperature(&sharp, &labels, Fold::Calib).unwrap();
        assert!((t_of(&c) - 3.0).abs() < 0.3, "{}", t_of(&c));
        assert!(c.post_nll <= c.pre_nll);
        assert!(c.post_ece < c.pre_ece);
        // monotone: ranking and AUC unchanged
        let after = c.apply_all(&sharp);
        assert_eq!(auc(&after, &labels).unwrap(), auc(&sharp, &labels).unwrap());
    }

    #[test]
    fn unit_temperature_is_bitwise_identity() {
        let c = Calibrator::finish(CalibratorKind::Temperature { t: 1.0 }, &[0.3], &[true], None);
        for l in [-5.0, -0.1, 0.0, 0.7, 12.0] {
            assert_eq!(c.apply(l).to_bits(), sigmoid(l).to_bits());
        }
    }

    #[test]
    fn single_class_gives_identity_with_warning() {
        let c = fit_temperature(&[0.1, 0.5, 2.0], &[false, false, false], Fold::Calib).unwrap();
        assert_eq!(t_of(&c), 1.0);
        assert!(c.warning.is_some());
        assert!(fit_platt(&[0.1, 0.5], &[true, true], Fold::Calib).is_err());
    }

    #[test]
    fn platt_recovers_identity_on_calibrated_logits() {
        let (logits, labels) = generative(20_000, 3);
        let c = fit_platt(&logits, &labels, Fold::Calib).unwrap();
        let CalibratorKind::Platt { a, b } = c.kind else { unreachable!() };
        assert!((a - 1.0).abs() < 0.1 && b.abs() < 0.1, "a={a} b={b}");
        let after = c.apply_all(&logits);
        assert_eq!(auc(&after, &labels).unwrap(), auc(&logits, &labels).unwrap());
    }

    #[test]
    fn fitting_outside_calibration_fold_is_refused() {
        let (logits, labels) = generative(100, 4);
        assert!(matches!(fit_temperature(&logits, &labels, Fold::Test), Err(Error::Calibration(_))));
        assert!(matches!(fit_platt(&logits, &labels, Fold::Valid), Err(Error::Calibration(_))));
    }

    #[test]
    fn persisted_form() {
        let (logits, labels) = generative(200, 5);
        let c = fit_temperature(&logits, &labels, Fold::Calib).unwrap();
        let json = serde_json::to_value(&c).unwrap();
        assert_eq!(json["kind"], "temperature");
        assert_eq!(json["fitted_on"], "calib");
        let back: Calibrator = serde_json::from_value(json).unwrap();
        assert_eq!(back, c);
    }
}
