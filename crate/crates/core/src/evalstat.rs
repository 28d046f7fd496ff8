//! Accuracy assessment: confusion counts, kappa, error rates, multi-run aggregation
//! and Welch's two-sample t-test.

use crate::error::{Error, Result};
use crate::raster::ReferenceMap;

/// Significance level used by [`welch_t_test`].
pub const SIGNIFICANCE_LEVEL: f64 = 5e-3;

/// Pixel counts with "changed" as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
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
}

pub fn confusion(pred: &ReferenceMap, reference: &ReferenceMap) -> Result<ConfusionMatrix> {
    if pred.width() != reference.width() || pred.height() != reference.height() {
        return Err(Error::Alignment {
            left_width: pred.width(),
            left_height: pred.height(),
            right_width: reference.width(),
            right_height: reference.height(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &r) in pred.labels().iter().zip(reference.labels()) {
        match (p, r) {
            (1, 1) => cm.tp += 1,
            (0, 0) => cm.tn += 1,
            (1, 0) => cm.fp += 1,
            _ => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// Cohen's kappa. When chance agreement is 1 the result is 1 for perfect agreement
/// and 0 otherwise.
pub fn kappa(cm: &ConfusionMatrix) -> Result<f64> {
    let n = cm.total();
    if n == 0 {
        return Err(Error::Parameter("empty confusion matrix".into()));
    }
    let n = n as f64;
    let (tp, tn, fp, fn_) = (cm.tp as f64, cm.tn as f64, cm.fp as f64, cm.fn_ as f64);
    let po = (tp + tn) / n;
    let pe = ((tp + fp) * (tp + fn_) + (tn + fn_) * (tn + fp)) / (n * n);
    if pe == 1.0 {
        return Ok(if po == 1.0 { 1.0 } else { 0.0 });
    }
    Ok((po - pe) / (1.0 - pe))
}

/// Rates whose denominator is zero are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRates {
    pub false_alarm: Option<f64>,
    pub missed: Option<f64>,
    pub overall_error: f64,
    pub pcc: f64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn error_rates(cm: &ConfusionMatrix) -> Result<ErrorRates> {
    let n = cm.total();
    if n == 0 {
        return Err(Error::Parameter("empty confusion matrix".into()));
    }
    let overall_error = (cm.fp + cm.fn_) as f64 / n as f64;
    Ok(ErrorRates {
        false_alarm: ratio(cm.fp, cm.fp + cm.tn),
        missed: ratio(cm.fn_, cm.fn_ + cm.tp),
        overall_error,
        pcc: 1.0 - overall_error,
    })
}

/// Mean and sample standard deviation of per-run kappas.
#[derive(Debug, Clone, PartialEq)]
pub struct RunAggregate {
    pub kappas: Vec<f64>,
    pub mean: f64,
    /// `None` with fewer than two runs.
    pub std: Option<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn aggregate(kappas: &[f64]) -> Result<RunAggregate> {
    if kappas.is_empty() {
        return Err(Error::Parameter("no runs to aggregate".into()));
    }
    Ok(RunAggregate {
        kappas: kappas.to_vec(),
        mean: mean(kappas),
        std: (kappas.len() >= 2).then(|| sample_variance(kappas).sqrt()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestReport {
    /// `None` when both samples are constant with different means.
    pub t_value: Option<f64>,
    pub p_value: Option<f64>,
    pub dof: Option<f64>,
    pub significant: bool,
}

/// Two-sided Welch test of `mean(a) == mean(b)`, where `a` is the baseline.
/// A better `b` gives a negative t.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTestReport> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Parameter(format!(
            "t-test needs at least two runs per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let se2 = va + vb;
    if se2 == 0.0 {
        if ma == mb {
            return Ok(TTestReport {
                t_value: Some(0.0),
                p_value: Some(1.0),
                dof: None,
                significant: false,
            });
        }
        return Ok(TTestReport {
            t_value: None,
            p_value: None,
            dof: None,
            significant: false,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let dof = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let p = student_t_two_sided(t, dof);
    Ok(TTestReport {
        t_value: Some(t),
        p_value: Some(p),
        dof: Some(dof),
        significant: p < SIGNIFICANCE_LEVEL,
    })
}

/// `P(|T| >= |t|)` for Student's t with `dof` degrees of freedom.
pub fn student_t_two_sided(t: f64, dof: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let x = dof / (dof + t * t);
    regularized_incomplete_beta(0.5 * dof, 0.5, x).clamp(0.0, 1.0)
}

/// Lanczos approximation (g = 7, 9 terms), accurate to ~1e-15 for positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `I_x(a, b)` via the modified Lentz continued fraction, using the symmetry
/// `I_x(a,b) = 1 − I_{1−x}(b,a)` where the fraction converges slowly.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 500;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(tp: u64, tn: u64, fp: u64, fn_: u64) -> ConfusionMatrix {
        ConfusionMatrix { tp, tn, fp, fn_ }
    }

    #[test]
    fn confusion_counts() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i < 10)).collect();
        let r = ReferenceMap::new(10, 10, labels).unwrap();
        assert_eq!(confusion(&r, &r).unwrap(), cm(10, 90, 0, 0));
        let none = ReferenceMap::unchanged(10, 10).unwrap();
        assert_eq!(confusion(&none, &r).unwrap(), cm(0, 90, 0, 10));
        let other = ReferenceMap::unchanged(10, 9).unwrap();
        assert!(confusion(&other, &r).is_err());
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(&cm(10, 90, 0, 0)).unwrap(), 1.0);
        let k = kappa(&cm(40, 50, 5, 5)).unwrap();
        assert!((k - 0.395 / 0.495).abs() < 1e-12);
        assert!((k - 0.79798).abs() < 1e-5);
        assert_eq!(kappa(&cm(0, 90, 0, 10)).unwrap(), 0.0);
        // Degenerate marginals.
        assert_eq!(kappa(&cm(0, 100, 0, 0)).unwrap(), 1.0);
        assert_eq!(kappa(&cm(5, 0, 0, 0)).unwrap(), 1.0);
        assert!(kappa(&cm(0, 0, 0, 0)).is_err());
    }

    #[test]
    fn rates_examples() {
        let r = error_rates(&cm(10, 90, 0, 0)).unwrap();
        assert_eq!((r.false_alarm, r.missed, r.overall_error, r.pcc), (Some(0.0), Some(0.0), 0.0, 1.0));
        let r = error_rates(&cm(40, 50, 5, 5)).unwrap();
        assert!((r.false_alarm.unwrap() - 5.0 / 55.0).abs() < 1e-15);
        assert!((r.missed.unwrap() - 5.0 / 45.0).abs() < 1e-15);
        assert!((r.overall_error - 0.1).abs() < 1e-15);
        assert_eq!(error_rates(&cm(0, 95, 5, 0)).unwrap().missed, None);
    }

    #[test]
    fn aggregate_examples() {
        let a = aggregate(&[0.8, 0.8, 0.8]).unwrap();
        assert!((a.mean - 0.8).abs() < 1e-15);
        assert!(a.std.unwrap() < 1e-15);
        let a = aggregate(&[0.7, 0.9]).unwrap();
        assert!((a.mean - 0.8).abs() < 1e-15);
        assert!((a.std.unwrap() - 0.141_421_356_237_309_5).abs() < 1e-12);
        assert_eq!(aggregate(&[0.5]).unwrap().std, None);
    }

    #[test]
    fn t_test_edge_cases() {
        let a = [0.1, 0.2, 0.3];
        let r = welch_t_test(&a, &a).unwrap();
        assert_eq!((r.t_value, r.p_value), (Some(0.0), Some(1.0)));
        let r = welch_t_test(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!((r.t_value, r.p_value), (Some(0.0), Some(1.0)));
        let r = welch_t_test(&[0.5, 0.5], &[0.7, 0.7]).unwrap();
        assert_eq!(r.t_value, None);
        assert!(!r.significant);
        assert!(welch_t_test(&[0.5], &[0.7, 0.8]).is_err());
    }

    #[test]
    fn t_test_sign_convention() {
        let uc = [0.80, 0.81, 0.79, 0.80, 0.80];
        let buc = [0.90, 0.91, 0.89, 0.90, 0.90];
        let r = welch_t_test(&uc, &buc).unwrap();
        let t = r.t_value.unwrap();
        assert!(t < 0.0);
        assert!((t + 0.1 / 2e-5f64.sqrt()).abs() < 1e-9);
        assert!((r.dof.unwrap() - 8.0).abs() < 1e-9);
        assert!(r.p_value.unwrap() < SIGNIFICANCE_LEVEL && r.significant);
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn t_cdf_closed_forms() {
        // dof 1 is Cauchy: p = 1 - 2 atan(|t|)/pi. dof 2: p = 1 - |t|/sqrt(2+t^2).
        for t in [0.1, 0.5, 1.0, 3.0, 12.0, 100.0] {
            let cauchy = 1.0 - 2.0 * f64::atan(t) / std::f64::consts::PI;
            assert!((student_t_two_sided(t, 1.0) - cauchy).abs() < 1e-12);
            let two = 1.0 - t / (2.0 + t * t).sqrt();
            assert!((student_t_two_sided(-t, 2.0) - two).abs() < 1e-12);
        }
    }
}
