//! Linear hinge-loss classifier used as the network's terminal layer.
//!
//! Objective: `(lambda/2)·‖w‖² + mean_i max(0, 1 − y_i (w·f_i + b))`, bias unregularized.
//! Training takes one full-batch subgradient step per epoch with step size
//! `1/(lambda·t)`; the batch is accumulated in an order shuffled per epoch.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::pcanet::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HingeParams {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for HingeParams {
    fn default() -> Self {
        HingeParams {
            lambda: 1e-4,
            epochs: 20,
        }
    }
}

impl HingeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Parameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Parameter("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(dim: usize) -> Self {
        LinearModel {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn decision_value(&self, f: &FeatureVector) -> Result<f64> {
        self.decision_slice(&f.values)
    }

    pub fn decision_slice(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.weights.len() {
            return Err(Error::Dimension {
                expected: self.weights.len(),
                found: f.len(),
            });
        }
        Ok(dot(&self.weights, f) + self.bias)
    }

    /// 1 (changed) iff the decision value is strictly positive.
    pub fn predict(&self, f: &FeatureVector) -> Result<u8> {
        Ok(label_of(self.decision_value(f)?))
    }
}

#[inline]
pub fn label_of(decision: f64) -> u8 {
    u8::from(decision > 0.0)
}

/// Maps a {0,1} label to the {−1,+1} sign used in training.
#[inline]
pub fn sign_of(label: u8) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_inputs(features: &[FeatureVector], signs: &[f64]) -> Result<usize> {
    if features.len() != signs.len() {
        return Err(Error::Dimension {
            expected: features.len(),
            found: signs.len(),
        });
    }
    let dim = features
        .first()
        .map(FeatureVector::len)
        .ok_or_else(|| Error::Degenerate("no training samples".into()))?;
    for f in features {
        if f.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: f.len(),
            });
        }
        if f.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature value".into()));
        }
    }
    if let Some(s) = signs.iter().find(|&&s| s != 1.0 && s != -1.0) {
        return Err(Error::Data(format!("label {s} is not -1 or +1")));
    }
    Ok(dim)
}

/// Regularized mean hinge loss.
pub fn objective(model: &LinearModel, features: &[FeatureVector], signs: &[f64], lambda: f64) -> f64 {
    let reg = 0.5 * lambda * dot(&model.weights, &model.weights);
    let loss: f64 = features
        .iter()
        .zip(signs)
        .map(|(f, &y)| (1.0 - y * (dot(&model.weights, &f.values) + model.bias)).max(0.0))
        .sum();
    reg + loss / features.len() as f64
}

/// Subgradient of [`objective`] with respect to `(w, b)`, visiting samples in `order`.
/// Points with margin exactly 1 contribute nothing.
pub fn subgradient(
    model: &LinearModel,
    features: &[FeatureVector],
    signs: &[f64],
    lambda: f64,
    order: &[usize],
) -> (Vec<f64>, f64) {
    let n = features.len() as f64;
    let mut gw = vec![0.0; model.weights.len()];
    let mut gb = 0.0;
    for &i in order {
        let y = signs[i];
        let x = &features[i].values;
        if y * (dot(&model.weights, x) + model.bias) < 1.0 {
            for (g, v) in gw.iter_mut().zip(x) {
                *g -= y * v;
            }
            gb -= y;
        }
    }
    for (g, w) in gw.iter_mut().zip(&model.weights) {
        *g = *g / n + lambda * w;
    }
    (gw, gb / n)
}

/// Bias minimizing the mean hinge loss for fixed `weights`.
///
/// Every sample contributes one breakpoint `y - w·x`, and the loss slope in `b`
/// rises by one at each of them, starting from `-n_pos`. The minimizers therefore
/// form the interval between the `n_pos`-th and `(n_pos + 1)`-th smallest
/// breakpoints; its midpoint is returned.
pub fn optimal_bias(weights: &[f64], features: &[FeatureVector], signs: &[f64]) -> f64 {
    let mut breaks: Vec<f64> = features
        .iter()
        .zip(signs)
        .map(|(f, &y)| y - dot(weights, &f.values))
        .collect();
    breaks.sort_unstable_by(f64::total_cmp);
    let n_pos = signs.iter().filter(|&&y| y > 0.0).count();
    0.5 * (breaks[n_pos - 1] + breaks[n_pos])
}

/// Trains on `signs` in {−1, +1}.
///
/// Each epoch takes one full-batch subgradient step on the weights with step
/// `1/(lambda·t)`, visiting samples in a fresh shuffled order, then sets the
/// unregularized bias to its exact minimizer for the new weights.
pub fn train_linear<R: Rng + ?Sized>(
    features: &[FeatureVector],
    signs: &[f64],
    params: HingeParams,
    rng: &mut R,
) -> Result<LinearModel> {
    params.validate()?;
    let dim = check_inputs(features, signs)?;
    if !signs.contains(&1.0) || !signs.contains(&-1.0) {
        return Err(Error::Degenerate(
            "training labels contain a single class".into(),
        ));
    }
    let mut model = LinearModel::zeros(dim);
    model.bias = optimal_bias(&model.weights, features, signs);
    let mut order: Vec<usize> = (0..features.len()).collect();
    for t in 1..=params.epochs {
        order.shuffle(rng);
        let (gw, _) = subgradient(&model, features, signs, params.lambda, &order);
        let eta = 1.0 / (params.lambda * t as f64);
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= eta * g;
        }
        model.bias = optimal_bias(&model.weights, features, signs);
    }
    if model.weights.iter().any(|w| !w.is_finite()) || !model.bias.is_finite() {
        return Err(Error::Degenerate("classifier weights diverged".into()));
    }
    Ok(model)
}
