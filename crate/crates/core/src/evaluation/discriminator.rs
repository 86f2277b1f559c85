use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedMix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscriminatorConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Expected held-out share of each class.
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            hidden: 64,
            epochs: 10,
            lr: 0.05,
            batch_size: 32,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorReport {
    /// Held-out accuracy; lower means the fake set is harder to tell apart.
    pub accuracy: f64,
    pub train_accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub loss_curve: Vec<f64>,
}

pub const MAX_CLASS_RATIO: f64 = 10.0;

struct Mlp {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array1<f64>,
    b2: f64,
}

impl Mlp {
    fn init(d: usize, h: usize, rng: &mut crate::rng::Rng) -> Self {
        let a1 = 1.0 / (d as f64).sqrt();
        let a2 = 1.0 / (h as f64).sqrt();
        Mlp {
            w1: Array2::from_shape_fn((d, h), |_| rng.random_range(-a1..a1)),
            b1: Array1::zeros(h),
            w2: Array1::from_shape_fn(h, |_| rng.random_range(-a2..a2)),
            b2: 0.0,
        }
    }

    /// Logits and hidden activations of a batch.
    fn forward(&self, x: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
        let mut h = x.dot(&self.w1);
        h += &self.b1;
        h.mapv_inplace(|z| z.max(0.0));
        let logits = h.dot(&self.w2) + self.b2;
        (logits, h)
    }

    /// One gradient step on mean binary cross-entropy; returns the loss.
    fn step(&mut self, x: &Array2<f64>, y: &Array1<f64>, lr: f64) -> f64 {
        let n = x.nrows() as f64;
        let (logits, h) = self.forward(x);
        let loss = logits
            .iter()
            .zip(y)
            .map(|(&z, &t)| z.max(0.0) - z * t + (-z.abs()).exp().ln_1p())
            .sum::<f64>()
            / n;
        let dz: Array1<f64> = logits
            .iter()
            .zip(y)
            .map(|(&z, &t)| (sigmoid(z) - t) / n)
            .collect();
        let gw2 = h.t().dot(&dz);
        let gb2 = dz.sum();
        let mut dh = dz.view().insert_axis(Axis(1)).dot(&self.w2.view().insert_axis(Axis(0)));
        dh.zip_mut_with(&h, |d, &a| {
            if a <= 0.0 {
                *d = 0.0;
            }
        });
        let gw1 = x.t().dot(&dh);
        let gb1 = dh.sum_axis(Axis(0));
        self.w1.scaled_add(-lr, &gw1);
        self.b1.scaled_add(-lr, &gb1);
        self.w2.scaled_add(-lr, &gw2);
        self.b2 -= lr * gb2;
        loss
    }

    fn accuracy(&self, x: &Array2<f64>, y: &Array1<f64>) -> f64 {
        let (logits, _) = self.forward(x);
        let hits = logits.iter().zip(y).filter(|(&z, &t)| (z > 0.0) == (t > 0.5)).count();
        hits as f64 / y.len() as f64
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn matrix(rows: &[&Vec<f64>], d: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), d), |(i, j)| rows[i][j])
}

/// Trains a one-hidden-layer classifier to separate `real` (label 1) from
/// `fake` (label 0) and reports accuracy on a held-out part of each class.
pub fn train_discriminator(real: &[Vec<f64>], fake: &[Vec<f64>], config: &DiscriminatorConfig) -> Result<DiscriminatorReport> {
    if real.len() < 2 || fake.len() < 2 {
        return Err(Error::Invalid("each class needs at least two examples".into()));
    }
    let (lo, hi) = (real.len().min(fake.len()) as f64, real.len().max(fake.len()) as f64);
    if hi / lo > MAX_CLASS_RATIO {
        return Err(Error::Invalid(format!(
            "class imbalance {}:{} exceeds {MAX_CLASS_RATIO}:1; subsample the larger class",
            real.len(),
            fake.len()
        )));
    }
    if !(config.test_fraction > 0.0 && config.test_fraction < 1.0) || config.hidden == 0 || config.batch_size == 0 {
        return Err(Error::Config("invalid discriminator configuration".into()));
    }
    let d = real[0].len();
    if real.iter().chain(fake).any(|v| v.len() != d) {
        return Err(Error::Invalid("vectors differ in dimension".into()));
    }

    // Split by content: every copy of a vector lands on the same side, so
    // duplicated snippets cannot be memorised across the split.
    let side = |v: &Vec<f64>| {
        let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_bits().to_le_bytes()).collect();
        let h = SeedMix::new(config.seed).str("split").bytes(&bytes).finish();
        ((h >> 11) as f64 / (1u64 << 53) as f64) < config.test_fraction
    };
    let mut train: Vec<(&Vec<f64>, f64)> = Vec::new();
    let mut test: Vec<(&Vec<f64>, f64)> = Vec::new();
    for (set, label) in [(real, 1.0), (fake, 0.0)] {
        let before = (train.len(), test.len());
        for v in set {
            if side(v) {
                test.push((v, label));
            } else {
                train.push((v, label));
            }
        }
        if train.len() == before.0 || test.len() == before.1 {
            return Err(Error::Invalid(
                "too few distinct vectors to hold out part of each class".into(),
            ));
        }
    }

    let mut rng = SeedMix::new(config.seed).str("discriminator").rng();
    let mut model = Mlp::init(d, config.hidden, &mut rng);
    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let rows: Vec<&Vec<f64>> = chunk.iter().map(|&i| train[i].0).collect();
            let y: Array1<f64> = chunk.iter().map(|&i| train[i].1).collect();
            total += model.step(&matrix(&rows, d), &y, config.lr) * chunk.len() as f64;
        }
        let epoch_loss = total / train.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::NonFinite { index: loss_curve.len() });
        }
        loss_curve.push(epoch_loss);
    }

    let eval = |set: &[(&Vec<f64>, f64)]| {
        let rows: Vec<&Vec<f64>> = set.iter().map(|r| r.0).collect();
        let y: Array1<f64> = set.iter().map(|r| r.1).collect();
        model.accuracy(&matrix(&rows, d), &y)
    };
    Ok(DiscriminatorReport {
        accuracy: eval(&test),
        train_accuracy: eval(&train),
        n_train: train.len(),
        n_test: test.len(),
        loss_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn imbalance_rejected() {
        let a = vec![vec![0.0; 3]; 30];
        let b = vec![vec![1.0; 3]; 2];
        assert!(train_discriminator(&a, &b, &DiscriminatorConfig::default()).is_err());
        assert!(train_discriminator(&a, &[], &DiscriminatorConfig::default()).is_err());
    }

    #[test]
    fn identical_sets_score_one_half() {
        let mut rng = crate::rng::rng(5);
        let real: Vec<Vec<f64>> = (0..300).map(|_| (0..12).map(|_| f64::from(rng.random_bool(0.5))).collect()).collect();
        let r = train_discriminator(&real, &real, &DiscriminatorConfig::default()).unwrap();
        assert_eq!(r.accuracy, 0.5);
    }

    #[test]
    fn separable_classes() {
        let mut rng = crate::rng::rng(2);
        let real: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..10).map(|j| if j < 3 { 1.0 } else { f64::from(rng.random_bool(0.5)) }).collect())
            .collect();
        let fake: Vec<Vec<f64>> = real
            .iter()
            .map(|v| v.iter().enumerate().map(|(j, &x)| if j < 3 { 0.0 } else { x }).collect())
            .collect();
        let r = train_discriminator(&real, &fake, &DiscriminatorConfig::default()).unwrap();
        assert!(r.accuracy >= 0.95, "{r:?}");
        assert_eq!(r.n_train + r.n_test, 400);
    }
}
