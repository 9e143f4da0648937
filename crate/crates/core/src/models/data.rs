//! Seeded synthetic datasets.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};

/// Noise standard deviation of the synthetic regression targets.
pub const REGRESSION_NOISE_SD: f64 = 0.2;

/// `2 cos(x) sin(x) - 0.1 x^2`.
pub fn regression_truth(x: f64) -> f64 {
    2.0 * x.cos() * x.sin() - 0.1 * x * x
}

/// `n` inputs uniform on `[-6, 6]` with targets `regression_truth(x) + N(0, 0.2^2)`.
pub fn synth_regression_data(n: usize, seed: u64) -> Result<(DVector<f64>, DVector<f64>)> {
    if n == 0 {
        return Err(Error::Config("need at least one data point".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, REGRESSION_NOISE_SD).expect("valid sd");
    let x = DVector::from_fn(n, |_, _| rng.random_range(-6.0..=6.0));
    let y = x.map(|xi| regression_truth(xi) + noise.sample(&mut rng));
    Ok((x, y))
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlobKind {
    /// Two isotropic blobs whose centres are `separation` standard
    /// deviations apart.
    TwoClass { separation: f64 },
    /// `classes` blobs evenly spaced on a circle of the given radius (in
    /// standard deviations).
    KClass { classes: usize, radius: f64 },
}

/// Labelled 2-D inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationData {
    pub inputs: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl ClassificationData {
    /// 0/1 labels (two-class data only).
    pub fn binary_labels(&self) -> DVector<f64> {
        DVector::from_iterator(self.labels.len(), self.labels.iter().map(|&l| l as f64))
    }

    /// N x K one-hot encoding.
    pub fn one_hot(&self) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(self.labels.len(), self.classes);
        for (n, &l) in self.labels.iter().enumerate() {
            y[(n, l)] = 1.0;
        }
        y
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Gaussian blobs with unit spread; labels are assigned round-robin so
/// class counts differ by at most one.
pub fn synth_classification_data(kind: &BlobKind, n: usize, seed: u64) -> Result<ClassificationData> {
    let centres: Vec<[f64; 2]> = match *kind {
        BlobKind::TwoClass { separation } => {
            vec![[-0.5 * separation, 0.0], [0.5 * separation, 0.0]]
        }
        BlobKind::KClass { classes, radius } => {
            if classes < 2 {
                return Err(Error::Config("need at least two classes".into()));
            }
            (0..classes)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / classes as f64;
                    [radius * t.cos(), radius * t.sin()]
                })
                .collect()
        }
    };
    let k = centres.len();
    if n < k {
        return Err(Error::Config(format!("need at least {k} points for {k} classes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    labels.shuffle(&mut rng);
    let mut inputs = DMatrix::zeros(n, 2);
    for (i, &l) in labels.iter().enumerate() {
        for j in 0..2 {
            let e: f64 = StandardNormal.sample(&mut rng);
            inputs[(i, j)] = centres[l][j] + e;
        }
    }
    Ok(ClassificationData {
        inputs,
        labels,
        classes: k,
    })
}

/// Synthetic grey-scale "images" (values in `[0, 255]`) lying near a
/// `rank`-dimensional affine subspace: a smooth mean image plus smooth
/// loading patterns weighted by standard-normal latents, plus small
/// Gaussian pixel noise. One image per row.
pub fn synth_low_rank_images(
    n: usize,
    height: usize,
    width: usize,
    rank: usize,
    noise_sd: f64,
    seed: u64,
) -> DMatrix<f64> {
    let d = height * width;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coord = |p: usize| {
        let (r, c) = (p / width, p % width);
        (r as f64 / height as f64, c as f64 / width as f64)
    };
    let mean = DVector::from_fn(d, |p, _| {
        let (u, v) = coord(p);
        let blob = (-((u - 0.5).powi(2) + (v - 0.5).powi(2)) / 0.08).exp();
        60.0 + 120.0 * blob
    });
    let patterns: Vec<DVector<f64>> = (0..rank)
        .map(|k| {
            let fu: f64 = rng.random_range(1.0..3.0);
            let fv: f64 = rng.random_range(1.0..3.0);
            let phase: f64 = rng.random_range(0.0..2.0 * PI);
            DVector::from_fn(d, |p, _| {
                let (u, v) = coord(p);
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                30.0 * (PI * fu * u + phase).sin() * (PI * fv * v + sign * phase).cos()
            })
        })
        .collect();
    let noise = Normal::new(0.0, noise_sd.max(0.0)).expect("valid sd");
    let mut images = DMatrix::zeros(n, d);
    for i in 0..n {
        let mut img = mean.clone();
        for pat in &patterns {
            let x: f64 = StandardNormal.sample(&mut rng);
            img.axpy(x, pat, 1.0);
        }
        for p in 0..d {
            let e = if noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            images[(i, p)] = (img[p] + e).clamp(0.0, 255.0);
        }
    }
    images
}

/// Replace a `fraction` of the pixels of every image with a value drawn
/// uniformly from `{0, ..., 255}`.
pub fn corrupt_pixels(images: &DMatrix<f64>, fraction: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = images.ncols();
    let count = (fraction * d as f64).round() as usize;
    let mut out = images.clone();
    let mut idx: Vec<usize> = (0..d).collect();
    for i in 0..images.nrows() {
        idx.shuffle(&mut rng);
        for &p in &idx[..count.min(d)] {
            out[(i, p)] = rng.random_range(0..=255u32) as f64;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_values() {
        assert_eq!(regression_truth(0.0), 0.0);
        let x = PI / 4.0;
        assert!((regression_truth(x) - (1.0 - 0.1 * PI * PI / 16.0)).abs() < 1e-14);
    }

    #[test]
    fn regression_noise_level() {
        let (x, y) = synth_regression_data(100_000, 11).unwrap();
        let res: Vec<f64> = x.iter().zip(y.iter()).map(|(&a, &b)| b - regression_truth(a)).collect();
        let mean = res.iter().sum::<f64>() / res.len() as f64;
        let var = res.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (res.len() - 1) as f64;
        assert!((var - 0.04).abs() < 0.002, "variance {var}");
        assert!(x.iter().all(|&v| (-6.0..=6.0).contains(&v)));
    }

    #[test]
    fn one_hot_rows_sum_to_one_and_balanced() {
        let data = synth_classification_data(&BlobKind::KClass { classes: 3, radius: 4.0 }, 100, 5).unwrap();
        let y = data.one_hot();
        for row in y.row_iter() {
            assert_eq!(row.sum(), 1.0);
        }
        let counts: Vec<usize> = (0..3).map(|k| data.labels.iter().filter(|&&l| l == k).count()).collect();
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
    }

    #[test]
    fn classification_data_is_deterministic() {
        let kind = BlobKind::TwoClass { separation: 6.0 };
        let a = synth_classification_data(&kind, 40, 9).unwrap();
        let b = synth_classification_data(&kind, 40, 9).unwrap();
        assert_eq!(a, b);
        assert!(synth_classification_data(&kind, 1, 9).is_err());
    }

    #[test]
    fn corruption_touches_requested_fraction_at_most() {
        let imgs = synth_low_rank_images(3, 6, 5, 2, 1.0, 1);
        let bad = corrupt_pixels(&imgs, 1.0 / 3.0, 2);
        for i in 0..3 {
            let changed = (0..30).filter(|&p| imgs[(i, p)] != bad[(i, p)]).count();
            assert!(changed <= 10);
        }
        assert!(imgs.iter().all(|&v| (0.0..=255.0).contains(&v)));
    }
}
