//! Planted-support fixture: a grid of segments and a black box that is an
//! affine function of which segments survive masking.

use midlime::audio::Spectrogram;
use midlime::predictor::PredictorError;
use midlime::segmentation::SegmentMap;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

pub const BLOCK: usize = 4;
pub const FLOOR_DB: f64 = -80.0;

pub struct Planted {
    pub spec: Spectrogram,
    pub map: SegmentMap,
    pub coefs: Vec<f64>,
    pub intercept: f64,
    pub support: Vec<usize>,
}

/// `grid_rows × grid_cols` square segments; `support` coefficients with
/// magnitude in [0.05, 1] and random sign, the rest zero.
pub fn planted(grid_rows: usize, grid_cols: usize, support: usize, seed: u64) -> Planted {
    let n = grid_rows * grid_cols;
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng);
    let mut support_ids: Vec<usize> = ids[..support].to_vec();
    support_ids.sort_unstable();
    let mut coefs = vec![0.0; n];
    for &id in &support_ids {
        let magnitude = rng.random_range(0.05..=1.0);
        coefs[id] = if rng.random::<bool>() { magnitude } else { -magnitude };
    }
    let labels = Array2::from_shape_fn((grid_rows * BLOCK, grid_cols * BLOCK), |(r, c)| {
        ((r / BLOCK) * grid_cols + c / BLOCK) as u32
    });
    let values = Array2::from_shape_fn(labels.dim(), |(r, c)| -20.0 - ((r * 7 + c * 3) % 11) as f64);
    Planted {
        spec: Spectrogram::db_image(values, FLOOR_DB).unwrap(),
        map: SegmentMap::from_labels(labels).unwrap(),
        coefs,
        intercept: 0.3,
        support: support_ids,
    }
}

impl Planted {
    /// Which segments of `spec` are unmasked, read from each block's corner.
    pub fn mask_of(&self, spec: &Spectrogram) -> Vec<bool> {
        let cols = spec.frames() / BLOCK;
        (0..self.coefs.len()).map(|k| spec.values[[(k / cols) * BLOCK, (k % cols) * BLOCK]] > FLOOR_DB).collect()
    }

    pub fn affine(&self, mask: &[bool]) -> f64 {
        self.intercept + mask.iter().zip(&self.coefs).filter(|(m, _)| **m).map(|(_, c)| c).sum::<f64>()
    }

    /// Exact affine black box over spectrograms.
    pub fn black_box(&self) -> impl FnMut(&[Spectrogram]) -> Result<Vec<f64>, PredictorError> + '_ {
        move |batch| Ok(batch.iter().map(|s| self.affine(&self.mask_of(s))).collect())
    }

    /// Affine black box plus `sigma` Gaussian noise that is a deterministic
    /// function of the mask, so repeated queries agree.
    pub fn noisy_black_box(&self, sigma: f64) -> impl FnMut(&[Spectrogram]) -> Result<Vec<f64>, PredictorError> + '_ {
        move |batch| {
            Ok(batch
                .iter()
                .map(|s| {
                    let mask = self.mask_of(s);
                    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
                    for &m in &mask {
                        h = (h ^ m as u64).wrapping_mul(0x1000_0000_01b3);
                    }
                    let mut rng = rand::rngs::StdRng::seed_from_u64(h);
                    let z: f64 = StandardNormal.sample(&mut rng);
                    self.affine(&mask) + sigma * z
                })
                .collect())
        }
    }
}

/// Asymptotic Kolmogorov-Smirnov p-value of `sample` against Uniform[0,1].
pub fn ks_uniform_p(sample: &[f64]) -> (f64, f64) {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        d = d.max((i as f64 + 1.0) / n - x).max(x - i as f64 / n);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    (d, p.clamp(0.0, 1.0))
}
