use super::IntensityImage;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

/// Detector noise. Both models are scaled to the image peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Additive white noise with standard deviation `sigma · peak`.
    GaussianSigmaRel { sigma: f64 },
    /// Shot noise with the peak mapped to `scale` expected counts.
    PoissonScale { scale: f64 },
}

impl NoiseModel {
    pub fn is_trivial(&self) -> bool {
        match *self {
            NoiseModel::GaussianSigmaRel { sigma } => sigma == 0.0,
            NoiseModel::PoissonScale { .. } => false,
        }
    }
}

/// Deterministic for a given seed. Output is clipped at zero.
pub fn add_noise(img: &IntensityImage, seed: u64, model: &NoiseModel) -> IntensityImage {
    if model.is_trivial() {
        return img.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let peak = img.peak();
    let pixels = match *model {
        NoiseModel::GaussianSigmaRel { sigma } => {
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            img.pixels
                .iter()
                .map(|&p| (p + sigma * peak * normal.sample(&mut rng)).max(0.0))
                .collect()
        }
        NoiseModel::PoissonScale { scale } => {
            if !(peak > 0.0 && scale > 0.0) {
                return img.clone();
            }
            let k = scale / peak;
            img.pixels
                .iter()
                .map(|&p| {
                    let mean = p * k;
                    if mean <= 0.0 {
                        0.0
                    } else {
                        Poisson::new(mean).expect("positive mean").sample(&mut rng) / k
                    }
                })
                .collect()
        }
    };
    IntensityImage {
        grid: img.grid,
        pixels,
    }
}
