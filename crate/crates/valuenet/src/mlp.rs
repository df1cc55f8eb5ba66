//! Fixed-width multilayer perceptron over concatenated target features.
//! It only accepts the target count it was built for and is sensitive to
//! target order; it exists as a point of comparison for the set network.

use rand::Rng;
use serde::{Deserialize, Serialize};
use swarmtrack_core::{SeededStream, FEATURE_DIM, N_ACTIONS};

use crate::linalg::dense_vec;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub n_targets: usize,
    pub hidden: [usize; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<S> {
    pub config: MlpConfig,
    /// `(weight out x in, bias)` per layer.
    pub layers: Vec<(Vec<S>, Vec<S>)>,
}

impl<S: Scalar> MlpParams<S> {
    fn dims(cfg: &MlpConfig) -> [(usize, usize); 3] {
        let input = FEATURE_DIM * cfg.n_targets;
        [(cfg.hidden[0], input), (cfg.hidden[1], cfg.hidden[0]), (N_ACTIONS, cfg.hidden[1])]
    }

    pub fn zeros(cfg: &MlpConfig) -> Self {
        let layers = Self::dims(cfg)
            .iter()
            .map(|&(o, i)| (vec![S::ZERO; o * i], vec![S::ZERO; o]))
            .collect();
        Self { config: cfg.clone(), layers }
    }

    pub fn init(cfg: &MlpConfig, stream: &mut SeededStream) -> Self {
        let mut p = Self::zeros(cfg);
        for ((w, _), (o, i)) in p.layers.iter_mut().zip(Self::dims(cfg)) {
            let bound = (6.0 / (o + i) as f64).sqrt();
            w.iter_mut().for_each(|v| *v = S::from_f64(stream.gen_range(-bound..bound)));
        }
        p
    }

    /// Q-values for a `6 * n_targets` input vector.
    pub fn forward(&self, input: &[S]) -> Result<Vec<S>> {
        let expected = FEATURE_DIM * self.config.n_targets;
        if input.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "MLP built for {} targets expects {expected} inputs, got {}",
                self.config.n_targets,
                input.len()
            )));
        }
        let mut x = input.to_vec();
        let last = self.layers.len() - 1;
        for (k, (w, b)) in self.layers.iter().enumerate() {
            let mut y = vec![S::ZERO; b.len()];
            dense_vec(w, b, &x, &mut y);
            if k < last {
                y.iter_mut().for_each(|v| {
                    if *v < S::ZERO {
                        *v = S::ZERO
                    }
                });
            }
            x = y;
        }
        Ok(x)
    }
}
