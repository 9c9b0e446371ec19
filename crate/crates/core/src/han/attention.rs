//! Additive attention pooling: `u_t = tanh(W h_t + b)`, score `u_t . w`,
//! masked softmax over positions, output `sum_t a_t h_t`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{axpy, dot, masked_softmax, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    /// Projection `W_w` (attention dim x input dim).
    pub proj: Matrix,
    /// Bias `b_w`.
    pub bias: Vec<f64>,
    /// Context vector `W`.
    pub context: Vec<f64>,
}

pub struct AttentionCache {
    u: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl AttentionParams {
    pub fn zeros(attn: usize, input: usize) -> Self {
        Self {
            proj: Matrix::zeros(attn, input),
            bias: vec![0.0; attn],
            context: vec![0.0; attn],
        }
    }

    pub fn init<R: Rng>(attn: usize, input: usize, scale: f64, rng: &mut R) -> Self {
        Self {
            proj: Matrix::uniform(attn, input, scale, rng),
            bias: vec![0.0; attn],
            context: (0..attn)
                .map(|_| rng.random_range(-scale..=scale))
                .collect(),
        }
    }

    /// `hs` holds the valid positions; `padded_len - hs.len()` trailing
    /// positions are masked and get weight zero.
    pub fn forward(&self, hs: &[Vec<f64>], padded_len: usize) -> (Vec<f64>, AttentionCache) {
        let n = hs.len();
        debug_assert!(n >= 1 && n <= padded_len);
        let u: Vec<Vec<f64>> = hs
            .iter()
            .map(|h| {
                let mut z = self.proj.matvec(h);
                for (zi, bi) in z.iter_mut().zip(&self.bias) {
                    *zi = (*zi + bi).tanh();
                }
                z
            })
            .collect();
        let mut scores = vec![0.0; padded_len];
        for (s, ut) in scores.iter_mut().zip(&u) {
            *s = dot(ut, &self.context);
        }
        let mask: Vec<bool> = (0..padded_len).map(|t| t < n).collect();
        let weights = masked_softmax(&scores, &mask);
        let mut pooled = vec![0.0; hs[0].len()];
        for (h, &a) in hs.iter().zip(&weights) {
            axpy(&mut pooled, a, h);
        }
        (pooled, AttentionCache { u, weights })
    }

    pub fn backward(
        &self,
        hs: &[Vec<f64>],
        cache: &AttentionCache,
        dpooled: &[f64],
        grad: &mut AttentionParams,
    ) -> Vec<Vec<f64>> {
        let a = &cache.weights[..hs.len()];
        let da: Vec<f64> = hs.iter().map(|h| dot(dpooled, h)).collect();
        let mean: f64 = a.iter().zip(&da).map(|(x, y)| x * y).sum();
        let mut dhs: Vec<Vec<f64>> = a
            .iter()
            .map(|&at| dpooled.iter().map(|d| at * d).collect())
            .collect();
        for t in 0..hs.len() {
            let ds = a[t] * (da[t] - mean);
            if ds == 0.0 {
                continue;
            }
            let ut = &cache.u[t];
            axpy(&mut grad.context, ds, ut);
            let dpre: Vec<f64> = ut
                .iter()
                .zip(&self.context)
                .map(|(u, c)| ds * c * (1.0 - u * u))
                .collect();
            grad.proj.add_outer(&dpre, &hs[t]);
            axpy(&mut grad.bias, 1.0, &dpre);
            let dh = self.proj.matvec_t(&dpre);
            axpy(&mut dhs[t], 1.0, &dh);
        }
        dhs
    }
}
