//! Single-layer LSTM with explicit backpropagation through time.
//!
//! Gate rows of the stacked weight matrix are ordered input, forget,
//! candidate, output; each row block acts on `[x_t; h_{t-1}]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{sigmoid, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub w: Matrix,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmStep {
    input: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: Matrix::zeros(4 * hidden, input + hidden),
            b: vec![0.0; 4 * hidden],
        }
    }

    /// Uniform weights in `[-scale, scale]`, forget-gate bias 1.
    pub fn init<R: Rng>(input: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        Self {
            w: Matrix::uniform(4 * hidden, input + hidden, scale, rng),
            b,
        }
    }

    pub fn hidden(&self) -> usize {
        self.b.len() / 4
    }

    pub fn input(&self) -> usize {
        self.w.cols - self.hidden()
    }

    pub fn forward(&self, xs: &[Vec<f64>]) -> Vec<LstmStep> {
        let hd = self.hidden();
        let mut h = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            let mut input = Vec::with_capacity(x.len() + hd);
            input.extend_from_slice(x);
            input.extend_from_slice(&h);
            let mut z = self.w.matvec(&input);
            for (zi, bi) in z.iter_mut().zip(&self.b) {
                *zi += bi;
            }
            let i: Vec<f64> = z[..hd].iter().map(|&v| sigmoid(v)).collect();
            let f: Vec<f64> = z[hd..2 * hd].iter().map(|&v| sigmoid(v)).collect();
            let g: Vec<f64> = z[2 * hd..3 * hd].iter().map(|&v| v.tanh()).collect();
            let o: Vec<f64> = z[3 * hd..].iter().map(|&v| sigmoid(v)).collect();
            let c_prev = c;
            c = (0..hd).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
            let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
            h = (0..hd).map(|k| o[k] * tanh_c[k]).collect();
            steps.push(LstmStep {
                input,
                i,
                f,
                g,
                o,
                c_prev,
                tanh_c,
                h: h.clone(),
            });
        }
        steps
    }

    /// Accumulates parameter gradients into `grad` given the loss gradient
    /// with respect to every hidden output; returns input gradients.
    pub fn backward(
        &self,
        steps: &[LstmStep],
        dhs: &[Vec<f64>],
        grad: &mut LstmParams,
    ) -> Vec<Vec<f64>> {
        let hd = self.hidden();
        let nin = self.input();
        let mut dxs = vec![Vec::new(); steps.len()];
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        let mut dz = vec![0.0; 4 * hd];
        for t in (0..steps.len()).rev() {
            let s = &steps[t];
            for k in 0..hd {
                let dh = dhs[t][k] + dh_next[k];
                let d_o = dh * s.tanh_c[k];
                let dc = dh * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]) + dc_next[k];
                let di = dc * s.g[k];
                let dg = dc * s.i[k];
                let df = dc * s.c_prev[k];
                dc_next[k] = dc * s.f[k];
                dz[k] = di * s.i[k] * (1.0 - s.i[k]);
                dz[hd + k] = df * s.f[k] * (1.0 - s.f[k]);
                dz[2 * hd + k] = dg * (1.0 - s.g[k] * s.g[k]);
                dz[3 * hd + k] = d_o * s.o[k] * (1.0 - s.o[k]);
            }
            grad.w.add_outer(&dz, &s.input);
            for (gb, d) in grad.b.iter_mut().zip(&dz) {
                *gb += d;
            }
            let dinput = self.w.matvec_t(&dz);
            dxs[t] = dinput[..nin].to_vec();
            dh_next = dinput[nin..].to_vec();
        }
        dxs
    }
}

/// Forward and backward LSTMs whose outputs are concatenated per position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmParams {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

pub struct BiLstmCache {
    fwd: Vec<LstmStep>,
    bwd: Vec<LstmStep>,
}

impl BiLstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            forward: LstmParams::zeros(input, hidden),
            backward: LstmParams::zeros(input, hidden),
        }
    }

    pub fn init<R: Rng>(input: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        Self {
            forward: LstmParams::init(input, hidden, scale, rng),
            backward: LstmParams::init(input, hidden, scale, rng),
        }
    }

    /// Returns `h_t = [fwd_t; bwd_t]` for every position.
    pub fn forward(&self, xs: &[Vec<f64>]) -> (Vec<Vec<f64>>, BiLstmCache) {
        let fwd = self.forward.forward(xs);
        let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
        let bwd = self.backward.forward(&rev);
        let n = xs.len();
        let hs = (0..n)
            .map(|t| {
                let mut h = fwd[t].h.clone();
                h.extend_from_slice(&bwd[n - 1 - t].h);
                h
            })
            .collect();
        (hs, BiLstmCache { fwd, bwd })
    }

    pub fn backward(
        &self,
        cache: &BiLstmCache,
        dhs: &[Vec<f64>],
        grad: &mut BiLstmParams,
    ) -> Vec<Vec<f64>> {
        let hd = self.forward.hidden();
        let n = dhs.len();
        let d_fwd: Vec<Vec<f64>> = dhs.iter().map(|d| d[..hd].to_vec()).collect();
        let d_bwd: Vec<Vec<f64>> = (0..n).map(|t| dhs[n - 1 - t][hd..].to_vec()).collect();
        let mut dx = self.forward.backward(&cache.fwd, &d_fwd, &mut grad.forward);
        let dx_rev = self
            .backward
            .backward(&cache.bwd, &d_bwd, &mut grad.backward);
        for t in 0..n {
            for (a, b) in dx[t].iter_mut().zip(&dx_rev[n - 1 - t]) {
                *a += b;
            }
        }
        dx
    }
}
