use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::rng;

/// All trainable tensors of the network.
///
/// Gate blocks in `w_x`, `w_h` and `b` are stacked input, forget, cell,
/// output, `hidden` rows each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    /// `emb_dim × vocab`; column `i` is token `i`.
    pub embedding: DMatrix<f64>,
    pub w_x: DMatrix<f64>,
    pub w_h: DMatrix<f64>,
    pub b: DVector<f64>,
    /// `d_a × hidden`
    pub w_s1: DMatrix<f64>,
    /// `hops × d_a`
    pub w_s2: DMatrix<f64>,
    /// `n_labels × (hops · hidden)`
    pub w_out: DMatrix<f64>,
    pub b_out: DVector<f64>,
}

/// Shape of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub vocab: usize,
    pub emb: usize,
    pub hidden: usize,
    pub attention: usize,
    pub hops: usize,
    pub labels: usize,
}

impl LstmParams {
    pub fn zeros(d: Dims) -> Self {
        LstmParams {
            embedding: DMatrix::zeros(d.emb, d.vocab),
            w_x: DMatrix::zeros(4 * d.hidden, d.emb),
            w_h: DMatrix::zeros(4 * d.hidden, d.hidden),
            b: DVector::zeros(4 * d.hidden),
            w_s1: DMatrix::zeros(d.attention, d.hidden),
            w_s2: DMatrix::zeros(d.hops, d.attention),
            w_out: DMatrix::zeros(d.labels, d.hops * d.hidden),
            b_out: DVector::zeros(d.labels),
        }
    }

    /// Uniform `±1/√fan_in` for recurrent and linear layers, `±0.1` for a
    /// randomly initialized embedding, zero biases.
    pub fn init(d: Dims, embedding: Option<DMatrix<f64>>, seed: u64) -> Self {
        let mut rng = rng::stream(seed, 0x157);
        let mut p = LstmParams::zeros(d);
        let fill = |m: &mut DMatrix<f64>, bound: f64, rng: &mut rng::Rng| {
            let dist = Uniform::new_inclusive(-bound, bound);
            m.iter_mut().for_each(|x| *x = dist.sample(rng));
        };
        match embedding {
            Some(e) => p.embedding = e,
            None => fill(&mut p.embedding, 0.1, &mut rng),
        }
        let lstm_bound = 1.0 / (d.hidden as f64).sqrt();
        fill(&mut p.w_x, lstm_bound, &mut rng);
        fill(&mut p.w_h, lstm_bound, &mut rng);
        fill(&mut p.w_s1, 1.0 / (d.hidden as f64).sqrt(), &mut rng);
        fill(&mut p.w_s2, 1.0 / (d.attention as f64).sqrt(), &mut rng);
        fill(
            &mut p.w_out,
            1.0 / ((d.hops * d.hidden) as f64).sqrt(),
            &mut rng,
        );
        p
    }

    pub fn dims(&self) -> Dims {
        Dims {
            vocab: self.embedding.ncols(),
            emb: self.embedding.nrows(),
            hidden: self.w_h.ncols(),
            attention: self.w_s1.nrows(),
            hops: self.w_s2.nrows(),
            labels: self.w_out.nrows(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        LstmParams::zeros(self.dims())
    }

    /// Tensors in a fixed order, embedding first.
    pub fn slices(&self) -> [&[f64]; 8] {
        [
            self.embedding.as_slice(),
            self.w_x.as_slice(),
            self.w_h.as_slice(),
            self.b.as_slice(),
            self.w_s1.as_slice(),
            self.w_s2.as_slice(),
            self.w_out.as_slice(),
            self.b_out.as_slice(),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 8] {
        [
            self.embedding.as_mut_slice(),
            self.w_x.as_mut_slice(),
            self.w_h.as_mut_slice(),
            self.b.as_mut_slice(),
            self.w_s1.as_mut_slice(),
            self.w_s2.as_mut_slice(),
            self.w_out.as_mut_slice(),
            self.b_out.as_mut_slice(),
        ]
    }

    pub fn names() -> [&'static str; 8] {
        [
            "embedding",
            "w_x",
            "w_h",
            "b",
            "w_s1",
            "w_s2",
            "w_out",
            "b_out",
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.slices()
            .iter()
            .all(|s| s.iter().all(|x| x.is_finite()))
    }

    pub fn fill_zero(&mut self) {
        for s in self.slices_mut() {
            s.fill(0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|x| *x *= factor);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

pub struct Adam {
    config: AdamConfig,
    m: LstmParams,
    v: LstmParams,
    step: i32,
    /// Tensor indices (in [`LstmParams::slices`] order) left untouched.
    frozen: Vec<usize>,
}

impl Adam {
    pub fn new(config: AdamConfig, like: &LstmParams, frozen: Vec<usize>) -> Self {
        Adam {
            config,
            m: like.zeros_like(),
            v: like.zeros_like(),
            step: 0,
            frozen,
        }
    }

    pub fn update(&mut self, params: &mut LstmParams, grads: &LstmParams) {
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step);
        let bc2 = 1.0 - c.beta2.powi(self.step);
        let g_all = grads.slices();
        let m_all = self.m.slices_mut();
        let v_all = self.v.slices_mut();
        for (idx, ((p, g), (m, v))) in params
            .slices_mut()
            .into_iter()
            .zip(g_all)
            .zip(m_all.into_iter().zip(v_all))
            .enumerate()
        {
            if self.frozen.contains(&idx) {
                continue;
            }
            for j in 0..p.len() {
                m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
                v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
            }
        }
    }
}

/// Random parameters for tests and benchmarks.
pub fn random_params<R: Rng>(d: Dims, rng: &mut R, scale: f64) -> LstmParams {
    let mut p = LstmParams::zeros(d);
    let dist = Uniform::new_inclusive(-scale, scale);
    for s in p.slices_mut() {
        s.iter_mut().for_each(|x| *x = dist.sample(rng));
    }
    p
}
