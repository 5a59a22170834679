//! Forward pass and reverse-mode gradients of the LSTM + self-attention
//! network for a single token sequence.

use nalgebra::{DMatrix, DVector};

use super::params::LstmParams;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Intermediate values kept for the backward pass.
pub struct Cache {
    ids: Vec<usize>,
    /// Gate activations per step: input, forget, cell candidate, output.
    gates: Vec<[DVector<f64>; 4]>,
    cells: Vec<DVector<f64>>,
    tanh_cells: Vec<DVector<f64>>,
    hidden: Vec<DVector<f64>>,
    /// `tanh(W_s1 h_t)` per step.
    att_hidden: Vec<DVector<f64>>,
    /// `hops × T`, rows sum to one.
    pub attention: DMatrix<f64>,
    pooled: DVector<f64>,
    pub logits: DVector<f64>,
}

pub fn forward(p: &LstmParams, ids: &[usize]) -> Cache {
    let d = p.dims();
    let h_dim = d.hidden;
    let steps = ids.len();

    let mut gates = Vec::with_capacity(steps);
    let mut cells = Vec::with_capacity(steps);
    let mut tanh_cells = Vec::with_capacity(steps);
    let mut hidden: Vec<DVector<f64>> = Vec::with_capacity(steps);
    let mut z = DVector::zeros(4 * h_dim);
    let mut h_prev = DVector::zeros(h_dim);
    let mut c_prev = DVector::zeros(h_dim);
    for &id in ids {
        z.copy_from(&p.b);
        z.gemv(1.0, &p.w_x, &p.embedding.column(id), 1.0);
        z.gemv(1.0, &p.w_h, &h_prev, 1.0);
        let i = z.rows(0, h_dim).map(sigmoid);
        let f = z.rows(h_dim, h_dim).map(sigmoid);
        let g = z.rows(2 * h_dim, h_dim).map(f64::tanh);
        let o = z.rows(3 * h_dim, h_dim).map(sigmoid);
        let c = f.component_mul(&c_prev) + i.component_mul(&g);
        let tc = c.map(f64::tanh);
        let h = o.component_mul(&tc);
        gates.push([i, f, g, o]);
        c_prev = c.clone();
        h_prev = h.clone();
        cells.push(c);
        tanh_cells.push(tc);
        hidden.push(h);
    }

    let att_hidden: Vec<DVector<f64>> = hidden
        .iter()
        .map(|h| (&p.w_s1 * h).map(f64::tanh))
        .collect();
    let mut attention = DMatrix::zeros(d.hops, steps);
    for (t, u) in att_hidden.iter().enumerate() {
        attention.set_column(t, &(&p.w_s2 * u));
    }
    for r in 0..d.hops {
        let mut row = attention.row_mut(r);
        let max = row.max();
        row.iter_mut().for_each(|x| *x = (*x - max).exp());
        let sum = row.sum();
        row.iter_mut().for_each(|x| *x /= sum);
    }

    // pooled = rows of A·H, concatenated
    let mut pooled = DVector::zeros(d.hops * h_dim);
    for r in 0..d.hops {
        let mut block = pooled.rows_mut(r * h_dim, h_dim);
        for (t, h) in hidden.iter().enumerate() {
            block.axpy(attention[(r, t)], h, 1.0);
        }
    }
    let logits = &p.w_out * &pooled + &p.b_out;

    Cache {
        ids: ids.to_vec(),
        gates,
        cells,
        tanh_cells,
        hidden,
        att_hidden,
        attention,
        pooled,
        logits,
    }
}

/// Accumulates into `grads` the gradient of a loss whose derivative with
/// respect to the logits is `d_logits`.
pub fn backward(
    p: &LstmParams,
    cache: &Cache,
    d_logits: &DVector<f64>,
    grads: &mut LstmParams,
    train_embedding: bool,
) {
    let d = p.dims();
    let h_dim = d.hidden;
    let steps = cache.ids.len();

    grads.w_out.ger(1.0, d_logits, &cache.pooled, 1.0);
    grads.b_out += d_logits;
    let d_pooled = p.w_out.tr_mul(d_logits);

    let mut d_hidden: Vec<DVector<f64>> = vec![DVector::zeros(h_dim); steps];
    let mut d_scores = DMatrix::zeros(d.hops, steps);
    for r in 0..d.hops {
        let dm = d_pooled.rows(r * h_dim, h_dim);
        let d_att: Vec<f64> = cache.hidden.iter().map(|h| dm.dot(h)).collect();
        let weighted: f64 = (0..steps).map(|t| cache.attention[(r, t)] * d_att[t]).sum();
        for t in 0..steps {
            let a = cache.attention[(r, t)];
            d_hidden[t].axpy(a, &dm, 1.0);
            d_scores[(r, t)] = a * (d_att[t] - weighted);
        }
    }
    for t in 0..steps {
        let ds = d_scores.column(t);
        let u = &cache.att_hidden[t];
        grads.w_s2.ger(1.0, &ds, u, 1.0);
        let du = p.w_s2.tr_mul(&ds);
        let da = du.zip_map(u, |g, u| g * (1.0 - u * u));
        grads.w_s1.ger(1.0, &da, &cache.hidden[t], 1.0);
        d_hidden[t].gemv_tr(1.0, &p.w_s1, &da, 1.0);
    }

    let mut dh_next = DVector::zeros(h_dim);
    let mut dc_next = DVector::zeros(h_dim);
    let mut dz = DVector::zeros(4 * h_dim);
    let zero = DVector::zeros(h_dim);
    for t in (0..steps).rev() {
        let [i, f, g, o] = &cache.gates[t];
        let tc = &cache.tanh_cells[t];
        let c_prev = if t > 0 { &cache.cells[t - 1] } else { &zero };
        let h_prev = if t > 0 { &cache.hidden[t - 1] } else { &zero };

        let dh = &d_hidden[t] + &dh_next;
        let mut dc = dc_next.clone();
        for j in 0..h_dim {
            dc[j] += dh[j] * o[j] * (1.0 - tc[j] * tc[j]);
        }
        for j in 0..h_dim {
            dz[j] = dc[j] * g[j] * i[j] * (1.0 - i[j]);
            dz[h_dim + j] = dc[j] * c_prev[j] * f[j] * (1.0 - f[j]);
            dz[2 * h_dim + j] = dc[j] * i[j] * (1.0 - g[j] * g[j]);
            dz[3 * h_dim + j] = dh[j] * tc[j] * o[j] * (1.0 - o[j]);
        }
        dc_next = dc.component_mul(f);

        let id = cache.ids[t];
        grads.w_x.ger(1.0, &dz, &p.embedding.column(id), 1.0);
        grads.w_h.ger(1.0, &dz, h_prev, 1.0);
        grads.b += &dz;
        if train_embedding {
            let dx = p.w_x.tr_mul(&dz);
            let mut col = grads.embedding.column_mut(id);
            col += dx;
        }
        dh_next = p.w_h.tr_mul(&dz);
    }
}

/// Per-sample BCE over sigmoid outputs, summed over labels, in the stable
/// form `max(x, 0) − x·y + ln(1 + e^{−|x|})`.
pub fn bce_sum(logits: &DVector<f64>, targets: &[f64]) -> f64 {
    logits
        .iter()
        .zip(targets)
        .map(|(&x, &y)| x.max(0.0) - x * y + (-x.abs()).exp().ln_1p())
        .sum()
}

/// `σ(x) − y`, the derivative of [`bce_sum`] with respect to each logit.
pub fn bce_grad(logits: &DVector<f64>, targets: &[f64], scale: f64) -> DVector<f64> {
    DVector::from_iterator(
        logits.len(),
        logits
            .iter()
            .zip(targets)
            .map(|(&x, &y)| (sigmoid(x) - y) * scale),
    )
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
