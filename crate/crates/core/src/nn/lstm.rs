//! LSTM cell and (bi)directional sequence layer.
//!
//! ```text
//! f = σ(W_f x + U_f h + b_f)     i = σ(W_i x + U_i h + b_i)
//! o = σ(W_o x + U_o h + b_o)     c̃ = tanh(W_c x + U_c h + b_c)
//! c' = f ⊙ c + i ⊙ c̃            h' = o ⊙ tanh(c')
//! ```

use rand::Rng;

use super::tensor::{matvec_acc, matvec_t_acc, outer_acc, Tensor};
use super::{NnError, Result};

/// Gate order used by the parameter arrays below: forget, input, output, candidate.
const GATES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub input: usize,
    pub hidden: usize,
    /// `W_f, W_i, W_o, W_c`, each `hidden × input`.
    pub w: [Tensor; GATES],
    /// `U_f, U_i, U_o, U_c`, each `hidden × hidden`.
    pub u: [Tensor; GATES],
    /// `b_f, b_i, b_o, b_c`.
    pub b: [Tensor; GATES],
}

impl LstmCellParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input,
            hidden,
            w: std::array::from_fn(|_| Tensor::zeros(&[hidden, input])),
            u: std::array::from_fn(|_| Tensor::zeros(&[hidden, hidden])),
            b: std::array::from_fn(|_| Tensor::zeros(&[hidden])),
        }
    }

    /// Glorot-uniform weights, zero biases except a forget-gate bias of 1.
    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input, hidden);
        for g in 0..GATES {
            p.w[g] = Tensor::glorot(&[hidden, input], input, hidden, rng);
            p.u[g] = Tensor::glorot(&[hidden, hidden], hidden, hidden, rng);
        }
        p.b[0].fill(1.0);
        p
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.w.iter().chain(&self.u).chain(&self.b)
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.w.iter_mut().chain(&mut self.u).chain(&mut self.b)
    }
}

/// Intermediates of one cell step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct CellCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Post-activation gates in [`GATES`] order.
    gates: [Vec<f64>; GATES],
    tanh_c: Vec<f64>,
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn lstm_cell_forward(
    params: &LstmCellParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, CellCache)> {
    let h = params.hidden;
    if x.len() != params.input {
        return Err(NnError::ShapeMismatch(format!(
            "input has {} features, cell expects {}",
            x.len(),
            params.input
        )));
    }
    if h_prev.len() != h || c_prev.len() != h {
        return Err(NnError::ShapeMismatch(format!(
            "state sizes ({}, {}) do not match hidden size {h}",
            h_prev.len(),
            c_prev.len()
        )));
    }
    let gates: [Vec<f64>; GATES] = std::array::from_fn(|g| {
        let mut a = params.b[g].data().to_vec();
        matvec_acc(&mut a, params.w[g].data(), x);
        matvec_acc(&mut a, params.u[g].data(), h_prev);
        if g == 3 {
            a.iter_mut().for_each(|v| *v = v.tanh());
        } else {
            a.iter_mut().for_each(|v| *v = sigmoid(*v));
        }
        a
    });
    let [f, i, o, cand] = &gates;
    let c: Vec<f64> = (0..h).map(|k| f[k] * c_prev[k] + i[k] * cand[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h_out: Vec<f64> = (0..h).map(|k| o[k] * tanh_c[k]).collect();
    let cache = CellCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates,
        tanh_c,
    };
    Ok((h_out, c, cache))
}

/// Accumulates parameter gradients into `grads` and returns
/// `(dx, dh_prev, dc_prev)`.
pub fn lstm_cell_backward(
    params: &LstmCellParams,
    cache: &CellCache,
    dh: &[f64],
    dc: &[f64],
    grads: &mut LstmCellParams,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let h = params.hidden;
    let [f, i, o, cand] = &cache.gates;
    let mut dc_total = vec![0.0; h];
    let mut da: [Vec<f64>; GATES] = std::array::from_fn(|_| vec![0.0; h]);
    let mut dc_prev = vec![0.0; h];
    for k in 0..h {
        let t = cache.tanh_c[k];
        dc_total[k] = dc[k] + dh[k] * o[k] * (1.0 - t * t);
        let d_o = dh[k] * t;
        let d_f = dc_total[k] * cache.c_prev[k];
        let d_i = dc_total[k] * cand[k];
        let d_cand = dc_total[k] * i[k];
        dc_prev[k] = dc_total[k] * f[k];
        da[0][k] = d_f * f[k] * (1.0 - f[k]);
        da[1][k] = d_i * i[k] * (1.0 - i[k]);
        da[2][k] = d_o * o[k] * (1.0 - o[k]);
        da[3][k] = d_cand * (1.0 - cand[k] * cand[k]);
    }
    let mut dx = vec![0.0; params.input];
    let mut dh_prev = vec![0.0; h];
    for g in 0..GATES {
        outer_acc(grads.w[g].data_mut(), &da[g], &cache.x);
        outer_acc(grads.u[g].data_mut(), &da[g], &cache.h_prev);
        for (b, d) in grads.b[g].data_mut().iter_mut().zip(&da[g]) {
            *b += d;
        }
        matvec_t_acc(&mut dx, params.w[g].data(), &da[g]);
        matvec_t_acc(&mut dh_prev, params.u[g].data(), &da[g]);
    }
    (dx, dh_prev, dc_prev)
}

/// One recurrent layer: a forward-in-time cell plus, when bidirectional, an
/// independent backward-in-time cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentLayer {
    pub forward: LstmCellParams,
    pub backward: Option<LstmCellParams>,
}

impl RecurrentLayer {
    pub fn init<R: Rng>(input: usize, hidden: usize, bidirectional: bool, rng: &mut R) -> Self {
        let forward = LstmCellParams::init(input, hidden, rng);
        let backward = bidirectional.then(|| LstmCellParams::init(input, hidden, rng));
        Self { forward, backward }
    }

    pub fn zeros(input: usize, hidden: usize, bidirectional: bool) -> Self {
        Self {
            forward: LstmCellParams::zeros(input, hidden),
            backward: bidirectional.then(|| LstmCellParams::zeros(input, hidden)),
        }
    }

    pub fn input(&self) -> usize {
        self.forward.input
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden
    }

    /// Width of the per-step output.
    pub fn output(&self) -> usize {
        self.forward.hidden * if self.backward.is_some() { 2 } else { 1 }
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.forward
            .tensors()
            .chain(self.backward.iter().flat_map(|b| b.tensors()))
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.forward
            .tensors_mut()
            .chain(self.backward.iter_mut().flat_map(|b| b.tensors_mut()))
    }
}

#[derive(Debug, Clone)]
pub struct LayerCache {
    steps: usize,
    forward: Vec<CellCache>,
    /// Indexed by time step, not by processing order.
    backward: Vec<CellCache>,
}

fn run_direction(
    cell: &LstmCellParams,
    seq: &[f64],
    steps: usize,
    reverse: bool,
    out: &mut [f64],
    out_width: usize,
    out_offset: usize,
) -> Result<Vec<CellCache>> {
    let h = cell.hidden;
    let d = cell.input;
    let mut hs = vec![0.0; h];
    let mut cs = vec![0.0; h];
    let mut caches: Vec<Option<CellCache>> = vec![None; steps];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..steps).rev())
    } else {
        Box::new(0..steps)
    };
    for t in order {
        let (h_new, c_new, cache) = lstm_cell_forward(cell, &seq[t * d..(t + 1) * d], &hs, &cs)?;
        out[t * out_width + out_offset..t * out_width + out_offset + h].copy_from_slice(&h_new);
        hs = h_new;
        cs = c_new;
        caches[t] = Some(cache);
    }
    Ok(caches.into_iter().map(|c| c.expect("every step visited")).collect())
}

/// Runs `seq` (`steps × input`, row-major) through the layer; returns the
/// `steps × output` hidden sequence. Bidirectional output at step t is
/// `[h_fwd_t, h_bwd_t]`.
pub fn layer_forward(layer: &RecurrentLayer, seq: &[f64], steps: usize) -> Result<(Vec<f64>, LayerCache)> {
    if steps == 0 || seq.len() != steps * layer.input() {
        return Err(NnError::ShapeMismatch(format!(
            "sequence of {} values is not {steps} steps × {} features",
            seq.len(),
            layer.input()
        )));
    }
    let width = layer.output();
    let mut out = vec![0.0; steps * width];
    let forward = run_direction(&layer.forward, seq, steps, false, &mut out, width, 0)?;
    let backward = match &layer.backward {
        Some(cell) => run_direction(cell, seq, steps, true, &mut out, width, layer.hidden())?,
        None => Vec::new(),
    };
    Ok((
        out,
        LayerCache {
            steps,
            forward,
            backward,
        },
    ))
}

/// Backpropagates `d_out` (`steps × output`) through the layer, accumulating
/// into `grads`; returns the gradient w.r.t. the input sequence.
pub fn layer_backward(
    layer: &RecurrentLayer,
    cache: &LayerCache,
    d_out: &[f64],
    grads: &mut RecurrentLayer,
) -> Vec<f64> {
    let steps = cache.steps;
    let h = layer.hidden();
    let d = layer.input();
    let width = layer.output();
    let mut d_seq = vec![0.0; steps * d];

    let mut dh_carry = vec![0.0; h];
    let mut dc_carry = vec![0.0; h];
    for t in (0..steps).rev() {
        let dh: Vec<f64> = (0..h)
            .map(|k| d_out[t * width + k] + dh_carry[k])
            .collect();
        let (dx, dh_prev, dc_prev) =
            lstm_cell_backward(&layer.forward, &cache.forward[t], &dh, &dc_carry, &mut grads.forward);
        for (a, b) in d_seq[t * d..(t + 1) * d].iter_mut().zip(&dx) {
            *a += b;
        }
        dh_carry = dh_prev;
        dc_carry = dc_prev;
    }

    if let (Some(cell), Some(g)) = (&layer.backward, grads.backward.as_mut()) {
        let mut dh_carry = vec![0.0; h];
        let mut dc_carry = vec![0.0; h];
        for t in 0..steps {
            let dh: Vec<f64> = (0..h)
                .map(|k| d_out[t * width + h + k] + dh_carry[k])
                .collect();
            let (dx, dh_prev, dc_prev) =
                lstm_cell_backward(cell, &cache.backward[t], &dh, &dc_carry, g);
            for (a, b) in d_seq[t * d..(t + 1) * d].iter_mut().zip(&dx) {
                *a += b;
            }
            dh_carry = dh_prev;
            dc_carry = dc_prev;
        }
    }
    d_seq
}

/// Bidirectional pass over `sequence` (`steps × input`), returning the
/// `steps × 2·hidden` concatenated hidden states.
pub fn bilstm_forward(layer: &RecurrentLayer, sequence: &[f64], steps: usize) -> Result<Vec<f64>> {
    if layer.backward.is_none() {
        return Err(NnError::ShapeMismatch("layer has no backward cell".into()));
    }
    Ok(layer_forward(layer, sequence, steps)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_zero_state() {
        let p = LstmCellParams::zeros(1, 1);
        let (h, c, _) = lstm_cell_forward(&p, &[0.3], &[0.0], &[0.0]).unwrap();
        assert_eq!(h, vec![0.0]);
        assert_eq!(c, vec![0.0]);
    }

    #[test]
    fn zero_weights_unit_cell() {
        let p = LstmCellParams::zeros(1, 1);
        let (h, c, _) = lstm_cell_forward(&p, &[0.0], &[0.0], &[1.0]).unwrap();
        assert_eq!(c, vec![0.5]);
        assert!((h[0] - 0.5 * 0.5f64.tanh()).abs() < 1e-15);
        assert!((h[0] - 0.23106).abs() < 1e-5);
    }

    #[test]
    fn state_dimension_checked() {
        let p = LstmCellParams::zeros(2, 3);
        let err = lstm_cell_forward(&p, &[0.0, 0.0], &[0.0; 2], &[0.0; 3]).unwrap_err();
        assert!(matches!(err, NnError::ShapeMismatch(_)));
    }

    #[test]
    fn cell_state_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = LstmCellParams::init(3, 5, &mut rng);
        let mut c = vec![0.7, -2.0, 0.0, 4.0, -0.1];
        let mut h = vec![0.0; 5];
        for step in 0..20 {
            let x = [step as f64, -1.0, 0.5];
            let (h2, c2, _) = lstm_cell_forward(&p, &x, &h, &c).unwrap();
            for k in 0..5 {
                assert!(c2[k].abs() <= c[k].abs() + 1.0);
            }
            h = h2;
            c = c2;
        }
    }

    #[test]
    fn single_step_bidirectional_concatenates_two_cells() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = RecurrentLayer::init(2, 3, true, &mut rng);
        let x = [0.4, -0.9];
        let out = bilstm_forward(&layer, &x, 1).unwrap();
        let (hf, _, _) = lstm_cell_forward(&layer.forward, &x, &[0.0; 3], &[0.0; 3]).unwrap();
        let (hb, _, _) =
            lstm_cell_forward(layer.backward.as_ref().unwrap(), &x, &[0.0; 3], &[0.0; 3]).unwrap();
        assert_eq!(&out[..3], &hf[..]);
        assert_eq!(&out[3..], &hb[..]);
    }

    #[test]
    fn palindrome_with_shared_cells_mirrors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cell = LstmCellParams::init(2, 3, &mut rng);
        let layer = RecurrentLayer {
            forward: cell.clone(),
            backward: Some(cell),
        };
        let seq = [0.1, 0.2, -0.5, 0.9, 0.1, 0.2];
        let out = bilstm_forward(&layer, &seq, 3).unwrap();
        for t in 0..3 {
            let mirror = 2 - t;
            assert_eq!(&out[t * 6..t * 6 + 3], &out[mirror * 6 + 3..mirror * 6 + 6]);
        }
    }

    #[test]
    fn zero_everything_gives_zero_output() {
        let layer = RecurrentLayer::zeros(2, 3, true);
        let out = bilstm_forward(&layer, &[0.0; 8], 4).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }
}
