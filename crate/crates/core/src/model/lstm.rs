//! Stacked bidirectional recurrent network with gated cells and a linear
//! head over the terminal hidden states, trained by backpropagation through
//! time. Gradients are exact for the realized dropout mask.
//!
//! Gate blocks are stacked `[input, forget, cell, output]` along the first
//! axis of the weights, so pre-activations for a batch come out as `B×4H`
//! with one contiguous column block per gate.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::rng_for;
use crate::schema::BinaryLabel;

use super::{label_from_logits, Scalar, TrainableModel};

/// Which hidden states the head consumes.
///
/// `BothTerminal` concatenates each direction's own final state (forward at
/// the last timestep, backward at the first); `LastIndex` takes both
/// directions' states at the last timestep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadMode {
    BothTerminal,
    LastIndex,
}

/// One direction's cell weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CellParams<F> {
    /// `4H × D_in`.
    pub w_input: Array2<F>,
    /// `4H × H`.
    pub w_recur: Array2<F>,
    /// `4H`.
    pub bias: Array1<F>,
}

impl<F: Scalar> CellParams<F> {
    fn zeros(input_dim: usize, hidden: usize) -> Self {
        CellParams {
            w_input: Array2::zeros((4 * hidden, input_dim)),
            w_recur: Array2::zeros((4 * hidden, hidden)),
            bias: Array1::zeros(4 * hidden),
        }
    }
}

/// All learnable tensors; doubles as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmTensors<F> {
    /// `[forward, backward]` per layer.
    pub layers: Vec<[CellParams<F>; 2]>,
    /// `2 × 2H`.
    pub head_w: Array2<F>,
    /// `2`.
    pub head_b: Array1<F>,
}

pub type LstmGrad<F> = LstmTensors<F>;

impl<F: Scalar> LstmTensors<F> {
    pub fn zeros_like(other: &LstmTensors<F>) -> Self {
        let layers = other
            .layers
            .iter()
            .map(|pair| {
                [
                    CellParams::zeros(pair[0].w_input.ncols(), pair[0].w_recur.ncols()),
                    CellParams::zeros(pair[1].w_input.ncols(), pair[1].w_recur.ncols()),
                ]
            })
            .collect();
        LstmTensors {
            layers,
            head_w: Array2::zeros(other.head_w.dim()),
            head_b: Array1::zeros(other.head_b.dim()),
        }
    }

    /// Visit every named tensor as a flat slice, in a fixed order.
    pub fn visit_mut(&mut self, f: &mut dyn FnMut(String, &mut [F])) {
        for (l, pair) in self.layers.iter_mut().enumerate() {
            for (d, cell) in pair.iter_mut().enumerate() {
                let dir = if d == 0 { "fwd" } else { "bwd" };
                f(
                    format!("layer{l}.{dir}.w_input"),
                    cell.w_input.as_slice_mut().expect("standard layout"),
                );
                f(
                    format!("layer{l}.{dir}.w_recur"),
                    cell.w_recur.as_slice_mut().expect("standard layout"),
                );
                f(
                    format!("layer{l}.{dir}.bias"),
                    cell.bias.as_slice_mut().expect("standard layout"),
                );
            }
        }
        f(
            "head.w".into(),
            self.head_w.as_slice_mut().expect("standard layout"),
        );
        f(
            "head.b".into(),
            self.head_b.as_slice_mut().expect("standard layout"),
        );
    }

    /// Named shapes in visit order.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (l, pair) in self.layers.iter().enumerate() {
            for (d, cell) in pair.iter().enumerate() {
                let dir = if d == 0 { "fwd" } else { "bwd" };
                out.push((format!("layer{l}.{dir}.w_input"), cell.w_input.shape().to_vec()));
                out.push((format!("layer{l}.{dir}.w_recur"), cell.w_recur.shape().to_vec()));
                out.push((format!("layer{l}.{dir}.bias"), cell.bias.shape().to_vec()));
            }
        }
        out.push(("head.w".into(), self.head_w.shape().to_vec()));
        out.push(("head.b".into(), self.head_b.shape().to_vec()));
        out
    }

    fn for_each_pair_mut(&mut self, other: &LstmTensors<F>, f: &mut dyn FnMut(&mut F, &F)) {
        for (pair, gpair) in self.layers.iter_mut().zip(&other.layers) {
            for (cell, gcell) in pair.iter_mut().zip(gpair.iter()) {
                cell.w_input.zip_mut_with(&gcell.w_input, |p, g| f(p, g));
                cell.w_recur.zip_mut_with(&gcell.w_recur, |p, g| f(p, g));
                cell.bias.zip_mut_with(&gcell.bias, |p, g| f(p, g));
            }
        }
        self.head_w.zip_mut_with(&other.head_w, |p, g| f(p, g));
        self.head_b.zip_mut_with(&other.head_b, |p, g| f(p, g));
    }
}

/// Full model: tensors plus architecture metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<F> {
    pub input_dim: usize,
    pub hidden: usize,
    pub head_mode: HeadMode,
    pub tensors: LstmTensors<F>,
}

impl<F: Scalar> LstmParams<F> {
    /// Seeded init: uniform(−1/√H, 1/√H) with the forget-gate bias at +1.
    pub fn init(
        input_dim: usize,
        hidden: usize,
        num_layers: usize,
        head_mode: HeadMode,
        seed: u64,
    ) -> Self {
        let mut rng = rng_for(seed, "lstm-init");
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut draw = move |shape: (usize, usize)| -> Array2<F> {
            Array2::from_shape_fn(shape, |_| {
                F::from_f64((rng.random::<f64>() * 2.0 - 1.0) * bound)
            })
        };
        let mut layers = Vec::with_capacity(num_layers);
        for l in 0..num_layers {
            let d_in = if l == 0 { input_dim } else { 2 * hidden };
            let mut pair = Vec::with_capacity(2);
            for _ in 0..2 {
                let w_input = draw((4 * hidden, d_in));
                let w_recur = draw((4 * hidden, hidden));
                let mut bias = draw((4 * hidden, 1)).remove_axis(Axis(1));
                for j in hidden..2 * hidden {
                    bias[j] = bias[j] + F::one();
                }
                pair.push(CellParams {
                    w_input,
                    w_recur,
                    bias,
                });
            }
            let pair: [CellParams<F>; 2] = pair.try_into().expect("two directions");
            layers.push(pair);
        }
        let head_w = draw((2, 2 * hidden));
        let head_b = draw((2, 1)).remove_axis(Axis(1));
        LstmParams {
            input_dim,
            hidden,
            head_mode,
            tensors: LstmTensors {
                layers,
                head_w,
                head_b,
            },
        }
    }

    pub fn num_layers(&self) -> usize {
        self.tensors.layers.len()
    }
}

fn sigmoid<F: Scalar>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

fn to_standard<F: Scalar>(a: Array2<F>) -> Array2<F> {
    if a.is_standard_layout() {
        a
    } else {
        let dim = a.dim();
        Array2::from_shape_vec(dim, a.iter().copied().collect()).expect("same element count")
    }
}

/// Per-direction forward cache, indexed by sequence position.
struct DirCache<F> {
    /// Post-activation gates, `B×4H`.
    gates: Vec<Array2<F>>,
    /// Cell states, `B×H`.
    c: Vec<Array2<F>>,
    tanh_c: Vec<Array2<F>>,
    h: Vec<Array2<F>>,
}

fn run_direction<F: Scalar>(
    cell: &CellParams<F>,
    inputs: &[Array2<F>],
    reverse: bool,
    hidden: usize,
) -> DirCache<F> {
    let t_len = inputs.len();
    let batch = inputs[0].nrows();
    let empty = || vec![Array2::<F>::zeros((batch, hidden)); t_len];
    let mut cache = DirCache {
        gates: vec![Array2::zeros((batch, 4 * hidden)); t_len],
        c: empty(),
        tanh_c: empty(),
        h: empty(),
    };

    let w_in_t = cell.w_input.t();
    let w_rec_t = cell.w_recur.t();
    let mut h_prev = Array2::<F>::zeros((batch, hidden));
    let mut c_prev = Array2::<F>::zeros((batch, hidden));

    let positions: Vec<usize> = if reverse {
        (0..t_len).rev().collect()
    } else {
        (0..t_len).collect()
    };
    for &pos in &positions {
        let mut z = inputs[pos].dot(&w_in_t) + h_prev.dot(&w_rec_t);
        for mut row in z.rows_mut() {
            row.zip_mut_with(&cell.bias, |a, &b| *a = *a + b);
        }
        // In-place gate activations: σ on input/forget/output, tanh on cell.
        z.slice_mut(s![.., 0 * hidden..2 * hidden]).mapv_inplace(sigmoid);
        z.slice_mut(s![.., 2 * hidden..3 * hidden]).mapv_inplace(|v| v.tanh());
        z.slice_mut(s![.., 3 * hidden..4 * hidden]).mapv_inplace(sigmoid);

        let i = z.slice(s![.., 0..hidden]);
        let f = z.slice(s![.., hidden..2 * hidden]);
        let g = z.slice(s![.., 2 * hidden..3 * hidden]);
        let o = z.slice(s![.., 3 * hidden..4 * hidden]);

        let c = &f.to_owned() * &c_prev + &i.to_owned() * &g;
        let tanh_c = c.mapv(|v| v.tanh());
        let h = &o.to_owned() * &tanh_c;

        cache.gates[pos] = z.clone();
        cache.c[pos] = c.clone();
        cache.tanh_c[pos] = tanh_c;
        cache.h[pos] = h.clone();
        h_prev = h;
        c_prev = c;
    }
    cache
}

/// Gradients of one direction given upstream `dh_ext` per position.
/// Returns the input gradients per position.
fn backprop_direction<F: Scalar>(
    cell: &CellParams<F>,
    grad: &mut CellParams<F>,
    cache: &DirCache<F>,
    inputs: &[Array2<F>],
    dh_ext: &[Array2<F>],
    reverse: bool,
    hidden: usize,
) -> Vec<Array2<F>> {
    let t_len = inputs.len();
    let batch = inputs[0].nrows();
    let mut dinputs = vec![Array2::<F>::zeros(inputs[0].dim()); t_len];

    let positions: Vec<usize> = if reverse {
        (0..t_len).rev().collect()
    } else {
        (0..t_len).collect()
    };

    let zeros_bh = Array2::<F>::zeros((batch, hidden));
    let mut dh_carry = zeros_bh.clone();
    let mut dc_carry = zeros_bh.clone();

    for (step, &pos) in positions.iter().enumerate().rev() {
        let prev_pos = if step > 0 { Some(positions[step - 1]) } else { None };
        let gates = &cache.gates[pos];
        let i = gates.slice(s![.., 0..hidden]);
        let f = gates.slice(s![.., hidden..2 * hidden]);
        let g = gates.slice(s![.., 2 * hidden..3 * hidden]);
        let o = gates.slice(s![.., 3 * hidden..4 * hidden]);
        let tanh_c = &cache.tanh_c[pos];

        let dh = &dh_ext[pos] + &dh_carry;
        let d_o = &dh * tanh_c;
        let one = F::one();
        let dc = {
            let mut v = &dh * &o.to_owned();
            v.zip_mut_with(tanh_c, |a, &t| *a = *a * (one - t * t));
            v + &dc_carry
        };
        let d_i = &dc * &g.to_owned();
        let d_g = &dc * &i.to_owned();
        let c_prev = prev_pos.map(|q| &cache.c[q]).unwrap_or(&zeros_bh);
        let d_f = &dc * c_prev;
        dc_carry = &dc * &f.to_owned();

        // Pre-activation gate gradients, assembled into B×4H.
        let mut dz = Array2::<F>::zeros((batch, 4 * hidden));
        {
            let mut blk = dz.slice_mut(s![.., 0..hidden]);
            blk.assign(&d_i);
            blk.zip_mut_with(&i, |a, &v| *a = *a * v * (one - v));
        }
        {
            let mut blk = dz.slice_mut(s![.., hidden..2 * hidden]);
            blk.assign(&d_f);
            blk.zip_mut_with(&f, |a, &v| *a = *a * v * (one - v));
        }
        {
            let mut blk = dz.slice_mut(s![.., 2 * hidden..3 * hidden]);
            blk.assign(&d_g);
            blk.zip_mut_with(&g, |a, &v| *a = *a * (one - v * v));
        }
        {
            let mut blk = dz.slice_mut(s![.., 3 * hidden..4 * hidden]);
            blk.assign(&d_o);
            blk.zip_mut_with(&o, |a, &v| *a = *a * v * (one - v));
        }

        let h_prev = prev_pos.map(|q| &cache.h[q]).unwrap_or(&zeros_bh);
        let dz_t = dz.t();
        grad.w_input = &grad.w_input + &dz_t.dot(&inputs[pos]);
        grad.w_recur = &grad.w_recur + &dz_t.dot(h_prev);
        grad.bias = &grad.bias + &dz.sum_axis(Axis(0));
        dinputs[pos] = dz.dot(&cell.w_input);
        dh_carry = dz.dot(&cell.w_recur);
    }
    dinputs
}

struct ForwardPass<F> {
    /// Inputs actually fed to each layer (post-dropout), per layer per position.
    layer_inputs: Vec<Vec<Array2<F>>>,
    dirs: Vec<[DirCache<F>; 2]>,
    /// Dropout masks between layer l and l+1 (scaled inverted dropout).
    masks: Vec<Vec<Array2<F>>>,
    head_input: Array2<F>,
    logits: Array2<F>,
}

fn head_position(head_mode: HeadMode, t_len: usize) -> usize {
    match head_mode {
        HeadMode::BothTerminal => 0,
        HeadMode::LastIndex => t_len - 1,
    }
}

fn forward_batch<F: Scalar>(
    params: &LstmParams<F>,
    xs: &[ArrayView2<F>],
    dropout: f64,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<ForwardPass<F>> {
    let batch = xs.len();
    if batch == 0 {
        return Err(Error::Invalid("empty batch".into()));
    }
    let t_len = xs[0].nrows();
    if t_len == 0 {
        return Err(Error::ShapeMismatch("zero-length sequence".into()));
    }
    for (b, x) in xs.iter().enumerate() {
        if x.nrows() != t_len || x.ncols() != params.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "batch item {b} is {}×{}, expected {t_len}×{}",
                x.nrows(),
                x.ncols(),
                params.input_dim
            )));
        }
    }
    let hidden = params.hidden;

    // Stack the batch per position.
    let mut inputs: Vec<Array2<F>> = (0..t_len)
        .map(|t| {
            let mut m = Array2::zeros((batch, params.input_dim));
            for (b, x) in xs.iter().enumerate() {
                m.row_mut(b).assign(&x.row(t));
            }
            m
        })
        .collect();

    let keep = 1.0 - dropout;
    if dropout > 0.0 && (dropout >= 1.0 || rng.is_none()) {
        return Err(Error::Config(format!("dropout must be in [0, 1) with an rng, got {dropout}")));
    }
    let mut rng = rng;

    let mut layer_inputs = Vec::with_capacity(params.num_layers());
    let mut dirs = Vec::with_capacity(params.num_layers());
    let mut masks = Vec::new();

    for (l, pair) in params.tensors.layers.iter().enumerate() {
        let fwd = run_direction(&pair[0], &inputs, false, hidden);
        let bwd = run_direction(&pair[1], &inputs, true, hidden);
        layer_inputs.push(std::mem::take(&mut inputs));

        let last_layer = l + 1 == params.num_layers();
        if !last_layer {
            let mut next: Vec<Array2<F>> = (0..t_len)
                .map(|t| concatenate![Axis(1), fwd.h[t].view(), bwd.h[t].view()])
                .collect();
            if dropout > 0.0 {
                let rng = rng.as_mut().expect("checked above");
                let scale = F::from_f64(1.0 / keep);
                let layer_masks: Vec<Array2<F>> = (0..t_len)
                    .map(|_| {
                        Array2::from_shape_fn((batch, 2 * hidden), |_| {
                            if rng.random::<f64>() < keep {
                                scale
                            } else {
                                F::zero()
                            }
                        })
                    })
                    .collect();
                for (x, m) in next.iter_mut().zip(&layer_masks) {
                    *x = &*x * m;
                }
                masks.push(layer_masks);
            }
            inputs = next;
        }
        dirs.push([fwd, bwd]);
    }

    let top = dirs.last().expect("at least one layer");
    let head_pos = head_position(params.head_mode, t_len);
    let head_input = concatenate![
        Axis(1),
        top[0].h[t_len - 1].view(),
        top[1].h[head_pos].view()
    ];
    let mut logits = head_input.dot(&params.tensors.head_w.t());
    for mut row in logits.rows_mut() {
        row.zip_mut_with(&params.tensors.head_b, |a, &b| *a = *a + b);
    }

    Ok(ForwardPass {
        layer_inputs,
        dirs,
        masks,
        head_input,
        logits,
    })
}

/// Two logits for a single sequence, class order (Stable, NotStable).
/// With `dropout_rate` 0 the result is a deterministic function of
/// `(params, x)`.
pub fn forward<F: Scalar>(
    params: &LstmParams<F>,
    x: ArrayView2<F>,
    dropout_rate: f64,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<[F; 2]> {
    let pass = forward_batch(params, &[x], dropout_rate, rng)?;
    Ok([pass.logits[(0, 0)], pass.logits[(0, 1)]])
}

/// Argmax prediction with dropout off; ties break to Stable.
pub fn predict<F: Scalar>(params: &LstmParams<F>, x: ArrayView2<F>) -> Result<BinaryLabel> {
    let logits = forward(params, x, 0.0, None)?;
    Ok(label_from_logits([logits[0].to_f64(), logits[1].to_f64()]))
}

/// Terminal hidden states of the top layer per direction (single example);
/// used by the direction-symmetry checks.
pub fn terminal_states<F: Scalar>(
    params: &LstmParams<F>,
    x: ArrayView2<F>,
) -> Result<(Array1<F>, Array1<F>)> {
    let pass = forward_batch(params, &[x], 0.0, None)?;
    let t_len = x.nrows();
    let top = pass.dirs.last().expect("at least one layer");
    Ok((
        top[0].h[t_len - 1].row(0).to_owned(),
        top[1].h[0].row(0).to_owned(),
    ))
}

impl<F: Scalar> TrainableModel<F> for LstmParams<F> {
    type Grad = LstmGrad<F>;

    fn loss_and_grad(
        &self,
        xs: &[ArrayView2<F>],
        ys: &[usize],
        dropout: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<(f64, Self::Grad)> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::Invalid(format!(
                "batch of {} inputs vs {} labels",
                xs.len(),
                ys.len()
            )));
        }
        let batch = xs.len();
        let t_len = xs[0].nrows();
        let hidden = self.hidden;
        let pass = forward_batch(self, xs, dropout, Some(rng))?;

        // Mean cross-entropy and dlogits.
        let mut loss = 0.0f64;
        let mut dlogits = Array2::<F>::zeros((batch, 2));
        for b in 0..batch {
            let z0 = pass.logits[(b, 0)].to_f64();
            let z1 = pass.logits[(b, 1)].to_f64();
            let m = z0.max(z1);
            let lse = m + ((z0 - m).exp() + (z1 - m).exp()).ln();
            let zy = if ys[b] == 0 { z0 } else { z1 };
            loss += lse - zy;
            let p0 = (z0 - lse).exp();
            let p1 = (z1 - lse).exp();
            dlogits[(b, 0)] = F::from_f64((p0 - if ys[b] == 0 { 1.0 } else { 0.0 }) / batch as f64);
            dlogits[(b, 1)] = F::from_f64((p1 - if ys[b] == 1 { 1.0 } else { 0.0 }) / batch as f64);
        }
        loss /= batch as f64;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("non-finite loss {loss}")));
        }

        let mut grad = LstmTensors::zeros_like(&self.tensors);

        // Head. The transposed product may come back in column-major
        // layout; keep every grad tensor standard so flat visits work.
        grad.head_w = to_standard(dlogits.t().dot(&pass.head_input));
        grad.head_b = dlogits.sum_axis(Axis(0));
        let d_head_in = dlogits.dot(&self.tensors.head_w);

        // External dh per layer, direction, position.
        let zeros_bh = Array2::<F>::zeros((batch, hidden));
        let n_layers = self.num_layers();
        let mut dh_ext: Vec<[Vec<Array2<F>>; 2]> = (0..n_layers)
            .map(|_| [vec![zeros_bh.clone(); t_len], vec![zeros_bh.clone(); t_len]])
            .collect();
        let head_pos = head_position(self.head_mode, t_len);
        dh_ext[n_layers - 1][0][t_len - 1] =
            &dh_ext[n_layers - 1][0][t_len - 1] + &d_head_in.slice(s![.., 0..hidden]);
        dh_ext[n_layers - 1][1][head_pos] =
            &dh_ext[n_layers - 1][1][head_pos] + &d_head_in.slice(s![.., hidden..2 * hidden]);

        for l in (0..n_layers).rev() {
            let pair = &self.tensors.layers[l];
            let gpair = &mut grad.layers[l];
            let inputs = &pass.layer_inputs[l];
            let d_in_fwd = backprop_direction(
                &pair[0],
                &mut gpair[0],
                &pass.dirs[l][0],
                inputs,
                &dh_ext[l][0],
                false,
                hidden,
            );
            let d_in_bwd = backprop_direction(
                &pair[1],
                &mut gpair[1],
                &pass.dirs[l][1],
                inputs,
                &dh_ext[l][1],
                true,
                hidden,
            );
            if l > 0 {
                for t in 0..t_len {
                    let mut d_concat = &d_in_fwd[t] + &d_in_bwd[t];
                    if dropout > 0.0 {
                        d_concat = &d_concat * &pass.masks[l - 1][t];
                    }
                    dh_ext[l - 1][0][t] =
                        &dh_ext[l - 1][0][t] + &d_concat.slice(s![.., 0..hidden]);
                    dh_ext[l - 1][1][t] =
                        &dh_ext[l - 1][1][t] + &d_concat.slice(s![.., hidden..2 * hidden]);
                }
            }
        }

        Ok((loss, grad))
    }

    fn sgd_step(&mut self, grad: &Self::Grad, lr: f64, weight_decay: f64) {
        let lr = F::from_f64(lr);
        let decay = F::from_f64(1.0 - lr.to_f64() * weight_decay);
        // w ← w·(1 − lr·wd) − lr·∇, the factored form of w − lr·(∇ + wd·w);
        // a zero gradient then contracts by exactly (1 − lr·wd).
        self.tensors
            .for_each_pair_mut(grad, &mut |p, g| *p = *p * decay - lr * *g);
    }

    fn logits(&self, x: &ArrayView2<F>) -> Result<[f64; 2]> {
        let l = forward(self, *x, 0.0, None)?;
        Ok([l[0].to_f64(), l[1].to_f64()])
    }
}
