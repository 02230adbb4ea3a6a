//! Linear baseline: two-class logistic regression on the flattened
//! `T×D` feature sequence.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::rng_for;

use super::{Scalar, TrainableModel};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams<F> {
    /// Expected input shape.
    pub rows: usize,
    pub cols: usize,
    /// `2 × (rows·cols)`.
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrad<F> {
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

impl<F: Scalar> LinearParams<F> {
    pub fn init(rows: usize, cols: usize, seed: u64) -> Self {
        let n = rows * cols;
        let bound = 1.0 / (n as f64).sqrt();
        let mut rng = rng_for(seed, "linear-init");
        LinearParams {
            rows,
            cols,
            weight: Array2::from_shape_fn((2, n), |_| {
                F::from_f64((rng.random::<f64>() * 2.0 - 1.0) * bound)
            }),
            bias: Array1::zeros(2),
        }
    }

    fn flatten(&self, x: &ArrayView2<F>) -> Result<Array1<F>> {
        if x.nrows() != self.rows || x.ncols() != self.cols {
            return Err(Error::ShapeMismatch(format!(
                "input is {}×{}, linear model expects {}×{}",
                x.nrows(),
                x.ncols(),
                self.rows,
                self.cols
            )));
        }
        Ok(Array1::from_iter(x.iter().copied()))
    }

    fn raw_logits(&self, v: &Array1<F>) -> [f64; 2] {
        let z = self.weight.dot(v) + &self.bias;
        [z[0].to_f64(), z[1].to_f64()]
    }
}

impl<F: Scalar> TrainableModel<F> for LinearParams<F> {
    type Grad = LinearGrad<F>;

    fn loss_and_grad(
        &self,
        xs: &[ArrayView2<F>],
        ys: &[usize],
        _dropout: f64,
        _rng: &mut ChaCha8Rng,
    ) -> Result<(f64, Self::Grad)> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::Invalid(format!(
                "batch of {} inputs vs {} labels",
                xs.len(),
                ys.len()
            )));
        }
        let batch = xs.len();
        let mut loss = 0.0f64;
        let mut grad = LinearGrad {
            weight: Array2::zeros(self.weight.dim()),
            bias: Array1::zeros(2),
        };
        for (x, &y) in xs.iter().zip(ys) {
            let v = self.flatten(x)?;
            let [z0, z1] = self.raw_logits(&v);
            let m = z0.max(z1);
            let lse = m + ((z0 - m).exp() + (z1 - m).exp()).ln();
            loss += lse - if y == 0 { z0 } else { z1 };
            let d = [
                F::from_f64(((z0 - lse).exp() - if y == 0 { 1.0 } else { 0.0 }) / batch as f64),
                F::from_f64(((z1 - lse).exp() - if y == 1 { 1.0 } else { 0.0 }) / batch as f64),
            ];
            for k in 0..2 {
                let mut row = grad.weight.row_mut(k);
                row.zip_mut_with(&v, |a, &b| *a = *a + d[k] * b);
                grad.bias[k] = grad.bias[k] + d[k];
            }
        }
        loss /= batch as f64;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("non-finite loss {loss}")));
        }
        Ok((loss, grad))
    }

    fn sgd_step(&mut self, grad: &Self::Grad, lr: f64, weight_decay: f64) {
        let lr = F::from_f64(lr);
        let decay = F::from_f64(1.0 - lr.to_f64() * weight_decay);
        self.weight
            .zip_mut_with(&grad.weight, |p, g| *p = *p * decay - lr * *g);
        self.bias
            .zip_mut_with(&grad.bias, |p, g| *p = *p * decay - lr * *g);
    }

    fn logits(&self, x: &ArrayView2<F>) -> Result<[f64; 2]> {
        let v = self.flatten(x)?;
        Ok(self.raw_logits(&v))
    }
}

impl<F: Scalar> LinearParams<F> {
    /// Flat parameter visitor, mirroring the recurrent model's.
    pub fn visit_mut(&mut self, f: &mut dyn FnMut(String, &mut [F])) {
        f(
            "weight".into(),
            self.weight.as_slice_mut().expect("standard layout"),
        );
        f(
            "bias".into(),
            self.bias.as_slice_mut().expect("standard layout"),
        );
    }

    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        vec![
            ("weight".into(), self.weight.shape().to_vec()),
            ("bias".into(), self.bias.shape().to_vec()),
        ]
    }
}
