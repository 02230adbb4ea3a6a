//! Sequence classifiers: the bidirectional recurrent network and the linear
//! baseline, both with exact analytic gradients for plain SGD.
//!
//! Everything is generic over the element type: gradient checks run at
//! double precision, training runs may use single precision.

mod checkpoint;
mod linear;
mod lstm;

pub use checkpoint::{load_linear, load_lstm, peek_kind, save_linear, save_lstm};
pub use linear::{LinearGrad, LinearParams};
pub use lstm::{forward, predict, terminal_states, CellParams, HeadMode, LstmGrad, LstmParams, LstmTensors};

use ndarray::{Array2, ArrayView2};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::features::FeatureSequence;
use crate::schema::BinaryLabel;

/// Element type of model parameters.
pub trait Scalar: ndarray::NdFloat {
    const DTYPE: &'static str;
    const BYTES: usize;
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";
    const BYTES: usize = 4;
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]])
    }
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";
    const BYTES: usize = 8;
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        let mut b = [0u8; 8];
        b.copy_from_slice(&bytes[..8]);
        f64::from_le_bytes(b)
    }
}

/// A model the SGD loop can drive.
pub trait TrainableModel<F: Scalar>: Clone {
    type Grad;

    /// Mean cross-entropy over the batch and its exact gradient (for the
    /// realized dropout mask). `ys` are class indices (Stable = 0).
    fn loss_and_grad(
        &self,
        xs: &[ArrayView2<F>],
        ys: &[usize],
        dropout: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<(f64, Self::Grad)>;

    /// `w ← w − lr·(∇ + weight_decay·w)`.
    fn sgd_step(&mut self, grad: &Self::Grad, lr: f64, weight_decay: f64);

    /// Inference logits (dropout off), class order (Stable, NotStable).
    fn logits(&self, x: &ArrayView2<F>) -> Result<[f64; 2]>;
}

/// Argmax with the documented tie-break to Stable.
pub fn label_from_logits(logits: [f64; 2]) -> BinaryLabel {
    if logits[0] >= logits[1] {
        BinaryLabel::Stable
    } else {
        BinaryLabel::NotStable
    }
}

/// Anything that maps a (standardized) feature sequence to a label.
pub trait Classifier {
    fn predict_seq(&self, seq: &FeatureSequence) -> Result<BinaryLabel>;
}

/// [`Classifier`] adapter over a trained model.
pub struct ModelClassifier<F: Scalar, M: TrainableModel<F>> {
    pub model: M,
    _marker: std::marker::PhantomData<F>,
}

impl<F: Scalar, M: TrainableModel<F>> ModelClassifier<F, M> {
    pub fn new(model: M) -> Self {
        ModelClassifier {
            model,
            _marker: std::marker::PhantomData,
        }
    }
}

impl<F: Scalar, M: TrainableModel<F>> Classifier for ModelClassifier<F, M> {
    fn predict_seq(&self, seq: &FeatureSequence) -> Result<BinaryLabel> {
        let x = matrix_to::<F>(&seq.matrix);
        Ok(label_from_logits(self.model.logits(&x.view())?))
    }
}

/// Convert a feature matrix to the model element type.
pub fn matrix_to<F: Scalar>(m: &Array2<f64>) -> Array2<F> {
    m.mapv(F::from_f64)
}
