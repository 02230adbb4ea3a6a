//! SGD training with learning-rate annealing and deferred resampling.
//!
//! The hard minority here is not a label class but the set of examples
//! whose pose-phase and shake-phase labels differ (S≠). The deferred
//! resampler leaves batches untouched until the annealing step, then thins
//! the majority S= by keeping each sampled member with probability `r/σ`
//! (r = |S≠|/|S=|), which makes the expected ratio of S≠ to S= SGD updates
//! equal σ.

use ndarray::Array2;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::model::{Scalar, TrainableModel};
use crate::rng::rng_for;

/// Which phase label the classifier is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelTarget {
    Shake,
    Pose,
}

/// Training hyperparameters. Defaults follow the unseen-pose preset
/// (600 iterations, annealing at 300).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub hidden: usize,
    pub iterations: usize,
    /// 1-based iteration at which the rate anneals (and DRS, if configured,
    /// starts resampling).
    pub anneal_at: usize,
    pub anneal_factor: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            weight_decay: 0.01,
            dropout: 0.1,
            hidden: 500,
            iterations: 600,
            anneal_at: 300,
            anneal_factor: 0.1,
            batch_size: 200,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// The unseen-object preset: 500 iterations, annealing at 30.
    pub fn unseen_objects_preset() -> Self {
        TrainConfig {
            iterations: 500,
            anneal_at: 30,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.anneal_at > 0 && self.anneal_at < self.iterations) {
            return Err(Error::Config(format!(
                "anneal_at must satisfy 0 < {} < {}",
                self.anneal_at, self.iterations
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config("learning_rate must be finite and >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be > 0".into()));
        }
        Ok(())
    }
}

/// Deferred-resampling parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrsConfig {
    /// Desired S≠:S= update ratio; must exceed the training set's r.
    pub sigma: f64,
    /// Batch size sampled before thinning.
    pub pre_batch_size: usize,
    /// Iteration resampling starts at; defaults to the annealing step.
    #[serde(default)]
    pub defer_until: Option<usize>,
}

impl DrsConfig {
    pub fn new(sigma: f64) -> Self {
        DrsConfig {
            sigma,
            pre_batch_size: 200,
            defer_until: None,
        }
    }
}

/// Split of the training indices by whether pose- and shake-phase labels
/// agree. `r = |S≠|/|S=|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub s_eq: Vec<usize>,
    pub s_neq: Vec<usize>,
    pub r: f64,
    neq_mask: Vec<bool>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.s_eq.len() + self.s_neq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_neq(&self, idx: usize) -> bool {
        self.neq_mask[idx]
    }
}

/// Partition a training set. Errors when S= is empty (r undefined).
pub fn partition(train_set: &[FeatureSequence]) -> Result<Partition> {
    let mut s_eq = Vec::new();
    let mut s_neq = Vec::new();
    let mut neq_mask = vec![false; train_set.len()];
    for (i, seq) in train_set.iter().enumerate() {
        if seq.labels_differ() {
            s_neq.push(i);
            neq_mask[i] = true;
        } else {
            s_eq.push(i);
        }
    }
    if s_eq.is_empty() {
        return Err(Error::Invalid(
            "every training example has differing pose/shake labels; r is undefined".into(),
        ));
    }
    let r = s_neq.len() as f64 / s_eq.len() as f64;
    Ok(Partition {
        s_eq,
        s_neq,
        r,
        neq_mask,
    })
}

/// Draw one deferred-resampling batch: sample `pre_batch_size` indices
/// uniformly without replacement, keep S≠ members unconditionally and S=
/// members with probability `r/σ`.
pub fn drs_batch(part: &Partition, cfg: &DrsConfig, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if !(cfg.sigma > part.r) {
        return Err(Error::Config(format!(
            "sigma ({}) must exceed r ({:.4})",
            cfg.sigma, part.r
        )));
    }
    let n = part.len();
    if n == 0 {
        return Err(Error::Invalid("empty training set".into()));
    }
    let keep_p = part.r / cfg.sigma;
    let k = cfg.pre_batch_size.min(n);
    let mut batch = Vec::with_capacity(k);
    for idx in sample_indices(rng, n, k) {
        if part.is_neq(idx) {
            batch.push(idx);
        } else if rng.random::<f64>() < keep_p {
            batch.push(idx);
        }
    }
    Ok(batch)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMode {
    Uniform,
    Deferred,
}

/// One training-log record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub lr: f64,
    pub loss: f64,
    pub sampler: SamplerMode,
    pub batch_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<IterationRecord>,
    pub best_iteration: usize,
    pub best_val_accuracy: f64,
}

/// Matrices converted to the model element type, with class indices.
pub struct PreparedSet<F> {
    pub xs: Vec<Array2<F>>,
    pub ys: Vec<usize>,
}

pub fn prepare<F: Scalar>(seqs: &[FeatureSequence], target: LabelTarget) -> PreparedSet<F> {
    let xs = seqs.iter().map(|s| s.matrix.mapv(F::from_f64)).collect();
    let ys = seqs
        .iter()
        .map(|s| match target {
            LabelTarget::Shake => s.label_shake.class_index(),
            LabelTarget::Pose => s.label_pose.class_index(),
        })
        .collect();
    PreparedSet { xs, ys }
}

/// Fraction of correct argmax predictions.
pub fn accuracy<F: Scalar, M: TrainableModel<F>>(model: &M, set: &PreparedSet<F>) -> Result<f64> {
    if set.xs.is_empty() {
        return Err(Error::Invalid("empty evaluation set".into()));
    }
    let mut correct = 0usize;
    for (x, &y) in set.xs.iter().zip(&set.ys) {
        let logits = model.logits(&x.view())?;
        let pred = if logits[0] >= logits[1] { 0 } else { 1 };
        if pred == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / set.xs.len() as f64)
}

const VAL_EVERY: usize = 10;

/// Run SGD from `model_init` and return the checkpoint with the best
/// validation accuracy plus the full history. Deterministic given
/// `(inputs, cfg.seed)`: repeating a run reproduces the history byte for
/// byte.
///
/// Before `anneal_at`, batches are plain uniform draws; from `anneal_at`
/// on, the learning rate is multiplied by `anneal_factor` and, if `drs` is
/// given, batches come from [`drs_batch`]. Updates are
/// `w ← w − lr·(∇loss + weight_decay·w)`.
pub fn train<F: Scalar, M: TrainableModel<F>>(
    model_init: M,
    train_seqs: &[FeatureSequence],
    cfg: &TrainConfig,
    drs: Option<&DrsConfig>,
    val_seqs: &[FeatureSequence],
    target: LabelTarget,
) -> Result<(M, TrainHistory)> {
    cfg.validate()?;
    if train_seqs.is_empty() || val_seqs.is_empty() {
        return Err(Error::Invalid("train and validation sets must be nonempty".into()));
    }
    {
        let train_ids: std::collections::HashSet<&str> =
            train_seqs.iter().map(|s| s.cycle_id.as_str()).collect();
        if val_seqs.iter().any(|s| train_ids.contains(s.cycle_id.as_str())) {
            return Err(Error::Invalid("train and validation sets overlap".into()));
        }
    }

    let train_set = prepare::<F>(train_seqs, target);
    let val_set = prepare::<F>(val_seqs, target);
    let n = train_set.xs.len();

    let part = match drs {
        Some(d) => {
            let p = partition(train_seqs)?;
            if !(d.sigma > p.r) {
                return Err(Error::Config(format!(
                    "sigma ({}) must exceed r ({:.4})",
                    d.sigma, p.r
                )));
            }
            Some(p)
        }
        None => None,
    };
    let uniform_batch = drs.map(|d| d.pre_batch_size).unwrap_or(cfg.batch_size);
    let resample_from = drs.and_then(|d| d.defer_until).unwrap_or(cfg.anneal_at);

    let mut rng = rng_for(cfg.seed, "train");
    let mut model = model_init;
    let mut best_model = model.clone();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_iteration = 0usize;
    let mut records = Vec::with_capacity(cfg.iterations);

    for iteration in 1..=cfg.iterations {
        let annealed = iteration >= cfg.anneal_at;
        let lr = if annealed {
            cfg.learning_rate * cfg.anneal_factor
        } else {
            cfg.learning_rate
        };

        let (indices, sampler) = match (drs, part.as_ref()) {
            (Some(d), Some(p)) if iteration >= resample_from => {
                (drs_batch(p, d, &mut rng)?, SamplerMode::Deferred)
            }
            _ => (
                sample_indices(&mut rng, n, uniform_batch.min(n)).into_vec(),
                SamplerMode::Uniform,
            ),
        };
        if indices.is_empty() {
            return Err(Error::Invalid(format!(
                "sampler produced an empty batch at iteration {iteration}"
            )));
        }

        let xs: Vec<_> = indices.iter().map(|&i| train_set.xs[i].view()).collect();
        let ys: Vec<_> = indices.iter().map(|&i| train_set.ys[i]).collect();
        let (loss, grad) = model
            .loss_and_grad(&xs, &ys, cfg.dropout, &mut rng)
            .map_err(|e| Error::Numerical(format!("iteration {iteration}: {e}")))?;
        model.sgd_step(&grad, lr, cfg.weight_decay);

        let val_accuracy = if iteration % VAL_EVERY == 0 || iteration == cfg.iterations {
            let acc = accuracy(&model, &val_set)?;
            if acc > best_val {
                best_val = acc;
                best_iteration = iteration;
                best_model = model.clone();
            }
            Some(acc)
        } else {
            None
        };

        records.push(IterationRecord {
            iteration,
            lr,
            loss,
            sampler,
            batch_size: indices.len(),
            val_accuracy,
        });
    }

    Ok((
        best_model,
        TrainHistory {
            records,
            best_iteration,
            best_val_accuracy: best_val,
        },
    ))
}
