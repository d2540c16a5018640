//! Classifier head over frozen sentence embeddings:
//! dropout -> dense(64, ReLU) -> dense(1, sigmoid), trained with Adam on
//! binary cross-entropy.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const HIDDEN_UNITS: usize = 64;
pub const PROBABILITY_CLIP: f64 = 1e-7;
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseHead<T: Scalar> {
    pub d: usize,
    pub hidden: usize,
    /// Row-major `hidden x d`.
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: T,
    pub threshold: T,
}

impl<T: Scalar> DenseHead<T> {
    pub fn zeros(d: usize) -> Self {
        Self::zeros_with_hidden(d, HIDDEN_UNITS)
    }

    pub fn zeros_with_hidden(d: usize, hidden: usize) -> Self {
        DenseHead {
            d,
            hidden,
            w1: vec![T::zero(); hidden * d],
            b1: vec![T::zero(); hidden],
            w2: vec![T::zero(); hidden],
            b2: T::zero(),
            threshold: T::of(0.5),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng>(d: usize, rng: &mut R) -> Self {
        let mut head = Self::zeros(d);
        let mut fill = |w: &mut [T], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in w {
                *v = T::of(rng.gen_range(-limit..limit));
            }
        };
        fill(&mut head.w1, d, head.hidden);
        fill(&mut head.w2, head.hidden, 1);
        head
    }

    pub fn is_finite(&self) -> bool {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain([&self.b2, &self.threshold])
            .all(|v| v.is_finite())
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Inference-mode probability.
    pub fn predict(&self, x: &[T]) -> Result<T> {
        forward(x, self, Mode::INFER)
    }
}

pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Per-input dropout factors: 0 for dropped units, `1 / (1 - rate)` for kept.
pub fn sample_mask<T: Scalar, R: Rng>(rng: &mut R, d: usize, rate: f64) -> Vec<T> {
    if rate <= 0.0 {
        return vec![T::one(); d];
    }
    let keep = 1.0 - rate;
    let scale = T::of(1.0 / keep);
    (0..d)
        .map(|_| {
            if rng.gen::<f64>() < keep {
                scale
            } else {
                T::zero()
            }
        })
        .collect()
}

pub enum Mode<'a, R: Rng> {
    Train { rng: &'a mut R, dropout_rate: f64 },
    Infer,
}

impl Mode<'static, ChaCha8Rng> {
    pub const INFER: Mode<'static, ChaCha8Rng> = Mode::Infer;
}

/// Intermediate values of one forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct Activations<T: Scalar> {
    pub input: Vec<T>,
    pub pre_hidden: Vec<T>,
    pub hidden: Vec<T>,
    pub probability: T,
}

pub fn forward_with_mask<T: Scalar>(
    x: &[T],
    head: &DenseHead<T>,
    mask: Option<&[T]>,
) -> Result<Activations<T>> {
    head.check_dim(x)?;
    let input: Vec<T> = match mask {
        Some(mask) => {
            head.check_dim(mask)?;
            x.iter().zip(mask).map(|(a, m)| *a * *m).collect()
        }
        None => x.to_vec(),
    };
    let pre_hidden: Vec<T> = head
        .w1
        .chunks_exact(head.d)
        .zip(&head.b1)
        .map(|(row, b)| row.iter().zip(&input).map(|(w, v)| *w * *v).sum::<T>() + *b)
        .collect();
    let hidden: Vec<T> = pre_hidden.iter().map(|z| z.max(T::zero())).collect();
    let logit = head.w2.iter().zip(&hidden).map(|(w, h)| *w * *h).sum::<T>() + head.b2;
    Ok(Activations {
        input,
        pre_hidden,
        hidden,
        probability: sigmoid(logit),
    })
}

pub fn forward<T: Scalar, R: Rng>(x: &[T], head: &DenseHead<T>, mode: Mode<'_, R>) -> Result<T> {
    let mask = match mode {
        Mode::Train { rng, dropout_rate } => Some(sample_mask(rng, head.d, dropout_rate)),
        Mode::Infer => None,
    };
    Ok(forward_with_mask(x, head, mask.as_deref())?.probability)
}

/// Binary cross-entropy with the probability clipped to `[1e-7, 1 - 1e-7]`.
pub fn bce_loss<T: Scalar>(p: T, y: u8) -> T {
    let eps = T::of(PROBABILITY_CLIP);
    let p = p.max(eps).min(T::one() - eps);
    if y == 1 {
        -p.ln()
    } else {
        -(T::one() - p).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T: Scalar> {
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: T,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(head: &DenseHead<T>) -> Self {
        Gradients {
            w1: vec![T::zero(); head.w1.len()],
            b1: vec![T::zero(); head.b1.len()],
            w2: vec![T::zero(); head.w2.len()],
            b2: T::zero(),
        }
    }
}

/// Analytic gradients of the mean batch BCE. `masks` must be the dropout
/// factors used in the matching forward pass (`None` for no dropout).
pub fn backward<T: Scalar>(
    batch: &[(&[T], u8)],
    head: &DenseHead<T>,
    masks: Option<&[Vec<T>]>,
) -> Result<Gradients<T>> {
    let mut grads = Gradients::zeros_like(head);
    if batch.is_empty() {
        return Ok(grads);
    }
    let scale = T::one() / T::of_usize(batch.len());
    for (k, (x, y)) in batch.iter().enumerate() {
        let mask = masks.map(|m| m[k].as_slice());
        let act = forward_with_mask(x, head, mask)?;
        let d_logit = (act.probability - T::of_usize(usize::from(*y))) * scale;
        grads.b2 += d_logit;
        for j in 0..head.hidden {
            grads.w2[j] += d_logit * act.hidden[j];
            if act.pre_hidden[j] <= T::zero() {
                continue;
            }
            let d_pre = d_logit * head.w2[j];
            grads.b1[j] += d_pre;
            let row = &mut grads.w1[j * head.d..(j + 1) * head.d];
            for (g, v) in row.iter_mut().zip(&act.input) {
                *g += d_pre * *v;
            }
        }
    }
    Ok(grads)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T: Scalar> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step<T: Scalar>(
    params: &mut [T],
    grads: &[T],
    state: &mut AdamState<T>,
    hyper: &AdamHyper,
) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            got: grads.len(),
        });
    }
    state.t += 1;
    let (b1, b2) = (T::of(hyper.beta1), T::of(hyper.beta2));
    let lr = T::of(hyper.learning_rate);
    let eps = T::of(hyper.epsilon);
    let t = state.t as i32;
    let correction1 = T::one() - b1.powi(t);
    let correction2 = T::one() - b2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (T::one() - b1) * g;
        state.v[i] = b2 * state.v[i] + (T::one() - b2) * g * g;
        let m_hat = state.m[i] / correction1;
        let v_hat = state.v[i] / correction2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

struct HeadOptimizer<T: Scalar> {
    w1: AdamState<T>,
    b1: AdamState<T>,
    w2: AdamState<T>,
    b2: AdamState<T>,
}

impl<T: Scalar> HeadOptimizer<T> {
    fn new(head: &DenseHead<T>) -> Self {
        HeadOptimizer {
            w1: AdamState::new(head.w1.len()),
            b1: AdamState::new(head.b1.len()),
            w2: AdamState::new(head.w2.len()),
            b2: AdamState::new(1),
        }
    }

    fn step(&mut self, head: &mut DenseHead<T>, g: &Gradients<T>, hyper: &AdamHyper) -> Result<()> {
        adam_step(&mut head.w1, &g.w1, &mut self.w1, hyper)?;
        adam_step(&mut head.b1, &g.b1, &mut self.b1, hyper)?;
        adam_step(&mut head.w2, &g.w2, &mut self.w2, hyper)?;
        adam_step(std::slice::from_mut(&mut head.b2), &[g.b2], &mut self.b2, hyper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Fixed,
    ValidationMedian,
}

impl std::str::FromStr for ThresholdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(ThresholdMode::Fixed),
            "validation_median" => Ok(ThresholdMode::ValidationMedian),
            other => Err(Error::InvalidConfig(format!("unknown threshold mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub adam: AdamHyper,
    pub seed: u64,
    pub threshold_mode: ThresholdMode,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            dropout_rate: 0.2,
            adam: AdamHyper::default(),
            seed: 0,
            threshold_mode: ThresholdMode::Fixed,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.epochs < 1 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold {} outside (0, 1)", self.threshold));
        }
        if !(self.adam.learning_rate > 0.0) {
            return bad("learning_rate must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

pub const HISTORY_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";

impl History {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::from(HISTORY_HEADER);
        out.push('\n');
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.epoch,
                r.train_loss,
                r.train_accuracy,
                opt(r.val_loss),
                opt(r.val_accuracy)
            );
        }
        out
    }
}

/// Training/validation example reference into an embedding table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExampleRef<'a> {
    pub id: &'a str,
    pub label: u8,
}

pub fn classify<T: Scalar>(p: T, threshold: T) -> u8 {
    u8::from(p >= threshold)
}

fn lookup<'a, T: Scalar>(
    examples: &[ExampleRef<'_>],
    embeddings: &'a HashMap<String, Vec<T>>,
) -> Result<Vec<&'a [T]>> {
    examples
        .iter()
        .map(|ex| {
            embeddings
                .get(ex.id)
                .map(Vec::as_slice)
                .ok_or_else(|| Error::MissingEmbedding(ex.id.to_string()))
        })
        .collect()
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    })
}

/// Evaluates mean loss and accuracy in inference mode.
pub fn evaluate<T: Scalar>(
    head: &DenseHead<T>,
    inputs: &[&[T]],
    labels: &[u8],
    threshold: T,
) -> Result<(f64, f64, Vec<T>)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut probs = Vec::with_capacity(inputs.len());
    for (x, &y) in inputs.iter().zip(labels) {
        let p = head.predict(x)?;
        loss += bce_loss(p, y).as_f64();
        correct += usize::from(classify(p, threshold) == y);
        probs.push(p);
    }
    let n = inputs.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n, probs))
}

/// Seeded mini-batch training. Returns the head (with its decision threshold
/// set), the per-epoch history and the threshold.
pub fn train<T: Scalar>(
    train_set: &[ExampleRef<'_>],
    val_set: &[ExampleRef<'_>],
    embeddings: &HashMap<String, Vec<T>>,
    cfg: &TrainConfig,
) -> Result<(DenseHead<T>, History, T)> {
    cfg.validate()?;
    let train_x = lookup(train_set, embeddings)?;
    let val_x = lookup(val_set, embeddings)?;
    let train_y: Vec<u8> = train_set.iter().map(|e| e.label).collect();
    let val_y: Vec<u8> = val_set.iter().map(|e| e.label).collect();
    let d = train_x
        .first()
        .or(val_x.first())
        .map(|x| x.len())
        .ok_or_else(|| Error::InvalidConfig("training set is empty".into()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut head = DenseHead::<T>::glorot(d, &mut rng);
    let mut optimizer = HeadOptimizer::new(&head);
    let fixed = T::of(cfg.threshold);
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let mut history = History::default();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[T], u8)> = chunk.iter().map(|&i| (train_x[i], train_y[i])).collect();
            let masks: Vec<Vec<T>> = chunk
                .iter()
                .map(|_| sample_mask(&mut rng, d, cfg.dropout_rate))
                .collect();
            for ((x, y), mask) in batch.iter().zip(&masks) {
                let p = forward_with_mask(x, &head, Some(mask))?.probability;
                loss_sum += bce_loss(p, *y).as_f64();
                correct += usize::from(classify(p, fixed) == *y);
            }
            let grads = backward(&batch, &head, Some(&masks))?;
            optimizer.step(&mut head, &grads, &cfg.adam)?;
        }
        let n = train_x.len().max(1) as f64;
        let (val_loss, val_accuracy) = if val_x.is_empty() {
            (None, None)
        } else {
            let (l, a, _) = evaluate(&head, &val_x, &val_y, fixed)?;
            (Some(l), Some(a))
        };
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            val_loss,
            val_accuracy,
        });
    }

    let threshold = match cfg.threshold_mode {
        ThresholdMode::Fixed => fixed,
        ThresholdMode::ValidationMedian => {
            let probs = val_x
                .iter()
                .map(|x| head.predict(x).map(Scalar::as_f64))
                .collect::<Result<Vec<_>>>()?;
            median(probs)
                .map(|m| T::of(m.clamp(PROBABILITY_CLIP, 1.0 - PROBABILITY_CLIP)))
                .unwrap_or(fixed)
        }
    };
    head.threshold = threshold;
    Ok((head, history, threshold))
}

/// On-disk form of a trained head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct HeadFile<T: Scalar> {
    pub format_version: u32,
    pub d: usize,
    #[serde(rename = "W1")]
    pub w1: Vec<Vec<T>>,
    pub b1: Vec<T>,
    #[serde(rename = "W2")]
    pub w2: Vec<Vec<T>>,
    pub b2: Vec<T>,
    pub threshold: T,
}

impl<T: Scalar> From<&DenseHead<T>> for HeadFile<T> {
    fn from(head: &DenseHead<T>) -> Self {
        HeadFile {
            format_version: FORMAT_VERSION,
            d: head.d,
            w1: head.w1.chunks_exact(head.d.max(1)).map(<[T]>::to_vec).collect(),
            b1: head.b1.clone(),
            w2: vec![head.w2.clone()],
            b2: vec![head.b2],
            threshold: head.threshold,
        }
    }
}

impl<T: Scalar> TryFrom<HeadFile<T>> for DenseHead<T> {
    type Error = Error;

    fn try_from(file: HeadFile<T>) -> Result<Self> {
        let malformed = |reason: &str| Error::format("dense head", reason);
        if file.format_version != FORMAT_VERSION {
            return Err(malformed("unsupported format_version"));
        }
        let hidden = file.b1.len();
        if file.w1.len() != hidden || file.w1.iter().any(|row| row.len() != file.d) {
            return Err(malformed("W1 shape does not match d and b1"));
        }
        if file.w2.len() != 1 || file.w2[0].len() != hidden || file.b2.len() != 1 {
            return Err(malformed("W2/b2 shape does not match b1"));
        }
        let head = DenseHead {
            d: file.d,
            hidden,
            w1: file.w1.into_iter().flatten().collect(),
            b1: file.b1,
            w2: file.w2.into_iter().flatten().collect(),
            b2: file.b2[0],
            threshold: file.threshold,
        };
        if !head.is_finite() {
            return Err(malformed("non-finite weights"));
        }
        Ok(head)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn zero_head_is_half() {
        let head = DenseHead::<f64>::zeros(4);
        let p = head.predict(&[0.3, -1.0, 2.0, 5.0]).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn inference_ignores_dropout() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let head = DenseHead::<f64>::glorot(8, &mut rng);
        let x: Vec<f64> = (0..8).map(|i| i as f64 / 8.0).collect();
        let infer = forward(&x, &head, Mode::INFER).unwrap();
        let no_rate = forward(
            &x,
            &head,
            Mode::Train {
                rng: &mut rng,
                dropout_rate: 0.0,
            },
        )
        .unwrap();
        assert_eq!(infer, no_rate);
    }

    #[test]
    fn hand_example() {
        let mut head = DenseHead::<f64>::zeros(2);
        head.w1[0] = 1.0;
        head.w1[1] = -1.0;
        head.w2[0] = 1.0;
        let p = head.predict(&[2.0, 1.0]).unwrap();
        assert!(close(p, 0.731_058_578_630_005, 1e-12));
    }

    #[test]
    fn dimension_mismatch() {
        let head = DenseHead::<f64>::zeros(3);
        assert!(matches!(
            head.predict(&[1.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn bce_values() {
        assert!(close(bce_loss(0.5f64, 1), std::f64::consts::LN_2, 1e-12));
        assert!(close(bce_loss(1.0f64, 1), 1e-7, 1e-12));
        assert!(close(bce_loss(0.25f64, 0), 0.287_682_072_451_780_9, 1e-12));
        assert!(bce_loss(0.0f64, 1).is_finite());
    }

    #[test]
    fn output_gradient_at_half() {
        let head = DenseHead::<f64>::zeros(3);
        let x = [1.0, 2.0, 3.0];
        let g = backward(&[(&x[..], 1)], &head, None).unwrap();
        assert_eq!(g.b2, -0.5);
    }

    #[test]
    fn duplicated_batch_same_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let head = DenseHead::<f64>::glorot(5, &mut rng);
        let x = [0.1, -0.4, 0.3, 0.9, -0.2];
        let single = backward(&[(&x[..], 1)], &head, None).unwrap();
        let double = backward(&[(&x[..], 1), (&x[..], 1)], &head, None).unwrap();
        for (a, b) in single.w1.iter().zip(&double.w1) {
            assert!(close(*a, *b, 1e-15));
        }
        assert!(close(single.b2, double.b2, 1e-15));
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut params = vec![1.0f64, -2.0];
        let mut state = AdamState::new(2);
        adam_step(&mut params, &[0.0, 0.0], &mut state, &AdamHyper::default()).unwrap();
        assert_eq!(params, vec![1.0, -2.0]);
    }

    #[test]
    fn adam_first_step_magnitude() {
        let hyper = AdamHyper::default();
        let mut params = vec![0.0f64; 3];
        let grads = [0.5, -2.0, 1e-3];
        let mut state = AdamState::new(3);
        adam_step(&mut params, &grads, &mut state, &hyper).unwrap();
        for (p, g) in params.iter().zip(grads) {
            let expected = -hyper.learning_rate * g.abs() / (g.abs() + hyper.epsilon) * g.signum();
            assert!(close(*p, expected, 1e-12));
        }
    }

    #[test]
    fn adam_moment_decay() {
        let hyper = AdamHyper::default();
        let mut params = vec![0.0f64];
        let mut state = AdamState::new(1);
        adam_step(&mut params, &[1.0], &mut state, &hyper).unwrap();
        let m1 = state.m[0];
        adam_step(&mut params, &[0.0], &mut state, &hyper).unwrap();
        assert!(close(state.m[0], m1 * 0.9, 1e-15));
        adam_step(&mut params, &[0.0], &mut state, &hyper).unwrap();
        assert!(close(state.m[0], m1 * 0.81, 1e-15));
    }

    #[test]
    fn classify_boundaries() {
        assert_eq!(classify(0.7, 0.5), 1);
        assert_eq!(classify(0.5, 0.5), 1);
        assert_eq!(classify(0.49, 0.5), 0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.dropout_rate = 1.0;
        assert!(cfg.validate().is_err());
        cfg.dropout_rate = 0.2;
        cfg.threshold = 1.0;
        assert!(cfg.validate().is_err());
        cfg.threshold = 0.5;
        cfg.epochs = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn missing_embedding() {
        let table: HashMap<String, Vec<f64>> = HashMap::new();
        let ex = [ExampleRef { id: "a#0", label: 1 }];
        assert!(matches!(
            train(&ex, &[], &table, &TrainConfig::default()),
            Err(Error::MissingEmbedding(id)) if id == "a#0"
        ));
    }

    #[test]
    fn head_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let head = DenseHead::<f64>::glorot(6, &mut rng);
        let json = serde_json::to_string(&HeadFile::from(&head)).unwrap();
        let back: HeadFile<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(DenseHead::try_from(back).unwrap(), head);
    }

    #[test]
    fn median_threshold() {
        assert_eq!(median(vec![0.2, 0.9, 0.4]), Some(0.4));
        assert_eq!(median(vec![0.2, 0.4]), Some(0.30000000000000004));
        assert_eq!(median(vec![]), None);
    }
}
