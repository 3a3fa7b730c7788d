//! Softmax head over attention features, the cross-entropy objective, and
//! joint training of circuit angles and head weights.
//!
//! Class indices follow [`PhaseLabel::index`]: AFM = 0, SPT = 1, PM = 2.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{apply_ansatz, gradient_expectations, pair_count, AnsatzParams};
use crate::attention::{attention_analytic, AttentionMatrix};
use crate::error::{Error, Result};
use crate::hamiltonian::PhaseLabel;
use crate::scalar::Real;
use crate::statevec::StateVector;

pub const N_CLASSES: usize = 3;
pub const CHECKPOINT_SCHEMA: &str = "swapattn.checkpoint/1";

/// Single dense layer `W·q + b` with `W` of shape 3×m, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierParams<T: Real> {
    m: usize,
    w: Vec<T>,
    b: [T; N_CLASSES],
}

impl<T: Real> ClassifierParams<T> {
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            w: vec![T::zero(); N_CLASSES * m],
            b: [T::zero(); N_CLASSES],
        }
    }

    pub fn new(m: usize, w: Vec<T>, b: [T; N_CLASSES]) -> Result<Self> {
        if w.len() != N_CLASSES * m {
            return Err(Error::Dimension {
                expected: N_CLASSES * m,
                actual: w.len(),
            });
        }
        Ok(Self { m, w, b })
    }

    pub fn n_features(&self) -> usize {
        self.m
    }

    pub fn weights(&self) -> &[T] {
        &self.w
    }

    pub fn bias(&self) -> &[T; N_CLASSES] {
        &self.b
    }

    pub fn logits(&self, q: &[T]) -> Result<[T; N_CLASSES]> {
        if q.len() != self.m {
            return Err(Error::Dimension {
                expected: self.m,
                actual: q.len(),
            });
        }
        let mut z = self.b;
        for (c, zc) in z.iter_mut().enumerate() {
            *zc += self.w[c * self.m..(c + 1) * self.m]
                .iter()
                .zip(q)
                .map(|(&w, &x)| w * x)
                .sum::<T>();
        }
        Ok(z)
    }
}

/// Numerically stable softmax.
pub fn softmax<T: Real>(z: &[T; N_CLASSES]) -> [T; N_CLASSES] {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let mut p = z.map(|v| (v - max).exp());
    let s: T = p.iter().copied().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

/// softmax(W·q + b).
pub fn forward<T: Real>(q: &[T], p: &ClassifierParams<T>) -> Result<[T; N_CLASSES]> {
    Ok(softmax(&p.logits(q)?))
}

/// −ln p[label], with p clamped below at 1e-12.
pub fn cross_entropy<T: Real>(pred: &[T; N_CLASSES], label: PhaseLabel) -> T {
    -pred[label.index()].max(T::lit(1e-12)).ln()
}

/// Circuit angles plus head weights: the full trainable set.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T: Real> {
    pub ansatz: AnsatzParams<T>,
    pub head: ClassifierParams<T>,
}

impl<T: Real> Model<T> {
    /// Angles uniform in [−scale, scale] from `seed`; zero head.
    pub fn init(n_qubits: usize, layers: usize, scale: f64, seed: u64) -> Result<Self> {
        Ok(Self {
            ansatz: AnsatzParams::random(n_qubits, layers, scale, seed)?,
            head: ClassifierParams::zeros(pair_count(n_qubits)),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.ansatz.n_qubits()
    }

    fn check_state(&self, s: &StateVector<T>) -> Result<()> {
        if s.n_qubits() != self.n_qubits() {
            return Err(Error::Dimension {
                expected: self.n_qubits(),
                actual: s.n_qubits(),
            });
        }
        Ok(())
    }

    /// Attention matrix of the feature-mapped state.
    pub fn attention(&self, state: &StateVector<T>) -> Result<AttentionMatrix<T>> {
        self.check_state(state)?;
        let mut phi = state.clone();
        apply_ansatz(&mut phi, &self.ansatz)?;
        phi.check_norm()?;
        attention_analytic(&phi)
    }

    pub fn probabilities(&self, state: &StateVector<T>) -> Result<[T; N_CLASSES]> {
        forward(&self.attention(state)?.upper_triangle(), &self.head)
    }

    fn flat_len(&self) -> usize {
        self.ansatz.theta().len() + self.head.w.len() + N_CLASSES
    }

    fn flatten(&self) -> Vec<T> {
        let mut v = self.ansatz.theta().to_vec();
        v.extend_from_slice(&self.head.w);
        v.extend_from_slice(&self.head.b);
        v
    }

    fn assign(&mut self, flat: &[T]) {
        let nt = self.ansatz.theta().len();
        let nw = self.head.w.len();
        self.ansatz.theta_mut().copy_from_slice(&flat[..nt]);
        self.head.w.copy_from_slice(&flat[nt..nt + nw]);
        self.head.b.copy_from_slice(&flat[nt + nw..]);
    }
}

/// Most probable label and the class probabilities.
pub fn predict<T: Real>(state: &StateVector<T>, model: &Model<T>) -> Result<(PhaseLabel, [T; N_CLASSES])> {
    let p = model.probabilities(state)?;
    let mut best = 0;
    for c in 1..N_CLASSES {
        if p[c] > p[best] {
            best = c;
        }
    }
    Ok((PhaseLabel::from_index(best).expect("class index"), p))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleGradient<T> {
    pub loss: T,
    pub theta: Vec<T>,
    pub w: Vec<T>,
    pub b: [T; N_CLASSES],
}

/// Loss and gradients for one labeled state.
///
/// Head gradients come from the closed-form softmax/cross-entropy backward
/// pass. The angle gradient is one adjoint sweep with the observable
/// Σ w_ij SWAP_ij, where w_ij = ∂loss/∂q_ij.
pub fn loss_gradients<T: Real>(
    state: &StateVector<T>,
    label: PhaseLabel,
    model: &Model<T>,
) -> Result<SampleGradient<T>> {
    let q = model.attention(state)?.upper_triangle();
    let pred = forward(&q, &model.head)?;
    let loss = cross_entropy(&pred, label);
    let m = model.head.m;
    let mut dz = pred;
    dz[label.index()] -= T::one();
    let mut w = vec![T::zero(); N_CLASSES * m];
    let mut dq = vec![T::zero(); m];
    for c in 0..N_CLASSES {
        let row = &model.head.w[c * m..(c + 1) * m];
        for k in 0..m {
            w[c * m + k] = dz[c] * q[k];
            dq[k] += row[k] * dz[c];
        }
    }
    let (_, theta) = gradient_expectations(state, &model.ansatz, &dq)?;
    Ok(SampleGradient { loss, theta, w, b: dz })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Mini-batch size; `None` trains full-batch.
    pub batch: Option<usize>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub layers: usize,
    /// Half-width of the uniform angle initialization.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 200,
            seed: 7,
            batch: None,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            layers: 1,
            init_scale: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.epochs == 0 || self.layers == 0 {
            return Err(Error::Config(
                "learning_rate must be > 0, epochs and layers >= 1".into(),
            ));
        }
        if self.batch == Some(0) {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::Config("invalid moment parameters".into()));
        }
        Ok(())
    }
}

/// Adaptive-moment optimizer over a flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    pub fn new(len: usize, cfg: &TrainConfig) -> Self {
        Self {
            lr: T::lit(cfg.learning_rate),
            beta1: T::lit(cfg.beta1),
            beta2: T::lit(cfg.beta2),
            eps: T::lit(cfg.epsilon),
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        self.t += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.t);
        let c2 = one - self.beta2.powi(self.t);
        for k in 0..params.len() {
            let g = grad[k];
            self.m[k] = self.beta1 * self.m[k] + (one - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (one - self.beta2) * g * g;
            let mh = self.m[k] / c1;
            let vh = self.v[k] / c2;
            params[k] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Mean loss and mean flattened gradient over `samples`.
///
/// Per-sample passes run in parallel; the reduction is sequential in sample
/// order so results are bitwise reproducible.
pub fn batch_gradient<T: Real>(
    samples: &[(&StateVector<T>, PhaseLabel)],
    model: &Model<T>,
) -> Result<(T, Vec<T>)> {
    let grads = samples
        .par_iter()
        .map(|(s, l)| loss_gradients(s, *l, model))
        .collect::<Result<Vec<_>>>()?;
    let mut total = vec![T::zero(); model.flat_len()];
    let mut loss = T::zero();
    for g in &grads {
        loss += g.loss;
        let tail = g.theta.iter().chain(&g.w).chain(&g.b);
        total.iter_mut().zip(tail).for_each(|(t, &x)| *t += x);
    }
    let inv = T::one() / T::from_count(samples.len().max(1));
    total.iter_mut().for_each(|t| *t *= inv);
    Ok((loss * inv, total))
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T: Real> {
    pub model: Model<T>,
    /// Mean training loss before each epoch's update, then after the last one.
    pub history: Vec<f64>,
    pub final_loss: f64,
}

/// Trains angles and head jointly with Adam. Deterministic in `cfg.seed`.
pub fn train<T: Real>(samples: &[(&StateVector<T>, PhaseLabel)], cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let first = samples
        .first()
        .ok_or_else(|| Error::Config("training set is empty".into()))?;
    let n = first.0.n_qubits();
    let mut model = Model::init(n, cfg.layers, cfg.init_scale, cfg.seed)?;
    let mut opt = Adam::new(model.flat_len(), cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x005E_ED0F_BA7C);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs + 1);

    for epoch in 0..cfg.epochs {
        let batches: Vec<Vec<usize>> = match cfg.batch {
            None => vec![order.clone()],
            Some(bs) => {
                order.shuffle(&mut rng);
                order.chunks(bs).map(|c| c.to_vec()).collect()
            }
        };
        let mut epoch_loss = 0.0;
        for batch in &batches {
            let subset: Vec<(&StateVector<T>, PhaseLabel)> = batch.iter().map(|&k| samples[k]).collect();
            let (loss, grad) = batch_gradient(&subset, &model)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(nan_diagnostics(samples, &model, epoch));
            }
            epoch_loss += loss.as_f64() * batch.len() as f64;
            let mut flat = model.flatten();
            opt.step(&mut flat, &grad);
            model.assign(&flat);
        }
        history.push(epoch_loss / samples.len() as f64);
    }
    let (final_loss, _) = batch_gradient(samples, &model)?;
    let final_loss = final_loss.as_f64();
    if !final_loss.is_finite() {
        return Err(nan_diagnostics(samples, &model, cfg.epochs));
    }
    history.push(final_loss);
    Ok(TrainOutcome {
        model,
        history,
        final_loss,
    })
}

fn nan_diagnostics<T: Real>(samples: &[(&StateVector<T>, PhaseLabel)], model: &Model<T>, epoch: usize) -> Error {
    let norm = |v: &[T]| v.iter().map(|x| x.as_f64().powi(2)).sum::<f64>().sqrt();
    let offending = samples.iter().position(|(s, l)| {
        loss_gradients(s, *l, model)
            .map(|g| !g.loss.is_finite())
            .unwrap_or(true)
    });
    Error::NumericalHealth(format!(
        "non-finite loss at epoch {epoch}: |theta| = {:.3e}, |W| = {:.3e}, |b| = {:.3e}, first offending sample = {:?}",
        norm(model.ansatz.theta()),
        norm(&model.head.w),
        norm(&model.head.b),
        offending
    ))
}

/// Fraction of samples whose predicted label matches.
pub fn accuracy<T: Real>(samples: &[(&StateVector<T>, PhaseLabel)], model: &Model<T>) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Config("empty evaluation set".into()));
    }
    let hits = samples
        .par_iter()
        .map(|(s, l)| predict(s, model).map(|(p, _)| (p == *l) as usize))
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / samples.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub config_digest: String,
    pub final_loss: f64,
    pub epochs: usize,
    pub train_size: usize,
    #[serde(default)]
    pub manifest_digest: Option<String>,
    /// Dataset record indices used for training, in draw order.
    #[serde(default)]
    pub train_indices: Vec<usize>,
}

/// Serialized model: JSON document with base64 little-endian `f64` arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub schema_version: String,
    pub n_qubits: usize,
    pub layers: usize,
    pub label_order: Vec<PhaseLabel>,
    pub weights_shape: [usize; 2],
    pub theta: String,
    pub weights: String,
    pub bias: String,
    pub metadata: CheckpointMeta,
}

fn encode(v: &[f64]) -> String {
    let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
    B64.encode(bytes)
}

fn decode(s: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let bytes = B64
        .decode(s)
        .map_err(|e| Error::Format(format!("{what}: {e}")))?;
    if bytes.len() != expected * 8 {
        return Err(Error::Format(format!(
            "{what}: {} bytes, expected {}",
            bytes.len(),
            expected * 8
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

impl ModelCheckpoint {
    pub fn from_model(model: &Model<f64>, metadata: CheckpointMeta) -> Self {
        Self {
            schema_version: CHECKPOINT_SCHEMA.to_string(),
            n_qubits: model.n_qubits(),
            layers: model.ansatz.layers(),
            label_order: PhaseLabel::ALL.to_vec(),
            weights_shape: [N_CLASSES, model.head.m],
            theta: encode(model.ansatz.theta()),
            weights: encode(&model.head.w),
            bias: encode(&model.head.b),
            metadata,
        }
    }

    pub fn to_model(&self) -> Result<Model<f64>> {
        if self.schema_version != CHECKPOINT_SCHEMA {
            return Err(Error::Compatibility(format!(
                "checkpoint schema {} (expected {CHECKPOINT_SCHEMA})",
                self.schema_version
            )));
        }
        if self.label_order != PhaseLabel::ALL {
            return Err(Error::Compatibility("unexpected label ordering".into()));
        }
        let m = pair_count(self.n_qubits);
        if self.weights_shape != [N_CLASSES, m] {
            return Err(Error::Format(format!(
                "weights shape {:?} inconsistent with {} qubits",
                self.weights_shape, self.n_qubits
            )));
        }
        let theta = decode(&self.theta, 4 * self.n_qubits * self.layers, "theta")?;
        let w = decode(&self.weights, N_CLASSES * m, "weights")?;
        let b = decode(&self.bias, N_CLASSES, "bias")?;
        Ok(Model {
            ansatz: AnsatzParams::new(self.n_qubits, self.layers, theta)?,
            head: ClassifierParams::new(m, w, [b[0], b[1], b[2]])?,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_examples() {
        let p = ClassifierParams::<f64>::zeros(4);
        let out = forward(&[0.3, -0.2, 0.9, 1.0], &p).unwrap();
        for v in out {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = ClassifierParams::new(2, vec![0.0; 6], [10.0, 0.0, 0.0]).unwrap();
        assert!(forward(&[0.5, 0.5], &p).unwrap()[0] > 0.9999);
        assert!(matches!(forward(&[0.5], &p), Err(Error::Dimension { .. })));
    }

    #[test]
    fn softmax_shift_invariance() {
        let z = [0.3f64, -1.2, 2.5];
        let a = softmax(&z);
        let b = softmax(&z.map(|v| v + 123.0));
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-12);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&[0.0, 1.0, 0.0], PhaseLabel::Spt), 0.0);
        let u = 1.0 / 3.0;
        assert!((cross_entropy(&[u, u, u], PhaseLabel::Pm) - 3f64.ln()).abs() < 1e-12);
        assert!((cross_entropy(&[0.0, 1.0, 0.0], PhaseLabel::Afm) - 1e-12f64.ln().abs()).abs() < 1e-9);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let cfg = TrainConfig::default();
        let mut opt = Adam::<f64>::new(2, &cfg);
        let mut p = [1.0, -1.0];
        opt.step(&mut p, &[0.5, -2.0]);
        assert!((p[0] - (1.0 - cfg.learning_rate)).abs() < 1e-8);
        assert!((p[1] - (-1.0 + cfg.learning_rate)).abs() < 1e-8);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { learning_rate: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { epochs: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { batch: Some(0), ..Default::default() }.validate().is_err());
        assert!(train::<f64>(&[], &TrainConfig::default()).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let model = Model::<f64>::init(4, 2, 0.3, 11).unwrap();
        let meta = CheckpointMeta {
            seed: 11,
            config_digest: "00".into(),
            final_loss: 0.5,
            epochs: 3,
            train_size: 4,
            manifest_digest: None,
            train_indices: vec![0, 3],
        };
        let ck = ModelCheckpoint::from_model(&model, meta);
        let back = ModelCheckpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back.to_model().unwrap(), model);

        let mut bad = ck.clone();
        bad.schema_version = "other/9".into();
        assert!(matches!(bad.to_model(), Err(Error::Compatibility(_))));
        let mut bad = ck;
        bad.weights_shape = [3, 5];
        assert!(bad.to_model().is_err());
    }
}
