//! Joint circuit/head training: gradients, determinism and failure modes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swapattn::ansatz::{pair_count, AnsatzParams};
use swapattn::classifier::*;
use swapattn::hamiltonian::*;
use swapattn::statevec::StateVector;

fn random_model(n: usize, layers: usize, seed: u64) -> Model<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = pair_count(n);
    let w = (0..N_CLASSES * m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b = [0, 1, 2].map(|_| rng.random_range(-0.5..0.5));
    Model {
        ansatz: AnsatzParams::random(n, layers, 1.5, seed).unwrap(),
        head: ClassifierParams::new(m, w, b).unwrap(),
    }
}

fn loss(state: &StateVector<f64>, label: PhaseLabel, model: &Model<f64>) -> f64 {
    cross_entropy(&model.probabilities(state).unwrap(), label)
}

fn with_head(model: &Model<f64>, w: Vec<f64>, b: [f64; N_CLASSES]) -> Model<f64> {
    Model {
        ansatz: model.ansatz.clone(),
        head: ClassifierParams::new(model.head.n_features(), w, b).unwrap(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

#[test]
fn loss_gradients_match_finite_differences() {
    let (n, eps) = (4, 1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for draw in 0..20 {
        let s = StateVector::<f64>::random(n, &mut rng).unwrap();
        let label = PhaseLabel::ALL[draw % 3];
        let model = random_model(n, 1, 100 + draw as u64);
        let g = loss_gradients(&s, label, &model).unwrap();
        assert!((g.loss - loss(&s, label, &model)).abs() < 1e-12);

        for k in 0..g.theta.len() {
            let mut up = model.clone();
            up.ansatz.theta_mut()[k] += eps;
            let mut down = model.clone();
            down.ansatz.theta_mut()[k] -= eps;
            let fd = (loss(&s, label, &up) - loss(&s, label, &down)) / (2.0 * eps);
            assert!(rel(fd, g.theta[k]) < 1e-4, "theta {k}: {fd} vs {}", g.theta[k]);
        }
        let w0 = model.head.weights().to_vec();
        let b0 = *model.head.bias();
        for k in 0..w0.len() {
            let (mut wu, mut wd) = (w0.clone(), w0.clone());
            wu[k] += eps;
            wd[k] -= eps;
            let fd = (loss(&s, label, &with_head(&model, wu, b0)) - loss(&s, label, &with_head(&model, wd, b0)))
                / (2.0 * eps);
            assert!(rel(fd, g.w[k]) < 1e-4, "W {k}: {fd} vs {}", g.w[k]);
        }
        for c in 0..N_CLASSES {
            let (mut bu, mut bd) = (b0, b0);
            bu[c] += eps;
            bd[c] -= eps;
            let fd = (loss(&s, label, &with_head(&model, w0.clone(), bu))
                - loss(&s, label, &with_head(&model, w0.clone(), bd)))
                / (2.0 * eps);
            assert!(rel(fd, g.b[c]) < 1e-4, "b {c}: {fd} vs {}", g.b[c]);
        }
    }
}

#[test]
fn confident_correct_prediction_has_no_gradient() {
    let s = StateVector::<f64>::random(4, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let base = random_model(4, 1, 2);
    let model = with_head(&base, vec![0.0; N_CLASSES * 6], [0.0, 1000.0, 0.0]);
    let g = loss_gradients(&s, PhaseLabel::Spt, &model).unwrap();
    assert!(g.loss.abs() < 1e-12);
    assert!(g.w.iter().chain(&g.b).chain(&g.theta).all(|&x| x.abs() < 1e-12));
}

#[test]
fn cross_entropy_is_clamped() {
    let p = [1.0f64, 0.0, 0.0];
    let l = cross_entropy(&p, PhaseLabel::Pm);
    assert!(l.is_finite() && (l + 1e-12f64.ln()).abs() < 1e-9);
}

fn toy_samples(n: usize, k: usize, seed: u64) -> Vec<(StateVector<f64>, PhaseLabel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|i| (StateVector::random(n, &mut rng).unwrap(), PhaseLabel::ALL[i % 3]))
        .collect()
}

fn refs(v: &[(StateVector<f64>, PhaseLabel)]) -> Vec<(&StateVector<f64>, PhaseLabel)> {
    v.iter().map(|(s, l)| (s, *l)).collect()
}

#[test]
fn batch_gradient_ignores_order_and_duplication() {
    let data = toy_samples(4, 6, 3);
    let model = random_model(4, 1, 5);
    let (l0, g0) = batch_gradient(&refs(&data), &model).unwrap();
    let mut perm = refs(&data);
    perm.reverse();
    perm.swap(1, 4);
    let (l1, g1) = batch_gradient(&perm, &model).unwrap();
    assert!((l0 - l1).abs() < 1e-12);
    assert!(g0.iter().zip(&g1).all(|(a, b)| (a - b).abs() < 1e-12));

    let doubled: Vec<_> = refs(&data).into_iter().flat_map(|x| [x, x]).collect();
    let (l2, g2) = batch_gradient(&doubled, &model).unwrap();
    assert!((l0 - l2).abs() < 1e-12);
    assert!(g0.iter().zip(&g2).all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn training_is_deterministic_and_reduces_loss() {
    let data = toy_samples(4, 9, 8);
    let cfg = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };
    let a = train(&refs(&data), &cfg).unwrap();
    let b = train(&refs(&data), &cfg).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.history, b.history);
    assert_eq!(a.history.len(), 11);
    assert!(a.history[10] < a.history[0]);
    assert!(a.final_loss <= a.history[0]);
    assert!((a.history[0] - 3f64.ln()).abs() < 1e-12, "zero head starts at ln 3");
}

#[test]
fn minibatches_are_seeded() {
    let data = toy_samples(3, 8, 4);
    let cfg = TrainConfig {
        epochs: 5,
        batch: Some(3),
        ..TrainConfig::default()
    };
    let a = train(&refs(&data), &cfg).unwrap();
    assert_eq!(a.model, train(&refs(&data), &cfg).unwrap().model);
    let other = TrainConfig { seed: 8, ..cfg };
    assert_ne!(a.model, train(&refs(&data), &other).unwrap().model);
}

#[test]
fn unhealthy_state_is_reported() {
    let mut s = StateVector::<f64>::zero_state(3).unwrap();
    s.amplitudes_mut()[0].re = f64::NAN;
    let samples = [(&s, PhaseLabel::Spt)];
    let err = train(&samples, &TrainConfig::default()).unwrap_err();
    assert!(matches!(err, swapattn::Error::NumericalHealth(_)), "{err}");
}

#[test]
fn empty_training_set_rejected() {
    assert!(train::<f64>(&[], &TrainConfig::default()).is_err());
}

#[test]
fn checkpoint_round_trip() {
    let model = random_model(4, 2, 9);
    let meta = CheckpointMeta {
        seed: 9,
        config_digest: "abc".into(),
        final_loss: 0.5,
        epochs: 3,
        train_size: 2,
        manifest_digest: None,
        train_indices: vec![0, 1],
    };
    let ck = ModelCheckpoint::from_model(&model, meta);
    let back = ModelCheckpoint::from_json(&ck.to_json().unwrap()).unwrap();
    assert_eq!(back.to_model().unwrap(), model);
}

#[test]
fn trained_model_separates_the_phases() {
    let cfg = DatasetConfig {
        n_sites: 7,
        grid: GridSpec {
            h1: [0.0, 1.6],
            h2: [-1.6, 1.6],
            shape: [9, 9],
        },
        ..DatasetConfig::default()
    };
    let ds = generate_dataset(&cfg).unwrap();
    let states: Vec<_> = (0..ds.records.len()).map(|k| ds.state(k).unwrap()).collect();
    let samples: Vec<_> = states.iter().zip(&ds.records).map(|(s, r)| (s, r.label)).collect();
    let out = train(&samples, &TrainConfig::default()).unwrap();
    assert!(accuracy(&samples, &out.model).unwrap() > 0.85);
    let at = |h1: f64, h2: f64| {
        let k = ds.records.iter().position(|r| r.h1 == h1 && r.h2 == h2).unwrap();
        predict(&states[k], &out.model).unwrap().0
    };
    assert_eq!(at(0.0, 0.0), PhaseLabel::Spt);
    assert_eq!(at(1.6, 0.0), PhaseLabel::Pm);
}
