use deskbot_core::intent::{
    cross_entropy, load_model, one_hot, save_model, train, IntentCorpus, Mode, NetworkParameters,
    TrainingConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn loss_at(params: &NetworkParameters, x: &[f64], target: &[f64]) -> f64 {
    cross_entropy(&params.infer(x).unwrap(), target)
}

/// Central finite differences (eps = 1e-5) against the analytic gradient
/// at 20 random coordinates of a V=10, T=3 network with dropout off.
#[test]
fn analytic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let params = NetworkParameters::init(10, 3, 77).unwrap();
    let x: Vec<f64> = (0..10).map(|_| f64::from(rng.random_bool(0.5) as u8)).collect();
    let target = one_hot(1, 3);

    let (_, cache) = params
        .forward(&x, Mode::Train { dropout: 0.0 }, &mut rng)
        .unwrap();
    let grads = params.backward(&cache, &target).unwrap();
    let analytic: Vec<f64> = grads.values().copied().collect();

    let eps = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let k = rng.random_range(0..params.parameter_count());
        let mut plus = params.clone();
        *plus.value_mut(k).unwrap() += eps;
        let mut minus = params.clone();
        *minus.value_mut(k).unwrap() -= eps;
        let numeric = (loss_at(&plus, &x, &target) - loss_at(&minus, &x, &target)) / (2.0 * eps);
        let scale = analytic[k].abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((analytic[k] - numeric).abs() / scale);
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn bundled_corpus_trains_past_95_percent_and_recognizes_greeting() {
    let corpus = IntentCorpus::bundled();
    let out = train(
        &corpus,
        &TrainingConfig {
            seed: 1,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(out.final_accuracy() >= 0.95, "{:?}", out.history.last());
    assert_eq!(out.model.params.parameter_count(), 24398);
    assert_eq!(out.model.predict("hello").top().0, "greeting");
}

#[test]
fn saved_model_predicts_identically() {
    let corpus = IntentCorpus::bundled();
    let model = train(
        &corpus,
        &TrainingConfig {
            epochs: 20,
            seed: 4,
            ..Default::default()
        },
    )
    .unwrap()
    .model;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_model(&model, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(loaded, model);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let vocab = model.vocab.tokens();
    for _ in 0..100 {
        let n = rng.random_range(0..6);
        let text: Vec<&str> = (0..n)
            .map(|_| vocab[rng.random_range(0..vocab.len())].as_str())
            .collect();
        let text = text.join(" ");
        assert_eq!(loaded.predict(&text), model.predict(&text));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_outputs_are_a_distribution(
        seed in any::<u64>(),
        bits in proptest::collection::vec(any::<bool>(), 12),
    ) {
        let params = NetworkParameters::init(12, 5, seed).unwrap();
        let x: Vec<f64> = bits.iter().map(|b| f64::from(*b as u8)).collect();
        let p = params.infer(&x).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|q| *q > 0.0 && *q < 1.0));
    }
}
