use aenr::mask::{IdentityEstimator, NeuralGeometry, NeuralMaskEstimator, NeuralWeights, ZeroEstimator};
use aenr::metrics::si_sdr;
use aenr::pipeline::build_estimator;
use aenr::sim::{simulate, ScenarioKind, ScenarioSpec, SourceKind};
use aenr::{Pipeline, PipelineConfig};

fn with_estimator(name: &str) -> PipelineConfig {
    PipelineConfig {
        estimator: name.into(),
        ..PipelineConfig::default()
    }
}

fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

#[test]
fn wiener_improves_pink_noise_at_zero_db() {
    let mut gains = Vec::new();
    for seed in 1..=6 {
        let mut spec = ScenarioSpec::new(ScenarioKind::NearEndSingleTalk, 0.0, 0.0, 10.0, seed);
        spec.noise = SourceKind::Pink;
        let truth = simulate(&spec).unwrap();
        let mut pipe = Pipeline::from_config(with_estimator("wiener"), None).unwrap();
        let out = pipe.process_signal(&truth.mic, &truth.farend).unwrap();
        let before = si_sdr(&truth.mic, &truth.near).unwrap();
        let after = si_sdr(&out.output, &truth.near).unwrap();
        assert!(after > before, "seed {seed}: {before} -> {after}");
        gains.push(after - before);
        // silent far-end: the canceller never adapts
        assert_eq!(pipe.canceller().state().coefficient_energy(), 0.0);
    }
    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
    assert!(mean >= 3.0, "{gains:?}");
}

#[test]
fn oracle_recovers_near_end_in_double_talk() {
    for seed in [1, 2, 3] {
        let spec = ScenarioSpec::new(ScenarioKind::DoubleTalk, 0.0, 10.0, 8.0, seed);
        let truth = simulate(&spec).unwrap();
        let mut pipe = Pipeline::from_config(with_estimator("oracle"), Some(&truth.near)).unwrap();
        let out = pipe.process_signal(&truth.mic, &truth.farend).unwrap();
        let score = si_sdr(&out.output, &truth.near).unwrap();
        let unprocessed = si_sdr(&truth.mic, &truth.near).unwrap();
        eprintln!("oracle seed {seed}: {unprocessed:.2} -> {score:.2} dB");
        assert!(score >= 15.0, "seed {seed}: {score}");
    }
}

#[test]
fn identity_estimator_is_transparent() {
    let spec = ScenarioSpec::new(ScenarioKind::DoubleTalk, 0.0, 10.0, 3.0, 4);
    let truth = simulate(&spec).unwrap();
    let mut pipe = Pipeline::new(PipelineConfig::default(), Box::new(IdentityEstimator)).unwrap();
    let out = pipe.process_signal(&truth.mic, &truth.farend).unwrap();
    let diff: Vec<f64> = out.output.iter().zip(&out.error).map(|(a, b)| a - b).collect();
    assert!(power(&diff) <= 1e-20 * power(&out.error));
}

#[test]
fn zero_estimator_suppresses_everything() {
    let spec = ScenarioSpec::new(ScenarioKind::DoubleTalk, 0.0, 10.0, 2.0, 5);
    let truth = simulate(&spec).unwrap();
    let mut pipe = Pipeline::new(PipelineConfig::default(), Box::new(ZeroEstimator)).unwrap();
    let out = pipe.process_signal(&truth.mic, &truth.farend).unwrap();
    assert!(power(&out.output) <= 1e-6 * power(&truth.mic));
}

#[test]
fn identity_pipeline_cancels_linear_echo() {
    let mut spec = ScenarioSpec::new(ScenarioKind::FarEndSingleTalk, 0.0, 30.0, 10.0, 6);
    spec.farend = SourceKind::White;
    spec.noise = SourceKind::Silence;
    let truth = simulate(&spec).unwrap();
    let mut pipe = Pipeline::new(PipelineConfig::default(), Box::new(IdentityEstimator)).unwrap();
    let out = pipe.process_signal(&truth.mic, &truth.farend).unwrap();
    let tail = truth.len() - 32_000..truth.len() - 512;
    let erle = 10.0 * (power(&truth.mic[tail.clone()]) / power(&out.output[tail])).log10();
    assert!(erle >= 20.0, "{erle}");
}

#[test]
fn output_is_causal() {
    let spec = ScenarioSpec::new(ScenarioKind::DoubleTalk, 0.0, 10.0, 3.0, 7);
    let truth = simulate(&spec).unwrap();
    let cfg = with_estimator("wiener");
    let full = Pipeline::from_config(cfg.clone(), None)
        .unwrap()
        .process_signal(&truth.mic, &truth.farend)
        .unwrap();
    let cut = 20_000;
    let mut mic = truth.mic.clone();
    let mut far = truth.farend.clone();
    // scramble the future; frame-level output up to the cut must not move
    mic[cut..].iter_mut().for_each(|v| *v = -3.0 * *v + 0.1);
    far[cut..].iter_mut().for_each(|v| *v *= 5.0);
    let altered = Pipeline::from_config(cfg, None)
        .unwrap()
        .process_signal(&mic, &far)
        .unwrap();
    let hop = 256;
    let latency = 256;
    let safe = (cut / hop) * hop - latency;
    assert_eq!(full.output[..safe], altered.output[..safe]);
    assert_eq!(full.error[..cut / hop * hop], altered.error[..cut / hop * hop]);
}

#[test]
fn neural_pipeline_is_deterministic() {
    let cfg = PipelineConfig::default();
    let geometry = NeuralGeometry::for_layout(&cfg.layout().unwrap());
    let weights = NeuralWeights::random(geometry, 42).unwrap();
    let spec = ScenarioSpec::new(ScenarioKind::DoubleTalk, 0.0, 10.0, 2.0, 8);
    let truth = simulate(&spec).unwrap();
    let run = || {
        let est = NeuralMaskEstimator::new(weights.clone());
        let mut pipe = Pipeline::new(cfg.clone(), Box::new(est)).unwrap();
        pipe.process_signal(&truth.mic, &truth.farend).unwrap().output
    };
    let a = run();
    let b = run();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn reset_replays_identically() {
    let spec = ScenarioSpec::new(ScenarioKind::DoubleTalk, 0.0, 10.0, 2.0, 9);
    let truth = simulate(&spec).unwrap();
    let cfg = with_estimator("wiener");
    let est = build_estimator(&cfg.estimator_spec().unwrap(), &cfg, None).unwrap();
    let mut pipe = Pipeline::new(cfg, est).unwrap();
    let first = pipe.process_signal(&truth.mic, &truth.farend).unwrap().output;
    pipe.reset();
    let second = pipe.process_signal(&truth.mic, &truth.farend).unwrap().output;
    assert_eq!(first, second);
}
