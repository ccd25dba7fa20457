use aenr::sim::{
    render_echo, simulate, speech_shaped, white, EchoPath, ScenarioKind, ScenarioSpec,
    ScenarioTruth, SourceKind, SAMPLE_RATE,
};
use aenr::stft::{Stft, StftConfig, WindowKind};
use aenr::{Pipeline, PipelineConfig};

/// Welch PSD estimate with a Hann window, 512 points, 50% overlap.
fn welch(x: &[f64]) -> Vec<f64> {
    let stft = Stft::new(StftConfig {
        window: WindowKind::Hann,
        ..StftConfig::default()
    })
    .unwrap();
    let mut psd = vec![0.0; stft.bins()];
    let mut frames = 0.0;
    for (i, start) in (0..x.len() - 512).step_by(256).enumerate() {
        let spec = stft.analyze(&x[start..start + 512], i as u64).unwrap();
        psd.iter_mut().zip(spec.power()).for_each(|(a, p)| *a += p);
        frames += 1.0;
    }
    psd.iter_mut().for_each(|v| *v /= frames);
    psd
}

/// Mean PSD in dB over the octave `[lo, 2 lo)` Hz.
fn octave_db(psd: &[f64], lo: f64) -> f64 {
    let hz = SAMPLE_RATE as f64 / 512.0;
    let bins: Vec<f64> = psd
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let f = *k as f64 * hz;
            f >= lo && f < 2.0 * lo
        })
        .map(|(_, p)| *p)
        .collect();
    10.0 * (bins.iter().sum::<f64>() / bins.len() as f64).log10()
}

const OCTAVES: [f64; 5] = [250.0, 500.0, 1000.0, 2000.0, 4000.0];

#[test]
fn white_source_is_flat_per_octave() {
    let psd = welch(&white(3, 10 * SAMPLE_RATE as usize));
    let bands: Vec<f64> = OCTAVES.iter().map(|&lo| octave_db(&psd, lo)).collect();
    let mean = bands.iter().sum::<f64>() / bands.len() as f64;
    assert!(bands.iter().all(|b| (b - mean).abs() <= 1.0), "{bands:?}");
}

#[test]
fn speech_shaped_source_tilts_six_db_per_octave() {
    let psd = welch(&speech_shaped(3, 10 * SAMPLE_RATE as usize));
    let bands: Vec<f64> = OCTAVES.iter().map(|&lo| octave_db(&psd, lo)).collect();
    let expected = -20.0 * 2f64.log10();
    for w in bands.windows(2) {
        assert!(((w[1] - w[0]) - expected).abs() <= 2.0, "{bands:?}");
    }
}

#[test]
fn long_path_matches_naive_convolution() {
    let far = white(5, 6000);
    let path = EchoPath::decaying(512, 80.0, 37, 9).unwrap();
    let fast = render_echo(&far, &path, None);
    let mut naive = vec![0.0; far.len()];
    for i in path.delay..far.len() {
        for (j, h) in path.taps.iter().enumerate() {
            if j <= i - path.delay {
                naive[i] += h * far[i - path.delay - j];
            }
        }
    }
    let worst = fast
        .iter()
        .zip(&naive)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn requested_levels_are_measured_within_a_tenth_db() {
    for ser in [-20.0, -10.0, 0.0, 10.0, 20.0] {
        for snr in [-5.0, 5.0, 15.0, 30.0] {
            let spec = ScenarioSpec::new(ScenarioKind::DoubleTalk, ser, snr, 4.0, 31);
            let truth = simulate(&spec).unwrap();
            let got_ser = truth.measured_ser_db().unwrap();
            let got_snr = truth.measured_snr_db().unwrap();
            assert!((got_ser - ser).abs() <= 0.1, "SER {ser}: {got_ser}");
            assert!((got_snr - snr).abs() <= 0.1, "SNR {snr}: {got_snr}");
        }
    }
}

#[test]
fn mixture_identity_holds_exactly() {
    for kind in [
        ScenarioKind::NearEndSingleTalk,
        ScenarioKind::FarEndSingleTalk,
        ScenarioKind::DoubleTalk,
    ] {
        let truth = simulate(&ScenarioSpec::new(kind, 3.0, 12.0, 2.0, 2)).unwrap();
        for i in 0..truth.len() {
            assert_eq!(truth.mic[i], truth.near[i] + truth.echo[i] + truth.noise[i]);
        }
    }
}

#[test]
fn error_decomposes_into_near_noise_and_residual_echo() {
    for seed in [1, 2] {
        let spec = ScenarioSpec::new(ScenarioKind::DoubleTalk, 0.0, 10.0, 4.0, seed);
        let truth = simulate(&spec).unwrap();
        let mut pipe = Pipeline::from_config(PipelineConfig::default(), None).unwrap();
        let out = pipe.process_signal(&truth.mic, &truth.farend).unwrap();
        for i in 0..truth.len() {
            let lhs = out.error[i] - (truth.near[i] + truth.noise[i]);
            let rhs = truth.echo[i] - out.echo[i];
            assert!((lhs - rhs).abs() <= 1e-15, "sample {i}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn same_seed_same_streams() {
    let spec = ScenarioSpec::new(ScenarioKind::DoubleTalk, 0.0, 10.0, 2.0, 7);
    assert_eq!(simulate(&spec).unwrap(), simulate(&spec).unwrap());
    let other = ScenarioSpec { seed: 8, ..spec.clone() };
    assert_ne!(simulate(&spec).unwrap().near, simulate(&other).unwrap().near);
}

#[test]
fn written_scenario_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ScenarioSpec::new(ScenarioKind::DoubleTalk, 5.0, 20.0, 3.0, 7);
    let truth = simulate(&spec).unwrap();
    truth.write_dir(dir.path(), &spec).unwrap();
    let (spec_back, back) = ScenarioTruth::read_dir(dir.path()).unwrap();
    assert_eq!(spec_back, spec);
    assert_eq!(back.near, truth.near);
    assert_eq!(back.echo, truth.echo);
    assert_eq!(back.farend, truth.farend);
    assert!((back.measured_ser_db().unwrap() - 5.0).abs() <= 0.1);
    let nst = ScenarioSpec::new(ScenarioKind::NearEndSingleTalk, 0.0, 20.0, 1.0, 7);
    let nst_dir = dir.path().join("nst");
    simulate(&nst).unwrap().write_dir(&nst_dir, &nst).unwrap();
    let (_, nst_back) = ScenarioTruth::read_dir(&nst_dir).unwrap();
    assert!(nst_back.echo.iter().all(|&v| v == 0.0));
}

#[test]
fn spec_files_parse_and_validate() {
    let spec = ScenarioSpec::from_toml_str(
        r#"
kind = "DT"
ser_db = -5.0
snr_db = 15.0
duration_s = 2.0
seed = 3
near = "speech"
noise = "white"
farend = "tonal"
clip_level = 0.05

[echo_path]
taps = 512
rt60_ms = 120.0
delay_samples = 800
"#,
    )
    .unwrap();
    assert_eq!(spec.kind, ScenarioKind::DoubleTalk);
    assert_eq!(spec.farend, SourceKind::Tonal);
    assert!(simulate(&spec).is_ok());
    let too_late = "kind = \"FST\"\n[echo_path]\ndelay_samples = 24001\n";
    assert!(matches!(
        ScenarioSpec::from_toml_str(too_late),
        Err(aenr::Error::Config(_))
    ));
    assert!(ScenarioSpec::from_toml_str("kind = \"XT\"").is_err());
    assert!(ScenarioSpec::from_toml_str("kind = \"DT\"\nnear = \"violin\"").is_err());
}
