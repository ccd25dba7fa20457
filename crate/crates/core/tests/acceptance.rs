//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use aenr::features::{make_layout, reorient, ReorientedFeatureBlock};
use aenr::kalman::{KalmanAec, KalmanConfig};
use aenr::mask::{NeuralGeometry, NeuralMaskEstimator, NeuralWeights};
use aenr::metrics::{erle, rtf, si_sdr, SI_SDR_CAP_DB};
use aenr::sim::{
    render_echo, simulate, speech, speech_shaped, white, EchoPath, ScenarioKind, ScenarioSpec,
    SAMPLE_RATE,
};
use aenr::stft::{compress, decompress, round_trip, Spectrum, Stft, StftConfig, WindowKind};
use aenr::{Pipeline, PipelineConfig};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SR: usize = SAMPLE_RATE as usize;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn stft_round_trip() -> Outcome {
    let stft = Stft::new(StftConfig::default()).map_err(|e| e.to_string())?;
    let lag = stft.latency();
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, x) in [
        ("white", white(1, 10 * SR)),
        ("speech-shaped", speech_shaped(2, 10 * SR)),
    ] {
        let start = Instant::now();
        let y = round_trip(&stft, &x).map_err(|e| e.to_string())?;
        let secs = start.elapsed().as_secs_f64();
        let err: Vec<f64> = x[..x.len() - lag].iter().zip(&y[lag..]).map(|(a, b)| a - b).collect();
        let db = 10.0 * (energy(&err) / energy(&x[..x.len() - lag])).log10();
        ok &= db <= -80.0 && secs < 1.0;
        notes.push(format!("{name} {db:.1} dB in {secs:.3} s"));
    }
    check(ok, notes.join(", "))
}

fn compression_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let bins: Vec<Complex64> = (0..100_000)
        .map(|_| {
            let mag = 10f64.powf(rng.random_range(-6.0..4.0));
            Complex64::from_polar(mag, rng.random_range(-3.14..3.14))
        })
        .collect();
    // DC and Nyquist of a Spectrum are real, so wrap the bins one frame at
    // a time with those two slots unused
    let mut worst: f64 = 0.0;
    for chunk in bins.chunks(255) {
        let mut frame = vec![Complex64::new(0.0, 0.0)];
        frame.extend_from_slice(chunk);
        frame.push(Complex64::new(0.0, 0.0));
        let spec = Spectrum::new(frame, 0);
        let back = decompress(&compress(&spec, 0.3).map_err(|e| e.to_string())?, 0.3)
            .map_err(|e| e.to_string())?;
        for (a, b) in spec.bins()[1..=chunk.len()].iter().zip(&back.bins()[1..]) {
            worst = worst.max((a - b).norm() / a.norm());
        }
    }
    check(worst < 1e-9, format!("1e5 bins, worst relative error {worst:.2e}"))
}

fn feature_geometry() -> Outcome {
    let layout = make_layout(257, 48, 0.33).map_err(|e| e.to_string())?;
    let mut ok = layout.hop_bins == 32 && layout.band_count == 8 && layout.padded_length == 272;
    let block = reorient(&[1.0; 257], &[2.0; 257], &[3.0; 257], &layout).map_err(|e| e.to_string())?;
    ok &= block.shape() == (24, 48);
    for r in 0..block.rows {
        let start = layout.band_starts[r / 3];
        for c in 0..block.cols {
            let expected = if start + c < 257 { (r % 3 + 1) as f64 } else { 0.0 };
            ok &= block.get(r, c) == expected;
        }
    }
    check(
        ok,
        format!(
            "hop {}, B {}, padded {}, shape {:?}, rows cycle Z/E/Y",
            layout.hop_bins,
            layout.band_count,
            layout.padded_length,
            block.shape()
        ),
    )
}

fn kalman_convergence() -> Outcome {
    let n = 20 * SR;
    let far: Vec<f64> = white(11, n).iter().map(|v| 0.05 * v).collect();
    let path_a = EchoPath::decaying(256, 50.0, 0, 1).map_err(|e| e.to_string())?;
    let path_b = EchoPath::decaying(256, 50.0, 0, 2).map_err(|e| e.to_string())?;
    let ea = render_echo(&far, &path_a, None);
    let eb = render_echo(&far, &path_b, None);
    let mic: Vec<f64> = (0..n).map(|i| if i < 10 * SR { ea[i] } else { eb[i] }).collect();
    let mut aec = KalmanAec::new(KalmanConfig::default(), &StftConfig::default())
        .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut err = Vec::with_capacity(n);
    for (m, y) in mic.chunks_exact(256).zip(far.chunks_exact(256)) {
        err.extend(aec.process(m, y).map_err(|e| e.to_string())?.error);
    }
    let secs = start.elapsed().as_secs_f64();
    let series = erle(&mic, &err, 0.5, SAMPLE_RATE).map_err(|e| e.to_string())?;
    // half-second blocks: block 10 starts at 5 s, block 30 at 15 s
    let settled = series[10..20].iter().cloned().fold(f64::INFINITY, f64::min);
    let recovered = series[30..40].iter().cloned().fold(f64::INFINITY, f64::min);
    check(
        settled >= 20.0 && recovered >= 15.0 && secs < 10.0,
        format!(
            "ERLE 5-10 s >= {settled:.1} dB, 5-10 s after path change >= {recovered:.1} dB, 20 s audio in {secs:.2} s"
        ),
    )
}

fn error_decomposition() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 1..=3 {
        let spec = ScenarioSpec::new(ScenarioKind::DoubleTalk, -5.0 + 5.0 * seed as f64, 10.0, 4.0, seed);
        let truth = simulate(&spec).map_err(|e| e.to_string())?;
        let mut pipe = Pipeline::from_config(PipelineConfig::default(), None).map_err(|e| e.to_string())?;
        let out = pipe.process_signal(&truth.mic, &truth.farend).map_err(|e| e.to_string())?;
        for i in 0..truth.len() {
            let lhs = out.error[i] - (truth.near[i] + truth.noise[i]);
            let rhs = truth.echo[i] - out.echo[i];
            let scale = truth.mic[i].abs() + out.echo[i].abs() + truth.near[i].abs() + truth.noise[i].abs();
            worst = worst.max((lhs - rhs).abs() / (f64::EPSILON * scale.max(f64::MIN_POSITIVE)));
        }
    }
    check(worst <= 4.0, format!("3 DT scenarios, worst deviation {worst:.2} ulp of the operands"))
}

fn oracle_round_trip() -> Outcome {
    let mut scores = Vec::new();
    for seed in 1..=3 {
        let spec = ScenarioSpec::new(ScenarioKind::DoubleTalk, 0.0, 10.0, 8.0, seed);
        let truth = simulate(&spec).map_err(|e| e.to_string())?;
        let cfg = PipelineConfig {
            estimator: "oracle".into(),
            ..PipelineConfig::default()
        };
        let mut pipe = Pipeline::from_config(cfg, Some(&truth.near)).map_err(|e| e.to_string())?;
        let out = pipe.process_signal(&truth.mic, &truth.farend).map_err(|e| e.to_string())?;
        scores.push(si_sdr(&out.output, &truth.near).map_err(|e| e.to_string())?);
    }
    let worst = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    check(
        worst >= 15.0,
        format!("SI-SDR {scores:.1?} dB (all bins, clipped ones included)"),
    )
}

fn mixing_accuracy() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (i, ser) in (-20..=20).step_by(5).enumerate() {
        for (j, snr) in (-5..=30).step_by(5).enumerate() {
            let spec = ScenarioSpec::new(
                ScenarioKind::DoubleTalk,
                ser as f64,
                snr as f64,
                3.0,
                (100 + 10 * i + j) as u64,
            );
            let truth = simulate(&spec).map_err(|e| e.to_string())?;
            let got_ser = truth.measured_ser_db().ok_or("SER undefined")?;
            let got_snr = truth.measured_snr_db().ok_or("SNR undefined")?;
            worst = worst.max((got_ser - ser as f64).abs()).max((got_snr - snr as f64).abs());
            cases += 1;
        }
    }
    check(worst <= 0.1, format!("{cases} SER/SNR pairs, worst deviation {worst:.2e} dB"))
}

fn si_sdr_properties() -> Outcome {
    let x = speech(5, 2 * SR);
    let mut ok = true;
    for c in [1.0, 2.0, -0.5, 1e-3, 1e3] {
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        ok &= si_sdr(&scaled, &x).map_err(|e| e.to_string())? == SI_SDR_CAP_DB;
    }
    // remove the component along x from white noise, then match x's power
    let w = white(6, x.len());
    let proj = w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / energy(&x);
    let mut n: Vec<f64> = w.iter().zip(&x).map(|(a, b)| a - proj * b).collect();
    let g = (energy(&x) / energy(&n)).sqrt();
    n.iter_mut().for_each(|v| *v *= g);
    let est: Vec<f64> = x.iter().zip(&n).map(|(a, b)| a + b).collect();
    let zero = si_sdr(&est, &x).map_err(|e| e.to_string())?;
    ok &= zero.abs() < 1e-9;
    check(ok, format!("scaled copies hit the {SI_SDR_CAP_DB} dB cap, orthogonal equal-power noise {zero:.1e} dB"))
}

fn real_time_factor() -> Outcome {
    let cfg = PipelineConfig::default();
    let layout = cfg.layout().map_err(|e| e.to_string())?;
    let weights = NeuralWeights::random(NeuralGeometry::for_layout(&layout), 9).map_err(|e| e.to_string())?;
    let spec = ScenarioSpec::new(ScenarioKind::DoubleTalk, 0.0, 10.0, 60.0, 3);
    let truth = simulate(&spec).map_err(|e| e.to_string())?;
    let mut failure = None;
    let report = rtf(
        || {
            let est = NeuralMaskEstimator::new(weights.clone());
            let result = Pipeline::new(cfg.clone(), Box::new(est))
                .and_then(|mut p| p.process_signal(&truth.mic, &truth.farend));
            if let Err(e) = result {
                failure = Some(e.to_string());
            }
        },
        60.0,
        5,
    )
    .map_err(|e| e.to_string())?;
    if let Some(e) = failure {
        return Err(e);
    }
    check(
        report.median < 0.25,
        format!(
            "60 s with random-weight neural estimator: median RTF {:.4} (min {:.4}, max {:.4}, {} runs)",
            report.median, report.min, report.max, report.runs
        ),
    )
}

fn neural_self_test() -> Outcome {
    let cfg = PipelineConfig::default();
    let layout = cfg.layout().map_err(|e| e.to_string())?;
    let weights = NeuralWeights::random(NeuralGeometry::for_layout(&layout), 4).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let blocks: Vec<ReorientedFeatureBlock> = (0..20)
        .map(|i| {
            let mut b = ReorientedFeatureBlock::zeros(&layout, i);
            b.data.iter_mut().for_each(|v| *v = rng.random_range(0.0..3.0));
            b
        })
        .collect();
    let run = || -> Result<Vec<u64>, String> {
        let mut est = NeuralMaskEstimator::new(weights.clone());
        let mut bits = Vec::new();
        for b in &blocks {
            let m = est.step_block(b).map_err(|e| e.to_string())?;
            bits.extend(m.magnitude.iter().chain(&m.phase).map(|v| v.to_bits()));
        }
        Ok(bits)
    };
    let deterministic = run()? == run()?;

    let toy = NeuralGeometry {
        rows: 6,
        cols: 8,
        bins: 9,
        conv_channels: 3,
        kernel: 3,
        hidden: 5,
    };
    let w = NeuralWeights::random(toy, 7).map_err(|e| e.to_string())?;
    let block = ReorientedFeatureBlock {
        rows: 6,
        cols: 8,
        data: (0..48).map(|_| rng.random_range(0.0..2.0)).collect(),
        frame_index: 0,
    };
    let h0 = vec![0.0; toy.hidden];
    let grad = w.magnitude_sum_gradient(&block, &h0).map_err(|e| e.to_string())?;
    let loss = |w: &NeuralWeights| -> Result<f64, String> {
        Ok(w.forward(&block, &h0).map_err(|e| e.to_string())?.mask.magnitude.iter().sum())
    };
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..w.parameter_count() {
        let mut plus = w.clone();
        plus.set_param(i, w.param(i) + eps);
        let mut minus = w.clone();
        minus.set_param(i, w.param(i) - eps);
        let numeric = (loss(&plus)? - loss(&minus)?) / (2.0 * eps);
        let scale = numeric.abs().max(grad[i].abs()).max(1e-6);
        worst = worst.max((numeric - grad[i]).abs() / scale);
    }
    check(
        deterministic && worst < 1e-4,
        format!(
            "bit-identical over 20 frames: {deterministic}, worst gradient relative error {worst:.2e} over {} parameters",
            w.parameter_count()
        ),
    )
}

fn default_config_audit() -> Outcome {
    let parsed = PipelineConfig::from_toml_str("").map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::default();
    let layout = cfg.layout().map_err(|e| e.to_string())?;
    let ok = parsed == cfg
        && cfg.stft.fft_order == 512
        && cfg.stft.bins() == 257
        && cfg.stft.sample_rate == 16_000
        && cfg.stft.hop == 256
        && cfg.stft.window == WindowKind::SqrtHann
        && cfg.alpha == 0.3
        && cfg.layout.band_length == 48
        && cfg.layout.overlap == 0.33
        && layout.band_count == 8
        && cfg.kalman.partitions == 10
        && cfg.kalman.smoothing == 0.8;
    check(
        ok,
        "N_FFT 512, K 257, 16 kHz, alpha 0.3, K_B 48, overlap 0.33 (B 8), 10 partitions, smoothing 0.8".into(),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("STFT round trip", stft_round_trip),
        ("compression round trip", compression_round_trip),
        ("feature geometry", feature_geometry),
        ("Kalman convergence", kalman_convergence),
        ("error decomposition", error_decomposition),
        ("oracle mask round trip", oracle_round_trip),
        ("mixing accuracy", mixing_accuracy),
        ("SI-SDR properties", si_sdr_properties),
        ("real-time factor", real_time_factor),
        ("neural estimator self-test", neural_self_test),
        ("default config audit", default_config_audit),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
