use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use aenr::kalman::KalmanDiagnostics;
use aenr::mask::{EstimatorSpec, NeuralGeometry, NeuralWeights};
use aenr::metrics::{self, MetricsReport};
use aenr::pipeline::{build_estimator, FrameOutput};
use aenr::sim::{self, ScenarioKind, ScenarioSpec, ScenarioTruth, MANIFEST};
use aenr::wav::{read_wav_at, write_wav};
use aenr::{Pipeline, PipelineConfig};
use log::{debug, info, warn};

use crate::failure::{Failure, WithPath};
use crate::{ConfigArgs, ConfigSource, EvalArgs, InitWeightsArgs, ProcessArgs, SimulateArgs};

const ERLE_BLOCK_S: f64 = 1.0;

fn load_config(src: &ConfigSource) -> Result<PipelineConfig, Failure> {
    match &src.config {
        Some(path) => {
            let cfg = PipelineConfig::load(path).at(path)?;
            debug!("configuration from {}", path.display());
            Ok(cfg)
        }
        None => Ok(PipelineConfig::default()),
    }
}

fn fit_length(signal: &mut Vec<f64>, len: usize, what: &str) {
    if signal.len() != len {
        warn!(
            "{what} has {} samples, mic has {len}; {}",
            signal.len(),
            if signal.len() < len { "zero-padding" } else { "truncating" }
        );
        signal.resize(len, 0.0);
    }
}

fn power_db(energy: f64, n: usize) -> f64 {
    10.0 * (energy / n.max(1) as f64).max(1e-12).log10()
}

/// Per-second level summary for verbose runs.
#[derive(Default)]
struct SecondStats {
    frames: usize,
    mic: f64,
    error: f64,
    output: f64,
    seconds: usize,
}

impl SecondStats {
    fn push(&mut self, pipe: &Pipeline, mic: &[f64], frame: &FrameOutput) {
        let energy = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        self.mic += energy(mic);
        self.error += energy(&frame.error);
        self.output += energy(&frame.output);
        self.frames += 1;
        let hop = pipe.hop();
        let per_second = (pipe.config().stft.sample_rate as usize).div_ceil(hop);
        if self.frames == per_second {
            self.seconds += 1;
            let n = self.frames * hop;
            debug!(
                "t={:>4}s mic {:6.1} dB, canceller out {:6.1} dB (ERLE {:5.1} dB), output {:6.1} dB",
                self.seconds,
                power_db(self.mic, n),
                power_db(self.error, n),
                power_db(self.mic, n) - power_db(self.error, n),
                power_db(self.output, n),
            );
            *self = SecondStats {
                seconds: self.seconds,
                ..SecondStats::default()
            };
        }
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .or_else(|| path.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn write_report(path: &Path, rows: &[MetricsReport]) -> Result<(), Failure> {
    let mut out = csv::Writer::from_path(path).at(path)?;
    out.write_record(MetricsReport::CSV_HEADER).at(path)?;
    for row in rows {
        out.write_record(row.csv_fields()).at(path)?;
    }
    out.flush().at(path)?;
    Ok(())
}

pub fn process(args: &ProcessArgs) -> Result<(), Failure> {
    let mut cfg = load_config(&args.config)?;
    if let Some(est) = &args.estimator {
        cfg.estimator = est.clone();
    }
    let sr = cfg.stft.sample_rate;
    let mic = read_wav_at(&args.mic, sr).at(&args.mic)?;
    if mic.is_empty() {
        return Err(Failure::config(format!("{}: no samples", args.mic.display())));
    }
    let mut farend = read_wav_at(&args.farend, sr).at(&args.farend)?;
    fit_length(&mut farend, mic.len(), "far-end");
    let reference = match &args.reference {
        Some(path) => {
            let mut r = read_wav_at(path, sr).at(path)?;
            fit_length(&mut r, mic.len(), "reference");
            Some(r)
        }
        None => None,
    };

    let mut pipe = Pipeline::from_config(cfg, reference.as_deref())?;
    info!(
        "estimator {}, latency {} samples ({:.1} ms), output re-aligned to the mic",
        pipe.estimator_name(),
        pipe.latency(),
        1e3 * pipe.latency() as f64 / sr as f64
    );

    let mut trace = match &args.kf_trace {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).at(path)?);
            writeln!(w, "{}", KalmanDiagnostics::CSV_HEADER).at(path)?;
            Some((path, w))
        }
        None => None,
    };
    let mut trace_error = None;
    let mut stats = SecondStats::default();
    let start = Instant::now();
    let result = pipe.process_signal_observed(&mic, &farend, |p, mic_block, frame| {
        stats.push(p, mic_block, frame);
        if let Some((_, w)) = trace.as_mut() {
            let row = KalmanDiagnostics::measure(p.canceller(), mic_block, &frame.error);
            if let Err(e) = row.write_csv_row(w) {
                trace_error.get_or_insert(e);
            }
        }
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    if let Some((path, mut w)) = trace {
        if let Some(e) = trace_error {
            return Err(e).at(path);
        }
        w.flush().at(path)?;
    }
    write_wav(&args.out, &result.output, sr).at(&args.out)?;
    let duration = mic.len() as f64 / sr as f64;
    info!(
        "wrote {} ({duration:.2} s, real-time factor {:.3})",
        args.out.display(),
        elapsed / duration
    );

    if let Some(path) = &args.metrics {
        let near = reference.as_deref().filter(|r| r.iter().any(|&v| v != 0.0));
        let erle_db = match near {
            Some(_) => None,
            None => Some(metrics::mean(&metrics::erle(
                &mic,
                &result.output,
                ERLE_BLOCK_S,
                sr,
            )?)),
        };
        let report = MetricsReport {
            scenario: file_stem(&args.mic),
            estimator: pipe.estimator_name(),
            erle_series_db: Vec::new(),
            erle_db,
            si_sdr_db: near.map(|r| metrics::si_sdr(&result.output, r)).transpose()?,
            seg_snr_db: near.map(|r| metrics::seg_snr(&result.output, r, sr)).transpose()?,
            rtf: elapsed / duration,
        };
        write_report(path, &[report])?;
    }
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let spec = ScenarioSpec::load(&args.spec).at(&args.spec)?;
    let truth = sim::simulate(&spec)?;
    truth.write_dir(&args.out_dir, &spec).at(&args.out_dir)?;
    let fmt = |v: Option<f64>| v.map(|v| format!("{v:.2} dB")).unwrap_or_else(|| "n/a".into());
    info!(
        "{} scenario, {:.2} s, SER {}, SNR {} -> {}",
        spec.kind,
        truth.len() as f64 / truth.sample_rate as f64,
        fmt(truth.measured_ser_db()),
        fmt(truth.measured_snr_db()),
        args.out_dir.display()
    );
    Ok(())
}

/// A scenario to evaluate: a directory written by `simulate`, or a spec to
/// render on the fly.
enum ScenarioSource {
    Dir(PathBuf),
    Spec(PathBuf),
}

impl ScenarioSource {
    fn path(&self) -> &Path {
        match self {
            ScenarioSource::Dir(p) | ScenarioSource::Spec(p) => p,
        }
    }

    fn name(&self) -> String {
        file_stem(self.path())
    }

    fn load(&self) -> Result<(ScenarioSpec, ScenarioTruth), Failure> {
        match self {
            ScenarioSource::Dir(dir) => ScenarioTruth::read_dir(dir).at(dir),
            ScenarioSource::Spec(path) => {
                let spec = ScenarioSpec::load(path).at(path)?;
                let truth = sim::simulate(&spec).at(path)?;
                Ok((spec, truth))
            }
        }
    }
}

fn is_spec_file(path: &Path) -> bool {
    path.is_file() && path.extension().is_some_and(|e| e == "toml")
}

fn discover(paths: &[PathBuf]) -> Result<Vec<ScenarioSource>, Failure> {
    let mut found = Vec::new();
    for path in paths {
        if path.join(MANIFEST).is_file() {
            found.push(ScenarioSource::Dir(path.clone()));
        } else if path.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(path)
                .at(path)?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()
                .at(path)?;
            entries.sort();
            let before = found.len();
            for entry in entries {
                if entry.join(MANIFEST).is_file() {
                    found.push(ScenarioSource::Dir(entry));
                } else if is_spec_file(&entry) {
                    found.push(ScenarioSource::Spec(entry));
                }
            }
            if found.len() == before {
                warn!("{}: no scenarios found", path.display());
            }
        } else if path.is_file() {
            found.push(ScenarioSource::Spec(path.clone()));
        } else {
            return Err(std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"))
                .at(path);
        }
    }
    Ok(found)
}

fn evaluate(
    name: &str,
    spec: &ScenarioSpec,
    truth: &ScenarioTruth,
    estimator: &EstimatorSpec,
    cfg: &PipelineConfig,
    rtf_runs: usize,
) -> Result<MetricsReport, Failure> {
    let mut output = None;
    let mut failure = None;
    let duration = truth.len() as f64 / truth.sample_rate as f64;
    let timing = metrics::rtf(
        || {
            let run = build_estimator(estimator, cfg, Some(&truth.near))
                .and_then(|est| Pipeline::new(cfg.clone(), est))
                .and_then(|mut p| p.process_signal(&truth.mic, &truth.farend));
            match run {
                Ok(r) if output.is_none() => output = Some(r.output),
                Ok(_) => {}
                Err(e) => {
                    failure.get_or_insert(e);
                }
            }
        },
        duration,
        rtf_runs,
    )?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    let output = output.expect("at least one run completed");
    let sr = truth.sample_rate;
    let has_near = spec.kind != ScenarioKind::FarEndSingleTalk;
    let (erle_series_db, erle_db) = if has_near {
        (Vec::new(), None)
    } else {
        let series = metrics::erle(&truth.mic, &output, ERLE_BLOCK_S, sr)?;
        let mean = metrics::mean(&series);
        (series, Some(mean))
    };
    let report = MetricsReport {
        scenario: name.to_string(),
        estimator: estimator.to_string(),
        erle_series_db,
        erle_db,
        si_sdr_db: has_near.then(|| metrics::si_sdr(&output, &truth.near)).transpose()?,
        seg_snr_db: has_near.then(|| metrics::seg_snr(&output, &truth.near, sr)).transpose()?,
        rtf: timing.median,
    };
    debug!(
        "{name}/{estimator}: RTF median {:.4} (min {:.4}, max {:.4}, {} runs)",
        timing.median, timing.min, timing.max, timing.runs
    );
    Ok(report)
}

pub fn eval(args: &EvalArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config)?;
    let estimators = EstimatorSpec::parse_list(&args.estimators)?;
    if estimators.is_empty() {
        return Err(Failure::config("no estimators given"));
    }
    // fail on unusable estimators before any scenario runs
    for est in &estimators {
        build_estimator(est, &cfg, Some(&[]))?;
    }
    let sources = discover(&args.scenarios)?;
    info!("{} scenarios x {} estimators", sources.len(), estimators.len());
    let mut rows = Vec::with_capacity(sources.len() * estimators.len());
    for source in &sources {
        let (spec, truth) = source.load()?;
        let name = source.name();
        for est in &estimators {
            let row = evaluate(&name, &spec, &truth, est, &cfg, args.rtf_runs)?;
            info!("{}", row.csv_fields().join(" "));
            rows.push(row);
        }
    }
    write_report(&args.report, &rows)?;
    info!("wrote {}", args.report.display());
    Ok(())
}

pub fn init_weights(args: &InitWeightsArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config)?;
    let geometry = NeuralGeometry::for_layout(&cfg.layout()?);
    let weights = NeuralWeights::random(geometry, args.seed)?;
    weights.save(&args.out).at(&args.out)?;
    info!(
        "wrote {} parameters for features ({}, {}) over {} bins to {}",
        weights.parameter_count(),
        geometry.rows,
        geometry.cols,
        geometry.bins,
        args.out.display()
    );
    Ok(())
}

pub fn print_config(args: &ConfigArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config)?;
    print!("{}", cfg.to_toml_string());
    Ok(())
}
