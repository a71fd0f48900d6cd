use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use socialsense::checkpoint::{load_fsd, load_fusion, read_checkpoint, save_fsd, save_fusion};
use socialsense::gateway::{Gateway, GatewayConfig, WallClock};
use socialsense::io::{read_json, read_jsonl, read_segment_log, write_json, write_jsonl, write_segment_log};
use socialsense::pipeline::{export_sensor_images, quick_fsd, replay, ScenarioData};
use socialsense::report::{detection_outcomes, write_deployment, write_metrics};
use socialsense::server::{serve, AppState};
use socialsense::store::{load_annotations, store_dirs, FeatureStore};
use socialsense_core::audiofrontend::{EmbeddingProvider, SyntheticProvider};
use socialsense_core::detector::DetectorConfig;
use socialsense_core::evaluation::{compute_metrics, deployment_report};
use socialsense_core::fsd::{
    evaluate_protocol, make_fold_plan, synthetic_dataset, FrameClassifierConfig, FsdInstance, FsdModel,
};
use socialsense_core::gateway::ReplayCommand;
use socialsense_core::meta::MetaAlgorithm;
use socialsense_core::multimodal::{
    cross_validate, lopocv_plan, participant_counts, train_fusion, Ablation, FeatureRates, FusionConfig,
    FusionTrainConfig, Modality, MultimodalSample, SyntheticFusionSpec,
};
use socialsense_core::multimodal::synthetic_fusion_dataset;
use socialsense_core::sensorstream::SyntheticScenario;

#[derive(Debug, Parser)]
#[command(name = "socialsense", version, about = "Duty-cycled social interaction sensing: replay, training, evaluation, and the annotation gateway")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic scenario into stream files.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the spec.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the detector over a scenario and write the segment log.
    Replay {
        #[command(flatten)]
        src: ReplaySource,
        #[arg(long)]
        out: PathBuf,
        /// Per-probe log with cue/foreground counts and latency.
        #[arg(long)]
        probe_log: Option<PathBuf>,
    },
    /// Write sensor spectrogram images for every on-body probe.
    Features {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "accel,gravity,light,ppg", value_parser = parse_modalities)]
        modalities: Vec<Modality>,
    },
    /// Train the foreground speech detector.
    TrainFsd {
        /// JSONL of labeled instances; synthetic clusters when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 2_000)]
        instances: usize,
        #[arg(long, default_value = "nearest-centroid", value_parser = parse_meta)]
        meta: MetaAlgorithm,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also run the 10-fold swap protocol and write its report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train the multimodal fusion model with leave-one-participant-out CV.
    TrainMm {
        #[arg(long, default_value = "accel,audio", value_parser = parse_modalities)]
        modalities: Vec<Modality>,
        #[arg(long, default_value = "lopocv")]
        plan: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Feature store with `samples.jsonl`; synthetic data when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "mm-out")]
        out: PathBuf,
        #[arg(long, default_value = "whole", value_parser = parse_ablation)]
        ablation: Ablation,
        #[arg(long, value_delimiter = ',')]
        widths: Option<Vec<usize>>,
        #[arg(long)]
        stem_stride: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score a checkpoint, or summarize a deployment from its logs.
    Evaluate {
        #[arg(long, conflicts_with_all = ["segments", "annotations"])]
        checkpoint: Option<PathBuf>,
        /// Feature store (fusion) or instance JSONL (FSD); synthetic when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, requires = "annotations")]
        segments: Option<PathBuf>,
        /// Annotation directory (`<data>/annotations`).
        #[arg(long, requires = "segments")]
        annotations: Option<PathBuf>,
        #[arg(long, default_value = "P01")]
        participant: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the annotation gateway over a replayed scenario.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long)]
        replay: PathBuf,
        /// Data root holding `annotations/` and `features/`.
        #[arg(long, default_value = "data")]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Gateway settings (policy, rating scale, seed).
        #[arg(long)]
        gateway: Option<PathBuf>,
        #[arg(long)]
        fsd: Option<PathBuf>,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Start the clock immediately.
        #[arg(long)]
        play: bool,
    },
}

#[derive(Debug, Args)]
struct ReplaySource {
    #[arg(long)]
    scenario: PathBuf,
    /// Detector thresholds; defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// FSD checkpoint; a quick synthetic model is trained when omitted.
    #[arg(long)]
    fsd: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    dim: usize,
}

fn parse_modalities(s: &str) -> Result<Vec<Modality>, String> {
    s.split(',').map(|m| Modality::parse(m.trim()).ok_or_else(|| format!("unknown modality `{m}`"))).collect()
}

fn parse_meta(s: &str) -> Result<MetaAlgorithm, String> {
    MetaAlgorithm::parse(s).ok_or_else(|| format!("unknown meta-learner `{s}`"))
}

fn parse_ablation(s: &str) -> Result<Ablation, String> {
    Ablation::parse(s).ok_or_else(|| format!("unknown ablation `{s}`"))
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Synth { spec, out, seed } => synth(&spec, &out, seed),
        Command::Replay { src, out, probe_log } => {
            let (data, run) = run_replay(&src)?;
            write_segment_log(&out, &run.output.segments)?;
            if let Some(p) = probe_log {
                write_jsonl(&p, &run.output.log)?;
            }
            println!("{} probes, {} segments -> {}", data.probes()?.len(), run.output.segments.len(), out.display());
            Ok(())
        }
        Command::Features { scenario, out, modalities } => {
            let data = ScenarioData::load(&scenario)?;
            let store = FeatureStore::open(&out)?;
            let n = export_sensor_images(&store, &data.probes()?, &modalities, &FeatureRates::default())?;
            println!("{n} images -> {}", out.display());
            Ok(())
        }
        Command::TrainFsd { data, out, dim, instances, meta, seed, report } => {
            train_fsd(data.as_deref(), &out, dim, instances, meta, seed, report.as_deref())
        }
        Command::TrainMm { modalities, plan, seed, data, out, ablation, widths, stem_stride, epochs } => {
            if plan != "lopocv" {
                bail!("unsupported plan `{plan}` (only lopocv)");
            }
            let mut cfg = FusionTrainConfig {
                model: FusionConfig { modalities: modalities.clone(), ablation, ..FusionConfig::default() },
                seed,
                ..FusionTrainConfig::default()
            };
            if let Some(w) = widths {
                cfg.model.widths = w;
            }
            if let Some(s) = stem_stride {
                cfg.model.stem_stride = s;
            }
            if let Some(e) = epochs {
                cfg.max_epochs = e;
            }
            train_mm(&mm_samples(data.as_deref(), &modalities, seed)?, &cfg, &out)
        }
        Command::Evaluate { checkpoint, data, seed, segments, annotations, participant, out } => match checkpoint {
            Some(ckpt) => evaluate_checkpoint(&ckpt, data.as_deref(), seed, &out),
            None => {
                let (Some(segments), Some(annotations)) = (segments, annotations) else {
                    bail!("pass --checkpoint, or both --segments and --annotations");
                };
                let state = load_annotations(&annotations)?;
                let (outcomes, confirmed) = detection_outcomes(&participant, &read_segment_log(&segments)?, &state);
                let report = deployment_report(&outcomes, &confirmed);
                write_deployment(&out, &report)?;
                println!("{} detections, overall accuracy {:?} -> {}", outcomes.len(), report.overall_accuracy, out.display());
                Ok(())
            }
        },
        Command::Serve { port, bind, replay: scenario, data, config, gateway, fsd, dim, speed, play } => {
            let src = ReplaySource { scenario, config, fsd, dim };
            let gw_cfg: GatewayConfig = match gateway {
                Some(p) => read_json(&p)?,
                None => GatewayConfig::default(),
            };
            serve_cmd(&src, &bind, port, &data, &gw_cfg, speed, play)
        }
    }
}

fn synth(spec_path: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut spec: SyntheticScenario = read_json(spec_path)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let (data, generated) = ScenarioData::generate(spec)?;
    data.save(out)?;
    println!(
        "{} probes, {} recorded seconds -> {}",
        generated.probes.len(),
        generated.slots.len(),
        out.display()
    );
    Ok(())
}

fn run_replay(src: &ReplaySource) -> Result<(ScenarioData, socialsense::pipeline::ReplayRun)> {
    let data = ScenarioData::load(&src.scenario).with_context(|| format!("loading {}", src.scenario.display()))?;
    let cfg: DetectorConfig = match &src.config {
        Some(p) => read_json(p)?,
        None => DetectorConfig::default(),
    };
    let provider = SyntheticProvider::new(src.dim, data.spec.seed)?;
    let mut fsd = match &src.fsd {
        Some(p) => load_fsd(p)?,
        None => quick_fsd(&provider, data.spec.seed)?,
    };
    if fsd.classifier.dim != provider.dim() {
        bail!("FSD expects {}-d embeddings, provider has {}", fsd.classifier.dim, provider.dim());
    }
    let run = replay(&data.probes()?, &provider, &data.vocab, &mut fsd, &cfg)?;
    Ok((data, run))
}

fn fsd_data(data: Option<&Path>, dim: usize, n: usize, seed: u64) -> Result<Vec<FsdInstance>> {
    Ok(match data {
        Some(p) => read_jsonl(p)?,
        None => synthetic_dataset(&SyntheticProvider::new(dim, seed)?, n, 0.5, seed)?,
    })
}

fn train_fsd(
    data: Option<&Path>,
    out: &Path,
    dim: usize,
    n: usize,
    meta: MetaAlgorithm,
    seed: u64,
    report: Option<&Path>,
) -> Result<()> {
    let data = fsd_data(data, dim, n, seed)?;
    let cfg = FrameClassifierConfig { seed, ..FrameClassifierConfig::default() };
    if let Some(dir) = report {
        let labels: Vec<bool> = data.iter().map(|i| i.label.is_foreground()).collect();
        let plan = make_fold_plan(&labels, seed)?;
        let eval = evaluate_protocol(&data, &plan, &cfg, meta)?;
        write_json(&dir.join("fsd-protocol.json"), &eval)?;
        write_metrics(dir, "fsd-metrics", &eval.metrics)?;
        println!("swap protocol balanced accuracy {:.2}", eval.metrics.balanced_accuracy);
    }
    let (train, val): (Vec<(usize, &FsdInstance)>, Vec<(usize, &FsdInstance)>) =
        data.iter().enumerate().partition(|(i, _)| i % 10 != 0);
    let train: Vec<&FsdInstance> = train.into_iter().map(|(_, x)| x).collect();
    let val: Vec<&FsdInstance> = val.into_iter().map(|(_, x)| x).collect();
    let mut model = FsdModel::train(&train, &val, &cfg, meta)?;
    save_fsd(out, &mut model, seed)?;
    println!("FSD checkpoint -> {}", out.display());
    Ok(())
}

fn mm_samples(data: Option<&Path>, modalities: &[Modality], seed: u64) -> Result<Vec<MultimodalSample>> {
    Ok(match data {
        Some(p) => FeatureStore::open(p)?.read_samples(modalities)?,
        None => synthetic_fusion_dataset(&SyntheticFusionSpec { modalities: modalities.to_vec(), seed, ..Default::default() })?,
    })
}

fn train_mm(samples: &[MultimodalSample], cfg: &FusionTrainConfig, out: &Path) -> Result<()> {
    let plan = lopocv_plan(&participant_counts(samples))?;
    let held_out = cross_validate(samples, &plan, cfg)?;
    let preds: Vec<bool> = held_out.iter().map(|h| h.probability >= 0.5).collect();
    let labels: Vec<bool> = held_out.iter().map(|h| h.interaction).collect();
    let metrics = compute_metrics(&preds, &labels)?;
    write_json(&out.join("plan.json"), &plan)?;
    write_jsonl(&out.join("held-out.jsonl"), &held_out)?;
    write_metrics(out, "lopocv-metrics", &metrics)?;
    // Deployable model: everyone trains except the first iteration's
    // validation pair, which drives early stopping.
    let val_ids = &plan.iterations[0].validation;
    let (val, train): (Vec<&MultimodalSample>, Vec<&MultimodalSample>) =
        samples.iter().partition(|s| val_ids.contains(&s.participant));
    let mut model = train_fusion(&train, &val, cfg)?;
    let ckpt = out.join("fusion.ssck");
    save_fusion(&ckpt, &mut model, cfg.seed)?;
    println!(
        "LOPOCV balanced accuracy {:.2} (sensitivity {:.2}); checkpoint -> {}",
        metrics.balanced_accuracy,
        metrics.sensitivity,
        ckpt.display()
    );
    Ok(())
}

fn evaluate_checkpoint(ckpt: &Path, data: Option<&Path>, seed: u64, out: &Path) -> Result<()> {
    let (header, _) = read_checkpoint(ckpt)?;
    let metrics = match header.kind.as_str() {
        "fsd" => {
            let mut model = load_fsd(ckpt)?;
            let data = fsd_data(data, model.classifier.dim, 2_000, seed)?;
            let mut preds = Vec::with_capacity(data.len());
            for inst in &data {
                preds.push(model.classify(&inst.embedding_frame1, &inst.embedding_frame2)?.is_foreground());
            }
            let labels: Vec<bool> = data.iter().map(|i| i.label.is_foreground()).collect();
            compute_metrics(&preds, &labels)?
        }
        "fusion" => {
            let mut model = load_fusion(ckpt)?;
            let samples = mm_samples(data, &model.config.modalities.clone(), seed)?;
            let refs: Vec<&MultimodalSample> = samples.iter().collect();
            let probs = model.predict_batch(&refs)?;
            let preds: Vec<bool> = probs.iter().map(|&p| p >= 0.5).collect();
            let labels: Vec<bool> = samples.iter().map(|s| s.interaction).collect();
            compute_metrics(&preds, &labels)?
        }
        other => bail!("unknown checkpoint kind `{other}`"),
    };
    write_metrics(out, "metrics", &metrics)?;
    println!("balanced accuracy {:.2} over {} samples -> {}", metrics.balanced_accuracy, metrics.n_samples, out.display());
    Ok(())
}

fn serve_cmd(
    src: &ReplaySource,
    bind: &str,
    port: u16,
    data_dir: &Path,
    gw_cfg: &GatewayConfig,
    speed: f64,
    play: bool,
) -> Result<()> {
    let (data, run) = run_replay(src)?;
    let (ann, feat) = store_dirs(data_dir);
    tracing::info!(annotations = %ann.display(), features = %feat.display(), segments = run.segments.len(), "replay ready");
    let mut gateway =
        Gateway::open(data_dir, &run, data.session(), data.spec.duty_cycle, gw_cfg, WallClock::System)?;
    if speed != 1.0 {
        gateway.control(ReplayCommand::SetSpeed { speed })?;
    }
    if play {
        gateway.control(ReplayCommand::Play)?;
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let addr: SocketAddr = format!("{bind}:{port}").parse().context("bind address")?;
        let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
        // tests and scripts read the bound port from this line
        println!("listening on http://{}", listener.local_addr()?);
        use std::io::Write;
        std::io::stdout().flush()?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        serve(listener, AppState::new(gateway), shutdown).await?;
        Ok(())
    })
}
