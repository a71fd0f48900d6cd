mod common;

use std::fs;
use std::io::Write;

use common::*;
use socialsense::checkpoint::{load_fsd, load_fusion, read_checkpoint, save_fsd, save_fusion, write_checkpoint, CheckpointHeader};
use socialsense::io::*;
use socialsense::pipeline::{export_sensor_images, ScenarioData};
use socialsense::store::{load_annotations, AnnotationStore, FeatureStore};
use socialsense::Error;
use socialsense_core::audiofrontend::{EmbeddingProvider, SyntheticProvider};
use socialsense_core::detector::{InteractionSegment, Provenance};
use socialsense_core::dsp::{Matrix, SpectrogramImage, IMAGE_SIZE};
use socialsense_core::fsd::{synthetic_dataset, FrameClassifierConfig, FsdInstance, FsdModel};
use socialsense_core::gateway::{InteractionMutation, PromptEvent, PromptKind, StoreEvent};
use socialsense_core::meta::MetaAlgorithm;
use socialsense_core::multimodal::{
    synthetic_fusion_dataset, FeatureRates, FusionConfig, FusionModel, Modality, SyntheticFusionSpec,
};
use socialsense_core::sensorstream::{InteractionMode, Interval, SensorKind};

#[test]
fn streams_roundtrip_and_fill_identical_probes() {
    let dir = tempfile::tempdir().unwrap();
    let (data, generated) = ScenarioData::generate(morning()).unwrap();
    data.save(dir.path()).unwrap();
    let back = ScenarioData::load(dir.path()).unwrap();
    assert_eq!(back.spec, data.spec);
    for kind in SensorKind::ALL {
        let (a, b) = (data.streams.stream(kind), back.streams.stream(kind));
        assert_eq!(a.len(), b.len(), "{kind:?}");
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.t_ms, y.t_ms);
            assert_eq!(x.values, y.values, "JSON floats round-trip exactly");
        }
    }
    let probes = back.probes().unwrap();
    assert_eq!(probes.len(), generated.probes.len());
    assert!(probes.iter().all(|p| p.on_body));
}

#[test]
fn spgm_roundtrip_is_f32_exact() {
    let dir = tempfile::tempdir().unwrap();
    let m = Matrix { rows: 3, cols: 4, data: (0..12).map(|i| i as f64 / 7.0).collect() };
    let path = dir.path().join("x/y.spgm");
    write_spgm(&path, &m).unwrap();
    let back = read_spgm(&path).unwrap();
    assert_eq!((back.rows, back.cols), (3, 4));
    for (a, b) in m.data.iter().zip(&back.data) {
        assert_eq!(*a as f32 as f64, *b);
    }
    fs::write(&path, b"nope").unwrap();
    assert!(matches!(read_spgm(&path), Err(Error::Core(_))));
}

#[test]
fn embeddings_dir_serves_stored_frames() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = ScenarioData::generate(morning()).unwrap();
    let probes = data.probes().unwrap();
    let provider = SyntheticProvider::new(DIM, 1).unwrap();
    for p in &probes[..3] {
        write_embeddings(&embeddings_path(dir.path(), p.index), &provider.embed_probe(p).unwrap()).unwrap();
    }
    fs::write(dir.path().join("README"), "ignored").unwrap();
    let pre = read_embeddings_dir(dir.path(), DIM).unwrap();
    assert_eq!(pre.len(), 3);
    let a = provider.embed_probe(&probes[1]).unwrap();
    let b = pre.embed_probe(&probes[1]).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.scores.as_slice().len(), y.scores.as_slice().len());
        for (u, v) in x.embedding.0.iter().zip(&y.embedding.0) {
            assert!((u - v).abs() < 1e-6);
        }
    }
    assert!(pre.embed_probe(&probes[5]).is_err());
}

#[test]
fn segment_log_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let segs = vec![InteractionSegment {
        start_ms: 12_000_000,
        end_ms: 12_285_000,
        fs_fraction: 0.15,
        probes: 4,
        provenance: Provenance::Auto,
        mode: InteractionMode::Unknown,
    }];
    let path = dir.path().join("segments.jsonl");
    write_segment_log(&path, &segs).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let keys: Vec<String> = serde_json::from_str::<serde_json::Map<String, serde_json::Value>>(text.trim())
        .unwrap()
        .keys()
        .cloned()
        .collect();
    assert_eq!(keys, ["end_ms", "fs_fraction", "probes", "provenance", "start_ms"]);
    let back = read_segment_log(&path).unwrap();
    assert_eq!(back, vec![SegmentRecord::from(&segs[0])]);
}

#[test]
fn jsonl_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    fs::write(&path, "{\"start_ms\":1,\"end_ms\":2}\n\nnot json\n").unwrap();
    match read_jsonl::<Interval>(&path) {
        Err(Error::Json { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

fn small_fsd(seed: u64) -> FsdModel {
    let p = SyntheticProvider::new(8, seed).unwrap();
    let data = synthetic_dataset(&p, 200, 0.5, seed).unwrap();
    let refs: Vec<&FsdInstance> = data.iter().collect();
    let cfg = FrameClassifierConfig { hidden: vec![8], max_epochs: 3, seed, ..Default::default() };
    FsdModel::train(&refs[..160], &refs[160..], &cfg, MetaAlgorithm::Logistic).unwrap()
}

#[test]
fn fsd_checkpoint_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fsd.ssck");
    let mut model = small_fsd(5);
    save_fsd(&path, &mut model, 5).unwrap();
    let (header, tensors) = read_checkpoint(&path).unwrap();
    assert_eq!(header.kind, "fsd");
    assert_eq!(header.algorithm.as_deref(), Some("logistic"));
    assert_eq!(header.shapes, tensors.iter().map(Vec::len).collect::<Vec<_>>());
    let mut back = load_fsd(&path).unwrap();
    assert_eq!(back.meta, model.meta);
    let x: Vec<f64> = (0..8).map(|i| i as f64 * 0.3 - 1.0).collect();
    let (a, b) = (model.classifier.predict(&x).unwrap(), back.classifier.predict(&x).unwrap());
    assert!((a - b).abs() < 1e-5, "{a} vs {b}");
    for (t, u) in model.classifier.export().iter().zip(back.classifier.export()) {
        for (v, w) in t.iter().zip(u) {
            assert_eq!(*v as f32 as f64, w);
        }
    }
}

#[test]
fn fusion_checkpoint_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mm.ssck");
    let cfg = FusionConfig { widths: vec![2, 4], stem_stride: 4, dense: [8, 4], ..FusionConfig::default() };
    let mut model = FusionModel::new(&cfg, 3).unwrap();
    save_fusion(&path, &mut model, 3).unwrap();
    let mut back = load_fusion(&path).unwrap();
    assert_eq!(back.config, cfg);
    let sample = &synthetic_fusion_dataset(&SyntheticFusionSpec { participants: 1, samples_per_participant: 1, ..Default::default() })
        .unwrap()[0];
    let (a, b) = (model.predict(sample).unwrap(), back.predict(sample).unwrap());
    assert!((a - b).abs() < 1e-5);
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.ssck");
    let header = CheckpointHeader {
        kind: "fsd".into(),
        algorithm: None,
        seed: 0,
        epoch: None,
        shapes: vec![2, 3],
        config: serde_json::json!({}),
        extra: serde_json::Value::Null,
    };
    assert!(write_checkpoint(&path, &header, &[vec![0.0; 2]]).is_err());
    write_checkpoint(&path, &header, &[vec![0.5; 2], vec![1.0; 3]]).unwrap();
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
    assert!(matches!(read_checkpoint(&path), Err(Error::Format { .. })));
    fs::write(&path, b"XXXX").unwrap();
    assert!(read_checkpoint(&path).is_err());
    // a fusion loader refuses an FSD file
    write_checkpoint(&path, &header, &[vec![0.5; 2], vec![1.0; 3]]).unwrap();
    assert!(load_fusion(&path).is_err());
}

fn prompt(id: u64) -> PromptEvent {
    PromptEvent {
        id,
        kind: PromptKind::MissedInteractionQuery,
        interval: Interval::new(0, 1_000),
        issued_at: 1_000 * id,
        vibration_ms: 200,
        interaction_id: None,
    }
}

#[test]
fn annotation_store_replays_log_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = AnnotationStore::open(dir.path()).unwrap();
    store.snapshot_every = 3;
    for id in 1..=7 {
        store.commit(StoreEvent::PromptIssued(prompt(id))).unwrap();
    }
    let m = InteractionMutation { target: None, start_ms: 10, end_ms: 20, author: "p".into(), created_at: 5, mode: None };
    let ev = store.state().prepare_mutation(m).unwrap();
    store.commit(ev).unwrap();
    let expected = store.state().clone();
    assert!(dir.path().join("snapshot.json").exists());
    drop(store);

    let reopened = AnnotationStore::open(dir.path()).unwrap();
    assert_eq!(reopened.state(), &expected);
    assert_eq!(load_annotations(dir.path()).unwrap(), expected);
    // the log alone gives the same state
    fs::remove_file(dir.path().join("snapshot.json")).unwrap();
    assert_eq!(load_annotations(dir.path()).unwrap(), expected);
}

#[test]
fn torn_final_line_is_dropped_and_cut() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = AnnotationStore::open(dir.path()).unwrap();
    store.commit(StoreEvent::PromptIssued(prompt(1))).unwrap();
    store.commit(StoreEvent::PromptIssued(prompt(2))).unwrap();
    let log = store.log_path();
    drop(store);
    let good = fs::read(&log).unwrap();
    fs::OpenOptions::new().append(true).open(&log).unwrap().write_all(b"{\"event\":\"prompt-iss").unwrap();

    assert_eq!(load_annotations(dir.path()).unwrap().prompts.len(), 2, "read-only load tolerates the tear");
    assert!(fs::read(&log).unwrap().len() > good.len(), "read-only load leaves the file alone");
    let mut store = AnnotationStore::open(dir.path()).unwrap();
    assert_eq!(fs::read(&log).unwrap(), good);
    store.commit(StoreEvent::PromptIssued(prompt(3))).unwrap();
    drop(store);
    assert_eq!(load_annotations(dir.path()).unwrap().prompts.len(), 3);
}

#[test]
fn corrupt_middle_line_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let line = serde_json::to_string(&StoreEvent::PromptIssued(prompt(1))).unwrap();
    fs::write(dir.path().join("events.jsonl"), format!("{line}\ngarbage\n{line}\n")).unwrap();
    assert!(matches!(AnnotationStore::open(dir.path()), Err(Error::Json { line: 2, .. })));
}

#[test]
fn feature_store_samples_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let store = FeatureStore::open(dir.path()).unwrap();
    let spec = SyntheticFusionSpec { participants: 2, samples_per_participant: 3, ..Default::default() };
    let samples = synthetic_fusion_dataset(&spec).unwrap();
    store.write_samples(&samples).unwrap();
    let back = store.read_samples(&spec.modalities).unwrap();
    assert_eq!(back.len(), samples.len());
    for (a, b) in samples.iter().zip(&back) {
        assert_eq!((a.probe, &a.participant, a.interaction), (b.probe, &b.participant, b.interaction));
        for m in &spec.modalities {
            let (x, y) = (&a.images[m].pixels.data, &b.images[m].pixels.data);
            assert!(x.iter().zip(y).all(|(u, v)| (*u as f32 as f64) == *v));
        }
    }
    assert!(store.read_samples(&[Modality::Light]).is_err());
    let odd = SpectrogramImage::new(Matrix::zeros(IMAGE_SIZE, IMAGE_SIZE)).unwrap();
    store.put_image(99, Modality::Ppg, &odd).unwrap();
    write_spgm(&store.image_path(99, Modality::Ppg), &Matrix::zeros(3, 3)).unwrap();
    assert!(matches!(store.get_image(99, Modality::Ppg), Err(Error::Format { .. })));
}

#[test]
fn sensor_images_exported_for_on_body_probes() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = morning();
    spec.duration_ms = 10 * 90_000;
    spec.off_body = vec![Interval::new(NINE + 90_000, NINE + 3 * 90_000)];
    let (data, _) = ScenarioData::generate(spec).unwrap();
    let probes = data.probes().unwrap();
    let on = probes.iter().filter(|p| p.on_body).count();
    assert_eq!(on, 8);
    let store = FeatureStore::open(dir.path()).unwrap();
    let mods = [Modality::Accel, Modality::Light];
    let n = export_sensor_images(&store, &probes, &[Modality::Accel, Modality::Audio, Modality::Light], &FeatureRates::default()).unwrap();
    assert_eq!(n, on * mods.len());
    let img = store.get_image(0, Modality::Accel).unwrap();
    assert_eq!((img.pixels.rows, img.pixels.cols), (IMAGE_SIZE, IMAGE_SIZE));
    assert!(!store.image_path(1, Modality::Accel).exists());
}
