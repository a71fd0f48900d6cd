#![allow(dead_code)]

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use socialsense::gateway::{Gateway, GatewayConfig, WallClock};
use socialsense::pipeline::{quick_fsd, replay, ReplayRun, ScenarioData};
use socialsense::server::{serve, AppState};
use socialsense_core::audiofrontend::SyntheticProvider;
use socialsense_core::detector::DetectorConfig;
use socialsense_core::sensorstream::{PlantedInteraction, SyntheticScenario};
use socialsense_core::{Millis, HOUR_MS, MINUTE_MS};

pub const DIM: usize = 16;
/// 09:00 on day 0.
pub const NINE: Millis = 9 * HOUR_MS;

pub fn hm(h: u64, m: u64) -> Millis {
    h * HOUR_MS + m * MINUTE_MS
}

pub fn planted(start: Millis, end: Millis) -> PlantedInteraction {
    serde_json::from_value(serde_json::json!({
        "start_ms": start, "end_ms": end, "cue_rate": 1.0, "fg_rate": 0.5
    }))
    .unwrap()
}

/// Three hours from 09:00 with interactions at 09:10, 09:40, and 10:20.
pub fn morning() -> SyntheticScenario {
    let mut s = SyntheticScenario::new(3 * HOUR_MS, 11);
    s.epoch_ms = NINE;
    s.interactions = vec![planted(hm(9, 10), hm(9, 16)), planted(hm(9, 40), hm(9, 46)), planted(hm(10, 20), hm(10, 26))];
    s
}

pub fn replay_run(spec: SyntheticScenario) -> (ScenarioData, ReplayRun) {
    let (data, _) = ScenarioData::generate(spec).unwrap();
    let provider = SyntheticProvider::new(DIM, data.spec.seed).unwrap();
    let mut fsd = quick_fsd(&provider, data.spec.seed).unwrap();
    let run = replay(&data.probes().unwrap(), &provider, &data.vocab, &mut fsd, &DetectorConfig::default()).unwrap();
    (data, run)
}

pub fn open_gateway(dir: &Path, data: &ScenarioData, run: &ReplayRun, wall: WallClock) -> Gateway {
    Gateway::open(dir, run, data.session(), data.spec.duty_cycle, &GatewayConfig::default(), wall).unwrap()
}

pub struct TestServer {
    pub url: String,
    pub wall: Arc<AtomicU64>,
    pub dir: tempfile::TempDir,
    pub run: ReplayRun,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
}

impl TestServer {
    pub async fn start(spec: SyntheticScenario) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let (data, run) = replay_run(spec);
        let (wall, cell) = WallClock::manual(1_000_000);
        let gw = open_gateway(dir.path(), &data, &run, wall);
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = tokio::sync::oneshot::channel();
        tokio::spawn(serve(listener, AppState::new(gw), async move {
            let _ = rx.await;
        }));
        Self { url, wall: cell, dir, run, stop: Some(tx) }
    }

    /// Moves the manual wall clock forward.
    pub fn tick(&self, ms: u64) {
        self.wall.fetch_add(ms, Ordering::SeqCst);
    }

    pub fn api(&self, path: &str) -> String {
        format!("{}{}", self.url, path)
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
    }
}

/// Drives the real binary.
pub mod cli {
    use std::collections::BTreeSet;
    use std::fs;
    use std::io::{BufRead, BufReader};
    use std::path::{Path, PathBuf};
    use std::process::{Child, Command, Stdio};
    use std::time::{Duration, Instant};

    use reqwest::Client;
    use serde_json::{json, Value};
    use socialsense::server::PromptList;
    use socialsense_core::gateway::ClockState;

    pub const BIN: &str = env!("CARGO_BIN_EXE_socialsense");

    pub fn two_interaction_spec() -> Value {
        json!({
            "epoch_ms": 32_400_000u64, "duration_ms": 7_200_000u64, "seed": 7,
            "interactions": [
                {"start_ms": 33_000_000u64, "end_ms": 33_400_000u64, "cue_rate": 1.0, "fg_rate": 0.5},
                {"start_ms": 36_000_000u64, "end_ms": 36_300_000u64, "cue_rate": 1.0, "fg_rate": 0.5}
            ]
        })
    }

    pub struct Server {
        child: Child,
        pub url: String,
    }

    impl Server {
        pub fn start(scenario: &Path, data: &Path) -> Self {
            let mut child = Command::new(BIN)
                .args(["serve", "--port", "0", "--dim", "16", "--speed", "100000", "--play"])
                .arg("--replay")
                .arg(scenario)
                .arg("--data")
                .arg(data)
                .env("RUST_LOG", "warn")
                .stdout(Stdio::piped())
                .stderr(Stdio::null())
                .spawn()
                .unwrap();
            let mut line = String::new();
            BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
            let url = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("unexpected banner {line:?}")).to_owned();
            Self { child, url }
        }

        pub fn api(&self, path: &str) -> String {
            format!("{}{}", self.url, path)
        }

        pub fn kill(mut self) {
            self.child.kill().unwrap();
            self.child.wait().unwrap();
        }
    }

    impl Drop for Server {
        fn drop(&mut self) {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }

    pub async fn clock(c: &Client, s: &Server) -> ClockState {
        c.get(s.api("/api/replay/clock")).send().await.unwrap().json().await.unwrap()
    }

    pub async fn prompts(c: &Client, s: &Server) -> PromptList {
        c.get(s.api("/api/prompts")).send().await.unwrap().json().await.unwrap()
    }

    pub async fn run_to_end(c: &Client, s: &Server) {
        let deadline = Instant::now() + Duration::from_secs(30);
        loop {
            let st = clock(c, s).await;
            if st.now_ms >= st.session_end {
                return;
            }
            assert!(Instant::now() < deadline, "clock stuck at {}", st.now_ms);
            tokio::time::sleep(Duration::from_millis(50)).await;
        }
    }

    pub fn synth(dir: &Path, spec: &Value) -> PathBuf {
        let spec_path = dir.join("spec.json");
        fs::write(&spec_path, spec.to_string()).unwrap();
        let scen = dir.join("scenario");
        let out = Command::new(BIN).args(["synth", "--spec"]).arg(&spec_path).arg("--out").arg(&scen).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        scen
    }

    /// Every file under `d`, canonicalized.
    pub fn files_under(d: &Path) -> BTreeSet<PathBuf> {
        walk(d).into_iter().map(|p| fs::canonicalize(p).unwrap()).collect()
    }

    fn walk(d: &Path) -> Vec<PathBuf> {
        let mut out = Vec::new();
        if let Ok(rd) = fs::read_dir(d) {
            for e in rd.flatten() {
                let p = e.path();
                if p.is_dir() { out.extend(walk(&p)) } else { out.push(p) }
            }
        }
        out
    }
}
