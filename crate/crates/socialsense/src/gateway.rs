//! The annotation service behind the HTTP API: a replay clock driving the
//! prompt timeline, with every scheduler output and participant input
//! persisted to the annotation store before it becomes visible.
//!
//! Detected segments are recorded lazily. A segment is written to the store
//! right before the first prompt (or suppression) that refers to it, so the
//! store never shows a segment before its virtual closing time.
//!
//! The timeline position is kept in `session.jsonl` (seeks, and advances
//! that produced output). On restart the scheduler is rebuilt from its seed
//! and the ops are replayed; outputs already in the store are skipped, which
//! also repairs a crash between the op write and the event writes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use socialsense_core::detector::InteractionSegment;
use socialsense_core::gateway::{
    AnnotationRecord, AnnotationState, ClockState, FollowUps, InteractionMutation, NotificationPolicy, PromptEvent,
    PromptScheduler, PromptTimeline, RatingScale, ReplayClock, ReplayCommand, Response, SchedulerOutput,
    StoreEvent, StoredInteraction,
};
use socialsense_core::sensorstream::{DutyCycleConfig, InteractionMode, Interval};
use socialsense_core::Millis;

use crate::error::{IoContext, Result};
use crate::pipeline::ReplayRun;
use crate::store::{open_append, read_log, store_dirs, AnnotationStore, FeatureStore};

const SESSION_FILE: &str = "session.jsonl";

/// Source of wall-clock milliseconds for the replay clock.
#[derive(Debug, Clone)]
pub enum WallClock {
    System,
    Manual(Arc<AtomicU64>),
}

impl WallClock {
    pub fn manual(start: u64) -> (Self, Arc<AtomicU64>) {
        let cell = Arc::new(AtomicU64::new(start));
        (WallClock::Manual(cell.clone()), cell)
    }

    pub fn now(&self) -> u64 {
        match self {
            WallClock::System => SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64),
            WallClock::Manual(c) => c.load(Ordering::SeqCst),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub policy: NotificationPolicy,
    pub rating_scale: RatingScale,
    pub seed: u64,
    pub snapshot_every: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self { policy: NotificationPolicy::default(), rating_scale: RatingScale::default(), seed: 0, snapshot_every: 256 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
enum SessionOp {
    Advance { to: Millis },
    Seek { to: Millis },
    Clock { at: Millis, playing: bool, speed: f64 },
}

/// Something readers may want to hear about.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Notification {
    Prompt(PromptEvent),
    Response(AnnotationRecord),
    Interaction(StoredInteraction),
}

/// A prompt with its latest answer, as served to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptView {
    #[serde(flatten)]
    pub prompt: PromptEvent,
    pub response: Option<AnnotationRecord>,
}

/// Response body without the prompt id, which comes from the path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSubmission {
    pub answer: Response,
    #[serde(default)]
    pub follow_ups: Option<FollowUps>,
    #[serde(default)]
    pub submitted_at: Option<Millis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSubmission {
    pub start_ms: Millis,
    pub end_ms: Millis,
    #[serde(default)]
    pub author: String,
    #[serde(default)]
    pub mode: Option<InteractionMode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeSlot {
    pub start: Millis,
    pub end: Millis,
    pub on_body: bool,
}

#[derive(Debug)]
pub struct Gateway {
    store: AnnotationStore,
    features: FeatureStore,
    clock: ReplayClock,
    wall: WallClock,
    timeline: PromptTimeline,
    segments: BTreeMap<u64, InteractionSegment>,
    probes: Vec<ProbeSlot>,
    reserved_ids: u64,
    advanced_to: Option<Millis>,
    session_path: PathBuf,
    session_log: File,
    scale: RatingScale,
    outbox: Vec<Notification>,
}

impl Gateway {
    /// Opens (or resumes) a replay session under `data_dir`.
    pub fn open(
        data_dir: &Path,
        run: &ReplayRun,
        session: Interval,
        duty_cycle: DutyCycleConfig,
        cfg: &GatewayConfig,
        wall: WallClock,
    ) -> Result<Self> {
        let (ann_dir, feat_dir) = store_dirs(data_dir);
        let mut store = AnnotationStore::open(&ann_dir)?;
        store.snapshot_every = cfg.snapshot_every;
        let features = FeatureStore::open(&feat_dir)?;
        let scheduler = PromptScheduler::new(cfg.policy, session.start_ms, cfg.seed);
        let timeline = PromptTimeline::from_replay(&run.probe_starts, &run.closures, scheduler);
        let session_path = ann_dir.join(SESSION_FILE);
        let (ops, good_len) = read_log::<SessionOp>(&session_path)?;
        let session_log = open_append(&session_path, good_len)?;
        let probes = run
            .probe_starts
            .iter()
            .map(|&(start, on_body)| ProbeSlot { start, end: start + duty_cycle.window_ms, on_body })
            .collect();
        let mut gw = Self {
            store,
            features,
            clock: ReplayClock::new(session.start_ms, session.end_ms, duty_cycle, wall.now()),
            wall,
            timeline,
            segments: run.segments.clone(),
            probes,
            reserved_ids: run.segments.keys().next_back().copied().unwrap_or(0),
            advanced_to: None,
            session_path,
            session_log,
            scale: cfg.rating_scale,
            outbox: Vec::new(),
        };
        gw.resume(&ops)?;
        Ok(gw)
    }

    fn resume(&mut self, ops: &[SessionOp]) -> Result<()> {
        let mut position = None;
        let mut clock = None;
        for op in ops {
            match *op {
                SessionOp::Advance { to } => {
                    let out = self.timeline.advance(to);
                    self.persist(out)?;
                    self.advanced_to = Some(to);
                    position = Some(to);
                }
                SessionOp::Seek { to } => {
                    let out = self.timeline.seek(to);
                    self.persist(out)?;
                    self.advanced_to = to.checked_sub(1);
                    position = Some(to);
                }
                SessionOp::Clock { at, playing, speed } => {
                    clock = Some((playing, speed));
                    position = Some(at);
                }
            }
        }
        self.outbox.clear();
        let wall = self.wall.now();
        if let Some(to) = position {
            self.clock.apply(ReplayCommand::Seek { to_ms: to }, wall)?;
        }
        if let Some((playing, speed)) = clock {
            self.clock.apply(ReplayCommand::SetSpeed { speed }, wall)?;
            if playing {
                self.clock.apply(ReplayCommand::Play, wall)?;
            }
        }
        Ok(())
    }

    fn log_op(&mut self, op: SessionOp) -> Result<()> {
        let mut line = serde_json::to_vec(&op).expect("session ops serialize");
        line.push(b'\n');
        self.session_log.write_all(&line).at(&self.session_path)?;
        self.session_log.sync_data().at(&self.session_path)
    }

    fn ensure_segment(&mut self, id: u64) -> Result<()> {
        if self.store.state().interactions.contains_key(&id) {
            return Ok(());
        }
        if let Some(seg) = self.segments.get(&id) {
            self.store.commit(StoreEvent::SegmentRecorded { id, segment: seg.clone() })?;
        }
        Ok(())
    }

    fn persist(&mut self, outputs: Vec<SchedulerOutput>) -> Result<()> {
        for o in outputs {
            match o {
                SchedulerOutput::Issued(p) => {
                    if let Some(id) = p.interaction_id {
                        self.ensure_segment(id)?;
                    }
                    if !self.store.state().prompts.contains_key(&p.id) {
                        self.store.commit(StoreEvent::PromptIssued(p.clone()))?;
                        self.outbox.push(Notification::Prompt(p));
                    }
                }
                SchedulerOutput::Suppressed(s) => {
                    self.ensure_segment(s.interaction_id)?;
                    if !self.store.state().suppressed.contains(&s) {
                        self.store.commit(StoreEvent::PromptSuppressed(s))?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Moves the timeline up to the clock's current virtual time.
    pub fn sync(&mut self) -> Result<Millis> {
        let now = self.clock.now(self.wall.now());
        if self.advanced_to.is_none_or(|t| now > t) {
            let out = self.timeline.advance(now);
            if !out.is_empty() {
                self.log_op(SessionOp::Advance { to: now })?;
                self.persist(out)?;
            }
            self.advanced_to = Some(now);
        }
        Ok(now)
    }

    /// Notifications produced since the last call.
    pub fn drain_notifications(&mut self) -> Vec<Notification> {
        std::mem::take(&mut self.outbox)
    }

    pub fn state(&self) -> &AnnotationState {
        self.store.state()
    }

    pub fn features(&self) -> &FeatureStore {
        &self.features
    }

    pub fn annotations_dir(&self) -> &Path {
        self.store.dir()
    }

    pub fn clock_state(&self) -> ClockState {
        self.clock.state(self.wall.now())
    }

    pub fn control(&mut self, cmd: ReplayCommand) -> Result<ClockState> {
        self.sync()?;
        let wall = self.wall.now();
        let state = self.clock.apply(cmd, wall)?;
        match cmd {
            ReplayCommand::Seek { .. } => {
                let to = state.now_ms;
                let out = self.timeline.seek(to);
                self.log_op(SessionOp::Seek { to })?;
                self.persist(out)?;
                // Events at the target itself are handled by the next sync.
                // After a backward seek the timeline simply has nothing to
                // do until the clock passes its position again.
                self.advanced_to = to.checked_sub(1);
            }
            _ => self.log_op(SessionOp::Clock { at: state.now_ms, playing: state.playing, speed: state.speed })?,
        }
        self.sync()?;
        Ok(self.clock_state())
    }

    pub fn prompts_since(&self, since: Millis) -> Vec<PromptView> {
        let st = self.store.state();
        st.prompts_since(since)
            .into_iter()
            .map(|p| PromptView { prompt: p.clone(), response: st.latest_response(p.id).cloned() })
            .collect()
    }

    pub fn respond(&mut self, prompt_id: u64, sub: ResponseSubmission) -> Result<AnnotationRecord> {
        let now = self.sync()?;
        let rec = AnnotationRecord {
            prompt_id,
            answer: sub.answer,
            follow_ups: sub.follow_ups,
            submitted_at: sub.submitted_at.unwrap_or(now),
        };
        let ev = self.store.state().prepare_response(rec.clone(), self.scale)?;
        self.store.commit(ev)?;
        self.outbox.push(Notification::Response(rec.clone()));
        Ok(rec)
    }

    /// Adds (`target = None`) or edits an interaction.
    pub fn mutate(&mut self, target: Option<u64>, sub: IntervalSubmission) -> Result<StoredInteraction> {
        let now = self.sync()?;
        let m = InteractionMutation {
            target,
            start_ms: sub.start_ms,
            end_ms: sub.end_ms,
            author: sub.author,
            created_at: now,
            mode: sub.mode,
        };
        let mut ev = self.store.state().prepare_mutation(m)?;
        if let StoreEvent::InteractionMutated(rec) = &mut ev {
            // Ids up to the last detected segment belong to the replay.
            if target.is_none() && rec.interaction_id <= self.reserved_ids {
                rec.interaction_id = self.reserved_ids + 1;
            }
        }
        let id = match &ev {
            StoreEvent::InteractionMutated(rec) => rec.interaction_id,
            _ => unreachable!("prepare_mutation returns a mutation event"),
        };
        self.store.commit(ev)?;
        let stored = self.store.state().interactions[&id];
        self.outbox.push(Notification::Interaction(stored));
        Ok(stored)
    }

    pub fn segments_between(&self, from: Millis, to: Millis) -> Vec<StoredInteraction> {
        self.store.state().interactions_between(from, to).into_iter().copied().collect()
    }

    pub fn probes_between(&self, from: Millis, to: Millis) -> Vec<ProbeSlot> {
        self.probes.iter().copied().filter(|p| p.end > from && p.start < to).collect()
    }

    pub fn snapshot(&mut self) -> Result<()> {
        self.store.snapshot()
    }
}
