//! Annotation-service logic: the notification policy, prompt scheduling,
//! response and interaction-edit validation, the event-sourced annotation
//! state, and the replay clock. Transport and files live in the std crate.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::detector::{InteractionSegment, Provenance};
use crate::rng::{seeded, SeededRng};
use crate::sensorstream::{DutyCycleConfig, InteractionMode, Interval};
use crate::{Error, Millis, Result, DAY_MS, HOUR_MS, MINUTE_MS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Response {
    Yes,
    No,
    Maybe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptKind {
    DetectedInteraction,
    MissedInteractionQuery,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptEvent {
    pub id: u64,
    pub kind: PromptKind,
    pub interval: Interval,
    pub issued_at: Millis,
    pub vibration_ms: u32,
    /// The detected interaction this prompt asks about.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction_id: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuppressionReason {
    QuietHours,
    HourlyCap,
    /// The segment closed more than the allowed delay after it ended.
    Late,
    /// Skipped over by a replay seek.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuppressedPrompt {
    pub interaction_id: u64,
    pub interval: Interval,
    pub due_at: Millis,
    pub reason: SuppressionReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum SchedulerOutput {
    Issued(PromptEvent),
    Suppressed(SuppressedPrompt),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NotificationPolicy {
    /// Quiet hours as an offset range within the day, `[start, end)`.
    pub quiet_start_ms: Millis,
    pub quiet_end_ms: Millis,
    pub max_per_window: usize,
    pub window_ms: Millis,
    pub max_detected_delay_ms: Millis,
    pub missed_base_ms: Millis,
    pub missed_jitter_ms: Millis,
    pub vibration_ms: u32,
}

impl Default for NotificationPolicy {
    fn default() -> Self {
        Self {
            quiet_start_ms: 0,
            quiet_end_ms: 8 * HOUR_MS,
            max_per_window: 4,
            window_ms: HOUR_MS,
            max_detected_delay_ms: 2 * MINUTE_MS,
            missed_base_ms: 80 * MINUTE_MS,
            missed_jitter_ms: 5 * MINUTE_MS,
            vibration_ms: 200,
        }
    }
}

impl NotificationPolicy {
    pub fn is_quiet(&self, t: Millis) -> bool {
        let d = t % DAY_MS;
        if self.quiet_start_ms <= self.quiet_end_ms {
            d >= self.quiet_start_ms && d < self.quiet_end_ms
        } else {
            d >= self.quiet_start_ms || d < self.quiet_end_ms
        }
    }
}

/// Issues prompts as clock events arrive.
///
/// Detected-interaction prompts go out when the segment closes, unless it is
/// quiet, the rolling-hour cap is reached, or the close came too late.
/// Missed-interaction queries fire at the first on-body probe start at or
/// after the due time and cover everything since the previous query, so a
/// quiet night is folded into the first morning query.
#[derive(Debug, Clone)]
pub struct PromptScheduler {
    pub policy: NotificationPolicy,
    pub next_id: u64,
    rng: SeededRng,
    recent: VecDeque<Millis>,
    coverage_start: Millis,
    missed_due: Millis,
}

impl PromptScheduler {
    pub fn new(policy: NotificationPolicy, session_start: Millis, seed: u64) -> Self {
        let mut s = Self {
            policy,
            next_id: 1,
            rng: seeded(seed),
            recent: VecDeque::new(),
            coverage_start: session_start,
            missed_due: 0,
        };
        s.missed_due = session_start + s.missed_gap();
        s
    }

    fn missed_gap(&mut self) -> Millis {
        self.policy.missed_base_ms + self.rng.random_range(0..=self.policy.missed_jitter_ms)
    }

    pub fn missed_due(&self) -> Millis {
        self.missed_due
    }

    fn issue(&mut self, kind: PromptKind, interval: Interval, at: Millis, interaction_id: Option<u64>) -> PromptEvent {
        let id = self.next_id;
        self.next_id += 1;
        PromptEvent { id, kind, interval, issued_at: at, vibration_ms: self.policy.vibration_ms, interaction_id }
    }

    pub fn on_segment_closed(&mut self, interaction_id: u64, interval: Interval, now: Millis) -> SchedulerOutput {
        let suppress = |reason| SchedulerOutput::Suppressed(SuppressedPrompt { interaction_id, interval, due_at: now, reason });
        if now > interval.end_ms + self.policy.max_detected_delay_ms {
            return suppress(SuppressionReason::Late);
        }
        if self.policy.is_quiet(now) {
            return suppress(SuppressionReason::QuietHours);
        }
        while self.recent.front().is_some_and(|&t| t + self.policy.window_ms <= now) {
            self.recent.pop_front();
        }
        if self.recent.len() >= self.policy.max_per_window {
            return suppress(SuppressionReason::HourlyCap);
        }
        self.recent.push_back(now);
        SchedulerOutput::Issued(self.issue(PromptKind::DetectedInteraction, interval, now, Some(interaction_id)))
    }

    /// A segment passed over by a seek; logged, never prompted.
    pub fn skip_segment(&mut self, interaction_id: u64, interval: Interval, now: Millis) -> SchedulerOutput {
        SchedulerOutput::Suppressed(SuppressedPrompt { interaction_id, interval, due_at: now, reason: SuppressionReason::Skipped })
    }

    pub fn on_probe_start(&mut self, now: Millis, on_body: bool) -> Option<SchedulerOutput> {
        if !on_body || now < self.missed_due || self.policy.is_quiet(now) {
            return None;
        }
        let interval = Interval::new(self.coverage_start, now);
        let prompt = self.issue(PromptKind::MissedInteractionQuery, interval, now, None);
        self.coverage_start = now;
        self.missed_due = now + self.missed_gap();
        Some(SchedulerOutput::Issued(prompt))
    }
}

/// Serialized as the string `"?"`: the participant chose not to say.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotSure;

impl Serialize for NotSure {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str("?")
    }
}

impl<'de> Deserialize<'de> for NotSure {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = NotSure;
            fn expecting(&self, f: &mut core::fmt::Formatter) -> core::fmt::Result {
                f.write_str("\"?\"")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> core::result::Result<NotSure, E> {
                if v == "?" {
                    Ok(NotSure)
                } else {
                    Err(E::invalid_value(serde::de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_str(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrNotSure<T> {
    Value(T),
    NotSure(NotSure),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoReason {
    TimeWrong,
    NoInteraction,
}

/// Follow-ups after "yes" or "maybe".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositiveFollowUps {
    pub people_count: OrNotSure<u32>,
    pub mode: InteractionMode,
    pub rating: OrNotSure<u8>,
}

/// Follow-ups after "no".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NegativeFollowUps {
    pub reason: NoReason,
    pub device_speech: bool,
    pub nearby_speech: bool,
}

pub const POSITIVE_FOLLOW_UP_FIELDS: [&str; 3] = ["people_count", "mode", "rating"];
pub const NEGATIVE_FOLLOW_UP_FIELDS: [&str; 3] = ["reason", "device_speech", "nearby_speech"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FollowUps {
    Positive(PositiveFollowUps),
    Negative(NegativeFollowUps),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub prompt_id: u64,
    pub answer: Response,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub follow_ups: Option<FollowUps>,
    pub submitted_at: Millis,
}

/// Inclusive endpoints of the rating question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingScale {
    pub min: u8,
    pub max: u8,
}

impl Default for RatingScale {
    fn default() -> Self {
        Self { min: 1, max: 5 }
    }
}

/// Checks that the follow-ups match the answer and prompt kind.
pub fn validate_record(rec: &AnnotationRecord, kind: PromptKind, scale: RatingScale) -> Result<()> {
    match (kind, rec.answer, &rec.follow_ups) {
        (PromptKind::MissedInteractionQuery, Response::Maybe, _) => {
            Err(Error::validation("answer", "missed-interaction queries take yes or no"))
        }
        (PromptKind::MissedInteractionQuery, _, Some(_)) => {
            Err(Error::validation("follow_ups", "missed-interaction queries have no follow-ups"))
        }
        (PromptKind::MissedInteractionQuery, _, None) => Ok(()),
        (_, Response::Yes | Response::Maybe, Some(FollowUps::Positive(f))) => {
            if let OrNotSure::Value(n) = f.people_count {
                if n == 0 {
                    return Err(Error::validation("people_count", "must be at least 1"));
                }
            }
            if f.mode == InteractionMode::Unknown {
                return Err(Error::validation("mode", "must be in-person, virtual, or hybrid"));
            }
            if let OrNotSure::Value(r) = f.rating {
                if r < scale.min || r > scale.max {
                    return Err(Error::validation("rating", format!("{r} outside {}..={}", scale.min, scale.max)));
                }
            }
            Ok(())
        }
        (_, Response::No, Some(FollowUps::Negative(_))) => Ok(()),
        (_, answer, _) => Err(Error::validation("follow_ups", format!("missing or wrong follow-ups for answer {answer:?}"))),
    }
}

/// Participant correction: edit an existing interaction (`target`) or add a
/// new one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionMutation {
    #[serde(default)]
    pub target: Option<u64>,
    pub start_ms: Millis,
    pub end_ms: Millis,
    #[serde(default)]
    pub author: String,
    #[serde(default)]
    pub created_at: Millis,
    #[serde(default)]
    pub mode: Option<InteractionMode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationRecord {
    pub interaction_id: u64,
    pub mutation: InteractionMutation,
    pub provenance: Provenance,
    /// An edit that kept both endpoints.
    pub zero_delta: bool,
    pub previous: Option<Interval>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoredInteraction {
    pub id: u64,
    pub start_ms: Millis,
    pub end_ms: Millis,
    pub fs_fraction: Option<f64>,
    pub provenance: Provenance,
    pub mode: InteractionMode,
    /// Bounds as originally detected, for edited auto segments.
    pub detected: Option<Interval>,
    pub zero_delta: bool,
}

impl StoredInteraction {
    pub fn interval(&self) -> Interval {
        Interval::new(self.start_ms, self.end_ms)
    }
}

/// Everything written to the annotation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "event")]
pub enum StoreEvent {
    SegmentRecorded { id: u64, segment: InteractionSegment },
    PromptIssued(PromptEvent),
    PromptSuppressed(SuppressedPrompt),
    ResponseRecorded(AnnotationRecord),
    InteractionMutated(MutationRecord),
}

/// State rebuilt by folding [`StoreEvent`]s. Commands are validated against
/// the current state by the `prepare_*` methods, which return the event to
/// persist and then [`AnnotationState::apply`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationState {
    pub interactions: BTreeMap<u64, StoredInteraction>,
    pub prompts: BTreeMap<u64, PromptEvent>,
    /// Every submitted version per prompt; the last one counts.
    pub responses: BTreeMap<u64, Vec<AnnotationRecord>>,
    pub suppressed: Vec<SuppressedPrompt>,
    pub mutations: Vec<MutationRecord>,
    pub next_interaction_id: u64,
    pub events_applied: u64,
}

impl AnnotationState {
    pub fn apply(&mut self, ev: &StoreEvent) {
        self.events_applied += 1;
        match ev {
            StoreEvent::SegmentRecorded { id, segment } => {
                self.interactions.insert(
                    *id,
                    StoredInteraction {
                        id: *id,
                        start_ms: segment.start_ms,
                        end_ms: segment.end_ms,
                        fs_fraction: Some(segment.fs_fraction),
                        provenance: segment.provenance,
                        mode: segment.mode,
                        detected: Some(Interval::new(segment.start_ms, segment.end_ms)),
                        zero_delta: false,
                    },
                );
                self.next_interaction_id = self.next_interaction_id.max(id + 1);
            }
            StoreEvent::PromptIssued(p) => {
                self.prompts.insert(p.id, p.clone());
            }
            StoreEvent::PromptSuppressed(s) => self.suppressed.push(s.clone()),
            StoreEvent::ResponseRecorded(r) => {
                let target = self.prompts.get(&r.prompt_id).and_then(|p| p.interaction_id);
                if let (Some(id), Some(FollowUps::Positive(f))) = (target, r.follow_ups) {
                    if let Some(i) = self.interactions.get_mut(&id) {
                        i.mode = f.mode;
                    }
                }
                self.responses.entry(r.prompt_id).or_default().push(r.clone());
            }
            StoreEvent::InteractionMutated(m) => {
                let entry = self.interactions.entry(m.interaction_id).or_insert(StoredInteraction {
                    id: m.interaction_id,
                    start_ms: m.mutation.start_ms,
                    end_ms: m.mutation.end_ms,
                    fs_fraction: None,
                    provenance: m.provenance,
                    mode: InteractionMode::Unknown,
                    detected: None,
                    zero_delta: false,
                });
                entry.start_ms = m.mutation.start_ms;
                entry.end_ms = m.mutation.end_ms;
                entry.provenance = m.provenance;
                entry.zero_delta = m.zero_delta;
                if let Some(mode) = m.mutation.mode {
                    entry.mode = mode;
                }
                self.next_interaction_id = self.next_interaction_id.max(m.interaction_id + 1);
                self.mutations.push(m.clone());
            }
        }
    }

    pub fn prepare_segment(&self, segment: InteractionSegment) -> StoreEvent {
        StoreEvent::SegmentRecorded { id: self.next_interaction_id.max(1), segment }
    }

    pub fn prepare_response(&self, rec: AnnotationRecord, scale: RatingScale) -> Result<StoreEvent> {
        let prompt = self
            .prompts
            .get(&rec.prompt_id)
            .ok_or_else(|| Error::NotFound(format!("prompt {}", rec.prompt_id)))?;
        validate_record(&rec, prompt.kind, scale)?;
        Ok(StoreEvent::ResponseRecorded(rec))
    }

    pub fn prepare_mutation(&self, m: InteractionMutation) -> Result<StoreEvent> {
        if m.end_ms <= m.start_ms {
            return Err(Error::validation("end_ms", format!("end {} must be after start {}", m.end_ms, m.start_ms)));
        }
        let record = match m.target {
            Some(id) => {
                let cur = self.interactions.get(&id).ok_or_else(|| Error::NotFound(format!("interaction {id}")))?;
                let provenance = if cur.provenance == Provenance::Added { Provenance::Added } else { Provenance::Edited };
                MutationRecord {
                    interaction_id: id,
                    zero_delta: cur.start_ms == m.start_ms && cur.end_ms == m.end_ms,
                    previous: Some(cur.interval()),
                    provenance,
                    mutation: m,
                }
            }
            None => MutationRecord {
                interaction_id: self.next_interaction_id.max(1),
                zero_delta: false,
                previous: None,
                provenance: Provenance::Added,
                mutation: m,
            },
        };
        Ok(StoreEvent::InteractionMutated(record))
    }

    pub fn latest_response(&self, prompt_id: u64) -> Option<&AnnotationRecord> {
        self.responses.get(&prompt_id).and_then(|v| v.last())
    }

    pub fn prompts_since(&self, since: Millis) -> Vec<&PromptEvent> {
        let mut v: Vec<&PromptEvent> = self.prompts.values().filter(|p| p.issued_at >= since).collect();
        v.sort_by_key(|p| (p.issued_at, p.id));
        v
    }

    pub fn interactions_between(&self, from: Millis, to: Millis) -> Vec<&StoredInteraction> {
        self.interactions.values().filter(|i| i.end_ms > from && i.start_ms < to).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum ReplayCommand {
    Play,
    Pause,
    SetSpeed { speed: f64 },
    Seek { to_ms: Millis },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockState {
    pub now_ms: Millis,
    pub playing: bool,
    pub speed: f64,
    pub session_start: Millis,
    pub session_end: Millis,
    /// Whether `now_ms` falls inside a probe window.
    pub recording: bool,
}

/// Virtual clock for replay. Virtual time advances at `speed` times wall
/// time while playing and stops at the session end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayClock {
    pub session_start: Millis,
    pub session_end: Millis,
    pub duty_cycle: DutyCycleConfig,
    anchor_virtual: Millis,
    anchor_wall: u64,
    speed: f64,
    playing: bool,
}

impl ReplayClock {
    pub fn new(session_start: Millis, session_end: Millis, duty_cycle: DutyCycleConfig, wall_ms: u64) -> Self {
        Self { session_start, session_end, duty_cycle, anchor_virtual: session_start, anchor_wall: wall_ms, speed: 1.0, playing: false }
    }

    pub fn now(&self, wall_ms: u64) -> Millis {
        if !self.playing {
            return self.anchor_virtual;
        }
        let elapsed = wall_ms.saturating_sub(self.anchor_wall) as f64 * self.speed;
        (self.anchor_virtual + elapsed as Millis).min(self.session_end)
    }

    fn rebase(&mut self, wall_ms: u64) {
        self.anchor_virtual = self.now(wall_ms);
        self.anchor_wall = wall_ms;
    }

    pub fn apply(&mut self, cmd: ReplayCommand, wall_ms: u64) -> Result<ClockState> {
        match cmd {
            ReplayCommand::Play => {
                self.rebase(wall_ms);
                self.playing = true;
            }
            ReplayCommand::Pause => {
                self.rebase(wall_ms);
                self.playing = false;
            }
            ReplayCommand::SetSpeed { speed } => {
                if !(speed > 0.0 && speed.is_finite()) {
                    return Err(Error::validation("speed", format!("{speed} must be positive")));
                }
                self.rebase(wall_ms);
                self.speed = speed;
            }
            ReplayCommand::Seek { to_ms } => {
                if to_ms < self.session_start {
                    return Err(Error::validation("to_ms", format!("{to_ms} is before session start {}", self.session_start)));
                }
                self.anchor_virtual = to_ms.min(self.session_end);
                self.anchor_wall = wall_ms;
            }
        }
        Ok(self.state(wall_ms))
    }

    pub fn state(&self, wall_ms: u64) -> ClockState {
        let now = self.now(wall_ms);
        let period = self.duty_cycle.period_ms();
        let recording = now >= self.session_start && (now - self.session_start) % period < self.duty_cycle.window_ms;
        ClockState {
            now_ms: now,
            playing: self.playing,
            speed: self.speed,
            session_start: self.session_start,
            session_end: self.session_end,
            recording,
        }
    }
}

/// Something the prompt scheduler reacts to during replay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum TimelineEvent {
    SegmentClosed { at: Millis, interaction_id: u64, interval: Interval },
    ProbeStart { at: Millis, on_body: bool },
}

impl TimelineEvent {
    pub fn at(&self) -> Millis {
        match self {
            TimelineEvent::SegmentClosed { at, .. } | TimelineEvent::ProbeStart { at, .. } => *at,
        }
    }
}

/// Drives a [`PromptScheduler`] along a precomputed timeline as the replay
/// clock moves. A seek marks everything it jumps over as handled without
/// prompting, so a missed query that fell due inside the skipped span fires
/// at the first probe start after the target.
#[derive(Debug, Clone)]
pub struct PromptTimeline {
    events: Vec<TimelineEvent>,
    cursor: usize,
    pub scheduler: PromptScheduler,
}

impl PromptTimeline {
    pub fn new(mut events: Vec<TimelineEvent>, scheduler: PromptScheduler) -> Self {
        // Closures are handled before a probe start at the same instant.
        events.sort_by_key(|e| (e.at(), matches!(e, TimelineEvent::ProbeStart { .. })));
        Self { events, cursor: 0, scheduler }
    }

    /// Builds the timeline for a probe schedule and closed segments
    /// `(interaction_id, interval, closed_at)`.
    pub fn from_replay(
        probe_starts: &[(Millis, bool)],
        closures: &[(u64, Interval, Millis)],
        scheduler: PromptScheduler,
    ) -> Self {
        let mut events: Vec<TimelineEvent> =
            probe_starts.iter().map(|&(at, on_body)| TimelineEvent::ProbeStart { at, on_body }).collect();
        events.extend(closures.iter().map(|&(interaction_id, interval, at)| TimelineEvent::SegmentClosed { at, interaction_id, interval }));
        Self::new(events, scheduler)
    }

    /// Time of the last handled event, if any.
    pub fn position(&self) -> Option<Millis> {
        self.cursor.checked_sub(1).map(|i| self.events[i].at())
    }

    pub fn is_done(&self) -> bool {
        self.cursor >= self.events.len()
    }

    /// Handles every event at or before `now`.
    pub fn advance(&mut self, now: Millis) -> Vec<SchedulerOutput> {
        let mut out = Vec::new();
        while let Some(ev) = self.events.get(self.cursor).copied() {
            if ev.at() > now {
                break;
            }
            self.cursor += 1;
            match ev {
                TimelineEvent::SegmentClosed { at, interaction_id, interval } => {
                    out.push(self.scheduler.on_segment_closed(interaction_id, interval, at));
                }
                TimelineEvent::ProbeStart { at, on_body } => out.extend(self.scheduler.on_probe_start(at, on_body)),
            }
        }
        out
    }

    /// Jumps to `target` without prompting for anything in between. Only
    /// forward jumps move the cursor; already handled events stay handled.
    pub fn seek(&mut self, target: Millis) -> Vec<SchedulerOutput> {
        let mut out = Vec::new();
        while let Some(ev) = self.events.get(self.cursor).copied() {
            if ev.at() >= target {
                break;
            }
            self.cursor += 1;
            if let TimelineEvent::SegmentClosed { at, interaction_id, interval } = ev {
                out.push(self.scheduler.skip_segment(interaction_id, interval, at));
            }
        }
        out
    }
}
