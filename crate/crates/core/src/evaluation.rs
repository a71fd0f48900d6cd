//! Window labeling from annotations, overlap analysis, classification
//! metrics, and deployment summaries.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::gateway::Response;
use crate::sensorstream::{InteractionMode, Interval};
use crate::{Error, Millis, Result, HOUR_MS, MINUTE_MS};

/// Binary confusion counts with "interaction"/"foreground" as positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn from_predictions(predictions: &[bool], labels: &[bool]) -> Result<Self> {
        if predictions.len() != labels.len() {
            return Err(Error::shape(
                alloc::format!("{} predictions", labels.len()),
                alloc::format!("{}", predictions.len()),
            ));
        }
        let mut c = Self::default();
        for (&p, &y) in predictions.iter().zip(labels) {
            c.record(p, y);
        }
        Ok(c)
    }

    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }
}

/// Classification metrics in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    /// Macro average over both classes.
    pub precision: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub balanced_accuracy: f64,
    /// Macro average over both classes.
    pub f1: f64,
    pub n_samples: u64,
}

/// Mean of sensitivity and specificity, in whatever unit they are given.
pub fn balanced_accuracy(sensitivity: f64, specificity: f64) -> f64 {
    (sensitivity + specificity) / 2.0
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Metrics from confusion counts. A class that is never predicted gets
/// precision 0.
pub fn metrics_from_confusion(c: &Confusion) -> Result<MetricsReport> {
    if c.positives() == 0 {
        return Err(Error::UndefinedMetric("sensitivity"));
    }
    if c.negatives() == 0 {
        return Err(Error::UndefinedMetric("specificity"));
    }
    let sens = ratio(c.tp, c.positives());
    let spec = ratio(c.tn, c.negatives());
    let prec_pos = ratio(c.tp, c.tp + c.fp);
    let prec_neg = ratio(c.tn, c.tn + c.fn_);
    Ok(MetricsReport {
        accuracy: 100.0 * ratio(c.tp + c.tn, c.total()),
        precision: 100.0 * (prec_pos + prec_neg) / 2.0,
        sensitivity: 100.0 * sens,
        specificity: 100.0 * spec,
        balanced_accuracy: balanced_accuracy(100.0 * sens, 100.0 * spec),
        f1: 100.0 * (f1(prec_pos, sens) + f1(prec_neg, spec)) / 2.0,
        n_samples: c.total(),
    })
}

pub fn compute_metrics(predictions: &[bool], labels: &[bool]) -> Result<MetricsReport> {
    metrics_from_confusion(&Confusion::from_predictions(predictions, labels)?)
}

/// Mean per-class recall over the classes that occur, in percent. Equals
/// balanced accuracy when both classes are present; `None` when empty.
pub fn mean_present_recall(c: &Confusion) -> Option<f64> {
    let mut recalls = Vec::new();
    if c.positives() > 0 {
        recalls.push(ratio(c.tp, c.positives()));
    }
    if c.negatives() > 0 {
        recalls.push(ratio(c.tn, c.negatives()));
    }
    (!recalls.is_empty()).then(|| 100.0 * recalls.iter().sum::<f64>() / recalls.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionReason {
    Unresponded,
    Maybe,
    AmbiguousFs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "label", content = "reason")]
pub enum WindowClass {
    Interaction,
    None,
    Excluded(ExclusionReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowLabel {
    pub probe: u64,
    pub class: WindowClass,
}

/// A probe window to be labeled, with its measured foreground fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowInput {
    pub probe: u64,
    pub window: Interval,
    pub fs_fraction: f64,
}

/// Annotation-derived intervals used for labeling.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelSources {
    /// Participant-confirmed interactions (yes answers, edits, additions).
    pub confirmed: Vec<Interval>,
    /// Detections that never received a response.
    pub unresponded: Vec<Interval>,
    /// Detections answered "maybe".
    pub maybe: Vec<Interval>,
}

/// Open band of foreground fractions treated as ambiguous for windows outside
/// every labeled interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityBand {
    pub low: f64,
    pub high: f64,
}

impl Default for AmbiguityBand {
    fn default() -> Self {
        Self { low: 0.05, high: 0.15 }
    }
}

/// Labels windows by where their start falls.
///
/// Priority is confirmed > unresponded > maybe > ambiguity band > none, so a
/// confirmed interval overrides an unanswered detection it covers. A confirmed
/// interval overlapping a "maybe" interval is contradictory and reported.
pub fn label_windows(windows: &[WindowInput], sources: &LabelSources, band: AmbiguityBand) -> Result<Vec<WindowLabel>> {
    for iv in sources.confirmed.iter().chain(&sources.unresponded).chain(&sources.maybe) {
        if iv.end_ms <= iv.start_ms {
            return Err(Error::validation("interval", alloc::format!("empty interval [{}, {})", iv.start_ms, iv.end_ms)));
        }
    }
    let mut conflicts = Vec::new();
    for c in &sources.confirmed {
        for m in sources.maybe.iter().filter(|m| m.overlaps(c)) {
            conflicts.push((c.start_ms, c.end_ms));
            conflicts.push((m.start_ms, m.end_ms));
        }
    }
    if !conflicts.is_empty() {
        conflicts.sort_unstable();
        conflicts.dedup();
        return Err(Error::Conflict(conflicts));
    }

    let inside = |list: &[Interval], t: Millis| list.iter().any(|iv| iv.contains(t));
    Ok(windows
        .iter()
        .map(|w| {
            let t = w.window.start_ms;
            let class = if inside(&sources.confirmed, t) {
                WindowClass::Interaction
            } else if inside(&sources.unresponded, t) {
                WindowClass::Excluded(ExclusionReason::Unresponded)
            } else if inside(&sources.maybe, t) {
                WindowClass::Excluded(ExclusionReason::Maybe)
            } else if w.fs_fraction > band.low && w.fs_fraction < band.high {
                WindowClass::Excluded(ExclusionReason::AmbiguousFs)
            } else {
                WindowClass::None
            };
            WindowLabel { probe: w.probe, class }
        })
        .collect())
}

/// Overlap of one participant-added interval with automatic detections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub added: Interval,
    /// Some auto segment starts or ends inside the added interval.
    pub criterion1: bool,
    /// The added interval starts or ends inside some auto segment.
    pub criterion2: bool,
}

impl OverlapRow {
    pub fn overlaps(&self) -> bool {
        self.criterion1 || self.criterion2
    }
}

/// Endpoint containment here is closed on both sides.
fn within(t: Millis, iv: &Interval) -> bool {
    t >= iv.start_ms && t <= iv.end_ms
}

pub fn overlap_added(added: Interval, auto: &[Interval]) -> OverlapRow {
    OverlapRow {
        added,
        criterion1: auto.iter().any(|a| within(a.start_ms, &added) || within(a.end_ms, &added)),
        criterion2: auto.iter().any(|a| within(added.start_ms, a) || within(added.end_ms, a)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub rows: Vec<OverlapRow>,
    /// Share of added intervals meeting either criterion, percent.
    pub overlap_percent: f64,
}

pub fn overlap_report(added: &[Interval], auto: &[Interval]) -> OverlapReport {
    let rows: Vec<OverlapRow> = added.iter().map(|&a| overlap_added(a, auto)).collect();
    let hits = rows.iter().filter(|r| r.overlaps()).count();
    OverlapReport {
        overlap_percent: if rows.is_empty() { 0.0 } else { 100.0 * hits as f64 / rows.len() as f64 },
        rows,
    }
}

/// One automatic detection and what the participant said about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub participant: String,
    pub segment: Interval,
    pub response: Option<Response>,
    #[serde(default)]
    pub mode: InteractionMode,
    pub prompted_ms: Option<Millis>,
    pub responded_ms: Option<Millis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantAccuracy {
    pub participant: String,
    pub yes: u64,
    pub no: u64,
    pub maybe: u64,
    pub unresponded: u64,
    /// No answers reclassified as correct because a confirmed interval
    /// covers the detection.
    pub reconciled: u64,
    /// `correct / (yes + no)` in percent, maybe and unanswered excluded.
    pub accuracy: Option<f64>,
}

/// Cumulative response-latency counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyBuckets {
    pub responded: u64,
    pub within_1_min: u64,
    pub within_30_min: u64,
    pub within_2_h: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationBin {
    pub label: String,
    pub lo_ms: Millis,
    /// Exclusive; `None` is unbounded.
    pub hi_ms: Option<Millis>,
    pub count: u64,
}

pub const DURATION_EDGES_MIN: [u64; 5] = [1, 5, 10, 30, 60];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentReport {
    pub participants: Vec<ParticipantAccuracy>,
    pub overall_accuracy: Option<f64>,
    pub mean_participant_accuracy: Option<f64>,
    pub latency: LatencyBuckets,
    /// Durations of correct detections.
    pub durations: Vec<DurationBin>,
    /// Modes of correct detections.
    pub modes: BTreeMap<String, u64>,
}

fn mode_name(mode: InteractionMode) -> &'static str {
    match mode {
        InteractionMode::InPerson => "in-person",
        InteractionMode::Virtual => "virtual",
        InteractionMode::Hybrid => "hybrid",
        InteractionMode::Unknown => "unknown",
    }
}

fn duration_bins() -> Vec<DurationBin> {
    let mut bins = Vec::new();
    let mut lo = 0;
    for &edge in &DURATION_EDGES_MIN {
        let label = if lo == 0 { alloc::format!("<{edge} min") } else { alloc::format!("{}-{edge} min", lo / MINUTE_MS) };
        bins.push(DurationBin { label, lo_ms: lo, hi_ms: Some(edge * MINUTE_MS), count: 0 });
        lo = edge * MINUTE_MS;
    }
    bins.push(DurationBin { label: alloc::format!(">={} min", lo / MINUTE_MS), lo_ms: lo, hi_ms: None, count: 0 });
    bins
}

/// Per-participant accuracy, response latency, duration histogram, and mode
/// breakdown. `confirmed` holds participant-confirmed intervals (edited or
/// added) per participant; a "no" detection inside one counts as correct.
pub fn deployment_report(detections: &[DetectionOutcome], confirmed: &BTreeMap<String, Vec<Interval>>) -> DeploymentReport {
    let mut per: BTreeMap<&str, ParticipantAccuracy> = BTreeMap::new();
    let mut latency = LatencyBuckets::default();
    let mut durations = duration_bins();
    let mut modes = BTreeMap::new();

    for d in detections {
        let row = per.entry(&d.participant).or_insert_with(|| ParticipantAccuracy {
            participant: d.participant.clone(),
            yes: 0,
            no: 0,
            maybe: 0,
            unresponded: 0,
            reconciled: 0,
            accuracy: None,
        });
        let covered = confirmed.get(&d.participant).is_some_and(|ivs| {
            ivs.iter().any(|iv| iv.start_ms <= d.segment.start_ms && d.segment.end_ms <= iv.end_ms)
        });
        let correct = match d.response {
            Some(Response::Yes) => {
                row.yes += 1;
                true
            }
            Some(Response::No) => {
                row.no += 1;
                if covered {
                    row.reconciled += 1;
                }
                covered
            }
            Some(Response::Maybe) => {
                row.maybe += 1;
                false
            }
            None => {
                row.unresponded += 1;
                false
            }
        };
        if correct {
            let len = d.segment.end_ms.saturating_sub(d.segment.start_ms);
            if let Some(bin) = durations.iter_mut().find(|b| len >= b.lo_ms && b.hi_ms.is_none_or(|hi| len < hi)) {
                bin.count += 1;
            }
            *modes.entry(String::from(mode_name(d.mode))).or_insert(0) += 1;
        }
        if let (Some(p), Some(r)) = (d.prompted_ms, d.responded_ms) {
            let lag = r.saturating_sub(p);
            latency.responded += 1;
            latency.within_1_min += u64::from(lag <= MINUTE_MS);
            latency.within_30_min += u64::from(lag <= 30 * MINUTE_MS);
            latency.within_2_h += u64::from(lag <= 2 * HOUR_MS);
        }
    }

    let (mut correct_all, mut judged_all) = (0, 0);
    let mut participants: Vec<ParticipantAccuracy> = per.into_values().collect();
    for p in &mut participants {
        let judged = p.yes + p.no;
        let correct = p.yes + p.reconciled;
        p.accuracy = (judged > 0).then(|| 100.0 * correct as f64 / judged as f64);
        correct_all += correct;
        judged_all += judged;
    }
    let accs: Vec<f64> = participants.iter().filter_map(|p| p.accuracy).collect();
    DeploymentReport {
        overall_accuracy: (judged_all > 0).then(|| 100.0 * correct_all as f64 / judged_all as f64),
        mean_participant_accuracy: (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64),
        participants,
        latency,
        durations,
        modes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    const T10: Millis = 10 * HOUR_MS;

    fn at(h: u64, m: u64) -> Millis {
        h * HOUR_MS + m * MINUTE_MS
    }

    #[test]
    fn table_row_balanced_accuracy() {
        assert!((balanced_accuracy(84.86, 86.16) - 85.51).abs() < 1e-9);
    }

    #[test]
    fn perfect_predictions_are_all_hundred() {
        let labels = [true, false, true, false];
        let m = compute_metrics(&labels, &labels).unwrap();
        for v in [m.accuracy, m.precision, m.sensitivity, m.specificity, m.balanced_accuracy, m.f1] {
            assert_eq!(v, 100.0);
        }
    }

    #[test]
    fn single_class_is_undefined() {
        assert_eq!(compute_metrics(&[true, false], &[true, true]), Err(Error::UndefinedMetric("specificity")));
        assert_eq!(compute_metrics(&[true], &[false]), Err(Error::UndefinedMetric("sensitivity")));
    }

    proptest! {
        #[test]
        fn metrics_match_recount(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 2..200)) {
            let (pred, lab): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
            prop_assume!(lab.iter().any(|&l| l) && lab.iter().any(|&l| !l));
            let m = compute_metrics(&pred, &lab).unwrap();
            let count = |p: bool, l: bool| pred.iter().zip(&lab).filter(|(&a, &b)| a == p && b == l).count() as f64;
            let (tp, fp, tn, fn_) = (count(true, true), count(true, false), count(false, false), count(false, true));
            let sens = tp / (tp + fn_);
            let spec = tn / (tn + fp);
            prop_assert!((m.sensitivity - 100.0 * sens).abs() < 1e-10);
            prop_assert!((m.specificity - 100.0 * spec).abs() < 1e-10);
            prop_assert_eq!(m.balanced_accuracy, (m.sensitivity + m.specificity) / 2.0);
            let acc = (tp + tn) / pred.len() as f64;
            prop_assert!((m.accuracy - 100.0 * acc).abs() < 1e-10);
        }
    }

    #[test]
    fn window_labels() {
        let win = |probe: u64, t: Millis, fs: f64| WindowInput { probe, window: Interval::new(t, t + 15_000), fs_fraction: fs };
        let sources = LabelSources {
            confirmed: vec![Interval::new(at(10, 0), at(10, 5))],
            unresponded: vec![Interval::new(at(11, 0), at(11, 5))],
            maybe: vec![Interval::new(at(12, 0), at(12, 5))],
        };
        let labels = label_windows(
            &[win(0, at(10, 2), 0.0), win(1, at(11, 1), 0.3), win(2, at(12, 1), 0.0), win(3, at(13, 0), 0.1), win(4, at(14, 0), 0.0)],
            &sources,
            AmbiguityBand::default(),
        )
        .unwrap();
        let classes: Vec<WindowClass> = labels.iter().map(|l| l.class).collect();
        assert_eq!(
            classes,
            vec![
                WindowClass::Interaction,
                WindowClass::Excluded(ExclusionReason::Unresponded),
                WindowClass::Excluded(ExclusionReason::Maybe),
                WindowClass::Excluded(ExclusionReason::AmbiguousFs),
                WindowClass::None,
            ]
        );
    }

    #[test]
    fn confirmed_overrides_unresponded_and_conflicts_reported() {
        let w = [WindowInput { probe: 0, window: Interval::new(T10, T10 + 15_000), fs_fraction: 0.0 }];
        let sources = LabelSources {
            confirmed: vec![Interval::new(T10, T10 + HOUR_MS)],
            unresponded: vec![Interval::new(T10, T10 + MINUTE_MS)],
            maybe: vec![],
        };
        assert_eq!(label_windows(&w, &sources, AmbiguityBand::default()).unwrap()[0].class, WindowClass::Interaction);

        let bad = LabelSources { maybe: vec![Interval::new(T10 + 5, T10 + 10)], ..sources };
        match label_windows(&w, &bad, AmbiguityBand::default()) {
            Err(Error::Conflict(pairs)) => assert_eq!(pairs, vec![(T10, T10 + HOUR_MS), (T10 + 5, T10 + 10)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn labeling_is_order_independent() {
        let wins: Vec<WindowInput> = (0..40)
            .map(|i| WindowInput { probe: i, window: Interval::new(i * 90_000, i * 90_000 + 15_000), fs_fraction: (i % 7) as f64 / 20.0 })
            .collect();
        let mut sources = LabelSources {
            confirmed: vec![Interval::new(0, 400_000), Interval::new(1_000_000, 1_500_000)],
            unresponded: vec![Interval::new(2_000_000, 2_300_000)],
            maybe: vec![Interval::new(3_000_000, 3_100_000)],
        };
        let a = label_windows(&wins, &sources, AmbiguityBand::default()).unwrap();
        sources.confirmed.reverse();
        let b = label_windows(&wins, &sources, AmbiguityBand::default()).unwrap();
        assert_eq!(a, b);
        let again: Vec<WindowInput> = wins.iter().copied().collect();
        assert_eq!(label_windows(&again, &sources, AmbiguityBand::default()).unwrap(), a);
    }

    #[test]
    fn overlap_criteria() {
        let added = Interval::new(at(10, 0), at(10, 20));
        let r = overlap_added(added, &[Interval::new(at(10, 5), at(10, 10))]);
        assert!(r.criterion1);
        let r = overlap_added(added, &[Interval::new(at(9, 55), at(10, 25))]);
        assert!(!r.criterion1 && r.criterion2);
        let r = overlap_added(added, &[Interval::new(at(11, 0), at(11, 5))]);
        assert!(!r.criterion1 && !r.criterion2 && !r.overlaps());
    }

    fn outcome(p: &str, response: Option<Response>, len_min: u64) -> DetectionOutcome {
        DetectionOutcome {
            participant: p.into(),
            segment: Interval::new(T10, T10 + len_min * MINUTE_MS),
            response,
            mode: InteractionMode::InPerson,
            prompted_ms: None,
            responded_ms: None,
        }
    }

    #[test]
    fn maybe_is_excluded_from_accuracy() {
        let mut d = Vec::new();
        d.extend((0..7).map(|_| outcome("p1", Some(Response::Yes), 3)));
        d.extend((0..2).map(|_| outcome("p1", Some(Response::No), 3)));
        d.push(outcome("p1", Some(Response::Maybe), 3));
        let r = deployment_report(&d, &BTreeMap::new());
        assert!((r.participants[0].accuracy.unwrap() - 700.0 / 9.0).abs() < 1e-9);
        assert_eq!(r.durations[1].count, 7);
        assert_eq!(r.modes["in-person"], 7);
    }

    #[test]
    fn all_confirmed_is_full_accuracy_and_reconciliation_applies() {
        let d = [outcome("a", Some(Response::Yes), 1), outcome("a", Some(Response::No), 1)];
        let mut conf = BTreeMap::new();
        conf.insert(String::from("a"), vec![Interval::new(T10 - MINUTE_MS, T10 + HOUR_MS)]);
        let r = deployment_report(&d, &conf);
        assert_eq!(r.participants[0].accuracy, Some(100.0));
        assert_eq!(r.participants[0].reconciled, 1);
    }

    #[test]
    fn latency_buckets_match_hand_count() {
        let lags_s = [10u64, 59, 60, 61, 600, 1800, 1801, 7200, 7201, 90_000];
        let d: Vec<DetectionOutcome> = lags_s
            .iter()
            .map(|&s| DetectionOutcome { prompted_ms: Some(T10), responded_ms: Some(T10 + s * 1000), ..outcome("a", Some(Response::Yes), 2) })
            .collect();
        let r = deployment_report(&d, &BTreeMap::new());
        assert_eq!(r.latency, LatencyBuckets { responded: 10, within_1_min: 3, within_30_min: 6, within_2_h: 8 });
    }
}
