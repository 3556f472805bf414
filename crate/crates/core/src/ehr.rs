//! Domain types and outcome labelling.
//!
//! Days are plain integers counted from an arbitrary epoch; there is no
//! calendar arithmetic anywhere in the crate. All types are immutable after
//! construction and every operation is a pure function of its inputs and an
//! explicit seed.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::rng;

/// Maximum offset (days) between index date and outcome event.
pub const OUTCOME_HORIZON_DAYS: i64 = 180;

/// Length of the feature-history window before index, in days.
pub const HISTORY_WINDOW_DAYS: i64 = 365;

/// The five source families of clinical events plus derived history flags.
///
/// Ordering is meaningful: vocabularies sort tokens by family first, so the
/// declaration order here fixes the canonical feature order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureFamily {
    Hospitalisation,
    Prescription,
    BloodTestMarker,
    BloodTestValue,
    Demographic,
    HistoryOfDisease,
}

impl FeatureFamily {
    /// Short tag used in the event file schema.
    pub fn tag(&self) -> &'static str {
        match self {
            FeatureFamily::Hospitalisation => "HOSP",
            FeatureFamily::Prescription => "RX",
            FeatureFamily::BloodTestMarker => "LABM",
            FeatureFamily::BloodTestValue => "LABV",
            FeatureFamily::Demographic => "DEMO",
            FeatureFamily::HistoryOfDisease => "HIST",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "HOSP" => Ok(FeatureFamily::Hospitalisation),
            "RX" => Ok(FeatureFamily::Prescription),
            "LABM" => Ok(FeatureFamily::BloodTestMarker),
            "LABV" => Ok(FeatureFamily::BloodTestValue),
            "DEMO" => Ok(FeatureFamily::Demographic),
            "HIST" => Ok(FeatureFamily::HistoryOfDisease),
            other => Err(CoreError::validation(format!(
                "unknown feature family tag {other:?}"
            ))),
        }
    }

    pub const ALL: [FeatureFamily; 6] = [
        FeatureFamily::Hospitalisation,
        FeatureFamily::Prescription,
        FeatureFamily::BloodTestMarker,
        FeatureFamily::BloodTestValue,
        FeatureFamily::Demographic,
        FeatureFamily::HistoryOfDisease,
    ];

    /// Static families are constant over the observation year and get
    /// replicated across all time bins of the tensor encoding.
    pub fn is_static(&self) -> bool {
        matches!(
            self,
            FeatureFamily::Demographic | FeatureFamily::HistoryOfDisease
        )
    }
}

/// One timestamped clinical event for one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub subject_id: String,
    pub event_day: i64,
    pub family: FeatureFamily,
    pub code: String,
    pub value: Option<f64>,
    pub unit: Option<String>,
}

impl EventRecord {
    pub fn new(
        subject_id: impl Into<String>,
        event_day: i64,
        family: FeatureFamily,
        code: impl Into<String>,
    ) -> Self {
        EventRecord {
            subject_id: subject_id.into(),
            event_day,
            family,
            code: code.into(),
            value: None,
            unit: None,
        }
    }

    pub fn with_value(mut self, value: f64) -> Self {
        self.value = Some(value);
        self
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = Some(unit.into());
        self
    }

    /// A value is carried only by blood-test results and the age
    /// demographic; everything else is a pure occurrence.
    pub fn validate(&self) -> Result<()> {
        if self.code.is_empty() {
            return Err(CoreError::validation(format!(
                "event for subject {:?} has an empty code",
                self.subject_id
            )));
        }
        if let Some(v) = self.value {
            if !v.is_finite() {
                return Err(CoreError::validation(format!(
                    "event {}/{} carries a non-finite value",
                    self.subject_id, self.code
                )));
            }
        }
        let needs_value = match self.family {
            FeatureFamily::BloodTestValue => true,
            FeatureFamily::Demographic => self.code == "age",
            _ => false,
        };
        if needs_value && self.value.is_none() {
            return Err(CoreError::validation(format!(
                "event {}/{} requires a value",
                self.subject_id, self.code
            )));
        }
        if !needs_value && self.value.is_some() {
            return Err(CoreError::validation(format!(
                "event {}/{} must not carry a value",
                self.subject_id, self.code
            )));
        }
        Ok(())
    }
}

/// Which outcome a label refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OutcomeKind {
    SuddenDeathComposite,
    AllCauseMortality,
}

impl OutcomeKind {
    pub fn tag(&self) -> &'static str {
        match self {
            OutcomeKind::SuddenDeathComposite => "sudden_death",
            OutcomeKind::AllCauseMortality => "all_cause",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "sudden_death" => Ok(OutcomeKind::SuddenDeathComposite),
            "all_cause" => Ok(OutcomeKind::AllCauseMortality),
            other => Err(CoreError::validation(format!(
                "unknown outcome kind {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelClass {
    Event,
    Control,
}

impl LabelClass {
    pub fn tag(&self) -> &'static str {
        match self {
            LabelClass::Event => "event",
            LabelClass::Control => "control",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "event" => Ok(LabelClass::Event),
            "control" => Ok(LabelClass::Control),
            other => Err(CoreError::validation(format!(
                "unknown label class {other:?}"
            ))),
        }
    }
}

/// Finer event categories used by the patient-cluster analytics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventSubtype {
    NoEvent,
    SuddenDeath,
    MyocardialInfarction,
    Stroke,
    NearFatalArrhythmia,
}

impl EventSubtype {
    pub const ALL: [EventSubtype; 5] = [
        EventSubtype::NoEvent,
        EventSubtype::SuddenDeath,
        EventSubtype::MyocardialInfarction,
        EventSubtype::Stroke,
        EventSubtype::NearFatalArrhythmia,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            EventSubtype::NoEvent => "no_event",
            EventSubtype::SuddenDeath => "sudden_death",
            EventSubtype::MyocardialInfarction => "mi",
            EventSubtype::Stroke => "stroke",
            EventSubtype::NearFatalArrhythmia => "arrhythmia",
        }
    }
}

/// Outcome label for one subject under one outcome definition.
///
/// `event_day` is kept for Event labels so that terminal-illness filtering
/// and event sub-typing can look back from the actual event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeLabel {
    pub subject_id: String,
    pub outcome_kind: OutcomeKind,
    pub label: LabelClass,
    pub index_day: i64,
    pub event_day: Option<i64>,
}

/// A labelled event collection.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub events: Vec<EventRecord>,
    pub labels: Vec<OutcomeLabel>,
}

impl Cohort {
    pub fn new(events: Vec<EventRecord>, labels: Vec<OutcomeLabel>) -> Self {
        Cohort { events, labels }
    }

    /// Checks the structural invariants: one label per subject per outcome,
    /// every labelled subject has at least one event, and Event labels sit
    /// 0..=180 days before their event day.
    pub fn validate(&self) -> Result<()> {
        let mut seen: BTreeSet<(&str, OutcomeKind)> = BTreeSet::new();
        for label in &self.labels {
            if !seen.insert((label.subject_id.as_str(), label.outcome_kind)) {
                return Err(CoreError::validation(format!(
                    "duplicate label for subject {:?} under {}",
                    label.subject_id,
                    label.outcome_kind.tag()
                )));
            }
            if label.label == LabelClass::Event {
                let event_day = label.event_day.ok_or_else(|| {
                    CoreError::validation(format!(
                        "event label for {:?} is missing its event day",
                        label.subject_id
                    ))
                })?;
                let offset = event_day - label.index_day;
                if !(0..=OUTCOME_HORIZON_DAYS).contains(&offset) {
                    return Err(CoreError::validation(format!(
                        "subject {:?}: index day must precede the event by 0-{} days, got {}",
                        label.subject_id, OUTCOME_HORIZON_DAYS, offset
                    )));
                }
            }
        }
        let with_events: BTreeSet<&str> =
            self.events.iter().map(|e| e.subject_id.as_str()).collect();
        for label in &self.labels {
            if !with_events.contains(label.subject_id.as_str()) {
                return Err(CoreError::validation(format!(
                    "labelled subject {:?} has no events",
                    label.subject_id
                )));
            }
        }
        for event in &self.events {
            event.validate()?;
        }
        Ok(())
    }

    /// Labels for one outcome kind, sorted by subject id.
    pub fn labels_for(&self, kind: OutcomeKind) -> Vec<&OutcomeLabel> {
        let mut out: Vec<&OutcomeLabel> = self
            .labels
            .iter()
            .filter(|l| l.outcome_kind == kind)
            .collect();
        out.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
        out
    }

    /// Subject id -> index day for one outcome kind.
    pub fn index_days(&self, kind: OutcomeKind) -> BTreeMap<String, i64> {
        self.labels
            .iter()
            .filter(|l| l.outcome_kind == kind)
            .map(|l| (l.subject_id.clone(), l.index_day))
            .collect()
    }

    /// Subject id -> events, each subject's events sorted by day then code.
    pub fn events_by_subject(&self) -> BTreeMap<&str, Vec<&EventRecord>> {
        let mut map: BTreeMap<&str, Vec<&EventRecord>> = BTreeMap::new();
        for event in &self.events {
            map.entry(event.subject_id.as_str()).or_default().push(event);
        }
        for events in map.values_mut() {
            events.sort_by(|a, b| {
                (a.event_day, &a.family, &a.code).cmp(&(b.event_day, &b.family, &b.code))
            });
        }
        map
    }
}

/// The eleven major diseases tracked as history flags.
pub const HISTORY_DISEASES: [&str; 11] = [
    "heart_failure",
    "chronic_ischaemic_heart_disease",
    "liver_disease",
    "seizures",
    "stroke",
    "kidney_disease",
    "primary_hypertension",
    "hypertensive_heart_disease",
    "chronic_kidney_disease",
    "type_1_diabetes",
    "type_2_diabetes",
];

/// Disease key -> hospitalisation code prefixes that mark it.
pub type HistoryCodeMap = BTreeMap<String, Vec<String>>;

/// Default ICD-10 prefixes for the eleven tracked diseases.
pub fn default_history_prefixes() -> HistoryCodeMap {
    let entries: [(&str, &[&str]); 11] = [
        ("heart_failure", &["I50"]),
        ("chronic_ischaemic_heart_disease", &["I25"]),
        ("liver_disease", &["K70", "K71", "K72", "K73", "K74"]),
        ("seizures", &["G40", "R56"]),
        ("stroke", &["I63", "I64"]),
        ("kidney_disease", &["N17", "N19"]),
        ("primary_hypertension", &["I10"]),
        ("hypertensive_heart_disease", &["I11"]),
        ("chronic_kidney_disease", &["N18"]),
        ("type_1_diabetes", &["E10"]),
        ("type_2_diabetes", &["E11"]),
    ];
    entries
        .iter()
        .map(|(k, v)| (k.to_string(), v.iter().map(|p| p.to_string()).collect()))
        .collect()
}

fn validate_history_map(codes: &HistoryCodeMap) -> Result<()> {
    let known: BTreeSet<&str> = HISTORY_DISEASES.iter().copied().collect();
    for key in codes.keys() {
        if !known.contains(key.as_str()) {
            return Err(CoreError::config(format!(
                "unknown disease key {key:?} in history code map"
            )));
        }
    }
    for disease in HISTORY_DISEASES {
        match codes.get(disease) {
            Some(prefixes) if !prefixes.is_empty() => {}
            _ => {
                return Err(CoreError::config(format!(
                    "history code map must list at least one prefix for {disease:?}"
                )))
            }
        }
    }
    Ok(())
}

/// Per-subject history flags plus the derived events that carry them.
#[derive(Debug, Clone, Default)]
pub struct HistoryFlags {
    /// subject id -> disease key -> flag.
    pub flags: BTreeMap<String, BTreeMap<String, bool>>,
    /// One `HistoryOfDisease` event per true flag, pinned to the subject's
    /// index day.
    pub events: Vec<EventRecord>,
}

/// Scans hospitalisation events on or before each subject's index day and
/// raises a flag per tracked disease whose code prefix matches.
pub fn derive_history_flags(
    events: &[EventRecord],
    index_days: &BTreeMap<String, i64>,
    codes: &HistoryCodeMap,
) -> Result<HistoryFlags> {
    validate_history_map(codes)?;
    let mut flags: BTreeMap<String, BTreeMap<String, bool>> = BTreeMap::new();
    for subject in index_days.keys() {
        let per_disease: BTreeMap<String, bool> = HISTORY_DISEASES
            .iter()
            .map(|d| (d.to_string(), false))
            .collect();
        flags.insert(subject.clone(), per_disease);
    }
    for event in events {
        if event.family != FeatureFamily::Hospitalisation {
            continue;
        }
        let Some(&index_day) = index_days.get(&event.subject_id) else {
            continue;
        };
        if event.event_day > index_day {
            continue;
        }
        let subject_flags = flags.get_mut(&event.subject_id).expect("subject present");
        for disease in HISTORY_DISEASES {
            if subject_flags[disease] {
                continue;
            }
            let matched = codes[disease]
                .iter()
                .any(|prefix| event.code.starts_with(prefix.as_str()));
            if matched {
                subject_flags.insert(disease.to_string(), true);
            }
        }
    }
    let mut derived = Vec::new();
    for (subject, per_disease) in &flags {
        let index_day = index_days[subject];
        for (disease, &flag) in per_disease {
            if flag {
                derived.push(EventRecord::new(
                    subject.clone(),
                    index_day,
                    FeatureFamily::HistoryOfDisease,
                    disease.clone(),
                ));
            }
        }
    }
    Ok(HistoryFlags {
        flags,
        events: derived,
    })
}

/// Raw outcome information for one subject, before index assignment.
#[derive(Debug, Clone)]
pub struct RawOutcome {
    pub subject_id: String,
    /// First and last observed day of the subject's record.
    pub span: (i64, i64),
    /// Death/event day for Event subjects.
    pub event_day: Option<i64>,
    /// Days of qualifying events that would disqualify a control index date
    /// if they fall within the following 180 days.
    pub qualifying_days: Vec<i64>,
}

/// Why a subject was excluded, mirrored into reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Exclusion {
    pub subject_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub excluded: Vec<Exclusion>,
}

impl ExclusionReport {
    fn push(&mut self, subject_id: &str, reason: impl Into<String>) {
        self.excluded.push(Exclusion {
            subject_id: subject_id.to_string(),
            reason: reason.into(),
        });
    }
}

/// Index day for an event subject given the drawn offset.
fn event_index_day(event_day: i64, offset: i64) -> i64 {
    event_day - offset
}

/// Assigns index dates: event subjects get a uniform random offset of
/// 0..=180 days before the event; control subjects get a uniform draw over
/// days with a full history year inside the span and no qualifying event in
/// the 180 days that follow.
///
/// Per-subject streams are derived from the seed and the subject id, so the
/// result does not depend on input order.
pub fn assign_index_dates(
    outcomes: &[RawOutcome],
    kind: OutcomeKind,
    seed: u64,
) -> Result<(Vec<OutcomeLabel>, ExclusionReport)> {
    let mut labels = Vec::new();
    let mut report = ExclusionReport::default();
    for outcome in outcomes {
        let mut rng = rng::stream(seed, &[0x1dec, rng::fnv1a(&outcome.subject_id)]);
        match outcome.event_day {
            Some(event_day) => {
                let offset = rng.gen_range(0..=OUTCOME_HORIZON_DAYS);
                labels.push(OutcomeLabel {
                    subject_id: outcome.subject_id.clone(),
                    outcome_kind: kind,
                    label: LabelClass::Event,
                    index_day: event_index_day(event_day, offset),
                    event_day: Some(event_day),
                });
            }
            None => {
                let (start, end) = outcome.span;
                let lo = start + HISTORY_WINDOW_DAYS;
                let hi = end - OUTCOME_HORIZON_DAYS;
                let mut candidates: Vec<i64> = Vec::new();
                let mut qualifying = outcome.qualifying_days.clone();
                qualifying.sort_unstable();
                for day in lo..=hi {
                    let clear = qualifying
                        .iter()
                        .all(|&q| q <= day || q > day + OUTCOME_HORIZON_DAYS);
                    if clear {
                        candidates.push(day);
                    }
                }
                if candidates.is_empty() {
                    report.push(&outcome.subject_id, "no qualifying control window");
                    continue;
                }
                let pick = rng.gen_range(0..candidates.len());
                labels.push(OutcomeLabel {
                    subject_id: outcome.subject_id.clone(),
                    outcome_kind: kind,
                    label: LabelClass::Control,
                    index_day: candidates[pick],
                    event_day: None,
                });
            }
        }
    }
    Ok((labels, report))
}

/// Removes sudden-death subjects whose record shows a terminal-illness
/// marker in the year before death. All-cause labels pass through
/// unchanged; the operation is idempotent.
pub fn filter_terminal_illness(
    cohort: &Cohort,
    terminal_code_prefixes: &[String],
) -> Result<(Cohort, ExclusionReport)> {
    let has_sd = cohort
        .labels
        .iter()
        .any(|l| l.outcome_kind == OutcomeKind::SuddenDeathComposite);
    if has_sd && terminal_code_prefixes.is_empty() {
        return Err(CoreError::config(
            "terminal-illness prefixes must be non-empty when sudden-death labels are present",
        ));
    }
    let mut report = ExclusionReport::default();
    let mut removed: BTreeSet<String> = BTreeSet::new();
    for label in &cohort.labels {
        if label.outcome_kind != OutcomeKind::SuddenDeathComposite
            || label.label != LabelClass::Event
        {
            continue;
        }
        let Some(death_day) = label.event_day else {
            continue;
        };
        let terminal = cohort.events.iter().any(|event| {
            event.subject_id == label.subject_id
                && event.event_day >= death_day - HISTORY_WINDOW_DAYS
                && event.event_day <= death_day
                && terminal_code_prefixes
                    .iter()
                    .any(|prefix| event.code.starts_with(prefix.as_str()))
        });
        if terminal {
            removed.insert(label.subject_id.clone());
            report.push(&label.subject_id, "terminal illness marker before death");
        }
    }
    let labels: Vec<OutcomeLabel> = cohort
        .labels
        .iter()
        .filter(|l| {
            !(l.outcome_kind == OutcomeKind::SuddenDeathComposite
                && removed.contains(&l.subject_id))
        })
        .cloned()
        .collect();
    let still_labelled: BTreeSet<&str> = labels.iter().map(|l| l.subject_id.as_str()).collect();
    let events: Vec<EventRecord> = cohort
        .events
        .iter()
        .filter(|e| !removed.contains(&e.subject_id) || still_labelled.contains(e.subject_id.as_str()))
        .cloned()
        .collect();
    Ok((Cohort::new(events, labels), report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hosp(subject: &str, day: i64, code: &str) -> EventRecord {
        EventRecord::new(subject, day, FeatureFamily::Hospitalisation, code)
    }

    #[test]
    fn history_flag_set_by_prefix_match() {
        let events = vec![hosp("s1", 100, "I50")];
        let index: BTreeMap<String, i64> = [("s1".to_string(), 500)].into();
        let flags = derive_history_flags(&events, &index, &default_history_prefixes()).unwrap();
        assert!(flags.flags["s1"]["heart_failure"]);
        assert_eq!(flags.events.len(), 1);
        assert_eq!(flags.events[0].event_day, 500);
        assert_eq!(flags.events[0].family, FeatureFamily::HistoryOfDisease);
    }

    #[test]
    fn no_hospitalisations_means_all_flags_false() {
        let events = vec![EventRecord::new(
            "s1",
            100,
            FeatureFamily::Prescription,
            "0202",
        )];
        let index: BTreeMap<String, i64> = [("s1".to_string(), 500)].into();
        let flags = derive_history_flags(&events, &index, &default_history_prefixes()).unwrap();
        assert!(flags.flags["s1"].values().all(|&v| !v));
        assert!(flags.events.is_empty());
    }

    #[test]
    fn events_after_index_do_not_raise_flags() {
        // Brute-force check over a 5-subject fixture: only pre-index
        // hospitalisations may raise a flag.
        let mut events = Vec::new();
        let mut index: BTreeMap<String, i64> = BTreeMap::new();
        let days = [600i64, 400, 500, 501, 700];
        for (i, day) in days.iter().enumerate() {
            let id = format!("s{i}");
            events.push(hosp(&id, *day, "I50"));
            index.insert(id, 500);
        }
        let flags = derive_history_flags(&events, &index, &default_history_prefixes()).unwrap();
        for (i, day) in days.iter().enumerate() {
            let expect = *day <= 500;
            assert_eq!(
                flags.flags[&format!("s{i}")]["heart_failure"],
                expect,
                "subject s{i} day {day}"
            );
        }
    }

    #[test]
    fn unknown_disease_key_is_a_config_error() {
        let mut codes = default_history_prefixes();
        codes.insert("gout".to_string(), vec!["M10".to_string()]);
        let err = derive_history_flags(&[], &BTreeMap::new(), &codes).unwrap_err();
        assert!(matches!(err, CoreError::Config(_)));
    }

    #[test]
    fn event_index_offset_boundaries() {
        assert_eq!(event_index_day(1000, 0), 1000);
        assert_eq!(event_index_day(1000, 180), 820);
    }

    #[test]
    fn index_dates_are_deterministic_and_in_range() {
        let outcomes: Vec<RawOutcome> = (0..50)
            .map(|i| RawOutcome {
                subject_id: format!("s{i:03}"),
                span: (0, 2000),
                event_day: Some(1000 + i),
                qualifying_days: vec![],
            })
            .collect();
        let (a, _) = assign_index_dates(&outcomes, OutcomeKind::SuddenDeathComposite, 7).unwrap();
        let (b, _) = assign_index_dates(&outcomes, OutcomeKind::SuddenDeathComposite, 7).unwrap();
        assert_eq!(a, b);
        for label in &a {
            let offset = label.event_day.unwrap() - label.index_day;
            assert!((0..=180).contains(&offset));
        }
    }

    #[test]
    fn index_dates_do_not_depend_on_input_order() {
        let mut outcomes: Vec<RawOutcome> = (0..20)
            .map(|i| RawOutcome {
                subject_id: format!("s{i:03}"),
                span: (0, 2000),
                event_day: Some(1000),
                qualifying_days: vec![],
            })
            .collect();
        let (mut a, _) =
            assign_index_dates(&outcomes, OutcomeKind::SuddenDeathComposite, 3).unwrap();
        outcomes.reverse();
        let (mut b, _) =
            assign_index_dates(&outcomes, OutcomeKind::SuddenDeathComposite, 3).unwrap();
        a.sort_by(|x, y| x.subject_id.cmp(&y.subject_id));
        b.sort_by(|x, y| x.subject_id.cmp(&y.subject_id));
        assert_eq!(a, b);
    }

    #[test]
    fn event_offsets_are_uniform() {
        // Chi-square goodness of fit over the 181 possible offsets for 20k
        // event subjects. Critical value for 180 degrees of freedom at the
        // 0.01 level is 227.06.
        let outcomes: Vec<RawOutcome> = (0..20_000)
            .map(|i| RawOutcome {
                subject_id: format!("s{i:05}"),
                span: (0, 3000),
                event_day: Some(1500),
                qualifying_days: vec![],
            })
            .collect();
        let (labels, _) =
            assign_index_dates(&outcomes, OutcomeKind::SuddenDeathComposite, 11).unwrap();
        let mut counts = [0usize; 181];
        for label in &labels {
            let offset = (label.event_day.unwrap() - label.index_day) as usize;
            counts[offset] += 1;
        }
        let expected = labels.len() as f64 / 181.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(chi2 < 227.06, "chi-square statistic too large: {chi2}");
    }

    #[test]
    fn control_subjects_avoid_qualifying_windows() {
        let outcomes = vec![RawOutcome {
            subject_id: "c1".to_string(),
            span: (0, 1200),
            event_day: None,
            qualifying_days: vec![800],
        }];
        for seed in 0..20 {
            let (labels, _) =
                assign_index_dates(&outcomes, OutcomeKind::SuddenDeathComposite, seed).unwrap();
            let index = labels[0].index_day;
            assert!((365..=1020).contains(&index));
            assert!(!(index < 800 && 800 <= index + 180), "index {index} overlaps");
        }
    }

    #[test]
    fn control_without_window_is_excluded() {
        let outcomes = vec![RawOutcome {
            subject_id: "c1".to_string(),
            span: (0, 400),
            event_day: None,
            qualifying_days: vec![],
        }];
        let (labels, report) =
            assign_index_dates(&outcomes, OutcomeKind::SuddenDeathComposite, 0).unwrap();
        assert!(labels.is_empty());
        assert_eq!(report.excluded.len(), 1);
        assert_eq!(report.excluded[0].subject_id, "c1");
    }

    fn cohort_with_terminal_marker(kind: OutcomeKind) -> Cohort {
        let events = vec![
            hosp("s1", 700, "C34"),
            hosp("s1", 900, "I21"),
            hosp("s2", 900, "I21"),
        ];
        let labels = vec![
            OutcomeLabel {
                subject_id: "s1".to_string(),
                outcome_kind: kind,
                label: LabelClass::Event,
                index_day: 950,
                event_day: Some(1000),
            },
            OutcomeLabel {
                subject_id: "s2".to_string(),
                outcome_kind: kind,
                label: LabelClass::Event,
                index_day: 950,
                event_day: Some(1000),
            },
        ];
        Cohort::new(events, labels)
    }

    #[test]
    fn terminal_marker_excludes_sudden_death_subject() {
        let cohort = cohort_with_terminal_marker(OutcomeKind::SuddenDeathComposite);
        let (filtered, report) =
            filter_terminal_illness(&cohort, &["C34".to_string()]).unwrap();
        assert_eq!(filtered.labels.len(), 1);
        assert_eq!(filtered.labels[0].subject_id, "s2");
        assert_eq!(report.excluded.len(), 1);
    }

    #[test]
    fn terminal_marker_retained_under_all_cause() {
        let cohort = cohort_with_terminal_marker(OutcomeKind::AllCauseMortality);
        let (filtered, report) =
            filter_terminal_illness(&cohort, &["C34".to_string()]).unwrap();
        assert_eq!(filtered.labels.len(), 2);
        assert!(report.excluded.is_empty());
    }

    #[test]
    fn empty_prefix_list_is_identity_for_all_cause() {
        let cohort = cohort_with_terminal_marker(OutcomeKind::AllCauseMortality);
        let (filtered, _) = filter_terminal_illness(&cohort, &[]).unwrap();
        assert_eq!(filtered, cohort);
    }

    #[test]
    fn terminal_filter_is_idempotent() {
        let cohort = cohort_with_terminal_marker(OutcomeKind::SuddenDeathComposite);
        let prefixes = vec!["C34".to_string()];
        let (once, _) = filter_terminal_illness(&cohort, &prefixes).unwrap();
        let (twice, _) = filter_terminal_illness(&once, &prefixes).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn cohort_validation_catches_duplicates_and_orphans() {
        let events = vec![hosp("s1", 100, "I50")];
        let dup = Cohort::new(
            events.clone(),
            vec![
                OutcomeLabel {
                    subject_id: "s1".to_string(),
                    outcome_kind: OutcomeKind::SuddenDeathComposite,
                    label: LabelClass::Control,
                    index_day: 500,
                    event_day: None,
                },
                OutcomeLabel {
                    subject_id: "s1".to_string(),
                    outcome_kind: OutcomeKind::SuddenDeathComposite,
                    label: LabelClass::Control,
                    index_day: 600,
                    event_day: None,
                },
            ],
        );
        assert!(dup.validate().is_err());

        let orphan = Cohort::new(
            vec![],
            vec![OutcomeLabel {
                subject_id: "ghost".to_string(),
                outcome_kind: OutcomeKind::AllCauseMortality,
                label: LabelClass::Control,
                index_day: 500,
                event_day: None,
            }],
        );
        assert!(orphan.validate().is_err());
    }
}
