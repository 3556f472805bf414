//! Vocabularies and the two data representations.
//!
//! Events inside the year before index are binned into seven 60-day
//! intervals (bin 0 most recent; the last bin covers days 360-364, day 365
//! and beyond are excluded). The same feature set backs both
//! representations: a sparse `(subject, feature, bin, value)` tensor and a
//! token sentence per subject. Static features (demographics and history
//! flags) are replicated across all bins in the tensor and appear once as a
//! sentence suffix.
//!
//! Feature tokens carry family prefixes: `h_` hospitalisation, `m_`
//! prescription, `t_` test marker, `tv_` test value, `hist_` history flag.
//! Sex is encoded as a categorical token (`sex_f` / `sex_m`); age enters the
//! sentence as the presence token `age` while its numeric value lives only
//! in the tensor.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::ehr::{Cohort, EventRecord, FeatureFamily, OutcomeKind};
use crate::error::{CoreError, Result};

/// Number of time bins covering the history year.
pub const N_TIME_BINS: usize = 7;

/// Bin width in days.
pub const BIN_WIDTH_DAYS: i64 = 60;

/// Reserved unknown-word token for language encoders.
pub const UNK_TOKEN: &str = "[UNK]";

fn segment_token(bin: usize) -> String {
    format!("segment_{bin}")
}

fn parse_segment_token(token: &str) -> Option<usize> {
    token
        .strip_prefix("segment_")
        .and_then(|x| x.parse::<usize>().ok())
        .filter(|&x| x < N_TIME_BINS)
}

/// Feature token for an event: family prefix plus normalized code.
pub fn event_token(event: &EventRecord) -> String {
    match event.family {
        FeatureFamily::Hospitalisation => format!("h_{}", event.code),
        FeatureFamily::Prescription => format!("m_{}", event.code),
        FeatureFamily::BloodTestMarker => format!("t_{}", event.code),
        FeatureFamily::BloodTestValue => format!("tv_{}", event.code),
        FeatureFamily::HistoryOfDisease => format!("hist_{}", event.code),
        FeatureFamily::Demographic => {
            if event.code == "age" {
                "age".to_string()
            } else {
                event.code.clone()
            }
        }
    }
}

/// Ordered feature tokens with family tags; index positions are stable and
/// shared by every representation built from the same vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVocabulary {
    entries: Vec<(String, FeatureFamily)>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    has_unk: bool,
    pub outcome_kind: OutcomeKind,
}

impl FeatureVocabulary {
    fn build_index(entries: &[(String, FeatureFamily)]) -> HashMap<String, usize> {
        entries
            .iter()
            .enumerate()
            .map(|(i, (token, _))| (token.clone(), i))
            .collect()
    }

    pub fn from_entries(
        entries: Vec<(String, FeatureFamily)>,
        has_unk: bool,
        outcome_kind: OutcomeKind,
    ) -> Self {
        let index = Self::build_index(&entries);
        FeatureVocabulary {
            entries,
            index,
            has_unk,
            outcome_kind,
        }
    }

    /// Number of feature tokens (excluding the `[UNK]` slot).
    pub fn n_features(&self) -> usize {
        self.entries.len()
    }

    /// Vector length for bag-of-words output: features plus the `[UNK]`
    /// slot when present.
    pub fn len(&self) -> usize {
        self.entries.len() + usize::from(self.has_unk)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn has_unk(&self) -> bool {
        self.has_unk
    }

    /// Index of the `[UNK]` slot, when built for language use.
    pub fn unk_index(&self) -> Option<usize> {
        self.has_unk.then_some(self.entries.len())
    }

    /// Reserved padding index for integer encoding (just past the tokens).
    pub fn pad_index(&self) -> usize {
        self.len()
    }

    /// Reserved integer index for a segment marker.
    pub fn marker_index(&self, bin: usize) -> usize {
        self.pad_index() + 1 + bin
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token_at(&self, idx: usize) -> Option<&str> {
        if idx < self.entries.len() {
            Some(self.entries[idx].0.as_str())
        } else if Some(idx) == self.unk_index() {
            Some(UNK_TOKEN)
        } else {
            None
        }
    }

    pub fn family_at(&self, idx: usize) -> Option<FeatureFamily> {
        self.entries.get(idx).map(|(_, f)| *f)
    }

    /// Feature tokens in index order (excluding `[UNK]`).
    pub fn feature_tokens(&self) -> Vec<&str> {
        self.entries.iter().map(|(t, _)| t.as_str()).collect()
    }

    /// Indices of features belonging to any of the given families.
    pub fn indices_for_families(&self, families: &[FeatureFamily]) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, (_, f))| families.contains(f))
            .map(|(i, _)| i)
            .collect()
    }

    /// Whether the feature at `idx` is static (replicated across bins).
    pub fn is_static(&self, idx: usize) -> bool {
        self.family_at(idx).map(|f| f.is_static()).unwrap_or(false)
    }

    /// Writes one token per line; the line number is the index.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        for (token, _) in &self.entries {
            writeln!(w, "{token}")?;
        }
        if self.has_unk {
            writeln!(w, "{UNK_TOKEN}")?;
        }
        Ok(())
    }

    /// Reads a vocabulary file back; family tags are recovered from the
    /// token prefixes.
    pub fn read_from(r: &mut impl BufRead, outcome_kind: OutcomeKind) -> Result<Self> {
        let mut entries = Vec::new();
        let mut has_unk = false;
        for line in r.lines() {
            let token = line.map_err(|e| CoreError::runtime(e.to_string()))?;
            if token.is_empty() {
                continue;
            }
            if token == UNK_TOKEN {
                has_unk = true;
                continue;
            }
            let family = family_from_token(&token)?;
            entries.push((token, family));
        }
        Ok(FeatureVocabulary::from_entries(entries, has_unk, outcome_kind))
    }
}

fn family_from_token(token: &str) -> Result<FeatureFamily> {
    if token.starts_with("hist_") {
        Ok(FeatureFamily::HistoryOfDisease)
    } else if token.starts_with("h_") {
        Ok(FeatureFamily::Hospitalisation)
    } else if token.starts_with("m_") {
        Ok(FeatureFamily::Prescription)
    } else if token.starts_with("tv_") {
        Ok(FeatureFamily::BloodTestValue)
    } else if token.starts_with("t_") {
        Ok(FeatureFamily::BloodTestMarker)
    } else if token == "age" || token.starts_with("sex_") {
        Ok(FeatureFamily::Demographic)
    } else {
        Err(CoreError::validation(format!(
            "cannot infer feature family for token {token:?}"
        )))
    }
}

/// All unique feature tokens of the cohort's labelled subjects, ordered by
/// family then token. `[UNK]` is appended when the vocabulary backs a
/// language encoder.
pub fn build_vocabulary(
    cohort: &Cohort,
    outcome_kind: OutcomeKind,
    for_language: bool,
) -> Result<FeatureVocabulary> {
    let index_days = cohort.index_days(outcome_kind);
    if index_days.is_empty() {
        return Err(CoreError::validation(
            "cannot build a vocabulary from an empty cohort",
        ));
    }
    let mut tokens: BTreeMap<(FeatureFamily, String), ()> = BTreeMap::new();
    for event in &cohort.events {
        let Some(&index_day) = index_days.get(&event.subject_id) else {
            continue;
        };
        if event.family.is_static() {
            if event.event_day > index_day {
                continue;
            }
        } else if bin_index(index_day, event.event_day).is_none() {
            continue;
        }
        tokens.insert((event.family, event_token(event)), ());
    }
    if tokens.is_empty() {
        return Err(CoreError::validation(
            "no encodable events for the requested outcome",
        ));
    }
    let entries: Vec<(String, FeatureFamily)> = tokens
        .into_keys()
        .map(|(family, token)| (token, family))
        .collect();
    Ok(FeatureVocabulary::from_entries(
        entries,
        for_language,
        outcome_kind,
    ))
}

/// Bin index for an event relative to index day: `floor((index - event)/60)`
/// capped to the seven bins; events at or beyond 365 days, or after the
/// index itself, are excluded.
pub fn bin_index(index_day: i64, event_day: i64) -> Option<usize> {
    if event_day > index_day {
        return None;
    }
    let delta = index_day - event_day;
    if delta >= 365 {
        return None;
    }
    Some(((delta / BIN_WIDTH_DAYS) as usize).min(N_TIME_BINS - 1))
}

/// Cohort encoded as (subject, feature, time-bin, value) quadruples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseTemporalTensor {
    pub n_subjects: usize,
    pub n_features: usize,
    pub n_time: usize,
    /// Sorted by (subject, feature, bin); no duplicates.
    pub entries: Vec<(u32, u32, u8, f64)>,
    /// Subject ids in row order.
    pub subject_ids: Vec<String>,
}

impl SparseTemporalTensor {
    /// Fraction of zero cells.
    pub fn sparsity(&self) -> f64 {
        let total = (self.n_subjects * self.n_features * self.n_time) as f64;
        if total == 0.0 {
            return 1.0;
        }
        1.0 - self.entries.len() as f64 / total
    }

    /// Dense subjects x time x features array (GRU input layout).
    pub fn to_dense_temporal(&self) -> Array3<f64> {
        let mut out = Array3::zeros((self.n_subjects, self.n_time, self.n_features));
        for &(i, j, k, v) in &self.entries {
            out[(i as usize, k as usize, j as usize)] = v;
        }
        out
    }

    /// Header line with the dims, then one `i j k v` line per entry with
    /// shortest round-trip decimals.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.n_subjects, self.n_features, self.n_time)?;
        for &(i, j, k, v) in &self.entries {
            writeln!(w, "{i} {j} {k} {v}")?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl BufRead, subject_ids: Vec<String>) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| CoreError::validation("tensor file is empty"))?
            .map_err(|e| CoreError::runtime(e.to_string()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|x| x.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| CoreError::validation(format!("bad tensor header: {e}")))?;
        if dims.len() != 3 {
            return Err(CoreError::validation("tensor header must be three dims"));
        }
        let mut entries = Vec::new();
        for line in lines {
            let line = line.map_err(|e| CoreError::runtime(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(CoreError::validation(format!(
                    "bad tensor entry line: {line:?}"
                )));
            }
            let i: u32 = parts[0]
                .parse()
                .map_err(|e| CoreError::validation(format!("bad entry: {e}")))?;
            let j: u32 = parts[1]
                .parse()
                .map_err(|e| CoreError::validation(format!("bad entry: {e}")))?;
            let k: u8 = parts[2]
                .parse()
                .map_err(|e| CoreError::validation(format!("bad entry: {e}")))?;
            let v: f64 = parts[3]
                .parse()
                .map_err(|e| CoreError::validation(format!("bad entry: {e}")))?;
            entries.push((i, j, k, v));
        }
        if subject_ids.len() != dims[0] {
            return Err(CoreError::validation(format!(
                "tensor lists {} subjects but {} ids were supplied",
                dims[0],
                subject_ids.len()
            )));
        }
        Ok(SparseTemporalTensor {
            n_subjects: dims[0],
            n_features: dims[1],
            n_time: dims[2],
            entries,
            subject_ids,
        })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EncodeReport {
    /// Event tokens missing from the vocabulary, dropped from the tensor.
    pub dropped_tokens: usize,
}

/// Encodes the cohort's labelled subjects as a sparse temporal tensor.
/// Dynamic features carry per-bin event counts; static features carry their
/// latest observed value, replicated identically across all bins.
pub fn encode_sparse(
    cohort: &Cohort,
    vocab: &FeatureVocabulary,
) -> Result<(SparseTemporalTensor, EncodeReport)> {
    let index_days = cohort.index_days(vocab.outcome_kind);
    let subject_ids: Vec<String> = index_days.keys().cloned().collect();
    let row_of: HashMap<&str, usize> = subject_ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut report = EncodeReport::default();
    let mut cells: BTreeMap<(u32, u32, u8), f64> = BTreeMap::new();
    // static token -> (subject row, feature) -> (latest day, value)
    let mut statics: BTreeMap<(u32, u32), (i64, f64)> = BTreeMap::new();
    for event in &cohort.events {
        let Some(&row) = row_of.get(event.subject_id.as_str()) else {
            continue;
        };
        let index_day = index_days[&event.subject_id];
        let token = event_token(event);
        let Some(feature) = vocab.index_of(&token) else {
            if event.family.is_static() || bin_index(index_day, event.event_day).is_some() {
                report.dropped_tokens += 1;
            }
            continue;
        };
        if event.family.is_static() {
            if event.event_day > index_day {
                continue;
            }
            let value = event.value.unwrap_or(1.0);
            let slot = statics.entry((row as u32, feature as u32)).or_insert((
                event.event_day,
                value,
            ));
            if event.event_day >= slot.0 {
                *slot = (event.event_day, value);
            }
        } else if let Some(bin) = bin_index(index_day, event.event_day) {
            *cells
                .entry((row as u32, feature as u32, bin as u8))
                .or_insert(0.0) += 1.0;
        }
    }
    for (&(row, feature), &(_, value)) in &statics {
        for bin in 0..N_TIME_BINS {
            cells.insert((row, feature, bin as u8), value);
        }
    }
    let entries: Vec<(u32, u32, u8, f64)> = cells
        .into_iter()
        .map(|((i, j, k), v)| (i, j, k, v))
        .collect();
    Ok((
        SparseTemporalTensor {
            n_subjects: subject_ids.len(),
            n_features: vocab.n_features(),
            n_time: N_TIME_BINS,
            entries,
            subject_ids,
        },
        report,
    ))
}

/// A subject's history year as an ordered token sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceDoc {
    pub subject_id: String,
    pub tokens: Vec<String>,
}

impl SentenceDoc {
    /// Tokens that are not segment markers.
    pub fn n_word_tokens(&self) -> usize {
        self.tokens
            .iter()
            .filter(|t| parse_segment_token(t).is_none())
            .count()
    }
}

/// Encodes one subject's events as a sentence: segments from most to least
/// recent (markers only for non-empty bins), events within a bin ordered by
/// family then token, then the static suffix (sex, age, history flags).
pub fn encode_sentence(
    subject_id: &str,
    events: &[&EventRecord],
    index_day: i64,
) -> SentenceDoc {
    let mut bins: Vec<Vec<(FeatureFamily, String)>> = vec![Vec::new(); N_TIME_BINS];
    let mut sex_token: Option<String> = None;
    let mut sex_day = i64::MIN;
    let mut has_age = false;
    let mut hist: Vec<String> = Vec::new();
    for event in events {
        if event.family.is_static() {
            if event.event_day > index_day {
                continue;
            }
            match event.family {
                FeatureFamily::Demographic => {
                    if event.code == "age" {
                        has_age = true;
                    } else if event.event_day >= sex_day {
                        sex_day = event.event_day;
                        sex_token = Some(event_token(event));
                    }
                }
                FeatureFamily::HistoryOfDisease => hist.push(event_token(event)),
                _ => unreachable!(),
            }
        } else if let Some(bin) = bin_index(index_day, event.event_day) {
            bins[bin].push((event.family, event_token(event)));
        }
    }
    let mut tokens = Vec::new();
    for (bin, mut bin_tokens) in bins.into_iter().enumerate() {
        if bin_tokens.is_empty() {
            continue;
        }
        bin_tokens.sort();
        tokens.push(segment_token(bin));
        tokens.extend(bin_tokens.into_iter().map(|(_, t)| t));
    }
    if let Some(sex) = sex_token {
        tokens.push(sex);
    }
    if has_age {
        tokens.push("age".to_string());
    }
    hist.sort();
    hist.dedup();
    tokens.extend(hist);
    SentenceDoc {
        subject_id: subject_id.to_string(),
        tokens,
    }
}

/// Sentences for every labelled subject, in subject-id order (matching the
/// tensor's row order).
pub fn encode_sentences(cohort: &Cohort, kind: OutcomeKind) -> Vec<SentenceDoc> {
    let index_days = cohort.index_days(kind);
    let by_subject = cohort.events_by_subject();
    index_days
        .iter()
        .map(|(subject, &index_day)| {
            let events = by_subject
                .get(subject.as_str())
                .map(|v| v.as_slice())
                .unwrap_or(&[]);
            encode_sentence(subject, events, index_day)
        })
        .collect()
}

/// Counts per vocabulary token. Out-of-vocabulary words land in the `[UNK]`
/// slot. Segment markers are skipped by default; with
/// `include_markers = true` their occurrences are tallied into `[UNK]` too
/// (they are not vocabulary entries).
pub fn bow_vectorize(
    doc: &SentenceDoc,
    vocab: &FeatureVocabulary,
    include_markers: bool,
) -> Result<Vec<f64>> {
    let unk = vocab.unk_index().ok_or_else(|| {
        CoreError::validation("bag-of-words vectorization requires a vocabulary with [UNK]")
    })?;
    let mut counts = vec![0.0; vocab.len()];
    for token in &doc.tokens {
        if parse_segment_token(token).is_some() {
            if include_markers {
                counts[unk] += 1.0;
            }
            continue;
        }
        let idx = vocab.index_of(token).unwrap_or(unk);
        counts[idx] += 1.0;
    }
    Ok(counts)
}

/// Bag-of-words matrix for a set of sentences (rows in input order).
pub fn bow_matrix(docs: &[SentenceDoc], vocab: &FeatureVocabulary) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((docs.len(), vocab.len()));
    for (i, doc) in docs.iter().enumerate() {
        let counts = bow_vectorize(doc, vocab, false)?;
        for (j, v) in counts.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

/// Token indices with segment markers mapped to reserved indices, truncated
/// to the `max_len` most recent tokens (the head of the sentence) and
/// right-padded with the pad index.
pub fn int_vectorize(
    doc: &SentenceDoc,
    vocab: &FeatureVocabulary,
    max_len: usize,
) -> Result<Vec<usize>> {
    if max_len == 0 {
        return Err(CoreError::validation("max_len must be at least 1"));
    }
    let unk = vocab.unk_index().ok_or_else(|| {
        CoreError::validation("integer vectorization requires a vocabulary with [UNK]")
    })?;
    let mut out: Vec<usize> = doc
        .tokens
        .iter()
        .map(|token| match parse_segment_token(token) {
            Some(bin) => vocab.marker_index(bin),
            None => vocab.index_of(token).unwrap_or(unk),
        })
        .collect();
    out.truncate(max_len);
    out.resize(max_len, vocab.pad_index());
    Ok(out)
}

/// Inverse of [`int_vectorize`] up to `[UNK]` collapse; pad indices stop the
/// decode.
pub fn int_decode(indices: &[usize], vocab: &FeatureVocabulary) -> Vec<String> {
    let mut out = Vec::new();
    for &idx in indices {
        if idx == vocab.pad_index() {
            break;
        }
        if idx > vocab.pad_index() {
            out.push(segment_token(idx - vocab.pad_index() - 1));
        } else if let Some(token) = vocab.token_at(idx) {
            out.push(token.to_string());
        }
    }
    out
}

/// Removes the time dimension: dynamic features sum over bins, static
/// features keep the most recent (bin 0) value.
pub fn collapse_time(tensor: &SparseTemporalTensor, vocab: &FeatureVocabulary) -> Array2<f64> {
    let mut out = Array2::zeros((tensor.n_subjects, tensor.n_features));
    for &(i, j, k, v) in &tensor.entries {
        let (i, j) = (i as usize, j as usize);
        if vocab.is_static(j) {
            if k == 0 {
                out[(i, j)] = v;
            }
        } else {
            out[(i, j)] += v;
        }
    }
    out
}
