//! File formats: the event and label schemas, rule tables, importance and
//! score files, and delimited report tables. Every writer is deterministic
//! so reruns produce byte-identical artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use concord_core::ehr::{
    Cohort, EventRecord, EventSubtype, FeatureFamily, LabelClass, OutcomeKind, OutcomeLabel,
};
use concord_core::encode::FeatureVocabulary;
use concord_core::ingest::LabCleaningRule;
use concord_core::synth::GroundTruth;

use crate::error::{CliError, Result};

pub const EVENTS_HEADER: &str = "subject_id,event_day,family,code,value,unit";
pub const LABELS_HEADER: &str = "subject_id,outcome_kind,label,index_day,event_day";

/// Writes events in the pinned schema; empty value/unit fields permitted.
pub fn write_events(path: &Path, events: &[EventRecord]) -> Result<()> {
    let mut out = String::with_capacity(events.len() * 24);
    out.push_str(EVENTS_HEADER);
    out.push('\n');
    for e in events {
        let value = e.value.map(|v| v.to_string()).unwrap_or_default();
        let unit = e.unit.clone().unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.subject_id,
            e.event_day,
            e.family.tag(),
            e.code,
            value,
            unit
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_events(path: &Path) -> Result<Vec<EventRecord>> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = BufReader::new(file).lines();
    let header = reader
        .next()
        .ok_or_else(|| CliError::usage("events file is empty"))??;
    if header != EVENTS_HEADER {
        return Err(CliError::usage(format!(
            "events header must be {EVENTS_HEADER:?}, got {header:?}"
        )));
    }
    let mut events = Vec::new();
    for (lineno, line) in reader.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(CliError::usage(format!(
                "events line {}: expected 6 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let value = if fields[4].is_empty() {
            None
        } else {
            Some(fields[4].parse::<f64>().map_err(|e| {
                CliError::usage(format!("events line {}: bad value: {e}", lineno + 2))
            })?)
        };
        let mut event = EventRecord::new(
            fields[0],
            fields[1].parse::<i64>().map_err(|e| {
                CliError::usage(format!("events line {}: bad day: {e}", lineno + 2))
            })?,
            FeatureFamily::from_tag(fields[2])?,
            fields[3],
        );
        event.value = value;
        if !fields[5].is_empty() {
            event.unit = Some(fields[5].to_string());
        }
        events.push(event);
    }
    Ok(events)
}

pub fn write_labels(path: &Path, labels: &[OutcomeLabel]) -> Result<()> {
    let mut out = String::new();
    out.push_str(LABELS_HEADER);
    out.push('\n');
    for l in labels {
        let event_day = l.event_day.map(|d| d.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            l.subject_id,
            l.outcome_kind.tag(),
            l.label.tag(),
            l.index_day,
            event_day
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<Vec<OutcomeLabel>> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = BufReader::new(file).lines();
    let header = reader
        .next()
        .ok_or_else(|| CliError::usage("labels file is empty"))??;
    if header != LABELS_HEADER {
        return Err(CliError::usage(format!(
            "labels header must be {LABELS_HEADER:?}, got {header:?}"
        )));
    }
    let mut labels = Vec::new();
    for (lineno, line) in reader.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(CliError::usage(format!(
                "labels line {}: expected 5 fields",
                lineno + 2
            )));
        }
        labels.push(OutcomeLabel {
            subject_id: fields[0].to_string(),
            outcome_kind: OutcomeKind::from_tag(fields[1])?,
            label: LabelClass::from_tag(fields[2])?,
            index_day: fields[3].parse::<i64>().map_err(|e| {
                CliError::usage(format!("labels line {}: bad index day: {e}", lineno + 2))
            })?,
            event_day: if fields[4].is_empty() {
                None
            } else {
                Some(fields[4].parse::<i64>().map_err(|e| {
                    CliError::usage(format!("labels line {}: bad event day: {e}", lineno + 2))
                })?)
            },
        });
    }
    Ok(labels)
}

pub fn read_cohort(events: &Path, labels: &Path) -> Result<Cohort> {
    let cohort = Cohort::new(read_events(events)?, read_labels(labels)?);
    cohort.validate()?;
    Ok(cohort)
}

pub fn write_ground_truth(path: &Path, truth: &GroundTruth) -> Result<()> {
    let json = serde_json::to_string_pretty(truth)?;
    fs::write(path, json + "\n")?;
    Ok(())
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Sub-label tags per subject (sorted subject order): ground-truth event
/// subtypes when available, otherwise event/control from the labels.
pub fn sublabel_tags(
    cohort: &Cohort,
    kind: OutcomeKind,
    truth: Option<&GroundTruth>,
) -> Vec<String> {
    cohort
        .labels_for(kind)
        .iter()
        .map(|l| match truth.and_then(|t| t.sublabels.get(&l.subject_id)) {
            Some(subtype) => subtype.tag().to_string(),
            None => match l.label {
                LabelClass::Event => "event".to_string(),
                LabelClass::Control => EventSubtype::NoEvent.tag().to_string(),
            },
        })
        .collect()
}

#[derive(Debug, serde::Deserialize)]
struct RuleFile {
    rule: Vec<LabCleaningRule>,
}

/// Lab cleaning rules from a TOML table array (`[[rule]]` blocks).
pub fn read_rules(path: &Path) -> Result<Vec<LabCleaningRule>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let parsed: RuleFile = toml::from_str(&text)?;
    Ok(parsed.rule)
}

pub fn write_vocabulary(path: &Path, vocab: &FeatureVocabulary) -> Result<()> {
    let mut buf = Vec::new();
    vocab.write_to(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_vocabulary(path: &Path, kind: OutcomeKind) -> Result<FeatureVocabulary> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))?;
    Ok(FeatureVocabulary::read_from(
        &mut BufReader::new(file),
        kind,
    )?)
}

/// One `token score` line per feature, vocabulary order, shortest
/// round-trip decimals.
pub fn write_importance(path: &Path, tokens: &[&str], scores: &[f64]) -> Result<()> {
    let mut out = String::new();
    for (token, score) in tokens.iter().zip(scores) {
        out.push_str(&format!("{token} {score}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_importance(path: &Path) -> Result<Vec<(String, f64)>> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (token, score) = line
            .rsplit_once(' ')
            .ok_or_else(|| CliError::usage(format!("bad importance line {line:?}")))?;
        out.push((
            token.to_string(),
            score
                .parse::<f64>()
                .map_err(|e| CliError::usage(format!("bad importance score: {e}")))?,
        ));
    }
    Ok(out)
}

/// External predictor scores: `subject_id score` lines.
pub fn read_scores(path: &Path) -> Result<BTreeMap<String, f64>> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (subject, score) = line
            .rsplit_once(' ')
            .ok_or_else(|| CliError::usage(format!("bad scores line {line:?}")))?;
        out.insert(
            subject.to_string(),
            score
                .parse::<f64>()
                .map_err(|e| CliError::usage(format!("bad score: {e}")))?,
        );
    }
    Ok(out)
}

/// Cluster assignments: `token cluster_id` lines in vocabulary order.
pub fn write_clusters(path: &Path, tokens: &[&str], labels: &[usize]) -> Result<()> {
    let mut out = String::new();
    for (token, label) in tokens.iter().zip(labels) {
        out.push_str(&format!("{token} {label}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_clusters(path: &Path) -> Result<BTreeMap<String, usize>> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (token, label) = line
            .rsplit_once(' ')
            .ok_or_else(|| CliError::usage(format!("bad cluster line {line:?}")))?;
        out.insert(
            token.to_string(),
            label
                .parse::<usize>()
                .map_err(|e| CliError::usage(format!("bad cluster id: {e}")))?,
        );
    }
    Ok(out)
}

pub fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut out = String::new();
    for line in lines {
        out.push_str(line);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if !line.is_empty() {
            out.push(line);
        }
    }
    Ok(out)
}

/// CSV-ish table with a fixed header; cells must not contain commas.
pub fn write_table(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)?;
    Ok(())
}

/// Writes sentences as `subject_id<TAB>token token ...` lines.
pub fn write_sentences(path: &Path, docs: &[concord_core::encode::SentenceDoc]) -> Result<()> {
    let mut out = String::new();
    for doc in docs {
        out.push_str(&doc.subject_id);
        out.push('\t');
        out.push_str(&doc.tokens.join(" "));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn sha256_hex(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(hex)
}

/// Fixed-precision float for report tables.
pub fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

#[allow(dead_code)]
pub fn writeln_to(w: &mut impl Write, line: &str) -> Result<()> {
    writeln!(w, "{line}")?;
    Ok(())
}
