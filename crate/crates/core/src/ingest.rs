//! Cleaning rules that turn raw tabular extracts into normalized events.
//!
//! Lab rows are matched case-insensitively against an alias table, converted
//! to canonical units, and range-checked against biologically possible
//! bounds; out-of-range or unconvertible values are demoted to "test taken"
//! markers. Diagnosis and prescription codes are truncated to coarse
//! prefixes, and chained hospital transfers collapse into single stays.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ehr::{EventRecord, FeatureFamily};
use crate::error::{CoreError, Result};

/// Canonical name for lab rows whose test name matches no rule.
pub const OTHER_LAB: &str = "other";

/// Cleaning rule for one canonical blood test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabCleaningRule {
    pub canonical_name: String,
    /// Typos, synonyms and abbreviations, matched case-insensitively.
    pub aliases: Vec<String>,
    /// Unit string -> multiplicative factor to the canonical unit. The
    /// canonical unit itself must map to 1.
    pub unit_conversions: BTreeMap<String, f64>,
    pub canonical_unit: String,
    /// Minimum biologically possible value, in canonical units.
    pub bio_min: f64,
    /// Maximum biologically possible value, in canonical units.
    pub bio_max: f64,
}

impl LabCleaningRule {
    pub fn validate(&self) -> Result<()> {
        if self.canonical_name.is_empty() {
            return Err(CoreError::config("lab rule with empty canonical name"));
        }
        if self.aliases.is_empty() {
            return Err(CoreError::config(format!(
                "lab rule {:?} must list at least one alias",
                self.canonical_name
            )));
        }
        if !(self.bio_min < self.bio_max) {
            return Err(CoreError::config(format!(
                "lab rule {:?}: bio_min must be below bio_max",
                self.canonical_name
            )));
        }
        match self.unit_conversions.get(&self.canonical_unit) {
            Some(&f) if f == 1.0 => Ok(()),
            _ => Err(CoreError::config(format!(
                "lab rule {:?}: canonical unit {:?} must convert with factor 1",
                self.canonical_name, self.canonical_unit
            ))),
        }
    }
}

/// One raw lab row as extracted from the source table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawLabRow {
    pub subject_id: String,
    pub day: i64,
    pub name: String,
    pub value: Option<f64>,
    pub unit: Option<String>,
}

/// Per-rule cleaning counters.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LabRuleCounts {
    pub matched_rows: usize,
    pub unit_converted: usize,
    pub value_out_of_range: usize,
    pub unknown_unit: usize,
    pub missing_value: usize,
    /// Values equal to zero that were kept; zero sometimes encodes missing
    /// data upstream, so these are flagged rather than corrected.
    pub zero_values_kept: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CleaningReport {
    pub per_rule: BTreeMap<String, LabRuleCounts>,
    pub unmatched_rows: usize,
    pub rejected_rows: usize,
}

/// Matches raw lab rows against the rule table and emits marker and value
/// events. Every matched row yields a `BloodTestMarker`; a `BloodTestValue`
/// follows only when the value converts to canonical units and sits inside
/// the biological range. Unmatched names collapse to the `other` marker.
pub fn clean_lab_rows(
    rows: &[RawLabRow],
    rules: &[LabCleaningRule],
) -> Result<(Vec<EventRecord>, CleaningReport)> {
    for rule in rules {
        rule.validate()?;
    }
    // alias (lowercase) -> rule index
    let mut alias_index: BTreeMap<String, usize> = BTreeMap::new();
    for (i, rule) in rules.iter().enumerate() {
        alias_index.insert(rule.canonical_name.to_lowercase(), i);
        for alias in &rule.aliases {
            alias_index.insert(alias.to_lowercase(), i);
        }
    }
    let mut events = Vec::new();
    let mut report = CleaningReport::default();
    for rule in rules {
        report
            .per_rule
            .insert(rule.canonical_name.clone(), LabRuleCounts::default());
    }
    for row in rows {
        let Some(&rule_idx) = alias_index.get(&row.name.to_lowercase()) else {
            report.unmatched_rows += 1;
            events.push(EventRecord::new(
                row.subject_id.clone(),
                row.day,
                FeatureFamily::BloodTestMarker,
                OTHER_LAB,
            ));
            continue;
        };
        let rule = &rules[rule_idx];
        let counts = report.per_rule.get_mut(&rule.canonical_name).expect("rule");
        counts.matched_rows += 1;
        events.push(EventRecord::new(
            row.subject_id.clone(),
            row.day,
            FeatureFamily::BloodTestMarker,
            rule.canonical_name.clone(),
        ));
        let Some(raw_value) = row.value else {
            counts.missing_value += 1;
            continue;
        };
        let factor = match &row.unit {
            None => 1.0,
            Some(unit) => match rule.unit_conversions.get(unit) {
                Some(&f) => {
                    if f != 1.0 {
                        counts.unit_converted += 1;
                    }
                    f
                }
                None => {
                    counts.unknown_unit += 1;
                    continue;
                }
            },
        };
        let value = raw_value * factor;
        if !value.is_finite() || value < rule.bio_min || value > rule.bio_max {
            counts.value_out_of_range += 1;
            continue;
        }
        if value == 0.0 {
            counts.zero_values_kept += 1;
        }
        events.push(
            EventRecord::new(
                row.subject_id.clone(),
                row.day,
                FeatureFamily::BloodTestValue,
                rule.canonical_name.clone(),
            )
            .with_value(value)
            .with_unit(rule.canonical_unit.clone()),
        );
    }
    Ok((events, report))
}

/// Truncates an ICD-10 code to its leading letter plus three digits, with
/// the dot removed; shorter codes pass through unchanged.
pub fn truncate_icd10(code: &str) -> Result<String> {
    if code.is_empty() {
        return Err(CoreError::validation("empty ICD-10 code"));
    }
    let stripped: String = code.chars().filter(|&c| c != '.').collect();
    Ok(stripped.chars().take(4).collect())
}

/// Truncates a BNF code to its first four characters (chapter + section).
pub fn truncate_bnf(code: &str) -> Result<String> {
    truncate_bnf_at(code, 4)
}

/// BNF truncation with a configurable cut length (4..=6 is sensible).
pub fn truncate_bnf_at(code: &str, cut: usize) -> Result<String> {
    if code.is_empty() {
        return Err(CoreError::validation("empty BNF code"));
    }
    Ok(code.chars().take(cut).collect())
}

/// One raw admission row; chained transfers will be merged.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissionRow {
    pub subject_id: String,
    pub admit_day: i64,
    pub discharge_day: i64,
    /// Diagnosis codes in recorded order.
    pub diagnoses: Vec<String>,
}

/// One merged hospital stay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HospitalStay {
    pub subject_id: String,
    pub admit_day: i64,
    pub discharge_day: i64,
    /// Primary and secondary diagnoses of the final segment (at most two).
    pub diagnoses: Vec<String>,
}

/// Collapses chained transfers (next admission on or before the previous
/// discharge) into single stays. The merged stay keeps the first admission
/// day, the last discharge day, and the last segment's first two diagnoses.
pub fn merge_transfers(
    rows: &[AdmissionRow],
) -> Result<(Vec<HospitalStay>, CleaningReport)> {
    let mut report = CleaningReport::default();
    let mut by_subject: BTreeMap<&str, Vec<&AdmissionRow>> = BTreeMap::new();
    for row in rows {
        if row.discharge_day < row.admit_day {
            report.rejected_rows += 1;
            continue;
        }
        by_subject.entry(row.subject_id.as_str()).or_default().push(row);
    }
    let mut stays = Vec::new();
    for (subject, mut segs) in by_subject {
        segs.sort_by_key(|r| (r.admit_day, r.discharge_day));
        let mut current: Option<HospitalStay> = None;
        for seg in segs {
            match current.as_mut() {
                Some(stay) if seg.admit_day <= stay.discharge_day => {
                    stay.discharge_day = stay.discharge_day.max(seg.discharge_day);
                    stay.diagnoses = seg.diagnoses.iter().take(2).cloned().collect();
                }
                _ => {
                    if let Some(done) = current.take() {
                        stays.push(done);
                    }
                    current = Some(HospitalStay {
                        subject_id: subject.to_string(),
                        admit_day: seg.admit_day,
                        discharge_day: seg.discharge_day,
                        diagnoses: seg.diagnoses.iter().take(2).cloned().collect(),
                    });
                }
            }
        }
        if let Some(done) = current.take() {
            stays.push(done);
        }
    }
    Ok((stays, report))
}

/// Days between discharge and admission; same-day visits count as zero.
pub fn length_of_stay(stay: &HospitalStay) -> Result<i64> {
    if stay.discharge_day < stay.admit_day {
        return Err(CoreError::validation(format!(
            "stay for {:?} discharges before admission",
            stay.subject_id
        )));
    }
    Ok(stay.discharge_day - stay.admit_day)
}

/// One hospitalisation event per retained diagnosis, dated at admission and
/// carrying the truncated ICD-10 token.
pub fn hospitalisation_events(stays: &[HospitalStay]) -> Result<Vec<EventRecord>> {
    let mut events = Vec::new();
    for stay in stays {
        for code in &stay.diagnoses {
            events.push(EventRecord::new(
                stay.subject_id.clone(),
                stay.admit_day,
                FeatureFamily::Hospitalisation,
                truncate_icd10(code)?,
            ));
        }
    }
    Ok(events)
}
