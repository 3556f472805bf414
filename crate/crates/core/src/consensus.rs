//! Rank-biased overlap and model-agreement analysis.
//!
//! RBO scores the similarity of two rankings with geometrically decaying
//! weight down the list, so agreement near the head counts most:
//!
//! ```text
//! RBO(S, T, p, k) = (X_k / k) p^k + ((1 - p) / p) * sum_{d=1..k} (X_d / d) p^d
//! ```
//!
//! where `X_d` is the overlap of the depth-`d` prefixes. The clustered
//! variant first replaces every feature by its cluster id (keeping first
//! occurrences only), which credits models for agreeing on groups of
//! interchangeable, correlated features even when they order members
//! differently.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Persistence and evaluation depth for RBO.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RboParams {
    /// Head-weighting persistence in (0, 1).
    pub p: f64,
    /// Evaluation depth; `None` means the full common length.
    pub depth: Option<usize>,
}

impl Default for RboParams {
    fn default() -> Self {
        RboParams {
            p: 0.9,
            depth: None,
        }
    }
}

impl RboParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.p && self.p < 1.0) {
            return Err(CoreError::config("persistence p must lie in (0, 1)"));
        }
        if self.depth == Some(0) {
            return Err(CoreError::config("evaluation depth must be at least 1"));
        }
        Ok(())
    }
}

/// Rank-biased overlap of two ranked lists at depth `k`.
pub fn rbo<T: Eq + Hash>(s: &[T], t: &[T], params: &RboParams) -> Result<f64> {
    params.validate()?;
    if s.is_empty() || t.is_empty() {
        return Err(CoreError::validation("ranked lists must be non-empty"));
    }
    let k_max = s.len().min(t.len());
    let k = match params.depth {
        Some(depth) => {
            if depth > k_max {
                return Err(CoreError::validation(format!(
                    "depth {depth} exceeds the shorter list length {k_max}"
                )));
            }
            depth
        }
        None => k_max,
    };
    let p = params.p;
    // identical prefixes telescope to exactly one; return the exact value
    // rather than accumulating its floating-point image
    if s[..k].iter().zip(&t[..k]).all(|(a, b)| a == b) {
        return Ok(1.0);
    }
    let mut seen_s: HashSet<&T> = HashSet::with_capacity(k);
    let mut seen_t: HashSet<&T> = HashSet::with_capacity(k);
    let mut overlap = 0usize;
    let mut tail_sum = 0.0;
    let mut p_pow = 1.0;
    let mut x_k = 0usize;
    for d in 1..=k {
        let item_s = &s[d - 1];
        let item_t = &t[d - 1];
        if item_s == item_t {
            overlap += 1;
        } else {
            if seen_t.contains(item_s) {
                overlap += 1;
            }
            if seen_s.contains(item_t) {
                overlap += 1;
            }
            seen_s.insert(item_s);
            seen_t.insert(item_t);
        }
        p_pow *= p;
        tail_sum += (overlap as f64 / d as f64) * p_pow;
        x_k = overlap;
    }
    Ok((x_k as f64 / k as f64) * p_pow + ((1.0 - p) / p) * tail_sum)
}

/// Replaces each feature by its cluster id and keeps the first occurrence
/// of every cluster (order-of-first-appearance semantics).
pub fn cluster_rank(ranked: &[usize], feature_labels: &[usize]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    for &feature in ranked {
        let label = *feature_labels.get(feature).ok_or_else(|| {
            CoreError::validation(format!("feature {feature} has no cluster label"))
        })?;
        if seen.insert(label) {
            out.push(label);
        }
    }
    Ok(out)
}

/// RBO between cluster-level rankings, evaluated at the shorter deduped
/// length.
pub fn clustered_rbo(
    s: &[usize],
    t: &[usize],
    feature_labels: &[usize],
    params: &RboParams,
) -> Result<f64> {
    let cs = cluster_rank(s, feature_labels)?;
    let ct = cluster_rank(t, feature_labels)?;
    let depth = cs.len().min(ct.len());
    let clipped = RboParams {
        p: params.p,
        depth: Some(depth.min(params.depth.unwrap_or(depth)).max(1)),
    };
    rbo(&cs, &ct, &clipped)
}

/// One model's ranking as an ordered token list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRanking {
    pub name: String,
    /// Feature tokens, most important first.
    pub tokens: Vec<String>,
}

/// Symmetric pairwise agreement with unit diagonal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgreementMatrix {
    pub model_names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl AgreementMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.model_names.iter().position(|n| n == a)?;
        let j = self.model_names.iter().position(|n| n == b)?;
        Some(self.values[i][j])
    }

    /// Mean of the strict upper triangle.
    pub fn mean_off_diagonal(&self) -> f64 {
        let n = self.model_names.len();
        if n < 2 {
            return 1.0;
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for i in 0..n {
            for j in (i + 1)..n {
                total += self.values[i][j];
                count += 1;
            }
        }
        total / count as f64
    }
}

fn check_shared_vocabulary(rankings: &[ModelRanking]) -> Result<Vec<BTreeMap<&str, usize>>> {
    let reference: BTreeSet<&str> = rankings[0].tokens.iter().map(|t| t.as_str()).collect();
    let mut maps = Vec::with_capacity(rankings.len());
    for ranking in rankings {
        let this: BTreeSet<&str> = ranking.tokens.iter().map(|t| t.as_str()).collect();
        if this.len() != ranking.tokens.len() {
            return Err(CoreError::validation(format!(
                "ranking {:?} repeats tokens",
                ranking.name
            )));
        }
        if this != reference {
            let missing: Vec<&&str> = reference.difference(&this).take(5).collect();
            let extra: Vec<&&str> = this.difference(&reference).take(5).collect();
            return Err(CoreError::validation(format!(
                "ranking {:?} is over a different vocabulary (missing {missing:?}, extra {extra:?})",
                ranking.name
            )));
        }
        maps.push(
            ranking
                .tokens
                .iter()
                .enumerate()
                .map(|(i, t)| (t.as_str(), i))
                .collect(),
        );
    }
    Ok(maps)
}

fn token_indices(ranking: &ModelRanking, index_of: &BTreeMap<&str, usize>) -> Vec<usize> {
    ranking
        .tokens
        .iter()
        .map(|t| index_of[t.as_str()])
        .collect()
}

/// Pairwise raw RBO, plus the clustered variant when feature labels are
/// supplied (token -> cluster id). All rankings must cover the same
/// vocabulary.
pub fn agreement_matrices(
    rankings: &[ModelRanking],
    feature_labels: Option<&BTreeMap<String, usize>>,
    params: &RboParams,
) -> Result<(AgreementMatrix, Option<AgreementMatrix>)> {
    if rankings.len() < 2 {
        return Err(CoreError::validation(
            "agreement needs at least two model rankings",
        ));
    }
    check_shared_vocabulary(rankings)?;
    // shared index space: the first ranking's token order
    let vocab: Vec<&str> = rankings[0].tokens.iter().map(|t| t.as_str()).collect();
    let index_of: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let as_indices: Vec<Vec<usize>> = rankings
        .iter()
        .map(|r| token_indices(r, &index_of))
        .collect();
    let labels: Option<Vec<usize>> = match feature_labels {
        Some(map) => {
            let mut out = Vec::with_capacity(vocab.len());
            for &token in &vocab {
                let label = map.get(token).ok_or_else(|| {
                    CoreError::validation(format!("token {token:?} has no cluster label"))
                })?;
                out.push(*label);
            }
            Some(out)
        }
        None => None,
    };
    let n = rankings.len();
    let names: Vec<String> = rankings.iter().map(|r| r.name.clone()).collect();
    let mut raw = vec![vec![1.0; n]; n];
    let mut clustered = labels.as_ref().map(|_| vec![vec![1.0; n]; n]);
    for i in 0..n {
        for j in (i + 1)..n {
            let score = rbo(&as_indices[i], &as_indices[j], params)?;
            raw[i][j] = score;
            raw[j][i] = score;
            if let (Some(matrix), Some(labels)) = (clustered.as_mut(), labels.as_ref()) {
                let cscore = clustered_rbo(&as_indices[i], &as_indices[j], labels, params)?;
                matrix[i][j] = cscore;
                matrix[j][i] = cscore;
            }
        }
    }
    Ok((
        AgreementMatrix {
            model_names: names.clone(),
            values: raw,
        },
        clustered.map(|values| AgreementMatrix {
            model_names: names,
            values,
        }),
    ))
}

/// Clustered RBO between one model's rankings under two outcomes,
/// restricted to the intersection vocabulary. Tokens unique to one outcome
/// are reported back, not padded in.
pub fn cross_outcome_agreement(
    first: &ModelRanking,
    second: &ModelRanking,
    feature_labels: &BTreeMap<String, usize>,
    params: &RboParams,
) -> Result<(f64, usize)> {
    let vocab_a: BTreeSet<&str> = first.tokens.iter().map(|t| t.as_str()).collect();
    let vocab_b: BTreeSet<&str> = second.tokens.iter().map(|t| t.as_str()).collect();
    let shared: BTreeSet<&str> = vocab_a.intersection(&vocab_b).copied().collect();
    if shared.is_empty() {
        return Err(CoreError::validation(
            "the two outcomes share no vocabulary",
        ));
    }
    let filtered_a: Vec<&str> = first
        .tokens
        .iter()
        .map(|t| t.as_str())
        .filter(|t| shared.contains(t))
        .collect();
    let filtered_b: Vec<&str> = second
        .tokens
        .iter()
        .map(|t| t.as_str())
        .filter(|t| shared.contains(t))
        .collect();
    let index_of: BTreeMap<&str, usize> = filtered_a
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, i))
        .collect();
    let mut labels = Vec::with_capacity(filtered_a.len());
    for &token in &filtered_a {
        let label = feature_labels.get(token).ok_or_else(|| {
            CoreError::validation(format!("token {token:?} has no cluster label"))
        })?;
        labels.push(*label);
    }
    let ranked_a: Vec<usize> = filtered_a.iter().map(|&t| index_of[t]).collect();
    let ranked_b: Vec<usize> = filtered_b.iter().map(|&t| index_of[t]).collect();
    let score = clustered_rbo(&ranked_a, &ranked_b, &labels, params)?;
    Ok((score, shared.len()))
}

/// One row of the top-k table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopFeature {
    pub rank: usize,
    pub token: String,
    pub family: String,
}

/// Top-k features per model with family annotations.
pub fn top_k_table(
    rankings: &[ModelRanking],
    k: usize,
    family_of: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, Vec<TopFeature>>> {
    if k == 0 {
        return Err(CoreError::config("k must be at least 1"));
    }
    let mut out = BTreeMap::new();
    for ranking in rankings {
        let rows: Result<Vec<TopFeature>> = ranking
            .tokens
            .iter()
            .take(k)
            .enumerate()
            .map(|(i, token)| {
                let family = family_of.get(token).ok_or_else(|| {
                    CoreError::validation(format!("token {token:?} has no family tag"))
                })?;
                Ok(TopFeature {
                    rank: i + 1,
                    token: token.clone(),
                    family: family.clone(),
                })
            })
            .collect();
        out.insert(ranking.name.clone(), rows?);
    }
    Ok(out)
}
