//! Spectral co-clustering of the subjects-by-features matrix, cluster-count
//! selection, bootstrap stability and cluster analytics.
//!
//! The constructive route is bipartite spectral partitioning: scale the
//! matrix by inverse square roots of row and column sums, embed rows and
//! columns jointly through the leading non-trivial singular vector pairs,
//! and partition the embedding with seeded k-means. A repair sweep then
//! iterates the defining fixed-point conditions — every feature must sit
//! with the patient cluster it weighs most into, and symmetrically for
//! patients — until stable, so the output satisfies them by construction.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::consensus::{rbo, RboParams};
use crate::ehr::EventSubtype;
use crate::error::{CoreError, Result};
use crate::rng;

/// Joint assignment of features and subjects to `k` mutually exclusive
/// clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoClusterModel {
    pub k: usize,
    /// Per-feature cluster id in `0..k`.
    pub feature_labels: Vec<usize>,
    /// Per-subject cluster id in `0..k`.
    pub patient_labels: Vec<usize>,
    pub nonempty_feature_clusters: usize,
    pub nonempty_patient_clusters: usize,
    /// False when the repair sweep hit its iteration cap.
    pub converged: bool,
}

fn count_nonempty(labels: &[usize], k: usize) -> usize {
    let mut seen = vec![false; k];
    for &l in labels {
        seen[l] = true;
    }
    seen.iter().filter(|&&s| s).count()
}

/// Seeded k-means with k-means++ initialization and a fixed number of
/// restarts; deterministic given the seed.
fn kmeans(
    points: &Array2<f64>,
    k: usize,
    seed: u64,
    n_init: usize,
    max_iter: usize,
) -> (Vec<usize>, f64, bool) {
    let n = points.nrows();
    let d = points.ncols();
    let dist2 = |a: usize, center: &Array1<f64>| -> f64 {
        let mut acc = 0.0;
        for j in 0..d {
            let diff = points[(a, j)] - center[j];
            acc += diff * diff;
        }
        acc
    };
    let mut best: Option<(Vec<usize>, f64, bool)> = None;
    for init in 0..n_init {
        let mut rng = rng::stream(seed, &[0x4a3a, init as u64]);
        // k-means++ seeding
        let mut centers: Vec<Array1<f64>> = Vec::with_capacity(k);
        centers.push(points.row(rng.gen_range(0..n)).to_owned());
        let mut d2: Vec<f64> = (0..n).map(|i| dist2(i, &centers[0])).collect();
        while centers.len() < k {
            let total: f64 = d2.iter().sum();
            let next = if total <= 0.0 {
                rng.gen_range(0..n)
            } else {
                let mut draw = rng.gen::<f64>() * total;
                let mut pick = n - 1;
                for (i, &w) in d2.iter().enumerate() {
                    draw -= w;
                    if draw <= 0.0 {
                        pick = i;
                        break;
                    }
                }
                pick
            };
            centers.push(points.row(next).to_owned());
            for i in 0..n {
                d2[i] = d2[i].min(dist2(i, centers.last().unwrap()));
            }
        }
        // Lloyd iterations
        let mut labels = vec![0usize; n];
        let mut converged = false;
        for _ in 0..max_iter {
            let mut changed = false;
            for i in 0..n {
                let mut best_c = 0;
                let mut best_d = f64::INFINITY;
                for (c, center) in centers.iter().enumerate() {
                    let dd = dist2(i, center);
                    if dd < best_d {
                        best_d = dd;
                        best_c = c;
                    }
                }
                if labels[i] != best_c {
                    labels[i] = best_c;
                    changed = true;
                }
            }
            let mut sums = vec![Array1::<f64>::zeros(d); k];
            let mut counts = vec![0usize; k];
            for i in 0..n {
                sums[labels[i]] += &points.row(i);
                counts[labels[i]] += 1;
            }
            for c in 0..k {
                if counts[c] > 0 {
                    centers[c] = &sums[c] / counts[c] as f64;
                } else {
                    // reseed an empty cluster at the point farthest from
                    // its current center
                    let far = (0..n)
                        .max_by(|&a, &b| {
                            dist2(a, &centers[labels[a]])
                                .total_cmp(&dist2(b, &centers[labels[b]]))
                        })
                        .unwrap_or(0);
                    centers[c] = points.row(far).to_owned();
                }
            }
            if !changed {
                converged = true;
                break;
            }
        }
        let wcss: f64 = (0..n).map(|i| dist2(i, &centers[labels[i]])).sum();
        let better = match &best {
            None => true,
            Some((_, best_wcss, _)) => wcss < *best_wcss,
        };
        if better {
            best = Some((labels, wcss, converged));
        }
    }
    best.expect("at least one restart")
}

fn validate_input(a: &Array2<f64>, k: usize) -> Result<()> {
    if k < 1 || k > a.nrows().min(a.ncols()) {
        return Err(CoreError::config(format!(
            "k must lie in 1..=min(n_subjects, n_features) = {}, got {k}",
            a.nrows().min(a.ncols())
        )));
    }
    if a.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(CoreError::validation(
            "co-clustering input must be nonnegative and finite",
        ));
    }
    Ok(())
}

/// Spectral embedding of the nonzero rows and columns.
/// Returns (row embedding, col embedding) with one row per nonzero index.
fn spectral_embedding(
    a: &Array2<f64>,
    rows: &[usize],
    cols: &[usize],
    dims: usize,
) -> (Array2<f64>, Array2<f64>) {
    let n = rows.len();
    let m = cols.len();
    let mut row_sums = vec![0.0; n];
    let mut col_sums = vec![0.0; m];
    for (ri, &i) in rows.iter().enumerate() {
        for (ci, &j) in cols.iter().enumerate() {
            row_sums[ri] += a[(i, j)];
            col_sums[ci] += a[(i, j)];
        }
    }
    let scaled = nalgebra::DMatrix::from_fn(n, m, |ri, ci| {
        a[(rows[ri], cols[ci])] / (row_sums[ri] * col_sums[ci]).sqrt()
    });
    let svd = scaled.svd(true, true);
    let u = svd.u.expect("left singular vectors");
    let v_t = svd.v_t.expect("right singular vectors");
    let available = u.ncols().min(v_t.nrows());
    let take = dims.min(available.saturating_sub(1)).max(1).min(available);
    let mut row_embed = Array2::zeros((n, take));
    let mut col_embed = Array2::zeros((m, take));
    for e in 0..take {
        let col = (e + 1).min(available - 1);
        for ri in 0..n {
            row_embed[(ri, e)] = u[(ri, col)] / row_sums[ri].sqrt();
        }
        for ci in 0..m {
            col_embed[(ci, e)] = v_t[(col, ci)] / col_sums[ci].sqrt();
        }
    }
    (row_embed, col_embed)
}

/// Alternating reassignment until the fixed-point conditions hold: each
/// feature moves to the patient cluster it weighs most into (strictly),
/// then patients symmetrically. Returns true when stable within the sweep
/// cap.
fn fixed_point_sweep(
    a: &Array2<f64>,
    k: usize,
    patient_labels: &mut [usize],
    feature_labels: &mut [usize],
    max_sweeps: usize,
) -> bool {
    let (n, m) = (a.nrows(), a.ncols());
    for _ in 0..max_sweeps {
        let mut changed = false;
        // feature step: weight of feature j into each patient cluster
        let mut weight = Array2::<f64>::zeros((m, k));
        for i in 0..n {
            let c = patient_labels[i];
            for j in 0..m {
                weight[(j, c)] += a[(i, j)];
            }
        }
        for j in 0..m {
            let current = feature_labels[j];
            let mut best = current;
            let mut best_w = weight[(j, current)];
            for c in 0..k {
                if weight[(j, c)] > best_w {
                    best_w = weight[(j, c)];
                    best = c;
                }
            }
            if best != current {
                feature_labels[j] = best;
                changed = true;
            }
        }
        // patient step
        let mut weight = Array2::<f64>::zeros((n, k));
        for j in 0..m {
            let c = feature_labels[j];
            for i in 0..n {
                weight[(i, c)] += a[(i, j)];
            }
        }
        for i in 0..n {
            let current = patient_labels[i];
            let mut best = current;
            let mut best_w = weight[(i, current)];
            for c in 0..k {
                if weight[(i, c)] > best_w {
                    best_w = weight[(i, c)];
                    best = c;
                }
            }
            if best != current {
                patient_labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            return true;
        }
    }
    false
}

/// Number of rows/columns whose assignment violates the fixed-point
/// conditions (strictly better cluster exists). Zero on converged output.
pub fn fixed_point_violations(a: &Array2<f64>, model: &CoClusterModel) -> usize {
    let (n, m) = (a.nrows(), a.ncols());
    let k = model.k;
    let mut violations = 0;
    let mut fweight = Array2::<f64>::zeros((m, k));
    for i in 0..n {
        for j in 0..m {
            fweight[(j, model.patient_labels[i])] += a[(i, j)];
        }
    }
    for j in 0..m {
        let mine = fweight[(j, model.feature_labels[j])];
        if (0..k).any(|c| fweight[(j, c)] > mine) {
            violations += 1;
        }
    }
    let mut pweight = Array2::<f64>::zeros((n, k));
    for j in 0..m {
        for i in 0..n {
            pweight[(i, model.feature_labels[j])] += a[(i, j)];
        }
    }
    for i in 0..n {
        let mine = pweight[(i, model.patient_labels[i])];
        if (0..k).any(|c| pweight[(i, c)] > mine) {
            violations += 1;
        }
    }
    violations
}

/// Partitions subjects and features into `k` joint clusters.
///
/// All-zero rows and columns carry no weight; they are excluded from the
/// embedding and parked in the sink cluster `k - 1`, where the fixed-point
/// conditions hold trivially for them.
pub fn spectral_cocluster(a: &Array2<f64>, k: usize, seed: u64) -> Result<CoClusterModel> {
    validate_input(a, k)?;
    let (n, m) = (a.nrows(), a.ncols());
    let nonzero_rows: Vec<usize> = (0..n).filter(|&i| a.row(i).sum() > 0.0).collect();
    let nonzero_cols: Vec<usize> = (0..m)
        .filter(|&j| a.column(j).sum() > 0.0)
        .collect();
    let mut patient_labels = vec![k - 1; n];
    let mut feature_labels = vec![k - 1; m];
    let mut converged = true;
    if k > 1 && nonzero_rows.len().min(nonzero_cols.len()) >= 2 {
        let dims = usize::max(1, (k as f64).log2().ceil() as usize);
        let (row_embed, col_embed) =
            spectral_embedding(a, &nonzero_rows, &nonzero_cols, dims);
        let take = row_embed.ncols();
        let mut points = Array2::zeros((nonzero_rows.len() + nonzero_cols.len(), take));
        points
            .slice_mut(ndarray::s![..nonzero_rows.len(), ..])
            .assign(&row_embed);
        points
            .slice_mut(ndarray::s![nonzero_rows.len().., ..])
            .assign(&col_embed);
        let (labels, _, _) = kmeans(&points, k, seed, 10, 300);
        for (ri, &i) in nonzero_rows.iter().enumerate() {
            patient_labels[i] = labels[ri];
        }
        for (ci, &j) in nonzero_cols.iter().enumerate() {
            feature_labels[j] = labels[nonzero_rows.len() + ci];
        }
        converged = fixed_point_sweep(a, k, &mut patient_labels, &mut feature_labels, 100);
    }
    Ok(CoClusterModel {
        k,
        nonempty_feature_clusters: count_nonempty(&feature_labels, k),
        nonempty_patient_clusters: count_nonempty(&patient_labels, k),
        feature_labels,
        patient_labels,
        converged,
    })
}

/// Diagnostics for one candidate cluster count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KDiagnosticsRow {
    pub k: usize,
    /// k-means objective in the spectral embedding.
    pub wcss: f64,
    /// Objective normalized per point and embedding dimension, comparable
    /// across candidates with different embedding widths.
    pub wcss_normalized: f64,
    pub singleton_feature_clusters: usize,
    pub nonempty_feature_clusters: usize,
    pub nonempty_patient_clusters: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KSelection {
    pub chosen: usize,
    pub knee: usize,
    pub rows: Vec<KDiagnosticsRow>,
}

/// Elbow-based selection: the knee is the maximum-curvature point of the
/// dispersion curve, and the chosen k is the smallest candidate at or past
/// the knee whose singleton-feature-cluster count sits within 10% of the
/// range minimum.
///
/// The dispersion statistic for every candidate is computed in one shared
/// embedding (wide enough for the largest candidate), so the curve is
/// comparable across k.
pub fn choose_k(
    a: &Array2<f64>,
    k_range: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Result<KSelection> {
    let candidates: Vec<usize> = k_range.collect();
    if candidates.is_empty() {
        return Err(CoreError::config("empty cluster-count range"));
    }
    let k_max = *candidates.iter().max().unwrap();
    validate_input(a, k_max.max(1))?;
    let nonzero_rows: Vec<usize> = (0..a.nrows()).filter(|&i| a.row(i).sum() > 0.0).collect();
    let nonzero_cols: Vec<usize> = (0..a.ncols()).filter(|&j| a.column(j).sum() > 0.0).collect();
    let shared_points = if nonzero_rows.len().min(nonzero_cols.len()) >= 2 {
        let dims = usize::max(1, (k_max as f64).log2().ceil() as usize);
        let (row_embed, col_embed) = spectral_embedding(a, &nonzero_rows, &nonzero_cols, dims);
        let take = row_embed.ncols();
        let mut points = Array2::zeros((nonzero_rows.len() + nonzero_cols.len(), take));
        points
            .slice_mut(ndarray::s![..nonzero_rows.len(), ..])
            .assign(&row_embed);
        points
            .slice_mut(ndarray::s![nonzero_rows.len().., ..])
            .assign(&col_embed);
        Some(points)
    } else {
        None
    };
    let mut rows = Vec::with_capacity(candidates.len());
    for &k in &candidates {
        validate_input(a, k)?;
        let model = spectral_cocluster(a, k, seed)?;
        let (wcss, dims, n_points) = match &shared_points {
            Some(points) if k > 1 => {
                let (_, wcss, _) = kmeans(points, k, seed, 10, 300);
                (wcss, points.ncols(), points.nrows())
            }
            Some(points) => {
                // k = 1: dispersion around the single mean
                let mean = points.mean_axis(Axis(0)).expect("nonempty");
                let wcss = points
                    .rows()
                    .into_iter()
                    .map(|r| (&r - &mean).iter().map(|d| d * d).sum::<f64>())
                    .sum();
                (wcss, points.ncols(), points.nrows())
            }
            None => (0.0, 1, 1),
        };
        let mut sizes = vec![0usize; k];
        for &l in &model.feature_labels {
            sizes[l] += 1;
        }
        let singleton = sizes.iter().filter(|&&s| s == 1).count();
        rows.push(KDiagnosticsRow {
            k,
            wcss,
            wcss_normalized: wcss / (n_points * dims) as f64,
            singleton_feature_clusters: singleton,
            nonempty_feature_clusters: model.nonempty_feature_clusters,
            nonempty_patient_clusters: model.nonempty_patient_clusters,
        });
    }
    let knee = if rows.len() < 3 {
        rows[0].k
    } else {
        let mut best_idx = 1;
        let mut best_curv = f64::MIN;
        for i in 1..rows.len() - 1 {
            let curv = rows[i - 1].wcss_normalized - 2.0 * rows[i].wcss_normalized
                + rows[i + 1].wcss_normalized;
            if curv > best_curv {
                best_curv = curv;
                best_idx = i;
            }
        }
        rows[best_idx].k
    };
    let min_singletons = rows
        .iter()
        .map(|r| r.singleton_feature_clusters)
        .min()
        .unwrap_or(0);
    let bound = min_singletons as f64 * 1.1 + 1e-9;
    let chosen = rows
        .iter()
        .filter(|r| r.k >= knee && (r.singleton_feature_clusters as f64) <= bound)
        .map(|r| r.k)
        .next()
        .unwrap_or(knee);
    Ok(KSelection { chosen, knee, rows })
}

/// Greedy label alignment by maximal feature overlap: relabels `other` into
/// the reference label space.
fn align_labels(reference: &[usize], other: &[usize], k: usize) -> Vec<usize> {
    let mut overlap = vec![vec![0usize; k]; k];
    for (&r, &o) in reference.iter().zip(other) {
        overlap[o][r] += 1;
    }
    let mut mapping = vec![usize::MAX; k];
    let mut used_ref = vec![false; k];
    let mut assigned = 0;
    while assigned < k {
        let mut best = (0usize, 0usize, 0usize); // (count+1, o, r) with count sentinel
        let mut found = false;
        for o in 0..k {
            if mapping[o] != usize::MAX {
                continue;
            }
            for r in 0..k {
                if used_ref[r] {
                    continue;
                }
                if !found || overlap[o][r] > best.0 {
                    best = (overlap[o][r], o, r);
                    found = true;
                }
            }
        }
        if !found {
            break;
        }
        mapping[best.1] = best.2;
        used_ref[best.2] = true;
        assigned += 1;
    }
    for (o, slot) in mapping.iter_mut().enumerate() {
        if *slot == usize::MAX {
            *slot = o;
        }
    }
    other.iter().map(|&o| mapping[o]).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub mean_similarity: f64,
    pub n_pairs: usize,
    pub skipped_replicates: usize,
}

/// Resamples subjects with replacement, co-clusters each replicate, and
/// compares feature labels between every replicate pair with rank-biased
/// overlap over the vocabulary-ordered (feature, aligned label) sequence.
pub fn bootstrap_stability(
    a: &Array2<f64>,
    k: usize,
    n_replicates: usize,
    seed: u64,
    params: &RboParams,
) -> Result<StabilityReport> {
    if n_replicates < 2 {
        return Err(CoreError::config("need at least two bootstrap replicates"));
    }
    validate_input(a, k)?;
    let n = a.nrows();
    let mut replicates: Vec<Vec<usize>> = Vec::new();
    let mut skipped = 0usize;
    for r in 0..n_replicates {
        let mut stream = rng::stream(seed, &[0xb001, r as u64]);
        let idx: Vec<usize> = (0..n).map(|_| stream.gen_range(0..n)).collect();
        let resampled = a.select(Axis(0), &idx);
        let model = spectral_cocluster(&resampled, k, rng::mix(seed, &[0xb002, r as u64]))?;
        if k > 1 && model.nonempty_feature_clusters <= 1 {
            skipped += 1;
            continue;
        }
        replicates.push(model.feature_labels);
    }
    if replicates.len() < 2 {
        return Err(CoreError::runtime(
            "too many degenerate bootstrap replicates",
        ));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for p in 0..replicates.len() {
        for q in (p + 1)..replicates.len() {
            let aligned = align_labels(&replicates[p], &replicates[q], k);
            let s: Vec<(usize, usize)> = replicates[p]
                .iter()
                .enumerate()
                .map(|(j, &l)| (j, l))
                .collect();
            let t: Vec<(usize, usize)> =
                aligned.iter().enumerate().map(|(j, &l)| (j, l)).collect();
            total += rbo(&s, &t, params)?;
            pairs += 1;
        }
    }
    Ok(StabilityReport {
        mean_similarity: total / pairs as f64,
        n_pairs: pairs,
        skipped_replicates: skipped,
    })
}

/// Pearson correlation between feature columns. Zero-variance features are
/// flagged and get correlation 0 with everything (including themselves).
pub fn pearson_corr_matrix(a: &Array2<f64>) -> (Array2<f64>, Vec<usize>) {
    let (n, m) = (a.nrows(), a.ncols());
    let nf = n as f64;
    let mut means = vec![0.0; m];
    let mut stds = vec![0.0; m];
    let mut flagged = Vec::new();
    for j in 0..m {
        let mean = a.column(j).sum() / nf;
        let var = a.column(j).iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / nf;
        means[j] = mean;
        stds[j] = var.sqrt();
        if stds[j] <= 1e-300 {
            flagged.push(j);
        }
    }
    let mut corr = Array2::zeros((m, m));
    for j in 0..m {
        if stds[j] == 0.0 {
            continue;
        }
        corr[(j, j)] = 1.0;
        for l in (j + 1)..m {
            if stds[l] == 0.0 {
                continue;
            }
            let mut cov = 0.0;
            for i in 0..n {
                cov += (a[(i, j)] - means[j]) * (a[(i, l)] - means[l]);
            }
            let rho = cov / (nf * stds[j] * stds[l]);
            corr[(j, l)] = rho;
            corr[(l, j)] = rho;
        }
    }
    (corr, flagged)
}

/// Edge between two distinct feature clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectivityEdge {
    pub cluster_a: usize,
    pub cluster_b: usize,
    pub n_pairs: usize,
}

/// Edges between clusters holding at least one cross-cluster feature pair
/// with correlation above the threshold; pair counts attached.
pub fn cluster_connectivity(
    corr: &Array2<f64>,
    feature_labels: &[usize],
    threshold: f64,
) -> Result<Vec<ConnectivityEdge>> {
    let m = feature_labels.len();
    if corr.nrows() != m || corr.ncols() != m {
        return Err(CoreError::validation(
            "correlation matrix and labels are misaligned",
        ));
    }
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for j in 0..m {
        for l in (j + 1)..m {
            if feature_labels[j] == feature_labels[l] {
                continue;
            }
            if corr[(j, l)] > threshold {
                let key = (
                    feature_labels[j].min(feature_labels[l]),
                    feature_labels[j].max(feature_labels[l]),
                );
                *counts.entry(key).or_insert(0) += 1;
            }
        }
    }
    Ok(counts
        .into_iter()
        .map(|((cluster_a, cluster_b), n_pairs)| ConnectivityEdge {
            cluster_a,
            cluster_b,
            n_pairs,
        })
        .collect())
}

/// Event-subtype composition of one patient cluster.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterEventRow {
    pub cluster: usize,
    pub total: usize,
    pub counts: BTreeMap<String, usize>,
    pub proportions: BTreeMap<String, f64>,
}

/// Per-cluster counts and proportions of event subtypes; proportions sum to
/// one within each nonempty cluster.
pub fn patient_cluster_event_distribution(
    patient_labels: &[usize],
    sublabels: &[EventSubtype],
) -> Result<Vec<ClusterEventRow>> {
    let tags: Vec<String> = sublabels.iter().map(|s| s.tag().to_string()).collect();
    patient_cluster_tag_distribution(patient_labels, &tags)
}

/// Same analysis over arbitrary string sub-labels.
pub fn patient_cluster_tag_distribution(
    patient_labels: &[usize],
    sublabels: &[String],
) -> Result<Vec<ClusterEventRow>> {
    if patient_labels.len() != sublabels.len() {
        return Err(CoreError::validation(
            "patient labels and sublabels are misaligned",
        ));
    }
    let mut per_cluster: BTreeMap<usize, BTreeMap<String, usize>> = BTreeMap::new();
    for (&cluster, subtype) in patient_labels.iter().zip(sublabels) {
        *per_cluster
            .entry(cluster)
            .or_default()
            .entry(subtype.clone())
            .or_insert(0) += 1;
    }
    Ok(per_cluster
        .into_iter()
        .map(|(cluster, counts)| {
            let total: usize = counts.values().sum();
            let proportions = counts
                .iter()
                .map(|(tag, &c)| (tag.clone(), c as f64 / total as f64))
                .collect();
            ClusterEventRow {
                cluster,
                total,
                counts,
                proportions,
            }
        })
        .collect())
}

/// Chance-corrected agreement between two flat partitions.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "partitions must cover the same items");
    let n = a.len();
    if n == 0 {
        return 1.0;
    }
    let ka = a.iter().max().map(|&m| m + 1).unwrap_or(0);
    let kb = b.iter().max().map(|&m| m + 1).unwrap_or(0);
    let mut table = vec![vec![0usize; kb]; ka];
    for i in 0..n {
        table[a[i]][b[i]] += 1;
    }
    let choose2 = |x: usize| -> f64 { (x * x.saturating_sub(1)) as f64 / 2.0 };
    let sum_cells: f64 = table
        .iter()
        .flat_map(|row| row.iter())
        .map(|&c| choose2(c))
        .sum();
    let sum_a: f64 = (0..ka)
        .map(|i| choose2(table[i].iter().sum::<usize>()))
        .sum();
    let sum_b: f64 = (0..kb)
        .map(|j| choose2(table.iter().map(|row| row[j]).sum::<usize>()))
        .sum();
    let expected = sum_a * sum_b / choose2(n);
    let max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected).abs() < 1e-12 {
        return 1.0;
    }
    (sum_cells - expected) / (max_index - expected)
}

/// Planted block matrix used by recovery tests: `rows x cols` with
/// `blocks` diagonal blocks of ones, then each cell flipped with the given
/// noise probability.
pub fn planted_block_matrix(
    rows: usize,
    cols: usize,
    blocks: usize,
    noise: f64,
    seed: u64,
) -> (Array2<f64>, Vec<usize>, Vec<usize>) {
    let mut a = Array2::zeros((rows, cols));
    let row_label = |i: usize| (i * blocks / rows).min(blocks - 1);
    let col_label = |j: usize| (j * blocks / cols).min(blocks - 1);
    let mut rng = rng::stream(seed, &[0xb10c]);
    for i in 0..rows {
        for j in 0..cols {
            let mut v = f64::from(row_label(i) == col_label(j));
            if noise > 0.0 && rng.gen_bool(noise) {
                v = 1.0 - v;
            }
            a[(i, j)] = v;
        }
    }
    (
        a,
        (0..rows).map(row_label).collect(),
        (0..cols).map(col_label).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_two_block_matrix_recovers_exactly() {
        let mut a = Array2::zeros((4, 4));
        for i in 0..2 {
            for j in 0..2 {
                a[(i, j)] = 1.0;
                a[(i + 2, j + 2)] = 1.0;
            }
        }
        let model = spectral_cocluster(&a, 2, 1).unwrap();
        assert_eq!(model.patient_labels[0], model.patient_labels[1]);
        assert_eq!(model.patient_labels[2], model.patient_labels[3]);
        assert_ne!(model.patient_labels[0], model.patient_labels[2]);
        // rows and columns of one block share a cluster
        assert_eq!(model.patient_labels[0], model.feature_labels[0]);
        assert_eq!(model.patient_labels[2], model.feature_labels[2]);
        assert_eq!(fixed_point_violations(&a, &model), 0);
    }

    #[test]
    fn k_equal_one_puts_everything_in_cluster_zero() {
        let a = Array2::from_elem((5, 3), 1.0);
        let model = spectral_cocluster(&a, 1, 0).unwrap();
        assert!(model.patient_labels.iter().all(|&l| l == 0));
        assert!(model.feature_labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn invalid_k_is_rejected() {
        let a = Array2::from_elem((5, 3), 1.0);
        assert!(spectral_cocluster(&a, 0, 0).is_err());
        assert!(spectral_cocluster(&a, 4, 0).is_err());
    }

    #[test]
    fn noisy_planted_blocks_recover_with_high_ari() {
        for seed in 0..5 {
            let (a, row_truth, col_truth) = planted_block_matrix(30, 12, 3, 0.05, seed);
            let model = spectral_cocluster(&a, 3, seed).unwrap();
            let row_ari = adjusted_rand_index(&model.patient_labels, &row_truth);
            let col_ari = adjusted_rand_index(&model.feature_labels, &col_truth);
            assert!(row_ari >= 0.95, "seed {seed}: row ARI {row_ari}");
            assert!(col_ari >= 0.95, "seed {seed}: col ARI {col_ari}");
            assert_eq!(fixed_point_violations(&a, &model), 0);
        }
    }

    #[test]
    fn zero_rows_and_columns_go_to_the_sink() {
        let mut a = Array2::zeros((6, 6));
        for i in 0..3 {
            for j in 0..3 {
                a[(i, j)] = 1.0;
                a[(i + 3, j + 3)] = f64::from(i != 2 && j != 2);
            }
        }
        // row 5 and column 5 end up all zero
        for j in 0..6 {
            a[(5, j)] = 0.0;
        }
        for i in 0..6 {
            a[(i, 5)] = 0.0;
        }
        let model = spectral_cocluster(&a, 3, 2).unwrap();
        assert_eq!(model.patient_labels[5], 2);
        assert_eq!(model.feature_labels[5], 2);
        assert_eq!(fixed_point_violations(&a, &model), 0);
    }

    #[test]
    fn assignments_are_stable_under_input_permutation() {
        let (a, row_truth, col_truth) = planted_block_matrix(20, 10, 2, 0.0, 3);
        let row_perm: Vec<usize> = (0..20).rev().collect();
        let col_perm: Vec<usize> = (0..10).rev().collect();
        let permuted = a.select(Axis(0), &row_perm).select(Axis(1), &col_perm);
        let model = spectral_cocluster(&permuted, 2, 7).unwrap();
        let perm_row_truth: Vec<usize> = row_perm.iter().map(|&i| row_truth[i]).collect();
        let perm_col_truth: Vec<usize> = col_perm.iter().map(|&j| col_truth[j]).collect();
        assert_eq!(
            adjusted_rand_index(&model.patient_labels, &perm_row_truth),
            1.0
        );
        assert_eq!(
            adjusted_rand_index(&model.feature_labels, &perm_col_truth),
            1.0
        );
    }

    #[test]
    fn choose_k_finds_planted_three_blocks() {
        let (a, _, _) = planted_block_matrix(60, 24, 3, 0.03, 5);
        let selection = choose_k(&a, 2..=8, 3).unwrap();
        assert_eq!(selection.chosen, 3, "{:?}", selection.rows);
        assert_eq!(selection.rows.len(), 7);
    }

    #[test]
    fn choose_k_range_of_one_returns_that_k() {
        let (a, _, _) = planted_block_matrix(20, 10, 2, 0.0, 1);
        let selection = choose_k(&a, 4..=4, 0).unwrap();
        assert_eq!(selection.chosen, 4);
        assert_eq!(selection.rows.len(), 1);
    }

    #[test]
    fn noise_free_bootstrap_stability_is_exactly_one() {
        let (a, _, _) = planted_block_matrix(40, 12, 3, 0.0, 2);
        let report = bootstrap_stability(&a, 3, 6, 4, &RboParams::default()).unwrap();
        assert_eq!(report.mean_similarity, 1.0);
        assert_eq!(report.skipped_replicates, 0);
    }

    #[test]
    fn planted_blocks_are_more_stable_than_noise() {
        let (planted, _, _) = planted_block_matrix(60, 15, 3, 0.05, 9);
        let planted_report =
            bootstrap_stability(&planted, 3, 8, 11, &RboParams::default()).unwrap();
        let mut rng = crate::rng::stream(17, &[0]);
        let noise = Array2::from_shape_fn((60, 15), |_| f64::from(rng.gen_bool(0.3)));
        let noise_report = bootstrap_stability(&noise, 3, 8, 11, &RboParams::default()).unwrap();
        assert!(
            planted_report.mean_similarity >= 0.90,
            "planted stability {}",
            planted_report.mean_similarity
        );
        assert!(
            planted_report.mean_similarity - noise_report.mean_similarity >= 0.2,
            "planted {} vs noise {}",
            planted_report.mean_similarity,
            noise_report.mean_similarity
        );
    }

    #[test]
    fn pearson_matches_brute_force_oracle() {
        let mut rng = crate::rng::stream(23, &[0]);
        let a = Array2::from_shape_fn((40, 5), |_| rng.gen_range(-2.0..2.0));
        let (corr, flagged) = pearson_corr_matrix(&a);
        assert!(flagged.is_empty());
        for j in 0..5 {
            assert!((corr[(j, j)] - 1.0).abs() < 1e-12);
            for l in 0..5 {
                // brute force covariance route
                let col_j: Vec<f64> = a.column(j).to_vec();
                let col_l: Vec<f64> = a.column(l).to_vec();
                let n = 40.0;
                let mj = col_j.iter().sum::<f64>() / n;
                let ml = col_l.iter().sum::<f64>() / n;
                let cov: f64 = col_j
                    .iter()
                    .zip(&col_l)
                    .map(|(&x, &y)| (x - mj) * (y - ml))
                    .sum::<f64>()
                    / n;
                let vj = col_j.iter().map(|&x| (x - mj) * (x - mj)).sum::<f64>() / n;
                let vl = col_l.iter().map(|&y| (y - ml) * (y - ml)).sum::<f64>() / n;
                let expected = cov / (vj.sqrt() * vl.sqrt());
                assert!((corr[(j, l)] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pearson_anti_correlation_and_zero_variance() {
        let mut a = Array2::zeros((10, 3));
        for i in 0..10 {
            a[(i, 0)] = i as f64;
            a[(i, 1)] = -(i as f64);
            a[(i, 2)] = 5.0; // constant
        }
        let (corr, flagged) = pearson_corr_matrix(&a);
        assert!((corr[(0, 1)] + 1.0).abs() < 1e-12);
        assert_eq!(flagged, vec![2]);
        assert_eq!(corr[(2, 2)], 0.0);
        assert_eq!(corr[(0, 2)], 0.0);
    }

    #[test]
    fn connectivity_edges_follow_the_threshold() {
        let mut corr = Array2::zeros((4, 4));
        for j in 0..4 {
            corr[(j, j)] = 1.0;
        }
        corr[(0, 1)] = 0.9;
        corr[(1, 0)] = 0.9;
        corr[(0, 2)] = 0.6;
        corr[(2, 0)] = 0.6;
        corr[(1, 3)] = 0.4;
        corr[(3, 1)] = 0.4;
        let labels = vec![0, 0, 1, 1];
        // block-internal 0.9 makes no edge; 0.6 crosses clusters
        let edges = cluster_connectivity(&corr, &labels, 0.5).unwrap();
        assert_eq!(
            edges,
            vec![ConnectivityEdge {
                cluster_a: 0,
                cluster_b: 1,
                n_pairs: 1
            }]
        );

        // exhaustive pair-scan oracle on a random fixture
        let mut rng = crate::rng::stream(31, &[1]);
        let m = 8;
        let mut rcorr = Array2::zeros((m, m));
        for j in 0..m {
            rcorr[(j, j)] = 1.0;
            for l in (j + 1)..m {
                let rho = rng.gen_range(-1.0..1.0);
                rcorr[(j, l)] = rho;
                rcorr[(l, j)] = rho;
            }
        }
        let rlabels: Vec<usize> = (0..m).map(|j| j % 3).collect();
        let edges = cluster_connectivity(&rcorr, &rlabels, 0.5).unwrap();
        let mut oracle: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for j in 0..m {
            for l in (j + 1)..m {
                if rlabels[j] != rlabels[l] && rcorr[(j, l)] > 0.5 {
                    let key = (rlabels[j].min(rlabels[l]), rlabels[j].max(rlabels[l]));
                    *oracle.entry(key).or_insert(0) += 1;
                }
            }
        }
        assert_eq!(edges.len(), oracle.len());
        for edge in edges {
            assert_eq!(oracle[&(edge.cluster_a, edge.cluster_b)], edge.n_pairs);
        }
    }

    #[test]
    fn event_distribution_sums_to_one_and_matches_tally() {
        use EventSubtype::*;
        let labels = vec![0, 0, 0, 1, 1, 2, 2, 2, 2];
        let subs = vec![
            NoEvent,
            NoEvent,
            SuddenDeath,
            MyocardialInfarction,
            Stroke,
            NoEvent,
            NoEvent,
            NoEvent,
            NearFatalArrhythmia,
        ];
        let rows = patient_cluster_event_distribution(&labels, &subs).unwrap();
        assert_eq!(rows.len(), 3);
        for row in &rows {
            let total: f64 = row.proportions.values().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        assert_eq!(rows[0].counts["no_event"], 2);
        assert_eq!(rows[0].counts["sudden_death"], 1);
        assert_eq!(rows[1].counts["mi"], 1);
        assert_eq!(rows[2].counts["no_event"], 3);

        // a pure-survivor cluster is 100% no-event
        let survivors = patient_cluster_event_distribution(&[0, 0], &[NoEvent, NoEvent]).unwrap();
        assert_eq!(survivors[0].proportions["no_event"], 1.0);
    }

    #[test]
    fn ari_sanity() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        let independent = adjusted_rand_index(&[0, 1, 0, 1, 0, 1], &[0, 0, 1, 1, 0, 1]);
        assert!(independent < 0.5);
    }
}
