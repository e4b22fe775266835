//! Reference feature selections and selection statistics.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::recmodels::tfidf_feature_scores;
use crate::sparse::SparseMatrix;

/// `ceil(quota·n)` computed with a small tolerance so that exact products
/// such as `0.6·10` are not rounded up by representation error.
pub fn quota_count(quota: f64, n: usize) -> usize {
    ((quota * n as f64) - 1e-9).ceil().max(0.0) as usize
}

fn check_quota(quota: f64) -> Result<()> {
    if quota > 0.0 && quota <= 1.0 {
        Ok(())
    } else {
        Err(Error::ConfigInvalid(format!(
            "selection quota {quota} is outside (0, 1]"
        )))
    }
}

/// The `ceil(quota·|F|)` features with the highest TF-IDF score, ties to the
/// smaller index. Returned sorted.
pub fn baseline_tfidf_selection(icm: &SparseMatrix, quota: f64) -> Result<Vec<usize>> {
    check_quota(quota)?;
    Ok(tfidf_feature_scores(icm).top(quota_count(quota, icm.n_cols())))
}

/// A uniform random subset of `ceil(quota·n)` features. Returned sorted.
pub fn baseline_random_selection(n_features: usize, quota: f64, seed: u64) -> Result<Vec<usize>> {
    check_quota(quota)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n_features, quota_count(quota, n_features)).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureFrequency {
    pub feature: usize,
    pub count: usize,
    pub frequency: f64,
}

/// How often each feature appears across `selections`, most frequent first
/// and ties by feature index.
pub fn feature_selection_stats(selections: &[Vec<usize>], n_features: usize) -> Result<Vec<FeatureFrequency>> {
    let mut counts = vec![0usize; n_features];
    for sel in selections {
        let distinct: BTreeSet<usize> = sel.iter().copied().collect();
        for f in distinct {
            let slot = counts.get_mut(f).ok_or(Error::IndexOutOfRange {
                row: 0,
                col: f,
                n_rows: 1,
                n_cols: n_features,
            })?;
            *slot += 1;
        }
    }
    let total = selections.len();
    let mut out: Vec<FeatureFrequency> = counts
        .into_iter()
        .enumerate()
        .map(|(feature, count)| FeatureFrequency {
            feature,
            count,
            frequency: if total == 0 { 0.0 } else { count as f64 / total as f64 },
        })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then(a.feature.cmp(&b.feature)));
    Ok(out)
}

/// TSV with columns `feature`, `label`, `count`, `frequency`.
pub fn feature_stats_tsv(stats: &[FeatureFrequency], label: impl Fn(usize) -> String) -> String {
    let mut out = String::from("feature\tlabel\tcount\tfrequency\n");
    for s in stats {
        out.push_str(&format!(
            "{}\t{}\t{}\t{:.6}\n",
            s.feature,
            label(s.feature),
            s.count,
            s.frequency
        ));
    }
    out
}
