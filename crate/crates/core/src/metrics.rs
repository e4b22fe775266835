//! Top-N evaluation: accuracy, coverage and diversity at a fixed cutoff.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, write_atomic, write_json};

/// Default pair budget for [`mean_inter_list`].
pub const DEFAULT_MIL_PAIRS: usize = 10_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMetrics {
    pub precision: f64,
    pub recall: f64,
    pub ndcg: f64,
    pub map: f64,
    pub n_users: usize,
}

fn user_terms(list: &[usize], relevant: &HashSet<usize>, cutoff: usize) -> [f64; 4] {
    let mut hits = 0usize;
    let mut dcg = 0.0;
    let mut ap = 0.0;
    for (rank0, item) in list.iter().take(cutoff).enumerate() {
        if relevant.contains(item) {
            hits += 1;
            let rank = (rank0 + 1) as f64;
            dcg += 1.0 / (rank + 1.0).log2();
            ap += hits as f64 / rank;
        }
    }
    let ideal = cutoff.min(relevant.len());
    let idcg: f64 = (1..=ideal).map(|r| 1.0 / (r as f64 + 1.0).log2()).sum();
    [
        hits as f64 / cutoff as f64,
        hits as f64 / relevant.len() as f64,
        dcg / idcg,
        ap / ideal as f64,
    ]
}

/// Macro-averaged precision, recall, NDCG and MAP with binary relevance.
/// Users without relevant items are skipped. Lists longer than `cutoff` are
/// truncated.
pub fn accuracy_metrics(recommended: &[Vec<usize>], relevant: &[Vec<usize>], cutoff: usize) -> Result<AccuracyMetrics> {
    if recommended.len() != relevant.len() {
        return Err(Error::DimensionMismatch {
            op: "accuracy_metrics",
            left: (recommended.len(), cutoff),
            right: (relevant.len(), cutoff),
        });
    }
    if cutoff == 0 {
        return Err(Error::ConfigInvalid("cutoff must be at least 1".into()));
    }
    let terms: Vec<Option<[f64; 4]>> = recommended
        .par_iter()
        .zip(relevant.par_iter())
        .map(|(list, rel)| {
            let rel: HashSet<usize> = rel.iter().copied().collect();
            (!rel.is_empty()).then(|| user_terms(list, &rel, cutoff))
        })
        .collect();
    let mut sum = [0.0; 4];
    let mut n = 0usize;
    for t in terms.into_iter().flatten() {
        n += 1;
        for (s, v) in sum.iter_mut().zip(t) {
            *s += v;
        }
    }
    if n == 0 {
        return Ok(AccuracyMetrics::default());
    }
    let d = n as f64;
    Ok(AccuracyMetrics {
        precision: sum[0] / d,
        recall: sum[1] / d,
        ndcg: sum[2] / d,
        map: sum[3] / d,
        n_users: n,
    })
}

/// Fraction of the catalog recommended to at least one user.
pub fn item_coverage(recommended: &[Vec<usize>], n_items: usize) -> f64 {
    if n_items == 0 {
        return 0.0;
    }
    let distinct: HashSet<usize> = recommended.iter().flatten().copied().collect();
    distinct.len() as f64 / n_items as f64
}

/// `1 − G` where `G` is the Gini coefficient of recommendation counts over
/// the whole catalog, never-recommended items included. 1 means uniform
/// exposure. Returns 0 when nothing was recommended.
pub fn gini_diversity(recommended: &[Vec<usize>], n_items: usize) -> Result<f64> {
    if n_items < 2 {
        return Err(Error::DegenerateCatalog(n_items));
    }
    let mut counts = vec![0u64; n_items];
    for &item in recommended.iter().flatten() {
        let slot = counts.get_mut(item).ok_or(Error::IndexOutOfRange {
            row: item,
            col: 0,
            n_rows: n_items,
            n_cols: 1,
        })?;
        *slot += 1;
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Ok(0.0);
    }
    counts.sort_unstable();
    let n = n_items as f64;
    let g: f64 = counts
        .iter()
        .enumerate()
        .map(|(i0, &c)| (2.0 * (i0 + 1) as f64 - n - 1.0) * (c as f64 / total as f64))
        .sum::<f64>()
        / (n - 1.0);
    Ok((1.0 - g).clamp(0.0, 1.0))
}

fn list_distance(a: &HashSet<usize>, b: &HashSet<usize>, cutoff: usize) -> f64 {
    1.0 - a.intersection(b).count() as f64 / cutoff as f64
}

/// Maps a linear index over the strict upper triangle of an `n × n` matrix,
/// taken row by row, back to `(u, v)` with `u < v`.
fn pair_from_index(k: usize, n: usize) -> (usize, usize) {
    let mut u = 0;
    let mut start = 0;
    // Rows shrink by one each time; a closed form exists but is float-prone.
    loop {
        let len = n - 1 - u;
        if k < start + len {
            return (u, u + 1 + (k - start));
        }
        start += len;
        u += 1;
    }
}

/// Mean pairwise list distance `1 − |L_u ∩ L_v| / cutoff`. All pairs are used
/// when there are at most `max_pairs`; otherwise `max_pairs` distinct pairs
/// are drawn with `seed`. Fewer than two users gives 0.
pub fn mean_inter_list(recommended: &[Vec<usize>], cutoff: usize, max_pairs: usize, seed: u64) -> f64 {
    let n = recommended.len();
    if n < 2 || cutoff == 0 || max_pairs == 0 {
        return 0.0;
    }
    let sets: Vec<HashSet<usize>> = recommended
        .iter()
        .map(|l| l.iter().take(cutoff).copied().collect())
        .collect();
    let total = n * (n - 1) / 2;
    let distances: Vec<f64> = if total <= max_pairs {
        (0..n)
            .into_par_iter()
            .flat_map_iter(|u| {
                let sets = &sets;
                (u + 1..n).map(move |v| list_distance(&sets[u], &sets[v], cutoff))
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picks = rand::seq::index::sample(&mut rng, total, max_pairs).into_vec();
        picks.sort_unstable();
        picks
            .par_iter()
            .map(|&k| {
                let (u, v) = pair_from_index(k, n);
                list_distance(&sets[u], &sets[v], cutoff)
            })
            .collect()
    };
    distances.iter().sum::<f64>() / distances.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cutoff: usize,
    pub precision: f64,
    pub recall: f64,
    pub ndcg: f64,
    pub map: f64,
    pub item_coverage: f64,
    pub gini_diversity: f64,
    pub mil: f64,
    pub n_users_evaluated: usize,
}

impl EvalReport {
    pub const TSV_COLUMNS: [&'static str; 9] = [
        "cutoff",
        "precision",
        "recall",
        "ndcg",
        "map",
        "item_coverage",
        "gini_diversity",
        "mil",
        "n_users_evaluated",
    ];

    pub fn tsv_header() -> String {
        Self::TSV_COLUMNS.join("\t")
    }

    pub fn tsv_row(&self) -> String {
        let mut s = self.cutoff.to_string();
        for v in [
            self.precision,
            self.recall,
            self.ndcg,
            self.map,
            self.item_coverage,
            self.gini_diversity,
            self.mil,
        ] {
            write!(s, "\t{v:.10}").expect("writing to a String");
        }
        write!(s, "\t{}", self.n_users_evaluated).expect("writing to a String");
        s
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "precision" => self.precision,
            "recall" => self.recall,
            "ndcg" => self.ndcg,
            "map" => self.map,
            "item_coverage" => self.item_coverage,
            "gini_diversity" => self.gini_diversity,
            "mil" => self.mil,
            _ => return None,
        })
    }

    /// Writes `{stem}.json` and `{stem}.tsv` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        write_json(&dir.join(format!("{stem}.json")), self)?;
        let tsv = format!("{}\n{}\n", Self::tsv_header(), self.tsv_row());
        write_atomic(&dir.join(format!("{stem}.tsv")), tsv.as_bytes())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        read_json(&dir.join(format!("{stem}.json")))
    }
}

/// Full report for ranked lists restricted to `catalog`. Coverage and Gini
/// are measured over the catalog; beyond-accuracy metrics use only the users
/// that have relevant items.
pub fn evaluate(
    recommended: &[Vec<usize>],
    relevant: &[Vec<usize>],
    catalog: &[usize],
    cutoff: usize,
    mil_max_pairs: usize,
    seed: u64,
) -> Result<EvalReport> {
    let acc = accuracy_metrics(recommended, relevant, cutoff)?;
    let max_item = catalog.iter().copied().max().map_or(0, |m| m + 1);
    let mut position = vec![usize::MAX; max_item];
    for (p, &item) in catalog.iter().enumerate() {
        position[item] = p;
    }
    let evaluated: Vec<Vec<usize>> = recommended
        .iter()
        .zip(relevant)
        .filter(|(_, rel)| !rel.is_empty())
        .map(|(list, _)| {
            list.iter()
                .take(cutoff)
                .map(|&i| match position.get(i) {
                    Some(&p) if p != usize::MAX => Ok(p),
                    _ => Err(Error::ConfigInvalid(format!(
                        "recommended item {i} is outside the evaluation catalog"
                    ))),
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(EvalReport {
        cutoff,
        precision: acc.precision,
        recall: acc.recall,
        ndcg: acc.ndcg,
        map: acc.map,
        item_coverage: item_coverage(&evaluated, catalog.len()),
        gini_diversity: if evaluated.iter().all(Vec::is_empty) {
            0.0
        } else {
            gini_diversity(&evaluated, catalog.len())?
        },
        mil: mean_inter_list(&evaluated, cutoff, mil_max_pairs, seed),
        n_users_evaluated: acc.n_users,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn accuracy_single_hit() {
        let m = accuracy_metrics(&[vec![0, 1, 2]], &[vec![1]], 3).unwrap();
        assert!((m.precision - 1.0 / 3.0).abs() < TOL);
        assert!((m.recall - 1.0).abs() < TOL);
        assert!((m.map - 0.5).abs() < TOL);
        assert!((m.ndcg - 1.0 / 3f64.log2()).abs() < TOL);
        assert!((m.ndcg - 0.6309).abs() < 1e-4);
    }

    #[test]
    fn accuracy_perfect_and_empty() {
        let m = accuracy_metrics(&[vec![4, 2, 9]], &[vec![9, 4, 2]], 3).unwrap();
        assert_eq!((m.precision, m.recall, m.ndcg, m.map), (1.0, 1.0, 1.0, 1.0));
        let m = accuracy_metrics(&[vec![4, 2, 9]], &[vec![1]], 3).unwrap();
        assert_eq!((m.precision, m.recall, m.ndcg, m.map), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn users_without_relevant_items_are_skipped() {
        let m = accuracy_metrics(&[vec![0], vec![5]], &[vec![0], vec![]], 1).unwrap();
        assert_eq!(m.n_users, 1);
        assert_eq!(m.precision, 1.0);
        assert_eq!(accuracy_metrics(&[vec![0]], &[vec![]], 1).unwrap().n_users, 0);
    }

    #[test]
    fn coverage_examples() {
        assert_eq!(item_coverage(&[vec![0, 1], vec![2, 1]], 3), 1.0);
        assert_eq!(item_coverage(&[], 10), 0.0);
        assert!((item_coverage(&[vec![0, 1], vec![7]], 10) - 0.3).abs() < TOL);
    }

    #[test]
    fn gini_examples() {
        assert!((gini_diversity(&[vec![0, 1], vec![2, 3]], 4).unwrap() - 1.0).abs() < TOL);
        assert_eq!(gini_diversity(&[vec![0], vec![0]], 2).unwrap(), 0.0);
        let uniform = gini_diversity(&[vec![0, 1, 2, 3]], 4).unwrap();
        let skewed = gini_diversity(&[vec![0, 1, 2, 3], vec![0]], 4).unwrap();
        // counts 2,1,1,1 over 5: G = (-3·1 - 1·1 + 1·1 + 3·2) / (5·3) = 3/15
        assert!((skewed - (1.0 - 3.0 / 15.0)).abs() < TOL);
        assert!(skewed < uniform);
        assert!(matches!(
            gini_diversity(&[vec![0]], 1),
            Err(Error::DegenerateCatalog(1))
        ));
    }

    #[test]
    fn mil_examples() {
        assert_eq!(mean_inter_list(&[vec![1, 2], vec![1, 2]], 2, 100, 0), 0.0);
        assert_eq!(mean_inter_list(&[vec![1, 2], vec![3, 4]], 2, 100, 0), 1.0);
        let m = mean_inter_list(&[vec![0, 1], vec![1, 2], vec![2, 3]], 2, 100, 0);
        assert!((m - 2.0 / 3.0).abs() < TOL);
        assert_eq!(mean_inter_list(&[vec![1]], 1, 100, 0), 0.0);
    }

    #[test]
    fn pair_decoding_covers_triangle() {
        let n = 7;
        let pairs: Vec<_> = (0..n * (n - 1) / 2).map(|k| pair_from_index(k, n)).collect();
        let expected: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        assert_eq!(pairs, expected);
    }

    #[test]
    fn evaluate_maps_catalog() {
        let r = evaluate(
            &[vec![10, 12], vec![12, 10], vec![11]],
            &[vec![12], vec![], vec![11]],
            &[10, 11, 12],
            2,
            100,
            0,
        )
        .unwrap();
        assert_eq!(r.n_users_evaluated, 2);
        assert!((r.item_coverage - 1.0).abs() < TOL);
        assert!((r.precision - 0.5).abs() < TOL);
        assert!(evaluate(&[vec![3]], &[vec![3]], &[1, 2], 1, 10, 0).is_err());
    }

    #[test]
    fn report_tsv_layout() {
        let r = EvalReport {
            cutoff: 10,
            precision: 0.1,
            recall: 0.2,
            ndcg: 0.3,
            map: 0.4,
            item_coverage: 0.5,
            gini_diversity: 0.6,
            mil: 0.7,
            n_users_evaluated: 3,
        };
        assert_eq!(EvalReport::tsv_header().split('\t').count(), 9);
        assert_eq!(r.tsv_row().split('\t').count(), 9);
        assert!(r.tsv_row().starts_with("10\t0.1000000000\t"));
        assert_eq!(r.metric("ndcg"), Some(0.3));
        assert_eq!(r.metric("bogus"), None);
    }

    fn lists(n_users: usize, n_items: usize, len: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
        proptest::collection::vec(
            proptest::sample::subsequence((0..n_items).collect::<Vec<_>>(), len),
            n_users,
        )
    }

    proptest! {
        #[test]
        fn hit_counts_are_integral(rec in lists(8, 20, 5), rel in lists(8, 20, 3)) {
            for (l, r) in rec.iter().zip(&rel) {
                let set: HashSet<usize> = r.iter().copied().collect();
                let [p, rc, ndcg, ap] = user_terms(l, &set, 5);
                prop_assert!((p * 5.0 - (p * 5.0).round()).abs() < 1e-9);
                prop_assert!((rc * 3.0 - (rc * 3.0).round()).abs() < 1e-9);
                prop_assert!((0.0..=1.0 + 1e-12).contains(&ndcg));
                prop_assert!((0.0..=1.0 + 1e-12).contains(&ap));
            }
        }

        #[test]
        fn gini_ignores_item_identity(rec in lists(6, 10, 4), shift in 1usize..10) {
            let relabeled: Vec<Vec<usize>> =
                rec.iter().map(|l| l.iter().map(|i| (i + shift) % 10).collect()).collect();
            let a = gini_diversity(&rec, 10).unwrap();
            let b = gini_diversity(&relabeled, 10).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn mil_exact_is_order_invariant(rec in lists(6, 12, 4)) {
            let base = mean_inter_list(&rec, 4, 1000, 0);
            let mut users = rec.clone();
            users.reverse();
            let mut inner = rec.clone();
            for l in &mut inner {
                l.reverse();
            }
            prop_assert!((base - mean_inter_list(&users, 4, 1000, 0)).abs() < 1e-12);
            prop_assert!((base - mean_inter_list(&inner, 4, 1000, 0)).abs() < 1e-12);
        }
    }
}
