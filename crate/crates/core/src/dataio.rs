//! LIBSVM-format datasets and deterministic train/test + fold splitting.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

/// Errors from parsing or splitting datasets.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed line {line}: {msg}")]
    MalformedLine { line: usize, msg: String },
    #[error("label set {labels:?} is not one of {{-1,+1}}, {{0,1}}, {{1,2}}")]
    NonBinaryLabels { labels: Vec<f64> },
    #[error("empty dataset file")]
    EmptyFile,
    #[error("n_features override {given} is below the maximum feature index {seen}")]
    FeatureOverrideTooSmall { given: usize, seen: usize },
    #[error("cannot split: {msg}")]
    BadSplit { msg: String },
}

/// A labeled sparse dataset with labels normalized to {-1, +1}.
///
/// Feature indices are 1-based, strictly increasing within a sample, and
/// missing indices are implicit zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Vec<(u32, f64)>>,
    labels: Vec<f64>,
    n_features: usize,
}

impl Dataset {
    /// Builds a dataset from already-normalized parts, validating the
    /// invariants (labels in {-1,+1}, indices in range and increasing).
    pub fn new(
        samples: Vec<Vec<(u32, f64)>>,
        labels: Vec<f64>,
        n_features: usize,
    ) -> Result<Self, DataError> {
        if samples.len() != labels.len() {
            return Err(DataError::BadSplit {
                msg: format!("{} samples but {} labels", samples.len(), labels.len()),
            });
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            let mut distinct: Vec<f64> = labels.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            return Err(DataError::NonBinaryLabels { labels: distinct });
        }
        for (row, sample) in samples.iter().enumerate() {
            let mut prev = 0u32;
            for &(idx, _) in sample {
                if idx == 0 || idx as usize > n_features {
                    return Err(DataError::MalformedLine {
                        line: row + 1,
                        msg: format!("feature index {idx} out of [1, {n_features}]"),
                    });
                }
                if idx <= prev {
                    return Err(DataError::MalformedLine {
                        line: row + 1,
                        msg: format!("feature index {idx} not strictly increasing"),
                    });
                }
                prev = idx;
            }
        }
        Ok(Self {
            samples,
            labels,
            n_features,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> &[(u32, f64)] {
        &self.samples[i]
    }

    /// Densifies sample `i` into a length-`n_features` vector.
    pub fn dense_sample(&self, i: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n_features];
        for &(idx, val) in &self.samples[i] {
            x[(idx - 1) as usize] = val;
        }
        x
    }

    /// Serializes back to LIBSVM text. Values use Rust's shortest
    /// round-trip float formatting, so `parse_libsvm` of the output
    /// reproduces this dataset exactly.
    pub fn to_libsvm_string(&self) -> String {
        let mut out = String::new();
        for (sample, &label) in self.samples.iter().zip(&self.labels) {
            let _ = write!(out, "{}", if label > 0.0 { "+1" } else { "-1" });
            for &(idx, val) in sample {
                let _ = write!(out, " {}:{}", idx, val);
            }
            out.push('\n');
        }
        out
    }
}

/// Parses a LIBSVM-format file. See [`parse_libsvm_reader`] for the format
/// and label conventions.
pub fn parse_libsvm(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    parse_libsvm_with(path, None)
}

/// [`parse_libsvm`] with an optional `n_features` override (must be at
/// least the maximum index present in the file).
pub fn parse_libsvm_with(
    path: impl AsRef<Path>,
    n_features: Option<usize>,
) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_libsvm_reader(BufReader::new(file), n_features)
}

/// Parses LIBSVM text: each nonempty line is `label idx:val idx:val ...`
/// with strictly increasing 1-based indices.
///
/// Labels are normalized to {-1, +1}: a raw label set of {0, 1} maps 0 to
/// -1, a set of {1, 2} maps 2 to -1, and {-1, +1} passes through. Any
/// other label set is rejected.
pub fn parse_libsvm_reader(
    reader: impl Read,
    n_features: Option<usize>,
) -> Result<Dataset, DataError> {
    let mut samples: Vec<Vec<(u32, f64)>> = Vec::new();
    let mut raw_labels: Vec<f64> = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|source| DataError::Io {
            path: "<reader>".into(),
            source,
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a first token");
        let label: f64 = label_tok.parse().map_err(|_| DataError::MalformedLine {
            line: lineno,
            msg: format!("bad label {label_tok:?}"),
        })?;
        if !label.is_finite() {
            return Err(DataError::MalformedLine {
                line: lineno,
                msg: format!("non-finite label {label_tok:?}"),
            });
        }

        let mut sample: Vec<(u32, f64)> = Vec::new();
        let mut prev = 0u32;
        for tok in tokens {
            let (idx_s, val_s) = tok
                .split_once(':')
                .ok_or_else(|| DataError::MalformedLine {
                    line: lineno,
                    msg: format!("expected idx:val, got {tok:?}"),
                })?;
            let idx: u32 = idx_s.parse().map_err(|_| DataError::MalformedLine {
                line: lineno,
                msg: format!("bad feature index {idx_s:?}"),
            })?;
            let val: f64 = val_s.parse().map_err(|_| DataError::MalformedLine {
                line: lineno,
                msg: format!("bad feature value {val_s:?}"),
            })?;
            if idx == 0 {
                return Err(DataError::MalformedLine {
                    line: lineno,
                    msg: "feature indices are 1-based".into(),
                });
            }
            if idx <= prev {
                return Err(DataError::MalformedLine {
                    line: lineno,
                    msg: format!("feature index {idx} not strictly increasing"),
                });
            }
            if !val.is_finite() {
                return Err(DataError::MalformedLine {
                    line: lineno,
                    msg: format!("non-finite feature value {val_s:?}"),
                });
            }
            prev = idx;
            max_index = max_index.max(idx as usize);
            sample.push((idx, val));
        }
        samples.push(sample);
        raw_labels.push(label);
    }

    if samples.is_empty() {
        return Err(DataError::EmptyFile);
    }

    let n_features = match n_features {
        Some(given) if given < max_index => {
            return Err(DataError::FeatureOverrideTooSmall {
                given,
                seen: max_index,
            })
        }
        Some(given) => given,
        None => max_index,
    };

    let labels = normalize_labels(&raw_labels)?;
    Dataset::new(samples, labels, n_features)
}

fn normalize_labels(raw: &[f64]) -> Result<Vec<f64>, DataError> {
    // f64 keys are exact here: labels are small integers by contract.
    let distinct: BTreeSet<i64> = raw
        .iter()
        .map(|&y| {
            if y.fract() == 0.0 && y.abs() <= 2.0 {
                Ok(y as i64)
            } else {
                Err(DataError::NonBinaryLabels {
                    labels: distinct_sorted(raw),
                })
            }
        })
        .collect::<Result<_, _>>()?;

    let mapped: Vec<f64> = match distinct.iter().copied().collect::<Vec<_>>()[..] {
        [-1, 1] => raw.to_vec(),
        [0, 1] => raw
            .iter()
            .map(|&y| if y == 0.0 { -1.0 } else { 1.0 })
            .collect(),
        [1, 2] => raw
            .iter()
            .map(|&y| if y == 2.0 { -1.0 } else { 1.0 })
            .collect(),
        _ => {
            return Err(DataError::NonBinaryLabels {
                labels: distinct_sorted(raw),
            })
        }
    };
    Ok(mapped)
}

fn distinct_sorted(raw: &[f64]) -> Vec<f64> {
    let mut v = raw.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// A deterministic split of a dataset into a hold-out test set and T
/// equal-size cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub seed: u64,
    /// Hold-out indices (size l2 = len - l1).
    pub test_indices: Vec<usize>,
    /// Fold indices, `folds[j]` has exactly `m1` entries; pairwise disjoint.
    pub folds: Vec<Vec<usize>>,
    /// Indices dropped so that every fold has identical size (l1 mod T of them).
    pub dropped: Vec<usize>,
}

impl SplitPlan {
    pub fn t_folds(&self) -> usize {
        self.folds.len()
    }

    /// Per-fold validation size m1.
    pub fn m1(&self) -> usize {
        self.folds[0].len()
    }

    /// Per-fold training size m2 = (T-1) * m1.
    pub fn m2(&self) -> usize {
        (self.t_folds() - 1) * self.m1()
    }

    /// All retained cross-validation indices, fold by fold.
    pub fn cv_indices(&self) -> Vec<usize> {
        self.folds.iter().flatten().copied().collect()
    }
}

/// Shuffles once with a ChaCha generator seeded by `seed`, takes the first
/// `l1` indices as the cross-validation pool and the remainder as the test
/// set, then deals the pool round-robin into `t_folds` folds truncated to a
/// common size m1 = floor(l1 / T). Deterministic for a fixed seed.
pub fn make_split(
    ds: &Dataset,
    t_folds: usize,
    l1: usize,
    seed: u64,
) -> Result<SplitPlan, DataError> {
    if t_folds < 2 {
        return Err(DataError::BadSplit {
            msg: format!("need T >= 2 folds, got {t_folds}"),
        });
    }
    if l1 < t_folds {
        return Err(DataError::BadSplit {
            msg: format!("train size l1={l1} below fold count T={t_folds}"),
        });
    }
    if l1 > ds.len() {
        return Err(DataError::BadSplit {
            msg: format!("train size l1={l1} exceeds dataset size {}", ds.len()),
        });
    }

    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let (cv_pool, test) = order.split_at(l1);
    let m1 = l1 / t_folds;
    let mut folds: Vec<Vec<usize>> = vec![Vec::with_capacity(m1 + 1); t_folds];
    for (pos, &idx) in cv_pool.iter().enumerate() {
        folds[pos % t_folds].push(idx);
    }
    let mut dropped = Vec::with_capacity(l1 % t_folds);
    for fold in &mut folds {
        while fold.len() > m1 {
            dropped.push(fold.pop().expect("fold is nonempty"));
        }
    }

    Ok(SplitPlan {
        seed,
        test_indices: test.to_vec(),
        folds,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn parse_str(s: &str) -> Result<Dataset, DataError> {
        parse_libsvm_reader(s.as_bytes(), None)
    }

    #[test]
    fn parses_plus_minus_lines() {
        let ds = parse_str("+1 1:0.5 3:2.0\n-1 2:1.5\n").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.n_features(), 3);
        assert_eq!(ds.dense_sample(0), vec![0.5, 0.0, 2.0]);
        assert_eq!(ds.dense_sample(1), vec![0.0, 1.5, 0.0]);
        assert_eq!(ds.labels(), &[1.0, -1.0]);
    }

    #[test]
    fn zero_one_labels_map_zero_to_minus_one() {
        let ds = parse_str("0 2:1\n1 1:1\n").unwrap();
        assert_eq!(ds.labels(), &[-1.0, 1.0]);
    }

    #[test]
    fn one_two_labels_map_two_to_minus_one() {
        let ds = parse_str("2 1:1\n1 1:2\n2 2:3\n").unwrap();
        assert_eq!(ds.labels(), &[-1.0, 1.0, -1.0]);
    }

    #[test]
    fn rejects_other_label_sets() {
        for bad in [
            "3 1:1\n1 1:1\n",
            "1 1:1\n",
            "0 1:1\n2 1:1\n",
            "0.5 1:1\n-0.5 1:1\n",
        ] {
            assert!(
                matches!(parse_str(bad), Err(DataError::NonBinaryLabels { .. })),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_str("+1 1:0.5\n-1 3:x\n").unwrap_err();
        match err {
            DataError::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
        let err = parse_str("+1 2:1 2:2\n").unwrap_err();
        match err {
            DataError::MalformedLine { line, msg } => {
                assert_eq!(line, 1);
                assert!(msg.contains("strictly increasing"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(parse_str(""), Err(DataError::EmptyFile)));
        assert!(matches!(parse_str("\n  \n"), Err(DataError::EmptyFile)));
    }

    #[test]
    fn feature_override_validated() {
        assert!(
            parse_libsvm_reader("+1 1:1\n-1 4:1\n".as_bytes(), Some(6))
                .unwrap()
                .n_features()
                == 6
        );
        assert!(matches!(
            parse_libsvm_reader("+1 5:1\n-1 1:1\n".as_bytes(), Some(3)),
            Err(DataError::FeatureOverrideTooSmall { given: 3, seen: 5 })
        ));
    }

    #[test]
    fn missing_file_error_names_path() {
        let err = parse_libsvm("/no/such/file.libsvm").unwrap_err();
        assert!(err.to_string().contains("/no/such/file.libsvm"));
    }

    fn toy(n: usize) -> Dataset {
        let samples = (0..n).map(|i| vec![(1u32, i as f64)]).collect();
        let labels = (0..n)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        Dataset::new(samples, labels, 1).unwrap()
    }

    #[test]
    fn split_three_folds_of_three() {
        let ds = toy(12);
        let plan = make_split(&ds, 3, 9, 7).unwrap();
        assert_eq!(plan.t_folds(), 3);
        assert_eq!(plan.m1(), 3);
        assert_eq!(plan.m2(), 6);
        assert_eq!(plan.test_indices.len(), 3);
        assert!(plan.dropped.is_empty());
        let mut seen = HashSet::new();
        for idx in plan.folds.iter().flatten().chain(&plan.test_indices) {
            assert!(seen.insert(*idx), "index {idx} appears twice");
        }
        assert_eq!(seen.len(), 12);
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let ds = toy(40);
        let a = make_split(&ds, 4, 30, 99).unwrap();
        let b = make_split(&ds, 4, 30, 99).unwrap();
        assert_eq!(a, b);
        let c = make_split(&ds, 4, 30, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_sizes_match_heart_arithmetic() {
        // 270 samples, T=3, l1=162: m1 = 54, m2 = 108.
        let ds = toy(270);
        let plan = make_split(&ds, 3, 162, 1).unwrap();
        assert_eq!(plan.m1(), 54);
        assert_eq!(plan.m2(), 108);
        assert_eq!(plan.test_indices.len(), 108);
    }

    #[test]
    fn split_rejects_bad_sizes() {
        let ds = toy(10);
        assert!(make_split(&ds, 5, 4, 0).is_err());
        assert!(make_split(&ds, 2, 11, 0).is_err());
        assert!(make_split(&ds, 1, 5, 0).is_err());
    }

    proptest! {
        #[test]
        fn fold_partition_accounting(n in 4usize..120, t in 2usize..6, seed in any::<u64>()) {
            prop_assume!(n > t);
            let l1 = t + (seed as usize % (n - t));
            let ds = toy(n);
            let plan = make_split(&ds, t, l1, seed).unwrap();
            let m1 = plan.m1();
            for fold in &plan.folds {
                prop_assert_eq!(fold.len(), m1);
            }
            prop_assert_eq!(plan.dropped.len(), l1 % t);
            let total: usize = t * m1 + plan.dropped.len() + plan.test_indices.len();
            prop_assert_eq!(total, n);
            let mut all: Vec<usize> = plan.cv_indices();
            all.extend(&plan.dropped);
            all.extend(&plan.test_indices);
            all.sort_unstable();
            all.dedup();
            prop_assert_eq!(all.len(), n);
        }

        #[test]
        fn libsvm_round_trip(rows in proptest::collection::vec(
            (prop_oneof![Just(-1.0f64), Just(1.0f64)],
             proptest::collection::btree_map(1u32..40, -1e6f64..1e6, 0..8)),
            1..20)
        ) {
            let samples: Vec<Vec<(u32, f64)>> =
                rows.iter().map(|(_, m)| m.iter().map(|(&i, &v)| (i, v)).collect()).collect();
            let labels: Vec<f64> = rows.iter().map(|(y, _)| *y).collect();
            prop_assume!(labels.contains(&1.0) && labels.contains(&-1.0));
            let n = samples.iter().flatten().map(|&(i, _)| i as usize).max().unwrap_or(1).max(1);
            let ds = Dataset::new(samples, labels, n).unwrap();
            let text = ds.to_libsvm_string();
            let back = parse_libsvm_reader(text.as_bytes(), Some(n)).unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
