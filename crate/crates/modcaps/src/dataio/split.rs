//! Deterministic stratified train/validation/test splits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, DatasetManifest, Result};

/// Split fractions and the shuffle seed. Fractions must sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.70,
            validation: 0.05,
            test: 0.25,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("train", self.train),
            ("validation", self.validation),
            ("test", self.test),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(DataError::BadSplit(format!(
                    "{name} fraction {f} outside [0, 1]"
                )));
            }
        }
        let sum = self.train + self.validation + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DataError::BadSplit(format!("fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Manifest indices per split, each sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    /// Degenerate strata (classes too small to land in every split).
    pub warnings: Vec<String>,
}

/// Stratified split of `manifest` by label.
pub fn split(manifest: &DatasetManifest, spec: &SplitSpec) -> Result<SplitIndices> {
    split_by_labels(&manifest.labels(), spec)
}

/// Stratified split over a bare label sequence.
///
/// Global sizes are fixed first: validation and test get their fractions
/// rounded to the nearest frame, train is the residual, so leftover frames
/// land in train. Each class is then allocated by largest remainder against
/// the global quotas, with round-ups steered toward the classes carrying the
/// most leftover fraction. Every class stays within one frame of exact
/// proportionality in all three splits, and the whole procedure depends only
/// on the label sequence and `spec.seed`.
pub fn split_by_labels(labels: &[usize], spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;

    let mut classes: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, &label) in labels.iter().enumerate() {
        match classes.iter_mut().find(|(l, _)| *l == label) {
            Some((_, idx)) => idx.push(i),
            None => classes.push((label, vec![i])),
        }
    }
    classes.sort_by_key(|(label, _)| *label);

    let counts: Vec<usize> = classes.iter().map(|(_, idx)| idx.len()).collect();
    let (val_counts, test_counts) = allocate(&counts, spec.validation, spec.test);

    let mut warnings = Vec::new();
    for ((label, _), &n) in classes.iter().zip(&counts) {
        if n < 3 {
            warnings.push(format!(
                "class {label} has only {n} frame(s); it cannot reach every split"
            ));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = SplitIndices {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        warnings,
    };
    for (c, (_, indices)) in classes.into_iter().enumerate() {
        let mut indices = indices;
        indices.shuffle(&mut rng);
        let v = val_counts[c];
        let t = test_counts[c];
        out.validation.extend_from_slice(&indices[..v]);
        out.test.extend_from_slice(&indices[v..v + t]);
        out.train.extend_from_slice(&indices[v + t..]);
    }
    out.train.sort_unstable();
    out.validation.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// Per-class validation and test counts hitting exact global quotas.
///
/// Validation and test start from per-class floors. The round-ups needed to
/// reach each quota go to the classes with the largest leftover fraction
/// summed over both splits, counting earlier round-ups against a class, so
/// the train residual also lands within one frame of its exact share.
fn allocate(counts: &[usize], f_val: f64, f_test: f64) -> (Vec<usize>, Vec<usize>) {
    let n_total: usize = counts.iter().sum();
    let quota_val = ((f_val * n_total as f64).round() as usize).min(n_total);
    let quota_test =
        ((f_test * n_total as f64).round() as usize).min(n_total - quota_val);

    let mut val: Vec<usize> = Vec::with_capacity(counts.len());
    let mut test: Vec<usize> = Vec::with_capacity(counts.len());
    let mut rem_val: Vec<f64> = Vec::with_capacity(counts.len());
    let mut rem_test: Vec<f64> = Vec::with_capacity(counts.len());
    for &n in counts {
        let exact_v = f_val * n as f64;
        let exact_t = f_test * n as f64;
        val.push(exact_v.floor() as usize);
        test.push(exact_t.floor() as usize);
        rem_val.push(exact_v.fract());
        rem_test.push(exact_t.fract());
    }

    let mut bumps = vec![0usize; counts.len()];
    let pass = |alloc: &mut Vec<usize>,
                    other: &[usize],
                    need: usize,
                    rem_this: &[f64],
                    bumps: &mut [usize]| {
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| {
            let key = |c: usize| rem_val[c] + rem_test[c] - bumps[c] as f64;
            (key(b), rem_this[b])
                .partial_cmp(&(key(a), rem_this[a]))
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut left = need;
        for c in order {
            if left == 0 {
                break;
            }
            if alloc[c] + other[c] < counts[c] {
                alloc[c] += 1;
                bumps[c] += 1;
                left -= 1;
            }
        }
        debug_assert_eq!(left, 0, "quota unreachable under class capacities");
    };

    let deficit_val = quota_val - val.iter().sum::<usize>();
    pass(&mut val, &test, deficit_val, &rem_val, &mut bumps);
    let deficit_test = quota_test - test.iter().sum::<usize>();
    pass(&mut test, &val, deficit_test, &rem_test, &mut bumps);

    (val, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::FrameRecord;
    use crate::modsig::{ModulationScheme, SignalMeta};
    use proptest::prelude::*;

    fn toy_manifest(labels: &[usize]) -> DatasetManifest {
        let records = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| FrameRecord {
                offset: (i * 8 * 16) as u64,
                samples: 16,
                meta: SignalMeta {
                    scheme: ModulationScheme::ALL[label],
                    label,
                    sps: 8,
                    rolloff: 0.35,
                    cfo: 0.0,
                    snr_db: 10.0,
                    rng_seed: i as u64,
                    profile_tag: "toy".into(),
                },
            })
            .collect();
        DatasetManifest {
            format_version: super::super::FORMAT_VERSION,
            profile: "toy".into(),
            master_seed: 0,
            records,
        }
    }

    fn check_partition(n: usize, s: &SplitIndices) {
        let mut all: Vec<usize> = s
            .train
            .iter()
            .chain(&s.validation)
            .chain(&s.test)
            .copied()
            .collect();
        all.sort_unstable();
        let expect: Vec<usize> = (0..n).collect();
        assert_eq!(all, expect, "splits must partition the dataset");
    }

    fn class_count(indices: &[usize], labels: &[usize], label: usize) -> usize {
        indices.iter().filter(|&&i| labels[i] == label).count()
    }

    #[test]
    fn thousand_frames_default_split_is_700_50_250() {
        let labels: Vec<usize> = (0..1000).map(|i| i % 8).collect();
        let m = toy_manifest(&labels);
        let s = split(&m, &SplitSpec::default()).unwrap();
        assert_eq!(s.train.len(), 700);
        assert_eq!(s.validation.len(), 50);
        assert_eq!(s.test.len(), 250);
        check_partition(1000, &s);
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn per_class_counts_stay_within_one_frame() {
        let mut labels = Vec::new();
        for (label, n) in [(0, 37), (1, 120), (2, 53), (3, 9), (5, 211)] {
            labels.extend(std::iter::repeat(label).take(n));
        }
        let m = toy_manifest(&labels);
        let spec = SplitSpec::default();
        let s = split(&m, &spec).unwrap();
        for (label, n) in [(0usize, 37usize), (1, 120), (2, 53), (3, 9), (5, 211)] {
            for (frac, indices) in [
                (spec.train, &s.train),
                (spec.validation, &s.validation),
                (spec.test, &s.test),
            ] {
                let got = class_count(indices, &labels, label) as f64;
                let want = frac * n as f64;
                assert!(
                    (got - want).abs() <= 1.0 + 1e-9,
                    "class {label}: got {got}, proportional share {want}"
                );
            }
        }
    }

    #[test]
    fn same_seed_reproduces_different_seed_moves_frames() {
        let labels: Vec<usize> = (0..400).map(|i| (i * 7) % 8).collect();
        let m = toy_manifest(&labels);
        let a = split(&m, &SplitSpec::default()).unwrap();
        let b = split(&m, &SplitSpec::default()).unwrap();
        assert_eq!(a, b);
        let c = split(&m, &SplitSpec { seed: 1, ..SplitSpec::default() }).unwrap();
        assert_eq!(c.train.len(), a.train.len());
        assert_ne!(c.train, a.train);
    }

    #[test]
    fn tiny_class_warns_but_splits() {
        let labels = [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1];
        let m = toy_manifest(&labels);
        let s = split(&m, &SplitSpec::default()).unwrap();
        assert_eq!(s.warnings.len(), 1);
        assert!(s.warnings[0].contains("class 1"));
        check_partition(11, &s);
    }

    #[test]
    fn bad_fractions_rejected() {
        let m = toy_manifest(&[0, 1]);
        let bad = SplitSpec { train: 0.8, validation: 0.1, test: 0.2, seed: 0 };
        assert!(matches!(split(&m, &bad), Err(DataError::BadSplit(_))));
        let neg = SplitSpec { train: 1.2, validation: -0.1, test: -0.1, seed: 0 };
        assert!(matches!(split(&m, &neg), Err(DataError::BadSplit(_))));
    }

    #[test]
    fn empty_manifest_splits_empty() {
        let m = toy_manifest(&[]);
        let s = split(&m, &SplitSpec::default()).unwrap();
        assert!(s.train.is_empty() && s.validation.is_empty() && s.test.is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn split_is_exact_stratified_and_deterministic(
            counts in proptest::collection::vec(1usize..160, 1..=8),
            seed in 0u64..1000,
            which in 0usize..4,
        ) {
            let fracs = [
                (0.70, 0.05, 0.25),
                (0.80, 0.10, 0.10),
                (0.60, 0.20, 0.20),
                (0.50, 0.25, 0.25),
            ][which];
            let mut labels = Vec::new();
            for (label, &n) in counts.iter().enumerate() {
                labels.extend(std::iter::repeat(label).take(n));
            }
            let m = toy_manifest(&labels);
            let spec = SplitSpec { train: fracs.0, validation: fracs.1, test: fracs.2, seed };
            let s = split(&m, &spec).unwrap();
            let n_total: usize = counts.iter().sum();
            check_partition(n_total, &s);

            let quota_val = (fracs.1 * n_total as f64).round() as usize;
            let quota_test = (fracs.2 * n_total as f64).round() as usize;
            prop_assert_eq!(s.validation.len(), quota_val.min(n_total));
            prop_assert_eq!(s.test.len(), quota_test.min(n_total - s.validation.len()));

            for (label, &n) in counts.iter().enumerate() {
                for (frac, indices) in [
                    (spec.train, &s.train),
                    (spec.validation, &s.validation),
                    (spec.test, &s.test),
                ] {
                    let got = class_count(indices, &labels, label) as f64;
                    prop_assert!((got - frac * n as f64).abs() <= 1.0 + 1e-9);
                }
            }

            let again = split(&m, &spec).unwrap();
            prop_assert_eq!(s, again);
        }
    }
}
