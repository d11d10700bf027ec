//! Accuracy as a function of labeled SNR.

use super::{EvalError, Result};
use crate::capsnet::ModelState;
use crate::modsig::ComplexSignal;
use crate::trainer::evaluate_split;

/// One SNR bin: `[lo_db, hi_db)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrBin {
    pub lo_db: f64,
    pub hi_db: f64,
    pub count: usize,
    pub correct: usize,
}

impl SnrBin {
    pub fn center_db(&self) -> f64 {
        0.5 * (self.lo_db + self.hi_db)
    }

    /// None flags an empty bin; it carries no accuracy estimate.
    pub fn accuracy(&self) -> Option<f64> {
        (self.count > 0).then(|| self.correct as f64 / self.count as f64)
    }
}

/// Accuracy per SNR bin. Bins tile the labeled-SNR range of the evaluated
/// frames contiguously, so interior bins with no frames stay visible as
/// flagged gaps rather than silently vanishing.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrAccuracyCurve {
    pub bin_width_db: f64,
    pub bins: Vec<SnrBin>,
    /// Frames whose labeled SNR is not finite (clean frames).
    pub unbinned: usize,
}

impl SnrAccuracyCurve {
    /// Accuracy over every binned frame.
    pub fn overall_accuracy(&self) -> f64 {
        let correct: usize = self.bins.iter().map(|b| b.correct).sum();
        let count: usize = self.bins.iter().map(|b| b.count).sum();
        correct as f64 / count as f64
    }

    pub fn nonempty_bins(&self) -> impl Iterator<Item = &SnrBin> {
        self.bins.iter().filter(|b| b.count > 0)
    }

    /// Plot-ready CSV of the nonempty bins.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_center_db,accuracy,count\n");
        for bin in self.nonempty_bins() {
            out.push_str(&format!(
                "{},{},{}\n",
                bin.center_db(),
                bin.accuracy().unwrap(),
                bin.count
            ));
        }
        out
    }
}

/// Bins `indices` by each frame's labeled (metadata) SNR and scores the
/// model per bin. Bin edges sit at integer multiples of `bin_width_db`.
pub fn accuracy_vs_snr(
    model: &ModelState,
    frames: &[ComplexSignal],
    indices: &[usize],
    bin_width_db: f64,
    normalize: bool,
) -> Result<SnrAccuracyCurve> {
    if !(bin_width_db.is_finite() && bin_width_db > 0.0) {
        return Err(EvalError::Invalid(format!(
            "bin width {bin_width_db} dB must be positive"
        )));
    }
    let eval = evaluate_split(model, frames, indices, normalize)?;

    let bin_of = |snr: f64| (snr / bin_width_db).floor() as i64;
    let mut lo_bin = i64::MAX;
    let mut hi_bin = i64::MIN;
    let mut unbinned = 0;
    for &i in indices {
        let snr = frames[i].meta.snr_db;
        if snr.is_finite() {
            lo_bin = lo_bin.min(bin_of(snr));
            hi_bin = hi_bin.max(bin_of(snr));
        } else {
            unbinned += 1;
        }
    }

    let mut bins: Vec<SnrBin> = if lo_bin > hi_bin {
        Vec::new()
    } else {
        (lo_bin..=hi_bin)
            .map(|b| SnrBin {
                lo_db: b as f64 * bin_width_db,
                hi_db: (b + 1) as f64 * bin_width_db,
                count: 0,
                correct: 0,
            })
            .collect()
    };
    for (&i, &pred) in indices.iter().zip(&eval.predictions) {
        let snr = frames[i].meta.snr_db;
        if !snr.is_finite() {
            continue;
        }
        let bin = &mut bins[(bin_of(snr) - lo_bin) as usize];
        bin.count += 1;
        bin.correct += usize::from(pred == frames[i].meta.label);
    }

    Ok(SnrAccuracyCurve {
        bin_width_db,
        bins,
        unbinned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capsnet::{small_config, tiny_config};
    use crate::dataio::{split_by_labels, SplitSpec};
    use crate::modsig::ModulationScheme;
    use crate::trainer::{train, TrainConfig};

    /// Two-class frames whose class feature is the sign of a tone frequency
    /// and whose difficulty is set by genuine additive noise at the labeled
    /// SNR. The model learns the feature quickly, and its accuracy really
    /// does fall off as the tone sinks into the noise.
    fn noisy_tone_frames(
        n: usize,
        len: usize,
        snr_lo_db: f64,
        snr_hi_db: f64,
        seed: u64,
    ) -> Vec<crate::modsig::ComplexSignal> {
        use num_complex::Complex64;
        use rand::{Rng as _, SeedableRng as _};
        use std::f64::consts::TAU;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = i % 2;
                let freq = if label == 0 { 0.11 } else { -0.11 };
                let snr_db = snr_lo_db + (snr_hi_db - snr_lo_db) * rng.random::<f64>();
                let sigma = (10f64.powf(-snr_db / 10.0) / 2.0).sqrt();
                let phase0 = rng.random::<f64>() * TAU;
                let samples = (0..len)
                    .map(|k| {
                        let ph = phase0 + TAU * freq * k as f64;
                        let u1: f64 = rng.random::<f64>().max(1e-12);
                        let u2: f64 = rng.random::<f64>();
                        let r = (-2.0 * u1.ln()).sqrt() * sigma;
                        Complex64::new(ph.cos(), ph.sin())
                            + Complex64::new(r * (TAU * u2).cos(), r * (TAU * u2).sin())
                    })
                    .collect();
                crate::modsig::ComplexSignal {
                    samples,
                    meta: crate::modsig::SignalMeta {
                        scheme: ModulationScheme::ALL[label],
                        label,
                        sps: 2,
                        rolloff: 0.35,
                        cfo: 0.0,
                        snr_db,
                        rng_seed: seed ^ i as u64,
                        profile_tag: "tone_curve".into(),
                    },
                }
            })
            .collect()
    }

    /// End-to-end direction check: a trained two-class model should do no
    /// worse at the top of its SNR range than at the bottom, scored on
    /// held-out frames. Everything is seeded, so the outcome is a fixed
    /// fact of the pipeline.
    #[test]
    fn high_snr_beats_low_snr_for_trained_toy_model() {
        let frames = noisy_tone_frames(600, 512, -10.0, 14.0, 41);
        let labels: Vec<usize> = frames.iter().map(|f| f.meta.label).collect();
        let spec = SplitSpec {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
            seed: 4,
        };
        let splits = split_by_labels(&labels, &spec).unwrap();

        let net = small_config(512, 2, 17);
        let cfg = TrainConfig {
            batch_size: 25,
            max_epochs: 10,
            learning_rate: 0.01,
            early_stop_patience: 50,
            dataset_tag: "tone_curve".into(),
            ..TrainConfig::default()
        };
        let (model, report) = train(&net, &cfg, &frames, &splits.train, &splits.validation)
            .unwrap();
        assert!(
            report.best_accuracy().unwrap() > 0.8,
            "toy model failed to train: {report:?}"
        );

        let curve = accuracy_vs_snr(&model, &frames, &splits.test, 8.0, true).unwrap();
        let nonempty: Vec<&SnrBin> = curve.nonempty_bins().collect();
        assert!(nonempty.len() >= 2, "want a low and a high bin: {curve:?}");
        let low = nonempty.first().unwrap();
        let high = nonempty.last().unwrap();
        assert!(
            high.accuracy().unwrap() >= low.accuracy().unwrap() + 0.1,
            "accuracy should degrade toward low SNR: {curve:?}"
        );

        let weighted: f64 = curve
            .nonempty_bins()
            .map(|b| b.accuracy().unwrap() * b.count as f64)
            .sum::<f64>()
            / curve.bins.iter().map(|b| b.count).sum::<usize>() as f64;
        assert!((weighted - curve.overall_accuracy()).abs() < 1e-12);
    }

    #[test]
    fn single_wide_bin_equals_overall_accuracy() {
        let net = tiny_config(2, 1);
        let mut model = crate::capsnet::ModelState::build(&net).unwrap();
        for i in 0..model.params.len() {
            model.params.get_mut(i).value.data_mut().fill(0.0);
        }
        let frames = testframes(40);
        let idx: Vec<usize> = (0..frames.len()).collect();
        let curve = accuracy_vs_snr(&model, &frames, &idx, 1e6, true).unwrap();
        let nonempty: Vec<&SnrBin> = curve.nonempty_bins().collect();
        assert_eq!(nonempty.len(), 1);
        assert_eq!(nonempty[0].count, 40);
        let eval = crate::trainer::evaluate_split(&model, &frames, &idx, true).unwrap();
        assert_eq!(nonempty[0].accuracy().unwrap(), eval.accuracy());
    }

    #[test]
    fn gaps_in_snr_coverage_stay_flagged() {
        let net = tiny_config(2, 1);
        let model = crate::capsnet::ModelState::build(&net).unwrap();
        let mut frames = testframes(12);
        for (i, f) in frames.iter_mut().enumerate() {
            // Two clusters, nothing between 3 and 9 dB.
            f.meta.snr_db = if i % 2 == 0 { 1.5 } else { 10.5 };
        }
        let idx: Vec<usize> = (0..frames.len()).collect();
        let curve = accuracy_vs_snr(&model, &frames, &idx, 1.0, true).unwrap();
        assert_eq!(curve.bins.len(), 10, "bins tile 1..11 dB");
        let empty = curve.bins.iter().filter(|b| b.count == 0).count();
        assert_eq!(empty, 8);
        assert_eq!(curve.nonempty_bins().count(), 2);
        let csv = curve.to_csv();
        assert_eq!(csv.lines().count(), 3, "header plus one line per nonempty bin");

        frames[0].meta.snr_db = f64::INFINITY;
        let curve = accuracy_vs_snr(&model, &frames, &idx, 1.0, true).unwrap();
        assert_eq!(curve.unbinned, 1);
        assert_eq!(curve.bins.iter().map(|b| b.count).sum::<usize>(), 11);
    }

    #[test]
    fn zero_bin_width_is_rejected() {
        let net = tiny_config(2, 1);
        let model = crate::capsnet::ModelState::build(&net).unwrap();
        let frames = testframes(4);
        let idx: Vec<usize> = (0..frames.len()).collect();
        assert!(matches!(
            accuracy_vs_snr(&model, &frames, &idx, 0.0, true),
            Err(EvalError::Invalid(_))
        ));
    }

    fn testframes(n: usize) -> Vec<crate::modsig::ComplexSignal> {
        use num_complex::Complex64;
        (0..n)
            .map(|i| {
                let label = i % 2;
                let samples = (0..64)
                    .map(|k| {
                        let phi = 0.3 * (k as f64) * (label as f64 + 1.0) + i as f64;
                        Complex64::new(phi.cos(), phi.sin())
                    })
                    .collect();
                crate::modsig::ComplexSignal {
                    samples,
                    meta: crate::modsig::SignalMeta {
                        scheme: ModulationScheme::ALL[label],
                        label,
                        sps: 8,
                        rolloff: 0.35,
                        cfo: 0.0,
                        snr_db: i as f64,
                        rng_seed: i as u64,
                        profile_tag: "curve".into(),
                    },
                }
            })
            .collect()
    }
}
