//! Scratch calibration harness for the scaled end-to-end runs. Not part of
//! the shipped crate; run as
//!   cargo run -p modcaps --example calibrate -- <mode> [args]

use std::time::Instant;

use modcaps::capsnet::NetworkConfig;
use modcaps::dataio::{split_by_labels, SplitSpec};
use modcaps::eval::shift_experiment;
use modcaps::modsig::{frame_seed, generate, DatasetProfile, ModulationScheme};
use modcaps::trainer::{evaluate_split, train, TrainConfig};

fn toy_profile(name: &str, schemes: Vec<ModulationScheme>, count: usize) -> DatasetProfile {
    let cfo = std::env::var("CAL_CFO").ok().and_then(|v| v.parse().ok()).unwrap_or(0.001f64);
    let snr_lo = std::env::var("CAL_SNR_LO").ok().and_then(|v| v.parse().ok()).unwrap_or(8.0f64);
    let snr_hi = std::env::var("CAL_SNR_HI").ok().and_then(|v| v.parse().ok()).unwrap_or(14.0f64);
    DatasetProfile {
        name: name.into(),
        schemes,
        sps_range: (2, 2),
        rolloff_range: (0.35, 0.35),
        cfo_range: (-cfo, cfo),
        snr_range_db: (snr_lo, snr_hi),
        frame_len: 4096,
        count,
    }
}

fn run_e2e(schemes: Vec<ModulationScheme>, count: usize, cfg: &TrainConfig, seed: u64) {
    let classes = schemes.len();
    let profile = toy_profile("cal", schemes, count);

    let t0 = Instant::now();
    let frames = generate(&profile, count, frame_seed(seed, 0)).unwrap();
    println!("generate {count} frames: {:.1}s", t0.elapsed().as_secs_f64());

    let labels: Vec<usize> = frames.iter().map(|f| f.meta.label).collect();
    let splits = split_by_labels(
        &labels,
        &SplitSpec {
            seed: frame_seed(seed, 2),
            ..SplitSpec::default()
        },
    )
    .unwrap();
    println!(
        "splits: {} train / {} val / {} test",
        splits.train.len(),
        splits.validation.len(),
        splits.test.len()
    );

    let net = NetworkConfig::for_frame_len(profile.frame_len, classes, frame_seed(seed, 3)).unwrap();
    println!("net trace: {:?}", net.shape_trace().unwrap());

    let t1 = Instant::now();
    let (model, report) = train(&net, cfg, &frames, &splits.train, &splits.validation).unwrap();
    let train_s = t1.elapsed().as_secs_f64();
    for e in &report.epochs {
        println!(
            "epoch {:2}  loss {:.4}  val_acc {:.4}  lr {:.5}  steps {}",
            e.epoch, e.train_loss, e.val_accuracy, e.learning_rate, e.steps
        );
    }
    println!(
        "train total {:.1}s  best epoch {:?}  best val {:?}",
        train_s,
        report.best_epoch,
        report.best_accuracy()
    );

    let t2 = Instant::now();
    let test = evaluate_split(&model, &frames, &splits.test, cfg.normalize_input).unwrap();
    println!(
        "test acc {:.4} ({}/{}) in {:.1}s   per-class {:?}",
        test.accuracy(),
        test.correct,
        test.total,
        t2.elapsed().as_secs_f64(),
        test.per_class_accuracy()
    );
    println!("TOTAL {:.1}s", t0.elapsed().as_secs_f64());
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode = args.first().map(String::as_str).unwrap_or("two");
    let get = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);

    match mode {
        // two <count> <epochs> <lr> <batch> <seed> <patience>
        "two" => {
            let cfg = TrainConfig {
                batch_size: get(4, 25.0) as usize,
                learning_rate: get(3, 0.01),
                max_epochs: get(2, 10.0) as usize,
                early_stop_patience: get(6, 50.0) as usize,
                lr_decay_factor: 0.5,
                lr_decay_period: 8,
                dataset_tag: "cal2".into(),
                ..TrainConfig::default()
            };
            run_e2e(
                vec![ModulationScheme::Bpsk, ModulationScheme::Qpsk],
                get(1, 1200.0) as usize,
                &cfg,
                get(5, 42.0) as u64,
            );
        }
        // eight <count> <epochs> <lr> <batch> <seed> <patience>
        "eight" => {
            let cfg = TrainConfig {
                batch_size: get(4, 25.0) as usize,
                learning_rate: get(3, 0.01),
                max_epochs: get(2, 6.0) as usize,
                early_stop_patience: get(6, 50.0) as usize,
                lr_decay_factor: 0.5,
                lr_decay_period: 8,
                dataset_tag: "cal8".into(),
                ..TrainConfig::default()
            };
            run_e2e(ModulationScheme::ALL.to_vec(), get(1, 4000.0) as usize, &cfg, get(5, 42.0) as u64);
        }
        // shift <count> <epochs> <lr> <batch> <seed> <frame_len>
        "shift" => {
            let count = get(1, 1600.0) as usize;
            let frame_len = get(6, 4096.0) as usize;
            let mut a = toy_profile("shift_a", ModulationScheme::ALL.to_vec(), count);
            a.frame_len = frame_len;
            let mut b = a.clone();
            b.name = "shift_b".into();
            b.cfo_range = (0.005, 0.015);
            b.count = count / 4;
            let cfg = TrainConfig {
                batch_size: get(4, 25.0) as usize,
                learning_rate: get(3, 0.01),
                max_epochs: get(2, 6.0) as usize,
                early_stop_patience: 50,
                lr_decay_factor: 0.5,
                lr_decay_period: 8,
                dataset_tag: "cal_shift".into(),
                ..TrainConfig::default()
            };
            let seed = get(5, 42.0) as u64;
            let t0 = Instant::now();
            let report = shift_experiment(&a, &b, 1.0, seed, false, &cfg, None).unwrap();
            println!(
                "seed {seed}: matched {:.4} shifted {:.4} gap {:.4} in {:.1}s",
                report.matched_accuracy,
                report.shifted_accuracy,
                report.gap,
                t0.elapsed().as_secs_f64()
            );
            for e in &report.train_report.epochs {
                println!(
                    "epoch {:2}  loss {:.4}  val_acc {:.4}",
                    e.epoch, e.train_loss, e.val_accuracy
                );
            }
        }
        // fab <tone|ellip> <count> <epochs> <lr> <batch> <seed>
        "fab" => {
            use num_complex::Complex64;
            use rand::{Rng as _, SeedableRng as _};
            use std::f64::consts::TAU;
            let kind = args.get(1).cloned().unwrap_or_else(|| "tone".into());
            let count = get(2, 1200.0) as usize;
            let seed = get(6, 42.0) as u64;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let frames: Vec<modcaps::modsig::ComplexSignal> = (0..count)
                .map(|i| {
                    let label = i % 2;
                    let samples: Vec<Complex64> = match kind.as_str() {
                        "tone" => {
                            let freq = if label == 0 { 0.11 } else { -0.11 };
                            let phase0 = rng.random::<f64>() * TAU;
                            (0..4096)
                                .map(|k| {
                                    let ph = phase0 + TAU * freq * k as f64;
                                    let u1: f64 = rng.random::<f64>().max(1e-12);
                                    let u2: f64 = rng.random::<f64>();
                                    let r = (-2.0 * u1.ln()).sqrt() * 0.3;
                                    Complex64::new(ph.cos(), ph.sin())
                                        + Complex64::new(r * (TAU * u2).cos(), r * (TAU * u2).sin())
                                })
                                .collect()
                        }
                        _ => {
                            // Circular vs squashed complex noise: a purely
                            // quadratic (even) class feature.
                            let q_scale = if label == 0 { 1.0 } else { 0.3 };
                            (0..4096)
                                .map(|_| {
                                    let u1: f64 = rng.random::<f64>().max(1e-12);
                                    let u2: f64 = rng.random::<f64>();
                                    let r = (-2.0 * u1.ln()).sqrt();
                                    Complex64::new(
                                        r * (TAU * u2).cos(),
                                        r * (TAU * u2).sin() * q_scale,
                                    )
                                })
                                .collect()
                        }
                    };
                    modcaps::modsig::ComplexSignal {
                        samples,
                        meta: modcaps::modsig::SignalMeta {
                            scheme: ModulationScheme::ALL[label],
                            label,
                            sps: 2,
                            rolloff: 0.35,
                            cfo: 0.0,
                            snr_db: 10.0,
                            rng_seed: seed ^ i as u64,
                            profile_tag: "fab".into(),
                        },
                    }
                })
                .collect();
            let labels: Vec<usize> = frames.iter().map(|f| f.meta.label).collect();
            let splits = split_by_labels(
                &labels,
                &SplitSpec { seed: 9, ..SplitSpec::default() },
            )
            .unwrap();
            let net = NetworkConfig::for_frame_len(4096, 2, seed ^ 1).unwrap();
            let cfg = TrainConfig {
                batch_size: get(5, 25.0) as usize,
                learning_rate: get(4, 0.01),
                max_epochs: get(3, 8.0) as usize,
                early_stop_patience: 50,
                dataset_tag: "fab".into(),
                ..TrainConfig::default()
            };
            let (model, report) = train(&net, &cfg, &frames, &splits.train, &splits.validation).unwrap();
            for e in &report.epochs {
                println!(
                    "epoch {:2}  loss {:.4}  val_acc {:.4}",
                    e.epoch, e.train_loss, e.val_accuracy
                );
            }
            let test = evaluate_split(&model, &frames, &splits.test, cfg.normalize_input).unwrap();
            println!("kind {kind}: test acc {:.4}", test.accuracy());
        }
        other => eprintln!("unknown mode {other}"),
    }
}
