//! Fabricated frames for storage tests: cheap, deterministic, unit power.

use num_complex::Complex64;

use crate::modsig::{ComplexSignal, ModulationScheme, SignalMeta};

pub fn toy_frame(label: usize, len: usize, tag: &str, seed: u64, scale: f64) -> ComplexSignal {
    let phase0 = seed as f64 * 0.61803398875;
    let samples = (0..len)
        .map(|k| {
            let phi = phase0 + 0.37 * k as f64;
            Complex64::new(scale * phi.cos(), scale * phi.sin())
        })
        .collect();
    ComplexSignal {
        samples,
        meta: SignalMeta {
            scheme: ModulationScheme::ALL[label],
            label,
            sps: 8,
            rolloff: 0.35,
            cfo: 0.0015,
            snr_db: 4.0 + label as f64,
            rng_seed: seed,
            profile_tag: tag.to_string(),
        },
    }
}

pub fn toy_frames(n: usize, len: usize, tag: &str, seed_base: u64) -> Vec<ComplexSignal> {
    (0..n)
        .map(|i| toy_frame(i % 8, len, tag, seed_base + i as u64, 1.0))
        .collect()
}
