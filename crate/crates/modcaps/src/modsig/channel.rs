//! Channel impairments and the spectrum-based SNR measurement.

use super::{ComplexSignal, ModulationScheme, Result, SigError};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Rotates the signal by a carrier frequency offset, `cfo` in cycles per
/// sample: `s[n] <- s[n] * exp(j 2 pi cfo n)`. Power is unchanged.
pub fn apply_cfo(samples: &mut [Complex64], cfo: f64) -> Result<()> {
    if !(cfo.is_finite() && cfo.abs() < 0.5) {
        return Err(SigError::InvalidParam {
            param: "cfo",
            detail: format!("{cfo} outside (-0.5, 0.5)"),
        });
    }
    if cfo == 0.0 {
        return Ok(());
    }
    for (n, s) in samples.iter_mut().enumerate() {
        let angle = 2.0 * PI * cfo * n as f64;
        *s *= Complex64::new(angle.cos(), angle.sin());
    }
    Ok(())
}

/// Fraction of the sampling bandwidth occupied by the signal: the SRRC
/// two-sided width `(1 + rolloff) / sps` for linear schemes, and the MSK
/// main lobe `1.5 / sps`, both capped at the full band.
pub fn occupied_band_fraction(scheme: ModulationScheme, sps: u32, rolloff: f64) -> f64 {
    let w = if scheme.is_linear() {
        (1.0 + rolloff) / sps as f64
    } else {
        1.5 / sps as f64
    };
    w.min(1.0)
}

/// Adds circular complex white Gaussian noise so the in-band SNR — signal
/// power over the noise power falling inside the occupied band — hits
/// `target_db`. Uses the current metadata label to split signal from
/// already-present noise, so augmenting an existing noisy frame to a lower
/// SNR is exact in expectation. The frame is left unnormalized; callers
/// rescale afterwards. A `+inf` target is a no-op.
pub fn add_noise_to_snr(
    signal: &mut ComplexSignal,
    target_db: f64,
    rng: &mut impl Rng,
) -> Result<()> {
    if target_db.is_nan() {
        return Err(SigError::InvalidParam {
            param: "target_db",
            detail: "NaN".into(),
        });
    }
    if target_db == f64::INFINITY {
        return Ok(());
    }
    let current_db = signal.meta.snr_db;
    if target_db >= current_db {
        return Err(SigError::SnrIncrease {
            current_db,
            target_db,
        });
    }
    let band = occupied_band_fraction(signal.meta.scheme, signal.meta.sps, signal.meta.rolloff);
    let p_total = signal.mean_power();
    if p_total <= 0.0 {
        return Err(SigError::InvalidParam {
            param: "signal",
            detail: "zero power".into(),
        });
    }
    // In-band SNR s relates total noise power v to signal power p by
    // s = p / (v * band). Split the current total power accordingly.
    let current_lin = 10f64.powf(current_db / 10.0); // +inf stays +inf
    let p_signal = p_total / (1.0 + 1.0 / (current_lin * band));
    let v_current = p_total - p_signal;
    let target_lin = 10f64.powf(target_db / 10.0);
    let v_needed = p_signal / (target_lin * band);
    let v_add = v_needed - v_current;
    debug_assert!(v_add > 0.0);

    let sigma = (v_add / 2.0).sqrt(); // per real component
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    for s in &mut signal.samples {
        // Fixed draw order: real then imaginary.
        let re = normal.sample(rng);
        let im = normal.sample(rng);
        *s += Complex64::new(re, im);
    }
    signal.meta.snr_db = target_db;
    Ok(())
}

/// Measures the in-band SNR label from the frame's periodogram. Bins
/// within half the occupied bandwidth of the CFO (circularly) count as
/// in-band; the rest estimate the white noise floor, which is then
/// subtracted from the in-band power. Undefined when the occupied band
/// covers (nearly) the whole sampling bandwidth or when the noise floor
/// swallows the band entirely.
pub fn measure_inband_snr(signal: &ComplexSignal) -> Result<f64> {
    let band = occupied_band_fraction(signal.meta.scheme, signal.meta.sps, signal.meta.rolloff);
    if band >= 0.995 {
        return Err(SigError::MeasurementUndefined(format!(
            "occupied band fraction {band:.3} leaves no noise-only region"
        )));
    }
    let l = signal.samples.len();
    if l < 64 {
        return Err(SigError::MeasurementUndefined(format!(
            "frame of {l} samples is too short"
        )));
    }
    let mut buf = signal.samples.clone();
    FftPlanner::new().plan_fft_forward(l).process(&mut buf);

    let cfo = signal.meta.cfo;
    let half_band = band / 2.0;
    let mut p_in = 0.0f64;
    let mut p_out = 0.0f64;
    let mut bins_in = 0usize;
    for (k, x) in buf.iter().enumerate() {
        let f = k as f64 / l as f64;
        let f = if f >= 0.5 { f - 1.0 } else { f };
        let mut dist = (f - cfo).abs();
        if dist > 0.5 {
            dist = 1.0 - dist;
        }
        let p = x.norm_sqr();
        if dist <= half_band {
            p_in += p;
            bins_in += 1;
        } else {
            p_out += p;
        }
    }
    // Parseval: sum |X[k]|^2 / L^2 = mean power; only ratios matter here.
    let in_fraction = bins_in as f64 / l as f64;
    if in_fraction >= 1.0 {
        return Err(SigError::MeasurementUndefined(
            "every bin fell in-band".into(),
        ));
    }
    let noise_total = p_out / (1.0 - in_fraction); // white-noise extrapolation
    let p_signal = p_in - noise_total * in_fraction;
    if p_signal <= 0.0 {
        return Err(SigError::MeasurementUndefined(
            "in-band power does not rise above the noise floor".into(),
        ));
    }
    if noise_total <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (p_signal / (noise_total * band)).log10())
}
