//! Demodulation oracle used to validate the synthesis chain.
//!
//! Re-derives the transmitted ground truth from the frame's metadata,
//! compensates the known CFO, matched-filters (or phase-differences, for
//! MSK), and counts symbol decisions against the truth. Gain is fitted
//! data-aided by least squares, so the oracle is insensitive to the
//! frame's power normalization.

use super::constellation::{constellation_points, quarter_turns_to_dibit};
use super::generate::{frame_bits, frame_symbols};
use super::srrc::srrc_taps;
use super::{ComplexSignal, ModulationScheme, Result, SigError, SRRC_SPAN};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Outcome of demodulating one frame against its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct DemodReport {
    pub scheme: ModulationScheme,
    /// Decisions compared (symbols for linear schemes, bit intervals for
    /// MSK, dibit increments for the differential scheme).
    pub symbols: usize,
    pub errors: usize,
}

impl DemodReport {
    pub fn ser(&self) -> f64 {
        if self.symbols == 0 {
            0.0
        } else {
            self.errors as f64 / self.symbols as f64
        }
    }
}

pub fn demod_oracle(signal: &ComplexSignal) -> Result<DemodReport> {
    let meta = &signal.meta;
    let len = signal.samples.len();
    if len == 0 {
        return Err(SigError::InvalidParam {
            param: "signal",
            detail: "empty frame".into(),
        });
    }
    // Undo the known carrier offset.
    let mut y = signal.samples.clone();
    if meta.cfo != 0.0 {
        for (n, s) in y.iter_mut().enumerate() {
            let angle = -2.0 * PI * meta.cfo * n as f64;
            *s *= Complex64::new(angle.cos(), angle.sin());
        }
    }

    if meta.scheme == ModulationScheme::Msk {
        return demod_msk(meta, &y, len);
    }
    demod_linear(meta, &y, len)
}

fn demod_msk(
    meta: &super::SignalMeta,
    y: &[Complex64],
    len: usize,
) -> Result<DemodReport> {
    let sps = meta.sps as usize;
    if sps < 2 || len <= sps {
        return Err(SigError::InvalidParam {
            param: "signal",
            detail: "too short for any phase decision".into(),
        });
    }
    let bits = frame_bits(meta, len);
    let decisions = (len - 1) / sps;
    let mut errors = 0usize;
    for k in 0..decisions {
        let z = y[(k + 1) * sps] * y[k * sps].conj();
        let decided = u8::from(z.im < 0.0); // phase advance of +pi/2 means 0
        if decided != bits[k] {
            errors += 1;
        }
    }
    Ok(DemodReport {
        scheme: meta.scheme,
        symbols: decisions,
        errors,
    })
}

fn demod_linear(
    meta: &super::SignalMeta,
    y: &[Complex64],
    len: usize,
) -> Result<DemodReport> {
    let sps = meta.sps as usize;
    let taps = srrc_taps(meta.rolloff, meta.sps, SRRC_SPAN)?;
    let half = SRRC_SPAN * sps / 2;

    // Data symbol j sits at sample j*sps; only symbols whose full pulse
    // support lies inside the frame are decided.
    let j_first = SRRC_SPAN / 2;
    if len < 2 * half + 1 {
        return Err(SigError::InvalidParam {
            param: "signal",
            detail: "too short for any matched-filter decision".into(),
        });
    }
    let j_last = (len - 1 - half) / sps;
    if j_last < j_first {
        return Err(SigError::InvalidParam {
            param: "signal",
            detail: "too short for any matched-filter decision".into(),
        });
    }

    let truth = frame_symbols(meta, len)?;
    // Correlate around each decision position.
    let decide_stat = |j: usize| -> Complex64 {
        let center = j * sps;
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, h) in taps.iter().enumerate() {
            acc += y[center - half + i] * h;
        }
        acc
    };

    // Data-aided complex gain fit.
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0f64;
    let stats: Vec<Complex64> = (j_first..=j_last).map(decide_stat).collect();
    for (j, z) in (j_first..=j_last).zip(&stats) {
        let s = truth[SRRC_SPAN / 2 + j];
        num += z * s.conj();
        den += s.norm_sqr();
    }
    let gain = num / den;
    if !(gain.re.is_finite() && gain.im.is_finite()) || gain.norm() == 0.0 {
        return Err(SigError::MeasurementUndefined(
            "degenerate gain estimate".into(),
        ));
    }

    let alphabet = constellation_points(meta.scheme)?;
    let nearest = |z: Complex64| -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, c) in alphabet.iter().enumerate() {
            let d = (z - gain * c).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    };

    if meta.scheme == ModulationScheme::Dqpsk {
        // Information lives in the quarter-turn increments between
        // consecutive decisions.
        let bits = frame_bits(meta, len);
        let indices: Vec<usize> = stats.iter().map(|&z| nearest(z)).collect();
        let mut errors = 0usize;
        let mut compared = 0usize;
        for (offset, pair) in indices.windows(2).enumerate() {
            let j = j_first + offset + 1; // data symbol of the second decision
            let turns = (4 + pair[1] - pair[0]) % 4;
            let decided = quarter_turns_to_dibit(turns as u32);
            let stream = SRRC_SPAN / 2 + j;
            let truth_dibit = (usize::from(bits[2 * stream]) << 1) | usize::from(bits[2 * stream + 1]);
            if decided != truth_dibit {
                errors += 1;
            }
            compared += 1;
        }
        return Ok(DemodReport {
            scheme: meta.scheme,
            symbols: compared,
            errors,
        });
    }

    let mut errors = 0usize;
    for (j, z) in (j_first..=j_last).zip(&stats) {
        let decided = alphabet[nearest(*z)];
        let s = truth[SRRC_SPAN / 2 + j];
        if (decided - s).norm() > 1e-9 {
            errors += 1;
        }
    }
    Ok(DemodReport {
        scheme: meta.scheme,
        symbols: j_last - j_first + 1,
        errors,
    })
}
