//! Gray-coded symbol maps for the linear constellation schemes.
//!
//! All constellations are scaled to unit average symbol energy. Bit
//! groups are read most-significant bit first. Square QAM uses an
//! independent Gray-coded amplitude ladder per axis (first half of the
//! group drives I, second half drives Q), so any adjacent-decision error
//! flips exactly one bit.

use super::{ModulationScheme, Result, SigError};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Bits carried per symbol (per bit interval for MSK).
pub fn bits_per_symbol(scheme: ModulationScheme) -> usize {
    match scheme {
        ModulationScheme::Bpsk | ModulationScheme::Msk => 1,
        ModulationScheme::Qpsk | ModulationScheme::Dqpsk => 2,
        ModulationScheme::Psk8 => 3,
        ModulationScheme::Qam16 => 4,
        ModulationScheme::Qam64 => 6,
        ModulationScheme::Qam256 => 8,
    }
}

/// Gray-coded PAM ladder: `ladder[pattern]` is the amplitude for that bit
/// pattern, with levels `-(M-1), ..., +(M-1)` assigned so neighbors differ
/// in one bit. Unnormalized.
fn gray_pam_ladder(bits: usize) -> Vec<f64> {
    let m = 1usize << bits;
    let mut ladder = vec![0.0; m];
    for (pos, slot) in (0..m).map(|p| p ^ (p >> 1)).enumerate() {
        ladder[slot] = -((m - 1) as f64) + 2.0 * pos as f64;
    }
    ladder
}

/// The decision alphabet for a scheme, indexed by bit-group pattern.
/// For the differential scheme the table holds the four absolute phases a
/// symbol can take; the pattern index then orders them counterclockwise
/// from the `pi/4` start (it is not a direct bit map, which lives in the
/// differential encoder).
pub fn constellation_points(scheme: ModulationScheme) -> Result<Vec<Complex64>> {
    match scheme {
        ModulationScheme::Msk => Err(SigError::NotLinear { scheme: "MSK" }),
        ModulationScheme::Bpsk => Ok(vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]),
        ModulationScheme::Psk8 => {
            // Walk the circle; the Gray code of the step index is the bit
            // pattern assigned to that point.
            let mut pts = vec![Complex64::new(0.0, 0.0); 8];
            for step in 0..8usize {
                let pattern = step ^ (step >> 1);
                let angle = 2.0 * PI * step as f64 / 8.0;
                pts[pattern] = Complex64::new(angle.cos(), angle.sin());
            }
            Ok(pts)
        }
        ModulationScheme::Dqpsk => Ok((0..4)
            .map(|k| {
                let angle = PI / 4.0 + PI / 2.0 * k as f64;
                Complex64::new(angle.cos(), angle.sin())
            })
            .collect()),
        ModulationScheme::Qpsk
        | ModulationScheme::Qam16
        | ModulationScheme::Qam64
        | ModulationScheme::Qam256 => {
            let bps = bits_per_symbol(scheme);
            let axis_bits = bps / 2;
            let ladder = gray_pam_ladder(axis_bits);
            // Unit average energy: E[i^2 + q^2] = 2 * mean(ladder^2).
            let mean_sq: f64 =
                ladder.iter().map(|a| a * a).sum::<f64>() / ladder.len() as f64;
            let scale = 1.0 / (2.0 * mean_sq).sqrt();
            let axis_mask = (1usize << axis_bits) - 1;
            Ok((0..1usize << bps)
                .map(|pattern| {
                    let i_pat = pattern >> axis_bits;
                    let q_pat = pattern & axis_mask;
                    Complex64::new(ladder[i_pat] * scale, ladder[q_pat] * scale)
                })
                .collect())
        }
    }
}

/// Maps a bit stream to constellation symbols. Bit groups are read
/// most-significant bit first; the differential scheme accumulates
/// quarter-turn Gray-coded phase increments starting from `e^{j pi/4}`.
pub fn map_symbols(scheme: ModulationScheme, bits: &[u8]) -> Result<Vec<Complex64>> {
    if scheme == ModulationScheme::Msk {
        return Err(SigError::NotLinear { scheme: "MSK" });
    }
    let bps = bits_per_symbol(scheme);
    if bits.len() % bps != 0 {
        return Err(SigError::RaggedBits {
            got: bits.len(),
            bits_per_symbol: bps,
        });
    }
    for (i, b) in bits.iter().enumerate() {
        if *b > 1 {
            return Err(SigError::InvalidParam {
                param: "bits",
                detail: format!("bit {i} has value {b}, expected 0 or 1"),
            });
        }
    }
    let patterns = bits.chunks_exact(bps).map(|group| {
        group
            .iter()
            .fold(0usize, |acc, b| (acc << 1) | usize::from(*b))
    });

    if scheme == ModulationScheme::Dqpsk {
        return Ok(dqpsk_encode(patterns, 0));
    }

    let table = constellation_points(scheme)?;
    Ok(patterns.map(|p| table[p]).collect())
}

/// Differential encoder shared by the two DQPSK variants. Phase state is
/// held in eighth turns so the shifted variant's half-quarter steps stay
/// exact integers.
fn dqpsk_encode(patterns: impl Iterator<Item = usize>, eighths_per_step: u32) -> Vec<Complex64> {
    // Gray map dibit -> number of quarter turns: 00->0, 01->1, 11->2,
    // 10->3 (counterclockwise), applied on top of the running phase.
    const QUARTER_TURNS: [u32; 4] = [0, 1, 3, 2];
    let mut state: u32 = 1; // eighth turns; the pi/4 reference
    let (lo, hi) = patterns.size_hint();
    let mut out = Vec::with_capacity(hi.unwrap_or(lo));
    for pattern in patterns {
        state = (state + 2 * QUARTER_TURNS[pattern] + eighths_per_step) % 8;
        let angle = PI / 4.0 * state as f64;
        out.push(Complex64::new(angle.cos(), angle.sin()));
    }
    out
}

/// Shifted variant of the differential scheme: every step adds a constant
/// eighth turn on top of the Gray-coded quarter turns, so successive
/// symbols alternate between two four-point grids (eight phases in all).
/// Opt-in entry point; [`map_symbols`] and the generation pipeline always
/// use the non-offset variant.
pub fn map_symbols_dqpsk_pi4(bits: &[u8]) -> Result<Vec<Complex64>> {
    if bits.len() % 2 != 0 {
        return Err(SigError::RaggedBits {
            got: bits.len(),
            bits_per_symbol: 2,
        });
    }
    for (i, b) in bits.iter().enumerate() {
        if *b > 1 {
            return Err(SigError::InvalidParam {
                param: "bits",
                detail: format!("bit {i} has value {b}, expected 0 or 1"),
            });
        }
    }
    let patterns = bits
        .chunks_exact(2)
        .map(|group| (usize::from(group[0]) << 1) | usize::from(group[1]));
    Ok(dqpsk_encode(patterns, 1))
}

/// Gray-decodes a differential dibit from a quarter-turn count (inverse of
/// the encoder's `00->0, 01->1, 11->2, 10->3`).
pub(crate) fn quarter_turns_to_dibit(turns: u32) -> usize {
    const INV: [usize; 4] = [0b00, 0b01, 0b11, 0b10];
    INV[(turns % 4) as usize]
}
