//! Waveform synthesis: SRRC pulse shaping for the linear schemes and
//! continuous-phase generation for MSK.

use super::srrc::srrc_taps;
use super::{Result, SigError, SRRC_SPAN};
use num_complex::Complex64;

/// Symbols required by [`modulate_linear`] to emit `length` samples with
/// every sample in filter steady state.
pub fn linear_symbols_needed(length: usize, sps: u32) -> usize {
    length.div_ceil(sps as usize) + SRRC_SPAN + 1
}

/// Bits required by [`msk_modulate`] to emit `length` samples.
pub fn msk_bits_needed(length: usize, sps: u32) -> usize {
    length.div_ceil(sps as usize)
}

/// Zero-stuffed upsampling by `sps` followed by SRRC filtering, trimmed
/// to exactly `length` samples. The returned slice starts one full pulse
/// span into the filtered stream, so the leading transient is discarded
/// and the peak of data symbol `j` (input symbol `SRRC_SPAN/2 + j`) lands
/// on output sample `j * sps`. With sps = 1 the filter degenerates to a
/// near-impulse and the output tracks the symbol sequence directly.
pub fn modulate_linear(
    symbols: &[Complex64],
    sps: u32,
    rolloff: f64,
    length: usize,
) -> Result<Vec<Complex64>> {
    if length == 0 {
        return Err(SigError::InvalidParam {
            param: "length",
            detail: "must be nonzero".into(),
        });
    }
    let needed = linear_symbols_needed(length, sps);
    if symbols.len() < needed {
        return Err(SigError::InsufficientSymbols {
            needed,
            got: symbols.len(),
        });
    }
    let taps = srrc_taps(rolloff, sps, SRRC_SPAN)?;
    let sps = sps as usize;
    let skip = SRRC_SPAN * sps; // samples before the first steady-state one

    // Sparse convolution: the upsampled stream is zero except at symbol
    // positions, so accumulate one scaled copy of the taps per symbol.
    let full_len = symbols.len() * sps + taps.len() - 1;
    let mut full = vec![Complex64::new(0.0, 0.0); full_len];
    for (k, sym) in symbols.iter().enumerate() {
        let base = k * sps;
        for (i, h) in taps.iter().enumerate() {
            full[base + i] += sym * h;
        }
    }
    Ok(full[skip..skip + length].to_vec())
}

/// Minimum-shift keying: continuous-phase FSK with modulation index 1/2.
/// The phase ramps linearly by +pi/2 over a bit interval for a 0 bit and
/// by -pi/2 for a 1 bit, starting from phase zero, giving a constant
/// envelope of exactly one.
pub fn msk_modulate(bits: &[u8], sps: u32, length: usize) -> Result<Vec<Complex64>> {
    if sps < 2 {
        return Err(SigError::InvalidParam {
            param: "sps",
            detail: format!("{sps} is below the minimum of 2"),
        });
    }
    if length == 0 {
        return Err(SigError::InvalidParam {
            param: "length",
            detail: "must be nonzero".into(),
        });
    }
    let needed = msk_bits_needed(length, sps);
    if bits.len() < needed {
        return Err(SigError::InsufficientSymbols {
            needed,
            got: bits.len(),
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
    let sps = sps as usize;
    let step = std::f64::consts::FRAC_PI_2 / sps as f64;
    let mut out = Vec::with_capacity(length);
    let mut phase = 0.0f64;
    for n in 0..length {
        out.push(Complex64::new(phase.cos(), phase.sin()));
        let bit = bits[n / sps];
        phase += if bit == 0 { step } else { -step };
        if phase > std::f64::consts::PI {
            phase -= 2.0 * std::f64::consts::PI;
        } else if phase < -std::f64::consts::PI {
            phase += 2.0 * std::f64::consts::PI;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modsig::constellation::map_symbols;
    use crate::modsig::ModulationScheme;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symbols(rng: &mut ChaCha8Rng, scheme: ModulationScheme, n: usize) -> Vec<Complex64> {
        let bps = crate::modsig::bits_per_symbol(scheme);
        let bits: Vec<u8> = (0..n * bps).map(|_| rng.random_range(0..2u8)).collect();
        map_symbols(scheme, &bits).unwrap()
    }

    #[test]
    fn output_length_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(sps, length) in &[(8u32, 32768usize), (2, 4096), (1, 500), (23, 1000)] {
            let n = linear_symbols_needed(length, sps);
            let syms = random_symbols(&mut rng, ModulationScheme::Qpsk, n);
            let out = modulate_linear(&syms, sps, 0.35, length).unwrap();
            assert_eq!(out.len(), length);
        }
    }

    #[test]
    fn insufficient_symbols_rejected() {
        let syms = vec![Complex64::new(1.0, 0.0); 10];
        let err = modulate_linear(&syms, 8, 0.35, 32768).unwrap_err();
        match err {
            SigError::InsufficientSymbols { needed, got } => {
                assert_eq!(needed, 4096 + SRRC_SPAN + 1);
                assert_eq!(got, 10);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    /// Data symbol j peaks at output sample j * sps: recover each symbol
    /// from an isolated-impulse stream.
    #[test]
    fn steady_state_alignment_places_symbol_peaks_on_grid() {
        let sps = 8u32;
        let length = 512usize;
        let n = linear_symbols_needed(length, sps);
        // One nonzero symbol in the middle of the data region.
        let probe = 20usize; // data symbol index
        let mut syms = vec![Complex64::new(0.0, 0.0); n];
        syms[SRRC_SPAN / 2 + probe] = Complex64::new(1.0, -1.0);
        let out = modulate_linear(&syms, sps, 0.35, length).unwrap();

        let taps = srrc_taps(0.35, sps, SRRC_SPAN).unwrap();
        let peak_tap = taps[taps.len() / 2];
        let at_peak = out[probe * sps as usize];
        assert!((at_peak.re - peak_tap).abs() < 1e-12);
        assert!((at_peak.im + peak_tap).abs() < 1e-12);
        // The grid position is the max-magnitude sample of the pulse.
        let max_idx = (0..length)
            .max_by(|&a, &b| out[a].norm().partial_cmp(&out[b].norm()).unwrap())
            .unwrap();
        assert_eq!(max_idx, probe * sps as usize);
    }

    /// Mean waveform power approaches E[|symbol|^2] / sps for long frames.
    #[test]
    fn waveform_power_matches_symbol_energy_over_sps() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sps = 4u32;
        let length = 32768usize;
        let syms = random_symbols(&mut rng, ModulationScheme::Qam16, linear_symbols_needed(length, sps));
        let out = modulate_linear(&syms, sps, 0.5, length).unwrap();
        let p: f64 = out.iter().map(|s| s.norm_sqr()).sum::<f64>() / length as f64;
        let expect = 1.0 / sps as f64;
        assert!(
            (p - expect).abs() < 0.05 * expect,
            "power {p} vs expected {expect}"
        );
    }

    #[test]
    fn msk_has_constant_envelope_and_quarter_turn_increments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sps = 8u32;
        let length = 4096usize;
        let bits: Vec<u8> = (0..msk_bits_needed(length, sps))
            .map(|_| rng.random_range(0..2u8))
            .collect();
        let out = msk_modulate(&bits, sps, length).unwrap();
        assert_eq!(out.len(), length);
        for s in &out {
            assert!((s.norm() - 1.0).abs() < 1e-12);
        }
        // Phase advance across each full bit interval is +/- pi/2.
        let sps = sps as usize;
        for k in 0..(length / sps - 1) {
            let z = out[(k + 1) * sps] * out[k * sps].conj();
            let inc = z.arg();
            let expect = if bits[k] == 0 { 1.0 } else { -1.0 } * std::f64::consts::FRAC_PI_2;
            assert!(
                (inc - expect).abs() < 1e-9,
                "bit {k}: increment {inc} vs {expect}"
            );
        }
        // Starts at phase zero.
        assert!((out[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn msk_rejects_degenerate_sps_and_short_bit_streams() {
        assert!(msk_modulate(&[0, 1], 1, 16).is_err());
        assert!(matches!(
            msk_modulate(&[0, 1], 4, 64),
            Err(SigError::InsufficientSymbols { needed: 16, got: 2 })
        ));
    }
}
