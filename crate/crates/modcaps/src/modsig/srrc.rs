//! Square-root raised-cosine pulse.

use super::{Result, SigError};

/// Square-root raised-cosine taps, unit energy, symmetric around the
/// center tap. `span_symbols` must be even; the filter covers
/// `span_symbols * sps + 1` samples. The two removable singularities of
/// the closed form (t = 0 and |t| = 1/(4 rolloff) symbol times) are
/// evaluated by their analytic limits.
pub fn srrc_taps(rolloff: f64, sps: u32, span_symbols: usize) -> Result<Vec<f64>> {
    if !(0.1..=1.0).contains(&rolloff) {
        return Err(SigError::InvalidParam {
            param: "rolloff",
            detail: format!("{rolloff} outside [0.1, 1.0]"),
        });
    }
    if sps < 1 {
        return Err(SigError::InvalidParam {
            param: "sps",
            detail: "must be at least 1".into(),
        });
    }
    if span_symbols == 0 || span_symbols % 2 != 0 {
        return Err(SigError::InvalidParam {
            param: "span_symbols",
            detail: format!("{span_symbols} is not a positive even count"),
        });
    }

    let half = (span_symbols / 2) as i64 * sps as i64;
    let mut taps = Vec::with_capacity(2 * half as usize + 1);
    for k in -half..=half {
        let t = k as f64 / sps as f64; // symbol times
        taps.push(srrc_value(rolloff, t));
    }

    let energy: f64 = taps.iter().map(|h| h * h).sum();
    let scale = 1.0 / energy.sqrt();
    for h in &mut taps {
        *h *= scale;
    }
    Ok(taps)
}

fn srrc_value(beta: f64, t: f64) -> f64 {
    use std::f64::consts::PI;
    if t == 0.0 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    let four_beta_t = 4.0 * beta * t;
    let denom_core = 1.0 - four_beta_t * four_beta_t;
    if denom_core.abs() < 1e-10 {
        // |t| = 1/(4 beta)
        let x = PI / (4.0 * beta);
        return (beta / 2f64.sqrt())
            * ((1.0 + 2.0 / PI) * x.sin() + (1.0 - 2.0 / PI) * x.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + four_beta_t * (PI * t * (1.0 + beta)).cos();
    num / (PI * t * denom_core)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taps_have_unit_energy_and_even_symmetry() {
        for &(beta, sps, span) in &[
            (0.1, 8u32, 16usize),
            (0.35, 8, 16),
            (0.5, 4, 16), // singularity t = 1/2 lands exactly on a tap
            (1.0, 2, 16),
            (0.25, 1, 16), // singularity t = 1 on a tap, sps = 1 edge
        ] {
            let taps = srrc_taps(beta, sps, span).unwrap();
            assert_eq!(taps.len(), span * sps as usize + 1);
            let energy: f64 = taps.iter().map(|h| h * h).sum();
            assert!((energy - 1.0).abs() < 1e-9, "beta={beta} energy={energy}");
            let n = taps.len();
            for k in 0..n {
                assert!(taps[k].is_finite());
                assert!(
                    (taps[k] - taps[n - 1 - k]).abs() < 1e-12,
                    "asymmetry at {k} for beta={beta}"
                );
            }
        }
    }

    #[test]
    fn center_tap_is_the_analytic_peak() {
        let beta = 0.35;
        let taps = srrc_taps(beta, 8, 16).unwrap();
        let center = taps[taps.len() / 2];
        // Unnormalized peak is 1 - beta + 4 beta / pi; the ratio to any
        // other tap survives normalization.
        let raw_peak = 1.0 - beta + 4.0 * beta / std::f64::consts::PI;
        let raw_next = srrc_value(beta, 1.0 / 8.0);
        assert!((center / taps[taps.len() / 2 + 1] - raw_peak / raw_next).abs() < 1e-12);
        assert!(center > 0.0);
        assert_eq!(
            taps.iter().cloned().fold(f64::MIN, f64::max),
            center,
            "peak not at center"
        );
    }

    /// Max self-convolution magnitude at interior symbol-spaced lags
    /// (1 <= k <= span/2 - 1), relative to the center peak. The outermost
    /// lags are excluded: there the two truncated pulses barely overlap
    /// and the correlation measures the cut tails, not the Nyquist
    /// property.
    fn interior_isi(beta: f64, sps: usize, span: usize) -> f64 {
        let taps = srrc_taps(beta, sps as u32, span).unwrap();
        let n = taps.len();
        let mut rc = vec![0.0f64; 2 * n - 1];
        for i in 0..n {
            for j in 0..n {
                rc[i + j] += taps[i] * taps[j];
            }
        }
        let center = n - 1;
        let peak = rc[center];
        assert!((peak - 1.0).abs() < 1e-9); // unit energy
        let mut worst = 0.0f64;
        for k in 1..span / 2 {
            let off = rc[center - k * sps].abs().max(rc[center + k * sps].abs());
            worst = worst.max(off / peak);
        }
        worst
    }

    /// Self-convolution sampled at symbol spacing approximates a unit
    /// impulse: the full raised-cosine response is Nyquist.
    #[test]
    fn self_convolution_is_nyquist_at_symbol_spacing() {
        // The default span, across the supported rolloff range and the
        // symbol-rate extremes.
        for &beta in &[0.1, 0.35, 0.5, 1.0] {
            for &sps in &[2usize, 8, 23] {
                let worst = interior_isi(beta, sps, crate::modsig::SRRC_SPAN);
                assert!(worst < 1e-3, "beta={beta} sps={sps}: ISI {worst:.2e}");
            }
        }
        // A shorter 16-symbol filter still meets the bound at rolloff
        // 0.35, but not at 0.1 (which is why the default is longer).
        assert!(interior_isi(0.35, 8, 16) < 1e-3);
        assert!(interior_isi(0.1, 8, 16) > 1e-3);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(srrc_taps(0.05, 8, 16).is_err());
        assert!(srrc_taps(1.2, 8, 16).is_err());
        assert!(srrc_taps(0.35, 0, 16).is_err());
        assert!(srrc_taps(0.35, 8, 15).is_err());
        assert!(srrc_taps(0.35, 8, 0).is_err());
    }
}
